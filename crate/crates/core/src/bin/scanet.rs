use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scanet::data::{list_pngs, load_pairs};
use scanet::metrics::{evaluate, FlopConvention};
use scanet::synth::{generate_dataset_with, HazeOptions};
use scanet::trainer::{self, dehaze_image, load_generator, run_ablation, Ablation, TrainConfig};
use scanet::{Error, Generator, Image, ModelConfig, Result};

#[derive(Parser)]
#[command(name = "scanet", version, about = "Non-homogeneous dehazing: data, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic hazy/clear pairs and a manifest.
    GenerateData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, visible_alias = "n", default_value_t = 16)]
        pairs: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Use a spatially varying airlight instead of a scalar one.
        #[arg(long)]
        per_pixel_airlight: bool,
        /// Haze these PNGs instead of procedural scenes.
        #[arg(long)]
        clear_source: Option<PathBuf>,
    },
    /// Train a model, or continue one with --resume.
    Train {
        #[command(flatten)]
        overrides: TrainOverrides,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score dehazed images against references: either a checkpoint run
    /// over a paired dataset, or two directories of same-named PNGs.
    Eval {
        #[arg(long, requires = "data", conflicts_with_all = ["pred", "gt"])]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "gt", required_unless_present = "checkpoint")]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Per-image scores.
        #[arg(long, default_value = "eval.csv")]
        csv: PathBuf,
        /// Aggregate scores.
        #[arg(long, default_value = "eval.json")]
        json: PathBuf,
    },
    /// Dehaze one image.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Also save the attention map.
        #[arg(long)]
        attention: Option<PathBuf>,
    },
    /// Print parameter and FLOP estimates.
    Budget {
        /// Input size as HxW.
        #[arg(long, default_value = "1200x1600", value_parser = parse_size)]
        input: (usize, usize),
        /// Model configuration JSON; defaults to the standard model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        no_agn: bool,
    },
    /// Train several ablation rows over several seeds and tabulate them.
    Ablate {
        #[command(flatten)]
        overrides: TrainOverrides,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 4])]
        rows: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct TrainOverrides {
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Ablation row 1-7.
    #[arg(long)]
    row: Option<usize>,
    /// Use the reduced model configuration.
    #[arg(long)]
    small: bool,
}

impl TrainOverrides {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data = v.clone();
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = &self.name {
            c.name = v.clone();
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if self.max_steps.is_some() {
            c.max_steps = self.max_steps;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.lr {
            c.lr = v;
        }
        if let Some(v) = self.batch {
            c.batch = v;
        }
        if let Some(v) = self.patch {
            c.patch = v;
        }
        if let Some(v) = self.stride {
            c.stride = v;
        }
        if let Some(r) = self.row {
            c.ablation = Ablation::row(r).ok_or_else(|| Error::Config(format!("no ablation row {r}")))?;
        }
        if self.small {
            c.model = ModelConfig::small();
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HxW")?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    Ok((h, w))
}

/// Same-named PNGs from two directories.
fn load_dirs(pred: &Path, gt: &Path) -> Result<(Vec<String>, Vec<Image>, Vec<Image>)> {
    let (mut names, mut preds, mut gts) = (Vec::new(), Vec::new(), Vec::new());
    for p in list_pngs(pred)? {
        let name = p.file_name().expect("listed file").to_string_lossy().into_owned();
        let g = gt.join(&name);
        if !g.exists() {
            return Err(Error::Config(format!("{} has no reference {}", p.display(), g.display())));
        }
        preds.push(Image::load_png(&p)?);
        gts.push(Image::load_png(&g)?);
        names.push(name);
    }
    if names.is_empty() {
        return Err(Error::Config(format!("no PNG files in {}", pred.display())));
    }
    Ok((names, preds, gts))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData {
            out,
            pairs,
            size,
            seed,
            per_pixel_airlight,
            clear_source,
        } => {
            let opts = HazeOptions {
                per_pixel_airlight,
                ..HazeOptions::default()
            };
            let m = generate_dataset_with(pairs, size, &out, seed, &opts, clear_source.as_deref())?;
            println!("wrote {} pairs to {}", m.pairs.len(), out.display());
        }
        Command::Train { overrides, resume } => {
            let summary = match resume {
                Some(ck) => trainer::resume(&ck, overrides.epochs, overrides.max_steps)?,
                None => {
                    let cfg = overrides.resolve()?;
                    trainer::Trainer::new(cfg)?.run(|r| {
                        if r.step % 50 == 0 {
                            eprintln!(
                                "step {:>6} epoch {:>3} joint {:.4} lambda {:.3} psnr {:.2}",
                                r.step, r.epoch, r.joint, r.lambda, r.psnr_train
                            );
                        }
                    })?
                }
            };
            println!(
                "{} steps, {} epochs; checkpoint {}",
                summary.steps,
                summary.epochs_completed,
                summary.final_checkpoint.display()
            );
        }
        Command::Eval {
            checkpoint,
            data,
            pred,
            gt,
            csv,
            json,
        } => {
            let (names, outputs, targets) = match (checkpoint, data, pred, gt) {
                (Some(ck), Some(data), ..) => {
                    let (g, _) = load_generator(&ck)?;
                    let pairs = load_pairs(&data)?;
                    let outputs = pairs
                        .iter()
                        .map(|p| Ok(dehaze_image(&g, &p.hazy)?.0))
                        .collect::<Result<Vec<Image>>>()?;
                    let names = pairs.iter().map(|p| p.name.clone()).collect();
                    (names, outputs, pairs.into_iter().map(|p| p.clear).collect())
                }
                (_, _, Some(pred), Some(gt)) => load_dirs(&pred, &gt)?,
                _ => unreachable!("clap enforces one of the two argument groups"),
            };
            let result = evaluate(
                names
                    .into_iter()
                    .zip(outputs.iter().zip(&targets))
                    .map(|(n, (o, t))| (n, o, t)),
            )?;
            let csv_err = |source| Error::Csv {
                path: csv.clone(),
                source,
            };
            let mut w = csv::Writer::from_path(&csv).map_err(csv_err)?;
            for s in &result.per_image {
                w.serialize(s).map_err(csv_err)?;
            }
            w.flush().map_err(|source| Error::Io {
                path: csv.clone(),
                source,
            })?;
            write_json(
                &json,
                &serde_json::json!({ "images": result.per_image.len(), "psnr": result.psnr, "ssim": result.ssim }),
            )?;
            println!("PSNR {:.2} dB  SSIM {:.4}  ({} images)", result.psnr, result.ssim, result.per_image.len());
        }
        Command::Infer {
            checkpoint,
            input,
            output,
            attention,
        } => {
            let (g, _) = load_generator(&checkpoint)?;
            let (out, m) = dehaze_image(&g, &Image::load_png(&input)?)?;
            out.save_png(&output)?;
            if let Some(path) = attention {
                let m = m.ok_or_else(|| Error::Config("this model has no attention generator".into()))?;
                m.clamp01().save_png(&path)?;
            }
        }
        Command::Budget { input, model, no_agn } => {
            let cfg = match model {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|source| Error::Io { path: p.clone(), source })?;
                    serde_json::from_str(&text).map_err(|source| Error::Json {
                        context: p.display().to_string(),
                        source,
                    })?
                }
                None => ModelConfig::default(),
            };
            let g = Generator::<f32>::new(&cfg, !no_agn, 0)?;
            for conv in [FlopConvention::TwoPerMac, FlopConvention::HalfMac] {
                println!("[{conv:?}]\n{}", g.budget(input.0, input.1, conv));
            }
        }
        Command::Ablate { overrides, rows, seeds } => {
            let base = overrides.resolve()?;
            let pairs = load_pairs(&base.data)?;
            let table = run_ablation(&base, &rows, &seeds, &pairs)?;
            let dir = base.run_dir();
            table.write_csv(&dir.join("ablation.csv"))?;
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
