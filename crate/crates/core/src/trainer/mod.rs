//! The training loop, checkpoints, inference helpers and ablation sweeps.

mod ablation;
mod checkpoint;
mod config;

pub use ablation::{run_ablation, AblationEntry, AblationTable};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{Ablation, TrainConfig};

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scanet_autograd::{Adam, AdamConfig, ParamBuilder, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::attention::attention_target;
use crate::curriculum::{blend_attention_tensor, CurriculumState};
use crate::data::{augment, extract_patches, load_pairs, Pair};
use crate::error::{invalid, io_err, Error, Result};
use crate::image::{from_tensor, to_tensor, Image};
use crate::losses::{
    adversarial_loss, discriminator_loss, joint_loss, max_scales, ms_ssim_loss, perceptual_loss, smooth_l1,
    Discriminator, FeatureExtractor, LossTerms, MsSsimConfig,
};
use crate::metrics::{evaluate, psnr, EvalResult, PSNR_CAP};
use crate::model::Generator;

/// Environment variable that forces single-threaded kernels when set to `1`.
pub const DETERMINISTIC_ENV: &str = "SCANET_DETERMINISTIC";

const DISC_SEED_SALT: u64 = 0xd15c_0000_0000_0001;
const NOISE_SEED_SALT: u64 = 0x0123_4567_89ab_cdef;

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub sl1: f64,
    pub sl1_a: f64,
    pub perceptual: f64,
    pub msssim: f64,
    pub adversarial: f64,
    pub joint: f64,
    pub lambda: f64,
    pub psnr_train: f64,
    pub epoch: usize,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    /// Total optimisation steps, including any before a resume.
    pub steps: u64,
    pub epochs_completed: usize,
    /// Records of the steps taken by this invocation.
    pub records: Vec<StepRecord>,
    pub final_checkpoint: PathBuf,
}

/// A training example: hazy input, clear target and attention target.
#[derive(Clone, Debug)]
pub struct Sample {
    pub hazy: Image,
    pub clear: Image,
    pub attention: Image,
}

/// Builds the shuffled, augmented patch list for one epoch. The random
/// stream depends only on the seed and the epoch, so a resumed run sees the
/// same data as an uninterrupted one.
pub fn epoch_samples(pairs: &[Pair], cfg: &TrainConfig, epoch: usize) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ epoch as u64);
    let mut out = Vec::new();
    for pair in pairs {
        let scale = cfg.scales[rng.gen_range(0..cfg.scales.len())];
        let (w0, h0) = (pair.hazy.width, pair.hazy.height);
        let shortest = w0.min(h0) as f64;
        // Never shrink below one patch.
        let scale = scale.max(cfg.patch as f64 / shortest);
        let (hazy, clear) = if scale < 1.0 {
            let w = ((w0 as f64 * scale).round() as usize).max(cfg.patch);
            let h = ((h0 as f64 * scale).round() as usize).max(cfg.patch);
            (pair.hazy.resize(w, h)?, pair.clear.resize(w, h)?)
        } else {
            (pair.hazy.clone(), pair.clear.clone())
        };
        for (h, c) in extract_patches(&hazy, &clear, cfg.patch, cfg.stride)? {
            let degrees = cfg.rotations[rng.gen_range(0..cfg.rotations.len())];
            let flip = cfg.hflip && rng.gen_bool(0.5);
            let (h, c) = augment(&h, &c, degrees, flip)?;
            let attention = attention_target(&h, &c)?;
            out.push(Sample {
                hazy: h,
                clear: c,
                attention,
            });
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}

fn adam_config(cfg: &TrainConfig, lr: f64) -> AdamConfig {
    AdamConfig {
        lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.adam_eps,
    }
}

fn deterministic_requested() -> bool {
    std::env::var(DETERMINISTIC_ENV).is_ok_and(|v| v == "1")
}

/// Owns the model, optimizers and data of one run.
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator<f32>,
    disc: Option<(Discriminator<f32>, ParamStore<f32>, Adam)>,
    gen_opt: Adam,
    extractor: Option<FeatureExtractor<f32>>,
    curriculum: CurriculumState,
    pairs: Vec<Pair>,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
}

impl Trainer {
    /// Loads the pairs named by `config.data`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        let pairs = load_pairs(&config.data)?;
        Self::with_pairs(config, pairs)
    }

    pub fn with_pairs(config: TrainConfig, pairs: Vec<Pair>) -> Result<Self> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(invalid("training needs at least one pair"));
        }
        let ab = &config.ablation;
        if ab.use_sl1a && !ab.use_agn {
            return Err(Error::Config("use_sl1a requires use_agn".into()));
        }
        if ab.use_scl && !ab.use_agn {
            return Err(Error::Config("use_scl requires use_agn".into()));
        }
        if ab.use_msssim && max_scales(config.patch, config.patch, config.msssim.window) == 0 {
            return Err(Error::Config(format!(
                "patch {} is smaller than the MS-SSIM window {}",
                config.patch, config.msssim.window
            )));
        }
        let generator = Generator::new(&config.model, ab.use_agn, config.seed)?;
        let lr = config.lr_at(0);
        let gen_opt = Adam::new(&generator.params, adam_config(&config, lr));
        let disc = ab.use_adversarial.then(|| {
            let mut pb = ParamBuilder::new(config.seed ^ DISC_SEED_SALT);
            let d = Discriminator::new(&mut pb);
            let store = pb.finish();
            let opt = Adam::new(&store, adam_config(&config, lr));
            (d, store, opt)
        });
        let extractor = if ab.use_perceptual {
            Some(FeatureExtractor::new(&config.perceptual)?)
        } else {
            None
        };
        let curriculum = CurriculumState::new(config.curriculum.clone())?;
        Ok(Self {
            config,
            generator,
            disc,
            gen_opt,
            extractor,
            curriculum,
            pairs,
            epoch: 0,
            step: 0,
        })
    }

    /// Rebuilds a trainer from a checkpoint, training on `pairs`.
    pub fn resume(ckpt: &Checkpoint, pairs: Vec<Pair>) -> Result<Self> {
        let mut t = Self::with_pairs(ckpt.config.clone(), pairs)?;
        ckpt.restore_params(&t.generator.params)?;
        ckpt.restore_optimizer("gen", &mut t.gen_opt)?;
        if let Some((_, store, opt)) = &mut t.disc {
            ckpt.restore_params(store)?;
            ckpt.restore_optimizer("disc", opt)?;
        }
        t.epoch = ckpt.epoch;
        t.step = ckpt.step;
        Ok(t)
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.epoch, self.step, self.config.clone());
        ck.add_params(&self.generator.params);
        ck.add_optimizer("gen", &self.gen_opt);
        if let Some((_, store, opt)) = &self.disc {
            ck.add_params(store);
            ck.add_optimizer("disc", opt);
        }
        ck
    }

    fn msssim_config(&self, h: usize, w: usize) -> MsSsimConfig {
        let cfg = &self.config.msssim;
        MsSsimConfig {
            scales: cfg.scales.min(max_scales(h, w, cfg.window)),
            ..cfg.clone()
        }
    }

    /// One optimisation step on a batch. Returns the logged record and the
    /// dehazed batch.
    pub fn train_step(&mut self, batch: &[&Sample]) -> Result<(StepRecord, Tensor<f32>)> {
        let hazy_imgs: Vec<&Image> = batch.iter().map(|s| &s.hazy).collect();
        let clear_imgs: Vec<&Image> = batch.iter().map(|s| &s.clear).collect();
        let hazy: Tensor<f32> = to_tensor(&hazy_imgs)?;
        let clear: Tensor<f32> = to_tensor(&clear_imgs)?;
        let (_, _, h, w) = hazy.dims4()?;
        let frac = self.epoch as f64 / self.config.epochs as f64;
        let ab = self.config.ablation.clone();

        let mut lambda = 1.0;
        let mut sl1_a = None;
        let mut m = None;
        if let Some(agn) = &self.generator.agn {
            let att_imgs: Vec<&Image> = batch.iter().map(|s| &s.attention).collect();
            let m_gt: Tensor<f32> = to_tensor(&att_imgs)?;
            let (m_g, _) = agn.forward(&hazy)?;
            let la = smooth_l1(&m_g, &m_gt)?;
            if ab.use_scl {
                lambda = self.curriculum.update(f64::from(la.item()?), frac)?;
            }
            m = Some(blend_attention_tensor(&m_g, &m_gt, lambda)?);
            if ab.use_sl1a {
                sl1_a = Some(la);
            }
        }
        let dehazed = self.generator.srn.forward(&hazy, m.as_ref())?;

        let perceptual = match &self.extractor {
            Some(fx) => Some(perceptual_loss(&dehazed, &clear, fx)?),
            None => None,
        };
        let msssim = if ab.use_msssim {
            Some(ms_ssim_loss(&dehazed, &clear, &self.msssim_config(h, w))?)
        } else {
            None
        };
        let residual = clear.sub(&dehazed)?;
        let adversarial = match &self.disc {
            Some((d, ..)) => Some(adversarial_loss(&residual, d)?),
            None => None,
        };
        let terms = LossTerms {
            sl1: smooth_l1(&dehazed, &clear)?,
            sl1_a,
            perceptual,
            msssim,
            adversarial,
        };
        let (joint, report) = joint_loss(&terms, &self.config.weights)?;
        let grads = joint.backward()?;
        self.gen_opt.step(&self.generator.params, &grads)?;

        if let Some((d, store, opt)) = &mut self.disc {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ NOISE_SEED_SALT ^ self.step);
            let normal = Normal::new(0.0, self.config.disc_noise_std)
                .map_err(|e| Error::Config(format!("disc_noise_std: {e}")))?;
            let noise = (0..residual.numel()).map(|_| normal.sample(&mut rng) as f32).collect();
            let real = Tensor::from_vec(noise, residual.shape())?;
            let loss = discriminator_loss(&d.forward(&real)?, &d.forward(&residual.detach())?)?;
            let g = loss.backward()?;
            opt.step(store, &g)?;
        }

        let dehazed = dehazed.detach();
        let out_imgs = from_tensor(&dehazed)?;
        let mut psnr_sum = 0.0;
        for (o, c) in out_imgs.iter().zip(&clear_imgs) {
            psnr_sum += psnr(o, c, PSNR_CAP)?;
        }
        self.step += 1;
        let record = StepRecord {
            step: self.step,
            sl1: report.sl1,
            sl1_a: report.sl1_a,
            perceptual: report.perceptual,
            msssim: report.msssim,
            adversarial: report.adversarial,
            joint: report.joint,
            lambda,
            psnr_train: psnr_sum / out_imgs.len() as f64,
            epoch: self.epoch,
            lr: self.gen_opt.config.lr,
        };
        Ok((record, dehazed))
    }

    fn set_lr(&mut self, lr: f64) {
        self.gen_opt.set_lr(lr);
        if let Some((_, _, opt)) = &mut self.disc {
            opt.set_lr(lr);
        }
    }

    /// Trains until `config.epochs` epochs or `config.max_steps` steps,
    /// writing `config.json`, `metrics.csv`, samples and checkpoints under
    /// the run directory. `on_step` sees every record as it is produced.
    pub fn run(&mut self, mut on_step: impl FnMut(&StepRecord)) -> Result<TrainSummary> {
        if deterministic_requested() {
            scanet_autograd::set_parallel(false);
        }
        let run_dir = self.config.run_dir();
        let ck_dir = run_dir.join("checkpoints");
        let sample_dir = run_dir.join("samples");
        for d in [&run_dir, &ck_dir, &sample_dir] {
            fs::create_dir_all(d).map_err(io_err(d.as_path()))?;
        }
        let cfg_path = run_dir.join("config.json");
        fs::write(&cfg_path, self.config.to_json()).map_err(io_err(&cfg_path))?;

        let csv_path = run_dir.join("metrics.csv");
        let fresh = self.step == 0 || !csv_path.exists();
        let file = fs::OpenOptions::new()
            .create(true)
            .append(!fresh)
            .write(true)
            .truncate(fresh)
            .open(&csv_path)
            .map_err(io_err(&csv_path))?;
        let mut csv = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        let csv_err = |source| Error::Csv {
            path: csv_path.clone(),
            source,
        };

        let mut records = Vec::new();
        let limit = self.config.max_steps.unwrap_or(u64::MAX);
        'epochs: while self.epoch < self.config.epochs {
            if self.step >= limit {
                break;
            }
            self.set_lr(self.config.lr_at(self.epoch));
            let samples = epoch_samples(&self.pairs, &self.config, self.epoch)?;
            let batch_size = self.config.batch;
            for chunk in samples.chunks(batch_size) {
                let batch: Vec<&Sample> = chunk.iter().collect();
                let (rec, dehazed) = self.train_step(&batch)?;
                csv.serialize(&rec).map_err(csv_err)?;
                on_step(&rec);
                if self.config.sample_every > 0 && rec.step % self.config.sample_every == 0 {
                    let img = from_tensor(&dehazed.narrow(0, 0, 1)?)?.remove(0).clamp01();
                    img.save_png(&sample_dir.join(format!("step_{:06}.png", rec.step)))?;
                }
                records.push(rec);
                if self.step >= limit {
                    break 'epochs;
                }
            }
            self.epoch += 1;
            csv.flush().map_err(io_err(&csv_path))?;
            let every = self.config.checkpoint_every;
            if every > 0 && self.epoch % every == 0 {
                let p = ck_dir.join(format!("epoch_{:04}.ckpt", self.epoch));
                self.checkpoint().save(&p)?;
            }
        }
        csv.flush().map_err(io_err(&csv_path))?;
        let final_path = ck_dir.join("final.ckpt");
        self.checkpoint().save(&final_path)?;
        Ok(TrainSummary {
            run_dir,
            steps: self.step,
            epochs_completed: self.epoch,
            records,
            final_checkpoint: final_path,
        })
    }
}

/// Trains from scratch with the pairs under `config.data`.
pub fn train(config: &TrainConfig) -> Result<TrainSummary> {
    Trainer::new(config.clone())?.run(|_| {})
}

/// Continues a run from a checkpoint file, optionally raising the epoch or
/// step limits, and appends to the existing `metrics.csv`.
pub fn resume(path: &Path, epochs: Option<usize>, max_steps: Option<u64>) -> Result<TrainSummary> {
    let mut ck = Checkpoint::load(path)?;
    if let Some(e) = epochs {
        ck.config.epochs = e;
    }
    if max_steps.is_some() {
        ck.config.max_steps = max_steps;
    }
    let pairs = load_pairs(&ck.config.data)?;
    Trainer::resume(&ck, pairs)?.run(|_| {})
}

/// Restores the generator stored in a checkpoint.
pub fn load_generator(path: &Path) -> Result<(Generator<f32>, TrainConfig)> {
    let ck = Checkpoint::load(path)?;
    let g = Generator::new(&ck.config.model, ck.config.ablation.use_agn, ck.config.seed)?;
    ck.restore_params(&g.params)?;
    Ok((g, ck.config))
}

/// Dehazes a whole image, returning the result (clamped to `[0, 1]`) and
/// the attention map when the model has an attention generator.
pub fn dehaze_image(generator: &Generator<f32>, hazy: &Image) -> Result<(Image, Option<Image>)> {
    if hazy.channels != 3 {
        return Err(invalid(format!("expected an RGB image, got {} channels", hazy.channels)));
    }
    let x: Tensor<f32> = to_tensor(&[hazy])?;
    let out = generator.forward(&x)?;
    let dehazed = from_tensor(&out.dehazed)?.remove(0).clamp01();
    let attention = match out.attention {
        Some(m) => Some(from_tensor(&m)?.remove(0)),
        None => None,
    };
    Ok((dehazed, attention))
}

/// PSNR/SSIM of the generator's output on each pair.
pub fn evaluate_generator(generator: &Generator<f32>, pairs: &[Pair]) -> Result<EvalResult> {
    let outputs = pairs
        .iter()
        .map(|p| Ok(dehaze_image(generator, &p.hazy)?.0))
        .collect::<Result<Vec<_>>>()?;
    evaluate(
        pairs
            .iter()
            .zip(&outputs)
            .map(|(p, o)| (p.name.clone(), o, &p.clear)),
    )
}
