use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{evaluate_generator, Ablation, TrainConfig, Trainer};
use crate::data::Pair;
use crate::error::{invalid, Error, Result};

/// Training-set scores of one (row, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub row: usize,
    pub label: String,
    pub seed: u64,
    pub steps: u64,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub entries: Vec<AblationEntry>,
}

impl AblationTable {
    pub fn entry(&self, row: usize, seed: u64) -> Option<&AblationEntry> {
        self.entries.iter().find(|e| e.row == row && e.seed == seed)
    }

    /// Mean PSNR and SSIM of a row over its seeds.
    pub fn row_mean(&self, row: usize) -> Option<(f64, f64)> {
        let rows: Vec<_> = self.entries.iter().filter(|e| e.row == row).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some((
            rows.iter().map(|e| e.psnr).sum::<f64>() / n,
            rows.iter().map(|e| e.ssim).sum::<f64>() / n,
        ))
    }

    /// One line per row with the seed-averaged scores.
    pub fn to_markdown(&self) -> String {
        let mut rows: Vec<usize> = self.entries.iter().map(|e| e.row).collect();
        rows.sort_unstable();
        rows.dedup();
        let mut s = String::from("| row | configuration | seeds | PSNR (dB) | SSIM |\n|---|---|---|---|---|\n");
        for r in rows {
            let (p, q) = self.row_mean(r).expect("row present");
            let seeds = self.entries.iter().filter(|e| e.row == r).count();
            let label = &self.entries.iter().find(|e| e.row == r).expect("row present").label;
            let _ = writeln!(s, "| {r} | {label} | {seeds} | {p:.2} | {q:.4} |");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        for e in &self.entries {
            w.serialize(e).map_err(err)?;
        }
        w.flush().map_err(crate::error::io_err(path))
    }
}

/// Trains every `(row, seed)` combination of `base` on `pairs` and scores
/// the result on the same pairs at full resolution. Runs go to
/// `<base.out>/<base.name>/row<r>_seed<s>/`.
pub fn run_ablation(base: &TrainConfig, rows: &[usize], seeds: &[u64], pairs: &[Pair]) -> Result<AblationTable> {
    if rows.is_empty() || seeds.is_empty() {
        return Err(invalid("ablation needs at least one row and one seed"));
    }
    let mut table = AblationTable::default();
    for &row in rows {
        let ablation = Ablation::row(row).ok_or_else(|| invalid(format!("no ablation row {row}")))?;
        for &seed in seeds {
            let cfg = TrainConfig {
                name: format!("row{row}_seed{seed}"),
                out: base.run_dir(),
                seed,
                ablation: ablation.clone(),
                ..base.clone()
            };
            let mut trainer = Trainer::with_pairs(cfg, pairs.to_vec())?;
            let summary = trainer.run(|_| {})?;
            let scores = evaluate_generator(&trainer.generator, pairs)?;
            table.entries.push(AblationEntry {
                row,
                label: ablation.label(),
                seed,
                steps: summary.steps,
                psnr: scores.psnr,
                ssim: scores.ssim,
            });
        }
    }
    Ok(table)
}
