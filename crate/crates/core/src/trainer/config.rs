use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curriculum::CurriculumConfig;
use crate::error::{invalid, Error, Result};
use crate::losses::{ExtractorKind, LossWeights, MsSsimConfig};
use crate::model::ModelConfig;

/// Which components and loss terms take part in training.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub use_agn: bool,
    pub use_sl1a: bool,
    pub use_scl: bool,
    pub use_perceptual: bool,
    pub use_msssim: bool,
    pub use_adversarial: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self::row(7).expect("row 7 exists")
    }
}

impl Ablation {
    /// The seven configurations of the standard ablation table, from the
    /// bare reconstruction network (1) to the full model (7).
    pub fn row(n: usize) -> Option<Self> {
        let flags = match n {
            1 => [false, false, false, false, false, false],
            2 => [true, false, false, false, false, false],
            3 => [true, true, false, false, false, false],
            4 => [true, true, true, false, false, false],
            5 => [true, true, true, true, false, false],
            6 => [true, true, true, true, true, false],
            7 => [true, true, true, true, true, true],
            _ => return None,
        };
        let [use_agn, use_sl1a, use_scl, use_perceptual, use_msssim, use_adversarial] = flags;
        Some(Self {
            use_agn,
            use_sl1a,
            use_scl,
            use_perceptual,
            use_msssim,
            use_adversarial,
        })
    }

    pub fn label(&self) -> String {
        let parts = [
            (self.use_agn, "AGN"),
            (self.use_sl1a, "L^a"),
            (self.use_scl, "SCL"),
            (self.use_perceptual, "per"),
            (self.use_msssim, "MS-SSIM"),
            (self.use_adversarial, "adv"),
        ];
        let mut s = String::from("SRN");
        for (_, name) in parts.iter().filter(|(on, _)| *on) {
            s.push_str(" + ");
            s.push_str(name);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub name: String,
    /// Dataset root with `clear/` and `hazy/`.
    pub data: PathBuf,
    /// Parent of the run directory (`<out>/<name>/`).
    pub out: PathBuf,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub lr_decay_period: usize,
    pub lr_decay_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub scales: Vec<f64>,
    pub patch: usize,
    pub stride: usize,
    pub rotations: Vec<u32>,
    pub hflip: bool,
    pub seed: u64,
    pub max_steps: Option<u64>,
    /// Write a dehazed sample every this many steps (0 disables).
    pub sample_every: u64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    /// Standard deviation of the noise standing in for a "real" residual.
    pub disc_noise_std: f64,
    pub ablation: Ablation,
    pub weights: LossWeights,
    pub curriculum: CurriculumConfig,
    pub msssim: MsSsimConfig,
    pub perceptual: ExtractorKind,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            data: PathBuf::from("data"),
            out: PathBuf::from("run"),
            epochs: 40,
            lr: 1e-4,
            batch: 2,
            lr_decay_period: 150,
            lr_decay_factor: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            scales: vec![0.5, 0.7, 1.0],
            patch: 128,
            stride: 96,
            rotations: vec![0, 90, 180, 270],
            hflip: false,
            seed: 7,
            max_steps: None,
            sample_every: 100,
            checkpoint_every: 10,
            disc_noise_std: 0.02,
            ablation: Ablation::default(),
            weights: LossWeights::default(),
            curriculum: CurriculumConfig::default(),
            msssim: MsSsimConfig::default(),
            perceptual: ExtractorKind::default(),
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// 512 px patches at stride 400, for full-resolution datasets.
    pub fn full_scale(mut self) -> Self {
        self.patch = 512;
        self.stride = 400;
        self
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out.join(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(invalid("epochs and batch must be at least 1"));
        }
        if !(self.lr > 0.0) || self.lr_decay_period == 0 || !(self.lr_decay_factor > 0.0) {
            return Err(invalid("lr, lr_decay_period and lr_decay_factor must be positive"));
        }
        if self.stride == 0 || self.patch == 0 {
            return Err(invalid("patch and stride must be at least 1"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(invalid("scales must be a non-empty list in (0, 1]"));
        }
        if self.rotations.is_empty() || self.rotations.iter().any(|r| r % 90 != 0 || *r >= 360) {
            return Err(invalid("rotations must be a non-empty subset of 0/90/180/270"));
        }
        if self.patch < crate::agn::MIN_SIZE {
            return Err(invalid(format!("patch must be at least {}", crate::agn::MIN_SIZE)));
        }
        self.weights.validate()?;
        self.curriculum.validate()?;
        self.model.validate()
    }

    /// `lr0 * factor^floor(epoch / period)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_factor.powi((epoch / self.lr_decay_period) as i32)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::io_err(path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
