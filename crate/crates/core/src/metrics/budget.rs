//! Analytic parameter and operation counts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// How multiply-accumulates are turned into a FLOP figure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlopConvention {
    /// One multiply plus one add per MAC.
    TwoPerMac,
    /// Half a FLOP per MAC. Published dehazing comparison tables follow
    /// this scale: AOD-Net's 1746 MACs per pixel at 1200x1600 are listed as
    /// 1.68G.
    HalfMac,
}

impl FlopConvention {
    pub fn flops(self, macs: u64) -> f64 {
        match self {
            FlopConvention::TwoPerMac => 2.0 * macs as f64,
            FlopConvention::HalfMac => 0.5 * macs as f64,
        }
    }
}

/// Accumulates multiply-accumulate counts layer by layer.
#[derive(Clone, Debug, Default)]
pub struct MacCounter {
    pub layers: Vec<(String, u64)>,
    pub uncounted: BTreeSet<&'static str>,
}

impl MacCounter {
    pub fn add(&mut self, name: impl Into<String>, macs: u64) {
        self.layers.push((name.into(), macs));
    }

    /// Records an op kind that contributes no MACs to the total.
    pub fn skip(&mut self, kind: &'static str) {
        self.uncounted.insert(kind);
    }

    pub fn total(&self) -> u64 {
        self.layers.iter().map(|(_, m)| m).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBudget {
    pub parameters: usize,
    pub macs: u64,
    pub flops: f64,
    pub convention: FlopConvention,
    pub height: usize,
    pub width: usize,
    /// Op kinds present in the model but not included in `macs`.
    pub uncounted: Vec<String>,
}

impl ModelBudget {
    pub fn from_counter(parameters: usize, counter: &MacCounter, convention: FlopConvention, height: usize, width: usize) -> Self {
        let macs = counter.total();
        Self {
            parameters,
            macs,
            flops: convention.flops(macs),
            convention,
            height,
            width,
            uncounted: counter.uncounted.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl std::fmt::Display for ModelBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "input       {}x{}", self.height, self.width)?;
        writeln!(f, "parameters  {:.2}M ({})", self.parameters as f64 / 1e6, self.parameters)?;
        writeln!(f, "MACs        {:.2}G", self.macs as f64 / 1e9)?;
        writeln!(f, "FLOPs       {:.2}G ({:?})", self.flops / 1e9, self.convention)?;
        write!(f, "uncounted   {}", self.uncounted.join(", "))
    }
}
