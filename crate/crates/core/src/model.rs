//! The generator: attention generator plus scene reconstruction network.

use scanet_autograd::{Float, ParamBuilder, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::agn::{Agn, AgnConfig};
use crate::error::Result;
use crate::metrics::{FlopConvention, MacCounter, ModelBudget};
use crate::srn::{Srn, SrnConfig};

pub const MODEL_CONFIG_VERSION: u32 = 1;

/// Every architecture choice needed to rebuild a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub version: u32,
    pub agn: AgnConfig,
    pub srn: SrnConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            version: MODEL_CONFIG_VERSION,
            agn: AgnConfig::default(),
            srn: SrnConfig::default(),
        }
    }
}

impl ModelConfig {
    /// A narrow, shallow variant for fast experiments and tests.
    pub fn small() -> Self {
        Self {
            version: MODEL_CONFIG_VERSION,
            agn: AgnConfig {
                n_daus: 2,
                channels: 8,
                reduction: 2,
                ..AgnConfig::default()
            },
            srn: SrnConfig {
                base_channels: 32,
                n_res_blocks: 2,
                ..SrnConfig::default()
            },
        }
    }

    /// The smallest useful network, for unit-scale checks.
    pub fn tiny() -> Self {
        Self {
            version: MODEL_CONFIG_VERSION,
            agn: AgnConfig {
                n_daus: 1,
                channels: 4,
                reduction: 2,
                ..AgnConfig::default()
            },
            srn: SrnConfig {
                base_channels: 8,
                n_res_blocks: 1,
                ..SrnConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_CONFIG_VERSION {
            return Err(crate::Error::Config(format!(
                "model config version {} (expected {MODEL_CONFIG_VERSION})",
                self.version
            )));
        }
        self.agn.validate()?;
        self.srn.validate()
    }
}

pub struct Generator<T: Float> {
    pub config: ModelConfig,
    pub agn: Option<Agn<T>>,
    pub srn: Srn<T>,
    pub params: ParamStore<T>,
}

/// Outputs of one generator pass.
pub struct GeneratorOutput<T: Float> {
    pub dehazed: Tensor<T>,
    /// Predicted attention map, when the generator has an AGN.
    pub attention: Option<Tensor<T>>,
}

impl<T: Float> Generator<T> {
    /// Builds the generator; without `with_agn` the SRN runs alone and
    /// never blends an attention map.
    pub fn new(config: &ModelConfig, with_agn: bool, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut pb = ParamBuilder::new(seed);
        let agn = if with_agn {
            Some(pb.scope("agn", |pb| Agn::new(pb, &config.agn))?)
        } else {
            None
        };
        let mut srn_cfg = config.srn.clone();
        if !with_agn {
            srn_cfg.inject_early = false;
            srn_cfg.inject_bottleneck = false;
        }
        let srn = Srn::new(&mut pb, &srn_cfg)?;
        Ok(Self {
            config: config.clone(),
            agn,
            srn,
            params: pb.finish(),
        })
    }

    /// Plain inference: the SRN is modulated by the AGN's own map.
    pub fn forward(&self, hazy: &Tensor<T>) -> Result<GeneratorOutput<T>> {
        match &self.agn {
            Some(agn) => {
                let (m, _) = agn.forward(hazy)?;
                Ok(GeneratorOutput {
                    dehazed: self.srn.forward(hazy, Some(&m))?,
                    attention: Some(m),
                })
            }
            None => Ok(GeneratorOutput {
                dehazed: self.srn.forward(hazy, None)?,
                attention: None,
            }),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn count_macs(&self, h: usize, w: usize) -> MacCounter {
        let mut c = MacCounter::default();
        if let Some(agn) = &self.agn {
            agn.account(h, w, &mut c);
        }
        self.srn.account(h, w, &mut c);
        c
    }

    pub fn budget(&self, h: usize, w: usize, convention: FlopConvention) -> ModelBudget {
        ModelBudget::from_counter(self.num_parameters(), &self.count_macs(h, w), convention, h, w)
    }
}
