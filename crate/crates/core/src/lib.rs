//! Non-homogeneous image dehazing with an attention generator, a scene
//! reconstruction network and a self-paced semi-curricular attention
//! schedule, trained on synthetic haze.
//!
//! Start with [`synth`] to make data, [`trainer::train`] to fit a model and
//! [`metrics`] to score it. The `scanet` binary wraps these as subcommands.

pub mod agn;
pub mod attention;
pub mod curriculum;
pub mod data;
mod error;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod srn;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use image::Image;
pub use model::{Generator, ModelConfig};
pub use scanet_autograd as autograd;
