use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale_space::ScaleSpaceParams;

/// Architecture of the recurrent deraining network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Feature width of every convolution inside a stage.
    pub channels: usize,
    /// Number of recurrent stages sharing one parameter set.
    pub stages: usize,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub k: f64,
    pub use_sian: bool,
    pub use_lstm: bool,
    /// Single conv + ReLU before the sigmoid instead of conv-ReLU-conv.
    pub sian_single_conv: bool,
    /// One attention head for all three scales.
    pub share_sian_heads: bool,
    /// Two 3x3 conv + ReLU layers in front of each ConvLSTM.
    pub lstm_pre_convs: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        let ss = ScaleSpaceParams::default();
        NetConfig {
            channels: 32,
            stages: 6,
            sigma: ss.sigma,
            sigma_prime: ss.sigma_prime,
            k: ss.k,
            use_sian: true,
            use_lstm: true,
            sian_single_conv: false,
            share_sian_heads: false,
            lstm_pre_convs: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Config("channels must be >= 1".into()));
        }
        if self.stages == 0 {
            return Err(Error::Config("stages must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma_prime > 0.0 && self.k > 1.0) {
            return Err(Error::Config(
                "sigma and sigma_prime must be positive and k > 1".into(),
            ));
        }
        Ok(())
    }

    pub fn scale_space(&self) -> ScaleSpaceParams {
        ScaleSpaceParams {
            sigma: self.sigma,
            sigma_prime: self.sigma_prime,
            k: self.k,
        }
    }

    /// Applies one of the ablation rows on top of this configuration.
    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::Baseline => {
                self.use_sian = false;
                self.use_lstm = false;
                self.stages = 1;
            }
            Ablation::Lstm => {
                self.use_sian = false;
                self.use_lstm = true;
            }
            Ablation::Full => {
                self.use_sian = true;
                self.use_lstm = true;
            }
        }
        self
    }
}

/// The three architecture variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    /// One stage, no attention, no recurrence.
    Baseline,
    /// Recurrent stages with ConvLSTM, no attention.
    Lstm,
    /// Attention and recurrence.
    Full,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Ablation::Baseline),
            "lstm" => Ok(Ablation::Lstm),
            "full" => Ok(Ablation::Full),
            other => Err(Error::Config(format!(
                "unknown ablation `{other}` (expected baseline|lstm|full)"
            ))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Baseline => "baseline",
            Ablation::Lstm => "lstm",
            Ablation::Full => "full",
        })
    }
}
