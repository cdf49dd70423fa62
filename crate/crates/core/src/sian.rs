//! Attention heads mapping an octave's DoG stack to a mask in (0, 1).

use crate::error::{Error, Result};
use crate::net::params::{Init, ParamSpec};
use crate::scale_space::{DogOctave, DOG_PER_OCTAVE, SCALES};
use crate::tensor::{Graph, Var};

/// Parameter name prefix of the head used at `scale`.
pub fn head_prefix(scale: usize, shared: bool) -> String {
    if shared {
        "sian.shared".to_string()
    } else {
        format!("sian.s{scale}")
    }
}

/// Parameter layout of all heads for feature width `channels`.
pub fn param_specs(channels: usize, single_conv: bool, shared: bool) -> Vec<ParamSpec> {
    let prefixes: Vec<String> = if shared {
        vec![head_prefix(1, true)]
    } else {
        SCALES.iter().map(|&s| head_prefix(s, false)).collect()
    };
    let mut specs = Vec::new();
    for p in prefixes {
        let stacked = DOG_PER_OCTAVE * channels;
        specs.push(ParamSpec::conv(format!("{p}.conv1"), channels, stacked, 3, Init::FanIn));
        if !single_conv {
            specs.push(ParamSpec::conv(format!("{p}.conv2"), channels, channels, 3, Init::FanIn));
        }
    }
    specs.into_iter().flatten().collect()
}

/// One bound head: `conv1 -> relu [-> conv2] -> sigmoid`.
#[derive(Clone, Copy, Debug)]
pub struct AttentionHead {
    pub conv1: (Var, Var),
    pub conv2: Option<(Var, Var)>,
}

impl AttentionHead {
    /// Mask for one octave: the five DoG layers are stacked along channels.
    pub fn mask(&self, g: &mut Graph, dog: &DogOctave) -> Result<Var> {
        if dog.layers.len() != DOG_PER_OCTAVE {
            return Err(Error::InvalidArgument(format!(
                "attention head needs {DOG_PER_OCTAVE} DoG layers, got {}",
                dog.layers.len()
            )));
        }
        let stacked = g.concat_all(&dog.layers)?;
        let expected = g.shape(self.conv1.0).0[1];
        if g.shape(stacked).channels() != expected {
            return Err(Error::DimensionMismatch {
                op: "attention head input",
                left: g.shape(stacked),
                right: g.shape(self.conv1.0),
            });
        }
        let h = g.conv2d(stacked, self.conv1.0, self.conv1.1, 1, 1)?;
        let mut h = g.relu(h);
        if let Some((w, b)) = self.conv2 {
            h = g.conv2d(h, w, b, 1, 1)?;
        }
        Ok(g.sigmoid(h))
    }
}
