use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetConfig;
use crate::error::{Error, Result};
use crate::scale_space::SCALES;
use crate::sian;
use crate::tensor::{Graph, Shape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// Uniform in `+-1/sqrt(fan_in)`.
    FanIn,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Shape,
    pub init: Init,
    pub fan_in: usize,
}

impl ParamSpec {
    /// Weight `[out, in, k, k]` and bias `[out]` of one convolution.
    pub fn conv(prefix: String, out_c: usize, in_c: usize, k: usize, init: Init) -> [ParamSpec; 2] {
        let fan_in = in_c * k * k;
        [
            ParamSpec {
                name: format!("{prefix}.weight"),
                shape: Shape::new(out_c, in_c, k, k),
                init,
                fan_in,
            },
            ParamSpec {
                name: format!("{prefix}.bias"),
                shape: Shape::new(out_c, 1, 1, 1),
                init,
                fan_in,
            },
        ]
    }
}

pub fn lstm_prefix(scale: usize) -> String {
    format!("lstm.s{scale}")
}

/// Every learnable tensor `config` needs, in a fixed order.
pub fn param_specs(config: &NetConfig) -> Vec<ParamSpec> {
    let c = config.channels;
    let mut specs: Vec<[ParamSpec; 2]> = vec![ParamSpec::conv("extract".into(), c, 6, 3, Init::FanIn)];
    for s in SCALES {
        specs.push(ParamSpec::conv(format!("scale{s}.conv"), c, c, 3, Init::FanIn));
    }
    if config.use_lstm {
        for s in SCALES {
            let p = lstm_prefix(s);
            if config.lstm_pre_convs {
                specs.push(ParamSpec::conv(format!("{p}.pre1"), c, c, 3, Init::FanIn));
                specs.push(ParamSpec::conv(format!("{p}.pre2"), c, c, 3, Init::FanIn));
            }
            specs.push(ParamSpec::conv(format!("{p}.gates"), 4 * c, 2 * c, 3, Init::FanIn));
        }
    }
    specs.push(ParamSpec::conv("fuse".into(), c, 3 * c, 3, Init::FanIn));
    for b in 1..=2 {
        for i in 1..=2 {
            specs.push(ParamSpec::conv(format!("res.block{b}.conv{i}"), c, c, 3, Init::FanIn));
        }
    }
    specs.push(ParamSpec::conv("res.out".into(), 3, c, 3, Init::Zero));
    let mut out: Vec<ParamSpec> = specs.into_iter().flatten().collect();
    if config.use_sian {
        out.extend(sian::param_specs(
            c,
            config.sian_single_conv,
            config.share_sian_heads,
        ));
    }
    out
}

/// Named learnable tensors of the network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    tensors: BTreeMap<String, Tensor>,
}

impl NetworkParams {
    /// Fresh parameters: fan-in uniform everywhere except the final
    /// rain-layer convolution, which starts at zero.
    pub fn init(config: &NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for spec in param_specs(config) {
            let t = match spec.init {
                Init::Zero => Tensor::zeros(spec.shape),
                Init::FanIn => {
                    let bound = 1.0 / (spec.fan_in as f64).sqrt();
                    let data = (0..spec.shape.numel())
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect();
                    Tensor::new(spec.shape, data).expect("spec shape")
                }
            };
            tensors.insert(spec.name, t);
        }
        NetworkParams { tensors }
    }

    /// Wraps an existing map after checking it against `config`.
    pub fn from_map(config: &NetConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        let specs = param_specs(config);
        if specs.len() != tensors.len() {
            if let Some(extra) = tensors
                .keys()
                .find(|k| !specs.iter().any(|s| &s.name == *k))
            {
                return Err(Error::UnknownParameter(extra.clone()));
            }
        }
        for spec in &specs {
            let t = tensors
                .get(&spec.name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{}`", spec.name)))?;
            if t.shape() != spec.shape {
                return Err(Error::DimensionMismatch {
                    op: "parameter shape",
                    left: t.shape(),
                    right: spec.shape,
                });
            }
        }
        Ok(NetworkParams { tensors })
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Records every parameter as a trainable leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(name, t)| (name.clone(), g.param(name, t.clone())))
            .collect();
        BoundParams { vars }
    }

    /// Records every parameter as a constant (inference only).
    pub fn bind_frozen(&self, g: &mut Graph) -> BoundParams {
        let vars = self
            .tensors
            .iter()
            .map(|(name, t)| (name.clone(), g.constant(t.clone())))
            .collect();
        BoundParams { vars }
    }
}

/// Parameters recorded in one graph.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: HashMap<String, Var>,
}

impl BoundParams {
    /// Binds already-created graph nodes by name.
    pub fn from_vars(vars: impl IntoIterator<Item = (String, Var)>) -> Self {
        BoundParams {
            vars: vars.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// `(weight, bias)` of the convolution named `prefix`.
    pub fn conv(&self, prefix: &str) -> Result<(Var, Var)> {
        Ok((
            self.get(&format!("{prefix}.weight"))?,
            self.get(&format!("{prefix}.bias"))?,
        ))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }
}
