//! The recurrent deraining network.
//!
//! One stage: features of `X ⊕ X_(k-1)`, average-pooled to scales 1/2/4 and
//! convolved; attention masks from the DoG pyramid of the features gate each
//! scale as `F + F ⊙ M`; a ConvLSTM per scale carries state to the next
//! stage; the scales are fused coarse-to-fine and a residual group predicts
//! the rain layer `R_k`, giving `X_k = X - R_k`. All stages share one
//! parameter set.

pub mod config;
pub mod params;

use crate::error::{Error, Result};
use crate::scale_space::{build_dog, build_octaves, DogPyramid, SCALES};
use crate::sian::{head_prefix, AttentionHead};
use crate::tensor::{Graph, PoolMode, Shape, Tensor, Var};

pub use config::{Ablation, NetConfig};
pub use params::{param_specs, BoundParams, NetworkParams, ParamSpec};

/// ConvLSTM memories for the three scales.
#[derive(Clone, Debug)]
pub struct StageState {
    pub hidden: Vec<Var>,
    pub cell: Vec<Var>,
}

impl StageState {
    /// Zero state for features of `feature_shape` (scale 1).
    pub fn zeros(g: &mut Graph, feature_shape: Shape) -> Self {
        let mut hidden = Vec::with_capacity(SCALES.len());
        let mut cell = Vec::with_capacity(SCALES.len());
        for s in SCALES {
            let shape =
                feature_shape.with_spatial(feature_shape.height() / s, feature_shape.width() / s);
            hidden.push(g.constant(Tensor::zeros(shape)));
            cell.push(g.constant(Tensor::zeros(shape)));
        }
        StageState { hidden, cell }
    }
}

#[derive(Clone, Debug)]
pub struct StageOutput {
    /// Derained estimate `X_k`.
    pub output: Var,
    /// Rain-layer estimate `R_k`.
    pub rain: Var,
    /// Attention mask per scale (all zero when attention is disabled).
    pub masks: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub stages: Vec<StageOutput>,
}

impl ForwardOutput {
    pub fn outputs(&self) -> Vec<Var> {
        self.stages.iter().map(|s| s.output).collect()
    }

    pub fn last(&self) -> &StageOutput {
        self.stages.last().expect("at least one stage")
    }
}

fn conv3x3_relu(g: &mut Graph, x: Var, (w, b): (Var, Var)) -> Result<Var> {
    let y = g.conv2d(x, w, b, 1, 1)?;
    Ok(g.relu(y))
}

/// `F = relu(conv(X ⊕ X_prev))`.
pub fn extract_features(g: &mut Graph, x: Var, x_prev: Var, p: &BoundParams) -> Result<Var> {
    let (sx, sp) = (g.shape(x), g.shape(x_prev));
    if sx != sp {
        return Err(Error::DimensionMismatch {
            op: "extract_features",
            left: sx,
            right: sp,
        });
    }
    if sx.channels() != 3 {
        return Err(Error::InvalidArgument(format!(
            "expected a 3-channel image, got {sx}"
        )));
    }
    let input = g.concat(x, x_prev)?;
    conv3x3_relu(g, input, p.conv("extract")?)
}

/// `F_s = relu(conv(avgpool(F, s)))` for `s` in 1, 2, 4.
pub fn multi_scale_features(g: &mut Graph, f: Var, p: &BoundParams) -> Result<Vec<Var>> {
    SCALES
        .iter()
        .map(|&s| {
            let pooled = g.pool2d(f, s, PoolMode::Avg)?;
            conv3x3_relu(g, pooled, p.conv(&format!("scale{s}.conv"))?)
        })
        .collect()
}

/// `F + F ⊙ M`.
pub fn apply_attention(g: &mut Graph, features: Var, mask: Var) -> Result<Var> {
    let gated = g.mul(features, mask)?;
    g.add(features, gated)
}

/// One ConvLSTM update. Gate channels are ordered input, forget, output,
/// candidate. Returns `(output, hidden, cell)`; the output is the new hidden
/// state.
pub fn convlstm_step(
    g: &mut Graph,
    x: Var,
    hidden: Var,
    cell: Var,
    p: &BoundParams,
    scale: usize,
    pre_convs: bool,
) -> Result<(Var, Var, Var)> {
    let (sh, sc) = (g.shape(hidden), g.shape(cell));
    if g.shape(x) != sh || sh != sc {
        return Err(Error::DimensionMismatch {
            op: "convlstm state",
            left: g.shape(x),
            right: sc,
        });
    }
    let prefix = params::lstm_prefix(scale);
    let mut x = x;
    if pre_convs {
        x = conv3x3_relu(g, x, p.conv(&format!("{prefix}.pre1"))?)?;
        x = conv3x3_relu(g, x, p.conv(&format!("{prefix}.pre2"))?)?;
    }
    let c = sh.channels();
    let xh = g.concat(x, hidden)?;
    let (w, b) = p.conv(&format!("{prefix}.gates"))?;
    let gates = g.conv2d(xh, w, b, 1, 1)?;
    let i = g.narrow(gates, 0, c)?;
    let f = g.narrow(gates, c, c)?;
    let o = g.narrow(gates, 2 * c, c)?;
    let cand = g.narrow(gates, 3 * c, c)?;
    let i = g.sigmoid(i);
    let f = g.sigmoid(f);
    let o = g.sigmoid(o);
    let cand = g.tanh(cand);
    let keep = g.mul(f, cell)?;
    let write = g.mul(i, cand)?;
    let cell = g.add(keep, write)?;
    let squashed = g.tanh(cell);
    let hidden = g.mul(o, squashed)?;
    Ok((hidden, hidden, cell))
}

/// `F1 ⊕ up(F2 ⊕ up(F4))`.
pub fn fuse_cross_scale(g: &mut Graph, f1: Var, f2: Var, f4: Var) -> Result<Var> {
    let up4 = g.upsample2x(f4);
    let inner = g.concat(f2, up4)?;
    let up2 = g.upsample2x(inner);
    g.concat(f1, up2)
}

/// Conv+ReLU down to the feature width, two residual blocks, then a final
/// convolution to the 3-channel rain layer.
pub fn res_group(g: &mut Graph, fused: Var, p: &BoundParams) -> Result<Var> {
    let mut h = conv3x3_relu(g, fused, p.conv("fuse")?)?;
    for b in 1..=2 {
        h = res_block(g, h, p, &format!("res.block{b}"))?;
    }
    let (w, bias) = p.conv("res.out")?;
    g.conv2d(h, w, bias, 1, 1)
}

/// `x + conv2(relu(conv1(x)))`.
pub fn res_block(g: &mut Graph, x: Var, p: &BoundParams, prefix: &str) -> Result<Var> {
    let h = conv3x3_relu(g, x, p.conv(&format!("{prefix}.conv1"))?)?;
    let (w, b) = p.conv(&format!("{prefix}.conv2"))?;
    let h = g.conv2d(h, w, b, 1, 1)?;
    g.add(x, h)
}

fn attention_head(p: &BoundParams, scale: usize, config: &NetConfig) -> Result<AttentionHead> {
    let prefix = head_prefix(scale, config.share_sian_heads);
    let conv2 = if config.sian_single_conv {
        None
    } else {
        Some(p.conv(&format!("{prefix}.conv2"))?)
    };
    Ok(AttentionHead {
        conv1: p.conv(&format!("{prefix}.conv1"))?,
        conv2,
    })
}

/// Attention masks for the three scales from the DoG pyramid of `f`.
pub fn attention_masks(
    g: &mut Graph,
    f: Var,
    p: &BoundParams,
    config: &NetConfig,
) -> Result<(Vec<Var>, DogPyramid)> {
    let octaves = build_octaves(g, f, &config.scale_space())?;
    let dog = build_dog(g, &octaves)?;
    let masks = dog
        .octaves
        .iter()
        .map(|o| attention_head(p, o.scale, config)?.mask(g, o))
        .collect::<Result<Vec<_>>>()?;
    Ok((masks, dog))
}

/// One CFA stage. `state` is `None` at the first stage.
pub fn run_stage(
    g: &mut Graph,
    x: Var,
    x_prev: Var,
    state: Option<StageState>,
    p: &BoundParams,
    config: &NetConfig,
) -> Result<(StageOutput, StageState)> {
    let xs = g.shape(x);
    if xs.height() % 4 != 0 || xs.width() % 4 != 0 {
        return Err(Error::NotDivisible {
            op: "run_stage",
            height: xs.height(),
            width: xs.width(),
            divisor: 4,
        });
    }
    let f = extract_features(g, x, x_prev, p)?;
    let scaled = multi_scale_features(g, f, p)?;

    let masks = if config.use_sian {
        attention_masks(g, f, p, config)?.0
    } else {
        scaled
            .iter()
            .map(|&fs| g.constant(Tensor::zeros(g.shape(fs))))
            .collect()
    };

    let mut state = match state {
        Some(s) => s,
        None => StageState::zeros(g, g.shape(f)),
    };
    let mut gated = Vec::with_capacity(SCALES.len());
    for (i, &s) in SCALES.iter().enumerate() {
        let mut fa = apply_attention(g, scaled[i], masks[i])?;
        if config.use_lstm {
            let (out, h, c) = convlstm_step(
                g,
                fa,
                state.hidden[i],
                state.cell[i],
                p,
                s,
                config.lstm_pre_convs,
            )?;
            state.hidden[i] = h;
            state.cell[i] = c;
            fa = out;
        }
        gated.push(fa);
    }

    let fused = fuse_cross_scale(g, gated[0], gated[1], gated[2])?;
    let rain = res_group(g, fused, p)?;
    let output = g.sub(x, rain)?;
    Ok((
        StageOutput {
            output,
            rain,
            masks,
        },
        state,
    ))
}

/// Runs `config.stages` weight-shared stages on `x` (`X_0 = X`).
pub fn forward_all_stages(
    g: &mut Graph,
    x: Var,
    p: &BoundParams,
    config: &NetConfig,
) -> Result<ForwardOutput> {
    config.validate()?;
    let mut stages = Vec::with_capacity(config.stages);
    let mut prev = x;
    let mut state = None;
    for _ in 0..config.stages {
        let (out, next) = run_stage(g, x, prev, state, p, config)?;
        prev = out.output;
        state = Some(next);
        stages.push(out);
    }
    Ok(ForwardOutput { stages })
}

/// Plain-tensor results of running the network on one image.
#[derive(Clone, Debug)]
pub struct Derained {
    pub outputs: Vec<Tensor>,
    pub rain: Vec<Tensor>,
    /// `masks[stage][scale]`.
    pub masks: Vec<Vec<Tensor>>,
}

/// Inference on an image of any size: reflection-pads to a multiple of 4,
/// runs every stage, and crops the results back.
pub fn derain(params: &NetworkParams, config: &NetConfig, image: &Tensor) -> Result<Derained> {
    let s = image.shape();
    let padded = image.reflect_pad_to_multiple(4)?;
    let mut g = Graph::new();
    let p = params.bind_frozen(&mut g);
    let x = g.constant(padded);
    let fwd = forward_all_stages(&mut g, x, &p, config)?;
    let crop = |v: Var| g.value(v).crop(0, 0, s.height(), s.width());
    let mut out = Derained {
        outputs: Vec::new(),
        rain: Vec::new(),
        masks: Vec::new(),
    };
    for st in &fwd.stages {
        out.outputs.push(crop(st.output)?);
        out.rain.push(crop(st.rain)?);
        out.masks.push(st.masks.iter().map(|&m| g.value(m).clone()).collect());
    }
    Ok(out)
}
