//! Command-line front end: `train`, `infer`, `eval`, `dump-pyramid` and
//! `synth-data`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{checkpoint, config::RunConfig, list_images, read_image, write_image};
use crate::metrics::{luminance_metrics, LossKind};
use crate::net::{derain, extract_features, Ablation, NetConfig, NetworkParams};
use crate::scale_space::{build_dog, build_octaves};
use crate::tensor::{Graph, Tensor};
use crate::train::dataset::load_dataset;
use crate::train::{synthesize_rain, synthetic_scene, train_from, Pair};

#[derive(Debug, Parser)]
#[command(name = "ssia", version, about = "Scale-space attention deraining network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a `rain/` + `norain/` dataset and write a checkpoint.
    Train(TrainArgs),
    /// Derain images with a checkpoint, writing every stage's output.
    Infer(InferArgs),
    /// PSNR/SSIM on luminance for a paired dataset.
    Eval(EvalArgs),
    /// Write the Gaussian octaves and DoG layers of an image's features.
    DumpPyramid(DumpArgs),
    /// Build a paired rain dataset from clean images.
    SynthData(SynthArgs),
}

/// Flags shared by every command.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of recurrent stages.
    #[arg(long)]
    pub stages: Option<usize>,
    /// neg_ssim | mae | mse
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// baseline | lstm | full
    #[arg(long)]
    pub ablation: Option<Ablation>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(a) = self.ablation {
            cfg.net = cfg.net.with_ablation(a);
        }
        if let Some(n) = self.stages {
            cfg.net.stages = n;
        }
        if let Some(s) = self.seed {
            cfg.plan.seed = s;
            cfg.rain.seed = s;
        }
        if let Some(l) = self.loss {
            cfg.plan.loss = l;
        }
        if let Ok(t) = std::env::var("SSIA_THREADS") {
            cfg.plan.threads = t
                .parse()
                .map_err(|_| Error::Config(format!("SSIA_THREADS must be an integer, got `{t}`")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset root with `rain/` and `norain/`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Continue from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// An image file or a directory of images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write every stage's attention masks (channel-averaged).
    #[arg(long)]
    pub dump_masks: bool,
    /// Also write every stage's rain-layer estimate.
    #[arg(long)]
    pub dump_rain_layer: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset root with `rain/` and `norain/`.
    #[arg(long)]
    pub data: PathBuf,
    /// Derain `rain/` with this checkpoint first; otherwise `rain/` is
    /// compared as is.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// One row per stage instead of only the final output.
    #[arg(long)]
    pub per_stage: bool,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Feature extractor weights; a seeded fresh initialisation otherwise.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of clean images.
    #[arg(long, conflicts_with = "generate")]
    pub clean: Option<PathBuf>,
    /// Generate this many procedural clean scenes instead.
    #[arg(long)]
    pub generate: Option<usize>,
    /// Side length of generated scenes.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Files created by a command, deleted again if the command fails.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    fn dir(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            std::fs::create_dir_all(path)?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(())
    }

    fn image(&mut self, path: PathBuf, image: &Tensor) -> Result<()> {
        write_image(&path, image)?;
        self.files.push(path);
        Ok(())
    }

    fn bytes(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        std::fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn discard(self) {
        for f in self.files.iter().rev() {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir_all(d);
        }
    }
}

/// Runs a parsed command. `out` receives the normal report (tables,
/// progress); errors are returned to the caller.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let mut outputs = Outputs::default();
    let res = match cli.command {
        Command::Train(a) => cmd_train(&a, &mut outputs, out),
        Command::Infer(a) => cmd_infer(&a, &mut outputs),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::DumpPyramid(a) => cmd_dump(&a, &mut outputs),
        Command::SynthData(a) => cmd_synth(&a, &mut outputs),
    };
    if res.is_err() {
        outputs.discard();
    }
    res
}

/// The single error line printed by the binary.
pub fn error_line(err: &Error) -> String {
    format!(
        "error kind={} message={}",
        err.kind(),
        serde_json::Value::String(err.to_string())
    )
}

fn cmd_train(a: &TrainArgs, outputs: &mut Outputs, out: &mut dyn std::io::Write) -> Result<()> {
    let mut cfg = a.common.resolve()?;
    if let Some(e) = a.epochs {
        cfg.plan.epochs = e;
    }
    if a.max_steps.is_some() {
        cfg.plan.max_steps = a.max_steps;
    }
    let data: Vec<Pair> = load_dataset(&a.data)?.into_iter().map(|p| p.pair).collect();
    let params = match &a.init {
        Some(p) => {
            let (c, params) = checkpoint::load(p)?;
            cfg.net = c;
            params
        }
        None => NetworkParams::init(&cfg.net, cfg.plan.seed),
    };
    let outcome = train_from(&cfg.plan, &data, &cfg.net, params, |r| {
        let _ = writeln!(out, "epoch {} step {} loss {:.6}", r.epoch, r.step, r.loss);
    })?;
    for e in &outcome.epochs {
        let _ = writeln!(
            out,
            "epoch {} mean_loss {:.6} train_psnr {:.3}",
            e.epoch, e.mean_loss, e.mean_psnr
        );
    }
    let csv = a
        .loss_csv
        .clone()
        .unwrap_or_else(|| with_suffix(&a.out, ".loss.csv"));
    outputs.bytes(a.out.clone(), &checkpoint::to_bytes(&cfg.net, &outcome.params)?)?;
    outputs.bytes(csv, outcome.loss_csv().as_bytes())?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Checkpoint config with the command-line stage override applied.
fn load_model(path: &Path, common: &Common) -> Result<(NetConfig, NetworkParams)> {
    let (mut config, params) = checkpoint::load(path)?;
    if let Some(n) = common.stages {
        config.stages = n;
    }
    config.validate()?;
    Ok((config, params))
}

fn inputs_of(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let files = list_images(path)?;
        if files.is_empty() {
            return Err(Error::Dataset(format!("no images in {}", path.display())));
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned()
}

fn cmd_infer(a: &InferArgs, outputs: &mut Outputs) -> Result<()> {
    let (config, params) = load_model(&a.checkpoint, &a.common)?;
    let inputs = inputs_of(&a.input)?;
    outputs.dir(&a.out_dir)?;
    for path in inputs {
        let image = read_image(&path)?;
        let result = derain(&params, &config, &image)?;
        let name = stem(&path);
        for (k, o) in result.outputs.iter().enumerate() {
            outputs.image(a.out_dir.join(format!("{name}_stage{}.ppm", k + 1)), o)?;
        }
        if a.dump_rain_layer {
            for (k, r) in result.rain.iter().enumerate() {
                outputs.image(a.out_dir.join(format!("{name}_rain_stage{}.ppm", k + 1)), r)?;
            }
        }
        if a.dump_masks {
            for (k, masks) in result.masks.iter().enumerate() {
                for (m, s) in masks.iter().zip(crate::scale_space::SCALES) {
                    outputs.image(
                        a.out_dir.join(format!("{name}_mask_stage{}_s{s}.ppm", k + 1)),
                        &m.channel_mean(),
                    )?;
                }
            }
        }
    }
    Ok(())
}

/// One row of the evaluation table.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub image: String,
    /// 1-based stage, `None` when evaluating the rainy inputs themselves.
    pub stage: Option<usize>,
    pub psnr: f64,
    pub ssim: f64,
}

/// Luminance PSNR/SSIM rows for a dataset, optionally after deraining.
pub fn evaluate(
    data: &Path,
    model: Option<(&NetConfig, &NetworkParams)>,
    per_stage: bool,
) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for np in load_dataset(data)? {
        let clean = &np.pair.clean;
        match model {
            None => {
                let (psnr, ssim) = luminance_metrics(&np.pair.rainy, clean)?;
                rows.push(EvalRow {
                    image: np.name,
                    stage: None,
                    psnr,
                    ssim,
                });
            }
            Some((config, params)) => {
                let result = derain(params, config, &np.pair.rainy)?;
                let n = result.outputs.len();
                for (k, o) in result.outputs.iter().enumerate() {
                    if !per_stage && k + 1 != n {
                        continue;
                    }
                    let (psnr, ssim) = luminance_metrics(&o.clamp(0.0, 1.0), clean)?;
                    rows.push(EvalRow {
                        image: np.name.clone(),
                        stage: Some(k + 1),
                        psnr,
                        ssim,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.3}")
    }
}

/// Tab-separated table: one row per image (and stage), then mean rows.
pub fn format_eval(rows: &[EvalRow]) -> String {
    let mut s = String::from("image\tstage\tpsnr_db\tssim\n");
    for r in rows {
        let stage = r.stage.map_or("input".to_string(), |k| k.to_string());
        let _ = writeln!(s, "{}\t{stage}\t{}\t{:.4}", r.image, fmt_db(r.psnr), r.ssim);
    }
    let mut stages: Vec<Option<usize>> = rows.iter().map(|r| r.stage).collect();
    stages.dedup();
    stages.sort();
    stages.dedup();
    for st in stages {
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.stage == st).collect();
        let n = sel.len() as f64;
        let psnr = sel.iter().map(|r| r.psnr).sum::<f64>() / n;
        let ssim = sel.iter().map(|r| r.ssim).sum::<f64>() / n;
        let stage = st.map_or("input".to_string(), |k| k.to_string());
        let _ = writeln!(s, "mean\t{stage}\t{}\t{ssim:.4}", fmt_db(psnr));
    }
    s
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let rows = match &a.checkpoint {
        Some(p) => {
            let (config, params) = load_model(p, &a.common)?;
            evaluate(&a.data, Some((&config, &params)), a.per_stage)?
        }
        None => evaluate(&a.data, None, false)?,
    };
    out.write_all(format_eval(&rows).as_bytes())?;
    Ok(())
}

/// Min-max normalises the channel mean of `t` into `[0, 1]`.
fn normalized_gray(t: &Tensor) -> Tensor {
    let m = t.channel_mean();
    let (lo, hi) = m.min_max();
    if hi > lo {
        m.map(|v| (v - lo) / (hi - lo))
    } else {
        m.map(|_| 0.0)
    }
}

fn cmd_dump(a: &DumpArgs, outputs: &mut Outputs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let (config, params) = match &a.checkpoint {
        Some(p) => load_model(p, &a.common)?,
        None => (cfg.net.clone(), NetworkParams::init(&cfg.net, cfg.plan.seed)),
    };
    let image = read_image(&a.input)?.reflect_pad_to_multiple(4)?;
    let mut g = Graph::new();
    let p = params.bind_frozen(&mut g);
    let x = g.constant(image);
    let f = extract_features(&mut g, x, x, &p)?;
    let octaves = build_octaves(&mut g, f, &config.scale_space())?;
    let dog = build_dog(&mut g, &octaves)?;
    outputs.dir(&a.out_dir)?;
    for o in &octaves {
        for (l, &v) in o.layers.iter().enumerate() {
            let path = a.out_dir.join(format!("oct{}_L{}.ppm", o.scale, l + 1));
            outputs.image(path, &normalized_gray(g.value(v)))?;
        }
    }
    for o in &dog.octaves {
        for (l, &v) in o.layers.iter().enumerate() {
            let path = a.out_dir.join(format!("oct{}_D{}.ppm", o.scale, l + 1));
            outputs.image(path, &normalized_gray(g.value(v)))?;
        }
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, outputs: &mut Outputs) -> Result<()> {
    let cfg = a.common.resolve()?;
    let clean: Vec<(String, Tensor)> = match (&a.clean, a.generate) {
        (Some(dir), _) => {
            let files = list_images(dir)?;
            if files.is_empty() {
                return Err(Error::Dataset(format!("no images in {}", dir.display())));
            }
            files
                .iter()
                .map(|p| Ok((format!("{}.ppm", stem(p)), read_image(p)?)))
                .collect::<Result<_>>()?
        }
        (None, Some(n)) => (0..n)
            .map(|i| {
                (
                    format!("scene{i:04}.ppm"),
                    synthetic_scene(a.size, a.size, cfg.rain.seed.wrapping_add(i as u64)),
                )
            })
            .collect(),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "synth-data needs --clean <dir> or --generate <n>".into(),
            ))
        }
    };
    let (rain_dir, clean_dir) = (a.out.join("rain"), a.out.join("norain"));
    outputs.dir(&a.out)?;
    outputs.dir(&rain_dir)?;
    outputs.dir(&clean_dir)?;
    for (i, (name, y)) in clean.iter().enumerate() {
        let mut rp = cfg.rain.clone();
        rp.seed = cfg.rain.seed.wrapping_add(1_000_003 * (i as u64 + 1));
        let (x, _) = synthesize_rain(y, &rp)?;
        outputs.image(clean_dir.join(name), y)?;
        outputs.image(rain_dir.join(name), &x)?;
    }
    Ok(())
}
