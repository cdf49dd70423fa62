//! Plain-text `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Keys mirror the fields of
//! [`NetConfig`], [`TrainPlan`] and [`RainSynthesisParams`]; the rain keys
//! carry a `rain.` prefix and ranges are split into `_min`/`_max` keys.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::net::NetConfig;
use crate::train::{RainSynthesisParams, TrainPlan};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub net: NetConfig,
    pub plan: TrainPlan,
    pub rain: RainSynthesisParams,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for key `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value `{value}` for key `{key}` (expected true/false)"
        ))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key; unknown keys are rejected by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (n, p, r) = (&mut self.net, &mut self.plan, &mut self.rain);
        match key {
            "channels" => n.channels = parse(key, value)?,
            "stages" => n.stages = parse(key, value)?,
            "sigma" => n.sigma = parse(key, value)?,
            "sigma_prime" => n.sigma_prime = parse(key, value)?,
            "k" => n.k = parse(key, value)?,
            "use_sian" => n.use_sian = parse_bool(key, value)?,
            "use_lstm" => n.use_lstm = parse_bool(key, value)?,
            "sian_single_conv" => n.sian_single_conv = parse_bool(key, value)?,
            "share_sian_heads" => n.share_sian_heads = parse_bool(key, value)?,
            "lstm_pre_convs" => n.lstm_pre_convs = parse_bool(key, value)?,

            "epochs" => p.epochs = parse(key, value)?,
            "max_steps" => {
                p.max_steps = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "batch_size" => p.batch_size = parse(key, value)?,
            "patch_size" => p.patch_size = parse(key, value)?,
            "patch_stride" => p.patch_stride = parse(key, value)?,
            "flip" => p.flip = parse_bool(key, value)?,
            "seed" => p.seed = parse(key, value)?,
            "loss" => p.loss = parse(key, value)?,
            "learning_rate" => p.learning_rate = parse(key, value)?,

            "rain.streaks_min" => r.streaks.0 = parse(key, value)?,
            "rain.streaks_max" => r.streaks.1 = parse(key, value)?,
            "rain.length_min" => r.length.0 = parse(key, value)?,
            "rain.length_max" => r.length.1 = parse(key, value)?,
            "rain.width_min" => r.width.0 = parse(key, value)?,
            "rain.width_max" => r.width.1 = parse(key, value)?,
            "rain.angle_min" => r.angle.0 = parse(key, value)?,
            "rain.angle_max" => r.angle.1 = parse(key, value)?,
            "rain.intensity_min" => r.intensity.0 = parse(key, value)?,
            "rain.intensity_max" => r.intensity.1 = parse(key, value)?,
            "rain.blur_sigma" => r.blur_sigma = parse(key, value)?,
            "rain.seed" => r.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.plan.validate()?;
        self.rain.validate()
    }

    /// Serialises every key; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let (n, p, r) = (&self.net, &self.plan, &self.rain);
        let mut lines = vec![
            format!("channels = {}", n.channels),
            format!("stages = {}", n.stages),
            format!("sigma = {:?}", n.sigma),
            format!("sigma_prime = {:?}", n.sigma_prime),
            format!("k = {:?}", n.k),
            format!("use_sian = {}", n.use_sian),
            format!("use_lstm = {}", n.use_lstm),
            format!("sian_single_conv = {}", n.sian_single_conv),
            format!("share_sian_heads = {}", n.share_sian_heads),
            format!("lstm_pre_convs = {}", n.lstm_pre_convs),
            format!("epochs = {}", p.epochs),
            format!(
                "max_steps = {}",
                p.max_steps.map_or("none".to_string(), |s| s.to_string())
            ),
            format!("batch_size = {}", p.batch_size),
            format!("patch_size = {}", p.patch_size),
            format!("patch_stride = {}", p.patch_stride),
            format!("flip = {}", p.flip),
            format!("seed = {}", p.seed),
            format!("loss = {}", p.loss),
            format!("learning_rate = {:?}", p.learning_rate),
        ];
        let pairs = [
            ("length", r.length),
            ("width", r.width),
            ("angle", r.angle),
            ("intensity", r.intensity),
        ];
        lines.push(format!("rain.streaks_min = {}", r.streaks.0));
        lines.push(format!("rain.streaks_max = {}", r.streaks.1));
        for (k, (lo, hi)) in pairs {
            lines.push(format!("rain.{k}_min = {lo:?}"));
            lines.push(format!("rain.{k}_max = {hi:?}"));
        }
        lines.push(format!("rain.blur_sigma = {:?}", r.blur_sigma));
        lines.push(format!("rain.seed = {}", r.seed));
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LossKind;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# toy run\nchannels = 8\nstages=3 # fewer\n\nloss = mse\nuse_sian = false\nrain.streaks_max = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.net.channels, 8);
        assert_eq!(cfg.net.stages, 3);
        assert!(!cfg.net.use_sian);
        assert_eq!(cfg.plan.loss, LossKind::Mse);
        assert_eq!(cfg.rain.streaks.1, 5);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("channels = 8\nchanels = 9\n").unwrap_err();
        assert!(err.to_string().contains("`chanels`"), "{err}");
    }

    #[test]
    fn bad_value_is_named() {
        let err = RunConfig::parse("stages = many").unwrap_err();
        assert!(err.to_string().contains("stages"));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.plan.max_steps = Some(12);
        cfg.rain.angle = (-3.5, 7.25);
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }
}
