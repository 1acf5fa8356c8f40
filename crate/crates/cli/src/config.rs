//! `key=value` configuration shared by the segmentation commands.
//!
//! Values come from the built-in defaults, then an optional config file,
//! then command-line flags; later sources win.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use snakeseg::localization::CropSpec;
use snakeseg::morphsnakes::Balloon;
use snakeseg::pipeline::{Fallback, PipelineParams};
use snakeseg::preprocess::check_edge_params;
use snakeseg::Error;

use crate::Tuning;

pub fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected two comma-separated numbers, got {s:?}"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .with_context(|| format!("{t:?} is not a number"))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_center(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected x,y, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => bail!("{s:?} is not a boolean"),
    }
}

pub fn parse_balloon(s: &str) -> Result<Balloon> {
    let sign: i32 = s
        .trim_start_matches('+')
        .parse()
        .with_context(|| format!("balloon must be -1, 0 or +1, got {s:?}"))?;
    Balloon::from_sign(sign).ok_or_else(|| anyhow!("balloon must be -1, 0 or +1, got {s:?}"))
}

/// Everything the segment command needs besides its inputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub pipeline: PipelineParams,
    pub crop: CropSpec,
    /// Segment slices without detections inside the fixed crop.
    pub fallback_crop: bool,
}

impl Config {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        match key {
            "window" => p.window = parse_pair(value)?,
            "conf" => p.confidence = value.parse()?,
            "sigma" => p.sigma = value.parse()?,
            "alpha" => p.alpha = value.parse()?,
            "balloon" => p.gac.balloon = parse_balloon(value)?,
            "theta" => p.gac.threshold = value.parse()?,
            "mu" => p.gac.smoothing = value.parse()?,
            "iters" => p.gac.iterations = value.parse()?,
            "pad" => p.pad = value.parse()?,
            "postprocess" => p.postprocess = parse_bool(value)?,
            "crop_center" => self.crop.center = parse_center(value)?,
            "crop_size" => self.crop.size = value.parse()?,
            "fallback" => {
                self.fallback_crop = match value {
                    "empty" => false,
                    "crop" => true,
                    _ => bail!("fallback must be `empty` or `crop`, got {value:?}"),
                }
            }
            _ => bail!("unknown key {key:?}"),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(cfg)
    }

    /// Defaults, overlaid with `path` and then with the command-line flags.
    pub fn load(path: Option<&Path>, flags: &Tuning) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => Self::default(),
        };
        let p = &mut cfg.pipeline;
        if let Some(w) = flags.window {
            p.window = w;
        }
        if let Some(c) = flags.conf {
            p.confidence = c;
        }
        if let Some(v) = flags.sigma {
            p.sigma = v;
        }
        if let Some(v) = flags.alpha {
            p.alpha = v;
        }
        if let Some(b) = flags.balloon {
            p.gac.balloon = b;
        }
        if let Some(t) = flags.theta {
            p.gac.threshold = t;
        }
        if let Some(m) = flags.mu {
            p.gac.smoothing = m;
        }
        if let Some(n) = flags.iters {
            p.gac.iterations = n;
        }
        if let Some(r) = flags.pad {
            p.pad = r;
        }
        p.postprocess |= flags.postprocess;
        cfg.fallback_crop |= flags.fallback_crop;
        cfg.pipeline.fallback = if cfg.fallback_crop {
            Fallback::DefaultCrop(cfg.crop)
        } else {
            Fallback::Empty
        };
        let p = &cfg.pipeline;
        p.gac.validate().map_err(Error::from)?;
        check_edge_params(p.sigma, p.alpha).map_err(Error::from)?;
        p.validate().map_err(Error::from)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = Config::parse(
            "# tuned\nwindow = -150,250\nballoon=-1\nmu=2\niters=80\npostprocess=true\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline.window, (-150.0, 250.0));
        assert_eq!(cfg.pipeline.gac.balloon, Balloon::Deflate);
        assert_eq!(cfg.pipeline.gac.smoothing, 2);
        assert_eq!(cfg.pipeline.gac.iterations, 80);
        assert!(cfg.pipeline.postprocess);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let err = Config::parse("sigma=2\nbogus=1\n").unwrap_err();
        assert!(format!("{err:#}").contains("config line 2"));
        assert!(Config::parse("sigma").is_err());
    }

    #[test]
    fn flags_override_file_and_are_validated() {
        let flags = Tuning {
            theta: Some(0.5),
            ..Tuning::default()
        };
        let cfg = Config::load(None, &flags).unwrap();
        assert_eq!(cfg.pipeline.gac.threshold, 0.5);
        let bad = Tuning {
            theta: Some(2.0),
            ..Tuning::default()
        };
        assert!(Config::load(None, &bad).is_err());
    }

    #[test]
    fn balloon_signs() {
        assert_eq!(parse_balloon("+1").unwrap(), Balloon::Inflate);
        assert_eq!(parse_balloon("0").unwrap(), Balloon::None);
        assert!(parse_balloon("2").is_err());
    }
}
