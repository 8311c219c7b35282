use std::fmt;
use std::path::Path;

use clap::Args;
use omniact::geometry::Interpolation;
use omniact::miml::{Aggregator, Hyperparams, Pooling};
use omniact::synth::SynthSpec;
use serde::{Deserialize, Serialize};

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
pub struct BadConfig(pub String);

impl fmt::Display for BadConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadConfig {}

pub fn bad_config(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(BadConfig(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub height_px: usize,
    pub phi_deg: f64,
    pub interpolation: Interpolation,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { hfov_deg: 360.0, vfov_deg: 235.0, height_px: 800, phi_deg: 0.0, interpolation: Interpolation::Bilinear }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    /// Seeds each preset is trained with.
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { seeds: vec![0, 1, 2] }
    }
}

/// Everything a run can be configured with. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub hyperparams: Hyperparams<f64>,
    pub geometry: GeometryConfig,
    pub synth: SynthSpec,
    pub ablation: AblationConfig,
    /// Resolution `[width, height]` of person boxes when a manifest entry
    /// does not state its own.
    pub frame_size: Option<[usize; 2]>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad_config(format!("config {}: {e}", path.display())))
    }
}

/// Training flags; each one set on the command line overrides the config.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperFlags {
    /// Instance width in feature-map columns.
    #[arg(long)]
    pub k: Option<usize>,
    /// LSE sharpness r.
    #[arg(long = "lse-r")]
    pub lse_sharpness: Option<f64>,
    /// Sparsity regularizer weight alpha.
    #[arg(long = "alpha")]
    pub reg_weight: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_halve_every: Option<usize>,
    /// avg | max | lse | attention
    #[arg(long)]
    pub aggregator: Option<Aggregator>,
    /// instances | global-avg | global-max
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Train and score on unmasked features.
    #[arg(long)]
    pub no_mask: bool,
}

impl HyperFlags {
    pub fn apply(&self, hp: &mut Hyperparams<f64>) -> anyhow::Result<()> {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { hp.$f = v; })*};
        }
        set!(k, lse_sharpness, reg_weight, lr, momentum, batch_size, epochs, lr_halve_every, aggregator, pooling);
        if self.no_mask {
            hp.use_mask = false;
        }
        hp.validate().map_err(|e| bad_config(e.to_string()))
    }
}

/// Parses `WxH`.
pub fn parse_size(s: &str) -> Result<[usize; 2], String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    Ok([w, h])
}

/// Parses `x,y`.
pub fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let x = x.trim().parse().map_err(|_| format!("bad x in {s:?}"))?;
    let y = y.trim().parse().map_err(|_| format!("bad y in {s:?}"))?;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c: Config = serde_json::from_str("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.hyperparams.k, 8);
        assert_eq!(c.geometry.height_px, 800);
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        for bad in [r#"{"sed": 1}"#, r#"{"hyperparams": {"kk": 2}}"#, r#"{"geometry": {"fov": 1}}"#, r#"{"synth": {"n": 1}}"#] {
            assert!(serde_json::from_str::<Config>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_override_config() {
        let mut hp: Hyperparams<f64> = serde_json::from_str(r#"{"k": 4, "epochs": 3}"#).unwrap();
        let flags = HyperFlags { k: Some(2), no_mask: true, ..Default::default() };
        flags.apply(&mut hp).unwrap();
        assert_eq!((hp.k, hp.epochs, hp.use_mask), (2, 3, false));
        assert!(HyperFlags { k: Some(0), ..Default::default() }.apply(&mut hp).is_err());
    }

    #[test]
    fn size_and_point_parsing() {
        assert_eq!(parse_size("160x32"), Ok([160, 32]));
        assert!(parse_size("160").is_err());
        assert_eq!(parse_point("12.5, 3"), Ok((12.5, 3.0)));
        assert!(parse_point("a,b").is_err());
    }
}
