//! Run configuration: optional flat `key=value` config file merged under
//! command-line flags (flags win, then the file, then built-in defaults).
//! Unknown keys are rejected so typos cannot silently fall back to defaults.

use std::path::Path;

use crate::error::{Error, Result};

/// Every tunable of the pipeline, all optional; `None` means "not set at
/// this layer". Defaults are applied by the consumer after merging.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub neg_k: Option<usize>,
    pub crop_sec: Option<f64>,
    pub patience: Option<usize>,
    pub proj_dim: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub tolerance: Option<f64>,
    pub metric: Option<String>,
    pub grid: Option<String>,
    pub normalize: Option<bool>,
    pub include_edges: Option<bool>,
    pub n: Option<usize>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "epochs",
    "batch-size",
    "lr",
    "neg-k",
    "crop-sec",
    "patience",
    "proj-dim",
    "seed",
    "delta",
    "tolerance",
    "metric",
    "grid",
    "normalize",
    "include-edges",
    "n",
];

impl RunConfig {
    /// Parse `key=value` lines ('#' comments and blank lines allowed).
    pub fn from_kv_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key=value, got '{raw}'",
                    origin.display(),
                    idx + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::Config(format!(
                    "{}:{}: bad {what} value '{value}' for key '{key}'",
                    origin.display(),
                    idx + 1
                ))
            };
            match key {
                "epochs" => cfg.epochs = Some(value.parse().map_err(|_| bad("integer"))?),
                "batch-size" => cfg.batch_size = Some(value.parse().map_err(|_| bad("integer"))?),
                "lr" => cfg.lr = Some(value.parse().map_err(|_| bad("number"))?),
                "neg-k" => cfg.neg_k = Some(value.parse().map_err(|_| bad("integer"))?),
                "crop-sec" => cfg.crop_sec = Some(value.parse().map_err(|_| bad("number"))?),
                "patience" => cfg.patience = Some(value.parse().map_err(|_| bad("integer"))?),
                "proj-dim" => cfg.proj_dim = Some(value.parse().map_err(|_| bad("integer"))?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("integer"))?),
                "delta" => cfg.delta = Some(value.parse().map_err(|_| bad("number"))?),
                "tolerance" => cfg.tolerance = Some(value.parse().map_err(|_| bad("number"))?),
                "metric" => cfg.metric = Some(value.to_string()),
                "grid" => cfg.grid = Some(value.to_string()),
                "normalize" => cfg.normalize = Some(parse_bool(value).ok_or_else(|| bad("bool"))?),
                "include-edges" => {
                    cfg.include_edges = Some(parse_bool(value).ok_or_else(|| bad("bool"))?)
                }
                "n" => cfg.n = Some(value.parse().map_err(|_| bad("integer"))?),
                other => {
                    return Err(Error::Config(format!(
                        "{}:{}: unknown key '{other}' (known: {})",
                        origin.display(),
                        idx + 1,
                        KNOWN_KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_text(&text, path)
    }

    /// Merge with `over` taking precedence (flags over file).
    pub fn overlaid(self, over: RunConfig) -> RunConfig {
        RunConfig {
            epochs: over.epochs.or(self.epochs),
            batch_size: over.batch_size.or(self.batch_size),
            lr: over.lr.or(self.lr),
            neg_k: over.neg_k.or(self.neg_k),
            crop_sec: over.crop_sec.or(self.crop_sec),
            patience: over.patience.or(self.patience),
            proj_dim: over.proj_dim.or(self.proj_dim),
            seed: over.seed.or(self.seed),
            delta: over.delta.or(self.delta),
            tolerance: over.tolerance.or(self.tolerance),
            metric: over.metric.or(self.metric),
            grid: over.grid.or(self.grid),
            normalize: over.normalize.or(self.normalize),
            include_edges: over.include_edges.or(self.include_edges),
            n: over.n.or(self.n),
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_kv_text(text, &PathBuf::from("test.cfg"))
    }

    #[test]
    fn parses_known_keys() {
        let cfg = parse("epochs=10\nlr = 2e-4\nnormalize=false\n# comment\n\nseed=7\n").unwrap();
        assert_eq!(cfg.epochs, Some(10));
        assert_eq!(cfg.lr, Some(2e-4));
        assert_eq!(cfg.normalize, Some(false));
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let msg = parse("epohcs=10\n").unwrap_err().to_string();
        assert!(msg.contains("epohcs"), "{msg}");
    }

    #[test]
    fn bad_value_names_the_key_and_line() {
        let msg = parse("\nepochs=ten\n").unwrap_err().to_string();
        assert!(msg.contains(":2") && msg.contains("epochs"), "{msg}");
    }

    #[test]
    fn flags_override_file() {
        let file = parse("epochs=10\nseed=1\n").unwrap();
        let flags = RunConfig {
            epochs: Some(3),
            ..RunConfig::default()
        };
        let eff = file.overlaid(flags);
        assert_eq!(eff.epochs, Some(3)); // flag wins
        assert_eq!(eff.seed, Some(1)); // file fills the gap
    }
}
