use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chanvese::ChanVeseParams;
use crate::classify::ClassifyThresholds;
use crate::cluster::{ConcavePointParams, EllipseValidityParams};
use crate::error::{Error, Result};
use crate::regions::{CleanupParams, SplitParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateParams {
    /// Maximum centroid distance, in pixels, for pairing a prediction with a label.
    pub match_radius: f64,
}

impl Default for EvaluateParams {
    fn default() -> Self {
        Self { match_radius: 15.0 }
    }
}

/// Every tunable of the pipeline.
///
/// The on-disk form is a flat list of `section.key = value` lines. Missing keys
/// take their defaults, so an empty file is a valid configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chanvese: ChanVeseParams,
    pub cleanup: CleanupParams,
    pub split: SplitParams,
    pub concave: ConcavePointParams,
    pub validity: EllipseValidityParams,
    pub classify: ClassifyThresholds,
    pub evaluate: EvaluateParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.chanvese.validate()?;
        self.concave.validate()?;
        self.validity.validate()?;
        self.classify.validate()?;
        if !(self.split.k > 0.0) || !self.split.k.is_finite() {
            return Err(Error::invalid("split.k must be positive"));
        }
        if !(self.evaluate.match_radius > 0.0) || !self.evaluate.match_radius.is_finite() {
            return Err(Error::invalid("evaluate.match_radius must be positive"));
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> String {
        let value = toml::Value::try_from(self).expect("config is always representable");
        let mut out = String::new();
        if let toml::Value::Table(sections) = value {
            for (section, body) in sections {
                if let toml::Value::Table(keys) = body {
                    for (key, v) in keys {
                        writeln!(out, "{section}.{key} = {v}").expect("string write");
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(
            PipelineConfig::from_text("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn dotted_keys_override() {
        let c =
            PipelineConfig::from_text("chanvese.mu = 0.5\ncleanup.drop_border = false\n").unwrap();
        assert_eq!(c.chanvese.mu, 0.5);
        assert!(!c.cleanup.drop_border);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            PipelineConfig::from_text("chanvese.bogus = 1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }
}
