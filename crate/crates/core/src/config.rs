use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dedup::ClassificationPolicy;
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 0x5EED_D00D_2021_0080;

/// Every tunable of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Words per shingle.
    pub shingle_k: usize,
    pub num_hashes: usize,
    pub bands: usize,
    pub rows: usize,
    /// Inclusive exact-Jaccard threshold.
    pub threshold: f64,
    pub seed: u64,
    pub analysis_date: Option<NaiveDate>,
    pub min_support: usize,
    pub withdrawn_as_rejection: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            shingle_k: 3,
            num_hashes: 128,
            bands: 16,
            rows: 8,
            threshold: 0.8,
            seed: DEFAULT_SEED,
            analysis_date: None,
            min_support: 3,
            withdrawn_as_rejection: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_k < 1 {
            return Err(Error::Config("shingle_k must be at least 1".into()));
        }
        if self.bands == 0 || self.rows == 0 {
            return Err(Error::Config("bands and rows must be positive".into()));
        }
        if self.bands.checked_mul(self.rows) != Some(self.num_hashes) {
            return Err(Error::Config(format!(
                "bands × rows ({} × {}) must equal num_hashes ({})",
                self.bands, self.rows, self.num_hashes
            )));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Reads a TOML file, or JSON when the extension is `.json`. Missing
    /// fields take their defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn policy(&self) -> ClassificationPolicy {
        ClassificationPolicy {
            analysis_date: self.analysis_date,
            withdrawn_as_rejection: self.withdrawn_as_rejection,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.shingle_k, c.num_hashes, c.bands, c.rows), (3, 128, 16, 8));
        assert_eq!(c.threshold, 0.8);
        assert_eq!(c.min_support, 3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            PipelineConfig { bands: 10, ..Default::default() },
            PipelineConfig { threshold: 0.0, ..Default::default() },
            PipelineConfig { threshold: 1.5, ..Default::default() },
            PipelineConfig { threshold: f64::NAN, ..Default::default() },
            PipelineConfig { shingle_k: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().unwrap_err().is_config(), "{c:?}");
        }
        let edge = PipelineConfig { threshold: 1.0, ..Default::default() };
        edge.validate().unwrap();
    }

    #[test]
    fn partial_toml_file_fills_defaults() {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(f, "threshold = 0.9\nseed = 7\nanalysis_date = \"2020-10-31\"").unwrap();
        let c = PipelineConfig::from_file(f.path()).unwrap();
        assert_eq!(c.threshold, 0.9);
        assert_eq!(c.seed, 7);
        assert_eq!(c.analysis_date, NaiveDate::from_ymd_opt(2020, 10, 31));
        assert_eq!(c.num_hashes, 128);
    }

    #[test]
    fn json_config_and_unknown_fields() {
        let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        write!(f, "{{\"bands\": 32, \"rows\": 4}}").unwrap();
        let c = PipelineConfig::from_file(f.path()).unwrap();
        assert_eq!((c.bands, c.rows), (32, 4));

        let mut g = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(g, "bogus = 1").unwrap();
        assert!(PipelineConfig::from_file(g.path()).unwrap_err().is_config());
    }
}
