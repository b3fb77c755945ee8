//! Run configuration: one JSON document with the market and the utility.
//!
//! ```json
//! {"mu": 0.1, "r": 0.05, "sigma": 0.3, "beta": 0.1, "T": 1.0, "K": 1.0,
//!  "utility": {"type": "power", "gamma": 0.5}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Problem};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub model: ModelParams,
    pub utility: UtilitySpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.model, &self.utility)
    }

    /// μ = 0.1, r = 0.05, σ = 0.3, β = 0.1, T = 1, K = 1 with the given utility.
    pub fn reference_example(utility: UtilitySpec) -> Self {
        RunConfig {
            model: ModelParams {
                mu: 0.1,
                r: 0.05,
                sigma: 0.3,
                beta: 0.1,
                horizon: 1.0,
                floor: 1.0,
            },
            utility,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_utility_forms() {
        let base = r#""mu":0.1,"r":0.05,"sigma":0.3,"beta":0.1,"T":1,"K":1"#;
        let power = RunConfig::from_json(&format!(r#"{{{base},"utility":{{"type":"power","gamma":0.5}}}}"#)).unwrap();
        assert_eq!(power, RunConfig::reference_example(UtilitySpec::Power { gamma: 0.5 }));
        let nh = RunConfig::from_json(&format!(r#"{{{base},"utility":{{"type":"non_hara"}}}}"#)).unwrap();
        assert_eq!(nh.utility, UtilitySpec::NonHara);
        let sum = RunConfig::from_json(&format!(r#"{{{base},"utility":{{"type":"dual_sum","q":[-3,-1]}}}}"#)).unwrap();
        assert_eq!(sum.problem().unwrap().utility(), nh.problem().unwrap().utility());
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(RunConfig::from_json("{"), Err(Error::Config(_))));
        let neg = r#"{"mu":0.1,"r":0.05,"sigma":-0.3,"beta":0.1,"T":1,"K":1,"utility":{"type":"non_hara"}}"#;
        assert!(matches!(
            RunConfig::from_json(neg),
            Err(Error::InvalidParameter { name: "sigma", .. })
        ));
        let missing = r#"{"mu":0.1,"r":0.05,"sigma":0.3,"beta":0.1,"T":1,"utility":{"type":"non_hara"}}"#;
        assert!(RunConfig::from_json(missing).is_err());
    }
}
