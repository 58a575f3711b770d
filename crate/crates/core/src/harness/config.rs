use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::duality::PowerBudget;
use crate::error::{Error, Result};
use crate::model::{RateWeights, SystemDims};
use crate::optimizer::SolveOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub users: usize,
    pub bs_antennas: usize,
    pub rx_antennas: Vec<usize>,
    pub streams: Vec<usize>,
}

/// A Monte Carlo sweep. Physical parameters have no defaults; the solver
/// section may be omitted in whole or in part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: DimsConfig,
    pub power_caps: Vec<f64>,
    pub omega: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Validated pieces of a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub dims: SystemDims,
    pub budget: PowerBudget,
    pub weights: RateWeights,
}

const DEMO: &str = r#"{
  "dims": { "users": 2, "bs_antennas": 4, "rx_antennas": [2, 2], "streams": [2, 2] },
  "power_caps": [2.5, 2.5, 2.5, 2.5],
  "omega": [0.4, 0.2, 0.6, 0.25],
  "snr_db": [0, 5, 10, 15, 20],
  "realizations": 200,
  "seed": 20130501
}"#;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.setup()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Two users with two antennas and two streams each, four BS antennas
    /// capped at 2.5, 200 realizations per SNR on a 0 to 20 dB grid.
    pub fn demo() -> Self {
        Self::from_json(DEMO).expect("embedded demo config is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn setup(&self) -> Result<Setup> {
        let d = &self.dims;
        if d.rx_antennas.len() != d.users || d.streams.len() != d.users {
            return Err(Error::Config(format!(
                "{} users but {} receive antenna counts and {} stream counts",
                d.users,
                d.rx_antennas.len(),
                d.streams.len()
            )));
        }
        let dims = SystemDims::new(d.bs_antennas, d.rx_antennas.clone(), d.streams.clone())
            .map_err(|e| Error::Config(e.to_string()))?;
        let budget =
            PowerBudget::new(self.power_caps.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if budget.len() != dims.bs_antennas() {
            return Err(Error::Config(format!(
                "{} power caps for {} BS antennas",
                budget.len(),
                dims.bs_antennas()
            )));
        }
        let weights =
            RateWeights::new(self.omega.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if weights.len() != dims.total_streams() {
            return Err(Error::Config(format!(
                "{} rate weights for {} streams",
                weights.len(),
                dims.total_streams()
            )));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(
                "SNR grid must be non-empty and finite".into(),
            ));
        }
        if self.snr_db.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("SNR grid must be sorted".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("at least one realization is required".into()));
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Setup {
            dims,
            budget,
            weights,
        })
    }
}
