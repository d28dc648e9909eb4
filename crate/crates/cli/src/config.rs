//! Run configuration: a flat TOML file whose keys are the union of all
//! subcommand parameters, with unknown keys rejected, plus command-line
//! overrides for the shared knobs.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Everything a run can be told. Per-subcommand validation picks the fields
/// it needs and rejects inconsistent ones.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub replicas: Option<usize>,
    pub tolerance: Option<f64>,
    /// parallelism hint; the current implementation is single-threaded and
    /// records the hint in the manifest only
    pub threads: Option<usize>,
    pub plot: Option<bool>,

    // ring / exact-mixing parameters
    #[serde(rename = "N")]
    pub n_sites: Option<usize>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub epsilon_list: Option<Vec<f64>>,
    pub horizon: Option<f64>,
    pub sample_times: Option<Vec<f64>>,
    /// (N, k) pairs for scans
    pub sizes: Option<Vec<(usize, usize)>>,

    // LPP parameters (slope m = m_num / m_den)
    pub n_list: Option<Vec<i64>>,
    pub n: Option<i64>,
    pub m_num: Option<i64>,
    pub m_den: Option<i64>,
    pub x_grid: Option<Vec<f64>>,

    // coalescence parameters
    pub cap_mult: Option<f64>,
    pub theta_list: Option<Vec<f64>>,

    // gamma TV parameters
    #[serde(rename = "M_list")]
    pub m_list: Option<Vec<u64>>,
    pub delta_list: Option<Vec<f64>>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("config parse error: {e}")))
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn replicas(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    pub fn tolerance(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    pub fn require_nk(&self) -> Result<(usize, usize), ConfigError> {
        let n = self.n_sites.ok_or(ConfigError("missing required key: N".into()))?;
        let k = self.k.ok_or(ConfigError("missing required key: k".into()))?;
        if k == 0 || k >= n {
            return Err(ConfigError(format!(
                "constraint violated: need 1 <= k < N, got N={n}, k={k}"
            )));
        }
        Ok((n, k))
    }

    pub fn slope(&self) -> Result<tasep_lpp::periodic_lpp::Slope, ConfigError> {
        let num = self.m_num.unwrap_or(1);
        let den = self.m_den.unwrap_or(1);
        tasep_lpp::periodic_lpp::Slope::new(num, den)
            .map_err(|e| ConfigError(format!("invalid slope m = {num}/{den}: {e}")))
    }
}
