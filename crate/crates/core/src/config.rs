//! The user-facing configuration document. Every field has a default, so an
//! empty config runs the full paper-shaped campaign: 6 scenarios x 5
//! policies x 10 trials, 7 cells, 40 UEs, mu = 40, G = 25.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::ScenarioKind;
use crate::kpi::Thresholds;
use crate::netstate::NetworkConfig;
use crate::nsga2::GaConfig;
use crate::objectives::EvalSettings;
use crate::policies::{PolicyConfig, PolicyKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub ga: GaConfig,
    pub eval: EvalSettings,
    pub policy: PolicyConfig,
    pub scenarios: Vec<ScenarioKind>,
    pub policies: Vec<PolicyKind>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            ga: GaConfig::default(),
            eval: EvalSettings::default(),
            policy: PolicyConfig::default(),
            scenarios: ScenarioKind::ALL.to_vec(),
            policies: PolicyKind::ALL.to_vec(),
            trials: 10,
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn thresholds(&self) -> &Thresholds {
        &self.eval.thresholds
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Validate every field, collecting one diagnostic per offending field.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems: Vec<String> = Vec::new();

        if self.network.n_cells == 0 {
            problems.push("network.n_cells: must be at least 1".into());
        }
        if self.network.n_ues == 0 {
            problems.push("network.n_ues: must be at least 1".into());
        }
        if self.network.isd_m <= 0.0 {
            problems.push("network.isd_m: must be positive".into());
        }
        if let Err(e) = self.network.radio_params(1.0).validate() {
            let msg = match e {
                Error::InvalidConfig { field, reason } => format!("network.{field}: {reason}"),
                other => other.to_string(),
            };
            problems.push(msg);
        }
        if self.network.shadowing_sigma_db < 0.0 {
            problems.push("network.shadowing_sigma_db: must be nonnegative".into());
        }
        if self.network.n_max() == 0 {
            problems.push("network.n_max_per_cell: must be at least 1".into());
        }

        if let Err(e) = self.ga.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.policy.validate() {
            problems.push(e.to_string());
        }

        if self.eval.windows == 0 {
            problems.push("eval.windows: must be at least 1".into());
        }
        if self.eval.epochs_per_window == 0 {
            problems.push("eval.epochs_per_window: must be at least 1".into());
        }
        if self.eval.epoch_seconds <= 0.0 {
            problems.push("eval.epoch_seconds: must be positive".into());
        }
        let (lo, hi) = self.eval.speed_range;
        if !(lo > 0.0 && hi >= lo) {
            problems.push(format!(
                "eval.speed_range: [{lo}, {hi}] is not a valid positive range"
            ));
        }
        if self.eval.ping_pong_horizon_s <= 0.0 {
            problems.push("eval.ping_pong_horizon_s: must be positive".into());
        }
        let t = &self.eval.thresholds;
        if t.qoe_thr_bps <= 0.0 || t.fairness_jain <= 0.0 || t.stability_ho_per_min <= 0.0 {
            problems.push("eval.thresholds: all thresholds must be positive".into());
        }

        if self.scenarios.is_empty() {
            problems.push("scenarios: at least one scenario required".into());
        }
        if self.policies.is_empty() {
            problems.push("policies: at least one policy required".into());
        }
        if self.trials == 0 {
            problems.push("trials: must be at least 1".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}
