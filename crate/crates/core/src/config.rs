//! Run configuration shared by the CLI and the simulation drivers. Defaults
//! follow the operating practice the tool models: 90% monitoring threshold,
//! 115% short-term ratings, 2% uniform losses, a 15-minute dispatch
//! look-ahead, a 10-minute reserve window, and a 5e-5 decomposition
//! tolerance.

use serde::{Deserialize, Serialize};

use crate::sced::{CtgFlowForm, ScedParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Post-contingency monitoring threshold.
    pub tau: f64,
    /// Base-case monitoring threshold (defaults to tau).
    pub tau_base: f64,
    /// Contingency voltage floor, kV.
    pub kv_min: f64,
    /// Short-term rating factor applied when a case omits explicit
    /// short-term ratings.
    pub st_factor: f64,
    /// Override for the case loss fraction, when present.
    pub loss_fraction: Option<f64>,
    /// Dispatch look-ahead, minutes.
    pub t_h: f64,
    /// Spinning-reserve window, minutes.
    pub t_r: f64,
    /// Decomposition convergence tolerance.
    pub eps: f64,
    pub max_iter: usize,
    /// l1-budget grid for screening sweeps.
    pub n1_grid: Vec<f64>,
    /// Load-shift fractions for screening sweeps.
    pub ls_list: Vec<f64>,
    /// l1 penalty weight.
    pub sigma: f64,
    pub seed: u64,
    /// Worker threads for embarrassingly parallel stages; 0 = library
    /// default.
    pub jobs: usize,
    /// EMS measurement/dispatch rounds to replay in the simulator.
    pub rounds: usize,
    /// Extra random decomposition starts.
    pub multistart: usize,
    pub ctg_flow_form: CtgFlowForm,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tau: 0.90,
            tau_base: 0.90,
            kv_min: 100.0,
            st_factor: 1.15,
            loss_fraction: None,
            t_h: 15.0,
            t_r: 10.0,
            eps: 5e-5,
            max_iter: 200,
            n1_grid: vec![0.2, 0.6, 1.0, 1.4, 2.0],
            ls_list: vec![0.10],
            sigma: 1e-3,
            seed: 1,
            jobs: 0,
            rounds: 1,
            multistart: 0,
            ctg_flow_form: CtgFlowForm::Augmented,
        }
    }
}

impl RunConfig {
    pub fn sced_params(&self) -> ScedParams {
        ScedParams {
            t_h_minutes: self.t_h,
            t_r_minutes: self.t_r,
            ctg_flow_form: self.ctg_flow_form,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
