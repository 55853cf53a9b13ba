//! Real-time contingency analysis: enumerate branch contingencies, compute
//! post-contingency flows from distribution factors, classify warnings and
//! violations, and emit the line-limit constraints dispatch must model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{radial_branches, GridCase};
use crate::network::{active_limits, DistFactors, FlowState, LimitKind, NetworkError};

#[derive(Debug, Error)]
pub enum RtcaError {
    #[error("screening threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// An eligible branch contingency. Construction via [`contingency_list`]
/// guarantees the branch is in service, non-radial, and both end buses meet
/// the voltage floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContingencySpec {
    /// Contingency id = outaged branch id.
    pub id: String,
    pub branch_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowClass {
    Ok,
    Warning,
    Violation,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScreenEntry {
    pub monitored_line: String,
    /// `None` for the base case.
    pub contingency: Option<String>,
    pub flow_mw: f64,
    pub limit_mw: f64,
    /// |flow| / limit.
    pub loading: f64,
    pub class: FlowClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScreenResult {
    pub entries: Vec<ScreenEntry>,
}

impl ScreenResult {
    pub fn warnings(&self) -> impl Iterator<Item = &ScreenEntry> {
        self.entries
            .iter()
            .filter(|e| e.class == FlowClass::Warning)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ScreenEntry> {
        self.entries
            .iter()
            .filter(|e| e.class == FlowClass::Violation)
    }

    /// CSV with columns monitored_line, contingency, flow_mw, limit_mw,
    /// loading_pct, class.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out =
            String::from("monitored_line,contingency,flow_mw,limit_mw,loading_pct,class\n");
        for e in &self.entries {
            let class = match e.class {
                FlowClass::Ok => "ok",
                FlowClass::Warning => "warning",
                FlowClass::Violation => "violation",
            };
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.4},{}",
                e.monitored_line,
                e.contingency.as_deref().unwrap_or("base"),
                e.flow_mw,
                e.limit_mw,
                100.0 * e.loading,
                class
            );
        }
        out
    }
}

/// One monitored base-case line-limit constraint: the pre-dispatch flow and
/// the active-power limit it must respect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseConstraint {
    pub line: String,
    pub line_index: usize,
    pub p0_mw: f64,
    pub p_max_mw: f64,
}

/// One monitored post-contingency line-limit constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtgConstraint {
    pub line: String,
    pub line_index: usize,
    pub contingency: String,
    pub contingency_index: usize,
    pub pk0_mw: f64,
    pub pk_max_mw: f64,
}

/// Monitored line-limit constraints produced by screening; an entry exists
/// iff the pre-dispatch loading meets the threshold.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SecurityConstraintSet {
    pub base: Vec<BaseConstraint>,
    pub contingency: Vec<CtgConstraint>,
}

impl SecurityConstraintSet {
    pub fn len(&self) -> usize {
        self.base.len() + self.contingency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty() && self.contingency.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScreenParams {
    /// Post-contingency monitoring threshold (fraction of limit).
    pub tau: f64,
    /// Base-case monitoring threshold; the EMS may use a different one.
    pub tau_base: f64,
}

impl Default for ScreenParams {
    fn default() -> Self {
        ScreenParams {
            tau: 0.90,
            tau_base: 0.90,
        }
    }
}

/// Eligible contingencies: in-service, non-radial branches whose end buses
/// are both at or above `kv_min`.
pub fn contingency_list(case: &GridCase, kv_min: f64) -> Vec<ContingencySpec> {
    let radial = radial_branches(case);
    case.branches
        .iter()
        .enumerate()
        .filter(|(_, br)| br.in_service && !radial.contains(&br.id))
        .filter(|(_, br)| {
            let kv_ok = |bus_id: &str| {
                case.buses
                    .iter()
                    .find(|b| b.id == bus_id)
                    .map(|b| b.base_kv >= kv_min)
                    .unwrap_or(false)
            };
            kv_ok(&br.from_bus) && kv_ok(&br.to_bus)
        })
        .map(|(i, br)| ContingencySpec {
            id: br.id.clone(),
            branch_index: i,
        })
        .collect()
}

/// Relative tolerance above 1.0 before a loading counts as a violation;
/// congestion-bound dispatch rides monitored lines at exactly their limit,
/// and solver-noise overshoot must not flip the class.
const VIOLATION_REL_TOL: f64 = 1e-9;

fn classify(loading: f64, tau: f64) -> FlowClass {
    if loading > 1.0 + VIOLATION_REL_TOL {
        FlowClass::Violation
    } else if loading >= tau {
        FlowClass::Warning
    } else {
        FlowClass::Ok
    }
}

/// Screen the base case and every eligible contingency.
///
/// Post-contingency flows come from the LODF identity
/// `P_m + LODF_k[m] * P_k`; limits from the active-power formula with the
/// rating kind that applies. Per-contingency work is independent and runs
/// in parallel; results merge in contingency-id order so output is
/// deterministic.
pub fn screen(
    case: &GridCase,
    factors: &DistFactors,
    base_flows: &FlowState,
    contingencies: &[ContingencySpec],
    params: &ScreenParams,
) -> Result<(ScreenResult, SecurityConstraintSet), RtcaError> {
    if !(params.tau > 0.0 && params.tau <= 1.0) {
        return Err(RtcaError::BadThreshold(params.tau));
    }
    if !(params.tau_base > 0.0 && params.tau_base <= 1.0) {
        return Err(RtcaError::BadThreshold(params.tau_base));
    }

    let mut entries = Vec::new();
    let mut set = SecurityConstraintSet::default();

    // base case against long-term limits
    for (m, br) in case.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let limit = active_limits(br, LimitKind::Base)?;
        let flow = base_flows.flows[m];
        let loading = flow.abs() / limit;
        entries.push(ScreenEntry {
            monitored_line: br.id.clone(),
            contingency: None,
            flow_mw: flow,
            limit_mw: limit,
            loading,
            class: classify(loading, params.tau_base),
        });
        if loading >= params.tau_base {
            set.base.push(BaseConstraint {
                line: br.id.clone(),
                line_index: m,
                p0_mw: flow,
                p_max_mw: limit,
            });
        }
    }

    // contingencies in parallel, merged in id order
    let mut sorted: Vec<&ContingencySpec> = contingencies.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    type CtgOut = (Vec<ScreenEntry>, Vec<CtgConstraint>);
    let per_ctg: Result<Vec<CtgOut>, RtcaError> = sorted
        .par_iter()
        .map(|spec| {
            let k = spec.branch_index;
            let lodf = factors.lodf_for(&spec.id)?;
            let pk = base_flows.flows[k];
            let mut entries = Vec::new();
            let mut constraints = Vec::new();
            for (m, br) in case.branches.iter().enumerate() {
                if m == k || !br.in_service {
                    continue;
                }
                let limit = active_limits(br, LimitKind::Contingency)?;
                let flow = base_flows.flows[m] + lodf[m] * pk;
                let loading = flow.abs() / limit;
                entries.push(ScreenEntry {
                    monitored_line: br.id.clone(),
                    contingency: Some(spec.id.clone()),
                    flow_mw: flow,
                    limit_mw: limit,
                    loading,
                    class: classify(loading, params.tau),
                });
                if loading >= params.tau {
                    constraints.push(CtgConstraint {
                        line: br.id.clone(),
                        line_index: m,
                        contingency: spec.id.clone(),
                        contingency_index: k,
                        pk0_mw: flow,
                        pk_max_mw: limit,
                    });
                }
            }
            Ok((entries, constraints))
        })
        .collect();
    for (e, c) in per_ctg? {
        entries.extend(e);
        set.contingency.extend(c);
    }

    Ok((ScreenResult { entries }, set))
}
