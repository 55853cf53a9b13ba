//! Closed-loop attack implementation and vulnerability assessment.
//!
//! The simulator plays both sides. The attacker designs its vector against
//! the true system state; the defender then re-runs the very same screening
//! and dispatch pipeline on the falsified loads (no reimplementation: the
//! cyber view is produced by the identical functions), and the resulting
//! dispatch is applied to the physical system. The report compares the
//! attacker-predicted, defender-visible (cyber), and physical flows on the
//! target, and lists every physical post-contingency violation the attack
//! caused.
//!
//! Load conventions: flows are always computed with loss-adjusted
//! (uniformly scaled) loads so injections balance; the false-load shift is
//! subtracted in that scaled space, which keeps the defender's anchored
//! flow equations exactly equal to the attacker's second-level model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    build_bilevel, design_attack, AttackDesign, AttackError, AttackSpec, TargetCase,
};
use crate::benders::MbdOptions;
use crate::config::RunConfig;
use crate::grid::GridCase;
use crate::network::{
    build_dc, compute_factors, dc_power_flow, DcNetwork, DistFactors, NetworkError,
};
use crate::rtca::{contingency_list, screen, ContingencySpec, FlowClass, RtcaError, ScreenParams};
use crate::sced::{build_sced, solve_sced, ScedError, ScedStatus};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Rtca(#[from] RtcaError),
    #[error(transparent)]
    Sced(#[from] ScedError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("grid error: {0}")]
    Grid(#[from] crate::grid::GridError),
}

/// Cyber-vs-physical loading of one line under one contingency (or base).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinePair {
    pub line: String,
    pub contingency: String,
    pub cyber_mw: f64,
    pub cyber_pct: f64,
    pub physical_mw: f64,
    pub physical_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollateralViolation {
    pub line: String,
    pub contingency: String,
    pub physical_pct: f64,
    pub is_target: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub target_line: String,
    pub target_case: String,
    pub n1: f64,
    pub load_shift: f64,
    pub sigma: f64,
    /// Attacker-predicted target flow (certified by the design's
    /// second-level solve), MW and % of the applicable limit.
    pub predicted_flow_mw: f64,
    pub predicted_pct: f64,
    /// What the defender's own screening shows after the re-dispatch.
    pub cyber_flow_mw: f64,
    pub cyber_pct: f64,
    /// What actually flows with real loads and the new dispatch.
    pub physical_flow_mw: f64,
    pub physical_pct: f64,
    pub l0_norm: usize,
    pub l1_norm: f64,
    pub sced_status: ScedStatus,
    /// Dispatch applied to the physical system (empty if dispatch failed).
    pub dispatch_mw: Vec<f64>,
    pub line_pairs: Vec<LinePair>,
    pub collateral_violations: Vec<CollateralViolation>,
    /// |sum(cyber loads - real loads)|, MW; unobservability means zero.
    pub unobservability_residual_mw: f64,
    pub defender_constraints: usize,
    pub rounds_run: usize,
    /// Per-round max |dispatch change| (demonstrates the fixed point when
    /// more than one EMS round is replayed).
    pub round_dispatch_deltas: Vec<f64>,
}

impl AssessmentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assessment report serializes")
    }
}

/// Cyber loads in raw (case) units: the scaled-space shift w maps to
/// w / (1 + loss) on the stored loads, so anchored defender flows see
/// exactly +w.
fn cyber_loads(case: &GridCase, w: &[f64]) -> Vec<f64> {
    let scale = 1.0 + case.loss_fraction;
    case.buses
        .iter()
        .zip(w.iter())
        .map(|(b, wi)| b.load_p - wi / scale)
        .collect()
}

/// Loss-adjusted injections for a dispatch against the case's own loads.
pub fn effective_injections(case: &GridCase, dispatch: &[f64]) -> Vec<f64> {
    let scale = 1.0 + case.loss_fraction;
    let mut inj: Vec<f64> = case.buses.iter().map(|b| -scale * b.load_p).collect();
    for (g, p) in case.generators.iter().zip(dispatch.iter()) {
        if let Ok(i) = case.bus_index(&g.bus) {
            inj[i] += p;
        }
    }
    inj
}

/// Pick the contingencies worth re-evaluating after the attack: the target
/// plus everything the pre-attack screening monitored. With `full` set,
/// every eligible contingency is evaluated.
fn evaluation_contingencies(
    target: &TargetCase,
    monitored: &[String],
    eligible: &[ContingencySpec],
    full: bool,
) -> Vec<ContingencySpec> {
    if full {
        return eligible.to_vec();
    }
    let mut wanted: Vec<&str> = monitored.iter().map(|s| s.as_str()).collect();
    if let TargetCase::Contingency(kt) = target {
        wanted.push(kt.as_str());
    }
    wanted.sort_unstable();
    wanted.dedup();
    eligible
        .iter()
        .filter(|spec| wanted.contains(&spec.id.as_str()))
        .cloned()
        .collect()
}

/// Options for one closed-loop run.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub screen_params: ScreenParams,
    pub kv_min: f64,
    pub sced_params: crate::sced::ScedParams,
    pub rounds: usize,
    pub full_rescreen: bool,
}

impl From<&RunConfig> for SimOptions {
    fn from(cfg: &RunConfig) -> Self {
        SimOptions {
            screen_params: ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            },
            kv_min: cfg.kv_min,
            sced_params: cfg.sced_params(),
            rounds: cfg.rounds.max(1),
            full_rescreen: false,
        }
    }
}

/// Run the attack through the defender's EMS loop and measure what actually
/// happens on the wire.
pub fn implement_attack(
    case: &GridCase,
    net: &DcNetwork,
    factors: &DistFactors,
    design: &AttackDesign,
    opts: &SimOptions,
) -> Result<AssessmentReport, SimError> {
    let eligible = contingency_list(case, opts.kv_min);
    let w = net.load_shift_mw(&design.c);
    let cyber = case.with_loads(&cyber_loads(case, &w));
    let unobservability_residual_mw =
        (cyber.total_load_mw() - case.total_load_mw()).abs() * (1.0 + case.loss_fraction);

    // defender rounds: screen on false loads, dispatch, optionally replay
    let mut p_prev = case.p0();
    let mut dispatch: Option<Vec<f64>> = None;
    let mut defender_constraints = 0usize;
    let mut rounds_run = 0usize;
    let mut round_dispatch_deltas = Vec::new();
    let mut sced_status = ScedStatus::Optimal;
    for _ in 0..opts.rounds.max(1) {
        rounds_run += 1;
        let def_case = cyber.with_p0(&p_prev);
        let def_net = build_dc(&def_case)?;
        let def_eligible = contingency_list(&def_case, opts.kv_min);
        let def_idx: Vec<usize> = def_eligible.iter().map(|c| c.branch_index).collect();
        let def_factors = compute_factors(&def_net, &def_case, &def_idx)?;
        let def_flows = dc_power_flow(&def_net, &effective_injections(&def_case, &p_prev))?;
        let (_, def_constraints) = screen(
            &def_case,
            &def_factors,
            &def_flows,
            &def_eligible,
            &opts.screen_params,
        )?;
        defender_constraints = def_constraints.len();
        let problem = build_sced(
            &def_case,
            &def_factors,
            &def_constraints,
            &vec![0.0; case.buses.len()],
            &opts.sced_params,
        )?;
        let sol = solve_sced(&problem, &def_case)?;
        if sol.status == ScedStatus::Infeasible {
            sced_status = ScedStatus::Infeasible;
            break;
        }
        let delta = sol
            .p_g
            .iter()
            .zip(p_prev.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        round_dispatch_deltas.push(delta);
        p_prev = sol.p_g.clone();
        dispatch = Some(sol.p_g);
    }

    let target_case = design.spec.target_case.clone();
    let mut report = AssessmentReport {
        target_line: design.spec.target_line.clone(),
        target_case: target_case.to_string(),
        n1: design.spec.n1,
        load_shift: design.spec.load_shift,
        sigma: design.spec.sigma,
        predicted_flow_mw: design.predicted_flow_mw,
        predicted_pct: design.predicted_flow_pct,
        cyber_flow_mw: f64::NAN,
        cyber_pct: f64::NAN,
        physical_flow_mw: f64::NAN,
        physical_pct: f64::NAN,
        l0_norm: design.l0_norm,
        l1_norm: design.l1_norm,
        sced_status,
        dispatch_mw: dispatch.clone().unwrap_or_default(),
        line_pairs: Vec::new(),
        collateral_violations: Vec::new(),
        unobservability_residual_mw,
        defender_constraints,
        rounds_run,
        round_dispatch_deltas,
    };
    let Some(p_star) = dispatch else {
        // the attack drove the defender's dispatch infeasible: meaningful
        // outcome, reported as-is
        return Ok(report);
    };

    // which contingencies to evaluate after the fact
    let monitored: Vec<String> = {
        let inj0 = effective_injections(case, &case.p0());
        let flows0 = dc_power_flow(net, &inj0)?;
        let (_, set0) = screen(case, factors, &flows0, &eligible, &opts.screen_params)?;
        set0.contingency
            .iter()
            .map(|c| c.contingency.clone())
            .collect()
    };
    let eval_list =
        evaluation_contingencies(&target_case, &monitored, &eligible, opts.full_rescreen);

    // physical screening: real loads, new dispatch, same pipeline
    let phys_flows = dc_power_flow(net, &effective_injections(case, &p_star))?;
    let (phys_screen, _) = screen(case, factors, &phys_flows, &eval_list, &opts.screen_params)?;

    // cyber screening: false loads, new dispatch, byte-identical pipeline
    let cyber_net = build_dc(&cyber)?;
    let cyber_idx: Vec<usize> = eval_list.iter().map(|c| c.branch_index).collect();
    let cyber_factors = compute_factors(&cyber_net, &cyber, &cyber_idx)?;
    let cyber_flows = dc_power_flow(&cyber_net, &effective_injections(&cyber, &p_star))?;
    let (cyber_screen, _) = screen(
        &cyber,
        &cyber_factors,
        &cyber_flows,
        &eval_list,
        &opts.screen_params,
    )?;

    let key = |line: &str, ctg: Option<&str>| (line.to_string(), ctg.unwrap_or("base").to_string());
    let mut cyber_by_key = std::collections::BTreeMap::new();
    for e in &cyber_screen.entries {
        cyber_by_key.insert(key(&e.monitored_line, e.contingency.as_deref()), e);
    }
    let target_key = key(
        &design.spec.target_line,
        match &target_case {
            TargetCase::Base => None,
            TargetCase::Contingency(kt) => Some(kt.as_str()),
        },
    );
    for e in &phys_screen.entries {
        let k = key(&e.monitored_line, e.contingency.as_deref());
        let Some(c) = cyber_by_key.get(&k) else {
            continue;
        };
        report.line_pairs.push(LinePair {
            line: k.0.clone(),
            contingency: k.1.clone(),
            cyber_mw: c.flow_mw,
            cyber_pct: 100.0 * c.loading,
            physical_mw: e.flow_mw,
            physical_pct: 100.0 * e.loading,
        });
        if e.class == FlowClass::Violation {
            report.collateral_violations.push(CollateralViolation {
                line: k.0.clone(),
                contingency: k.1.clone(),
                physical_pct: 100.0 * e.loading,
                is_target: k == target_key,
            });
        }
        if k == target_key {
            report.physical_flow_mw = e.flow_mw;
            report.physical_pct = 100.0 * e.loading;
            report.cyber_flow_mw = c.flow_mw;
            report.cyber_pct = 100.0 * c.loading;
        }
    }
    Ok(report)
}

/// One cell of the screening sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub target_line: String,
    pub contingency: String,
    pub n1: f64,
    pub load_shift: f64,
    pub converged: bool,
    pub stalled: bool,
    /// Certified attacker objective in the maximization convention.
    pub objective: f64,
    pub report: Option<AssessmentReport>,
    pub error: Option<String>,
}

/// Per-target aggregation in the shape of the statistical results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target_line: String,
    pub contingency: String,
    pub max_pf_min_pct: f64,
    pub max_pf_max_pct: f64,
    pub l0_min: usize,
    pub l0_max: usize,
    /// True when the certified objective ever decreased as n1 grew (the
    /// decomposition is not guaranteed monotone).
    pub nonmonotone: bool,
    /// True when the l0 norm never decreased as n1 grew.
    pub l0_nondecreasing: bool,
    pub unconverged_cells: usize,
    pub failed_cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenSweep {
    pub summaries: Vec<TargetSummary>,
    pub cells: Vec<CellRecord>,
}

impl ScreenSweep {
    /// Statistical-results table: one row per (target, contingency).
    pub fn to_table_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from(
            "target,contingency,max_pf_min_pct,max_pf_max_pct,l0_min,l0_max,nonmonotone,l0_nondecreasing,unconverged_cells,failed_cells\n",
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{:.2},{:.2},{},{},{},{},{},{}",
                s.target_line,
                s.contingency,
                s.max_pf_min_pct,
                s.max_pf_max_pct,
                s.l0_min,
                s.l0_max,
                s.nonmonotone,
                s.l0_nondecreasing,
                s.unconverged_cells,
                s.failed_cells
            );
        }
        out
    }

    /// Per-cell detail.
    pub fn to_cells_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from(
            "target,contingency,n1,load_shift,converged,stalled,objective,predicted_pct,cyber_pct,physical_pct,l0,l1,sced_status,error\n",
        );
        for c in &self.cells {
            let (pred, cyb, phys, l0, l1, status) = match &c.report {
                Some(r) => (
                    format!("{:.2}", r.predicted_pct),
                    format!("{:.2}", r.cyber_pct),
                    format!("{:.2}", r.physical_pct),
                    r.l0_norm.to_string(),
                    format!("{:.6}", r.l1_norm),
                    format!("{:?}", r.sced_status).to_lowercase(),
                ),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{},{},{},{},{},{},{}",
                c.target_line,
                c.contingency,
                c.n1,
                c.load_shift,
                c.converged,
                c.stalled,
                c.objective,
                pred,
                cyb,
                phys,
                l0,
                l1,
                status,
                c.error.as_deref().unwrap_or("")
            );
        }
        out
    }

    /// Flow-versus-budget series for external plotting.
    pub fn to_plotdata_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from(
            "target,contingency,load_shift,n1,predicted_pct,cyber_pct,physical_pct,l0\n",
        );
        for c in &self.cells {
            if let Some(r) = &c.report {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.4},{:.4},{:.4},{}",
                    c.target_line,
                    c.contingency,
                    c.load_shift,
                    c.n1,
                    r.predicted_pct,
                    r.cyber_pct,
                    r.physical_pct,
                    r.l0_norm
                );
            }
        }
        out
    }
}

/// Exhaustively attack every warned post-contingency pair over the budget
/// grid. Cells run in parallel; failures are recorded per cell and never
/// abort the sweep.
pub fn screen_targets(case: &GridCase, cfg: &RunConfig) -> Result<ScreenSweep, SimError> {
    let net = build_dc(case)?;
    let eligible = contingency_list(case, cfg.kv_min);
    let idx: Vec<usize> = eligible.iter().map(|c| c.branch_index).collect();
    let factors = compute_factors(&net, case, &idx)?;
    let inj0 = effective_injections(case, &case.p0());
    let flows0 = dc_power_flow(&net, &inj0)?;
    let params = ScreenParams {
        tau: cfg.tau,
        tau_base: cfg.tau_base,
    };
    let (screen_result, constraints) = screen(case, &factors, &flows0, &eligible, &params)?;

    // targets = warned post-contingency pairs
    let mut pairs: Vec<(String, String)> = screen_result
        .warnings()
        .filter_map(|e| {
            e.contingency
                .as_ref()
                .map(|k| (e.monitored_line.clone(), k.clone()))
        })
        .collect();
    pairs.sort();
    pairs.dedup();
    if pairs.is_empty() {
        return Ok(ScreenSweep {
            summaries: Vec::new(),
            cells: Vec::new(),
        });
    }

    let mut cells_spec = Vec::new();
    for (line, ctg) in &pairs {
        for &ls in &cfg.ls_list {
            for &n1 in &cfg.n1_grid {
                cells_spec.push((line.clone(), ctg.clone(), n1, ls));
            }
        }
    }

    let opts = SimOptions::from(cfg);
    let mbd_opts = MbdOptions {
        epsilon: cfg.eps,
        max_iter: cfg.max_iter,
        u0: None,
        multistart: cfg.multistart,
        seed: cfg.seed,
        alpha_floor: -1e6,
    };

    let mut cells: Vec<CellRecord> = cells_spec
        .par_iter()
        .map(|(line, ctg, n1, ls)| {
            let spec = AttackSpec {
                target_line: line.clone(),
                target_case: TargetCase::Contingency(ctg.clone()),
                n1: *n1,
                load_shift: *ls,
                sigma: cfg.sigma,
            };
            let outcome =
                build_bilevel(case, &net, &factors, &constraints, &spec, &opts.sced_params)
                    .and_then(|bp| {
                        let design = design_attack(&bp, &mbd_opts)?;
                        let report = implement_attack(case, &net, &factors, &design, &opts)
                            .map_err(|e| AttackError::Decomposition(e.to_string()))?;
                        Ok((design, report))
                    });
            match outcome {
                Ok((design, report)) => CellRecord {
                    target_line: line.clone(),
                    contingency: ctg.clone(),
                    n1: *n1,
                    load_shift: *ls,
                    converged: design.converged,
                    stalled: !design.converged,
                    objective: design.attacker_objective,
                    report: Some(report),
                    error: None,
                },
                Err(e) => CellRecord {
                    target_line: line.clone(),
                    contingency: ctg.clone(),
                    n1: *n1,
                    load_shift: *ls,
                    converged: false,
                    stalled: false,
                    objective: f64::NAN,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    cells.sort_by(|a, b| {
        (&a.target_line, &a.contingency)
            .cmp(&(&b.target_line, &b.contingency))
            .then(a.n1.partial_cmp(&b.n1).unwrap())
            .then(a.load_shift.partial_cmp(&b.load_shift).unwrap())
    });

    let mut summaries = Vec::new();
    for (line, ctg) in &pairs {
        let mine: Vec<&CellRecord> = cells
            .iter()
            .filter(|c| &c.target_line == line && &c.contingency == ctg)
            .collect();
        let mut pf_min = f64::INFINITY;
        let mut pf_max = f64::NEG_INFINITY;
        let mut l0_min = usize::MAX;
        let mut l0_max = 0usize;
        let mut nonmonotone = false;
        let mut l0_nondecreasing = true;
        let mut unconverged = 0usize;
        let mut failed = 0usize;
        for &ls in &cfg.ls_list {
            let mut prev_obj = f64::NEG_INFINITY;
            let mut prev_l0 = 0usize;
            for &n1 in &cfg.n1_grid {
                let Some(cell) = mine.iter().find(|c| c.n1 == n1 && c.load_shift == ls) else {
                    continue;
                };
                if cell.error.is_some() {
                    failed += 1;
                    continue;
                }
                if !cell.converged {
                    unconverged += 1;
                }
                if cell.objective < prev_obj - 1e-9 {
                    nonmonotone = true;
                }
                prev_obj = cell.objective;
                if let Some(r) = &cell.report {
                    if r.physical_pct.is_finite() {
                        pf_min = pf_min.min(r.physical_pct);
                        pf_max = pf_max.max(r.physical_pct);
                    }
                    if r.l0_norm < prev_l0 {
                        l0_nondecreasing = false;
                    }
                    prev_l0 = r.l0_norm;
                    l0_min = l0_min.min(r.l0_norm);
                    l0_max = l0_max.max(r.l0_norm);
                }
            }
        }
        summaries.push(TargetSummary {
            target_line: line.clone(),
            contingency: ctg.clone(),
            max_pf_min_pct: pf_min,
            max_pf_max_pct: pf_max,
            l0_min: if l0_min == usize::MAX { 0 } else { l0_min },
            l0_max,
            nonmonotone,
            l0_nondecreasing,
            unconverged_cells: unconverged,
            failed_cells: failed,
        });
    }

    Ok(ScreenSweep { summaries, cells })
}
