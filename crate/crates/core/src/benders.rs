//! Modified Benders decomposition for bi-level linear programs in the
//! canonical form assembled by [`crate::attack`].
//!
//! Each iteration solves a slave problem in the second level's primal and
//! dual variables jointly, with a strong-duality row pinning the pair to the
//! second-level optimal face. An optimal slave yields an optimality cut on
//! the master's surrogate variable alpha; an infeasible slave is re-solved
//! with penalized slacks and yields a feasibility cut. The master then picks
//! the next attack vector. Cuts only ever constrain, so the master value is
//! a monotone bound while certified slave pairs bound from the other side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::BilevelProblem;
use crate::lp::{solve_lp, LpError, LpProblem, LpStatus, Sense, Tolerances};

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("master problem infeasible: first-level constraints and feasibility cuts conflict")]
    MpInfeasible,
    #[error("master problem unbounded; the first level does not confine u")]
    MpUnbounded,
    #[error("slave problem failure: {0}")]
    SpFailure(String),
    #[error("slave called outside the first-level region: A1 u >= b1 violated by {0:.3e}")]
    PreconditionViolated(f64),
    #[error("no certified slave solution was found in {0} iterations")]
    NoCertifiedPoint(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutType {
    Optimality,
    Feasibility,
}

/// One cut over the master variables:
///   optimality:  alpha >= constant - u_coef . u
///   feasibility:      0 >= constant - u_coef . u
/// with constant = gamma'b2 + lambda'd2 and u_coef = gamma'A2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cut {
    pub cut_type: CutType,
    pub constant: f64,
    pub u_coef: Vec<f64>,
}

/// Running decomposition state: current iterate, surrogate value, and the
/// accumulated cut pool.
#[derive(Debug, Clone, Default)]
pub struct BendersState {
    pub iteration: usize,
    pub u: Vec<f64>,
    pub alpha: f64,
    pub cuts: Vec<Cut>,
    pub sp_history: Vec<bool>,
    pub gap: Option<f64>,
}

/// Append a cut to the pool.
pub fn add_cut(state: &mut BendersState, cut: Cut) {
    state.cuts.push(cut);
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub j: usize,
    pub u_norm1: f64,
    pub alpha: f64,
    pub sp_objective: Option<f64>,
    pub cut_type: CutType,
    pub gap: Option<f64>,
    /// Residual of the strong-duality identity at the generating u; an
    /// optimality cut is valid iff this is numerically zero.
    pub cut_residual: Option<f64>,
}

/// JSON-lines export of a trace, one record per iteration.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    trace
        .iter()
        .map(|r| serde_json::to_string(r).expect("trace record serializes"))
        .fold(String::new(), |mut acc, line| {
            acc.push_str(&line);
            acc.push('\n');
            acc
        })
}

#[derive(Debug, Clone)]
pub struct BendersResult {
    /// Best certified first-level point.
    pub u: Vec<f64>,
    /// Its slave-optimal second level.
    pub v: Vec<f64>,
    /// J = c1'u + d1'v at the certified pair (minimization form).
    pub objective: f64,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub struct MbdOptions {
    /// Relative convergence tolerance on |(d1'v - alpha)/alpha|.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Starting attack vector; zero when absent.
    pub u0: Option<Vec<f64>>,
    /// Extra random restarts. Zero keeps the single cold start.
    pub multistart: usize,
    pub seed: u64,
    /// Floor on alpha so a cut-free master stays bounded.
    pub alpha_floor: f64,
}

impl Default for MbdOptions {
    fn default() -> Self {
        MbdOptions {
            epsilon: 5e-5,
            max_iter: 200,
            u0: None,
            multistart: 0,
            seed: 1,
            alpha_floor: -1e6,
        }
    }
}

/// Slave solution: second-level primal/dual pair plus the SP row duals the
/// cuts are made of.
#[derive(Debug, Clone)]
pub struct SpSolution {
    pub v: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
    pub d1v: f64,
    /// |d1'v - (gamma'b2 + lambda'd2 - gamma'A2 u)|
    pub identity_residual: f64,
}

pub enum SpOutcome {
    Optimal(Box<SpSolution>),
    Infeasible,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Solve the slave problem at a fixed u.
///
/// Variables (v, beta); rows: one strong-duality row (dual delta), the
/// second-level primal rows (duals gamma), and the second-level dual
/// equalities (duals lambda). At the optimum d1'v equals
/// gamma'b2 + lambda'd2 - gamma'A2 u, which is exactly the optimality cut's
/// value at this u.
pub fn solve_sp(bp: &BilevelProblem, u: &[f64]) -> Result<SpOutcome, BendersError> {
    let a1u = bp.a1.apply(u);
    let worst = a1u
        .iter()
        .zip(bp.b1.iter())
        .map(|(lhs, rhs)| rhs - lhs)
        .fold(0.0f64, f64::max);
    let scale = bp.b1.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if worst > 1e-6 * scale {
        return Err(BendersError::PreconditionViolated(worst));
    }
    let tol = Tolerances::default();
    let n2 = bp.b2.len();
    let a2u = bp.a2.apply(u);
    let rhs2: Vec<f64> = bp.b2.iter().zip(a2u.iter()).map(|(b, a)| b - a).collect();
    let a3_rows = bp.a3.to_rows();

    let mut lp = LpProblem::new("benders_sp");
    for (j, name) in bp.v_names.iter().enumerate() {
        lp.add_var(
            format!("v_{name}"),
            bp.d1[j],
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
    }
    let ib = bp.n_v;
    for i in 0..n2 {
        lp.add_var(format!("beta{i}"), 0.0, 0.0, f64::INFINITY);
    }

    // strong duality: beta'(b2 - A2 u) - d2'v >= 0
    let mut sd_terms: Vec<(usize, f64)> = Vec::new();
    for (j, &c) in bp.d2.iter().enumerate() {
        if c != 0.0 {
            sd_terms.push((j, -c));
        }
    }
    for (i, &r) in rhs2.iter().enumerate() {
        if r != 0.0 {
            sd_terms.push((ib + i, r));
        }
    }
    lp.add_row("strong_duality", Sense::Ge, 0.0, &sd_terms);

    for (i, terms) in a3_rows.iter().enumerate() {
        lp.add_row(format!("primal_{i}"), Sense::Ge, rhs2[i], terms);
    }
    // A3' beta = d2
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); bp.n_v];
    for &(r, c, v) in &bp.a3.entries {
        cols[c].push((ib + r, v));
    }
    for (j, col) in cols.iter().enumerate() {
        lp.add_row(format!("dualfeas_{j}"), Sense::Eq, bp.d2[j], col);
    }

    let s = solve_lp(&lp, &tol)?;
    match s.status {
        LpStatus::Infeasible => Ok(SpOutcome::Infeasible),
        LpStatus::Unbounded => Err(BendersError::SpFailure(
            "slave problem unbounded; second-level optimal face is not compact in d1".into(),
        )),
        LpStatus::Optimal => {
            let v = s.x[..bp.n_v].to_vec();
            let beta = s.x[ib..].to_vec();
            let delta = s.duals[0];
            let gamma = s.duals[1..1 + n2].to_vec();
            let lambda = s.duals[1 + n2..1 + n2 + bp.n_v].to_vec();
            let d1v = dot(&bp.d1, &v);
            let cut_value = dot(&gamma, &bp.b2) + dot(&lambda, &bp.d2) - dot(&gamma, &a2u);
            let identity_residual = (d1v - cut_value).abs();
            if identity_residual > 1e-3 * (1.0 + d1v.abs()) {
                return Err(BendersError::SpFailure(format!(
                    "strong-duality identity residual {identity_residual:.3e} at SP optimum"
                )));
            }
            Ok(SpOutcome::Optimal(Box::new(SpSolution {
                v,
                beta,
                delta,
                gamma,
                lambda,
                d1v,
                identity_residual,
            })))
        }
    }
}

/// Relaxed-slave solution with its dual vectors for the feasibility cut.
#[derive(Debug, Clone)]
pub struct RelaxedSpSolution {
    pub v: Vec<f64>,
    pub beta: Vec<f64>,
    pub s1: f64,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    pub max_slack: f64,
}

/// Solve the relaxed slave: every SP row gets a slack so the program is
/// always feasible. Slacks carry a large penalty on top of the d1 objective
/// so the duals describe a minimal infeasibility; the plain objective would
/// leave them undetermined.
pub fn solve_relaxed_sp(bp: &BilevelProblem, u: &[f64]) -> Result<RelaxedSpSolution, BendersError> {
    let tol = Tolerances::default();
    let n2 = bp.b2.len();
    let a2u = bp.a2.apply(u);
    let rhs2: Vec<f64> = bp.b2.iter().zip(a2u.iter()).map(|(b, a)| b - a).collect();
    let a3_rows = bp.a3.to_rows();
    let penalty = 1e3 * bp.d1.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut lp = LpProblem::new("benders_relaxed_sp");
    for (j, name) in bp.v_names.iter().enumerate() {
        lp.add_var(
            format!("v_{name}"),
            bp.d1[j],
            f64::NEG_INFINITY,
            f64::INFINITY,
        );
    }
    let ib = bp.n_v;
    for i in 0..n2 {
        lp.add_var(format!("beta{i}"), 0.0, 0.0, f64::INFINITY);
    }
    let is1 = ib + n2;
    lp.add_var("s1", penalty, 0.0, f64::INFINITY);
    let is2 = is1 + 1;
    for i in 0..n2 {
        lp.add_var(format!("s2_{i}"), penalty, 0.0, f64::INFINITY);
    }
    let is3p = is2 + n2;
    for j in 0..bp.n_v {
        lp.add_var(format!("s3p_{j}"), penalty, 0.0, f64::INFINITY);
    }
    let is3m = is3p + bp.n_v;
    for j in 0..bp.n_v {
        lp.add_var(format!("s3m_{j}"), penalty, 0.0, f64::INFINITY);
    }

    let mut sd_terms: Vec<(usize, f64)> = Vec::new();
    for (j, &c) in bp.d2.iter().enumerate() {
        if c != 0.0 {
            sd_terms.push((j, -c));
        }
    }
    for (i, &r) in rhs2.iter().enumerate() {
        if r != 0.0 {
            sd_terms.push((ib + i, r));
        }
    }
    sd_terms.push((is1, 1.0));
    lp.add_row("strong_duality", Sense::Ge, 0.0, &sd_terms);

    for (i, terms) in a3_rows.iter().enumerate() {
        let mut t = terms.clone();
        t.push((is2 + i, 1.0));
        lp.add_row(format!("primal_{i}"), Sense::Ge, rhs2[i], &t);
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); bp.n_v];
    for &(r, c, v) in &bp.a3.entries {
        cols[c].push((ib + r, v));
    }
    for (j, col) in cols.iter().enumerate() {
        let mut t = col.clone();
        t.push((is3p + j, 1.0));
        t.push((is3m + j, -1.0));
        lp.add_row(format!("dualfeas_{j}"), Sense::Eq, bp.d2[j], &t);
    }

    let s = solve_lp(&lp, &tol)?;
    if s.status != LpStatus::Optimal {
        return Err(BendersError::SpFailure(format!(
            "relaxed slave ended {:?}; it must always be feasible and bounded",
            s.status
        )));
    }
    let s2: Vec<f64> = (0..n2).map(|i| s.x[is2 + i]).collect();
    let s3: Vec<f64> = (0..bp.n_v).map(|j| s.x[is3p + j] - s.x[is3m + j]).collect();
    let max_slack = s.x[is1]
        .abs()
        .max(s2.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .max(s3.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(RelaxedSpSolution {
        v: s.x[..bp.n_v].to_vec(),
        beta: s.x[ib..ib + n2].to_vec(),
        s1: s.x[is1],
        s2,
        s3,
        gamma_hat: s.duals[1..1 + n2].to_vec(),
        lambda_hat: s.duals[1 + n2..1 + n2 + bp.n_v].to_vec(),
        max_slack,
    })
}

/// Solve the master under the accumulated cuts.
pub fn solve_mp(
    bp: &BilevelProblem,
    state: &BendersState,
    opts: &MbdOptions,
) -> Result<(Vec<f64>, f64), BendersError> {
    let tol = Tolerances::default();
    let a1_rows = bp.a1.to_rows();
    let mut lp = LpProblem::new("benders_mp");
    for j in 0..bp.n_u {
        lp.add_var(format!("u{j}"), bp.c1[j], f64::NEG_INFINITY, f64::INFINITY);
    }
    let ia = lp.add_var("alpha", 1.0, opts.alpha_floor, f64::INFINITY);
    for (i, terms) in a1_rows.iter().enumerate() {
        lp.add_row(format!("a1_{i}"), Sense::Ge, bp.b1[i], terms);
    }
    for (k, cut) in state.cuts.iter().enumerate() {
        // normalize each cut row; relaxed-slave duals can be orders of
        // magnitude above the first-level rows and would wreck the basis
        // conditioning
        let scale = cut
            .u_coef
            .iter()
            .fold(cut.constant.abs().max(1.0), |m, c| m.max(c.abs()));
        let mut terms: Vec<(usize, f64)> = cut
            .u_coef
            .iter()
            .enumerate()
            .filter(|&(_, c)| *c != 0.0)
            .map(|(j, &c)| (j, c / scale))
            .collect();
        let name = match cut.cut_type {
            CutType::Optimality => {
                terms.push((ia, 1.0 / scale));
                format!("opt_cut_{k}")
            }
            CutType::Feasibility => format!("feas_cut_{k}"),
        };
        lp.add_row(name, Sense::Ge, cut.constant / scale, &terms);
    }
    let s = solve_lp(&lp, &tol)?;
    match s.status {
        LpStatus::Optimal => Ok((s.x[..bp.n_u].to_vec(), s.x[ia])),
        LpStatus::Infeasible => Err(BendersError::MpInfeasible),
        LpStatus::Unbounded => Err(BendersError::MpUnbounded),
    }
}

fn optimality_cut(bp: &BilevelProblem, sol: &SpSolution) -> Cut {
    Cut {
        cut_type: CutType::Optimality,
        constant: dot(&sol.gamma, &bp.b2) + dot(&sol.lambda, &bp.d2),
        u_coef: bp.a2.apply_transpose(&sol.gamma),
    }
}

fn feasibility_cut(bp: &BilevelProblem, sol: &RelaxedSpSolution) -> Cut {
    Cut {
        cut_type: CutType::Feasibility,
        constant: dot(&sol.gamma_hat, &bp.b2) + dot(&sol.lambda_hat, &bp.d2),
        u_coef: bp.a2.apply_transpose(&sol.gamma_hat),
    }
}

/// Relative gap with a guard for vanishing alpha.
fn convergence_gap(d1v: f64, alpha: f64) -> f64 {
    if alpha.abs() < 1e-9 {
        (d1v - alpha).abs()
    } else {
        ((d1v - alpha) / alpha).abs()
    }
}

/// One decomposition run from a given start.
fn mbd_single(
    bp: &BilevelProblem,
    opts: &MbdOptions,
    u0: Vec<f64>,
) -> Result<BendersResult, BendersError> {
    let mut state = BendersState {
        u: u0,
        alpha: opts.alpha_floor,
        ..Default::default()
    };
    let mut trace = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut stalled = false;
    let mut stall_count = 0usize;

    for j in 1..=opts.max_iter {
        state.iteration = j;
        let u_prev = state.u.clone();
        let (cut, sp_obj, residual) = match solve_sp(bp, &u_prev)? {
            SpOutcome::Optimal(sol) => {
                let jval = dot(&bp.c1, &u_prev) + sol.d1v;
                let better = best.as_ref().map_or(true, |(b, _, _)| jval < *b);
                if better {
                    best = Some((jval, u_prev.clone(), sol.v.clone()));
                }
                state.sp_history.push(true);
                (
                    optimality_cut(bp, &sol),
                    Some(sol.d1v),
                    Some(sol.identity_residual),
                )
            }
            SpOutcome::Infeasible => {
                let sol = solve_relaxed_sp(bp, &u_prev)?;
                state.sp_history.push(false);
                (feasibility_cut(bp, &sol), None, None)
            }
        };
        add_cut(&mut state, cut.clone());

        let (u_next, alpha) = solve_mp(bp, &state, opts)?;
        state.alpha = alpha;
        let gap = sp_obj.map(|d1v| convergence_gap(d1v, alpha));
        state.gap = gap;
        trace.push(TraceRecord {
            j,
            u_norm1: u_prev.iter().map(|v| v.abs()).sum(),
            alpha,
            sp_objective: sp_obj,
            cut_type: cut.cut_type,
            gap,
            cut_residual: residual,
        });

        if let Some(g) = gap {
            if g < opts.epsilon {
                state.u = u_next;
                converged = true;
                break;
            }
        }
        // cycle guard: the same u recurring without progress means the cut
        // pool has stopped biting
        let max_move = u_next
            .iter()
            .zip(u_prev.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_move < 1e-8 {
            stall_count += 1;
            if stall_count >= 2 {
                state.u = u_next;
                stalled = true;
                break;
            }
        } else {
            stall_count = 0;
        }
        state.u = u_next;
    }

    let (objective, u_best, v_best) = best.ok_or(BendersError::NoCertifiedPoint(opts.max_iter))?;
    Ok(BendersResult {
        u: u_best,
        v: v_best,
        objective,
        gap: state.gap,
        iterations: state.iteration,
        converged,
        stalled,
        trace,
    })
}

/// Modified Benders decomposition from u = 0 (or the provided start), with
/// optional deterministic random restarts; the best certified pair across
/// runs wins.
pub fn mbd(bp: &BilevelProblem, opts: &MbdOptions) -> Result<BendersResult, BendersError> {
    let u0 = opts.u0.clone().unwrap_or_else(|| vec![0.0; bp.n_u]);
    let mut best = mbd_single(bp, opts, u0)?;
    if opts.multistart > 0 {
        let mut rng_state = opts.seed.max(1);
        let mut next = || {
            // xorshift64*, deterministic across platforms
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state.wrapping_mul(0x2545F4914F6CDD1D) >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < opts.multistart && attempts < 50 * opts.multistart.max(1) {
            attempts += 1;
            let candidate: Vec<f64> = (0..bp.n_u).map(|_| next() * bp.spec.n1).collect();
            if !bp.u_feasible(&candidate, 1e-9) {
                continue;
            }
            found += 1;
            match mbd_single(bp, opts, candidate) {
                Ok(run) if run.objective < best.objective => best = run,
                Ok(_) => {}
                Err(e) => log::warn!("multistart run failed: {e}"),
            }
        }
    }
    Ok(best)
}
