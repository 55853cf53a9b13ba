//! Attacker-side machinery: assemble the attacker-defender bi-level LP over
//! the dispatch second level into canonical form, evaluate it at a fixed
//! attack vector, and provide two independent oracles (grid enumeration and
//! a KKT branch-over-complementarity search) for verifying the Benders
//! engine.
//!
//! Canonical form (minimization on both levels; the attacker's maximize is
//! negated):
//!
//! ```text
//!   min_u  c1'u + d1'v*      s.t.  A1 u >= b1
//!   v* = argmin_v { d2'v  s.t.  A2 u + A3 v >= b2 }   (duals beta >= 0)
//! ```
//!
//! `u = (c+, c-)` splits the per-unit angle attack vector over the non-slack
//! buses; every second-level equality is written as two inequalities and
//! every dispatch variable bound becomes a row, so the second level carries
//! nothing but `>=` rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridCase;
use crate::lp::{solve_lp, LpError, LpProblem, LpStatus, Sense, Tolerances};
use crate::network::{active_limits, DcNetwork, DistFactors, LimitKind, NetworkError};
use crate::rtca::SecurityConstraintSet;
use crate::sced::{build_model, ScedError, ScedParams, ScedRow};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack spec: {0}")]
    BadSpec(String),
    #[error("target `{line}` is not monitored under `{case}`; screening produced no entry for it")]
    TargetNotMonitored { line: String, case: String },
    #[error("attack dimension {0} exceeds the enumeration oracle's limit of {1}")]
    DimensionTooLarge(usize, usize),
    #[error("complementarity search exhausted its node budget ({0} nodes)")]
    NodeBudget(usize),
    #[error("no KKT point found within the multiplier bound {0}; big-M too small?")]
    BigMTooSmall(f64),
    #[error("decomposition failed: {0}")]
    Decomposition(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sced(#[from] ScedError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Attack target: a monitored line under one contingency, or in the base
/// case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetCase {
    Base,
    Contingency(String),
}

impl std::fmt::Display for TargetCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetCase::Base => write!(f, "base"),
            TargetCase::Contingency(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSpec {
    pub target_line: String,
    pub target_case: TargetCase,
    /// l1-norm budget on the per-unit angle attack vector.
    pub n1: f64,
    /// Per-bus cap on the apparent load change, as a fraction of that bus's
    /// load.
    pub load_shift: f64,
    /// l1 penalty weight in the attacker objective.
    pub sigma: f64,
}

impl AttackSpec {
    fn validate(&self) -> Result<(), AttackError> {
        if !(self.n1 > 0.0) {
            return Err(AttackError::BadSpec(format!(
                "n1 must be positive, got {}",
                self.n1
            )));
        }
        if !(self.load_shift > 0.0 && self.load_shift <= 1.0) {
            return Err(AttackError::BadSpec(format!(
                "load_shift must lie in (0, 1], got {}",
                self.load_shift
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(AttackError::BadSpec(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Sparse matrix in triplet form.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Triplets {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((r, c, v));
        }
    }

    /// y = M x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// y = M' x
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
        y
    }

    /// Row-major adjacency for LP assembly.
    pub fn to_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.rows];
        for &(r, c, v) in &self.entries {
            rows[r].push((c, v));
        }
        rows
    }
}

/// Variable bookkeeping for `u = (c+, c-)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UMap {
    pub n_bus: usize,
    /// Bus index (into the case) per attackable coordinate; the slack bus is
    /// excluded, its angle is the reference.
    pub attackable_buses: Vec<usize>,
    pub attackable_ids: Vec<String>,
}

impl UMap {
    pub fn n_c(&self) -> usize {
        self.attackable_buses.len()
    }

    /// Reconstruct the full-length per-unit attack vector from u.
    pub fn c_from_u(&self, u: &[f64]) -> Vec<f64> {
        let n_c = self.n_c();
        assert_eq!(u.len(), 2 * n_c);
        let mut c = vec![0.0; self.n_bus];
        for (slot, &bus) in self.attackable_buses.iter().enumerate() {
            c[bus] = u[slot] - u[n_c + slot];
        }
        c
    }
}

/// The assembled bi-level program in canonical form plus the reporting
/// constants that convert its minimization objective back to the attacker's
/// convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilevelProblem {
    pub n_u: usize,
    pub n_v: usize,
    pub c1: Vec<f64>,
    pub d1: Vec<f64>,
    pub a1: Triplets,
    pub b1: Vec<f64>,
    pub a2: Triplets,
    pub a3: Triplets,
    pub b2: Vec<f64>,
    pub d2: Vec<f64>,
    pub u_map: UMap,
    pub v_names: Vec<String>,
    pub row_names: Vec<String>,
    pub spec: AttackSpec,
    /// Target flow bookkeeping: flow_mw(v) = -mva_base * (d1.v) - pd_term_mw.
    pub mva_base: f64,
    pub pd_term_mw: f64,
    /// Active-power limit of the target under its rating kind, MW.
    pub target_limit_mw: f64,
    /// +1 when the pre-attack target flow is nonnegative, -1 otherwise;
    /// flow_mw reports the oriented (maximized) magnitude.
    pub orientation: f64,
}

impl BilevelProblem {
    /// Attacker objective in the maximization convention (per-unit
    /// target flow minus sigma * l1), from a canonical-form objective value
    /// J = c1'u + d1'v.
    pub fn attacker_objective(&self, j: f64) -> f64 {
        -j - self.pd_term_mw / self.mva_base
    }

    /// Target flow in MW from a second-level point.
    pub fn flow_mw(&self, v: &[f64]) -> f64 {
        let d1v: f64 = self.d1.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        -self.mva_base * d1v - self.pd_term_mw
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bilevel problem serializes")
    }

    /// u feasibility against A1 u >= b1.
    pub fn u_feasible(&self, u: &[f64], tol: f64) -> bool {
        let a1u = self.a1.apply(u);
        a1u.iter()
            .zip(self.b1.iter())
            .all(|(lhs, rhs)| lhs >= &(rhs - tol))
    }
}

/// Assemble the canonical bi-level program for one attack spec.
///
/// The second level reuses the dispatch model rows verbatim; equalities are
/// split into `>=` pairs and every dispatch-variable bound becomes a row, so
/// the only variable bounds left in the second level are `beta >= 0` in its
/// dual.
pub fn build_bilevel(
    case: &GridCase,
    net: &DcNetwork,
    factors: &DistFactors,
    constraints: &SecurityConstraintSet,
    spec: &AttackSpec,
    params: &ScedParams,
) -> Result<BilevelProblem, AttackError> {
    spec.validate()?;
    let n_bus = case.buses.len();
    let target_idx = case
        .branch_index(&spec.target_line)
        .map_err(|_| AttackError::BadSpec(format!("unknown target line `{}`", spec.target_line)))?;

    // target sensitivity row, limit, and orientation: a target whose
    // pre-attack flow runs negative has its magnitude maximized, so the
    // whole objective row is flipped
    let (mut target_row, target_limit, pre_flow): (Vec<f64>, f64, f64) = match &spec.target_case {
        TargetCase::Base => {
            let Some(entry) = constraints.base.iter().find(|b| b.line == spec.target_line) else {
                return Err(AttackError::TargetNotMonitored {
                    line: spec.target_line.clone(),
                    case: "base".into(),
                });
            };
            let row = (0..n_bus)
                .map(|i| factors.ptdf.get(target_idx, i))
                .collect();
            let lim = active_limits(&case.branches[target_idx], LimitKind::Base)?;
            (row, lim, entry.p0_mw)
        }
        TargetCase::Contingency(kt) => {
            let Some(entry) = constraints
                .contingency
                .iter()
                .find(|c| c.line == spec.target_line && &c.contingency == kt)
            else {
                return Err(AttackError::TargetNotMonitored {
                    line: spec.target_line.clone(),
                    case: kt.clone(),
                });
            };
            let otdf = factors.otdf_for(kt)?;
            let row = (0..n_bus).map(|i| otdf.get(target_idx, i)).collect();
            let lim = active_limits(&case.branches[target_idx], LimitKind::Contingency)?;
            (row, lim, entry.pk0_mw)
        }
    };
    let orientation = if pre_flow < 0.0 { -1.0 } else { 1.0 };
    if orientation < 0.0 {
        for v in target_row.iter_mut() {
            *v = -*v;
        }
    }

    let model = build_model(case, factors, constraints, params)?;
    let n_v = model.vars.len();

    // u layout: c+ then c- over non-slack buses
    let slack = net.slack;
    let attackable_buses: Vec<usize> = (0..n_bus).filter(|&i| i != slack).collect();
    let attackable_ids = attackable_buses
        .iter()
        .map(|&i| case.buses[i].id.clone())
        .collect();
    let u_map = UMap {
        n_bus,
        attackable_buses,
        attackable_ids,
    };
    let n_c = u_map.n_c();
    let n_u = 2 * n_c;

    // first-level objective: + sigma * ||c||_1 under minimization
    let c1 = vec![spec.sigma; n_u];

    // d1: -target_row . G_B / mva_base over the P_G variables
    let mut d1 = vec![0.0; n_v];
    for (g, gen) in case.generators.iter().enumerate() {
        let bus = case.bus_index(&gen.bus).expect("validated by build_model");
        d1[model.layout.pg[g]] = -target_row[bus] / case.mva_base;
    }
    // flow constant: target_row . P_D_eff (loss-adjusted loads, matching the
    // flow convention used everywhere else in the pipeline)
    let loads_eff: Vec<f64> = case
        .buses
        .iter()
        .map(|b| (1.0 + case.loss_fraction) * b.load_p)
        .collect();
    let pd_term_mw: f64 = target_row
        .iter()
        .zip(loads_eff.iter())
        .map(|(r, p)| r * p)
        .sum();

    // A1 u >= b1: budget row, two load-shift rows per bus, nonnegativity
    let n_rows1 = 1 + 2 * n_bus + n_u;
    let mut a1 = Triplets::new(n_rows1, n_u);
    let mut b1 = vec![0.0; n_rows1];
    for j in 0..n_u {
        a1.push(0, j, -1.0);
    }
    b1[0] = -spec.n1;
    // w_i = mva_base * sum_j H[i, bus_j] (c+_j - c-_j); |w_i| <= L_S P_D_i
    for i in 0..n_bus {
        let up = 1 + 2 * i; // -w_i >= -L_S P_Di
        let lo = 1 + 2 * i + 1; // +w_i >= -L_S P_Di
        let cap = spec.load_shift * case.buses[i].load_p;
        b1[up] = -cap;
        b1[lo] = -cap;
        for (slot, &bus) in u_map.attackable_buses.iter().enumerate() {
            let h = case.mva_base * net.h_matrix.get(i, bus);
            if h != 0.0 {
                a1.push(up, slot, -h);
                a1.push(up, n_c + slot, h);
                a1.push(lo, slot, h);
                a1.push(lo, n_c + slot, -h);
            }
        }
    }
    for j in 0..n_u {
        a1.push(1 + 2 * n_bus + j, j, 1.0); // u_j >= 0
    }

    // second level: split model rows into >= form, then bound rows
    let mut n_rows2 = 0;
    for row in &model.rows {
        n_rows2 += match row.sense {
            Sense::Eq => 2,
            _ => 1,
        };
    }
    for v in &model.vars {
        if v.lower.is_finite() {
            n_rows2 += 1;
        }
        if v.upper.is_finite() {
            n_rows2 += 1;
        }
    }

    let mut a2 = Triplets::new(n_rows2, n_u);
    let mut a3 = Triplets::new(n_rows2, n_v);
    let mut b2 = vec![0.0; n_rows2];
    let mut row_names = Vec::with_capacity(n_rows2);

    let push_model_row = |r: usize,
                          row: &ScedRow,
                          orient: f64,
                          suffix: &str,
                          a2: &mut Triplets,
                          a3: &mut Triplets,
                          b2: &mut [f64],
                          row_names: &mut Vec<String>| {
        for &(j, coef) in &row.terms {
            a3.push(r, j, orient * coef);
        }
        b2[r] = orient * row.rhs;
        if !row.w_coef.is_empty() {
            // the row reads terms.v = rhs + w_coef.w; moving the load-shift
            // term left gives the A2 block: -w_coef . dw/du
            for (slot, &bus) in u_map.attackable_buses.iter().enumerate() {
                let mut dot = 0.0;
                for (i, &wc) in row.w_coef.iter().enumerate() {
                    if wc != 0.0 {
                        dot += wc * net.h_matrix.get(i, bus);
                    }
                }
                let coef = -orient * case.mva_base * dot;
                if coef != 0.0 {
                    a2.push(r, slot, coef);
                    a2.push(r, n_c + slot, -coef);
                }
            }
        }
        row_names.push(format!("{}{suffix}", row.name));
    };

    let mut r = 0;
    for row in &model.rows {
        match row.sense {
            Sense::Eq => {
                push_model_row(r, row, 1.0, "+", &mut a2, &mut a3, &mut b2, &mut row_names);
                r += 1;
                push_model_row(r, row, -1.0, "-", &mut a2, &mut a3, &mut b2, &mut row_names);
                r += 1;
            }
            Sense::Ge => {
                push_model_row(r, row, 1.0, "", &mut a2, &mut a3, &mut b2, &mut row_names);
                r += 1;
            }
            Sense::Le => {
                push_model_row(r, row, -1.0, "", &mut a2, &mut a3, &mut b2, &mut row_names);
                r += 1;
            }
        }
    }
    for (j, v) in model.vars.iter().enumerate() {
        if v.lower.is_finite() {
            a3.push(r, j, 1.0);
            b2[r] = v.lower;
            row_names.push(format!("lb_{}", v.name));
            r += 1;
        }
        if v.upper.is_finite() {
            a3.push(r, j, -1.0);
            b2[r] = -v.upper;
            row_names.push(format!("ub_{}", v.name));
            r += 1;
        }
    }
    debug_assert_eq!(r, n_rows2);

    let d2: Vec<f64> = model.vars.iter().map(|v| v.cost).collect();
    let v_names = model.vars.iter().map(|v| v.name.clone()).collect();

    Ok(BilevelProblem {
        n_u,
        n_v,
        c1,
        d1,
        a1,
        b1,
        a2,
        a3,
        b2,
        d2,
        u_map,
        v_names,
        row_names,
        spec: spec.clone(),
        mva_base: case.mva_base,
        pd_term_mw,
        target_limit_mw: target_limit,
        orientation,
    })
}

/// Second-level outcome at a fixed attack vector.
#[derive(Debug, Clone)]
pub struct FixedUOutcome {
    pub v: Vec<f64>,
    pub d1v: f64,
    pub d2v: f64,
}

/// Solve the dispatch at fixed u, then break dispatch-cost ties
/// optimistically (minimize d1'v over the optimal face). Returns `None`
/// when the dispatch is infeasible under this u.
pub fn evaluate_fixed_u(
    bp: &BilevelProblem,
    u: &[f64],
    tol: &Tolerances,
) -> Result<Option<FixedUOutcome>, AttackError> {
    let rhs = {
        let a2u = bp.a2.apply(u);
        bp.b2
            .iter()
            .zip(a2u.iter())
            .map(|(b, au)| b - au)
            .collect::<Vec<f64>>()
    };
    let a3_rows = bp.a3.to_rows();

    let mut lp1 = LpProblem::new("level2");
    for (j, name) in bp.v_names.iter().enumerate() {
        lp1.add_var(name.clone(), bp.d2[j], f64::NEG_INFINITY, f64::INFINITY);
    }
    for (i, terms) in a3_rows.iter().enumerate() {
        lp1.add_row(format!("r{i}"), Sense::Ge, rhs[i], terms);
    }
    let s1 = solve_lp(&lp1, tol)?;
    match s1.status {
        LpStatus::Infeasible => return Ok(None),
        LpStatus::Unbounded => {
            return Err(AttackError::Sced(ScedError::Inconsistent(
                "second level unbounded at fixed u".into(),
            )))
        }
        LpStatus::Optimal => {}
    }

    let mut lp2 = lp1.clone();
    lp2.name = "level2_tiebreak".into();
    for j in 0..bp.n_v {
        lp2.costs[j] = bp.d1[j];
    }
    let budget = s1.objective + 1e-7 * (1.0 + s1.objective.abs());
    let cost_terms: Vec<(usize, f64)> = (0..bp.n_v)
        .map(|j| (j, bp.d2[j]))
        .filter(|&(_, c)| c != 0.0)
        .collect();
    lp2.add_row("cost_cap", Sense::Le, budget, &cost_terms);
    let s2 = solve_lp(&lp2, tol)?;
    let v = match s2.status {
        LpStatus::Optimal => s2.x,
        // the tie-break cannot fail after lp1 solved; keep the lp1 point
        _ => s1.x,
    };
    let d1v: f64 = bp.d1.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let d2v: f64 = bp.d2.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    Ok(Some(FixedUOutcome { v, d1v, d2v }))
}

/// Result of an oracle run, in both objective conventions.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// J = c1'u + d1'v, the canonical minimization objective.
    pub objective_min: f64,
    /// The attacker's convention: per-unit target flow minus sigma * l1.
    pub attacker_objective: f64,
    pub flow_mw: f64,
}

const ENUM_DIM_LIMIT: usize = 4;

/// Exhaustive grid search over the attacker's box, solving the second level
/// at every A1-feasible point. The best value found is a certified bound on
/// the attacker's optimum at the given resolution.
pub fn enumerate_oracle(
    bp: &BilevelProblem,
    grid_resolution: usize,
) -> Result<OracleResult, AttackError> {
    if bp.n_u > ENUM_DIM_LIMIT {
        return Err(AttackError::DimensionTooLarge(bp.n_u, ENUM_DIM_LIMIT));
    }
    let tol = Tolerances::default();
    let steps = grid_resolution.max(1);
    let mut best: Option<OracleResult> = None;
    let mut point = vec![0usize; bp.n_u];
    loop {
        let u: Vec<f64> = point
            .iter()
            .map(|&s| bp.spec.n1 * s as f64 / steps as f64)
            .collect();
        if bp.u_feasible(&u, 1e-9) {
            if let Some(out) = evaluate_fixed_u(bp, &u, &tol)? {
                let c1u: f64 = bp.c1.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                let j = c1u + out.d1v;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        j < b.objective_min - 1e-12
                            || ((j - b.objective_min).abs() <= 1e-12 && u < b.u)
                    }
                };
                if better {
                    best = Some(OracleResult {
                        flow_mw: bp.flow_mw(&out.v),
                        attacker_objective: bp.attacker_objective(j),
                        objective_min: j,
                        u,
                        v: out.v,
                    });
                }
            }
        }
        // advance the odometer
        let mut k = 0;
        loop {
            if k == bp.n_u {
                return best.ok_or_else(|| {
                    AttackError::BadSpec(
                        "no feasible grid point; dispatch infeasible even at u = 0".into(),
                    )
                });
            }
            point[k] += 1;
            if point[k] <= steps {
                break;
            }
            point[k] = 0;
            k += 1;
        }
    }
}

/// Branch-and-bound over complementarity patterns of the second level's KKT
/// system. Exact for the optimistic bi-level optimum when the multiplier
/// bound is large enough; a bound hit is reported so the caller can double
/// and retry.
pub fn kkt_milp_oracle(bp: &BilevelProblem, big_m: f64) -> Result<OracleResult, AttackError> {
    const NODE_BUDGET: usize = 20_000;
    let tol = Tolerances::default();
    let n_rows2 = bp.b2.len();
    let a1_rows = bp.a1.to_rows();
    let a3_rows = bp.a3.to_rows();
    let a2_rows = bp.a2.to_rows();
    let comp_tol = 1e-6 * (1.0 + bp.b2.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    // per-row fixing: None relaxed, Some(true) slack forced to 0,
    // Some(false) multiplier forced to 0
    #[derive(Clone)]
    struct Node {
        fixing: Vec<Option<bool>>,
    }

    type NodePoint = (f64, Vec<f64>, Vec<f64>, Vec<f64>);
    let solve_node = |node: &Node| -> Result<Option<NodePoint>, AttackError> {
        let mut lp = LpProblem::new("kkt_node");
        for j in 0..bp.n_u {
            lp.add_var(format!("u{j}"), bp.c1[j], 0.0, bp.spec.n1);
        }
        for (j, name) in bp.v_names.iter().enumerate() {
            lp.add_var(
                format!("v_{name}"),
                bp.d1[j],
                f64::NEG_INFINITY,
                f64::INFINITY,
            );
        }
        for i in 0..n_rows2 {
            let ub = if node.fixing[i] == Some(false) {
                0.0
            } else {
                big_m
            };
            lp.add_var(format!("beta{i}"), 0.0, 0.0, ub);
        }
        let iv = bp.n_u;
        let ib = bp.n_u + bp.n_v;
        for (i, terms) in a1_rows.iter().enumerate() {
            lp.add_row(format!("a1_{i}"), Sense::Ge, bp.b1[i], terms);
        }
        for i in 0..n_rows2 {
            let mut terms: Vec<(usize, f64)> = a2_rows[i].clone();
            for &(j, v) in &a3_rows[i] {
                terms.push((iv + j, v));
            }
            let sense = if node.fixing[i] == Some(true) {
                Sense::Eq
            } else {
                Sense::Ge
            };
            lp.add_row(format!("primal_{i}"), sense, bp.b2[i], &terms);
        }
        // dual feasibility A3' beta = d2
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); bp.n_v];
        for &(rr, cc, v) in &bp.a3.entries {
            cols[cc].push((ib + rr, v));
        }
        for (j, col) in cols.iter().enumerate() {
            lp.add_row(format!("dual_{j}"), Sense::Eq, bp.d2[j], col);
        }
        let s = solve_lp(&lp, &tol)?;
        match s.status {
            LpStatus::Optimal => {
                let u = s.x[..bp.n_u].to_vec();
                let v = s.x[iv..iv + bp.n_v].to_vec();
                let beta = s.x[ib..].to_vec();
                Ok(Some((s.objective, u, v, beta)))
            }
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(AttackError::Sced(ScedError::Inconsistent(
                "KKT node LP unbounded".into(),
            ))),
        }
    };

    let mut stack = vec![Node {
        fixing: vec![None; n_rows2],
    }];
    let mut incumbent: Option<NodePoint> = None;
    let mut nodes = 0usize;

    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > NODE_BUDGET {
            return Err(AttackError::NodeBudget(NODE_BUDGET));
        }
        let Some((obj, u, v, beta)) = solve_node(&node)? else {
            continue;
        };
        if let Some((inc, _, _, _)) = &incumbent {
            if obj >= inc - 1e-9 * (1.0 + inc.abs()) {
                continue; // relaxation bound cannot beat the incumbent
            }
        }
        // most-violated complementarity pair
        let a2u = bp.a2.apply(&u);
        let a3v = bp.a3.apply(&v);
        let mut worst = (0usize, 0.0f64);
        for i in 0..n_rows2 {
            let slack = a2u[i] + a3v[i] - bp.b2[i];
            let viol = beta[i] * slack;
            if viol > worst.1 {
                worst = (i, viol);
            }
        }
        if worst.1 <= comp_tol {
            incumbent = Some((obj, u, v, beta));
            continue;
        }
        let mut tight = node.clone();
        tight.fixing[worst.0] = Some(true);
        let mut zeroed = node;
        zeroed.fixing[worst.0] = Some(false);
        stack.push(tight);
        stack.push(zeroed);
    }

    let (obj, u, v, beta) = incumbent.ok_or(AttackError::BigMTooSmall(big_m))?;
    if beta.iter().any(|&b| b >= big_m * (1.0 - 1e-6)) {
        return Err(AttackError::BigMTooSmall(big_m));
    }
    Ok(OracleResult {
        flow_mw: bp.flow_mw(&v),
        attacker_objective: bp.attacker_objective(obj),
        objective_min: obj,
        u,
        v,
    })
}

/// Default multiplier bound for the KKT search.
pub const DEFAULT_BIG_M: f64 = 1e4;

/// KKT oracle with standard big-M hygiene: double and retry (three times)
/// when a multiplier hits the bound.
pub fn kkt_milp_oracle_auto(bp: &BilevelProblem) -> Result<OracleResult, AttackError> {
    let mut big_m = DEFAULT_BIG_M;
    let mut last = AttackError::BigMTooSmall(big_m);
    for _ in 0..4 {
        match kkt_milp_oracle(bp, big_m) {
            Ok(res) => return Ok(res),
            Err(AttackError::BigMTooSmall(m)) => {
                last = AttackError::BigMTooSmall(m);
                big_m *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Entries of c below this per-unit magnitude do not count toward the
/// l0 norm.
pub const C_ZERO_TOL: f64 = 1e-6;

/// A designed attack: the angle vector, its certified consequences, and the
/// solve trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackDesign {
    pub spec: AttackSpec,
    /// Per-unit angle attack vector, full bus order (slack entry zero).
    pub c: Vec<f64>,
    /// Attacker-predicted target flow at the certified dispatch, MW.
    pub predicted_flow_mw: f64,
    /// As a percentage of the applicable active-power limit.
    pub predicted_flow_pct: f64,
    pub l1_norm: f64,
    pub l0_norm: usize,
    /// Canonical-form objective of the certified point.
    pub objective_min: f64,
    pub attacker_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<crate::benders::TraceRecord>,
}

impl AttackDesign {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("attack design serializes")
    }
}

/// Design the worst-case attack for one spec with the Benders engine; the
/// returned point is the best SP-certified pair seen.
pub fn design_attack(
    bp: &BilevelProblem,
    opts: &crate::benders::MbdOptions,
) -> Result<AttackDesign, AttackError> {
    let result = crate::benders::mbd(bp, opts).map_err(|e| match e {
        crate::benders::BendersError::Lp(lp) => AttackError::Lp(lp),
        other => AttackError::Decomposition(other.to_string()),
    })?;
    let c = bp.u_map.c_from_u(&result.u);
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    let l0 = c.iter().filter(|v| v.abs() > C_ZERO_TOL).count();
    let flow = bp.flow_mw(&result.v);
    Ok(AttackDesign {
        spec: bp.spec.clone(),
        c,
        predicted_flow_mw: flow,
        predicted_flow_pct: 100.0 * flow / bp.target_limit_mw,
        l1_norm: l1,
        l0_norm: l0,
        objective_min: result.objective,
        attacker_objective: bp.attacker_objective(result.objective),
        converged: result.converged,
        iterations: result.iterations,
        trace: result.trace,
    })
}
