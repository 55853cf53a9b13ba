//! Bounded-variable two-phase revised simplex with an explicit basis inverse.
//!
//! Rows are augmented with one logical variable each (`<=` rows get a
//! nonnegative logical, `>=` a nonpositive one, `=` a fixed one), giving the
//! computational form `min c'x  s.t. [A I][x;s] = b, l <= [x;s] <= u`.
//! Phase 1 minimizes the total bound violation of the basic variables;
//! phase 2 runs the same machinery on the real costs. Dantzig pricing with
//! index tie-breaks, switching to Bland's rule under degeneracy so the path
//! is finite and fully deterministic.

use super::{LpError, LpProblem, LpSolution, LpStatus, Sense, Tolerances};
use crate::linalg::{Lu, Mat};

const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-9;
const DEGEN_STEP_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 64;
const BLAND_TRIGGER: usize = 40;

#[derive(Clone, Copy, PartialEq, Debug)]
enum VStat {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic with both bounds infinite; rests at zero.
    Free,
}

enum PhaseOutcome {
    Done,
    Infeasible { farkas: Vec<f64> },
    Unbounded { ray: Vec<f64> },
}

struct Core {
    m: usize,
    n_struct: usize,
    n_total: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    b: Vec<f64>,
    vstat: Vec<VStat>,
    basic: Vec<usize>,
    binv: Mat,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    degen_streak: usize,
    bland: bool,
    feas: f64,
    dual_tol: f64,
    iter_limit: usize,
}

pub(super) fn solve(p: &LpProblem, tol: &Tolerances) -> Result<LpSolution, LpError> {
    let mut core = Core::new(p, tol);
    core.refactor()?;

    // phase 1, with a couple of retries in case phase 2 drifts out of bounds
    for round in 0..3 {
        match core.iterate(1)? {
            PhaseOutcome::Done => {}
            PhaseOutcome::Infeasible { farkas } => {
                return Ok(core.extract(p, LpStatus::Infeasible, Some(farkas), None));
            }
            PhaseOutcome::Unbounded { .. } => {
                return Err(LpError::Numerical(
                    "phase-1 objective reported unbounded".into(),
                ));
            }
        }
        match core.iterate(2)? {
            PhaseOutcome::Done => {}
            PhaseOutcome::Unbounded { ray } => {
                return Ok(core.extract(p, LpStatus::Unbounded, None, Some(ray)));
            }
            PhaseOutcome::Infeasible { .. } => unreachable!("phase 2 cannot report infeasible"),
        }
        core.refactor()?;
        if core.infeasibility() <= 10.0 * core.feas {
            return Ok(core.extract(p, LpStatus::Optimal, None, None));
        }
        log::debug!(
            "lp `{}`: residual infeasibility {:.3e} after phase 2 round {round}, repeating phase 1",
            p.name,
            core.infeasibility()
        );
    }
    Err(LpError::Numerical(format!(
        "could not reach a clean optimal basis for `{}`",
        p.name
    )))
}

impl Core {
    fn new(p: &LpProblem, tol: &Tolerances) -> Core {
        let m = p.num_rows();
        let n_struct = p.num_vars();
        let n_total = n_struct + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_total];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, v) in &row.terms {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
            cols[n_struct + i].push((i, 1.0));
        }

        let mut cost = vec![0.0; n_total];
        cost[..n_struct].copy_from_slice(&p.costs);
        let mut lb = vec![0.0; n_total];
        let mut ub = vec![0.0; n_total];
        lb[..n_struct].copy_from_slice(&p.lower);
        ub[..n_struct].copy_from_slice(&p.upper);
        for (i, row) in p.rows.iter().enumerate() {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lb[n_struct + i] = l;
            ub[n_struct + i] = u;
        }
        let b: Vec<f64> = p.rows.iter().map(|r| r.rhs).collect();

        let mut vstat = vec![VStat::Free; n_total];
        let mut basic = Vec::with_capacity(m);
        for (j, stat) in vstat.iter_mut().enumerate().take(n_struct) {
            *stat = if lb[j].is_finite() {
                VStat::AtLower
            } else if ub[j].is_finite() {
                VStat::AtUpper
            } else {
                VStat::Free
            };
        }
        for i in 0..m {
            vstat[n_struct + i] = VStat::Basic(i);
            basic.push(n_struct + i);
        }

        let iter_limit = 200 * (m + n_total) + 2000;
        Core {
            m,
            n_struct,
            n_total,
            cols,
            cost,
            lb,
            ub,
            b,
            vstat,
            basic,
            binv: Mat::identity(m),
            xb: vec![0.0; m],
            pivots_since_refactor: 0,
            iterations: 0,
            degen_streak: 0,
            bland: false,
            feas: tol.feas,
            dual_tol: tol.dual,
            iter_limit,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.vstat[j] {
            VStat::AtLower => self.lb[j],
            VStat::AtUpper => self.ub[j],
            VStat::Free => 0.0,
            VStat::Basic(_) => unreachable!("basic variable has no resting value"),
        }
    }

    fn compute_xb(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n_total {
            if matches!(self.vstat[j], VStat::Basic(_)) {
                continue;
            }
            let val = self.nonbasic_value(j);
            if val != 0.0 {
                for &(r, v) in &self.cols[j] {
                    rhs[r] -= v * val;
                }
            }
        }
        self.xb = self.binv.matvec(&rhs);
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        if self.m > 0 {
            let mut bmat = Mat::zeros(self.m, self.m);
            for (pos, &j) in self.basic.iter().enumerate() {
                for &(r, v) in &self.cols[j] {
                    bmat.set(r, pos, v);
                }
            }
            let lu = Lu::factor(&bmat)
                .map_err(|e| LpError::Numerical(format!("basis factorization failed: {e}")))?;
            self.binv = lu.inverse();
        }
        self.compute_xb();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (pos, &j) in self.basic.iter().enumerate() {
            let v = self.xb[pos];
            total += (self.lb[j] - v).max(0.0) + (v - self.ub[j]).max(0.0);
        }
        total
    }

    /// Phase costs on the basic variables; phase 1 prices bound violations.
    fn basic_costs(&self, phase: u8) -> Vec<f64> {
        let mut cb = vec![0.0; self.m];
        for (pos, &j) in self.basic.iter().enumerate() {
            cb[pos] = if phase == 1 {
                let v = self.xb[pos];
                if v < self.lb[j] - self.feas {
                    -1.0
                } else if v > self.ub[j] + self.feas {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost[j]
            };
        }
        cb
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase: u8) -> f64 {
        let cj = if phase == 1 { 0.0 } else { self.cost[j] };
        let mut dot = 0.0;
        for &(r, v) in &self.cols[j] {
            dot += y[r] * v;
        }
        cj - dot
    }

    fn iterate(&mut self, phase: u8) -> Result<PhaseOutcome, LpError> {
        loop {
            self.iterations += 1;
            if self.iterations > self.iter_limit {
                return Err(LpError::Numerical(format!(
                    "iteration limit {} exceeded",
                    self.iter_limit
                )));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }

            if phase == 1 && self.infeasibility() <= self.feas * (1.0 + self.m as f64).sqrt() {
                return Ok(PhaseOutcome::Done);
            }

            let cb = self.basic_costs(phase);
            let y = self.binv.matvec_transpose(&cb);

            // pricing
            let mut chosen: Option<(f64, usize, f64)> = None; // (score, var, dir)
            for j in 0..self.n_total {
                if matches!(self.vstat[j], VStat::Basic(_)) {
                    continue;
                }
                if self.lb[j] == self.ub[j] {
                    continue; // fixed, cannot move
                }
                let r = self.reduced_cost(j, &y, phase);
                let dir = match self.vstat[j] {
                    VStat::AtLower if r < -self.dual_tol => 1.0,
                    VStat::AtUpper if r > self.dual_tol => -1.0,
                    VStat::Free if r.abs() > self.dual_tol => {
                        if r < 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    _ => continue,
                };
                if self.bland {
                    chosen = Some((r.abs(), j, dir));
                    break;
                }
                match chosen {
                    Some((best, _, _)) if best >= r.abs() => {}
                    _ => chosen = Some((r.abs(), j, dir)),
                }
            }

            let Some((_, enter, dir)) = chosen else {
                if phase == 1 && self.infeasibility() > self.feas * (1.0 + self.m as f64).sqrt() {
                    return Ok(PhaseOutcome::Infeasible { farkas: y });
                }
                return Ok(PhaseOutcome::Done);
            };

            // direction through the basis
            let mut alpha = vec![0.0; self.m];
            for &(r, v) in &self.cols[enter] {
                if v != 0.0 {
                    for i in 0..self.m {
                        alpha[i] += self.binv.get(i, r) * v;
                    }
                }
            }

            // ratio test
            let own_range = self.ub[enter] - self.lb[enter];
            let mut t_best = if own_range.is_finite() {
                own_range
            } else {
                f64::INFINITY
            };
            let mut leaving: Option<(usize, f64, f64)> = None; // (pos, target, |pivot|)
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let delta = -dir * a;
                let jb = self.basic[i];
                let (v, lo, hi) = (self.xb[i], self.lb[jb], self.ub[jb]);
                let target = if delta > 0.0 {
                    if v < lo - self.feas {
                        Some(lo)
                    } else if v > hi + self.feas {
                        None // already past the upper bound, nothing above blocks
                    } else if hi.is_finite() {
                        Some(hi)
                    } else {
                        None
                    }
                } else if v > hi + self.feas {
                    Some(hi)
                } else if v < lo - self.feas {
                    None
                } else if lo.is_finite() {
                    Some(lo)
                } else {
                    None
                };
                let Some(target) = target else { continue };
                let t = ((target - v) / delta).max(0.0);
                let take = if t < t_best - RATIO_TIE_TOL {
                    true
                } else if t <= t_best + RATIO_TIE_TOL {
                    match leaving {
                        None => t < t_best, // prefer a true pivot only if strictly better than a bound flip
                        Some((pos, _, piv)) => {
                            if self.bland {
                                self.basic[i] < self.basic[pos]
                            } else {
                                a.abs() > piv + RATIO_TIE_TOL
                                    || (a.abs() >= piv - RATIO_TIE_TOL
                                        && self.basic[i] < self.basic[pos])
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    t_best = t.min(t_best);
                    leaving = Some((i, target, a.abs()));
                }
            }

            if !t_best.is_finite() {
                if phase == 1 {
                    return Err(LpError::Numerical(
                        "phase-1 ratio test found no blocking bound".into(),
                    ));
                }
                // assemble the improving ray over all variables
                let mut ray = vec![0.0; self.n_total];
                ray[enter] = dir;
                for (i, &a) in alpha.iter().enumerate() {
                    if a.abs() > PIVOT_TOL {
                        ray[self.basic[i]] = -dir * a;
                    }
                }
                return Ok(PhaseOutcome::Unbounded { ray });
            }

            // degeneracy bookkeeping: long runs of zero-length steps switch
            // pricing to Bland's rule until progress resumes
            if t_best <= DEGEN_STEP_TOL {
                self.degen_streak += 1;
                if self.degen_streak > BLAND_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degen_streak = 0;
                self.bland = false;
            }

            let enter_val = if matches!(self.vstat[enter], VStat::Free) {
                dir * t_best
            } else {
                self.nonbasic_value(enter) + dir * t_best
            };

            match leaving {
                Some((p_pos, target, _))
                    if t_best < own_range - RATIO_TIE_TOL || !own_range.is_finite() =>
                {
                    // basis change
                    for (i, &a) in alpha.iter().enumerate() {
                        if i != p_pos {
                            self.xb[i] -= dir * a * t_best;
                        }
                    }
                    let leave_var = self.basic[p_pos];
                    // fixed variables park at their (single) lower bound
                    self.vstat[leave_var] = if target == self.lb[leave_var] {
                        VStat::AtLower
                    } else {
                        VStat::AtUpper
                    };
                    self.vstat[enter] = VStat::Basic(p_pos);
                    self.basic[p_pos] = enter;
                    self.xb[p_pos] = enter_val;

                    // eta update of the explicit inverse
                    let piv = alpha[p_pos];
                    let prow: Vec<f64> = self.binv.row(p_pos).iter().map(|v| v / piv).collect();
                    for i in 0..self.m {
                        if i == p_pos {
                            continue;
                        }
                        let f = alpha[i];
                        if f != 0.0 {
                            let row = self.binv.row_mut(i);
                            for (c, pv) in row.iter_mut().zip(prow.iter()) {
                                *c -= f * pv;
                            }
                        }
                    }
                    self.binv.row_mut(p_pos).copy_from_slice(&prow);
                    self.pivots_since_refactor += 1;
                }
                _ => {
                    // bound flip: entering variable runs to its other bound
                    for (i, &a) in alpha.iter().enumerate() {
                        self.xb[i] -= dir * a * t_best;
                    }
                    self.vstat[enter] = match self.vstat[enter] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        other => other,
                    };
                }
            }
        }
    }

    fn extract(
        &mut self,
        _p: &LpProblem,
        status: LpStatus,
        farkas: Option<Vec<f64>>,
        ray: Option<Vec<f64>>,
    ) -> LpSolution {
        let mut x = vec![0.0; self.n_total];
        for j in 0..self.n_total {
            x[j] = match self.vstat[j] {
                VStat::Basic(pos) => self.xb[pos],
                _ => self.nonbasic_value(j),
            };
        }
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => (0..self.n_struct).map(|j| self.cost[j] * x[j]).sum(),
        };
        let (duals, reduced) = if status == LpStatus::Optimal {
            let cb = self.basic_costs(2);
            let y = self.binv.matvec_transpose(&cb);
            let mut r = vec![0.0; self.n_struct];
            for (j, rj) in r.iter_mut().enumerate() {
                *rj = self.reduced_cost(j, &y, 2);
            }
            (y, r)
        } else {
            (vec![0.0; self.m], vec![0.0; self.n_struct])
        };
        LpSolution {
            status,
            x: x[..self.n_struct].to_vec(),
            duals,
            reduced_costs: reduced,
            objective,
            farkas,
            ray: ray.map(|r| r[..self.n_struct].to_vec()),
            iterations: self.iterations,
        }
    }
}
