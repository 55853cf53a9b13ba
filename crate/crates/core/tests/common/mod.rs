//! Test-only oracles, kept independent of the library's solution paths.
//!
//! `tableau_simplex` is a deliberately naive Big-M full-tableau simplex used
//! to cross-check the production revised simplex. It shares no code with
//! `gridsec_core::lp::simplex`: bounds are expanded into rows, free
//! variables are split, and pivoting is pure Bland.

#![allow(dead_code)]

use gridsec_core::lp::{LpProblem, Sense};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

enum VarMap {
    /// x = offset + z[col]
    Shifted { col: usize, offset: f64 },
    /// x = offset - z[col]
    Flipped { col: usize, offset: f64 },
    /// x = z[pos] - z[neg]
    Split { pos: usize, neg: usize },
}

pub fn tableau_simplex(p: &LpProblem) -> OracleOutcome {
    let n = p.num_vars();

    // substitute every variable onto [0, inf)
    let mut maps = Vec::with_capacity(n);
    let mut n_cols = 0usize;
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        let map = if l.is_finite() {
            let m = VarMap::Shifted {
                col: n_cols,
                offset: l,
            };
            n_cols += 1;
            m
        } else if u.is_finite() {
            let m = VarMap::Flipped {
                col: n_cols,
                offset: u,
            };
            n_cols += 1;
            m
        } else {
            let m = VarMap::Split {
                pos: n_cols,
                neg: n_cols + 1,
            };
            n_cols += 2;
            m
        };
        maps.push(map);
    }

    // assemble rows: original rows plus bound rows for two-sided variables
    struct RawRow {
        coef: Vec<f64>,
        sense: Sense,
        rhs: f64,
    }
    let mut raw = Vec::new();
    for row in &p.rows {
        let mut coef = vec![0.0; n_cols];
        let mut rhs = row.rhs;
        for &(j, v) in &row.terms {
            match maps[j] {
                VarMap::Shifted { col, offset } => {
                    coef[col] += v;
                    rhs -= v * offset;
                }
                VarMap::Flipped { col, offset } => {
                    coef[col] -= v;
                    rhs -= v * offset;
                }
                VarMap::Split { pos, neg } => {
                    coef[pos] += v;
                    coef[neg] -= v;
                }
            }
        }
        raw.push(RawRow {
            coef,
            sense: row.sense,
            rhs,
        });
    }
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        if l.is_finite() && u.is_finite() && u > l {
            if let VarMap::Shifted { col, .. } = maps[j] {
                let mut coef = vec![0.0; n_cols];
                coef[col] = 1.0;
                raw.push(RawRow {
                    coef,
                    sense: Sense::Le,
                    rhs: u - l,
                });
            }
        }
    }

    // substituted objective
    let mut cost = vec![0.0; n_cols];
    let mut obj_const = 0.0;
    for j in 0..n {
        let c = p.costs[j];
        match maps[j] {
            VarMap::Shifted { col, offset } => {
                cost[col] += c;
                obj_const += c * offset;
            }
            VarMap::Flipped { col, offset } => {
                cost[col] -= c;
                obj_const += c * offset;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    // standard form with slacks/surplus/artificials, rhs >= 0
    let m = raw.len();
    let mut a: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut artificials = Vec::new();
    let mut total_cols = n_cols;
    // first pass: count extra columns
    for row in &raw {
        let flip = row.rhs < 0.0;
        let sense = if flip {
            match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            }
        } else {
            row.sense
        };
        match sense {
            Sense::Le => total_cols += 1,
            Sense::Ge => total_cols += 2,
            Sense::Eq => total_cols += 1,
        }
    }
    let mut next = n_cols;
    for row in &raw {
        let flip = row.rhs < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        let sense = if flip {
            match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            }
        } else {
            row.sense
        };
        let mut arow = vec![0.0; total_cols];
        for (j, &v) in row.coef.iter().enumerate() {
            arow[j] = sgn * v;
        }
        match sense {
            Sense::Le => {
                arow[next] = 1.0;
                basis.push(next);
                next += 1;
            }
            Sense::Ge => {
                arow[next] = -1.0;
                next += 1;
                arow[next] = 1.0;
                basis.push(next);
                artificials.push(next);
                next += 1;
            }
            Sense::Eq => {
                arow[next] = 1.0;
                basis.push(next);
                artificials.push(next);
                next += 1;
            }
        }
        a.push(arow);
        b.push(sgn * row.rhs);
    }

    // two phases of Bland-rule tableau iterations: drive the artificials
    // out first, then optimize the real costs with artificials barred from
    // re-entering
    enum PhaseEnd {
        Optimal,
        Unbounded,
    }
    let bland = |a: &mut Vec<Vec<f64>>,
                 b: &mut Vec<f64>,
                 basis: &mut Vec<usize>,
                 c: &[f64],
                 barred: &[usize]|
     -> PhaseEnd {
        let limit = 200_000usize;
        for _ in 0..limit {
            let mut reduced = c.to_vec();
            for (i, &bi) in basis.iter().enumerate() {
                let cb = c[bi];
                if cb != 0.0 {
                    for j in 0..reduced.len() {
                        reduced[j] -= cb * a[i][j];
                    }
                }
            }
            let enter = (0..reduced.len()).find(|j| !barred.contains(j) && reduced[*j] < -1e-9);
            let Some(enter) = enter else {
                return PhaseEnd::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..a.len() {
                if a[i][enter] > 1e-9 {
                    let ratio = b[i] / a[i][enter];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12 || (ratio < lr + 1e-12 && basis[i] < basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((li, _)) = leave else {
                return PhaseEnd::Unbounded;
            };
            let piv = a[li][enter];
            for j in 0..a[li].len() {
                a[li][j] /= piv;
            }
            b[li] /= piv;
            for i in 0..a.len() {
                if i != li && a[i][enter].abs() > 1e-14 {
                    let f = a[i][enter];
                    for j in 0..a[i].len() {
                        a[i][j] -= f * a[li][j];
                    }
                    b[i] -= f * b[li];
                }
            }
            basis[li] = enter;
        }
        panic!("tableau oracle exceeded its iteration limit");
    };

    // phase 1: minimize the artificial total
    if !artificials.is_empty() {
        let mut c1 = vec![0.0; total_cols];
        for &j in &artificials {
            c1[j] = 1.0;
        }
        match bland(&mut a, &mut b, &mut basis, &c1, &[]) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
        }
        let infeas: f64 = basis
            .iter()
            .enumerate()
            .filter(|(_, bi)| artificials.contains(bi))
            .map(|(i, _)| b[i])
            .sum();
        if infeas > 1e-6 {
            return OracleOutcome::Infeasible;
        }
    }

    // phase 2: real costs, artificials barred
    let mut c2 = vec![0.0; total_cols];
    c2[..n_cols].copy_from_slice(&cost);
    match bland(&mut a, &mut b, &mut basis, &c2, &artificials) {
        PhaseEnd::Unbounded => OracleOutcome::Unbounded,
        PhaseEnd::Optimal => {
            let mut z = vec![0.0; total_cols];
            for (i, &bi) in basis.iter().enumerate() {
                z[bi] = b[i];
            }
            let mut x = vec![0.0; n];
            for j in 0..n {
                x[j] = match maps[j] {
                    VarMap::Shifted { col, offset } => offset + z[col],
                    VarMap::Flipped { col, offset } => offset - z[col],
                    VarMap::Split { pos, neg } => z[pos] - z[neg],
                };
            }
            let objective = obj_const + cost.iter().zip(z.iter()).map(|(c, v)| c * v).sum::<f64>();
            OracleOutcome::Optimal { objective, x }
        }
    }
}
