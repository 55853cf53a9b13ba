//! Linear-program construction and solution with guaranteed primal and dual
//! output.
//!
//! Every optimization in the pipeline (dispatch, the Benders master, both
//! slave problems, the oracle nodes) goes through [`solve_lp`]. Dual values
//! are a hard requirement here: Benders cuts are built from them, so the
//! native solver always reports row duals and reduced costs, and
//! [`check_certificates`] can audit any solution against its problem.

mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// Sparse coefficients as (variable index, value).
    pub terms: Vec<(usize, f64)>,
}

/// A minimization LP over bounded variables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpProblem {
    pub name: String,
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub var_names: Vec<String>,
    pub rows: Vec<Row>,
}

impl LpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        LpProblem {
            name: name.into(),
            costs: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            var_names: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.costs.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.costs.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        terms: &[(usize, f64)],
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            sense,
            rhs,
            terms: terms.to_vec(),
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.var_names.len() != n {
            return Err(LpError::Invalid("variable array lengths differ".into()));
        }
        for (j, c) in self.costs.iter().enumerate() {
            if c.is_nan() || c.is_infinite() {
                return Err(LpError::Invalid(format!(
                    "cost of `{}` is not finite",
                    self.var_names[j]
                )));
            }
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::Invalid(format!(
                    "bound of `{}` is NaN",
                    self.var_names[j]
                )));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::Invalid(format!(
                    "bounds of `{}` cross: [{}, {}]",
                    self.var_names[j], self.lower[j], self.upper[j]
                )));
            }
        }
        for row in &self.rows {
            if row.rhs.is_nan() {
                return Err(LpError::Invalid(format!("rhs of `{}` is NaN", row.name)));
            }
            for &(j, v) in &row.terms {
                if j >= n {
                    return Err(LpError::Invalid(format!(
                        "row `{}` references variable index {} out of {}",
                        row.name, j, n
                    )));
                }
                if v.is_nan() || v.is_infinite() {
                    return Err(LpError::Invalid(format!(
                        "row `{}` has non-finite coefficient",
                        row.name
                    )));
                }
            }
        }
        let mut names: Vec<&str> = self.var_names.iter().map(|s| s.as_str()).collect();
        names.extend(self.rows.iter().map(|r| r.name.as_str()));
        let mut sorted = names.clone();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] && !w[0].is_empty() {
                return Err(LpError::Invalid(format!("duplicate name `{}`", w[0])));
            }
        }
        Ok(())
    }

    /// CPLEX LP text format, as a cross-checking aid for external solvers.
    pub fn to_lp_format(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "\\ {}", self.name);
        let _ = writeln!(out, "Minimize");
        let mut obj = String::from(" obj:");
        for (j, &c) in self.costs.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(obj, " {} {}", signed(c), self.var_names[j]);
            }
        }
        let _ = writeln!(out, "{obj}");
        let _ = writeln!(out, "Subject To");
        for row in &self.rows {
            let mut line = format!(" {}:", sanitize(&row.name));
            for &(j, v) in &row.terms {
                let _ = write!(line, " {} {}", signed(v), self.var_names[j]);
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, "{line} {op} {}", row.rhs);
        }
        let _ = writeln!(out, "Bounds");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let name = &self.var_names[j];
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                let _ = writeln!(out, " {name} free");
            } else if l == u {
                let _ = writeln!(out, " {name} = {l}");
            } else {
                let lo = if l == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    format!("{l}")
                };
                let hi = if u == f64::INFINITY {
                    "+inf".to_string()
                } else {
                    format!("{u}")
                };
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
        }
        let _ = writeln!(out, "End");
        out
    }
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("- {}", -v)
    } else {
        format!("+ {v}")
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values per variable.
    pub x: Vec<f64>,
    /// Row duals, shadow-price convention: dual_i = d(objective)/d(rhs_i).
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Infeasibility certificate (row multipliers), present when status is
    /// infeasible.
    pub farkas: Option<Vec<f64>>,
    /// Unbounded ray over variables, present when status is unbounded.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub feas: f64,
    pub dual: f64,
    pub comp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        // an order tighter than the Benders convergence tolerance, so solver
        // noise cannot masquerade as decomposition progress
        Tolerances {
            feas: 1e-7,
            dual: 1e-7,
            comp: 1e-6,
        }
    }
}

/// Solve a minimization LP with the native bounded-variable revised simplex.
pub fn solve_lp(p: &LpProblem, tol: &Tolerances) -> Result<LpSolution, LpError> {
    p.validate()?;
    simplex::solve(p, tol)
}

/// Residual report for a solved problem.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub max_primal_residual: f64,
    pub max_dual_residual: f64,
    pub max_comp_residual: f64,
    /// |primal objective − dual objective|, where the dual objective folds
    /// reduced costs against the bounds they rest on.
    pub duality_gap: f64,
    pub dual_objective: f64,
}

/// Recompute primal/dual residuals and the duality gap from scratch.
pub fn check_certificates(p: &LpProblem, s: &LpSolution) -> CertificateReport {
    let n = p.num_vars();
    let mut max_primal = 0.0f64;
    for row in &p.rows {
        let ax: f64 = row.terms.iter().map(|&(j, v)| v * s.x[j]).sum();
        let viol = match row.sense {
            Sense::Le => (ax - row.rhs).max(0.0),
            Sense::Ge => (row.rhs - ax).max(0.0),
            Sense::Eq => (ax - row.rhs).abs(),
        };
        max_primal = max_primal.max(viol);
    }
    for j in 0..n {
        max_primal = max_primal.max(p.lower[j] - s.x[j]).max(s.x[j] - p.upper[j]);
    }

    // reduced costs from the reported duals, r = c − Aᵀy
    let mut r = p.costs.clone();
    for (i, row) in p.rows.iter().enumerate() {
        let y = s.duals.get(i).copied().unwrap_or(0.0);
        if y != 0.0 {
            for &(j, v) in &row.terms {
                r[j] -= y * v;
            }
        }
    }

    // dual feasibility: y sign per row sense, r sign per active bound side
    let mut max_dual = 0.0f64;
    for (i, row) in p.rows.iter().enumerate() {
        let y = s.duals.get(i).copied().unwrap_or(0.0);
        match row.sense {
            // min problem: relaxing a <= row cannot increase the optimum
            Sense::Le => max_dual = max_dual.max(y),
            Sense::Ge => max_dual = max_dual.max(-y),
            Sense::Eq => {}
        }
    }
    let mut dual_obj: f64 = p
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| s.duals.get(i).copied().unwrap_or(0.0) * row.rhs)
        .sum();
    for j in 0..n {
        let rj = r[j];
        if rj > 0.0 {
            if p.lower[j].is_finite() {
                dual_obj += rj * p.lower[j];
            } else {
                max_dual = max_dual.max(rj);
            }
        } else if rj < 0.0 {
            if p.upper[j].is_finite() {
                dual_obj += rj * p.upper[j];
            } else {
                max_dual = max_dual.max(-rj);
            }
        }
    }

    // complementary slackness
    let mut max_comp = 0.0f64;
    for (i, row) in p.rows.iter().enumerate() {
        let y = s.duals.get(i).copied().unwrap_or(0.0);
        let ax: f64 = row.terms.iter().map(|&(j, v)| v * s.x[j]).sum();
        if row.sense != Sense::Eq {
            max_comp = max_comp.max((y * (ax - row.rhs)).abs());
        }
    }
    for j in 0..n {
        let dist = (s.x[j] - p.lower[j]).abs().min((s.x[j] - p.upper[j]).abs());
        if dist.is_finite() {
            max_comp = max_comp.max((r[j] * dist).abs());
        }
    }

    let primal_obj: f64 = p.costs.iter().zip(s.x.iter()).map(|(c, x)| c * x).sum();
    CertificateReport {
        max_primal_residual: max_primal,
        max_dual_residual: max_dual,
        max_comp_residual: max_comp,
        duality_gap: (primal_obj - dual_obj).abs(),
        dual_objective: dual_obj,
    }
}
