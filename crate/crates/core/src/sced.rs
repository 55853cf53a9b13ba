//! Security-constrained economic dispatch: build and solve the defender's
//! cost-minimization LP over generation and spinning reserve, subject to
//! monitored base-case and post-contingency line limits, ramp windows,
//! reserve windows, and generator-outage reserve coverage.
//!
//! The row assembly is shared verbatim with the bi-level attack program:
//! [`build_model`] produces one symbolic description: variables with
//! bounds, rows with a false-load sensitivity vector: and both
//! [`build_sced`] (numeric load shift) and the canonical bi-level assembly
//! (symbolic load shift) instantiate it. That guarantees the attacker's
//! second level and the defender's actual dispatch are the same program.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridCase;
use crate::lp::{solve_lp, LpError, LpProblem, LpSolution, LpStatus, Sense, Tolerances};
use crate::network::DistFactors;
use crate::rtca::SecurityConstraintSet;

#[derive(Debug, Error)]
pub enum ScedError {
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("false load shift does not net to zero: sum = {0:.6e} MW")]
    UnbalancedShift(f64),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// How the post-contingency flow equation composes the false-load term.
///
/// `Augmented` keeps the separate LODF*PTDF^k*Hc term on top of the OTDF term;
/// `Textbook` folds everything through the OTDF row alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtgFlowForm {
    Augmented,
    Textbook,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScedParams {
    /// Look-ahead time for the one-period dispatch, minutes.
    pub t_h_minutes: f64,
    /// Spinning-reserve delivery window, minutes.
    pub t_r_minutes: f64,
    pub ctg_flow_form: CtgFlowForm,
}

impl Default for ScedParams {
    fn default() -> Self {
        ScedParams {
            t_h_minutes: 15.0,
            t_r_minutes: 10.0,
            ctg_flow_form: CtgFlowForm::Augmented,
        }
    }
}

/// One dispatch variable: name, cost, and box bounds.
#[derive(Debug, Clone)]
pub struct ScedVar {
    pub name: String,
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
}

/// One dispatch row. The effective right-hand side is
/// `rhs + w_coef . w` where `w` is the false-load shift in MW per bus
/// (zero vector when there is no attack).
#[derive(Debug, Clone)]
pub struct ScedRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub terms: Vec<(usize, f64)>,
    /// Sensitivity of the rhs to the per-bus false-load shift; empty means
    /// the row does not see the attack.
    pub w_coef: Vec<f64>,
}

/// Variable layout of the dispatch LP.
#[derive(Debug, Clone, Default)]
pub struct ScedLayout {
    pub n_gen: usize,
    /// Variable index of P_G per generator (= generator order).
    pub pg: Vec<usize>,
    /// Variable index of R_G per generator.
    pub rg: Vec<usize>,
    /// (branch index, variable index) per monitored base-case line.
    pub flow_base: Vec<(usize, usize)>,
    /// (branch index, contingency id, variable index) per monitored
    /// post-contingency line.
    pub flow_ctg: Vec<(usize, String, usize)>,
}

/// Symbolic dispatch program shared by the defender LP and the bi-level
/// assembly.
#[derive(Debug, Clone)]
pub struct ScedModel {
    pub vars: Vec<ScedVar>,
    pub rows: Vec<ScedRow>,
    pub layout: ScedLayout,
    /// Loss-adjusted total demand on the balance row, MW.
    pub balance_rhs_mw: f64,
}

/// A dispatch LP ready to solve, with the layout to map the solution back.
#[derive(Debug, Clone)]
pub struct ScedProblem {
    pub lp: LpProblem,
    pub layout: ScedLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScedStatus {
    Optimal,
    /// The constraints admit no dispatch; there is no load-shedding recourse,
    /// so this is surfaced unchanged.
    Infeasible,
}

/// A binding constraint with its multiplier (nonnegative for limits).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BindingEntry {
    pub name: String,
    pub value: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScedSolution {
    pub status: ScedStatus,
    /// Dispatch P_G per generator, MW.
    pub p_g: Vec<f64>,
    /// Spinning reserve R_G per generator, MW.
    pub r_g: Vec<f64>,
    /// Monitored base-case flows: (line id, MW).
    pub flows_base: Vec<(String, f64)>,
    /// Monitored post-contingency flows: (line id, contingency id, MW).
    pub flows_ctg: Vec<(String, String, f64)>,
    pub objective: f64,
    pub binding: Vec<BindingEntry>,
    pub lp_iterations: usize,
}

impl ScedSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sced solution serializes")
    }
}

/// Assemble the symbolic dispatch program.
///
/// Variables: P_G and R_G per generator, one flow variable per monitored
/// base entry and per monitored contingency entry. Flow variables are tied
/// to the dispatch by explicit equality rows (their duals feed the bi-level
/// machinery). Bounds:
///   P_G in [max(P_G0 - M T_h, P_min), min(P_G0 + M T_h, P_max)]
///   R_G in [0, M T_r]
///   flows in [-limit, +limit]
/// Rows: loss-adjusted power balance, the flow-definition equalities,
/// per-generator capacity P_G + R_G <= P_max, and reserve coverage
/// sum(R) >= P_Gg + R_Gg for every g.
pub fn build_model(
    case: &GridCase,
    factors: &DistFactors,
    constraints: &SecurityConstraintSet,
    params: &ScedParams,
) -> Result<ScedModel, ScedError> {
    let n_bus = case.buses.len();
    let n_gen = case.generators.len();
    let gen_bus: Vec<usize> = case
        .generators
        .iter()
        .map(|g| {
            case.bus_index(&g.bus)
                .map_err(|_| ScedError::Inconsistent(format!("generator bus `{}` unknown", g.bus)))
        })
        .collect::<Result<_, _>>()?;

    let mut vars = Vec::new();
    let mut layout = ScedLayout {
        n_gen,
        ..Default::default()
    };

    for g in &case.generators {
        let lo = (g.p0 - g.ramp_rate * params.t_h_minutes).max(g.p_min);
        let hi = (g.p0 + g.ramp_rate * params.t_h_minutes).min(g.p_max);
        layout.pg.push(vars.len());
        vars.push(ScedVar {
            name: format!("pg_{}", g.id),
            cost: g.cost_energy,
            lower: lo,
            upper: hi,
        });
    }
    for g in &case.generators {
        layout.rg.push(vars.len());
        vars.push(ScedVar {
            name: format!("rg_{}", g.id),
            cost: g.cost_reserve,
            lower: 0.0,
            upper: g.ramp_rate * params.t_r_minutes,
        });
    }
    for bc in &constraints.base {
        if bc.line_index >= case.branches.len() || case.branches[bc.line_index].id != bc.line {
            return Err(ScedError::Inconsistent(format!(
                "base constraint references unknown line `{}`",
                bc.line
            )));
        }
        layout.flow_base.push((bc.line_index, vars.len()));
        vars.push(ScedVar {
            name: format!("fb_{}", bc.line),
            cost: 0.0,
            lower: -bc.p_max_mw,
            upper: bc.p_max_mw,
        });
    }
    for cc in &constraints.contingency {
        if cc.line_index >= case.branches.len() || case.branches[cc.line_index].id != cc.line {
            return Err(ScedError::Inconsistent(format!(
                "contingency constraint references unknown line `{}`",
                cc.line
            )));
        }
        if !factors.otdf.contains_key(&cc.contingency) {
            return Err(ScedError::Inconsistent(format!(
                "no distribution factors for contingency `{}`",
                cc.contingency
            )));
        }
        layout
            .flow_ctg
            .push((cc.line_index, cc.contingency.clone(), vars.len()));
        vars.push(ScedVar {
            name: format!("fc_{}@{}", cc.line, cc.contingency),
            cost: 0.0,
            lower: -cc.pk_max_mw,
            upper: cc.pk_max_mw,
        });
    }

    let mut rows = Vec::new();

    // power balance with uniform loss scaling on the load side only
    let balance_rhs = (1.0 + case.loss_fraction) * case.total_load_mw();
    rows.push(ScedRow {
        name: "balance".into(),
        sense: Sense::Eq,
        rhs: balance_rhs,
        terms: layout.pg.iter().map(|&v| (v, 1.0)).collect(),
        w_coef: Vec::new(),
    });

    // base-case flow definitions:
    // fb_m - sum_g PTDF[m, bus(g)] pg_g
    //   = P0[m] - sum_g PTDF[m, bus(g)] P_G0[g] + PTDF[m, .] w
    for (slot, bc) in constraints.base.iter().enumerate() {
        let (m, fvar) = layout.flow_base[slot];
        let mut terms = vec![(fvar, 1.0)];
        let mut rhs = bc.p0_mw;
        for (g, &vg) in layout.pg.iter().enumerate() {
            let coef = factors.ptdf.get(m, gen_bus[g]);
            if coef != 0.0 {
                terms.push((vg, -coef));
                rhs -= coef * case.generators[g].p0;
            }
        }
        let w_coef: Vec<f64> = (0..n_bus).map(|i| factors.ptdf.get(m, i)).collect();
        rows.push(ScedRow {
            name: format!("def_fb_{}", bc.line),
            sense: Sense::Eq,
            rhs,
            terms,
            w_coef,
        });
    }

    // post-contingency flow definitions:
    // fc - sum_g OTDF_k[m, bus(g)] pg_g
    //   = Pk0[m] - sum_g OTDF_k[m, bus(g)] P_G0[g]
    //     + (OTDF_k[m, .] + LODF_k[m] PTDF[k, .]) w      (augmented form)
    // The extra LODF*PTDF^k term carries the false loads' effect on the
    // outaged line itself, which Pk0 cannot see.
    for (slot, cc) in constraints.contingency.iter().enumerate() {
        let (m, _, fvar) = layout.flow_ctg[slot].clone();
        let otdf = &factors.otdf[&cc.contingency];
        let lodf = &factors.lodf[&cc.contingency];
        let k = cc.contingency_index;
        let mut terms = vec![(fvar, 1.0)];
        let mut rhs = cc.pk0_mw;
        for (g, &vg) in layout.pg.iter().enumerate() {
            let coef = otdf.get(m, gen_bus[g]);
            if coef != 0.0 {
                terms.push((vg, -coef));
                rhs -= coef * case.generators[g].p0;
            }
        }
        let w_coef: Vec<f64> = (0..n_bus)
            .map(|i| {
                let base = otdf.get(m, i);
                match params.ctg_flow_form {
                    CtgFlowForm::Augmented => base + lodf[m] * factors.ptdf.get(k, i),
                    CtgFlowForm::Textbook => base,
                }
            })
            .collect();
        rows.push(ScedRow {
            name: format!("def_fc_{}@{}", cc.line, cc.contingency),
            sense: Sense::Eq,
            rhs,
            terms,
            w_coef,
        });
    }

    // generator capacity: P_G + R_G <= P_max
    for (g, gen) in case.generators.iter().enumerate() {
        rows.push(ScedRow {
            name: format!("cap_{}", gen.id),
            sense: Sense::Le,
            rhs: gen.p_max,
            terms: vec![(layout.pg[g], 1.0), (layout.rg[g], 1.0)],
            w_coef: Vec::new(),
        });
    }

    // generator-outage reserve coverage: sum_g' R_g' >= P_Gg + R_Gg, i.e.
    // the other units' reserve covers the lost unit's output
    for (g, gen) in case.generators.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(n_gen);
        for (g2, &vr) in layout.rg.iter().enumerate() {
            if g2 != g {
                terms.push((vr, 1.0));
            }
        }
        terms.push((layout.pg[g], -1.0));
        rows.push(ScedRow {
            name: format!("cover_{}", gen.id),
            sense: Sense::Ge,
            rhs: 0.0,
            terms,
            w_coef: Vec::new(),
        });
    }

    Ok(ScedModel {
        vars,
        rows,
        layout,
        balance_rhs_mw: balance_rhs,
    })
}

/// Instantiate the dispatch LP for a concrete false-load shift (MW per bus,
/// `H c` scaled to MW; all zeros when there is no attack).
pub fn build_sced(
    case: &GridCase,
    factors: &DistFactors,
    constraints: &SecurityConstraintSet,
    false_load_shift: &[f64],
    params: &ScedParams,
) -> Result<ScedProblem, ScedError> {
    let model = build_model(case, factors, constraints, params)?;
    instantiate(case, &model, false_load_shift)
}

/// Turn a symbolic model plus numeric load shift into an LP.
pub fn instantiate(
    case: &GridCase,
    model: &ScedModel,
    false_load_shift: &[f64],
) -> Result<ScedProblem, ScedError> {
    if false_load_shift.len() != case.buses.len() {
        return Err(ScedError::Inconsistent(format!(
            "load shift has {} entries for {} buses",
            false_load_shift.len(),
            case.buses.len()
        )));
    }
    let net: f64 = false_load_shift.iter().sum();
    if net.abs() > 1e-6 * case.total_load_mw().max(1.0) {
        return Err(ScedError::UnbalancedShift(net));
    }

    let mut lp = LpProblem::new("sced");
    for v in &model.vars {
        lp.add_var(v.name.clone(), v.cost, v.lower, v.upper);
    }
    for row in &model.rows {
        let mut rhs = row.rhs;
        for (i, &coef) in row.w_coef.iter().enumerate() {
            rhs += coef * false_load_shift[i];
        }
        lp.add_row(row.name.clone(), row.sense, rhs, &row.terms);
    }
    Ok(ScedProblem {
        lp,
        layout: model.layout.clone(),
    })
}

/// Solve a dispatch LP. Infeasibility is a meaningful outcome (the attack or
/// the constraints left no feasible dispatch) and is returned as a status.
pub fn solve_sced(problem: &ScedProblem, case: &GridCase) -> Result<ScedSolution, ScedError> {
    let sol = solve_lp(&problem.lp, &Tolerances::default())?;
    match sol.status {
        LpStatus::Optimal => Ok(extract_solution(problem, case, &sol)),
        LpStatus::Infeasible => Ok(ScedSolution {
            status: ScedStatus::Infeasible,
            p_g: Vec::new(),
            r_g: Vec::new(),
            flows_base: Vec::new(),
            flows_ctg: Vec::new(),
            objective: f64::NAN,
            binding: Vec::new(),
            lp_iterations: sol.iterations,
        }),
        LpStatus::Unbounded => Err(ScedError::Inconsistent(
            "dispatch LP unbounded; generator costs or bounds are malformed".into(),
        )),
    }
}

fn extract_solution(problem: &ScedProblem, case: &GridCase, sol: &LpSolution) -> ScedSolution {
    let layout = &problem.layout;
    let p_g: Vec<f64> = layout.pg.iter().map(|&v| sol.x[v]).collect();
    let r_g: Vec<f64> = layout.rg.iter().map(|&v| sol.x[v]).collect();
    let flows_base = layout
        .flow_base
        .iter()
        .map(|&(m, v)| (case.branches[m].id.clone(), sol.x[v]))
        .collect();
    let flows_ctg = layout
        .flow_ctg
        .iter()
        .map(|(m, k, v)| (case.branches[*m].id.clone(), k.clone(), sol.x[*v]))
        .collect();

    // binding rows with multipliers in the canonical-sign convention:
    // limits get nonnegative duals regardless of row direction
    let mut binding = Vec::new();
    for (i, row) in problem.lp.rows.iter().enumerate() {
        let ax: f64 = row.terms.iter().map(|&(j, v)| v * sol.x[j]).sum();
        let slack = match row.sense {
            Sense::Le => row.rhs - ax,
            Sense::Ge => ax - row.rhs,
            Sense::Eq => 0.0,
        };
        if slack.abs() < 1e-6 {
            let dual = match row.sense {
                Sense::Le => -sol.duals[i],
                Sense::Ge | Sense::Eq => sol.duals[i],
            };
            binding.push(BindingEntry {
                name: row.name.clone(),
                value: ax,
                dual,
            });
        }
    }
    // flow variables pinned at a limit: report the bound multiplier
    for (slot, &(m, v)) in layout.flow_base.iter().enumerate() {
        let _ = slot;
        let x = sol.x[v];
        let (lo, hi) = (problem.lp.lower[v], problem.lp.upper[v]);
        if (x - hi).abs() < 1e-6 || (x - lo).abs() < 1e-6 {
            binding.push(BindingEntry {
                name: format!("limit_fb_{}", case.branches[m].id),
                value: x,
                dual: sol.reduced_costs[v].abs(),
            });
        }
    }
    for (m, k, v) in &layout.flow_ctg {
        let x = sol.x[*v];
        let (lo, hi) = (problem.lp.lower[*v], problem.lp.upper[*v]);
        if (x - hi).abs() < 1e-6 || (x - lo).abs() < 1e-6 {
            binding.push(BindingEntry {
                name: format!("limit_fc_{}@{}", case.branches[*m].id, k),
                value: x,
                dual: sol.reduced_costs[*v].abs(),
            });
        }
    }

    ScedSolution {
        status: ScedStatus::Optimal,
        p_g,
        r_g,
        flows_base,
        flows_ctg,
        objective: sol.objective,
        binding,
        lp_iterations: sol.iterations,
    }
}
