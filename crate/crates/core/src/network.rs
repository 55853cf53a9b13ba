//! DC network algebra: bus susceptance matrix, DC power flow, and the
//! PTDF/LODF/OTDF distribution factors that drive contingency screening and
//! the dispatch flow equations.
//!
//! Conventions: the susceptance matrix is per-unit (1/x entries) so a 2-bus
//! line with x = 0.1 gives [[10, -10], [-10, 10]]; injections and flows at
//! the API boundary are MW; angles are radians. Distribution factors are
//! dimensionless with the slack column identically zero.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grid::{Branch, GridCase};
use crate::linalg::{LinalgError, Lu, Mat};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network matrix is singular (disconnected case?): {0}")]
    Singular(#[from] LinalgError),
    #[error("case has no slack bus")]
    NoSlack,
    #[error("branch `{0}` is radial; distribution factors are undefined for its outage")]
    RadialBranch(String),
    #[error("injections must balance to zero, got residual {0:.3e} MW")]
    Unbalanced(f64),
    #[error(
        "reactive flow {q:.3} Mvar exceeds rating {s:.3} MVA on branch `{branch}`; \
         active limit would be imaginary"
    )]
    LimitDomain { branch: String, q: f64, s: f64 },
    #[error("grid error: {0}")]
    Grid(#[from] crate::grid::GridError),
}

/// Which limit of a branch applies: normal operation or post-contingency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Base,
    Contingency,
}

/// DC model of the grid: per-unit bus susceptance matrix plus branch
/// incidence data, with the slack row/column reduction factored once.
#[derive(Debug, Clone)]
pub struct DcNetwork {
    /// Full n_b x n_b per-unit susceptance matrix; every column sums to zero.
    pub h_matrix: Mat,
    pub slack: usize,
    pub mva_base: f64,
    /// (from bus index, to bus index, 1/x) per in-service branch, in case
    /// branch order; out-of-service branches carry susceptance 0.
    pub branch_susceptance: Vec<(usize, usize, f64)>,
    reduced: Lu,
    /// Map full bus index -> reduced index (slack absent).
    reduced_index: Vec<Option<usize>>,
}

/// Bus angles and branch flows for one operating point.
#[derive(Debug, Clone)]
pub struct FlowState {
    /// Radians, slack pinned to zero.
    pub angles: Vec<f64>,
    /// MW per branch, positive from -> to.
    pub flows: Vec<f64>,
}

/// PTDF plus per-contingency LODF columns and OTDF rows.
#[derive(Debug, Clone)]
pub struct DistFactors {
    /// n_branch x n_bus; slack column all zeros.
    pub ptdf: Mat,
    /// Per eligible contingency: LODF column (length n_branch, entry at the
    /// outaged branch = -1).
    pub lodf: BTreeMap<String, Vec<f64>>,
    /// Per eligible contingency: full OTDF matrix (n_branch x n_bus).
    pub otdf: BTreeMap<String, Mat>,
}

impl DistFactors {
    pub fn lodf_for(&self, contingency: &str) -> Result<&Vec<f64>, NetworkError> {
        self.lodf
            .get(contingency)
            .ok_or_else(|| NetworkError::RadialBranch(contingency.to_string()))
    }

    pub fn otdf_for(&self, contingency: &str) -> Result<&Mat, NetworkError> {
        self.otdf
            .get(contingency)
            .ok_or_else(|| NetworkError::RadialBranch(contingency.to_string()))
    }
}

/// Build the DC model and factor the slack-reduced susceptance matrix.
pub fn build_dc(case: &GridCase) -> Result<DcNetwork, NetworkError> {
    let n = case.buses.len();
    let slack = case.slack_index().ok_or(NetworkError::NoSlack)?;

    let mut h = Mat::zeros(n, n);
    let mut branch_susceptance = Vec::with_capacity(case.branches.len());
    for br in &case.branches {
        let i = case.bus_index(&br.from_bus)?;
        let j = case.bus_index(&br.to_bus)?;
        let b = if br.in_service {
            1.0 / br.reactance_x
        } else {
            0.0
        };
        branch_susceptance.push((i, j, b));
        if b != 0.0 {
            h.add_at(i, i, b);
            h.add_at(j, j, b);
            h.add_at(i, j, -b);
            h.add_at(j, i, -b);
        }
    }

    let mut reduced_index = vec![None; n];
    let mut k = 0;
    for (i, slot) in reduced_index.iter_mut().enumerate() {
        if i != slack {
            *slot = Some(k);
            k += 1;
        }
    }
    let mut h_red = Mat::zeros(n - 1, n - 1);
    for r in 0..n {
        let Some(rr) = reduced_index[r] else { continue };
        for c in 0..n {
            if let Some(cc) = reduced_index[c] {
                h_red.set(rr, cc, h.get(r, c));
            }
        }
    }
    let reduced = Lu::factor(&h_red)?;

    Ok(DcNetwork {
        h_matrix: h,
        slack,
        mva_base: case.mva_base,
        branch_susceptance,
        reduced,
        reduced_index,
    })
}

impl DcNetwork {
    pub fn n_bus(&self) -> usize {
        self.h_matrix.rows()
    }

    pub fn n_branch(&self) -> usize {
        self.branch_susceptance.len()
    }

    /// Per-bus MW load shift produced by a per-unit angle vector c:
    /// mva_base * (H c). Columns of H sum to zero, so the shift always nets
    /// to zero: the algebraic root of the attack's unobservability.
    pub fn load_shift_mw(&self, c: &[f64]) -> Vec<f64> {
        let hc = self.h_matrix.matvec(c);
        hc.iter().map(|v| v * self.mva_base).collect()
    }
}

/// Solve the reduced system H_red * theta = p for one MW injection vector.
pub fn dc_power_flow(net: &DcNetwork, injections_mw: &[f64]) -> Result<FlowState, NetworkError> {
    let n = net.n_bus();
    assert_eq!(injections_mw.len(), n);
    let residual: f64 = injections_mw.iter().sum();
    let scale = injections_mw.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    if residual.abs() > 1e-6 * scale {
        return Err(NetworkError::Unbalanced(residual));
    }

    let mut rhs = vec![0.0; n - 1];
    for (i, &p) in injections_mw.iter().enumerate() {
        if let Some(r) = net.reduced_index[i] {
            rhs[r] = p / net.mva_base;
        }
    }
    let theta_red = net.reduced.solve(&rhs);
    let mut angles = vec![0.0; n];
    for (i, slot) in net.reduced_index.iter().enumerate() {
        if let Some(r) = *slot {
            angles[i] = theta_red[r];
        }
    }
    let flows = branch_flows_mw(net, &angles);
    Ok(FlowState { angles, flows })
}

fn branch_flows_mw(net: &DcNetwork, angles: &[f64]) -> Vec<f64> {
    net.branch_susceptance
        .iter()
        .map(|&(i, j, b)| net.mva_base * b * (angles[i] - angles[j]))
        .collect()
}

/// Sensitivity of each branch flow to a 1 MW injection at each bus,
/// withdrawn at the slack.
pub fn compute_ptdf(net: &DcNetwork) -> Mat {
    let n = net.n_bus();
    let nb = net.n_branch();
    // X = H_red^-1 lifted back to full bus indexing (slack row/col zero)
    let inv = net.reduced.inverse();
    let mut x_full = Mat::zeros(n, n);
    for r in 0..n {
        let Some(rr) = net.reduced_index[r] else {
            continue;
        };
        for c in 0..n {
            if let Some(cc) = net.reduced_index[c] {
                x_full.set(r, c, inv.get(rr, cc));
            }
        }
    }
    let mut ptdf = Mat::zeros(nb, n);
    for (bi, &(i, j, b)) in net.branch_susceptance.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for k in 0..n {
            ptdf.set(bi, k, b * (x_full.get(i, k) - x_full.get(j, k)));
        }
    }
    ptdf
}

/// Threshold on |1 - ptdf across the outaged branch| below which the outage
/// is treated as radial (islanding) and rejected.
pub const RADIAL_DENOM_TOL: f64 = 1e-9;

/// Line outage distribution factors for the outage of branch `k`:
/// post-outage flow on m = pre-outage flow on m + `LODF_k[m]` * pre-outage
/// flow on k. Entry k is -1 by definition.
pub fn compute_lodf(ptdf: &Mat, case: &GridCase, k: usize) -> Result<Vec<f64>, NetworkError> {
    let br = &case.branches[k];
    let from = case.bus_index(&br.from_bus)?;
    let to = case.bus_index(&br.to_bus)?;
    let self_transfer = ptdf.get(k, from) - ptdf.get(k, to);
    let denom = 1.0 - self_transfer;
    if denom.abs() < RADIAL_DENOM_TOL {
        return Err(NetworkError::RadialBranch(br.id.clone()));
    }
    let nb = ptdf.rows();
    let mut lodf = Vec::with_capacity(nb);
    for m in 0..nb {
        lodf.push((ptdf.get(m, from) - ptdf.get(m, to)) / denom);
    }
    lodf[k] = -1.0;
    Ok(lodf)
}

/// Post-outage injection-to-flow sensitivities:
/// `OTDF_k[m, .] = PTDF[m, .] + LODF_k[m] * PTDF[k, .]`.
pub fn compute_otdf(ptdf: &Mat, lodf_k: &[f64], k: usize) -> Mat {
    let nb = ptdf.rows();
    let n = ptdf.cols();
    let mut otdf = Mat::zeros(nb, n);
    for m in 0..nb {
        let lm = lodf_k[m];
        for c in 0..n {
            otdf.set(m, c, ptdf.get(m, c) + lm * ptdf.get(k, c));
        }
    }
    otdf
}

/// Compute PTDF plus LODF/OTDF for every contingency in `contingencies`
/// (branch indices). Factors for distinct outages are independent, so this
/// is a natural place to parallelize; kept sequential here since desk-scale
/// cases factor in microseconds.
pub fn compute_factors(
    net: &DcNetwork,
    case: &GridCase,
    contingencies: &[usize],
) -> Result<DistFactors, NetworkError> {
    let ptdf = compute_ptdf(net);
    let mut lodf = BTreeMap::new();
    let mut otdf = BTreeMap::new();
    for &k in contingencies {
        let col = compute_lodf(&ptdf, case, k)?;
        let mat = compute_otdf(&ptdf, &col, k);
        let id = case.branches[k].id.clone();
        lodf.insert(id.clone(), col);
        otdf.insert(id, mat);
    }
    Ok(DistFactors { ptdf, lodf, otdf })
}

/// Active-power limit from the MVA rating and the worst reactive flow:
/// sqrt(S^2 - max(|Q_from|, |Q_to|)^2) for the applicable rating kind.
pub fn active_limits(branch: &Branch, kind: LimitKind) -> Result<f64, NetworkError> {
    let (s, q) = match kind {
        LimitKind::Base => (
            branch.rating_long_s,
            branch.q_from.abs().max(branch.q_to.abs()),
        ),
        LimitKind::Contingency => (
            branch.short_term_rating(),
            branch
                .q_from_contingency()
                .abs()
                .max(branch.q_to_contingency().abs()),
        ),
    };
    if q > s {
        return Err(NetworkError::LimitDomain {
            branch: branch.id.clone(),
            q,
            s,
        });
    }
    Ok((s * s - q * q).sqrt())
}

/// CSV dump of a distribution-factor matrix with branch/bus id headers.
pub fn factors_to_csv(case: &GridCase, m: &Mat) -> String {
    use std::fmt::Write;
    let mut out = String::from("branch");
    for bus in &case.buses {
        let _ = write!(out, ",{}", bus.id);
    }
    out.push('\n');
    for (bi, br) in case.branches.iter().enumerate() {
        let _ = write!(out, "{}", br.id);
        for c in 0..m.cols() {
            let _ = write!(out, ",{}", m.get(bi, c));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Generator, GridCase};

    fn bus(id: &str, load: f64, slack: bool) -> Bus {
        Bus {
            id: id.into(),
            base_kv: 138.0,
            load_p: load,
            load_q: 0.0,
            is_slack: slack,
        }
    }

    fn branch(id: &str, from: &str, to: &str, x: f64) -> Branch {
        Branch {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            reactance_x: x,
            rating_long_s: 100.0,
            rating_short_s: Some(115.0),
            q_from: 0.0,
            q_to: 0.0,
            q_from_ctg: None,
            q_to_ctg: None,
            in_service: true,
        }
    }

    fn gen(id: &str, bus: &str) -> Generator {
        Generator {
            id: id.into(),
            bus: bus.into(),
            p_min: 0.0,
            p_max: 500.0,
            p0: 0.0,
            ramp_rate: 10.0,
            cost_energy: 10.0,
            cost_reserve: 1.0,
        }
    }

    fn two_bus() -> GridCase {
        GridCase {
            version: 1,
            mva_base: 100.0,
            loss_fraction: 0.0,
            buses: vec![bus("b1", 0.0, false), bus("b2", 100.0, true)],
            branches: vec![branch("l1", "b1", "b2", 0.1)],
            generators: vec![gen("g1", "b1")],
        }
    }

    fn triangle() -> GridCase {
        GridCase {
            version: 1,
            mva_base: 100.0,
            loss_fraction: 0.0,
            buses: vec![
                bus("b1", 0.0, false),
                bus("b2", 0.0, false),
                bus("b3", 50.0, true),
            ],
            branches: vec![
                branch("l12", "b1", "b2", 0.1),
                branch("l23", "b2", "b3", 0.1),
                branch("l13", "b1", "b3", 0.1),
            ],
            generators: vec![gen("g1", "b1")],
        }
    }

    #[test]
    fn two_bus_h_matrix() {
        let net = build_dc(&two_bus()).unwrap();
        assert!((net.h_matrix.get(0, 0) - 10.0).abs() < 1e-12);
        assert!((net.h_matrix.get(0, 1) + 10.0).abs() < 1e-12);
        assert!((net.h_matrix.get(1, 0) + 10.0).abs() < 1e-12);
        assert!((net.h_matrix.get(1, 1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn h_columns_sum_to_zero() {
        let net = build_dc(&triangle()).unwrap();
        for c in 0..3 {
            let sum: f64 = (0..3).map(|r| net.h_matrix.get(r, c)).sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn two_bus_flow_conservation() {
        let net = build_dc(&two_bus()).unwrap();
        let state = dc_power_flow(&net, &[100.0, -100.0]).unwrap();
        assert!((state.flows[0] - 100.0).abs() < 1e-9);
        assert_eq!(state.angles[1], 0.0); // slack
    }

    #[test]
    fn zero_injection_zero_flow() {
        let net = build_dc(&triangle()).unwrap();
        let state = dc_power_flow(&net, &[0.0, 0.0, 0.0]).unwrap();
        assert!(state.flows.iter().all(|f| f.abs() < 1e-12));
    }

    #[test]
    fn unbalanced_injection_rejected() {
        let net = build_dc(&two_bus()).unwrap();
        assert!(matches!(
            dc_power_flow(&net, &[100.0, -50.0]),
            Err(NetworkError::Unbalanced(_))
        ));
    }

    #[test]
    fn two_bus_ptdf_column_is_one() {
        let net = build_dc(&two_bus()).unwrap();
        let ptdf = compute_ptdf(&net);
        assert!((ptdf.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(ptdf.get(0, 1), 0.0); // slack column
    }

    #[test]
    fn triangle_ptdf_splits_two_thirds() {
        // equal reactances, inject at b1, withdraw at slack b3:
        // direct path l13 carries 2/3, the two-hop path 1/3
        let net = build_dc(&triangle()).unwrap();
        let ptdf = compute_ptdf(&net);
        assert!((ptdf.get(2, 0) - 2.0 / 3.0).abs() < 1e-12); // l13
        assert!((ptdf.get(0, 0) - 1.0 / 3.0).abs() < 1e-12); // l12
        assert!((ptdf.get(1, 0) - 1.0 / 3.0).abs() < 1e-12); // l23
    }

    #[test]
    fn lodf_self_is_minus_one_and_radial_rejected() {
        let tri = triangle();
        let net = build_dc(&tri).unwrap();
        let ptdf = compute_ptdf(&net);
        for k in 0..3 {
            let lodf = compute_lodf(&ptdf, &tri, k).unwrap();
            assert_eq!(lodf[k], -1.0);
        }
        let two = two_bus();
        let net2 = build_dc(&two).unwrap();
        let ptdf2 = compute_ptdf(&net2);
        assert!(matches!(
            compute_lodf(&ptdf2, &two, 0),
            Err(NetworkError::RadialBranch(_))
        ));
    }

    #[test]
    fn parallel_twin_takes_all_flow() {
        let mut case = two_bus();
        case.branches.push(branch("l1b", "b1", "b2", 0.1));
        let net = build_dc(&case).unwrap();
        let ptdf = compute_ptdf(&net);
        let lodf = compute_lodf(&ptdf, &case, 0).unwrap();
        assert!(
            (lodf[1] - 1.0).abs() < 1e-12,
            "twin gets +1, got {}",
            lodf[1]
        );
    }

    #[test]
    fn otdf_outaged_row_is_zero() {
        let tri = triangle();
        let net = build_dc(&tri).unwrap();
        let ptdf = compute_ptdf(&net);
        let lodf = compute_lodf(&ptdf, &tri, 1).unwrap();
        let otdf = compute_otdf(&ptdf, &lodf, 1);
        for c in 0..3 {
            assert!(otdf.get(1, c).abs() < 1e-12);
        }
    }

    #[test]
    fn active_limit_345_triangle() {
        let mut br = branch("l", "a", "b", 0.1);
        br.rating_long_s = 100.0;
        br.q_from = 60.0;
        br.q_to = 0.0;
        let p = active_limits(&br, LimitKind::Base).unwrap();
        assert!((p - 80.0).abs() < 1e-12);
    }

    #[test]
    fn active_limit_no_reactive_equals_rating() {
        let br = branch("l", "a", "b", 0.1);
        assert_eq!(active_limits(&br, LimitKind::Base).unwrap(), 100.0);
    }

    #[test]
    fn active_limit_domain_error() {
        let mut br = branch("l", "a", "b", 0.1);
        br.q_from = 101.0;
        assert!(matches!(
            active_limits(&br, LimitKind::Base),
            Err(NetworkError::LimitDomain { .. })
        ));
    }

    #[test]
    fn load_shift_nets_to_zero() {
        let net = build_dc(&triangle()).unwrap();
        let shift = net.load_shift_mw(&[0.03, -0.01, 0.0]);
        let total: f64 = shift.iter().sum();
        assert!(total.abs() < 1e-9);
    }
}
