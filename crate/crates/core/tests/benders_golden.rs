//! Golden trace of the decomposition on the bundled 3-bus case: the alpha
//! sequence from the first certified run, cross-checked against the exact
//! oracle optimum before freezing.

mod common;

use gridsec_core::attack::{build_bilevel, kkt_milp_oracle_auto, AttackSpec, TargetCase};
use gridsec_core::benders::{mbd, CutType, MbdOptions};
use gridsec_core::grid::{load_case, CaseFormat, LoadOptions};
use gridsec_core::network::{build_dc, compute_factors, dc_power_flow};
use gridsec_core::rtca::{contingency_list, screen, ScreenParams};
use gridsec_core::sced::ScedParams;
use gridsec_core::sim::effective_injections;

#[test]
fn three_bus_alpha_trace_matches_golden_recording() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/case3.json");
    let file = std::fs::File::open(path).unwrap();
    let (case, _) = load_case(file, CaseFormat::NativeJson, &LoadOptions::default()).unwrap();
    let net = build_dc(&case).unwrap();
    let eligible = contingency_list(&case, 0.0);
    let idx: Vec<usize> = eligible.iter().map(|c| c.branch_index).collect();
    let factors = compute_factors(&net, &case, &idx).unwrap();
    let inj = effective_injections(&case, &case.p0());
    let flows = dc_power_flow(&net, &inj).unwrap();
    let (_, constraints) =
        screen(&case, &factors, &flows, &eligible, &ScreenParams::default()).unwrap();
    let spec = AttackSpec {
        target_line: "l12".into(),
        target_case: TargetCase::Contingency("l13".into()),
        n1: 0.002,
        load_shift: 0.1,
        sigma: 1e-3,
    };
    let bp = build_bilevel(
        &case,
        &net,
        &factors,
        &constraints,
        &spec,
        &ScedParams::default(),
    )
    .unwrap();
    let result = mbd(&bp, &MbdOptions::default()).unwrap();
    assert!(result.converged);

    // golden recording, certified against the exact oracle when frozen:
    // two optimality cuts; alpha tightens from -1.6 (first master solve)
    // to -1.59 (the optimum of the budget-bound attack)
    let golden_alpha = [-1.6, -1.59];
    let golden_sp = [-1.55, -1.59];
    assert_eq!(result.trace.len(), golden_alpha.len());
    for (rec, (ga, gs)) in result
        .trace
        .iter()
        .zip(golden_alpha.iter().zip(golden_sp.iter()))
    {
        assert_eq!(rec.cut_type, CutType::Optimality);
        assert!(
            (rec.alpha - ga).abs() < 1e-9,
            "iteration {}: alpha {} vs golden {ga}",
            rec.j,
            rec.alpha
        );
        assert!(
            (rec.sp_objective.unwrap() - gs).abs() < 1e-9,
            "iteration {}: sp {} vs golden {gs}",
            rec.j,
            rec.sp_objective.unwrap()
        );
    }
    assert!((result.objective - (-1.589998)).abs() < 1e-9);

    // with unique slave duals no cut repeats
    for i in 0..result.trace.len() {
        for j in (i + 1)..result.trace.len() {
            let (a, b) = (&result.trace[i], &result.trace[j]);
            let same = (a.alpha - b.alpha).abs() < 1e-12
                && a.sp_objective == b.sp_objective
                && a.cut_type == b.cut_type;
            assert!(
                !same,
                "iterations {} and {} produced identical cuts",
                a.j, b.j
            );
        }
    }

    // the frozen values stay tied to the exact optimum, not just history
    let oracle = kkt_milp_oracle_auto(&bp).unwrap();
    assert!(
        (result.objective - oracle.objective_min).abs()
            <= 1e-6 * (1.0 + oracle.objective_min.abs())
    );
}
