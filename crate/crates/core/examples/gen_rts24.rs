//! Generator for the bundled 24-bus fixture: builds the case
//! programmatically, drives the dispatch to a screening-consistent fixed
//! point, and emits the frozen JSON with `--emit` (`--sweep` also times a
//! full screening sweep).

use gridsec_core::config::RunConfig;
use gridsec_core::grid::{validate, Branch, Bus, Generator, GridCase};
use gridsec_core::network::{build_dc, compute_factors, dc_power_flow};
use gridsec_core::rtca::{contingency_list, screen, ScreenParams};
use gridsec_core::sced::{build_sced, solve_sced, ScedParams, ScedStatus};
use gridsec_core::sim::{effective_injections, screen_targets};

fn build24(p0: &[f64]) -> GridCase {
    let mut buses = Vec::new();
    let mut branches = Vec::new();

    // backbone: buses t1..t12 at 230 kV in a ring
    let backbone_loads = [
        60.0, 40.0, 0.0, 30.0, 0.0, 50.0, 0.0, 35.0, 0.0, 45.0, 0.0, 25.0,
    ];
    for (i, &load) in backbone_loads.iter().enumerate() {
        buses.push(Bus {
            id: format!("t{}", i + 1),
            base_kv: 230.0,
            load_p: load,
            load_q: 0.12 * load,
            is_slack: i == 0,
        });
    }
    // feeders: buses d1..d12 at 138 kV, each tied to two adjacent backbone
    // nodes so nothing is radial
    let feeder_loads = [
        45.0, 55.0, 35.0, 60.0, 40.0, 50.0, 30.0, 65.0, 42.0, 38.0, 48.0, 52.0,
    ];
    for (i, &load) in feeder_loads.iter().enumerate() {
        buses.push(Bus {
            id: format!("d{}", i + 1),
            base_kv: 138.0,
            load_p: load,
            load_q: 0.15 * load,
            is_slack: false,
        });
    }

    let ring_rating = |i: usize| match i {
        // the two corridor links out of the slack are the weak spots
        0 => 170.0,
        11 => 175.0,
        _ => 320.0,
    };
    for i in 0..12 {
        let j = (i + 1) % 12;
        branches.push(Branch {
            id: format!("R{}-{}", i + 1, j + 1),
            from_bus: format!("t{}", i + 1),
            to_bus: format!("t{}", j + 1),
            reactance_x: 0.05,
            rating_long_s: ring_rating(i),
            rating_short_s: Some(1.15 * ring_rating(i)),
            q_from: 6.0,
            q_to: 5.0,
            q_from_ctg: None,
            q_to_ctg: None,
            in_service: true,
        });
    }
    for i in 0..12 {
        // d1 ties to t2/t12 so the slack bus keeps exactly its two weak
        // corridor links; every other feeder spans adjacent ring nodes
        let (a, b) = if i == 0 {
            (2, 12)
        } else {
            (i + 1, (i + 1) % 12 + 1)
        };
        branches.push(Branch {
            id: format!("F{}a", i + 1),
            from_bus: format!("t{a}"),
            to_bus: format!("d{}", i + 1),
            reactance_x: 0.12,
            rating_long_s: 150.0,
            rating_short_s: Some(172.5),
            q_from: 5.0,
            q_to: 4.0,
            q_from_ctg: None,
            q_to_ctg: None,
            in_service: true,
        });
        branches.push(Branch {
            id: format!("F{}b", i + 1),
            from_bus: format!("t{b}"),
            to_bus: format!("d{}", i + 1),
            reactance_x: 0.15,
            rating_long_s: 150.0,
            rating_short_s: Some(172.5),
            q_from: 5.0,
            q_to: 4.0,
            q_from_ctg: None,
            q_to_ctg: None,
            in_service: true,
        });
    }

    let gens = [
        ("G1", "t1", 600.0, 10.0, 40.0),
        ("G2", "t4", 300.0, 22.0, 30.0),
        ("G3", "t7", 300.0, 28.0, 30.0),
        ("G4", "t10", 300.0, 34.0, 30.0),
        ("G5", "d5", 150.0, 45.0, 20.0),
        ("G6", "d9", 150.0, 50.0, 20.0),
    ];
    let generators = gens
        .iter()
        .enumerate()
        .map(|(i, (id, bus, pmax, cost, ramp))| Generator {
            id: id.to_string(),
            bus: bus.to_string(),
            p_min: 0.0,
            p_max: *pmax,
            p0: p0.get(i).copied().unwrap_or(0.0),
            ramp_rate: *ramp,
            cost_energy: *cost,
            cost_reserve: 0.1 * cost,
        })
        .collect();

    GridCase {
        version: 1,
        mva_base: 100.0,
        loss_fraction: 0.02,
        buses,
        branches,
        generators,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let emit = args.iter().any(|a| a == "--emit");
    let sweep = args.iter().any(|a| a == "--sweep");

    // start from a crude merit-order guess, then iterate to the fixed point
    let total_eff = 1.02
        * (60.0
            + 40.0
            + 30.0
            + 50.0
            + 35.0
            + 45.0
            + 25.0
            + 45.0
            + 55.0
            + 35.0
            + 60.0
            + 40.0
            + 50.0
            + 30.0
            + 65.0
            + 42.0
            + 38.0
            + 48.0
            + 52.0);
    let mut p0 = vec![323.1858241450233, 300.0, 238.7141758549767, 0.0, 0.0, 0.0];
    println!("total effective load: {total_eff}");

    let mut acc: std::collections::BTreeSet<(String, Option<String>)> =
        std::collections::BTreeSet::new();
    for round in 0..60 {
        let case = build24(&p0);
        if round == 0 {
            let diags = validate(&case);
            for d in &diags {
                println!("diag: {d}");
            }
            println!(
                "{} buses, {} branches, {} generators",
                case.buses.len(),
                case.branches.len(),
                case.generators.len()
            );
        }
        let net = build_dc(&case).unwrap();
        let eligible = contingency_list(&case, 100.0);
        if round == 0 {
            println!("eligible contingencies: {}", eligible.len());
        }
        let idx: Vec<usize> = eligible.iter().map(|c| c.branch_index).collect();
        let factors = compute_factors(&net, &case, &idx).unwrap();
        let inj = effective_injections(&case, &p0);
        let flows = dc_power_flow(&net, &inj).unwrap();
        let params = ScreenParams {
            tau: 0.9,
            tau_base: 0.9,
        };
        let (result, cons) = screen(&case, &factors, &flows, &eligible, &params).unwrap();
        // accumulate the union of monitored pairs across rounds so constraint
        // flapping cannot 2-cycle the iteration; anchors refresh every round
        for b in &cons.base {
            acc.insert((b.line.clone(), None));
        }
        for c in &cons.contingency {
            acc.insert((c.line.clone(), Some(c.contingency.clone())));
        }
        let mut union_set = gridsec_core::rtca::SecurityConstraintSet::default();
        for e in &result.entries {
            let key = (e.monitored_line.clone(), e.contingency.clone());
            if !acc.contains(&key) {
                continue;
            }
            let m = case.branch_index(&e.monitored_line).unwrap();
            match &e.contingency {
                None => union_set.base.push(gridsec_core::rtca::BaseConstraint {
                    line: e.monitored_line.clone(),
                    line_index: m,
                    p0_mw: e.flow_mw,
                    p_max_mw: e.limit_mw,
                }),
                Some(k) => union_set
                    .contingency
                    .push(gridsec_core::rtca::CtgConstraint {
                        line: e.monitored_line.clone(),
                        line_index: m,
                        contingency: k.clone(),
                        contingency_index: case.branch_index(k).unwrap(),
                        pk0_mw: e.flow_mw,
                        pk_max_mw: e.limit_mw,
                    }),
            }
        }
        let problem = build_sced(
            &case,
            &factors,
            &union_set,
            &vec![0.0; 24],
            &ScedParams::default(),
        )
        .unwrap();
        let sol = solve_sced(&problem, &case).unwrap();
        if sol.status != ScedStatus::Optimal {
            println!("round {round}: infeasible dispatch");
            return;
        }
        let delta = sol
            .p_g
            .iter()
            .zip(p0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        println!(
            "round {round}: delta {delta:.6e}, violations {}, warnings {}, ctg entries {}, union {}",
            result.violations().count(),
            result.warnings().count(),
            cons.contingency.len(),
            acc.len()
        );
        p0 = sol.p_g.clone();
        if delta < 1e-9 {
            println!("fixed point: {p0:?}");
            for e in result.entries.iter().filter(|e| e.loading >= 0.88) {
                println!(
                    "  screen {} under {}: {:.2}/{:.2} ({:.2}%) {:?}",
                    e.monitored_line,
                    e.contingency.as_deref().unwrap_or("base"),
                    e.flow_mw,
                    e.limit_mw,
                    100.0 * e.loading,
                    e.class
                );
            }
            break;
        }
    }

    let case = build24(&p0);
    if emit {
        std::fs::write("crates/core/fixtures/rts24.json", case.to_json()).unwrap();
        println!("wrote crates/core/fixtures/rts24.json");
    }
    if sweep {
        let mut cfg = RunConfig::default();
        cfg.n1_grid = vec![0.2, 1.0, 2.0];
        cfg.ls_list = vec![0.10];
        let t0 = std::time::Instant::now();
        let sweep = screen_targets(&case, &cfg).unwrap();
        println!("sweep in {:?}", t0.elapsed());
        print!("{}", sweep.to_table_csv());
    }
}
