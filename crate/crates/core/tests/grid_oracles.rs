//! Grid-model checks against independent oracles: the bundled 5-bus fixture
//! field by field, bridge detection against exhaustive remove-and-check,
//! and serialization round-trips on generated cases.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use gridsec_core::grid::{
    load_case, radial_branches, validate, Branch, Bus, CaseFormat, Generator, GridCase, LoadOptions,
};

fn fixture(name: &str) -> GridCase {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let file = std::fs::File::open(&path).unwrap();
    load_case(file, CaseFormat::NativeJson, &LoadOptions::default())
        .unwrap()
        .0
}

#[test]
fn five_bus_fixture_field_by_field() {
    let case = fixture("case5.json");
    assert_eq!(case.buses.len(), 5);
    assert_eq!(case.branches.len(), 6);
    assert_eq!(case.generators.len(), 3);
    assert_eq!(case.mva_base, 100.0);
    assert_eq!(case.loss_fraction, 0.02);

    let b = |id: &str| case.buses.iter().find(|b| b.id == id).unwrap();
    assert!(b("b1").is_slack);
    assert_eq!(b("b1").load_p, 40.0);
    assert_eq!(b("b2").load_p, 150.0);
    assert_eq!(b("b3").load_p, 100.0);
    assert_eq!(b("b4").load_p, 60.0);
    assert_eq!(b("b5").load_p, 40.0);
    for bus in &case.buses {
        assert_eq!(bus.base_kv, 138.0);
    }

    let br = |id: &str| case.branches.iter().find(|b| b.id == id).unwrap();
    assert_eq!(br("L1").reactance_x, 0.08);
    assert_eq!(br("L1").rating_long_s, 160.0);
    assert_eq!(br("L1").rating_short_s, Some(184.0));
    assert_eq!(br("L4").rating_long_s, 200.0);
    assert_eq!(br("L5").rating_long_s, 100.0);
    assert_eq!(
        (br("L6").from_bus.as_str(), br("L6").to_bus.as_str()),
        ("b4", "b5")
    );

    let g = |id: &str| case.generators.iter().find(|g| g.id == id).unwrap();
    assert_eq!(g("gA").bus, "b1");
    assert_eq!(g("gA").cost_energy, 12.0);
    assert_eq!(g("gC").p_max, 120.0);
    assert_eq!(g("gC").p0, 120.0);
    // the fixture ships its own steady-state dispatch; totals balance with
    // the 2% loss uplift
    let total_p0: f64 = case.generators.iter().map(|g| g.p0).sum();
    assert!((total_p0 - 1.02 * case.total_load_mw()).abs() < 1e-9);

    assert!(validate(&case).is_empty());
}

#[test]
fn five_bus_bridges_match_remove_and_check() {
    let case = fixture("case5.json");
    assert_eq!(radial_branches(&case), exhaustive_bridges(&case));
    // the spur to b5 is the only radial branch
    assert_eq!(
        radial_branches(&case).into_iter().collect::<Vec<_>>(),
        vec!["L6".to_string()]
    );
}

/// Independent oracle: a branch is a bridge iff removing it disconnects the
/// graph (union-find connectivity after removal).
fn exhaustive_bridges(case: &GridCase) -> BTreeSet<String> {
    let n = case.buses.len();
    let index = |id: &str| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut out = BTreeSet::new();
    for removed in case.branches.iter().filter(|b| b.in_service) {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for br in case.branches.iter().filter(|b| b.in_service) {
            if br.id == removed.id {
                continue;
            }
            let (a, b) = (index(&br.from_bus), index(&br.to_bus));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let root = find(&mut parent, 0);
        if (1..n).any(|i| find(&mut parent, i) != root) {
            out.insert(removed.id.clone());
        }
    }
    out
}

/// Random connected case generator: a spanning tree plus extra edges.
fn arb_case() -> impl Strategy<Value = GridCase> {
    (3usize..21, 0usize..10, any::<u64>()).prop_map(|(n, extra, seed)| {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let buses: Vec<Bus> = (0..n)
            .map(|i| Bus {
                id: format!("n{i}"),
                base_kv: 138.0,
                load_p: (next() % 100) as f64,
                load_q: 0.0,
                is_slack: i == 0,
            })
            .collect();
        let mut branches = Vec::new();
        for i in 1..n {
            let j = (next() as usize) % i;
            branches.push(Branch {
                id: format!("e{}", branches.len()),
                from_bus: format!("n{j}"),
                to_bus: format!("n{i}"),
                reactance_x: 0.05 + ((next() % 100) as f64) / 500.0,
                rating_long_s: 100.0 + (next() % 200) as f64,
                rating_short_s: None,
                q_from: 0.0,
                q_to: 0.0,
                q_from_ctg: None,
                q_to_ctg: None,
                in_service: true,
            });
        }
        for _ in 0..extra {
            let a = (next() as usize) % n;
            let b = (next() as usize) % n;
            if a == b {
                continue;
            }
            branches.push(Branch {
                id: format!("e{}", branches.len()),
                from_bus: format!("n{a}"),
                to_bus: format!("n{b}"),
                reactance_x: 0.05 + ((next() % 100) as f64) / 500.0,
                rating_long_s: 100.0 + (next() % 200) as f64,
                rating_short_s: None,
                q_from: 0.0,
                q_to: 0.0,
                q_from_ctg: None,
                q_to_ctg: None,
                in_service: true,
            });
        }
        let total: f64 = buses.iter().map(|b| b.load_p).sum();
        let generators = vec![Generator {
            id: "g0".into(),
            bus: "n0".into(),
            p_min: 0.0,
            p_max: 2.0 * total + 100.0,
            p0: total,
            ramp_rate: 10.0,
            cost_energy: 10.0,
            cost_reserve: 1.0,
        }];
        GridCase {
            version: 1,
            mva_base: 100.0,
            loss_fraction: 0.0,
            buses,
            branches,
            generators,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Bridge detection equals the exhaustive remove-and-check oracle on
    /// every generated case.
    #[test]
    fn radial_branches_match_oracle(case in arb_case()) {
        prop_assert_eq!(radial_branches(&case), exhaustive_bridges(&case));
    }

    /// Serialize-then-parse reproduces the case exactly.
    #[test]
    fn case_roundtrip_identical(case in arb_case()) {
        let json = case.to_json();
        let (parsed, _) = load_case(
            json.as_bytes(),
            CaseFormat::NativeJson,
            &LoadOptions::default(),
        ).unwrap();
        // loading applies rating defaults; apply them to the original too
        let mut reference = case;
        for br in reference.branches.iter_mut() {
            br.rating_short_s = Some(br.rating_short_s.unwrap_or(1.15 * br.rating_long_s));
            br.q_from_ctg = Some(br.q_from_ctg.unwrap_or(br.q_from));
            br.q_to_ctg = Some(br.q_to_ctg.unwrap_or(br.q_to));
        }
        prop_assert_eq!(parsed.clone(), reference);
        // and a second serialization round-trip is bit-stable
        let again = parsed.to_json();
        let (parsed2, _) = load_case(
            again.as_bytes(),
            CaseFormat::NativeJson,
            &LoadOptions::default(),
        ).unwrap();
        prop_assert_eq!(parsed2, parsed);
    }
}
