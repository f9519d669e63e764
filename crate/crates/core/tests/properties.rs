use proptest::prelude::*;

use dpaudit::accountant::{
    analytic_pld_laplace, compose, compose_with, eps_grid, pld_from_profile, Convolution, DiscretePld,
    DEFAULT_GRID_STEP,
};
use dpaudit::distaudit::blackbox::clopper_pearson_upper;
use dpaudit::mechanisms::{LaplaceMechanism, MechanismParams, Registry};
use dpaudit::neighbors::{gen_neighbors, AdjacencyModel, Column, Strategy as PairStrategy, TabularDataset};
use dpaudit::recorder::AuditContext;
use dpaudit::rng::{DpRng, RngState};
use dpaudit::validator::{validate_traces, ViolationKind};
use dpaudit::Value;

const STEP: f64 = DEFAULT_GRID_STEP;

fn pld_strategy() -> impl Strategy<Value = DiscretePld> {
    (-400i64..400, prop::collection::vec(0.0f64..1.0, 1..60), 0.0f64..0.05).prop_map(|(k_min, raw, dinf)| {
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let masses = raw.iter().map(|p| p / total * (1.0 - dinf)).collect();
        DiscretePld::new(STEP, k_min, masses, dinf).expect("valid by construction")
    })
}

fn finite_or_special() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => any::<f64>(),
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(-0.0),
    ]
}

fn value_strategy() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        finite_or_special().prop_map(Value::Real),
        prop::collection::vec(finite_or_special(), 0..5).prop_map(Value::Vector),
        any::<i64>().prop_map(Value::Int),
        (0usize..1000).prop_map(Value::Index),
        any::<bool>().prop_map(Value::Bool),
        "[a-z]{0,6}".prop_map(Value::Text),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
            prop::collection::btree_map("[a-z]{1,4}", inner, 0..4).prop_map(Value::Map),
        ]
    })
}

fn dataset_strategy() -> impl Strategy<Value = TabularDataset> {
    prop::collection::vec((0u8..5, 0.0f64..1.0), 1..30).prop_map(|rows| {
        let schema = vec![Column::categorical("c", 0, 4), Column::real("r", 0.0, 1.0)];
        TabularDataset::new(schema, rows.into_iter().map(|(c, r)| vec![f64::from(c), r]).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rng_restore_replays_the_stream(seed in any::<u64>(), skip in 0usize..50, take in 1usize..20) {
        let mut g = DpRng::seed_from_u64(seed);
        for _ in 0..skip {
            g.next_u64();
        }
        let state = g.snapshot();
        let ahead: Vec<u64> = (0..take).map(|_| g.next_u64()).collect();
        let bytes = RngState::from_bytes(state.as_bytes().to_vec()).unwrap();
        prop_assert_eq!(&bytes, &state);
        prop_assert_eq!(&RngState::from_hex(&state.to_hex()).unwrap(), &state);
        let mut h = DpRng::seed_from_u64(seed ^ 1);
        h.restore(&state).unwrap();
        let again: Vec<u64> = (0..take).map(|_| h.next_u64()).collect();
        prop_assert_eq!(ahead, again);
    }

    #[test]
    fn value_json_round_trip_is_bitwise(v in value_strategy()) {
        let s = serde_json::to_string(&v).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn generated_pairs_are_neighbours(d in dataset_strategy(), seed in any::<u64>(), si in 0usize..9, replace in any::<bool>()) {
        let model = if replace { AdjacencyModel::ReplaceOne } else { AdjacencyModel::AddRemove };
        let strategy = PairStrategy::ALL[si];
        match gen_neighbors(&d, model, strategy, seed, 2) {
            Ok(pairs) => {
                for (a, b) in &pairs {
                    prop_assert!(a.is_neighbor_of(b, model));
                    prop_assert_eq!(a, &d);
                }
                prop_assert_eq!(pairs.clone(), gen_neighbors(&d, model, strategy, seed, 2).unwrap());
            }
            Err(_) => prop_assert!(
                (model, strategy) == (AdjacencyModel::ReplaceOne, PairStrategy::RemoveRandom)
                    || d.rows().iter().all(|r| r == &d.rows()[0])
            ),
        }
    }

    #[test]
    fn delta_is_non_increasing_and_epsilon_consistent(p in pld_strategy(), delta in 1e-6f64..0.5) {
        let grid = eps_grid(-500, 500, 0.01);
        let prof = p.profile(&grid);
        for w in prof.points.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-15);
        }
        if let Ok(e) = p.epsilon_at(delta) {
            prop_assert!(p.delta_at(e) <= delta);
            if e > 0.0 {
                prop_assert!(p.delta_at(e - STEP) > delta);
            }
        }
    }

    #[test]
    fn profile_round_trip_is_exact_on_the_grid(p in pld_strategy()) {
        let grid = eps_grid(p.k_min, p.k_max(), STEP);
        let prof = p.profile(&grid);
        let back = pld_from_profile(&prof, STEP).unwrap();
        for &(e, d) in &prof.points {
            prop_assert!((back.delta_at(e) - d).abs() <= 1e-9, "eps {e}: {} vs {d}", back.delta_at(e));
        }
    }

    #[test]
    fn composition_methods_agree_and_only_add_loss(a in pld_strategy(), b in pld_strategy()) {
        let direct = compose_with(&[a.clone(), b.clone()], Convolution::Direct).unwrap();
        let fft = compose_with(&[a.clone(), b.clone()], Convolution::Fft).unwrap();
        let swapped = compose(&[b.clone(), a.clone()]).unwrap();
        for e in [-1.0, 0.0, 0.3, 1.0, 2.5] {
            prop_assert!((direct.delta_at(e) - fft.delta_at(e)).abs() <= 1e-9);
            prop_assert!((direct.delta_at(e) - swapped.delta_at(e)).abs() <= 1e-9);
        }
        prop_assert!((direct.total_mass() - 1.0).abs() <= 1e-9);
        prop_assert!(direct.delta_inf + 1e-12 >= a.delta_inf.max(b.delta_inf));
        let id = compose(&[a.clone(), DiscretePld::identity(STEP)]).unwrap();
        for e in [-0.5, 0.0, 0.7] {
            prop_assert!((id.delta_at(e) - a.delta_at(e)).abs() <= 1e-9);
        }
    }

    #[test]
    fn composed_laplace_dominates_each_part(b1 in 0.5f64..5.0, b2 in 0.5f64..5.0) {
        let p1 = analytic_pld_laplace(1.0, b1, STEP).unwrap();
        let p2 = analytic_pld_laplace(1.0, b2, STEP).unwrap();
        let c = compose(&[p1.clone(), p2.clone()]).unwrap();
        for e in [0.0, 0.2, 0.5, 1.0] {
            prop_assert!(c.delta_at(e) + 1e-12 >= p1.delta_at(e).max(p2.delta_at(e)));
        }
    }

    #[test]
    fn raising_declared_sensitivity_never_adds_violations(q in -1e3f64..1e3, gap in -50.0f64..50.0, s1 in 0.0f64..60.0, extra in 0.0f64..60.0) {
        let run = |sens: f64| {
            let reg = Registry::new().with(LaplaceMechanism::new());
            let p = MechanismParams::pure(1.0, sens).unwrap();
            let mut rec = AuditContext::record("prop", reg.clone(), 0);
            rec.call("LM", p.clone(), Value::Real(q)).unwrap();
            let t = rec.finish();
            let mut rep = AuditContext::replay(t.clone(), reg).unwrap();
            rep.call("LM", p, Value::Real(q + gap)).unwrap();
            validate_traces(&t, &rep.finish()).unwrap()
        };
        let low = run(s1);
        let high = run(s1 + extra);
        prop_assert!(high.violations.len() <= low.violations.len());
        prop_assert_eq!(low.has(ViolationKind::SensitivityViolation), ((q + gap) - q).abs() > s1 + 1e-9);
    }

    #[test]
    fn clopper_pearson_upper_is_ordered(n in 1usize..2000, frac in 0.0f64..1.0, m1 in 0.001f64..0.2, m2 in 0.001f64..0.2) {
        let x = ((n as f64) * frac) as usize;
        let (lo_miss, hi_miss) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
        let a = clopper_pearson_upper(x, n, lo_miss);
        let b = clopper_pearson_upper(x, n, hi_miss);
        prop_assert!(a + 1e-12 >= b);
        prop_assert!(b + 1e-12 >= x as f64 / n as f64);
        prop_assert!(a <= 1.0);
    }
}
