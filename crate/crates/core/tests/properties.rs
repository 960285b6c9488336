use geoshap::analysis::{global_importance, svc_extract, Bandwidth, KernelShape, SvcConfig};
use geoshap::exact::GameTable;
use geoshap::game::FnOracle;
use geoshap::kernel::{build_design, default_budget, shapley_kernel_weight, solve_attributions};
use geoshap::linalg::SolverPath;
use geoshap::{
    explain, Additive, Attribution, BackgroundSet, Coalition, DataSet, ExplainConfig, ExplanationRow, ExplanationSet,
    PlayerIndex,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn attribution(p: usize) -> impl Strategy<Value = Attribution> {
    (
        -5.0..5.0f64,
        -5.0..5.0f64,
        prop::collection::vec(-5.0..5.0f64, p),
        prop::collection::vec(-5.0..5.0f64, p),
    )
        .prop_map(|(phi0, phi_geo, phi, phi_geo_x)| Attribution {
            phi0,
            phi_geo,
            phi,
            phi_geo_x,
        })
}

fn explanation_set(p: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = ExplanationSet> {
    prop::collection::vec(
        (attribution(p), prop::collection::vec(-2.0..2.0f64, p), 0.0..10.0f64, 0.0..10.0f64),
        n,
    )
    .prop_map(move |rows| ExplanationSet {
        feature_names: (1..=p).map(|j| format!("x{j}")).collect(),
        include_geo: true,
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (a, x, u, v))| ExplanationRow {
                row_id: i.to_string(),
                coords: [u, v],
                x,
                prediction: a.total(),
                attribution: a,
            })
            .collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn importance_ignores_row_order(ex in explanation_set(3, 1..40), seed in any::<u64>()) {
        let mut shuffled = ex.clone();
        let n = shuffled.rows.len();
        // deterministic Fisher-Yates driven by the seed
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.rows.swap(i, (state >> 33) as usize % (i + 1));
        }
        let a = global_importance(&ex).unwrap();
        let b = global_importance(&shuffled).unwrap();
        prop_assert_eq!(a.ranking(), b.ranking());
        for (x, y) in a.entries.iter().zip(&b.entries) {
            prop_assert!((x.total - y.total).abs() <= 1e-12);
            prop_assert!((x.primary_part - y.primary_part).abs() <= 1e-12);
        }
    }

    #[test]
    fn importance_parts_add_up(ex in explanation_set(2, 1..30)) {
        let t = global_importance(&ex).unwrap();
        for e in &t.entries {
            prop_assert!((e.primary_part + e.geo_part - e.total).abs() <= 1e-12);
            prop_assert!(e.primary_part >= 0.0 && e.geo_part >= 0.0);
        }
        prop_assert!(t.entries.windows(2).all(|w| w[0].total >= w[1].total));
    }

    #[test]
    fn kernel_weight_is_symmetric(m in 2usize..40, s in 1usize..39) {
        prop_assume!(s < m);
        let a = shapley_kernel_weight(s, m).unwrap();
        let b = shapley_kernel_weight(m - s, m).unwrap();
        prop_assert!(a > 0.0 && a.is_finite());
        prop_assert!((a - b).abs() <= 1e-15 * a.max(b));
    }

    #[test]
    fn designs_are_complement_closed_and_seeded(p in 2usize..14, budget in 0usize..600, seed in any::<u64>()) {
        let players = PlayerIndex::new(p, true).unwrap();
        let m = players.m();
        let budget = budget.max(2 * m + 2).min(default_budget(m));
        let a = build_design(&players, budget, seed).unwrap();
        let b = build_design(&players, budget, seed).unwrap();
        prop_assert_eq!(a.coalitions(), b.coalitions());
        prop_assert!(a.coalitions().contains(&Coalition(0)));
        prop_assert!(a.coalitions().contains(&Coalition::full(m)));
        prop_assert!(geoshap::kernel::unique_coalitions(a.coalitions()));
        let set: std::collections::HashSet<_> = a.coalitions().iter().collect();
        prop_assert!(a.coalitions().iter().all(|c| set.contains(&c.complement(m))));
    }

    #[test]
    fn full_enumeration_is_efficient_on_random_games(
        values in prop::collection::vec(-10.0..10.0f64, 32),
    ) {
        let table = GameTable::from_fn(5, |c| values[c.0 as usize]).unwrap();
        let players = PlayerIndex::new(4, true).unwrap();
        let design = build_design(&players, 32, 0).unwrap();
        let v: Vec<f64> = design.coalitions().iter().map(|c| table.value(*c)).collect();
        let a = solve_attributions(&design, &v, SolverPath::Qr).unwrap();
        prop_assert!((a.total() - values[31]).abs() <= 1e-9);
        prop_assert!(a.max_abs_diff(&table.geoshapley(4)) <= 1e-9);
    }

    #[test]
    fn svc_slopes_scale_with_effects(
        ex in explanation_set(2, 40..60),
        c in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64],
    ) {
        let config = SvcConfig { bandwidth: Bandwidth::Adaptive(20), kernel: KernelShape::Bisquare };
        let base = svc_extract(&ex, "x1", &config);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let mut scaled = ex.clone();
        for r in &mut scaled.rows {
            r.attribution = r.attribution.scaled(c);
        }
        let s = svc_extract(&scaled, "x1", &config).unwrap();
        for (a, b) in base.beta.iter().zip(&s.beta) {
            prop_assert!((a * c - b).abs() <= 1e-8 * (1.0 + a.abs() * c.abs()), "{} vs {}", a * c, b);
        }
        for (a, b) in base.intercept.iter().zip(&s.intercept) {
            prop_assert!((a * c - b).abs() <= 1e-8 * (1.0 + a.abs() * c.abs()));
        }
    }

    #[test]
    fn svc_slopes_shrink_when_the_feature_is_stretched(
        ex in explanation_set(2, 40..60),
        c in 0.25..4.0f64,
    ) {
        let config = SvcConfig { bandwidth: Bandwidth::Adaptive(25), kernel: KernelShape::Bisquare };
        let base = svc_extract(&ex, "x1", &config);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let mut stretched = ex.clone();
        for r in &mut stretched.rows {
            r.x[0] *= c;
        }
        let s = svc_extract(&stretched, "x1", &config).unwrap();
        for (a, b) in base.beta.iter().zip(&s.beta) {
            prop_assert!((a / c - b).abs() <= 1e-7 * (1.0 + a.abs() / c), "{} vs {}", a / c, b);
        }
    }
}

fn small_dataset(n: usize, seed: u64) -> DataSet {
    let mut state = seed.wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let x = DMatrix::from_fn(n, 3, |_, _| next() * 2.0 - 1.0);
    let coords = (0..n).map(|_| [next(), next()]).collect();
    DataSet::new(vec!["a".into(), "b".into(), "c".into()], x, coords, None, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn seeded_explanations_are_deterministic(data_seed in any::<u64>(), seed in any::<u64>(), sampled in any::<bool>()) {
        let d = small_dataset(12, data_seed);
        let f = FnOracle::new(5, |r: &[f64]| r[0] * r[3] + (r[1] * r[4]).sin() - r[2] * r[2] + r[3]);
        let bg = BackgroundSet::sample(&d, 6, seed).unwrap();
        let config = ExplainConfig { budget: sampled.then_some(20), seed, ..Default::default() };
        let a = explain(&d, &f, &bg, &config).unwrap();
        let b = explain(&d, &f, &bg, &config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.max_efficiency_gap() <= 1e-8);
    }
}
