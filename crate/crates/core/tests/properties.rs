use metricconf::ci::{bootstrap_ci, BootMethod};
use metricconf::correl::{coefficient, correlate, Coefficient, CorrelationSpec, Level};
use metricconf::hypo::{bonferroni_reject, permutation_test, williams_test, PermMethod, TiePolicy};
use metricconf::scores::{build_score_set, MissingPolicy, ScoreMatrix, ScoreRecord};
use proptest::prelude::*;

fn grid(n: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50i32..50, m), n)
        .prop_map(|g| g.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
}

fn continuous(n: usize, m: usize) -> impl Strategy<Value = ScoreMatrix> {
    prop::collection::vec(prop::collection::vec(-50.0f64..50.0, m), n)
        .prop_map(|g| ScoreMatrix::from_rows("c", &g).unwrap())
}

fn pair(n: usize, m: usize) -> impl Strategy<Value = (ScoreMatrix, ScoreMatrix)> {
    (grid(n, m), grid(n, m)).prop_map(|(a, b)| {
        (
            ScoreMatrix::from_rows("x", &a).unwrap(),
            ScoreMatrix::from_rows("z", &b).unwrap(),
        )
    })
}

fn specs() -> Vec<CorrelationSpec> {
    Level::ALL
        .iter()
        .flat_map(|&l| Coefficient::ALL.iter().map(move |&c| CorrelationSpec::new(l, c)))
        .collect()
}

fn map(x: &ScoreMatrix, f: impl Fn(f64) -> f64) -> ScoreMatrix {
    x.with_values(x.values().iter().map(|&v| f(v)).collect()).unwrap()
}

fn value(x: &ScoreMatrix, z: &ScoreMatrix, spec: CorrelationSpec) -> Option<f64> {
    correlate(x, z, spec).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlations_lie_in_unit_interval((x, z) in pair(6, 4)) {
        for spec in specs() {
            if let Some(r) = value(&x, &z, spec) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }

    #[test]
    fn correlations_are_symmetric((x, z) in pair(6, 4)) {
        for spec in specs() {
            let (a, b) = (value(&x, &z, spec), value(&z, &x, spec));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invariant_under_positive_affine_maps((x, z) in pair(6, 4), scale in 1i32..20, shift in -5i32..5) {
        // integer maps keep tied row sums tied, so rank coefficients see the same ties
        let y = map(&x, |v| f64::from(scale) * v + f64::from(shift));
        for spec in specs() {
            let (a, b) = (value(&x, &z, spec), value(&y, &z, spec));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() < 1e-9, "{spec:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rank_coefficients_invariant_under_monotone_maps(x in prop::collection::vec(-50i32..50, 8), z in prop::collection::vec(-50i32..50, 8)) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let z: Vec<f64> = z.into_iter().map(f64::from).collect();
        let fx: Vec<f64> = x.iter().map(|v| v * v * v + 2.0 * v).collect();
        for coef in [Coefficient::Spearman, Coefficient::Kendall] {
            prop_assert_eq!(coefficient(coef, &x, &z).unwrap(), coefficient(coef, &fx, &z).unwrap());
        }
    }

    #[test]
    fn invariant_under_joint_reordering((x, z) in pair(5, 4), rows in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(), cols in Just((0..4).collect::<Vec<usize>>()).prop_shuffle()) {
        let (xs, zs) = (x.select(&rows, &cols).unwrap(), z.select(&rows, &cols).unwrap());
        for spec in specs() {
            let (a, b) = (value(&x, &z, spec), value(&xs, &zs, spec));
            prop_assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summary_of_repeated_column_is_that_column(col in prop::collection::vec(-50i32..50, 6), zcol in prop::collection::vec(-50i32..50, 6), m in 1usize..5) {
        let rows = |c: &[i32]| -> Vec<Vec<f64>> { c.iter().map(|&v| vec![f64::from(v); m]).collect() };
        let x = ScoreMatrix::from_rows("x", &rows(&col)).unwrap();
        let z = ScoreMatrix::from_rows("z", &rows(&zcol)).unwrap();
        let xc: Vec<f64> = col.iter().map(|&v| f64::from(v)).collect();
        let zc: Vec<f64> = zcol.iter().map(|&v| f64::from(v)).collect();
        for coef in Coefficient::ALL {
            let want = coefficient(coef, &xc, &zc).unwrap();
            let got = value(&x, &z, CorrelationSpec::new(Level::Summary, coef));
            prop_assert_eq!(got.is_some(), want.is_some());
            if let (Some(a), Some(b)) = (got, want) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn score_set_ignores_record_order((x, z) in pair(4, 3), order in Just((0..24).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut records: Vec<ScoreRecord> = x.to_records();
        records.extend(z.to_records());
        let shuffled: Vec<ScoreRecord> = order.iter().map(|&i| records[i].clone()).collect();
        let metrics = vec!["x".to_string(), "z".to_string()];
        let a = build_score_set(&records, &metrics, MissingPolicy::Strict).unwrap();
        let b = build_score_set(&shuffled, &metrics, MissingPolicy::Strict).unwrap();
        prop_assert_eq!(a.get("x").unwrap(), b.get("x").unwrap());
        prop_assert_eq!(a.get("z").unwrap(), b.get("z").unwrap());
        prop_assert_eq!(a.get("x").unwrap(), &x);
    }

    #[test]
    fn williams_is_antisymmetric(a in -0.95f64..0.95, b in -0.95f64..0.95, c in -0.95f64..0.95, n in 5usize..200) {
        let k = 1.0 - a * a - b * b - c * c + 2.0 * a * b * c;
        prop_assume!(k > 1e-6);
        let p = williams_test(a, b, c, n).unwrap().p_value;
        let q = williams_test(b, a, c, n).unwrap().p_value;
        prop_assert!((p + q - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bonferroni_corrections_are_nested(ps in prop::collection::vec(0.0f64..=1.0, 1..20), split in 1usize..4) {
        let groups: Vec<Vec<usize>> = (0..split)
            .map(|g| (0..ps.len()).filter(|i| i % split == g).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect();
        let decisions = bonferroni_reject(&ps, 0.05, &groups).unwrap();
        for g in &groups {
            for &i in g {
                let d = decisions[i];
                prop_assert_eq!(d.threshold, 0.05 / g.len() as f64);
                prop_assert!(!d.corrected_significant || d.raw_significant);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn permutation_p_ignores_affine_rescaling(x in continuous(6, 4), y in continuous(6, 4), z in continuous(6, 4), seed in any::<u64>()) {
        let x10 = map(&x, |v| 10.0 * v + 3.0);
        let spec = CorrelationSpec::new(Level::System, Coefficient::Pearson);
        prop_assume!(value(&x, &z, spec).is_some() && value(&y, &z, spec).is_some());
        for method in PermMethod::ALL {
            let a = permutation_test(&x, &y, &z, method, spec, 200, seed, TiePolicy::Strict).unwrap();
            let b = permutation_test(&x10, &y, &z, method, spec, 200, seed, TiePolicy::Strict).unwrap();
            prop_assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        }
    }

    #[test]
    fn inclusive_p_dominates_strict((x, z) in pair(5, 3), y in grid(5, 3), seed in any::<u64>()) {
        let y = ScoreMatrix::from_rows("y", &y).unwrap();
        for spec in specs() {
            if value(&x, &z, spec).is_none() || value(&y, &z, spec).is_none() {
                continue;
            }
            let strict = permutation_test(&x, &y, &z, PermMethod::PermBoth, spec, 200, seed, TiePolicy::Strict);
            let incl = permutation_test(&x, &y, &z, PermMethod::PermBoth, spec, 200, seed, TiePolicy::Inclusive);
            if let (Ok(s), Ok(i)) = (strict, incl) {
                prop_assert!(i.p_value >= s.p_value);
            }
        }
    }

    #[test]
    fn bootstrap_intervals_are_ordered_and_nested((x, z) in pair(6, 4), seed in any::<u64>()) {
        for spec in specs() {
            if value(&x, &z, spec).is_none() {
                continue;
            }
            for method in BootMethod::ALL {
                let (Ok(wide), Ok(narrow)) = (
                    bootstrap_ci(&x, &z, method, spec, 200, 0.05, seed),
                    bootstrap_ci(&x, &z, method, spec, 200, 0.2, seed),
                ) else {
                    continue;
                };
                prop_assert!(-1.0 <= wide.lower && wide.lower <= wide.upper && wide.upper <= 1.0);
                prop_assert!(wide.lower <= narrow.lower && narrow.upper <= wide.upper);
            }
        }
    }
}
