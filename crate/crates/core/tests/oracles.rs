mod support;

use metricconf::ci::{bootstrap_ci, bootstrap_distribution, BootMethod};
use metricconf::correl::{correlate, Coefficient, CorrelationSpec, Level, UndefinedPolicy};
use metricconf::hypo::{permutation_test, PermMethod, TiePolicy};
use metricconf::numerics::RngStream;
use metricconf::scores::ScoreMatrix;
use support::Grid;

fn matrix(g: &Grid) -> ScoreMatrix {
    ScoreMatrix::from_rows("m", g).unwrap()
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

#[test]
fn correlations_match_naive_reimplementation() {
    let mut stream = RngStream::new(2024, 0);
    for case in 0..300 {
        let ties = case % 3 == 0;
        let x = support::random_grid(&mut stream, 5, 4, ties);
        let z = support::random_grid(&mut stream, 5, 4, ties);
        let (xm, zm) = (matrix(&x), matrix(&z));
        for coef in Coefficient::ALL {
            let sys = correlate(&xm, &zm, CorrelationSpec::new(Level::System, coef)).unwrap();
            assert!(close(sys.value, support::system_level(&x, &z, coef), 1e-12), "case {case} {coef} sys");
            for (policy, propagate) in [(UndefinedPolicy::Skip, false), (UndefinedPolicy::Propagate, true)] {
                let spec = CorrelationSpec {
                    level: Level::Summary,
                    coefficient: coef,
                    undefined: policy,
                };
                let sum = correlate(&xm, &zm, spec).unwrap();
                let want = support::summary_level(&x, &z, coef, propagate);
                assert!(close(sum.value, want, 1e-12), "case {case} {coef} sum {policy:?}");
            }
        }
    }
}

fn two_by_two() -> (Grid, Grid, Grid) {
    let x = vec![vec![1.0, 4.0], vec![3.0, 6.0]];
    let y = vec![vec![2.0, 1.0], vec![0.5, 3.0]];
    let z = vec![vec![0.0, 5.0], vec![2.0, 1.0]];
    (x, y, z)
}

#[test]
fn two_by_two_bootstrap_matches_enumeration() {
    let (x, _, z) = two_by_two();
    let k = 20_000;
    let tol = 2.0 / (k as f64).sqrt();
    for method in BootMethod::ALL {
        let rows = method != BootMethod::BootInputs;
        let cols = method != BootMethod::BootSystems;
        for level in Level::ALL {
            let spec = CorrelationSpec::new(level, Coefficient::Pearson);
            let exact = support::exact_bootstrap(&x, &z, rows, cols, Coefficient::Pearson, level == Level::System);
            let atoms: Vec<f64> = exact.iter().flatten().copied().collect();
            if atoms.is_empty() {
                continue;
            }
            let dist = bootstrap_distribution(&matrix(&x), &matrix(&z), method, spec, k, 11).unwrap();
            let exact_degenerate = (exact.len() - atoms.len()) as f64 / exact.len() as f64;
            assert!((dist.degenerate() as f64 / k as f64 - exact_degenerate).abs() < tol);

            let defined = dist.defined();
            let mut support_points = atoms.clone();
            support_points.sort_by(f64::total_cmp);
            support_points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            for v in &support_points {
                let p_exact = atoms.iter().filter(|a| (*a - v).abs() < 1e-12).count() as f64 / atoms.len() as f64;
                let p_mc = defined.iter().filter(|a| (*a - v).abs() < 1e-12).count() as f64 / defined.len() as f64;
                assert!((p_exact - p_mc).abs() < tol, "{method} {level} atom {v}");
            }

            let ci = bootstrap_ci(&matrix(&x), &matrix(&z), method, spec, k, 0.05, 11).unwrap();
            for (got, q) in [(ci.lower, 0.025), (ci.upper, 0.975)] {
                let lo = support::exact_quantile(&atoms, q - tol);
                let hi = support::exact_quantile(&atoms, q + tol);
                assert!(lo - 1e-12 <= got && got <= hi + 1e-12, "{method} {level} q={q}: {got} not in [{lo}, {hi}]");
            }
        }
    }
}

#[test]
fn two_by_two_perm_both_matches_enumeration() {
    let (x, y, z) = two_by_two();
    let k = 20_000;
    let tol = 2.0 / (k as f64).sqrt();
    for level in Level::ALL {
        let spec = CorrelationSpec::new(level, Coefficient::Kendall);
        for (tie, inclusive) in [(TiePolicy::Strict, false), (TiePolicy::Inclusive, true)] {
            let exact = support::exact_perm_both_p(&x, &y, &z, Coefficient::Kendall, level == Level::System, inclusive);
            let got = permutation_test(&matrix(&x), &matrix(&y), &matrix(&z), PermMethod::PermBoth, spec, k, 5, tie)
                .unwrap();
            assert!((got.p_value - exact).abs() < tol, "{level} {tie:?}: {} vs {exact}", got.p_value);
        }
    }
}
