use metricconf::correl::{Coefficient, CorrelationSpec, Level};
use metricconf::hypo::{TestMethod, TiePolicy};
use metricconf::sim::{generate_world, power_simulation, PowerConfig, SyntheticWorld};

fn strong_world() -> SyntheticWorld {
    SyntheticWorld {
        n_systems: 10,
        n_inputs: 10,
        system_sd: 1.0,
        input_sd: 1.0,
        noise_sd: 1.0,
        lambda: 0.8,
        seed: 3,
    }
}

#[test]
fn pure_noise_is_detected_and_identity_is_not() {
    let (x, z) = generate_world(&strong_world()).unwrap();
    let cfg = PowerConfig {
        levels: vec![0.0, 100.0],
        methods: vec![TestMethod::PermBoth, TestMethod::PairedBootBoth],
        spec: CorrelationSpec::new(Level::Summary, Coefficient::Pearson),
        trials: 1000,
        alpha: 0.05,
        resamples: 200,
        seed: 8,
        tie_policy: TiePolicy::Inclusive,
    };
    let curves = power_simulation(&x, &z, &cfg).unwrap();
    let perm = &curves[0];
    assert_eq!(perm.method, TestMethod::PermBoth);
    assert!(perm.power[0] >= 0.9, "{:?}", perm.power);
    for c in &curves {
        assert!(c.power[1] <= 0.05 + 0.03, "{} {:?}", c.method, c.power);
        assert_eq!(c.rejections.len(), 2);
    }
}

#[test]
fn power_runs_are_reproducible() {
    let (x, z) = generate_world(&strong_world()).unwrap();
    let cfg = PowerConfig {
        levels: vec![0.0, 60.0],
        methods: vec![TestMethod::PermInputs, TestMethod::Williams],
        spec: CorrelationSpec::new(Level::System, Coefficient::Spearman),
        trials: 40,
        alpha: 0.1,
        resamples: 100,
        seed: 1,
        tie_policy: TiePolicy::Strict,
    };
    assert_eq!(power_simulation(&x, &z, &cfg).unwrap(), power_simulation(&x, &z, &cfg).unwrap());
}
