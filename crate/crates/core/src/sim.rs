//! Simulation harnesses: held-out coverage of confidence intervals, power of
//! the significance tests, and a synthetic score generator.
//!
//! # Synthetic worlds
//!
//! The ground truth is `z[i][j] = s[i] + d[j] + e[i][j]` with Gaussian system
//! effects `s`, input effects `d` and cell noise `e`. A metric mixes the
//! truth with independent noise of the same marginal scale:
//! `x[i][j] = lambda * z[i][j] + (1 - lambda) * e'[i][j]`, where
//! `sd(e') = sqrt(sd_s^2 + sd_d^2 + sd_e^2)`.
//!
//! # Degraded metrics for power analysis
//!
//! At degradation level `k` (percent) a trial draws fresh cell noise `u` with
//! the mean and standard deviation of all cells of the base metric and scores
//! `y = (k/100) * x + (1 - k/100) * u`. Lower `k` gives a strictly worse
//! metric; `k = 100` reproduces the base metric exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{confidence_interval, CiMethod, ConfidenceInterval};
use crate::correl::{correlate, CorrelationSpec};
use crate::error::{Error, Result};
use crate::hypo::{run_test, TestMethod, TiePolicy};
use crate::numerics::{derive_seed, normal_sf, RngStream};
use crate::scores::{default_ids, ensure_aligned, ScoreMatrix};

/// Redraws allowed per coverage trial when a half has an undefined correlation.
pub const MAX_SPLIT_RETRIES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub n_systems: usize,
    pub n_inputs: usize,
    pub system_sd: f64,
    pub input_sd: f64,
    pub noise_sd: f64,
    /// Weight of the ground truth in the metric, in `[0, 1]`.
    pub lambda: f64,
    pub seed: u64,
}

impl SyntheticWorld {
    fn validate(&self) -> Result<()> {
        if self.n_systems < 4 || self.n_inputs < 2 {
            return Err(Error::InvalidArgument(format!(
                "synthetic world needs N >= 4 and M >= 2, got {}x{}",
                self.n_systems, self.n_inputs
            )));
        }
        let sds = [self.system_sd, self.input_sd, self.noise_sd];
        if sds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidArgument("standard deviations must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

struct WorldDraw {
    truth: Vec<f64>,
    stream: RngStream,
    metric_sd: f64,
}

fn draw_truth(w: &SyntheticWorld) -> Result<WorldDraw> {
    w.validate()?;
    let (n, m) = (w.n_systems, w.n_inputs);
    let mut stream = RngStream::new(w.seed, 0);
    let systems: Vec<f64> = (0..n).map(|_| stream.normal(0.0, w.system_sd)).collect();
    let inputs: Vec<f64> = (0..m).map(|_| stream.normal(0.0, w.input_sd)).collect();
    let mut truth = Vec::with_capacity(n * m);
    for s in &systems {
        for d in &inputs {
            truth.push(s + d + stream.normal(0.0, w.noise_sd));
        }
    }
    let metric_sd = (w.system_sd.powi(2) + w.input_sd.powi(2) + w.noise_sd.powi(2)).sqrt();
    Ok(WorldDraw {
        truth,
        stream,
        metric_sd,
    })
}

fn mix_metric(w: &SyntheticWorld, draw: &mut WorldDraw) -> Vec<f64> {
    let lambda = w.lambda;
    let sd = draw.metric_sd;
    let stream = &mut draw.stream;
    draw.truth
        .iter()
        .map(|z| lambda * z + (1.0 - lambda) * stream.normal(0.0, sd))
        .collect()
}

fn world_matrix(w: &SyntheticWorld, name: &str, values: Vec<f64>) -> Result<ScoreMatrix> {
    ScoreMatrix::new(
        name,
        default_ids("s", w.n_systems),
        default_ids("d", w.n_inputs),
        values,
    )
}

/// Draws `(X, Z)`: a metric and the ground truth.
pub fn generate_world(w: &SyntheticWorld) -> Result<(ScoreMatrix, ScoreMatrix)> {
    let mut draw = draw_truth(w)?;
    let x = mix_metric(w, &mut draw);
    Ok((world_matrix(w, "metric", x)?, world_matrix(w, "truth", draw.truth)?))
}

/// Draws `(X, Y, Z)` where X and Y are independent, identically distributed
/// metrics of the same truth. X equals the metric of [`generate_world`].
pub fn generate_exchangeable(w: &SyntheticWorld) -> Result<(ScoreMatrix, ScoreMatrix, ScoreMatrix)> {
    let mut draw = draw_truth(w)?;
    let x = mix_metric(w, &mut draw);
    let y = mix_metric(w, &mut draw);
    Ok((
        world_matrix(w, "metric_a", x)?,
        world_matrix(w, "metric_b", y)?,
        world_matrix(w, "truth", draw.truth)?,
    ))
}

/// Disjoint halves of the systems and of the inputs. When a count is odd,
/// half A is the smaller one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub systems_a: Vec<usize>,
    pub systems_b: Vec<usize>,
    pub inputs_a: Vec<usize>,
    pub inputs_b: Vec<usize>,
}

impl SplitPlan {
    pub fn draw(n: usize, m: usize, stream: &mut RngStream) -> Self {
        let mut halve = |len: usize| {
            let mut idx: Vec<usize> = (0..len).collect();
            stream.shuffle(&mut idx);
            let mut b = idx.split_off(len / 2);
            idx.sort_unstable();
            b.sort_unstable();
            (idx, b)
        };
        let (systems_a, systems_b) = halve(n);
        let (inputs_a, inputs_b) = halve(m);
        SplitPlan {
            systems_a,
            systems_b,
            inputs_a,
            inputs_b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageTrial {
    pub interval: ConfidenceInterval,
    pub held_out: f64,
    pub contained: bool,
    /// Splits redrawn before this trial produced a usable one.
    pub retries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub trials: usize,
    pub contained: usize,
    pub proportion: f64,
    pub retries: usize,
    pub records: Vec<CoverageTrial>,
}

/// Coverage of held-out correlations by intervals from `ci_method`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_simulation(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    ci_method: CiMethod,
    spec: CorrelationSpec,
    trials: usize,
    alpha: f64,
    k: usize,
    seed: u64,
) -> Result<CoverageReport> {
    coverage_simulation_with(x, z, spec, trials, seed, |xa, za, trial_seed| {
        confidence_interval(xa, za, ci_method, spec, k, alpha, trial_seed)
    })
}

fn retryable(e: &Error) -> bool {
    matches!(e, Error::UndefinedCorrelation(_) | Error::AllResamplesDegenerate(_))
}

/// Coverage simulation with a caller-supplied interval procedure. Trial `t`
/// draws its splits from `RngStream::new(seed, t)` and passes
/// `derive_seed(seed, t)` to the interval procedure.
pub fn coverage_simulation_with<F>(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    spec: CorrelationSpec,
    trials: usize,
    seed: u64,
    interval: F,
) -> Result<CoverageReport>
where
    F: Fn(&ScoreMatrix, &ScoreMatrix, u64) -> Result<ConfidenceInterval> + Sync,
{
    ensure_aligned(x, z)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if x.n_systems() < 4 || x.n_inputs() < 2 {
        return Err(Error::InvalidArgument(format!(
            "coverage simulation needs N >= 4 and M >= 2, got {}x{}",
            x.n_systems(),
            x.n_inputs()
        )));
    }
    let records: Vec<CoverageTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut stream = RngStream::new(seed, t);
            let trial_seed = derive_seed(seed, t);
            for retries in 0..=MAX_SPLIT_RETRIES {
                let plan = SplitPlan::draw(x.n_systems(), x.n_inputs(), &mut stream);
                let xb = x.select(&plan.systems_b, &plan.inputs_b)?;
                let zb = z.select(&plan.systems_b, &plan.inputs_b)?;
                let Some(held_out) = correlate(&xb, &zb, spec)?.value else {
                    continue;
                };
                let xa = x.select(&plan.systems_a, &plan.inputs_a)?;
                let za = z.select(&plan.systems_a, &plan.inputs_a)?;
                match interval(&xa, &za, trial_seed) {
                    Ok(ci) => {
                        return Ok(CoverageTrial {
                            interval: ci,
                            held_out,
                            contained: ci.contains(held_out),
                            retries,
                        })
                    }
                    Err(e) if retryable(&e) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::RetryBudgetExhausted(format!(
                "trial {t}: {MAX_SPLIT_RETRIES} redraws all gave an undefined correlation"
            )))
        })
        .collect::<Result<_>>()?;
    let contained = records.iter().filter(|r| r.contained).count();
    Ok(CoverageReport {
        trials,
        contained,
        proportion: contained as f64 / trials as f64,
        retries: records.iter().map(|r| r.retries).sum(),
        records,
    })
}

/// One-tailed pooled difference-of-proportions z-test of `c1/n1 > c2/n2`.
///
/// When the pooled proportion is 0 or 1 the statistic is undefined; the
/// p-value is then 0.5 for equal proportions, else 0 or 1 by the sign of the
/// difference.
pub fn proportions_z_test(c1: usize, n1: usize, c2: usize, n2: usize) -> Result<f64> {
    if n1 == 0 || n2 == 0 || c1 > n1 || c2 > n2 {
        return Err(Error::InvalidArgument(format!(
            "invalid proportions {c1}/{n1} and {c2}/{n2}"
        )));
    }
    let (p1, p2) = (c1 as f64 / n1 as f64, c2 as f64 / n2 as f64);
    let pooled = (c1 + c2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var <= 0.0 {
        return Ok(if p1 == p2 {
            0.5
        } else if p1 > p2 {
            0.0
        } else {
            1.0
        });
    }
    Ok(normal_sf((p1 - p2) / var.sqrt()))
}

/// Rejections of a test on worlds where the two metrics are exchangeable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullReport {
    pub method: TestMethod,
    pub alpha: f64,
    pub trials: usize,
    pub rejections: usize,
    pub rate: f64,
}

/// Type I error of each test. Trial `t` draws a fresh exchangeable world
/// with seed `derive_seed(seed, t)` and runs every test with seed
/// `derive_seed(derive_seed(seed, t), 1)`.
#[allow(clippy::too_many_arguments)]
pub fn null_rejection_simulation(
    world: &SyntheticWorld,
    methods: &[TestMethod],
    spec: CorrelationSpec,
    trials: usize,
    alpha: f64,
    k: usize,
    seed: u64,
    tie_policy: TiePolicy,
) -> Result<Vec<NullReport>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let per_trial: Vec<Vec<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let world_seed = derive_seed(seed, t);
            let (x, y, z) = generate_exchangeable(&SyntheticWorld { seed: world_seed, ..*world })?;
            let test_seed = derive_seed(world_seed, 1);
            methods
                .iter()
                .map(|&m| Ok(run_test(&x, &y, &z, m, spec, k, test_seed, tie_policy)?.significant(alpha)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let rejections = per_trial.iter().filter(|row| row[mi]).count();
            NullReport {
                method,
                alpha,
                trials,
                rejections,
                rate: rejections as f64 / trials as f64,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Degradation levels in percent, each in `[0, 100]`.
    pub levels: Vec<f64>,
    pub methods: Vec<TestMethod>,
    pub spec: CorrelationSpec,
    pub trials: usize,
    pub alpha: f64,
    pub resamples: usize,
    pub seed: u64,
    /// Tie handling for permutation tests. Inclusive by default: at 100% the
    /// degraded metric equals the base metric and every permuted difference
    /// ties the observed zero.
    #[serde(default = "inclusive")]
    pub tie_policy: TiePolicy,
}

fn inclusive() -> TiePolicy {
    TiePolicy::Inclusive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub method: TestMethod,
    pub alpha: f64,
    pub trials: usize,
    pub levels: Vec<f64>,
    pub rejections: Vec<usize>,
    pub power: Vec<f64>,
}

/// Degrades `x` toward cell noise with the mean and sd of its own cells.
pub fn degrade(x: &ScoreMatrix, level_percent: f64, stream: &mut RngStream) -> Result<ScoreMatrix> {
    let v = x.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let w = level_percent / 100.0;
    x.with_values(v.iter().map(|&a| w * a + (1.0 - w) * stream.normal(mean, sd)).collect())
}

/// Power of each test to detect that `x_base` beats its degraded copies.
///
/// For level index `l` and trial `t`, the degradation noise comes from
/// `RngStream::new(derive_seed(seed, l), t)` and every test in the trial uses
/// seed `derive_seed(derive_seed(seed, l), t)`.
pub fn power_simulation(x_base: &ScoreMatrix, z: &ScoreMatrix, cfg: &PowerConfig) -> Result<Vec<PowerCurve>> {
    ensure_aligned(x_base, z)?;
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if cfg.levels.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("need at least one level and one test".into()));
    }
    if let Some(l) = cfg.levels.iter().find(|l| !(0.0..=100.0).contains(*l)) {
        return Err(Error::InvalidArgument(format!("degradation level {l} outside [0, 100]")));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", cfg.alpha)));
    }
    let v = x_base.values();
    if v.iter().all(|&a| a == v[0]) {
        return Err(Error::InvalidArgument("base metric is constant".into()));
    }
    correlate(x_base, z, cfg.spec)?.require()?;

    let mut rejections = vec![vec![0usize; cfg.levels.len()]; cfg.methods.len()];
    for (li, &level) in cfg.levels.iter().enumerate() {
        let level_seed = derive_seed(cfg.seed, li as u64);
        let per_trial: Vec<Vec<bool>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let mut stream = RngStream::new(level_seed, t);
                let y = degrade(x_base, level, &mut stream)?.renamed("degraded");
                let test_seed = derive_seed(level_seed, t);
                cfg.methods
                    .iter()
                    .map(|&method| {
                        let r = run_test(x_base, &y, z, method, cfg.spec, cfg.resamples, test_seed, cfg.tie_policy)?;
                        Ok(r.significant(cfg.alpha))
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<_>>()?;
        for row in per_trial {
            for (mi, rejected) in row.into_iter().enumerate() {
                rejections[mi][li] += usize::from(rejected);
            }
        }
    }
    Ok(cfg
        .methods
        .iter()
        .zip(rejections)
        .map(|(&method, rejections)| PowerCurve {
            method,
            alpha: cfg.alpha,
            trials: cfg.trials,
            levels: cfg.levels.clone(),
            power: rejections.iter().map(|&r| r as f64 / cfg.trials as f64).collect(),
            rejections,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correl::{Coefficient, Level};

    fn world(lambda: f64, noise: f64, seed: u64) -> SyntheticWorld {
        SyntheticWorld {
            n_systems: 8,
            n_inputs: 6,
            system_sd: 1.0,
            input_sd: 0.5,
            noise_sd: noise,
            lambda,
            seed,
        }
    }

    #[test]
    fn perfect_metric_reproduces_truth() {
        let (x, z) = generate_world(&world(1.0, 0.0, 3)).unwrap();
        assert_eq!(x.values(), z.values());
        let (a, b) = generate_world(&world(0.6, 1.0, 3)).unwrap();
        let (c, d) = generate_world(&world(0.6, 1.0, 3)).unwrap();
        assert_eq!((a, b), (c, d));
        assert!(generate_world(&SyntheticWorld { n_systems: 3, ..world(0.5, 1.0, 0) }).is_err());
        assert!(generate_world(&SyntheticWorld { lambda: 1.5, ..world(0.5, 1.0, 0) }).is_err());
    }

    #[test]
    fn independent_metric_is_uncorrelated_on_average() {
        let spec = CorrelationSpec::new(Level::System, Coefficient::Pearson);
        let rs: Vec<f64> = (0..500)
            .map(|s| {
                let (x, z) = generate_world(&world(0.0, 1.0, s)).unwrap();
                correlate(&x, &z, spec).unwrap().value.unwrap()
            })
            .collect();
        let mean = rs.iter().sum::<f64>() / 500.0;
        let sd = (rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 499.0).sqrt();
        assert!(mean.abs() <= 3.0 * sd / 500f64.sqrt(), "mean {mean}");
    }

    #[test]
    fn splits_are_disjoint_halves() {
        let mut stream = RngStream::new(1, 0);
        for (n, m) in [(4, 2), (7, 5), (10, 3)] {
            let p = SplitPlan::draw(n, m, &mut stream);
            assert_eq!(p.systems_a.len(), n / 2);
            assert_eq!(p.inputs_a.len(), m / 2);
            let mut all: Vec<usize> = p.systems_a.iter().chain(&p.systems_b).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let mut all: Vec<usize> = p.inputs_a.iter().chain(&p.inputs_b).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn universal_interval_always_covers() {
        let (x, z) = generate_world(&world(0.5, 1.0, 9)).unwrap();
        let spec = CorrelationSpec::new(Level::Summary, Coefficient::Spearman);
        let report = coverage_simulation_with(&x, &z, spec, 50, 2, |xa, za, _| {
            Ok(ConfidenceInterval {
                lower: -1.0,
                upper: 1.0,
                alpha: 0.05,
                point: correlate(xa, za, spec)?.require()?,
                method: CiMethod::BootBoth,
                resamples: 0,
                seed: None,
                degenerate_resamples: 0,
            })
        })
        .unwrap();
        assert_eq!(report.proportion, 1.0);
        assert_eq!(report.contained, 50);
    }

    #[test]
    fn identical_metric_covers_with_unit_intervals() {
        let (_, z) = generate_world(&world(0.5, 1.0, 4)).unwrap();
        let spec = CorrelationSpec::new(Level::System, Coefficient::Pearson);
        let report = coverage_simulation(&z, &z, CiMethod::BootBoth, spec, 20, 0.05, 100, 1).unwrap();
        assert_eq!(report.proportion, 1.0);
        assert!(report.records.iter().all(|r| r.interval.lower == 1.0 && r.held_out == 1.0));
    }

    #[test]
    fn coverage_needs_trials_and_shape() {
        let (x, z) = generate_world(&world(0.5, 1.0, 4)).unwrap();
        let spec = CorrelationSpec::new(Level::System, Coefficient::Pearson);
        assert!(coverage_simulation(&x, &z, CiMethod::Fisher, spec, 0, 0.05, 100, 1).is_err());
    }

    #[test]
    fn proportions_examples() {
        assert_eq!(proportions_z_test(500, 1000, 500, 1000).unwrap(), 0.5);
        let p = proportions_z_test(600, 1000, 500, 1000).unwrap();
        // pooled 0.55, z = 0.1 / sqrt(0.2475 * 0.002) = 4.49467
        assert!((p - 3.483_965_536_424_916e-6).abs() < 1e-12);
        assert!((p - 3.5e-6).abs() < 1e-7);
        let q = proportions_z_test(500, 1000, 600, 1000).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
        assert_eq!(proportions_z_test(0, 10, 0, 20).unwrap(), 0.5);
        assert_eq!(proportions_z_test(10, 10, 20, 20).unwrap(), 0.5);
        assert!(proportions_z_test(11, 10, 0, 20).is_err());
        assert!(proportions_z_test(0, 0, 0, 20).is_err());
    }

    #[test]
    fn degrade_endpoints() {
        let (x, _) = generate_world(&world(0.5, 1.0, 4)).unwrap();
        let mut s = RngStream::new(0, 0);
        assert_eq!(degrade(&x, 100.0, &mut s).unwrap().values(), x.values());
        let noise = degrade(&x, 0.0, &mut s).unwrap();
        assert_ne!(noise.values(), x.values());
    }

    #[test]
    fn power_rejects_zero_trials() {
        let (x, z) = generate_world(&world(0.8, 1.0, 4)).unwrap();
        let cfg = PowerConfig {
            levels: vec![0.0],
            methods: vec![TestMethod::PermBoth],
            spec: CorrelationSpec::new(Level::Summary, Coefficient::Pearson),
            trials: 0,
            alpha: 0.05,
            resamples: 100,
            seed: 0,
            tie_policy: TiePolicy::Inclusive,
        };
        assert!(power_simulation(&x, &z, &cfg).is_err());
        let cfg = PowerConfig { trials: 20, levels: vec![0.0, 100.0], ..cfg };
        let curves = power_simulation(&x, &z, &cfg).unwrap();
        assert_eq!(curves[0].rejections.len(), 2);
        assert_eq!(curves[0].rejections[1], 0);
        assert!(curves[0].power.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn null_rejection_counts() {
        let w = world(0.5, 1.0, 0);
        let spec = CorrelationSpec::new(Level::Summary, Coefficient::Pearson);
        let methods = [TestMethod::PermBoth, TestMethod::PairedBootBoth];
        let a = null_rejection_simulation(&w, &methods, spec, 30, 0.05, 100, 5, TiePolicy::Strict).unwrap();
        let b = null_rejection_simulation(&w, &methods, spec, 30, 0.05, 100, 5, TiePolicy::Strict).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for r in &a {
            assert!(r.rejections <= r.trials);
            assert_eq!(r.rate, r.rejections as f64 / 30.0);
        }
        assert!(null_rejection_simulation(&w, &methods, spec, 0, 0.05, 100, 5, TiePolicy::Strict).is_err());
    }
}
