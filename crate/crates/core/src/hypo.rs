//! One-tailed tests of whether metric X correlates better with the ground
//! truth Z than metric Y does:
//!
//! ```text
//! H0: rho(X, Z) - rho(Y, Z) <= 0      H1: rho(X, Z) - rho(Y, Z) > 0
//! ```
//!
//! Small p-values favour X.
//!
//! # Williams' test
//!
//! With `K = 1 - r_xz^2 - r_yz^2 - r_xy^2 + 2 r_xz r_yz r_xy`,
//!
//! ```text
//! t = (r_xz - r_yz) * sqrt((n - 1)(1 + r_xy))
//!     / sqrt(2 K (n - 1)/(n - 3) + ((r_xz + r_yz)^2 / 4) (1 - r_xy)^3)
//! ```
//!
//! and `p = P(T_{n-3} > t)`.
//!
//! # Permutation tests
//!
//! X and Y are standardized over all cells (population standard deviation),
//! then scores are swapped between them whole rows at a time, whole columns
//! at a time, or cell by cell, one fair coin per unit in row-major order.
//! The p-value is the fraction of non-degenerate permutations whose
//! difference exceeds the observed one (`>` under the strict tie policy,
//! `>=` under the inclusive one).
//!
//! # Paired bootstrap
//!
//! X, Y and Z are resampled with shared indices; the p-value is the fraction
//! of non-degenerate resamples whose difference is `<= 0`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{boot_indices, gather, BootMethod, MIN_RESAMPLES};
use crate::correl::{correlate, level_on_values, CorrelationSpec, Level};
use crate::error::{Error, Result};
use crate::numerics::{student_t_sf, RngStream};
use crate::scores::{ensure_aligned, ScoreMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermMethod {
    PermSystems,
    PermInputs,
    PermBoth,
}

impl PermMethod {
    pub const ALL: [PermMethod; 3] = [PermMethod::PermSystems, PermMethod::PermInputs, PermMethod::PermBoth];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Williams,
    PermSystems,
    PermInputs,
    PermBoth,
    PairedBootSystems,
    PairedBootInputs,
    PairedBootBoth,
}

impl TestMethod {
    pub fn perm_method(self) -> Option<PermMethod> {
        match self {
            TestMethod::PermSystems => Some(PermMethod::PermSystems),
            TestMethod::PermInputs => Some(PermMethod::PermInputs),
            TestMethod::PermBoth => Some(PermMethod::PermBoth),
            _ => None,
        }
    }

    pub fn boot_method(self) -> Option<BootMethod> {
        match self {
            TestMethod::PairedBootSystems => Some(BootMethod::BootSystems),
            TestMethod::PairedBootInputs => Some(BootMethod::BootInputs),
            TestMethod::PairedBootBoth => Some(BootMethod::BootBoth),
            _ => None,
        }
    }

    pub fn is_randomized(self) -> bool {
        self != TestMethod::Williams
    }
}

impl From<PermMethod> for TestMethod {
    fn from(m: PermMethod) -> Self {
        match m {
            PermMethod::PermSystems => TestMethod::PermSystems,
            PermMethod::PermInputs => TestMethod::PermInputs,
            PermMethod::PermBoth => TestMethod::PermBoth,
        }
    }
}

impl fmt::Display for TestMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestMethod::Williams => "williams",
            TestMethod::PermSystems => "perm-systems",
            TestMethod::PermInputs => "perm-inputs",
            TestMethod::PermBoth => "perm-both",
            TestMethod::PairedBootSystems => "paired-boot-systems",
            TestMethod::PairedBootInputs => "paired-boot-inputs",
            TestMethod::PairedBootBoth => "paired-boot-both",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Count permutations with a strictly larger difference.
    #[default]
    Strict,
    /// Also count permutations that tie the observed difference.
    Inclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub p_value: f64,
    /// Observed `r(X, Z) - r(Y, Z)`.
    pub delta: f64,
    pub method: TestMethod,
    pub resamples: Option<usize>,
    pub seed: Option<u64>,
    pub tie_policy: Option<TiePolicy>,
    pub degenerate_resamples: usize,
    /// Williams' t statistic.
    pub statistic: Option<f64>,
    /// Set for summary-level Williams' tests, whose validity is unclear.
    pub experimental: bool,
}

impl TestResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Subtracts the mean of all cells and divides by their population standard
/// deviation.
pub fn standardize(x: &ScoreMatrix) -> Result<ScoreMatrix> {
    let v = x.values();
    let n = v.len() as f64;
    if v.iter().all(|&a| a == v[0]) {
        return Err(Error::InvalidArgument(format!(
            "cannot standardize constant matrix {:?}",
            x.metric()
        )));
    }
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    x.with_values(v.iter().map(|a| (a - mean) / sd).collect())
}

fn draw_coins(method: PermMethod, n: usize, m: usize, stream: &mut RngStream, coins: &mut Vec<bool>) {
    let count = match method {
        PermMethod::PermSystems => n,
        PermMethod::PermInputs => m,
        PermMethod::PermBoth => n * m,
    };
    coins.clear();
    coins.extend((0..count).map(|_| stream.fair_coin()));
}

fn apply_swaps(
    method: PermMethod,
    x: &[f64],
    y: &[f64],
    m: usize,
    coins: &[bool],
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
) {
    xs.clear();
    ys.clear();
    for (cell, (&a, &b)) in x.iter().zip(y).enumerate() {
        let swap = match method {
            PermMethod::PermSystems => coins[cell / m],
            PermMethod::PermInputs => coins[cell % m],
            PermMethod::PermBoth => coins[cell],
        };
        if swap {
            xs.push(b);
            ys.push(a);
        } else {
            xs.push(a);
            ys.push(b);
        }
    }
}

/// One random exchange of scores between X and Y.
pub fn perm_sample(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    method: PermMethod,
    stream: &mut RngStream,
) -> Result<(ScoreMatrix, ScoreMatrix)> {
    ensure_aligned(x, y)?;
    let mut coins = Vec::new();
    draw_coins(method, x.n_systems(), x.n_inputs(), stream, &mut coins);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    apply_swaps(method, x.values(), y.values(), x.n_inputs(), &coins, &mut xs, &mut ys);
    Ok((x.with_values(xs)?, y.with_values(ys)?))
}

fn check_resamples(k: usize) -> Result<()> {
    if k < MIN_RESAMPLES {
        Err(Error::InvalidArgument(format!(
            "at least {MIN_RESAMPLES} resamples are required, got {k}"
        )))
    } else {
        Ok(())
    }
}

fn observed_delta(x: &ScoreMatrix, y: &ScoreMatrix, z: &ScoreMatrix, spec: CorrelationSpec) -> Result<f64> {
    ensure_aligned(x, z)?;
    ensure_aligned(y, z)?;
    Ok(correlate(x, z, spec)?.require()? - correlate(y, z, spec)?.require()?)
}

#[inline]
fn delta_on_values(spec: CorrelationSpec, x: &[f64], y: &[f64], z: &[f64], n: usize, m: usize) -> Option<f64> {
    let rx = level_on_values(spec, x, z, n, m).0?;
    let ry = level_on_values(spec, y, z, n, m).0?;
    Some(rx - ry)
}

fn proportion(hits: usize, defined: usize, k: usize) -> Result<f64> {
    if defined == 0 {
        Err(Error::AllResamplesDegenerate(k))
    } else {
        Ok(hits as f64 / defined as f64)
    }
}

/// Approximate randomization test; iteration `i` uses `RngStream::new(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn permutation_test(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    z: &ScoreMatrix,
    method: PermMethod,
    spec: CorrelationSpec,
    k: usize,
    seed: u64,
    tie_policy: TiePolicy,
) -> Result<TestResult> {
    check_resamples(k)?;
    let xstd = standardize(x)?;
    let ystd = standardize(y)?;
    let delta = observed_delta(&xstd, &ystd, z, spec)?;
    let (n, m) = (x.n_systems(), x.n_inputs());
    let outcomes: Vec<Option<bool>> = (0..k as u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new()),
            |(coins, xs, ys), i| {
                let mut stream = RngStream::new(seed, i);
                draw_coins(method, n, m, &mut stream, coins);
                apply_swaps(method, xstd.values(), ystd.values(), m, coins, xs, ys);
                let ds = delta_on_values(spec, xs, ys, z.values(), n, m)?;
                Some(match tie_policy {
                    TiePolicy::Strict => ds > delta,
                    TiePolicy::Inclusive => ds >= delta,
                })
            },
        )
        .collect();
    let defined = outcomes.iter().flatten().count();
    let hits = outcomes.iter().flatten().filter(|&&b| b).count();
    Ok(TestResult {
        p_value: proportion(hits, defined, k)?,
        delta,
        method: method.into(),
        resamples: Some(k),
        seed: Some(seed),
        tie_policy: Some(tie_policy),
        degenerate_resamples: k - defined,
        statistic: None,
        experimental: false,
    })
}

const DETERMINANT_TOLERANCE: f64 = 1e-9;

/// Williams' t-test for two dependent correlations sharing Z.
pub fn williams_test(r_xz: f64, r_yz: f64, r_xy: f64, n: usize) -> Result<TestResult> {
    if n <= 3 {
        return Err(Error::InvalidArgument(format!(
            "Williams' test needs n >= 4, got {n}"
        )));
    }
    for r in [r_xz, r_yz, r_xy] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("correlation {r} outside [-1, 1]")));
        }
    }
    let k = 1.0 - r_xz * r_xz - r_yz * r_yz - r_xy * r_xy + 2.0 * r_xz * r_yz * r_xy;
    if k < -DETERMINANT_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "correlations ({r_xz}, {r_yz}, {r_xy}) do not form a valid correlation matrix"
        )));
    }
    let k = k.max(0.0);
    let nf = n as f64;
    let numerator = (r_xz - r_yz) * ((nf - 1.0) * (1.0 + r_xy)).sqrt();
    let t = if numerator == 0.0 {
        0.0
    } else {
        let denom = (2.0 * k * (nf - 1.0) / (nf - 3.0)
            + (r_xz + r_yz).powi(2) / 4.0 * (1.0 - r_xy).powi(3))
        .sqrt();
        if denom == 0.0 {
            return Err(Error::InvalidArgument(
                "degenerate correlation triple: Williams' statistic is undefined".into(),
            ));
        }
        numerator / denom
    };
    Ok(TestResult {
        p_value: student_t_sf(t, nf - 3.0)?,
        delta: r_xz - r_yz,
        method: TestMethod::Williams,
        resamples: None,
        seed: None,
        tie_policy: None,
        degenerate_resamples: 0,
        statistic: Some(t),
        experimental: false,
    })
}

/// Williams' test on level correlations of three matrices with `n` = number
/// of systems. Summary-level results are marked experimental.
pub fn williams_from_matrices(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    z: &ScoreMatrix,
    spec: CorrelationSpec,
) -> Result<TestResult> {
    ensure_aligned(x, z)?;
    ensure_aligned(y, z)?;
    let r_xz = correlate(x, z, spec)?.require()?;
    let r_yz = correlate(y, z, spec)?.require()?;
    let r_xy = correlate(x, y, spec)?.require()?;
    let mut result = williams_test(r_xz, r_yz, r_xy, x.n_systems())?;
    result.experimental = spec.level == Level::Summary;
    Ok(result)
}

/// Paired bootstrap test; iteration `i` uses `RngStream::new(seed, i)`.
pub fn paired_bootstrap_test(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    z: &ScoreMatrix,
    method: BootMethod,
    spec: CorrelationSpec,
    k: usize,
    seed: u64,
) -> Result<TestResult> {
    check_resamples(k)?;
    let delta = observed_delta(x, y, z, spec)?;
    let (n, m) = (x.n_systems(), x.n_inputs());
    let outcomes: Vec<Option<bool>> = (0..k as u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), Vec::new()),
            |(xs, ys, zs), i| {
                let mut stream = RngStream::new(seed, i);
                let idx = boot_indices(method, n, m, &mut stream);
                gather(x.values(), m, &idx, xs);
                gather(y.values(), m, &idx, ys);
                gather(z.values(), m, &idx, zs);
                delta_on_values(spec, xs, ys, zs, n, m).map(|ds| ds <= 0.0)
            },
        )
        .collect();
    let defined = outcomes.iter().flatten().count();
    let hits = outcomes.iter().flatten().filter(|&&b| b).count();
    let method = match method {
        BootMethod::BootSystems => TestMethod::PairedBootSystems,
        BootMethod::BootInputs => TestMethod::PairedBootInputs,
        BootMethod::BootBoth => TestMethod::PairedBootBoth,
    };
    Ok(TestResult {
        p_value: proportion(hits, defined, k)?,
        delta,
        method,
        resamples: Some(k),
        seed: Some(seed),
        tie_policy: None,
        degenerate_resamples: k - defined,
        statistic: None,
        experimental: false,
    })
}

/// Runs any of the supported tests of `rho(X, Z) > rho(Y, Z)`.
#[allow(clippy::too_many_arguments)]
pub fn run_test(
    x: &ScoreMatrix,
    y: &ScoreMatrix,
    z: &ScoreMatrix,
    method: TestMethod,
    spec: CorrelationSpec,
    k: usize,
    seed: u64,
    tie_policy: TiePolicy,
) -> Result<TestResult> {
    if let Some(p) = method.perm_method() {
        permutation_test(x, y, z, p, spec, k, seed, tie_policy)
    } else if let Some(b) = method.boot_method() {
        paired_bootstrap_test(x, y, z, b, spec, k, seed)
    } else {
        williams_from_matrices(x, y, z, spec)
    }
}

/// Raw and Bonferroni-corrected decision for one test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BonferroniDecision {
    pub raw_significant: bool,
    pub corrected_significant: bool,
    /// `alpha / m` for the test's group of size `m`.
    pub threshold: f64,
}

/// Bonferroni correction applied separately within each group. `groups` must
/// partition `0..p_values.len()`.
pub fn bonferroni_reject(p_values: &[f64], alpha: f64, groups: &[Vec<usize>]) -> Result<Vec<BonferroniDecision>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0, 1]")));
    }
    let mut threshold = vec![None; p_values.len()];
    for group in groups {
        if group.is_empty() {
            return Err(Error::InvalidArgument("empty Bonferroni group".into()));
        }
        let t = alpha / group.len() as f64;
        for &i in group {
            match threshold.get_mut(i) {
                Some(slot @ None) => *slot = Some(t),
                Some(Some(_)) => {
                    return Err(Error::InvalidArgument(format!("test {i} appears in two groups")))
                }
                None => return Err(Error::InvalidArgument(format!("group references unknown test {i}"))),
            }
        }
    }
    p_values
        .iter()
        .zip(threshold)
        .enumerate()
        .map(|(i, (&p, t))| {
            let t = t.ok_or_else(|| Error::InvalidArgument(format!("test {i} is in no group")))?;
            Ok(BonferroniDecision {
                raw_significant: p < alpha,
                corrected_significant: p < t,
                threshold: t,
            })
        })
        .collect()
}
