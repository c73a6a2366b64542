//! Confidence intervals for correlation levels.
//!
//! Two families are provided: the Fisher transformation, and percentile
//! bootstrap intervals built by resampling the score matrices. The bootstrap
//! can resample systems (rows), inputs (columns) or both; in every case the
//! same indices are applied to both matrices so that cells stay paired.
//!
//! Percentiles use linear interpolation between order statistics: for `s`
//! sorted samples the `q`-quantile sits at fractional rank `q * (s - 1)`.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correl::{correlate, level_on_values, Coefficient, CorrelationSpec, Level};
use crate::error::{Error, Result};
use crate::numerics::{normal_quantile, RngStream};
use crate::scores::{ensure_aligned, ScoreMatrix};

/// Smallest accepted number of bootstrap resamples.
pub const MIN_RESAMPLES: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootMethod {
    BootSystems,
    BootInputs,
    BootBoth,
}

impl BootMethod {
    pub const ALL: [BootMethod; 3] = [BootMethod::BootSystems, BootMethod::BootInputs, BootMethod::BootBoth];
}

impl fmt::Display for BootMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BootMethod::BootSystems => "boot-systems",
            BootMethod::BootInputs => "boot-inputs",
            BootMethod::BootBoth => "boot-both",
        })
    }
}

/// How a confidence interval was computed. `FisherSummary` marks the Fisher
/// transformation applied to an averaged summary-level correlation, which is
/// not itself a correlation coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Fisher,
    FisherSummary,
    BootSystems,
    BootInputs,
    BootBoth,
}

impl CiMethod {
    pub fn boot_method(self) -> Option<BootMethod> {
        match self {
            CiMethod::BootSystems => Some(BootMethod::BootSystems),
            CiMethod::BootInputs => Some(BootMethod::BootInputs),
            CiMethod::BootBoth => Some(BootMethod::BootBoth),
            CiMethod::Fisher | CiMethod::FisherSummary => None,
        }
    }
}

impl From<BootMethod> for CiMethod {
    fn from(m: BootMethod) -> Self {
        match m {
            BootMethod::BootSystems => CiMethod::BootSystems,
            BootMethod::BootInputs => CiMethod::BootInputs,
            BootMethod::BootBoth => CiMethod::BootBoth,
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.boot_method() {
            Some(b) => b.fmt(f),
            None if *self == CiMethod::Fisher => f.write_str("fisher"),
            None => f.write_str("fisher-summary"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub point: f64,
    pub method: CiMethod,
    /// Bootstrap resamples requested (0 for Fisher).
    pub resamples: usize,
    pub seed: Option<u64>,
    pub degenerate_resamples: usize,
}

impl ConfidenceInterval {
    pub fn contains(&self, r: f64) -> bool {
        self.lower <= r && r <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Offset `b` and scale `c` of the Fisher standard error `c / sqrt(n - b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherConstants {
    pub b: u32,
    pub c: f64,
}

impl FisherConstants {
    pub fn for_coefficient(coef: Coefficient, r: f64) -> Self {
        match coef {
            Coefficient::Pearson => FisherConstants { b: 3, c: 1.0 },
            Coefficient::Spearman => FisherConstants {
                b: 3,
                c: (1.0 + r * r / 2.0).sqrt(),
            },
            Coefficient::Kendall => FisherConstants {
                b: 4,
                c: 0.437_f64.sqrt(),
            },
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// Fisher-transformation interval for a correlation `r` over `n` observations.
pub fn fisher_ci(r: f64, n: usize, coef: Coefficient, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if !r.is_finite() || r.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "Fisher interval needs |r| < 1, got {r}; use a bootstrap interval instead"
        )));
    }
    let FisherConstants { b, c } = FisherConstants::for_coefficient(coef, r);
    if n <= b as usize {
        return Err(Error::InvalidArgument(format!(
            "Fisher interval for {coef} needs n > {b}, got {n}"
        )));
    }
    let zr = r.atanh();
    let half = normal_quantile(1.0 - alpha / 2.0)? * c / ((n - b as usize) as f64).sqrt();
    Ok(ConfidenceInterval {
        lower: (zr - half).tanh(),
        upper: (zr + half).tanh(),
        alpha,
        point: r,
        method: CiMethod::Fisher,
        resamples: 0,
        seed: None,
        degenerate_resamples: 0,
    })
}

/// Fisher interval for a level correlation of two matrices, with `n` = number
/// of systems. At the summary level the result is tagged `FisherSummary`.
pub fn fisher_ci_for(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    spec: CorrelationSpec,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    let r = correlate(x, z, spec)?.require()?;
    let mut ci = fisher_ci(r, x.n_systems(), spec.coefficient, alpha)?;
    if spec.level == Level::Summary {
        ci.method = CiMethod::FisherSummary;
    }
    Ok(ci)
}

/// Row and column indices selected by one bootstrap draw.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootIndices {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Draws resample indices. Rows are drawn before columns; an axis that is not
/// resampled keeps the identity order and consumes no randomness.
pub fn boot_indices(method: BootMethod, n: usize, m: usize, stream: &mut RngStream) -> BootIndices {
    let mut draw = |len: usize, resample: bool| -> Vec<usize> {
        if resample {
            (0..len).map(|_| stream.index_below(len)).collect()
        } else {
            (0..len).collect()
        }
    };
    let rows = draw(n, method != BootMethod::BootInputs);
    let cols = draw(m, method != BootMethod::BootSystems);
    BootIndices { rows, cols }
}

pub(crate) fn gather(values: &[f64], m: usize, idx: &BootIndices, out: &mut Vec<f64>) {
    out.clear();
    for &i in &idx.rows {
        let row = &values[i * m..(i + 1) * m];
        out.extend(idx.cols.iter().map(|&j| row[j]));
    }
}

/// Resamples a pair of aligned matrices with shared indices.
pub fn boot_sample(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    method: BootMethod,
    stream: &mut RngStream,
) -> Result<(ScoreMatrix, ScoreMatrix)> {
    ensure_aligned(x, z)?;
    let idx = boot_indices(method, x.n_systems(), x.n_inputs(), stream);
    Ok((x.select(&idx.rows, &idx.cols)?, z.select(&idx.rows, &idx.cols)?))
}

/// Bootstrap replicates of a level correlation, in iteration order.
#[derive(Clone, Debug, PartialEq)]
pub struct BootDistribution {
    /// One entry per iteration; `None` marks a degenerate resample.
    pub replicates: Vec<Option<f64>>,
}

impl BootDistribution {
    pub fn defined(&self) -> Vec<f64> {
        self.replicates.iter().flatten().copied().collect()
    }

    pub fn degenerate(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_none()).count()
    }
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

/// Iteration `i` draws from `RngStream::new(seed, i)`.
pub fn bootstrap_distribution(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    method: BootMethod,
    spec: CorrelationSpec,
    k: usize,
    seed: u64,
) -> Result<BootDistribution> {
    ensure_aligned(x, z)?;
    let (n, m) = (x.n_systems(), x.n_inputs());
    let replicates = (0..k as u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(xs, zs), i| {
                let mut stream = RngStream::new(seed, i);
                let idx = boot_indices(method, n, m, &mut stream);
                gather(x.values(), m, &idx, xs);
                gather(z.values(), m, &idx, zs);
                level_on_values(spec, xs, zs, n, m).0
            },
        )
        .collect();
    Ok(BootDistribution { replicates })
}

/// Linear-interpolation percentile of already sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
    }
}

/// Percentile bootstrap interval. Degenerate resamples are dropped and
/// counted, never redrawn.
pub fn bootstrap_ci(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    method: BootMethod,
    spec: CorrelationSpec,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceInterval> {
    check_resamples(k)?;
    check_alpha(alpha)?;
    let point = correlate(x, z, spec)?.require()?;
    let dist = bootstrap_distribution(x, z, method, spec, k, seed)?;
    interval_from_distribution(&dist, point, method, k, alpha, seed)
}

pub(crate) fn interval_from_distribution(
    dist: &BootDistribution,
    point: f64,
    method: BootMethod,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceInterval> {
    let mut samples = dist.defined();
    if samples.is_empty() {
        return Err(Error::AllResamplesDegenerate(k));
    }
    samples.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        lower: percentile(&samples, alpha / 2.0),
        upper: percentile(&samples, 1.0 - alpha / 2.0),
        alpha,
        point,
        method: method.into(),
        resamples: k,
        seed: Some(seed),
        degenerate_resamples: k - samples.len(),
    })
}

/// Fisher or bootstrap interval depending on `method`.
pub fn confidence_interval(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    method: CiMethod,
    spec: CorrelationSpec,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceInterval> {
    match method.boot_method() {
        Some(b) => bootstrap_ci(x, z, b, spec, k, alpha, seed),
        None => fisher_ci_for(x, z, spec, alpha),
    }
}
