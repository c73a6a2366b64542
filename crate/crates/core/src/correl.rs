//! Correlation coefficients and the system/summary correlation levels.
//!
//! System level correlates per-system mean scores (averaged over inputs).
//! Summary level computes the correlation across systems separately for each
//! input and takes the arithmetic mean over inputs.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{ensure_aligned, ScoreMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    Pearson,
    Spearman,
    Kendall,
}

impl Coefficient {
    pub const ALL: [Coefficient; 3] = [Coefficient::Pearson, Coefficient::Spearman, Coefficient::Kendall];
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coefficient::Pearson => "pearson",
            Coefficient::Spearman => "spearman",
            Coefficient::Kendall => "kendall",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    System,
    Summary,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::System, Level::Summary];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::System => "sys",
            Level::Summary => "sum",
        })
    }
}

/// Handling of inputs whose per-input correlation is undefined (a constant
/// column) at the summary level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedPolicy {
    /// Average the defined columns and report how many were skipped.
    #[default]
    Skip,
    /// Any undefined column makes the whole correlation undefined.
    Propagate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub level: Level,
    pub coefficient: Coefficient,
    #[serde(default)]
    pub undefined: UndefinedPolicy,
}

impl CorrelationSpec {
    pub fn new(level: Level, coefficient: Coefficient) -> Self {
        CorrelationSpec {
            level,
            coefficient,
            undefined: UndefinedPolicy::Skip,
        }
    }
}

impl fmt::Display for CorrelationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.level, self.coefficient)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    /// `None` when the correlation is undefined.
    pub value: Option<f64>,
    pub level: Level,
    pub coefficient: Coefficient,
    /// Inputs skipped because their correlation was undefined (summary level).
    pub skipped_inputs: usize,
}

impl CorrelationResult {
    pub fn require(&self) -> Result<f64> {
        self.value.ok_or_else(|| {
            Error::UndefinedCorrelation(format!(
                "{}-level {} correlation has zero variance",
                self.level, self.coefficient
            ))
        })
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs at least 2 observations".into(),
        ));
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    if is_constant(x) || is_constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some((sxy / denom).clamp(-1.0, 1.0))
}

/// Product-moment correlation; `None` when either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(x, y))
}

/// 1-based ranks; tied values share the mean of their rank block.
pub fn rank_with_ties(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

fn spearman_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_unchecked(&rank_with_ties(x), &rank_with_ties(y))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    Ok(spearman_unchecked(x, y))
}

fn kendall_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let nx = pairs - tied_x;
    let ny = pairs - tied_y;
    if nx == 0 || ny == 0 {
        return None;
    }
    let tau = (concordant - discordant) as f64 / ((nx as f64) * (ny as f64)).sqrt();
    Some(tau.clamp(-1.0, 1.0))
}

/// Kendall's tau-b.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    Ok(kendall_unchecked(x, y))
}

pub fn coefficient(coef: Coefficient, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    Ok(coefficient_unchecked(coef, x, y))
}

#[inline]
fn coefficient_unchecked(coef: Coefficient, x: &[f64], y: &[f64]) -> Option<f64> {
    match coef {
        Coefficient::Pearson => pearson_unchecked(x, y),
        Coefficient::Spearman => spearman_unchecked(x, y),
        Coefficient::Kendall => kendall_unchecked(x, y),
    }
}

/// Correlation of the per-system mean scores.
pub fn system_level(x: &ScoreMatrix, z: &ScoreMatrix, coef: Coefficient) -> Result<CorrelationResult> {
    ensure_aligned(x, z)?;
    let (value, _) = level_on_values(
        CorrelationSpec::new(Level::System, coef),
        x.values(),
        z.values(),
        x.n_systems(),
        x.n_inputs(),
    );
    Ok(CorrelationResult {
        value,
        level: Level::System,
        coefficient: coef,
        skipped_inputs: 0,
    })
}

/// Mean over inputs of the per-input correlation across systems.
pub fn summary_level(
    x: &ScoreMatrix,
    z: &ScoreMatrix,
    coef: Coefficient,
    policy: UndefinedPolicy,
) -> Result<CorrelationResult> {
    ensure_aligned(x, z)?;
    let spec = CorrelationSpec {
        level: Level::Summary,
        coefficient: coef,
        undefined: policy,
    };
    let (value, skipped_inputs) =
        level_on_values(spec, x.values(), z.values(), x.n_systems(), x.n_inputs());
    Ok(CorrelationResult {
        value,
        level: Level::Summary,
        coefficient: coef,
        skipped_inputs,
    })
}

pub fn correlate(x: &ScoreMatrix, z: &ScoreMatrix, spec: CorrelationSpec) -> Result<CorrelationResult> {
    match spec.level {
        Level::System => system_level(x, z, spec.coefficient),
        Level::Summary => summary_level(x, z, spec.coefficient, spec.undefined),
    }
}

/// Level correlation on raw row-major `n x m` buffers. Returns the value and
/// the number of skipped inputs.
pub(crate) fn level_on_values(
    spec: CorrelationSpec,
    x: &[f64],
    z: &[f64],
    n: usize,
    m: usize,
) -> (Option<f64>, usize) {
    debug_assert_eq!(x.len(), n * m);
    debug_assert_eq!(z.len(), n * m);
    match spec.level {
        Level::System => {
            let means = |v: &[f64]| -> Vec<f64> {
                v.chunks_exact(m)
                    .map(|row| row.iter().sum::<f64>() / m as f64)
                    .collect()
            };
            (coefficient_unchecked(spec.coefficient, &means(x), &means(z)), 0)
        }
        Level::Summary => {
            let mut cx = vec![0.0; n];
            let mut cz = vec![0.0; n];
            let (mut total, mut defined, mut skipped) = (0.0, 0usize, 0usize);
            for j in 0..m {
                for i in 0..n {
                    cx[i] = x[i * m + j];
                    cz[i] = z[i * m + j];
                }
                match coefficient_unchecked(spec.coefficient, &cx, &cz) {
                    Some(r) => {
                        total += r;
                        defined += 1;
                    }
                    None => {
                        skipped += 1;
                        if spec.undefined == UndefinedPolicy::Propagate {
                            return (None, skipped);
                        }
                    }
                }
            }
            if defined == 0 {
                (None, skipped)
            } else {
                (Some((total / defined as f64).clamp(-1.0, 1.0)), skipped)
            }
        }
    }
}
