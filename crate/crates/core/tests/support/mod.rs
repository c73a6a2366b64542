//! Naive reference implementations used as test oracles. Written for
//! clarity, not speed, and sharing no code with the library.
#![allow(dead_code)]

use metricconf::correl::Coefficient;
use metricconf::numerics::RngStream;

pub type Grid = Vec<Vec<f64>>;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if is_constant(x) || is_constant(y) {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Average ranks, 1-based.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let below = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Kendall's tau-b from explicit pair classification.
pub fn kendall(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1.0;
            }
            if dy == 0.0 {
                tie_y += 1.0;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1.0;
                } else {
                    discordant += 1.0;
                }
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let denom = ((pairs - tie_x) * (pairs - tie_y)).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some(((concordant - discordant) / denom).clamp(-1.0, 1.0))
    }
}

pub fn coef(c: Coefficient, x: &[f64], y: &[f64]) -> Option<f64> {
    match c {
        Coefficient::Pearson => pearson(x, y),
        Coefficient::Spearman => spearman(x, y),
        Coefficient::Kendall => kendall(x, y),
    }
}

pub fn system_level(x: &Grid, z: &Grid, c: Coefficient) -> Option<f64> {
    let xm: Vec<f64> = x.iter().map(|r| mean(r)).collect();
    let zm: Vec<f64> = z.iter().map(|r| mean(r)).collect();
    coef(c, &xm, &zm)
}

/// Mean of the defined per-input correlations; `None` if none is defined,
/// or if any is undefined when `propagate` is set.
pub fn summary_level(x: &Grid, z: &Grid, c: Coefficient, propagate: bool) -> Option<f64> {
    let m = x[0].len();
    let mut defined = Vec::new();
    for j in 0..m {
        let xc: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let zc: Vec<f64> = z.iter().map(|r| r[j]).collect();
        match coef(c, &xc, &zc) {
            Some(r) => defined.push(r),
            None if propagate => return None,
            None => {}
        }
    }
    if defined.is_empty() {
        None
    } else {
        Some(mean(&defined))
    }
}

pub fn level(x: &Grid, z: &Grid, c: Coefficient, system: bool) -> Option<f64> {
    if system {
        system_level(x, z, c)
    } else {
        summary_level(x, z, c, false)
    }
}

pub fn select(g: &Grid, rows: &[usize], cols: &[usize]) -> Grid {
    rows.iter().map(|&i| cols.iter().map(|&j| g[i][j]).collect()).collect()
}

/// Every index tuple of length `len` over `0..len`.
pub fn all_tuples(len: usize) -> Vec<Vec<usize>> {
    let total = len.pow(len as u32);
    (0..total)
        .map(|mut code| {
            (0..len)
                .map(|_| {
                    let d = code % len;
                    code /= len;
                    d
                })
                .collect()
        })
        .collect()
}

/// Exact bootstrap distribution: every equally likely (rows, cols) draw and
/// its replicate, `None` when degenerate.
pub fn exact_bootstrap(x: &Grid, z: &Grid, resample_rows: bool, resample_cols: bool, c: Coefficient, system: bool) -> Vec<Option<f64>> {
    let (n, m) = (x.len(), x[0].len());
    let rows = if resample_rows { all_tuples(n) } else { vec![(0..n).collect()] };
    let cols = if resample_cols { all_tuples(m) } else { vec![(0..m).collect()] };
    let mut out = Vec::new();
    for r in &rows {
        for cl in &cols {
            out.push(level(&select(x, r, cl), &select(z, r, cl), c, system));
        }
    }
    out
}

/// Exact q-quantile (left-continuous inverse CDF) of equally weighted atoms.
pub fn exact_quantile(atoms: &[f64], q: f64) -> f64 {
    let mut s = atoms.to_vec();
    s.sort_by(f64::total_cmp);
    let q = q.clamp(0.0, 1.0);
    let idx = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
    s[idx]
}

fn standardized(g: &Grid) -> Grid {
    let cells: Vec<f64> = g.iter().flatten().copied().collect();
    let mu = mean(&cells);
    let sd = (cells.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / cells.len() as f64).sqrt();
    g.iter().map(|r| r.iter().map(|a| (a - mu) / sd).collect()).collect()
}

/// Exact cell-swap permutation p-value: every one of the `2^(n m)` swap
/// patterns is equally likely.
pub fn exact_perm_both_p(x: &Grid, y: &Grid, z: &Grid, c: Coefficient, system: bool, inclusive: bool) -> f64 {
    let (xs, ys) = (standardized(x), standardized(y));
    let delta = level(&xs, z, c, system).unwrap() - level(&ys, z, c, system).unwrap();
    let (n, m) = (x.len(), x[0].len());
    let (mut hits, mut defined) = (0usize, 0usize);
    for pattern in 0u32..(1 << (n * m)) {
        let mut a = xs.clone();
        let mut b = ys.clone();
        for i in 0..n {
            for j in 0..m {
                if pattern >> (i * m + j) & 1 == 1 {
                    std::mem::swap(&mut a[i][j], &mut b[i][j]);
                }
            }
        }
        if let (Some(ra), Some(rb)) = (level(&a, z, c, system), level(&b, z, c, system)) {
            defined += 1;
            let ds = ra - rb;
            if ds > delta || (inclusive && ds == delta) {
                hits += 1;
            }
        }
    }
    hits as f64 / defined as f64
}

/// Random grid; with `ties` the cells are small integers.
pub fn random_grid(stream: &mut RngStream, n: usize, m: usize, ties: bool) -> Grid {
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if ties {
                        stream.uniform_index(4).unwrap() as f64
                    } else {
                        stream.normal(0.0, 1.0)
                    }
                })
                .collect()
        })
        .collect()
}
