//! Deterministic random streams and the distribution kernels used by the
//! statistical routines.
//!
//! # Stream derivation
//!
//! Every resample iteration, trial or worker draws from its own
//! [`RngStream`], identified by `(seed, stream_index)`. The generator state is
//! derived as follows, so any implementation can reproduce the exact draws:
//!
//! 1. `key = mix64(seed ^ mix64(stream_index + 0x9E3779B97F4A7C15))`
//!    (wrapping add), where `mix64` is the SplitMix64 finalizer
//!    `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)`.
//! 2. A SplitMix64 generator started at `key` (increment
//!    `0x9E3779B97F4A7C15`, output = `mix64(state)` after incrementing)
//!    produces four words that become the xoshiro256** state `s[0..4]`.
//! 3. Draws are xoshiro256** outputs: `rotl(s[1] * 5, 7) * 9`.
//!
//! Derived quantities:
//! - `uniform_index(n)`: Lemire's multiply-shift with rejection. With
//!   `x` a fresh 64-bit word, `m = x * n` as 128-bit; if `low64(m) < (2^64 - n) mod n`
//!   draw again; result is `high64(m)`.
//! - `fair_coin()`: the top bit of one 64-bit word.
//! - `unit_open()`: `((x >> 11) + 1) * 2^-53`, in `(0, 1]`.
//! - `standard_normal()`: Box-Muller cosine branch,
//!   `sqrt(-2 ln u1) * cos(2 pi u2)` with `u1 = unit_open()`, `u2 = unit_open()`.

#![allow(clippy::excessive_precision)]

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index. Used to give nested
/// loops (trials containing resamples) independent seed spaces.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ GOLDEN_GAMMA).wrapping_add(mix64(index.wrapping_mul(GOLDEN_GAMMA))))
}

/// A reproducible random stream keyed by `(seed, stream_index)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: Xoshiro256StarStar,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let key = mix64(seed ^ mix64(stream_index.wrapping_add(GOLDEN_GAMMA)));
        RngStream {
            seed,
            stream_index,
            rng: Xoshiro256StarStar::seed_from_u64(key),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Unbiased integer in `[0, n)`.
    pub fn uniform_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "uniform_index requires n >= 1".into(),
            ));
        }
        Ok(self.index_below(n))
    }

    #[inline]
    pub(crate) fn index_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let n = n as u64;
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
                low = m as u64;
            }
        }
        (m >> 64) as usize
    }

    #[inline]
    pub fn fair_coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Uniform real in `(0, 1]` with 53 bits of resolution.
    #[inline]
    pub fn unit_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.unit_open();
        let u2 = self.unit_open();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, stdev: f64) -> f64 {
        mean + stdev * self.standard_normal()
    }

    /// Fisher-Yates shuffle driven by [`RngStream::index_below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index_below(i + 1);
            items.swap(i, j);
        }
    }
}

// Coefficients of Wichura's AS241 (PPND16).
const A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline]
fn ratio(num: &[f64; 8], den: &[f64; 8], x: f64) -> f64 {
    let n = num.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let d = den.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    n / d
}

/// Inverse of the standard normal CDF (AS241, about 1e-16 relative accuracy).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "normal_quantile requires 0 < p < 1, got {p}"
        )));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * ratio(&A, &B, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        ratio(&C, &D, r)
    } else {
        r -= 5.0;
        ratio(&E, &F, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if df <= 0.0 || !df.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "student_t_sf requires df > 0, got {df}"
        )));
    }
    if t.is_nan() {
        return Err(Error::InvalidArgument("student_t_sf got NaN t".into()));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let x = df / (df + t * t);
    let tail = 0.5 * statrs::function::beta::beta_reg(0.5 * df, 0.5, x);
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}
