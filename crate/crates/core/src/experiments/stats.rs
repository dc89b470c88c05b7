//! Small statistics helpers shared by the experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of batches used for standard errors when enough seeds exist.
pub const BATCHES: usize = 20;

/// Mean of per-seed values and its standard error from contiguous batches.
///
/// With fewer than [`BATCHES`] values every value is its own batch.
pub fn batched(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = n.min(BATCHES);
    if b < 2 {
        return (mean, f64::NAN);
    }
    // batch i holds values[lo_i .. lo_{i+1}], sizes differ by at most one
    let mut acc = 0.0;
    for i in 0..b {
        let (lo, hi) = (i * n / b, (i + 1) * n / b);
        let w = (hi - lo) as f64 / n as f64;
        let m = values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        acc += w * w * (m - mean).powi(2);
    }
    (mean, (acc * b as f64 / (b - 1) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(Fit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Percentile bootstrap of a statistic over replicate indices.
pub fn bootstrap<F>(replicates: usize, resamples: usize, seed: u64, level: f64, stat: F) -> (f64, f64)
where
    F: Fn(&[usize]) -> Option<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; replicates];
    for _ in 0..resamples {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..replicates);
        }
        if let Some(s) = stat(&idx) {
            if s.is_finite() {
                vals.push(s);
            }
        }
    }
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    vals.sort_by(f64::total_cmp);
    let q = |p: f64| vals[((p * (vals.len() - 1) as f64).round() as usize).min(vals.len() - 1)];
    let a = (1.0 - level) / 2.0;
    (q(a), q(1.0 - a))
}
