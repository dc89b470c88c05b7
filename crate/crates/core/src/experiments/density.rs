//! Decay of the cluster density of coalescing walks started from every site.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{experiment_error, ExperimentReport};
use super::stats::{batched, linear_fit};
use super::seed_list;
use crate::error::{argument, Result};
use crate::walkers::{coalescing_density, Kernel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    pub alpha: f64,
    /// half-width of the counted core `[-L, L]`
    #[serde(rename = "L")]
    pub l: usize,
    pub times: Vec<usize>,
    /// kernel truncation for `alpha < 2`
    pub radius: usize,
    /// sites beyond the core; defaults to the kernel radius plus a margin
    pub buffer: Option<usize>,
    pub seed: u64,
    pub seeds: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            alpha: 2.0,
            l: 100_000,
            times: vec![100, 200, 500, 1000, 2000, 5000, 10_000],
            radius: 1000,
            buffer: None,
            seed: 1,
            seeds: 50,
        }
    }
}

/// Mean density at each time with a log-log fit over the positive times.
pub fn density_scan(alpha: f64, l: usize, times: &[usize], seeds: &[u64]) -> Result<ExperimentReport> {
    let cfg = DensityConfig {
        alpha,
        l,
        times: times.to_vec(),
        ..DensityConfig::default()
    };
    run(&cfg, seeds)
}

pub fn density_scan_with(cfg: &DensityConfig) -> Result<ExperimentReport> {
    run(cfg, &seed_list(cfg.seed, cfg.seeds))
}

fn run(cfg: &DensityConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    if cfg.times.is_empty() || cfg.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(argument("times must be nonempty and increasing"));
    }
    if seeds.is_empty() {
        return Err(argument("need at least one seed"));
    }
    let kernel = Kernel::new(cfg.alpha, if cfg.alpha == 2.0 { 1 } else { cfg.radius })?;
    let buffer = cfg.buffer.unwrap_or_else(|| default_buffer(&kernel, *cfg.times.last().unwrap()));
    let runs: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| coalescing_density(&kernel, cfg.l, buffer, &cfg.times, s))
        .collect::<Result<_>>()?;

    let mut rep = ExperimentReport::new("density_scan");
    rep.param("alpha", cfg.alpha);
    rep.param("L", cfg.l);
    rep.param("buffer", buffer);
    rep.param("radius", kernel.radius());
    rep.param("times", &cfg.times);
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, &t) in cfg.times.iter().enumerate() {
        let col: Vec<f64> = runs.iter().map(|r| r[k]).collect();
        let (m, se) = batched(&col);
        rep.push(format!("t={t}"), "density", m, Some(se));
        if t > 0 {
            if !(m > 0.0) {
                return Err(experiment_error(format!("core empty at time {t}")));
            }
            xs.push((t as f64).ln());
            ys.push(m.ln());
        }
    }
    rep.fit = linear_fit(&xs, &ys);
    rep.push(format!("alpha={}", cfg.alpha), "predicted_slope", -1.0 / cfg.alpha, None);
    Ok(rep)
}

/// Room for the walkers that can reach the core: the kernel radius plus
/// five typical displacements over the run.
fn default_buffer(kernel: &Kernel, t_max: usize) -> usize {
    let spread = (t_max.max(1) as f64).powf(1.0 / kernel.alpha());
    kernel.radius() + (5.0 * spread).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_occupancy_at_time_zero() {
        let r = density_scan(2.0, 50, &[0, 10], &[1, 2, 3]).unwrap();
        let e = r.get("t=0", "density").unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.stderr, Some(0.0));
    }

    #[test]
    fn rejects_unordered_times() {
        assert!(density_scan(2.0, 10, &[5, 5], &[1]).is_err());
        assert!(density_scan(2.0, 10, &[], &[1]).is_err());
    }

    #[test]
    fn brownian_slope_small_scale() {
        // coarse version of the headline run: slope near -1/2
        let seeds: Vec<u64> = (0..20).collect();
        let r = density_scan(2.0, 3000, &[50, 100, 200, 400, 800], &seeds).unwrap();
        let f = r.fit.unwrap();
        assert!((f.slope + 0.5).abs() < 0.06, "slope {}", f.slope);
    }

    #[test]
    fn reproducible() {
        let a = density_scan(1.5, 200, &[1, 10, 40], &[4, 5]).unwrap();
        let b = density_scan(1.5, 200, &[1, 10, 40], &[4, 5]).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
