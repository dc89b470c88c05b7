//! Few survivors of coalescing walks killed at the ends of an interval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{experiment_error, ExperimentReport};
use super::seed_list;
use super::stats::{batched, linear_fit};
use crate::error::{argument, Result};
use crate::walkers::{survivor_counts, Kernel};

/// Points of a log-probability fit need this many successes.
pub const MIN_SUCCESSES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntervalConfig {
    pub m_values: Vec<usize>,
    pub interval_len: f64,
    pub c_trial: f64,
    /// lattice spacing in units of the interval
    pub spacing: f64,
    pub seed: u64,
    pub seeds: usize,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        IntervalConfig {
            m_values: vec![4, 8, 16, 32],
            interval_len: 1.0,
            c_trial: 2.0,
            spacing: 1.0 / 256.0,
            seed: 1,
            seeds: 10_000,
        }
    }
}

pub fn interval_coalescence(
    m_values: &[usize],
    interval_len: f64,
    c_trial: f64,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let cfg = IntervalConfig {
        m_values: m_values.to_vec(),
        interval_len,
        c_trial,
        ..IntervalConfig::default()
    };
    run(&cfg, seeds)
}

pub fn interval_coalescence_with(cfg: &IntervalConfig) -> Result<ExperimentReport> {
    run(cfg, &seed_list(cfg.seed, cfg.seeds))
}

/// Lattice steps of a lazy walk (variance ½ per step) covering `time`.
fn steps_for(time: f64, spacing: f64) -> usize {
    (2.0 * time / (spacing * spacing)).round().max(1.0) as usize
}

fn run(cfg: &IntervalConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    if cfg.m_values.is_empty() || cfg.m_values.iter().any(|&m| m < 2) {
        return Err(argument("m values must be at least 2"));
    }
    if !(cfg.interval_len > 0.0 && cfg.c_trial > 0.0 && cfg.spacing > 0.0) {
        return Err(argument("interval_len, c_trial and spacing must be positive"));
    }
    if seeds.is_empty() {
        return Err(argument("need at least one seed"));
    }
    let sites = (cfg.interval_len / cfg.spacing).round() as usize;
    let m_max = *cfg.m_values.iter().max().unwrap();
    if sites < 4 * m_max {
        return Err(experiment_error(format!(
            "{sites} lattice sites cannot resolve m = {m_max}; need at least {}",
            4 * m_max
        )));
    }
    let kernel = Kernel::new(2.0, 1)?;
    let time_of = |m: usize| cfg.interval_len.powi(2) / (cfg.c_trial * (m * m) as f64);
    let steps: Vec<usize> = cfg.m_values.iter().map(|&m| steps_for(time_of(m), cfg.spacing)).collect();
    let mut sorted = steps.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let counts: Vec<Vec<usize>> = seeds
        .par_iter()
        .map(|&s| survivor_counts(&kernel, sites, 0..sites, &sorted, s))
        .collect::<Result<_>>()?;

    let mut rep = ExperimentReport::new("interval_coalescence");
    rep.param("m_values", &cfg.m_values);
    rep.param("interval_len", cfg.interval_len);
    rep.param("c_trial", cfg.c_trial);
    rep.param("spacing", cfg.spacing);
    rep.param("sites", sites);
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, &m) in cfg.m_values.iter().enumerate() {
        let col = sorted.binary_search(&steps[k]).unwrap();
        let hits: Vec<f64> = counts.iter().map(|c| (c[col] >= m) as u8 as f64).collect();
        let mean_count: Vec<f64> = counts.iter().map(|c| c[col] as f64).collect();
        let (p, se) = batched(&hits);
        let (mc, mse) = batched(&mean_count);
        rep.push(format!("m={m}"), "p_at_least_m", p, Some(se));
        rep.push(format!("m={m}"), "mean_count", mc, Some(mse));
        rep.push(format!("m={m}"), "time", time_of(m), None);
        let successes = hits.iter().filter(|&&h| h > 0.0).count();
        if successes >= MIN_SUCCESSES {
            xs.push(m as f64);
            ys.push(p.ln());
        } else {
            rep.note(format!("m={m}: {successes} successes, left out of the fit"));
        }
    }
    rep.fit = linear_fit(&xs, &ys);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_lattice_is_an_error() {
        let cfg = IntervalConfig {
            m_values: vec![4, 40],
            spacing: 1.0 / 100.0,
            seeds: 1,
            ..IntervalConfig::default()
        };
        assert!(matches!(interval_coalescence_with(&cfg), Err(crate::Error::Experiment(_))));
    }

    #[test]
    fn count_never_exceeds_starts() {
        let k = Kernel::new(2.0, 1).unwrap();
        for seed in 0..50 {
            let c = survivor_counts(&k, 16, 0..16, &[1, 2, 5, 20], seed).unwrap();
            assert!(c.iter().all(|&x| x <= 16));
            assert!(c.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn probability_decays_in_m() {
        let seeds: Vec<u64> = (0..400).collect();
        let r = interval_coalescence(&[4, 8, 16], 1.0, 2.0, &seeds).unwrap();
        let p: Vec<f64> = r.series("p_at_least_m").iter().map(|e| e.value).collect();
        assert!(p[0] > p[1] && p[1] >= p[2], "{p:?}");
    }

    #[test]
    fn diffusive_scaling_oracle() {
        // doubling the interval at fixed spacing quadruples the lattice time
        let seeds: Vec<u64> = (0..3000).collect();
        let cfg = |len: f64| IntervalConfig {
            m_values: vec![3, 4],
            interval_len: len,
            spacing: 1.0 / 64.0,
            ..IntervalConfig::default()
        };
        let a = run(&cfg(1.0), &seeds).unwrap();
        let b = run(&cfg(2.0), &seeds.iter().map(|s| s + 10_000).collect::<Vec<_>>()).unwrap();
        for m in ["m=3", "m=4"] {
            let x = a.get(m, "p_at_least_m").unwrap();
            let y = b.get(m, "p_at_least_m").unwrap();
            let se = (x.stderr.unwrap().powi(2) + y.stderr.unwrap().powi(2)).sqrt();
            assert!((x.value - y.value).abs() <= 3.0 * se.max(1e-3), "{m}: {} vs {}", x.value, y.value);
        }
    }
}
