//! Budget calibrated at the smallest scale, judged at larger scales.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use super::seed_list;
use super::stats::{batched, ks_distance};
use crate::compactness::{calibrate_from_stats, default_t_grid, judge_stats, sample_stats, CalibrationReport, SampleStats};
use crate::error::{argument, Result};
use crate::walkers::{renormalize_with, simulate, Kernel, Prune};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessConfig {
    pub alpha: f64,
    #[serde(rename = "N_values")]
    pub n_values: Vec<usize>,
    pub eps: f64,
    pub t_grid: Vec<f64>,
    pub n_max: usize,
    /// renormalised time runs over `[-shift, shift]`
    pub shift: f64,
    /// half width and buffer of the walk window, in units of `N^{1/α}`
    pub half_width: f64,
    pub buffer: f64,
    /// jump cutoff for `α < 2`, in units of `N^{1/α}`
    pub radius: f64,
    /// time of the `Π_t` summaries compared across N
    pub summary_t: f64,
    /// samples for the summaries; at least `seeds`
    pub summary_samples: usize,
    pub seed: u64,
    /// samples per N for the budget checks
    pub seeds: usize,
}

impl Default for TightnessConfig {
    fn default() -> Self {
        TightnessConfig {
            alpha: 2.0,
            n_values: vec![100, 200, 400],
            eps: 0.05,
            t_grid: default_t_grid(),
            n_max: 3,
            shift: 3.5,
            half_width: 3.5,
            buffer: 7.0,
            radius: 1.0,
            summary_t: 2.0,
            summary_samples: 0,
            seed: 1,
            seeds: 200,
        }
    }
}

/// `Π_t` summaries of one sample.
#[derive(Clone, Debug, Default, PartialEq)]
struct Summary {
    count: f64,
    births: Vec<f64>,
    ends: Vec<f64>,
}

struct Scale {
    n: usize,
    kernel: Kernel,
    l: usize,
    buffer: usize,
    steps: usize,
}

impl Scale {
    fn new(cfg: &TightnessConfig, n: usize) -> Result<Self> {
        let space = (n as f64).powf(1.0 / cfg.alpha);
        let radius = if cfg.alpha == 2.0 {
            1
        } else {
            (cfg.radius * space).ceil().max(1.0) as usize
        };
        let kernel = Kernel::new(cfg.alpha, radius)?;
        let l = (cfg.half_width * space).ceil() as usize;
        let buffer = ((cfg.buffer * space).ceil() as usize).max(radius);
        Ok(Scale {
            n,
            kernel,
            l,
            buffer,
            steps: (2.0 * cfg.shift).ceil() as usize * n,
        })
    }

    fn sample(&self, cfg: &TightnessConfig, seed: u64, stats: bool) -> Result<(Option<Vec<SampleStats>>, Summary)> {
        let ws = simulate(&self.kernel, self.l, self.steps, self.buffer, seed)?;
        let shift = self.steps as f64 / (2 * self.n) as f64;
        let top = cfg.t_grid.iter().copied().fold(cfg.summary_t, f64::max);
        let g = renormalize_with(&ws, self.n, shift, Prune::up_to(top))?;
        let proj = g.project(cfg.summary_t)?;
        let summary = Summary {
            count: proj.len() as f64,
            births: proj.iter().map(|p| p.b).collect(),
            ends: proj.iter().map(|p| p.gamma.eval(p.t)).collect::<Result<_>>()?,
        };
        let st = if stats {
            Some(cfg.t_grid.iter().map(|&t| sample_stats(&g, t, cfg.n_max)).collect::<Result<_>>()?)
        } else {
            None
        };
        Ok((st, summary))
    }
}

/// Samples at one N get seeds of their own.
fn seed_at(n: usize, s: u64) -> u64 {
    s ^ ((n as u64) << 40)
}

pub fn tightness_scan(alpha: f64, n_values: &[usize], eps: f64, seeds: &[u64]) -> Result<ExperimentReport> {
    let cfg = TightnessConfig {
        alpha,
        n_values: n_values.to_vec(),
        eps,
        ..TightnessConfig::default()
    };
    run(&cfg, seeds, seeds)
}

pub fn tightness_scan_with(cfg: &TightnessConfig) -> Result<ExperimentReport> {
    let all = seed_list(cfg.seed, cfg.seeds.max(cfg.summary_samples));
    run(cfg, &all[..cfg.seeds], &all)
}

fn push_verdicts(rep: &mut ExperimentReport, key: &str, r: &CalibrationReport) {
    let flags: Vec<f64> = r.passed.iter().map(|&p| p as u8 as f64).collect();
    let (p, se) = batched(&flags);
    rep.push(key, "pass_rate", p, Some(se));
    for (c, f) in ['A', 'B', 'C', 'D', 'E'].iter().zip(r.condition_fail) {
        rep.push(key, &format!("fail_{c}"), f, None);
    }
    rep.push(key, "e_inconclusive", r.e_inconclusive_rate, None);
}

fn run(cfg: &TightnessConfig, seeds: &[u64], summary_seeds: &[u64]) -> Result<ExperimentReport> {
    if cfg.n_values.is_empty() || cfg.n_values.iter().any(|&n| n == 0) {
        return Err(argument("need at least one positive N"));
    }
    if cfg.n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(argument("N values must increase"));
    }
    if !(cfg.alpha > 1.0 && cfg.alpha <= 2.0) {
        return Err(argument(format!("alpha must lie in (1, 2], got {}", cfg.alpha)));
    }
    if cfg.t_grid.is_empty() || cfg.t_grid.iter().any(|&t| !(t > 0.0 && t <= cfg.shift)) {
        return Err(argument("t grid must lie in (0, shift]"));
    }
    if !(cfg.summary_t > 0.0 && cfg.summary_t <= cfg.shift) || cfg.n_max == 0 {
        return Err(argument("summary time must lie in (0, shift] and n_max be positive"));
    }
    if seeds.is_empty() {
        return Err(argument("need at least one seed"));
    }
    let mut rep = ExperimentReport::new("tightness_scan");
    rep.param("alpha", cfg.alpha);
    rep.param("N_values", &cfg.n_values);
    rep.param("eps", cfg.eps);
    rep.param("t_grid", &cfg.t_grid);
    rep.param("n_max", cfg.n_max);
    rep.param("shift", cfg.shift);
    rep.param("summary_t", cfg.summary_t);
    rep.param("summary_samples", summary_seeds.len());
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();

    let mut budget = None;
    let mut prev: Option<(usize, Vec<Summary>)> = None;
    for &n in &cfg.n_values {
        let sc = Scale::new(cfg, n)?;
        let outs: Vec<(Option<Vec<SampleStats>>, Summary)> = summary_seeds
            .par_iter()
            .enumerate()
            .map(|(i, &s)| sc.sample(cfg, seed_at(n, s), i < seeds.len()))
            .collect::<Result<_>>()?;
        let (stats, sums): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
        let stats: Vec<Vec<SampleStats>> = stats.into_iter().flatten().collect();
        let key = format!("N={n}");
        match &budget {
            None => {
                let (b, r) = calibrate_from_stats(&stats, cfg.eps, &cfg.t_grid, cfg.n_max)?;
                push_verdicts(&mut rep, &key, &r);
                rep.param("budget", &b);
                rep.param("calibration_N", n);
                budget = Some(b);
            }
            Some(b) => {
                let r = judge_stats(&stats, b, &cfg.t_grid, cfg.n_max);
                push_verdicts(&mut rep, &key, &r);
            }
        }
        let counts: Vec<f64> = sums.iter().map(|s| s.count).collect();
        let (m, se) = batched(&counts);
        rep.push(key, "mean_count", m, Some(se));
        if let Some((pn, ps)) = &prev {
            let pool = |v: &[Summary], f: fn(&Summary) -> &Vec<f64>| -> Vec<f64> { v.iter().flat_map(|s| f(s).iter().copied()).collect() };
            let pc: Vec<f64> = ps.iter().map(|s| s.count).collect();
            let key = format!("N={pn}:{n}");
            rep.push(key.clone(), "ks_count", ks_distance(&pc, &counts), None);
            rep.push(key.clone(), "ks_birth", ks_distance(&pool(ps, |s| &s.births), &pool(&sums, |s| &s.births)), None);
            rep.push(key, "ks_endpoint", ks_distance(&pool(ps, |s| &s.ends), &pool(&sums, |s| &s.ends)), None);
        }
        prev = Some((n, sums));
    }
    rep.note("KS distances between consecutive N summarise stability of Π_t statistics; they are not a rate of weak convergence");
    Ok(rep)
}
