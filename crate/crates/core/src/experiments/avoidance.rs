//! Ordered non-collision of four walks started close together.
//!
//! Walkers start `gap` lattice sites apart. Starting spacing `δ/3` over
//! unit time is the same as spacing `gap` over `18·gap²/δ²` steps of the
//! lazy walk, so one survival curve serves every `δ`. Small probabilities
//! come from fixed-effort splitting in time.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use super::seed_list;
use super::stats::{batched, bootstrap, linear_fit};
use crate::error::{argument, Result};

/// Neighbour pairs that must never meet or cross.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Four,
    Two,
    PairSum,
}

impl Event {
    pub const ALL: [Event; 3] = [Event::Four, Event::Two, Event::PairSum];

    pub fn pairs(self) -> &'static [(usize, usize)] {
        match self {
            Event::Four => &[(0, 1), (1, 2), (2, 3)],
            Event::Two => &[(0, 1)],
            Event::PairSum => &[(0, 1), (2, 3)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Event::Four => "four",
            Event::Two => "two",
            Event::PairSum => "pair_sum",
        }
    }

    fn walkers(self) -> usize {
        self.pairs().iter().map(|p| p.1 + 1).max().unwrap()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidanceConfig {
    pub delta_values: Vec<f64>,
    /// starting distance of neighbours in lattice sites
    pub gap: usize,
    /// particles per splitting stage
    pub population: usize,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
    /// independent splitting replicates
    pub seeds: usize,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        AvoidanceConfig {
            delta_values: (2..=6).map(|k| 0.5f64.powi(k)).collect(),
            gap: 1,
            population: 200,
            resamples: 200,
            level: 0.95,
            seed: 1,
            seeds: 20,
        }
    }
}

/// Lazy ±1 steps, two random bits each.
struct LazySteps {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl LazySteps {
    fn new(seed: u64) -> Self {
        LazySteps {
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: 0,
            left: 0,
        }
    }

    #[inline]
    fn step(&mut self) -> i64 {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 32;
        }
        let b = self.buf & 3;
        self.buf >>= 2;
        self.left -= 1;
        // 00 → -1, 11 → +1, otherwise stay
        (b == 3) as i64 - (b == 0) as i64
    }
}

type State = [i64; 4];

fn start(gap: usize) -> State {
    let g = gap as i64;
    [0, g, 2 * g, 3 * g]
}

/// Advances `x` by `steps`; false once some pair meets or crosses.
fn advance(x: &mut State, k: usize, pairs: &[(usize, usize)], steps: usize, src: &mut LazySteps) -> bool {
    for _ in 0..steps {
        for xi in x.iter_mut().take(k) {
            *xi += src.step();
        }
        if pairs.iter().any(|&(i, j)| x[j] <= x[i]) {
            return false;
        }
    }
    true
}

/// Splitting levels: powers of two merged with the checkpoints.
fn levels(checkpoints: &[usize]) -> Vec<usize> {
    let last = *checkpoints.iter().max().unwrap_or(&0);
    let mut out: Vec<usize> = checkpoints.to_vec();
    let mut t = 1;
    while t < last {
        out.push(t);
        t *= 2;
    }
    out.sort_unstable();
    out.dedup();
    out.retain(|&t| t > 0);
    out
}

/// Fixed-effort splitting estimate of P(event survives `t` steps) at each checkpoint.
pub fn split_survival(event: Event, gap: usize, checkpoints: &[usize], population: usize, seed: u64) -> Vec<f64> {
    if gap == 0 {
        // all walkers share a site and coalesce at once
        return checkpoints.iter().map(|_| 0.0).collect();
    }
    let (pairs, k) = (event.pairs(), event.walkers());
    let mut src = LazySteps::new(seed);
    let mut pick = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A);
    let mut pop: Vec<State> = vec![start(gap); population.max(1)];
    let mut prob = 1.0;
    let mut at = Vec::new();
    let mut now = 0;
    for lv in levels(checkpoints) {
        if prob > 0.0 {
            let n = pop.len();
            let mut alive: Vec<State> = Vec::with_capacity(n);
            for mut x in pop.drain(..) {
                if advance(&mut x, k, pairs, lv - now, &mut src) {
                    alive.push(x);
                }
            }
            prob *= alive.len() as f64 / n as f64;
            if !alive.is_empty() {
                pop = (0..n).map(|_| alive[pick.random_range(0..alive.len())]).collect();
            }
        }
        now = lv;
        at.push((lv, prob));
    }
    checkpoints
        .iter()
        .map(|c| if *c == 0 { 1.0 } else { at.iter().find(|(l, _)| l == c).unwrap().1 })
        .collect()
}

/// Plain Monte Carlo: per sample, survival of each event over `steps`.
/// All events see the same four walks.
pub fn plain_survival(gap: usize, steps: usize, seed: u64) -> [bool; 3] {
    let mut src = LazySteps::new(seed);
    let mut x = start(gap);
    let mut ok = [gap > 0; 3];
    let mut pair_ok = [gap > 0; 3];
    for _ in 0..steps {
        if !pair_ok.iter().any(|&b| b) {
            break;
        }
        for xi in x.iter_mut() {
            *xi += src.step();
        }
        for (p, b) in pair_ok.iter_mut().enumerate() {
            *b = *b && x[p + 1] > x[p];
        }
    }
    for (e, o) in Event::ALL.iter().zip(ok.iter_mut()) {
        *o = *o && e.pairs().iter().all(|&(i, _)| pair_ok[i]);
    }
    ok
}

/// Lattice steps matching unit time for starting spread `δ`.
pub fn horizon(delta: f64, gap: usize) -> usize {
    (18.0 * (gap * gap) as f64 / (delta * delta)).round() as usize
}

pub fn avoidance_exponent(delta_values: &[f64], seeds: &[u64]) -> Result<ExperimentReport> {
    let cfg = AvoidanceConfig {
        delta_values: delta_values.to_vec(),
        ..AvoidanceConfig::default()
    };
    run(&cfg, seeds)
}

pub fn avoidance_exponent_with(cfg: &AvoidanceConfig) -> Result<ExperimentReport> {
    run(cfg, &seed_list(cfg.seed, cfg.seeds))
}

fn run(cfg: &AvoidanceConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    let ds = &cfg.delta_values;
    if ds.len() < 2 || ds.iter().any(|&d| !(d > 0.0 && d <= 0.25)) {
        return Err(argument("need at least two delta values in (0, 1/4]"));
    }
    if ds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(argument("delta values must decrease"));
    }
    if seeds.len() < 2 || cfg.population == 0 || cfg.gap == 0 {
        return Err(argument("need two replicates, a population and a positive gap"));
    }
    let checkpoints: Vec<usize> = ds.iter().map(|&d| horizon(d, cfg.gap)).collect();
    let jobs: Vec<(Event, u64)> = Event::ALL
        .iter()
        .flat_map(|&e| seeds.iter().map(move |&s| (e, s)))
        .collect();
    let runs: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(e, s)| split_survival(e, cfg.gap, &checkpoints, cfg.population, s ^ (e as u64) << 56))
        .collect();

    let mut rep = ExperimentReport::new("avoidance_exponent");
    rep.param("delta_values", ds);
    rep.param("gap", cfg.gap);
    rep.param("population", cfg.population);
    rep.param("steps", &checkpoints);
    rep.param("resamples", cfg.resamples);
    rep.param("level", cfg.level);
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();
    let log_d: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let r = seeds.len();
    for (ei, e) in Event::ALL.iter().enumerate() {
        let reps = &runs[ei * r..(ei + 1) * r];
        let exponent_of = |idx: &[usize]| -> Option<f64> {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (j, x) in log_d.iter().enumerate() {
                let m = idx.iter().map(|&i| reps[i][j]).sum::<f64>() / idx.len() as f64;
                if m > 0.0 {
                    xs.push(*x);
                    ys.push(m.ln());
                }
            }
            linear_fit(&xs, &ys).map(|f| f.slope)
        };
        for (j, d) in ds.iter().enumerate() {
            let col: Vec<f64> = reps.iter().map(|v| v[j]).collect();
            let (m, se) = batched(&col);
            rep.push(format!("delta={d}"), &format!("p_{}", e.name()), m, Some(se));
            let zeros = col.iter().filter(|&&p| p == 0.0).count();
            if zeros > 0 {
                rep.note(format!("{} at delta={d}: {zeros} of {r} replicates saw no survivor", e.name()));
            }
        }
        let all: Vec<usize> = (0..r).collect();
        let Some(exp) = exponent_of(&all) else {
            rep.note(format!("{}: too few positive estimates for a fit", e.name()));
            continue;
        };
        let (lo, hi) = bootstrap(r, cfg.resamples, cfg.seed ^ ei as u64, cfg.level, exponent_of);
        let half = (hi - lo) / 2.0;
        let name = e.name();
        rep.push(name, "exponent", exp, Some(half / 1.96));
        rep.push(name, "exponent_ci_lo", lo, None);
        rep.push(name, "exponent_ci_hi", hi, None);
        if *e == Event::Four {
            let (xs, ys): (Vec<f64>, Vec<f64>) = log_d
                .iter()
                .enumerate()
                .filter_map(|(j, x)| {
                    let m = reps.iter().map(|v| v[j]).sum::<f64>() / r as f64;
                    (m > 0.0).then(|| (*x, m.ln()))
                })
                .unzip();
            rep.fit = linear_fit(&xs, &ys);
        }
    }
    Ok(rep)
}
