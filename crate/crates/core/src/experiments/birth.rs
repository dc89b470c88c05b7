//! Displacement of young paths passing through a reference box.
//!
//! A path belongs to `Γ₁` when at some time in the time range it sits in
//! the space range with age in the age range. For these paths the spread
//! of `γ` before `λ(2^{-n₀}) = inf{s : a(s) ≥ 2^{-n₀}}` is compared with
//! `Σ_{n≥n₀} n 2^{-n/2}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{experiment_error, ExperimentReport};
use super::seed_list;
use super::stats::batched;
use crate::agedpath::AgedPath;
use crate::error::{argument, Result};
use crate::walkers::engine::{simulate, WalkSystem};
use crate::walkers::renormalize::aged_path;
use crate::walkers::Kernel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefBox {
    pub space: [f64; 2],
    pub time: [f64; 2],
    pub age: [f64; 2],
}

impl Default for RefBox {
    fn default() -> Self {
        RefBox {
            space: [0.5, 1.0],
            time: [0.5, 1.0],
            age: [0.5, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirthConfig {
    pub n0_values: Vec<u32>,
    /// walk steps per unit time; space scales by `√N`
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "box")]
    pub ref_box: RefBox,
    pub seed: u64,
    pub seeds: usize,
}

impl Default for BirthConfig {
    fn default() -> Self {
        BirthConfig {
            n0_values: (2..=6).collect(),
            n: 400,
            ref_box: RefBox::default(),
            seed: 1,
            seeds: 1000,
        }
    }
}

/// `Σ_{n≥n₀} n 2^{-n/2}` from the closed form `Σ_{n≥1} n xⁿ = x/(1−x)²`.
pub fn displacement_threshold(n0: u32) -> f64 {
    let x = 0.5f64.sqrt();
    let head: f64 = (1..n0).map(|n| n as f64 * x.powi(n as i32)).sum();
    x / (1.0 - x).powi(2) - head
}

/// Walk time `m` is `m/N − shift` in the renormalised picture.
struct Frame {
    n: usize,
    scale: f64,
    shift: f64,
}

impl Frame {
    fn new(n: usize, b: &RefBox) -> Self {
        // every path that can have age ≤ age_hi inside the box was born after
        // time_lo − age_hi; start one unit earlier so such ages are exact
        let shift = (b.age[1] - b.time[0]).max(0.0).ceil() + 1.0;
        Frame {
            n,
            scale: (n as f64).sqrt(),
            shift,
        }
    }

    fn steps(&self, b: &RefBox) -> usize {
        ((b.time[1] + self.shift) * self.n as f64).ceil() as usize + 1
    }

    fn half_width(&self, b: &RefBox) -> usize {
        let reach = b.space[0].abs().max(b.space[1].abs()) + 1.0;
        (reach * self.scale).ceil() as usize
    }

    fn time(&self, m: usize) -> f64 {
        m as f64 / self.n as f64 - self.shift
    }
}

/// Ids of the paths in `Γ₁`. A lattice time `m` counts when `m/N − shift` is
/// in the time range, the site in the space range and the age at `m + ½`
/// in the age range.
fn members(ws: &WalkSystem, f: &Frame, b: &RefBox) -> Vec<u32> {
    let inside = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
    let n = ws.num_clusters();
    // latest lattice time at which the path of each id is seen in the box
    let mut hit: Vec<Option<usize>> = vec![None; n];
    let x_lo = (b.space[0] * f.scale).ceil() as i64;
    let x_hi = (b.space[1] * f.scale).floor() as i64;
    for m in 0..=ws.steps() {
        if !inside(f.time(m), b.time) {
            continue;
        }
        for x in x_lo..=x_hi {
            let Some(o) = ws.occupant(m, x) else { continue };
            let c = ws.earliest_birth(o).expect("occupant id");
            let age = (m as f64 + 0.5 - c as f64) / f.n as f64;
            if inside(age, b.age) {
                hit[o as usize] = Some(m);
            }
        }
    }
    // an absorbed path continues as its survivor, which has a smaller id
    for id in 0..n {
        if let Some((tau, surv)) = ws.absorbed(id as u32).expect("id in range") {
            if let Some(h) = hit[surv as usize].filter(|&h| h >= tau as usize) {
                hit[id] = Some(hit[id].map_or(h, |own| own.max(h)));
            }
        }
    }
    (0..n as u32).filter(|&id| hit[id as usize].is_some()).collect()
}

/// Range of `γ` over `(σ, λ)`.
fn spread_before(p: &AgedPath<f64>, lambda: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in p.gamma().segments() {
        if s.start >= lambda {
            break;
        }
        lo = lo.min(s.value);
        hi = hi.max(s.value);
    }
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

struct SampleOut {
    members: usize,
    /// largest spread before `λ(2^{-n₀})`, per n₀
    spread: Vec<f64>,
    increment_violations: usize,
}

fn one_sample(cfg: &BirthConfig, seed: u64) -> Result<SampleOut> {
    let b = &cfg.ref_box;
    let f = Frame::new(cfg.n, b);
    let kernel = Kernel::new(2.0, 1)?;
    let l = f.half_width(b);
    let ws = simulate(&kernel, l, f.steps(b), 2 * l, seed)?;
    let time = |m: f64| m / f.n as f64 - f.shift;
    let ids = members(&ws, &f, b);
    let mut spread = vec![0.0f64; cfg.n0_values.len()];
    let mut increment_violations = 0;
    let n_top = cfg.n0_values.iter().copied().max().unwrap_or(1);
    for &id in &ids {
        let p = aged_path(&ws, id, f.n as f64, f.scale, &time)?;
        for (k, &n0) in cfg.n0_values.iter().enumerate() {
            if let Some(lam) = p.first_age_time(0.5f64.powi(n0 as i32))? {
                spread[k] = spread[k].max(spread_before(&p, lam));
            }
        }
        for n in 1..=n_top {
            let a = 0.5f64.powi(n as i32);
            if let (Some(x), Some(y)) = (p.first_age_time(a)?, p.first_age_time(2.0 * a)?) {
                if y - x > a * (1.0 + 1e-9) {
                    increment_violations += 1;
                }
            }
        }
    }
    Ok(SampleOut {
        members: ids.len(),
        spread,
        increment_violations,
    })
}

pub fn birth_modulus(n0_values: &[u32], seeds: &[u64]) -> Result<ExperimentReport> {
    let cfg = BirthConfig {
        n0_values: n0_values.to_vec(),
        ..BirthConfig::default()
    };
    run(&cfg, seeds)
}

pub fn birth_modulus_with(cfg: &BirthConfig) -> Result<ExperimentReport> {
    run(cfg, &seed_list(cfg.seed, cfg.seeds))
}

fn run(cfg: &BirthConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    if cfg.n0_values.is_empty() || cfg.n0_values.iter().any(|&n| n == 0 || n > 30) {
        return Err(argument("n0 values must lie in 1..=30"));
    }
    let b = &cfg.ref_box;
    let ordered = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
    if !(ordered(b.space) && ordered(b.time) && ordered(b.age) && b.age[0] > 0.0) {
        return Err(argument("box ranges must be ordered, with positive ages"));
    }
    if cfg.n < 4 || seeds.is_empty() {
        return Err(argument("need N ≥ 4 and at least one seed"));
    }
    let outs: Vec<SampleOut> = seeds.par_iter().map(|&s| one_sample(cfg, s)).collect::<Result<_>>()?;
    let total: usize = outs.iter().map(|o| o.members).sum();
    if total == 0 {
        return Err(experiment_error("no path entered the reference box in any sample"));
    }
    let mut rep = ExperimentReport::new("birth_modulus");
    rep.param("n0_values", &cfg.n0_values);
    rep.param("N", cfg.n);
    rep.param("alpha", 2.0);
    rep.param("box", b);
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();
    let counts: Vec<f64> = outs.iter().map(|o| o.members as f64).collect();
    let (m, se) = batched(&counts);
    rep.push("all", "members_per_sample", m, Some(se));
    let viol: usize = outs.iter().map(|o| o.increment_violations).sum();
    rep.push("all", "lambda_increment_violations", viol as f64, None);
    for (k, &n0) in cfg.n0_values.iter().enumerate() {
        let thr = displacement_threshold(n0);
        let exceed: Vec<f64> = outs.iter().map(|o| (o.spread[k] >= thr) as u8 as f64).collect();
        let worst: Vec<f64> = outs.iter().map(|o| o.spread[k]).collect();
        let (p, pse) = batched(&exceed);
        let (w, wse) = batched(&worst);
        let key = format!("n0={n0}");
        rep.push(key.clone(), "threshold", thr, None);
        rep.push(key.clone(), "p_exceed", p, Some(pse));
        rep.push(key, "max_spread", w, Some(wse));
    }
    Ok(rep)
}
