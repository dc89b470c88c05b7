//! Diffusive rescaling of a walk system into a collection of aged paths.

use crate::agedpath::AgedPath;
use crate::cadlag::{PiecewisePath, Segment};
use crate::collection::PathCollection;
use crate::error::{argument, Result};

use super::engine::WalkSystem;

/// Optional pruning of paths that cannot matter up to `Π_{t_max}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prune {
    /// drop paths with empty `Π_{t_max}` or born after `t_max`
    pub t_max: Option<f64>,
    /// drop paths absorbed before their age reached this level
    pub young: Option<f64>,
}

impl Prune {
    /// Both rules at `t_max`; the maximal projections are unchanged for
    /// every `t ≤ t_max`.
    pub fn up_to(t_max: f64) -> Self {
        Prune {
            t_max: Some(t_max),
            young: Some(2f64.powf(-t_max)),
        }
    }
}

/// Walk time `m` maps to `m/N − shift`, sites `x` to `x/N^{1/α}`.
pub fn renormalize(ws: &WalkSystem, n: usize, shift: f64) -> Result<PathCollection<f64>> {
    renormalize_with(ws, n, shift, Prune::default())
}

/// As [`renormalize`], with pruning. A path absorbed before its age reached
/// `2^{-t}` agrees with an older path from its first admissible time on, so
/// dropping it leaves `Π_t` unchanged.
pub fn renormalize_with(
    ws: &WalkSystem,
    n: usize,
    shift: f64,
    prune: Prune,
) -> Result<PathCollection<f64>> {
    if n == 0 || ws.steps() % n != 0 {
        return Err(argument(format!(
            "N = {n} must be positive and divide T = {}",
            ws.steps()
        )));
    }
    if !shift.is_finite() {
        return Err(argument("origin shift must be finite"));
    }
    let nf = n as f64;
    let scale = nf.powf(1.0 / ws.alpha());
    let time = |m: f64| m / nf - shift;
    let horizon = time(ws.steps() as f64);
    let mut paths = Vec::new();
    for id in 0..ws.num_clusters() as u32 {
        let r = ws.birth(id)?.1;
        if prune.t_max.is_some_and(|tm| time(r as f64) > tm) {
            continue;
        }
        if let (Some(level), Some((ma, _))) = (prune.young, ws.absorbed(id)?) {
            if (ma as f64 + 0.5 - r as f64) / nf <= level {
                continue;
            }
        }
        let p = aged_path(ws, id, nf, scale, &time)?;
        if let Some(tm) = prune.t_max {
            if p.project(tm)?.is_none() {
                continue;
            }
        }
        paths.push(p);
    }
    let label = format!("alpha={} N={n} seed={}", ws.alpha(), ws.seed());
    Ok(PathCollection::new(label, horizon, paths)?.with_age_step(1.0 / nf))
}

pub(crate) fn aged_path(
    ws: &WalkSystem,
    id: u32,
    nf: f64,
    scale: f64,
    time: &impl Fn(f64) -> f64,
) -> Result<AgedPath<f64>> {
    let traj = ws.trajectory(id)?;
    let r = ws.birth(id)?.1 as usize;
    let start = time(r as f64 + 0.5);
    let end = time(ws.steps() as f64);
    let mut gamma = vec![Segment::new(start, traj[0].0 as f64 / scale, 0.0)];
    let mut age = vec![Segment::new(start, 0.5 / nf, 1.0)];
    for k in 1..traj.len() {
        let m = (r + k) as f64;
        if traj[k].0 != traj[k - 1].0 {
            gamma.push(Segment::new(time(m), traj[k].0 as f64 / scale, 0.0));
        }
        if traj[k].1 != traj[k - 1].1 && m + 0.5 < ws.steps() as f64 {
            let c = traj[k].1 as f64;
            age.push(Segment::new(time(m + 0.5), (m + 0.5 - c) / nf, 1.0));
        }
    }
    let gamma = PiecewisePath::new(start, end, gamma)?;
    let age = PiecewisePath::new(start, end, age)?;
    AgedPath::new(time(r as f64), gamma, age)
}
