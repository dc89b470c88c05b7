//! Finite path collections, their projections and the web metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agedpath::{AgedPath, TruncatedPath};
use crate::cadlag::skorohod::{dist_capped, endpoint_bound};
use crate::error::{argument, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct PathCollection<T: Scalar> {
    #[serde(default)]
    pub label: String,
    pub horizon: T,
    /// Lattice age increment of the source simulation, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_step: Option<T>,
    pub paths: Vec<AgedPath<T>>,
}

impl<T: Scalar> PathCollection<T> {
    pub fn new(label: impl Into<String>, horizon: T, paths: Vec<AgedPath<T>>) -> Result<Self> {
        let tol = T::breakpoint_tol();
        if let Some(p) = paths.iter().find(|p| (p.horizon() - horizon).abs() > tol) {
            return Err(argument(format!(
                "path horizon {} differs from collection horizon {horizon}",
                p.horizon()
            )));
        }
        Ok(PathCollection {
            label: label.into(),
            horizon,
            age_step: None,
            paths,
        })
    }

    pub fn with_age_step(mut self, step: T) -> Self {
        self.age_step = Some(step);
        self
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Maximal elements of `Π_t(Γ)`.
    pub fn project(&self, t: T) -> Result<Vec<TruncatedPath<T>>> {
        self.project_h(t, T::lit(2.0).powf(-t))
    }

    /// Maximal elements of `Π_t^h(Γ)`.
    pub fn project_h(&self, t: T, h_at_t: T) -> Result<Vec<TruncatedPath<T>>> {
        if !(t >= T::one()) || t > self.horizon + T::breakpoint_tol() {
            return Err(argument(format!(
                "t = {t} outside [1, {}]",
                self.horizon
            )));
        }
        Ok(self
            .project_indexed(t, h_at_t)?
            .into_iter()
            .map(|(_, tp)| tp)
            .collect())
    }

    /// Maximal projections paired with the index of the path they come from.
    pub fn project_indexed(&self, t: T, h_at_t: T) -> Result<Vec<(usize, TruncatedPath<T>)>> {
        if !(t >= T::one()) || t > self.horizon + T::breakpoint_tol() {
            return Err(argument(format!("t = {t} outside [1, {}]", self.horizon)));
        }
        let all = self.project_all(t, h_at_t)?;
        let keep = maximal_mask(&all.iter().map(|(_, tp)| tp).collect::<Vec<_>>());
        Ok(all
            .into_iter()
            .zip(keep)
            .filter_map(|(x, k)| k.then_some(x))
            .collect())
    }

    /// Every nonempty projection, before the maximality filter.
    pub fn project_all(&self, t: T, h_at_t: T) -> Result<Vec<(usize, TruncatedPath<T>)>> {
        let mut out = Vec::new();
        for (i, p) in self.paths.iter().enumerate() {
            if let Some(tp) = p.project_h(t, h_at_t)? {
                out.push((i, tp));
            }
        }
        Ok(out)
    }
}

/// Whether two projections are the same truncated path.
pub fn same_projection<T: Scalar>(x: &TruncatedPath<T>, y: &TruncatedPath<T>) -> bool {
    let tol = T::agreement_tol();
    (x.b - y.b).abs() <= T::breakpoint_tol()
        && x.gamma.agrees_with_on(&y.gamma, x.b, x.gamma.hi(), tol)
        && x.age.agrees_with_on(&y.age, x.b, x.age.hi(), tol)
}

/// Groups of indices with equal end values, the cheap necessary condition for agreement.
pub(crate) fn end_value_runs<T: Scalar>(tps: &[&TruncatedPath<T>]) -> Vec<Vec<usize>> {
    let tolf = T::agreement_tol().to_f64_lossy();
    let keys: Vec<(f64, f64)> = tps
        .iter()
        .map(|tp| {
            (
                tp.gamma.value(tp.gamma.hi()).to_f64_lossy(),
                tp.age.value(tp.age.hi()).to_f64_lossy(),
            )
        })
        .collect();
    let mut order: Vec<usize> = (0..tps.len()).collect();
    order.sort_by(|&i, &j| keys[i].partial_cmp(&keys[j]).unwrap().then(i.cmp(&j)));
    let mut runs = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && keys[order[end]].0 - keys[order[start]].0 <= tolf {
            end += 1;
        }
        let mut run: Vec<usize> = order[start..end].to_vec();
        // split further by age end value
        run.sort_by(|&i, &j| keys[i].1.partial_cmp(&keys[j].1).unwrap().then(i.cmp(&j)));
        let mut s = 0;
        while s < run.len() {
            let mut e = s + 1;
            while e < run.len() && keys[run[e]].1 - keys[run[s]].1 <= tolf {
                e += 1;
            }
            let mut sub = run[s..e].to_vec();
            sub.sort_unstable();
            runs.push(sub);
            s = e;
        }
        start = end;
    }
    runs
}

/// Drops projections that are tails of an earlier-born projection and exact repeats.
pub fn maximal<T: Scalar>(tps: Vec<TruncatedPath<T>>) -> Vec<TruncatedPath<T>> {
    let keep = maximal_mask(&tps.iter().collect::<Vec<_>>());
    tps.into_iter()
        .zip(keep)
        .filter_map(|(tp, k)| k.then_some(tp))
        .collect()
}

pub(crate) fn maximal_mask<T: Scalar>(tps: &[&TruncatedPath<T>]) -> Vec<bool> {
    let tol = T::agreement_tol();
    let bt = T::breakpoint_tol();
    let mut keep = vec![true; tps.len()];
    // agreeing paths share their end values, so only compare within such runs
    for run in end_value_runs(tps) {
        for &i in &run {
            for &j in &run {
                if i == j || !keep[j] {
                    continue;
                }
                let (x, y) = (tps[i], tps[j]);
                // y dominates x if born earlier, or equal birth and listed first
                let earlier = y.b < x.b - bt || ((y.b - x.b).abs() <= bt && j < i);
                if earlier
                    && y.gamma.agrees_with_on(&x.gamma, x.b, x.gamma.hi(), tol)
                    && y.age.agrees_with_on(&x.age, x.b, x.age.hi(), tol)
                {
                    keep[i] = false;
                    break;
                }
            }
        }
    }
    keep
}

/// `d(γ, γ') ∨ d(a, a')`.
pub fn pair_dist<T: Scalar>(
    x: &TruncatedPath<T>,
    y: &TruncatedPath<T>,
    resolution: T,
) -> Result<T> {
    pair_dist_capped(x, y, resolution, None)
}

fn pair_dist_capped<T: Scalar>(
    x: &TruncatedPath<T>,
    y: &TruncatedPath<T>,
    resolution: T,
    cap: Option<T>,
) -> Result<T> {
    let g = dist_capped(&x.gamma, &y.gamma, resolution, cap)?;
    if cap.is_some_and(|c| g >= c) {
        return Ok(g);
    }
    let a = dist_capped(&x.age, &y.age, resolution, cap)?;
    Ok(g.max(a))
}

fn pair_bound<T: Scalar>(x: &TruncatedPath<T>, y: &TruncatedPath<T>) -> T {
    endpoint_bound(&x.gamma, &y.gamma).max(endpoint_bound(&x.age, &y.age))
}

/// Two-sided Hausdorff distance; empty against nonempty counts as 1.
pub fn hausdorff<T: Scalar>(
    a: &[TruncatedPath<T>],
    b: &[TruncatedPath<T>],
    resolution: T,
) -> Result<T> {
    hausdorff_capped(a, b, resolution, None)
}

pub(crate) fn hausdorff_capped<T: Scalar>(
    a: &[TruncatedPath<T>],
    b: &[TruncatedPath<T>],
    resolution: T,
    cap: Option<T>,
) -> Result<T> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(T::zero()),
        (true, false) | (false, true) => return Ok(T::one()),
        _ => {}
    }
    let one_side = |xs: &[TruncatedPath<T>], ys: &[TruncatedPath<T>]| -> Result<T> {
        let mut worst = T::zero();
        let mut order: Vec<(T, usize)> = Vec::with_capacity(ys.len());
        for x in xs {
            // nearest candidates first; a bound at or above the best rules the rest out
            order.clear();
            order.extend(ys.iter().enumerate().map(|(k, y)| (pair_bound(x, y), k)));
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
            let mut best = cap.unwrap_or(T::infinity());
            for &(lb, k) in &order {
                if lb >= best || best <= worst {
                    break;
                }
                best = best.min(pair_dist_capped(x, &ys[k], resolution, Some(best))?);
            }
            worst = worst.max(best);
        }
        Ok(worst)
    };
    Ok(one_side(a, b)?.max(one_side(b, a)?))
}

/// Projection threshold `h(t)` used by the tilted metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Threshold {
    /// `2^{-t}`
    Dyadic,
    /// `1/t`
    Reciprocal,
    /// `t^{-p}`
    Power { exponent: f64 },
    /// Linear interpolation through `(t, h)` samples, flat outside.
    Tabulated { t: Vec<f64>, h: Vec<f64> },
}

impl Threshold {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Threshold::Dyadic => 2f64.powf(-t),
            Threshold::Reciprocal => 1.0 / t,
            Threshold::Power { exponent } => t.powf(-exponent),
            Threshold::Tabulated { t: ts, h } => {
                let i = ts.partition_point(|&x| x <= t);
                if i == 0 {
                    h[0]
                } else if i == ts.len() {
                    h[h.len() - 1]
                } else {
                    let w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
                    h[i - 1] + w * (h[i] - h[i - 1])
                }
            }
        }
    }

    /// Checks positivity and strict decrease on a sample grid of `[1, t_max]`.
    pub fn check(&self, t_max: f64) -> Result<()> {
        if let Threshold::Tabulated { t, h } = self {
            if t.len() != h.len() || t.len() < 2 || t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(argument("tabulated threshold needs increasing t samples"));
            }
        }
        let n = 256;
        let mut prev = f64::INFINITY;
        for k in 0..=n {
            let t = 1.0 + (t_max - 1.0) * k as f64 / n as f64;
            let v = self.at(t);
            if !(v > 0.0) || !v.is_finite() {
                return Err(argument(format!("threshold not positive at t = {t}")));
            }
            if v >= prev {
                return Err(argument(format!("threshold not decreasing at t = {t}")));
            }
            prev = v;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebDist {
    pub value: f64,
    pub tail_bound: f64,
    pub quad_cells: usize,
}

/// Quadrature nodes on `[1, t_max]`: jittered midpoints and weights `w e^{-t}`.
pub fn quadrature_nodes(t_max: f64, n_cells: usize) -> Vec<(f64, f64)> {
    let w = (t_max - 1.0) / n_cells as f64;
    // small irrational offset keeps nodes off integers and dyadic rationals
    let jitter = w * (std::f64::consts::SQRT_2 - 1.0) / 16.0;
    (0..n_cells)
        .map(|k| {
            let t = 1.0 + (k as f64 + 0.5) * w + jitter;
            (t, w * (-t).exp())
        })
        .collect()
}

/// `∫_1^{t_max} e^{-t} (d(Π_t Γ1, Π_t Γ2) ∧ 1) dt` by jittered midpoint rule.
pub fn web_dist<T: Scalar>(
    g1: &PathCollection<T>,
    g2: &PathCollection<T>,
    t_max: T,
    n_cells: usize,
    resolution: T,
) -> Result<WebDist> {
    web_dist_with(g1, g2, t_max, n_cells, resolution, &Threshold::Dyadic)
}

/// The tilted metric with projection thresholds `h(t)`.
pub fn web_dist_h<T: Scalar>(
    g1: &PathCollection<T>,
    g2: &PathCollection<T>,
    h: &Threshold,
    t_max: T,
    n_cells: usize,
    resolution: T,
) -> Result<WebDist> {
    h.check(t_max.to_f64_lossy())?;
    web_dist_with(g1, g2, t_max, n_cells, resolution, h)
}

fn web_dist_with<T: Scalar>(
    g1: &PathCollection<T>,
    g2: &PathCollection<T>,
    t_max: T,
    n_cells: usize,
    resolution: T,
    h: &Threshold,
) -> Result<WebDist> {
    let tm = t_max.to_f64_lossy();
    if !(tm >= 1.0) {
        return Err(argument(format!("t_max must be at least 1, got {tm}")));
    }
    if n_cells == 0 {
        return Err(argument("need at least one quadrature cell"));
    }
    let tol = T::breakpoint_tol();
    if t_max > g1.horizon + tol || t_max > g2.horizon + tol {
        return Err(argument(format!("t_max {tm} beyond collection horizon")));
    }
    let nodes = quadrature_nodes(tm, n_cells);
    let terms: Vec<f64> = nodes
        .par_iter()
        .map(|&(t, w)| -> Result<f64> {
            let (tt, ht) = (T::lit(t), T::lit(h.at(t)));
            let a = g1.project_h(tt, ht)?;
            let b = g2.project_h(tt, ht)?;
            let d = hausdorff_capped(&a, &b, resolution, Some(T::one()))?;
            Ok(w * d.to_f64_lossy().min(1.0))
        })
        .collect::<Result<_>>()?;
    Ok(WebDist {
        value: terms.iter().sum(),
        tail_bound: (-tm).exp(),
        quad_cells: n_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::{path_dist, PiecewisePath, Segment};

    type P = PiecewisePath<f64>;

    fn path(sigma: f64, x: f64, hi: f64) -> AgedPath<f64> {
        let e = 0.01;
        AgedPath::new(
            sigma,
            P::constant(sigma + e, hi, x).unwrap(),
            P::linear(sigma + e, hi, e, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn coll(paths: Vec<AgedPath<f64>>) -> PathCollection<f64> {
        PathCollection::new("t", 6.0, paths).unwrap()
    }

    #[test]
    fn singleton_projects_to_itself() {
        let p = path(-3.0, 0.0, 6.0);
        let g = coll(vec![p.clone()]);
        assert_eq!(g.project(2.0).unwrap(), vec![p.project(2.0).unwrap().unwrap()]);
    }

    #[test]
    fn later_born_tail_is_dropped() {
        // P2 joins P1's trajectory at -0.8, before its own age reaches 1/2
        let p1 = path(-3.0, 0.0, 6.0);
        let e = 0.01;
        let p2 = AgedPath::new(
            -1.0,
            P::step(-1.0 + e, 6.0, 0.5, &[(-0.85, 0.0)]).unwrap(),
            P::new(
                -1.0 + e,
                6.0,
                vec![Segment::new(-1.0 + e, e, 1.0), Segment::new(-0.8, 2.2, 1.0)],
            )
            .unwrap(),
        )
        .unwrap();
        assert!(p2.is_valid());
        let b1 = p1.birth_window(1.0).unwrap().unwrap();
        let b2 = p2.birth_window(1.0).unwrap().unwrap();
        assert!(b1 < b2);
        let g = coll(vec![p2, p1.clone()]);
        let out = g.project(1.0).unwrap();
        assert_eq!(out, vec![p1.project(1.0).unwrap().unwrap()]);
    }

    #[test]
    fn distinct_paths_survive_and_duplicates_collapse() {
        let g = coll(vec![path(-3.0, 0.0, 6.0), path(-3.0, 0.5, 6.0), path(-3.0, 0.0, 6.0)]);
        assert_eq!(g.project(1.0).unwrap().len(), 2);
    }

    #[test]
    fn project_outside_horizon_is_error() {
        let g = coll(vec![path(-3.0, 0.0, 6.0)]);
        assert!(g.project(7.0).is_err());
        assert!(g.project(0.5).is_err());
    }

    #[test]
    fn pair_dist_examples() {
        let x = path(-3.0, 0.0, 6.0).project(2.0).unwrap().unwrap();
        assert_eq!(pair_dist(&x, &x, 0.01).unwrap(), 0.0);
        let mut y = x.clone();
        let segs: Vec<Segment<f64>> =
            y.age.segments().iter().map(|s| Segment::new(s.start, s.value + 0.3, s.slope)).collect();
        y.age = P::new(y.age.lo(), y.age.hi(), segs).unwrap();
        let d = pair_dist(&x, &y, 0.01).unwrap();
        let da = path_dist(&x.age, &y.age, 0.01).unwrap();
        assert_eq!(d, da);
        // ages with unit slope: a time shift of 0.15 balances both terms
        assert!(d >= 0.15 - 1e-12 && d <= 0.3 + 0.02 + 1e-12, "{d}");
        assert_eq!(d, pair_dist(&y, &x, 0.01).unwrap());
    }

    #[test]
    fn hausdorff_conventions() {
        let x = path(-3.0, 0.0, 6.0).project(2.0).unwrap().unwrap();
        let y = path(-3.0, 0.2, 6.0).project(2.0).unwrap().unwrap();
        let z = path(-3.0, 0.9, 6.0).project(2.0).unwrap().unwrap();
        let empty: Vec<TruncatedPath<f64>> = vec![];
        assert_eq!(hausdorff(&empty, &empty, 0.01).unwrap(), 0.0);
        assert_eq!(hausdorff(&[x.clone()], &empty, 0.01).unwrap(), 1.0);
        assert_eq!(
            hausdorff(&[x.clone()], &[y.clone()], 0.01).unwrap(),
            pair_dist(&x, &y, 0.01).unwrap()
        );
        let a = vec![x.clone(), y.clone()];
        assert_eq!(hausdorff(&a, &a, 0.01).unwrap(), 0.0);
        // A ⊂ B: the farthest extra element from A
        let b = vec![x.clone(), y.clone(), z.clone()];
        let brute = [&z]
            .iter()
            .map(|e| a.iter().map(|q| pair_dist(e, q, 0.01).unwrap()).fold(f64::MAX, f64::min))
            .fold(0.0, f64::max);
        assert_eq!(hausdorff(&a, &b, 0.01).unwrap(), brute);
    }

    #[test]
    fn web_dist_zero_on_self() {
        let g = coll(vec![path(-3.0, 0.0, 6.0), path(-1.0, 0.4, 6.0)]);
        let d = web_dist(&g, &g, 5.0, 16, 0.05).unwrap();
        assert_eq!(d.value, 0.0);
        assert!((d.tail_bound - (-5f64).exp()).abs() < 1e-15);
        assert_eq!(d.quad_cells, 16);
    }

    #[test]
    fn web_dist_constant_offset() {
        let g1 = coll(vec![path(-6.0, 0.0, 6.0)]);
        let g2 = coll(vec![path(-6.0, 0.2, 6.0)]);
        let d = web_dist(&g1, &g2, 5.0, 64, 0.01).unwrap();
        let fine: f64 = quadrature_nodes(5.0, 4096).iter().map(|&(_, w)| 0.2 * w).sum();
        let exact = 0.2 * ((-1f64).exp() - (-5f64).exp());
        assert!((fine - exact).abs() < 1e-4);
        assert!((d.value - exact).abs() < 0.005 * exact, "{} vs {}", d.value, exact);
    }

    #[test]
    fn web_dist_tail_only_difference() {
        // the second path appears only after t = 4
        let g1 = coll(vec![path(-6.0, 0.0, 6.0)]);
        let g2 = coll(vec![path(-6.0, 0.0, 6.0), path(-6.0, 4.5, 6.0)]);
        let d = web_dist(&g1, &g2, 6.0, 64, 0.05).unwrap();
        assert!(d.value <= (-4.5f64).exp() + 0.05 * (-4.5f64).exp());
        assert!(d.value > 0.0);
    }

    #[test]
    fn web_dist_errors() {
        let g = coll(vec![path(-3.0, 0.0, 6.0)]);
        assert!(web_dist(&g, &g, 0.5, 4, 0.1).is_err());
        assert!(web_dist(&g, &g, 7.0, 4, 0.1).is_err());
        assert!(web_dist(&g, &g, 3.0, 0, 0.1).is_err());
    }

    #[test]
    fn tilted_metric() {
        let g1 = coll(vec![path(-6.0, 0.0, 6.0)]);
        let g2 = coll(vec![path(-6.0, 0.2, 6.0)]);
        let a = web_dist(&g1, &g2, 5.0, 32, 0.01).unwrap();
        let b = web_dist_h(&g1, &g2, &Threshold::Dyadic, 5.0, 32, 0.01).unwrap();
        assert_eq!(a, b);
        assert_eq!(web_dist_h(&g1, &g1, &Threshold::Reciprocal, 5.0, 32, 0.01).unwrap().value, 0.0);
        let bad = Threshold::Tabulated { t: vec![1.0, 3.0, 6.0], h: vec![0.5, 0.6, 0.1] };
        assert!(web_dist_h(&g1, &g2, &bad, 5.0, 8, 0.1).is_err());
        assert!(Threshold::Power { exponent: 2.0 }.check(5.0).is_ok());
    }

    #[test]
    fn tilted_metric_tracks_convergence() {
        let base = coll(vec![path(-6.0, 0.0, 6.0), path(-2.0, 0.7, 6.0)]);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 1..=4 {
            let eps = 0.4 / 2f64.powi(k);
            let g = coll(vec![path(-6.0, eps, 6.0), path(-2.0 - eps, 0.7, 6.0)]);
            let d = web_dist(&base, &g, 5.0, 32, 0.01).unwrap().value;
            let dh = web_dist_h(&base, &g, &Threshold::Reciprocal, 5.0, 32, 0.01).unwrap().value;
            assert!(d <= prev.0 + 1e-12 && dh <= prev.1 + 1e-12);
            prev = (d, dh);
        }
        assert!(prev.0 < 0.02 && prev.1 < 0.02, "{prev:?}");
    }

    #[test]
    fn json_schema() {
        let g = coll(vec![path(-1.0, 0.0, 6.0)]).with_age_step(0.01);
        let js = serde_json::to_string(&g).unwrap();
        let back: PathCollection<f64> = serde_json::from_str(&js).unwrap();
        assert_eq!(back, g);
    }
}
