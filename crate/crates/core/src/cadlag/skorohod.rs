//! Skorohod-type distance between paths on possibly different intervals.
//!
//! `d(f, g) = inf_τ sup_s |τ(s) − s| + |f(s) − g(τ(s))|` over increasing
//! homeomorphisms `τ: [a,b] → [c,d]`. We minimise over monotone lattice
//! paths through grid pairs `(s_i, u_j)`: a diagonal step maps `[s_i, s_{i+1}]`
//! linearly onto `[u_j, u_{j+1}]`, a horizontal step squeezes `[s_i, s_{i+1}]`
//! onto a vanishing neighbourhood of `u_j`, and a vertical step the reverse.
//! The cost of each step is the exact sup of the objective along it, which
//! for linear pieces is attained at its endpoints (left limits at the far
//! end). The formulas are symmetric under swapping `f` and `g`.

use super::PiecewisePath;
use crate::error::{argument, Result};
use crate::scalar::Scalar;

/// Approximation slack: `resolution · (1 + max |slope|)`.
pub fn path_dist_tolerance<T: Scalar>(
    f: &PiecewisePath<T>,
    g: &PiecewisePath<T>,
    resolution: T,
) -> T {
    resolution * (T::one() + f.max_abs_slope().max(g.max_abs_slope()))
}

/// Upper approximation of the distance, within [`path_dist_tolerance`].
pub fn path_dist<T: Scalar>(
    f: &PiecewisePath<T>,
    g: &PiecewisePath<T>,
    resolution: T,
) -> Result<T> {
    dist_capped(f, g, resolution, None)
}

/// Distance together with its tolerance.
pub fn path_dist_with_tolerance<T: Scalar>(
    f: &PiecewisePath<T>,
    g: &PiecewisePath<T>,
    resolution: T,
) -> Result<(T, T)> {
    Ok((path_dist(f, g, resolution)?, path_dist_tolerance(f, g, resolution)))
}

/// Lower bound from the endpoints, which every time change must match.
pub(crate) fn endpoint_bound<T: Scalar>(f: &PiecewisePath<T>, g: &PiecewisePath<T>) -> T {
    let start = (f.lo() - g.lo()).abs() + (f.value(f.lo()) - g.value(g.lo())).abs();
    let end = (f.hi() - g.hi()).abs() + (f.value(f.hi()) - g.value(g.hi())).abs();
    start.max(end)
}

/// `min(d(f, g), cap)`; matchings with `|τ(s) − s| > cap` are never explored.
pub(crate) fn dist_capped<T: Scalar>(
    f: &PiecewisePath<T>,
    g: &PiecewisePath<T>,
    resolution: T,
    cap: Option<T>,
) -> Result<T> {
    if f.is_empty() || g.is_empty() {
        return Err(argument("empty path"));
    }
    if !(resolution > T::zero()) || !resolution.is_finite() {
        return Err(argument(format!("resolution must be positive, got {resolution}")));
    }
    // the affine time change gives an upper bound that also narrows the band
    let ub = linear_cost(f, g).min(linear_cost(g, f));
    let limit = cap.map_or(ub, |c| c.min(ub));
    let s = grid(f, g, resolution);
    let u = grid(g, f, resolution);
    let fv: Vec<T> = s.iter().map(|&x| f.value(x)).collect();
    let fl: Vec<T> = s.iter().map(|&x| f.value_left(x)).collect();
    let gv: Vec<T> = u.iter().map(|&x| g.value(x)).collect();
    let gl: Vec<T> = u.iter().map(|&x| g.value_left(x)).collect();
    let (n, m) = (s.len(), u.len());
    let inf = T::infinity();
    // band of half-width cap_v; the optimum is exact whenever it is below cap_v
    let banded = |cap_v: T| -> T {
        let band = |i: usize| -> (usize, usize) {
            let lo = u.partition_point(|&x| x < s[i] - cap_v);
            let hi = u.partition_point(|&x| x <= s[i] + cap_v);
            (lo, hi.saturating_sub(1))
        };

        let mut prev = vec![inf; m];
        let mut cur = vec![inf; m];
        let mut prev_band = (1, 0);
        for i in 0..n {
            let (jl, jh) = band(i);
            for j in jl..=jh.min(m - 1) {
                if jl > jh {
                    break;
                }
                let dt = (s[i] - u[j]).abs();
                let node = dt + (fv[i] - gv[j]).abs();
                let mut best = if i == 0 && j == 0 { node } else { inf };
                if i > 0 && j > 0 && prev[j - 1] < inf {
                    let e = dt + (fl[i] - gl[j]).abs();
                    best = best.min(prev[j - 1].max(e));
                }
                if i > 0 && prev[j] < inf {
                    let e = dt + (fl[i] - gv[j]).abs();
                    best = best.min(prev[j].max(e));
                }
                if j > 0 && cur[j - 1] < inf {
                    let e = dt + (fv[i] - gl[j]).abs();
                    best = best.min(cur[j - 1].max(e));
                }
                cur[j] = if best < inf { best.max(node) } else { inf };
            }
            for j in prev_band.0..=prev_band.1.min(m - 1) {
                if prev_band.0 > prev_band.1 {
                    break;
                }
                prev[j] = inf;
            }
            std::mem::swap(&mut prev, &mut cur);
            prev_band = (jl, jh);
        }
        let v = prev[m - 1];
        if v < inf { v.min(cap_v) } else { cap_v }
    };
    // widen the band from the endpoint bound until the optimum falls inside it
    let four = T::from_usize(4).unwrap();
    let mut c = (endpoint_bound(f, g) * four).max(resolution * four);
    loop {
        if c >= limit {
            return Ok(banded(limit).min(ub));
        }
        let v = banded(c);
        if v < c {
            return Ok(v.min(ub));
        }
        c = c * four;
    }
}

/// Exact objective for the affine `τ` from `f`'s domain onto `g`'s.
fn linear_cost<T: Scalar>(f: &PiecewisePath<T>, g: &PiecewisePath<T>) -> T {
    let (a, b, c, d) = (f.lo(), f.hi(), g.lo(), g.hi());
    if !(b > a) || !(d > c) {
        return T::infinity();
    }
    let k = (d - c) / (b - a);
    let tau = |s: T| c + (s - a) * k;
    let inv = |u: T| a + (u - c) / k;
    let fb: Vec<T> = f.breakpoints().collect();
    let gb: Vec<T> = g.breakpoints().collect();
    let mut pairs: Vec<(T, T)> = vec![(a, c), (b, d)];
    pairs.extend(fb.iter().map(|&s| (s, snap(&gb, tau(s).max(c).min(d)))));
    pairs.extend(gb.iter().map(|&u| (snap(&fb, inv(u).max(a).min(b)), u)));
    let mut worst = T::zero();
    for (s, u) in pairs {
        let dt = (u - s).abs();
        worst = worst
            .max(dt + (f.value(s) - g.value(u)).abs())
            .max(dt + (f.value_left(s) - g.value_left(u)).abs());
    }
    worst
}

/// Grid on `f`'s domain: its breakpoints, the other path's breakpoints that
/// fall inside, and a uniform refinement at spacing ≤ resolution.
fn grid<T: Scalar>(f: &PiecewisePath<T>, other: &PiecewisePath<T>, res: T) -> Vec<T> {
    let (a, b) = (f.lo(), f.hi());
    let len = b - a;
    let cells = (len / res).ceil().to_usize().unwrap_or(1).max(1);
    let step = len / T::from_usize(cells).unwrap();
    let mut pts: Vec<T> = (0..=cells)
        .map(|k| if k == cells { b } else { a + step * T::from_usize(k).unwrap() })
        .collect();
    pts.extend(f.breakpoints());
    pts.extend(other.breakpoints().filter(|&x| x > a && x < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = T::breakpoint_tol();
    // keep exact breakpoints when a refinement point lands within tolerance
    let mut out: Vec<T> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some(last) if p - *last <= tol => {
                if is_break(f, p) || is_break(other, p) {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    if let Some(first) = out.first_mut() {
        *first = a;
    }
    if let Some(last) = out.last_mut() {
        *last = b;
    }
    out
}

/// Nearest breakpoint within tolerance, else `x` itself.
fn snap<T: Scalar>(bps: &[T], x: T) -> T {
    let tol = T::breakpoint_tol() * T::one().max(x.abs());
    let i = bps.partition_point(|&k| k < x);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| bps.get(j).copied())
        .find(|&k| (k - x).abs() <= tol)
        .unwrap_or(x)
}

fn is_break<T: Scalar>(f: &PiecewisePath<T>, x: T) -> bool {
    f.breakpoints().any(|k| k == x)
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = PiecewisePath<f64>;
    use proptest::prelude::*;

    fn ind(lo: f64, hi: f64, at: f64) -> PiecewisePath<f64> {
        P::step(lo, hi, 0.0, &[(at, 1.0)]).unwrap()
    }

    /// Brute force over τ that are piecewise-linear through points of a fine
    /// lattice, evaluated on a fine time grid: an upper bound on the distance.
    fn brute_shift(f: &PiecewisePath<f64>, g: &PiecewisePath<f64>) -> f64 {
        // for single-jump indicators the best τ moves the jump and is linear elsewhere
        let jf = f.jump_times()[0];
        let mut best = f64::INFINITY;
        for k in 0..=1000 {
            let target = k as f64 / 1000.0;
            if target <= 0.0 || target >= 1.0 {
                continue;
            }
            let tau = |s: f64| {
                if s < jf {
                    s * target / jf
                } else {
                    target + (s - jf) * (1.0 - target) / (1.0 - jf)
                }
            };
            let mut worst: f64 = 0.0;
            for i in 0..=2000 {
                let s = i as f64 / 2000.0;
                worst = worst.max((tau(s) - s).abs() + (f.value(s) - g.value(tau(s))).abs());
            }
            best = best.min(worst);
        }
        best
    }

    #[test]
    fn self_distance_is_zero() {
        let f = P::step(0.0, 1.0, 0.0, &[(0.3, 1.0), (0.8, -2.0)]).unwrap();
        for r in [0.5, 0.1, 0.013] {
            assert_eq!(path_dist(&f, &f, r).unwrap(), 0.0);
        }
        let h = P::linear(-1.0, 2.0, 0.5, 3.0).unwrap();
        assert_eq!(path_dist(&h, &h, 0.07).unwrap(), 0.0);
    }

    #[test]
    fn domain_mismatch_costs_endpoint_gap() {
        let f = P::constant(0.0, 1.0, 0.0).unwrap();
        let g = P::constant(0.0, 1.2, 0.0).unwrap();
        let d = path_dist(&f, &g, 0.01).unwrap();
        assert!((d - 0.2).abs() <= 1e-12, "{d}");
    }

    #[test]
    fn shifted_indicator() {
        let f = ind(0.0, 1.0, 0.5);
        let g = ind(0.0, 1.0, 0.6);
        let brute = brute_shift(&f, &g);
        assert!((brute - 0.1).abs() < 1e-9);
        for r in [0.1, 0.01, 0.003] {
            let d = path_dist(&f, &g, r).unwrap();
            assert!(d >= 0.1 - 1e-12 && d <= 0.1 + path_dist_tolerance(&f, &g, r), "{r} {d}");
        }
    }

    #[test]
    fn mismatched_jump_sizes() {
        // jump of 1 against jump of 0.7: best is aligning jumps, cost 0.3
        let f = ind(0.0, 1.0, 0.5);
        let g = P::step(0.0, 1.0, 0.0, &[(0.5, 0.7)]).unwrap();
        let d = path_dist(&f, &g, 0.05).unwrap();
        assert!((d - 0.3).abs() < 1e-12, "{d}");
    }

    #[test]
    fn cap_truncates() {
        let f = P::constant(0.0, 1.0, 0.0).unwrap();
        let g = P::constant(0.0, 1.0, 5.0).unwrap();
        assert_eq!(path_dist(&f, &g, 0.1).unwrap(), 5.0);
        assert_eq!(dist_capped(&f, &g, 0.1, Some(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_resolution() {
        let f = P::constant(0.0, 1.0, 0.0).unwrap();
        assert!(path_dist(&f, &f, 0.0).is_err());
        assert!(path_dist(&f, &f, -1.0).is_err());
    }

    #[test]
    fn slope_tolerance() {
        let f = P::linear(0.0, 1.0, 0.0, 1.0).unwrap();
        let g = P::linear(0.0, 1.0, 0.3, 1.0).unwrap();
        // shift in time or in value both cost 0.3; the DP is an upper bound within tol
        let r = 0.01;
        let d = path_dist(&f, &g, r).unwrap();
        assert!(d >= 0.15 - 1e-12 && d <= 0.3 + path_dist_tolerance(&f, &g, r), "{d}");
    }

    fn step_family() -> impl Strategy<Value = PiecewisePath<f64>> {
        prop::collection::btree_map(1usize..20, -2i32..=2, 0..4).prop_map(|m| {
            let jumps: Vec<(f64, f64)> =
                m.into_iter().map(|(k, v)| (k as f64 / 20.0, v as f64 * 0.5)).collect();
            P::step(0.0, 1.0, 0.0, &jumps).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_exactly(f in step_family(), g in step_family()) {
            prop_assert_eq!(path_dist(&f, &g, 0.05).unwrap(), path_dist(&g, &f, 0.05).unwrap());
        }

        #[test]
        fn triangle(f in step_family(), g in step_family(), h in step_family()) {
            let r = 0.05;
            let fh = path_dist(&f, &h, r).unwrap();
            let fg = path_dist(&f, &g, r).unwrap();
            let gh = path_dist(&g, &h, r).unwrap();
            prop_assert!(fh <= fg + gh + 2.0 * r + 1e-12);
        }

        #[test]
        fn zero_iff_equal(f in step_family(), g in step_family()) {
            let d = path_dist(&f, &g, 0.05).unwrap();
            let same = f.agrees_with_on(&g, 0.0, 1.0, 0.0);
            prop_assert_eq!(d == 0.0, same);
        }
    }
}
