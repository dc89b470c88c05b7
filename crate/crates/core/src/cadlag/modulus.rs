//! The cadlag modulus of continuity.
//!
//! `ω(δ, f, [a,b])` is the smallest achievable maximum cell oscillation over
//! partitions of `[a,b]` into half-open cells of length at least `δ` (the
//! last cell closed). We decide "is ω ≤ θ" exactly for piecewise-linear `f`
//! and bisect on θ.
//!
//! The decision procedure tracks the set R of reachable cell boundaries.
//! A point `p` is *live* when the cell `[p, p+δ)` has oscillation ≤ θ, and
//! `e(p)` is the furthest right end of a cell starting at `p` that still has
//! oscillation ≤ θ. Both the live set and `e` are computed in closed form:
//! between consecutive events (knots and knots shifted by `-δ`) the sliding
//! window oscillation is a convex piecewise-linear function of `p`, and at
//! an event point the actual value is at most either one-sided limit.
//! R is swept left to right; a chunk `[u, v]` of R contributes
//! `(live ∩ [u,v]) + δ` and, when `v` is live, `[v+δ, e(v)]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::PiecewisePath;
use crate::error::{argument, Result};
use crate::scalar::Scalar;

/// Exact cadlag modulus `ω(δ, f, [a, b])`.
pub fn oscillation<T: Scalar>(f: &PiecewisePath<T>, delta: T, a: T, b: T) -> Result<T> {
    let w = Window::new(f, delta, a, b)?;
    Ok(w.modulus())
}

/// Whether `ω(δ, f, [a, b]) ≤ theta`, without bisection.
pub fn oscillation_at_most<T: Scalar>(
    f: &PiecewisePath<T>,
    delta: T,
    a: T,
    b: T,
    theta: T,
) -> Result<bool> {
    let w = Window::new(f, delta, a, b)?;
    Ok(w.feasible(theta))
}

/// Range min/max over knot indices.
struct Sparse<T> {
    mx: Vec<Vec<T>>,
    mn: Vec<Vec<T>>,
}

impl<T: Scalar> Sparse<T> {
    fn new(hi: Vec<T>, lo: Vec<T>) -> Self {
        let n = hi.len();
        let mut mx = vec![hi];
        let mut mn = vec![lo];
        let mut w = 1;
        while 2 * w <= n {
            let (pm, pn) = (mx.last().unwrap(), mn.last().unwrap());
            let m: Vec<T> = (0..=n - 2 * w).map(|i| pm[i].max(pm[i + w])).collect();
            let l: Vec<T> = (0..=n - 2 * w).map(|i| pn[i].min(pn[i + w])).collect();
            mx.push(m);
            mn.push(l);
            w *= 2;
        }
        Sparse { mx, mn }
    }

    /// (min, max) over inclusive index range `[l, r]`.
    fn query(&self, l: usize, r: usize) -> (T, T) {
        let len = r - l + 1;
        let lvl = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let w = 1 << lvl;
        (
            self.mn[lvl][l].min(self.mn[lvl][r + 1 - w]),
            self.mx[lvl][l].max(self.mx[lvl][r + 1 - w]),
        )
    }
}

#[derive(Clone, Copy)]
struct Range<T>(T, T);

impl<T: Scalar> Range<T> {
    fn of(v: T) -> Self {
        Range(v, v)
    }
    fn add(self, v: T) -> Self {
        Range(self.0.min(v), self.1.max(v))
    }
    fn join(self, o: (T, T)) -> Self {
        Range(self.0.min(o.0), self.1.max(o.1))
    }
    fn spread(self) -> T {
        self.1 - self.0
    }
}

/// `f` on `[a, b]` laid out as knots `k_0 = a < k_1 < .. < k_K < k_{K+1} = b`.
struct Window<T: Scalar> {
    a: T,
    b: T,
    delta: T,
    tol: T,
    knots: Vec<T>,
    val: Vec<T>,
    slope: Vec<T>,
    left: Vec<T>,
    fb: T,
    fb_left: T,
    // indexed by knot j - 1 for j in 1..=K
    table: Option<Sparse<T>>,
}

struct HeapItem<T>(T, T);

impl<T: PartialOrd> PartialEq for HeapItem<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: PartialOrd> Eq for HeapItem<T> {}
impl<T: PartialOrd> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: PartialOrd> Ord for HeapItem<T> {
    // reversed so BinaryHeap pops the smallest start
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then(o.1.partial_cmp(&self.1).unwrap_or(Ordering::Equal))
    }
}

impl<T: Scalar> Window<T> {
    fn new(f: &PiecewisePath<T>, delta: T, a: T, b: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(argument(format!("delta must be positive, got {delta}")));
        }
        if !(a <= b) || delta > b - a {
            return Err(argument(format!(
                "delta {delta} exceeds interval length of [{a}, {b}]"
            )));
        }
        let g = f.restrict_closed(a, b)?;
        let (a, b) = (g.lo(), g.hi());
        let segs: Vec<_> = g.segments().iter().take_while(|s| s.start < b).copied().collect();
        let segs = if segs.is_empty() { vec![g.segments()[0]] } else { segs };
        let mut knots: Vec<T> = segs.iter().map(|s| s.start).collect();
        let val: Vec<T> = segs.iter().map(|s| s.value).collect();
        let slope: Vec<T> = segs.iter().map(|s| s.slope).collect();
        let kk = segs.len() - 1;
        let mut left = vec![val[0]];
        for j in 1..=kk {
            left.push(val[j - 1] + slope[j - 1] * (knots[j] - knots[j - 1]));
        }
        knots.push(b);
        let fb_left = val[kk] + slope[kk] * (b - knots[kk]);
        let fb = g.value(b);
        let table = (kk > 0).then(|| {
            let hi = (1..=kk).map(|j| left[j].max(val[j])).collect();
            let lo = (1..=kk).map(|j| left[j].min(val[j])).collect();
            Sparse::new(hi, lo)
        });
        let scale = T::one().max(a.abs()).max(b.abs());
        Ok(Window {
            a,
            b,
            delta,
            tol: T::breakpoint_tol() * scale,
            knots,
            val,
            slope,
            left,
            fb,
            fb_left,
            table,
        })
    }

    #[inline]
    fn kk(&self) -> usize {
        self.knots.len() - 2
    }

    #[inline]
    fn line(&self, i: usize, s: T) -> T {
        self.val[i] + self.slope[i] * (s - self.knots[i])
    }

    /// Piece containing `x`, snapping `x` onto a knot within tolerance.
    #[inline]
    fn piece_at(&self, x: T) -> usize {
        let kk = self.kk();
        let n = self.knots[..=kk].partition_point(|&k| k <= x + self.tol);
        n.saturating_sub(1).min(kk)
    }

    /// Piece holding `y-`: the last knot strictly below `y` (with tolerance).
    #[inline]
    fn piece_before(&self, y: T) -> usize {
        let kk = self.kk();
        let n = self.knots[..=kk].partition_point(|&k| k < y - self.tol);
        n.saturating_sub(1).min(kk)
    }

    /// Knots strictly inside `(x, y)`, both values, as (min, max).
    fn interior(&self, x: T, y: T) -> Option<(T, T)> {
        let lo = self.piece_at(x) + 1;
        let hi = self.piece_before(y);
        if lo > hi {
            return None;
        }
        self.table.as_ref().map(|t| t.query(lo - 1, hi - 1))
    }

    /// Value range of `f` over the half-open `[x, y)`, limit at `y` included.
    fn range_half(&self, x: T, y: T) -> Range<T> {
        let i = self.piece_at(x);
        let mut r = Range::of(self.line(i, x));
        if y >= self.b - self.tol {
            r = r.add(self.fb_left);
        } else {
            r = r.add(self.line(self.piece_before(y), y));
        }
        if let Some(m) = self.interior(x, y) {
            r = r.join(m);
        }
        r
    }

    fn osc_cell(&self, p: T) -> T {
        self.range_half(p, p + self.delta).spread()
    }

    fn osc_closed(&self, p: T) -> T {
        self.range_half(p, self.b).add(self.fb).spread()
    }

    /// Window `[p, k_j)` range for knot index `j > piece_at(p)`.
    fn window_to_knot(&self, v0: T, i: usize, j: usize) -> Range<T> {
        let mut r = Range::of(v0);
        r = r.add(if j == self.kk() + 1 { self.fb_left } else { self.left[j] });
        if j > i + 1 {
            if let Some(t) = &self.table {
                r = r.join(t.query(i, j - 2));
            }
        }
        r
    }

    /// Furthest `e ≤ b` with oscillation of `[p, e)` at most theta.
    fn reach(&self, p: T, theta: T) -> T {
        let i = self.piece_at(p);
        let v0 = self.line(i, p);
        let last = self.kk() + 1;
        if self.window_to_knot(v0, i, i + 1).spread() > theta {
            let s = self.slope[i].abs();
            return (p + theta / s).min(self.knots[i + 1]);
        }
        // largest knot j with window [p, k_j) within theta
        let (mut lo, mut hi) = (i + 1, last);
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.window_to_knot(v0, i, mid).spread() <= theta {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let j = lo;
        if j == last {
            return self.b;
        }
        let r = self.window_to_knot(v0, i, j).add(self.val[j]);
        if r.spread() > theta {
            return self.knots[j];
        }
        let (k, v, s) = (self.knots[j], self.val[j], self.slope[j]);
        let end = self.knots[j + 1];
        let e = if s > T::zero() {
            k + (r.0 + theta - v) / s
        } else if s < T::zero() {
            k + (v - (r.1 - theta)) / (-s)
        } else {
            end
        };
        e.max(k).min(end)
    }

    /// Live starts within `[u, v]` as closed intervals.
    fn live_on(&self, u: T, v: T, theta: T) -> Vec<(T, T)> {
        let d = self.delta;
        let inner = &self.knots[1..=self.kk()];
        let mut ev: Vec<T> = vec![u, v];
        ev.extend(inner.iter().copied().filter(|&k| k > u && k < v));
        ev.extend(inner.iter().map(|&k| k - d).filter(|&k| k > u && k < v));
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev.dedup_by(|x, y| (*x - *y).abs() <= self.tol);

        let mut out: Vec<(T, T)> = Vec::new();
        let push = |l: T, r: T, out: &mut Vec<(T, T)>| match out.last_mut() {
            Some(last) if l <= last.1 + self.tol => last.1 = last.1.max(r),
            _ => out.push((l, r)),
        };
        for (idx, &e0) in ev.iter().enumerate() {
            if self.osc_cell(e0) <= theta {
                push(e0, e0, &mut out);
            }
            if let Some(&e1) = ev.get(idx + 1) {
                if e1 - e0 > self.tol {
                    if let Some((l, r)) = self.sublevel(e0, e1, theta) {
                        push(l, r, &mut out);
                    }
                }
            }
        }
        out
    }

    /// Closure of `{p ∈ (e0, e1) : osc_cell(p) ≤ θ}`; the cell layout is fixed there.
    fn sublevel(&self, e0: T, e1: T, theta: T) -> Option<(T, T)> {
        let d = self.delta;
        let half = T::lit(0.5);
        let m = (e0 + e1) * half;
        let i = self.piece_at(m);
        let ie = if m + d >= self.b - self.tol {
            self.kk()
        } else {
            self.piece_before(m + d)
        };
        let inner = self.interior(m, m + d);
        // L1(p) = c1 + s1 p, L2(p) = c2 + s2 p
        let (s1, s2) = (self.slope[i], self.slope[ie]);
        let c1 = self.val[i] - s1 * self.knots[i];
        let c2 = self.val[ie] + s2 * (d - self.knots[ie]);
        let g = |p: T| {
            let (l1, l2) = (c1 + s1 * p, c2 + s2 * p);
            let mut r = Range::of(l1).add(l2);
            if let Some(mm) = inner {
                r = r.join(mm);
            }
            r.spread()
        };
        let mut cand = vec![e0, e1];
        let mut root = |c: T, s: T| {
            if s != T::zero() {
                let p = -c / s;
                if p > e0 && p < e1 {
                    cand.push(p);
                }
            }
        };
        root(c1 - c2, s1 - s2);
        if let Some((lo, hi)) = inner {
            root(c1 - hi, s1);
            root(c2 - hi, s2);
            root(c1 - lo, s1);
            root(c2 - lo, s2);
        }
        cand.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let vals: Vec<T> = cand.iter().map(|&p| g(p)).collect();
        let mut res: Option<(T, T)> = None;
        let mut take = |l: T, r: T| {
            res = Some(match res {
                None => (l, r),
                Some((a, b)) => (a.min(l), b.max(r)),
            })
        };
        for w in 0..cand.len() - 1 {
            let (x0, x1, g0, g1) = (cand[w], cand[w + 1], vals[w], vals[w + 1]);
            match (g0 <= theta, g1 <= theta) {
                (true, true) => take(x0, x1),
                (true, false) => take(x0, x0 + (theta - g0) / (g1 - g0) * (x1 - x0)),
                (false, true) => take(x1 - (theta - g1) / (g0 - g1) * (x1 - x0), x1),
                (false, false) => {}
            }
        }
        res
    }

    fn feasible(&self, theta: T) -> bool {
        let d = self.delta;
        let last_start = self.b - d;
        if self.osc_closed(self.a) <= theta {
            return true;
        }
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(self.a, self.a));
        let mut done: Option<T> = None;
        while let Some(HeapItem(s, e)) = heap.pop() {
            if s > last_start + self.tol {
                break;
            }
            let s = s.min(last_start);
            let e = e.min(last_start);
            let (u, v) = match done {
                Some(pe) if s <= pe => {
                    if e <= pe {
                        continue;
                    }
                    (pe, e)
                }
                _ => (s, e),
            };
            done = Some(done.map_or(v, |pe| pe.max(v)));
            if self.osc_closed(v) <= theta {
                return true;
            }
            let live = self.live_on(u, v, theta);
            let v_live = live.last().is_some_and(|&(_, r)| r >= v - self.tol);
            for (l, r) in live {
                heap.push(HeapItem(l + d, r + d));
            }
            if v_live {
                let ev = self.reach(v, theta);
                if ev >= v + d - self.tol {
                    heap.push(HeapItem(v + d, ev));
                }
            }
        }
        false
    }

    fn modulus(&self) -> T {
        let mut hi = self.osc_closed(self.a);
        if hi <= T::zero() || self.feasible(T::zero()) {
            return T::zero();
        }
        let mut lo = T::zero();
        let eps = T::epsilon() * T::lit(4.0);
        for _ in 0..200 {
            if hi - lo <= eps * hi {
                break;
            }
            let mid = lo + (hi - lo) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = PiecewisePath<f64>;
    use crate::cadlag::Segment;
    use proptest::prelude::*;

    /// Brute force over partitions whose boundaries sit on a grid of spacing `h`.
    /// Exact for step functions with grid-aligned jumps when `delta` is a grid multiple.
    fn grid_modulus(f: &PiecewisePath<f64>, delta: f64, a: f64, b: f64, h: f64) -> f64 {
        let n = ((b - a) / h).round() as usize;
        let m = (delta / h).round() as usize;
        let pt = |i: usize| a + (b - a) * (i as f64 / n as f64);
        // range of f over [pt(i), pt(j)), plus f(pt(j)) when closed
        let cell = |i: usize, j: usize, closed: bool| {
            let mut vals = vec![f.value(pt(i)), f.value_left(pt(j))];
            for k in i + 1..j {
                vals.push(f.value_left(pt(k)));
                vals.push(f.value(pt(k)));
            }
            if closed {
                vals.push(f.value(pt(j)));
            }
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            hi - lo
        };
        let mut best = vec![f64::INFINITY; n + 1];
        best[0] = 0.0;
        for j in m..n {
            for i in 0..=j - m {
                if best[i].is_finite() {
                    best[j] = best[j].min(best[i].max(cell(i, j, false)));
                }
            }
        }
        let mut ans = f64::INFINITY;
        for i in 0..=n - m {
            if best[i].is_finite() {
                ans = ans.min(best[i].max(cell(i, n, true)));
            }
        }
        ans
    }

    #[test]
    fn constant_is_zero() {
        let f = P::constant(0.0, 1.0, 3.0).unwrap();
        for d in [0.01, 0.3, 1.0] {
            assert_eq!(oscillation(&f, d, 0.0, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_interior_jump_is_split() {
        let f = P::step(0.0, 1.0, 0.0, &[(0.5, 1.0)]).unwrap();
        assert_eq!(oscillation(&f, 0.2, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(oscillation(&f, 0.5, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(oscillation(&f, 0.6, 0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn identity_quarter_mesh() {
        let f = P::linear(0.0, 1.0, 0.0, 1.0).unwrap();
        let w = oscillation(&f, 0.25, 0.0, 1.0).unwrap();
        assert!((w - 0.25).abs() < 1e-12, "{w}");
    }

    #[test]
    fn identity_off_grid_mesh() {
        // three cells of length 1/3 beat any δ-grid anchored partition
        let f = P::linear(0.0, 1.0, 0.0, 1.0).unwrap();
        let w = oscillation(&f, 0.3, 0.0, 1.0).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn isolated_boundary_required() {
        // jumps at 0.3 and 0.6 with δ = 0.3 force boundaries exactly there
        let f = P::step(0.0, 1.0, 0.0, &[(0.3, 1.0), (0.6, 2.0)]).unwrap();
        assert_eq!(oscillation(&f, 0.3, 0.0, 1.0).unwrap(), 0.0);
        let w = oscillation(&f, 0.31, 0.0, 1.0).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sawtooth_matches_closed_form() {
        // slope 2 teeth of width 0.5 dropping back to 0: cells can hug each tooth
        let f = P::new(
            0.0,
            1.0,
            vec![Segment::new(0.0, 0.0, 2.0), Segment::new(0.5, 0.0, 2.0)],
        )
        .unwrap();
        let w = oscillation(&f, 0.25, 0.0, 1.0).unwrap();
        assert!((w - 0.5).abs() < 1e-12, "{w}");
    }

    #[test]
    fn argument_errors() {
        let f = P::constant(0.0, 1.0, 0.0).unwrap();
        assert!(oscillation(&f, 0.0, 0.0, 1.0).is_err());
        assert!(oscillation(&f, 1.5, 0.0, 1.0).is_err());
        assert!(oscillation(&f, 0.5, 0.0, 2.0).is_err());
    }

    #[test]
    fn subinterval_and_f32() {
        let f = PiecewisePath::<f32>::linear(0.0, 2.0, 0.0, 1.0).unwrap();
        let w = oscillation(&f, 0.25, 0.5, 1.5).unwrap();
        assert!((w - 0.25).abs() < 1e-5);
    }

    #[test]
    fn decision_matches_value() {
        let f = P::linear(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(oscillation_at_most(&f, 0.3, 0.0, 1.0, 0.334).unwrap());
        assert!(!oscillation_at_most(&f, 0.3, 0.0, 1.0, 0.333).unwrap());
    }

    fn step_strategy() -> impl Strategy<Value = PiecewisePath<f64>> {
        // grid of 40 cells on [0,1], up to 8 jumps
        prop::collection::btree_map(1usize..40, -3i32..=3, 0..8).prop_map(|m| {
            let jumps: Vec<(f64, f64)> =
                m.into_iter().map(|(k, v)| (k as f64 / 40.0, v as f64 * 0.25)).collect();
            P::step(0.0, 1.0, 0.0, &jumps).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn matches_grid_brute_force(f in step_strategy(), m in 1usize..12) {
            let delta = m as f64 / 40.0;
            let w = oscillation(&f, delta, 0.0, 1.0).unwrap();
            let b = grid_modulus(&f, delta, 0.0, 1.0, 1.0 / 40.0);
            prop_assert!((w - b).abs() < 1e-9, "exact {} brute {}", w, b);
        }

        #[test]
        fn nonincreasing_in_delta(f in step_strategy(), m in 1usize..20) {
            let d1 = m as f64 / 41.0;
            let d2 = d1 * 1.37;
            let w1 = oscillation(&f, d1, 0.0, 1.0).unwrap();
            let w2 = oscillation(&f, d2, 0.0, 1.0).unwrap();
            prop_assert!(w1 <= w2 + 1e-9);
        }

        #[test]
        fn slopes_bounded_by_fine_grid(
            slopes in prop::collection::vec(-2.0f64..2.0, 1..5),
            jumps in prop::collection::vec(-1.0f64..1.0, 4),
            m in 2usize..8,
        ) {
            let n = slopes.len();
            let mut segs = Vec::new();
            for (i, &s) in slopes.iter().enumerate() {
                segs.push(Segment::new(i as f64 / n as f64, jumps[i % 4], s));
            }
            let f = P::new(0.0, 1.0, segs).unwrap();
            let delta = m as f64 / 20.0;
            let w = oscillation(&f, delta, 0.0, 1.0).unwrap();
            let h = 1.0 / 240.0;
            // grid partitions are admissible
            let b = grid_modulus(&f, delta, 0.0, 1.0, h);
            prop_assert!(w <= b + 1e-9, "exact {} grid {}", w, b);
            // rounding an optimal partition to the grid shortens cells by < 2h
            let b2 = grid_modulus(&f, delta - 2.0 * h, 0.0, 1.0, h);
            prop_assert!(b2 <= w + 2.0 * 2.0 * h + 1e-9, "exact {} coarse grid {}", w, b2);
        }
    }
}
