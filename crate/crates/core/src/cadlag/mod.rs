//! Piecewise-linear cadlag functions on closed intervals.
//!
//! A [`PiecewisePath`] is a right-continuous function with left limits made
//! of linear pieces. Segment `k` covers `[start_k, start_{k+1})`; the last
//! segment runs through `hi` inclusive. A jump at `start_k` is a difference
//! between the segment's starting value and the left limit of the previous
//! segment.

mod modulus;
pub(crate) mod skorohod;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::scalar::Scalar;

pub use modulus::{oscillation, oscillation_at_most};
pub use skorohod::{path_dist, path_dist_tolerance, path_dist_with_tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: T,
    pub value: T,
    pub slope: T,
}

impl<T: Scalar> Segment<T> {
    #[inline]
    pub fn new(start: T, value: T, slope: T) -> Self {
        Segment { start, value, slope }
    }

    #[inline]
    pub fn at(&self, s: T) -> T {
        self.value + self.slope * (s - self.start)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRepr<T>", into = "PathRepr<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct PiecewisePath<T: Scalar> {
    lo: T,
    hi: T,
    segments: Vec<Segment<T>>,
}

/// Wire form: `{"lo":..,"hi":..,"segments":[[start,value,slope],..]}`.
#[derive(Serialize, Deserialize)]
struct PathRepr<T> {
    lo: T,
    hi: T,
    segments: Vec<[T; 3]>,
}

impl<T: Scalar> TryFrom<PathRepr<T>> for PiecewisePath<T> {
    type Error = Error;

    fn try_from(r: PathRepr<T>) -> Result<Self> {
        let segs = r
            .segments
            .into_iter()
            .map(|[s, v, k]| Segment::new(s, v, k))
            .collect();
        PiecewisePath::new(r.lo, r.hi, segs)
    }
}

impl<T: Scalar> From<PiecewisePath<T>> for PathRepr<T> {
    fn from(p: PiecewisePath<T>) -> Self {
        PathRepr {
            lo: p.lo,
            hi: p.hi,
            segments: p
                .segments
                .iter()
                .map(|s| [s.start, s.value, s.slope])
                .collect(),
        }
    }
}

impl<T: Scalar> PiecewisePath<T> {
    /// Builds a path, checking the segment layout.
    pub fn new(lo: T, hi: T, segments: Vec<Segment<T>>) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(argument(format!("bad domain [{lo}, {hi}]")));
        }
        let first = segments
            .first()
            .ok_or_else(|| argument("path needs at least one segment"))?;
        if first.start != lo {
            return Err(argument(format!(
                "first segment starts at {} but domain starts at {lo}",
                first.start
            )));
        }
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(argument("segment starts must be strictly increasing"));
            }
        }
        for s in &segments {
            if !(s.value.is_finite() && s.slope.is_finite() && s.start.is_finite()) {
                return Err(argument("non-finite segment data"));
            }
            if s.start > hi {
                return Err(argument(format!("segment start {} beyond hi {hi}", s.start)));
            }
        }
        Ok(PiecewisePath { lo, hi, segments })
    }

    pub fn constant(lo: T, hi: T, value: T) -> Result<Self> {
        Self::new(lo, hi, vec![Segment::new(lo, value, T::zero())])
    }

    pub fn linear(lo: T, hi: T, value_at_lo: T, slope: T) -> Result<Self> {
        Self::new(lo, hi, vec![Segment::new(lo, value_at_lo, slope)])
    }

    /// Step function with value `initial` on `[lo, t_1)` and `v_k` on `[t_k, t_{k+1})`.
    pub fn step(lo: T, hi: T, initial: T, jumps: &[(T, T)]) -> Result<Self> {
        let mut segs = vec![Segment::new(lo, initial, T::zero())];
        segs.extend(jumps.iter().map(|&(t, v)| Segment::new(t, v, T::zero())));
        Self::new(lo, hi, segs)
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> T {
        self.hi
    }

    #[inline]
    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Index of the segment covering `s` (right-continuous convention).
    #[inline]
    pub(crate) fn seg_index(&self, s: T) -> usize {
        let n = self.segments.partition_point(|seg| seg.start <= s);
        n.saturating_sub(1)
    }

    /// Right end of segment `k`.
    #[inline]
    pub(crate) fn seg_end(&self, k: usize) -> T {
        self.segments
            .get(k + 1)
            .map(|s| s.start)
            .unwrap_or(self.hi)
    }

    fn check_domain(&self, s: T) -> Result<()> {
        let tol = T::breakpoint_tol();
        if s.is_nan() || s < self.lo - tol || s > self.hi + tol {
            return Err(Error::Domain(format!(
                "{s} outside [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn eval(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(self.value(s))
    }

    /// Left limit at `s`; equals `eval(lo)` at the left endpoint.
    pub fn eval_left(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        Ok(self.value_left(s))
    }

    #[inline]
    pub(crate) fn value(&self, s: T) -> T {
        let s = s.max(self.lo).min(self.hi);
        self.segments[self.seg_index(s)].at(s)
    }

    #[inline]
    pub(crate) fn value_left(&self, s: T) -> T {
        let s = s.max(self.lo).min(self.hi);
        if s <= self.lo {
            return self.segments[0].at(self.lo);
        }
        let k = self.segments.partition_point(|seg| seg.start < s);
        self.segments[k - 1].at(s)
    }

    /// Left limit of the function at the start of segment `k >= 1`.
    #[inline]
    pub(crate) fn left_limit_at(&self, k: usize) -> T {
        let s = self.segments[k].start;
        self.segments[k - 1].at(s)
    }

    /// Restriction to `[c, d]`, `c < d`.
    pub fn restrict(&self, c: T, d: T) -> Result<Self> {
        if !(c < d) {
            return Err(argument(format!("restrict needs c < d, got [{c}, {d}]")));
        }
        self.restrict_closed(c, d)
    }

    /// Restriction allowing the degenerate interval `c == d`.
    pub(crate) fn restrict_closed(&self, c: T, d: T) -> Result<Self> {
        let tol = T::breakpoint_tol();
        if c > d || c < self.lo - tol || d > self.hi + tol {
            return Err(argument(format!(
                "[{c}, {d}] not inside [{}, {}]",
                self.lo, self.hi
            )));
        }
        let c = c.max(self.lo);
        let d = d.min(self.hi).max(c);
        let k0 = self.seg_index(c);
        let mut segs = Vec::with_capacity(self.segments.len() - k0);
        segs.push(Segment::new(c, self.segments[k0].at(c), self.segments[k0].slope));
        for seg in &self.segments[k0 + 1..] {
            if seg.start > d {
                break;
            }
            segs.push(*seg);
        }
        Ok(PiecewisePath {
            lo: c,
            hi: d,
            segments: segs,
        })
    }

    /// Restricts to `[c, d]` and continues linearly on `[c-1, c)` and `(d, d+1]`.
    ///
    /// `pre_slope` and `post_slope` are 0 for spatial coordinates and 1 for ages.
    pub fn extend_flat(&self, c: T, d: T, pre_slope: T, post_slope: T) -> Result<Self> {
        let core = self.restrict_closed(c, d)?;
        let one = T::one();
        let fc = core.segments[0].value;
        let fd = core.value(core.hi);
        let mut segs = Vec::with_capacity(core.segments.len() + 2);
        segs.push(Segment::new(c - one, fc - pre_slope, pre_slope));
        segs.extend(core.segments.iter().copied());
        let tail = Segment::new(core.hi, fd, post_slope);
        match segs.last_mut() {
            Some(last) if last.start == core.hi => *last = tail,
            _ => segs.push(tail),
        }
        PiecewisePath::new(c - one, core.hi + one, segs)
    }

    /// Jumps with `|size| >= min_size`, ascending, with signed sizes.
    pub fn jumps(&self, min_size: T) -> Vec<(T, T)> {
        let tol = T::breakpoint_tol();
        (1..self.segments.len())
            .filter_map(|k| {
                let size = self.segments[k].value - self.left_limit_at(k);
                (size.abs() > tol && size.abs() >= min_size).then(|| (self.segments[k].start, size))
            })
            .collect()
    }

    /// Jump times of any size above the breakpoint tolerance.
    pub fn jump_times(&self) -> Vec<T> {
        self.jumps(T::zero()).into_iter().map(|(t, _)| t).collect()
    }

    /// Exact `(min, max)` over the closed interval `[c, d]`, left limits included.
    pub fn range_on(&self, c: T, d: T) -> (T, T) {
        let c = c.max(self.lo);
        let d = d.min(self.hi).max(c);
        let k0 = self.seg_index(c);
        let first = self.segments[k0].at(c);
        let (mut lo, mut hi) = (first, first);
        let mut k = k0;
        loop {
            let end = self.seg_end(k).min(d);
            let v = self.segments[k].at(end);
            lo = lo.min(v);
            hi = hi.max(v);
            if k + 1 >= self.segments.len() || self.segments[k + 1].start > d {
                break;
            }
            k += 1;
            let v = self.segments[k].value;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    pub fn max_abs_slope(&self) -> T {
        self.segments
            .iter()
            .fold(T::zero(), |m, s| m.max(s.slope.abs()))
    }

    /// Breakpoints (segment starts after the first).
    pub fn breakpoints(&self) -> impl Iterator<Item = T> + '_ {
        self.segments.iter().skip(1).map(|s| s.start)
    }

    /// Merges adjacent segments that join continuously with the same slope.
    pub fn simplified(&self) -> Self {
        let tol = T::breakpoint_tol();
        let mut segs: Vec<Segment<T>> = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            if let Some(prev) = segs.last() {
                if (prev.at(seg.start) - seg.value).abs() <= tol
                    && (prev.slope - seg.slope).abs() <= tol
                {
                    continue;
                }
            }
            segs.push(*seg);
        }
        PiecewisePath {
            lo: self.lo,
            hi: self.hi,
            segments: segs,
        }
    }

    /// Pointwise agreement on `[c, d]` at all breakpoints of both paths (values and left limits).
    pub fn agrees_with_on(&self, other: &Self, c: T, d: T, tol: T) -> bool {
        let mut pts: Vec<T> = vec![c, d];
        pts.extend(self.breakpoints().filter(|&s| s > c && s <= d));
        pts.extend(other.breakpoints().filter(|&s| s > c && s <= d));
        pts.iter().all(|&s| {
            (self.value(s) - other.value(s)).abs() <= tol
                && (s <= c || (self.value_left(s) - other.value_left(s)).abs() <= tol)
        })
    }

    /// Converts the scalar type.
    pub fn cast<U: Scalar>(&self) -> PiecewisePath<U> {
        let c = |x: T| U::lit(x.to_f64_lossy());
        PiecewisePath {
            lo: c(self.lo),
            hi: c(self.hi),
            segments: self
                .segments
                .iter()
                .map(|s| Segment::new(c(s.start), c(s.value), c(s.slope)))
                .collect(),
        }
    }
}
