//! Aged paths: a birth time, a spatial path and an age path.
//!
//! The open half-line after the birth time is represented by the closed
//! interval `[sigma + eps0, horizon]`, so "the age tends to zero at birth"
//! becomes `age(sigma + eps0) ≤ eps0`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cadlag::PiecewisePath;
use crate::error::{argument, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AgedRepr<T>", into = "AgedRepr<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct AgedPath<T: Scalar> {
    sigma: T,
    gamma: PiecewisePath<T>,
    age: PiecewisePath<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
struct AgedRepr<T: Scalar> {
    sigma: T,
    gamma: PiecewisePath<T>,
    age: PiecewisePath<T>,
}

impl<T: Scalar> TryFrom<AgedRepr<T>> for AgedPath<T> {
    type Error = Error;
    fn try_from(r: AgedRepr<T>) -> Result<Self> {
        AgedPath::new(r.sigma, r.gamma, r.age)
    }
}

impl<T: Scalar> From<AgedPath<T>> for AgedRepr<T> {
    fn from(p: AgedPath<T>) -> Self {
        AgedRepr {
            sigma: p.sigma,
            gamma: p.gamma,
            age: p.age,
        }
    }
}

/// `(γ, a)` restricted to `[b, t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct TruncatedPath<T: Scalar> {
    pub b: T,
    pub t: T,
    pub gamma: PiecewisePath<T>,
    pub age: PiecewisePath<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    /// age vanishes at birth
    BirthAge,
    /// age grows at least at unit rate
    AgeGrowth,
    /// no simultaneous jumps
    DisjointJumps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T> {
    pub clause: Clause,
    pub time: T,
    pub detail: String,
}

impl<T: fmt::Display> fmt::Display for Violation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.clause, self.time, self.detail)
    }
}

impl<T: Scalar> AgedPath<T> {
    /// Both paths must share the domain `[sigma + eps0, horizon]` with `eps0 ≥ 0`.
    pub fn new(sigma: T, gamma: PiecewisePath<T>, age: PiecewisePath<T>) -> Result<Self> {
        let tol = T::breakpoint_tol();
        if (gamma.lo() - age.lo()).abs() > tol || (gamma.hi() - age.hi()).abs() > tol {
            return Err(argument(format!(
                "gamma on [{}, {}] but age on [{}, {}]",
                gamma.lo(),
                gamma.hi(),
                age.lo(),
                age.hi()
            )));
        }
        if !sigma.is_finite() || gamma.lo() < sigma - tol {
            return Err(argument(format!(
                "domain starts at {} before birth {sigma}",
                gamma.lo()
            )));
        }
        Ok(AgedPath { sigma, gamma, age })
    }

    #[inline]
    pub fn sigma(&self) -> T {
        self.sigma
    }
    #[inline]
    pub fn gamma(&self) -> &PiecewisePath<T> {
        &self.gamma
    }
    #[inline]
    pub fn age(&self) -> &PiecewisePath<T> {
        &self.age
    }
    #[inline]
    pub fn eps0(&self) -> T {
        (self.gamma.lo() - self.sigma).max(T::zero())
    }
    #[inline]
    pub fn horizon(&self) -> T {
        self.gamma.hi()
    }
    #[inline]
    pub fn start(&self) -> T {
        self.gamma.lo()
    }

    /// Lists every violated clause with a witness time; empty when valid.
    pub fn validate(&self) -> Vec<Violation<T>> {
        let tol = T::agreement_tol();
        let mut out = Vec::new();
        let a0 = self.age.value(self.start());
        if a0 > self.eps0() + tol {
            out.push(Violation {
                clause: Clause::BirthAge,
                time: self.start(),
                detail: format!("age {a0} exceeds offset {}", self.eps0()),
            });
        }
        for seg in self.age.segments() {
            if seg.slope < T::one() - tol {
                out.push(Violation {
                    clause: Clause::AgeGrowth,
                    time: seg.start,
                    detail: format!("age slope {} below one", seg.slope),
                });
            }
        }
        for (s, size) in self.age.jumps(T::zero()) {
            if size < -tol {
                out.push(Violation {
                    clause: Clause::AgeGrowth,
                    time: s,
                    detail: format!("age jumps down by {}", -size),
                });
            }
        }
        let gj = self.gamma.jump_times();
        let bt = T::breakpoint_tol();
        for s in self.age.jump_times() {
            let i = gj.partition_point(|&g| g < s - bt);
            if gj.get(i).is_some_and(|&g| (g - s).abs() <= bt) {
                out.push(Violation {
                    clause: Clause::DisjointJumps,
                    time: s,
                    detail: "gamma and age jump together".into(),
                });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// `b_t` for the dyadic threshold `2^{-t}`.
    pub fn birth_window(&self, t: T) -> Result<Option<T>> {
        self.birth_window_h(t, T::lit(2.0).powf(-t))
    }

    /// First time in `[-t, t]` with `γ ∈ [-t, t]` and `a ≥ level`.
    pub fn birth_window_h(&self, t: T, level: T) -> Result<Option<T>> {
        if !(t >= T::one()) {
            return Err(argument(format!("t must be at least 1, got {t}")));
        }
        if !(level > T::zero()) {
            return Err(argument(format!("threshold must be positive, got {level}")));
        }
        let lo = (-t).max(self.start());
        let hi = t.min(self.horizon());
        if lo > hi {
            return Ok(None);
        }
        // walk the common refinement of both segment lists
        let mut cuts: Vec<T> = vec![lo];
        cuts.extend(self.gamma.breakpoints().filter(|&s| s > lo && s < hi));
        cuts.extend(self.age.breakpoints().filter(|&s| s > lo && s < hi));
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        for (i, &k) in cuts.iter().enumerate() {
            let (end, closed) = match cuts.get(i + 1) {
                Some(&e) => (e, false),
                None => (hi, true),
            };
            let gs = self.gamma.segments()[self.gamma.seg_index(k)];
            let as_ = self.age.segments()[self.age.seg_index(k)];
            // feasible s form an interval [l, r]
            let mut l = k;
            let mut r = end;
            let (gv, gsl) = (gs.at(k), gs.slope);
            for (bound, upper) in [(t, true), (-t, false)] {
                // upper: gv + gsl (s-k) <= bound ; lower: >= bound
                let c = bound - gv;
                let (lim, is_upper_on_s) = if gsl == T::zero() {
                    let ok = if upper { c >= T::zero() } else { c <= T::zero() };
                    if !ok {
                        l = T::infinity();
                    }
                    continue;
                } else {
                    (k + c / gsl, (gsl > T::zero()) == upper)
                };
                if is_upper_on_s {
                    r = r.min(lim);
                } else {
                    l = l.max(lim);
                }
            }
            let (av, asl) = (as_.at(k), as_.slope);
            if av < level {
                if asl > T::zero() {
                    l = l.max(k + (level - av) / asl);
                } else {
                    l = T::infinity();
                }
            }
            let inside = if closed { l <= r } else { l <= r && l < end };
            if inside {
                return Ok(Some(l.max(k)));
            }
        }
        Ok(None)
    }

    /// `Π_t`: restriction to `[b_t, t]`, or `None`.
    pub fn project(&self, t: T) -> Result<Option<TruncatedPath<T>>> {
        self.project_h(t, T::lit(2.0).powf(-t))
    }

    /// `Π_t^h` with threshold `h(t)` in place of `2^{-t}`.
    pub fn project_h(&self, t: T, h_at_t: T) -> Result<Option<TruncatedPath<T>>> {
        let Some(b) = self.birth_window_h(t, h_at_t)? else {
            return Ok(None);
        };
        let hi = t.min(self.horizon());
        Ok(Some(TruncatedPath {
            b,
            t,
            gamma: self.gamma.restrict_closed(b, hi)?,
            age: self.age.restrict_closed(b, hi)?,
        }))
    }

    /// `inf{s : a(s) ≥ level}`.
    pub fn first_age_time(&self, level: T) -> Result<Option<T>> {
        if !(level > T::zero()) {
            return Err(argument(format!("level must be positive, got {level}")));
        }
        let segs = self.age.segments();
        for (k, seg) in segs.iter().enumerate() {
            if seg.value >= level {
                return Ok(Some(seg.start));
            }
            if seg.slope > T::zero() {
                let s = seg.start + (level - seg.value) / seg.slope;
                let end = self.age.seg_end(k);
                let last = k + 1 == segs.len();
                if s < end || (last && s <= end) {
                    return Ok(Some(s));
                }
            }
        }
        Ok(None)
    }

    pub fn cast<U: Scalar>(&self) -> AgedPath<U> {
        AgedPath {
            sigma: U::lit(self.sigma.to_f64_lossy()),
            gamma: self.gamma.cast(),
            age: self.age.cast(),
        }
    }
}

impl<T: Scalar> TruncatedPath<T> {
    /// `(γ^t, a^t)` on `[-(t+1), t+1]`: γ held constant, age continued at slope one.
    ///
    /// The intermediate extensions reach only `[b-1, t+1]`; they are padded
    /// out to `-(t+1)` the same way.
    pub fn canonical_extension(&self) -> Result<(PiecewisePath<T>, PiecewisePath<T>)> {
        let one = T::one();
        let t = self.t;
        let lo = -(t + one);
        let g = pad_left(self.gamma.extend_flat(self.b, self.gamma.hi(), T::zero(), T::zero())?, lo)?;
        let a = pad_left(self.age.extend_flat(self.b, self.age.hi(), one, one)?, lo)?;
        Ok((g, a))
    }
}

/// Extends the first linear piece further left, down to `lo`.
fn pad_left<T: Scalar>(f: PiecewisePath<T>, lo: T) -> Result<PiecewisePath<T>> {
    if f.lo() <= lo {
        return Ok(f);
    }
    let mut segs = f.segments().to_vec();
    let first = segs[0];
    segs[0] = crate::cadlag::Segment::new(lo, first.at(lo), first.slope);
    PiecewisePath::new(lo, f.hi(), segs)
}
