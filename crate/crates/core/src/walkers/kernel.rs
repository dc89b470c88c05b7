//! Symmetric jump kernels in the domain of attraction of an α-stable law.

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use crate::error::{argument, Result};

/// Step distribution on `{-R, .., R}`.
///
/// For `α < 2`, `p(n) = C |n|^{-1-α}` with `C = 1 / (2 ζ(1+α))`, so that the
/// untruncated law would sum to one; the mass beyond the radius is put on 0.
/// For `α = 2` it is the lazy nearest-neighbour walk.
#[derive(Clone, Debug)]
pub struct Kernel {
    alpha: f64,
    radius: usize,
    pmf: Vec<f64>,
    tail_constant: f64,
    alias: Option<WeightedAliasIndex<f64>>,
}

impl Kernel {
    pub fn new(alpha: f64, radius: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(argument(format!("alpha must lie in (1, 2], got {alpha}")));
        }
        if radius == 0 {
            return Err(argument("kernel radius must be at least 1"));
        }
        if alpha == 2.0 {
            return Ok(Kernel {
                alpha,
                radius: 1,
                pmf: vec![0.25, 0.5, 0.25],
                tail_constant: 0.0,
                alias: None,
            });
        }
        let c = 0.5 / zeta(1.0 + alpha);
        let mut pmf = vec![0.0; 2 * radius + 1];
        let mut mass = 0.0;
        // accumulate small terms first
        for n in (1..=radius).rev() {
            let p = c * (n as f64).powf(-1.0 - alpha);
            pmf[radius + n] = p;
            pmf[radius - n] = p;
            mass += 2.0 * p;
        }
        pmf[radius] = (1.0 - mass).max(0.0);
        let alias = WeightedAliasIndex::new(pmf.clone())
            .map_err(|e| argument(format!("kernel weights: {e}")))?;
        Ok(Kernel {
            alpha,
            radius,
            pmf,
            tail_constant: c,
            alias: Some(alias),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    pub fn pmf(&self, n: i64) -> f64 {
        let r = self.radius as i64;
        if n.abs() > r {
            0.0
        } else {
            self.pmf[(n + r) as usize]
        }
    }

    /// Masses on `-R..=R`.
    pub fn masses(&self) -> &[f64] {
        &self.pmf
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.alias {
            Some(a) => a.sample(rng) as i64 - self.radius as i64,
            None => match rng.random::<u32>() >> 30 {
                0 => -1,
                3 => 1,
                _ => 0,
            },
        }
    }

    /// Spatial scale `N^{1/α}` at time scale `N`.
    pub fn space_scale(&self, n: f64) -> f64 {
        n.powf(1.0 / self.alpha)
    }
}

/// Riemann zeta for `s > 1`: direct sum plus an Euler–Maclaurin tail.
pub fn zeta(s: f64) -> f64 {
    let k = 64usize;
    let kf = k as f64;
    let mut sum = 0.0;
    for n in (1..k).rev() {
        sum += (n as f64).powf(-s);
    }
    // Σ_{n≥K} n^{-s} ≈ K^{1-s}/(s-1) + K^{-s}/2 + s K^{-s-1}/12 - s(s+1)(s+2) K^{-s-3}/720
    let tail = kf.powf(1.0 - s) / (s - 1.0) + 0.5 * kf.powf(-s) + s * kf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * kf.powf(-s - 3.0) / 720.0;
    sum + tail
}
