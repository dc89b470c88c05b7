//! Insulating paths: old paths that stay inside a unit cell over a time window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{experiment_error, ExperimentReport};
use super::seed_list;
use super::stats::{batched, linear_fit};
use crate::error::{argument, Result};
use crate::walkers::Kernel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsulationConfig {
    pub n_values: Vec<usize>,
    /// lattice sites per unit length; a unit of time is `2K²` steps
    pub sites_per_unit: usize,
    /// paths must be older than this at time 0; by Brownian scaling, age
    /// and window `1/w²` match unit age and window with cells of width `w`
    pub age: f64,
    /// paths must stay in their cell over `[0, window]`
    pub window: f64,
    /// units of space simulated beyond the cells on each side
    pub buffer_units: usize,
    /// walks used for the single-cell Monte Carlo estimate
    pub oracle_samples: usize,
    pub seed: u64,
    pub seeds: usize,
}

impl Default for InsulationConfig {
    fn default() -> Self {
        InsulationConfig {
            n_values: (2..=12).collect(),
            sites_per_unit: 72,
            age: 0.25,
            window: 0.25,
            buffer_units: 2,
            oracle_samples: 200_000,
            seed: 1,
            seeds: 10_000,
        }
    }
}

pub fn insulation_probe(n_values: &[usize], seeds: &[u64]) -> Result<ExperimentReport> {
    let cfg = InsulationConfig {
        n_values: n_values.to_vec(),
        ..InsulationConfig::default()
    };
    run(&cfg, seeds)
}

pub fn insulation_probe_with(cfg: &InsulationConfig) -> Result<ExperimentReport> {
    run(cfg, &seed_list(cfg.seed, cfg.seeds))
}

struct Lattice {
    k: usize,
    /// cells 2..=n_max are watched
    n_max: usize,
    buffer: usize,
    pre_steps: usize,
    win_steps: usize,
}

impl Lattice {
    fn new(cfg: &InsulationConfig, n_max: usize) -> Self {
        let k = cfg.sites_per_unit;
        let per_unit = 2.0 * (k * k) as f64;
        Lattice {
            k,
            n_max,
            buffer: cfg.buffer_units,
            pre_steps: (per_unit * cfg.age).round() as usize,
            win_steps: (per_unit * cfg.window).round() as usize,
        }
    }

    /// sites cover `[1 - buffer, n_max + buffer]`; site i sits at `1 - buffer + i/K`
    fn width(&self) -> usize {
        (self.n_max - 1 + 2 * self.buffer) * self.k + 1
    }

    /// watched cell containing site i in its interior, as `k - 2`
    fn cell(&self, i: usize) -> Option<usize> {
        let off = i.checked_sub(self.buffer * self.k)?;
        if off % self.k == 0 {
            return None;
        }
        let c = off / self.k;
        (c + 2 <= self.n_max).then_some(c)
    }

    /// Smallest watched cell holding an insulating path, as `k`.
    fn first_insulated(&self, seed: u64) -> Option<usize> {
        let kernel = Kernel::new(2.0, 1).expect("lazy kernel");
        let width = self.width();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos: Vec<u32> = (0..width as u32).collect();
        let mut stay: Vec<bool> = vec![false; width];
        let (mut npos, mut nstay) = (Vec::with_capacity(width), Vec::with_capacity(width));
        let mut stamp = vec![0u32; width];
        let mut slot = vec![0u32; width];
        let total = self.pre_steps + self.win_steps;
        for m in 1..=total {
            if m == self.pre_steps + 1 {
                // time 0: every surviving path is old enough
                for (s, &p) in stay.iter_mut().zip(&pos) {
                    *s = self.cell(p as usize).is_some();
                }
            }
            npos.clear();
            nstay.clear();
            for (&x, &s) in pos.iter().zip(&stay) {
                let y = x as i64 + kernel.sample(&mut rng);
                if y < 0 || y >= width as i64 {
                    continue;
                }
                let y = y as usize;
                let s = s && self.cell(y) == self.cell(x as usize);
                if stamp[y] == m as u32 {
                    // merged paths share the future; one staying path suffices
                    let j = slot[y] as usize;
                    nstay[j] = nstay[j] || s;
                } else {
                    stamp[y] = m as u32;
                    slot[y] = npos.len() as u32;
                    npos.push(y as u32);
                    nstay.push(s);
                }
            }
            std::mem::swap(&mut pos, &mut npos);
            std::mem::swap(&mut stay, &mut nstay);
        }
        pos.iter()
            .zip(&stay)
            .filter(|(_, &s)| s)
            .filter_map(|(&p, _)| self.cell(p as usize))
            .min()
            .map(|c| c + 2)
    }

    /// Exact probability that the walk from the cell centre stays inside
    /// the cell for `pre_steps + win_steps` steps.
    fn stay_exact(&self) -> f64 {
        let k = self.k;
        let mut v = vec![0.0; k + 1];
        v[k / 2] = 1.0;
        let mut w = vec![0.0; k + 1];
        for _ in 0..self.pre_steps + self.win_steps {
            for i in 1..k {
                w[i] = 0.5 * v[i] + 0.25 * (v[i - 1] + v[i + 1]);
            }
            w[0] = 0.0;
            w[k] = 0.0;
            std::mem::swap(&mut v, &mut w);
        }
        v.iter().sum()
    }

    /// Monte Carlo version of [`Lattice::stay_exact`], one walk per draw.
    fn stay_mc(&self, samples: usize, seed: u64) -> Vec<f64> {
        let kernel = Kernel::new(2.0, 1).expect("lazy kernel");
        let steps = self.pre_steps + self.win_steps;
        let k = self.k as i64;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut x = k / 2;
                for _ in 0..steps {
                    x += kernel.sample(&mut rng);
                    if x <= 0 || x >= k {
                        return 0.0;
                    }
                }
                1.0
            })
            .collect()
    }
}

fn run(cfg: &InsulationConfig, seeds: &[u64]) -> Result<ExperimentReport> {
    if cfg.n_values.is_empty() || cfg.n_values.iter().any(|&n| n < 2) {
        return Err(argument("N values must be at least 2"));
    }
    if cfg.sites_per_unit < 4 || !(cfg.age > 0.0) || !(cfg.window > 0.0) {
        return Err(argument("need sites_per_unit ≥ 4 and positive age and window"));
    }
    if seeds.is_empty() {
        return Err(argument("need at least one seed"));
    }
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();
    ns.dedup();
    let lat = Lattice::new(cfg, *ns.last().unwrap());
    let firsts: Vec<Option<usize>> = seeds.par_iter().map(|&s| lat.first_insulated(s)).collect();

    let mut rep = ExperimentReport::new("insulation_probe");
    rep.param("n_values", &ns);
    rep.param("sites_per_unit", cfg.sites_per_unit);
    rep.param("age", cfg.age);
    rep.param("window", cfg.window);
    rep.param("buffer_units", cfg.buffer_units);
    rep.samples = seeds.len();
    rep.seeds = seeds.to_vec();

    let exact = lat.stay_exact();
    let mc_draws = lat.stay_mc(cfg.oracle_samples.max(1), seeds[0] ^ 0x5EED);
    let (c_mc, c_mc_se) = batched(&mc_draws);
    rep.push("cell", "c_hat_mc", c_mc, Some(c_mc_se));
    rep.push("cell", "c_hat_exact", exact, None);

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &n in &ns {
        let hits: Vec<f64> = firsts.iter().map(|f| f.is_none_or(|k| k > n) as u8 as f64).collect();
        let (p, se) = batched(&hits);
        if n == ns[0] && p == 1.0 {
            return Err(experiment_error(format!(
                "no insulating path in any cell at N = {n}; refine the lattice or add seeds"
            )));
        }
        rep.push(format!("N={n}"), "p_a_n", p, Some(se));
        rep.push(format!("N={n}"), "bound_mc", (1.0 - c_mc).powi(n as i32 - 1), None);
        rep.push(format!("N={n}"), "bound_exact", (1.0 - exact).powi(n as i32 - 1), None);
        if p > 0.0 {
            xs.push(n as f64);
            ys.push(p.ln());
        }
    }
    rep.fit = linear_fit(&xs, &ys);
    if ns[0] == 2 {
        // one watched cell on its own window
        let single = Lattice::new(cfg, 2);
        let hits: Vec<f64> = seeds
            .par_iter()
            .map(|&s| single.first_insulated(s ^ 0xC311).is_none() as u8 as f64)
            .collect();
        let (p, se) = batched(&hits);
        rep.push("N=2", "p_single_cell", p, Some(se));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seeds: usize) -> InsulationConfig {
        InsulationConfig {
            n_values: vec![2, 3, 4, 5],
            sites_per_unit: 8,
            age: 0.25,
            window: 0.25,
            oracle_samples: 20_000,
            seeds,
            ..InsulationConfig::default()
        }
    }

    #[test]
    fn exact_cell_probability_matches_brownian_series() {
        // Brownian motion from the centre of a unit interval stays inside up
        // to time s with probability Σ_{j odd} (4/(jπ)) (-1)^{(j-1)/2} e^{-j²π²s/2}
        let cfg = InsulationConfig {
            sites_per_unit: 64,
            age: 0.25,
            window: 0.25,
            ..InsulationConfig::default()
        };
        let lat = Lattice::new(&cfg, 2);
        let s = 0.5;
        let pi = std::f64::consts::PI;
        let series: f64 = (0..20)
            .map(|i| {
                let j = (2 * i + 1) as f64;
                4.0 / (j * pi) * if i % 2 == 0 { 1.0 } else { -1.0 } * (-j * j * pi * pi * s / 2.0).exp()
            })
            .sum();
        assert!((lat.stay_exact() / series - 1.0).abs() < 0.02, "{} vs {series}", lat.stay_exact());
    }

    #[test]
    fn monte_carlo_cell_matches_exact() {
        let lat = Lattice::new(&small(1), 2);
        let (m, se) = batched(&lat.stay_mc(20_000, 3));
        assert!((m - lat.stay_exact()).abs() < 4.0 * se, "{m} vs {}", lat.stay_exact());
    }

    #[test]
    fn probabilities_nonincreasing_and_bounded() {
        let r = insulation_probe_with(&small(400)).unwrap();
        let p: Vec<f64> = r.series("p_a_n").iter().map(|e| e.value).collect();
        assert!(p.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
        for e in r.series("p_a_n") {
            let b = r.get(&e.param, "bound_exact").unwrap().value;
            assert!(e.value <= b * (1.0 + 3.0 * e.stderr.unwrap()) + 1e-12);
        }
    }

    #[test]
    fn two_cells_is_one_factor() {
        let r = insulation_probe_with(&small(4000)).unwrap();
        let a = r.get("N=2", "p_a_n").unwrap();
        let b = r.get("N=2", "p_single_cell").unwrap();
        let se = (a.stderr.unwrap().powi(2) + b.stderr.unwrap().powi(2)).sqrt();
        assert!((a.value - b.value).abs() <= 3.0 * se, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn cell_indexing() {
        let lat = Lattice::new(&small(1), 4);
        // K = 8, buffer 2: cell 2 = (1, 2) covers sites 17..=23
        assert_eq!(lat.cell(16), None);
        assert_eq!(lat.cell(17), Some(0));
        assert_eq!(lat.cell(23), Some(0));
        assert_eq!(lat.cell(24), None);
        assert_eq!(lat.cell(25), Some(1));
        assert_eq!(lat.cell(3 * 8 + 16 + 1), None);
    }
}
