//! Coalescing walks on a buffered window of `Z`, with full spacetime records.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::cadlag::{PiecewisePath, Segment};
use crate::error::{argument, Error, Result};

const NONE: u32 = u32::MAX;
const UNSET: i32 = i32::MIN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Births {
    /// a new cluster on every unoccupied site at every time before the last
    AllTimes,
    /// only the initial full occupancy
    TimeZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub time: u32,
    pub absorbed: u32,
    pub survivor: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeStats {
    pub clusters: usize,
    pub merges: usize,
    pub frozen: usize,
    pub alive_at_end: usize,
}

/// Record of one run.
///
/// Sites are stored as offsets from `-(L + buffer)`. `occ[m][x]` is the
/// cluster on site x after the moves, merges and births of time m; `next[m][x]`
/// is where that cluster lands at time m+1, possibly outside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkSystem {
    alpha: f64,
    half_width: usize,
    buffer: usize,
    steps: usize,
    seed: u64,
    births_mode: Births,
    width: usize,
    occ: Vec<u32>,
    next: Vec<i32>,
    births: Vec<(i64, u32)>,
    absorbed: Vec<Option<(u32, u32)>>,
    frozen: Vec<Option<(u32, i64)>>,
    merge_log: Vec<Merge>,
}

/// Start a walker on every site of `[-L-buffer, L+buffer]` and add one on
/// every vacated site at each later time.
pub fn simulate(kernel: &Kernel, l: usize, t: usize, buffer: usize, seed: u64) -> Result<WalkSystem> {
    simulate_with(kernel, l, t, buffer, seed, Births::AllTimes)
}

pub fn simulate_with(
    kernel: &Kernel,
    l: usize,
    t: usize,
    buffer: usize,
    seed: u64,
    births_mode: Births,
) -> Result<WalkSystem> {
    if l == 0 || t == 0 {
        return Err(argument("L and T must be at least 1"));
    }
    if buffer < kernel.radius() {
        return Err(argument(format!(
            "buffer {buffer} is smaller than the kernel radius {}",
            kernel.radius()
        )));
    }
    let width = 2 * (l + buffer) + 1;
    let cells = (t + 1)
        .checked_mul(width)
        .filter(|&c| c < (1usize << 34) && width < i32::MAX as usize / 2)
        .ok_or_else(|| argument("window too large for a full record"))?;
    let lo = -((l + buffer) as i64);
    let mut occ = vec![NONE; cells];
    let mut next = vec![UNSET; t * width];
    let mut births: Vec<(i64, u32)> = Vec::with_capacity(width);
    for x in 0..width {
        occ[x] = x as u32;
        births.push((lo + x as i64, 0));
    }
    let mut absorbed = vec![None; width];
    let mut frozen = vec![None; width];
    let mut merge_log = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in 0..t {
        let (cur, rest) = occ[m * width..].split_at_mut(width);
        let nxt = &mut rest[..width];
        let step = &mut next[m * width..(m + 1) * width];
        for x in 0..width {
            let id = cur[x];
            if id == NONE {
                continue;
            }
            let y = x as i64 + kernel.sample(&mut rng);
            step[x] = y as i32;
            if y < 0 || y >= width as i64 {
                frozen[id as usize] = Some((m as u32 + 1, lo + y));
                continue;
            }
            let y = y as usize;
            let other = nxt[y];
            if other == NONE {
                nxt[y] = id;
            } else {
                // ids increase with birth time, so the smaller id is the older cluster
                let (s, a) = (other.min(id), other.max(id));
                nxt[y] = s;
                absorbed[a as usize] = Some((m as u32 + 1, s));
                merge_log.push(Merge {
                    time: m as u32 + 1,
                    absorbed: a,
                    survivor: s,
                });
            }
        }
        if births_mode == Births::AllTimes && m + 1 < t {
            for (y, slot) in nxt.iter_mut().enumerate() {
                if *slot == NONE {
                    let id = u32::try_from(births.len())
                        .ok()
                        .filter(|&i| i != NONE)
                        .ok_or_else(|| argument("too many clusters"))?;
                    *slot = id;
                    births.push((lo + y as i64, m as u32 + 1));
                    absorbed.push(None);
                    frozen.push(None);
                }
            }
        }
    }
    Ok(WalkSystem {
        alpha: kernel.alpha(),
        half_width: l,
        buffer,
        steps: t,
        seed,
        births_mode,
        width,
        occ,
        next,
        births,
        absorbed,
        frozen,
        merge_log,
    })
}

impl WalkSystem {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `L`: the analysis window is `[-L, L]`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn buffer(&self) -> usize {
        self.buffer
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn births_mode(&self) -> Births {
        self.births_mode
    }

    /// Leftmost site of the buffered window.
    pub fn lo(&self) -> i64 {
        -((self.half_width + self.buffer) as i64)
    }

    pub fn hi(&self) -> i64 {
        (self.half_width + self.buffer) as i64
    }

    pub fn num_clusters(&self) -> usize {
        self.births.len()
    }

    pub fn merge_log(&self) -> &[Merge] {
        &self.merge_log
    }

    fn check_id(&self, id: u32) -> Result<usize> {
        let i = id as usize;
        if i < self.births.len() {
            Ok(i)
        } else {
            Err(Error::Lookup(format!("no cluster with id {id}")))
        }
    }

    /// Birth site and time.
    pub fn birth(&self, id: u32) -> Result<(i64, u32)> {
        Ok(self.births[self.check_id(id)?])
    }

    /// Time and survivor of the merge that ended this id, if any.
    pub fn absorbed(&self, id: u32) -> Result<Option<(u32, u32)>> {
        Ok(self.absorbed[self.check_id(id)?])
    }

    /// Time and landing site when the cluster left the window, if it did.
    pub fn frozen(&self, id: u32) -> Result<Option<(u32, i64)>> {
        Ok(self.frozen[self.check_id(id)?])
    }

    /// Cluster on `site` at time `m`.
    pub fn occupant(&self, m: usize, site: i64) -> Option<u32> {
        if m > self.steps || site < self.lo() || site > self.hi() {
            return None;
        }
        let id = self.occ[m * self.width + (site - self.lo()) as usize];
        (id != NONE).then_some(id)
    }

    /// Number of clusters inside the buffered window at time `m`.
    pub fn cluster_count(&self, m: usize) -> usize {
        self.occ[m * self.width..(m + 1) * self.width]
            .iter()
            .filter(|&&c| c != NONE)
            .count()
    }

    /// Earliest birth time among the clusters merged into `id`.
    pub fn earliest_birth(&self, id: u32) -> Result<u32> {
        Ok(self.birth(id)?.1)
    }

    pub fn stats(&self) -> MergeStats {
        MergeStats {
            clusters: self.births.len(),
            merges: self.merge_log.len(),
            frozen: self.frozen.iter().filter(|f| f.is_some()).count(),
            alive_at_end: self.cluster_count(self.steps),
        }
    }

    /// Site of the walk started by `id` at every time from its birth to T,
    /// with the earliest birth among the clusters sharing it at that time.
    /// After leaving the window the walk stays where it landed.
    pub fn trajectory(&self, id: u32) -> Result<Vec<(i64, u32)>> {
        let (site, r) = self.birth(id)?;
        let lo = self.lo();
        let mut x = (site - lo) as usize;
        let mut out = Vec::with_capacity(self.steps + 1 - r as usize);
        let mut m = r as usize;
        loop {
            let owner = self.occ[m * self.width + x];
            let c = self.births[owner as usize].1;
            out.push((lo + x as i64, c));
            if m == self.steps {
                return Ok(out);
            }
            let y = self.next[m * self.width + x] as i64;
            if y < 0 || y >= self.width as i64 {
                while out.len() < self.steps + 1 - r as usize {
                    out.push((lo + y, c));
                }
                return Ok(out);
            }
            x = y as usize;
            m += 1;
        }
    }

    /// Site at time `m` of the walk started by `id`.
    pub fn position(&self, id: u32, m: usize) -> Result<Option<i64>> {
        let (_, r) = self.birth(id)?;
        if m < r as usize || m > self.steps {
            return Ok(None);
        }
        Ok(Some(self.trajectory(id)?[m - r as usize].0))
    }
}

/// Age of a cluster in walk time on `[r, T]`: slope one, and at `m + ½` the
/// value `m + ½ − c` with `c` the earliest birth at time m.
pub fn cluster_ages(ws: &WalkSystem, id: u32) -> Result<PiecewisePath<f64>> {
    let traj = ws.trajectory(id)?;
    let r = ws.birth(id)?.1 as usize;
    let mut segs = vec![Segment::new(r as f64, 0.0, 1.0)];
    for k in 1..traj.len() {
        if traj[k].1 != traj[k - 1].1 {
            let s = (r + k) as f64 + 0.5;
            if s < ws.steps as f64 {
                segs.push(Segment::new(s, s - traj[k].1 as f64, 1.0));
            }
        }
    }
    PiecewisePath::new(r as f64, ws.steps as f64, segs)
}

/// Density of distinct clusters per site in `[-L, L]` at the requested times,
/// for walkers started on every site of the buffered window at time 0.
/// Walkers leaving the window are dropped.
pub fn coalescing_density(
    kernel: &Kernel,
    l: usize,
    buffer: usize,
    times: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    if l == 0 {
        return Err(argument("L must be at least 1"));
    }
    if buffer < kernel.radius() {
        return Err(argument("buffer smaller than the kernel radius"));
    }
    let width = 2 * (l + buffer) + 1;
    let counts = survivor_counts(kernel, width, buffer..buffer + 2 * l + 1, times, seed)?;
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / (2 * l + 1) as f64)
        .collect())
}

/// Coalescing walks from full occupancy of `0..width`, killed on leaving it.
/// Returns the number of clusters inside `core` at each requested time.
pub fn survivor_counts(
    kernel: &Kernel,
    width: usize,
    core: std::ops::Range<usize>,
    times: &[usize],
    seed: u64,
) -> Result<Vec<usize>> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(argument("times must increase"));
    }
    if width == 0 || width >= u32::MAX as usize || core.end > width {
        return Err(argument("bad window"));
    }
    let mut live: Vec<u32> = (0..width as u32).collect();
    let mut fresh: Vec<u32> = Vec::with_capacity(width);
    let mut stamp = vec![0u32; width];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(times.len());
    let mut m = 0usize;
    for &target in times {
        while m < target {
            m += 1;
            fresh.clear();
            for &x in &live {
                let y = x as i64 + kernel.sample(&mut rng);
                if y < 0 || y >= width as i64 {
                    continue;
                }
                let y = y as usize;
                if stamp[y] != m as u32 {
                    stamp[y] = m as u32;
                    fresh.push(y as u32);
                }
            }
            std::mem::swap(&mut live, &mut fresh);
        }
        out.push(live.iter().filter(|&&x| core.contains(&(x as usize))).count());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian() -> Kernel {
        Kernel::new(2.0, 1).unwrap()
    }

    #[test]
    fn occupancy_and_merges() {
        let ws = simulate(&brownian(), 5, 40, 3, 1).unwrap();
        for m in 0..=ws.steps() {
            // at most one cluster per site by construction; every site full
            // while births continue
            if m < ws.steps() {
                assert_eq!(ws.cluster_count(m), 17);
            }
        }
        assert!(!ws.merge_log().is_empty());
        for mg in ws.merge_log() {
            assert!(mg.survivor < mg.absorbed);
            let (ma, s) = ws.absorbed(mg.absorbed).unwrap().unwrap();
            assert_eq!(ma, mg.time);
            // survivor's earliest birth is no later
            assert!(ws.earliest_birth(s).unwrap() <= ws.earliest_birth(mg.absorbed).unwrap());
        }
    }

    #[test]
    fn merged_trajectories_coincide() {
        let ws = simulate(&brownian(), 4, 60, 2, 9).unwrap();
        for mg in ws.merge_log() {
            let a = ws.trajectory(mg.absorbed).unwrap();
            let s = ws.trajectory(mg.survivor).unwrap();
            let (ra, rs) = (ws.birth(mg.absorbed).unwrap().1, ws.birth(mg.survivor).unwrap().1);
            for m in mg.time as usize..=ws.steps() {
                assert_eq!(a[m - ra as usize], s[m - rs as usize]);
            }
        }
    }

    #[test]
    fn births_only_on_vacant_sites() {
        let ws = simulate(&brownian(), 3, 30, 2, 4).unwrap();
        for id in 0..ws.num_clusters() as u32 {
            let (x, r) = ws.birth(id).unwrap();
            if r > 0 {
                // no walker landed there at time r
                let m = r as usize - 1;
                for src in ws.lo()..=ws.hi() {
                    if ws.occupant(m, src).is_some() {
                        let j = (src - ws.lo()) as usize;
                        assert_ne!(ws.next[m * ws.width + j] as i64 + ws.lo(), x);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let k = Kernel::new(1.5, 20).unwrap();
        let a = simulate(&k, 10, 50, 20, 77).unwrap();
        let b = simulate(&k, 10, 50, 20, 77).unwrap();
        assert_eq!(a, b);
        let c = simulate(&k, 10, 50, 20, 78).unwrap();
        assert_ne!(a.merge_log(), c.merge_log());
    }

    #[test]
    fn ages_without_merges() {
        let ws = simulate(&brownian(), 6, 30, 2, 5).unwrap();
        let mut checked = 0;
        for id in 0..ws.num_clusters() as u32 {
            let traj = ws.trajectory(id).unwrap();
            let r = ws.birth(id).unwrap().1 as f64;
            if traj.iter().all(|p| p.1 == r as u32) {
                let a = cluster_ages(&ws, id).unwrap();
                for k in 0..40 {
                    let s = r + (ws.steps() as f64 - r) * k as f64 / 40.0;
                    assert!((a.eval(s).unwrap() - (s - r)).abs() < 1e-12);
                }
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn age_jumps_to_older_birth() {
        // find a merge of a cluster born at time r into one born earlier
        let ws = simulate(&brownian(), 6, 40, 2, 3).unwrap();
        let mg = ws
            .merge_log()
            .iter()
            .find(|mg| {
                ws.birth(mg.absorbed).unwrap().1 > ws.birth(mg.survivor).unwrap().1
                    && (mg.time as usize) < ws.steps()
            })
            .copied()
            .unwrap();
        let a = cluster_ages(&ws, mg.absorbed).unwrap();
        let r = ws.birth(mg.absorbed).unwrap().1 as f64;
        let c = ws.birth(mg.survivor).unwrap().1 as f64;
        let s = mg.time as f64 + 0.5;
        assert!((a.eval_left(s).unwrap() - (s - r)).abs() < 1e-12);
        assert!((a.eval(s).unwrap() - (s - c)).abs() < 1e-12);
        for (_, z) in a.jumps(0.0) {
            assert!(z > 0.0);
        }
        assert!(a.segments().iter().all(|sg| sg.slope == 1.0));
    }

    #[test]
    fn unknown_cluster() {
        let ws = simulate(&brownian(), 2, 5, 1, 0).unwrap();
        let n = ws.num_clusters() as u32;
        assert!(matches!(cluster_ages(&ws, n), Err(Error::Lookup(_))));
    }

    #[test]
    fn rejects_small_buffer() {
        let k = Kernel::new(1.5, 10).unwrap();
        assert!(simulate(&k, 5, 5, 9, 0).is_err());
        assert!(simulate(&k, 0, 5, 10, 0).is_err());
    }

    #[test]
    fn time_zero_births_are_monotone() {
        let ws = simulate_with(&brownian(), 20, 100, 2, 8, Births::TimeZero).unwrap();
        assert_eq!(ws.num_clusters(), 45);
        for m in 0..ws.steps() {
            assert!(ws.cluster_count(m + 1) <= ws.cluster_count(m));
        }
    }

    #[test]
    fn density_engine_agrees_with_full_record() {
        // the engines draw in different orders, so compare means over seeds
        let k = brownian();
        let times = [0, 5, 20, 80];
        let seeds = 300;
        let mut lean = vec![Vec::new(); 4];
        let mut full = vec![Vec::new(); 4];
        for seed in 0..seeds {
            let d = coalescing_density(&k, 20, 3, &times, seed).unwrap();
            assert_eq!(d[0], 1.0);
            let ws = simulate_with(&k, 20, 80, 3, 1000 + seed, Births::TimeZero).unwrap();
            for (i, &m) in times.iter().enumerate() {
                lean[i].push(d[i]);
                let n = (-20..=20).filter(|&x| ws.occupant(m, x).is_some()).count();
                full[i].push(n as f64 / 41.0);
            }
        }
        let stat = |v: &[f64]| {
            let n = v.len() as f64;
            let mu = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
            (mu, var / n)
        };
        for i in 1..4 {
            let (a, va) = stat(&lean[i]);
            let (b, vb) = stat(&full[i]);
            assert!((a - b).abs() < 4.0 * (va + vb).sqrt(), "time {}: {a} vs {b}", times[i]);
        }
    }
}
