//! Block statistics for the upper rate function `C √(t log log t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::norm;
use crate::kernel::JumpKernel;
use crate::sampler::{Sampler, SamplerConfig};

/// `e^e`, below which `log log t` is negative.
pub fn rate_floor() -> f64 {
    std::f64::consts::E.exp()
}

/// `C √(t log log t)` for `t >= e^e`.
pub fn rate_function(t: f64, c: f64) -> Result<f64> {
    if !(t >= rate_floor() * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!("rate function needs t >= e^e, got {t}")));
    }
    Ok(c * (t * t.ln().ln().max(0.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilConfig {
    /// Blocks are `[2^{k-1}, 2^k]` for `k_min <= k <= k_max`.
    pub k_min: u32,
    pub k_max: u32,
    pub c_grid: Vec<f64>,
    pub n_paths: usize,
    /// Log-spaced observation times per block, including the block end.
    pub observations_per_block: usize,
    pub c_small: f64,
    pub delta: f64,
}

impl LilConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 5 {
            return Err(Error::Config(format!("2^(k_min-1) must exceed e^e, so k_min >= 5; got {}", self.k_min)));
        }
        if self.k_max < self.k_min || self.k_max > 60 {
            return Err(Error::Config(format!("need k_min <= k_max <= 60, got [{}, {}]", self.k_min, self.k_max)));
        }
        if self.c_grid.is_empty() || !(self.c_grid[0] > 0.0) || self.c_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("C grid must be positive and strictly increasing".into()));
        }
        if self.n_paths == 0 || self.observations_per_block == 0 {
            return Err(Error::Config("n_paths and observations_per_block must be positive".into()));
        }
        if !(self.c_small >= 0.0) {
            return Err(Error::Config(format!("c_small must be non-negative, got {}", self.c_small)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        Ok(())
    }

    fn n_blocks(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    /// `2^{k_min-1+i/n}` for `i = 0..=n_blocks·n`.
    pub fn observation_times(&self) -> Vec<f64> {
        let n = self.observations_per_block;
        (0..=self.n_blocks() * n).map(|i| 2f64.powf(self.k_min as f64 - 1.0 + i as f64 / n as f64)).collect()
    }
}

/// Per-path sup of `|X_s| / √(s log log s)` over each block, from positions at `times`.
///
/// Block `b` owns observations `b·per_block ..= (b+1)·per_block`; shared endpoints count for both.
pub fn block_sups(positions: &[f64], dim: usize, times: &[f64], n_blocks: usize, per_block: usize) -> Vec<f64> {
    let mut sups = vec![0.0f64; n_blocks];
    for (i, &t) in times.iter().enumerate().take(n_blocks * per_block + 1) {
        let ratio = norm(&positions[i * dim..(i + 1) * dim]) / rate_function(t, 1.0).unwrap_or(f64::NAN);
        let hi = (i / per_block).min(n_blocks - 1);
        let lo = if i % per_block == 0 && i > 0 { i / per_block - 1 } else { hi };
        for s in &mut sups[lo..=hi] {
            *s = s.max(ratio);
        }
    }
    sups
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceTable {
    pub k_values: Vec<u32>,
    pub c_grid: Vec<f64>,
    pub n_paths: usize,
    /// `[k][C]` counts of paths with `sup_block |X_s|/ψ(s) >= C`.
    pub counts: Vec<Vec<u64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// `[k][C]` running sums of `p_hat` over blocks up to `k`.
    pub bc_partial_sum: Vec<Vec<f64>>,
    /// `[k][C]` fraction of paths exceeding in at least one block `>= k`.
    pub any_from: Vec<Vec<f64>>,
    /// `[k]` frequency of `|X_{2^{k+1}} - X_{2^k}| >= c_small ψ(2^{k-1})`.
    pub b_k_freq: Vec<f64>,
}

impl ExceedanceTable {
    pub fn k_index(&self, k: u32) -> Option<usize> {
        self.k_values.iter().position(|&x| x == k)
    }
}

fn b_k_event(x_k: &[f64], x_next: &[f64], c_small: f64, k: u32) -> bool {
    let diff: Vec<f64> = x_next.iter().zip(x_k).map(|(a, b)| a - b).collect();
    let threshold = rate_function(2f64.powi(k as i32 - 1), c_small).expect("k >= 5");
    norm(&diff) >= threshold
}

/// Simulates `n_paths` paths over `[2^{k_min-1}, 2^{k_max+1}]` and tabulates block exceedances.
pub fn run_lil_experiment(kernel: &JumpKernel, cfg: &LilConfig, seed: u64, exec: Exec) -> Result<ExceedanceTable> {
    cfg.validate()?;
    let mut times = cfg.observation_times();
    times.push(2f64.powi(cfg.k_max as i32 + 1));
    let sampler = Sampler::new(*kernel, SamplerConfig::new(times.clone(), cfg.n_paths, seed).with_delta(cfg.delta))?;
    let d = kernel.dim;
    let nb = cfg.n_blocks();
    let n = cfg.observations_per_block;
    let nc = cfg.c_grid.len();
    let per_path = exec.map(cfg.n_paths, |p| {
        let pos = sampler.positions(&times, p);
        let sups = block_sups(&pos, d, &times, nb, n);
        let point = |i: usize| &pos[i * d..(i + 1) * d];
        let b_k: Vec<bool> = (0..nb)
            .map(|b| {
                let next = if b + 1 < nb { (b + 1) * n } else { times.len() - 1 };
                b_k_event(point(b * n), point(next), cfg.c_small, cfg.k_min + b as u32)
            })
            .collect();
        (sups, b_k)
    });
    let mut counts = vec![vec![0u64; nc]; nb];
    let mut any = vec![vec![0u64; nc]; nb];
    let mut b_counts = vec![0u64; nb];
    for (sups, b_k) in &per_path {
        for (ci, &c) in cfg.c_grid.iter().enumerate() {
            let mut seen = false;
            for b in (0..nb).rev() {
                if sups[b] >= c {
                    counts[b][ci] += 1;
                    seen = true;
                }
                if seen {
                    any[b][ci] += 1;
                }
            }
        }
        for (b, &e) in b_k.iter().enumerate() {
            b_counts[b] += e as u64;
        }
    }
    let nf = cfg.n_paths as f64;
    let p_hat: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&c| c as f64 / nf).collect()).collect();
    let stderr = p_hat.iter().map(|row| row.iter().map(|&p| (p * (1.0 - p) / nf).sqrt()).collect()).collect();
    let mut bc_partial_sum = p_hat.clone();
    for b in 1..nb {
        let (done, rest) = bc_partial_sum.split_at_mut(b);
        for (s, prev) in rest[0].iter_mut().zip(&done[b - 1]) {
            *s += prev;
        }
    }
    Ok(ExceedanceTable {
        k_values: (cfg.k_min..=cfg.k_max).collect(),
        c_grid: cfg.c_grid.clone(),
        n_paths: cfg.n_paths,
        counts,
        p_hat,
        stderr,
        bc_partial_sum,
        any_from: any.iter().map(|row| row.iter().map(|&c| c as f64 / nf).collect()).collect(),
        b_k_freq: b_counts.iter().map(|&c| c as f64 / nf).collect(),
    })
}

/// Smallest `C₂` with `p_hat(k) <= C₂ / k^{1+ε}` on every block, for one column of the table.
pub fn envelope_constant(table: &ExceedanceTable, c_index: usize, eps: f64) -> f64 {
    table
        .k_values
        .iter()
        .zip(&table.p_hat)
        .map(|(&k, row)| row[c_index] * (k as f64).powf(1.0 + eps))
        .fold(0.0, f64::max)
}

/// One `(r, t)` cell of the exit-time comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitCell {
    pub r: f64,
    pub t: f64,
    /// `P(τ_{B(0,r)} <= t)` from the observation grid.
    pub left: f64,
    pub left_stderr: f64,
    /// `2 max_{s ∈ {t, 1.5t, 2t}} P(|X_s| >= r/2)`.
    pub right: f64,
    pub right_stderr: f64,
    pub margin: f64,
    /// `left <= right + 3 √(se_l² + se_r²)`.
    pub holds: bool,
}

const EXIT_GRID_STEPS_PER_TMIN: f64 = 16.0;
const EXIT_GRID_MAX: usize = 20_000;

fn exit_grid(t_grid: &[f64]) -> Vec<f64> {
    let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let mut h = t_min / EXIT_GRID_STEPS_PER_TMIN;
    if 2.0 * t_max / h > EXIT_GRID_MAX as f64 {
        h = 2.0 * t_max / EXIT_GRID_MAX as f64;
    }
    let n = (2.0 * t_max / h).ceil() as usize;
    let mut g: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
    for &t in t_grid {
        g.extend([t, 1.5 * t, 2.0 * t]);
    }
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    g
}

/// Monte Carlo comparison of the exit probability with twice the worst marginal tail on `[t, 2t]`.
pub fn exit_time_bound_check(
    kernel: &JumpKernel,
    r_grid: &[f64],
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
    delta: f64,
    exec: Exec,
) -> Result<Vec<ExitCell>> {
    if kernel.modulation.is_some() {
        return Err(Error::Domain("exit-time check needs an unmodulated kernel".into()));
    }
    if r_grid.is_empty() || t_grid.is_empty() || !r_grid.iter().chain(t_grid).all(|&x| x > 0.0 && x.is_finite()) {
        return Err(Error::Domain("r and t grids must be non-empty and positive".into()));
    }
    let times = exit_grid(t_grid);
    let sampler = Sampler::new(*kernel, SamplerConfig::new(times.clone(), n_paths, seed).with_delta(delta))?;
    let d = kernel.dim;
    let idx = |s: f64| times.iter().position(|&x| (x - s).abs() <= 1e-12 * s).expect("grid contains s");
    let cells: Vec<(f64, f64)> = t_grid.iter().flat_map(|&t| r_grid.iter().map(move |&r| (r, t))).collect();
    // Per path: first-exit flags and marginal exceedance flags for every cell.
    let per_path = exec.map(n_paths, |p| {
        let pos = sampler.positions(&times, p);
        let radii: Vec<f64> = pos.chunks(d).map(norm).collect();
        let mut running = Vec::with_capacity(radii.len());
        let mut m: f64 = 0.0;
        for &x in &radii {
            m = m.max(x);
            running.push(m);
        }
        cells
            .iter()
            .map(|&(r, t)| {
                let left = running[idx(t)] >= r;
                let marg = [t, 1.5 * t, 2.0 * t].map(|s| radii[idx(s)] >= 0.5 * r);
                (left, marg)
            })
            .collect::<Vec<_>>()
    });
    let nf = n_paths as f64;
    let se = |p: f64| (p * (1.0 - p) / nf).sqrt();
    Ok(cells
        .iter()
        .enumerate()
        .map(|(ci, &(r, t))| {
            let left_count = per_path.iter().filter(|v| v[ci].0).count();
            let marg: Vec<usize> = (0..3).map(|j| per_path.iter().filter(|v| v[ci].1[j]).count()).collect();
            let left = left_count as f64 / nf;
            let best = *marg.iter().max().unwrap() as f64 / nf;
            let right = 2.0 * best;
            let (left_stderr, right_stderr) = (se(left), 2.0 * se(best));
            let margin = right - left;
            ExitCell {
                r,
                t,
                left,
                left_stderr,
                right,
                right_stderr,
                margin,
                holds: margin >= -3.0 * (left_stderr.powi(2) + right_stderr.powi(2)).sqrt(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockFrequency {
    pub k: u32,
    pub count: u64,
    pub freq: f64,
    pub stderr: f64,
    /// Mean number of events per path over blocks `k_min..=k`.
    pub cumulative_mean: f64,
}

/// Frequency of `|X_{2^{k+1}} - X_{2^k}| >= c_small ψ(2^{k-1})` for each `k`.
#[allow(clippy::too_many_arguments)]
pub fn block_event_frequencies(
    kernel: &JumpKernel,
    c_small: f64,
    k_min: u32,
    k_max: u32,
    n_paths: usize,
    seed: u64,
    delta: f64,
    exec: Exec,
) -> Result<Vec<BlockFrequency>> {
    if k_min < 5 || k_max < k_min || k_max > 60 {
        return Err(Error::Config(format!("need 5 <= k_min <= k_max <= 60, got [{k_min}, {k_max}]")));
    }
    if !(c_small >= 0.0) || n_paths == 0 {
        return Err(Error::Config("c_small must be non-negative and n_paths positive".into()));
    }
    let times: Vec<f64> = (k_min..=k_max + 1).map(|k| 2f64.powi(k as i32)).collect();
    let sampler = Sampler::new(*kernel, SamplerConfig::new(times.clone(), n_paths, seed).with_delta(delta))?;
    let d = kernel.dim;
    let nb = (k_max - k_min + 1) as usize;
    let per_path = exec.map(n_paths, |p| {
        let pos = sampler.positions(&times, p);
        (0..nb)
            .map(|b| b_k_event(&pos[b * d..(b + 1) * d], &pos[(b + 1) * d..(b + 2) * d], c_small, k_min + b as u32))
            .collect::<Vec<_>>()
    });
    let nf = n_paths as f64;
    let mut cumulative = 0.0;
    Ok((0..nb)
        .map(|b| {
            let count = per_path.iter().filter(|v| v[b]).count() as u64;
            let freq = count as f64 / nf;
            cumulative += freq;
            BlockFrequency {
                k: k_min + b as u32,
                count,
                freq,
                stderr: (freq * (1.0 - freq) / nf).sqrt(),
                cumulative_mean: cumulative,
            }
        })
        .collect())
}
