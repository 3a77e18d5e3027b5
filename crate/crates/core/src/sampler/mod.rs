//! Path simulation.
//!
//! Jumps of size at least `δ` are simulated exactly as two compound Poisson
//! streams (mid jumps on `[δ, 1)`, big jumps on `[1, ∞)`); the sub-`δ` part is
//! replaced by a Brownian motion with the same covariance. With modulation,
//! proposed jumps `x → x + z` are thinned with probability `m(x, x + z)/m_hi`.

mod table;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kernel::{JumpKernel, LevyRates, Modulation};
use crate::rng::path_rng;

pub use table::{InverseCdfTable, DEFAULT_RESOLUTION, MIN_RESOLUTION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub delta: f64,
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub modulation_enabled: bool,
    pub inverse_cdf_resolution: usize,
}

impl SamplerConfig {
    /// Defaults: `δ = 0.1`, 4096 table nodes, modulation off.
    pub fn new(t_grid: Vec<f64>, n_paths: usize, master_seed: u64) -> Self {
        SamplerConfig {
            delta: 0.1,
            t_grid,
            n_paths,
            master_seed,
            modulation_enabled: false,
            inverse_cdf_resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        validate_grid(&self.t_grid)?;
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be positive".into()));
        }
        if self.inverse_cdf_resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!("inverse_cdf_resolution must be at least {MIN_RESOLUTION}")));
        }
        Ok(())
    }
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Config("observation grid is empty".into()));
    }
    if !times.iter().all(|t| t.is_finite() && *t >= 0.0) {
        return Err(Error::Config("observation times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("observation times must be strictly increasing".into()));
    }
    Ok(())
}

/// One trajectory observed on a grid that starts at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub seed_id: u64,
    pub kernel_hash: String,
}

/// Per observation: the information needed to integrate out one big jump.
///
/// `rest` is `X_t` minus the first big jump when `n_big > 0`, and `X_t` minus
/// its Brownian part when `n_big = 0`; `max_other` is the largest norm among
/// the other big jumps (0 if none).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Anchors {
    pub n_big: Vec<u32>,
    pub max_other: Vec<f64>,
    pub rest: Vec<f64>,
}

/// Positions of `n_paths` independent paths on a common grid, stored
/// row-major as `[path][time][coordinate]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub dim: usize,
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub kernel_hash: String,
    pub positions: Vec<f64>,
    pub anchors: Option<Anchors>,
}

impl Ensemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn point(&self, path: usize, time: usize) -> &[f64] {
        let o = (path * self.times.len() + time) * self.dim;
        &self.positions[o..o + self.dim]
    }

    /// `|X_t|` for every path at grid index `time`.
    pub fn radii(&self, time: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| crate::geometry::norm(self.point(p, time))).collect()
    }

    /// Coordinate `k` of every path at grid index `time`.
    pub fn coordinate(&self, time: usize, k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.point(p, time)[k]).collect()
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    pub fn path(&self, path: usize) -> PathSample {
        let mut times = Vec::with_capacity(self.times.len() + 1);
        let mut positions = Vec::with_capacity(self.times.len() + 1);
        if self.times[0] > 0.0 {
            times.push(0.0);
            positions.push(vec![0.0; self.dim]);
        }
        for (i, &t) in self.times.iter().enumerate() {
            times.push(t);
            positions.push(self.point(path, i).to_vec());
        }
        PathSample { times, positions, seed_id: path as u64, kernel_hash: self.kernel_hash.clone() }
    }
}

/// Radius law `∝ r^{-1-α}` on `[δ, 1)`, inverted in closed form.
#[derive(Debug, Clone, Copy)]
struct MidJump {
    top: f64,
    span: f64,
    power: f64,
}

impl MidJump {
    fn new(alpha: f64, delta: f64) -> Self {
        let top = delta.powf(-alpha);
        MidJump { top, span: top - 1.0, power: -1.0 / alpha }
    }

    #[inline]
    fn radius(&self, u: f64) -> f64 {
        (self.top - u * self.span).powf(self.power)
    }
}

/// A kernel and sampler configuration with all tables precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    kernel: JumpKernel,
    cfg: SamplerConfig,
    rates: LevyRates,
    modulation: Option<Modulation>,
    mid: MidJump,
    table: Option<InverseCdfTable>,
    gauss_sd: f64,
    kernel_hash: String,
}

impl Sampler {
    pub fn new(kernel: JumpKernel, cfg: SamplerConfig) -> Result<Self> {
        kernel.validate()?;
        cfg.validate()?;
        let modulation = match (cfg.modulation_enabled, kernel.modulation) {
            (true, None) => return Err(Error::Config("modulation enabled but the kernel has none".into())),
            (true, m) => m,
            (false, _) => None,
        };
        let rates = kernel.levy_rates(cfg.delta)?;
        let table = if rates.lambda_big > 0.0 {
            Some(InverseCdfTable::new(kernel.profile, cfg.inverse_cdf_resolution)?)
        } else {
            None
        };
        let gauss_sd = (rates.sigma2_small / kernel.dim as f64).sqrt();
        Ok(Sampler {
            kernel,
            mid: MidJump::new(kernel.alpha, cfg.delta),
            cfg,
            rates,
            modulation,
            table,
            gauss_sd,
            kernel_hash: kernel.digest(),
        })
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn rates(&self) -> LevyRates {
        self.rates
    }

    pub fn is_modulated(&self) -> bool {
        self.modulation.is_some()
    }

    pub fn table(&self) -> Option<&InverseCdfTable> {
        self.table.as_ref()
    }

    /// The path with index `path_index` on the configured grid (with `t = 0` prepended).
    pub fn sample_path(&self, path_index: usize) -> Result<PathSample> {
        if path_index >= self.cfg.n_paths {
            return Err(Error::Domain(format!(
                "path index {path_index} out of range (n_paths = {})",
                self.cfg.n_paths
            )));
        }
        let flat = self.positions(&self.cfg.t_grid, path_index);
        let d = self.kernel.dim;
        let mut times = Vec::with_capacity(self.cfg.t_grid.len() + 1);
        let mut positions = Vec::with_capacity(self.cfg.t_grid.len() + 1);
        if self.cfg.t_grid[0] > 0.0 {
            times.push(0.0);
            positions.push(vec![0.0; d]);
        }
        times.extend_from_slice(&self.cfg.t_grid);
        positions.extend(flat.chunks(d).map(|c| c.to_vec()));
        Ok(PathSample { times, positions, seed_id: path_index as u64, kernel_hash: self.kernel_hash.clone() })
    }

    /// `X_t` of path `path_index` observed only at time `t`.
    pub fn sample_increment(&self, t: f64, path_index: usize) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
        }
        Ok(self.positions(&[t], path_index))
    }

    /// Positions of one path on an arbitrary strictly increasing grid, flattened `[time][coord]`.
    ///
    /// The path depends on `(master_seed, path_index, times)` only.
    pub fn positions(&self, times: &[f64], path_index: usize) -> Vec<f64> {
        let mut out = vec![0.0; times.len() * self.kernel.dim];
        let mut rng = path_rng(self.cfg.master_seed, path_index as u64);
        match self.modulation {
            Some(m) => self.run_modulated(&mut rng, m, times, &mut out),
            None => self.run_free(&mut rng, times, &mut out, None),
        }
        out
    }

    /// As [`Sampler::positions`] plus the big-jump anchors; unmodulated only.
    pub fn positions_with_anchors(&self, times: &[f64], path_index: usize) -> Result<(Vec<f64>, Anchors)> {
        if self.modulation.is_some() {
            return Err(Error::Config("anchors require an unmodulated kernel".into()));
        }
        let d = self.kernel.dim;
        let mut out = vec![0.0; times.len() * d];
        let mut anchors = Anchors {
            n_big: vec![0; times.len()],
            max_other: vec![0.0; times.len()],
            rest: vec![0.0; times.len() * d],
        };
        let mut rng = path_rng(self.cfg.master_seed, path_index as u64);
        self.run_free(&mut rng, times, &mut out, Some(&mut anchors));
        Ok((out, anchors))
    }

    /// All `n_paths` paths on the configured grid.
    pub fn ensemble(&self, exec: Exec) -> Ensemble {
        self.build(exec, false).expect("plain ensembles cannot fail")
    }

    /// All paths with anchors; unmodulated only.
    pub fn ensemble_with_anchors(&self, exec: Exec) -> Result<Ensemble> {
        self.build(exec, true)
    }

    fn build(&self, exec: Exec, with_anchors: bool) -> Result<Ensemble> {
        if with_anchors && self.modulation.is_some() {
            return Err(Error::Config("anchors require an unmodulated kernel".into()));
        }
        let grid = &self.cfg.t_grid;
        let chunks = exec.map_chunks(self.cfg.n_paths, 64, |range| {
            let mut pos = Vec::new();
            let mut anc = Anchors::default();
            for p in range {
                if with_anchors {
                    let (x, a) = self.positions_with_anchors(grid, p).expect("checked above");
                    pos.extend(x);
                    anc.n_big.extend(a.n_big);
                    anc.max_other.extend(a.max_other);
                    anc.rest.extend(a.rest);
                } else {
                    pos.extend(self.positions(grid, p));
                }
            }
            (pos, anc)
        });
        let mut positions = Vec::with_capacity(self.cfg.n_paths * grid.len() * self.kernel.dim);
        let mut anchors = Anchors::default();
        for (pos, anc) in chunks {
            positions.extend(pos);
            anchors.n_big.extend(anc.n_big);
            anchors.max_other.extend(anc.max_other);
            anchors.rest.extend(anc.rest);
        }
        Ok(Ensemble {
            dim: self.kernel.dim,
            times: grid.clone(),
            n_paths: self.cfg.n_paths,
            master_seed: self.cfg.master_seed,
            kernel_hash: self.kernel_hash.clone(),
            positions,
            anchors: with_anchors.then_some(anchors),
        })
    }

    /// Adds a uniformly oriented vector of length `r` to `acc`.
    #[inline]
    fn add_isotropic(&self, rng: &mut ChaCha8Rng, r: f64, acc: &mut [f64], dir: &mut [f64]) {
        if acc.len() == 1 {
            acc[0] += if rng.random::<bool>() { r } else { -r };
            return;
        }
        let mut n2 = 0.0;
        while n2 == 0.0 {
            n2 = 0.0;
            for c in dir.iter_mut() {
                *c = StandardNormal.sample(rng);
                n2 += *c * *c;
            }
        }
        let s = r / n2.sqrt();
        for (a, c) in acc.iter_mut().zip(dir.iter()) {
            *a += s * c;
        }
    }

    #[inline]
    fn big_radius(&self, rng: &mut ChaCha8Rng) -> f64 {
        let s: f64 = Exp1.sample(rng);
        self.table.as_ref().expect("positive big-jump rate").radius_from_exp(s)
    }

    fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
        if mean > 0.0 {
            Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
        } else {
            0
        }
    }

    /// Independent-increment simulation, one interval at a time.
    fn run_free(&self, rng: &mut ChaCha8Rng, times: &[f64], out: &mut [f64], mut anchors: Option<&mut Anchors>) {
        let d = self.kernel.dim;
        let mut gauss = vec![0.0; d];
        let mut mid = vec![0.0; d];
        let mut first = vec![0.0; d];
        let mut other = vec![0.0; d];
        let mut dir = vec![0.0; d];
        let mut jump = vec![0.0; d];
        let mut n_big: u64 = 0;
        let mut max_other = 0.0f64;
        let mut t_prev = 0.0;
        for (i, &t) in times.iter().enumerate() {
            let dt = t - t_prev;
            t_prev = t;
            if dt > 0.0 {
                let sd = self.gauss_sd * dt.sqrt();
                if sd > 0.0 {
                    for g in gauss.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *g += sd * z;
                    }
                }
                let n_mid = Self::poisson(rng, self.rates.lambda_small * dt);
                for _ in 0..n_mid {
                    let r = self.mid.radius(rng.random::<f64>());
                    self.add_isotropic(rng, r, &mut mid, &mut dir);
                }
                let n_new = Self::poisson(rng, self.rates.lambda_big * dt);
                for _ in 0..n_new {
                    let r = self.big_radius(rng);
                    if n_big == 0 {
                        self.add_isotropic(rng, r, &mut first, &mut dir);
                    } else if anchors.is_some() {
                        jump.fill(0.0);
                        self.add_isotropic(rng, r, &mut jump, &mut dir);
                        for (o, j) in other.iter_mut().zip(&jump) {
                            *o += j;
                        }
                        max_other = max_other.max(r);
                    } else {
                        self.add_isotropic(rng, r, &mut other, &mut dir);
                    }
                    n_big += 1;
                }
            }
            let row = &mut out[i * d..(i + 1) * d];
            for k in 0..d {
                row[k] = gauss[k] + mid[k] + first[k] + other[k];
            }
            if let Some(a) = anchors.as_deref_mut() {
                a.n_big[i] = n_big.min(u32::MAX as u64) as u32;
                a.max_other[i] = max_other;
                let rest = &mut a.rest[i * d..(i + 1) * d];
                for k in 0..d {
                    rest[k] = if n_big == 0 { mid[k] } else { gauss[k] + mid[k] + other[k] };
                }
            }
        }
    }

    /// Event-driven simulation with thinning against the `m_hi`-scaled rates.
    fn run_modulated(&self, rng: &mut ChaCha8Rng, m: Modulation, times: &[f64], out: &mut [f64]) {
        let d = self.kernel.dim;
        let lam_mid = m.hi * self.rates.lambda_small;
        let lam_big = m.hi * self.rates.lambda_big;
        let lam = lam_mid + lam_big;
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut dir = vec![0.0; d];
        let mut now = 0.0;
        let advance = |rng: &mut ChaCha8Rng, x: &mut [f64], dt: f64| {
            let sd = self.gauss_sd * dt.sqrt();
            if sd > 0.0 {
                for c in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *c += sd * z;
                }
            }
        };
        let mut next_event = if lam > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / lam
        } else {
            f64::INFINITY
        };
        for (i, &t) in times.iter().enumerate() {
            while next_event <= t {
                advance(rng, &mut x, next_event - now);
                now = next_event;
                let is_mid = rng.random::<f64>() * lam < lam_mid;
                let r = if is_mid { self.mid.radius(rng.random::<f64>()) } else { self.big_radius(rng) };
                y.copy_from_slice(&x);
                self.add_isotropic(rng, r, &mut y, &mut dir);
                if rng.random::<f64>() * m.hi < m.eval(&x, &y) {
                    x.copy_from_slice(&y);
                }
                let e: f64 = Exp1.sample(rng);
                next_event = now + e / lam;
            }
            advance(rng, &mut x, t - now);
            now = t;
            out[i * d..(i + 1) * d].copy_from_slice(&x);
        }
    }
}

/// `F^{-1}(u)` of the big-jump radius law of `kernel`, building a default table.
pub fn sample_big_jump_radius(kernel: &JumpKernel, u: f64) -> Result<f64> {
    if kernel.c_tail == 0.0 {
        return Err(Error::Config("kernel has no big jumps (c_tail = 0)".into()));
    }
    InverseCdfTable::new(kernel.profile, DEFAULT_RESOLUTION)?.radius(u)
}

/// `sample_path` of `cfg` with the grid replaced by `{t}`, returning `X_t`.
pub fn sample_increment(kernel: &JumpKernel, cfg: &SamplerConfig, t: f64, path_index: usize) -> Result<Vec<f64>> {
    let mut single = cfg.clone();
    single.t_grid = vec![t];
    Sampler::new(*kernel, single)?.sample_increment(t, path_index)
}
