use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{ball_volume, norm, shell_volume};

/// On-diagonal ball radius in units of `√t`.
pub const DEFAULT_H_REL: f64 = 0.25;
const SENSITIVITY_H_REL: [f64; 3] = [0.125, 0.25, 0.5];
const MIN_SAMPLES: usize = 1000;

/// Shell histogram of `|X_t|` turned into a radial density estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub t: f64,
    pub dim: usize,
    pub shell_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Shells with no samples (kept, not dropped).
    pub empty: Vec<bool>,
    pub n_samples: usize,
    pub h: f64,
    pub on_diagonal: f64,
    pub on_diagonal_stderr: f64,
    /// `(h_rel, estimate)` for the ball radii `h_rel √t`.
    pub on_diagonal_sensitivity: Vec<(f64, f64)>,
}

impl DensityEstimate {
    pub fn n_shells(&self) -> usize {
        self.p_hat.len()
    }

    pub fn r_lo(&self, i: usize) -> f64 {
        self.shell_edges[i]
    }

    pub fn r_hi(&self, i: usize) -> f64 {
        self.shell_edges[i + 1]
    }

    pub fn r_mid(&self, i: usize) -> f64 {
        0.5 * (self.shell_edges[i] + self.shell_edges[i + 1])
    }

    /// Fraction of samples inside the shell grid.
    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.n_samples as f64
    }

    /// Binomial standard error of [`DensityEstimate::total_mass`].
    pub fn total_mass_stderr(&self) -> f64 {
        let p = self.total_mass();
        (p * (1.0 - p) / self.n_samples as f64).sqrt()
    }
}

/// Edges `0, w, 2w, …, 2√t` with `w = √t/4`, then geometric with ratio `ratio` up to `r_max`.
pub fn shell_edges(t: f64, r_max: f64, ratio: f64) -> Vec<f64> {
    let s = t.sqrt();
    let mut edges: Vec<f64> = (0..=8).map(|i| 0.25 * s * i as f64).collect();
    let mut r = 2.0 * s;
    while r < r_max {
        r *= ratio;
        edges.push(r);
    }
    edges
}

fn binomial_density(count: u64, n: usize, volume: f64) -> (f64, f64) {
    let p = count as f64 / n as f64;
    (p / volume, (p * (1.0 - p) / n as f64).sqrt() / volume)
}

/// Radial density of `positions` (flattened `[sample][coordinate]`) on the given shells.
pub fn estimate_radial_density(
    positions: &[f64],
    dim: usize,
    t: f64,
    shell_edges: &[f64],
    h_rel: f64,
) -> Result<DensityEstimate> {
    if dim == 0 || !positions.len().is_multiple_of(dim) {
        return Err(Error::Domain("positions do not split into points of the given dimension".into()));
    }
    let n = positions.len() / dim;
    if n == 0 {
        return Err(Error::Insufficient("no samples".into()));
    }
    if n < MIN_SAMPLES {
        return Err(Error::Insufficient(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if shell_edges.len() < 2 || shell_edges[0] < 0.0 || shell_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("shell edges must be non-negative and strictly increasing".into()));
    }
    if !(t > 0.0 && h_rel > 0.0) {
        return Err(Error::Domain("t and h_rel must be positive".into()));
    }
    let n_shells = shell_edges.len() - 1;
    let root_t = t.sqrt();
    let hs: Vec<f64> = SENSITIVITY_H_REL.iter().chain(std::iter::once(&h_rel)).map(|h| h * root_t).collect();
    // Integer counts per chunk: the merge is exact, so the result is thread-count independent.
    let partial = Exec::default().map_chunks(n, 8192, |range| {
        let mut counts = vec![0u64; n_shells];
        let mut ball = vec![0u64; hs.len()];
        for i in range {
            let r = norm(&positions[i * dim..(i + 1) * dim]);
            let k = shell_edges.partition_point(|&e| e <= r);
            if k >= 1 && k <= n_shells {
                counts[k - 1] += 1;
            }
            for (b, &h) in ball.iter_mut().zip(&hs) {
                if r < h {
                    *b += 1;
                }
            }
        }
        (counts, ball)
    });
    let mut counts = vec![0u64; n_shells];
    let mut ball = vec![0u64; hs.len()];
    for (c, b) in partial {
        counts.iter_mut().zip(c).for_each(|(a, x)| *a += x);
        ball.iter_mut().zip(b).for_each(|(a, x)| *a += x);
    }
    let mut p_hat = Vec::with_capacity(n_shells);
    let mut stderr = Vec::with_capacity(n_shells);
    for (k, &c) in counts.iter().enumerate() {
        let (p, s) = binomial_density(c, n, shell_volume(dim, shell_edges[k], shell_edges[k + 1]));
        p_hat.push(p);
        stderr.push(s);
    }
    let h = h_rel * root_t;
    let (on_diagonal, on_diagonal_stderr) = binomial_density(*ball.last().unwrap(), n, ball_volume(dim, h));
    let on_diagonal_sensitivity = SENSITIVITY_H_REL
        .iter()
        .zip(&ball)
        .map(|(&hr, &c)| (hr, binomial_density(c, n, ball_volume(dim, hr * root_t)).0))
        .collect();
    Ok(DensityEstimate {
        t,
        dim,
        shell_edges: shell_edges.to_vec(),
        empty: counts.iter().map(|&c| c == 0).collect(),
        counts,
        p_hat,
        stderr,
        n_samples: n,
        h,
        on_diagonal,
        on_diagonal_stderr,
        on_diagonal_sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_origin() {
        let pos = vec![0.0; 2000];
        let e = estimate_radial_density(&pos, 2, 1.0, &[0.0, 1.0, 2.0, 3.0], DEFAULT_H_REL).unwrap();
        assert!((e.p_hat[0] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(&e.p_hat[1..], &[0.0, 0.0]);
        assert_eq!(e.empty, vec![false, true, true]);
        assert_eq!(e.total_mass(), 1.0);
    }

    #[test]
    fn rejects_empty_or_small() {
        assert!(estimate_radial_density(&[], 1, 1.0, &[0.0, 1.0], 0.25).is_err());
        assert!(estimate_radial_density(&[0.0; 10], 1, 1.0, &[0.0, 1.0], 0.25).is_err());
        assert!(estimate_radial_density(&[0.0; 1000], 1, 1.0, &[1.0, 0.0], 0.25).is_err());
    }

    #[test]
    fn uniform_samples() {
        // 4000 points evenly spread on (-2, 2): density 1/4 everywhere.
        let pos: Vec<f64> = (0..4000).map(|i| -2.0 + (i as f64 + 0.5) / 1000.0).collect();
        let e = estimate_radial_density(&pos, 1, 16.0, &[0.0, 0.5, 1.0, 2.0], 0.25).unwrap();
        for p in &e.p_hat {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert!((e.on_diagonal - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shell_grid_shape() {
        let e = shell_edges(64.0, 100.0, 1.1);
        assert_eq!(e[8], 16.0);
        assert!(e.last().unwrap() >= &100.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }
}
