//! Far-tail density by integrating out one big jump.
//!
//! Given everything except the first big jump `Z` of a path, `X_t = rest + Z`
//! has density `n f_Z(y - rest)` on the event that `Z` is the longest of the
//! `n` big jumps; summing over which jump is longest recovers `p(t, 0, y)`.
//! Paths without big jumps contribute the Gaussian conditional density of
//! their Brownian part instead. The estimator is unbiased and, unlike shell
//! counts, has small relative error at radii where `p` is `1e-10`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::norm;
use crate::sampler::{Ensemble, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointDensity {
    pub t: f64,
    pub r: f64,
    pub value: f64,
    pub stderr: f64,
}

/// `p(t, 0, y)` at `|y| = r` for each radius, averaged over the `2d` axis directions.
pub fn conditional_density(
    sampler: &Sampler,
    ensemble: &Ensemble,
    time_index: usize,
    radii: &[f64],
) -> Result<Vec<PointDensity>> {
    if sampler.is_modulated() {
        return Err(Error::Config("conditional density needs an unmodulated kernel".into()));
    }
    let anchors = ensemble
        .anchors
        .as_ref()
        .ok_or_else(|| Error::Insufficient("ensemble was generated without anchors".into()))?;
    if !ensemble.kernel_hash.is_empty() && ensemble.kernel_hash != sampler.kernel().digest() {
        return Err(Error::Config("ensemble was generated from a different kernel".into()));
    }
    let t = *ensemble
        .times
        .get(time_index)
        .ok_or_else(|| Error::Domain(format!("time index {time_index} out of range")))?;
    let kernel = *sampler.kernel();
    let d = ensemble.dim;
    let rates = sampler.rates();
    let var = rates.sigma2_small * t / d as f64;
    let gauss_norm = (2.0 * std::f64::consts::PI * var).powf(-0.5 * d as f64);
    let n = ensemble.n_paths;
    let n_t = ensemble.n_times();

    let term = |p: usize, y: &[f64], diff: &mut [f64]| -> f64 {
        let row = p * n_t + time_index;
        let rest = &anchors.rest[row * d..(row + 1) * d];
        for k in 0..d {
            diff[k] = y[k] - rest[k];
        }
        let nb = anchors.n_big[row];
        if nb == 0 {
            if var > 0.0 {
                let q: f64 = diff.iter().map(|z| z * z).sum();
                gauss_norm * (-0.5 * q / var).exp()
            } else {
                0.0
            }
        } else {
            let z = norm(diff);
            if z >= 1.0 && z > anchors.max_other[row] {
                nb as f64 * kernel.j_unchecked(z) / rates.lambda_big
            } else {
                0.0
            }
        }
    };

    radii
        .iter()
        .map(|&r| {
            if !(r >= 0.0) {
                return Err(Error::Domain(format!("radius must be non-negative, got {r}")));
            }
            let dirs: Vec<Vec<f64>> = (0..d)
                .flat_map(|k| {
                    [1.0, -1.0].map(|s| {
                        let mut y = vec![0.0; d];
                        y[k] = s * r;
                        y
                    })
                })
                .collect();
            let sums = Exec::default().map_chunks(n, 4096, |range| {
                let mut diff = vec![0.0; d];
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for p in range {
                    let v = dirs.iter().map(|y| term(p, y, &mut diff)).sum::<f64>() / dirs.len() as f64;
                    s1 += v;
                    s2 += v * v;
                }
                (s1, s2)
            });
            let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let mean = s1 / n as f64;
            let var_hat = ((s2 / n as f64) - mean * mean).max(0.0) * n as f64 / (n as f64 - 1.0).max(1.0);
            Ok(PointDensity { t, r, value: mean, stderr: (var_hat / n as f64).sqrt() })
        })
        .collect()
}
