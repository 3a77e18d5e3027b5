//! Inverse CDF of the normalized big-jump radius law `∝ r^{-3}/φ(r)` on `[1, ∞)`.
//!
//! Nodes are equally spaced in `s = -ln(1 - u)` up to the `1 - 10^{-6}`
//! quantile and store `v = ln r` with its exact slope `dv/ds`, so lookup is
//! O(1) and the interpolant is a monotone (Fritsch–Carlson) cubic Hermite.
//! Quantiles past the last node are inverted directly.

use crate::error::{Error, Result};
use crate::kernel::TailProfile;
use crate::quad;

/// `s` at the last node: the `1 - 10^{-6}` quantile.
pub const S_MAX: f64 = 6.0 * std::f64::consts::LN_10;
pub const MIN_RESOLUTION: usize = 1024;
pub const DEFAULT_RESOLUTION: usize = 4096;

// Full-quadrature re-anchoring interval while marching the tail integral.
const REANCHOR: usize = 64;

#[derive(Debug, Clone)]
pub struct InverseCdfTable {
    profile: TailProfile,
    h: f64,
    v: Vec<f64>,
    slope: Vec<f64>,
    /// `∫_1^∞ r^{-3}/φ dr`.
    w1: f64,
}

/// `r^{-3}/φ(r)` times the Jacobian `dr = r dv`, in `v = ln r`.
fn density_ln(profile: &TailProfile, v: f64) -> f64 {
    (-2.0 * v).exp() * profile.inv_phi_ln(v)
}

/// Closed-form `v(s)` and `dv/ds` where the CDF inverts analytically.
fn exact(profile: &TailProfile, s: f64) -> Option<(f64, f64)> {
    match *profile {
        TailProfile::PowerLaw { eps } => Some((s / (2.0 + eps), 1.0 / (2.0 + eps))),
        TailProfile::Constant => Some((0.5 * s, 0.5)),
        TailProfile::Truncated { r_max } => {
            // 1 - F(r) = (r^{-2} - R^{-2}) / (1 - R^{-2})
            let a = 1.0 - r_max.powi(-2);
            let q = 1.0 - (-(-s).exp_m1()) * a;
            Some((-0.5 * q.ln(), 0.5 * a * (-s).exp() / q))
        }
        _ => None,
    }
}

impl InverseCdfTable {
    pub fn new(profile: TailProfile, resolution: usize) -> Result<Self> {
        profile.validate()?;
        if resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "inverse CDF resolution must be at least {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        let w1 = profile.weighted_tail_integral(1.0, 3.0)?;
        if !(w1 > 0.0 && w1.is_finite()) {
            return Err(Error::Config(format!("big-jump mass must be finite and positive, got {w1}")));
        }
        let h = S_MAX / (resolution - 1) as f64;
        let mut v = Vec::with_capacity(resolution);
        let mut slope = Vec::with_capacity(resolution);
        if exact(&profile, 0.0).is_some() {
            for i in 0..resolution {
                let (vi, mi) = exact(&profile, i as f64 * h).unwrap();
                v.push(vi);
                slope.push(mi);
            }
        } else {
            march(&profile, w1, h, resolution, &mut v, &mut slope)?;
        }
        limit_slopes(h, &v, &mut slope);
        Ok(InverseCdfTable { profile, h, v, slope, w1 })
    }

    pub fn resolution(&self) -> usize {
        self.v.len()
    }

    /// Radius at `s = -ln(1 - u)`; `s` is Exp(1) distributed when `u` is uniform.
    #[inline]
    pub fn radius_from_exp(&self, s: f64) -> f64 {
        let x = s / self.h;
        let i = x as usize;
        if i + 1 >= self.v.len() {
            return self.tail_radius(s);
        }
        let t = x - i as f64;
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let (m0, m1) = (self.slope[i] * self.h, self.slope[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v =
            (2.0 * t3 - 3.0 * t2 + 1.0) * v0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * v1 + (t3 - t2) * m1;
        v.exp()
    }

    /// `F^{-1}(u)` for `u ∈ (0, 1)`.
    pub fn radius(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        Ok(self.radius_from_exp(-(-u).ln_1p()))
    }

    #[cold]
    fn tail_radius(&self, s: f64) -> f64 {
        if let Some((v, _)) = exact(&self.profile, s) {
            return v.exp();
        }
        // Newton on ln W(e^v) = ln W(1) - s, starting from the last node.
        let target = self.w1.ln() - s;
        let mut v = *self.v.last().unwrap();
        for _ in 0..100 {
            let w = match self.profile.weighted_tail_integral(v.exp(), 3.0) {
                Ok(w) if w > 0.0 => w,
                _ => break,
            };
            let f = w.ln() - target;
            let step = f * w / density_ln(&self.profile, v);
            if !step.is_finite() {
                break;
            }
            v += step.clamp(-10.0, 10.0);
            if step.abs() <= 1e-12 * v.abs().max(1.0) {
                break;
            }
        }
        v.exp()
    }
}

/// Builds nodes by integrating the density outward node to node.
fn march(profile: &TailProfile, w1: f64, h: f64, n: usize, v: &mut Vec<f64>, slope: &mut Vec<f64>) -> Result<()> {
    let g = |x: f64| density_ln(profile, x);
    let mut v_prev = 0.0;
    let mut w_prev = w1;
    v.push(0.0);
    slope.push(w1 / g(0.0));
    for i in 1..n {
        let target = w1 * (-(i as f64) * h).exp();
        let delta = w_prev - target;
        let mut x = v_prev + delta / g(v_prev);
        let mut lo = v_prev;
        let mut hi = f64::INFINITY;
        for _ in 0..100 {
            let mass = quad::integrate(g, v_prev, x, 1e-13)?.value;
            let err = mass - delta;
            if err < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if err.abs() <= 1e-14 * delta {
                break;
            }
            let mut next = x - err / g(x);
            if !(next > lo && next < hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x - v_prev };
            }
            x = next;
        }
        let w = if i % REANCHOR == 0 { profile.weighted_tail_integral(x.exp(), 3.0)? } else { target };
        v.push(x);
        slope.push(w / g(x));
        v_prev = x;
        w_prev = w;
    }
    Ok(())
}

/// Fritsch–Carlson limiter: keeps each Hermite segment monotone.
fn limit_slopes(h: f64, v: &[f64], m: &mut [f64]) {
    for k in 0..v.len() - 1 {
        let secant = (v[k + 1] - v[k]) / h;
        if secant <= 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
            continue;
        }
        let a = m[k] / secant;
        let b = m[k + 1] / secant;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * secant;
            m[k + 1] = tau * b * secant;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_quantiles() {
        let t = InverseCdfTable::new(TailProfile::PowerLaw { eps: 1.0 }, DEFAULT_RESOLUTION).unwrap();
        assert!((t.radius(7.0 / 8.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((t.radius(1e-15).unwrap() - 1.0).abs() < 1e-12);
        assert!(t.radius(0.0).is_err());
        assert!(t.radius(1.0).is_err());
        // beyond the last node
        let u = 1.0 - 1e-9;
        assert!((t.radius(u).unwrap() - 1e3).abs() < 1e-3);
    }

    #[test]
    fn truncated_support() {
        let t = InverseCdfTable::new(TailProfile::Truncated { r_max: 10.0 }, DEFAULT_RESOLUTION).unwrap();
        let top = t.radius(1.0 - 1e-15).unwrap();
        assert!(top <= 10.0 && top > 9.99);
        let u = 0.5;
        let exact = (1.0 - u * (1.0 - 0.01f64)).powf(-0.5);
        assert!((t.radius(u).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn marched_table_matches_cdf() {
        for profile in [
            TailProfile::PolyLog { eps: 0.5 },
            TailProfile::Exponential { c: 1.0, beta: 0.5 },
            TailProfile::LogIterated { theta: 1.0 },
        ] {
            let t = InverseCdfTable::new(profile, 1024).unwrap();
            let w1 = profile.weighted_tail_integral(1.0, 3.0).unwrap();
            for u in [0.01, 0.3, 0.77, 0.999, 0.999_999, 1.0 - 1e-8] {
                let r = t.radius(u).unwrap();
                let tail = profile.weighted_tail_integral(r, 3.0).unwrap() / w1;
                assert!(((1.0 - tail) - u).abs() < 1e-9 * (1.0 - u).max(1e-3), "{profile:?} u={u} r={r}");
            }
        }
    }

    #[test]
    fn too_coarse_rejected() {
        assert!(InverseCdfTable::new(TailProfile::PowerLaw { eps: 1.0 }, 100).is_err());
    }
}
