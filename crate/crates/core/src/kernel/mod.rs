//! Radial jumping kernels: stable-like intensity below unit range, a
//! `φ`-damped `r^{-(d+2)}` tail beyond it, and the radial integrals
//! (`Φ`, second moment, tail mass, Lévy rates) everything downstream uses.

mod profile;
mod report;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{norm, unit_sphere_area};

pub use profile::{CapitalPhi, TailProfile};
pub use report::{check_assumption_a, KernelReport};

/// Bounded symmetric multiplier `m(x, y) ∈ [lo, hi]` applied to `j(|x - y|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub lo: f64,
    pub hi: f64,
}

impl Modulation {
    /// `m(x, y) = lo + (hi - lo) (2 + cos Σx + cos Σy) / 4`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        self.lo + (self.hi - self.lo) * (2.0 + (sx.cos() + sy.cos())) / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpKernel {
    pub dim: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub c_tail: f64,
    pub profile: TailProfile,
    #[serde(default)]
    pub modulation: Option<Modulation>,
}

/// Second-moment contributions `ω_d ∫ r^{d+1} j(r) dr` split at `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMoment {
    pub sub_unit: f64,
    pub tail: f64,
}

impl SecondMoment {
    pub fn total(&self) -> f64 {
        self.sub_unit + self.tail
    }
}

/// Rates of the three-way split of the jump measure at cutoff `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevyRates {
    /// Intensity of jumps with `δ <= r < 1`.
    pub lambda_small: f64,
    /// Variance (summed over coordinates) of jumps shorter than `δ`.
    pub sigma2_small: f64,
    /// Intensity of jumps with `r >= 1`.
    pub lambda_big: f64,
}

impl JumpKernel {
    /// Stable-like core with the given tail, unmodulated.
    pub fn new(dim: usize, alpha: f64, kappa: f64, c_tail: f64, profile: TailProfile) -> Result<Self> {
        let k = JumpKernel { dim, alpha, kappa, c_tail, profile, modulation: None };
        k.validate()?;
        Ok(k)
    }

    pub fn with_modulation(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.modulation = Some(Modulation { lo, hi });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        if !(self.c_tail >= 0.0) || !self.c_tail.is_finite() {
            return Err(Error::Config(format!("c_tail must be non-negative, got {}", self.c_tail)));
        }
        if let Some(m) = self.modulation {
            if !(m.lo > 0.0 && m.lo <= m.hi && m.hi.is_finite()) {
                return Err(Error::Config(format!("modulation needs 0 < lo <= hi, got ({}, {})", m.lo, m.hi)));
            }
        }
        self.profile.validate()
    }

    /// The reference kernel of the acceptance suite: `d = 1, α = 1/2, κ = 1, c_J = 1, φ(r) = r`.
    pub fn reference() -> Self {
        JumpKernel {
            dim: 1,
            alpha: 0.5,
            kappa: 1.0,
            c_tail: 1.0,
            profile: TailProfile::PowerLaw { eps: 1.0 },
            modulation: None,
        }
    }

    pub fn omega(&self) -> f64 {
        unit_sphere_area(self.dim)
    }

    pub fn m_hi(&self) -> f64 {
        self.modulation.map_or(1.0, |m| m.hi)
    }

    pub fn m_lo(&self) -> f64 {
        self.modulation.map_or(1.0, |m| m.lo)
    }

    /// Radial intensity `j(r)`.
    pub fn eval_j(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("j(r) needs r > 0, got {r}")));
        }
        Ok(self.j_unchecked(r))
    }

    pub(crate) fn j_unchecked(&self, r: f64) -> f64 {
        let d = self.dim as f64;
        if r < 1.0 {
            self.kappa * r.powf(-d - self.alpha)
        } else {
            let phi = self.profile.phi(r);
            if phi.is_infinite() || self.c_tail == 0.0 {
                0.0
            } else {
                self.c_tail * r.powf(-(d + 2.0)) / phi
            }
        }
    }

    /// `J(x, y) = m(x, y) j(|x - y|)`.
    pub fn eval_pair(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let j = self.eval_j(norm(&diff))?;
        Ok(match self.modulation {
            Some(m) => m.eval(x, y) * j,
            None => j,
        })
    }

    /// Ratio `j(1^-) / j(1^+)` of the one-sided limits at the core/tail seam.
    pub fn seam_ratio(&self) -> f64 {
        let tail = self.c_tail / self.profile.phi(1.0);
        self.kappa / tail
    }

    /// `Φ(s)` of the tail profile.
    pub fn capital_phi(&self, s: f64) -> Result<CapitalPhi> {
        self.profile.capital_phi(s)
    }

    /// `log Φ(r)` clamped below at 1 (also for `r < 1` and divergent profiles).
    pub fn log_capital_phi_clamped(&self, r: f64) -> f64 {
        if r < 1.0 {
            return 1.0;
        }
        match self.profile.capital_phi(r) {
            Ok(CapitalPhi::Value(v)) if v > std::f64::consts::E => v.ln(),
            _ => 1.0,
        }
    }

    /// Second moment of the unmodulated jump measure.
    pub fn second_moment(&self) -> Result<SecondMoment> {
        let omega = self.omega();
        let sub_unit = omega * self.kappa / (2.0 - self.alpha);
        let tail = if self.c_tail == 0.0 {
            0.0
        } else {
            let integral = self.profile.reciprocal_phi_integral(1.0)?;
            if integral.is_infinite() {
                return Err(Error::DivergentSecondMoment);
            }
            omega * self.c_tail * integral
        };
        Ok(SecondMoment { sub_unit, tail })
    }

    /// `(m_lo, m_hi)`-scaled bracket on `sup_x ∫ |x - y|^2 J(x, y) dy`.
    pub fn second_moment_bounds(&self) -> Result<(f64, f64)> {
        let total = self.second_moment()?.total();
        Ok((self.m_lo() * total, self.m_hi() * total))
    }

    /// `ω_d ∫_K^∞ r^{d-1} j(r) dr`.
    pub fn tail_mass(&self, k: f64) -> Result<f64> {
        if !(k >= 1.0) {
            return Err(Error::Domain(format!("tail mass needs K >= 1, got {k}")));
        }
        if self.c_tail == 0.0 {
            return Ok(0.0);
        }
        Ok(self.omega() * self.c_tail * self.profile.weighted_tail_integral(k, 3.0)?)
    }

    /// Rates of the decomposition at cutoff `δ ∈ (0, 1]`; `δ = 1` folds every
    /// sub-unit jump into the Gaussian part.
    pub fn levy_rates(&self, delta: f64) -> Result<LevyRates> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Domain(format!("cutoff δ must lie in (0, 1], got {delta}")));
        }
        let omega = self.omega();
        let a = self.alpha;
        let lambda_small = omega * self.kappa * (delta.powf(-a) - 1.0) / a;
        let sigma2_small = omega * self.kappa * delta.powf(2.0 - a) / (2.0 - a);
        let lambda_big = if self.c_tail == 0.0 {
            0.0
        } else {
            omega * self.c_tail * self.profile.weighted_tail_integral(1.0, 3.0)?
        };
        Ok(LevyRates { lambda_small, sigma2_small, lambda_big })
    }

    /// Canonical text used for hashing; stable across runs and platforms.
    pub fn canonical(&self) -> String {
        let profile = match self.profile {
            TailProfile::PowerLaw { eps } => format!("power:{eps:e}"),
            TailProfile::PolyLog { eps } => format!("polylog:{eps:e}"),
            TailProfile::LogIterated { theta } => format!("logiterated:{theta:e}"),
            TailProfile::Exponential { c, beta } => format!("exponential:{c:e}:{beta:e}"),
            TailProfile::Constant => "constant".to_string(),
            TailProfile::Truncated { r_max } => format!("truncated:{r_max:e}"),
        };
        let modulation = match self.modulation {
            Some(m) => format!("{:e}:{:e}", m.lo, m.hi),
            None => "none".to_string(),
        };
        format!(
            "d={};alpha={:e};kappa={:e};c_tail={:e};profile={};modulation={}",
            self.dim, self.alpha, self.kappa, self.c_tail, profile, modulation
        )
    }

    /// SHA-256 of [`JumpKernel::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{self, REL_TOL};

    fn truncated() -> JumpKernel {
        JumpKernel::new(1, 0.5, 1.0, 1.0, TailProfile::Truncated { r_max: 10.0 }).unwrap()
    }

    #[test]
    fn eval_j_examples() {
        let k = JumpKernel::reference();
        assert!((k.eval_j(0.25).unwrap() - 8.0).abs() < 1e-12);
        assert!((k.eval_j(2.0).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(truncated().eval_j(20.0).unwrap(), 0.0);
        assert!(k.eval_j(0.0).is_err());
        assert!(k.eval_j(-1.0).is_err());
    }

    #[test]
    fn symmetric_pair_kernel() {
        let k = JumpKernel::new(2, 1.2, 0.7, 2.0, TailProfile::PolyLog { eps: 0.5 })
            .unwrap()
            .with_modulation(0.5, 2.0)
            .unwrap();
        let x = [0.3, -1.1];
        let y = [2.4, 0.9];
        let a = k.eval_pair(&x, &y).unwrap();
        let b = k.eval_pair(&y, &x).unwrap();
        assert_eq!(a, b);
        let j = k.eval_j(norm(&[2.1, 2.0])).unwrap();
        assert!(a >= 0.5 * j - 1e-15 && a <= 2.0 * j + 1e-15);
    }

    #[test]
    fn second_moment_examples() {
        let m = JumpKernel::reference().second_moment().unwrap();
        assert!((m.total() - 10.0 / 3.0).abs() < 1e-9);
        // φ = 1 on [1, 10]: the tail term is 2 ∫_1^10 dr / r.
        let t = truncated().second_moment().unwrap();
        assert!((t.total() - (4.0 / 3.0 + 2.0 * 10f64.ln())).abs() < 1e-12);
        let c = JumpKernel::new(1, 0.5, 1.0, 1.0, TailProfile::Constant).unwrap();
        assert_eq!(c.second_moment(), Err(Error::DivergentSecondMoment));
    }

    #[test]
    fn modulated_second_moment_brackets() {
        let k = JumpKernel::reference().with_modulation(0.5, 2.0).unwrap();
        let (lo, hi) = k.second_moment_bounds().unwrap();
        assert!((lo - 5.0 / 3.0).abs() < 1e-9);
        assert!((hi - 20.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn tail_mass_examples() {
        let k = JumpKernel::reference();
        assert!((k.tail_mass(2.0).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        assert_eq!(truncated().tail_mass(10.0).unwrap(), 0.0);
        assert!(k.tail_mass(0.5).is_err());
        let grid: Vec<f64> = (0..40).map(|i| 1.5f64.powi(i)).collect();
        let masses: Vec<f64> = grid.iter().map(|&g| k.tail_mass(g).unwrap()).collect();
        assert!(masses.windows(2).all(|w| w[1] < w[0]));
        assert!(*masses.last().unwrap() < 1e-15);
    }

    #[test]
    fn tail_mass_times_k_squared_below_tail_moment() {
        for k in [
            JumpKernel::reference(),
            truncated(),
            JumpKernel::new(1, 0.5, 1.0, 1.0, TailProfile::PolyLog { eps: 0.5 }).unwrap(),
            JumpKernel::new(3, 1.5, 1.0, 2.0, TailProfile::Exponential { c: 1.0, beta: 0.5 }).unwrap(),
        ] {
            let tail = k.second_moment().unwrap().tail;
            for i in 0..30 {
                let kk = 1.3f64.powi(i);
                assert!(k.tail_mass(kk).unwrap() * kk * kk <= tail * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn levy_rate_examples() {
        let k = JumpKernel::reference();
        let r = k.levy_rates(0.25).unwrap();
        assert!((r.lambda_small - 4.0).abs() < 1e-12);
        assert!((r.sigma2_small - 1.0 / 6.0).abs() < 1e-14);
        assert!((r.lambda_big - 2.0 / 3.0).abs() < 1e-14);
        assert!(k.levy_rates(0.0).is_err());
        assert!(k.levy_rates(1.5).is_err());
        assert_eq!(k.levy_rates(1.0).unwrap().lambda_small, 0.0);
    }

    #[test]
    fn decomposition_conserves_sub_unit_variance() {
        let k = JumpKernel::reference();
        let sub = k.second_moment().unwrap().sub_unit;
        for delta in [0.5, 0.1, 0.02] {
            let r = k.levy_rates(delta).unwrap();
            let mid = quad::integrate(|x: f64| k.omega() * k.kappa * x.powf(1.0 - k.alpha), delta, 1.0, REL_TOL)
                .unwrap()
                .value;
            assert!(((r.sigma2_small + mid) - sub).abs() <= 1e-8 * sub);
        }
    }

    #[test]
    fn seam_ratio_recorded() {
        let k = JumpKernel::reference();
        assert_eq!(k.seam_ratio(), 1.0);
        let left = k.eval_j(1.0 - 1e-12).unwrap();
        let right = k.eval_j(1.0).unwrap();
        assert!((left / right - k.seam_ratio()).abs() < 1e-9);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = JumpKernel::reference();
        let mut b = a;
        b.alpha = 0.6;
        assert_eq!(a.digest(), JumpKernel::reference().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn invalid_kernels_rejected() {
        assert!(JumpKernel::new(0, 0.5, 1.0, 1.0, TailProfile::Constant).is_err());
        assert!(JumpKernel::new(1, 2.0, 1.0, 1.0, TailProfile::Constant).is_err());
        assert!(JumpKernel::reference().with_modulation(2.0, 1.0).is_err());
    }
}
