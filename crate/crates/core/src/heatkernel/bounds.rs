use serde::{Deserialize, Serialize};

use super::{classify_regime, Regime, DEFAULT_T0};
use crate::error::{Error, Result};
use crate::kernel::{JumpKernel, TailProfile};

/// Constants of the regime-wise bounds; upper and lower curves carry their own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `p <= c1_upper t^{-d/2}` on the diagonal; also the prefactor of the far-regime `U`.
    pub c1_upper: f64,
    pub c1_lower: f64,
    pub gauss_upper: f64,
    pub gauss_lower: f64,
    pub c2_upper: f64,
    pub c2_lower: f64,
    /// Prefactor of `t / r^{d+2+ε}` for power-law tails, of `U` otherwise.
    pub far_upper: Option<f64>,
    pub far_lower: Option<f64>,
    pub theta0: f64,
    pub t0: f64,
    /// Scale `κ` of the far-regime bound `U(t, r, φ, Φ, κ)`.
    pub kappa: f64,
}

impl BoundConstants {
    /// All prefactors `c1`, both exponents `c2`, no far constants.
    pub fn uniform(c1: f64, c2: f64, theta0: f64) -> Self {
        BoundConstants {
            c1_upper: c1,
            c1_lower: c1,
            gauss_upper: c1,
            gauss_lower: c1,
            c2_upper: c2,
            c2_lower: c2,
            far_upper: None,
            far_lower: None,
            theta0,
            t0: DEFAULT_T0,
            kappa: 1.0,
        }
    }

    fn named(&self, regime: Regime) -> Vec<(String, f64)> {
        let mut v = vec![("theta0".to_string(), self.theta0)];
        match regime {
            Regime::OnDiagonal => {
                v.push(("c1_upper".into(), self.c1_upper));
                v.push(("c1_lower".into(), self.c1_lower));
            }
            Regime::Gaussian => {
                v.push(("gauss_upper".into(), self.gauss_upper));
                v.push(("gauss_lower".into(), self.gauss_lower));
                v.push(("c2_upper".into(), self.c2_upper));
                v.push(("c2_lower".into(), self.c2_lower));
            }
            Regime::Far => {
                if let Some(c) = self.far_upper {
                    v.push(("far_upper".into(), c));
                }
                if let Some(c) = self.far_lower {
                    v.push(("far_lower".into(), c));
                }
                v.push(("c1_upper".into(), self.c1_upper));
                v.push(("kappa".into(), self.kappa));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeBound {
    pub t: f64,
    pub r: f64,
    pub regime: Regime,
    pub upper: f64,
    /// `None` where no lower bound is available (far regime, non-power-law tail).
    pub lower: Option<f64>,
    pub constants_used: Vec<(String, f64)>,
}

fn power_law_eps(kernel: &JumpKernel) -> Option<f64> {
    match kernel.profile {
        TailProfile::PowerLaw { eps } => Some(eps),
        _ => None,
    }
}

/// `U(t, r, φ, Φ, κ)` with unit prefactor.
pub(crate) fn far_shape_general(kernel: &JumpKernel, t: f64, r: f64, kappa: f64) -> f64 {
    let d = kernel.dim as f64;
    let s = (r / kappa).max(1.0);
    let poly = t * r.powf(-(d + 2.0));
    let tilt = match kernel.profile.capital_phi(s) {
        Ok(p) if p.value() > 0.0 => t.powf(-0.5 * d) * p.value().powf(-kappa / 8.0),
        _ => f64::INFINITY,
    };
    tilt.min(poly) + poly / kernel.profile.phi(s)
}

/// Upper curve of `regime` at `(t, r)`, whatever regime `(t, r)` actually falls in.
pub fn regime_upper(kernel: &JumpKernel, regime: Regime, t: f64, r: f64, c: &BoundConstants) -> f64 {
    let d = kernel.dim as f64;
    let diag = t.powf(-0.5 * d);
    match regime {
        Regime::OnDiagonal => c.c1_upper * diag,
        Regime::Gaussian => c.gauss_upper * diag * (-c.c2_upper * r * r / t).exp(),
        Regime::Far => {
            if let Some(eps) = power_law_eps(kernel) {
                let pref = c.far_upper.unwrap_or(c.c1_upper);
                return pref * t * r.powf(-(d + 2.0 + eps));
            }
            c.far_upper.unwrap_or(c.c1_upper) * far_shape_general(kernel, t, r, c.kappa)
        }
    }
}

/// Lower curve of `regime` at `(t, r)`.
pub fn regime_lower(kernel: &JumpKernel, regime: Regime, t: f64, r: f64, c: &BoundConstants) -> Result<f64> {
    let d = kernel.dim as f64;
    let diag = t.powf(-0.5 * d);
    match regime {
        Regime::OnDiagonal => Ok(c.c1_lower * diag),
        Regime::Gaussian => Ok(c.gauss_lower * diag * (-c.c2_lower * r * r / t).exp()),
        Regime::Far => match (power_law_eps(kernel), c.far_lower) {
            (Some(eps), Some(pref)) => Ok(pref * t * r.powf(-(d + 2.0 + eps))),
            _ => Err(Error::NoLowerBound("far")),
        },
    }
}

/// Lower curve at `(t, r)` in the regime `(t, r)` belongs to.
pub fn lower_bound(kernel: &JumpKernel, t: f64, r: f64, c: &BoundConstants) -> Result<f64> {
    regime_lower(kernel, classify_regime(t, r, kernel, c.theta0)?, t, r, c)
}

/// Regime, upper and (where available) lower curve at each radius.
pub fn bound_curves(kernel: &JumpKernel, t: f64, r_grid: &[f64], c: &BoundConstants) -> Result<Vec<RegimeBound>> {
    if t < c.t0 {
        return Err(Error::Validity(format!("bounds hold for t >= t0 = {}, got t = {t}", c.t0)));
    }
    r_grid
        .iter()
        .map(|&r| {
            let regime = classify_regime(t, r, kernel, c.theta0)?;
            let lower = match regime_lower(kernel, regime, t, r, c) {
                Ok(v) => Some(v),
                Err(Error::NoLowerBound(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(RegimeBound {
                t,
                r,
                regime,
                upper: regime_upper(kernel, regime, t, r, c),
                lower,
                constants_used: c.named(regime),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let k2 = JumpKernel::new(2, 0.5, 1.0, 1.0, TailProfile::PowerLaw { eps: 1.0 }).unwrap();
        let c = BoundConstants::uniform(1.0, 1.0, 0.1);
        let b = bound_curves(&k2, 100.0, &[1.0], &c).unwrap();
        assert_eq!(b[0].regime, Regime::OnDiagonal);
        assert!((b[0].upper - 1e-2).abs() < 1e-15);

        let k1 = JumpKernel::reference();
        let b = bound_curves(&k1, 100.0, &[1000.0], &c).unwrap();
        assert_eq!(b[0].regime, Regime::Far);
        assert!((b[0].upper - 1e-10).abs() < 1e-22);

        let r: f64 = 30.0;
        let g = regime_upper(&k1, Regime::Gaussian, r * r, r, &c);
        assert!((g - (-1.0f64).exp() / r).abs() < 1e-15);
    }

    #[test]
    fn far_lower_only_for_power_law() {
        let k = JumpKernel::new(1, 0.5, 1.0, 1.0, TailProfile::PolyLog { eps: 0.5 }).unwrap();
        let c = BoundConstants::uniform(1.0, 1.0, 0.1);
        assert_eq!(lower_bound(&k, 40.0, 1e4, &c), Err(Error::NoLowerBound("far")));
        let b = bound_curves(&k, 40.0, &[1e4], &c).unwrap();
        assert!(b[0].lower.is_none());
        assert!(b[0].upper > 0.0);
        let mut cp = c;
        cp.far_lower = Some(0.5);
        assert!(lower_bound(&JumpKernel::reference(), 40.0, 1e4, &cp).is_ok());
    }

    #[test]
    fn rejects_small_t() {
        let c = BoundConstants::uniform(1.0, 1.0, 0.1);
        assert!(bound_curves(&JumpKernel::reference(), 1.0, &[1.0], &c).is_err());
    }
}
