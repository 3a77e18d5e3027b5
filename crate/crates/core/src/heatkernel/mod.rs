//! Transition-density estimation and the regime-wise bound curves it is compared with.

mod bounds;
mod conditional;
mod density;
mod fit;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::JumpKernel;

pub use bounds::{bound_curves, lower_bound, regime_lower, regime_upper, BoundConstants, RegimeBound};
pub use conditional::{conditional_density, PointDensity};
pub use density::{estimate_radial_density, shell_edges, DensityEstimate, DEFAULT_H_REL};
pub use fit::{fit_constants, FitReport, MIN_SHELL_COUNT, THETA0_CANDIDATES};

/// Default lower end of the time range the bounds are asserted on.
pub const DEFAULT_T0: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    OnDiagonal,
    Gaussian,
    Far,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::OnDiagonal => "on_diagonal",
            Regime::Gaussian => "gaussian",
            Regime::Far => "far",
        }
    }
}

/// `t` below which `(t, r)` is in the far regime: `θ₀ r² / max(log Φ(r), 1)`.
pub fn far_boundary(kernel: &JumpKernel, r: f64, theta0: f64) -> f64 {
    theta0 * r * r / kernel.log_capital_phi_clamped(r)
}

/// On-diagonal if `t >= r²`, Gaussian if `θ₀ r²/log Φ(r) <= t < r²`, far otherwise.
pub fn classify_regime(t: f64, r: f64, kernel: &JumpKernel, theta0: f64) -> Result<Regime> {
    if !(t > 0.0) || !(r >= 0.0) {
        return Err(Error::Domain(format!("regime needs t > 0 and r >= 0, got t={t}, r={r}")));
    }
    if !(theta0 > 0.0 && theta0 < 1.0) {
        return Err(Error::Domain(format!("theta0 must lie in (0, 1), got {theta0}")));
    }
    Ok(if t >= r * r {
        Regime::OnDiagonal
    } else if t >= far_boundary(kernel, r, theta0) {
        Regime::Gaussian
    } else {
        Regime::Far
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        let k = JumpKernel::new(1, 0.5, 1.0, 1.0, crate::TailProfile::PowerLaw { eps: 1.0 }).unwrap();
        assert_eq!(classify_regime(100.0, 5.0, &k, 0.1).unwrap(), Regime::OnDiagonal);
        let boundary = far_boundary(&k, 100.0, 0.1);
        assert!((boundary - 1000.0 / 100f64.ln()).abs() < 1e-9);
        assert!((boundary - 217.15).abs() < 0.01);
        assert_eq!(classify_regime(500.0, 100.0, &k, 0.1).unwrap(), Regime::Gaussian);
        assert_eq!(classify_regime(100.0, 100.0, &k, 0.1).unwrap(), Regime::Far);
        assert_eq!(classify_regime(1e-9, 0.0, &k, 0.1).unwrap(), Regime::OnDiagonal);
        assert!(classify_regime(0.0, 1.0, &k, 0.1).is_err());
        assert!(classify_regime(1.0, 1.0, &k, 1.0).is_err());
    }
}
