use serde::Serialize;

use super::{CapitalPhi, JumpKernel};
use crate::error::{Error, Result};

/// Grid checks of the tail-profile conditions, with every value they were decided from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    pub kernel_digest: String,
    pub grid: Vec<f64>,
    /// `None` when the second moment diverges.
    pub second_moment_total: Option<f64>,
    /// `(K, tail_mass(K))` over the grid.
    pub tail_mass_at: Vec<(f64, f64)>,
    pub phi: Vec<f64>,
    /// `Φ` on the grid; `0` where the defining integral diverges.
    pub capital_phi: Vec<f64>,
    /// `max(log Φ(s), 1) / s` on the grid.
    pub log_phi_over_s: Vec<f64>,
    /// Grid point after which `log Φ(s)/s` is non-increasing.
    pub log_phi_over_s_onset: Option<f64>,
    pub phi_gamma_ratio: Vec<f64>,
    pub seam_ratio: f64,
    pub phi_monotone_ok: bool,
    pub log_phi_over_s_decreasing_ok: bool,
    pub phi_diverges_ok: bool,
    pub phi_phi_gamma_bounded_ok: bool,
    pub gamma_used: f64,
}

impl KernelReport {
    pub fn all_ok(&self) -> bool {
        self.phi_monotone_ok
            && self.log_phi_over_s_decreasing_ok
            && self.phi_diverges_ok
            && self.phi_phi_gamma_bounded_ok
    }
}

/// `Φ` growth over the grid that counts as evidence of `Φ(∞) = ∞`.
const DIVERGENCE_FACTOR: f64 = 1.5;
/// Allowed growth of `Φ/φ^γ` relative to its value at the first grid point.
const GAMMA_SLACK: f64 = 10.0;

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// Index after which `v` is non-increasing, if that happens within the first half.
fn eventual_peak(v: &[f64]) -> Option<usize> {
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let peak = (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best });
    (2 * peak < v.len() && non_increasing(&v[peak..])).then_some(peak)
}

/// Evaluates the tail-profile conditions on `grid`.
///
/// `log Φ(s)/s` uses `log Φ` clamped below at 1, the same clamp the regime
/// classifier uses, and is accepted when it is non-increasing from its maximum
/// on, provided that maximum sits in the first half of the grid.
pub fn check_assumption_a(kernel: &JumpKernel, grid: &[f64], gamma: f64) -> Result<KernelReport> {
    if grid.len() < 8 {
        return Err(Error::Domain(format!("grid needs at least 8 points, got {}", grid.len())));
    }
    if grid[0] < 1.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid must be strictly increasing and start at s >= 1".into()));
    }
    let profile = kernel.profile;
    let phi: Vec<f64> = grid.iter().map(|&s| profile.phi(s)).collect();
    let big_phi: Vec<CapitalPhi> = grid.iter().map(|&s| profile.capital_phi(s)).collect::<Result<_>>()?;
    let divergent = big_phi.iter().any(|p| p.is_divergent());
    let capital_phi: Vec<f64> = big_phi.iter().map(|p| p.value()).collect();

    let phi_monotone_ok = phi.windows(2).all(|w| w[1] >= w[0]) && phi.iter().all(|&p| p >= 1.0);

    let first = capital_phi[0];
    let last = *capital_phi.last().unwrap();
    let phi_diverges_ok = !divergent
        && capital_phi.windows(2).all(|w| w[1] > w[0])
        && (last.is_infinite() || last >= DIVERGENCE_FACTOR * first);

    let log_phi_over_s: Vec<f64> = grid
        .iter()
        .zip(&capital_phi)
        .map(|(&s, &p)| if p.is_infinite() { f64::INFINITY } else { p.ln().max(1.0) / s })
        .collect();
    let peak = if divergent { None } else { eventual_peak(&log_phi_over_s) };
    let log_phi_over_s_decreasing_ok = peak.is_some();

    let phi_gamma_ratio: Vec<f64> = capital_phi.iter().zip(&phi).map(|(&p, &f)| p / f.powf(gamma)).collect();
    let r0 = phi_gamma_ratio[0];
    let phi_phi_gamma_bounded_ok =
        !divergent && phi_gamma_ratio.iter().all(|&q| q.is_finite() && q <= GAMMA_SLACK * r0);

    let tail_mass_at = grid.iter().map(|&k| Ok((k, kernel.tail_mass(k)?))).collect::<Result<_>>()?;
    let second_moment_total = match kernel.second_moment() {
        Ok(m) => Some(m.total()),
        Err(Error::DivergentSecondMoment) => None,
        Err(e) => return Err(e),
    };

    Ok(KernelReport {
        kernel_digest: kernel.digest(),
        grid: grid.to_vec(),
        second_moment_total,
        tail_mass_at,
        phi,
        capital_phi,
        log_phi_over_s,
        log_phi_over_s_onset: peak.map(|i| grid[i]),
        phi_gamma_ratio,
        seam_ratio: kernel.seam_ratio(),
        phi_monotone_ok,
        log_phi_over_s_decreasing_ok,
        phi_diverges_ok,
        phi_phi_gamma_bounded_ok,
        gamma_used: gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TailProfile;

    fn kernel(profile: TailProfile) -> JumpKernel {
        JumpKernel::new(1, 0.5, 1.0, 1.0, profile).unwrap()
    }

    fn ints(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn power_law_passes() {
        let r = check_assumption_a(&kernel(TailProfile::PowerLaw { eps: 1.0 }), &ints(256), 1.0).unwrap();
        assert!(r.all_ok(), "{r:?}");
        assert!(r.phi_gamma_ratio.iter().all(|&q| (q - 1.0).abs() < 1e-12));
        assert!((r.second_moment_total.unwrap() - 10.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_passes() {
        let k = kernel(TailProfile::Exponential { c: 1.0, beta: 0.5 });
        let r = check_assumption_a(&k, &ints(64), 1.0).unwrap();
        assert!(r.all_ok(), "{r:?}");
    }

    #[test]
    fn constant_fails_divergence() {
        let r = check_assumption_a(&kernel(TailProfile::Constant), &ints(16), 1.0).unwrap();
        assert!(!r.phi_diverges_ok);
        assert!(r.second_moment_total.is_none());
    }

    #[test]
    fn unclamped_log_ratio_is_not_monotone_near_one() {
        // log(s)/s rises on [1, e]; the clamp is what makes the check pass.
        let g: Vec<f64> = ints(8).iter().map(|&s| s.ln() / s).collect();
        assert!(!non_increasing(&g));
        assert_eq!(eventual_peak(&g), Some(2));
    }

    #[test]
    fn bad_grid_rejected() {
        let k = JumpKernel::reference();
        assert!(check_assumption_a(&k, &ints(4), 1.0).is_err());
        let mut g = ints(10);
        g[3] = g[2];
        assert!(check_assumption_a(&k, &g, 1.0).is_err());
    }
}
