//! Off-diagonal upper bounds by exponential tilting.
//!
//! For the test function `ψ(x) = max(λ(R - |x - y₀|), 0)` the tilted energy
//! `Γ(ψ)(x) = ∫_{|x-y|<K} (e^{ψ(y)-ψ(x)} - 1)² J(x, y) dy` is dominated by the
//! radial majorant `Λ = m_hi λ² ω_d ∫_0^K r^{d+1} e^{2λr} j(r) dr`, and
//! `p(t, x, y) <= c t^{-d/2} exp(2tΛ - λR) + t sup_{r>=K} J`.
//! Each [`Strategy`] fixes `K` and `λ` as functions of `(t, R)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::norm;
use crate::kernel::JumpKernel;
use crate::quad::{self, REL_TOL};

/// `ψ(x) = max(λ(R - |x - center|), 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub lambda: f64,
    pub r: f64,
    pub center: Vec<f64>,
}

impl TestFunction {
    pub fn new(lambda: f64, r: f64, dim: usize) -> Result<Self> {
        if !(lambda >= 0.0 && r >= 0.0) {
            return Err(Error::Domain(format!("test function needs λ >= 0 and R >= 0, got {lambda}, {r}")));
        }
        Ok(TestFunction { lambda, r, center: vec![0.0; dim] })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        (self.lambda * (self.r - norm(&diff))).max(0.0)
    }
}

/// `ln Λ(λ, K)`, evaluated with the factor `e^{2λ·top}` pulled out of the integrals.
pub fn log_gamma_majorant(kernel: &JumpKernel, lambda: f64, k: f64) -> Result<f64> {
    if !(lambda >= 0.0 && k > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("majorant needs λ >= 0 and K > 0, got λ={lambda}, K={k}")));
    }
    if lambda == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = kernel.alpha;
    let b1 = k.min(1.0);
    let b2 = kernel.profile.support_end().map_or(k, |rm| k.min(rm));
    let has_tail = kernel.c_tail > 0.0 && b2 > 1.0;
    let top = if has_tail { b2 } else { b1 };
    let two_l = 2.0 * lambda;

    // r^{1-α} dr = du / (2-α) with u = r^{2-α}, which removes the endpoint singularity.
    let inner = if kernel.kappa > 0.0 {
        let p = 1.0 / (2.0 - a);
        let f = |u: f64| (two_l * (u.powf(p) - top)).exp();
        kernel.kappa * p * quad::integrate(f, 0.0, b1.powf(2.0 - a), REL_TOL)?.value
    } else {
        0.0
    };
    let outer = if has_tail {
        let f = |v: f64| (two_l * (v.exp() - top)).exp() * kernel.profile.inv_phi_ln(v);
        let breaks: Vec<f64> =
            [1.0, 8.0, 40.0].iter().map(|m| top - m / two_l).filter(|&r| r > 1.0).map(f64::ln).collect();
        kernel.c_tail * quad::integrate_pieces(f, 0.0, b2.ln(), &breaks, REL_TOL)?.value
    } else {
        0.0
    };
    let sum = inner + outer;
    if !(sum > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(kernel.m_hi().ln() + 2.0 * lambda.ln() + kernel.omega().ln() + two_l * top + sum.ln())
}

/// `Λ(λ, K)`; increasing in both arguments.
pub fn gamma_majorant(kernel: &JumpKernel, lambda: f64, k: f64) -> Result<f64> {
    Ok(log_gamma_majorant(kernel, lambda, k)?.exp())
}

/// `Γ_K(ψ)(x)` by direct quadrature; one-dimensional, unmodulated kernels only.
pub fn gamma_exact_point(kernel: &JumpKernel, tf: &TestFunction, x: &[f64], k: f64) -> Result<f64> {
    if kernel.dim != 1 || x.len() != 1 || tf.center.len() != 1 {
        return Err(Error::Domain("exact Γ is implemented for d = 1 only".into()));
    }
    if kernel.modulation.is_some() {
        return Err(Error::Domain("exact Γ needs an unmodulated kernel".into()));
    }
    if !(k > 0.0) {
        return Err(Error::Domain(format!("K must be positive, got {k}")));
    }
    let x0 = x[0];
    let psi_x = tf.eval(x);
    let a = kernel.alpha;
    let p = 1.0 / (2.0 - a);
    let c0 = tf.center[0];
    let mut total = 0.0;
    for sigma in [-1.0f64, 1.0] {
        let delta = |h: f64| tf.eval(&[x0 + sigma * h]) - psi_x;
        // Offsets where ψ(x + σh) has a kink.
        let kinks: Vec<f64> =
            [c0 - tf.r, c0, c0 + tf.r].iter().map(|&y| sigma * (y - x0)).filter(|&h| h > 0.0).collect();

        let b1 = k.min(1.0);
        if kernel.kappa > 0.0 {
            let f = |u: f64| {
                let e = delta(u.powf(p)).exp_m1();
                if e == 0.0 {
                    0.0
                } else {
                    kernel.kappa * p * e * e * u.powf(-p * a - 1.0)
                }
            };
            let breaks: Vec<f64> = kinks.iter().map(|h| h.powf(2.0 - a)).collect();
            total += quad::integrate_pieces(f, 0.0, b1.powf(2.0 - a), &breaks, REL_TOL)?.value;
        }
        let b2 = kernel.profile.support_end().map_or(k, |rm| k.min(rm));
        if kernel.c_tail > 0.0 && b2 > 1.0 {
            let f = |h: f64| {
                let e = delta(h).exp_m1();
                e * e * kernel.j_unchecked(h)
            };
            total += quad::integrate_pieces(f, 1.0, b2, &kinks, REL_TOL)?.value;
        }
    }
    Ok(total)
}

/// `trunc_bound + t sup_{r >= K} J`.
pub fn meyer_combine(trunc_bound: f64, t: f64, k: f64, kernel: &JumpKernel) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::Domain(format!("Meyer step needs K >= 1, got {k}")));
    }
    Ok(trunc_bound + t * kernel.m_hi() * kernel.j_unchecked(k))
}

/// Choice of truncation radius `K` and tilt `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// `K = R/θ`, `θ = 3(d+2)/2`, `λ = ln(K²/t) / 3K`; valid for `t <= K²`.
    Polynomial,
    /// `K = R`, `λ = ηR/2t` with the largest admissible dyadic `η`; valid for `θR²/log Φ(R) <= t <= R²`.
    GaussianRegime { theta: f64 },
    /// `K = R/κ`, `λ = log Φ(K) / 4K`; valid for `t <= θ₀R²/log Φ(R)`.
    /// `θ₀ = None` takes the largest admissible value.
    FarRegime { kappa: f64, theta0: Option<f64> },
    /// `K = R/θ`, `θ = 3(d+2)`, `λ = ln(K² (ln ln(e + Φ(K)))^δ / t) / 3K`.
    LogLogRefined { delta: f64, theta0: f64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Polynomial => "polynomial",
            Strategy::GaussianRegime { .. } => "gaussian_regime",
            Strategy::FarRegime { .. } => "far_regime",
            Strategy::LogLogRefined { .. } => "loglog_refined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaviesBound {
    pub strategy: Strategy,
    pub t: f64,
    pub r: f64,
    pub k: f64,
    pub lambda: f64,
    pub log_majorant: f64,
    /// `E = 2tΛ - λR`.
    pub e_value: f64,
    /// `ln c - (d/2) ln t`.
    pub log_prefactor: f64,
    pub log_bound: f64,
    pub meyer_term: f64,
    /// `exp(log_bound) + meyer_term`.
    pub bound_value: f64,
    pub eta: Option<f64>,
    pub theta0: Option<f64>,
}

fn validity(msg: String) -> Error {
    Error::Validity(msg)
}

fn log_phi_finite(kernel: &JumpKernel, s: f64) -> Result<f64> {
    let l = kernel.log_capital_phi_clamped(s);
    if l.is_finite() {
        Ok(l)
    } else {
        Err(validity(format!("Φ({s}) is infinite: no far regime beyond the support")))
    }
}

/// The bound at `(t, R)` with on-diagonal prefactor `c`.
pub fn davies_bound(kernel: &JumpKernel, t: f64, r: f64, strategy: Strategy, c: f64) -> Result<DaviesBound> {
    if !(t > 0.0 && r > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!("need t, R, c > 0, got t={t}, R={r}, c={c}")));
    }
    let d = kernel.dim as f64;
    let mut eta = None;
    let mut theta0_used = None;
    let (k, lambda, log_maj) = match strategy {
        Strategy::Polynomial => {
            let k = r / (1.5 * (d + 2.0));
            if t > k * k {
                return Err(validity(format!("t <= K^2 violated: t={t}, K={k}")));
            }
            let lambda = (k * k / t).ln() / (3.0 * k);
            (k, lambda, log_gamma_majorant(kernel, lambda, k)?)
        }
        Strategy::GaussianRegime { theta } => {
            if !(theta > 0.0) {
                return Err(Error::Domain(format!("θ must be positive, got {theta}")));
            }
            let lo = theta * r * r / kernel.log_capital_phi_clamped(r);
            if !(t >= lo && t <= r * r) {
                return Err(validity(format!("θR²/log Φ(R) <= t <= R² violated: t={t}, range [{lo}, {}]", r * r)));
            }
            let mut found = None;
            for j in 0..64 {
                let e = 0.5f64.powi(j);
                if e >= theta / 4.0 {
                    continue;
                }
                let lambda = e * r / (2.0 * t);
                let lm = log_gamma_majorant(kernel, lambda, r)?;
                let c_star = (lm - 2.0 * lambda.ln()).exp();
                if e * (1.0 - e * c_star) > 0.0 {
                    found = Some((e, lambda, lm));
                    break;
                }
            }
            let (e, lambda, lm) = found.ok_or_else(|| validity("no admissible η found".into()))?;
            eta = Some(e);
            (r, lambda, lm)
        }
        Strategy::FarRegime { kappa, theta0 } => {
            if !(kappa > 0.0) {
                return Err(Error::Domain(format!("κ must be positive, got {kappa}")));
            }
            let k = r / kappa;
            if k < 1.0 {
                return Err(validity(format!("K = R/κ >= 1 violated: K={k}")));
            }
            let lambda = log_phi_finite(kernel, k)? / (4.0 * k);
            let lm = log_gamma_majorant(kernel, lambda, k)?;
            let c0 = (lm - 2.0 * lambda.ln()).exp();
            let th = theta0.unwrap_or(1.0 / (c0 * kappa));
            if c0 * kappa * th > 1.0 + 1e-12 {
                return Err(validity(format!("c0·κ·θ0 <= 1 violated: c0={c0}, κ={kappa}, θ0={th}")));
            }
            let hi = th * r * r / log_phi_finite(kernel, r)?;
            if t > hi {
                return Err(validity(format!("t <= θ0 R²/log Φ(R) violated: t={t}, bound {hi}")));
            }
            theta0_used = Some(th);
            (k, lambda, lm)
        }
        Strategy::LogLogRefined { delta, theta0 } => {
            let k = r / (3.0 * (d + 2.0));
            if k < 1.0 {
                return Err(validity(format!("K = R/θ >= 1 violated: K={k}")));
            }
            let hi = theta0 * r * r / log_phi_finite(kernel, r)?;
            if t > hi {
                return Err(validity(format!("t <= θ0 R²/log Φ(R) violated: t={t}, bound {hi}")));
            }
            let big_phi = kernel.capital_phi(k)?.value();
            let l = (std::f64::consts::E + big_phi).ln().ln().powf(delta);
            let lambda = (k * k * l / t).ln() / (3.0 * k);
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(validity(format!("λ > 0 violated: λ={lambda}")));
            }
            theta0_used = Some(theta0);
            (k, lambda, log_gamma_majorant(kernel, lambda, k)?)
        }
    };
    let e_value = 2.0 * t * log_maj.exp() - lambda * r;
    let log_prefactor = c.ln() - 0.5 * d * t.ln();
    let log_bound = log_prefactor + e_value;
    let meyer_term = meyer_combine(0.0, t, k, kernel)?;
    Ok(DaviesBound {
        strategy,
        t,
        r,
        k,
        lambda,
        log_majorant: log_maj,
        e_value,
        log_prefactor,
        log_bound,
        meyer_term,
        bound_value: log_bound.exp() + meyer_term,
        eta,
        theta0: theta0_used,
    })
}

/// Best bound among applicable strategies, and the zero-tilt bound `c t^{-d/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub t: f64,
    pub r: f64,
    pub value: f64,
    /// Strategy name, or `zero_tilt`.
    pub source: &'static str,
    pub candidates: Vec<DaviesBound>,
}

pub fn envelope(kernel: &JumpKernel, t: f64, r: f64, strategies: &[Strategy], c: f64) -> Result<Envelope> {
    let mut out =
        Envelope { t, r, value: c * t.powf(-0.5 * kernel.dim as f64), source: "zero_tilt", candidates: Vec::new() };
    for &s in strategies {
        match davies_bound(kernel, t, r, s, c) {
            Ok(b) => {
                if b.bound_value < out.value {
                    out.value = b.bound_value;
                    out.source = s.name();
                }
                out.candidates.push(b);
            }
            Err(Error::Validity(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// One randomized comparison of [`gamma_majorant`] with [`gamma_exact_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceCase {
    pub lambda: f64,
    pub k: f64,
    pub r: f64,
    pub x: f64,
    pub exact: f64,
    pub majorant: f64,
    /// `(majorant - exact) / majorant`.
    pub relative_slack: f64,
}

/// `n` cases with `λ ∈ [0.01, 2]`, `K ∈ [0.5, 8]`, `R ∈ [1, 10]` and `x` uniform in `B(0, R + K)`.
pub fn dominance_cases(kernel: &JumpKernel, n: usize, seed: u64) -> Result<Vec<DominanceCase>> {
    use rand::Rng;
    let mut rng = crate::rng::path_rng(seed, u64::MAX);
    (0..n)
        .map(|_| {
            let lambda = rng.random_range(0.01..=2.0);
            let k = rng.random_range(0.5..=8.0);
            let r = rng.random_range(1.0..=10.0);
            let x = rng.random_range(-(r + k)..=(r + k));
            let tf = TestFunction::new(lambda, r, 1)?;
            let exact = gamma_exact_point(kernel, &tf, &[x], k)?;
            let majorant = gamma_majorant(kernel, lambda, k)?;
            Ok(DominanceCase { lambda, k, r, x, exact, majorant, relative_slack: (majorant - exact) / majorant })
        })
        .collect()
}
