use serde::Serialize;

use super::bounds::far_shape_general;
use super::{classify_regime, BoundConstants, DensityEstimate, PointDensity, Regime, DEFAULT_T0};
use crate::error::{Error, Result};
use crate::kernel::{JumpKernel, TailProfile};
use crate::stats::{intercept_with_slope, linear_fit, LinearFit};

/// Candidate far-boundary constants, tried from the largest down.
pub const THETA0_CANDIDATES: [f64; 4] = [0.5, 0.2, 0.1, 0.05];
/// Shells with fewer samples are left out of every fit.
pub const MIN_SHELL_COUNT: u64 = 50;
const MIN_ON_DIAGONAL_TIMES: usize = 3;
const MIN_GAUSSIAN_POINTS: usize = 10;
const MIN_R_SQUARED: f64 = 0.9;
/// Conditional far-tail points with relative error above this are ignored.
const MAX_FAR_REL_ERR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaTrial {
    pub theta0: f64,
    pub n_points: usize,
    pub r_squared: f64,
    pub c2: f64,
}

/// Fitted constants and the fits behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// `exp` of the intercept of `log p̂(t,0,0) + (d/2) log t`.
    pub c1: f64,
    /// Free-slope fit of `log p̂(t,0,0)` against `log t`.
    pub on_diagonal: LinearFit,
    /// `log p̂ + (d/2) log t` against `r²/t` on Gaussian-regime shells at the chosen `θ₀`.
    pub gaussian: LinearFit,
    pub c2: f64,
    pub theta0: f64,
    /// Whether the chosen `θ₀` met the `R² >= 0.9` rule or is only the best available.
    pub theta0_meets_r_squared: bool,
    pub theta0_trials: Vec<ThetaTrial>,
    pub t_values: Vec<f64>,
    pub constants: BoundConstants,
}

fn gaussian_points(est: &[DensityEstimate], kernel: &JumpKernel, theta0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let half_d = 0.5 * kernel.dim as f64;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for e in est {
        for i in 0..e.n_shells() {
            if e.counts[i] < MIN_SHELL_COUNT {
                continue;
            }
            let r = e.r_mid(i);
            if classify_regime(e.t, r, kernel, theta0)? == Regime::Gaussian {
                x.push(r * r / e.t);
                y.push(e.p_hat[i].ln() + half_d * e.t.ln());
            }
        }
    }
    Ok((x, y))
}

fn far_shape(kernel: &JumpKernel, t: f64, r: f64) -> f64 {
    match kernel.profile {
        TailProfile::PowerLaw { eps } => t * r.powf(-(kernel.dim as f64 + 2.0 + eps)),
        _ => far_shape_general(kernel, t, r, 1.0),
    }
}

/// Extremes of `p̂ / shape`; the upper shape is evaluated at the inner shell edge, the lower at the outer.
#[derive(Default)]
struct Extremes {
    upper: Option<f64>,
    lower: Option<f64>,
}

impl Extremes {
    fn push(&mut self, hi_ratio: f64, lo_ratio: f64) {
        if hi_ratio.is_finite() {
            self.upper = Some(self.upper.map_or(hi_ratio, |u| u.max(hi_ratio)));
        }
        if lo_ratio.is_finite() {
            self.lower = Some(self.lower.map_or(lo_ratio, |l| l.min(lo_ratio)));
        }
    }
}

/// Fits `c₁`, `c₂`, `θ₀` and envelope constants for the bound curves.
///
/// `far_points` are optional conditional estimates deep in the far regime; they set the far
/// constants where shell counts are too sparse to.
pub fn fit_constants(est: &[DensityEstimate], far_points: &[PointDensity], kernel: &JumpKernel) -> Result<FitReport> {
    let d = kernel.dim as f64;
    let mut t_values: Vec<f64> = est.iter().map(|e| e.t).collect();
    t_values.sort_by(f64::total_cmp);
    t_values.dedup();

    let (lt, lp): (Vec<f64>, Vec<f64>) =
        est.iter().filter(|e| e.on_diagonal > 0.0).map(|e| (e.t.ln(), e.on_diagonal.ln())).unzip();
    let mut distinct = lt.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_ON_DIAGONAL_TIMES {
        return Err(Error::Insufficient(format!(
            "on_diagonal regime: need estimates at >= {MIN_ON_DIAGONAL_TIMES} values of t, got {}",
            distinct.len()
        )));
    }
    let on_diagonal = linear_fit(&lt, &lp)?;
    let c1 = intercept_with_slope(&lt, &lp, -0.5 * d).exp();

    let mut trials = Vec::new();
    let mut fits = Vec::new();
    for &theta0 in &THETA0_CANDIDATES {
        let (x, y) = gaussian_points(est, kernel, theta0)?;
        if x.len() < MIN_GAUSSIAN_POINTS {
            continue;
        }
        let f = linear_fit(&x, &y)?;
        trials.push(ThetaTrial { theta0, n_points: x.len(), r_squared: f.r_squared, c2: -f.slope });
        fits.push(f);
    }
    if fits.is_empty() {
        return Err(Error::Insufficient(format!(
            "gaussian regime: need >= {MIN_GAUSSIAN_POINTS} shells with >= {MIN_SHELL_COUNT} counts for some theta0"
        )));
    }
    let (k, meets) = match trials.iter().position(|tr| tr.r_squared >= MIN_R_SQUARED) {
        Some(k) => (k, true),
        None => {
            let best = (0..trials.len()).max_by(|&a, &b| trials[a].r_squared.total_cmp(&trials[b].r_squared));
            (best.unwrap(), false)
        }
    };
    let theta0 = trials[k].theta0;
    let gaussian = fits[k];
    let c2 = -gaussian.slope;
    if !(c2 > 0.0) {
        return Err(Error::Insufficient(format!("gaussian regime: fitted exponent {c2} is not positive")));
    }

    let (mut diag, mut gauss, mut far) = (Extremes::default(), Extremes::default(), Extremes::default());
    for e in est {
        let base = e.t.powf(-0.5 * d);
        if e.on_diagonal > 0.0 {
            diag.push(e.on_diagonal / base, e.on_diagonal / base);
        }
        for i in 0..e.n_shells() {
            if e.counts[i] < MIN_SHELL_COUNT {
                continue;
            }
            let (lo, hi, p) = (e.r_lo(i), e.r_hi(i), e.p_hat[i]);
            match classify_regime(e.t, e.r_mid(i), kernel, theta0)? {
                Regime::OnDiagonal => diag.push(p / base, p / base),
                Regime::Gaussian => {
                    gauss.push(p / (base * (-c2 * lo * lo / e.t).exp()), p / (base * (-c2 * hi * hi / e.t).exp()))
                }
                Regime::Far => far.push(p / far_shape(kernel, e.t, lo.max(1.0)), p / far_shape(kernel, e.t, hi)),
            }
        }
    }
    for q in far_points {
        if q.value > 0.0 && q.stderr <= MAX_FAR_REL_ERR * q.value {
            let ratio = q.value / far_shape(kernel, q.t, q.r);
            far.push(ratio, ratio);
        }
    }
    let need = |x: Option<f64>, what: &str| {
        x.ok_or_else(|| Error::Insufficient(format!("{what} regime: no shell with >= {MIN_SHELL_COUNT} counts")))
    };
    let constants = BoundConstants {
        c1_upper: need(diag.upper, "on_diagonal")?,
        c1_lower: need(diag.lower, "on_diagonal")?,
        gauss_upper: need(gauss.upper, "gaussian")?,
        gauss_lower: need(gauss.lower, "gaussian")?,
        c2_upper: c2,
        c2_lower: c2,
        far_upper: far.upper,
        far_lower: match kernel.profile {
            TailProfile::PowerLaw { .. } => far.lower,
            _ => None,
        },
        theta0,
        t0: DEFAULT_T0,
        kappa: 1.0,
    };
    Ok(FitReport {
        c1,
        on_diagonal,
        gaussian,
        c2,
        theta0,
        theta0_meets_r_squared: meets,
        theta0_trials: trials,
        t_values,
        constants,
    })
}
