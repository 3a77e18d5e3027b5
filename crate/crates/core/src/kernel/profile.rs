use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, REL_TOL};

/// Damping function `φ` applied to the `r^{-(d+2)}` tail of a jump kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailProfile {
    /// `φ(r) = r^ε`
    PowerLaw { eps: f64 },
    /// `φ(r) = log^{1+ε}(e + r)`
    PolyLog { eps: f64 },
    /// `φ(r) = log(e + r) · log^{1+θ} log(e^e + r)`
    LogIterated { theta: f64 },
    /// `φ(r) = exp(c r^β)`
    Exponential { c: f64, beta: f64 },
    /// `φ ≡ 1`: infinite second moment.
    Constant,
    /// `φ = 1` on `[1, r_max]` and `+∞` beyond (no jumps longer than `r_max`).
    Truncated { r_max: f64 },
}

/// Value of `Φ(s) = (∫_s^∞ dr / (r φ(r)))^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapitalPhi {
    /// Finite or `+∞` (the latter when `φ = ∞` on all of `[s, ∞)`).
    Value(f64),
    /// The defining integral diverges, so `Φ(s) = 0`.
    Divergent,
}

impl CapitalPhi {
    pub fn value(self) -> f64 {
        match self {
            CapitalPhi::Value(v) => v,
            CapitalPhi::Divergent => 0.0,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, CapitalPhi::Divergent)
    }
}

/// `ln(e^a + e^b)` without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl TailProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("tail profile: {what}")));
        match *self {
            TailProfile::PowerLaw { eps } | TailProfile::PolyLog { eps } if !(eps > 0.0) => bad("eps must be positive"),
            TailProfile::LogIterated { theta } if !(theta > 0.0) => bad("theta must be positive"),
            TailProfile::Exponential { c, beta } if !(c > 0.0) || !(beta > 0.0 && beta <= 1.0) => {
                bad("exponential needs c > 0 and beta in (0, 1]")
            }
            TailProfile::Truncated { r_max } if !(r_max > 1.0) => bad("truncation radius must exceed 1"),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TailProfile::PowerLaw { .. } => "power",
            TailProfile::PolyLog { .. } => "polylog",
            TailProfile::LogIterated { .. } => "logiterated",
            TailProfile::Exponential { .. } => "exponential",
            TailProfile::Constant => "constant",
            TailProfile::Truncated { .. } => "truncated",
        }
    }

    /// `φ(r)` for `r >= 1`; `+∞` past a truncation radius.
    pub fn phi(&self, r: f64) -> f64 {
        match *self {
            TailProfile::PowerLaw { eps } => r.powf(eps),
            TailProfile::PolyLog { eps } => (std::f64::consts::E + r).ln().powf(1.0 + eps),
            TailProfile::LogIterated { theta } => {
                let e = std::f64::consts::E;
                (e + r).ln() * (e.exp() + r).ln().ln().powf(1.0 + theta)
            }
            TailProfile::Exponential { c, beta } => (c * r.powf(beta)).exp(),
            TailProfile::Constant => 1.0,
            TailProfile::Truncated { r_max } => {
                if r <= r_max {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `1 / φ(e^v)`, evaluated without forming `e^v` where that would overflow.
    pub fn inv_phi_ln(&self, v: f64) -> f64 {
        let e = std::f64::consts::E;
        match *self {
            TailProfile::PowerLaw { eps } => (-eps * v).exp(),
            TailProfile::PolyLog { eps } => log_add_exp(1.0, v).powf(-(1.0 + eps)),
            TailProfile::LogIterated { theta } => {
                let l1 = log_add_exp(1.0, v);
                let l2 = log_add_exp(e, v).ln();
                1.0 / (l1 * l2.powf(1.0 + theta))
            }
            TailProfile::Exponential { c, beta } => (-c * (beta * v).exp()).exp(),
            TailProfile::Constant => 1.0,
            TailProfile::Truncated { r_max } => {
                if v <= r_max.ln() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Upper end of the support of the tail, if finite.
    pub fn support_end(&self) -> Option<f64> {
        match *self {
            TailProfile::Truncated { r_max } => Some(r_max),
            _ => None,
        }
    }

    /// `∫_s^∞ dr / (r φ(r))`, the reciprocal of `Φ(s)`; `+∞` for the constant profile.
    pub fn reciprocal_phi_integral(&self, s: f64) -> Result<f64> {
        if !(s >= 1.0) {
            return Err(Error::Domain(format!("Φ is defined for s >= 1, got {s}")));
        }
        let v0 = s.ln();
        match *self {
            TailProfile::Constant => Ok(f64::INFINITY),
            TailProfile::Truncated { r_max } => Ok((r_max.ln() - v0).max(0.0)),
            TailProfile::LogIterated { theta } => {
                // 1/φ(e^v) decays like 1/(v log^{1+θ} v): substitute v = e^w past v = 1.
                let v1 = v0.max(1.0);
                let head = if v1 > v0 { quad::integrate(|v| self.inv_phi_ln(v), v0, v1, REL_TOL)?.value } else { 0.0 };
                let e = std::f64::consts::E;
                let tail = quad::integrate_to_inf(
                    |w: f64| {
                        if w > 40.0 {
                            // log(e + e^v) = v and log(e^e + e^v) = v to working precision.
                            w.powf(-(1.0 + theta))
                        } else {
                            let v = w.exp();
                            let l1 = log_add_exp(1.0, v);
                            let l2 = log_add_exp(e, v).ln();
                            v / (l1 * l2.powf(1.0 + theta))
                        }
                    },
                    v1.ln(),
                    REL_TOL,
                )?
                .value;
                Ok(head + tail)
            }
            _ => Ok(quad::integrate_to_inf(|v| self.inv_phi_ln(v), v0, REL_TOL)?.value),
        }
    }

    /// `Φ(s)`, closed form where one exists.
    pub fn capital_phi(&self, s: f64) -> Result<CapitalPhi> {
        if !(s >= 1.0) {
            return Err(Error::Domain(format!("Φ is defined for s >= 1, got {s}")));
        }
        match *self {
            TailProfile::PowerLaw { eps } => Ok(CapitalPhi::Value(eps * s.powf(eps))),
            TailProfile::Truncated { r_max } if s >= r_max => Ok(CapitalPhi::Value(f64::INFINITY)),
            TailProfile::Truncated { r_max } => Ok(CapitalPhi::Value(1.0 / (r_max / s).ln())),
            _ => self.capital_phi_quadrature(s),
        }
    }

    /// `Φ(s)` always through the defining integral.
    pub fn capital_phi_quadrature(&self, s: f64) -> Result<CapitalPhi> {
        let integral = self.reciprocal_phi_integral(s)?;
        if integral.is_infinite() {
            Ok(CapitalPhi::Divergent)
        } else if integral == 0.0 {
            Ok(CapitalPhi::Value(f64::INFINITY))
        } else {
            Ok(CapitalPhi::Value(1.0 / integral))
        }
    }

    /// `∫_a^∞ r^{-k} / φ(r) dr` for `a >= 1`, `k > 1`.
    pub fn weighted_tail_integral(&self, a: f64, k: f64) -> Result<f64> {
        if !(a >= 1.0) {
            return Err(Error::Domain(format!("tail integral needs a >= 1, got {a}")));
        }
        let v0 = a.ln();
        let f = |v: f64| ((1.0 - k) * v).exp() * self.inv_phi_ln(v);
        match *self {
            TailProfile::Truncated { r_max } => {
                if a >= r_max {
                    Ok(0.0)
                } else {
                    Ok((a.powf(1.0 - k) - r_max.powf(1.0 - k)) / (k - 1.0))
                }
            }
            TailProfile::Constant => Ok(a.powf(1.0 - k) / (k - 1.0)),
            TailProfile::PowerLaw { eps } => Ok(a.powf(1.0 - k - eps) / (k - 1.0 + eps)),
            _ => Ok(quad::integrate_to_inf(f, v0, REL_TOL)?.value),
        }
    }

    /// `∫_a^∞ r^{-k} / φ(r) dr` always by quadrature (test oracle path for closed forms).
    pub fn weighted_tail_integral_quadrature(&self, a: f64, k: f64) -> Result<f64> {
        let v0 = a.ln();
        let f = |v: f64| ((1.0 - k) * v).exp() * self.inv_phi_ln(v);
        match self.support_end() {
            Some(r_max) if a >= r_max => Ok(0.0),
            Some(r_max) => Ok(quad::integrate(f, v0, r_max.ln(), REL_TOL)?.value),
            None => Ok(quad::integrate_to_inf(f, v0, REL_TOL)?.value),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_phi_ln_matches_direct() {
        let profiles = [
            TailProfile::PowerLaw { eps: 1.3 },
            TailProfile::PolyLog { eps: 0.5 },
            TailProfile::LogIterated { theta: 1.0 },
            TailProfile::Exponential { c: 1.0, beta: 0.5 },
            TailProfile::Constant,
            TailProfile::Truncated { r_max: 10.0 },
        ];
        for p in profiles {
            for &r in &[1.0, 1.5, 3.0, 9.0, 11.0, 100.0, 1e5] {
                let a = 1.0 / p.phi(r);
                let b = p.inv_phi_ln(f64::ln(r));
                assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{p:?} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn power_law_closed_form() {
        let p = TailProfile::PowerLaw { eps: 1.0 };
        assert_eq!(p.capital_phi(3.0).unwrap(), CapitalPhi::Value(3.0));
    }

    #[test]
    fn constant_diverges() {
        assert!(TailProfile::Constant.capital_phi(5.0).unwrap().is_divergent());
        assert_eq!(TailProfile::Constant.capital_phi(5.0).unwrap().value(), 0.0);
    }

    #[test]
    fn truncated_phi_infinite_past_cutoff() {
        let p = TailProfile::Truncated { r_max: 10.0 };
        assert_eq!(p.capital_phi(12.0).unwrap(), CapitalPhi::Value(f64::INFINITY));
        let q = p.capital_phi_quadrature(2.0).unwrap().value();
        assert!((q - 1.0 / 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(TailProfile::PowerLaw { eps: 1.0 }.capital_phi(0.5).is_err());
        assert!(TailProfile::PolyLog { eps: 0.0 }.validate().is_err());
        assert!(TailProfile::Exponential { c: 1.0, beta: 1.5 }.validate().is_err());
    }

    #[test]
    fn weighted_tail_closed_forms_match_quadrature() {
        let profiles = [
            TailProfile::PowerLaw { eps: 1.0 },
            TailProfile::PowerLaw { eps: 0.5 },
            TailProfile::Constant,
            TailProfile::Truncated { r_max: 10.0 },
        ];
        for p in profiles {
            for &a in &[1.0, 2.0, 7.5] {
                let x = p.weighted_tail_integral(a, 3.0).unwrap();
                let y = p.weighted_tail_integral_quadrature(a, 3.0).unwrap();
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300), "{p:?} a={a}: {x} vs {y}");
            }
        }
    }
}
