//! Sphere and ball measures in `R^d`.

use statrs::function::gamma::gamma;

/// Surface measure of the unit sphere `S^{d-1}`, `2 π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Volume of the radius-`r` ball in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let h = d as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0) * r.powi(d as i32)
}

/// Volume of the shell `r_lo <= |x| < r_hi`.
pub fn shell_volume(d: usize, r_lo: f64, r_hi: f64) -> f64 {
    ball_volume(d, r_hi) - ball_volume(d, r_lo)
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn low_dimensions() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((ball_volume(1, 3.0) - 6.0).abs() < 1e-13);
        assert!((ball_volume(3, 1.0) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn sphere_is_ball_derivative() {
        for d in 1..6 {
            let h = 1e-6;
            let deriv = (ball_volume(d, 1.0 + h) - ball_volume(d, 1.0 - h)) / (2.0 * h);
            assert!((deriv - unit_sphere_area(d)).abs() < 1e-6);
        }
    }
}
