//! Distributional checks of the path sampler against independent references.

use jumplab::heatkernel::{conditional_density, estimate_radial_density, shell_edges};
use jumplab::stats::{correlation, ks_statistic, mean, std_error};
use jumplab::{Exec, JumpKernel, Sampler, SamplerConfig, TailProfile};

/// Two-sample KS critical value at level 0.001 for sample sizes `n` and `m`.
fn ks_critical(n: usize, m: usize) -> f64 {
    1.95 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

fn reference(times: Vec<f64>, n: usize, seed: u64, delta: f64) -> Sampler {
    Sampler::new(JumpKernel::reference(), SamplerConfig::new(times, n, seed).with_delta(delta)).unwrap()
}

#[test]
fn mean_square_grows_like_second_moment() {
    // σ² = 2κ/(2-α) + 2 c_J/ε = 4/3 + 2.
    let sigma2 = 10.0 / 3.0;
    let e = reference(vec![256.0], 20_000, 5, 0.5).ensemble(Exec::default());
    let sq: Vec<f64> = e.radii(0).iter().map(|r| r * r / 256.0).collect();
    assert!((mean(&sq) - sigma2).abs() / sigma2 < 0.08, "mean |X|²/t = {}", mean(&sq));
}

#[test]
fn law_is_symmetric() {
    let e = reference(vec![128.0], 20_000, 6, 0.5).ensemble(Exec::default());
    let x = e.coordinate(0, 0);
    assert!(mean(&x).abs() < 4.0 * std_error(&x));
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    assert!(ks_statistic(&x, &neg) < ks_critical(x.len(), x.len()));
}

#[test]
fn law_does_not_depend_on_the_cutoff() {
    let a = reference(vec![256.0], 8000, 7, 0.3).ensemble(Exec::default()).coordinate(0, 0);
    let b = reference(vec![256.0], 8000, 8, 0.9).ensemble(Exec::default()).coordinate(0, 0);
    let d = ks_statistic(&a, &b);
    assert!(d < ks_critical(a.len(), b.len()), "KS = {d}");
}

#[test]
fn increments_are_uncorrelated() {
    let e = reference(vec![64.0, 256.0], 20_000, 9, 0.5).ensemble(Exec::default());
    let x0 = e.coordinate(0, 0);
    let x1 = e.coordinate(1, 0);
    let inc: Vec<f64> = x1.iter().zip(&x0).map(|(a, b)| a - b).collect();
    let abs0: Vec<f64> = x0.iter().map(|v| v.abs()).collect();
    let abs_inc: Vec<f64> = inc.iter().map(|v| v.abs()).collect();
    let bound = 4.0 / (x0.len() as f64).sqrt();
    assert!(correlation(&x0, &inc).abs() < bound);
    assert!(correlation(&abs0, &abs_inc).abs() < bound);
}

#[test]
fn brownian_control_matches_normal_law() {
    use statrs::distribution::{ContinuousCDF, Normal};
    // No tail and κ = (2-α)/2 makes the sub-unit part a unit-variance Brownian motion.
    let k = JumpKernel::new(1, 0.5, 0.75, 0.0, TailProfile::PowerLaw { eps: 1.0 }).unwrap();
    let s = Sampler::new(k, SamplerConfig::new(vec![100.0], 10_000, 3).with_delta(1.0)).unwrap();
    let mut x = s.ensemble(Exec::default()).coordinate(0, 0);
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let normal = Normal::new(0.0, 10.0).unwrap();
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal.cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // One-sample critical value at level 0.001.
    assert!(d < 1.95 / n.sqrt(), "KS = {d}");
}

#[test]
fn parallel_and_sequential_ensembles_are_identical() {
    let s = reference(vec![16.0, 64.0], 3000, 11, 0.5);
    let a = s.ensemble_with_anchors(Exec::Sequential).unwrap();
    let b = s.ensemble_with_anchors(Exec::Parallel).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.anchors, b.anchors);
}

#[test]
fn conditional_estimator_agrees_with_shell_counts() {
    let t = 256.0;
    let s = reference(vec![t], 40_000, 12, 0.5);
    let e = s.ensemble_with_anchors(Exec::default()).unwrap();
    let pos = e.coordinate(0, 0);
    let edges = shell_edges(t, 2000.0, 1.1);
    let est = estimate_radial_density(&pos, 1, t, &edges, 0.25).unwrap();
    for r in [20.0, 45.0, 90.0] {
        let i = (0..est.n_shells()).find(|&i| est.r_lo(i) <= r && r < est.r_hi(i)).unwrap();
        let cd = conditional_density(&s, &e, 0, &[est.r_mid(i)]).unwrap()[0];
        let tol = 0.1 * cd.value + 4.0 * (est.stderr[i].powi(2) + cd.stderr.powi(2)).sqrt();
        assert!((cd.value - est.p_hat[i]).abs() < tol, "r={r}: conditional {} vs shell {}", cd.value, est.p_hat[i]);
    }
}
