use jumplab::heatkernel::{
    classify_regime, conditional_density, estimate_radial_density, far_boundary, fit_constants, regime_lower,
    regime_upper, shell_edges, BoundConstants, DensityEstimate, FitReport, PointDensity, Regime, MIN_SHELL_COUNT,
};
use jumplab::io::{csv_string, Cell};
use jumplab::JumpKernel;
use serde::{Deserialize, Serialize};

use super::{slice_at, Check, Ctx, StageSummary};
use crate::error::CliError;
use crate::plot::{emit_plot, Panel, Scale, Series, Span, Style};

/// Conditional far points with a larger relative error are not compared with the bounds.
const MAX_FAR_REL_ERR: f64 = 0.5;
/// Lower edge of the accepted total mass.
const MIN_MASS: f64 = 0.97;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeRow {
    pub t: f64,
    pub on_diagonal: f64,
    pub on_diagonal_stderr: f64,
    pub mass: f64,
    pub mass_stderr: f64,
    pub n_shells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coverage {
    pub upper_hits: usize,
    pub upper_total: usize,
    pub lower_hits: usize,
    pub lower_total: usize,
    /// Times the coverage is measured on.
    pub times: Vec<f64>,
    /// Whether those times were left out of the fit.
    pub held_out: bool,
}

impl Coverage {
    pub fn upper(&self) -> f64 {
        ratio(self.upper_hits, self.upper_total)
    }

    pub fn lower(&self) -> f64 {
        ratio(self.lower_hits, self.lower_total)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

/// What `bounds` and `report` read back from `density.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityData {
    pub times: Vec<TimeRow>,
    pub fit_times: Vec<f64>,
    pub constants: BoundConstants,
    pub c1: f64,
    pub c2: f64,
    pub theta0: f64,
    pub theta0_meets_r_squared: bool,
    pub on_diagonal_slope: f64,
    pub on_diagonal_slope_stderr: f64,
    pub gaussian_r_squared: f64,
    /// Prefactor `c` of `c t^{-d/2}` for the Davies bounds: the largest `(p̂(t,0,0) + 2 se) t^{d/2}`.
    pub davies_prefactor: f64,
    pub far_points: usize,
    pub coverage: Coverage,
    #[serde(skip_deserializing)]
    pub fit: Option<FitReport>,
}

fn sorted_union(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn regime_at(kernel: &JumpKernel, t: f64, r: f64, c: &BoundConstants) -> Result<Regime, CliError> {
    Ok(classify_regime(t, r, kernel, c.theta0)?)
}

fn lower_or_none(kernel: &JumpKernel, regime: Regime, t: f64, r: f64, c: &BoundConstants) -> Option<f64> {
    regime_lower(kernel, regime, t, r, c).ok()
}

/// Smallest `r > √t` on a fine log grid where `(t, r)` is in the far regime.
fn far_onset(kernel: &JumpKernel, t: f64, r_top: f64, theta0: f64) -> Option<f64> {
    let lo = t.sqrt();
    if r_top <= lo {
        return None;
    }
    super::log_grid(lo, r_top, 400).into_iter().find(|&r| t < far_boundary(kernel, r, theta0))
}

pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let kernel = ctx.kernel()?;
    let ens = ctx.load_ensemble()?;
    let dc = &ctx.cfg.density;
    let times = dc.t.clone().unwrap_or_else(|| ens.times.clone());
    let fit_times = dc.fit_t.clone().unwrap_or_else(|| times.clone());
    let all = sorted_union(&times, &fit_times);
    let d = kernel.dim as f64;

    let mut est: Vec<DensityEstimate> = Vec::with_capacity(all.len());
    for &t in &all {
        let i = ens.time_index(t).ok_or_else(|| CliError::Config(format!("density time {t} was not sampled")))?;
        let pos = slice_at(&ens, i);
        let r_max = ens.radii(i).into_iter().fold(0.0, f64::max);
        let edges = shell_edges(t, r_max.max(2.0 * t.sqrt()), dc.shell_ratio);
        est.push(estimate_radial_density(&pos, ens.dim, t, &edges, dc.h_rel)?);
    }

    let mut far: Vec<PointDensity> = Vec::new();
    if ens.anchors.is_some() && !dc.far_radii.is_empty() {
        let sampler = ctx.sampler()?;
        for &t in &all {
            let i = ens.time_index(t).expect("checked above");
            far.extend(conditional_density(&sampler, &ens, i, &dc.far_radii)?);
        }
    }

    let fit_est: Vec<DensityEstimate> = est.iter().filter(|e| fit_times.contains(&e.t)).cloned().collect();
    let fit_far: Vec<PointDensity> = far.iter().filter(|p| fit_times.contains(&p.t)).copied().collect();
    let fit = fit_constants(&fit_est, &fit_far, &kernel)?;
    let mut c = fit.constants;
    c.t0 = dc.t0;

    let davies_prefactor = est
        .iter()
        .filter(|e| e.t >= dc.t0)
        .map(|e| (e.on_diagonal + 2.0 * e.on_diagonal_stderr) * e.t.powf(0.5 * d))
        .fold(f64::NAN, f64::max);

    // Coverage is measured on held-out times when there are any.
    let eligible: Vec<f64> = times.iter().copied().filter(|&t| t >= dc.t0).collect();
    let held: Vec<f64> = eligible.iter().copied().filter(|t| !fit_times.contains(t)).collect();
    let held_out = !held.is_empty();
    let cover_times = if held_out { held } else { eligible };
    let mut cov =
        Coverage { upper_hits: 0, upper_total: 0, lower_hits: 0, lower_total: 0, times: cover_times.clone(), held_out };

    let mut rows = Vec::new();
    let mut panels = Vec::new();
    let mut time_rows = Vec::new();
    for e in est.iter().filter(|e| times.contains(&e.t)) {
        let t = e.t;
        let covered = cover_times.contains(&t);
        let (mut pts, mut up, mut lo) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..e.n_shells() {
            let (a, b) = (e.r_lo(i), e.r_hi(i));
            let regime = regime_at(&kernel, t, e.r_mid(i), &c)?;
            let upper = regime_upper(&kernel, regime, t, a, &c);
            let lower = lower_or_none(&kernel, regime, t, b, &c);
            if covered && e.counts[i] >= MIN_SHELL_COUNT {
                cov.upper_total += 1;
                cov.upper_hits += usize::from(e.p_hat[i] <= upper);
                if let Some(l) = lower {
                    cov.lower_total += 1;
                    cov.lower_hits += usize::from(e.p_hat[i] >= l);
                }
            }
            if e.counts[i] > 0 {
                pts.push((e.r_mid(i), e.p_hat[i]));
            }
            up.push((e.r_mid(i), upper));
            if let Some(l) = lower {
                lo.push((e.r_mid(i), l));
            }
            rows.push(vec![
                Cell::F(t),
                Cell::F(a),
                Cell::F(b),
                Cell::U(e.counts[i]),
                Cell::F(e.p_hat[i]),
                Cell::F(e.stderr[i]),
                Cell::S(regime.name().into()),
                Cell::F(upper),
                lower.map_or(Cell::S(String::new()), Cell::F),
            ]);
        }
        let far_pts: Vec<(f64, f64)> =
            far.iter().filter(|p| p.t == t && p.value > 0.0).map(|p| (p.r, p.value)).collect();
        let r_top = e.shell_edges.last().copied().unwrap_or(1.0).max(far.iter().map(|p| p.r).fold(0.0, f64::max));
        let root_t = t.sqrt();
        let onset = far_onset(&kernel, t, r_top, c.theta0);
        let mut spans = vec![Span { x0: 0.0, x1: root_t, label: "on_diagonal".into() }];
        spans.push(Span { x0: root_t, x1: onset.unwrap_or(r_top), label: "gaussian".into() });
        if let Some(o) = onset {
            spans.push(Span { x0: o, x1: r_top, label: "far".into() });
        }
        let mut series = vec![
            Series { label: "shell estimate".into(), points: pts, style: Style::Markers },
            Series { label: "upper".into(), points: up, style: Style::Line },
            Series { label: "lower".into(), points: lo, style: Style::Dashed },
        ];
        if !far_pts.is_empty() {
            series.push(Series { label: "conditional".into(), points: far_pts, style: Style::Markers });
        }
        panels.push(Panel {
            title: format!("p(t, 0, r) at t = {t}"),
            x_label: "r".into(),
            y_label: "density".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series,
            spans,
        });
        time_rows.push(TimeRow {
            t,
            on_diagonal: e.on_diagonal,
            on_diagonal_stderr: e.on_diagonal_stderr,
            mass: e.total_mass(),
            mass_stderr: e.total_mass_stderr(),
            n_shells: e.n_shells(),
        });
    }

    let mut far_rows = Vec::new();
    for p in far.iter().filter(|p| times.contains(&p.t)) {
        let regime = regime_at(&kernel, p.t, p.r, &c)?;
        let upper = regime_upper(&kernel, regime, p.t, p.r, &c);
        let lower = lower_or_none(&kernel, regime, p.t, p.r, &c);
        if cover_times.contains(&p.t) && p.value > 0.0 && p.stderr <= MAX_FAR_REL_ERR * p.value {
            cov.upper_total += 1;
            cov.upper_hits += usize::from(p.value <= upper);
            if let Some(l) = lower {
                cov.lower_total += 1;
                cov.lower_hits += usize::from(p.value >= l);
            }
        }
        far_rows.push(vec![
            Cell::F(p.t),
            Cell::F(p.r),
            Cell::F(p.value),
            Cell::F(p.stderr),
            Cell::S(regime.name().into()),
            Cell::F(upper),
            lower.map_or(Cell::S(String::new()), Cell::F),
        ]);
    }

    ctx.write(
        "density.csv",
        &csv_string(&ctx.digest, &["t", "r_lo", "r_hi", "count", "p_hat", "stderr", "regime", "upper", "lower"], &rows),
    )?;
    if !far_rows.is_empty() {
        ctx.write(
            "far.csv",
            &csv_string(&ctx.digest, &["t", "r", "p_hat", "stderr", "regime", "upper", "lower"], &far_rows),
        )?;
    }
    emit_plot(&panels, &ctx.path("density.svg"))?;

    let mut checks = Vec::new();
    for row in &time_rows {
        let hi = 1.0 + 3.0 * row.mass_stderr + 1e-9;
        checks.push(Check::new(
            format!("mass_t{}", row.t),
            row.mass >= MIN_MASS && row.mass <= hi,
            row.mass,
            format!("in [{MIN_MASS}, {hi:.6}]"),
        ));
    }
    let slope_err = (fit.on_diagonal.slope + 0.5 * d).abs();
    checks.push(Check::new(
        "on_diagonal_slope",
        slope_err <= dc.slope_tol,
        fit.on_diagonal.slope,
        format!("{} +- {}", -0.5 * d, dc.slope_tol),
    ));
    checks.push(Check::new(
        "gaussian_r_squared",
        fit.gaussian.r_squared >= dc.min_r_squared,
        fit.gaussian.r_squared,
        format!(">= {}", dc.min_r_squared),
    ));
    checks.push(Check::new("upper_coverage", cov.upper() >= dc.coverage, cov.upper(), format!(">= {}", dc.coverage)));
    if cov.lower_total > 0 {
        checks.push(Check::new(
            "lower_coverage",
            cov.lower() >= dc.coverage,
            cov.lower(),
            format!(">= {}", dc.coverage),
        ));
    }

    let data = DensityData {
        times: time_rows,
        fit_times,
        constants: c,
        c1: fit.c1,
        c2: fit.c2,
        theta0: fit.theta0,
        theta0_meets_r_squared: fit.theta0_meets_r_squared,
        on_diagonal_slope: fit.on_diagonal.slope,
        on_diagonal_slope_stderr: fit.on_diagonal.slope_stderr,
        gaussian_r_squared: fit.gaussian.r_squared,
        davies_prefactor,
        far_points: far.len(),
        coverage: cov,
        fit: Some(fit),
    };
    let summary = StageSummary::new(ctx, "density", checks, &data);
    ctx.write_summary(&summary)?;
    Ok(summary)
}
