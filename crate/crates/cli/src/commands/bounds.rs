use jumplab::davies::{davies_bound, dominance_cases, envelope, Strategy};
use jumplab::heatkernel::{bound_curves, MIN_SHELL_COUNT};
use jumplab::io::{csv_string, parse_csv, parse_f64, Cell, CsvDoc};
use jumplab::{Error, JumpKernel};
use serde::Serialize;

use super::density::DensityData;
use super::{log_grid, read_input, Check, Ctx, StageSummary};
use crate::config::BoundsSection;
use crate::error::CliError;
use crate::plot::{emit_plot, Panel, Scale, Series, Style};

/// Relative slack allowed for quadrature error in the dominance comparison.
const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Serialize)]
struct BoundsData {
    times: Vec<f64>,
    davies_prefactor: f64,
    strategies: Vec<Strategy>,
    /// `(strategy, valid points)` over all `(t, R)`.
    valid_points: Vec<(String, usize)>,
    envelope_hits: usize,
    envelope_total: usize,
    dominance_cases: usize,
    dominance_max_ratio: Option<f64>,
}

fn strategies(b: &BoundsSection) -> Result<Vec<Strategy>, CliError> {
    b.strategies
        .iter()
        .map(|s| match s.as_str() {
            "polynomial" => Ok(Strategy::Polynomial),
            "gaussian_regime" => Ok(Strategy::GaussianRegime { theta: b.theta }),
            "far_regime" => Ok(Strategy::FarRegime { kappa: b.far_kappa, theta0: None }),
            "loglog_refined" => Ok(Strategy::LogLogRefined { delta: b.loglog_delta, theta0: b.loglog_theta0 }),
            other => Err(CliError::Config(format!("unknown bounds strategy {other:?}"))),
        })
        .collect()
}

/// `(t, r, p̂)` points the envelope must cover: well-populated shells at their inner edge, and conditional points.
fn observed(ctx: &Ctx, times: &[f64]) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let mut out = Vec::new();
    let doc = load_csv(ctx, "density.csv")?;
    let (ct, cr, cn, cp) = (doc.column("t")?, doc.column("r_lo")?, doc.column("count")?, doc.column("p_hat")?);
    for row in &doc.rows {
        let t = parse_f64(&row[ct])?;
        let n: u64 = row[cn].parse().map_err(|_| CliError::Format(format!("bad count {:?}", row[cn])))?;
        if times.contains(&t) && n >= MIN_SHELL_COUNT {
            out.push((t, parse_f64(&row[cr])?, parse_f64(&row[cp])?));
        }
    }
    if ctx.path("far.csv").exists() {
        let doc = load_csv(ctx, "far.csv")?;
        let (ct, cr, cp, cs) = (doc.column("t")?, doc.column("r")?, doc.column("p_hat")?, doc.column("stderr")?);
        for row in &doc.rows {
            let (t, p, se) = (parse_f64(&row[ct])?, parse_f64(&row[cp])?, parse_f64(&row[cs])?);
            if times.contains(&t) && p > 0.0 && se <= 0.5 * p {
                out.push((t, parse_f64(&row[cr])?, p));
            }
        }
    }
    Ok(out)
}

fn load_csv(ctx: &Ctx, name: &str) -> Result<CsvDoc, CliError> {
    let p = ctx.path(name);
    let doc = parse_csv(&read_input(&p)?)?;
    ctx.expect_digest(&p, &doc.digest)?;
    Ok(doc)
}

fn envelope_value(kernel: &JumpKernel, t: f64, r: f64, s: &[Strategy], c: f64) -> Result<f64, CliError> {
    if r > 0.0 {
        Ok(envelope(kernel, t, r, s, c)?.value)
    } else {
        Ok(c * t.powf(-0.5 * kernel.dim as f64))
    }
}

pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let kernel = ctx.kernel()?;
    let density = ctx.read_summary("density")?;
    let dd: DensityData =
        serde_json::from_value(density.data).map_err(|e| CliError::Format(format!("density.json: {e}")))?;
    let b = &ctx.cfg.bounds;
    let strats = strategies(b)?;
    let c = dd.davies_prefactor;
    if c.is_nan() || c <= 0.0 {
        return Err(CliError::Insufficient("density stage produced no on-diagonal prefactor".into()));
    }
    let times: Vec<f64> = match &b.t {
        Some(t) => t.clone(),
        None => dd.times.iter().map(|r| r.t).filter(|&t| t >= dd.constants.t0).collect(),
    };
    let grid = log_grid(b.r_min, b.r_max, b.r_points);

    let mut rows = Vec::new();
    let mut valid = vec![0usize; strats.len()];
    let mut regime_rows = Vec::new();
    let mut panels = Vec::new();
    let obs = observed(ctx, &times)?;
    for &t in &times {
        let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); strats.len()];
        let mut env = Vec::new();
        for &r in &grid {
            for (i, &s) in strats.iter().enumerate() {
                match davies_bound(&kernel, t, r, s, c) {
                    Ok(db) => {
                        valid[i] += 1;
                        curves[i].push((r, db.bound_value));
                        rows.push(vec![
                            Cell::F(t),
                            Cell::F(r),
                            Cell::S(s.name().into()),
                            Cell::F(db.lambda),
                            Cell::F(db.log_majorant.exp()),
                            Cell::F(db.e_value),
                            Cell::F(db.log_bound),
                            Cell::F(db.meyer_term),
                            Cell::F(db.bound_value),
                        ]);
                    }
                    Err(Error::Validity(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            let e = envelope(&kernel, t, r, &strats, c)?;
            env.push((r, e.value));
            rows.push(vec![
                Cell::F(t),
                Cell::F(r),
                Cell::S(format!("envelope:{}", e.source)),
                Cell::S(String::new()),
                Cell::S(String::new()),
                Cell::S(String::new()),
                Cell::F(e.value.ln()),
                Cell::S(String::new()),
                Cell::F(e.value),
            ]);
        }
        if t >= dd.constants.t0 {
            for rb in bound_curves(&kernel, t, &grid, &dd.constants)? {
                regime_rows.push(vec![
                    Cell::F(rb.t),
                    Cell::F(rb.r),
                    Cell::S(rb.regime.name().into()),
                    Cell::F(rb.upper),
                    rb.lower.map_or(Cell::S(String::new()), Cell::F),
                ]);
            }
        }
        let mut series: Vec<Series> = strats
            .iter()
            .zip(curves)
            .map(|(s, pts)| Series { label: s.name().into(), points: pts, style: Style::Dashed })
            .collect();
        series.push(Series { label: "envelope".into(), points: env, style: Style::Line });
        let pts: Vec<(f64, f64)> = obs.iter().filter(|o| o.0 == t && o.1 > 0.0).map(|o| (o.1, o.2)).collect();
        series.push(Series { label: "estimate".into(), points: pts, style: Style::Markers });
        panels.push(Panel {
            title: format!("Davies bounds at t = {t}"),
            x_label: "R".into(),
            y_label: "density bound".into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series,
            spans: Vec::new(),
        });
    }

    let (mut hits, mut total) = (0usize, 0usize);
    for &(t, r, p) in &obs {
        total += 1;
        hits += usize::from(p <= envelope_value(&kernel, t, r, &strats, c)?);
    }

    let mut checks = Vec::new();
    let cov = if total == 0 { f64::NAN } else { hits as f64 / total as f64 };
    checks.push(Check::new("envelope_coverage", cov >= b.coverage, cov, format!(">= {}", b.coverage)));

    let mut dom_max = None;
    let mut n_dom = 0;
    if kernel.dim == 1 && kernel.modulation.is_none() && b.dominance_cases > 0 {
        let cases = dominance_cases(&kernel, b.dominance_cases, ctx.cfg.seed)?;
        n_dom = cases.len();
        let worst = cases.iter().map(|c| c.exact / c.majorant).fold(0.0, f64::max);
        dom_max = Some(worst);
        let drows: Vec<Vec<Cell>> = cases
            .iter()
            .map(|c| {
                vec![
                    Cell::F(c.lambda),
                    Cell::F(c.k),
                    Cell::F(c.r),
                    Cell::F(c.x),
                    Cell::F(c.exact),
                    Cell::F(c.majorant),
                    Cell::F(c.relative_slack),
                ]
            })
            .collect();
        ctx.write(
            "dominance.csv",
            &csv_string(&ctx.digest, &["lambda", "K", "R", "x", "exact", "majorant", "relative_slack"], &drows),
        )?;
        checks.push(Check::new(
            "majorant_dominates",
            worst <= 1.0 + DOMINANCE_TOL,
            worst,
            format!("exact/majorant <= 1 + {DOMINANCE_TOL}"),
        ));
    }

    ctx.write(
        "bounds.csv",
        &csv_string(
            &ctx.digest,
            &["t", "R", "strategy", "lambda", "Lambda", "E", "log_bound", "meyer_term", "bound"],
            &rows,
        ),
    )?;
    ctx.write("regime.csv", &csv_string(&ctx.digest, &["t", "r", "regime", "upper", "lower"], &regime_rows))?;
    if !panels.is_empty() {
        emit_plot(&panels, &ctx.path("bounds.svg"))?;
    }

    let data = BoundsData {
        times,
        davies_prefactor: c,
        valid_points: strats.iter().map(|s| s.name().to_string()).zip(valid).collect(),
        strategies: strats,
        envelope_hits: hits,
        envelope_total: total,
        dominance_cases: n_dom,
        dominance_max_ratio: dom_max,
    };
    let summary = StageSummary::new(ctx, "bounds", checks, &data);
    ctx.write_summary(&summary)?;
    Ok(summary)
}
