use jumplab::io::{csv_string, Cell};
use jumplab::lil::{
    envelope_constant, exit_time_bound_check, run_lil_experiment, ExceedanceTable, ExitCell, LilConfig,
};
use serde::Serialize;

use super::{Check, Ctx, StageSummary};
use crate::error::CliError;
use crate::plot::{emit_plot, Panel, Scale, Series, Style};

/// `ε` of the summability envelope `C₂ / k^{1+ε}`.
const ENVELOPE_EPS: f64 = 0.1;

#[derive(Serialize)]
struct LilData {
    second_moment: f64,
    part1_c: f64,
    envelope_eps: f64,
    /// `C₂` of the envelope, per `C`.
    envelope_constants: Vec<(f64, f64)>,
    table: ExceedanceTable,
    exit_cells: Vec<ExitCell>,
}

pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let kernel = ctx.kernel()?;
    let l = &ctx.cfg.lil;
    let sigma2 = kernel
        .second_moment()
        .map_err(|_| CliError::Config("the lil stage needs a kernel with finite second moment".into()))?
        .total();
    let root = sigma2.sqrt();
    let part1_c = l.part1_multiplier * root;
    let mut c_grid: Vec<f64> = l.c_multipliers.iter().map(|m| m * root).chain([part1_c]).collect();
    c_grid.sort_by(f64::total_cmp);
    c_grid.dedup();
    let cfg = LilConfig {
        k_min: l.k_min,
        k_max: l.k_max,
        c_grid,
        n_paths: l.n_paths,
        observations_per_block: l.observations_per_block,
        c_small: l.c_small,
        delta: l.delta,
    };
    let table = run_lil_experiment(&kernel, &cfg, ctx.cfg.seed, ctx.exec)?;
    let ci = table.c_grid.iter().position(|&c| c == part1_c).expect("part-1 constant is on the grid");

    let mut rows = Vec::new();
    for (ki, &k) in table.k_values.iter().enumerate() {
        for (j, &c) in table.c_grid.iter().enumerate() {
            rows.push(vec![
                Cell::U(k as u64),
                Cell::F(c),
                Cell::F(table.p_hat[ki][j]),
                Cell::F(table.stderr[ki][j]),
                Cell::F(table.bc_partial_sum[ki][j]),
                Cell::F(table.any_from[ki][j]),
                Cell::F(table.b_k_freq[ki]),
            ]);
        }
    }
    ctx.write(
        "lil.csv",
        &csv_string(&ctx.digest, &["k", "C", "p_hat", "stderr", "bc_partial_sum", "any_from", "b_k_freq"], &rows),
    )?;

    let exit_cells = if kernel.modulation.is_none() && l.exit_paths > 0 && !l.exit_r.is_empty() && !l.exit_t.is_empty()
    {
        exit_time_bound_check(&kernel, &l.exit_r, &l.exit_t, l.exit_paths, ctx.cfg.seed, l.exit_delta, ctx.exec)?
    } else {
        Vec::new()
    };
    if !exit_cells.is_empty() {
        let rows: Vec<Vec<Cell>> = exit_cells
            .iter()
            .map(|e| {
                vec![
                    Cell::F(e.r),
                    Cell::F(e.t),
                    Cell::F(e.left),
                    Cell::F(e.left_stderr),
                    Cell::F(e.right),
                    Cell::F(e.right_stderr),
                    Cell::F(e.margin),
                    Cell::S(e.holds.to_string()),
                ]
            })
            .collect();
        ctx.write(
            "exit.csv",
            &csv_string(
                &ctx.digest,
                &["r", "t", "left", "left_stderr", "right", "right_stderr", "margin", "holds"],
                &rows,
            ),
        )?;
    }

    let envelope_constants: Vec<(f64, f64)> =
        table.c_grid.iter().enumerate().map(|(j, &c)| (c, envelope_constant(&table, j, ENVELOPE_EPS))).collect();

    let ks: Vec<f64> = table.k_values.iter().map(|&k| k as f64).collect();
    let mut series: Vec<Series> = table
        .c_grid
        .iter()
        .enumerate()
        .map(|(j, &c)| Series {
            label: format!("C = {c:.3}"),
            points: ks.iter().zip(&table.p_hat).map(|(&k, row)| (k, row[j])).collect(),
            style: Style::Markers,
        })
        .collect();
    let c2 = envelope_constants[ci].1;
    series.push(Series {
        label: format!("C2/k^{:.1}", 1.0 + ENVELOPE_EPS),
        points: ks.iter().map(|&k| (k, c2 / k.powf(1.0 + ENVELOPE_EPS))).collect(),
        style: Style::Line,
    });
    let panels = vec![
        Panel {
            title: "block exceedance frequency".into(),
            x_label: "k".into(),
            y_label: "P(exceed in block k)".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Log,
            series,
            spans: Vec::new(),
        },
        Panel {
            title: "increment event frequency".into(),
            x_label: "k".into(),
            y_label: "frequency".into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: vec![Series {
                label: format!("c = {}", l.c_small),
                points: ks.iter().copied().zip(table.b_k_freq.iter().copied()).collect(),
                style: Style::Markers,
            }],
            spans: Vec::new(),
        },
    ];
    emit_plot(&panels, &ctx.path("lil.svg"))?;

    let mut checks = Vec::new();
    let monotone = table.counts.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    checks.push(Check::new("monotone_in_c", monotone, 1.0, "non-increasing in C"));
    let p1k = table
        .k_index(l.part1_k)
        .ok_or_else(|| CliError::Config(format!("lil.part1_k = {} is outside [k_min, k_max]", l.part1_k)))?;
    let any = table.any_from[p1k][ci];
    checks.push(Check::new(
        "exceedance_from_part1_k",
        any < l.max_any_fraction,
        any,
        format!("< {}", l.max_any_fraction),
    ));
    let last = *table.p_hat.last().map(|r| &r[ci]).expect("non-empty table");
    checks.push(Check::new(
        "borel_cantelli_increment",
        last <= l.max_bc_increment,
        last,
        format!("<= {}", l.max_bc_increment),
    ));
    if !exit_cells.is_empty() {
        let failed = exit_cells.iter().filter(|e| !e.holds).count();
        checks.push(Check::new("exit_time_bound", failed == 0, failed as f64, "0 violated cells"));
    }
    let min_b = table.b_k_freq.iter().copied().fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "increment_events_frequent",
        min_b >= l.min_block_freq,
        min_b,
        format!(">= {}", l.min_block_freq),
    ));

    let data =
        LilData { second_moment: sigma2, part1_c, envelope_eps: ENVELOPE_EPS, envelope_constants, table, exit_cells };
    let summary = StageSummary::new(ctx, "lil", checks, &data);
    ctx.write_summary(&summary)?;
    Ok(summary)
}
