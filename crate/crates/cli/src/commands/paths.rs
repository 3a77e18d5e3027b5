use jumplab::io::{paths_csv, write_anchors, write_paths};
use serde::Serialize;

use super::{Check, Ctx, StageSummary, ANCHORS_BIN, PATHS_BIN};
use crate::error::CliError;

#[derive(Serialize)]
struct PathsData {
    kernel_digest: String,
    n_paths: usize,
    times: Vec<f64>,
    delta: f64,
    lambda_small: f64,
    sigma2_small: f64,
    lambda_big: f64,
    anchors: bool,
    /// `(t, mean |X_t|² / t)`.
    mean_square_over_t: Vec<(f64, f64)>,
}

/// Times at and above this enter the diffusivity check.
const DIFFUSIVE_T: f64 = 64.0;

pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let s = &ctx.cfg.sampler;
    let sampler = ctx.sampler()?;
    let anchors = s.anchors && !sampler.is_modulated();
    let ens = if anchors { sampler.ensemble_with_anchors(ctx.exec)? } else { sampler.ensemble(ctx.exec) };

    let digest = ctx.digest_bytes();
    let mut buf = Vec::new();
    write_paths(&mut buf, &digest, &ens)?;
    std::fs::write(ctx.path(PATHS_BIN), &buf)?;
    if anchors {
        let mut buf = Vec::new();
        write_anchors(&mut buf, &digest, &ens)?;
        std::fs::write(ctx.path(ANCHORS_BIN), &buf)?;
    }
    if s.csv {
        ctx.write("paths.csv", &paths_csv(&ctx.digest, &ens))?;
    }

    let mean_square_over_t: Vec<(f64, f64)> = ens
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let m = ens.radii(i).iter().map(|r| r * r).sum::<f64>() / ens.n_paths as f64;
            (t, m / t)
        })
        .collect();
    let mut checks = Vec::new();
    if !sampler.is_modulated() {
        if let Ok(m) = sampler.kernel().second_moment() {
            let target = m.total();
            for &(t, v) in mean_square_over_t.iter().filter(|(t, _)| *t >= DIFFUSIVE_T) {
                let rel = (v - target).abs() / target;
                checks.push(Check::new(
                    format!("diffusivity_t{t}"),
                    rel <= s.diffusivity_tol,
                    rel,
                    format!("<= {}", s.diffusivity_tol),
                ));
            }
        }
    }
    let rates = sampler.rates();
    let data = PathsData {
        kernel_digest: sampler.kernel().digest(),
        n_paths: ens.n_paths,
        times: ens.times.clone(),
        delta: s.delta,
        lambda_small: rates.lambda_small,
        sigma2_small: rates.sigma2_small,
        lambda_big: rates.lambda_big,
        anchors,
        mean_square_over_t,
    };
    let summary = StageSummary::new(ctx, "sample_paths", checks, data);
    ctx.write_summary(&summary)?;
    Ok(summary)
}
