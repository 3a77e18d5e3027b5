use jumplab::kernel::check_assumption_a;

use super::{log_grid, Check, Ctx, StageSummary};
use crate::error::CliError;

pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let kernel = ctx.kernel()?;
    let c = &ctx.cfg.check;
    let grid = log_grid(c.s_min, c.s_max, c.points);
    let report = check_assumption_a(&kernel, &grid, c.gamma)?;
    let checks = vec![
        Check::new("phi_monotone", report.phi_monotone_ok, 1.0, "phi non-decreasing, >= 1"),
        Check::new(
            "log_phi_over_s_decreasing",
            report.log_phi_over_s_decreasing_ok,
            report.log_phi_over_s_onset.unwrap_or(-1.0),
            "eventually non-increasing",
        ),
        Check::new(
            "phi_diverges",
            report.phi_diverges_ok,
            *report.capital_phi.last().unwrap(),
            "Phi grows without bound",
        ),
        Check::new(
            "phi_over_phi_gamma_bounded",
            report.phi_phi_gamma_bounded_ok,
            report.phi_gamma_ratio.iter().copied().fold(0.0, f64::max),
            "Phi/phi^gamma bounded",
        ),
    ];
    let s = StageSummary::new(ctx, "check_kernel", checks, &report);
    ctx.write_summary(&s)?;
    Ok(s)
}
