use serde::Serialize;

use super::{Check, Ctx, StageSummary};
use crate::error::CliError;

const STAGES: [&str; 5] = ["check_kernel", "sample_paths", "density", "bounds", "lil"];

#[derive(Serialize)]
struct StageStatus {
    stage: String,
    passed: bool,
    failed: Vec<String>,
}

#[derive(Serialize)]
struct ReportData {
    stages: Vec<StageStatus>,
    missing: Vec<String>,
    all_passed: bool,
}

/// Collects every stage summary present in the output directory; all must share this configuration's digest.
pub fn run(ctx: &Ctx) -> Result<StageSummary, CliError> {
    let mut stages = Vec::new();
    let mut missing = Vec::new();
    let mut checks = Vec::new();
    for name in STAGES {
        if !ctx.path(&format!("{name}.json")).exists() {
            missing.push(name.to_string());
            continue;
        }
        let s = ctx.read_summary(name)?;
        let failed: Vec<String> = s.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        checks.extend(s.checks.iter().map(|c| Check { name: format!("{name}.{}", c.name), ..c.clone() }));
        stages.push(StageStatus { stage: name.into(), passed: failed.is_empty(), failed });
    }
    if stages.is_empty() {
        return Err(CliError::MissingInput(ctx.path("check_kernel.json")));
    }
    let data = ReportData { all_passed: stages.iter().all(|s| s.passed), stages, missing };
    let summary = StageSummary::new(ctx, "report", checks, &data);
    ctx.write_summary(&summary)?;
    Ok(summary)
}
