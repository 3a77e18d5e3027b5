mod bounds;
pub mod density;
mod kernel;
mod lil;
mod paths;
mod report;

use std::path::{Path, PathBuf};

use jumplab::io::{digest_bytes, digest_to_hex, read_anchors, read_paths};
use jumplab::{Ensemble, Exec, JumpKernel, Sampler, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub use bounds::run as bounds;
pub use density::run as density;
pub use kernel::run as check_kernel;
pub use lil::run as lil;
pub use paths::run as sample_paths;
pub use report::run as report;

pub const PATHS_BIN: &str = "paths.bin";
pub const ANCHORS_BIN: &str = "anchors.bin";

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub digest: String,
    pub out: PathBuf,
    pub exec: Exec,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig, out: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        Ok(Ctx { digest: cfg.digest(), cfg, out, exec: Exec::default() })
    }

    pub fn kernel(&self) -> Result<JumpKernel, CliError> {
        self.cfg.kernel()
    }

    /// The sampler `sample-paths` draws with; later stages rebuild it for the conditional estimator.
    pub fn sampler(&self) -> Result<Sampler, CliError> {
        let s = &self.cfg.sampler;
        let mut cfg = SamplerConfig::new(s.t_grid.clone(), s.n_paths, self.cfg.seed).with_delta(s.delta);
        cfg.modulation_enabled = s.modulation_enabled;
        cfg.inverse_cdf_resolution = s.inverse_cdf_resolution;
        Ok(Sampler::new(self.kernel()?, cfg)?)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    pub fn write_summary(&self, s: &StageSummary) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(s).expect("summary serializes") + "\n";
        self.write(&format!("{}.json", s.stage), &text)
    }

    /// A prior stage's summary, checked against this configuration's digest.
    pub fn read_summary(&self, stage: &str) -> Result<StageSummary, CliError> {
        let p = self.path(&format!("{stage}.json"));
        let text = read_input(&p)?;
        let s: StageSummary =
            serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", p.display())))?;
        self.expect_digest(&p, &s.config_digest)?;
        Ok(s)
    }

    pub fn expect_digest(&self, file: &Path, found: &str) -> Result<(), CliError> {
        if found == self.digest {
            Ok(())
        } else {
            Err(CliError::DigestMismatch {
                file: file.to_path_buf(),
                expected: self.digest.clone(),
                found: found.into(),
            })
        }
    }

    /// The ensemble written by `sample-paths`, with anchors when present.
    pub fn load_ensemble(&self) -> Result<Ensemble, CliError> {
        let p = self.path(PATHS_BIN);
        let bytes = read_bytes(&p)?;
        let (digest, mut e) = read_paths(&mut bytes.as_slice())?;
        self.expect_digest(&p, &digest_to_hex(&digest))?;
        let a = self.path(ANCHORS_BIN);
        if a.exists() {
            let bytes = read_bytes(&a)?;
            let d = read_anchors(&mut bytes.as_slice(), &mut e)?;
            self.expect_digest(&a, &digest_to_hex(&d))?;
        }
        e.kernel_hash = self.kernel()?.digest();
        Ok(e)
    }

    pub fn digest_bytes(&self) -> [u8; 32] {
        digest_bytes(&self.digest).expect("own digest is valid hex")
    }
}

fn missing_or_io(p: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::MissingInput(p.to_path_buf())
    } else {
        CliError::Io(format!("{}: {e}", p.display()))
    }
}

pub fn read_input(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| missing_or_io(p, e))
}

fn read_bytes(p: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(p).map_err(|e| missing_or_io(p, e))
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured value; `None` when it is not finite.
    pub value: Option<f64>,
    pub threshold: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, threshold: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value: value.is_finite().then_some(value), threshold: threshold.into() }
    }
}

/// JSON summary every stage writes as `<stage>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub config_digest: String,
    pub version: String,
    pub checks: Vec<Check>,
    pub data: serde_json::Value,
}

impl StageSummary {
    pub fn new(ctx: &Ctx, stage: &str, checks: Vec<Check>, data: impl Serialize) -> Self {
        StageSummary {
            stage: stage.into(),
            config_digest: ctx.digest.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            checks,
            data: serde_json::to_value(data).expect("stage data serializes"),
        }
    }

    pub fn result(&self) -> Result<(), CliError> {
        let failed: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::ChecksFailed(failed))
        }
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Positions of every path at time index `i`, flattened `[path][coord]`.
pub fn slice_at(e: &Ensemble, i: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(e.n_paths * e.dim);
    for p in 0..e.n_paths {
        v.extend_from_slice(e.point(p, i));
    }
    v
}
