//! Experiment configuration: a flat TOML file with dotted, sectioned keys.
//!
//! ```toml
//! seed = 7
//! kernel.alpha = 0.5
//! kernel.profile.family = "power"
//! kernel.profile.param = 1.0
//! sampler.n_paths = 20000
//! ```

use std::path::{Path, PathBuf};

use jumplab::io::digest_hex;
use jumplab::{JumpKernel, TailProfile};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; not part of the digest.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub kernel: KernelSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub lil: LilSection,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub c_tail: f64,
    pub profile: ProfileSection,
    #[serde(default)]
    pub modulation: Option<ModulationSection>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// `power`, `polylog`, `logiterated`, `exponential`, `constant` or `truncated`.
    pub family: String,
    /// `ε` for power/polylog, `θ` for logiterated, `c` for exponential.
    #[serde(default)]
    pub param: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub gamma: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection { s_min: 1.0, s_max: 256.0, points: 64, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub delta: f64,
    pub n_paths: usize,
    pub t_grid: Vec<f64>,
    pub anchors: bool,
    pub modulation_enabled: bool,
    pub inverse_cdf_resolution: usize,
    /// Also write `paths.csv`.
    pub csv: bool,
    /// Relative tolerance of the `E|X_t|² = σ² t` check (times `>= 64` only).
    pub diffusivity_tol: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            delta: 0.1,
            n_paths: 10_000,
            t_grid: vec![64.0, 256.0, 1024.0],
            anchors: true,
            modulation_enabled: false,
            inverse_cdf_resolution: 4096,
            csv: false,
            diffusivity_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    /// Times to estimate at; all sampled times when absent.
    pub t: Option<Vec<f64>>,
    /// Times the constants are fitted on; `t` when absent.
    pub fit_t: Option<Vec<f64>>,
    pub shell_ratio: f64,
    pub h_rel: f64,
    /// Radii for the conditional far-tail estimator (needs anchors).
    pub far_radii: Vec<f64>,
    pub t0: f64,
    pub coverage: f64,
    pub slope_tol: f64,
    pub min_r_squared: f64,
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection {
            t: None,
            fit_t: None,
            shell_ratio: 1.15,
            h_rel: 0.25,
            far_radii: Vec::new(),
            t0: 32.0,
            coverage: 0.95,
            slope_tol: 0.1,
            min_r_squared: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Times; the density times when absent.
    pub t: Option<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_points: usize,
    /// Any of `polynomial`, `gaussian_regime`, `far_regime`, `loglog_refined`.
    pub strategies: Vec<String>,
    pub theta: f64,
    pub far_kappa: f64,
    pub loglog_delta: f64,
    pub loglog_theta0: f64,
    pub dominance_cases: usize,
    pub coverage: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            t: None,
            r_min: 2.0,
            r_max: 1e4,
            r_points: 40,
            strategies: ["polynomial", "gaussian_regime", "far_regime", "loglog_refined"].map(String::from).to_vec(),
            theta: 0.5,
            far_kappa: 4.0,
            loglog_delta: 0.5,
            loglog_theta0: 0.5,
            dominance_cases: 100,
            coverage: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LilSection {
    pub k_min: u32,
    pub k_max: u32,
    /// Rate constants as multiples of `√(second moment)`.
    pub c_multipliers: Vec<f64>,
    pub n_paths: usize,
    pub observations_per_block: usize,
    pub c_small: f64,
    pub delta: f64,
    /// The part-(1) check uses `C = part1_multiplier · √(second moment)` from block `part1_k` on.
    pub part1_multiplier: f64,
    pub part1_k: u32,
    pub max_any_fraction: f64,
    pub max_bc_increment: f64,
    pub min_block_freq: f64,
    pub exit_r: Vec<f64>,
    pub exit_t: Vec<f64>,
    pub exit_paths: usize,
    pub exit_delta: f64,
}

impl Default for LilSection {
    fn default() -> Self {
        LilSection {
            k_min: 8,
            k_max: 18,
            c_multipliers: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            n_paths: 2000,
            observations_per_block: 64,
            c_small: 0.1,
            delta: 0.9,
            part1_multiplier: 8.0,
            part1_k: 10,
            max_any_fraction: 0.05,
            max_bc_increment: 1e-2,
            min_block_freq: 0.2,
            exit_r: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            exit_t: vec![1.0, 4.0, 16.0, 64.0, 256.0],
            exit_paths: 5000,
            exit_delta: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::MissingInput(path.to_path_buf())
            } else {
                CliError::Io(format!("{}: {e}", path.display()))
            }
        })?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn digest(&self) -> String {
        digest_hex(&serde_json::to_string(self).expect("config serializes"))
    }

    pub fn kernel(&self) -> Result<JumpKernel, CliError> {
        self.kernel.build()
    }
}

impl KernelSection {
    pub fn build(&self) -> Result<JumpKernel, CliError> {
        let p = &self.profile;
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| CliError::Config(format!("kernel.profile.{what} is required for family {:?}", p.family)))
        };
        let profile = match p.family.as_str() {
            "power" => TailProfile::PowerLaw { eps: need(p.param, "param")? },
            "polylog" => TailProfile::PolyLog { eps: need(p.param, "param")? },
            "logiterated" => TailProfile::LogIterated { theta: need(p.param, "param")? },
            "exponential" => TailProfile::Exponential { c: need(p.param, "param")?, beta: need(p.beta, "beta")? },
            "constant" => TailProfile::Constant,
            "truncated" => TailProfile::Truncated { r_max: need(p.r_max.or(p.param), "r_max")? },
            other => return Err(CliError::Config(format!("unknown kernel.profile.family {other:?}"))),
        };
        let k = JumpKernel::new(self.dim, self.alpha, self.kappa, self.c_tail, profile)?;
        match self.modulation {
            Some(m) => Ok(k.with_modulation(m.lo, m.hi)?),
            None => Ok(k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "kernel.alpha = 0.5\nkernel.kappa = 1\nkernel.c_tail = 1\nkernel.profile.family = \"power\"\nkernel.profile.param = 1\n";

    #[test]
    fn parses_flat_keys_with_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.kernel.dim, 1);
        assert_eq!(c.sampler.delta, 0.1);
        assert_eq!(c.kernel().unwrap(), JumpKernel::reference());
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(ExperimentConfig::parse(&format!("{MINIMAL}sampler.bogus = 1\n")), Err(CliError::Config(_))));
    }

    #[test]
    fn digest_ignores_output_dir() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&format!("out = \"elsewhere\"\n{MINIMAL}")).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig::parse(&format!("seed = 9\n{MINIMAL}")).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn missing_profile_parameter() {
        let text = MINIMAL.replace("kernel.profile.param = 1\n", "");
        assert!(matches!(ExperimentConfig::parse(&text).unwrap().kernel(), Err(CliError::Config(_))));
    }
}
