//! Experiment configuration: JSON schema, semantic validation, and the
//! deterministic config hash stamped into every report.
//!
//! Unknown keys are rejected everywhere so a typo fails loudly instead of
//! silently running defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use saddlesim::graph::TopologyKind;
use saddlesim::problem::ProblemKind;
use saddlesim::solvers::Variant;

use crate::HarnessError;

/// Environment variable that, when set, re-roots every relative output path.
pub const OUTPUT_DIR_ENV: &str = "SADDLESIM_OUTPUT_DIR";

/// How a solver spec obtains its stepsizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeMode {
    /// Certified stepsizes from the aggregate constants and spectral gap.
    Theorem1,
    /// Explicit `alpha`/`beta` values from the config.
    Manual,
}

/// Problem-family block of a config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// Cost family.
    pub kind: ProblemKind,
    /// Primal dimension.
    pub p_x: usize,
    /// Dual dimension.
    pub p_y: usize,
    /// Node count.
    pub n: usize,
    /// Cross-node dissimilarity scale in [0, 2] (default 1).
    #[serde(default = "default_heterogeneity")]
    pub heterogeneity: f64,
    /// Generator seed.
    pub seed: u64,
}

/// Network block of a config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Graph family.
    pub kind: TopologyKind,
    /// Node count; must equal the problem's.
    pub n: usize,
}

/// One solver to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Iteration scheme.
    pub variant: Variant,
    /// Stepsize source.
    pub mode: StepsizeMode,
    /// Primal stepsize; required by (and only allowed in) manual mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Dual stepsize; required by (and only allowed in) manual mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Multiplier in (0, 1] on the certified stepsizes (default 1).
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Iteration budget.
    pub max_iters: u64,
    /// Early-stop gap; 0 disables (default 0).
    #[serde(default)]
    pub stop_gap: f64,
    /// Seed for the initial iterates; defaults to the problem seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Output artifact block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Stem path for trace CSVs (one file per solver, named
    /// `<stem>.<solver-label>.csv`); omit to skip CSV output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    /// Path for the overlay SVG plot; omit to skip.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    /// Trace recording stride (default 1).
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

/// A full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Instance generator parameters.
    pub problem: ProblemSpec,
    /// Network parameters.
    pub topology: TopologySpec,
    /// Solvers to run, in output order.
    pub solvers: Vec<SolverSpec>,
    /// Artifact destinations.
    pub outputs: OutputSpec,
}

fn default_heterogeneity() -> f64 {
    1.0
}

fn default_safety() -> f64 {
    1.0
}

fn default_record_every() -> u64 {
    1
}

/// Loads and validates a config file.
///
/// # Errors
///
/// [`HarnessError::Config`] with the offending path, JSON line/column for
/// parse errors, or the offending field for semantic errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    // An unreadable config is a configuration error (exit 2), unlike IO
    // failures on output artifacts.
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        HarnessError::Config(format!(
            "{}: line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Semantic validation beyond the JSON schema.
///
/// # Errors
///
/// [`HarnessError::Config`] naming the first offending field.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let bad = |msg: String| Err(HarnessError::Config(msg));
    if cfg.topology.n != cfg.problem.n {
        return bad(format!(
            "topology.n = {} must equal problem.n = {}",
            cfg.topology.n, cfg.problem.n
        ));
    }
    if cfg.solvers.is_empty() {
        return bad("solvers: at least one solver spec is required".into());
    }
    if !(0.0..=2.0).contains(&cfg.problem.heterogeneity) {
        return bad(format!(
            "problem.heterogeneity = {} must lie in [0, 2]",
            cfg.problem.heterogeneity
        ));
    }
    if cfg.outputs.record_every == 0 {
        return bad("outputs.record_every must be at least 1".into());
    }
    for (i, s) in cfg.solvers.iter().enumerate() {
        let field = |name: &str| format!("solvers[{i}].{name}");
        match s.mode {
            StepsizeMode::Manual => {
                for (name, v) in [("alpha", s.alpha), ("beta", s.beta)] {
                    match v {
                        None => return bad(format!("{}: required in manual mode", field(name))),
                        Some(v) if !(v > 0.0 && v.is_finite()) => {
                            return bad(format!(
                                "{}: must be positive and finite, got {v}",
                                field(name)
                            ))
                        }
                        _ => {}
                    }
                }
            }
            StepsizeMode::Theorem1 => {
                if s.alpha.is_some() {
                    return bad(format!(
                        "{}: not allowed in theorem1 mode (stepsizes are derived)",
                        field("alpha")
                    ));
                }
                if s.beta.is_some() {
                    return bad(format!(
                        "{}: not allowed in theorem1 mode (stepsizes are derived)",
                        field("beta")
                    ));
                }
            }
        }
        if !(s.safety > 0.0 && s.safety <= 1.0) {
            return bad(format!(
                "{}: must lie in (0, 1], got {}",
                field("safety"),
                s.safety
            ));
        }
        if !(s.stop_gap >= 0.0 && s.stop_gap.is_finite()) {
            return bad(format!(
                "{}: must be finite and nonnegative, got {}",
                field("stop_gap"),
                s.stop_gap
            ));
        }
    }
    Ok(())
}

/// FNV-1a 64-bit hash of the canonical JSON serialization. Stable across
/// runs and platforms; identical hash implies identical artifacts.
#[must_use]
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config structs always serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Re-roots a relative output path under [`OUTPUT_DIR_ENV`] when that
/// variable is set; absolute paths and unset environments pass through.
#[must_use]
pub fn resolve_output_path(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p,
    }
}

/// File label for each solver in config order: the variant name, suffixed
/// with its 1-based position (`gt-gda-2`) whenever the variant appears more
/// than once in the list.
#[must_use]
pub fn solver_labels(solvers: &[SolverSpec]) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in solvers {
        *counts.entry(s.variant.name()).or_insert(0) += 1;
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    solvers
        .iter()
        .map(|s| {
            let name = s.variant.name();
            let k = seen.entry(name).or_insert(0);
            *k += 1;
            if counts[name] > 1 {
                format!("{name}-{k}")
            } else {
                name.to_string()
            }
        })
        .collect()
}
