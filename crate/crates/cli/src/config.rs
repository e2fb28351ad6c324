//! Experiment configuration: JSON schema, defaults and validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mai_core::envs::Aliasing;
use mai_core::KernelKind;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FixedPoint,
    Closure,
    EntropyCompare,
    Reversibility,
    Duality,
    Stack,
    Cocycle,
    Persistence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed_point",
            Self::Closure => "closure",
            Self::EntropyCompare => "entropy_compare",
            Self::Reversibility => "reversibility",
            Self::Duality => "duality",
            Self::Stack => "stack",
            Self::Cocycle => "cocycle",
            Self::Persistence => "persistence",
        }
    }

    fn environment(self) -> &'static str {
        match self {
            Self::FixedPoint => "affine",
            Self::Closure | Self::EntropyCompare | Self::Reversibility => "ring",
            Self::Duality => "grid",
            Self::Stack | Self::Persistence => "circle",
            Self::Cocycle => "atlas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub environment: Environment,
    #[serde(default)]
    pub operator: OperatorParams,
    #[serde(default)]
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Environment {
    Ring(RingParams),
    Grid(GridParams),
    Affine(AffineParams),
    Circle(CircleParams),
    Atlas(AtlasParams),
}

impl Environment {
    fn name(&self) -> &'static str {
        match self {
            Self::Ring(_) => "ring",
            Self::Grid(_) => "grid",
            Self::Affine(_) => "affine",
            Self::Circle(_) => "circle",
            Self::Atlas(_) => "atlas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingParams {
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_anchors")]
    pub n_anchor: usize,
    #[serde(default)]
    pub obs_noise: f64,
    #[serde(default = "default_aliasing")]
    pub aliasing: Aliasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub width: usize,
    pub height: usize,
    pub goal: [usize; 2],
    #[serde(default = "one")]
    pub reward: f64,
    #[serde(default)]
    pub start: [usize; 2],
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineParams {
    #[serde(default = "two")]
    pub dim: usize,
    /// Retrieval gain about the origin; 1 is exact retrieval.
    #[serde(default = "one")]
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleParams {
    #[serde(default = "default_anchors")]
    pub points: usize,
    #[serde(default = "one")]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasParams {
    #[serde(default = "default_patches")]
    pub patches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorParams {
    #[serde(default = "half")]
    pub pull: f64,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "one")]
    pub successor_weight: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            pull: half(),
            kernel: default_kernel(),
            bandwidth: default_bandwidth(),
            successor_weight: one(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// A similarity x ↦ scale·Rot(angle)·x + translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub translation: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Φ is an anchor of the consolidated ring, Ψ its context.
    Ring,
    /// Φ is a coin flip independent of a uniformly drawn Ψ.
    Independent,
}

/// Sampling and measurement knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    /// fixed_point: random initializations per seed.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// fixed_point: initializations are drawn from [−r, r]^dim.
    #[serde(default = "default_init_radius")]
    pub init_radius: f64,
    /// closure, stack: explicit loop-test floor instead of the default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_floor: Option<f64>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_arc_bandwidth")]
    pub arc_bandwidth: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_range")]
    pub latent_range: f64,
    #[serde(default = "default_range")]
    pub context_range: f64,
    /// reversibility: samples per seed.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    /// reversibility (independent coupling): std of the forward noise.
    #[serde(default = "half")]
    pub forward_noise: f64,
    /// duality: episode counts at which the report is taken.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "default_episode_steps")]
    pub max_episode_steps: usize,
    #[serde(default = "default_holdout")]
    pub holdout_suffixes: usize,
    #[serde(default = "default_suffix_len")]
    pub suffix_len: usize,
    /// stack: up maps, one per layer transition.
    #[serde(default = "default_layers")]
    pub layers: Vec<LayerSpec>,
    /// stack, cocycle: translation perturbation; persistence: max-norm noise.
    #[serde(default)]
    pub delta: f64,
    /// persistence: filtration cut-off (cloud diameter when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_filtration: Option<f64>,
}

impl Default for Protocol {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all protocol fields have defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn two() -> usize {
    2
}
fn default_anchors() -> usize {
    64
}
fn default_patches() -> usize {
    4
}
fn default_aliasing() -> Aliasing {
    Aliasing::None
}
fn default_kernel() -> KernelKind {
    KernelKind::Gaussian
}
fn default_bandwidth() -> f64 {
    0.05
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    1000
}
fn default_starts() -> usize {
    20
}
fn default_init_radius() -> f64 {
    10.0
}
fn default_episodes() -> usize {
    1000
}
fn default_horizon() -> usize {
    10
}
fn default_arc_bandwidth() -> f64 {
    0.1
}
fn default_bins() -> usize {
    8
}
fn default_range() -> f64 {
    1.2
}
fn default_samples() -> usize {
    1000
}
fn default_coupling() -> Coupling {
    Coupling::Ring
}
fn default_checkpoints() -> Vec<usize> {
    vec![0, 10, 20, 40, 80, 160]
}
fn default_discount() -> f64 {
    0.9
}
fn default_episode_steps() -> usize {
    100
}
fn default_holdout() -> usize {
    20
}
fn default_suffix_len() -> usize {
    5
}
fn default_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            scale: 1.0,
            angle: std::f64::consts::FRAC_PI_6,
            translation: [0.0, 0.0],
        },
        LayerSpec {
            scale: 1.0,
            angle: std::f64::consts::FRAC_PI_4,
            translation: [0.0, 0.0],
        },
    ]
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// `--output-dir`, then the config's own directory, then
    /// `$MAI_OUTPUT_ROOT/<kind>-<hash prefix>`, then `mai-output/...`.
    pub fn resolve_output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(dir) = override_dir {
            return dir.to_path_buf();
        }
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("mai-output"), PathBuf::from);
        root.join(format!("{}-{}", self.experiment.name(), &self.hash()[..12]))
    }
}

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_VAR: &str = "MAI_OUTPUT_ROOT";

/// Line of the first occurrence of `"key"` in the source text, if any.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

fn semantic(text: &str, key: &str, message: impl Into<String>) -> CliError {
    let message = message.into();
    match line_of(text, key) {
        Some(line) => CliError::Validation(format!("line {line}: {message}")),
        None => CliError::Validation(format!("line 1 (default for `{key}`): {message}")),
    }
}

/// Parses and validates a config. Syntax and schema errors carry serde's
/// line and column; semantic errors point at the line of the offending key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    validate(&config, text)?;
    Ok(config)
}

fn check(ok: bool, text: &str, key: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(semantic(text, key, message))
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn validate(c: &ExperimentConfig, text: &str) -> Result<(), CliError> {
    check(!c.seeds.is_empty(), text, "seeds", "at least one seed is required")?;
    let unique: BTreeSet<u64> = c.seeds.iter().copied().collect();
    check(unique.len() == c.seeds.len(), text, "seeds", "seeds must be distinct")?;
    let wanted = c.experiment.environment();
    check(
        c.environment.name() == wanted,
        text,
        "environment",
        format!(
            "experiment `{}` needs a `{wanted}` environment, got `{}`",
            c.experiment.name(),
            c.environment.name()
        ),
    )?;

    let op = &c.operator;
    check(
        op.pull > 0.0 && op.pull < 1.0,
        text,
        "pull",
        format!("pull must lie in the open interval (0, 1), got {}", op.pull),
    )?;
    check(
        positive(op.bandwidth),
        text,
        "bandwidth",
        "bandwidth must be positive and finite",
    )?;
    check(
        op.successor_weight.is_finite() && op.successor_weight >= 0.0,
        text,
        "successor_weight",
        "successor_weight must be finite and >= 0",
    )?;
    check(positive(op.tol), text, "tol", "tol must be positive and finite")?;
    check(op.max_iter > 0, text, "max_iter", "max_iter must be at least 1")?;

    match &c.environment {
        Environment::Ring(r) => {
            check(positive(r.radius), text, "radius", "radius must be positive and finite")?;
            check(r.n_anchor >= 8, text, "n_anchor", "n_anchor must be at least 8")?;
            check(
                r.obs_noise.is_finite() && r.obs_noise >= 0.0,
                text,
                "obs_noise",
                "obs_noise must be finite and >= 0",
            )?;
        }
        Environment::Grid(g) => {
            check(
                g.width > 0 && g.height > 0,
                text,
                "width",
                "grid dimensions must be positive",
            )?;
        }
        Environment::Affine(a) => {
            check(a.dim > 0, text, "dim", "dim must be at least 1")?;
            check(a.gain.is_finite(), text, "gain", "gain must be finite")?;
        }
        Environment::Circle(ci) => {
            check(ci.points >= 4, text, "points", "circle needs at least 4 points")?;
            check(
                positive(ci.radius),
                text,
                "radius",
                "radius must be positive and finite",
            )?;
        }
        Environment::Atlas(a) => {
            check(
                a.patches >= 3,
                text,
                "patches",
                "cocycle check needs at least 3 patches",
            )?;
        }
    }

    let p = &c.protocol;
    check(p.starts > 0, text, "starts", "starts must be at least 1")?;
    check(
        positive(p.init_radius),
        text,
        "init_radius",
        "init_radius must be positive and finite",
    )?;
    if let Some(f) = p.noise_floor {
        check(
            f.is_finite() && f >= 0.0,
            text,
            "noise_floor",
            "noise_floor must be finite and >= 0",
        )?;
    }
    check(p.episodes > 0, text, "episodes", "episodes must be at least 1")?;
    check(p.horizon > 0, text, "horizon", "horizon must be at least 1")?;
    check(
        positive(p.arc_bandwidth),
        text,
        "arc_bandwidth",
        "arc_bandwidth must be positive",
    )?;
    check(p.bins >= 2, text, "bins", "bins must be at least 2")?;
    check(
        positive(p.latent_range),
        text,
        "latent_range",
        "latent_range must be positive",
    )?;
    check(
        positive(p.context_range),
        text,
        "context_range",
        "context_range must be positive",
    )?;
    check(p.samples > 0, text, "samples", "samples must be at least 1")?;
    check(
        p.forward_noise.is_finite() && p.forward_noise >= 0.0,
        text,
        "forward_noise",
        "forward_noise must be finite and >= 0",
    )?;
    check(
        !p.checkpoints.is_empty() && p.checkpoints.windows(2).all(|w| w[0] <= w[1]),
        text,
        "checkpoints",
        "checkpoints must be a non-empty ascending list",
    )?;
    check(
        p.discount >= 0.0 && p.discount < 1.0,
        text,
        "discount",
        format!("discount must lie in [0, 1), got {}", p.discount),
    )?;
    check(
        p.alpha > 0.0 && p.alpha <= 1.0,
        text,
        "alpha",
        format!("alpha must lie in (0, 1], got {}", p.alpha),
    )?;
    check(
        p.max_episode_steps > 0,
        text,
        "max_episode_steps",
        "max_episode_steps must be at least 1",
    )?;
    check(p.suffix_len > 0, text, "suffix_len", "suffix_len must be at least 1")?;
    check(
        p.holdout_suffixes > 0,
        text,
        "holdout_suffixes",
        "holdout_suffixes must be at least 1",
    )?;
    check(
        !p.layers.is_empty(),
        text,
        "layers",
        "at least one layer map is required",
    )?;
    for l in &p.layers {
        check(
            positive(l.scale) && l.angle.is_finite() && l.translation.iter().all(|t| t.is_finite()),
            text,
            "layers",
            "layer scale must be positive and all layer entries finite",
        )?;
    }
    check(
        p.delta.is_finite() && p.delta >= 0.0,
        text,
        "delta",
        "delta must be finite and >= 0",
    )?;
    if let Some(f) = p.max_filtration {
        check(
            positive(f),
            text,
            "max_filtration",
            "max_filtration must be positive and finite",
        )?;
    }
    Ok(())
}
