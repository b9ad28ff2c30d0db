//! Scenario configuration: a TOML file with built-in defaults.
//!
//! A bare `case = "stiffness"` is a complete config. Fields left out are
//! filled from the case defaults when the config is resolved, and the resolved
//! form is what gets echoed next to the run outputs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dtwin_core::dynamics::{modal_state, slow_time_grid, Channels, MeasurementKind};
use dtwin_core::emulator::{EmulatorSpec, FitSettings, KernelKind, MeanKind};
use dtwin_core::inversion::InversionTarget;
use dtwin_core::selection::{full_pool, BicVariant, SelectionSettings};
use dtwin_core::{EvolutionProfile, NominalSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    #[default]
    Stiffness,
    Mass,
    Joint,
}

impl Case {
    pub fn channels(self) -> Channels {
        match self {
            Self::Stiffness => Channels::STIFFNESS,
            Self::Mass => Channels::MASS,
            Self::Joint => Channels::BOTH,
        }
    }

    pub fn measurement_kind(self) -> MeasurementKind {
        self.target().required_kind()
    }

    pub fn target(self) -> InversionTarget {
        match self {
            Self::Stiffness => InversionTarget::Stiffness,
            Self::Mass => InversionTarget::Mass,
            Self::Joint => InversionTarget::Joint,
        }
    }

    pub fn default_points(self) -> usize {
        match self {
            Self::Stiffness => 30,
            Self::Mass => 200,
            Self::Joint => 37,
        }
    }

    pub fn default_sigma(self) -> f64 {
        match self {
            Self::Stiffness => 0.0,
            Self::Mass => 0.025,
            Self::Joint => 0.005,
        }
    }

    /// One full oscillation of the stiffness envelope, or two sawtooth
    /// periods when mass evolves.
    pub fn default_horizon(self, profile: &ProfileConfig) -> f64 {
        match self {
            Self::Stiffness => std::f64::consts::TAU / profile.beta_k,
            Self::Mass | Self::Joint => 2.0 * std::f64::consts::TAU / profile.beta_m,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::Stiffness => "stiffness",
            Self::Mass => "mass",
            Self::Joint => "joint",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub mass: f64,
    pub natural_frequency: f64,
    pub damping_ratio: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { mass: 1.0, natural_frequency: std::f64::consts::TAU, damping_ratio: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub alpha_k: f64,
    pub epsilon_k: f64,
    pub beta_k: f64,
    pub beta_m: f64,
    pub epsilon_m: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        let p = EvolutionProfile::with_defaults(Channels::BOTH);
        Self {
            alpha_k: p.alpha_k,
            epsilon_k: p.epsilon_k,
            beta_k: p.beta_k,
            beta_m: p.beta_m,
            epsilon_m: p.epsilon_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub bic: BicVariant,
    pub n_starts: usize,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        let fit = FitSettings::default();
        Self {
            bic: BicVariant::default(),
            n_starts: fit.n_starts,
            gradient_tolerance: fit.gradient_tolerance,
            max_iterations: fit.max_iterations,
        }
    }
}

/// Config as written by the user. `None` means "use the case default".
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub case: Case,
    pub seed: u64,
    pub n_points: Option<usize>,
    pub noise_sigma: Option<f64>,
    /// Slow-time span of the measurement grid, in the same time unit as the
    /// profile rates.
    pub horizon: Option<f64>,
    pub output_dir: Option<PathBuf>,
    /// Candidates as `mean:kernel` keys, e.g. `"constant:ard_matern52"`.
    /// Empty or absent means the full 30-candidate pool.
    pub pool: Option<Vec<String>>,
    pub system: SystemConfig,
    pub profile: ProfileConfig,
    pub selection: SelectionConfig,
}

/// Every problem found in a config, not just the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<String>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// A validated config with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub case: Case,
    pub seed: u64,
    pub n_points: usize,
    pub noise_sigma: f64,
    pub horizon: f64,
    pub output_dir: PathBuf,
    pub pool: Vec<EmulatorSpec>,
    pub restricted_pool: bool,
    pub system: NominalSystem,
    pub profile: EvolutionProfile,
    pub selection: SelectionSettings,
}

pub fn parse_candidate(key: &str) -> Option<EmulatorSpec> {
    let (mean, kernel) = key.split_once(':')?;
    Some(EmulatorSpec::new(MeanKind::from_key(mean.trim())?, KernelKind::from_key(kernel.trim())?))
}

pub fn candidate_key(spec: &EmulatorSpec) -> String {
    format!("{}:{}", spec.mean.key(), spec.kernel.key())
}

impl ScenarioConfig {
    pub fn for_case(case: Case) -> Self {
        Self { case, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, ValidationErrors> {
        toml::from_str(text).map_err(|e| ValidationErrors(vec![format!("parse error: {}", e.message())]))
    }

    pub fn load(path: &Path) -> Result<Self, ValidationErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ValidationErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn resolve(&self) -> Result<Scenario, ValidationErrors> {
        let mut errors = Vec::new();
        let case = self.case;
        let n_points = self.n_points.unwrap_or(case.default_points());
        let noise_sigma = self.noise_sigma.unwrap_or(case.default_sigma());
        let horizon = self.horizon.unwrap_or_else(|| case.default_horizon(&self.profile));

        if n_points < 2 {
            errors.push(format!("n_points = {n_points}: the slow-time grid needs at least 2 points"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            errors.push(format!("noise_sigma = {noise_sigma}: must be finite and non-negative"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            errors.push(format!("horizon = {horizon}: must be finite and positive"));
        }

        let s = &self.system;
        if !(s.mass > 0.0 && s.mass.is_finite()) {
            errors.push(format!("system.mass = {}: must be positive", s.mass));
        }
        if !(s.natural_frequency > 0.0 && s.natural_frequency.is_finite()) {
            errors.push(format!("system.natural_frequency = {}: must be positive", s.natural_frequency));
        }
        if !(s.damping_ratio >= 0.0 && s.damping_ratio < 1.0) {
            errors.push(format!(
                "system.damping_ratio = {}: underdamped required (0 <= damping ratio < 1)",
                s.damping_ratio
            ));
        }

        let p = &self.profile;
        for (name, v) in [
            ("alpha_k", p.alpha_k),
            ("epsilon_k", p.epsilon_k),
            ("beta_k", p.beta_k),
            ("beta_m", p.beta_m),
            ("epsilon_m", p.epsilon_m),
        ] {
            if !v.is_finite() {
                errors.push(format!("profile.{name} = {v}: must be finite"));
            }
        }
        if case.channels().stiffness && p.epsilon_k <= -1.0 {
            errors.push(format!("profile.epsilon_k = {}: must exceed -1", p.epsilon_k));
        }
        if case.channels().mass && !(p.beta_m > 0.0) {
            errors.push(format!("profile.beta_m = {}: must be positive", p.beta_m));
        }
        if self.horizon.is_none() {
            let rate = match case {
                Case::Stiffness => p.beta_k,
                _ => p.beta_m,
            };
            if !(rate > 0.0) {
                errors.push(format!(
                    "horizon: no default when the {} profile rate is {rate}; set horizon explicitly",
                    case
                ));
            }
        }

        let sel = &self.selection;
        if sel.n_starts == 0 {
            errors.push("selection.n_starts = 0: need at least one optimizer start".into());
        }
        if !(sel.gradient_tolerance > 0.0) {
            errors.push(format!(
                "selection.gradient_tolerance = {}: must be positive",
                sel.gradient_tolerance
            ));
        }
        if sel.max_iterations == 0 {
            errors.push("selection.max_iterations = 0: must be positive".into());
        }

        let mut pool = Vec::new();
        let restricted_pool = self.pool.as_ref().is_some_and(|p| !p.is_empty());
        if restricted_pool {
            for key in self.pool.iter().flatten() {
                match parse_candidate(key) {
                    Some(spec) if pool.contains(&spec) => {
                        errors.push(format!("pool: duplicate candidate {key:?}"))
                    }
                    Some(spec) => pool.push(spec),
                    None => errors.push(format!(
                        "pool: unknown candidate {key:?} (expected mean:kernel, e.g. \"constant:ard_matern52\")"
                    )),
                }
            }
        } else {
            pool = full_pool();
        }

        let system = NominalSystem::from_modal(s.mass, s.natural_frequency, s.damping_ratio);
        let profile = EvolutionProfile {
            alpha_k: p.alpha_k,
            epsilon_k: p.epsilon_k,
            beta_k: p.beta_k,
            beta_m: p.beta_m,
            epsilon_m: p.epsilon_m,
            channels: case.channels(),
        };

        // the drifted system has to stay underdamped at every measurement
        if errors.is_empty() {
            match (&system, slow_time_grid(n_points, horizon)) {
                (Ok(sys), Ok(grid)) => {
                    if let Some(bad) = grid.iter().find_map(|&t| {
                        let (dk, dm) = profile.deltas(t);
                        modal_state(dk, dm, sys, t).err()
                    }) {
                        errors.push(format!("profile: {bad}"));
                    }
                }
                (Err(e), _) => errors.push(format!("system: {e}")),
                (_, Err(e)) => errors.push(format!("grid: {e}")),
            }
        }

        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }
        Ok(Scenario {
            case,
            seed: self.seed,
            n_points,
            noise_sigma,
            horizon,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}", case.key()))),
            pool,
            restricted_pool,
            system: system.expect("checked above"),
            profile,
            selection: SelectionSettings {
                fit: FitSettings {
                    n_starts: sel.n_starts,
                    gradient_tolerance: sel.gradient_tolerance,
                    max_iterations: sel.max_iterations,
                    seed: self.seed,
                },
                variant: sel.bic,
            },
        })
    }
}

impl Scenario {
    /// The config with every field spelled out.
    pub fn to_config(&self) -> ScenarioConfig {
        let fit = &self.selection.fit;
        ScenarioConfig {
            case: self.case,
            seed: self.seed,
            n_points: Some(self.n_points),
            noise_sigma: Some(self.noise_sigma),
            horizon: Some(self.horizon),
            output_dir: Some(self.output_dir.clone()),
            pool: Some(self.pool.iter().map(candidate_key).collect()),
            system: SystemConfig {
                mass: self.system.mass(),
                natural_frequency: self.system.natural_frequency(),
                damping_ratio: self.system.damping_ratio(),
            },
            profile: ProfileConfig {
                alpha_k: self.profile.alpha_k,
                epsilon_k: self.profile.epsilon_k,
                beta_k: self.profile.beta_k,
                beta_m: self.profile.beta_m,
                epsilon_m: self.profile.epsilon_m,
            },
            selection: SelectionConfig {
                bic: self.selection.variant,
                n_starts: fit.n_starts,
                gradient_tolerance: fit.gradient_tolerance,
                max_iterations: fit.max_iterations,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("config always serializes")
    }
}
