//! Scenario files. Every section has desk-scale defaults, and unknown keys are
//! rejected at every level.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use dew_core::classical::DistributionConfig;
use dew_core::precession::Sigma;
use dew_core::rival::SupportMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub tol: f64,
    pub bounds: BoundsConfig,
    pub simulate: SimulateConfig,
    pub certify: CertifyConfig,
    pub compare: CompareConfig,
    pub witness: WitnessConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            tol: DEFAULT_TOL,
            bounds: BoundsConfig::default(),
            simulate: SimulateConfig::default(),
            certify: CertifyConfig::default(),
            compare: CompareConfig::default(),
            witness: WitnessConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CliError::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }
}

/// Either an explicit list or an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range(RangeSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    /// Omitted where the command has a natural end point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    pub count: usize,
}

impl GridSpec {
    pub fn resolve(&self, name: &str, default_stop: Option<f64>) -> Result<Vec<f64>, CliError> {
        let values = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range(r) => {
                let stop = r
                    .stop
                    .or(default_stop)
                    .ok_or_else(|| CliError::Config(format!("{name}: range needs an explicit stop")))?;
                match r.count {
                    0 => Vec::new(),
                    1 => vec![r.start],
                    n => (0..n).map(|i| r.start + (stop - r.start) * i as f64 / (n - 1) as f64).collect(),
                }
            }
        };
        if values.is_empty() {
            return Err(CliError::Config(format!("{name}: grid is empty")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{name}: non-finite grid value {bad}")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub k_values: Vec<usize>,
    /// Truncation for the quantum maxima.
    pub n_max: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { k_values: vec![2, 3, 4, 5, 7], n_max: 30 }
    }
}

/// Physical oscillator parameters. `theta` is only needed when the coupling and
/// detuning both vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    pub m1: f64,
    pub m2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self { m1: 1.0, m2: 1.0, omega1: 1.0, omega2: 1.0, g: 0.2, theta: None }
    }
}

impl OscillatorConfig {
    pub fn build(&self) -> dew_core::Result<dew_core::NormalModeSpec> {
        match self.theta {
            Some(t) => dew_core::NormalModeSpec::with_angle(self.m1, self.m2, self.omega1, self.omega2, self.g, t),
            None => dew_core::NormalModeSpec::new(self.m1, self.m2, self.omega1, self.omega2, self.g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub k_values: Vec<usize>,
    pub rounds: u64,
    /// Independent seeds per (K, distribution) pair, derived from the top-level seed.
    pub repeats: u64,
    pub sigma: Sigma,
    pub t0: f64,
    pub oscillators: OscillatorConfig,
    pub distributions: Vec<DistributionConfig>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            k_values: vec![3, 5],
            rounds: 100_000,
            repeats: 1,
            sigma: Sigma::Plus,
            t0: 0.0,
            oscillators: OscillatorConfig::default(),
            distributions: vec![
                DistributionConfig::Gaussian { mean: [0.5, 0.0, 0.5, 0.0], std: [1.0, 1.0, 1.0, 1.0] },
                DistributionConfig::PointMass { point: [1.0, 0.0, 1.0, 0.0] },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub k: usize,
    pub n_max: usize,
    /// Mixing angles. Ignored when `oscillators` is given.
    pub theta: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillators: Option<OscillatorConfig>,
    /// Target scores; a range without `stop` ends at the largest attainable score.
    pub scores: GridSpec,
    /// Truncations for the top-score study; empty to skip it.
    pub truncation: Vec<usize>,
    /// Also write per-cell wall times. They are the only output that differs between runs.
    pub record_timings: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            k: 3,
            n_max: 3,
            theta: GridSpec::Range(RangeSpec { start: 0.0, stop: Some(FRAC_PI_4), count: 5 }),
            oscillators: None,
            scores: GridSpec::Range(RangeSpec { start: 0.5, stop: None, count: 5 }),
            truncation: vec![3, 4],
            record_timings: false,
        }
    }
}

/// One family state for the criteria comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Real `a+` coefficients placed according to `support`.
    Psi { label: String, psi: Vec<f64>, support: SupportMode },
    /// Top eigenvector of `Q_K` on `n_max + 1` levels in the `a+` slot.
    TopEigenvector { label: String, n_max: usize },
}

impl StateSpec {
    pub fn label(&self) -> &str {
        match self {
            StateSpec::Psi { label, .. } | StateSpec::TopEigenvector { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub k: usize,
    pub theta: f64,
    /// Positive Duan parameters per sign on the log grid.
    pub duan_points: usize,
    pub kappas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Add the vacuum and a single-photon family member.
    pub controls: bool,
    pub states: Vec<StateSpec>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            k: 3,
            theta: FRAC_PI_4,
            duan_points: 41,
            kappas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            sigmas: vec![0.1, 0.5, 1.0, 3.0],
            controls: true,
            states: vec![
                StateSpec::TopEigenvector { label: "q3_top_n9".into(), n_max: 9 },
                StateSpec::Psi { label: "psi_0.6_0.8".into(), psi: vec![0.6, 0.8], support: SupportMode::MultiplesOfK },
                StateSpec::Psi {
                    label: "psi_0.5_0.5_0.7071".into(),
                    psi: vec![0.5, 0.5, std::f64::consts::FRAC_1_SQRT_2],
                    support: SupportMode::MultiplesOfK,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub k: usize,
    pub proj_level: usize,
    pub parents: Vec<usize>,
    pub radii: Vec<f64>,
    pub probe_epsilon: f64,
    pub probe_n_max: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            k: 3,
            proj_level: 2,
            parents: (2..=8).collect(),
            radii: vec![0.0, 0.5, 1.0, 2.0],
            probe_epsilon: 0.1,
            probe_n_max: 30,
        }
    }
}
