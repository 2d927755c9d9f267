//! Experiment configuration files. One flat JSON object per run; the
//! `experiment` field selects the variant.

use std::path::Path;

use heatlab::asymptotics::{InitialData, Phi};
use heatlab::evolve::TimeSchedule;
use heatlab::kernel::HeatModel;
use heatlab::planar::PlanarConfig;
use heatlab::space::SpaceConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    /// Numeric kernel against the Euclidean closed form.
    KernelAccuracy {
        space: SpaceConfig,
        t: f64,
        r_max: f64,
        #[serde(default = "default_accuracy")]
        tolerance: f64,
    },
    /// Gaussian estimate battery on extracted kernels.
    Estimates {
        space: SpaceConfig,
        #[serde(default)]
        source: Option<f64>,
        times: Vec<f64>,
        d_list: Vec<f64>,
        deltas: Vec<f64>,
        #[serde(default)]
        samples_per_time: Option<usize>,
    },
    /// Gaussian integrals over the space and outside balls.
    Lemma1 {
        space: SpaceConfig,
        #[serde(default)]
        center: Option<f64>,
        c: f64,
        t: f64,
        r: f64,
        #[serde(default = "default_tail_range")]
        tail_range: [f64; 2],
    },
    /// Kernel mass inside the critical annulus along a time sweep.
    Concentration {
        space: SpaceConfig,
        #[serde(default)]
        base_point: Option<f64>,
        times: Vec<f64>,
        #[serde(default)]
        phi: Phi,
        #[serde(default)]
        nu_prime: Option<f64>,
    },
    /// Gaps between a solution and the mass-weighted kernel. Either a model
    /// space with `initial_data`, or `planar` for off-centre data on the plane.
    Theorem1 {
        #[serde(default)]
        space: Option<SpaceConfig>,
        #[serde(default)]
        initial_data: Option<InitialData>,
        #[serde(default)]
        base_point: Option<f64>,
        #[serde(default)]
        times: Vec<f64>,
        #[serde(default)]
        phi: Phi,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default)]
        planar: Option<PlanarConfig>,
        #[serde(default)]
        rate_window: Option<[f64; 2]>,
    },
    /// Plateau of the scaled kernel difference on a two-ended space, with a
    /// one-ended control.
    Counterexample {
        space: SpaceConfig,
        x1: f64,
        x2: f64,
        times: Vec<f64>,
        window_start: f64,
        #[serde(default)]
        probes: Vec<f64>,
        #[serde(default)]
        control: Option<SpaceConfig>,
        #[serde(default)]
        control_probes: Option<[f64; 2]>,
    },
    /// The full acceptance battery.
    AcceptanceAll {},
}

fn default_accuracy() -> f64 {
    1e-3
}

fn default_tail_range() -> [f64; 2] {
    [2.0, 10.0]
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub spec: ExperimentSpec,
    #[serde(default)]
    pub steps_per_decade: Option<usize>,
    /// Seed for sample-point selection in estimate checks.
    #[serde(default)]
    pub seed: u64,
    /// Output directory relative to the output root; defaults to the
    /// experiment id.
    #[serde(default)]
    pub output_dir: Option<String>,
}

pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("kernel_accuracy", "numeric heat kernel against the Euclidean closed form"),
    ("estimates", "two-sided, upper, time-derivative, gradient and Hölder kernel estimates"),
    ("lemma1", "Gaussian integrals over the space and outside balls"),
    ("concentration", "kernel mass in the critical annulus along a time sweep"),
    ("theorem1", "L¹, weighted sup and Lᵖ gaps between a solution and M h_t"),
    ("counterexample", "plateau of t^{n/2}(h_t(x_t,x₁) − h_t(x_t,x₂)) on the two-ended space"),
    ("acceptance_all", "the full acceptance battery"),
];

impl ExperimentSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentSpec::KernelAccuracy { .. } => "kernel_accuracy",
            ExperimentSpec::Estimates { .. } => "estimates",
            ExperimentSpec::Lemma1 { .. } => "lemma1",
            ExperimentSpec::Concentration { .. } => "concentration",
            ExperimentSpec::Theorem1 { .. } => "theorem1",
            ExperimentSpec::Counterexample { .. } => "counterexample",
            ExperimentSpec::AcceptanceAll {} => "acceptance_all",
        }
    }
}

impl ExperimentConfig {
    pub fn new(spec: ExperimentSpec) -> Self {
        ExperimentConfig { spec, steps_per_decade: None, seed: 0, output_dir: None }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn output_dir(&self) -> String {
        self.output_dir.clone().unwrap_or_else(|| self.spec.id().to_string())
    }

    /// Checks that do not need the numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(s) = self.steps_per_decade {
            if s < heatlab::evolve::MIN_STEPS_PER_DECADE {
                return Err(CliError::Config(format!(
                    "steps_per_decade must be at least {}",
                    heatlab::evolve::MIN_STEPS_PER_DECADE
                )));
            }
        }
        let times_ok = |ts: &[f64]| !ts.is_empty() && ts.iter().all(|t| t.is_finite() && *t > 0.0);
        match &self.spec {
            ExperimentSpec::Estimates { times, d_list, deltas, .. } => {
                if !times_ok(times) || d_list.is_empty() || deltas.is_empty() {
                    return Err(CliError::Config("estimates needs positive times, d_list and deltas".into()));
                }
            }
            ExperimentSpec::Concentration { times, .. } | ExperimentSpec::Counterexample { times, .. } => {
                if !times_ok(times) {
                    return Err(CliError::Config("times must be a non-empty list of positive values".into()));
                }
            }
            ExperimentSpec::Theorem1 { space, initial_data, times, planar, .. } => match (space, planar) {
                (Some(_), None) => {
                    if initial_data.is_none() || !times_ok(times) {
                        return Err(CliError::Config("theorem1 on a model space needs initial_data and times".into()));
                    }
                }
                (None, Some(_)) => {}
                _ => return Err(CliError::Config("theorem1 needs exactly one of space and planar".into())),
            },
            _ => {}
        }
        Ok(())
    }

    pub fn model(&self, space: &SpaceConfig) -> Result<HeatModel<f64>, CliError> {
        let space = space.build::<f64>()?;
        let schedule = match self.steps_per_decade {
            Some(s) => TimeSchedule::with_steps(&space, s),
            None => TimeSchedule::for_space(&space),
        };
        Ok(HeatModel::with_schedule(space, schedule)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let text = r#"{
            "experiment": "kernel_accuracy",
            "space": {"kind": "euclidean_radial", "n": 2, "extent": 40.0, "points": 4000},
            "t": 1.0, "r_max": 4.0, "seed": 3
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.spec.id(), "kernel_accuracy");
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.output_dir(), "kernel_accuracy");
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_experiment_and_bad_fields() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        let e = ExperimentConfig::from_json(r#"{"experiment": "concentration", "space": {"kind": "euclidean_radial", "n": 2, "extent": 10.0, "points": 100}, "times": []}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::CONFIG);
        let e = ExperimentConfig::from_json(r#"{"experiment": "theorem1", "times": [1.0]}"#).unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn initial_data_and_phi_schema() {
        let text = r#"{
            "experiment": "theorem1",
            "space": {"kind": "euclidean_radial", "n": 3, "extent": 300.0, "points": 3000},
            "initial_data": {"kind": "bump", "shape": "triangle", "center": 0.0, "radius": 2.0, "mass": 1.0},
            "phi": {"kind": "power", "exponent": 0.25},
            "times": [100.0, 900.0]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        match cfg.spec {
            ExperimentSpec::Theorem1 { p, .. } => assert_eq!(p, 2.0),
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn shipped_configs_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= EXPERIMENTS.len());
    }
}
