//! Experiment configuration: a single JSON document with unknown keys
//! rejected, plus named presets for the standard figure settings.

use serde::Deserialize;

use sliceqec_core::codes::{code_by_name, SubsystemCode};
use sliceqec_core::evaluate::TrajectoryMode;
use sliceqec_core::noise::{
    epsilon_relation, infidelity_to_epsilon, DephasingParams, OverrotationParams,
};
use sliceqec_core::slicer::{BaselineConvention, GateSet, SlicingMode};

use crate::{LabError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: String,
    pub gate_set: String,
    #[serde(default = "default_slicing")]
    pub slicing: String,
    #[serde(default)]
    pub baseline: Option<String>,
    pub noise: NoiseConfig,
    pub evaluator: EvaluatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_slicing() -> String {
    "sliced".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kappas: Option<Vec<f64>>,
    #[serde(default)]
    pub kappa_range: Option<KappaRange>,
    #[serde(default)]
    pub infidelity_2q: Option<f64>,
    #[serde(default)]
    pub eps: Option<EpsConfig>,
    #[serde(default)]
    pub linked: bool,
    /// eps3 = eps2; the native three-body study convention.
    #[serde(default)]
    pub equal_eps3: bool,
    #[serde(default)]
    pub dephasing: Option<DephasingConfig>,
    /// Compile single-qubit rotations into the three-pulse composite form.
    #[serde(default)]
    pub sk1: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingConfig {
    #[serde(default = "default_t1q")]
    pub t_1q: f64,
    #[serde(default = "default_t2q")]
    pub t_2q: f64,
    #[serde(default = "default_t2_time")]
    pub t2_time: f64,
}

fn default_t1q() -> f64 {
    1.0
}
fn default_t2q() -> f64 {
    10.0
}
fn default_t2_time() -> f64 {
    2.0e4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorConfig {
    Exact,
    Trajectories {
        rounds: usize,
        shots: usize,
        seed: u64,
        mode: String,
        #[serde(default = "default_true")]
        correct_each_round: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub svg: Option<String>,
    #[serde(default)]
    pub circuit: Option<String>,
}

/// Which modes a multi-round run covers.
#[derive(Debug, Clone)]
pub enum MultiroundModes {
    One(TrajectoryMode),
    All,
}

/// Fully validated configuration with resolved domain objects.
pub struct Resolved {
    pub code: SubsystemCode,
    pub gate_set: GateSet,
    pub slicing: SlicingMode,
    pub baseline: BaselineConvention,
    pub kappas: Vec<f64>,
    /// Error angles with a placeholder kappa; sweep points override it.
    pub params: OverrotationParams,
    pub dephasing: Option<DephasingParams>,
    pub sk1: bool,
    pub evaluator: EvaluatorConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Built-in presets reproducing the standard figure settings.
    pub fn preset(name: &str) -> Result<Self> {
        let json = match name {
            // Native three-body Surface-17 at shared gate infidelity 1e-3.
            "fig-surface3body" => {
                r#"{
                    "code": "surface17",
                    "gate_set": "native3body",
                    "slicing": "sliced",
                    "noise": {
                        "kappa_range": {"start": 0.0, "stop": 1.0, "points": 11},
                        "infidelity_2q": 1.0e-3,
                        "equal_eps3": true
                    },
                    "evaluator": {"kind": "exact"},
                    "output": {"csv": "surface3body.csv", "svg": "surface3body.svg", "circuit": "surface3body.txt"}
                }"#
            }
            // Two-body ion-trap Surface-17 at infidelity 5e-4 with linked
            // one-qubit overrotations.
            "fig-surface2body" => {
                r#"{
                    "code": "surface17",
                    "gate_set": "iontrap2body",
                    "slicing": "sliced",
                    "noise": {
                        "kappa_range": {"start": 0.0, "stop": 1.0, "points": 11},
                        "infidelity_2q": 5.0e-4,
                        "linked": true
                    },
                    "evaluator": {"kind": "exact"},
                    "output": {"csv": "surface2body.csv", "svg": "surface2body.svg", "circuit": "surface2body.txt"}
                }"#
            }
            "fig-baconshor2body" => {
                r#"{
                    "code": "baconshor13",
                    "gate_set": "iontrap2body",
                    "slicing": "sliced",
                    "noise": {
                        "kappa_range": {"start": 0.0, "stop": 1.0, "points": 11},
                        "infidelity_2q": 5.0e-4,
                        "linked": true
                    },
                    "evaluator": {"kind": "exact"},
                    "output": {"csv": "baconshor2body.csv", "svg": "baconshor2body.svg", "circuit": "baconshor2body.txt"}
                }"#
            }
            "fig-baconshor-multiround" => {
                r#"{
                    "code": "baconshor13",
                    "gate_set": "iontrap2body",
                    "slicing": "sliced",
                    "noise": {
                        "kappas": [1.0],
                        "infidelity_2q": 5.0e-4,
                        "linked": true
                    },
                    "evaluator": {"kind": "trajectories", "rounds": 10, "shots": 10000, "seed": 7, "mode": "all"},
                    "output": {"csv": "baconshor_multiround.csv"}
                }"#
            }
            "fig-fullopt-dephasing" => {
                r#"{
                    "code": "baconshor13",
                    "gate_set": "iontrap2body",
                    "slicing": "sliced",
                    "noise": {
                        "kappa_range": {"start": 0.0, "stop": 1.0, "points": 11},
                        "infidelity_2q": 1.0e-3,
                        "linked": true,
                        "dephasing": {}
                    },
                    "evaluator": {"kind": "exact"},
                    "output": {"csv": "fullopt_dephasing.csv", "svg": "fullopt_dephasing.svg"}
                }"#
            }
            "fig-sk1" => {
                r#"{
                    "code": "baconshor13",
                    "gate_set": "iontrap2body",
                    "slicing": "sliced",
                    "noise": {
                        "kappa_range": {"start": 0.985, "stop": 1.0, "points": 7},
                        "infidelity_2q": 1.0e-3,
                        "linked": true,
                        "sk1": true
                    },
                    "evaluator": {"kind": "exact"},
                    "output": {"csv": "sk1.csv", "svg": "sk1.svg"}
                }"#
            }
            other => {
                return Err(LabError::Config(format!("unknown preset `{other}`")));
            }
        };
        Self::from_json(json)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let code = code_by_name(&self.code)?;
        let gate_set = GateSet::from_name(&self.gate_set)?;
        let slicing = SlicingMode::from_name(&self.slicing)?;
        let baseline = match self.baseline.as_deref() {
            None | Some("all-positive") => BaselineConvention::AllPositive,
            Some("figure1-default") => BaselineConvention::Figure1Default,
            Some(other) => {
                return Err(LabError::Config(format!(
                    "unknown baseline convention `{other}`"
                )));
            }
        };

        let kappas = match (&self.noise.kappas, &self.noise.kappa_range) {
            (Some(list), None) => {
                if list.is_empty() {
                    return Err(LabError::Config("empty kappa list".into()));
                }
                let mut v = list.clone();
                v.sort_by(f64::total_cmp);
                v
            }
            (None, Some(r)) => {
                if r.points < 1 || r.stop < r.start {
                    return Err(LabError::Config("bad kappa range".into()));
                }
                if r.points == 1 {
                    vec![r.start]
                } else {
                    (0..r.points)
                        .map(|i| {
                            r.start + (r.stop - r.start) * i as f64 / (r.points - 1) as f64
                        })
                        .collect()
                }
            }
            _ => {
                return Err(LabError::Config(
                    "give exactly one of noise.kappas / noise.kappa_range".into(),
                ));
            }
        };
        for k in &kappas {
            if !(0.0..=1.0).contains(k) {
                return Err(LabError::Config(format!("kappa {k} outside [0, 1]")));
            }
        }

        let params = match (&self.noise.infidelity_2q, &self.noise.eps) {
            (Some(infid), None) => {
                let eps2 = infidelity_to_epsilon(*infid)?;
                let eps1 = if self.noise.linked {
                    sliceqec_core::noise::epsilon_relation_inverse(eps2)
                } else {
                    0.0
                };
                let eps3 = eps2;
                let mut p = OverrotationParams::new(0.0, eps1, eps2, eps3)?;
                p.linked = self.noise.linked;
                p
            }
            (None, Some(e)) => {
                if self.noise.linked
                    && (epsilon_relation(e.eps1) - e.eps2).abs() > 1e-12
                {
                    return Err(LabError::Config(
                        "linked flag set but eps2 != (1 + eps1)^2 - 1".into(),
                    ));
                }
                let eps3 = if self.noise.equal_eps3 { e.eps2 } else { e.eps3 };
                let mut p = OverrotationParams::new(0.0, e.eps1, e.eps2, eps3)?;
                p.linked = self.noise.linked;
                p
            }
            _ => {
                return Err(LabError::Config(
                    "give exactly one of noise.infidelity_2q / noise.eps".into(),
                ));
            }
        };

        if self.noise.sk1 && gate_set != GateSet::IonTrap2Body {
            return Err(LabError::Config(
                "the composite-pulse option applies to the two-body gate set only".into(),
            ));
        }

        let dephasing = self.noise.dephasing.map(|d| DephasingParams {
            t_1q: d.t_1q,
            t_2q: d.t_2q,
            t2_time: d.t2_time,
        });

        Ok(Resolved {
            code,
            gate_set,
            slicing,
            baseline,
            kappas,
            params,
            dephasing,
            sk1: self.noise.sk1,
            evaluator: self.evaluator.clone(),
            output: self.output.clone(),
        })
    }
}

impl Resolved {
    pub fn multiround_modes(&self) -> Result<(usize, usize, u64, bool, MultiroundModes)> {
        match &self.evaluator {
            EvaluatorConfig::Exact => Err(LabError::Config(
                "multiround needs an evaluator of kind `trajectories`".into(),
            )),
            EvaluatorConfig::Trajectories {
                rounds,
                shots,
                seed,
                mode,
                correct_each_round,
            } => {
                let modes = if mode == "all" {
                    MultiroundModes::All
                } else {
                    MultiroundModes::One(TrajectoryMode::from_name(mode)?)
                };
                Ok((*rounds, *shots, *seed, *correct_each_round, modes))
            }
        }
    }
}
