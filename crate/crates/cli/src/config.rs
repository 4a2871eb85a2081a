//! JSON run configuration: parsing, schema checks and conversion to a
//! [`DesignConfig64`].

use std::fmt;
use std::path::Path;

use bandit_ae::{
    DesignConfig64, ExpansionSettings, IsSettings, McSettings, NoiseModel64, Policy64,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const DEFAULT_ALPHAS: [f64; 4] = [0.025, 0.05, 0.95, 0.975];
const DEFAULT_MIN_ARM_COUNT: usize = 5;
const DEFAULT_SEED: u64 = 20_240_411;

const REQUIRED: [&str; 5] = ["stages", "n", "noise", "stage1_probs", "stage2_policy"];
const OPTIONAL: [&str; 9] = [
    "min_arm_count",
    "expansion",
    "is",
    "mc",
    "alphas",
    "seed",
    "title",
    "caption",
    "notes",
];

/// One schema problem, tied to the top-level key it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error("invalid config ({}): {}", keys_of(.0).join(", "), DisplayProblems(.0))]
    Schema(Vec<Problem>),
}

impl ConfigError {
    /// Offending top-level keys, for schema errors.
    pub fn keys(&self) -> Vec<String> {
        match self {
            ConfigError::Schema(p) => keys_of(p),
            _ => Vec::new(),
        }
    }
}

fn keys_of(problems: &[Problem]) -> Vec<String> {
    let mut keys: Vec<String> = problems.iter().map(|p| p.key.clone()).collect();
    keys.dedup();
    keys
}

struct DisplayProblems<'a>(&'a [Problem]);

impl fmt::Display for DisplayProblems<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", p.key, p.message)?;
        }
        Ok(())
    }
}

/// Noise may be one model for all stages or one per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Shared(NoiseModel64),
    PerStage(Vec<NoiseModel64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsSpec {
    draws: usize,
    scale_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct McSpec {
    reps: usize,
}

/// The effective configuration of a run, after command-line overrides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub stages: usize,
    pub n: Vec<usize>,
    pub noise: NoiseSpec,
    pub stage1_probs: [f64; 2],
    pub stage2_policy: Policy64,
    pub min_arm_count: usize,
    pub expansion: ExpansionSettings,
    pub is: IsSettings<f64>,
    pub mc: McSettings,
    pub alphas: Vec<f64>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub is_draws: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str, problems: &mut Vec<Problem>) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            problems.push(Problem {
                key: key.into(),
                message: e.to_string(),
            });
            None
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(ConfigError::Schema(vec![Problem {
                key: "<root>".into(),
                message: "expected a JSON object".into(),
            }]));
        };
        let mut problems = Vec::new();
        for key in REQUIRED {
            if !obj.contains_key(key) {
                problems.push(Problem {
                    key: key.into(),
                    message: "missing required key".into(),
                });
            }
        }
        for key in obj.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                problems.push(Problem {
                    key: key.clone(),
                    message: "unknown key".into(),
                });
            }
        }

        let stages: Option<usize> = field(&obj, "stages", &mut problems);
        let n: Option<Vec<usize>> = field(&obj, "n", &mut problems);
        let noise: Option<NoiseSpec> = field(&obj, "noise", &mut problems);
        let stage1_probs: Option<[f64; 2]> = field(&obj, "stage1_probs", &mut problems);
        let stage2_policy: Option<Policy64> = field(&obj, "stage2_policy", &mut problems);
        let min_arm_count = field(&obj, "min_arm_count", &mut problems).unwrap_or(DEFAULT_MIN_ARM_COUNT);
        let expansion: ExpansionSettings = field(&obj, "expansion", &mut problems).unwrap_or_default();
        let is: IsSpec = field(&obj, "is", &mut problems).unwrap_or(IsSpec {
            draws: 200_000,
            scale_p: 2.0,
        });
        let mc: McSpec = field(&obj, "mc", &mut problems).unwrap_or(McSpec { reps: 500_000 });
        let alphas: Vec<f64> = field(&obj, "alphas", &mut problems).unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
        let seed = field(&obj, "seed", &mut problems).unwrap_or(DEFAULT_SEED);
        let title = field(&obj, "title", &mut problems);
        let caption = field(&obj, "caption", &mut problems);
        let notes = field(&obj, "notes", &mut problems).unwrap_or_default();

        let (Some(stages), Some(n), Some(noise), Some(stage1_probs), Some(stage2_policy)) =
            (stages, n, noise, stage1_probs, stage2_policy)
        else {
            return Err(ConfigError::Schema(problems));
        };
        if !problems.is_empty() {
            return Err(ConfigError::Schema(problems));
        }
        let cfg = RunConfig {
            stages,
            n,
            noise,
            stage1_probs,
            stage2_policy,
            min_arm_count,
            expansion,
            is: IsSettings {
                draws: is.draws,
                scale_p: is.scale_p,
            },
            mc: McSettings { reps: mc.reps },
            alphas,
            seed,
            title,
            caption,
            notes,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Cross-key checks and the design's own validation.
    pub fn check(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut bad = |key: &str, message: String| {
            problems.push(Problem {
                key: key.into(),
                message,
            })
        };
        if self.stages == 0 {
            bad("stages", "at least one stage is required".into());
        }
        if self.n.len() != self.stages {
            bad("n", format!("expected {} batch sizes, got {}", self.stages, self.n.len()));
        }
        if let NoiseSpec::PerStage(v) = &self.noise {
            if v.len() != self.stages {
                bad("noise", format!("expected 1 or {} noise models, got {}", self.stages, v.len()));
            }
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            bad("alphas", format!("levels must lie in (0,1), got {:?}", self.alphas));
        }
        if !problems.is_empty() {
            return Err(ConfigError::Schema(problems));
        }
        if let Err(e) = self.design().validate() {
            let key = match e {
                bandit_ae::Error::InfeasibleDesign { .. } => "min_arm_count",
                _ => self.blame(&e).unwrap_or("<design>"),
            };
            return Err(ConfigError::Schema(vec![Problem {
                key: key.into(),
                message: e.to_string(),
            }]));
        }
        Ok(())
    }

    /// The config key a design validation error most likely stems from.
    fn blame(&self, e: &bandit_ae::Error) -> Option<&'static str> {
        let msg = e.to_string();
        if msg.contains("scale_p") || msg.contains("is.draws") {
            Some("is")
        } else if msg.contains("gamma") || msg.contains("mixture") {
            Some("noise")
        } else if msg.contains("clip") || self.stage2_policy.validate().is_err() {
            Some("stage2_policy")
        } else if msg.contains("assignment probabilities") {
            Some("stage1_probs")
        } else {
            None
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.reps {
            self.mc.reps = r;
        }
        if let Some(d) = o.is_draws {
            self.is.draws = d;
        }
        if let Some(a) = &o.alphas {
            self.alphas = a.clone();
        }
        self.check()
    }

    pub fn design(&self) -> DesignConfig64 {
        let noise = match &self.noise {
            NoiseSpec::Shared(m) => vec![*m],
            NoiseSpec::PerStage(v) => v.clone(),
        };
        DesignConfig64 {
            batch_sizes: self.n.clone(),
            stage1_probs: self.stage1_probs,
            later_policy: self.stage2_policy,
            noise,
            min_arm_count: self.min_arm_count,
            expansion: self.expansion,
            is: self.is,
            mc: self.mc,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes").to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: &str = r#"{
        "stages": 2, "n": [50, 50],
        "noise": {"family": "gamma", "shape": 3, "scale": 2},
        "stage1_probs": [0.5, 0.5],
        "stage2_policy": {"type": "eps_greedy", "clip": 0.2}
    }"#;

    #[test]
    fn defaults_fill_optional_keys() {
        let c = RunConfig::from_json(GAMMA).unwrap();
        assert_eq!(c.min_arm_count, 5);
        assert_eq!(c.alphas, DEFAULT_ALPHAS.to_vec());
        assert_eq!(c.is.draws, 200_000);
        assert_eq!(c.design().stages(), 2);
    }

    #[test]
    fn missing_noise_is_named() {
        let mut v: Value = serde_json::from_str(GAMMA).unwrap();
        v.as_object_mut().unwrap().remove("noise");
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.keys(), vec!["noise".to_string()]);
        assert!(err.to_string().contains("noise"));
    }

    #[test]
    fn all_offending_keys_are_listed() {
        let text = r#"{"stages": 2, "n": [50], "noise": {"family": "gamma", "shape": -1, "scale": 2},
            "stage1_probs": [0.5, 0.5], "stage2_policy": {"type": "eps_greedy", "clip": 0.2}, "colour": 1}"#;
        let err = RunConfig::from_json(text).unwrap_err();
        assert!(err.keys().contains(&"colour".to_string()), "{err}");
        let text = text.replace(", \"colour\": 1", "");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert_eq!(err.keys(), vec!["n".to_string()]);
    }

    #[test]
    fn infeasible_floor_is_reported() {
        let text = GAMMA.replace("\"stages\": 2", "\"stages\": 2, \"min_arm_count\": 30");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert_eq!(err.keys(), vec!["min_arm_count".to_string()]);
    }

    #[test]
    fn digest_tracks_overrides() {
        let mut c = RunConfig::from_json(GAMMA).unwrap();
        let d0 = c.digest();
        assert_eq!(d0, RunConfig::from_json(GAMMA).unwrap().digest());
        c.apply(&Overrides {
            seed: Some(1),
            ..Overrides::default()
        })
        .unwrap();
        assert_ne!(d0, c.digest());
    }
}
