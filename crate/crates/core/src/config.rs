//! Experiment configuration shared by the distinguisher, the verification
//! suite and the command-line runner.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::{OracleMode, PaddingMode};
use crate::prg::{ChallengeKind, Predicate};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauPolicy {
    #[default]
    PaperFormula,
    Explicit(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaPolicy {
    #[default]
    PaperFormula,
    Explicit(f64),
}

/// Loss threshold below which the distinguisher answers "pseudorandom".
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// `2/n`.
    Paper,
    /// Half the expected random-challenge loss, `p·b̂²/4`.
    Midpoint,
    /// `2/n` when it lies below `p·b̂²/2`, the midpoint otherwise.
    #[default]
    Auto,
    Explicit(f64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    /// Returns the perturbed target itself; needs the challenge secret.
    #[default]
    Oracle,
    Constant {
        #[serde(default)]
        value: f64,
    },
    RandomFeatures {
        #[serde(default = "default_width")]
        width: usize,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
}

fn default_width() -> usize {
    256
}

fn default_ridge() -> f64 {
    1e-6
}

impl LearnerSpec {
    /// `oracle`, `constant[:v]` or `random-features[:width[:ridge]]`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize| -> Result<Option<f64>> {
            args.get(i)
                .map(|a| {
                    a.parse::<f64>()
                        .map_err(|_| invalid(format!("bad learner argument '{a}'")))
                })
                .transpose()
        };
        let spec = match name {
            "oracle" => LearnerSpec::Oracle,
            "constant" | "zero" => LearnerSpec::Constant {
                value: num(0)?.unwrap_or(0.0),
            },
            "random-features" | "random_features" => LearnerSpec::RandomFeatures {
                width: num(0)?.map_or(default_width(), |w| w as usize),
                ridge: num(1)?.unwrap_or(default_ridge()),
            },
            other => return Err(invalid(format!("unknown learner '{other}'"))),
        };
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match self {
            LearnerSpec::Oracle => "oracle".into(),
            LearnerSpec::Constant { value } => format!("constant:{value}"),
            LearnerSpec::RandomFeatures { width, ridge } => {
                format!("random-features:{width}:{ridge}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub predicate: String,
    pub mode: OracleMode,
    /// Stretch exponent; when set, `m + holdout ≤ n^s` is enforced.
    pub s: Option<f64>,
    /// Learner sample budget.
    pub m: usize,
    pub holdout_cap: usize,
    pub tau_policy: TauPolicy,
    pub omega_policy: OmegaPolicy,
    pub threshold_policy: ThresholdPolicy,
    pub learner: LearnerSpec,
    pub trials: usize,
    pub seed: u64,
    /// Target accuracy, `1/n` when unset.
    pub epsilon: Option<f64>,
    pub padding: PaddingMode,
    pub kind: ChallengeKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 32,
            k: 5,
            predicate: "xor-maj(2,3)".into(),
            mode: OracleMode::Theorem1,
            s: None,
            m: 2000,
            holdout_cap: 10_000,
            tau_policy: TauPolicy::PaperFormula,
            omega_policy: OmegaPolicy::PaperFormula,
            threshold_policy: ThresholdPolicy::Auto,
            learner: LearnerSpec::Oracle,
            trials: 1,
            seed: 0,
            epsilon: None,
            padding: PaddingMode::Lazy,
            kind: ChallengeKind::Pseudorandom,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(invalid(format!(
                "need n >= k >= 1, got n = {}, k = {}",
                self.n, self.k
            )));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.holdout_cap == 0 {
            return Err(invalid("holdout_cap must be at least 1"));
        }
        let p = self.predicate()?;
        if p.k() != self.k {
            return Err(invalid(format!(
                "predicate {} has arity {}, but k = {}",
                p.name(),
                p.k(),
                self.k
            )));
        }
        if let Some(s) = self.s {
            let total = (self.m + self.holdout_size()) as f64;
            if total > (self.n as f64).powf(s) {
                return Err(invalid(format!(
                    "m + holdout = {total} exceeds n^s = {}",
                    (self.n as f64).powf(s)
                )));
            }
        }
        if let TauPolicy::Explicit(t) = self.tau_policy {
            if t.is_nan() || t < 0.0 {
                return Err(invalid("explicit tau must be non-negative"));
            }
        }
        if let OmegaPolicy::Explicit(w) = self.omega_policy {
            if w.is_nan() || w < 0.0 {
                return Err(invalid("explicit omega must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn predicate(&self) -> Result<Predicate> {
        Predicate::parse(&self.predicate)
    }

    /// `min(n³, holdout_cap)`.
    pub fn holdout_size(&self) -> usize {
        self.n.saturating_pow(3).min(self.holdout_cap)
    }

    /// Challenge length that covers every oracle call of one run.
    pub fn challenge_len(&self) -> usize {
        self.m + self.holdout_size()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1.0 / self.n as f64)
    }
}
