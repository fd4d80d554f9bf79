//! Continued pre-training hyperparameters as a validated, serializable
//! record, plus the derived token-budget check.
//!
//! The numeric format field is metadata only — nothing in this toolkit
//! performs training arithmetic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adamw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub sequence_length: u64,
    pub batch_size: u64,
    pub peak_learning_rate: f64,
    pub warmup_steps: u64,
    pub optimization_steps: u64,
    pub scheduler: Scheduler,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub numeric_format: String,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            sequence_length: 128,
            batch_size: 256,
            peak_learning_rate: 3e-4,
            warmup_steps: 24_000,
            optimization_steps: 500_000,
            scheduler: Scheduler::Linear,
            optimizer: Optimizer::Adamw,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            numeric_format: "bfloat16".to_string(),
        }
    }
}

/// One failed constraint: which field and what it must satisfy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigViolation {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

/// Check every invariant; an empty list means the config is valid.
pub fn validate_pretrain_config(cfg: &PretrainConfig) -> Vec<ConfigViolation> {
    let mut violations = Vec::new();
    let mut violate = |field: &str, constraint: String| {
        violations.push(ConfigViolation {
            field: field.to_string(),
            constraint,
        });
    };

    if cfg.sequence_length == 0 {
        violate("sequence_length", "must be positive".to_string());
    }
    if cfg.batch_size == 0 {
        violate("batch_size", "must be positive".to_string());
    }
    if cfg.optimization_steps == 0 {
        violate("optimization_steps", "must be positive".to_string());
    }
    if !(cfg.peak_learning_rate.is_finite() && cfg.peak_learning_rate > 0.0) {
        violate(
            "peak_learning_rate",
            format!("must be a positive real, got {}", cfg.peak_learning_rate),
        );
    }
    if cfg.warmup_steps > cfg.optimization_steps {
        violate(
            "warmup_steps",
            format!(
                "must not exceed optimization_steps ({} > {})",
                cfg.warmup_steps, cfg.optimization_steps
            ),
        );
    }
    for (name, value) in [("beta1", cfg.beta1), ("beta2", cfg.beta2)] {
        if !(value.is_finite() && value > 0.0 && value < 1.0) {
            violate(name, format!("must lie in (0, 1), got {value}"));
        }
    }
    if cfg.beta1 >= cfg.beta2 {
        violate(
            "beta1",
            format!("must be less than beta2 ({} >= {})", cfg.beta1, cfg.beta2),
        );
    }
    if !(cfg.epsilon.is_finite() && cfg.epsilon > 0.0) {
        violate("epsilon", format!("must be positive, got {}", cfg.epsilon));
    }
    if !(cfg.weight_decay.is_finite() && cfg.weight_decay >= 0.0) {
        violate(
            "weight_decay",
            format!("must be non-negative, got {}", cfg.weight_decay),
        );
    }
    if cfg.numeric_format.is_empty() {
        violate("numeric_format", "must be non-empty".to_string());
    }
    violations
}

/// Total training tokens: optimization_steps * batch_size * sequence_length.
pub fn token_budget(cfg: &PretrainConfig) -> u64 {
    cfg.optimization_steps
        .saturating_mul(cfg.batch_size)
        .saturating_mul(cfg.sequence_length)
}
