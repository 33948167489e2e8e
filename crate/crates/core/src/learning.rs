//! Rule weight learning from a labeled interpretation.
//!
//! The log-likelihood gradient for rule `k` is the difference between its
//! summed distance under the observed labels and its expected summed
//! distance, and the expectation is approximated by the MAP state. Weights
//! descend along that difference and are projected onto `[floor, inf)`.

use std::fmt;

use crate::grounding::{GroundingContext, GroundingError};
use crate::inference::{map_inference_weighted, rule_distance_norms, InferenceConfig, InferenceError};
use crate::program::{Program, RuleWeight};
use crate::store::Interpretation;

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_floor: f64,
    /// Return the mean of the iterates instead of the last one.
    pub averaging: bool,
    pub inference: InferenceConfig,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            learning_rate: 0.1,
            iterations: 50,
            weight_floor: 1e-3,
            averaging: true,
            inference: InferenceConfig::default(),
        }
    }
}

/// One weight per soft rule, in program order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn from_program(program: &Program) -> Self {
        WeightVector { weights: program.soft_weights() }
    }

    /// Weights for every program rule, hard rules included.
    pub fn rule_weights(&self, program: &Program) -> Vec<RuleWeight> {
        let mut soft = self.weights.iter();
        program
            .rules
            .iter()
            .map(|r| match r.weight {
                RuleWeight::Hard => RuleWeight::Hard,
                RuleWeight::Soft(_) => RuleWeight::Soft(*soft.next().expect("one weight per soft rule")),
            })
            .collect()
    }

    /// `ruleIndex<TAB>weight` lines, where the index is the 0-based position
    /// of the rule in the program.
    pub fn to_tsv(&self, program: &Program) -> String {
        program
            .soft_rule_indices()
            .into_iter()
            .zip(&self.weights)
            .map(|(i, w)| format!("{i}\t{w}\n"))
            .collect()
    }

    pub fn from_tsv(program: &Program, text: &str) -> Result<Self, String> {
        let mut weights = program.soft_weights();
        let indices = program.soft_rule_indices();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(index), Some(weight), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(format!("line {}: expected `ruleIndex<TAB>weight`", n + 1));
            };
            let index: usize = index.trim().parse().map_err(|_| format!("line {}: bad rule index", n + 1))?;
            let weight: f64 = weight.trim().parse().map_err(|_| format!("line {}: bad weight", n + 1))?;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(format!("line {}: weights must be positive", n + 1));
            }
            let slot = indices
                .iter()
                .position(|&i| i == index)
                .ok_or_else(|| format!("line {}: rule {index} is not a soft rule", n + 1))?;
            weights[slot] = weight;
        }
        Ok(WeightVector { weights })
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.weights.iter().map(|w| format!("{w:.4}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Summed distance of the groundings of each soft rule, in soft-rule order.
pub fn soft_rule_norms(ctx: &GroundingContext<'_>, interp: &Interpretation) -> Result<Vec<f64>, GroundingError> {
    let norms = rule_distance_norms(ctx, interp)?;
    Ok(ctx.program().soft_rule_indices().into_iter().map(|i| norms[i]).collect())
}

/// Summed distance of all groundings of program rule `rule`.
pub fn rule_distance_norm(ctx: &GroundingContext<'_>, rule: usize, interp: &Interpretation) -> Result<f64, GroundingError> {
    Ok(rule_distance_norms(ctx, interp)?[rule])
}

/// `norm_k(observed) - norm_k(MAP under weights)` for every soft rule.
///
/// `evidence` fixes the known atoms for the MAP run; `observed` holds the
/// same evidence plus the labels.
pub fn gradient(
    ctx: &GroundingContext<'_>,
    weights: &WeightVector,
    evidence: &Interpretation,
    observed_norms: &[f64],
    config: &InferenceConfig,
) -> Result<Vec<f64>, InferenceError> {
    let map = map_inference_weighted(ctx, evidence, config, &weights.rule_weights(ctx.program()))?;
    let map_norms = soft_rule_norms(ctx, &map.interpretation)?;
    Ok(observed_norms.iter().zip(&map_norms).map(|(o, m)| o - m).collect())
}

/// Weights after each update, plus the returned (possibly averaged) vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub iterates: Vec<WeightVector>,
    pub result: WeightVector,
}

pub fn learn_weights(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    observed: &Interpretation,
    config: &LearningConfig,
) -> Result<WeightVector, InferenceError> {
    Ok(learn_weights_traced(ctx, evidence, observed, config)?.result)
}

pub fn learn_weights_traced(
    ctx: &GroundingContext<'_>,
    evidence: &Interpretation,
    observed: &Interpretation,
    config: &LearningConfig,
) -> Result<LearningTrace, InferenceError> {
    if !(config.learning_rate > 0.0) {
        return Err(InferenceError::Config("learning rate must be positive".into()));
    }
    let observed_norms = soft_rule_norms(ctx, observed)?;
    let mut weights = WeightVector::from_program(ctx.program());
    for w in &mut weights.weights {
        *w = w.max(config.weight_floor);
    }
    let mut iterates = Vec::with_capacity(config.iterations);
    let mut sum = vec![0.0; weights.weights.len()];
    for iteration in 0..config.iterations {
        let g = gradient(ctx, &weights, evidence, &observed_norms, &config.inference)?;
        for (w, gk) in weights.weights.iter_mut().zip(&g) {
            *w = (*w - config.learning_rate * gk).max(config.weight_floor);
        }
        log::debug!("learning iteration {}: weights {weights}", iteration + 1);
        for (s, w) in sum.iter_mut().zip(&weights.weights) {
            *s += w;
        }
        iterates.push(weights.clone());
    }
    let result = if config.averaging && !iterates.is_empty() {
        WeightVector { weights: sum.iter().map(|s| s / iterates.len() as f64).collect() }
    } else {
        weights
    };
    Ok(LearningTrace { iterates, result })
}
