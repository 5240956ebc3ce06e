//! Modality-curriculum schedule and flow-matching objective as plain functions.
//!
//! Training starts with the visual scaffold (depth video plus edited keyframe) in
//! the conditioning and anneals the probability of providing it down to zero over a
//! warm-up window. The regression target pulls the noised latent back towards the
//! clean one along the linear path `z_t = (1 - t) z0 + t eps`.

use serde::{Deserialize, Serialize};

use crate::digest::{unit_interval, KeyedHash};

pub const DEFAULT_WARMUP_STEPS: u64 = 5_000;
pub const DEFAULT_TOTAL_STEPS: u64 = 16_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MathError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("t = {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("cannot parse vector: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnealShape {
    #[default]
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSchedule {
    pub warmup_steps: u64,
    pub total_steps: u64,
    pub shape: AnnealShape,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            warmup_steps: DEFAULT_WARMUP_STEPS,
            total_steps: DEFAULT_TOTAL_STEPS,
            shape: AnnealShape::Linear,
        }
    }
}

impl CurriculumSchedule {
    pub fn new(warmup_steps: u64, total_steps: u64) -> Result<Self, MathError> {
        let s = Self {
            warmup_steps,
            total_steps,
            shape: AnnealShape::Linear,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), MathError> {
        if self.warmup_steps == 0 || self.warmup_steps > self.total_steps {
            return Err(MathError::InvalidSchedule(format!(
                "need 0 < warmup_steps ({}) <= total_steps ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        Ok(())
    }
}

/// Probability of conditioning on the visual scaffold at `step`.
pub fn scaffold_probability(step: u64, schedule: &CurriculumSchedule) -> f64 {
    match schedule.shape {
        AnnealShape::Linear => {
            if step >= schedule.warmup_steps {
                0.0
            } else {
                1.0 - step as f64 / schedule.warmup_steps as f64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Conditioning {
    TextOnly,
    TextPlusScaffold,
}

/// Draws the conditioning for one training sample; a pure function of
/// `(step, seed)`.
pub fn sample_scaffold(step: u64, schedule: &CurriculumSchedule, seed: u64) -> Conditioning {
    let p = scaffold_probability(step, schedule);
    let u = unit_interval(
        KeyedHash::new("ditto.curriculum.scaffold")
            .u64(seed)
            .u64(step)
            .words()[0],
    );
    if u < p {
        Conditioning::TextPlusScaffold
    } else {
        Conditioning::TextOnly
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub z0: Vec<f64>,
    pub eps: Vec<f64>,
    pub t: f64,
    pub conditioning: Conditioning,
}

impl FlowSample {
    pub fn new(z0: Vec<f64>, eps: Vec<f64>, t: f64, conditioning: Conditioning) -> Result<Self, MathError> {
        if z0.len() != eps.len() {
            return Err(MathError::DimensionMismatch(z0.len(), eps.len()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(MathError::TimeOutOfRange(t));
        }
        Ok(Self {
            z0,
            eps,
            t,
            conditioning,
        })
    }

    pub fn noised(&self) -> Vec<f64> {
        interpolate(&self.z0, &self.eps, self.t)
    }

    /// Regression target `z0 - z_t`.
    pub fn target(&self) -> Vec<f64> {
        self.z0
            .iter()
            .zip(self.noised())
            .map(|(a, b)| a - b)
            .collect()
    }
}

/// `(1 - t) z0 + t eps`, elementwise.
pub fn interpolate(z0: &[f64], eps: &[f64], t: f64) -> Vec<f64> {
    z0.iter()
        .zip(eps)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// Squared error between the predicted field and `z0 - z_t`.
pub fn flow_matching_loss(predicted: &[f64], sample: &FlowSample) -> Result<f64, MathError> {
    flow_matching_loss_with(predicted, sample, Reduction::Sum)
}

pub fn flow_matching_loss_with(
    predicted: &[f64],
    sample: &FlowSample,
    reduction: Reduction,
) -> Result<f64, MathError> {
    if predicted.len() != sample.z0.len() {
        return Err(MathError::DimensionMismatch(predicted.len(), sample.z0.len()));
    }
    let sum: f64 = predicted
        .iter()
        .zip(sample.target())
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok(match reduction {
        Reduction::Sum => sum,
        Reduction::Mean if predicted.is_empty() => 0.0,
        Reduction::Mean => sum / predicted.len() as f64,
    })
}

/// Gradient of the summed loss with respect to the prediction: `2 (v - target)`.
pub fn flow_matching_gradient(predicted: &[f64], sample: &FlowSample) -> Result<Vec<f64>, MathError> {
    if predicted.len() != sample.z0.len() {
        return Err(MathError::DimensionMismatch(predicted.len(), sample.z0.len()));
    }
    Ok(predicted
        .iter()
        .zip(sample.target())
        .map(|(p, g)| 2.0 * (p - g))
        .collect())
}

/// Parses whitespace- or comma-separated reals.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, MathError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: f64 = t
                .parse()
                .map_err(|_| MathError::Parse(format!("{t:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(MathError::Parse(format!("{t:?} is not finite")))
            }
        })
        .collect()
}
