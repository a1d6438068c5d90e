//! Scalar training signals from batches of reward vectors.
//!
//! Each volume-style method maps the `k_hat` reward vectors generated from one
//! prompt to a per-sample reward and a batch scalar. MGDA does not scalarize;
//! its variant exists so a method can be named uniformly, and asking it to
//! aggregate is an error.

use alloc::vec;
use alloc::vec::Vec;

use crate::pareto::{hypervolume, PointSet, ReferencePoint, RewardVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AggregationMethod {
    Average,
    Product,
    Hvi(ReferencePoint),
    MgdaPassthrough,
}

impl AggregationMethod {
    pub fn assign(&self, batch: &[RewardVector]) -> Result<RewardAssignment> {
        match self {
            Self::Average => aggregate_average(batch),
            Self::Product => aggregate_product(batch),
            Self::Hvi(reference) => aggregate_hvi(batch, reference),
            Self::MgdaPassthrough => Err(Error::PassthroughAggregation),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardAssignment {
    /// One reward per sample, aligned with the input batch.
    pub per_sample: Vec<f64>,
    pub batch_scalar: f64,
}

fn batch_dim(batch: &[RewardVector]) -> Result<usize> {
    let first = batch.first().ok_or(Error::Empty("reward batch"))?;
    let dim = first.dim();
    for r in batch {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.dim(),
            });
        }
    }
    Ok(dim)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn from_per_sample(per_sample: Vec<f64>) -> RewardAssignment {
    let batch_scalar = mean(&per_sample);
    RewardAssignment {
        per_sample,
        batch_scalar,
    }
}

/// Mean over objectives for each sample; batch scalar is the mean of those.
pub fn aggregate_average(batch: &[RewardVector]) -> Result<RewardAssignment> {
    let m = batch_dim(batch)? as f64;
    let per_sample = batch
        .iter()
        .map(|r| r.values().iter().sum::<f64>() / m)
        .collect();
    Ok(from_per_sample(per_sample))
}

/// Product over objectives for each sample; batch scalar is the expected
/// product.
pub fn aggregate_product(batch: &[RewardVector]) -> Result<RewardAssignment> {
    batch_dim(batch)?;
    let per_sample = batch.iter().map(|r| r.values().iter().product()).collect();
    Ok(from_per_sample(per_sample))
}

/// Hypervolume of the whole batch, credited identically to every sample.
pub fn aggregate_hvi(
    batch: &[RewardVector],
    reference: &ReferencePoint,
) -> Result<RewardAssignment> {
    batch_dim(batch)?;
    let set = PointSet::new(batch.to_vec())?;
    let batch_scalar = hypervolume(&set, reference)?;
    Ok(RewardAssignment {
        per_sample: vec![batch_scalar; batch.len()],
        batch_scalar,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvaluationMetrics {
    pub per_objective_means: Vec<f64>,
    pub mean_of_means: f64,
    pub expected_product: f64,
    pub hvi: f64,
}

impl EvaluationMetrics {
    pub fn min_objective(&self) -> f64 {
        self.per_objective_means
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_objective(&self) -> f64 {
        self.per_objective_means
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn evaluation_metrics(
    batch: &[RewardVector],
    reference: &ReferencePoint,
) -> Result<EvaluationMetrics> {
    let m = batch_dim(batch)?;
    let n = batch.len() as f64;
    let mut per_objective_means = vec![0.0; m];
    for r in batch {
        for (acc, v) in per_objective_means.iter_mut().zip(r.values()) {
            *acc += v;
        }
    }
    for acc in &mut per_objective_means {
        *acc /= n;
    }
    let mean_of_means = mean(&per_objective_means);
    let expected_product = aggregate_product(batch)?.batch_scalar;
    let hvi = aggregate_hvi(batch, reference)?.batch_scalar;
    Ok(EvaluationMetrics {
        per_objective_means,
        mean_of_means,
        expected_product,
        hvi,
    })
}
