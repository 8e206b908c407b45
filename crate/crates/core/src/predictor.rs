//! Pluggable predictors used for black-box dimensionality reduction, loss
//! scoring and query-by-committee.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sample::{CategoricalDistribution, Sample};

/// Probability floor applied before taking logarithms.
pub const LOGSCORE_EPSILON: f64 = 1e-12;

/// log2 p(y), clamped at log2(epsilon) when p(y) is zero.
pub fn logscore_with(pred: &CategoricalDistribution, y: usize, epsilon: f64) -> f64 {
    let p = pred.probs().get(y).copied().unwrap_or(0.0);
    p.max(epsilon).log2()
}

pub fn logscore(pred: &CategoricalDistribution, y: usize) -> f64 {
    logscore_with(pred, y, LOGSCORE_EPSILON)
}

/// A trained model mapping features to a distribution over output bins.
pub trait Predictor: Send + Sync {
    fn bins(&self) -> usize;

    /// Feature dimension the model was trained on, if it cares.
    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn predict(&self, features: &[f64]) -> Result<CategoricalDistribution>;

    /// Prediction for a full sample. Label-aware predictors override this.
    fn predict_sample(&self, sample: &Sample) -> Result<CategoricalDistribution> {
        if let Some(dim) = self.input_dim() {
            if dim != sample.features.len() {
                return Err(Error::PredictorDimensionMismatch {
                    expected: dim,
                    actual: sample.features.len(),
                });
            }
        }
        self.predict(&sample.features)
    }

    /// Negative logscore of the true bin.
    fn loss(&self, sample: &Sample) -> Result<f64> {
        Ok(-logscore(&self.predict_sample(sample)?, sample.output_bin))
    }
}

/// Fills `loss` for every sample from `predictor`.
pub fn score_losses(samples: &mut [Sample], predictor: &dyn Predictor) -> Result<()> {
    for s in samples {
        s.loss = Some(predictor.loss(s)?);
    }
    Ok(())
}

/// Uniform over all bins; the model before any training.
#[derive(Clone, Debug)]
pub struct UniformPredictor {
    bins: usize,
}

impl UniformPredictor {
    pub fn new(bins: usize) -> Self {
        Self { bins }
    }
}

impl Predictor for UniformPredictor {
    fn bins(&self) -> usize {
        self.bins
    }

    fn predict(&self, _features: &[f64]) -> Result<CategoricalDistribution> {
        Ok(CategoricalDistribution::uniform(self.bins))
    }
}

/// Point mass on the sample's true output bin.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    bins: usize,
}

impl OraclePredictor {
    pub fn new(bins: usize) -> Self {
        Self { bins }
    }
}

impl Predictor for OraclePredictor {
    fn bins(&self) -> usize {
        self.bins
    }

    fn predict(&self, _features: &[f64]) -> Result<CategoricalDistribution> {
        Err(Error::RequiresLabel)
    }

    fn predict_sample(&self, sample: &Sample) -> Result<CategoricalDistribution> {
        if sample.output_bin >= self.bins {
            return Err(Error::BinOutOfRange {
                bin: sample.output_bin,
                bins: self.bins,
            });
        }
        Ok(CategoricalDistribution::point_mass(self.bins, sample.output_bin))
    }
}

/// Ignores features and predicts the add-one smoothed label frequencies.
#[derive(Clone, Debug)]
pub struct HistogramPredictor {
    dist: CategoricalDistribution,
}

impl HistogramPredictor {
    pub fn fit(samples: &[Sample], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut counts = vec![1.0; bins];
        for s in samples {
            if s.output_bin >= bins {
                return Err(Error::BinOutOfRange {
                    bin: s.output_bin,
                    bins,
                });
            }
            counts[s.output_bin] += 1.0;
        }
        Ok(Self {
            dist: CategoricalDistribution::from_weights(counts)?,
        })
    }

    pub fn distribution(&self) -> &CategoricalDistribution {
        &self.dist
    }
}

impl Predictor for HistogramPredictor {
    fn bins(&self) -> usize {
        self.dist.len()
    }

    fn predict(&self, _features: &[f64]) -> Result<CategoricalDistribution> {
        Ok(self.dist.clone())
    }
}

/// Nearest-centroid classifier with a softmax over negative squared distances.
///
/// Bins without training samples always get probability zero.
#[derive(Clone, Debug)]
pub struct CentroidPredictor {
    bins: usize,
    dim: usize,
    temperature: f64,
    centroids: Vec<(usize, Vec<f64>)>,
}

impl CentroidPredictor {
    pub const DEFAULT_TEMPERATURE: f64 = 1.0;

    pub fn fit(samples: &[Sample], bins: usize) -> Result<Self> {
        Self::fit_with_temperature(samples, bins, Self::DEFAULT_TEMPERATURE)
    }

    pub fn fit_with_temperature(samples: &[Sample], bins: usize, temperature: f64) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyTrainingSet)?;
        let dim = first.features.len();
        let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for s in samples {
            if s.output_bin >= bins {
                return Err(Error::BinOutOfRange {
                    bin: s.output_bin,
                    bins,
                });
            }
            if s.features.len() != dim {
                return Err(Error::PredictorDimensionMismatch {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
            let entry = sums
                .entry(s.output_bin)
                .or_insert_with(|| (vec![0.0; dim], 0));
            entry.0.iter_mut().zip(&s.features).for_each(|(a, x)| *a += x);
            entry.1 += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(bin, (sum, n))| (bin, sum.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        Ok(Self {
            bins,
            dim,
            temperature,
            centroids,
        })
    }
}

impl Predictor for CentroidPredictor {
    fn bins(&self) -> usize {
        self.bins
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn predict(&self, features: &[f64]) -> Result<CategoricalDistribution> {
        if features.len() != self.dim {
            return Err(Error::PredictorDimensionMismatch {
                expected: self.dim,
                actual: features.len(),
            });
        }
        let logits: Vec<f64> = self
            .centroids
            .iter()
            .map(|(_, c)| {
                let sq: f64 = c.iter().zip(features).map(|(a, b)| (a - b) * (a - b)).sum();
                -sq / self.temperature
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = vec![0.0; self.bins];
        for ((bin, _), logit) in self.centroids.iter().zip(&logits) {
            probs[*bin] = (logit - max).exp();
        }
        CategoricalDistribution::from_weights(probs)
    }
}

/// Built-in trainable predictors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Histogram,
    Centroid,
}

impl PredictorKind {
    pub fn fit(self, samples: &[Sample], bins: usize) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            PredictorKind::Histogram => Box::new(HistogramPredictor::fit(samples, bins)?),
            PredictorKind::Centroid => Box::new(CentroidPredictor::fit(samples, bins)?),
        })
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "histogram" => Ok(Self::Histogram),
            "centroid" => Ok(Self::Centroid),
            other => Err(Error::InvalidConfig(format!("unknown predictor {other:?}"))),
        }
    }
}
