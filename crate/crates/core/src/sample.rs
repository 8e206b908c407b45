//! Samples, categorical distributions and batches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sum-to-one tolerance for every distribution in the crate.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Samples are identified by their position in the stream.
pub type SampleId = u64;

/// Probability vector over a fixed number of bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoricalDistribution(Vec<f64>);

impl CategoricalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probabilities(&probs)?;
        Ok(Self(probs))
    }

    /// Normalizes nonnegative weights. Fails if all weights are zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((bin, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::NegativeProbability { bin, value });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::NonNormalizedPrediction { sum: total });
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self(weights))
    }

    pub fn uniform(bins: usize) -> Self {
        assert!(bins > 0, "distribution needs at least one bin");
        Self(vec![1.0 / bins as f64; bins])
    }

    pub fn point_mass(bins: usize, bin: usize) -> Self {
        assert!(bin < bins, "bin {bin} out of range for {bins} bins");
        let mut probs = vec![0.0; bins];
        probs[bin] = 1.0;
        Self(probs)
    }

    /// Skips validation; used where the values are normalized by construction.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        check_probabilities(&self.0)
    }

    /// Argmax bin and its probability, ties to the lowest index.
    pub fn mode(&self) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &p) in self.0.iter().enumerate() {
            if p > best.1 {
                best = (i, p);
            }
        }
        best
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (bin, &value) in probs.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeProbability { bin, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NonNormalizedPrediction { sum });
    }
    Ok(())
}

/// Uniform mixture of equally sized distributions.
pub fn mixture<'a, I>(dists: I) -> Result<CategoricalDistribution>
where
    I: IntoIterator<Item = &'a CategoricalDistribution>,
{
    let mut iter = dists.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput)?;
    let mut acc = first.0.clone();
    let mut count = 1usize;
    for dist in iter {
        if dist.len() != acc.len() {
            return Err(Error::LengthMismatch {
                expected: acc.len(),
                actual: dist.len(),
            });
        }
        acc.iter_mut().zip(&dist.0).for_each(|(a, p)| *a += p);
        count += 1;
    }
    let n = count as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(CategoricalDistribution(acc))
}

/// One observation in the stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub output_bin: usize,
    pub raw_output: f64,
    pub prediction: CategoricalDistribution,
    pub loss: Option<f64>,
    pub stalled: bool,
    pub arrival_index: SampleId,
    /// Generating class, kept for evaluation only. Strategies never read it.
    pub class: Option<usize>,
    /// Injected-noise marker, kept for evaluation only. Strategies never read it.
    pub noise: bool,
}

impl Sample {
    /// A sample with a uniform placeholder prediction, to be replaced by BBDR.
    pub fn new(features: Vec<f64>, output_bin: usize, raw_output: f64, k_pred: usize) -> Self {
        Self {
            features,
            output_bin,
            raw_output,
            prediction: CategoricalDistribution::uniform(k_pred),
            loss: None,
            stalled: false,
            arrival_index: 0,
            class: None,
            noise: false,
        }
    }

    pub fn id(&self) -> SampleId {
        self.arrival_index
    }
}

pub fn validate_sample(sample: &Sample, k_pred: usize, k_out: usize) -> Result<()> {
    if sample.prediction.len() != k_pred {
        return Err(Error::LengthMismatch {
            expected: k_pred,
            actual: sample.prediction.len(),
        });
    }
    sample.prediction.validate()?;
    if sample.output_bin >= k_out {
        return Err(Error::BinOutOfRange {
            bin: sample.output_bin,
            bins: k_out,
        });
    }
    if let Some(loss) = sample.loss {
        if !(loss >= 0.0) {
            return Err(Error::InvalidConfig(format!("negative loss {loss}")));
        }
    }
    Ok(())
}

/// Equal-width bins over `[lo, hi)`; values outside clamp to the edge bins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinEdges {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinEdges {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::InvalidConfig(format!(
                "bin range [{lo}, {hi}) with {bins} bins"
            )));
        }
        Ok(Self { lo, hi, bins })
    }

    /// Integer-centred bins `0..bins`, used when outputs are class labels.
    pub fn for_classes(classes: usize) -> Self {
        Self {
            lo: -0.5,
            hi: classes as f64 - 0.5,
            bins: classes,
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn bin_of(&self, value: f64) -> usize {
        let pos = ((value - self.lo) / self.width()).floor();
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(self.bins - 1)
        }
    }

    pub fn midpoint(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width()
    }

    /// Probability-weighted bin midpoint.
    pub fn expected_value(&self, dist: &CategoricalDistribution) -> f64 {
        dist.probs()
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.midpoint(i))
            .sum()
    }
}

/// Group of samples summarized by its prediction and output distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub sample_ids: Vec<SampleId>,
    pub pred_dist: CategoricalDistribution,
    pub out_dist: CategoricalDistribution,
    pub mean_features: Vec<f64>,
    pub density_pred: f64,
    pub density_out: f64,
}

impl Batch {
    /// Builds the mixture and output histogram of `members`. Densities start at zero.
    pub fn from_samples(members: &[&Sample], k_out: usize) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyInput)?;
        let pred_dist = mixture(members.iter().map(|s| &s.prediction))?;

        let mut counts = vec![0.0; k_out];
        for s in members {
            if s.output_bin >= k_out {
                return Err(Error::BinOutOfRange {
                    bin: s.output_bin,
                    bins: k_out,
                });
            }
            counts[s.output_bin] += 1.0;
        }
        let n = members.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);

        let dim = first.features.len();
        let mut mean_features = vec![0.0; dim];
        for s in members {
            if s.features.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
            mean_features
                .iter_mut()
                .zip(&s.features)
                .for_each(|(m, x)| *m += x);
        }
        mean_features.iter_mut().for_each(|m| *m /= n);

        Ok(Self {
            sample_ids: members.iter().map(|s| s.arrival_index).collect(),
            pred_dist,
            out_dist: CategoricalDistribution::from_raw(counts),
            mean_features,
            density_pred: 0.0,
            density_out: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }
}
