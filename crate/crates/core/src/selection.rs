//! Coverage-maximizing selection: probabilistic batch discards until the
//! memory fits, followed by the coverage-increase retraining decision.

use rand::Rng;

use crate::batching::{batch_samples, bbdr};
use crate::density::{aggregate_min, cross_kde, kde, DensityState};
use crate::distance::{
    distance_matrix, euclidean_matrix, euclidean_mean_distance, jsd_slices, DistanceMatrix, Space,
};
use crate::error::{Error, Result};
use crate::memory::{ReplayMemory, StrategyConfig};
use crate::predictor::Predictor;
use crate::sample::{Batch, Sample, SampleId};

/// Relative slack under which two densities count as tied for the argmax.
///
/// Incremental updates and from-scratch recomputation differ by a few ulps;
/// without this, exact ties between identical batches could break differently.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// One draw of the discard loop.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscardDraw {
    pub iteration: usize,
    /// Position in the batch list at the time of the draw.
    pub batch_index: usize,
    /// Probability the drawn batch had.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionOutcome {
    pub kept_sample_ids: Vec<SampleId>,
    pub discarded_batch_trace: Vec<DiscardDraw>,
    pub retrain: bool,
    pub rci: f64,
}

/// How batch-to-batch distances are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceKind {
    /// Jensen-Shannon distance in prediction and output space, min-aggregated.
    JensenShannon,
    /// Euclidean distance between batch-mean features.
    EuclideanMean,
}

impl DistanceKind {
    fn matrices(self, batches: &[Batch]) -> Result<Vec<DistanceMatrix>> {
        Ok(match self {
            DistanceKind::JensenShannon => vec![
                distance_matrix(batches, Space::Prediction)?,
                distance_matrix(batches, Space::Output)?,
            ],
            DistanceKind::EuclideanMean => vec![euclidean_matrix(batches)?],
        })
    }

    /// `out[space][i][j]` = distance from `points[i]` to `reference[j]`.
    fn cross(self, points: &[Batch], reference: &[Batch]) -> Result<Vec<Vec<Vec<f64>>>> {
        match self {
            DistanceKind::JensenShannon => [Space::Prediction, Space::Output]
                .into_iter()
                .map(|space| {
                    points
                        .iter()
                        .map(|p| {
                            reference
                                .iter()
                                .map(|r| {
                                    let (a, b) = (space.dist(p), space.dist(r));
                                    if a.len() != b.len() {
                                        return Err(Error::LengthMismatch {
                                            expected: a.len(),
                                            actual: b.len(),
                                        });
                                    }
                                    Ok(jsd_slices(a.probs(), b.probs()))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
            DistanceKind::EuclideanMean => Ok(vec![points
                .iter()
                .map(|p| {
                    reference
                        .iter()
                        .map(|r| euclidean_mean_distance(&p.mean_features, &r.mean_features))
                        .collect()
                })
                .collect::<Result<_>>()?]),
        }
    }
}

/// Softmax of `rho / temperature`; at zero temperature, a point mass on the
/// densest batch.
pub fn discard_probabilities(rho: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if rho.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(temperature >= 0.0) {
        return Err(Error::NegativeTemperature(temperature));
    }
    let max = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if temperature == 0.0 {
        let mut probs = vec![0.0; rho.len()];
        probs[argmax_with_ties(rho, max)] = 1.0;
        return Ok(probs);
    }
    let mut probs: Vec<f64> = rho.iter().map(|&r| ((r - max) / temperature).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// Lowest index within `TIE_TOLERANCE` (relative) of the maximum.
pub fn argmax_with_ties(values: &[f64], max: f64) -> usize {
    let floor = max - TIE_TOLERANCE * max.abs();
    values
        .iter()
        .position(|&v| v >= floor)
        .expect("values are nonempty")
}

/// Inverse-CDF draw from a probability vector.
pub fn weighted_choice<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn coverage(rho: &[f64]) -> f64 {
    rho.iter().sum()
}

/// Aggregated (min over spaces) density of `current`, and of `reference`
/// evaluated at each member of `current`.
fn own_and_cross_density(
    current: &[Batch],
    reference: &[Batch],
    h: f64,
    kind: DistanceKind,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let own: Vec<Vec<f64>> = kind
        .matrices(current)?
        .iter()
        .map(|m| kde(m, h))
        .collect::<Result<_>>()?;
    let cross: Vec<Vec<f64>> = kind
        .cross(current, reference)?
        .iter()
        .map(|rows| cross_kde(rows, reference.len(), h))
        .collect::<Result<_>>()?;
    let fold = |spaces: Vec<Vec<f64>>| -> Result<Vec<f64>> {
        let mut iter = spaces.into_iter();
        let first = iter.next().ok_or(Error::EmptyInput)?;
        iter.try_fold(first, |acc, next| aggregate_min(&acc, &next))
    };
    Ok((fold(own)?, fold(cross)?))
}

/// Relative coverage increase of `current` over `reference` with the chosen distances.
pub fn rci_with(current: &[Batch], reference: &[Batch], h: f64, kind: DistanceKind) -> Result<f64> {
    if current.is_empty() {
        return Err(Error::EmptyCurrentSet);
    }
    if reference.is_empty() {
        return Ok(1.0);
    }
    let (own, cross) = own_and_cross_density(current, reference, h, kind)?;
    let increase: f64 = own
        .iter()
        .zip(&cross)
        .map(|(a, b)| (a - b).max(0.0))
        .sum();
    Ok((increase / coverage(&own)).clamp(0.0, 1.0))
}

/// Share of the coverage of `current` not covered by `reference`.
///
/// CI sums the positive part of the density difference, so the ratio stays
/// in `[0, 1]`. An empty reference gives 1.
pub fn rci(current: &[Batch], reference: &[Batch], h: f64) -> Result<f64> {
    rci_with(current, reference, h, DistanceKind::JensenShannon)
}

pub fn retrain_decision(
    current: &[Batch],
    last_train: &[Batch],
    tau: f64,
    h: f64,
) -> Result<(bool, f64)> {
    let value = rci(current, last_train, h)?;
    Ok((value >= tau, value))
}

/// Reduces a batch list to capacity by repeated density-weighted discards.
///
/// Returns the surviving batches (densities filled in) and the draw trace.
pub fn discard_until_fits<R: Rng + ?Sized>(
    mut batches: Vec<Batch>,
    cfg: &StrategyConfig,
    kind: DistanceKind,
    rng: &mut R,
) -> Result<(Vec<Batch>, Vec<DiscardDraw>)> {
    let mut total: usize = batches.iter().map(Batch::len).sum();
    let mut trace = Vec::new();
    if batches.is_empty() {
        return Ok((batches, trace));
    }
    let mut state = DensityState::new(kind.matrices(&batches)?, cfg.bandwidth)?;
    while total > cfg.capacity {
        if state.count() == 1 {
            return Err(Error::CapacityTooSmallForOneBatch {
                capacity: cfg.capacity,
                batch: total,
            });
        }
        let probs = discard_probabilities(state.rho_min(), cfg.temperature)?;
        let i = weighted_choice(&probs, rng);
        trace.push(DiscardDraw {
            iteration: trace.len(),
            batch_index: i,
            probability: probs[i],
        });
        total -= batches[i].len();
        state.remove_batch(i)?;
        batches.remove(i);
    }
    for (pos, batch) in batches.iter_mut().enumerate() {
        match kind {
            DistanceKind::JensenShannon => {
                batch.density_pred = state.rho(0)[pos];
                batch.density_out = state.rho(1)[pos];
            }
            DistanceKind::EuclideanMean => {
                batch.density_pred = state.rho(0)[pos];
                batch.density_out = state.rho(0)[pos];
            }
        }
    }
    Ok((batches, trace))
}

/// One full selection round over the memory and the incoming samples.
///
/// New samples get predictions from `predictor`; in-memory samples keep the
/// predictions they were admitted with. When the outcome asks for retraining,
/// the caller should call [`ReplayMemory::remember_training`] once it has
/// retrained.
pub fn select<R: Rng + ?Sized>(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    select_with(memory, new_samples, cfg, predictor, rng, DistanceKind::JensenShannon)
}

pub fn select_with<R: Rng + ?Sized>(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    rng: &mut R,
    kind: DistanceKind,
) -> Result<SelectionOutcome> {
    if cfg.batch_size > cfg.capacity {
        return Err(Error::CapacityTooSmallForOneBatch {
            capacity: cfg.capacity,
            batch: cfg.batch_size,
        });
    }
    cfg.validate()?;
    let new_samples = bbdr(new_samples, predictor)?;
    memory.seen += new_samples.len() as u64;

    let mut pool = memory.take_samples();
    pool.extend(new_samples);
    if pool.is_empty() {
        memory.replace_contents(Vec::new(), Vec::new());
        return Ok(SelectionOutcome {
            kept_sample_ids: Vec::new(),
            discarded_batch_trace: Vec::new(),
            retrain: false,
            rci: 0.0,
        });
    }

    let batches = batch_samples(&pool, cfg.batch_size, cfg.k_out)?;
    let (batches, trace) = discard_until_fits(batches, cfg, kind, rng)?;

    let mut kept_ids: Vec<SampleId> = batches.iter().flat_map(|b| b.sample_ids.iter().copied()).collect();
    kept_ids.sort_unstable();
    let kept = retain_ids(pool, &kept_ids);
    memory.replace_contents(kept, batches);

    let value = rci_with(&memory.batches, &memory.last_train_batches, cfg.bandwidth, kind)?;
    Ok(SelectionOutcome {
        kept_sample_ids: kept_ids,
        discarded_batch_trace: trace,
        retrain: value >= cfg.threshold,
        rci: value,
    })
}

/// Keeps the samples whose ids appear in the sorted list `ids`.
pub(crate) fn retain_ids(pool: Vec<Sample>, ids: &[SampleId]) -> Vec<Sample> {
    pool.into_iter()
        .filter(|s| ids.binary_search(&s.arrival_index).is_ok())
        .collect()
}
