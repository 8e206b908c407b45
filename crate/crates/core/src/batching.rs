//! Spatial batching and black-box dimensionality reduction.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::sample::{Batch, CategoricalDistribution, Sample};

/// Argmax bin and its probability, ties to the lowest index.
pub fn mode_and_confidence(p: &CategoricalDistribution) -> (usize, f64) {
    p.mode()
}

fn sort_key(s: &Sample) -> (usize, usize, f64, u64) {
    let (mode, confidence) = s.prediction.mode();
    (s.output_bin, mode, confidence, s.arrival_index)
}

fn cmp_samples(a: &Sample, b: &Sample) -> Ordering {
    let (ka, kb) = (sort_key(a), sort_key(b));
    ka.0.cmp(&kb.0)
        .then(ka.1.cmp(&kb.1))
        .then(ka.2.total_cmp(&kb.2))
        .then(ka.3.cmp(&kb.3))
}

/// Sorts by (output bin, prediction mode, mode probability, arrival) and cuts
/// each output-bin group into consecutive chunks of `b`.
///
/// The last chunk of a group may be smaller; chunks never span two output bins.
pub fn batch_samples(samples: &[Sample], b: usize, k_out: usize) -> Result<Vec<Batch>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if b == 0 {
        return Err(Error::InvalidConfig("batch size must be positive".into()));
    }
    let mut order: Vec<&Sample> = samples.iter().collect();
    order.sort_by(|x, y| cmp_samples(x, y));

    let mut batches = Vec::with_capacity(samples.len() / b + k_out);
    for group in order.chunk_by(|x, y| x.output_bin == y.output_bin) {
        for chunk in group.chunks(b) {
            batches.push(Batch::from_samples(chunk, k_out)?);
        }
    }
    Ok(batches)
}

/// Replaces every prediction with the predictor's output; features are untouched.
pub fn bbdr(mut samples: Vec<Sample>, predictor: &dyn Predictor) -> Result<Vec<Sample>> {
    for s in &mut samples {
        s.prediction = predictor.predict_sample(s)?;
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{HistogramPredictor, OraclePredictor, UniformPredictor};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn sample(id: u64, output_bin: usize, prediction: Vec<f64>) -> Sample {
        Sample {
            prediction: CategoricalDistribution::new(prediction).unwrap(),
            arrival_index: id,
            ..Sample::new(vec![id as f64], output_bin, output_bin as f64, 2)
        }
    }

    #[test]
    fn pure_batches_per_output() {
        let samples: Vec<_> = [0, 1, 0, 1, 0, 1]
            .iter()
            .enumerate()
            .map(|(i, &o)| sample(i as u64, o, vec![0.5, 0.5]))
            .collect();
        let batches = batch_samples(&samples, 3, 2).unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].sample_ids, vec![0, 2, 4]);
        assert_eq!(batches[1].sample_ids, vec![1, 3, 5]);
        assert_eq!(batches[0].out_dist.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn singleton_batch() {
        let batches = batch_samples(&[sample(0, 1, vec![0.3, 0.7])], 256, 2).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 1);
        assert_eq!(batches[0].out_dist.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn alternating_modes_split_cleanly() {
        let samples: Vec<_> = (0..10)
            .map(|i| {
                let p = if i % 2 == 0 { vec![0.8, 0.2] } else { vec![0.2, 0.8] };
                sample(i, 0, p)
            })
            .collect();
        let batches = batch_samples(&samples, 5, 2).unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].sample_ids, vec![0, 2, 4, 6, 8]);
        assert_eq!(batches[1].sample_ids, vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(batch_samples(&[], 4, 2).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn bbdr_examples() {
        let samples: Vec<_> = (0..5).map(|i| sample(i, (i % 2) as usize, vec![1.0, 0.0])).collect();

        let uniform = bbdr(samples.clone(), &UniformPredictor::new(2)).unwrap();
        assert!(uniform.iter().all(|s| s.prediction.probs() == [0.5, 0.5]));
        assert!(uniform.iter().zip(&samples).all(|(a, b)| a.features == b.features));

        let oracle = bbdr(samples.clone(), &OraclePredictor::new(2)).unwrap();
        assert!(oracle.iter().all(|s| s.prediction.mode().0 == s.output_bin));

        // labels 0,1,0,1,0 → add-one counts 4 and 3 of 7
        let hist = HistogramPredictor::fit(&samples, 2).unwrap();
        let reduced = bbdr(samples, &hist).unwrap();
        for s in reduced {
            assert!((s.prediction.probs()[0] - 4.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_and_confidence_examples() {
        let d = |p: &[f64]| CategoricalDistribution::new(p.to_vec()).unwrap();
        assert_eq!(mode_and_confidence(&d(&[0.1, 0.7, 0.2])), (1, 0.7));
        assert_eq!(mode_and_confidence(&d(&[0.5, 0.5])), (0, 0.5));
        assert_eq!(mode_and_confidence(&d(&[0.25, 0.25, 0.25, 0.25])), (0, 0.25));
    }

    fn arb_samples() -> impl Strategy<Value = Vec<Sample>> {
        prop::collection::vec((0usize..4, 0.0f64..1.0), 1..120).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (out, p))| sample(i as u64, out, vec![p, 1.0 - p]))
                .map(|mut s| {
                    s.prediction = CategoricalDistribution::from_weights(s.prediction.into_inner()).unwrap();
                    s
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn batching_partitions_and_is_deterministic(samples in arb_samples(), b in 1usize..20) {
            let batches = batch_samples(&samples, b, 4).unwrap();
            let ids: Vec<u64> = batches.iter().flat_map(|x| x.sample_ids.clone()).collect();
            let unique: BTreeSet<u64> = ids.iter().copied().collect();
            prop_assert_eq!(ids.len(), samples.len());
            prop_assert_eq!(unique.len(), samples.len());
            prop_assert_eq!(&batches, &batch_samples(&samples, b, 4).unwrap());

            for batch in &batches {
                // every batch is pure in its output bin
                prop_assert!(batch.out_dist.probs().iter().any(|&p| p == 1.0));
                let expected = crate::sample::mixture(
                    batch.sample_ids.iter().map(|&id| &samples[id as usize].prediction),
                ).unwrap();
                for (a, e) in batch.pred_dist.probs().iter().zip(expected.probs()) {
                    prop_assert!((a - e).abs() < 1e-9);
                }
            }
            // within one output group only the final chunk may be short
            for pair in batches.windows(2) {
                let same_group = pair[0].out_dist == pair[1].out_dist;
                if same_group {
                    prop_assert_eq!(pair[0].len(), b);
                }
            }
        }
    }
}
