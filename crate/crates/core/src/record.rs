//! Newline-delimited JSON sample records.
//!
//! Each line carries `features`, `output_bin`, `raw_output`, `prediction` and
//! `stalled` (0 or 1). `arrival_index`, `loss`, `class` and `noise` are
//! optional; a missing `arrival_index` defaults to the record's position in
//! the stream. Unknown fields are ignored.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{CategoricalDistribution, Sample};

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    features: Vec<f64>,
    output_bin: usize,
    raw_output: f64,
    prediction: Vec<f64>,
    stalled: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    noise: bool,
}

pub fn to_line(sample: &Sample) -> String {
    let record = SampleRecord {
        features: sample.features.clone(),
        output_bin: sample.output_bin,
        raw_output: sample.raw_output,
        prediction: sample.prediction.probs().to_vec(),
        stalled: u8::from(sample.stalled),
        arrival_index: Some(sample.arrival_index),
        loss: sample.loss,
        class: sample.class,
        noise: sample.noise,
    };
    serde_json::to_string(&record).expect("sample records always serialize")
}

/// Parses one record. `position` is used when the record has no arrival index.
pub fn from_line(line: &str, position: u64) -> Result<Sample> {
    let record: SampleRecord = serde_json::from_str(line).map_err(|e| Error::Record {
        line: position as usize + 1,
        message: e.to_string(),
    })?;
    let stalled = match record.stalled {
        0 => false,
        1 => true,
        other => {
            return Err(Error::Record {
                line: position as usize + 1,
                message: format!("stalled must be 0 or 1, got {other}"),
            })
        }
    };
    Ok(Sample {
        features: record.features,
        output_bin: record.output_bin,
        raw_output: record.raw_output,
        prediction: CategoricalDistribution::new(record.prediction)?,
        loss: record.loss,
        stalled,
        arrival_index: record.arrival_index.unwrap_or(position),
        class: record.class,
        noise: record.noise,
    })
}

pub fn write_samples<W: Write>(mut out: W, samples: &[Sample]) -> Result<()> {
    for sample in samples {
        writeln!(out, "{}", to_line(sample))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads every record; blank lines are skipped but still count as positions.
pub fn read_samples<R: BufRead>(input: R) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (position, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(from_line(&line, position as u64)?);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unknown_fields_are_ignored_and_position_fills_arrival() {
        let line = r#"{"features":[1.0,2.0],"output_bin":1,"raw_output":0.5,"prediction":[0.25,0.75],"stalled":1,"session":"abc"}"#;
        let s = from_line(line, 7).unwrap();
        assert_eq!(s.arrival_index, 7);
        assert!(s.stalled);
        assert_eq!(s.output_bin, 1);
        assert_eq!(s.loss, None);
    }

    #[test]
    fn bad_stalled_flag_is_rejected() {
        let line = r#"{"features":[],"output_bin":0,"raw_output":0.0,"prediction":[1.0],"stalled":2}"#;
        assert!(matches!(from_line(line, 0), Err(Error::Record { line: 1, .. })));
    }

    #[test]
    fn unnormalized_prediction_is_rejected() {
        let line = r#"{"features":[],"output_bin":0,"raw_output":0.0,"prediction":[0.7,0.7],"stalled":0}"#;
        assert!(matches!(
            from_line(line, 0),
            Err(Error::NonNormalizedPrediction { .. })
        ));
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        (
            prop::collection::vec(-1e6f64..1e6, 0..8),
            prop::collection::vec(0.01f64..1.0, 1..6),
            0usize..5,
            -1e3f64..1e3,
            prop::option::of(0.0f64..50.0),
            any::<bool>(),
            any::<u64>(),
            prop::option::of(0usize..4),
            any::<bool>(),
        )
            .prop_map(
                |(features, weights, output_bin, raw_output, loss, stalled, arrival, class, noise)| {
                    Sample {
                        features,
                        output_bin,
                        raw_output,
                        prediction: CategoricalDistribution::from_weights(weights).unwrap(),
                        loss,
                        stalled,
                        arrival_index: arrival,
                        class,
                        noise,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn record_round_trip(samples in prop::collection::vec(arb_sample(), 0..6)) {
            let mut buf = Vec::new();
            write_samples(&mut buf, &samples).unwrap();
            let parsed = read_samples(buf.as_slice()).unwrap();
            prop_assert_eq!(parsed, samples);
        }
    }
}
