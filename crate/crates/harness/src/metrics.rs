//! Evaluation metrics.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} predictions for {1} labels")]
    LengthMismatch(usize, usize),
    #[error("evaluation set is not balanced across classes: {0:?}")]
    UnbalancedEvalSet(Vec<usize>),
    #[error("label {0} outside {1} classes")]
    LabelOutOfRange(usize, usize),
}

/// Mean of the per-class accuracies. Every class must appear equally often.
pub fn balanced_accuracy(predicted: &[usize], truth: &[usize], classes: usize) -> Result<f64, MetricError> {
    if predicted.len() != truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), truth.len()));
    }
    if truth.is_empty() || classes == 0 {
        return Err(MetricError::EmptyInput);
    }
    let mut totals = vec![0usize; classes];
    let mut hits = vec![0usize; classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if t >= classes {
            return Err(MetricError::LabelOutOfRange(t, classes));
        }
        totals[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    if totals.iter().any(|&n| n != totals[0]) {
        return Err(MetricError::UnbalancedEvalSet(totals));
    }
    Ok(hits.iter().map(|&h| h as f64 / totals[0] as f64).sum::<f64>() / classes as f64)
}

/// Nearest-rank percentile, `q` in (0, 100].
pub fn percentile(values: &[f64], q: f64) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

pub fn p99_abs_error(predicted: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    if predicted.len() != truth.len() {
        return Err(MetricError::LengthMismatch(predicted.len(), truth.len()));
    }
    let errors: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    percentile(&errors, 99.0)
}

/// Mean and 1st percentile.
pub fn logscore_summary(scores: &[f64]) -> Result<(f64, f64), MetricError> {
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((mean, percentile(scores, 1.0)?))
}
