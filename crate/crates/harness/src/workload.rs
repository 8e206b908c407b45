//! Synthetic sample streams with three labelled classes W1, W2 and W3.

use std::fmt;
use std::str::FromStr;

use memento::{BinEdges, Sample, Task};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("noise fraction {0} is outside [0, 1]")]
    BadFraction(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    RarePatterns,
    Incremental,
    GradualDrift,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::RarePatterns => "rare_patterns",
            ScenarioKind::Incremental => "incremental",
            ScenarioKind::GradualDrift => "gradual_drift",
        }
    }

    pub fn default_iterations(self) -> usize {
        match self {
            ScenarioKind::RarePatterns => 20,
            ScenarioKind::Incremental | ScenarioKind::GradualDrift => 30,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rare_patterns" => Ok(Self::RarePatterns),
            "incremental" => Ok(Self::Incremental),
            "gradual_drift" => Ok(Self::GradualDrift),
            other => Err(WorkloadError::BadSchedule(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Feature and output distribution of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSpec {
    pub mean: Vec<f64>,
    /// Standard deviation of every feature around the mean.
    pub scale: f64,
    /// Median raw output before drift scaling (regression only).
    pub median_output: f64,
}

// Share of an iteration's samples taken by the sporadic classes.
const W1_BURST: f64 = 0.065;
const W3_BURST: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub iterations: usize,
    pub samples_per_iteration: usize,
    pub classes: Vec<ClassSpec>,
    pub seed: u64,
    /// rare_patterns only: every class in every iteration at its long-run share.
    pub stationary: bool,
    /// Log-normal spread of the raw output.
    pub output_sigma: f64,
    /// Fixed output range split into `output_bins` equal bins (regression).
    pub output_range: (f64, f64),
    pub output_bins: usize,
    /// Noise features are uniform over the class means' bounding box widened
    /// by this many class standard deviations.
    pub noise_margin: f64,
}

impl ScenarioSpec {
    pub const DEFAULT_SAMPLES_PER_ITERATION: usize = 50_000;
    pub const DEFAULT_FEATURE_DIM: usize = 16;

    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            iterations: kind.default_iterations(),
            samples_per_iteration: Self::DEFAULT_SAMPLES_PER_ITERATION,
            classes: default_classes(Self::DEFAULT_FEATURE_DIM),
            seed,
            stationary: false,
            output_sigma: 0.5,
            output_range: (0.0, 10.0),
            output_bins: 21,
            noise_margin: 3.0,
        }
    }

    pub fn with_feature_dim(mut self, dim: usize) -> Self {
        self.classes = default_classes(dim);
        self
    }

    pub fn feature_dim(&self) -> usize {
        self.classes.first().map_or(0, |c| c.mean.len())
    }

    pub fn task(&self) -> Task {
        match self.kind {
            ScenarioKind::GradualDrift => Task::Regression,
            _ => Task::Classification,
        }
    }

    pub fn bins(&self) -> usize {
        match self.task() {
            Task::Classification => self.classes.len(),
            Task::Regression => self.output_bins,
        }
    }

    pub fn edges(&self) -> BinEdges {
        match self.task() {
            Task::Classification => BinEdges::for_classes(self.classes.len()),
            Task::Regression => BinEdges::new(self.output_range.0, self.output_range.1, self.output_bins)
                .expect("validated output range"),
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.classes.len() != 3 {
            return Err(WorkloadError::BadSchedule(format!(
                "expected 3 classes, got {}",
                self.classes.len()
            )));
        }
        let dim = self.feature_dim();
        if dim < 3 || self.classes.iter().any(|c| c.mean.len() != dim) {
            return Err(WorkloadError::BadSchedule(format!("feature dimension {dim} is too small")));
        }
        if self.kind != ScenarioKind::RarePatterns && self.iterations > 30 {
            return Err(WorkloadError::BadSchedule(format!(
                "{} has three 10-iteration phases, not {}",
                self.kind, self.iterations
            )));
        }
        if self.task() == Task::Regression
            && (self.output_bins == 0 || !(self.output_range.1 > self.output_range.0))
        {
            return Err(WorkloadError::BadSchedule("empty output range".into()));
        }
        Ok(())
    }

    /// Class mixture weights of one iteration; they sum to 1.
    pub fn schedule(&self, iteration: usize) -> Result<Vec<f64>, WorkloadError> {
        if iteration >= self.iterations {
            return Err(WorkloadError::BadSchedule(format!(
                "iteration {iteration} past the end ({})",
                self.iterations
            )));
        }
        Ok(match self.kind {
            ScenarioKind::RarePatterns if self.stationary => {
                // long-run shares of the bursty schedule
                let w1 = W1_BURST / 5.0;
                let w3 = W3_BURST / 10.0;
                vec![w1, 1.0 - w1 - w3, w3]
            }
            ScenarioKind::RarePatterns => {
                let w1 = if iteration % 5 == 0 { W1_BURST } else { 0.0 };
                let w3 = if iteration % 10 == 0 { W3_BURST } else { 0.0 };
                vec![w1, 1.0 - w1 - w3, w3]
            }
            ScenarioKind::Incremental => {
                let mut w = vec![0.0; 3];
                w[iteration / 10] = 1.0;
                w
            }
            ScenarioKind::GradualDrift => vec![1.0 / 3.0; 3],
        })
    }

    /// Multiplier on the raw output during `iteration`.
    pub fn output_scale(&self, iteration: usize) -> f64 {
        match self.kind {
            ScenarioKind::GradualDrift => [1.0, 1.5, 2.0][(iteration / 10).min(2)],
            _ => 1.0,
        }
    }

    /// One sample of `class`; its prediction starts out uniform.
    pub fn draw<R: Rng + ?Sized>(&self, class: usize, iteration: usize, arrival: u64, rng: &mut R) -> Sample {
        let spec = &self.classes[class];
        let mut features: Vec<f64> = spec
            .mean
            .iter()
            .map(|m| m + spec.scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (bin, raw) = match self.task() {
            Task::Classification => (class, class as f64),
            Task::Regression => {
                let z: f64 = rng.sample(StandardNormal);
                let raw = spec.median_output * self.output_scale(iteration) * (self.output_sigma * z).exp();
                // the last feature carries a noisy log of the output
                let last = features.len() - 1;
                features[last] = 3.0 * raw.ln() + 0.1 * rng.sample::<f64, _>(StandardNormal);
                (self.edges().bin_of(raw), raw)
            }
        };
        Sample {
            arrival_index: arrival,
            class: Some(class),
            ..Sample::new(features, bin, raw, self.bins())
        }
    }

    /// Per-iteration sample lists.
    pub fn stream(&self) -> Result<Stream<'_>, WorkloadError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        Ok(Stream {
            spec: self,
            iteration: 0,
            rng,
        })
    }

    /// `per_class` fresh samples from every class at `iteration`'s output scale.
    pub fn eval_set<R: Rng + ?Sized>(&self, iteration: usize, per_class: usize, rng: &mut R) -> Vec<Sample> {
        (0..self.classes.len())
            .flat_map(|c| (0..per_class).map(move |j| (c, j)))
            .map(|(c, j)| self.draw(c, iteration, j as u64, rng))
            .collect()
    }

    pub fn noise_model(&self) -> NoiseModel {
        let margin = self.noise_margin;
        let (lo, hi) = self
            .classes
            .iter()
            .flat_map(|c| c.mean.iter().map(move |m| (m - margin * c.scale, m + margin * c.scale)))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
        NoiseModel {
            feature_lo: lo,
            feature_hi: hi,
            dim: self.feature_dim(),
            edges: self.edges(),
        }
    }
}

/// W1 along the first axis, W2 along the second, W3 diagonal between W1 and
/// the third axis. Any two means are at least 4 apart.
pub fn default_classes(dim: usize) -> Vec<ClassSpec> {
    let axis = |k: &[usize]| {
        let mut v = vec![0.0; dim];
        for &i in k {
            if i < dim {
                v[i] = 4.0;
            }
        }
        v
    };
    vec![
        ClassSpec {
            mean: axis(&[0]),
            scale: 1.0,
            median_output: 2.0,
        },
        ClassSpec {
            mean: axis(&[1]),
            scale: 1.0,
            median_output: 0.2,
        },
        ClassSpec {
            mean: axis(&[0, 2]),
            scale: 1.0,
            median_output: 2.5,
        },
    ]
}

pub struct Stream<'a> {
    spec: &'a ScenarioSpec,
    iteration: usize,
    rng: ChaCha8Rng,
}

impl Iterator for Stream<'_> {
    type Item = Vec<Sample>;

    fn next(&mut self) -> Option<Vec<Sample>> {
        let spec = self.spec;
        let weights = spec.schedule(self.iteration).ok()?;
        let n = spec.samples_per_iteration;
        let base = (self.iteration * n) as u64;
        let samples = (0..n)
            .map(|j| {
                let class = pick(&weights, self.rng.random::<f64>());
                spec.draw(class, self.iteration, base + j as u64, &mut self.rng)
            })
            .collect();
        self.iteration += 1;
        Some(samples)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.iterations - self.iteration;
        (left, Some(left))
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    for (i, w) in weights.iter().enumerate().take(last) {
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

/// Where noise samples are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub feature_lo: f64,
    pub feature_hi: f64,
    pub dim: usize,
    pub edges: BinEdges,
}

/// Replaces round(fraction·n) samples, at random positions, with uniformly
/// random features and output bins. Replaced samples are tagged `noise` and
/// lose their class; arrival indices are kept. Returns how many were replaced.
pub fn inject_noise<R: Rng + ?Sized>(
    samples: &mut [Sample],
    fraction: f64,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<usize, WorkloadError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(WorkloadError::BadFraction(fraction));
    }
    let count = (fraction * samples.len() as f64).round() as usize;
    if count == 0 {
        return Ok(0);
    }
    let feature = Uniform::new(model.feature_lo, model.feature_hi).expect("nonempty feature box");
    let bins = model.edges.bins;
    let k_pred = samples[0].prediction.len();
    for i in rand::seq::index::sample(rng, samples.len(), count).into_vec() {
        let features: Vec<f64> = (0..model.dim).map(|_| feature.sample(rng)).collect();
        let bin = rng.random_range(0..bins);
        let arrival = samples[i].arrival_index;
        samples[i] = Sample {
            arrival_index: arrival,
            noise: true,
            class: None,
            ..Sample::new(features, bin, model.edges.midpoint(bin), k_pred)
        };
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec {
            samples_per_iteration: 2000,
            ..ScenarioSpec::new(kind, 7)
        }
    }

    #[test]
    fn schedules_sum_to_one() {
        for kind in [ScenarioKind::RarePatterns, ScenarioKind::Incremental, ScenarioKind::GradualDrift] {
            let spec = small(kind);
            for it in 0..spec.iterations {
                let total: f64 = spec.schedule(it).unwrap().iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rare_pattern_cadence() {
        let spec = small(ScenarioKind::RarePatterns);
        let stream: Vec<_> = spec.stream().unwrap().collect();
        assert_eq!(stream.len(), 20);
        assert!(stream[3].iter().all(|s| s.class == Some(1)));
        assert!(stream[5].iter().any(|s| s.class == Some(0)));
        assert!(stream[5].iter().all(|s| s.class != Some(2)));
        assert!(stream[10].iter().any(|s| s.class == Some(2)));
    }

    #[test]
    fn incremental_phases() {
        let spec = small(ScenarioKind::Incremental);
        let stream: Vec<_> = spec.stream().unwrap().collect();
        for (it, class) in [(0, 0), (15, 1), (29, 2)] {
            assert!(stream[it].iter().all(|s| s.class == Some(class)));
        }
    }

    #[test]
    fn arrival_indices_are_global() {
        let spec = small(ScenarioKind::Incremental);
        let ids: Vec<u64> = spec.stream().unwrap().take(2).flatten().map(|s| s.arrival_index).collect();
        assert_eq!(ids, (0..4000).collect::<Vec<_>>());
    }

    #[test]
    fn bad_schedules() {
        let mut spec = small(ScenarioKind::Incremental);
        spec.iterations = 31;
        assert!(matches!(spec.stream(), Err(WorkloadError::BadSchedule(_))));
        let spec = ScenarioSpec::new(ScenarioKind::RarePatterns, 0).with_feature_dim(2);
        assert!(spec.validate().is_err());
        assert!("bursty".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn noise_counts_are_exact() {
        let spec = small(ScenarioKind::RarePatterns);
        let model = spec.noise_model();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let clean: Vec<Sample> = (0..10_000).map(|j| spec.draw(1, 0, j, &mut rng)).collect();

        let mut same = clean.clone();
        assert_eq!(inject_noise(&mut same, 0.0, &model, &mut rng).unwrap(), 0);
        assert_eq!(same, clean);

        let mut five = clean.clone();
        inject_noise(&mut five, 0.05, &model, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(five.iter().filter(|s| s.noise).count(), 500);
        let mut again = clean.clone();
        inject_noise(&mut again, 0.05, &model, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(five, again);

        let mut all = clean[..100].to_vec();
        inject_noise(&mut all, 1.0, &model, &mut rng).unwrap();
        assert!(all.iter().all(|s| s.noise && s.class.is_none()));
        assert!(all.iter().all(|s| s.output_bin < 3));

        assert_eq!(
            inject_noise(&mut all, 1.5, &model, &mut rng),
            Err(WorkloadError::BadFraction(1.5))
        );
    }

    #[test]
    fn pick_follows_cumulative_weights() {
        let w = [0.2, 0.0, 0.8];
        assert_eq!(pick(&w, 0.1), 0);
        assert_eq!(pick(&w, 0.2), 2);
        assert_eq!(pick(&w, 0.999_999_9), 2);
        assert_eq!(pick(&[0.0, 1.0, 0.0], 0.999_999_9), 1);
    }
}
