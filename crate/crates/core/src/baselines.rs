//! Comparison strategies behind one selection interface.
//!
//! Every strategy applies BBDR to incoming samples, enforces the capacity
//! bound and leaves the memory re-batched. Non-coverage strategies always
//! ask for retraining; their RCI is reported for information only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use ordered_float::OrderedFloat;
use rand::Rng;

use crate::batching::{batch_samples, bbdr};
use crate::error::{Error, Result};
use crate::memory::{ReplayMemory, StrategyConfig, Task};
use crate::predictor::{score_losses, Predictor, UniformPredictor};
use crate::sample::{CategoricalDistribution, Sample, SampleId};
use crate::selection::{self, DiscardDraw, DistanceKind, SelectionOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Memento,
    MementoEuclidean,
    Random,
    Fifo,
    PriorityLoss,
    PriorityConfidence,
    PriorityLabelCount,
    PriorityStalled,
    Lars,
    Qbc,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 10] = [
        StrategyKind::Memento,
        StrategyKind::MementoEuclidean,
        StrategyKind::Random,
        StrategyKind::Fifo,
        StrategyKind::PriorityLoss,
        StrategyKind::PriorityConfidence,
        StrategyKind::PriorityLabelCount,
        StrategyKind::PriorityStalled,
        StrategyKind::Lars,
        StrategyKind::Qbc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Memento => "memento",
            StrategyKind::MementoEuclidean => "memento_euclidean",
            StrategyKind::Random => "random",
            StrategyKind::Fifo => "fifo",
            StrategyKind::PriorityLoss => "priority_loss",
            StrategyKind::PriorityConfidence => "priority_confidence",
            StrategyKind::PriorityLabelCount => "priority_label_count",
            StrategyKind::PriorityStalled => "priority_stalled",
            StrategyKind::Lars => "lars",
            StrategyKind::Qbc => "qbc",
        }
    }

    /// Which way each scalar priority leans by default.
    pub fn default_direction(self) -> Direction {
        match self {
            StrategyKind::PriorityLoss | StrategyKind::PriorityStalled => Direction::DiscardLow,
            _ => Direction::DiscardHigh,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    DiscardHigh,
    DiscardLow,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discard-high" | "discard_high" => Ok(Self::DiscardHigh),
            "discard-low" | "discard_low" => Ok(Self::DiscardLow),
            other => Err(Error::InvalidConfig(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomMode {
    /// Uniform over every sample ever offered (reservoir sampling).
    Reservoir,
    /// Uniform over the current memory plus the incoming samples.
    Pool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disagreement {
    /// Entropy of the committee-mean prediction.
    VoteEntropy,
    /// Mean of the members' own prediction entropies.
    MemberEntropy,
}

/// Per-kind knobs. Unset values fall back to the shared config.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyParams {
    pub random_mode: RandomMode,
    pub direction: Option<Direction>,
    pub priority_temperature: Option<f64>,
    /// Samples over which LARS admission halves; defaults to the capacity.
    pub lars_half_life: Option<f64>,
    pub disagreement: Disagreement,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            random_mode: RandomMode::Reservoir,
            direction: None,
            priority_temperature: None,
            lars_half_life: None,
            disagreement: Disagreement::VoteEntropy,
        }
    }
}

/// A strategy instance. Owns the QBC committee, if any.
pub struct SelectionStrategy {
    pub kind: StrategyKind,
    pub params: StrategyParams,
    committee: Vec<Box<dyn Predictor>>,
}

impl fmt::Debug for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelectionStrategy")
            .field("kind", &self.kind)
            .field("params", &self.params)
            .field("committee", &self.committee.len())
            .finish()
    }
}

impl SelectionStrategy {
    pub fn new(kind: StrategyKind, params: StrategyParams) -> Self {
        Self {
            kind,
            params,
            committee: Vec::new(),
        }
    }

    pub fn set_committee(&mut self, committee: Vec<Box<dyn Predictor>>) {
        self.committee = committee;
    }

    pub fn committee(&self) -> &[Box<dyn Predictor>] {
        &self.committee
    }

    pub fn select<R: Rng + ?Sized>(
        &mut self,
        memory: &mut ReplayMemory,
        new_samples: Vec<Sample>,
        cfg: &StrategyConfig,
        predictor: &dyn Predictor,
        rng: &mut R,
    ) -> Result<SelectionOutcome> {
        let params = &self.params;
        match self.kind {
            StrategyKind::Memento => {
                selection::select_with(memory, new_samples, cfg, predictor, rng, DistanceKind::JensenShannon)
            }
            StrategyKind::MementoEuclidean => {
                selection::select_with(memory, new_samples, cfg, predictor, rng, DistanceKind::EuclideanMean)
            }
            StrategyKind::Random => random_select(memory, new_samples, cfg, predictor, params.random_mode, rng),
            StrategyKind::Fifo => fifo_select(memory, new_samples, cfg, predictor),
            StrategyKind::PriorityLoss
            | StrategyKind::PriorityConfidence
            | StrategyKind::PriorityLabelCount
            | StrategyKind::PriorityStalled => {
                let score = match self.kind {
                    StrategyKind::PriorityLoss => Score::Loss,
                    StrategyKind::PriorityConfidence => Score::Confidence,
                    StrategyKind::PriorityLabelCount => Score::LabelCount,
                    _ => Score::Stalled,
                };
                let direction = params.direction.unwrap_or(self.kind.default_direction());
                let temperature = params.priority_temperature.unwrap_or(cfg.temperature);
                priority_select(memory, new_samples, cfg, predictor, score, direction, temperature, rng)
            }
            StrategyKind::Lars => lars_select(memory, new_samples, cfg, predictor, params.lars_half_life, rng),
            StrategyKind::Qbc => {
                if self.committee.is_empty() {
                    self.committee.push(Box::new(UniformPredictor::new(cfg.k_pred)));
                }
                qbc_select(memory, new_samples, cfg, predictor, &self.committee, params.disagreement)
            }
        }
    }
}

fn checked_pool(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let new_samples = bbdr(new_samples, predictor)?;
    memory.seen += new_samples.len() as u64;
    let mut pool = memory.take_samples();
    pool.extend(new_samples);
    Ok(pool)
}

/// Stores `kept`, re-batches the memory and always requests retraining.
fn finish(
    memory: &mut ReplayMemory,
    mut kept: Vec<Sample>,
    cfg: &StrategyConfig,
    trace: Vec<DiscardDraw>,
) -> Result<SelectionOutcome> {
    kept.sort_by_key(|s| s.arrival_index);
    let batches = if kept.is_empty() {
        Vec::new()
    } else {
        batch_samples(&kept, cfg.batch_size, cfg.k_out)?
    };
    let ids: Vec<SampleId> = kept.iter().map(|s| s.arrival_index).collect();
    memory.replace_contents(kept, batches);
    let rci = if memory.batches.is_empty() {
        0.0
    } else {
        selection::rci(&memory.batches, &memory.last_train_batches, cfg.bandwidth)?
    };
    Ok(SelectionOutcome {
        kept_sample_ids: ids,
        discarded_batch_trace: trace,
        retrain: true,
        rci,
    })
}

/// Uniform random memory.
///
/// In reservoir mode every sample ever offered is equally likely to be held;
/// in pool mode the memory is a uniform subset of memory ∪ new.
pub fn random_select<R: Rng + ?Sized>(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    mode: RandomMode,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    cfg.validate()?;
    let new_samples = bbdr(new_samples, predictor)?;
    let capacity = cfg.capacity;
    let kept = match mode {
        RandomMode::Reservoir => {
            let mut kept = memory.take_samples();
            for s in new_samples {
                memory.seen += 1;
                if kept.len() < capacity {
                    kept.push(s);
                } else {
                    let slot = rng.random_range(0..memory.seen);
                    if slot < capacity as u64 {
                        kept[slot as usize] = s;
                    }
                }
            }
            kept
        }
        RandomMode::Pool => {
            memory.seen += new_samples.len() as u64;
            let mut pool = memory.take_samples();
            pool.extend(new_samples);
            if pool.len() <= capacity {
                pool
            } else {
                let mut chosen = rand::seq::index::sample(rng, pool.len(), capacity).into_vec();
                chosen.sort_unstable();
                let mut slots: Vec<Option<Sample>> = pool.into_iter().map(Some).collect();
                chosen
                    .into_iter()
                    .map(|i| slots[i].take().expect("indices are distinct"))
                    .collect()
            }
        }
    };
    finish(memory, kept, cfg, Vec::new())
}

/// Keeps the `capacity` most recent arrivals.
pub fn fifo_select(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
) -> Result<SelectionOutcome> {
    let mut pool = checked_pool(memory, new_samples, cfg, predictor)?;
    pool.sort_by_key(|s| s.arrival_index);
    let excess = pool.len().saturating_sub(cfg.capacity);
    let kept = pool.split_off(excess);
    finish(memory, kept, cfg, Vec::new())
}

/// Per-sample score used by the scalar priority strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Score {
    Loss,
    /// Probability of the predicted bin.
    Confidence,
    /// Current count of the sample's output bin in the pool.
    LabelCount,
    /// 1 for samples from stalled sessions, 0 otherwise.
    Stalled,
}

/// Binary sum tree for repeated weighted draws without replacement.
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(weights: &[f64]) -> Self {
        let leaves = weights.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * leaves];
        nodes[leaves..leaves + weights.len()].copy_from_slice(weights);
        for i in (1..leaves).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { leaves, nodes }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn weight(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut node = self.leaves + i;
        self.nodes[node] = w;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf holding cumulative mass `u`; never returns an empty leaf while
    /// the total is positive.
    fn find(&self, mut u: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let (left, right) = (self.nodes[2 * node], self.nodes[2 * node + 1]);
            if left > 0.0 && (u < left || right <= 0.0) {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }
}

fn static_scores(pool: &[Sample], score: Score) -> Result<Vec<f64>> {
    pool.iter()
        .map(|s| match score {
            Score::Loss => s.loss.ok_or(Error::MissingScores(s.arrival_index)),
            Score::Confidence => Ok(s.prediction.mode().1),
            Score::Stalled => Ok(if s.stalled { 1.0 } else { 0.0 }),
            Score::LabelCount => unreachable!("label counts change while discarding"),
        })
        .collect()
}

/// Discards samples one at a time, drawing from softmax(signed score / T)
/// until the pool fits. The signed score is oriented so that higher means
/// more likely to be discarded; `T = 0` always takes the highest one.
#[allow(clippy::too_many_arguments)]
pub fn priority_select<R: Rng + ?Sized>(
    memory: &mut ReplayMemory,
    mut new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    score: Score,
    direction: Direction,
    temperature: f64,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    if !(temperature >= 0.0) {
        return Err(Error::NegativeTemperature(temperature));
    }
    if score == Score::Loss {
        new_samples = bbdr(new_samples, predictor)?;
        score_losses(&mut new_samples, predictor)?;
    }
    let mut pool = checked_pool(memory, new_samples, cfg, predictor)?;
    pool.sort_by_key(|s| s.arrival_index);
    let discards = pool.len().saturating_sub(cfg.capacity);
    let sign = match direction {
        Direction::DiscardHigh => 1.0,
        Direction::DiscardLow => -1.0,
    };

    let (dropped, trace) = if score == Score::LabelCount {
        discard_by_label(&pool, discards, cfg.k_out, sign, temperature, rng)
    } else {
        let signed: Vec<f64> = static_scores(&pool, score)?.into_iter().map(|v| sign * v).collect();
        discard_static(&signed, discards, temperature, rng)
    };

    let mut keep = vec![true; pool.len()];
    for i in dropped {
        keep[i] = false;
    }
    let kept = pool
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect();
    finish(memory, kept, cfg, trace)
}

fn discard_static<R: Rng + ?Sized>(
    signed: &[f64],
    discards: usize,
    temperature: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<DiscardDraw>) {
    let mut dropped = Vec::with_capacity(discards);
    let mut trace = Vec::with_capacity(discards);
    if discards == 0 {
        return (dropped, trace);
    }
    if temperature == 0.0 {
        let mut order: Vec<usize> = (0..signed.len()).collect();
        order.sort_by(|&a, &b| signed[b].total_cmp(&signed[a]).then(a.cmp(&b)));
        for (iteration, &i) in order.iter().take(discards).enumerate() {
            dropped.push(i);
            trace.push(DiscardDraw {
                iteration,
                batch_index: i,
                probability: 1.0,
            });
        }
        return (dropped, trace);
    }

    let mut alive = vec![true; signed.len()];
    let weights_from_max = |alive: &[bool]| -> Vec<f64> {
        let max = signed
            .iter()
            .zip(alive)
            .filter(|(_, a)| **a)
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        signed
            .iter()
            .zip(alive)
            .map(|(s, a)| if *a { ((s - max) / temperature).exp() } else { 0.0 })
            .collect()
    };
    let mut tree = SumTree::new(&weights_from_max(&alive));
    for iteration in 0..discards {
        // everything left underflowed against an earlier maximum
        if tree.total() <= 0.0 {
            tree = SumTree::new(&weights_from_max(&alive));
        }
        let total = tree.total();
        let i = tree.find(rng.random::<f64>() * total);
        trace.push(DiscardDraw {
            iteration,
            batch_index: i,
            probability: tree.weight(i) / total,
        });
        tree.set(i, 0.0);
        alive[i] = false;
        dropped.push(i);
    }
    (dropped, trace)
}

fn discard_by_label<R: Rng + ?Sized>(
    pool: &[Sample],
    discards: usize,
    bins: usize,
    sign: f64,
    temperature: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<DiscardDraw>) {
    // members per label, ascending pool index
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins.max(1)];
    for (i, s) in pool.iter().enumerate() {
        if s.output_bin >= members.len() {
            members.resize(s.output_bin + 1, Vec::new());
        }
        members[s.output_bin].push(i);
    }
    let mut heads = vec![0usize; members.len()];
    let mut dropped = Vec::with_capacity(discards);
    let mut trace = Vec::with_capacity(discards);

    for iteration in 0..discards {
        let counts: Vec<usize> = members
            .iter()
            .zip(&heads)
            .map(|(m, h)| m.len() - h)
            .collect();
        let signed = |l: usize| sign * counts[l] as f64;
        let populated: Vec<usize> = (0..counts.len()).filter(|&l| counts[l] > 0).collect();

        let (label, probability) = if temperature == 0.0 {
            // the highest-scoring sample with the lowest pool index
            let best = populated
                .iter()
                .map(|&l| signed(l))
                .fold(f64::NEG_INFINITY, f64::max);
            let label = populated
                .iter()
                .copied()
                .filter(|&l| signed(l) == best)
                .min_by_key(|&l| members[l][heads[l]])
                .expect("pool is larger than capacity");
            (label, 1.0)
        } else {
            let max = populated.iter().map(|&l| signed(l)).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = (0..counts.len())
                .map(|l| {
                    if counts[l] == 0 {
                        0.0
                    } else {
                        counts[l] as f64 * ((signed(l) - max) / temperature).exp()
                    }
                })
                .collect();
            let label = selection::weighted_choice(&weights, rng);
            let total: f64 = weights.iter().sum();
            (label, weights[label] / total / counts[label] as f64)
        };

        let pick = if temperature == 0.0 {
            heads[label]
        } else {
            heads[label] + rng.random_range(0..counts[label])
        };
        // move the chosen member to the head slot, then advance past it
        members[label].swap(heads[label], pick);
        let i = members[label][heads[label]];
        heads[label] += 1;
        if temperature == 0.0 {
            debug_assert!(members[label][heads[label]..].windows(2).all(|w| w[0] < w[1]));
        }
        dropped.push(i);
        trace.push(DiscardDraw {
            iteration,
            batch_index: i,
            probability,
        });
    }
    (dropped, trace)
}

/// Admission probability for the `seen`-th offered sample.
///
/// min(1, C / seen), halved every `half_life` samples after the memory
/// first filled up.
pub fn lars_admission(capacity: usize, seen: u64, filled_at: Option<u64>, half_life: f64) -> f64 {
    let base = (capacity as f64 / seen.max(1) as f64).min(1.0);
    match filled_at {
        Some(start) if seen > start => base * 0.5f64.powf((seen - start) as f64 / half_life),
        _ => base,
    }
}

/// Loss-aware reservoir: decaying random admission, then eviction of the
/// lowest-loss sample of the most frequent label.
pub fn lars_select<R: Rng + ?Sized>(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    half_life: Option<f64>,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    if cfg.task != Task::Classification {
        return Err(Error::NotClassification);
    }
    cfg.validate()?;
    let half_life = half_life.unwrap_or(cfg.capacity as f64);
    if !(half_life > 0.0) {
        return Err(Error::InvalidConfig(format!("LARS half-life {half_life}")));
    }
    let mut new_samples = bbdr(new_samples, predictor)?;
    score_losses(&mut new_samples, predictor)?;

    let mut store: BTreeMap<SampleId, Sample> = BTreeMap::new();
    let mut by_label: BTreeMap<usize, BTreeSet<(OrderedFloat<f64>, SampleId)>> = BTreeMap::new();
    let insert = |s: Sample,
                      store: &mut BTreeMap<SampleId, Sample>,
                      by_label: &mut BTreeMap<usize, BTreeSet<(OrderedFloat<f64>, SampleId)>>|
     -> Result<()> {
        let loss = s.loss.ok_or(Error::MissingScores(s.arrival_index))?;
        by_label
            .entry(s.output_bin)
            .or_default()
            .insert((OrderedFloat(loss), s.arrival_index));
        store.insert(s.arrival_index, s);
        Ok(())
    };
    for s in memory.take_samples() {
        insert(s, &mut store, &mut by_label)?;
    }

    for s in new_samples {
        memory.seen += 1;
        if store.len() < cfg.capacity {
            insert(s, &mut store, &mut by_label)?;
            if store.len() == cfg.capacity && memory.filled_at.is_none() {
                memory.filled_at = Some(memory.seen);
            }
            continue;
        }
        let p = lars_admission(cfg.capacity, memory.seen, memory.filled_at, half_life);
        if rng.random::<f64>() >= p {
            continue;
        }
        // most frequent label, ties to the lowest label
        let (&label, _) = by_label
            .iter()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
            .expect("memory is full");
        let members = by_label.get_mut(&label).expect("label present");
        let (_, victim) = members.pop_first().expect("label has members");
        if members.is_empty() {
            by_label.remove(&label);
        }
        store.remove(&victim);
        insert(s, &mut store, &mut by_label)?;
    }
    finish(memory, store.into_values().collect(), cfg, Vec::new())
}

fn disagreement(
    sample: &Sample,
    committee: &[Box<dyn Predictor>],
    kind: Disagreement,
) -> Result<f64> {
    let preds: Vec<CategoricalDistribution> = committee
        .iter()
        .map(|p| p.predict_sample(sample))
        .collect::<Result<_>>()?;
    Ok(match kind {
        Disagreement::VoteEntropy => crate::sample::mixture(&preds)?.entropy(),
        Disagreement::MemberEntropy => {
            preds.iter().map(CategoricalDistribution::entropy).sum::<f64>() / preds.len() as f64
        }
    })
}

/// Keeps the `capacity` samples the committee is least sure about.
///
/// Ties go to the earlier arrival.
pub fn qbc_select(
    memory: &mut ReplayMemory,
    new_samples: Vec<Sample>,
    cfg: &StrategyConfig,
    predictor: &dyn Predictor,
    committee: &[Box<dyn Predictor>],
    kind: Disagreement,
) -> Result<SelectionOutcome> {
    if committee.is_empty() {
        return Err(Error::EmptyCommittee);
    }
    let pool = checked_pool(memory, new_samples, cfg, predictor)?;
    if pool.len() <= cfg.capacity {
        return finish(memory, pool, cfg, Vec::new());
    }
    let mut scored: Vec<(f64, Sample)> = pool
        .into_iter()
        .map(|s| Ok((disagreement(&s, committee, kind)?, s)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.arrival_index.cmp(&b.1.arrival_index)));
    scored.truncate(cfg.capacity);
    finish(memory, scored.into_iter().map(|(_, s)| s).collect(), cfg, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{OraclePredictor, UniformPredictor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(capacity: usize) -> StrategyConfig {
        StrategyConfig {
            capacity,
            batch_size: 1,
            k_pred: 3,
            k_out: 3,
            task: Task::Classification,
            ..StrategyConfig::default()
        }
    }

    fn stream(labels: &[usize], start: u64) -> Vec<Sample> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Sample {
                arrival_index: start + i as u64,
                ..Sample::new(vec![l as f64], l, l as f64, 3)
            })
            .collect()
    }

    fn run(kind: StrategyKind, labels: &[usize], capacity: usize, seed: u64) -> (ReplayMemory, SelectionOutcome) {
        let mut memory = ReplayMemory::new(capacity);
        let mut strategy = SelectionStrategy::new(kind, StrategyParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = strategy
            .select(&mut memory, stream(labels, 0), &cfg(capacity), &OraclePredictor::new(3), &mut rng)
            .unwrap();
        (memory, out)
    }

    #[test]
    fn names_round_trip() {
        for kind in StrategyKind::ALL {
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!("lru".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn small_pools_are_kept_whole() {
        for kind in StrategyKind::ALL {
            let (memory, out) = run(kind, &[0, 1, 2, 1], 10, 1);
            assert_eq!(memory.len(), 4, "{kind}");
            assert_eq!(out.kept_sample_ids, vec![0, 1, 2, 3], "{kind}");
        }
    }

    #[test]
    fn fifo_keeps_latest() {
        let (_, out) = run(StrategyKind::Fifo, &[0, 0, 0, 0, 0], 2, 0);
        assert_eq!(out.kept_sample_ids, vec![3, 4]);
    }

    #[test]
    fn random_is_reproducible() {
        let labels: Vec<usize> = (0..200).map(|i| i % 3).collect();
        let a = run(StrategyKind::Random, &labels, 20, 5).1;
        let b = run(StrategyKind::Random, &labels, 20, 5).1;
        let c = run(StrategyKind::Random, &labels, 20, 6).1;
        assert_eq!(a, b);
        assert_ne!(a.kept_sample_ids, c.kept_sample_ids);
        assert!(a.retrain);
    }

    #[test]
    fn reservoir_is_uniform_over_history() {
        // 40 samples across four rounds into a memory of 10: each sample
        // should be kept with probability 1/4 at the end
        let mut hits = vec![0usize; 40];
        let rounds = 2000;
        for seed in 0..rounds {
            let mut memory = ReplayMemory::new(10);
            let mut strategy = SelectionStrategy::new(StrategyKind::Random, StrategyParams::default());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for r in 0..4 {
                let batch = stream(&[0; 10], r * 10);
                strategy.select(&mut memory, batch, &cfg(10), &OraclePredictor::new(3), &mut rng).unwrap();
            }
            for s in memory.samples() {
                hits[s.arrival_index as usize] += 1;
            }
        }
        for h in hits {
            let rate = h as f64 / rounds as f64;
            assert!((rate - 0.25).abs() < 0.05, "rate {rate}");
        }
    }

    #[test]
    fn label_count_greedy_discards_majority() {
        let mut labels = vec![0; 90];
        labels.extend(vec![1; 10]);
        let mut memory = ReplayMemory::new(50);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = priority_select(
            &mut memory,
            stream(&labels, 0),
            &cfg(50),
            &OraclePredictor::new(3),
            Score::LabelCount,
            Direction::DiscardHigh,
            0.0,
            &mut rng,
        )
        .unwrap();
        let ones = memory.samples().filter(|s| s.output_bin == 1).count();
        assert_eq!((memory.len() - ones, ones), (40, 10));
        // oldest majority samples go first
        let dropped: Vec<usize> = out.discarded_batch_trace.iter().map(|d| d.batch_index).collect();
        assert_eq!(dropped, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn zero_temperature_loss_discards_minimum_each_step() {
        let mut samples = stream(&[0; 6], 0);
        let losses = [0.5, 0.1, 0.9, 0.1, 2.0, 0.3];
        for (s, l) in samples.iter_mut().zip(losses) {
            s.loss = Some(l);
        }
        let mut memory = ReplayMemory::new(6);
        memory.replace_contents(samples, Vec::new());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // the new sample scores zero loss under the oracle and goes first
        let out = priority_select(
            &mut memory,
            stream(&[1], 6),
            &cfg(3),
            &OraclePredictor::new(3),
            Score::Loss,
            Direction::DiscardLow,
            0.0,
            &mut rng,
        )
        .unwrap();
        let order: Vec<usize> = out.discarded_batch_trace.iter().map(|d| d.batch_index).collect();
        assert_eq!(order, vec![6, 1, 3, 5]);
        assert_eq!(out.kept_sample_ids, vec![0, 2, 4]);
    }

    #[test]
    fn loss_priority_requires_scores() {
        let mut memory = ReplayMemory::new(2);
        memory.replace_contents(stream(&[0, 0], 0), Vec::new());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = priority_select(
            &mut memory,
            stream(&[0], 2),
            &cfg(2),
            &OraclePredictor::new(3),
            Score::Loss,
            Direction::DiscardLow,
            0.01,
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, Error::MissingScores(0));
    }

    #[test]
    fn soft_priority_respects_capacity() {
        let labels: Vec<usize> = (0..300).map(|i| (i * 7) % 3).collect();
        for kind in [
            StrategyKind::PriorityConfidence,
            StrategyKind::PriorityLabelCount,
            StrategyKind::PriorityStalled,
            StrategyKind::PriorityLoss,
        ] {
            let (memory, out) = run(kind, &labels, 40, 2);
            assert_eq!(memory.len(), 40, "{kind}");
            assert_eq!(out.discarded_batch_trace.len(), 260);
            memory.check_invariants().unwrap();
        }
    }

    #[test]
    fn sum_tree_never_picks_empty_leaves() {
        let mut tree = SumTree::new(&[0.0, 1e-300, 0.0, 2.0, 0.0]);
        assert_eq!(tree.find(1.999_999), 3);
        assert_eq!(tree.find(2.5), 3);
        tree.set(3, 0.0);
        assert_eq!(tree.find(0.0), 1);
        assert_eq!(tree.find(1.0), 1);
    }

    #[test]
    fn lars_fills_then_evicts_from_dominant_label() {
        let mut memory = ReplayMemory::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = cfg(4);
        let oracle = OraclePredictor::new(3);
        lars_select(&mut memory, stream(&[0, 0, 0, 1], 0), &c, &oracle, None, &mut rng).unwrap();
        assert_eq!(memory.len(), 4);
        // keep offering label 2 until one gets admitted
        let mut next = 4;
        while memory.samples().all(|s| s.output_bin != 2) {
            lars_select(&mut memory, stream(&[2], next), &c, &oracle, None, &mut rng).unwrap();
            next += 1;
        }
        let zeros = memory.samples().filter(|s| s.output_bin == 0).count();
        assert_eq!(zeros, 2);
        assert_eq!(memory.len(), 4);
    }

    #[test]
    fn lars_admission_decays() {
        assert_eq!(lars_admission(10, 5, None, 10.0), 1.0);
        assert_eq!(lars_admission(10, 20, Some(10), 10.0), 0.5 * 0.5);
        // ten capacities in: C/n = 0.1 and nine halvings
        let late = lars_admission(1000, 10_000, Some(1000), 1000.0);
        assert!((late - 0.1 / 512.0).abs() < 1e-15);
        assert!(late < 0.01);
    }

    #[test]
    fn lars_rejects_regression() {
        let mut memory = ReplayMemory::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = StrategyConfig { task: Task::Regression, ..cfg(4) };
        assert_eq!(
            lars_select(&mut memory, stream(&[0], 0), &c, &OraclePredictor::new(3), None, &mut rng).unwrap_err(),
            Error::NotClassification
        );
    }

    struct Fixed(CategoricalDistribution);

    impl Predictor for Fixed {
        fn bins(&self) -> usize {
            self.0.len()
        }
        fn predict(&self, _: &[f64]) -> Result<CategoricalDistribution> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn qbc_examples() {
        let a = CategoricalDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = CategoricalDistribution::new(vec![0.0, 1.0]).unwrap();
        let split: Vec<Box<dyn Predictor>> = vec![Box::new(Fixed(a.clone())), Box::new(Fixed(b))];
        let s = Sample::new(vec![0.0], 0, 0.0, 2);
        assert_eq!(disagreement(&s, &split, Disagreement::VoteEntropy).unwrap(), 1.0);
        assert_eq!(disagreement(&s, &split, Disagreement::MemberEntropy).unwrap(), 0.0);

        // identical point masses: everything scores zero and arrival order decides
        let same: Vec<Box<dyn Predictor>> = vec![Box::new(Fixed(a.clone())), Box::new(Fixed(a))];
        let mut memory = ReplayMemory::new(2);
        let c = StrategyConfig { k_pred: 2, k_out: 3, ..cfg(2) };
        let out = qbc_select(
            &mut memory,
            stream(&[0, 1, 2, 0], 0),
            &c,
            &UniformPredictor::new(2),
            &same,
            Disagreement::VoteEntropy,
        )
        .unwrap();
        assert_eq!(out.kept_sample_ids, vec![0, 1]);

        assert_eq!(
            qbc_select(&mut memory, vec![], &c, &UniformPredictor::new(2), &[], Disagreement::VoteEntropy)
                .unwrap_err(),
            Error::EmptyCommittee
        );
    }
}
