use memento::baselines::{SelectionStrategy, StrategyParams};
use memento::predictor::OraclePredictor;
use memento::{ReplayMemory, Sample, StrategyConfig, StrategyKind, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cfg(capacity: usize, temperature: f64) -> StrategyConfig {
    StrategyConfig {
        capacity,
        batch_size: 1,
        temperature,
        k_pred: 3,
        k_out: 3,
        task: Task::Classification,
        ..StrategyConfig::default()
    }
}

fn labelled(labels: &[usize]) -> Vec<Sample> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| Sample {
            arrival_index: i as u64,
            ..Sample::new(vec![l as f64], l, l as f64, 3)
        })
        .collect()
}

fn kept(kind: StrategyKind, params: StrategyParams, pool: Vec<Sample>, config: &StrategyConfig, seed: u64) -> Vec<u64> {
    let mut memory = ReplayMemory::new(config.capacity);
    let mut strategy = SelectionStrategy::new(kind, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    strategy
        .select(&mut memory, pool, config, &OraclePredictor::new(3), &mut rng)
        .unwrap()
        .kept_sample_ids
}

#[test]
fn evaluation_tags_do_not_change_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labels: Vec<usize> = (0..80).map(|_| rng.random_range(0..3)).collect();
    let config = cfg(30, 0.01);
    for kind in StrategyKind::ALL {
        for seed in 0..5 {
            let plain = labelled(&labels);
            let mut tagged = plain.clone();
            for s in &mut tagged {
                s.noise = rng.random_bool(0.3);
                s.class = Some(rng.random_range(0..3));
            }
            let a = kept(kind, StrategyParams::default(), plain, &config, seed);
            let b = kept(kind, StrategyParams::default(), tagged, &config, seed);
            assert_eq!(a, b, "{kind} seed {seed}");
        }
    }
}

#[test]
fn constant_priority_discards_uniformly() {
    let pool_size = 20;
    let runs = 1000;
    let mut discarded = vec![0u32; pool_size];
    let params = StrategyParams {
        priority_temperature: Some(1.0),
        ..StrategyParams::default()
    };
    for seed in 0..runs {
        let pool = labelled(&vec![0; pool_size]);
        let held = kept(StrategyKind::PriorityStalled, params.clone(), pool, &cfg(pool_size - 1, 1.0), seed);
        let gone: Vec<usize> = (0..pool_size).filter(|i| !held.contains(&(*i as u64))).collect();
        assert_eq!(gone.len(), 1);
        discarded[gone[0]] += 1;
    }
    let expected = runs as f64 / pool_size as f64;
    let stat: f64 = discarded
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((pool_size - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat:.2}, p = {p:.2e}, counts {discarded:?}");
}

#[test]
fn singleton_survival_falls_as_temperature_rises() {
    // 19 samples share an output bin, one sits alone in another
    let mut labels = vec![0; 19];
    labels.push(2);
    let singleton = 19u64;
    let runs = 1000;
    let mut rates = Vec::new();
    for t in [0.0, 0.01, 1.0, 1e6] {
        let survived = (0..runs)
            .filter(|&seed| kept(StrategyKind::Memento, StrategyParams::default(), labelled(&labels), &cfg(10, t), seed).contains(&singleton))
            .count();
        rates.push(survived as f64 / runs as f64);
    }
    assert_eq!(rates[0], 1.0);
    // three standard errors of slack between neighbours
    let slack = 3.0 * (0.25 / runs as f64).sqrt();
    for pair in rates.windows(2) {
        assert!(pair[1] <= pair[0] + slack, "survival rates {rates:?}");
    }
    assert!((rates[3] - 0.5).abs() < 0.08, "survival rates {rates:?}");
}
