use memento_harness::workload::inject_noise;
use memento_harness::{ScenarioKind, ScenarioSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn raw_outputs(spec: &ScenarioSpec, iteration: usize, class: usize) -> Vec<f64> {
    spec.stream()
        .unwrap()
        .nth(iteration)
        .unwrap()
        .into_iter()
        .filter(|s| s.class == Some(class))
        .map(|s| s.raw_output)
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

// Two-sample Kolmogorov-Smirnov statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    worst
}

#[test]
fn stationary_mixture_has_the_long_run_shares() {
    let mut spec = ScenarioSpec::new(ScenarioKind::RarePatterns, 5);
    spec.stationary = true;
    spec.iterations = 4;
    let n = spec.iterations * spec.samples_per_iteration;
    let mut counts = [0usize; 3];
    for s in spec.stream().unwrap().flatten() {
        counts[s.class.unwrap()] += 1;
    }
    for (class, want) in [(0, 0.013), (2, 0.005)] {
        let share = counts[class] as f64 / n as f64;
        let sigma = (want * (1.0 - want) / n as f64).sqrt();
        assert!((share - want).abs() <= 3.0 * sigma, "class {class}: {share} vs {want}");
        assert!((share - want).abs() <= 0.002);
    }
}

#[test]
fn drift_doubles_the_output_median() {
    let mut spec = ScenarioSpec::new(ScenarioKind::GradualDrift, 1);
    spec.samples_per_iteration = 9_000;
    for class in 0..3 {
        let first = median(raw_outputs(&spec, 0, class));
        let last = median(raw_outputs(&spec, 25, class));
        let ratio = last / first;
        assert!((ratio - 2.0).abs() < 0.1, "class {class}: median ratio {ratio}");
    }
}

#[test]
fn outputs_are_stationary_within_a_phase() {
    let mut spec = ScenarioSpec::new(ScenarioKind::GradualDrift, 2);
    spec.samples_per_iteration = 6_000;
    let a = raw_outputs(&spec, 10, 0);
    let b = raw_outputs(&spec, 19, 0);
    let critical = 1.63 * ((a.len() + b.len()) as f64 / (a.len() * b.len()) as f64).sqrt();
    let d = ks(a.clone(), b);
    assert!(d < critical, "KS {d} >= {critical}");
    let later = raw_outputs(&spec, 20, 0);
    assert!(ks(a, later) > critical, "phase change not detected");
}

#[test]
fn streams_are_reproducible() {
    let mut spec = ScenarioSpec::new(ScenarioKind::Incremental, 3);
    spec.samples_per_iteration = 500;
    spec.iterations = 4;
    let a: Vec<_> = spec.stream().unwrap().collect();
    let b: Vec<_> = spec.stream().unwrap().collect();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_replaces_the_rounded_share(n in 1usize..400, fraction in 0.0..=1.0f64, seed in any::<u64>()) {
        let mut spec = ScenarioSpec::new(ScenarioKind::RarePatterns, seed);
        spec.samples_per_iteration = n;
        spec.iterations = 1;
        let mut samples = spec.stream().unwrap().next().unwrap();
        let arrivals: Vec<u64> = samples.iter().map(|s| s.arrival_index).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let replaced = inject_noise(&mut samples, fraction, &spec.noise_model(), &mut rng).unwrap();
        prop_assert_eq!(replaced, (fraction * n as f64).round() as usize);
        prop_assert_eq!(samples.iter().filter(|s| s.noise).count(), replaced);
        prop_assert!(samples.iter().filter(|s| s.noise).all(|s| s.class.is_none()));
        prop_assert_eq!(samples.iter().map(|s| s.arrival_index).collect::<Vec<_>>(), arrivals);
    }
}
