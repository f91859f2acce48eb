use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlb_core::bayes_linear::{CovarianceAccumulator, Strategy};
use nlb_core::experiments::{Learner, LearnerSpec};
use nlb_core::ranker::{rank, Candidate, PolicyKind};
use nlb_core::representation::{FeatureRecord, NetworkConfig};
use nlb_core::sim::{build_world, run_day, ArmId, ArmPlan, ContentId, NominatorSpec, WorldConfig};

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn filled_accumulator(d: usize, n: usize) -> CovarianceAccumulator {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut acc = CovarianceAccumulator::new(d, 1e-3, 1.0).unwrap();
    for _ in 0..n {
        let phi = random_vec(&mut rng, d);
        acc.accumulate(&phi, rng.random_range(0.0..1.0)).unwrap();
    }
    acc
}

fn bayes_linear(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let phis: Vec<Vec<f64>> = (0..1000).map(|_| random_vec(&mut rng, 32)).collect();
    c.bench_function("accumulate 1000 x d=32", |b| {
        b.iter_batched(
            || CovarianceAccumulator::new(32, 1e-3, 1.0).unwrap(),
            |mut acc| {
                for phi in &phis {
                    acc.accumulate(phi, 1.0).unwrap();
                }
                acc
            },
            BatchSize::SmallInput,
        )
    });
    let acc = filled_accumulator(32, 1000);
    c.bench_function("finalize pseudo-inverse d=32", |b| {
        b.iter(|| acc.finalize(Strategy::PseudoInverse).unwrap())
    });
    c.bench_function("finalize cholesky d=32", |b| b.iter(|| acc.finalize(Strategy::Cholesky).unwrap()));
    let post = acc.finalize(Strategy::Cholesky).unwrap();
    let phi = &phis[0];
    c.bench_function("variance d=32", |b| b.iter(|| post.variance(black_box(phi)).unwrap()));
}

fn network() -> NetworkConfig {
    NetworkConfig {
        user_dim: 9,
        content_dim: 10,
        hidden: vec![64, 32],
        activation: Default::default(),
        learning_rate: 0.05,
        init_seed: 0,
    }
}

fn ranking(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let user = random_vec(&mut rng, 9);
    let candidates: Vec<Candidate> = (0..100)
        .map(|i| Candidate {
            id: ContentId(i),
            features: FeatureRecord::new(user.clone(), random_vec(&mut rng, 10)),
        })
        .collect();
    for kind in [PolicyKind::Greedy, PolicyKind::NeuralLinearTs, PolicyKind::EnsembleTs] {
        let policy = Learner::new(&LearnerSpec::new(kind, network()), 3).unwrap().policy();
        c.bench_function(&format!("rank 100 candidates, {kind:?}"), |b| {
            b.iter(|| rank(&policy, &candidates, 4, &mut rng).unwrap())
        });
    }
}

fn simulation(c: &mut Criterion) {
    let world = build_world(WorldConfig {
        n_users: 2000,
        initial_corpus: 1000,
        daily_new_content: 40,
        ..WorldConfig::default()
    })
    .unwrap();
    let mut world = world;
    world.assign_users(|_| Some(ArmId(0)));
    let mut net = network();
    net.user_dim = world.config().user_feature_dim();
    net.content_dim = world.config().content_feature_dim();
    let policy = Learner::new(&LearnerSpec::new(PolicyKind::NeuralLinearTs, net), 4).unwrap().policy();
    let nominators = vec![
        NominatorSpec::Popularity { n: 50 },
        NominatorSpec::Similarity { n: 40, noise: 0.1 },
        NominatorSpec::FreshTail { n: 10 },
    ];
    let plans: BTreeMap<ArmId, ArmPlan> = [(ArmId(0), ArmPlan::new(policy, nominators, 4))].into();
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("run_day 2000 users", |b| {
        b.iter_batched(
            || world.clone(),
            |mut w| run_day(&mut w, &plans).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, bayes_linear, ranking, simulation);
criterion_main!(benches);
