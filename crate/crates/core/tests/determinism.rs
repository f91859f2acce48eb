use nlb_core::experiments::{run_closed_loop, Scenario};
use nlb_core::sim::log_io::{write_corpus, write_log};

const SCENARIO: &str = r#"
name = "tiny"
seeds = [0]
control = 0

[world]
n_users = 300
initial_corpus = 120
daily_new_content = 6
latent_dim = 4
n_providers = 8
activity_log_mean = 0.0
graduation_threshold = 4
horizon_days = 6

[train]
runs = 1
batches_per_run = 2
batch_size = 32

[plan]
salt = "tiny"
mode = "user_corpus_co_diverted"
arms = [
    { arm = 0, user_fraction = 0.5, corpus_fraction = 0.5 },
    { arm = 1, user_fraction = 0.5, corpus_fraction = 0.5 },
]

[metrics]
thresholds = [1, 3]
window = 3

[[arms]]
arm = 0
slate_size = 3
nominators = [{ kind = "popularity", n = 10 }, { kind = "fresh_tail", n = 5 }]
[arms.learner]
kind = "greedy"
network = { user_dim = 5, content_dim = 6, hidden = [8, 4], learning_rate = 0.05 }

[[arms]]
arm = 1
slate_size = 3
nominators = [{ kind = "popularity", n = 10 }, { kind = "similarity", n = 5, noise = 0.2 }]
[arms.learner]
kind = "neural_linear_ts"
network = { user_dim = 5, content_dim = 6, hidden = [8, 4], learning_rate = 0.05 }
"#;

/// Log, corpus and report bytes of one run.
fn artifacts(sc: &Scenario, seed: u64) -> (Vec<u8>, Vec<u8>, String) {
    let out = run_closed_loop(sc, seed, false).unwrap();
    let mut log = Vec::new();
    write_log(&mut log, &out.log).unwrap();
    let mut corpus = Vec::new();
    write_corpus(&mut corpus, &out.corpus()).unwrap();
    let report = out.report(sc).unwrap();
    (log, corpus, report.to_text() + &report.to_tsv())
}

#[test]
fn reruns_are_byte_identical() {
    let sc = Scenario::from_toml_str(SCENARIO).unwrap();
    let a = artifacts(&sc, 3);
    let b = artifacts(&sc, 3);
    assert!(!a.0.is_empty());
    assert_eq!(a, b);
}

#[test]
fn seeds_change_the_run() {
    let sc = Scenario::from_toml_str(SCENARIO).unwrap();
    assert_ne!(artifacts(&sc, 3).0, artifacts(&sc, 4).0);
}
