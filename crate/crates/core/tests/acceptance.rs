//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. The long scenario runs take several minutes
//! each on one core.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlb_core::bayes_linear::{CovarianceAccumulator, Strategy, DEFAULT_EPSILON, DEFAULT_SIGMA_SQ};
use nlb_core::experiments::{
    ablate_nominations, discoverable_lift, run_ablation_sweep, run_closed_loop, run_data_diverted, run_linear_bandit,
    AblationSpec, BanditAlgorithm, DataDivertedScenario, LinearBanditConfig, Scenario,
};
use nlb_core::metrics::CorrelationTable;
use nlb_core::ranker::{rank, Policy};
use nlb_core::representation::{Activation, FeatureRecord, NetworkConfig, RepresentationModel};
use nlb_core::sim::log_io::{write_corpus, write_log};
use nlb_core::sim::{ContentId, UserId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let rewards = (0..n).map(|_| f64::from(rng.random_bool(0.3) as u8)).collect();
    (rows, rewards)
}

fn accumulate(d: usize, eps: f64, rows: &[Vec<f64>], rewards: &[f64]) -> CovarianceAccumulator {
    let mut acc = CovarianceAccumulator::new(d, eps, DEFAULT_SIGMA_SQ).unwrap();
    for (phi, r) in rows.iter().zip(rewards) {
        acc.accumulate(phi, *r).unwrap();
    }
    acc
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn streaming_matches_batch() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..=32);
        let n = rng.random_range(2 * d..=1000);
        let (rows, rewards) = random_rows(&mut rng, n, d);
        let want = common::batch_ridge(d, DEFAULT_EPSILON, &rows, &rewards);
        let acc = accumulate(d, DEFAULT_EPSILON, &rows, &rewards);
        for s in [Strategy::PseudoInverse, Strategy::Cholesky] {
            let got = acc.finalize(s).unwrap();
            worst = worst.max((got.beta_hat() - &want).norm() / want.norm());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 10.0, format!("max relative error {worst:.2e}, {secs:.2}s"))
}

fn strategies_agree() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..=32);
        let n = rng.random_range(2 * d..=1000);
        let (rows, rewards) = random_rows(&mut rng, n, d);
        let acc = accumulate(d, DEFAULT_EPSILON, &rows, &rewards);
        let (p, c) = (acc.finalize(Strategy::PseudoInverse).unwrap(), acc.finalize(Strategy::Cholesky).unwrap());
        worst = worst.max((p.beta_hat() - c.beta_hat()).norm() / c.beta_hat().norm());
        for probe in random_rows(&mut rng, 10, d).0 {
            worst = worst.max(rel(p.variance(&probe).unwrap(), c.variance(&probe).unwrap()));
        }
    }
    // duplicated column with a negligible prior: singular to working precision
    let d = 6;
    let (mut rows, rewards) = random_rows(&mut rng, 300, d);
    for r in &mut rows {
        r[5] = r[2];
    }
    let acc = accumulate(d, 1e-13, &rows, &rewards);
    let deficient = match acc.finalize(Strategy::PseudoInverse) {
        Ok(post) => random_rows(&mut rng, 50, d)
            .0
            .iter()
            .all(|phi| post.variance(phi).is_ok_and(|v| v.is_finite() && v >= 0.0)),
        Err(_) => false,
    };
    outcome(
        worst < 1e-8 && deficient,
        format!("full-rank max relative difference {worst:.2e}; rank-deficient variances nonnegative: {deficient}"),
    )
}

fn thompson_sampling() -> Outcome {
    let (policy, cands) = common::identity_policy(4, 30, 2.0, 11);
    let Policy::NeuralLinearTs { model, posterior, .. } = &policy else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let n = 100_000;
    let mut worst_z: f64 = 0.0;
    for c in &cands {
        let phi = model.embed(&c.features).unwrap();
        let (m, v) = (posterior.mean(&phi).unwrap(), posterior.variance(&phi).unwrap());
        let draws: Vec<f64> = (0..n).map(|_| posterior.sample_score(&phi, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        worst_z = worst_z
            .max((mean - m).abs() / (v / n as f64).sqrt())
            .max((var - v).abs() / (v * (2.0 / (n - 1) as f64).sqrt()));
    }
    let (policy, cands) = common::identity_policy(3, 8, 1.0, 5);
    let (means, sds): (Vec<f64>, Vec<f64>) = cands
        .iter()
        .map(|c| {
            let s = policy.score_distribution(&c.features).unwrap();
            (s.mean, s.variance.sqrt())
        })
        .unzip();
    let oracle = common::gaussian_argmax(&means, &sds);
    let mut wins = vec![0usize; cands.len()];
    for _ in 0..n {
        wins[rank(&policy, &cands, 1, &mut rng).unwrap()[0].id.0 as usize] += 1;
    }
    let gap = wins
        .iter()
        .zip(&oracle)
        .map(|(&w, &p)| (w as f64 / n as f64 - p).abs())
        .fold(0.0, f64::max);
    outcome(
        worst_z < 4.0 && gap < 0.01,
        format!("worst moment deviation {worst_z:.2} se; argmax frequency gap {gap:.4}"),
    )
}

fn gradients() -> Outcome {
    let cfg = NetworkConfig {
        user_dim: 9,
        content_dim: 10,
        hidden: vec![16, 8],
        activation: Activation::Tanh,
        learning_rate: 0.05,
        init_seed: 404,
    };
    let model = RepresentationModel::new(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let recs: Vec<FeatureRecord> = (0..8)
        .map(|_| {
            let (u, c) = (random_rows(&mut rng, 1, 9).0, random_rows(&mut rng, 1, 10).0);
            FeatureRecord::new(u[0].clone(), c[0].clone())
        })
        .collect();
    let batch: Vec<(&FeatureRecord, f64)> = recs.iter().zip([1.0, 0.0].iter().cycle()).map(|(r, &y)| (r, y)).collect();
    let (_, grad) = model.loss_and_gradient(&batch).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..model.num_params() {
        let mut plus = model.clone();
        plus.params_mut()[i] += h;
        let mut minus = model.clone();
        minus.params_mut()[i] -= h;
        let fd = (plus.loss(&batch).unwrap() - minus.loss(&batch).unwrap()) / (2.0 * h);
        // the floor keeps components below finite-difference resolution from dominating
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-5));
    }
    outcome(worst < 1e-4, format!("{} parameters, max relative error {worst:.2e}", model.num_params()))
}

fn regret_decays() -> Outcome {
    let start = Instant::now();
    let cfg = LinearBanditConfig::default();
    let mut ratios = Vec::new();
    for &s in &cfg.seeds {
        let (first, last) = run_linear_bandit(&cfg, BanditAlgorithm::NeuralLinear, s).unwrap().first_and_last_decile();
        ratios.push(last / first);
    }
    let secs = start.elapsed().as_secs_f64();
    let good = ratios.iter().filter(|&&r| r < 0.25).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(
        good >= 9 && secs < 60.0,
        format!("last/first decile [{}], {good}/10 below 0.25, {secs:.1}s", shown.join(" ")),
    )
}

/// Lifts of the first treatment over control at every metric threshold.
fn lifts(sc: &Scenario, seed: u64) -> (Vec<(u64, f64)>, Vec<CorrelationTable>, f64) {
    let start = Instant::now();
    let out = run_closed_loop(sc, seed, false).unwrap();
    let report = out.report(sc).unwrap();
    let t = sc.treatments().next().unwrap();
    let l = sc
        .metrics
        .thresholds
        .iter()
        .map(|&x| (x, discoverable_lift(&report, sc.control, t, x).unwrap()))
        .collect();
    (l, report.correlations, start.elapsed().as_secs_f64())
}

fn dedicated_slots() -> Outcome {
    let sc = Scenario::load(scenario_path("dedicated_slots.toml")).unwrap();
    let aa = sc.aa_variant().unwrap();
    let mut wins = vec![0usize; sc.metrics.thresholds.len()];
    let mut outside = Vec::new();
    let mut slowest: f64 = 0.0;
    let mut shown = Vec::new();
    for &s in &sc.seeds {
        let (l, _, secs) = lifts(&sc, s);
        slowest = slowest.max(secs);
        for (i, (_, v)) in l.iter().enumerate() {
            wins[i] += usize::from(*v > 0.0);
        }
        shown.push(l.iter().map(|(_, v)| format!("{v:+.2}")).collect::<Vec<_>>().join("/"));
        let (la, _, secs) = lifts(&aa, s);
        slowest = slowest.max(secs);
        for (x, v) in la {
            match sc.band(x) {
                Some(b) if (b.lower..=b.upper).contains(&v) => {}
                _ => outside.push(format!("seed {s} X={x}: {v:+.3}")),
            }
        }
    }
    let pass = wins.iter().all(|&w| w >= 4) && outside.is_empty() && slowest < 300.0;
    outcome(
        pass,
        format!(
            "lifts at X={:?}: [{}]; wins {wins:?}; A/A outside band: {outside:?}; slowest seed {slowest:.0}s",
            sc.metrics.thresholds,
            shown.join(" ")
        ),
    )
}

fn nlb_codiverted() -> (Outcome, Vec<CorrelationTable>) {
    let sc = Scenario::load(scenario_path("nlb_codiverted.toml")).unwrap();
    let mut positive = 0;
    let mut shown = Vec::new();
    let mut tables = Vec::new();
    for &s in &sc.seeds {
        let (l, corr, _) = lifts(&sc, s);
        // discoverable corpus lift over all buckets
        positive += usize::from(l.iter().all(|(_, v)| *v > 0.0));
        shown.push(l.iter().map(|(_, v)| format!("{v:+.2}")).collect::<Vec<_>>().join("/"));
        if tables.is_empty() {
            tables = corr;
        }
    }
    (
        outcome(positive >= 4, format!("lifts at X={:?}: [{}]; {positive}/5 positive", sc.metrics.thresholds, shown.join(" "))),
        tables,
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn corpus_ablation() -> Outcome {
    let sc = Scenario::load(scenario_path("ablation.toml")).unwrap();
    let sweep = sc.ablation_sweep.clone().unwrap();
    let mut by_x = vec![Vec::new(); sweep.fractions.len()];
    for &s in &sc.seeds {
        for (i, p) in run_ablation_sweep(&sc, &sweep, s).unwrap().into_iter().enumerate() {
            by_x[i].push(p.satisfied);
        }
    }
    let medians: Vec<f64> = by_x.into_iter().map(median).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);

    let items: Vec<ContentId> = (0..50).map(ContentId).collect();
    let mut worst: f64 = 0.0;
    for &x in sweep.fractions.iter().filter(|&&x| x > 0.0) {
        let spec = AblationSpec::new(x, "survival").unwrap();
        let mut kept = vec![0u32; items.len()];
        let users = 100_000u32;
        for u in 0..users {
            for id in &ablate_nominations(std::slice::from_ref(&items), &spec, UserId(u))[0] {
                kept[id.0 as usize] += 1;
            }
        }
        for k in kept {
            worst = worst.max((f64::from(k) / f64::from(users) - (1.0 - x)).abs());
        }
    }
    let shown: Vec<String> = sweep
        .fractions
        .iter()
        .zip(&medians)
        .map(|(x, m)| format!("x={x}: {m:.1}"))
        .collect();
    outcome(
        monotone && worst < 0.01,
        format!("median satisfied users {}; max survival deviation {worst:.4}", shown.join(", ")),
    )
}

/// `estimate +- 2 se` must satisfy the bound entirely.
fn spearman_ok(tables: &[CorrelationTable]) -> (bool, Vec<String>) {
    let mut ok = !tables.is_empty();
    let mut shown = Vec::new();
    for t in tables {
        for r in &t.rows {
            let (Some(e), Some(se)) = (r.estimate, r.std_error) else {
                ok = false;
                continue;
            };
            let pass = match r.feature.as_str() {
                "user_activity" => e.abs() + 2.0 * se < 0.15,
                _ => e + 2.0 * se < -0.1,
            };
            ok &= pass;
            shown.push(format!("{} {} {e:+.3}+-{:.3}", t.label, r.feature, 2.0 * se));
        }
    }
    (ok, shown)
}

fn determinism() -> Outcome {
    let sc = Scenario::load(scenario_path("smoke.toml")).unwrap();
    let bytes = || {
        let out = run_closed_loop(&sc, 7, false).unwrap();
        let mut b = Vec::new();
        write_log(&mut b, &out.log).unwrap();
        write_corpus(&mut b, &out.corpus()).unwrap();
        let report = out.report(&sc).unwrap();
        b.extend_from_slice(report.to_text().as_bytes());
        b.extend_from_slice(report.to_tsv().as_bytes());
        b
    };
    let (a, b) = (bytes(), bytes());
    let dd = DataDivertedScenario::load(scenario_path("data_diverted_smoke.toml")).unwrap();
    let dd_text = || run_data_diverted(&dd, 7).unwrap().to_text();
    let (c, d) = (dd_text(), dd_text());
    outcome(
        a == b && c == d,
        format!("closed loop {} bytes identical: {}; data-diverted report identical: {}", a.len(), a == b, c == d),
    )
}

fn report(results: &mut Vec<(u32, &'static str, Outcome)>, n: u32, name: &'static str, o: Outcome) {
    println!("{} {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((n, name, o));
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    report(&mut results, 1, "streaming posterior equals batch ridge", streaming_matches_batch());
    report(&mut results, 2, "pseudo-inverse and Cholesky agree", strategies_agree());
    report(&mut results, 3, "Thompson sampling moments and argmax", thompson_sampling());
    report(&mut results, 4, "network gradients match finite differences", gradients());
    report(&mut results, 5, "linear bandit regret decays", regret_decays());
    report(&mut results, 6, "dedicated slots grow discoverable corpus", dedicated_slots());
    let (nlb, nlb_tables) = nlb_codiverted();
    report(&mut results, 7, "neural linear bandit grows discoverable corpus", nlb);
    report(&mut results, 8, "corpus ablation lowers satisfied users", corpus_ablation());

    let dd = DataDivertedScenario::load(scenario_path("data_diverted.toml")).unwrap();
    let mut lower = 0;
    let mut single = true;
    let mut shown = Vec::new();
    let mut ensemble_tables = Vec::new();
    for &s in &dd.seeds {
        let r = run_data_diverted(&dd, s).unwrap();
        let (c, t) = r.final_uncertainty();
        lower += usize::from(t < c);
        single &= r.single_evaluation_policy();
        shown.push(format!("{t:.4}<{c:.4}"));
        if ensemble_tables.is_empty() {
            ensemble_tables = r.correlations;
        }
    }
    let mut tables = nlb_tables;
    tables.extend(ensemble_tables);
    let (ok, rows) = spearman_ok(&tables);
    report(&mut results, 9, "uncertainty correlations", outcome(ok, rows.join("; ")));
    report(
        &mut results,
        10,
        "exploration data lowers ensemble uncertainty",
        outcome(
            lower >= 4 && single,
            format!("treatment vs control at last step [{}]; {lower}/5; one serving policy: {single}", shown.join(" ")),
        ),
    );
    report(&mut results, 11, "reruns are byte-identical", determinism());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
