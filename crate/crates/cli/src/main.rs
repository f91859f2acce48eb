use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use nlb_core::experiments::{
    aa_band, aa_lifts, discoverable_lift, run_ablation_sweep, run_closed_loop, run_data_diverted, run_linear_bandit, BanditAlgorithm, DataDivertedScenario,
    LinearBanditConfig, Scenario,
};
use nlb_core::metrics::build_report;
use nlb_core::sim::log_io::{read_corpus, read_log, write_corpus, write_log};

#[derive(Parser)]
#[command(name = "nlb", version, about = "Closed-loop exploration experiments for neural linear bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write logs and reports.
    Run {
        scenario: PathBuf,
        /// Run only this seed instead of the scenario's list.
        #[arg(long)]
        seed: Option<u64>,
        /// Give every arm the control arm's setup.
        #[arg(long)]
        aa: bool,
        /// Output directory; nothing is written when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a metrics report from exported log and corpus files.
    Metrics {
        scenario: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Write the long-format table here instead of printing the summary.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Data-diverted test: collect per arm, train one model per log, serve both alike.
    DataDiverted {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rerun the control arm at each corpus-ablation fraction of the scenario.
    Ablation {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write daily satisfied users, one column per seed and fraction.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate A/A noise bands for discoverable-corpus lift and store them in the scenario.
    Calibrate {
        scenario: PathBuf,
        /// First calibration seed; keep these disjoint from the scenario's seeds.
        #[arg(long, default_value_t = 1000)]
        from: u64,
        #[arg(long, default_value_t = 20)]
        count: u64,
        /// Rewrite the scenario's [[aa_bands]] tables instead of only printing.
        #[arg(long)]
        write: bool,
    },
    /// Cumulative regret on the known-representation linear bandit.
    Regret {
        /// Bandit config; defaults apply when omitted.
        config: Option<PathBuf>,
        /// Write per-round cumulative regret, one column per seed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            aa,
            out,
        } => run(&scenario, seed, aa, out.as_deref()),
        Command::Metrics {
            scenario,
            log,
            corpus,
            tsv,
        } => metrics(&scenario, &log, &corpus, tsv.as_deref()),
        Command::DataDiverted { scenario, seed } => data_diverted(&scenario, seed),
        Command::Ablation { scenario, seed, out } => ablation(&scenario, seed, out.as_deref()),
        Command::Calibrate {
            scenario,
            from,
            count,
            write,
        } => calibrate(&scenario, from, count, write),
        Command::Regret { config, out } => regret(config.as_deref(), out.as_deref()),
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(path: &Path, seed: Option<u64>, aa: bool, out: Option<&Path>) -> Result<()> {
    let mut sc = load(path)?;
    if aa {
        sc = sc.aa_variant()?;
    }
    let seeds = seed.map_or_else(|| sc.seeds.clone(), |s| vec![s]);
    if seeds.is_empty() {
        bail!("scenario lists no seeds");
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    for s in seeds {
        let start = Instant::now();
        let output = run_closed_loop(&sc, s, false)?;
        let report = output.report(&sc)?;
        println!("== {} seed {s} ({:.1}s)", sc.name, start.elapsed().as_secs_f64());
        print!("{}", report.to_text());
        for t in sc.treatments() {
            for &x in &sc.metrics.thresholds {
                if let Some(l) = discoverable_lift(&report, sc.control, t, x) {
                    println!("lift arm {t} vs {} at X={x}: {l:+.4}", sc.control);
                }
            }
        }
        if let Some(dir) = out {
            let stem = format!("{}-seed{s}", sc.name);
            write_log(&mut create(&dir.join(format!("{stem}.log.tsv")))?, &output.log)?;
            write_corpus(&mut create(&dir.join(format!("{stem}.corpus.tsv")))?, &output.corpus())?;
            create(&dir.join(format!("{stem}.report.txt")))?.write_all(report.to_text().as_bytes())?;
            create(&dir.join(format!("{stem}.report.tsv")))?.write_all(report.to_tsv().as_bytes())?;
        }
    }
    Ok(())
}

fn metrics(path: &Path, log: &Path, corpus: &Path, tsv: Option<&Path>) -> Result<()> {
    let sc = load(path)?;
    let log = read_log(BufReader::new(File::open(log)?))?;
    let corpus = read_corpus(BufReader::new(File::open(corpus)?))?;
    let report = build_report(
        &log,
        &corpus,
        &[],
        None,
        sc.world.graduation_threshold,
        sc.world.horizon_days,
        &sc.metrics,
    );
    match tsv {
        Some(p) => create(p)?.write_all(report.to_tsv().as_bytes())?,
        None => print!("{}", report.to_text()),
    }
    Ok(())
}

fn regret(config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(p) => LinearBanditConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => LinearBanditConfig::default(),
    };
    let mut curves = Vec::new();
    println!("seed  algorithm            total  first_decile  last_decile");
    for &s in &cfg.seeds {
        for algo in [BanditAlgorithm::NeuralLinear, BanditAlgorithm::MisspecifiedGreedy] {
            let t = run_linear_bandit(&cfg, algo, s)?;
            let (first, last) = t.first_and_last_decile();
            let name = match algo {
                BanditAlgorithm::NeuralLinear => "neural_linear",
                BanditAlgorithm::MisspecifiedGreedy => "misspecified_greedy",
            };
            println!("{s:>4}  {name:<19} {:>7.2}  {first:>12.2}  {last:>11.2}", t.total());
            curves.push((format!("{name}_{s}"), t.cumulative()));
        }
    }
    if let Some(p) = out {
        let mut w = create(p)?;
        let header: Vec<&str> = curves.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "round\t{}", header.join("\t"))?;
        for r in 0..cfg.horizon {
            let row: Vec<String> = curves.iter().map(|(_, c)| format!("{:.6}", c[r])).collect();
            writeln!(w, "{}\t{}", r + 1, row.join("\t"))?;
        }
    }
    Ok(())
}

fn data_diverted(path: &Path, seed: Option<u64>) -> Result<()> {
    let sc = DataDivertedScenario::load(path).with_context(|| format!("loading {}", path.display()))?;
    let seeds = seed.map_or_else(|| sc.seeds.clone(), |s| vec![s]);
    for s in seeds {
        let start = Instant::now();
        let report = run_data_diverted(&sc, s)?;
        println!("== {} seed {s} ({:.1}s)", sc.name, start.elapsed().as_secs_f64());
        print!("{}", report.to_text());
    }
    Ok(())
}

fn ablation(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let sc = load(path)?;
    let Some(sweep) = sc.ablation_sweep.clone() else {
        bail!("scenario {} has no [ablation_sweep] section", path.display());
    };
    let seeds = seed.map_or_else(|| sc.seeds.clone(), |s| vec![s]);
    let mut columns = Vec::new();
    println!("seed  fraction  satisfied  impressions  positives");
    for s in seeds {
        for p in run_ablation_sweep(&sc, &sweep, s)? {
            println!(
                "{s:>4}  {:>8.3}  {:>9.1}  {:>11}  {:>9}",
                p.fraction, p.satisfied, p.impressions, p.positives
            );
            columns.push((format!("seed{s}_x{}", p.fraction), p.series));
        }
    }
    if let Some(p) = out {
        let mut w = create(p)?;
        let header: Vec<&str> = columns.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "day\t{}", header.join("\t"))?;
        for d in 0..sc.world.horizon_days as usize {
            let row: Vec<String> = columns.iter().map(|(_, c)| c[d].to_string()).collect();
            writeln!(w, "{d}\t{}", row.join("\t"))?;
        }
    }
    Ok(())
}

fn calibrate(path: &Path, from: u64, count: u64, write: bool) -> Result<()> {
    let sc = load(path)?;
    if sc.seeds.iter().any(|s| (from..from + count).contains(s)) {
        bail!("calibration seeds overlap the scenario's seeds");
    }
    let mut lifts: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for s in from..from + count {
        let start = Instant::now();
        let row = aa_lifts(&sc, s)?;
        let text: Vec<String> = row.iter().map(|(x, l)| format!("X={x}: {l:+.4}")).collect();
        println!("seed {s} ({:.1}s) {}", start.elapsed().as_secs_f64(), text.join("  "));
        for (x, l) in row {
            lifts.entry(x).or_default().push(l);
        }
    }
    let bands: Vec<_> = lifts.iter().map(|(&x, l)| aa_band(x, l)).collect();
    for b in &bands {
        println!("X={}: [{:+.4}, {:+.4}] from {} seeds", b.threshold, b.lower, b.upper, b.seeds);
    }
    if write {
        let text = fs::read_to_string(path)?;
        let mut doc: toml_edit::DocumentMut = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let mut tables = toml_edit::ArrayOfTables::new();
        for b in &bands {
            let mut t = toml_edit::Table::new();
            t["threshold"] = toml_edit::value(b.threshold as i64);
            t["lower"] = toml_edit::value(b.lower);
            t["upper"] = toml_edit::value(b.upper);
            t["seeds"] = toml_edit::value(b.seeds as i64);
            tables.push(t);
        }
        doc.insert("aa_bands", toml_edit::Item::ArrayOfTables(tables));
        fs::write(path, doc.to_string())?;
        load(path)?;
    }
    Ok(())
}
