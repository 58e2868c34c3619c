use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use palloop::bow::Vocabulary;
use palloop::eval::{evaluate_trajectories, precision_recall, write_pr_csv, DetectionRecord, EvalOptions, Trajectory};
use palloop::pipeline::{
    run_pipeline, run_pr_experiment, train_scenario_vocabulary, write_run_outputs, PrExperimentConfig, RunConfig,
};
use palloop::sim::{generate, ScenarioConfig};

/// Bad input from the user: a missing file, unreadable or invalid config.
/// Exits with status 2.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "palloop", version, about = "Panoramic loop-closure experiments on simulated scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a BoW vocabulary on frames sampled from a scenario.
    BuildVocab(BuildVocabArgs),
    /// Run odometry, loop closure and backend on a simulated scenario.
    Run(RunArgs),
    /// Compare an estimated trajectory with ground truth.
    Evaluate(EvaluateArgs),
    /// Place-recognition precision/recall across feature budgets.
    PrExperiment(PrArgs),
}

#[derive(Args)]
struct BuildVocabArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Branching factor.
    #[arg(long, default_value_t = 10)]
    k: u32,
    /// Tree depth.
    #[arg(long = "levels", short = 'L', default_value_t = 4)]
    levels: u32,
    #[arg(long, default_value_t = 1600)]
    features: usize,
    /// Frames sampled for training.
    #[arg(long, default_value_t = 40)]
    frames: usize,
    #[arg(long, default_value = "vocabulary.pbow")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration JSON; defaults for every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    no_loop_closure: bool,
    #[arg(long)]
    no_global_ba: bool,
    /// Vocabulary file; overrides the config.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write accepted constraints as JSON lines.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Estimated trajectory (`t tx ty tz qx qy qz qw` lines).
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory in the same format.
    #[arg(long)]
    gt: PathBuf,
    /// Loop detections as JSON lines `{query, candidate, score}`.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Index-difference bound for a correct detection.
    #[arg(long, default_value_t = 30)]
    interval: usize,
    #[arg(long, default_value_t = 0.05)]
    max_time_gap: f64,
    /// Share of poses in the beginning and end segments.
    #[arg(long, default_value_t = 0.1)]
    segment_fraction: f64,
    /// Directory for `metrics.json` and `pr.csv`; metrics go to stdout
    /// either way.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PrArgs {
    /// Experiment configuration JSON; defaults for every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

fn build_vocab(args: BuildVocabArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(p) => ScenarioConfig::load(p).map_err(|e| input_error(format!("{}: {e}", p.display())))?,
        None => ScenarioConfig::default(),
    };
    let sc = generate(&scenario, args.seed).map_err(|e| input_error(e.to_string()))?;
    let vocab = train_scenario_vocabulary(&sc, args.features, args.frames, args.k, args.levels, args.seed)?;
    vocab
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let idf = vocab.idf_table();
    let (lo, hi) = idf.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = idf.iter().sum::<f64>() / idf.len().max(1) as f64;
    println!("leaves: {}", vocab.meta().leaf_count);
    println!("idf: min {lo:.4} mean {mean:.4} max {hi:.4}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn load_run_config(path: Option<&Path>) -> Result<(RunConfig, PathBuf)> {
    match path {
        Some(p) => {
            let text = read_input(p)?;
            let cfg =
                RunConfig::from_json(&text).map_err(|e| input_error(format!("invalid config {}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            Ok((cfg, base))
        }
        None => Ok((RunConfig::default(), PathBuf::from("."))),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (mut cfg, base) = load_run_config(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.features {
        cfg.features = n;
    }
    if args.no_loop_closure {
        cfg.loop_closure = false;
    }
    if args.no_global_ba {
        cfg.global_ba = false;
    }
    if let Some(v) = args.vocab {
        // Relative to the working directory, unlike paths in the config.
        cfg.vocabulary = Some(std::path::absolute(&v)?);
    }
    if let Some(o) = args.out {
        cfg.output_dir = o;
    }
    let scenario_cfg = cfg.resolve_scenario(&base).map_err(|e| input_error(e.to_string()))?;
    let scenario = generate(&scenario_cfg, cfg.seed).map_err(|e| input_error(e.to_string()))?;

    let vocab = match &cfg.vocabulary {
        Some(p) => {
            let p = base.join(p);
            if !p.exists() {
                return Err(input_error(format!("vocabulary {} not found", p.display())));
            }
            Vocabulary::load(&p).with_context(|| format!("loading {}", p.display()))?
        }
        None => {
            info!("training vocabulary on {} frames", cfg.vocab_training_frames);
            train_scenario_vocabulary(
                &scenario,
                cfg.features,
                cfg.vocab_training_frames,
                cfg.vocab_k,
                cfg.vocab_depth,
                cfg.seed,
            )?
        }
    };

    info!("running {} keyframes", scenario.ground_truth.len());
    let output = run_pipeline(&scenario, &cfg, &vocab);
    let dir = &cfg.output_dir;
    let mut written = write_run_outputs(&output, dir, args.trace).with_context(|| format!("writing {}", dir.display()))?;
    let gt = dir.join("ground_truth.txt");
    scenario.ground_truth.save(&gt)?;
    written.push(gt);
    let used = dir.join("config.json");
    fs::write(&used, cfg.to_json() + "\n")?;
    written.push(used);

    let s = &output.summary;
    eprintln!(
        "keyframes {}  loops {}/{}  loop closure error {:.3}% -> {:.3}%  total {:.2}s",
        s.keyframes,
        s.loops_accepted,
        s.loop_queries,
        s.loop_closure_error_pct_before,
        s.loop_closure_error_pct_after,
        s.times.total_s
    );
    for p in written {
        info!("wrote {}", p.display());
    }
    Ok(())
}

fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = read_input(path)?;
    Trajectory::parse(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let est = load_trajectory(&args.est)?;
    let gt = load_trajectory(&args.gt)?;
    let opts = EvalOptions {
        max_time_gap: args.max_time_gap,
        segment_fraction: args.segment_fraction,
    };
    let metrics = evaluate_trajectories(&est, &gt, &opts)?;
    let json = serde_json::to_string_pretty(&metrics)?;
    println!("{json}");

    let curve = match &args.detections {
        Some(p) => {
            let text = read_input(p)?;
            let records = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| {
                    serde_json::from_str::<DetectionRecord>(l)
                        .map_err(|e| input_error(format!("{} line {}: {e}", p.display(), i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(precision_recall(&records, args.interval))
        }
        None => None,
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("metrics.json"), json + "\n")?;
        if let Some(curve) = &curve {
            write_pr_csv(fs::File::create(dir.join("pr.csv"))?, curve)?;
        }
    } else if let Some(curve) = &curve {
        write_pr_csv(std::io::stdout().lock(), curve)?;
    }
    Ok(())
}

fn pr_experiment(args: PrArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<PrExperimentConfig>(&read_input(p)?)
            .map_err(|e| input_error(format!("invalid config {}: {e}", p.display())))?,
        None => PrExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let scenario = generate(&cfg.scenario, cfg.seed).map_err(|e| input_error(e.to_string()))?;
    let budget = cfg.budgets.iter().copied().max().unwrap_or(1600);
    let vocab = train_scenario_vocabulary(&scenario, budget, 40, 10, 4, cfg.seed)?;
    let curves = run_pr_experiment(&scenario, &vocab, &cfg);
    fs::create_dir_all(&args.out)?;
    let mut summary = Vec::new();
    for c in &curves {
        write_pr_csv(fs::File::create(args.out.join(format!("pr_{}.csv", c.budget)))?, &c.curve)?;
        eprintln!("features {:5}  recall at precision 1: {:.3}", c.budget, c.recall_at_full_precision);
        summary.push(serde_json::json!({
            "features": c.budget,
            "recall_at_full_precision": c.recall_at_full_precision,
            "queries": c.records.len(),
        }));
    }
    fs::write(
        args.out.join("pr_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildVocab(a) => build_vocab(a),
        Command::Run(a) => run(a),
        Command::Evaluate(a) => evaluate(a),
        Command::PrExperiment(a) => pr_experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
