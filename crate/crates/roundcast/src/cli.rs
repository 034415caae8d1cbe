//! Operator-facing command surface: synth, train, eval, predict, bench.
//!
//! Every run resolves its effective settings (flags over `--config` over
//! the `ROUNDCAST_DATA_DIR` environment variable over defaults) and writes
//! them to `config_resolved.json` in the output directory, so any run can
//! be replayed exactly with `--config`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::data::{
    class_distribution, load_rounds, load_rounds_from_frames, save_rounds, synth_generate,
    truncate_round, write_sheet_csvs, Round,
};
use crate::error::{Error, Result};
use crate::eval::{
    bench_inference, roc_auc, roc_auc_ci, roc_curve, write_roc_csv, FoldMetrics, LatencyStats,
    MetricsReport,
};
use crate::optim::{predict_scores, train_kfold, TrainConfig};
use crate::tensor::SeededRng;

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "ROUNDCAST_DATA_DIR";

const RESOLVED_CONFIG_FILE: &str = "config_resolved.json";

#[derive(Parser)]
#[command(
    name = "roundcast",
    version,
    about = "Round outcome prediction from partial damage time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of rounds
    Synth(SynthArgs),
    /// Train a model with grouped k-fold cross-validation
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics JSON and ROC curve CSV
    Eval(EvalArgs),
    /// Print win probabilities for rounds given as JSON lines
    Predict(PredictArgs),
    /// Measure inference latency across progression values
    Bench(BenchArgs),
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// The resolved settings of one run, tagged by command so a file written
/// by any subcommand replays through the same subcommand only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Synth(SynthConfig),
    Train(TrainRunConfig),
    Eval(EvalRunConfig),
    Predict(PredictRunConfig),
    Bench(BenchRunConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub rounds: usize,
    pub seed: u64,
    pub noise: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub train: TrainConfig,
    pub data_path: PathBuf,
    pub out_dir: PathBuf,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunConfig {
    pub checkpoint: PathBuf,
    pub data_path: PathBuf,
    pub out_dir: PathBuf,
    pub progression: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRunConfig {
    pub checkpoint: PathBuf,
    pub round_file: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRunConfig {
    pub checkpoint: PathBuf,
    pub data_path: PathBuf,
    pub out_dir: PathBuf,
    pub progressions: Vec<f64>,
    pub repetitions: usize,
    pub warmup: usize,
    pub batch_size: usize,
}

fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_run_config(out_dir: &Path, config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::Format(format!("could not serialize run config: {e}")))?;
    std::fs::write(out_dir.join(RESOLVED_CONFIG_FILE), json + "\n")?;
    Ok(())
}

/// Dataset path resolution: explicit flag, then the replayed config, then
/// the environment variable.
fn resolve_data_path(flag: Option<PathBuf>, from_config: Option<PathBuf>) -> Result<PathBuf> {
    flag.or(from_config)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            Error::Usage(format!(
                "no dataset given: pass --data or set {DATA_DIR_ENV}"
            ))
        })
}

/// Prints one line to stdout and reports whether anyone is still reading.
/// A closed pipe (e.g. `| head`) is not an error: the consumer is done,
/// streaming callers should just stop, summary callers can ignore it.
fn stdout_line(args: std::fmt::Arguments) -> Result<bool> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_fmt(args).and_then(|()| out.write_all(b"\n")) {
        Ok(()) => Ok(true),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(false),
        Err(e) => Err(Error::Io(e)),
    }
}

/// Loads a dataset from a JSONL round file, a directory holding a
/// `rounds.jsonl`, or a directory of per-sheet frame CSVs.
fn load_dataset(path: &Path) -> Result<Vec<Round>> {
    let jsonl = path.join("rounds.jsonl");
    let rounds = if path.is_file() && path.extension().is_some_and(|e| e == "jsonl") {
        load_rounds(path)?
    } else if path.is_dir() && jsonl.is_file() {
        load_rounds(&jsonl)?
    } else {
        load_rounds_from_frames(path)?
    };
    if rounds.is_empty() {
        return Err(Error::Data(format!(
            "no rounds found under {}",
            path.display()
        )));
    }
    Ok(rounds)
}

#[derive(Args)]
struct SynthArgs {
    /// Replay a config_resolved.json from an earlier synth run
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Number of rounds to generate (at least 10)
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Early-round label noise in [0, 1]
    #[arg(long)]
    noise: Option<f64>,
    /// Output directory for the dataset files
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let replay = match args.config.as_deref().map(load_run_config).transpose()? {
        Some(RunConfig::Synth(c)) => Some(c),
        Some(_) => {
            return Err(Error::Usage(
                "--config file was not written by a synth run".to_string(),
            ))
        }
        None => None,
    };
    let config = SynthConfig {
        rounds: args
            .rounds
            .or(replay.as_ref().map(|c| c.rounds))
            .unwrap_or(1000),
        seed: args.seed.or(replay.as_ref().map(|c| c.seed)).unwrap_or(1),
        noise: args
            .noise
            .or(replay.as_ref().map(|c| c.noise))
            .unwrap_or(0.0),
        out_dir: args
            .out
            .or(replay.map(|c| c.out_dir))
            .unwrap_or_else(|| PathBuf::from(".")),
    };

    let rounds = synth_generate(config.rounds, config.seed, config.noise)?;
    std::fs::create_dir_all(&config.out_dir)?;
    write_sheet_csvs(&config.out_dir, &rounds)?;
    save_rounds(&config.out_dir.join("rounds.jsonl"), &rounds)?;
    write_run_config(&config.out_dir, &RunConfig::Synth(config.clone()))?;

    let dist = class_distribution(&rounds);
    let sheets = rounds
        .iter()
        .map(|r| r.sheet_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    stdout_line(format_args!(
        "synth: {} rounds over {} sheets, label-1 fraction {:.4}, out {}",
        rounds.len(),
        sheets,
        dist.label1.fraction.unwrap_or(f64::NAN),
        config.out_dir.display()
    ))?;
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// Replay a config_resolved.json from an earlier train run
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Model architecture
    #[arg(long, value_parser = ["lstm", "transformer"])]
    arch: Option<String>,
    /// Dataset: JSONL file or directory (default: $ROUNDCAST_DATA_DIR)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Output directory for checkpoints and reports
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fraction of each round revealed to the model, in (0, 1]
    #[arg(long)]
    progression: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent repetitions of the whole k-fold protocol
    #[arg(long)]
    repeats: Option<usize>,
    /// Fold tasks trained concurrently
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Bootstrap resamples behind each fold's AUC interval
    #[arg(long)]
    resamples: Option<usize>,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let replay = match args.config.as_deref().map(load_run_config).transpose()? {
        Some(RunConfig::Train(c)) => Some(c),
        Some(_) => {
            return Err(Error::Usage(
                "--config file was not written by a train run".to_string(),
            ))
        }
        None => None,
    };
    let mut train = match (&args.arch, &replay) {
        (Some(arch), Some(c)) if *arch != c.train.architecture => {
            return Err(Error::Usage(format!(
                "--arch {arch} conflicts with the replayed config's {}",
                c.train.architecture
            )));
        }
        (_, Some(c)) => c.train.clone(),
        (Some(arch), None) => TrainConfig::for_architecture(arch)?,
        (None, None) => {
            return Err(Error::Usage(
                "pass --arch lstm|transformer or replay a --config".to_string(),
            ))
        }
    };
    if let Some(v) = args.progression {
        train.progression = v;
    }
    if let Some(v) = args.learning_rate {
        train.learning_rate = v;
    }
    if let Some(v) = args.weight_decay {
        train.weight_decay = v;
    }
    if let Some(v) = args.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = args.epochs {
        train.epochs = v;
    }
    if let Some(v) = args.folds {
        train.folds = v;
    }
    if let Some(v) = args.seed {
        train.seed = v;
    }
    if let Some(v) = args.repeats {
        train.repeats = v;
    }
    if let Some(v) = args.jobs {
        train.jobs = v;
    }
    if let Some(v) = args.dropout {
        train.dropout = v;
    }
    train.validate()?;

    let config = TrainRunConfig {
        data_path: resolve_data_path(args.data, replay.as_ref().map(|c| c.data_path.clone()))?,
        out_dir: args
            .out
            .or(replay.as_ref().map(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(".")),
        resamples: args
            .resamples
            .or(replay.as_ref().map(|c| c.resamples))
            .unwrap_or(1000),
        train,
    };

    let rounds = load_dataset(&config.data_path)?;
    let report = train_kfold(&rounds, &config.train)?;

    std::fs::create_dir_all(&config.out_dir)?;
    let mut log = String::from("fold,run,epoch,train_loss,wall_ms\n");
    let mut folds = Vec::with_capacity(report.runs.len());
    for (task, run) in report.runs.iter().enumerate() {
        save_checkpoint(
            &config
                .out_dir
                .join(format!("checkpoint_fold{}_run{}.json", run.fold, run.run)),
            &run.model,
            &config.train,
        )?;
        for e in &run.epoch_log {
            log.push_str(&format!(
                "{},{},{},{},{}\n",
                run.fold, run.run, e.epoch, e.train_loss, e.wall_ms
            ));
        }
        // The interval rng is derived from the base seed and the task
        // index, never from shared state, keeping reports reproducible.
        let mut ci_rng = SeededRng::new(config.train.seed).derive(0x0C1 + task as u64);
        let interval = roc_auc_ci(
            &run.test_scores,
            &run.test_labels,
            config.resamples,
            &mut ci_rng,
        )?;
        folds.push(FoldMetrics {
            fold: run.fold,
            auc: run.test_auc,
            ci_lo: interval.lo,
            ci_hi: interval.hi,
            accuracy: run.test_accuracy,
        });
        stdout_line(format_args!(
            "fold {} run {}: auc {:.4} [{:.4}, {:.4}] accuracy {:.4} final-loss {:.4}",
            run.fold,
            run.run,
            run.test_auc,
            interval.lo,
            interval.hi,
            run.test_accuracy,
            run.final_train_loss
        ))?;
    }
    std::fs::write(config.out_dir.join("train_log.csv"), log)?;

    let metrics = MetricsReport {
        model: config.train.architecture.clone(),
        progression: config.train.progression,
        folds,
        latency: None,
    };
    write_metrics(&config.out_dir, &metrics)?;
    write_run_config(&config.out_dir, &RunConfig::Train(config.clone()))?;
    stdout_line(format_args!(
        "mean auc {:.4} +/- {:.4} over {} runs, out {}",
        report.mean_auc,
        report.std_auc,
        report.runs.len(),
        config.out_dir.display()
    ))?;
    Ok(())
}

fn write_metrics(out_dir: &Path, metrics: &MetricsReport) -> Result<()> {
    let json = serde_json::to_string_pretty(metrics)
        .map_err(|e| Error::Format(format!("could not serialize metrics: {e}")))?;
    std::fs::write(out_dir.join("metrics.json"), json + "\n")?;
    Ok(())
}

#[derive(Args)]
struct EvalArgs {
    /// Replay a config_resolved.json from an earlier eval run
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Dataset: JSONL file or directory (default: $ROUNDCAST_DATA_DIR)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Truncation fraction; defaults to the checkpoint's own setting
    #[arg(long)]
    progression: Option<f64>,
    #[arg(long)]
    resamples: Option<usize>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let replay = match args.config.as_deref().map(load_run_config).transpose()? {
        Some(RunConfig::Eval(c)) => Some(c),
        Some(_) => {
            return Err(Error::Usage(
                "--config file was not written by an eval run".to_string(),
            ))
        }
        None => None,
    };
    let checkpoint_path = args
        .checkpoint
        .or(replay.as_ref().map(|c| c.checkpoint.clone()))
        .ok_or_else(|| Error::Usage("--checkpoint is required".to_string()))?;
    let (mut model, trained) = load_checkpoint(&checkpoint_path)?;

    let progression = args
        .progression
        .or(replay.as_ref().map(|c| c.progression))
        .unwrap_or(trained.progression);
    if progression != trained.progression {
        eprintln!(
            "warning: checkpoint was trained at progression {} but is evaluated at {}",
            trained.progression, progression
        );
    }
    let config = EvalRunConfig {
        data_path: resolve_data_path(args.data, replay.as_ref().map(|c| c.data_path.clone()))?,
        out_dir: args
            .out
            .or(replay.as_ref().map(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(".")),
        resamples: args
            .resamples
            .or(replay.as_ref().map(|c| c.resamples))
            .unwrap_or(1000),
        checkpoint: checkpoint_path,
        progression,
    };

    let rounds = load_dataset(&config.data_path)?
        .iter()
        .map(|r| truncate_round(r, config.progression))
        .collect::<Result<Vec<Round>>>()?;
    let scores = predict_scores(&mut model, &rounds, trained.batch_size)?;
    let labels: Vec<f64> = rounds.iter().map(|r| r.winner as f64).collect();

    let auc = roc_auc(&scores, &labels)?;
    let mut ci_rng = SeededRng::new(trained.seed).derive(0x0C1);
    let interval = roc_auc_ci(&scores, &labels, config.resamples, &mut ci_rng)?;
    let accuracy = crate::eval::accuracy_at(&scores, &labels, 0.5)?;

    std::fs::create_dir_all(&config.out_dir)?;
    let metrics = MetricsReport {
        model: model.architecture().to_string(),
        progression: config.progression,
        folds: vec![FoldMetrics {
            fold: 0,
            auc,
            ci_lo: interval.lo,
            ci_hi: interval.hi,
            accuracy,
        }],
        latency: None,
    };
    write_metrics(&config.out_dir, &metrics)?;
    write_roc_csv(
        &config.out_dir.join("roc.csv"),
        &roc_curve(&scores, &labels)?,
    )?;
    write_run_config(&config.out_dir, &RunConfig::Eval(config.clone()))?;
    stdout_line(format_args!(
        "eval: {} rounds, auc {:.4} [{:.4}, {:.4}], accuracy {:.4}, out {}",
        rounds.len(),
        auc,
        interval.lo,
        interval.hi,
        accuracy,
        config.out_dir.display()
    ))?;
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    /// Replay a config_resolved.json from an earlier predict run
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Rounds to score, one JSON object per line
    #[arg(long, value_name = "FILE")]
    round_file: Option<PathBuf>,
    /// Where config_resolved.json is written
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let replay = match args.config.as_deref().map(load_run_config).transpose()? {
        Some(RunConfig::Predict(c)) => Some(c),
        Some(_) => {
            return Err(Error::Usage(
                "--config file was not written by a predict run".to_string(),
            ))
        }
        None => None,
    };
    let config = PredictRunConfig {
        checkpoint: args
            .checkpoint
            .or(replay.as_ref().map(|c| c.checkpoint.clone()))
            .ok_or_else(|| Error::Usage("--checkpoint is required".to_string()))?,
        round_file: args
            .round_file
            .or(replay.as_ref().map(|c| c.round_file.clone()))
            .ok_or_else(|| Error::Usage("--round-file is required".to_string()))?,
        out_dir: args
            .out
            .or(replay.map(|c| c.out_dir))
            .unwrap_or_else(|| PathBuf::from(".")),
    };

    let (mut model, trained) = load_checkpoint(&config.checkpoint)?;
    let rounds = load_rounds(&config.round_file)?;
    let scores = predict_scores(&mut model, &rounds, trained.batch_size)?;
    for (round, score) in rounds.iter().zip(&scores) {
        let alive = stdout_line(format_args!(
            "{},{},{}",
            round.sheet_id, round.round_index, score
        ))?;
        if !alive {
            break;
        }
    }
    write_run_config(&config.out_dir, &RunConfig::Predict(config.clone()))?;
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    /// Replay a config_resolved.json from an earlier bench run
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Dataset: JSONL file or directory (default: $ROUNDCAST_DATA_DIR)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Progression values to time, comma separated
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    progression: Option<Vec<f64>>,
    /// Timed repetitions per progression (at least 2)
    #[arg(long)]
    reps: Option<usize>,
    /// Untimed passes before measurement starts
    #[arg(long)]
    warmup: Option<usize>,
    /// Rounds per timed batch
    #[arg(long)]
    batch_size: Option<usize>,
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let replay = match args.config.as_deref().map(load_run_config).transpose()? {
        Some(RunConfig::Bench(c)) => Some(c),
        Some(_) => {
            return Err(Error::Usage(
                "--config file was not written by a bench run".to_string(),
            ))
        }
        None => None,
    };
    let checkpoint_path = args
        .checkpoint
        .or(replay.as_ref().map(|c| c.checkpoint.clone()))
        .ok_or_else(|| Error::Usage("--checkpoint is required".to_string()))?;
    let (mut model, trained) = load_checkpoint(&checkpoint_path)?;
    let config = BenchRunConfig {
        data_path: resolve_data_path(args.data, replay.as_ref().map(|c| c.data_path.clone()))?,
        out_dir: args
            .out
            .or(replay.as_ref().map(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(".")),
        progressions: args
            .progression
            .or(replay.as_ref().map(|c| c.progressions.clone()))
            .unwrap_or_else(|| vec![0.25, 0.75, 0.95]),
        repetitions: args
            .reps
            .or(replay.as_ref().map(|c| c.repetitions))
            .unwrap_or(100),
        warmup: args
            .warmup
            .or(replay.as_ref().map(|c| c.warmup))
            .unwrap_or(10),
        batch_size: args
            .batch_size
            .or(replay.as_ref().map(|c| c.batch_size))
            .unwrap_or(trained.batch_size),
        checkpoint: checkpoint_path,
    };
    if config.batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".to_string()));
    }

    let rounds = load_dataset(&config.data_path)?;
    let take = config.batch_size.min(rounds.len());

    let mut rows: Vec<LatencyStats> = Vec::with_capacity(config.progressions.len());
    for &p in &config.progressions {
        let truncated = rounds[..take]
            .iter()
            .map(|r| truncate_round(r, p))
            .collect::<Result<Vec<Round>>>()?;
        let refs: Vec<&Round> = truncated.iter().collect();
        let batch = crate::data::pad_batch(&refs, model.pad_value())?;
        let stats = bench_inference(&mut model, &batch, p, config.repetitions, config.warmup)?;
        stdout_line(format_args!(
            "progression {p}: mean {:.3} ms, std {:.3} ms, batch {}, max len {}, reps {}",
            stats.mean_ms, stats.std_ms, stats.batch_size, stats.max_len, stats.repetitions
        ))?;
        rows.push(stats);
    }

    let mut by_p = rows.clone();
    by_p.sort_by(|a, b| a.progression.total_cmp(&b.progression));
    for pair in by_p.windows(2) {
        if pair[1].mean_ms < pair[0].mean_ms {
            eprintln!(
                "warning: mean latency at progression {} ({:.3} ms) is below progression {} ({:.3} ms); expected nondecreasing in sequence length",
                pair[1].progression, pair[1].mean_ms, pair[0].progression, pair[0].mean_ms
            );
        }
    }

    std::fs::create_dir_all(&config.out_dir)?;
    let json = serde_json::to_string_pretty(&rows)
        .map_err(|e| Error::Format(format!("could not serialize latency rows: {e}")))?;
    std::fs::write(config.out_dir.join("bench.json"), json + "\n")?;
    write_run_config(&config.out_dir, &RunConfig::Bench(config.clone()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_round_trips_through_json() {
        let config = RunConfig::Train(TrainRunConfig {
            train: TrainConfig::lstm(),
            data_path: PathBuf::from("/tmp/data"),
            out_dir: PathBuf::from("/tmp/out"),
            resamples: 1000,
        });
        let json = serde_json::to_string_pretty(&config).unwrap();
        assert!(json.contains("\"command\": \"train\""));
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn mismatched_config_kind_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESOLVED_CONFIG_FILE);
        let config = RunConfig::Synth(SynthConfig {
            rounds: 20,
            seed: 1,
            noise: 0.0,
            out_dir: dir.path().to_path_buf(),
        });
        std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
        let err = cmd_train(TrainArgs {
            config: Some(path),
            arch: None,
            data: None,
            out: None,
            progression: None,
            learning_rate: None,
            weight_decay: None,
            batch_size: None,
            epochs: None,
            folds: None,
            seed: None,
            repeats: None,
            jobs: None,
            dropout: None,
            resamples: None,
        })
        .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn data_path_resolution_prefers_flag() {
        let flag = Some(PathBuf::from("/a"));
        let config = Some(PathBuf::from("/b"));
        assert_eq!(
            resolve_data_path(flag, config.clone()).unwrap(),
            PathBuf::from("/a")
        );
        assert_eq!(resolve_data_path(None, config).unwrap(), PathBuf::from("/b"));
    }
}
