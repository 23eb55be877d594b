//! Command implementations behind the `claqs` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use claqs::config::{ModelConfig, RunConfig};
use claqs::data::{load_splits, load_splits_with, synth_majority, write_tsv, Document, Vocab};
use claqs::gradcheck::{self, GradcheckOptions};
use claqs::model::{count_attention_params, init_params, Model, ParamGroup, Params};
use claqs::train::{evaluate, thread_pool, train, Checkpoint, TrainEvent, TrainState};
use claqs::{verify, Error};

pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
    pub const BUDGET: i32 = 5;
    /// A gradient or oracle check ran and failed.
    pub const CHECK_FAILED: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "claqs", version, about = "Quantum token-mixing text classifier (classical simulation)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for batch and evaluation parallelism.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoints plus metrics.
    Train(Common),
    /// Evaluate a checkpoint on the test split (validation if none).
    Eval {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate; defaults to `<out>/best.ckpt`.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Fault injection: corrupt one group's analytic gradient.
        #[arg(long, value_name = "GROUP", hide = true)]
        corrupt: Option<String>,
    },
    /// Run the dense-matrix oracle suite.
    Verify(Common),
    /// Print the attention-parameter accounting.
    Params(Common),
    /// Write the synthetic majority-token dataset as TSV files.
    Synth(Common),
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => exit::CONFIG,
        Error::Io { .. } | Error::Parse { .. } | Error::Input(_) | Error::Label { .. } | Error::Checkpoint(_) => {
            exit::DATA
        }
        Error::Divergence { .. } | Error::CollapsedState { .. } => exit::DIVERGENCE,
        Error::Budget(_) => exit::BUDGET,
        _ => exit::INTERNAL,
    }
}

type CmdResult = Result<(), Failure>;

fn config_failure(e: Error) -> Failure {
    Failure {
        code: exit::CONFIG,
        message: e.to_string(),
    }
}

/// Loads the config (or `fallback` when no path is given) and applies
/// command-line overrides.
fn resolve(common: &Common, fallback: RunConfig) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(config_failure)?,
        None => fallback,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs/latest"))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Writes a text report preceded by the resolved config as TOML comments.
fn write_report(cfg: &RunConfig, name: &str, report: &str) -> Result<(), Failure> {
    if cfg.out_dir.is_none() {
        return Ok(());
    }
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    let echo: String = cfg.to_toml().lines().map(|l| format!("# {l}\n")).collect();
    write_file(&dir.join(name), &format!("# resolved config\n{echo}\n{report}\n"))
}

struct Metrics {
    file: fs::File,
    path: PathBuf,
}

impl Metrics {
    fn create(path: PathBuf) -> Result<Self, Failure> {
        let file = fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        Ok(Self { file, path })
    }

    fn record(&mut self, value: serde_json::Value) -> Result<(), Error> {
        writeln!(self.file, "{value}").map_err(|e| Error::Io {
            path: self.path.clone(),
            source: e,
        })
    }
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Train(common) => cmd_train(&common),
        Command::Eval { common, checkpoint } => cmd_eval(&common, checkpoint),
        Command::Gradcheck { common, corrupt } => cmd_gradcheck(&common, corrupt.as_deref()),
        Command::Verify(common) => cmd_verify(&common),
        Command::Params(common) => cmd_params(&common),
        Command::Synth(common) => cmd_synth(&common),
    }
}

/// Summary returned by [`train_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub history: claqs::train::History,
    pub test: Option<claqs::train::EvalMetrics>,
    pub out_dir: PathBuf,
}

/// Full training run: data, init, training, checkpoints, metrics.
///
/// Artifacts in the output directory: `config.toml` (resolved config),
/// `metrics.jsonl`, `best.ckpt` and `last.ckpt`.
pub fn train_run(cfg: &RunConfig, log: bool) -> Result<TrainSummary, Failure> {
    cfg.validate().map_err(config_failure)?;
    let splits = load_splits(cfg)?;
    let model = Model::new(&cfg.model)?;
    let params = init_params(&cfg.model, splits.vocab.len(), cfg.seed);
    let dir = out_dir(cfg);
    ensure_dir(&dir)?;
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    let mut metrics = Metrics::create(dir.join("metrics.jsonl"))?;
    metrics.record(json!({"record": "config", "config": cfg}))?;
    let vocab = splits.vocab.tokens().to_vec();
    let best_path = dir.join("best.ckpt");

    let mut state = TrainState::new(params, cfg);
    let outcome = train(&model, &mut state, &splits.train, &splits.val, cfg, |event| {
        let (rec, st, best) = match event {
            TrainEvent::Start { train, val } => {
                return metrics.record(json!({"record": "initial", "train": train, "val": val}));
            }
            TrainEvent::Epoch { record, state, best } => (record, state, best),
        };
        if log {
            eprintln!(
                "epoch {:>3}  loss {:.4}  val acc {:.4}  f1 {:.4}  pre_norm {:.4}  lr {:.2e}{}",
                rec.epoch,
                rec.loss,
                rec.val.scores.accuracy,
                rec.val.scores.macro_f1,
                rec.mean_pre_norm,
                rec.lr,
                if best { "  *" } else { "" }
            );
        }
        let mut value = serde_json::to_value(rec).expect("records serialize");
        value["record"] = json!("epoch");
        value["best"] = json!(best);
        metrics.record(value)?;
        if best {
            st.checkpoint(cfg, &vocab).write(&best_path)?;
        }
        Ok(())
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let mut diag = json!({"record": "error", "error": e.to_string()});
            if let Error::Divergence { step, mean_pre_norm, .. } = &e {
                diag["step"] = json!(step);
                diag["mean_pre_norm"] = json!(mean_pre_norm);
            }
            metrics.record(diag)?;
            return Err(e.into());
        }
    };
    state.checkpoint(cfg, &vocab).write(dir.join("last.ckpt"))?;
    if outcome.history.best_epoch.is_none() {
        state.checkpoint(cfg, &vocab).write(&best_path)?;
    }
    let test = if splits.test.is_empty() {
        None
    } else {
        let pool = thread_pool(cfg.workers)?;
        Some(evaluate(&model, &outcome.best, &splits.test, &cfg.loss, &pool)?)
    };
    metrics.record(json!({
        "record": "test",
        "best_epoch": outcome.history.best_epoch,
        "metrics": test,
    }))?;
    Ok(TrainSummary {
        history: outcome.history,
        test,
        out_dir: dir,
    })
}

fn cmd_train(common: &Common) -> CmdResult {
    let cfg = resolve(common, RunConfig::default())?;
    let summary = train_run(&cfg, true)?;
    match summary.test {
        Some(t) => println!(
            "test: accuracy {:.4}  precision {:.4}  recall {:.4}  macro-F1 {:.4}",
            t.scores.accuracy, t.scores.precision, t.scores.recall, t.scores.macro_f1
        ),
        None => println!("no test split configured"),
    }
    println!("artifacts in {}", summary.out_dir.display());
    Ok(())
}

fn cmd_eval(common: &Common, checkpoint: Option<PathBuf>) -> CmdResult {
    let overrides = resolve(common, RunConfig::default())?;
    let path = checkpoint.unwrap_or_else(|| out_dir(&overrides).join("best.ckpt"));
    let ck = Checkpoint::read(&path)?;
    let mut cfg = ck.config.clone();
    if common.config.is_some() {
        cfg.data = overrides.data.clone();
    }
    cfg.workers = overrides.workers;
    cfg.out_dir = overrides.out_dir.clone();
    let model = Model::new(&cfg.model)?;
    model.check_params(&ck.params)?;
    let splits = load_splits_with(&cfg, Some(Vocab::from_tokens(ck.vocab.clone())))?;
    let (name, docs): (&str, &[Document]) = if splits.test.is_empty() {
        ("val", &splits.val)
    } else {
        ("test", &splits.test)
    };
    let pool = thread_pool(cfg.workers)?;
    let m = evaluate(&model, &ck.params, docs, &cfg.loss, &pool)?;
    let record = json!({"record": "eval", "split": name, "checkpoint": path, "metrics": m, "config": cfg});
    println!(
        "{name}: accuracy {:.4}  precision {:.4}  recall {:.4}  macro-F1 {:.4}  loss {:.4}  pre_norm {:.4}",
        m.scores.accuracy, m.scores.precision, m.scores.recall, m.scores.macro_f1, m.loss, m.mean_pre_norm
    );
    if cfg.out_dir.is_some() {
        let dir = out_dir(&cfg);
        ensure_dir(&dir)?;
        write_file(&dir.join("eval.json"), &format!("{record}\n"))?;
    }
    Ok(())
}

/// Configuration used by `gradcheck` when no config file is given.
pub fn gradcheck_default() -> RunConfig {
    RunConfig {
        model: ModelConfig {
            qubits: 4,
            window: 4,
            layers: 1,
            ff_layers: 1,
            degree: 3,
            embed_dim: 8,
            hidden: 8,
            classes: 2,
            ..ModelConfig::default()
        },
        ..RunConfig::default()
    }
}

/// Random probe documents for gradient checks: one spans two windows, one
/// is padded.
pub fn probe_documents(cfg: &ModelConfig, vocab: usize, seed: u64) -> Vec<Document> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lens = [cfg.window + cfg.window / 2 + 1, cfg.window.div_ceil(2), cfg.window];
    lens.iter()
        .enumerate()
        .map(|(i, &len)| {
            let ids = (0..len.max(1)).map(|_| rng.random_range(2..vocab)).collect();
            Document::new(ids, i % cfg.classes, cfg.window, cfg.stride())
        })
        .collect()
}

pub fn gradcheck_run(cfg: &RunConfig, corrupt: Option<ParamGroup>) -> Result<gradcheck::GradcheckReport, Failure> {
    cfg.validate_model().map_err(config_failure)?;
    gradcheck::check_budget(&cfg.model)?;
    let model = Model::new(&cfg.model)?;
    let vocab = 12;
    let params: Params = init_params(&cfg.model, vocab, cfg.seed);
    let docs = probe_documents(&cfg.model, vocab, cfg.seed);
    let opts = GradcheckOptions {
        corrupt,
        ..GradcheckOptions::default()
    };
    Ok(gradcheck::gradcheck(&model, &params, &docs, &cfg.loss, &opts)?)
}

fn cmd_gradcheck(common: &Common, corrupt: Option<&str>) -> CmdResult {
    let cfg = resolve(common, gradcheck_default())?;
    let corrupt = match corrupt {
        Some(name) => Some(ParamGroup::from_name(name).ok_or_else(|| Failure {
            code: exit::CONFIG,
            message: format!("unknown parameter group {name:?}"),
        })?),
        None => None,
    };
    let report = gradcheck_run(&cfg, corrupt)?;
    println!("{report}");
    write_report(&cfg, "gradcheck.txt", &report.to_string())?;
    if report.pass() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failing().iter().map(|g| g.name()).collect();
        Err(Failure {
            code: exit::CHECK_FAILED,
            message: format!("gradient check failed for: {}", names.join(", ")),
        })
    }
}

/// Configuration used by `verify` when no config file is given.
pub fn verify_default() -> RunConfig {
    RunConfig {
        model: ModelConfig {
            qubits: 3,
            window: 4,
            layers: 2,
            degree: 4,
            ..ModelConfig::default()
        },
        ..RunConfig::default()
    }
}

fn cmd_verify(common: &Common) -> CmdResult {
    let cfg = resolve(common, verify_default())?;
    cfg.validate_model().map_err(config_failure)?;
    let report = verify::verify(&cfg.model, cfg.verify.seeds, cfg.seed)?;
    println!("{report}");
    write_report(&cfg, "verify.txt", &report.to_string())?;
    if report.pass() {
        Ok(())
    } else {
        Err(Failure {
            code: exit::CHECK_FAILED,
            message: format!("oracle mismatch for seeds {:?}", report.failures),
        })
    }
}

/// Text of the `params` report.
pub fn params_report(cfg: &RunConfig, vocab: Option<usize>) -> String {
    let m = &cfg.model;
    let mut text = count_attention_params(m).to_string();
    let shapes = Params::expected_shapes(m, vocab.unwrap_or(0));
    text.push_str("\ntrainable tensors (real scalars; complex entries count twice):\n");
    let mut total = 0;
    for (id, shape) in claqs::model::ParamId::ALL.into_iter().zip(shapes) {
        let n: usize = shape.iter().product::<usize>() * if id.is_complex() { 2 } else { 1 };
        total += n;
        let dims = if id == claqs::model::ParamId::Embeddings && vocab.is_none() {
            format!("[V, {}]", m.embed_dim)
        } else {
            format!("{shape:?}")
        };
        text.push_str(&format!("  {:<12} {:<12} {n:>10}\n", id.name(), dims));
    }
    match vocab {
        Some(v) => text.push_str(&format!("  total (V = {v}) {total:>24}")),
        None => text.push_str(&format!(
            "  total excluding embeddings {total:>13}  (+ V × {} for the embedding table)",
            m.embed_dim
        )),
    }
    text
}

fn cmd_params(common: &Common) -> CmdResult {
    let cfg = resolve(common, RunConfig::default())?;
    cfg.validate_model().map_err(config_failure)?;
    let has_data = cfg.data.synthetic.is_some() || cfg.data.train.is_some();
    let vocab = if has_data { Some(load_splits(&cfg)?.vocab.len()) } else { None };
    let report = params_report(&cfg, vocab);
    println!("{report}");
    write_report(&cfg, "params.txt", &report)
}

fn cmd_synth(common: &Common) -> CmdResult {
    let cfg = resolve(common, RunConfig::default())?;
    let mut s = cfg.data.synthetic.clone().unwrap_or_default();
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    let d = synth_majority(s.seed, s.size, s.length, s.vocab_size)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("data/synthetic"));
    ensure_dir(&dir)?;
    write_tsv(dir.join("train.tsv"), &d.train)?;
    write_tsv(dir.join("val.tsv"), &d.val)?;
    write_tsv(dir.join("test.tsv"), &d.test)?;
    let echo = format!(
        "# synthetic majority-token data\n[data.synthetic]\nsize = {}\nlength = {}\nvocab_size = {}\nseed = {}\n",
        s.size, s.length, s.vocab_size, s.seed
    );
    write_file(&dir.join("synth.toml"), &echo)?;
    println!(
        "wrote {} / {} / {} examples to {}",
        d.train.len(),
        d.val.len(),
        d.test.len(),
        dir.display()
    );
    Ok(())
}
