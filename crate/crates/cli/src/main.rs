use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod manifest;

use config::{RunConfig, Overrides};
use manifest::RunManifest;

use cslm::analysis;
use cslm::corpus::{self, build_tag_vocab, build_vocab, make_batches, TaggedUtterance};
use cslm::model::{Checkpoint, MultiTaskLm};
use cslm::synthgen::{self, SynthConfig};
use cslm::trainer::{self, perplexity, SweepData, SweepGrid};

/// Code-switching language modeling with an auxiliary POS tower.
#[derive(Parser, Debug)]
#[command(name = "cslm", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic tagged corpus (train/dev/test).
    Generate(GenerateArgs),
    /// Print corpus statistics as JSON.
    Stats(StatsArgs),
    /// Train one model.
    Train(TrainArgs),
    /// Report ppl_lm and ppl_total of a checkpoint on one split.
    Eval(EvalArgs),
    /// Train every cell of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Per-token diagnostics.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// TOML file with generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    switch_prob: Option<f64>,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long, requires = "tags")]
    words: Option<PathBuf>,
    #[arg(long, requires = "words")]
    tags: Option<PathBuf>,
    /// Corpus directory, used with --split instead of --words/--tags.
    #[arg(long, conflicts_with = "words")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Corpus directory; defaults to the one recorded next to the checkpoint.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// TOML grid: lists for hidden, loss_weight, modes, dropout, pos_dropout, seeds.
    #[arg(long)]
    grid: PathBuf,
    /// Base settings shared by every cell.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Log-probability differences of model A over model B.
    Compare(CompareArgs),
    /// Probability that the next tag is Chinese.
    Nextlang(NextlangArgs),
    /// Tags preceding switch points.
    Triggers(TriggersArgs),
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long, default_value = "data")]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Restrict to these utterance indices (comma separated).
    #[arg(long, value_delimiter = ',')]
    utterances: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// Keep only the k utterances with the largest |delta|.
    #[arg(long)]
    top_k: Option<usize>,
}

#[derive(Args, Debug)]
struct NextlangArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args, Debug)]
struct TriggersArgs {
    #[command(flatten)]
    split: SplitArgs,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<cslm::Error> for Failure {
    fn from(e: cslm::Error) -> Self {
        use cslm::Error as E;
        let code = match &e {
            E::InvalidConfig(_)
            | E::Parse { .. }
            | E::CorpusTooSmall { .. }
            | E::Incompatible(_)
            | E::UnsupportedMode(_) => 1,
            E::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CSLM_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Analyze(AnalyzeCommand::Compare(a)) => compare(a),
        Command::Analyze(AnalyzeCommand::Nextlang(a)) => nextlang(a),
        Command::Analyze(AnalyzeCommand::Triggers(a)) => triggers(a),
    }
}

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("no such file: {}", path.display())))
    }
}

fn load_split(data: &Path, split: &str) -> CliResult<(Vec<TaggedUtterance>, [PathBuf; 2])> {
    let (w, t) = synthgen::split_paths(data, split);
    require_file(&w)?;
    require_file(&t)?;
    let utts = corpus::load_tagged_corpus(&w, &t)?;
    Ok((utts, [w, t]))
}

fn select(utts: Vec<TaggedUtterance>, ids: &[usize]) -> CliResult<Vec<TaggedUtterance>> {
    if ids.is_empty() {
        return Ok(utts);
    }
    ids.iter()
        .map(|&i| {
            utts.get(i)
                .cloned()
                .ok_or_else(|| Failure::usage(format!("utterance {i} out of range ({} in split)", utts.len())))
        })
        .collect()
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    require_file(path)?;
    Ok(Checkpoint::load(path)?)
}

fn generate(a: GenerateArgs) -> CliResult {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => config::read_toml(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_train {
        cfg.n_train = n;
    }
    if let Some(p) = a.switch_prob {
        cfg.switch_prob = p;
    }
    let corpus = synthgen::generate(&cfg)?;
    let written = corpus.write_to(&a.out)?;
    let mut m = RunManifest::new("generate", serde_json::to_value(&cfg).unwrap(), cfg.seed);
    m.add_inputs(a.config.iter())?;
    m.outputs = written;
    m.write(&a.out.join("run.json"))?;
    println!(
        "wrote {} / {} / {} utterances to {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult {
    let (utts, inputs) = match (&a.words, &a.tags, &a.data) {
        (Some(w), Some(t), _) => {
            require_file(w)?;
            require_file(t)?;
            (corpus::load_tagged_corpus(w, t)?, vec![w.clone(), t.clone()])
        }
        (_, _, Some(d)) => {
            let (u, p) = load_split(d, &a.split)?;
            (u, p.to_vec())
        }
        _ => return Err(Failure::usage("give --words and --tags, or --data")),
    };
    let s = corpus::compute_stats(&utts);
    println!("{}", serde_json::to_string_pretty(&s).unwrap());
    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new("stats", serde_json::to_value(&s).unwrap(), 0);
        m.add_inputs(inputs.iter())?;
        m.write(path)?;
    }
    Ok(())
}

fn resolve(config: Option<&Path>, data: Option<&PathBuf>, out: Option<&PathBuf>, o: &Overrides) -> CliResult<RunConfig> {
    let mut table = match config {
        Some(p) => {
            require_file(p)?;
            config::read_table(p)?
        }
        None => Default::default(),
    };
    if let Some(d) = data {
        table.insert("data".into(), d.display().to_string().into());
    }
    if let Some(d) = out {
        table.insert("out".into(), d.display().to_string().into());
    }
    o.apply(&mut table)?;
    let cfg = RunConfig::from_table(table)?;
    cfg.model().validate()?;
    cfg.train().validate()?;
    Ok(cfg)
}

struct Prepared {
    train: Vec<TaggedUtterance>,
    dev: Vec<TaggedUtterance>,
    test: Option<Vec<TaggedUtterance>>,
    inputs: Vec<PathBuf>,
}

fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let (train, mut inputs) = load_split(&cfg.data, "train").map(|(u, p)| (u, p.to_vec()))?;
    let (dev, p) = load_split(&cfg.data, "dev")?;
    inputs.extend(p);
    let (tw, _) = synthgen::split_paths(&cfg.data, "test");
    let test = if tw.exists() {
        let (t, p) = load_split(&cfg.data, "test")?;
        inputs.extend(p);
        Some(t)
    } else {
        None
    };
    Ok(Prepared {
        train,
        dev,
        test,
        inputs,
    })
}

fn train(a: TrainArgs) -> CliResult {
    let cfg = resolve(a.config.as_deref(), a.data.as_ref(), a.out.as_ref(), &a.overrides)?;
    let data = prepare(&cfg)?;
    let tc = cfg.train();
    let word_vocab = build_vocab(&data.train, cfg.min_count);
    let tag_vocab = build_tag_vocab(&data.train);
    let train_plan = make_batches(&data.train, &word_vocab, &tag_vocab, tc.batch, tc.unroll)?;
    let dev_plan = make_batches(&data.dev, &word_vocab, &tag_vocab, tc.batch, tc.unroll)?;
    let mut model = MultiTaskLm::new(cfg.model(), word_vocab.len(), tag_vocab.len())?;
    log::info!(
        "{} model, {} parameters, vocab {} words / {} tags, {} windows per epoch",
        cfg.mode,
        model.num_parameters(),
        word_vocab.len(),
        tag_vocab.len(),
        train_plan.num_windows()
    );
    std::fs::create_dir_all(&cfg.out).map_err(|e| cslm::Error::Io {
        path: cfg.out.clone(),
        source: e,
    })?;
    let out = trainer::train(&mut model, &train_plan, &dev_plan, &tc, |_| {})?;
    let ckpt_path = cfg.out.join("best.ckpt");
    let ck = Checkpoint {
        model: out.best,
        word_vocab,
        tag_vocab,
    };
    ck.save(&ckpt_path)?;
    let metrics_path = cfg.out.join("metrics.jsonl");
    trainer::write_metrics(&metrics_path, &out.metrics)?;
    println!("best epoch {}", out.best_epoch);
    println!("dev ppl_lm {:.4}", out.best_dev.ppl_lm);
    println!("dev ppl_total {:.4}", out.best_dev.ppl_total);
    if let Some(test) = &data.test {
        let plan = make_batches(test, &ck.word_vocab, &ck.tag_vocab, tc.batch, tc.unroll)?;
        let p = perplexity(&ck.model, &plan)?;
        println!("test ppl_lm {:.4}", p.ppl_lm);
        println!("test ppl_total {:.4}", p.ppl_total);
    }
    let mut m = RunManifest::new("train", serde_json::to_value(&cfg).unwrap(), cfg.seed);
    m.add_inputs(data.inputs.iter().chain(a.config.iter()))?;
    m.outputs = vec![ckpt_path, metrics_path];
    m.write(&cfg.out.join("run.json"))?;
    Ok(())
}

/// Corpus directory and batch geometry recorded by the training run.
fn recorded_run(ckpt: &Path) -> Option<RunConfig> {
    let path = ckpt.parent()?.join("run.json");
    let m = RunManifest::read(&path).ok()?;
    serde_json::from_value(m.config).ok()
}

fn eval(a: EvalArgs) -> CliResult {
    let ck = load_checkpoint(&a.ckpt)?;
    let recorded = recorded_run(&a.ckpt);
    let data = a
        .data
        .clone()
        .or_else(|| recorded.as_ref().map(|r| r.data.clone()))
        .ok_or_else(|| Failure::usage("no --data given and no run.json next to the checkpoint"))?;
    let geometry = recorded.unwrap_or_default();
    let (utts, inputs) = load_split(&data, &a.split)?;
    let plan = make_batches(&utts, &ck.word_vocab, &ck.tag_vocab, geometry.batch, geometry.unroll)?;
    let p = perplexity(&ck.model, &plan)?;
    println!("ppl_lm {:.6}", p.ppl_lm);
    println!("ppl_total {:.6}", p.ppl_total);
    let path = a.manifest.clone().unwrap_or_else(|| {
        a.ckpt
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("eval-{}.run.json", a.split))
    });
    let mut m = RunManifest::new(
        "eval",
        serde_json::json!({ "split": a.split, "data": data, "ppl_lm": p.ppl_lm, "ppl_total": p.ppl_total }),
        0,
    );
    m.add_inputs(inputs.iter().chain([&a.ckpt]))?;
    m.write(&path)?;
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult {
    require_file(&a.grid)?;
    let grid: SweepGrid = config::read_toml(&a.grid)?;
    let cfg = resolve(a.config.as_deref(), a.data.as_ref(), None, &a.overrides)?;
    let data = prepare(&cfg)?;
    let test = data
        .test
        .as_ref()
        .ok_or_else(|| Failure::usage(format!("sweep needs a test split in {}", cfg.data.display())))?;
    let tc = cfg.train();
    let word_vocab = build_vocab(&data.train, cfg.min_count);
    let tag_vocab = build_tag_vocab(&data.train);
    let plan = |u: &[TaggedUtterance]| make_batches(u, &word_vocab, &tag_vocab, tc.batch, tc.unroll);
    let (tr, dv, te) = (plan(&data.train)?, plan(&data.dev)?, plan(test)?);
    let cells = grid.cells(&cfg.model());
    log::info!("sweeping {} cells", cells.len());
    let rows = trainer::sweep(
        &cells,
        &tc,
        &SweepData {
            word_vocab: word_vocab.len(),
            tag_vocab: tag_vocab.len(),
            train: &tr,
            dev: &dv,
            test: &te,
        },
    );
    trainer::write_sweep_csv(&a.out, &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} cells, {} failed, table in {}", rows.len(), failed, a.out.display());
    let mut m = RunManifest::new(
        "sweep",
        serde_json::json!({ "base": cfg, "grid": grid }),
        cfg.seed,
    );
    m.add_inputs(data.inputs.iter().chain([&a.grid]).chain(a.config.iter()))?;
    m.outputs = vec![a.out.clone()];
    m.write(&sidecar(&a.out))?;
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult {
    let ca = load_checkpoint(&a.a)?;
    let cb = load_checkpoint(&a.b)?;
    let (utts, inputs) = load_split(&a.split.data, &a.split.split)?;
    let utts = select(utts, &a.split.utterances)?;
    let mut diags = analysis::compare_models(&ca, &cb, &utts)?;
    let (at_switch, elsewhere) = analysis::switch_summary(&diags);
    if let Some(k) = a.top_k {
        diags = analysis::top_k_utterances(&diags, k);
    }
    analysis::write_csv(&a.split.out, &diags)?;
    println!("mean delta at switch points {at_switch:.6}");
    println!("mean delta elsewhere {elsewhere:.6}");
    let mut m = RunManifest::new(
        "analyze compare",
        serde_json::json!({ "split": a.split.split, "top_k": a.top_k, "utterances": a.split.utterances }),
        0,
    );
    m.add_inputs(inputs.iter().chain([&a.a, &a.b]))?;
    m.outputs = vec![a.split.out.clone()];
    m.write(&sidecar(&a.split.out))?;
    Ok(())
}

fn nextlang(a: NextlangArgs) -> CliResult {
    let ck = load_checkpoint(&a.ckpt)?;
    let (utts, inputs) = load_split(&a.split.data, &a.split.split)?;
    let utts = select(utts, &a.split.utterances)?;
    let rows = analysis::next_lang_probability(&ck, &utts)?;
    analysis::write_csv(&a.split.out, &rows)?;
    let mut m = RunManifest::new(
        "analyze nextlang",
        serde_json::json!({ "split": a.split.split, "utterances": a.split.utterances }),
        0,
    );
    m.add_inputs(inputs.iter().chain([&a.ckpt]))?;
    m.outputs = vec![a.split.out.clone()];
    m.write(&sidecar(&a.split.out))?;
    println!("{} positions written to {}", rows.len(), a.split.out.display());
    Ok(())
}

fn triggers(a: TriggersArgs) -> CliResult {
    let (utts, inputs) = load_split(&a.split.data, &a.split.split)?;
    let utts = select(utts, &a.split.utterances)?;
    let rows = analysis::trigger_table(&utts);
    analysis::write_csv(&a.split.out, &rows)?;
    for r in rows.iter().take(10) {
        println!("{}\t{}\t{:.4}", r.tag, r.count, r.relative);
    }
    let mut m = RunManifest::new("analyze triggers", serde_json::json!({ "split": a.split.split }), 0);
    m.add_inputs(inputs.iter())?;
    m.outputs = vec![a.split.out.clone()];
    m.write(&sidecar(&a.split.out))?;
    Ok(())
}
