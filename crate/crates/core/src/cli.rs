//! `hankit` command line.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::data::{
    imdl_transform, imdl_tweet, load_dataset, save_dataset, split, strip_noise, synth_generate, tokenize, Dataset,
    SplitTag, SynthConfig, DEFAULT_CAP,
};
use crate::error::{HanError, Result};
use crate::explain::{build_report, emit_report, ReportFormat};
use crate::mcm::{extract_user_mcms, CooccurrenceScorer, Lexicon, Taxonomy};
use crate::train::{
    count_params, evaluate, format_millions, layer_sweep, load_model, save_model, train, EncoderKind, Metrics,
    TrainConfig,
};

#[derive(Parser, Debug)]
#[command(name = "hankit", version, about = "Explainable hierarchical attention network for depression screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with class-shifted embeddings.
    Synth(SynthArgs),
    /// Extract metaphor concept mappings from user tweets (JSON lines).
    McmExtract(McmArgs),
    /// Train a model and save it as JSON.
    Train(TrainCmd),
    /// Score a saved model on a dataset.
    Eval(EvalArgs),
    /// Rank each user's tweets and mappings by attention.
    Explain(ExplainArgs),
    /// Per-layer parameter counts of HAN and recurrent/transformer encoders.
    ParamAudit(AuditArgs),
    /// Train once per HAN depth and compare validation and test scores.
    LayerSweep(SweepArgs),
    /// Remove explicit depression cues from a dataset.
    Imdl(ImdlArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    users: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Distance between class means along one axis.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Let MCM embeddings carry the class shift.
    #[arg(long)]
    mcm_signal: bool,
    /// Class separation of MCM embeddings [default: --separation].
    #[arg(long)]
    mcm_separation: Option<f64>,
    /// Fraction of tweets that carry the class shift.
    #[arg(long, default_value_t = 1.0)]
    signal_fraction: f64,
    /// Standard deviation of non-signal tweets.
    #[arg(long, default_value_t = 1.0)]
    distractor_scale: f64,
    /// Class-signed offset on a second axis of signal tweets.
    #[arg(long, default_value_t = 0.0)]
    marker: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct McmArgs {
    /// Users as JSON lines with `user_id` and `tweets`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Same lines with `mcms` filled in.
    #[arg(long)]
    out: PathBuf,
    /// Tab-separated metaphor lexicon.
    #[arg(long)]
    lexicon: PathBuf,
    /// Tab-separated concept taxonomy.
    #[arg(long)]
    taxonomy: PathBuf,
    /// Also write every mapping with its origin as JSON lines.
    #[arg(long)]
    mappings: Option<PathBuf>,
    /// Strip depression cues from tweets before extraction.
    #[arg(long)]
    imdl: bool,
}

/// Hyperparameters shared by `train` and `layer-sweep`.
#[derive(Args, Debug)]
struct Hyper {
    /// TOML file of `key = value` training settings; flags given on the
    /// command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr)]
    lr: f64,
    /// Decoupled weight decay.
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    wd: f64,
    #[arg(long, default_value_t = TrainConfig::default().dropout)]
    dropout: f64,
    /// Tweets and mappings kept per user.
    #[arg(long, default_value_t = TrainConfig::default().cap)]
    cap: usize,
    /// Seeds initialization, shuffling, dropout and the data split.
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    /// Drop the MCM branch.
    #[arg(long)]
    ablate_mcm: bool,
    /// Stop after this many epochs without a better validation F1.
    #[arg(long)]
    patience: Option<usize>,
    /// Apply the cue-removal transform to the dataset first.
    #[arg(long)]
    imdl: bool,
}

#[derive(Args, Debug)]
struct TrainCmd {
    /// Dataset file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    /// Model JSON.
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Number of stacked HAN layers.
    #[arg(long, default_value_t = TrainConfig::default().layers)]
    layers: usize,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Subset {
    All,
    Train,
    Val,
    Test,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Dataset file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Users to score; tagged splits only.
    #[arg(long, value_enum, default_value_t = Subset::All)]
    split: Subset,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    imdl: bool,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    /// Dataset file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Report file [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Items listed per branch.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Only these users (repeatable).
    #[arg(long = "user")]
    users: Vec<String>,
    #[arg(long, value_enum, default_value_t = Subset::All)]
    split: Subset,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long)]
    imdl: bool,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long, default_value_t = 768)]
    d: usize,
    /// Attention heads of the transformer encoders.
    #[arg(long, default_value_t = 12)]
    heads: usize,
    /// Transformer feed-forward width [default: --d].
    #[arg(long)]
    d_ff: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Dataset file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV of the sweep results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Depths to train.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
    depths: Vec<usize>,
    #[command(flatten)]
    hyper: Hyper,
}

#[derive(Args, Debug)]
struct ImdlArgs {
    /// Dataset file (JSON lines).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Domain(HanError),
}

impl From<HanError> for Failure {
    fn from(e: HanError) -> Self {
        Failure::Domain(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return 2;
    }
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Synth(a) => synth_cmd(a, &mut out),
        Command::McmExtract(a) => mcm_cmd(a, &mut out),
        Command::Train(a) => train_cmd(a, sub, &mut out),
        Command::Eval(a) => eval_cmd(a, &mut out),
        Command::Explain(a) => explain_cmd(a, &mut out),
        Command::ParamAudit(a) => audit_cmd(a, &mut out),
        Command::LayerSweep(a) => sweep_cmd(a, sub, &mut out),
        Command::Imdl(a) => imdl_cmd(a, &mut out),
    };
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("HANKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("HANKIT_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("HANKIT_THREADS must be >= 1".into());
    }
    // A second call in the same process keeps the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HanError + '_ {
    move |e| HanError::io(path, e)
}

fn stdout_err(e: io::Error) -> HanError {
    HanError::io("<stdout>", e)
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Defaults, then the config file, then flags typed on the command line.
fn resolve(h: &Hyper, layers: Option<usize>, m: &ArgMatches) -> std::result::Result<TrainConfig, Failure> {
    let mut c = match &h.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let file = h.config.is_some();
    macro_rules! take {
        ($id:literal, $field:ident, $v:expr) => {
            if !file || explicit(m, $id) {
                c.$field = $v;
            }
        };
    }
    take!("epochs", epochs, h.epochs);
    take!("batch", batch_size, h.batch);
    take!("lr", lr, h.lr);
    take!("wd", weight_decay, h.wd);
    take!("dropout", dropout, h.dropout);
    take!("cap", cap, h.cap);
    take!("seed", seed, h.seed);
    if let Some(l) = layers {
        take!("layers", layers, l);
    }
    if h.ablate_mcm {
        c.ablate_mcm = true;
    }
    if h.patience.is_some() {
        c.patience = h.patience;
    }
    c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn read_dataset(path: &Path, imdl: bool) -> Result<Dataset> {
    let ds = load_dataset(path)?;
    Ok(if imdl { imdl_transform(&ds).0 } else { ds })
}

fn subset(ds: &Dataset, which: Subset) -> Result<Dataset> {
    let tag = match which {
        Subset::All => return Ok(ds.clone()),
        Subset::Train => SplitTag::Train,
        Subset::Val => SplitTag::Val,
        Subset::Test => SplitTag::Test,
    };
    if !ds.has_split_tags() {
        return Err(HanError::InvalidArgument(format!("dataset has no split tags; cannot select {which:?}")));
    }
    Ok(ds.tagged(tag))
}

/// Tagged splits when present, otherwise a seeded stratified split.
fn three_way(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if ds.has_split_tags() {
        Ok((ds.tagged(SplitTag::Train), ds.tagged(SplitTag::Val), ds.tagged(SplitTag::Test)))
    } else {
        split(ds, seed)
    }
}

fn write_metrics(out: &mut dyn Write, prefix: &str, m: &Metrics) -> io::Result<()> {
    writeln!(
        out,
        "{prefix} accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} tp {} fp {} fn {} tn {}",
        m.accuracy, m.precision, m.recall, m.f1, m.tp, m.fp, m.fn_, m.tn
    )
}

fn synth_cmd(a: SynthArgs, out: &mut dyn Write) -> CliResult {
    let mut cfg = SynthConfig::new(a.users, a.d, a.separation, a.mcm_signal, a.seed);
    cfg.mcm_separation = a.mcm_separation.unwrap_or(a.separation);
    cfg.signal_fraction = a.signal_fraction;
    cfg.distractor_scale = a.distractor_scale;
    cfg.marker = a.marker;
    let ds = synth_generate(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    save_dataset(&ds, &a.out)?;
    let [neg, pos] = ds.label_counts();
    writeln!(out, "users {} d {} negative {neg} positive {pos}", ds.len(), ds.d).map_err(stdout_err)?;
    Ok(())
}

fn mcm_cmd(a: McmArgs, out: &mut dyn Write) -> CliResult {
    let lexicon = Lexicon::load(&a.lexicon)?;
    let taxonomy = Taxonomy::load(&a.taxonomy)?;
    let text = fs::read_to_string(&a.input).map_err(io_err(&a.input))?;
    let mut users_out = String::new();
    let mut maps_out = String::new();
    let (mut users, mut total, mut skipped) = (0usize, 0usize, 0usize);
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| HanError::Parse {
            line: i + 1,
            offset: 0,
            message,
        };
        let mut obj: serde_json::Value = serde_json::from_str(line).map_err(|e| HanError::Parse {
            line: i + 1,
            offset: e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        let map = obj.as_object_mut().ok_or_else(|| parse("expected a JSON object".into()))?;
        let id = map
            .get("user_id")
            .or_else(|| map.get("id"))
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| format!("line-{}", i + 1));
        let tweets = map
            .get("tweets")
            .and_then(|v| v.as_array())
            .ok_or_else(|| parse("missing `tweets` array".into()))?;
        let mut tokens = Vec::with_capacity(tweets.len());
        for t in tweets {
            let t = t.as_str().ok_or_else(|| parse("tweets must be strings".into()))?;
            tokens.push(if a.imdl {
                imdl_tweet(t).map(|s| tokenize(&s)).unwrap_or_default()
            } else {
                tokenize(&strip_noise(t))
            });
        }
        let ex = extract_user_mcms(&id, &tokens, &lexicon, &taxonomy, &CooccurrenceScorer)?;
        users += 1;
        total += ex.mappings.len();
        skipped += ex.skipped;
        for m in &ex.mappings {
            maps_out.push_str(&serde_json::to_string(m).expect("mapping serializes"));
            maps_out.push('\n');
        }
        let rendered: Vec<serde_json::Value> = ex.mappings.iter().map(|m| m.rendered.clone().into()).collect();
        map.insert("mcms".into(), rendered.into());
        users_out.push_str(&serde_json::to_string(&obj).expect("value serializes"));
        users_out.push('\n');
    }
    fs::write(&a.out, users_out).map_err(io_err(&a.out))?;
    if let Some(p) = &a.mappings {
        fs::write(p, maps_out).map_err(io_err(p))?;
    }
    writeln!(out, "users {users} mappings {total} skipped {skipped}").map_err(stdout_err)?;
    Ok(())
}

fn train_cmd(a: TrainCmd, m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    let config = resolve(&a.hyper, Some(a.layers), m)?;
    let ds = read_dataset(&a.input, a.hyper.imdl)?;
    let (tr, va, te) = three_way(&ds, config.seed)?;
    let outcome = train(&tr, &va, &config)?;
    save_model(&outcome.model, &a.out)?;
    if let Some(p) = &a.history {
        outcome.history.save_csv(p)?;
    }
    writeln!(out, "train {} val {} test {}", tr.len(), va.len(), te.len()).map_err(stdout_err)?;
    writeln!(out, "steps {} best_epoch {}", outcome.history.rows.len(), outcome.best_epoch).map_err(stdout_err)?;
    if let Some(v) = &outcome.best_val {
        write_metrics(out, "val", &v.metrics).map_err(stdout_err)?;
    }
    if !te.is_empty() {
        let e = evaluate(&outcome.model, &te, config.cap)?;
        write_metrics(out, "test", &e.metrics).map_err(stdout_err)?;
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> CliResult {
    if a.cap == 0 {
        return Err(Failure::Usage("cap must be >= 1".into()));
    }
    let model = load_model(&a.model)?;
    let ds = subset(&read_dataset(&a.input, a.imdl)?, a.split)?;
    let e = evaluate(&model, &ds, a.cap)?;
    write_metrics(out, "eval", &e.metrics).map_err(stdout_err)?;
    writeln!(out, "mean_loss {:.6}", e.mean_loss).map_err(stdout_err)?;
    Ok(())
}

fn explain_cmd(a: ExplainArgs, out: &mut dyn Write) -> CliResult {
    if a.k == 0 || a.cap == 0 {
        return Err(Failure::Usage("k and cap must be >= 1".into()));
    }
    let model = load_model(&a.model)?;
    let ds = subset(&read_dataset(&a.input, a.imdl)?, a.split)?;
    let mut reports = Vec::new();
    for id in &a.users {
        if !ds.users.iter().any(|u| &u.user_id == id) {
            return Err(HanError::InvalidArgument(format!("no user {id:?} in {}", a.input.display())).into());
        }
    }
    for u in &ds.users {
        if a.users.is_empty() || a.users.contains(&u.user_id) {
            reports.push(build_report(&model, u, a.k, a.cap)?);
        }
    }
    match &a.out {
        Some(p) => {
            let mut buf = Vec::new();
            emit_report(&reports, a.format, &mut buf)?;
            fs::write(p, buf).map_err(io_err(p))?;
        }
        None => emit_report(&reports, a.format, out)?,
    }
    Ok(())
}

fn audit_cmd(a: AuditArgs, out: &mut dyn Write) -> CliResult {
    let d_ff = a.d_ff.unwrap_or(a.d);
    for kind in EncoderKind::ALL {
        let n = count_params(kind, a.d, a.heads, d_ff).map_err(|e| Failure::Usage(e.to_string()))?;
        writeln!(out, "{}\t{}\t{}", kind.name(), n, format_millions(n)).map_err(stdout_err)?;
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs, m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    if a.depths.contains(&0) {
        return Err(Failure::Usage("depths must be >= 1".into()));
    }
    let config = resolve(&a.hyper, None, m)?;
    let ds = read_dataset(&a.input, a.hyper.imdl)?;
    let (tr, va, te) = three_way(&ds, config.seed)?;
    let rows = layer_sweep(&tr, &va, &te, &config, &a.depths)?;
    let mut csv = String::from("layers,val_f1,val_accuracy,test_f1,test_accuracy\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.layers, r.val.f1, r.val.accuracy, r.test.f1, r.test.accuracy
        ));
        writeln!(
            out,
            "l={:<2} val_f1 {:.4} val_acc {:.4} test_f1 {:.4} test_acc {:.4}",
            r.layers, r.val.f1, r.val.accuracy, r.test.f1, r.test.accuracy
        )
        .map_err(stdout_err)?;
    }
    if let Some(p) = &a.out {
        fs::write(p, csv).map_err(io_err(p))?;
    }
    Ok(())
}

fn imdl_cmd(a: ImdlArgs, out: &mut dyn Write) -> CliResult {
    let (ds, stats) = imdl_transform(&load_dataset(&a.input)?);
    save_dataset(&ds, &a.out)?;
    writeln!(
        out,
        "users {} tweets_removed {} users_removed {}",
        ds.len(),
        stats.tweets_removed,
        stats.users_removed
    )
    .map_err(stdout_err)?;
    Ok(())
}
