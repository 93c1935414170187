//! Command-line front end.
//!
//! Data goes to stdout or files, progress and timings to stderr. Every written
//! file carries a provenance record (tool version, subcommand, flags, seed):
//! `#` comment lines at the top of TSV/CSV outputs, or a `<file>.provenance`
//! sidecar for embedding files and checkpoints.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::autoencoder::{encode, save_checkpoint, train, Activation, Checkpoint, Optimizer, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, format_table, AnalogyOptions, EvalRecord, EvalReport};
use crate::io::{load_benchmark, load_embeddings, save_embeddings, Benchmark, BenchmarkKind, EmbeddingFormat, EmbeddingSet};
use crate::isotropy::{gamma, z_histogram, DEFAULT_BINS};
use crate::postprocess::{apply, default_abtt_d, PostprocessConfig};
use crate::theory::{run_suite, Grid};

pub const THREADS_ENV: &str = "AUTOPCA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "autopca", version, about = "Post-process, analyse and evaluate word embeddings")]
struct Cli {
    /// key=value file supplying defaults for any long flag; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: $AUTOPCA_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply center, pca_keep, abtt or an autoencoder and write new embeddings.
    Postprocess(PostprocessArgs),
    /// Score embeddings on similarity, analogy and categorization benchmarks.
    Eval(EvalArgs),
    /// Isotropy ratio and partition-function histogram.
    Isotropy(IsotropyArgs),
    /// Run the numerical autoencoder/PCA check suite.
    Verify(VerifyArgs),
    /// Train autoencoders at several hidden sizes and evaluate each.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Center,
    #[value(name = "pca_keep")]
    PcaKeep,
    Abtt,
    /// tanh autoencoder
    Ae,
    /// linear autoencoder
    Lae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    Word2vec,
    Glove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Gd,
}

#[derive(Debug, Args)]
struct FormatOpts {
    /// Input embedding format.
    #[arg(long, value_enum, default_value = "auto")]
    format: FormatArg,
}

#[derive(Debug, Clone, Args)]
struct TrainOpts {
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long = "lr", default_value_t = 2e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Stop when the relative epoch-to-epoch loss change falls below this (0 disables).
    #[arg(long, default_value_t = 1e-6)]
    min_rel_improvement: f64,
}

#[derive(Debug, Args)]
struct PostprocessArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Components kept by pca_keep.
    #[arg(long)]
    p: Option<usize>,
    /// Components removed by abtt (default max(1, round(n/100))).
    #[arg(long)]
    d: Option<usize>,
    /// Hidden size for ae/lae.
    #[arg(long, default_value_t = 300)]
    hidden: usize,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    format: FormatOpts,
    /// Output format (default: same as input).
    #[arg(long, value_enum)]
    output_format: Option<FormatArg>,
    /// Checkpoint path for ae/lae (default <output>.ckpt).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Training trace path for ae/lae (default <output>.trace.tsv).
    #[arg(long)]
    trace: Option<PathBuf>,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Benchmark manifest: one `name kind path` per line.
    #[arg(long)]
    benchmarks: PathBuf,
    /// Column labels for the embedding files (default: file stems).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Write the report as TSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Keep the three query words as analogy candidates.
    #[arg(long)]
    no_exclude: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    format: FormatOpts,
    #[arg(required = true)]
    embeddings: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct IsotropyArgs {
    /// Write a histogram of Z(c)/mean Z as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    format: FormatOpts,
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    Small,
    Default,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "default")]
    grid: GridArg,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write machine-readable check lines.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Print machine-readable lines instead of the table.
    #[arg(long)]
    lines: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated hidden sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    benchmarks: PathBuf,
    #[arg(long, value_enum, default_value = "tanh")]
    activation: ActivationArg,
    #[command(flatten)]
    train: TrainOpts,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    no_exclude: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    format: FormatOpts,
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationArg {
    Linear,
    Tanh,
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    let provenance = Provenance::new(&args, &cli.command);
    let result = match &cli.command {
        Command::Postprocess(a) => cmd_postprocess(a, &provenance),
        Command::Eval(a) => cmd_eval(a, &provenance),
        Command::Isotropy(a) => cmd_isotropy(a, &provenance),
        Command::Verify(a) => cmd_verify(a, &provenance),
        Command::Sweep(a) => cmd_sweep(a, &provenance),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::arg(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::arg("thread count must be positive"));
        }
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Parses a `key = value` config file. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {raw:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        entries.push((key, value.trim().to_owned()));
    }
    Ok(entries)
}

/// Strips `--config FILE` from `args` and appends the file's entries as long
/// flags unless the same flag is already given explicitly.
fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            config = Some(PathBuf::from(iter.next().ok_or_else(|| Error::arg("--config needs a path"))?));
        } else if let Some(path) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(path));
        } else {
            out.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(out);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let entries = parse_config(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for (key, value) in entries {
        let flag = format!("--{key}");
        let explicit = out.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        });
        if explicit {
            continue;
        }
        match value.as_str() {
            "true" => out.push(flag.into()),
            "false" => {}
            _ => {
                out.push(flag.into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

struct Provenance {
    subcommand: &'static str,
    flags: String,
    seed: Option<u64>,
}

impl Provenance {
    fn new(args: &[OsString], command: &Command) -> Self {
        let (subcommand, seed) = match command {
            Command::Postprocess(a) => ("postprocess", Some(a.seed)),
            Command::Eval(a) => ("eval", Some(a.seed)),
            Command::Isotropy(a) => ("isotropy", Some(a.seed)),
            Command::Verify(a) => ("verify", Some(a.seed)),
            Command::Sweep(a) => ("sweep", Some(a.seed)),
        };
        let flags = args
            .iter()
            .skip(1)
            .map(|a| a.to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join(" ");
        Self { subcommand, flags, seed }
    }

    fn lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("tool: autopca {}", env!("CARGO_PKG_VERSION")),
            format!("subcommand: {}", self.subcommand),
            format!("flags: {}", self.flags),
        ];
        if let Some(seed) = self.seed {
            lines.push(format!("seed: {seed}"));
        }
        lines
    }

    fn comment_header(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }

    fn write_sidecar(&self, target: &Path) -> Result<()> {
        let path = sidecar(target, "provenance");
        let body: String = self.lines().iter().map(|l| format!("{l}\n")).collect();
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }

    fn write_commented(&self, path: &Path, body: &str) -> Result<()> {
        fs::write(path, format!("{}{body}", self.comment_header())).map_err(|e| Error::io(path, e))
    }
}

fn sidecar(target: &Path, suffix: &str) -> PathBuf {
    let mut name = target.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn resolve_format(arg: FormatArg, path: &Path) -> Result<EmbeddingFormat> {
    match arg {
        FormatArg::Auto => EmbeddingFormat::detect(path),
        FormatArg::Word2vec => Ok(EmbeddingFormat::Word2VecText),
        FormatArg::Glove => Ok(EmbeddingFormat::GloveText),
    }
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::Duplicate { word, line } => Error::Format(format!(
            "{}: duplicate word {word:?} at line {line}",
            path.display()
        )),
        other => other,
    })
}

fn load(path: &Path, format: FormatArg) -> Result<(EmbeddingSet, EmbeddingFormat)> {
    let fmt = resolve_format(format, path)?;
    let started = Instant::now();
    let set = with_path(path, load_embeddings(path, fmt))?;
    info!(
        "loaded {} words x {} dims from {} in {:.2}s",
        set.len(),
        set.dim(),
        path.display(),
        started.elapsed().as_secs_f64()
    );
    Ok((set, fmt))
}

fn train_config(opts: &TrainOpts, hidden: usize, activation: Activation, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden_dim: hidden,
        activation,
        optimizer: match opts.optimizer {
            OptimizerArg::Adam => Optimizer::adam(),
            OptimizerArg::Gd => Optimizer::GradientDescent,
        },
        learning_rate: opts.learning_rate,
        batch_size: opts.batch_size,
        dropout: opts.dropout,
        epochs: opts.epochs,
        min_rel_improvement: opts.min_rel_improvement,
        seed,
        ..TrainConfig::default()
    }
}

fn cmd_postprocess(a: &PostprocessArgs, prov: &Provenance) -> Result<i32> {
    let started = Instant::now();
    let (set, in_fmt) = load(&a.input, a.format.format)?;
    let out_fmt = match a.output_format {
        None | Some(FormatArg::Auto) => in_fmt,
        Some(FormatArg::Word2vec) => EmbeddingFormat::Word2VecText,
        Some(FormatArg::Glove) => EmbeddingFormat::GloveText,
    };
    let result = match a.method {
        Method::Center => apply(&set, PostprocessConfig::Center)?,
        Method::PcaKeep => {
            let p = a.p.ok_or_else(|| Error::arg("pca_keep needs --p"))?;
            apply(&set, PostprocessConfig::PcaKeep { p })?
        }
        Method::Abtt => {
            let d_remove = a.d.unwrap_or_else(|| default_abtt_d(set.dim()));
            apply(&set, PostprocessConfig::Abtt { d_remove })?
        }
        Method::Ae | Method::Lae => {
            let activation = if a.method == Method::Ae { Activation::Tanh } else { Activation::Linear };
            let config = train_config(&a.train, a.hidden, activation, a.seed);
            let (params, trace) = train(&set, &config)?;
            let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| sidecar(&a.output, "ckpt"));
            save_checkpoint(&ckpt_path, &Checkpoint { params: params.clone(), seed: a.seed })?;
            prov.write_sidecar(&ckpt_path)?;
            let trace_path = a.trace.clone().unwrap_or_else(|| sidecar(&a.output, "trace.tsv"));
            prov.write_commented(&trace_path, &trace.to_tsv())?;
            println!("final_loss={}", trace.final_loss);
            eprintln!(
                "trained {} epochs in {:.2}s",
                trace.epochs(),
                trace.epoch_seconds.iter().sum::<f64>()
            );
            encode(&params, &set)?
        }
    };
    save_embeddings(&result, &a.output, out_fmt)?;
    prov.write_sidecar(&a.output)?;
    eprintln!(
        "wrote {} words x {} dims to {} ({:.2}s)",
        result.len(),
        result.dim(),
        a.output.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(0)
}

/// One manifest entry; relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: BenchmarkKind,
    pub path: PathBuf,
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected `name kind path`, got {raw:?}"),
            });
        }
        let kind: BenchmarkKind = fields[1].parse()?;
        let path = Path::new(fields[2]);
        entries.push(ManifestEntry {
            name: fields[0].to_owned(),
            kind,
            path: if path.is_absolute() { path.to_owned() } else { base.join(path) },
        });
    }
    Ok(entries)
}

fn load_manifest(path: &Path) -> Result<Vec<(String, Benchmark)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = with_path(path, parse_manifest(&text, base))?;
    if entries.is_empty() {
        return Err(Error::arg(format!("no benchmarks in manifest {}", path.display())));
    }
    // Validate every path before any work starts.
    for e in &entries {
        if !e.path.is_file() {
            return Err(Error::io(
                &e.path,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("benchmark {} not found", e.name)),
            ));
        }
    }
    entries
        .into_iter()
        .map(|e| with_path(&e.path, load_benchmark(&e.path, e.kind)).map(|b| (e.name, b)))
        .collect()
}

fn eval_all(set: &EmbeddingSet, benchmarks: &[(String, Benchmark)], seed: u64, options: AnalogyOptions) -> Result<EvalReport> {
    let records: Result<Vec<EvalRecord>> = benchmarks
        .iter()
        .map(|(name, bench)| evaluate(set, name, bench, seed, options))
        .collect();
    Ok(EvalReport { records: records? })
}

fn labelled_tsv(columns: &[(String, EvalReport)]) -> String {
    if columns.len() == 1 {
        return columns[0].1.to_tsv();
    }
    let mut out = format!("embedding\t{}\n", EvalReport::TSV_HEADER);
    for (label, report) in columns {
        for line in report.to_tsv().lines().skip(1) {
            out.push_str(&format!("{label}\t{line}\n"));
        }
    }
    out
}

fn print_coverage(columns: &[(String, EvalReport)]) {
    for (label, report) in columns {
        for r in &report.records {
            if r.n_items < r.total_items {
                eprintln!(
                    "{label}/{}: {} of {} items in vocabulary ({:.1}%)",
                    r.dataset,
                    r.n_items,
                    r.total_items,
                    100.0 * r.coverage
                );
            }
        }
    }
}

fn cmd_eval(a: &EvalArgs, prov: &Provenance) -> Result<i32> {
    if !a.labels.is_empty() && a.labels.len() != a.embeddings.len() {
        return Err(Error::arg(format!(
            "{} labels for {} embedding files",
            a.labels.len(),
            a.embeddings.len()
        )));
    }
    for path in &a.embeddings {
        if !path.is_file() {
            return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "embedding file not found")));
        }
    }
    let benchmarks = load_manifest(&a.benchmarks)?;
    let options = AnalogyOptions {
        exclude_query: !a.no_exclude,
    };
    let mut columns = Vec::new();
    for (i, path) in a.embeddings.iter().enumerate() {
        let label = a.labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("emb{i}"))
        });
        let (set, _) = load(path, a.format.format)?;
        columns.push((label, eval_all(&set, &benchmarks, a.seed, options)?));
    }
    print!("{}", format_table(&columns));
    print_coverage(&columns);
    if let Some(out) = &a.output {
        prov.write_commented(out, &labelled_tsv(&columns))?;
    }
    Ok(0)
}

fn cmd_isotropy(a: &IsotropyArgs, prov: &Provenance) -> Result<i32> {
    let (set, _) = load(&a.input, a.format.format)?;
    let report = gamma(&set)?;
    println!("{}", report.summary_line());
    if report.degenerate {
        println!("note: zero covariance, gamma set to 1");
    }
    eprint!("{}", report.text_block());
    if let Some(path) = &a.histogram {
        let hist = z_histogram(&set, a.samples, a.bins, a.seed)?;
        prov.write_commented(path, &hist.to_csv())?;
    }
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, prov: &Provenance) -> Result<i32> {
    let grid = match a.grid {
        GridArg::Small => Grid::Small,
        GridArg::Default => Grid::Default,
    };
    let started = Instant::now();
    let report = run_suite(grid, a.seed);
    if a.lines {
        print!("{}", report.to_lines());
    } else {
        print!("{}", report.to_table());
    }
    if let Some(path) = &a.output {
        prov.write_commented(path, &report.to_lines())?;
    }
    eprintln!("verify finished in {:.2}s", started.elapsed().as_secs_f64());
    Ok(if report.all_passed() { 0 } else { 1 })
}

fn cmd_sweep(a: &SweepArgs, prov: &Provenance) -> Result<i32> {
    if a.dims.is_empty() || a.dims.contains(&0) {
        return Err(Error::arg("--dims needs positive hidden sizes"));
    }
    let benchmarks = load_manifest(&a.benchmarks)?;
    let (set, _) = load(&a.input, a.format.format)?;
    let activation = match a.activation {
        ActivationArg::Linear => Activation::Linear,
        ActivationArg::Tanh => Activation::Tanh,
    };
    let options = AnalogyOptions {
        exclude_query: !a.no_exclude,
    };
    let mut columns = Vec::new();
    for &dim in &a.dims {
        let config = train_config(&a.train, dim, activation, a.seed);
        let (params, trace) = train(&set, &config)?;
        eprintln!("p={dim}: final loss {}", trace.final_loss);
        let hidden = encode(&params, &set)?;
        columns.push((format!("p={dim}"), eval_all(&hidden, &benchmarks, a.seed, options)?));
    }
    print!("{}", format_table(&columns));
    if let Some(out) = &a.output {
        prov.write_commented(out, &labelled_tsv(&columns))?;
    }
    Ok(0)
}
