use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use catsgrid::exploit::{
    build_hierarchies, cmi_matrix, contrast_matrix, frequency_matrix, information_ratio, simplify, Matrix,
    SimplifyTarget,
};
use catsgrid::optimizer::{vns_optimize_with_progress, OptimizerConfig, Progress};
use catsgrid::synthbench::{self, GroundTruth, PatternSpec, TimeType};
use catsgrid::{load_dataset, marginal_stats, CatsDataset, Delimiter, Dimension, GridModel, InputFormat};

use crate::document::{cluster_id, interval_label, DocumentOptions, FitInfo, GridDocument, Simplified};
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "catsgrid", version, about = "Coclustering of categorical time series with data grids")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CATSGRID_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic pattern dataset and its ground truth.
    Generate(GenerateArgs),
    /// Fit a grid to a dataset.
    Fit(FitArgs),
    /// Coarsen a fitted grid along its merge hierarchy.
    Simplify(SimplifyArgs),
    /// Export the frequency, CMI or contrast matrix of a sequence cluster.
    Report(ReportArgs),
    /// Score a grid against a ground truth.
    Eval(EvalArgs),
    /// Recovery table over a grid of synthetic settings.
    Curve(CurveArgs),
    /// Marginal statistics of a dataset.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DelimiterArg {
    Auto,
    Tab,
    Comma,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Delimited text with columns id, time, event.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub delimiter: DelimiterArg,
    /// Treat the first row as a header.
    #[arg(long, conflicts_with = "no_header")]
    pub header: bool,
    /// Treat the first row as data.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimeTypeArg {
    Real,
    Integer,
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!("{s:?} is not a positive integer")),
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `two` for the built-in two-pattern family, or a JSON pattern file.
    #[arg(long, default_value = "two")]
    pub patterns: String,
    /// Sequences per pattern.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub cm: usize,
    #[arg(long, default_value_t = 1024, value_parser = positive)]
    pub points: usize,
    #[arg(long, default_value_t = 0.1, value_parser = unit_interval)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "real")]
    pub time_type: TimeTypeArg,
    /// Dataset CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth JSON to write; defaults to `<output>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Independent restarts.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop starting new restarts after this many seconds.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Report progress on stderr.
    #[arg(long)]
    pub progress: bool,
    /// Grid JSON to write (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Most typical values kept per cluster.
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    /// Embed the per-cluster matrices.
    #[arg(long)]
    pub matrices: bool,
    /// Optimization trace CSV to write.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["ir", "clusters"]))]
pub struct SimplifyArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Keep at least this information ratio.
    #[arg(long, value_parser = unit_interval)]
    pub ir: Option<f64>,
    /// Part counts, e.g. `S=20,E=21` (T also accepted).
    #[arg(long)]
    pub clusters: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    #[arg(long)]
    pub matrices: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixKind {
    Freq,
    Cmi,
    Contrast,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Sequence cluster id, e.g. `S0`.
    #[arg(long)]
    pub cluster: String,
    #[arg(long, value_enum, default_value = "freq")]
    pub kind: MatrixKind,
    /// CSV to write (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, default_value = "two")]
    pub patterns: String,
    /// Comma-separated sequences-per-pattern values.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub cm: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1", value_parser = unit_interval)]
    pub eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    pub points: Vec<usize>,
    /// Seeds `0..seeds` per setting.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub seeds: usize,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    pub rounds: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

/// The raw bytes (for the digest) and the parsed dataset.
fn load_input(args: &InputArgs) -> Result<(Vec<u8>, CatsDataset)> {
    let bytes = fs::read(&args.input).with_context(|| format!("cannot read {}", args.input.display()))?;
    let format = InputFormat {
        delimiter: match args.delimiter {
            DelimiterArg::Auto => Delimiter::Auto,
            DelimiterArg::Tab => Delimiter::Tab,
            DelimiterArg::Comma => Delimiter::Comma,
        },
        header: match (args.header, args.no_header) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        },
    };
    let d = load_dataset(bytes.as_slice(), format).with_context(|| format!("in {}", args.input.display()))?;
    Ok((bytes, d))
}

fn load_patterns(arg: &str) -> Result<PatternSpec> {
    if arg == "two" {
        Ok(PatternSpec::two_patterns())
    } else {
        read_json(Path::new(arg))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("cannot start worker threads")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Simplify(a) => simplify_cmd(a),
        Command::Report(a) => report(a),
        Command::Eval(a) => eval(a),
        Command::Curve(a) => curve(a),
        Command::Stats(a) => stats(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let spec = load_patterns(&a.patterns)?;
    let time = match a.time_type {
        TimeTypeArg::Real => TimeType::Real,
        TimeTypeArg::Integer => TimeType::Integer,
    };
    let syn = synthbench::generate(&spec, a.cm, a.points, a.eta, a.seed, time)?;
    let mut w = csv::Writer::from_writer(sink(Some(&a.output))?);
    w.write_record(["id", "time", "event"])?;
    for p in &syn.points {
        w.write_record([p.seq.as_str(), &p.t.to_string(), p.event.as_str()])?;
    }
    w.flush()?;
    let truth = a.truth.unwrap_or_else(|| a.output.with_extension("truth.json"));
    write_json(Some(&truth), &syn.truth)
}

fn fit(a: FitArgs) -> Result<()> {
    let (bytes, d) = load_input(&a.input)?;
    if let Some(b) = a.budget {
        if !(b.is_finite() && b > 0.0) {
            return Err(usage("--budget must be a positive number of seconds"));
        }
    }
    let cfg = OptimizerConfig {
        vns_rounds: a.rounds,
        seed: a.seed,
        time_budget: a.budget.map(Duration::from_secs_f64),
        ..OptimizerConfig::default()
    };
    let start = Instant::now();
    let mut last = Instant::now();
    let mut report = |p: &Progress| {
        if last.elapsed() >= Duration::from_millis(500) || p.step == 0 {
            eprintln!("round {} {:>9} step {:>6} cost {:.3} ({:.1}s)", p.round, p.phase.to_string(), p.step, p.cost, p.elapsed.as_secs_f64());
            last = Instant::now();
        }
    };
    let hook: Option<&mut dyn FnMut(&Progress)> = if a.progress { Some(&mut report) } else { None };
    let (m, trace) = vns_optimize_with_progress(&d, &cfg, hook);
    let runtime_s = start.elapsed().as_secs_f64();
    if let Some(path) = &a.trace {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        trace.write_csv(BufWriter::new(f))?;
    }
    let h = build_hierarchies(&d, &m)?;
    let doc = GridDocument::build(
        &d,
        &bytes,
        &m,
        &h,
        DocumentOptions {
            top_k: a.top_k,
            matrices: a.matrices,
            fit: Some(FitInfo { seed: a.seed, rounds: trace.round_costs.len(), runtime_s, budget_s: a.budget }),
            simplified: None,
        },
    )?;
    write_json(a.output.as_deref(), &doc)
}

fn parse_parts(spec: &str) -> Result<SimplifyTarget> {
    let (mut seq, mut time, mut event) = (None, None, None);
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| usage(format!("expected DIM=COUNT, got {item:?}")))?;
        let n: usize = v.trim().parse().map_err(|_| usage(format!("invalid count in {item:?}")))?;
        let slot = match k.trim() {
            "S" => &mut seq,
            "T" => &mut time,
            "E" => &mut event,
            other => return Err(usage(format!("unknown dimension {other:?}; use S, T or E"))),
        };
        *slot = Some(n);
    }
    if seq.is_none() && time.is_none() && event.is_none() {
        return Err(usage("--clusters needs at least one DIM=COUNT"));
    }
    Ok(SimplifyTarget::Parts { seq, time, event })
}

fn load_grid(path: &Path, d: &CatsDataset) -> Result<(GridDocument, GridModel)> {
    let doc: GridDocument = read_json(path)?;
    let m = doc.to_model(d).with_context(|| format!("in {}", path.display()))?;
    Ok((doc, m))
}

fn simplify_cmd(a: SimplifyArgs) -> Result<()> {
    let target = match (a.ir, &a.clusters) {
        (Some(r), _) => SimplifyTarget::MinIr(r),
        (None, Some(spec)) => parse_parts(spec)?,
        (None, None) => unreachable!("clap enforces a target"),
    };
    let (bytes, d) = load_input(&a.input)?;
    let (doc, mstar) = load_grid(&a.grid, &d)?;
    let h = build_hierarchies(&d, &mstar)?;
    let m = simplify(&d, &mstar, &h, target).map_err(|e| match e {
        catsgrid::CatsError::Unachievable(msg) => usage(msg),
        e => e.into(),
    })?;
    let cost = catsgrid::model_cost(&d, &m)?.total;
    let hm = build_hierarchies(&d, &m)?;
    let out = GridDocument::build(
        &d,
        &bytes,
        &m,
        &hm,
        DocumentOptions {
            top_k: a.top_k,
            matrices: a.matrices,
            fit: doc.fit.clone(),
            simplified: Some(Simplified {
                source_cost: h.cost_star,
                ir: information_ratio(cost, h.cost_star, h.cost_null),
            }),
        },
    )?;
    write_json(a.output.as_deref(), &out)
}

fn write_matrix<T: Copy + ToString>(
    w: Box<dyn Write>,
    d: &CatsDataset,
    m: &GridModel,
    mat: &Matrix<T>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["interval".to_string()];
    header.extend((0..m.k_event()).map(|e| cluster_id(Dimension::Event, e)));
    w.write_record(&header)?;
    for (j, row) in mat.rows().enumerate() {
        let mut rec = vec![interval_label(d, m, j)];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let (_, d) = load_input(&a.input)?;
    let (doc, m) = load_grid(&a.grid, &d)?;
    let c = doc.seq_cluster_index(&a.cluster)?;
    let w = sink(a.output.as_deref())?;
    match a.kind {
        MatrixKind::Freq => write_matrix(w, &d, &m, &frequency_matrix(&d, &m, c)?),
        MatrixKind::Cmi => write_matrix(w, &d, &m, &cmi_matrix(&d, &m, c)?),
        MatrixKind::Contrast => write_matrix(w, &d, &m, &contrast_matrix(&d, &m, c)?),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let doc: GridDocument = read_json(&a.grid)?;
    let truth: GroundTruth = read_json(&a.truth)?;
    let members = |cs: &[crate::document::Cluster]| cs.iter().map(|c| c.members.clone()).collect::<Vec<_>>();
    let boundaries: Vec<f64> = doc.model.intervals.iter().skip(1).map(|i| i.lower).collect();
    let r = synthbench::score_labels(
        &members(&doc.model.seq_clusters),
        &members(&doc.model.event_clusters),
        &boundaries,
        &truth,
    )?;
    write_json(a.output.as_deref(), &r)
}

fn curve(a: CurveArgs) -> Result<()> {
    let spec = load_patterns(&a.patterns)?;
    let cfg = OptimizerConfig { vns_rounds: a.rounds, ..OptimizerConfig::default() };
    let seeds: Vec<u64> = (0..a.seeds as u64).collect();
    let rows = synthbench::ari_curve(&spec, &a.cm, &a.eta, &a.points, &seeds, &cfg)?;
    let mut w = csv::Writer::from_writer(sink(a.output.as_deref())?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize)]
struct StatsReport {
    n_sequences: usize,
    n_events: usize,
    n_points: usize,
    n_time_values: usize,
    #[serde(flatten)]
    marginals: catsgrid::MarginalStats,
}

fn stats(a: StatsArgs) -> Result<()> {
    let (_, d) = load_input(&a.input)?;
    let report = StatsReport {
        n_sequences: d.n_sequences(),
        n_events: d.n_events(),
        n_points: d.n_points(),
        n_time_values: d.n_time_groups(),
        marginals: marginal_stats(&d),
    };
    write_json(a.output.as_deref(), &report)
}
