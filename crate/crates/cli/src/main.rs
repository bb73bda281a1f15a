use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use commoneval::analysis::{
    correlation_matrix, disaggregate, disaggregate_csv, scatter, scatter_csv, CorrelationOptions,
};
use commoneval::evaluate::evaluate;
use commoneval::ingest::{
    parse_catalog, parse_categories, parse_qrels, parse_ratings, parse_run_file, read_report,
    write_catalog, write_categories, write_qrels, write_report, write_run_file, ReportFormat,
};
use commoneval::model::{
    validate_runset, Aggregation, EvalConfig, MetricReport, RunSet, TailPolicy,
};
use commoneval::synth::{synth_world, system_family, Placement, SynthSpec};

const THREADS_VAR: &str = "COMMONEVAL_THREADS";

/// Commonality and baseline evaluation of recommender runs.
#[derive(Parser, Debug)]
#[command(name = "commoneval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score run files with commonality and the baseline metrics.
    Evaluate(EvaluateArgs),
    /// Kendall tau matrix between the leaderboards of every metric.
    Correlate(CorrelateArgs),
    /// Per-category commonality table and utility/commonality scatter data.
    Report(ReportArgs),
    /// Generate a synthetic world and a family of systems over it.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Browsing persistence.
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Depth for NDCG, alpha-NDCG, ERR-IA, RSP and REO.
    #[arg(long, default_value_t = 100)]
    cutoff: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Stop mass past the end of a ranking: literal or persist.
    #[arg(long, default_value_t = TailPolicy::PaperLiteral)]
    tail: TailPolicy,
    /// Lowest grade counted as relevant.
    #[arg(long, default_value_t = 4)]
    threshold: u32,
    /// Averaging of per-category commonality: arith or geom.
    #[arg(long, default_value_t = Aggregation::Arithmetic)]
    aggregation: Aggregation,
}

impl ConfigArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            gamma: self.gamma,
            cutoff_k: self.cutoff,
            alpha: self.alpha,
            tail_policy: self.tail,
            relevance_threshold: self.threshold,
            aggregation: self.aggregation,
        }
    }
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("judgments").required(true).args(["qrels", "ratings"]))]
struct EvaluateArgs {
    /// TREC run file; may be repeated, each file may hold several systems.
    #[arg(long = "run", required = true, value_name = "FILE")]
    runs: Vec<PathBuf>,
    /// Graded judgments in qrels format.
    #[arg(long, value_name = "FILE")]
    qrels: Option<PathBuf>,
    /// Raw ratings (`user::item::rating[::ts]` or CSV), used in place of qrels.
    #[arg(long, value_name = "FILE")]
    ratings: Option<PathBuf>,
    /// Tab-separated `item<TAB>category` lines.
    #[arg(long, value_name = "FILE")]
    categories: PathBuf,
    /// One item per line; runs may only rank these items.
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    /// Reports written by `evaluate`, merged before correlating.
    #[arg(required = true, value_name = "REPORT")]
    reports: Vec<PathBuf>,
    /// Which commonality mean stands in for the system.
    #[arg(long, default_value_t = Aggregation::Arithmetic)]
    aggregation: Aggregation,
    /// Correlate raw metric values without flipping lower-is-better metrics.
    #[arg(long)]
    raw_direction: bool,
    #[arg(long, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(required = true, value_name = "REPORT")]
    reports: Vec<PathBuf>,
    /// Systems to include in the per-category table (default: all).
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    #[arg(long, default_value_t = Aggregation::Arithmetic)]
    aggregation: Aggregation,
    /// Receives `disaggregation.csv` and `scatter.csv`.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    users: usize,
    #[arg(long, default_value_t = 2000)]
    items: usize,
    #[arg(long, default_value_t = 8)]
    categories: usize,
    #[arg(long, default_value_t = 25)]
    category_size: usize,
    #[arg(long, default_value_t = 1.0)]
    popularity_exponent: f64,
    /// Fraction of the catalog relevant to each user.
    #[arg(long, default_value_t = 0.01)]
    relevance_density: f64,
    /// Allow categories to share items.
    #[arg(long)]
    overlap: bool,
    /// uniform, popular or longtail.
    #[arg(long, default_value_t = Placement::Uniform)]
    placement: Placement,
    /// Draw the first N categories from the most popular items.
    #[arg(long, default_value_t = 0)]
    popular_categories: usize,
    /// Ranking length per user (default: the whole catalog).
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.seed,
            n_users: self.users,
            n_items: self.items,
            n_categories: self.categories,
            category_size: self.category_size,
            popularity_exponent: self.popularity_exponent,
            relevance_density: self.relevance_density,
            overlap: self.overlap,
            placement: self.placement,
            popular_categories: self.popular_categories,
        }
    }
}

/// Failures in reading or validating inputs, reported with exit code 2.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(InputError(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<commoneval::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
    }
    1
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| input_error(format!("cannot open {}: {e}", path.display())))
}

fn read_with<T>(
    path: &Path,
    parse: impl FnOnce(BufReader<File>) -> commoneval::Result<T>,
) -> anyhow::Result<T> {
    let reader = open(path)?;
    parse(reader).with_context(|| format!("in {}", path.display()))
}

fn read_reports(paths: &[PathBuf]) -> anyhow::Result<MetricReport> {
    let mut merged = MetricReport::new();
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
        let report = read_report(&text).with_context(|| format!("in {}", path.display()))?;
        merged
            .merge(report)
            .with_context(|| format!("merging {}", path.display()))?;
    }
    Ok(merged)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| input_error(format!("cannot write to {}: {e}", dir.display())))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| input_error(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let cfg = args.config.config();
    cfg.validate()?;
    let mut runs: Vec<RunSet> = Vec::new();
    let mut names = BTreeSet::new();
    for path in &args.runs {
        for run in read_with(path, parse_run_file)? {
            if !names.insert(run.system_name().to_string()) {
                return Err(input_error(format!(
                    "system `{}` appears in more than one run file ({})",
                    run.system_name(),
                    path.display()
                )));
            }
            runs.push(run);
        }
    }
    let qrels = match (&args.qrels, &args.ratings) {
        (Some(path), _) => read_with(path, parse_qrels)?,
        (None, Some(path)) => read_with(path, parse_ratings)?.into_qrels(),
        (None, None) => unreachable!("clap requires one of --qrels and --ratings"),
    };
    let mut index = read_with(&args.categories, parse_categories)?;
    let catalog = match &args.catalog {
        Some(path) => Some(read_with(path, parse_catalog)?),
        None => None,
    };

    let mut problems = 0;
    for run in &runs {
        for d in validate_runset(run, catalog.as_ref()) {
            eprintln!("error: {d}");
            problems += 1;
        }
    }
    if problems > 0 {
        return Err(input_error(format!("{problems} problem(s) in run files")));
    }
    if let Some(catalog) = catalog {
        index = index.with_catalog(catalog)?;
    }

    let report = evaluate(&runs, &qrels, &index, &cfg)?;
    write_atomic(&args.out, write_report(&report, args.format).as_bytes())
}

fn cmd_correlate(args: &CorrelateArgs) -> anyhow::Result<()> {
    let report = read_reports(&args.reports)?;
    let opts = CorrelationOptions {
        aggregation: args.aggregation,
        raw_direction: args.raw_direction,
    };
    let matrix = correlation_matrix(&report, opts)?;
    for metric in &matrix.skipped {
        eprintln!("warning: {metric} is missing for some systems and was left out");
    }
    let text = match args.format {
        ReportFormat::Csv => matrix.to_csv(),
        ReportFormat::Json => matrix.to_json(),
    };
    write_atomic(&args.out, text.as_bytes())
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let report = read_reports(&args.reports)?;
    let systems: Vec<String> = if args.systems.is_empty() {
        report.systems().into_iter().map(String::from).collect()
    } else {
        args.systems.clone()
    };
    let rows = disaggregate(&report, &systems, args.aggregation)?;
    let points = scatter(&report, args.aggregation);
    if points.is_empty() {
        bail!("no system has both ndcg and commonality values");
    }
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| input_error(format!("cannot create {}: {e}", args.out_dir.display())))?;
    write_atomic(
        &args.out_dir.join("disaggregation.csv"),
        disaggregate_csv(&rows).as_bytes(),
    )?;
    write_atomic(
        &args.out_dir.join("scatter.csv"),
        scatter_csv(&points).as_bytes(),
    )
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> commoneval::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = args.spec();
    let world = synth_world(&spec)?;
    let depth = args.depth.unwrap_or(spec.n_items);
    if depth == 0 || depth > spec.n_items {
        return Err(input_error(format!(
            "depth must be in 1..={}, got {depth}",
            spec.n_items
        )));
    }
    let runs = system_family(&world, spec.seed, depth)?;

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for run in &runs {
        let bytes = render(|b| write_run_file(std::slice::from_ref(run), b))?;
        files.push((
            Path::new("runs").join(format!("{}.run", run.system_name())),
            bytes,
        ));
    }
    files.push((
        "qrels.txt".into(),
        render(|b| write_qrels(&world.qrels, b))?,
    ));
    files.push((
        "categories.tsv".into(),
        render(|b| write_categories(&world.categories, b))?,
    ));
    files.push((
        "catalog.txt".into(),
        render(|b| write_catalog(&world.catalog(), b))?,
    ));
    let manifest = serde_json::json!({
        "seed": spec.seed,
        "depth": depth,
        "spec": spec,
        "systems": runs.iter().map(|r| r.system_name()).collect::<Vec<_>>(),
    });
    let mut manifest = serde_json::to_string_pretty(&manifest)?;
    manifest.push('\n');
    files.push(("manifest.json".into(), manifest.into_bytes()));

    let runs_dir = args.out_dir.join("runs");
    std::fs::create_dir_all(&runs_dir)
        .map_err(|e| input_error(format!("cannot create {}: {e}", runs_dir.display())))?;
    for (rel, bytes) in &files {
        write_atomic(&args.out_dir.join(rel), bytes)?;
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            input_error(format!(
                "{THREADS_VAR} must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow!("cannot start thread pool: {e}"))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Report(a) => cmd_report(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
