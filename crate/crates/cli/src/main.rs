use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dynetforge::dynamics::{build_dataset, DatasetConfig, DynamicsKind, Protocol, SplitLabel};
use dynetforge::graph::GraphFamily;
use dynetforge::io;
use dynetforge::train::{
    evaluate, run_experiment_matrix, train_with_progress, MatrixOptions, MatrixSpec, ModelKind,
    Task, TrainConfig,
};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dynetforge", version, about = "Learn continuous network dynamics from sparse snapshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dynamics on a generated graph and write a dataset file.
    Generate(GenerateArgs),
    /// Train a model on a dataset and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a test split and append rows to a report.
    Eval(EvalArgs),
    /// Write truth and prediction grids at chosen times.
    Viz(VizArgs),
    /// Run a grid of experiments described by a TOML file.
    Matrix(MatrixArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    dynamics: DynamicsKind,
    #[arg(long)]
    graph: GraphFamily,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value = "irregular")]
    protocol: Protocol,
    #[arg(long, default_value_t = 0.1)]
    train_frac: f64,
    /// Defaults to 5 for gene and mutualistic, 10 for kuramoto.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total snapshot count (default 120 irregular, 80 regular).
    #[arg(long)]
    snapshots: Option<usize>,
    /// Use the attractive sign convention for Kuramoto coupling.
    #[arg(long)]
    classical_kuramoto: bool,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    hidden: usize,
    #[arg(long, default_value_t = 5)]
    augment: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the loss every this many epochs (0 disables).
    #[arg(long, default_value_t = 50)]
    log_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    task: Task,
    /// Report CSV; rows are appended. The per-snapshot series goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Viz(a) => viz_cmd(a),
        Command::Matrix(a) => matrix_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .chain()
                .any(|c| c.downcast_ref::<dynetforge::Error>().is_some_and(|e| e.is_numeric()));
            ExitCode::from(if numeric { EXIT_NUMERIC } else { EXIT_USAGE })
        }
    }
}

/// Caps the global worker pool at `DYNETFORGE_THREADS` when it is set.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("DYNETFORGE_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .with_context(|| format!("DYNETFORGE_THREADS must be a positive integer, got `{value}`"))?;
        if threads == 0 {
            bail!("DYNETFORGE_THREADS must be a positive integer, got `{value}`");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> anyhow::Result<ExitCode> {
    if a.out.exists() && !a.force {
        bail!("{} already exists; pass --force to overwrite", a.out.display());
    }
    let mut config = DatasetConfig::new(a.graph, a.dynamics, a.n, a.protocol)
        .with_seed(a.seed)
        .with_train_frac(a.train_frac);
    config.horizon = a.horizon;
    config.snapshots = a.snapshots;
    config.classical_kuramoto = a.classical_kuramoto;
    let dataset = build_dataset(&config).map_err(dynetforge::Error::from)?;
    io::write_dataset(&a.out, &dataset)?;
    println!(
        "wrote {}: {} nodes, {} edges, {} snapshots (train {}, interp_test {}, extrap_test {})",
        a.out.display(),
        dataset.n(),
        dataset.graph.edge_count(),
        dataset.len(),
        dataset.count(SplitLabel::Train),
        dataset.count(SplitLabel::InterpTest),
        dataset.count(SplitLabel::ExtrapTest),
    );
    Ok(ExitCode::SUCCESS)
}

fn read_dataset(path: &Path) -> anyhow::Result<dynetforge::Dataset> {
    io::read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn read_checkpoint(path: &Path) -> anyhow::Result<dynetforge::TrainedModel> {
    io::read_checkpoint(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<ExitCode> {
    let dataset = read_dataset(&a.data)?;
    let mut config = TrainConfig::new(a.model).with_epochs(a.epochs).with_seed(a.seed);
    config.lr = a.lr;
    config.hidden = a.hidden;
    config.augment = a.augment;
    let log_every = a.log_every;
    let model = train_with_progress(&dataset, &config, |epoch, loss| {
        if log_every > 0 && (epoch + 1) % log_every == 0 {
            eprintln!("epoch {:>5}  loss {loss:.6}", epoch + 1);
        }
    })?;
    io::write_checkpoint(&a.out, &model)?;
    match model.loss_trace.last() {
        Some(loss) => println!("wrote {} after {} epochs (final loss {loss:.6})", a.out.display(), a.epochs),
        None => println!("wrote {} (untrained)", a.out.display()),
    }
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(a: EvalArgs) -> anyhow::Result<ExitCode> {
    let model = read_checkpoint(&a.checkpoint)?;
    let dataset = read_dataset(&a.data)?;
    let report = evaluate(&model, &dataset, a.task)?;
    io::append_report(&a.out, &report.rows)?;
    io::append_series(&io::series_path(&a.out), &report.series)?;
    print!("{}", io::render_report(&report.rows));
    Ok(ExitCode::SUCCESS)
}

fn viz_cmd(a: VizArgs) -> anyhow::Result<ExitCode> {
    let model = read_checkpoint(&a.checkpoint)?;
    let dataset = read_dataset(&a.data)?;
    let frames = io::snapshot_frames(&model, &dataset, &a.times)?;
    let layout = io::write_viz(&a.out, &frames)?;
    if layout.strip {
        log::warn!("{} nodes is not a perfect square; writing 1x{} strips", dataset.n(), dataset.n());
        eprintln!("warning: {} nodes is not a perfect square; writing 1x{} strips", dataset.n(), dataset.n());
    }
    for f in &frames {
        println!("t = {}  MAE {}", f.time, f.mae);
    }
    Ok(ExitCode::SUCCESS)
}

fn matrix_cmd(a: MatrixArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec = MatrixSpec::from_toml(&text)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let options = MatrixOptions {
        jobs: a.jobs.max(1),
        dataset_dir: Some(a.out_dir.join("datasets")),
    };
    let outcome = run_experiment_matrix(&spec, &options)?;

    let report = a.out_dir.join("report.csv");
    for path in [report.clone(), io::series_path(&report)] {
        if path.exists() {
            std::fs::remove_file(&path)?;
        }
    }
    io::append_report(&report, &outcome.report.rows)?;
    io::append_series(&io::series_path(&report), &outcome.report.series)?;
    io::write_aggregate(&a.out_dir.join("aggregate.csv"), &outcome.aggregate)?;
    print!("{}", io::render_aggregate(&outcome.aggregate));

    if outcome.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} run(s) failed:", outcome.failures.len());
    for f in &outcome.failures {
        let method = f.method.map_or("dataset".to_string(), |m| m.to_string());
        eprintln!("  {}/{}/{} seed {} [{}]: {}", f.dynamics, f.graph, f.protocol, f.seed, method, f.message);
    }
    Ok(ExitCode::from(EXIT_PARTIAL))
}
