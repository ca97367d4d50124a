//! `cgcl`: command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O, 4 malformed input, 5 invalid
//! argument, 6 empty input or degenerate fold, 7 training divergence.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use cohesion_gcl::augment::{
    dataset_preservation, ppr_diffusion, refined_drop_plan, reweight_edges, sample_edge_drop,
    sample_node_drop, vertex_importance_det, vertex_importance_prob, DrawKey, DropPlan, FKind,
};
use cohesion_gcl::cohesion::{core_numbers, truss_numbers};
use cohesion_gcl::encoder::{io::save_state, train, EncoderConfig, TrainOptions};
use cohesion_gcl::eval::{embedding_matrix, evaluate, EvalConfig};
use cohesion_gcl::graph::{featurize, parse_native, to_native, FeatureMode, GraphDataset};
use cohesion_gcl::pipeline::{generate_synthetic, run_pipeline, PipelineConfig, SyntheticKind};
use cohesion_gcl::substructure::{
    default_cache_dir, features_to_csv, ogsn_features, Normalization, SubstructureSpec,
};
use cohesion_gcl::tu::load_tu_dataset;
use cohesion_gcl::{Error, Property, Result};

#[derive(Parser)]
#[command(
    name = "cgcl",
    version,
    about = "Cohesion-aware graph contrastive learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Core numbers per node or truss numbers per edge, as CSV.
    Decompose(DecomposeArgs),
    /// Per-node clique counts computed on the original graphs, as CSV.
    Features(FeaturesArgs),
    /// Sample augmented views in the native graph format.
    Augment(AugmentArgs),
    /// Dense personalized-PageRank diffusion of one graph, as CSV.
    Diffuse(DiffuseArgs),
    /// Train one encoder per cohesion property.
    Train(TrainArgs),
    /// k-fold linear probe on stored embeddings.
    Evaluate(EvaluateArgs),
    /// Dataset statistics.
    Stats {
        #[command(subcommand)]
        which: StatsCommand,
    },
    /// Full pipeline from a config file.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Fraction of main cohesive subgraph nodes kept by uniform and refined
    /// node dropping.
    Preservation(PreservationArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Directory containing `<name>/<name>_A.txt` and friends.
    #[arg(long, requires = "name")]
    dataset: Option<PathBuf>,
    /// Dataset name inside `--dataset`.
    #[arg(long)]
    name: Option<String>,
    /// Graphs in the native text format.
    #[arg(long, conflicts_with_all = ["dataset", "synthetic"])]
    graph: Option<PathBuf>,
    /// Generate a synthetic dataset instead of loading one.
    #[arg(long, value_enum, conflicts_with = "dataset")]
    synthetic: Option<SyntheticArg>,
    /// Graph count for `--synthetic`.
    #[arg(long, default_value_t = 100)]
    graphs: usize,
    /// Seed for `--synthetic`.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Degree one-hot input features (capped at this degree) instead of a constant.
    #[arg(long)]
    degree_features: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy)]
enum SyntheticArg {
    PlantedClique,
    TwoDensity,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum PropertyArg {
    Core,
    Truss,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Self {
        match p {
            PropertyArg::Core => Property::Core,
            PropertyArg::Truss => Property::Truss,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum FArg {
    Linear,
    Sqrt,
    Square,
}

impl From<FArg> for FKind {
    fn from(f: FArg) -> Self {
        match f {
            FArg::Linear => FKind::Linear,
            FArg::Sqrt => FKind::Sqrt,
            FArg::Square => FKind::Square,
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Clone, Copy)]
enum DropMode {
    Node,
    Edge,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "core")]
    property: PropertyArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    clique_sizes: Vec<usize>,
    #[arg(long, default_value = "log1p")]
    normalization: Normalization,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_enum, default_value = "core")]
    property: PropertyArg,
    #[arg(long, default_value_t = 0.2)]
    p_dr: f64,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long = "f", value_enum, default_value = "square")]
    f_kind: FArg,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, value_enum, default_value = "node")]
    mode: DropMode,
    /// Views per graph.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiffuseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Graph index within the dataset.
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, default_value_t = 0.15)]
    alpha: f64,
    /// Reweight edges by cohesion importance first, with this mixing factor.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, default_value = "core")]
    property: PropertyArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "core,truss")]
    property: Vec<PropertyArg>,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long = "f", value_enum, default_value = "square")]
    f_kind: FArg,
    #[arg(long, default_value_t = 0.2)]
    p_dr: f64,
    #[arg(long, value_enum, default_value = "on")]
    ogsn: Switch,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// State file; with several properties the property name is inserted
    /// before the extension (`state.bin` -> `state.core.bin`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV `graph,d0,d1,...`.
    #[arg(long)]
    embeddings: PathBuf,
    /// CSV `graph,label`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreservationArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `jobs` from the config.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(data: &DataArgs) -> Result<GraphDataset> {
    let mut ds = if let Some(path) = &data.graph {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let graphs = parse_native(&text)?;
        let labels = vec![0; graphs.len()];
        GraphDataset::from_raw_labels(path.display().to_string(), graphs, &labels)?
    } else if let Some(kind) = data.synthetic {
        let kind = match kind {
            SyntheticArg::PlantedClique => SyntheticKind::PlantedClique,
            SyntheticArg::TwoDensity => SyntheticKind::TwoDensity,
        };
        generate_synthetic(kind, data.graphs, data.data_seed)?
    } else if let (Some(dir), Some(name)) = (&data.dataset, &data.name) {
        load_tu_dataset(dir, name)?
    } else {
        return Err(Error::Argument(
            "give --dataset/--name, --graph or --synthetic".into(),
        ));
    };
    let mode = match data.degree_features {
        Some(max_degree) => FeatureMode::DegreeOneHot { max_degree },
        None => FeatureMode::Constant,
    };
    featurize(&mut ds, mode);
    Ok(ds)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}

fn plan_for(g: &cohesion_gcl::Graph, plan: &PlanArgs) -> Result<DropPlan> {
    if plan.eps == 0.0 {
        DropPlan::uniform(g, plan.p_dr)
    } else {
        let w = vertex_importance_prob(g, plan.property.into());
        refined_drop_plan(g, &w, plan.p_dr, plan.eps, plan.f_kind.into())
    }
}

fn decompose(a: &DecomposeArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let mut out = String::new();
    match Property::from(a.property) {
        Property::Core => {
            out.push_str("graph,node,core_number\n");
            for (i, g) in ds.graphs.iter().enumerate() {
                for (v, c) in core_numbers(g).core_number.iter().enumerate() {
                    let _ = writeln!(out, "{i},{v},{c}");
                }
            }
        }
        Property::Truss => {
            out.push_str("graph,u,v,truss_number\n");
            for (i, g) in ds.graphs.iter().enumerate() {
                if g.edges.is_empty() {
                    continue;
                }
                let t = truss_numbers(g)?;
                for (&(u, v), k) in g.edges.iter().zip(&t.truss_number) {
                    let _ = writeln!(out, "{i},{u},{v},{k}");
                }
            }
        }
    }
    emit(a.out.as_deref(), &out)
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let spec = SubstructureSpec::new(a.clique_sizes.clone(), a.normalization)?;
    let feats = ogsn_features(&ds, &spec, default_cache_dir().as_deref())?;
    emit(a.out.as_deref(), &features_to_csv(&spec, &feats))
}

fn augment(a: &AugmentArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let mut out = String::new();
    for (i, g) in ds.graphs.iter().enumerate() {
        let plan = plan_for(g, &a.plan)?;
        for s in 0..a.samples {
            let key = DrawKey::new(a.seed, i as u64, s as u64);
            let view = match a.mode {
                DropMode::Node => sample_node_drop(g, &plan, key).graph,
                DropMode::Edge => sample_edge_drop(g, &plan, key),
            };
            let _ = writeln!(out, "# graph {i} sample {s}");
            out.push_str(&to_native(&view));
        }
    }
    emit(a.out.as_deref(), &out)
}

fn diffuse(a: &DiffuseArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let g = ds.graphs.get(a.index).ok_or_else(|| {
        Error::Argument(format!("graph index {} outside 0..{}", a.index, ds.len()))
    })?;
    let g = match a.eta {
        Some(eta) => reweight_edges(g, &vertex_importance_det(g, a.property.into()), eta)?,
        None => g.clone(),
    };
    emit(a.out.as_deref(), &ppr_diffusion(&g, a.alpha)?.to_csv())
}

fn state_path(out: &Path, property: Property, several: bool) -> PathBuf {
    if !several {
        return out.to_path_buf();
    }
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{property}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{property}"),
    };
    out.with_file_name(name)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let cfg = EncoderConfig {
        use_ogsn: matches!(a.ogsn, Switch::On),
        epochs: a.epochs,
        seed: a.seed,
        ..EncoderConfig::default()
    };
    let spec = SubstructureSpec::default();
    let sub = if cfg.use_ogsn {
        Some(ogsn_features(&ds, &spec, default_cache_dir().as_deref())?)
    } else {
        None
    };
    let mut properties: Vec<Property> = a.property.iter().map(|&p| p.into()).collect();
    properties.dedup();
    let opts = TrainOptions {
        properties,
        p_dr: a.p_dr,
        eps: a.eps,
        f_kind: a.f_kind.into(),
        jobs: a.jobs,
    };
    let report = train(&ds, sub.as_deref(), &cfg, &opts)?;
    let several = report.runs.len() > 1;
    let mut log = String::from("property,epoch,loss\n");
    for run in &report.runs {
        save_state(&run.state, &state_path(&a.out, run.property, several))?;
        for (e, l) in run.epoch_losses.iter().enumerate() {
            let _ = writeln!(log, "{},{e},{l}", run.property);
        }
    }
    emit(None, &log)
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect())
}

fn parse_cell<T: std::str::FromStr>(path: &Path, line: usize, cell: &str) -> Result<T> {
    cell.parse().map_err(|_| Error::Parse {
        location: format!("{}:{}", path.display(), line + 2),
        message: format!("bad value `{cell}`"),
    })
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let mut emb = Vec::new();
    for (i, row) in read_csv_rows(&a.embeddings)?.iter().enumerate() {
        let values = row[1..]
            .iter()
            .map(|c| parse_cell::<f64>(&a.embeddings, i, c))
            .collect::<Result<Vec<_>>>()?;
        emb.push(DVector::from_vec(values));
    }
    let mut raw = Vec::new();
    for (i, row) in read_csv_rows(&a.labels)?.iter().enumerate() {
        let cell = row.get(1).ok_or_else(|| {
            Error::Format(format!("{}: missing label column", a.labels.display()))
        })?;
        raw.push(parse_cell::<i64>(&a.labels, i, cell)?);
    }
    if raw.len() != emb.len() {
        return Err(Error::Format(format!(
            "{} embeddings but {} labels",
            emb.len(),
            raw.len()
        )));
    }
    let mut classes = raw.clone();
    classes.sort_unstable();
    classes.dedup();
    let labels: Vec<usize> = raw
        .iter()
        .map(|l| classes.binary_search(l).expect("present"))
        .collect();
    let cfg = EvalConfig {
        folds: a.folds,
        repeats: a.repeats,
        seed: a.seed,
        l2: a.l2,
        ..EvalConfig::default()
    };
    let summary = evaluate(&embedding_matrix(&emb)?, &labels, classes.len(), &cfg)?;
    emit(a.out.as_deref(), &summary.to_csv())?;
    eprintln!("{}", summary.summary_line());
    Ok(())
}

fn preservation(a: &PreservationArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let property: Property = a.plan.property.into();
    let uniform = ds
        .graphs
        .iter()
        .map(|g| DropPlan::uniform(g, a.plan.p_dr))
        .collect::<Result<Vec<_>>>()?;
    let refined = ds
        .graphs
        .iter()
        .map(|g| plan_for(g, &a.plan))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from("dataset,property,p_dr,eps,plan,preservation\n");
    for (label, plans) in [("uniform", &uniform), ("refined", &refined)] {
        let r = dataset_preservation(&ds.graphs, plans, property, a.samples, a.seed)?;
        let _ = writeln!(
            out,
            "{},{property},{},{},{label},{r:.6}",
            ds.name, a.plan.p_dr, a.plan.eps
        );
    }
    emit(a.out.as_deref(), &out)
}

fn run(a: &RunArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(out) = &a.out {
        cfg.out = out.clone();
    }
    if let Some(jobs) = a.jobs {
        cfg.jobs = jobs;
    }
    let report = run_pipeline(&cfg)?;
    for (p, losses) in &report.losses {
        if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
            println!(
                "{p}: loss {first:.4} -> {last:.4} over {} epochs",
                losses.len()
            );
        }
    }
    println!("{}", report.summary.summary_line());
    if !report.summary.sanity_ok {
        eprintln!("warning: some probe fell below the constant predictor on its training split");
    }
    println!("outputs in {}", report.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Features(a) => features(a),
        Command::Augment(a) => augment(a),
        Command::Diffuse(a) => diffuse(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Stats {
            which: StatsCommand::Preservation(a),
        } => preservation(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
