//! The `lattice` command. Output is JSON or CSV unless `--pretty` is given;
//! errors are one JSON line `{"error", "kind"}` on stderr with exit code 1,
//! and usage errors exit with 2.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lattice_core::dataset::{embedded_dataset, parse_csv, Dataset};
use lattice_core::evaluation::{model_leaderboard, Leaderboard, MetricsReport};
use lattice_core::homogenization::{homogenize, HomogenizationReport, Material};
use lattice_core::lattice::{build_unit_cell, TessellationSpec, Topology, DEFAULT_CELL_SIZE};
use lattice_core::model::{train_pipeline, DesignPoint, ModelArtifact, ModelKind, TrainConfig};
use lattice_service::api::{parse_seeds, PredictResponse};
use lattice_service::registry::{model_version, valid_slot_name, Registry, SlotRecord};
use lattice_service::{ServiceConfig, DEFAULT_MODEL_DIR};


#[derive(Debug, Parser)]
#[command(
    name = "lattice",
    version,
    about = "Lattice stiffness homogenization and surrogate models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset utilities
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
    /// Effective stiffness of a tessellated lattice by periodic homogenization
    Homogenize(HomogenizeArgs),
    /// Split, fit and score a model; writes the model and prints test metrics
    Train(TrainArgs),
    /// Re-score a saved model on its test split and print diagnostics
    Eval(EvalArgs),
    /// Predict the effective Young's modulus of one design
    Predict(PredictArgs),
    /// Every model kind over a list of split seeds, as CSV
    Leaderboard(LeaderboardArgs),
    /// Run the HTTP service until interrupted
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetAction {
    /// Write the dataset as CSV
    Export {
        /// Output file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Read this CSV instead of the embedded dataset
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct MaterialArgs {
    /// Parent alloy Young's modulus, GPa
    #[arg(long = "E", allow_negative_numbers = true)]
    pub young_modulus: f64,
    /// Parent alloy Poisson ratio
    #[arg(long, allow_negative_numbers = true)]
    pub nu: f64,
    /// Parent alloy thermal conductivity, W/m·K
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct HomogenizeArgs {
    /// Topology slug or label, e.g. simple_cubic or "Simple Cubic"
    #[arg(long)]
    pub topology: String,
    /// Strut diameter, mm
    #[arg(long, allow_negative_numbers = true)]
    pub thickness: f64,
    /// Cubic cell edge, mm
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE, allow_negative_numbers = true)]
    pub cell_size: f64,
    #[command(flatten)]
    pub material: MaterialArgs,
    /// Cells per axis in the tessellated block
    #[arg(long, default_value_t = 2)]
    pub cells: usize,
    /// Also write the unit-cell graph as JSON to this file
    #[arg(long)]
    pub dump_graph: Option<PathBuf>,
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct ModelSource {
    /// Model file written by `train --out`
    #[arg(long, conflicts_with = "slot")]
    pub model_file: Option<PathBuf>,
    /// Registry slot written by `train --slot` or the service
    #[arg(long)]
    pub slot: Option<String>,
    /// Registry directory
    #[arg(long, default_value = DEFAULT_MODEL_DIR)]
    pub model_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// cart, extra_trees, gbm, regularized or ordered
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hyperparameter overrides as JSON, e.g. '{"n_rounds":50}'
    #[arg(long)]
    pub config: Option<String>,
    /// Training CSV; the embedded dataset when absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Write the model file here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Store the model in this registry slot
    #[arg(long)]
    pub slot: Option<String>,
    #[arg(long, default_value = DEFAULT_MODEL_DIR)]
    pub model_dir: PathBuf,
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: ModelSource,
    /// Lattice label or slug
    #[arg(long)]
    pub topology: String,
    #[arg(long, allow_negative_numbers = true)]
    pub thickness: f64,
    #[command(flatten)]
    pub material: MaterialArgs,
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct LeaderboardArgs {
    /// Comma-separated seeds or ranges, e.g. 0-19 or 1,5,9
    #[arg(long, default_value = "0-19")]
    pub seeds: String,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a median table instead of CSV
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overrides LISTEN_ADDR (default 127.0.0.1:8080)
    #[arg(long)]
    pub listen: Option<String>,
    /// Overrides MODEL_DIR (default ./models)
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Overrides STATIC_DIR
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        CliError::new("invalid_argument", message)
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new("io", format!("{}: {e}", path.display()))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.message, "kind": self.kind }).to_string()
    }
}

impl From<lattice_core::Error> for CliError {
    fn from(e: lattice_core::Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json_line());
            1
        }
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Dataset { action: DatasetAction::Export { out: path, data } } => {
            let csv = load_dataset(data.as_deref())?.to_csv();
            emit(out, path.as_deref(), &csv)
        }
        Command::Homogenize(args) => cmd_homogenize(args, out),
        Command::Train(args) => cmd_train(args, out),
        Command::Eval(args) => cmd_eval(args, out),
        Command::Predict(args) => cmd_predict(args, out),
        Command::Leaderboard(args) => cmd_leaderboard(args, out),
        Command::Serve(args) => cmd_serve(args, out, err),
    }
}

fn load_dataset(path: Option<&Path>) -> CliResult<Dataset> {
    match path {
        None => Ok(embedded_dataset()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok(parse_csv(&text)?)
        }
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::new("io", e.to_string())),
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string(value).map(|s| s + "\n").map_err(|e| CliError::new("json", e.to_string()))
}

fn check_slot(slot: &str) -> CliResult<()> {
    if valid_slot_name(slot) {
        Ok(())
    } else {
        Err(CliError::invalid(format!("slot name '{slot}' must be 1-64 characters of letters, digits, '_' or '-'")))
    }
}

fn material(args: &MaterialArgs) -> CliResult<Material> {
    Ok(Material::new(args.young_modulus, args.nu, args.k)?)
}

fn cmd_homogenize(args: HomogenizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let topology: Topology = args.topology.parse()?;
    let material = material(&args.material)?;
    let tess = TessellationSpec::new(args.cells, args.cells, args.cells)?;
    let report = homogenize(topology, args.thickness, &material, args.cell_size, tess)?;
    if let Some(path) = &args.dump_graph {
        let graph = build_unit_cell(topology, args.cell_size, args.thickness)?.export();
        emit(out, Some(path), &json_line(&graph)?)?;
    }
    let text = if args.pretty { pretty_homogenization(&report) } else { json_line(&report)? };
    emit(out, None, &text)
}

fn pretty_homogenization(r: &HomogenizationReport) -> String {
    let e = &r.engineering;
    let mut s = format!(
        "{} thickness {} mm, cell {} mm, E {} GPa, nu {}\nrelative density {:.6}\n",
        r.topology.label(),
        r.thickness_mm,
        r.cell_size_mm,
        r.material.young_modulus,
        r.material.poisson_ratio,
        r.relative_density
    );
    for (name, v) in [("Ex", e.e_x), ("Ey", e.e_y), ("Ez", e.e_z), ("Gxy", e.g_xy), ("Gxz", e.g_xz), ("Gyz", e.g_yz)] {
        let _ = writeln!(s, "{name:<6}{v:>14.6} GPa");
    }
    for (name, v) in [("nu_xy", e.nu_xy), ("nu_xz", e.nu_xz), ("nu_yz", e.nu_yz)] {
        let _ = writeln!(s, "{name:<6}{v:>14.6}");
    }
    s.push_str("C (GPa)\n");
    for row in &r.c {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.5}")).collect();
        let _ = writeln!(s, "{}", cells.join(""));
    }
    s
}

fn pretty_metrics(m: &MetricsReport) -> String {
    format!("mse {:>12.6}\nmae {:>12.6}\nr2  {:>12.6}\n", m.mse, m.mae, m.r2)
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let kind: ModelKind = args.model.parse()?;
    let config: TrainConfig = match &args.config {
        Some(text) => serde_json::from_str(text).map_err(|e| CliError::invalid(format!("--config: {e}")))?,
        None => TrainConfig::default(),
    };
    if args.out.is_none() && args.slot.is_none() {
        return Err(CliError::invalid("train needs --out, --slot or both"));
    }
    if let Some(slot) = &args.slot {
        check_slot(slot)?;
    }
    let dataset = load_dataset(args.data.as_deref())?;
    let outcome = train_pipeline(&dataset, kind, &config, args.seed)?;
    if let Some(path) = &args.out {
        emit(out, Some(path), &outcome.artifact.to_json()?)?;
    }
    if let Some(slot) = &args.slot {
        let (registry, _) = Registry::open(&args.model_dir).map_err(|e| CliError::io(&args.model_dir, e))?;
        let diagnostics = outcome.artifact.diagnostics(&dataset).map_err(|e| e.to_string());
        registry
            .install(SlotRecord::new(slot, outcome.artifact.clone(), diagnostics))
            .map_err(|e| CliError::io(&args.model_dir, e))?;
    }
    let m = outcome.artifact.metrics;
    let text = if args.pretty { pretty_metrics(&m) } else { json_line(&m)? };
    emit(out, None, &text)
}

/// The artifact plus the name and version reported with predictions.
fn load_model(source: &ModelSource) -> CliResult<(ModelArtifact, String, String)> {
    match (&source.model_file, &source.slot) {
        (Some(path), _) => {
            let artifact = ModelArtifact::load(path)?;
            let version = model_version(&artifact);
            Ok((artifact, path.display().to_string(), version))
        }
        (None, Some(slot)) => {
            check_slot(slot)?;
            let (registry, _) = Registry::open(&source.model_dir).map_err(|e| CliError::io(&source.model_dir, e))?;
            let record = registry.get(slot).ok_or_else(|| {
                CliError::new("unknown_slot", format!("no model in slot '{slot}' under {}", source.model_dir.display()))
            })?;
            Ok((record.artifact.clone(), slot.clone(), record.model_version.clone()))
        }
        (None, None) => Err(CliError::invalid("give --model-file or --slot")),
    }
}

fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let (artifact, _, _) = load_model(&args.source)?;
    let dataset = load_dataset(args.data.as_deref())?;
    let bundle = artifact.diagnostics(&dataset)?;
    if args.pretty {
        let mut s = pretty_metrics(&bundle.metrics);
        s.push_str("importance\n");
        for (name, v) in bundle.feature_names.iter().zip(&bundle.importances) {
            let _ = writeln!(s, "  {name:<22}{v:>8.4}");
        }
        emit(out, None, &s)
    } else {
        emit(out, None, &json_line(&bundle)?)
    }
}

fn cmd_predict(args: PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    let (artifact, model, model_version) = load_model(&args.source)?;
    // slugs map to dataset labels; anything else is passed through and
    // checked against the model's known labels
    let lattice_type = match args.topology.parse::<Topology>() {
        Ok(t) => t.label().to_string(),
        Err(_) => args.topology.clone(),
    };
    let point = DesignPoint {
        lattice_type,
        thickness: args.thickness,
        young_modulus: args.material.young_modulus,
        poisson_ratio: args.material.nu,
        conductivity: args.material.k,
    };
    let value = artifact.predict(&point)?;
    let response = PredictResponse { predicted_young_modulus: value, model, model_version };
    let text = if args.pretty {
        format!("{value:.6} GPa ({} {})\n", response.model, response.model_version)
    } else {
        json_line(&response)?
    };
    emit(out, None, &text)
}

fn pretty_leaderboard(board: &Leaderboard) -> String {
    let mut s = format!("{:<12}{:>12}{:>12}{:>10}{:>10}\n", "model", "mse", "mae", "r2", "failed");
    for e in &board.entries {
        match e.median {
            Some(m) => {
                let _ = writeln!(s, "{:<12}{:>12.4}{:>12.4}{:>10.4}{:>10}", e.model.as_str(), m.mse, m.mae, m.r2, e.failures);
            }
            None => {
                let _ = writeln!(s, "{:<12}{:>12}{:>12}{:>10}{:>10}", e.model.as_str(), "-", "-", "-", e.failures);
            }
        }
    }
    let _ = writeln!(s, "medians over {} seeds", board.seeds.len());
    s
}

fn cmd_leaderboard(args: LeaderboardArgs, out: &mut dyn Write) -> CliResult<()> {
    let seeds = parse_seeds(&args.seeds).map_err(|e| CliError::invalid(format!("--seeds: {e}")))?;
    let dataset = load_dataset(args.data.as_deref())?;
    let board = model_leaderboard(&dataset, &seeds, &Default::default())?;
    let text = if args.pretty { pretty_leaderboard(&board) } else { board.to_csv() };
    emit(out, args.out.as_deref(), &text)
}

pub fn serve_config(args: &ServeArgs) -> CliResult<ServiceConfig> {
    let mut config = ServiceConfig::from_env().map_err(CliError::invalid)?;
    if let Some(addr) = &args.listen {
        config.listen_addr = addr.parse().map_err(|e| CliError::invalid(format!("--listen '{addr}': {e}")))?;
    }
    if let Some(dir) = &args.model_dir {
        config.model_dir = dir.clone();
    }
    if let Some(dir) = &args.static_dir {
        config.static_dir = Some(dir.clone());
    }
    Ok(config)
}

/// Prints `{"listening": addr}` once bound, then one JSON warning line per
/// unreadable slot file on stderr.
fn announce(out: &mut dyn Write, err: &mut dyn Write, addr: std::net::SocketAddr, warnings: &[String]) {
    let _ = writeln!(out, "{}", serde_json::json!({ "listening": addr.to_string() }));
    let _ = out.flush();
    for w in warnings {
        let _ = writeln!(err, "{}", serde_json::json!({ "warning": w }));
    }
}

fn cmd_serve(args: ServeArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let config = serve_config(&args)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    runtime
        .block_on(lattice_service::serve(config, |addr, warnings| announce(out, err, addr, warnings)))
        .map_err(|e| CliError::new("io", e.to_string()))
}
