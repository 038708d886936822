//! `podfnn` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use podfnn::datagen::{read_csv, write_hyper_csv};
use podfnn::fem::SolveReport;
use podfnn::fnn::TrainReport;
use podfnn::pipeline::{
    compare_pod, dataset_csv, eval_1d, generate, hyper_dataset, run_fem, train_hyper, train_podfnn, DataConfig, Eval1dConfig, FemConfig,
    HyperConfig, LawConfig, MaterialConfig, Models, NetworkConfig, PipelineError,
};
use podfnn::fnn::TrainOptions;
use podfnn::lm::StopReason;
use podfnn::surrogate::SurrogateFile;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "podfnn", version, about = "Data-driven plasticity surrogates: data generation, training and FEM checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the network seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Single-threaded, bit-reproducible execution.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive the reference model along loading paths and write the dataset.
    GenData(Common),
    /// Fit a POD surrogate to a dataset, or the hyperelastic network.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV from gen-data (POD mode only).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train a multi-output net and per-mode POD nets with equal budgets.
    ComparePod {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV from gen-data.
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Solve a finite element problem with the reference law, a surrogate or both.
    Fem {
        #[command(flatten)]
        common: Common,
        /// Trained surrogate JSON; required unless only the reference model runs.
        #[arg(long)]
        surrogate: Option<PathBuf>,
    },
    /// Train and test the uniaxial surrogate end to end.
    #[command(name = "eval-1d")]
    Eval1d(Common),
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Pipeline(e) if e.is_validation() => 2,
            CliError::Pipeline(PipelineError::Datagen(podfnn::datagen::DatagenError::Csv(_))) => 4,
            CliError::Pipeline(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Parses JSON, reporting the path of the offending field.
fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Validation(format!("{what}: at `{}`: {}", e.path(), e.inner())))
}

fn load_config<T: DeserializeOwned>(common: &Common, default: impl FnOnce() -> T) -> Result<T, CliError> {
    match &common.config {
        Some(path) => parse_json(&read_text(path)?, &path.display().to_string()),
        None => Ok(default()),
    }
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_bytes(dir, name, text.as_bytes())
}

fn write_rows(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(header).map_err(csv_err(&path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

fn prepare_out(common: &Common) -> Result<(), CliError> {
    fs::create_dir_all(&common.out).map_err(io_err(&common.out))
}

fn history_rows(reports: &[TrainReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .enumerate()
        .flat_map(|(net, r)| r.history.iter().map(move |h| vec![net.to_string(), h.epoch.to_string(), f(h.mse), f(h.grad_norm), f(h.mu)]))
        .collect()
}

fn check_stalls(reports: &[TrainReport]) -> Result<(), CliError> {
    match reports.iter().position(|r| r.stop == StopReason::Stall) {
        Some(i) => Err(CliError::Numerical(format!("net {i} stalled: damping exceeded its limit (partial results written)"))),
        None => Ok(()),
    }
}

fn gen_data(common: &Common) -> Result<(), CliError> {
    let cfg: DataConfig = load_config(common, || DataConfig::circles_2d(11))?;
    prepare_out(common)?;
    write_json(&common.out, "config.resolved.json", &cfg)?;
    let ds = generate(&cfg, common.serial)?;
    write_bytes(&common.out, "dataset.csv", &dataset_csv(&ds.set)?)?;
    write_json(&common.out, "metadata.json", &ds.meta)?;
    println!("{} paths, {} samples, sha256 {}", ds.meta.n_paths, ds.meta.n_samples, ds.meta.sha256);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
enum TrainConfig {
    Podfnn { network: NetworkConfig },
    HyperFnn(HyperConfig),
}

fn default_train() -> TrainConfig {
    let mut train = TrainOptions::default();
    train.lm.max_epochs = 1000;
    TrainConfig::Podfnn { network: NetworkConfig::new(&[20, 20], train) }
}

fn train_cmd(common: &Common, dataset: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = load_config(common, default_train)?;
    if let Some(seed) = common.seed {
        match &mut cfg {
            TrainConfig::Podfnn { network } => network.train.seed = seed,
            TrainConfig::HyperFnn(h) => h.network.train.seed = seed,
        }
    }
    prepare_out(common)?;
    write_json(&common.out, "config.resolved.json", &cfg)?;
    let header = ["net", "epoch", "mse", "grad_norm", "mu"];
    match &cfg {
        TrainConfig::Podfnn { network } => {
            let path = dataset.ok_or_else(|| CliError::Validation("podfnn training needs --dataset".into()))?;
            let bytes = fs::read(path).map_err(io_err(path))?;
            let set = read_csv(bytes.as_slice()).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            let hash = podfnn::datagen::sha256_hex(&bytes);
            let fit = train_podfnn(&set, Some(hash), network, common.serial)?;
            write_json(&common.out, "surrogate.json", &SurrogateFile::Podfnn(fit.surrogate.clone()))?;
            write_rows(&common.out, "history.csv", &header, history_rows(&fit.reports))?;
            write_json(&common.out, "train_report.json", &fit.reports)?;
            for (i, r) in fit.reports.iter().enumerate() {
                println!("net {i}: {} epochs, mse {:e}, grad {:e}, stop {:?}", r.history.len(), r.final_mse, r.grad_norm, r.stop);
            }
            check_stalls(&fit.reports)
        }
        TrainConfig::HyperFnn(h) => {
            let data = hyper_dataset(h)?;
            let mut buf = Vec::new();
            write_hyper_csv(&data, &mut buf).map_err(PipelineError::from)?;
            write_bytes(&common.out, "hyper_dataset.csv", &buf)?;
            let (mut model, report) = train_hyper(&data, &h.network)?;
            model.provenance.dataset_hash = Some(podfnn::datagen::sha256_hex(&buf));
            write_json(&common.out, "surrogate.json", &SurrogateFile::HyperFnn(model))?;
            write_rows(&common.out, "history.csv", &header, history_rows(std::slice::from_ref(&report)))?;
            write_json(&common.out, "train_report.json", &report)?;
            println!("hyper net: {} epochs, mse {:e}, stop {:?}", report.history.len(), report.final_mse, report.stop);
            check_stalls(std::slice::from_ref(&report))
        }
    }
}

fn compare_cmd(common: &Common, dataset: &Path) -> Result<(), CliError> {
    let mut net: NetworkConfig = load_config(common, || {
        let mut train = TrainOptions::default();
        train.lm.max_epochs = 200;
        train.lm.grad_tol = 0.0;
        NetworkConfig::new(&[16, 16], train)
    })?;
    if let Some(seed) = common.seed {
        net.train.seed = seed;
    }
    net.allow_stall = true;
    prepare_out(common)?;
    write_json(&common.out, "config.resolved.json", &net)?;
    let bytes = fs::read(dataset).map_err(io_err(dataset))?;
    let set = read_csv(bytes.as_slice()).map_err(|e| CliError::Validation(format!("{}: {e}", dataset.display())))?;
    let report = compare_pod(&set, &net, common.serial)?;
    let arch = |a: &[usize]| a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-");
    let mut header = vec!["epoch".to_string(), format!("monolithic_{}", arch(&report.monolithic_arch))];
    header.extend((0..report.pod.len()).map(|i| format!("pod{i}_{}", arch(&report.pod_arch))));
    let longest = std::iter::once(&report.monolithic).chain(&report.pod).map(|r| r.history.len()).max().unwrap_or(0);
    let cell = |r: &TrainReport, e: usize| match e {
        0 => f(r.initial_mse),
        _ => r.history.get(e - 1).map_or(String::new(), |h| f(h.mse)),
    };
    let rows = (0..=longest).map(|e| {
        let mut row = vec![e.to_string(), cell(&report.monolithic, e)];
        row.extend(report.pod.iter().map(|r| cell(r, e)));
        row
    });
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_rows(&common.out, "compare.csv", &header_refs, rows)?;
    write_json(&common.out, "compare_report.json", &report)?;
    println!(
        "monolithic {}: mse {:e} in {:.1}s; pod {} x{}: mse {:?} in {:.1}s",
        arch(&report.monolithic_arch),
        report.monolithic.final_mse,
        report.monolithic_seconds,
        arch(&report.pod_arch),
        report.pod.len(),
        report.pod.iter().map(|r| r.final_mse).collect::<Vec<_>>(),
        report.pod_seconds
    );
    Ok(())
}

fn curve_rows(r: &SolveReport) -> Vec<Vec<String>> {
    r.curve.iter().map(|p| vec![p.step.to_string(), f(p.factor), f(p.load), f(p.displacement)]).collect()
}

fn field_rows(r: &SolveReport, dim: usize) -> Vec<Vec<String>> {
    r.final_displacement()
        .map(|u| (0..u.len() / dim).map(|n| std::iter::once(n.to_string()).chain(u[n * dim..(n + 1) * dim].iter().map(|v| f(*v))).collect()).collect())
        .unwrap_or_default()
}

fn fem_cmd(common: &Common, surrogate: Option<&Path>) -> Result<(), CliError> {
    let cfg: FemConfig =
        load_config(common, || FemConfig::builtin("cook2d", LawConfig::Plasticity { material: MaterialConfig::exponential() }, Models::Reference))?;
    let model: Option<SurrogateFile> = match surrogate {
        Some(p) => Some(parse_json(&read_text(p)?, &p.display().to_string())?),
        None => None,
    };
    prepare_out(common)?;
    write_json(&common.out, "config.resolved.json", &cfg)?;
    let dim = cfg.build_problem()?.mesh.dim;
    let outcome = run_fem(&cfg, model.as_ref())?;
    let curve_header = ["step", "factor", "load", "displacement"];
    let field_header: Vec<&str> = ["node", "ux", "uy", "uz"][..=dim].to_vec();
    for (name, rep) in [("reference", &outcome.reference), ("surrogate", &outcome.surrogate)] {
        if let Some(r) = rep {
            write_rows(&common.out, &format!("{name}_curve.csv"), &curve_header, curve_rows(r))?;
            write_rows(&common.out, &format!("{name}_displacements.csv"), &field_header, field_rows(r, dim))?;
        }
    }
    if let Some(c) = &outcome.comparison {
        let rows = c.rows.iter().map(|r| vec![r.step.to_string(), f(r.factor), f(r.reference), f(r.surrogate), f(r.rel_diff)]);
        write_rows(&common.out, "comparison.csv", &["step", "factor", "reference", "surrogate", "rel_diff"], rows)?;
        println!(
            "{}: peak {} relative difference {:.4}, unloading max {:?}",
            outcome.problem,
            c.quantity,
            c.peak_rel_diff,
            c.unload_max_rel_diff
        );
    }
    write_json(&common.out, "solve_report.json", &outcome)?;
    if !outcome.failures.is_empty() {
        return Err(CliError::Numerical(outcome.failures.join("; ")));
    }
    Ok(())
}

fn eval_1d_cmd(common: &Common) -> Result<(), CliError> {
    let mut cfg: Eval1dConfig = load_config(common, Eval1dConfig::default)?;
    if let Some(seed) = common.seed {
        cfg.network.train.seed = seed;
    }
    prepare_out(common)?;
    write_json(&common.out, "config.resolved.json", &cfg)?;
    let report = eval_1d(&cfg, common.serial)?;
    let rows = report.test_curve.iter().map(|p| vec![p.step.to_string(), f(p.strain), f(p.eps_acc), f(p.reference), f(p.predicted)]);
    write_rows(&common.out, "eval_1d.csv", &["step", "strain", "eps_acc", "reference", "predicted"], rows)?;
    write_rows(&common.out, "history.csv", &["net", "epoch", "mse", "grad_norm", "mu"], history_rows(std::slice::from_ref(&report.train)))?;
    write_json(&common.out, "surrogate.json", &SurrogateFile::Podfnn(report.surrogate.clone()))?;
    println!(
        "training mse {:e} after {} epochs ({:?}); held-out normalized RMSE {:.4}",
        report.train.final_mse,
        report.train.history.len(),
        report.train.stop,
        report.nrmse
    );
    check_stalls(std::slice::from_ref(&report.train))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenData(c) => gen_data(c),
        Command::Train { common, dataset } => train_cmd(common, dataset.as_deref()),
        Command::ComparePod { common, dataset } => compare_cmd(common, dataset),
        Command::Fem { common, surrogate } => fem_cmd(common, surrogate.as_deref()),
        Command::Eval1d(c) => eval_1d_cmd(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
