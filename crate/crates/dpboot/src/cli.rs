//! `dpboot` subcommands: `sample`, `sweep`, `calibrate`, `predict`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::Serialize;

use dpboot_core::calibration::{ppi_variance_mean_with, CalibrationMethod, CalibrationResult};
use dpboot_core::rng::{stream, DOMAIN_USER};
use dpboot_core::{
    calibrate_alpha_coverage, calibrate_alpha_ppi, credible_interval, posterior_predictive_probs,
    run_posterior_bootstrap, AtomicBase, BaseMeasure, CoverageOptions, LabeledDataset, LossModel, PpiConvention,
    PpiVariance, PredictiveBase, RunConfig,
};

use crate::error::{CliError, Result};
use crate::io::{self, format_f64, ImputedSchema};
use crate::parallel::RayonRunner;
use crate::report::{ManifestBuilder, Summary};

#[derive(Debug, Parser)]
#[command(
    name = "dpboot",
    version,
    about = "Posterior bootstrap with AI-informed Dirichlet-process priors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw from the posterior and summarize.
    Sample(SampleArgs),
    /// Credible-interval endpoints over a grid of alphas and sample sizes.
    Sweep(SweepArgs),
    /// Choose alpha by coverage or by matching the PPI variance.
    Calibrate(CalibrateArgs),
    /// Majority-vote class predictions from saved draws.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Mean,
    Quantile,
    Ols,
    Logistic,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Atomic,
    Predictive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Coverage,
    PpiMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionKind {
    Standard,
    Swapped,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Labeled data, header `y,x1,…,xd`.
    #[arg(long)]
    pub labeled: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossKind,
    /// Quantile level for `--loss quantile`.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    /// Class count for `--loss softmax`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Imputed rows defining the base measure.
    #[arg(long)]
    pub imputed: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub base: Option<BaseKind>,
    /// Imputed-file schema; inferred from the header when omitted.
    #[arg(long, value_enum)]
    #[serde(skip)]
    pub schema: Option<ImputedSchema>,
    /// Truncation size: imaginary rows per draw for a predictive base.
    #[arg(long = "m", default_value_t = 100_000)]
    pub m: usize,
    /// Posterior draws.
    #[arg(long = "B", default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Fraction of non-converged draws tolerated.
    #[arg(long, default_value_t = 0.0)]
    pub max_nonconverged: f64,
    /// Worker threads (default: `DPBOOT_THREADS`, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    /// Labeled sample sizes (subsamples without replacement); default all rows.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// 1-based parameter coordinate.
    #[arg(long, default_value_t = 1)]
    pub coordinate: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub method: MethodKind,
    /// Ascending alpha grid (coverage).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub n_boot: usize,
    /// Coverage shortfall tolerated below the level.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
    /// 1-based parameter coordinate (coverage).
    #[arg(long, default_value_t = 1)]
    pub coordinate: usize,
    /// Root bracket `lo,hi` (ppi-match).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1e6])]
    pub bracket: Vec<f64>,
    /// One column of model predictions on the labeled rows (ppi-match).
    #[arg(long)]
    pub predictions_on_labeled: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ConventionKind::Standard)]
    pub ppi_convention: ConventionKind,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    /// `theta_1,…,theta_p[,converged]` as written by `sample`.
    #[arg(long)]
    pub draws: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossKind,
    #[arg(long)]
    pub k: Option<usize>,
    /// Covariate rows to classify; every column is a covariate.
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command, and maps
/// the outcome to an exit status.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // keep the diagnostic to its first line; the usage block follows it
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or_default());
            return ExitCode::from(e.exit_code() as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample(a) => sample(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Predict(a) => predict(&a),
    }
}

fn build_loss(kind: LossKind, tau: f64, k: Option<usize>, dim: usize) -> Result<LossModel> {
    let need_covariates = |name: &str| {
        if dim == 0 {
            Err(CliError::Usage(format!("--loss {name} needs covariate columns")))
        } else {
            Ok(())
        }
    };
    Ok(match kind {
        LossKind::Mean => LossModel::Mean,
        LossKind::Quantile => LossModel::quantile(tau)?,
        LossKind::Ols => {
            need_covariates("ols")?;
            LossModel::Ols { dim }
        }
        LossKind::Logistic => {
            need_covariates("logistic")?;
            LossModel::Logistic { dim }
        }
        LossKind::Softmax => {
            need_covariates("softmax")?;
            let k = k.ok_or_else(|| CliError::Usage("--loss softmax needs --k".into()))?;
            LossModel::softmax(dim, k)?
        }
    })
}

/// Labeled data and loss, with classification labels checked at load time.
fn load_model(args: &ModelArgs) -> Result<(LabeledDataset, LossModel)> {
    let classes = match args.loss {
        LossKind::Logistic => Some(2),
        LossKind::Softmax => Some(
            args.k
                .ok_or_else(|| CliError::Usage("--loss softmax needs --k".into()))?,
        ),
        _ => None,
    };
    let data = io::load_labeled(&args.labeled, classes)?;
    let loss = build_loss(args.loss, args.tau, args.k, data.dim())?;
    Ok((data, loss))
}

fn load_base(args: &ModelArgs, required: bool) -> Result<Option<BaseMeasure>> {
    let (path, kind) = match (&args.imputed, args.base) {
        (Some(p), Some(k)) => (p, k),
        (None, None) if !required => return Ok(None),
        (None, _) if required => return Err(CliError::Usage("alpha > 0 needs --imputed and --base".into())),
        (Some(_), None) => return Err(CliError::Usage("--imputed needs --base atomic|predictive".into())),
        _ => return Err(CliError::Usage("--base needs --imputed".into())),
    };
    let base = match kind {
        BaseKind::Atomic => {
            let rows = io::load_imputed(path, Some(args.schema.unwrap_or(ImputedSchema::Labels)))?;
            BaseMeasure::from(AtomicBase::new(rows).map_err(|e| CliError::in_file(path, e))?)
        }
        BaseKind::Predictive => {
            let rows = io::load_imputed(path, args.schema)?;
            BaseMeasure::from(PredictiveBase::new(rows).map_err(|e| CliError::in_file(path, e))?)
        }
    };
    Ok(Some(base))
}

fn run_config(args: &ModelArgs, alpha: f64) -> RunConfig {
    RunConfig {
        alpha,
        truncation: args.m,
        draws: args.draws,
        level: args.level,
        seed: args.seed,
        max_iter: args.max_iter,
        tol: args.tol,
        max_nonconverged_fraction: args.max_nonconverged,
    }
}

fn manifest_for(command: &str, args: &ModelArgs, runner: &RayonRunner) -> Result<ManifestBuilder> {
    let mut manifest = ManifestBuilder::new(command, args.seed, runner.threads());
    manifest.input("labeled", &args.labeled)?;
    if let Some(p) = &args.imputed {
        manifest.input("imputed", p)?;
    }
    Ok(manifest)
}

fn coordinate_index(coordinate: usize, dim: usize) -> Result<usize> {
    if coordinate == 0 || coordinate > dim {
        return Err(CliError::Usage(format!("--coordinate {coordinate} not in 1..={dim}")));
    }
    Ok(coordinate - 1)
}

fn sample(args: &SampleArgs) -> Result<()> {
    let m = &args.model;
    let (data, loss) = load_model(m)?;
    let base = load_base(m, args.alpha > 0.0)?;
    let config = run_config(m, args.alpha);
    config.validate()?;
    let runner = RayonRunner::new(m.threads)?;
    let mut manifest = manifest_for("sample", m, &runner)?;
    manifest.config(args);
    let draws = run_posterior_bootstrap(&data, base.as_ref(), &loss, &config, &runner)?;

    let out = io::ensure_dir(&m.out)?;
    io::write_draws(&out.join("draws.csv"), &draws)?;
    manifest.output("draws.csv");
    let summary = Summary::new(&draws, loss.name(), args.alpha, m.level)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    manifest.output("summary.json");
    manifest.finish(&out)?;
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let m = &args.model;
    let (data, loss) = load_model(m)?;
    let needs_base = args.alphas.iter().any(|&a| a > 0.0);
    let base = load_base(m, needs_base)?;
    let coordinate = coordinate_index(args.coordinate, loss.dim())?;
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let ns = if args.ns.is_empty() {
        vec![data.len()]
    } else {
        args.ns.clone()
    };
    if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > data.len()) {
        return Err(CliError::Usage(format!("--ns entry {n} not in 1..={}", data.len())));
    }
    for &alpha in &args.alphas {
        run_config(m, alpha).validate()?;
    }
    let runner = RayonRunner::new(m.threads)?;
    let mut manifest = manifest_for("sweep", m, &runner)?;
    manifest.config(args);

    let mut rows = Vec::new();
    for rep in 0..args.reps {
        // one permutation and one bootstrap seed per replication, shared by
        // every n and alpha so that curves differ only through n and alpha
        let mut rng = stream(m.seed, DOMAIN_USER, rep as u64);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let seed = rng.next_u64();
        for &n in &ns {
            let subset = data.select(&order[..n]);
            for &alpha in &args.alphas {
                let config = RunConfig {
                    seed,
                    ..run_config(m, alpha)
                };
                let draws = run_posterior_bootstrap(&subset, base.as_ref(), &loss, &config, &runner)?;
                let (lo, hi) = credible_interval(&draws, coordinate, m.level)?;
                rows.push(vec![
                    format_f64(alpha),
                    n.to_string(),
                    rep.to_string(),
                    format_f64(lo),
                    format_f64(hi),
                    format_f64(hi - lo),
                ]);
            }
        }
    }
    let out = io::ensure_dir(&m.out)?;
    let header: Vec<String> = ["alpha", "n", "rep", "lo", "hi", "width"].map(String::from).to_vec();
    io::write_csv(&out.join("sweep.csv"), &header, rows)?;
    manifest.output("sweep.csv");
    manifest.finish(&out)?;
    Ok(())
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    #[serde(flatten)]
    result: &'a CalibrationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    ppi: Option<PpiVariance>,
}

/// Imputed predictions for the PPI variance: `P(Y = 1)` for binary
/// probabilities, else the recorded labels.
fn imputed_predictions(path: &Path, args: &ModelArgs) -> Result<Vec<f64>> {
    let rows = io::load_imputed(path, args.schema)?;
    if rows.probability_columns() > 0 && rows.probability_columns() <= 2 {
        return Ok((0..rows.len())
            .map(|i| rows.positive_probability(i).expect("binary probabilities"))
            .collect());
    }
    match rows.labels() {
        Some(labels) => Ok(labels.to_vec()),
        None => Err(CliError::Schema {
            path: path.to_path_buf(),
            reason: "ppi-match needs binary probabilities or a `y` column of predictions".into(),
        }),
    }
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let m = &args.model;
    let (data, loss) = load_model(m)?;
    let config = run_config(m, 0.0);
    config.validate()?;
    let runner = RayonRunner::new(m.threads)?;
    let mut manifest = manifest_for("calibrate", m, &runner)?;
    manifest.config(args);

    let (result, ppi) = match args.method {
        MethodKind::Coverage => {
            if args.alphas.is_empty() {
                return Err(CliError::Usage("coverage calibration needs --alphas".into()));
            }
            let base = load_base(m, args.alphas.iter().any(|&a| a > 0.0))?;
            let options = CoverageOptions {
                alphas: args.alphas.clone(),
                n_boot: args.n_boot,
                level: m.level,
                slack: args.slack,
                coordinate: coordinate_index(args.coordinate, loss.dim())?,
            };
            let result = calibrate_alpha_coverage(&data, base.as_ref(), &loss, &options, &config, &runner)?;
            (result, None)
        }
        MethodKind::PpiMatch => {
            let preds_path = args
                .predictions_on_labeled
                .as_ref()
                .ok_or_else(|| CliError::Usage("ppi-match needs --predictions-on-labeled".into()))?;
            if !matches!(loss, LossModel::Mean) {
                return Err(CliError::Usage("ppi-match is defined for --loss mean".into()));
            }
            let base = load_base(m, true)?.expect("required base");
            let imputed_path = m.imputed.as_ref().expect("required imputed file");
            manifest.input("predictions-on-labeled", preds_path)?;
            let preds = io::load_vector(preds_path)?;
            let imputed = imputed_predictions(imputed_path, m)?;
            let convention = match args.ppi_convention {
                ConventionKind::Standard => PpiConvention::Standard,
                ConventionKind::Swapped => PpiConvention::Swapped,
            };
            let ppi = ppi_variance_mean_with(data.responses(), &preds, &imputed, convention)?;
            let &[lo, hi] = args.bracket.as_slice() else {
                return Err(CliError::Usage("--bracket takes two values lo,hi".into()));
            };
            let bracket = (lo, hi);
            let result = calibrate_alpha_ppi(&data, &base, &loss, &ppi, bracket, &config)?;
            (result, Some(ppi))
        }
    };

    let out = io::ensure_dir(&m.out)?;
    io::write_json(
        &out.join("calibration.json"),
        &CalibrationReport { result: &result, ppi },
    )?;
    manifest.output("calibration.json");
    let value = match result.method {
        CalibrationMethod::Coverage => "coverage",
        CalibrationMethod::PpiMatch => "residual",
    };
    let header = vec!["alpha".to_owned(), value.to_owned()];
    let rows = result
        .diagnostics
        .iter()
        .map(|p| vec![format_f64(p.alpha), format_f64(p.value)]);
    io::write_csv(&out.join("calibration.csv"), &header, rows)?;
    manifest.output("calibration.csv");
    manifest.finish(&out)?;
    Ok(())
}

fn predict(args: &PredictArgs) -> Result<()> {
    if !matches!(args.loss, LossKind::Logistic | LossKind::Softmax) {
        return Err(CliError::Usage("predict needs --loss softmax or logistic".into()));
    }
    let draws = io::load_draws(&args.draws)?;
    let points = io::load_points(&args.x)?;
    let loss = build_loss(args.loss, 0.5, args.k, points.width())?;
    if draws.dim() != loss.dim() {
        return Err(CliError::Usage(format!(
            "draws have {} columns but {} covariates with {} classes need {}",
            draws.dim(),
            points.width(),
            loss.classes().unwrap_or(2),
            loss.dim()
        )));
    }
    let k = loss.classes().unwrap_or(2);
    let mut rows = Vec::with_capacity(points.rows);
    for i in 0..points.rows {
        let probs = posterior_predictive_probs(&draws, &loss, points.row(i))?;
        let class = dpboot_core::bootstrap::argmax(&probs);
        let mut row = vec![class.to_string()];
        row.extend(probs.iter().map(|&p| format_f64(p)));
        rows.push(row);
    }
    let out = io::ensure_dir(&args.out)?;
    let mut header = vec!["class".to_owned()];
    header.extend((1..=k).map(|c| format!("p{c}")));
    io::write_csv(&out.join("predictions.csv"), &header, rows)?;
    let mut manifest = ManifestBuilder::new("predict", 0, 1);
    manifest.config(args);
    manifest.input("draws", &args.draws)?;
    manifest.input("x", &args.x)?;
    manifest.output("predictions.csv");
    manifest.finish(&out)?;
    Ok(())
}
