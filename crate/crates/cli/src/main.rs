//! longsim: simulate long-range daily return series and score models
//! against eleven quantified stylized facts.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngExt;

use longsim_core::garch::fit_garch11;
use longsim_core::harness::{evaluate_features, render_report, HarnessConfig, ReportFormat};
use longsim_core::model::ModelSpec;
use longsim_core::multiscale::{
    calibrate_alpha_n, estimate_piecewise_vol, sojourn_curve, MultiscaleConfig,
};
use longsim_core::returns::{fit_sign_model, ReturnSimParams};
use longsim_core::series::{
    load_series, save_returns, save_runs_long, to_returns, CsvSpec, LoadFormat, Loaded,
    ReturnKind, ReturnSeries,
};
use longsim_core::stats::sign_acf1;
use longsim_core::volmodel::{
    fit_low_freq_with_order, FreqOrder, HighFreqParams, VolSimParams,
};
use longsim_core::Error as CoreError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_GATE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "longsim",
    about = "Long-range daily return simulation and stylized-fact verification",
    version
)]
struct Cli {
    /// Worker threads for parallel batches (default: all cores, or
    /// LONGSIM_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a price or return CSV, clean it, persist the return series.
    Ingest(IngestArgs),
    /// Calibrate alpha_n for a series length by Monte-Carlo bisection.
    Calibrate(CalibrateArgs),
    /// Fit the piecewise-constant volatility and export the segmentation.
    Segment(SegmentArgs),
    /// Fit model parameters from a return series into a JSON file.
    Fit(FitArgs),
    /// Simulate return paths from a parameter file.
    Simulate(SimulateArgs),
    /// Score a model against a data series on the eleven features.
    Evaluate(EvaluateArgs),
    /// Render figure data (CSV artifacts) as SVG plots.
    Plot(PlotArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input CSV of prices.
    #[arg(long, conflicts_with = "returns")]
    prices: Option<PathBuf>,
    /// Input CSV of returns.
    #[arg(long)]
    returns: Option<PathBuf>,
    /// simple or log returns when converting prices (recorded either way).
    #[arg(long, value_enum, default_value_t = MethodArg::Simple)]
    method: MethodArg,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// Cleaned return series CSV.
    #[arg(long)]
    output: PathBuf,
    /// Also export the |r| autocorrelation curve (lag, acf).
    #[arg(long)]
    acf_output: Option<PathBuf>,
    /// Lags for --acf-output (capped at n - 1).
    #[arg(long, default_value_t = 1500)]
    acf_lags: usize,
    /// Also export the gain/loss frequency curve (bin_center, pos_frequency).
    #[arg(long)]
    gain_loss_output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Simple,
    Log,
}

impl From<MethodArg> for ReturnKind {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Simple => ReturnKind::Simple,
            MethodArg::Log => ReturnKind::Log,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Series length.
    #[arg(long)]
    n: usize,
    /// Target single-interval probability under white noise.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    /// Monte-Carlo replications per bisection step.
    #[arg(long, default_value_t = 1000)]
    nsim: usize,
    /// Master seed (generated and printed when omitted).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Return series CSV.
    #[arg(long)]
    input: PathBuf,
    /// Per-interval band level.
    #[arg(long)]
    alpha_n: f64,
    /// Segmentation CSV (start, end, level).
    #[arg(long)]
    output: PathBuf,
    /// Optional per-day step CSV for overlays.
    #[arg(long)]
    step_output: Option<PathBuf>,
    /// Optional sojourn CSV (level, length).
    #[arg(long)]
    sojourn_output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Section3,
    Garch,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Energy,
    Index,
}

#[derive(Args)]
struct FitArgs {
    /// Return series CSV.
    #[arg(long)]
    input: PathBuf,
    /// Which model family to fit.
    #[arg(long, value_enum, default_value_t = ModelKind::Section3)]
    model: ModelKind,
    /// Parameter JSON output.
    #[arg(long)]
    output: PathBuf,
    /// Variance fraction the trig fit must explain.
    #[arg(long, default_value_t = 0.8)]
    pow: f64,
    /// Frequency selection order.
    #[arg(long, value_enum, default_value_t = OrderArg::Energy)]
    order: OrderArg,
    /// Band level of the segmentation feeding the log-volatility fit.
    #[arg(long, default_value_t = 0.998)]
    alpha_n: f64,
    #[arg(long, default_value_t = 200.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma1: f64,
    #[arg(long, default_value_t = 20.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 0.4)]
    sigma2: f64,
    #[arg(long, default_value_t = 15.0)]
    nu_t: f64,
    /// Level-shift half-width delta.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Sign-model quantile bins.
    #[arg(long, default_value_t = 50)]
    nu_bins: usize,
    /// Target first-lag sign autocorrelation (default: measured on the
    /// input).
    #[arg(long)]
    eacf1: Option<f64>,
    /// Attach the sign modification to a GARCH fit.
    #[arg(long, default_value_t = false)]
    sign_mod: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model parameter JSON.
    #[arg(long)]
    params: PathBuf,
    /// Path length.
    #[arg(long)]
    n: usize,
    /// Number of paths.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Master seed (generated and printed when omitted).
    #[arg(long)]
    seed: Option<u64>,
    /// Long-format CSV (run_id, t, value).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Empirical return series CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model parameter JSON.
    #[arg(long)]
    params: PathBuf,
    /// Simulations per batch.
    #[arg(long, default_value_t = 1000)]
    nsim: usize,
    /// ACF lags for the slow-decay feature.
    #[arg(long, default_value_t = 1500)]
    lags: usize,
    /// Band level for the clustering feature (default: calibrated at
    /// alpha = 0.9 for the data length).
    #[arg(long)]
    alpha_n: Option<f64>,
    /// Replications for the default alpha_n calibration.
    #[arg(long, default_value_t = 500)]
    calib_nsim: usize,
    /// Master seed (generated and printed when omitted).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Write the report here as well as stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Export the data and model-mean |r| ACF curves to PREFIX.data.csv
    /// and PREFIX.model.csv for overlay plots.
    #[arg(long)]
    acf_output: Option<PathBuf>,
    /// Exit with code 4 if any p-value falls below this.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Overlay of ACF curves (lag, value).
    Acf,
    /// Volatility step function over |returns|.
    Segmentation,
    /// Sojourn scatter (level, length).
    Sojourn,
    /// Gain/loss frequency curve.
    Gainloss,
    /// Raw return series.
    Series,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Input CSV artifacts (repeatable; overlaid for acf).
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Return series CSV to underlay (segmentation plots).
    #[arg(long)]
    returns: Option<PathBuf>,
    /// Output SVG.
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let workers = cli.workers.or_else(|| {
        std::env::var("LONGSIM_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(w) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("warning: could not set worker count: {e}");
        }
    }

    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Map error causes onto the documented exit codes.
fn classify(e: &anyhow::Error) -> u8 {
    if let Some(core) = e.downcast_ref::<CoreError>() {
        return match core {
            CoreError::Config(_) | CoreError::Json(_) => EXIT_USAGE,
            CoreError::Io(_)
            | CoreError::Parse { .. }
            | CoreError::EmptySeries
            | CoreError::Csv(_)
            | CoreError::InvalidInput(_)
            | CoreError::LengthMismatch { .. } => EXIT_DATA,
            CoreError::ZeroVariance(_)
            | CoreError::Infeasible(_)
            | CoreError::NonConvergence(_)
            | CoreError::Overflow { .. }
            | CoreError::ModelFailure { .. } => EXIT_NUMERIC,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() || e.downcast_ref::<csv::Error>().is_some() {
        return EXIT_DATA;
    }
    EXIT_DATA
}

fn seed_or_generate(seed: Option<u64>) -> u64 {
    match seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::rng().random();
            println!("seed: {s} (pass --seed {s} to reproduce)");
            s
        }
    }
}

fn load_returns(path: &Path, kind: ReturnKind) -> Result<ReturnSeries> {
    let loaded = load_series(path, &CsvSpec::default())
        .with_context(|| format!("loading {}", path.display()))?;
    Ok(match loaded {
        Loaded::Returns(mut r) => {
            r.kind = kind;
            r
        }
        Loaded::Prices(p) => to_returns(&p, kind)?,
    })
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Ingest(a) => {
            let delim = a
                .delimiter
                .as_bytes()
                .first()
                .copied()
                .ok_or_else(|| CoreError::Config("empty delimiter".into()))?;
            let (path, format) = match (&a.prices, &a.returns) {
                (Some(p), None) => (p, LoadFormat::Prices),
                (None, Some(r)) => (r, LoadFormat::Returns),
                _ => bail!(CoreError::Config(
                    "pass exactly one of --prices or --returns".into()
                )),
            };
            let spec = CsvSpec {
                format,
                delimiter: delim,
            };
            let loaded = load_series(path, &spec).with_context(|| format!("loading {}", path.display()))?;
            let series = match loaded {
                Loaded::Returns(mut r) => {
                    r.kind = a.method.into();
                    r
                }
                Loaded::Prices(p) => to_returns(&p, a.method.into())?,
            };
            save_returns(&series, &a.output)?;
            println!(
                "{}: {} nonzero returns ({} zeros removed), method {}, written to {}",
                series.source_label,
                series.len(),
                series.zeros_removed,
                series.kind,
                a.output.display()
            );
            if let Some(path) = &a.acf_output {
                let abs: Vec<f64> = series.values().iter().map(|v| v.abs()).collect();
                let lags = a.acf_lags.min(series.len() - 1);
                longsim_core::stats::acf(&abs, lags)?.write_csv(path)?;
                println!("|r| acf ({lags} lags) written to {}", path.display());
            }
            if let Some(path) = &a.gain_loss_output {
                let curve = longsim_core::stats::gain_loss_curve(&series, 0.02, 0.98, 50)?;
                curve.write_csv(path)?;
                println!(
                    "gain/loss curve written to {} (correlation {:.3})",
                    path.display(),
                    curve.correlation
                );
            }
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Calibrate(a) => {
            let seed = seed_or_generate(a.seed);
            let alpha_n = calibrate_alpha_n(a.n, a.alpha, a.nsim, seed)?;
            println!("alpha_n: {alpha_n}");
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Segment(a) => {
            let series = load_returns(&a.input, ReturnKind::Simple)?;
            let cfg = MultiscaleConfig::with_alpha_n(a.alpha_n)?;
            let vol = estimate_piecewise_vol(&series, &cfg)?;
            vol.write_csv(&a.output)?;
            if let Some(step) = &a.step_output {
                vol.write_step_csv(step)?;
            }
            if let Some(soj) = &a.sojourn_output {
                let mut w = csv::Writer::from_path(soj)?;
                w.write_record(["level", "length"])?;
                for (level, len) in sojourn_curve(&vol) {
                    w.write_record([level.to_string(), len.to_string()])?;
                }
                w.flush()?;
            }
            let diag = longsim_core::multiscale::residual_diagnostics(
                &series,
                &vol,
                longsim_core::multiscale::NoiseKind::Gaussian,
            )?;
            println!(
                "{} intervals of constancy at alpha_n {} written to {}",
                vol.num_intervals(),
                a.alpha_n,
                a.output.display()
            );
            println!(
                "residual kurtosis: {:.3} (Gaussian reference {})",
                diag.kurtosis, diag.reference_kurtosis
            );
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Fit(a) => {
            let series = load_returns(&a.input, ReturnKind::Simple)?;
            let spec = match a.model {
                ModelKind::Section3 => fit_section3(&series, &a)?,
                ModelKind::Garch => fit_garch_model(&series, &a)?,
            };
            spec.to_json_file(&a.output)?;
            println!("parameters written to {}", a.output.display());
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Simulate(a) => {
            let spec = ModelSpec::from_json_file(&a.params)?;
            let seed = seed_or_generate(a.seed);
            let paths = longsim_core::model::simulate_batch(&spec, a.n, a.count, seed, 1)?;
            save_runs_long(&paths, &a.output)?;
            println!(
                "{} path(s) of length {} written to {}",
                a.count,
                a.n,
                a.output.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Evaluate(a) => {
            let data = load_returns(&a.data, ReturnKind::Simple)?;
            let spec = ModelSpec::from_json_file(&a.params)?;
            let seed = seed_or_generate(a.seed);
            let alpha_n = match a.alpha_n {
                Some(v) => v,
                None => {
                    eprintln!(
                        "calibrating alpha_n for n = {} at alpha = 0.9 ({} replications)...",
                        data.len(),
                        a.calib_nsim
                    );
                    calibrate_alpha_n(data.len(), 0.9, a.calib_nsim, seed ^ 0xca11b)?
                }
            };
            let cfg = HarnessConfig {
                nsim: a.nsim,
                acf_lags: a.lags,
                alpha_n,
            };
            let report = evaluate_features(&data, &spec, &cfg, seed)?;
            let format = match a.format {
                FormatArg::Text => ReportFormat::Text,
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            let rendered = render_report(&report, format)?;
            println!("{rendered}");
            if let Some(out) = &a.output {
                std::fs::write(out, &rendered)?;
            }
            if let Some(prefix) = &a.acf_output {
                use longsim_core::stats::AcfCurve;
                let base = prefix.to_string_lossy();
                let data_path = PathBuf::from(format!("{base}.data.csv"));
                let model_path = PathBuf::from(format!("{base}.model.csv"));
                AcfCurve { values: report.data_abs_acf.clone() }.write_csv(&data_path)?;
                AcfCurve { values: report.mean_abs_acf.clone() }.write_csv(&model_path)?;
                println!(
                    "acf curves written to {} and {}",
                    data_path.display(),
                    model_path.display()
                );
            }
            if let Some(threshold) = a.threshold {
                let min_p = report.min_p();
                if min_p < threshold {
                    eprintln!("threshold gate: min p-value {min_p} below {threshold}");
                    return Ok(ExitCode::from(EXIT_GATE));
                }
            }
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Plot(a) => {
            let traces = build_traces(&a)?;
            let title = match a.kind {
                PlotKind::Acf => "autocorrelation of |returns|",
                PlotKind::Segmentation => "piecewise-constant volatility",
                PlotKind::Sojourn => "sojourn time vs volatility",
                PlotKind::Gainloss => "positive-return frequency vs |return|",
                PlotKind::Series => "daily returns",
            };
            plot::render_svg(&traces, title, &a.output)?;
            println!("figure written to {}", a.output.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn fit_section3(series: &ReturnSeries, a: &FitArgs) -> Result<ModelSpec> {
    let cfg = MultiscaleConfig::with_alpha_n(a.alpha_n)?;
    let vol = estimate_piecewise_vol(series, &cfg)?;
    let log_vol: Vec<f64> = vol.expand().iter().map(|v| v.ln()).collect();
    let order = match a.order {
        OrderArg::Energy => FreqOrder::Energy,
        OrderArg::Index => FreqOrder::Index,
    };
    let low = fit_low_freq_with_order(&log_vol, a.pow, order)?;
    println!(
        "segmentation: {} intervals; trig fit: {} frequencies, mlv {:.4}",
        vol.num_intervals(),
        low.num_frequencies(),
        low.mlv
    );
    let sign_model = fit_sign_model(series, a.nu_bins)?;
    if sign_model.nu_bins() < a.nu_bins {
        eprintln!(
            "warning: tied quantile edges reduced the sign model to {} bins (requested {})",
            sign_model.nu_bins(),
            a.nu_bins
        );
    }
    let eacf1 = match a.eacf1 {
        Some(v) => v,
        None => sign_acf1(series)?,
    };
    println!("sign model: {} bins, eacf1 {:.4}", sign_model.nu_bins(), eacf1);
    Ok(ModelSpec::Section3 {
        vol: VolSimParams {
            low,
            high: HighFreqParams {
                lambda1: a.lambda1,
                sigma1: a.sigma1,
                lambda2: a.lambda2,
                sigma2: a.sigma2,
                nu_t: a.nu_t,
            },
            delta: a.delta,
        },
        ret: ReturnSimParams {
            rho: a.rho,
            eta: a.eta,
            gamma: a.gamma,
            eacf1,
            sign_model,
            allow_negative_rho: a.rho < 0.0,
        },
        return_kind: series.kind,
    })
}

fn fit_garch_model(series: &ReturnSeries, a: &FitArgs) -> Result<ModelSpec> {
    let params = fit_garch11(series)?;
    println!(
        "GARCH(1,1): a0 {:.4e}, a1 {:.4}, b1 {:.4}, a1+b1 {:.4}{}",
        params.a0,
        params.a1,
        params.b1,
        params.a1 + params.b1,
        if params.stationary { "" } else { " (nonstationary)" }
    );
    let sign_mod = if a.sign_mod {
        let sign_model = fit_sign_model(series, a.nu_bins)?;
        let eacf1 = match a.eacf1 {
            Some(v) => v,
            None => sign_acf1(series)?,
        };
        Some(longsim_core::garch::GarchSignMod {
            sign_model,
            gamma: a.gamma,
            eacf1,
        })
    } else {
        None
    };
    Ok(ModelSpec::Garch {
        params,
        sign_mod,
        return_kind: series.kind,
    })
}

fn build_traces(a: &PlotArgs) -> Result<Vec<plot::Trace>> {
    let mut traces = Vec::new();
    match a.kind {
        PlotKind::Acf => {
            for path in &a.input {
                traces.push(plot::Trace {
                    label: path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    points: plot::read_xy(path)?,
                    scatter: false,
                });
            }
        }
        PlotKind::Segmentation => {
            if let Some(ret) = &a.returns {
                let series = load_returns(ret, ReturnKind::Simple)?;
                traces.push(plot::Trace {
                    label: "|returns|".into(),
                    points: series
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(t, v)| ((t + 1) as f64, v.abs()))
                        .collect(),
                    scatter: true,
                });
            }
            for path in &a.input {
                traces.push(plot::Trace {
                    label: "volatility".into(),
                    points: plot::read_xy(path)?,
                    scatter: false,
                });
            }
        }
        PlotKind::Sojourn | PlotKind::Gainloss => {
            for path in &a.input {
                traces.push(plot::Trace {
                    label: path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    points: plot::read_xy(path)?,
                    scatter: true,
                });
            }
        }
        PlotKind::Series => {
            for path in &a.input {
                let series = load_returns(path, ReturnKind::Simple)?;
                traces.push(plot::Trace {
                    label: series.source_label.clone(),
                    points: series
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(t, v)| ((t + 1) as f64, *v))
                        .collect(),
                    scatter: false,
                });
            }
        }
    }
    if traces.is_empty() {
        bail!(anyhow!("no plot inputs"));
    }
    Ok(traces)
}
