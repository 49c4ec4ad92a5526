use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use privci::crt::{crt_test, priv_crt_test, CrtConfig};
use privci::dataset::{infer_bound, load_csv, rescale, write_csv, BoundedDataset};
use privci::gcm::{gcm_test, priv_gcm_test, GcmConfig};
use privci::harness::{
    run_experiment, sensitivity_audit, write_results, ExperimentConfig, FailurePolicy, Grid,
    HyperMode, OutputFormat, OutputSpec, TestKind,
};
use privci::krr::{FitConfig, Hyper};
use privci::seed::{derive_seed, seeded_rng};
use privci::synth::{generate, make_conditional_model, GroundTruth, SynthParams, DEFAULT_BOUND_C};

#[derive(Parser)]
#[command(name = "privci", version, about = "Private conditional independence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Non-private GCM on a CSV dataset.
    Gcm(SingleArgs),
    /// Private GCM on a CSV dataset.
    PrivGcm(SingleArgs),
    /// Non-private CRT on a CSV dataset, using the synthetic law of X | Z.
    Crt(SingleArgs),
    /// Private CRT on a CSV dataset, using the synthetic law of X | Z.
    PrivCrt(SingleArgs),
    /// Monte Carlo experiment over a parameter grid of synthetic data.
    Experiment(ExperimentArgs),
    /// Empirical check of the sensitivity bounds on neighbouring datasets.
    SensitivityAudit(AuditArgs),
    /// Write one synthetic dataset as CSV (original scale).
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Public lower bound on λ; all sensitivity constants use it.
    #[arg(long, default_value_t = 10.0)]
    lambda_floor: f64,
    /// Use λ = floor and a fixed bandwidth instead of cross-validation.
    #[arg(long)]
    fixed_hyperparams: bool,
    /// Kernel bandwidth for --fixed-hyperparams (default: median distance).
    #[arg(long, requires = "fixed_hyperparams")]
    bandwidth: Option<f64>,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        if self.fixed_hyperparams {
            FitConfig {
                hyper: Hyper::Fixed {
                    lambda: self.lambda_floor,
                    bandwidth: self.bandwidth,
                },
                ..FitConfig::fixed(self.lambda_floor)
            }
        } else {
            FitConfig::cross_validated(self.lambda_floor)
        }
    }
}

#[derive(Args)]
struct SingleArgs {
    /// CSV with header x,y,z1..zd.
    #[arg(long)]
    input: PathBuf,
    /// Number of z columns.
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of resampled copies (CRT).
    #[arg(long, default_value_t = 19)]
    m: usize,
    /// Complexity of the synthetic conditional law used by the CRT.
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit on the first half and compute residuals on the second (GCM).
    #[arg(long)]
    split: bool,
    /// Clamp rescaled values to [-1, 1] instead of rejecting them.
    #[arg(long)]
    clip: bool,
    #[arg(long, default_value_t = DEFAULT_BOUND_C)]
    bound_c: f64,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_test)]
    test: TestKind,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    split: bool,
    #[arg(long, default_value_t = DEFAULT_BOUND_C)]
    bound_c: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda_floor: f64,
    #[arg(long)]
    fixed_hyperparams: bool,
    /// Drop failed trials from the rate denominator.
    #[arg(long)]
    exclude_failures: bool,
    /// Include every trial's p-value in the output.
    #[arg(long)]
    retain_p_values: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_delimiter = ',', default_value = "10")]
    lambda_floor: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10,50")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_test(s: &str) -> Result<TestKind, String> {
    s.parse().map_err(|e: privci::harness::HarnessError| e.to_string())
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&PathBuf>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load(args: &SingleArgs) -> Result<BoundedDataset> {
    let ds = load_csv(&args.input, args.d)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let bound = infer_bound(ds.len() as f64, args.bound_c)?;
    Ok(rescale(ds, bound, bound, args.clip)?)
}

fn epsilon(args: &SingleArgs) -> Result<f64> {
    match args.epsilon {
        Some(e) => Ok(e),
        None => bail!("--epsilon is required for private tests"),
    }
}

fn run_single(kind: TestKind, args: &SingleArgs) -> Result<()> {
    let ds = load(args)?;
    let mut rng = seeded_rng(args.seed);
    let fit = args.fit.config();
    let out = args.output.as_ref();
    match kind {
        TestKind::Gcm => emit_json(&gcm_test(&ds, &GcmConfig::new(fit).split(args.split), &mut rng)?, out),
        TestKind::PrivGcm => {
            let cfg = GcmConfig::new(fit).split(args.split);
            emit_json(&priv_gcm_test(&ds, epsilon(args)?, &cfg, &mut rng)?, out)
        }
        TestKind::Crt | TestKind::PrivCrt => {
            let gt = GroundTruth::new(args.s, 0.0, ds.bound_x(), ds.bound_y(), ds.bound_x());
            let cond = make_conditional_model(&gt);
            let cfg = CrtConfig::new(fit);
            let res = if kind == TestKind::Crt {
                crt_test(&ds, &cond, args.m, &cfg, &mut rng)?
            } else {
                priv_crt_test(&ds, &cond, args.m, epsilon(args)?, &cfg, &mut rng)?
            };
            emit_json(&res, out)
        }
    }
}

fn run_experiment_cmd(a: &ExperimentArgs) -> Result<()> {
    let grid = Grid {
        n: a.n.clone(),
        d: a.d.clone(),
        s: a.s.clone(),
        beta: a.beta.clone(),
        epsilon: a.epsilon.clone(),
        m: a.m.clone(),
    };
    let mut cfg = ExperimentConfig::new(a.test, grid, a.trials, a.seed);
    cfg.alpha = a.alpha;
    cfg.split_mode = a.split;
    cfg.bound_c = a.bound_c;
    cfg.lambda_floor = a.lambda_floor;
    if a.fixed_hyperparams {
        cfg.hyper = HyperMode::Fixed;
    }
    if a.exclude_failures {
        cfg.failure_policy = FailurePolicy::Exclude;
    }
    cfg.retain_p_values = a.retain_p_values;
    cfg.output = a.output.clone().map(|path| OutputSpec {
        path,
        format: a.format.into(),
    });
    let results = run_experiment(&cfg)?;
    if cfg.output.is_none() {
        let mut out = sink(None)?;
        write_results(&results, a.format.into(), &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn run_audit(a: &AuditArgs) -> Result<()> {
    let mut rows = Vec::new();
    for (i, &lambda) in a.lambda_floor.iter().enumerate() {
        let mut rng = seeded_rng(derive_seed(a.seed, &[i as u64]));
        rows.extend(sensitivity_audit(lambda, &a.n, a.trials, &mut rng)?.rows);
    }
    let report = privci::harness::AuditReport { rows };
    emit_json(&report, a.output.as_ref())?;
    if report.total_violations() > 0 {
        bail!("{} sensitivity violations", report.total_violations());
    }
    Ok(())
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let (ds, _) = generate(&SynthParams::new(a.n, a.d, a.s, a.beta), &mut seeded_rng(a.seed))?;
    let mut out = sink(a.output.as_ref())?;
    write_csv(&ds.unscaled(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Gcm(a) => run_single(TestKind::Gcm, a),
        Command::PrivGcm(a) => run_single(TestKind::PrivGcm, a),
        Command::Crt(a) => run_single(TestKind::Crt, a),
        Command::PrivCrt(a) => run_single(TestKind::PrivCrt, a),
        Command::Experiment(a) => run_experiment_cmd(a),
        Command::SensitivityAudit(a) => run_audit(a),
        Command::Generate(a) => run_generate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
