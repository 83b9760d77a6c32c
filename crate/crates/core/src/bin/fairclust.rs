//! Command-line front end: simulate, adapt, cluster, evaluate, benchmark.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairclust::data::{load_dataset, save_dataset, Dataset, EffectFlags, SfmSchema};
use fairclust::error::{Error, Result};
use fairclust::metrics::{full_report, write_tidy_csv, ReportSpec};
use fairclust::pipeline::{self, RunConfig};
use fairclust::transport::{fit_and_apply, TransportPlan};

#[derive(Parser)]
#[command(name = "fairclust", version, about = "Causally fair clustering and causal fairness audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an SCM spec and write the data plus exact ground-truth effects.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit and apply the transport maps selected by --flags.
    Adapt(RunArgs),
    /// Run the fair clustering pipeline for --flags and audit the result.
    Cluster(RunArgs),
    /// Audit an existing assignment CSV (column "cluster", 1-based).
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        assignment: PathBuf,
        /// Transport plan whose residuals feed the bounds.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// The assignment was produced without the protected attribute.
        #[arg(long)]
        ftu: bool,
    },
    /// Run all five methods with one configuration.
    Benchmark(RunArgs),
}

/// Mirrors `RunConfig`; flags given here override a --config file.
#[derive(Args, Clone)]
struct RunArgs {
    /// RunConfig JSON to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Effects to remove, in (NDE, NIE, SE) order, e.g. 1,1,0.
    #[arg(long)]
    flags: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_inner: Option<usize>,
    #[arg(long)]
    n_outer: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.dataset {
            cfg.dataset = Some(v.clone());
        }
        if let Some(v) = &self.schema {
            cfg.schema = Some(v.clone());
        }
        if let Some(v) = &self.flags {
            cfg.flags = EffectFlags::parse(v)?;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n_inner {
            cfg.n_inner = v;
        }
        if let Some(v) = self.n_outer {
            cfg.n_outer = v;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("--{what} is required")))
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let schema = SfmSchema::from_json_file(required(&cfg.schema, "schema")?)?.with_bins(cfg.bins)?;
    let d = load_dataset(required(&cfg.dataset, "dataset")?, &schema)?;
    if d.dropped_rows() > 0 {
        log::warn!("dropped {} rows with missing values", d.dropped_rows());
    }
    Ok(d)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { spec, n, seed, output } => {
            let spec = fairclust::scm::ScmSpec::from_json_file(&spec)?;
            let (d, truth) = pipeline::simulate_spec(&spec, n, seed)?;
            std::fs::create_dir_all(&output)?;
            save_dataset(&d, output.join("data.csv"))?;
            std::fs::write(output.join("schema.json"), spec.schema().to_json_pretty())?;
            std::fs::write(output.join("ground_truth.json"), truth.to_json_pretty())?;
        }
        Command::Adapt(args) => {
            let cfg = args.resolve()?;
            let out = required(&cfg.output, "output")?.to_owned();
            let d = load(&cfg)?;
            let (plan, adapted) = fit_and_apply(&d, cfg.flags, cfg.transport_seed())?;
            std::fs::create_dir_all(&out)?;
            save_dataset(&adapted, out.join("adapted.csv"))?;
            std::fs::write(out.join("plan.json"), plan.to_json_pretty())?;
            std::fs::write(out.join("config.json"), cfg.to_json_pretty())?;
        }
        Command::Cluster(args) => {
            let cfg = args.resolve()?;
            let out = required(&cfg.output, "output")?.to_owned();
            let d = load(&cfg)?;
            let result = pipeline::run_algorithm1(&d, &cfg)?;
            pipeline::write_run(&out, &result, &cfg)?;
        }
        Command::Evaluate { run, assignment, plan, ftu } => {
            let cfg = run.resolve()?;
            let out = required(&cfg.output, "output")?.to_owned();
            let d = load(&cfg)?;
            let a = pipeline::read_assignment(&assignment)?;
            let plan: Option<TransportPlan> = match plan {
                Some(p) => Some(TransportPlan::from_json_str(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            let k = cfg.k.max(a.n_clusters());
            let spec = ReportSpec {
                method: "evaluated",
                display_name: "external assignment",
                ftu,
                plan: plan.as_ref(),
                counterfactual: None,
            };
            let report = full_report(&d, &a, k, &spec, cfg.bootstrap())?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.json"), report.to_json_pretty())?;
            write_tidy_csv(std::slice::from_ref(&report), std::fs::File::create(out.join("metrics.csv"))?)?;
            std::fs::write(out.join("config.json"), cfg.to_json_pretty())?;
        }
        Command::Benchmark(args) => {
            let cfg = args.resolve()?;
            let out = required(&cfg.output, "output")?.to_owned();
            let d = load(&cfg)?;
            let b = pipeline::run_benchmark(&d, &cfg)?;
            pipeline::write_benchmark(&out, &b)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(v) = std::env::var("FAIRCLUST_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot set worker count: {e}");
                }
            }
            _ => {
                eprintln!("error: FAIRCLUST_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
