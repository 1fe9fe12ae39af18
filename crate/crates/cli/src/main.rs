//! `hawkesnet` command line: simulate, fit, cross-validate, run the
//! replication study and tabulate its results.

mod config;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hawkesnet::estimation::{cross_validate, fit, CvResult, FitConfig, FitData, OmegaSource, Stages};
use hawkesnet::experiments::{compute_metrics, emit_report, load_study, run_study, write_tables, StudyConfig};
use hawkesnet::io::{read_covariates, read_events, write_covariates, write_events};
use hawkesnet::manifest::RunManifest;
use hawkesnet::simulate::{
    rng_stream, sample_dgp, simulate_covariates, simulate_hawkes, DgpConfig, DgpTruth, StreamKind,
};
use hawkesnet::{validate_params, CovariateField, Error, EventLog, HawkesParams};

/// Process outcome other than success: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    /// Bad flags, configuration or input files (exit 1).
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }

    /// Numerical or I/O failure during the run (exit 2).
    pub fn runtime(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match &e {
            Error::Domain(_) | Error::Dimension(_) | Error::InvalidParams(_) | Error::InvalidInput(_) => {
                Self::invalid(msg)
            }
            Error::Csv(c) if !c.is_io_error() => Self::invalid(msg),
            Error::Json(j) if !j.is_io() => Self::invalid(msg),
            _ => Self::runtime(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "hawkesnet", version, about = "Sparse network estimation for multivariate Hawkes processes with covariates")]
struct Cli {
    /// TOML configuration file with `schema_version = 1` and optional [dgp], [fit] and [study] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel batch work.
    #[arg(long, global = true, env = "HAWKESNET_THREADS")]
    threads: Option<usize>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "hawkesnet-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the simulation design and write event and covariate CSVs.
    Simulate {
        /// JSON parameter set (C, alpha, beta, kernel) replacing the sampled truth.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Run the staged estimator and write the fit report.
    Fit {
        #[command(flatten)]
        data: DataArgs,

        /// Stages to run: 1, 12 or 123.
        #[arg(long)]
        stages: Option<Stages>,

        /// Penalty source: `cv`, `theory` or comma-separated per-node values.
        #[arg(long)]
        omega: Option<String>,
    },
    /// Cross-validate the per-node penalties and write the rounds.
    Cv {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run the replication study, write raw records and tables, print the tables.
    Bench {
        /// Number of replications; overrides the configuration.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Recompute and print the tables of an emitted study.
    Report {
        /// Directory written by `bench`.
        #[arg(long)]
        study: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Event CSV with columns node,id,time.
    #[arg(long)]
    events: PathBuf,

    /// Covariate CSV with columns segment_start,node,x1..xp.
    #[arg(long)]
    covariates: PathBuf,

    /// End T of the observation window.
    #[arg(long = "t-end")]
    t_end: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::runtime(e.to_string()))?;
    }
    let file = config::load(cli.config.as_deref())?;
    let ctx = Context { config: cli.config.clone(), seed: cli.seed, out: cli.out.clone() };
    match cli.command {
        Command::Simulate { params } => simulate(&ctx, file.dgp.unwrap_or_default(), params.as_deref()),
        Command::Fit { data, stages, omega } => {
            let mut cfg = file.fit.unwrap_or_default();
            if let Some(s) = stages {
                cfg.stages = s;
            }
            if let Some(w) = omega {
                cfg.omega = parse_omega(&w)?;
            }
            fit_cmd(&ctx, cfg, &data)
        }
        Command::Cv { data } => cv_cmd(&ctx, file.fit.unwrap_or_default(), &data),
        Command::Bench { reps } => {
            let mut cfg = file.study.unwrap_or_default();
            if let Some(r) = reps {
                cfg.replications = r;
            }
            bench(&ctx, cfg)
        }
        Command::Report { study } => report(&ctx, &study),
    }
}

struct Context {
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
}

impl Context {
    fn out_dir(&self) -> Outcome<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| Failure::runtime(format!("{}: {e}", self.out.display())))?;
        Ok(&self.out)
    }

    fn manifest<T: serde::Serialize>(&self, command: &str, cfg: &T, seed: u64) -> Outcome<RunManifest> {
        let mut m = RunManifest::start(command, cfg, seed)?;
        if let Some(p) = &self.config {
            m.input(p)?;
        }
        Ok(m)
    }
}

fn parse_omega(s: &str) -> Outcome<OmegaSource> {
    match s {
        "cv" => Ok(OmegaSource::Cv),
        "theory" => Ok(OmegaSource::Theory),
        _ => s
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(|omega| OmegaSource::Explicit { omega })
            .map_err(|_| Failure::invalid(format!("--omega must be cv, theory or a comma-separated list, got {s:?}"))),
    }
}

fn read_input(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Tag library errors raised while parsing an input file with its path.
fn in_file<T>(path: &Path, r: hawkesnet::Result<T>) -> Outcome<T> {
    r.map_err(|e| {
        let f = Failure::from(e);
        Failure { msg: format!("{}: {}", path.display(), f.msg), ..f }
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::runtime(e.to_string()))?;
    fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn simulate(ctx: &Context, mut cfg: DgpConfig, params: Option<&Path>) -> Outcome {
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let (truth, covariates, events) = match params {
        None => {
            let s = sample_dgp(&cfg)?;
            (s.truth, s.covariates, s.events)
        }
        Some(p) => {
            let params: HawkesParams = serde_json::from_slice(&read_input(p)?)
                .map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?;
            let verdict = validate_params(&params);
            if !verdict.valid {
                return Err(Failure::invalid(format!("{}: {}", p.display(), verdict.failures.join("; "))));
            }
            if params.n() != cfg.n || params.beta.len() != cfg.beta_true.len() {
                return Err(Failure::invalid(format!(
                    "{}: parameters have n = {} and p = {}, configuration has n = {} and p = {}",
                    p.display(),
                    params.n(),
                    params.beta.len(),
                    cfg.n,
                    cfg.beta_true.len()
                )));
            }
            let (cov, _) = simulate_covariates(&cfg, &mut rng_stream(cfg.seed, 0, StreamKind::Covariates))?;
            let ev = simulate_hawkes(&params, &cov, cfg.t, cfg.event_cap, &mut rng_stream(cfg.seed, 0, StreamKind::Events))?;
            (DgpTruth { params, shocks: Vec::new() }, cov, ev)
        }
    };
    let out = ctx.out_dir()?;
    let mut m = ctx.manifest("simulate", &cfg, cfg.seed)?;
    if let Some(p) = params {
        m.input(p)?;
    }
    let ep = out.join("events.csv");
    let cp = out.join("covariates.csv");
    let tp = out.join("truth.json");
    write_events(&events, fs::File::create(&ep)?)?;
    write_covariates(&covariates, fs::File::create(&cp)?)?;
    write_json(&tp, &truth)?;
    for p in [&ep, &cp, &tp] {
        m.output(out, p)?;
    }
    let verdict = validate_params(&truth.params);
    m.note("T", &cfg.t)?;
    m.note("branching_factor", &verdict.branching_factor)?;
    m.note("event_counts", &events.counts())?;
    m.finish(out)?;
    println!("branching_factor {}", verdict.branching_factor);
    println!("event_counts {:?}", events.counts());
    println!("wrote {}", out.display());
    Ok(())
}

fn load_data(d: &DataArgs, m: &mut RunManifest) -> Outcome<(EventLog, CovariateField)> {
    if !(d.t_end > 0.0 && d.t_end.is_finite()) {
        return Err(Failure::invalid("--t-end must be positive and finite"));
    }
    let covariates = in_file(&d.covariates, read_covariates(read_input(&d.covariates)?.as_slice(), d.t_end))?;
    let events = in_file(&d.events, read_events(read_input(&d.events)?.as_slice(), d.t_end, Some(covariates.n())))?;
    m.input(&d.events)?;
    m.input(&d.covariates)?;
    m.note("T", &d.t_end)?;
    m.note("event_counts", &events.counts())?;
    Ok((events, covariates))
}

fn fit_cmd(ctx: &Context, mut cfg: FitConfig, d: &DataArgs) -> Outcome {
    if let Some(s) = ctx.seed {
        cfg.stage1.seed = s;
    }
    cfg.validate()?;
    let mut m = ctx.manifest("fit", &cfg, cfg.stage1.seed)?;
    let (events, covariates) = load_data(d, &mut m)?;
    let report = fit(&events, &covariates, &cfg)?;
    let out = ctx.out_dir()?;
    let p = out.join("fit.json");
    write_json(&p, &report)?;
    m.output(out, &p)?;
    m.finish(out)?;
    println!("theta beta {:?} gamma {}", report.theta.beta, report.theta.gamma);
    println!("omega {:?}", report.omega);
    println!("wrote {}", p.display());
    Ok(())
}

fn cv_cmd(ctx: &Context, mut cfg: FitConfig, d: &DataArgs) -> Outcome {
    if let Some(s) = ctx.seed {
        cfg.stage1.seed = s;
    }
    cfg.validate()?;
    let mut m = ctx.manifest("cv", &cfg, cfg.stage1.seed)?;
    let (events, covariates) = load_data(d, &mut m)?;
    let data = FitData::new(&events, &covariates, cfg.horizon)?;
    let cv: CvResult = cross_validate(&data, &cfg.cv, &cfg.stage1, &cfg.tuning)?;
    let out = ctx.out_dir()?;
    let p = out.join("cv.json");
    write_json(&p, &cv)?;
    m.output(out, &p)?;
    m.finish(out)?;
    println!("omega {:?}", cv.omega);
    println!("wrote {}", p.display());
    Ok(())
}

fn bench(ctx: &Context, mut cfg: StudyConfig) -> Outcome {
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let m = ctx.manifest("bench", &cfg, cfg.seed)?;
    let started = std::time::Instant::now();
    let result = run_study(&cfg)?;
    let mut m = m;
    m.note("runtime_seconds", &started.elapsed().as_secs_f64())?;
    let out = ctx.out_dir()?;
    emit_report(&result, out, m)?;
    tables::print(&result.metrics);
    println!("wrote {}", out.display());
    Ok(())
}

fn report(ctx: &Context, dir: &Path) -> Outcome {
    let same = |a: &Path, b: &Path| matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y);
    if same(dir, &ctx.out) {
        return Err(Failure::invalid("--out must differ from --study"));
    }
    let mp = dir.join("manifest.json");
    let prior: RunManifest = serde_json::from_slice(&read_input(&mp)?)
        .map_err(|e| Failure::invalid(format!("{}: {e}", mp.display())))?;
    let changed = prior.verify_outputs(dir).map_err(|e| Failure::invalid(format!("{}: {e}", dir.display())))?;
    if !changed.is_empty() {
        return Err(Failure::invalid(format!("{}: files changed since the run: {}", dir.display(), changed.join(", "))));
    }
    let (cfg, truth, _, records) = in_file(dir, load_study(dir))?;
    let metrics = compute_metrics(&cfg, &truth, &records);
    let mut m = ctx.manifest("report", &cfg, cfg.seed)?;
    m.input(&mp)?;
    let out = ctx.out_dir()?;
    for p in write_tables(&metrics, out)? {
        m.output(out, &p)?;
    }
    m.finish(out)?;
    tables::print(&metrics);
    println!("wrote {}", out.display());
    Ok(())
}
