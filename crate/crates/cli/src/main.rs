use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wsnalloc::montecarlo::{
    diagnostics_csv, results_csv, sweep_budget, sweep_pfa, sweep_samples, Quantizer, Trials,
};
use wsnalloc::quantize::QuantSpec;
use wsnalloc::{exec, solve_centralized, solve_distributed, Config, Error, PowerAllocation};

/// Exit status for configuration and validation errors.
const EXIT_CONFIG: u8 = 2;
/// Exit status when an iterative solver fails to converge.
const EXIT_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wsnalloc",
    version,
    about = "Quantized distributed detection: power allocation and Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for per-sensor transmit powers and bit budgets.
    Allocate {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run a Monte Carlo detection sweep over the grid named by `--sweep`.
    Detect {
        config: PathBuf,
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Trials per hypothesis; defaults to `detect.trials` in the config.
        #[arg(long)]
        trials: Option<usize>,
        /// Quantizer model; defaults to `detect.quantizer` in the config.
        #[arg(long, value_enum)]
        quantizer: Option<QuantizerArg>,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Record the distributed solver's iterates.
    Trace {
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(clap::Args)]
struct OutDir {
    /// Output directory.
    #[arg(long = "out", env = "WSNALLOC_OUT_DIR", default_value = "out")]
    dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Central,
    Distributed,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuantizerArg {
    WholeBits,
    Additive,
}

impl From<QuantizerArg> for Quantizer {
    fn from(q: QuantizerArg) -> Self {
        match q {
            QuantizerArg::WholeBits => Quantizer::WholeBits,
            QuantizerArg::Additive => Quantizer::Additive,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Pt,
    Pfa,
    N,
}

impl Sweep {
    fn name(self) -> &'static str {
        match self {
            Sweep::Pt => "pt",
            Sweep::Pfa => "pfa",
            Sweep::N => "n",
        }
    }
}

enum Failure {
    Config(String),
    Convergence {
        message: String,
        trace: Option<PathBuf>,
    },
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::Topology(_)
            | Error::NoSignal
            | Error::Usage(_) => Failure::Config(e.to_string()),
            e if e.is_convergence() => Failure::Convergence {
                message: e.to_string(),
                trace: None,
            },
            e => Failure::Other(e.into()),
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: String,
    scenario_digest: String,
    schema_version: u32,
    versions: Versions,
    files: Vec<String>,
    timings_ms: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct Versions {
    wsnalloc: &'static str,
    cli: &'static str,
}

struct Run {
    command: &'static str,
    config_path: PathBuf,
    config: Config,
    stem: String,
    dir: PathBuf,
    files: Vec<PathBuf>,
    timings: Vec<(String, f64)>,
}

impl Run {
    fn start(command: &'static str, config_path: &Path, dir: &Path) -> Result<Self, Failure> {
        let config = Config::load(config_path)?;
        let stem = config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        fs::create_dir_all(dir)?;
        Ok(Self {
            command,
            config_path: config_path.to_path_buf(),
            config,
            stem,
            dir: dir.to_path_buf(),
            files: Vec::new(),
            timings: Vec::new(),
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.stem))
    }

    fn write(&mut self, suffix: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = self.path(suffix);
        fs::write(&path, contents)?;
        self.files.push(path.clone());
        Ok(path)
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings
            .push((label.to_string(), t0.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn finish(self) -> Result<(), Failure> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config_path.display().to_string(),
            scenario_digest: self.config.digest(),
            schema_version: self.config.schema_version,
            versions: Versions {
                wsnalloc: wsnalloc::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            files: self.files.iter().map(|p| p.display().to_string()).collect(),
            timings_ms: self.timings,
        };
        let path = self
            .dir
            .join(format!("{}_{}_manifest.json", self.stem, self.command));
        let json = serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::from)?;
        fs::write(&path, json + "\n")?;
        Ok(())
    }
}

/// Writes the partial trace carried by a dual-ascent failure, if any.
fn convergence_failure(run: &mut Run, err: Error) -> Failure {
    let trace = match &err {
        Error::DualAscentNonConvergence { trace, .. } => {
            run.write("trace_failed.csv", &trace.to_csv()).ok()
        }
        _ => None,
    };
    match Failure::from(err) {
        Failure::Convergence { message, .. } => Failure::Convergence { message, trace },
        other => other,
    }
}

const ALLOCATION_HEADER: &str =
    "i,h_i,sigma2_i,xi_i,p_central,p_distributed,bits_real,bits_int,censored";

fn allocation_csv(
    sc: &wsnalloc::Scenario,
    central: Option<&PowerAllocation>,
    distributed: Option<&PowerAllocation>,
) -> String {
    let mut out = format!("{ALLOCATION_HEADER}\n");
    let cell = |a: Option<&PowerAllocation>, i: usize| {
        a.map(|a| a.powers()[i].to_string()).unwrap_or_default()
    };
    // bits follow the distributed allocation when it was computed
    let bits_from = distributed.or(central).expect("at least one method");
    for (i, s) in sc.sensors().iter().enumerate() {
        let q = QuantSpec::from_power(bits_from.powers()[i], s.h(), s.zeta(), sc.u());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            s.h(),
            s.sigma2(),
            s.xi(),
            cell(central, i),
            cell(distributed, i),
            q.bits_real,
            q.bits_int,
            q.censored
        );
    }
    out
}

fn cmd_allocate(config: &Path, method: Method, out: &Path) -> Result<(), Failure> {
    let mut run = Run::start("allocate", config, out)?;
    let sc = run.config.scenario()?;
    let central = match method {
        Method::Central | Method::Both => Some(run.timed("central", || solve_centralized(&sc))?),
        Method::Distributed => None,
    };
    let distributed = match method {
        Method::Distributed | Method::Both => {
            match run.timed("distributed", || solve_distributed(&sc)) {
                Ok((alloc, _)) => Some(alloc),
                Err(e) => return Err(convergence_failure(&mut run, e)),
            }
        }
        Method::Central => None,
    };
    let path = run.write(
        "allocation.csv",
        &allocation_csv(&sc, central.as_ref(), distributed.as_ref()),
    )?;
    if let (Some(c), Some(d)) = (&central, &distributed) {
        let diff: f64 = c
            .powers()
            .iter()
            .zip(d.powers())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let base: f64 = c.powers().iter().map(|a| a * a).sum::<f64>().sqrt();
        println!("relative gap distributed vs central: {:.3e}", diff / base);
    }
    println!("wrote {}", path.display());
    run.finish()
}

struct DetectArgs {
    sweep: Sweep,
    trials: Option<usize>,
    quantizer: Option<QuantizerArg>,
    workers: Option<usize>,
}

fn cmd_detect(config: &Path, args: DetectArgs, out: &Path) -> Result<(), Failure> {
    let DetectArgs {
        sweep,
        trials,
        quantizer,
        workers,
    } = args;
    let mut run = Run::start("detect", config, out)?;
    let cfg = run.config.clone();
    let sc = cfg.scenario()?;
    let schemes = cfg.schemes()?;
    let count = trials.unwrap_or(cfg.detect.trials);
    if count == 0 {
        return Err(Failure::Config("--trials must be >= 1".into()));
    }
    let quantizer = match quantizer {
        Some(q) => q.into(),
        None => cfg.quantizer()?,
    };
    let trials = Trials::new(count).quantizer(quantizer);
    let d = &cfg.detect;
    let missing = |grid: &str| {
        Failure::Config(format!(
            "field `detect.{grid}`: required by --sweep {}",
            sweep.name()
        ))
    };
    let rows = run.timed("simulate", || {
        exec::with_workers(workers, || match sweep {
            Sweep::Pt if d.pt_grid.is_empty() => Err(missing("pt_grid")),
            Sweep::Pt => Ok(sweep_budget(&sc, &schemes, &d.pt_grid, trials)?),
            Sweep::Pfa if d.pfa_grid.is_empty() => Err(missing("pfa_grid")),
            Sweep::Pfa => Ok(sweep_pfa(&sc, &schemes, &d.pfa_grid, &d.n_grid, trials)?),
            Sweep::N if d.n_grid.is_empty() => Err(missing("n_grid")),
            Sweep::N => Ok(sweep_samples(&sc, &schemes, &d.n_grid, trials)?),
        })
    })?;
    let name = sweep.name();
    let path = run.write(&format!("detect_{name}.csv"), &results_csv(&rows))?;
    run.write(
        &format!("detect_{name}_diagnostics.csv"),
        &diagnostics_csv(&rows),
    )?;
    println!(
        "wrote {} ({} rows, {count} trials per hypothesis, {} quantizer)",
        path.display(),
        rows.len(),
        quantizer.name()
    );
    run.finish()
}

fn cmd_trace(config: &Path, out: &Path) -> Result<(), Failure> {
    let mut run = Run::start("trace", config, out)?;
    let sc = run.config.scenario()?;
    let (alloc, trace) = match run.timed("distributed", || solve_distributed(&sc)) {
        Ok(r) => r,
        Err(e) => return Err(convergence_failure(&mut run, e)),
    };
    let path = run.write("trace.csv", &trace.to_csv())?;
    println!(
        "iterations to kappa: {}, consensus rounds total: {}, final rel_step: {:e}, lambda0: {:e}, total power: {}",
        trace.iterations(),
        trace.total_consensus_rounds(),
        trace.final_rel_step(),
        alloc.lambda0(),
        alloc.total()
    );
    println!("wrote {}", path.display());
    run.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Allocate {
            config,
            method,
            out,
        } => cmd_allocate(config, *method, &out.dir),
        Command::Detect {
            config,
            sweep,
            trials,
            quantizer,
            workers,
            out,
        } => cmd_detect(
            config,
            DetectArgs {
                sweep: *sweep,
                trials: *trials,
                quantizer: *quantizer,
                workers: *workers,
            },
            &out.dir,
        ),
        Command::Trace { config, out } => cmd_trace(config, &out.dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Convergence { message, trace }) => {
            eprintln!("error: {message}");
            if let Some(path) = trace {
                eprintln!("trace written to {}", path.display());
            }
            ExitCode::from(EXIT_CONVERGENCE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
