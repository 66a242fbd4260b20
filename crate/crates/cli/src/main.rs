//! `chaos`: sample, classify and scan the built-in ODE systems.

mod run;
mod spec;

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chaos_core::integrator::IntegrationConfig;
use chaos_core::lyapunov::LyapunovConfig;
use chaos_core::model::{parse_range, BoxCoord};
use chaos_core::models::{catalog, parse_assignment};
use chaos_core::sampler::MHConfig;
use chaos_core::scan::BifurcationConfig;
use clap::{Args, Parser, Subcommand};

use run::{execute, load_manifest, CliError};
use spec::{BifurcationRun, LyapunovRun, RunSpec, SampleRun, SystemSpec, TrajectoryRun};

#[derive(Parser)]
#[command(name = "chaos", version, about = "Explore chaotic regimes of ODE models")]
struct Cli {
    /// Random seed; only sampling consumes randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in systems.
    Systems {
        #[arg(long)]
        json: bool,
    },
    /// Lyapunov spectrum at one point.
    Lyapunov(LyapunovArgs),
    /// Batch of annealed Metropolis-Hastings samples inside a box.
    Sample(SampleArgs),
    /// Bifurcation scan over one parameter.
    Bifurcate(BifurcateArgs),
    /// Integrate one trajectory to CSV.
    Trajectory(TrajectoryArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of the recorded path.
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long)]
    system: String,
    /// `name=value`; initial conditions as `ic.<state>=value`.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Comma-separated coefficients for quadratic3.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Option<Vec<f64>>,
    /// JSON model configuration for pgpr.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

#[derive(Args)]
struct LyapunovOpts {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Initial horizon; doubled until the sign pattern settles.
    #[arg(long = "T0", default_value_t = 500.0)]
    horizon: f64,
    #[arg(long, default_value_t = 6)]
    max_doublings: u32,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    lyap: LyapunovOpts,
    /// Also write the JSON result (and a manifest) here.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    lyap: LyapunovOpts,
    /// `name=lo:hi`, repeated once per axis.
    #[arg(long = "box", value_name = "NAME=LO:HI", required = true, allow_hyphen_values = true)]
    search_box: Vec<String>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 300)]
    phase1_steps: usize,
    #[arg(long, default_value_t = 20.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.05)]
    proposal_scale: f64,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct BifurcateArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    param: String,
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    range: String,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long)]
    t_total: Option<f64>,
    /// Window start, or `start:end` with end equal to the total time.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value_t = 500)]
    window_samples: usize,
    /// Comma-separated state names; all states when omitted.
    #[arg(long, value_delimiter = ',')]
    observables: Vec<String>,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long)]
    workers: Option<usize>,
    /// Write the scan as JSON instead of CSV.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl SystemArgs {
    fn resolve(&self) -> Result<(SystemSpec, BTreeMap<String, f64>), CliError> {
        let model_config = match &self.model_config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                Some(serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
            }
            None => None,
        };
        let spec = SystemSpec {
            id: self.system.clone(),
            coefficients: self.coeffs.clone(),
            model_config,
        };
        let mut set = BTreeMap::new();
        for a in &self.set {
            let (k, v) = parse_assignment(a)?;
            set.insert(k, v);
        }
        Ok((spec, set))
    }
}

impl LyapunovOpts {
    fn config(&self) -> LyapunovConfig {
        LyapunovConfig {
            horizon: self.horizon,
            max_doublings: self.max_doublings,
            integration: IntegrationConfig {
                dt: self.dt,
                t0: self.t0,
                ..IntegrationConfig::default()
            },
            ..LyapunovConfig::default()
        }
    }
}

fn bifurcation_config(a: &BifurcateArgs) -> Result<BifurcationConfig, CliError> {
    let (lo, hi) = parse_range(&a.range)?;
    let mut cfg = BifurcationConfig {
        param_name: a.param.clone(),
        lo,
        hi,
        n_param_points: a.points,
        window_samples: a.window_samples,
        observables: a.observables.clone(),
        ..BifurcationConfig::default()
    };
    if let Some(t) = a.t_total {
        cfg.t_total = t;
    }
    match a.window.as_deref() {
        Some(w) if w.contains(':') => {
            let (start, end) = parse_range(w)?;
            if a.t_total.is_some_and(|t| t != end) {
                return Err(usage("window end must equal --t-total"));
            }
            cfg.window_start = start;
            cfg.t_total = end;
        }
        Some(w) => cfg.window_start = w.trim().parse().map_err(|e| usage(format!("bad window `{w}`: {e}")))?,
        None if a.t_total.is_some() => {
            // Keep the default window length when only the end moves.
            let d = BifurcationConfig::default();
            cfg.window_start = (cfg.t_total - (d.t_total - d.window_start)).max(0.0);
        }
        None => {}
    }
    Ok(cfg)
}

fn build_spec(command: Command, seed: Option<u64>) -> Result<RunSpec, CliError> {
    Ok(match command {
        Command::Lyapunov(a) => {
            let (system, set) = a.system.resolve()?;
            RunSpec::Lyapunov(LyapunovRun {
                system,
                set,
                lyapunov: a.lyap.config(),
                out: a.out,
            })
        }
        Command::Sample(a) => {
            let (system, set) = a.system.resolve()?;
            let search_box = a
                .search_box
                .iter()
                .map(|s| BoxCoord::parse(s))
                .collect::<chaos_core::Result<Vec<_>>>()?;
            let mh = MHConfig {
                steps: a.steps,
                phase1_steps: a.phase1_steps,
                alpha_max: a.alpha_max,
                proposal_scale: a.proposal_scale,
                seed: seed.unwrap_or(0),
                ..MHConfig::default()
            };
            RunSpec::Sample(SampleRun {
                system,
                set,
                search_box,
                k: a.k,
                mh,
                lyapunov: a.lyap.config(),
                workers: a.workers.unwrap_or_else(default_workers),
                out: a.out,
            })
        }
        Command::Bifurcate(ref a) => {
            let (system, set) = a.system.resolve()?;
            let mut scan = bifurcation_config(a)?;
            if scan.observables.is_empty() {
                scan.observables = system.build()?.state_names();
            }
            RunSpec::Bifurcate(BifurcationRun {
                system,
                set,
                scan,
                integration: IntegrationConfig::with_dt(a.dt),
                workers: a.workers.unwrap_or_else(default_workers),
                json: a.json,
                out: a.out.clone(),
            })
        }
        Command::Trajectory(a) => {
            let (system, set) = a.system.resolve()?;
            RunSpec::Trajectory(TrajectoryRun {
                system,
                set,
                t_end: a.t_end,
                integration: IntegrationConfig {
                    dt: a.dt,
                    t0: a.t0,
                    ..IntegrationConfig::default()
                },
                stride: a.stride,
                out: a.out,
            })
        }
        Command::Systems { .. } | Command::Serve(_) | Command::Replay { .. } => unreachable!("not a run"),
    })
}

fn print_systems(json: bool) -> io::Result<()> {
    let mut out = io::stdout().lock();
    let entries = catalog();
    if json {
        serde_json::to_writer_pretty(&mut out, &entries)?;
        return writeln!(out);
    }
    for e in entries {
        writeln!(out, "{}  ({}-dimensional{})", e.id, e.dim, if e.time_dependent { ", forced" } else { "" })?;
        writeln!(out, "  {}", e.description)?;
        let states: Vec<String> = e
            .state_names
            .iter()
            .zip(&e.state_defaults)
            .map(|(n, d)| match d {
                Some(v) => format!("{n}={v}"),
                None => n.clone(),
            })
            .collect();
        writeln!(out, "  states: {}", states.join(", "))?;
        for p in &e.params {
            let default = p.default.map_or_else(|| "required".to_owned(), |v| v.to_string());
            let units = if p.units.is_empty() { String::new() } else { format!(" [{}]", p.units) };
            writeln!(out, "  {:<12} {default}{units}", p.name)?;
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let cfg = chaos_service::ServiceConfig {
        port: a.port,
        data_dir: a.data_dir,
        workers: a.workers.unwrap_or_else(default_workers),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(chaos_service::serve(cfg, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let spec = match cli.command {
        Command::Systems { json } => {
            match print_systems(json) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => return Ok(false),
            }
        }
        Command::Serve(a) => {
            serve(a)?;
            return Ok(false);
        }
        Command::Replay { manifest, out } => {
            let mut spec = load_manifest(&manifest)?.run;
            if let Some(out) = out {
                spec.set_out(out);
            }
            spec
        }
        other => build_spec(other, cli.seed)?,
    };
    let outcome = execute(&spec, &mut io::stdout().lock())?;
    Ok(outcome.indeterminate)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(3),
        Err(e) => {
            eprintln!("chaos: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
