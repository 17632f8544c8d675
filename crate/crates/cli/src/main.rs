//! `tvflow`: build and validate finite reversible random walk spaces, and
//! run the perimeter/Cheeger/eigenpair/flow analyses on them.

mod experiment;
mod reports;
mod selftest;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tvflow_core::cheeger::eigen::{
    set_eigenpair_search, verify_eigenpair, EigenError, SearchMode,
};
use tvflow_core::cheeger::{
    cheeger_global_exhaustive, cheeger_global_ipm, cheeger_subset_dinkelbach,
    cheeger_subset_exact, is_calibrable, CalibrabilityMethod, DEFAULT_CERTIFICATE_TOLERANCE,
    DEFAULT_EXHAUSTIVE_LIMIT,
};
use tvflow_core::flow::{
    evolve, extinction_analysis, poincare_constant, FlowConfig, PoincareMethod,
    DEFAULT_EXTINCTION_TOL,
};
use tvflow_core::geometry::{coarea_check, localized_perimeter, perimeter, total_variation};
use tvflow_core::io;
use tvflow_core::iso::{best_iso_constant, iso_profile};
use tvflow_core::solver::ipm::IpmOptions;
use tvflow_core::space::{RandomWalkSpace, StateFunction};

/// Marker for failures of numerical assertions inside a task; mapped to
/// exit code 1 (schema and usage problems exit with 2).
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for NumericFailure {}

#[derive(Parser)]
#[command(
    name = "tvflow",
    version,
    about = "total variation flow, Cheeger cuts and 1-Laplacian certificates \
             on finite reversible random walk spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpaceArg {
    /// Space file (graph or kernel JSON form).
    #[arg(long)]
    space: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a space file and emit its canonical kernel form.
    Build {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Perimeter report of a state set, optionally localized to a window.
    Perim {
        #[command(flatten)]
        space: SpaceArg,
        /// Comma-separated state labels.
        #[arg(long)]
        set: String,
        #[arg(long)]
        window: Option<String>,
    },
    /// Total variation of a function, with its level-set decomposition residual.
    Tv {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long = "fn")]
        function: PathBuf,
    },
    /// Cheeger constants: subset mode with --omega, global mode without.
    Cheeger {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        omega: Option<String>,
        /// exhaustive | dinkelbach (subset) or exhaustive | ipm (global).
        #[arg(long, default_value = "exhaustive")]
        mode: String,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Calibrability of a set by enumeration or flux feasibility.
    Calibrable {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        omega: String,
        /// lp | exhaustive
        #[arg(long, default_value = "lp")]
        method: String,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
        limit: usize,
    },
    /// Certify or refute an eigenpair candidate.
    Eigencheck {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CERTIFICATE_TOLERANCE)]
        tolerance: f64,
    },
    /// Search set-type eigenpairs, exhaustively or over given candidates.
    Eigensearch {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
        limit: usize,
        /// Semicolon-separated candidate sets, each a comma-joined label list.
        #[arg(long)]
        candidates: Option<String>,
        #[arg(long, default_value_t = DEFAULT_CERTIFICATE_TOLERANCE)]
        tolerance: f64,
    },
    /// Implicit-Euler total variation flow; emits a CSV time series.
    Flow {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        u0: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long = "t-end")]
        t_end: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "record-stride", default_value_t = 1)]
        record_stride: usize,
        #[arg(long = "prox-tolerance", default_value_t = 1e-9)]
        prox_tolerance: f64,
    },
    /// Poincare constant for the requested exponents.
    Poincare {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        q: u32,
        /// exact | ipm | analytic
        #[arg(long, default_value = "exact")]
        method: String,
        #[arg(long, default_value_t = 12)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extinction-time sandwich for the flow started at u0.
    Extinction {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        u0: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 12)]
        limit: usize,
    },
    /// Isoperimetric profile and its tight dimension constant.
    Iso {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
        limit: usize,
    },
    /// Emit a fixture space (or one of its named sets or functions).
    Fixture {
        #[arg(long)]
        name: String,
        /// Repeated key=value fixture parameters.
        #[arg(long = "param")]
        params: Vec<String>,
        /// space | sets | set:NAME | fn:NAME
        #[arg(long, default_value = "space")]
        emit: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every fixture check and print a pass/fail table.
    Selftest {
        #[arg(long)]
        filter: Option<String>,
    },
    /// Run an experiment config: one report per task into a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<NumericFailure>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn load_space(path: &Path) -> Result<RandomWalkSpace> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading space file {}", path.display()))?;
    io::parse_space(&text).with_context(|| format!("parsing space file {}", path.display()))
}

fn load_function(space: &RandomWalkSpace, path: &Path) -> Result<StateFunction> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading function file {}", path.display()))?;
    io::parse_function(space, &text)
        .with_context(|| format!("parsing function file {}", path.display()))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{content}"),
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Build { space, out } => {
            let space = load_space(&space.space)?;
            eprintln!(
                "{}",
                serde_json::to_string_pretty(&reports::validation_out(&space))?
            );
            emit(&out, &io::space_to_json(&space))
        }
        Command::Perim { space, set, window } => {
            let space = load_space(&space.space)?;
            let e = io::parse_set(&space, &set)?;
            let report = perimeter(&space, &e);
            let localized = match window {
                Some(w) => {
                    let win = io::parse_set(&space, &w)?;
                    Some(localized_perimeter(&space, &e, &win))
                }
                None => None,
            };
            print_json(&reports::perimeter_out(&space, &e, &report, localized))
        }
        Command::Tv { space, function } => {
            let space = load_space(&space.space)?;
            let u = load_function(&space, &function)?;
            let tv = total_variation(&space, &u);
            let coarea = coarea_check(&space, &u);
            print_json(&serde_json::json!({
                "tv": tv,
                "coarea_rhs": coarea.rhs,
                "coarea_residual": coarea.residual,
            }))
        }
        Command::Cheeger {
            space,
            omega,
            mode,
            limit,
            seed,
        } => {
            let space = load_space(&space.space)?;
            let report = match omega {
                Some(spec) => {
                    let omega = io::parse_set(&space, &spec)?;
                    match mode.as_str() {
                        "exhaustive" => cheeger_subset_exact(&space, &omega, limit)?,
                        "dinkelbach" => cheeger_subset_dinkelbach(&space, &omega)?,
                        other => bail!("unknown subset mode {other} (exhaustive | dinkelbach)"),
                    }
                }
                None => match mode.as_str() {
                    "exhaustive" => cheeger_global_exhaustive(&space, limit)?,
                    "ipm" => cheeger_global_ipm(
                        &space,
                        &IpmOptions {
                            seed,
                            ..IpmOptions::default()
                        },
                    )?,
                    other => bail!("unknown global mode {other} (exhaustive | ipm)"),
                },
            };
            print_json(&reports::cheeger_out(&space, &report))
        }
        Command::Calibrable {
            space,
            omega,
            method,
            limit,
        } => {
            let space = load_space(&space.space)?;
            let omega = io::parse_set(&space, &omega)?;
            let method = match method.as_str() {
                "lp" => CalibrabilityMethod::Lp,
                "exhaustive" => CalibrabilityMethod::Exhaustive { limit },
                other => bail!("unknown method {other} (lp | exhaustive)"),
            };
            let report = is_calibrable(&space, &omega, method)?;
            print_json(&reports::calibrable_out(&space, &report))
        }
        Command::Eigencheck {
            space,
            lambda,
            function,
            tolerance,
        } => {
            let space = load_space(&space.space)?;
            let u = load_function(&space, &function)?;
            let out = match verify_eigenpair(&space, lambda, &u, tolerance) {
                Ok(cert) => reports::EigencheckOut {
                    feasible: true,
                    certificate: Some(reports::certificate_out(&space, &cert)),
                    reason: None,
                },
                Err(EigenError::Infeasible(reason)) => reports::EigencheckOut {
                    feasible: false,
                    certificate: None,
                    reason: Some(format!("{reason:?}")),
                },
                Err(other) => return Err(other.into()),
            };
            print_json(&out)
        }
        Command::Eigensearch {
            space,
            limit,
            candidates,
            tolerance,
        } => {
            let space = load_space(&space.space)?;
            let mode = match candidates {
                Some(spec) => {
                    let mut sets = Vec::new();
                    for part in spec.split(';').filter(|s| !s.trim().is_empty()) {
                        sets.push(io::parse_set(&space, part)?);
                    }
                    SearchMode::Candidates(sets)
                }
                None => SearchMode::Exhaustive { limit },
            };
            let found = set_eigenpair_search(&space, mode, tolerance)?;
            let entries: Vec<reports::EigensearchEntryOut> = found
                .iter()
                .map(|e| reports::EigensearchEntryOut {
                    lambda: e.lambda,
                    set: e.set.labels(&space),
                    residual: e.certificate.residuals.eigen_equation,
                })
                .collect();
            print_json(&entries)
        }
        Command::Flow {
            space,
            u0,
            tau,
            t_end,
            out,
            record_stride,
            prox_tolerance,
        } => {
            let space = load_space(&space.space)?;
            let u0 = load_function(&space, &u0)?;
            let mut config = FlowConfig::new(tau, t_end);
            config.record_stride = record_stride;
            config.prox_tolerance = prox_tolerance;
            let traj = evolve(&space, &u0, &config);
            if !traj.all_converged {
                eprintln!("warning: inner solver hit its iteration cap on some steps");
            }
            emit(&out, &reports::trajectory_csv(&space, &traj))
        }
        Command::Poincare {
            space,
            p,
            q,
            method,
            limit,
            seed,
        } => {
            let space = load_space(&space.space)?;
            let method = match method.as_str() {
                "exact" => PoincareMethod::ExactSmall { limit },
                "ipm" => PoincareMethod::Ipm(IpmOptions {
                    seed,
                    ..IpmOptions::default()
                }),
                "analytic" => PoincareMethod::Analytic,
                other => bail!("unknown method {other} (exact | ipm | analytic)"),
            };
            let report = poincare_constant(&space, p, q, &method)?;
            print_json(&reports::poincare_out(&space, &report))
        }
        Command::Extinction {
            space,
            u0,
            tau,
            t_end,
            limit,
        } => {
            let space = load_space(&space.space)?;
            let u0 = load_function(&space, &u0)?;
            let lambda2 = poincare_constant(&space, 2, 1, &PoincareMethod::ExactSmall { limit })?
                .constant;
            let centered = u0.shifted(-space.mean(&u0));
            let t_upper_hint = space.lp_norm(&centered, 2.0) / lambda2;
            let tau = tau.unwrap_or_else(|| (t_upper_hint / 200.0).max(1e-6));
            let t_end = t_end.unwrap_or(1.5 * t_upper_hint + tau);
            let mut config = FlowConfig::new(tau, t_end);
            config.prox_tolerance = 1e-12;
            let report =
                extinction_analysis(&space, &u0, &config, lambda2, DEFAULT_EXTINCTION_TOL)?;
            print_json(&reports::ExtinctionOut {
                t_observed: report.t_observed,
                t_upper: report.t_upper,
                t_lower: report.t_lower,
                lambda2,
                tau,
                t_end,
            })
        }
        Command::Iso {
            space,
            n,
            out,
            limit,
        } => {
            let space = load_space(&space.space)?;
            let profile = iso_profile(&space, limit)?;
            let i_n = best_iso_constant(&profile, n);
            eprintln!(
                "{}",
                serde_json::json!({
                    "n": n,
                    "best_constant": i_n,
                    "balanced_cheeger": profile.balanced_cheeger(),
                    "breakpoints": profile.breakpoints.len(),
                })
            );
            emit(&out, &reports::profile_csv(&space, &profile))
        }
        Command::Fixture {
            name,
            params,
            emit: what,
            out,
        } => {
            let mut map = BTreeMap::new();
            for kv in &params {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| anyhow!("parameter {kv} is not key=value"))?;
                map.insert(k.trim().to_string(), v.trim().parse::<f64>()?);
            }
            let fixture = tvflow_core::fixtures::build(&name, &map)?;
            match what.as_str() {
                "space" => emit(&out, &io::space_to_json(&fixture.space)),
                "sets" => {
                    let sets: BTreeMap<String, Vec<String>> = fixture
                        .sets
                        .iter()
                        .map(|(k, v)| (k.clone(), v.labels(&fixture.space)))
                        .collect();
                    emit(&out, &serde_json::to_string_pretty(&sets)?)
                }
                other => {
                    if let Some(set_name) = other.strip_prefix("set:") {
                        let set = fixture
                            .sets
                            .get(set_name)
                            .ok_or_else(|| anyhow!("fixture has no set named {set_name}"))?;
                        emit(&out, &io::set_to_string(&fixture.space, set))
                    } else if let Some(fn_name) = other.strip_prefix("fn:") {
                        let f = fixture
                            .functions
                            .get(fn_name)
                            .ok_or_else(|| anyhow!("fixture has no function named {fn_name}"))?;
                        emit(&out, &io::function_to_json(&fixture.space, f))
                    } else {
                        bail!("unknown emit target {other} (space | sets | set:NAME | fn:NAME)")
                    }
                }
            }
        }
        Command::Selftest { filter } => selftest::run(filter.as_deref()),
        Command::Run { config, out_dir } => experiment::run(&config, &out_dir),
    }
}

/// Worker cap for concurrent experiment tasks.
pub fn thread_cap() -> usize {
    std::env::var("TVFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

pub use reports::*;
