//! Experiment runner: a JSON config names a space and a task list; each
//! task produces one JSON report (flows also write a CSV series) into the
//! output directory. Reports are deterministic given the config and seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;
use serde_json::json;

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

use crate::reports;
use crate::NumericFailure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    space: SpaceSource,
    #[serde(default)]
    seed: u64,
    tasks: Vec<TaskSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SpaceSource {
    Path(String),
    Fixture { fixture: FixtureRef },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureRef {
    name: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FnSpec {
    Path(String),
    Inline(BTreeMap<String, f64>),
}

impl FnSpec {
    fn load(&self, space: &RandomWalkSpace, base: &Path) -> Result<StateFunction> {
        match self {
            FnSpec::Path(path) => {
                let full = base.join(path);
                let text = fs::read_to_string(&full)
                    .with_context(|| format!("reading function file {}", full.display()))?;
                Ok(io::parse_function(space, &text)?)
            }
            FnSpec::Inline(values) => Ok(io::function_from_file(
                space,
                &io::FunctionFile {
                    values: values.clone(),
                },
            )?),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TaskSpec {
    Perim {
        set: String,
        window: Option<String>,
    },
    Tv {
        #[serde(rename = "fn")]
        function: FnSpec,
    },
    Cheeger {
        omega: Option<String>,
        mode: Option<String>,
        limit: Option<usize>,
    },
    Calibrable {
        omega: String,
        method: Option<String>,
        limit: Option<usize>,
    },
    Eigencheck {
        lambda: f64,
        #[serde(rename = "fn")]
        function: FnSpec,
    },
    Eigensearch {
        limit: Option<usize>,
        candidates: Option<Vec<String>>,
    },
    Flow {
        u0: FnSpec,
        tau: Option<f64>,
        t_end: Option<f64>,
        record_stride: Option<usize>,
    },
    Poincare {
        p: u32,
        q: u32,
        method: Option<String>,
    },
    Extinction {
        u0: FnSpec,
        tau: Option<f64>,
        t_end: Option<f64>,
        limit: Option<usize>,
    },
    Iso {
        n: f64,
        limit: Option<usize>,
    },
}

impl TaskSpec {
    fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Perim { .. } => "perim",
            TaskSpec::Tv { .. } => "tv",
            TaskSpec::Cheeger { .. } => "cheeger",
            TaskSpec::Calibrable { .. } => "calibrable",
            TaskSpec::Eigencheck { .. } => "eigencheck",
            TaskSpec::Eigensearch { .. } => "eigensearch",
            TaskSpec::Flow { .. } => "flow",
            TaskSpec::Poincare { .. } => "poincare",
            TaskSpec::Extinction { .. } => "extinction",
            TaskSpec::Iso { .. } => "iso",
        }
    }
}

struct TaskOutput {
    report: serde_json::Value,
    csv: Option<String>,
}

pub fn run(config_path: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));

    let space = match &config.space {
        SpaceSource::Path(path) => {
            let full = base.join(path);
            let text = fs::read_to_string(&full)
                .with_context(|| format!("reading space file {}", full.display()))?;
            io::parse_space(&text)?
        }
        SpaceSource::Fixture { fixture } => {
            tvflow_core::fixtures::build(&fixture.name, &fixture.params)?.space
        }
    };

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    // Tasks are independent: run them on a bounded worker pool, then write
    // the reports serially in task order.
    let results: Mutex<Vec<Option<Result<TaskOutput>>>> =
        Mutex::new((0..config.tasks.len()).map(|_| None).collect());
    let next: Mutex<usize> = Mutex::new(0);
    let workers = crate::thread_cap().min(config.tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= config.tasks.len() {
                        break;
                    }
                    let idx = *guard;
                    *guard += 1;
                    idx
                };
                let outcome = run_task(&space, &config.tasks[idx], config.seed, idx, base);
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    let results = results.into_inner().unwrap();
    for (idx, (spec, outcome)) in config.tasks.iter().zip(results).enumerate() {
        let outcome =
            outcome.expect("worker filled every slot").map_err(|e| -> anyhow::Error {
                if e.downcast_ref::<NumericFailure>().is_some() {
                    e
                } else {
                    NumericFailure(format!("task {idx} ({}) failed: {e:#}", spec.kind())).into()
                }
            })?;
        let stem = format!("task_{idx:02}_{}", spec.kind());
        let json_path = out_dir.join(format!("{stem}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&outcome.report)?)
            .with_context(|| format!("writing {}", json_path.display()))?;
        if let Some(csv) = outcome.csv {
            let csv_path = out_dir.join(format!("{stem}.csv"));
            fs::write(&csv_path, csv)
                .with_context(|| format!("writing {}", csv_path.display()))?;
        }
    }
    Ok(())
}

fn run_task(
    space: &RandomWalkSpace,
    spec: &TaskSpec,
    seed: u64,
    index: usize,
    base: &Path,
) -> Result<TaskOutput> {
    let report = |value: serde_json::Value| TaskOutput {
        report: value,
        csv: None,
    };
    match spec {
        TaskSpec::Perim { set, window } => {
            let e = io::parse_set(space, set)?;
            let rep = perimeter(space, &e);
            let localized = match window {
                Some(w) => Some(localized_perimeter(space, &e, &io::parse_set(space, w)?)),
                None => None,
            };
            Ok(report(serde_json::to_value(reports::perimeter_out(
                space, &e, &rep, localized,
            ))?))
        }
        TaskSpec::Tv { function } => {
            let u = function.load(space, base)?;
            let coarea = coarea_check(space, &u);
            Ok(report(json!({
                "tv": total_variation(space, &u),
                "coarea_rhs": coarea.rhs,
                "coarea_residual": coarea.residual,
            })))
        }
        TaskSpec::Cheeger { omega, mode, limit } => {
            let limit = limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT);
            let mode = mode.as_deref().unwrap_or("exhaustive");
            let rep = match omega {
                Some(spec) => {
                    let omega = io::parse_set(space, spec)?;
                    match mode {
                        "exhaustive" => cheeger_subset_exact(space, &omega, limit)?,
                        "dinkelbach" => cheeger_subset_dinkelbach(space, &omega)?,
                        other => return Err(anyhow!("unknown subset mode {other}")),
                    }
                }
                None => match mode {
                    "exhaustive" => cheeger_global_exhaustive(space, limit)?,
                    "ipm" => cheeger_global_ipm(
                        space,
                        &IpmOptions {
                            seed: seed.wrapping_add(index as u64),
                            ..IpmOptions::default()
                        },
                    )?,
                    other => return Err(anyhow!("unknown global mode {other}")),
                },
            };
            Ok(report(serde_json::to_value(reports::cheeger_out(
                space, &rep,
            ))?))
        }
        TaskSpec::Calibrable {
            omega,
            method,
            limit,
        } => {
            let omega = io::parse_set(space, omega)?;
            let method = match method.as_deref().unwrap_or("lp") {
                "lp" => CalibrabilityMethod::Lp,
                "exhaustive" => CalibrabilityMethod::Exhaustive {
                    limit: limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT),
                },
                other => return Err(anyhow!("unknown method {other}")),
            };
            let rep = is_calibrable(space, &omega, method)?;
            Ok(report(serde_json::to_value(reports::calibrable_out(
                space, &rep,
            ))?))
        }
        TaskSpec::Eigencheck { lambda, function } => {
            let u = function.load(space, base)?;
            let out = match verify_eigenpair(space, *lambda, &u, DEFAULT_CERTIFICATE_TOLERANCE) {
                Ok(cert) => reports::EigencheckOut {
                    feasible: true,
                    certificate: Some(reports::certificate_out(space, &cert)),
                    reason: None,
                },
                Err(EigenError::Infeasible(reason)) => reports::EigencheckOut {
                    feasible: false,
                    certificate: None,
                    reason: Some(format!("{reason:?}")),
                },
                Err(other) => return Err(other.into()),
            };
            Ok(report(serde_json::to_value(out)?))
        }
        TaskSpec::Eigensearch { limit, candidates } => {
            let mode = match candidates {
                Some(list) => {
                    let mut sets = Vec::new();
                    for spec in list {
                        sets.push(io::parse_set(space, spec)?);
                    }
                    SearchMode::Candidates(sets)
                }
                None => SearchMode::Exhaustive {
                    limit: limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT),
                },
            };
            let found = set_eigenpair_search(space, mode, DEFAULT_CERTIFICATE_TOLERANCE)?;
            let entries: Vec<reports::EigensearchEntryOut> = found
                .iter()
                .map(|e| reports::EigensearchEntryOut {
                    lambda: e.lambda,
                    set: e.set.labels(space),
                    residual: e.certificate.residuals.eigen_equation,
                })
                .collect();
            Ok(report(serde_json::to_value(entries)?))
        }
        TaskSpec::Flow {
            u0,
            tau,
            t_end,
            record_stride,
        } => {
            let u0 = u0.load(space, base)?;
            // Default step and horizon from the extinction scale when the
            // exact 2-Poincare constant is in reach.
            let lambda2 = if tau.is_none() || t_end.is_none() {
                poincare_constant(space, 2, 1, &PoincareMethod::ExactSmall { limit: 12 })
                    .ok()
                    .map(|r| r.constant)
            } else {
                None
            };
            let centered = u0.shifted(-space.mean(&u0));
            let hint = lambda2.map(|l| space.lp_norm(&centered, 2.0) / l);
            let tau = tau.unwrap_or_else(|| hint.map_or(1e-2, |h| (h / 200.0).max(1e-9)));
            let t_end = t_end.unwrap_or_else(|| hint.map_or(1.0, |h| 1.25 * h + tau));
            let mut config = FlowConfig::new(tau, t_end);
            config.record_stride = record_stride.unwrap_or(1);
            config.prox_tolerance = 1e-11;
            let traj = evolve(space, &u0, &config);
            let last = traj.diagnostics.last().expect("nonempty trajectory");
            Ok(TaskOutput {
                report: json!({
                    "tau": tau,
                    "t_end": t_end,
                    "steps_recorded": traj.times.len(),
                    "mean": traj.mean,
                    "final_tv": last.tv,
                    "final_dist2": last.dist2_mean,
                    "converged": traj.all_converged,
                }),
                csv: Some(reports::trajectory_csv(space, &traj)),
            })
        }
        TaskSpec::Poincare { p, q, method } => {
            let method = match method.as_deref().unwrap_or("exact") {
                "exact" => PoincareMethod::ExactSmall { limit: 12 },
                "ipm" => PoincareMethod::Ipm(IpmOptions {
                    seed: seed.wrapping_add(index as u64),
                    ..IpmOptions::default()
                }),
                "analytic" => PoincareMethod::Analytic,
                other => return Err(anyhow!("unknown method {other}")),
            };
            let rep = poincare_constant(space, *p, *q, &method)?;
            Ok(report(serde_json::to_value(reports::poincare_out(
                space, &rep,
            ))?))
        }
        TaskSpec::Extinction {
            u0,
            tau,
            t_end,
            limit,
        } => {
            let u0 = u0.load(space, base)?;
            let lambda2 = poincare_constant(
                space,
                2,
                1,
                &PoincareMethod::ExactSmall {
                    limit: limit.unwrap_or(12),
                },
            )?
            .constant;
            let centered = u0.shifted(-space.mean(&u0));
            let hint = space.lp_norm(&centered, 2.0) / lambda2;
            let tau = tau.unwrap_or((hint / 200.0).max(1e-9));
            let t_end = t_end.unwrap_or(1.5 * hint + tau);
            let mut config = FlowConfig::new(tau, t_end);
            config.prox_tolerance = 1e-12;
            let rep = extinction_analysis(space, &u0, &config, lambda2, DEFAULT_EXTINCTION_TOL)?;
            Ok(report(serde_json::to_value(reports::ExtinctionOut {
                t_observed: rep.t_observed,
                t_upper: rep.t_upper,
                t_lower: rep.t_lower,
                lambda2,
                tau,
                t_end,
            })?))
        }
        TaskSpec::Iso { n, limit } => {
            let profile = iso_profile(space, limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT))?;
            Ok(TaskOutput {
                report: json!({
                    "n": n,
                    "best_constant": best_iso_constant(&profile, *n),
                    "balanced_cheeger": profile.balanced_cheeger(),
                    "breakpoints": profile.breakpoints.len(),
                }),
                csv: Some(reports::profile_csv(space, &profile)),
            })
        }
    }
}
