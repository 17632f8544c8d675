//! The total variation flow `u_t ∈ Δ_1 u` by implicit Euler steps, with
//! the decay, extinction and dual-norm analysis that frames it.

pub mod poincare;
pub mod prox;

use thiserror::Error;

use crate::geometry::total_variation;
use crate::solver::simplex::{self, LinearProgram, LpOutcome, INF};
use crate::space::{RandomWalkSpace, StateFunction};

pub use poincare::{poincare_constant, PoincareMethod, PoincareReport};
pub use prox::{tv_prox, ProxOptions, ProxSolution};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("function has nonzero nu-mean {mean:.3e}; the dual norm is infinite")]
    NonzeroMean { mean: f64 },
    #[error("no extinction before t_end = {t_end} although the upper bound is {t_upper}")]
    HorizonTooShort { t_end: f64, t_upper: f64 },
    #[error("dual-norm linear program failed: {0}")]
    DualNormFailed(String),
    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
}

#[derive(Debug, Clone, Copy)]
pub struct FlowConfig {
    pub tau: f64,
    pub t_end: f64,
    /// Relative duality-gap factor; the absolute per-step threshold is
    /// `prox_tolerance * (1 + ||f||_{L^2(nu)})`.
    pub prox_tolerance: f64,
    pub max_inner_iters: usize,
    pub record_stride: usize,
}

impl FlowConfig {
    pub fn new(tau: f64, t_end: f64) -> Self {
        assert!(tau > 0.0 && t_end >= 0.0);
        FlowConfig {
            tau,
            t_end,
            prox_tolerance: 1e-9,
            max_inner_iters: 400_000,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub time: f64,
    pub mass: f64,
    pub tv: f64,
    /// `|| u - mean(u0) ||_{L^2(nu)}`.
    pub dist2_mean: f64,
    pub inner_iters: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<StateFunction>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// nu-mean of the initial datum, the conserved quantity.
    pub mean: f64,
    pub all_converged: bool,
}

impl FlowTrajectory {
    /// Snapshot of the last completed step at or before `t` (the implicit
    /// Euler path is a step function in time).
    pub fn sample_at(&self, t: f64) -> &StateFunction {
        let mut idx = 0;
        for (k, &time) in self.times.iter().enumerate() {
            if time <= t + 1e-15 {
                idx = k;
            } else {
                break;
            }
        }
        &self.snapshots[idx]
    }

    pub fn last(&self) -> &StateFunction {
        self.snapshots.last().expect("trajectory records t = 0")
    }
}

/// Implicit Euler: `u^{k+1} = prox_{tau TV}(u^k)`, dual warm-started
/// across steps. Records every `record_stride`-th step plus the endpoint.
pub fn evolve(space: &RandomWalkSpace, u0: &StateFunction, config: &FlowConfig) -> FlowTrajectory {
    space.check_function(u0);
    let mean = space.mean(u0);
    let steps = if config.t_end <= 0.0 {
        0
    } else {
        (config.t_end / config.tau - 1e-9).ceil().max(0.0) as usize
    };
    let stride = config.record_stride.max(1);

    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::new();
    let mut all_converged = true;

    let record =
        |times: &mut Vec<f64>,
         snapshots: &mut Vec<StateFunction>,
         diagnostics: &mut Vec<StepDiagnostics>,
         space: &RandomWalkSpace,
         u: &StateFunction,
         t: f64,
         inner: usize,
         gap: f64| {
            let centered = u.shifted(-mean);
            diagnostics.push(StepDiagnostics {
                time: t,
                mass: space.integral(u),
                tv: total_variation(space, u),
                dist2_mean: space.lp_norm(&centered, 2.0),
                inner_iters: inner,
                gap,
            });
            times.push(t);
            snapshots.push(u.clone());
        };

    record(
        &mut times,
        &mut snapshots,
        &mut diagnostics,
        space,
        u0,
        0.0,
        0,
        0.0,
    );
    let mut current = u0.clone();
    let mut warm: Option<Vec<f64>> = None;
    for k in 1..=steps {
        let scale = 1.0 + space.lp_norm(&current, 2.0);
        let options = ProxOptions {
            gap_tolerance: config.prox_tolerance * scale,
            max_iters: config.max_inner_iters,
        };
        let sol = tv_prox(space, &current, config.tau, &options, warm.as_deref());
        all_converged &= sol.converged;
        current = sol.u;
        warm = Some(sol.dual);
        if k % stride == 0 || k == steps {
            record(
                &mut times,
                &mut snapshots,
                &mut diagnostics,
                space,
                &current,
                k as f64 * config.tau,
                sol.iters,
                sol.gap,
            );
        }
    }
    FlowTrajectory {
        times,
        snapshots,
        diagnostics,
        mean,
        all_converged,
    }
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// Worst violation of the ordered-contraction bound across recorded
    /// times and the exponents 1, 2, infinity.
    pub max_violation: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Contraction and order preservation along two flows with the same
/// config: `||(u(t) - v(t))^+||_q <= ||(u0 - v0)^+||_q` for q in 1, 2, inf.
pub fn comparison_check(
    space: &RandomWalkSpace,
    u0: &StateFunction,
    v0: &StateFunction,
    config: &FlowConfig,
) -> ComparisonReport {
    let traj_u = evolve(space, u0, config);
    let traj_v = evolve(space, v0, config);
    let scale = 1.0 + space.lp_norm(u0, 2.0) + space.lp_norm(v0, 2.0);
    let slack = 10.0 * config.prox_tolerance * scale;
    let mut max_violation: f64 = 0.0;
    let qs = [1.0, 2.0, f64::INFINITY];
    let initial = u0.zip(v0, |a, b| (a - b).max(0.0));
    for (su, sv) in traj_u.snapshots.iter().zip(&traj_v.snapshots) {
        let positive_part = su.zip(sv, |a, b| (a - b).max(0.0));
        for &q in &qs {
            let now = space.lp_norm(&positive_part, q);
            let start = space.lp_norm(&initial, q);
            max_violation = max_violation.max(now - start);
        }
    }
    ComparisonReport {
        max_violation,
        slack,
        holds: max_violation <= slack,
    }
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    /// max over recorded positive times of `lhs / bound`.
    pub tightness: f64,
    pub holds: bool,
}

/// `||u(t) - mean||_{L^1} <= ||u0||^2_{L^2} / (2 lambda1 t)` at recorded
/// times, using the 1-Poincare constant supplied by the caller.
pub fn decay_bound_check(
    space: &RandomWalkSpace,
    u0: &StateFunction,
    config: &FlowConfig,
    lambda1: f64,
) -> DecayReport {
    assert!(lambda1 > 0.0);
    let traj = evolve(space, u0, config);
    let u0_l2 = space.lp_norm(u0, 2.0);
    let slack = 10.0 * config.prox_tolerance * (1.0 + u0_l2);
    let mut tightness: f64 = 0.0;
    for (t, snap) in traj.times.iter().zip(&traj.snapshots) {
        if *t <= 0.0 {
            continue;
        }
        let lhs = space.lp_norm(&snap.shifted(-traj.mean), 1.0);
        let bound = u0_l2 * u0_l2 / (2.0 * lambda1 * t) + slack;
        if bound > 0.0 {
            tightness = tightness.max(lhs / bound);
        }
    }
    DecayReport {
        tightness,
        holds: tightness <= 1.0,
    }
}

#[derive(Debug, Clone)]
pub struct ExtinctionReport {
    /// First recorded time at which the flow is within `extinction_tol`
    /// of its mean in `L^2(nu)`.
    pub t_observed: Option<f64>,
    /// `||u0 - mean||_{L^2} / lambda2`.
    pub t_upper: f64,
    /// Dual-norm lower bound on the extinction time.
    pub t_lower: f64,
}

pub const DEFAULT_EXTINCTION_TOL: f64 = 1e-6;

/// Sandwiches the extinction time between the dual-norm lower bound and
/// the 2-Poincare upper bound, then observes it along the flow.
pub fn extinction_analysis(
    space: &RandomWalkSpace,
    u0: &StateFunction,
    config: &FlowConfig,
    lambda2: f64,
    extinction_tol: f64,
) -> Result<ExtinctionReport, FlowError> {
    assert!(lambda2 > 0.0);
    let mean = space.mean(u0);
    let centered = u0.shifted(-mean);
    let t_upper = space.lp_norm(&centered, 2.0) / lambda2;
    let t_lower = meyer_norm(space, &centered)?;
    let traj = evolve(space, u0, config);
    let mut t_observed = None;
    for (t, d) in traj.times.iter().zip(&traj.diagnostics) {
        if d.dist2_mean <= extinction_tol {
            t_observed = Some(*t);
            break;
        }
    }
    if t_observed.is_none() && t_upper < config.t_end {
        return Err(FlowError::HorizonTooShort {
            t_end: config.t_end,
            t_upper,
        });
    }
    Ok(ExtinctionReport {
        t_observed,
        t_upper,
        t_lower,
    })
}

/// Dual norm `sup { <f,u>_nu : TV(u) <= 1 }`, finite exactly on mean-zero
/// functions; solved as a linear program with edge slack variables.
pub fn meyer_norm(space: &RandomWalkSpace, f: &StateFunction) -> Result<f64, FlowError> {
    space.check_function(f);
    let mean_mass = space.integral(f);
    let scale = space.lp_norm(f, 1.0).max(1.0);
    if mean_mass.abs() > 1e-9 * scale {
        return Err(FlowError::NonzeroMean {
            mean: mean_mass / space.nu_total(),
        });
    }
    if space.lp_norm(f, 1.0) == 0.0 {
        return Ok(0.0);
    }
    let n = space.len();
    let ne = space.edges().len();
    // Variables: u (free) | t_e >= 0 | surplus s1_e, s2_e >= 0 | budget slack.
    let nvars = n + ne + 2 * ne + 1;
    let mut a = Vec::with_capacity(2 * ne + 1);
    let mut b = Vec::with_capacity(2 * ne + 1);
    for (k, e) in space.edges().iter().enumerate() {
        // t_e - (u_b - u_a) - s1 = 0
        let mut row = vec![0.0; nvars];
        row[n + k] = 1.0;
        row[e.b as usize] = -1.0;
        row[e.a as usize] = 1.0;
        row[n + ne + 2 * k] = -1.0;
        a.push(row);
        b.push(0.0);
        // t_e + (u_b - u_a) - s2 = 0
        let mut row = vec![0.0; nvars];
        row[n + k] = 1.0;
        row[e.b as usize] = 1.0;
        row[e.a as usize] = -1.0;
        row[n + ne + 2 * k + 1] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    // sum_e c_e t_e + slack = 1.
    let mut budget = vec![0.0; nvars];
    for (k, e) in space.edges().iter().enumerate() {
        budget[n + k] = e.cond;
    }
    budget[nvars - 1] = 1.0;
    a.push(budget);
    b.push(1.0);

    let mut c = vec![0.0; nvars];
    for x in 0..n {
        c[x] = -f.value(x as u32) * space.nu(x as u32);
    }
    let mut lo = vec![0.0; nvars];
    let hi = vec![INF; nvars];
    for x in 0..n {
        lo[x] = -INF;
    }
    let lp = LinearProgram { a, b, c, lo, hi };
    let sol = simplex::solve(&lp);
    match sol.outcome {
        LpOutcome::Optimal => Ok(-sol.objective),
        other => Err(FlowError::DualNormFailed(format!("{other:?}"))),
    }
}
