//! Ratio-cut minimization and calibrability.
//!
//! `h_1(Omega)` is the minimum of `P(E)/nu(E)` over nonempty subsets of a
//! window, `h(X)` its balanced global version. Small windows are solved by
//! exhaustive Gray-code scan, larger ones by Dinkelbach iteration on s-t
//! min-cuts; calibrability has both the subset-scan route and the
//! antisymmetric-flux feasibility route.

pub mod eigen;

use thiserror::Error;

use crate::geometry::{mean_curvature, perimeter};
use crate::solver::maxflow::FlowNetwork;
use crate::solver::simplex::{self, LinearProgram, LpOutcome};
use crate::solver::subsets::scan_subsets;
use crate::space::{RandomWalkSpace, StateSet};

pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 22;
pub const DEFAULT_CERTIFICATE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CheegerError {
    #[error("window has {size} states, exceeding the exhaustive limit {limit}; use the Dinkelbach solver")]
    TooLargeForExhaustive { size: usize, limit: usize },
    #[error("state set is empty")]
    EmptySet,
    #[error("set must be a proper nonempty subset of the space")]
    NotProperSubset,
    #[error("nu(Omega) = {volume} is not half of nu(X) = {total}")]
    NotBalanced { volume: f64, total: f64 },
    #[error("space has {size} states, exceeding the exhaustive limit {limit}")]
    TooLarge { size: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheegerMode {
    SubsetExhaustive,
    SubsetDinkelbach,
    GlobalExhaustive,
    GlobalIpm,
}

#[derive(Debug, Clone)]
pub struct CheegerReport {
    pub value: f64,
    pub witness: StateSet,
    pub mode: CheegerMode,
    /// False for the inverse-power upper bound.
    pub exact: bool,
}

/// Antisymmetric flux on oriented support pairs; the stored value is
/// `g(a, b)` for `a < b` and `g(b, a) = -g(a, b)`.
#[derive(Debug, Clone)]
pub struct FluxField {
    space_id: u64,
    entries: Vec<(u32, u32, f64)>,
}

impl FluxField {
    pub(crate) fn new(space: &RandomWalkSpace, entries: Vec<(u32, u32, f64)>) -> Self {
        debug_assert!(entries.iter().all(|&(a, b, _)| a < b));
        FluxField {
            space_id: space.id(),
            entries,
        }
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    /// Oriented entries `(a, b, g(a,b))` with `a < b`.
    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn value(&self, x: u32, y: u32) -> f64 {
        for &(a, b, g) in &self.entries {
            if a == x && b == y {
                return g;
            }
            if a == y && b == x {
                return -g;
            }
        }
        0.0
    }

    pub fn max_abs(&self) -> f64 {
        self.entries
            .iter()
            .fold(0.0_f64, |m, &(_, _, g)| m.max(g.abs()))
    }

    /// `sum_y g(x,y) K(x,y)` for every state, the divergence-like row sums.
    pub fn row_sums(&self, space: &RandomWalkSpace) -> Vec<f64> {
        let mut acc = vec![0.0; space.len()];
        for &(a, b, g) in &self.entries {
            // Conductance-scaled first, divided by nu per row below.
            let c = edge_cond(space, a, b);
            acc[a as usize] += g * c;
            acc[b as usize] -= g * c;
        }
        for (x, v) in acc.iter_mut().enumerate() {
            *v /= space.nu(x as u32);
        }
        acc
    }
}

fn edge_cond(space: &RandomWalkSpace, a: u32, b: u32) -> f64 {
    for &e in space.incident(a) {
        let edge = &space.edges()[e as usize];
        if (edge.a == a && edge.b == b) || (edge.a == b && edge.b == a) {
            return edge.cond;
        }
    }
    0.0
}

/// Lexicographic comparison of witness sets used for deterministic
/// tie-breaking: smaller volume first, then smaller sorted index list.
fn better_witness(
    value: f64,
    volume: f64,
    indices: &[u32],
    best: &Option<(f64, f64, Vec<u32>)>,
) -> bool {
    match best {
        None => true,
        Some((bv, bvol, bidx)) => {
            if value < *bv {
                true
            } else if value > *bv {
                false
            } else if volume < *bvol {
                true
            } else if volume > *bvol {
                false
            } else {
                indices < bidx.as_slice()
            }
        }
    }
}

fn member_indices(members: &[bool]) -> Vec<u32> {
    members
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Exact subset Cheeger constant by enumeration over `E ⊆ Omega`.
pub fn cheeger_subset_exact(
    space: &RandomWalkSpace,
    omega: &StateSet,
    limit: usize,
) -> Result<CheegerReport, CheegerError> {
    space.check_set(omega);
    let domain: Vec<u32> = omega.iter().collect();
    if domain.is_empty() {
        return Err(CheegerError::EmptySet);
    }
    if domain.len() > limit {
        return Err(CheegerError::TooLargeForExhaustive {
            size: domain.len(),
            limit,
        });
    }
    let mut best: Option<(f64, f64, Vec<u32>)> = None;
    scan_subsets(space, &domain, |view| {
        let ratio = view.perimeter / view.volume;
        // Materialize indices lazily: only when the ratio could win.
        let provisional = match &best {
            None => true,
            Some((bv, _, _)) => ratio <= *bv,
        };
        if provisional {
            let idx = member_indices(view.members);
            if better_witness(ratio, view.volume, &idx, &best) {
                best = Some((ratio, view.volume, idx));
            }
        }
    });
    let (value, _, indices) = best.expect("domain is nonempty");
    Ok(CheegerReport {
        value,
        witness: space.set_from_indices(&indices),
        mode: CheegerMode::SubsetExhaustive,
        exact: true,
    })
}

/// Minimizes `P(E) - lambda nu(E)` over `E ⊆ Omega` via s-t min-cut.
/// Returns the minimizing set (possibly empty).
fn parametric_cut(space: &RandomWalkSpace, domain: &[u32], lambda: f64) -> Vec<u32> {
    let k = domain.len();
    let mut local = vec![usize::MAX; space.len()];
    for (i, &x) in domain.iter().enumerate() {
        local[x as usize] = i;
    }
    let (s, t) = (k, k + 1);
    let cap_scale: f64 = space.nu_total().max(1.0);
    let mut net = FlowNetwork::new(k + 2, 1e-14 * cap_scale);
    for (i, &x) in domain.iter().enumerate() {
        // Perimeter paid to the outside of Omega when x joins E.
        let mut boundary = 0.0;
        for &e in space.incident(x) {
            let edge = &space.edges()[e as usize];
            let y = space.other_end(e, x);
            if local[y as usize] == usize::MAX {
                boundary += edge.cond;
            }
        }
        let a = boundary - lambda * space.nu(x);
        if a >= 0.0 {
            net.add_arc(i, t, a);
        } else {
            net.add_arc(s, i, -a);
        }
    }
    for e in space.edges() {
        let (la, lb) = (local[e.a as usize], local[e.b as usize]);
        if la != usize::MAX && lb != usize::MAX {
            net.add_undirected(la, lb, e.cond);
        }
    }
    net.max_flow(s, t);
    let side = net.min_cut_side(s);
    domain
        .iter()
        .enumerate()
        .filter(|&(i, _)| side[i])
        .map(|(_, &x)| x)
        .collect()
}

/// Subset Cheeger constant by Dinkelbach iteration: exact on termination
/// because each round re-evaluates the ratio of a concrete set.
pub fn cheeger_subset_dinkelbach(
    space: &RandomWalkSpace,
    omega: &StateSet,
) -> Result<CheegerReport, CheegerError> {
    space.check_set(omega);
    let domain: Vec<u32> = omega.iter().collect();
    if domain.is_empty() {
        return Err(CheegerError::EmptySet);
    }
    let ratio_of = |indices: &[u32]| -> f64 {
        let set = space.set_from_indices(indices);
        let rep = perimeter(space, &set);
        rep.perimeter / rep.volume
    };
    let mut witness: Vec<u32> = domain.clone();
    let mut lambda = ratio_of(&witness);
    let slack = 1e-13 * space.nu_total().max(1.0);
    for _ in 0..256 {
        let candidate = parametric_cut(space, &domain, lambda);
        if candidate.is_empty() {
            break;
        }
        let set = space.set_from_indices(&candidate);
        let rep = perimeter(space, &set);
        if rep.perimeter - lambda * rep.volume >= -slack {
            break;
        }
        lambda = rep.perimeter / rep.volume;
        witness = candidate;
    }
    Ok(CheegerReport {
        value: lambda,
        witness: space.set_from_indices(&witness),
        mode: CheegerMode::SubsetDinkelbach,
        exact: true,
    })
}

/// Global balanced Cheeger constant over `0 < nu(D) <= nu(X)/2`.
pub fn cheeger_global_exhaustive(
    space: &RandomWalkSpace,
    limit: usize,
) -> Result<CheegerReport, CheegerError> {
    let n = space.len();
    if n > limit {
        return Err(CheegerError::TooLarge { size: n, limit });
    }
    let half = 0.5 * space.nu_total();
    let half_slack = half * (1.0 + 1e-12);
    let domain: Vec<u32> = (0..n as u32).collect();
    let mut best: Option<(f64, f64, Vec<u32>)> = None;
    scan_subsets(space, &domain, |view| {
        if view.volume > half_slack || view.volume == 0.0 {
            return;
        }
        let ratio = view.perimeter / view.volume;
        let provisional = match &best {
            None => true,
            Some((bv, _, _)) => ratio <= *bv,
        };
        if provisional {
            let idx = member_indices(view.members);
            if better_witness(ratio, view.volume, &idx, &best) {
                best = Some((ratio, view.volume, idx));
            }
        }
    });
    let (value, _, indices) = best.ok_or(CheegerError::EmptySet)?;
    Ok(CheegerReport {
        value,
        witness: space.set_from_indices(&indices),
        mode: CheegerMode::GlobalExhaustive,
        exact: true,
    })
}

/// Upper bound on the global Cheeger constant by the inverse power method
/// with level-set rounding. The coarea formula guarantees the best
/// threshold of any iterate does no worse than the iterate's own ratio.
pub fn cheeger_global_ipm(
    space: &RandomWalkSpace,
    options: &crate::solver::ipm::IpmOptions,
) -> Result<CheegerReport, CheegerError> {
    if space.len() < 2 {
        return Err(CheegerError::NotProperSubset);
    }
    let iterates = crate::solver::ipm::ratio_minimizer_iterates(space, options);
    let mut best: Option<(f64, Vec<u32>)> = None;
    for iterate in &iterates {
        if let Some((ratio, indices)) = best_threshold_cut(space, iterate) {
            if best.as_ref().map_or(true, |(bv, _)| ratio < *bv) {
                best = Some((ratio, indices));
            }
        }
    }
    // The spectral start alone can degenerate on tiny spaces; fall back to
    // singleton cuts so a witness always exists.
    if best.is_none() {
        for x in 0..space.len() as u32 {
            let set = space.set_from_indices(&[x]);
            let rep = perimeter(space, &set);
            if rep.volume <= 0.5 * space.nu_total() * (1.0 + 1e-12) {
                let ratio = rep.perimeter / rep.volume;
                if best.as_ref().map_or(true, |(bv, _)| ratio < *bv) {
                    best = Some((ratio, vec![x]));
                }
            }
        }
    }
    let (value, indices) = best.ok_or(CheegerError::EmptySet)?;
    Ok(CheegerReport {
        value,
        witness: space.set_from_indices(&indices),
        mode: CheegerMode::GlobalIpm,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrabilityMethod {
    Exhaustive { limit: usize },
    Lp,
}

#[derive(Debug, Clone)]
pub struct CalibrabilityReport {
    pub calibrable: bool,
    /// `lambda_Omega = P(Omega)/nu(Omega)`.
    pub lambda: f64,
    /// Strictly better subset when not calibrable (exhaustive method only).
    pub witness: Option<StateSet>,
    /// Feasible flux certificate (LP method only).
    pub flux: Option<FluxField>,
}

/// Whether `Omega` attains its own subset Cheeger minimum. The LP route
/// solves the antisymmetric-flux system on the interior support pairs, so
/// it scales past the enumeration limit.
pub fn is_calibrable(
    space: &RandomWalkSpace,
    omega: &StateSet,
    method: CalibrabilityMethod,
) -> Result<CalibrabilityReport, CheegerError> {
    space.check_set(omega);
    if omega.is_empty_set() {
        return Err(CheegerError::EmptySet);
    }
    if omega.count() == space.len() {
        return Err(CheegerError::NotProperSubset);
    }
    let rep = perimeter(space, omega);
    let lambda = rep.perimeter / rep.volume;
    match method {
        CalibrabilityMethod::Exhaustive { limit } => {
            let sub = cheeger_subset_exact(space, omega, limit)?;
            let tol = 1e-12 * lambda.max(1.0);
            if sub.value >= lambda - tol {
                Ok(CalibrabilityReport {
                    calibrable: true,
                    lambda,
                    witness: None,
                    flux: None,
                })
            } else {
                Ok(CalibrabilityReport {
                    calibrable: false,
                    lambda,
                    witness: Some(sub.witness),
                    flux: None,
                })
            }
        }
        CalibrabilityMethod::Lp => {
            let (feasible, flux) = calibrability_lp(space, omega, lambda);
            Ok(CalibrabilityReport {
                calibrable: feasible,
                lambda,
                witness: None,
                flux,
            })
        }
    }
}

/// Feasibility of the interior flux system: antisymmetric `|g| <= 1` on
/// support pairs inside `Omega` with, for every `x` in `Omega`,
/// `sum_{y in Omega} c(x,y) g(x,y) = nu(x) (1 - m_x(Omega) - lambda)`.
fn calibrability_lp(
    space: &RandomWalkSpace,
    omega: &StateSet,
    lambda: f64,
) -> (bool, Option<FluxField>) {
    let members: Vec<u32> = omega.iter().collect();
    let mut row_of = vec![usize::MAX; space.len()];
    for (i, &x) in members.iter().enumerate() {
        row_of[x as usize] = i;
    }
    // One variable per interior support pair.
    let mut pair_vars: Vec<(u32, u32, f64)> = Vec::new();
    for e in space.edges() {
        if omega.contains(e.a) && omega.contains(e.b) {
            pair_vars.push((e.a, e.b, e.cond));
        }
    }
    let m = members.len();
    let nvars = pair_vars.len();
    let mut a = vec![vec![0.0; nvars]; m];
    let mut b = vec![0.0; m];
    for (i, &x) in members.iter().enumerate() {
        // nu(x) (1 - m_x(Omega) - lambda), assembled from exact sums.
        let mut interior = space.loop_mass(x);
        for &e in space.incident(x) {
            let edge = &space.edges()[e as usize];
            let y = space.other_end(e, x);
            if omega.contains(y) {
                interior += edge.cond;
            }
        }
        b[i] = space.nu(x) - interior - lambda * space.nu(x);
    }
    for (v, &(x, y, c)) in pair_vars.iter().enumerate() {
        // g is stored on the orientation x -> y with x < y.
        a[row_of[x as usize]][v] = c;
        a[row_of[y as usize]][v] = -c;
    }
    let lp = LinearProgram {
        a,
        b,
        c: vec![0.0; nvars],
        lo: vec![-1.0; nvars],
        hi: vec![1.0; nvars],
    };
    let (sol, residuals) = simplex::feasibility(&lp);
    let feasible = matches!(sol.outcome, LpOutcome::Optimal)
        && residuals
            .iter()
            .zip(&members)
            .all(|(r, &x)| r.abs() <= DEFAULT_CERTIFICATE_TOLERANCE * space.nu(x).max(1.0));
    if feasible {
        let entries = pair_vars
            .iter()
            .zip(&sol.x)
            .map(|(&(x, y, _), &g)| (x, y, g))
            .collect();
        (true, Some(FluxField::new(space, entries)))
    } else {
        (false, None)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CurvatureCheck {
    pub max_curvature: f64,
    pub lambda: f64,
    pub holds: bool,
}

/// Necessary condition for calibrability:
/// `max_{x in Omega} H(x) <= lambda_Omega`. The converse fails in general.
pub fn curvature_necessary_check(space: &RandomWalkSpace, omega: &StateSet) -> CurvatureCheck {
    let h = mean_curvature(space, omega);
    let max_curvature = omega
        .iter()
        .map(|x| h.value(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let rep = perimeter(space, omega);
    let lambda = rep.perimeter / rep.volume;
    CurvatureCheck {
        max_curvature,
        lambda,
        holds: max_curvature <= lambda + space.tolerance().max(1e-12),
    }
}

/// Partition of `Omega` into components with pairwise-zero interaction.
pub fn decompose_m(space: &RandomWalkSpace, omega: &StateSet) -> Vec<StateSet> {
    space.check_set(omega);
    let mut seen = vec![false; space.len()];
    let mut parts = Vec::new();
    for start in omega.iter() {
        if seen[start as usize] {
            continue;
        }
        let mut component = Vec::new();
        let mut stack = vec![start];
        seen[start as usize] = true;
        while let Some(x) = stack.pop() {
            component.push(x);
            for &e in space.incident(x) {
                let y = space.other_end(e, x);
                if omega.contains(y)
                    && !seen[y as usize]
                    && space.edges()[e as usize].cond > 0.0
                {
                    seen[y as usize] = true;
                    stack.push(y);
                }
            }
        }
        component.sort_unstable();
        parts.push(space.set_from_indices(&component));
    }
    parts
}

/// Best superlevel-set rounding of a function for the global Cheeger
/// objective: scans all thresholds and picks the side with volume at most
/// half. Returns `(ratio, witness indices)`.
pub(crate) fn best_threshold_cut(
    space: &RandomWalkSpace,
    values: &[f64],
) -> Option<(f64, Vec<u32>)> {
    let n = space.len();
    let total = space.nu_total();
    let half = 0.5 * total * (1.0 + 1e-12);
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        values[b as usize]
            .partial_cmp(&values[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let boundary: Vec<f64> = (0..n as u32)
        .map(|x| {
            space
                .incident(x)
                .iter()
                .map(|&e| space.edges()[e as usize].cond)
                .sum()
        })
        .collect();
    let mut cut_to_set = vec![0.0; n];
    let mut members = vec![false; n];
    let mut volume = 0.0;
    let mut perim = 0.0;
    let mut best: Option<(f64, Vec<u32>)> = None;
    for (k, &x) in order.iter().enumerate() {
        volume += space.nu(x);
        perim += boundary[x as usize] - 2.0 * cut_to_set[x as usize];
        members[x as usize] = true;
        for &e in space.incident(x) {
            let y = space.other_end(e, x);
            cut_to_set[y as usize] += space.edges()[e as usize].cond;
        }
        if k + 1 == n {
            break;
        }
        // Skip thresholds inside a tie of equal values.
        if values[x as usize] == values[order[k + 1] as usize] {
            continue;
        }
        let (side_volume, side_members): (f64, Vec<u32>) = if volume <= half {
            (volume, member_indices(&members))
        } else {
            (
                total - volume,
                members
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| !m)
                    .map(|(i, _)| i as u32)
                    .collect(),
            )
        };
        if side_volume <= 0.0 {
            continue;
        }
        let ratio = perim / side_volume;
        if best.as_ref().map_or(true, |(bv, _)| ratio < *bv) {
            best = Some((ratio, side_members));
        }
    }
    best
}
