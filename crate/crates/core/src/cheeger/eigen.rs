//! Eigenpair certification for the graph 1-Laplacian.
//!
//! A pair `(lambda, u)` with unit `L^1(nu)` norm is an eigenpair exactly
//! when an antisymmetric flux `g` with `|g| <= 1` exists such that
//! `g(x,y) (u(y)-u(x)) = |u(y)-u(x)|` on support pairs and
//! `-sum_y g(x,y) K(x,y) = lambda xi(x)` for some `xi` in the pointwise
//! sign of `u`. On pairs where `u` differs the flux is forced to the sign
//! of the difference, so certification is a box-constrained linear
//! feasibility problem in the remaining entries.

use thiserror::Error;

use super::{is_calibrable, CalibrabilityMethod, CheegerError, FluxField};
use crate::geometry::{perimeter, total_variation};
use crate::solver::simplex::{self, LinearProgram, LpOutcome};
use crate::solver::subsets::{is_connected_subset, scan_subsets};
use crate::space::{RandomWalkSpace, StateFunction, StateSet};

#[derive(Debug, Clone)]
pub struct CertificateResiduals {
    /// max over states of `|sum_y g(x,y) K(x,y) + lambda xi(x)|`.
    pub eigen_equation: f64,
    /// max over support pairs of `|g(x,y)(u(y)-u(x)) - |u(y)-u(x)||`.
    pub sign_alignment: f64,
    /// `|TV(u) - lambda|`.
    pub tv_mismatch: f64,
    /// `| ||u||_1 - 1 |` after normalization.
    pub normalization: f64,
}

#[derive(Debug, Clone)]
pub struct EigenpairCertificate {
    pub lambda: f64,
    /// The normalized eigenfunction, `||u||_{L^1(nu)} = 1`.
    pub u: StateFunction,
    /// Pointwise selection from `sign(u)`.
    pub xi: StateFunction,
    pub flux: FluxField,
    pub residuals: CertificateResiduals,
    /// Factor the input was divided by to reach unit norm.
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub enum InfeasibilityReason {
    LambdaOutOfRange {
        lambda: f64,
    },
    /// `TV(u)` differs from the candidate eigenvalue.
    TvMismatch {
        tv: f64,
        lambda: f64,
    },
    /// Positive eigenvalue but zero is not a nu-median of `u`.
    MedianViolation {
        median_interval: (f64, f64),
    },
    /// The flux system itself has no solution.
    FluxSystem {
        total_residual: f64,
        worst_state: String,
    },
}

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("function has zero L1(nu) norm")]
    NormalizationFailure,
    #[error("not an eigenpair: {0:?}")]
    Infeasible(InfeasibilityReason),
    #[error(transparent)]
    Cheeger(#[from] CheegerError),
}

/// nu-median interval of a function.
pub fn median_set(space: &RandomWalkSpace, u: &StateFunction) -> (f64, f64) {
    space.check_function(u);
    let half = 0.5 * space.nu_total();
    let slack = 1e-12 * space.nu_total();
    let mut values: Vec<f64> = u.values().to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let mass_below = |v: f64| -> f64 {
        u.values()
            .iter()
            .zip(space.nu_values())
            .filter(|(&x, _)| x < v)
            .map(|(_, &n)| n)
            .sum()
    };
    let mass_above = |v: f64| -> f64 {
        u.values()
            .iter()
            .zip(space.nu_values())
            .filter(|(&x, _)| x > v)
            .map(|(_, &n)| n)
            .sum()
    };
    let medians: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&v| mass_below(v) <= half + slack && mass_above(v) <= half + slack)
        .collect();
    let lo = *medians.first().expect("a nu-median always exists");
    let hi = *medians.last().unwrap();
    (lo, hi)
}

/// Fast necessary filter for positive eigenvalues.
pub fn zero_median(space: &RandomWalkSpace, u: &StateFunction) -> bool {
    let (lo, hi) = median_set(space, u);
    let scale = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(1.0);
    lo <= tol && hi >= -tol
}

/// Certifies or refutes `(lambda, u)` as an eigenpair. The input function
/// is normalized to unit `L^1(nu)` norm first; the applied factor is
/// recorded in the certificate.
pub fn verify_eigenpair(
    space: &RandomWalkSpace,
    lambda: f64,
    u_raw: &StateFunction,
    tolerance: f64,
) -> Result<EigenpairCertificate, EigenError> {
    space.check_function(u_raw);
    let scale = space.lp_norm(u_raw, 1.0);
    if scale <= 0.0 || !scale.is_finite() {
        return Err(EigenError::NormalizationFailure);
    }
    let u = u_raw.scaled(1.0 / scale);

    if !(-tolerance..=1.0 + tolerance).contains(&lambda) {
        return Err(EigenError::Infeasible(InfeasibilityReason::LambdaOutOfRange {
            lambda,
        }));
    }
    let tv = total_variation(space, &u);
    if (tv - lambda).abs() > tolerance {
        return Err(EigenError::Infeasible(InfeasibilityReason::TvMismatch {
            tv,
            lambda,
        }));
    }
    if lambda > tolerance && !zero_median(space, &u) {
        return Err(EigenError::Infeasible(InfeasibilityReason::MedianViolation {
            median_interval: median_set(space, &u),
        }));
    }

    let n = space.len();
    let max_abs = u.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let ztol = 1e-11 * max_abs.max(1e-300);

    // Unknowns: flux on equal-value support pairs, xi on zero states.
    let mut g_fixed: Vec<(u32, u32, f64)> = Vec::new();
    let mut g_free: Vec<(u32, u32)> = Vec::new();
    for e in space.edges() {
        let d = u.value(e.b) - u.value(e.a);
        if d.abs() <= ztol {
            g_free.push((e.a, e.b));
        } else {
            g_fixed.push((e.a, e.b, d.signum()));
        }
    }
    let xi_fixed: Vec<Option<f64>> = u
        .values()
        .iter()
        .map(|&v| if v.abs() <= ztol { None } else { Some(v.signum()) })
        .collect();
    let xi_vars: Vec<u32> = (0..n as u32)
        .filter(|&x| xi_fixed[x as usize].is_none())
        .collect();

    let nvars = g_free.len() + xi_vars.len();
    let mut a = vec![vec![0.0; nvars]; n];
    let mut b = vec![0.0; n];
    // Row x (scaled by nu(x)): sum_e ±c_e g_e + lambda nu(x) xi(x) = 0.
    for (v, &(x, y)) in g_free.iter().enumerate() {
        let c = super::edge_cond(space, x, y);
        a[x as usize][v] += c;
        a[y as usize][v] -= c;
    }
    for (k, &x) in xi_vars.iter().enumerate() {
        a[x as usize][g_free.len() + k] = lambda * space.nu(x);
    }
    for &(x, y, s) in &g_fixed {
        let c = super::edge_cond(space, x, y);
        b[x as usize] -= c * s;
        b[y as usize] += c * s;
    }
    for x in 0..n {
        if let Some(s) = xi_fixed[x] {
            b[x] -= lambda * space.nu(x as u32) * s;
        }
    }
    let mut lo = vec![-1.0; nvars];
    let mut hi = vec![1.0; nvars];
    // Flux bounds stay [-1, 1]; xi bounds are [-1, 1] as well.
    lo.truncate(nvars);
    hi.truncate(nvars);
    let lp = LinearProgram {
        a,
        b,
        c: vec![0.0; nvars],
        lo,
        hi,
    };
    let (sol, residuals) = simplex::feasibility(&lp);
    let within = residuals
        .iter()
        .enumerate()
        .all(|(x, r)| r.abs() <= tolerance * space.nu(x as u32).max(1.0));
    if !(matches!(sol.outcome, LpOutcome::Optimal) && within) {
        let total: f64 = residuals.iter().map(|r| r.abs()).sum();
        let worst = residuals
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(x, _)| space.label(x as u32).to_string())
            .unwrap_or_default();
        return Err(EigenError::Infeasible(InfeasibilityReason::FluxSystem {
            total_residual: total,
            worst_state: worst,
        }));
    }

    // Assemble the certificate from fixed and solved entries.
    let mut entries: Vec<(u32, u32, f64)> = g_fixed.clone();
    for (v, &(x, y)) in g_free.iter().enumerate() {
        entries.push((x, y, sol.x[v].clamp(-1.0, 1.0)));
    }
    entries.sort_by_key(|&(x, y, _)| (x, y));
    let flux = FluxField::new(space, entries);
    let mut xi_values: Vec<f64> = xi_fixed
        .iter()
        .map(|opt| opt.unwrap_or(0.0))
        .collect();
    for (k, &x) in xi_vars.iter().enumerate() {
        xi_values[x as usize] = sol.x[g_free.len() + k].clamp(-1.0, 1.0);
    }
    let xi = space.function_from_values(xi_values);

    let row_sums = flux.row_sums(space);
    let eigen_equation = (0..n)
        .map(|x| (row_sums[x] + lambda * xi.value(x as u32)).abs())
        .fold(0.0, f64::max);
    let sign_alignment = space
        .edges()
        .iter()
        .map(|e| {
            let d = u.value(e.b) - u.value(e.a);
            (flux.value(e.a, e.b) * d - d.abs()).abs()
        })
        .fold(0.0, f64::max);
    Ok(EigenpairCertificate {
        lambda,
        residuals: CertificateResiduals {
            eigen_equation,
            sign_alignment,
            tv_mismatch: (tv - lambda).abs(),
            normalization: (space.lp_norm(&u, 1.0) - 1.0).abs(),
        },
        u,
        xi,
        flux,
        scale,
    })
}

#[derive(Debug, Clone)]
pub enum SearchMode {
    /// Enumerate all proper subsets; requires `n <= limit`.
    Exhaustive { limit: usize },
    /// Certify only the given candidate sets (for spaces past the limit).
    Candidates(Vec<StateSet>),
}

#[derive(Debug, Clone)]
pub struct SetEigenpair {
    pub lambda: f64,
    pub set: StateSet,
    pub certificate: EigenpairCertificate,
}

/// Searches for set-type eigenpairs `(lambda_E, chi_E / nu(E))`. Sound but
/// not claimed complete: eigenfunctions that are not rescaled indicators
/// are out of reach of this enumeration. The constant pair `(0, X)` is
/// always reported first.
pub fn set_eigenpair_search(
    space: &RandomWalkSpace,
    mode: SearchMode,
    tolerance: f64,
) -> Result<Vec<SetEigenpair>, EigenError> {
    let mut results: Vec<SetEigenpair> = Vec::new();
    let constant = space.constant_function(1.0 / space.nu_total());
    let full = space.full_set();
    if let Ok(cert) = verify_eigenpair(space, 0.0, &constant, tolerance) {
        results.push(SetEigenpair {
            lambda: 0.0,
            set: full,
            certificate: cert,
        });
    }

    let candidates: Vec<StateSet> = match mode {
        SearchMode::Candidates(sets) => sets,
        SearchMode::Exhaustive { limit } => {
            let n = space.len();
            if n > limit {
                return Err(EigenError::Cheeger(CheegerError::TooLarge {
                    size: n,
                    limit,
                }));
            }
            let half = 0.5 * space.nu_total() * (1.0 + 1e-12);
            let domain: Vec<u32> = (0..n as u32).collect();
            let mut picked: Vec<Vec<u32>> = Vec::new();
            scan_subsets(space, &domain, |view| {
                if view.volume > half || view.volume == 0.0 {
                    return;
                }
                let count = view.members.iter().filter(|&&m| m).count();
                if count == n {
                    return;
                }
                let lambda = view.perimeter / view.volume;
                // Curvature bound is necessary for calibrability, which in
                // turn is necessary for a set-type eigenpair.
                for (x, &m) in view.members.iter().enumerate() {
                    if !m {
                        continue;
                    }
                    let mx = (view.cut_to_set[x] + space.loop_mass(x as u32))
                        / space.nu(x as u32);
                    if 1.0 - 2.0 * mx > lambda + 1e-9 {
                        return;
                    }
                }
                if !is_connected_subset(space, view.members) {
                    return;
                }
                picked.push(super::member_indices(view.members));
            });
            picked
                .into_iter()
                .map(|idx| space.set_from_indices(&idx))
                .collect()
        }
    };

    for set in candidates {
        space.check_set(&set);
        if set.is_empty_set() || set.count() == space.len() {
            continue;
        }
        let rep = perimeter(space, &set);
        let lambda = rep.perimeter / rep.volume;
        let u = space.indicator(&set).scaled(1.0 / rep.volume);
        if let Ok(certificate) = verify_eigenpair(space, lambda, &u, tolerance) {
            results.push(SetEigenpair {
                lambda,
                set,
                certificate,
            });
        }
    }
    results.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .unwrap()
            .then_with(|| a.set.sorted_indices().cmp(&b.set.sorted_indices()))
    });
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct BalancedPairReport {
    pub lambda: f64,
    pub omega_calibrable: bool,
    pub complement_calibrable: bool,
    /// Certificates for the interpolation parameters 0, 1 and 2.
    pub certificates: Vec<(f64, EigenpairCertificate)>,
    pub certified: bool,
}

/// For a set of exactly half the total measure: both sides calibrable
/// makes the two-sided indicator family eigenfunctions; certified here at
/// the interpolation endpoints and midpoint.
pub fn balanced_pair_eigencheck(
    space: &RandomWalkSpace,
    omega: &StateSet,
    tolerance: f64,
) -> Result<BalancedPairReport, EigenError> {
    space.check_set(omega);
    let volume = space.nu_of_set(omega);
    let total = space.nu_total();
    if (volume - 0.5 * total).abs() > space.tolerance().max(1e-12) * total {
        return Err(EigenError::Cheeger(CheegerError::NotBalanced {
            volume,
            total,
        }));
    }
    let complement = omega.complement();
    let omega_calibrable = is_calibrable(space, omega, CalibrabilityMethod::Lp)?.calibrable;
    let complement_calibrable =
        is_calibrable(space, &complement, CalibrabilityMethod::Lp)?.calibrable;
    let lambda = {
        let rep = perimeter(space, omega);
        rep.perimeter / rep.volume
    };
    let chi_omega = space.indicator(omega);
    let chi_comp = space.indicator(&complement);
    let mut certificates = Vec::new();
    let mut all_ok = true;
    for t in [0.0, 1.0, 2.0] {
        let u = chi_omega
            .scaled(t)
            .zip(&chi_comp.scaled(2.0 - t), |a, b| a - b);
        match verify_eigenpair(space, lambda, &u, tolerance) {
            Ok(cert) => certificates.push((t, cert)),
            Err(_) => all_ok = false,
        }
    }
    let certified = omega_calibrable && complement_calibrable && all_ok;
    Ok(BalancedPairReport {
        lambda,
        omega_calibrable,
        complement_calibrable,
        certificates,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::from_weighted_graph;

    fn two_node(p: f64) -> RandomWalkSpace {
        from_weighted_graph(&[("a", "a", p), ("b", "b", p), ("a", "b", 1.0 - p)], true).unwrap()
    }

    fn triangle() -> RandomWalkSpace {
        from_weighted_graph(&[("a", "b", 0.5), ("a", "c", 0.5), ("b", "c", 0.5)], false).unwrap()
    }

    #[test]
    fn two_node_eigenpairs() {
        let p = 0.3;
        let space = two_node(p);
        let a = space.index_of("a").unwrap() as usize;
        let mut v = vec![0.0; 2];
        v[a] = 1.0;
        v[1 - a] = -1.0;
        let u = space.function_from_values(v);
        let cert = verify_eigenpair(&space, 1.0 - p, &u, 1e-7).unwrap();
        assert!(cert.residuals.eigen_equation < 1e-9);
        assert!((cert.scale - 2.0).abs() < 1e-12);

        let constant = space.constant_function(0.5);
        verify_eigenpair(&space, 0.0, &constant, 1e-7).unwrap();

        // The interpolated family certifies at the shared eigenvalue.
        for mu in [0.25, 0.5, 0.75, 1.0] {
            let mut vals = vec![mu; 2];
            vals[1 - a] = mu - 1.0;
            let f = space.function_from_values(vals);
            verify_eigenpair(&space, 1.0 - p, &f, 1e-7).unwrap();
        }

        // No other value on a coarse grid certifies.
        let fam = [
            space.function_from_values(vec![1.0, -1.0]),
            space.function_from_values(vec![1.0, 0.0]),
            space.function_from_values(vec![1.0, 1.0]),
        ];
        for k in 0..=100 {
            let lambda = k as f64 / 100.0;
            let near_known =
                lambda.abs() < 1e-6 || (lambda - (1.0 - p)).abs() < 1e-6;
            let any = fam
                .iter()
                .any(|f| verify_eigenpair(&space, lambda, f, 1e-7).is_ok());
            assert_eq!(any, near_known, "lambda = {lambda}");
        }
    }

    #[test]
    fn triangle_median_blocks_halved_indicator() {
        let space = triangle();
        let omega = space.set_from_labels(&["a", "b"]).unwrap();
        let u = space.indicator(&omega).scaled(0.5);
        assert!(!zero_median(&space, &u));
        let err = verify_eigenpair(&space, 0.5, &u, 1e-7).unwrap_err();
        assert!(matches!(
            err,
            EigenError::Infeasible(InfeasibilityReason::MedianViolation { .. })
        ));
        let (lo, hi) = median_set(&space, &space.indicator(&omega));
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn median_interval_two_node() {
        let space = two_node(0.5);
        let u = space.function_from_values(vec![1.0, -1.0]);
        let (lo, hi) = median_set(&space, &u);
        assert_eq!((lo, hi), (-1.0, 1.0));
        assert!(zero_median(&space, &u));
        let c = space.constant_function(3.0);
        assert_eq!(median_set(&space, &c), (3.0, 3.0));
    }

    #[test]
    fn search_two_node_finds_both_eigenvalues() {
        let p = 0.4;
        let space = two_node(p);
        let found =
            set_eigenpair_search(&space, SearchMode::Exhaustive { limit: 22 }, 1e-7).unwrap();
        let lambdas: Vec<f64> = found.iter().map(|r| r.lambda).collect();
        assert!(lambdas.iter().any(|&l| l.abs() < 1e-12));
        assert!(lambdas.iter().any(|&l| (l - (1.0 - p)).abs() < 1e-12));
    }

    #[test]
    fn balanced_two_node() {
        let p = 0.2;
        let space = two_node(p);
        let omega = space.set_from_labels(&["a"]).unwrap();
        let report = balanced_pair_eigencheck(&space, &omega, 1e-7).unwrap();
        assert!(report.certified);
        assert!((report.lambda - (1.0 - p)).abs() < 1e-12);
        assert_eq!(report.certificates.len(), 3);

        let space2 = triangle();
        let unbalanced = space2.set_from_labels(&["a"]).unwrap();
        assert!(matches!(
            balanced_pair_eigencheck(&space2, &unbalanced, 1e-7),
            Err(EigenError::Cheeger(CheegerError::NotBalanced { .. }))
        ));
    }
}
