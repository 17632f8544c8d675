//! Isoperimetric profiles and the Sobolev-type inequalities they are
//! equivalent to on finite spaces.

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{dirichlet_energy, total_variation};
use crate::solver::subsets::scan_subsets;
use crate::space::{RandomWalkSpace, StateFunction, StateSet};

#[derive(Debug, Error)]
pub enum IsoError {
    #[error("space has {size} states, exceeding the exhaustive limit {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("trial function {index} has no zero state, so it is not compactly supported")]
    TrialNotCompactlySupported { index: usize },
    #[error("psi table must be nonincreasing")]
    PsiNotMonotone,
    #[error("dimension must exceed 2 for the Dirichlet form variant")]
    DimensionTooSmall,
}

#[derive(Debug, Clone)]
pub struct IsoBreakpoint {
    pub volume: f64,
    pub min_perimeter: f64,
    pub witness: StateSet,
}

/// Exact minimum perimeter at every achievable volume. Volumes are the
/// finite set `{nu(A)}`: no interpolation happens between breakpoints.
#[derive(Debug, Clone)]
pub struct IsoProfile {
    pub breakpoints: Vec<IsoBreakpoint>,
    pub total_volume: f64,
}

impl IsoProfile {
    pub fn min_perimeter_at(&self, volume: f64, tol: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .filter(|bp| (bp.volume - volume).abs() <= tol)
            .map(|bp| bp.min_perimeter)
            .fold(None, |acc, p| Some(acc.map_or(p, |a: f64| a.min(p))))
    }

    /// `min P*(v)/v` over `v <= nu(X)/2`: the global balanced constant.
    pub fn balanced_cheeger(&self) -> f64 {
        let half = 0.5 * self.total_volume * (1.0 + 1e-12);
        self.breakpoints
            .iter()
            .filter(|bp| bp.volume <= half && bp.volume > 0.0)
            .map(|bp| bp.min_perimeter / bp.volume)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Enumerates all proper nonempty subsets and keeps the perimeter minimum
/// per achievable volume (canonically resummed to keep volumes exact).
pub fn iso_profile(space: &RandomWalkSpace, limit: usize) -> Result<IsoProfile, IsoError> {
    let n = space.len();
    if n > limit {
        return Err(IsoError::TooLarge { size: n, limit });
    }
    let domain: Vec<u32> = (0..n as u32).collect();
    let mut best: HashMap<u64, (f64, u64)> = HashMap::new();
    scan_subsets(space, &domain, |view| {
        let count = view.members.iter().filter(|&&m| m).count();
        if count == n {
            return;
        }
        // Canonical index-order resummation keeps equal-volume subsets in
        // one bucket regardless of the Gray-code flip history.
        let mut volume = 0.0;
        for (i, &m) in view.members.iter().enumerate() {
            if m {
                volume += space.nu(i as u32);
            }
        }
        let key = volume.to_bits();
        match best.get_mut(&key) {
            Some((p, mask)) => {
                if view.perimeter < *p {
                    *p = view.perimeter;
                    *mask = view.mask;
                }
            }
            None => {
                best.insert(key, (view.perimeter, view.mask));
            }
        }
    });
    let mut breakpoints: Vec<IsoBreakpoint> = best
        .into_iter()
        .map(|(bits, (perimeter, mask))| {
            let indices: Vec<u32> = (0..n as u32).filter(|&i| mask >> i & 1 == 1).collect();
            IsoBreakpoint {
                volume: f64::from_bits(bits),
                min_perimeter: perimeter,
                witness: space.set_from_indices(&indices),
            }
        })
        .collect();
    breakpoints.sort_by(|a, b| a.volume.partial_cmp(&b.volume).unwrap());
    Ok(IsoProfile {
        breakpoints,
        total_volume: space.nu_total(),
    })
}

/// Tight constant for `nu(A)^{(n-1)/n} <= I_n P(A)`, from the profile.
pub fn best_iso_constant(profile: &IsoProfile, n: f64) -> f64 {
    let exponent = (n - 1.0) / n;
    profile
        .breakpoints
        .iter()
        .filter(|bp| bp.volume > 0.0 && bp.volume < profile.total_volume)
        .map(|bp| bp.volume.powf(exponent) / bp.min_perimeter)
        .fold(0.0, f64::max)
}

/// Worst quotient `||u||_{n/(n-1)} / (I_n TV(u))` over trial functions
/// vanishing somewhere; at most 1 when `I_n` comes from the profile.
/// The n = 1 convention takes the sup norm on the left.
pub fn sobolev_check(
    space: &RandomWalkSpace,
    n: f64,
    i_n: f64,
    trials: &[StateFunction],
) -> Result<f64, IsoError> {
    let mut worst: f64 = 0.0;
    for (index, u) in trials.iter().enumerate() {
        space.check_function(u);
        if u.values().iter().all(|&v| v != 0.0) {
            return Err(IsoError::TrialNotCompactlySupported { index });
        }
        let lhs = if n == 1.0 {
            space.lp_norm(u, f64::INFINITY)
        } else {
            space.lp_norm(u, n / (n - 1.0))
        };
        let rhs = i_n * total_variation(space, u);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        } else if lhs > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}

/// Nonincreasing table for a volume-dependent isoperimetric weight,
/// evaluated as a right-continuous step function.
#[derive(Debug, Clone)]
pub struct PsiTable {
    points: Vec<(f64, f64)>,
}

impl PsiTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, IsoError> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if points.windows(2).any(|w| w[1].1 > w[0].1 + 1e-12) {
            return Err(IsoError::PsiNotMonotone);
        }
        Ok(PsiTable { points })
    }

    /// Weight sharp at the profile: `psi(v) = P*(v)/v`.
    pub fn from_profile(profile: &IsoProfile) -> Self {
        let points = profile
            .breakpoints
            .iter()
            .filter(|bp| bp.volume > 0.0)
            .map(|bp| (bp.volume, bp.min_perimeter / bp.volume))
            .collect();
        // The profile quotient need not be monotone; take its running
        // lower envelope from the right so the table is admissible.
        let mut pts: Vec<(f64, f64)> = points;
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        let mut min_from_right = f64::INFINITY;
        for &(r, v) in pts.iter().rev() {
            min_from_right = min_from_right.min(v);
            envelope.push((r, min_from_right));
        }
        envelope.reverse();
        PsiTable { points: envelope }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let mut value = self.points.first().map_or(0.0, |p| p.1);
        for &(x, v) in &self.points {
            if x <= r {
                value = v;
            } else {
                break;
            }
        }
        value
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PsiCheckReport {
    pub worst_set_margin: f64,
    pub worst_function_quotient: f64,
    pub holds: bool,
}

/// Checks both sides of the weighted isoperimetric equivalence:
/// `nu(A) psi(nu(A)) <= P(A)` over the profile, and
/// `psi(nu(A)) ||u||_1 <= TV(u)` for trials supported in some proper `A`.
pub fn psi_iso_check(
    space: &RandomWalkSpace,
    psi: &PsiTable,
    profile: &IsoProfile,
    trials: &[StateFunction],
) -> Result<PsiCheckReport, IsoError> {
    let mut worst_set_margin: f64 = 0.0;
    for bp in &profile.breakpoints {
        if bp.volume <= 0.0 || bp.volume >= profile.total_volume {
            continue;
        }
        worst_set_margin = worst_set_margin.max(bp.volume * psi.eval(bp.volume) - bp.min_perimeter);
    }
    let mut worst_function_quotient: f64 = 0.0;
    for (index, u) in trials.iter().enumerate() {
        space.check_function(u);
        let support: Vec<u32> = (0..space.len() as u32)
            .filter(|&x| u.value(x) != 0.0)
            .collect();
        if support.len() == space.len() {
            return Err(IsoError::TrialNotCompactlySupported { index });
        }
        if support.is_empty() {
            continue;
        }
        let support_volume: f64 = support.iter().map(|&x| space.nu(x)).sum();
        let lhs = psi.eval(support_volume) * space.lp_norm(u, 1.0);
        let rhs = total_variation(space, u);
        if rhs > 0.0 {
            worst_function_quotient = worst_function_quotient.max(lhs / rhs);
        } else if lhs > 0.0 {
            worst_function_quotient = f64::INFINITY;
        }
    }
    let scale = 1.0 + space.nu_total();
    Ok(PsiCheckReport {
        worst_set_margin,
        worst_function_quotient,
        holds: worst_set_margin <= 1e-9 * scale && worst_function_quotient <= 1.0 + 1e-9,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DirichletSobolevReport {
    pub constant: f64,
    pub worst_quotient: f64,
    pub holds: bool,
}

/// `||u||^2_{2n/(n-2)} <= C_n H(u)` with `C_n = 8 (n-1)^2/(n-2)^2 I_n^2`,
/// checked on trial functions vanishing somewhere; needs `n > 2`.
pub fn dirichlet_sobolev_check(
    space: &RandomWalkSpace,
    n: f64,
    i_n: f64,
    trials: &[StateFunction],
) -> Result<DirichletSobolevReport, IsoError> {
    if n <= 2.0 {
        return Err(IsoError::DimensionTooSmall);
    }
    let constant = 8.0 * (n - 1.0).powi(2) / (n - 2.0).powi(2) * i_n * i_n;
    let mut worst: f64 = 0.0;
    for (index, u) in trials.iter().enumerate() {
        space.check_function(u);
        if u.values().iter().all(|&v| v != 0.0) {
            return Err(IsoError::TrialNotCompactlySupported { index });
        }
        let lhs = space.lp_norm(u, 2.0 * n / (n - 2.0)).powi(2);
        let rhs = constant * dirichlet_energy(space, u);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        } else if lhs > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(DirichletSobolevReport {
        constant,
        worst_quotient: worst,
        holds: worst <= 1.0 + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::perimeter;
    use crate::space::{from_weighted_graph, stencil_grid};

    #[test]
    fn singleton_breakpoints_match_loop_mass() {
        let space = from_weighted_graph(
            &[("a", "a", 0.5), ("a", "b", 1.0), ("b", "c", 2.0)],
            true,
        )
        .unwrap();
        let profile = iso_profile(&space, 22).unwrap();
        for x in 0..space.len() as u32 {
            let v = space.nu(x);
            let expected = v - space.loop_mass(x);
            let p = profile.min_perimeter_at(v, 1e-12).unwrap();
            assert!(p <= expected + 1e-12);
        }
    }

    #[test]
    fn complement_symmetry_on_torus() {
        let stencil = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];
        let torus = stencil_grid(4, 4, &stencil, true).unwrap();
        let profile = iso_profile(&torus, 22).unwrap();
        for bp in &profile.breakpoints {
            let mirror = profile.total_volume - bp.volume;
            if mirror <= 0.0 || mirror >= profile.total_volume {
                continue;
            }
            let other = profile.min_perimeter_at(mirror, 1e-9).unwrap();
            assert!(
                (other - bp.min_perimeter).abs() < 1e-9,
                "volume {}: {} vs {}",
                bp.volume,
                bp.min_perimeter,
                other
            );
        }
        // Witness perimeters agree with the geometry module.
        for bp in profile.breakpoints.iter().take(5) {
            let direct = perimeter(&torus, &bp.witness);
            assert!((direct.perimeter - bp.min_perimeter).abs() < 1e-12);
        }
    }

    #[test]
    fn two_node_best_constant() {
        let space = from_weighted_graph(&[("a", "b", 1.0)], false).unwrap();
        let profile = iso_profile(&space, 22).unwrap();
        let i1 = best_iso_constant(&profile, 1.0);
        assert!((i1 - 1.0).abs() < 1e-12);
        // Scaling nu by c scales I_n by c^{(n-1)/n}/c = c^{-1/n}.
        let scaled = from_weighted_graph(&[("a", "b", 3.0)], false).unwrap();
        let sp = iso_profile(&scaled, 22).unwrap();
        let n = 2.0;
        let ratio = best_iso_constant(&sp, n) / best_iso_constant(&profile, n);
        assert!((ratio - 3.0_f64.powf(-1.0 / n)).abs() < 1e-12);
    }

    #[test]
    fn sobolev_never_exceeds_one_with_best_constant() {
        let stencil = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];
        let torus = stencil_grid(3, 3, &stencil, true).unwrap();
        let profile = iso_profile(&torus, 22).unwrap();
        let n = 2.0;
        let i_n = best_iso_constant(&profile, n);
        let mut trials = Vec::new();
        for bp in &profile.breakpoints {
            trials.push(torus.indicator(&bp.witness));
        }
        // A staircase vanishing at one cell.
        let mut stair = vec![0.0; torus.len()];
        for (i, v) in stair.iter_mut().enumerate().skip(1) {
            *v = (i % 4) as f64;
        }
        trials.push(torus.function_from_values(stair));
        let worst = sobolev_check(&torus, n, i_n, &trials).unwrap();
        assert!(worst <= 1.0 + 1e-9, "worst = {worst}");
        // n = 1 uses the sup norm.
        let i_1 = best_iso_constant(&profile, 1.0);
        let worst1 = sobolev_check(&torus, 1.0, i_1, &trials).unwrap();
        assert!(worst1 <= 1.0 + 1e-9);
    }

    #[test]
    fn psi_from_profile_is_sharp() {
        let space = from_weighted_graph(
            &[("a", "b", 1.0), ("b", "c", 0.5), ("c", "d", 2.0)],
            false,
        )
        .unwrap();
        let profile = iso_profile(&space, 22).unwrap();
        let psi = PsiTable::from_profile(&profile);
        let trials = vec![
            space.indicator(&space.set_from_labels(&["a"]).unwrap()),
            space.indicator(&space.set_from_labels(&["a", "b"]).unwrap()),
        ];
        let report = psi_iso_check(&space, &psi, &profile, &trials).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn complete_graph_linear_psi() {
        // Five-state complete graph with unit weights and normalized nu:
        // the admissible weight is proportional to (total - volume).
        let mut edges = Vec::new();
        let names = ["a", "b", "c", "d", "e"];
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((names[i], names[j], 1.0));
            }
        }
        let space = from_weighted_graph(&edges, false).unwrap();
        let profile = iso_profile(&space, 22).unwrap();
        // nu(x) = 4, so nu(A) = 4r and P(A) = r(5 - r): psi(s) = (5 - s/4)/4.
        let psi = PsiTable::new(
            (1..5)
                .map(|r| {
                    let s = 4.0 * r as f64;
                    (s, (5.0 - r as f64) / 4.0)
                })
                .collect(),
        )
        .unwrap();
        let trials = vec![space.indicator(&space.set_from_labels(&["a", "b"]).unwrap())];
        let report = psi_iso_check(&space, &psi, &profile, &trials).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn dirichlet_variant_reduces_to_isoperimetry_on_indicators() {
        let stencil = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];
        let torus = stencil_grid(3, 3, &stencil, true).unwrap();
        let profile = iso_profile(&torus, 22).unwrap();
        let n = 3.0;
        let i_n = best_iso_constant(&profile, n);
        let trials: Vec<StateFunction> = profile
            .breakpoints
            .iter()
            .map(|bp| torus.indicator(&bp.witness))
            .collect();
        let report = dirichlet_sobolev_check(&torus, n, i_n, &trials).unwrap();
        assert!(report.holds, "worst = {}", report.worst_quotient);
        assert!(matches!(
            dirichlet_sobolev_check(&torus, 2.0, i_n, &trials),
            Err(IsoError::DimensionTooSmall)
        ));
    }

    #[test]
    fn profile_minimum_matches_global_cheeger() {
        let space = from_weighted_graph(
            &[
                ("a", "b", 1.0),
                ("b", "c", 0.5),
                ("c", "d", 2.0),
                ("d", "a", 1.0),
            ],
            false,
        )
        .unwrap();
        let profile = iso_profile(&space, 22).unwrap();
        let global = crate::cheeger::cheeger_global_exhaustive(&space, 22).unwrap();
        assert!((profile.balanced_cheeger() - global.value).abs() < 1e-12);
    }
}
