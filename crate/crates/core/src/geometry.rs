//! Interaction, perimeter, total variation, curvature and the coarea
//! identity. Every quantity is a finite sum over the kernel support.

use thiserror::Error;

use crate::space::{RandomWalkSpace, StateFunction, StateSet};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("sets overlap on {0} states")]
    OverlappingSets(usize),
    #[error("map is not monotone between breakpoints {0} and {1}")]
    NotMonotone(f64, f64),
    #[error("map needs at least two breakpoints")]
    TooFewBreakpoints,
}

/// Perimeter of a set together with its identity partners.
#[derive(Debug, Clone)]
pub struct PerimeterReport {
    pub perimeter: f64,
    pub volume: f64,
    /// `perimeter / volume`; `None` when the set is nu-null.
    pub ratio: Option<f64>,
    /// `L_m(E, E)`, so that `perimeter = volume - self_interaction`.
    pub self_interaction: f64,
}

/// `L_m(A,B)`: nu-weighted jump flux from `A` into `B`. Symmetric in its
/// arguments because the stored conductances are.
pub fn interaction(space: &RandomWalkSpace, a: &StateSet, b: &StateSet) -> f64 {
    space.check_set(a);
    space.check_set(b);
    let mut acc = 0.0;
    for e in space.edges() {
        if a.contains(e.a) && b.contains(e.b) {
            acc += e.cond;
        }
        if a.contains(e.b) && b.contains(e.a) {
            acc += e.cond;
        }
    }
    for x in 0..space.len() as u32 {
        if a.contains(x) && b.contains(x) {
            acc += space.loop_mass(x);
        }
    }
    acc
}

pub fn perimeter(space: &RandomWalkSpace, e: &StateSet) -> PerimeterReport {
    space.check_set(e);
    let mut perimeter = 0.0;
    let mut self_interaction = 0.0;
    for edge in space.edges() {
        match (e.contains(edge.a), e.contains(edge.b)) {
            (true, true) => self_interaction += 2.0 * edge.cond,
            (true, false) | (false, true) => perimeter += edge.cond,
            (false, false) => {}
        }
    }
    for x in e.iter() {
        self_interaction += space.loop_mass(x);
    }
    let volume = space.nu_of_set(e);
    let ratio = if volume > 0.0 {
        Some(perimeter / volume)
    } else {
        None
    };
    PerimeterReport {
        perimeter,
        volume,
        ratio,
        self_interaction,
    }
}

/// Perimeter localized to a window: `L_m(E∩W, X∖E) + L_m(E∖W, W∖E)`.
pub fn localized_perimeter(space: &RandomWalkSpace, e: &StateSet, window: &StateSet) -> f64 {
    let complement = e.complement();
    let inside = e.intersection(window);
    let outside = e.difference(window);
    let window_free = window.difference(e);
    interaction(space, &inside, &complement) + interaction(space, &outside, &window_free)
}

/// Residual of `P(A∪B) = P(A) + P(B) - 2 L(A,B)` for disjoint sets.
pub fn union_perimeter_residual(
    space: &RandomWalkSpace,
    a: &StateSet,
    b: &StateSet,
) -> Result<f64, GeometryError> {
    if !a.is_disjoint(b) {
        return Err(GeometryError::OverlappingSets(
            a.intersection(b).count(),
        ));
    }
    let union = a.union(b);
    let lhs = perimeter(space, &union).perimeter;
    let rhs = perimeter(space, a).perimeter + perimeter(space, b).perimeter
        - 2.0 * interaction(space, a, b);
    Ok((lhs - rhs).abs())
}

/// `TV_m(u) = (1/2) \sum_x nu(x) \sum_y K(x,y) |u(y) - u(x)|`.
pub fn total_variation(space: &RandomWalkSpace, u: &StateFunction) -> f64 {
    space.check_function(u);
    space
        .edges()
        .iter()
        .map(|e| e.cond * (u.value(e.b) - u.value(e.a)).abs())
        .sum()
}

/// Signed boundary-crossing bias `H(x) = 1 - 2 m_x(E)`, defined on all of X.
pub fn mean_curvature(space: &RandomWalkSpace, e: &StateSet) -> StateFunction {
    space.check_set(e);
    let values = (0..space.len() as u32)
        .map(|x| 1.0 - 2.0 * space.jump_mass(x, e))
        .collect();
    space.function_from_values(values)
}

#[derive(Debug, Clone, Copy)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Level-set decomposition of the total variation, summed exactly over the
/// sorted distinct values of `u` (the integrand is piecewise constant).
pub fn coarea_check(space: &RandomWalkSpace, u: &StateFunction) -> CoareaReport {
    space.check_function(u);
    let lhs = total_variation(space, u);
    let n = space.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| u.value(b).partial_cmp(&u.value(a)).unwrap());

    // Walk values downward keeping the superlevel set incremental.
    let mut in_set = vec![false; n];
    let mut cut_to_set = vec![0.0; n];
    let mut perim = 0.0;
    let boundary: Vec<f64> = (0..n as u32)
        .map(|x| space.incident(x).iter().map(|&e| space.edges()[e as usize].cond).sum())
        .collect();

    let mut rhs = 0.0;
    let mut k = 0;
    let mut prev_value: Option<f64> = None;
    while k < n {
        let v = u.value(order[k]);
        if let Some(pv) = prev_value {
            // Between levels v and pv the superlevel set is constant.
            rhs += (pv - v) * perim;
        }
        prev_value = Some(v);
        while k < n && u.value(order[k]) == v {
            let x = order[k];
            perim += boundary[x as usize] - 2.0 * cut_to_set[x as usize];
            in_set[x as usize] = true;
            for &e in space.incident(x) {
                let y = space.other_end(e, x);
                cut_to_set[y as usize] += space.edges()[e as usize].cond;
            }
            k += 1;
        }
    }
    CoareaReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    }
}

/// Monotone piecewise-linear real map with constant extension outside
/// its breakpoint range.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    breakpoints: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(mut breakpoints: Vec<(f64, f64)>) -> Result<Self, GeometryError> {
        if breakpoints.len() < 2 {
            return Err(GeometryError::TooFewBreakpoints);
        }
        breakpoints.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let increasing = breakpoints.windows(2).all(|w| w[1].1 >= w[0].1);
        let decreasing = breakpoints.windows(2).all(|w| w[1].1 <= w[0].1);
        if !increasing && !decreasing {
            return Err(GeometryError::NotMonotone(breakpoints[0].0, breakpoints[1].0));
        }
        Ok(PiecewiseLinear { breakpoints })
    }

    pub fn identity(lo: f64, hi: f64) -> Self {
        PiecewiseLinear {
            breakpoints: vec![(lo, lo), (hi, hi)],
        }
    }

    pub fn scale(c: f64, lo: f64, hi: f64) -> Self {
        let mut bp = vec![(lo, c * lo), (hi, c * hi)];
        if c < 0.0 {
            bp.reverse();
        }
        PiecewiseLinear { breakpoints: bp }
    }

    pub fn clamp01() -> Self {
        PiecewiseLinear {
            breakpoints: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        if x <= bp[0].0 {
            return bp[0].1;
        }
        if x >= bp[bp.len() - 1].0 {
            return bp[bp.len() - 1].1;
        }
        for w in bp.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        bp[bp.len() - 1].1
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| {
                let dx = w[1].0 - w[0].0;
                if dx > 0.0 {
                    ((w[1].1 - w[0].1) / dx).abs()
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LipschitzReport {
    pub tv_mapped: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks `TV(phi(u)) <= Lip(phi) TV(u)`.
pub fn lipschitz_contraction_check(
    space: &RandomWalkSpace,
    u: &StateFunction,
    phi: &PiecewiseLinear,
) -> LipschitzReport {
    let mapped = u.map(|v| phi.eval(v));
    let tv_mapped = total_variation(space, &mapped);
    let bound = phi.lipschitz_constant() * total_variation(space, u);
    let scale = 1.0_f64.max(bound);
    LipschitzReport {
        tv_mapped,
        bound,
        holds: tv_mapped <= bound + 1e-12 * scale,
    }
}

/// Dirichlet energy `(1/2) \int\int (u(x) - u(y))^2 dm_x dnu`.
pub fn dirichlet_energy(space: &RandomWalkSpace, u: &StateFunction) -> f64 {
    space.check_function(u);
    space
        .edges()
        .iter()
        .map(|e| {
            let d = u.value(e.b) - u.value(e.a);
            e.cond * d * d
        })
        .sum()
}
