//! Inverse power method for the nonsmooth ratio `TV(u) / ||u - med(u)||_1`.
//!
//! Each outer round solves `min TV(v) - lambda <v, s>_nu` over the unit
//! `L^2(nu)` ball with a primal-dual splitting, where `s` is a balanced
//! sign vector of the current iterate. Ratios are nonincreasing; the
//! iterates are returned so callers can round their level sets against
//! whichever set functional they minimize. Results are upper bounds only.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::solver::spectral::spectral_gap;
use crate::space::RandomWalkSpace;

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub seed: u64,
    pub restarts: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            seed: 0,
            restarts: 3,
            outer_iters: 24,
            inner_iters: 4000,
        }
    }
}

fn weighted_median(space: &RandomWalkSpace, u: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap());
    let half = 0.5 * space.nu_total();
    let mut acc = 0.0;
    for &i in &order {
        acc += space.nu(i as u32);
        if acc >= half {
            return u[i];
        }
    }
    u[order[u.len() - 1]]
}

/// Balanced subgradient of `||u - med||_1`: signs off the median set, a
/// constant on it chosen so the vector integrates to zero.
fn balanced_sign(space: &RandomWalkSpace, u: &[f64], med: f64) -> Vec<f64> {
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut zero = 0.0;
    for (i, &v) in u.iter().enumerate() {
        let nu = space.nu(i as u32);
        if v > med {
            plus += nu;
        } else if v < med {
            minus += nu;
        } else {
            zero += nu;
        }
    }
    let fill = if zero > 0.0 {
        ((minus - plus) / zero).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    u.iter()
        .map(|&v| {
            if v > med {
                1.0
            } else if v < med {
                -1.0
            } else {
                fill
            }
        })
        .collect()
}

fn tv_of(space: &RandomWalkSpace, u: &[f64]) -> f64 {
    space
        .edges()
        .iter()
        .map(|e| e.cond * (u[e.b as usize] - u[e.a as usize]).abs())
        .sum()
}

/// `min TV(v) - lambda <v,s>_nu` over the unit ball of `L^2(nu)`.
fn inner_minimize(
    space: &RandomWalkSpace,
    s: &[f64],
    lambda: f64,
    start: &[f64],
    iters: usize,
) -> Vec<f64> {
    let n = space.len();
    let ne = space.edges().len();
    let mut v = start.to_vec();
    let norm: f64 = v
        .iter()
        .enumerate()
        .map(|(i, &x)| x * x * space.nu(i as u32))
        .sum::<f64>()
        .sqrt();
    if norm > 1.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    let mut vbar = v.clone();
    let mut z = vec![0.0; ne];
    let lmax = (0..n as u32)
        .map(|x| space.row_sum(x))
        .fold(0.0_f64, f64::max);
    let step = 0.99 / (2.0 * lmax.max(1e-12)).sqrt();
    let mut grad = vec![0.0; n];
    for _ in 0..iters {
        for (k, e) in space.edges().iter().enumerate() {
            let d = vbar[e.b as usize] - vbar[e.a as usize];
            z[k] = (z[k] + step * d).clamp(-1.0, 1.0);
        }
        // grad = A* z - lambda s in the nu inner product.
        for x in grad.iter_mut() {
            *x = 0.0;
        }
        for (k, e) in space.edges().iter().enumerate() {
            let c = e.cond * z[k];
            grad[e.a as usize] -= c;
            grad[e.b as usize] += c;
        }
        let mut norm2 = 0.0;
        let v_old = v.clone();
        for i in 0..n {
            let nu = space.nu(i as u32);
            v[i] -= step * (grad[i] / nu - lambda * s[i]);
            norm2 += v[i] * v[i] * nu;
        }
        let r = norm2.sqrt();
        if r > 1.0 {
            for x in v.iter_mut() {
                *x /= r;
            }
        }
        for i in 0..n {
            vbar[i] = 2.0 * v[i] - v_old[i];
        }
    }
    v
}

/// Runs the inverse power iterations from spectral and perturbed starts.
/// Returns every outer iterate of every restart (median-centered), each a
/// candidate for level-set rounding.
pub fn ratio_minimizer_iterates(space: &RandomWalkSpace, opts: &IpmOptions) -> Vec<Vec<f64>> {
    let n = space.len();
    let spectral = spectral_gap(space, 1e-12, 20_000);
    let mut collected: Vec<Vec<f64>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for restart in 0..opts.restarts.max(1) {
        let mut u: Vec<f64> = if restart == 0 {
            spectral.eigenvector.clone()
        } else {
            spectral
                .eigenvector
                .iter()
                .map(|&v| v + 0.3 * restart as f64 * rng.gen_range(-1.0..1.0))
                .collect()
        };
        if u.iter().all(|&v| v == 0.0) {
            u = (0..n).map(|i| (i as f64).sin()).collect();
        }
        let mut best_ratio = f64::INFINITY;
        for _ in 0..opts.outer_iters {
            let med = weighted_median(space, &u);
            let centered: Vec<f64> = u.iter().map(|&v| v - med).collect();
            let l1: f64 = centered
                .iter()
                .enumerate()
                .map(|(i, &v)| v.abs() * space.nu(i as u32))
                .sum();
            if l1 <= 1e-300 {
                break;
            }
            let scaled: Vec<f64> = centered.iter().map(|&v| v / l1).collect();
            collected.push(scaled.clone());
            let ratio = tv_of(space, &scaled) / {
                let s: f64 = scaled
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v.abs() * space.nu(i as u32))
                    .sum();
                s
            };
            if ratio >= best_ratio - 1e-12 {
                break;
            }
            best_ratio = ratio;
            let s = balanced_sign(space, &scaled, 0.0);
            u = inner_minimize(space, &s, ratio, &scaled, opts.inner_iters);
        }
    }
    collected
}
