//! Deflated power iteration for the spectral gap of `I - K` in `L^2(nu)`.
//!
//! The kernel is similar to the symmetric matrix `S_ij = c_ij / sqrt(nu_i nu_j)`
//! whose top eigenpair is known exactly (eigenvalue 1, eigenvector sqrt(nu)).
//! Iterating the half-shifted operator `(I + S)/2` keeps the spectrum in
//! `[0, 1]` so the second-largest eigenvalue of `S` wins after deflation.

use crate::space::RandomWalkSpace;

pub struct SpectralGap {
    /// Second-smallest eigenvalue of `I - K` acting in `L^2(nu)`.
    pub gap: f64,
    /// Associated eigenvector, nu-orthogonal to constants, unit `L^2(nu)` norm.
    pub eigenvector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn spectral_gap(space: &RandomWalkSpace, tol: f64, max_iters: usize) -> SpectralGap {
    let n = space.len();
    if n == 1 {
        return SpectralGap {
            gap: 0.0,
            eigenvector: vec![0.0],
            residual: 0.0,
            iterations: 0,
        };
    }
    let sqrt_nu: Vec<f64> = space.nu_values().iter().map(|&v| v.sqrt()).collect();
    let norm_v1: f64 = space.nu_total().sqrt();
    let v1: Vec<f64> = sqrt_nu.iter().map(|&s| s / norm_v1).collect();

    let apply_s = |x: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = space.loop_mass(i as u32) / space.nu(i as u32) * x[i];
        }
        for e in space.edges() {
            let (a, b) = (e.a as usize, e.b as usize);
            let w = e.cond / (sqrt_nu[a] * sqrt_nu[b]);
            out[a] += w * x[b];
            out[b] += w * x[a];
        }
    };

    // Deterministic start orthogonal to v1.
    let mut x: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.7391).sin())
        .collect();
    let mut tmp = vec![0.0; n];
    let mut mu = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let dot: f64 = x.iter().zip(&v1).map(|(a, b)| a * b).sum();
        for i in 0..n {
            x[i] -= dot * v1[i];
        }
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-300 {
            // Start vector was parallel to constants; reseed.
            for (i, v) in x.iter_mut().enumerate() {
                *v = ((i as f64 + 2.0) * 1.2345).cos();
            }
            continue;
        }
        for v in x.iter_mut() {
            *v /= norm;
        }
        apply_s(&x, &mut tmp);
        // Half shift keeps eigenvalues of the iteration operator in [0, 1].
        for i in 0..n {
            tmp[i] = 0.5 * (tmp[i] + x[i]);
        }
        let rayleigh: f64 = x.iter().zip(&tmp).map(|(a, b)| a * b).sum();
        residual = tmp
            .iter()
            .zip(&x)
            .map(|(t, v)| (t - rayleigh * v).powi(2))
            .sum::<f64>()
            .sqrt();
        mu = 2.0 * rayleigh - 1.0;
        std::mem::swap(&mut x, &mut tmp);
        if residual < tol {
            break;
        }
    }
    // Back to L^2(nu) coordinates.
    let mut eig: Vec<f64> = x.iter().zip(&sqrt_nu).map(|(v, s)| v / s).collect();
    let norm_nu: f64 = eig
        .iter()
        .zip(space.nu_values())
        .map(|(v, n)| v * v * n)
        .sum::<f64>()
        .sqrt();
    if norm_nu > 0.0 {
        for v in eig.iter_mut() {
            *v /= norm_nu;
        }
    }
    SpectralGap {
        gap: 1.0 - mu,
        eigenvector: eig,
        residual,
        iterations,
    }
}
