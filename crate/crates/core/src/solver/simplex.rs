//! Dense two-phase simplex for box-constrained linear programs.
//!
//! Solves `min c'x  s.t.  A x = b,  lo <= x <= hi` with possibly infinite
//! bounds. Sized for the small dense systems produced by flux-certificate
//! feasibility and dual-norm problems (a few hundred rows).

pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Row-major constraint matrix, `m x n`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal,
    /// Phase 1 could not zero the residuals; carries the total remaining
    /// infeasibility and the row with the largest residual.
    Infeasible { total: f64, worst_row: usize },
    Unbounded,
    /// Iteration cap hit; the returned point is the best basic point found.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub outcome: LpOutcome,
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    FreeAtZero,
}

struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    m: usize,
    n: usize,
    basis: Vec<usize>,
    state: Vec<VarState>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-9;

impl Tableau {
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(r) => self.xb[r],
            VarState::AtLower => self.lo[j],
            VarState::AtUpper => self.hi[j],
            VarState::FreeAtZero => 0.0,
        }
    }

    fn refresh_basic_values(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.n {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for i in 0..self.m {
                    rhs[i] -= self.a[i][j] * v;
                }
            }
        }
        for r in 0..self.m {
            let mut acc = 0.0;
            for i in 0..self.m {
                acc += self.binv[r][i] * rhs[i];
            }
            self.xb[r] = acc;
        }
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        for r in 0..self.m {
            let mut acc = 0.0;
            for i in 0..self.m {
                acc += self.binv[r][i] * self.a[i][j];
            }
            out[r] = acc;
        }
    }

    fn duals(&self, cost: &[f64], y: &mut [f64]) {
        for i in 0..self.m {
            let mut acc = 0.0;
            for (r, &bj) in self.basis.iter().enumerate() {
                acc += cost[bj] * self.binv[r][i];
            }
            y[i] = acc;
        }
    }

    /// Runs the simplex on the given cost vector. Returns false when the
    /// problem is unbounded in that cost.
    fn optimize(&mut self, cost: &[f64], max_iters: usize) -> Result<(), LpOutcome> {
        let mut y = vec![0.0; self.m];
        let mut w = vec![0.0; self.m];
        let mut iters = 0usize;
        let bland_after = max_iters / 2;
        loop {
            iters += 1;
            if iters > max_iters {
                return Err(LpOutcome::Stalled);
            }
            if iters % 64 == 0 {
                self.refresh_basic_values();
            }
            self.duals(cost, &mut y);

            // Price nonbasic columns.
            let bland = iters > bland_after;
            let mut entering: Option<(usize, f64, f64)> = None; // (j, direction, score)
            for j in 0..self.n {
                let (dir, score) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower | VarState::AtUpper | VarState::FreeAtZero => {
                        let mut d = cost[j];
                        for i in 0..self.m {
                            d -= y[i] * self.a[i][j];
                        }
                        match self.state[j] {
                            VarState::AtLower if d < -COST_TOL => (1.0, -d),
                            VarState::AtUpper if d > COST_TOL => (-1.0, d),
                            VarState::FreeAtZero if d.abs() > COST_TOL => {
                                (if d > 0.0 { -1.0 } else { 1.0 }, d.abs())
                            }
                            _ => continue,
                        }
                    }
                };
                if bland {
                    entering = Some((j, dir, score));
                    break;
                }
                if entering.map_or(true, |(_, _, s)| score > s) {
                    entering = Some((j, dir, score));
                }
            }
            let Some((j, dir, _)) = entering else {
                return Ok(());
            };

            self.column(j, &mut w);
            // Ratio test: basic variables hitting a bound, or the entering
            // variable flipping to its opposite bound.
            let mut t_best = if self.lo[j].is_finite() && self.hi[j].is_finite() {
                self.hi[j] - self.lo[j]
            } else {
                INF
            };
            let mut leaving: Option<(usize, bool)> = None; // (row, hits_upper)
            for r in 0..self.m {
                let delta = -dir * w[r];
                let bj = self.basis[r];
                if delta < -PIVOT_TOL {
                    if self.lo[bj].is_finite() {
                        let t = (self.xb[r] - self.lo[bj]) / (-delta);
                        if t < t_best - PIVOT_TOL
                            || (t < t_best + PIVOT_TOL
                                && leaving.map_or(true, |(lr, _)| self.basis[lr] > bj))
                        {
                            t_best = t.max(0.0);
                            leaving = Some((r, false));
                        }
                    }
                } else if delta > PIVOT_TOL && self.hi[bj].is_finite() {
                    let t = (self.hi[bj] - self.xb[r]) / delta;
                    if t < t_best - PIVOT_TOL
                        || (t < t_best + PIVOT_TOL
                            && leaving.map_or(true, |(lr, _)| self.basis[lr] > bj))
                    {
                        t_best = t.max(0.0);
                        leaving = Some((r, true));
                    }
                }
            }
            if t_best.is_infinite() {
                return Err(LpOutcome::Unbounded);
            }

            match leaving {
                None => {
                    // Bound flip of the entering variable.
                    for r in 0..self.m {
                        self.xb[r] -= dir * t_best * w[r];
                    }
                    self.state[j] = match self.state[j] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        s => s,
                    };
                }
                Some((r, hits_upper)) => {
                    let old = self.basis[r];
                    let enter_value = self.nonbasic_value(j) + dir * t_best;
                    for i in 0..self.m {
                        self.xb[i] -= dir * t_best * w[i];
                    }
                    self.state[old] = if hits_upper {
                        VarState::AtUpper
                    } else if self.lo[old].is_finite() {
                        VarState::AtLower
                    } else {
                        VarState::FreeAtZero
                    };
                    self.basis[r] = j;
                    self.state[j] = VarState::Basic(r);
                    self.xb[r] = enter_value;
                    // Pivot the inverse.
                    let pivot = w[r];
                    for i in 0..self.m {
                        if i != r {
                            let factor = w[i] / pivot;
                            if factor != 0.0 {
                                for k in 0..self.m {
                                    self.binv[i][k] -= factor * self.binv[r][k];
                                }
                            }
                        }
                    }
                    for k in 0..self.m {
                        self.binv[r][k] /= pivot;
                    }
                }
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> LpSolution {
    let m = lp.b.len();
    let n = lp.c.len();
    debug_assert!(lp.a.iter().all(|row| row.len() == n));
    debug_assert_eq!(lp.a.len(), m);

    // Nonbasic start at a finite bound (or zero for free variables).
    let mut state: Vec<VarState> = (0..n)
        .map(|j| {
            if lp.lo[j].is_finite() {
                VarState::AtLower
            } else if lp.hi[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeAtZero
            }
        })
        .collect();

    // Residuals the artificials must cover.
    let mut resid = lp.b.clone();
    for j in 0..n {
        let v = match state[j] {
            VarState::AtLower => lp.lo[j],
            VarState::AtUpper => lp.hi[j],
            _ => 0.0,
        };
        if v != 0.0 {
            for i in 0..m {
                resid[i] -= lp.a[i][j] * v;
            }
        }
    }

    // Extend with one artificial per row, signed to start feasible.
    let total_n = n + m;
    let mut a = vec![vec![0.0; total_n]; m];
    for i in 0..m {
        a[i][..n].copy_from_slice(&lp.a[i]);
        a[i][n + i] = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
    }
    let mut lo = lp.lo.clone();
    let mut hi = lp.hi.clone();
    lo.extend(std::iter::repeat(0.0).take(m));
    hi.extend(std::iter::repeat(INF).take(m));
    let mut basis = Vec::with_capacity(m);
    let mut xb = Vec::with_capacity(m);
    for i in 0..m {
        basis.push(n + i);
        state.push(VarState::Basic(i));
        xb.push(resid[i].abs());
    }
    // The starting basis is the signed artificial block, so its inverse is
    // the same sign pattern.
    let binv: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; m];
            row[i] = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            row
        })
        .collect();

    let mut tab = Tableau {
        a,
        b: lp.b.clone(),
        lo,
        hi,
        m,
        n: total_n,
        basis,
        state,
        binv,
        xb,
    };

    let scale = 1.0 + lp.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let max_iters = 400 * (total_n + m) + 2000;

    // Phase 1: drive the artificials to zero.
    let mut phase1_cost = vec![0.0; total_n];
    for j in n..total_n {
        phase1_cost[j] = 1.0;
    }
    let phase1 = tab.optimize(&phase1_cost, max_iters);
    tab.refresh_basic_values();
    let infeas: f64 = (n..total_n).map(|j| tab.nonbasic_value(j).max(0.0)).sum();
    if let Err(out @ LpOutcome::Stalled) = phase1 {
        if infeas > 1e-7 * scale {
            return extract(&tab, lp, out);
        }
    }
    if infeas > 1e-9 * scale {
        let worst = (0..m)
            .max_by(|&i, &j| {
                let vi = tab.nonbasic_value(n + i);
                let vj = tab.nonbasic_value(n + j);
                vi.partial_cmp(&vj).unwrap()
            })
            .unwrap_or(0);
        return extract(
            &tab,
            lp,
            LpOutcome::Infeasible {
                total: infeas,
                worst_row: worst,
            },
        );
    }

    // Lock the artificials at zero and optimize the real objective.
    for j in n..total_n {
        tab.hi[j] = 0.0;
        if !matches!(tab.state[j], VarState::Basic(_)) {
            tab.state[j] = VarState::AtLower;
        }
    }
    let mut phase2_cost = lp.c.clone();
    phase2_cost.extend(std::iter::repeat(0.0).take(m));
    let outcome = match tab.optimize(&phase2_cost, max_iters) {
        Ok(()) => LpOutcome::Optimal,
        Err(out) => out,
    };
    tab.refresh_basic_values();
    extract(&tab, lp, outcome)
}

fn extract(tab: &Tableau, lp: &LinearProgram, outcome: LpOutcome) -> LpSolution {
    let n = lp.c.len();
    let x: Vec<f64> = (0..n).map(|j| tab.nonbasic_value(j)).collect();
    let objective = x.iter().zip(&lp.c).map(|(v, c)| v * c).sum();
    LpSolution {
        outcome,
        x,
        objective,
    }
}

/// Feasibility of `A x = b, lo <= x <= hi`: the phase-1 residual per row.
pub fn feasibility(lp: &LinearProgram) -> (LpSolution, Vec<f64>) {
    let sol = solve(&LinearProgram {
        c: vec![0.0; lp.c.len()],
        ..lp.clone()
    });
    let mut residuals = vec![0.0; lp.b.len()];
    for (i, row) in lp.a.iter().enumerate() {
        let lhs: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
        residuals[i] = lhs - lp.b[i];
    }
    (sol, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bounded_lp() {
        // min -x - 2y  s.t.  x + y = 1,  0 <= x,y <= 1  ->  y = 1, x = 0.
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0]],
            b: vec![1.0],
            c: vec![-1.0, -2.0],
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let sol = solve(&lp);
        assert_eq!(sol.outcome, LpOutcome::Optimal);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_lp() {
        // min x  s.t.  x - y = 3, 0 <= y <= 2, x free  ->  x = 3 at y = 0.
        let lp = LinearProgram {
            a: vec![vec![1.0, -1.0]],
            b: vec![3.0],
            c: vec![1.0, 0.0],
            lo: vec![-INF, 0.0],
            hi: vec![INF, 2.0],
        };
        let sol = solve(&lp);
        assert_eq!(sol.outcome, LpOutcome::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_box() {
        // x + y = 5 with x, y in [0,1] cannot hold.
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0]],
            b: vec![5.0],
            c: vec![0.0, 0.0],
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let sol = solve(&lp);
        assert!(matches!(sol.outcome, LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram {
            a: vec![vec![1.0, -1.0]],
            b: vec![0.0],
            c: vec![-1.0, 0.0],
            lo: vec![0.0, 0.0],
            hi: vec![INF, INF],
        };
        let sol = solve(&lp);
        assert_eq!(sol.outcome, LpOutcome::Unbounded);
    }

    #[test]
    fn random_feasible_systems_have_zero_phase1() {
        // Construct A x* = b from a known in-box point and check phase 1.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..50 {
            let m = 2 + trial % 5;
            let n = m + 1 + trial % 7;
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| 2.0 * next() - 1.0).collect())
                .collect();
            let xstar: Vec<f64> = (0..n).map(|_| next()).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|row| row.iter().zip(&xstar).map(|(r, x)| r * x).sum())
                .collect();
            let lp = LinearProgram {
                a,
                b,
                c: vec![0.0; n],
                lo: vec![0.0; n],
                hi: vec![1.0; n],
            };
            let (sol, residuals) = feasibility(&lp);
            assert_eq!(sol.outcome, LpOutcome::Optimal, "trial {trial}");
            for r in residuals {
                assert!(r.abs() < 1e-8, "trial {trial}: residual {r}");
            }
        }
    }
}
