//! Finite reversible random walk spaces.
//!
//! A space is a finite state set together with a row-stochastic kernel
//! `K(x,y)` and a positive invariant measure `nu` satisfying detailed
//! balance `nu(x) K(x,y) = nu(y) K(y,x)`. The pair is stored through the
//! symmetric conductances `c(x,y) = nu(x) K(x,y)` on support pairs, which
//! keeps the balance identity exact for graph-built spaces and makes every
//! geometric quantity a plain sum over the support.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Default tolerance used by all validators.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_space_id() -> u64 {
    NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Undirected support pair with its conductance `c = nu(a) K(a,b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub cond: f64,
}

/// Worst-case residuals observed while validating a kernel.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub max_stochasticity_residual: f64,
    pub worst_stochasticity_state: Option<String>,
    pub max_balance_residual: f64,
    pub worst_balance_pair: Option<(String, String)>,
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("negative weight {weight} on edge ({a}, {b})")]
    NegativeWeight { a: String, b: String, weight: f64 },
    #[error("self-loop ({v}, {v}) not allowed here")]
    LoopNotAllowed { v: String },
    #[error("vertex {v} has zero degree")]
    IsolatedVertex { v: String },
    #[error("graph is disconnected: {0} is unreachable from {1}")]
    Disconnected(String, String),
    #[error("row sum residual {residual:.3e} at state {state} exceeds tolerance {tolerance:.3e}")]
    StochasticityViolation {
        state: String,
        residual: f64,
        tolerance: f64,
    },
    #[error(
        "detailed balance residual {residual:.3e} on pair ({x}, {y}) exceeds tolerance {tolerance:.3e}"
    )]
    DetailedBalanceViolation {
        x: String,
        y: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("space is not m-connected: no support path between {0} and {1}")]
    NotConnected(String, String),
    #[error("state set is empty")]
    EmptySet,
    #[error("restriction is not m-connected: no support path between {0} and {1}")]
    NotConnectedAfterRestriction(String, String),
    #[error("kernel entry ({x}, {y}) is negative: {value}")]
    NegativeKernelEntry { x: String, y: String, value: f64 },
    #[error("duplicate kernel entry for pair ({x}, {y})")]
    DuplicateKernelEntry { x: String, y: String },
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("point {id} has nonpositive mass {mu}")]
    NonpositiveMass { id: String, mu: f64 },
    #[error("point {id} has a ball containing only itself and zero mass")]
    EmptyBall { id: String },
    #[error("stencil is not symmetric under negation at offset ({dx}, {dy})")]
    AsymmetricStencil { dx: i32, dy: i32 },
    #[error("stencil has nonpositive total weight")]
    EmptyStencil,
    #[error("nu must be positive at state {0}")]
    NonpositiveMeasure(String),
}

/// Immutable validated space. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct RandomWalkSpace {
    id: u64,
    states: Vec<String>,
    index: BTreeMap<String, u32>,
    nu: Vec<f64>,
    nu_total: f64,
    edges: Vec<Edge>,
    loops: Vec<f64>,
    adjacency: Vec<Vec<u32>>,
    tolerance: f64,
    validation: ValidationReport,
}

impl RandomWalkSpace {
    fn assemble(
        states: Vec<String>,
        nu: Vec<f64>,
        edges: Vec<Edge>,
        loops: Vec<f64>,
        tolerance: f64,
        validation: ValidationReport,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); states.len()];
        for (e, edge) in edges.iter().enumerate() {
            adjacency[edge.a as usize].push(e as u32);
            adjacency[edge.b as usize].push(e as u32);
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let nu_total = nu.iter().sum();
        RandomWalkSpace {
            id: fresh_space_id(),
            states,
            index,
            nu,
            nu_total,
            edges,
            loops,
            adjacency,
            tolerance,
            validation,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn label(&self, i: u32) -> &str {
        &self.states[i as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn nu(&self, i: u32) -> f64 {
        self.nu[i as usize]
    }

    pub fn nu_values(&self) -> &[f64] {
        &self.nu
    }

    pub fn nu_total(&self) -> f64 {
        self.nu_total
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    /// Undirected support pairs (without self-loops).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Self-loop conductance `nu(x) K(x,x)`.
    pub fn loop_mass(&self, i: u32) -> f64 {
        self.loops[i as usize]
    }

    /// Edge ids incident to `i`.
    pub fn incident(&self, i: u32) -> &[u32] {
        &self.adjacency[i as usize]
    }

    /// The endpoint of edge `e` that is not `i`.
    pub fn other_end(&self, e: u32, i: u32) -> u32 {
        let edge = &self.edges[e as usize];
        if edge.a == i {
            edge.b
        } else {
            edge.a
        }
    }

    /// Kernel value `K(i,j)` derived from the conductance representation.
    pub fn kernel(&self, i: u32, j: u32) -> f64 {
        if i == j {
            return self.loops[i as usize] / self.nu[i as usize];
        }
        for &e in &self.adjacency[i as usize] {
            let edge = &self.edges[e as usize];
            if edge.a.min(edge.b) == i.min(j) && edge.a.max(edge.b) == i.max(j) {
                return edge.cond / self.nu[i as usize];
            }
        }
        0.0
    }

    /// Jump probability into a set: `m_x(S)`.
    pub fn jump_mass(&self, x: u32, set: &StateSet) -> f64 {
        self.check_set(set);
        let mut acc = 0.0;
        for &e in &self.adjacency[x as usize] {
            let y = self.other_end(e, x);
            if set.contains(y) {
                acc += self.edges[e as usize].cond;
            }
        }
        if set.contains(x) {
            acc += self.loops[x as usize];
        }
        acc / self.nu[x as usize]
    }

    /// Row sum `m_x(X)`; equals 1 within the validation tolerance.
    pub fn row_sum(&self, x: u32) -> f64 {
        let mut acc = self.loops[x as usize];
        for &e in &self.adjacency[x as usize] {
            acc += self.edges[e as usize].cond;
        }
        acc / self.nu[x as usize]
    }

    pub fn nu_of_set(&self, set: &StateSet) -> f64 {
        self.check_set(set);
        set.iter().map(|i| self.nu(i)).sum()
    }

    pub fn full_set(&self) -> StateSet {
        StateSet {
            space_id: self.id,
            members: vec![true; self.len()],
        }
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet {
            space_id: self.id,
            members: vec![false; self.len()],
        }
    }

    pub fn set_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<StateSet, SpaceError> {
        let mut set = self.empty_set();
        for l in labels {
            let i = self
                .index_of(l.as_ref())
                .ok_or_else(|| SpaceError::UnknownState(l.as_ref().to_string()))?;
            set.members[i as usize] = true;
        }
        Ok(set)
    }

    pub fn set_from_indices(&self, indices: &[u32]) -> StateSet {
        let mut set = self.empty_set();
        for &i in indices {
            set.members[i as usize] = true;
        }
        set
    }

    pub fn function_from_values(&self, values: Vec<f64>) -> StateFunction {
        assert_eq!(values.len(), self.len(), "function length must equal n");
        assert!(values.iter().all(|v| v.is_finite()), "entries must be finite");
        StateFunction {
            space_id: self.id,
            values,
        }
    }

    pub fn constant_function(&self, value: f64) -> StateFunction {
        self.function_from_values(vec![value; self.len()])
    }

    pub fn indicator(&self, set: &StateSet) -> StateFunction {
        self.check_set(set);
        let values = set.members.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        self.function_from_values(values)
    }

    pub(crate) fn check_set(&self, set: &StateSet) {
        assert_eq!(
            set.space_id, self.id,
            "state set is bound to a different space"
        );
        assert_eq!(set.members.len(), self.len());
    }

    pub(crate) fn check_function(&self, f: &StateFunction) {
        assert_eq!(
            f.space_id, self.id,
            "state function is bound to a different space"
        );
        assert_eq!(f.values.len(), self.len());
    }

    /// Mean with respect to `nu`, i.e. `(1/nu(X)) \int u dnu`.
    pub fn mean(&self, u: &StateFunction) -> f64 {
        self.check_function(u);
        self.integral(u) / self.nu_total
    }

    /// `\int u dnu`.
    pub fn integral(&self, u: &StateFunction) -> f64 {
        self.check_function(u);
        u.values.iter().zip(&self.nu).map(|(v, n)| v * n).sum()
    }

    /// `L^p(nu)` norm.
    pub fn lp_norm(&self, u: &StateFunction, p: f64) -> f64 {
        self.check_function(u);
        if p.is_infinite() {
            return u.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let s: f64 = u
            .values
            .iter()
            .zip(&self.nu)
            .map(|(v, n)| v.abs().powf(p) * n)
            .sum();
        s.powf(1.0 / p)
    }
}

/// Subset of states, bound to one space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    space_id: u64,
    members: Vec<bool>,
}

impl StateSet {
    pub fn contains(&self, i: u32) -> bool {
        self.members[i as usize]
    }

    pub fn insert(&mut self, i: u32) {
        self.members[i as usize] = true;
    }

    pub fn remove(&mut self, i: u32) {
        self.members[i as usize] = false;
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty_set(&self) -> bool {
        self.members.iter().all(|&m| !m)
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i as u32)
    }

    pub fn complement(&self) -> StateSet {
        StateSet {
            space_id: self.space_id,
            members: self.members.iter().map(|&m| !m).collect(),
        }
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        assert_eq!(self.space_id, other.space_id);
        StateSet {
            space_id: self.space_id,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        assert_eq!(self.space_id, other.space_id);
        StateSet {
            space_id: self.space_id,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        assert_eq!(self.space_id, other.space_id);
        StateSet {
            space_id: self.space_id,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| a && !b)
                .collect(),
        }
    }

    pub fn is_disjoint(&self, other: &StateSet) -> bool {
        assert_eq!(self.space_id, other.space_id);
        self.members
            .iter()
            .zip(&other.members)
            .all(|(&a, &b)| !(a && b))
    }

    pub fn labels(&self, space: &RandomWalkSpace) -> Vec<String> {
        space.check_set(self);
        self.iter().map(|i| space.label(i).to_string()).collect()
    }

    /// Sorted member indices, the deterministic tie-break key.
    pub fn sorted_indices(&self) -> Vec<u32> {
        self.iter().collect()
    }
}

impl fmt::Display for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Real-valued function on states, bound to one space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunction {
    space_id: u64,
    values: Vec<f64>,
}

impl StateFunction {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: u32) -> f64 {
        self.values[i as usize]
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> StateFunction {
        StateFunction {
            space_id: self.space_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &StateFunction, f: impl Fn(f64, f64) -> f64) -> StateFunction {
        assert_eq!(self.space_id, other.space_id);
        StateFunction {
            space_id: self.space_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> StateFunction {
        self.map(|v| c * v)
    }

    pub fn shifted(&self, c: f64) -> StateFunction {
        self.map(|v| v + c)
    }
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

/// Builds a space from a symmetric weighted graph: `K(x,y) = w_xy / d_x`
/// with `nu(x) = d_x`. Detailed balance holds exactly because the stored
/// conductance of every edge is the weight itself.
pub fn from_weighted_graph<S: AsRef<str>>(
    edges: &[(S, S, f64)],
    allow_loops: bool,
) -> Result<RandomWalkSpace, SpaceError> {
    let mut labels: Vec<&str> = Vec::new();
    for (a, b, w) in edges {
        if *w < 0.0 {
            return Err(SpaceError::NegativeWeight {
                a: a.as_ref().to_string(),
                b: b.as_ref().to_string(),
                weight: *w,
            });
        }
        if a.as_ref() == b.as_ref() && !allow_loops {
            return Err(SpaceError::LoopNotAllowed {
                v: a.as_ref().to_string(),
            });
        }
        labels.push(a.as_ref());
        labels.push(b.as_ref());
    }
    labels.sort_unstable();
    labels.dedup();
    let states: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, u32> = labels
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i as u32))
        .collect();
    let n = states.len();

    let mut loops = vec![0.0; n];
    let mut pair_weights: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (a, b, w) in edges {
        let i = index[a.as_ref()];
        let j = index[b.as_ref()];
        if i == j {
            loops[i as usize] += w;
        } else {
            *pair_weights.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
    }
    let edge_list: Vec<Edge> = pair_weights
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|((a, b), w)| Edge { a, b, cond: w })
        .collect();

    let mut nu = loops.clone();
    for e in &edge_list {
        nu[e.a as usize] += e.cond;
        nu[e.b as usize] += e.cond;
    }
    for (i, &d) in nu.iter().enumerate() {
        if d <= 0.0 {
            return Err(SpaceError::IsolatedVertex {
                v: states[i].clone(),
            });
        }
    }
    if let Some((a, b)) = find_disconnection(n, &edge_list) {
        return Err(SpaceError::Disconnected(
            states[a as usize].clone(),
            states[b as usize].clone(),
        ));
    }
    Ok(RandomWalkSpace::assemble(
        states,
        nu,
        edge_list,
        loops,
        DEFAULT_TOLERANCE,
        ValidationReport::default(),
    ))
}

/// Validates an explicit kernel against row-stochasticity, detailed balance
/// and m-connectedness, then stores its symmetrized conductances.
pub fn from_kernel<S: AsRef<str>>(
    states: &[(S, f64)],
    entries: &[(S, S, f64)],
    tolerance: f64,
) -> Result<RandomWalkSpace, SpaceError> {
    let state_names: Vec<String> = states.iter().map(|(s, _)| s.as_ref().to_string()).collect();
    let nu: Vec<f64> = states.iter().map(|(_, n)| *n).collect();
    for (s, n) in state_names.iter().zip(&nu) {
        if *n <= 0.0 {
            return Err(SpaceError::NonpositiveMeasure(s.clone()));
        }
    }
    let index: BTreeMap<&str, u32> = state_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let n = state_names.len();

    let mut kernel: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (x, y, k) in entries {
        let i = *index
            .get(x.as_ref())
            .ok_or_else(|| SpaceError::UnknownState(x.as_ref().to_string()))?;
        let j = *index
            .get(y.as_ref())
            .ok_or_else(|| SpaceError::UnknownState(y.as_ref().to_string()))?;
        if *k < 0.0 {
            return Err(SpaceError::NegativeKernelEntry {
                x: x.as_ref().to_string(),
                y: y.as_ref().to_string(),
                value: *k,
            });
        }
        if kernel.insert((i, j), *k).is_some() {
            return Err(SpaceError::DuplicateKernelEntry {
                x: x.as_ref().to_string(),
                y: y.as_ref().to_string(),
            });
        }
    }

    // Row sums.
    let mut report = ValidationReport::default();
    let mut row_sums = vec![0.0; n];
    for (&(i, _), &k) in &kernel {
        row_sums[i as usize] += k;
    }
    for (i, &s) in row_sums.iter().enumerate() {
        let residual = (s - 1.0).abs();
        if residual > report.max_stochasticity_residual {
            report.max_stochasticity_residual = residual;
            report.worst_stochasticity_state = Some(state_names[i].clone());
        }
        if residual > tolerance {
            return Err(SpaceError::StochasticityViolation {
                state: state_names[i].clone(),
                residual,
                tolerance,
            });
        }
    }

    // Detailed balance on the union of supports.
    let mut loops = vec![0.0; n];
    let mut conds: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (&(i, j), &k) in &kernel {
        let cij = nu[i as usize] * k;
        if i == j {
            loops[i as usize] = cij;
            continue;
        }
        let cji = nu[j as usize] * kernel.get(&(j, i)).copied().unwrap_or(0.0);
        let residual = (cij - cji).abs();
        let scale = 1.0_f64.max(cij);
        if residual / scale > report.max_balance_residual {
            report.max_balance_residual = residual / scale;
            report.worst_balance_pair =
                Some((state_names[i as usize].clone(), state_names[j as usize].clone()));
        }
        if residual > tolerance * scale {
            return Err(SpaceError::DetailedBalanceViolation {
                x: state_names[i as usize].clone(),
                y: state_names[j as usize].clone(),
                residual,
                tolerance,
            });
        }
        let key = (i.min(j), i.max(j));
        conds.entry(key).or_insert(0.5 * (cij + cji));
    }
    let edge_list: Vec<Edge> = conds
        .into_iter()
        .filter(|&(_, c)| c > 0.0)
        .map(|((a, b), c)| Edge { a, b, cond: c })
        .collect();

    if let Some((a, b)) = find_disconnection(n, &edge_list) {
        return Err(SpaceError::NotConnected(
            state_names[a as usize].clone(),
            state_names[b as usize].clone(),
        ));
    }
    Ok(RandomWalkSpace::assemble(
        state_names, nu, edge_list, loops, tolerance, report,
    ))
}

/// Restriction to a subset: jumps leaving the subset become self-loops,
/// `nu` restricts. Preserves row sums and detailed balance exactly.
pub fn restrict(space: &RandomWalkSpace, omega: &StateSet) -> Result<RandomWalkSpace, SpaceError> {
    space.check_set(omega);
    if omega.is_empty_set() {
        return Err(SpaceError::EmptySet);
    }
    let kept: Vec<u32> = omega.iter().collect();
    let mut new_index = vec![u32::MAX; space.len()];
    for (k, &i) in kept.iter().enumerate() {
        new_index[i as usize] = k as u32;
    }
    let states: Vec<String> = kept.iter().map(|&i| space.label(i).to_string()).collect();
    let nu: Vec<f64> = kept.iter().map(|&i| space.nu(i)).collect();
    let mut loops: Vec<f64> = kept.iter().map(|&i| space.loop_mass(i)).collect();
    let mut edges = Vec::new();
    for e in space.edges() {
        let ka = new_index[e.a as usize];
        let kb = new_index[e.b as usize];
        match (ka != u32::MAX, kb != u32::MAX) {
            (true, true) => edges.push(Edge {
                a: ka.min(kb),
                b: ka.max(kb),
                cond: e.cond,
            }),
            (true, false) => loops[ka as usize] += e.cond,
            (false, true) => loops[kb as usize] += e.cond,
            (false, false) => {}
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));
    if let Some((a, b)) = find_disconnection(states.len(), &edges) {
        return Err(SpaceError::NotConnectedAfterRestriction(
            states[a as usize].clone(),
            states[b as usize].clone(),
        ));
    }
    Ok(RandomWalkSpace::assemble(
        states,
        nu,
        edges,
        loops,
        space.tolerance(),
        ValidationReport::default(),
    ))
}

/// `Omega` together with the states outside that can jump into it.
pub fn neighborhood_closure(space: &RandomWalkSpace, omega: &StateSet) -> StateSet {
    space.check_set(omega);
    let mut closure = omega.clone();
    for x in 0..space.len() as u32 {
        if omega.contains(x) {
            continue;
        }
        let sees = space
            .incident(x)
            .iter()
            .any(|&e| omega.contains(space.other_end(e, x)) && space.edges()[e as usize].cond > 0.0);
        if sees {
            closure.insert(x);
        }
    }
    closure
}

/// Point-cloud sample with the step kernel `K(x,y) = mu(y) / mu(B(x,eps))`
/// over the strict euclidean ball. The reversible measure produced is
/// `nu(x) = mu(x) mu(B(x,eps))`, the vertex weight of the graph with
/// `w_xy = mu(x) mu(y)` on pairs at distance < eps; with `nu = mu` the
/// balance condition fails whenever two ball masses differ.
pub fn epsilon_step<S: AsRef<str>>(
    points: &[(S, Vec<f64>, f64)],
    epsilon: f64,
) -> Result<RandomWalkSpace, SpaceError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    for (id, _, mu) in points {
        if *mu <= 0.0 {
            return Err(SpaceError::NonpositiveMass {
                id: id.as_ref().to_string(),
                mu: *mu,
            });
        }
    }
    let mut edges: Vec<(&str, &str, f64)> = Vec::new();
    for (i, (id_i, xi, mu_i)) in points.iter().enumerate() {
        // d(x,x) = 0 < eps, so the self pair is always inside the ball.
        edges.push((id_i.as_ref(), id_i.as_ref(), mu_i * mu_i));
        for (id_j, xj, mu_j) in points.iter().skip(i + 1) {
            let d2: f64 = xi
                .iter()
                .zip(xj.iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if d2.sqrt() < epsilon {
                edges.push((id_i.as_ref(), id_j.as_ref(), mu_i * mu_j));
            }
        }
    }
    let space = from_weighted_graph(&edges, true)?;
    debug_assert!(space.edges().iter().all(|e| e.cond > 0.0));
    Ok(space)
}

/// Rectangular grid with a translation-invariant stencil, open or torus.
/// States are labelled `"(i,j)"` with `0 <= i < width`, `0 <= j < height`.
pub fn stencil_grid(
    width: usize,
    height: usize,
    stencil: &[(i32, i32, f64)],
    wrap: bool,
) -> Result<RandomWalkSpace, SpaceError> {
    stencil_grid_labeled(width, height, stencil, wrap, |i, j| format!("({i},{j})"))
}

/// Same as [`stencil_grid`] with caller-chosen cell labels.
pub fn stencil_grid_labeled(
    width: usize,
    height: usize,
    stencil: &[(i32, i32, f64)],
    wrap: bool,
    label: impl Fn(i64, i64) -> String,
) -> Result<RandomWalkSpace, SpaceError> {
    for &(dx, dy, w) in stencil {
        let mirrored = stencil
            .iter()
            .any(|&(ex, ey, ew)| ex == -dx && ey == -dy && ew == w);
        if !mirrored {
            return Err(SpaceError::AsymmetricStencil { dx, dy });
        }
    }
    let total: f64 = stencil.iter().map(|&(_, _, w)| w).sum();
    if total <= 0.0 {
        return Err(SpaceError::EmptyStencil);
    }
    // Every (cell, offset) pair contributes half a bond; the mirrored offset
    // supplies the other half, so each undirected pair accumulates the full
    // stencil weight. A pair that wraps onto its own cell keeps the full
    // weight because a loop is counted once in the vertex degree.
    let mut merged: BTreeMap<(String, String), f64> = BTreeMap::new();
    for i in 0..width as i64 {
        for j in 0..height as i64 {
            for &(dx, dy, w) in stencil {
                if w == 0.0 {
                    continue;
                }
                let (mut ti, mut tj) = (i + dx as i64, j + dy as i64);
                if wrap {
                    ti = ti.rem_euclid(width as i64);
                    tj = tj.rem_euclid(height as i64);
                } else if ti < 0 || ti >= width as i64 || tj < 0 || tj >= height as i64 {
                    continue;
                }
                let (la, lb) = (label(i, j), label(ti, tj));
                let share = if la == lb { w } else { 0.5 * w };
                let key = if la <= lb { (la, lb) } else { (lb, la) };
                *merged.entry(key).or_insert(0.0) += share;
            }
        }
    }
    let list: Vec<(String, String, f64)> = merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    from_weighted_graph(&list, true)
}

fn find_disconnection(n: usize, edges: &[Edge]) -> Option<(u32, u32)> {
    if n <= 1 {
        return None;
    }
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a as usize].push(e.b);
        adj[e.b as usize].push(e.a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0u32];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x as usize] {
            if !seen[y as usize] {
                seen[y as usize] = true;
                stack.push(y);
            }
        }
    }
    seen.iter()
        .position(|&s| !s)
        .map(|i| (i as u32, 0))
}
