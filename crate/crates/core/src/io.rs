//! JSON file formats for spaces and state functions, plus the fixed-width
//! float formatting used by CSV reports.
//!
//! A space file carries either a weighted graph or an explicit kernel:
//!
//! ```json
//! {"graph": {"edges": [["a", "b", 2.0]]}}
//! {"kernel": {"states": [{"id": "a", "nu": 1.0}],
//!             "entries": [["a", "a", 1.0]]},
//!  "tolerance": 1e-9}
//! ```
//!
//! Canonical serialization sorts states lexicographically and entries by
//! (source, target).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{self, RandomWalkSpace, SpaceError, StateFunction, StateSet};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("space file must contain exactly one of \"graph\" or \"kernel\"")]
    AmbiguousSpec,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("function file misses state {0}")]
    MissingState(String),
    #[error("function file names unknown state {0}")]
    UnknownState(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub edges: Vec<(String, String, f64)>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub allow_loops: bool,
}

fn default_true() -> bool {
    true
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSpec {
    pub id: String,
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub states: Vec<StateSpec>,
    pub entries: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

pub fn space_from_file(file: &SpaceFile) -> Result<RandomWalkSpace, IoError> {
    match (&file.graph, &file.kernel) {
        (Some(graph), None) => {
            Ok(space::from_weighted_graph(&graph.edges, graph.allow_loops)?)
        }
        (None, Some(kernel)) => {
            let states: Vec<(String, f64)> = kernel
                .states
                .iter()
                .map(|s| (s.id.clone(), s.nu))
                .collect();
            let tolerance = file.tolerance.unwrap_or(space::DEFAULT_TOLERANCE);
            Ok(space::from_kernel(&states, &kernel.entries, tolerance)?)
        }
        _ => Err(IoError::AmbiguousSpec),
    }
}

pub fn parse_space(json: &str) -> Result<RandomWalkSpace, IoError> {
    let file: SpaceFile = serde_json::from_str(json)?;
    space_from_file(&file)
}

/// Canonical kernel-form snapshot of a space: states sorted, entries
/// sorted by (source, target), self-loops included.
pub fn space_to_file(space: &RandomWalkSpace) -> SpaceFile {
    let mut order: Vec<u32> = (0..space.len() as u32).collect();
    order.sort_by(|&a, &b| space.label(a).cmp(space.label(b)));
    let states: Vec<StateSpec> = order
        .iter()
        .map(|&i| StateSpec {
            id: space.label(i).to_string(),
            nu: space.nu(i),
        })
        .collect();
    let mut entries: Vec<(String, String, f64)> = Vec::new();
    for &i in &order {
        let mut row: Vec<(String, f64)> = Vec::new();
        if space.loop_mass(i) > 0.0 {
            row.push((space.label(i).to_string(), space.kernel(i, i)));
        }
        for &e in space.incident(i) {
            let j = space.other_end(e, i);
            row.push((space.label(j).to_string(), space.kernel(i, j)));
        }
        row.sort_by(|a, b| a.0.cmp(&b.0));
        for (target, k) in row {
            entries.push((space.label(i).to_string(), target, k));
        }
    }
    SpaceFile {
        graph: None,
        kernel: Some(KernelSpec { states, entries }),
        tolerance: Some(space.tolerance()),
    }
}

pub fn space_to_json(space: &RandomWalkSpace) -> String {
    serde_json::to_string_pretty(&space_to_file(space)).expect("space serializes")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionFile {
    /// Values per state id; sorted map keeps serialization canonical.
    pub values: BTreeMap<String, f64>,
}

pub fn function_from_file(
    space: &RandomWalkSpace,
    file: &FunctionFile,
) -> Result<StateFunction, IoError> {
    for key in file.values.keys() {
        if space.index_of(key).is_none() {
            return Err(IoError::UnknownState(key.clone()));
        }
    }
    let mut values = vec![0.0; space.len()];
    for (i, label) in space.states().iter().enumerate() {
        let v = file
            .values
            .get(label)
            .ok_or_else(|| IoError::MissingState(label.clone()))?;
        values[i] = *v;
    }
    Ok(space.function_from_values(values))
}

pub fn parse_function(space: &RandomWalkSpace, json: &str) -> Result<StateFunction, IoError> {
    let file: FunctionFile = serde_json::from_str(json)?;
    function_from_file(space, &file)
}

pub fn function_to_json(space: &RandomWalkSpace, f: &StateFunction) -> String {
    let values: BTreeMap<String, f64> = space
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), f.value(i as u32)))
        .collect();
    serde_json::to_string_pretty(&FunctionFile { values }).expect("function serializes")
}

/// Comma-separated state labels into a set.
pub fn parse_set(space: &RandomWalkSpace, spec: &str) -> Result<StateSet, SpaceError> {
    let labels: Vec<&str> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    space.set_from_labels(&labels)
}

pub fn set_to_string(space: &RandomWalkSpace, set: &StateSet) -> String {
    set.labels(space).join(",")
}

/// Fixed 17-significant-digit scientific formatting for CSV fields, so
/// reports are byte-identical across runs.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
