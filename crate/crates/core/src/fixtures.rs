//! Registry of small reference spaces with known constants, used by the
//! self-test command and the regression suites. Each builder returns the
//! space together with its named distinguished sets and functions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::space::{
    self, neighborhood_closure, restrict, stencil_grid_labeled, RandomWalkSpace, SpaceError,
    StateFunction, StateSet,
};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture {0}")]
    UnknownFixture(String),
    #[error("unknown parameter {param} for fixture {fixture}")]
    UnknownParameter { fixture: String, param: String },
    #[error("parameter {param} = {value} out of range for fixture {fixture}")]
    BadParameter {
        fixture: String,
        param: String,
        value: f64,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub space: RandomWalkSpace,
    pub sets: BTreeMap<String, StateSet>,
    pub functions: BTreeMap<String, StateFunction>,
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub name: &'static str,
    pub description: &'static str,
    /// Parameter names with defaults.
    pub params: &'static [(&'static str, f64)],
}

pub fn registry() -> Vec<FixtureSpec> {
    vec![
        FixtureSpec {
            name: "two-node-loop",
            description: "two states with self-loop mass p and crossing mass 1-p; \
                          every flow quantity has a closed form",
            params: &[("p", 0.5)],
        },
        FixtureSpec {
            name: "seven-path",
            description: "seven-vertex path with weights 2,1,2,2,1,2; the centered \
                          5-ball has ratio 1/4 but contains a 1/5 subset",
            params: &[],
        },
        FixtureSpec {
            name: "eight-path",
            description: "eight-vertex path with weights 2,2,1,10,1,2,2; passes the \
                          curvature test yet fails calibrability at ratio 1/11",
            params: &[],
        },
        FixtureSpec {
            name: "triangle",
            description: "three states, uniform crossing weights 1/2; a calibrable \
                          pair whose indicator is blocked by the median condition",
            params: &[],
        },
        FixtureSpec {
            name: "z2-block",
            description: "k-by-k block inside an open 4-neighbor grid with a halo; \
                          the block ratio is exactly 1/k",
            params: &[("k", 2.0), ("halo", 2.0)],
        },
        FixtureSpec {
            name: "z2-patch",
            description: "the 12-state closure of the 2-by-2 block with escaping mass \
                          folded into boundary self-loops; carries the balanced \
                          partition (ratio 1/4) and the sharper corner cut (ratio 1/6)",
            params: &[],
        },
        FixtureSpec {
            name: "geometric-chain",
            description: "even-odd chain with weights 2^-n and 3^-n; interior pair \
                          blocks are certified at 2^(n+1)/(2^(n+1)+3^n)",
            params: &[("blocks", 5.0)],
        },
        FixtureSpec {
            name: "two-ratio-chain",
            description: "chain with weights r^n + s^n whose balanced constant \
                          (1-r)/(1+r) is approached but never attained by a set",
            params: &[("r", 0.4), ("s", 0.2), ("count", 10.0)],
        },
        FixtureSpec {
            name: "poincare-chain",
            description: "three-segment chain with weights 1/n^3, 1/n^2, 1/n^3 whose \
                          1-Poincare constant decays as segments are appended",
            params: &[("segments", 3.0)],
        },
        FixtureSpec {
            name: "uniform-band",
            description: "1d grid whose kernel is a uniform band of the given radius; \
                          a finite stand-in for interval kernels",
            params: &[("n", 16.0), ("radius", 2.0)],
        },
    ]
}

fn param(
    fixture: &str,
    params: &BTreeMap<String, f64>,
    name: &str,
    default: f64,
) -> Result<f64, FixtureError> {
    for key in params.keys() {
        let known = registry()
            .iter()
            .find(|s| s.name == fixture)
            .map(|s| s.params.iter().any(|(p, _)| p == key))
            .unwrap_or(false);
        if !known {
            return Err(FixtureError::UnknownParameter {
                fixture: fixture.to_string(),
                param: key.clone(),
            });
        }
    }
    Ok(params.get(name).copied().unwrap_or(default))
}

pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    match name {
        "two-node-loop" => two_node_loop(params),
        "seven-path" => seven_path(params),
        "eight-path" => eight_path(params),
        "triangle" => triangle(params),
        "z2-block" => z2_block(params),
        "z2-patch" => z2_patch(params),
        "geometric-chain" => geometric_chain(params),
        "two-ratio-chain" => two_ratio_chain(params),
        "poincare-chain" => poincare_chain(params),
        "uniform-band" => uniform_band(params),
        other => Err(FixtureError::UnknownFixture(other.to_string())),
    }
}

fn two_node_loop(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let p = param("two-node-loop", params, "p", 0.5)?;
    if !(0.0..1.0).contains(&p) {
        return Err(FixtureError::BadParameter {
            fixture: "two-node-loop".into(),
            param: "p".into(),
            value: p,
        });
    }
    let space =
        space::from_weighted_graph(&[("a", "a", p), ("b", "b", p), ("a", "b", 1.0 - p)], true)?;
    let mut sets = BTreeMap::new();
    sets.insert("left".to_string(), space.set_from_labels(&["a"])?);
    let mut functions = BTreeMap::new();
    let a = space.index_of("a").unwrap() as usize;
    let mut vals = vec![-1.0; 2];
    vals[a] = 1.0;
    functions.insert(
        "antisymmetric".to_string(),
        space.function_from_values(vals),
    );
    Ok(Fixture {
        name: "two-node-loop".into(),
        space,
        sets,
        functions,
    })
}

fn seven_path(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let _ = param("seven-path", params, "_", 0.0)?;
    let space = space::from_weighted_graph(
        &[
            ("x1", "x2", 2.0),
            ("x2", "x3", 1.0),
            ("x3", "x4", 2.0),
            ("x4", "x5", 2.0),
            ("x5", "x6", 1.0),
            ("x6", "x7", 2.0),
        ],
        false,
    )?;
    let mut sets = BTreeMap::new();
    sets.insert(
        "ball2".to_string(),
        space.set_from_labels(&["x2", "x3", "x4", "x5", "x6"])?,
    );
    sets.insert(
        "ball1".to_string(),
        space.set_from_labels(&["x3", "x4", "x5"])?,
    );
    Ok(Fixture {
        name: "seven-path".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

fn eight_path(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let _ = param("eight-path", params, "_", 0.0)?;
    let space = space::from_weighted_graph(
        &[
            ("y1", "y2", 2.0),
            ("y2", "y3", 2.0),
            ("y3", "y4", 1.0),
            ("y4", "y5", 10.0),
            ("y5", "y6", 1.0),
            ("y6", "y7", 2.0),
            ("y7", "y8", 2.0),
        ],
        false,
    )?;
    let mut sets = BTreeMap::new();
    sets.insert(
        "omega".to_string(),
        space.set_from_labels(&["y2", "y3", "y4", "y5", "y6", "y7"])?,
    );
    sets.insert("core".to_string(), space.set_from_labels(&["y4", "y5"])?);
    Ok(Fixture {
        name: "eight-path".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

fn triangle(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let _ = param("triangle", params, "_", 0.0)?;
    let space = space::from_weighted_graph(
        &[("a", "b", 0.5), ("a", "c", 0.5), ("b", "c", 0.5)],
        false,
    )?;
    let mut sets = BTreeMap::new();
    sets.insert("pair".to_string(), space.set_from_labels(&["a", "b"])?);
    Ok(Fixture {
        name: "triangle".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

const FOUR_NEIGHBOR: [(i32, i32, f64); 4] =
    [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];

fn grid_label(i: i64, j: i64) -> String {
    format!("({i},{j})")
}

/// Open grid covering `[-halo, k + halo)^2` with the k-block at the origin.
fn z2_block(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let k = param("z2-block", params, "k", 2.0)? as i64;
    let halo = param("z2-block", params, "halo", 2.0)? as i64;
    if k < 1 || halo < 1 {
        return Err(FixtureError::BadParameter {
            fixture: "z2-block".into(),
            param: "k/halo".into(),
            value: k.min(halo) as f64,
        });
    }
    let side = (k + 2 * halo) as usize;
    let space = stencil_grid_labeled(side, side, &FOUR_NEIGHBOR, false, |i, j| {
        grid_label(i - halo, j - halo)
    })?;
    let mut block_labels = Vec::new();
    for i in 0..k {
        for j in 0..k {
            block_labels.push(grid_label(i, j));
        }
    }
    let block = space.set_from_labels(&block_labels)?;
    let closure = neighborhood_closure(&space, &block);
    let mut sets = BTreeMap::new();
    sets.insert("block".to_string(), block);
    sets.insert("closure".to_string(), closure);
    Ok(Fixture {
        name: "z2-block".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

/// Restriction of the ambient grid to the closure of the 2-block: twelve
/// states, boundary self-loop probability exactly 1/2.
fn z2_patch(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let _ = param("z2-patch", params, "_", 0.0)?;
    let mut block_params = BTreeMap::new();
    block_params.insert("k".to_string(), 2.0);
    block_params.insert("halo".to_string(), 2.0);
    let ambient = z2_block(&block_params)?;
    let closure = ambient.sets["closure"].clone();
    let space = restrict(&ambient.space, &closure)?;
    let block_labels: Vec<String> = (0..2)
        .flat_map(|i| (0..2).map(move |j| grid_label(i, j)))
        .collect();
    let balanced_labels = [
        grid_label(-1, 0),
        grid_label(0, 0),
        grid_label(1, 0),
        grid_label(-1, 1),
        grid_label(0, 1),
        grid_label(1, 1),
    ];
    let corner_labels = [
        grid_label(1, -1),
        grid_label(1, 0),
        grid_label(2, 0),
        grid_label(2, 1),
        grid_label(1, 1),
        grid_label(1, 2),
    ];
    let mut sets = BTreeMap::new();
    sets.insert("block".to_string(), space.set_from_labels(&block_labels)?);
    sets.insert(
        "balanced".to_string(),
        space.set_from_labels(&balanced_labels)?,
    );
    sets.insert("corner".to_string(), space.set_from_labels(&corner_labels)?);
    Ok(Fixture {
        name: "z2-patch".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

fn chain_label(i: usize) -> String {
    format!("x{i:02}")
}

/// Vertices `x00 .. x(2N+1)` with weights `2^-n` on even-odd pairs and
/// `3^-n` on the connecting edges. The pair `{x2n, x2n+1}` is interior
/// for `1 <= n <= N-1`.
fn geometric_chain(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let blocks = param("geometric-chain", params, "blocks", 5.0)? as usize;
    if !(1..=10).contains(&blocks) {
        return Err(FixtureError::BadParameter {
            fixture: "geometric-chain".into(),
            param: "blocks".into(),
            value: blocks as f64,
        });
    }
    let mut edges = Vec::new();
    for n in 0..=blocks {
        edges.push((
            chain_label(2 * n),
            chain_label(2 * n + 1),
            0.5_f64.powi(n as i32),
        ));
        if n < blocks {
            edges.push((
                chain_label(2 * n + 1),
                chain_label(2 * n + 2),
                (1.0 / 3.0_f64).powi(n as i32),
            ));
        }
    }
    let space = space::from_weighted_graph(&edges, false)?;
    let mut sets = BTreeMap::new();
    for n in 1..blocks {
        sets.insert(
            format!("pair{n}"),
            space.set_from_labels(&[chain_label(2 * n), chain_label(2 * n + 1)])?,
        );
    }
    Ok(Fixture {
        name: "geometric-chain".into(),
        space,
        sets,
        functions: BTreeMap::new(),
    })
}

/// Vertices `x00 .. xN` with `w(x0,x1) = r/(1-r) + s/(1-s)` and
/// `w(xn, xn+1) = r^n + s^n`; tail ratios decrease strictly toward
/// `(1-r)/(1+r)` without attaining it.
fn two_ratio_chain(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let r = param("two-ratio-chain", params, "r", 0.4)?;
    let s = param("two-ratio-chain", params, "s", 0.2)?;
    let count = param("two-ratio-chain", params, "count", 10.0)? as usize;
    if !(0.0 < s && s < r && r < 0.5) {
        return Err(FixtureError::BadParameter {
            fixture: "two-ratio-chain".into(),
            param: "r/s".into(),
            value: r,
        });
    }
    if !(3..=21).contains(&count) {
        return Err(FixtureError::BadParameter {
            fixture: "two-ratio-chain".into(),
            param: "count".into(),
            value: count as f64,
        });
    }
    let mut edges = Vec::new();
    edges.push((
        chain_label(0),
        chain_label(1),
        r / (1.0 - r) + s / (1.0 - s),
    ));
    for n in 1..count {
        edges.push((
            chain_label(n),
            chain_label(n + 1),
            r.powi(n as i32) + s.powi(n as i32),
        ));
    }
    let space = space::from_weighted_graph(&edges, false)?;
    Ok(Fixture {
        name: "two-ratio-chain".into(),
        space,
        sets: BTreeMap::new(),
        functions: BTreeMap::new(),
    })
}

/// Vertices `x03 .. x(3N+3)`; segment `n` carries weights
/// `1/n^3, 1/n^2, 1/n^3`. The bump on the middle edge of segment `n` has
/// variation of order 1/n, so the 1-Poincare constant decays with N.
fn poincare_chain(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let segments = param("poincare-chain", params, "segments", 3.0)? as usize;
    if !(1..=6).contains(&segments) {
        return Err(FixtureError::BadParameter {
            fixture: "poincare-chain".into(),
            param: "segments".into(),
            value: segments as f64,
        });
    }
    let mut edges = Vec::new();
    for n in 1..=segments {
        let nf = n as f64;
        edges.push((
            chain_label(3 * n),
            chain_label(3 * n + 1),
            nf.powi(-3),
        ));
        edges.push((
            chain_label(3 * n + 1),
            chain_label(3 * n + 2),
            nf.powi(-2),
        ));
        edges.push((
            chain_label(3 * n + 2),
            chain_label(3 * n + 3),
            nf.powi(-3),
        ));
    }
    let space = space::from_weighted_graph(&edges, false)?;
    let mut functions = BTreeMap::new();
    for n in 1..=segments {
        let mut values = vec![0.0; space.len()];
        for label in [chain_label(3 * n + 1), chain_label(3 * n + 2)] {
            let idx = space.index_of(&label).unwrap();
            values[idx as usize] = (n as f64).powi(2);
        }
        functions.insert(format!("bump{n}"), space.function_from_values(values));
    }
    Ok(Fixture {
        name: "poincare-chain".into(),
        space,
        sets: BTreeMap::new(),
        functions,
    })
}

fn uniform_band(params: &BTreeMap<String, f64>) -> Result<Fixture, FixtureError> {
    let n = param("uniform-band", params, "n", 16.0)? as usize;
    let radius = param("uniform-band", params, "radius", 2.0)? as i32;
    if n < 2 || radius < 1 || (radius as usize) >= n {
        return Err(FixtureError::BadParameter {
            fixture: "uniform-band".into(),
            param: "n/radius".into(),
            value: n as f64,
        });
    }
    let mut stencil = Vec::new();
    for d in 1..=radius {
        stencil.push((d, 0, 1.0));
        stencil.push((-d, 0, 1.0));
    }
    let space = space::stencil_grid(n, 1, &stencil, false)?;
    Ok(Fixture {
        name: "uniform-band".into(),
        space,
        sets: BTreeMap::new(),
        functions: BTreeMap::new(),
    })
}
