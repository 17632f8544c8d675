//! Serializable report shapes emitted by the subcommands. All maps are
//! ordered so reports are byte-stable given identical inputs.

use std::collections::BTreeMap;

use serde::Serialize;

use tvflow_core::cheeger::eigen::EigenpairCertificate;
use tvflow_core::cheeger::{CalibrabilityReport, CheegerMode, CheegerReport, FluxField};
use tvflow_core::flow::{FlowTrajectory, PoincareReport};
use tvflow_core::geometry::PerimeterReport;
use tvflow_core::io::format_f64;
use tvflow_core::iso::IsoProfile;
use tvflow_core::space::{RandomWalkSpace, StateFunction};

pub fn function_map(space: &RandomWalkSpace, f: &StateFunction) -> BTreeMap<String, f64> {
    space
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), f.value(i as u32)))
        .collect()
}

pub fn flux_entries(space: &RandomWalkSpace, flux: &FluxField) -> Vec<(String, String, f64)> {
    let mut entries: Vec<(String, String, f64)> = flux
        .entries()
        .iter()
        .map(|&(a, b, g)| (space.label(a).to_string(), space.label(b).to_string(), g))
        .collect();
    entries.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
    entries
}

#[derive(Serialize)]
pub struct ValidationOut {
    pub states: usize,
    pub support_pairs: usize,
    pub nu_total: f64,
    pub max_stochasticity_residual: f64,
    pub worst_stochasticity_state: Option<String>,
    pub max_balance_residual: f64,
    pub worst_balance_pair: Option<(String, String)>,
}

pub fn validation_out(space: &RandomWalkSpace) -> ValidationOut {
    let v = space.validation();
    ValidationOut {
        states: space.len(),
        support_pairs: space.edges().len(),
        nu_total: space.nu_total(),
        max_stochasticity_residual: v.max_stochasticity_residual,
        worst_stochasticity_state: v.worst_stochasticity_state.clone(),
        max_balance_residual: v.max_balance_residual,
        worst_balance_pair: v.worst_balance_pair.clone(),
    }
}

#[derive(Serialize)]
pub struct PerimeterOut {
    pub set: Vec<String>,
    pub perimeter: f64,
    pub volume: f64,
    pub ratio: Option<f64>,
    pub self_interaction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localized: Option<f64>,
}

pub fn perimeter_out(
    space: &RandomWalkSpace,
    set: &tvflow_core::StateSet,
    report: &PerimeterReport,
    localized: Option<f64>,
) -> PerimeterOut {
    PerimeterOut {
        set: set.labels(space),
        perimeter: report.perimeter,
        volume: report.volume,
        ratio: report.ratio,
        self_interaction: report.self_interaction,
        localized,
    }
}

fn mode_name(mode: CheegerMode) -> &'static str {
    match mode {
        CheegerMode::SubsetExhaustive => "subset_exhaustive",
        CheegerMode::SubsetDinkelbach => "subset_dinkelbach",
        CheegerMode::GlobalExhaustive => "global_exhaustive",
        CheegerMode::GlobalIpm => "global_ipm",
    }
}

#[derive(Serialize)]
pub struct CheegerOut {
    pub value: f64,
    pub witness: Vec<String>,
    pub witness_volume: f64,
    pub mode: &'static str,
    pub exact: bool,
}

pub fn cheeger_out(space: &RandomWalkSpace, report: &CheegerReport) -> CheegerOut {
    CheegerOut {
        value: report.value,
        witness: report.witness.labels(space),
        witness_volume: space.nu_of_set(&report.witness),
        mode: mode_name(report.mode),
        exact: report.exact,
    }
}

#[derive(Serialize)]
pub struct CalibrableOut {
    pub calibrable: bool,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<Vec<(String, String, f64)>>,
}

pub fn calibrable_out(space: &RandomWalkSpace, report: &CalibrabilityReport) -> CalibrableOut {
    CalibrableOut {
        calibrable: report.calibrable,
        lambda: report.lambda,
        witness: report.witness.as_ref().map(|w| w.labels(space)),
        flux: report.flux.as_ref().map(|f| flux_entries(space, f)),
    }
}

#[derive(Serialize)]
pub struct ResidualsOut {
    pub eigen_equation: f64,
    pub sign_alignment: f64,
    pub tv_mismatch: f64,
    pub normalization: f64,
}

#[derive(Serialize)]
pub struct CertificateOut {
    pub lambda: f64,
    pub scale: f64,
    pub u: BTreeMap<String, f64>,
    pub xi: BTreeMap<String, f64>,
    pub flux: Vec<(String, String, f64)>,
    pub residuals: ResidualsOut,
}

pub fn certificate_out(space: &RandomWalkSpace, cert: &EigenpairCertificate) -> CertificateOut {
    CertificateOut {
        lambda: cert.lambda,
        scale: cert.scale,
        u: function_map(space, &cert.u),
        xi: function_map(space, &cert.xi),
        flux: flux_entries(space, &cert.flux),
        residuals: ResidualsOut {
            eigen_equation: cert.residuals.eigen_equation,
            sign_alignment: cert.residuals.sign_alignment,
            tv_mismatch: cert.residuals.tv_mismatch,
            normalization: cert.residuals.normalization,
        },
    }
}

#[derive(Serialize)]
pub struct EigencheckOut {
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Serialize)]
pub struct EigensearchEntryOut {
    pub lambda: f64,
    pub set: Vec<String>,
    pub residual: f64,
}

#[derive(Serialize)]
pub struct PoincareOut {
    pub p: u32,
    pub q: u32,
    pub constant: f64,
    pub method: &'static str,
    pub exact: bool,
    pub minimizer: BTreeMap<String, f64>,
}

pub fn poincare_out(space: &RandomWalkSpace, report: &PoincareReport) -> PoincareOut {
    PoincareOut {
        p: report.p,
        q: report.q,
        constant: report.constant,
        method: report.method_used,
        exact: report.exact,
        minimizer: function_map(space, &report.minimizer),
    }
}

#[derive(Serialize)]
pub struct ExtinctionOut {
    pub t_observed: Option<f64>,
    pub t_upper: f64,
    pub t_lower: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub t_end: f64,
}

/// Flow trajectory as CSV: `t, <state columns>, mass, tv, dist2`.
pub fn trajectory_csv(space: &RandomWalkSpace, traj: &FlowTrajectory) -> String {
    let mut out = String::from("t");
    for s in space.states() {
        out.push(',');
        out.push_str(&csv_quote(s));
    }
    out.push_str(",mass,tv,dist2\n");
    for (snap, diag) in traj.snapshots.iter().zip(&traj.diagnostics) {
        out.push_str(&format_f64(diag.time));
        for i in 0..space.len() as u32 {
            out.push(',');
            out.push_str(&format_f64(snap.value(i)));
        }
        out.push(',');
        out.push_str(&format_f64(diag.mass));
        out.push(',');
        out.push_str(&format_f64(diag.tv));
        out.push(',');
        out.push_str(&format_f64(diag.dist2_mean));
        out.push('\n');
    }
    out
}

/// Profile as CSV: `volume, min_perimeter, witness` with the witness as a
/// quoted comma-joined label list.
pub fn profile_csv(space: &RandomWalkSpace, profile: &IsoProfile) -> String {
    let mut out = String::from("volume,min_perimeter,witness\n");
    for bp in &profile.breakpoints {
        out.push_str(&format_f64(bp.volume));
        out.push(',');
        out.push_str(&format_f64(bp.min_perimeter));
        out.push(',');
        out.push_str(&csv_quote(&bp.witness.labels(space).join(",")));
        out.push('\n');
    }
    out
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
