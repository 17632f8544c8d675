//! End-to-end fixture checks behind `tvflow selftest`: every registered
//! fixture is rebuilt and its known constants recomputed through the
//! public operations.

use std::collections::BTreeMap;

use anyhow::Result;

use tvflow_core::cheeger::eigen::{
    balanced_pair_eigencheck, set_eigenpair_search, verify_eigenpair, zero_median, SearchMode,
};
use tvflow_core::cheeger::{
    cheeger_global_exhaustive, cheeger_subset_dinkelbach, cheeger_subset_exact,
    curvature_necessary_check, is_calibrable, CalibrabilityMethod,
};
use tvflow_core::fixtures::{build, Fixture};
use tvflow_core::flow::{
    extinction_analysis, meyer_norm, poincare_constant, FlowConfig, PoincareMethod,
};
use tvflow_core::geometry::perimeter;
use tvflow_core::space::restrict;

use crate::NumericFailure;

const CERT_TOL: f64 = 1e-7;

struct Table {
    rows: Vec<(String, String, bool, String)>,
}

impl Table {
    fn new() -> Self {
        Table { rows: Vec::new() }
    }

    fn check(&mut self, fixture: &str, name: &str, passed: bool, details: String) {
        self.rows
            .push((fixture.to_string(), name.to_string(), passed, details));
    }

    fn close(&mut self, value: f64, expected: f64, tol: f64) -> (bool, String) {
        let _ = self;
        (
            (value - expected).abs() <= tol,
            format!("{value:.12} vs {expected:.12}"),
        )
    }
}

fn fixture(name: &str, params: &[(&str, f64)]) -> Fixture {
    let map: BTreeMap<String, f64> = params
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    build(name, &map).expect("fixture builds")
}

pub fn run(filter: Option<&str>) -> Result<()> {
    let mut table = Table::new();

    let wants = |name: &str| filter.map_or(true, |f| name.contains(f));

    if wants("two-node-loop") {
        for p in [0.1, 0.5, 0.9] {
            let fx = fixture("two-node-loop", &[("p", p)]);
            let space = &fx.space;
            let u0 = &fx.functions["antisymmetric"];
            let name = format!("two-node-loop(p={p})");

            let cert = verify_eigenpair(space, 1.0 - p, u0, CERT_TOL);
            table.check(&name, "crossing eigenvalue certified", cert.is_ok(), String::new());
            let constant = space.constant_function(0.5);
            let zero = verify_eigenpair(space, 0.0, &constant, CERT_TOL);
            table.check(&name, "zero eigenvalue certified", zero.is_ok(), String::new());
            let bogus = verify_eigenpair(space, 0.37 * (1.0 - p), u0, CERT_TOL);
            table.check(&name, "off-spectrum value refused", bogus.is_err(), String::new());

            let exact = 1.0 / (1.0 - p);
            let meyer = meyer_norm(space, u0).unwrap();
            let (ok, details) = table.close(meyer, exact, 1e-8);
            table.check(&name, "dual norm", ok, details);

            let lambda2 =
                poincare_constant(space, 2, 1, &PoincareMethod::Analytic).unwrap().constant;
            let mut config = FlowConfig::new(exact / 250.0, 1.3 * exact);
            config.prox_tolerance = 1e-12;
            let report = extinction_analysis(space, u0, &config, lambda2, 1e-6).unwrap();
            let observed = report.t_observed.unwrap_or(f64::NAN);
            let sandwich = (report.t_lower - exact).abs() <= 1e-8
                && (report.t_upper - exact).abs() <= 1e-8
                && (observed - exact).abs() <= config.tau + 1e-9;
            table.check(
                &name,
                "extinction sandwich",
                sandwich,
                format!("observed {observed:.6}, bounds [{:.6}, {:.6}]", report.t_lower, report.t_upper),
            );
        }
    }

    if wants("seven-path") {
        let fx = fixture("seven-path", &[]);
        let space = &fx.space;
        let (ok, d) = table.close(
            perimeter(space, &fx.sets["ball2"]).ratio.unwrap(),
            0.25,
            1e-12,
        );
        table.check("seven-path", "outer ball ratio 1/4", ok, d);
        let (ok, d) = table.close(
            perimeter(space, &fx.sets["ball1"]).ratio.unwrap(),
            0.2,
            1e-12,
        );
        table.check("seven-path", "inner ball ratio 1/5", ok, d);
        let sub = cheeger_subset_exact(space, &fx.sets["ball2"], 22).unwrap();
        let (ok, d) = table.close(sub.value, 0.2, 1e-12);
        table.check("seven-path", "subset minimum 1/5", ok, d);
        let calib = is_calibrable(
            space,
            &fx.sets["ball2"],
            CalibrabilityMethod::Exhaustive { limit: 22 },
        )
        .unwrap();
        table.check("seven-path", "outer ball not calibrable", !calib.calibrable, String::new());
    }

    if wants("eight-path") {
        let fx = fixture("eight-path", &[]);
        let space = &fx.space;
        let omega = &fx.sets["omega"];
        let (ok, d) = table.close(perimeter(space, omega).ratio.unwrap(), 1.0 / 9.0, 1e-12);
        table.check("eight-path", "window ratio 1/9", ok, d);
        table.check(
            "eight-path",
            "curvature condition holds",
            curvature_necessary_check(space, omega).holds,
            String::new(),
        );
        let lp = is_calibrable(space, omega, CalibrabilityMethod::Lp).unwrap();
        table.check("eight-path", "flux system infeasible", !lp.calibrable, String::new());
        let fast = cheeger_subset_dinkelbach(space, omega).unwrap();
        let (ok, d) = table.close(fast.value, 1.0 / 11.0, 1e-12);
        table.check("eight-path", "parametric cut finds 1/11", ok, d);
    }

    if wants("triangle") {
        let fx = fixture("triangle", &[]);
        let space = &fx.space;
        let pair = &fx.sets["pair"];
        let calib = is_calibrable(space, pair, CalibrabilityMethod::Lp).unwrap();
        table.check("triangle", "pair calibrable", calib.calibrable, String::new());
        let halved = space.indicator(pair).scaled(0.5);
        table.check(
            "triangle",
            "median excludes zero",
            !zero_median(space, &halved),
            String::new(),
        );
        let refused = verify_eigenpair(space, 0.5, &halved, CERT_TOL).is_err();
        table.check("triangle", "halved indicator refused", refused, String::new());
    }

    if wants("z2-block") {
        for k in [1.0, 3.0, 5.0] {
            let fx = fixture("z2-block", &[("k", k), ("halo", 2.0)]);
            let space = &fx.space;
            let block = &fx.sets["block"];
            let name = format!("z2-block(k={k})");
            let (ok, d) = table.close(perimeter(space, block).ratio.unwrap(), 1.0 / k, 1e-12);
            table.check(&name, "block ratio 1/k", ok, d);
            let calib = is_calibrable(space, block, CalibrabilityMethod::Lp).unwrap();
            table.check(&name, "block calibrable", calib.calibrable, String::new());
            let found = set_eigenpair_search(
                space,
                SearchMode::Candidates(vec![block.clone()]),
                CERT_TOL,
            )
            .unwrap();
            let hit = found.iter().any(|e| (e.lambda - 1.0 / k).abs() <= 1e-9);
            table.check(&name, "block eigenpair certified", hit, String::new());
        }
        // Restricted closure of the 5-block: calibrable, not an eigenpair.
        let fx = fixture("z2-block", &[("k", 5.0), ("halo", 2.0)]);
        let restricted = restrict(&fx.space, &fx.sets["closure"]).unwrap();
        let labels = fx.sets["block"].labels(&fx.space);
        let block = restricted.set_from_labels(&labels).unwrap();
        let rep = perimeter(&restricted, &block);
        let u = restricted.indicator(&block).scaled(1.0 / rep.volume);
        let refused = verify_eigenpair(&restricted, rep.ratio.unwrap(), &u, CERT_TOL).is_err();
        table.check("z2-block(k=5)", "restricted eigenpair refused", refused, String::new());
        let calib = is_calibrable(&restricted, &block, CalibrabilityMethod::Lp).unwrap();
        table.check(
            "z2-block(k=5)",
            "restricted block still calibrable",
            calib.calibrable,
            String::new(),
        );
    }

    if wants("z2-patch") {
        let fx = fixture("z2-patch", &[]);
        let space = &fx.space;
        let global = cheeger_global_exhaustive(space, 22).unwrap();
        let (ok, d) = table.close(global.value, 1.0 / 6.0, 1e-12);
        table.check("z2-patch", "global constant 1/6", ok, d);
        let report = balanced_pair_eigencheck(space, &fx.sets["balanced"], CERT_TOL).unwrap();
        let (ok, d) = table.close(report.lambda, 0.25, 1e-12);
        table.check(
            "z2-patch",
            "balanced partition certified at 1/4",
            report.certified && ok,
            d,
        );
    }

    if wants("geometric-chain") {
        let blocks = 5usize;
        let fx = fixture("geometric-chain", &[("blocks", blocks as f64)]);
        let found =
            set_eigenpair_search(&fx.space, SearchMode::Exhaustive { limit: 22 }, CERT_TOL)
                .unwrap();
        let mut all = true;
        for n in 1..blocks {
            let expected = 2.0_f64.powi(n as i32 + 1)
                / (2.0_f64.powi(n as i32 + 1) + 3.0_f64.powi(n as i32));
            all &= found.iter().any(|e| (e.lambda - expected).abs() <= 1e-10);
        }
        table.check(
            "geometric-chain",
            "interior pair eigenvalues certified",
            all,
            String::new(),
        );
    }

    if wants("two-ratio-chain") {
        let r = 0.4;
        let fx = fixture("two-ratio-chain", &[("r", r), ("s", 0.2), ("count", 10.0)]);
        let limit = (1.0 - r) / (1.0 + r);
        let found =
            set_eigenpair_search(&fx.space, SearchMode::Exhaustive { limit: 22 }, CERT_TOL)
                .unwrap();
        let positive: Vec<f64> = found
            .iter()
            .map(|e| e.lambda)
            .filter(|&l| l > CERT_TOL)
            .collect();
        let all_above = positive.iter().all(|&l| l > limit + 1e-9);
        table.check(
            "two-ratio-chain",
            "certified values stay above the unattained limit",
            !positive.is_empty() && all_above,
            format!(
                "smallest certified {:.6} > limit {limit:.6}",
                positive.iter().fold(f64::INFINITY, |a, &b| a.min(b))
            ),
        );
    }

    if wants("poincare-chain") {
        let mut previous = f64::INFINITY;
        let mut decreasing = true;
        for segments in [2.0, 3.0, 4.0] {
            let fx = fixture("poincare-chain", &[("segments", segments)]);
            let constant =
                poincare_constant(&fx.space, 1, 1, &PoincareMethod::ExactSmall { limit: 16 })
                    .unwrap()
                    .constant;
            decreasing &= constant < previous;
            previous = constant;
        }
        table.check(
            "poincare-chain",
            "1-Poincare constant decays with length",
            decreasing,
            String::new(),
        );
    }

    if wants("uniform-band") {
        let mut previous = f64::INFINITY;
        let mut decreasing = true;
        for n in [8.0, 10.0, 12.0] {
            let fx = fixture("uniform-band", &[("n", n), ("radius", 2.0)]);
            let constant =
                poincare_constant(&fx.space, 1, 1, &PoincareMethod::ExactSmall { limit: 12 })
                    .unwrap()
                    .constant;
            decreasing &= constant < previous;
            previous = constant;
        }
        table.check(
            "uniform-band",
            "1-Poincare constant decays with width",
            decreasing,
            String::new(),
        );
    }

    let width = table
        .rows
        .iter()
        .map(|(f, c, _, _)| f.len() + c.len())
        .max()
        .unwrap_or(0)
        + 4;
    let mut failures = 0usize;
    for (fixture, check, passed, details) in &table.rows {
        let label = format!("{fixture}: {check}");
        let status = if *passed { "PASS" } else { "FAIL" };
        if !passed {
            failures += 1;
        }
        if details.is_empty() {
            println!("{label:<width$} {status}");
        } else {
            println!("{label:<width$} {status}  ({details})");
        }
    }
    println!(
        "selftest: {} checks, {} failed",
        table.rows.len(),
        failures
    );
    if failures > 0 {
        return Err(NumericFailure(format!("{failures} selftest checks failed")).into());
    }
    Ok(())
}
