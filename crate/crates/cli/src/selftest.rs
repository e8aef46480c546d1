//! Symbolic checks against published closed forms.

use std::time::Instant;

use esme_core::drivers::DriverKind;
use esme_core::estimator::solve_system;
use esme_core::experiment::{diffusion_example, Experiment};
use esme_core::reference;
use esme_core::simulate::Scheme;

pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    /// A failure explained by a misprint in the published value.
    pub known_discrepancy: bool,
    pub detail: String,
    pub seconds: f64,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, bool, String), String>) -> CheckRow {
    let start = Instant::now();
    let (passed, known_discrepancy, detail) = f().unwrap_or_else(|e| (false, false, format!("error: {e}")));
    CheckRow {
        name,
        passed,
        known_discrepancy,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_checks() -> Vec<CheckRow> {
    let moments = reference::diffusion_moments(3).map_err(|e| e.to_string());
    let published = moments
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|(m, _)| reference::published_moments(m.vars()).map_err(|e| e.to_string()));
    let mut rows = vec![
        timed("first moment E Y(3)^(1)", || {
            let (first, _) = moments.clone()?;
            let (p1, _) = published.clone()?;
            if first == p1 {
                return Ok((true, false, "exact match".into()));
            }
            let diff = &first - &p1;
            let known = diff.to_string() == "1/2*a^3*b^2*t^4";
            Ok((false, known, format!("computed minus published = {diff}")))
        }),
        timed("second moment E 2Y(3)^(1,1)", || {
            let (_, second) = moments.clone()?;
            let (_, p2) = published.clone()?;
            let n = second.terms().count();
            Ok((second == p2, false, format!("{n} terms, exact rational comparison")))
        }),
    ];
    rows.push(timed("Davie error order at h = 11/24, dt = 1e-3", || {
        let order = Scheme::Davie.error_order(&DriverKind::Fbm { hurst: 11.0 / 24.0 });
        let bound = 1e-3f64.powf(order);
        Ok(((bound - 0.075).abs() < 5e-4, false, format!("dt^{order:.4} = {bound:.4}")))
    }));
    rows.push(timed("exact targets recover (a, b) = (1, 2)", || {
        let e = Experiment::new(diffusion_example(), ".").map_err(|e| e.to_string())?;
        let run = || -> esme_core::Result<Vec<Vec<f64>>> {
            let exps = e.expansions()?;
            let driver = e.driver_expectation(&exps)?;
            let targets = e.theoretical_moments(&exps, driver.as_ref(), &[1.0, 2.0])?;
            let problem = e.system(&exps, driver.as_ref(), &targets, None)?;
            Ok(solve_system(&problem, &e.solve_options())?.into_iter().map(|s| s.theta).collect())
        };
        let roots = run().map_err(|e| e.to_string())?;
        let ok = roots.len() == 2
            && roots.iter().all(|t| (t[0] - 1.0).abs() < 1e-8 && (t[1].abs() - 2.0).abs() < 1e-8)
            && roots[0][1] * roots[1][1] < 0.0;
        Ok((ok, false, format!("roots {roots:?}")))
    }));
    rows
}

pub fn render(rows: &[CheckRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let status = match (r.passed, r.known_discrepancy) {
            (true, _) => "PASS",
            (false, true) => "FAIL*",
            (false, false) => "FAIL",
        };
        out.push_str(&format!("{status:<6} {:<44} {:>8.3}s  {}\n", r.name, r.seconds, r.detail));
    }
    if rows.iter().any(|r| !r.passed && r.known_discrepancy) {
        out.push_str("FAIL*: the published quartic coefficient has the wrong sign; the computed +a^3 b^2 t^4/4 is correct\n");
    }
    out
}
