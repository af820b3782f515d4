//! Acceptance run: one line per criterion, default lattices and grids.
//!
//! A criterion line reads PASS or FAIL against its literal threshold. Lines
//! tagged `known` are expected to fail (the reason is stored in the report
//! notes); the run exits non-zero only when some line disagrees with its
//! expectation.

use std::time::{Duration, Instant};

use riesz_kernels::verify::{
    self, bessel_accuracy_checks, heat_check, mihlin_checks, resolvent_checks, split_identity_check,
    subordination_check, CheckReport, Expectation, LatticeConfig, OperatorConfig, RatioReport,
};

struct Line {
    label: String,
    pass: bool,
    expect_pass: bool,
    text: String,
}

#[derive(Default)]
struct Ledger {
    lines: Vec<Line>,
}

impl Ledger {
    fn push(&mut self, label: impl Into<String>, pass: bool, expect_pass: bool, text: String) {
        let line = Line {
            label: label.into(),
            pass,
            expect_pass,
            text,
        };
        println!(
            "criterion {:<3} {} {}{}",
            line.label,
            if line.pass { "PASS" } else { "FAIL" },
            line.text,
            if line.expect_pass { "" } else { " [known]" }
        );
        self.lines.push(line);
    }

    fn check(&mut self, label: &str, c: &CheckReport, elapsed: Duration, limit: Duration) {
        let in_time = elapsed <= limit;
        let pass = c.verdict == verify::Verdict::Pass && in_time;
        self.push(
            label,
            pass,
            c.expected == Expectation::Pass,
            format!(
                "{}: {} = {:.3e} (limit {:.1e}), {:.1}s (limit {}s)",
                c.id,
                c.metric,
                c.value,
                c.threshold,
                elapsed.as_secs_f64(),
                limit.as_secs()
            ),
        );
    }

    fn ok(&self) -> bool {
        self.lines.iter().all(|l| l.pass == l.expect_pass)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn find<'a>(reports: &'a [CheckReport], id: &str) -> &'a CheckReport {
    reports.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("missing report {id}"))
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn main() {
    let ops = OperatorConfig::default();
    let lattice = LatticeConfig::default();
    let mut ledger = Ledger::default();

    // 1
    let (bessel, t) = timed(|| bessel_accuracy_checks().expect("bessel checks"));
    let worst = bessel.iter().all(|c| c.verdict == verify::Verdict::Pass);
    ledger.push(
        "1",
        worst && t <= Duration::from_secs(5),
        true,
        format!(
            "closed forms {:.2e} (limit 1e-10), Wronskian {:.2e} (limit 1e-9), {:.2}s (limit 5s)",
            find(&bessel, "bessel-closed-forms").value,
            find(&bessel, "bessel-wronskian").value,
            t.as_secs_f64()
        ),
    );

    // 2
    let (res, t) = timed(|| resolvent_checks(&ops).expect("resolvent checks"));
    ledger.check("2", find(&res, "resolvent-bessel"), t, minutes(2));
    ledger.check("2b", find(&res, "resolvent-half-line"), t, minutes(2));
    ledger.check("2c", find(&res, "resolvent-transparent"), t, minutes(2));

    // 3
    let (sub, t) = timed(|| subordination_check(&ops).expect("subordination"));
    ledger.check("3", &sub, t, minutes(2));
    assert!(ops.subordination_count <= 1500);

    // 4
    let (split, t) = timed(|| split_identity_check(&ops).expect("split identity"));
    ledger.check("4", &split, t, minutes(1));

    // 5
    let (heat, t) = timed(|| heat_check(&ops).expect("heat kernel"));
    ledger.check("5", &heat, t, minutes(3));

    // 6
    let specs = verify::registry();
    let (reports, t) = timed(|| verify::run_specs(&specs, &lattice).expect("registry"));
    let expected_pass: Vec<&RatioReport> = reports.iter().filter(|r| r.expected == Expectation::Pass).collect();
    let controls: Vec<&RatioReport> = reports.iter().filter(|r| r.expected == Expectation::Fail).collect();
    let bad: Vec<&str> = reports.iter().filter(|r| !r.as_expected).map(|r| r.id.as_str()).collect();
    let worst_drift = expected_pass.iter().map(|r| r.drift).fold(0.0, f64::max);
    ledger.push(
        "6",
        bad.is_empty() && controls.len() >= 2 && t <= minutes(10),
        true,
        format!(
            "{}/{} expected-pass specs pass (max drift {:.3}), {}/{} negative controls fail, {:.0}s (limit 600s){}",
            expected_pass.iter().filter(|r| r.as_expected).count(),
            expected_pass.len(),
            worst_drift,
            controls.iter().filter(|r| r.as_expected).count(),
            controls.len(),
            t.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!("; off: {}", bad.join(", ")) }
        ),
    );

    // 7
    let (mihlin, t) = timed(|| mihlin_checks(&ops).expect("multiplier sweep"));
    ledger.check("7", find(&mihlin, "mihlin-xi-variation"), t, minutes(20));
    ledger.check("7b", find(&mihlin, "mihlin-envelope"), t, minutes(20));
    ledger.check("7c", find(&mihlin, "mihlin-translation-identity"), t, minutes(20));

    // 8
    let stanker: Vec<_> = specs.into_iter().filter(|s| s.anchor == "eq:StanKer").collect();
    let (k1, t) = timed(|| verify::run_specs(&stanker, &lattice).expect("standard kernel"));
    let text: Vec<String> = k1
        .iter()
        .map(|r| {
            format!(
                "{} C = {} (drift {:.3})",
                r.id,
                r.fitted_constant.map_or("none".into(), |c| format!("{c:.3}")),
                r.drift
            )
        })
        .collect();
    ledger.push(
        "8",
        k1.len() == 2 && k1.iter().all(|r| r.fitted_constant.is_some()) && t <= minutes(2),
        true,
        format!("{}, {:.0}s (limit 120s)", text.join(", "), t.as_secs_f64()),
    );

    let off: Vec<&str> = ledger
        .lines
        .iter()
        .filter(|l| l.pass != l.expect_pass)
        .map(|l| l.label.as_str())
        .collect();
    if ledger.ok() {
        println!("acceptance: every criterion matches its expectation");
    } else {
        println!("acceptance: unexpected outcome for criteria {}", off.join(", "));
        std::process::exit(1);
    }
}
