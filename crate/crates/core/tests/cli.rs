use std::path::Path;
use std::process::Command;

use riesz_kernels::cli::{self, VerifyArgs, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use riesz_kernels::verify::{LatticeConfig, SuiteSelection};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run_with(std::iter::once("rkl").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn value(line: &str) -> f64 {
    line.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn eval_examples() {
    let cases: [(&[&str], f64); 4] = [
        (&["eval", "bessel-k", "--nu", "0.5", "--x", "1"], 0.4610685044),
        // I_{1/2}(1) K_{1/2}(1) = (1 - e^{-2}) / 2
        (&["eval", "kernel", "--family", "m1", "--t", "0.5", "--u", "0", "--v", "0"], 0.43233235838169366),
        (&["eval", "subord-g", "--lambda", "1"], 0.4636476090),
        (&["eval", "bessel-i", "--nu", "0", "--x", "1"], 1.2660658778),
    ];
    for (args, want) in cases {
        let (code, out, err) = run(args);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        assert_eq!(out.lines().count(), 1);
        assert!(out.contains(" +- "));
        let got = value(&out);
        assert!((got - want).abs() < 1e-9, "{args:?}: {got}");
    }
}

#[test]
fn eval_reports_an_error_estimate_for_integrated_kernels() {
    let (code, out, _) = run(&["eval", "kernel", "--family", "m0", "--n", "1", "--u", "-1", "--v", "0.5"]);
    assert_eq!(code, EXIT_OK);
    let err: f64 = out.split("+-").nth(1).unwrap().trim().parse().unwrap();
    assert!(err >= 0.0 && err < 1e-6 * value(&out).abs().max(1e-12));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["eval", "bessel-k", "--nu", "0.5"][..],
        &["eval", "nonsense"],
        &["verify", "--suite", "everything"],
        &["verify", "--set", "no_such_key=1"],
        &["verify", "--set", "plane_step"],
        &["verify", "--preset", "slow"],
        &["verify", "--parallel", "0"],
        &["verify", "--weight", "bogus:a=1"],
        &["eval", "subord-g", "--lambda", "-1"],
        &["eval", "kernel", "--t", "0.9", "--u", "0", "--v", "0"],
        &["eval", "bessel-k", "--nu", "0.5", "--x", "-1"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(
        &file,
        "# smoke run\nsuite = kernels\nplane_step = 0.5\nsplit_tol = 1e-8\npreset = quick\nseed = 3\n",
    )
    .unwrap();
    let args = VerifyArgs {
        config: Some(file.clone()),
        suite: Some(SuiteSelection::Bessel),
        set: vec!["plane_step=1".into()],
        ..Default::default()
    };
    let cfg = cli::resolve(&args).unwrap();
    assert_eq!(cfg.suite, SuiteSelection::Bessel);
    assert_eq!(cfg.lattice.plane_step, 1.0);
    assert_eq!(cfg.lattice.seed, Some(3));
    // quick preset applied before the other file keys
    assert_eq!(cfg.operators.split_tol, 1e-8);
    assert_eq!(cfg.lattice.band_step, LatticeConfig::coarse().band_step);

    let only_file = cli::resolve(&VerifyArgs { config: Some(file), ..Default::default() }).unwrap();
    assert_eq!(only_file.suite, SuiteSelection::Kernels);
    assert_eq!(only_file.lattice.plane_step, 0.5);
    assert_ne!(only_file.hash().unwrap(), cfg.hash().unwrap());
}

fn listing(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn verify_writes_reports_independent_of_parallelism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["verify", "--suite", "bessel", "--preset", "quick"];
    let mut first = common.to_vec();
    first.extend(["--parallel", "1", "--out", a.path().to_str().unwrap()]);
    let mut second = common.to_vec();
    second.extend(["--parallel", "3", "--out", b.path().to_str().unwrap()]);
    let (code, out, err) = run(&first);
    assert_eq!(code, EXIT_OK, "{out}\n{err}");
    assert!(out.contains("(negative control)"));
    assert_eq!(run(&second).0, EXIT_OK);
    let (fa, fb) = (listing(a.path()), listing(b.path()));
    assert_eq!(fa, fb);
    let json = fa.iter().filter(|f| f.0.ends_with(".json")).count();
    assert!(json >= 20, "{json} json reports");
    assert!(fa.iter().any(|f| f.0 == "estimates.csv"));
    assert!(fa.iter().any(|f| f.0 == "bessel-closed-forms.json"));
}

#[test]
fn binary_honours_out_dir_env_and_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_rkl");
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(exe)
        .args(["verify", "--suite", "bessel", "--preset", "quick"])
        .env("RKL_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(dir.path().join("estimates.csv").exists());

    let bad = Command::new(exe).args(["eval", "psi", "--t", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    assert_ne!(EXIT_FAILURE, EXIT_USAGE);
}
