use super::*;

#[test]
fn registry_ids_are_unique_and_complete() {
    let specs = registry();
    let mut ids: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n);
    assert!(n >= 22);
    assert!(ids.contains(&"lm3-case4-n1-j0"));
    assert!(ids.contains(&"stanker-grad-K1"));
    assert!(specs.iter().filter(|s| s.expected == Expectation::Fail).count() >= 2);
    assert!(specs.iter().all(|s| !s.anchor.is_empty()));
}

fn cheap_specs() -> Vec<EstimateSpec> {
    registry()
        .into_iter()
        .filter(|s| matches!(s.source, Source::Product | Source::BesselIk | Source::Elementary))
        .collect()
}

fn tiny() -> LatticeConfig {
    LatticeConfig {
        product_lo: -3.0,
        product_hi: 2.0,
        z_max: 10.0,
        z_extend: 5.0,
        ..LatticeConfig::coarse()
    }
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let specs = cheap_specs();
    let cfg = tiny();
    let one = with_parallelism(1, || run_specs(&specs, &cfg)).unwrap().unwrap();
    let three = with_parallelism(3, || run_specs(&specs, &cfg)).unwrap().unwrap();
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&three).unwrap()
    );
    assert_eq!(one.len(), specs.len());
    for (r, s) in one.iter().zip(&specs) {
        assert_eq!(r.id, s.id);
    }
}

#[test]
fn negative_control_fails_on_a_small_lattice() {
    let specs: Vec<_> = registry().into_iter().filter(|s| s.id == "neg-lm1-eq5-weak").collect();
    let r = &run_specs(&specs, &tiny()).unwrap()[0];
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.as_expected);
    assert!(r.drift > 1.0);
}

#[test]
fn duplicate_ids_are_rejected() {
    let mut specs = cheap_specs();
    specs.truncate(1);
    specs.push(specs[0].clone());
    assert!(run_specs(&specs, &tiny()).is_err());
}

#[test]
fn refinement_doubles_density_and_extends() {
    let cfg = tiny();
    for source in [Source::Product, Source::BesselIk, Source::Plane, Source::Elementary] {
        let (a, b) = (cfg.points(source, 0), cfg.points(source, 1));
        assert!(b.len() > 2 * a.len(), "{source:?}: {} vs {}", a.len(), b.len());
    }
    // the product lattice holds its diagonal and the curve y - x = 1
    let pts = cfg.points(Source::Product, 0);
    assert!(pts.iter().any(|p| p[1] == p[2]));
    assert!(pts.iter().any(|p| ((p[2].exp() - p[1].exp()) - 1.0).abs() < 1e-12));
    assert!(pts.iter().all(|p| p[1] <= p[2]));
}

#[test]
fn seed_translates_lattices_reproducibly() {
    let plain = tiny();
    let seeded = LatticeConfig { seed: Some(7), ..tiny() };
    for source in [Source::Product, Source::BesselJ, Source::Integrated] {
        let a = plain.points(source, 0);
        let b = seeded.points(source, 0);
        assert_eq!(a.len(), b.len());
        assert_ne!(a, b);
        assert_eq!(b, seeded.points(source, 0));
        // translation along the diagonal keeps u - v
        if source == Source::Integrated {
            for (p, q) in a.iter().zip(&b) {
                assert!(((p[0] - p[1]) - (q[0] - q[1])).abs() < 1e-12);
            }
        }
    }
    let other = LatticeConfig { seed: Some(8), ..tiny() };
    assert_ne!(seeded.points(Source::Product, 0), other.points(Source::Product, 0));
}

#[test]
fn config_hash_tracks_every_field() {
    let a = config_hash(&LatticeConfig::default()).unwrap();
    assert_eq!(a, config_hash(&LatticeConfig::default()).unwrap());
    assert_eq!(a.len(), 64);
    let b = config_hash(&LatticeConfig { product_step: 0.125, ..LatticeConfig::default() }).unwrap();
    let c = config_hash(&LatticeConfig { seed: Some(1), ..LatticeConfig::default() }).unwrap();
    assert_ne!(a, b);
    assert_ne!(a, c);
}

#[test]
fn outputs_carry_headers() {
    let specs: Vec<_> = cheap_specs().into_iter().take(3).collect();
    let ratios = run_specs(&specs, &tiny()).unwrap();
    let checks = vec![CheckReport::at_most("demo", "eq:1", "value", 0.5, 1.0)];
    let profile = DecayProfile {
        family: crate::kernels::KernelFamily::M1,
        n: 0,
        bin_width: 0.5,
        curves: Default::default(),
    };
    let outputs = RunOutputs {
        ratios,
        checks,
        profiles: vec![profile],
    };
    let dir = tempfile::tempdir().unwrap();
    let written = write_outputs(dir.path(), "abc123", &outputs).unwrap();
    assert_eq!(written.len(), 3 + 1 + 2 + 1);
    for path in &written {
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains("abc123"), "{}", path.display());
        assert!(text.contains(ARTIFACT_VERSION));
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["schema"], 1);
                assert!(!v["anchor"].as_str().unwrap().is_empty());
                assert!(v["report"]["id"].is_string());
            }
            Some("csv") => assert!(text.starts_with("# schema: 1\n")),
            Some("svg") => assert!(text.contains("<svg") && text.contains("anchor:")),
            other => panic!("unexpected file type {other:?}"),
        }
    }
}

#[test]
fn aggregate_lists_failures_in_order() {
    let a = aggregate([("x", true), ("y", false), ("z", false)]);
    assert!(!a.passed);
    assert_eq!(a.total, 3);
    assert_eq!(a.failing, vec!["y".to_string(), "z".to_string()]);
    assert!(aggregate(std::iter::empty()).passed);
}

#[test]
fn suite_names_round_trip() {
    for s in ["bessel", "kernels", "estimates", "operators", "all"] {
        let parsed: SuiteSelection = s.parse().unwrap();
        assert_eq!(parsed.to_string(), s);
    }
    assert!("everything".parse::<SuiteSelection>().is_err());
}
