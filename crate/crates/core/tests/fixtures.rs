use fairclust::data::{write_dataset, SfmSchema};
use fairclust::pipeline::{run_simulate, simulate_spec};
use fairclust::scm::{ground_truth_all, ExprMechanism, ScmSpec, DEFAULT_ENUMERATION_CAP};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn reference_sample_regenerates_byte_identically() {
    let (d, truth) = run_simulate(fixture("reference_scm.json"), 2000, 7).unwrap();
    let mut csv = Vec::new();
    write_dataset(&d, &mut csv).unwrap();
    let committed = std::fs::read(fixture("reference_sample/data.csv")).unwrap();
    assert!(csv == committed, "data.csv differs from the committed sample");

    let gt = std::fs::read_to_string(fixture("reference_sample/ground_truth.json")).unwrap();
    assert_eq!(truth.to_json_pretty(), gt);

    let spec = ScmSpec::from_json_file(fixture("reference_scm.json")).unwrap();
    let schema = std::fs::read_to_string(fixture("reference_sample/schema.json")).unwrap();
    assert_eq!(spec.schema().to_json_pretty(), schema);
    assert!(SfmSchema::from_json_str(&schema).is_ok());
}

#[test]
fn simulate_rejects_zero_rows() {
    let spec = ScmSpec::from_json_file(fixture("reference_scm.json")).unwrap();
    assert!(simulate_spec(&spec, 0, 7).is_err());
}

#[test]
fn simulate_is_deterministic_in_seed() {
    let spec = ScmSpec::from_json_file(fixture("reference_scm.json")).unwrap();
    let (a, _) = simulate_spec(&spec, 500, 3).unwrap();
    let (b, _) = simulate_spec(&spec, 500, 3).unwrap();
    let (c, _) = simulate_spec(&spec, 500, 4).unwrap();
    let csv = |d| {
        let mut v = Vec::new();
        write_dataset(d, &mut v).unwrap();
        v
    };
    assert_eq!(csv(&a), csv(&b));
    assert_ne!(csv(&a), csv(&c));
}

#[test]
fn reference_ground_truth_matches_hand_computation() {
    // Hand enumeration over (u_xz, u_x, u_z, u_w): P(x1) = 0.5 and the
    // majority probe has TV 0.744, NDE 0.4, NIE(x0,x1) 0.2, Exp-SE 0.144.
    let (_, truth) = run_simulate(fixture("reference_scm.json"), 10, 0).unwrap();
    assert!((truth.p_x1 - 0.5).abs() < 1e-12);
    assert_eq!(truth.convention, "x1,x0");
    let m = &truth.probes["majority"][1];
    assert!((m.lhs_tv - 0.744).abs() < 1e-12);
    assert!((m.nde_x0x1 - 0.4).abs() < 1e-12);
    assert!((m.nie_x0x1 - 0.2).abs() < 1e-12);
    assert!((m.nie_x1x0 + 0.2).abs() < 1e-12);
    assert!((m.exp_se_x0x1 - 0.144).abs() < 1e-12);
    assert!(m.residual_x1x0.abs() < 1e-12);
    let w = &truth.probes["w"][1];
    assert!((w.lhs_tv - 0.472).abs() < 1e-12);
    assert!((w.nie_x0x1 - 0.4).abs() < 1e-12);
    assert!((w.exp_se_x0x1 - 0.072).abs() < 1e-12);
    let zw = &truth.probes["z_or_w"][1];
    assert!((zw.lhs_tv - 0.416).abs() < 1e-12);
    assert!((zw.nie_x0x1 - 0.2).abs() < 1e-12);
    assert!((zw.exp_se_x0x1 - 0.216).abs() < 1e-12);
}

#[test]
fn example2_has_no_indirect_but_a_spurious_effect() {
    let (_, truth) = run_simulate(fixture("example2_scm.json"), 10, 0).unwrap();
    for name in ["z_high", "w"] {
        for c in &truth.probes[name] {
            assert!(c.nie_x0x1.abs() < 0.01, "{name}: NIE {}", c.nie_x0x1);
            assert!(c.exp_se_x0x1.abs() > 0.05, "{name}: Exp-SE {}", c.exp_se_x0x1);
        }
    }
}

#[test]
fn surrogate_specs_compile_and_sample() {
    for name in ["adult_surrogate_scm.json", "compas_surrogate_scm.json"] {
        let spec = ScmSpec::from_json_file(fixture(name)).unwrap();
        let scm = spec.compile().unwrap();
        let d = scm.sample(1000, 1).unwrap();
        let g = d.group_sizes();
        assert!(g[0] > 0 && g[1] > 0, "{name}");
    }
}

#[test]
fn probes_with_x_free_expressions_have_zero_direct_effect() {
    let spec = ScmSpec::from_json_file(fixture("reference_scm.json")).unwrap();
    let scm = spec.compile().unwrap();
    let f = ExprMechanism::probe(&spec, "z_or_w").unwrap();
    assert!(!f.reads_x(&spec));
    let t = ground_truth_all(&scm, &f, DEFAULT_ENUMERATION_CAP).unwrap();
    for c in &t.clusters {
        assert_eq!(c.nde_x0x1, 0.0);
    }
}
