use std::path::Path;
use std::process::Command;

use fairclust::cluster::kprototypes_fit;
use fairclust::data::{Dataset, EffectFlags};
use fairclust::pipeline::{
    read_assignment, run_algorithm1, run_benchmark, write_benchmark, write_run, Method, RunConfig,
};
use fairclust::scm::ScmSpec;
use fairclust::transport::fit_and_apply;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn sample(name: &str, n: usize, seed: u64) -> Dataset {
    let spec = ScmSpec::from_json_file(fixture(name)).unwrap();
    spec.compile().unwrap().sample(n, seed).unwrap()
}

fn quick(flags: EffectFlags, seed: u64) -> RunConfig {
    RunConfig {
        flags,
        seed,
        n_inner: 4,
        n_outer: 2,
        ..RunConfig::default()
    }
}

#[test]
fn every_flag_combination_follows_its_branch() {
    let d = sample("example2_scm.json", 3000, 1);
    for flags in EffectFlags::all_combinations() {
        let run = run_algorithm1(&d, &quick(flags, 5)).unwrap();
        let plan = run.plan.as_ref().unwrap();
        assert_eq!(plan.flags, flags);
        assert_eq!(plan.tau_z_is_identity(), !flags.se, "{flags}");
        assert_eq!(run.model.feature_set.iter().any(|c| c == "x"), !flags.nde, "{flags}");
        assert_eq!(run.model.ftu, flags.nde);
        // Mediators are always transported: across groups with the NIE
        // flag, within each group otherwise.
        assert!(!plan.tau_w.is_empty());
        for m in &plan.tau_w {
            if flags.nie {
                assert_eq!((m.source_group, m.target_group), (1, 0), "{flags}");
            } else {
                assert_eq!(m.source_group, m.target_group, "{flags}");
            }
        }
        if flags.nde {
            for c in &run.report.clusters {
                assert!(c.nde.point.abs() <= 1e-12, "{flags}: NDE {}", c.nde.point);
            }
        }
    }
}

#[test]
fn no_flags_matches_plain_kprototypes() {
    let d = sample("reference_scm.json", 2000, 2);
    let cfg = quick(EffectFlags::NONE, 9);
    let run = run_algorithm1(&d, &cfg).unwrap();
    let (_, direct) = kprototypes_fit(&d, 2, None, false, cfg.seed).unwrap();
    assert_eq!(run.assignment.labels, direct.labels);
}

#[test]
fn nde_flag_alone_matches_ftu_kprototypes_on_adapted_data() {
    let d = sample("example2_scm.json", 2000, 2);
    let flags = EffectFlags::new(true, false, false);
    let cfg = quick(flags, 9);
    let run = run_algorithm1(&d, &cfg).unwrap();
    let (_, adapted) = fit_and_apply(&d, flags, cfg.transport_seed()).unwrap();
    let (_, direct) = kprototypes_fit(&adapted, 2, None, true, cfg.cluster_seed()).unwrap();
    assert_eq!(run.assignment.labels, direct.labels);
}

#[test]
fn benchmark_labels_and_determinism() {
    let d = sample("reference_scm.json", 2000, 3);
    let cfg = quick(EffectFlags::ALL, 11);
    let a = run_benchmark(&d, &cfg).unwrap();
    let ids: Vec<&str> = a.runs.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(ids, ["unadjusted", "ftu", "balanced", "causal_nde_nie", "causal_nde_nie_se"]);
    assert_eq!(a.run(Method::Balanced).unwrap().report.display_name, "balanced (fairlet)");
    let b = run_benchmark(&d, &cfg).unwrap();
    assert_eq!(a.metrics_csv().unwrap(), b.metrics_csv().unwrap());
    let ftu = a.run(Method::Ftu).unwrap();
    for c in &ftu.report.clusters {
        assert!(c.nde.point.abs() <= 1e-12);
    }
}

#[test]
fn benchmark_skips_balanced_with_an_empty_group() {
    let d = sample("reference_scm.json", 1000, 3);
    let rows: Vec<usize> = (0..d.n()).filter(|&r| d.x()[r] == 0).collect();
    let d0 = d.select_rows(&rows);
    let cfg = quick(EffectFlags::ALL, 1);
    // The remaining methods need both groups for the audit, so the run
    // fails after the skip; the skip itself must not be the failure.
    match run_benchmark(&d0, &cfg) {
        Ok(b) => assert!(b.skipped.iter().any(|(m, _)| m == "balanced")),
        Err(e) => assert!(!e.to_string().contains("balanced"), "{e}"),
    }
}

#[test]
fn output_directories_echo_the_config() {
    let d = sample("reference_scm.json", 1500, 4);
    let cfg = quick(EffectFlags::new(true, true, false), 2);
    let run = run_algorithm1(&d, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &run, &cfg).unwrap();
    for f in ["report.json", "metrics.csv", "assignment.csv", "plan.json", "model.json", "config.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let echoed: RunConfig = serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
    let a = read_assignment(dir.path().join("assignment.csv")).unwrap();
    assert_eq!(a.labels, run.assignment.labels);

    let bdir = tempfile::tempdir().unwrap();
    let b = run_benchmark(&d, &cfg).unwrap();
    write_benchmark(bdir.path(), &b).unwrap();
    let echoed: RunConfig = serde_json::from_str(&std::fs::read_to_string(bdir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
    assert!(bdir.path().join("causal_nde_nie_se/plan.json").exists());
    assert!(bdir.path().join("unadjusted/assignment.csv").exists());
}

#[test]
fn invalid_config_is_rejected() {
    let d = sample("reference_scm.json", 200, 4);
    for cfg in [
        RunConfig { k: 0, ..RunConfig::default() },
        RunConfig { n_inner: 0, ..RunConfig::default() },
        RunConfig { gamma: Some(-1.0), ..RunConfig::default() },
    ] {
        let err = run_algorithm1(&d, &cfg).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
}

fn fairclust(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fairclust")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn cli_subcommands_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = fairclust(&["simulate", "--spec", &fixture("reference_scm.json"), "--n", "1500", "--seed", "3", "--output", p(&sim)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["data.csv", "schema.json", "ground_truth.json"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let data = sim.join("data.csv");
    let schema = sim.join("schema.json");
    let common = ["--dataset", p(&data), "--schema", p(&schema), "--n-inner", "3", "--n-outer", "2"];

    let adapt = dir.path().join("adapt");
    let mut args = vec!["adapt"];
    args.extend(common);
    args.extend(["--output", p(&adapt)]);
    assert_eq!(fairclust(&args).status.code(), Some(0));
    assert!(adapt.join("adapted.csv").exists() && adapt.join("plan.json").exists());

    let cluster = dir.path().join("cluster");
    let mut args = vec!["cluster"];
    args.extend(common);
    args.extend(["--flags", "1,1,0", "--output", p(&cluster)]);
    assert_eq!(fairclust(&args).status.code(), Some(0));
    assert!(cluster.join("report.json").exists());

    let eval = dir.path().join("eval");
    let assignment = cluster.join("assignment.csv");
    let mut args = vec!["evaluate"];
    args.extend(common);
    args.extend(["--assignment", p(&assignment), "--output", p(&eval)]);
    let out = fairclust(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval.join("metrics.csv").exists());

    let bench = dir.path().join("bench");
    let mut args = vec!["benchmark"];
    args.extend(common);
    args.extend(["--output", p(&bench)]);
    assert_eq!(fairclust(&args).status.code(), Some(0));
    assert!(bench.join("metrics.csv").exists() && bench.join("report.json").exists());

    // Validation errors exit with 1, runtime errors with 2.
    let mut args = vec!["cluster"];
    args.extend(common);
    args.extend(["--k", "0", "--output", p(&cluster)]);
    assert_eq!(fairclust(&args).status.code(), Some(1));
    assert_eq!(fairclust(&["cluster", "--bogus"]).status.code(), Some(1));
    let missing = dir.path().join("missing.csv");
    let out = fairclust(&["cluster", "--dataset", p(&missing), "--schema", p(&schema), "--output", p(&cluster)]);
    assert_eq!(out.status.code(), Some(1));
    // The output directory cannot be created over an existing file.
    let mut args = vec!["cluster"];
    args.extend(common);
    args.extend(["--output", p(&data)]);
    assert_eq!(fairclust(&args).status.code(), Some(2));
}
