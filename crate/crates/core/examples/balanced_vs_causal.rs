//! Balanced clusters on data with a spurious but no indirect effect: the
//! balance is bought with a direct effect of X on the cluster, which the
//! causally fair pipeline does not have. NDE is exact (oracle over the
//! SCM with each method's mechanism), TV is the plug-in estimate on the
//! covariates each method clusters.
//!
//! cargo run --release --example balanced_vs_causal

use fairclust::cluster::{balanced_fit, ModelMechanism};
use fairclust::metrics::estimate_tv;
use fairclust::pipeline::{run_algorithm1, RunConfig};
use fairclust::scm::{ground_truth_all, ExprMechanism, LabelLookup, ScmSpec, DEFAULT_ENUMERATION_CAP};

fn main() -> fairclust::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example2_scm.json");
    let spec = ScmSpec::from_json_file(path)?;
    let scm = spec.compile()?;

    let probe = ExprMechanism::probe(&spec, "z_high")?;
    let t = &ground_truth_all(&scm, &probe, DEFAULT_ENUMERATION_CAP)?.clusters[1];
    println!("probe z >= 5: NIE = {:.4}, Exp-SE = {:.4}", t.nie_x0x1, t.exp_se_x0x1);

    let d = scm.sample(20_000, 7)?;
    let (_, balanced) = balanced_fit(&d, 2, None, 7)?;
    let lookup = LabelLookup::majority(&d, &balanced.labels, 2, true)?;
    let b_nde = ground_truth_all(&scm, &lookup, DEFAULT_ENUMERATION_CAP)?.clusters[0].nde_x0x1;
    let b_tv = estimate_tv(&d, &balanced, 0)?.point;

    let cfg = RunConfig { seed: 7, n_inner: 1, n_outer: 1, ..RunConfig::default() };
    let run = run_algorithm1(&d, &cfg)?;
    let c_tv = run.report.clusters[0].tv.point;
    let causal = ModelMechanism::new(run.model, &spec)?;
    let c_nde = ground_truth_all(&scm, &causal, DEFAULT_ENUMERATION_CAP)?.clusters[0].nde_x0x1;

    println!("\n{:<22} {:>8} {:>8}", "", "TV", "NDE");
    for (name, tv, nde) in [("balanced (fairlet)", b_tv, b_nde), ("causally fair (1,1,1)", c_tv, c_nde)] {
        println!("{name:<22} {tv:>8.4} {nde:>8.4}");
    }
    Ok(())
}
