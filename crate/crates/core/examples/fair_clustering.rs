//! The fair clustering pipeline under every combination of removed
//! effects, on a sample of the reference SCM.
//!
//! cargo run --release --example fair_clustering -- [n]

use fairclust::data::EffectFlags;
use fairclust::pipeline::{run_algorithm1, RunConfig};
use fairclust::scm::ScmSpec;

fn main() -> fairclust::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_scm.json");
    let d = ScmSpec::from_json_file(path)?.compile()?.sample(n, 7)?;

    println!("{:>7} {:>6} {:>8} {:>9} {:>9} {:>9} {:>9}", "flags", "tau_z", "uses X", "TV", "NDE", "NIE", "Exp-SE");
    for flags in EffectFlags::all_combinations() {
        let cfg = RunConfig { flags, seed: 7, n_inner: 20, n_outer: 2, ..RunConfig::default() };
        let run = run_algorithm1(&d, &cfg)?;
        let plan = run.plan.as_ref().expect("pipeline runs carry a plan");
        let c = &run.report.clusters[0];
        println!(
            "{:>7} {:>6} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            flags.to_string(),
            if plan.tau_z_is_identity() { "id" } else { "fit" },
            run.model.feature_set.iter().any(|f| f == "x"),
            c.tv.point,
            c.nde.point,
            c.nie.point,
            c.exp_se.point
        );
    }
    Ok(())
}
