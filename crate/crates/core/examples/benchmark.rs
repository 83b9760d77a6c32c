//! The five-method benchmark. Without arguments it runs on a sample of the
//! COMPAS-like surrogate SCM; pass `<data.csv> <schema.json>` to use your
//! own data.
//!
//! cargo run --release --example benchmark -- [data.csv schema.json]

use fairclust::data::{load_dataset, SfmSchema};
use fairclust::pipeline::{run_benchmark, RunConfig};
use fairclust::scm::ScmSpec;

fn main() -> fairclust::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let d = match args.as_slice() {
        [data, schema] => load_dataset(data, &SfmSchema::from_json_file(schema)?)?,
        _ => {
            let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compas_surrogate_scm.json");
            ScmSpec::from_json_file(path)?.compile()?.sample(10_000, 5)?
        }
    };
    let cfg = RunConfig { seed: 5, n_inner: 30, n_outer: 2, ..RunConfig::default() };
    let bench = run_benchmark(&d, &cfg)?;

    println!("{:<30} {:>8} {:>8} {:>8} {:>8}", "method (cluster 1)", "TV", "NDE", "NIE", "Exp-SE");
    for run in &bench.runs {
        let c = &run.report.clusters[0];
        println!(
            "{:<30} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            run.report.display_name, c.tv.point, c.nde.point, c.nie.point, c.exp_se.point
        );
    }
    for (m, why) in &bench.skipped {
        println!("skipped {m}: {why}");
    }
    Ok(())
}
