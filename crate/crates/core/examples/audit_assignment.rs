//! Audits a fixed assignment: plug-in effects with bootstrap intervals
//! next to the exact values from the enumeration oracle.
//!
//! cargo run --release --example audit_assignment -- [probe] [n]

use fairclust::metrics::{bootstrap, Audit, BootstrapConfig, Effect};
use fairclust::scm::{ground_truth_all, label_dataset, ExprMechanism, ScmSpec, DEFAULT_ENUMERATION_CAP};

fn main() -> fairclust::Result<()> {
    let mut args = std::env::args().skip(1);
    let probe = args.next().unwrap_or_else(|| "majority".into());
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_scm.json");
    let spec = ScmSpec::from_json_file(path)?;
    let scm = spec.compile()?;
    let f = ExprMechanism::probe(&spec, &probe)?;
    let truth = ground_truth_all(&scm, &f, DEFAULT_ENUMERATION_CAP)?;

    let d = scm.sample(n, 7)?;
    let a = label_dataset(&f, &d)?;
    let (points, flagged) = Audit::new(&d, &a, 2)?.point()?;
    println!("probe {probe:?}, n = {n}, smoothed tables: {flagged}");

    let cfg = BootstrapConfig { n_inner: 50, n_outer: 5, seed: 1 };
    for (k, t) in truth.clusters.iter().enumerate() {
        println!("\ncluster {}", k + 1);
        println!("{:>8} {:>9} {:>21} {:>9}", "effect", "estimate", "95% interval", "oracle");
        let oracle = [t.tv, t.nde_x0x1, t.nie_x0x1, t.exp_se_x0x1];
        for (e, o) in Effect::REPORTED.into_iter().zip(oracle) {
            let est = bootstrap(e, &d, &a, k, cfg)?;
            println!(
                "{:>8} {:>9.4} [{:>9.4}, {:>9.4}] {:>9.4}",
                e.name(),
                est.point,
                est.ci_low,
                est.ci_high,
                o
            );
        }
        println!("decomposition residual: {:.2e}", points[k].decomposition_residual());
    }
    Ok(())
}
