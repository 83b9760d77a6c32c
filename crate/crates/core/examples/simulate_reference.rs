//! Samples the reference SCM and prints exact ground-truth effects of its
//! shipped probe mechanisms.
//!
//! cargo run --example simulate_reference -- [n] [seed]

use fairclust::scm::{decomposition_check, ground_truth_all, ExprMechanism, ScmSpec, DEFAULT_ENUMERATION_CAP};

fn main() -> fairclust::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/reference_scm.json");
    let spec = ScmSpec::from_json_file(path)?;
    let scm = spec.compile()?;
    let d = scm.sample(n, seed)?;
    let [n0, n1] = d.group_sizes();
    println!("sampled {n} rows (x0: {n0}, x1: {n1})");

    for name in spec.probes.keys() {
        let f = ExprMechanism::probe(&spec, name)?;
        let truth = ground_truth_all(&scm, &f, DEFAULT_ENUMERATION_CAP)?;
        println!("\nprobe {name:?}  P(x1) = {:.4}", truth.p_x1);
        println!("{:>3} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}", "k", "TV", "NDE", "NIE", "NIE10", "Exp-SE", "residual");
        for e in &truth.clusters {
            let check = decomposition_check(&scm, &f, e.cluster)?;
            println!(
                "{:>3} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>10.2e}",
                e.cluster, e.tv, e.nde_x0x1, e.nie_x0x1, e.nie_x1x0, e.exp_se_x0x1, check.residual_x1x0
            );
        }
    }
    Ok(())
}
