//! k-prototypes on mixed numeric and categorical data, with and without the
//! protected attribute.
//!
//! cargo run --example kprototypes -- [k] [seed]

use fairclust::cluster::kprototypes_fit;
use fairclust::scm::ScmSpec;

fn main() -> fairclust::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/compas_surrogate_scm.json");
    let d = ScmSpec::from_json_file(path)?.compile()?.sample(10_000, seed)?;

    for ftu in [false, true] {
        let (model, a) = kprototypes_fit(&d, k, None, ftu, seed)?;
        println!(
            "ftu = {ftu}: gamma = {:.3}, {} iterations, final cost {:.1}",
            model.gamma,
            model.iterations,
            model.cost_history.last().copied().unwrap_or(f64::NAN)
        );
        println!("  numeric: {:?}", model.numeric_features);
        println!("  categorical: {:?}", model.categorical_features);
        let mut sizes = vec![0usize; k];
        for &l in &a.labels {
            sizes[l] += 1;
        }
        for (c, p) in model.prototypes.iter().enumerate() {
            let num: Vec<String> = p.numeric.iter().map(|v| format!("{v:.2}")).collect();
            println!("  cluster {} (n = {}): [{}] {:?}", c + 1, sizes[c], num.join(", "), p.categorical);
        }
    }
    Ok(())
}
