//! One-dimensional quantile transport, then the conditional transport of a
//! whole dataset with the residuals that remain after it.
//!
//! cargo run --example quantile_transport

use fairclust::data::{cells, EffectFlags, Smoothing};
use fairclust::scm::ScmSpec;
use fairclust::transport::{fit_and_apply, QuantileMap};

fn main() -> fairclust::Result<()> {
    // monotone rearrangement of {2, 4, 6, 8} onto {1, 2, 3}
    let map = QuantileMap::fit(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0])?;
    for v in [1.0, 2.0, 3.0, 5.0, 8.0, 9.5] {
        let (t, extrapolated) = map.apply(v);
        println!("{v:>5} -> {t:.3}{}", if extrapolated { "  (outside the source range)" } else { "" });
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example2_scm.json");
    let d = ScmSpec::from_json_file(path)?.compile()?.sample(20_000, 3)?;
    let before = cells::residuals(&d, Smoothing::default())?;
    println!("\nbefore: delta_z = {:.4}", before.delta_z);

    for flags in [EffectFlags::new(true, true, false), EffectFlags::ALL] {
        let (plan, adapted) = fit_and_apply(&d, flags, 11)?;
        let after = cells::residuals(&adapted, Smoothing::default())?;
        let worst_w = plan.residual_delta_w.values().cloned().fold(0.0, f64::max);
        println!(
            "flags ({flags}): tau_z identity = {}, delta_z = {:.4}, max delta_w = {:.4}, fallback cells = {}",
            plan.tau_z_is_identity(),
            after.delta_z,
            worst_w,
            plan.fallback_cells
        );
    }
    Ok(())
}
