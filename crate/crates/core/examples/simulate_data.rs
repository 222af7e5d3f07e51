//! Simulated mixtures with known labels, and how well classical k-means and
//! sparse hard-thresholding k-means recover them.
//!
//! Run with `cargo run --release --example simulate_data`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    for k in [2, 4, 8] {
        let ds = simulate_dataset(&SimConfig {
            n: 120,
            p: 300,
            k,
            mu: 0.8,
            seed: 42,
        })?;
        let data = standardize(&ds.data)?.data;
        let truth = ds.truth();
        let classical = kmeans(&data, k, 10, 42, &LloydOptions::default())?;
        let path = lambda_path(&data, k, PenaltyFamily::HardThreshold, false, &default_grid(), &FitOptions::default(), 42)?;
        let chosen = bic(&path, &data)?;
        println!(
            "K = {k}: k-means ARI {:.3}; BIC-selected HT keeps {} variables, ARI {:.3}",
            adjusted_rand_index(&classical.partition, &truth)?,
            chosen.chosen_fit.active_set.len(),
            adjusted_rand_index(&chosen.chosen_fit.partition, &truth)?
        );
    }
    Ok(())
}
