//! Oracle-lambda ARI of the four penalties on simulated data with 50
//! informative and 150 noise variables.
//!
//! Run with `cargo run --release --example compare_penalties`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    let reps = 5;
    let grid = default_grid();
    let mut totals = [0.0; 4];
    for r in 0..reps {
        let ds = simulate_dataset(&SimConfig {
            n: 80,
            p: 200,
            k: 4,
            mu: 0.6,
            seed: 100 + r,
        })?;
        let data = standardize(&ds.data)?.data;
        let truth = ds.truth();
        for (i, family) in PenaltyFamily::ALL.into_iter().enumerate() {
            let path = lambda_path(&data, 4, family, false, &grid, &FitOptions::default(), r)?;
            let best = path
                .fits
                .iter()
                .map(|f| adjusted_rand_index(&f.partition, &truth))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            totals[i] += best;
        }
    }
    for (family, t) in PenaltyFamily::ALL.iter().zip(totals) {
        println!("{:<12} mean oracle ARI {:.3}", family.name(), t / reps as f64);
    }
    Ok(())
}
