//! The gap statistic along a path: observed WCSS increase per entering
//! variable against its permutation reference.
//!
//! Run with `cargo run --release --example gap_steps`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    let ds = simulate_dataset(&SimConfig {
        n: 60,
        p: 70,
        k: 2,
        mu: 1.0,
        seed: 5,
    })?;
    let data = standardize(&ds.data)?.data;
    let path = lambda_path(&data, 2, PenaltyFamily::HardThreshold, false, &default_grid(), &FitOptions::default(), 5)?;
    let steps = gap_deltas(&path, &data, &GapOptions::default(), 5)?;

    println!("{:>8} {:>5} {:>6} {:>7} {:>7} {:>7} {:>7}", "lambda", "size", "enter", "delta", "mean", "sd", "D");
    for s in &steps {
        println!(
            "{:>8.4} {:>5} {:>6} {:>7.4} {:>7.4} {:>7.4} {:>7}",
            path.grid[s.to],
            s.current.len(),
            s.entering.len(),
            s.delta,
            s.mean,
            s.sd,
            s.d.map_or("-".to_string(), |d| format!("{d:.2}"))
        );
    }
    let chosen = select_gap(&path, &data, GapVariant::Gap1, &GapOptions::default(), 5)?;
    let informative = chosen.chosen_fit.active_set.iter().filter(|&&j| j < 50).count();
    println!(
        "\ngap1 keeps {} variables ({informative} informative), ARI {:.3}",
        chosen.chosen_fit.active_set.len(),
        adjusted_rand_index(&chosen.chosen_fit.partition, &ds.truth())?
    );
    Ok(())
}
