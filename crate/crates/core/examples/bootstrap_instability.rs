//! Bootstrap clustering instability as a function of lambda.
//!
//! Run with `cargo run --release --example bootstrap_instability`.

use htkmeans::prelude::*;
use htkmeans::selection::stability_table;

fn main() -> Result<()> {
    let ds = simulate_dataset(&SimConfig {
        n: 60,
        p: 60,
        k: 2,
        mu: 0.8,
        seed: 3,
    })?;
    let data = standardize(&ds.data)?.data;
    let grid = log_grid(-2.0, 1.0, 12, true);
    let opts = StabilityOptions {
        replications: 10,
        ..StabilityOptions::default()
    };
    let tables = stability_table(&data, 2, PenaltyFamily::HardThreshold, false, &grid, &StabilityScheme::ALL, &opts, 3)?;

    println!("{:>8} {:>8} {:>8} {:>8}", "lambda", "stab1", "stab2", "stab3");
    for (i, lambda) in grid.iter().enumerate() {
        let cell = |t: &Vec<htkmeans::selection::StabilityDiagnostic>| {
            let d = &t[i];
            match d.instability {
                Some(v) if !d.degenerate => format!("{v:.4}"),
                Some(_) => "collapsed".to_string(),
                None => "-".to_string(),
            }
        };
        println!("{lambda:>8.4} {:>8} {:>8} {:>8}", cell(&tables[0]), cell(&tables[1]), cell(&tables[2]));
    }
    Ok(())
}
