//! Every lambda selector on the Iris path: AIC, BIC, gap1, gap2 and the three
//! bootstrap instability schemes.
//!
//! Run with `cargo run --release --example select_lambda`.

use std::path::Path;

use htkmeans::prelude::*;
use htkmeans::selection::select_stability_all;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let data = standardize(&load_csv(dir.join("iris.csv"), true)?)?.data;
    let grid = default_grid();
    let seed = 2024;
    let path = lambda_path(&data, 3, PenaltyFamily::HardThreshold, false, &grid, &FitOptions::default(), seed)?;

    let mut reports = vec![
        aic(&path, &data)?,
        bic(&path, &data)?,
        select_gap(&path, &data, GapVariant::Gap1, &GapOptions::default(), seed)?,
        select_gap(&path, &data, GapVariant::Gap2, &GapOptions::default(), seed)?,
    ];
    // The three schemes share their bootstrap fits.
    reports.extend(select_stability_all(
        &data,
        3,
        PenaltyFamily::HardThreshold,
        false,
        &grid,
        &StabilityScheme::ALL,
        &StabilityOptions::default(),
        seed,
    )?);

    for r in &reports {
        let vars: Vec<&str> = r.chosen_fit.active_set.iter().map(|&j| data.column_names()[j].as_str()).collect();
        println!("{:<6} lambda {:>7.4}  variables {}", r.method.name(), r.chosen_lambda, vars.join(", "));
    }
    // Records are what the `select` subcommand serializes.
    let record = reports[0].to_record();
    println!("\naic chose 1-based variables {:?}", record.chosen_active_set);
    Ok(())
}
