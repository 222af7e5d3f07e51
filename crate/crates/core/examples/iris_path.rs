//! Hard-thresholding regularization path on the Iris measurements.
//!
//! Prints, for every lambda, the active variables and the ARI against the
//! species labels. Run with `cargo run --release --example iris_path`.

use std::path::Path;

use htkmeans::prelude::*;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let raw = load_csv(dir.join("iris.csv"), true)?;
    let data = standardize(&raw)?.data;
    let species: Vec<usize> = std::fs::read_to_string(dir.join("iris_species.csv"))?
        .lines()
        .map(|l| l.trim().parse().expect("integer label"))
        .collect();
    let truth = Partition::from_labels(&species)?;

    let path = lambda_path(
        &data,
        3,
        PenaltyFamily::HardThreshold,
        false,
        &default_grid(),
        &FitOptions::default(),
        1,
    )?;
    println!("{:>9}  {:<40}  {:>5}", "lambda", "active variables", "ARI");
    for f in &path.fits {
        let names: Vec<&str> = f.active_set.iter().map(|&j| data.column_names()[j].as_str()).collect();
        println!(
            "{:>9.4}  {:<40}  {:>5.3}",
            f.lambda,
            names.join(","),
            adjusted_rand_index(&f.partition, &truth)?
        );
    }
    Ok(())
}
