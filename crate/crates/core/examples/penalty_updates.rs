//! Center updates of the four penalty families for one fixed partition.
//!
//! Run with `cargo run --example penalty_updates`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    // Variable 1 separates the two clusters, variable 2 barely does.
    let raw = DataMatrix::from_rows(&[
        vec![2.1, 0.3],
        vec![1.8, -0.2],
        vec![2.4, 0.1],
        vec![-1.9, 0.2],
        vec![-2.2, -0.4],
        vec![-2.0, 0.0],
    ])?;
    let data = standardize(&raw)?.data;
    let part = Partition::new(vec![0, 0, 0, 1, 1, 1], 2)?;
    println!("cluster means:\n{:.3}", cluster_means(&data, &part)?.as_array());

    for lambda in [0.05, 0.3, 1.0] {
        println!("\nlambda = {lambda}");
        for family in PenaltyFamily::ALL {
            let spec = PenaltySpec::new(family, lambda)?;
            let mu = update_centers(&spec, &data, &part)?;
            let obj = penalized_objective(&data, &mu, &part, &spec)?;
            println!(
                "  {:<12} objective {obj:.4}  active {:?}  centers {:.3?}",
                family.name(),
                mu.active_set(),
                mu.as_array().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}
