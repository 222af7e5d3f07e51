//! Partition comparison and fit measures.
//!
//! Run with `cargo run --example clustering_metrics`.

use htkmeans::prelude::*;

fn main() -> Result<()> {
    let a = Partition::from_labels(&[1, 1, 1, 2, 2, 2, 3, 3])?;
    let b = Partition::from_labels(&["x", "x", "y", "y", "y", "y", "z", "z"])?;
    let relabeled = Partition::from_labels(&[3, 3, 3, 1, 1, 1, 2, 2])?;

    println!("ARI(a, b)            = {:.4}", adjusted_rand_index(&a, &b)?);
    println!("ARI(a, relabeled a)  = {:.4}", adjusted_rand_index(&a, &relabeled)?);
    println!("distance(a, b)       = {:.4}", clustering_distance(&a, &b)?);
    println!("distance(a, relabel) = {:.4}", clustering_distance(&a, &relabeled)?);

    let data = DataMatrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![6.0]])?;
    let part = Partition::new(vec![0, 0, 1, 1], 2)?;
    let centers = cluster_means(&data, &part)?;
    println!("(1/n) WCSS at the cluster means = {}", wcss(&data, &centers, &part)?);
    println!("center column norms = {:?}", center_column_norms(&centers));
    Ok(())
}
