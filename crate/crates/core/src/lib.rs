//! Regularized K-means by direct penalization of the cluster centers.
//!
//! The objective is the `(1/n)` within-cluster sum of squares plus
//! `lambda * pen(mu)`, where `pen` is one of four column penalties on the
//! `K x p` center matrix:
//!
//! - hard-thresholding (number of nonzero columns),
//! - lasso (sum of absolute entries),
//! - ridge (sum of squared entries),
//! - group-lasso (sum of column norms).
//!
//! Fitting alternates nearest-center assignment with the exact center update
//! for the chosen penalty ([`penalty::update_centers`]), started from sparse
//! k-means solutions ([`solver::sparse_init`]). Regularization paths are fitted
//! over a lambda grid ([`solver::lambda_path`]) and lambda can be picked by
//! AIC/BIC, a permutation-calibrated gap method or bootstrap instability
//! ([`selection`]).
//!
//! ```no_run
//! use htkmeans::prelude::*;
//!
//! let raw = load_csv("iris.csv", true)?;
//! let data = standardize(&raw)?.data;
//! let path = lambda_path(&data, 3, PenaltyFamily::HardThreshold, false,
//!                        &default_grid(), &FitOptions::default(), 1)?;
//! let report = select_information(&path, &data, InformationCriterion::Bic)?;
//! println!("lambda = {}, active = {:?}", report.chosen_lambda, report.chosen_fit.active_set);
//! # Ok::<(), htkmeans::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod penalty;
pub mod rng;
pub mod selection;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::data::{load_csv, read_csv, standardize, write_csv, DataMatrix, Standardized};
    pub use crate::error::{Error, Result};
    pub use crate::metrics::{
        adjusted_rand_index, center_column_norms, penalized_objective, wcss, CenterMatrix, Partition,
    };
    pub use crate::penalty::{penalty_value, update_centers, PenaltyFamily, PenaltySpec, UpdateOptions};
    pub use crate::selection::{
        aic, bic, clustering_distance, gap_deltas, gap_step, instability, select_gap, select_information,
        select_stability, GapOptions, GapVariant, InformationCriterion, SelectionMethod, SelectionReport,
        StabilityOptions, StabilityScheme,
    };
    pub use crate::simulate::{simulate_dataset, LabeledDataset, SimConfig};
    pub use crate::solver::{
        assign_points, cluster_means, default_grid, fit, kmeans, lambda_path, lloyd_regularized, log_grid,
        sparse_init, FitOptions, FitResult, LloydOptions, PathResult,
    };
}
