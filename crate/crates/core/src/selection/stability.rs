//! Bootstrap clustering instability.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmin_prefer_larger_lambda, Diagnostics, SelectionMethod, SelectionReport};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::{pair_counts, Partition};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::rng::{derive_seed, stream_rng};
use crate::solver::{assign_points, fit_from_starts, start_partitions, FitOptions, FitResult};

const BOOT_STREAM: u64 = 0xB007;

/// How the validation set of a bootstrap replication is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityScheme {
    /// Validate on the original data.
    Stab1,
    /// Validate on the observations drawn in both bootstrap samples.
    Stab2,
    /// Validate on a third bootstrap sample.
    Stab3,
}

impl StabilityScheme {
    pub const ALL: [StabilityScheme; 3] = [StabilityScheme::Stab1, StabilityScheme::Stab2, StabilityScheme::Stab3];

    pub fn method(self) -> SelectionMethod {
        match self {
            StabilityScheme::Stab1 => SelectionMethod::Stab1,
            StabilityScheme::Stab2 => SelectionMethod::Stab2,
            StabilityScheme::Stab3 => SelectionMethod::Stab3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    /// Bootstrap replications.
    pub replications: usize,
    pub fit: FitOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            replications: 20,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityDiagnostic {
    pub lambda: f64,
    pub instability: Option<f64>,
    pub sd: Option<f64>,
    pub replications_used: usize,
    /// Some fitted model predicted fewer than two clusters on its validation set.
    pub degenerate: bool,
}

/// Probability that a random pair of points is together in exactly one of the
/// two clusterings.
pub fn clustering_distance(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput("clustering distance needs at least two points".into()));
    }
    let (sa, sb, sab, total) = pair_counts(a.labels(), b.labels());
    Ok(((sa + sb - 2.0 * sab) / total).max(0.0))
}

struct Replicate {
    /// Per lambda, per scheme: `(distance, degenerate)` or `None` if skipped.
    outcomes: Vec<Vec<Option<(f64, bool)>>>,
}

fn bootstrap<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn fit_bootstrap(
    data: &DataMatrix,
    rows: &[usize],
    k: usize,
    specs: &[PenaltySpec],
    opts: &FitOptions,
    seed: u64,
) -> Result<Vec<FitResult>> {
    let sample = data.select_rows(rows);
    let starts = start_partitions(&sample, k, opts, seed)?;
    specs
        .iter()
        .map(|s| fit_from_starts(&sample, s, &starts, &opts.lloyd))
        .collect()
}

fn run_replicate(
    data: &DataMatrix,
    k: usize,
    specs: &[PenaltySpec],
    schemes: &[StabilityScheme],
    opts: &StabilityOptions,
    seed: u64,
    b: u64,
) -> Result<Replicate> {
    let n = data.n_obs();
    let mut rng = stream_rng(seed, &[BOOT_STREAM, b]);
    let idx1 = bootstrap(n, &mut rng);
    let idx2 = bootstrap(n, &mut rng);
    let idx3 = bootstrap(n, &mut rng);

    let fits1 = fit_bootstrap(data, &idx1, k, specs, &opts.fit, derive_seed(seed, &[BOOT_STREAM, b, 1]))?;
    let fits2 = fit_bootstrap(data, &idx2, k, specs, &opts.fit, derive_seed(seed, &[BOOT_STREAM, b, 2]))?;

    let validation: Vec<Vec<usize>> = schemes
        .iter()
        .map(|s| match s {
            StabilityScheme::Stab1 => (0..n).collect(),
            StabilityScheme::Stab2 => {
                let mut in1 = vec![false; n];
                idx1.iter().for_each(|&i| in1[i] = true);
                let mut in2 = vec![false; n];
                idx2.iter().for_each(|&i| in2[i] = true);
                (0..n).filter(|&i| in1[i] && in2[i]).collect()
            }
            StabilityScheme::Stab3 => idx3.clone(),
        })
        .collect();
    let valid_data: Vec<Option<DataMatrix>> = validation
        .iter()
        .map(|v| (v.len() >= 2).then(|| data.select_rows(v)))
        .collect();

    let mut outcomes = Vec::with_capacity(specs.len());
    for (f1, f2) in fits1.iter().zip(&fits2) {
        let mut row = Vec::with_capacity(schemes.len());
        for (si, vd) in valid_data.iter().enumerate() {
            let Some(vd) = vd else {
                log::warn!(
                    "bootstrap replication {b}: validation set for {:?} has fewer than 2 points, skipped",
                    schemes[si]
                );
                row.push(None);
                continue;
            };
            let a = assign_points(vd, &f1.centers)?;
            let c = assign_points(vd, &f2.centers)?;
            let degenerate = a.nonempty_clusters() < 2 || c.nonempty_clusters() < 2;
            row.push(Some((clustering_distance(&a, &c)?, degenerate)));
        }
        outcomes.push(row);
    }
    Ok(Replicate { outcomes })
}

/// Instability estimates on a lambda grid for several schemes at once.
///
/// The bootstrap samples and fits of replication `b` depend only on
/// `(seed, b)`, so every scheme and every lambda share them.
pub fn stability_table(
    data: &DataMatrix,
    k: usize,
    family: PenaltyFamily,
    adaptive: bool,
    grid: &[f64],
    schemes: &[StabilityScheme],
    opts: &StabilityOptions,
    seed: u64,
) -> Result<Vec<Vec<StabilityDiagnostic>>> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if opts.replications == 0 {
        return Err(Error::Config("at least one bootstrap replication is required".into()));
    }
    let specs = grid
        .iter()
        .map(|&l| PenaltySpec::new(family, l).map(|s| s.adaptive(adaptive)))
        .collect::<Result<Vec<_>>>()?;
    let reps = (0..opts.replications as u64)
        .into_par_iter()
        .map(|b| run_replicate(data, k, &specs, schemes, opts, seed, b))
        .collect::<Result<Vec<_>>>()?;

    let mut tables = Vec::with_capacity(schemes.len());
    for si in 0..schemes.len() {
        let mut table = Vec::with_capacity(grid.len());
        for (li, &lambda) in grid.iter().enumerate() {
            let vals: Vec<(f64, bool)> = reps.iter().filter_map(|r| r.outcomes[li][si]).collect();
            let used = vals.len();
            let (instability, sd) = if used == 0 {
                (None, None)
            } else {
                let m = vals.iter().map(|v| v.0).sum::<f64>() / used as f64;
                let sd = if used > 1 {
                    (vals.iter().map(|v| (v.0 - m).powi(2)).sum::<f64>() / (used - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (Some(m), Some(sd))
            };
            table.push(StabilityDiagnostic {
                lambda,
                instability,
                sd,
                replications_used: used,
                degenerate: vals.iter().any(|v| v.1),
            });
        }
        tables.push(table);
    }
    Ok(tables)
}

/// Mean bootstrap clustering distance at one lambda.
pub fn instability(
    data: &DataMatrix,
    k: usize,
    spec: &PenaltySpec,
    scheme: StabilityScheme,
    opts: &StabilityOptions,
    seed: u64,
) -> Result<f64> {
    let table = stability_table(data, k, spec.family, spec.adaptive, &[spec.lambda], &[scheme], opts, seed)?;
    table[0][0]
        .instability
        .ok_or_else(|| Error::Selection("every bootstrap replication was skipped".into()))
}

/// Pick the least unstable lambda for each scheme. Lambdas whose models
/// collapse to fewer than two predicted clusters are disqualified; ties go to
/// the larger lambda.
pub fn select_stability_all(
    data: &DataMatrix,
    k: usize,
    family: PenaltyFamily,
    adaptive: bool,
    grid: &[f64],
    schemes: &[StabilityScheme],
    opts: &StabilityOptions,
    seed: u64,
) -> Result<Vec<SelectionReport>> {
    let tables = stability_table(data, k, family, adaptive, grid, schemes, opts, seed)?;
    let mut reports = Vec::with_capacity(schemes.len());
    // Full-data fits share their starts across lambdas, as in a path.
    let starts = start_partitions(data, k, &opts.fit, seed)?;
    for (scheme, table) in schemes.iter().zip(tables) {
        let scores: Vec<Option<f64>> = table.iter().map(|d| d.instability).collect();
        let eligible: Vec<Option<f64>> = table
            .iter()
            .map(|d| if d.degenerate { None } else { d.instability })
            .collect();
        let chosen = argmin_prefer_larger_lambda(grid, &eligible).ok_or_else(|| {
            Error::Selection(format!(
                "{scheme:?}: no lambda produced a non-degenerate clustering on the bootstrap samples"
            ))
        })?;
        let spec = PenaltySpec::new(family, grid[chosen])?.adaptive(adaptive);
        let chosen_fit = fit_from_starts(data, &spec, &starts, &opts.fit.lloyd)?;
        reports.push(SelectionReport {
            method: scheme.method(),
            grid: grid.to_vec(),
            scores,
            diagnostics: Diagnostics::Stability { lambdas: table },
            chosen_index: chosen,
            chosen_lambda: grid[chosen],
            chosen_fit,
        });
    }
    Ok(reports)
}

pub fn select_stability(
    data: &DataMatrix,
    k: usize,
    family: PenaltyFamily,
    adaptive: bool,
    grid: &[f64],
    scheme: StabilityScheme,
    opts: &StabilityOptions,
    seed: u64,
) -> Result<SelectionReport> {
    Ok(select_stability_all(data, k, family, adaptive, grid, &[scheme], opts, seed)?
        .pop()
        .expect("one scheme"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize;

    fn part(l: &[usize]) -> Partition {
        Partition::from_labels(l).unwrap()
    }

    fn brute_force_distance(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let mut disagree = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += 1.0;
                if (a[i] == a[j]) != (b[i] == b[j]) {
                    disagree += 1.0;
                }
            }
        }
        disagree / total
    }

    #[test]
    fn distance_examples() {
        let a = part(&[1, 1, 2, 2]);
        assert_eq!(clustering_distance(&a, &a).unwrap(), 0.0);
        let b = part(&[1, 2, 1, 2]);
        assert!((clustering_distance(&a, &b).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(clustering_distance(&a, &part(&[7, 7, 3, 3])).unwrap(), 0.0);
        assert!(clustering_distance(&a, &part(&[1, 2])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distance_is_a_pseudometric(
                a in proptest::collection::vec(0usize..3, 10),
                b in proptest::collection::vec(0usize..3, 10),
                c in proptest::collection::vec(0usize..3, 10),
            ) {
                let (pa, pb, pc) = (part(&a), part(&b), part(&c));
                let ab = clustering_distance(&pa, &pb).unwrap();
                let ba = clustering_distance(&pb, &pa).unwrap();
                let bc = clustering_distance(&pb, &pc).unwrap();
                let ac = clustering_distance(&pa, &pc).unwrap();
                prop_assert!((ab - brute_force_distance(&a, &b)).abs() < 1e-12);
                prop_assert_eq!(clustering_distance(&pa, &pa).unwrap(), 0.0);
                prop_assert!((ab - ba).abs() < 1e-15);
                prop_assert!(ac <= ab + bc + 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
            }
        }
    }

    fn blobs() -> DataMatrix {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let g = if i % 2 == 0 { -4.0 } else { 4.0 };
                vec![g + 0.05 * (i % 7) as f64, g + 0.1 * ((i * 5) % 11) as f64]
            })
            .collect();
        standardize(&DataMatrix::from_rows(&rows).unwrap()).unwrap().data
    }

    fn quick() -> StabilityOptions {
        StabilityOptions {
            replications: 20,
            fit: FitOptions {
                nstart: 2,
                init_restarts: 3,
                ..FitOptions::default()
            },
        }
    }

    #[test]
    fn separated_blobs_are_stable() {
        let data = blobs();
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, 0.0).unwrap();
        for scheme in StabilityScheme::ALL {
            let s = instability(&data, 2, &spec, scheme, &quick(), 9).unwrap();
            assert!(s < 0.01, "{scheme:?}: {s}");
        }
    }

    #[test]
    fn collapsed_models_are_degenerate() {
        let data = blobs();
        let t = stability_table(
            &data,
            2,
            PenaltyFamily::HardThreshold,
            false,
            &[5.0],
            &[StabilityScheme::Stab1],
            &quick(),
            1,
        )
        .unwrap();
        assert_eq!(t[0][0].instability, Some(0.0));
        assert!(t[0][0].degenerate);
    }

    #[test]
    fn single_replication_is_reproducible() {
        let data = blobs();
        let spec = PenaltySpec::new(PenaltyFamily::Lasso, 0.05).unwrap();
        let opts = StabilityOptions {
            replications: 1,
            ..quick()
        };
        let a = instability(&data, 3, &spec, StabilityScheme::Stab3, &opts, 4).unwrap();
        let b = instability(&data, 3, &spec, StabilityScheme::Stab3, &opts, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_lambda_grid_is_selected() {
        let data = blobs();
        let r = select_stability(
            &data,
            2,
            PenaltyFamily::HardThreshold,
            false,
            &[0.1],
            StabilityScheme::Stab2,
            &quick(),
            2,
        )
        .unwrap();
        assert_eq!(r.chosen_lambda, 0.1);
        assert_eq!(r.method, SelectionMethod::Stab2);
    }
}
