//! Regularized Lloyd iterations, sparse multi-start initialization and
//! regularization paths.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::{penalized_objective, sq_dist, wcss, CenterMatrix, Partition};
use crate::penalty::{update_centers_with, PenaltyFamily, PenaltySpec, UpdateOptions};
use crate::rng::stream_rng;

const SPARSE_STREAM: u64 = 0x5350;
const RANDOM_STREAM: u64 = 0x524E;

/// Percentages of the top-ranked variables used for the sparse starts.
pub const DEFAULT_INIT_PERCENTAGES: [usize; 7] = [1, 2, 5, 10, 25, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydOptions {
    pub max_iter: usize,
    pub update: UpdateOptions,
}

impl Default for LloydOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            update: UpdateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Extra k-means++ starts on top of the sparse starts.
    pub nstart: usize,
    /// Restarts of every classical k-means run inside [`sparse_init`].
    pub init_restarts: usize,
    pub init_percentages: Vec<usize>,
    pub lloyd: LloydOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nstart: 10,
            init_restarts: 10,
            init_percentages: DEFAULT_INIT_PERCENTAGES.to_vec(),
            lloyd: LloydOptions::default(),
        }
    }
}

/// One fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub centers: CenterMatrix,
    pub partition: Partition,
    pub objective: f64,
    /// `(1/n)` WCSS over all variables using the fitted centers.
    pub wcss: f64,
    /// Variables (0-based) whose center column is nonzero.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: f64,
    pub family: PenaltyFamily,
    /// Objective after every half step (center update, then reassignment).
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn to_record(&self) -> FitRecord {
        FitRecord {
            lambda: self.lambda,
            family: self.family,
            objective: self.objective,
            wcss: self.wcss,
            active_set: self.active_set.iter().map(|j| j + 1).collect(),
            centers: self.centers.as_array().rows().into_iter().map(|r| r.to_vec()).collect(),
            assignment: self.partition.to_one_based(),
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

/// JSON form of a [`FitResult`]. Indices and labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub lambda: f64,
    pub family: PenaltyFamily,
    pub objective: f64,
    pub wcss: f64,
    pub active_set: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits over a lambda grid, aligned with `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub grid: Vec<f64>,
    pub family: PenaltyFamily,
    pub adaptive: bool,
    pub k: usize,
    pub fits: Vec<FitResult>,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub family: PenaltyFamily,
    pub adaptive: bool,
    pub k: usize,
    pub data_fingerprint: String,
    pub grid: Vec<f64>,
    pub fits: Vec<FitRecord>,
}

impl PathResult {
    pub fn to_record(&self) -> PathRecord {
        PathRecord {
            family: self.family,
            adaptive: self.adaptive,
            k: self.k,
            data_fingerprint: self.data_fingerprint.clone(),
            grid: self.grid.clone(),
            fits: self.fits.iter().map(FitResult::to_record).collect(),
        }
    }
}

/// Nearest center for every observation; ties go to the lowest cluster index.
///
/// Columns where every center is zero add the same amount to every distance
/// and are skipped.
pub fn assign_points(data: &DataMatrix, centers: &CenterMatrix) -> Result<Partition> {
    if centers.p() != data.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: data.n_vars(),
            got: centers.p(),
        });
    }
    if centers.as_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite center".into()));
    }
    let k = centers.k();
    let active = centers.active_set();
    let compact: Vec<Vec<f64>> = (0..k)
        .map(|c| active.iter().map(|&j| centers.row(c)[j]).collect())
        .collect();
    let labels = (0..data.n_obs())
        .map(|i| {
            let row = data.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in compact.iter().enumerate() {
                let d: f64 = active
                    .iter()
                    .zip(center)
                    .map(|(&j, m)| (row[j] - m) * (row[j] - m))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect();
    Partition::new(labels, k)
}

/// Per-cluster means. Fails if any cluster is empty.
pub fn cluster_means(data: &DataMatrix, part: &Partition) -> Result<CenterMatrix> {
    if part.len() != data.n_obs() {
        return Err(Error::DimensionMismatch {
            expected: data.n_obs(),
            got: part.len(),
        });
    }
    let sizes = part.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(empty));
    }
    let mut sums = ndarray::Array2::<f64>::zeros((part.k(), data.n_vars()));
    for (i, &c) in part.labels().iter().enumerate() {
        let mut row = sums.row_mut(c);
        for (s, x) in row.iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        row /= sizes[c] as f64;
    }
    CenterMatrix::new(sums)
}

/// Move one point into every empty cluster: the points farthest from their
/// current center go first, and no donor cluster is emptied.
fn repair_empty(data: &DataMatrix, centers: &CenterMatrix, part: &mut Partition) -> bool {
    let mut sizes = part.sizes();
    let empties: Vec<usize> = (0..part.k()).filter(|&c| sizes[c] == 0).collect();
    if empties.is_empty() {
        return false;
    }
    let mut order: Vec<(f64, usize)> = part
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &c)| (sq_dist(data.row(i), centers.row(c)), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut candidates = order.into_iter().map(|(_, i)| i);
    let labels = part.labels_mut();
    for e in empties {
        for i in candidates.by_ref() {
            let from = labels[i];
            if sizes[from] > 1 {
                sizes[from] -= 1;
                sizes[e] += 1;
                labels[i] = e;
                break;
            }
        }
    }
    true
}

pub(crate) fn means_with_zero_rows(data: &DataMatrix, part: &Partition) -> CenterMatrix {
    let sizes = part.sizes();
    let mut sums = ndarray::Array2::<f64>::zeros((part.k(), data.n_vars()));
    for (i, &c) in part.labels().iter().enumerate() {
        let mut row = sums.row_mut(c);
        for (s, x) in row.iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for (c, mut row) in sums.rows_mut().into_iter().enumerate() {
        if sizes[c] > 0 {
            row /= sizes[c] as f64;
        }
    }
    CenterMatrix::new(sums).expect("finite data gives finite means")
}

/// Alternate center updates and reassignment until the partition stops changing.
pub fn lloyd_regularized(
    data: &DataMatrix,
    spec: &PenaltySpec,
    init: &Partition,
    opts: &LloydOptions,
) -> Result<FitResult> {
    if init.len() != data.n_obs() {
        return Err(Error::DimensionMismatch {
            expected: data.n_obs(),
            got: init.len(),
        });
    }
    if init.k() > data.n_obs() {
        return Err(Error::Config(format!(
            "K = {} exceeds the number of observations {}",
            init.k(),
            data.n_obs()
        )));
    }
    let mut part = init.clone();
    if part.nonempty_clusters() < part.k() {
        let seeds = means_with_zero_rows(data, &part);
        repair_empty(data, &seeds, &mut part);
    }

    let mut trace = Vec::new();
    let mut centers = update_centers_with(spec, data, &part, &opts.update)?;
    trace.push(penalized_objective(data, &centers, &part, spec)?);
    let mut iterations = 1;
    let mut converged = false;
    loop {
        let mut next = assign_points(data, &centers)?;
        repair_empty(data, &centers, &mut next);
        trace.push(penalized_objective(data, &centers, &next, spec)?);
        if next == part {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        part = next;
        centers = update_centers_with(spec, data, &part, &opts.update)?;
        trace.push(penalized_objective(data, &centers, &part, spec)?);
        iterations += 1;
    }
    if let Some(w) = trace.windows(2).find(|w| w[1] > w[0] + 1e-9 * w[0].abs().max(1.0)) {
        log::debug!("objective increased from {} to {}", w[0], w[1]);
    }

    let objective = penalized_objective(data, &centers, &part, spec)?;
    let fit_wcss = wcss(data, &centers, &part)?;
    Ok(FitResult {
        active_set: centers.active_set(),
        centers,
        partition: part,
        objective,
        wcss: fit_wcss,
        iterations,
        converged,
        lambda: spec.lambda,
        family: spec.family,
        trace,
    })
}

/// k-means++ seeding, returned as the partition induced by the seeds.
pub fn kmeanspp_partition<R: Rng + ?Sized>(data: &DataMatrix, k: usize, rng: &mut R) -> Result<Partition> {
    let n = data.n_obs();
    if k == 0 || k > n {
        return Err(Error::Config(format!("K = {k} must be in 1..={n}")));
    }
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            if d2[pick] == 0.0 {
                // Rounding walked off the end; take the last point with mass.
                pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), data.row(next)));
        }
    }
    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, &s) in chosen.iter().enumerate() {
                let d = sq_dist(data.row(i), data.row(s));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect();
    Partition::new(labels, k)
}

/// Run regularized Lloyd from every start and keep the lowest objective
/// (earliest start on ties).
pub fn fit_from_starts(
    data: &DataMatrix,
    spec: &PenaltySpec,
    starts: &[Partition],
    opts: &LloydOptions,
) -> Result<FitResult> {
    if starts.is_empty() {
        return Err(Error::Config("no starting partitions".into()));
    }
    let fits: Vec<Result<FitResult>> = starts
        .par_iter()
        .map(|s| lloyd_regularized(data, spec, s, opts))
        .collect();
    let mut best: Option<FitResult> = None;
    for f in fits {
        let f = f?;
        if best.as_ref().is_none_or(|b| f.objective < b.objective) {
            best = Some(f);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Classical k-means (no penalty) from `restarts` k-means++ seeds.
pub fn kmeans(data: &DataMatrix, k: usize, restarts: usize, seed: u64, opts: &LloydOptions) -> Result<FitResult> {
    let starts = (0..restarts.max(1) as u64)
        .map(|r| kmeanspp_partition(data, k, &mut stream_rng(seed, &[r])))
        .collect::<Result<Vec<_>>>()?;
    let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, 0.0)?;
    fit_from_starts(data, &spec, &starts, opts)
}

/// Number of top-ranked variables used for a percentage of `p` (at least one).
pub fn subset_size(percent: usize, p: usize) -> usize {
    (percent * p).div_ceil(100).clamp(1, p)
}

/// Candidate starting partitions from classical k-means on the variables with
/// the largest center-column norms.
pub fn sparse_init(data: &DataMatrix, k: usize, opts: &FitOptions, seed: u64) -> Result<Vec<Partition>> {
    let n = data.n_obs();
    if k == 0 || k > n {
        return Err(Error::Config(format!("K = {k} must be in 1..={n}")));
    }
    if k == 1 {
        return Ok(vec![Partition::single(n)]);
    }
    let p = data.n_vars();
    let base = kmeans(data, k, opts.init_restarts, crate::rng::derive_seed(seed, &[SPARSE_STREAM, p as u64]), &opts.lloyd)?;
    let norms = crate::metrics::center_column_norms(&base.centers);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut sizes: Vec<usize> = opts.init_percentages.iter().map(|&pct| subset_size(pct, p)).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let mut out: Vec<Partition> = Vec::new();
    for size in sizes {
        let part = if size == p {
            base.partition.clone()
        } else {
            let sub = data.select_columns(&order[..size]);
            let s = crate::rng::derive_seed(seed, &[SPARSE_STREAM, size as u64]);
            kmeans(&sub, k, opts.init_restarts, s, &opts.lloyd)?.partition
        };
        let part = part.canonical();
        if !out.contains(&part) {
            out.push(part);
        }
    }
    Ok(out)
}

/// Sparse starts followed by `nstart` k-means++ starts.
pub fn start_partitions(data: &DataMatrix, k: usize, opts: &FitOptions, seed: u64) -> Result<Vec<Partition>> {
    let mut starts = sparse_init(data, k, opts, seed)?;
    for r in 0..opts.nstart as u64 {
        starts.push(kmeanspp_partition(data, k, &mut stream_rng(seed, &[RANDOM_STREAM, r]))?);
    }
    Ok(starts)
}

/// Fit one penalized model, keeping the best of all starts.
pub fn fit(data: &DataMatrix, k: usize, spec: &PenaltySpec, opts: &FitOptions, seed: u64) -> Result<FitResult> {
    let starts = start_partitions(data, k, opts, seed)?;
    fit_from_starts(data, spec, &starts, &opts.lloyd)
}

/// `10^(min_exp + (max_exp - min_exp) i / len)` for `i = len-1 .. 0`, descending,
/// optionally followed by 0.
pub fn log_grid(min_exp: f64, max_exp: f64, len: usize, append_zero: bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..len)
        .rev()
        .map(|i| 10f64.powf(min_exp + (max_exp - min_exp) * i as f64 / len as f64))
        .collect();
    if append_zero {
        grid.push(0.0);
    }
    grid
}

/// The 40-point grid `10^(-2 + 4i/40)`, descending, with 0 appended.
pub fn default_grid() -> Vec<f64> {
    log_grid(-2.0, 2.0, 40, true)
}

/// Fit every lambda on `grid` independently from the same set of starts.
///
/// The starts do not depend on lambda, so entry `i` equals
/// `fit(data, k, spec(grid[i]), opts, seed)`.
pub fn lambda_path(
    data: &DataMatrix,
    k: usize,
    family: PenaltyFamily,
    adaptive: bool,
    grid: &[f64],
    opts: &FitOptions,
    seed: u64,
) -> Result<PathResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let specs = grid
        .iter()
        .map(|&l| PenaltySpec::new(family, l).map(|s| s.adaptive(adaptive)))
        .collect::<Result<Vec<_>>>()?;
    let starts = start_partitions(data, k, opts, seed)?;
    path_from_starts(data, k, &specs, &starts, &opts.lloyd)
}

pub(crate) fn path_from_starts(
    data: &DataMatrix,
    k: usize,
    specs: &[PenaltySpec],
    starts: &[Partition],
    opts: &LloydOptions,
) -> Result<PathResult> {
    let fits = specs
        .par_iter()
        .map(|s| fit_from_starts(data, s, starts, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathResult {
        grid: specs.iter().map(|s| s.lambda).collect(),
        family: specs[0].family,
        adaptive: specs[0].adaptive,
        k,
        fits,
        data_fingerprint: data.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::standardize;
    use crate::metrics::adjusted_rand_index;
    use ndarray::array;

    fn line(xs: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn assignment_examples() {
        let c = CenterMatrix::new(array![[-1.0], [1.0]]).unwrap();
        assert_eq!(assign_points(&line(&[-2.0, 2.0]), &c).unwrap().labels(), &[0, 1]);
        assert_eq!(assign_points(&line(&[0.0]), &c).unwrap().labels(), &[0]);
        let one = CenterMatrix::new(array![[0.3]]).unwrap();
        assert_eq!(assign_points(&line(&[-5.0, 1.0, 9.0]), &one).unwrap().labels(), &[0, 0, 0]);
    }

    #[test]
    fn means_examples() {
        let x = line(&[-1.0, -1.0, 1.0, 1.0]);
        let m = cluster_means(&x, &Partition::new(vec![0, 0, 1, 1], 2).unwrap()).unwrap();
        assert_eq!(m.as_array(), &array![[-1.0], [1.0]]);
        let single = cluster_means(&x, &Partition::new(vec![0, 1, 2, 3], 4).unwrap()).unwrap();
        assert_eq!(single.as_array().column(0).to_vec(), vec![-1.0, -1.0, 1.0, 1.0]);
        let z = standardize(&DataMatrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 1.0], vec![4.0, 0.0]]).unwrap())
            .unwrap()
            .data;
        let all = cluster_means(&z, &Partition::single(3)).unwrap();
        assert!(all.as_array().iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(
            cluster_means(&x, &Partition::new(vec![0, 0, 0, 0], 2).unwrap()),
            Err(Error::EmptyCluster(1))
        ));
    }

    #[test]
    fn lloyd_classical_converges_in_one_iteration() {
        let x = line(&[-2.0, -1.9, 1.9, 2.0]);
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, 0.0).unwrap();
        let fit = lloyd_regularized(&x, &spec, &Partition::new(vec![0, 0, 1, 1], 2).unwrap(), &LloydOptions::default())
            .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 1);
        assert_eq!(fit.centers.as_array(), &array![[-1.95], [1.95]]);
    }

    #[test]
    fn lloyd_large_lambda_zeroes_and_keeps_k_clusters() {
        let z = standardize(&line(&[-2.0, -1.5, -1.0, 0.5, 1.0, 3.0])).unwrap().data;
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, 1.0).unwrap();
        let init = Partition::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let fit = lloyd_regularized(&z, &spec, &init, &LloydOptions::default()).unwrap();
        assert!(fit.active_set.is_empty());
        assert_eq!(fit.partition.nonempty_clusters(), 3);
        let w0 = wcss(&z, &CenterMatrix::zeros(3, 1), &fit.partition).unwrap();
        assert!((fit.objective - w0).abs() < 1e-12);
        assert!((fit.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repair_moves_farthest_point() {
        let x = line(&[0.0, 0.1, 0.2, 10.0]);
        let centers = CenterMatrix::new(array![[0.0], [50.0]]).unwrap();
        let mut p = Partition::new(vec![0, 0, 0, 0], 2).unwrap();
        assert!(repair_empty(&x, &centers, &mut p));
        assert_eq!(p.labels(), &[0, 0, 0, 1]);
    }

    #[test]
    fn sparse_init_subset_sizes() {
        let sizes: Vec<usize> = DEFAULT_INIT_PERCENTAGES.iter().map(|&q| subset_size(q, 4)).collect();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 2, 4]);
        let sizes: Vec<usize> = DEFAULT_INIT_PERCENTAGES.iter().map(|&q| subset_size(q, 1000)).collect();
        assert_eq!(sizes, vec![10, 20, 50, 100, 250, 500, 1000]);
    }

    #[test]
    fn sparse_init_single_cluster() {
        let x = line(&[1.0, 2.0, 3.0]);
        let parts = sparse_init(&x, 1, &FitOptions::default(), 0).unwrap();
        assert_eq!(parts, vec![Partition::single(3)]);
        assert!(sparse_init(&x, 4, &FitOptions::default(), 0).is_err());
    }

    #[test]
    fn sparse_init_returns_at_most_three_for_four_variables() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let g = if i < 10 { -1.0 } else { 1.0 };
                vec![g * 2.0 + 0.01 * i as f64, g + 0.3 * ((i * 7) % 5) as f64, 0.1 * ((i * 3) % 7) as f64, g]
            })
            .collect();
        let z = standardize(&DataMatrix::from_rows(&rows).unwrap()).unwrap().data;
        let parts = sparse_init(&z, 2, &FitOptions::default(), 3).unwrap();
        assert!(!parts.is_empty() && parts.len() <= 3);
    }

    #[test]
    fn separable_blobs_are_recovered() {
        let xs: Vec<f64> = (0..10).map(|i| -5.0 + 0.1 * i as f64).chain((0..10).map(|i| 5.0 + 0.1 * i as f64)).collect();
        let z = standardize(&line(&xs)).unwrap().data;
        let spec = PenaltySpec::new(PenaltyFamily::HardThreshold, 0.0).unwrap();
        let fit = fit(&z, 2, &spec, &FitOptions::default(), 1).unwrap();
        let truth = Partition::new((0..20).map(|i| usize::from(i >= 10)).collect(), 2).unwrap();
        assert_eq!(adjusted_rand_index(&fit.partition, &truth).unwrap(), 1.0);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 41);
        assert!((g[0] - 10f64.powf(1.9)).abs() < 1e-12);
        assert!((g[39] - 0.01).abs() < 1e-15);
        assert_eq!(g[40], 0.0);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }
}
