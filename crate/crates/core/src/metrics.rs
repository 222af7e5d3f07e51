//! Partitions, center matrices, objective values and agreement indices.

use std::collections::HashMap;

use ndarray::Array2;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::penalty::{penalty_weights, PenaltySpec};

/// An assignment of `n` observations to `k` clusters, labels `0..k`.
///
/// Empty clusters are allowed as a transient state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("a partition needs at least one cluster".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Config(format!("label {bad} out of range for K = {k}")));
        }
        Ok(Self { labels, k })
    }

    /// Build from labels in `1..=k`, the convention used in files.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(Error::Config(format!("label {bad} out of range 1..={k}")));
        }
        Self::new(labels.iter().map(|l| l - 1).collect(), k)
    }

    /// Build from arbitrary integer labels, numbering clusters by first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Result<Self> {
        let mut ids = HashMap::new();
        let mapped: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        Self::new(mapped, ids.len().max(1))
    }

    pub fn single(n: usize) -> Self {
        Self { labels: vec![0; n], k: 1 }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn nonempty_clusters(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Relabel clusters in order of first appearance; empty clusters go last.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Partition { labels, k: self.k }
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [usize] {
        &mut self.labels
    }
}

/// A `K x p` matrix whose row `k` is the center of cluster `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterMatrix(Array2<f64>);

impl CenterMatrix {
    pub fn new(mu: Array2<f64>) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("center matrix has non-finite entries".into()));
        }
        Ok(Self(mu.as_standard_layout().into_owned()))
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Self(Array2::zeros((k, p)))
    }

    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let p = self.p();
        &self.0.as_slice().expect("standard layout")[k * p..(k + 1) * p]
    }

    /// Indices of the columns with at least one nonzero entry.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.0.column(j).iter().any(|&v| v != 0.0))
            .collect()
    }
}

fn check_dims(data: &DataMatrix, centers: &CenterMatrix, part: &Partition) -> Result<()> {
    if centers.p() != data.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: data.n_vars(),
            got: centers.p(),
        });
    }
    if part.len() != data.n_obs() {
        return Err(Error::DimensionMismatch {
            expected: data.n_obs(),
            got: part.len(),
        });
    }
    if part.k() != centers.k() {
        return Err(Error::DimensionMismatch {
            expected: centers.k(),
            got: part.k(),
        });
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster sum of squares for the given assignment, divided by `n`.
pub fn wcss(data: &DataMatrix, centers: &CenterMatrix, part: &Partition) -> Result<f64> {
    check_dims(data, centers, part)?;
    let total: f64 = part
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &k)| sq_dist(data.row(i), centers.row(k)))
        .sum();
    Ok(total / data.n_obs() as f64)
}

/// `wcss + lambda * pen(mu)`.
///
/// For adaptive specs the per-column weights are taken from the cluster means
/// of `part`, matching what the center update uses.
pub fn penalized_objective(
    data: &DataMatrix,
    centers: &CenterMatrix,
    part: &Partition,
    spec: &PenaltySpec,
) -> Result<f64> {
    let fit = wcss(data, centers, part)?;
    if spec.lambda == 0.0 {
        return Ok(fit);
    }
    let weights = penalty_weights(spec, data, part)?;
    let pen: f64 = (0..centers.p())
        .map(|j| match weights[j] {
            w if w == 0.0 => 0.0,
            w if w.is_infinite() => {
                if centers.as_array().column(j).iter().any(|&v| v != 0.0) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            w => w * spec.family.column_penalty(centers.as_array().column(j).iter().copied()),
        })
        .sum();
    Ok(fit + pen)
}

fn choose2(m: u64) -> f64 {
    (m as f64) * (m.saturating_sub(1) as f64) / 2.0
}

/// Pair counts `(same in a, same in b, same in both, total pairs)`.
pub(crate) fn pair_counts(a: &[usize], b: &[usize]) -> (f64, f64, f64, f64) {
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut ca: HashMap<usize, u64> = HashMap::new();
    let mut cb: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let same_a = ca.values().map(|&c| choose2(c)).sum();
    let same_b = cb.values().map(|&c| choose2(c)).sum();
    let same_both = joint.values().map(|&c| choose2(c)).sum();
    (same_a, same_b, same_both, choose2(a.len() as u64))
}

/// Hubert-Arabie adjusted Rand index.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyInput("ARI needs at least two observations".into()));
    }
    let (sa, sb, sab, total) = pair_counts(a.labels(), b.labels());
    let expected = sa * sb / total;
    let max_index = 0.5 * (sa + sb);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions are trivial (one cluster, or all singletons) and identical.
        return Ok(1.0);
    }
    Ok((sab - expected) / denom)
}

/// Euclidean norm of every center column.
pub fn center_column_norms(centers: &CenterMatrix) -> Vec<f64> {
    centers
        .as_array()
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::PenaltyFamily;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn part(labels: &[usize]) -> Partition {
        Partition::from_one_based(labels, *labels.iter().max().unwrap()).unwrap()
    }

    fn line(xs: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn wcss_examples() {
        let x = line(&[-1.0, -1.0, 1.0, 1.0]);
        let two = CenterMatrix::new(array![[-1.0], [1.0]]).unwrap();
        assert_eq!(wcss(&x, &two, &part(&[1, 1, 2, 2])).unwrap(), 0.0);
        let one = CenterMatrix::zeros(1, 1);
        assert_eq!(wcss(&x, &one, &Partition::single(4)).unwrap(), 1.0);
        assert!(matches!(
            wcss(&x, &CenterMatrix::zeros(1, 2), &Partition::single(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn objective_adds_penalty() {
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        let p = part(&[1, 2]);
        let mu = CenterMatrix::new(array![[1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let ht = PenaltySpec::new(PenaltyFamily::HardThreshold, 0.3).unwrap();
        let w = wcss(&x, &mu, &p).unwrap();
        assert_abs_diff_eq!(penalized_objective(&x, &mu, &p, &ht).unwrap(), w + 0.6, epsilon = 1e-15);
        let off = PenaltySpec::new(PenaltyFamily::Lasso, 0.0).unwrap();
        assert_eq!(penalized_objective(&x, &mu, &p, &off).unwrap(), w);
        let zero = CenterMatrix::zeros(2, 2);
        let ridge = PenaltySpec::new(PenaltyFamily::Ridge, 5.0).unwrap();
        assert_eq!(
            penalized_objective(&x, &zero, &p, &ridge).unwrap(),
            wcss(&x, &zero, &p).unwrap()
        );
    }

    fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut sa, mut sb, mut sab, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                total += 1.0;
                let ia = a[i] == a[j];
                let ib = b[i] == b[j];
                sa += f64::from(u8::from(ia));
                sb += f64::from(u8::from(ib));
                sab += f64::from(u8::from(ia && ib));
            }
        }
        let e = sa * sb / total;
        (sab - e) / (0.5 * (sa + sb) - e)
    }

    #[test]
    fn ari_examples() {
        let a = part(&[1, 1, 2, 2]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &part(&[2, 2, 1, 1])).unwrap(), 1.0);
        // Pair enumeration: only {1,2},{3,4} together in a, only {1,3},{2,4} in b,
        // so the index is 0 with expected value 2*2/6 -> ARI = -0.5.
        let b = part(&[1, 2, 1, 2]);
        let expected = brute_force_ari(&[1, 1, 2, 2], &[1, 2, 1, 2]);
        assert_abs_diff_eq!(expected, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(adjusted_rand_index(&a, &b).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn ari_errors() {
        assert!(adjusted_rand_index(&part(&[1, 2]), &part(&[1, 2, 1])).is_err());
        assert!(adjusted_rand_index(&part(&[1]), &part(&[1])).is_err());
    }

    #[test]
    fn column_norms() {
        assert_eq!(center_column_norms(&CenterMatrix::zeros(2, 3)), vec![0.0; 3]);
        let c = CenterMatrix::new(array![[3.0, 1.0, -2.0], [4.0, -0.5, 0.25]]).unwrap();
        let norms = center_column_norms(&c);
        assert_eq!(norms[0], 5.0);
        for j in 1..3 {
            let col = c.as_array().column(j);
            let oracle = (col[0] * col[0] + col[1] * col[1]).sqrt();
            assert_abs_diff_eq!(norms[j], oracle, epsilon = 1e-15);
        }
    }

    #[test]
    fn canonical_relabels_by_first_appearance() {
        let p = Partition::new(vec![2, 2, 0, 1], 3).unwrap();
        assert_eq!(p.canonical().labels(), &[0, 0, 1, 2]);
        let q = Partition::new(vec![1, 1, 1], 3).unwrap();
        assert_eq!(q.canonical().labels(), &[0, 0, 0]);
        assert_eq!(q.nonempty_clusters(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
            proptest::collection::vec(0..k, n)
        }

        proptest! {
            #[test]
            fn ari_is_symmetric_and_bounded(a in labels(12, 3), b in labels(12, 4)) {
                let pa = Partition::new(a, 3).unwrap();
                let pb = Partition::new(b, 4).unwrap();
                let ab = adjusted_rand_index(&pa, &pb).unwrap();
                let ba = adjusted_rand_index(&pb, &pa).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ab <= 1.0 + 1e-12);
                let same = pa.canonical().labels() == pb.canonical().labels();
                prop_assert_eq!((ab - 1.0).abs() < 1e-12, same);
            }

            #[test]
            fn ari_matches_pair_enumeration(a in labels(9, 3), b in labels(9, 3)) {
                let pa = Partition::new(a.clone(), 3).unwrap();
                let pb = Partition::new(b.clone(), 3).unwrap();
                let oracle = brute_force_ari(&a, &b);
                if oracle.is_finite() {
                    prop_assert!((adjusted_rand_index(&pa, &pb).unwrap() - oracle).abs() < 1e-12);
                }
            }

            #[test]
            fn wcss_invariant_under_row_permutation(
                xs in proptest::collection::vec(-5.0f64..5.0, 8),
                l in labels(8, 2),
                shift in 0usize..8,
            ) {
                let data = line(&xs);
                let p = Partition::new(l.clone(), 2).unwrap();
                let mu = CenterMatrix::new(array![[0.3], [-1.2]]).unwrap();
                let rot: Vec<usize> = (0..8).map(|i| (i + shift) % 8).collect();
                let data2 = data.select_rows(&rot);
                let p2 = Partition::new(rot.iter().map(|&i| l[i]).collect(), 2).unwrap();
                let w1 = wcss(&data, &mu, &p).unwrap();
                let w2 = wcss(&data2, &mu, &p2).unwrap();
                prop_assert!((w1 - w2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ari_averages_to_zero_under_random_labels() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(2024, &[]);
        let trials = 1000;
        let mut sum = 0.0;
        for _ in 0..trials {
            let a: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
            sum += adjusted_rand_index(&Partition::new(a, 3).unwrap(), &Partition::new(b, 3).unwrap())
                .unwrap();
        }
        assert!((sum / trials as f64).abs() < 0.02);
    }
}
