//! Synthetic benchmark data: a block-mean Gaussian mixture on 50 informative
//! variables followed by independent standard-normal noise variables.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::Partition;
use crate::rng::stream_rng;

/// Number of informative variables in every simulated dataset.
pub const INFORMATIVE_VARS: usize = 50;

const LABEL_STREAM: u64 = 0;
const SIGNAL_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub mu: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.k, 2 | 4 | 8) {
            return Err(Error::Config(format!(
                "no mean template for K = {}; supported values are 2, 4 and 8",
                self.k
            )));
        }
        if self.p < INFORMATIVE_VARS {
            return Err(Error::Config(format!(
                "p = {} but the design needs at least {INFORMATIVE_VARS} variables",
                self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Data together with the generating cluster labels (`1..=K`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    pub k: usize,
}

impl LabeledDataset {
    pub fn truth(&self) -> Partition {
        Partition::from_one_based(&self.labels, self.k).expect("labels are in range")
    }
}

/// Signs and lengths of the constant blocks making up the informative mean
/// of cluster `label` (1-based).
fn blocks(k: usize, label: usize) -> Vec<(f64, usize)> {
    match (k, label) {
        (2, 1) => vec![(1.0, 50)],
        (2, 2) => vec![(-1.0, 50)],
        (4, 1) => vec![(-1.0, 25), (1.0, 25)],
        (4, 2) => vec![(1.0, 50)],
        (4, 3) => vec![(1.0, 25), (-1.0, 25)],
        (4, 4) => vec![(-1.0, 50)],
        (8, l @ 1..=8) => {
            // Labels 1..8 enumerate the sign patterns of three blocks, with the
            // first block varying slowest and the second fastest.
            let b = l - 1;
            let first = if b & 4 == 0 { 1.0 } else { -1.0 };
            let second = if b & 1 == 0 { 1.0 } else { -1.0 };
            let third = if b & 2 == 0 { 1.0 } else { -1.0 };
            vec![(first, 17), (second, 17), (third, 16)]
        }
        _ => unreachable!("label {label} out of range for K = {k}"),
    }
}

/// The informative mean vector (length 50) of cluster `label` (1-based).
pub fn mean_template(k: usize, mu: f64, label: usize) -> Result<Vec<f64>> {
    if !matches!(k, 2 | 4 | 8) {
        return Err(Error::Config(format!("no mean template for K = {k}")));
    }
    if label == 0 || label > k {
        return Err(Error::Config(format!("label {label} out of range 1..={k}")));
    }
    Ok(blocks(k, label)
        .into_iter()
        .flat_map(|(sign, len)| std::iter::repeat_n(sign * mu, len))
        .collect())
}

/// Draw a dataset. Labels are uniform on `1..=K`; labels, informative noise and
/// pure-noise columns come from three independent streams of the master seed.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let SimConfig { n, p, k, mu, seed } = *cfg;

    let mut label_rng = stream_rng(seed, &[LABEL_STREAM]);
    let labels: Vec<usize> = (0..n).map(|_| label_rng.random_range(1..=k)).collect();
    let templates: Vec<Vec<f64>> = (1..=k)
        .map(|l| mean_template(k, mu, l))
        .collect::<Result<_>>()?;

    let mut signal_rng = stream_rng(seed, &[SIGNAL_STREAM]);
    let mut noise_rng = stream_rng(seed, &[NOISE_STREAM]);
    let mut values = Array2::<f64>::zeros((n, p));
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let mean = &templates[labels[i] - 1];
        for j in 0..INFORMATIVE_VARS {
            let z: f64 = signal_rng.sample(StandardNormal);
            row[j] = mean[j] + z;
        }
        for j in INFORMATIVE_VARS..p {
            row[j] = noise_rng.sample(StandardNormal);
        }
    }
    Ok(LabeledDataset {
        data: DataMatrix::new(values)?,
        labels,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, p: usize, k: usize, mu: f64, seed: u64) -> SimConfig {
        SimConfig { n, p, k, mu, seed }
    }

    #[test]
    fn templates_match_the_block_design() {
        let mu = 0.5;
        let t = mean_template(4, mu, 1).unwrap();
        assert_eq!(&t[..25], vec![-mu; 25].as_slice());
        assert_eq!(&t[25..], vec![mu; 25].as_slice());
        assert_eq!(mean_template(4, mu, 2).unwrap(), vec![mu; 50]);
        let t3 = mean_template(4, mu, 3).unwrap();
        assert_eq!((t3[0], t3[49]), (mu, -mu));
        assert_eq!(mean_template(4, mu, 4).unwrap(), vec![-mu; 50]);
        assert_eq!(mean_template(2, 0.8, 1).unwrap(), vec![0.8; 50]);
        assert_eq!(mean_template(2, 0.8, 2).unwrap(), vec![-0.8; 50]);
    }

    #[test]
    fn k8_templates_enumerate_all_sign_patterns() {
        let expected = [
            (1.0, 1.0, 1.0),
            (1.0, -1.0, 1.0),
            (1.0, 1.0, -1.0),
            (1.0, -1.0, -1.0),
            (-1.0, 1.0, 1.0),
            (-1.0, -1.0, 1.0),
            (-1.0, 1.0, -1.0),
            (-1.0, -1.0, -1.0),
        ];
        for (l, (a, b, c)) in expected.iter().enumerate() {
            let t = mean_template(8, 1.0, l + 1).unwrap();
            assert_eq!(t.len(), 50);
            assert!(t[..17].iter().all(|v| v == a));
            assert!(t[17..34].iter().all(|v| v == b));
            assert!(t[34..].iter().all(|v| v == c));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(simulate_dataset(&cfg(10, 50, 3, 1.0, 0)), Err(Error::Config(_))));
        assert!(matches!(simulate_dataset(&cfg(10, 49, 2, 1.0, 0)), Err(Error::Config(_))));
        assert!(mean_template(4, 1.0, 5).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_dataset(&cfg(40, 60, 4, 0.8, 11)).unwrap();
        let b = simulate_dataset(&cfg(40, 60, 4, 0.8, 11)).unwrap();
        assert_eq!(a, b);
        let c = simulate_dataset(&cfg(40, 60, 4, 0.8, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cluster_means_within_three_sigma() {
        let d = simulate_dataset(&cfg(80, 50, 2, 0.8, 3)).unwrap();
        let members: Vec<usize> = (0..80).filter(|&i| d.labels[i] == 1).collect();
        let m = members.len() as f64;
        let mean = members.iter().map(|&i| d.data.row(i)[0]).sum::<f64>() / m;
        assert!((mean - 0.8).abs() < 3.0 / m.sqrt(), "mean {mean} over {m} points");
    }

    #[test]
    fn noise_columns_are_centered() {
        let d = simulate_dataset(&cfg(800, 60, 4, 0.8, 5)).unwrap();
        let n = 800.0_f64;
        for j in 50..60 {
            let mean = d.data.column(j).sum() / n;
            assert!(mean.abs() < 3.0 / n.sqrt(), "column {j} mean {mean}");
        }
    }
}
