//! Center penalties and the exact center updates for a fixed partition.
//!
//! With the partition held fixed the penalized objective separates over
//! columns, so every update below works one variable at a time starting from
//! the cluster means `mu*`. Updates write literal zeros, which makes the
//! active set well defined without a tolerance.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::{CenterMatrix, Partition};
use crate::solver::cluster_means;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyFamily {
    /// Number of nonzero center columns (best-subset).
    #[serde(rename = "ht")]
    HardThreshold,
    /// Sum of absolute center entries.
    #[serde(rename = "lasso")]
    Lasso,
    /// Sum of squared center entries.
    #[serde(rename = "ridge")]
    Ridge,
    /// Sum of column Euclidean norms.
    #[serde(rename = "group-lasso")]
    GroupLasso,
}

impl PenaltyFamily {
    pub const ALL: [PenaltyFamily; 4] = [
        PenaltyFamily::HardThreshold,
        PenaltyFamily::Lasso,
        PenaltyFamily::Ridge,
        PenaltyFamily::GroupLasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyFamily::HardThreshold => "ht",
            PenaltyFamily::Lasso => "lasso",
            PenaltyFamily::Ridge => "ridge",
            PenaltyFamily::GroupLasso => "group-lasso",
        }
    }

    /// Penalty contributed by a single center column.
    pub fn column_penalty<I: IntoIterator<Item = f64>>(self, column: I) -> f64 {
        let it = column.into_iter();
        match self {
            PenaltyFamily::HardThreshold => f64::from(u8::from(it.into_iter().any(|v| v != 0.0))),
            PenaltyFamily::Lasso => it.map(f64::abs).sum(),
            PenaltyFamily::Ridge => it.map(|v| v * v).sum(),
            PenaltyFamily::GroupLasso => it.map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ht" | "hard-threshold" | "best-subset" | "l0" => Ok(PenaltyFamily::HardThreshold),
            "lasso" | "l1" => Ok(PenaltyFamily::Lasso),
            "ridge" | "l2" => Ok(PenaltyFamily::Ridge),
            "group-lasso" | "glasso" | "grouplasso" => Ok(PenaltyFamily::GroupLasso),
            other => Err(Error::Config(format!("unknown penalty family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub family: PenaltyFamily,
    pub lambda: f64,
    /// Rescale lambda per column by `1 / ||mu*_j||`.
    pub adaptive: bool,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self {
            family,
            lambda,
            adaptive: false,
        })
    }

    pub fn adaptive(mut self, on: bool) -> Self {
        self.adaptive = on;
        self
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Ok(Self::new(self.family, lambda)?.adaptive(self.adaptive))
    }
}

/// Budget for the group-lasso column solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for UpdateOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

/// Unweighted penalty `pen(mu)`.
pub fn penalty_value(spec: &PenaltySpec, centers: &CenterMatrix) -> f64 {
    centers
        .as_array()
        .columns()
        .into_iter()
        .map(|c| spec.family.column_penalty(c.iter().copied()))
        .sum()
}

fn column_norms_of(a: &Array2<f64>) -> Vec<f64> {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// Means of the nonempty clusters; empty clusters get a zero row.
fn means_allowing_empty(data: &DataMatrix, part: &Partition) -> Array2<f64> {
    let p = data.n_vars();
    let mut sums = Array2::<f64>::zeros((part.k(), p));
    let sizes = part.sizes();
    for (i, &k) in part.labels().iter().enumerate() {
        let mut row = sums.row_mut(k);
        for (s, x) in row.iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for (k, mut row) in sums.rows_mut().into_iter().enumerate() {
        if sizes[k] > 0 {
            row /= sizes[k] as f64;
        }
    }
    sums
}

/// Effective per-column lambda. `INFINITY` marks a column that the adaptive
/// rule forces to zero.
pub(crate) fn penalty_weights(spec: &PenaltySpec, data: &DataMatrix, part: &Partition) -> Result<Vec<f64>> {
    let p = data.n_vars();
    if !spec.adaptive || spec.lambda == 0.0 {
        return Ok(vec![spec.lambda; p]);
    }
    let norms = column_norms_of(&means_allowing_empty(data, part));
    Ok(adaptive_weights(spec.lambda, &norms))
}

fn adaptive_weights(lambda: f64, mean_norms: &[f64]) -> Vec<f64> {
    mean_norms
        .iter()
        .map(|&r| if r > 0.0 { lambda / r } else { f64::INFINITY })
        .collect()
}

/// Minimize the penalized objective over the centers with `part` held fixed.
pub fn update_centers(spec: &PenaltySpec, data: &DataMatrix, part: &Partition) -> Result<CenterMatrix> {
    update_centers_with(spec, data, part, &UpdateOptions::default())
}

pub fn update_centers_with(
    spec: &PenaltySpec,
    data: &DataMatrix,
    part: &Partition,
    opts: &UpdateOptions,
) -> Result<CenterMatrix> {
    let means = cluster_means(data, part)?;
    if spec.lambda == 0.0 {
        return Ok(means);
    }
    let sizes = part.sizes();
    let n = data.n_obs() as f64;
    let mut mu = means.into_array();
    let weights = if spec.adaptive {
        adaptive_weights(spec.lambda, &column_norms_of(&mu))
    } else {
        vec![spec.lambda; data.n_vars()]
    };

    let ht_fit = if spec.family == PenaltyFamily::HardThreshold {
        Some(column_fit_terms(data, part, &mu))
    } else {
        None
    };

    for (j, mut col) in mu.columns_mut().into_iter().enumerate() {
        let lam = weights[j];
        if lam.is_infinite() {
            col.fill(0.0);
            continue;
        }
        match spec.family {
            PenaltyFamily::HardThreshold => {
                let (total, residual) = ht_fit.as_ref().expect("computed above")[j];
                if !(total > residual + n * lam) {
                    col.fill(0.0);
                }
            }
            PenaltyFamily::Lasso => {
                for (k, m) in col.iter_mut().enumerate() {
                    let a = m.abs();
                    let factor = if a > 0.0 {
                        (1.0 - n * lam / (2.0 * sizes[k] as f64 * a)).max(0.0)
                    } else {
                        0.0
                    };
                    *m = if factor > 0.0 { factor * *m } else { 0.0 };
                }
            }
            PenaltyFamily::Ridge => {
                for (k, m) in col.iter_mut().enumerate() {
                    *m /= 1.0 + n * lam / sizes[k] as f64;
                }
            }
            PenaltyFamily::GroupLasso => {
                let star: Vec<f64> = col.to_vec();
                let solved = group_lasso_column(&star, &sizes, n, lam, opts);
                for (m, s) in col.iter_mut().zip(solved) {
                    *m = s;
                }
            }
        }
    }
    CenterMatrix::new(mu)
}

/// Per column: `(||X_j||^2, ||X_j - M mu*_j||^2)`.
fn column_fit_terms(data: &DataMatrix, part: &Partition, means: &Array2<f64>) -> Vec<(f64, f64)> {
    let p = data.n_vars();
    let mut out = vec![(0.0, 0.0); p];
    for (i, &k) in part.labels().iter().enumerate() {
        let m = means.row(k);
        for (j, (&x, o)) in data.row(i).iter().zip(out.iter_mut()).enumerate() {
            let r = x - m[j];
            o.0 += x * x;
            o.1 += r * r;
        }
    }
    out
}

/// Solve one group-lasso column.
///
/// The column objective is `(1/n) sum_k |C_k| (m_k - m*_k)^2 + lambda ||m||`.
/// A nonzero solution has `m_k = m*_k / (1 + c_k / r)` with `c_k = n lambda / (2 |C_k|)`
/// and `r = ||m||`; substituting gives the scalar equation
/// `sum_k (m*_k / (r + c_k))^2 = 1`, which is strictly decreasing in `r`.
/// A positive root exists iff the left side exceeds 1 at `r = 0`; otherwise the
/// column is zero. The root is found by Newton's method from `r = 0`, which
/// increases monotonically to the root for this convex decreasing function.
pub fn group_lasso_column(star: &[f64], sizes: &[usize], n: f64, lambda: f64, opts: &UpdateOptions) -> Vec<f64> {
    let zero = vec![0.0; star.len()];
    if star.iter().all(|&m| m == 0.0) {
        return zero;
    }
    if lambda == 0.0 {
        return star.to_vec();
    }
    let c: Vec<f64> = sizes.iter().map(|&s| n * lambda / (2.0 * s as f64)).collect();
    let secular = |r: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for (m, ck) in star.iter().zip(&c) {
            let d = r + ck;
            f += m * m / (d * d);
            df -= 2.0 * m * m / (d * d * d);
        }
        (f, df)
    };
    let (f0, _) = secular(0.0);
    if f0 <= 0.0 {
        return zero;
    }
    let upper = star.iter().map(|m| m * m).sum::<f64>().sqrt();
    let mut r = 0.0_f64;
    for _ in 0..opts.max_iter {
        let (f, df) = secular(r);
        if f <= 0.0 || df == 0.0 {
            break;
        }
        let next = (r - f / df).min(upper);
        let step = next - r;
        r = next;
        if step.abs() <= opts.tol * r.max(1e-300) {
            break;
        }
    }
    if r < 1e-10 {
        return zero;
    }
    let solved: Vec<f64> = star.iter().zip(&c).map(|(m, ck)| m / (1.0 + ck / r)).collect();

    // Keep the zero column if it is at least as good.
    let cost = |m: &[f64]| -> f64 {
        let fit: f64 = m
            .iter()
            .zip(star)
            .zip(sizes)
            .map(|((a, b), &s)| s as f64 * (a - b) * (a - b))
            .sum::<f64>()
            / n;
        fit + lambda * m.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    if cost(&zero) <= cost(&solved) {
        zero
    } else {
        solved
    }
}
