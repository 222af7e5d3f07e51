//! Choosing lambda along a regularization path.
//!
//! Three families of selectors are provided:
//!
//! - information criteria ([`aic`], [`bic`]): `n * WCSS + c * K * q`, with the WCSS
//!   taken over all variables using the fitted (sparse) centers and `q` the
//!   number of active variables;
//! - the gap method ([`gap_deltas`], [`select_gap`]): compares the WCSS increase
//!   caused by variables entering the active set with the increase caused by
//!   randomly permuted copies of the same variables;
//! - bootstrap instability ([`instability`], [`select_stability`]).

mod gap;
mod stability;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::wcss;
use crate::solver::{FitResult, PathResult};

pub use gap::{gap_deltas, gap_step, select_gap, GapOptions, GapStep, GapStepRecord, GapVariant};
pub use stability::{
    clustering_distance, instability, select_stability, select_stability_all, stability_table,
    StabilityDiagnostic, StabilityOptions, StabilityScheme,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Aic,
    Bic,
    Gap1,
    Gap2,
    Stab1,
    Stab2,
    Stab3,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 7] = [
        SelectionMethod::Aic,
        SelectionMethod::Bic,
        SelectionMethod::Gap1,
        SelectionMethod::Gap2,
        SelectionMethod::Stab1,
        SelectionMethod::Stab2,
        SelectionMethod::Stab3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Aic => "aic",
            SelectionMethod::Bic => "bic",
            SelectionMethod::Gap1 => "gap1",
            SelectionMethod::Gap2 => "gap2",
            SelectionMethod::Stab1 => "stab1",
            SelectionMethod::Stab2 => "stab2",
            SelectionMethod::Stab3 => "stab3",
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown selection method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationCriterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InformationOptions {
    /// Use the raw sum of squares `n * wcss`; otherwise the `(1/n)` form.
    pub raw_scale: bool,
}

impl Default for InformationOptions {
    fn default() -> Self {
        Self { raw_scale: true }
    }
}

/// Per-lambda auxiliaries of a selector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Diagnostics {
    Information {
        wcss_all: Vec<f64>,
        active_sizes: Vec<usize>,
    },
    Gap {
        steps: Vec<GapStepRecord>,
    },
    Stability {
        lambdas: Vec<StabilityDiagnostic>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub method: SelectionMethod,
    pub grid: Vec<f64>,
    /// Criterion value per grid point; `None` where it is undefined.
    pub scores: Vec<Option<f64>>,
    pub diagnostics: Diagnostics,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    pub chosen_fit: FitResult,
}

/// JSON form of a [`SelectionReport`]. Variable indices and labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub method: SelectionMethod,
    pub grid: Vec<f64>,
    pub scores: Vec<Option<f64>>,
    pub diagnostics: Diagnostics,
    pub chosen_lambda: f64,
    pub chosen_active_set: Vec<usize>,
    pub chosen_assignment: Vec<usize>,
}

impl SelectionReport {
    pub fn to_record(&self) -> SelectionRecord {
        SelectionRecord {
            method: self.method,
            grid: self.grid.clone(),
            scores: self.scores.clone(),
            diagnostics: self.diagnostics.clone(),
            chosen_lambda: self.chosen_lambda,
            chosen_active_set: self.chosen_fit.active_set.iter().map(|j| j + 1).collect(),
            chosen_assignment: self.chosen_fit.partition.to_one_based(),
        }
    }
}

/// Index of the smallest score; ties go to the larger lambda.
pub(crate) fn argmin_prefer_larger_lambda(grid: &[f64], scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = *s else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let bs = scores[b].expect("scored");
                if s < bs || (s == bs && grid[i] > grid[b]) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// AIC/BIC-type selection: `n * wcss_all + coef * K * q`.
pub fn select_information(
    path: &PathResult,
    data: &DataMatrix,
    criterion: InformationCriterion,
) -> Result<SelectionReport> {
    select_information_with(path, data, criterion, &InformationOptions::default())
}

pub fn select_information_with(
    path: &PathResult,
    data: &DataMatrix,
    criterion: InformationCriterion,
    opts: &InformationOptions,
) -> Result<SelectionReport> {
    if path.fits.is_empty() {
        return Err(Error::Selection("empty path".into()));
    }
    let n = data.n_obs() as f64;
    let coef = match criterion {
        InformationCriterion::Aic => 2.0,
        InformationCriterion::Bic => n.ln(),
    };
    let wcss_all = path
        .fits
        .iter()
        .map(|f| wcss(data, &f.centers, &f.partition))
        .collect::<Result<Vec<_>>>()?;
    let active_sizes: Vec<usize> = path.fits.iter().map(|f| f.active_set.len()).collect();
    let k = path.k as f64;
    let scale = if opts.raw_scale { n } else { 1.0 };
    let scores: Vec<Option<f64>> = wcss_all
        .iter()
        .zip(&active_sizes)
        .map(|(w, &q)| Some(scale * w + coef * k * q as f64))
        .collect();
    let chosen = argmin_prefer_larger_lambda(&path.grid, &scores).expect("non-empty");
    Ok(SelectionReport {
        method: match criterion {
            InformationCriterion::Aic => SelectionMethod::Aic,
            InformationCriterion::Bic => SelectionMethod::Bic,
        },
        grid: path.grid.clone(),
        scores,
        diagnostics: Diagnostics::Information {
            wcss_all,
            active_sizes,
        },
        chosen_index: chosen,
        chosen_lambda: path.grid[chosen],
        chosen_fit: path.fits[chosen].clone(),
    })
}

pub fn aic(path: &PathResult, data: &DataMatrix) -> Result<SelectionReport> {
    select_information(path, data, InformationCriterion::Aic)
}

pub fn bic(path: &PathResult, data: &DataMatrix) -> Result<SelectionReport> {
    select_information(path, data, InformationCriterion::Bic)
}
