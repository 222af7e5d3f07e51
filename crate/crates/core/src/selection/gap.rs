//! Permutation-calibrated gap between consecutive active sets.
//!
//! For a step from active set `A` to `B` with entering variables `E` and
//! leaving variables `L`, the observed increase is
//! `delta = (W(B) - W(A)) / |E|`, where `W(S)` is the best (1/n) k-means WCSS
//! found on the variables `S`. Each reference replicate permutes the rows of
//! every entering variable independently and measures the same increase,
//! `(W(A + E*) - W(A)) / |E|`; when the step is not nested the leaving part
//! `(W(B + L*) - W(B)) / |E|` is subtracted. `D = (mean* - delta) / sd*`.
//!
//! All WCSS values come from a shared cache of best-known partitions. Every
//! partition found on one subset is offered to its neighbours until nothing
//! improves, which keeps the nested increases and each reference term in
//! `[0, 1]` per variable.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{Diagnostics, SelectionMethod, SelectionReport};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::metrics::{wcss, Partition};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::rng::{derive_seed, stream_rng};
use crate::solver::{kmeans, lloyd_regularized, means_with_zero_rows, LloydOptions, PathResult};

const OBSERVED_STREAM: u64 = 0x0B5;
const PERMUTE_STREAM: u64 = 0x9E7;
const REFERENCE_STREAM: u64 = 0x4EF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GapVariant {
    /// The step with the largest `D`.
    Gap1,
    /// The largest-lambda step whose `D` is at least `D_max - c * s`, with `s`
    /// the reference spread at the maximizing step.
    Gap2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapOptions {
    /// Reference replicates per step.
    pub permutations: usize,
    /// k-means++ restarts for every subset fit.
    pub restarts: usize,
    /// Upper limit on partition-exchange rounds.
    pub max_rounds: usize,
    /// Tolerance of the `gap2` rule, in units of the reference spread.
    pub c: f64,
    pub lloyd: LloydOptions,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            permutations: 50,
            restarts: 10,
            max_rounds: 20,
            c: 1.0,
            lloyd: LloydOptions::default(),
        }
    }
}

/// One change of active set along a path. Variable indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStep {
    /// Grid index of the larger-lambda end.
    pub from: usize,
    /// Grid index of the smaller-lambda end.
    pub to: usize,
    pub previous: Vec<usize>,
    pub current: Vec<usize>,
    pub entering: Vec<usize>,
    pub leaving: Vec<usize>,
    pub delta: f64,
    pub reference: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// `None` when the reference has zero spread.
    pub d: Option<f64>,
}

impl GapStep {
    pub fn is_nested(&self) -> bool {
        self.leaving.is_empty()
    }

    pub fn to_record(&self, grid: &[f64]) -> GapStepRecord {
        let one = |v: &[usize]| v.iter().map(|j| j + 1).collect();
        GapStepRecord {
            lambda_from: grid.get(self.from).copied().unwrap_or(f64::NAN),
            lambda_to: grid.get(self.to).copied().unwrap_or(f64::NAN),
            current: one(&self.current),
            entering: one(&self.entering),
            leaving: one(&self.leaving),
            delta: self.delta,
            reference_mean: self.mean,
            reference_sd: self.sd,
            d: self.d,
        }
    }
}

/// JSON form of a [`GapStep`], with 1-based variable indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapStepRecord {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub current: Vec<usize>,
    pub entering: Vec<usize>,
    pub leaving: Vec<usize>,
    pub delta: f64,
    pub reference_mean: f64,
    pub reference_sd: f64,
    pub d: Option<f64>,
}

/// `(1/n)` WCSS of `part` with its own cluster means.
fn partition_wcss(data: &DataMatrix, part: &Partition) -> f64 {
    let means = means_with_zero_rows(data, part);
    wcss(data, &means, part).expect("matching dimensions")
}

fn zero_spec() -> PenaltySpec {
    PenaltySpec::new(PenaltyFamily::HardThreshold, 0.0).expect("valid")
}

/// Lloyd from `init`, never returning something worse than `init` itself.
fn polish(data: &DataMatrix, init: &Partition, opts: &LloydOptions) -> Result<(f64, Partition)> {
    let own = partition_wcss(data, init);
    let fit = lloyd_regularized(data, &zero_spec(), init, opts)?;
    Ok(if fit.wcss < own {
        (fit.wcss, fit.partition)
    } else {
        (own, init.clone())
    })
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-12 * old.abs().max(1.0)
}

struct Best {
    wcss: f64,
    partition: Partition,
}

struct SubsetCache<'a> {
    data: &'a DataMatrix,
    k: usize,
    opts: &'a GapOptions,
    seed: u64,
    best: BTreeMap<Vec<usize>, Best>,
}

impl<'a> SubsetCache<'a> {
    fn ensure(&mut self, subset: &[usize]) -> Result<()> {
        if subset.is_empty() || self.best.contains_key(subset) {
            return Ok(());
        }
        let mut streams = vec![OBSERVED_STREAM];
        streams.extend(subset.iter().map(|&j| j as u64));
        let sub = self.data.select_columns(subset);
        let fit = kmeans(&sub, self.k, self.opts.restarts, derive_seed(self.seed, &streams), &self.opts.lloyd)?;
        self.best.insert(
            subset.to_vec(),
            Best {
                wcss: fit.wcss,
                partition: fit.partition,
            },
        );
        Ok(())
    }

    fn wcss(&self, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            0.0
        } else {
            self.best[subset].wcss
        }
    }

    fn partition(&self, subset: &[usize]) -> Option<&Partition> {
        self.best.get(subset).map(|b| &b.partition)
    }

    /// Try `part` on `subset`; true if the cached value improved.
    fn offer(&mut self, subset: &[usize], part: &Partition) -> Result<bool> {
        if subset.is_empty() {
            return Ok(false);
        }
        self.ensure(subset)?;
        let sub = self.data.select_columns(subset);
        let (w, p) = polish(&sub, part, &self.opts.lloyd)?;
        let entry = self.best.get_mut(subset).expect("ensured");
        if improves(w, entry.wcss) {
            entry.wcss = w;
            entry.partition = p;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Enter,
    Leave,
}

/// A base subset plus row-permuted copies of some further variables.
struct Reference {
    step: usize,
    term: Term,
    replicate: usize,
    base: Vec<usize>,
    extra: usize,
    wcss: f64,
    partition: Partition,
}

fn permuted_matrix(data: &DataMatrix, base: &[usize], permuted: &[usize], seed: u64) -> Result<DataMatrix> {
    let n = data.n_obs();
    let mut rng = stream_rng(seed, &[]);
    let mut cols: Vec<usize> = base.to_vec();
    cols.extend_from_slice(permuted);
    let mut values = data.select_columns(&cols).values().clone();
    let mut order: Vec<usize> = (0..n).collect();
    for c in base.len()..cols.len() {
        order.shuffle(&mut rng);
        let col: Vec<f64> = order.iter().map(|&i| values[[i, c]]).collect();
        for (i, v) in col.into_iter().enumerate() {
            values[[i, c]] = v;
        }
    }
    DataMatrix::new(values)
}

struct Transition {
    from: usize,
    to: usize,
    previous: Vec<usize>,
    current: Vec<usize>,
    entering: Vec<usize>,
    leaving: Vec<usize>,
}

impl Transition {
    fn new(from: usize, to: usize, previous: Vec<usize>, current: Vec<usize>) -> Self {
        let entering = current.iter().copied().filter(|j| !previous.contains(j)).collect();
        let leaving = previous.iter().copied().filter(|j| !current.contains(j)).collect();
        Self {
            from,
            to,
            previous,
            current,
            entering,
            leaving,
        }
    }

    fn term(&self, term: Term) -> (&[usize], &[usize]) {
        match term {
            Term::Enter => (&self.previous, &self.entering),
            Term::Leave => (&self.current, &self.leaving),
        }
    }

    fn seed(&self, master: u64, replicate: usize) -> u64 {
        derive_seed(master, &[PERMUTE_STREAM, self.to as u64, replicate as u64])
    }
}

fn build_reference(
    data: &DataMatrix,
    k: usize,
    t: &Transition,
    step: usize,
    term: Term,
    replicate: usize,
    base_partition: Option<&Partition>,
    opts: &GapOptions,
    seed: u64,
) -> Result<Reference> {
    let (base, extra) = t.term(term);
    let x = permuted_matrix(data, base, extra, t.seed(seed, replicate))?;
    let tag = if term == Term::Enter { 0 } else { 1 };
    let s = derive_seed(seed, &[REFERENCE_STREAM, t.to as u64, replicate as u64, tag]);
    let fit = kmeans(&x, k, opts.restarts, s, &opts.lloyd)?;
    let (mut w, mut p) = (fit.wcss, fit.partition);
    if let Some(bp) = base_partition {
        let (w2, p2) = polish(&x, bp, &opts.lloyd)?;
        if improves(w2, w) {
            w = w2;
            p = p2;
        }
    }
    Ok(Reference {
        step,
        term,
        replicate,
        base: base.to_vec(),
        extra: extra.len(),
        wcss: w,
        partition: p,
    })
}

fn compute_steps(
    data: &DataMatrix,
    k: usize,
    transitions: Vec<Transition>,
    hints: &[(Vec<usize>, Partition)],
    opts: &GapOptions,
    seed: u64,
) -> Result<Vec<GapStep>> {
    if opts.permutations < 2 {
        return Err(Error::Config("the gap method needs at least two permutations".into()));
    }
    let mut cache = SubsetCache {
        data,
        k,
        opts,
        seed,
        best: BTreeMap::new(),
    };
    for t in &transitions {
        cache.ensure(&t.previous)?;
        cache.ensure(&t.current)?;
    }
    for (subset, part) in hints {
        if cache.best.contains_key(subset) {
            cache.offer(subset, part)?;
        }
    }

    let mut refs: Vec<Reference> = Vec::new();
    for (si, t) in transitions.iter().enumerate() {
        let mut terms = vec![Term::Enter];
        if !t.leaving.is_empty() {
            terms.push(Term::Leave);
        }
        for term in terms {
            let base_part = cache.partition(t.term(term).0).cloned();
            let built = (0..opts.permutations)
                .into_par_iter()
                .map(|r| build_reference(data, k, t, si, term, r, base_part.as_ref(), opts, seed))
                .collect::<Result<Vec<_>>>()?;
            refs.extend(built);
        }
    }

    // Exchange partitions until no cached or reference value improves.
    let mut settled = false;
    for round in 0..opts.max_rounds {
        let mut changed = false;
        for t in &transitions {
            for (from, to) in [(&t.previous, &t.current), (&t.current, &t.previous)] {
                if let Some(p) = cache.partition(from).cloned() {
                    changed |= cache.offer(to, &p)?;
                }
            }
        }
        let updates = refs
            .par_iter()
            .map(|r| -> Result<Option<(f64, Partition)>> {
                let Some(bp) = cache.partition(&r.base) else { return Ok(None) };
                let t = &transitions[r.step];
                let x = permuted_matrix(data, &r.base, t.term(r.term).1, t.seed(seed, r.replicate))?;
                let (w, p) = polish(&x, bp, &opts.lloyd)?;
                Ok(improves(w, r.wcss).then_some((w, p)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, u) in refs.iter_mut().zip(updates) {
            if let Some((w, p)) = u {
                r.wcss = w;
                r.partition = p;
                changed = true;
            }
        }
        for r in &refs {
            changed |= cache.offer(&r.base, &r.partition)?;
        }
        if !changed {
            log::debug!("gap partition exchange settled after {} rounds", round + 1);
            settled = true;
            break;
        }
    }
    if !settled {
        log::warn!(
            "gap partition exchange did not settle in {} rounds; increments may leave [0, 1]",
            opts.max_rounds
        );
    }

    let mut steps = Vec::with_capacity(transitions.len());
    for (si, t) in transitions.into_iter().enumerate() {
        let ne = t.entering.len() as f64;
        let w_prev = cache.wcss(&t.previous);
        let w_cur = cache.wcss(&t.current);
        let delta = (w_cur - w_prev) / ne;
        let mut reference = vec![0.0; opts.permutations];
        for r in refs.iter().filter(|r| r.step == si) {
            let (base_w, sign) = match r.term {
                Term::Enter => (w_prev, 1.0),
                Term::Leave => (w_cur, -1.0),
            };
            let inc = r.wcss - base_w;
            if inc < -1e-9 || inc > r.extra as f64 + 1e-9 {
                log::warn!("reference increment {inc} outside [0, {}]", r.extra);
            }
            reference[r.replicate] += sign * inc / ne;
        }
        let s = reference.len() as f64;
        let mean = reference.iter().sum::<f64>() / s;
        let sd = (reference.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0)).sqrt();
        let d = (sd > 0.0).then(|| (mean - delta) / sd);
        steps.push(GapStep {
            from: t.from,
            to: t.to,
            previous: t.previous,
            current: t.current,
            entering: t.entering,
            leaving: t.leaving,
            delta,
            reference,
            mean,
            sd,
            d,
        });
    }
    Ok(steps)
}

/// Gap statistics for one change of active set. Sets are 0-based variable
/// indices; `current` must add at least one variable.
pub fn gap_step(
    data: &DataMatrix,
    k: usize,
    previous: &[usize],
    current: &[usize],
    opts: &GapOptions,
    seed: u64,
) -> Result<GapStep> {
    let p = data.n_vars();
    if previous.iter().chain(current).any(|&j| j >= p) {
        return Err(Error::Config(format!("variable index out of range for p = {p}")));
    }
    let mut prev = previous.to_vec();
    prev.sort_unstable();
    prev.dedup();
    let mut cur = current.to_vec();
    cur.sort_unstable();
    cur.dedup();
    let t = Transition::new(0, 1, prev, cur);
    if t.entering.is_empty() {
        return Err(Error::Config("the step adds no variables".into()));
    }
    Ok(compute_steps(data, k, vec![t], &[], opts, seed)?.remove(0))
}

/// Gap statistics for every step of `path` that adds variables.
pub fn gap_deltas(path: &PathResult, data: &DataMatrix, opts: &GapOptions, seed: u64) -> Result<Vec<GapStep>> {
    if path.fits.len() != path.grid.len() {
        return Err(Error::DimensionMismatch {
            expected: path.grid.len(),
            got: path.fits.len(),
        });
    }
    let mut transitions = Vec::new();
    for i in 1..path.fits.len() {
        let (a, b) = (&path.fits[i - 1].active_set, &path.fits[i].active_set);
        if a == b {
            continue;
        }
        let t = Transition::new(i - 1, i, a.clone(), b.clone());
        if t.entering.is_empty() {
            log::debug!("step {} only drops variables, skipped", i);
            continue;
        }
        transitions.push(t);
    }
    let hints: Vec<(Vec<usize>, Partition)> = path
        .fits
        .iter()
        .filter(|f| !f.active_set.is_empty())
        .map(|f| (f.active_set.clone(), f.partition.clone()))
        .collect();
    compute_steps(data, path.k, transitions, &hints, opts, seed)
}

/// Index of the chosen step among those with a defined `D`.
fn choose_step(steps: &[GapStep], variant: GapVariant, c: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in steps.iter().enumerate() {
        let Some(d) = s.d else { continue };
        if best.is_none_or(|b| d > steps[b].d.expect("defined")) {
            best = Some(i);
        }
    }
    let best = best?;
    match variant {
        GapVariant::Gap1 => Some(best),
        GapVariant::Gap2 => {
            let threshold = steps[best].d.expect("defined") - c * steps[best].sd;
            steps.iter().position(|s| s.d.is_some_and(|d| d >= threshold))
        }
    }
}

pub fn select_gap(
    path: &PathResult,
    data: &DataMatrix,
    variant: GapVariant,
    opts: &GapOptions,
    seed: u64,
) -> Result<SelectionReport> {
    if !(opts.c >= 0.0) {
        return Err(Error::Config(format!("gap tolerance c must be non-negative, got {}", opts.c)));
    }
    let steps = gap_deltas(path, data, opts, seed)?;
    let chosen_step = choose_step(&steps, variant, opts.c).ok_or_else(|| {
        Error::Selection("no path step has a defined gap statistic; try aic or bic".into())
    })?;
    let target = &steps[chosen_step].current;
    let chosen = (0..path.fits.len())
        .filter(|&i| &path.fits[i].active_set == target)
        .max_by(|&a, &b| path.grid[a].total_cmp(&path.grid[b]).then(b.cmp(&a)))
        .expect("step endpoints come from the path");
    let mut scores = vec![None; path.grid.len()];
    for s in &steps {
        scores[s.to] = s.d;
    }
    Ok(SelectionReport {
        method: match variant {
            GapVariant::Gap1 => SelectionMethod::Gap1,
            GapVariant::Gap2 => SelectionMethod::Gap2,
        },
        grid: path.grid.clone(),
        scores,
        diagnostics: Diagnostics::Gap {
            steps: steps.iter().map(|s| s.to_record(&path.grid)).collect(),
        },
        chosen_index: chosen,
        chosen_lambda: path.grid[chosen],
        chosen_fit: path.fits[chosen].clone(),
    })
}
