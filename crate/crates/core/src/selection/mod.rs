//! Ranking, subset choice, and the exhaustive least-squares oracle.
//!
//! `exhaustive_search` scores every candidate subset up to a size cap with
//! the same deterministic train/validation split, keeps the best subset
//! per size, and picks the smallest size whose best MSE comes within 5%
//! of the overall best. The per-subset model is OLS over the subset plus
//! all its pairwise products (squares included, see `lstsq`).

mod lstsq;

use std::collections::BTreeSet;

use itertools::Itertools;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::linalg;
use crate::mask::FeatureMask;

/// Relative tolerance of the "smallest size within reach of the best"
/// rule; the tiny absolute slack keeps exact-fit (MSE 0) cases stable.
const WITHIN_BEST_FACTOR: f64 = 1.05;
const WITHIN_BEST_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedVariable {
    pub name: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Mask,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreement {
    pub jaccard: f64,
    pub identical: bool,
}

/// The run summary serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub ranking: Vec<RankedVariable>,
    pub chosen: Vec<String>,
    pub method: SelectionMethod,
    pub training_seconds: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_agreement: Option<OracleAgreement>,
    /// Digest of the resolved run configuration (reproducibility aid).
    pub config_digest: String,
    /// Digest of the input data the run consumed.
    pub input_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub subset: Vec<String>,
    pub validation_mse: f64,
}

/// Sort mask entries by score descending, ties by name ascending;
/// ranks are 1-based.
pub fn rank_variables(mask: &FeatureMask) -> Vec<RankedVariable> {
    let mut order: Vec<usize> = (0..mask.len()).collect();
    order.sort_by(|&a, &b| {
        mask.m[b]
            .partial_cmp(&mask.m[a])
            .expect("finite scores")
            .then_with(|| mask.variable_names[a].cmp(&mask.variable_names[b]))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(i, idx)| RankedVariable {
            name: mask.variable_names[idx].clone(),
            score: mask.m[idx],
            rank: i + 1,
        })
        .collect()
}

/// Top-`k` names, or the automatic elbow cut when `k` is `None`: the cut
/// falls before the largest ratio of consecutive scores (floored at
/// 1e-12), keeping everything above the sharpest drop.
pub fn choose_subset(ranking: &[RankedVariable], k: Option<usize>) -> Result<Vec<String>> {
    if ranking.is_empty() {
        return Err(Error::InvalidConfig("empty ranking".into()));
    }
    let take = match k {
        Some(0) => {
            return Err(Error::InvalidConfig("subset size must be positive".into()));
        }
        Some(k) if k > ranking.len() => {
            return Err(Error::InvalidConfig(format!(
                "subset size {k} exceeds the {} ranked variables",
                ranking.len()
            )));
        }
        Some(k) => k,
        None => {
            let mut best_ratio = f64::NEG_INFINITY;
            let mut cut = ranking.len();
            for i in 0..ranking.len() - 1 {
                let hi = ranking[i].score.max(1e-12);
                let lo = ranking[i + 1].score.max(1e-12);
                let ratio = hi / lo;
                if ratio > best_ratio {
                    best_ratio = ratio;
                    cut = i + 1;
                }
            }
            cut
        }
    };
    Ok(ranking[..take].iter().map(|r| r.name.clone()).collect())
}

/// Set overlap between a mask-chosen and an oracle-chosen subset.
pub fn agreement(mask_chosen: &[String], oracle_chosen: &[String]) -> OracleAgreement {
    let a: BTreeSet<&String> = mask_chosen.iter().collect();
    let b: BTreeSet<&String> = oracle_chosen.iter().collect();
    let intersection = a.intersection(&b).count();
    let union = a.union(&b).count();
    let jaccard = if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    };
    OracleAgreement {
        jaccard,
        identical: a == b,
    }
}

/// Deterministic 80/20 row split: seeded shuffle, first fifth becomes
/// validation. Returns (train, validation).
pub fn split_for_scoring(n: usize, split_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let n_val = n / 5;
    (rows[n_val..].to_vec(), rows[..n_val].to_vec())
}

fn resolve_columns(data: &EncodedMatrix, subset: &[String]) -> Result<Vec<usize>> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("empty subset".into()));
    }
    let mut seen = BTreeSet::new();
    let mut cols = Vec::with_capacity(subset.len());
    for name in subset {
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateColumn { name: name.clone() });
        }
        let idx = data
            .candidate_index(name)
            .ok_or_else(|| Error::UnknownColumn { name: name.clone() })?;
        cols.push(idx);
    }
    Ok(cols)
}

fn mse_of(pred: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let mut sum = 0.0;
    ndarray::Zip::from(pred).and(truth).for_each(|&p, &t| {
        let d = p - t;
        sum += d * d;
    });
    sum / (pred.nrows() * pred.ncols()) as f64
}

/// Score one subset: OLS with interactions on the 80% training rows,
/// MSE on the held-out 20%.
pub fn evaluate_subset(
    data: &EncodedMatrix,
    subset: &[String],
    split_seed: u64,
) -> Result<SubsetScore> {
    let cols = resolve_columns(data, subset)?;
    let n = data.n_rows();
    if n < 5 {
        return Err(Error::InvalidConfig(format!(
            "need at least 5 rows for an 80/20 split, got {n}"
        )));
    }
    let (train, val) = split_for_scoring(n, split_seed);
    let design_train = lstsq::subset_design(data.x.view(), &train, &cols);
    let y_train = data.y.select(Axis(0), &train);
    let gram = linalg::matmul_tn(design_train.view(), design_train.view());
    let rhs = linalg::matmul_tn(design_train.view(), y_train.view());
    let beta = lstsq::solve_normal_equations(&gram, &rhs);
    let design_val = lstsq::subset_design(data.x.view(), &val, &cols);
    let pred = linalg::matmul(design_val.view(), beta.view());
    let y_val = data.y.select(Axis(0), &val);
    Ok(SubsetScore {
        subset: subset.to_vec(),
        validation_mse: mse_of(&pred, &y_val),
    })
}

/// Candidate ranking by single-variable fit quality; score is
/// `1/(1 + validation MSE)` so better fits rank higher.
pub fn univariate_ranking(data: &EncodedMatrix, split_seed: u64) -> Result<Vec<RankedVariable>> {
    let mut entries: Vec<(String, f64)> = data
        .candidate_names
        .iter()
        .map(|name| {
            let score = evaluate_subset(data, std::slice::from_ref(name), split_seed)?;
            Ok((name.clone(), 1.0 / (1.0 + score.validation_mse)))
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, (name, score))| RankedVariable {
            name,
            score,
            rank: i + 1,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveOptions {
    pub split_seed: u64,
    pub workers: usize,
    /// Hard cap on evaluated subsets; exceeding it stops the search with
    /// partial results and sets the flag instead of erroring.
    pub max_evaluations: Option<u64>,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        ExhaustiveOptions {
            split_seed: 0,
            workers: 1,
            max_evaluations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    /// Best subset per size, ascending size, only sizes actually reached.
    pub best_per_size: Vec<SubsetScore>,
    pub chosen: Vec<String>,
    pub evaluated: u64,
    pub planned: u64,
    pub budget_exceeded: bool,
}

fn subset_count(d: usize, max_size: usize) -> Option<u64> {
    let mut total: u64 = 0;
    let mut c: u64 = 1;
    for k in 1..=max_size {
        c = c.checked_mul((d - k + 1) as u64)? / k as u64;
        total = total.checked_add(c)?;
    }
    Some(total)
}

/// Shared per-search state for the fast subset-scoring path: the full
/// interaction design is built once and every subset reuses slices of its
/// Gram matrix, which keeps the per-subset cost at solve + predict.
struct SearchContext {
    d: usize,
    gram: Array2<f64>,
    xty: Array2<f64>,
    design_val: Array2<f64>,
    y_val: Array2<f64>,
}

impl SearchContext {
    fn build(data: &EncodedMatrix, split_seed: u64) -> Result<SearchContext> {
        let n = data.n_rows();
        if n < 5 {
            return Err(Error::InvalidConfig(format!(
                "need at least 5 rows for an 80/20 split, got {n}"
            )));
        }
        let (train, val) = split_for_scoring(n, split_seed);
        let x_train = data.x.select(Axis(0), &train);
        let y_train = data.y.select(Axis(0), &train);
        let design_train = lstsq::full_design(x_train.view());
        let gram = linalg::matmul_tn(design_train.view(), design_train.view());
        let xty = linalg::matmul_tn(design_train.view(), y_train.view());
        let x_val = data.x.select(Axis(0), &val);
        Ok(SearchContext {
            d: data.n_candidates(),
            gram,
            xty,
            design_val: lstsq::full_design(x_val.view()),
            y_val: data.y.select(Axis(0), &val),
        })
    }

    /// Validation MSE of one subset, numerically identical to
    /// [`evaluate_subset`] up to summation order.
    fn score(&self, cols: &[usize]) -> f64 {
        let idx = lstsq::subset_design_columns(self.d, cols);
        let p = idx.len();
        let q = self.xty.ncols();
        let gram_sub = Array2::from_shape_fn((p, p), |(a, b)| self.gram[[idx[a], idx[b]]]);
        let rhs = Array2::from_shape_fn((p, q), |(a, t)| self.xty[[idx[a], t]]);
        let beta = lstsq::solve_normal_equations(&gram_sub, &rhs);
        let n_val = self.design_val.nrows();
        let mut sum = 0.0;
        for r in 0..n_val {
            let row = self.design_val.row(r);
            for t in 0..q {
                let mut pred = 0.0;
                for (a, &col) in idx.iter().enumerate() {
                    pred += row[col] * beta[[a, t]];
                }
                let d = pred - self.y_val[[r, t]];
                sum += d * d;
            }
        }
        sum / (n_val * q) as f64
    }
}

/// Try every subset of size `1..=max_subset_size`; see module docs for the
/// size-choice rule. With `workers > 1` subsets are scored in parallel;
/// scoring is pure, so results are identical under any scheduling.
pub fn exhaustive_search(
    data: &EncodedMatrix,
    max_subset_size: usize,
    options: &ExhaustiveOptions,
) -> Result<ExhaustiveResult> {
    let d = data.n_candidates();
    if max_subset_size == 0 {
        return Err(Error::InvalidConfig(
            "max_subset_size must be positive".into(),
        ));
    }
    if max_subset_size > d {
        return Err(Error::InvalidConfig(format!(
            "max_subset_size {max_subset_size} exceeds the {d} candidate variables"
        )));
    }
    let planned = subset_count(d, max_subset_size).ok_or_else(|| Error::InvalidConfig(format!(
        "subset count for d={d}, max={max_subset_size} overflows a 64-bit counter"
    )))?;
    let context = SearchContext::build(data, options.split_seed)?;
    let pool = if options.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?,
        )
    } else {
        None
    };

    let budget = options.max_evaluations.unwrap_or(u64::MAX);
    let mut evaluated: u64 = 0;
    let mut budget_exceeded = false;
    let mut best_per_size: Vec<SubsetScore> = Vec::with_capacity(max_subset_size);

    for k in 1..=max_subset_size {
        if evaluated >= budget {
            budget_exceeded = true;
            break;
        }
        let mut combos: Vec<Vec<usize>> = (0..d).combinations(k).collect();
        let allowance = budget - evaluated;
        if (combos.len() as u64) > allowance {
            combos.truncate(allowance as usize);
            budget_exceeded = true;
        }
        let scores: Vec<f64> = match &pool {
            Some(pool) => pool.install(|| {
                combos
                    .par_iter()
                    .map(|cols| context.score(cols))
                    .collect()
            }),
            None => combos.iter().map(|cols| context.score(cols)).collect(),
        };
        evaluated += combos.len() as u64;
        // First strict minimum wins: enumeration is lexicographic, so ties
        // resolve to the lexicographically smallest subset.
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = i;
            }
        }
        best_per_size.push(SubsetScore {
            subset: combos[best]
                .iter()
                .map(|&c| data.candidate_names[c].clone())
                .collect(),
            validation_mse: scores[best],
        });
        if budget_exceeded {
            break;
        }
    }

    let overall = best_per_size
        .iter()
        .map(|s| s.validation_mse)
        .fold(f64::INFINITY, f64::min);
    let chosen = best_per_size
        .iter()
        .find(|s| s.validation_mse <= WITHIN_BEST_FACTOR * overall + WITHIN_BEST_SLACK)
        .map(|s| s.subset.clone())
        .unwrap_or_default();

    Ok(ExhaustiveResult {
        best_per_size,
        chosen,
        evaluated,
        planned,
        budget_exceeded,
    })
}
