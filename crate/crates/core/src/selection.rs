//! Backward elimination (BAHSIC) and forward selection (FOHSIC).
//!
//! Both produce a full ordering `S†` of the features in which later
//! positions are more relevant. Candidate sets are scored with the unbiased
//! estimator on a kernel rebuilt from a [`FeatureSum`] that is updated in
//! place as features move, so a round costs `O(|S| m^2)`.

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{zscore_normalize, Dataset};
use crate::error::{Error, Result};
use crate::estimator::UnbiasedParts;
use crate::kernels::{
    build_label_kernel, gaussian_kernel_matrix, linear_kernel_matrix, squared_distances,
    DiagonalConvention, FeatureSum, KernelMatrix, LabelKernelSpec, PairTerm, Product,
    SquaredDifference,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Bahsic,
    Fohsic,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Bahsic => "bahsic",
            SelectionMethod::Fohsic => "fohsic",
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bahsic" => Ok(SelectionMethod::Bahsic),
            "fohsic" => Ok(SelectionMethod::Fohsic),
            other => Err(Error::InvalidParameter(format!("unknown selection method `{other}`"))),
        }
    }
}

/// Kernel on the feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKernel {
    /// Gaussian with `sigma = 1 / (2 * dim)` for the dimension of the
    /// feature set being scored.
    GaussianAdaptive,
    GaussianFixed(f64),
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub data_kernel: DataKernel,
    /// `None` picks the natural kernel for the label type.
    pub label_kernel: Option<LabelKernelSpec>,
    /// Fraction of the candidates moved per round, in `(0, 1]`.
    pub elimination_fraction: f64,
    pub target_count: Option<usize>,
    /// z-score every feature once before selection.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: SelectionMethod::Bahsic,
            data_kernel: DataKernel::GaussianAdaptive,
            label_kernel: None,
            elimination_fraction: 0.1,
            target_count: None,
            normalize: true,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn with_method(method: SelectionMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let beta = self.elimination_fraction;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "elimination fraction must lie in (0, 1], got {beta}"
            )));
        }
        if let DataKernel::GaussianFixed(s) = self.data_kernel {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Gaussian parameter must be positive and finite, got {s}"
                )));
            }
        }
        if let Some(t) = self.target_count {
            if t == 0 || t > d {
                return Err(Error::InvalidParameter(format!(
                    "target count {t} outside 1..={d}"
                )));
            }
        }
        Ok(())
    }

    /// Number of features moved in a round with `n` candidates:
    /// `max(1, ceil(beta * n))`, capped at `n`.
    pub fn batch_size(&self, n: usize) -> usize {
        // the small offset keeps e.g. 0.1 * 30 from rounding up to 4
        let raw = (self.elimination_fraction * n as f64 - 1e-9).ceil();
        (raw.max(1.0) as usize).min(n)
    }
}

/// Gaussian parameter for a round that starts with `active_count` features:
/// `1 / (2 * max(1, active_count - 1))`, i.e. `1 / (2 * dim)` for the
/// dimension of the candidate sets `S \ {j}`.
pub fn sigma_policy(active_count: usize) -> f64 {
    sigma_for_dimension(active_count.saturating_sub(1))
}

/// `1 / (2 * max(1, dim))`.
pub fn sigma_for_dimension(dim: usize) -> f64 {
    1.0 / (2.0 * dim.max(1) as f64)
}

/// One elimination or inclusion round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Gaussian parameter, absent for the linear kernel.
    pub sigma: Option<f64>,
    /// Active set at the start of the round, ascending.
    pub active: Vec<usize>,
    /// Features scored this round, ascending.
    pub candidates: Vec<usize>,
    /// `scores[i]` is HSIC of `active \ {candidates[i]}` (backward) or
    /// `active ∪ {candidates[i]}` (forward).
    pub scores: Vec<f64>,
    /// Features moved this round, in the order they were appended.
    pub moved: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FeatureRanking {
    /// `S†`: every feature index once, least relevant first.
    pub ordering: Vec<usize>,
    pub rounds: Vec<RoundRecord>,
    pub config: SelectionConfig,
    /// Parameter of the regression label kernel, when one was built.
    pub label_sigma: Option<f64>,
    /// True when the label kernel fell back to the default parameter.
    pub label_fallback: bool,
}

impl FeatureRanking {
    pub fn n_features(&self) -> usize {
        self.ordering.len()
    }

    /// Features from most to least relevant.
    pub fn most_relevant_first(&self) -> Vec<usize> {
        self.ordering.iter().rev().copied().collect()
    }

    /// 1-based rank of feature `j`; rank 1 is the last element of `S†`.
    pub fn rank_of(&self, j: usize) -> Option<usize> {
        self.ordering
            .iter()
            .position(|&f| f == j)
            .map(|p| self.ordering.len() - p)
    }

    /// The last `t` elements of `S†`, most relevant first.
    pub fn select_top(&self, t: usize) -> Result<Vec<usize>> {
        let d = self.ordering.len();
        if t == 0 || t > d {
            return Err(Error::InvalidParameter(format!("top count {t} outside 1..={d}")));
        }
        Ok(self.ordering[d - t..].iter().rev().copied().collect())
    }

    /// `select_top` at the configured target count, or every feature.
    pub fn selected(&self) -> Vec<usize> {
        match self.config.target_count {
            Some(t) => self.select_top(t).expect("validated target count"),
            None => self.most_relevant_first(),
        }
    }
}

/// Runs the method named in `config`.
pub fn select(data: &Dataset, config: &SelectionConfig) -> Result<FeatureRanking> {
    match config.method {
        SelectionMethod::Bahsic => bahsic(data, config),
        SelectionMethod::Fohsic => fohsic(data, config),
    }
}

/// Backward elimination. `config.method` is ignored.
pub fn bahsic(data: &Dataset, config: &SelectionConfig) -> Result<FeatureRanking> {
    let prep = Prepared::new(data, config)?;
    match config.data_kernel {
        DataKernel::Linear => {
            let sum = FeatureSum::<Product>::new(prep.features.view());
            prep.run_backward(sum, config)
        }
        _ => {
            let sum = FeatureSum::<SquaredDifference>::new(prep.features.view());
            prep.run_backward(sum, config)
        }
    }
}

/// Forward selection. `config.method` is ignored.
pub fn fohsic(data: &Dataset, config: &SelectionConfig) -> Result<FeatureRanking> {
    let prep = Prepared::new(data, config)?;
    match config.data_kernel {
        DataKernel::Linear => {
            let sum = FeatureSum::<Product>::empty(prep.features.view());
            prep.run_forward(sum, config)
        }
        _ => {
            let sum = FeatureSum::<SquaredDifference>::empty(prep.features.view());
            prep.run_forward(sum, config)
        }
    }
}

/// Data kernel over all columns of `x`, with the Gaussian parameter used.
pub fn data_kernel_matrix(
    x: ArrayView2<'_, f64>,
    kernel: DataKernel,
    convention: DiagonalConvention,
) -> Result<(KernelMatrix, Option<f64>)> {
    match kernel {
        DataKernel::Linear => Ok((linear_kernel_matrix(x, convention)?, None)),
        DataKernel::GaussianAdaptive | DataKernel::GaussianFixed(_) => {
            let sigma = match kernel {
                DataKernel::GaussianFixed(s) => s,
                _ => sigma_for_dimension(x.ncols()),
            };
            let k = gaussian_kernel_matrix(squared_distances(x).view(), sigma, convention)?;
            Ok((k, Some(sigma)))
        }
    }
}

/// How a summed pairwise quantity becomes a kernel entry.
#[derive(Debug, Clone, Copy)]
enum Transform {
    Gaussian(f64),
    Identity,
}

impl Transform {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Gaussian(s) => (-s * v.max(0.0)).exp(),
            Transform::Identity => v,
        }
    }

    fn sigma(self) -> Option<f64> {
        match self {
            Transform::Gaussian(s) => Some(s),
            Transform::Identity => None,
        }
    }
}

struct Prepared {
    features: ndarray::Array2<f64>,
    label: KernelMatrix,
    label_rows: Vec<f64>,
    label_sum: f64,
    label_sigma: Option<f64>,
    label_fallback: bool,
}

impl Prepared {
    fn new(data: &Dataset, config: &SelectionConfig) -> Result<Self> {
        let (m, d) = (data.n_samples(), data.n_features());
        if m < 4 {
            return Err(Error::SampleSize {
                required: 4,
                actual: m,
            });
        }
        if d == 0 {
            return Err(Error::Shape("dataset has no features".into()));
        }
        config.validate(d)?;
        let features = if config.normalize {
            zscore_normalize(data)?.features().to_owned()
        } else {
            data.features().to_owned()
        };
        let spec = config
            .label_kernel
            .clone()
            .unwrap_or_else(|| LabelKernelSpec::auto(data.labels()));
        let built = build_label_kernel(&spec, data.labels(), DiagonalConvention::ZeroDiagonal)?;
        let label_rows = built.matrix.values().sum_axis(Axis(1)).to_vec();
        let label_sum = label_rows.iter().sum();
        Ok(Self {
            features,
            label: built.matrix,
            label_rows,
            label_sum,
            label_sigma: built.sigma,
            label_fallback: built.used_fallback,
        })
    }

    fn transform(&self, kernel: DataKernel, dim: usize) -> Transform {
        match kernel {
            DataKernel::Linear => Transform::Identity,
            DataKernel::GaussianFixed(s) => Transform::Gaussian(s),
            DataKernel::GaussianAdaptive => Transform::Gaussian(sigma_for_dimension(dim)),
        }
    }

    fn finish(self, ordering: Vec<usize>, rounds: Vec<RoundRecord>, config: &SelectionConfig) -> FeatureRanking {
        FeatureRanking {
            ordering,
            rounds,
            config: config.clone(),
            label_sigma: self.label_sigma,
            label_fallback: self.label_fallback,
        }
    }

    fn run_backward<T: PairTerm>(self, mut sum: FeatureSum<T>, config: &SelectionConfig) -> Result<FeatureRanking> {
        let mut ordering = Vec::with_capacity(sum.n_features());
        let mut rounds = Vec::new();
        while sum.n_active() > 0 {
            let active = sum.active();
            let tf = self.transform(config.data_kernel, active.len() - 1);
            let scores = candidate_scores(&sum, &active, -1.0, tf, &self);
            let n = config.batch_size(active.len());
            let moved = top_by_score(&active, &scores, n);
            for &j in &moved {
                sum.remove_feature(j)?;
            }
            ordering.extend_from_slice(&moved);
            rounds.push(RoundRecord {
                sigma: tf.sigma(),
                candidates: active.clone(),
                active,
                scores,
                moved,
            });
        }
        Ok(self.finish(ordering, rounds, config))
    }

    fn run_forward<T: PairTerm>(self, mut sum: FeatureSum<T>, config: &SelectionConfig) -> Result<FeatureRanking> {
        let d = sum.n_features();
        let mut included = Vec::with_capacity(d);
        let mut rounds = Vec::new();
        while sum.n_active() < d {
            let active = sum.active();
            let remaining: Vec<usize> = (0..d).filter(|&j| !sum.is_active(j)).collect();
            let tf = self.transform(config.data_kernel, active.len() + 1);
            let scores = candidate_scores(&sum, &remaining, 1.0, tf, &self);
            let n = config.batch_size(remaining.len());
            let moved = top_by_score(&remaining, &scores, n);
            for &j in &moved {
                sum.add_feature(j)?;
            }
            included.extend_from_slice(&moved);
            rounds.push(RoundRecord {
                sigma: tf.sigma(),
                active,
                candidates: remaining,
                scores,
                moved,
            });
        }
        included.reverse();
        Ok(self.finish(included, rounds, config))
    }
}

/// The `n` candidates with the largest scores, ties to the lower index,
/// ordered by descending score.
fn top_by_score(candidates: &[usize], scores: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(candidates[a].cmp(&candidates[b]))
    });
    idx.truncate(n);
    idx.into_iter().map(|i| candidates[i]).collect()
}

/// HSIC of the kernel built from `total + sign * term_j` for each candidate
/// `j`. Scored in parallel; the output is in candidate order.
fn candidate_scores<T: PairTerm>(
    sum: &FeatureSum<T>,
    candidates: &[usize],
    sign: f64,
    tf: Transform,
    prep: &Prepared,
) -> Vec<f64> {
    let backward_last = sign < 0.0 && sum.n_active() == 1;
    candidates
        .par_iter()
        .map(|&j| {
            if backward_last {
                // the empty feature set: constant or zero kernel
                return 0.0;
            }
            score_one(sum, j, sign, tf, prep)
        })
        .collect()
}

fn score_one<T: PairTerm>(sum: &FeatureSum<T>, j: usize, sign: f64, tf: Transform, prep: &Prepared) -> f64 {
    let m = sum.n_samples();
    let total = sum.total();
    let col = sum.column(j);
    let l = prep.label.values();
    let mut row_k = vec![0.0; m];
    let mut trace = 0.0;
    for i in 0..m {
        let ti = total.row(i);
        let li = l.row(i);
        let ci = col[i];
        let mut acc_t = 0.0;
        let mut acc_r = 0.0;
        for k in 0..i {
            let kv = tf.apply(T::clamp(ti[k] + sign * T::term(ci, col[k])));
            acc_t += kv * li[k];
            acc_r += kv;
            row_k[k] += kv;
        }
        trace += 2.0 * acc_t;
        row_k[i] += acc_r;
    }
    let sum_k: f64 = row_k.iter().sum();
    let kl_ones: f64 = row_k.iter().zip(&prep.label_rows).map(|(a, b)| a * b).sum();
    UnbiasedParts {
        trace_kl: trace,
        sum_k,
        sum_l: prep.label_sum,
        kl_ones,
    }
    .value(m)
}
