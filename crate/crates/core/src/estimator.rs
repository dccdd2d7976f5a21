//! HSIC estimators, the U-statistic enumeration oracle, asymptotic variance,
//! MMD / unnormalized KTA and significance tests.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Labels;
use crate::error::{Error, Result};
use crate::kernels::{build_label_kernel, DiagonalConvention, KernelMatrix, LabelKernelSpec};
use crate::rng;

/// Largest sample size [`hsic_ustat_oracle`] will enumerate by default.
pub const USTAT_ORACLE_LIMIT: usize = 12;

/// Smallest permutation count accepted by [`permutation_test`].
pub const MIN_PERMUTATIONS: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Unbiased,
    Biased,
    UStatOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicEstimate {
    pub value: f64,
    /// Asymptotic variance of the unbiased estimator, when computed.
    pub variance: Option<f64>,
    pub sample_size: usize,
    pub p_value: Option<f64>,
    pub method: EstimatorKind,
}

impl HsicEstimate {
    fn new(value: f64, sample_size: usize, method: EstimatorKind) -> Self {
        Self {
            value,
            variance: None,
            sample_size,
            p_value: None,
            method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignificanceMode {
    Asymptotic,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mode: SignificanceMode,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
}

fn check_pair(k: &KernelMatrix, l: &KernelMatrix, convention: DiagonalConvention) -> Result<usize> {
    if k.size() != l.size() {
        return Err(Error::Shape(format!(
            "kernel sizes differ: {} vs {}",
            k.size(),
            l.size()
        )));
    }
    k.require(convention)?;
    l.require(convention)?;
    Ok(k.size())
}

fn require_min(m: usize, required: usize) -> Result<()> {
    if m < required {
        return Err(Error::SampleSize {
            required,
            actual: m,
        });
    }
    Ok(())
}

/// The sufficient statistics of the unbiased estimator: `tr(KL)`, `1'K1`,
/// `1'L1` and `1'KL1`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct UnbiasedParts {
    pub trace_kl: f64,
    pub sum_k: f64,
    pub sum_l: f64,
    pub kl_ones: f64,
}

impl UnbiasedParts {
    pub(crate) fn value(&self, m: usize) -> f64 {
        let m = m as f64;
        (self.trace_kl + self.sum_k * self.sum_l / ((m - 1.0) * (m - 2.0))
            - 2.0 / (m - 2.0) * self.kl_ones)
            / (m * (m - 3.0))
    }
}

fn parts(k: ArrayView2<'_, f64>, l: ArrayView2<'_, f64>) -> (UnbiasedParts, Array1<f64>, Array1<f64>) {
    let row_k = k.sum_axis(ndarray::Axis(1));
    let row_l = l.sum_axis(ndarray::Axis(1));
    let trace_kl = k.iter().zip(l.iter()).map(|(a, b)| a * b).sum();
    let p = UnbiasedParts {
        trace_kl,
        sum_k: row_k.sum(),
        sum_l: row_l.sum(),
        kl_ones: row_k.dot(&row_l),
    };
    (p, row_k, row_l)
}

/// Unbiased HSIC from zero-diagonal kernel matrices, in O(m^2).
pub fn hsic_unbiased(k: &KernelMatrix, l: &KernelMatrix) -> Result<HsicEstimate> {
    let m = check_pair(k, l, DiagonalConvention::ZeroDiagonal)?;
    require_min(m, 4)?;
    let (p, _, _) = parts(k.values(), l.values());
    Ok(HsicEstimate::new(p.value(m), m, EstimatorKind::Unbiased))
}

/// The order-4 U-statistic kernel `h(i, j, q, r)`: the average over all
/// orderings `(s, t, u, v)` of the four indices of
/// `K_st L_st + K_st L_uv - 2 K_st L_su`.
pub fn ustat_kernel(k: ArrayView2<'_, f64>, l: ArrayView2<'_, f64>, idx: [usize; 4]) -> f64 {
    let mut acc = 0.0;
    for &[a, b, c, d] in PERMUTATIONS_4.iter() {
        let (s, t, u, v) = (idx[a], idx[b], idx[c], idx[d]);
        acc += k[[s, t]] * l[[s, t]] + k[[s, t]] * l[[u, v]] - 2.0 * k[[s, t]] * l[[s, u]];
    }
    acc / 24.0
}

const PERMUTATIONS_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Unbiased HSIC by brute-force enumeration of every ordered 4-tuple of
/// distinct indices. O(m^4); refuses `m > USTAT_ORACLE_LIMIT`.
pub fn hsic_ustat_oracle(k: &KernelMatrix, l: &KernelMatrix) -> Result<HsicEstimate> {
    hsic_ustat_oracle_with_limit(k, l, USTAT_ORACLE_LIMIT)
}

pub fn hsic_ustat_oracle_with_limit(
    k: &KernelMatrix,
    l: &KernelMatrix,
    limit: usize,
) -> Result<HsicEstimate> {
    let m = check_pair(k, l, DiagonalConvention::ZeroDiagonal)?;
    require_min(m, 4)?;
    if m > limit {
        return Err(Error::OracleTooLarge { m, limit });
    }
    let (kv, lv) = (k.values(), l.values());
    let mut sum = 0.0;
    let mut count = 0u64;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            for q in (0..m).filter(|&q| q != i && q != j) {
                for r in (0..m).filter(|&r| r != i && r != j && r != q) {
                    sum += ustat_kernel(kv, lv, [i, j, q, r]);
                    count += 1;
                }
            }
        }
    }
    Ok(HsicEstimate::new(sum / count as f64, m, EstimatorKind::UStatOracle))
}

/// Biased HSIC `tr(K H L H) / (m - 1)^2` with `H = I - 11'/m`, computed by
/// double-centering `K` instead of forming `H`.
pub fn hsic_biased(k: &KernelMatrix, l: &KernelMatrix) -> Result<HsicEstimate> {
    let m = check_pair(k, l, DiagonalConvention::FullDiagonal)?;
    require_min(m, 2)?;
    let kv = k.values();
    let row_means = kv.sum_axis(ndarray::Axis(1)) / m as f64;
    let grand = row_means.sum() / m as f64;
    let lv = l.values();
    let mut trace = 0.0;
    for i in 0..m {
        for j in 0..m {
            let centered = kv[[i, j]] - row_means[i] - row_means[j] + grand;
            trace += centered * lv[[i, j]];
        }
    }
    let denom = ((m - 1) * (m - 1)) as f64;
    Ok(HsicEstimate::new(trace / denom, m, EstimatorKind::Biased))
}

/// Per-index averages `(m-1)_3^{-1} * sum_{(j,q,r)} h(i, j, q, r)` over the
/// ordered triples of distinct indices other than `i`, in O(m^2).
pub fn ustat_row_means(k: &KernelMatrix, l: &KernelMatrix) -> Result<Vec<f64>> {
    let m = check_pair(k, l, DiagonalConvention::ZeroDiagonal)?;
    require_min(m, 4)?;
    let (kv, lv) = (k.values(), l.values());
    let (p, row_k, row_l) = parts(kv, lv);
    let diag_kl: Array1<f64> = (0..m)
        .map(|i| kv.row(i).dot(&lv.row(i)))
        .collect();
    let k_l = kv.dot(&row_l);
    let l_k = lv.dot(&row_k);
    let (sk, sl, ta, pkl) = (p.sum_k, p.sum_l, p.trace_kl, p.kl_ones);
    let mf = m as f64;
    let falling3 = (mf - 1.0) * (mf - 2.0) * (mf - 3.0);

    Ok((0..m)
        .map(|i| {
            let (a, ki, li) = (diag_kl[i], row_k[i], row_l[i]);
            let (kli, lki) = (k_l[i], l_k[i]);
            // Sums of each term of h over ordered 4-tuples of distinct
            // indices containing i, split by the position i occupies.
            let t1 = 2.0 * (mf - 2.0) * (mf - 3.0) * a + 2.0 * (mf - 3.0) * (ta - 2.0 * a);
            let t2 = 2.0 * (ki * (sl - 2.0 * li) - 2.0 * kli + 2.0 * a)
                + 2.0 * (li * (sk - 2.0 * ki) - 2.0 * lki + 2.0 * a);
            let t3 = (mf - 3.0) * (ki * li + kli + lki - 3.0 * a)
                + (pkl - ta - lki - kli - ki * li + 3.0 * a);
            // Each such tuple appears 6 times among the 24 orderings of
            // (i, j, q, r) over ordered (j, q, r).
            (t1 + t2 - 2.0 * t3) / 4.0 / falling3
        })
        .collect())
}

/// Asymptotic variance `16/m * (R - HSIC^2)` of the unbiased estimator,
/// clamped at zero.
pub fn hsic_variance(k: &KernelMatrix, l: &KernelMatrix) -> Result<f64> {
    let est = hsic_unbiased(k, l)?;
    let means = ustat_row_means(k, l)?;
    let m = means.len() as f64;
    let r = means.iter().map(|v| v * v).sum::<f64>() / m;
    let var = 16.0 / m * (r - est.value * est.value);
    Ok(var.max(0.0))
}

/// Unbiased estimate with its asymptotic variance attached.
pub fn hsic_unbiased_with_variance(k: &KernelMatrix, l: &KernelMatrix) -> Result<HsicEstimate> {
    let mut est = hsic_unbiased(k, l)?;
    est.variance = Some(hsic_variance(k, l)?);
    Ok(est)
}

/// Standard normal upper tail `1 - Phi(z)`.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// One-sided p-value `1 - Phi(value / sqrt(variance))`.
pub fn asymptotic_p_value(est: &HsicEstimate) -> Result<SignificanceResult> {
    let var = est
        .variance
        .ok_or_else(|| Error::VarianceUnavailable("estimate carries no variance".into()))?;
    if !(var > 0.0) {
        return Err(Error::VarianceUnavailable(format!(
            "variance is {var}; use a permutation test"
        )));
    }
    let z = est.value / var.sqrt();
    Ok(SignificanceResult {
        statistic: est.value,
        p_value: normal_upper_tail(z).clamp(0.0, 1.0),
        mode: SignificanceMode::Asymptotic,
        permutations: None,
        seed: None,
    })
}

/// Permutation test of `K` against the label kernel built from `labels`.
///
/// The label kernel is built once and its rows and columns are permuted,
/// which equals rebuilding it from permuted labels for every label kernel in
/// this crate. `p = (1 + #{permuted >= observed}) / (B + 1)`.
pub fn permutation_test(
    k: &KernelMatrix,
    label_kernel: &LabelKernelSpec,
    labels: &Labels,
    permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    let l = build_label_kernel(label_kernel, labels, DiagonalConvention::ZeroDiagonal)?;
    permutation_test_matrices(k, &l.matrix, permutations, seed)
}

/// Permutation test on two kernel matrices. A full-diagonal `K` is zeroed
/// first.
pub fn permutation_test_matrices(
    k: &KernelMatrix,
    l: &KernelMatrix,
    permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {permutations}"
        )));
    }
    let k = match k.convention() {
        DiagonalConvention::ZeroDiagonal => k.clone(),
        DiagonalConvention::FullDiagonal => k.zero_diagonal(),
    };
    let observed = hsic_unbiased(&k, l)?.value;
    let m = k.size();

    // The permutation stream is drawn up front so the result does not
    // depend on evaluation order.
    let mut rng = rng::stream(seed, rng::STREAM_PERMUTATION);
    let perms: Vec<Vec<usize>> = (0..permutations)
        .map(|_| {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();

    let kv = k.values();
    let lv = l.values();
    let row_k = kv.sum_axis(ndarray::Axis(1));
    let row_l = lv.sum_axis(ndarray::Axis(1));
    let (sum_k, sum_l) = (row_k.sum(), row_l.sum());
    let exceed = perms
        .par_iter()
        .map(|perm| {
            let mut trace = 0.0;
            for i in 0..m {
                let pi = perm[i];
                let krow = kv.row(i);
                let lrow = lv.row(pi);
                for j in 0..m {
                    trace += krow[j] * lrow[perm[j]];
                }
            }
            let kl_ones: f64 = (0..m).map(|i| row_k[i] * row_l[perm[i]]).sum();
            let p = UnbiasedParts {
                trace_kl: trace,
                sum_k,
                sum_l,
                kl_ones,
            };
            p.value(m) >= observed
        })
        .filter(|&b| b)
        .count();

    Ok(SignificanceResult {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        mode: SignificanceMode::Permutation,
        permutations: Some(permutations),
        seed: Some(seed),
    })
}

/// Biased MMD between the `+1` and `-1` samples of a full-diagonal kernel:
/// the within-class block means minus twice the cross-block mean.
pub fn mmd_statistic(k: &KernelMatrix, labels: &[i8]) -> Result<f64> {
    k.require(DiagonalConvention::FullDiagonal)?;
    if labels.len() != k.size() {
        return Err(Error::Shape(format!(
            "{} labels for a {}x{} kernel",
            labels.len(),
            k.size(),
            k.size()
        )));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == -1).collect();
    if pos.len() + neg.len() != labels.len() {
        return Err(Error::InvalidParameter("binary labels must be +1 or -1".into()));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateLabels("MMD needs both classes".into()));
    }
    let kv = k.values();
    let block = |a: &[usize], b: &[usize]| -> f64 {
        a.iter()
            .map(|&i| b.iter().map(|&j| kv[[i, j]]).sum::<f64>())
            .sum()
    };
    let (mp, mn) = (pos.len() as f64, neg.len() as f64);
    Ok(block(&pos, &pos) / (mp * mp) + block(&neg, &neg) / (mn * mn)
        - 2.0 * block(&pos, &neg) / (mp * mn))
}

/// Unnormalized kernel target alignment `tr(KL)`.
pub fn kta_unnormalized(k: &KernelMatrix, l: &KernelMatrix) -> Result<f64> {
    check_pair(k, l, DiagonalConvention::FullDiagonal)?;
    // tr(KL) = sum_ij K_ij L_ji
    let (kv, lv) = (k.values(), l.values());
    let m = k.size();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += kv[[i, j]] * lv[[j, i]];
        }
    }
    Ok(acc)
}

/// Materializes `values` as a [`KernelMatrix`] from a dense array, zeroing
/// the diagonal. Convenience for callers holding raw arrays.
pub fn zero_diagonal_kernel(values: Array2<f64>) -> Result<KernelMatrix> {
    let mut values = values;
    values.diag_mut().fill(0.0);
    KernelMatrix::new(values, DiagonalConvention::ZeroDiagonal)
}
