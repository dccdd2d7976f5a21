//! Data and label kernel matrices.
//!
//! All Gaussian kernels use the inverse-width form
//! `k(x, x') = exp(-sigma * ||x - x'||^2)`. The median heuristic is mapped
//! into that form as `sigma = 1 / (2 * med^2)`.
//!
//! [`DistanceDecomposition`] keeps the pairwise squared distances over an
//! active feature set and updates them in place as features leave, so that
//! elimination never recomputes distances from scratch.

use std::marker::PhantomData;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Labels;
use crate::error::{Error, Result};

/// Fallback Gaussian parameter used when the median pairwise distance is 0.
pub const FALLBACK_SIGMA: f64 = 1.0;

const SYMMETRY_TOL: f64 = 1e-12;

/// Whether the diagonal of a kernel matrix is kept or forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagonalConvention {
    /// `K_ii = 0`, as required by the unbiased estimator.
    ZeroDiagonal,
    /// `K_ii = k(x_i, x_i)`.
    FullDiagonal,
}

/// A symmetric `m x m` kernel matrix tagged with its diagonal convention.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Array2<f64>,
    convention: DiagonalConvention,
}

impl KernelMatrix {
    /// Wraps a precomputed matrix after checking it is square, finite and
    /// symmetric, and that the diagonal is zero under `ZeroDiagonal`.
    pub fn new(values: Array2<f64>, convention: DiagonalConvention) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::Shape(format!("kernel matrix is {r}x{c}")));
        }
        if r == 0 {
            return Err(Error::InvalidParameter("empty kernel matrix".into()));
        }
        for i in 0..r {
            for j in 0..i {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if !a.is_finite() || (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "kernel matrix not symmetric/finite at ({i}, {j})"
                    )));
                }
            }
            if !values[[i, i]].is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite diagonal at {i}")));
            }
            if convention == DiagonalConvention::ZeroDiagonal && values[[i, i]] != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "ZeroDiagonal matrix has K[{i},{i}] = {}",
                    values[[i, i]]
                )));
            }
        }
        Ok(Self { values, convention })
    }

    /// Applies the convention to a matrix whose diagonal holds `k(x_i, x_i)`.
    fn from_full(mut values: Array2<f64>, convention: DiagonalConvention) -> Self {
        if convention == DiagonalConvention::ZeroDiagonal {
            values.diag_mut().fill(0.0);
        }
        Self { values, convention }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn convention(&self) -> DiagonalConvention {
        self.convention
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Copy with the diagonal set to zero.
    pub fn zero_diagonal(&self) -> KernelMatrix {
        Self::from_full(self.values.clone(), DiagonalConvention::ZeroDiagonal)
    }

    /// Copy with rows and columns reordered: entry `(i, j)` becomes the old
    /// entry `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> KernelMatrix {
        let values = self.values.select(Axis(0), perm).select(Axis(1), perm);
        Self {
            values,
            convention: self.convention,
        }
    }

    pub fn scaled(&self, factor: f64) -> KernelMatrix {
        Self {
            values: &self.values * factor,
            convention: self.convention,
        }
    }

    pub(crate) fn require(&self, convention: DiagonalConvention) -> Result<()> {
        if self.convention != convention {
            return Err(Error::Convention {
                expected: convention,
                found: self.convention,
            });
        }
        Ok(())
    }
}

/// Pairwise squared Euclidean distances between the rows of `data`.
pub fn squared_distances(data: ArrayView2<'_, f64>) -> Array2<f64> {
    let m = data.nrows();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        let ri = data.row(i);
        for k in 0..i {
            let d: f64 = ri
                .iter()
                .zip(data.row(k).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            out[[i, k]] = d;
            out[[k, i]] = d;
        }
    }
    out
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Gaussian parameter must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

/// `K_ij = exp(-sigma * D_ij)` from a matrix of squared distances.
pub fn gaussian_kernel_matrix(
    sq_dist: ArrayView2<'_, f64>,
    sigma: f64,
    convention: DiagonalConvention,
) -> Result<KernelMatrix> {
    check_sigma(sigma)?;
    let (r, c) = sq_dist.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("distance matrix is {r}x{c}")));
    }
    if sq_dist.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
        return Err(Error::InvalidParameter(
            "squared distances must be finite and non-negative".into(),
        ));
    }
    let values = sq_dist.mapv(|d| (-sigma * d).exp());
    Ok(KernelMatrix::from_full(values, convention))
}

/// `K_ij = <x_i, x_j>` over the rows of `data`.
pub fn linear_kernel_matrix(
    data: ArrayView2<'_, f64>,
    convention: DiagonalConvention,
) -> Result<KernelMatrix> {
    if data.nrows() == 0 || data.ncols() == 0 {
        return Err(Error::InvalidParameter("linear kernel on empty data".into()));
    }
    let values = data.dot(&data.t());
    // dot() may round (i, j) and (j, i) differently
    let values = symmetrize(values);
    Ok(KernelMatrix::from_full(values, convention))
}

fn symmetrize(mut a: Array2<f64>) -> Array2<f64> {
    let m = a.nrows();
    for i in 0..m {
        for j in 0..i {
            a[[j, i]] = a[[i, j]];
        }
    }
    a
}

/// Signed class weights: `+1 -> 1/m_plus`, `-1 -> -1/m_minus`. They sum to
/// zero over the sample.
pub fn binary_label_weights(labels: &[i8]) -> Result<Vec<f64>> {
    let m_plus = labels.iter().filter(|&&y| y == 1).count();
    let m_minus = labels.iter().filter(|&&y| y == -1).count();
    if m_plus + m_minus != labels.len() {
        return Err(Error::InvalidParameter("binary labels must be +1 or -1".into()));
    }
    if m_plus == 0 || m_minus == 0 {
        return Err(Error::DegenerateLabels(format!(
            "binary labels need both classes (m+ = {m_plus}, m- = {m_minus})"
        )));
    }
    let (wp, wm) = (1.0 / m_plus as f64, -1.0 / m_minus as f64);
    Ok(labels.iter().map(|&y| if y == 1 { wp } else { wm }).collect())
}

/// `L_ij = rho(y_i) * rho(y_j)` with the signed weights of
/// [`binary_label_weights`].
pub fn binary_label_matrix(labels: &[i8], convention: DiagonalConvention) -> Result<KernelMatrix> {
    let rho = binary_label_weights(labels)?;
    let rho = ArrayView1::from(&rho[..]);
    let values = outer(rho, rho);
    Ok(KernelMatrix::from_full(values, convention))
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// Per-class label vectors for `c` classes: the row of a sample in class
/// `i` has `1/m_i` in column `i` and `1/(m_j - m)` in every other column `j`.
pub fn multiclass_label_vectors(labels: &[usize]) -> Result<Array2<f64>> {
    let counts = class_counts(labels)?;
    let m = labels.len() as f64;
    let c = counts.len();
    Ok(Array2::from_shape_fn((c, c), |(own, col)| {
        if own == col {
            1.0 / counts[col] as f64
        } else {
            1.0 / (counts[col] as f64 - m)
        }
    }))
}

fn class_counts(labels: &[usize]) -> Result<Vec<usize>> {
    let c = labels.iter().copied().max().map_or(0, |mx| mx + 1);
    if c < 2 {
        return Err(Error::DegenerateLabels(format!(
            "multiclass labels need at least 2 classes, found {c}"
        )));
    }
    let mut counts = vec![0usize; c];
    for &y in labels {
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::DegenerateLabels(format!("class {empty} has no samples")));
    }
    Ok(counts)
}

/// `L = Y Y^T` with the rows of `Y` given by [`multiclass_label_vectors`].
pub fn multiclass_label_matrix(
    labels: &[usize],
    convention: DiagonalConvention,
) -> Result<KernelMatrix> {
    let y = multiclass_label_vectors(labels)?;
    let gram = y.dot(&y.t());
    let m = labels.len();
    let values = Array2::from_shape_fn((m, m), |(i, j)| gram[[labels[i], labels[j]]]);
    Ok(KernelMatrix::from_full(values, convention))
}

/// Median of the pairwise Euclidean distances between the rows of `points`.
pub fn median_pairwise_distance(points: ArrayView2<'_, f64>) -> Result<f64> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "median heuristic needs at least 2 points, got {n}"
        )));
    }
    let sq = squared_distances(points);
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in 0..i {
            dists.push(sq[[i, k]].sqrt());
        }
    }
    Ok(median_in_place(&mut dists))
}

/// Median of a non-empty slice; the mean of the two middle values when the
/// length is even.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Gaussian parameter `1 / (2 * med^2)` from the median pairwise distance,
/// or [`FALLBACK_SIGMA`] when that median is zero.
pub fn median_heuristic(points: ArrayView2<'_, f64>) -> Result<f64> {
    let med = median_pairwise_distance(points)?;
    if med > 0.0 {
        Ok(1.0 / (2.0 * med * med))
    } else {
        Ok(FALLBACK_SIGMA)
    }
}

/// Gaussian kernel on scalar labels with the median-heuristic parameter.
/// Returns the matrix and the parameter used.
pub fn regression_label_matrix(
    labels: &[f64],
    convention: DiagonalConvention,
) -> Result<(KernelMatrix, f64)> {
    let m = labels.len();
    if m < 2 {
        return Err(Error::SampleSize {
            required: 2,
            actual: m,
        });
    }
    let col = ArrayView2::from_shape((m, 1), labels).expect("m x 1 view");
    let sigma = median_heuristic(col)?;
    let k = gaussian_kernel_matrix(squared_distances(col).view(), sigma, convention)?;
    Ok((k, sigma))
}

/// How the label kernel is built.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelKernelSpec {
    /// Signed class weights, `l(y, y') = rho(y) rho(y')`.
    Binary,
    /// Linear kernel on the per-class label vectors.
    Multiclass,
    /// Gaussian kernel on real labels; `None` picks the parameter by the
    /// median heuristic.
    RegressionRbf { sigma: Option<f64> },
    /// A caller-supplied matrix in sample order.
    Precomputed(KernelMatrix),
}

impl LabelKernelSpec {
    /// The natural label kernel for a label type.
    pub fn auto(labels: &Labels) -> LabelKernelSpec {
        match labels {
            Labels::Binary(_) => LabelKernelSpec::Binary,
            Labels::Multiclass(_) => LabelKernelSpec::Multiclass,
            Labels::Real(_) => LabelKernelSpec::RegressionRbf { sigma: None },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LabelKernelSpec::Binary => "binary",
            LabelKernelSpec::Multiclass => "multiclass",
            LabelKernelSpec::RegressionRbf { .. } => "regression-rbf",
            LabelKernelSpec::Precomputed(_) => "precomputed",
        }
    }
}

/// A built label kernel plus what was used to build it.
#[derive(Debug, Clone)]
pub struct LabelKernel {
    pub matrix: KernelMatrix,
    /// Gaussian parameter, for the regression kernel.
    pub sigma: Option<f64>,
    /// True when the median distance was zero and [`FALLBACK_SIGMA`] was used.
    pub used_fallback: bool,
}

/// Builds the label kernel described by `spec` for `labels`.
pub fn build_label_kernel(
    spec: &LabelKernelSpec,
    labels: &Labels,
    convention: DiagonalConvention,
) -> Result<LabelKernel> {
    let plain = |matrix| LabelKernel {
        matrix,
        sigma: None,
        used_fallback: false,
    };
    match (spec, labels) {
        (LabelKernelSpec::Binary, Labels::Binary(y)) => {
            Ok(plain(binary_label_matrix(y, convention)?))
        }
        (LabelKernelSpec::Multiclass, Labels::Multiclass(y)) => {
            Ok(plain(multiclass_label_matrix(y, convention)?))
        }
        (LabelKernelSpec::RegressionRbf { sigma: None }, labels) => {
            let y = labels.to_numeric();
            let col = ArrayView2::from_shape((y.len(), 1), &y[..]).expect("m x 1 view");
            let used_fallback = y.len() >= 2 && median_pairwise_distance(col)? == 0.0;
            let (matrix, sigma) = regression_label_matrix(&y, convention)?;
            Ok(LabelKernel {
                matrix,
                sigma: Some(sigma),
                used_fallback,
            })
        }
        (LabelKernelSpec::RegressionRbf { sigma: Some(s) }, labels) => {
            let y = labels.to_numeric();
            let col = ArrayView2::from_shape((y.len(), 1), &y[..]).expect("m x 1 view");
            let matrix = gaussian_kernel_matrix(squared_distances(col).view(), *s, convention)?;
            Ok(LabelKernel {
                matrix,
                sigma: Some(*s),
                used_fallback: false,
            })
        }
        (LabelKernelSpec::Precomputed(k), labels) => {
            if k.size() != labels.len() {
                return Err(Error::Shape(format!(
                    "precomputed label kernel is {0}x{0} for {1} samples",
                    k.size(),
                    labels.len()
                )));
            }
            let matrix = match convention {
                DiagonalConvention::ZeroDiagonal => k.zero_diagonal(),
                DiagonalConvention::FullDiagonal => {
                    k.require(DiagonalConvention::FullDiagonal)?;
                    k.clone()
                }
            };
            Ok(plain(matrix))
        }
        (spec, labels) => Err(Error::InvalidParameter(format!(
            "label kernel `{}` does not apply to {:?} labels",
            spec.name(),
            labels.kind()
        ))),
    }
}

/// A per-feature additive pairwise quantity.
pub trait PairTerm: Send + Sync {
    fn term(a: f64, b: f64) -> f64;
    /// Clamp applied after in-place updates.
    fn clamp(v: f64) -> f64 {
        v
    }
}

/// `(a - b)^2`; sums to the squared Euclidean distance.
#[derive(Debug, Clone, Copy)]
pub struct SquaredDifference;

impl PairTerm for SquaredDifference {
    #[inline]
    fn term(a: f64, b: f64) -> f64 {
        (a - b) * (a - b)
    }

    #[inline]
    fn clamp(v: f64) -> f64 {
        v.max(0.0)
    }
}

/// `a * b`; sums to the inner product.
#[derive(Debug, Clone, Copy)]
pub struct Product;

impl PairTerm for Product {
    #[inline]
    fn term(a: f64, b: f64) -> f64 {
        a * b
    }
}

/// A pairwise matrix that is a sum of per-feature terms over an active
/// feature set. Per-feature matrices are recomputed from the stored columns
/// on demand rather than kept in memory.
#[derive(Debug, Clone)]
pub struct FeatureSum<T: PairTerm> {
    columns: Vec<Vec<f64>>,
    total: Array2<f64>,
    active: Vec<bool>,
    n_active: usize,
    _term: PhantomData<T>,
}

/// Squared Euclidean distances maintained per feature.
pub type DistanceDecomposition = FeatureSum<SquaredDifference>;

/// Linear-kernel Gram matrix maintained per feature.
pub type GramDecomposition = FeatureSum<Product>;

impl<T: PairTerm> FeatureSum<T> {
    /// All features of `data` active.
    pub fn new(data: ArrayView2<'_, f64>) -> Self {
        let d = data.ncols();
        Self::with_active(data, &(0..d).collect::<Vec<_>>()).expect("indices in range")
    }

    /// No feature active; the total is the zero matrix.
    pub fn empty(data: ArrayView2<'_, f64>) -> Self {
        Self::with_active(data, &[]).expect("no indices")
    }

    /// Only the listed features active.
    pub fn with_active(data: ArrayView2<'_, f64>, active: &[usize]) -> Result<Self> {
        let (m, d) = data.dim();
        let columns: Vec<Vec<f64>> = data.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
        let mut sum = Self {
            columns,
            total: Array2::zeros((m, m)),
            active: vec![false; d],
            n_active: 0,
            _term: PhantomData,
        };
        for &j in active {
            sum.add_feature(j)?;
        }
        Ok(sum)
    }

    pub fn n_samples(&self) -> usize {
        self.total.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn total(&self) -> ArrayView2<'_, f64> {
        self.total.view()
    }

    /// Active feature indices in ascending order.
    pub fn active(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&j| self.active[j]).collect()
    }

    pub fn n_active(&self) -> usize {
        self.n_active
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active.get(j).copied().unwrap_or(false)
    }

    /// Entry `(i, k)` of feature `j`'s matrix.
    #[inline]
    pub fn term(&self, j: usize, i: usize, k: usize) -> f64 {
        let col = &self.columns[j];
        T::term(col[i], col[k])
    }

    pub(crate) fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Feature `j`'s full matrix.
    pub fn feature_matrix(&self, j: usize) -> Result<Array2<f64>> {
        self.check_index(j)?;
        let m = self.n_samples();
        Ok(Array2::from_shape_fn((m, m), |(i, k)| self.term(j, i, k)))
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.columns.len() {
            return Err(Error::FeatureIndex {
                index: j,
                count: self.columns.len(),
            });
        }
        Ok(())
    }

    /// Subtracts feature `j`'s term from the total and deactivates it.
    pub fn remove_feature(&mut self, j: usize) -> Result<()> {
        self.check_index(j)?;
        if !self.active[j] {
            return Err(Error::InactiveFeature(j));
        }
        self.active[j] = false;
        self.n_active -= 1;
        if self.n_active == 0 {
            self.total.fill(0.0);
            return Ok(());
        }
        self.apply(j, -1.0);
        Ok(())
    }

    /// Adds feature `j`'s term to the total and activates it.
    pub fn add_feature(&mut self, j: usize) -> Result<()> {
        self.check_index(j)?;
        if self.active[j] {
            return Err(Error::InvalidParameter(format!("feature {j} already active")));
        }
        self.active[j] = true;
        self.n_active += 1;
        self.apply(j, 1.0);
        Ok(())
    }

    fn apply(&mut self, j: usize, sign: f64) {
        let col = &self.columns[j];
        let m = col.len();
        for i in 0..m {
            for k in 0..=i {
                let v = T::clamp(self.total[[i, k]] + sign * T::term(col[i], col[k]));
                self.total[[i, k]] = v;
                self.total[[k, i]] = v;
            }
        }
    }
}
