//! Per-feature filter scores: absolute Pearson correlation and binned mutual
//! information.

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Labels};
use crate::error::{Error, Result};

/// Largest default bin count for [`mutual_info_rank`].
pub const MAX_MI_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub higher_is_more_relevant: bool,
    pub method_name: String,
}

impl ScoreVector {
    fn new(scores: Vec<f64>, method_name: &str) -> Self {
        Self {
            scores,
            higher_is_more_relevant: true,
            method_name: method_name.to_string(),
        }
    }

    /// Feature indices from most to least relevant, ties to the lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// 1-based rank of feature `j`.
    pub fn rank_of(&self, j: usize) -> Option<usize> {
        self.ranking().iter().position(|&f| f == j).map(|p| p + 1)
    }
}

/// `|corr(x, y)|`, or 0 when either side is constant.
pub fn abs_pearson(x: ArrayView1<'_, f64>, y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.sum() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).abs().min(1.0)
}

/// Absolute Pearson correlation of each feature with the numeric labels.
/// Multiclass labels score the maximum over one-vs-rest class indicators.
pub fn pearson_rank(data: &Dataset) -> Result<ScoreVector> {
    let m = data.n_samples();
    if m < 3 {
        return Err(Error::SampleSize {
            required: 3,
            actual: m,
        });
    }
    let targets: Vec<Vec<f64>> = match data.labels() {
        Labels::Multiclass(y) => {
            let c = y.iter().copied().max().map_or(0, |v| v + 1);
            (0..c)
                .map(|class| y.iter().map(|&v| f64::from(u8::from(v == class))).collect())
                .collect()
        }
        labels => vec![labels.to_numeric()],
    };
    let x = data.features();
    let scores = (0..data.n_features())
        .into_par_iter()
        .map(|j| {
            targets
                .iter()
                .map(|t| abs_pearson(x.column(j), t))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ScoreVector::new(scores, "pearson"))
}

/// Default bin count `min(10, ceil(sqrt(m)))`.
pub fn default_bins(m: usize) -> usize {
    let root = (m as f64).sqrt().ceil() as usize;
    root.clamp(1, MAX_MI_BINS)
}

/// Equal-frequency bin of each value: the midrank `r` (ties share their
/// average rank) goes to bin `floor((r - 1) * bins / m)`. Tied values always
/// share a bin.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // 0-based midrank of positions start..end
        let mid = (start + end - 1) as f64 / 2.0;
        let bin = ((mid * bins as f64 / m as f64).floor() as usize).min(bins - 1);
        for &i in &order[start..end] {
            out[i] = bin;
        }
        start = end;
    }
    out
}

/// Plug-in mutual information, in nats, of two discrete codes.
pub fn plugin_mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let na = a.iter().copied().max().map_or(0, |v| v + 1);
    let nb = b.iter().copied().max().map_or(0, |v| v + 1);
    let mut joint = vec![0usize; na * nb];
    let mut pa = vec![0usize; na];
    let mut pb = vec![0usize; nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let c = joint[x * nb + y];
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy * n * n / (pa[x] as f64 * pb[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Plug-in mutual information between each equal-frequency-binned feature
/// and the labels (classes as-is, real labels binned the same way).
pub fn mutual_info_rank(data: &Dataset, bins: Option<usize>) -> Result<ScoreVector> {
    let m = data.n_samples();
    if m < 10 {
        return Err(Error::SampleSize {
            required: 10,
            actual: m,
        });
    }
    let bins = bins.unwrap_or_else(|| default_bins(m));
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    let label_codes: Vec<usize> = match data.labels() {
        Labels::Binary(y) => y.iter().map(|&v| usize::from(v == 1)).collect(),
        Labels::Multiclass(y) => y.clone(),
        Labels::Real(y) => equal_frequency_bins(y, bins),
    };
    let x = data.features();
    let scores = (0..data.n_features())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j).to_vec();
            plugin_mutual_information(&equal_frequency_bins(&col, bins), &label_codes)
        })
        .collect();
    Ok(ScoreVector::new(scores, "mi"))
}
