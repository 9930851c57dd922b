//! Multiclass ridge classifier with closed-form leave-one-out alpha selection.
//!
//! Labels are encoded one-vs-rest as +-1 and each class column is fit by
//! ridge regression on standardized features with an unpenalized intercept.
//! Because standardized columns are centered, the intercept decouples and
//! the hat matrix is `1/n + K (K + aI)^-1` on the Gram matrix `K`, which
//! gives exact leave-one-out residuals without refitting:
//! `e_i = a (M y)_i / (a M_ii - 1/n)` with `M = (K + aI)^-1`.

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::scalar::{s, to_f64, Scalar};
use crate::vars::LakeClass;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Fitted ridge model: weights per class over standardized features.
#[derive(Debug, Clone)]
pub struct RidgeModel<S: Scalar> {
    /// (n_features x n_classes).
    pub weights: Array2<S>,
    /// Per-class intercepts (class-column means of the +-1 encoding).
    pub intercepts: Vec<S>,
    pub chosen_alpha: f64,
    /// Training column means.
    pub feature_means: Vec<S>,
    /// Training column scales; zero-variance columns use 1.
    pub feature_scales: Vec<S>,
    /// Summed leave-one-out squared error per grid alpha, for diagnostics.
    pub loo_errors: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

/// Default regularization grid: 10 log-spaced values in [1e-3, 1e3].
pub fn default_alpha_grid() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 9.0)).collect()
}

/// Fits the one-vs-rest ridge classifier, selecting alpha by summed
/// closed-form leave-one-out squared error across class columns.
///
/// Consumes the feature matrix to standardize in place.
pub fn ridge_fit<S: Scalar>(
    mut x: Array2<S>,
    y: &[LakeClass],
    alphas: &[f64],
) -> Result<RidgeModel<S>> {
    let n = x.nrows();
    let p = x.ncols();
    if n != y.len() {
        return Err(Error::Domain("feature/label row mismatch".into()));
    }
    if n < 2 {
        return Err(Error::Domain("ridge_fit needs at least 2 rows".into()));
    }
    let mut present = [false; 4];
    for label in y {
        present[label.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Domain("ridge_fit needs at least 2 classes".into()));
    }
    if alphas.is_empty() || alphas.iter().any(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::Config("alpha grid must be nonempty and positive".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite feature values".into()));
    }

    // Standardize columns in place; zero-variance columns get scale 1.
    let inv_n = s::<S>(1.0 / n as f64);
    let mut means = vec![S::zero(); p];
    let mut scales = vec![S::one(); p];
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().fold(S::zero(), |acc, v| acc + *v) * inv_n;
        let var = col.iter().fold(S::zero(), |acc, v| acc + (*v - mean) * (*v - mean)) * inv_n;
        means[j] = mean;
        if var > S::zero() {
            scales[j] = var.sqrt();
        }
    }
    for j in 0..p {
        let mean = means[j];
        let scale = scales[j];
        x.column_mut(j).mapv_inplace(|v| (v - mean) / scale);
    }

    // Centered +-1 class targets.
    let n_classes = LakeClass::ALL.len();
    let mut targets = Array2::<S>::zeros((n, n_classes));
    let mut intercepts = vec![S::zero(); n_classes];
    for (c, class) in LakeClass::ALL.iter().enumerate() {
        let mut mean = S::zero();
        for (i, label) in y.iter().enumerate() {
            let v = if label == class { S::one() } else { -S::one() };
            targets[[i, c]] = v;
            mean += v;
        }
        mean *= inv_n;
        intercepts[c] = mean;
        for i in 0..n {
            targets[[i, c]] -= mean;
        }
    }

    let gram = x.dot(&x.t());
    let mut best: Option<(usize, f64)> = None;
    let mut loo_errors = Vec::with_capacity(alphas.len());
    let mut best_m: Option<Array2<S>> = None;
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mut ka = gram.clone();
        for i in 0..n {
            ka[[i, i]] += s::<S>(alpha);
        }
        let m = spd_inverse(&ka)?;
        let g = m.dot(&targets); // (n x classes)
        let mut err = 0.0f64;
        for i in 0..n {
            let denom = alpha * to_f64(m[[i, i]]) - 1.0 / n as f64;
            if denom <= 1e-12 {
                err = f64::INFINITY;
                break;
            }
            for c in 0..n_classes {
                let e = alpha * to_f64(g[[i, c]]) / denom;
                err += e * e;
            }
        }
        loo_errors.push(err);
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((ai, err));
            best_m = Some(m);
        }
    }
    let (best_idx, _) = best.expect("nonempty grid");
    let chosen_alpha = alphas[best_idx];
    let m = best_m.expect("kept inverse for best alpha");

    // Dual weights: w_c = X^T (K + aI)^-1 y_c.
    let dual = m.dot(&targets); // (n x classes)
    let weights = x.t().dot(&dual); // (p x classes)

    Ok(RidgeModel {
        weights,
        intercepts,
        chosen_alpha,
        feature_means: means,
        feature_scales: scales,
        loo_errors,
        alpha_grid: alphas.to_vec(),
    })
}

/// Class scores for each row: `standardize(X) . W + b`, evaluated without
/// materializing the standardized matrix.
pub fn ridge_scores<S: Scalar>(x: &Array2<S>, model: &RidgeModel<S>) -> Result<Array2<S>> {
    let p = model.weights.nrows();
    if x.ncols() != p {
        return Err(Error::SchemaMismatch(format!(
            "feature count {} does not match model ({p})",
            x.ncols()
        )));
    }
    let n_classes = model.weights.ncols();
    // Fold standardization into the weights: score = X W' + b' with
    // W'_jc = W_jc / scale_j and b'_c = b_c - sum_j mean_j W'_jc.
    let mut adjusted = model.weights.clone();
    for j in 0..p {
        let inv = S::one() / model.feature_scales[j];
        adjusted.row_mut(j).mapv_inplace(|w| w * inv);
    }
    let mut offsets = vec![S::zero(); n_classes];
    for c in 0..n_classes {
        let mut acc = model.intercepts[c];
        for j in 0..p {
            acc -= model.feature_means[j] * adjusted[[j, c]];
        }
        offsets[c] = acc;
    }
    let mut scores = x.dot(&adjusted);
    for mut row in scores.rows_mut() {
        for c in 0..n_classes {
            row[c] += offsets[c];
        }
    }
    Ok(scores)
}

/// Argmax decision over class scores, ties broken by canonical class order.
pub fn ridge_predict<S: Scalar>(x: &Array2<S>, model: &RidgeModel<S>) -> Result<Vec<LakeClass>> {
    let scores = ridge_scores(x, model)?;
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            LakeClass::ALL[best]
        })
        .collect())
}

/// Serialization form of the fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeModelDto {
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub chosen_alpha: f64,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub loo_errors: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl<S: Scalar> RidgeModel<S> {
    pub fn to_dto(&self) -> RidgeModelDto {
        RidgeModelDto {
            weights: self
                .weights
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|v| to_f64(*v)).collect())
                .collect(),
            intercepts: self.intercepts.iter().map(|v| to_f64(*v)).collect(),
            chosen_alpha: self.chosen_alpha,
            feature_means: self.feature_means.iter().map(|v| to_f64(*v)).collect(),
            feature_scales: self.feature_scales.iter().map(|v| to_f64(*v)).collect(),
            loo_errors: self.loo_errors.clone(),
            alpha_grid: self.alpha_grid.clone(),
        }
    }

    pub fn from_dto(dto: &RidgeModelDto) -> Result<RidgeModel<S>> {
        let p = dto.weights.len();
        let n_classes = LakeClass::ALL.len();
        let mut weights = Array2::<S>::zeros((p, n_classes));
        for (j, row) in dto.weights.iter().enumerate() {
            if row.len() != n_classes {
                return Err(Error::SchemaMismatch("weight row length".into()));
            }
            for (c, v) in row.iter().enumerate() {
                weights[[j, c]] = s(*v);
            }
        }
        Ok(RidgeModel {
            weights,
            intercepts: dto.intercepts.iter().map(|v| s(*v)).collect(),
            chosen_alpha: dto.chosen_alpha,
            feature_means: dto.feature_means.iter().map(|v| s(*v)).collect(),
            feature_scales: dto.feature_scales.iter().map(|v| s(*v)).collect(),
            loo_errors: dto.loo_errors.clone(),
            alpha_grid: dto.alpha_grid.clone(),
        })
    }
}
