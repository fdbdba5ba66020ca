//! Value assignment for leaves: the leaf mean, or a least-squares SVM with a
//! linear or Gaussian RBF kernel.
//!
//! The LS-SVM dual solves the saddle system
//!
//! ```text
//! [ 0   1^T       ] [b]   [0]
//! [ 1   K + I / C ] [a] = [y]
//! ```
//!
//! and predicts `sum_i a_i K(x, x_i) + b`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::params::LeafModelKind;
use crate::rng::RandomStream;
use crate::scalar::{dot, squared_distance, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafModel<T> {
    Constant {
        value: T,
    },
    Linear {
        weights: Vec<T>,
        bias: T,
    },
    Kernel {
        support_points: Vec<Vec<T>>,
        coefficients: Vec<T>,
        bias: T,
        gamma: T,
    },
}

impl<T: Scalar> LeafModel<T> {
    /// Unclamped model output.
    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        match self {
            LeafModel::Constant { value } => *value,
            LeafModel::Linear { weights, bias } => dot(weights, x) + *bias,
            LeafModel::Kernel {
                support_points,
                coefficients,
                bias,
                gamma,
            } => support_points
                .iter()
                .zip(coefficients)
                .fold(*bias, |acc, (s, &a)| {
                    acc + a * (-*gamma * squared_distance(s, x)).exp()
                }),
        }
    }

    /// Input dimension the model expects, if it constrains one.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            LeafModel::Constant { .. } => None,
            LeafModel::Linear { weights, .. } => Some(weights.len()),
            LeafModel::Kernel { support_points, .. } => support_points.first().map(Vec::len),
        }
    }
}

/// Hyperparameter grids for LS-SVM leaves, searched on a holdout split of
/// each leaf's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSearchSpec {
    pub c_grid: Vec<f64>,
    /// Empty for linear leaves.
    pub gamma_grid: Vec<f64>,
    pub validation_fraction: f64,
}

impl Default for ModelSearchSpec {
    fn default() -> Self {
        ModelSearchSpec {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.01, 0.1, 1.0, 10.0],
            validation_fraction: 0.3,
        }
    }
}

impl ModelSearchSpec {
    pub fn validate(&self, kind: LeafModelKind) -> Result<()> {
        let check = |name: &str, grid: &[f64], required: bool| {
            if required && grid.is_empty() {
                return Err(Error::invalid(format!("{name} must not be empty")));
            }
            if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(format!("{name} values must be positive")));
            }
            Ok(())
        };
        let kernel = kind != LeafModelKind::Constant;
        check("c_grid", &self.c_grid, kernel)?;
        check(
            "gamma_grid",
            &self.gamma_grid,
            kind == LeafModelKind::Gaussian,
        )?;
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// The leaf mean.
pub fn fit_constant<T: Scalar>(targets: &[T]) -> Result<LeafModel<T>> {
    let value = crate::scalar::mean(targets.iter().copied())
        .ok_or_else(|| Error::invalid("cannot fit a constant to an empty leaf"))?;
    Ok(LeafModel::Constant { value })
}

/// The `(n + 1)`-square saddle matrix for a kernel matrix and penalty `c`.
pub fn saddle_matrix<T: Scalar>(kernel: &Matrix<T>, c: T) -> Matrix<T> {
    let n = kernel.size();
    let mut a = Matrix::zeros(n + 1);
    let ridge = T::one() / c;
    for i in 0..n {
        a.set(0, i + 1, T::one());
        a.set(i + 1, 0, T::one());
        for j in 0..n {
            let v = kernel.get(i, j) + if i == j { ridge } else { T::zero() };
            a.set(i + 1, j + 1, v);
        }
    }
    a
}

/// Solves the LS-SVM system, returning `(coefficients, bias)`.
pub fn solve_lssvm<T: Scalar>(kernel: &Matrix<T>, targets: &[T], c: T) -> Result<(Vec<T>, T)> {
    let n = kernel.size();
    if n == 0 || targets.len() != n {
        return Err(Error::invalid(format!(
            "kernel of size {n} with {} targets",
            targets.len()
        )));
    }
    if !kernel.is_symmetric() {
        return Err(Error::invalid("kernel matrix is not symmetric"));
    }
    if !(c > T::zero()) {
        return Err(Error::invalid("C must be positive"));
    }
    let a = saddle_matrix(kernel, c);
    let mut rhs = Vec::with_capacity(n + 1);
    rhs.push(T::zero());
    rhs.extend_from_slice(targets);
    let mut x = linalg::solve(&a, &rhs)?;
    let bias = x.remove(0);
    Ok((x, bias))
}

#[derive(Debug, Clone, Copy)]
enum Kernel<T> {
    Linear,
    Gaussian(T),
}

impl<T: Scalar> Kernel<T> {
    #[inline]
    fn eval(self, a: &[T], b: &[T]) -> T {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Gaussian(g) => (-g * squared_distance(a, b)).exp(),
        }
    }

    fn matrix(self, points: &[&[T]]) -> Matrix<T> {
        let n = points.len();
        let mut k = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(points[i], points[j]);
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        k
    }

    fn fit(self, points: &[&[T]], targets: &[T], c: T) -> Result<LeafModel<T>> {
        let (alpha, bias) = solve_lssvm(&self.matrix(points), targets, c)?;
        Ok(match self {
            Kernel::Linear => {
                let mut weights = vec![T::zero(); points[0].len()];
                for (p, &a) in points.iter().zip(&alpha) {
                    for (w, &v) in weights.iter_mut().zip(p.iter()) {
                        *w += a * v;
                    }
                }
                LeafModel::Linear { weights, bias }
            }
            Kernel::Gaussian(gamma) => LeafModel::Kernel {
                support_points: points.iter().map(|p| p.to_vec()).collect(),
                coefficients: alpha,
                bias,
                gamma,
            },
        })
    }
}

fn sorted(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Fits the model for one leaf from the rows `rows` of `data`.
///
/// Kernel leaves search the grid on a single random split of the leaf
/// (validation share `spec.validation_fraction`), keep the pair with the
/// lowest validation MSE (ties: smaller C, then smaller gamma) and refit on
/// all rows. Leaves with fewer than `min_leaf_for_model` rows, and leaves
/// where every solve fails, get the mean instead.
pub fn fit_leaf<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    kind: LeafModelKind,
    spec: &ModelSearchSpec,
    stream: &mut RandomStream,
    min_leaf_for_model: usize,
    bound: T,
) -> Result<LeafModel<T>> {
    let targets: Vec<T> = rows.iter().map(|&r| data.target(r)).collect();
    let constant = fit_constant(&targets)?;
    if kind == LeafModelKind::Constant || rows.len() < min_leaf_for_model.max(2) {
        return Ok(constant);
    }
    let kernels: Vec<Kernel<T>> = match kind {
        LeafModelKind::Linear => vec![Kernel::Linear],
        _ => sorted(&spec.gamma_grid)
            .into_iter()
            .map(|g| Kernel::Gaussian(T::lit(g)))
            .collect(),
    };

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(stream);
    let n_val =
        ((spec.validation_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
    let (val, train) = order.split_at(n_val);
    let points = |idx: &[usize]| -> Vec<&[T]> { idx.iter().map(|&i| data.row(rows[i])).collect() };
    let train_points = points(train);
    let train_targets: Vec<T> = train.iter().map(|&i| targets[i]).collect();

    let mut best: Option<(T, T, Kernel<T>)> = None;
    for c in sorted(&spec.c_grid) {
        let c = T::lit(c);
        for &kernel in &kernels {
            let Ok(model) = kernel.fit(&train_points, &train_targets, c) else {
                continue;
            };
            let err = val.iter().fold(T::zero(), |acc, &i| {
                let p = clamp(model.eval(data.row(rows[i])), bound);
                acc + (targets[i] - p) * (targets[i] - p)
            }) / T::from_usize_lossy(val.len());
            if !err.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
                best = Some((err, c, kernel));
            }
        }
    }
    let Some((_, c, kernel)) = best else {
        return Ok(constant);
    };
    let all: Vec<&[T]> = rows.iter().map(|&r| data.row(r)).collect();
    Ok(kernel.fit(&all, &targets, c).unwrap_or(constant))
}

#[inline]
pub(crate) fn clamp<T: Scalar>(v: T, bound: T) -> T {
    v.max(-bound).min(bound)
}

/// Model output clamped to `[-bound, bound]`.
pub fn predict_leaf<T: Scalar>(model: &LeafModel<T>, x: &[T], bound: T) -> Result<T> {
    if let Some(d) = model.input_dim() {
        if d != x.len() {
            return Err(Error::invalid(format!(
                "point has dimension {}, model expects {d}",
                x.len()
            )));
        }
    }
    Ok(clamp(model.eval(x), bound))
}
