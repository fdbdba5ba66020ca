//! The forest: `T` parent trees on independent stage-one partitions whose
//! predictions are averaged.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::params::HyperParams;
use crate::partition::root_box;
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::tree::{build_parent, BuildContext, ParentTree};

/// Summary of the data a forest was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingMeta<T> {
    pub n: usize,
    pub d: usize,
    /// `M`: predictions lie in `[-M, M]`.
    pub target_bound: T,
    pub global_mean: T,
    /// Root box of every stage-one partition.
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Forest<T> {
    pub parents: Vec<ParentTree<T>>,
    pub params: HyperParams,
    pub meta: TrainingMeta<T>,
    pub format_version: u32,
}

impl<T: Scalar> Forest<T> {
    /// Trains on the current rayon pool.
    pub fn train(data: &Dataset<T>, params: &HyperParams) -> Result<Self> {
        params.validate()?;
        if data.is_empty() {
            return Err(Error::invalid("training data is empty"));
        }
        let data: Cow<'_, Dataset<T>> = match params.target_bound {
            Some(m) => Cow::Owned(data.clone().with_target_bound(T::lit(m))?),
            None => Cow::Borrowed(data),
        };
        let ctx = BuildContext::new(&data, params)?;
        let root = RandomStream::new(params.master_seed);
        let parents = (0..params.trees)
            .into_par_iter()
            .map(|t| build_parent(&ctx, &root.child(t as u64)))
            .collect::<Result<Vec<_>>>()?;
        let bounds = root_box(&data)?;
        Ok(Forest {
            parents,
            params: params.clone(),
            meta: TrainingMeta {
                n: data.len(),
                d: data.dim(),
                target_bound: ctx.bound,
                global_mean: ctx.global_mean,
                lower: bounds.lower,
                upper: bounds.upper,
            },
            format_version: crate::model::FORMAT_VERSION,
        })
    }

    /// Trains on a dedicated pool of `workers` threads. The result does not
    /// depend on `workers`.
    pub fn train_with_workers(
        data: &Dataset<T>,
        params: &HyperParams,
        workers: usize,
    ) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| Forest::train(data, params))
    }

    pub fn dim(&self) -> usize {
        self.meta.d
    }

    pub fn tree_count(&self) -> usize {
        self.parents.len()
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.meta.d {
            return Err(Error::invalid(format!(
                "point has {} features, model expects {}",
                x.len(),
                self.meta.d
            )));
        }
        Ok(())
    }

    fn average(&self, x: &[T]) -> T {
        let sum = self.parents.iter().fold(T::zero(), |s, p| s + p.predict(x));
        sum / T::from_usize_lossy(self.parents.len())
    }

    pub fn predict(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.average(x))
    }

    /// Predictions of each parent tree at `x`.
    pub fn parent_predictions(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        Ok(self.parents.iter().map(|p| p.predict(x)).collect())
    }

    /// Element-wise `predict`, in input order. A dimension mismatch names
    /// the first offending index.
    pub fn predict_batch<X: AsRef<[T]> + Sync>(&self, xs: &[X]) -> Result<Vec<T>> {
        if let Some(i) = xs.iter().position(|x| x.as_ref().len() != self.meta.d) {
            return Err(Error::invalid(format!(
                "point {i} has {} features, model expects {}",
                xs[i].as_ref().len(),
                self.meta.d
            )));
        }
        Ok(xs.par_iter().map(|x| self.average(x.as_ref())).collect())
    }

    /// Predictions for every row of `data`.
    pub fn predict_dataset(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        if data.dim() != self.meta.d {
            return Err(Error::invalid(format!(
                "data has {} features, model expects {}",
                data.dim(),
                self.meta.d
            )));
        }
        Ok((0..data.len())
            .into_par_iter()
            .map(|i| self.average(data.row(i)))
            .collect())
    }

    /// Test MSE on `data`.
    pub fn evaluate(&self, data: &Dataset<T>) -> Result<T> {
        mse(&self.predict_dataset(data)?, data.targets())
    }

    /// Test MSE of each parent tree on its own.
    pub fn per_tree_mse(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        if data.dim() != self.meta.d {
            return Err(Error::invalid("data dimension does not match the model"));
        }
        self.parents
            .par_iter()
            .map(|p| {
                let preds: Vec<T> = data.rows().map(|x| p.predict(x)).collect();
                mse(&preds, data.targets())
            })
            .collect()
    }

    /// The forest made of the first `t` parents. Equal to training with
    /// `t` trees and the same seed.
    pub fn truncated(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.parents.len() {
            return Err(Error::invalid(format!(
                "cannot keep {t} of {} trees",
                self.parents.len()
            )));
        }
        let mut f = self.clone();
        f.parents.truncate(t);
        f.params.trees = t;
        Ok(f)
    }
}
