//! Child trees (one per stage-one cell, best of `k` random candidates) and
//! parent trees (a stage-one partition with one child per cell).

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::Cell;
use crate::leafmodel::{clamp, fit_leaf, LeafModel, ModelSearchSpec};
use crate::metrics::{max_splits, penalized_score};
use crate::params::{HyperParams, Scoring, VacancyFill};
use crate::partition::{build_stage_one, build_stage_two, split_budget, PartitionTree};
use crate::rng::{purpose, RandomStream};
use crate::scalar::{squared_distance, Scalar};

/// Cells with fewer samples than this are scored by penalized risk even in
/// holdout mode.
pub const MIN_HOLDOUT_CELL: usize = 4;

/// Shared, read-only inputs for building the trees of one forest.
#[derive(Debug, Clone)]
pub struct BuildContext<'a, T> {
    pub data: &'a Dataset<T>,
    pub params: &'a HyperParams,
    /// `M`; leaf outputs are clamped to `[-M, M]`.
    pub bound: T,
    /// Value predicted by cells that received no training samples.
    pub global_mean: T,
    leaf_spec: ModelSearchSpec,
    min_leaf: usize,
}

impl<'a, T: Scalar> BuildContext<'a, T> {
    pub fn new(data: &'a Dataset<T>, params: &'a HyperParams) -> Result<Self> {
        params.validate()?;
        let global_mean = data
            .mean_target()
            .ok_or_else(|| Error::invalid("training data is empty"))?;
        Ok(BuildContext {
            data,
            params,
            bound: data.target_bound(),
            global_mean,
            leaf_spec: params.search_spec(),
            min_leaf: params.min_leaf(),
        })
    }

    /// Split budget for a stage-one cell holding `samples` rows.
    pub fn budget(&self, cell_id: usize, samples: usize) -> usize {
        let cap = max_splits(self.bound.as_f64(), self.params.lambda_for(cell_id));
        split_budget(samples, self.params.split_fraction, cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChildTree<T> {
    /// The stage-one cell this tree partitions.
    pub cell: Cell<T>,
    pub partition: PartitionTree<T>,
    /// One model per partition leaf.
    pub leaf_models: Vec<LeafModel<T>>,
    /// Leaves that received no samples and carry a filled-in value.
    pub vacant: Vec<bool>,
    pub splits_used: usize,
    pub score: T,
    pub candidate_index: usize,
    /// Mean target of the samples the leaves were fitted on.
    pub fill_value: T,
    pub bound: T,
}

impl<T: Scalar> ChildTree<T> {
    /// A 0-split tree over a cell without samples.
    pub fn empty(cell: &Cell<T>, value: T, bound: T) -> Self {
        let partition = PartitionTree::new(cell.clone(), geometry_of(cell));
        ChildTree {
            cell: cell.clone(),
            partition,
            leaf_models: vec![LeafModel::Constant { value }],
            vacant: vec![true],
            splits_used: 0,
            score: T::zero(),
            candidate_index: 0,
            fill_value: value,
            bound,
        }
    }

    /// Prediction for a point of the cell, clamped to `[-M, M]`.
    #[inline]
    pub fn predict(&self, x: &[T]) -> T {
        let leaf = self.partition.locate(x);
        clamp(self.leaf_models[leaf].eval(x), self.bound)
    }

    pub fn vacancy_count(&self) -> usize {
        self.vacant.iter().filter(|&&v| v).count()
    }

    /// Fits every leaf on the rows that fall in it. Empty leaves are marked
    /// vacant and filled according to `mode`.
    fn fit_leaves(
        &mut self,
        ctx: &BuildContext<'_, T>,
        members: &[Vec<usize>],
        rows: &[usize],
        stream: &RandomStream,
    ) -> Result<()> {
        self.fill_value = crate::scalar::mean(rows.iter().map(|&r| ctx.data.target(r)))
            .unwrap_or(ctx.global_mean);
        self.leaf_models.clear();
        self.vacant.clear();
        for (leaf, members) in members.iter().enumerate() {
            if members.is_empty() {
                self.leaf_models.push(LeafModel::Constant {
                    value: self.fill_value,
                });
                self.vacant.push(true);
            } else {
                let mut leaf_stream = stream.descend(&[purpose::LEAF, leaf as u64]);
                let model = fit_leaf(
                    ctx.data,
                    members,
                    ctx.params.leaf_model,
                    &ctx.leaf_spec,
                    &mut leaf_stream,
                    ctx.min_leaf,
                    ctx.bound,
                )?;
                self.leaf_models.push(model);
                self.vacant.push(false);
            }
        }
        fill_vacancies(self, ctx.params.vacancy_fill)
    }

    /// Refits the leaf models of the existing partition on `rows`.
    pub fn refit(
        &mut self,
        ctx: &BuildContext<'_, T>,
        rows: &[usize],
        stream: &RandomStream,
    ) -> Result<()> {
        let mut members = vec![Vec::new(); self.partition.leaf_count()];
        for &r in rows {
            members[self.partition.locate(ctx.data.row(r))].push(r);
        }
        self.fit_leaves(ctx, &members, rows, stream)
    }
}

fn geometry_of<T: Scalar>(cell: &Cell<T>) -> crate::params::Geometry {
    if cell.is_box() {
        crate::params::Geometry::AxisParallel
    } else {
        crate::params::Geometry::Oblique
    }
}

/// Grows one candidate on `grow_rows` with the split budget of a cell of
/// `cell_samples` rows and fits its leaves. The score is left at zero.
pub fn build_candidate<T: Scalar>(
    ctx: &BuildContext<'_, T>,
    cell: &Cell<T>,
    cell_samples: usize,
    grow_rows: &[usize],
    candidate_index: usize,
    stream: &RandomStream,
) -> Result<ChildTree<T>> {
    if grow_rows.is_empty() {
        let mut child = ChildTree::empty(cell, ctx.global_mean, ctx.bound);
        child.candidate_index = candidate_index;
        return Ok(child);
    }
    let p = ctx.budget(cell.id, cell_samples);
    let grown = build_stage_two(
        cell,
        ctx.data,
        grow_rows,
        p,
        ctx.params.adaptive_votes,
        ctx.params.stage_two_choice,
        ctx.params.geometry,
        &mut stream.child(purpose::SPLIT),
    )?;
    let mut child = ChildTree {
        cell: cell.clone(),
        partition: grown.tree,
        leaf_models: Vec::new(),
        vacant: Vec::new(),
        splits_used: p,
        score: T::zero(),
        candidate_index,
        fill_value: ctx.global_mean,
        bound: ctx.bound,
    };
    child.fit_leaves(ctx, &grown.members, grow_rows, stream)?;
    Ok(child)
}

/// `lambda * p^2 + (1 / full_n) * sum over rows of (y - g(x))^2`.
pub fn penalized_risk<T: Scalar>(
    child: &ChildTree<T>,
    data: &Dataset<T>,
    rows: &[usize],
    full_n: usize,
    lambda: T,
) -> T {
    let sse = rows.iter().fold(T::zero(), |acc, &r| {
        let e = data.target(r) - child.predict(data.row(r));
        acc + e * e
    });
    penalized_score(sse / T::from_usize_lossy(full_n), child.splits_used, lambda)
}

/// Validation MSE over `rows`; zero when `rows` is empty.
pub fn holdout_error<T: Scalar>(child: &ChildTree<T>, data: &Dataset<T>, rows: &[usize]) -> T {
    if rows.is_empty() {
        return T::zero();
    }
    let sse = rows.iter().fold(T::zero(), |acc, &r| {
        let e = data.target(r) - child.predict(data.row(r));
        acc + e * e
    });
    sse / T::from_usize_lossy(rows.len())
}

/// Scores a fitted candidate. `rows` are the cell's samples in penalized
/// mode and the withheld validation samples in holdout mode.
pub fn score_candidate<T: Scalar>(
    child: &ChildTree<T>,
    data: &Dataset<T>,
    rows: &[usize],
    full_n: usize,
    lambda: T,
    scoring: Scoring,
) -> T {
    match scoring {
        Scoring::PenalizedRisk => penalized_risk(child, data, rows, full_n, lambda),
        Scoring::Holdout => holdout_error(child, data, rows),
    }
}

/// The lowest-scoring candidate; ties go to the smaller candidate index.
pub fn best_scored<T: Scalar>(candidates: Vec<ChildTree<T>>) -> Result<ChildTree<T>> {
    candidates
        .into_iter()
        .reduce(|best, c| {
            if c.score < best.score
                || (c.score == best.score && c.candidate_index < best.candidate_index)
            {
                c
            } else {
                best
            }
        })
        .ok_or_else(|| Error::invalid("no candidates to choose from"))
}

/// Assigns constant values to vacant leaves: the mean of the cell's
/// samples, or the value of the non-vacant leaf whose center is nearest
/// (ties to the smaller leaf id), evaluated at that leaf's own center.
pub fn fill_vacancies<T: Scalar>(child: &mut ChildTree<T>, mode: VacancyFill) -> Result<()> {
    if !child.vacant.iter().any(|&v| v) {
        return Ok(());
    }
    match mode {
        VacancyFill::Mean => {
            for (model, _) in child
                .leaf_models
                .iter_mut()
                .zip(&child.vacant)
                .filter(|(_, &v)| v)
            {
                *model = LeafModel::Constant {
                    value: child.fill_value,
                };
            }
        }
        VacancyFill::OneNn => {
            let mut centers = Vec::with_capacity(child.partition.leaf_count());
            for leaf in child.partition.leaves() {
                let b = leaf.as_box().ok_or_else(|| {
                    Error::invalid("one_nn vacancy fill needs axis-parallel leaves")
                })?;
                centers.push(b.center());
            }
            let donors: Vec<(usize, T)> = (0..centers.len())
                .filter(|&i| !child.vacant[i])
                .map(|i| {
                    (
                        i,
                        clamp(child.leaf_models[i].eval(&centers[i]), child.bound),
                    )
                })
                .collect();
            if donors.is_empty() {
                if child.vacant.len() == 1 {
                    // A cell without samples keeps its single fallback value.
                    child.leaf_models[0] = LeafModel::Constant {
                        value: child.fill_value,
                    };
                    return Ok(());
                }
                return Err(Error::invalid("one_nn vacancy fill has no non-empty leaf"));
            }
            for i in 0..centers.len() {
                if !child.vacant[i] {
                    continue;
                }
                let mut best = (T::infinity(), T::zero());
                for &(d, value) in &donors {
                    let dist = squared_distance(&centers[i], &centers[d]);
                    if dist < best.0 {
                        best = (dist, value);
                    }
                }
                child.leaf_models[i] = LeafModel::Constant { value: best.1 };
            }
        }
    }
    Ok(())
}

/// Builds the best of `k` candidates for the stage-one cell `cell`, whose
/// training samples are `rows`.
///
/// In holdout mode the cell's samples are split once (shared by all
/// candidates); candidates grow and fit on the training part, are scored on
/// the withheld part, and the winner is refitted on every sample of the
/// cell.
pub fn build_child<T: Scalar>(
    ctx: &BuildContext<'_, T>,
    cell: &Cell<T>,
    rows: &[usize],
    stream: &RandomStream,
) -> Result<ChildTree<T>> {
    let params = ctx.params;
    if rows.is_empty() {
        return Ok(ChildTree::empty(cell, ctx.global_mean, ctx.bound));
    }
    let holdout = params.scoring == Scoring::Holdout && rows.len() >= MIN_HOLDOUT_CELL;
    let (grow_rows, val_rows) = if holdout {
        let mut shuffled = rows.to_vec();
        shuffled.shuffle(&mut stream.child(purpose::HOLDOUT));
        let n_val = ((params.holdout_fraction * rows.len() as f64).round() as usize)
            .clamp(1, rows.len() - 1);
        let (val, grow) = shuffled.split_at(n_val);
        (grow.to_vec(), val.to_vec())
    } else {
        (rows.to_vec(), Vec::new())
    };
    let scoring = if holdout {
        Scoring::Holdout
    } else {
        Scoring::PenalizedRisk
    };
    let lambda = T::lit(params.lambda_for(cell.id));
    let full_n = ctx.data.len();
    let candidates = (0..params.candidates)
        .into_par_iter()
        .map(|s| {
            let cand_stream = stream.descend(&[purpose::CANDIDATE, s as u64]);
            let mut child = build_candidate(ctx, cell, rows.len(), &grow_rows, s, &cand_stream)?;
            let score_rows = if holdout { &val_rows } else { &grow_rows };
            child.score = score_candidate(&child, ctx.data, score_rows, full_n, lambda, scoring);
            Ok(child)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = best_scored(candidates)?;
    if holdout {
        let cand_stream = stream.descend(&[purpose::CANDIDATE, best.candidate_index as u64]);
        best.refit(ctx, rows, &cand_stream)?;
    }
    Ok(best)
}

/// A stage-one partition with one child tree per cell. Its prediction is
/// the sum of the zero-extended children, i.e. the value of the child whose
/// cell contains the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ParentTree<T> {
    pub stage_one: PartitionTree<T>,
    pub children: Vec<ChildTree<T>>,
}

impl<T: Scalar> ParentTree<T> {
    /// Points outside the root box are clamped onto it first.
    pub fn predict(&self, x: &[T]) -> T {
        let root = self.stage_one.root().bounds();
        if root.contains(x) {
            self.children[self.stage_one.locate(x)].predict(x)
        } else {
            let x = root.clamp(x);
            self.children[self.stage_one.locate(&x)].predict(&x)
        }
    }

    /// Zero-extended value of child `j` at `x`: its prediction when `x`
    /// lies in cell `j`, otherwise zero.
    pub fn child_contribution(&self, j: usize, x: &[T]) -> T {
        let x = self.stage_one.root().bounds().clamp(x);
        if self.stage_one.locate(&x) == j {
            self.children[j].predict(&x)
        } else {
            T::zero()
        }
    }

    /// `sum_j lambda_j p_j^2`, the squared split count of the parent.
    pub fn weighted_split_norm(&self, params: &HyperParams) -> f64 {
        self.children
            .iter()
            .enumerate()
            .map(|(j, c)| params.lambda_for(j) * (c.splits_used as f64).powi(2))
            .sum()
    }

    pub fn leaf_count(&self) -> usize {
        self.children.iter().map(|c| c.partition.leaf_count()).sum()
    }
}

/// Builds parent tree `tree_index` from the stream rooted at that index.
pub fn build_parent<T: Scalar>(
    ctx: &BuildContext<'_, T>,
    stream: &RandomStream,
) -> Result<ParentTree<T>> {
    let params = ctx.params;
    let stage_one = build_stage_one(
        ctx.data,
        params.cells,
        params.adaptive_votes,
        params.geometry,
        &mut stream.child(purpose::STAGE_ONE),
    )?;
    let children = stage_one
        .members
        .par_iter()
        .enumerate()
        .map(|(j, rows)| {
            let cell = &stage_one.tree.leaves()[j];
            build_child(ctx, cell, rows, &stream.descend(&[purpose::CELL, j as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParentTree {
        stage_one: stage_one.tree,
        children,
    })
}
