mod common;

use common::sine_data;
use tbrf::leafmodel::LeafModel;
use tbrf::tree::{build_parent, BuildContext};
use tbrf::{Dataset, Forest, Geometry, HyperParams, RandomStream, Scoring, VacancyFill};

fn leaf_value(m: &LeafModel<f64>) -> f64 {
    match m {
        LeafModel::Constant { value } => *value,
        _ => panic!("expected a constant leaf"),
    }
}

/// Constant leaves hold the mean of the training targets inside the leaf,
/// recomputed here by testing each sample against the leaf geometry.
#[test]
fn constant_leaves_are_cell_means() {
    let data = sine_data(600, 0.1, 1);
    for scoring in [Scoring::PenalizedRisk, Scoring::Holdout] {
        let params = HyperParams {
            cells: 4,
            candidates: 3,
            scoring,
            ..HyperParams::default()
        };
        let ctx = BuildContext::new(&data, &params).unwrap();
        let parent = build_parent(&ctx, &RandomStream::new(3)).unwrap();
        for (j, child) in parent.children.iter().enumerate() {
            let cell = &parent.stage_one.leaves()[j];
            let cell_rows: Vec<usize> = (0..data.len())
                .filter(|&r| cell.contains(data.row(r)))
                .collect();
            if cell_rows.is_empty() {
                continue;
            }
            let cell_mean =
                cell_rows.iter().map(|&r| data.target(r)).sum::<f64>() / cell_rows.len() as f64;
            for (leaf, model) in child.partition.leaves().iter().zip(&child.leaf_models) {
                let ys: Vec<f64> = cell_rows
                    .iter()
                    .filter(|&&r| leaf.contains(data.row(r)))
                    .map(|&r| data.target(r))
                    .collect();
                let expected = if ys.is_empty() {
                    cell_mean
                } else {
                    ys.iter().sum::<f64>() / ys.len() as f64
                };
                assert!((leaf_value(model) - expected).abs() <= 1e-12);
            }
        }
    }
}

/// Two cells with one split each on a step function: the model is a
/// staircase whose steps are the means between the cut coordinates.
#[test]
fn staircase_from_cut_coordinates() {
    let xs: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| (4.0 * x).floor()).collect();
    let data = Dataset::new(xs.clone(), ys.clone(), 1).unwrap();
    let params = HyperParams {
        trees: 1,
        cells: 2,
        candidates: 1,
        // M = 4, so lambda = 9 caps every cell at one split.
        lambda: 9.0,
        scoring: Scoring::PenalizedRisk,
        ..HyperParams::default()
    };
    let forest = Forest::train(&data, &params).unwrap();
    let parent = &forest.parents[0];
    let mut cuts = vec![parent.stage_one.root().bounds().lower[0]];
    for child in &parent.children {
        assert_eq!(child.splits_used, 1);
        for leaf in child.partition.leaves() {
            cuts.push(leaf.bounds().upper[0]);
        }
    }
    cuts.sort_by(f64::total_cmp);
    assert_eq!(cuts.len(), 5);
    for w in cuts.windows(2) {
        let inside: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .filter(|(&x, _)| x > w[0] && x <= w[1] || (x == w[0] && w[0] == cuts[0]))
            .map(|(_, &y)| y)
            .collect();
        if inside.is_empty() {
            continue;
        }
        let mean = inside.iter().sum::<f64>() / inside.len() as f64;
        let mid = 0.5 * (w[0] + w[1]);
        assert!((forest.predict(&[mid]).unwrap() - mean).abs() <= 1e-12);
    }
}

#[test]
fn every_point_gets_a_finite_bounded_prediction() {
    // Few samples and many cells leave cells and leaves empty.
    let data = sine_data(40, 0.2, 5);
    let mut s = RandomStream::new(6);
    let points: Vec<[f64; 1]> = (0..100_000).map(|_| [-1.0 + 12.0 * s.uniform()]).collect();
    for (fill, geometry) in [
        (VacancyFill::Mean, Geometry::AxisParallel),
        (VacancyFill::OneNn, Geometry::AxisParallel),
        (VacancyFill::Mean, Geometry::Oblique),
    ] {
        let params = HyperParams {
            trees: 3,
            cells: 15,
            split_fraction: 1.0,
            vacancy_fill: fill,
            geometry,
            ..HyperParams::default()
        };
        let forest = Forest::train(&data, &params).unwrap();
        let vacant: usize = forest
            .parents
            .iter()
            .flat_map(|p| &p.children)
            .map(|c| c.vacancy_count())
            .sum();
        assert!(vacant > 0);
        let bound = forest.meta.target_bound;
        for y in forest.predict_batch(&points).unwrap() {
            assert!(y.is_finite() && y.abs() <= bound);
        }
    }
}

#[test]
fn one_nearest_fill_copies_a_neighbour() {
    let data = sine_data(30, 0.2, 8);
    let params = HyperParams {
        trees: 1,
        cells: 3,
        split_fraction: 1.0,
        vacancy_fill: VacancyFill::OneNn,
        ..HyperParams::default()
    };
    let forest = Forest::train(&data, &params).unwrap();
    for child in &forest.parents[0].children {
        let filled: Vec<f64> = child
            .leaf_models
            .iter()
            .zip(&child.vacant)
            .filter(|(_, &v)| !v)
            .map(|(m, _)| leaf_value(m))
            .collect();
        for (m, &v) in child.leaf_models.iter().zip(&child.vacant) {
            if v && !filled.is_empty() {
                assert!(filled.contains(&leaf_value(m)));
            }
        }
    }
}

#[test]
fn parents_do_not_depend_on_worker_count() {
    let data = sine_data(1500, 0.2, 9);
    let params = HyperParams {
        trees: 4,
        master_seed: 77,
        ..HyperParams::default()
    };
    let one = Forest::train_with_workers(&data, &params, 1).unwrap();
    let three = Forest::train_with_workers(&data, &params, 3).unwrap();
    assert_eq!(one.parents, three.parents);
}
