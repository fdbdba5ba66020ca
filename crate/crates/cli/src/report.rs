use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use tbrf::{Error, HyperParams};

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub params: HyperParams,
    pub train_time_seconds: f64,
    pub test_mse: f64,
    pub per_tree_mse: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

const COLUMNS: &[&str] = &[
    "trees",
    "cells",
    "candidates",
    "split_fraction",
    "adaptive_votes",
    "lambda",
    "leaf_model",
    "geometry",
    "scoring",
    "seed",
    "n_train",
    "n_test",
    "train_time_seconds",
    "test_mse",
];

impl RunReport {
    pub fn key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "train_time_seconds = {}", self.train_time_seconds);
        let _ = writeln!(s, "test_mse = {}", self.test_mse);
        let per_tree: Vec<String> = self.per_tree_mse.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "per_tree_mse = {}", per_tree.join(","));
        let _ = writeln!(s, "n_train = {}", self.n_train);
        let _ = writeln!(s, "n_test = {}", self.n_test);
        let _ = writeln!(s, "seed = {}", self.seed);
        s.push_str(&self.params.to_config_string());
        s
    }

    pub fn csv_header() -> String {
        COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let p = &self.params;
        [
            p.trees.to_string(),
            p.cells.to_string(),
            p.candidates.to_string(),
            p.split_fraction.to_string(),
            p.adaptive_votes.to_string(),
            p.lambda.to_string(),
            p.leaf_model.to_string(),
            p.geometry.to_string(),
            p.scoring.to_string(),
            self.seed.to_string(),
            self.n_train.to_string(),
            self.n_test.to_string(),
            self.train_time_seconds.to_string(),
            self.test_mse.to_string(),
        ]
        .join(",")
    }

    /// Appends the CSV row, writing the header first if the file is new or
    /// empty.
    pub fn append_csv(&self, path: &Path) -> Result<(), Error> {
        let io = |e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if f.metadata().map_err(io)?.len() == 0 {
            writeln!(f, "{}", Self::csv_header()).map_err(io)?;
        }
        writeln!(f, "{}", self.csv_row()).map_err(io)
    }
}
