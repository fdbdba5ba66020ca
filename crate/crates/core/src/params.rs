//! Training configuration and its flat `key = value` text form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leafmodel::ModelSearchSpec;

macro_rules! text_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($name::$variant => $text),+
                })
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::invalid(format!(
                        "unknown {} {other:?} (expected one of {})",
                        stringify!($name),
                        Self::NAMES.join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(
    /// How leaf values are assigned.
    LeafModelKind {
        Constant => "constant",
        Linear => "linear",
        Gaussian => "gaussian",
    }
);

text_enum!(
    /// Value given to stage-two leaves that received no samples.
    VacancyFill {
        Mean => "mean",
        OneNn => "one_nn",
    }
);

text_enum!(
    Geometry {
        AxisParallel => "axis_parallel",
        Oblique => "oblique",
    }
);

text_enum!(
    /// Rule used to pick the best of the candidate child trees.
    Scoring {
        PenalizedRisk => "penalized_risk",
        Holdout => "holdout",
    }
);

text_enum!(
    /// Leaf selection rule inside stage-one cells.
    LeafChoice {
        Adaptive => "adaptive",
        Uniform => "uniform",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Number of parent trees `T`.
    pub trees: usize,
    /// Stage-one cells `m`.
    pub cells: usize,
    /// Candidate child trees per cell `k`.
    pub candidates: usize,
    /// `pro`: stage-two splits per cell sample.
    pub split_fraction: f64,
    /// Sampled points per adaptive leaf vote `t`.
    pub adaptive_votes: usize,
    pub lambda: f64,
    /// Per-cell penalty overrides keyed by stage-one cell id.
    pub cell_lambdas: BTreeMap<usize, f64>,
    pub leaf_model: LeafModelKind,
    pub vacancy_fill: VacancyFill,
    pub geometry: Geometry,
    pub scoring: Scoring,
    pub holdout_fraction: f64,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub leaf_validation_fraction: f64,
    /// Leaves smaller than this use a constant model. `None` picks 10 for
    /// linear leaves and twice the grid size for gaussian leaves.
    pub min_leaf_for_model: Option<usize>,
    pub stage_two_choice: LeafChoice,
    /// Overrides the `M` estimated from the training targets.
    pub target_bound: Option<f64>,
    pub master_seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            trees: 20,
            cells: 20,
            candidates: 10,
            split_fraction: 0.5,
            adaptive_votes: 5,
            lambda: 1e-6,
            cell_lambdas: BTreeMap::new(),
            leaf_model: LeafModelKind::Constant,
            vacancy_fill: VacancyFill::Mean,
            geometry: Geometry::AxisParallel,
            scoring: Scoring::Holdout,
            holdout_fraction: 0.3,
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.01, 0.1, 1.0, 10.0],
            leaf_validation_fraction: 0.3,
            min_leaf_for_model: None,
            stage_two_choice: LeafChoice::Adaptive,
            target_bound: None,
            master_seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("trees", self.trees)?;
        positive("cells", self.cells)?;
        positive("candidates", self.candidates)?;
        positive("adaptive_votes", self.adaptive_votes)?;
        if !(self.split_fraction > 0.0 && self.split_fraction <= 1.0) {
            return Err(Error::invalid("split_fraction must lie in (0, 1]"));
        }
        let positive_real = |name: String, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must be positive and finite"
                )))
            }
        };
        positive_real("lambda".into(), self.lambda)?;
        for (cell, &l) in &self.cell_lambdas {
            positive_real(format!("lambda.{cell}"), l)?;
        }
        if let Some(m) = self.target_bound {
            positive_real("target_bound".into(), m)?;
        }
        for (name, f) in [
            ("holdout_fraction", self.holdout_fraction),
            ("leaf_validation_fraction", self.leaf_validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.vacancy_fill == VacancyFill::OneNn && self.geometry != Geometry::AxisParallel {
            return Err(Error::invalid(
                "one_nn vacancy fill requires axis_parallel geometry",
            ));
        }
        if self.min_leaf_for_model == Some(0) {
            return Err(Error::invalid("min_leaf_for_model must be positive"));
        }
        match self.leaf_model {
            LeafModelKind::Constant => {}
            LeafModelKind::Linear | LeafModelKind::Gaussian => {
                self.search_spec().validate(self.leaf_model)?;
            }
        }
        Ok(())
    }

    /// Penalty for stage-one cell `cell`.
    pub fn lambda_for(&self, cell: usize) -> f64 {
        self.cell_lambdas.get(&cell).copied().unwrap_or(self.lambda)
    }

    pub fn search_spec(&self) -> ModelSearchSpec {
        let gamma_grid = match self.leaf_model {
            LeafModelKind::Gaussian => self.gamma_grid.clone(),
            _ => Vec::new(),
        };
        ModelSearchSpec {
            c_grid: self.c_grid.clone(),
            gamma_grid,
            validation_fraction: self.leaf_validation_fraction,
        }
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf_for_model.unwrap_or(match self.leaf_model {
            LeafModelKind::Constant => 1,
            LeafModelKind::Linear => 10,
            LeafModelKind::Gaussian => 2 * self.c_grid.len() * self.gamma_grid.len(),
        })
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
        }
        fn grid(key: &str, value: &str) -> Result<Vec<f64>> {
            value
                .split([',', ' '])
                .filter(|s| !s.is_empty())
                .map(|s| num(key, s))
                .collect()
        }
        let key = key.trim();
        match key {
            "trees" => self.trees = num(key, value)?,
            "cells" => self.cells = num(key, value)?,
            "candidates" => self.candidates = num(key, value)?,
            "split_fraction" | "pro" => self.split_fraction = num(key, value)?,
            "adaptive_votes" | "votes" => self.adaptive_votes = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "leaf_model" => self.leaf_model = value.parse()?,
            "vacancy_fill" => self.vacancy_fill = value.parse()?,
            "geometry" => self.geometry = value.parse()?,
            "scoring" => self.scoring = value.parse()?,
            "holdout_fraction" => self.holdout_fraction = num(key, value)?,
            "c_grid" => self.c_grid = grid(key, value)?,
            "gamma_grid" => self.gamma_grid = grid(key, value)?,
            "leaf_validation_fraction" => self.leaf_validation_fraction = num(key, value)?,
            "min_leaf_for_model" => {
                self.min_leaf_for_model = match value.trim() {
                    "" | "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "stage_two_choice" => self.stage_two_choice = value.parse()?,
            "target_bound" => {
                self.target_bound = match value.trim() {
                    "" | "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "master_seed" | "seed" => self.master_seed = num(key, value)?,
            _ => match key.strip_prefix("lambda.") {
                Some(cell) => {
                    let cell: usize = num(key, cell)?;
                    self.cell_lambdas.insert(cell, num(key, value)?);
                }
                None => return Err(Error::invalid(format!("unknown config key {key:?}"))),
            },
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut params = HyperParams::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key = value", i + 1))
            })?;
            params
                .set(key, value)
                .map_err(|e| Error::invalid(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(params)
    }

    pub fn to_config_string(&self) -> String {
        let join = |g: &[f64]| {
            g.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        line("trees", self.trees.to_string());
        line("cells", self.cells.to_string());
        line("candidates", self.candidates.to_string());
        line("split_fraction", self.split_fraction.to_string());
        line("adaptive_votes", self.adaptive_votes.to_string());
        line("lambda", self.lambda.to_string());
        for (cell, l) in &self.cell_lambdas {
            line(&format!("lambda.{cell}"), l.to_string());
        }
        line("leaf_model", self.leaf_model.to_string());
        line("vacancy_fill", self.vacancy_fill.to_string());
        line("geometry", self.geometry.to_string());
        line("scoring", self.scoring.to_string());
        line("holdout_fraction", self.holdout_fraction.to_string());
        line("c_grid", join(&self.c_grid));
        line("gamma_grid", join(&self.gamma_grid));
        line(
            "leaf_validation_fraction",
            self.leaf_validation_fraction.to_string(),
        );
        line(
            "min_leaf_for_model",
            opt(self.min_leaf_for_model.map(|v| v.to_string())),
        );
        line("stage_two_choice", self.stage_two_choice.to_string());
        line(
            "target_bound",
            opt(self.target_bound.map(|v| v.to_string())),
        );
        line("master_seed", self.master_seed.to_string());
        out
    }
}
