//! Two-stage best-scored random forests for regression.

pub mod data;
pub mod error;
pub mod forest;
pub mod geometry;
pub mod leafmodel;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod params;
pub mod partition;
pub mod rng;
pub mod scalar;
pub mod tree;

pub use data::{load_csv, read_csv, train_test_split, Dataset, Sample};
pub use error::{Error, Result};
pub use forest::{Forest, TrainingMeta};
pub use metrics::{max_splits, mse, penalized_score};
pub use params::{Geometry, HyperParams, LeafChoice, LeafModelKind, Scoring, VacancyFill};
pub use rng::RandomStream;
pub use scalar::{Scalar, ScalarKind};
pub use tree::{ChildTree, ParentTree};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Forest64 = Forest<f64>;
pub type Forest32 = Forest<f32>;
