//! Guaranteed feature relevance for shallow MLP classifiers.
//!
//! For a trained network, a pattern and a target interval on one output,
//! each feature's range is partitioned by set inversion into values that
//! certainly keep the output in the target, values that certainly do not,
//! and an undecided remainder no wider than the requested accuracy. The
//! partition reduces to a relevance score in `[0, 1]`.
//!
//! ```
//! use sivia_relevance::{feature_relevance, Activation, Layer, MlpModel, OutputSpec};
//!
//! let hidden = Layer::new(1, 2, vec![3.0, 0.0], vec![0.0], Activation::Tanh).unwrap();
//! let out = Layer::new(2, 1, vec![4.0, -4.0], vec![0.0, 0.0], Activation::Logistic).unwrap();
//! let model = MlpModel::with_numbered_classes(vec![hidden, out]).unwrap();
//!
//! let r = feature_relevance(&model, &[0.5, 0.0], 0, OutputSpec::desired(0, 0.2), 1e-3).unwrap();
//! assert!(r.score.value > 0.0 && r.score.value < 1.0);
//! ```

pub mod data;
pub mod error;
pub mod interval;
pub mod mlp;
pub mod relevance;
pub mod render;
pub mod sivia;
pub mod train;

pub use data::{augment_random_features, load_csv, load_iris, load_mnist, load_model, save_model, Dataset};
pub use error::{Error, Result};
pub use interval::{Interval, IvBox};
pub use mlp::{Activation, Layer, MlpModel};
pub use relevance::{
    build_query, class_relevance_map, feature_relevance, pattern_relevance, query_feature,
    relevance_map, relevance_score, Family, FeaturePartition, FeatureQuery, OutputMode, OutputSpec,
    RelevanceMap, RelevanceScore, Rule,
};
pub use sivia::{sivia, BoxLabel, Paving};
pub use train::{evaluate, train, Loss, TrainConfig};
