//! Performance prediction for cell-based neural architecture search, with
//! training data augmented by the homogeneous forms of each cell.
//!
//! A cell is a DAG whose vertex order is arbitrary apart from the input
//! (first) and output (last) layers. Reordering the interior layers gives
//! `(N_l - 2)!` matrix representations of the same network; all of them
//! share its label. Training a regressor on every form teaches it that the
//! order does not matter.
//!
//! ```
//! use archaug::{augment_all, encode_onehot, Architecture, LayerType, Space};
//!
//! let space = Space::nb101();
//! let c3 = LayerType::Op(1);
//! let cell = Architecture::from_edges(
//!     vec![LayerType::In, c3, c3, LayerType::Null, LayerType::Null, LayerType::Null, LayerType::Out],
//!     &[(0, 1), (1, 2), (2, 6), (0, 6)],
//! )?;
//! let batch = augment_all(&cell, None, 0)?;
//! assert_eq!(batch.count(), 120);
//! assert_eq!(encode_onehot(&cell, &space)?.len(), 51);
//! # Ok::<(), archaug::Error>(())
//! ```

pub mod arch;
pub mod augment;
pub mod cli;
pub mod data_io;
pub mod encode;
pub mod error;
pub mod metrics;
pub mod nb201;
pub mod pipeline;
pub mod regress;
pub mod sample;
pub mod search;
pub mod seed;

pub use arch::{isomorphic, Architecture, LayerType, Mode, Report, Space, Violation};
pub use augment::{augment_all, augmentation_count, canonical_key, label_propagate, permute, AugmentationBatch, InteriorPermutation};
pub use data_io::{gen_synthetic, load_jsonl, split, write_jsonl, BenchRecord, LabelField, ModelFile, SplitSpec};
pub use encode::{encode_hard, encode_onehot, reconstruct, reduce, Encoder, Scheme, Stretch};
pub use error::{Error, Result};
pub use metrics::{kendall_tau, mse, rank_table, EvalReport};
pub use nb201::{op_vocab_201, to_standard_dag, EdgeCell, EdgeOp};
pub use regress::{fit, fit_forest, ForestConfig, ForestModel, Model, ModelKind, TrainingSet};
pub use search::{evolve, query_ground_truth, FnPredictor, Predictor, SearchConfig, SearchResult};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/augmentation.md")]
    mod augmentation {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/nb201.md")]
    mod nb201 {}
    #[doc = include_str!("../../../book/src/regression.md")]
    mod regression {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
