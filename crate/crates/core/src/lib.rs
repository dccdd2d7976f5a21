//! Supervised feature selection driven by the Hilbert-Schmidt Independence
//! Criterion (HSIC).
//!
//! The crate is organized bottom-up:
//!
//! - [`kernels`]: data and label kernel matrices, median heuristic, and the
//!   additive per-feature distance bookkeeping used during elimination.
//! - [`estimator`]: unbiased and biased HSIC, the U-statistic enumeration
//!   oracle, asymptotic variance, MMD / unnormalized KTA, significance tests.
//! - [`selection`]: backward elimination (BAHSIC) and forward selection
//!   (FOHSIC) producing a full relevance ordering.
//! - [`data`]: datasets, CSV I/O, z-scoring and seeded synthetic generators.
//! - [`baselines`]: Pearson correlation and binned mutual information rankers.
//! - [`bench`]: the median-rank benchmark protocol on synthetic data.
//!
//! ```
//! use hsic_select::data::synth_multiclass;
//! use hsic_select::selection::{bahsic, SelectionConfig};
//!
//! let data = synth_multiclass(80, 7).unwrap();
//! let ranking = bahsic(&data, &SelectionConfig::default()).unwrap();
//! assert_eq!(ranking.ordering.len(), 22);
//! println!("top two: {:?}", ranking.select_top(2).unwrap());
//! ```

pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod rng;
pub mod selection;

pub use error::{Error, Result};
