//! Argument structure mining for threaded online discussions.
//!
//! The crate covers the full pipeline:
//!
//! * [`corpus`] — annotated thread data model, a line-oriented file format,
//!   invariant validation, corpus statistics, and seeded train/test splits.
//! * [`textproc`] — sentence segmentation, tokenization, and markdown
//!   blockquote extraction shared by every other module.
//! * [`candidates`] — constrained enumeration of within-post and cross-post
//!   candidate pairs plus the pruning filters (distance windows, salience-based
//!   target selection, source/target exclusivity).
//! * [`features`] — sparse feature vectors, vocabularies, component and pair
//!   feature extraction, and discourse-label one-hot encoding.
//! * [`models`] — a multinomial logistic regression trainer, gradient-boosted
//!   decision stumps, threshold tuning, external score tables, and the OR
//!   ensemble combiner.
//! * [`salience`] — distant supervision for "which sentences get quoted",
//!   used to rank candidate targets.
//! * [`distant`] — weakly labeled corpus builders over comment dumps
//!   (first-person opinion markers and quote/response pairs).
//! * [`pipeline`] — experiment configuration, end-to-end runs, evaluation
//!   metrics, and machine/human readable reports.

pub mod candidates;
pub mod corpus;
pub mod distant;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod salience;
pub mod textproc;
