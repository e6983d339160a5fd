//! Software fault prediction on CK metrics.
//!
//! The pipeline deduplicates and imputes a corpus, scales it, splits it into
//! stratified folds, selects features, oversamples the minority class with
//! ADASYN, tunes a classifier and reports confusion-matrix metrics.

pub mod classifiers;
pub mod cli;
pub mod corpus;
pub mod crossval;
pub mod evaluation;
pub mod feature_selection;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod resample;
pub mod search;
pub mod seed;
