//! Clustering-based pool active learning.
//!
//! The pipeline clusters the unlabeled pool ([`clustering`]), splits a label
//! budget across clusters and picks samples near cluster centers and on the
//! boundaries between adjacent clusters ([`selection`]), spreading picks out
//! with niching ([`diversity`]). [`evaluation`] simulates the annotator and
//! scores the result with a k-NN classifier; [`cli`] drives benchmark runs.

pub mod cli;
pub mod clustering;
pub mod data;
pub mod diversity;
pub mod error;
pub mod evaluation;
pub mod selection;
pub mod synthetic;
