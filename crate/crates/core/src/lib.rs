//! Contrastive counterfactual explanations for black-box image classifiers.

pub mod classifier;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod imaging;
pub mod perturbation;
pub mod regression;
pub mod segmentation;
pub mod synthetic;

pub use error::{Error, Result};
