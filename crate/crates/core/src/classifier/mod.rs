//! The black-box boundary: anything that maps an image to the probability
//! of the positive class.

mod desk;
mod planted;
mod subprocess;

pub use desk::{
    pooled_features, train_desk_classifier, DeskClassifier, DeskModel, DeskParams, LabeledImage,
    ModelOptions, TrainingOptions, TrainingReport,
};
pub use planted::{PlantedRegionClassifier, PRESENCE_THRESHOLD};
pub use subprocess::{serve, SubprocessClassifier, SubprocessRequest, SubprocessResponse};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Desk,
    Planted,
    Subprocess,
    Function,
}

/// A deterministic image classifier for the binary task `l` vs `l'`.
pub trait Classifier: Send + Sync {
    /// Probability of the positive class `l`.
    fn probability(&self, x: &Image) -> Result<f64>;

    /// Required `(width, height)`, if the model has one.
    fn input_dims(&self) -> Option<(usize, usize)> {
        None
    }

    /// Whether calls may be issued from several threads at once.
    fn concurrency_safe(&self) -> bool {
        true
    }

    fn kind(&self) -> ClassifierKind;

    fn describe(&self) -> String;
}

/// Checked probability: enforces input dimensions and the `[0, 1]` range.
pub fn predict(m: &dyn Classifier, x: &Image) -> Result<f64> {
    if let Some(dims) = m.input_dims() {
        crate::imaging::check_dims(dims, x.dims())?;
    }
    let p = m.probability(x)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "classifier returned probability {p} outside [0,1]"
        )));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    /// The explained class `l`.
    Positive,
    /// The contrast class `l'`.
    Contrast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: ClassLabel,
}

impl Prediction {
    pub fn new(probability: f64, boundary: f64) -> Self {
        Self {
            probability,
            label: if probability >= boundary {
                ClassLabel::Positive
            } else {
                ClassLabel::Contrast
            },
        }
    }
}

pub fn classify(m: &dyn Classifier, x: &Image, boundary: f64) -> Result<Prediction> {
    Ok(Prediction::new(predict(m, x)?, boundary))
}

/// Wraps a closure as a classifier; handy for fixtures.
pub struct FnClassifier<F> {
    f: F,
    description: String,
}

impl<F> FnClassifier<F>
where
    F: Fn(&Image) -> f64 + Send + Sync,
{
    pub fn new(description: impl Into<String>, f: F) -> Self {
        Self {
            f,
            description: description.into(),
        }
    }
}

impl<F> Classifier for FnClassifier<F>
where
    F: Fn(&Image) -> f64 + Send + Sync,
{
    fn probability(&self, x: &Image) -> Result<f64> {
        Ok((self.f)(x))
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Function
    }

    fn describe(&self) -> String {
        self.description.clone()
    }
}

/// Classifier that returns the same probability for every image.
pub fn constant_classifier(p: f64) -> FnClassifier<impl Fn(&Image) -> f64 + Send + Sync> {
    FnClassifier::new(format!("constant {p}"), move |_: &Image| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_logit_is_half() {
        let m = constant_classifier(crate::regression::sigmoid(0.0));
        let p = classify(&m, &Image::filled(2, 2, 0.0), 0.5).unwrap();
        assert_eq!(p.probability, 0.5);
        assert_eq!(p.label, ClassLabel::Positive);
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let m = constant_classifier(1.5);
        assert!(predict(&m, &Image::filled(1, 1, 0.0)).is_err());
    }
}
