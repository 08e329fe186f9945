use super::{Classifier, ClassifierKind};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Image};
use crate::regression::sigmoid;

/// Mean absolute deviation from the reference above which a region counts
/// as present.
pub const PRESENCE_THRESHOLD: f64 = 0.05;

/// Analytic classifier `σ(intercept + Σ wi·presence_i(x))`, where region `i`
/// is present when `x` deviates from `reference` on it by more than
/// [`PRESENCE_THRESHOLD`] on average.
#[derive(Debug, Clone)]
pub struct PlantedRegionClassifier {
    regions: Vec<Vec<usize>>,
    weights: Vec<f64>,
    intercept: f64,
    reference: Image,
}

impl PlantedRegionClassifier {
    pub fn new(
        regions: &[BinaryMask],
        weights: &[f64],
        intercept: f64,
        reference: Image,
    ) -> Result<Self> {
        if regions.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} regions but {} weights",
                regions.len(),
                weights.len()
            )));
        }
        for (i, r) in regions.iter().enumerate() {
            crate::imaging::check_dims(reference.dims(), r.dims())?;
            if r.is_empty() {
                return Err(Error::InvalidArgument(format!("region {i} is empty")));
            }
            for (j, other) in regions.iter().enumerate().skip(i + 1) {
                if r.intersection_count(other) > 0 {
                    return Err(Error::OverlappingRegions(i, j));
                }
            }
        }
        let regions = regions
            .iter()
            .map(|r| {
                r.bits()
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| **b)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Ok(Self {
            regions,
            weights: weights.to_vec(),
            intercept,
            reference,
        })
    }

    pub fn presence(&self, x: &Image) -> Vec<bool> {
        self.regions
            .iter()
            .map(|idx| {
                let total: f64 = idx
                    .iter()
                    .map(|&i| (f64::from(x.pixels()[i]) - f64::from(self.reference.pixels()[i])).abs())
                    .sum();
                total / idx.len() as f64 > PRESENCE_THRESHOLD
            })
            .collect()
    }

    pub fn logit(&self, x: &Image) -> f64 {
        self.intercept
            + self
                .presence(x)
                .iter()
                .zip(&self.weights)
                .filter(|(p, _)| **p)
                .map(|(_, w)| w)
                .sum::<f64>()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Classifier for PlantedRegionClassifier {
    fn probability(&self, x: &Image) -> Result<f64> {
        Ok(sigmoid(self.logit(x)))
    }

    fn input_dims(&self) -> Option<(usize, usize)> {
        Some(self.reference.dims())
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Planted
    }

    fn describe(&self) -> String {
        format!(
            "planted logistic over {} regions, intercept {}",
            self.regions.len(),
            self.intercept
        )
    }
}
