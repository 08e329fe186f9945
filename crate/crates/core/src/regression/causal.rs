use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{logit, RegressionModel};
use crate::perturbation::Counterfactual;

/// Segment importance scores: the coefficients of the selected segments.
pub fn segment_scores(model: &RegressionModel) -> BTreeMap<u32, f64> {
    model.coefficients.clone()
}

/// `|reg(c) - y_c|` for each counterfactual, where `reg(c)` is the equation
/// evaluated on the counterfactual's indicator vector.
pub fn fidelity_errors(
    model: &RegressionModel,
    counterfactuals: &[Counterfactual],
    n_segments: usize,
) -> Vec<f64> {
    counterfactuals
        .iter()
        .map(|c| (model.predict(&c.bits(n_segments)) - c.probability).abs())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overdetermination {
    /// Segments that alone, from the all-contrast baseline, push the
    /// equation past the sufficiency threshold.
    pub sufficient: Vec<u32>,
    /// Two or more sufficient segments.
    pub overdetermined: bool,
    pub threshold: f64,
    pub logit_threshold: f64,
}

/// Segment `i` is sufficient when `w0 + wi > logit(threshold)`.
pub fn find_overdetermination(model: &RegressionModel, threshold: f64) -> Overdetermination {
    let margin = logit(threshold);
    let sufficient: Vec<u32> = model
        .coefficients
        .iter()
        .filter(|(_, w)| model.intercept + **w > margin)
        .map(|(id, _)| *id)
        .collect();
    Overdetermination {
        overdetermined: sufficient.len() >= 2,
        sufficient,
        threshold,
        logit_threshold: margin,
    }
}

/// Segments that are necessary (no assignment of the other selected
/// segments clears the threshold without them) but not sufficient alone.
pub fn classify_causal_roles(model: &RegressionModel, threshold: f64) -> Vec<u32> {
    let margin = logit(threshold);
    let best_total: f64 = model.coefficients.values().map(|w| w.max(0.0)).sum();
    model
        .coefficients
        .iter()
        .filter(|(_, &w)| {
            let without = model.intercept + best_total - w.max(0.0);
            let necessary = without <= margin;
            let insufficient = model.intercept + w <= margin;
            necessary && insufficient
        })
        .map(|(id, _)| *id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(intercept: f64, coefs: &[(u32, f64)]) -> RegressionModel {
        RegressionModel::from_parameters(intercept, coefs.iter().copied().collect())
    }

    #[test]
    fn overdetermination_needs_two_sufficient() {
        let m = model(-4.9, &[(9, 11.7), (11, 10.0), (3, 1.0)]);
        let o = find_overdetermination(&m, 0.99);
        assert_eq!(o.sufficient, vec![9, 11]);
        assert!(o.overdetermined);

        let single = model(-4.9, &[(9, 11.7), (3, 1.0)]);
        let o = find_overdetermination(&single, 0.99);
        assert_eq!(o.sufficient, vec![9]);
        assert!(!o.overdetermined);

        let none = model(-4.9, &[(9, 2.0)]);
        assert!(find_overdetermination(&none, 0.99).sufficient.is_empty());
    }

    #[test]
    fn logit_of_sufficiency_threshold() {
        let o = find_overdetermination(&model(0.0, &[]), 0.99);
        assert!((o.logit_threshold - 99f64.ln()).abs() < 1e-12);
        assert_eq!(format!("{:.1}", o.logit_threshold), "4.6");
    }

    #[test]
    fn dominant_segment_is_not_insufficient() {
        let m = model(-3.0, &[(1, 12.0), (2, 0.5)]);
        assert!(classify_causal_roles(&m, 0.99).is_empty());
    }
}
