//! The logistic causal equation over segment indicator variables: weighted
//! fractional-response fitting, AIC forward selection, and the causal
//! read-outs (scores, sufficiency, overdetermination, fidelity).

mod causal;
pub mod irls;

pub use causal::{
    classify_causal_roles, fidelity_errors, find_overdetermination, segment_scores,
    Overdetermination,
};
pub use irls::{logit, sigmoid};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities are clamped into this band before entering the likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
}

/// One regression row: segment indicators (`true` = content from `x`) and
/// the classifier probability of the perturbed image.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub bits: Vec<bool>,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Centre predictor columns before fitting; coefficients are unchanged
    /// and the intercept is reported on the uncentred scale.
    pub centering: bool,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            centering: true,
            ridge: 0.0,
        }
    }
}

/// Fitted equation `p = σ(w0 + Σ wi·bi)` over the selected segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub intercept: f64,
    /// Segment id (1-based) to coefficient, selected segments only.
    pub coefficients: BTreeMap<u32, f64>,
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Set when the fallback ridge penalty had to be applied.
    pub regularised: bool,
}

impl RegressionModel {
    /// Model with given parameters and no fit statistics.
    pub fn from_parameters(intercept: f64, coefficients: BTreeMap<u32, f64>) -> Self {
        Self {
            intercept,
            coefficients,
            weights: vec![],
            log_likelihood: f64::NAN,
            aic: f64::NAN,
            n_iterations: 0,
            converged: true,
            regularised: false,
        }
    }

    /// Linear predictor for indicator bits indexed by `id - 1`.
    pub fn linear_predictor(&self, bits: &[bool]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .filter(|(id, _)| bits.get(**id as usize - 1).copied().unwrap_or(false))
                .map(|(_, w)| w)
                .sum::<f64>()
    }

    pub fn predict(&self, bits: &[bool]) -> f64 {
        sigmoid(self.linear_predictor(bits))
    }

    /// Prediction with only the listed segments taking their `x` content.
    pub fn predict_present(&self, present: &[u32]) -> f64 {
        sigmoid(
            self.intercept
                + present
                    .iter()
                    .filter_map(|id| self.coefficients.get(id))
                    .sum::<f64>(),
        )
    }

    pub fn selected(&self) -> Vec<u32> {
        self.coefficients.keys().copied().collect()
    }

    /// `logit(p) = w0 + Σ wi·Segi` with two-decimal coefficients.
    pub fn equation(&self) -> String {
        let mut s = format!("logit(p) = {:.2}", self.intercept);
        for (id, w) in &self.coefficients {
            let sign = if *w < 0.0 { '-' } else { '+' };
            s.push_str(&format!(" {sign} {:.2}*Seg{id:02}", w.abs()));
        }
        s
    }
}

fn check_rows(rows: &[Observation], weights: &[f64]) -> Result<usize> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "regression needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    if weights.len() != rows.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} rows",
            weights.len(),
            rows.len()
        )));
    }
    let n = rows[0].bits.len();
    if rows.iter().any(|r| r.bits.len() != n) {
        return Err(Error::InvalidArgument("rows have differing widths".into()));
    }
    Ok(n)
}

/// Fits the weighted logistic equation over `selected` segment ids.
///
/// Non-convergence is reported through `converged = false`; the model is
/// still returned.
pub fn fit_weighted_logistic(
    rows: &[Observation],
    weights: &[f64],
    selected: &[u32],
    options: &FitOptions,
) -> Result<RegressionModel> {
    let n = check_rows(rows, weights)?;
    for &id in selected {
        if id == 0 || id as usize > n {
            return Err(Error::UnknownSegmentId(id));
        }
    }
    let k = selected.len();
    let column = |r: &Observation, j: usize| f64::from(u8::from(r.bits[selected[j] as usize - 1]));
    let means: Vec<f64> = (0..k)
        .map(|j| {
            if options.centering {
                rows.iter().map(|r| column(r, j)).sum::<f64>() / rows.len() as f64
            } else {
                0.0
            }
        })
        .collect();
    let design = DMatrix::from_fn(rows.len(), k + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            column(&rows[i], j - 1) - means[j - 1]
        }
    });
    let y: Vec<f64> = rows.iter().map(|r| clamp_probability(r.probability)).collect();
    let fit = irls::fit(&design, &y, weights, options.ridge);

    let coefficients: BTreeMap<u32, f64> = selected
        .iter()
        .enumerate()
        .map(|(j, &id)| (id, fit.beta[j + 1]))
        .collect();
    let intercept = fit.beta[0]
        - selected
            .iter()
            .enumerate()
            .map(|(j, _)| fit.beta[j + 1] * means[j])
            .sum::<f64>();
    let params = (k + 1) as f64;
    Ok(RegressionModel {
        intercept,
        coefficients,
        weights: weights.to_vec(),
        log_likelihood: fit.log_likelihood,
        aic: 2.0 * params - 2.0 * fit.log_likelihood,
        n_iterations: fit.iterations,
        converged: fit.converged,
        regularised: fit.ridge > options.ridge,
    })
}

/// Greedy forward selection by AIC.
///
/// Starts from the intercept-only model and repeatedly adds the segment
/// whose inclusion gives the lowest AIC, stopping when no addition lowers
/// it or `max_predictors` are selected. Ties go to the lowest id.
pub fn stepwise_select(
    rows: &[Observation],
    weights: &[f64],
    max_predictors: usize,
    options: &FitOptions,
) -> Result<Vec<u32>> {
    Ok(stepwise_fit(rows, weights, max_predictors, options)?.selected())
}

/// Stepwise selection returning the final fitted model.
pub fn stepwise_fit(
    rows: &[Observation],
    weights: &[f64],
    max_predictors: usize,
    options: &FitOptions,
) -> Result<RegressionModel> {
    let n = check_rows(rows, weights)?;
    let mut selected: Vec<u32> = vec![];
    let mut current = fit_weighted_logistic(rows, weights, &selected, options)?;
    while selected.len() < max_predictors {
        let mut best: Option<RegressionModel> = None;
        for id in 1..=n as u32 {
            if selected.contains(&id) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(id);
            trial.sort_unstable();
            let model = fit_weighted_logistic(rows, weights, &trial, options)?;
            if best.as_ref().map_or(true, |b| model.aic < b.aic) {
                best = Some(model);
            }
        }
        match best {
            Some(m) if m.aic < current.aic => {
                selected = m.selected();
                current = m;
            }
            _ => break,
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_rows(n: usize, f: impl Fn(&[bool]) -> f64) -> Vec<Observation> {
        (0..1u32 << n)
            .map(|m| {
                let bits: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
                let probability = f(&bits);
                Observation { bits, probability }
            })
            .collect()
    }

    #[test]
    fn planted_recovery_with_centering() {
        let rows = all_rows(2, |b| sigmoid(-2.0 + 3.0 * f64::from(u8::from(b[0]))));
        let w = vec![1.0; rows.len()];
        let m = fit_weighted_logistic(&rows, &w, &[1], &FitOptions::default()).unwrap();
        assert!((m.intercept + 2.0).abs() < 1e-6);
        assert!((m.coefficients[&1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn constant_half_gives_zero_model() {
        let rows = all_rows(3, |_| 0.5);
        let w = vec![1.0; rows.len()];
        let m = fit_weighted_logistic(&rows, &w, &[1, 2, 3], &FitOptions::default()).unwrap();
        assert!(m.intercept.abs() < 1e-9);
        assert!(m.coefficients.values().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn zero_signal_selects_nothing() {
        let rows = all_rows(4, |_| 0.3);
        let w = vec![1.0; rows.len()];
        assert!(stepwise_select(&rows, &w, 6, &FitOptions::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn too_few_rows_rejected() {
        let rows = all_rows(1, |_| 0.3);
        assert!(fit_weighted_logistic(&rows[..1], &[1.0], &[], &FitOptions::default()).is_err());
    }

    #[test]
    fn equation_formatting() {
        let m = RegressionModel::from_parameters(-4.9, BTreeMap::from([(9, 11.7), (11, -0.5)]));
        assert_eq!(m.equation(), "logit(p) = -4.90 + 11.70*Seg09 - 0.50*Seg11");
    }
}
