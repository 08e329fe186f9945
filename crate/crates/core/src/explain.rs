//! The end-to-end explanation: segmentation, perturbation, counterfactual
//! search, causal regression, overdetermination and fidelity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict, Classifier};
use crate::error::{Error, Result};
use crate::imaging::{render_saliency, Image, SaliencyMap};
use crate::perturbation::{
    enumerate_perturbations, evaluate_dataset, find_counterfactuals, mark_counterfactuals,
    missing_minimality_vectors, Counterfactual, PerturbationRecord, PerturbationVector,
    DEFAULT_SUBSAMPLE_SEED,
};
use crate::regression::{
    classify_causal_roles, fidelity_errors, find_overdetermination, segment_scores, stepwise_fit,
    FitOptions, Observation, Overdetermination, RegressionModel,
};
use crate::segmentation::{
    gan_augmented_segmentation, SegmentInfo, SegmentMap, SegmentationParams, SegmentationTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Infill {
    #[serde(rename = "GAN")]
    Gan,
    #[serde(rename = "black")]
    Black,
}

impl std::str::FromStr for Infill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GAN" => Ok(Self::Gan),
            "black" => Ok(Self::Black),
            other => Err(Error::Config(format!("unknown image_infill {other:?}"))),
        }
    }
}

impl std::fmt::Display for Infill {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gan => "GAN",
            Self::Black => "black",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainParams {
    pub segmentation: SegmentationParams,
    pub max_predictors: usize,
    pub apply_counterfactual_weights: bool,
    pub counterfactual_weight: f64,
    pub binary_decision_boundary: f64,
    pub sufficiency_threshold: f64,
    pub max_segments_in_counterfactual: usize,
    /// Cap on evaluated perturbations; `None` evaluates all of them.
    pub num_samples: Option<usize>,
    pub image_infill: Infill,
    pub centering: bool,
    /// Ridge penalty on the causal regression (0 disables it).
    pub ridge: f64,
    pub subsample_seed: u64,
}

impl Default for ExplainParams {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            max_predictors: 6,
            apply_counterfactual_weights: true,
            counterfactual_weight: 200.0,
            binary_decision_boundary: 0.5,
            sufficiency_threshold: 0.99,
            max_segments_in_counterfactual: 4,
            num_samples: Some(1000),
            image_infill: Infill::Gan,
            centering: true,
            ridge: 0.0,
            subsample_seed: DEFAULT_SUBSAMPLE_SEED,
        }
    }
}

impl ExplainParams {
    /// Defaults with segment sizes scaled for images of `dims`.
    pub fn for_dims(dims: (usize, usize)) -> Self {
        Self {
            segmentation: SegmentationParams::for_dims(dims),
            ..Self::default()
        }
    }

    fn sync_boundary(&self) -> SegmentationParams {
        SegmentationParams {
            binary_decision_boundary: self.binary_decision_boundary,
            ..self.segmentation.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub aic: f64,
    pub max_fidelity_error: Option<f64>,
    pub mean_fidelity_error: Option<f64>,
}

/// `<G, C, r, O, e>` plus the supporting data.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub y: f64,
    pub segments: SegmentMap,
    pub segmentation: SegmentationTrace,
    /// G
    pub scores: BTreeMap<u32, f64>,
    /// C
    pub counterfactuals: Vec<Counterfactual>,
    /// r
    pub regression: RegressionModel,
    /// O
    pub overdetermination: Overdetermination,
    /// e, one per counterfactual
    pub fidelity_errors: Vec<f64>,
    pub necessary_insufficient: Vec<u32>,
    pub goodness_of_fit: GoodnessOfFit,
    pub records: Vec<PerturbationRecord>,
    pub warnings: Vec<String>,
}

/// Explains why `m` puts `x` in the positive class rather than the class of
/// `x_prime`.
pub fn explain(
    x: &Image,
    x_prime: &Image,
    m: &dyn Classifier,
    params: &ExplainParams,
) -> Result<Explanation> {
    x.ensure_same_dims(x_prime)?;
    let boundary = params.binary_decision_boundary;
    let y = predict(m, x)?;
    if y < boundary {
        return Err(Error::NotPositiveClass(y));
    }
    let infill = match params.image_infill {
        Infill::Gan => x_prime.clone(),
        Infill::Black => Image::filled(x.width(), x.height(), 0.0),
    };
    let seg = gan_augmented_segmentation(x, x_prime, m, &params.sync_boundary())?;
    explain_with_segments(x, &infill, m, seg.segments, seg.trace, y, params)
}

/// Runs every stage after segmentation on a fixed segment map.
pub fn explain_with_segments(
    x: &Image,
    infill: &Image,
    m: &dyn Classifier,
    segments: SegmentMap,
    trace: SegmentationTrace,
    y: f64,
    params: &ExplainParams,
) -> Result<Explanation> {
    let boundary = params.binary_decision_boundary;
    let n = segments.n();
    if n == 0 {
        return Err(Error::NoSegmentsFound);
    }
    let labels = segments.labels();
    let vectors = enumerate_perturbations(
        n,
        params.max_segments_in_counterfactual,
        params.num_samples,
        params.subsample_seed,
    );
    let mut records = evaluate_dataset(m, x, infill, labels, &vectors)?;
    let missing = missing_minimality_vectors(&records, y, boundary);
    if !missing.is_empty() {
        records.extend(evaluate_dataset(m, x, infill, labels, &missing)?);
    }
    let counterfactuals = find_counterfactuals(&records, y, boundary)?;
    mark_counterfactuals(&mut records, &counterfactuals);

    let mut rows = vec![Observation {
        bits: PerturbationVector::all_present(n).bits().to_vec(),
        probability: y,
    }];
    let mut weights = vec![1.0];
    for r in &records {
        rows.push(Observation {
            bits: r.vector.bits().to_vec(),
            probability: r.probability,
        });
        weights.push(if r.is_counterfactual && params.apply_counterfactual_weights {
            params.counterfactual_weight
        } else {
            1.0
        });
    }
    let options = FitOptions {
        centering: params.centering,
        ridge: params.ridge,
    };
    let regression = stepwise_fit(&rows, &weights, params.max_predictors, &options)?;
    let scores = segment_scores(&regression);
    let overdetermination = find_overdetermination(&regression, params.sufficiency_threshold);
    let errors = fidelity_errors(&regression, &counterfactuals, n);
    let necessary_insufficient = classify_causal_roles(&regression, params.sufficiency_threshold);

    let mut warnings = vec![];
    if counterfactuals.is_empty() {
        warnings.push(format!(
            "no counterfactual with at most {} replaced segments",
            params.max_segments_in_counterfactual
        ));
    }
    if !regression.converged {
        warnings.push(format!(
            "regression did not converge in {} iterations",
            regression.n_iterations
        ));
    }
    if regression.regularised {
        warnings.push("regression needed ridge regularisation".into());
    }
    let goodness_of_fit = GoodnessOfFit {
        aic: regression.aic,
        max_fidelity_error: errors.iter().copied().reduce(f64::max),
        mean_fidelity_error: (!errors.is_empty())
            .then(|| errors.iter().sum::<f64>() / errors.len() as f64),
    };
    Ok(Explanation {
        y,
        segments,
        segmentation: trace,
        scores,
        counterfactuals,
        regression,
        overdetermination,
        fidelity_errors: errors,
        necessary_insufficient,
        goodness_of_fit,
        records,
        warnings,
    })
}

impl Explanation {
    /// Pixel saliency: each selected segment painted with its score.
    pub fn saliency(&self) -> Result<SaliencyMap> {
        render_saliency(&self.scores, self.segments.labels())
    }

    pub fn to_record(&self) -> ExplanationRecord {
        ExplanationRecord {
            probability: self.y,
            segments: self.segments.segments().to_vec(),
            segmentation: self.segmentation.clone(),
            scores: self
                .scores
                .iter()
                .map(|(id, w)| (segment_name(*id), *w))
                .collect(),
            counterfactuals: self
                .counterfactuals
                .iter()
                .zip(&self.fidelity_errors)
                .map(|(c, e)| CounterfactualRecord {
                    replaced: c.replaced.clone(),
                    probability: c.probability,
                    regression_probability: self
                        .regression
                        .predict(&c.bits(self.segments.n())),
                    fidelity_error: *e,
                })
                .collect(),
            regression: RegressionRecord {
                equation: self.regression.equation(),
                intercept: self.regression.intercept,
                coefficients: self
                    .regression
                    .coefficients
                    .iter()
                    .map(|(id, w)| (segment_name(*id), *w))
                    .collect(),
                log_likelihood: self.regression.log_likelihood,
                iterations: self.regression.n_iterations,
                converged: self.regression.converged,
                regularised: self.regression.regularised,
            },
            overdetermination: self.overdetermination.clone(),
            necessary_insufficient: self.necessary_insufficient.clone(),
            goodness_of_fit: self.goodness_of_fit,
            n_perturbations: self.records.len(),
            warnings: self.warnings.clone(),
        }
    }

    /// Plain-text report listing the equation, counterfactuals with their
    /// fidelity errors, and the causal findings.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Probability of the explained class: {:.4}", self.y);
        let _ = writeln!(
            s,
            "Segments: {} ({} from high differences)",
            self.segments.n(),
            self.segments
                .segments()
                .iter()
                .filter(|i| i.provenance == crate::segmentation::Provenance::HighIntensity)
                .count()
        );
        let _ = writeln!(s, "\nRegression equation:\n  {}", self.regression.equation());
        let _ = writeln!(s, "  AIC {:.3}", self.regression.aic);
        let _ = writeln!(s, "\nSegment scores:");
        if self.scores.is_empty() {
            let _ = writeln!(s, "  none selected");
        }
        for (id, w) in &self.scores {
            let _ = writeln!(s, "  {} {:+.4}", segment_name(*id), w);
        }
        let _ = writeln!(s, "\nCounterfactuals:");
        if self.counterfactuals.is_empty() {
            let _ = writeln!(s, "  none found");
        }
        for (c, e) in self.counterfactuals.iter().zip(&self.fidelity_errors) {
            let names: Vec<String> = c.replaced.iter().map(|id| segment_name(*id)).collect();
            let reg = self.regression.predict(&c.bits(self.segments.n()));
            let _ = writeln!(
                s,
                "  replace {}: classifier {:.2}, regression {:.2}, fidelity error {:.2}",
                names.join(" + "),
                c.probability,
                reg,
                e
            );
        }
        let o = &self.overdetermination;
        let _ = writeln!(
            s,
            "\nSufficient causes (w0 + wi > {:.1}): {}",
            o.logit_threshold,
            list(&o.sufficient)
        );
        if o.overdetermined {
            let _ = writeln!(s, "  overdetermination: {} segments are each sufficient", o.sufficient.len());
        }
        let _ = writeln!(
            s,
            "Necessary but insufficient causes: {}",
            list(&self.necessary_insufficient)
        );
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

fn list(ids: &[u32]) -> String {
    if ids.is_empty() {
        "none".into()
    } else {
        ids.iter().map(|id| segment_name(*id)).collect::<Vec<_>>().join(", ")
    }
}

pub fn segment_name(id: u32) -> String {
    format!("Seg{id:02}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub replaced: Vec<u32>,
    pub probability: f64,
    pub regression_probability: f64,
    pub fidelity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRecord {
    pub equation: String,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub regularised: bool,
}

/// Serialised form of an [`Explanation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub probability: f64,
    pub segments: Vec<SegmentInfo>,
    pub segmentation: SegmentationTrace,
    pub scores: BTreeMap<String, f64>,
    pub counterfactuals: Vec<CounterfactualRecord>,
    pub regression: RegressionRecord,
    pub overdetermination: Overdetermination,
    pub necessary_insufficient: Vec<u32>,
    pub goodness_of_fit: GoodnessOfFit,
    pub n_perturbations: usize,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::PlantedRegionClassifier;
    use crate::imaging::BinaryMask;
    use crate::segmentation::ThresholdMethod;

    fn fixture(weights: &[f64], intercept: f64) -> (Image, Image, PlantedRegionClassifier) {
        let (w, h) = (20 * weights.len(), 20);
        let regions: Vec<BinaryMask> = (0..weights.len())
            .map(|k| BinaryMask::from_fn(w, h, |x, y| x / 20 == k && (4..16).contains(&(x % 20)) && (4..16).contains(&y)))
            .collect();
        let xp = Image::filled(w, h, 0.1);
        let x = Image::from_fn(w, h, |px, py| if regions.iter().any(|r| r.get(px, py)) { 0.9 } else { 0.1 });
        let m = PlantedRegionClassifier::new(&regions, weights, intercept, xp.clone()).unwrap();
        (x, xp, m)
    }

    fn params() -> ExplainParams {
        let mut p = ExplainParams::default();
        p.segmentation.threshold_method = ThresholdMethod::Manual { t_h: 0.5, t_l: 0.2 };
        p.segmentation.min_seg_size = 50;
        p
    }

    #[test]
    fn planted_fixture_is_recovered() {
        let (x, xp, m) = fixture(&[3.0, -2.5, 3.5, 2.0, -3.0, 2.5], 1.0);
        let e = explain(&x, &xp, &m, &params()).unwrap();
        assert_eq!(e.segments.n(), 6);
        assert!((e.regression.intercept - 1.0).abs() < 1e-6);
        for (id, w) in [(1, 3.0), (2, -2.5), (3, 3.5), (4, 2.0), (5, -3.0), (6, 2.5)] {
            assert!((e.scores[&id] - w).abs() < 1e-6);
        }
        assert!(e.fidelity_errors.iter().all(|v| *v < 1e-6));
        assert_eq!(e.counterfactuals.len(), e.fidelity_errors.len());
    }

    #[test]
    fn negative_class_is_rejected() {
        let (x, xp, m) = fixture(&[1.0, 1.0], -5.0);
        assert!(matches!(explain(&x, &xp, &m, &params()), Err(Error::NotPositiveClass(_))));
    }

    #[test]
    fn black_infill_uses_zeros() {
        let (x, xp, m) = fixture(&[3.0, 2.0], -1.0);
        let mut p = params();
        p.image_infill = Infill::Black;
        let e = explain(&x, &xp, &m, &p).unwrap();
        // black patches still deviate from the reference, so nothing flips
        assert!(e.counterfactuals.is_empty());
        assert!(e.records.iter().all(|r| r.probability == e.y));
        assert!(e.warnings.iter().any(|w| w.contains("no counterfactual")));
    }
}
