//! Run configuration. Keys follow the reference parameter listing verbatim,
//! so a listing such as
//!
//! ```text
//! max_predictors = 6
//! image_infill ='GAN'
//! image_classes =['normal','effusion']
//! ```
//!
//! parses as-is. JSON objects with the same keys are accepted too.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::classifier::{ModelOptions, TrainingOptions};
use crate::error::{Error, Result};
use crate::evaluation::{SaliencyMode, DEFAULT_IOU_PERCENT, DEFAULT_SWEEP};
use crate::explain::{ExplainParams, Infill};
use crate::imaging::FelzenszwalbParams;
use crate::perturbation::DEFAULT_SUBSAMPLE_SEED;
use crate::segmentation::{
    scale_for_area, SegmentType, SegmentationParams, ThresholdMethod, DEFAULT_MAX_SEGMENTS,
    REFERENCE_MIN_SEG_SIZE, REFERENCE_SEG_SIZE_INCREMENT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    Manual,
    MultiOtsu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeskModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case_study: String,
    pub max_predictors: usize,
    pub num_samples: usize,
    pub regression_type: String,
    pub logistic_regularise: bool,
    pub score_type: String,
    pub apply_counterfactual_weights: bool,
    pub counterfactual_weight: f64,
    pub binary_decision_boundary: f64,
    pub no_polynomimals_no_interactions: bool,
    pub interactions_only: bool,
    pub no_intercept: bool,
    pub centering: bool,
    pub include_features: bool,
    pub include_features_list: Vec<Value>,
    pub sufficiency_threshold: f64,
    pub image_infill: Infill,
    pub image_all_segments: bool,
    pub threshold_method: ThresholdChoice,
    pub image_use_old_synthetic: bool,
    pub image_counterfactual_interactions: bool,
    pub image_segment_type: SegmentType,
    pub max_segments_in_counterfactual: usize,
    #[serde(rename = "min_segs_created_for_Augmented_GAN")]
    pub min_segs_created_for_augmented_gan: usize,
    /// Absent: 250 px scaled from 256x256 to the image area.
    pub min_seg_size: Option<usize>,
    /// Absent: 25 px scaled like `min_seg_size`.
    pub min_seg_increment: Option<usize>,
    pub image_classes: Vec<String>,

    pub seed: u64,
    pub threshold_high: Option<f64>,
    pub threshold_low: Option<f64>,
    pub erosion_radius: usize,
    pub max_segments: usize,
    pub felzenszwalb_scale: f64,
    pub felzenszwalb_sigma: f64,
    pub felzenszwalb_min_size: usize,
    pub regularise_lambda: f64,
    pub subsample_seed: u64,
    pub classifier_timeout_secs: f64,

    pub n_images: usize,
    pub disease_ratio: f64,
    pub image_size: usize,
    pub train_fraction: f64,
    pub desk_model: DeskModelKind,
    pub desk_grid: usize,
    pub desk_ridge: f64,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub mlp_weight_decay: f64,

    pub saliency_mode: SaliencyMode,
    pub iou_threshold: u32,
    pub sweep_thresholds: Vec<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fz = FelzenszwalbParams::default();
        Self {
            case_study: "Synthetic".into(),
            max_predictors: 6,
            num_samples: 1000,
            regression_type: "logistic".into(),
            logistic_regularise: false,
            score_type: "aic".into(),
            apply_counterfactual_weights: true,
            counterfactual_weight: 200.0,
            binary_decision_boundary: 0.5,
            no_polynomimals_no_interactions: true,
            interactions_only: true,
            no_intercept: false,
            centering: true,
            include_features: false,
            include_features_list: vec![],
            sufficiency_threshold: 0.99,
            image_infill: Infill::Gan,
            image_all_segments: false,
            threshold_method: ThresholdChoice::MultiOtsu,
            image_use_old_synthetic: false,
            image_counterfactual_interactions: false,
            image_segment_type: SegmentType::AugmentedGan,
            max_segments_in_counterfactual: 4,
            min_segs_created_for_augmented_gan: 4,
            min_seg_size: None,
            min_seg_increment: None,
            image_classes: vec!["healthy".into(), "diseased".into()],
            seed: 0,
            threshold_high: None,
            threshold_low: None,
            erosion_radius: 1,
            max_segments: DEFAULT_MAX_SEGMENTS,
            felzenszwalb_scale: fz.scale,
            felzenszwalb_sigma: fz.sigma,
            felzenszwalb_min_size: fz.min_size,
            regularise_lambda: 1.0,
            subsample_seed: DEFAULT_SUBSAMPLE_SEED,
            classifier_timeout_secs: 30.0,
            n_images: 100,
            disease_ratio: 0.5,
            image_size: 128,
            train_fraction: 0.8,
            desk_model: DeskModelKind::Logistic,
            desk_grid: 16,
            desk_ridge: 1.0,
            mlp_hidden: 16,
            mlp_epochs: 300,
            mlp_learning_rate: 0.01,
            mlp_weight_decay: 1e-4,
            saliency_mode: SaliencyMode::Positive,
            iou_threshold: DEFAULT_IOU_PERCENT,
            sweep_thresholds: DEFAULT_SWEEP.to_vec(),
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(bad(msg()))
    }
}

impl RunConfig {
    /// Reads JSON when the first non-blank character is `{`, key=value lines
    /// otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| bad(e.to_string()))?
        } else {
            Value::Object(parse_key_values(text)?)
        };
        Self::from_value(value)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let Value::Object(mut base) = serde_json::to_value(self)? else {
            unreachable!("config serialises to an object")
        };
        let extra = parse_key_values(&overrides.join("\n"))?;
        base.extend(extra);
        Self::from_value(Value::Object(base))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save_resolved(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        check(self.regression_type == "logistic", || {
            format!("regression_type {:?} is not supported; use 'logistic'", self.regression_type)
        })?;
        check(self.score_type == "aic", || {
            format!("score_type {:?} is not supported; use 'aic'", self.score_type)
        })?;
        check(self.no_polynomimals_no_interactions, || {
            "polynomial and interaction terms are not supported".into()
        })?;
        check(!self.no_intercept, || "the intercept cannot be removed".into())?;
        check(!self.include_features && self.include_features_list.is_empty(), || {
            "include_features is not supported".into()
        })?;
        check(!self.image_all_segments, || "image_all_segments is not supported".into())?;
        check(!self.image_use_old_synthetic, || {
            "image_use_old_synthetic is not supported".into()
        })?;
        check(!self.image_counterfactual_interactions, || {
            "image_counterfactual_interactions is not supported".into()
        })?;
        check(self.max_predictors >= 1, || "max_predictors must be at least 1".into())?;
        check(self.num_samples >= 1, || "num_samples must be at least 1".into())?;
        check(self.counterfactual_weight > 0.0, || "counterfactual_weight must be positive".into())?;
        check(in_open_unit(self.binary_decision_boundary), || {
            "binary_decision_boundary must lie in (0, 1)".into()
        })?;
        check(in_open_unit(self.sufficiency_threshold), || {
            "sufficiency_threshold must lie in (0, 1)".into()
        })?;
        check((1..=10).contains(&self.max_segments_in_counterfactual), || {
            "max_segments_in_counterfactual must lie in 1..=10".into()
        })?;
        check(self.min_seg_size != Some(0) && self.min_seg_increment != Some(0), || {
            "min_seg_size and min_seg_increment must be at least 1".into()
        })?;
        check(self.image_classes.len() == 2, || "image_classes needs exactly two names".into())?;
        check(self.max_segments >= 1, || "max_segments must be at least 1".into())?;
        check(self.felzenszwalb_scale > 0.0 && self.felzenszwalb_sigma >= 0.0, || {
            "felzenszwalb_scale must be positive and felzenszwalb_sigma non-negative".into()
        })?;
        check(self.regularise_lambda >= 0.0, || "regularise_lambda must be non-negative".into())?;
        check(self.classifier_timeout_secs > 0.0, || {
            "classifier_timeout_secs must be positive".into()
        })?;
        check((0.0..=1.0).contains(&self.disease_ratio), || "disease_ratio must lie in [0, 1]".into())?;
        check(self.image_size >= 16, || "image_size must be at least 16".into())?;
        check(self.train_fraction > 0.0 && self.train_fraction < 1.0, || {
            "train_fraction must lie in (0, 1)".into()
        })?;
        check(self.desk_grid >= 1 && self.desk_grid <= self.image_size, || {
            "desk_grid must lie in 1..=image_size".into()
        })?;
        check(self.desk_ridge >= 0.0 && self.mlp_weight_decay >= 0.0, || {
            "desk_ridge and mlp_weight_decay must be non-negative".into()
        })?;
        check(self.mlp_hidden >= 1 && self.mlp_epochs >= 1 && self.mlp_learning_rate > 0.0, || {
            "mlp_hidden, mlp_epochs and mlp_learning_rate must be positive".into()
        })?;
        check(self.iou_threshold < 100, || "iou_threshold must lie in 0..100".into())?;
        check(self.sweep_thresholds.iter().all(|&p| p < 100), || {
            "sweep_thresholds must lie in 0..100".into()
        })?;
        match self.threshold_method {
            ThresholdChoice::Manual => {
                let (Some(h), Some(l)) = (self.threshold_high, self.threshold_low) else {
                    return Err(bad("threshold_method 'manual' needs threshold_high and threshold_low"));
                };
                check((0.0..=1.0).contains(&l) && (0.0..=1.0).contains(&h) && l <= h, || {
                    format!("manual thresholds need 0 <= threshold_low <= threshold_high <= 1, got ({h}, {l})")
                })?;
            }
            ThresholdChoice::MultiOtsu => {}
        }
        Ok(())
    }

    pub fn segmentation_params(&self, dims: (usize, usize)) -> SegmentationParams {
        SegmentationParams {
            segment_type: self.image_segment_type,
            threshold_method: match self.threshold_method {
                ThresholdChoice::MultiOtsu => ThresholdMethod::MultiOtsu,
                ThresholdChoice::Manual => ThresholdMethod::Manual {
                    t_h: self.threshold_high.unwrap_or(1.0),
                    t_l: self.threshold_low.unwrap_or(0.0),
                },
            },
            min_num_s_l: self.min_segs_created_for_augmented_gan,
            min_seg_size: self
                .min_seg_size
                .unwrap_or_else(|| scale_for_area(REFERENCE_MIN_SEG_SIZE, dims)),
            seg_size_increment: self
                .min_seg_increment
                .unwrap_or_else(|| scale_for_area(REFERENCE_SEG_SIZE_INCREMENT, dims)),
            felzenszwalb: FelzenszwalbParams {
                scale: self.felzenszwalb_scale,
                sigma: self.felzenszwalb_sigma,
                min_size: self.felzenszwalb_min_size,
            },
            erosion_radius: self.erosion_radius,
            max_segments: self.max_segments,
            binary_decision_boundary: self.binary_decision_boundary,
        }
    }

    pub fn explain_params(&self, dims: (usize, usize)) -> ExplainParams {
        ExplainParams {
            segmentation: self.segmentation_params(dims),
            max_predictors: self.max_predictors,
            apply_counterfactual_weights: self.apply_counterfactual_weights,
            counterfactual_weight: self.counterfactual_weight,
            binary_decision_boundary: self.binary_decision_boundary,
            sufficiency_threshold: self.sufficiency_threshold,
            max_segments_in_counterfactual: self.max_segments_in_counterfactual,
            num_samples: Some(self.num_samples),
            image_infill: self.image_infill,
            centering: self.centering,
            ridge: if self.logistic_regularise { self.regularise_lambda } else { 0.0 },
            subsample_seed: self.subsample_seed,
        }
    }

    pub fn training_options(&self) -> TrainingOptions {
        TrainingOptions {
            grid: self.desk_grid,
            model: match self.desk_model {
                DeskModelKind::Logistic => ModelOptions::Logistic { ridge: self.desk_ridge },
                DeskModelKind::Mlp => ModelOptions::Mlp {
                    hidden: self.mlp_hidden,
                    epochs: self.mlp_epochs,
                    learning_rate: self.mlp_learning_rate,
                    weight_decay: self.mlp_weight_decay,
                },
            },
            seed: self.seed,
        }
    }
}

fn in_open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Map<String, Value>> {
    let mut map = Map::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key = value, got {raw:?}", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(bad(format!("line {}: empty key", lineno + 1)));
        }
        let value = parse_value(value.trim()).map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        if map.insert(key.to_string(), value).is_some() {
            return Err(bad(format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_value(s: &str) -> std::result::Result<Value, String> {
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or_else(|| format!("unterminated list {s:?}"))?;
        return split_list(inner)
            .into_iter()
            .map(|item| parse_value(item.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Value::Array);
    }
    for q in ['\'', '"'] {
        if let Some(inner) = s.strip_prefix(q) {
            let inner = inner.strip_suffix(q).ok_or_else(|| format!("unterminated string {s:?}"))?;
            return Ok(Value::String(inner.to_string()));
        }
    }
    Ok(match s {
        "True" | "true" => Value::Bool(true),
        "False" | "false" => Value::Bool(false),
        "None" | "null" => Value::Null,
        _ => {
            if let Ok(i) = s.parse::<i64>() {
                Value::Number(i.into())
            } else if let Some(n) = s.parse::<f64>().ok().and_then(Number::from_f64) {
                Value::Number(n)
            } else {
                Value::String(s.to_string())
            }
        }
    })
}

fn split_list(inner: &str) -> Vec<&str> {
    if inner.trim().is_empty() {
        return vec![];
    }
    let mut parts = vec![];
    let (mut start, mut quote) = (0, None);
    for (i, c) in inner.char_indices() {
        match (quote, c) {
            (None, '\'' | '"') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, ',') => {
                parts.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&inner[start..]);
    parts
}
