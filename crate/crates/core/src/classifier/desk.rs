//! A small trainable classifier over average-pooled pixel features.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierKind};
use crate::error::{Error, Result};
use crate::imaging::io::{read_json, write_json};
use crate::imaging::Image;
use crate::regression::{irls, sigmoid};

/// Average intensity over a `grid x grid` partition of the image; cell
/// `(r, c)` spans rows `floor(r*H/grid)..floor((r+1)*H/grid)`.
pub fn pooled_features(x: &Image, grid: usize) -> Vec<f64> {
    let (w, h) = x.dims();
    let mut out = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        let (y0, y1) = (r * h / grid, (r + 1) * h / grid);
        for c in 0..grid {
            let (x0, x1) = (c * w / grid, (c + 1) * w / grid);
            let mut sum = 0.0;
            for y in y0..y1 {
                for xx in x0..x1 {
                    sum += f64::from(x.get(xx, y));
                }
            }
            let n = ((y1 - y0) * (x1 - x0)).max(1);
            out.push(sum / n as f64);
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledImage<'a> {
    pub image: &'a Image,
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelOptions {
    Logistic { ridge: f64 },
    Mlp { hidden: usize, epochs: usize, learning_rate: f64, weight_decay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    pub grid: usize,
    pub model: ModelOptions,
    pub seed: u64,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            grid: 16,
            model: ModelOptions::Logistic { ridge: 1.0 },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub n_train: usize,
    pub n_valid: usize,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub iterations: usize,
    pub options: TrainingOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeskParams {
    Logistic {
        bias: f64,
        weights: Vec<f64>,
    },
    Mlp {
        hidden: usize,
        /// `hidden x features`, row-major.
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    },
}

/// Serialisable desk model: input size, pooling grid, feature
/// standardisation and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskModel {
    pub width: usize,
    pub height: usize,
    pub grid: usize,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub params: DeskParams,
}

impl DeskModel {
    fn standardise(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn logit_of_features(&self, f: &[f64]) -> f64 {
        match &self.params {
            DeskParams::Logistic { bias, weights } => {
                bias + weights.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()
            }
            DeskParams::Mlp {
                hidden,
                w1,
                b1,
                w2,
                b2,
            } => {
                let d = f.len();
                let mut z = *b2;
                for j in 0..*hidden {
                    let row = &w1[j * d..(j + 1) * d];
                    let a = b1[j] + row.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
                    z += w2[j] * a.tanh();
                }
                z
            }
        }
    }

    pub fn probability(&self, x: &Image) -> f64 {
        let f = self.standardise(&pooled_features(x, self.grid));
        sigmoid(self.logit_of_features(&f))
    }
}

/// Trained desk classifier; concurrency-safe and deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskClassifier {
    model: DeskModel,
}

impl DeskClassifier {
    pub fn from_model(model: DeskModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &DeskModel {
        &self.model
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(&self.model, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self {
            model: read_json(path)?,
        })
    }
}

impl Classifier for DeskClassifier {
    fn probability(&self, x: &Image) -> Result<f64> {
        Ok(self.model.probability(x))
    }

    fn input_dims(&self) -> Option<(usize, usize)> {
        Some((self.model.width, self.model.height))
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Desk
    }

    fn describe(&self) -> String {
        let kind = match self.model.params {
            DeskParams::Logistic { .. } => "logistic".to_string(),
            DeskParams::Mlp { hidden, .. } => format!("mlp({hidden})"),
        };
        format!(
            "desk {kind} over {g}x{g} pooled features",
            g = self.model.grid
        )
    }
}

fn features(data: &[LabeledImage<'_>], grid: usize) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    data.par_iter().map(|d| pooled_features(d.image, grid)).collect()
}

fn train_mlp(
    x: &[Vec<f64>],
    y: &[f64],
    hidden: usize,
    epochs: usize,
    lr: f64,
    decay: f64,
    seed: u64,
) -> DeskParams {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init1 = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("finite");
    let init2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("finite");
    let mut params: Vec<f64> = Vec::with_capacity(hidden * d + 2 * hidden + 1);
    params.extend((0..hidden * d).map(|_| init1.sample(&mut rng)));
    params.extend(std::iter::repeat(0.0).take(hidden));
    params.extend((0..hidden).map(|_| init2.sample(&mut rng)));
    params.push(0.0);
    let (o_b1, o_w2, o_b2) = (hidden * d, hidden * d + hidden, hidden * d + 2 * hidden);

    // Adam
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut act = vec![0.0; hidden];
    for t in 1..=epochs {
        let mut grad = vec![0.0; params.len()];
        for (xi, &yi) in x.iter().zip(y) {
            let mut z = params[o_b2];
            for j in 0..hidden {
                let row = &params[j * d..(j + 1) * d];
                let a = params[o_b1 + j] + row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
                act[j] = a.tanh();
                z += params[o_w2 + j] * act[j];
            }
            let err = sigmoid(z) - yi;
            grad[o_b2] += err;
            for j in 0..hidden {
                grad[o_w2 + j] += err * act[j];
                let back = err * params[o_w2 + j] * (1.0 - act[j] * act[j]);
                grad[o_b1 + j] += back;
                for (g, xv) in grad[j * d..(j + 1) * d].iter_mut().zip(xi) {
                    *g += back * xv;
                }
            }
        }
        for (k, g) in grad.iter_mut().enumerate() {
            *g /= n;
            if k < o_b1 || (o_w2..o_b2).contains(&k) {
                *g += decay * params[k];
            }
        }
        let bc1 = 1.0 - f64::powi(beta1, t as i32);
        let bc2 = 1.0 - f64::powi(beta2, t as i32);
        for k in 0..params.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            params[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
        }
    }
    DeskParams::Mlp {
        hidden,
        w1: params[..o_b1].to_vec(),
        b1: params[o_b1..o_w2].to_vec(),
        w2: params[o_w2..o_b2].to_vec(),
        b2: params[o_b2],
    }
}

fn accuracy(model: &DeskModel, feats: &[Vec<f64>], data: &[LabeledImage<'_>]) -> f64 {
    let correct = feats
        .iter()
        .zip(data)
        .filter(|(f, d)| {
            let p = sigmoid(model.logit_of_features(&model.standardise(f)));
            (p >= 0.5) == d.positive
        })
        .count();
    correct as f64 / data.len() as f64
}

/// Trains the desk classifier and reports validation accuracy.
pub fn train_desk_classifier(
    train: &[LabeledImage<'_>],
    valid: &[LabeledImage<'_>],
    options: &TrainingOptions,
) -> Result<(DeskClassifier, TrainingReport)> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation splits must be non-empty".into(),
        ));
    }
    let positives = train.iter().filter(|d| d.positive).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::SingleClassTraining);
    }
    let dims = train[0].image.dims();
    for d in train.iter().chain(valid) {
        crate::imaging::check_dims(dims, d.image.dims())?;
    }
    let grid = options.grid.max(1);
    let train_feats = features(train, grid);
    let dim = grid * grid;
    let n = train_feats.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|k| train_feats.iter().map(|f| f[k]).sum::<f64>() / n)
        .collect();
    let scale: Vec<f64> = (0..dim)
        .map(|k| {
            let var = train_feats.iter().map(|f| (f[k] - mean[k]).powi(2)).sum::<f64>() / n;
            if var > 1e-12 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let standardised: Vec<Vec<f64>> = train_feats
        .iter()
        .map(|f| {
            f.iter()
                .zip(mean.iter().zip(&scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let y: Vec<f64> = train.iter().map(|d| f64::from(u8::from(d.positive))).collect();

    let (params, iterations) = match options.model {
        ModelOptions::Logistic { ridge } => {
            let design = DMatrix::from_fn(standardised.len(), dim + 1, |i, j| {
                if j == 0 {
                    1.0
                } else {
                    standardised[i][j - 1]
                }
            });
            let fit = irls::fit(&design, &y, &vec![1.0; y.len()], ridge);
            (
                DeskParams::Logistic {
                    bias: fit.beta[0],
                    weights: fit.beta[1..].to_vec(),
                },
                fit.iterations,
            )
        }
        ModelOptions::Mlp {
            hidden,
            epochs,
            learning_rate,
            weight_decay,
        } => (
            train_mlp(
                &standardised,
                &y,
                hidden,
                epochs,
                learning_rate,
                weight_decay,
                options.seed,
            ),
            epochs,
        ),
    };
    let model = DeskModel {
        width: dims.0,
        height: dims.1,
        grid,
        mean,
        scale,
        params,
    };
    let valid_feats = features(valid, grid);
    let report = TrainingReport {
        n_train: train.len(),
        n_valid: valid.len(),
        train_accuracy: accuracy(&model, &train_feats, train),
        validation_accuracy: accuracy(&model, &valid_feats, valid),
        iterations,
        options: *options,
    };
    Ok((DeskClassifier { model }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Vec<(Image, bool)> {
        // positive images are bright on the left half
        (0..n)
            .map(|i| {
                let positive = i % 2 == 0;
                let jitter = (i % 7) as f32 * 0.01;
                let img = Image::from_fn(8, 8, |x, _| {
                    if positive == (x < 4) {
                        0.8 + jitter
                    } else {
                        0.1 + jitter
                    }
                });
                (img, positive)
            })
            .collect()
    }

    fn labeled(v: &[(Image, bool)]) -> Vec<LabeledImage<'_>> {
        v.iter()
            .map(|(image, positive)| LabeledImage {
                image,
                positive: *positive,
            })
            .collect()
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let train = toy(40);
        let valid = toy(10);
        let opts = TrainingOptions {
            grid: 4,
            ..TrainingOptions::default()
        };
        let (_, report) = train_desk_classifier(&labeled(&train), &labeled(&valid), &opts).unwrap();
        assert_eq!(report.validation_accuracy, 1.0);
    }

    #[test]
    fn mlp_is_seed_deterministic() {
        let train = toy(30);
        let opts = TrainingOptions {
            grid: 4,
            model: ModelOptions::Mlp {
                hidden: 4,
                epochs: 50,
                learning_rate: 0.05,
                weight_decay: 1e-4,
            },
            seed: 9,
        };
        let (a, ra) = train_desk_classifier(&labeled(&train), &labeled(&train), &opts).unwrap();
        let (b, _) = train_desk_classifier(&labeled(&train), &labeled(&train), &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.validation_accuracy, 1.0);
    }

    #[test]
    fn single_class_rejected() {
        let train: Vec<(Image, bool)> = toy(6).into_iter().map(|(i, _)| (i, true)).collect();
        assert!(matches!(
            train_desk_classifier(&labeled(&train), &labeled(&train), &TrainingOptions::default()),
            Err(Error::SingleClassTraining)
        ));
    }

    #[test]
    fn pooling_partitions_non_divisible_sizes() {
        let img = Image::filled(10, 7, 0.5);
        let f = pooled_features(&img, 3);
        assert_eq!(f.len(), 9);
        assert!(f.iter().all(|v| (v - 0.5).abs() < 1e-7));
    }
}
