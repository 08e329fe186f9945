//! Trains the desk classifier, saves it and checks the reloaded copy agrees.

use contrast_xai::classifier::{
    train_desk_classifier, Classifier, DeskClassifier, LabeledImage, ModelOptions, TrainingOptions,
};
use contrast_xai::synthetic::{random_dataset, Label, Sample};

fn labeled(samples: &[Sample]) -> Vec<LabeledImage<'_>> {
    samples
        .iter()
        .map(|s| LabeledImage {
            image: &s.x,
            positive: s.truth.label == Label::Diseased,
        })
        .collect()
}

fn main() -> contrast_xai::Result<()> {
    let data = random_dataset(1500, 11, 0.5);
    let (train, valid) = data.split_at(1200);
    for model in [
        ModelOptions::Logistic { ridge: 1.0 },
        ModelOptions::Mlp { hidden: 16, epochs: 200, learning_rate: 0.01, weight_decay: 1e-4 },
    ] {
        let options = TrainingOptions { model, ..TrainingOptions::default() };
        let (m, report) = train_desk_classifier(&labeled(train), &labeled(valid), &options)?;
        println!(
            "{model:?}: train {:.3}, validation {:.3}",
            report.train_accuracy, report.validation_accuracy
        );
        let path = std::env::temp_dir().join("desk_model.json");
        m.save(&path)?;
        let back = DeskClassifier::load(&path)?;
        for s in valid.iter().take(5) {
            assert_eq!(m.probability(&s.x)?, back.probability(&s.x)?);
        }
    }
    Ok(())
}
