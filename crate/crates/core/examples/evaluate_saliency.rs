//! Scores explanation saliency with the pointing game and IoU against the
//! annotated targets, next to a random-saliency baseline.

use contrast_xai::classifier::{train_desk_classifier, LabeledImage, TrainingOptions};
use contrast_xai::evaluation::{
    aggregate, pointing_game, random_saliency, threshold_sweep, AnnotatedTargets, SaliencyMode,
    DEFAULT_SWEEP,
};
use contrast_xai::explain::{explain, ExplainParams};
use contrast_xai::synthetic::{diseased_dataset, random_dataset, Label, SceneRanges};

fn main() -> contrast_xai::Result<()> {
    let data = random_dataset(2000, 11, 0.5);
    let labeled: Vec<_> = data
        .iter()
        .map(|s| LabeledImage { image: &s.x, positive: s.truth.label == Label::Diseased })
        .collect();
    let (m, _) = train_desk_classifier(&labeled[..1600], &labeled[1600..], &TrainingOptions::default())?;
    let ranges = SceneRanges::default();
    let params = ExplainParams::for_dims(ranges.size);
    let (mut ours, mut random) = (vec![], vec![]);
    for s in diseased_dataset(30, 7, &ranges) {
        let Ok(e) = explain(&s.x, &s.x_prime, &m, &params) else { continue };
        let targets = AnnotatedTargets::from_targets(&s.truth.targets)?;
        let sal = e.saliency()?;
        ours.push(pointing_game(&sal, &targets)?.score);
        random.push(pointing_game(&random_saliency(128, 128, s.id as u64), &targets)?.score);
        if ours.len() == 1 {
            if let Ok(sweep) = threshold_sweep(&sal, &targets, &DEFAULT_SWEEP, SaliencyMode::Positive) {
                println!("IoU sweep on the first image: {sweep:?}");
            }
        }
    }
    let (a, b) = (aggregate(&ours)?, aggregate(&random)?);
    println!("explanations: pointing game {:.3} +- {:.3} (n = {})", a.mean, a.ci95, a.n);
    println!("random:       pointing game {:.3} +- {:.3}", b.mean, b.ci95);
    Ok(())
}
