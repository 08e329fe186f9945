//! Full explanation of one synthetic diseased image: equation, counterfactuals,
//! fidelity and causal findings, with artifacts written to a directory.
//!
//! cargo run --release --example explain_image -- /tmp/explanation

use contrast_xai::classifier::{train_desk_classifier, LabeledImage, TrainingOptions};
use contrast_xai::cli::write_explanation;
use contrast_xai::explain::{explain, ExplainParams};
use contrast_xai::synthetic::{diseased_dataset, random_dataset, Label, SceneRanges};

fn main() -> contrast_xai::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "explanation_out".into());
    let data = random_dataset(2000, 11, 0.5);
    let labeled: Vec<_> = data
        .iter()
        .map(|s| LabeledImage { image: &s.x, positive: s.truth.label == Label::Diseased })
        .collect();
    let (m, report) = train_desk_classifier(&labeled[..1600], &labeled[1600..], &TrainingOptions::default())?;
    println!("desk classifier validation accuracy {:.3}\n", report.validation_accuracy);

    let ranges = SceneRanges::default();
    let sample = &diseased_dataset(3, 7, &ranges)[2];
    let e = explain(&sample.x, &sample.x_prime, &m, &ExplainParams::for_dims(ranges.size))?;
    print!("{}", e.report());
    write_explanation(&e, &sample.x, out.as_ref())?;
    println!("\nartifacts in {out}");
    Ok(())
}
