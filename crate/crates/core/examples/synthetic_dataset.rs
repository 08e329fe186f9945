//! Generates a small synthetic dataset and writes it to a directory.
//!
//! cargo run --release --example synthetic_dataset -- /tmp/shapes

use contrast_xai::synthetic::{export_dataset, random_dataset, Label, SceneRanges};

fn main() -> contrast_xai::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic_out".into());
    let samples = random_dataset(24, 7, 0.5);
    let diseased = samples.iter().filter(|s| s.truth.label == Label::Diseased).count();
    println!("{} samples, {diseased} diseased", samples.len());
    for s in samples.iter().filter(|s| s.truth.label == Label::Diseased).take(3) {
        let names: Vec<_> = s
            .truth
            .targets
            .iter()
            .map(|t| format!("{} ({} px)", t.name, t.mask.count()))
            .collect();
        println!("sample {}: {}", s.id, names.join(", "));
    }
    export_dataset(&samples, &out, 7, 0.5, &SceneRanges::default())?;
    println!("written to {out}");
    Ok(())
}
