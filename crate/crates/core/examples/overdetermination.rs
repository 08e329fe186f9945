//! Planted classifiers with known causal structure: two individually
//! sufficient regions, and a necessary-but-insufficient region.

use contrast_xai::classifier::PlantedRegionClassifier;
use contrast_xai::explain::{explain_with_segments, ExplainParams};
use contrast_xai::imaging::{BinaryMask, Image, LabelMap};
use contrast_xai::segmentation::{Provenance, SegmentMap, SegmentationTrace};

fn scene(weights: &[f64], intercept: f64) -> contrast_xai::Result<()> {
    let (w, h) = (24 * weights.len(), 24);
    let region = |k: usize| BinaryMask::from_fn(w, h, move |x, y| x / 24 == k && (4..20).contains(&(x % 24)) && (4..20).contains(&y));
    let regions: Vec<_> = (0..weights.len()).map(region).collect();
    let xp = Image::filled(w, h, 0.1);
    let x = Image::from_fn(w, h, |px, py| if regions.iter().any(|r| r.get(px, py)) { 0.9 } else { 0.1 });
    let m = PlantedRegionClassifier::new(&regions, weights, intercept, xp.clone())?;
    let labels = LabelMap::new(
        w,
        h,
        (0..w * h)
            .map(|i| regions.iter().position(|r| r.bits()[i]).map_or(0, |k| k as u32 + 1))
            .collect(),
    )?;
    let segments = SegmentMap::from_labels(labels, Provenance::HighIntensity)?;
    let y = contrast_xai::classifier::predict(&m, &x)?;
    let e = explain_with_segments(&x, &xp, &m, segments, SegmentationTrace::default(), y, &ExplainParams::default())?;
    println!("planted intercept {intercept}, weights {weights:?}");
    print!("{}", e.report());
    println!();
    Ok(())
}

fn main() -> contrast_xai::Result<()> {
    // either region alone clears p > 0.99
    scene(&[11.7, 10.0], -4.9)?;
    // against the 0.99 sufficiency threshold the first region is needed but
    // needs one of the other two
    scene(&[7.0, 4.0, 4.0], -5.0)
}
