//! Segments a diseased image against its healthy counterpart and saves the
//! label map.

use contrast_xai::classifier::{train_desk_classifier, LabeledImage, TrainingOptions};
use contrast_xai::segmentation::{gan_augmented_segmentation, SegmentType, SegmentationParams};
use contrast_xai::synthetic::{diseased_dataset, random_dataset, Label, SceneRanges};

fn main() -> contrast_xai::Result<()> {
    let data = random_dataset(1000, 3, 0.5);
    let labeled: Vec<_> = data
        .iter()
        .map(|s| LabeledImage { image: &s.x, positive: s.truth.label == Label::Diseased })
        .collect();
    let (m, _) = train_desk_classifier(&labeled[..800], &labeled[800..], &TrainingOptions::default())?;

    let ranges = SceneRanges::default();
    let sample = &diseased_dataset(1, 5, &ranges)[0];
    for segment_type in [SegmentType::AugmentedGan, SegmentType::Felzenszwalb, SegmentType::Thresholding] {
        let params = SegmentationParams {
            segment_type,
            ..SegmentationParams::for_dims(ranges.size)
        };
        let seg = gan_augmented_segmentation(&sample.x, &sample.x_prime, &m, &params)?;
        println!("{segment_type}: {} segments, trace {:?}", seg.segments.n(), seg.trace);
        for info in seg.segments.segments() {
            println!("  Seg{:02} {:?} {} px", info.id, info.provenance, info.pixel_count);
        }
        let out = std::env::temp_dir().join(format!("segments_{segment_type}.png"));
        seg.segments.save_png(&out)?;
    }
    Ok(())
}
