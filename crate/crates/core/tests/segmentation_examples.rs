//! Paired segmentation and synthetic data on concrete scenes.

use contrast_xai::classifier::{constant_classifier, PlantedRegionClassifier};
use contrast_xai::imaging::{BinaryMask, Image};
use contrast_xai::segmentation::{
    create_high_intensity_segments, gan_augmented_segmentation, SegmentationParams, ThresholdMethod,
};
use contrast_xai::synthetic::{
    diseased_dataset, generate_pair, ground_truth_label, random_dataset, Label, SceneRanges,
};
use contrast_xai::Error;

#[test]
fn only_large_blobs_become_high_intensity_segments() {
    let mask = BinaryMask::from_fn(64, 64, |x, y| {
        (x < 10 && y < 10) || ((30..50).contains(&x) && (30..50).contains(&y))
    });
    let labels = create_high_intensity_segments(&mask, 250);
    assert_eq!(labels.max_label(), 1);
    assert_eq!(labels.label_sizes()[1], 400);
    assert!(labels.get(35, 35) == 1 && labels.get(5, 5) == 0);
}

#[test]
fn square_and_triangle_are_covered_by_segments() {
    let m = constant_classifier(0.9);
    for s in diseased_dataset(12, 7, &SceneRanges::default()) {
        let seg = gan_augmented_segmentation(&s.x, &s.x_prime, &m, &SegmentationParams::for_dims(s.x.dims()))
            .unwrap();
        let labels = seg.segments.labels();
        for t in s.truth.targets.iter().filter(|t| t.name != "thin_small_ellipse") {
            let best = (1..=labels.max_label())
                .map(|id| labels.mask_of(id).intersection_count(&t.mask))
                .max()
                .unwrap_or(0);
            let frac = best as f64 / t.mask.count() as f64;
            assert!(frac >= 0.8, "sample {} target {} covered {frac:.2}", s.id, t.name);
        }
    }
}

#[test]
fn identical_images_yield_no_segments() {
    let s = &diseased_dataset(1, 3, &SceneRanges::default())[0];
    let m = constant_classifier(0.9);
    let r = gan_augmented_segmentation(&s.x, &s.x, &m, &SegmentationParams::for_dims(s.x.dims()));
    assert!(matches!(r, Err(Error::NoSegmentsFound)));
}

#[test]
fn segmentation_is_deterministic_and_well_formed() {
    let s = &diseased_dataset(1, 5, &SceneRanges::default())[0];
    let m = constant_classifier(0.9);
    let params = SegmentationParams::for_dims(s.x.dims());
    let a = gan_augmented_segmentation(&s.x, &s.x_prime, &m, &params).unwrap();
    let b = gan_augmented_segmentation(&s.x, &s.x_prime, &m, &params).unwrap();
    assert_eq!(a, b);
    let sizes = a.segments.labels().label_sizes();
    assert_eq!(sizes.len() as u32, a.segments.labels().max_label() + 1);
    for info in a.segments.segments() {
        assert!(sizes[info.id as usize] >= info.min_seg_size.max(1));
    }
}

#[test]
fn single_flipping_segment_stops_escalation() {
    let x_prime = Image::filled(64, 64, 0.2);
    let block = |x: usize, y: usize| (8..28).contains(&x) && (8..28).contains(&y);
    let x = Image::from_fn(64, 64, |px, py| if block(px, py) { 0.9 } else { 0.2 });
    let region = BinaryMask::from_fn(64, 64, block);
    let m = PlantedRegionClassifier::new(&[region], &[6.0], -3.0, x_prime.clone()).unwrap();
    let params = SegmentationParams {
        threshold_method: ThresholdMethod::Manual { t_h: 0.5, t_l: 0.1 },
        ..SegmentationParams::for_dims((64, 64))
    };
    let seg = gan_augmented_segmentation(&x, &x_prime, &m, &params).unwrap();
    assert_eq!(seg.trace.iterations, 1);
    assert!(seg.trace.single_segment_counterfactuals >= 1);
}

#[test]
fn dataset_labels_follow_the_rule() {
    let items = random_dataset(100, 7, 0.5);
    assert_eq!(items.iter().filter(|s| s.truth.label == Label::Diseased).count(), 50);
    for s in &items {
        assert_eq!(ground_truth_label(&s.spec), s.truth.label);
        assert_eq!(s.truth.targets.is_empty(), s.truth.label == Label::Healthy);
        let (x, xp, truth) = generate_pair(&s.spec, s.x.dims()).unwrap();
        assert_eq!((x, xp, truth), (s.x.clone(), s.x_prime.clone(), s.truth.clone()));
    }
    let (a, b) = (random_dataset(10, 7, 0.5), random_dataset(10, 7, 0.5));
    for (a, b) in a.iter().zip(&b) {
        assert_eq!((&a.x, &a.x_prime, &a.truth), (&b.x, &b.x_prime, &b.truth));
    }
}
