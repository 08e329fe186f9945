//! Paired segmentation of an image and its contrast image: segments from
//! high differences, supplemented by texture segments inside the
//! low-difference region, with segment-size escalation until some single
//! segment is an image-counterfactual.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{predict, Classifier};
use crate::error::{Error, Result};
use crate::imaging::io::{label_visualization, write_json, RunLength};
use crate::imaging::{
    connected_components, difference_masks, erode, felzenszwalb, histogram_256, multi_otsu,
    BinaryMask, Connectivity, FelzenszwalbParams, Image, LabelMap,
};
use crate::perturbation::{evaluate_dataset, PerturbationVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    HighIntensity,
    LowIntensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub id: u32,
    pub provenance: Provenance,
    pub pixel_count: usize,
    /// Minimum segment size in force when the segment was created.
    pub min_seg_size: usize,
}

/// Segment ids `1..=n` over the image grid; 0 marks unsegmented pixels,
/// which always keep their content from `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap {
    labels: LabelMap,
    segments: Vec<SegmentInfo>,
}

impl SegmentMap {
    fn build(labels: LabelMap, provenance: &[Provenance], min_sizes: &[usize]) -> Self {
        let sizes = labels.label_sizes();
        let segments = (1..=labels.max_label())
            .map(|id| SegmentInfo {
                id,
                provenance: provenance[id as usize - 1],
                pixel_count: sizes[id as usize],
                min_seg_size: min_sizes[id as usize - 1],
            })
            .collect();
        Self { labels, segments }
    }

    /// Wraps an existing label map; every segment is tagged `provenance`.
    pub fn from_labels(labels: LabelMap, provenance: Provenance) -> Result<Self> {
        let n = labels.max_label() as usize;
        let sizes = labels.label_sizes();
        if let Some(id) = (1..=n).find(|&i| sizes[i] == 0) {
            return Err(Error::InvalidArgument(format!("segment {id} is empty")));
        }
        Ok(Self::build(labels, &vec![provenance; n], &vec![1; n]))
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[SegmentInfo] {
        &self.segments
    }

    pub fn ids(&self) -> Vec<u32> {
        self.segments.iter().map(|s| s.id).collect()
    }

    pub fn mask(&self, id: u32) -> Result<BinaryMask> {
        if id == 0 || id as usize > self.n() {
            return Err(Error::UnknownSegmentId(id));
        }
        Ok(self.labels.mask_of(id))
    }

    pub fn to_record(&self) -> SegmentMapRecord {
        SegmentMapRecord {
            width: self.labels.width(),
            height: self.labels.height(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    info: *s,
                    mask: RunLength::encode(&self.labels.mask_of(s.id)),
                })
                .collect(),
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(&self.to_record(), path)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        label_visualization(&self.labels)
            .save(path)
            .map_err(Error::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    #[serde(flatten)]
    pub info: SegmentInfo,
    pub mask: RunLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMapRecord {
    pub width: usize,
    pub height: usize,
    pub segments: Vec<SegmentRecord>,
}

impl SegmentMapRecord {
    pub fn to_segment_map(&self) -> Result<SegmentMap> {
        let mut labels = vec![0u32; self.width * self.height];
        let mut provenance = vec![];
        let mut min_sizes = vec![];
        for (k, s) in self.segments.iter().enumerate() {
            if s.info.id as usize != k + 1 {
                return Err(Error::UnknownSegmentId(s.info.id));
            }
            let mask = s.mask.decode()?;
            crate::imaging::check_dims((self.width, self.height), mask.dims())?;
            for (l, &b) in labels.iter_mut().zip(mask.bits()) {
                if b {
                    *l = s.info.id;
                }
            }
            provenance.push(s.info.provenance);
            min_sizes.push(s.info.min_seg_size);
        }
        let labels = LabelMap::new(self.width, self.height, labels)?;
        Ok(SegmentMap::build(labels, &provenance, &min_sizes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ThresholdMethod {
    MultiOtsu,
    Manual { t_h: f64, t_l: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentType {
    /// High-difference segments plus texture segments in the
    /// low-difference region.
    #[serde(rename = "Augmented_GAN")]
    AugmentedGan,
    /// Texture segments over the whole of `x`, ignoring `x'`.
    Felzenszwalb,
    /// High-difference segments only.
    Thresholding,
}

impl std::str::FromStr for SegmentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Augmented_GAN" => Ok(Self::AugmentedGan),
            "Felzenszwalb" => Ok(Self::Felzenszwalb),
            "Thresholding" => Ok(Self::Thresholding),
            other => Err(Error::Config(format!("unknown image_segment_type {other:?}"))),
        }
    }
}

impl std::fmt::Display for SegmentType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::AugmentedGan => "Augmented_GAN",
            Self::Felzenszwalb => "Felzenszwalb",
            Self::Thresholding => "Thresholding",
        })
    }
}

/// Minimum segment size used for 256x256 images.
pub const REFERENCE_MIN_SEG_SIZE: usize = 250;
pub const REFERENCE_SEG_SIZE_INCREMENT: usize = 25;
pub const DEFAULT_MAX_SEGMENTS: usize = 20;

/// `reference` pixels at 256x256 scaled by image area, at least 1.
pub fn scale_for_area(reference: usize, dims: (usize, usize)) -> usize {
    ((reference as f64 * (dims.0 * dims.1) as f64 / 65536.0).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub segment_type: SegmentType,
    pub threshold_method: ThresholdMethod,
    pub min_num_s_l: usize,
    pub min_seg_size: usize,
    pub seg_size_increment: usize,
    pub felzenszwalb: FelzenszwalbParams,
    pub erosion_radius: usize,
    pub max_segments: usize,
    pub binary_decision_boundary: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            segment_type: SegmentType::AugmentedGan,
            threshold_method: ThresholdMethod::MultiOtsu,
            min_num_s_l: 4,
            min_seg_size: REFERENCE_MIN_SEG_SIZE,
            seg_size_increment: REFERENCE_SEG_SIZE_INCREMENT,
            felzenszwalb: FelzenszwalbParams::default(),
            erosion_radius: 1,
            max_segments: DEFAULT_MAX_SEGMENTS,
            binary_decision_boundary: 0.5,
        }
    }
}

impl SegmentationParams {
    /// Defaults with segment sizes scaled to the area of `dims`.
    pub fn for_dims(dims: (usize, usize)) -> Self {
        Self {
            min_seg_size: scale_for_area(REFERENCE_MIN_SEG_SIZE, dims),
            seg_size_increment: scale_for_area(REFERENCE_SEG_SIZE_INCREMENT, dims),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_seg_size < 1 || self.seg_size_increment < 1 {
            return Err(Error::InvalidSpec(
                "min_seg_size and seg_size_increment must be at least 1".into(),
            ));
        }
        if self.max_segments < 1 {
            return Err(Error::InvalidSpec("max_segments must be at least 1".into()));
        }
        if let ThresholdMethod::Manual { t_h, t_l } = self.threshold_method {
            if !(0.0..=1.0).contains(&t_l) || !(0.0..=1.0).contains(&t_h) || t_l > t_h {
                return Err(Error::InvalidSpec(format!(
                    "manual thresholds need 0 <= t_l <= t_h <= 1, got ({t_h}, {t_l})"
                )));
            }
        }
        Ok(())
    }
}

/// `(t_h, t_l)`: three-class multi-Otsu over the `|x - x'|` histogram, or
/// the manual pair unchanged.
pub fn determine_thresholds(x: &Image, x_prime: &Image, method: ThresholdMethod) -> Result<(f64, f64)> {
    x.ensure_same_dims(x_prime)?;
    match method {
        ThresholdMethod::Manual { t_h, t_l } => Ok((t_h, t_l)),
        ThresholdMethod::MultiOtsu => {
            let t = multi_otsu(&histogram_256(&x.abs_diff(x_prime)?), 3)?;
            Ok((t[1], t[0]))
        }
    }
}

/// Connected components of `d_h` with at least `min_seg_size` pixels.
pub fn create_high_intensity_segments(d_h: &BinaryMask, min_seg_size: usize) -> LabelMap {
    let cc = connected_components(d_h, Connectivity::Eight);
    let sizes = cc.label_sizes();
    cc.relabel_raster(|l| sizes[l as usize] >= min_seg_size)
}

/// Texture segments of `x` inside the eroded low-difference region.
pub fn create_low_intensity_segments(
    d_l: &BinaryMask,
    x: &Image,
    min_seg_size: usize,
    params: &SegmentationParams,
) -> Result<LabelMap> {
    crate::imaging::check_dims(x.dims(), d_l.dims())?;
    let cc = connected_components(d_l, Connectivity::Eight);
    let sizes = cc.label_sizes();
    let kept = cc.relabel_raster(|l| sizes[l as usize] >= min_seg_size).foreground();
    let roi = erode(&kept, params.erosion_radius);
    if roi.is_empty() {
        return Ok(LabelMap::background(x.width(), x.height()));
    }
    let fz = FelzenszwalbParams {
        min_size: min_seg_size,
        ..params.felzenszwalb
    };
    let labels = felzenszwalb(x, &fz, Some(&roi));
    let sizes = labels.label_sizes();
    Ok(labels.relabel_raster(|l| sizes[l as usize] >= min_seg_size))
}

/// Number of segments whose replacement alone moves `x` across the
/// decision boundary.
pub fn count_single_segment_counterfactuals(
    m: &dyn Classifier,
    x: &Image,
    x_prime: &Image,
    segments: &LabelMap,
    boundary: f64,
) -> Result<usize> {
    let n = segments.max_label() as usize;
    if n == 0 {
        return Err(Error::NoSegmentsFound);
    }
    let original = predict(m, x)? >= boundary;
    let vectors: Vec<PerturbationVector> = (1..=n as u32)
        .map(|i| PerturbationVector::replacing(n, &[i]))
        .collect();
    let records = evaluate_dataset(m, x, x_prime, segments, &vectors)?;
    Ok(records
        .iter()
        .filter(|r| (r.probability >= boundary) != original)
        .count())
}

/// Overlays `low` on `high`; high-intensity pixels win conflicts.
fn combine(high: &LabelMap, low: &LabelMap) -> (LabelMap, Vec<Provenance>) {
    let n_h = high.max_label();
    let merged: Vec<u32> = high
        .labels()
        .iter()
        .zip(low.labels())
        .map(|(&h, &l)| if h != 0 { h } else if l != 0 { l + n_h } else { 0 })
        .collect();
    let map = LabelMap::new(high.width(), high.height(), merged).expect("same dims");
    let sizes = map.label_sizes();
    let provenance: std::collections::HashMap<u32, Provenance> = (1..=map.max_label())
        .map(|l| {
            let p = if l <= n_h {
                Provenance::HighIntensity
            } else {
                Provenance::LowIntensity
            };
            (l, p)
        })
        .collect();
    let mut order = vec![];
    let relabeled = map.relabel_raster(|l| {
        let keep = sizes[l as usize] > 0;
        if keep && !order.contains(&l) {
            order.push(l);
        }
        keep
    });
    // relabel_raster numbers labels by first appearance, which is the
    // order in which `keep` first sees them
    let prov = order.iter().map(|l| provenance[l]).collect();
    (relabeled, prov)
}

/// Merges the smallest segment into its largest 4-neighbour until at most
/// `max` segments remain. A segment with no neighbour is dropped.
pub fn cap_segments(map: &SegmentMap, max: usize) -> SegmentMap {
    if map.n() <= max {
        return map.clone();
    }
    let (w, h) = map.labels.dims();
    let mut labels = map.labels.labels().to_vec();
    let mut info: BTreeMap<u32, SegmentInfo> = map.segments.iter().map(|s| (s.id, *s)).collect();
    while info.len() > max {
        let (&small, _) = info
            .iter()
            .min_by_key(|(id, s)| (s.pixel_count, **id))
            .expect("non-empty");
        let mut neighbours = std::collections::BTreeSet::new();
        for y in 0..h {
            for x in 0..w {
                if labels[y * w + x] != small {
                    continue;
                }
                let mut look = |nx: usize, ny: usize| {
                    let l = labels[ny * w + nx];
                    if l != 0 && l != small {
                        neighbours.insert(l);
                    }
                };
                if x > 0 {
                    look(x - 1, y);
                }
                if x + 1 < w {
                    look(x + 1, y);
                }
                if y > 0 {
                    look(x, y - 1);
                }
                if y + 1 < h {
                    look(x, y + 1);
                }
            }
        }
        let target = neighbours
            .iter()
            .max_by_key(|l| (info[l].pixel_count, std::cmp::Reverse(**l)))
            .copied();
        let moved = info.remove(&small).expect("present").pixel_count;
        let replacement = target.unwrap_or(0);
        for l in labels.iter_mut().filter(|l| **l == small) {
            *l = replacement;
        }
        if let Some(t) = target {
            info.get_mut(&t).expect("present").pixel_count += moved;
        }
    }
    let map_before = LabelMap::new(w, h, labels).expect("same dims");
    let mut order = vec![];
    let relabeled = map_before.relabel_raster(|l| {
        if !order.contains(&l) {
            order.push(l);
        }
        true
    });
    let provenance: Vec<Provenance> = order.iter().map(|l| info[l].provenance).collect();
    let min_sizes: Vec<usize> = order.iter().map(|l| info[l].min_seg_size).collect();
    SegmentMap::build(relabeled, &provenance, &min_sizes)
}

/// Diagnostics of one segmentation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentationTrace {
    pub t_h: Option<f64>,
    pub t_l: Option<f64>,
    pub iterations: usize,
    pub final_min_seg_size: usize,
    pub n_high: usize,
    pub n_low: usize,
    pub single_segment_counterfactuals: usize,
}

/// The paired segmentation `(S, S')`. Both share one label geometry, so a
/// single [`SegmentMap`] describes them; `S'` is the same map read over
/// `x'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: SegmentMap,
    pub trace: SegmentationTrace,
}

/// Builds the paired segment sets, escalating the low-intensity segment
/// size while no single segment is a counterfactual and more than
/// `min_num_s_l` low-intensity segments exist.
pub fn gan_augmented_segmentation(
    x: &Image,
    x_prime: &Image,
    m: &dyn Classifier,
    params: &SegmentationParams,
) -> Result<Segmentation> {
    params.validate()?;
    x.ensure_same_dims(x_prime)?;
    let (w, h) = x.dims();
    let boundary = params.binary_decision_boundary;

    let (thresholds, d_h, d_l) = match params.segment_type {
        SegmentType::Felzenszwalb => (None, BinaryMask::empty(w, h), BinaryMask::from_fn(w, h, |_, _| true)),
        _ => {
            let (t_h, t_l) = match determine_thresholds(x, x_prime, params.threshold_method) {
                Err(Error::DegenerateHistogram { .. }) => return Err(Error::NoSegmentsFound),
                other => other?,
            };
            let (d_h, d_l) = difference_masks(x, x_prime, t_h, t_l)?;
            (Some((t_h, t_l)), d_h, d_l)
        }
    };
    let mut min_seg_size = params.min_seg_size;
    let s_h = create_high_intensity_segments(&d_h, min_seg_size);
    let low = |size: usize| -> Result<LabelMap> {
        match params.segment_type {
            SegmentType::Thresholding => Ok(LabelMap::background(w, h)),
            SegmentType::Felzenszwalb => {
                let fz = FelzenszwalbParams {
                    min_size: size,
                    ..params.felzenszwalb
                };
                Ok(felzenszwalb(x, &fz, None))
            }
            SegmentType::AugmentedGan => create_low_intensity_segments(&d_l, x, size, params),
        }
    };
    let assemble = |s_l: &LabelMap, low_size: usize| -> Result<(SegmentMap, usize)> {
        let (labels, provenance) = combine(&s_h, s_l);
        if labels.max_label() == 0 {
            return Ok((SegmentMap::build(labels, &[], &[]), 0));
        }
        let min_sizes: Vec<usize> = provenance
            .iter()
            .map(|p| match p {
                Provenance::HighIntensity => params.min_seg_size,
                Provenance::LowIntensity => low_size,
            })
            .collect();
        let map = cap_segments(
            &SegmentMap::build(labels, &provenance, &min_sizes),
            params.max_segments,
        );
        let n_c = count_single_segment_counterfactuals(m, x, x_prime, map.labels(), boundary)?;
        Ok((map, n_c))
    };
    let mut s_l = low(min_seg_size)?;
    let mut n_l = s_l.max_label() as usize;
    let (mut map, mut n_c) = assemble(&s_l, min_seg_size)?;
    let mut iterations = 1;
    while n_c == 0 && params.min_num_s_l < n_l {
        min_seg_size += params.seg_size_increment;
        s_l = low(min_seg_size)?;
        n_l = s_l.max_label() as usize;
        (map, n_c) = assemble(&s_l, min_seg_size)?;
        iterations += 1;
    }
    if map.is_empty() {
        return Err(Error::NoSegmentsFound);
    }
    let n_high = map
        .segments
        .iter()
        .filter(|s| s.provenance == Provenance::HighIntensity)
        .count();
    Ok(Segmentation {
        trace: SegmentationTrace {
            t_h: thresholds.map(|t| t.0),
            t_l: thresholds.map(|t| t.1),
            iterations,
            final_min_seg_size: min_seg_size,
            n_high,
            n_low: map.n() - n_high,
            single_segment_counterfactuals: n_c,
        },
        segments: map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{constant_classifier, PlantedRegionClassifier};

    fn blocks(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            rects
                .iter()
                .any(|&(x0, y0, rw, rh)| x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh)
        })
    }

    #[test]
    fn manual_thresholds_pass_through() {
        let x = Image::filled(4, 4, 0.2);
        let t = determine_thresholds(&x, &x, ThresholdMethod::Manual { t_h: 0.6, t_l: 0.2 }).unwrap();
        assert_eq!(t, (0.6, 0.2));
    }

    #[test]
    fn identical_images_have_no_thresholds() {
        let x = Image::filled(8, 8, 0.3);
        assert!(matches!(
            determine_thresholds(&x, &x, ThresholdMethod::MultiOtsu),
            Err(Error::DegenerateHistogram { .. })
        ));
        let m = constant_classifier(0.9);
        assert!(matches!(
            gan_augmented_segmentation(&x, &x, &m, &SegmentationParams::default()),
            Err(Error::NoSegmentsFound)
        ));
    }

    #[test]
    fn high_segments_drop_small_blobs() {
        let empty = BinaryMask::empty(40, 40);
        assert_eq!(create_high_intensity_segments(&empty, 250).max_label(), 0);
        let one = blocks(40, 40, &[(0, 0, 20, 15)]);
        assert_eq!(create_high_intensity_segments(&one, 250).max_label(), 1);
        let two = blocks(40, 40, &[(0, 0, 10, 10), (20, 20, 20, 20)]);
        let s = create_high_intensity_segments(&two, 250);
        assert_eq!(s.max_label(), 1);
        assert_eq!(s.label_sizes()[1], 400);
    }

    #[test]
    fn flat_low_region_is_one_segment() {
        let x = Image::filled(30, 30, 0.4);
        let d_l = blocks(30, 30, &[(2, 2, 20, 20)]);
        let s = create_low_intensity_segments(&d_l, &x, 50, &SegmentationParams::default()).unwrap();
        assert_eq!(s.max_label(), 1);
        assert_eq!(
            create_low_intensity_segments(&BinaryMask::empty(30, 30), &x, 50, &SegmentationParams::default())
                .unwrap()
                .max_label(),
            0
        );
    }

    #[test]
    fn single_segment_counterfactual_count() {
        let (w, h) = (24, 8);
        let regions = [
            blocks(w, h, &[(0, 0, 8, 8)]),
            blocks(w, h, &[(8, 0, 8, 8)]),
            blocks(w, h, &[(16, 0, 8, 8)]),
        ];
        let labels = LabelMap::new(
            w,
            h,
            (0..w * h).map(|i| (i % w / 8) as u32 + 1).collect(),
        )
        .unwrap();
        let x = Image::filled(w, h, 0.9);
        let xp = Image::filled(w, h, 0.1);
        let m = PlantedRegionClassifier::new(&regions, &[1.0, 1.0, 6.0], -3.0, xp.clone()).unwrap();
        assert_eq!(count_single_segment_counterfactuals(&m, &x, &xp, &labels, 0.5).unwrap(), 1);
        let c = constant_classifier(0.9);
        assert_eq!(count_single_segment_counterfactuals(&c, &x, &xp, &labels, 0.5).unwrap(), 0);
    }

    #[test]
    fn cap_merges_smallest_into_largest_neighbour() {
        // three vertical strips of widths 2, 3, 5
        let labels = LabelMap::new(
            10,
            2,
            (0..20)
                .map(|i| match i % 10 {
                    0..=1 => 1,
                    2..=4 => 2,
                    _ => 3,
                })
                .collect(),
        )
        .unwrap();
        let map = SegmentMap::from_labels(labels, Provenance::LowIntensity).unwrap();
        let capped = cap_segments(&map, 2);
        assert_eq!(capped.n(), 2);
        assert_eq!(
            capped.segments().iter().map(|s| s.pixel_count).collect::<Vec<_>>(),
            vec![10, 10]
        );
    }

    #[test]
    fn planted_fixture_stops_on_first_iteration() {
        let (w, h) = (48, 48);
        let regions = [blocks(w, h, &[(4, 4, 16, 16)]), blocks(w, h, &[(28, 28, 16, 16)])];
        let xp = Image::filled(w, h, 0.1);
        let x = Image::from_fn(w, h, |px, py| {
            if regions.iter().any(|r| r.get(px, py)) {
                0.9
            } else {
                0.1
            }
        });
        let m = PlantedRegionClassifier::new(&regions, &[6.0, 1.0], -3.0, xp.clone()).unwrap();
        let params = SegmentationParams {
            threshold_method: ThresholdMethod::Manual { t_h: 0.5, t_l: 0.2 },
            min_seg_size: 50,
            ..SegmentationParams::default()
        };
        let s = gan_augmented_segmentation(&x, &xp, &m, &params).unwrap();
        assert_eq!(s.trace.iterations, 1);
        assert!(s.trace.single_segment_counterfactuals >= 1);
        assert_eq!(s.segments.n(), 2);
        assert!(s
            .segments
            .segments()
            .iter()
            .all(|seg| seg.provenance == Provenance::HighIntensity && seg.pixel_count == 256));
    }

    #[test]
    fn record_round_trip() {
        let labels = LabelMap::new(3, 2, vec![1, 1, 2, 0, 2, 2]).unwrap();
        let map = SegmentMap::from_labels(labels, Provenance::HighIntensity).unwrap();
        assert_eq!(map.to_record().to_segment_map().unwrap(), map);
    }
}
