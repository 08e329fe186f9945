use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LabelMap;
use crate::error::{Error, Result};

/// Per-pixel signed saliency values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} saliency values for a {width}x{height} map",
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SaliencyMap {
        SaliencyMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Paints each segment's score onto its pixels.
///
/// Segments without an entry in `scores` (unselected by the regression) and
/// background pixels are painted 0. A score keyed by an id that does not
/// occur in `segments` is an error.
pub fn render_saliency(scores: &BTreeMap<u32, f64>, segments: &LabelMap) -> Result<SaliencyMap> {
    let sizes = segments.label_sizes();
    for &id in scores.keys() {
        if id == 0 || sizes.get(id as usize).copied().unwrap_or(0) == 0 {
            return Err(Error::UnknownSegmentId(id));
        }
    }
    let values = segments
        .labels()
        .iter()
        .map(|l| scores.get(l).copied().unwrap_or(0.0))
        .collect();
    SaliencyMap::new(segments.width(), segments.height(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_segment_map() -> LabelMap {
        LabelMap::new(4, 2, vec![1, 1, 0, 2, 1, 0, 2, 2]).unwrap()
    }

    #[test]
    fn zero_scores_give_zero_map() {
        let scores = BTreeMap::from([(1, 0.0), (2, 0.0)]);
        let s = render_saliency(&scores, &two_segment_map()).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_segment_painted() {
        let scores = BTreeMap::from([(2, 2.5)]);
        let s = render_saliency(&scores, &two_segment_map()).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0, 0.0, 2.5, 0.0, 0.0, 2.5, 2.5]);
    }

    #[test]
    fn signed_scores_pixel_scan() {
        let labels = two_segment_map();
        let scores = BTreeMap::from([(1, -1.3), (2, 11.7)]);
        let s = render_saliency(&scores, &labels).unwrap();
        for (v, l) in s.values.iter().zip(labels.labels()) {
            let expected = match l {
                1 => -1.3,
                2 => 11.7,
                _ => 0.0,
            };
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn unknown_id_rejected() {
        let scores = BTreeMap::from([(3, 1.0)]);
        assert!(matches!(
            render_saliency(&scores, &two_segment_map()),
            Err(Error::UnknownSegmentId(3))
        ));
    }
}
