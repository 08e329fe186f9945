//! Graph-based segmentation after Felzenszwalb and Huttenlocher (2004).
//!
//! Pixels are nodes of an 8-connected grid graph weighted by absolute
//! intensity difference of the Gaussian-smoothed image. Edges are processed
//! in non-decreasing weight order (ties by endpoint raster order) and two
//! components merge when the edge is no heavier than either component's
//! internal difference plus `k / |C|`.

use serde::{Deserialize, Serialize};

use super::{check_dims, BinaryMask, Image, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FelzenszwalbParams {
    /// Merge scale in 8-bit intensity units; larger values give larger regions.
    pub scale: f64,
    /// Gaussian pre-smoothing width; `0` disables smoothing.
    pub sigma: f64,
    pub min_size: usize,
}

impl Default for FelzenszwalbParams {
    fn default() -> Self {
        Self {
            scale: 100.0,
            sigma: 0.8,
            min_size: 20,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur with edge clamping.
fn smooth(image: &Image, sigma: f64) -> Vec<f64> {
    let (w, h) = image.dims();
    let src: Vec<f64> = image.pixels().iter().map(|&v| f64::from(v)).collect();
    if sigma <= 0.0 {
        return src;
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let xx = (x as isize + i as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * src[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let yy = (y as isize + i as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

struct Forest {
    parent: Vec<usize>,
    size: Vec<usize>,
    threshold: Vec<f64>,
}

impl Forest {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn join(&mut self, a: usize, b: usize) -> usize {
        let (keep, gone) = if self.size[a] >= self.size[b] { (a, b) } else { (b, a) };
        self.parent[gone] = keep;
        self.size[keep] += self.size[gone];
        keep
    }
}

/// Segments `image`, optionally restricted to `roi`.
///
/// Pixels outside `roi` get label 0. Regions that cannot reach `min_size`
/// because their connected part of the roi is smaller than that are also
/// left at 0. Labels are numbered in raster order.
pub fn felzenszwalb(
    image: &Image,
    params: &FelzenszwalbParams,
    roi: Option<&BinaryMask>,
) -> LabelMap {
    let (w, h) = image.dims();
    if let Some(r) = roi {
        check_dims((w, h), r.dims()).expect("roi dimensions must match the image");
    }
    let inside = |i: usize| roi.map_or(true, |r| r.bits()[i]);
    let smoothed = smooth(image, params.sigma);
    let k = params.scale / 255.0;

    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(4 * w * h);
    for y in 0..h {
        for x in 0..w {
            let a = y * w + x;
            if !inside(a) {
                continue;
            }
            let mut push = |b: usize| {
                if inside(b) {
                    let (lo, hi) = (a.min(b), a.max(b));
                    edges.push(((smoothed[a] - smoothed[b]).abs(), lo as u32, hi as u32));
                }
            };
            if x + 1 < w {
                push(a + 1);
            }
            if y + 1 < h {
                push(a + w);
                if x + 1 < w {
                    push(a + w + 1);
                }
                if x > 0 {
                    push(a + w - 1);
                }
            }
        }
    }
    edges.sort_by(|p, q| {
        p.0.total_cmp(&q.0)
            .then(p.1.cmp(&q.1))
            .then(p.2.cmp(&q.2))
    });

    let n = w * h;
    let mut forest = Forest {
        parent: (0..n).collect(),
        size: vec![1; n],
        threshold: vec![k; n],
    };
    for &(weight, a, b) in &edges {
        let ra = forest.find(a as usize);
        let rb = forest.find(b as usize);
        if ra != rb && weight <= forest.threshold[ra] && weight <= forest.threshold[rb] {
            let root = forest.join(ra, rb);
            forest.threshold[root] = weight + k / forest.size[root] as f64;
        }
    }
    for &(_, a, b) in &edges {
        let ra = forest.find(a as usize);
        let rb = forest.find(b as usize);
        if ra != rb && (forest.size[ra] < params.min_size || forest.size[rb] < params.min_size) {
            forest.join(ra, rb);
        }
    }

    let mut raw = vec![0u32; n];
    for (i, slot) in raw.iter_mut().enumerate() {
        if inside(i) {
            *slot = forest.find(i) as u32 + 1;
        }
    }
    let mut sizes = std::collections::HashMap::new();
    for &l in raw.iter().filter(|l| **l != 0) {
        *sizes.entry(l).or_insert(0usize) += 1;
    }
    let min_size = params.min_size.max(1);
    LabelMap::new(w, h, raw)
        .expect("dimensions preserved")
        .relabel_raster(|l| sizes[&l] >= min_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_one_region() {
        let img = Image::filled(16, 12, 0.4);
        let labels = felzenszwalb(&img, &FelzenszwalbParams::default(), None);
        assert!(labels.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn step_edge_gives_two_regions() {
        let img = Image::from_fn(20, 10, |x, _| if x < 10 { 0.1 } else { 0.9 });
        let params = FelzenszwalbParams {
            scale: 10.0,
            sigma: 0.0,
            min_size: 5,
        };
        let labels = felzenszwalb(&img, &params, None);
        assert_eq!(labels.max_label(), 2);
        assert_eq!(labels.get(0, 0), 1);
        assert_eq!(labels.get(19, 9), 2);
        assert_eq!(labels.label_sizes()[1], 100);
    }

    #[test]
    fn roi_excludes_outside_pixels() {
        let img = Image::filled(10, 10, 0.5);
        let roi = BinaryMask::from_fn(10, 10, |x, _| x >= 5);
        let labels = felzenszwalb(&img, &FelzenszwalbParams::default(), Some(&roi));
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(labels.get(x, y) != 0, x >= 5);
            }
        }
    }

    #[test]
    fn tiny_isolated_roi_island_is_dropped() {
        let img = Image::filled(10, 10, 0.5);
        let roi = BinaryMask::from_fn(10, 10, |x, y| x >= 5 || (x == 0 && y == 0));
        let params = FelzenszwalbParams {
            min_size: 4,
            ..FelzenszwalbParams::default()
        };
        let labels = felzenszwalb(&img, &params, Some(&roi));
        assert_eq!(labels.get(0, 0), 0);
        assert_eq!(labels.max_label(), 1);
    }
}
