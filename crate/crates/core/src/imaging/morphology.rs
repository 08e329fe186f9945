use serde::{Deserialize, Serialize};

use super::{BinaryMask, Image, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }
}

/// High- and low-difference masks between `x` and `x_prime`.
///
/// `d_h` marks `|x - x'| >= t_h`, `d_l` marks `t_l <= |x - x'| < t_h`.
pub fn difference_masks(
    x: &Image,
    x_prime: &Image,
    t_h: f64,
    t_l: f64,
) -> Result<(BinaryMask, BinaryMask)> {
    if !(0.0..=1.0).contains(&t_l) || !(0.0..=1.0).contains(&t_h) || t_l > t_h {
        return Err(Error::InvalidArgument(format!(
            "thresholds must satisfy 0 <= t_l <= t_h <= 1, got t_h={t_h} t_l={t_l}"
        )));
    }
    let diff = x.abs_diff(x_prime)?;
    let (w, h) = x.dims();
    let high = diff.iter().map(|&d| d >= t_h).collect();
    let low = diff.iter().map(|&d| d >= t_l && d < t_h).collect();
    Ok((BinaryMask::new(w, h, high)?, BinaryMask::new(w, h, low)?))
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Labels the connected components of `mask`. Labels are numbered `1..` in
/// raster order of each component's first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut sets = DisjointSet::new(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            // already-visited neighbours: left, up, and for 8-connectivity the
            // two upper diagonals
            if x > 0 && bits[i - 1] {
                sets.union(i, i - 1);
            }
            if y > 0 {
                if bits[i - w] {
                    sets.union(i, i - w);
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && bits[i - w - 1] {
                        sets.union(i, i - w - 1);
                    }
                    if x + 1 < w && bits[i - w + 1] {
                        sets.union(i, i - w + 1);
                    }
                }
            }
        }
    }
    let mut root_label = vec![0u32; w * h];
    let mut next = 0u32;
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        if !bits[i] {
            continue;
        }
        let r = sets.find(i);
        if root_label[r] == 0 {
            next += 1;
            root_label[r] = next;
        }
        labels[i] = root_label[r];
    }
    LabelMap::new(w, h, labels).expect("dimensions preserved")
}

/// Binary erosion with a `(2r+1)x(2r+1)` square; pixels beyond the border
/// count as false.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    if radius == 0 {
        return mask.clone();
    }
    let bits = mask.bits();
    // horizontal pass: run of trues covering [x-r, x+r]
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &bits[y * w..(y + 1) * w];
        let mut run_end = vec![0usize; w]; // length of true-run ending at x
        let mut run = 0usize;
        for x in 0..w {
            run = if row[x] { run + 1 } else { 0 };
            run_end[x] = run;
        }
        for x in 0..w {
            if x < radius || x + radius >= w {
                continue;
            }
            horiz[y * w + x] = run_end[x + radius] > 2 * radius;
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        let mut run = 0usize;
        let mut run_end = vec![0usize; h];
        for y in 0..h {
            run = if horiz[y * w + x] { run + 1 } else { 0 };
            run_end[y] = run;
        }
        for y in radius..h.saturating_sub(radius) {
            out[y * w + x] = run_end[y + radius] > 2 * radius;
        }
    }
    BinaryMask::new(w, h, out).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_give_empty_masks() {
        let x = Image::from_fn(4, 4, |a, b| (a + b) as f32 / 8.0);
        let (dh, dl) = difference_masks(&x, &x, 0.5, 0.1).unwrap();
        assert!(dh.is_empty() && dl.is_empty());
    }

    #[test]
    fn single_large_difference_is_high_only() {
        let x = Image::filled(3, 3, 0.05);
        let mut xp = x.clone();
        xp.set(1, 2, 0.95);
        let (dh, dl) = difference_masks(&x, &xp, 0.5, 0.1).unwrap();
        assert_eq!(dh.count(), 1);
        assert!(dh.get(1, 2));
        assert!(dl.is_empty());
    }

    #[test]
    fn mismatched_dims_rejected() {
        let a = Image::filled(3, 3, 0.0);
        let b = Image::filled(3, 4, 0.0);
        assert!(matches!(
            difference_masks(&a, &b, 0.5, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let m = BinaryMask::from_fn(2, 2, |x, y| x == y);
        assert_eq!(connected_components(&m, Connectivity::Four).max_label(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).max_label(), 1);
    }

    #[test]
    fn empty_mask_has_no_labels() {
        let m = BinaryMask::empty(5, 5);
        assert_eq!(connected_components(&m, Connectivity::Eight).max_label(), 0);
    }

    #[test]
    fn u_shape_merges_into_one_label() {
        // two arms joined only at the bottom: first-pass labels differ
        let rows = ["X.X", "X.X", "XXX"];
        let m = BinaryMask::from_fn(3, 3, |x, y| rows[y].as_bytes()[x] == b'X');
        let l = connected_components(&m, Connectivity::Four);
        assert_eq!(l.max_label(), 1);
    }

    #[test]
    fn erode_block_and_speck() {
        let block = BinaryMask::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y));
        let e = erode(&block, 1);
        assert_eq!(e.count(), 9);
        assert!(e.get(2, 2) && e.get(4, 4) && !e.get(1, 1));
        let speck = BinaryMask::from_fn(5, 5, |x, y| x == 2 && y == 2);
        assert!(erode(&speck, 1).is_empty());
    }

    #[test]
    fn erode_treats_border_as_false() {
        let full = BinaryMask::from_fn(4, 4, |_, _| true);
        let e = erode(&full, 1);
        assert_eq!(e.count(), 4);
    }
}
