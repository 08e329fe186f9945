//! Multi-level Otsu thresholding over 256-bin histograms.
//!
//! Bin `b` covers intensities `[b/256, (b+1)/256)`, with `1.0` folded into the
//! last bin. A threshold index `t` splits bins `..=t` from `t+1..`, which in
//! intensity terms is the value `(t+1)/256`: a value `v` falls above the split
//! exactly when `v >= (t+1)/256`.

use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 256;

/// Objectives within this relative distance count as tied.
const TIE_RTOL: f64 = 1e-12;

fn improves(v: f64, top: f64) -> bool {
    top == f64::NEG_INFINITY || v > top + TIE_RTOL * top.abs()
}

pub fn value_to_bin(v: f64) -> usize {
    ((v * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Intensity corresponding to threshold index `t`.
pub fn threshold_to_bin(t: usize) -> f64 {
    (t + 1) as f64 / HISTOGRAM_BINS as f64
}

pub fn histogram_256(values: &[f64]) -> [u64; HISTOGRAM_BINS] {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &v in values {
        hist[value_to_bin(v)] += 1;
    }
    hist
}

/// Class weight for between-class variance: `S^2 / N` for a class with
/// count `N` and intensity sum `S` (bin indices as intensities).
fn class_term(count: f64, sum: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        sum * sum / count
    }
}

/// Thresholds (as intensities in `[0, 1]`) that maximise between-class
/// variance for `classes` classes. Ties resolve to the lexicographically
/// lowest threshold tuple.
pub fn multi_otsu(histogram: &[u64; HISTOGRAM_BINS], classes: usize) -> Result<Vec<f64>> {
    Ok(multi_otsu_indices(histogram, classes)?
        .into_iter()
        .map(threshold_to_bin)
        .collect())
}

pub(crate) fn multi_otsu_indices(
    histogram: &[u64; HISTOGRAM_BINS],
    classes: usize,
) -> Result<Vec<usize>> {
    let populated = histogram.iter().filter(|c| **c > 0).count();
    if classes < 2 || populated < classes {
        return Err(Error::DegenerateHistogram {
            populated,
            classes: classes.max(2),
        });
    }
    let l = HISTOGRAM_BINS;
    let cuts = classes - 1;

    // prefix[i] = totals over bins 0..i
    let mut count_prefix = vec![0.0f64; l + 1];
    let mut sum_prefix = vec![0.0f64; l + 1];
    for (b, &c) in histogram.iter().enumerate() {
        count_prefix[b + 1] = count_prefix[b] + c as f64;
        sum_prefix[b + 1] = sum_prefix[b] + (c as f64) * b as f64;
    }
    // term of the class spanning bins lo..=hi
    let term = |lo: usize, hi: usize| {
        class_term(
            count_prefix[hi + 1] - count_prefix[lo],
            sum_prefix[hi + 1] - sum_prefix[lo],
        )
    };

    // Suffix dynamic programme. `best[j][t]` is the best objective of the
    // classes after cut `j` placed at bin `t` (cuts j+1.. still free), and
    // `choice[j][t]` the lowest next cut reaching it. Choosing the lowest
    // optimum at every step from the left yields the lexicographically
    // lowest optimal tuple.
    let mut best = vec![vec![f64::NEG_INFINITY; l]; cuts];
    let mut choice = vec![vec![usize::MAX; l]; cuts];
    let last = cuts - 1;
    for t in last..l - 1 {
        best[last][t] = term(t + 1, l - 1);
    }
    for j in (0..last).rev() {
        for t in j..l - 1 {
            let mut top = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for next in t + 1..l - 1 {
                if best[j + 1][next] == f64::NEG_INFINITY {
                    continue;
                }
                let v = term(t + 1, next) + best[j + 1][next];
                if improves(v, top) {
                    top = v;
                    arg = next;
                }
            }
            best[j][t] = top;
            choice[j][t] = arg;
        }
    }

    let mut top = f64::NEG_INFINITY;
    let mut first = usize::MAX;
    for t in 0..l - 1 {
        if best[0][t] == f64::NEG_INFINITY {
            continue;
        }
        let v = term(0, t) + best[0][t];
        if improves(v, top) {
            top = v;
            first = t;
        }
    }
    let mut out = Vec::with_capacity(cuts);
    let mut t = first;
    out.push(t);
    for row in choice.iter().take(last) {
        t = row[t];
        out.push(t);
    }
    Ok(out)
}
