//! Perturbed images built by infilling segments of `x` from the contrast
//! image, their classification, and image-counterfactual search.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict, Classifier};
use crate::error::{Error, Result};
use crate::imaging::{Image, LabelMap};

/// Bit `i` (segment id `i + 1`) is `true` when the segment keeps its
/// content from `x` and `false` when it is infilled from `x'`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PerturbationVector {
    bits: Vec<bool>,
}

impl PerturbationVector {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_present(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    /// Vector with exactly the given 1-based segment ids replaced.
    pub fn replacing(n: usize, replaced: &[u32]) -> Self {
        let mut bits = vec![true; n];
        for &id in replaced {
            bits[id as usize - 1] = false;
        }
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Ascending 1-based ids of replaced segments.
    pub fn replaced(&self) -> Vec<u32> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| !**b)
            .map(|(i, _)| i as u32 + 1)
            .collect()
    }

    pub fn replaced_count(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub vector: PerturbationVector,
    pub probability: f64,
    pub is_counterfactual: bool,
}

/// A minimal set of replaced segments that flips the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub replaced: Vec<u32>,
    pub probability: f64,
    pub size: usize,
}

impl Counterfactual {
    pub fn bits(&self, n_segments: usize) -> Vec<bool> {
        PerturbationVector::replacing(n_segments, &self.replaced).bits
    }
}

/// Takes segment pixels from `x_prime` where the vector bit is 0; every
/// other pixel comes from `x`.
pub fn compose_image(
    x: &Image,
    x_prime: &Image,
    segments: &LabelMap,
    b: &PerturbationVector,
) -> Result<Image> {
    x.ensure_same_dims(x_prime)?;
    crate::imaging::check_dims(x.dims(), segments.dims())?;
    let n = segments.max_label() as usize;
    if b.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    let mut out = x.clone();
    for ((dst, &src), &label) in out
        .pixels_mut()
        .iter_mut()
        .zip(x_prime.pixels())
        .zip(segments.labels())
    {
        if label != 0 && !b.bits[label as usize - 1] {
            *dst = src;
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Lexicographic k-combinations of `1..=n`.
fn combinations(n: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| i as u32 + 1).collect());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Seed used when larger perturbation sizes are subsampled.
pub const DEFAULT_SUBSAMPLE_SEED: u64 = 0x5eed;

/// Every vector with between 1 and `max_size` replaced segments, ordered by
/// size and then lexicographically by replaced ids.
///
/// When the total exceeds `cap`, all vectors with one or two replacements
/// are kept and the remaining budget is sampled uniformly (seeded) from the
/// larger sizes; the result stays in enumeration order.
pub fn enumerate_perturbations(
    n: usize,
    max_size: usize,
    cap: Option<usize>,
    seed: u64,
) -> Vec<PerturbationVector> {
    let top = max_size.min(n);
    let by_size: Vec<Vec<Vec<u32>>> = (1..=top).map(|k| combinations(n, k)).collect();
    let total: usize = by_size.iter().map(Vec::len).sum();
    let to_vec = |c: &Vec<u32>| PerturbationVector::replacing(n, c);
    match cap {
        Some(cap) if total > cap => {
            let small: Vec<PerturbationVector> =
                by_size.iter().take(2).flatten().map(to_vec).collect();
            let large: Vec<&Vec<u32>> = by_size.iter().skip(2).flatten().collect();
            let budget = cap.saturating_sub(small.len()).min(large.len());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, large.len(), budget).into_vec();
            picked.sort_unstable();
            small
                .into_iter()
                .chain(picked.into_iter().map(|i| to_vec(large[i])))
                .collect()
        }
        _ => by_size.iter().flatten().map(to_vec).collect(),
    }
}

/// Classifies the composed image of every vector, preserving order.
///
/// Calls fan out over the rayon pool only when the classifier declares
/// itself concurrency-safe.
pub fn evaluate_dataset(
    m: &dyn Classifier,
    x: &Image,
    x_prime: &Image,
    segments: &LabelMap,
    vectors: &[PerturbationVector],
) -> Result<Vec<PerturbationRecord>> {
    let eval = |v: &PerturbationVector| -> Result<PerturbationRecord> {
        let img = compose_image(x, x_prime, segments, v)?;
        Ok(PerturbationRecord {
            vector: v.clone(),
            probability: predict(m, &img)?,
            is_counterfactual: false,
        })
    };
    if m.concurrency_safe() {
        vectors.par_iter().map(eval).collect()
    } else {
        vectors.iter().map(eval).collect()
    }
}

fn is_positive(p: f64, boundary: f64) -> bool {
    p >= boundary
}

/// Vectors whose records would be needed to check minimality of every
/// flipping record but are absent.
pub fn missing_minimality_vectors(
    records: &[PerturbationRecord],
    y_original: f64,
    boundary: f64,
) -> Vec<PerturbationVector> {
    let index: HashMap<&PerturbationVector, f64> =
        records.iter().map(|r| (&r.vector, r.probability)).collect();
    let original = is_positive(y_original, boundary);
    let mut missing = std::collections::BTreeSet::new();
    for r in records {
        if r.vector.replaced_count() < 2 || is_positive(r.probability, boundary) == original {
            continue;
        }
        for j in r.vector.replaced() {
            let mut restored = r.vector.clone();
            restored.bits[j as usize - 1] = true;
            if !index.contains_key(&restored) {
                missing.insert(restored);
            }
        }
    }
    missing.into_iter().collect()
}

/// Image-counterfactuals among `records`: vectors whose class differs from
/// the original and for which restoring any single replaced segment brings
/// the original class back. Sorted by size, then lexicographically.
pub fn find_counterfactuals(
    records: &[PerturbationRecord],
    y_original: f64,
    boundary: f64,
) -> Result<Vec<Counterfactual>> {
    let index: HashMap<&PerturbationVector, f64> =
        records.iter().map(|r| (&r.vector, r.probability)).collect();
    let original = is_positive(y_original, boundary);
    let mut out = vec![];
    for r in records {
        let replaced = r.vector.replaced();
        if replaced.is_empty() || is_positive(r.probability, boundary) == original {
            continue;
        }
        let mut minimal = true;
        for &j in &replaced {
            let mut restored = r.vector.clone();
            restored.bits[j as usize - 1] = true;
            let p = if restored.replaced_count() == 0 {
                y_original
            } else {
                *index
                    .get(&restored)
                    .ok_or_else(|| Error::IncompleteEnumeration(replaced.clone()))?
            };
            if is_positive(p, boundary) != original {
                minimal = false;
                break;
            }
        }
        if minimal {
            out.push(Counterfactual {
                size: replaced.len(),
                replaced,
                probability: r.probability,
            });
        }
    }
    out.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.replaced.cmp(&b.replaced)));
    out.dedup();
    Ok(out)
}

/// Flags records that are counterfactuals.
pub fn mark_counterfactuals(records: &mut [PerturbationRecord], counterfactuals: &[Counterfactual]) {
    let set: std::collections::HashSet<&Vec<u32>> =
        counterfactuals.iter().map(|c| &c.replaced).collect();
    for r in records.iter_mut() {
        r.is_counterfactual = set.contains(&r.vector.replaced());
    }
}

/// CSV with columns `Seg01..SegNN,probability,is_counterfactual`.
pub fn records_to_csv(records: &[PerturbationRecord], n_segments: usize) -> String {
    let mut s = String::new();
    for i in 1..=n_segments {
        s.push_str(&format!("Seg{i:02},"));
    }
    s.push_str("probability,is_counterfactual\n");
    for r in records {
        for &b in r.vector.bits() {
            s.push_str(if b { "1," } else { "0," });
        }
        s.push_str(&format!("{},{}\n", r.probability, r.is_counterfactual));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_perturbations(12, 4, None, 0).len(), 793);
        let small = enumerate_perturbations(3, 4, None, 0);
        assert_eq!(small.len(), 7);
        assert_eq!(small[0].replaced(), vec![1]);
        assert_eq!(small[3].replaced(), vec![1, 2]);
        assert_eq!(small[6].replaced(), vec![1, 2, 3]);
    }

    #[test]
    fn capped_enumeration_keeps_small_sizes() {
        let v = enumerate_perturbations(20, 4, Some(1000), 7);
        assert_eq!(v.len(), 1000);
        assert_eq!(v.iter().filter(|p| p.replaced_count() <= 2).count(), 210);
        assert_eq!(v, enumerate_perturbations(20, 4, Some(1000), 7));
        let sizes: Vec<usize> = v.iter().map(|p| p.replaced_count()).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn compose_identity_and_full() {
        let x = Image::filled(4, 1, 0.2);
        let xp = Image::filled(4, 1, 0.8);
        let seg = LabelMap::new(4, 1, vec![1, 0, 2, 2]).unwrap();
        let same = compose_image(&x, &xp, &seg, &PerturbationVector::all_present(2)).unwrap();
        assert_eq!(same, x);
        let all = compose_image(&x, &xp, &seg, &PerturbationVector::replacing(2, &[1, 2])).unwrap();
        assert_eq!(all.pixels(), &[0.8, 0.2, 0.8, 0.8]);
        assert!(matches!(
            compose_image(&x, &xp, &seg, &PerturbationVector::all_present(3)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    fn rec(n: usize, replaced: &[u32], p: f64) -> PerturbationRecord {
        PerturbationRecord {
            vector: PerturbationVector::replacing(n, replaced),
            probability: p,
            is_counterfactual: false,
        }
    }

    #[test]
    fn pair_counterfactual_is_minimal_only_when_singles_hold() {
        // segments 4 and 11 of a 12-segment image
        let records = vec![rec(12, &[4], 0.97), rec(12, &[11], 0.96), rec(12, &[4, 11], 0.43)];
        let c = find_counterfactuals(&records, 0.98, 0.5).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].replaced, vec![4, 11]);
        assert_eq!(c[0].probability, 0.43);
    }

    #[test]
    fn missing_subrecord_is_reported() {
        let records = vec![rec(5, &[1], 0.9), rec(5, &[1, 2], 0.1)];
        assert!(matches!(
            find_counterfactuals(&records, 0.95, 0.5),
            Err(Error::IncompleteEnumeration(_))
        ));
        let missing = missing_minimality_vectors(&records, 0.95, 0.5);
        assert_eq!(missing, vec![PerturbationVector::replacing(5, &[2])]);
    }

    #[test]
    fn csv_layout() {
        let records = vec![rec(2, &[1], 0.25)];
        assert_eq!(
            records_to_csv(&records, 2),
            "Seg01,Seg02,probability,is_counterfactual\n0,1,0.25,false\n"
        );
    }
}
