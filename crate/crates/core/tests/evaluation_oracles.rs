//! Pointing game, IoU and aggregation against hand traces and direct
//! recomputation.

use contrast_xai::evaluation::{
    aggregate, best_threshold, iou, pointing_game, random_saliency, threshold_sweep,
    AnnotatedTargets, SaliencyMode,
};
use contrast_xai::imaging::{BinaryMask, SaliencyMap};
use contrast_xai::Error;
use proptest::prelude::*;

const SIDE: usize = 70;
const CELL: usize = 10;

fn block_map(cells: &[f64; 49]) -> SaliencyMap {
    let values = (0..SIDE * SIDE)
        .map(|i| cells[(i / SIDE / CELL) * 7 + (i % SIDE) / CELL])
        .collect();
    SaliencyMap::new(SIDE, SIDE, values).unwrap()
}

fn cell_mask(cells: &[(usize, usize)]) -> BinaryMask {
    BinaryMask::from_fn(SIDE, SIDE, |x, y| cells.contains(&(y / CELL, x / CELL)))
}

fn two_targets() -> AnnotatedTargets {
    AnnotatedTargets::new(vec![cell_mask(&[(1, 1)]), cell_mask(&[(3, 4), (3, 5)])]).unwrap()
}

#[test]
fn hand_traced_two_target_game() {
    let mut cells = [0.0; 49];
    cells[0] = 0.9;
    cells[7 + 1] = 0.8;
    cells[3 * 7 + 5] = 0.7;
    cells[6 * 7 + 6] = -2.0;
    // (0,0): miss A, miss B. (1,1): hit A, miss B. (3,5): miss A, hit B.
    let r = pointing_game(&block_map(&cells), &two_targets()).unwrap();
    assert_eq!((r.hits, r.misses), (2, 4));
    assert_eq!(r.score, 2.0 / 6.0);
}

#[test]
fn flat_map_walks_raster_order() {
    // Square 8 hits A, square 25 hits B; 26 squares visited.
    let r = pointing_game(&block_map(&[0.0; 49]), &two_targets()).unwrap();
    assert_eq!((r.hits, r.misses), (2, 50));
}

#[test]
fn single_target_found_first() {
    let mut cells = [0.1; 49];
    cells[20] = 1.0;
    let t = AnnotatedTargets::new(vec![cell_mask(&[(2, 6)])]).unwrap();
    let r = pointing_game(&block_map(&cells), &t).unwrap();
    assert_eq!((r.hits, r.misses, r.score), (1, 0, 1.0));
}

#[test]
fn iou_one_third() {
    let w = 20;
    let salient = |x: usize, y: usize| y < 5 && x < 20;
    let target = |x: usize, y: usize| (y < 5 && x >= 10) || (y >= 5 && y < 10 && x >= 10);
    let values = (0..w * w).map(|i| if salient(i % w, i / w) { 1.0 } else { 0.0 }).collect();
    let s = SaliencyMap::new(w, w, values).unwrap();
    let t = AnnotatedTargets::new(vec![BinaryMask::from_fn(w, w, target)]).unwrap();
    assert_eq!(iou(&s, &t, 70).unwrap(), 50.0 / 150.0);
}

#[test]
fn zero_saliency_has_no_iou() {
    let s = SaliencyMap::new(SIDE, SIDE, vec![-1.0; SIDE * SIDE]).unwrap();
    assert!(matches!(iou(&s, &two_targets(), 70), Err(Error::ZeroSaliency)));
}

#[test]
fn sweep_matches_direct_counts() {
    let w = 30;
    let values: Vec<f64> = (0..w * w).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
    let s = SaliencyMap::new(w, w, values.clone()).unwrap();
    let mask = BinaryMask::from_fn(w, w, |x, y| x > 8 && y > 12);
    let t = AnnotatedTargets::new(vec![mask.clone()]).unwrap();
    let sweep = threshold_sweep(&s, &t, &[60, 70, 80, 90], SaliencyMode::Positive).unwrap();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    for (&pct, &v) in &sweep {
        let sal: Vec<bool> = values.iter().map(|&v| v > pct as f64 / 100.0 * max).collect();
        let inter = sal.iter().zip(mask.bits()).filter(|(a, b)| **a && **b).count();
        let uni = sal.iter().zip(mask.bits()).filter(|(a, b)| **a || **b).count();
        assert_eq!(v, inter as f64 / uni as f64, "pct {pct}");
    }
    assert_eq!(best_threshold(&[sweep.clone(), sweep.clone()]).unwrap().1, {
        sweep.values().cloned().fold(f64::MIN, f64::max)
    });
}

#[test]
fn aggregate_matches_two_pass_statistics() {
    let xs = [0.2, 0.5, 0.25, 1.0, 0.0, 0.4, 0.3];
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| x * x).sum::<f64>() - n * mean * mean;
    let half = 1.96 * (ss / (n - 1.0)).sqrt() / n.sqrt();
    let a = aggregate(&xs).unwrap();
    assert!((a.mean - mean).abs() < 1e-12);
    assert!((a.ci95 - half).abs() < 1e-12);
    assert!(matches!(aggregate(&[0.3]), Err(Error::InsufficientData { .. })));
}

#[test]
fn random_baseline_is_reproducible() {
    assert_eq!(random_saliency(16, 9, 4).values, random_saliency(16, 9, 4).values);
    assert_ne!(random_saliency(16, 9, 4).values, random_saliency(16, 9, 5).values);
}

fn cells_strategy() -> impl Strategy<Value = [f64; 49]> {
    prop::array::uniform32(-1.0f64..1.0)
        .prop_flat_map(|a| (Just(a), prop::array::uniform17(-1.0f64..1.0)))
        .prop_map(|(a, b)| {
            let mut out = [0.0; 49];
            out[..32].copy_from_slice(&a);
            out[32..].copy_from_slice(&b);
            out
        })
}

fn targets_strategy() -> impl Strategy<Value = AnnotatedTargets> {
    prop::collection::vec(prop::collection::vec((0usize..7, 0usize..7), 1..4), 1..4)
        .prop_map(|ts| AnnotatedTargets::new(ts.iter().map(|c| cell_mask(c)).collect()).unwrap())
}

proptest! {
    #[test]
    fn pointing_game_is_invariant_under_monotone_maps(
        cells in cells_strategy(),
        targets in targets_strategy(),
        a in 0.01f64..100.0,
        b in 0.1f64..5.0,
        c in 0.0f64..3.0,
    ) {
        let f = |v: f64| a * (b * v).exp_m1() + c * v * v * v;
        let base = pointing_game(&block_map(&cells), &targets).unwrap();
        let moved = pointing_game(&block_map(&cells.map(f)), &targets).unwrap();
        prop_assert_eq!(base, moved);
        prop_assert!(base.hits + base.misses <= 49 * targets.len());
        prop_assert!(base.hits >= targets.len());
    }

    #[test]
    fn iou_is_invariant_under_positive_scaling(
        values in prop::collection::vec(-1.0f64..1.0, SIDE * SIDE),
        targets in targets_strategy(),
        k in 0.001f64..1000.0,
        pct in 50u32..95,
    ) {
        let s = SaliencyMap::new(SIDE, SIDE, values.clone()).unwrap();
        let scaled = s.map(|v| v * k);
        prop_assert_eq!(iou(&s, &targets, pct).unwrap(), iou(&scaled, &targets, pct).unwrap());
    }
}
