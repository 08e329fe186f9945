//! Saliency evaluation against annotated targets: the multi-target pointing
//! game, IoU, the IoU threshold sweep and 95% confidence intervals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{check_dims, BinaryMask, SaliencyMap};

pub const GRID: usize = 7;
pub const DEFAULT_IOU_PERCENT: u32 = 70;
pub const DEFAULT_SWEEP: [u32; 4] = [60, 70, 80, 90];

/// How signed saliency values are read before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaliencyMode {
    /// `max(v, 0)`
    #[default]
    Positive,
    /// `|v|`
    Absolute,
}

impl SaliencyMode {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            SaliencyMode::Positive => v.max(0.0),
            SaliencyMode::Absolute => v.abs(),
        }
    }
}

impl FromStr for SaliencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(SaliencyMode::Positive),
            "absolute" | "abs" => Ok(SaliencyMode::Absolute),
            other => Err(Error::Config(format!("unknown saliency mode {other:?}"))),
        }
    }
}

/// Target regions of one image; every mask is non-empty and same-sized.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTargets {
    masks: Vec<BinaryMask>,
}

impl AnnotatedTargets {
    pub fn new(masks: Vec<BinaryMask>) -> Result<Self> {
        let first = masks.first().ok_or(Error::EmptyTargets)?;
        for (i, m) in masks.iter().enumerate() {
            check_dims(first.dims(), m.dims())?;
            if m.is_empty() {
                return Err(Error::InvalidArgument(format!("target {i} has no pixels")));
            }
        }
        Ok(Self { masks })
    }

    pub fn from_targets(targets: &[crate::synthetic::Target]) -> Result<Self> {
        Self::new(targets.iter().map(|t| t.mask.clone()).collect())
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    pub fn dims(&self) -> (usize, usize) {
        self.masks[0].dims()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn union(&self) -> BinaryMask {
        let (w, h) = self.dims();
        BinaryMask::from_fn(w, h, |x, y| self.masks.iter().any(|m| m.get(x, y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointingGameResult {
    pub hits: usize,
    pub misses: usize,
    pub score: f64,
}

/// Start of grid cell `i` along an axis of length `len`.
fn cell_start(i: usize, len: usize) -> usize {
    i * len / GRID
}

fn cell_of(p: usize, len: usize) -> usize {
    (0..GRID)
        .rev()
        .find(|&i| cell_start(i, len) <= p)
        .expect("cell 0 starts at 0")
}

/// Mean of `mode`-transformed saliency per square, row-major.
pub fn square_scores(saliency: &SaliencyMap, mode: SaliencyMode) -> [f64; GRID * GRID] {
    let (w, h) = saliency.dims();
    let mut q = [0.0; GRID * GRID];
    for r in 0..GRID {
        for c in 0..GRID {
            let (y0, y1) = (cell_start(r, h), cell_start(r + 1, h));
            let (x0, x1) = (cell_start(c, w), cell_start(c + 1, w));
            let n = (y1 - y0) * (x1 - x0);
            if n == 0 {
                continue;
            }
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += mode.apply(saliency.get(x, y));
                }
            }
            q[r * GRID + c] = sum / n as f64;
        }
    }
    q
}

/// Squares touched by at least one pixel of `mask`.
pub fn squares_of(mask: &BinaryMask) -> [bool; GRID * GRID] {
    let (w, h) = mask.dims();
    let cols: Vec<usize> = (0..w).map(|x| cell_of(x, w)).collect();
    let mut hit = [false; GRID * GRID];
    for y in 0..h {
        let r = cell_of(y, h);
        for x in 0..w {
            if mask.get(x, y) {
                hit[r * GRID + cols[x]] = true;
            }
        }
    }
    hit
}

pub fn pointing_game(saliency: &SaliencyMap, targets: &AnnotatedTargets) -> Result<PointingGameResult> {
    pointing_game_with(saliency, targets, SaliencyMode::Positive)
}

/// Visits squares by decreasing mean saliency (raster order on ties). Every
/// visited square scores a hit for each target it touches and a miss for each
/// target it does not, until every target has been hit once.
pub fn pointing_game_with(
    saliency: &SaliencyMap,
    targets: &AnnotatedTargets,
    mode: SaliencyMode,
) -> Result<PointingGameResult> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    check_dims(targets.dims(), saliency.dims())?;
    let q = square_scores(saliency, mode);
    let p: Vec<[bool; GRID * GRID]> = targets.masks().iter().map(squares_of).collect();
    let mut order: Vec<usize> = (0..GRID * GRID).collect();
    order.sort_by(|&a, &b| q[b].total_cmp(&q[a]));
    let (mut hits, mut misses) = (0, 0);
    let mut found = vec![false; p.len()];
    for &sq in &order {
        for (j, pa) in p.iter().enumerate() {
            if pa[sq] {
                hits += 1;
                found[j] = true;
            } else {
                misses += 1;
            }
        }
        if found.iter().all(|&f| f) {
            break;
        }
    }
    Ok(PointingGameResult {
        hits,
        misses,
        score: hits as f64 / (hits + misses) as f64,
    })
}

pub fn iou(saliency: &SaliencyMap, targets: &AnnotatedTargets, threshold_pct: u32) -> Result<f64> {
    iou_with(saliency, targets, threshold_pct, SaliencyMode::Positive)
}

/// Salient pixels are those strictly above `threshold_pct`% of the maximum.
pub fn iou_with(
    saliency: &SaliencyMap,
    targets: &AnnotatedTargets,
    threshold_pct: u32,
    mode: SaliencyMode,
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    check_dims(targets.dims(), saliency.dims())?;
    let values: Vec<f64> = saliency.values.iter().map(|&v| mode.apply(v)).collect();
    let max = values.iter().fold(0.0f64, |m, &v| m.max(v));
    if max <= 0.0 {
        return Err(Error::ZeroSaliency);
    }
    let cut = threshold_pct as f64 / 100.0 * max;
    let truth = targets.union();
    let (mut inter, mut union) = (0usize, 0usize);
    for (&v, &t) in values.iter().zip(truth.bits()) {
        let s = v > cut;
        inter += (s && t) as usize;
        union += (s || t) as usize;
    }
    Ok(inter as f64 / union as f64)
}

pub fn threshold_sweep(
    saliency: &SaliencyMap,
    targets: &AnnotatedTargets,
    percents: &[u32],
    mode: SaliencyMode,
) -> Result<BTreeMap<u32, f64>> {
    percents
        .iter()
        .map(|&p| Ok((p, iou_with(saliency, targets, p, mode)?)))
        .collect()
}

/// Threshold with the highest mean IoU over a batch of sweeps; the lowest
/// percent wins ties.
pub fn best_threshold(sweeps: &[BTreeMap<u32, f64>]) -> Option<(u32, f64)> {
    let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for s in sweeps {
        for (&p, &v) in s {
            let e = sums.entry(p).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(p, (s, n))| (p, s / n as f64))
        .fold(None, |best, (p, m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((p, m)),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub ci95: f64,
}

impl Aggregate {
    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }

    pub fn overlaps(&self, other: &Aggregate) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

/// Mean and normal-approximation 95% half-width `1.96 s / sqrt(n)`.
pub fn aggregate(scores: &[f64]) -> Result<Aggregate> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Aggregate {
        n,
        mean,
        ci95: 1.96 * var.sqrt() / (n as f64).sqrt(),
    })
}

/// Uniform iid pixel noise in `[0, 1)`.
pub fn random_saliency(width: usize, height: usize, seed: u64) -> SaliencyMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..width * height).map(|_| rng.gen::<f64>()).collect();
    SaliencyMap {
        width,
        height,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub pointing_game: PointingGameResult,
    /// `None` when the map has no positive value.
    pub iou: Option<f64>,
    pub sweep: BTreeMap<u32, f64>,
}

pub fn score_image(
    id: impl Into<String>,
    saliency: &SaliencyMap,
    targets: &AnnotatedTargets,
    iou_percent: u32,
    sweep: &[u32],
    mode: SaliencyMode,
) -> Result<ImageScore> {
    let pg = pointing_game_with(saliency, targets, mode)?;
    let (iou, sweep) = match iou_with(saliency, targets, iou_percent, mode) {
        Ok(v) => (Some(v), threshold_sweep(saliency, targets, sweep, mode)?),
        Err(Error::ZeroSaliency) => (None, BTreeMap::new()),
        Err(e) => return Err(e),
    };
    Ok(ImageScore {
        id: id.into(),
        pointing_game: pg,
        iou,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub method: String,
    pub n_images: usize,
    pub pointing_game: Option<Aggregate>,
    pub iou: Option<Aggregate>,
    pub iou_percent: u32,
    /// Mean IoU per sweep threshold.
    pub sweep: BTreeMap<u32, f64>,
    pub best_threshold: Option<u32>,
    pub zero_saliency_images: usize,
}

pub fn summarize(method: impl Into<String>, scores: &[ImageScore], iou_percent: u32) -> EvaluationSummary {
    let pg: Vec<f64> = scores.iter().map(|s| s.pointing_game.score).collect();
    let ious: Vec<f64> = scores.iter().filter_map(|s| s.iou).collect();
    let sweeps: Vec<BTreeMap<u32, f64>> = scores
        .iter()
        .filter(|s| !s.sweep.is_empty())
        .map(|s| s.sweep.clone())
        .collect();
    let mut sweep = BTreeMap::new();
    for s in &sweeps {
        for (&p, &v) in s {
            *sweep.entry(p).or_insert(0.0) += v / sweeps.len() as f64;
        }
    }
    EvaluationSummary {
        method: method.into(),
        n_images: scores.len(),
        pointing_game: aggregate(&pg).ok(),
        iou: aggregate(&ious).ok(),
        iou_percent,
        sweep,
        best_threshold: best_threshold(&sweeps).map(|(p, _)| p),
        zero_saliency_images: scores.len() - ious.len(),
    }
}

pub fn scores_to_csv(scores: &[ImageScore]) -> String {
    let percents: Vec<u32> = scores
        .iter()
        .flat_map(|s| s.sweep.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::from("id,hits,misses,pointing_game,iou");
    for p in &percents {
        let _ = write!(out, ",iou_{p}");
    }
    out.push('\n');
    for s in scores {
        let pg = &s.pointing_game;
        let iou = s.iou.map(|v| v.to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{},{},{}", s.id, pg.hits, pg.misses, pg.score, iou);
        for p in &percents {
            let v = s.sweep.get(p).map(|v| v.to_string()).unwrap_or_default();
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Grouped bar chart of pointing game and IoU means with CI whiskers.
pub fn summary_svg(summaries: &[EvaluationSummary]) -> String {
    let (bar, gap, plot_h, left, top) = (28.0, 24.0, 200.0, 40.0, 20.0);
    let group = 2.0 * bar + gap;
    let width = left + group * summaries.len() as f64 + gap;
    let height = top + plot_h + 60.0;
    let y = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{width}\" y2=\"{}\" stroke=\"black\"/>",
        y(0.0),
        y(0.0)
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{t:.2}</text>",
            left - 4.0,
            y(t) + 4.0
        );
    }
    for (i, sum) in summaries.iter().enumerate() {
        let x0 = left + gap + group * i as f64;
        for (k, (agg, color)) in [(sum.pointing_game, "#2e8b57"), (sum.iou, "#7b3fa0")].into_iter().enumerate() {
            let Some(a) = agg else { continue };
            let x = x0 + k as f64 * bar;
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
                y(a.mean),
                bar - 2.0,
                y(0.0) - y(a.mean)
            );
            let cx = x + (bar - 2.0) / 2.0;
            let _ = writeln!(
                s,
                "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>",
                y(a.upper()),
                y(a.lower())
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            x0 + bar,
            y(0.0) + 16.0,
            escape(&sum.method)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_scores_csv(scores: &[ImageScore], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scores_to_csv(scores)).map_err(|e| Error::io(path, e))
}
