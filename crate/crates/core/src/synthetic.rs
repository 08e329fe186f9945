//! Synthetic shape scenes with a known disease rule.
//!
//! Every scene holds a pair of concentric circles, a large ellipse and a
//! small ellipse; a square (inside the large ellipse) and a triangle are
//! optional. A scene is diseased when it has a square together with either a
//! thin-lined small ellipse or a triangle. The contrast image of a scene is
//! its healthy counterpart: square and triangle removed and the small
//! ellipse redrawn thick.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::io::{load_image, read_json, save_image, write_json, RunLength};
use crate::imaging::{BinaryMask, Image};

pub const BACKGROUND: f32 = 0.0;
pub const CIRCLE_INTENSITY: f32 = 0.45;
pub const LARGE_ELLIPSE_INTENSITY: f32 = 0.55;
pub const SMALL_ELLIPSE_INTENSITY: f32 = 0.75;
pub const SQUARE_INTENSITY: f32 = 0.9;
pub const TRIANGLE_INTENSITY: f32 = 1.0;
pub const NOISE_SIGMA: f64 = 0.02;

const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Healthy,
    Diseased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineWeight {
    Thin,
    Thick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circles {
    pub center: (f64, f64),
    pub radii: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axes along the rotated x and y directions.
    pub axes: (f64, f64),
    /// Rotation in radians.
    pub rotation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallEllipse {
    pub ellipse: Ellipse,
    pub line: LineWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub center: (f64, f64),
    pub side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [(f64, f64); 3],
}

/// Geometry of one synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub concentric_circles: Circles,
    pub large_ellipse: Ellipse,
    pub small_ellipse: SmallEllipse,
    pub square: Option<Square>,
    pub triangle: Option<Triangle>,
    pub rng_seed: u64,
}

/// Line thicknesses in pixels, fixed across scene sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strokes {
    pub circle: f64,
    pub large_ellipse: f64,
    pub thin: f64,
    pub thick: f64,
}

impl Default for Strokes {
    fn default() -> Self {
        Self {
            circle: 1.5,
            large_ellipse: 2.0,
            thin: 1.0,
            thick: 5.0,
        }
    }
}

/// A disease-evidence region of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub label: Label,
    pub targets: Vec<Target>,
}

/// Disease rule: a square together with a thin small ellipse or a triangle.
pub fn ground_truth_label(spec: &SceneSpec) -> Label {
    let square = spec.square.is_some();
    let thin = spec.small_ellipse.line == LineWeight::Thin;
    let triangle = spec.triangle.is_some();
    if (square && thin) || (square && triangle) {
        Label::Diseased
    } else {
        Label::Healthy
    }
}

impl SceneSpec {
    /// The healthy counterpart used as contrast image.
    pub fn healthy_counterpart(&self) -> SceneSpec {
        SceneSpec {
            square: None,
            triangle: None,
            small_ellipse: SmallEllipse {
                line: LineWeight::Thick,
                ..self.small_ellipse
            },
            ..self.clone()
        }
    }
}

fn rotate_into(e: &Ellipse, px: f64, py: f64) -> (f64, f64) {
    let (dx, dy) = (px - e.center.0, py - e.center.1);
    let (s, c) = e.rotation.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

/// Radial distance from a point to the ellipse outline.
fn ellipse_outline_distance(e: &Ellipse, px: f64, py: f64) -> f64 {
    let (u, v) = rotate_into(e, px, py);
    let r = u.hypot(v);
    if r == 0.0 {
        return e.axes.0.min(e.axes.1);
    }
    let (cos, sin) = (u / r, v / r);
    let rho = 1.0 / ((cos / e.axes.0).powi(2) + (sin / e.axes.1).powi(2)).sqrt();
    (r - rho).abs()
}

fn ellipse_contains(e: &Ellipse, px: f64, py: f64) -> bool {
    let (u, v) = rotate_into(e, px, py);
    (u / e.axes.0).powi(2) + (v / e.axes.1).powi(2) <= 1.0
}

fn triangle_contains(t: &Triangle, px: f64, py: f64) -> bool {
    let edge = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (py - a.1) - (b.1 - a.1) * (px - a.0);
    let [a, b, c] = t.vertices;
    let (d1, d2, d3) = (edge(a, b), edge(b, c), edge(c, a));
    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(neg && pos)
}

fn square_contains(s: &Square, px: f64, py: f64) -> bool {
    let h = s.side / 2.0;
    (px - s.center.0).abs() <= h && (py - s.center.1).abs() <= h
}

/// One drawable primitive: coverage predicate at sub-pixel points plus a
/// bounding box used to limit supersampling.
enum Shape {
    Ring { center: (f64, f64), radius: f64, stroke: f64 },
    Outline { ellipse: Ellipse, stroke: f64 },
    Square(Square),
    Triangle(Triangle),
}

impl Shape {
    fn covers(&self, px: f64, py: f64) -> bool {
        match self {
            Shape::Ring {
                center,
                radius,
                stroke,
            } => ((px - center.0).hypot(py - center.1) - radius).abs() <= stroke / 2.0,
            Shape::Outline { ellipse, stroke } => {
                ellipse_outline_distance(ellipse, px, py) <= stroke / 2.0
            }
            Shape::Square(s) => square_contains(s, px, py),
            Shape::Triangle(t) => triangle_contains(t, px, py),
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Shape::Ring {
                center,
                radius,
                stroke,
            } => {
                let r = radius + stroke;
                (center.0 - r, center.1 - r, center.0 + r, center.1 + r)
            }
            Shape::Outline { ellipse, stroke } => {
                let r = ellipse.axes.0.max(ellipse.axes.1) + stroke;
                (
                    ellipse.center.0 - r,
                    ellipse.center.1 - r,
                    ellipse.center.0 + r,
                    ellipse.center.1 + r,
                )
            }
            Shape::Square(s) => {
                let h = s.side / 2.0;
                (s.center.0 - h, s.center.1 - h, s.center.0 + h, s.center.1 + h)
            }
            Shape::Triangle(t) => {
                let xs = t.vertices.map(|v| v.0);
                let ys = t.vertices.map(|v| v.1);
                (
                    xs.iter().copied().fold(f64::INFINITY, f64::min),
                    ys.iter().copied().fold(f64::INFINITY, f64::min),
                    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
        }
    }

    /// Fraction of each pixel covered, from a regular sub-pixel grid.
    fn coverage(&self, width: usize, height: usize) -> Vec<f32> {
        let mut cov = vec![0.0f32; width * height];
        let (x0, y0, x1, y1) = self.bounds();
        let xs = (x0.floor().max(0.0) as usize).min(width);
        let ys = (y0.floor().max(0.0) as usize).min(height);
        let xe = ((x1.ceil() + 1.0).max(0.0) as usize).min(width);
        let ye = ((y1.ceil() + 1.0).max(0.0) as usize).min(height);
        let step = 1.0 / SUPERSAMPLE as f64;
        for y in ys..ye {
            for x in xs..xe {
                let mut hits = 0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let px = x as f64 + (sx as f64 + 0.5) * step;
                        let py = y as f64 + (sy as f64 + 0.5) * step;
                        if self.covers(px, py) {
                            hits += 1;
                        }
                    }
                }
                cov[y * width + x] = hits as f32 / (SUPERSAMPLE * SUPERSAMPLE) as f32;
            }
        }
        cov
    }
}

fn small_ellipse_shape(e: &SmallEllipse, strokes: &Strokes) -> Shape {
    Shape::Outline {
        ellipse: e.ellipse,
        stroke: match e.line {
            LineWeight::Thin => strokes.thin,
            LineWeight::Thick => strokes.thick,
        },
    }
}

fn layers(spec: &SceneSpec, strokes: &Strokes) -> Vec<(Shape, f32)> {
    let c = &spec.concentric_circles;
    let mut out = vec![];
    for r in c.radii {
        out.push((
            Shape::Ring {
                center: c.center,
                radius: r,
                stroke: strokes.circle,
            },
            CIRCLE_INTENSITY,
        ));
    }
    out.push((
        Shape::Outline {
            ellipse: spec.large_ellipse,
            stroke: strokes.large_ellipse,
        },
        LARGE_ELLIPSE_INTENSITY,
    ));
    out.push((small_ellipse_shape(&spec.small_ellipse, strokes), SMALL_ELLIPSE_INTENSITY));
    if let Some(s) = spec.square {
        out.push((Shape::Square(s), SQUARE_INTENSITY));
    }
    if let Some(t) = spec.triangle {
        out.push((Shape::Triangle(t), TRIANGLE_INTENSITY));
    }
    out
}

fn noise_field(seed: u64, n: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
}

fn render(spec: &SceneSpec, size: (usize, usize), strokes: &Strokes, noise: &[f32]) -> Image {
    let (w, h) = size;
    let mut canvas = vec![BACKGROUND; w * h];
    for (shape, intensity) in layers(spec, strokes) {
        let cov = shape.coverage(w, h);
        for (px, c) in canvas.iter_mut().zip(cov) {
            if c > 0.0 {
                *px = *px * (1.0 - c) + intensity * c;
            }
        }
    }
    let mut img = Image::filled(w, h, 0.0);
    for (dst, (v, n)) in img.pixels_mut().iter_mut().zip(canvas.iter().zip(noise)) {
        *dst = (v + n).clamp(0.0, 1.0);
    }
    img
}

fn footprint(shape: &Shape, size: (usize, usize)) -> BinaryMask {
    let cov = shape.coverage(size.0, size.1);
    BinaryMask::new(size.0, size.1, cov.iter().map(|&c| c >= 0.5).collect())
        .expect("sized from dims")
}

fn within_bounds(b: (f64, f64, f64, f64), size: (usize, usize)) -> bool {
    b.0 >= 0.0 && b.1 >= 0.0 && b.2 <= size.0 as f64 && b.3 <= size.1 as f64
}

/// Checks the geometric invariants of `spec` at the given image size.
pub fn validate_spec(spec: &SceneSpec, size: (usize, usize), strokes: &Strokes) -> Result<()> {
    for (shape, _) in layers(spec, strokes)
        .into_iter()
        .chain(std::iter::once((
            small_ellipse_shape(
                &SmallEllipse {
                    line: LineWeight::Thick,
                    ..spec.small_ellipse
                },
                strokes,
            ),
            0.0,
        )))
    {
        if !within_bounds(shape.bounds(), size) {
            return Err(Error::InvalidSpec(format!(
                "shape with bounds {:?} leaves the {}x{} image",
                shape.bounds(),
                size.0,
                size.1
            )));
        }
    }
    if let Some(s) = spec.square {
        let h = s.side / 2.0;
        let corners = [(-h, -h), (h, -h), (-h, h), (h, h)];
        if s.side <= 0.0
            || !corners
                .iter()
                .all(|(dx, dy)| ellipse_contains(&spec.large_ellipse, s.center.0 + dx, s.center.1 + dy))
        {
            return Err(Error::InvalidSpec(
                "square must lie inside the large ellipse".into(),
            ));
        }
    }
    let ax = spec.small_ellipse.ellipse.axes;
    if ax.0 <= 0.0 || ax.1 <= 0.0 || spec.large_ellipse.axes.0 <= 0.0 || spec.large_ellipse.axes.1 <= 0.0
    {
        return Err(Error::InvalidSpec("ellipse axes must be positive".into()));
    }
    Ok(())
}

/// Renders a scene and its healthy contrast image, with ground truth.
pub fn generate_pair(
    spec: &SceneSpec,
    size: (usize, usize),
) -> Result<(Image, Image, GroundTruth)> {
    generate_pair_with(spec, size, &Strokes::default())
}

pub fn generate_pair_with(
    spec: &SceneSpec,
    size: (usize, usize),
    strokes: &Strokes,
) -> Result<(Image, Image, GroundTruth)> {
    validate_spec(spec, size, strokes)?;
    let noise = noise_field(spec.rng_seed, size.0 * size.1);
    let x = render(spec, size, strokes, &noise);
    let healthy = spec.healthy_counterpart();
    let x_prime = render(&healthy, size, strokes, &noise);

    let label = ground_truth_label(spec);
    let mut targets = vec![];
    if label == Label::Diseased {
        if let Some(s) = spec.square {
            targets.push(Target {
                name: "square".into(),
                mask: footprint(&Shape::Square(s), size),
            });
        }
        if let Some(t) = spec.triangle {
            targets.push(Target {
                name: "triangle".into(),
                mask: footprint(&Shape::Triangle(t), size),
            });
        }
        if spec.small_ellipse.line == LineWeight::Thin {
            let thin = footprint(&small_ellipse_shape(&spec.small_ellipse, strokes), size);
            let thick = footprint(&small_ellipse_shape(&healthy.small_ellipse, strokes), size);
            targets.push(Target {
                name: "thin_small_ellipse".into(),
                mask: thin.union(&thick)?,
            });
        }
    }
    Ok((x, x_prime, GroundTruth { label, targets }))
}

/// Sampling ranges for random scenes, in pixels of a 128x128 canvas; they
/// scale linearly with the requested size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRanges {
    pub size: (usize, usize),
    pub circles_center: (f64, f64),
    pub circles_jitter: f64,
    pub inner_radius: (f64, f64),
    pub ring_gap: f64,
    pub large_center: (f64, f64),
    pub large_jitter: f64,
    pub large_axes: ((f64, f64), (f64, f64)),
    pub large_rotation: f64,
    /// Offsets from the large ellipse centre.
    pub small_offset: (f64, f64),
    pub small_axes: ((f64, f64), (f64, f64)),
    pub square_offset: (f64, f64),
    pub square_side: (f64, f64),
    pub triangle_offset: (f64, f64),
    pub triangle_radius: (f64, f64),
    pub inner_jitter: f64,
    /// Minimum pixel gap between disease-evidence footprints.
    pub target_gap: usize,
    pub strokes: Strokes,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            size: (128, 128),
            circles_center: (22.0, 22.0),
            circles_jitter: 3.0,
            inner_radius: (7.0, 9.0),
            ring_gap: 5.0,
            large_center: (74.0, 74.0),
            large_jitter: 3.0,
            large_axes: ((40.0, 44.0), (32.0, 36.0)),
            large_rotation: 0.25,
            small_offset: (-16.0, 8.0),
            small_axes: ((10.0, 13.0), (6.0, 8.0)),
            square_offset: (14.0, -10.0),
            square_side: (12.0, 15.0),
            triangle_offset: (12.0, 17.0),
            triangle_radius: (8.0, 10.0),
            inner_jitter: 3.0,
            target_gap: 3,
            strokes: Strokes::default(),
        }
    }
}

/// Which optional elements a scene carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneKind {
    pub square: bool,
    pub triangle: bool,
    pub thin: bool,
}

impl SceneKind {
    pub const DISEASED: [SceneKind; 3] = [
        SceneKind { square: true, triangle: false, thin: true },
        SceneKind { square: true, triangle: true, thin: false },
        SceneKind { square: true, triangle: true, thin: true },
    ];
    pub const HEALTHY: [SceneKind; 5] = [
        SceneKind { square: false, triangle: false, thin: false },
        SceneKind { square: true, triangle: false, thin: false },
        SceneKind { square: false, triangle: true, thin: false },
        SceneKind { square: false, triangle: false, thin: true },
        SceneKind { square: false, triangle: true, thin: true },
    ];
}

fn dilate(mask: &BinaryMask, r: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    let r = r as isize;
    BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).any(|dy| {
            (-r..=r).any(|dx| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && mask.get(nx as usize, ny as usize)
            })
        })
    })
}

impl SceneRanges {
    fn scale(&self) -> f64 {
        (self.size.0.min(self.size.1)) as f64 / 128.0
    }

    fn draw(&self, rng: &mut ChaCha8Rng, kind: SceneKind) -> SceneSpec {
        let k = self.scale();
        let mut u = |lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let jit = |u: &mut dyn FnMut(f64, f64) -> f64, j: f64| u(-j, j) * k;

        let circles_center = (
            self.circles_center.0 * k + jit(&mut u, self.circles_jitter),
            self.circles_center.1 * k + jit(&mut u, self.circles_jitter),
        );
        let r0 = u(self.inner_radius.0, self.inner_radius.1) * k;
        let large_center = (
            self.large_center.0 * k + jit(&mut u, self.large_jitter),
            self.large_center.1 * k + jit(&mut u, self.large_jitter),
        );
        let large = Ellipse {
            center: large_center,
            axes: (
                u(self.large_axes.0 .0, self.large_axes.0 .1) * k,
                u(self.large_axes.1 .0, self.large_axes.1 .1) * k,
            ),
            rotation: u(-self.large_rotation, self.large_rotation),
        };
        let small = Ellipse {
            center: (
                large_center.0 + self.small_offset.0 * k + jit(&mut u, self.inner_jitter),
                large_center.1 + self.small_offset.1 * k + jit(&mut u, self.inner_jitter),
            ),
            axes: (
                u(self.small_axes.0 .0, self.small_axes.0 .1) * k,
                u(self.small_axes.1 .0, self.small_axes.1 .1) * k,
            ),
            rotation: u(0.0, std::f64::consts::PI),
        };
        // Edges on pixel boundaries, so the square has no partially covered rim.
        let square_side = (u(self.square_side.0, self.square_side.1) * k).round().max(1.0);
        let snap = |c: f64| (c - square_side / 2.0).round() + square_side / 2.0;
        let square_center = (
            snap(large_center.0 + self.square_offset.0 * k + jit(&mut u, self.inner_jitter)),
            snap(large_center.1 + self.square_offset.1 * k + jit(&mut u, self.inner_jitter)),
        );
        let tri_center = (
            large_center.0 + self.triangle_offset.0 * k + jit(&mut u, self.inner_jitter),
            large_center.1 + self.triangle_offset.1 * k + jit(&mut u, self.inner_jitter),
        );
        let tri_r = u(self.triangle_radius.0, self.triangle_radius.1) * k;
        let phase = u(0.0, 2.0 * std::f64::consts::PI / 3.0);
        let vertex = |i: usize| {
            let a = phase + i as f64 * 2.0 * std::f64::consts::PI / 3.0;
            (tri_center.0 + tri_r * a.cos(), tri_center.1 + tri_r * a.sin())
        };
        let seed = rng.gen();
        SceneSpec {
            concentric_circles: Circles {
                center: circles_center,
                radii: [r0, r0 + self.ring_gap * k],
            },
            large_ellipse: large,
            small_ellipse: SmallEllipse {
                ellipse: small,
                line: if kind.thin { LineWeight::Thin } else { LineWeight::Thick },
            },
            square: kind.square.then_some(Square {
                center: square_center,
                side: square_side,
            }),
            triangle: kind.triangle.then_some(Triangle {
                vertices: [vertex(0), vertex(1), vertex(2)],
            }),
            rng_seed: seed,
        }
    }

    /// Footprints of the shapes that differ between a scene and its
    /// contrast image must stay `target_gap` pixels apart.
    fn separated(&self, spec: &SceneSpec) -> bool {
        let st = &self.strokes;
        let mut feet = vec![footprint(
            &small_ellipse_shape(
                &SmallEllipse {
                    line: LineWeight::Thick,
                    ..spec.small_ellipse
                },
                st,
            ),
            self.size,
        )];
        if let Some(s) = spec.square {
            feet.push(footprint(&Shape::Square(s), self.size));
        }
        if let Some(t) = spec.triangle {
            feet.push(footprint(&Shape::Triangle(t), self.size));
        }
        let grown: Vec<BinaryMask> = feet.iter().map(|f| dilate(f, self.target_gap)).collect();
        for i in 0..feet.len() {
            for j in i + 1..feet.len() {
                if grown[i].intersection_count(&feet[j]) > 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Draws a valid scene of the given kind.
    pub fn sample(&self, rng: &mut ChaCha8Rng, kind: SceneKind) -> SceneSpec {
        loop {
            let spec = self.draw(rng, kind);
            if validate_spec(&spec, self.size, &self.strokes).is_ok() && self.separated(&spec) {
                return spec;
            }
        }
    }
}

/// One generated example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: usize,
    pub spec: SceneSpec,
    pub x: Image,
    pub x_prime: Image,
    pub truth: GroundTruth,
}

fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Deterministic dataset with `round(n * disease_ratio)` diseased items.
pub fn random_dataset(n: usize, seed: u64, disease_ratio: f64) -> Vec<Sample> {
    random_dataset_with(n, seed, disease_ratio, &SceneRanges::default())
}

pub fn random_dataset_with(
    n: usize,
    seed: u64,
    disease_ratio: f64,
    ranges: &SceneRanges,
) -> Vec<Sample> {
    let ratio = disease_ratio.clamp(0.0, 1.0);
    let diseased = ((n as f64) * ratio).round() as usize;
    // label positions: shuffled so classes interleave
    let mut order: Vec<bool> = (0..n).map(|i| i < diseased).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            let kinds: &[SceneKind] = if order[i] {
                &SceneKind::DISEASED
            } else {
                &SceneKind::HEALTHY
            };
            let kind = kinds[rng.gen_range(0..kinds.len())];
            let spec = ranges.sample(&mut rng, kind);
            let (x, x_prime, truth) =
                generate_pair_with(&spec, ranges.size, &ranges.strokes).expect("sampled specs are valid");
            Sample {
                id: i,
                spec,
                x,
                x_prime,
                truth,
            }
        })
        .collect()
}

/// Diseased-only dataset, cycling through the diseased scene kinds.
pub fn diseased_dataset(n: usize, seed: u64, ranges: &SceneRanges) -> Vec<Sample> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i);
            let kind = SceneKind::DISEASED[i % SceneKind::DISEASED.len()];
            let spec = ranges.sample(&mut rng, kind);
            let (x, x_prime, truth) =
                generate_pair_with(&spec, ranges.size, &ranges.strokes).expect("sampled specs are valid");
            Sample {
                id: i,
                spec,
                x,
                x_prime,
                truth,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetRecord {
    pub name: String,
    pub mask: RunLength,
}

/// On-disk form of `<id>_truth.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub label: Label,
    pub targets: Vec<TargetRecord>,
    pub spec: SceneSpec,
}

impl TruthFile {
    pub fn targets(&self) -> Result<Vec<Target>> {
        self.targets
            .iter()
            .map(|t| {
                Ok(Target {
                    name: t.name.clone(),
                    mask: t.mask.decode()?,
                })
            })
            .collect()
    }
}

/// Dataset-level metadata written as `dataset.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n: usize,
    pub seed: u64,
    pub disease_ratio: f64,
    pub ranges: SceneRanges,
    pub ids: Vec<String>,
}

pub fn sample_id(i: usize) -> String {
    format!("{i:05}")
}

/// Writes `<id>_x.png`, `<id>_xp.png` and `<id>_truth.json` per sample plus
/// a `dataset.json` manifest.
pub fn export_dataset(
    samples: &[Sample],
    dir: impl AsRef<Path>,
    seed: u64,
    disease_ratio: f64,
    ranges: &SceneRanges,
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in samples {
        let id = sample_id(s.id);
        save_image(&s.x, dir.join(format!("{id}_x.png")))?;
        save_image(&s.x_prime, dir.join(format!("{id}_xp.png")))?;
        let truth = TruthFile {
            label: s.truth.label,
            targets: s
                .truth
                .targets
                .iter()
                .map(|t| TargetRecord {
                    name: t.name.clone(),
                    mask: RunLength::encode(&t.mask),
                })
                .collect(),
            spec: s.spec.clone(),
        };
        write_json(&truth, dir.join(format!("{id}_truth.json")))?;
    }
    let manifest = DatasetManifest {
        n: samples.len(),
        seed,
        disease_ratio,
        ranges: ranges.clone(),
        ids: samples.iter().map(|s| sample_id(s.id)).collect(),
    };
    write_json(&manifest, dir.join("dataset.json"))
}

pub fn read_truth(path: impl AsRef<Path>) -> Result<TruthFile> {
    read_json(path)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    read_json(dir.as_ref().join("dataset.json"))
}

/// Reads back a directory written by [`export_dataset`].
pub fn import_dataset(dir: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    manifest
        .ids
        .iter()
        .map(|id| {
            let truth = read_truth(dir.join(format!("{id}_truth.json")))?;
            Ok(Sample {
                id: id
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad sample id {id:?}")))?,
                x: load_image(dir.join(format!("{id}_x.png")))?,
                x_prime: load_image(dir.join(format!("{id}_xp.png")))?,
                truth: GroundTruth {
                    label: truth.label,
                    targets: truth.targets()?,
                },
                spec: truth.spec,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        SceneRanges::default().sample(
            &mut rng,
            SceneKind {
                square: false,
                triangle: false,
                thin: false,
            },
        )
    }

    #[test]
    fn label_rule() {
        let mut s = base_spec();
        let sq = Square {
            center: s.large_ellipse.center,
            side: 10.0,
        };
        let tri = Triangle {
            vertices: [(10.0, 100.0), (20.0, 100.0), (15.0, 92.0)],
        };
        assert_eq!(ground_truth_label(&s), Label::Healthy);
        s.square = Some(sq);
        assert_eq!(ground_truth_label(&s), Label::Healthy, "square alone");
        s.square = None;
        s.triangle = Some(tri);
        assert_eq!(ground_truth_label(&s), Label::Healthy, "triangle alone");
        s.square = Some(sq);
        assert_eq!(ground_truth_label(&s), Label::Diseased, "square + triangle");
        s.triangle = None;
        s.small_ellipse.line = LineWeight::Thin;
        assert_eq!(ground_truth_label(&s), Label::Diseased, "square + thin");
    }

    #[test]
    fn healthy_scene_contrast_is_identical() {
        let spec = base_spec();
        let (x, xp, truth) = generate_pair(&spec, (128, 128)).unwrap();
        assert_eq!(truth.label, Label::Healthy);
        assert!(truth.targets.is_empty());
        assert_eq!(x, xp);
    }

    #[test]
    fn square_outside_large_ellipse_is_invalid() {
        let mut spec = base_spec();
        spec.square = Some(Square {
            center: (2.0, 2.0),
            side: 3.0,
        });
        assert!(matches!(
            generate_pair(&spec, (128, 128)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn shapes_must_fit_image() {
        let spec = base_spec();
        assert!(generate_pair(&spec, (64, 64)).is_err());
    }

    #[test]
    fn thin_square_scene_has_two_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = SceneRanges::default().sample(&mut rng, SceneKind::DISEASED[0]);
        let (_, _, truth) = generate_pair(&spec, (128, 128)).unwrap();
        assert_eq!(truth.label, Label::Diseased);
        let names: Vec<&str> = truth.targets.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["square", "thin_small_ellipse"]);
    }
}
