//! Synthetic planar scenes with exact ground truth.
//!
//! A sequence is one reference texture plus five targets. Viewpoint targets
//! are the reference warped by a homography; illumination targets keep the
//! geometry and change gain, bias, gamma and vignetting. In both cases the
//! magnitude of the change follows a strictly increasing severity schedule.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Matrix3};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{region_iou, Homography, RegionDetection, DEFAULT_RHO, MIN_DETECTION_SCALE};
use crate::image::Image;
use crate::rng::{self, tag, Stream};

pub const TARGETS: usize = 5;
pub const MIN_IMAGE_SIDE: usize = 64;
pub const DEFAULT_IMAGE_SIDE: usize = 384;
pub const DEFAULT_SEVERITY: [f64; TARGETS] = [0.1, 0.3, 0.5, 0.7, 0.9];
/// Fewer surviving detections than this make an image unusable.
pub const MIN_REGIONS: usize = 8;

const MAX_ROTATION_DEG: f64 = 20.0;
const MAX_ZOOM_LOG2: f64 = 0.3;
const MAX_ANISOTROPY_LOG2: f64 = 0.35;
const MAX_PERSPECTIVE: f64 = 0.25;
const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SequenceKind {
    Viewpoint,
    Illumination,
}

impl SequenceKind {
    /// Directory-name prefix (`v_` / `i_`).
    pub fn prefix(&self) -> &'static str {
        match self {
            SequenceKind::Viewpoint => "v",
            SequenceKind::Illumination => "i",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SequenceKind::Viewpoint => "viewpt",
            SequenceKind::Illumination => "illum",
        }
    }

    pub fn from_sequence_id(id: &str) -> Option<Self> {
        if id.starts_with("v_") {
            Some(SequenceKind::Viewpoint)
        } else if id.starts_with("i_") {
            Some(SequenceKind::Illumination)
        } else {
            None
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub id: String,
    pub seed: u64,
    pub kind: SequenceKind,
    pub severity: [f64; TARGETS],
    pub width: usize,
    pub height: usize,
}

impl SequenceSpec {
    pub fn new(id: impl Into<String>, seed: u64, kind: SequenceKind) -> Self {
        SequenceSpec {
            id: id.into(),
            seed,
            kind,
            severity: DEFAULT_SEVERITY,
            width: DEFAULT_IMAGE_SIDE,
            height: DEFAULT_IMAGE_SIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_IMAGE_SIDE || self.height < MIN_IMAGE_SIDE {
            return Err(Error::InvalidParameter(format!(
                "images must be at least {MIN_IMAGE_SIDE}px on each side"
            )));
        }
        let s = &self.severity;
        if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("severity must lie in [0, 1]".into()));
        }
        let all_zero = s.iter().all(|&v| v == 0.0);
        if !all_zero && s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "severity schedule must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: String,
    pub kind: SequenceKind,
    pub reference: Image,
    pub targets: Vec<Image>,
    pub homographies: [Homography; TARGETS],
}

impl Sequence {
    /// Image `0` is the reference, `1..=5` the targets.
    pub fn image(&self, index: usize) -> &Image {
        if index == 0 {
            &self.reference
        } else {
            &self.targets[index - 1]
        }
    }
}

/// Style parameters shared by all textures drawn from one seed.
struct TextureStyle {
    /// Lattice spacing of the coarsest octave in pixels.
    coarse: f64,
    persistence: f64,
    shape_density: f64,
    shape_mix: [f64; 3],
    /// Smallest shape radius in pixels.
    min_size: f64,
    orientation: f64,
    orientation_spread: f64,
    shape_alpha: f64,
    blur: f64,
    contrast: f64,
}

impl TextureStyle {
    fn sample(rng: &mut Stream) -> Self {
        let mut mix = [rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0)];
        let total: f64 = mix.iter().sum();
        mix.iter_mut().for_each(|v| *v /= total);
        TextureStyle {
            coarse: rng.gen_range(10.0..40.0),
            persistence: rng.gen_range(0.5..0.65),
            shape_density: rng.gen_range(0.4..1.6),
            shape_mix: mix,
            min_size: rng.gen_range(2.0..5.0),
            orientation: rng.gen_range(0.0..PI),
            orientation_spread: rng.gen_range(0.3..PI / 2.0),
            shape_alpha: rng.gen_range(0.5..1.0),
            blur: rng.gen_range(0.5..1.4),
            contrast: rng.gen_range(0.14..0.22),
        }
    }
}

/// Finest value-noise lattice spacing in pixels.
const FINEST_CELL: f64 = 2.0;
/// Largest shape radius as a fraction of the longer image side.
const MAX_SHAPE_FRACTION: f64 = 0.15;

/// Value noise summed over octaves from the coarse cell down to a few pixels.
fn value_noise(rng: &mut Stream, width: usize, height: usize, style: &TextureStyle) -> Vec<f64> {
    let mut out = vec![0f64; width * height];
    let mut amplitude = 1.0;
    let mut cell = style.coarse;
    while cell >= FINEST_CELL {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        for y in 0..height {
            let fy = y as f64 / cell;
            let (iy, ty) = (fy.floor() as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (ix, tx) = (fx.floor() as usize, smooth(fx.fract()));
                let l = |i: usize, j: usize| lattice[j * gw + i];
                let top = l(ix, iy) + tx * (l(ix + 1, iy) - l(ix, iy));
                let bot = l(ix, iy + 1) + tx * (l(ix + 1, iy + 1) - l(ix, iy + 1));
                out[y * width + x] += amplitude * (top + ty * (bot - top));
            }
        }
        amplitude *= style.persistence;
        cell /= 2.0;
    }
    out
}

/// Radius drawn with density proportional to `r^-3` on `[lo, hi]`, the
/// scale-invariant size law of dead-leaves image models.
fn power_law_size(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    lo / (1.0 - u * (1.0 - (lo / hi).powi(2))).sqrt()
}

fn paint_shapes(rng: &mut Stream, canvas: &mut [f64], width: usize, height: usize, style: &TextureStyle) {
    let count = (style.shape_density * (width * height) as f64 / 900.0).round() as usize;
    let max_size = (MAX_SHAPE_FRACTION * width.max(height) as f64).max(2.0 * style.min_size);
    for _ in 0..count {
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let size = power_law_size(rng, style.min_size, max_size);
        let angle = style.orientation + rng.gen_range(-style.orientation_spread..=style.orientation_spread);
        let value = rng.gen_range(-1.5..1.5);
        let pick: f64 = rng.gen();
        let aspect = rng.gen_range(0.15..1.0);
        let (s, c) = angle.sin_cos();
        // Signed membership test in the shape's own frame.
        let kind = if pick < style.shape_mix[0] {
            0
        } else if pick < style.shape_mix[0] + style.shape_mix[1] {
            1
        } else {
            2
        };
        let inside = |dx: f64, dy: f64| -> bool {
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            match kind {
                0 => dx * dx + dy * dy <= size * size,
                1 => u.abs() <= size && v.abs() <= size * aspect,
                _ => u.abs() <= size * 1.8 && v.abs() <= (size * 0.12).max(0.8),
            }
        };
        let reach = size * 1.9;
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil() as usize).min(width - 1);
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil() as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if inside(x as f64 - cx, y as f64 - cy) {
                    let p = &mut canvas[y * width + x];
                    *p += style.shape_alpha * (value - *p);
                }
            }
        }
    }
}

/// Deterministic multi-octave value-noise texture with painted discs,
/// bars and strokes of power-law sizes, normalized to mean 0.5 and quantized to 8 bits.
pub fn gen_texture(seed: u64, width: usize, height: usize) -> Result<Image> {
    if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
        return Err(Error::InvalidParameter(format!(
            "texture must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}, got {width}x{height}"
        )));
    }
    let mut rng = rng::substream(seed, &[tag::TEXTURE]);
    let style = TextureStyle::sample(&mut rng);
    let mut canvas = value_noise(&mut rng, width, height, &style);
    paint_shapes(&mut rng, &mut canvas, width, height, &style);

    let n = canvas.len() as f64;
    let mean = canvas.iter().sum::<f64>() / n;
    let std = (canvas.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-9);
    let data = canvas
        .iter()
        .map(|v| (0.5 + (v - mean) * style.contrast / std) as f32)
        .collect();
    let mut img = Image::new(width, height, data)?.gaussian_blur(style.blur);
    img.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    img.quantize();
    Ok(img)
}

/// Warps `src` into the target frame of `h` (target(x) = src(h⁻¹ x)) with
/// bilinear interpolation and clamp-to-edge borders; output is quantized.
pub fn warp_image(src: &Image, h: &Homography) -> Image {
    if h.is_identity() {
        return src.clone();
    }
    let inv = h.inverse();
    let m = *inv.matrix();
    let mut out = Image::from_fn(src.width(), src.height(), |x, y| {
        let (x, y) = (x as f64, y as f64);
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        let u = (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / w;
        let v = (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / w;
        src.sample_clamped(u, v)
    });
    out.quantize();
    out
}

/// Camera motion direction shared by all targets of a viewpoint sequence;
/// each target scales it by its severity.
struct ViewpointMotion {
    rotation_sign: f64,
    zoom_sign: f64,
    anisotropy_axis: f64,
    perspective_dir: f64,
}

impl ViewpointMotion {
    fn sample(rng: &mut Stream) -> Self {
        let sign = |r: &mut Stream| if r.gen::<bool>() { 1.0 } else { -1.0 };
        ViewpointMotion {
            rotation_sign: sign(rng),
            zoom_sign: sign(rng),
            anisotropy_axis: rng.gen_range(0.0..PI),
            perspective_dir: rng.gen_range(0.0..2.0 * PI),
        }
    }

    fn homography(&self, severity: f64, width: usize, height: usize) -> Result<Homography> {
        if severity == 0.0 {
            return Ok(Homography::identity());
        }
        let (cx, cy) = ((width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0);
        let half_diag = cx.hypot(cy);
        let phi = self.rotation_sign * severity * MAX_ROTATION_DEG.to_radians();
        let zoom = (self.zoom_sign * severity * MAX_ZOOM_LOG2).exp2();
        let k = (severity * MAX_ANISOTROPY_LOG2).exp2();
        let rot = |a: f64| {
            let (s, c) = a.sin_cos();
            Matrix2::new(c, -s, s, c)
        };
        let psi = self.anisotropy_axis;
        let a = rot(phi) * zoom * rot(psi) * Matrix2::new(k, 0.0, 0.0, 1.0 / k) * rot(-psi);
        let p = severity * MAX_PERSPECTIVE / half_diag;
        let (px, py) = (p * self.perspective_dir.cos(), p * self.perspective_dir.sin());
        let centered = Matrix3::new(
            a[(0, 0)],
            a[(0, 1)],
            0.0,
            a[(1, 0)],
            a[(1, 1)],
            0.0,
            px,
            py,
            1.0,
        );
        let to = Matrix3::new(1.0, 0.0, cx, 0.0, 1.0, cy, 0.0, 0.0, 1.0);
        let from = Matrix3::new(1.0, 0.0, -cx, 0.0, 1.0, -cy, 0.0, 0.0, 1.0);
        Homography::new(to * centered * from)
    }
}

/// Viewpoint sequence: five homographies of increasing magnitude, targets
/// warped from the reference.
pub fn gen_viewpoint_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    spec.validate()?;
    if spec.kind != SequenceKind::Viewpoint {
        return Err(Error::InvalidParameter("expected a viewpoint spec".into()));
    }
    let reference = gen_texture(spec.seed, spec.width, spec.height)?;
    let mut rng = rng::substream(spec.seed, &[tag::SEQUENCE]);
    let mut homographies = None;
    for _ in 0..MAX_REJECTIONS {
        let motion = ViewpointMotion::sample(&mut rng);
        let hs = spec
            .severity
            .iter()
            .map(|&s| motion.homography(s, spec.width, spec.height))
            .collect::<Result<Vec<_>>>()?;
        if hs
            .iter()
            .all(|h| h.is_orientation_preserving_on(spec.width, spec.height))
        {
            homographies = Some(hs);
            break;
        }
    }
    let hs = homographies.ok_or_else(|| {
        Error::Generation(format!(
            "{}: no non-folding homography after {MAX_REJECTIONS} draws",
            spec.id
        ))
    })?;
    let targets = hs.iter().map(|h| warp_image(&reference, h)).collect();
    Ok(Sequence {
        id: spec.id.clone(),
        kind: spec.kind,
        reference,
        targets,
        homographies: [hs[0], hs[1], hs[2], hs[3], hs[4]],
    })
}

/// Photometric change `clip(gain * x^gamma * vignette(r) + bias)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photometric {
    pub gain: f64,
    pub bias: f64,
    pub gamma: f64,
    /// Relative darkening at the image corners.
    pub vignette: f64,
    pub vignette_center: (f64, f64),
}

impl Photometric {
    pub const IDENTITY: Photometric = Photometric {
        gain: 1.0,
        bias: 0.0,
        gamma: 1.0,
        vignette: 0.0,
        vignette_center: (0.5, 0.5),
    };

    pub fn apply_value(&self, x: f64, vignette_factor: f64) -> f64 {
        (self.gain * x.powf(self.gamma) * vignette_factor + self.bias).clamp(0.0, 1.0)
    }

    pub fn apply(&self, img: &Image) -> Image {
        if *self == Photometric::IDENTITY {
            return img.clone();
        }
        let (w, h) = (img.width() as f64, img.height() as f64);
        let (vx, vy) = (self.vignette_center.0 * w, self.vignette_center.1 * h);
        let rmax = w.hypot(h);
        let mut out = Image::from_fn(img.width(), img.height(), |x, y| {
            let r = (x as f64 - vx).hypot(y as f64 - vy) / rmax;
            let v = 1.0 - self.vignette * (2.0 * r).powi(2).min(1.0);
            self.apply_value(img.get(x, y) as f64, v) as f32
        });
        out.quantize();
        out
    }
}

/// Illumination sequence: identity geometry, severity-scaled photometric
/// change whose direction (brighter or darker) is fixed per sequence.
pub fn gen_illum_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    spec.validate()?;
    if spec.kind != SequenceKind::Illumination {
        return Err(Error::InvalidParameter("expected an illumination spec".into()));
    }
    let reference = gen_texture(spec.seed, spec.width, spec.height)?;
    let mut rng = rng::substream(spec.seed, &[tag::SEQUENCE]);
    let direction = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let center = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
    let targets = spec
        .severity
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return reference.clone();
            }
            Photometric {
                gain: (direction * s * 0.5).exp2(),
                bias: direction * s * 0.08,
                gamma: (-direction * s * 0.4).exp2(),
                vignette: s * 0.35,
                vignette_center: center,
            }
            .apply(&reference)
        })
        .collect();
    Ok(Sequence {
        id: spec.id.clone(),
        kind: spec.kind,
        reference,
        targets,
        homographies: [Homography::identity(); TARGETS],
    })
}

pub fn gen_sequence(spec: &SequenceSpec) -> Result<Sequence> {
    match spec.kind {
        SequenceKind::Viewpoint => gen_viewpoint_sequence(spec),
        SequenceKind::Illumination => gen_illum_sequence(spec),
    }
}

/// Detection scales, the first equal to the minimum scale, in thirds of an
/// octave.
fn detection_scales() -> Vec<f64> {
    (0..=8)
        .map(|i| MIN_DETECTION_SCALE * 2f64.powf((i as f64 - 1.0) / 3.0))
        .collect()
}

const LOG_THRESHOLD: f32 = 0.012;
const EDGE_RATIO: f32 = 10.0;

fn normalized_laplacian(img: &Image, sigma: f64) -> (Image, Image) {
    let blurred = img.gaussian_blur(sigma);
    let (w, h) = (img.width(), img.height());
    let s2 = (sigma * sigma) as f32;
    let lap = Image::from_fn(w, h, |x, y| {
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            return 0.0;
        }
        let c = blurred.get(x, y);
        s2 * (blurred.get(x - 1, y) + blurred.get(x + 1, y) + blurred.get(x, y - 1)
            + blurred.get(x, y + 1)
            - 4.0 * c)
    });
    (blurred, lap)
}

fn is_edge_like(blurred: &Image, x: usize, y: usize) -> bool {
    let dxx = blurred.get(x + 1, y) + blurred.get(x - 1, y) - 2.0 * blurred.get(x, y);
    let dyy = blurred.get(x, y + 1) + blurred.get(x, y - 1) - 2.0 * blurred.get(x, y);
    let dxy = 0.25
        * (blurred.get(x + 1, y + 1) - blurred.get(x - 1, y + 1) - blurred.get(x + 1, y - 1)
            + blurred.get(x - 1, y - 1));
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det <= 0.0 || tr * tr * EDGE_RATIO >= (EDGE_RATIO + 1.0).powi(2) * det
}

/// Scale-space extrema of the scale-normalized Laplacian whose orientation
/// window (`rho = 5`) fits in the image.
fn laplacian_candidates(img: &Image) -> Vec<RegionDetection> {
    let scales = detection_scales();
    let levels: Vec<(Image, Image)> = scales.iter().map(|&s| normalized_laplacian(img, s)).collect();
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::new();
    for k in 1..scales.len() - 1 {
        let sigma = scales[k];
        let margin = (DEFAULT_RHO * sigma * std::f64::consts::SQRT_2).ceil() as usize + 1;
        if 2 * margin >= w || 2 * margin >= h {
            continue;
        }
        let (blurred, lap) = &levels[k];
        for y in margin..h - margin {
            for x in margin..w - margin {
                let v = lap.get(x, y);
                if v.abs() < LOG_THRESHOLD {
                    continue;
                }
                let mut extremum = true;
                'scan: for (_, l) in &levels[k - 1..=k + 1] {
                    for yy in y - 1..=y + 1 {
                        for xx in x - 1..=x + 1 {
                            let n = l.get(xx, yy);
                            if std::ptr::eq(l, lap) && xx == x && yy == y {
                                continue;
                            }
                            if (v > 0.0 && n >= v) || (v < 0.0 && n <= v) {
                                extremum = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if extremum && !is_edge_like(blurred, x, y) {
                    out.push(RegionDetection::new(x as f64, y as f64, sigma, 0.0));
                }
            }
        }
    }
    out
}

fn canonical_order(a: &RegionDetection, b: &RegionDetection) -> std::cmp::Ordering {
    a.cy.total_cmp(&b.cy)
        .then(a.cx.total_cmp(&b.cx))
        .then(a.m.total_cmp(&b.m))
        .then(a.theta.total_cmp(&b.theta))
}

/// IoU above which two regions count as near-duplicates.
pub const DUPLICATE_IOU: f64 = 0.5;

/// Clusters of near-duplicates: regions linked by IoU > 0.5 between their
/// discs of radius `rho * m`. Clusters list indices into `regions` in
/// increasing order, and are ordered by their first member.
pub fn duplicate_clusters(regions: &[RegionDetection], rho: f64) -> Vec<Vec<usize>> {
    let n = regions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| canonical_order(&regions[a], &regions[b]).then(a.cmp(&b)));
    let max_m = regions.iter().map(|r| r.m).fold(0.0, f64::max);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            // Sorted by y: past this vertical gap no disc can overlap region i.
            if regions[j].cy - regions[i].cy > rho * (regions[i].m + max_m) {
                break;
            }
            if region_iou(&regions[i], &regions[j], rho) > DUPLICATE_IOU {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters[root].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    clusters
}

/// Removes near-duplicates at the detection scale: one random member of
/// each cluster of [`duplicate_clusters`] survives.
pub fn dedup_regions(mut regions: Vec<RegionDetection>, rng: &mut Stream) -> Vec<RegionDetection> {
    regions.sort_by(canonical_order);
    regions.dedup();
    duplicate_clusters(&regions, 1.0)
        .into_iter()
        .map(|c| regions[*c.choose(rng).expect("non-empty cluster")])
        .collect()
}

/// Multi-scale Laplacian blob detector with IoU de-duplication and uniform
/// subsampling to `max_regions`. Output is sorted canonically and carries
/// `theta = 0`; orientation is assigned by the patch stage.
pub fn detect_regions(img: &Image, rng: &mut Stream, max_regions: usize) -> Result<Vec<RegionDetection>> {
    let candidates = laplacian_candidates(img);
    let mut kept = dedup_regions(candidates, rng);
    if kept.len() > max_regions {
        kept.shuffle(rng);
        kept.truncate(max_regions);
    }
    kept.sort_by(canonical_order);
    if kept.len() < MIN_REGIONS {
        return Err(Error::DegenerateImage {
            found: kept.len(),
            needed: MIN_REGIONS,
        });
    }
    Ok(kept)
}

/// Mean displacement of the four image corners under `h`.
pub fn mean_corner_displacement(h: &Homography, width: usize, height: usize) -> Result<f64> {
    let (w, hh) = ((width - 1) as f64, (height - 1) as f64);
    let mut total = 0.0;
    for (x, y) in [(0.0, 0.0), (w, 0.0), (0.0, hh), (w, hh)] {
        let (u, v) = h.apply(x, y)?;
        total += (u - x).hypot(v - y);
    }
    Ok(total / 4.0)
}
