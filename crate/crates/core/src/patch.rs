//! Orientation assignment, patch rectification and corpus construction.
//!
//! Reference patches are cut noise-free from the reference image. For every
//! target image and noise variant the reference region is perturbed in its
//! canonical frame, transported through the ground-truth homography and
//! rectified into a 65×65 patch. Patches are held as 8-bit strips, the same
//! representation used on disk.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    noise_to_matrix, region_frame, sample_noise, Affine, Homography, NoiseLevel,
    NoiseProfile, RegionDetection, DEFAULT_RHO,
};
use crate::image::{dequantize, quantize, Image};
use crate::rng::{self, tag};
use crate::synthesis::{Sequence, SequenceKind, TARGETS};

pub const PATCH_SIZE: usize = 65;
pub const PATCH_PIXELS: usize = PATCH_SIZE * PATCH_SIZE;
const HALF: f64 = ((PATCH_SIZE - 1) / 2) as f64;

/// The three evaluated noise variants, in increasing difficulty.
pub const VARIANTS: [NoiseLevel; 3] = [NoiseLevel::Easy, NoiseLevel::Hard, NoiseLevel::Tough];

pub fn variant_index(level: NoiseLevel) -> Option<usize> {
    VARIANTS.iter().position(|&v| v == level)
}

const ORIENTATION_BINS: usize = 36;
const ORIENTATION_GRID: usize = 32;

/// A 65×65 grayscale patch, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    data: Vec<f32>,
}

impl Patch {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.len() != PATCH_PIXELS {
            return Err(Error::DimensionMismatch {
                expected: PATCH_PIXELS,
                found: data.len(),
            });
        }
        Ok(Patch { data })
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(PATCH_PIXELS);
        for y in 0..PATCH_SIZE {
            for x in 0..PATCH_SIZE {
                data.push(f(x, y));
            }
        }
        Patch { data }
    }

    pub fn filled(v: f32) -> Self {
        Patch {
            data: vec![v; PATCH_PIXELS],
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        debug_assert_eq!(bytes.len(), PATCH_PIXELS);
        Patch {
            data: bytes.iter().map(|&q| dequantize(q)).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * PATCH_SIZE + x]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Contiguous 8-bit storage for `len` patches, patch `j` at bytes
/// `[j * 4225, (j + 1) * 4225)`; identical to the rows of a PGM strip.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatchStrip {
    bytes: Vec<u8>,
}

impl PatchStrip {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if !bytes.len().is_multiple_of(PATCH_PIXELS) {
            return Err(Error::Corpus(format!(
                "strip of {} bytes is not a whole number of patches",
                bytes.len()
            )));
        }
        Ok(PatchStrip { bytes })
    }

    pub fn len(&self) -> usize {
        self.bytes.len() / PATCH_PIXELS
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn push(&mut self, p: &Patch) {
        self.bytes.extend(p.data.iter().map(|&v| quantize(v)));
    }

    pub fn patch_bytes(&self, j: usize) -> &[u8] {
        &self.bytes[j * PATCH_PIXELS..(j + 1) * PATCH_PIXELS]
    }

    pub fn patch(&self, j: usize) -> Patch {
        Patch::from_bytes(self.patch_bytes(j))
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Dominant gradient orientation of the `rho = 5` measurement region.
///
/// Gradients are taken on a 32×32 grid spanning the region (so the
/// derivative step scales with the region), weighted by magnitude and a
/// Gaussian window, and accumulated into 36 soft-assigned bins. The peak bin
/// is refined by parabolic interpolation. A flat region yields 0.
pub fn dominant_orientation(img: &Image, r: &RegionDetection) -> f64 {
    let radius = DEFAULT_RHO * r.m;
    let step = 2.0 * radius / ORIENTATION_GRID as f64;
    let bin_width = 2.0 * PI / ORIENTATION_BINS as f64;
    let mut hist = [0f64; ORIENTATION_BINS];
    for j in 0..=ORIENTATION_GRID {
        for i in 0..=ORIENTATION_GRID {
            let u = i as f64 / ORIENTATION_GRID as f64 * 2.0 - 1.0;
            let v = j as f64 / ORIENTATION_GRID as f64 * 2.0 - 1.0;
            let rr = u * u + v * v;
            if rr > 1.0 {
                continue;
            }
            let (x, y) = (r.cx + u * radius, r.cy + v * radius);
            let gx = (img.sample_clamped(x + step, y) - img.sample_clamped(x - step, y)) as f64;
            let gy = (img.sample_clamped(x, y + step) - img.sample_clamped(x, y - step)) as f64;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let weight = mag * (-rr / (2.0 * 0.5 * 0.5)).exp();
            let pos = gy.atan2(gx).rem_euclid(2.0 * PI) / bin_width;
            let b0 = pos.floor();
            let frac = pos - b0;
            let b0 = b0 as usize % ORIENTATION_BINS;
            hist[b0] += weight * (1.0 - frac);
            hist[(b0 + 1) % ORIENTATION_BINS] += weight * frac;
        }
    }
    for _ in 0..2 {
        let prev = hist;
        for b in 0..ORIENTATION_BINS {
            let l = prev[(b + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
            let rgt = prev[(b + 1) % ORIENTATION_BINS];
            hist[b] = 0.25 * l + 0.5 * prev[b] + 0.25 * rgt;
        }
    }
    let (peak, &c) = hist
        .iter()
        .enumerate()
        .fold((0, &hist[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
    if c <= 0.0 {
        return 0.0;
    }
    let l = hist[(peak + ORIENTATION_BINS - 1) % ORIENTATION_BINS];
    let rgt = hist[(peak + 1) % ORIENTATION_BINS];
    let denom = l - 2.0 * c + rgt;
    let offset = if denom < 0.0 { 0.5 * (l - rgt) / denom } else { 0.0 };
    crate::geometry::wrap_angle((peak as f64 + offset) * bin_width)
}

/// Assigns the dominant orientation to every region.
pub fn orient_regions(img: &Image, regions: &[RegionDetection]) -> Vec<RegionDetection> {
    regions
        .iter()
        .map(|r| r.with_theta(dominant_orientation(img, r)))
        .collect()
}

/// Largest number of box-filter taps per axis when a patch pixel covers
/// many source pixels.
const MAX_TAPS: usize = 8;

/// Samples a 65×65 patch through `map`, which takes normalized patch
/// coordinates in `[-1, 1]^2` to source pixels. Each patch pixel averages a
/// `k×k` grid over its cell, with `k` the source-pixel spacing rounded up, so
/// downsampling does not alias. A spacing of at most one pixel gives plain
/// bilinear sampling.
fn rectify(img: &Image, spacing: f64, map: impl Fn(f64, f64) -> Result<(f64, f64)>) -> Result<Patch> {
    let (wmax, hmax) = ((img.width() - 1) as f64, (img.height() - 1) as f64);
    for (u, v) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        let (x, y) = map(u, v)?;
        if !(x >= 0.0 && y >= 0.0 && x <= wmax && y <= hmax) {
            return Err(Error::OutOfBounds);
        }
    }
    let taps = ((spacing - 1e-9).ceil().max(1.0) as usize).min(MAX_TAPS);
    let offsets: Vec<f64> = (0..taps).map(|a| (a as f64 + 0.5) / taps as f64 - 0.5).collect();
    let norm = 1.0 / (taps * taps) as f32;
    let mut failed = None;
    let patch = Patch::from_fn(|i, j| {
        let mut acc = 0f32;
        for dv in &offsets {
            for du in &offsets {
                let u = (i as f64 + du - HALF) / HALF;
                let v = (j as f64 + dv - HALF) / HALF;
                match map(u, v) {
                    Ok((x, y)) => acc += img.sample_clamped(x, y),
                    Err(e) => failed = Some(e),
                }
            }
        }
        acc * norm
    });
    match failed {
        Some(e) => Err(e),
        None => Ok(patch),
    }
}

/// Source pixels between adjacent patch pixels under a linear map.
fn pixel_spacing(linear: &nalgebra::Matrix2<f64>) -> f64 {
    linear.column(0).norm().max(linear.column(1).norm()) / HALF
}

/// Samples a 65×65 patch over the image of `[-1, 1]^2` under `frame`.
pub fn extract_frame(img: &Image, frame: &Affine) -> Result<Patch> {
    rectify(img, pixel_spacing(&frame.linear()), |u, v| Ok(frame.apply(u, v)))
}

/// Samples the reference-image frame `frame` from a target related to the
/// reference by `h`, mapping every patch pixel through the full homography.
pub fn extract_through(img: &Image, frame: &Affine, h: &Homography) -> Result<Patch> {
    let c = frame.translation();
    let spacing = pixel_spacing(&(h.jacobian(c.x, c.y)? * frame.linear()));
    rectify(img, spacing, |u, v| {
        let (x, y) = frame.apply(u, v);
        h.apply(x, y)
    })
}

/// Rectifies the measurement region of `r` (half-extent `rho * m`,
/// de-rotated by `r.theta`) into a patch.
pub fn extract_patch(img: &Image, r: &RegionDetection, rho: f64) -> Result<Patch> {
    extract_frame(img, &region_frame(r, rho))
}

/// Measurement frame of `r` after applying `noise` in the region's canonical
/// frame.
pub fn noisy_frame(r: &RegionDetection, noise: &Affine, rho: f64) -> Affine {
    let canonical = region_frame(r, 1.0 / r.m);
    let scale = Affine::from_parts(
        nalgebra::Matrix2::identity() * (rho * r.m),
        Vector2::zeros(),
    );
    canonical.compose(noise).compose(&scale)
}

/// Conservative containment test: the region survives the largest noise of
/// `bounds` and the projection into every target of `seq`.
pub fn region_fits(seq_dims: (usize, usize), homographies: &[Homography], r: &RegionDetection, rho: f64, bounds: &NoiseProfile) -> bool {
    let (w, h) = seq_dims;
    let inside = |x: f64, y: f64, radius: f64| {
        x - radius >= 0.0 && y - radius >= 0.0 && x + radius <= (w - 1) as f64 && y + radius <= (h - 1) as f64
    };
    let sqrt2 = std::f64::consts::SQRT_2;
    if !inside(r.cx, r.cy, rho * r.m * sqrt2) {
        return false;
    }
    let shift = bounds.t_max * sqrt2 * r.m;
    let extent = rho * r.m * bounds.max_stretch() * sqrt2;
    homographies.iter().all(|hm| {
        let (Ok((x, y)), Ok(j)) = (hm.apply(r.cx, r.cy), hm.jacobian(r.cx, r.cy)) else {
            return false;
        };
        let sigma_max = j.singular_values().max();
        let radius = 1.1 * (sigma_max * shift + j.determinant().abs().sqrt() * extent);
        inside(x, y, radius)
    })
}

/// Noise bounds covering every profile in `profiles`.
pub fn envelope(profiles: &[NoiseProfile]) -> NoiseProfile {
    profiles.iter().fold(NoiseProfile::NONE, |acc, p| NoiseProfile {
        name: acc.name.max(p.name),
        theta_max: acc.theta_max.max(p.theta_max),
        t_max: acc.t_max.max(p.t_max),
        s_max: acc.s_max.max(p.s_max),
        a_max: acc.a_max.max(p.a_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Used to fit whitening and select its clipping threshold.
    Fit,
    Eval,
}

/// Patches of one sequence: a reference strip and, for each of the three
/// variants, five target strips, all index-aligned by region.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePatches {
    pub id: String,
    pub kind: SequenceKind,
    pub split: Split,
    /// `None` when the geometry is unknown (ingested data).
    pub homographies: Option<[Homography; TARGETS]>,
    /// Detection index of each retained region.
    pub region_ids: Vec<u32>,
    pub reference: PatchStrip,
    pub targets: [[PatchStrip; TARGETS]; 3],
}

impl SequencePatches {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    /// Strip holding image `image` (0 = reference) of variant `variant`.
    pub fn strip(&self, variant: usize, image: usize) -> &PatchStrip {
        if image == 0 {
            &self.reference
        } else {
            &self.targets[variant][image - 1]
        }
    }

    pub fn group(&self, region: usize, variant: NoiseLevel) -> Option<PatchGroup> {
        let v = variant_index(variant)?;
        (region < self.len()).then(|| PatchGroup {
            region_id: self.region_ids[region],
            variant,
            ref_patch: self.reference.patch(region),
            target_patches: std::array::from_fn(|k| self.targets[v][k].patch(region)),
        })
    }
}

/// One reference patch and its five noisy correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGroup {
    pub region_id: u32,
    pub variant: NoiseLevel,
    pub ref_patch: Patch,
    pub target_patches: [Patch; TARGETS],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchCorpus {
    pub sequences: Vec<SequencePatches>,
}

impl PatchCorpus {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_regions(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    pub fn patch_bytes(&self, id: PatchId) -> &[u8] {
        self.sequences[id.seq as usize]
            .strip(id.variant as usize, id.image as usize)
            .patch_bytes(id.region as usize)
    }

    pub fn patch(&self, id: PatchId) -> Patch {
        Patch::from_bytes(self.patch_bytes(id))
    }

    /// Sub-corpus restricted to one split, preserving order.
    pub fn subset(&self, split: Split) -> PatchCorpus {
        PatchCorpus {
            sequences: self
                .sequences
                .iter()
                .filter(|s| s.split == split)
                .cloned()
                .collect(),
        }
    }
}

/// Identifies one patch of a corpus. `image` 0 is the reference, which is
/// shared by all variants, so its `variant` is normalized to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchId {
    pub seq: u32,
    pub region: u32,
    pub variant: u8,
    pub image: u8,
}

impl PatchId {
    pub fn new(seq: usize, region: usize, variant: usize, image: usize) -> Self {
        PatchId {
            seq: seq as u32,
            region: region as u32,
            variant: if image == 0 { 0 } else { variant as u8 },
            image: image as u8,
        }
    }

    /// Whether two patches depict the same region of the same sequence.
    pub fn corresponds(&self, other: &PatchId) -> bool {
        self.seq == other.seq && self.region == other.region
    }
}

/// Blocks per sequence: the reference plus three variants of five targets.
pub const BLOCKS: usize = 1 + 3 * TARGETS;

/// Dense numbering of every patch of a corpus. Within a sequence, block 0
/// holds the references and block `1 + 5 v + (k - 1)` target `k` of variant
/// `v`; each block lists the regions in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchIndex {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
}

impl PatchIndex {
    pub fn new(corpus: &PatchCorpus) -> Self {
        Self::from_sizes(corpus.sequences.iter().map(|s| s.len()).collect())
    }

    /// Index of a corpus whose sequences hold `sizes[s]` regions.
    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        for &n in &sizes {
            offsets.push(acc);
            acc += n * BLOCKS;
        }
        offsets.push(acc);
        PatchIndex { offsets, sizes }
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn regions(&self, seq: usize) -> usize {
        self.sizes[seq]
    }

    pub fn sequences(&self) -> usize {
        self.sizes.len()
    }

    #[inline]
    pub fn slot(&self, id: PatchId) -> usize {
        let block = if id.image == 0 {
            0
        } else {
            1 + id.variant as usize * TARGETS + (id.image as usize - 1)
        };
        self.offsets[id.seq as usize] + block * self.sizes[id.seq as usize] + id.region as usize
    }

    /// All patch ids in slot order.
    pub fn ids(&self) -> impl Iterator<Item = PatchId> + '_ {
        self.sizes.iter().enumerate().flat_map(|(s, &n)| {
            (0..BLOCKS).flat_map(move |b| {
                let (variant, image) = if b == 0 { (0, 0) } else { ((b - 1) / TARGETS, (b - 1) % TARGETS + 1) };
                (0..n).map(move |r| PatchId::new(s, r, variant, image))
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionParams {
    pub rho: f64,
    pub master_seed: u64,
    pub seq_index: u64,
    pub profiles: [NoiseProfile; 3],
}

impl ExtractionParams {
    pub fn new(master_seed: u64, seq_index: u64) -> Self {
        ExtractionParams {
            rho: DEFAULT_RHO,
            master_seed,
            seq_index,
            profiles: [NoiseProfile::EASY, NoiseProfile::HARD, NoiseProfile::TOUGH],
        }
    }
}

/// Noise draw for one (region, target, variant), from its own substream.
pub fn noise_for(params: &ExtractionParams, region_id: u32, target: usize, variant: usize) -> crate::geometry::NoiseTransform {
    let mut s = rng::substream(
        params.master_seed,
        &[
            tag::NOISE,
            params.seq_index,
            region_id as u64,
            target as u64,
            params.profiles[variant].name as u64,
        ],
    );
    sample_noise(&params.profiles[variant], &mut s)
}

/// Every patch of one region: the reference and `[variant][target]`.
fn extract_group(seq: &Sequence, r: &RegionDetection, region_id: u32, params: &ExtractionParams) -> Result<(Patch, Vec<Vec<Patch>>)> {
    let reference = extract_patch(&seq.reference, r, params.rho)?;
    let mut variants = Vec::with_capacity(3);
    for v in 0..3 {
        let mut row = Vec::with_capacity(TARGETS);
        for k in 0..TARGETS {
            let t = noise_for(params, region_id, k, v);
            let noise = noise_to_matrix(&t, r.m)?;
            let frame = noisy_frame(r, &noise, params.rho);
            row.push(extract_through(&seq.targets[k], &frame, &seq.homographies[k])?);
        }
        variants.push(row);
    }
    Ok((reference, variants))
}

/// Builds the index-aligned strips of one sequence. `regions[i]` is the
/// oriented reference detection with id `i`; regions failing containment in
/// any target under any variant are dropped.
pub fn build_corpus(seq: &Sequence, regions: &[RegionDetection], params: &ExtractionParams) -> Result<SequencePatches> {
    let tagged: Vec<(u32, RegionDetection)> = regions.iter().enumerate().map(|(i, r)| (i as u32, *r)).collect();
    build_corpus_tagged(seq, &tagged, params)
}

/// As [`build_corpus`] for regions carrying explicit ids, which select
/// their noise draws.
pub fn build_corpus_tagged(seq: &Sequence, regions: &[(u32, RegionDetection)], params: &ExtractionParams) -> Result<SequencePatches> {
    let dims = (seq.reference.width(), seq.reference.height());
    let bounds = envelope(&params.profiles);
    let mut out = SequencePatches {
        id: seq.id.clone(),
        kind: seq.kind,
        split: Split::Eval,
        homographies: Some(seq.homographies),
        region_ids: Vec::new(),
        reference: PatchStrip::new(),
        targets: Default::default(),
    };
    for &(id, ref r) in regions {
        if !region_fits(dims, &seq.homographies, r, params.rho, &bounds) {
            continue;
        }
        let (reference, variants) = match extract_group(seq, r, id, params) {
            Ok(g) => g,
            Err(Error::OutOfBounds) | Err(Error::Projection { .. }) => continue,
            Err(e) => return Err(e),
        };
        out.region_ids.push(id);
        out.reference.push(&reference);
        for (v, row) in variants.iter().enumerate() {
            for (k, p) in row.iter().enumerate() {
                out.targets[v][k].push(p);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Corpus(format!("{}: no region survived containment", seq.id)));
    }
    Ok(out)
}

/// Indices of the regions that survive containment at measurement scale `rho`.
pub fn contained_regions(seq: &Sequence, regions: &[RegionDetection], rho: f64, profiles: &[NoiseProfile]) -> Vec<usize> {
    let dims = (seq.reference.width(), seq.reference.height());
    let bounds = envelope(profiles);
    (0..regions.len())
        .filter(|&i| region_fits(dims, &seq.homographies, &regions[i], rho, &bounds))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{gen_sequence, SequenceSpec};

    fn ramp(horizontal: bool) -> Image {
        Image::from_fn(200, 200, |x, y| if horizontal { x as f32 / 200.0 } else { y as f32 / 200.0 })
    }

    #[test]
    fn orientation_of_ramps() {
        let r = RegionDetection::new(100.0, 100.0, 3.0, 0.0);
        assert!(dominant_orientation(&ramp(true), &r).abs() < 1e-9);
        let half_bin = PI / ORIENTATION_BINS as f64;
        assert!((dominant_orientation(&ramp(false), &r) - PI / 2.0).abs() <= half_bin);
    }

    #[test]
    fn orientation_of_constant_image_is_zero() {
        let img = Image::filled(100, 100, 0.3);
        assert_eq!(dominant_orientation(&img, &RegionDetection::new(50.0, 50.0, 2.0, 0.0)), 0.0);
    }

    #[test]
    fn orientation_follows_rotated_content() {
        let img = Image::from_fn(200, 200, |x, y| {
            let a: f64 = 0.6;
            ((x as f64 * a.cos() + y as f64 * a.sin()) / 300.0) as f32
        });
        let got = dominant_orientation(&img, &RegionDetection::new(100.0, 100.0, 3.0, 0.0));
        assert!((got - 0.6).abs() < PI / ORIENTATION_BINS as f64);
    }

    #[test]
    fn axis_aligned_extraction_is_a_crop() {
        let img = Image::from_fn(120, 100, |x, y| ((x * 7 + y * 13) % 256) as f32 / 255.0);
        let r = RegionDetection::new(50.0, 45.0, 32.0 / DEFAULT_RHO, 0.0);
        let p = extract_patch(&img, &r, DEFAULT_RHO).unwrap();
        for j in 0..PATCH_SIZE {
            for i in 0..PATCH_SIZE {
                assert_eq!(p.get(i, j), img.get(50 - 32 + i, 45 - 32 + j));
            }
        }
    }

    #[test]
    fn extraction_is_periodic_in_angle() {
        let img = crate::synthesis::gen_texture(2, 160, 160).unwrap();
        let r = RegionDetection::new(80.0, 80.0, 3.0, 0.4);
        let a = extract_patch(&img, &r, 5.0).unwrap();
        let b = extract_patch(&img, &RegionDetection { theta: 0.4 + 2.0 * PI, ..r }, 5.0).unwrap();
        let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0f32, f32::max);
        assert!(diff < 1e-5);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn extraction_outside_image_fails() {
        let img = Image::filled(64, 64, 0.5);
        let r = RegionDetection::new(10.0, 32.0, 3.0, 0.0);
        assert!(matches!(extract_patch(&img, &r, 5.0), Err(Error::OutOfBounds)));
    }

    #[test]
    fn identity_homography_matches_direct_extraction() {
        let img = crate::synthesis::gen_texture(5, 160, 160).unwrap();
        let frame = region_frame(&RegionDetection::new(81.3, 77.9, 4.1, 0.7), 5.0);
        let a = extract_frame(&img, &frame).unwrap();
        let b = extract_through(&img, &frame, &Homography::identity()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn downsampling_averages_instead_of_aliasing() {
        let img = Image::from_fn(200, 200, |x, y| ((x + y) % 2) as f32);
        let frame = Affine::from_parts(nalgebra::Matrix2::identity() * 2.0 * HALF, Vector2::new(100.0, 100.0));
        assert_eq!(pixel_spacing(&frame.linear()), 2.0);
        let p = extract_frame(&img, &frame).unwrap();
        assert!(p.data().iter().all(|v| (v - 0.5).abs() < 0.02), "aliased checkerboard");
    }

    fn small_sequence(kind: SequenceKind, zero: bool) -> Sequence {
        let mut spec = SequenceSpec::new("s", 21, kind);
        spec.width = 200;
        spec.height = 200;
        if zero {
            spec.severity = [0.0; 5];
        }
        gen_sequence(&spec).unwrap()
    }

    fn grid_regions(img: &Image) -> Vec<RegionDetection> {
        let mut out = Vec::new();
        for y in (40..170).step_by(25) {
            for x in (40..170).step_by(25) {
                let r = RegionDetection::new(x as f64, y as f64, 2.0, 0.0);
                out.push(r.with_theta(dominant_orientation(img, &r)));
            }
        }
        out
    }

    #[test]
    fn no_noise_on_identity_sequence_gives_identical_groups() {
        let seq = small_sequence(SequenceKind::Illumination, true);
        let regions = grid_regions(&seq.reference);
        let mut params = ExtractionParams::new(1, 0);
        params.profiles = [NoiseProfile::NONE; 3];
        let sp = build_corpus(&seq, &regions, &params).unwrap();
        assert!(!sp.is_empty());
        for i in 0..sp.len() {
            let g = sp.group(i, NoiseLevel::Hard).unwrap();
            for t in &g.target_patches {
                assert_eq!(t, &g.ref_patch);
            }
        }
    }

    #[test]
    fn noise_is_applied_before_projection() {
        let seq = small_sequence(SequenceKind::Illumination, true);
        let regions = grid_regions(&seq.reference);
        let params = ExtractionParams::new(5, 3);
        let sp = build_corpus(&seq, &regions, &params).unwrap();
        for (i, &id) in sp.region_ids.iter().enumerate() {
            let r = regions[id as usize];
            let t = noise_for(&params, id, 2, 1);
            let frame = noisy_frame(&r, &noise_to_matrix(&t, r.m).unwrap(), params.rho);
            let expected = extract_frame(&seq.reference, &frame).unwrap();
            assert_eq!(sp.targets[1][2].patch_bytes(i), expected.to_bytes().as_slice());
        }
    }

    #[test]
    fn groups_are_complete_and_tough_is_harder() {
        let seq = small_sequence(SequenceKind::Viewpoint, false);
        let regions = grid_regions(&seq.reference);
        let sp = build_corpus(&seq, &regions, &ExtractionParams::new(2, 0)).unwrap();
        let n = sp.len();
        assert_eq!(sp.region_ids.len(), n);
        for v in 0..3 {
            for k in 0..TARGETS {
                assert_eq!(sp.targets[v][k].len(), n);
            }
        }
        let mean_dist = |v: usize| {
            let mut total = 0.0;
            for i in 0..n {
                let a = sp.reference.patch(i);
                for k in 0..TARGETS {
                    let b = sp.targets[v][k].patch(i);
                    total += a
                        .data()
                        .iter()
                        .zip(b.data())
                        .map(|(x, y)| ((x - y) as f64).powi(2))
                        .sum::<f64>()
                        .sqrt();
                }
            }
            total / (n * TARGETS) as f64
        };
        assert!(mean_dist(2) > mean_dist(0));
    }

    #[test]
    fn index_slots_follow_id_order() {
        let seq = small_sequence(SequenceKind::Illumination, true);
        let regions = grid_regions(&seq.reference);
        let sp = build_corpus(&seq, &regions, &ExtractionParams::new(1, 0)).unwrap();
        let corpus = PatchCorpus { sequences: vec![sp.clone(), sp] };
        let index = PatchIndex::new(&corpus);
        assert_eq!(index.len(), corpus.total_regions() * BLOCKS);
        for (k, id) in index.ids().enumerate() {
            assert_eq!(index.slot(id), k);
        }
    }

    #[test]
    fn strip_rejects_partial_patches() {
        assert!(PatchStrip::from_bytes(vec![0; PATCH_PIXELS + 1]).is_err());
        assert_eq!(PatchStrip::from_bytes(vec![0; 2 * PATCH_PIXELS]).unwrap().len(), 2);
    }
}
