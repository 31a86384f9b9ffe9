//! Baseline descriptors: MStd, Resz, SIFT, RootSIFT and BRIEF.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch::{Patch, PatchCorpus, PatchIndex, PATCH_SIZE};
use crate::rng::{self, tag};

pub const RESZ_SIDE: usize = 6;
pub const SIFT_CELLS: usize = 4;
pub const SIFT_BINS: usize = 8;
pub const SIFT_DIM: usize = SIFT_CELLS * SIFT_CELLS * SIFT_BINS;
pub const SIFT_CLAMP: f64 = 0.2;
pub const BRIEF_BITS: usize = 256;
pub const BRIEF_SMOOTHING: f64 = 2.0;
pub const DEFAULT_BRIEF_SEED: u64 = 0x5EED_B41E;

const BRIEF_WORDS: usize = BRIEF_BITS / 64;
const CENTER: f64 = ((PATCH_SIZE - 1) / 2) as f64;

/// A real-valued or binary descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Real(Vec<f64>),
    Binary([u64; BRIEF_WORDS]),
}

impl Descriptor {
    pub fn dim(&self) -> usize {
        match self {
            Descriptor::Real(v) => v.len(),
            Descriptor::Binary(_) => BRIEF_BITS,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Descriptor::Real(v) => Some(v),
            Descriptor::Binary(_) => None,
        }
    }
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn hamming_distance(a: &[u64; BRIEF_WORDS], b: &[u64; BRIEF_WORDS]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// L2 distance for real descriptors, Hamming distance for binary ones.
pub fn distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    match (a, b) {
        (Descriptor::Real(x), Descriptor::Real(y)) => {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    found: y.len(),
                });
            }
            Ok(l2_distance(x, y))
        }
        (Descriptor::Binary(x), Descriptor::Binary(y)) => Ok(hamming_distance(x, y) as f64),
        _ => Err(Error::FamilyMismatch("real".into(), "binary".into())),
    }
}

pub fn score(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    distance(a, b).map(|d| -d)
}

/// Patch mean and population standard deviation.
pub fn mstd(p: &Patch) -> Vec<f64> {
    let n = p.data().len() as f64;
    let mu = p.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = p.data().iter().map(|&v| (v as f64 - mu).powi(2)).sum::<f64>() / n;
    vec![mu, var.sqrt()]
}

/// Area weights of each 65-pixel row over the 6 output cells.
fn resz_weights() -> &'static [[f64; PATCH_SIZE]; RESZ_SIDE] {
    static W: OnceLock<[[f64; PATCH_SIZE]; RESZ_SIDE]> = OnceLock::new();
    W.get_or_init(|| {
        let cell = PATCH_SIZE as f64 / RESZ_SIDE as f64;
        let mut w = [[0.0; PATCH_SIZE]; RESZ_SIDE];
        for (c, row) in w.iter_mut().enumerate() {
            let (lo, hi) = (c as f64 * cell, (c + 1) as f64 * cell);
            for (i, wi) in row.iter_mut().enumerate() {
                let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                *wi = overlap / cell;
            }
        }
        w
    })
}

/// Exact area-averaged 6×6 downsample of a patch.
pub fn downsample6(p: &Patch) -> [f64; RESZ_SIDE * RESZ_SIDE] {
    let w = resz_weights();
    let mut rows = [[0.0; PATCH_SIZE]; RESZ_SIDE];
    for (cy, row) in rows.iter_mut().enumerate() {
        for y in 0..PATCH_SIZE {
            let wy = w[cy][y];
            if wy == 0.0 {
                continue;
            }
            for (x, r) in row.iter_mut().enumerate() {
                *r += wy * p.get(x, y) as f64;
            }
        }
    }
    let mut out = [0.0; RESZ_SIDE * RESZ_SIDE];
    for cy in 0..RESZ_SIDE {
        for cx in 0..RESZ_SIDE {
            out[cy * RESZ_SIDE + cx] = (0..PATCH_SIZE).map(|x| w[cx][x] * rows[cy][x]).sum();
        }
    }
    out
}

/// 6×6 thumbnail standardized to zero mean and unit variance.
pub fn resz(p: &Patch) -> Vec<f64> {
    // Standardization ignores offsets; shifting first keeps flat patches exactly zero.
    let shift = p.get(0, 0);
    let shifted = Patch::new(p.data().iter().map(|&v| v - shift).collect()).expect("same size");
    let mut v = downsample6(&shifted).to_vec();
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd < 1e-8 { 1.0 } else { sd };
    v.iter_mut().for_each(|x| *x = (*x - mu) / sd);
    v
}

/// Per-pixel spatial cell weights of the SIFT grid, including the Gaussian
/// window: `(cell index, weight)` for up to four cells.
fn sift_spatial() -> &'static Vec<[(usize, f64); 4]> {
    static S: OnceLock<Vec<[(usize, f64); 4]>> = OnceLock::new();
    S.get_or_init(|| {
        let cell = PATCH_SIZE as f64 / SIFT_CELLS as f64;
        let sigma = PATCH_SIZE as f64 / 2.0;
        let axis = |c: usize| {
            let b = (c as f64 - CENTER) / cell + (SIFT_CELLS as f64 - 1.0) / 2.0;
            let b0 = b.floor();
            let f = b - b0;
            let b0 = b0 as isize;
            let mut out = [(0usize, 0.0f64); 2];
            for (slot, (bi, wi)) in [(b0, 1.0 - f), (b0 + 1, f)].into_iter().enumerate() {
                if (0..SIFT_CELLS as isize).contains(&bi) {
                    out[slot] = (bi as usize, wi);
                }
            }
            out
        };
        let mut table = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE);
        for y in 0..PATCH_SIZE {
            let ay = axis(y);
            for x in 0..PATCH_SIZE {
                let ax = axis(x);
                let r2 = (x as f64 - CENTER).powi(2) + (y as f64 - CENTER).powi(2);
                let g = (-r2 / (2.0 * sigma * sigma)).exp();
                let mut e = [(0usize, 0.0); 4];
                for (iy, &(by, wy)) in ay.iter().enumerate() {
                    for (ix, &(bx, wx)) in ax.iter().enumerate() {
                        e[iy * 2 + ix] = (by * SIFT_CELLS + bx, g * wy * wx);
                    }
                }
                table.push(e);
            }
        }
        table
    })
}

fn normalize_l2(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}

/// Unnormalized SIFT histogram: 4×4 cells × 8 orientations with trilinear
/// soft binning of Gaussian-weighted gradient magnitudes.
pub fn sift_histogram(p: &Patch) -> Vec<f64> {
    let spatial = sift_spatial();
    let mut h = vec![0.0; SIFT_DIM];
    let last = PATCH_SIZE - 1;
    let bin_scale = SIFT_BINS as f64 / (2.0 * std::f64::consts::PI);
    for y in 0..PATCH_SIZE {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(last));
        for x in 0..PATCH_SIZE {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(last));
            let dx = (p.get(xp, y) - p.get(xm, y)) as f64 / (xp - xm) as f64;
            let dy = (p.get(x, yp) - p.get(x, ym)) as f64 / (yp - ym) as f64;
            let mag = dx.hypot(dy);
            if mag == 0.0 {
                continue;
            }
            let o = dy.atan2(dx).rem_euclid(2.0 * std::f64::consts::PI) * bin_scale;
            let o0 = o.floor();
            let fo = o - o0;
            let o0 = o0 as usize % SIFT_BINS;
            let o1 = (o0 + 1) % SIFT_BINS;
            for &(c, w) in &spatial[y * PATCH_SIZE + x] {
                if w == 0.0 {
                    continue;
                }
                let base = c * SIFT_BINS;
                h[base + o0] += mag * w * (1.0 - fo);
                h[base + o1] += mag * w * fo;
            }
        }
    }
    h
}

/// SIFT normalization: L2, clamp at 0.2, L2 again. Zero stays zero.
pub fn sift_normalize(mut h: Vec<f64>) -> Vec<f64> {
    if normalize_l2(&mut h) {
        h.iter_mut().for_each(|x| *x = x.min(SIFT_CLAMP));
        normalize_l2(&mut h);
    }
    h
}

pub fn sift(p: &Patch) -> Vec<f64> {
    sift_normalize(sift_histogram(p))
}

/// RootSIFT from a SIFT vector: L1 normalization then elementwise sqrt.
pub fn root_of_sift(mut v: Vec<f64>) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 > 0.0 {
        v.iter_mut().for_each(|x| *x = (x.abs() / l1).sqrt());
    }
    v
}

pub fn rootsift(p: &Patch) -> Vec<f64> {
    root_of_sift(sift(p))
}

/// Fixed BRIEF test pattern: 256 pairs of pixel positions.
#[derive(Debug, Clone, PartialEq)]
pub struct BriefPattern {
    pairs: Vec<[(usize, usize); 2]>,
}

impl BriefPattern {
    /// Isotropic Gaussian point pairs around the patch center with
    /// sigma = side / 5, clamped into the patch.
    pub fn new(seed: u64) -> Self {
        let mut s = rng::substream(seed, &[tag::BRIEF]);
        let normal = Normal::new(CENTER, PATCH_SIZE as f64 / 5.0).expect("valid sigma");
        let mut coord = || normal.sample(&mut s).round().clamp(0.0, (PATCH_SIZE - 1) as f64) as usize;
        let pairs = (0..BRIEF_BITS)
            .map(|_| [(coord(), coord()), (coord(), coord())])
            .collect();
        BriefPattern { pairs }
    }

    pub fn pairs(&self) -> &[[(usize, usize); 2]] {
        &self.pairs
    }

    pub fn describe(&self, p: &Patch) -> [u64; BRIEF_WORDS] {
        let img = Image::from_fn(PATCH_SIZE, PATCH_SIZE, |x, y| p.get(x, y));
        let smooth = img.gaussian_blur(BRIEF_SMOOTHING);
        let mut bits = [0u64; BRIEF_WORDS];
        for (k, [(px, py), (qx, qy)]) in self.pairs.iter().enumerate() {
            if smooth.get(*px, *py) < smooth.get(*qx, *qy) {
                bits[k / 64] |= 1 << (k % 64);
            }
        }
        bits
    }
}

pub fn brief(p: &Patch, pattern: &BriefPattern) -> [u64; BRIEF_WORDS] {
    pattern.describe(p)
}

/// Descriptor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    MStd,
    Resz,
    Sift,
    RootSift,
    Brief,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::MStd, Family::Resz, Family::Sift, Family::RootSift, Family::Brief];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::MStd => "mstd",
            Family::Resz => "resz",
            Family::Sift => "sift",
            Family::RootSift => "rootsift",
            Family::Brief => "brief",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::MStd => 2,
            Family::Resz => RESZ_SIDE * RESZ_SIDE,
            Family::Sift | Family::RootSift => SIFT_DIM,
            Family::Brief => BRIEF_BITS,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Family::Brief)
    }

    /// Whether the whitening / power-law / L2 chain may be applied.
    pub fn supports_post(&self) -> bool {
        matches!(self, Family::Sift | Family::RootSift)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mstd" => Ok(Family::MStd),
            "resz" => Ok(Family::Resz),
            "sift" => Ok(Family::Sift),
            "rootsift" | "rsift" => Ok(Family::RootSift),
            "brief" => Ok(Family::Brief),
            other => Err(Error::Config(format!("unknown descriptor {other:?}"))),
        }
    }
}

/// A descriptor family, optionally followed by post-processing (`+sift`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DescriptorSpec {
    pub family: Family,
    pub post: bool,
}

impl DescriptorSpec {
    pub fn plain(family: Family) -> Self {
        DescriptorSpec { family, post: false }
    }

    pub fn name(&self) -> String {
        format!("{}{}", if self.post { "+" } else { "" }, self.family)
    }
}

impl fmt::Display for DescriptorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for DescriptorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (post, rest) = match s.strip_prefix('+') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let family: Family = rest.parse()?;
        if post && !family.supports_post() {
            return Err(Error::Config(format!(
                "post-processing is not defined for {family}"
            )));
        }
        Ok(DescriptorSpec { family, post })
    }
}

/// Computes descriptors of one family.
#[derive(Debug, Clone)]
pub struct Extractor {
    family: Family,
    pattern: Option<BriefPattern>,
}

impl Extractor {
    pub fn new(family: Family, brief_seed: u64) -> Self {
        let pattern = family.is_binary().then(|| BriefPattern::new(brief_seed));
        Extractor { family, pattern }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn compute(&self, p: &Patch) -> Descriptor {
        match self.family {
            Family::MStd => Descriptor::Real(mstd(p)),
            Family::Resz => Descriptor::Real(resz(p)),
            Family::Sift => Descriptor::Real(sift(p)),
            Family::RootSift => Descriptor::Real(rootsift(p)),
            Family::Brief => Descriptor::Binary(brief(p, self.pattern.as_ref().expect("pattern"))),
        }
    }
}

/// Descriptors of every patch of a corpus, stored in [`PatchIndex`] slot
/// order.
#[derive(Debug, Clone, PartialEq)]
pub enum DescriptorTable {
    Real { dim: usize, data: Vec<f64> },
    Binary(Vec<[u64; BRIEF_WORDS]>),
}

impl DescriptorTable {
    pub fn compute(corpus: &PatchCorpus, index: &PatchIndex, extractor: &Extractor) -> Self {
        let ids: Vec<_> = index.ids().collect();
        if extractor.family().is_binary() {
            let pattern = extractor.pattern.as_ref().expect("pattern");
            let data = ids
                .par_iter()
                .map(|&id| pattern.describe(&corpus.patch(id)))
                .collect();
            DescriptorTable::Binary(data)
        } else {
            let rows: Vec<Vec<f64>> = ids
                .par_iter()
                .map(|&id| match extractor.compute(&corpus.patch(id)) {
                    Descriptor::Real(v) => v,
                    Descriptor::Binary(_) => unreachable!(),
                })
                .collect();
            Self::from_rows(extractor.family().dim(), rows)
        }
    }

    pub fn from_rows(dim: usize, rows: Vec<Vec<f64>>) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            debug_assert_eq!(r.len(), dim);
            data.extend(r);
        }
        DescriptorTable::Real { dim, data }
    }

    pub fn len(&self) -> usize {
        match self {
            DescriptorTable::Real { dim, data } => data.len() / dim,
            DescriptorTable::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            DescriptorTable::Real { dim, .. } => *dim,
            DescriptorTable::Binary(_) => BRIEF_BITS,
        }
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        match self {
            DescriptorTable::Real { dim, data } => Some(&data[i * dim..(i + 1) * dim]),
            DescriptorTable::Binary(_) => None,
        }
    }

    pub fn get(&self, i: usize) -> Descriptor {
        match self {
            DescriptorTable::Real { .. } => Descriptor::Real(self.row(i).expect("real").to_vec()),
            DescriptorTable::Binary(v) => Descriptor::Binary(v[i]),
        }
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self {
            DescriptorTable::Real { dim, data } => {
                l2_distance(&data[i * dim..(i + 1) * dim], &data[j * dim..(j + 1) * dim])
            }
            DescriptorTable::Binary(v) => hamming_distance(&v[i], &v[j]) as f64,
        }
    }

    /// Applies `f` to every real row.
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        match self {
            DescriptorTable::Real { dim, data } => {
                let rows: Vec<Vec<f64>> = data.par_chunks(*dim).map(&f).collect();
                let out_dim = rows.first().map_or(*dim, |r| r.len());
                Ok(Self::from_rows(out_dim, rows))
            }
            DescriptorTable::Binary(_) => Err(Error::FamilyMismatch("real".into(), "binary".into())),
        }
    }
}
