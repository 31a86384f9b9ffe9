//! Descriptor post-processing: ZCA whitening with clipped eigenvalues,
//! signed power law and L2 normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_CLIP_CANDIDATES: [f64; 6] = [1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0];

/// A fitted whitening transform plus the power-law exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ZcaModel {
    pub mean: DVector<f64>,
    pub whitener: DMatrix<f64>,
    pub clip_fraction: f64,
    pub alpha: f64,
}

impl ZcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Mean zero, whitener `scale * I`.
    pub fn isotropic(dim: usize, scale: f64, alpha: f64) -> Self {
        ZcaModel {
            mean: DVector::zeros(dim),
            whitener: DMatrix::identity(dim, dim) * scale,
            clip_fraction: 1.0,
            alpha,
        }
    }

    /// Text form: a header line `zca D alpha clip_fraction`, the mean on one
    /// line, then the whitener row by row.
    pub fn to_text(&self) -> String {
        let d = self.dim();
        let join = |it: &mut dyn Iterator<Item = f64>| it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("zca {d} {} {}\n", self.alpha, self.clip_fraction);
        out.push_str(&join(&mut self.mean.iter().copied()));
        out.push('\n');
        for r in 0..d {
            out.push_str(&join(&mut (0..d).map(|c| self.whitener[(r, c)])));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::Fit(format!("malformed whitening model: {reason}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 4 || header[0] != "zca" {
            return Err(bad("header"));
        }
        let d: usize = header[1].parse().map_err(|_| bad("dimension"))?;
        let alpha: f64 = header[2].parse().map_err(|_| bad("alpha"))?;
        let clip_fraction: f64 = header[3].parse().map_err(|_| bad("clip fraction"))?;
        let mut row = |what: &str| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad(what))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(what))?;
            if v.len() != d {
                return Err(bad(what));
            }
            Ok(v)
        };
        let mean = DVector::from_vec(row("mean")?);
        let mut w = Vec::with_capacity(d * d);
        for _ in 0..d {
            w.extend(row("whitener")?);
        }
        Ok(ZcaModel {
            mean,
            whitener: DMatrix::from_row_slice(d, d, &w),
            clip_fraction,
            alpha,
        })
    }
}

/// Fits the whitener on `rows` (each of length `dim`). Eigenvalues of the
/// sample covariance below `clip_fraction * lambda_max` are raised to that
/// floor; the whitener is `U diag(1/sqrt(lambda)) U^T`.
pub fn fit_zca(rows: &[&[f64]], dim: usize, clip_fraction: f64, alpha: f64) -> Result<ZcaModel> {
    if !(clip_fraction > 0.0 && clip_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "clip fraction {clip_fraction} outside (0, 1]"
        )));
    }
    if dim == 0 {
        return Err(Error::Fit("zero-dimensional descriptors".into()));
    }
    let n = rows.len();
    if n < 10 * dim {
        return Err(Error::Fit(format!("{n} samples are too few for dimension {dim}")));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: r.len(),
        });
    }
    let mut mean = DVector::<f64>::zeros(dim);
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut centered = vec![0.0; dim];
    for r in rows {
        for (c, (v, m)) in centered.iter_mut().zip(r.iter().zip(mean.iter())) {
            *c = v - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let lambda_max = eig.eigenvalues.max();
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::Fit("covariance has no positive eigenvalue".into()));
    }
    let floor = clip_fraction * lambda_max;
    let inv_sqrt = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let u = &eig.eigenvectors;
    let mut whitener = u * DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
    let sym = (&whitener + whitener.transpose()) * 0.5;
    whitener = sym;
    Ok(ZcaModel {
        mean,
        whitener,
        clip_fraction,
        alpha,
    })
}

/// Whitening, signed power law, then L2 normalization. Zero stays zero.
pub fn apply_post(d: &[f64], m: &ZcaModel) -> Result<Vec<f64>> {
    if d.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: d.len(),
        });
    }
    let centered = DVector::from_iterator(d.len(), d.iter().zip(m.mean.iter()).map(|(v, mu)| v - mu));
    let w = &m.whitener * centered;
    let mut out: Vec<f64> = w.iter().map(|&v| v.signum() * v.abs().powf(m.alpha)).collect();
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|v| *v /= norm);
    } else {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(out)
}

/// Result of a validation sweep over clip fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipSelection {
    pub clip_fraction: f64,
    /// `(candidate, score)` in the order evaluated.
    pub scores: Vec<(f64, f64)>,
}

/// Returns the candidate maximizing `eval_fn`; ties go to the larger clip
/// fraction.
pub fn select_clip_threshold(
    candidates: &[f64],
    mut eval_fn: impl FnMut(f64) -> Result<f64>,
) -> Result<ClipSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no clip fraction candidates".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64)> = None;
    for &c in candidates {
        let s = eval_fn(c)?;
        scores.push((c, s));
        best = match best {
            Some((bc, bs)) if bs > s || (bs == s && bc >= c) => Some((bc, bs)),
            _ => Some((c, s)),
        };
    }
    Ok(ClipSelection {
        clip_fraction: best.expect("non-empty").0,
        scores,
    })
}
