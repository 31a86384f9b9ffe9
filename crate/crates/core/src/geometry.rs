//! Homographies, region frames, detector-noise sampling and region overlap.
//!
//! Coordinates are in pixels with pixel centers on integer positions. A
//! region is an oriented disc `(cx, cy, m, theta)`; its measurement region
//! is the square of half-extent `rho * m` rotated by `theta`, addressed in
//! normalized coordinates `[-1, 1]^2` through [`region_frame`].

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest detection scale kept by the detector, in pixels.
pub const MIN_DETECTION_SCALE: f64 = 1.6;

/// Default ratio between measurement-region half-extent and detection scale.
pub const DEFAULT_RHO: f64 = 5.0;

const DET_EPS: f64 = 1e-12;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = a - two_pi * ((a + PI) / two_pi).floor();
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Projective map between two images, normalized so that `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let h33 = m[(2, 2)];
        if !h33.is_finite() || h33.abs() < DET_EPS {
            return Err(Error::InvalidParameter(
                "homography bottom-right entry must be non-zero".into(),
            ));
        }
        let m = m / h33;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("homography has non-finite entries".into()));
        }
        if m.determinant().abs() <= DET_EPS {
            return Err(Error::InvalidParameter("homography is singular".into()));
        }
        Ok(Homography(m))
    }

    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::InvalidParameter(format!(
                "homography needs 9 entries, got {}",
                v.len()
            )));
        }
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn is_identity(&self) -> bool {
        self.0 == Matrix3::identity()
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is a construction invariant.
        let inv = self.0.try_inverse().expect("homography is invertible");
        Homography::new(inv).expect("inverse of a valid homography is valid")
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.0 * other.0)
    }

    fn denominator(&self, x: f64, y: f64) -> f64 {
        self.0[(2, 0)] * x + self.0[(2, 1)] * y + self.0[(2, 2)]
    }

    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let p = self.0 * Vector3::new(x, y, 1.0);
        if p.z.abs() < DET_EPS {
            return Err(Error::Projection { x, y });
        }
        Ok((p.x / p.z, p.y / p.z))
    }

    /// Analytic Jacobian of the projective map at `(x, y)`.
    pub fn jacobian(&self, x: f64, y: f64) -> Result<Matrix2<f64>> {
        let h = &self.0;
        let w = self.denominator(x, y);
        if w.abs() < DET_EPS {
            return Err(Error::Projection { x, y });
        }
        let u = h[(0, 0)] * x + h[(0, 1)] * y + h[(0, 2)];
        let v = h[(1, 0)] * x + h[(1, 1)] * y + h[(1, 2)];
        let w2 = w * w;
        Ok(Matrix2::new(
            (h[(0, 0)] * w - u * h[(2, 0)]) / w2,
            (h[(0, 1)] * w - u * h[(2, 1)]) / w2,
            (h[(1, 0)] * w - v * h[(2, 0)]) / w2,
            (h[(1, 1)] * w - v * h[(2, 1)]) / w2,
        ))
    }

    /// True when the map preserves orientation over the whole rectangle
    /// `[0, width-1] x [0, height-1]`.
    ///
    /// The denominator is affine in `(x, y)`, so positivity at the corners
    /// implies positivity inside, and `det J = det H / w^3`.
    pub fn is_orientation_preserving_on(&self, width: usize, height: usize) -> bool {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        self.0.determinant() > 0.0
            && [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
                .iter()
                .all(|&(x, y)| self.denominator(x, y) > DET_EPS)
    }

    /// One line of nine whitespace-separated decimals, row-major.
    pub fn to_line(&self) -> String {
        self.row_major()
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad homography entry {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_row_major(&values)
    }
}

/// 2D affine map stored as a 3×3 matrix with bottom row `[0, 0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine(Matrix3<f64>);

impl Affine {
    pub fn identity() -> Self {
        Affine(Matrix3::identity())
    }

    pub fn from_parts(linear: Matrix2<f64>, translation: Vector2<f64>) -> Self {
        Affine(Matrix3::new(
            linear[(0, 0)],
            linear[(0, 1)],
            translation.x,
            linear[(1, 0)],
            linear[(1, 1)],
            translation.y,
            0.0,
            0.0,
            1.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn linear(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.0[(0, 2)], self.0[(1, 2)])
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        (
            m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)],
            m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)],
        )
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Affine) -> Affine {
        Affine(self.0 * other.0)
    }

    pub fn inverse(&self) -> Option<Affine> {
        let lin = self.linear().try_inverse()?;
        let t = -(lin * self.translation());
        Some(Affine::from_parts(lin, t))
    }

    /// True when the image of `[-1, 1]^2` lies inside `[0, w-1] x [0, h-1]`.
    pub fn unit_square_inside(&self, width: usize, height: usize) -> bool {
        let (wmax, hmax) = ((width as f64) - 1.0, (height as f64) - 1.0);
        [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
            .iter()
            .all(|&(u, v)| {
                let (x, y) = self.apply(u, v);
                x >= 0.0 && y >= 0.0 && x <= wmax && y <= hmax
            })
    }
}

/// A detected keypoint: center, detection scale `m` and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDetection {
    pub cx: f64,
    pub cy: f64,
    pub m: f64,
    pub theta: f64,
}

impl RegionDetection {
    pub fn new(cx: f64, cy: f64, m: f64, theta: f64) -> Self {
        RegionDetection {
            cx,
            cy,
            m,
            theta: wrap_angle(theta),
        }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        RegionDetection {
            theta: wrap_angle(theta),
            ..self
        }
    }
}

/// Named detector-noise regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseLevel {
    None,
    Easy,
    Hard,
    Tough,
}

impl NoiseLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::Easy => "easy",
            NoiseLevel::Hard => "hard",
            NoiseLevel::Tough => "tough",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(NoiseLevel::None),
            "easy" | "e" => Ok(NoiseLevel::Easy),
            "hard" | "h" => Ok(NoiseLevel::Hard),
            "tough" | "t" => Ok(NoiseLevel::Tough),
            other => Err(Error::InvalidParameter(format!("unknown noise level {other:?}"))),
        }
    }
}

/// Bounds of the detector-noise distribution.
///
/// `theta_max` is in degrees, `t_max` in units of the detection scale,
/// `s_max` and `a_max` in log2 units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub name: NoiseLevel,
    pub theta_max: f64,
    pub t_max: f64,
    pub s_max: f64,
    pub a_max: f64,
}

impl NoiseProfile {
    pub const NONE: NoiseProfile = NoiseProfile {
        name: NoiseLevel::None,
        theta_max: 0.0,
        t_max: 0.0,
        s_max: 0.0,
        a_max: 0.0,
    };
    pub const EASY: NoiseProfile = NoiseProfile {
        name: NoiseLevel::Easy,
        theta_max: 10.0,
        t_max: 0.15,
        s_max: 0.15,
        a_max: 0.2,
    };
    pub const HARD: NoiseProfile = NoiseProfile {
        name: NoiseLevel::Hard,
        theta_max: 20.0,
        t_max: 0.3,
        s_max: 0.3,
        a_max: 0.4,
    };
    pub const TOUGH: NoiseProfile = NoiseProfile {
        name: NoiseLevel::Tough,
        theta_max: 30.0,
        t_max: 0.45,
        s_max: 0.5,
        a_max: 0.45,
    };

    pub fn preset(level: NoiseLevel) -> NoiseProfile {
        match level {
            NoiseLevel::None => Self::NONE,
            NoiseLevel::Easy => Self::EASY,
            NoiseLevel::Hard => Self::HARD,
            NoiseLevel::Tough => Self::TOUGH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let b = [self.theta_max, self.t_max, self.s_max, self.a_max];
        if b.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "noise bounds must be finite and non-negative: {b:?}"
            )))
        }
    }

    /// Largest singular value the noise can give to the linear part.
    pub fn max_stretch(&self) -> f64 {
        2f64.powf(self.s_max) * 2f64.powf(self.a_max / 2.0)
    }
}

/// One draw of the detector-noise transform.
///
/// `theta` is in radians, `tx`/`ty` in units of the detection scale, `s`
/// and `a` are linear factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTransform {
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
    pub s: f64,
    pub a: f64,
}

impl NoiseTransform {
    pub const IDENTITY: NoiseTransform = NoiseTransform {
        theta: 0.0,
        tx: 0.0,
        ty: 0.0,
        s: 1.0,
        a: 1.0,
    };

    pub fn within(&self, p: &NoiseProfile) -> bool {
        let eps = 1e-12;
        self.theta.abs() <= p.theta_max.to_radians() + eps
            && self.tx.abs() <= p.t_max + eps
            && self.ty.abs() <= p.t_max + eps
            && self.s.log2().abs() <= p.s_max + eps
            && self.a.log2().abs() <= p.a_max + eps
    }
}

fn symmetric_uniform<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        rng.gen_range(-bound..=bound)
    }
}

/// Draws a noise transform with every parameter uniform on its interval;
/// scale and anisotropy are uniform in the log2 domain.
pub fn sample_noise<R: Rng + ?Sized>(profile: &NoiseProfile, rng: &mut R) -> NoiseTransform {
    let theta = symmetric_uniform(rng, profile.theta_max.to_radians());
    let tx = symmetric_uniform(rng, profile.t_max);
    let ty = symmetric_uniform(rng, profile.t_max);
    let s = symmetric_uniform(rng, profile.s_max).exp2();
    let a = symmetric_uniform(rng, profile.a_max).exp2();
    NoiseTransform { theta, tx, ty, s, a }
}

/// Assembles the noise transform as an affine map on region-centered pixel
/// coordinates: scale by `diag(s/√a, s√a)`, rotate by `theta`, then
/// translate by `m * (tx, ty)`.
pub fn noise_to_matrix(t: &NoiseTransform, m: f64) -> Result<Affine> {
    if !(t.s > 0.0 && t.a > 0.0 && m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise needs positive s, a and m (s={}, a={}, m={m})",
            t.s, t.a
        )));
    }
    if *t == NoiseTransform::IDENTITY {
        return Ok(Affine::identity());
    }
    let sa = t.a.sqrt();
    let scale = Matrix2::new(t.s / sa, 0.0, 0.0, t.s * sa);
    Ok(Affine::from_parts(
        rotation(t.theta) * scale,
        Vector2::new(m * t.tx, m * t.ty),
    ))
}

/// Maps normalized patch coordinates `[-1, 1]^2` onto the measurement region.
pub fn region_frame(r: &RegionDetection, rho: f64) -> Affine {
    Affine::from_parts(rotation(r.theta) * (rho * r.m), Vector2::new(r.cx, r.cy))
}

/// Transports a region through a homography: the center is mapped exactly,
/// the scale is multiplied by `sqrt(|det J|)` and the orientation follows
/// the local linearization.
pub fn project_region(r: &RegionDetection, h: &Homography) -> Result<RegionDetection> {
    let (cx, cy) = h.apply(r.cx, r.cy)?;
    let j = h.jacobian(r.cx, r.cy)?;
    let dir = j * Vector2::new(r.theta.cos(), r.theta.sin());
    Ok(RegionDetection::new(
        cx,
        cy,
        r.m * j.determinant().abs().sqrt(),
        dir.y.atan2(dir.x),
    ))
}

/// Transports an affine measurement frame through a homography using the
/// same similarity approximation as [`project_region`], taken at the frame
/// center and along the frame's first axis.
pub fn project_frame(frame: &Affine, h: &Homography) -> Result<Affine> {
    let c = frame.translation();
    let (x, y) = h.apply(c.x, c.y)?;
    let j = h.jacobian(c.x, c.y)?;
    let lin = frame.linear();
    let axis = lin.column(0).into_owned();
    let moved = j * axis;
    let phi = moved.y.atan2(moved.x) - axis.y.atan2(axis.x);
    let sim = rotation(phi) * j.determinant().abs().sqrt();
    Ok(Affine::from_parts(sim * lin, Vector2::new(x, y)))
}

fn disc_intersection(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if d <= large - small {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

/// Intersection-over-union of the discs of radius `rho * m`.
pub fn region_iou(a: &RegionDetection, b: &RegionDetection, rho: f64) -> f64 {
    let (ra, rb) = (rho * a.m, rho * b.m);
    let d = (a.cx - b.cx).hypot(a.cy - b.cy);
    if d == 0.0 && ra == rb {
        return 1.0;
    }
    // Order the arguments so the result is bitwise symmetric.
    let inter = if (ra, a.cx, a.cy) <= (rb, b.cx, b.cy) {
        disc_intersection(ra, rb, d)
    } else {
        disc_intersection(rb, ra, d)
    };
    let union = PI * (ra * ra + rb * rb) - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn perspective() -> Homography {
        Homography::from_row_major(&[1.1, 0.05, 3.0, -0.04, 0.95, -2.0, 4e-4, -3e-4, 1.0]).unwrap()
    }

    #[test]
    fn presets_match_table_values() {
        let e = NoiseProfile::EASY;
        assert_eq!((e.theta_max, e.t_max, e.s_max, e.a_max), (10.0, 0.15, 0.15, 0.2));
        let h = NoiseProfile::HARD;
        assert_eq!((h.theta_max, h.t_max, h.s_max, h.a_max), (20.0, 0.3, 0.3, 0.4));
        let t = NoiseProfile::TOUGH;
        assert_eq!((t.theta_max, t.t_max, t.s_max, t.a_max), (30.0, 0.45, 0.5, 0.45));
    }

    #[test]
    fn none_profile_samples_identity() {
        let mut r = rng::stream(3);
        for _ in 0..100 {
            assert_eq!(sample_noise(&NoiseProfile::NONE, &mut r), NoiseTransform::IDENTITY);
        }
    }

    #[test]
    fn tough_samples_stay_in_bounds() {
        let mut r = rng::stream(11);
        for _ in 0..10_000 {
            let t = sample_noise(&NoiseProfile::TOUGH, &mut r);
            assert!(t.theta.abs() <= 30f64.to_radians());
            assert!(t.s.log2().abs() <= 0.5 + 1e-12);
            assert!(t.within(&NoiseProfile::TOUGH));
        }
    }

    #[test]
    fn easy_theta_mean_is_centered() {
        let mut r = rng::stream(5);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_noise(&NoiseProfile::EASY, &mut r).theta.to_degrees())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.2, "mean theta {mean}");
    }

    #[test]
    fn identity_noise_is_exact_identity() {
        for m in [1.6, 3.0, 40.0] {
            assert_eq!(noise_to_matrix(&NoiseTransform::IDENTITY, m).unwrap(), Affine::identity());
        }
    }

    #[test]
    fn quarter_turn_maps_x_to_y() {
        let t = NoiseTransform {
            theta: PI / 2.0,
            ..NoiseTransform::IDENTITY
        };
        let (x, y) = noise_to_matrix(&t, 2.0).unwrap().apply(1.0, 0.0);
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_translated_noise_matrix() {
        let t = NoiseTransform {
            s: 2.0,
            tx: 0.15,
            ..NoiseTransform::IDENTITY
        };
        let a = noise_to_matrix(&t, 10.0).unwrap();
        assert_eq!(a.linear(), Matrix2::new(2.0, 0.0, 0.0, 2.0));
        assert!((a.translation() - Vector2::new(1.5, 0.0)).norm() < 1e-15);
        // Composed point mapping: scale first, then translate.
        let (x, y) = a.apply(1.0, 1.0);
        assert!((x - 3.5).abs() < 1e-12 && (y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noise_matrix_rejects_bad_parameters() {
        let bad = NoiseTransform {
            s: 0.0,
            ..NoiseTransform::IDENTITY
        };
        assert!(noise_to_matrix(&bad, 1.0).is_err());
        assert!(noise_to_matrix(&NoiseTransform::IDENTITY, 0.0).is_err());
    }

    #[test]
    fn noise_determinant_is_s_squared() {
        let mut r = rng::stream(9);
        for _ in 0..1000 {
            let t = sample_noise(&NoiseProfile::TOUGH, &mut r);
            let det = noise_to_matrix(&t, 2.0).unwrap().linear().determinant();
            assert!((det - t.s * t.s).abs() < 1e-12 * t.s * t.s);
        }
    }

    #[test]
    fn identity_projection_is_noop() {
        let r = RegionDetection::new(12.5, 40.25, 2.3, 0.7);
        assert_eq!(project_region(&r, &Homography::identity()).unwrap(), r);
    }

    #[test]
    fn similarity_projection() {
        let h = Homography::from_row_major(&[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = project_region(&RegionDetection::new(10.0, 10.0, 2.0, 0.0), &h).unwrap();
        assert_eq!(p, RegionDetection::new(20.0, 20.0, 4.0, 0.0));
    }

    #[test]
    fn projected_scale_matches_finite_differences() {
        let h = perspective();
        let (x, y) = (120.0, 80.0);
        let step = 1e-4;
        let f = |x: f64, y: f64| h.apply(x, y).unwrap();
        let (xp, yp) = (f(x + step, y), f(x - step, y));
        let (xq, yq) = (f(x, y + step), f(x, y - step));
        let j = Matrix2::new(
            (xp.0 - yp.0) / (2.0 * step),
            (xq.0 - yq.0) / (2.0 * step),
            (xp.1 - yp.1) / (2.0 * step),
            (xq.1 - yq.1) / (2.0 * step),
        );
        let expected = 3.0 * j.determinant().abs().sqrt();
        let got = project_region(&RegionDetection::new(x, y, 3.0, 0.2), &h).unwrap().m;
        assert!(((got - expected) / expected).abs() < 1e-4);
    }

    #[test]
    fn projection_round_trip() {
        let h = perspective();
        let r = RegionDetection::new(150.0, 60.0, 2.5, -1.2);
        let back = project_region(&project_region(&r, &h).unwrap(), &h.inverse()).unwrap();
        assert!((back.cx - r.cx).abs() < 1e-9 && (back.cy - r.cy).abs() < 1e-9);
        assert!((back.m - r.m).abs() < 1e-6);
    }

    #[test]
    fn projection_to_infinity_fails() {
        let h = Homography::from_row_major(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0]).unwrap();
        assert!(matches!(
            project_region(&RegionDetection::new(-100.0, 5.0, 2.0, 0.0), &h),
            Err(Error::Projection { .. })
        ));
    }

    #[test]
    fn iou_basic_cases() {
        let a = RegionDetection::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(region_iou(&a, &a, 1.0), 1.0);
        let far = RegionDetection::new(10.0, 0.0, 1.0, 0.0);
        assert_eq!(region_iou(&a, &far, 1.0), 0.0);
        let b = RegionDetection::new(1.0, 0.0, 1.0, 0.0);
        assert!((region_iou(&a, &b, 1.0) - 0.2430).abs() < 1e-4);
    }

    #[test]
    fn iou_lens_matches_monte_carlo() {
        use rand::Rng;
        let a = RegionDetection::new(0.0, 0.0, 1.0, 0.0);
        let b = RegionDetection::new(1.0, 0.0, 1.0, 0.0);
        let mut r = rng::stream(1);
        let (mut inter, mut union) = (0u64, 0u64);
        for _ in 0..400_000 {
            let x: f64 = r.gen_range(-1.0..2.0);
            let y: f64 = r.gen_range(-1.0..1.0);
            let ia = x * x + y * y <= 1.0;
            let ib = (x - 1.0).powi(2) + y * y <= 1.0;
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
        let mc = inter as f64 / union as f64;
        assert!((mc - region_iou(&a, &b, 1.0)).abs() < 5e-3, "mc {mc}");
    }

    #[test]
    fn iou_nested_discs() {
        let a = RegionDetection::new(0.0, 0.0, 1.0, 0.0);
        let b = RegionDetection::new(0.0, 0.0, 2.0, 0.0);
        assert!((region_iou(&a, &b, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn region_frame_examples() {
        let f = region_frame(&RegionDetection::new(0.0, 0.0, 1.0, 0.0), 1.0);
        assert_eq!(f, Affine::identity());
        let f = region_frame(&RegionDetection::new(100.0, 50.0, 3.2, 0.0), 5.0);
        let (x, y) = f.apply(1.0, 1.0);
        assert!((x - 116.0).abs() < 1e-12 && (y - 66.0).abs() < 1e-12);
        let r = RegionDetection::new(33.0, -4.0, 2.7, 2.1);
        let f = region_frame(&r, 5.0);
        let id = f.compose(&f.inverse().unwrap());
        assert!((id.matrix() - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn smallest_region_spans_sixteen_pixels() {
        let f = region_frame(&RegionDetection::new(50.0, 50.0, MIN_DETECTION_SCALE, 0.0), DEFAULT_RHO);
        let (x0, _) = f.apply(-1.0, 0.0);
        let (x1, _) = f.apply(1.0, 0.0);
        assert!((x1 - x0 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn project_frame_agrees_with_project_region() {
        let h = perspective();
        let r = RegionDetection::new(90.0, 70.0, 2.0, 0.4);
        let a = project_frame(&region_frame(&r, 5.0), &h).unwrap();
        let b = region_frame(&project_region(&r, &h).unwrap(), 5.0);
        assert!((a.matrix() - b.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn homography_line_round_trip() {
        let h = perspective();
        assert_eq!(Homography::parse_line(&h.to_line()).unwrap(), h);
        assert!(Homography::parse_line("1 2 3").is_err());
        assert!(Homography::from_row_major(&[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn iou_symmetric_and_bounded(
                ax in -20.0..20.0f64, ay in -20.0..20.0f64, am in 0.5..5.0f64,
                bx in -20.0..20.0f64, by in -20.0..20.0f64, bm in 0.5..5.0f64,
            ) {
                let a = RegionDetection::new(ax, ay, am, 0.0);
                let b = RegionDetection::new(bx, by, bm, 0.0);
                let ab = region_iou(&a, &b, 1.0);
                prop_assert_eq!(ab, region_iou(&b, &a, 1.0));
                prop_assert!((0.0..=1.0).contains(&ab));
                if ab == 1.0 {
                    prop_assert!(a.cx == b.cx && a.cy == b.cy && a.m == b.m);
                }
            }
        }
    }
}
