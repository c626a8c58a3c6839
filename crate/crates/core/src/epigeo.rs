//! Two-view geometry: fundamental-matrix estimation, epipoles, epipolar
//! lines, essential-matrix decomposition and linear triangulation.
//!
//! Conventions: a relative pose `(R, t)` maps camera-1 coordinates to
//! camera-2 coordinates, `X2 = R X1 + t`. Correspondences satisfy
//! `x2ᵀ F x1 = 0`.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, RowVector4, Vector3, Vector4};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imgio::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least {needed} correspondences, got {got}")]
    Arity { needed: usize, got: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("robust fit failed: best consensus {best} below {needed}")]
    RobustFit { best: usize, needed: usize },
    #[error("essential decomposition failed: {0}")]
    Decomposition(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Homogeneous image point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomPoint2(pub Vector3<f64>);

impl HomPoint2 {
    pub fn new(x: f64, y: f64, w: f64) -> Self {
        Self(Vector3::new(x, y, w))
    }

    pub fn from_point(p: Point2) -> Self {
        Self(Vector3::new(p.x, p.y, 1.0))
    }

    /// Inhomogeneous coordinates, or `None` for a point at infinity.
    pub fn to_point(&self) -> Option<Point2> {
        let w = self.0.z;
        if w.abs() <= 1e-12 * self.0.norm() {
            None
        } else {
            Some(Point2::new(self.0.x / w, self.0.y / w))
        }
    }

    pub fn is_at_infinity(&self) -> bool {
        self.to_point().is_none()
    }
}

impl From<Point2> for HomPoint2 {
    fn from(p: Point2) -> Self {
        Self::from_point(p)
    }
}

/// Homogeneous line: `p` lies on the line iff `l · p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomLine2(pub Vector3<f64>);

impl HomLine2 {
    pub fn through(a: &HomPoint2, b: &HomPoint2) -> Self {
        Self(a.0.cross(&b.0))
    }

    /// Scales so that `(a, b)` has unit norm; the residual `l · (x, y, 1)` is
    /// then a signed distance in pixels.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.0.x.hypot(self.0.y);
        (n > 0.0 && n.is_finite()).then(|| Self(self.0 / n))
    }

    pub fn residual(&self, p: &Point2) -> f64 {
        self.0.x * p.x + self.0.y * p.y + self.0.z
    }

    pub fn distance(&self, p: &Point2) -> f64 {
        match self.normalized() {
            Some(l) => l.residual(p).abs(),
            None => f64::INFINITY,
        }
    }

    /// True when the two lines agree up to (signed) scale within `tol`.
    pub fn same_as(&self, other: &HomLine2, tol: f64) -> bool {
        let a = self.0.normalize();
        let b = other.0.normalize();
        (a - b).norm() < tol || (a + b).norm() < tol
    }
}

/// Rank-2 fundamental matrix, stored with unit Frobenius norm and its
/// largest-magnitude entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Projects onto rank 2 and applies the norm/sign convention.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::Degenerate("non-finite matrix".into()));
        }
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut s = svd.singular_values;
        let min = argmin(s.as_slice());
        s[min] = 0.0;
        let r2 = u * Matrix3::from_diagonal(&s) * vt;
        Self::normalize(r2)
    }

    fn normalize(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let n = m.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(GeometryError::Degenerate("zero fundamental matrix".into()));
        }
        let mut m = m / n;
        let big = m
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if big < 0.0 {
            m = -m;
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> FundamentalMatrix {
        FundamentalMatrix::normalize(self.0.transpose()).expect("nonzero")
    }

    /// Algebraic residual `x2ᵀ F x1` with both points scaled to unit norm.
    pub fn normalized_residual(&self, x1: &HomPoint2, x2: &HomPoint2) -> f64 {
        let a = x1.0.normalize();
        let b = x2.0.normalize();
        (b.transpose() * self.0 * a)[0]
    }

    /// Row-major, whitespace separated, shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let vals: Vec<String> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| format!("{}", self.0[(r, c)]))
            .collect();
        format!("{}\n", vals.join(" "))
    }

    pub fn from_text(text: &str) -> Result<Self, GeometryError> {
        let vals: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| GeometryError::Parse {
                    line: 1,
                    reason: format!("bad number {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != 9 {
            return Err(GeometryError::Parse {
                line: 1,
                reason: format!("expected 9 values, got {}", vals.len()),
            });
        }
        Self::from_matrix(Matrix3::from_row_slice(&vals))
    }
}

fn argmin(s: &[f64]) -> usize {
    s.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            skew: 0.0,
        };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.skew]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::Parameter(
                "intrinsics need finite values and positive focal lengths".into(),
            ));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0,
        )
    }

    /// Parses `key = value` lines (fx, fy, cx, cy, optional skew); `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, GeometryError> {
        let (mut fx, mut fy, mut cx, mut cy, mut skew) = (None, None, None, None, 0.0);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| GeometryError::Parse {
                line: i + 1,
                reason,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected key = value".into()))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad number {:?}", v.trim())))?;
            match k.trim() {
                "fx" => fx = Some(v),
                "fy" => fy = Some(v),
                "cx" => cx = Some(v),
                "cy" => cy = Some(v),
                "skew" => skew = v,
                other => return Err(parse_err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |n: &str| GeometryError::Parse {
            line: 0,
            reason: format!("missing key {n}"),
        };
        let k = Self {
            fx: fx.ok_or_else(|| missing("fx"))?,
            fy: fy.ok_or_else(|| missing("fy"))?,
            cx: cx.ok_or_else(|| missing("cx"))?,
            cy: cy.ok_or_else(|| missing("cy"))?,
            skew,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn to_text(&self) -> String {
        format!(
            "fx = {}\nfy = {}\ncx = {}\ncy = {}\nskew = {}\n",
            self.fx, self.fy, self.cx, self.cy, self.skew
        )
    }
}

/// Rotation plus unit translation direction, camera 1 → camera 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RelativePose {
    /// Validates orthonormality; `translation` is scaled to unit length.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::Parameter("rotation is not in SO(3)".into()));
        }
        let n = translation.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(GeometryError::Parameter("zero translation".into()));
        }
        Ok(Self {
            rotation,
            translation: translation / n,
        })
    }
}

/// `[v]ₓ`, the matrix with `[v]ₓ w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `F = K2⁻ᵀ [t]ₓ R K1⁻¹` for a pose whose translation may have any length.
pub fn fundamental_from_pose(
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
) -> Result<FundamentalMatrix, GeometryError> {
    let k1i = k1.matrix().try_inverse().expect("valid intrinsics");
    let k2i = k2.matrix().try_inverse().expect("valid intrinsics");
    FundamentalMatrix::from_matrix(k2i.transpose() * skew(translation) * rotation * k1i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveCameraPair {
    pub p1: Matrix3x4<f64>,
    pub p2: Matrix3x4<f64>,
}

impl ProjectiveCameraPair {
    /// `P1 = [I | 0]`, `P2 = [[e2]ₓ F | e2]`.
    pub fn canonical(f: &FundamentalMatrix) -> Self {
        let e2 = epipole(f, EpipoleSide::Right).0;
        let m = skew(&e2) * f.matrix();
        let mut p2 = Matrix3x4::zeros();
        p2.fixed_view_mut::<3, 3>(0, 0).copy_from(&m);
        p2.set_column(3, &e2);
        let mut p1 = Matrix3x4::zeros();
        p1.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        Self { p1, p2 }
    }

    /// `P1 = K1 [I | 0]`, `P2 = K2 [R | t]`.
    pub fn calibrated(k1: &CameraIntrinsics, k2: &CameraIntrinsics, pose: &RelativePose) -> Self {
        let mut ext1 = Matrix3x4::zeros();
        ext1.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&Matrix3::identity());
        let mut ext2 = Matrix3x4::zeros();
        ext2.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation);
        ext2.set_column(3, &pose.translation);
        Self {
            p1: k1.matrix() * ext1,
            p2: k2.matrix() * ext2,
        }
    }
}

fn to_inhomogeneous(p: &HomPoint2) -> Result<Point2, GeometryError> {
    p.to_point()
        .ok_or_else(|| GeometryError::Degenerate("point at infinity in correspondence".into()))
}

/// Similarity moving the centroid to the origin with RMS distance √2.
fn hartley_transform(pts: &[Point2]) -> Result<Matrix3<f64>, GeometryError> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let ms = pts
        .iter()
        .map(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2))
        .sum::<f64>()
        / n;
    if ms <= 0.0 || !ms.is_finite() {
        return Err(GeometryError::Degenerate("all points coincide".into()));
    }
    let s = (2.0 / ms).sqrt();
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Hartley-normalized 8-point estimate of `F` from `(x1, x2)` pairs.
pub fn estimate_fundamental_8pt(
    pairs: &[(HomPoint2, HomPoint2)],
) -> Result<FundamentalMatrix, GeometryError> {
    if pairs.len() < 8 {
        return Err(GeometryError::Arity {
            needed: 8,
            got: pairs.len(),
        });
    }
    let p1: Vec<Point2> = pairs
        .iter()
        .map(|(a, _)| to_inhomogeneous(a))
        .collect::<Result<_, _>>()?;
    let p2: Vec<Point2> = pairs
        .iter()
        .map(|(_, b)| to_inhomogeneous(b))
        .collect::<Result<_, _>>()?;
    let t1 = hartley_transform(&p1)?;
    let t2 = hartley_transform(&p2)?;

    // pad to at least 9 rows so the full right singular basis is available
    let rows = pairs.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (u, v)) in p1.iter().zip(&p2).enumerate() {
        let x = t1 * Vector3::new(u.x, u.y, 1.0);
        let y = t2 * Vector3::new(v.x, v.y, 1.0);
        let row = [
            y.x * x.x,
            y.x * x.y,
            y.x,
            y.y * x.x,
            y.y * x.y,
            y.y,
            x.x,
            x.y,
            1.0,
        ];
        for (c, val) in row.iter().enumerate() {
            a[(i, c)] = *val;
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s_max = svd.singular_values[order[0]];
    let s_second_smallest = svd.singular_values[order[7]];
    if s_max <= 0.0 || s_second_smallest <= 1e-10 * s_max {
        return Err(GeometryError::Degenerate(
            "design matrix rank below 8".into(),
        ));
    }
    let f = vt.row(order[8]);
    let fn_ = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);
    let f_norm = FundamentalMatrix::from_matrix(fn_)?;
    FundamentalMatrix::from_matrix(t2.transpose() * f_norm.matrix() * t1)
}

/// First-order geometric (Sampson) distance in pixels.
pub fn sampson_distance(f: &FundamentalMatrix, x1: &Point2, x2: &Point2) -> f64 {
    let m = f.matrix();
    let a = Vector3::new(x1.x, x1.y, 1.0);
    let b = Vector3::new(x2.x, x2.y, 1.0);
    let fa = m * a;
    let ftb = m.transpose() * b;
    let num = b.dot(&fa);
    let den = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    num.abs() / den.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub max_iters: usize,
    pub inlier_thresh: f64,
    /// Early-exit confidence for the adaptive iteration bound.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            inlier_thresh: 1.0,
            confidence: 0.999,
            seed: 0,
        }
    }
}

/// Minimum support, outside the minimal sample, for a RANSAC model to count.
pub const MIN_SUPPORT: usize = 8;
const SAMPLE_SIZE: usize = 8;

fn inlier_mask(f: &FundamentalMatrix, pts: &[(Point2, Point2)], thresh: f64) -> Vec<bool> {
    pts.iter()
        .map(|(a, b)| sampson_distance(f, a, b) <= thresh)
        .collect()
}

fn fit_subset(
    pts: &[(Point2, Point2)],
    keep: impl Iterator<Item = usize>,
) -> Result<FundamentalMatrix, GeometryError> {
    let pairs: Vec<(HomPoint2, HomPoint2)> = keep
        .map(|i| (HomPoint2::from(pts[i].0), HomPoint2::from(pts[i].1)))
        .collect();
    estimate_fundamental_8pt(&pairs)
}

/// RANSAC over minimal 8-point samples scored by Sampson distance; the best
/// model is refit on its consensus set. Deterministic for a given seed.
pub fn ransac_fundamental(
    pairs: &[(Point2, Point2)],
    params: &RansacParams,
) -> Result<(FundamentalMatrix, Vec<bool>), GeometryError> {
    if pairs.len() < SAMPLE_SIZE {
        return Err(GeometryError::Arity {
            needed: SAMPLE_SIZE,
            got: pairs.len(),
        });
    }
    if !(params.inlier_thresh > 0.0) {
        return Err(GeometryError::Parameter(
            "inlier threshold must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = pairs.len();
    let mut best: Option<(FundamentalMatrix, usize, usize)> = None; // (model, inliers, support)
    let mut limit = params.max_iters;
    let mut iter = 0;
    let mut fitted_any = false;
    while iter < limit {
        iter += 1;
        let idx = sample(&mut rng, n, SAMPLE_SIZE).into_vec();
        let Ok(model) = fit_subset(pairs, idx.iter().copied()) else {
            continue;
        };
        fitted_any = true;
        let mask = inlier_mask(&model, pairs, params.inlier_thresh);
        let count = mask.iter().filter(|&&m| m).count();
        let in_sample = idx.iter().filter(|&&i| mask[i]).count();
        let support = count - in_sample;
        if best.as_ref().map_or(true, |b| count > b.1) {
            best = Some((model, count, support));
            if support >= MIN_SUPPORT {
                let w = count as f64 / n as f64;
                let denom = (1.0 - w.powi(SAMPLE_SIZE as i32)).ln();
                if denom < 0.0 {
                    let needed = ((1.0 - params.confidence).ln() / denom).ceil();
                    if needed.is_finite() && needed >= 0.0 {
                        limit = limit.min(needed as usize);
                    }
                }
            }
        }
    }
    if !fitted_any {
        return Err(GeometryError::Degenerate(
            "every minimal sample was degenerate".into(),
        ));
    }
    let (mut model, count, support) = best.expect("fitted at least once");
    if support < MIN_SUPPORT {
        return Err(GeometryError::RobustFit {
            best: count,
            needed: SAMPLE_SIZE + MIN_SUPPORT,
        });
    }
    let mut mask = inlier_mask(&model, pairs, params.inlier_thresh);
    let mut count = mask.iter().filter(|&&m| m).count();
    for _ in 0..3 {
        let Ok(refit) = fit_subset(pairs, (0..n).filter(|&i| mask[i])) else {
            break;
        };
        let new_mask = inlier_mask(&refit, pairs, params.inlier_thresh);
        let new_count = new_mask.iter().filter(|&&m| m).count();
        if new_count < count {
            break;
        }
        let stable = new_mask == mask;
        model = refit;
        mask = new_mask;
        count = new_count;
        if stable {
            break;
        }
    }
    if count < SAMPLE_SIZE {
        return Err(GeometryError::RobustFit {
            best: count,
            needed: SAMPLE_SIZE,
        });
    }
    Ok((model, mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpipoleSide {
    /// Image 1: `F e1 = 0`.
    Left,
    /// Image 2: `Fᵀ e2 = 0`.
    Right,
}

/// Null vector of `F` (left) or `Fᵀ` (right), unit norm, largest-magnitude
/// component positive.
pub fn epipole(f: &FundamentalMatrix, side: EpipoleSide) -> HomPoint2 {
    let m = match side {
        EpipoleSide::Left => *f.matrix(),
        EpipoleSide::Right => f.matrix().transpose(),
    };
    // row and column equilibration; the null vector of R M D is D⁻¹ e
    let inv = |n: f64| if n > 0.0 { 1.0 / n } else { 1.0 };
    let d = Vector3::from_fn(|j, _| inv(m.column(j).norm()));
    let md = m * Matrix3::from_diagonal(&d);
    let r = Vector3::from_fn(|i, _| inv(md.row(i).norm()));
    let balanced = Matrix3::from_diagonal(&r) * md;
    let svd = balanced.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let i = argmin(svd.singular_values.as_slice());
    let v: Vector3<f64> = vt.row(i).transpose();
    let mut e = v.component_mul(&d);
    e /= e.norm();
    let big = e
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap();
    if big < 0.0 {
        e = -e;
    }
    HomPoint2(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferDirection {
    /// Point in image 1 → line in image 2 (`F x`).
    OneToTwo,
    /// Point in image 2 → line in image 1 (`Fᵀ x`).
    TwoToOne,
}

pub fn epipolar_line(
    f: &FundamentalMatrix,
    x: &HomPoint2,
    direction: TransferDirection,
) -> Result<HomLine2, GeometryError> {
    let l = match direction {
        TransferDirection::OneToTwo => f.matrix() * x.0,
        TransferDirection::TwoToOne => f.matrix().transpose() * x.0,
    };
    if l.norm() <= 1e-12 * x.0.norm() {
        return Err(GeometryError::Degenerate(
            "point coincides with the epipole".into(),
        ));
    }
    Ok(HomLine2(l))
}

/// Fixes the signs of both epipoles from known correspondences using the
/// oriented epipolar constraint `e2 × x2 ∼₊ F x1`. The returned pair is
/// additionally normalized so that `e1` has non-negative `w` (or, at
/// infinity, so that travelling away from it increases `x`).
///
/// Correspondences with a negative vote are treated as outliers; the sign
/// follows the majority.
pub fn signed_epipoles(
    f: &FundamentalMatrix,
    pairs: &[(Point2, Point2)],
) -> (HomPoint2, HomPoint2) {
    let e1 = epipole(f, EpipoleSide::Left).0;
    let mut e2 = epipole(f, EpipoleSide::Right).0;
    let vote: f64 = pairs
        .iter()
        .map(|(a, b)| {
            let x1 = Vector3::new(a.x, a.y, 1.0);
            let x2 = Vector3::new(b.x, b.y, 1.0);
            e2.cross(&x2).dot(&(f.matrix() * x1)).signum()
        })
        .sum();
    if vote < 0.0 {
        e2 = -e2;
    }
    // e1 follows the same rule with the roles of the views swapped
    let vote1: f64 = pairs
        .iter()
        .map(|(a, b)| {
            let x1 = Vector3::new(a.x, a.y, 1.0);
            let x2 = Vector3::new(b.x, b.y, 1.0);
            e1.cross(&x1).dot(&(f.matrix().transpose() * x2)).signum()
        })
        .sum();
    let mut e1 = if vote1 < 0.0 { -e1 } else { e1 };
    // global sign freedom: flip both together
    let flip = if HomPoint2(e1).is_at_infinity() {
        // moving away from e1 goes along -(e1.x, e1.y)
        -e1.x < 0.0 || (-e1.x == 0.0 && -e1.y < 0.0)
    } else {
        e1.z < 0.0
    };
    if flip {
        e1 = -e1;
        e2 = -e2;
    }
    (HomPoint2(e1), HomPoint2(e2))
}

/// Signed epipoles straight from a calibrated pose: `e1 = P1 C2`, `e2 = P2 C1`.
pub fn signed_epipoles_from_pose(cams: &ProjectiveCameraPair) -> (HomPoint2, HomPoint2) {
    let c1 = camera_center(&cams.p1);
    let c2 = camera_center(&cams.p2);
    let mut e1 = cams.p1 * c2;
    let mut e2 = cams.p2 * c1;
    let flip = if HomPoint2(e1).is_at_infinity() {
        -e1.x < 0.0 || (-e1.x == 0.0 && -e1.y < 0.0)
    } else {
        e1.z < 0.0
    };
    if flip {
        e1 = -e1;
        e2 = -e2;
    }
    (HomPoint2(e1 / e1.norm()), HomPoint2(e2 / e2.norm()))
}

/// Camera centre as the null vector of `P`, scaled to `w = 1` when finite.
pub fn camera_center(p: &Matrix3x4<f64>) -> Vector4<f64> {
    let m = p.fixed_view::<3, 3>(0, 0).into_owned();
    if let Some(mi) = m.try_inverse() {
        let c = -mi * p.column(3);
        Vector4::new(c.x, c.y, c.z, 1.0)
    } else {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 4>(0, 0).copy_from(p);
        let svd = a.svd(false, true);
        let vt = svd.v_t.unwrap();
        vt.row(argmin(svd.singular_values.as_slice())).transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulated {
    pub point: Vector3<f64>,
    pub depth1: f64,
    pub depth2: f64,
}

/// Depth of `X` (homogeneous) in camera `P`; sign-correct for any `P = [M | p4]`.
fn point_depth(p: &Matrix3x4<f64>, x: &Vector4<f64>) -> f64 {
    let m = p.fixed_view::<3, 3>(0, 0);
    let w = (p * x).z;
    let m3 = m.row(2).norm();
    m.determinant().signum() * w / (x.w * m3)
}

/// Linear (DLT) triangulation from two projections.
pub fn triangulate(
    p1: &Matrix3x4<f64>,
    p2: &Matrix3x4<f64>,
    x1: &HomPoint2,
    x2: &HomPoint2,
) -> Result<Triangulated, GeometryError> {
    let a = x1
        .to_point()
        .ok_or_else(|| GeometryError::Triangulation("x1 at infinity".into()))?;
    let b = x2
        .to_point()
        .ok_or_else(|| GeometryError::Triangulation("x2 at infinity".into()))?;
    let rows = [
        p1.row(2) * a.x - p1.row(0),
        p1.row(2) * a.y - p1.row(1),
        p2.row(2) * b.x - p2.row(0),
        p2.row(2) * b.y - p2.row(1),
    ];
    let mut m = Matrix4::zeros();
    for (i, r) in rows.iter().enumerate() {
        let norm = r.norm();
        let r: RowVector4<f64> = if norm > 0.0 { r / norm } else { *r };
        m.set_row(i, &r);
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    if svd.singular_values[order[2]] <= 1e-8 * svd.singular_values[order[0]] {
        return Err(GeometryError::Triangulation(
            "rays are degenerate (point on the baseline)".into(),
        ));
    }
    let x: Vector4<f64> = vt.row(order[3]).transpose();
    if x.w.abs() <= 1e-12 * x.norm() {
        return Err(GeometryError::Triangulation(
            "parallel rays (point at infinity)".into(),
        ));
    }
    let point = Vector3::new(x.x / x.w, x.y / x.w, x.z / x.w);
    Ok(Triangulated {
        point,
        depth1: point_depth(p1, &x),
        depth2: point_depth(p2, &x),
    })
}

/// Symmetric epipolar distance used to sanity-check a sample pair.
fn symmetric_epipolar_distance(f: &FundamentalMatrix, x1: &Point2, x2: &Point2) -> f64 {
    let a = HomPoint2::from(*x1);
    let b = HomPoint2::from(*x2);
    let l2 = HomLine2(f.matrix() * a.0);
    let l1 = HomLine2(f.matrix().transpose() * b.0);
    l2.distance(x2).max(l1.distance(x1))
}

/// Maximum epipolar distance for the cheirality sample pair.
pub const DECOMPOSE_MAX_EPIPOLAR_PX: f64 = 10.0;

/// Recovers `(R, t)` from `F` and intrinsics, resolving the four-fold
/// ambiguity by triangulating `sample` and requiring positive depth in both
/// cameras.
pub fn decompose_essential(
    f: &FundamentalMatrix,
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
    sample: (&HomPoint2, &HomPoint2),
) -> Result<RelativePose, GeometryError> {
    let (x1, x2) = (
        sample
            .0
            .to_point()
            .ok_or_else(|| GeometryError::Decomposition("sample at infinity".into()))?,
        sample
            .1
            .to_point()
            .ok_or_else(|| GeometryError::Decomposition("sample at infinity".into()))?,
    );
    let d = symmetric_epipolar_distance(f, &x1, &x2);
    if !(d <= DECOMPOSE_MAX_EPIPOLAR_PX) {
        return Err(GeometryError::Decomposition(format!(
            "sample pair is {d:.2} px off its epipolar line"
        )));
    }
    let e = k2.matrix().transpose() * f.matrix() * k1.matrix();
    let svd = e.svd(true, true);
    let (mut u, mut vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    // sort singular vectors descending so the null direction is last
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u_sorted = Matrix3::from_columns(&[u.column(order[0]), u.column(order[1]), u.column(order[2])]);
    let vt_sorted = Matrix3::from_rows(&[vt.row(order[0]), vt.row(order[1]), vt.row(order[2])]);
    u = u_sorted;
    vt = vt_sorted;
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if vt.determinant() < 0.0 {
        vt.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t: Vector3<f64> = u.column(2).into_owned();
    let r_a = u * w * vt;
    let r_b = u * w.transpose() * vt;
    let candidates = [(r_a, t), (r_a, -t), (r_b, t), (r_b, -t)];

    let mut best: Option<(RelativePose, f64)> = None;
    for (r, t) in candidates {
        let pose = RelativePose::new(r, t)?;
        let cams = ProjectiveCameraPair::calibrated(k1, k2, &pose);
        let Ok(tri) = triangulate(&cams.p1, &cams.p2, sample.0, sample.1) else {
            continue;
        };
        let margin = tri.depth1.min(tri.depth2);
        if margin > 0.0 && best.as_ref().map_or(true, |b| margin > b.1) {
            best = Some((pose, margin));
        }
    }
    best.map(|b| b.0).ok_or_else(|| {
        GeometryError::Decomposition("no candidate places the sample in front of both cameras".into())
    })
}

/// Plane-induced homography, `x2 ∼ H x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn transfer(&self, p: &Point2) -> Option<Point2> {
        HomPoint2(self.0 * Vector3::new(p.x, p.y, 1.0)).to_point()
    }

    /// Symmetric transfer error in pixels (worse of the two directions).
    pub fn transfer_error(&self, x1: &Point2, x2: &Point2) -> f64 {
        let fwd = self.transfer(x1).map_or(f64::INFINITY, |p| p.dist(x2));
        let bwd = self
            .0
            .try_inverse()
            .and_then(|hi| Homography(hi).transfer(x2))
            .map_or(f64::INFINITY, |p| p.dist(x1));
        fwd.max(bwd)
    }
}

/// Hartley-normalized DLT estimate of `H` from at least 4 pairs.
pub fn estimate_homography(pairs: &[(Point2, Point2)]) -> Result<Homography, GeometryError> {
    if pairs.len() < 4 {
        return Err(GeometryError::Arity { needed: 4, got: pairs.len() });
    }
    let p1: Vec<Point2> = pairs.iter().map(|p| p.0).collect();
    let p2: Vec<Point2> = pairs.iter().map(|p| p.1).collect();
    let t1 = hartley_transform(&p1)?;
    let t2 = hartley_transform(&p2)?;
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (u, v)) in p1.iter().zip(&p2).enumerate() {
        let x = t1 * Vector3::new(u.x, u.y, 1.0);
        let y = t2 * Vector3::new(v.x, v.y, 1.0);
        let r0 = [0.0, 0.0, 0.0, -x.x, -x.y, -1.0, y.y * x.x, y.y * x.y, y.y];
        let r1 = [x.x, x.y, 1.0, 0.0, 0.0, 0.0, -y.x * x.x, -y.x * x.y, -y.x];
        for c in 0..9 {
            a[(2 * i, c)] = r0[c];
            a[(2 * i + 1, c)] = r1[c];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    if svd.singular_values[order[7]] <= 1e-10 * svd.singular_values[order[0]] {
        return Err(GeometryError::Degenerate("homography design matrix rank below 8".into()));
    }
    let h = vt.row(order[8]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t2i = t2.try_inverse().expect("similarity");
    let m = t2i * hn * t1;
    let n = m.norm();
    if !(n > 0.0 && n.is_finite()) || m.determinant().abs() <= 1e-12 * n.powi(3) {
        return Err(GeometryError::Degenerate("singular homography".into()));
    }
    Ok(Homography(m / n))
}

fn homography_mask(h: &Homography, pts: &[(Point2, Point2)], thresh: f64) -> Vec<bool> {
    pts.iter().map(|(a, b)| h.transfer_error(a, b) <= thresh).collect()
}

/// RANSAC over 4-point samples scored by symmetric transfer error, with the
/// same support rule and refit loop as [`ransac_fundamental`].
pub fn ransac_homography(
    pairs: &[(Point2, Point2)],
    params: &RansacParams,
) -> Result<(Homography, Vec<bool>), GeometryError> {
    const H_SAMPLE: usize = 4;
    if pairs.len() < H_SAMPLE {
        return Err(GeometryError::Arity { needed: H_SAMPLE, got: pairs.len() });
    }
    if !(params.inlier_thresh > 0.0) {
        return Err(GeometryError::Parameter("inlier threshold must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = pairs.len();
    let mut best: Option<(Homography, usize, usize)> = None;
    let mut limit = params.max_iters;
    let mut iter = 0;
    while iter < limit {
        iter += 1;
        let idx = sample(&mut rng, n, H_SAMPLE).into_vec();
        let subset: Vec<_> = idx.iter().map(|&i| pairs[i]).collect();
        let Ok(model) = estimate_homography(&subset) else {
            continue;
        };
        let mask = homography_mask(&model, pairs, params.inlier_thresh);
        let count = mask.iter().filter(|&&m| m).count();
        let support = count - idx.iter().filter(|&&i| mask[i]).count();
        if best.as_ref().map_or(true, |b| count > b.1) {
            best = Some((model, count, support));
            if support >= MIN_SUPPORT {
                let w = count as f64 / n as f64;
                let denom = (1.0 - w.powi(H_SAMPLE as i32)).ln();
                if denom < 0.0 {
                    let needed = ((1.0 - params.confidence).ln() / denom).ceil();
                    if needed.is_finite() && needed >= 0.0 {
                        limit = limit.min(needed as usize);
                    }
                }
            }
        }
    }
    let Some((mut model, count, support)) = best else {
        return Err(GeometryError::Degenerate("every minimal sample was degenerate".into()));
    };
    if support < MIN_SUPPORT {
        return Err(GeometryError::RobustFit { best: count, needed: H_SAMPLE + MIN_SUPPORT });
    }
    let mut mask = homography_mask(&model, pairs, params.inlier_thresh);
    let mut count = mask.iter().filter(|&&m| m).count();
    for _ in 0..3 {
        let subset: Vec<_> = (0..n).filter(|&i| mask[i]).map(|i| pairs[i]).collect();
        let Ok(refit) = estimate_homography(&subset) else {
            break;
        };
        let new_mask = homography_mask(&refit, pairs, params.inlier_thresh);
        let new_count = new_mask.iter().filter(|&&m| m).count();
        if new_count < count {
            break;
        }
        let stable = new_mask == mask;
        model = refit;
        mask = new_mask;
        count = new_count;
        if stable {
            break;
        }
    }
    Ok((model, mask))
}

/// One physically valid reading of a calibrated homography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarMotion {
    pub pose: RelativePose,
    /// Plane normal in camera-1 coordinates, scaled so that
    /// `K2⁻¹ H K1 ∼ R + t nᵀ` with the unit-length `t` of `pose`.
    pub normal: Vector3<f64>,
    /// Number of pairs in front of both cameras.
    pub support: usize,
}

/// Decomposes `K2⁻¹ H K1 ∼ R + t nᵀ` into its (up to four) motions and
/// keeps those placing most of `pairs` in front of both cameras, best first.
pub fn decompose_homography(
    h: &Homography,
    k1: &CameraIntrinsics,
    k2: &CameraIntrinsics,
    pairs: &[(Point2, Point2)],
) -> Result<Vec<PlanarMotion>, GeometryError> {
    let k1m = k1.matrix();
    let k1i = k1m.try_inverse().expect("valid intrinsics");
    let k2i = k2.matrix().try_inverse().expect("valid intrinsics");
    let rays: Vec<(Vector3<f64>, Vector3<f64>)> = pairs
        .iter()
        .map(|(a, b)| (k1i * Vector3::new(a.x, a.y, 1.0), k2i * Vector3::new(b.x, b.y, 1.0)))
        .collect();
    let mut hc = k2i * h.0 * k1m;
    // positive depth ratio for the majority
    let vote: f64 = rays.iter().map(|(m1, m2)| m2.dot(&(hc * m1)).signum()).sum();
    if vote < 0.0 {
        hc = -hc;
    }
    let s = hc.svd(false, false).singular_values;
    let mut sv: Vec<f64> = s.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    hc /= sv[1];

    let eig = (hc.transpose() * hc).symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l1, l3) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[2]]);
    if l1 - l3 < 1e-9 {
        return Err(GeometryError::Decomposition("homography is a pure rotation".into()));
    }
    let mut v = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]),
        eig.eigenvectors.column(order[1]),
        eig.eigenvectors.column(order[2]),
    ]);
    if v.determinant() < 0.0 {
        v = -v;
    }
    let (v1, v2, v3) = (v.column(0).into_owned(), v.column(1).into_owned(), v.column(2).into_owned());
    let a = (1.0 - l3).max(0.0).sqrt();
    let b = (l1 - 1.0).max(0.0).sqrt();
    let c = (l1 - l3).sqrt();
    let u1 = (a * v1 + b * v3) / c;
    let u2 = (a * v1 - b * v3) / c;

    let mut out = Vec::new();
    for u in [u1, u2] {
        let um = Matrix3::from_columns(&[v2, u, v2.cross(&u)]);
        let (hv2, hu) = (hc * v2, hc * u);
        let wm = Matrix3::from_columns(&[hv2, hu, hv2.cross(&hu)]);
        let r = wm * um.transpose();
        let nrm = v2.cross(&u);
        let t = (hc - r) * nrm;
        for sign in [1.0, -1.0] {
            let (n, t) = (sign * nrm, sign * t);
            let Ok(pose) = RelativePose::new(r, t) else {
                continue;
            };
            let support = rays
                .iter()
                .filter(|(m1, _)| {
                    let inv_depth = n.dot(m1);
                    inv_depth > 0.0 && (r * (m1 / inv_depth) + t).z > 0.0
                })
                .count();
            let tn = t.norm();
            out.push(PlanarMotion { pose, normal: n * tn, support });
        }
    }
    let need = pairs.len() / 2;
    out.retain(|m| m.support > need);
    out.sort_by(|a, b| b.support.cmp(&a.support));
    if out.is_empty() {
        return Err(GeometryError::Decomposition("no motion places the pairs in front of both cameras".into()));
    }
    Ok(out)
}
