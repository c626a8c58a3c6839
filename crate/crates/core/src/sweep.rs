//! Epipolar-line sweep: the pencil of lines through the image-1 epipole,
//! their corresponding lines in image 2, clipping, orientation and sampling.
//!
//! Orientation uses signed epipoles (see [`crate::epigeo::signed_epipoles`]).
//! The homogeneous sign of an epipole records on which side of the other
//! camera's image plane the camera centre lies. Walking away from the
//! signed `e1` along an image-1 line corresponds to walking towards the
//! signed `e2` along the matching image-2 line, so both sampled sequences
//! run in the same scene order.

use nalgebra::{Matrix3, Vector3};

use crate::epigeo::{FundamentalMatrix, HomLine2, HomPoint2};
use crate::imgio::{GrayImage, Point2};

/// Sampling domain of an image: `[0, width-1] × [0, height-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn of(img: &GrayImage) -> Self {
        Self::with_size(img.width(), img.height())
    }

    pub fn with_size(width: usize, height: usize) -> Self {
        Self {
            max_x: width.saturating_sub(1) as f64,
            max_y: height.saturating_sub(1) as f64,
        }
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(0.0, 0.0),
            Point2::new(self.max_x, 0.0),
            Point2::new(0.0, self.max_y),
            Point2::new(self.max_x, self.max_y),
        ]
    }

    pub fn contains(&self, p: &Point2, tol: f64) -> bool {
        p.x >= -tol && p.y >= -tol && p.x <= self.max_x + tol && p.y <= self.max_y + tol
    }

    fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(0.0, self.max_x), p.y.clamp(0.0, self.max_y))
    }
}

/// Oriented segment from `entry` to `exit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub entry: Point2,
    pub exit: Point2,
}

impl Segment {
    pub fn new(entry: Point2, exit: Point2) -> Self {
        Self { entry, exit }
    }

    pub fn length(&self) -> f64 {
        self.entry.dist(&self.exit)
    }

    /// Unit direction (zero for a degenerate segment).
    pub fn direction(&self) -> (f64, f64) {
        let len = self.length();
        if len == 0.0 {
            return (0.0, 0.0);
        }
        (
            (self.exit.x - self.entry.x) / len,
            (self.exit.y - self.entry.y) / len,
        )
    }

    pub fn midpoint(&self) -> Point2 {
        self.entry.lerp(&self.exit, 0.5)
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.exit, self.entry)
    }
}

/// One line of the sweep in image 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParam {
    /// Ray from a finite epipole at this angle (radians).
    Angle(f64),
    /// Parallel line at this signed offset along the pencil normal (pixels).
    Offset(f64),
}

/// The family of image-1 lines through the epipole that meet the image.
#[derive(Debug, Clone, PartialEq)]
pub enum Pencil {
    Radial { center: Point2, angles: Vec<f64> },
    Parallel {
        /// Unit direction shared by all lines.
        direction: (f64, f64),
        offsets: Vec<f64>,
    },
}

impl Pencil {
    pub fn len(&self) -> usize {
        match self {
            Pencil::Radial { angles, .. } => angles.len(),
            Pencil::Parallel { offsets, .. } => offsets.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param(&self, i: usize) -> SweepParam {
        match self {
            Pencil::Radial { angles, .. } => SweepParam::Angle(angles[i]),
            Pencil::Parallel { offsets, .. } => SweepParam::Offset(offsets[i]),
        }
    }

    /// Origin and unit direction of line `i`. For radial pencils the origin
    /// is the epipole and only the forward half-line belongs to the sweep.
    pub fn line(&self, i: usize) -> (Point2, (f64, f64)) {
        match self {
            Pencil::Radial { center, angles } => (*center, (angles[i].cos(), angles[i].sin())),
            Pencil::Parallel { direction, offsets } => {
                let n = (-direction.1, direction.0);
                (Point2::new(n.0 * offsets[i], n.1 * offsets[i]), *direction)
            }
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut a = a % tau;
    if a > std::f64::consts::PI {
        a -= tau;
    } else if a <= -std::f64::consts::PI {
        a += tau;
    }
    a
}

/// Lines through `e` covering `rect`. Finite epipoles give rays with angular
/// step `1 / R_max` (`R_max` = distance to the farthest corner); an epipole at
/// infinity gives parallel lines 1 px apart.
pub fn pencil(e: &HomPoint2, rect: &Rect) -> Pencil {
    let Some(c) = e.to_point() else {
        let n = e.0.x.hypot(e.0.y);
        let dir = (e.0.x / n, e.0.y / n);
        let normal = (-dir.1, dir.0);
        let proj: Vec<f64> = rect
            .corners()
            .iter()
            .map(|p| normal.0 * p.x + normal.1 * p.y)
            .collect();
        let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let count = ((hi - lo) + 1e-9).floor() as usize + 1;
        let pad = ((hi - lo) - (count - 1) as f64) / 2.0;
        let offsets = (0..count).map(|k| lo + pad + k as f64).collect();
        return Pencil::Parallel {
            direction: dir,
            offsets,
        };
    };
    let r_max = rect
        .corners()
        .iter()
        .map(|p| p.dist(&c))
        .fold(0.0, f64::max)
        .max(1.0);
    if rect.contains(&c, 0.0) {
        let count = (std::f64::consts::TAU * r_max).ceil() as usize;
        let step = std::f64::consts::TAU / count as f64;
        return Pencil::Radial {
            center: c,
            angles: (0..count).map(|k| k as f64 * step).collect(),
        };
    }
    let mid = Point2::new(rect.max_x / 2.0, rect.max_y / 2.0);
    let reference = (mid.y - c.y).atan2(mid.x - c.x);
    let deltas: Vec<f64> = rect
        .corners()
        .iter()
        .map(|p| wrap_angle((p.y - c.y).atan2(p.x - c.x) - reference))
        .collect();
    let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let step = 1.0 / r_max;
    let count = ((hi - lo) / step).floor() as usize + 1;
    let pad = ((hi - lo) - (count - 1) as f64 * step) / 2.0;
    Pencil::Radial {
        center: c,
        angles: (0..count)
            .map(|k| reference + lo + pad + k as f64 * step)
            .collect(),
    }
}

/// Parameter interval `[t0, t1]` of `origin + t·dir` inside `rect`.
fn clip_param(origin: Point2, dir: (f64, f64), rect: &Rect) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (o, d, hi) in [(origin.x, dir.0, rect.max_x), (origin.y, dir.1, rect.max_y)] {
        if d.abs() < 1e-15 {
            if o < -1e-9 || o > hi + 1e-9 {
                return None;
            }
        } else {
            let a = (0.0 - o) / d;
            let b = (hi - o) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t1 - t0 > 1e-9).then_some((t0, t1))
}

fn point_at(origin: Point2, dir: (f64, f64), t: f64, rect: &Rect) -> Point2 {
    rect.clamp(Point2::new(origin.x + t * dir.0, origin.y + t * dir.1))
}

/// Chord of `l` inside `rect`, ordered by increasing x (then y). `None` when
/// the line misses the rectangle or only touches it at a single point.
pub fn clip_line_to_rect(l: &HomLine2, rect: &Rect) -> Option<Segment> {
    let ln = l.normalized()?;
    let (a, b, c) = (ln.0.x, ln.0.y, ln.0.z);
    // closest point on the line to the rectangle centre
    let mid = Point2::new(rect.max_x / 2.0, rect.max_y / 2.0);
    let r = a * mid.x + b * mid.y + c;
    let origin = Point2::new(mid.x - r * a, mid.y - r * b);
    let dir = (-b, a);
    let (t0, t1) = clip_param(origin, dir, rect)?;
    let p = point_at(origin, dir, t0, rect);
    let q = point_at(origin, dir, t1, rect);
    let ordered = (p.x, p.y) <= (q.x, q.y);
    Some(if ordered {
        Segment::new(p, q)
    } else {
        Segment::new(q, p)
    })
}

/// Epipolar geometry with a consistent sign convention for orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedGeometry {
    pub f: FundamentalMatrix,
    /// `F` up to a positive scale such that `(e2 × x2) · (F x1) > 0` for
    /// true correspondences.
    pub f_oriented: Matrix3<f64>,
    pub e1: HomPoint2,
    pub e2: HomPoint2,
}

impl OrientedGeometry {
    /// Builds from `F` and signed epipoles, choosing the sign of `F` with the
    /// given correspondences (majority vote).
    pub fn new(f: FundamentalMatrix, e1: HomPoint2, e2: HomPoint2, pairs: &[(Point2, Point2)]) -> Self {
        let m = *f.matrix();
        let vote: f64 = pairs
            .iter()
            .map(|(a, b)| {
                let x1 = Vector3::new(a.x, a.y, 1.0);
                let x2 = Vector3::new(b.x, b.y, 1.0);
                e2.0.cross(&x2).dot(&(m * x1)).signum()
            })
            .sum();
        let f_oriented = if vote < 0.0 { -m } else { m };
        Self {
            f,
            f_oriented,
            e1,
            e2,
        }
    }

    /// Side test for image 2: positive on the half of an epipolar line that
    /// can hold the correspondence of `x1`.
    fn side(&self, l2: &Vector3<f64>, x2: &Point2) -> f64 {
        self.e2.0.cross(&Vector3::new(x2.x, x2.y, 1.0)).dot(l2)
    }
}

/// Matched pair of epipolar lines, both clipped and consistently oriented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinePair {
    pub index: usize,
    pub param: SweepParam,
    pub l1: HomLine2,
    pub l2: HomLine2,
    pub seg1: Segment,
    pub seg2: Segment,
}

/// Orients `seg1` away from the signed epipole `e1` and `seg2` towards the
/// signed epipole `e2`. With `e1` normalized to `w ≥ 0` the image-1 segment
/// runs away from its epipole; the image-2 segment follows whichever direction
/// keeps scene order. When `e1` is at infinity, image 1 runs by increasing x
/// (ties by increasing y).
pub fn orient_pair(seg1: Segment, seg2: Segment, e1: &HomPoint2, e2: &HomPoint2) -> (Segment, Segment) {
    let m1 = seg1.midpoint();
    let want1 = (-(e1.0.x - e1.0.z * m1.x), -(e1.0.y - e1.0.z * m1.y));
    let m2 = seg2.midpoint();
    let want2 = (e2.0.x - e2.0.z * m2.x, e2.0.y - e2.0.z * m2.y);
    let orient = |s: Segment, want: (f64, f64)| {
        let d = (s.exit.x - s.entry.x, s.exit.y - s.entry.y);
        if d.0 * want.0 + d.1 * want.1 < 0.0 {
            s.reversed()
        } else {
            s
        }
    };
    let (a, b) = (orient(seg1, want1), orient(seg2, want2));
    // an ideal e1 fixes only the relative direction; use increasing x (then y)
    // in image 1 and keep image 2 consistent with it
    if e1.is_at_infinity() && (a.exit.x, a.exit.y) < (a.entry.x, a.entry.y) {
        (a.reversed(), b.reversed())
    } else {
        (a, b)
    }
}

/// Builds line pair `index` of the pencil. `exclusion` is the radius kept
/// clear around a finite epipole.
pub fn corresponding_pair(
    geo: &OrientedGeometry,
    pencil: &Pencil,
    index: usize,
    rect1: &Rect,
    rect2: &Rect,
    exclusion: f64,
) -> Option<LinePair> {
    let (origin, dir) = pencil.line(index);
    let (mut t0, t1) = clip_param(origin, dir, rect1)?;
    if matches!(pencil, Pencil::Radial { .. }) {
        t0 = t0.max(exclusion);
        if t1 - t0 <= 1e-9 {
            return None;
        }
    }
    let seg1 = Segment::new(
        point_at(origin, dir, t0, rect1),
        point_at(origin, dir, t1, rect1),
    );
    let l1 = HomLine2::through(
        &HomPoint2::from(origin),
        &HomPoint2::new(origin.x + dir.0, origin.y + dir.1, 1.0),
    );
    let x1 = seg1.midpoint();
    let l2v = geo.f_oriented * Vector3::new(x1.x, x1.y, 1.0);
    let l2 = HomLine2(l2v);
    let chord = clip_line_to_rect(&l2, rect2)?;

    // keep the half of the chord compatible with the oriented constraint
    let sa = geo.side(&l2v, &chord.entry);
    let sb = geo.side(&l2v, &chord.exit);
    let seg2 = if sa > 0.0 && sb > 0.0 {
        chord
    } else if sa <= 0.0 && sb <= 0.0 {
        return None;
    } else {
        let tau = sa / (sa - sb);
        let cut = chord.entry.lerp(&chord.exit, tau);
        let (keep_from, keep_to) = if sa > 0.0 {
            (chord.entry, cut)
        } else {
            (chord.exit, cut)
        };
        // back off the exclusion radius from the epipole
        let len = keep_from.dist(&keep_to);
        if len <= exclusion + 1e-9 {
            return None;
        }
        let stop = keep_from.lerp(&keep_to, (len - exclusion) / len);
        Segment::new(keep_from, stop)
    };
    if seg2.length() <= 1e-9 {
        return None;
    }
    let (seg1, seg2) = orient_pair(seg1, seg2, &geo.e1, &geo.e2);
    Some(LinePair {
        index,
        param: pencil.param(index),
        l1,
        l2,
        seg1,
        seg2,
    })
}

/// Point and intensity sequence along an oriented segment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledLine {
    pub points: Vec<Point2>,
    pub intensities: Vec<f64>,
}

impl SampledLine {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples `entry + k·spacing·dir` for `k = 0..=⌊len/spacing⌋` with bilinear
/// interpolation.
pub fn sample_line(img: &GrayImage, seg: &Segment, spacing: f64) -> SampledLine {
    assert!(spacing > 0.0, "spacing must be positive");
    let rect = Rect::of(img);
    let len = seg.length();
    let dir = seg.direction();
    let count = (len / spacing + 1e-9).floor() as usize + 1;
    let mut out = SampledLine {
        points: Vec::with_capacity(count),
        intensities: Vec::with_capacity(count),
    };
    for k in 0..count {
        let s = k as f64 * spacing;
        let p = rect.clamp(Point2::new(
            seg.entry.x + s * dir.0,
            seg.entry.y + s * dir.1,
        ));
        out.intensities.push(img.sample_unchecked(p.x, p.y));
        out.points.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epigeo::{fundamental_from_pose, signed_epipoles_from_pose, CameraIntrinsics, ProjectiveCameraPair, RelativePose};
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn ray_hits(c: Point2, angle: f64, rect: &Rect) -> bool {
        clip_param(c, (angle.cos(), angle.sin()), rect).map_or(false, |(_, t1)| t1 > 0.0)
    }

    #[test]
    fn pencil_centered_epipole_is_full_circle() {
        let rect = Rect::with_size(101, 81);
        let c = Point2::new(50.0, 40.0);
        let p = pencil(&HomPoint2::from(c), &rect);
        let r_max = 50f64.hypot(40.0);
        assert_eq!(p.len(), (std::f64::consts::TAU * r_max).ceil() as usize);
    }

    #[test]
    fn pencil_far_epipole_span_and_coverage() {
        let rect = Rect::with_size(100, 100);
        let e = HomPoint2::new(-1e6, 0.0, 1.0);
        let p = pencil(&e, &rect);
        let Pencil::Radial { center, angles } = &p else { panic!("expected radial") };
        let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo - 99.0 / 1e6).abs() < 2e-6, "span {}", hi - lo);
        assert!(angles.iter().all(|&a| ray_hits(*center, a, &rect)));
        // brute-force oracle: rays hitting the rectangle lie within the span
        let fine = 20_000;
        for k in 0..fine {
            let a = -5e-4 + 1e-3 * k as f64 / fine as f64;
            if ray_hits(*center, a, &rect) {
                assert!(a >= lo - 2e-6 && a <= hi + 2e-6);
            }
        }
    }

    #[test]
    fn pencil_at_infinity_is_parallel() {
        let rect = Rect::with_size(100, 100);
        let p = pencil(&HomPoint2::new(1.0, 0.0, 0.0), &rect);
        assert_eq!(p.len(), 100);
        assert!(matches!(p, Pencil::Parallel { .. }));
    }

    #[test]
    fn pencil_sweep_reaches_every_boundary_pixel() {
        let rect = Rect::with_size(120, 90);
        for e in [
            HomPoint2::new(-300.0, 45.0, 1.0),
            HomPoint2::new(60.0, 45.0, 1.0),
            HomPoint2::new(900.0, -400.0, 1.0),
        ] {
            let p = pencil(&e, &rect);
            let boundary = (0..120)
                .flat_map(|x| [Point2::new(x as f64, 0.0), Point2::new(x as f64, 89.0)])
                .chain((0..90).flat_map(|y| [Point2::new(0.0, y as f64), Point2::new(119.0, y as f64)]));
            for q in boundary {
                let best = (0..p.len())
                    .map(|i| {
                        let (o, d) = p.line(i);
                        let v = (q.x - o.x, q.y - o.y);
                        let along = v.0 * d.0 + v.1 * d.1;
                        if along < 0.0 { f64::INFINITY } else { (v.0 * d.1 - v.1 * d.0).abs() }
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 1.0, "pixel {q:?} is {best} px from the sweep");
            }
        }
    }

    #[test]
    fn clip_examples() {
        let rect = Rect::with_size(100, 100);
        let seg = clip_line_to_rect(&HomLine2(Vector3::new(0.0, 1.0, -50.0)), &rect).unwrap();
        assert_eq!(seg.entry, Point2::new(0.0, 50.0));
        assert_eq!(seg.exit, Point2::new(99.0, 50.0));
        assert!(clip_line_to_rect(&HomLine2(Vector3::new(0.0, 1.0, 10.0)), &rect).is_none());
        // x + y = 0 touches only the corner (0, 0)
        assert!(clip_line_to_rect(&HomLine2(Vector3::new(1.0, 1.0, 0.0)), &rect).is_none());
    }

    #[test]
    fn orientation_conventions() {
        let left = HomPoint2::new(-500.0, 300.0, 1.0);
        // camera 1 behind camera 2: image-2 epipole carries negative w
        let left_behind = HomPoint2::new(500.0, -300.0, -1.0);
        let s1 = Segment::new(Point2::new(90.0, 10.0), Point2::new(0.0, 12.0));
        let s2 = Segment::new(Point2::new(80.0, 20.0), Point2::new(5.0, 21.0));
        let (a, b) = orient_pair(s1, s2, &left, &left_behind);
        assert!(a.exit.x > a.entry.x && b.exit.x > b.entry.x);

        // rectified geometry: signed epipoles at infinity in opposite directions
        for (e1, e2) in [((-1.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (-1.0, 0.0))] {
            let e1 = HomPoint2::new(e1.0, e1.1, 0.0);
            let e2 = HomPoint2::new(e2.0, e2.1, 0.0);
            let (a, b) = orient_pair(s1, s2, &e1, &e2);
            assert!(a.exit.x > a.entry.x && b.exit.x > b.entry.x);
        }
    }

    #[test]
    fn sample_line_counts_and_values() {
        let img = GrayImage::from_fn(20, 20, |x, y| 3.0 * x as f64 + 2.0 * y as f64).unwrap();
        let seg = Segment::new(Point2::new(2.0, 5.0), Point2::new(12.0, 5.0));
        assert_eq!(sample_line(&img, &seg, 1.0).len(), 11);
        let flat = GrayImage::filled(20, 20, 42.0).unwrap();
        assert!(sample_line(&flat, &seg, 1.0).intensities.iter().all(|&v| v == 42.0));
        let diag = Segment::new(Point2::new(1.0, 2.0), Point2::new(15.0, 17.0));
        let s = sample_line(&img, &diag, 1.0);
        let step = s.intensities[1] - s.intensities[0];
        for (k, v) in s.intensities.iter().enumerate() {
            assert!((v - (s.intensities[0] + k as f64 * step)).abs() < 1e-9);
        }
    }

    fn geometry() -> (OrientedGeometry, ProjectiveCameraPair, CameraIntrinsics, Matrix3<f64>, Vector3<f64>) {
        let k = CameraIntrinsics::new(500.0, 500.0, 160.0, 120.0).unwrap();
        let r = *Rotation3::from_euler_angles(0.01, -0.06, 0.0).matrix();
        let c2 = Vector3::new(0.5, 0.02, 0.05);
        let t = -r * c2;
        let f = fundamental_from_pose(&k, &k, &r, &t).unwrap();
        let cams = ProjectiveCameraPair::calibrated(&k, &k, &RelativePose::new(r, t).unwrap());
        let (e1, e2) = signed_epipoles_from_pose(&cams);
        (OrientedGeometry::new(f, e1, e2, &[]), cams, k, r, t)
    }

    #[test]
    fn produced_pairs_respect_epipolar_geometry() {
        let (mut geo, _, k, r, t) = geometry();
        // orient F's sign with a real correspondence
        let x = Vector3::new(0.1, 0.1, 4.0);
        let proj = |m: &Matrix3<f64>, v: Vector3<f64>| {
            let p = k.matrix() * (m * x + v);
            Point2::new(p.x / p.z, p.y / p.z)
        };
        let pair = (proj(&Matrix3::identity(), Vector3::zeros()), proj(&r, t));
        geo = OrientedGeometry::new(geo.f, geo.e1, geo.e2, &[pair]);
        let rect = Rect::with_size(320, 240);
        let p = pencil(&geo.e1, &rect);
        let mut produced = 0;
        for i in 0..p.len() {
            let Some(lp) = corresponding_pair(&geo, &p, i, &rect, &rect, 3.0) else { continue };
            produced += 1;
            let l2n = lp.l2.0.normalize();
            assert!(l2n.dot(&geo.e2.0.normalize()).abs() < 1e-9);
            for q in [lp.seg1.entry, lp.seg1.exit] {
                assert!(lp.l1.distance(&q) < 1e-6);
                let other = HomLine2(geo.f.matrix() * HomPoint2::from(q).0);
                assert!(other.same_as(&lp.l2, 1e-6));
            }
            for q in [lp.seg2.entry, lp.seg2.exit] {
                assert!(lp.l2.distance(&q) < 1e-6);
            }
        }
        assert!(produced > 100);
    }

    #[test]
    fn ray_away_from_image_yields_none() {
        let (geo, ..) = geometry();
        let rect = Rect::with_size(320, 240);
        let Some(c) = geo.e1.to_point() else { return };
        let p = Pencil::Radial {
            center: c,
            angles: vec![((c.y - 120.0).atan2(c.x - 160.0))],
        };
        assert!(corresponding_pair(&geo, &p, 0, &rect, &rect, 3.0).is_none());
    }

    proptest! {
        #[test]
        fn samples_lie_on_segment_line(
            x0 in 0.0f64..60.0, y0 in 0.0f64..40.0, x1 in 0.0f64..60.0, y1 in 0.0f64..40.0,
        ) {
            let img = GrayImage::filled(61, 41, 1.0).unwrap();
            let seg = Segment::new(Point2::new(x0, y0), Point2::new(x1, y1));
            prop_assume!(seg.length() > 1.0);
            let l = HomLine2::through(&seg.entry.into(), &seg.exit.into());
            let s = sample_line(&img, &seg, 1.0);
            for (k, p) in s.points.iter().enumerate() {
                prop_assert!(l.distance(p) < 1e-6);
                if k > 0 {
                    prop_assert!((p.dist(&s.points[k - 1]) - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
