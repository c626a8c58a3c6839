//! Synthetic textured-plane scenes with exact ground truth, and the
//! precision/recall evaluation of dense matches against them.

use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::densematch::DenseMatch;
use crate::epigeo::{fundamental_from_pose, CameraIntrinsics, FundamentalMatrix, GeometryError, RelativePose};
use crate::imgio::{GrayImage, ImageError, Point2};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scene geometry: {0}")]
    Geometry(String),
    #[error(transparent)]
    Pose(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Procedural texture: overlapping flat discs and rectangles on a palette
/// of well separated gray levels, faint smooth noise, and a light blur.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Result<GrayImage, EvalError> {
    const LEVELS: [f64; 5] = [25.0, 75.0, 125.0, 175.0, 225.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![LEVELS[2]; width * height];
    let shapes = (width * height) / 250 + 1;
    let mut last = 2usize;
    for _ in 0..shapes {
        let mut level = rng.gen_range(0..LEVELS.len() - 1);
        if level >= last {
            level += 1;
        }
        last = level;
        let value = LEVELS[level] + rng.gen_range(-8.0..8.0);
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        // heavy-tailed sizes: many small shapes, a few large ones
        let r = 4.0 / rng.gen_range(0.12f64..1.0).powf(0.9);
        let disc = rng.gen_bool(0.5);
        let (rx, ry) = if disc { (r, r) } else { (r * rng.gen_range(0.5..1.5), r * rng.gen_range(0.5..1.5)) };
        let x0 = (cx - rx).floor().max(0.0) as usize;
        let x1 = ((cx + rx).ceil() as usize).min(width - 1);
        let y0 = (cy - ry).floor().max(0.0) as usize;
        let y1 = ((cy + ry).ceil() as usize).min(height - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if !disc || dx * dx + dy * dy <= r * r {
                    data[y * width + x] = value;
                }
            }
        }
    }
    // smooth low-amplitude value noise on a 6-texel grid
    let (gw, gh) = (width / 6 + 2, height / 6 + 2);
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-4.0..4.0)).collect();
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 / 6.0, y as f64 / 6.0);
            let (ix, iy) = (fx as usize, fy as usize);
            let (ax, ay) = (fx - ix as f64, fy - iy as f64);
            let g = |i: usize, j: usize| grid[j * gw + i];
            let n = (1.0 - ay) * ((1.0 - ax) * g(ix, iy) + ax * g(ix + 1, iy))
                + ay * ((1.0 - ax) * g(ix, iy + 1) + ax * g(ix + 1, iy + 1));
            data[y * width + x] += n;
        }
    }
    // 3×3 binomial blur
    let at = |d: &[f64], x: isize, y: isize| {
        d[(y.clamp(0, height as isize - 1) as usize) * width + x.clamp(0, width as isize - 1) as usize]
    };
    let k = [1.0, 2.0, 1.0];
    let blurred: Vec<f64> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            let mut s = 0.0;
            for (j, wy) in k.iter().enumerate() {
                for (l, wx) in k.iter().enumerate() {
                    s += wx * wy * at(&data, x + l as isize - 1, y + j as isize - 1);
                }
            }
            (s / 16.0).clamp(0.0, 255.0)
        })
        .collect();
    Ok(GrayImage::new(width, height, blurred)?)
}

/// Plane `normal · X = distance` in camera-1 coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub distance: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, distance: f64) -> Result<Self, EvalError> {
        let n = normal.norm();
        if !(n > 0.0) || !(distance > 0.0) {
            return Err(EvalError::Geometry("plane needs a nonzero normal and must face camera 1 (distance > 0)".into()));
        }
        Ok(Self { normal: normal / n, distance: distance / n })
    }
}

/// Textured plane, optionally limited to a rectangle `[u0, u1] × [v0, v1]`
/// of its in-plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub plane: Plane,
    pub texture: GrayImage,
    /// World units per texel.
    pub texel: f64,
    pub extent: Option<[f64; 4]>,
    origin: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
}

impl Surface {
    pub fn new(plane: Plane, texture: GrayImage, texel: f64, extent: Option<[f64; 4]>) -> Self {
        let n = plane.normal;
        let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = (helper - n * n.dot(&helper)).normalize();
        let v = n.cross(&u);
        Self { plane, texture, texel, extent, origin: n * plane.distance, u, v }
    }

    fn plane_coords(&self, x: &Vector3<f64>) -> (f64, f64) {
        let d = x - self.origin;
        (d.dot(&self.u), d.dot(&self.v))
    }

    fn contains(&self, x: &Vector3<f64>) -> bool {
        match self.extent {
            None => true,
            Some([u0, u1, v0, v1]) => {
                let (u, v) = self.plane_coords(x);
                u >= u0 && u <= u1 && v >= v0 && v <= v1
            }
        }
    }

    /// Ray parameter of the hit with `origin + s·dir`, if in front and inside.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let den = self.plane.normal.dot(dir);
        if den.abs() < 1e-12 {
            return None;
        }
        let s = (self.plane.distance - self.plane.normal.dot(origin)) / den;
        (s > 0.0 && self.contains(&(origin + dir * s))).then_some(s)
    }

    fn shade(&self, x: &Vector3<f64>) -> f64 {
        let (u, v) = self.plane_coords(x);
        let tx = (u / self.texel + (self.texture.width() - 1) as f64 / 2.0).clamp(0.0, (self.texture.width() - 1) as f64);
        let ty = (v / self.texel + (self.texture.height() - 1) as f64 / 2.0).clamp(0.0, (self.texture.height() - 1) as f64);
        self.texture.sample_unchecked(tx, ty)
    }

    /// Texels needed on each side of the texture centre to cover `x`.
    fn texels_needed(&self, x: &Vector3<f64>) -> (f64, f64) {
        let (u, v) = self.plane_coords(x);
        ((u / self.texel).abs(), (v / self.texel).abs())
    }
}

/// Shared intrinsics, camera-2 pose (`X2 = R X1 + t`, metric `t`) and image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSetup {
    pub k: CameraIntrinsics,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

impl SceneSetup {
    fn centre2(&self) -> Vector3<f64> {
        -self.rotation.transpose() * self.translation
    }

    fn ray(&self, view: View, p: &Point2) -> (Vector3<f64>, Vector3<f64>) {
        let kinv = self.k.matrix().try_inverse().expect("intrinsics are invertible");
        let d = kinv * Vector3::new(p.x, p.y, 1.0);
        match view {
            View::One => (Vector3::zeros(), d),
            View::Two => (self.centre2(), self.rotation.transpose() * d),
        }
    }

    fn project(&self, view: View, x: &Vector3<f64>) -> Option<Point2> {
        let c = match view {
            View::One => *x,
            View::Two => self.rotation * x + self.translation,
        };
        if c.z <= 0.0 {
            return None;
        }
        let p = self.k.matrix() * c;
        Some(Point2::new(p.x / p.z, p.y / p.z))
    }

    fn in_frame(&self, p: &Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    One,
    Two,
}

/// Ground truth of a point in one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GtTarget {
    /// Seen in the other view at `point`, on surface `surface`.
    Visible { point: Point2, surface: usize },
    /// Projects inside the other view but is hidden there by a nearer surface.
    Occluded { surface: usize },
    /// Not imaged by the other view, or no surface behind the pixel.
    OutOfView,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub img1: GrayImage,
    pub img2: GrayImage,
    pub f_true: FundamentalMatrix,
    pub k: CameraIntrinsics,
    pub pose: RelativePose,
    pub setup: SceneSetup,
    pub surfaces: Vec<Surface>,
}

fn nearest_hit(surfaces: &[Surface], origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(usize, Vector3<f64>)> {
    surfaces
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.intersect(origin, dir).map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, t)| (i, origin + dir * t))
}

impl SyntheticScene {
    fn build(setup: SceneSetup, surfaces: Vec<Surface>) -> Result<Self, EvalError> {
        if setup.width < 2 || setup.height < 2 {
            return Err(EvalError::Parameter("image size must be at least 2x2".into()));
        }
        let pose = RelativePose::new(setup.rotation, setup.translation)?;
        let f_true = fundamental_from_pose(&setup.k, &setup.k, &setup.rotation, &setup.translation)?;
        let c2 = setup.centre2();
        for s in &surfaces {
            if s.plane.normal.dot(&c2) >= s.plane.distance {
                return Err(EvalError::Geometry("a plane lies behind camera 2".into()));
            }
        }
        let render = |view: View| -> Result<GrayImage, EvalError> {
            let data: Vec<Option<f64>> = (0..setup.width * setup.height)
                .into_par_iter()
                .map(|i| {
                    let p = Point2::new((i % setup.width) as f64, (i / setup.width) as f64);
                    let (o, d) = setup.ray(view, &p);
                    nearest_hit(&surfaces, &o, &d).map(|(s, x)| surfaces[s].shade(&x))
                })
                .collect();
            let data: Option<Vec<f64>> = data.into_iter().collect();
            let data = data.ok_or_else(|| EvalError::Geometry(format!("view {view:?} sees past every surface")))?;
            Ok(GrayImage::new(setup.width, setup.height, data)?)
        };
        let img1 = render(View::One)?;
        let img2 = render(View::Two)?;
        Ok(Self { img1, img2, f_true, k: setup.k, pose, setup, surfaces })
    }

    /// Ground-truth counterpart in the other view of pixel position `p`.
    pub fn ground_truth(&self, view: View, p: &Point2) -> GtTarget {
        let (o, d) = self.setup.ray(view, p);
        let Some((surface, x)) = nearest_hit(&self.surfaces, &o, &d) else {
            return GtTarget::OutOfView;
        };
        let other = match view {
            View::One => View::Two,
            View::Two => View::One,
        };
        let Some(q) = self.setup.project(other, &x) else {
            return GtTarget::OutOfView;
        };
        if !self.setup.in_frame(&q) {
            return GtTarget::OutOfView;
        }
        let (o2, d2) = self.setup.ray(other, &q);
        match nearest_hit(&self.surfaces, &o2, &d2) {
            Some((s2, x2)) if s2 == surface && (x2 - x).norm() <= 1e-6 * x.norm().max(1.0) => {
                GtTarget::Visible { point: q, surface }
            }
            _ => GtTarget::Occluded { surface },
        }
    }

    /// Number of integer pixels of `view` whose ground truth is visible.
    pub fn visible_count(&self, view: View) -> usize {
        (0..self.setup.width * self.setup.height)
            .into_par_iter()
            .filter(|&i| {
                let p = Point2::new((i % self.setup.width) as f64, (i / self.setup.width) as f64);
                matches!(self.ground_truth(view, &p), GtTarget::Visible { .. })
            })
            .count()
    }

    /// Visible ground-truth pairs on a lattice of the given stride, in the
    /// `x1 y1 x2 y2` text format.
    pub fn gt_text(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("# x1 y1 x2 y2 (ground truth)\n");
        for y in (0..self.setup.height).step_by(stride) {
            for x in (0..self.setup.width).step_by(stride) {
                let p = Point2::new(x as f64, y as f64);
                if let GtTarget::Visible { point, .. } = self.ground_truth(View::One, &p) {
                    out.push_str(&format!("{} {} {:.6} {:.6}\n", x, y, point.x, point.y));
                }
            }
        }
        out
    }
}

/// Texture side lengths that cover every pixel of both views on `surface`.
fn texture_size_for(setup: &SceneSetup, plane: Plane, texel: f64, extent: Option<[f64; 4]>) -> (usize, usize) {
    let probe = Surface::new(plane, GrayImage::filled(1, 1, 0.0).expect("1x1 image"), texel, None);
    let (mut hu, mut hv) = (0.0f64, 0.0f64);
    if let Some([u0, u1, v0, v1]) = extent {
        hu = u0.abs().max(u1.abs()) / texel;
        hv = v0.abs().max(v1.abs()) / texel;
    } else {
        let (w, h) = ((setup.width - 1) as f64, (setup.height - 1) as f64);
        for view in [View::One, View::Two] {
            for p in [Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(0.0, h), Point2::new(w, h)] {
                let (o, d) = setup.ray(view, &p);
                if let Some(s) = probe.intersect(&o, &d) {
                    let (a, b) = probe.texels_needed(&(o + d * s));
                    hu = hu.max(a);
                    hv = hv.max(b);
                }
            }
        }
    }
    (2 * (hu.ceil() as usize + 8) + 1, 2 * (hv.ceil() as usize + 8) + 1)
}

/// Single textured plane seen from both cameras.
pub fn synth_plane_pair(texture: &GrayImage, texel: f64, setup: &SceneSetup, plane: Plane) -> Result<SyntheticScene, EvalError> {
    if !(texel > 0.0) {
        return Err(EvalError::Parameter("texel must be positive".into()));
    }
    SyntheticScene::build(*setup, vec![Surface::new(plane, texture.clone(), texel, None)])
}

/// Background plane partly hidden by a finite foreground rectangle.
pub fn synth_two_plane_pair(
    background: (&GrayImage, f64, Plane),
    foreground: (&GrayImage, f64, Plane, [f64; 4]),
    setup: &SceneSetup,
) -> Result<SyntheticScene, EvalError> {
    let (bt, bs, bp) = background;
    let (ft, fs, fp, ext) = foreground;
    if !(bs > 0.0 && fs > 0.0) || !(ext[0] < ext[1] && ext[2] < ext[3]) {
        return Err(EvalError::Parameter("texels must be positive and the extent non-empty".into()));
    }
    SyntheticScene::build(
        *setup,
        vec![
            Surface::new(bp, bt.clone(), bs, None),
            Surface::new(fp, ft.clone(), fs, Some(ext)),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Plane,
    TwoPlane,
}

impl std::str::FromStr for SceneKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plane" => Ok(SceneKind::Plane),
            "two-plane" => Ok(SceneKind::TwoPlane),
            other => Err(format!("unknown scene {other:?} (expected plane or two-plane)")),
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Plane => "plane",
            SceneKind::TwoPlane => "two-plane",
        })
    }
}

/// 800×600 stereo rig: focal length 700 px, camera 2 displaced 0.6 units to
/// the right (plus a little up and forward) and turned slightly inwards.
pub fn default_setup() -> SceneSetup {
    let k = CameraIntrinsics::new(700.0, 700.0, 399.5, 299.5).expect("valid intrinsics");
    let rotation = *Rotation3::from_euler_angles(0.01, 0.05, 0.005).matrix();
    let centre = Vector3::new(0.6, 0.05, 0.1);
    SceneSetup { k, rotation, translation: -rotation * centre, width: 800, height: 600 }
}

/// Default benchmark scene of the given kind; textures depend only on `seed`.
pub fn default_scene(kind: SceneKind, seed: u64) -> Result<SyntheticScene, EvalError> {
    let setup = default_setup();
    let f = setup.k.fx;
    match kind {
        SceneKind::Plane => {
            let plane = Plane::new(Vector3::new(0.15, 0.1, 1.0), 6.0)?;
            let texel = 6.0 / f;
            let (tw, th) = texture_size_for(&setup, plane, texel, None);
            synth_plane_pair(&procedural_texture(tw, th, seed)?, texel, &setup, plane)
        }
        SceneKind::TwoPlane => {
            let bg = Plane::new(Vector3::new(0.1, 0.05, 1.0), 10.0)?;
            let fg = Plane::new(Vector3::new(-0.1, 0.0, 1.0), 5.0)?;
            let ext = [-1.0, 1.0, -0.8, 0.8];
            let (bs, fs) = (10.0 / f, 5.0 / f);
            let (bw, bh) = texture_size_for(&setup, bg, bs, None);
            let (fw, fh) = texture_size_for(&setup, fg, fs, Some(ext));
            synth_two_plane_pair(
                (&procedural_texture(bw, bh, seed)?, bs, bg),
                (&procedural_texture(fw, fh, seed.wrapping_add(1))?, fs, fg, ext),
                &setup,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub n_matches: usize,
    /// Mean of both views' visible lattice-pixel counts.
    pub n_positives: f64,
    pub n_correct: usize,
    /// Distinct visible image-1 lattice pixels reached by a correct match.
    pub n_covered: usize,
    pub precision: f64,
    pub recall: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "n_matches,n_positives,n_correct,n_covered,precision,recall";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.1},{},{},{:.6},{:.6}",
            self.n_matches, self.n_positives, self.n_correct, self.n_covered, self.precision, self.recall
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eval.n_matches = {}", self.n_matches)?;
        writeln!(f, "eval.n_positives = {:.1}", self.n_positives)?;
        writeln!(f, "eval.n_correct = {}", self.n_correct)?;
        writeln!(f, "eval.n_covered = {}", self.n_covered)?;
        writeln!(f, "eval.precision = {:.6}", self.precision)?;
        writeln!(f, "eval.recall = {:.6}", self.recall)
    }
}

/// Scores `matches` against the scene: a match is correct when its image-1
/// point has a visible counterpart within `tol` pixels of its image-2 point.
/// Recall counts distinct covered lattice pixels so that it stays in [0, 1]
/// however densely lines are sampled.
pub fn precision_recall(matches: &[DenseMatch], scene: &SyntheticScene, tol: f64) -> Result<MetricsReport, EvalError> {
    let positives = (scene.visible_count(View::One) + scene.visible_count(View::Two)) as f64 / 2.0;
    precision_recall_with_positives(matches, scene, tol, positives)
}

/// As [`precision_recall`] with a precomputed positive count.
pub fn precision_recall_with_positives(
    matches: &[DenseMatch],
    scene: &SyntheticScene,
    tol: f64,
    n_positives: f64,
) -> Result<MetricsReport, EvalError> {
    if !(tol > 0.0) {
        return Err(EvalError::Parameter("tolerance must be positive".into()));
    }
    let correct: Vec<bool> = matches
        .par_iter()
        .map(|m| match scene.ground_truth(View::One, &m.p1) {
            GtTarget::Visible { point, .. } => point.dist(&m.p2) <= tol,
            _ => false,
        })
        .collect();
    let n_correct = correct.iter().filter(|&&c| c).count();
    let w = scene.setup.width;
    let mut covered = vec![false; w * scene.setup.height];
    for (m, _) in matches.iter().zip(&correct).filter(|(_, &c)| c) {
        let (x, y) = (m.p1.x.round() as usize, m.p1.y.round() as usize);
        if x < w && y < scene.setup.height {
            covered[y * w + x] = true;
        }
    }
    let n_covered = covered
        .par_iter()
        .enumerate()
        .filter(|&(i, &c)| {
            c && matches!(
                scene.ground_truth(View::One, &Point2::new((i % w) as f64, (i / w) as f64)),
                GtTarget::Visible { .. }
            )
        })
        .count();
    let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 };
    Ok(MetricsReport {
        n_matches: matches.len(),
        n_positives,
        n_correct,
        n_covered,
        precision: ratio(n_correct as f64, matches.len() as f64),
        recall: ratio(n_covered as f64, n_positives),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densematch::MatchFlags;
    use nalgebra::Vector3;

    fn small_setup(rotation: Matrix3<f64>, translation: Vector3<f64>) -> SceneSetup {
        SceneSetup {
            k: CameraIntrinsics::new(200.0, 200.0, 79.5, 59.5).unwrap(),
            rotation,
            translation,
            width: 160,
            height: 120,
        }
    }

    fn small_plane(setup: &SceneSetup, plane: Plane) -> SyntheticScene {
        let texel = 0.02;
        let (tw, th) = texture_size_for(setup, plane, texel, None);
        synth_plane_pair(&procedural_texture(tw, th, 11).unwrap(), texel, setup, plane).unwrap()
    }

    #[test]
    fn identity_pose_renders_identical_views() {
        let setup = small_setup(Matrix3::identity(), Vector3::new(1e-12, 0.0, 0.0));
        let scene = small_plane(&setup, Plane::new(Vector3::new(0.1, 0.0, 1.0), 4.0).unwrap());
        let diff = scene.img1.data().iter().zip(scene.img2.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
        let p = Point2::new(40.0, 30.0);
        let GtTarget::Visible { point, .. } = scene.ground_truth(View::One, &p) else { panic!() };
        assert!(point.dist(&p) < 1e-6);
    }

    #[test]
    fn lateral_translation_gives_uniform_shift() {
        let setup = small_setup(Matrix3::identity(), Vector3::new(-0.5, 0.0, 0.0));
        let scene = small_plane(&setup, Plane::new(Vector3::z(), 5.0).unwrap());
        for (x, y) in [(60.0, 20.0), (100.0, 90.0), (130.0, 5.0)] {
            let GtTarget::Visible { point, .. } = scene.ground_truth(View::One, &Point2::new(x, y)) else { panic!() };
            assert!((point.x - (x - 20.0)).abs() < 1e-9 && (point.y - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_truth_obeys_epipolar_constraint() {
        let scene = default_scene(SceneKind::Plane, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut checked = 0;
        while checked < 1000 {
            let p = Point2::new(rng.gen_range(0.0..799.0), rng.gen_range(0.0..599.0));
            if let GtTarget::Visible { point, .. } = scene.ground_truth(View::One, &p) {
                assert!(scene.f_true.normalized_residual(&p.into(), &point.into()) <= 1e-6);
                checked += 1;
            }
        }
    }

    #[test]
    fn plane_behind_camera_two_is_rejected() {
        let setup = small_setup(Matrix3::identity(), Vector3::new(0.0, 0.0, -3.0));
        let plane = Plane::new(Vector3::z(), 2.0).unwrap();
        let tex = procedural_texture(50, 50, 1).unwrap();
        assert!(matches!(synth_plane_pair(&tex, 0.1, &setup, plane), Err(EvalError::Geometry(_))));
        assert!(Plane::new(Vector3::z(), -1.0).is_err());
    }

    #[test]
    fn two_plane_occlusion_is_consistent() {
        let scene = default_scene(SceneKind::TwoPlane, 3).unwrap();
        let (mut occluded, mut fg) = (0, 0);
        for y in (0..600).step_by(5) {
            for x in (0..800).step_by(5) {
                let p = Point2::new(x as f64, y as f64);
                match scene.ground_truth(View::One, &p) {
                    GtTarget::Occluded { surface } => {
                        occluded += 1;
                        assert_eq!(surface, 0);
                        // z-buffer oracle: the foreground must cover the gt position in view 2
                        let (o, d) = scene.setup.ray(View::One, &p);
                        let x1 = o + d * scene.surfaces[0].intersect(&o, &d).unwrap();
                        let q = scene.setup.project(View::Two, &x1).unwrap();
                        let (o2, d2) = scene.setup.ray(View::Two, &q);
                        let fg_hit = scene.surfaces[1].intersect(&o2, &d2).unwrap();
                        assert!(fg_hit < (x1 - o2).norm() / d2.norm());
                    }
                    GtTarget::Visible { point, surface: 1 } => {
                        fg += 1;
                        // foreground plane homography
                        let n = scene.surfaces[1].plane.normal;
                        let dist = scene.surfaces[1].plane.distance;
                        let k = scene.k.matrix();
                        let h = k * (scene.setup.rotation + scene.setup.translation * n.transpose() / dist) * k.try_inverse().unwrap();
                        let q = h * Vector3::new(p.x, p.y, 1.0);
                        assert!(Point2::new(q.x / q.z, q.y / q.z).dist(&point) < 1e-6);
                    }
                    _ => {}
                }
            }
        }
        assert!(occluded > 50, "{occluded}");
        assert!(fg > 500, "{fg}");
        // occluded points in view 2 exist as well
        let occ2 = (0..600)
            .step_by(5)
            .flat_map(|y| (0..800).step_by(5).map(move |x| Point2::new(x as f64, y as f64)))
            .filter(|p| matches!(scene.ground_truth(View::Two, p), GtTarget::Occluded { .. }))
            .count();
        assert!(occ2 > 50);
    }

    #[test]
    fn distant_foreground_reduces_to_single_plane() {
        let setup = small_setup(Matrix3::identity(), Vector3::new(-0.3, 0.0, 0.0));
        let bg = Plane::new(Vector3::z(), 5.0).unwrap();
        let texel = 0.02;
        let (tw, th) = texture_size_for(&setup, bg, texel, None);
        let tex = procedural_texture(tw, th, 5).unwrap();
        let single = synth_plane_pair(&tex, texel, &setup, bg).unwrap();
        let fg_tex = procedural_texture(20, 20, 6).unwrap();
        let fg = Plane::new(Vector3::z(), 3.0).unwrap();
        let two = synth_two_plane_pair((&tex, texel, bg), (&fg_tex, 0.01, fg, [50.0, 51.0, 50.0, 51.0]), &setup).unwrap();
        assert_eq!(single.img1, two.img1);
        assert_eq!(single.img2, two.img2);
    }

    fn dm(p1: Point2, p2: Point2) -> DenseMatch {
        DenseMatch { line: 0, p1, p2, cost: 0.0, flags: MatchFlags::default() }
    }

    #[test]
    fn metrics_formulas() {
        let setup = small_setup(Matrix3::identity(), Vector3::new(-0.5, 0.0, 0.0));
        let scene = small_plane(&setup, Plane::new(Vector3::z(), 5.0).unwrap());
        let mut ms = Vec::new();
        for i in 0..100 {
            let p1 = Point2::new(30.0 + (i % 10) as f64, 30.0 + (i / 10) as f64);
            let shift = if i < 90 { 20.0 } else { 30.0 };
            ms.push(dm(p1, Point2::new(p1.x - shift, p1.y)));
        }
        let r = precision_recall_with_positives(&ms, &scene, 2.0, 100.0).unwrap();
        assert_eq!((r.n_correct, r.n_covered), (90, 90));
        assert!((r.precision - 0.9).abs() < 1e-12 && (r.recall - 0.9).abs() < 1e-12);
        let empty = precision_recall_with_positives(&[], &scene, 2.0, 100.0).unwrap();
        assert_eq!((empty.precision, empty.recall), (0.0, 0.0));
        let tight = precision_recall_with_positives(&ms, &scene, 1e-12, 100.0).unwrap();
        assert!(tight.precision <= r.precision && tight.recall <= r.recall);
        assert_eq!(MetricsReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    }

    #[test]
    fn texture_is_deterministic_and_edgy() {
        let a = procedural_texture(120, 90, 4).unwrap();
        assert_eq!(a, procedural_texture(120, 90, 4).unwrap());
        assert_ne!(a, procedural_texture(120, 90, 5).unwrap());
        let steps = (1..119).filter(|&x| (a.get(x + 1, 45) - a.get(x - 1, 45)).abs() > 20.0).count();
        assert!(steps >= 5, "{steps}");
    }
}
