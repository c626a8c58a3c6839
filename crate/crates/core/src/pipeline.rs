//! End-to-end orchestration: seeds, robust geometry, line sweep, rough and
//! dense matching, validity filters, and the files written for each run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Orientation, PipelineConfig};
use crate::densematch::{dense_match_segment, DenseMatch, SegmentPair, SubProfile};
use crate::epigeo::{
    decompose_essential, decompose_homography, estimate_homography, fundamental_from_pose, ransac_fundamental,
    ransac_homography, signed_epipoles, triangulate, CameraIntrinsics, FundamentalMatrix, GeometryError,
    ProjectiveCameraPair, RansacParams, RelativePose,
};
use crate::evalbench::{default_scene, precision_recall, EvalError, MetricsReport, SceneKind, SyntheticScene};
use crate::imgio::{decode_image, encode_pgm, encode_ppm, GrayImage, ImageError, Overlay, Point2, Rgb};
use crate::roughmatch::{align_keypoints_dp, derivative, extract_keypoints, Alignment, RoughMatchSet};
use crate::seedmatch::{detect_harris, load_external_matches, match_mutual_nn, SeedError, SeedMatch};
use crate::sweep::{corresponding_pair, pencil, sample_line, LinePair, OrientedGeometry, Rect, SampledLine};
use crate::validate::{depth_validity, sequence_validity, DepthJump, ValidityReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("seed stage: {0}")]
    Seed(String),
    #[error("RANSAC stage: {0}")]
    Ransac(GeometryError),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: ImageError },
    #[error("{path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("scene: {0}")]
    Eval(#[from] EvalError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Known geometry that replaces the seed and RANSAC stages.
#[derive(Debug, Clone)]
pub struct GeometryOverride {
    pub f: FundamentalMatrix,
    /// Correspondences used only to fix the epipole signs.
    pub orientation_pairs: Vec<(Point2, Point2)>,
}

#[derive(Debug, Clone, Default)]
pub struct MatchInputs {
    pub intrinsics: Option<CameraIntrinsics>,
    pub external_matches: Option<Vec<SeedMatch>>,
    pub geometry: Option<GeometryOverride>,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub seeds: Vec<SeedMatch>,
    pub inliers: usize,
    pub geometry: OrientedGeometry,
    pub cameras: ProjectiveCameraPair,
    pub calibrated: bool,
    pub pencil_size: usize,
    pub line_pairs: Vec<LinePair>,
    pub matches: Vec<DenseMatch>,
    pub report: ValidityReport,
}

impl MatchResult {
    pub fn survivors(&self) -> Vec<DenseMatch> {
        self.matches.iter().filter(|m| !m.flags.any()).copied().collect()
    }
}

/// Runs `f` on a pool of `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

fn seed_stage(img1: &GrayImage, img2: &GrayImage, inputs: &MatchInputs, cfg: &PipelineConfig) -> Result<Vec<SeedMatch>, PipelineError> {
    if let Some(ext) = &inputs.external_matches {
        return Ok(ext.clone());
    }
    let seed_err = |e: SeedError| PipelineError::Seed(e.to_string());
    let (a, b) = rayon::join(|| detect_harris(img1, &cfg.harris), || detect_harris(img2, &cfg.harris));
    let (a, b) = (a.map_err(seed_err)?, b.map_err(seed_err)?);
    info!("detected {} and {} corners", a.len(), b.len());
    Ok(match_mutual_nn(&a, &b, cfg.min_similarity))
}

/// Share of the fundamental-matrix inliers a homography must explain for the
/// seeds to be treated as planar.
pub const PLANAR_FRACTION: f64 = 0.9;

/// Seed pairs consistent with one homography, when they make up at least
/// [`PLANAR_FRACTION`] of the `f_inliers`.
fn planar_fit(pairs: &[(Point2, Point2)], params: &RansacParams, f_inliers: usize) -> Option<Vec<(Point2, Point2)>> {
    let hp = RansacParams { inlier_thresh: 2.0 * params.inlier_thresh, ..*params };
    let (_, mask) = ransac_homography(pairs, &hp).ok()?;
    let on_plane: Vec<_> = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
    (on_plane.len() as f64 >= PLANAR_FRACTION * f_inliers as f64).then_some(on_plane)
}

/// Pose and fundamental matrix from the plane's homography. Ties in
/// cheirality support go to the plane facing camera 1 most directly.
fn planar_geometry(
    k: &CameraIntrinsics,
    on_plane: &[(Point2, Point2)],
) -> Result<(FundamentalMatrix, RelativePose), GeometryError> {
    let h = estimate_homography(on_plane)?;
    let motions = decompose_homography(&h, k, k, on_plane)?;
    let top = motions[0].support;
    let best = motions
        .iter()
        .filter(|m| m.support == top)
        .max_by(|a, b| (a.normal.z / a.normal.norm()).total_cmp(&(b.normal.z / b.normal.norm())))
        .expect("non-empty");
    info!("seed matches are planar; pose taken from the homography ({} motion candidates)", motions.len());
    let f = fundamental_from_pose(k, k, &best.pose.rotation, &best.pose.translation)?;
    Ok((f, best.pose))
}

fn geometry_stage(
    seeds: &[SeedMatch],
    inputs: &MatchInputs,
    cfg: &PipelineConfig,
) -> Result<(OrientedGeometry, ProjectiveCameraPair, bool, usize), PipelineError> {
    let (f, inlier_pairs, planar_pose) = match &inputs.geometry {
        Some(g) => (g.f, g.orientation_pairs.clone(), None),
        None => {
            if seeds.len() < 8 {
                return Err(PipelineError::Seed(format!("found {} seed matches, at least 8 are needed", seeds.len())));
            }
            let mut disp: Vec<f64> = seeds.iter().map(|s| s.p1.dist(&s.p2)).collect();
            disp.sort_by(f64::total_cmp);
            if disp[disp.len() / 2] < 0.5 {
                return Err(PipelineError::Degenerate(
                    "seed matches do not move between the images (zero baseline?)".into(),
                ));
            }
            let pairs: Vec<(Point2, Point2)> = seeds.iter().map(|s| (s.p1, s.p2)).collect();
            let params = RansacParams { seed: cfg.seed, ..cfg.ransac };
            let (f, mask) = ransac_fundamental(&pairs, &params).map_err(|e| match e {
                GeometryError::Degenerate(m) => PipelineError::Degenerate(m),
                other => PipelineError::Ransac(other),
            })?;
            let inl: Vec<_> = pairs.iter().zip(&mask).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
            info!("RANSAC kept {} of {} seed matches", inl.len(), pairs.len());
            match planar_fit(&pairs, &params, inl.len()) {
                Some(on_plane) => match &inputs.intrinsics {
                    Some(k) => match planar_geometry(k, &on_plane) {
                        Ok((f, pose)) => (f, on_plane, Some(pose)),
                        Err(e) => {
                            warn!("seed matches are close to planar and the homography could not be decomposed: {e}");
                            (f, inl, None)
                        }
                    },
                    None => {
                        warn!("seed matches are close to planar; without intrinsics the fundamental matrix is poorly constrained");
                        (f, inl, None)
                    }
                },
                None => (f, inl, None),
            }
        }
    };
    let (e1, e2) = signed_epipoles(&f, &inlier_pairs);
    let geo = OrientedGeometry::new(f, e1, e2, &inlier_pairs);
    let mut cams = None;
    if let Some(k) = &inputs.intrinsics {
        if let Some(pose) = planar_pose {
            cams = Some(ProjectiveCameraPair::calibrated(k, k, &pose));
        }
        for (a, b) in inlier_pairs.iter().take(50) {
            if cams.is_some() {
                break;
            }
            if let Ok(pose) = decompose_essential(&f, k, k, (&(*a).into(), &(*b).into())) {
                cams = Some(ProjectiveCameraPair::calibrated(k, k, &pose));
            }
        }
        if cams.is_none() {
            warn!("essential-matrix decomposition failed; falling back to projective cameras");
        }
    }
    let calibrated = cams.is_some();
    let cams = cams.unwrap_or_else(|| ProjectiveCameraPair::canonical(&f));
    Ok((geo, cams, calibrated, inlier_pairs.len()))
}

fn reversed(line: &SampledLine) -> SampledLine {
    SampledLine {
        points: line.points.iter().rev().copied().collect(),
        intensities: line.intensities.iter().rev().copied().collect(),
    }
}

fn rough_stage(line: &SampledLine, cfg: &PipelineConfig) -> Option<RoughMatchSet> {
    let da = derivative(&line.intensities).ok()?;
    extract_keypoints(line, &da, &cfg.rough).ok()
}

fn slice(line: &SampledLine, a: usize, b: usize) -> SubProfile {
    SubProfile {
        points: line.points[a..=b].to_vec(),
        values: line.intensities[a..=b].to_vec(),
    }
}

/// Segment pairs between consecutive aligned key points of one line pair,
/// each carrying its sequence-validity flag. The second sub-profile is
/// reversed when `dp-both` orientation preferred the reversed line.
pub fn line_segments(lp: &LinePair, img1: &GrayImage, img2: &GrayImage, cfg: &PipelineConfig) -> Vec<SegmentPair> {
    let l1 = sample_line(img1, &lp.seg1, cfg.spacing);
    let mut l2 = sample_line(img2, &lp.seg2, cfg.spacing);
    if l1.len() < 3 || l2.len() < 3 {
        return Vec::new();
    }
    let (Some(rm1), Some(mut rm2)) = (rough_stage(&l1, cfg), rough_stage(&l2, cfg)) else {
        return Vec::new();
    };
    let align = |b: &RoughMatchSet| align_keypoints_dp(&rm1, b, cfg.rough.gap_penalty, cfg.rough.sigma).unwrap_or_default();
    let mut al: Alignment = align(&rm2);
    if cfg.orientation == Orientation::DpBoth {
        let l2r = reversed(&l2);
        if let Some(rm2r) = rough_stage(&l2r, cfg) {
            let alr = align(&rm2r);
            if alr.score > al.score {
                (l2, rm2, al) = (l2r, rm2r, alr);
            }
        }
    }
    let Ok(valid) = sequence_validity(&al, &rm1, &rm2) else {
        return Vec::new();
    };
    al.pairs
        .windows(2)
        .zip(valid)
        .map(|(w, valid)| {
            let (a0, b0) = (rm1.keypoints[w[0].0].index, rm2.keypoints[w[0].1].index);
            let (a1, b1) = (rm1.keypoints[w[1].0].index, rm2.keypoints[w[1].1].index);
            SegmentPair { s1: slice(&l1, a0, a1), s2: slice(&l2, b0, b1), valid }
        })
        .collect()
}

/// Dense matches of one line pair, in sample order.
pub fn match_line(
    lp: &LinePair,
    img1: &GrayImage,
    img2: &GrayImage,
    cams: Option<&ProjectiveCameraPair>,
    cfg: &PipelineConfig,
) -> Vec<DenseMatch> {
    let mut out: Vec<DenseMatch> = Vec::new();
    for (k, pair) in line_segments(lp, img1, img2, cfg).iter().enumerate() {
        let Ok(seg) = dense_match_segment(pair, lp.index, cfg.dense_reject, cfg.cost_mode) else {
            continue;
        };
        if k == 0 || out.is_empty() {
            out.extend(seg);
        } else {
            // the shared key point stays invalid only if both neighbouring segments are
            if let Some(last) = out.last_mut() {
                last.flags.sv_invalid &= !pair.valid;
            }
            out.extend(seg.into_iter().skip(1));
        }
    }
    if let Some(cams) = cams {
        let checks = depth_validity(&out, cams, DepthJump::Relative(cfg.depth_jump));
        for (m, check) in out.iter_mut().zip(checks) {
            m.flags.sp_invalid = check.invalid;
        }
    }
    out
}

/// Full matching run on two images. Parallel work uses the current rayon pool.
pub fn run_match(img1: &GrayImage, img2: &GrayImage, inputs: &MatchInputs, cfg: &PipelineConfig) -> Result<MatchResult, PipelineError> {
    cfg.check()?;
    let started = Instant::now();
    let seeds = if inputs.geometry.is_some() { Vec::new() } else { seed_stage(img1, img2, inputs, cfg)? };
    info!("{} seed matches", seeds.len());
    let (geometry, cameras, calibrated, inliers) = geometry_stage(&seeds, inputs, cfg)?;
    let (rect1, rect2) = (Rect::of(img1), Rect::of(img2));
    let pencil = pencil(&geometry.e1, &rect1);
    let sp_cams = calibrated.then_some(&cameras);
    let lines: Vec<Option<(LinePair, Vec<DenseMatch>)>> = (0..pencil.len())
        .into_par_iter()
        .map(|i| {
            let lp = corresponding_pair(&geometry, &pencil, i, &rect1, &rect2, cfg.exclusion)?;
            let ms = match_line(&lp, img1, img2, sp_cams, cfg);
            Some((lp, ms))
        })
        .collect();
    let mut line_pairs = Vec::new();
    let mut matches = Vec::new();
    for (lp, ms) in lines.into_iter().flatten() {
        line_pairs.push(lp);
        matches.extend(ms);
    }
    let report = ValidityReport::from_matches(&matches);
    info!(
        "{} line pairs, {} dense matches, {} survivors in {:.2?}",
        line_pairs.len(),
        report.total,
        report.survivors,
        started.elapsed()
    );
    Ok(MatchResult {
        seeds,
        inliers,
        geometry,
        cameras,
        calibrated,
        pencil_size: pencil.len(),
        line_pairs,
        matches,
        report,
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

pub fn read_image(path: &Path) -> Result<GrayImage, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
    decode_image(&bytes).map_err(|source| PipelineError::Image { path: path.into(), source })
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
    CameraIntrinsics::from_text(&text).map_err(|e| PipelineError::Input { path: path.into(), reason: e.to_string() })
}

pub fn read_matches(path: &Path) -> Result<Vec<SeedMatch>, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
    load_external_matches(&bytes).map_err(|e| PipelineError::Input { path: path.into(), reason: e.to_string() })
}

/// Loads the images and optional files named by `cfg`.
pub fn load_inputs(cfg: &PipelineConfig) -> Result<(GrayImage, GrayImage, MatchInputs), PipelineError> {
    let missing = |k: &str| PipelineError::Config(ConfigError::Value { key: k.into(), value: String::new(), reason: "required".into() });
    let img1 = read_image(cfg.img1.as_deref().ok_or_else(|| missing("input.img1"))?)?;
    let img2 = read_image(cfg.img2.as_deref().ok_or_else(|| missing("input.img2"))?)?;
    let intrinsics = cfg.intrinsics.as_deref().map(read_intrinsics).transpose()?;
    let external_matches = cfg.ext_matches.as_deref().map(read_matches).transpose()?;
    Ok((img1, img2, MatchInputs { intrinsics, external_matches, geometry: None }))
}

pub fn matches_text(matches: &[DenseMatch]) -> String {
    let mut s = String::with_capacity(matches.len() * 64);
    s.push_str("# line_index x1 y1 x2 y2 cost flags\n");
    for m in matches {
        s.push_str(&m.to_line());
        s.push('\n');
    }
    s
}

pub fn report_text(r: &MatchResult) -> String {
    let e = |h: &crate::epigeo::HomPoint2| format!("{:.9} {:.9} {:.9}", h.0.x, h.0.y, h.0.z);
    format!(
        "seeds.count = {}\nseeds.inliers = {}\ncameras = {}\nepipole1 = {}\nepipole2 = {}\nlines.pencil = {}\nlines.used = {}\n{}",
        r.seeds.len(),
        r.inliers,
        if r.calibrated { "calibrated" } else { "projective" },
        e(&r.geometry.e1),
        e(&r.geometry.e2),
        r.pencil_size,
        r.line_pairs.len(),
        r.report
    )
}

const PALETTE: [Rgb; 4] = [Rgb::RED, Rgb::GREEN, Rgb::BLUE, Rgb::YELLOW];

/// Side-by-side view with every `every`-th line pair drawn in both halves.
pub fn visualization(img1: &GrayImage, img2: &GrayImage, pairs: &[LinePair], every: usize) -> Vec<u8> {
    let (w1, w) = (img1.width(), img1.width() + img2.width());
    let h = img1.height().max(img2.height());
    let canvas = GrayImage::from_fn(w, h, |x, y| {
        if x < w1 {
            if y < img1.height() { img1.get(x, y) } else { 0.0 }
        } else if y < img2.height() {
            img2.get(x - w1, y)
        } else {
            0.0
        }
    })
    .expect("canvas dimensions are positive");
    let mut overlays = Vec::new();
    if every > 0 {
        for (n, lp) in pairs.iter().enumerate().filter(|(n, _)| n % every == 0) {
            let color = PALETTE[(n / every) % PALETTE.len()];
            let shift = |p: Point2| Point2::new(p.x + w1 as f64, p.y);
            overlays.push(Overlay { from: lp.seg1.entry, to: lp.seg1.exit, color });
            overlays.push(Overlay { from: shift(lp.seg2.entry), to: shift(lp.seg2.exit), color });
        }
    }
    encode_ppm(&canvas, &overlays)
}

/// Writes matches.txt, report.txt, fundamental.txt and (optionally) viz.ppm.
pub fn write_match_outputs(dir: &Path, img1: &GrayImage, img2: &GrayImage, r: &MatchResult, cfg: &PipelineConfig) -> Result<(), PipelineError> {
    write_atomic(&dir.join("matches.txt"), matches_text(&r.matches).as_bytes())?;
    write_atomic(&dir.join("report.txt"), report_text(r).as_bytes())?;
    write_atomic(&dir.join("fundamental.txt"), r.geometry.f.to_text().as_bytes())?;
    if cfg.viz_every > 0 {
        write_atomic(&dir.join("viz.ppm"), &visualization(img1, img2, &r.line_pairs, cfg.viz_every))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<(Vector3<f64>, u8)>,
    /// True when cameras are only known up to a projective transformation.
    pub projective: bool,
}

impl PointCloud {
    pub fn to_ply(&self) -> String {
        let mut s = String::from("ply\nformat ascii 1.0\n");
        if self.projective {
            s.push_str("comment projective reconstruction (no intrinsics)\n");
        }
        s.push_str(&format!(
            "element vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
            self.points.len()
        ));
        for (p, g) in &self.points {
            s.push_str(&format!("{:.6} {:.6} {:.6} {g} {g} {g}\n", p.x, p.y, p.z));
        }
        s
    }
}

/// Triangulates the unflagged matches, colored by image-1 intensity.
pub fn reconstruct(img1: &GrayImage, r: &MatchResult) -> PointCloud {
    let points = r
        .matches
        .par_iter()
        .filter(|m| !m.flags.any())
        .filter_map(|m| {
            let t = triangulate(&r.cameras.p1, &r.cameras.p2, &m.p1.into(), &m.p2.into()).ok()?;
            let finite = t.point.iter().all(|v| v.is_finite());
            let gray = img1.sample_bilinear(m.p1).ok()?.round() as u8;
            finite.then_some((t.point, gray))
        })
        .collect();
    PointCloud { points, projective: !r.calibrated }
}

/// Writes img1.pgm, img2.pgm, intrinsics.txt, fundamental.txt and gt.txt.
pub fn write_scene(dir: &Path, scene: &SyntheticScene, gt_stride: usize) -> Result<(), PipelineError> {
    write_atomic(&dir.join("img1.pgm"), &encode_pgm(&scene.img1))?;
    write_atomic(&dir.join("img2.pgm"), &encode_pgm(&scene.img2))?;
    write_atomic(&dir.join("intrinsics.txt"), scene.k.to_text().as_bytes())?;
    write_atomic(&dir.join("fundamental.txt"), scene.f_true.to_text().as_bytes())?;
    write_atomic(&dir.join("gt.txt"), scene.gt_text(gt_stride).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub scene: SyntheticScene,
    pub result: MatchResult,
    pub metrics: MetricsReport,
}

/// Generates the configured scene, matches it with known intrinsics and
/// scores the surviving matches.
pub fn evaluate(kind: SceneKind, cfg: &PipelineConfig) -> Result<EvalOutcome, PipelineError> {
    let scene = default_scene(kind, cfg.seed)?;
    let inputs = MatchInputs { intrinsics: Some(scene.k), ..MatchInputs::default() };
    let result = run_match(&scene.img1, &scene.img2, &inputs, cfg)?;
    let metrics = precision_recall(&result.survivors(), &scene, cfg.eval_tol)?;
    Ok(EvalOutcome { scene, result, metrics })
}

pub fn metrics_csv(kind: SceneKind, m: &MetricsReport) -> String {
    format!("scene,{}\n{kind},{}\n", MetricsReport::CSV_HEADER, m.csv_row())
}

/// `evaluate` plus all match outputs, metrics.csv and metrics.txt.
pub fn run_eval(cfg: &PipelineConfig) -> Result<EvalOutcome, PipelineError> {
    let out = evaluate(cfg.eval_scene, cfg)?;
    let dir = &cfg.out_dir;
    write_match_outputs(dir, &out.scene.img1, &out.scene.img2, &out.result, cfg)?;
    write_atomic(&dir.join("metrics.csv"), metrics_csv(cfg.eval_scene, &out.metrics).as_bytes())?;
    let text = format!("eval.scene = {}\neval.tol = {}\n{}{}", cfg.eval_scene, cfg.eval_tol, out.metrics, out.result.report);
    write_atomic(&dir.join("metrics.txt"), text.as_bytes())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn empty_cloud_is_valid_ply() {
        let c = PointCloud { points: vec![], projective: true };
        let ply = c.to_ply();
        assert!(ply.contains("element vertex 0") && ply.contains("comment projective") && ply.ends_with("end_header\n"));
    }
}
