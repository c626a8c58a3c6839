//! Sparse seed correspondences: Harris corners with normalized patch
//! descriptors and mutual nearest-neighbour matching, or matches read from
//! a text file produced by an external detector.

use rayon::prelude::*;
use thiserror::Error;

use crate::imgio::{GrayImage, Point2};

/// Side of the square descriptor patch.
pub const PATCH: usize = 11;
const HALF: usize = PATCH / 2;
/// Smallest image side the detector accepts.
pub const MIN_SIDE: usize = PATCH + 2;

#[derive(Debug, Error, PartialEq)]
pub enum SeedError {
    #[error("image is {width}x{height}, detector needs at least {MIN_SIDE}x{MIN_SIDE}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub position: Point2,
    pub score: f64,
    /// Mean-subtracted, unit-norm `PATCH × PATCH` patch in row-major order.
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedMatch {
    pub p1: Point2,
    pub p2: Point2,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams {
    pub k: f64,
    pub response_thresh: f64,
    pub nms_radius: usize,
    pub max_features: usize,
}

impl Default for HarrisParams {
    fn default() -> Self {
        Self {
            k: 0.04,
            response_thresh: 1000.0,
            nms_radius: 4,
            max_features: 2000,
        }
    }
}

fn clamped(img: &GrayImage, x: isize, y: isize) -> f64 {
    let x = x.clamp(0, img.width() as isize - 1) as usize;
    let y = y.clamp(0, img.height() as isize - 1) as usize;
    img.get(x, y)
}

/// Harris response `det(M) − k·trace(M)²` of the box-smoothed structure tensor
/// of Sobel gradients (scaled by 1/8), with replicated borders.
pub fn harris_response(img: &GrayImage, k: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| clamped(img, x as isize + dx, y as isize + dy);
            let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1)) / 8.0;
            let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1)) / 8.0;
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    let boxed = |m: &[f64], x: usize, y: usize| {
        let mut s = 0.0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                s += m[yy * w + xx];
            }
        }
        s / 9.0
    };
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b, c) = (boxed(&ixx, x, y), boxed(&iyy, x, y), boxed(&ixy, x, y));
            out[y * w + x] = a * b - c * c - k * (a + b) * (a + b);
        }
    }
    out
}

fn patch_descriptor(img: &GrayImage, x: usize, y: usize) -> Option<Vec<f64>> {
    let mut d = Vec::with_capacity(PATCH * PATCH);
    for yy in y - HALF..=y + HALF {
        for xx in x - HALF..=x + HALF {
            d.push(img.get(xx, yy));
        }
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter_mut().for_each(|v| *v -= mean);
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= norm);
    Some(d)
}

/// Harris corners above `response_thresh` that are maxima within a square of
/// radius `nms_radius`, strongest first. Features whose patch would leave the
/// image are skipped.
pub fn detect_harris(img: &GrayImage, params: &HarrisParams) -> Result<Vec<Feature>, SeedError> {
    let (w, h) = (img.width(), img.height());
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(SeedError::ImageTooSmall { width: w, height: h });
    }
    if !(0.02..=0.1).contains(&params.k) {
        return Err(SeedError::Parameter(format!("k = {} outside [0.02, 0.1]", params.k)));
    }
    if params.nms_radius < 1 {
        return Err(SeedError::Parameter("nms_radius must be at least 1".into()));
    }
    let resp = harris_response(img, params.k);
    let r = params.nms_radius as isize;
    let margin = HALF + 1;
    let mut cands: Vec<(usize, usize, f64)> = (margin..h - margin)
        .into_par_iter()
        .flat_map_iter(|y| {
            let resp = &resp;
            (margin..w - margin).filter_map(move |x| {
                let v = resp[y * w + x];
                if v <= params.response_thresh {
                    return None;
                }
                let here = y * w + x;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (xx, yy) = (x as isize + dx, y as isize + dy);
                        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize || (dx == 0 && dy == 0) {
                            continue;
                        }
                        let j = yy as usize * w + xx as usize;
                        if resp[j] > v || (resp[j] == v && j < here) {
                            return None;
                        }
                    }
                }
                Some((x, y, v))
            })
        })
        .collect();
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));
    Ok(cands
        .into_iter()
        .filter_map(|(x, y, score)| {
            patch_descriptor(img, x, y).map(|descriptor| Feature {
                position: Point2::new(x as f64, y as f64),
                score,
                descriptor,
            })
        })
        .take(params.max_features)
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn best_index(row: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in row.iter().enumerate() {
        if best.map_or(true, |b| v > row[b]) {
            best = Some(j);
        }
    }
    best
}

/// Pairs that are each other's best cosine match with similarity at least
/// `min_similarity`, sorted by descending similarity.
pub fn match_mutual_nn(a: &[Feature], b: &[Feature], min_similarity: f64) -> Vec<SeedMatch> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let sim: Vec<Vec<f64>> = a
        .par_iter()
        .map(|fa| b.iter().map(|fb| dot(&fa.descriptor, &fb.descriptor)).collect())
        .collect();
    let best_b: Vec<usize> = sim.iter().map(|row| best_index(row).unwrap()).collect();
    let best_a: Vec<usize> = (0..b.len())
        .map(|j| best_index(&sim.iter().map(|row| row[j]).collect::<Vec<_>>()).unwrap())
        .collect();
    let mut out: Vec<(usize, SeedMatch)> = best_b
        .iter()
        .enumerate()
        .filter(|&(i, &j)| best_a[j] == i && sim[i][j] >= min_similarity)
        .map(|(i, &j)| {
            (
                i,
                SeedMatch {
                    p1: a[i].position,
                    p2: b[j].position,
                    similarity: sim[i][j].clamp(-1.0, 1.0),
                },
            )
        })
        .collect();
    out.sort_by(|x, y| y.1.similarity.total_cmp(&x.1.similarity).then(x.0.cmp(&y.0)));
    out.into_iter().map(|(_, m)| m).collect()
}

/// Parses `x1 y1 x2 y2 [similarity]` lines; blank lines and `#` comments are
/// skipped. Line numbers in errors are 1-based.
pub fn load_external_matches(bytes: &[u8]) -> Result<Vec<SeedMatch>, SeedError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SeedError::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        reason: "invalid UTF-8".into(),
    })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| SeedError::Parse { line: n + 1, reason };
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("not a number: {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != 4 && vals.len() != 5 {
            return Err(err(format!("expected 4 or 5 fields, found {}", vals.len())));
        }
        let similarity = vals.get(4).copied().unwrap_or(1.0);
        if !(-1.0..=1.0).contains(&similarity) {
            return Err(err(format!("similarity {similarity} outside [-1, 1]")));
        }
        out.push(SeedMatch {
            p1: Point2::new(vals[0], vals[1]),
            p2: Point2::new(vals[2], vals[3]),
            similarity,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<f64> = (0..(w / 4 + 2) * (h / 4 + 2)).map(|_| rng.gen_range(0.0..255.0)).collect();
        let bw = w / 4 + 2;
        GrayImage::from_fn(w, h, |x, y| blocks[(y / 4) * bw + x / 4]).unwrap()
    }

    // direct evaluation of the response from its definition, no shared code
    fn response_oracle(img: &GrayImage, k: f64, x: usize, y: usize) -> f64 {
        let px = |x: isize, y: isize| {
            img.get(
                x.clamp(0, img.width() as isize - 1) as usize,
                y.clamp(0, img.height() as isize - 1) as usize,
            )
        };
        let sobel = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for oy in -1..=1isize {
            for ox in -1..=1isize {
                let (cx, cy) = (x as isize + ox, y as isize + oy);
                let (cx, cy) = (cx.clamp(0, img.width() as isize - 1), cy.clamp(0, img.height() as isize - 1));
                let (mut gx, mut gy) = (0.0, 0.0);
                for j in 0..3 {
                    for i in 0..3 {
                        let v = px(cx + i as isize - 1, cy + j as isize - 1);
                        gx += sobel[j][i] * v;
                        gy += sobel[i][j] * v;
                    }
                }
                gx /= 8.0;
                gy /= 8.0;
                a += gx * gx / 9.0;
                b += gy * gy / 9.0;
                c += gx * gy / 9.0;
            }
        }
        a * b - c * c - k * (a + b).powi(2)
    }

    #[test]
    fn response_matches_direct_definition() {
        let img = textured(24, 20, 1);
        let resp = harris_response(&img, 0.05);
        for y in 0..20 {
            for x in 0..24 {
                let o = response_oracle(&img, 0.05, x, y);
                assert!((resp[y * 24 + x] - o).abs() <= 1e-9 * o.abs().max(1.0));
            }
        }
    }

    #[test]
    fn uniform_image_has_no_features() {
        let img = GrayImage::filled(40, 40, 77.0).unwrap();
        assert!(detect_harris(&img, &HarrisParams::default()).unwrap().is_empty());
    }

    #[test]
    fn single_bright_pixel() {
        let img = GrayImage::from_fn(41, 41, |x, y| if (x, y) == (20, 20) { 255.0 } else { 0.0 }).unwrap();
        let feats = detect_harris(&img, &HarrisParams::default()).unwrap();
        let near: Vec<_> = feats.iter().filter(|f| f.position.dist(&Point2::new(20.0, 20.0)) <= 1.0).collect();
        assert_eq!(near.len(), 1, "{feats:?}");
        // brute-force argmax of the oracle response
        let mut best = (0, 0, f64::NEG_INFINITY);
        for y in 0..41 {
            for x in 0..41 {
                let v = response_oracle(&img, 0.04, x, y);
                if v > best.2 {
                    best = (x, y, v);
                }
            }
        }
        assert_eq!(feats[0].position, Point2::new(best.0 as f64, best.1 as f64));
    }

    #[test]
    fn straight_edge_has_no_features() {
        let img = GrayImage::from_fn(40, 40, |x, _| if x < 20 { 0.0 } else { 255.0 }).unwrap();
        assert!(detect_harris(&img, &HarrisParams::default()).unwrap().is_empty());
    }

    #[test]
    fn small_image_and_bad_parameters() {
        let img = GrayImage::filled(12, 30, 0.0).unwrap();
        assert!(matches!(detect_harris(&img, &HarrisParams::default()), Err(SeedError::ImageTooSmall { .. })));
        let img = GrayImage::filled(30, 30, 0.0).unwrap();
        let p = HarrisParams { k: 0.2, ..Default::default() };
        assert!(matches!(detect_harris(&img, &p), Err(SeedError::Parameter(_))));
    }

    #[test]
    fn descriptors_are_unit_norm() {
        let img = textured(80, 60, 2);
        let feats = detect_harris(&img, &HarrisParams::default()).unwrap();
        assert!(!feats.is_empty());
        for f in &feats {
            assert!((dot(&f.descriptor, &f.descriptor) - 1.0).abs() < 1e-12);
            assert!(f.score > 0.0);
        }
    }

    #[test]
    fn self_matching_is_identity() {
        let img = textured(80, 60, 3);
        let feats = detect_harris(&img, &HarrisParams::default()).unwrap();
        let m = match_mutual_nn(&feats, &feats, 0.5);
        assert_eq!(m.len(), feats.len());
        assert!(m.iter().all(|s| s.p1 == s.p2));
        assert!(match_mutual_nn(&feats, &[], 0.0).is_empty());
    }

    #[test]
    fn shifted_copy_matches() {
        let base = textured(101, 81, 4);
        let shifted = GrayImage::from_fn(100, 80, |x, y| base.get(x + 1, y)).unwrap();
        let base = GrayImage::from_fn(100, 80, |x, y| base.get(x, y)).unwrap();
        let p = HarrisParams { max_features: 10, ..Default::default() };
        let a = detect_harris(&base, &p).unwrap();
        let b = detect_harris(&shifted, &HarrisParams { max_features: 40, ..p }).unwrap();
        assert_eq!(a.len(), 10);
        let m = match_mutual_nn(&a, &b, 0.5);
        let correct = m
            .iter()
            .filter(|s| (s.p2.x - (s.p1.x - 1.0)).abs() < 1e-9 && s.p2.y == s.p1.y)
            .count();
        assert!(correct >= 8, "{correct} correct of {}", m.len());
    }

    #[test]
    fn external_match_parsing() {
        let m = load_external_matches(b"1.5 2.0 3.5 4.0").unwrap();
        assert_eq!(
            m,
            vec![SeedMatch { p1: Point2::new(1.5, 2.0), p2: Point2::new(3.5, 4.0), similarity: 1.0 }]
        );
        assert!(load_external_matches(b"").unwrap().is_empty());
        assert_eq!(
            load_external_matches(b"1 2 three 4"),
            Err(SeedError::Parse { line: 1, reason: "not a number: \"three\"".into() })
        );
        let m = load_external_matches(b"# header\n\n1 2 3 4 0.5\n").unwrap();
        assert_eq!(m[0].similarity, 0.5);
        assert!(matches!(load_external_matches(b"1 2 3 4\n1 2 3\n"), Err(SeedError::Parse { line: 2, .. })));
    }

    fn random_features(n: usize, seed: u64) -> Vec<Feature> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut d: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm = dot(&d, &d).sqrt();
                d.iter_mut().for_each(|v| *v /= norm);
                Feature { position: Point2::new(i as f64, seed as f64), score: 1.0, descriptor: d }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn mutual_nn_is_symmetric_and_injective(na in 0usize..25, nb in 0usize..25, seed in 0u64..1000) {
            let a = random_features(na, seed);
            let b = random_features(nb, seed + 7919);
            let ab = match_mutual_nn(&a, &b, -1.0);
            let ba = match_mutual_nn(&b, &a, -1.0);
            let mut x: Vec<_> = ab.iter().map(|m| (m.p1.x as i64, m.p2.x as i64)).collect();
            let mut y: Vec<_> = ba.iter().map(|m| (m.p2.x as i64, m.p1.x as i64)).collect();
            x.sort();
            y.sort();
            prop_assert_eq!(&x, &y);
            let mut firsts: Vec<_> = x.iter().map(|p| p.0).collect();
            let mut seconds: Vec<_> = x.iter().map(|p| p.1).collect();
            firsts.dedup();
            seconds.sort();
            seconds.dedup();
            prop_assert_eq!(firsts.len(), x.len());
            prop_assert_eq!(seconds.len(), x.len());
        }

        #[test]
        fn detection_is_translation_equivariant(seed in 0u64..200, dx in 0usize..6, dy in 0usize..6) {
            let big = textured(90, 90, seed);
            let a = GrayImage::from_fn(80, 80, |x, y| big.get(x + 6, y + 6)).unwrap();
            let b = GrayImage::from_fn(80, 80, |x, y| big.get(x + 6 - dx, y + 6 - dy)).unwrap();
            let p = HarrisParams { max_features: usize::MAX, ..Default::default() };
            let fa = detect_harris(&a, &p).unwrap();
            let fb = detect_harris(&b, &p).unwrap();
            let interior = |q: &Point2, lo: f64, hi: f64| q.x >= lo && q.y >= lo && q.x <= hi && q.y <= hi;
            for f in fa.iter().filter(|f| interior(&f.position, 15.0, 60.0)) {
                let want = Point2::new(f.position.x + dx as f64, f.position.y + dy as f64);
                prop_assert!(fb.iter().any(|g| g.position == want), "missing {:?}", want);
            }
        }
    }
}
