//! Occlusion and consistency filters: sequence validity between aligned key
//! points and depth continuity along a line.

use std::fmt;

use nalgebra::Vector3;
use thiserror::Error;

use crate::densematch::DenseMatch;
use crate::epigeo::{triangulate, ProjectiveCameraPair};
use crate::roughmatch::{Alignment, RoughMatchSet};

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error("alignment pair {pair:?} out of range for key-point sets of sizes {n1} and {n2}")]
    IndexOutOfRange { pair: (usize, usize), n1: usize, n2: usize },
    #[error("alignment is not strictly increasing at position {0}")]
    NotIncreasing(usize),
}

/// One flag per segment between consecutive aligned pairs: valid iff neither
/// key-point sequence skips a key point there.
pub fn sequence_validity(al: &Alignment, rm1: &RoughMatchSet, rm2: &RoughMatchSet) -> Result<Vec<bool>, ValidateError> {
    for &(i, j) in &al.pairs {
        if i >= rm1.len() || j >= rm2.len() {
            return Err(ValidateError::IndexOutOfRange { pair: (i, j), n1: rm1.len(), n2: rm2.len() });
        }
    }
    al.pairs
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let ((i, j), (i2, j2)) = (w[0], w[1]);
            if i2 <= i || j2 <= j {
                return Err(ValidateError::NotIncreasing(k + 1));
            }
            Ok(i2 == i + 1 && j2 == j + 1)
        })
        .collect()
}

/// Largest accepted depth change between consecutive matches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthJump {
    Absolute(f64),
    /// Fraction of the predecessor's depth.
    Relative(f64),
}

impl DepthJump {
    fn exceeded(&self, prev: f64, cur: f64) -> bool {
        let diff = (cur - prev).abs();
        match *self {
            DepthJump::Absolute(t) => diff > t,
            DepthJump::Relative(r) => diff > r * prev.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCheck {
    /// Triangulated point in camera-1 coordinates, when triangulation succeeded.
    pub point: Option<Vector3<f64>>,
    pub depth: Option<f64>,
    pub invalid: bool,
}

/// Depth-continuity check along one line: each match is compared with the
/// nearest preceding match that triangulated. Failed or non-positive-depth
/// triangulations are flagged.
pub fn depth_validity(matches: &[DenseMatch], cams: &ProjectiveCameraPair, jump: DepthJump) -> Vec<DepthCheck> {
    let mut prev: Option<f64> = None;
    matches
        .iter()
        .map(|m| {
            let tri = triangulate(&cams.p1, &cams.p2, &m.p1.into(), &m.p2.into())
                .ok()
                .filter(|t| t.depth1 > 0.0 && t.depth2 > 0.0);
            let Some(t) = tri else {
                return DepthCheck { point: None, depth: None, invalid: true };
            };
            let invalid = prev.is_some_and(|p| jump.exceeded(p, t.depth1));
            prev = Some(t.depth1);
            DepthCheck { point: Some(t.point), depth: Some(t.depth1), invalid }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ValidityReport {
    pub total: usize,
    pub sv_invalid: usize,
    pub sp_invalid: usize,
    pub cost_rejected: usize,
    pub survivors: usize,
}

impl ValidityReport {
    pub fn from_matches(matches: &[DenseMatch]) -> Self {
        let mut r = Self { total: matches.len(), ..Self::default() };
        for m in matches {
            r.sv_invalid += m.flags.sv_invalid as usize;
            r.sp_invalid += m.flags.sp_invalid as usize;
            r.cost_rejected += m.flags.cost_rejected as usize;
            r.survivors += !m.flags.any() as usize;
        }
        r
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "matches.total = {}", self.total)?;
        writeln!(f, "matches.sv_invalid = {}", self.sv_invalid)?;
        writeln!(f, "matches.sp_invalid = {}", self.sp_invalid)?;
        writeln!(f, "matches.cost_rejected = {}", self.cost_rejected)?;
        writeln!(f, "matches.survivors = {}", self.survivors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densematch::MatchFlags;
    use crate::epigeo::{CameraIntrinsics, RelativePose};
    use crate::imgio::Point2;
    use crate::roughmatch::KeyPoint;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    fn rm(n: usize) -> RoughMatchSet {
        RoughMatchSet {
            keypoints: (0..n)
                .map(|i| KeyPoint { index: i, position: Point2::new(i as f64, 0.0), magnitude: 1.0, descriptor: vec![] })
                .collect(),
        }
    }

    fn al(pairs: &[(usize, usize)]) -> Alignment {
        Alignment { pairs: pairs.to_vec(), score: 0.0 }
    }

    #[test]
    fn identity_alignment_all_valid() {
        let v = sequence_validity(&al(&[(0, 0), (1, 1), (2, 2), (3, 3)]), &rm(4), &rm(4)).unwrap();
        assert_eq!(v, vec![true; 3]);
    }

    #[test]
    fn extra_keypoints_in_second_view() {
        // two more key points between the aligned pair (1,1) and (2,4)
        let v = sequence_validity(&al(&[(0, 0), (1, 1), (2, 4), (3, 5)]), &rm(4), &rm(6)).unwrap();
        assert_eq!(v, vec![true, false, true]);
    }

    #[test]
    fn keypoint_hidden_in_second_view() {
        let v = sequence_validity(&al(&[(0, 0), (2, 1), (3, 2)]), &rm(4), &rm(3)).unwrap();
        assert_eq!(v, vec![false, true]);
        assert!(sequence_validity(&al(&[(0, 5)]), &rm(4), &rm(3)).is_err());
    }

    fn cams() -> (ProjectiveCameraPair, CameraIntrinsics, Vector3<f64>) {
        let k = CameraIntrinsics::new(500.0, 500.0, 200.0, 150.0).unwrap();
        let t = Vector3::new(-1.0, 0.0, 0.0);
        let pose = RelativePose::new(Matrix3::identity(), t).unwrap();
        (ProjectiveCameraPair::calibrated(&k, &k, &pose), k, t)
    }

    fn match_at(k: &CameraIntrinsics, t: &Vector3<f64>, x: Vector3<f64>) -> DenseMatch {
        let proj = |v: Vector3<f64>| {
            let p = k.matrix() * v;
            Point2::new(p.x / p.z, p.y / p.z)
        };
        DenseMatch { line: 0, p1: proj(x), p2: proj(x + t), cost: 0.0, flags: MatchFlags::default() }
    }

    #[test]
    fn fronto_parallel_plane_has_no_jumps() {
        let (c, k, t) = cams();
        let ms: Vec<_> = (0..50).map(|i| match_at(&k, &t, Vector3::new(-1.0 + 0.04 * i as f64, 0.2, 6.0))).collect();
        let checks = depth_validity(&ms, &c, DepthJump::Relative(0.1));
        assert!(checks.iter().all(|d| !d.invalid && (d.depth.unwrap() - 6.0).abs() < 1e-3));
    }

    #[test]
    fn two_planes_flag_the_crossing() {
        let (c, k, t) = cams();
        let ms: Vec<_> = (0..40)
            .map(|i| {
                let z = if i < 20 { 5.0 } else { 10.0 };
                match_at(&k, &t, Vector3::new(-1.0 + 0.05 * i as f64, 0.1, z))
            })
            .collect();
        for jump in [DepthJump::Absolute(1.0), DepthJump::Relative(0.1)] {
            let flagged: Vec<usize> = depth_validity(&ms, &c, jump).iter().enumerate().filter(|(_, d)| d.invalid).map(|(i, _)| i).collect();
            assert_eq!(flagged, vec![20]);
        }
        assert!(depth_validity(&ms, &c, DepthJump::Absolute(f64::INFINITY)).iter().all(|d| !d.invalid));
    }

    #[test]
    fn report_reconciles() {
        let mut ms = vec![DenseMatch { line: 0, p1: Point2::new(0.0, 0.0), p2: Point2::new(0.0, 0.0), cost: 0.0, flags: MatchFlags::default() }; 5];
        ms[1].flags.sv_invalid = true;
        ms[1].flags.cost_rejected = true;
        ms[3].flags.sp_invalid = true;
        let r = ValidityReport::from_matches(&ms);
        assert_eq!(r, ValidityReport { total: 5, sv_invalid: 1, sp_invalid: 1, cost_rejected: 1, survivors: 3 });
        assert!(r.to_string().contains("matches.survivors = 3"));
    }

    proptest! {
        #[test]
        fn flags_monotone_in_threshold(depths in prop::collection::vec(2.0f64..20.0, 1..40), a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let (c, k, t) = cams();
            let ms: Vec<_> = depths.iter().enumerate().map(|(i, &z)| match_at(&k, &t, Vector3::new(0.02 * i as f64, 0.0, z))).collect();
            let (lo, hi) = (a.min(b), a.max(b));
            let fl = depth_validity(&ms, &c, DepthJump::Relative(lo));
            let fh = depth_validity(&ms, &c, DepthJump::Relative(hi));
            prop_assert!(!fl[0].invalid);
            for (x, y) in fl.iter().zip(&fh) {
                prop_assert!(x.invalid || !y.invalid);
            }
        }

        #[test]
        fn sequence_validity_ignores_descriptors(steps in prop::collection::vec((1usize..3, 1usize..3), 0..10)) {
            let mut pairs = vec![(0, 0)];
            for (di, dj) in &steps {
                let (i, j) = *pairs.last().unwrap();
                pairs.push((i + di, j + dj));
            }
            let (n1, n2) = (pairs.last().unwrap().0 + 1, pairs.last().unwrap().1 + 1);
            let v = sequence_validity(&al(&pairs), &rm(n1), &rm(n2)).unwrap();
            let want: Vec<bool> = steps.iter().map(|&(a, b)| a == 1 && b == 1).collect();
            prop_assert_eq!(v, want);
        }
    }
}
