//! Dense correspondences between consecutive aligned key points, using a
//! sampling-insensitive intensity dissimilarity.

use std::fmt;

use thiserror::Error;

use crate::imgio::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum DenseError {
    #[error("sub-profile has {0} samples, at least 2 are needed")]
    TooShort(usize),
    #[error("cannot shrink a sub-profile of {from} samples to {to}")]
    Shrink { from: usize, to: usize },
    #[error("points and values differ in length")]
    Mismatch,
}

/// Contiguous slice of a sampled line, endpoints included.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubProfile {
    pub points: Vec<Point2>,
    pub values: Vec<f64>,
}

impl SubProfile {
    pub fn new(points: Vec<Point2>, values: Vec<f64>) -> Result<Self, DenseError> {
        if points.len() != values.len() {
            return Err(DenseError::Mismatch);
        }
        Ok(Self { points, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPair {
    pub s1: SubProfile,
    pub s2: SubProfile,
    pub valid: bool,
}

/// Which dissimilarity formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostMode {
    /// `max{0, I − I_max, I_min − I}`: zero inside the interval.
    #[default]
    Interval,
    /// `max{0, I − I_min, I_max − I}`, kept for comparison runs.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct MatchFlags {
    pub sv_invalid: bool,
    pub sp_invalid: bool,
    pub cost_rejected: bool,
}

impl MatchFlags {
    pub fn any(&self) -> bool {
        self.sv_invalid || self.sp_invalid || self.cost_rejected
    }
}

impl fmt::Display for MatchFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.sv_invalid, "sv_invalid"),
            (self.sp_invalid, "sp_invalid"),
            (self.cost_rejected, "cost_rejected"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if names.is_empty() {
            f.write_str("-")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

impl std::str::FromStr for MatchFlags {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut flags = MatchFlags::default();
        if s == "-" {
            return Ok(flags);
        }
        for name in s.split(',') {
            match name {
                "sv_invalid" => flags.sv_invalid = true,
                "sp_invalid" => flags.sp_invalid = true,
                "cost_rejected" => flags.cost_rejected = true,
                other => return Err(format!("unknown flag {other:?}")),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseMatch {
    pub line: usize,
    pub p1: Point2,
    pub p2: Point2,
    pub cost: f64,
    pub flags: MatchFlags,
}

impl DenseMatch {
    /// `line_index x1 y1 x2 y2 cost flags`
    pub fn to_line(&self) -> String {
        format!(
            "{} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
            self.line, self.p1.x, self.p1.y, self.p2.x, self.p2.y, self.cost, self.flags
        )
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 7 {
            return Err(format!("expected 7 fields, found {}", t.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        Ok(Self {
            line: t[0].parse().map_err(|e| format!("{:?}: {e}", t[0]))?,
            p1: Point2::new(num(t[1])?, num(t[2])?),
            p2: Point2::new(num(t[3])?, num(t[4])?),
            cost: num(t[5])?,
            flags: t[6].parse()?,
        })
    }
}

/// Resamples `p` at `k·(m−1)/(n−1)`, interpolating values and coordinates.
pub fn interpolate_profile(p: &SubProfile, n: usize) -> Result<SubProfile, DenseError> {
    let m = p.len();
    if m < 2 {
        return Err(DenseError::TooShort(m));
    }
    if n < m {
        return Err(DenseError::Shrink { from: m, to: n });
    }
    if n == m {
        return Ok(p.clone());
    }
    let mut out = SubProfile {
        points: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
    };
    for k in 0..n {
        if k == n - 1 {
            out.points.push(p.points[m - 1]);
            out.values.push(p.values[m - 1]);
            continue;
        }
        let pos = (k * (m - 1)) as f64 / (n - 1) as f64;
        let i = (pos.floor() as usize).min(m - 2);
        let f = pos - i as f64;
        out.points.push(p.points[i].lerp(&p.points[i + 1], f));
        out.values.push(p.values[i] + f * (p.values[i + 1] - p.values[i]));
    }
    Ok(out)
}

/// `(I_min, I_max)` over the sample and its two half-sample neighbours; a
/// missing neighbour at either end contributes the sample itself.
pub fn bt_bounds(values: &[f64], i: usize) -> (f64, f64) {
    let c = values[i];
    let minus = if i > 0 { (values[i - 1] + c) / 2.0 } else { c };
    let plus = if i + 1 < values.len() { (values[i + 1] + c) / 2.0 } else { c };
    (minus.min(c).min(plus), minus.max(c).max(plus))
}

pub fn dissimilarity(bounds: (f64, f64), iy: f64, mode: CostMode) -> f64 {
    let (lo, hi) = bounds;
    match mode {
        CostMode::Interval => (iy - hi).max(lo - iy).max(0.0),
        CostMode::Literal => (iy - lo).max(hi - iy).max(0.0),
    }
}

/// Symmetric cost of pairing sample `k` of `a` with sample `k` of `b`.
pub fn symmetric_cost(a: &[f64], b: &[f64], k: usize, mode: CostMode) -> f64 {
    dissimilarity(bt_bounds(a, k), b[k], mode).min(dissimilarity(bt_bounds(b, k), a[k], mode))
}

/// Pairs sample `k` of both sub-profiles after stretching the shorter one.
/// Emits `max(|s1|, |s2|)` matches, flagging costs above `reject_thresh`.
pub fn dense_match_segment(
    pair: &SegmentPair,
    line: usize,
    reject_thresh: f64,
    mode: CostMode,
) -> Result<Vec<DenseMatch>, DenseError> {
    let n = pair.s1.len().max(pair.s2.len());
    let s1 = interpolate_profile(&pair.s1, n)?;
    let s2 = interpolate_profile(&pair.s2, n)?;
    Ok((0..n)
        .map(|k| {
            let cost = symmetric_cost(&s1.values, &s2.values, k, mode);
            DenseMatch {
                line,
                p1: s1.points[k],
                p2: s2.points[k],
                cost,
                flags: MatchFlags {
                    sv_invalid: !pair.valid,
                    sp_invalid: false,
                    cost_rejected: cost > reject_thresh,
                },
            }
        })
        .collect())
}
