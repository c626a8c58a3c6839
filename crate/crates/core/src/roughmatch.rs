//! Edge key points along a sampled line, their windowed Fourier descriptors,
//! and order-preserving alignment of two key-point sequences.

use num_complex::Complex64;
use thiserror::Error;

use crate::imgio::Point2;
use crate::sweep::SampledLine;

#[derive(Debug, Error, PartialEq)]
pub enum RoughError {
    #[error("profile has {0} samples, at least 3 are needed")]
    ProfileTooShort(usize),
    #[error("window {window} exceeds four times the profile length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("descriptor lengths differ ({0} vs {1})")]
    Arity(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughParams {
    /// Minimum derivative magnitude of a key point (intensity units per sample).
    pub threshold: f64,
    /// Fourier window length, a power of two.
    pub window: usize,
    pub harmonics: usize,
    pub sigma: f64,
    pub gap_penalty: f64,
}

impl Default for RoughParams {
    fn default() -> Self {
        Self {
            threshold: 10.0,
            window: 16,
            harmonics: 4,
            sigma: 1.0,
            gap_penalty: 0.25,
        }
    }
}

impl RoughParams {
    pub fn validate(&self) -> Result<(), RoughError> {
        let bad = |m: &str| Err(RoughError::Parameter(m.into()));
        if !(self.threshold > 0.0) {
            return bad("threshold must be positive");
        }
        if !self.window.is_power_of_two() || self.window < 2 {
            return bad("window must be a power of two ≥ 2");
        }
        if self.harmonics > self.window / 2 {
            return bad("harmonics must not exceed window / 2");
        }
        if !(self.sigma > 0.0) || !(self.gap_penalty > 0.0) {
            return bad("sigma and gap_penalty must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPoint {
    pub index: usize,
    pub position: Point2,
    pub magnitude: f64,
    pub descriptor: Vec<f64>,
}

/// Key points of one line, by ascending index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoughMatchSet {
    pub keypoints: Vec<KeyPoint>,
}

impl RoughMatchSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Alignment {
    /// `(index into rm1, index into rm2)`, increasing in both.
    pub pairs: Vec<(usize, usize)>,
    pub score: f64,
}

/// `|a[i−1] − a[i+1]| / 2`, zero at both ends.
pub fn derivative(values: &[f64]) -> Result<Vec<f64>, RoughError> {
    let n = values.len();
    if n < 3 {
        return Err(RoughError::ProfileTooShort(n));
    }
    let mut da = vec![0.0; n];
    for i in 1..n - 1 {
        da[i] = ((values[i - 1] - values[i + 1]) / 2.0).abs();
    }
    Ok(da)
}

const NMS_RADIUS: usize = 2;

/// Indices with `da ≥ threshold` that are maxima of `da` within ±2 samples
/// (equal values go to the smaller index).
pub fn keypoint_indices(da: &[f64], threshold: f64) -> Vec<usize> {
    (0..da.len())
        .filter(|&i| {
            da[i] >= threshold
                && (i.saturating_sub(NMS_RADIUS)..(i + NMS_RADIUS + 1).min(da.len()))
                    .all(|j| j == i || da[j] < da[i] || (da[j] == da[i] && j > i))
        })
        .collect()
}

/// Key points of `line` with their descriptors.
pub fn extract_keypoints(line: &SampledLine, da: &[f64], params: &RoughParams) -> Result<RoughMatchSet, RoughError> {
    params.validate()?;
    let keypoints = keypoint_indices(da, params.threshold)
        .into_iter()
        .map(|i| {
            Ok(KeyPoint {
                index: i,
                position: line.points[i],
                magnitude: da[i],
                descriptor: fourier_descriptor(&line.intensities, i, params.window, params.harmonics)?,
            })
        })
        .collect::<Result<_, RoughError>>()?;
    Ok(RoughMatchSet { keypoints })
}

/// In-place iterative radix-2 FFT, `X_k = Σ x_n e^{−2πikn/N}`.
pub fn fft(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -std::f64::consts::TAU / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = Complex64::from_polar(1.0, ang * k as f64);
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
            }
        }
        len <<= 1;
    }
}

/// `(a0, a1, b1, …, ah, bh)` of the `window` samples centred on `center`, so
/// that `x_n = a0 + Σ a_k cos(2πkn/N) + b_k sin(2πkn/N)`. Profile ends are
/// replicated.
pub fn fourier_descriptor(values: &[f64], center: usize, window: usize, harmonics: usize) -> Result<Vec<f64>, RoughError> {
    if values.is_empty() || window > 4 * values.len() {
        return Err(RoughError::WindowTooLarge { window, len: values.len() });
    }
    if !window.is_power_of_two() || harmonics > window / 2 {
        return Err(RoughError::Parameter(format!("window {window}, harmonics {harmonics}")));
    }
    let last = values.len() as isize - 1;
    let start = center as isize - (window / 2) as isize;
    let mut buf: Vec<Complex64> = (0..window as isize)
        .map(|k| Complex64::new(values[(start + k).clamp(0, last) as usize], 0.0))
        .collect();
    fft(&mut buf);
    let n = window as f64;
    let mut d = Vec::with_capacity(2 * harmonics + 1);
    d.push(buf[0].re / n);
    for k in 1..=harmonics {
        let scale = if 2 * k == window { 1.0 } else { 2.0 };
        d.push(scale * buf[k].re / n);
        d.push(-scale * buf[k].im / n);
    }
    Ok(d)
}

/// Euclidean distance with the DC term weighted by 0.5.
pub fn descriptor_distance(d1: &[f64], d2: &[f64]) -> Result<f64, RoughError> {
    if d1.len() != d2.len() {
        return Err(RoughError::Arity(d1.len(), d2.len()));
    }
    Ok(d1
        .iter()
        .zip(d2)
        .enumerate()
        .map(|(i, (a, b))| {
            let w = if i == 0 { 0.5 } else { 1.0 };
            (w * (a - b)).powi(2)
        })
        .sum::<f64>()
        .sqrt())
}

/// `exp(−d/σ) − 0.5`: positive for similar descriptors, negative otherwise.
pub fn match_score(d1: &[f64], d2: &[f64], sigma: f64) -> Result<f64, RoughError> {
    Ok((-descriptor_distance(d1, d2)? / sigma).exp() - 0.5)
}

/// Global alignment maximizing the summed match scores minus `gap_penalty`
/// per unmatched key point. Trace-back prefers a match, then skipping the
/// rm2 key point, so ties resolve towards smaller rm2 indices.
pub fn align_keypoints_dp(rm1: &RoughMatchSet, rm2: &RoughMatchSet, gap_penalty: f64, sigma: f64) -> Result<Alignment, RoughError> {
    if !(gap_penalty > 0.0) || !(sigma > 0.0) {
        return Err(RoughError::Parameter("gap_penalty and sigma must be positive".into()));
    }
    let (n, m) = (rm1.len(), rm2.len());
    let mut score = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            score[i * m + j] = match_score(&rm1.keypoints[i].descriptor, &rm2.keypoints[j].descriptor, sigma)?;
        }
    }
    let w = m + 1;
    let mut d = vec![0.0; (n + 1) * w];
    for j in 1..=m {
        d[j] = d[j - 1] - gap_penalty;
    }
    for i in 1..=n {
        d[i * w] = d[(i - 1) * w] - gap_penalty;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + score[(i - 1) * m + j - 1];
            let up = d[(i - 1) * w + j] - gap_penalty;
            let left = d[i * w + j - 1] - gap_penalty;
            d[i * w + j] = diag.max(up).max(left);
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && d[(i - 1) * w + j - 1] + score[(i - 1) * m + j - 1] == here {
            pairs.push((i - 1, j - 1));
            i -= 1;
            j -= 1;
        } else if j > 0 && d[i * w + j - 1] - gap_penalty == here {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    pairs.reverse();
    Ok(Alignment {
        pairs,
        score: d[n * w + m],
    })
}
