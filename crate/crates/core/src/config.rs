//! Flat `key = value` pipeline configuration with `#` comments.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::densematch::CostMode;
use crate::epigeo::RansacParams;
use crate::evalbench::SceneKind;
use crate::roughmatch::RoughParams;
use crate::seedmatch::HarrisParams;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
}

/// How line-pair directions are reconciled between the two images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// From the signs of the epipoles.
    Signed,
    /// Additionally try the reversed image-2 line and keep the better alignment.
    DpBoth,
}

impl FromStr for Orientation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "signed" => Ok(Orientation::Signed),
            "dp-both" => Ok(Orientation::DpBoth),
            _ => Err("expected signed or dp-both".into()),
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Signed => "signed",
            Orientation::DpBoth => "dp-both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub img1: Option<PathBuf>,
    pub img2: Option<PathBuf>,
    pub intrinsics: Option<PathBuf>,
    pub ext_matches: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub seed: u64,
    pub harris: HarrisParams,
    pub min_similarity: f64,
    pub ransac: RansacParams,
    pub spacing: f64,
    pub exclusion: f64,
    pub orientation: Orientation,
    pub rough: RoughParams,
    pub dense_reject: f64,
    pub cost_mode: CostMode,
    pub depth_jump: f64,
    pub eval_scene: SceneKind,
    pub eval_tol: f64,
    /// Draw every n-th line pair in the visualization; 0 disables it.
    pub viz_every: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            img1: None,
            img2: None,
            intrinsics: None,
            ext_matches: None,
            out_dir: PathBuf::from("out"),
            workers: 0,
            seed: 0,
            harris: HarrisParams::default(),
            min_similarity: 0.8,
            ransac: RansacParams::default(),
            spacing: 1.0,
            exclusion: 3.0,
            orientation: Orientation::Signed,
            rough: RoughParams { sigma: 12.0, gap_penalty: 0.1, ..RoughParams::default() },
            dense_reject: 12.0,
            cost_mode: CostMode::Interval,
            depth_jump: 0.1,
            eval_scene: SceneKind::Plane,
            eval_tol: 2.0,
            viz_every: 40,
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("input.img1", "first image (PGM/PPM)"),
    ("input.img2", "second image (PGM/PPM)"),
    ("input.intrinsics", "intrinsics file shared by both views; empty for projective mode"),
    ("input.ext_matches", "seed matches file (x1 y1 x2 y2 [similarity]); empty to detect"),
    ("output.dir", "output directory"),
    ("workers", "worker threads, 0 = all cores"),
    ("seed", "seed for every random choice"),
    ("harris.k", "Harris trace weight, in [0.02, 0.1]"),
    ("harris.threshold", "minimum Harris response"),
    ("harris.nms_radius", "non-maximum suppression radius (px)"),
    ("harris.max_features", "strongest corners kept per image"),
    ("match.min_similarity", "minimum descriptor cosine similarity of a seed match"),
    ("ransac.max_iters", "RANSAC iteration cap"),
    ("ransac.thresh", "Sampson inlier threshold (px)"),
    ("ransac.confidence", "adaptive early-exit confidence"),
    ("sweep.spacing", "sample spacing along lines (px)"),
    ("sweep.exclusion", "radius kept clear around an epipole (px)"),
    ("sweep.orientation", "signed | dp-both"),
    ("rough.threshold", "minimum derivative of a key point"),
    ("rough.window", "Fourier window length (power of two)"),
    ("rough.harmonics", "Fourier harmonics in a descriptor"),
    ("rough.sigma", "descriptor distance scale of the match score"),
    ("rough.gap_penalty", "cost of leaving a key point unmatched"),
    ("dense.reject", "cost above which a dense match is rejected"),
    ("cost.paper_literal", "use the max{0, I-I_min, I_max-I} dissimilarity (true/false)"),
    ("validate.depth_jump", "largest relative depth change between neighbours"),
    ("eval.scene", "plane | two-plane"),
    ("eval.tol", "ground-truth tolerance (px)"),
    ("viz.every", "draw every n-th line pair; 0 disables viz.ppm"),
];

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl PipelineConfig {
    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        Ok(match key {
            "input.img1" => opt_path(&self.img1),
            "input.img2" => opt_path(&self.img2),
            "input.intrinsics" => opt_path(&self.intrinsics),
            "input.ext_matches" => opt_path(&self.ext_matches),
            "output.dir" => self.out_dir.display().to_string(),
            "workers" => self.workers.to_string(),
            "seed" => self.seed.to_string(),
            "harris.k" => self.harris.k.to_string(),
            "harris.threshold" => self.harris.response_thresh.to_string(),
            "harris.nms_radius" => self.harris.nms_radius.to_string(),
            "harris.max_features" => self.harris.max_features.to_string(),
            "match.min_similarity" => self.min_similarity.to_string(),
            "ransac.max_iters" => self.ransac.max_iters.to_string(),
            "ransac.thresh" => self.ransac.inlier_thresh.to_string(),
            "ransac.confidence" => self.ransac.confidence.to_string(),
            "sweep.spacing" => self.spacing.to_string(),
            "sweep.exclusion" => self.exclusion.to_string(),
            "sweep.orientation" => self.orientation.to_string(),
            "rough.threshold" => self.rough.threshold.to_string(),
            "rough.window" => self.rough.window.to_string(),
            "rough.harmonics" => self.rough.harmonics.to_string(),
            "rough.sigma" => self.rough.sigma.to_string(),
            "rough.gap_penalty" => self.rough.gap_penalty.to_string(),
            "dense.reject" => self.dense_reject.to_string(),
            "cost.paper_literal" => (self.cost_mode == CostMode::Literal).to_string(),
            "validate.depth_jump" => self.depth_jump.to_string(),
            "eval.scene" => self.eval_scene.to_string(),
            "eval.tol" => self.eval_tol.to_string(),
            "viz.every" => self.viz_every.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        }
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "input.img1" => self.img1 = path(value),
            "input.img2" => self.img2 = path(value),
            "input.intrinsics" => self.intrinsics = path(value),
            "input.ext_matches" => self.ext_matches = path(value),
            "output.dir" => self.out_dir = PathBuf::from(value),
            "workers" => self.workers = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "harris.k" => self.harris.k = parse(key, value)?,
            "harris.threshold" => self.harris.response_thresh = parse(key, value)?,
            "harris.nms_radius" => self.harris.nms_radius = parse(key, value)?,
            "harris.max_features" => self.harris.max_features = parse(key, value)?,
            "match.min_similarity" => self.min_similarity = parse(key, value)?,
            "ransac.max_iters" => self.ransac.max_iters = parse(key, value)?,
            "ransac.thresh" => self.ransac.inlier_thresh = parse(key, value)?,
            "ransac.confidence" => self.ransac.confidence = parse(key, value)?,
            "sweep.spacing" => self.spacing = parse(key, value)?,
            "sweep.exclusion" => self.exclusion = parse(key, value)?,
            "sweep.orientation" => self.orientation = parse(key, value)?,
            "rough.threshold" => self.rough.threshold = parse(key, value)?,
            "rough.window" => self.rough.window = parse(key, value)?,
            "rough.harmonics" => self.rough.harmonics = parse(key, value)?,
            "rough.sigma" => self.rough.sigma = parse(key, value)?,
            "rough.gap_penalty" => self.rough.gap_penalty = parse(key, value)?,
            "dense.reject" => self.dense_reject = parse(key, value)?,
            "cost.paper_literal" => {
                self.cost_mode = if parse::<bool>(key, value)? { CostMode::Literal } else { CostMode::Interval }
            }
            "validate.depth_jump" => self.depth_jump = parse(key, value)?,
            "eval.scene" => self.eval_scene = parse(key, value)?,
            "eval.tol" => self.eval_tol = parse(key, value)?,
            "viz.every" => self.viz_every = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: n + 1, reason: format!("expected key = value, got {line:?}") });
            };
            self.set(k.trim(), v.trim())?;
        }
        self.check()
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Range checks that individual setters cannot do.
    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| {
            Err(ConfigError::Value {
                key: key.into(),
                value: self.get(key).unwrap_or_default(),
                reason: reason.into(),
            })
        };
        if !(self.spacing > 0.0) {
            return bad("sweep.spacing", "must be positive");
        }
        if !(self.exclusion >= 0.0) {
            return bad("sweep.exclusion", "must be non-negative");
        }
        if !(self.ransac.inlier_thresh > 0.0) {
            return bad("ransac.thresh", "must be positive");
        }
        if !(self.ransac.confidence > 0.0 && self.ransac.confidence < 1.0) {
            return bad("ransac.confidence", "must lie in (0, 1)");
        }
        if !(self.depth_jump > 0.0) {
            return bad("validate.depth_jump", "must be positive");
        }
        if !(self.eval_tol > 0.0) {
            return bad("eval.tol", "must be positive");
        }
        if let Err(e) = self.rough.validate() {
            return bad("rough.window", &e.to_string());
        }
        Ok(())
    }

    /// Effective settings in the accepted file format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).expect("listed key")));
        }
        out
    }
}
