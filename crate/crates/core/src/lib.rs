//! Dense two-view matching along corresponding epipolar lines.
//!
//! The pipeline runs seed matching, robust fundamental-matrix estimation, an
//! epipolar-line sweep, key-point alignment by dynamic programming, dense
//! interpolated matching, validity filtering and triangulation. A synthetic
//! benchmark with exact ground truth measures precision and recall.

pub mod config;
pub mod densematch;
pub mod epigeo;
pub mod evalbench;
pub mod imgio;
pub mod pipeline;
pub mod roughmatch;
pub mod seedmatch;
pub mod sweep;
pub mod validate;
