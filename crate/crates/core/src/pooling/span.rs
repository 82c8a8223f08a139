//! Mapping word time intervals onto encoder frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::manifest::{DEFAULT_FRAME_STRIDE_S, DEFAULT_FRAME_WINDOW_S};

/// Window edges closer than this are treated as touching, not overlapping.
pub const BOUNDARY_EPS_S: f64 = 1e-9;

/// Frame geometry of an encoder: frame `i` analyses `[i*stride, i*stride + window)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGrid {
    pub stride_s: f64,
    pub window_s: f64,
}

impl Default for FrameGrid {
    fn default() -> Self {
        FrameGrid {
            stride_s: DEFAULT_FRAME_STRIDE_S,
            window_s: DEFAULT_FRAME_WINDOW_S,
        }
    }
}

impl FrameGrid {
    pub fn new(stride_s: f64, window_s: f64) -> Result<Self> {
        if !(stride_s > 0.0 && stride_s.is_finite()) || !(window_s >= stride_s && window_s.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < stride <= window, got stride {stride_s} window {window_s}"
            )));
        }
        Ok(FrameGrid { stride_s, window_s })
    }

    /// Whether frame `i`'s analysis window overlaps `[start_s, end_s)`.
    pub fn overlaps(&self, i: usize, start_s: f64, end_s: f64) -> bool {
        let lo = i as f64 * self.stride_s;
        let hi = lo + self.window_s;
        lo < end_s - BOUNDARY_EPS_S && hi > start_s + BOUNDARY_EPS_S
    }

    pub fn span(&self, start_s: f64, end_s: f64, n_frames: usize) -> Result<FrameSpan> {
        time_to_frame_span(start_s, end_s, self.stride_s, self.window_s, n_frames)
    }
}

/// Half-open frame range `[first, last)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub first: usize,
    pub last: usize,
}

impl FrameSpan {
    pub fn len(&self) -> usize {
        self.last - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last == self.first
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.first..self.last
    }
}

/// Frames whose analysis window overlaps `[start_s, end_s)`, clamped to
/// `[0, n_frames)`. A word lying entirely past the last frame falls back to
/// the single frame nearest `start_s`.
pub fn time_to_frame_span(
    start_s: f64,
    end_s: f64,
    stride_s: f64,
    window_s: f64,
    n_frames: usize,
) -> Result<FrameSpan> {
    if !(start_s.is_finite() && end_s.is_finite()) || start_s < 0.0 || end_s <= start_s {
        return Err(Error::Interval {
            start: start_s,
            end: end_s,
        });
    }
    let grid = FrameGrid::new(stride_s, window_s)?;
    if n_frames == 0 {
        return Err(Error::Parameter("n_frames must be >= 1".into()));
    }
    let n = n_frames as i64;

    // Closed-form estimate, then settle on the exact predicate at the edges.
    let first_est = ((start_s + BOUNDARY_EPS_S - window_s) / stride_s).floor() as i64 + 1;
    let last_est = ((end_s - BOUNDARY_EPS_S) / stride_s).ceil() as i64;
    let mut first = first_est.clamp(0, n) as usize;
    let mut last = last_est.clamp(0, n) as usize;
    while first > 0 && grid.overlaps(first - 1, start_s, end_s) {
        first -= 1;
    }
    while first < n_frames && first < last && !grid.overlaps(first, start_s, end_s) {
        first += 1;
    }
    while last < n_frames && grid.overlaps(last, start_s, end_s) {
        last += 1;
    }
    while last > first && !grid.overlaps(last - 1, start_s, end_s) {
        last -= 1;
    }

    if first >= last {
        let nearest = ((start_s / stride_s).round() as i64).clamp(0, n - 1) as usize;
        log::warn!(
            "word [{start_s:.3}, {end_s:.3}) s overlaps no frame of {n_frames}; using nearest frame {nearest}"
        );
        return Ok(FrameSpan {
            first: nearest,
            last: nearest + 1,
        });
    }
    Ok(FrameSpan { first, last })
}
