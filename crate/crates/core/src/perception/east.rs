//! Decoding of EAST detector output into rotated text boxes.
//!
//! The detector itself runs outside the gateway. What arrives here is its
//! raw output: a score map and a five-channel geometry map sampled every
//! `stride` pixels of the original image.
//!
//! Geometry layout is row-major and interleaved per cell:
//! `geometry[(y * w + x) * 5 + c]` with channels
//! `[d_top, d_right, d_bottom, d_left, theta]`. Distances are in original
//! image pixels; `theta` is in radians, positive values rotating the box
//! clockwise on screen about the cell anchor `(stride * x, stride * y)`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Point, Quad};
use super::TextRegion;

pub const DEFAULT_STRIDE: u32 = 4;
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.8;
pub const GEOMETRY_CHANNELS: usize = 5;

#[derive(Debug, Error)]
pub enum EastError {
    #[error("input shape error: {0}")]
    InputShape(String),
    #[error("invalid tensor value at cell ({x}, {y}): {reason}")]
    InvalidValue { x: usize, y: usize, reason: String },
    #[error("score threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("reading tensor file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing tensor JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EastTensors {
    pub h: usize,
    pub w: usize,
    #[serde(default = "default_stride")]
    pub stride: u32,
    pub score: Vec<f64>,
    pub geometry: Vec<f64>,
}

fn default_stride() -> u32 {
    DEFAULT_STRIDE
}

/// Geometry of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub d_top: f64,
    pub d_right: f64,
    pub d_bottom: f64,
    pub d_left: f64,
    pub theta: f64,
}

impl EastTensors {
    pub fn zeros(h: usize, w: usize, stride: u32) -> Self {
        EastTensors {
            h,
            w,
            stride,
            score: vec![0.0; h * w],
            geometry: vec![0.0; h * w * GEOMETRY_CHANNELS],
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, EastError> {
        let text = std::fs::read_to_string(path)?;
        let t: EastTensors = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn set_cell(&mut self, x: usize, y: usize, score: f64, g: CellGeometry) {
        let i = y * self.w + x;
        self.score[i] = score;
        self.geometry[i * GEOMETRY_CHANNELS..(i + 1) * GEOMETRY_CHANNELS]
            .copy_from_slice(&[g.d_top, g.d_right, g.d_bottom, g.d_left, g.theta]);
    }

    pub fn score_at(&self, x: usize, y: usize) -> f64 {
        self.score[y * self.w + x]
    }

    pub fn cell(&self, x: usize, y: usize) -> CellGeometry {
        let i = (y * self.w + x) * GEOMETRY_CHANNELS;
        let g = &self.geometry[i..i + GEOMETRY_CHANNELS];
        CellGeometry {
            d_top: g[0],
            d_right: g[1],
            d_bottom: g[2],
            d_left: g[3],
            theta: g[4],
        }
    }

    pub fn validate(&self) -> Result<(), EastError> {
        let cells = self.h * self.w;
        if self.score.len() != cells {
            return Err(EastError::InputShape(format!(
                "score has {} values, expected {}x{} = {cells}",
                self.score.len(),
                self.h,
                self.w
            )));
        }
        if self.geometry.len() != cells * GEOMETRY_CHANNELS {
            return Err(EastError::InputShape(format!(
                "geometry has {} values, expected {}x{}x{GEOMETRY_CHANNELS} = {}",
                self.geometry.len(),
                self.h,
                self.w,
                cells * GEOMETRY_CHANNELS
            )));
        }
        if self.stride == 0 {
            return Err(EastError::InputShape("stride must be positive".into()));
        }
        for y in 0..self.h {
            for x in 0..self.w {
                let bad = |reason: String| EastError::InvalidValue { x, y, reason };
                let s = self.score_at(x, y);
                if !(0.0..=1.0).contains(&s) {
                    return Err(bad(format!("score {s} outside [0, 1]")));
                }
                let g = self.cell(x, y);
                for d in [g.d_top, g.d_right, g.d_bottom, g.d_left] {
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(bad(format!("border distance {d} must be finite and >= 0")));
                    }
                }
                if !(g.theta.is_finite() && g.theta.abs() <= FRAC_PI_2) {
                    return Err(bad(format!("theta {} outside [-pi/2, pi/2]", g.theta)));
                }
            }
        }
        Ok(())
    }
}

/// Rectangle for one cell, rotated by `theta` about its anchor.
pub fn cell_quad(anchor: Point, g: &CellGeometry) -> Quad {
    let offsets = [
        (-g.d_left, -g.d_top),
        (g.d_right, -g.d_top),
        (g.d_right, g.d_bottom),
        (-g.d_left, g.d_bottom),
    ];
    if g.theta == 0.0 {
        return Quad(offsets.map(|(dx, dy)| Point::new(anchor.x + dx, anchor.y + dy)));
    }
    let (sin, cos) = g.theta.sin_cos();
    Quad(offsets.map(|(dx, dy)| Point::new(anchor.x + dx * cos - dy * sin, anchor.y + dx * sin + dy * cos)))
}

/// One region per cell with `score >= score_threshold`, in row-major order.
pub fn east_decode(t: &EastTensors, score_threshold: f64) -> Result<Vec<TextRegion>, EastError> {
    if !(score_threshold > 0.0 && score_threshold < 1.0) {
        return Err(EastError::InvalidThreshold(score_threshold));
    }
    t.validate()?;
    let stride = f64::from(t.stride);
    let mut regions = Vec::new();
    for y in 0..t.h {
        for x in 0..t.w {
            let score = t.score_at(x, y);
            if score < score_threshold {
                continue;
            }
            let anchor = Point::new(stride * x as f64, stride * y as f64);
            regions.push(TextRegion {
                quad: cell_quad(anchor, &t.cell(x, y)),
                score,
                text: None,
            });
        }
    }
    Ok(regions)
}
