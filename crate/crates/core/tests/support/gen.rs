//! Seeded random inputs shared by the property tests and the acceptance run.

use std::f64::consts::FRAC_PI_2;

use rand::rngs::StdRng;
use rand::Rng;
use wayfinder_core::perception::east::{CellGeometry, EastTensors};
use wayfinder_core::perception::geometry::{Point, Quad};
use wayfinder_core::perception::TextRegion;

/// Up to 16×16 cells; about a third above 0.8, theta zero for a quarter of
/// the live cells and otherwise anywhere in [-pi/2, pi/2].
pub fn east_tensors(rng: &mut StdRng) -> EastTensors {
    let h = rng.random_range(1..=16);
    let w = rng.random_range(1..=16);
    let stride = *[1u32, 4, 8].get(rng.random_range(0..3)).unwrap();
    let mut t = EastTensors::zeros(h, w, stride);
    for y in 0..h {
        for x in 0..w {
            let score = if rng.random_bool(0.35) {
                rng.random_range(0.8..=1.0)
            } else {
                rng.random_range(0.0..0.8)
            };
            let theta = if rng.random_bool(0.25) {
                0.0
            } else {
                rng.random_range(-FRAC_PI_2..=FRAC_PI_2)
            };
            let mut d = || rng.random_range(0.0..40.0);
            let g = CellGeometry {
                d_top: d(),
                d_right: d(),
                d_bottom: d(),
                d_left: d(),
                theta,
            };
            t.set_cell(x, y, score, g);
        }
    }
    t
}

/// Rotated rectangle, clockwise on screen.
pub fn rotated_box(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Quad {
    let (s, c) = theta.sin_cos();
    let local = [
        (-w / 2.0, -h / 2.0),
        (w / 2.0, -h / 2.0),
        (w / 2.0, h / 2.0),
        (-w / 2.0, h / 2.0),
    ];
    Quad(local.map(|(u, v)| Point::new(cx + u * c - v * s, cy + u * s + v * c)))
}

/// Up to `max` boxes clustered in a small field so that overlaps are common.
pub fn regions(rng: &mut StdRng, max: usize) -> Vec<TextRegion> {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| TextRegion {
            quad: rotated_box(
                rng.random_range(0.0..40.0),
                rng.random_range(0.0..40.0),
                rng.random_range(4.0..30.0),
                rng.random_range(4.0..20.0),
                rng.random_range(-0.6..0.6),
            ),
            score: (rng.random_range(1..=20) as f64) / 20.0,
            text: None,
        })
        .collect()
}
