//! Locality-aware non-maximum suppression for rotated text boxes.
//!
//! Decoded EAST regions arrive in row-major order, so near-duplicates of
//! one word sit next to each other. A single pass merges each region into
//! the running candidate while they overlap (score-weighted vertex
//! average, summed score capped at 1), then ordinary score-descending NMS
//! runs over the much shorter merged list.

use super::geometry::{iou, Point, Quad};
use super::TextRegion;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.2;

/// Score-weighted average of corresponding vertices.
pub fn weighted_merge(a: &TextRegion, b: &TextRegion) -> TextRegion {
    let total = a.score + b.score;
    let (wa, wb) = if total > 0.0 {
        (a.score / total, b.score / total)
    } else {
        (0.5, 0.5)
    };
    let mut vertices = [Point::new(0.0, 0.0); 4];
    for (i, v) in vertices.iter_mut().enumerate() {
        let (pa, pb) = (a.quad.0[i], b.quad.0[i]);
        *v = Point::new(wa * pa.x + wb * pb.x, wa * pa.y + wb * pb.y);
    }
    TextRegion {
        quad: Quad(vertices),
        score: total.min(1.0),
        text: a.text.clone().or_else(|| b.text.clone()),
    }
}

/// Row-major merge pass.
pub fn locality_merge(regions: &[TextRegion], iou_threshold: f64) -> Vec<TextRegion> {
    let mut merged = Vec::new();
    let mut current: Option<TextRegion> = None;
    for region in regions {
        current = Some(match current.take() {
            Some(cand) if iou(&cand.quad, &region.quad) >= iou_threshold => weighted_merge(&cand, region),
            Some(cand) => {
                merged.push(cand);
                region.clone()
            }
            None => region.clone(),
        });
    }
    merged.extend(current);
    merged
}

/// Greedy NMS: keep the highest-scoring region, drop everything overlapping
/// it at or above the threshold, repeat. Equal scores keep input order.
pub fn standard_nms(regions: &[TextRegion], iou_threshold: f64) -> Vec<TextRegion> {
    let mut order: Vec<&TextRegion> = regions.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<TextRegion> = Vec::new();
    for r in order {
        if kept.iter().all(|k| iou(&k.quad, &r.quad) < iou_threshold) {
            kept.push(r.clone());
        }
    }
    kept
}

pub fn locality_aware_nms(regions: &[TextRegion], iou_threshold: f64) -> Vec<TextRegion> {
    standard_nms(&locality_merge(regions, iou_threshold), iou_threshold)
}
