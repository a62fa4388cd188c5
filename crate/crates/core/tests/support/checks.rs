//! Comparisons against the oracles, returning a description of the first
//! disagreement instead of panicking so the acceptance run can report it.

use wayfinder_core::perception::east::{east_decode, EastTensors};
use wayfinder_core::perception::geometry::Quad;
use wayfinder_core::perception::nms::{locality_aware_nms, locality_merge};
use wayfinder_core::perception::TextRegion;

use super::oracles::{brute_force_east, reference_iou, reference_lanms, RefRegion};

pub const VERTEX_TOL: f64 = 1e-6;
pub const IOU_TOL: f64 = 1e-9;

pub fn pts(q: &Quad) -> [(f64, f64); 4] {
    q.0.map(|p| (p.x, p.y))
}

fn close(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> bool {
    a.iter()
        .zip(b)
        .all(|(p, q)| (p.0 - q.0).abs() <= VERTEX_TOL && (p.1 - q.1).abs() <= VERTEX_TOL)
}

pub fn check_east(t: &EastTensors, threshold: f64) -> Result<(), String> {
    let got = east_decode(t, threshold).map_err(|e| e.to_string())?;
    let want = brute_force_east(t, threshold);
    let live = t.score.iter().filter(|s| **s >= threshold).count();
    if got.len() != live || want.len() != live {
        return Err(format!(
            "{} regions, {} reference, {live} cells above threshold",
            got.len(),
            want.len()
        ));
    }
    for (i, (g, (wq, ws))) in got.iter().zip(&want).enumerate() {
        if g.score != *ws || !close(&pts(&g.quad), wq) {
            return Err(format!("region {i}: {:?} vs reference {wq:?}", pts(&g.quad)));
        }
    }
    Ok(())
}

pub fn check_nms(input: &[TextRegion], thr: f64) -> Result<(), String> {
    let out = locality_aware_nms(input, thr);
    let reference: Vec<RefRegion> = input
        .iter()
        .map(|r| RefRegion {
            quad: pts(&r.quad),
            score: r.score,
        })
        .collect();
    let want = reference_lanms(&reference, thr);
    if out.len() != want.len() {
        return Err(format!("{} kept, reference keeps {}", out.len(), want.len()));
    }
    for (o, w) in out.iter().zip(&want) {
        if (o.score - w.score).abs() > 1e-12 || !close(&pts(&o.quad), &w.quad) {
            return Err(format!("kept {:?}, reference {:?}", pts(&o.quad), w.quad));
        }
    }
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            let v = reference_iou(&pts(&out[i].quad), &pts(&out[j].quad));
            if v >= thr + IOU_TOL {
                return Err(format!("kept boxes {i} and {j} overlap with IoU {v}"));
            }
        }
    }
    if locality_aware_nms(&out, thr) != out {
        return Err("second pass changed the output".into());
    }
    for cand in locality_merge(input, thr) {
        if out.contains(&cand) {
            continue;
        }
        let justified = out
            .iter()
            .any(|k| k.score >= cand.score && reference_iou(&pts(&k.quad), &pts(&cand.quad)) >= thr - IOU_TOL);
        if !justified {
            return Err(format!(
                "{:?} suppressed without a stronger overlapping box",
                pts(&cand.quad)
            ));
        }
    }
    Ok(())
}
