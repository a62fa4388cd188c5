//! Reference implementations written from the definitions, sharing no code
//! with the crate beyond plain data types.

use wayfinder_core::perception::east::EastTensors;

pub type Pt = (f64, f64);

/// Decodes every cell by hand: local box corners relative to the anchor,
/// rotated by a 2×2 matrix built from theta, translated to the anchor.
pub fn brute_force_east(t: &EastTensors, threshold: f64) -> Vec<([Pt; 4], f64)> {
    let mut out = Vec::new();
    let stride = t.stride as f64;
    for row in 0..t.h {
        for col in 0..t.w {
            let score = t.score[row * t.w + col];
            if score < threshold {
                continue;
            }
            let base = (row * t.w + col) * 5;
            let (top, right, bottom, left, theta) = (
                t.geometry[base],
                t.geometry[base + 1],
                t.geometry[base + 2],
                t.geometry[base + 3],
                t.geometry[base + 4],
            );
            let rot = [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
            let local: [Pt; 4] = [(-left, -top), (right, -top), (right, bottom), (-left, bottom)];
            let anchor = (col as f64 * stride, row as f64 * stride);
            let corners = local.map(|(u, v)| {
                (
                    anchor.0 + rot[0][0] * u + rot[0][1] * v,
                    anchor.1 + rot[1][0] * u + rot[1][1] * v,
                )
            });
            out.push((corners, score));
        }
    }
    out
}

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn shoelace(p: &[Pt]) -> f64 {
    let n = p.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    (s / 2.0).abs()
}

fn inside_convex(p: Pt, poly: &[Pt; 4]) -> bool {
    let signs: Vec<f64> = (0..4).map(|i| cross(poly[i], poly[(i + 1) % 4], p)).collect();
    signs.iter().all(|s| *s >= -1e-12) || signs.iter().all(|s| *s <= 1e-12)
}

fn segment_intersection(a: Pt, b: Pt, c: Pt, d: Pt) -> Option<Pt> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = ((c.0 - a.0) * s.1 - (c.1 - a.1) * s.0) / denom;
    let u = ((c.0 - a.0) * r.1 - (c.1 - a.1) * r.0) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((a.0 + t * r.0, a.1 + t * r.1))
}

/// Intersection-over-union of two convex quads from the point set
/// {vertices inside the other quad} ∪ {edge crossings}, ordered by angle.
pub fn reference_iou(a: &[Pt; 4], b: &[Pt; 4]) -> f64 {
    let (aa, ab) = (shoelace(a), shoelace(b));
    if aa <= 0.0 || ab <= 0.0 {
        return 0.0;
    }
    let mut pts: Vec<Pt> = Vec::new();
    pts.extend(a.iter().copied().filter(|p| inside_convex(*p, b)));
    pts.extend(b.iter().copied().filter(|p| inside_convex(*p, a)));
    for i in 0..4 {
        for j in 0..4 {
            if let Some(p) = segment_intersection(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4]) {
                pts.push(p);
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    pts.sort_by(|p, q| (p.1 - cy).atan2(p.0 - cx).total_cmp(&(q.1 - cy).atan2(q.0 - cx)));
    pts.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
    let inter = if pts.len() < 3 { 0.0 } else { shoelace(&pts) };
    let union = aa + ab - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefRegion {
    pub quad: [Pt; 4],
    pub score: f64,
}

/// Locality merge then greedy NMS, spelled out step by step.
pub fn reference_lanms(input: &[RefRegion], thr: f64) -> Vec<RefRegion> {
    // step 1: walk in order, folding each region into the running one
    // while they overlap enough
    let mut merged: Vec<RefRegion> = Vec::new();
    let mut running: Option<RefRegion> = None;
    for r in input {
        running = match running {
            None => Some(r.clone()),
            Some(cur) => {
                if reference_iou(&cur.quad, &r.quad) >= thr {
                    let total = cur.score + r.score;
                    let (wc, wr) = if total > 0.0 {
                        (cur.score / total, r.score / total)
                    } else {
                        (0.5, 0.5)
                    };
                    let mut quad = cur.quad;
                    for (k, q) in quad.iter_mut().enumerate() {
                        *q = (
                            wc * cur.quad[k].0 + wr * r.quad[k].0,
                            wc * cur.quad[k].1 + wr * r.quad[k].1,
                        );
                    }
                    Some(RefRegion {
                        quad,
                        score: total.min(1.0),
                    })
                } else {
                    merged.push(cur);
                    Some(r.clone())
                }
            }
        };
    }
    if let Some(cur) = running {
        merged.push(cur);
    }

    // step 2: repeatedly take the best remaining (earliest on ties) and
    // discard everything overlapping it
    let mut pool: Vec<RefRegion> = merged;
    let mut kept = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            if pool[i].score > pool[best].score {
                best = i;
            }
        }
        let winner = pool.remove(best);
        pool.retain(|r| reference_iou(&winner.quad, &r.quad) < thr);
        kept.push(winner);
    }
    kept
}

/// Classic dynamic-programming Levenshtein distance over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            dp[i][j] = (dp[i - 1][j] + 1).min(dp[i][j - 1] + 1).min(dp[i - 1][j - 1] + sub);
        }
    }
    dp[a.len()][b.len()]
}

/// Spoken number for a distance, computed from the unit definitions.
pub fn expected_quantity(distance_m: f64, stairs: bool, feet: bool) -> u64 {
    let raw = if stairs {
        distance_m / 0.7
    } else if feet {
        distance_m * 3.2808
    } else {
        distance_m
    };
    let n = raw.round();
    if n < 1.0 {
        1
    } else {
        n as u64
    }
}
