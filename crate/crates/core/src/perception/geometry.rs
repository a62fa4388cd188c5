//! Planar quadrilaterals in image pixel coordinates (x right, y down).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Four vertices, clockwise on screen: top-left, top-right, bottom-right,
/// bottom-left for an unrotated box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quad(pub [Point; 4]);

impl Quad {
    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Quad([
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point; 4] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    pub fn centroid(&self) -> Point {
        let (sx, sy) = self.0.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / 4.0, sy / 4.0)
    }

    /// Mean length of the two side edges (top-right→bottom-right and
    /// bottom-left→top-left); equals the box height when unrotated.
    pub fn pixel_height(&self) -> f64 {
        let [tl, tr, br, bl] = self.0;
        (tr.distance(br) + bl.distance(tl)) / 2.0
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.0).abs()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Quad {
        Quad(self.0.map(|p| Point::new(p.x + dx, p.y + dy)))
    }
}

/// Signed shoelace area. Positive for clockwise-on-screen order.
pub fn polygon_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum();
    twice / 2.0
}

fn oriented(pts: &[Point]) -> Vec<Point> {
    let mut v = pts.to_vec();
    if polygon_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn line_intersection(a: Point, b: Point, p: Point, q: Point) -> Point {
    let r = b.sub(a);
    let s = q.sub(p);
    let denom = r.cross(s);
    if denom == 0.0 {
        return p;
    }
    let t = p.sub(a).cross(s) / denom;
    Point::new(a.x + t * r.x, a.y + t * r.y)
}

/// Sutherland–Hodgman clipping of `subject` by the convex polygon `clip`.
pub fn clip_polygon(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let clip = oriented(clip);
    let mut output = oriented(subject);
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b.sub(a);
        let inside = |p: Point| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(line_intersection(a, b, prev, cur)),
                (false, true) => {
                    output.push(line_intersection(a, b, prev, cur));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

/// Intersection over union of two convex quads; zero when either is
/// degenerate.
pub fn iou(a: &Quad, b: &Quad) -> f64 {
    let area_a = a.area();
    let area_b = b.area();
    if !(area_a > 0.0 && area_b > 0.0) {
        return 0.0;
    }
    let inter = polygon_area(&clip_polygon(&a.0, &b.0)).abs();
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
