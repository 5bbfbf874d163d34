//! Planar oriented-box geometry.
//!
//! Everything here works on rectangles lying on the picking plane: corner
//! expansion, a separating-axis overlap predicate, convex clipping for IoU,
//! and the polygon distance used for inter-box clearance.

use serde::{Deserialize, Serialize};

/// Tolerance on cross products when classifying points against clip edges.
pub const CROSS_EPS: f64 = 1e-12;

pub type Point = [f64; 2];

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_deg(angle: f64) -> f64 {
    // In-range angles pass through untouched so that decoding is lossless.
    if (-180.0..180.0).contains(&angle) {
        return angle;
    }
    (angle + 180.0).rem_euclid(360.0) - 180.0
}

/// Signed orientation difference between two rectangles, in `[-90, 90)`.
///
/// A rectangle turned by 180 degrees is the same rectangle, so differences
/// are taken modulo a half turn.
pub fn rect_angle_diff(a_deg: f64, b_deg: f64) -> f64 {
    (a_deg - b_deg + 90.0).rem_euclid(180.0) - 90.0
}

/// Oriented box on the plane: center, extents and counterclockwise rotation
/// about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbPose {
    pub cx: f64,
    pub cy: f64,
    pub rot_deg: f64,
    pub width: f64,
    pub height: f64,
}

impl ObbPose {
    pub fn new(cx: f64, cy: f64, rot_deg: f64, width: f64, height: f64) -> Self {
        Self {
            cx,
            cy,
            rot_deg: wrap_deg(rot_deg),
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.rot_deg.is_finite()
    }

    pub fn center(&self) -> Point {
        [self.cx, self.cy]
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Unit vectors of the local x (width) and y (height) axes.
    pub fn axes(&self) -> (Point, Point) {
        let (s, c) = self.rot_deg.to_radians().sin_cos();
        ([c, s], [-s, c])
    }

    /// Same pose with both extents grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            width: self.width + 2.0 * margin,
            height: self.height + 2.0 * margin,
            ..*self
        }
    }

    /// Maps a world point into the box frame (origin at the center).
    pub fn to_local(&self, p: Point) -> Point {
        let (ux, uy) = self.axes();
        let d = [p[0] - self.cx, p[1] - self.cy];
        [dot(d, ux), dot(d, uy)]
    }

    /// Maps a box-frame offset into world coordinates.
    pub fn to_world(&self, local: Point) -> Point {
        let (ux, uy) = self.axes();
        [
            self.cx + local[0] * ux[0] + local[1] * uy[0],
            self.cy + local[0] * ux[1] + local[1] * uy[1],
        ]
    }

    pub fn contains_point(&self, p: Point) -> bool {
        let l = self.to_local(p);
        l[0].abs() <= self.width / 2.0 && l[1].abs() <= self.height / 2.0
    }
}

/// Axis-aligned rectangle in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn contains_polygon(&self, poly: &[Point]) -> bool {
        poly.iter().all(|&p| self.contains(p))
    }

    /// Maps a world point to `[0, 1]^2` coordinates of this rectangle.
    pub fn normalize(&self, p: Point) -> Point {
        [
            (p[0] - self.x_min) / self.width(),
            (p[1] - self.y_min) / self.height(),
        ]
    }
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Corners of the box in counterclockwise order, starting from the local
/// `(-w/2, -h/2)` corner.
pub fn obb_corners(pose: &ObbPose) -> [Point; 4] {
    let hw = pose.width / 2.0;
    let hh = pose.height / 2.0;
    [
        pose.to_world([-hw, -hh]),
        pose.to_world([hw, -hh]),
        pose.to_world([hw, hh]),
        pose.to_world([-hw, hh]),
    ]
}

fn project(poly: &[Point], axis: Point) -> (f64, f64) {
    poly.iter()
        .map(|&p| dot(p, axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

/// Separating-axis test over the four edge normals. Touching boundaries
/// count as intersecting.
pub fn obb_intersect(a: &ObbPose, b: &ObbPose) -> bool {
    let pa = obb_corners(a);
    let pb = obb_corners(b);
    let (ax, ay) = a.axes();
    let (bx, by) = b.axes();
    for axis in [ax, ay, bx, by] {
        let (a_lo, a_hi) = project(&pa, axis);
        let (b_lo, b_hi) = project(&pb, axis);
        if a_hi < b_lo - CROSS_EPS || b_hi < a_lo - CROSS_EPS {
            return false;
        }
    }
    true
}

/// Shoelace area of a simple polygon (positive for counterclockwise order).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    twice / 2.0
}

fn segment_line_intersection(p: Point, q: Point, e0: Point, e1: Point) -> Point {
    let d1 = cross(e0, e1, p);
    let d2 = cross(e0, e1, q);
    let t = d1 / (d1 - d2);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman clipping of `subject` against a convex counterclockwise
/// `clip` polygon.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let inside = |p: Point| cross(e0, e1, p) >= -CROSS_EPS;
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => output.push(cur),
                (true, false) => output.push(segment_line_intersection(prev, cur, e0, e1)),
                (false, true) => {
                    output.push(segment_line_intersection(prev, cur, e0, e1));
                    output.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    output
}

fn pose_key(p: &ObbPose) -> [f64; 5] {
    [p.cx, p.cy, p.rot_deg, p.width, p.height]
}

/// Area of the overlap region of two boxes.
pub fn intersection_area(a: &ObbPose, b: &ObbPose) -> f64 {
    // Fixed argument order keeps the result exactly symmetric.
    let (a, b) = match pose_key(a).partial_cmp(&pose_key(b)) {
        Some(std::cmp::Ordering::Greater) => (b, a),
        _ => (a, b),
    };
    polygon_area(&clip_convex(&obb_corners(a), &obb_corners(b))).max(0.0)
}

/// Intersection over union of two boxes; zero for touching boxes.
pub fn obb_iou(a: &ObbPose, b: &ObbPose) -> f64 {
    if !obb_intersect(a, b) {
        return 0.0;
    }
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(ap, ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - c[0]).hypot(p[1] - c[1])
}

/// Minimum Euclidean distance between two boxes; zero when they intersect.
pub fn obb_distance(a: &ObbPose, b: &ObbPose) -> f64 {
    if obb_intersect(a, b) {
        return 0.0;
    }
    let pa = obb_corners(a);
    let pb = obb_corners(b);
    let mut best = f64::INFINITY;
    for (from, to) in [(&pa, &pb), (&pb, &pa)] {
        for &p in from.iter() {
            for i in 0..4 {
                best = best.min(point_segment_distance(p, to[i], to[(i + 1) % 4]));
            }
        }
    }
    best
}
