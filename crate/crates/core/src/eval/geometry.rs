//! Exact oriented-rectangle overlap via convex polygon clipping.

use crate::grasp::GraspRectangle;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("rectangle has non-positive area")]
    DegenerateRectangle,
}

/// Shoelace area of a simple polygon (absolute value).
fn polygon_area(points: &[[f64; 2]]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..points.len() {
        let [x0, y0] = points[i];
        let [x1, y1] = points[(i + 1) % points.len()];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs() / 2.0
}

/// Sutherland-Hodgman clip of a convex `subject` polygon against a convex
/// `clip` polygon given in counter-clockwise order.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = inside(cur) >= 0.0;
            let prev_in = inside(prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p0: [f64; 2], p1: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let d2 = [b[0] - a[0], b[1] - a[1]];
    let denom = d1[0] * d2[1] - d1[1] * d2[0];
    if denom == 0.0 {
        return p0;
    }
    let t = ((a[0] - p0[0]) * d2[1] - (a[1] - p0[1]) * d2[0]) / denom;
    [p0[0] + t * d1[0], p0[1] + t * d1[1]]
}

/// Corner list in counter-clockwise orientation.
fn ccw_corners(rect: &GraspRectangle) -> [[f64; 2]; 4] {
    let mut corners = rect.corners();
    // shoelace sign: negative means clockwise in image coordinates
    let mut twice = 0.0;
    for i in 0..4 {
        let [x0, y0] = corners[i];
        let [x1, y1] = corners[(i + 1) % 4];
        twice += x0 * y1 - x1 * y0;
    }
    if twice < 0.0 {
        corners.reverse();
    }
    corners
}

/// Intersection area of two oriented rectangles.
pub fn intersection_area(a: &GraspRectangle, b: &GraspRectangle) -> f64 {
    let clipped = clip_convex(&ccw_corners(a), &ccw_corners(b));
    polygon_area(&clipped)
}

/// Jaccard index (intersection over union) of two oriented rectangles.
///
/// Identical rectangles short-circuit to exactly 1.0; everything else runs
/// through convex clipping, with the result clamped into [0, 1].
pub fn jaccard(a: &GraspRectangle, b: &GraspRectangle) -> Result<f64, GeometryError> {
    if a.area() <= 0.0 || b.area() <= 0.0 {
        return Err(GeometryError::DegenerateRectangle);
    }
    if a == b {
        return Ok(1.0);
    }
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
