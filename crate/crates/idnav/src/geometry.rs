//! Minimal 2D primitives for ray casting and collision queries.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn from_heading_deg(deg: f64) -> Vec2 {
        let r = deg.to_radians();
        Vec2::new(r.cos(), r.sin())
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn midpoint(&self) -> Vec2 {
        Vec2::new((self.a.x + self.b.x) / 2.0, (self.a.y + self.b.y) / 2.0)
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }
}

/// Distance along a unit-direction ray to the segment, if hit.
pub fn ray_segment_distance(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-12 {
        return None; // Parallel (including collinear) rays miss.
    }
    let ao = seg.a - origin;
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Shortest distance from a point to a segment.
pub fn point_segment_distance(p: Vec2, seg: &Segment) -> f64 {
    let e = seg.b - seg.a;
    let len2 = e.dot(e);
    if len2 == 0.0 {
        return p.distance(seg.a);
    }
    let t = ((p - seg.a).dot(e) / len2).clamp(0.0, 1.0);
    p.distance(seg.a + e * t)
}

/// Parameter t in [0, 1] along the move p0->p1 where it crosses the segment.
pub fn crossing_parameter(p0: Vec2, p1: Vec2, seg: &Segment) -> Option<f64> {
    let d = p1 - p0;
    let e = seg.b - seg.a;
    let denom = d.cross(e);
    if denom.abs() < 1e-12 {
        return None;
    }
    let ao = seg.a - p0;
    let t = ao.cross(e) / denom;
    let s = ao.cross(d) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}
