//! Points, balls and ray helpers in R^d for d <= 3.
//!
//! Points are stored padded to three coordinates; the unused coordinates of a
//! point in dimension `d` are always zero, so norms and inner products can be
//! computed over all three slots.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; MAX_DIM]);

impl Point {
    pub const ORIGIN: Point = Point([0.0; MAX_DIM]);

    /// Builds a point from up to three coordinates.
    pub fn new(coords: &[f64]) -> Point {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates supported");
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point(c)
    }

    pub fn on_axis(value: f64) -> Point {
        Point([value, 0.0, 0.0])
    }

    /// Unit vector along coordinate `i`.
    pub fn unit(i: usize) -> Point {
        let mut c = [0.0; MAX_DIM];
        c[i] = 1.0;
        Point(c)
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        (*self - *other).norm_sq()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn coords(&self, d: usize) -> &[f64] {
        &self.0[..d]
    }

    /// True if every coordinate past the first `d` is zero.
    pub fn lives_in(&self, d: usize) -> bool {
        self.0[d.min(MAX_DIM)..].iter().all(|v| *v == 0.0)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        p * self
    }
}

/// Open ball `U(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Ball> {
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("ball radius must be positive and finite, got {radius}"));
        }
        Ok(Ball { center, radius })
    }

    pub fn centered(radius: f64) -> Result<Ball> {
        Ball::new(Point::ORIGIN, radius)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dist_sq(&self.center) < self.radius * self.radius
    }

    pub fn contains_closed(&self, p: &Point) -> bool {
        p.dist_sq(&self.center) <= self.radius * self.radius
    }

    /// Image under `z -> offset + scale * z`.
    pub fn transformed(&self, offset: Point, scale: f64) -> Ball {
        Ball { center: offset + self.center * scale, radius: self.radius * scale }
    }

    /// Positive ray parameters `t` where `origin + t*dir` crosses this sphere.
    /// `dir` must be a unit vector.
    pub fn ray_crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        sphere_crossings(&self.center, self.radius, origin, dir, out);
    }

    /// Distance from an interior point to the sphere along a unit direction.
    pub fn exit_distance(&self, from: &Point, dir: &Point) -> f64 {
        let rel = *from - self.center;
        let b = rel.dot(dir);
        let c = self.radius * self.radius - rel.norm_sq();
        -b + (b * b + c.max(0.0)).sqrt()
    }
}

pub(crate) fn sphere_crossings(center: &Point, radius: f64, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
    let rel = *origin - *center;
    let b = rel.dot(dir);
    let c = rel.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return;
    }
    let s = disc.sqrt();
    for t in [-b - s, -b + s] {
        if t > 0.0 {
            out.push(t);
        }
    }
}

/// Orthonormal frame whose first vector is a chosen axis; used to orient
/// spherical parametrizations so that peaks sit at the pole.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub axis: Point,
    pub e1: Point,
    pub e2: Point,
}

impl Frame {
    pub fn standard() -> Frame {
        Frame { axis: Point::unit(0), e1: Point::unit(1), e2: Point::unit(2) }
    }

    /// Frame with `axis` along `v` (falls back to the standard frame when `v`
    /// is zero). For `d = 2` the axis is kept in the plane.
    pub fn along(v: &Point, d: usize) -> Frame {
        let n = v.norm();
        if n == 0.0 || d == 1 {
            return Frame::standard();
        }
        let a = *v * (1.0 / n);
        if d == 2 {
            return Frame { axis: a, e1: Point([-a.0[1], a.0[0], 0.0]), e2: Point::unit(2) };
        }
        // Gram-Schmidt against the coordinate axis least aligned with `a`.
        let k = (0..3).min_by(|&i, &j| a.0[i].abs().partial_cmp(&a.0[j].abs()).unwrap()).unwrap();
        let t = Point::unit(k);
        let u = t - a * a.dot(&t);
        let e1 = u * (1.0 / u.norm());
        let e2 = Point([
            a.0[1] * e1.0[2] - a.0[2] * e1.0[1],
            a.0[2] * e1.0[0] - a.0[0] * e1.0[2],
            a.0[0] * e1.0[1] - a.0[1] * e1.0[0],
        ]);
        Frame { axis: a, e1, e2 }
    }
}

/// Surface area of the unit sphere in R^d (counting measure for d = 1).
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let h = d as f64 / 2.0;
            2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
        }
    }
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        let f = Frame::along(&Point::new(&[0.3, -1.2, 0.7]), 3);
        for (a, b) in [(f.axis, f.e1), (f.axis, f.e2), (f.e1, f.e2)] {
            assert!(a.dot(&b).abs() < 1e-14);
        }
        for v in [f.axis, f.e1, f.e2] {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn crossings_of_unit_circle() {
        let b = Ball::centered(1.0).unwrap();
        let mut out = vec![];
        b.ray_crossings(&Point::on_axis(-3.0), &Point::unit(0), &mut out);
        assert_eq!(out, vec![2.0, 4.0]);
        out.clear();
        b.ray_crossings(&Point::ORIGIN, &Point::unit(1), &mut out);
        assert_eq!(out, vec![1.0]);
        assert!((b.exit_distance(&Point::on_axis(0.5), &Point::unit(0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_radius_rejected() {
        assert!(Ball::centered(0.0).is_err());
        assert!(Ball::centered(f64::NAN).is_err());
    }
}
