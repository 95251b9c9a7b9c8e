//! Exterior data functions `f` fed into harmonic extension.

use serde::{Deserialize, Serialize};

use crate::geometry::{sphere_crossings, Point};

/// Ray-parameter breakpoints of a piecewise-smooth function or set.
pub trait RayCrossings {
    /// Pushes every `t > 0` at which `origin + t*dir` crosses a
    /// discontinuity or kink. `dir` is a unit vector.
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>);
}

/// A function on the exterior of a ball that can be integrated against an
/// exit measure.
pub trait ExteriorData: RayCrossings + Sync {
    fn eval(&self, y: &Point) -> f64;

    /// Lower and upper bounds of the function (may be infinite).
    fn bounds(&self) -> (f64, f64);

    /// Polynomial growth rate at infinity; harmonic extension requires it to
    /// be below `alpha`.
    fn growth_exponent(&self) -> f64 {
        0.0
    }
}

/// Closed-form data family used by the verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DataFn {
    Constant(f64),
    /// `value` on `{y : y·normal > offset}`, zero elsewhere. `normal` is unit.
    HalfSpace {
        normal: Point,
        offset: f64,
        value: f64,
    },
    /// `value` on `{r_in < |y-center| < r_out}`.
    Annulus {
        center: Point,
        r_in: f64,
        r_out: f64,
        value: f64,
    },
    Gaussian {
        center: Point,
        width: f64,
        amplitude: f64,
    },
    /// `min(cap, (|y-center|/scale)^exponent)`; unbounded without a cap.
    RadialPower {
        center: Point,
        scale: f64,
        exponent: f64,
        cap: Option<f64>,
    },
}

impl DataFn {
    /// The same function seen through `z -> offset + s*z`, i.e.
    /// `g(offset + s*z) = f(z)`.
    pub fn transformed(&self, offset: Point, s: f64) -> DataFn {
        let map = |c: &Point| offset + *c * s;
        match self {
            DataFn::Constant(v) => DataFn::Constant(*v),
            DataFn::HalfSpace { normal, offset: t, value } => {
                DataFn::HalfSpace { normal: *normal, offset: normal.dot(&offset) + s * t, value: *value }
            }
            DataFn::Annulus { center, r_in, r_out, value } => {
                DataFn::Annulus { center: map(center), r_in: r_in * s, r_out: r_out * s, value: *value }
            }
            DataFn::Gaussian { center, width, amplitude } => {
                DataFn::Gaussian { center: map(center), width: width * s, amplitude: *amplitude }
            }
            DataFn::RadialPower { center, scale, exponent, cap } => {
                DataFn::RadialPower { center: map(center), scale: scale * s, exponent: *exponent, cap: *cap }
            }
        }
    }

    /// Same function truncated at level `n`.
    pub fn truncated(&self, n: f64) -> DataFn {
        match self {
            DataFn::RadialPower { center, scale, exponent, cap } => DataFn::RadialPower {
                center: *center,
                scale: *scale,
                exponent: *exponent,
                cap: Some(cap.map_or(n, |c| c.min(n))),
            },
            other => other.clone(),
        }
    }
}

impl RayCrossings for DataFn {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        match self {
            DataFn::Constant(_) | DataFn::Gaussian { .. } => {}
            DataFn::HalfSpace { normal, offset, .. } => {
                let rate = normal.dot(dir);
                if rate != 0.0 {
                    let t = (offset - normal.dot(origin)) / rate;
                    if t > 0.0 {
                        out.push(t);
                    }
                }
            }
            DataFn::Annulus { center, r_in, r_out, .. } => {
                sphere_crossings(center, *r_in, origin, dir, out);
                sphere_crossings(center, *r_out, origin, dir, out);
            }
            DataFn::RadialPower { center, scale, exponent, cap } => {
                if let Some(c) = cap {
                    if *exponent != 0.0 && *c > 0.0 {
                        sphere_crossings(center, scale * c.powf(1.0 / exponent), origin, dir, out);
                    }
                }
            }
        }
    }
}

impl ExteriorData for DataFn {
    fn eval(&self, y: &Point) -> f64 {
        match self {
            DataFn::Constant(v) => *v,
            DataFn::HalfSpace { normal, offset, value } => {
                if y.dot(normal) > *offset {
                    *value
                } else {
                    0.0
                }
            }
            DataFn::Annulus { center, r_in, r_out, value } => {
                let r = y.dist(center);
                if r > *r_in && r < *r_out {
                    *value
                } else {
                    0.0
                }
            }
            DataFn::Gaussian { center, width, amplitude } => {
                amplitude * (-y.dist_sq(center) / (2.0 * width * width)).exp()
            }
            DataFn::RadialPower { center, scale, exponent, cap } => {
                let v = (y.dist(center) / scale).powf(*exponent);
                cap.map_or(v, |c| v.min(c))
            }
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            DataFn::Constant(v) => (*v, *v),
            DataFn::HalfSpace { value, .. } | DataFn::Annulus { value, .. } => (value.min(0.0), value.max(0.0)),
            DataFn::Gaussian { amplitude, .. } => (amplitude.min(0.0), amplitude.max(0.0)),
            DataFn::RadialPower { exponent, cap, .. } => {
                let sup = match cap {
                    Some(c) => *c,
                    None if *exponent == 0.0 => 1.0,
                    None => f64::INFINITY,
                };
                (0.0, sup)
            }
        }
    }

    fn growth_exponent(&self) -> f64 {
        match self {
            DataFn::RadialPower { exponent, cap: None, .. } => exponent.max(0.0),
            _ => 0.0,
        }
    }
}

/// Wraps an arbitrary closure as exterior data (no breakpoints, bounds
/// declared by the caller).
pub struct FnData<F> {
    pub f: F,
    pub bounds: (f64, f64),
}

impl<F> RayCrossings for FnData<F> {
    fn crossings(&self, _: &Point, _: &Point, _: &mut Vec<f64>) {}
}

impl<F: Fn(&Point) -> f64 + Sync> ExteriorData for FnData<F> {
    fn eval(&self, y: &Point) -> f64 {
        (self.f)(y)
    }

    fn bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// Six-member nonnegative data family on the exterior of `U(x0, r)`, every
/// member bounded by 1: constant, two half-space indicators, an annulus
/// indicator, a gaussian bump and a decaying radial profile.
pub fn standard_family(d: usize, x0: Point, r: f64) -> Vec<DataFn> {
    let e1 = Point::unit(0);
    let far_dir = if d >= 2 { Point::unit(1) } else { -e1 };
    let unit = [
        DataFn::Constant(1.0),
        DataFn::HalfSpace { normal: e1, offset: 2.0, value: 1.0 },
        DataFn::HalfSpace { normal: -e1, offset: 3.0, value: 1.0 },
        DataFn::Annulus { center: Point::ORIGIN, r_in: 1.5, r_out: 3.0, value: 1.0 },
        DataFn::Gaussian { center: far_dir * 2.0, width: 0.5, amplitude: 1.0 },
        DataFn::RadialPower { center: e1 * 0.5, scale: 1.0, exponent: -1.0, cap: Some(1.0) },
    ];
    unit.iter().map(|f| f.transformed(x0, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_commutes_with_eval() {
        let offset = Point::new(&[0.3, -2.0]);
        let s = 7.5;
        let z = Point::new(&[2.2, 0.4]);
        for f in standard_family(2, Point::ORIGIN, 1.0) {
            let g = f.transformed(offset, s);
            assert!((g.eval(&(offset + z * s)) - f.eval(&z)).abs() < 1e-14, "{f:?}");
        }
    }

    #[test]
    fn crossings_bracket_discontinuities() {
        let f = DataFn::HalfSpace { normal: Point::unit(0), offset: 2.0, value: 1.0 };
        let mut out = vec![];
        f.crossings(&Point::ORIGIN, &Point::unit(0), &mut out);
        assert_eq!(out, vec![2.0]);
        let g = DataFn::RadialPower { center: Point::ORIGIN, scale: 1.0, exponent: 0.5, cap: Some(3.0) };
        out.clear();
        g.crossings(&Point::ORIGIN, &Point::unit(0), &mut out);
        assert!((out[0] - 9.0).abs() < 1e-12);
        assert_eq!(g.eval(&Point::on_axis(100.0)), 3.0);
        assert_eq!(g.growth_exponent(), 0.0);
        let unbounded = DataFn::RadialPower { center: Point::ORIGIN, scale: 1.0, exponent: 0.5, cap: None };
        assert_eq!(unbounded.growth_exponent(), 0.5);
        assert_eq!(unbounded.truncated(3.0), g);
    }

    #[test]
    fn family_is_bounded_by_one() {
        for f in standard_family(1, Point::ORIGIN, 2.0) {
            let (lo, hi) = f.bounds();
            assert!(lo >= 0.0 && hi <= 1.0, "{f:?}");
        }
    }
}
