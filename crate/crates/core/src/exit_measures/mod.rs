//! Exit measures `μ_x^U` of balls and derived regions.
//!
//! Quadrature runs in coordinates centered at the ball: `y = c + (r/u) ω`
//! with `u ∈ (0, 1)`. In these coordinates
//!
//! ```text
//! dμ_x^B(y) = C_poisson (1-|ξ|²)^{α/2} u^{α-1} (1-u²)^{-α/2} |ω - uξ|^{-d} du dω,
//! ```
//!
//! `ξ = (x-c)/r`, which is free of `r`. The endpoint singularities at `u = 1`
//! (the sphere) and `u = 0` (infinity) are removed by the substitutions
//! `1-u = s^{2/(2-α)}` and `u = v^{1/α}` on the two halves of `(0, 1)`.

mod axioms;
mod data;
mod sampling;

pub use axioms::{random_nested_configs, verify_axioms, AxiomReport, NestedConfig};
pub use data::{standard_family, DataFn, ExteriorData, FnData, RayCrossings};
pub use sampling::{
    exit_samples, hit_fraction, sample_exit, wos_exit, BallExitSampler, ExitSample, HitEstimate, RegionSpec, RngStream,
    WosConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::{sphere_crossings, Ball, Frame, Point};
use crate::kernels::StableParams;
use crate::quad::{integrate_smoothed, integrate_sphere, integrate_with_breaks, Estimate, QuadratureSpec};

/// `μ_x^B` for a ball `B` and a start point inside it.
#[derive(Clone, Copy, Debug)]
pub struct ExitMeasure {
    d: usize,
    alpha: f64,
    ball: Ball,
    xi: Point,
    prefactor: f64,
}

impl ExitMeasure {
    pub fn new(p: &StableParams, ball: &Ball, x: &Point) -> Result<ExitMeasure> {
        p.check_point(x)?;
        if !ball.contains(x) {
            return domain("start point must lie in the open ball");
        }
        let xi = (*x - ball.center) * (1.0 / ball.radius);
        let prefactor = p.c_poisson() * (1.0 - xi.norm_sq()).powf(p.alpha() / 2.0);
        Ok(ExitMeasure { d: p.d(), alpha: p.alpha(), ball: *ball, xi, prefactor })
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    /// `∫ f dμ_x^B`. `breaks` supply the kinks and jumps of `f` along rays
    /// from the ball center.
    pub fn integrate<F: Fn(&Point) -> f64>(
        &self,
        f: F,
        breaks: &[&dyn RayCrossings],
        quad: &QuadratureSpec,
    ) -> Estimate {
        let frame = Frame::along(&self.xi, self.d);
        let inner = quad.inner();
        let mut evals = 0;
        let mut converged = true;
        let mut est = integrate_sphere(
            self.d,
            &frame,
            |w| {
                let e = self.radial(&f, breaks, w, &inner);
                evals += e.evaluations;
                converged &= e.converged;
                e.value
            },
            quad,
        );
        est.evaluations += evals;
        est.converged &= converged;
        est
    }

    /// `∫ f dμ_x^B` for data from the documented family.
    pub fn integrate_data(&self, f: &dyn ExteriorData, quad: &QuadratureSpec) -> Estimate {
        self.integrate(|y| f.eval(y), &[f as &dyn RayCrossings], quad)
    }

    fn radial<F: Fn(&Point) -> f64>(
        &self,
        f: &F,
        breaks: &[&dyn RayCrossings],
        w: &Point,
        quad: &QuadratureSpec,
    ) -> Estimate {
        let alpha = self.alpha;
        let p = 1.0 / (1.0 - alpha / 2.0);
        let c = self.ball.center;
        let r = self.ball.radius;

        let mut cross = Vec::new();
        for b in breaks {
            b.crossings(&c, w, &mut cross);
        }
        let mut near = vec![0.0];
        let mut far = vec![0.0];
        for t in cross {
            if t > r && t.is_finite() {
                let u = r / t;
                if u > 0.5 {
                    near.push((1.0 - u).powf(1.0 / p));
                } else if u < 0.5 {
                    far.push(u.powf(alpha));
                }
            }
        }
        let s_max = 0.5f64.powf(1.0 / p);
        let v_max = 0.5f64.powf(alpha);
        near.push(s_max);
        far.push(v_max);
        near.sort_by(f64::total_cmp);
        far.sort_by(f64::total_cmp);

        let xi = self.xi;
        let d = self.d as i32;
        let pre = self.prefactor;
        let geom = |u: f64| (*w - xi * u).norm().powi(-d);

        let panels = |f: &mut dyn FnMut(f64) -> f64, br: &[f64]| {
            if br.len() > 2 {
                integrate_smoothed(f, br, quad)
            } else {
                integrate_with_breaks(f, br, quad)
            }
        };
        let a = panels(
            &mut |s: f64| {
                let u = 1.0 - s.powf(p);
                let y = c + *w * (r / u);
                pre * p * u.powf(alpha - 1.0) * (1.0 + u).powf(-alpha / 2.0) * geom(u) * f(&y)
            },
            &near,
        );
        let b = panels(
            &mut |v: f64| {
                let u = v.powf(1.0 / alpha);
                if u == 0.0 {
                    return 0.0;
                }
                let y = c + *w * (r / u);
                let fy = f(&y);
                if fy == 0.0 {
                    return 0.0;
                }
                pre / alpha * (1.0 - u * u).powf(-alpha / 2.0) * geom(u) * fy
            },
            &far,
        );
        Estimate {
            value: a.value + b.value,
            error: a.error + b.error,
            evaluations: a.evaluations + b.evaluations,
            converged: a.converged && b.converged,
        }
    }
}

/// Measurable target sets for exit-mass evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetSet {
    /// Whole complement of the ball.
    Exterior,
    /// `{r_in < |y-center| < r_out}`; `r_out` may be infinite.
    Annulus { center: Point, r_in: f64, r_out: f64 },
    /// `{y·normal > offset}` with unit `normal`.
    HalfSpace { normal: Point, offset: f64 },
    /// Intersection of a half-space and an annulus.
    HalfSpaceAnnulus { normal: Point, offset: f64, center: Point, r_in: f64, r_out: f64 },
    /// Union of axis-aligned cubes `origin + spacing*(k + [0,1)^d)`.
    Cells { origin: Point, spacing: f64, cells: Vec<[i64; 3]> },
}

impl TargetSet {
    pub fn contains(&self, y: &Point) -> bool {
        match self {
            TargetSet::Exterior => true,
            TargetSet::Annulus { center, r_in, r_out } => {
                let r = y.dist(center);
                r > *r_in && r < *r_out
            }
            TargetSet::HalfSpace { normal, offset } => y.dot(normal) > *offset,
            TargetSet::HalfSpaceAnnulus { normal, offset, center, r_in, r_out } => {
                let r = y.dist(center);
                y.dot(normal) > *offset && r > *r_in && r < *r_out
            }
            TargetSet::Cells { origin, spacing, cells } => {
                let rel = (*y - *origin) * (1.0 / spacing);
                let k = [rel.0[0].floor() as i64, rel.0[1].floor() as i64, rel.0[2].floor() as i64];
                cells.contains(&k)
            }
        }
    }

    /// Checks that the set does not meet the closed ball.
    pub fn check_disjoint(&self, ball: &Ball) -> Result<()> {
        let (c, r) = (ball.center, ball.radius);
        let ok = match self {
            TargetSet::Exterior => true,
            TargetSet::Annulus { center, r_in, r_out } => annulus_clear(center, *r_in, *r_out, ball),
            TargetSet::HalfSpace { normal, offset } => c.dot(normal) + r <= *offset,
            TargetSet::HalfSpaceAnnulus { normal, offset, center, r_in, r_out } => {
                c.dot(normal) + r <= *offset || annulus_clear(center, *r_in, *r_out, ball)
            }
            TargetSet::Cells { origin, spacing, cells } => cells.iter().all(|k| {
                // Distance from the ball center to the cube.
                let mut dist2 = 0.0;
                for i in 0..3 {
                    let lo = origin.0[i] + spacing * k[i] as f64;
                    let hi = lo + spacing;
                    let gap = (lo - c.0[i]).max(c.0[i] - hi).max(0.0);
                    dist2 += gap * gap;
                }
                dist2 >= r * r
            }),
        };
        if ok {
            Ok(())
        } else {
            domain("target set meets the closed ball")
        }
    }
}

fn annulus_clear(center: &Point, r_in: f64, r_out: f64, ball: &Ball) -> bool {
    let off = center.dist(&ball.center);
    r_in >= off + ball.radius || off >= r_out + ball.radius
}

impl RayCrossings for TargetSet {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        match self {
            TargetSet::Exterior => {}
            TargetSet::Annulus { center, r_in, r_out } => {
                sphere_crossings(center, *r_in, origin, dir, out);
                if r_out.is_finite() {
                    sphere_crossings(center, *r_out, origin, dir, out);
                }
            }
            TargetSet::HalfSpace { normal, offset } => plane_crossing(normal, *offset, origin, dir, out),
            TargetSet::HalfSpaceAnnulus { normal, offset, center, r_in, r_out } => {
                plane_crossing(normal, *offset, origin, dir, out);
                sphere_crossings(center, *r_in, origin, dir, out);
                if r_out.is_finite() {
                    sphere_crossings(center, *r_out, origin, dir, out);
                }
            }
            TargetSet::Cells { origin: o, spacing, .. } => {
                // Every grid plane the ray passes through, up to a bounded count.
                for i in 0..3 {
                    if dir.0[i] == 0.0 {
                        continue;
                    }
                    let start = (origin.0[i] - o.0[i]) / spacing;
                    let step = if dir.0[i] > 0.0 { 1.0 } else { -1.0 };
                    let mut k = if step > 0.0 { start.floor() + 1.0 } else { start.ceil() - 1.0 };
                    for _ in 0..64 {
                        let t = (o.0[i] + k * spacing - origin.0[i]) / dir.0[i];
                        if t > 0.0 {
                            out.push(t);
                        }
                        k += step;
                    }
                }
            }
        }
    }
}

fn plane_crossing(normal: &Point, offset: f64, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
    let rate = normal.dot(dir);
    if rate != 0.0 {
        let t = (offset - normal.dot(origin)) / rate;
        if t > 0.0 {
            out.push(t);
        }
    }
}

/// `μ_x^B(E)` by quadrature.
pub fn exit_mass(p: &StableParams, b: &Ball, x: &Point, e: &TargetSet, quad: &QuadratureSpec) -> Result<f64> {
    e.check_disjoint(b)?;
    let mu = ExitMeasure::new(p, b, x)?;
    let est = match e {
        TargetSet::Exterior => mu.integrate(|_| 1.0, &[], quad),
        _ => mu.integrate(|y| if e.contains(y) { 1.0 } else { 0.0 }, &[e as &dyn RayCrossings], quad),
    };
    Ok(est.value.clamp(0.0, 1.0))
}

/// `h(x) = ∫ f dμ_x^B`, the harmonic extension of exterior data into `B`.
pub fn harmonic_extend(
    p: &StableParams,
    b: &Ball,
    f: &dyn ExteriorData,
    x: &Point,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if f.growth_exponent() >= p.alpha() {
        return domain(format!(
            "data grows like |y|^{} which is not integrable against the exit law (alpha = {})",
            f.growth_exponent(),
            p.alpha()
        ));
    }
    let mu = ExitMeasure::new(p, b, x)?;
    Ok(mu.integrate_data(f, quad).value)
}

/// The function equal to the harmonic extension of `f` inside `ball` and
/// to `f` outside it.
pub struct ExtendedHarmonic<'a> {
    pub params: StableParams,
    pub ball: Ball,
    pub data: &'a dyn ExteriorData,
    pub quad: QuadratureSpec,
}

impl ExtendedHarmonic<'_> {
    pub fn eval(&self, y: &Point) -> f64 {
        if self.ball.contains(y) {
            // The caller validated parameters and data growth.
            ExitMeasure::new(&self.params, &self.ball, y)
                .map(|mu| mu.integrate_data(self.data, &self.quad).value)
                .unwrap_or(f64::NAN)
        } else {
            self.data.eval(y)
        }
    }
}

impl RayCrossings for ExtendedHarmonic<'_> {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        self.ball.ray_crossings(origin, dir, out);
        self.data.crossings(origin, dir, out);
    }
}

/// Mean-value residual `|h(x) - ∫ h dμ_x^V|` for `h` the harmonic extension
/// of `f` over `outer` and a ball `inner` whose closure lies in `outer`.
pub fn harmonicity_residual(
    p: &StableParams,
    outer: &Ball,
    inner: &Ball,
    f: &dyn ExteriorData,
    x: &Point,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_nested(inner, outer)?;
    if !inner.contains(x) {
        return domain("evaluation point must lie in the inner ball");
    }
    let hx = harmonic_extend(p, outer, f, x, quad)?;
    let h = ExtendedHarmonic { params: *p, ball: *outer, data: f, quad: quad.inner() };
    let mu = ExitMeasure::new(p, inner, x)?;
    let mean = mu.integrate(|y| h.eval(y), &[&h as &dyn RayCrossings], quad).value;
    Ok((hx - mean).abs())
}

fn check_nested(inner: &Ball, outer: &Ball) -> Result<()> {
    if inner.center.dist(&outer.center) + inner.radius >= outer.radius {
        return domain("inner ball closure must lie in the outer ball");
    }
    Ok(())
}

/// Residual of the composition identity `μ_x^U(E) = ∫ μ_y^U(E) dμ_x^V(y)`.
pub fn composition_residual(
    p: &StableParams,
    v: &Ball,
    u: &Ball,
    x: &Point,
    e: &TargetSet,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if v == u {
        if !u.contains(x) {
            return domain("start point must lie in the ball");
        }
        e.check_disjoint(u)?;
        return Ok(0.0);
    }
    check_nested(v, u)?;
    if !v.contains(x) {
        return domain("start point must lie in the inner ball");
    }
    e.check_disjoint(u)?;
    let direct = exit_mass(p, u, x, e, quad)?;
    let inner_quad = quad.inner();
    let integrand = |y: &Point| {
        if u.contains(y) {
            ExitMeasure::new(p, u, y)
                .map(|mu| {
                    mu.integrate(|z| if e.contains(z) { 1.0 } else { 0.0 }, &[e as &dyn RayCrossings], &inner_quad)
                        .value
                })
                .unwrap_or(f64::NAN)
        } else if e.contains(y) {
            1.0
        } else {
            0.0
        }
    };
    let mu_v = ExitMeasure::new(p, v, x)?;
    let composed = mu_v.integrate(integrand, &[u as &dyn RayCrossings, e as &dyn RayCrossings], quad).value;
    Ok((direct - composed).abs())
}

impl RayCrossings for Ball {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        self.ray_crossings(origin, dir, out);
    }
}
