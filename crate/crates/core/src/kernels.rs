//! Kernels of the isotropic α-stable process on R^d.
//!
//! With the generator normalized as `-(-Δ)^{α/2}` the constants are
//!
//! * Riesz potential kernel `G(x, y) = A_riesz |x-y|^{α-d}`,
//!   `A_riesz = Γ((d-α)/2) / (2^α π^{d/2} Γ(α/2))`;
//! * Lévy density `n(z) = A_levy |z|^{-d-α}`,
//!   `A_levy = α 2^{α-1} Γ((d+α)/2) / (π^{d/2} Γ(1-α/2))`;
//! * Poisson kernel of `U(c, r)`:
//!   `P(x, y) = C_poisson ((r²-|x-c|²)/(|y-c|²-r²))^{α/2} |x-y|^{-d}`,
//!   `C_poisson = Γ(d/2) π^{-d/2-1} sin(πα/2)`.
//!
//! The ball Green function has the closed form
//! `G_B(x, y) = κ |x-y|^{α-d} ∫_0^w t^{α/2-1} (1+t)^{-d/2} dt` with
//! `w = (r²-|x-c|²)(r²-|y-c|²) / (r²|x-y|²)`. In the transient case
//! `κ = A_riesz / B(α/2, (d-α)/2)`; for `d = α = 1` the free kernel does not
//! exist but `κ = 1/(2π)` and the integral is `2 asinh(√w)`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::exit_measures::ExitMeasure;
use crate::geometry::{Ball, Point, MAX_DIM};
use crate::quad::QuadratureSpec;

/// Dimension, stability index and the normalization constants of the process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    d: usize,
    alpha: f64,
    a_riesz: f64,
    a_levy: f64,
    c_poisson: f64,
    green_prefactor: f64,
}

/// Selects one of the stored normalization constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizationConstant {
    /// Riesz kernel constant; also scales the ball Green function.
    Riesz,
    Levy,
    Poisson,
}

impl StableParams {
    /// Parameters for `1 <= d <= 3`, `0 < alpha < 2` and `d >= alpha`.
    ///
    /// `d == alpha` (the Cauchy process on the line) is accepted: exit laws,
    /// ball Green functions and the Lévy density are finite there, while the
    /// free Riesz kernel and everything built on it report
    /// [`Error::Unsupported`].
    pub fn new(d: usize, alpha: f64) -> Result<StableParams> {
        if !(1..=MAX_DIM).contains(&d) {
            return domain(format!("dimension must be in 1..={MAX_DIM}, got {d}"));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return domain(format!("alpha must lie in (0, 2), got {alpha}"));
        }
        let df = d as f64;
        if alpha > df {
            return domain(format!("need d >= alpha, got d = {d}, alpha = {alpha}"));
        }
        let pi = std::f64::consts::PI;
        let half_d = df / 2.0;
        let a_levy =
            alpha * 2f64.powf(alpha - 1.0) * gamma((df + alpha) / 2.0) / (pi.powf(half_d) * gamma(1.0 - alpha / 2.0));
        let c_poisson = gamma(half_d) * pi.powf(-half_d - 1.0) * (pi * alpha / 2.0).sin();
        let green_prefactor = gamma(half_d) / (2f64.powf(alpha) * pi.powf(half_d) * gamma(alpha / 2.0).powi(2));
        let a_riesz = if alpha < df {
            gamma((df - alpha) / 2.0) / (2f64.powf(alpha) * pi.powf(half_d) * gamma(alpha / 2.0))
        } else {
            f64::INFINITY
        };
        Ok(StableParams { d, alpha, a_riesz, a_levy, c_poisson, green_prefactor })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_riesz(&self) -> f64 {
        self.a_riesz
    }

    pub fn a_levy(&self) -> f64 {
        self.a_levy
    }

    pub fn c_poisson(&self) -> f64 {
        self.c_poisson
    }

    /// `d > alpha`: the free Green function is finite off the diagonal.
    pub fn is_transient(&self) -> bool {
        (self.d as f64) > self.alpha
    }

    /// `d - alpha`, the exponent of the mass scale `m0(r) = r^{d-alpha}`.
    pub fn gap(&self) -> f64 {
        self.d as f64 - self.alpha
    }

    pub(crate) fn require_transient(&self, what: &str) -> Result<()> {
        if self.is_transient() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} needs d > alpha (got d = {}, alpha = {})", self.d, self.alpha)))
        }
    }

    /// Copy with one constant multiplied by `factor`. Used to probe how
    /// sensitive the consistency checks are to each constant.
    pub fn perturbed(&self, which: NormalizationConstant, factor: f64) -> StableParams {
        let mut p = *self;
        match which {
            NormalizationConstant::Riesz => {
                p.a_riesz *= factor;
                p.green_prefactor *= factor;
            }
            NormalizationConstant::Levy => p.a_levy *= factor,
            NormalizationConstant::Poisson => p.c_poisson *= factor,
        }
        p
    }

    pub(crate) fn check_point(&self, x: &Point) -> Result<()> {
        if x.lives_in(self.d) {
            Ok(())
        } else {
            domain(format!("point {:?} has nonzero coordinates beyond dimension {}", x.0, self.d))
        }
    }
}

/// Riesz Green function `A_riesz |x-y|^{alpha-d}`; infinite on the diagonal.
pub fn riesz_green(p: &StableParams, x: &Point, y: &Point) -> f64 {
    riesz_of_distance(p, x.dist(y))
}

pub(crate) fn riesz_of_distance(p: &StableParams, r: f64) -> f64 {
    if r == 0.0 {
        return f64::INFINITY;
    }
    p.a_riesz * r.powf(p.alpha - p.d as f64)
}

/// Lévy density `A_levy |z|^{-d-alpha}`.
pub fn levy_density(p: &StableParams, z: &Point) -> Result<f64> {
    let r = z.norm();
    if r == 0.0 {
        return domain("Lévy density is singular at the origin");
    }
    Ok(levy_of_distance(p, r))
}

pub(crate) fn levy_of_distance(p: &StableParams, r: f64) -> f64 {
    p.a_levy * r.powf(-(p.d as f64) - p.alpha)
}

/// Density of the exit law of `b` started at `x`, evaluated at `y`.
pub fn poisson_kernel_ball(p: &StableParams, b: &Ball, x: &Point, y: &Point) -> Result<f64> {
    let r2 = b.radius * b.radius;
    let inner = r2 - x.dist_sq(&b.center);
    let outer = y.dist_sq(&b.center) - r2;
    if !(inner > 0.0) {
        return domain("start point must lie in the open ball");
    }
    if !(outer > 0.0) {
        return domain("target point must lie outside the closed ball");
    }
    Ok(poisson_unchecked(p, inner, outer, x.dist(y)))
}

#[inline]
pub(crate) fn poisson_unchecked(p: &StableParams, inner: f64, outer: f64, dist: f64) -> f64 {
    p.c_poisson * (inner / outer).powf(p.alpha / 2.0) * dist.powi(-(p.d as i32))
}

/// Ball Green function by its defining formula
/// `G(x,y) - ∫ G(z,y) dμ_x^B(z)`, evaluated by quadrature.
///
/// Returns 0 when either argument is outside the ball and ∞ on the diagonal.
pub fn green_function_ball(p: &StableParams, b: &Ball, x: &Point, y: &Point, quad: &QuadratureSpec) -> Result<f64> {
    if !b.contains(x) || !b.contains(y) {
        return Ok(0.0);
    }
    if x == y {
        return Ok(f64::INFINITY);
    }
    p.require_transient("the subtraction formula for the ball Green function")?;
    let mu = ExitMeasure::new(p, b, x)?;
    let y = *y;
    let balayage = mu.integrate(|z: &Point| riesz_green(p, z, &y), &[], quad);
    Ok(riesz_green(p, x, &y) - balayage.value)
}

/// Closed-form ball Green function. Agrees with [`green_function_ball`]
/// to quadrature accuracy in the transient case.
pub fn green_function_ball_closed(p: &StableParams, b: &Ball, x: &Point, y: &Point) -> f64 {
    if !b.contains(x) || !b.contains(y) {
        return 0.0;
    }
    let dist = x.dist(y);
    if dist == 0.0 {
        return f64::INFINITY;
    }
    let r2 = b.radius * b.radius;
    let w = (r2 - x.dist_sq(&b.center)) * (r2 - y.dist_sq(&b.center)) / (r2 * dist * dist);
    green_closed_from_w(p, dist, w)
}

#[inline]
pub(crate) fn green_closed_from_w(p: &StableParams, dist: f64, w: f64) -> f64 {
    if p.is_transient() {
        let a = p.alpha / 2.0;
        let bb = p.gap() / 2.0;
        let tau = w / (1.0 + w);
        // A_riesz * I_tau(a, b): reuse the (possibly perturbed) prefactor.
        p.green_prefactor * beta(a, bb) * beta_reg(a, bb, tau) * dist.powf(p.alpha - p.d as f64)
    } else {
        p.green_prefactor * 2.0 * w.sqrt().asinh()
    }
}

/// Power-law scale function `g(r) = amplitude * r^{alpha-d}` with inverse
/// mass scale `m0(r) = 1/g(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    pub exponent: f64,
    pub amplitude: f64,
}

impl ScaleFunction {
    /// `g(r) = r^{alpha-d}`.
    pub fn of(p: &StableParams) -> ScaleFunction {
        ScaleFunction { exponent: p.alpha - p.d as f64, amplitude: 1.0 }
    }

    /// `g(r) = A_riesz r^{alpha-d}`, so that `G = g(|x-y|)` with comparability
    /// constant exactly 1.
    pub fn green_matched(p: &StableParams) -> Result<ScaleFunction> {
        p.require_transient("the Green-matched scale function")?;
        Ok(ScaleFunction { exponent: p.alpha - p.d as f64, amplitude: p.a_riesz })
    }

    pub fn g(&self, r: f64) -> f64 {
        self.amplitude * r.powf(self.exponent)
    }

    pub fn m0(&self, r: f64) -> f64 {
        1.0 / self.g(r)
    }

    /// Doubling constant `c_D` with `g(r/2) = c_D g(r)`.
    pub fn doubling(&self) -> f64 {
        2f64.powf(-self.exponent)
    }

    /// Largest `theta < 1/4` with `M g(r) <= g(theta r)` for every `r > 0`.
    pub fn theta_for_factor(&self, m: f64) -> Result<f64> {
        if !(m >= 1.0) {
            return domain(format!("factor must be >= 1, got {m}"));
        }
        if !(self.exponent < 0.0) {
            return domain("scale function must be strictly decreasing");
        }
        let exact = m.powf(1.0 / self.exponent);
        // Shade by a few ulps so the inequality survives rounding.
        let shaded = exact * (1.0 - 4.0 * f64::EPSILON);
        Ok(shaded.min(0.25f64.next_down()))
    }
}

pub fn scale_g(p: &StableParams, r: f64) -> f64 {
    ScaleFunction::of(p).g(r)
}

pub fn scale_m0(p: &StableParams, r: f64) -> f64 {
    ScaleFunction::of(p).m0(r)
}

pub fn theta_for_factor(p: &StableParams, m: f64) -> Result<f64> {
    p.require_transient("theta_for_factor")?;
    ScaleFunction::of(p).theta_for_factor(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(d: usize, alpha: f64) -> StableParams {
        StableParams::new(d, alpha).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableParams::new(0, 1.0).is_err());
        assert!(StableParams::new(4, 1.0).is_err());
        assert!(StableParams::new(1, 2.0).is_err());
        assert!(StableParams::new(1, 1.5).is_err());
        assert!(StableParams::new(2, 0.0).is_err());
        assert!(!params(1, 1.0).is_transient());
    }

    #[test]
    fn cauchy_constants() {
        let p = params(1, 1.0);
        let pi = std::f64::consts::PI;
        assert_relative_eq!(p.a_levy(), 1.0 / pi, max_relative = 1e-14);
        assert_relative_eq!(p.c_poisson(), 1.0 / pi, max_relative = 1e-14);
        // Newtonian potential in R^3 for alpha = 2 would be 1/(4π); alpha = 1, d = 3 gives 1/(2π²).
        assert_relative_eq!(params(3, 1.0).a_riesz(), 1.0 / (2.0 * pi * pi), max_relative = 1e-13);
    }

    #[test]
    fn riesz_examples() {
        let p = params(1, 0.5);
        let x = Point::on_axis(1.0);
        assert_eq!(riesz_green(&p, &x, &x), f64::INFINITY);
        assert_relative_eq!(riesz_green(&p, &x, &Point::on_axis(2.0)), p.a_riesz(), max_relative = 1e-15);
        assert_relative_eq!(riesz_green(&p, &x, &Point::on_axis(5.0)), p.a_riesz() / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn levy_examples() {
        let p = params(2, 1.0);
        let z = Point::new(&[0.6, 0.8]);
        assert_relative_eq!(levy_density(&p, &z).unwrap(), p.a_levy(), max_relative = 1e-15);
        assert_relative_eq!(levy_density(&p, &(z * 2.0)).unwrap(), p.a_levy() / 8.0, max_relative = 1e-14);
        assert!(levy_density(&p, &Point::ORIGIN).is_err());
    }

    #[test]
    fn poisson_domain_errors() {
        let p = params(2, 1.0);
        let b = Ball::centered(1.0).unwrap();
        assert!(poisson_kernel_ball(&p, &b, &Point::on_axis(1.0), &Point::on_axis(2.0)).is_err());
        assert!(poisson_kernel_ball(&p, &b, &Point::ORIGIN, &Point::on_axis(1.0)).is_err());
        assert!(poisson_kernel_ball(&p, &b, &Point::ORIGIN, &Point::on_axis(1.5)).is_ok());
    }

    #[test]
    fn cauchy_ball_green_matches_log_form() {
        let p = params(1, 1.0);
        let b = Ball::centered(1.0).unwrap();
        let pi = std::f64::consts::PI;
        for (x, y) in [(0.0f64, 0.5f64), (-0.3, 0.7), (0.9, -0.95)] {
            let expected = ((1.0 - x * y + ((1.0 - x * x) * (1.0 - y * y)).sqrt()) / (x - y).abs()).ln() / pi;
            let got = green_function_ball_closed(&p, &b, &Point::on_axis(x), &Point::on_axis(y));
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn ball_green_closed_tends_to_riesz_for_large_balls() {
        let p = params(3, 1.5);
        let b = Ball::centered(1e6).unwrap();
        let x = Point::new(&[0.1, 0.2, 0.0]);
        let y = Point::new(&[-0.4, 0.0, 0.3]);
        let ratio = green_function_ball_closed(&p, &b, &x, &y) / riesz_green(&p, &x, &y);
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn ball_green_quadrature_agrees_with_closed_form() {
        let quad = QuadratureSpec::with_rel_tol(1e-8);
        for (d, alpha) in [(1, 0.5), (2, 1.0), (3, 1.5)] {
            let p = params(d, alpha);
            let b = Ball::new(Point::new(&vec![0.2; d]), 1.3).unwrap();
            let x = b.center + Point::unit(0) * 0.4;
            let y = b.center - Point::unit(d - 1) * 0.5;
            let q = green_function_ball(&p, &b, &x, &y, &quad).unwrap();
            let c = green_function_ball_closed(&p, &b, &x, &y);
            assert_relative_eq!(q, c, max_relative = 1e-6);
            let q_swapped = green_function_ball(&p, &b, &y, &x, &quad).unwrap();
            assert!((q - q_swapped).abs() <= 1e-5 * q, "asymmetric: {q} vs {q_swapped}");
        }
    }

    #[test]
    fn ball_green_edge_cases() {
        let p = params(2, 1.0);
        let b = Ball::centered(1.0).unwrap();
        let quad = QuadratureSpec::default();
        let x = Point::new(&[0.1, 0.1]);
        assert_eq!(green_function_ball(&p, &b, &x, &Point::on_axis(2.0), &quad).unwrap(), 0.0);
        assert_eq!(green_function_ball(&p, &b, &x, &x, &quad).unwrap(), f64::INFINITY);
        let cauchy = params(1, 1.0);
        let b1 = Ball::centered(1.0).unwrap();
        assert!(matches!(
            green_function_ball(&cauchy, &b1, &Point::ORIGIN, &Point::on_axis(0.5), &quad),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn scale_function_examples() {
        let p = params(2, 1.0);
        let g = ScaleFunction::of(&p);
        assert_relative_eq!(g.doubling(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(theta_for_factor(&p, 16.0).unwrap(), 1.0 / 16.0, max_relative = 1e-14);
        assert!(theta_for_factor(&p, 0.5).is_err());
        assert_relative_eq!(scale_m0(&p, 3.0), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn theta_is_capped_below_quarter() {
        // M^{-1/(d-alpha)} = 1/4 exactly; the returned value must be strictly below
        // and still satisfy M g(r) <= g(theta r) on a log-spaced grid.
        let p = params(1, 0.5);
        let g = ScaleFunction::of(&p);
        let theta = g.theta_for_factor(2.0).unwrap();
        assert!(theta < 0.25);
        for k in -40..=40 {
            let r = 10f64.powf(k as f64 / 8.0);
            assert!(2.0 * g.g(r) <= g.g(theta * r), "fails at r = {r}");
        }
    }

    #[test]
    fn matched_scale_needs_transience() {
        assert!(ScaleFunction::green_matched(&params(1, 1.0)).is_err());
        let p = params(3, 1.0);
        let g = ScaleFunction::green_matched(&p).unwrap();
        let x = Point::ORIGIN;
        let y = Point::new(&[0.3, 0.4, 1.2]);
        assert_relative_eq!(g.g(x.dist(&y)), riesz_green(&p, &x, &y), max_relative = 1e-15);
    }
}
