//! Harnack constants, the shrinking radius chain, and empirical Harnack and
//! Hölder tests on harmonic extensions.
//!
//! The constants are computed in exact rational arithmetic from the inputs
//! (which are converted from `f64` without rounding):
//!
//! ```text
//! θ = (θ₁ ∧ θ₂)/4,   l = min{l : θ₁^l <= θ},   a = a₁^l,
//! β = η a / (4 c c₀²),   β̃ = β / c_J,
//! j₀ = min{j : a (1+β)^j > 1},   k₀ = min{k : θ^{k-1} < (1-θ)/j₀},
//! K = 2 c c₀² (1+β) / (η β̃ a^{k₀+2}).
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{check_hj, default_exterior_points};
use crate::error::{domain, Error, Result};
use crate::exit_measures::{harmonic_extend, DataFn, ExteriorData, RayCrossings};
use crate::geometry::{Ball, Point};
use crate::kernels::{ScaleFunction, StableParams};
use crate::quad::QuadratureSpec;
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackInputs {
    pub theta1: f64,
    pub theta2: f64,
    pub a1: f64,
    pub eta: f64,
    pub c: f64,
    pub c0: f64,
    pub c_j: f64,
}

impl HarnackInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2), ("a1", self.a1), ("eta", self.eta)] {
            if !(v > 0.0 && v < 1.0 / 3.0) {
                return domain(format!("{name} must lie in (0, 1/3), got {v}"));
            }
        }
        for (name, v) in [("c", self.c), ("c0", self.c0), ("cJ", self.c_j)] {
            if !(v >= 1.0 && v.is_finite()) {
                return domain(format!("{name} must be a finite number >= 1, got {v}"));
            }
        }
        Ok(())
    }
}

/// Exact values of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactConstants {
    pub theta: BigRational,
    pub l: u32,
    pub a: BigRational,
    pub beta: BigRational,
    pub beta_tilde: BigRational,
    pub j0: u64,
    pub k0: u32,
    pub k: BigRational,
}

/// Pipeline output rounded to `f64`, with the exact rationals as strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackConstants {
    pub inputs: HarnackInputs,
    pub theta: f64,
    pub l: u32,
    pub a: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    pub j0: u64,
    pub k0: u32,
    pub k: f64,
    pub theta_exact: String,
    pub a_exact: String,
    pub beta_exact: String,
    pub k_exact: String,
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn ln_rational(x: &BigRational) -> f64 {
    // Scale numerator and denominator separately so huge values stay finite.
    let ln_big = |b: &BigInt| {
        let bits = b.bits();
        let shift = bits.saturating_sub(60);
        let top = (b >> shift).to_f64().unwrap();
        top.ln() + shift as f64 * std::f64::consts::LN_2
    };
    ln_big(x.numer()) - ln_big(x.denom())
}

/// Minimal `j` with `a (1+β)^j > 1`. The float estimate is accepted when
/// both neighbours are clear of the threshold by a wide margin; otherwise the
/// comparison is done exactly.
fn minimal_j0(a: &BigRational, beta: &BigRational) -> Result<u64> {
    let one = BigRational::one();
    if a > &one {
        return Ok(0);
    }
    let ln_a = ln_rational(a);
    let ln_b = ln_rational(&(&one + beta));
    let est = (-ln_a / ln_b).floor();
    if !(est.is_finite() && est < 1e15) {
        return Err(Error::Consistency(format!("j0 is out of range (estimate {est})")));
    }
    let est = est as u64 + 1;
    let f = |j: u64| ln_a + j as f64 * ln_b;
    let tol = 1e-9 * (ln_a.abs() + 1.0);
    if f(est) > tol && f(est - 1) < -tol {
        return Ok(est);
    }
    let exceeds = |j: u64| -> bool { a * Pow::pow(&one + beta, j) > one };
    let mut j = est.saturating_sub(2);
    while exceeds(j) && j > 0 {
        j -= 1;
    }
    while !exceeds(j) {
        j += 1;
    }
    Ok(j)
}

pub fn derive_constants_exact(inp: &HarnackInputs) -> Result<ExactConstants> {
    inp.validate()?;
    let one = BigRational::one();
    let four = BigRational::from_integer(4.into());
    let theta1 = rational(inp.theta1);
    let theta2 = rational(inp.theta2);
    let theta = theta1.clone().min(theta2) / &four;

    let mut l = 1u32;
    let mut pow = theta1.clone();
    while pow > theta {
        pow *= &theta1;
        l += 1;
    }
    let a = Pow::pow(rational(inp.a1), l);
    let c = rational(inp.c);
    let c0_sq = Pow::pow(rational(inp.c0), 2u32);
    let eta = rational(inp.eta);
    let beta = &eta * &a / (&four * &c * &c0_sq);
    let beta_tilde = &beta / rational(inp.c_j);
    let j0 = minimal_j0(&a, &beta)?;

    let bound = (&one - &theta) / BigRational::from_integer(j0.into());
    let mut k0 = 1u32;
    let mut pow = one.clone();
    while pow >= bound {
        pow *= &theta;
        k0 += 1;
    }
    let two = BigRational::from_integer(2.into());
    let k = &two * &c * &c0_sq * (&one + &beta) / (&eta * &beta_tilde * Pow::pow(&a, k0 + 2));
    Ok(ExactConstants { theta, l, a, beta, beta_tilde, j0, k0, k })
}

pub fn derive_constants(inp: &HarnackInputs) -> Result<HarnackConstants> {
    let e = derive_constants_exact(inp)?;
    Ok(HarnackConstants {
        inputs: *inp,
        theta: to_f64(&e.theta),
        l: e.l,
        a: to_f64(&e.a),
        beta: to_f64(&e.beta),
        beta_tilde: to_f64(&e.beta_tilde),
        j0: e.j0,
        k0: e.k0,
        k: to_f64(&e.k),
        theta_exact: e.theta.to_string(),
        a_exact: e.a.to_string(),
        beta_exact: e.beta.to_string(),
        k_exact: e.k.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusChain {
    pub r0: f64,
    /// `r_1, ..., r_n`.
    pub radii: Vec<f64>,
    pub ratio: f64,
    pub partial_sum: f64,
    /// Exact geometric tail `r_n q/(1-q)`.
    pub tail: f64,
    pub total: f64,
    /// `θR`.
    pub bound: f64,
    pub margin: f64,
}

/// Radii with `m0(r_n) = (1+β)^{-n} m0(r0)` for `m0(r) = r^{exponent}`,
/// starting at `r0 = θ^{k0} R`.
pub fn radius_chain(hc: &HarnackConstants, m0_exponent: f64, r: f64, n_terms: usize) -> Result<RadiusChain> {
    if !(r > 0.0) || !(m0_exponent > 0.0) {
        return domain("radius and mass exponent must be positive");
    }
    let r0 = hc.theta.powi(hc.k0 as i32) * r;
    let q = (1.0 + hc.beta).powf(-1.0 / m0_exponent);
    let radii: Vec<f64> = (1..=n_terms).map(|n| r0 * q.powi(n as i32)).collect();
    let partial_sum: f64 = radii.iter().sum();
    let last = radii.last().copied().unwrap_or(r0);
    let tail = last * q / (1.0 - q);
    let total = partial_sum + tail;
    let bound = hc.theta * r;
    if !(total < bound) {
        return Err(Error::Consistency(format!("chain length {total} is not below theta R = {bound}")));
    }
    Ok(RadiusChain { r0, radii, ratio: q, partial_sum, tail, total, bound, margin: bound - total })
}

/// Quantities measured or fixed for the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeasurements {
    pub c1: f64,
    pub c2: f64,
    pub c_j: f64,
}

/// Intermediate values of the pipeline recipe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineDerivation {
    pub c: f64,
    pub c_d: f64,
    pub m_factor: f64,
    pub k_doubling: u32,
    pub inputs: HarnackInputs,
}

/// Builds the inputs from the process and measured constants: `c = 1` with
/// the Green-matched scale function, `c_D = 2^{d-α}`,
/// `M = 2c_D²c²c₁² ∨ 3cc₂`, `θ₁ = θ₂` the largest admissible `θ` for `M`,
/// `a₁ = c_D^{-k}` with `k` minimal such that `2^{-k} <= θ₁` and
/// `c_D^{-k} < 1/3`, `η = (2c_D c³c₁²c₂)⁻¹` and `c₀ = c₂`.
pub fn pipeline_inputs(p: &StableParams, m: &PipelineMeasurements) -> Result<PipelineDerivation> {
    let g = ScaleFunction::green_matched(p)?;
    if !(m.c1 >= 1.0 && m.c2 >= 1.0 && m.c_j >= 1.0) {
        return domain("measured constants must be >= 1");
    }
    let c = 1.0;
    let c_d = g.doubling();
    let m_factor = (2.0 * c_d * c_d * c * c * m.c1 * m.c1).max(3.0 * c * m.c2);
    let theta1 = g.theta_for_factor(m_factor)?;
    let mut k = 1u32;
    while 0.5f64.powi(k as i32) > theta1 || c_d.powi(-(k as i32)) >= 1.0 / 3.0 {
        k += 1;
    }
    let a1 = c_d.powi(-(k as i32));
    let eta = 1.0 / (2.0 * c_d * c * c * c * m.c1 * m.c1 * m.c2);
    let inputs = HarnackInputs { theta1, theta2: theta1, a1, eta, c, c0: m.c2, c_j: m.c_j };
    inputs.validate()?;
    Ok(PipelineDerivation { c, c_d, m_factor, k_doubling: k, inputs })
}

/// Measures `c_J` at shrink ratio `theta` with the default exterior grid.
pub fn measured_c_j(p: &StableParams, theta: f64) -> Result<f64> {
    let pts = default_exterior_points(p.d(), &Point::ORIGIN, 1.0);
    Ok(check_hj(p, &Point::ORIGIN, 1.0, theta, &pts)?.constant)
}

/// Lattice points of the closed ball `B̄(x0, radius)` with `n` points per axis.
pub fn ball_grid(d: usize, x0: &Point, radius: f64, n: usize) -> Vec<Point> {
    let n = n.max(2);
    let t = |i: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    let mut out = vec![];
    let idx: Vec<usize> = (0..n).collect();
    let ranges: Vec<&[usize]> = (0..3).map(|k| if k < d { &idx[..] } else { &idx[..1] }).collect();
    for &i in ranges[0] {
        for &j in ranges[1] {
            for &k in ranges[2] {
                let mut c = [t(i), 0.0, 0.0];
                if d >= 2 {
                    c[1] = t(j);
                }
                if d >= 3 {
                    c[2] = t(k);
                }
                let u = Point(c);
                if u.norm() <= 1.0 {
                    out.push(*x0 + u * radius);
                }
            }
        }
    }
    if !out.contains(x0) {
        out.push(*x0);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRatio {
    pub label: String,
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub members: Vec<MemberRatio>,
    pub max_ratio: f64,
    pub k: f64,
    pub pass: bool,
    pub grid_points: usize,
}

/// `sup h / inf h` over a grid of `U(x0, θR)` for the harmonic extension of
/// each member of `family` over `U(x0, R)`.
pub fn harnack_empirical(
    p: &StableParams,
    x0: &Point,
    r: f64,
    hc: &HarnackConstants,
    family: &[DataFn],
    grid_res: usize,
    quad: &QuadratureSpec,
) -> Result<HarnackReport> {
    let ball = Ball::new(*x0, r)?;
    let grid = ball_grid(p.d(), x0, hc.theta * r, grid_res);
    let mut members = vec![];
    for f in family {
        if f.bounds().0 < 0.0 {
            return domain("data must be nonnegative");
        }
        let vals: Vec<f64> = grid.par_iter().map(|y| harmonic_extend(p, &ball, f, y, quad)).collect::<Result<_>>()?;
        let sup = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inf = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if sup == 0.0 {
            1.0
        } else if inf <= 0.0 {
            f64::INFINITY
        } else {
            sup / inf
        };
        members.push(MemberRatio { label: format!("{f:?}"), sup, inf, ratio });
    }
    let max_ratio = members.iter().map(|m| m.ratio).fold(1.0, f64::max);
    Ok(HarnackReport { pass: max_ratio <= hc.k, members, max_ratio, k: hc.k, grid_points: grid.len() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `(δ, M(δ))` pairs.
    pub points: Vec<(f64, f64)>,
    /// `None` when every oscillation vanishes (constant data).
    pub beta_hat: Option<f64>,
    pub c_hat: Option<f64>,
    /// Largest `M(δ) / (Ĉ (δ/R)^β̂)` over the grid.
    pub worst_excess: f64,
    pub pass: bool,
}

/// Oscillation of harmonic extensions around `x0` against `δ/R`, fitted by a
/// power law. `M(δ)` is the maximum of `|h(y)-h(x0)|` over the family and
/// over the grid directions at distance `δ`.
pub fn holder_fit(
    p: &StableParams,
    x0: &Point,
    r: f64,
    family: &[DataFn],
    deltas: &[f64],
    quad: &QuadratureSpec,
) -> Result<HolderReport> {
    let ball = Ball::new(*x0, r)?;
    if deltas.iter().any(|dl| !(*dl > 0.0 && *dl <= r / 4.0)) {
        return domain("deltas must lie in (0, R/4]");
    }
    for f in family {
        let (lo, hi) = f.bounds();
        if lo < 0.0 || hi > 1.0 {
            return domain("data must take values in [0, 1]");
        }
    }
    let dirs = directions(p.d());
    let points: Vec<(f64, f64)> = deltas
        .par_iter()
        .map(|&dl| {
            let mut m: f64 = 0.0;
            for f in family {
                let h0 = harmonic_extend(p, &ball, f, x0, quad)?;
                for w in &dirs {
                    let hy = harmonic_extend(p, &ball, f, &(*x0 + *w * dl), quad)?;
                    m = m.max((hy - h0).abs());
                }
            }
            Ok((dl, m))
        })
        .collect::<Result<_>>()?;
    if points.iter().all(|(_, m)| *m == 0.0) {
        return Ok(HolderReport { points, beta_hat: None, c_hat: None, worst_excess: 0.0, pass: true });
    }
    if points.iter().any(|(_, m)| *m <= 0.0) {
        return Err(Error::Consistency("oscillation vanishes at some but not all scales".into()));
    }
    let xs: Vec<f64> = points.iter().map(|(dl, _)| (dl / r).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, m)| m.ln()).collect();
    let (beta_hat, intercept) = linear_fit(&xs, &ys);
    let c_hat = intercept.exp();
    let worst_excess = points.iter().map(|(dl, m)| m / (c_hat * (dl / r).powf(beta_hat))).fold(0.0, f64::max);
    Ok(HolderReport {
        points,
        beta_hat: Some(beta_hat),
        c_hat: Some(c_hat),
        worst_excess,
        pass: beta_hat > 0.0 && worst_excess <= 1.05,
    })
}

fn directions(d: usize) -> Vec<Point> {
    let mut out = vec![];
    for i in 0..d {
        out.push(Point::unit(i));
        out.push(-Point::unit(i));
    }
    out
}

/// Log-spaced `δ` grid `R/16 · 2^{-k}`, `k = 0..n`; coarser `δ` sit outside the
/// power-law regime.
pub fn default_deltas(r: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| r / 16.0 * 0.5f64.powi(k as i32)).collect()
}

/// `(f - level)^+`, the part of `f` removed by truncation at `level`.
#[derive(Clone, Debug, PartialEq)]
pub struct Excess {
    pub f: DataFn,
    pub level: f64,
}

impl RayCrossings for Excess {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        self.f.truncated(self.level).crossings(origin, dir, out);
    }
}

impl ExteriorData for Excess {
    fn eval(&self, y: &Point) -> f64 {
        (self.f.eval(y) - self.level).max(0.0)
    }

    fn bounds(&self) -> (f64, f64) {
        (0.0, (self.f.bounds().1 - self.level).max(0.0))
    }

    fn growth_exponent(&self) -> f64 {
        self.f.growth_exponent()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub level: f64,
    pub sup: f64,
    pub at_center: f64,
    pub ratio: f64,
}

/// For unbounded data `f` and truncations `f ∧ n`, checks
/// `sup_{U(x0,θR)} (h - h_n) <= K (h - h_n)(x0)` where `h - h_n` is the
/// harmonic extension of `(f - n)^+`.
pub fn truncation_check(
    p: &StableParams,
    x0: &Point,
    r: f64,
    hc: &HarnackConstants,
    f: &DataFn,
    levels: &[f64],
    grid_res: usize,
    quad: &QuadratureSpec,
) -> Result<(Vec<TruncationRow>, bool)> {
    let ball = Ball::new(*x0, r)?;
    let grid = ball_grid(p.d(), x0, hc.theta * r, grid_res);
    let mut rows = vec![];
    for &level in levels {
        let e = Excess { f: f.clone(), level };
        let vals: Vec<f64> = grid.par_iter().map(|y| harmonic_extend(p, &ball, &e, y, quad)).collect::<Result<_>>()?;
        let sup = vals.iter().cloned().fold(0.0, f64::max);
        let at_center = harmonic_extend(p, &ball, &e, x0, quad)?;
        let ratio = if sup.is_zero() { 0.0 } else { sup / at_center };
        rows.push(TruncationRow { level, sup, at_center, ratio });
    }
    let pass = rows.iter().all(|r| r.sup <= hc.k * r.at_center);
    Ok((rows, pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_inputs() -> HarnackInputs {
        HarnackInputs { theta1: 0.25, theta2: 0.25, a1: 0.25, eta: 0.25, c: 1.0, c0: 1.0, c_j: 1.0 }
    }

    #[test]
    fn golden_constants() {
        let e = derive_constants_exact(&golden_inputs()).unwrap();
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(e.theta, q(1, 16));
        assert_eq!(e.l, 2);
        assert_eq!(e.a, q(1, 16));
        assert_eq!(e.beta, q(1, 256));
        assert_eq!(e.beta_tilde, q(1, 256));
        assert_eq!(e.j0, 712);
        assert_eq!(e.k0, 4);
        assert_eq!(e.k, BigRational::from_integer(BigInt::from(2056u64 * 16u64.pow(6))));
    }

    #[test]
    fn j0_float_path_agrees_with_exact_search() {
        let one = BigRational::one();
        for (a, b) in [(1.0 / 16.0, 1.0 / 256.0), (0.3, 0.01), (0.01, 0.2), (1.0 / 3.0, 1e-4)] {
            let (a, b) = (rational(a), rational(b));
            let j = minimal_j0(&a, &b).unwrap();
            assert!(&a * Pow::pow(&one + &b, j) > one);
            assert!(!(&a * Pow::pow(&one + &b, j - 1) > one));
        }
    }

    #[test]
    fn golden_chain() {
        let hc = derive_constants(&golden_inputs()).unwrap();
        let ch = radius_chain(&hc, 1.0, 1.0, 50).unwrap();
        assert!((ch.total - 1.0 / 256.0).abs() < 1e-15);
        assert!((ch.margin - (1.0 / 16.0 - 1.0 / 256.0)).abs() < 1e-15);
        for (n, rn) in ch.radii.iter().enumerate() {
            let lhs = rn * (1.0 + hc.beta).powi(n as i32 + 1);
            assert!((lhs - ch.r0).abs() <= 1e-12 * ch.r0);
        }
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let mut inp = golden_inputs();
        inp.eta = 0.4;
        assert!(derive_constants(&inp).is_err());
        inp.eta = 0.25;
        inp.c_j = 0.9;
        assert!(derive_constants(&inp).is_err());
    }

    #[test]
    fn ball_grid_contains_center_and_stays_inside() {
        let g = ball_grid(2, &Point::new(&[1.0, 1.0]), 0.5, 7);
        assert!(g.contains(&Point::new(&[1.0, 1.0])));
        assert!(g.iter().all(|y| y.dist(&Point::new(&[1.0, 1.0])) <= 0.5 + 1e-15));
        assert_eq!(ball_grid(1, &Point::ORIGIN, 1.0, 5).len(), 5);
    }
}
