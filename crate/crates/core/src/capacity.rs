//! Capacity `cap A = sup{‖μ‖ : μ(Aᶜ) = 0, Gμ <= 1}` of bounded sets.
//!
//! The primal is discretized on the cubes of side `h` centered at a lattice
//! anchored at a fixed point and contained in `A`. A candidate measure puts
//! mass `w_i` uniformly on cube `i`; `K_ij` is the supremum over cube `i` of
//! the potential of the uniform unit mass on cube `j`. Maximizing `Σ w`
//! subject to `K w <= 1` yields `Gμ <= 1` on the support of `μ`, hence
//! everywhere by the maximum principle, so the LP value is a lower bound.
//!
//! The optimizer, read as point masses at the cube centers and inflated until
//! its potential is at least 1 on a twice finer lattice, is a measure `ν`
//! with `Gν >= 1` on `A`; `‖ν‖` then bounds `cap A` from above.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{Ball, Point};
use crate::kernels::{riesz_green, riesz_of_distance, StableParams};
use crate::quad::{integrate, integrate_with_breaks, QuadratureSpec};

/// Closed axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Point,
    pub hi: Point,
}

/// Finite union of closed balls and boxes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacitySet {
    pub balls: Vec<Ball>,
    pub boxes: Vec<BoxRegion>,
}

impl CapacitySet {
    pub fn ball(b: Ball) -> CapacitySet {
        CapacitySet { balls: vec![b], boxes: vec![] }
    }

    pub fn union(&self, other: &CapacitySet) -> CapacitySet {
        let mut s = self.clone();
        s.balls.extend(other.balls.iter().copied());
        s.boxes.extend(other.boxes.iter().copied());
        s
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty() && self.boxes.is_empty()
    }

    pub fn contains(&self, y: &Point) -> bool {
        self.balls.iter().any(|b| {
            let r2 = b.radius * b.radius;
            y.dist_sq(&b.center) <= r2 * (1.0 + 1e-12)
        }) || self.boxes.iter().any(|bx| (0..3).all(|i| y.0[i] >= bx.lo.0[i] && y.0[i] <= bx.hi.0[i]))
    }

    /// Membership of `anchor + rel`, evaluated as `(anchor - c) + rel` so
    /// that translating the set and the anchor together changes nothing.
    pub fn contains_offset(&self, anchor: &Point, rel: &Point) -> bool {
        self.balls.iter().any(|b| {
            let v: f64 = (0..3).map(|i| ((anchor.0[i] - b.center.0[i]) + rel.0[i]).powi(2)).sum();
            v <= b.radius * b.radius * (1.0 + 1e-12)
        }) || self.boxes.iter().any(|bx| {
            (0..3).all(|i| (anchor.0[i] - bx.lo.0[i]) + rel.0[i] >= 0.0 && (anchor.0[i] - bx.hi.0[i]) + rel.0[i] <= 0.0)
        })
    }

    /// Whether the cube of side `h` centered at `anchor + rel` lies inside a
    /// single ball or box of the union.
    pub fn contains_cube(&self, d: usize, anchor: &Point, rel: &Point, h: f64) -> bool {
        let half = 0.5 * h;
        self.balls.iter().any(|b| {
            let v: f64 = (0..d).map(|i| (((anchor.0[i] - b.center.0[i]) + rel.0[i]).abs() + half).powi(2)).sum();
            v <= b.radius * b.radius
        }) || self.boxes.iter().any(|bx| {
            (0..d).all(|i| {
                (anchor.0[i] - bx.lo.0[i]) + rel.0[i] - half >= 0.0
                    && (anchor.0[i] - bx.hi.0[i]) + rel.0[i] + half <= 0.0
            })
        })
    }

    /// Default lattice anchor: center of the first ball, else corner of the first box.
    pub fn anchor(&self) -> Point {
        self.balls.first().map(|b| b.center).or_else(|| self.boxes.first().map(|b| b.lo)).unwrap_or_default()
    }

    fn bounds(&self) -> (Point, Point) {
        let mut lo = Point([f64::INFINITY; 3]);
        let mut hi = Point([f64::NEG_INFINITY; 3]);
        for b in &self.balls {
            for i in 0..3 {
                lo.0[i] = lo.0[i].min(b.center.0[i] - b.radius);
                hi.0[i] = hi.0[i].max(b.center.0[i] + b.radius);
            }
        }
        for bx in &self.boxes {
            for i in 0..3 {
                lo.0[i] = lo.0[i].min(bx.lo.0[i]);
                hi.0[i] = hi.0[i].max(bx.hi.0[i]);
            }
        }
        (lo, hi)
    }

    pub fn translated(&self, by: Point) -> CapacitySet {
        CapacitySet {
            balls: self.balls.iter().map(|b| Ball { center: b.center + by, radius: b.radius }).collect(),
            boxes: self.boxes.iter().map(|b| BoxRegion { lo: b.lo + by, hi: b.hi + by }).collect(),
        }
    }
}

/// Lattice `anchor + spacing * Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub anchor: Point,
    pub spacing: f64,
}

impl Lattice {
    /// Integer coordinates of the lattice points inside `set`.
    pub fn indices_in(&self, d: usize, set: &CapacitySet) -> Vec<[i64; 3]> {
        self.indices_where(d, set, |k| set.contains_offset(&self.anchor, &self.offset(k)))
    }

    /// Integer coordinates of the lattice cubes contained in `set`.
    pub fn cubes_in(&self, d: usize, set: &CapacitySet) -> Vec<[i64; 3]> {
        self.indices_where(d, set, |k| set.contains_cube(d, &self.anchor, &self.offset(k), self.spacing))
    }

    fn indices_where(&self, d: usize, set: &CapacitySet, keep: impl Fn(&[i64; 3]) -> bool) -> Vec<[i64; 3]> {
        let (lo, hi) = set.bounds();
        let mut range = [(0i64, 0i64); 3];
        for i in 0..d {
            range[i] = (
                ((lo.0[i] - self.anchor.0[i]) / self.spacing).floor() as i64 - 1,
                ((hi.0[i] - self.anchor.0[i]) / self.spacing).ceil() as i64 + 1,
            );
        }
        let mut out = Vec::new();
        for a in range[0].0..=range[0].1 {
            for b in range[1].0..=range[1].1 {
                for c in range[2].0..=range[2].1 {
                    let k = [a, b, c];
                    if keep(&k) {
                        out.push(k);
                    }
                }
            }
        }
        out
    }

    pub fn point(&self, k: &[i64; 3]) -> Point {
        self.anchor + self.offset(k)
    }

    fn offset(&self, k: &[i64; 3]) -> Point {
        Point([k[0] as f64, k[1] as f64, k[2] as f64]) * self.spacing
    }
}

fn index_dist(a: &[i64; 3], b: &[i64; 3]) -> f64 {
    let s: i64 = (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum();
    (s as f64).sqrt()
}

/// Finite weighted point set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
        if points.len() != weights.len() {
            return domain("points and weights differ in length");
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return domain("weights must be nonnegative");
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> DiscreteMeasure {
        DiscreteMeasure { points: self.points.clone(), weights: self.weights.iter().map(|w| w * factor).collect() }
    }

    /// Riesz potential `Gν(x)`.
    pub fn potential(&self, p: &StableParams, x: &Point) -> f64 {
        self.points.iter().zip(&self.weights).map(|(y, w)| if *w == 0.0 { 0.0 } else { w * riesz_green(p, x, y) }).sum()
    }
}

/// `∫_{[-1/2,1/2]^d} |u|^{alpha-d} du`: the potential at a cube center of
/// the uniform unit mass on a unit cube, divided by `A_riesz`.
///
/// Computed face by face: the cube integral equals
/// `(d/alpha) ∫_{face} |q|^{alpha-d} dA` over one face at distance 1/2.
pub fn cube_self_potential(d: usize, alpha: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (d, alpha.to_bits());
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return *v;
    }
    let spec = QuadratureSpec { rel_tol: 1e-13, abs_tol: 0.0, max_subdivisions: 400 };
    let e = alpha - d as f64;
    let face = match d {
        1 => 0.25f64.powf(e / 2.0),
        2 => integrate(|a: f64| (a * a + 0.25).powf(e / 2.0), -0.5, 0.5, &spec).value,
        3 => {
            integrate(
                |a: f64| integrate(|b: f64| (a * a + b * b + 0.25).powf(e / 2.0), -0.5, 0.5, &spec.inner()).value,
                -0.5,
                0.5,
                &spec,
            )
            .value
        }
        _ => panic!("cube self-potential implemented for d <= 3"),
    };
    let v = d as f64 / alpha * face;
    cache.lock().unwrap().insert(key, v);
    v
}

/// Upper bound for `∫_{[-1/2,1/2]^d} |v-u|^{alpha-d} du` at a point `v` with
/// nonnegative coordinates (value plus quadrature error estimate).
pub fn cube_potential(d: usize, alpha: f64, v: [f64; 3]) -> f64 {
    let e = alpha - d as f64;
    let breaks = |c: f64| if c > -0.5 && c < 0.5 { vec![-0.5, c, 0.5] } else { vec![-0.5, 0.5] };
    let spec = QuadratureSpec { rel_tol: 1e-10, abs_tol: 0.0, max_subdivisions: 400 };
    match d {
        1 => {
            let (a, b) = (v[0] + 0.5, (v[0] - 0.5).abs());
            if v[0] >= 0.5 {
                (a.powf(alpha) - b.powf(alpha)) / alpha
            } else {
                (a.powf(alpha) + b.powf(alpha)) / alpha
            }
        }
        2 => {
            let est = integrate_with_breaks(
                |a: f64| {
                    let t = (a - v[0]).powi(2);
                    integrate_with_breaks(|b: f64| (t + (b - v[1]).powi(2)).powf(e / 2.0), &breaks(v[1]), &spec.inner())
                        .value
                },
                &breaks(v[0]),
                &spec,
            );
            est.value * (1.0 + 1e-9) + est.error
        }
        3 => {
            let spec = QuadratureSpec { rel_tol: 1e-7, ..spec };
            let inner = spec.inner();
            let est = integrate_with_breaks(
                |a: f64| {
                    let t = (a - v[0]).powi(2);
                    integrate_with_breaks(
                        |b: f64| {
                            let s = t + (b - v[1]).powi(2);
                            integrate_with_breaks(
                                |c: f64| (s + (c - v[2]).powi(2)).powf(e / 2.0),
                                &breaks(v[2]),
                                &inner.inner(),
                            )
                            .value
                        },
                        &breaks(v[1]),
                        &inner,
                    )
                    .value
                },
                &breaks(v[0]),
                &spec,
            );
            est.value * (1.0 + 1e-9) + est.error
        }
        _ => panic!("cube potential implemented for d <= 3"),
    }
}

/// Index offset reduced by the symmetries of the cube.
fn offset_key(d: usize, a: &[i64; 3], b: &[i64; 3]) -> [i64; 3] {
    let mut k = [0i64; 3];
    for i in 0..d {
        k[i] = (a[i] - b[i]).abs();
    }
    k[..d].sort_unstable();
    k
}

/// `sup` over the unit cube at index offset `key` of the potential (without
/// `A_riesz`) of the uniform unit mass on the unit cube at the origin.
///
/// That potential is even and nonincreasing in each coordinate, so the
/// supremum sits at the point of the far cube nearest to the origin.
fn cube_sup_potential(d: usize, alpha: f64, key: [i64; 3]) -> f64 {
    if key == [0, 0, 0] {
        return cube_self_potential(d, alpha);
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, [i64; 3]), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let ck = (d, alpha.to_bits(), key);
    if let Some(v) = cache.lock().unwrap().get(&ck) {
        return *v;
    }
    let v = key.map(|k| if k == 0 { 0.0 } else { k as f64 - 0.5 });
    let value = cube_potential(d, alpha, v);
    cache.lock().unwrap().insert(ck, value);
    value
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityBracket {
    /// Primal LP value: mass of a measure on `A` with potential at most 1.
    pub lower: f64,
    /// Mass of the verified dual certificate (∞ if verification failed).
    pub upper: f64,
    pub grid_resolution: f64,
    /// Factor applied to the primal optimizer to obtain the certificate.
    pub inflation: f64,
    pub equilibrium: DiscreteMeasure,
}

impl CapacityBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Outcome of an upper-bound certificate check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    Accepted { upper: f64 },
    Rejected { worst_point: Point, worst_potential: f64 },
}

impl Certificate {
    pub fn upper(&self) -> Option<f64> {
        match self {
            Certificate::Accepted { upper } => Some(*upper),
            Certificate::Rejected { .. } => None,
        }
    }
}

/// Relative slack accepted when comparing potentials with 1.
const POTENTIAL_SLACK: f64 = 1e-12;

/// Largest inflation tried before giving up on a certificate.
const MAX_INFLATION: f64 = 10.0;

/// Checks `Gν >= 1` on every lattice point of `set`; if it holds, `‖ν‖`
/// bounds the capacity from above (comparability constant 1 here).
pub fn capacity_upper_certificate(
    p: &StableParams,
    set: &CapacitySet,
    nu: &DiscreteMeasure,
    check: &Lattice,
) -> Result<Certificate> {
    p.require_transient("capacity")?;
    let pts: Vec<Point> = check.indices_in(p.d(), set).iter().map(|k| check.point(k)).collect();
    if pts.is_empty() {
        return domain("check lattice has no points in the set");
    }
    let (worst_point, worst_potential) = pts
        .par_iter()
        .map(|x| (*x, nu.potential(p, x)))
        .reduce(|| (Point::ORIGIN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if worst_potential >= 1.0 - POTENTIAL_SLACK {
        Ok(Certificate::Accepted { upper: nu.total() })
    } else {
        Ok(Certificate::Rejected { worst_point, worst_potential })
    }
}

/// Closed form `cap B_r = r^{d-α} / (A a B(a, α/2))`, `a = (d-α)/2`, of a
/// ball of radius `r`.
pub fn ball_capacity(p: &StableParams, r: f64) -> Result<f64> {
    p.require_transient("capacity")?;
    let a = p.gap() / 2.0;
    Ok(r.powf(p.gap()) / (p.a_riesz() * a * statrs::function::beta::beta(a, p.alpha() / 2.0)))
}

/// Capacity bracket with the lattice anchored at [`CapacitySet::anchor`].
pub fn capacity_lp(p: &StableParams, set: &CapacitySet, h: f64) -> Result<CapacityBracket> {
    capacity_lp_on(p, set, &Lattice { anchor: set.anchor(), spacing: h })
}

pub fn capacity_lp_on(p: &StableParams, set: &CapacitySet, lattice: &Lattice) -> Result<CapacityBracket> {
    p.require_transient("capacity")?;
    let h = lattice.spacing;
    if !(h > 0.0) {
        return domain("grid spacing must be positive");
    }
    if set.is_empty() {
        return Ok(CapacityBracket {
            lower: 0.0,
            upper: 0.0,
            grid_resolution: h,
            inflation: 1.0,
            equilibrium: DiscreteMeasure::default(),
        });
    }
    let d = p.d();
    let ks = lattice.cubes_in(d, set);
    if ks.is_empty() {
        return domain("grid too coarse: no lattice cube inside the set");
    }
    let n = ks.len();
    let mut keys: Vec<[i64; 3]> = ks.iter().flat_map(|a| ks.iter().map(move |b| offset_key(d, a, b))).collect();
    keys.sort_unstable();
    keys.dedup();
    let scale = p.a_riesz() * h.powf(p.alpha() - d as f64);
    let table: HashMap<[i64; 3], f64> = keys
        .par_iter()
        .map(|k| (*k, scale * cube_sup_potential(d, p.alpha(), *k)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let rows: Vec<Vec<f64>> =
        ks.par_iter().map(|ki| ks.iter().map(|kj| table[&offset_key(d, ki, kj)]).collect()).collect();

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n).map(|_| problem.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for row in &rows {
        let terms: Vec<_> = vars.iter().copied().zip(row.iter().copied()).collect();
        problem.add_constraint(&terms, ComparisonOp::Le, 1.0);
    }
    let solution = match problem.solve().map_err(|e| Error::Lp(e.to_string()))? {
        microlp::SolveOutcome::Solution(s) => s,
        other => return Err(Error::Lp(format!("solver did not finish: {other:?}"))),
    };
    let weights: Vec<f64> = vars.iter().map(|v| solution[*v].max(0.0)).collect();
    let lower = weights.iter().sum::<f64>();

    let points: Vec<Point> = ks.iter().map(|k| lattice.point(k)).collect();
    let equilibrium = DiscreteMeasure { points, weights };
    let check = Lattice { anchor: lattice.anchor, spacing: h / 2.0 };

    // Potentials on the check lattice from index differences, so the result
    // does not depend on where the set sits.
    let check_ks = check.indices_in(d, set);
    let potential = |m: &[i64; 3], factor: f64| -> f64 {
        ks.iter()
            .zip(&equilibrium.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| {
                let twice = [2 * k[0], 2 * k[1], 2 * k[2]];
                factor * w * riesz_of_distance(p, 0.5 * h * index_dist(m, &twice))
            })
            .sum()
    };
    let min_pot = check_ks.par_iter().map(|m| potential(m, 1.0)).reduce(|| f64::INFINITY, f64::min);
    let mut inflation = if min_pot > 0.0 { (1.0 / min_pot).max(1.0) * (1.0 + 1e-12) } else { f64::INFINITY };
    let mut upper = f64::INFINITY;
    while inflation <= MAX_INFLATION {
        let worst = check_ks.par_iter().map(|m| potential(m, inflation)).reduce(|| f64::INFINITY, f64::min);
        if worst >= 1.0 - POTENTIAL_SLACK {
            upper = lower * inflation;
            break;
        }
        inflation *= 1.001;
    }
    Ok(CapacityBracket { lower, upper, grid_resolution: h, inflation, equilibrium })
}

/// Increasing set function with constant `c` in `m(A∪B) <= c(m(A)+m(B))`.
pub trait QuasiCapacity: Sync {
    fn measure(&self, set: &CapacitySet) -> Result<f64>;
    fn constant(&self) -> f64;
}

/// Lebesgue measure approximated by lattice-point counting; exactly monotone
/// and subadditive on the lattice.
pub struct LatticeVolume {
    pub d: usize,
    pub lattice: Lattice,
}

impl QuasiCapacity for LatticeVolume {
    fn measure(&self, set: &CapacitySet) -> Result<f64> {
        Ok(self.lattice.indices_in(self.d, set).len() as f64 * self.lattice.spacing.powi(self.d as i32))
    }

    fn constant(&self) -> f64 {
        1.0
    }
}

/// LP lower bound of the capacity on a shared lattice.
pub struct LpCapacity {
    pub params: StableParams,
    pub lattice: Lattice,
}

impl QuasiCapacity for LpCapacity {
    fn measure(&self, set: &CapacitySet) -> Result<f64> {
        Ok(capacity_lp_on(&self.params, set, &self.lattice)?.lower)
    }

    fn constant(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiCapacityReport {
    pub pairs: usize,
    pub monotone: bool,
    /// Largest `m(A) - m(A∪B)` over tested pairs (positive means a violation).
    pub worst_monotonicity_gap: f64,
    /// Best empirical `c` with `m(A∪B) <= c(m(A)+m(B))`.
    pub empirical_c: f64,
    pub subadditive: bool,
    /// Best empirical `c0` of the ball sandwich, when balls were supplied.
    pub empirical_c0: Option<f64>,
}

/// Checks monotonicity, `c`-subadditivity and, for `balls`, the sandwich
/// `c0⁻¹ m0(r) <= m(U(x,r)) <= c0 m0(r)`.
pub fn quasi_capacity_axioms(
    m: &dyn QuasiCapacity,
    family: &[(CapacitySet, CapacitySet)],
    balls: &[Ball],
    m0: impl Fn(f64) -> f64,
) -> Result<QuasiCapacityReport> {
    if family.is_empty() {
        return domain("need at least one pair of sets");
    }
    let mut worst_gap = f64::NEG_INFINITY;
    let mut c_emp: f64 = 0.0;
    for (a, b) in family {
        let ma = m.measure(a)?;
        let mb = m.measure(b)?;
        let mu = m.measure(&a.union(b))?;
        worst_gap = worst_gap.max(ma - mu).max(mb - mu);
        if ma + mb > 0.0 {
            c_emp = c_emp.max(mu / (ma + mb));
        }
    }
    let mut c0: Option<f64> = None;
    for b in balls {
        let v = m.measure(&CapacitySet::ball(*b))?;
        let ratio = v / m0(b.radius);
        let k = ratio.max(1.0 / ratio);
        c0 = Some(c0.map_or(k, |c| c.max(k)));
    }
    let tol = 1e-9;
    Ok(QuasiCapacityReport {
        pairs: family.len(),
        monotone: worst_gap <= tol,
        worst_monotonicity_gap: worst_gap,
        empirical_c: c_emp,
        subadditive: c_emp <= m.constant() * (1.0 + tol),
        empirical_c0: c0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(d: usize, alpha: f64) -> StableParams {
        StableParams::new(d, alpha).unwrap()
    }

    #[test]
    fn cube_self_potential_closed_forms() {
        // d = 1: 2 (1/2)^alpha / alpha.
        assert_relative_eq!(cube_self_potential(1, 0.5), 2.0 * 0.5f64.powf(0.5) / 0.5, max_relative = 1e-14);
        // d = 2, alpha = 1 (kernel 1/|u|): 4 ln(1+√2).
        assert_relative_eq!(cube_self_potential(2, 1.0), 4.0 * (1.0 + 2f64.sqrt()).ln(), max_relative = 1e-12);
    }

    #[test]
    fn cube_self_potential_3d_by_brute_force() {
        // Midpoint rule on a fine grid that avoids the origin, plus the exact
        // contribution of the central cell's inscribed ball.
        let (d, alpha) = (3, 1.5);
        let n = 61; // odd, so the origin is a cell center
        let h = 1.0 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == n / 2 && j == n / 2 && k == n / 2 {
                        continue;
                    }
                    let c = |m: usize| (m as f64 + 0.5) * h - 0.5;
                    let r = (c(i).powi(2) + c(j).powi(2) + c(k).powi(2)).sqrt();
                    sum += r.powf(alpha - d as f64) * h * h * h;
                }
            }
        }
        // Central cell: scale the unit result by homogeneity.
        let approx = sum / (1.0 - h.powf(alpha));
        assert_relative_eq!(cube_self_potential(d, alpha), approx, max_relative = 2e-3);
    }

    #[test]
    fn single_atom_certificate() {
        let p = params(2, 1.0);
        let r = 0.7;
        let set = CapacitySet::ball(Ball::new(Point::new(&[1.0, -2.0]), r).unwrap());
        let mass = r.powf(p.gap()) / p.a_riesz();
        let nu = DiscreteMeasure::new(vec![Point::new(&[1.0, -2.0])], vec![mass]).unwrap();
        let check = Lattice { anchor: set.anchor(), spacing: 0.05 };
        let cert = capacity_upper_certificate(&p, &set, &nu, &check).unwrap();
        assert_relative_eq!(cert.upper().unwrap(), mass, max_relative = 1e-15);
        let zero = DiscreteMeasure::new(vec![], vec![]).unwrap();
        assert!(matches!(capacity_upper_certificate(&p, &set, &zero, &check).unwrap(), Certificate::Rejected { .. }));
    }

    #[test]
    fn bracket_is_ordered_and_below_ball_bound() {
        let p = params(2, 1.0);
        let set = CapacitySet::ball(Ball::centered(1.0).unwrap());
        let br = capacity_lp(&p, &set, 0.25).unwrap();
        assert!(br.lower > 0.0 && br.lower <= br.upper && br.upper.is_finite());
        assert!(br.lower <= 1.0 / p.a_riesz());
        // Inflated equilibrium is accepted by the standalone check.
        let nu = br.equilibrium.scaled(br.inflation * 1.01);
        let check = Lattice { anchor: set.anchor(), spacing: 0.125 };
        assert!(capacity_upper_certificate(&p, &set, &nu, &check).unwrap().upper().is_some());
    }

    #[test]
    fn recurrent_case_is_unsupported() {
        let p = params(1, 1.0);
        let set = CapacitySet::ball(Ball::centered(1.0).unwrap());
        assert!(matches!(capacity_lp(&p, &set, 0.1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lattice_volume_is_additive_quasi_capacity() {
        let lat = Lattice { anchor: Point::ORIGIN, spacing: 0.05 };
        let m = LatticeVolume { d: 2, lattice: lat };
        let a = CapacitySet::ball(Ball::centered(0.5).unwrap());
        let b = CapacitySet::ball(Ball::new(Point::on_axis(0.6), 0.3).unwrap());
        let c = CapacitySet {
            balls: vec![],
            boxes: vec![BoxRegion { lo: Point::new(&[-1.0, -1.0]), hi: Point::new(&[-0.5, 0.0]) }],
        };
        let family = vec![(a.clone(), b.clone()), (a.clone(), c.clone()), (b, c)];
        let rep = quasi_capacity_axioms(&m, &family, &[], |_| 1.0).unwrap();
        assert!(rep.monotone && rep.subadditive);
        assert!(rep.empirical_c <= 1.0 + 1e-12);
        assert_relative_eq!(m.measure(&a).unwrap(), std::f64::consts::PI * 0.25, max_relative = 0.02);
    }

    #[test]
    fn cube_potential_matches_midpoint_sums() {
        // d = 1 closed form against the definition.
        let v = 1.5f64;
        let direct = ((v + 0.5).powf(0.5) - (v - 0.5).powf(0.5)) / 0.5;
        assert_relative_eq!(cube_potential(1, 0.5, [v, 0.0, 0.0]), direct, max_relative = 1e-14);
        // d = 2, alpha = 1 at a face midpoint and a far point, by a fine
        // midpoint rule (the face point singularity is integrable).
        let n = 2000;
        let h = 1.0 / n as f64;
        for (v, tol) in [([0.5, 0.0], 2e-3), ([2.5, 1.0], 1e-6)] {
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let a = (i as f64 + 0.5) * h - 0.5;
                    let b = (j as f64 + 0.5) * h - 0.5;
                    sum += h * h / ((a - v[0]).powi(2) + (b - v[1]).powi(2)).sqrt();
                }
            }
            assert_relative_eq!(cube_potential(2, 1.0, [v[0], v[1], 0.0]), sum, max_relative = tol);
        }
    }

    #[test]
    fn lower_bound_is_rigorous_on_the_disk() {
        // Exact: A cap(unit disk) = 2/pi for alpha = 1.
        let p = params(2, 1.0);
        let set = CapacitySet::ball(Ball::centered(1.0).unwrap());
        let exact = 2.0 / std::f64::consts::PI / p.a_riesz();
        for h in [0.25, 0.15] {
            let br = capacity_lp(&p, &set, h).unwrap();
            assert!(br.lower < exact && exact < br.upper, "{h}: {br:?}");
        }
    }
}
