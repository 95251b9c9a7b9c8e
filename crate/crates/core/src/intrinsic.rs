//! Normalization by an excessive weight `w` and metrization of the
//! quasi-metric `q = G̃⁻¹(x,y) + G̃⁻¹(y,x)` on finite point clouds.
//!
//! For the weight `w = G(·, y0) ∧ 1` the kernel `G̃(x,y) = G(x,y)/(w(x)w(y))`
//! is symmetric, and `q^ε` chained along shortest paths is a metric `ρ̃`
//! comparable to `q^ε` once `(2κ)^ε <= 2`, where `κ` is the quasi-triangle
//! constant of `q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::BoxRegion;
use crate::conditions::check_hj;
use crate::error::{domain, Error, Result};
use crate::exit_measures::{ExitMeasure, RayCrossings};
use crate::geometry::{Ball, Point};
use crate::kernels::{riesz_green, StableParams};
use crate::quad::QuadratureSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    One,
    /// `w = min(G(·, y0), 1)`.
    GreenCapped {
        y0: Point,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedKernel {
    pub params: StableParams,
    pub weight: Weight,
    pub region: BoxRegion,
    /// Infimum of `w` over the region.
    pub lambda_inf: f64,
}

impl NormalizedKernel {
    pub fn w(&self, x: &Point) -> f64 {
        match self.weight {
            Weight::One => 1.0,
            Weight::GreenCapped { y0 } => riesz_green(&self.params, x, &y0).min(1.0),
        }
    }

    pub fn g(&self, x: &Point, y: &Point) -> f64 {
        riesz_green(&self.params, x, y)
    }

    pub fn g_tilde(&self, x: &Point, y: &Point) -> f64 {
        match self.weight {
            Weight::One => self.g(x, y),
            Weight::GreenCapped { .. } => self.g(x, y) / (self.w(x) * self.w(y)),
        }
    }

    /// Radius of the sphere where `G(·, y0) = 1`, across which `w` has a kink.
    fn level_radius(&self) -> Option<(Point, f64)> {
        match self.weight {
            Weight::One => None,
            Weight::GreenCapped { y0 } => Some((y0, self.params.a_riesz().powf(1.0 / self.params.gap()))),
        }
    }
}

impl RayCrossings for NormalizedKernel {
    fn crossings(&self, origin: &Point, dir: &Point, out: &mut Vec<f64>) {
        if let Some((y0, r)) = self.level_radius() {
            Ball { center: y0, radius: r }.ray_crossings(origin, dir, out);
        }
    }
}

/// Result of testing `∫ w dμ_x^U <= w(x)` on sample balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicReport {
    pub balls: usize,
    /// Largest `∫ w dμ_x^U / w(x)`.
    pub worst_ratio: f64,
    pub pass: bool,
}

fn region_contains(region: &BoxRegion, d: usize, x: &Point) -> bool {
    (0..d).all(|i| x.0[i] > region.lo.0[i] && x.0[i] < region.hi.0[i])
}

/// Builds `w`, `G̃` and `λ = inf w` over `region`, and tests the
/// superharmonicity of `w` on balls inside the region that avoid `y0`.
pub fn normalize_w(
    p: &StableParams,
    weight: Weight,
    region: &BoxRegion,
    quad: &QuadratureSpec,
) -> Result<(NormalizedKernel, SuperharmonicReport)> {
    p.require_transient("the normalized kernel")?;
    let d = p.d();
    if (0..d).any(|i| !(region.lo.0[i] < region.hi.0[i])) {
        return domain("region box is empty");
    }
    let lambda_inf = match weight {
        Weight::One => 1.0,
        Weight::GreenCapped { y0 } => {
            if !region_contains(region, d, &y0) {
                return domain("anchor point must lie in the region interior");
            }
            let far = (0..d).map(|i| (y0.0[i] - region.lo.0[i]).abs().max((region.hi.0[i] - y0.0[i]).abs()).powi(2));
            let dmax = far.sum::<f64>().sqrt();
            (p.a_riesz() * dmax.powf(-p.gap())).min(1.0)
        }
    };
    let nk = NormalizedKernel { params: *p, weight, region: *region, lambda_inf };

    // Sample balls: a 3^d grid of centers, radius a fifth of the smallest side.
    let side = (0..d).map(|i| region.hi.0[i] - region.lo.0[i]).fold(f64::INFINITY, f64::min);
    let rad = side / 5.0;
    let mut balls = vec![];
    let steps = [0.25, 0.5, 0.75];
    for a in 0..3 {
        for b in 0..if d >= 2 { 3 } else { 1 } {
            for c in 0..if d >= 3 { 3 } else { 1 } {
                let mut ctr = region.lo;
                for (i, k) in [a, b, c].iter().enumerate().take(d) {
                    ctr.0[i] = region.lo.0[i] + steps[*k] * (region.hi.0[i] - region.lo.0[i]);
                }
                let ball = Ball { center: ctr, radius: rad };
                let avoids = match weight {
                    Weight::One => true,
                    Weight::GreenCapped { y0 } => !ball.contains_closed(&y0),
                };
                if avoids {
                    balls.push(ball);
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for b in &balls {
        for x in [b.center, b.center + Point::unit(0) * (0.5 * b.radius)] {
            let mu = ExitMeasure::new(p, b, &x)?;
            let integral = mu.integrate(|y| nk.w(y), &[&nk as &dyn RayCrossings], quad).value;
            worst = worst.max(integral / nk.w(&x));
            count += 1;
        }
    }
    let report = SuperharmonicReport { balls: count, worst_ratio: worst, pass: worst <= 1.0 + 1e-4 };
    Ok((nk, report))
}

/// Exhaustive `c̃ = max min(G̃(x,z), G̃(y,z)) / G̃(x,y)` over distinct triples
/// of a kernel matrix, with the maximizing triple.
pub fn triangle_constant(gt: &[Vec<f64>]) -> Result<(f64, [usize; 3])> {
    let n = gt.len();
    if n < 3 {
        return domain("need at least three points");
    }
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (0.0, [0, 0, 0]);
            for y in 0..n {
                if y == x {
                    continue;
                }
                for z in 0..n {
                    if z == x || z == y {
                        continue;
                    }
                    let v = gt[x][z].min(gt[y][z]) / gt[x][y];
                    if v > best.0 {
                        best = (v, [x, y, z]);
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, [0, 0, 0]), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricCloud {
    pub points: Vec<Point>,
    pub q: Vec<Vec<f64>>,
    /// `max q(x,z) / (q(x,y) + q(y,z))` over triples.
    pub kappa: f64,
}

pub const MAX_CLOUD: usize = 2000;

impl QuasiMetricCloud {
    /// Validates a symmetric matrix with zero diagonal and positive entries
    /// elsewhere, and computes its quasi-triangle constant.
    pub fn from_matrix(points: Vec<Point>, q: Vec<Vec<f64>>) -> Result<QuasiMetricCloud> {
        let n = q.len();
        if n > MAX_CLOUD {
            return domain(format!("clouds are limited to {MAX_CLOUD} points"));
        }
        if points.len() != n || q.iter().any(|row| row.len() != n) {
            return domain("matrix must be square and match the point count");
        }
        for i in 0..n {
            if q[i][i] != 0.0 {
                return domain("diagonal must vanish");
            }
            for j in 0..n {
                if i != j && !(q[i][j] > 0.0 && q[i][j].is_finite()) {
                    return domain(format!("entry ({i},{j}) must be positive and finite"));
                }
                if q[i][j] != q[j][i] {
                    return domain(format!("matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        let kappa = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut k: f64 = 1.0;
                for y in 0..n {
                    if y == x {
                        continue;
                    }
                    for z in 0..n {
                        if z != x && z != y {
                            k = k.max(q[x][z] / (q[x][y] + q[y][z]));
                        }
                    }
                }
                k
            })
            .reduce(|| 1.0, f64::max);
        Ok(QuasiMetricCloud { points, q, kappa })
    }

    /// `q(x,y) = G̃(x,y)⁻¹ + G̃(y,x)⁻¹` on `points`.
    pub fn from_kernel(nk: &NormalizedKernel, points: Vec<Point>) -> Result<QuasiMetricCloud> {
        let n = points.len();
        let q: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            1.0 / nk.g_tilde(&points[i], &points[j]) + 1.0 / nk.g_tilde(&points[j], &points[i])
                        }
                    })
                    .collect()
            })
            .collect();
        QuasiMetricCloud::from_matrix(points, q)
    }
}

/// `min(1, ln 2 / ln(2κ))`, the largest `ε` with `(2κ)^ε <= 2`.
pub fn default_epsilon(kappa: f64) -> f64 {
    if 2.0 * kappa <= 2.0 {
        1.0
    } else {
        (2f64.ln() / (2.0 * kappa).ln()).min(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetrizationResult {
    pub rho_tilde: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub gamma: f64,
    /// Smallest `C` with `C⁻¹ ρ̃^{-γ} <= G̃ <= C ρ̃^{-γ}`, where `G̃ = 2/q`.
    pub c_achieved: f64,
    /// Whether `(2κ)^ε <= 2`, under which `ρ̃ >= q^ε/4` is guaranteed.
    pub precondition_holds: bool,
    /// Smallest `ρ̃ / q^ε` over pairs.
    pub min_ratio: f64,
    pub warnings: Vec<String>,
}

/// Shortest-path chaining of `q^ε` (Floyd–Warshall).
pub fn metrize(cloud: &QuasiMetricCloud, epsilon: Option<f64>) -> Result<MetrizationResult> {
    let eps = epsilon.unwrap_or_else(|| default_epsilon(cloud.kappa));
    if !(eps > 0.0 && eps <= 1.0) {
        return domain(format!("epsilon must lie in (0, 1], got {eps}"));
    }
    let n = cloud.q.len();
    let qe: Vec<Vec<f64>> = cloud.q.iter().map(|row| row.iter().map(|v| v.powf(eps)).collect()).collect();
    let mut rho = qe.clone();
    // Sweep until stable: the triangle inequality then holds exactly in floats.
    loop {
        let mut changed = false;
        for k in 0..n {
            let row_k = rho[k].clone();
            changed |= rho
                .par_iter_mut()
                .map(|row| {
                    let rik = row[k];
                    let mut c = false;
                    for j in 0..n {
                        let via = rik + row_k[j];
                        if via < row[j] {
                            row[j] = via;
                            c = true;
                        }
                    }
                    c
                })
                .reduce(|| false, |a, b| a || b);
        }
        if !changed {
            break;
        }
    }
    let precondition_holds = (2.0 * cloud.kappa).powf(eps) <= 2.0 * (1.0 + 1e-12);
    let mut warnings = vec![];
    if !precondition_holds {
        warnings.push(format!(
            "(2 kappa)^epsilon = {} exceeds 2; lower bound not guaranteed",
            (2.0 * cloud.kappa).powf(eps)
        ));
    }
    let gamma = 1.0 / eps;
    let mut c: f64 = 1.0;
    let mut min_ratio = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            min_ratio = min_ratio.min(rho[i][j] / qe[i][j]);
            let t = 2.0 / cloud.q[i][j] * rho[i][j].powf(gamma);
            c = c.max(t).max(1.0 / t);
        }
    }
    Ok(MetrizationResult {
        rho_tilde: rho,
        epsilon: eps,
        gamma,
        c_achieved: c,
        precondition_holds,
        min_ratio,
        warnings,
    })
}

/// Largest violation of the triangle inequality in a matrix (zero for a metric).
pub fn triangle_violation(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                worst = worst.max(m[x][z] - (m[x][y] + m[y][z]));
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub beta: f64,
    pub lambda: f64,
    pub c: f64,
    pub checks: usize,
    pub inner_failures: usize,
    pub outer_failures: usize,
    pub pass: bool,
}

/// `Ũ(x, βr) ⊂ V(x, C⁻¹ r^γ) ⊂ Ũ(x, r)` on the cloud, with
/// `Ũ(x, s) = {ρ̃(x,·) < s}`, `V(x, s) = {G(·,x)⁻¹ < s}` and
/// `β = (λ/C)^{2/γ}`.
pub fn verify_inclusions(
    nk: &NormalizedKernel,
    mr: &MetrizationResult,
    cloud: &QuasiMetricCloud,
    centers: &[usize],
    radii: &[f64],
) -> Result<InclusionReport> {
    let n = cloud.points.len();
    if mr.rho_tilde.len() != n {
        return domain("metrization does not match the cloud");
    }
    if centers.iter().any(|&c| c >= n) {
        return domain("center index out of range");
    }
    let (lambda, c, gamma) = (nk.lambda_inf, mr.c_achieved, mr.gamma);
    let beta = (lambda / c).powf(2.0 / gamma);
    let mut inner_failures = 0;
    let mut outer_failures = 0;
    let mut checks = 0;
    for &x in centers {
        let px = cloud.points[x];
        let ginv: Vec<f64> = cloud.points.iter().map(|y| 1.0 / nk.g(y, &px)).collect();
        for &r in radii {
            let s = r.powf(gamma) / c;
            for y in 0..n {
                let in_small = mr.rho_tilde[x][y] < beta * r;
                let in_v = ginv[y] < s;
                let in_big = mr.rho_tilde[x][y] < r;
                inner_failures += (in_small && !in_v) as usize;
                outer_failures += (in_v && !in_big) as usize;
                checks += 1;
            }
        }
    }
    Ok(InclusionReport {
        beta,
        lambda,
        c,
        checks,
        inner_failures,
        outer_failures,
        pass: inner_failures == 0 && outer_failures == 0,
    })
}

/// `μ̃_x^U = (w / w(x)) μ_x^U`.
pub struct NormalizedExit<'a> {
    pub kernel: &'a NormalizedKernel,
    pub mu: ExitMeasure,
    pub wx: f64,
}

pub fn normalized_measures<'a>(nk: &'a NormalizedKernel, b: &Ball, x: &Point) -> Result<NormalizedExit<'a>> {
    let mu = ExitMeasure::new(&nk.params, b, x)?;
    Ok(NormalizedExit { kernel: nk, mu, wx: nk.w(x) })
}

impl NormalizedExit<'_> {
    /// `∫ φ dμ̃_x^U`.
    pub fn integrate<F: Fn(&Point) -> f64>(&self, phi: F, breaks: &[&dyn RayCrossings], quad: &QuadratureSpec) -> f64 {
        let mut all: Vec<&dyn RayCrossings> = breaks.to_vec();
        all.push(self.kernel);
        self.mu.integrate(|y| phi(y) * self.kernel.w(y), &all, quad).value / self.wx
    }

    /// `‖μ̃_x^U‖`; at most one by superharmonicity of `w`.
    pub fn mass(&self, quad: &QuadratureSpec) -> f64 {
        self.integrate(|_| 1.0, &[], quad)
    }

    /// `∫ φ dμ_x^U` with the plain exit measure.
    pub fn plain(&self, phi: impl Fn(&Point) -> f64, breaks: &[&dyn RayCrossings], quad: &QuadratureSpec) -> f64 {
        self.mu.integrate(phi, breaks, quad).value
    }
}

/// Radius of `V(x, s) = {y : G(y,x)⁻¹ < s}` found by bisection on the kernel.
pub fn level_set_radius(p: &StableParams, s: f64) -> Result<f64> {
    p.require_transient("level sets of the Green function")?;
    if !(s > 0.0) {
        return domain("level must be positive");
    }
    let inside = |t: f64| 1.0 / riesz_green(p, &Point::ORIGIN, &Point::on_axis(t)) < s;
    let (mut lo, mut hi) = (0.0, 1.0);
    while inside(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The (HJ) constant for the level sets `V(x, θs) ⊂ V(x, s)`, which are
/// balls of radii `ρ(θs) < ρ(s)`. Returns the raw density-ratio maxima for
/// the level-set pair and for the unit pair with shrink ratio `ρ(θs)/ρ(s)`.
pub fn hj_level_sets(p: &StableParams, x: &Point, s: f64, theta: f64) -> Result<(f64, f64)> {
    let outer = level_set_radius(p, s)?;
    let inner = level_set_radius(p, theta * s)?;
    let ratio = inner / outer;
    let pts = crate::conditions::default_exterior_points(p.d(), x, outer);
    let a = check_hj(p, x, outer, ratio, &pts)?.details["raw_max"];
    let unit = crate::conditions::default_exterior_points(p.d(), &Point::ORIGIN, 1.0);
    let b = check_hj(p, &Point::ORIGIN, 1.0, theta.powf(1.0 / p.gap()), &unit)?.details["raw_max"];
    Ok((a, b))
}

/// `n` points uniform in `region`.
pub fn random_cloud(d: usize, region: &BoxRegion, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut c = [0.0; 3];
            for (i, ci) in c.iter_mut().enumerate().take(d) {
                *ci = region.lo.0[i] + rng.random::<f64>() * (region.hi.0[i] - region.lo.0[i]);
            }
            Point(c)
        })
        .collect()
}

/// Symmetric positive matrix with zero diagonal, entries in `[1, spread]`.
pub fn random_quasi_metric(n: usize, spread: f64, seed: u64) -> Result<QuasiMetricCloud> {
    if n == 0 || !(spread >= 1.0) {
        return Err(Error::Domain("need n > 0 and spread >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = spread.powf(rng.random::<f64>());
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    QuasiMetricCloud::from_matrix(vec![Point::ORIGIN; n], q)
}

/// Full intrinsic-metric study of a random cloud in `region`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudStudy {
    pub points: usize,
    pub superharmonic: SuperharmonicReport,
    /// Empirical `c̃` of the (w,w)-triangle property on the cloud.
    pub triangle_constant: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub triangle_violation: f64,
    /// Extremes of `ρ̃ / q^ε` over pairs; the bracket is `[1/4, 1]`.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub c_achieved: f64,
    pub precondition_holds: bool,
    pub inclusions: InclusionReport,
    pub pass: bool,
}

pub fn cloud_study(
    p: &StableParams,
    weight: Weight,
    region: &BoxRegion,
    n: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<CloudStudy> {
    let (nk, superharmonic) = normalize_w(p, weight, region, quad)?;
    let pts = random_cloud(p.d(), region, n, seed);
    let gt: Vec<Vec<f64>> =
        pts.iter().map(|a| pts.iter().map(|b| if a == b { 0.0 } else { nk.g_tilde(a, b) }).collect()).collect();
    let (c_tri, _) = triangle_constant(&gt)?;
    let cloud = QuasiMetricCloud::from_kernel(&nk, pts)?;
    let mr = metrize(&cloud, None)?;
    let m = cloud.q.len();
    let mut max_ratio: f64 = 0.0;
    let mut all = vec![];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                max_ratio = max_ratio.max(mr.rho_tilde[i][j] / cloud.q[i][j].powf(mr.epsilon));
                all.push(mr.rho_tilde[i][j]);
            }
        }
    }
    all.sort_by(f64::total_cmp);
    let radii: Vec<f64> =
        [0.1, 0.25, 0.5, 0.75, 0.9].iter().map(|f| all[((all.len() - 1) as f64 * f) as usize]).collect();
    let centers: Vec<usize> = (0..m.min(10)).collect();
    let inclusions = verify_inclusions(&nk, &mr, &cloud, &centers, &radii)?;
    let triangle_violation = triangle_violation(&mr.rho_tilde);
    let pass = superharmonic.pass
        && triangle_violation <= 0.0
        && mr.min_ratio >= 0.25
        && max_ratio <= 1.0
        && mr.c_achieved.is_finite()
        && inclusions.pass;
    Ok(CloudStudy {
        points: m,
        superharmonic,
        triangle_constant: c_tri,
        kappa: cloud.kappa,
        epsilon: mr.epsilon,
        triangle_violation,
        min_ratio: mr.min_ratio,
        max_ratio,
        c_achieved: mr.c_achieved,
        precondition_holds: mr.precondition_holds,
        inclusions,
        pass,
    })
}
