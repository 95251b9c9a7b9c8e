//! Adaptive Gauss-Kronrod quadrature and spherical integration.
//!
//! The 1-d integrator is a global adaptive scheme in the style of QUADPACK's
//! QAG with the 10/21-point Gauss-Kronrod pair. Multi-dimensional integrals
//! are built by nesting it over the angular and radial variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Frame, Point};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208665567620,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Tolerances for adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { rel_tol: 1e-6, abs_tol: 1e-14, max_subdivisions: 200 }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureSpec { rel_tol, ..Default::default() }
    }

    /// Spec for an inner integral of a nested scheme.
    pub fn inner(&self) -> Self {
        QuadratureSpec { rel_tol: self.rel_tol * 0.1, abs_tol: self.abs_tol * 0.1, ..*self }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Estimate {
    integrate_with_breaks(f, &[a, b], spec)
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, seeding the adaptive
/// scheme with one panel per consecutive pair of (sorted) breakpoints.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], spec: &QuadratureSpec) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, error) = gk21(&mut f, a, b);
        evaluations += 21;
        total += value;
        total_err += error;
        heap.push(Panel { a, b, value, error });
    }
    let mut subdivisions = heap.len();
    let tolerance = |total: f64| spec.abs_tol.max(spec.rel_tol * total.abs());
    while total_err > tolerance(total) && subdivisions < spec.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        subdivisions += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Estimate { value, error, evaluations, converged: error <= tolerance(value) }
}

/// Like [`integrate_with_breaks`], but each panel is mapped through the
/// smoothstep `t = a + (b-a)(3σ² - 2σ³)`, which flattens algebraic endpoint
/// singularities at the breakpoints.
pub fn integrate_smoothed<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], spec: &QuadratureSpec) -> Estimate {
    let total_width = breaks.last().copied().unwrap_or(0.0) - breaks.first().copied().unwrap_or(0.0);
    let mut out = Estimate { converged: true, ..Default::default() };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let h = b - a;
        let panel_spec = QuadratureSpec { abs_tol: spec.abs_tol * h / total_width, ..*spec };
        let e = integrate(
            |sg: f64| {
                let jac = 6.0 * sg * (1.0 - sg) * h;
                if jac == 0.0 {
                    return 0.0;
                }
                jac * f(a + h * sg * sg * (3.0 - 2.0 * sg))
            },
            0.0,
            1.0,
            &panel_spec,
        );
        out.value += e.value;
        out.error += e.error;
        out.evaluations += e.evaluations;
        out.converged &= e.converged;
    }
    out
}

/// Integrates `f(ω)` against surface measure on the unit sphere S^{d-1}
/// (counting measure on {±axis} for d = 1). The parametrization puts
/// `frame.axis` at the pole, where integrands are expected to peak.
pub fn integrate_sphere<F: FnMut(&Point) -> f64>(d: usize, frame: &Frame, mut f: F, spec: &QuadratureSpec) -> Estimate {
    use std::f64::consts::PI;
    match d {
        1 => {
            let v = f(&frame.axis) + f(&-frame.axis);
            Estimate { value: v, error: 0.0, evaluations: 2, converged: true }
        }
        2 => integrate_with_breaks(
            |t: f64| {
                let w = frame.axis * t.cos() + frame.e1 * t.sin();
                f(&w)
            },
            &[-PI, 0.0, PI],
            spec,
        ),
        3 => {
            let inner = spec.inner();
            let mut evals = 0;
            let mut ok = true;
            let mut est = integrate(
                |theta: f64| {
                    let (st, ct) = theta.sin_cos();
                    let e = integrate(
                        |phi: f64| {
                            let (sp, cp) = phi.sin_cos();
                            let w = frame.axis * ct + (frame.e1 * cp + frame.e2 * sp) * st;
                            f(&w)
                        },
                        0.0,
                        2.0 * PI,
                        &inner,
                    );
                    evals += e.evaluations;
                    ok &= e.converged;
                    st * e.value
                },
                0.0,
                PI,
                spec,
            );
            est.evaluations += evals;
            est.converged &= ok;
            est
        }
        _ => panic!("spherical integration implemented for d <= 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_rule_exact_on_polynomials() {
        // 21-point Kronrod is exact through degree 31.
        let spec = QuadratureSpec { max_subdivisions: 1, ..Default::default() };
        for k in 0..=31 {
            let e = integrate(|x| x.powi(k), 0.0, 1.0, &spec);
            assert_relative_eq!(e.value, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn endpoint_singularity_converges() {
        let e = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, &QuadratureSpec::with_rel_tol(1e-10));
        assert!(e.converged);
        assert_relative_eq!(e.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn kink_with_breakpoint_is_cheap() {
        let spec = QuadratureSpec::with_rel_tol(1e-12);
        let with = integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], &spec);
        assert_relative_eq!(with.value, 0.5 * (0.09 + 0.49), max_relative = 1e-13);
        assert_eq!(with.evaluations, 42);
    }

    #[test]
    fn sphere_areas() {
        let spec = QuadratureSpec::with_rel_tol(1e-12);
        for d in 1..=3 {
            let e = integrate_sphere(d, &Frame::standard(), |_| 1.0, &spec);
            assert_relative_eq!(e.value, crate::geometry::sphere_area(d), max_relative = 1e-12);
        }
        // Second moment of a coordinate: area / d.
        let frame = Frame::along(&Point::new(&[1.0, 2.0, 3.0]), 3);
        let e = integrate_sphere(3, &frame, |w| w.0[0] * w.0[0], &spec);
        assert_relative_eq!(e.value, 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-10);
    }
}
