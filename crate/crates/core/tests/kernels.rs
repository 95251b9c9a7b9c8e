use std::f64::consts::PI;

use harnack_core::kernels::{
    green_function_ball, green_function_ball_closed, levy_density, poisson_kernel_ball, riesz_green,
};
use harnack_core::{Ball, Point, QuadratureSpec, StableParams};

#[test]
fn cauchy_process_on_the_line() {
    let p = StableParams::new(1, 1.0).unwrap();
    let b = Ball::centered(1.0).unwrap();
    // P(0, z) = (1/π) (z² - 1)^{-1/2} / |z|.
    let v = poisson_kernel_ball(&p, &b, &Point::ORIGIN, &Point::on_axis(2.0)).unwrap();
    assert!((v - 1.0 / (2.0 * 3f64.sqrt() * PI)).abs() < 1e-15);
    let n = levy_density(&p, &Point::on_axis(0.5)).unwrap();
    assert!((n - 4.0 / PI).abs() < 1e-14);
}

#[test]
fn riesz_kernel_in_three_dimensions() {
    // α = 1: G(x, y) = |x - y|^{-2} / (2π²).
    let p = StableParams::new(3, 1.0).unwrap();
    let g = riesz_green(&p, &Point::ORIGIN, &Point([1.0, 2.0, 2.0]));
    assert!((g - 1.0 / (9.0 * 2.0 * PI * PI)).abs() < 1e-16);
}

#[test]
fn ball_green_forms_agree_off_center() {
    let quad = QuadratureSpec::with_rel_tol(1e-10);
    for (d, alpha) in [(1, 0.5), (2, 1.0), (3, 1.5)] {
        let p = StableParams::new(d, alpha).unwrap();
        let b = Ball::new(Point::new(&[0.5, -0.5, 1.0][..d]), 2.0).unwrap();
        let x = b.center + Point::unit(0) * 0.7;
        let y = b.center - Point::unit(0) * 0.4;
        let a = green_function_ball(&p, &b, &x, &y, &quad).unwrap();
        let c = green_function_ball_closed(&p, &b, &x, &y);
        assert!((a - c).abs() < 1e-8 * c, "{d} {alpha}: {a} {c}");
        assert!(c < riesz_green(&p, &x, &y));
    }
}
