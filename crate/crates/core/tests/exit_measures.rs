use harnack_core::exit_measures::{
    exit_mass, exit_samples, harmonic_extend, random_nested_configs, verify_axioms, DataFn, RegionSpec, TargetSet,
    WosConfig,
};
use harnack_core::kernels::poisson_kernel_ball;
use harnack_core::{Ball, Point, QuadratureSpec, StableParams};

fn params(d: usize, alpha: f64) -> StableParams {
    StableParams::new(d, alpha).unwrap()
}

#[test]
fn axioms_hold_on_the_line() {
    let quad = QuadratureSpec::with_rel_tol(1e-6);
    for alpha in [0.5, 1.0] {
        let rep = verify_axioms(&params(1, alpha), 20, 5, &quad).unwrap();
        assert_eq!(rep.configs.len(), 20);
        assert!(rep.passes(1e-4), "alpha {alpha}: {rep:?}");
    }
}

#[test]
fn axioms_hold_in_the_plane() {
    let rep = verify_axioms(&params(2, 1.0), 4, 5, &QuadratureSpec::with_rel_tol(1e-4)).unwrap();
    assert!(rep.passes(1e-4), "{rep:?}");
}

#[test]
fn nested_configs_are_deterministic_and_admissible() {
    let a = random_nested_configs(2, 12, 9);
    assert_eq!(a, random_nested_configs(2, 12, 9));
    for c in &a {
        assert!(c.inner.center.dist(&c.outer.center) + c.inner.radius < c.outer.radius);
        assert!(c.inner.contains(&c.x));
        c.target.check_disjoint(&c.outer).unwrap();
    }
}

#[test]
fn centered_exit_mass_of_annulus_matches_closed_form() {
    // From the center, r²/|Y|² is Beta(α/2, 1-α/2); for α = 1 the mass of
    // {|Y| > 2} is I_{1/4}(1/2, 1/2) = (2/π) asin(1/2) = 1/3.
    let p = params(2, 1.0);
    let b = Ball::centered(1.0).unwrap();
    let e = TargetSet::Annulus { center: Point::ORIGIN, r_in: 2.0, r_out: f64::INFINITY };
    let m = exit_mass(&p, &b, &Point::ORIGIN, &e, &QuadratureSpec::with_rel_tol(1e-10)).unwrap();
    assert!((m - 1.0 / 3.0).abs() < 1e-9, "{m}");
}

#[test]
fn sampled_exit_positions_agree_with_quadrature() {
    let p = params(2, 1.5);
    let b = Ball::centered(1.0).unwrap();
    let x = Point::new(&[0.3, -0.2]);
    let e = TargetSet::HalfSpace { normal: Point::unit(0), offset: 1.2 };
    let exact = exit_mass(&p, &b, &x, &e, &QuadratureSpec::with_rel_tol(1e-8)).unwrap();
    let n = 200_000;
    let (samples, dropped) = exit_samples(&p, &RegionSpec::Ball(b), &x, n, 3, &WosConfig::default()).unwrap();
    assert_eq!(dropped, 0);
    let hits = samples.iter().filter(|s| e.contains(&s.point)).count() as f64 / n as f64;
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((hits - exact).abs() < 4.0 * se, "{hits} vs {exact}");
}

#[test]
fn harmonic_extension_of_indicator_matches_poisson_integral() {
    // Independent 1D oracle: trapezoid sum of the Poisson kernel on (2, 3)
    // after the substitution z = 2 + s², which removes nothing singular here.
    let p = params(1, 0.5);
    let b = Ball::centered(1.0).unwrap();
    let x = Point::on_axis(0.4);
    let f = DataFn::Annulus { center: Point::ORIGIN, r_in: 2.0, r_out: 3.0, value: 1.0 };
    let h = harmonic_extend(&p, &b, &f, &x, &QuadratureSpec::with_rel_tol(1e-10)).unwrap();
    let n = 200_000;
    let mut sum = 0.0;
    for k in 0..=n {
        let z = 2.0 + k as f64 / n as f64;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        sum += w * poisson_kernel_ball(&p, &b, &x, &Point::on_axis(z)).unwrap();
        sum += w * poisson_kernel_ball(&p, &b, &x, &Point::on_axis(-z)).unwrap();
    }
    sum /= n as f64;
    assert!((h - sum).abs() < 1e-9, "{h} vs {sum}");
}
