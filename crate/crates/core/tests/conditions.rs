use harnack_core::capacity::ball_capacity;
use harnack_core::conditions::{
    check_g3_rv, check_ggb, check_hj, check_j0, check_kkz, check_ks, check_lambda_g, default_exterior_points,
    delta0_exact, hitting_probability, hitting_probability_exact, iw_crosscheck, iw_default_grid, KsConfig,
};
use harnack_core::exit_measures::WosConfig;
use harnack_core::kernels::{theta_for_factor, NormalizationConstant, ScaleFunction};
use harnack_core::{Ball, Point, QuadratureSpec, StableParams};

fn params(d: usize, alpha: f64) -> StableParams {
    StableParams::new(d, alpha).unwrap()
}

const CASES: [(usize, f64); 4] = [(1, 0.5), (1, 1.0), (2, 1.0), (3, 1.5)];

#[test]
fn kkz_attains_the_aligned_bound() {
    for (d, alpha) in CASES {
        for theta in [0.1, 0.25, 0.4] {
            let rep = check_kkz(&params(d, alpha), theta, 10_000, 1).unwrap();
            let bound = (1.0 + 2.0 * theta).powf(d as f64 + alpha);
            assert!((rep.constant - bound).abs() <= 1e-9 * bound, "{d} {alpha} {theta}: {}", rep.constant);
            assert!(rep.pass);
        }
    }
}

#[test]
fn delta0_is_scale_invariant_and_matches_oracle() {
    // 1 - (2/π) asin(1/16), computed independently.
    let golden = 0.960_185_314_461_422_5;
    let quad = QuadratureSpec::with_rel_tol(1e-12);
    let p = params(1, 1.0);
    assert!((delta0_exact(&p, 0.25) - golden).abs() < 1e-14);
    for (d, alpha) in CASES {
        let p = params(d, alpha);
        let x = Point::new(&[0.3, -1.0, 2.0][..d]);
        let rep = check_j0(&p, &x, 0.25, &[0.5, 1.0, 10.0], &quad).unwrap();
        assert!(rep.details["spread"] <= 1e-8 * rep.constant, "{d} {alpha}: {:?}", rep.details);
        assert!((rep.constant - delta0_exact(&p, 0.25)).abs() < 1e-8);
    }
}

#[test]
fn delta0_decreases_in_theta() {
    let p = params(2, 1.0);
    let v: Vec<f64> = [0.1, 0.2, 0.3].iter().map(|t| delta0_exact(&p, *t)).collect();
    assert!(v[0] > v[1] && v[1] > v[2]);
}

#[test]
fn hj_constant_is_scale_invariant() {
    for (d, alpha) in CASES {
        let p = params(d, alpha);
        let c: Vec<f64> = [0.5, 1.0, 10.0]
            .iter()
            .map(|r| {
                check_hj(&p, &Point::ORIGIN, *r, 0.25, &default_exterior_points(d, &Point::ORIGIN, *r))
                    .unwrap()
                    .constant
            })
            .collect();
        for v in &c {
            assert!(*v >= 1.0);
            assert!((v - c[0]).abs() <= 1e-6 * c[0], "{d} {alpha}: {c:?}");
        }
    }
}

#[test]
fn ggb_holds_on_its_domain() {
    let quad = QuadratureSpec::with_rel_tol(1e-8);
    for (d, alpha) in [(1, 0.5), (2, 1.0), (3, 1.5)] {
        let p = params(d, alpha);
        let c_d = ScaleFunction::green_matched(&p).unwrap().doubling();
        let theta = 0.99 * theta_for_factor(&p, 2.0 * c_d).unwrap();
        let rep = check_ggb(&p, &Point::ORIGIN, 1.0, theta, &quad).unwrap();
        assert!(rep.pass && rep.constant >= 0.5, "{d} {alpha}: {}", rep.constant);
    }
}

#[test]
fn iw_agrees_with_poisson_kernel_and_detects_perturbations() {
    let quad = QuadratureSpec::with_rel_tol(1e-3);
    for (d, alpha) in [(1, 0.5), (1, 1.0), (2, 1.0)] {
        let p = params(d, alpha);
        let b = Ball::centered(1.0).unwrap();
        let (xs, zs) = iw_default_grid(d, &b);
        let rep = iw_crosscheck(&p, &b, &xs, &zs, &quad).unwrap();
        assert!(rep.constant <= 0.02, "{d} {alpha}: {}", rep.constant);
        for which in [NormalizationConstant::Riesz, NormalizationConstant::Levy, NormalizationConstant::Poisson] {
            let q = p.perturbed(which, 1.05);
            let e = iw_crosscheck(&q, &b, &xs[..1], &zs[..1], &quad).unwrap().constant;
            assert!(e > 0.04, "{d} {alpha} {which:?}: {e}");
        }
    }
}

#[test]
fn lambda_g_is_attained_at_the_center() {
    let quad = QuadratureSpec::with_rel_tol(1e-8);
    let p = params(2, 1.0);
    let rep = check_lambda_g(&p, &Point::ORIGIN, &[0.5, 1.0, 4.0], &quad).unwrap();
    assert!((rep.constant - 2.0).abs() < 1e-6, "{}", rep.constant);
    assert!(rep.details["spread"] < 1e-6);
}

#[test]
fn hitting_probability_matches_closed_form() {
    // I_{1/4}(1/2, 1/2) = 1/3 for (2, 1) from distance 2.
    let p = params(2, 1.0);
    assert!((hitting_probability_exact(&p, 1.0, 2.0) - 1.0 / 3.0).abs() < 1e-14);
    let h =
        hitting_probability(&p, &Point::ORIGIN, 1.0, &Point::on_axis(2.0), 200_000, 4, &WosConfig::default()).unwrap();
    assert!((h.extrapolated - 1.0 / 3.0).abs() < 4.0 * h.std_error, "{h:?}");
    let rep = check_g3_rv(&p, &Point::ORIGIN, 1.0, &[1.5, 3.0], 50_000, 2, Some(0.125)).unwrap();
    assert!(rep.constant.is_finite() && rep.constant >= 1.0, "{rep:?}");
}

#[test]
fn ks_holds_for_three_obstacle_sizes() {
    let p = params(2, 1.0);
    let outer = Ball::centered(1.0).unwrap();
    let theta = 0.25;
    let cfg = KsConfig { paths: 100_000, ..KsConfig::default() };
    let mut prev = f64::INFINITY;
    for f in [0.25, 0.125, 0.0625] {
        let ob = Ball::new(Point::on_axis(theta / 2.0), f * theta).unwrap();
        let rep = check_ks(&p, &outer, &[ob], theta, &Point::ORIGIN, 0.125, &cfg).unwrap();
        assert!(rep.pass, "{f}: {rep:?}");
        assert!(rep.details["hit_fraction"] < prev);
        prev = rep.details["hit_fraction"];
        assert!(rep.details["cap_obstacle_lower"] <= ball_capacity(&p, f * theta).unwrap());
    }
}
