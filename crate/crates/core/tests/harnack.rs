use harnack_core::conditions::check_lambda_g;
use harnack_core::exit_measures::{standard_family, DataFn};
use harnack_core::harnack::{
    default_deltas, derive_constants, derive_constants_exact, harnack_empirical, holder_fit, measured_c_j,
    pipeline_inputs, radius_chain, truncation_check, HarnackConstants, HarnackInputs, PipelineMeasurements,
};
use harnack_core::{Point, QuadratureSpec, StableParams};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};

fn params(d: usize, alpha: f64) -> StableParams {
    StableParams::new(d, alpha).unwrap()
}

fn golden() -> HarnackInputs {
    HarnackInputs { theta1: 0.25, theta2: 0.25, a1: 0.25, eta: 0.25, c: 1.0, c0: 1.0, c_j: 1.0 }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn golden_constants_match_hand_derivation() {
    // θ = 1/16, a = (1/4)² = 1/16, β = ηa/(4cc₀²) = 1/256.
    let theta = q(1, 16);
    let a = q(1, 16);
    let beta = q(1, 256);
    let one = BigRational::one();
    let mut j0 = 0u64;
    while &a * Pow::pow(&one + &beta, j0) <= one {
        j0 += 1;
    }
    let bound = (&one - &theta) / BigRational::from_integer(j0.into());
    let mut k0 = 1u32;
    while Pow::pow(&theta, k0 - 1) >= bound {
        k0 += 1;
    }
    let k = q(2, 1) * (&one + &beta) / (q(1, 4) * &beta * Pow::pow(&a, k0 + 2));

    let e = derive_constants_exact(&golden()).unwrap();
    assert_eq!((e.theta.clone(), e.l, e.a.clone(), e.beta.clone()), (theta, 2, a, beta));
    assert_eq!((e.j0, e.k0), (712, 4));
    assert_eq!((j0, k0), (712, 4));
    assert_eq!(e.k, k);
    assert_eq!(e.k, BigRational::from_integer(BigInt::from(2056u64 * 16u64.pow(6))));
    let hc = derive_constants(&golden()).unwrap();
    assert!((hc.k - 3.449_395_609_6e10).abs() < 1.0);
}

#[test]
fn constant_grows_as_inputs_weaken() {
    let base = derive_constants(&golden()).unwrap().k;
    let sweep = |f: &dyn Fn(&mut HarnackInputs, f64), vals: &[f64]| -> Vec<f64> {
        vals.iter()
            .map(|v| {
                let mut inp = golden();
                f(&mut inp, *v);
                derive_constants(&inp).unwrap().k
            })
            .collect()
    };
    let ks = sweep(&|i, v| i.eta = v, &[0.3, 0.25, 0.2, 0.1]);
    assert!(ks.windows(2).all(|w| w[1] > w[0]), "{ks:?}");
    let ks = sweep(&|i, v| i.c_j = v, &[1.0, 2.0, 4.0]);
    assert!(ks.windows(2).all(|w| w[1] > w[0]), "{ks:?}");
    let ks = sweep(&|i, v| i.c0 = v, &[1.0, 1.5, 3.0]);
    assert!(ks.windows(2).all(|w| w[1] > w[0]), "{ks:?}");
    assert_eq!(ks[0], base);
}

#[test]
fn chain_sum_stays_below_theta_r() {
    let hc = derive_constants(&golden()).unwrap();
    for (expo, r) in [(0.5, 1.0), (1.0, 3.0), (1.5, 0.2)] {
        let ch = radius_chain(&hc, expo, r, 40).unwrap();
        let qr = ch.ratio;
        assert!((ch.total - ch.r0 * qr / (1.0 - qr)).abs() <= 1e-12 * ch.total);
        assert!(ch.margin > 0.0 && ch.total < hc.theta * r);
    }
}

fn pipeline_constants(p: &StableParams) -> HarnackConstants {
    let c2 = check_lambda_g(p, &Point::ORIGIN, &[1.0], &QuadratureSpec::with_rel_tol(1e-8)).unwrap().constant;
    let first = pipeline_inputs(p, &PipelineMeasurements { c1: 1.0, c2, c_j: 1.0 }).unwrap();
    let c_j = measured_c_j(p, first.inputs.theta2).unwrap();
    let der = pipeline_inputs(p, &PipelineMeasurements { c1: 1.0, c2, c_j }).unwrap();
    assert_eq!(der.inputs.theta2, first.inputs.theta2);
    derive_constants(&der.inputs).unwrap()
}

#[test]
fn empirical_ratios_are_bounded_and_scale_free() {
    let quad = QuadratureSpec::default();
    for (d, alpha) in [(1, 0.5), (2, 1.0)] {
        let p = params(d, alpha);
        let hc = pipeline_constants(&p);
        let x0 = Point::new(&[0.7, -0.2][..d]);
        let reps: Vec<_> = [0.5, 1.0, 10.0]
            .iter()
            .map(|r| harnack_empirical(&p, &x0, *r, &hc, &standard_family(d, x0, *r), 5, &quad).unwrap())
            .collect();
        for rep in &reps {
            assert!(rep.pass && rep.max_ratio <= hc.k);
            assert_eq!(rep.members.len(), 6);
        }
        for i in 0..6 {
            let a = reps[0].members[i].ratio;
            for rep in &reps[1..] {
                assert!((rep.members[i].ratio - a).abs() <= 1e-6 * a, "{d} {alpha} member {i}");
            }
        }
    }
}

#[test]
fn holder_exponent_is_positive_for_indicators() {
    let p = params(1, 0.5);
    let fam: Vec<DataFn> = standard_family(1, Point::ORIGIN, 1.0)
        .into_iter()
        .filter(|f| matches!(f, DataFn::HalfSpace { .. } | DataFn::Annulus { .. }))
        .collect();
    assert_eq!(fam.len(), 3);
    let rep = holder_fit(&p, &Point::ORIGIN, 1.0, &fam, &default_deltas(1.0, 8), &QuadratureSpec::with_rel_tol(1e-9))
        .unwrap();
    assert!(rep.beta_hat.unwrap() > 0.0);
    assert!(rep.worst_excess <= 1.05 && rep.pass, "{rep:?}");
}

#[test]
fn truncated_excess_obeys_harnack() {
    let p = params(2, 1.0);
    let hc = pipeline_constants(&p);
    let f = DataFn::RadialPower { center: Point::on_axis(0.5), scale: 1.0, exponent: 0.5, cap: None };
    let (rows, pass) =
        truncation_check(&p, &Point::ORIGIN, 1.0, &hc, &f, &[1.5, 2.0, 4.0], 5, &QuadratureSpec::default()).unwrap();
    assert!(pass);
    assert!(rows.windows(2).all(|w| w[1].at_center < w[0].at_center));
}
