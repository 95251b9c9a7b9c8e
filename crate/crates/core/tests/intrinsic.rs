use harnack_core::capacity::BoxRegion;
use harnack_core::intrinsic::{
    cloud_study, default_epsilon, metrize, normalize_w, random_cloud, random_quasi_metric, triangle_violation,
    QuasiMetricCloud, Weight,
};
use harnack_core::kernels::riesz_green;
use harnack_core::{Point, QuadratureSpec, StableParams};
use proptest::prelude::*;

fn square(h: f64) -> BoxRegion {
    BoxRegion { lo: Point::new(&[-h, -h]), hi: Point::new(&[h, h]) }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn metrization_is_a_metric_within_the_bracket(n in 3usize..40, spread in 1.0f64..8.0, seed in any::<u64>()) {
        let cloud = random_quasi_metric(n, spread, seed).unwrap();
        let m = metrize(&cloud, None).unwrap();
        prop_assert!(triangle_violation(&m.rho_tilde) <= 0.0);
        prop_assert!(m.precondition_holds);
        for i in 0..n {
            prop_assert_eq!(m.rho_tilde[i][i], 0.0);
            for j in 0..n {
                prop_assert_eq!(m.rho_tilde[i][j], m.rho_tilde[j][i]);
                if i != j {
                    let qe = cloud.q[i][j].powf(m.epsilon);
                    prop_assert!(m.rho_tilde[i][j] <= qe);
                    prop_assert!(m.rho_tilde[i][j] >= 0.25 * qe);
                }
            }
        }
        prop_assert!(m.c_achieved.is_finite());
    }
}

#[test]
fn epsilon_rule() {
    assert_eq!(default_epsilon(1.0), 1.0);
    let e = default_epsilon(3.0);
    assert!((6f64.powf(e) - 2.0).abs() < 1e-12);
}

#[test]
fn riesz_clouds_in_both_weights() {
    let p = StableParams::new(2, 1.0).unwrap();
    let quad = QuadratureSpec::default();
    for (weight, seed) in [(Weight::One, 1), (Weight::GreenCapped { y0: Point::ORIGIN }, 2)] {
        let st = cloud_study(&p, weight, &square(2.0), 200, seed, &quad).unwrap();
        assert_eq!(st.points, 200);
        assert!(st.pass, "{weight:?}: {st:?}");
        assert!(st.c_achieved.is_finite());
        assert!(st.min_ratio >= 0.25 && st.max_ratio <= 1.0);
        assert!(st.triangle_constant.is_finite());
    }
}

#[test]
fn unit_weight_reproduces_plain_kernel() {
    let p = StableParams::new(2, 1.0).unwrap();
    let (nk, sh) = normalize_w(&p, Weight::One, &square(2.0), &QuadratureSpec::default()).unwrap();
    assert!(sh.pass);
    let pts = random_cloud(2, &square(2.0), 60, 11);
    let via_kernel = QuasiMetricCloud::from_kernel(&nk, pts.clone()).unwrap();
    let q: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| pts.iter().map(|b| if a == b { 0.0 } else { 2.0 / riesz_green(&p, a, b) }).collect())
        .collect();
    let plain = QuasiMetricCloud::from_matrix(pts, q).unwrap();
    assert_eq!(via_kernel.q, plain.q);
    assert_eq!(via_kernel.kappa, plain.kappa);
    assert_eq!(metrize(&via_kernel, None).unwrap(), metrize(&plain, None).unwrap());
}
