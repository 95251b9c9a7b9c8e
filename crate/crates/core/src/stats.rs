//! Small statistics helpers for the Monte Carlo checks.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson_interval(hits: u64, n: u64, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = z_for_level(level);
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One-sample Kolmogorov-Smirnov distance between `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |worst, (i, &x)| {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        worst.max(lo).max(hi)
    })
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Ordinary least squares fit `y ≈ slope*x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_proportion() {
        let (lo, hi) = wilson_interval(300, 1000, 0.99);
        assert!(lo < 0.3 && hi > 0.3);
        assert!(hi - lo < 0.08);
        let (lo0, _) = wilson_interval(0, 1000, 0.99);
        assert_eq!(lo0, 0.0);
    }

    #[test]
    fn z_values() {
        assert!((z_for_level(0.95) - 1.959964).abs() < 1e-5);
        assert!((z_for_level(0.99) - 2.575829).abs() < 1e-5);
    }

    #[test]
    fn ks_of_uniform_grid() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_distance(&s, |x| x) - 0.005).abs() < 1e-12);
        assert_eq!(ks_two_sample(&s, &s), 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (m, b) = linear_fit(&xs, &ys);
        assert!((m - 2.0).abs() < 1e-14 && (b + 1.0).abs() < 1e-14);
    }
}
