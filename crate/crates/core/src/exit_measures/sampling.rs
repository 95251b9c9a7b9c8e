//! Exact sampling of ball exit laws and walk-on-spheres for composite regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{Ball, Point};
use crate::kernels::StableParams;
use crate::stats::wilson_interval;

/// Identifies an independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> RngStream {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Sampler for the exit position of `U(c, r)` started at `c`.
///
/// From the center, `1/|Y-c|² · r²` is Beta(α/2, 1-α/2) distributed and the
/// direction is uniform on the sphere.
#[derive(Clone, Debug)]
pub struct BallExitSampler {
    d: usize,
    beta: Beta<f64>,
}

impl BallExitSampler {
    pub fn new(p: &StableParams) -> BallExitSampler {
        let a = p.alpha() / 2.0;
        BallExitSampler { d: p.d(), beta: Beta::new(a, 1.0 - a).expect("valid beta parameters") }
    }

    /// Exit radius of the unit ball, always > 1.
    pub fn unit_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let t = self.beta.sample(rng);
            if t > 0.0 && t < 1.0 {
                return t.sqrt().recip();
            }
        }
    }

    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        use std::f64::consts::TAU;
        match self.d {
            1 => Point::on_axis(if rng.random::<bool>() { 1.0 } else { -1.0 }),
            2 => {
                let t: f64 = rng.random::<f64>() * TAU;
                Point::new(&[t.cos(), t.sin()])
            }
            _ => {
                let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
                let phi: f64 = rng.random::<f64>() * TAU;
                let s = (1.0 - z * z).max(0.0).sqrt();
                Point([s * phi.cos(), s * phi.sin(), z])
            }
        }
    }

    /// Exit position from the center of `ball`.
    pub fn sample<R: Rng + ?Sized>(&self, ball: &Ball, rng: &mut R) -> Point {
        let rho = self.unit_radius(rng);
        let w = self.direction(rng);
        ball.center + w * (ball.radius * rho)
    }
}

/// Draws from `μ_c^{U(c,r)}`. Only center starts are supported.
pub fn sample_exit<R: Rng + ?Sized>(p: &StableParams, b: &Ball, x: &Point, rng: &mut R) -> Result<Point> {
    if x.dist(&b.center) > 1e-12 * b.radius {
        return Err(Error::Contract("exit sampling requires starting at the ball center".into()));
    }
    Ok(BallExitSampler::new(p).sample(b, rng))
}

/// Open regions explored by walk-on-spheres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RegionSpec {
    Ball(Ball),
    /// Open ball minus a finite union of closed balls inside it.
    BallMinusObstacle {
        ambient: Ball,
        obstacles: Vec<Ball>,
    },
    /// `{r_inner < |y-center| < r_outer}`; the closed inner ball plays the
    /// role of the obstacle.
    Annulus {
        center: Point,
        r_inner: f64,
        r_outer: f64,
    },
}

impl RegionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegionSpec::Ball(_) => Ok(()),
            RegionSpec::BallMinusObstacle { ambient, obstacles } => {
                for o in obstacles {
                    if o.center.dist(&ambient.center) + o.radius >= ambient.radius {
                        return domain("obstacle closure must lie in the open ambient ball");
                    }
                }
                Ok(())
            }
            RegionSpec::Annulus { r_inner, r_outer, .. } => {
                if *r_inner > 0.0 && r_inner < r_outer {
                    Ok(())
                } else {
                    domain("annulus needs 0 < r_inner < r_outer")
                }
            }
        }
    }

    pub fn contains(&self, y: &Point) -> bool {
        self.distance_to_complement(y) > 0.0
    }

    /// Distance to the complement; non-positive outside the region.
    pub fn distance_to_complement(&self, y: &Point) -> f64 {
        match self {
            RegionSpec::Ball(b) => b.radius - y.dist(&b.center),
            RegionSpec::BallMinusObstacle { ambient, obstacles } => obstacles
                .iter()
                .map(|o| y.dist(&o.center) - o.radius)
                .fold(ambient.radius - y.dist(&ambient.center), f64::min),
            RegionSpec::Annulus { center, r_inner, r_outer } => {
                let r = y.dist(center);
                (r - r_inner).min(r_outer - r)
            }
        }
    }

    pub fn in_obstacle(&self, y: &Point) -> bool {
        match self {
            RegionSpec::Ball(_) => false,
            RegionSpec::BallMinusObstacle { obstacles, .. } => obstacles.iter().any(|o| o.contains_closed(y)),
            RegionSpec::Annulus { center, r_inner, .. } => y.dist(center) <= *r_inner,
        }
    }

    /// Image under `z -> offset + s*z`.
    pub fn transformed(&self, offset: Point, s: f64) -> RegionSpec {
        match self {
            RegionSpec::Ball(b) => RegionSpec::Ball(b.transformed(offset, s)),
            RegionSpec::BallMinusObstacle { ambient, obstacles } => RegionSpec::BallMinusObstacle {
                ambient: ambient.transformed(offset, s),
                obstacles: obstacles.iter().map(|o| o.transformed(offset, s)).collect(),
            },
            RegionSpec::Annulus { center, r_inner, r_outer } => {
                RegionSpec::Annulus { center: offset + *center * s, r_inner: r_inner * s, r_outer: r_outer * s }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WosConfig {
    /// Fraction of the distance to the complement used as ball radius, in (0, 1].
    pub safety_factor: f64,
    pub max_steps: usize,
}

impl Default for WosConfig {
    fn default() -> Self {
        WosConfig { safety_factor: 1.0, max_steps: 100_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub point: Point,
    pub steps: usize,
    pub hit_obstacle: bool,
}

/// One walk-on-spheres path from `x` until it leaves `region`.
pub fn wos_exit<R: Rng + ?Sized>(
    sampler: &BallExitSampler,
    region: &RegionSpec,
    x: &Point,
    rng: &mut R,
    config: &WosConfig,
) -> Result<ExitSample> {
    let mut pos = *x;
    let mut dist = region.distance_to_complement(&pos);
    if !(dist > 0.0) {
        return domain("walk must start inside the open region");
    }
    for steps in 1..=config.max_steps {
        let ball = Ball { center: pos, radius: dist * config.safety_factor };
        pos = sampler.sample(&ball, rng);
        dist = region.distance_to_complement(&pos);
        if dist <= 0.0 {
            return Ok(ExitSample { point: pos, steps, hit_obstacle: region.in_obstacle(&pos) });
        }
    }
    Err(Error::Truncated { steps: config.max_steps })
}

const CHUNK: u64 = 4096;

/// Hit counts of a batch of walks. Truncated walks are counted separately
/// and excluded from `paths`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub hits: u64,
    pub paths: u64,
    pub truncated: u64,
    pub total_steps: u64,
}

impl HitEstimate {
    pub fn fraction(&self) -> f64 {
        if self.paths == 0 {
            0.0
        } else {
            self.hits as f64 / self.paths as f64
        }
    }

    /// Wilson score interval at confidence `level`.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        wilson_interval(self.hits, self.paths, level)
    }

    pub fn truncated_fraction(&self) -> f64 {
        let all = self.paths + self.truncated;
        if all == 0 {
            0.0
        } else {
            self.truncated as f64 / all as f64
        }
    }

    pub fn mean_steps(&self) -> f64 {
        if self.paths == 0 {
            0.0
        } else {
            self.total_steps as f64 / self.paths as f64
        }
    }
}

/// Runs `paths` walks from `x` and counts obstacle hits. Streams are fixed
/// per chunk of paths, so results do not depend on the thread count.
pub fn hit_fraction(
    p: &StableParams,
    region: &RegionSpec,
    x: &Point,
    paths: u64,
    seed: u64,
    config: &WosConfig,
) -> Result<HitEstimate> {
    region.validate()?;
    if !region.contains(x) {
        return domain("walk must start inside the open region");
    }
    let sampler = BallExitSampler::new(p);
    let chunks = paths.div_ceil(CHUNK);
    let parts: Vec<HitEstimate> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let n = CHUNK.min(paths - k * CHUNK);
            let mut rng = RngStream::new(seed, k).rng();
            let mut est = HitEstimate { hits: 0, paths: 0, truncated: 0, total_steps: 0 };
            for _ in 0..n {
                match wos_exit(&sampler, region, x, &mut rng, config) {
                    Ok(s) => {
                        est.paths += 1;
                        est.total_steps += s.steps as u64;
                        est.hits += s.hit_obstacle as u64;
                    }
                    Err(_) => est.truncated += 1,
                }
            }
            est
        })
        .collect();
    Ok(parts.into_iter().fold(HitEstimate { hits: 0, paths: 0, truncated: 0, total_steps: 0 }, |a, b| HitEstimate {
        hits: a.hits + b.hits,
        paths: a.paths + b.paths,
        truncated: a.truncated + b.truncated,
        total_steps: a.total_steps + b.total_steps,
    }))
}

/// Collects exit samples of `n` walks (truncated walks are dropped and counted).
pub fn exit_samples(
    p: &StableParams,
    region: &RegionSpec,
    x: &Point,
    n: u64,
    seed: u64,
    config: &WosConfig,
) -> Result<(Vec<ExitSample>, u64)> {
    region.validate()?;
    let sampler = BallExitSampler::new(p);
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(Vec<ExitSample>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let m = CHUNK.min(n - k * CHUNK);
            let mut rng = RngStream::new(seed, k).rng();
            let mut out = Vec::with_capacity(m as usize);
            let mut dropped = 0;
            for _ in 0..m {
                match wos_exit(&sampler, region, x, &mut rng, config) {
                    Ok(s) => out.push(s),
                    Err(_) => dropped += 1,
                }
            }
            (out, dropped)
        })
        .collect();
    let mut all = Vec::with_capacity(n as usize);
    let mut dropped = 0;
    for (v, dr) in parts {
        all.extend(v);
        dropped += dr;
    }
    Ok((all, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_distance;
    use statrs::distribution::{Beta as BetaDist, ContinuousCDF};

    fn params(d: usize, alpha: f64) -> StableParams {
        StableParams::new(d, alpha).unwrap()
    }

    #[test]
    fn same_stream_same_numbers() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..4).map(|_| 0).scan(s.rng(), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(s.rng(), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(RngStream::new(7, 4).rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn off_center_sampling_is_a_contract_violation() {
        let p = params(2, 1.0);
        let b = Ball::centered(1.0).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        assert!(matches!(sample_exit(&p, &b, &Point::on_axis(0.1), &mut rng), Err(Error::Contract(_))));
        let y = sample_exit(&p, &b, &Point::ORIGIN, &mut rng).unwrap();
        assert!(y.norm() > 1.0 && y.lives_in(2));
    }

    #[test]
    fn radial_law_matches_beta_cdf() {
        let p = params(3, 1.5);
        let s = BallExitSampler::new(&p);
        let mut rng = RngStream::new(11, 0).rng();
        let radii: Vec<f64> = (0..20_000).map(|_| s.unit_radius(&mut rng)).collect();
        let beta = BetaDist::new(0.75, 0.25).unwrap();
        // P(|Y| <= rho) = P(T >= 1/rho²).
        let ks = ks_distance(&radii, |rho| 1.0 - beta.cdf(1.0 / (rho * rho)));
        assert!(ks < 0.015, "ks {ks}");
    }

    #[test]
    fn plain_ball_walk_is_one_step() {
        let p = params(2, 0.5);
        let region = RegionSpec::Ball(Ball::centered(2.0).unwrap());
        let sampler = BallExitSampler::new(&p);
        let mut rng = RngStream::new(5, 0).rng();
        for _ in 0..100 {
            let s = wos_exit(&sampler, &region, &Point::ORIGIN, &mut rng, &WosConfig::default()).unwrap();
            assert_eq!(s.steps, 1);
            assert!(!s.hit_obstacle);
        }
    }

    #[test]
    fn region_validation() {
        let ambient = Ball::centered(1.0).unwrap();
        let bad =
            RegionSpec::BallMinusObstacle { ambient, obstacles: vec![Ball::new(Point::on_axis(0.8), 0.3).unwrap()] };
        assert!(bad.validate().is_err());
        assert!(RegionSpec::Annulus { center: Point::ORIGIN, r_inner: 2.0, r_outer: 1.0 }.validate().is_err());
    }

    #[test]
    fn truncated_walks_are_counted() {
        let p = params(2, 1.0);
        let region = RegionSpec::Annulus { center: Point::ORIGIN, r_inner: 1.0, r_outer: 50.0 };
        let cfg = WosConfig { safety_factor: 1.0, max_steps: 1 };
        let est = hit_fraction(&p, &region, &Point::on_axis(10.0), 2000, 3, &cfg).unwrap();
        assert!(est.truncated > 0);
        assert_eq!(est.paths + est.truncated, 2000);
    }

    #[test]
    fn batch_is_deterministic() {
        let p = params(2, 1.0);
        let region = RegionSpec::BallMinusObstacle {
            ambient: Ball::centered(1.0).unwrap(),
            obstacles: vec![Ball::new(Point::on_axis(0.5), 0.1).unwrap()],
        };
        let a = hit_fraction(&p, &region, &Point::ORIGIN, 10_000, 42, &WosConfig::default()).unwrap();
        let b = hit_fraction(&p, &region, &Point::ORIGIN, 10_000, 42, &WosConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.hits > 0 && a.hits < a.paths);
    }
}
