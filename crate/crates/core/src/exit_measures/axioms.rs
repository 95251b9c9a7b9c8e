//! Randomized checks of total mass, composition and mean-value property.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{composition_residual, exit_mass, harmonicity_residual, standard_family, RngStream, TargetSet};
use crate::error::Result;
use crate::geometry::{Ball, Point};
use crate::kernels::StableParams;
use crate::quad::QuadratureSpec;

/// Ball `inner` with closure inside `outer`, a start point in `inner` and
/// a target set disjoint from `outer`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedConfig {
    pub outer: Ball,
    pub inner: Ball,
    pub x: Point,
    pub target: TargetSet,
    /// Index into [`standard_family`] of the data used for harmonicity.
    pub data_index: usize,
}

fn random_direction<R: Rng>(d: usize, rng: &mut R) -> Point {
    loop {
        let mut v = Point::ORIGIN;
        for i in 0..d {
            v.0[i] = rng.random_range(-1.0..1.0);
        }
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

pub fn random_nested_configs(d: usize, n: usize, seed: u64) -> Vec<NestedConfig> {
    let mut rng = RngStream::new(seed, 0).rng();
    (0..n)
        .map(|i| {
            let mut c = Point::ORIGIN;
            for k in 0..d {
                c.0[k] = rng.random_range(-2.0..2.0);
            }
            let outer = Ball { center: c, radius: rng.random_range(0.5..3.0) };
            let off = outer.radius * rng.random_range(0.0..0.5);
            let ic = c + random_direction(d, &mut rng) * off;
            let inner = Ball { center: ic, radius: (outer.radius - off) * rng.random_range(0.2..0.9) };
            let x = ic + random_direction(d, &mut rng) * (inner.radius * rng.random_range(0.0..0.8));
            // Flat boundaries make the angular integrands in d >= 2 kink at
            // rays parallel to the plane; those run only on the line.
            let target = if i % 2 == 0 || d >= 2 {
                let r_in = outer.radius * rng.random_range(1.05..2.0);
                let r_out = if rng.random_bool(0.5) { f64::INFINITY } else { r_in * rng.random_range(1.5..4.0) };
                TargetSet::Annulus { center: c, r_in, r_out }
            } else {
                let normal = random_direction(d, &mut rng);
                TargetSet::HalfSpace { normal, offset: c.dot(&normal) + outer.radius * rng.random_range(1.05..2.0) }
            };
            let data_index = if d >= 2 { [0, 3, 4, 5][i % 4] } else { i % 6 };
            NestedConfig { outer, inner, x, target, data_index }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub configs: Vec<NestedConfig>,
    /// `|μ_x^U(U^c) - 1|` per configuration.
    pub mass: Vec<f64>,
    pub composition: Vec<f64>,
    pub harmonicity: Vec<f64>,
    pub max_mass: f64,
    pub max_composition: f64,
    pub max_harmonicity: f64,
}

impl AxiomReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_mass <= tol && self.max_composition <= tol && self.max_harmonicity <= tol
    }
}

/// Runs the three identities on `n` random nested configurations.
pub fn verify_axioms(p: &StableParams, n: usize, seed: u64, quad: &QuadratureSpec) -> Result<AxiomReport> {
    let configs = random_nested_configs(p.d(), n, seed);
    let (mut mass, mut composition, mut harmonicity) = (vec![], vec![], vec![]);
    for c in &configs {
        mass.push((exit_mass(p, &c.outer, &c.x, &TargetSet::Exterior, quad)? - 1.0).abs());
        composition.push(composition_residual(p, &c.inner, &c.outer, &c.x, &c.target, quad)?);
        let f = &standard_family(p.d(), c.outer.center, c.outer.radius)[c.data_index];
        harmonicity.push(harmonicity_residual(p, &c.outer, &c.inner, f, &c.x, quad)?);
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(AxiomReport {
        max_mass: max(&mass),
        max_composition: max(&composition),
        max_harmonicity: max(&harmonicity),
        configs,
        mass,
        composition,
        harmonicity,
    })
}
