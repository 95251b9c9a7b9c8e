//! The individual checks. Each one turns the configuration into a structured
//! result, a verdict and a table.

use harnack_core::capacity::{ball_capacity, capacity_lp, CapacitySet};
use harnack_core::conditions::{
    check_g3_rv, check_ggb, check_hj, check_j0, check_kkz, check_ks, check_lambda_g, check_radial_profile,
    default_exterior_points, iw_crosscheck, iw_default_grid, ConditionReport, KsConfig, RadialProfile,
};
use harnack_core::exit_measures::{standard_family, verify_axioms, DataFn, WosConfig};
use harnack_core::harnack::{
    default_deltas, derive_constants, harnack_empirical, holder_fit, measured_c_j, pipeline_inputs, radius_chain,
    truncation_check, HarnackConstants, HarnackInputs, PipelineMeasurements,
};
use harnack_core::intrinsic::{cloud_study, Weight};
use harnack_core::kernels::{theta_for_factor, NormalizationConstant, ScaleFunction};
use harnack_core::stats::linear_fit;
use harnack_core::{Ball, Error, Point, QuadratureSpec, Result, StableParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, WeightKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Invalid,
}

pub struct Outcome {
    pub status: Status,
    pub result: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Outcome {
    fn new(pass: bool, result: impl Serialize) -> Outcome {
        Outcome {
            status: if pass { Status::Pass } else { Status::Fail },
            result: serde_json::to_value(result).expect("results serialize"),
            columns: vec![],
            rows: vec![],
        }
    }

    fn table(mut self, columns: Vec<&'static str>, rows: Vec<Vec<String>>) -> Outcome {
        self.columns = columns;
        self.rows = rows;
        self
    }

    /// Unsupported parameters skip a check; domain errors mean the
    /// configured geometry is invalid for it; anything else is a failure.
    pub fn from_error(e: &Error) -> Outcome {
        let status = match e {
            Error::Unsupported(_) => Status::Skipped,
            Error::Domain(_) | Error::Contract(_) => Status::Invalid,
            _ => Status::Fail,
        };
        Outcome { status, result: json!({ "error": e.to_string() }), columns: vec![], rows: vec![] }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn condition_table(rep: &ConditionReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = rep
        .witnesses
        .iter()
        .map(|w| {
            let c: Vec<String> = w.coords.iter().map(|c| num(*c)).collect();
            vec![w.label.clone(), c.join(" "), num(w.value)]
        })
        .collect();
    (vec!["label", "coords", "value"], rows)
}

fn condition_outcome(rep: ConditionReport, pass: bool, extra: Value) -> Outcome {
    let (cols, rows) = condition_table(&rep);
    Outcome::new(pass, json!({ "report": rep, "checks": extra })).table(cols, rows)
}

/// Resolved configuration shared by the checks.
pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub p: StableParams,
    pub x: Point,
}

impl<'a> Ctx<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Ctx<'a>> {
        let p = cfg.params().map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Ctx { cfg, p, x: cfg.center() })
    }

    fn quad(&self, default: f64) -> QuadratureSpec {
        QuadratureSpec::with_rel_tol(self.cfg.tolerances.quad_rel_tol.unwrap_or(default))
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn r(&self) -> f64 {
        self.cfg.geometry.radius
    }

    fn theta(&self) -> f64 {
        self.cfg.geometry.theta
    }

    fn radii(&self) -> &[f64] {
        &self.cfg.geometry.radii
    }
}

/// Relative spread `(max - min)/max|v|` of a list.
fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        (hi - lo) / scale
    }
}

pub const AXIOM_TOL: f64 = 1e-4;

pub fn verify_axioms_check(ctx: &Ctx) -> Result<Outcome> {
    let default = if ctx.p.d() == 1 { 1e-6 } else { 1e-4 };
    let quad = ctx.quad(default);
    let rep = verify_axioms(&ctx.p, ctx.cfg.axioms.configs, ctx.seed(), &quad)?;
    let pass = rep.passes(AXIOM_TOL);
    let rows = (0..rep.configs.len())
        .map(|i| {
            vec![
                i.to_string(),
                rep.configs[i].data_index.to_string(),
                num(rep.mass[i]),
                num(rep.composition[i]),
                num(rep.harmonicity[i]),
            ]
        })
        .collect();
    Ok(Outcome::new(pass, json!({ "tolerance": AXIOM_TOL, "quad_rel_tol": quad.rel_tol, "axioms": rep }))
        .table(vec!["config", "data_index", "mass", "composition", "harmonicity"], rows))
}

pub const IW_TOL: f64 = 0.02;
pub const IW_SENSITIVITY: f64 = 0.04;

pub fn verify_iw_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-3);
    let b = Ball::new(ctx.x, ctx.r())?;
    let (xs, zs) = iw_default_grid(ctx.p.d(), &b);
    let rep = iw_crosscheck(&ctx.p, &b, &xs, &zs, &quad)?;
    let mut sens = vec![];
    for which in [NormalizationConstant::Riesz, NormalizationConstant::Levy, NormalizationConstant::Poisson] {
        let q = ctx.p.perturbed(which, 1.05);
        let mut worst: f64 = 0.0;
        for (x, z) in xs.iter().zip(&zs) {
            worst = worst.max(iw_crosscheck(&q, &b, &[*x], &[*z], &quad)?.constant);
        }
        sens.push((format!("{which:?}"), worst));
    }
    let sensitive = sens.iter().all(|(_, e)| *e > IW_SENSITIVITY);
    let pass = rep.pass && rep.constant <= IW_TOL && sensitive;
    let mut rows = vec![vec!["none".to_string(), num(rep.constant)]];
    rows.extend(sens.iter().map(|(n, e)| vec![n.to_lowercase(), num(*e)]));
    let result = json!({
        "max_rel_err": rep.constant,
        "tolerance": IW_TOL,
        "quad_rel_tol": quad.rel_tol,
        "sensitivity_factor": 1.05,
        "sensitivity_threshold": IW_SENSITIVITY,
        "sensitivity": sens.iter().map(|(n, e)| json!({ "constant": n, "max_rel_err": e })).collect::<Vec<_>>(),
        "report": rep,
    });
    Ok(Outcome::new(pass, result).table(vec!["perturbed", "max_rel_err"], rows))
}

pub const KKZ_TOL: f64 = 1e-9;

pub fn kkz_check(ctx: &Ctx) -> Result<Outcome> {
    let rep = check_kkz(&ctx.p, ctx.theta(), ctx.cfg.tolerances.trials, ctx.seed())?;
    let gap = (rep.threshold - rep.constant).abs();
    let pass = rep.pass && gap <= KKZ_TOL;
    Ok(condition_outcome(rep, pass, json!({ "gap": gap, "tolerance": KKZ_TOL })))
}

pub fn profile_check(ctx: &Ctx) -> Result<Outcome> {
    let exponent = ctx.p.d() as f64 + ctx.p.alpha();
    let grid: Vec<f64> = (-12..=12).map(|k| 2f64.powi(k)).collect();
    let rep = check_radial_profile(&RadialProfile::Power { exponent }, ctx.theta(), &grid)?;
    let expected = (1.0 + ctx.theta()).powf(exponent);
    let err = (rep.constant - expected).abs() / expected;
    let pass = rep.pass && err <= 1e-12;
    Ok(condition_outcome(rep, pass, json!({ "expected": expected, "rel_err": err })))
}

pub const HJ_SCALE_TOL: f64 = 1e-6;

pub fn hj_check(ctx: &Ctx) -> Result<Outcome> {
    let d = ctx.p.d();
    let rep = check_hj(&ctx.p, &ctx.x, ctx.r(), ctx.theta(), &default_exterior_points(d, &ctx.x, ctx.r()))?;
    let mut by_radius = vec![];
    for &r in ctx.radii() {
        by_radius.push(check_hj(&ctx.p, &ctx.x, r, ctx.theta(), &default_exterior_points(d, &ctx.x, r))?.constant);
    }
    let s = spread(&by_radius);
    let pass = rep.pass && rep.constant >= 1.0 && s <= HJ_SCALE_TOL;
    Ok(condition_outcome(rep, pass, json!({ "c_j_by_radius": by_radius, "spread": s, "tolerance": HJ_SCALE_TOL })))
}

pub const J0_SCALE_TOL: f64 = 1e-8;

pub fn j0_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-10);
    let rep = check_j0(&ctx.p, &ctx.x, ctx.theta(), ctx.radii(), &quad)?;
    let s = rep.details["spread"] / rep.constant;
    let pass = rep.pass && s <= J0_SCALE_TOL;
    Ok(condition_outcome(rep, pass, json!({ "spread": s, "tolerance": J0_SCALE_TOL })))
}

pub fn lambda_g_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-8);
    let rep = check_lambda_g(&ctx.p, &ctx.x, ctx.radii(), &quad)?;
    let pass = rep.pass && rep.constant >= 1.0;
    Ok(condition_outcome(rep, pass, json!({})))
}

pub fn ggb_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-8);
    let c_d = ScaleFunction::green_matched(&ctx.p)?.doubling();
    let limit = theta_for_factor(&ctx.p, 2.0 * c_d)?;
    let theta = ctx.theta().min(0.99 * limit);
    let rep = check_ggb(&ctx.p, &ctx.x, ctx.r(), theta, &quad)?;
    let pass = rep.pass;
    Ok(condition_outcome(rep, pass, json!({ "theta": theta, "theta_limit": limit })))
}

pub fn g3_check(ctx: &Ctx) -> Result<Outcome> {
    let r = ctx.r();
    let rep = check_g3_rv(
        &ctx.p,
        &ctx.x,
        r,
        &ctx.cfg.geometry.distance_ratios,
        ctx.cfg.tolerances.hitting_paths,
        ctx.seed(),
        Some(0.125 * r),
    )?;
    let pass = rep.pass && rep.flags.is_empty();
    Ok(condition_outcome(rep, pass, json!({})))
}

fn measurements(ctx: &Ctx) -> Result<PipelineMeasurements> {
    let c2 = check_lambda_g(&ctx.p, &ctx.x, &[ctx.r()], &ctx.quad(1e-8))?.constant.max(1.0);
    let first = pipeline_inputs(&ctx.p, &PipelineMeasurements { c1: 1.0, c2, c_j: 1.0 })?;
    // c_J does not enter θ₂, so it can be measured at the derived value.
    let c_j = measured_c_j(&ctx.p, first.inputs.theta2)?;
    Ok(PipelineMeasurements { c1: 1.0, c2, c_j })
}

/// Inputs from the configuration when given there, otherwise measured.
pub fn resolve_inputs(ctx: &Ctx) -> Result<(HarnackInputs, Value)> {
    if ctx.cfg.constants.any_set() {
        let inp = ctx.cfg.constants.inputs().map_err(|e| Error::Domain(e.to_string()))?;
        return Ok((inp, json!({ "source": "config" })));
    }
    let m = measurements(ctx)?;
    let der = pipeline_inputs(&ctx.p, &m)?;
    Ok((der.inputs, json!({ "source": "measured", "measurements": m, "derivation": der })))
}

pub fn ks_check(ctx: &Ctx, eta: f64) -> Result<Outcome> {
    let r = ctx.r();
    let theta = ctx.theta();
    let outer = Ball::new(ctx.x, r)?;
    let shift = ctx.x + Point::unit(0) * (theta * r / 2.0);
    let mut reps = vec![];
    for (i, f) in ctx.cfg.geometry.obstacle_fractions.iter().enumerate() {
        let obstacle = Ball::new(shift, f * theta * r)?;
        let cfg = KsConfig {
            paths: ctx.cfg.tolerances.mc_paths,
            seed: ctx.seed().wrapping_add(i as u64),
            level: ctx.cfg.tolerances.ci_level,
            cap_relative_h: 0.125,
            wos: WosConfig::default(),
        };
        reps.push((*f, check_ks(&ctx.p, &outer, &[obstacle], theta, &ctx.x, eta, &cfg)?));
    }
    let pass = reps.iter().all(|(_, r)| r.pass && r.flags.is_empty());
    let rows = reps
        .iter()
        .map(|(f, r)| {
            vec![
                num(*f),
                num(r.details["hit_fraction"]),
                num(r.details["ci_low"]),
                num(r.details["rhs"]),
                num(r.constant),
                num(eta),
            ]
        })
        .collect();
    let result = json!({
        "eta": eta,
        "cases": reps.iter().map(|(f, r)| json!({ "obstacle_fraction": f, "report": r })).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(pass, result)
        .table(vec!["obstacle_fraction", "hit_fraction", "ci_low", "rhs", "eta_empirical", "eta"], rows))
}

pub const CAP_SCALING_TOL: f64 = 0.05;
pub const CAP_TRANSLATION_TOL: f64 = 1e-10;

pub fn capacity_check(ctx: &Ctx) -> Result<Outcome> {
    let p = &ctx.p;
    let r = ctx.r();
    let set = CapacitySet::ball(Ball::new(ctx.x, r)?);
    let exact = ball_capacity(p, r)?;
    let spacings = ctx.cfg.capacity.spacings_for(p.d());
    let mut rows = vec![];
    let mut brackets = vec![];
    for s in &spacings {
        let b = capacity_lp(p, &set, s * r)?;
        rows.push(vec!["refine".to_string(), num(r), num(s * r), num(b.lower), num(b.upper), num(b.width())]);
        brackets.push(b);
    }
    let widths: Vec<f64> = brackets.iter().map(|b| b.width()).collect();
    let shrinking = widths.windows(2).all(|w| w[1] < w[0]);
    let contains_exact = brackets.iter().all(|b| b.lower <= exact && exact <= b.upper);

    let finest = *spacings.last().unwrap();
    let mut lows = vec![];
    let mut ups = vec![];
    for &rad in ctx.radii() {
        let b = capacity_lp(p, &CapacitySet::ball(Ball::new(ctx.x, rad)?), finest * rad)?;
        rows.push(vec!["scale".to_string(), num(rad), num(finest * rad), num(b.lower), num(b.upper), num(b.width())]);
        lows.push(b.lower.ln());
        ups.push(b.upper.ln());
    }
    let logs: Vec<f64> = ctx.radii().iter().map(|r| r.ln()).collect();
    let (slope_lower, _) = linear_fit(&logs, &lows);
    let (slope_upper, _) = linear_fit(&logs, &ups);
    let gap = p.gap();
    let scaling_err = ((slope_lower - gap).abs().max((slope_upper - gap).abs())) / gap;

    let shift = Point([1.234, -0.567, 0.891]);
    let mut shift_d = Point::ORIGIN;
    shift_d.0[..p.d()].copy_from_slice(&shift.0[..p.d()]);
    let moved = capacity_lp(p, &set.translated(shift_d), finest * r)?;
    let base = brackets.last().unwrap();
    let translation_err =
        ((moved.lower - base.lower).abs() / base.lower).max((moved.upper - base.upper).abs() / base.upper);
    rows.push(vec![
        "translate".to_string(),
        num(r),
        num(finest * r),
        num(moved.lower),
        num(moved.upper),
        num(moved.width()),
    ]);

    let pass = shrinking && contains_exact && scaling_err <= CAP_SCALING_TOL && translation_err <= CAP_TRANSLATION_TOL;
    let result = json!({
        "exact": exact,
        "spacings": spacings.iter().map(|s| s * r).collect::<Vec<_>>(),
        "brackets": brackets.iter().map(|b| json!({
            "lower": b.lower, "upper": b.upper, "width": b.width(),
            "grid_resolution": b.grid_resolution, "inflation": b.inflation,
        })).collect::<Vec<_>>(),
        "width_shrinks": shrinking,
        "contains_exact": contains_exact,
        "scaling": {
            "radii": ctx.radii(), "slope_lower": slope_lower, "slope_upper": slope_upper,
            "expected": gap, "rel_err": scaling_err, "tolerance": CAP_SCALING_TOL,
        },
        "translation": { "shift": shift_d.0, "rel_err": translation_err, "tolerance": CAP_TRANSLATION_TOL },
    });
    Ok(Outcome::new(pass, result).table(vec!["kind", "radius", "spacing", "lower", "upper", "width"], rows))
}

pub fn constants_outcome(hc: &HarnackConstants, provenance: &Value) -> Outcome {
    let rows = vec![
        vec!["theta".to_string(), num(hc.theta), hc.theta_exact.clone()],
        vec!["l".to_string(), hc.l.to_string(), hc.l.to_string()],
        vec!["a".to_string(), num(hc.a), hc.a_exact.clone()],
        vec!["beta".to_string(), num(hc.beta), hc.beta_exact.clone()],
        vec!["beta_tilde".to_string(), num(hc.beta_tilde), String::new()],
        vec!["j0".to_string(), hc.j0.to_string(), hc.j0.to_string()],
        vec!["k0".to_string(), hc.k0.to_string(), hc.k0.to_string()],
        vec!["K".to_string(), num(hc.k), hc.k_exact.clone()],
    ];
    Outcome::new(true, json!({ "inputs": provenance, "constants": hc })).table(vec!["name", "value", "exact"], rows)
}

pub fn chain_check(ctx: &Ctx, hc: &HarnackConstants) -> Result<Outcome> {
    if !ctx.p.is_transient() {
        return Err(Error::Unsupported("radius chain needs d > alpha".into()));
    }
    let ch = radius_chain(hc, ctx.p.gap(), ctx.r(), ctx.cfg.harnack.chain_terms)?;
    let rows = ch.radii.iter().enumerate().map(|(n, r)| vec![(n + 1).to_string(), num(*r)]).collect();
    let pass = ch.margin > 0.0;
    Ok(Outcome::new(pass, ch).table(vec!["n", "radius"], rows))
}

pub const HARNACK_SCALE_TOL: f64 = 1e-6;

pub fn harnack_check(ctx: &Ctx, hc: &HarnackConstants) -> Result<Outcome> {
    let quad = ctx.quad(1e-6);
    let d = ctx.p.d();
    let mut reps = vec![];
    for &r in ctx.radii() {
        let fam = standard_family(d, ctx.x, r);
        reps.push((r, harnack_empirical(&ctx.p, &ctx.x, r, hc, &fam, ctx.cfg.harnack.grid, &quad)?));
    }
    let members = reps[0].1.members.len();
    let spreads: Vec<f64> =
        (0..members).map(|i| spread(&reps.iter().map(|(_, rep)| rep.members[i].ratio).collect::<Vec<_>>())).collect();
    let max_spread = spreads.iter().cloned().fold(0.0, f64::max);
    let pass = reps.iter().all(|(_, rep)| rep.pass) && max_spread <= HARNACK_SCALE_TOL;
    let mut rows = vec![];
    for (r, rep) in &reps {
        for (i, m) in rep.members.iter().enumerate() {
            rows.push(vec![num(*r), i.to_string(), num(m.sup), num(m.inf), num(m.ratio), num(hc.k)]);
        }
    }
    let result = json!({
        "k": hc.k,
        "by_radius": reps.iter().map(|(r, rep)| json!({ "radius": r, "report": rep })).collect::<Vec<_>>(),
        "ratio_spread": spreads,
        "max_spread": max_spread,
        "tolerance": HARNACK_SCALE_TOL,
    });
    Ok(Outcome::new(pass, result).table(vec!["radius", "member", "sup", "inf", "ratio", "k"], rows))
}

/// Indicator members of the standard family.
pub fn indicator_family(d: usize, x0: Point, r: f64) -> Vec<DataFn> {
    standard_family(d, x0, r)
        .into_iter()
        .filter(|f| matches!(f, DataFn::HalfSpace { .. } | DataFn::Annulus { .. }))
        .collect()
}

pub fn holder_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-8);
    let r = ctx.r();
    let fam = indicator_family(ctx.p.d(), ctx.x, r);
    let deltas = default_deltas(r, ctx.cfg.harnack.deltas);
    let rep = holder_fit(&ctx.p, &ctx.x, r, &fam, &deltas, &quad)?;
    let rows = rep.points.iter().map(|(dl, m)| vec![num(*dl), num(*m)]).collect();
    let pass = rep.pass && rep.beta_hat.is_some_and(|b| b > 0.0);
    Ok(Outcome::new(pass, rep).table(vec!["delta", "oscillation"], rows))
}

pub fn truncation_outcome(ctx: &Ctx, hc: &HarnackConstants) -> Result<Outcome> {
    let quad = ctx.quad(1e-6);
    let r = ctx.r();
    let f = DataFn::RadialPower {
        center: ctx.x + Point::unit(0) * (0.5 * r),
        scale: r,
        exponent: ctx.p.alpha() / 2.0,
        cap: None,
    };
    let levels = [1.5, 2.0, 4.0, 8.0];
    let (rows, pass) = truncation_check(&ctx.p, &ctx.x, r, hc, &f, &levels, ctx.cfg.harnack.grid, &quad)?;
    let table = rows.iter().map(|t| vec![num(t.level), num(t.sup), num(t.at_center), num(t.ratio)]).collect();
    Ok(Outcome::new(pass, json!({ "data": f, "k": hc.k, "rows": rows }))
        .table(vec!["level", "sup", "at_center", "ratio"], table))
}

pub fn metrize_check(ctx: &Ctx) -> Result<Outcome> {
    let quad = ctx.quad(1e-6);
    let h = ctx.cfg.intrinsic.half_width;
    let mut lo = ctx.x;
    let mut hi = ctx.x;
    for i in 0..ctx.p.d() {
        lo.0[i] -= h;
        hi.0[i] += h;
    }
    let region = harnack_core::capacity::BoxRegion { lo, hi };
    let weight = match ctx.cfg.intrinsic.weight {
        WeightKind::One => Weight::One,
        WeightKind::GreenCapped => Weight::GreenCapped { y0: ctx.x },
    };
    let st = cloud_study(&ctx.p, weight, &region, ctx.cfg.intrinsic.points, ctx.seed(), &quad)?;
    let rows = vec![
        vec!["points".to_string(), st.points.to_string()],
        vec!["triangle_constant".to_string(), num(st.triangle_constant)],
        vec!["kappa".to_string(), num(st.kappa)],
        vec!["epsilon".to_string(), num(st.epsilon)],
        vec!["triangle_violation".to_string(), num(st.triangle_violation)],
        vec!["min_ratio".to_string(), num(st.min_ratio)],
        vec!["max_ratio".to_string(), num(st.max_ratio)],
        vec!["c_achieved".to_string(), num(st.c_achieved)],
    ];
    let pass = st.pass;
    let note = "the (w,w)-triangle constant is measured on the cloud, not proved";
    Ok(Outcome::new(pass, json!({ "study": st, "note": note })).table(vec!["quantity", "value"], rows))
}

pub fn derive(inp: &HarnackInputs) -> Result<HarnackConstants> {
    derive_constants(inp)
}
