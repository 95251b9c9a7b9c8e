mod checks;
mod config;
mod report;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use harnack_core::harnack::HarnackConstants;
use harnack_core::Error;
use rayon::prelude::*;
use serde_json::Value;

use checks::{Ctx, Outcome, Status};
use config::{ConfigError, ExperimentConfig, Format, WeightKind, ALL_CHECKS};

#[derive(Parser)]
#[command(
    name = "harnack-lab",
    version,
    about = "Numerical Harnack-inequality laboratory for isotropic stable processes"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Opts {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Plain output without color.
    #[arg(long, global = true)]
    plain: bool,
    #[arg(long = "d", global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Monte Carlo paths per case.
    #[arg(long, global = true)]
    paths: Option<u64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long, global = true)]
    theta1: Option<f64>,
    #[arg(long, global = true)]
    theta2: Option<f64>,
    #[arg(long, global = true)]
    a1: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long = "c", global = true)]
    c: Option<f64>,
    #[arg(long, global = true)]
    c0: Option<f64>,
    #[arg(long = "cJ", global = true)]
    c_j: Option<f64>,
    /// Cloud size for `metrize`.
    #[arg(long, global = true)]
    points: Option<usize>,
    #[arg(long, global = true, value_enum)]
    weight: Option<WeightKind>,
    /// Number of random configurations for `verify-axioms`.
    #[arg(long, global = true)]
    configs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mass, composition and harmonicity identities of exit measures.
    VerifyAxioms,
    /// Jump-decomposition exit density against the Poisson kernel.
    VerifyIw,
    /// A single structural condition.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
    },
    /// Capacity brackets: refinement, radius scaling, translation.
    Capacity,
    /// Harnack constants from supplied or measured inputs.
    Constants,
    /// Certified radius chain.
    Chain,
    /// Empirical Harnack ratios against the derived constant.
    Harnack,
    /// Power-law fit of oscillations of harmonic extensions.
    Holder,
    /// Intrinsic quasi-metric of a random cloud and its metrization.
    Metrize,
    /// Every check in dependency order.
    Pipeline,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Kkz,
    Hj,
    Ks,
    G3,
    J0,
    LambdaG,
    Profile,
    Ggb,
    Truncation,
}

impl CheckKind {
    fn name(self) -> &'static str {
        match self {
            CheckKind::Kkz => "kkz",
            CheckKind::Hj => "hj",
            CheckKind::Ks => "ks",
            CheckKind::G3 => "g3",
            CheckKind::J0 => "j0",
            CheckKind::LambdaG => "lambda-g",
            CheckKind::Profile => "profile",
            CheckKind::Ggb => "ggb",
            CheckKind::Truncation => "truncation",
        }
    }
}

fn load(opts: &Opts) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(opts.seed, cfg.seed);
    set!(opts.jobs, cfg.output.jobs);
    set!(opts.out.clone(), cfg.output.dir);
    set!(opts.format, cfg.output.format);
    set!(opts.d, cfg.process.d);
    set!(opts.alpha, cfg.process.alpha);
    set!(opts.paths, cfg.tolerances.mc_paths);
    set!(opts.radius, cfg.geometry.radius);
    set!(opts.theta, cfg.geometry.theta);
    set!(opts.points, cfg.intrinsic.points);
    set!(opts.weight, cfg.intrinsic.weight);
    set!(opts.configs, cfg.axioms.configs);
    if opts.tol.is_some() {
        cfg.tolerances.quad_rel_tol = opts.tol;
    }
    let k = &mut cfg.constants;
    for (flag, field) in [
        (opts.theta1, &mut k.theta1),
        (opts.theta2, &mut k.theta2),
        (opts.a1, &mut k.a1),
        (opts.eta, &mut k.eta),
        (opts.c, &mut k.c),
        (opts.c0, &mut k.c0),
        (opts.c_j, &mut k.c_j),
    ] {
        if flag.is_some() {
            *field = flag;
        }
    }
    cfg.output.plain |=
        opts.plain || std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) || !std::io::stdout().is_terminal();
    cfg.validate()?;
    Ok(cfg)
}

type Constants = Result<(HarnackConstants, Value), Error>;

fn constants(ctx: &Ctx) -> Constants {
    let (inp, provenance) = checks::resolve_inputs(ctx)?;
    Ok((checks::derive(&inp)?, provenance))
}

fn run_check(name: &str, ctx: &Ctx, hc: Option<&Constants>) -> Outcome {
    let needs = |f: &dyn Fn(&HarnackConstants) -> harnack_core::Result<Outcome>| -> harnack_core::Result<Outcome> {
        match hc.expect("constants resolved for dependent checks") {
            Ok((hc, _)) => f(hc),
            Err(e) => Err(e.clone()),
        }
    };
    let res = match name {
        "verify-axioms" => checks::verify_axioms_check(ctx),
        "verify-iw" => checks::verify_iw_check(ctx),
        "kkz" => checks::kkz_check(ctx),
        "profile" => checks::profile_check(ctx),
        "hj" => checks::hj_check(ctx),
        "j0" => checks::j0_check(ctx),
        "lambda-g" => checks::lambda_g_check(ctx),
        "ggb" => checks::ggb_check(ctx),
        "g3" => checks::g3_check(ctx),
        "ks" => match ctx.cfg.constants.eta {
            Some(eta) => checks::ks_check(ctx, eta),
            None => needs(&|hc| checks::ks_check(ctx, hc.inputs.eta)),
        },
        "capacity" => checks::capacity_check(ctx),
        "constants" => match hc.expect("constants resolved") {
            Ok((hc, prov)) => Ok(checks::constants_outcome(hc, prov)),
            Err(e) => Err(e.clone()),
        },
        "chain" => needs(&|hc| checks::chain_check(ctx, hc)),
        "harnack" => needs(&|hc| checks::harnack_check(ctx, hc)),
        "holder" => checks::holder_check(ctx),
        "truncation" => needs(&|hc| checks::truncation_outcome(ctx, hc)),
        "metrize" => checks::metrize_check(ctx),
        other => unreachable!("unknown check {other}"),
    };
    res.unwrap_or_else(|e| Outcome::from_error(&e))
}

fn uses_constants(name: &str) -> bool {
    matches!(name, "constants" | "chain" | "harnack" | "truncation" | "ks")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli.opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("harnack-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.output.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("harnack-lab: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let names: Vec<&str> = match &cli.cmd {
        Cmd::VerifyAxioms => vec!["verify-axioms"],
        Cmd::VerifyIw => vec!["verify-iw"],
        Cmd::Check { kind } => vec![kind.name()],
        Cmd::Capacity => vec!["capacity"],
        Cmd::Constants => vec!["constants"],
        Cmd::Chain => vec!["chain"],
        Cmd::Harnack => vec!["harnack"],
        Cmd::Holder => vec!["holder"],
        Cmd::Metrize => vec!["metrize"],
        Cmd::Pipeline => {
            if cfg.pipeline.checks.is_empty() {
                ALL_CHECKS.to_vec()
            } else {
                ALL_CHECKS.iter().copied().filter(|c| cfg.pipeline.checks.iter().any(|p| p == c)).collect()
            }
        }
    };
    let pipeline = matches!(cli.cmd, Cmd::Pipeline);
    let ctx = match Ctx::new(&cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("harnack-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let skip_ks_constants = cfg.constants.eta.is_some() && names == ["ks"];
    let outcomes: Vec<(&str, Outcome)> = pool.install(|| {
        let hc =
            if names.iter().any(|n| uses_constants(n)) && !skip_ks_constants { Some(constants(&ctx)) } else { None };
        names.par_iter().map(|n| (*n, run_check(n, &ctx, hc.as_ref()))).collect()
    });

    let writer = report::Writer::new(&cfg);
    if let Err(e) = writer.prepare() {
        eprintln!("harnack-lab: {e}");
        return ExitCode::from(2);
    }
    for (name, out) in &outcomes {
        if let Err(e) = writer.write_check(name, out) {
            eprintln!("harnack-lab: {e}");
            return ExitCode::from(2);
        }
        report::print_line(name, out, cfg.output.plain);
        if *name == "constants" && out.status == Status::Pass && !pipeline {
            report::print_table(out);
        }
        if let Some(err) = out.result.get("error") {
            eprintln!("harnack-lab: {name}: {}", err.as_str().unwrap_or_default());
        }
    }
    if pipeline {
        if let Err(e) = writer.write_summary(&outcomes) {
            eprintln!("harnack-lab: {e}");
            return ExitCode::from(2);
        }
    }
    let status = |s: Status| outcomes.iter().any(|(_, o)| o.status == s);
    if status(Status::Invalid) || (!pipeline && status(Status::Skipped)) {
        ExitCode::from(2)
    } else if status(Status::Fail) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
