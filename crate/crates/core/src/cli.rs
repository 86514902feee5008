//! Batch front end: `growthwave <command> --config path.json [--seed n] [--out dir]`.
//!
//! Every JSON artifact carries the schema version, the config file as read
//! and the resolved run parameters. No timestamps or paths enter the
//! artifacts, so a rerun with the same config and seed is byte-identical.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::growth::{characterize, counterexample_series, growth_norm, random_member, write_profile_csv};
use crate::oscillation::{build_martingale, lil_montecarlo, square_function, write_martingale_csv, write_trials_csv};
use crate::poisson::{
    bandlimited_random, convolve, dilated_test_pairing, mra_poisson_defect, pairing_bound_check,
    poisson_extend, poisson_kernel, sigma_kernel, write_defect_csv, HarmonicField,
};
use crate::seqspace::{self, consistency_defect, sample_coefficients, sequence_report, RefinementTable};
use crate::stats;
use crate::wavelet::{analyze, required_order, synthesize, WaveletBasis};
use crate::weight::{doubling_constant, max_step_ratio, ScalePlan, Weight, WeightDescriptor, DEFAULT_GRID_DEPTH, DEFAULT_L_MAX};

pub const SCHEMA_VERSION: &str = "growthwave/1";
pub const OUT_ENV: &str = "GROWTHWAVE_OUT";
const DEFAULT_TRIALS: usize = 100;
const DEFAULT_D_MAX: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Random member of the growth space.
    #[default]
    Member,
    /// `u ≡ 1`.
    Constant,
    /// Stacked lacunary counterexample (`synth` only).
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightDescriptor,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub band_base: Option<f64>,
    #[serde(rename = "J")]
    pub level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Dilations `a ∈ (0, 1]` for the test-function sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_fold: Option<u32>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(8..=20).contains(&self.level) {
            return Err(Error::Config(format!("J must lie in 8..=20, got {}", self.level)));
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Weight diagnostics and the scale plan.
    Plan,
    /// Boundary data of a random member or the counterexample stack.
    Synth,
    /// Poisson extension profile over the t-grid.
    Extend,
    /// Growth norm, partial-sum profile and block bounds.
    Characterize,
    /// Σ-kernel pairings, dilated test pairings and MRA–Poisson defects.
    Pairing,
    /// Martingale diagnostics and the LIL Monte Carlo.
    Osc,
    /// Refinement identities and the sequence-space projection.
    Seq,
    /// Quick invariant suite.
    Selftest,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Plan => "plan",
            Command::Synth => "synth",
            Command::Extend => "extend",
            Command::Characterize => "characterize",
            Command::Pairing => "pairing",
            Command::Osc => "osc",
            Command::Seq => "seq",
            Command::Selftest => "selftest",
        }
    }

    fn needs_seed(self, boundary: Boundary) -> bool {
        match self {
            Command::Plan => false,
            Command::Osc | Command::Selftest | Command::Pairing => true,
            _ => boundary == Boundary::Member,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "growthwave", version, about = "Wavelet analysis of harmonic growth spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

/// Resolved parameters echoed next to the config file.
#[derive(Debug, Clone, Serialize)]
pub struct Effective {
    pub command: Command,
    #[serde(rename = "J")]
    pub level: u32,
    pub seed: Option<u64>,
    pub order: usize,
    pub l_max: usize,
    pub trials: usize,
    pub boundary: Boundary,
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    schema_version: &'static str,
    config: &'a Value,
    effective: &'a Effective,
    csv: &'a [String],
    report: T,
}

struct Context {
    config: RunConfig,
    raw: Value,
    effective: Effective,
    out: PathBuf,
    weight: Weight,
    plan: ScalePlan,
    basis: WaveletBasis,
    written: Vec<String>,
}

impl Context {
    fn seed(&self) -> u64 {
        self.effective.seed.expect("seed checked before dispatch")
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        write(fs::File::create(self.out.join(name))?)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, csv: &[String], report: T) -> Result<()> {
        let art = Artifact {
            schema_version: SCHEMA_VERSION,
            config: &self.raw,
            effective: &self.effective,
            csv,
            report,
        };
        let mut text = serde_json::to_string_pretty(&art)?;
        text.push('\n');
        fs::write(self.out.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn boundary(&self) -> Result<GridFunction> {
        match self.config.boundary {
            Boundary::Constant => Ok(GridFunction::constant(self.config.level, 1.0)),
            Boundary::Member => random_member(&self.weight, &self.plan, &self.basis, 1.0, self.seed(), self.config.level),
            Boundary::Counterexample => Err(Error::Config(format!(
                "boundary \"counterexample\" is only available to synth, not {}",
                self.effective.command.name()
            ))),
        }
    }
}

/// Outcome of a run: exit code and the artifact names written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub written: Vec<String>,
}

/// Single-line diagnostic for an error.
pub fn diagnostic(err: &Error) -> String {
    let kind = match err {
        Error::Weight(_) => "weight",
        Error::Plan(_) => "plan",
        Error::Wavelet(_) => "wavelet",
        Error::Resolution(_) => "resolution",
        Error::Argument(_) => "argument",
        Error::NotPowerType(_) => "not_power_type",
        Error::Config(_) => "config",
        Error::Numerical(_) => "numerical",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    };
    let msg = err.to_string().replace(['\n', '\r'], " ");
    format!("growthwave: error kind={kind} exit={} msg={}", err.exit_code(), Value::String(msg))
}

/// Parses arguments and runs; diagnostics go to stderr, one line each.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!(
                "growthwave: error kind=usage exit=1 msg={}",
                Value::String(first)
            );
            return 1;
        }
    };
    let Some(config) = cli.config else {
        eprintln!("{}", diagnostic(&Error::Config("--config is required".into())));
        return 1;
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match run(cli.command, &config, cli.seed, cli.out.or(env_out)) {
        Ok(outcome) => {
            println!(
                "growthwave: ok command={} exit={} files={}",
                cli.command.name(),
                outcome.code,
                outcome.written.join(",")
            );
            outcome.code
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            e.exit_code()
        }
    }
}

/// Runs one command. `out` overrides the config's output directory.
pub fn run(command: Command, config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Outcome> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let config: RunConfig =
        serde_json::from_value(raw.clone()).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    config.validate()?;
    let seed = seed.or(config.seed);
    if seed.is_none() && command.needs_seed(config.boundary) {
        return Err(Error::Config(format!("command {} draws random data and needs a seed", command.name())));
    }
    if config.boundary == Boundary::Counterexample && command != Command::Synth {
        return Err(Error::Config(format!(
            "boundary \"counterexample\" is only available to synth, not {}",
            command.name()
        )));
    }
    if let Some(n) = config.threads {
        // a pool built earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let weight = Weight::from_descriptor(config.weight.clone())?;
    let l_max = config.l_max.unwrap_or(DEFAULT_L_MAX);
    let plan = ScalePlan::build(&weight, config.band_base, l_max)?;
    let order = match config.order {
        Some(o) => o,
        None if config.boundary == Boundary::Counterexample => 1,
        None => required_order(&plan)?,
    };
    let basis = WaveletBasis::with_order(order)?;
    let out = out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("growthwave-out"));
    fs::create_dir_all(&out)
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", out.display())))?;

    let effective = Effective {
        command,
        level: config.level,
        seed,
        order,
        l_max,
        trials: config.trials.unwrap_or(DEFAULT_TRIALS),
        boundary: config.boundary,
    };
    let mut ctx = Context {
        config,
        raw,
        effective,
        out,
        weight,
        plan,
        basis,
        written: Vec::new(),
    };
    let code = match command {
        Command::Plan => cmd_plan(&mut ctx)?,
        Command::Synth => cmd_synth(&mut ctx)?,
        Command::Extend => cmd_extend(&mut ctx)?,
        Command::Characterize => cmd_characterize(&mut ctx)?,
        Command::Pairing => cmd_pairing(&mut ctx)?,
        Command::Osc => cmd_osc(&mut ctx)?,
        Command::Seq => cmd_seq(&mut ctx)?,
        Command::Selftest => cmd_selftest(&mut ctx)?,
    };
    Ok(Outcome {
        code,
        written: ctx.written,
    })
}

#[derive(Serialize)]
struct PlanOutput<'a> {
    plan: &'a ScalePlan,
    doubling_constant: f64,
    max_step_ratio: f64,
    geometric_tail_bound: f64,
    required_order: Option<usize>,
    order: usize,
    r_eff: f64,
    levels_on_grid: usize,
}

fn cmd_plan(ctx: &mut Context) -> Result<i32> {
    let report = PlanOutput {
        plan: &ctx.plan,
        doubling_constant: doubling_constant(&ctx.weight, DEFAULT_GRID_DEPTH)?,
        max_step_ratio: max_step_ratio(&ctx.weight, &ctx.plan.alphas, ctx.plan.m),
        geometric_tail_bound: ctx.plan.geometric_tail_bound(),
        required_order: required_order(&ctx.plan).ok(),
        order: ctx.basis.order(),
        r_eff: ctx.basis.r_eff(),
        levels_on_grid: ctx.plan.levels_within(ctx.config.level),
    };
    let json = serde_json::to_value(report)?;
    ctx.json("plan.json", &[], json)?;
    Ok(0)
}

fn write_samples(f: &GridFunction, w: fs::File) -> Result<()> {
    f.write_csv(w)
}

fn cmd_synth(ctx: &mut Context) -> Result<i32> {
    if ctx.config.boundary == Boundary::Counterexample {
        let d_max = ctx.config.d_max.unwrap_or(DEFAULT_D_MAX);
        let (report, stacks) = counterexample_series(&ctx.weight, &ctx.plan, &ctx.basis, d_max, ctx.config.level)?;
        let mut names = Vec::new();
        for (d, f) in stacks.iter().enumerate() {
            let name = format!("counterexample_d{}.csv", d + 1);
            ctx.csv(&name, |w| write_samples(f, w))?;
            names.push(name);
        }
        ctx.json("synth.json", &names, &report)?;
        return Ok(0);
    }
    let f = ctx.boundary()?;
    let k = growth_norm(&HarmonicField::new(f.clone()), &ctx.weight);
    ctx.csv("boundary.csv", |w| write_samples(&f, w))?;
    #[derive(Serialize)]
    struct Synth {
        #[serde(rename = "K_direct")]
        k_direct: f64,
        sup_norm: f64,
        mean: f64,
    }
    let report = Synth {
        k_direct: k,
        sup_norm: f.sup_norm(),
        mean: f.integral(),
    };
    ctx.json("synth.json", &["boundary.csv".to_string()], report)?;
    Ok(0)
}

#[derive(Serialize)]
struct ExtendRow {
    t: f64,
    sup_abs: f64,
    v: f64,
    ratio: f64,
}

fn cmd_extend(ctx: &mut Context) -> Result<i32> {
    let field = HarmonicField::new(ctx.boundary()?);
    field.evaluate_all();
    let rows: Vec<ExtendRow> = field
        .t_grid()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let sup_abs = field.grid_level(i).sup_norm();
            let v = ctx.weight.eval(t);
            ExtendRow { t, sup_abs, v, ratio: sup_abs / v }
        })
        .collect();
    ctx.csv("extend.csv", |w| {
        let mut out = csv::Writer::from_writer(w);
        for r in &rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Extend {
        #[serde(rename = "K_direct")]
        k_direct: f64,
        heights: usize,
    }
    let report = Extend {
        k_direct: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        heights: rows.len(),
    };
    ctx.json("extend.json", &["extend.csv".to_string()], report)?;
    Ok(0)
}

fn cmd_characterize(ctx: &mut Context) -> Result<i32> {
    let field = HarmonicField::new(ctx.boundary()?);
    let report = characterize(&field, &ctx.weight, &ctx.basis, &ctx.plan)?;
    ctx.csv("profile.csv", |w| write_profile_csv(&report, w))?;
    ctx.json("characterize.json", &["profile.csv".to_string()], &report)?;
    Ok(0)
}

#[derive(Serialize)]
struct SigmaRow {
    j: u32,
    delta: f64,
    sigma_l1: f64,
    reconstruction_error: f64,
    pairing_max_ratio: f64,
}

fn cmd_pairing(ctx: &mut Context) -> Result<i32> {
    let level = ctx.config.level;
    let field = HarmonicField::new(ctx.boundary()?);
    field.evaluate_all();
    let mut sigma_rows = Vec::new();
    for j in 0..=10u32.min(level - 2) {
        let delta = 2f64.powi(-(j as i32));
        let sigma = bandlimited_random(level, 1 << j, ctx.seed().wrapping_add(j as u64));
        let ker = sigma_kernel(delta, level)?;
        let back = convolve(&convolve(&sigma, &poisson_kernel(delta, level)?), &ker.grid);
        let pairing = pairing_bound_check(&field, &sigma, delta, &ctx.weight)?;
        sigma_rows.push(SigmaRow {
            j,
            delta,
            sigma_l1: ker.l1_norm,
            reconstruction_error: sigma.sub(&back).l1_norm() / sigma.l1_norm(),
            pairing_max_ratio: pairing.max_ratio,
        });
    }
    let js: Vec<f64> = sigma_rows.iter().map(|r| r.j as f64).collect();
    let l1: Vec<f64> = sigma_rows.iter().map(|r| r.sigma_l1.ln()).collect();
    let scales = ctx
        .config
        .scales
        .clone()
        .unwrap_or_else(|| (0..=6).map(|i| 2f64.powi(-i)).collect());
    let r_fold = ctx.config.r_fold.unwrap_or(ctx.plan.m + 2);
    let dilated = dilated_test_pairing(&field, r_fold, &scales, &ctx.weight, &ctx.plan)?;
    let defects = (2..=6)
        .map(|i| mra_poisson_defect(&ctx.basis, 2f64.powi(-i), level.min(14), level.min(14)))
        .collect::<Result<Vec<_>>>()?;
    let ln_s: Vec<f64> = defects.iter().map(|d| d.s.ln()).collect();
    let ln_pe: Vec<f64> = defects.iter().map(|d| d.defect_pe.ln()).collect();
    ctx.csv("defect.csv", |w| write_defect_csv(&defects, w))?;
    #[derive(Serialize)]
    struct Pairing<'a> {
        sigma: &'a [SigmaRow],
        sigma_ln_l1_slope: f64,
        dilated: crate::poisson::DilatedReport,
        defects: Vec<crate::poisson::PoissonDefect>,
        defect_loglog_slope: f64,
        r_eff: f64,
    }
    let report = Pairing {
        sigma_ln_l1_slope: stats::slope(&js, &l1),
        sigma: &sigma_rows,
        dilated,
        defect_loglog_slope: stats::slope(&ln_s, &ln_pe),
        defects,
        r_eff: ctx.basis.r_eff(),
    };
    let json = serde_json::to_value(report)?;
    ctx.json("pairing.json", &["defect.csv".to_string()], json)?;
    Ok(0)
}

fn cmd_osc(ctx: &mut Context) -> Result<i32> {
    let field = HarmonicField::new(ctx.boundary()?);
    let trace = build_martingale(&field, &ctx.weight, &ctx.plan, &ctx.basis)?;
    let sq = square_function(&trace);
    let lil = lil_montecarlo(
        &ctx.weight,
        &ctx.plan,
        &ctx.basis,
        ctx.effective.trials,
        ctx.seed(),
        ctx.config.level,
    )?;
    ctx.csv("martingale.csv", |w| write_martingale_csv(&trace.diagnostics, w))?;
    ctx.csv("lil_trials.csv", |w| write_trials_csv(&lil, w))?;
    #[derive(Serialize)]
    struct Osc<'a> {
        martingale: &'a crate::oscillation::MartingaleDiagnostics,
        square_function: crate::oscillation::SquareFunctionReport,
        lil: &'a crate::oscillation::LILReport,
    }
    let report = serde_json::to_value(Osc {
        martingale: &trace.diagnostics,
        square_function: sq,
        lil: &lil,
    })?;
    ctx.json(
        "osc.json",
        &["martingale.csv".to_string(), "lil_trials.csv".to_string()],
        report,
    )?;
    Ok(0)
}

fn cmd_seq(ctx: &mut Context) -> Result<i32> {
    let f = ctx.boundary()?;
    let seed = ctx.effective.seed.unwrap_or(0);
    let report = sequence_report(&f, &ctx.weight, &ctx.basis, &ctx.plan, ctx.effective.trials, seed)?;
    let seq = sample_coefficients(&f, &ctx.weight, &ctx.basis, &ctx.plan)?;
    let table = RefinementTable::new(&ctx.basis, &seq.levels);
    let delta = consistency_defect(&seq, &table);
    ctx.csv("seq_defect.csv", |w| seqspace::write_defect_csv(&delta, w))?;
    #[derive(Serialize)]
    struct Seq<'a> {
        report: &'a seqspace::SequenceReport,
        norm: f64,
        sequence: &'a seqspace::WeightedSequence,
    }
    let json = serde_json::to_value(Seq {
        report: &report,
        norm: seq.norm(),
        sequence: &seq,
    })?;
    ctx.json("seq.json", &["seq_defect.csv".to_string()], json)?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        pass: value <= threshold,
    }
}

fn cmd_selftest(ctx: &mut Context) -> Result<i32> {
    let level = ctx.config.level.min(12);
    let seed = ctx.seed();
    let (v, plan, basis) = (&ctx.weight, &ctx.plan, &ctx.basis);
    let mut checks = Vec::new();

    let f = bandlimited_random(level, 200, seed);
    let two = poisson_extend(&poisson_extend(&f, 0.01)?, 0.02)?;
    checks.push(check(
        "poisson_semigroup",
        two.max_diff(&poisson_extend(&f, 0.03)?) / f.sup_norm(),
        1e-10,
    ));
    checks.push(check(
        "wavelet_round_trip",
        synthesize(&analyze(&f, basis)?, basis).max_diff(&f) / f.sup_norm(),
        1e-10,
    ));

    let delta = 0.25;
    let sigma = bandlimited_random(level, 4, seed.wrapping_add(1));
    let back = convolve(&convolve(&sigma, &poisson_kernel(delta, level)?), &sigma_kernel(delta, level)?.grid);
    checks.push(check(
        "sigma_reconstruction",
        sigma.sub(&back).l1_norm() / sigma.l1_norm(),
        1e-8,
    ));

    let one = characterize(&HarmonicField::new(GridFunction::constant(level, 1.0)), v, basis, plan)?;
    checks.push(check("constant_norm", (one.k_direct - 1.0).abs(), 1e-9));
    checks.push(check("constant_equivalence", (one.equivalence_ratio - 1.0).abs(), 1e-9));

    let member = random_member(v, plan, basis, 1.0, seed, level)?;
    let trace = build_martingale(&HarmonicField::new(member.clone()), v, plan, basis)?;
    checks.push(check("tower_property", trace.diagnostics.max_tower_residual, 1e-12));
    checks.push(check("mean_preservation", trace.diagnostics.mean_preservation, 1e-12));

    let seq = sequence_report(&member, v, basis, plan, 5, seed)?;
    checks.push(check("seq_fixed_point", seq.fixed_point_residual, 1e-8));
    checks.push(check("seq_idempotence", seq.idempotence_residual, 1e-10));
    checks.push(check(
        "refinement_energy",
        seq.refinement.iter().map(|r| r.energy_residual).fold(0.0, f64::max),
        1e-10,
    ));
    checks.push(check("seq_round_trip", seq.round_trip_residual, 1e-6));

    let failed = checks.iter().filter(|c| !c.pass).count();
    #[derive(Serialize)]
    struct Selftest {
        #[serde(rename = "J")]
        level: u32,
        checks: Vec<Check>,
        failed: usize,
    }
    ctx.json("selftest.json", &[], Selftest { level, checks, failed })?;
    Ok(if failed == 0 { 0 } else { 1 })
}
