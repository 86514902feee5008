//! Vertical weighted averages `I_u(x,s) = ∫_s^1 u(x,t) d(1/v(t))`, their
//! block pieces, the dyadic martingale they generate and the LIL statistic.
//!
//! Heights are passed as dyadic exponents `e` (`s = 2^{-e}`) so that scales
//! far below the grid spacing stay representable; the weight is evaluated
//! in the log domain and `t` is allowed to underflow to zero.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::growth::normalized_member;
use crate::poisson::HarmonicField;
use crate::stats;
use crate::wavelet::{analyze, block_decompose, BlockSeq, WaveletBasis};
use crate::weight::{ScalePlan, Weight};

/// Quarter-dyadic nodes run this many generations below the grid; past
/// that `e^{−2πt|k|} = 1` to single precision and nodes become geometric in
/// the exponent.
const FINE_DEPTH: f64 = 24.0;
const GEOMETRIC_FACTOR: f64 = 1.02;

/// Radial multipliers `m_s(k) = ∑_i w_i e^{−2π t_i |k|}` realizing the
/// midpoint Stieltjes sum for a fixed set of heights.
#[derive(Debug, Clone)]
pub struct VerticalAverager {
    level: u32,
    exponents: Vec<f64>,
    symbols: Vec<Vec<f64>>,
}

fn node_exponents(targets: &[f64], level: u32) -> Vec<f64> {
    let deepest = targets.iter().copied().fold(0.0, f64::max);
    let fine_end = deepest.min(level as f64 + FINE_DEPTH);
    let mut nodes: Vec<f64> = (0..)
        .map(|i| i as f64 / 4.0)
        .take_while(|&e| e < fine_end)
        .collect();
    let mut e = fine_end.max(1.0);
    nodes.push(fine_end);
    while e < deepest {
        e = (e * GEOMETRIC_FACTOR).min(deepest);
        nodes.push(e);
    }
    nodes.extend_from_slice(targets);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    nodes
}

impl VerticalAverager {
    /// Multipliers for heights `2^{-e}`, `e ≥ 0`, on a grid of `level`.
    pub fn new(v: &Weight, exponents: &[f64], level: u32) -> Result<Self> {
        if let Some(e) = exponents.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Argument(format!(
                "height exponents must be finite and non-negative, got {e}"
            )));
        }
        let half = (1usize << level) / 2;
        let nodes = node_exponents(exponents, level);
        let mut order: Vec<usize> = (0..exponents.len()).collect();
        order.sort_by(|&a, &b| exponents[a].total_cmp(&exponents[b]));

        let mut symbols = vec![Vec::new(); exponents.len()];
        let mut acc = vec![0.0; half + 1];
        let mut next = 0;
        let inv_v = |e: f64| (-v.ln_eval_dyadic(e)).exp();
        let mut snapshot = |e: f64, acc: &[f64], next: &mut usize| {
            while *next < order.len() && exponents[order[*next]] <= e + 1e-12 {
                symbols[order[*next]] = acc.to_vec();
                *next += 1;
            }
        };
        snapshot(0.0, &acc, &mut next);
        for pair in nodes.windows(2) {
            let (hi, lo) = (pair[0], pair[1]);
            let w = inv_v(hi) - inv_v(lo);
            let t_mid = 0.5 * ((-hi * std::f64::consts::LN_2).exp() + (-lo * std::f64::consts::LN_2).exp());
            if w != 0.0 {
                let r = (-2.0 * PI * t_mid).exp();
                let mut p = w;
                for a in acc.iter_mut() {
                    *a += p;
                    p *= r;
                }
            }
            snapshot(lo, &acc, &mut next);
        }
        Ok(Self {
            level,
            exponents: exponents.to_vec(),
            symbols,
        })
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// `I_u(·, 2^{-e_i})`.
    pub fn average(&self, field: &HarmonicField, i: usize) -> GridFunction {
        assert_eq!(field.level(), self.level, "averager built for another grid");
        let sym = &self.symbols[i];
        field.with_symbol(|k| sym[k])
    }
}

/// `I_u(·, s)` for a single height.
pub fn vertical_average(field: &HarmonicField, v: &Weight, s: f64) -> Result<GridFunction> {
    if !(s > 0.0) {
        return Err(Error::Argument(format!("height must be positive, got {s}")));
    }
    if s >= 1.0 {
        return Ok(GridFunction::zeros(field.level()));
    }
    let avg = VerticalAverager::new(v, &[-s.log2()], field.level())?;
    Ok(avg.average(field, 0))
}

/// Blocks `G_l(·, s)` of a vertical average; by linearity these are the
/// plan blocks of `I_u(·, s)` itself.
pub fn block_average(i_u: &GridFunction, plan: &ScalePlan, basis: &WaveletBasis) -> Result<BlockSeq> {
    Ok(block_decompose(&analyze(i_u, basis)?, plan, basis))
}

/// `E(g | F)` for the dyadic σ-algebra of intervals of length `2^{-alpha}`.
pub fn conditional_block(g: &GridFunction, alpha: u64) -> Result<GridFunction> {
    let level = g.level() as u64;
    if alpha > level {
        return Err(Error::Resolution(format!(
            "conditioning level α = {alpha} exceeds the grid level {level}"
        )));
    }
    let cell = 1usize << (level - alpha);
    let mut out = g.samples().to_vec();
    for chunk in out.chunks_mut(cell) {
        let mean = chunk.iter().sum::<f64>() / cell as f64;
        chunk.iter_mut().for_each(|x| *x = mean);
    }
    Ok(GridFunction::new(out).expect("averaging keeps the grid"))
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecayRow {
    pub l: usize,
    /// Height `s = 2^{-e}`, `e ≤ α_{l-1}`.
    pub e: f64,
    pub max_block: f64,
    /// `max|G_l(·,s)| (2^{α_{l-1}} s)^m v(s) / v(2^{-α_l})`.
    pub ratio: f64,
}

/// `G_l(·,s)` above the block's own scale, normalized by the predicted
/// decay; bounded ratios over all `l` and `s` confirm the decay rate.
pub fn block_decay(
    field: &HarmonicField,
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
) -> Result<Vec<BlockDecayRow>> {
    let level = field.level();
    let top = plan.levels_within(level).saturating_sub(1);
    let Some(deepest) = (top >= 1).then(|| plan.alphas[top - 1]) else {
        return Ok(Vec::new());
    };
    let exps: Vec<f64> = (0..=4 * deepest).map(|i| i as f64 / 4.0).collect();
    let averager = VerticalAverager::new(v, &exps, level)?;
    let m = plan.m as f64;
    let mut rows = Vec::new();
    for (i, &e) in exps.iter().enumerate().skip(1) {
        let blocks = block_average(&averager.average(field, i), plan, basis)?;
        for l in 1..=top.min(blocks.len() - 1) {
            let prev = plan.alphas[l - 1] as f64;
            if e > prev {
                continue;
            }
            let max_block = blocks.blocks[l].sup_norm();
            let ln_ratio = m * (prev - e) * std::f64::consts::LN_2 + v.ln_eval_dyadic(e)
                - v.ln_eval_dyadic(plan.alphas[l] as f64);
            rows.push(BlockDecayRow {
                l,
                e,
                max_block,
                ratio: max_block * ln_ratio.exp(),
            });
        }
    }
    Ok(rows)
}

/// `max |I_u(x,s) − I_u(x, 2^{-α_L})|` over quarter-dyadic `s` between
/// consecutive plan scales that fit the grid.
pub fn scale_insensitivity(field: &HarmonicField, v: &Weight, plan: &ScalePlan) -> Result<f64> {
    let level = field.level();
    let n = plan.levels_within(level);
    let mut worst: f64 = 0.0;
    for pair in plan.alphas[..n].windows(2) {
        let (lo, hi) = (pair[0] as f64, pair[1] as f64);
        let exps: Vec<f64> = (0..)
            .map(|i| lo + i as f64 / 4.0)
            .take_while(|&e| e < hi)
            .collect();
        let averager = VerticalAverager::new(v, &exps, level)?;
        let anchor = averager.average(field, 0);
        for i in 1..exps.len() {
            worst = worst.max(averager.average(field, i).max_diff(&anchor));
        }
    }
    Ok(worst)
}

/// Per-level objects of the martingale at the plan levels `α_L ≤ J`.
#[derive(Debug, Clone)]
pub struct MartingaleTrace {
    /// `α_L` of the levels present.
    pub alphas: Vec<u64>,
    /// `lambda[l][L] = E(G_l | F_L)`.
    pub lambda: Vec<Vec<GridFunction>>,
    /// `Γ_L = ∑_l Λ_{l,L}`.
    pub gamma: Vec<GridFunction>,
    /// `Γ_{L+1} − Γ_L`.
    pub increments: Vec<GridFunction>,
    /// `S²_N = ∑_{L ≤ N} E(|Γ_{L+1} − Γ_L|² | F_L)`.
    pub s2: Vec<GridFunction>,
    pub diagnostics: MartingaleDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelDiagnostics {
    #[serde(rename = "L")]
    pub level: usize,
    pub alpha: u64,
    /// `max |E(Γ_{L+1} | F_L) − Γ_L|`, zero at the last level.
    pub tower_residual: f64,
    pub max_increment: f64,
    /// `max_x |I_u(x, 2^{-α_L}) − Γ_L(x)|`.
    pub approximation_defect: f64,
    /// `max_x S²_L(x) / (L + 1)`.
    pub s2_per_level: f64,
    /// `max_{l > L} ‖Λ_{l,L}‖_∞ 2^{α_{l-1} − α_L}`.
    pub lambda_decay: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleDiagnostics {
    pub levels: Vec<LevelDiagnostics>,
    pub max_tower_residual: f64,
    /// `‖∫Λ_{l,L} − ∫G_l‖` over all pairs.
    pub mean_preservation: f64,
    /// `max_{l, x} |G_l(x)|`.
    pub max_block_average: f64,
    /// Blocks cut by the grid, whose generations past `J` are missing.
    pub truncated: bool,
}

/// Builds `Λ`, `Γ`, increments and `S²` from a field. `G_l` are the blocks
/// of `I_u(·, 2^{-J})`.
pub fn build_martingale(
    field: &HarmonicField,
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
) -> Result<MartingaleTrace> {
    let level = field.level();
    let alphas: Vec<u64> = plan.alphas.iter().copied().take_while(|&a| a <= level as u64).collect();
    let mut heights: Vec<f64> = alphas.iter().map(|&a| a as f64).collect();
    heights.push(level as f64);
    let averager = VerticalAverager::new(v, &heights, level)?;
    let deep = averager.average(field, alphas.len());
    let blocks = block_average(&deep, plan, basis)?;

    let lambda: Vec<Vec<GridFunction>> = blocks
        .blocks
        .iter()
        .map(|g| alphas.iter().map(|&a| conditional_block(g, a)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let gamma: Vec<GridFunction> = alphas
        .iter()
        .map(|&a| conditional_block(&deep, a))
        .collect::<Result<_>>()?;

    let mut mean_preservation: f64 = 0.0;
    for (g, row) in blocks.blocks.iter().zip(&lambda) {
        for lam in row {
            mean_preservation = mean_preservation.max((lam.integral() - g.integral()).abs());
        }
    }

    let mut increments = Vec::new();
    let mut s2 = Vec::new();
    let mut acc = GridFunction::zeros(level);
    let mut levels = Vec::new();
    for (big_l, &alpha) in alphas.iter().enumerate() {
        let i_l = averager.average(field, big_l);
        let approximation_defect = i_l.max_diff(&gamma[big_l]);
        let (tower_residual, max_increment) = if big_l + 1 < alphas.len() {
            let inc = gamma[big_l + 1].sub(&gamma[big_l]);
            let tower = conditional_block(&gamma[big_l + 1], alpha)?.max_diff(&gamma[big_l]);
            let sq = GridFunction::new(inc.samples().iter().map(|x| x * x).collect())?;
            acc.add_assign(&conditional_block(&sq, alpha)?);
            let m = inc.sup_norm();
            increments.push(inc);
            (tower, m)
        } else {
            (0.0, 0.0)
        };
        s2.push(acc.clone());
        let lambda_decay = (big_l + 1..blocks.len())
            .filter(|&l| l < plan.alphas.len())
            .map(|l| {
                let gap = plan.alphas[l - 1] as f64 - alpha as f64;
                lambda[l][big_l].sup_norm() * 2f64.powf(gap)
            })
            .fold(0.0, f64::max);
        levels.push(LevelDiagnostics {
            level: big_l,
            alpha,
            tower_residual,
            max_increment,
            approximation_defect,
            s2_per_level: acc.sup_norm() / (big_l + 1) as f64,
            lambda_decay,
        });
    }
    let diagnostics = MartingaleDiagnostics {
        max_tower_residual: levels.iter().map(|d| d.tower_residual).fold(0.0, f64::max),
        mean_preservation,
        max_block_average: blocks.blocks.iter().map(GridFunction::sup_norm).fold(0.0, f64::max),
        truncated: blocks.truncated,
        levels,
    };
    Ok(MartingaleTrace {
        alphas,
        lambda,
        gamma,
        increments,
        s2,
        diagnostics,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SquareFunctionReport {
    /// `max_x S²_N(x) / N` for `N ≥ 1`.
    pub s2_over_n: Vec<f64>,
    pub max_s2_over_n: f64,
    pub max_increment: f64,
    /// `S²_N ≤ S²_{N+1}` pointwise at every `N`.
    pub monotone: bool,
}

pub fn square_function(trace: &MartingaleTrace) -> SquareFunctionReport {
    let s2_over_n: Vec<f64> = trace
        .s2
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, s)| s.sup_norm() / n as f64)
        .collect();
    let monotone = trace.s2.windows(2).all(|p| {
        p[0].samples()
            .iter()
            .zip(p[1].samples())
            .all(|(a, b)| *a <= *b)
    });
    SquareFunctionReport {
        max_s2_over_n: s2_over_n.iter().copied().fold(0.0, f64::max),
        s2_over_n,
        max_increment: trace.increments.iter().map(GridFunction::sup_norm).fold(0.0, f64::max),
        monotone,
    }
}

pub fn write_martingale_csv<W: std::io::Write>(diag: &MartingaleDiagnostics, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["L", "max_tower_residual", "max_increment", "max_I_minus_Gamma"])?;
    for d in &diag.levels {
        out.write_record([
            d.level.to_string(),
            d.tower_residual.to_string(),
            d.max_increment.to_string(),
            d.approximation_defect.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `ln ln ln v`, or `None` where it is undefined.
fn triple_log(ln_v: f64) -> Option<f64> {
    (ln_v > 1.0).then(|| ln_v.ln().ln())
}

/// Triple-log threshold below which scales are excluded from the statistic.
pub const TRIPLE_LOG_FLOOR: f64 = 0.05;

/// Smallest dyadic exponent with `ln ln ln v(2^{-e}) > 0.05`, searched up to
/// `limit`.
pub fn minimal_lil_exponent(v: &Weight, limit: f64) -> Option<f64> {
    let ok = |e: f64| triple_log(v.ln_eval_dyadic(e)).is_some_and(|x| x > TRIPLE_LOG_FLOOR);
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > limit {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// `max_x |I_u(x, s_L)|` per scale.
    pub max_abs: Vec<f64>,
    /// LIL statistic per scale, `None` above the triple-log threshold.
    pub statistic: Vec<Option<f64>>,
    pub max_statistic: f64,
    /// `max_x |I_u| / ln v(s)` per scale.
    pub naive: Vec<f64>,
    pub naive_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LILReport {
    /// Dyadic exponents `α_L`, `L ≥ 1`, of the scales `s = 2^{-α_L}`.
    pub scale_exponents: Vec<u64>,
    pub ln_v: Vec<f64>,
    pub usable: Vec<bool>,
    pub minimal_usable_exponent: f64,
    pub trials: Vec<TrialRecord>,
    pub ensemble_max: f64,
    pub ensemble_q95: f64,
    /// Fraction of trials whose naive ratio has negative regression slope.
    pub fraction_decreasing: f64,
    /// `max |I_u| / ln v(s)` over all trials and scales.
    pub max_naive: f64,
}

impl LILReport {
    /// Ensemble maximum over the first `n` trials.
    pub fn prefix_max(&self, n: usize) -> f64 {
        self.trials[..n.min(self.trials.len())]
            .iter()
            .map(|t| t.max_statistic)
            .fold(0.0, f64::max)
    }
}

/// Trial seeds are a deterministic function of the run seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Monte Carlo of `max_x |I_u| / √(ln v · ln ln ln v)` over normalized
/// random members at the plan scales `2^{-α_L}`, `L ≥ 1`.
pub fn lil_montecarlo(
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
    trials: usize,
    seed: u64,
    level: u32,
) -> Result<LILReport> {
    let scale_exponents: Vec<u64> = plan.alphas[1..].to_vec();
    let ln_v: Vec<f64> = scale_exponents.iter().map(|&a| v.ln_eval_dyadic(a as f64)).collect();
    let usable: Vec<bool> = ln_v
        .iter()
        .map(|&l| triple_log(l).is_some_and(|x| x > TRIPLE_LOG_FLOOR))
        .collect();
    let minimal = minimal_lil_exponent(v, 1e12).ok_or_else(|| {
        Error::Argument("the weight never reaches the triple-log threshold; it must be unbounded".into())
    })?;
    if !usable.iter().any(|&u| u) {
        return Err(Error::Plan(format!(
            "deepest plan scale 2^-{} is too shallow for the triple log; need exponent above {minimal:.2} (raise l_max or A)",
            scale_exponents.last().copied().unwrap_or(0)
        )));
    }
    let exps: Vec<f64> = scale_exponents.iter().map(|&a| a as f64).collect();
    let averager = VerticalAverager::new(v, &exps, level)?;
    let ls: Vec<f64> = (1..=exps.len()).map(|l| l as f64).collect();

    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = trial_seed(seed, trial);
            let field = normalized_member(v, plan, basis, s, level)?;
            let max_abs: Vec<f64> = (0..exps.len()).map(|i| averager.average(&field, i).sup_norm()).collect();
            let statistic: Vec<Option<f64>> = max_abs
                .iter()
                .zip(&ln_v)
                .zip(&usable)
                .map(|((m, &l), &ok)| ok.then(|| m / (l * triple_log(l).unwrap()).sqrt()))
                .collect();
            let naive: Vec<f64> = max_abs.iter().zip(&ln_v).map(|(m, l)| m / l).collect();
            Ok(TrialRecord {
                trial,
                seed: s,
                max_statistic: statistic.iter().flatten().copied().fold(0.0, f64::max),
                naive_slope: stats::slope(&ls, &naive),
                max_abs,
                statistic,
                naive,
            })
        })
        .collect::<Result<_>>()?;

    let maxima: Vec<f64> = records.iter().map(|r| r.max_statistic).collect();
    let decreasing = records.iter().filter(|r| r.naive_slope < 0.0).count();
    Ok(LILReport {
        ensemble_max: stats::max(&maxima),
        ensemble_q95: stats::quantile(&maxima, 0.95),
        fraction_decreasing: decreasing as f64 / records.len().max(1) as f64,
        max_naive: records
            .iter()
            .flat_map(|r| r.naive.iter().copied())
            .fold(0.0, f64::max),
        scale_exponents,
        ln_v,
        usable,
        minimal_usable_exponent: minimal,
        trials: records,
    })
}

pub fn write_trials_csv<W: std::io::Write>(report: &LILReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["trial", "s_exponent", "max_statistic"])?;
    for t in &report.trials {
        for (i, st) in t.statistic.iter().enumerate() {
            if let Some(x) = st {
                out.write_record([
                    t.trial.to_string(),
                    report.scale_exponents[i].to_string(),
                    x.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
