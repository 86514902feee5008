//! Doubling weights and the weight-adapted scale plan.
//!
//! A weight `v` is non-increasing on `(0, ∞)`, equal to 1 for `t > 1` and
//! unbounded at the origin. Most quantities here are evaluated at dyadic
//! scales `t = 2^{-e}`, and since the plan exponents can run into the millions
//! for slowly growing weights, evaluation goes through `ln v(2^{-e})`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// JSON form of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightDescriptor {
    /// `v(t) = t^{-a}` on `(0, 1]`.
    Power { a: f64 },
    /// `v(t) = (1 - ln t)^b` on `(0, 1]`.
    Logpow { b: f64 },
    /// Monotone log-log interpolation of samples `(t_i, v_i)`.
    Table { t: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Power(f64),
    Logpow(f64),
    Table { ln_t: Vec<f64>, ln_v: Vec<f64> },
}

/// A validated doubling weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    family: Family,
    descriptor: WeightDescriptor,
}

impl Weight {
    pub fn power(a: f64) -> Result<Self> {
        Self::from_descriptor(WeightDescriptor::Power { a })
    }

    pub fn logpow(b: f64) -> Result<Self> {
        Self::from_descriptor(WeightDescriptor::Logpow { b })
    }

    pub fn table(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::from_descriptor(WeightDescriptor::Table { t, v })
    }

    pub fn from_descriptor(descriptor: WeightDescriptor) -> Result<Self> {
        let family = match &descriptor {
            WeightDescriptor::Power { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::Weight(format!(
                        "power exponent must be positive and finite, got {a}"
                    )));
                }
                Family::Power(*a)
            }
            WeightDescriptor::Logpow { b } => {
                if !(b.is_finite() && *b > 0.0) {
                    return Err(Error::Weight(format!(
                        "logpow exponent must be positive and finite, got {b}"
                    )));
                }
                Family::Logpow(*b)
            }
            WeightDescriptor::Table { t, v } => validate_table(t, v)?,
        };
        Ok(Self { family, descriptor })
    }

    pub fn descriptor(&self) -> &WeightDescriptor {
        &self.descriptor
    }

    /// Smallest `t` at which the weight is backed by data. Analytic
    /// families return 0.
    pub fn sample_floor(&self) -> f64 {
        match &self.family {
            Family::Table { ln_t, .. } => ln_t[0].exp(),
            _ => 0.0,
        }
    }

    /// `ln v(t)`.
    pub fn ln_eval(&self, t: f64) -> f64 {
        assert!(t > 0.0, "weight evaluated at t = {t}");
        if t >= 1.0 {
            return 0.0;
        }
        let ln_t = t.ln();
        match &self.family {
            Family::Power(a) => -a * ln_t,
            Family::Logpow(b) => b * (1.0 - ln_t).ln(),
            Family::Table { ln_t: xs, ln_v: ys } => interp_table(xs, ys, ln_t),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(t).exp()
    }

    /// `ln v(2^{-e})`, usable for exponents far below `f64` underflow.
    pub fn ln_eval_dyadic(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Power(a) => a * e * LN_2,
            Family::Logpow(b) => b * (1.0 + e * LN_2).ln(),
            Family::Table { ln_t: xs, ln_v: ys } => interp_table(xs, ys, -e * LN_2),
        }
    }

    /// `v(2^{-e})`.
    pub fn eval_dyadic(&self, e: f64) -> f64 {
        self.ln_eval_dyadic(e).exp()
    }
}

fn validate_table(t: &[f64], v: &[f64]) -> Result<Family> {
    if t.len() != v.len() {
        return Err(Error::Weight(format!(
            "table has {} abscissae but {} values",
            t.len(),
            v.len()
        )));
    }
    if t.len() < 2 {
        return Err(Error::Weight("table needs at least two samples".into()));
    }
    for (i, (&ti, &vi)) in t.iter().zip(v).enumerate() {
        if !(ti.is_finite() && ti > 0.0 && vi.is_finite() && vi >= 1.0) {
            return Err(Error::Weight(format!(
                "table sample {i} = ({ti}, {vi}) needs t > 0 and v >= 1"
            )));
        }
    }
    for i in 1..t.len() {
        if t[i] <= t[i - 1] {
            return Err(Error::Weight(format!(
                "table abscissae must increase strictly (index {i})"
            )));
        }
        if v[i] > v[i - 1] {
            return Err(Error::Weight(format!(
                "table is not monotone: v increases at index {i}"
            )));
        }
    }
    if *t.last().unwrap() < 1.0 {
        return Err(Error::Weight("table must extend to t = 1".into()));
    }
    for (i, (&ti, &vi)) in t.iter().zip(v).enumerate() {
        if ti >= 1.0 && vi != 1.0 {
            return Err(Error::Weight(format!(
                "table sample {i} has t >= 1 but v = {vi} != 1"
            )));
        }
    }
    if v[0] <= v[1] {
        return Err(Error::Weight(
            "table must be strictly decreasing at its first segment so that v is unbounded at 0"
                .into(),
        ));
    }
    Ok(Family::Table {
        ln_t: t.iter().map(|x| x.ln()).collect(),
        ln_v: v.iter().map(|x| x.ln()).collect(),
    })
}

/// Piecewise-linear in `(ln t, ln v)`; below the first sample the first
/// segment is extended as a power law.
fn interp_table(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x >= 0.0 {
        return 0.0;
    }
    let i = match xs.iter().position(|&xi| xi >= x) {
        Some(0) => 1,
        Some(i) => i,
        None => return 0.0,
    };
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Doubling constant on the quarter-dyadic grid `t = 2^{-k/4}`,
/// `k = 0..=4·grid_depth`: the largest ratio `v(t)/v(2t)`.
pub fn doubling_constant(w: &Weight, grid_depth: u32) -> Result<f64> {
    if grid_depth < 4 {
        return Err(Error::Argument(format!(
            "grid depth must be at least 4, got {grid_depth}"
        )));
    }
    let floor = w.sample_floor();
    let mut d: f64 = 1.0;
    for k in 0..=4 * grid_depth {
        let e = k as f64 / 4.0;
        if floor > 0.0 && (-e * LN_2).exp() < floor {
            break;
        }
        let ratio = (w.ln_eval_dyadic(e) - w.ln_eval_dyadic(e - 1.0)).exp();
        d = d.max(ratio);
    }
    Ok(d)
}

/// Band base used when the caller does not override it: `max(2, ⌈D²⌉ + 1)`.
pub fn default_band_base(doubling: f64) -> f64 {
    // D² within rounding of an integer counts as that integer
    (doubling * doubling - 1e-9).ceil().max(1.0) + 1.0
}

fn band_tolerance(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// Exponents `α_0 = 0 < α_1 < … < α_{l_max}` with
/// `v(2^{-α_l}) ∈ [A^l, A^{l+1})`, each the smallest integer reaching `A^l`.
pub fn scale_sequence(w: &Weight, band_base: f64, l_max: usize) -> Result<Vec<u64>> {
    if !(band_base.is_finite() && band_base > 1.0) {
        return Err(Error::Plan(format!("band base A must exceed 1, got {band_base}")));
    }
    if l_max < 1 {
        return Err(Error::Plan("l_max must be at least 1".into()));
    }
    let ln_a = band_base.ln();
    let reaches = |alpha: u64, l: usize| {
        let target = l as f64 * ln_a;
        w.ln_eval_dyadic(alpha as f64) >= target - band_tolerance(target)
    };
    let mut alphas = Vec::with_capacity(l_max + 1);
    alphas.push(0u64);
    for l in 1..=l_max {
        let prev = *alphas.last().unwrap();
        // exponential bracket, then bisection for the smallest hit
        let mut step = 1u64;
        let mut hi = prev + 1;
        while !reaches(hi, l) {
            step = step.checked_mul(2).ok_or_else(|| {
                Error::Plan(format!("level {l}: weight never reaches A^{l}"))
            })?;
            hi = prev.checked_add(step).filter(|&h| h < (1u64 << 53)).ok_or_else(|| {
                Error::Plan(format!("level {l}: weight never reaches A^{l}"))
            })?;
        }
        let mut lo = prev;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(mid, l) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let upper = (l + 1) as f64 * ln_a;
        if w.ln_eval_dyadic(hi as f64) >= upper - band_tolerance(upper) {
            return Err(Error::Plan(format!(
                "level {l}: v jumps past the band [A^{l}, A^{}) between 2^-{} and 2^-{hi}; \
                 increase A",
                l + 1,
                hi - 1
            )));
        }
        alphas.push(hi);
    }
    Ok(alphas)
}

/// `ln r_l` for the ratio
/// `2^{-m α_l} v(2^{-α_l}) / (2^{-m α_{l-1}} v(2^{-α_{l-1}}))`.
fn ln_step_ratio(w: &Weight, alphas: &[u64], m: u32, l: usize) -> f64 {
    let (a1, a0) = (alphas[l] as f64, alphas[l - 1] as f64);
    -(m as f64) * (a1 - a0) * LN_2 + w.ln_eval_dyadic(a1) - w.ln_eval_dyadic(a0)
}

/// Largest step ratio over the plan for exponent `m`.
pub fn max_step_ratio(w: &Weight, alphas: &[u64], m: u32) -> f64 {
    (1..alphas.len())
        .map(|l| ln_step_ratio(w, alphas, m, l).exp())
        .fold(0.0, f64::max)
}

/// Test exponents (in `t = 2^{-e}`) covering `(0, 1]` down to the plan depth.
fn monotonicity_grid(w: &Weight, alphas: &[u64]) -> Vec<f64> {
    let deepest = alphas.last().copied().unwrap_or(0) as f64;
    let mut es: Vec<f64> = (0..=256).map(|k| k as f64 / 4.0).collect();
    let mut e = 64.0;
    while e < deepest {
        e *= 1.05;
        es.push(e);
    }
    es.extend(alphas.iter().map(|&a| a as f64));
    let floor = w.sample_floor();
    if floor > 0.0 {
        let e_max = -floor.log2();
        es.retain(|&e| e <= e_max);
    }
    es.sort_by(|a, b| a.total_cmp(b));
    es.dedup();
    es
}

/// Whether `t^{m-1} v(t)` is non-decreasing on the test grid of `(0, 1]`.
fn is_nondecreasing_profile(w: &Weight, es: &[f64], m: u32) -> bool {
    // in e = -log2 t the profile must be non-increasing
    let f = |e: f64| -((m - 1) as f64) * e * LN_2 + w.ln_eval_dyadic(e);
    es.windows(2).all(|p| {
        let (f0, f1) = (f(p[0]), f(p[1]));
        f1 <= f0 + 1e-12 * f0.abs().max(1.0)
    })
}

/// Smallest positive `m ≤ 64` for which `t^{m-1} v(t)` is non-decreasing on
/// `(0, 1]` and the step ratios of the plan stay below one. Returns `m` and
/// the certificate `γ = max_l r_l`.
pub fn smoothness_exponent(w: &Weight, alphas: &[u64]) -> Result<(u32, f64)> {
    if alphas.len() < 2 {
        return Err(Error::Plan("need at least two plan levels".into()));
    }
    let es = monotonicity_grid(w, alphas);
    for m in 1..=64u32 {
        if !is_nondecreasing_profile(w, &es, m) {
            continue;
        }
        let gamma = max_step_ratio(w, alphas, m);
        if gamma < 1.0 {
            return Ok((m, gamma));
        }
    }
    Err(Error::Plan(
        "no exponent m <= 64 makes t^(m-1) v(t) increasing; weight grows too fast".into(),
    ))
}

/// Largest gap `α_{l+1} − α_l` if it is already attained in the first half
/// of the computed levels (no new maximum later on), else `None`.
pub fn power_type_gap(alphas: &[u64]) -> Option<u64> {
    let gaps: Vec<u64> = alphas.windows(2).map(|p| p[1] - p[0]).collect();
    if gaps.is_empty() {
        return None;
    }
    let first_half = gaps.len() - gaps.len() / 2;
    let d = *gaps.iter().max().unwrap();
    let d_early = *gaps[..first_half].iter().max().unwrap();
    (d_early == d).then_some(d)
}

/// Weight-adapted data driving every decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    #[serde(rename = "A")]
    pub band_base: f64,
    pub alphas: Vec<u64>,
    pub m: u32,
    pub gamma: f64,
    #[serde(rename = "d")]
    pub power_type_gap: Option<u64>,
}

pub const DEFAULT_GRID_DEPTH: u32 = 24;
pub const DEFAULT_L_MAX: usize = 12;

impl ScalePlan {
    /// Full plan: band base (default `max(2, ⌈D²⌉ + 1)`), exponents,
    /// smoothness exponent and power-type gap.
    pub fn build(w: &Weight, band_base: Option<f64>, l_max: usize) -> Result<Self> {
        let band_base = match band_base {
            Some(a) => a,
            None => default_band_base(doubling_constant(w, DEFAULT_GRID_DEPTH)?),
        };
        let alphas = scale_sequence(w, band_base, l_max)?;
        let (m, gamma) = smoothness_exponent(w, &alphas)?;
        let power_type_gap = power_type_gap(&alphas);
        Ok(Self {
            band_base,
            alphas,
            m,
            gamma,
            power_type_gap,
        })
    }

    pub fn l_max(&self) -> usize {
        self.alphas.len() - 1
    }

    /// Number of levels `l` with `α_l ≤ level`.
    pub fn levels_within(&self, level: u32) -> usize {
        self.alphas.iter().take_while(|&&a| a <= level as u64).count()
    }

    /// Block index that contains detail generation `j`: the `l` with
    /// `α_{l-1} < j ≤ α_l`, or 0 for `j ≤ α_0`. `None` past the plan.
    pub fn block_of(&self, j: u32) -> Option<usize> {
        let j = j as u64;
        if j <= self.alphas[0] {
            return Some(0);
        }
        self.alphas.iter().position(|&a| a >= j)
    }

    /// Geometric tail `∑_{l>L} 2^{m(α_L − α_{l-1})} v(2^{-α_l}) / v(2^{-α_L})`.
    /// Each term is at most `A² γ^{l-1-L}`, so the sum is below `A²/(1−γ)`.
    pub fn geometric_tail(&self, w: &Weight, level: usize) -> f64 {
        let m = self.m as f64;
        let a_l = self.alphas[level] as f64;
        let ln_vl = w.ln_eval_dyadic(a_l);
        (level + 1..self.alphas.len())
            .map(|l| {
                let prev = self.alphas[l - 1] as f64;
                (m * (a_l - prev) * LN_2 + w.ln_eval_dyadic(self.alphas[l] as f64) - ln_vl)
                    .exp()
            })
            .sum()
    }

    pub fn geometric_tail_bound(&self) -> f64 {
        self.band_base * self.band_base / (1.0 - self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_matches_closed_forms() {
        let p = Weight::power(1.5).unwrap();
        assert!((p.eval(0.25) - 8.0).abs() < 1e-12);
        assert_eq!(p.eval(2.0), 1.0);
        let l = Weight::logpow(2.0).unwrap();
        let t: f64 = 0.1;
        assert!((l.eval(t) - (1.0 - t.ln()).powi(2)).abs() < 1e-12);
        assert!((l.eval_dyadic(3.0) - l.eval(0.125)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_bad_weights_rejected() {
        assert!(Weight::power(0.0).is_err());
        assert!(Weight::logpow(-1.0).is_err());
        assert!(Weight::power(f64::NAN).is_err());
        // non-monotone
        assert!(Weight::table(vec![0.1, 0.5, 1.0], vec![3.0, 4.0, 1.0]).is_err());
        // flat at the origin
        assert!(Weight::table(vec![0.1, 0.5, 1.0], vec![2.0, 2.0, 1.0]).is_err());
        // does not reach t = 1
        assert!(Weight::table(vec![0.1, 0.5], vec![3.0, 2.0]).is_err());
    }

    #[test]
    fn table_reproduces_power_law() {
        let ts: Vec<f64> = (0..=20).rev().map(|k| 2f64.powi(-k)).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
        let w = Weight::table(ts, vs).unwrap();
        assert!((w.eval(0.3) - 1.0 / 0.3).abs() < 1e-9);
        // extrapolated below the samples as the first segment's power law
        assert!((w.eval_dyadic(25.0) - 2f64.powi(25)).abs() < 1e-3);
        assert_eq!(w.eval(1.5), 1.0);
    }

    #[test]
    fn doubling_constant_examples() {
        let d = doubling_constant(&Weight::power(1.0).unwrap(), 20).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let d = doubling_constant(&Weight::logpow(1.0).unwrap(), 20).unwrap();
        assert!((d - (1.0 + LN_2)).abs() < 1e-12);
        assert!(doubling_constant(&Weight::power(1.0).unwrap(), 3).is_err());
    }

    #[test]
    fn doubling_constant_brute_force() {
        // independent dense scan of v(t)/v(2t) on the same grid, in linear space
        let w = Weight::logpow(1.0).unwrap();
        let mut best: f64 = 1.0;
        for k in 0..=80 {
            let t = 2f64.powf(-(k as f64) / 4.0);
            let v = |t: f64| if t > 1.0 { 1.0 } else { 1.0 - t.ln() };
            best = best.max(v(t) / v(2.0 * t));
        }
        assert!((doubling_constant(&w, 20).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn scale_sequence_examples() {
        let alphas = scale_sequence(&Weight::power(1.0).unwrap(), 2.0, 10).unwrap();
        assert_eq!(alphas, (0..=10).collect::<Vec<u64>>());
        let alphas = scale_sequence(&Weight::logpow(1.0).unwrap(), std::f64::consts::E, 5).unwrap();
        assert_eq!(alphas, vec![0, 3, 10, 28, 78, 213]);
        let alphas = scale_sequence(&Weight::power(0.5).unwrap(), 2.0, 6).unwrap();
        assert_eq!(alphas, vec![0, 2, 4, 6, 8, 10, 12]);
    }

    #[test]
    fn scale_sequence_rejects_bands_that_are_skipped() {
        // v jumps by 2^3 per dyadic step; A = 2 bands cannot all be hit
        let err = scale_sequence(&Weight::power(3.0).unwrap(), 2.0, 4).unwrap_err();
        assert!(err.to_string().contains("level 1"), "{err}");
    }

    #[test]
    fn smoothness_exponent_examples() {
        let w = Weight::power(1.0).unwrap();
        let alphas = scale_sequence(&w, 2.0, 10).unwrap();
        let (m, gamma) = smoothness_exponent(&w, &alphas).unwrap();
        assert_eq!(m, 2);
        assert!((gamma - 0.5).abs() < 1e-12);

        let w = Weight::power(1.5).unwrap();
        let plan = ScalePlan::build(&w, None, 10).unwrap();
        assert_eq!(plan.m, 3);

        let w = Weight::logpow(1.0).unwrap();
        let plan = ScalePlan::build(&w, None, 8).unwrap();
        assert_eq!(plan.m, 2);
        assert!(plan.gamma < 1.0);

        let w = Weight::power(70.0).unwrap();
        let alphas = vec![0, 1, 2];
        assert!(smoothness_exponent(&w, &alphas).is_err());
    }

    #[test]
    fn power_type_gap_examples() {
        let a = scale_sequence(&Weight::power(1.0).unwrap(), 2.0, 10).unwrap();
        assert_eq!(power_type_gap(&a), Some(1));
        let a = scale_sequence(&Weight::power(0.5).unwrap(), 2.0, 10).unwrap();
        assert_eq!(power_type_gap(&a), Some(2));
        let a = scale_sequence(&Weight::logpow(1.0).unwrap(), std::f64::consts::E, 5).unwrap();
        assert_eq!(power_type_gap(&a), None);
    }

    #[test]
    fn default_band_base_rule() {
        assert_eq!(default_band_base(2.0), 5.0);
        assert_eq!(default_band_base(1.0 + LN_2), 4.0);
        assert_eq!(default_band_base(1.0), 2.0);
        let plan = ScalePlan::build(&Weight::power(1.0).unwrap(), None, 6).unwrap();
        assert_eq!(plan.band_base, 5.0);
    }

    #[test]
    fn plan_serializes_with_short_keys() {
        let plan = ScalePlan::build(&Weight::power(1.0).unwrap(), Some(2.0), 4).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(json["A"], 2.0);
        assert_eq!(json["alphas"], serde_json::json!([0, 1, 2, 3, 4]));
        assert_eq!(json["m"], 2);
        assert_eq!(json["d"], 1);
    }

    #[test]
    fn descriptor_json_forms() {
        let d: WeightDescriptor = serde_json::from_str(r#"{"family":"power","a":1.5}"#).unwrap();
        assert_eq!(d, WeightDescriptor::Power { a: 1.5 });
        let d: WeightDescriptor = serde_json::from_str(r#"{"family":"logpow","b":1.0}"#).unwrap();
        assert_eq!(d, WeightDescriptor::Logpow { b: 1.0 });
        let d: WeightDescriptor =
            serde_json::from_str(r#"{"family":"table","t":[0.5,1.0],"v":[2.0,1.0]}"#).unwrap();
        assert!(Weight::from_descriptor(d).is_ok());
    }

    #[test]
    fn block_lookup() {
        let plan = ScalePlan::build(&Weight::power(1.0).unwrap(), Some(5.0), 6).unwrap();
        assert_eq!(plan.alphas, vec![0, 3, 5, 7, 10, 12, 14]);
        assert_eq!(plan.block_of(0), Some(0));
        assert_eq!(plan.block_of(3), Some(1));
        assert_eq!(plan.block_of(4), Some(2));
        assert_eq!(plan.block_of(14), Some(6));
        assert_eq!(plan.block_of(15), None);
        assert_eq!(plan.levels_within(12), 6);
    }
}
