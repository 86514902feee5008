//! Weighted coefficient sequences `a_{jk} = ∫ U φ_{jk}` with `L¹`-normalized
//! `φ_{jk} = 2^j φ(2^j · − k)`, the consistency lattice they live in and the
//! explicit projection onto it.
//!
//! Levels are the plan exponents that fit the grid. The deepest level is
//! authoritative: relations are imposed between consecutive levels only,
//! and the composition identity carries them to every other pair.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::wavelet::{approximation_pyramid, upsample, WaveletBasis};
use crate::weight::{ScalePlan, Weight};

/// `γ(j, ·)` with `φ_{00} = ∑_m γ(j,m) φ_{jm}`, indexed from `m = 0`.
pub fn refinement_coeffs(basis: &WaveletBasis, j: u32) -> Vec<f64> {
    let g1: Vec<f64> = basis
        .scaling_filter()
        .iter()
        .map(|h| h / std::f64::consts::SQRT_2)
        .collect();
    let mut g = vec![1.0];
    for _ in 0..j {
        let mut next = vec![0.0; 2 * (g.len() - 1) + g1.len()];
        for (m, gm) in g.iter().enumerate() {
            for (n, h) in g1.iter().enumerate() {
                next[2 * m + n] += gm * h;
            }
        }
        g = next;
    }
    g
}

/// `γ` for each gap between consecutive sequence levels, computed once.
#[derive(Debug, Clone)]
pub struct RefinementTable {
    gammas: BTreeMap<u32, Vec<f64>>,
}

impl RefinementTable {
    pub fn new(basis: &WaveletBasis, levels: &[u32]) -> Self {
        let mut gammas = BTreeMap::new();
        for pair in levels.windows(2) {
            let gap = pair[1] - pair[0];
            gammas.entry(gap).or_insert_with(|| refinement_coeffs(basis, gap));
        }
        Self { gammas }
    }

    pub fn gamma(&self, gap: u32) -> &[f64] {
        &self.gammas[&gap]
    }
}

/// `(R a')_k = ∑_m γ(g, m − 2^g k) a'_m`, periodic in `m`.
pub fn restrict(fine: &[f64], gamma: &[f64], gap: u32) -> Vec<f64> {
    let n = fine.len();
    let stride = 1usize << gap;
    (0..n / stride)
        .map(|k| {
            gamma
                .iter()
                .enumerate()
                .map(|(s, g)| g * fine[(stride * k + s) % n])
                .sum()
        })
        .collect()
}

/// `(Q δ)_k = 2^g ∑_m γ(g, k − 2^g m) δ_m`; `R Q = I` on the torus.
pub fn lift(coarse: &[f64], gamma: &[f64], gap: u32) -> Vec<f64> {
    let stride = 1usize << gap;
    let n = coarse.len() * stride;
    let mut out = vec![0.0; n];
    for (m, d) in coarse.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        for (s, g) in gamma.iter().enumerate() {
            out[(stride * m + s) % n] += stride as f64 * g * d;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSequence {
    /// Dyadic levels `j`, increasing.
    pub levels: Vec<u32>,
    /// `v(2^{-j})` per level.
    pub weights: Vec<f64>,
    /// `entries[i][k] = a_{j_i k}`, `k < 2^{j_i}`.
    pub entries: Vec<Vec<f64>>,
}

impl WeightedSequence {
    pub fn new(levels: Vec<u32>, weights: Vec<f64>, entries: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() || levels.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::Argument("sequence levels must be non-empty and increasing".into()));
        }
        if weights.len() != levels.len() || entries.len() != levels.len() {
            return Err(Error::Argument("levels, weights and entries differ in length".into()));
        }
        for (j, e) in levels.iter().zip(&entries) {
            if e.len() != 1 << j {
                return Err(Error::Argument(format!(
                    "level {j} needs {} entries, got {}",
                    1usize << j,
                    e.len()
                )));
            }
        }
        Ok(Self {
            levels,
            weights,
            entries,
        })
    }

    /// `sup_{j,k} |a_{jk}| / v(2^{-j})`.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .zip(&self.weights)
            .map(|(e, w)| e.iter().fold(0.0f64, |m, x| m.max(x.abs())) / w)
            .fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Same levels, every entry mapped.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            entries: self.entries.iter().map(|e| e.iter().map(|x| f(*x)).collect()).collect(),
            ..self.clone()
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
            ..self.clone()
        }
    }
}

/// Plan exponents that fit a grid of `level`.
pub fn sequence_levels(plan: &ScalePlan, level: u32) -> Vec<u32> {
    plan.alphas
        .iter()
        .take_while(|&&a| a <= level as u64)
        .map(|&a| a as u32)
        .collect()
}

/// `a_{jk} = ∫ U φ_{jk}` at the plan levels, `= 2^{j/2}` times the
/// `L²`-normalized scaling coefficient.
pub fn sample_coefficients(
    boundary: &GridFunction,
    v: &Weight,
    basis: &WaveletBasis,
    plan: &ScalePlan,
) -> Result<WeightedSequence> {
    let level = boundary.level();
    let levels = sequence_levels(plan, level);
    if levels.len() < 2 {
        return Err(Error::Resolution(format!(
            "grid level {level} holds fewer than two plan levels"
        )));
    }
    let pyramid = approximation_pyramid(boundary, basis);
    let entries = levels
        .iter()
        .map(|&j| {
            let s = 2f64.powf(j as f64 / 2.0);
            pyramid[j as usize].iter().map(|c| c * s).collect()
        })
        .collect();
    let weights = levels.iter().map(|&j| v.eval_dyadic(j as f64)).collect();
    WeightedSequence::new(levels, weights, entries)
}

/// `δ_{jk} = a_{jk} − ∑_m γ(j′−j, m − 2^{j′−j}k) a_{j′m}` with `j′` the next
/// level; zero at the deepest level.
pub fn consistency_defect(seq: &WeightedSequence, table: &RefinementTable) -> WeightedSequence {
    let n = seq.levels.len();
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        if i + 1 == n {
            entries.push(vec![0.0; seq.entries[i].len()]);
            break;
        }
        let gap = seq.levels[i + 1] - seq.levels[i];
        let pulled = restrict(&seq.entries[i + 1], table.gamma(gap), gap);
        entries.push(seq.entries[i].iter().zip(&pulled).map(|(a, p)| a - p).collect());
    }
    WeightedSequence {
        entries,
        ..seq.clone()
    }
}

/// `ã_{jk} = a_{jk} + ∑_{i<j} 2^{j−i} ∑_m γ(j−i, k − 2^{j−i}m) δ_{im}`.
///
/// The inner sum over `i` is accumulated level by level: the lift from `i`
/// to `j` equals the composition of consecutive lifts.
pub fn project_to_ell(seq: &WeightedSequence, table: &RefinementTable) -> WeightedSequence {
    let delta = consistency_defect(seq, table);
    let mut out = seq.clone();
    let mut carried = vec![0.0; 1];
    for i in 0..seq.levels.len() {
        if i > 0 {
            let gap = seq.levels[i] - seq.levels[i - 1];
            carried = lift(&carried, table.gamma(gap), gap);
            out.entries[i].iter_mut().zip(&carried).for_each(|(a, c)| *a += c);
        } else {
            carried = vec![0.0; seq.entries[0].len()];
        }
        carried.iter_mut().zip(&delta.entries[i]).for_each(|(c, d)| *c += d);
    }
    out
}

/// Boundary data `∑_k 2^{-j} a_{jk} φ_{jk}` at the deepest level.
pub fn synthesize_sequence(seq: &WeightedSequence, basis: &WaveletBasis, grid_level: u32) -> GridFunction {
    let j = *seq.levels.last().unwrap();
    let s = 2f64.powf(-(j as f64) / 2.0);
    let coeffs: Vec<f64> = seq.entries.last().unwrap().iter().map(|a| a * s).collect();
    upsample(&coeffs, grid_level, basis)
}

/// Entries `v(2^{-j}) ξ`, `ξ` uniform on `[−1, 1]`, rescaled to norm 1.
pub fn random_sequence(v: &Weight, levels: &[u32], seed: u64) -> Result<WeightedSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = levels.iter().map(|&j| v.eval_dyadic(j as f64)).collect();
    let entries = levels
        .iter()
        .zip(&weights)
        .map(|(&j, w)| (0..1usize << j).map(|_| w * rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let seq = WeightedSequence::new(levels.to_vec(), weights, entries)?;
    let norm = seq.norm();
    Ok(seq.map(|x| x / norm))
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementCheck {
    pub j: u32,
    /// `|∑_m γ(j,m)² − 2^{-j}|`.
    pub energy_residual: f64,
    /// `max_{k≠κ} |∑_m γ(j, m−2^j k) γ(j, m−2^j κ)|`.
    pub orthogonality_residual: f64,
    pub support: usize,
}

pub fn refinement_check(basis: &WaveletBasis, j: u32) -> RefinementCheck {
    let g = refinement_coeffs(basis, j);
    let energy: f64 = g.iter().map(|x| x * x).sum();
    let stride = 1usize << j;
    let mut orth: f64 = 0.0;
    for shift in (stride..g.len()).step_by(stride) {
        let s: f64 = g.iter().zip(&g[shift..]).map(|(a, b)| a * b).sum();
        orth = orth.max(s.abs());
    }
    RefinementCheck {
        j,
        energy_residual: (energy - 2f64.powi(-(j as i32))).abs(),
        orthogonality_residual: orth,
        support: g.len(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceReport {
    pub levels: Vec<u32>,
    pub refinement: Vec<RefinementCheck>,
    /// Defect of sampled genuine data.
    pub genuine_defect: f64,
    /// `‖P S U − S U‖`.
    pub fixed_point_residual: f64,
    pub idempotence_residual: f64,
    pub projected_defect: f64,
    /// Re-sampling the synthesis of a projected sequence.
    pub round_trip_residual: f64,
    /// `max ‖P a‖_{∞,w}` over random `a` of norm 1.
    pub projection_bound: f64,
    pub draws: usize,
}

pub fn max_abs(seq: &WeightedSequence) -> f64 {
    seq.entries.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Every sequence-space identity on one grid: refinement identities,
/// fixed points, idempotence, round trip and the empirical projection norm.
pub fn sequence_report(
    boundary: &GridFunction,
    v: &Weight,
    basis: &WaveletBasis,
    plan: &ScalePlan,
    draws: usize,
    seed: u64,
) -> Result<SequenceReport> {
    let level = boundary.level();
    let genuine = sample_coefficients(boundary, v, basis, plan)?;
    let levels = genuine.levels.clone();
    let table = RefinementTable::new(basis, &levels);
    let refinement = (1..=levels.last().copied().unwrap_or(0).min(8))
        .map(|j| refinement_check(basis, j))
        .collect();
    let genuine_defect = max_abs(&consistency_defect(&genuine, &table));
    let fixed_point_residual = project_to_ell(&genuine, &table).max_diff(&genuine);

    let mut idempotence_residual: f64 = 0.0;
    let mut projected_defect: f64 = 0.0;
    let mut round_trip_residual: f64 = 0.0;
    let mut projection_bound: f64 = 0.0;
    for d in 0..draws {
        let a = random_sequence(v, &levels, seed.wrapping_add(d as u64))?;
        let p = project_to_ell(&a, &table);
        let pp = project_to_ell(&p, &table);
        let scale = max_abs(&p).max(1.0);
        idempotence_residual = idempotence_residual.max(pp.max_diff(&p) / scale);
        projected_defect = projected_defect.max(max_abs(&consistency_defect(&p, &table)) / scale);
        projection_bound = projection_bound.max(p.norm());
        if d < 4 {
            let u = synthesize_sequence(&p, basis, level);
            let back = sample_coefficients(&u, v, basis, plan)?;
            round_trip_residual = round_trip_residual.max(back.max_diff(&p) / scale);
        }
    }
    Ok(SequenceReport {
        levels,
        refinement,
        genuine_defect,
        fixed_point_residual,
        idempotence_residual,
        projected_defect,
        round_trip_residual,
        projection_bound,
        draws,
    })
}

pub fn write_defect_csv<W: std::io::Write>(delta: &WeightedSequence, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["j", "k", "delta"])?;
    for (j, e) in delta.levels.iter().zip(&delta.entries) {
        for (k, d) in e.iter().enumerate() {
            out.write_record([j.to_string(), k.to_string(), d.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}
