//! Membership in the growth space: direct norm, partial-sum profile,
//! block and coefficient bounds, member synthesis and the stacking
//! counterexample for weights without bounded scale gaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::poisson::HarmonicField;
use crate::stats;
use crate::wavelet::{
    analyze, block_ranges, projection_ladder, synthesize, CoeffTree, WaveletBasis,
};
use crate::weight::{ScalePlan, Weight};

/// `max_{t, x} |u(x,t)| / v(t)` over the field's t-grid.
pub fn growth_norm(field: &HarmonicField, v: &Weight) -> f64 {
    (0..field.t_grid().len())
        .into_par_iter()
        .map(|i| field.grid_level(i).sup_norm() / v.eval(field.t_grid()[i]))
        .reduce(|| 0.0, f64::max)
}

/// Per-height sup norms of the partial sums and of the plan blocks.
struct HeightScan {
    /// `‖s_N(u(·,t))‖_∞` for `N = 0..J−1`.
    partial: Vec<f64>,
    /// `‖g_l(·,t)‖_∞` per block.
    blocks: Vec<f64>,
}

fn scan_height(u: &GridFunction, basis: &WaveletBasis, ranges: &[Option<(u32, u32)>]) -> HeightScan {
    let ladder = projection_ladder(u, basis);
    let j0 = basis.coarse_level();
    // ladder[j] = E_j; s_N = E_{N+1}
    let partial = ladder[1..].iter().map(GridFunction::sup_norm).collect();
    let at = |j: u32| &ladder[j as usize];
    let blocks = ranges
        .iter()
        .enumerate()
        .map(|(l, r)| match (l, r) {
            (0, None) => at(j0).sup_norm(),
            (0, Some((_, hi))) => at(hi + 1).sup_norm(),
            (_, Some((lo, hi))) => at(hi + 1).max_diff(at(*lo)),
            (_, None) => 0.0,
        })
        .collect();
    HeightScan { partial, blocks }
}

fn scan_field(
    field: &HarmonicField,
    basis: &WaveletBasis,
    ranges: &[Option<(u32, u32)>],
) -> Vec<HeightScan> {
    (0..field.t_grid().len())
        .into_par_iter()
        .map(|i| scan_height(field.grid_level(i), basis, ranges))
        .collect()
}

fn column_max(rows: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    rows.fold(Vec::new(), |mut acc, row| {
        if acc.is_empty() {
            return row;
        }
        for (a, r) in acc.iter_mut().zip(row) {
            *a = a.max(r);
        }
        acc
    })
}

/// `M_N = max_t ‖s_N(u(·,t))‖_∞` for `N = 0..J−1`, where
/// `s_N = E_{N+1}`; below the coarse level this is a coarser projection.
pub fn msum_profile(field: &HarmonicField, basis: &WaveletBasis) -> Vec<f64> {
    column_max(
        scan_field(field, basis, &[])
            .into_iter()
            .map(|s| s.partial),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "M_N")]
    pub m_n: f64,
    pub v: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    #[serde(rename = "K_direct")]
    pub k_direct: f64,
    #[serde(rename = "M_profile")]
    pub m_profile: Vec<ProfileRow>,
    #[serde(rename = "K_wavelet")]
    pub k_wavelet: f64,
    pub equivalence_ratio: f64,
    /// Least-squares slope of `M_N / v(2^{-N})` against `N`.
    pub h_v0_trend: f64,
    /// Last-quarter mean of `M_N / v(2^{-N})` below a tenth of the
    /// first-quarter mean.
    pub h_v0_flag: bool,
    /// `max_t ‖g_l(·,t)‖_∞ / v(2^{-α_l})` per block present on the grid.
    pub block_ratios: Vec<f64>,
    pub max_block_ratio: f64,
}

fn h_v0_flag(ratios: &[f64]) -> bool {
    let q = (ratios.len() / 4).max(1);
    let first = stats::mean(&ratios[..q]);
    let last = stats::mean(&ratios[ratios.len() - q..]);
    last < 0.1 * first
}

/// Direct norm, partial-sum profile and block bounds in one pass over the
/// t-grid.
pub fn characterize(
    field: &HarmonicField,
    v: &Weight,
    basis: &WaveletBasis,
    plan: &ScalePlan,
) -> Result<GrowthReport> {
    let level = field.level();
    let j0 = basis.coarse_level();
    if level <= j0 + 1 {
        return Err(Error::Resolution(format!(
            "grid level {level} leaves no detail generations above {j0}"
        )));
    }
    let (ranges, _) = block_ranges(plan, j0, level);
    let scans = scan_field(field, basis, &ranges);
    let k_direct = growth_norm(field, v);
    let partial = column_max(scans.iter().map(|s| s.partial.clone()));
    let blocks = column_max(scans.into_iter().map(|s| s.blocks));

    let m_profile: Vec<ProfileRow> = partial
        .iter()
        .enumerate()
        .map(|(i, &m_n)| {
            let n = i as u32;
            let vn = v.eval_dyadic(n as f64);
            ProfileRow {
                n,
                m_n,
                v: vn,
                ratio: m_n / vn,
            }
        })
        .collect();
    let ratios: Vec<f64> = m_profile.iter().map(|r| r.ratio).collect();
    let ns: Vec<f64> = m_profile.iter().map(|r| r.n as f64).collect();
    let k_wavelet = stats::max(&ratios);
    let equivalence_ratio = if k_direct > 0.0 { k_wavelet / k_direct } else { 1.0 };

    let block_ratios: Vec<f64> = blocks
        .iter()
        .enumerate()
        .map(|(l, b)| b / v.eval_dyadic(plan.alphas[l] as f64))
        .collect();
    Ok(GrowthReport {
        k_direct,
        k_wavelet,
        equivalence_ratio,
        h_v0_trend: stats::slope(&ns, &ratios),
        h_v0_flag: h_v0_flag(&ratios),
        max_block_ratio: stats::max(&block_ratios),
        block_ratios,
        m_profile,
    })
}

pub fn write_profile_csv<W: std::io::Write>(report: &GrowthReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &report.m_profile {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Coefficients of a member are bounded by `C‖u‖ 2^{-j/2} v(2^{-j})`.
    Forward,
    /// Coefficient bounds imply membership; needs bounded scale gaps.
    Converse,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub direction: Direction,
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `max |c_{jk}| 2^{j/2} / v(2^{-j})` over all trees against `bound`.
pub fn coefficient_check(
    trees: &[CoeffTree],
    v: &Weight,
    plan: &ScalePlan,
    direction: Direction,
    bound: f64,
) -> Result<CoefficientReport> {
    if direction == Direction::Converse && plan.power_type_gap.is_none() {
        return Err(Error::NotPowerType(format!(
            "the converse coefficient characterization needs bounded gaps α_(l+1) − α_l; \
             computed gaps {:?} keep growing",
            plan.alphas.windows(2).map(|p| p[1] - p[0]).collect::<Vec<_>>()
        )));
    }
    let max_ratio = trees
        .iter()
        .flat_map(|tree| {
            (tree.j0..tree.level).map(move |j| {
                let scale = 2f64.powf(j as f64 / 2.0) / v.eval_dyadic(j as f64);
                tree.detail(j).iter().fold(0.0, |m: f64, c| m.max(c.abs())) * scale
            })
        })
        .fold(0.0, f64::max);
    Ok(CoefficientReport {
        direction,
        max_ratio,
        bound,
        pass: max_ratio <= bound,
    })
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Boundary data whose blocks have random signs and sup norms exactly
/// `B·v(2^{-α_l})`; the scaling part has sup norm `B`. A block cut by the
/// grid is scaled to `v` at its deepest generation instead.
pub fn random_member(
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
    b: f64,
    seed: u64,
    level: u32,
) -> Result<GridFunction> {
    let j0 = basis.coarse_level();
    if level <= j0 {
        return Err(Error::Resolution(format!(
            "grid level {level} must exceed the coarse level {j0}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ranges, _) = block_ranges(plan, j0, level);
    let mut total = GridFunction::zeros(level);
    for (l, range) in ranges.iter().enumerate() {
        let mut tree = CoeffTree::zeros(j0, level);
        if l == 0 {
            tree.scaling.iter_mut().for_each(|c| *c = sign(&mut rng));
        }
        let target_gen = match range {
            Some((lo, hi)) => {
                let vl = v.eval_dyadic(plan.alphas[l] as f64);
                for j in *lo..=*hi {
                    let amp = 2f64.powf(-(j as f64) / 2.0) * vl;
                    tree.detail_mut(j).iter_mut().for_each(|c| *c = sign(&mut rng) * amp);
                }
                (plan.alphas[l]).min(*hi as u64)
            }
            None if l == 0 => 0,
            None => continue,
        };
        let mut block = synthesize(&tree, basis);
        let norm = block.sup_norm();
        if norm > 0.0 {
            block.scale(b * v.eval_dyadic(target_gen as f64) / norm);
        }
        total.add_assign(&block);
    }
    Ok(total)
}

/// Member normalized to `‖u‖_{v,∞} = 1` on the grid.
pub fn normalized_member(
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
    seed: u64,
    level: u32,
) -> Result<HarmonicField> {
    let boundary = random_member(v, plan, basis, 1.0, seed, level)?;
    let k = growth_norm(&HarmonicField::new(boundary.clone()), v);
    if !(k > 0.0) {
        return Err(Error::Numerical("random member vanished".into()));
    }
    Ok(HarmonicField::new(boundary.scaled(1.0 / k)))
}

/// Boundary data with `|c_{jk}| = B 2^{-j/2} v(2^{-j})` exactly, random
/// signs, and unit scaling coefficients.
pub fn coefficient_member(
    v: &Weight,
    basis: &WaveletBasis,
    b: f64,
    seed: u64,
    level: u32,
) -> Result<(CoeffTree, GridFunction)> {
    let j0 = basis.coarse_level();
    if level <= j0 {
        return Err(Error::Resolution(format!(
            "grid level {level} must exceed the coarse level {j0}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = CoeffTree::zeros(j0, level);
    tree.scaling.iter_mut().for_each(|c| *c = sign(&mut rng));
    for j in j0..level {
        let amp = b * 2f64.powf(-(j as f64) / 2.0) * v.eval_dyadic(j as f64);
        tree.detail_mut(j).iter_mut().for_each(|c| *c = sign(&mut rng) * amp);
    }
    let f = synthesize(&tree, basis);
    Ok((tree, f))
}

/// Nesting data: every wavelet of generation `s·step` with index `k_s` sits
/// where its predecessor exceeds `2^{(s−1)step/2}·a`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Nesting {
    pub step: u32,
    pub a: f64,
    /// Offset `k*` with `ψ > a` on `[k*/2^step, (k* + S)/2^step)`.
    pub offset: u64,
}

/// Largest `a` over offsets `k*` for a fixed step, from the ψ table.
fn nesting_for_step(basis: &WaveletBasis, step: u32) -> Option<Nesting> {
    let table = basis.psi_table();
    let per_unit = 1usize << basis.tab_depth();
    let support = basis.support_length();
    let width = (support * per_unit) >> step;
    if width == 0 || step > basis.tab_depth() {
        return None;
    }
    let stride = per_unit >> step;
    let mut best: Option<Nesting> = None;
    let mut k = 0u64;
    while (k as usize) * stride + width < table.len() {
        let start = k as usize * stride;
        let a = table[start..start + width].iter().copied().fold(f64::INFINITY, f64::min);
        if a > 0.0 && best.is_none_or(|b| a > b.a) {
            best = Some(Nesting { step, a, offset: k });
        }
        k += 1;
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct StackTerm {
    pub d: u32,
    pub s_d: u32,
    /// Plan level whose gap hosts the stack.
    pub l_d: usize,
    pub sup_norm: f64,
    pub v_sd: f64,
    pub ratio: f64,
    /// `max |c_{jk}| 2^{j/2} / v(2^{-j})` of the realized function.
    pub coeff_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub nesting: Nesting,
    pub terms: Vec<StackTerm>,
    /// Least-squares slope of `ratio` against `d`.
    pub slope: f64,
}

/// Stacked wavelets `ν_d = ∑_{s=s_d}^{s_d+d} 2^{-s·step/2} v(2^{-step·s_d}) ψ_{s·step, k_s}`
/// placed inside one wide scale gap, for `d = 1..=d_max`.
pub fn counterexample_series(
    v: &Weight,
    plan: &ScalePlan,
    basis: &WaveletBasis,
    d_max: u32,
    level: u32,
) -> Result<(CounterexampleReport, Vec<GridFunction>)> {
    if let Some(d) = plan.power_type_gap {
        return Err(Error::NotPowerType(format!(
            "stacking needs unbounded gaps α_(l+1) − α_l, but this plan has power-type gap d = {d}"
        )));
    }
    let top = level - 1;
    // first step (coarsest nesting) with a usable placement for every d
    let mut found = None;
    for step in 1..=top {
        let Some(nest) = nesting_for_step(basis, step) else { continue };
        let mut placements = Vec::new();
        for d in 1..=d_max {
            let place = plan.alphas.windows(2).enumerate().find_map(|(l, w)| {
                if w[1] <= w[0] + (step * (d + 1)) as u64 {
                    return None;
                }
                let s_d = (w[0] / step as u64 + 1) as u32;
                ((s_d + d) * step <= top && s_d * step >= basis.coarse_level()).then_some((l, s_d))
            });
            match place {
                Some(p) => placements.push(p),
                None => break,
            }
        }
        if placements.len() == d_max as usize {
            found = Some((nest, placements));
            break;
        }
    }
    let Some((nest, placements)) = found else {
        return Err(Error::Resolution(format!(
            "no nested wavelet stack of depth {d_max} fits grid level {level}; increase J or lower the basis order"
        )));
    };

    let j0 = basis.coarse_level();
    let mut terms = Vec::new();
    let mut fields = Vec::new();
    for (i, &(l_d, s_d)) in placements.iter().enumerate() {
        let d = i as u32 + 1;
        let v_sd = v.eval_dyadic((nest.step * s_d) as f64);
        let mut tree = CoeffTree::zeros(j0, level);
        let mut k: u64 = 0;
        for s in 1..=s_d + d {
            k = (k << nest.step) + nest.offset;
            if s >= s_d {
                let j = s * nest.step;
                let row = tree.detail_mut(j);
                let idx = (k % row.len() as u64) as usize;
                row[idx] += 2f64.powf(-(j as f64) / 2.0) * v_sd;
            }
        }
        let nu = synthesize(&tree, basis);
        let coeff = coefficient_check(&[analyze(&nu, basis)?], v, plan, Direction::Forward, 1.0)?;
        let sup_norm = nu.sup_norm();
        terms.push(StackTerm {
            d,
            s_d,
            l_d,
            sup_norm,
            v_sd,
            ratio: sup_norm / v_sd,
            coeff_ratio: coeff.max_ratio,
        });
        fields.push(nu);
    }
    let ds: Vec<f64> = terms.iter().map(|t| t.d as f64).collect();
    let rs: Vec<f64> = terms.iter().map(|t| t.ratio).collect();
    Ok((
        CounterexampleReport {
            nesting: nest,
            slope: stats::slope(&ds, &rs),
            terms,
        },
        fields,
    ))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::wavelet::{atom, partial_sum};

    fn setup() -> (Weight, ScalePlan, WaveletBasis) {
        let v = Weight::power(1.0).unwrap();
        let plan = ScalePlan::build(&v, Some(2.0), 12).unwrap();
        (v, plan, WaveletBasis::with_order(4).unwrap())
    }

    #[test]
    fn constant_norm_and_homogeneity() {
        let v = Weight::logpow(1.0).unwrap();
        let one = HarmonicField::new(GridFunction::constant(8, 1.0));
        assert!((growth_norm(&one, &v) - 1.0).abs() < 1e-14);
        let f = crate::poisson::bandlimited_random(8, 30, 2);
        let k = growth_norm(&HarmonicField::new(f.clone()), &v);
        let k3 = growth_norm(&HarmonicField::new(f.scaled(-3.0)), &v);
        assert!((k3 - 3.0 * k).abs() < 1e-12 * k);
    }

    #[test]
    fn cosine_norm_matches_scalar_search() {
        let v = Weight::power(1.0).unwrap();
        let field = HarmonicField::new(GridFunction::from_fn(10, |x| (2.0 * PI * x).cos()));
        let k = growth_norm(&field, &v);
        // the grid is a subset of t > 0, so the dense maximum dominates
        let dense = (1..200_000)
            .map(|i| {
                let t = i as f64 * 1e-5;
                (-2.0 * PI * t).exp() * t.min(1.0)
            })
            .fold(0.0, f64::max);
        assert!(k <= dense + 1e-12);
        assert!(k >= 0.9 * dense, "{k} vs {dense}");
    }

    #[test]
    fn ladder_matches_partial_sums() {
        let (_, _, basis) = setup();
        let f = crate::poisson::bandlimited_random(9, 100, 5);
        let ladder = projection_ladder(&f, &basis);
        let tree = analyze(&f, &basis).unwrap();
        for n in 3..9 {
            let s = partial_sum(&tree, n, &basis).unwrap();
            assert!(s.max_diff(&ladder[(n + 1) as usize]) < 1e-12);
        }
    }

    #[test]
    fn constant_profile_and_flag() {
        let (v, plan, basis) = setup();
        let one = HarmonicField::new(GridFunction::constant(10, 1.0));
        let prof = msum_profile(&one, &basis);
        assert!(prof.iter().all(|m| (m - 1.0).abs() < 1e-10));
        let rep = characterize(&one, &v, &basis, &plan).unwrap();
        assert!((rep.k_direct - 1.0).abs() < 1e-12);
        assert!((rep.k_wavelet - 1.0).abs() < 1e-10);
        assert!((rep.equivalence_ratio - 1.0).abs() < 1e-10);
        assert!(rep.h_v0_flag);
        assert!(rep.h_v0_trend < 0.0);
    }

    #[test]
    fn single_wavelet_profile() {
        let (_, _, basis) = setup();
        let psi = atom(&basis, true, 6, 9, 10);
        // generations are exactly orthogonal on the boundary
        let ladder = projection_ladder(&psi, &basis);
        for (n, e) in ladder.iter().enumerate().skip(1) {
            if n <= 6 {
                assert!(e.sup_norm() <= 1e-8, "E_{n}: {}", e.sup_norm());
            }
        }
        // the Poisson multiplier leaks a little mass to coarser generations
        let prof = msum_profile(&HarmonicField::new(psi), &basis);
        for (n, m) in prof.iter().enumerate() {
            if n < 6 {
                assert!(*m <= 0.05 * prof[6], "N {n}: {m} vs {}", prof[6]);
            } else {
                assert!(*m > 0.1, "N {n}: {m}");
            }
        }
    }

    #[test]
    fn member_determinism_and_zero() {
        let (v, plan, basis) = setup();
        let a = random_member(&v, &plan, &basis, 1.0, 11, 10).unwrap();
        let b = random_member(&v, &plan, &basis, 1.0, 11, 10).unwrap();
        assert_eq!(a.samples(), b.samples());
        let z = random_member(&v, &plan, &basis, 0.0, 11, 10).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let c = random_member(&v, &plan, &basis, 1.0, 12, 10).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn member_blocks_have_prescribed_size() {
        let (v, plan, basis) = setup();
        let f = random_member(&v, &plan, &basis, 2.0, 3, 10).unwrap();
        let tree = analyze(&f, &basis).unwrap();
        let blocks = crate::wavelet::block_decompose(&tree, &plan, &basis);
        for (l, g) in blocks.blocks.iter().enumerate() {
            if blocks.generations[l].is_none() && l > 0 {
                continue;
            }
            let hi = blocks.generations[l].map_or(0, |r| r.1) as u64;
            let expect = 2.0 * v.eval_dyadic(plan.alphas[l].min(hi) as f64);
            assert!((g.sup_norm() - expect).abs() < 1e-9 * expect, "block {l}");
        }
    }

    #[test]
    fn coefficient_checks() {
        let (v, plan, basis) = setup();
        let one = analyze(&GridFunction::constant(10, 1.0), &basis).unwrap();
        let rep = coefficient_check(&[one], &v, &plan, Direction::Converse, 1.0).unwrap();
        assert!(rep.max_ratio < 1e-10);
        let (tree, f) = coefficient_member(&v, &basis, 1.0, 8, 10).unwrap();
        let rep = coefficient_check(&[tree], &v, &plan, Direction::Forward, 1.0 + 1e-8).unwrap();
        assert!(rep.pass && (rep.max_ratio - 1.0).abs() < 1e-12);
        let again = coefficient_check(&[analyze(&f, &basis).unwrap()], &v, &plan, Direction::Forward, 1.0 + 1e-8)
            .unwrap();
        assert!(again.pass, "{}", again.max_ratio);

        let lp = Weight::logpow(1.0).unwrap();
        let lplan = ScalePlan::build(&lp, None, 6).unwrap();
        let err = coefficient_check(&[], &lp, &lplan, Direction::Converse, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotPowerType(_)));
    }

    #[test]
    fn haar_stack_grows_linearly() {
        let v = Weight::logpow(1.0).unwrap();
        let plan = ScalePlan::build(&v, None, 6).unwrap();
        let haar = WaveletBasis::with_order(1).unwrap();
        let (rep, fields) = counterexample_series(&v, &plan, &haar, 4, 14).unwrap();
        assert_eq!(rep.nesting.step, 1);
        assert!((rep.nesting.a - 1.0).abs() < 1e-12);
        assert_eq!(fields.len(), 4);
        for t in &rep.terms {
            assert!(t.ratio >= 0.5 * rep.nesting.a * t.d as f64, "{t:?}");
            assert!(t.coeff_ratio <= 1.0 + 1e-8, "{t:?}");
        }
        assert!(rep.slope >= 0.4 * rep.nesting.a);

        let (pv, pplan, basis) = setup();
        assert!(matches!(
            counterexample_series(&pv, &pplan, &basis, 2, 12),
            Err(Error::NotPowerType(_))
        ));
    }

    #[test]
    fn smooth_stack_asks_for_resolution() {
        let v = Weight::logpow(1.0).unwrap();
        let plan = ScalePlan::build(&v, None, 6).unwrap();
        let basis = WaveletBasis::with_order(6).unwrap();
        let err = counterexample_series(&v, &plan, &basis, 4, 12).unwrap_err();
        assert!(err.to_string().contains("increase J"), "{err}");
    }
}
