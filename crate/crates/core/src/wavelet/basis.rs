use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::weight::ScalePlan;

use super::filters::DAUBECHIES;

pub const MAX_ORDER: usize = 20;
pub const DEFAULT_TAB_DEPTH: u32 = 12;
pub const DEFAULT_COARSE_LEVEL: u32 = 3;
const CASCADE_TOL: f64 = 1e-12;
const CASCADE_MAX_ITER: usize = 60;

/// Per-order Hölder regularity growth used to pick the basis order.
pub const HOLDER_PER_ORDER: f64 = 0.55;

/// Compactly supported orthonormal wavelet basis (Daubechies family) with
/// tabulated father and mother wavelets.
#[derive(Debug, Clone)]
pub struct WaveletBasis {
    order: usize,
    r_eff: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    tab_depth: u32,
    phi_table: Vec<f64>,
    psi_table: Vec<f64>,
    coarse_level: u32,
    cascade_residual: f64,
}

/// Regularity estimate for Daubechies order `order`.
pub fn regularity_estimate(order: usize) -> f64 {
    HOLDER_PER_ORDER * order as f64
}

/// Smallest order whose regularity estimate exceeds `m + 2`
/// (dimension one plus one unit of margin).
pub fn required_order(plan: &ScalePlan) -> Result<usize> {
    // ⌈(m + 2) / 0.55⌉ in exact integer arithmetic
    let need = ((plan.m as usize + 2) * 20).div_ceil(11);
    if need > MAX_ORDER {
        return Err(Error::Wavelet(format!(
            "smoothness exponent m = {} needs order {need}, beyond the tabulated maximum {MAX_ORDER}",
            plan.m
        )));
    }
    Ok(need.max(1))
}

impl WaveletBasis {
    pub fn build(order: usize, tab_depth: u32, coarse_level: u32) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Wavelet(format!(
                "order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(8..=20).contains(&tab_depth) {
            return Err(Error::Wavelet(format!(
                "tabulation depth must be in 8..=20, got {tab_depth}"
            )));
        }
        let lo = DAUBECHIES[order - 1].to_vec();
        let len = lo.len();
        let hi: Vec<f64> = (0..len)
            .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * lo[len - 1 - n])
            .collect();
        let (phi_table, cascade_residual) = cascade(&lo, tab_depth).ok_or_else(|| {
            Error::Numerical(format!("cascade did not converge for order {order}"))
        })?;
        let psi_table = refine(&hi, &phi_table, tab_depth);
        Ok(Self {
            order,
            r_eff: regularity_estimate(order),
            lo,
            hi,
            tab_depth,
            phi_table,
            psi_table,
            coarse_level,
            cascade_residual,
        })
    }

    pub fn with_order(order: usize) -> Result<Self> {
        Self::build(order, DEFAULT_TAB_DEPTH, DEFAULT_COARSE_LEVEL)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn r_eff(&self) -> f64 {
        self.r_eff
    }

    /// Low-pass (scaling) filter; sums to √2.
    pub fn scaling_filter(&self) -> &[f64] {
        &self.lo
    }

    pub fn wavelet_filter(&self) -> &[f64] {
        &self.hi
    }

    pub fn coarse_level(&self) -> u32 {
        self.coarse_level
    }

    /// Length of the common support `[0, 2·order − 1]` of φ and ψ.
    pub fn support_length(&self) -> usize {
        self.lo.len() - 1
    }

    pub fn tab_depth(&self) -> u32 {
        self.tab_depth
    }

    pub fn phi_table(&self) -> &[f64] {
        &self.phi_table
    }

    pub fn psi_table(&self) -> &[f64] {
        &self.psi_table
    }

    /// Final successive change of the cascade iteration.
    pub fn cascade_residual(&self) -> f64 {
        self.cascade_residual
    }

    fn table_eval(&self, table: &[f64], x: f64) -> f64 {
        let scale = (1u64 << self.tab_depth) as f64;
        let pos = x * scale;
        if pos < 0.0 || pos > (table.len() - 1) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let w = pos - i as f64;
        table[i] * (1.0 - w) + table[i + 1] * w
    }

    /// Father wavelet φ on the real line (linear interpolation of the table).
    pub fn phi(&self, x: f64) -> f64 {
        self.table_eval(&self.phi_table, x)
    }

    /// Mother wavelet ψ on the real line.
    pub fn psi(&self, x: f64) -> f64 {
        self.table_eval(&self.psi_table, x)
    }

    /// Periodized `2^{j/2} ψ(2^j x − k)` (or φ) sampled on the grid of
    /// level `grid_level`, evaluated from the tables.
    pub fn tabulated_atom(&self, detail: bool, j: u32, k: usize, grid_level: u32) -> GridFunction {
        let support = self.support_length() as f64;
        let amp = 2f64.powf(j as f64 / 2.0);
        let dil = (1u64 << j) as f64;
        GridFunction::from_fn(grid_level, |x| {
            let y0 = x * dil - k as f64;
            let q_lo = (-y0 / dil).ceil() as i64;
            let q_hi = ((support - y0) / dil).floor() as i64;
            let acc: f64 = (q_lo..=q_hi)
                .map(|q| {
                    let y = y0 + q as f64 * dil;
                    if detail {
                        self.psi(y)
                    } else {
                        self.phi(y)
                    }
                })
                .sum();
            amp * acc
        })
    }

    /// One periodized analysis step: `a_k = ∑ h_n x_{2k+n}`, `d_k = ∑ g_n x_{2k+n}`.
    pub fn analysis_step(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let len = x.len();
        let half = len / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            let (mut sa, mut sd) = (0.0, 0.0);
            for (n, (h, g)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[(2 * k + n) % len];
                sa += h * v;
                sd += g * v;
            }
            a[k] = sa;
            d[k] = sd;
        }
        (a, d)
    }

    /// Low-pass half of [`analysis_step`](Self::analysis_step).
    pub fn lowpass_step(&self, x: &[f64]) -> Vec<f64> {
        let len = x.len();
        (0..len / 2)
            .map(|k| {
                self.lo
                    .iter()
                    .enumerate()
                    .map(|(n, h)| h * x[(2 * k + n) % len])
                    .sum()
            })
            .collect()
    }

    /// Adjoint of [`analysis_step`](Self::analysis_step); `d` may be `None` for zero details.
    pub fn synthesis_step(&self, a: &[f64], d: Option<&[f64]>) -> Vec<f64> {
        let len = 2 * a.len();
        let mut x = vec![0.0; len];
        for k in 0..a.len() {
            let ak = a[k];
            let dk = d.map_or(0.0, |d| d[k]);
            if ak == 0.0 && dk == 0.0 {
                continue;
            }
            for (n, (h, g)) in self.lo.iter().zip(&self.hi).enumerate() {
                x[(2 * k + n) % len] += h * ak + g * dk;
            }
        }
        x
    }
}

/// `√2 ∑_k c_k f(2x − k)` on the dyadic table.
fn refine(coeffs: &[f64], table: &[f64], depth: u32) -> Vec<f64> {
    let step = 1usize << depth;
    let npts = table.len();
    (0..npts)
        .map(|i| {
            let mut acc = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                let idx = 2 * i as isize - (k * step) as isize;
                if idx >= 0 && (idx as usize) < npts {
                    acc += c * table[idx as usize];
                }
            }
            SQRT_2 * acc
        })
        .collect()
}

/// Cascade iteration from the Haar box to the fixed point of the two-scale
/// relation. Returns the table and the last successive change.
fn cascade(lo: &[f64], depth: u32) -> Option<(Vec<f64>, f64)> {
    let step = 1usize << depth;
    let npts = (lo.len() - 1) * step + 1;
    let mut table: Vec<f64> = (0..npts).map(|i| if i < step { 1.0 } else { 0.0 }).collect();
    let mut change = f64::INFINITY;
    for _ in 0..CASCADE_MAX_ITER {
        let next = refine(lo, &table, depth);
        change = next
            .iter()
            .zip(&table)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        table = next;
        if change <= CASCADE_TOL {
            return Some((table, change));
        }
    }
    (change <= 1e-9).then_some((table, change))
}
