//! Numerical diagnostics of a tabulated basis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::GridFunction;

use super::basis::WaveletBasis;
use super::transform::{atom, upsample};

/// `max_x |∑_k φ(x − k) − 1|` over the tabulation nodes of `[0, 1)`.
pub fn partition_of_unity_residual(basis: &WaveletBasis) -> f64 {
    let step = 1usize << basis.tab_depth();
    let table = basis.phi_table();
    (0..step)
        .map(|i| {
            let s: f64 = table.iter().skip(i).step_by(step).sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest deviation of the φ table from one more application of the
/// two-scale relation.
pub fn two_scale_residual(basis: &WaveletBasis) -> f64 {
    let step = 1isize << basis.tab_depth();
    let table = basis.phi_table();
    let h = basis.scaling_filter();
    (0..table.len())
        .map(|i| {
            let mut acc = 0.0;
            for (k, c) in h.iter().enumerate() {
                let idx = 2 * i as isize - k as isize * step;
                if idx >= 0 && (idx as usize) < table.len() {
                    acc += c * table[idx as usize];
                }
            }
            (std::f64::consts::SQRT_2 * acc - table[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `∫ (x − c)^p ψ(x) dx` for `p < count` about the support midpoint `c`,
/// by quadrature on the table.
pub fn psi_moments(basis: &WaveletBasis, count: usize) -> Vec<f64> {
    let h = 1.0 / (1u64 << basis.tab_depth()) as f64;
    let c = basis.support_length() as f64 / 2.0;
    (0..count)
        .map(|p| {
            basis
                .psi_table()
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 * h - c).powi(p as i32) * v * h)
                .sum()
        })
        .collect()
}

/// Largest deviation from the identity of the Gram matrix of the tabulated
/// periodized atoms `{φ_{j0,k}} ∪ {ψ_{j,k} : j0 ≤ j ≤ j_max}` on a grid of
/// level `grid_level`.
pub fn gram_deviation(basis: &WaveletBasis, j_max: u32, grid_level: u32) -> f64 {
    let j0 = basis.coarse_level();
    let mut atoms: Vec<GridFunction> = (0..1usize << j0)
        .map(|k| basis.tabulated_atom(false, j0, k, grid_level))
        .collect();
    for j in j0..=j_max {
        for k in 0..1usize << j {
            atoms.push(basis.tabulated_atom(true, j, k, grid_level));
        }
    }
    let mut worst: f64 = 0.0;
    for (a, fa) in atoms.iter().enumerate() {
        for fb in &atoms[a..] {
            let target = if std::ptr::eq(fa, fb) { 1.0 } else { 0.0 };
            worst = worst.max((fa.dot(fb) - target).abs());
        }
    }
    worst
}

/// Largest `|discrete − tabulated|` between a discrete basis atom and the
/// tabulated continuum atom, relative to the latter's sup norm.
pub fn atom_consistency(basis: &WaveletBasis, j: u32, k: usize, grid_level: u32) -> f64 {
    let discrete = atom(basis, true, j, k, grid_level);
    let tab = basis.tabulated_atom(true, j, k, grid_level);
    discrete.max_diff(&tab) / tab.sup_norm()
}

/// Empirical Bernstein constant `max ‖f'‖_∞ / (2^j ‖f‖_∞)` over `samples`
/// random elements of `V_j` with coefficients uniform in `[-1, 1]`,
/// derivatives by forward differences on a grid of level `grid_level`.
pub fn bernstein_constant(
    basis: &WaveletBasis,
    j: u32,
    grid_level: u32,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1usize << grid_level;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let coeffs: Vec<f64> = (0..1usize << j).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = upsample(&coeffs, grid_level, basis);
        let s = f.samples();
        let deriv = (0..n)
            .map(|i| (s[(i + 1) % n] - s[i]).abs() * n as f64)
            .fold(0.0, f64::max);
        worst = worst.max(deriv / (2f64.powi(j as i32) * f.sup_norm()));
    }
    worst
}
