use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;

use super::basis::WaveletBasis;

/// Wavelet coefficients of a grid function: scaling coefficients at the
/// coarse level and details for every generation `j0 ≤ j < J`.
///
/// Coefficients are normalized to approximate the continuum inner products
/// `∫ f φ_{j0,k}` and `∫ f ψ_{j,k}` with `L²`-normalized atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTree {
    pub j0: u32,
    #[serde(rename = "J")]
    pub level: u32,
    pub scaling: Vec<f64>,
    /// `details[j - j0][k]`.
    pub details: Vec<Vec<f64>>,
}

impl CoeffTree {
    pub fn zeros(j0: u32, level: u32) -> Self {
        Self {
            j0,
            level,
            scaling: vec![0.0; 1 << j0],
            details: (j0..level).map(|j| vec![0.0; 1 << j]).collect(),
        }
    }

    pub fn detail(&self, j: u32) -> &[f64] {
        &self.details[(j - self.j0) as usize]
    }

    pub fn detail_mut(&mut self, j: u32) -> &mut [f64] {
        &mut self.details[(j - self.j0) as usize]
    }

    /// `∑ b² + ∑∑ c²`.
    pub fn energy(&self) -> f64 {
        self.scaling.iter().map(|x| x * x).sum::<f64>()
            + self
                .details
                .iter()
                .flat_map(|row| row.iter())
                .map(|x| x * x)
                .sum::<f64>()
    }

    /// Copy keeping only the scaling part (if `keep_scaling`) and detail
    /// generations with `lo < j ≤ hi`.
    pub fn band(&self, keep_scaling: bool, lo: Option<u32>, hi: u32) -> Self {
        let mut out = self.clone();
        if !keep_scaling {
            out.scaling.iter_mut().for_each(|x| *x = 0.0);
        }
        for j in self.j0..self.level {
            let keep = lo.is_none_or(|lo| j > lo) && j <= hi;
            if !keep {
                out.detail_mut(j).iter_mut().for_each(|x| *x = 0.0);
            }
        }
        out
    }

    /// Largest detail magnitude, and its `(j, k)`.
    pub fn max_detail(&self) -> (f64, u32, usize) {
        let mut best = (0.0, self.j0, 0);
        for (i, row) in self.details.iter().enumerate() {
            for (k, c) in row.iter().enumerate() {
                if c.abs() > best.0 {
                    best = (c.abs(), self.j0 + i as u32, k);
                }
            }
        }
        best
    }

    pub fn is_consistent(&self) -> bool {
        self.scaling.len() == 1 << self.j0
            && self.details.len() == (self.level - self.j0) as usize
            && self
                .details
                .iter()
                .enumerate()
                .all(|(i, row)| row.len() == 1 << (self.j0 + i as u32))
    }
}

fn check_levels(basis: &WaveletBasis, level: u32) -> Result<()> {
    if level <= basis.coarse_level() {
        return Err(Error::Resolution(format!(
            "grid level {level} must exceed the coarse level {}",
            basis.coarse_level()
        )));
    }
    Ok(())
}

/// Periodized orthonormal fast wavelet transform; samples are scaled by
/// `1/√N` so the coefficients approximate continuum integrals.
pub fn analyze(f: &GridFunction, basis: &WaveletBasis) -> Result<CoeffTree> {
    let level = f.level();
    check_levels(basis, level)?;
    let j0 = basis.coarse_level();
    let norm = 1.0 / (f.len() as f64).sqrt();
    let mut x: Vec<f64> = f.samples().iter().map(|v| v * norm).collect();
    let mut details = vec![Vec::new(); (level - j0) as usize];
    for j in (j0..level).rev() {
        let (a, d) = basis.analysis_step(&x);
        details[(j - j0) as usize] = d;
        x = a;
    }
    Ok(CoeffTree {
        j0,
        level,
        scaling: x,
        details,
    })
}

/// Inverse of [`analyze`].
pub fn synthesize(tree: &CoeffTree, basis: &WaveletBasis) -> GridFunction {
    let mut x = tree.scaling.clone();
    for j in tree.j0..tree.level {
        let d = tree.detail(j);
        let nonzero = d.iter().any(|&c| c != 0.0);
        x = basis.synthesis_step(&x, nonzero.then_some(d));
    }
    let scale = ((1usize << tree.level) as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    GridFunction::new(x).expect("synthesis preserves power-of-two length")
}

/// `s_N(f)`: scaling part plus all detail generations `j ≤ n_level`.
pub fn partial_sum(tree: &CoeffTree, n_level: u32, basis: &WaveletBasis) -> Result<GridFunction> {
    if n_level < tree.j0 || n_level >= tree.level {
        return Err(Error::Argument(format!(
            "partial-sum level {n_level} outside [{}, {})",
            tree.j0, tree.level
        )));
    }
    Ok(synthesize(&tree.band(true, None, n_level), basis))
}

/// Projection onto `V_{j0}`: the scaling part alone.
pub fn scaling_part(tree: &CoeffTree, basis: &WaveletBasis) -> GridFunction {
    let mut t = tree.clone();
    for row in &mut t.details {
        row.iter_mut().for_each(|x| *x = 0.0);
    }
    synthesize(&t, basis)
}

/// `L²`-normalized scaling coefficients `⟨f, φ_{j,k}⟩` at every level
/// `0 ≤ j ≤ J`, indexed by `j`.
pub fn approximation_pyramid(f: &GridFunction, basis: &WaveletBasis) -> Vec<Vec<f64>> {
    let level = f.level();
    let norm = 1.0 / (f.len() as f64).sqrt();
    let mut levels = vec![Vec::new(); level as usize + 1];
    let mut x: Vec<f64> = f.samples().iter().map(|v| v * norm).collect();
    for j in (0..=level).rev() {
        let next = if j > 0 { basis.lowpass_step(&x) } else { Vec::new() };
        levels[j as usize] = std::mem::replace(&mut x, next);
    }
    levels
}

/// Grid realization of `∑_k b_k φ_{j,k}` for `L²`-normalized coefficients
/// `b` at level `j`.
pub fn upsample(coeffs: &[f64], grid_level: u32, basis: &WaveletBasis) -> GridFunction {
    let mut x = coeffs.to_vec();
    while x.len() < 1 << grid_level {
        x = basis.synthesis_step(&x, None);
    }
    let scale = ((1usize << grid_level) as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    GridFunction::new(x).expect("upsampling preserves power-of-two length")
}

/// Orthogonal projection `E_j` onto `V_j`, `0 ≤ j ≤ J`.
pub fn project(f: &GridFunction, j: u32, basis: &WaveletBasis) -> GridFunction {
    let pyramid = approximation_pyramid(f, basis);
    upsample(&pyramid[j as usize], f.level(), basis)
}

/// `E_j f` for every `0 ≤ j ≤ J`, indexed by `j`; the last entry is `f`
/// itself. `E_{N+1} f` is the partial sum `s_N(f)`.
pub fn projection_ladder(f: &GridFunction, basis: &WaveletBasis) -> Vec<GridFunction> {
    let level = f.level();
    let pyramid = approximation_pyramid(f, basis);
    let mut out: Vec<GridFunction> = (0..level)
        .map(|j| upsample(&pyramid[j as usize], level, basis))
        .collect();
    out.push(f.clone());
    out
}

/// Grid realization of a single atom `φ_{j,k}` (`detail = false`) or
/// `ψ_{j,k}` at resolution `grid_level`: the discrete basis element.
pub fn atom(basis: &WaveletBasis, detail: bool, j: u32, k: usize, grid_level: u32) -> GridFunction {
    assert!(j < grid_level, "atom level {j} must lie below the grid level {grid_level}");
    let mut unit = vec![0.0; 1 << j];
    unit[k] = 1.0;
    let zeros = vec![0.0; 1 << j];
    let mut x = if detail {
        basis.synthesis_step(&zeros, Some(&unit))
    } else {
        basis.synthesis_step(&unit, None)
    };
    while x.len() < 1 << grid_level {
        x = basis.synthesis_step(&x, None);
    }
    let scale = ((1usize << grid_level) as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    GridFunction::new(x).expect("atoms have power-of-two length")
}
