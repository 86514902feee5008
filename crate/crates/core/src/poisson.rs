//! Spectral Poisson extension on the torus and the kernels built from it.
//!
//! All transforms use integer frequencies `k ∈ (−N/2, N/2]`; a grid function
//! is identified with the trigonometric polynomial interpolating its samples.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::wavelet::{project, WaveletBasis};
use crate::weight::{ScalePlan, Weight};

/// `|k|` of DFT bin `i` on `n` points.
#[inline]
pub fn abs_freq(i: usize, n: usize) -> usize {
    i.min(n - i)
}

/// Unnormalized forward DFT.
pub fn dft(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Unnormalized inverse DFT, real part, times `scale`.
pub fn idft_real(mut spectrum: Vec<Complex64>, scale: f64) -> Vec<f64> {
    FftPlanner::new().plan_fft_inverse(spectrum.len()).process(&mut spectrum);
    spectrum.into_iter().map(|z| z.re * scale).collect()
}

fn from_samples(samples: Vec<f64>) -> GridFunction {
    GridFunction::new(samples).expect("transforms preserve length and finiteness")
}

/// Applies a radial multiplier `m(|k|)` given as a table over `0..=N/2`.
pub fn apply_symbol(f: &GridFunction, symbol: &[f64]) -> GridFunction {
    let n = f.len();
    assert!(symbol.len() > n / 2, "symbol table shorter than N/2 + 1");
    let mut spec = dft(f.samples());
    for (i, z) in spec.iter_mut().enumerate() {
        *z *= symbol[abs_freq(i, n)];
    }
    from_samples(idft_real(spec, 1.0 / n as f64))
}

/// Torus convolution `∫ a(y) b(x − y) dy`.
pub fn convolve(a: &GridFunction, b: &GridFunction) -> GridFunction {
    assert_eq!(a.len(), b.len(), "convolution needs equal grids");
    let n = a.len() as f64;
    let fb = dft(b.samples());
    let mut fa = dft(a.samples());
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    from_samples(idft_real(fa, 1.0 / (n * n)))
}

fn poisson_symbol(t: f64, n: usize) -> Vec<f64> {
    (0..=n / 2).map(|k| (-2.0 * PI * t * k as f64).exp()).collect()
}

/// `u(·, t)`: the multiplier `e^{−2πt|k|}` applied to `f`.
pub fn poisson_extend(f: &GridFunction, t: f64) -> Result<GridFunction> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Argument(format!("extension height must be positive, got {t}")));
    }
    Ok(apply_symbol(f, &poisson_symbol(t, f.len())))
}

/// Periodic Poisson kernel `P_s` sampled on the grid.
pub fn poisson_kernel(s: f64, level: u32) -> Result<GridFunction> {
    let n = 1usize << level;
    let mut delta = vec![0.0; n];
    delta[0] = n as f64;
    poisson_extend(&from_samples(delta), s)
}

/// Boundary data together with its harmonic extension `u(·, t)`.
///
/// Levels on the half-dyadic grid `t_j = 2^{-j/2}`, `j = 0..=2J`, are
/// computed on first use and never rewritten.
#[derive(Debug)]
pub struct HarmonicField {
    boundary: GridFunction,
    spectrum: Vec<Complex64>,
    t_grid: Vec<f64>,
    levels: Vec<OnceLock<GridFunction>>,
}

impl HarmonicField {
    pub fn new(boundary: GridFunction) -> Self {
        let spectrum = dft(boundary.samples());
        let t_grid: Vec<f64> = (0..=2 * boundary.level())
            .map(|j| 2f64.powf(-(j as f64) / 2.0))
            .collect();
        let levels = t_grid.iter().map(|_| OnceLock::new()).collect();
        Self {
            boundary,
            spectrum,
            t_grid,
            levels,
        }
    }

    pub fn boundary(&self) -> &GridFunction {
        &self.boundary
    }

    pub fn level(&self) -> u32 {
        self.boundary.level()
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    /// Unnormalized DFT of the boundary data.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// `u(·, t_grid[i])`, cached.
    pub fn grid_level(&self, i: usize) -> &GridFunction {
        self.levels[i].get_or_init(|| self.with_symbol(|k| (-2.0 * PI * self.t_grid[i] * k as f64).exp()))
    }

    /// Fills every cached level in parallel.
    pub fn evaluate_all(&self) {
        (0..self.t_grid.len()).into_par_iter().for_each(|i| {
            self.grid_level(i);
        });
    }

    /// `u(·, t)` for arbitrary `t > 0`.
    pub fn at(&self, t: f64) -> Result<GridFunction> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Argument(format!("extension height must be positive, got {t}")));
        }
        Ok(self.with_symbol(|k| (-2.0 * PI * t * k as f64).exp()))
    }

    /// Boundary data filtered by a radial multiplier `m(|k|)`.
    pub fn with_symbol(&self, symbol: impl Fn(usize) -> f64) -> GridFunction {
        let n = self.len();
        let spec: Vec<Complex64> = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(i, z)| z * symbol(abs_freq(i, n)))
            .collect();
        from_samples(idft_real(spec, 1.0 / n as f64))
    }
}

/// `C^∞` cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn smoothstep(x: f64) -> f64 {
    fn bump(x: f64) -> f64 {
        if x > 0.0 {
            (-1.0 / x).exp()
        } else {
            0.0
        }
    }
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - x);
        a / (a + bump(x - 1.0))
    }
}

/// `Σ̂_δ(k) = η(δ|k|)·2cosh(2πδ|k|) − e^{−2πδ|k|}`.
pub fn sigma_symbol(delta: f64, k: usize) -> f64 {
    let x = delta * k as f64;
    let eta = smoothstep(x);
    let damp = (-2.0 * PI * x).exp();
    if eta == 0.0 {
        -damp
    } else {
        eta * 2.0 * (2.0 * PI * x).cosh() - damp
    }
}

/// Grid realization of the kernel that inverts `P_δ` on frequencies
/// `|k| ≤ 1/δ`.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaKernel {
    pub delta: f64,
    /// `Σ̂_δ(k)` for `k = 0..=N/2`.
    pub symbol: Vec<f64>,
    #[serde(skip)]
    pub grid: GridFunction,
    pub l1_norm: f64,
}

pub fn sigma_kernel(delta: f64, level: u32) -> Result<SigmaKernel> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Argument(format!("δ must lie in (0, 1], got {delta}")));
    }
    let n = 1usize << level;
    let symbol: Vec<f64> = (0..=n / 2).map(|k| sigma_symbol(delta, k)).collect();
    let mut delta_fn = vec![0.0; n];
    delta_fn[0] = n as f64;
    let grid = apply_symbol(&from_samples(delta_fn), &symbol);
    let l1_norm = grid.l1_norm();
    Ok(SigmaKernel {
        delta,
        symbol,
        grid,
        l1_norm,
    })
}

/// Random real trigonometric polynomial with frequencies `|k| ≤ band`.
pub fn bandlimited_random(level: u32, band: usize, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1usize << level;
    let band = band.min(n / 2 - 1);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    spec[0] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0) * n as f64;
    for k in 1..=band {
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * n as f64;
        spec[k] = z;
        spec[n - k] = z.conj();
    }
    from_samples(idft_real(spec, 1.0 / n as f64))
}

/// Largest `|k|` carrying non-negligible spectral mass.
fn check_bandlimit(sigma: &GridFunction, delta: f64) -> Result<()> {
    let n = sigma.len();
    let spec = dft(sigma.samples());
    let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let band = 1.0 / delta;
    for (i, z) in spec.iter().enumerate() {
        let k = abs_freq(i, n);
        if k as f64 > band * (1.0 + 1e-12) && z.norm() > 1e-12 * peak.max(f64::MIN_POSITIVE) {
            return Err(Error::Argument(format!(
                "σ is not bandlimited to |k| ≤ 1/δ = {band}: frequency {k} has relative mass {:.3e}",
                z.norm() / peak
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingSweep {
    pub t: Vec<f64>,
    pub pairings: Vec<f64>,
    pub delta: f64,
    pub v_delta: f64,
    pub sigma_l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub sweep: PairingSweep,
}

/// `∫ u(x,t) σ(x) dx` over the t-grid against `v(δ)‖σ‖₁`.
pub fn pairing_bound_check(
    field: &HarmonicField,
    sigma: &GridFunction,
    delta: f64,
    v: &Weight,
) -> Result<PairingReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Argument(format!("δ must lie in (0, 1], got {delta}")));
    }
    if sigma.len() != field.len() {
        return Err(Error::Resolution("σ and the field live on different grids".into()));
    }
    check_bandlimit(sigma, delta)?;
    let sigma_l1 = sigma.l1_norm();
    let v_delta = v.eval(delta);
    let t = field.t_grid().to_vec();
    let pairings: Vec<f64> = (0..t.len())
        .into_par_iter()
        .map(|i| field.grid_level(i).dot(sigma))
        .collect();
    let denom = v_delta * sigma_l1;
    let ratios: Vec<f64> = pairings
        .iter()
        .map(|p| if denom > 0.0 { p.abs() / denom } else { 0.0 })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(PairingReport {
        ratios,
        max_ratio,
        sweep: PairingSweep {
            t,
            pairings,
            delta,
            v_delta,
            sigma_l1,
        },
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Centered cardinal B-spline: the `r`-fold convolution of the indicator
/// of `[−1/2, 1/2]`, in closed form.
pub fn bspline(r: u32, x: f64) -> f64 {
    assert!(r >= 1, "B-spline order must be at least 1");
    let half = r as f64 / 2.0;
    if x.abs() >= half {
        return if r == 1 && x.abs() == half { 0.5 } else { 0.0 };
    }
    if r == 1 {
        return 1.0;
    }
    let fact: f64 = (1..r).map(f64::from).product();
    let mut acc = 0.0;
    for i in 0..=r {
        let y = x + half - i as f64;
        if y > 0.0 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binomial(r, i) * y.powi(r as i32 - 1);
        }
    }
    acc / fact
}

/// Fourier transform of the centered box, `sin(πξ)/(πξ)`.
fn sinc(xi: f64) -> f64 {
    if xi == 0.0 {
        1.0
    } else {
        (PI * xi).sin() / (PI * xi)
    }
}

/// `y ↦ ∫ u(x,t) g((y − x)/a) dx` on the grid, `g` the `r`-fold box spline
/// periodized.
pub fn dilated_pairing(field: &HarmonicField, t: f64, r_fold: u32, a: f64) -> GridFunction {
    field.with_symbol(|k| {
        let k = k as f64;
        a * (-2.0 * PI * t * k).exp() * sinc(a * k).powi(r_fold as i32)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DilatedSweep {
    pub a: Vec<f64>,
    pub r_fold: u32,
    /// Height attaining the maximum for each `a`.
    pub t_at_max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DilatedReport {
    /// `max_{y,t} |pairing| / (a·v(a))` for each `a`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub sweep: DilatedSweep,
}

/// Sweep of [`dilated_pairing`] over `a`, all grid points `y` and the t-grid.
pub fn dilated_test_pairing(
    field: &HarmonicField,
    r_fold: u32,
    scales: &[f64],
    v: &Weight,
    plan: &ScalePlan,
) -> Result<DilatedReport> {
    if r_fold < plan.m + 2 {
        return Err(Error::Argument(format!(
            "box-spline order {r_fold} must be at least m + 2 = {}",
            plan.m + 2
        )));
    }
    if let Some(a) = scales.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::Argument(format!("dilation a must lie in (0, 1], got {a}")));
    }
    let per_a: Vec<(f64, f64)> = scales
        .par_iter()
        .map(|&a| {
            let norm = a * v.eval(a);
            field
                .t_grid()
                .iter()
                .map(|&t| (dilated_pairing(field, t, r_fold, a).sup_norm() / norm, t))
                .fold((0.0, 0.0), |best, cur| if cur.0 > best.0 { cur } else { best })
        })
        .collect();
    let ratios: Vec<f64> = per_a.iter().map(|p| p.0).collect();
    Ok(DilatedReport {
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        sweep: DilatedSweep {
            a: scales.to_vec(),
            r_fold,
            t_at_max: per_a.iter().map(|p| p.1).collect(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonDefect {
    pub s: f64,
    pub defect_pe: f64,
    pub defect_dp: f64,
}

/// Points per coarse cell at which the translation-dependent defects are
/// maximized; the projections commute with shifts by `2^{-j0}`.
const DEFECT_PROBES: usize = 16;

/// Defects of the projection `E` onto `V_{j0}` against `P_s`:
/// `max_w ‖P_s(w − ·) − E P_s(w − ·)‖₁` and
/// `max_x ∫ |((E_J − E) P_s(· − w))(x)| dw` with `J = j_level`.
pub fn mra_poisson_defect(
    basis: &WaveletBasis,
    s: f64,
    j_level: u32,
    grid_level: u32,
) -> Result<PoissonDefect> {
    let j0 = basis.coarse_level();
    let spacing = 1.0 / (1u64 << grid_level) as f64;
    if !(s >= spacing) {
        return Err(Error::Resolution(format!(
            "scale {s} is below the grid spacing {spacing}"
        )));
    }
    if j_level <= j0 || j_level > grid_level {
        return Err(Error::Argument(format!(
            "projection level {j_level} must lie in ({j0}, {grid_level}]"
        )));
    }
    let n = 1usize << grid_level;
    let cell = n >> j0;
    let stride = (cell / DEFECT_PROBES).max(1);
    let probes: Vec<usize> = (0..cell).step_by(stride).collect();
    let kernel = poisson_kernel(s, grid_level)?;

    let shifted = |w: usize| {
        let src = kernel.samples();
        from_samples((0..n).map(|i| src[(w + n - i) % n]).collect())
    };
    let defect_pe = probes
        .par_iter()
        .map(|&w| {
            let f = shifted(w);
            f.sub(&project(&f, j0, basis)).l1_norm()
        })
        .reduce(|| 0.0, f64::max);

    let defect_dp = probes
        .par_iter()
        .map(|&x| {
            let mut delta = vec![0.0; n];
            delta[x] = n as f64;
            let delta = from_samples(delta);
            let k = project(&delta, j_level, basis).sub(&project(&delta, j0, basis));
            convolve(&k, &kernel).l1_norm()
        })
        .reduce(|| 0.0, f64::max);

    Ok(PoissonDefect {
        s,
        defect_pe,
        defect_dp,
    })
}

pub fn write_defect_csv<W: std::io::Write>(rows: &[PoissonDefect], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s", "defect_PE", "defect_DP"])?;
    for r in rows {
        out.write_record([r.s.to_string(), r.defect_pe.to_string(), r.defect_dp.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(level: u32) -> GridFunction {
        GridFunction::from_fn(level, |x| (2.0 * PI * x).cos())
    }

    #[test]
    fn constants_are_harmonic() {
        let f = GridFunction::constant(8, 1.0);
        let u = poisson_extend(&f, 0.3).unwrap();
        assert!(u.max_diff(&f) < 1e-14);
    }

    #[test]
    fn cosine_decays_at_unit_rate() {
        let f = cosine(8);
        for t in [0.01, 0.1, 0.5] {
            let u = poisson_extend(&f, t).unwrap();
            assert!(u.max_diff(&f.scaled((-2.0 * PI * t).exp())) < 1e-13);
        }
    }

    #[test]
    fn extension_composes() {
        let f = bandlimited_random(9, 200, 4);
        let twice = poisson_extend(&poisson_extend(&f, 0.25).unwrap(), 0.25).unwrap();
        let once = poisson_extend(&f, 0.5).unwrap();
        assert!(twice.max_diff(&once) <= 1e-12 * f.sup_norm());
        assert!(poisson_extend(&f, 0.0).is_err());
    }

    #[test]
    fn kernel_convolution_matches_multiplier() {
        let f = bandlimited_random(8, 60, 1);
        let p = poisson_kernel(0.05, 8).unwrap();
        assert!((p.integral() - 1.0).abs() < 1e-12);
        let direct = convolve(&f, &p);
        assert!(direct.max_diff(&poisson_extend(&f, 0.05).unwrap()) < 1e-12);
    }

    #[test]
    fn field_caches_levels() {
        let field = HarmonicField::new(cosine(6));
        assert_eq!(field.t_grid().len(), 13);
        assert_eq!(field.t_grid()[2], 0.5);
        let a = field.grid_level(2).clone();
        assert!(a.max_diff(&field.at(0.5).unwrap()) < 1e-15);
        assert!(std::ptr::eq(field.grid_level(2), field.grid_level(2)));
    }

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(0.5), 1.0);
        assert_eq!(smoothstep(2.5), 0.0);
        assert!((smoothstep(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let y = smoothstep(1.0 + i as f64 / 100.0);
            assert!(y <= prev);
            prev = y;
        }
    }

    #[test]
    fn sigma_symbol_inverts_poisson_on_the_band() {
        assert_eq!(sigma_symbol(0.5, 0), 1.0);
        assert!((sigma_symbol(1.0, 1) - (2.0 * PI).exp()).abs() < 1e-10);
        for k in 0..=64 {
            let s = sigma_symbol(1.0 / 64.0, k);
            let exact = (2.0 * PI * k as f64 / 64.0).exp();
            assert!((s - exact).abs() <= 1e-10 * exact, "k {k}");
        }
    }

    #[test]
    fn sigma_reconstructs_bandlimited_data() {
        let level = 10;
        for j in [0, 3, 6] {
            let delta = 2f64.powi(-j);
            let sigma = bandlimited_random(level, 1 << j, 17 + j as u64);
            let ker = sigma_kernel(delta, level).unwrap();
            let p = poisson_kernel(delta, level).unwrap();
            let back = convolve(&convolve(&sigma, &p), &ker.grid);
            assert!(sigma.sub(&back).l1_norm() <= 1e-8 * sigma.l1_norm(), "j {j}");
        }
        assert!(sigma_kernel(0.0, 8).is_err());
        assert!(sigma_kernel(1.5, 8).is_err());
    }

    #[test]
    fn pairing_examples() {
        let v = Weight::power(1.0).unwrap();
        let one = HarmonicField::new(GridFunction::constant(8, 1.0));
        let sigma = GridFunction::constant(8, 2.0);
        let rep = pairing_bound_check(&one, &sigma, 1.0, &v).unwrap();
        assert!(rep.sweep.pairings.iter().all(|p| (p - 2.0).abs() < 1e-13));

        let field = HarmonicField::new(cosine(8));
        let sigma = cosine(8).scaled(2.0);
        let rep = pairing_bound_check(&field, &sigma, 1.0, &v).unwrap();
        for (t, p) in rep.sweep.t.iter().zip(&rep.sweep.pairings) {
            assert!((p - (-2.0 * PI * t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn pairing_rejects_wide_band() {
        let v = Weight::power(1.0).unwrap();
        let field = HarmonicField::new(cosine(8));
        let sigma = GridFunction::from_fn(8, |x| (2.0 * PI * 5.0 * x).cos());
        let err = pairing_bound_check(&field, &sigma, 0.5, &v).unwrap_err();
        assert!(err.to_string().contains("frequency 5"), "{err}");
    }

    #[test]
    fn bspline_closed_forms() {
        assert_eq!(bspline(1, 0.2), 1.0);
        assert_eq!(bspline(1, 0.7), 0.0);
        assert!((bspline(2, 0.0) - 1.0).abs() < 1e-15);
        assert!((bspline(2, 0.25) - 0.75).abs() < 1e-15);
        assert_eq!(bspline(2, 1.0), 0.0);
        assert!((bspline(3, 0.0) - 0.75).abs() < 1e-15);
        // unit mass
        for r in 1..=8 {
            let h = 1e-3;
            let half = r as f64 / 2.0;
            let steps = (2.0 * half / h) as usize;
            let mass: f64 = (0..steps).map(|i| bspline(r, -half + (i as f64 + 0.5) * h) * h).sum();
            assert!((mass - 1.0).abs() < 1e-5, "r {r}: {mass}");
        }
    }

    #[test]
    fn dilated_pairing_matches_direct_quadrature() {
        let level = 9;
        let f = bandlimited_random(level, 40, 3);
        let field = HarmonicField::new(f);
        let (t, a, r) = (0.02, 0.125, 4);
        let spectral = dilated_pairing(&field, t, r, a);
        let u = field.at(t).unwrap();
        let n = u.len();
        for yi in [0usize, 77, 300] {
            let y = yi as f64 / n as f64;
            let direct: f64 = u
                .samples()
                .iter()
                .enumerate()
                .map(|(i, ux)| {
                    let x = i as f64 / n as f64;
                    let d = (y - x).rem_euclid(1.0);
                    let g: f64 = [-1.0, 0.0, 1.0].iter().map(|q| bspline(r, (d + q) / a)).sum();
                    ux * g
                })
                .sum::<f64>()
                / n as f64;
            assert!((direct - spectral.samples()[yi]).abs() < 1e-6, "y {y}");
        }
    }

    #[test]
    fn dilated_pairing_of_constant() {
        let v = Weight::power(1.0).unwrap();
        let plan = ScalePlan::build(&v, Some(2.0), 6).unwrap();
        let field = HarmonicField::new(GridFunction::constant(8, 1.0));
        for a in [1.0, 0.25, 1.0 / 64.0] {
            let p = dilated_pairing(&field, 0.1, 4, a);
            assert!(p.samples().iter().all(|x| (x - a).abs() < 1e-13));
        }
        assert!(dilated_test_pairing(&field, 3, &[0.5], &v, &plan).is_err());
        let rep = dilated_test_pairing(&field, 4, &[1.0, 0.5], &v, &plan).unwrap();
        assert!((rep.ratios[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projections_reproduce_constants() {
        let basis = WaveletBasis::with_order(4).unwrap();
        let one = GridFunction::constant(10, 1.0);
        assert!(one.sub(&project(&one, basis.coarse_level(), &basis)).l1_norm() < 1e-8);
    }

    #[test]
    fn defect_inputs_checked() {
        let basis = WaveletBasis::with_order(2).unwrap();
        assert!(mra_poisson_defect(&basis, 1e-5, 6, 10).is_err());
        assert!(mra_poisson_defect(&basis, 0.1, 3, 10).is_err());
        let d = mra_poisson_defect(&basis, 1.0, 8, 10).unwrap();
        assert!(d.defect_pe < 1e-3 && d.defect_dp < 1e-3, "{d:?}");
    }
}
