use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a function on the unit torus at the nodes `k / 2^J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    samples: Vec<f64>,
    level: u32,
}

impl GridFunction {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Resolution(format!(
                "grid length {n} is not a power of two"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            level: n.trailing_zeros(),
            samples,
        })
    }

    pub fn zeros(level: u32) -> Self {
        Self {
            samples: vec![0.0; 1 << level],
            level,
        }
    }

    pub fn constant(level: u32, value: f64) -> Self {
        Self {
            samples: vec![value; 1 << level],
            level,
        }
    }

    pub fn from_fn(level: u32, f: impl Fn(f64) -> f64) -> Self {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        Self {
            samples: (0..n).map(|k| f(k as f64 * h)).collect(),
            level,
        }
    }

    /// Resolution exponent `J`.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Trapezoid rule on the periodic grid.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|x| x.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.len() as f64
    }

    pub fn scale(&mut self, c: f64) {
        self.samples.iter_mut().for_each(|x| *x *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        self.samples
            .iter_mut()
            .zip(&other.samples)
            .for_each(|(a, b)| *a += b);
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            level: self.level,
        }
    }

    /// Max-norm distance.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Single CSV column with header `value`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "value"])?;
        let h = 1.0 / self.len() as f64;
        for (k, v) in self.samples.iter().enumerate() {
            wtr.write_record([format!("{}", k as f64 * h), format!("{v}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridFunction::new(vec![0.0; 12]).is_err());
        assert!(GridFunction::new(vec![]).is_err());
        assert!(GridFunction::new(vec![f64::NAN; 4]).is_err());
        assert_eq!(GridFunction::new(vec![0.0; 16]).unwrap().level(), 4);
    }

    #[test]
    fn quadrature_of_trig_polynomial() {
        let f = GridFunction::from_fn(6, |x| (2.0 * std::f64::consts::PI * x).cos().powi(2));
        assert!((f.integral() - 0.5).abs() < 1e-14);
    }
}
