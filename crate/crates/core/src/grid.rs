//! Uniform periodic grid in the traveling-frame coordinate and its
//! baseband wavenumber layout.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT, normalized by `1/N`.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let inv = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= inv;
    }
}

/// Samples `xi_j = (j - n/2) * xi_step`, so index `n/2` sits at `xi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_points: usize,
    pub xi_span: f64,
    pub xi_step: f64,
    pub k_step: f64,
}

impl Grid {
    pub fn new(n_points: usize, xi_span: f64) -> Result<Self> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::invalid(
                "n_points",
                format!("{n_points} is not a power of two >= 16"),
            ));
        }
        if !(xi_span > 0.0) || !xi_span.is_finite() {
            return Err(Error::invalid("xi_span", "must be positive and finite"));
        }
        Ok(Self {
            n_points,
            xi_span,
            xi_step: xi_span / n_points as f64,
            k_step: 2.0 * PI / xi_span,
        })
    }

    pub fn xi(&self, j: usize) -> f64 {
        (j as f64 - (self.n_points / 2) as f64) * self.xi_step
    }

    pub fn xi_values(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.xi(j)).collect()
    }

    /// Signed baseband wavenumber of DFT bin `j` (standard layout; the
    /// Nyquist bin is taken as negative).
    pub fn k(&self, j: usize) -> f64 {
        let n = self.n_points;
        let signed = if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        };
        signed as f64 * self.k_step
    }

    pub fn k_values(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.k(j)).collect()
    }

    pub fn k_max(&self) -> f64 {
        PI / self.xi_step
    }

    /// Continuous-transform approximation
    /// `psi~(k_j) = sum_n psi_n exp(-i k_j xi_n) dxi`, in DFT bin order.
    pub fn spectrum(&self, values: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n_points);
        let mut buf = values.to_vec();
        fft_forward(&mut buf);
        // xi_0 = -span/2, so exp(-i k_j xi_0) = (-1)^j for the signed bin index.
        for (j, v) in buf.iter_mut().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *v *= sign * self.xi_step;
        }
        buf
    }

    /// Inverse of [`Grid::spectrum`].
    pub fn from_spectrum(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spectrum.to_vec();
        for (j, v) in buf.iter_mut().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            *v *= sign / self.xi_step;
        }
        fft_inverse(&mut buf);
        buf
    }

    /// True when `|xi| > span/4`, the region the aliasing guard watches.
    pub(crate) fn outside_central_half(&self, j: usize) -> bool {
        self.xi(j).abs() > 0.25 * self.xi_span
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Grid::new(1000, 1.0).is_err());
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(1024, 0.0).is_err());
    }

    #[test]
    fn center_index_is_origin() {
        let g = Grid::new(64, 32.0).unwrap();
        assert_eq!(g.xi(32), 0.0);
        assert_eq!(g.xi_step, 0.5);
        assert!((g.k_step - 2.0 * PI / 32.0).abs() < 1e-15);
        assert_eq!(g.k(0), 0.0);
        assert_eq!(g.k(32), -g.k_max());
        assert!(g.k(31) > 0.0 && g.k(33) < 0.0);
    }

    #[test]
    fn spectrum_round_trip() {
        let g = Grid::new(128, 20.0).unwrap();
        let v: Vec<Complex64> = g
            .xi_values()
            .iter()
            .map(|&x| Complex64::new((-x * x).exp(), 0.3 * x * (-x * x).exp()))
            .collect();
        let back = g.from_spectrum(&g.spectrum(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn spectrum_of_gaussian_matches_continuous_transform() {
        // exp(-x^2/2) -> sqrt(2 pi) exp(-k^2/2), real and positive.
        let g = Grid::new(256, 40.0).unwrap();
        let v: Vec<Complex64> = g
            .xi_values()
            .iter()
            .map(|&x| Complex64::new((-0.5 * x * x).exp(), 0.0))
            .collect();
        let s = g.spectrum(&v);
        for (j, sj) in s.iter().enumerate() {
            let k = g.k(j);
            let expect = (2.0 * PI).sqrt() * (-0.5 * k * k).exp();
            assert!((sj - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }
}
