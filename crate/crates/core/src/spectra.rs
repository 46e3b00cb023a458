//! Discrete Fourier transforms, periodograms and kernel-smoothed spectral
//! estimates of a coefficient series, in harmonic coordinates.
//!
//! Transforms are normalized by `1/√(2πT)`, so the periodogram of white
//! noise with unit variance has expectation `1/(2π)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{LrdError, Result};
use crate::simulate::CoefficientSeries;

/// Fourier transform of the curve process at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FdftVector {
    pub omega: f64,
    pub coefficients: Vec<Complex64>,
}

impl FdftVector {
    pub fn norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// A `k × k` operator in harmonic coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorKernel {
    pub omega: Option<f64>,
    pub entries: DMatrix<Complex64>,
}

impl OperatorKernel {
    pub fn zeros(k: usize, omega: Option<f64>) -> Self {
        Self {
            omega,
            entries: DMatrix::zeros(k, k),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Largest entry of `K - K*` in modulus.
    pub fn hermitian_defect(&self) -> f64 {
        let d = &self.entries - self.entries.adjoint();
        d.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// `⟨K u, v⟩` for real `u`, `v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &vi) in v.iter().enumerate() {
            for (j, &uj) in u.iter().enumerate() {
                acc += self.entries[(i, j)] * (vi * uj);
            }
        }
        acc
    }
}

/// Smoothing kernel `W` on `[-1, 1]` with bandwidth `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightKernel {
    bandwidth: f64,
}

impl WeightKernel {
    /// Epanechnikov `W(x) = 3/4 (1 - x²)`.
    pub fn epanechnikov(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth <= 2.0 * PI) {
            return Err(LrdError::InvalidArgument(format!(
                "bandwidth must lie in (0, 2π], got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    /// Epanechnikov kernel with bandwidth `T^{-β}`.
    pub fn for_length(len: usize, beta: f64) -> Result<Self> {
        Self::epanechnikov(bandwidth(len, beta))
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn base(&self, x: f64) -> f64 {
        if x.abs() < 1.0 {
            0.75 * (1.0 - x * x)
        } else {
            0.0
        }
    }

    /// `∫ W²`.
    pub fn norm_sq(&self) -> f64 {
        0.6
    }

    /// Same base function with another bandwidth.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Self::epanechnikov(bandwidth)
    }
}

/// `T^{-β}`.
pub fn bandwidth(len: usize, beta: f64) -> f64 {
    (len as f64).powf(-beta)
}

/// `Σ_j (1/B) W((x + 2πj)/B)`.
pub fn periodized_weight(wk: &WeightKernel, x: f64) -> f64 {
    let b = wk.bandwidth;
    let r = wrap(x);
    // |r| ≤ π and B ≤ 2π: only the images r and r ∓ 2π can reach the support.
    let mut total = wk.base(r / b);
    let other = if r >= 0.0 { r - 2.0 * PI } else { r + 2.0 * PI };
    total += wk.base(other / b);
    total / b
}

/// Maps `x` to `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let mut r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// `(1/T) [sin(Tω/2) / sin(ω/2)]²`.
pub fn fejer(len: usize, omega: f64) -> f64 {
    let t = len as f64;
    let s = (0.5 * omega).sin();
    if s.abs() < 1e-8 {
        // Second-order expansion near the removable singularity.
        let r = wrap(omega);
        return t * (1.0 - (t * t - 1.0) * r * r / 12.0);
    }
    let num = (0.5 * t * omega).sin();
    num * num / (s * s) / t
}

/// `s`-th Fourier frequency, with `s` in `-⌊T/2⌋..⌈T/2⌉`.
pub fn fourier_frequency(len: usize, s: i64) -> f64 {
    2.0 * PI * s as f64 / len as f64
}

/// Signed indices `-⌊T/2⌋, …, ⌈T/2⌉ - 1`.
pub fn signed_grid(len: usize) -> impl Iterator<Item = i64> {
    let lo = -((len / 2) as i64);
    let hi = len.div_ceil(2) as i64;
    lo..hi
}

/// Direct evaluation at an arbitrary frequency.
pub fn fdft(series: &CoefficientSeries, omega: f64) -> FdftVector {
    let len = series.len();
    let norm = 1.0 / (2.0 * PI * len as f64).sqrt();
    let phases: Vec<Complex64> = (0..len)
        .map(|t| Complex64::from_polar(norm, -omega * t as f64))
        .collect();
    let coefficients = (0..series.dim())
        .map(|c| {
            series
                .channel(c)
                .iter()
                .zip(&phases)
                .map(|(&x, &e)| e * x)
                .sum()
        })
        .collect();
    FdftVector { omega, coefficients }
}

fn outer(d: &[Complex64], omega: Option<f64>) -> OperatorKernel {
    let k = d.len();
    OperatorKernel {
        omega,
        entries: DMatrix::from_fn(k, k, |i, j| d[i] * d[j].conj()),
    }
}

/// Rank-one periodogram `X̃_ω ⊗ conj(X̃_ω)`.
pub fn periodogram(series: &CoefficientSeries, omega: f64) -> OperatorKernel {
    outer(&fdft(series, omega).coefficients, Some(omega))
}

/// `(2π/T) Σ_s W^{(T)}(ω - ω_s) P(ω_s)` over the Fourier grid.
pub fn weighted_periodogram(
    series: &CoefficientSeries,
    omega: f64,
    wk: &WeightKernel,
) -> OperatorKernel {
    FourierCache::new(series).weighted_periodogram(omega, wk)
}

/// Transforms of every channel at every Fourier frequency, computed once.
#[derive(Clone, Debug)]
pub struct FourierCache {
    len: usize,
    /// `len × k`, row `s` for frequency `2πs/T` with `s` in `0..T`.
    dft: DMatrix<Complex64>,
}

impl FourierCache {
    pub fn new(series: &CoefficientSeries) -> Self {
        let len = series.len();
        let k = series.dim();
        let mut dft = DMatrix::zeros(len, k);
        if len > 0 {
            let fft = FftPlanner::new().plan_fft_forward(len);
            let norm = 1.0 / (2.0 * PI * len as f64).sqrt();
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for c in 0..k {
                for (b, &x) in buf.iter_mut().zip(series.channel(c)) {
                    *b = Complex64::new(x, 0.0);
                }
                fft.process(&mut buf);
                for (s, b) in buf.iter().enumerate() {
                    dft[(s, c)] = b * norm;
                }
            }
        }
        Self { len, dft }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dft.ncols()
    }

    fn row(&self, s: i64) -> usize {
        s.rem_euclid(self.len as i64) as usize
    }

    /// Transform at `2πs/T`.
    pub fn fdft(&self, s: i64) -> FdftVector {
        let r = self.row(s);
        FdftVector {
            omega: fourier_frequency(self.len, s),
            coefficients: self.dft.row(r).iter().copied().collect(),
        }
    }

    /// Channel `c` of the transform at `2πs/T`.
    pub fn coefficient(&self, s: i64, c: usize) -> Complex64 {
        self.dft[(self.row(s), c)]
    }

    /// Transform of the projection `Σ_c u_c X_c` at `2πs/T`.
    pub fn projected(&self, s: i64, u: &[f64]) -> Complex64 {
        let r = self.row(s);
        u.iter()
            .enumerate()
            .map(|(c, &w)| self.dft[(r, c)] * w)
            .sum()
    }

    pub fn periodogram(&self, s: i64) -> OperatorKernel {
        let d = self.fdft(s);
        outer(&d.coefficients, Some(d.omega))
    }

    /// Weights `(2π/T) W^{(T)}(ω - ω_s)` over the signed grid, zeros dropped.
    pub fn smoothing_weights(&self, omega: f64, wk: &WeightKernel) -> Vec<(i64, f64)> {
        let delta = 2.0 * PI / self.len as f64;
        signed_grid(self.len)
            .filter_map(|s| {
                let w = delta * periodized_weight(wk, omega - fourier_frequency(self.len, s));
                (w > 0.0).then_some((s, w))
            })
            .collect()
    }

    pub fn weighted_periodogram(&self, omega: f64, wk: &WeightKernel) -> OperatorKernel {
        let k = self.dim();
        let mut out = OperatorKernel::zeros(k, Some(omega));
        for (s, w) in self.smoothing_weights(omega, wk) {
            let r = self.row(s);
            for j in 0..k {
                let dj = self.dft[(r, j)].conj() * w;
                for i in 0..k {
                    out.entries[(i, j)] += self.dft[(r, i)] * dj;
                }
            }
        }
        out
    }
}
