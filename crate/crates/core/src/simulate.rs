//! Spherical ARMA coefficient processes with optional per-harmonic
//! fractional integration.
//!
//! Every harmonic channel `(n, j)` is an independent scalar Gaussian
//! ARFIMA path. The ARMA part is shared within a degree; the memory
//! exponent `α(n, j)` is per channel. The spectral factor
//! `|1 - e^{-iω}|^{-α}` corresponds to fractional integration of order
//! `d = α / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{LrdError, Result};
use crate::harmonics::{multiplicity, HarmonicIndex, SieveBasis};
use crate::par::{map_indexed, Execution};
use crate::seed::rng_stream;

/// Upper bound (exclusive) for memory exponents.
pub const ALPHA_MAX: f64 = 0.5;

/// Smoothness order used by the default innovation spectrum.
pub const DEFAULT_SMOOTHNESS: f64 = 3.0;

/// Per-degree ARMA dynamics plus per-harmonic memory exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    max_degree: usize,
    ar: Vec<Vec<f64>>,
    ma: Vec<Vec<f64>>,
    innovation: Vec<f64>,
    alpha: Vec<f64>,
}

impl SpectralModel {
    /// `ar`, `ma` and `innovation` are indexed by degree `0..=max_degree`;
    /// `alpha` by flattened harmonic index.
    pub fn new(
        max_degree: usize,
        ar: Vec<Vec<f64>>,
        ma: Vec<Vec<f64>>,
        innovation: Vec<f64>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let degrees = max_degree + 1;
        let k = degrees * degrees;
        if ar.len() != degrees || ma.len() != degrees || innovation.len() != degrees {
            return Err(LrdError::Dimension(format!(
                "per-degree parameters must have {degrees} entries"
            )));
        }
        if alpha.len() != k {
            return Err(LrdError::Dimension(format!(
                "memory exponents must have {k} entries, got {}",
                alpha.len()
            )));
        }
        for (n, &v) in innovation.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(LrdError::InvalidModel(format!(
                    "innovation eigenvalue at degree {n} must be finite and non-negative"
                )));
            }
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !(0.0..ALPHA_MAX).contains(&a) {
                return Err(LrdError::InvalidModel(format!(
                    "memory exponent {a} at index {i} outside [0, 1/2)"
                )));
            }
        }
        for n in 0..degrees {
            check_arma(n, &ar[n], &ma[n])?;
        }
        Ok(Self {
            max_degree,
            ar,
            ma,
            innovation,
            alpha,
        })
    }

    /// Replaces every memory exponent by `profile.alpha`.
    pub fn with_profile(mut self, profile: &LrdProfile) -> Self {
        for (i, a) in self.alpha.iter_mut().enumerate() {
            *a = profile.alpha(HarmonicIndex::from_flat(i));
        }
        self
    }

    /// Multiplies every innovation eigenvalue by `factor`.
    pub fn scale_innovation(mut self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(LrdError::InvalidModel(format!(
                "innovation scale must be positive, got {factor}"
            )));
        }
        self.innovation.iter_mut().for_each(|v| *v *= factor);
        Ok(self)
    }

    pub fn sieve(&self) -> SieveBasis {
        SieveBasis::new(self.max_degree)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn ar(&self, degree: usize) -> &[f64] {
        &self.ar[degree]
    }

    pub fn ma(&self, degree: usize) -> &[f64] {
        &self.ma[degree]
    }

    pub fn innovation(&self, degree: usize) -> f64 {
        self.innovation[degree]
    }

    pub fn alpha(&self, index: HarmonicIndex) -> f64 {
        self.alpha[index.flat()]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    /// True when every memory exponent vanishes.
    pub fn is_short_memory(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }

    /// The same ARMA structure with all memory exponents set to zero.
    pub fn short_memory_part(&self) -> Self {
        Self {
            alpha: vec![0.0; self.alpha.len()],
            ..self.clone()
        }
    }

    /// `(λ/2π) |Ψ(e^{-iω}) / Φ(e^{-iω})|²` for degree `n`.
    pub fn arma_spectrum(&self, degree: usize, omega: f64) -> f64 {
        let z = Complex64::from_polar(1.0, -omega);
        let phi = 1.0 - poly_tail(&self.ar[degree], z);
        let psi = 1.0 + poly_tail(&self.ma[degree], z);
        self.innovation[degree] / (2.0 * PI) * (psi.norm_sqr() / phi.norm_sqr())
    }

    /// Spectral density of channel `index` at `omega`.
    ///
    /// A positive memory exponent at `ω = 0` is reported as
    /// [`LrdError::Pole`]; a finite-parameter overflow comes back as
    /// `Ok(f64::INFINITY)`.
    pub fn theoretical_spectrum(&self, index: HarmonicIndex, omega: f64) -> Result<f64> {
        if index.degree() > self.max_degree {
            return Err(LrdError::InvalidArgument(format!(
                "degree {} beyond model degree {}",
                index.degree(),
                self.max_degree
            )));
        }
        let alpha = self.alpha(index);
        let base = self.arma_spectrum(index.degree(), omega);
        if alpha == 0.0 {
            return Ok(base);
        }
        let gap = 2.0 * (0.5 * omega).sin().abs();
        if gap == 0.0 {
            return Err(LrdError::Pole { alpha });
        }
        Ok(base * gap.powf(-alpha))
    }

    /// Autocovariances `γ(0..lags)` of the ARMA part of degree `n`.
    pub fn arma_autocovariance(&self, degree: usize, lags: usize) -> Vec<f64> {
        let psi = ma_infinity(&self.ar[degree], &self.ma[degree]);
        let var = self.innovation[degree];
        (0..lags)
            .map(|h| {
                if h >= psi.len() {
                    0.0
                } else {
                    var * psi[..psi.len() - h]
                        .iter()
                        .zip(&psi[h..])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                }
            })
            .collect()
    }
}

fn poly_tail(coefs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut power = z;
    for &c in coefs {
        acc += power * c;
        power *= z;
    }
    acc
}

/// Moduli of the roots (in `1/z`) of `1 - Σ c_j z^j`, i.e. companion eigenvalues.
fn inverse_roots(coefs: &[f64]) -> Vec<Complex64> {
    let p = coefs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i + 1);
    if p == 0 {
        return Vec::new();
    }
    if p == 1 {
        return vec![Complex64::new(coefs[0], 0.0)];
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        companion[(0, j)] = coefs[j];
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect()
}

fn check_arma(degree: usize, ar: &[f64], ma: &[f64]) -> Result<()> {
    if ar.iter().chain(ma).any(|c| !c.is_finite()) {
        return Err(LrdError::InvalidModel(format!(
            "non-finite ARMA coefficient at degree {degree}"
        )));
    }
    let ar_inv = inverse_roots(ar);
    if let Some(r) = ar_inv.iter().find(|r| r.norm() >= 1.0 - 1e-12) {
        return Err(LrdError::NonStationary {
            degree,
            detail: format!("autoregressive root with modulus {:.6} ≤ 1", 1.0 / r.norm()),
        });
    }
    let neg_ma: Vec<f64> = ma.iter().map(|c| -c).collect();
    let ma_inv = inverse_roots(&neg_ma);
    for a in &ar_inv {
        for m in &ma_inv {
            if a.norm() > 1e-12 && (a - m).norm() < 1e-8 {
                return Err(LrdError::InvalidModel(format!(
                    "AR and MA polynomials share a root at degree {degree}"
                )));
            }
        }
    }
    Ok(())
}

/// MA(∞) weights ψ_0 = 1, ψ_1, … truncated once negligible.
fn ma_infinity(ar: &[f64], ma: &[f64]) -> Vec<f64> {
    const MAX_TERMS: usize = 1 << 20;
    let mut psi = vec![1.0];
    let tail = ar.len().max(1);
    loop {
        let j = psi.len();
        let mut v = ma.get(j - 1).copied().unwrap_or(0.0);
        for (i, &phi) in ar.iter().enumerate() {
            if j > i {
                v += phi * psi[j - 1 - i];
            }
        }
        psi.push(v);
        let j = psi.len();
        if (j > ma.len() + ar.len() && psi[j - tail..].iter().all(|x| x.abs() < 1e-18))
            || j >= MAX_TERMS
        {
            break;
        }
    }
    psi
}

/// Per-order innovation eigenvalues `(n+1)^{-(2s+2)/2} / (2n+1)` with `s = 3`.
pub fn default_innovation(max_degree: usize) -> Vec<f64> {
    let exponent = (2.0 * DEFAULT_SMOOTHNESS + 2.0) / 2.0;
    (0..=max_degree)
        .map(|n| (n as f64 + 1.0).powf(-exponent) / multiplicity(n) as f64)
        .collect()
}

/// AR eigenvalue `0.7 ((n+1)/n)^{-3/2}` of the size-study model; zero at `n = 0`.
pub fn spharma11_ar(degree: usize) -> f64 {
    if degree == 0 {
        return 0.0;
    }
    let n = degree as f64;
    0.7 * ((n + 1.0) / n).powf(-1.5)
}

/// MA eigenvalue `0.4 ((n+1)/n)^{-5/1.95}` of the size-study model; zero at `n = 0`.
pub fn spharma11_ma(degree: usize) -> f64 {
    if degree == 0 {
        return 0.0;
    }
    let n = degree as f64;
    0.4 * ((n + 1.0) / n).powf(-5.0 / 1.95)
}

/// SPHARMA(1,1) null model of the size study on `sieve`, all exponents zero.
pub fn null_spharma11_model(sieve: SieveBasis) -> SpectralModel {
    let degrees = sieve.max_degree() + 1;
    let ar = (0..degrees).map(|n| vec![spharma11_ar(n)]).collect();
    let ma = (0..degrees).map(|n| vec![spharma11_ma(n)]).collect();
    SpectralModel::new(
        sieve.max_degree(),
        ar,
        ma,
        default_innovation(sieve.max_degree()),
        vec![0.0; sieve.size()],
    )
    .expect("size-study model is stationary")
}

/// Memory-exponent profile: `lower` everywhere except a dominant harmonic
/// carrying `upper`, optionally with a plateau at `upper` above a degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrdProfile {
    lower: f64,
    upper: f64,
    dominant: HarmonicIndex,
    plateau_above: Option<usize>,
}

impl LrdProfile {
    pub fn new(
        lower: f64,
        upper: f64,
        dominant: HarmonicIndex,
        plateau_above: Option<usize>,
    ) -> Result<Self> {
        if !(0.0 < lower && lower <= upper && upper < ALPHA_MAX) {
            return Err(LrdError::InvalidModel(format!(
                "profile bounds must satisfy 0 < {lower} <= {upper} < 1/2"
            )));
        }
        Ok(Self {
            lower,
            upper,
            dominant,
            plateau_above,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn dominant(&self) -> HarmonicIndex {
        self.dominant
    }

    pub fn alpha(&self, index: HarmonicIndex) -> f64 {
        if index == self.dominant {
            return self.upper;
        }
        match self.plateau_above {
            Some(top) if index.degree() > top => self.upper,
            _ => self.lower,
        }
    }

    /// Exponents over every harmonic of `sieve`, flattened.
    pub fn grid(&self, sieve: SieveBasis) -> Vec<f64> {
        sieve.indices().map(|i| self.alpha(i)).collect()
    }
}

/// The three long-memory scenarios of the power study.
///
/// 1. maximum on the last harmonic of the top eigenspace of `sieve`, with
///    every degree above the sieve at the maximum;
/// 2. maximum on the fifth harmonic of degree 3;
/// 3. maximum on the first harmonic of degree 1.
pub fn example_profile(id: u8, sieve: SieveBasis) -> Result<LrdProfile> {
    let top = sieve.max_degree();
    match id {
        1 => LrdProfile::new(
            0.2550,
            0.4929,
            HarmonicIndex::new(top, multiplicity(top))?,
            Some(top),
        ),
        2 => LrdProfile::new(0.2629, 0.4950, HarmonicIndex::new(3, 5)?, None),
        3 => LrdProfile::new(0.2678, 0.4743, HarmonicIndex::new(1, 1)?, None),
        other => Err(LrdError::InvalidArgument(format!(
            "unknown example id {other}; expected 1, 2 or 3"
        ))),
    }
}

/// Curve process in harmonic coordinates: row `t`, column = flat harmonic index.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSeries {
    sieve: SieveBasis,
    values: DMatrix<f64>,
}

impl CoefficientSeries {
    pub fn new(sieve: SieveBasis, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != sieve.size() {
            return Err(LrdError::Dimension(format!(
                "series has {} channels, sieve expects {}",
                values.ncols(),
                sieve.size()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LrdError::InvalidArgument(
                "series contains non-finite values".into(),
            ));
        }
        Ok(Self { sieve, values })
    }

    pub fn zeros(sieve: SieveBasis, len: usize) -> Self {
        Self {
            sieve,
            values: DMatrix::zeros(len, sieve.size()),
        }
    }

    pub fn sieve(&self) -> SieveBasis {
        self.sieve
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        let len = self.len();
        &self.values.as_slice()[index * len..(index + 1) * len]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sieve: self.sieve,
            values: &self.values * factor,
        }
    }

    /// Keeps only the harmonics of `sieve` (which must be no larger).
    pub fn truncate(&self, sieve: SieveBasis) -> Result<Self> {
        if sieve.size() > self.dim() {
            return Err(LrdError::Dimension(format!(
                "cannot truncate {} channels to {}",
                self.dim(),
                sieve.size()
            )));
        }
        Ok(Self {
            sieve,
            values: self.values.columns(0, sieve.size()).into_owned(),
        })
    }

    /// CSV with header `t,x_<n>_<j>,…`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for idx in self.sieve.indices() {
            write!(out, ",x_{}_{}", idx.degree(), idx.order())?;
        }
        writeln!(out)?;
        for t in 0..self.len() {
            write!(out, "{t}")?;
            for c in 0..self.dim() {
                write!(out, ",{:.12e}", self.values[(t, c)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Length of the truncated MA(∞) expansion of `(1-B)^{-d}` for a path of length `len`.
pub fn fractional_taps(len: usize) -> usize {
    1000.max(10 * len)
}

/// Coefficients of `(1 - B)^{-d}` truncated to `taps` terms.
pub fn fractional_weights(d: f64, taps: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(taps);
    if taps == 0 {
        return w;
    }
    w.push(1.0);
    for m in 1..taps {
        let prev = w[m - 1];
        w.push(prev * (m as f64 - 1.0 + d) / m as f64);
    }
    w
}

/// Simulates every channel of `model` for `len` steps after `burn_in` discarded steps.
///
/// Channel `c` draws from stream `c` of the ChaCha8 generator seeded with
/// `seed`, so the output is fully determined by `(model, len, burn_in, seed)`.
pub fn simulate_series(
    model: &SpectralModel,
    len: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CoefficientSeries> {
    simulate_series_with(model, len, burn_in, seed, Execution::Parallel)
}

pub fn simulate_series_with(
    model: &SpectralModel,
    len: usize,
    burn_in: usize,
    seed: u64,
    execution: Execution,
) -> Result<CoefficientSeries> {
    if len < 2 {
        return Err(LrdError::InvalidArgument(format!(
            "series length must be at least 2, got {len}"
        )));
    }
    for n in 0..=model.max_degree {
        check_arma(n, &model.ar[n], &model.ma[n])?;
    }
    let sieve = model.sieve();
    let k = sieve.size();
    let taps = fractional_taps(len);
    let conv_len = (taps - 1 + len).next_power_of_two();
    let fft = Arc::new(FftKit::new(conv_len));

    let columns = map_indexed(k, execution, |c| {
        let index = HarmonicIndex::from_flat(c);
        let n = index.degree();
        let mut rng = rng_stream(seed, c as u64);
        let alpha = model.alpha[c];
        let extra = if alpha > 0.0 { taps - 1 } else { 0 };
        let arma = simulate_arma(
            &model.ar[n],
            &model.ma[n],
            model.innovation[n],
            burn_in,
            extra + len,
            &mut rng,
        );
        if alpha > 0.0 {
            let weights = fractional_weights(0.5 * alpha, taps);
            fft.convolve_valid(&arma, &weights, len)
        } else {
            arma
        }
    });

    let mut values = DMatrix::zeros(len, k);
    for (c, col) in columns.into_iter().enumerate() {
        values.column_mut(c).copy_from_slice(&col);
    }
    CoefficientSeries::new(sieve, values)
}

/// ARMA path of `len` steps after `burn_in` steps, from a zero start.
fn simulate_arma<R: Rng>(
    ar: &[f64],
    ma: &[f64],
    variance: f64,
    burn_in: usize,
    len: usize,
    rng: &mut R,
) -> Vec<f64> {
    let sd = variance.sqrt();
    let total = burn_in + len;
    let p = ar.len();
    let q = ma.len();
    let mut x = vec![0.0; total];
    let mut eps = vec![0.0; total];
    for t in 0..total {
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
        eps[t] = e;
        let mut v = e;
        for i in 0..p.min(t) {
            v += ar[i] * x[t - 1 - i];
        }
        for l in 0..q.min(t) {
            v += ma[l] * eps[t - 1 - l];
        }
        x[t] = v;
    }
    x.split_off(burn_in)
}

struct FftKit {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftKit {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Last `out_len` outputs of the full linear convolution window where
    /// every filter tap overlaps the input: `y_t = Σ_m w_m x_{t+taps-1-m}`.
    fn convolve_valid(&self, x: &[f64], w: &[f64], out_len: usize) -> Vec<f64> {
        debug_assert!(x.len() <= self.len);
        debug_assert_eq!(x.len(), w.len() - 1 + out_len);
        let mut a: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        a.resize(self.len, Complex64::new(0.0, 0.0));
        let mut b: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        b.resize(self.len, Complex64::new(0.0, 0.0));
        self.forward.process(&mut a);
        self.forward.process(&mut b);
        for (u, v) in a.iter_mut().zip(&b) {
            *u *= v;
        }
        self.inverse.process(&mut a);
        let scale = 1.0 / self.len as f64;
        let start = w.len() - 1;
        a[start..start + out_len]
            .iter()
            .map(|c| c.re * scale)
            .collect()
    }
}
