//! The low-frequency integrated spectral statistic and its Gaussian null
//! calibration along random projections.
//!
//! The statistic integrates the weighted periodogram over the window
//! `|ω| ≤ √B/2` and scales by `√T`. Written as a single weighted sum of
//! periodograms it reads `Ŝ = √T Δ Σ_r c_r P(ω_r)` with
//! `c_r = Δ Σ_{s ∈ window} W^{(T)}(ω_s - ω_r)` and `Δ = 2π/T`, which is
//! how it is computed here.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LrdError, Result};
use crate::harmonics::{multiplicity, SieveBasis};
use crate::reconstruct::Reconstructor;
use crate::seed::rng;
use crate::simulate::{CoefficientSeries, SpectralModel};
use crate::spectra::{fourier_frequency, periodized_weight, signed_grid, FourierCache, WeightKernel};
use crate::stats::critical_value;

/// `√T Δ Σ_r c_r Re P(ω_r)`, real symmetric `k × k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestStatistic {
    kernel: DMatrix<f64>,
    sieve: SieveBasis,
    len: usize,
    bandwidth: f64,
}

impl TestStatistic {
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn sieve(&self) -> SieveBasis {
        self.sieve
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn half_width(&self) -> f64 {
        self.bandwidth.sqrt() / 2.0
    }

    /// `⟨Ŝ u, v⟩`.
    pub fn project(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.kernel, u, v)
    }
}

fn bilinear(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (j, &uj) in u.iter().enumerate() {
            acc += m[(i, j)] * vi * uj;
        }
    }
    acc
}

/// Fourier indices `s` with `|ω_s| ≤ √B/2`.
pub fn integration_window(len: usize, bandwidth: f64) -> Result<Vec<i64>> {
    let half = bandwidth.sqrt() / 2.0;
    let window: Vec<i64> = signed_grid(len)
        .filter(|&s| fourier_frequency(len, s).abs() <= half)
        .collect();
    // ω = 0 always qualifies, so an empty window means T = 0.
    if window.is_empty() {
        return Err(LrdError::EmptyWindow {
            len,
            half_width: half,
        });
    }
    Ok(window)
}

/// Effective periodogram weights `(s, c_s)` of the statistic, zeros dropped.
pub fn statistic_weights(len: usize, wk: &WeightKernel) -> Result<Vec<(i64, f64)>> {
    let window = integration_window(len, wk.bandwidth())?;
    if window.len() < 2 {
        // Only ω = 0 lies in the window: the statistic degenerates to a
        // single smoothed value and the Riemann sum carries no integral.
        return Err(LrdError::EmptyWindow {
            len,
            half_width: wk.bandwidth().sqrt() / 2.0,
        });
    }
    let delta = 2.0 * PI / len as f64;
    let weights = signed_grid(len)
        .filter_map(|r| {
            let wr = fourier_frequency(len, r);
            let c: f64 = window
                .iter()
                .map(|&s| periodized_weight(wk, fourier_frequency(len, s) - wr))
                .sum::<f64>()
                * delta;
            (c > 0.0).then_some((r, c))
        })
        .collect();
    Ok(weights)
}

/// `√T Δ Σ_{s ∈ window} F(ω_s)` for an arbitrary kernel-valued `F`.
pub fn window_integral(
    len: usize,
    bandwidth: f64,
    f: impl Fn(f64) -> DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let window = integration_window(len, bandwidth)?;
    let delta = 2.0 * PI / len as f64;
    let mut acc: Option<DMatrix<f64>> = None;
    for s in window {
        let v = f(fourier_frequency(len, s));
        acc = Some(match acc {
            Some(a) => a + v,
            None => v,
        });
    }
    Ok(acc.expect("window is non-empty") * ((len as f64).sqrt() * delta))
}

pub fn test_statistic(series: &CoefficientSeries, wk: &WeightKernel) -> Result<TestStatistic> {
    test_statistic_from_cache(&FourierCache::new(series), series.sieve(), wk)
}

pub fn test_statistic_from_cache(
    cache: &FourierCache,
    sieve: SieveBasis,
    wk: &WeightKernel,
) -> Result<TestStatistic> {
    let len = cache.len();
    if len < 2 {
        return Err(LrdError::InvalidArgument(format!(
            "series length must be at least 2, got {len}"
        )));
    }
    let weights = statistic_weights(len, wk)?;
    let k = cache.dim();
    let mut kernel = DMatrix::zeros(k, k);
    let mut re = vec![0.0; k];
    let mut im = vec![0.0; k];
    for &(s, c) in &weights {
        for (ch, (a, b)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
            let d = cache.coefficient(s, ch);
            *a = d.re;
            *b = d.im;
        }
        for j in 0..k {
            let (aj, bj) = (re[j] * c, im[j] * c);
            for i in 0..k {
                kernel[(i, j)] += re[i] * aj + im[i] * bj;
            }
        }
    }
    let scale = (len as f64).sqrt() * 2.0 * PI / len as f64;
    kernel *= scale;
    Ok(TestStatistic {
        kernel,
        sieve,
        len,
        bandwidth: wk.bandwidth(),
    })
}

/// Frobenius norm of a coordinate matrix.
pub fn hs_norm(kernel: &DMatrix<f64>) -> f64 {
    kernel.norm()
}

/// The `(2n+1) × (2n+1)` block of degree `n`.
pub fn eigenspace_block(statistic: &TestStatistic, degree: usize) -> Result<DMatrix<f64>> {
    let sieve = statistic.sieve;
    if degree > sieve.max_degree() {
        return Err(LrdError::InvalidArgument(format!(
            "degree {degree} beyond sieve degree {}",
            sieve.max_degree()
        )));
    }
    let r = sieve.degree_range(degree);
    Ok(statistic
        .kernel
        .view((r.start, r.start), (r.len(), r.len()))
        .into_owned())
}

/// Pair of unit vectors in harmonic coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDirection {
    u: Vec<f64>,
    v: Vec<f64>,
}

impl ProjectionDirection {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(LrdError::Dimension(format!(
                "direction lengths differ: {} and {}",
                u.len(),
                v.len()
            )));
        }
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(nu > 0.0 && nv > 0.0 && nu.is_finite() && nv.is_finite()) {
            return Err(LrdError::InvalidArgument("direction must be non-zero".into()));
        }
        Ok(Self {
            u: u.into_iter().map(|x| x / nu).collect(),
            v: v.into_iter().map(|x| x / nv).collect(),
        })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

/// Number of directions in the default set.
pub const DEFAULT_PROJECTIONS: usize = 6;

/// Highest degree carrying projection mass.
pub const PROJECTION_MAX_DEGREE: usize = 3;

/// Random unit vector on degrees `1..=3` of `sieve`.
fn random_direction<R: Rng>(sieve: SieveBasis, r: &mut R) -> Vec<f64> {
    let mut u = vec![0.0; sieve.size()];
    let lo = sieve.degree_range(1).start;
    let hi = sieve.degree_range(PROJECTION_MAX_DEGREE).end;
    for x in &mut u[lo..hi] {
        *x = r.sample(StandardNormal);
    }
    u
}

/// Six directions `(u, u)` with `u` a random unit vector on degrees 1..3.
///
/// The two sides of each direction coincide, so every projection tracks the
/// spectral mass of one random combination of low-degree harmonics.
pub fn default_projections(sieve: SieveBasis, seed: u64) -> Result<Vec<ProjectionDirection>> {
    random_projections(sieve, seed, DEFAULT_PROJECTIONS, true)
}

/// `count` random directions on degrees 1..3; `paired` sets `v = u`,
/// otherwise `v` is drawn independently.
pub fn random_projections(
    sieve: SieveBasis,
    seed: u64,
    count: usize,
    paired: bool,
) -> Result<Vec<ProjectionDirection>> {
    if sieve.max_degree() < PROJECTION_MAX_DEGREE {
        return Err(LrdError::SieveTooSmall(format!(
            "projections need degrees 1..{PROJECTION_MAX_DEGREE}, sieve stops at {}",
            sieve.max_degree()
        )));
    }
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let u = random_direction(sieve, &mut r);
            let v = if paired {
                u.clone()
            } else {
                random_direction(sieve, &mut r)
            };
            ProjectionDirection::new(u, v)
        })
        .collect()
}

/// Expected periodogram of each generator degree at every Fourier frequency.
#[derive(Clone, Debug)]
pub struct ChannelPeriodograms {
    len: usize,
    /// `per_degree[n][s]`, `s` in `0..T`.
    per_degree: Vec<Vec<f64>>,
}

impl ChannelPeriodograms {
    /// `E I(ω_s) = (1/2πT) Σ_{|h|<T} (T - |h|) γ(h) e^{-iω_s h}` per degree,
    /// from the ARMA part of `model` (memory exponents are ignored).
    pub fn new(model: &SpectralModel, len: usize) -> Self {
        let planner = rustfft::FftPlanner::new().plan_fft_forward(len);
        let per_degree = (0..=model.max_degree())
            .map(|n| {
                let g = model.arma_autocovariance(n, len);
                let mut buf: Vec<Complex64> = (0..len)
                    .map(|h| {
                        let c = if h == 0 {
                            len as f64 * g[0]
                        } else {
                            (len - h) as f64 * g[h] + h as f64 * g[len - h]
                        };
                        Complex64::new(c, 0.0)
                    })
                    .collect();
                planner.process(&mut buf);
                let norm = 1.0 / (2.0 * PI * len as f64);
                buf.iter().map(|z| z.re * norm).collect()
            })
            .collect();
        Self { len, per_degree }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_degree(&self) -> usize {
        self.per_degree.len() - 1
    }

    pub fn at(&self, degree: usize, s: i64) -> f64 {
        self.per_degree[degree][s.rem_euclid(self.len as i64) as usize]
    }
}

/// Expected periodogram of the reconstructed series under the null:
/// `G(ω) = A diag(E I(ω)) Aᵀ + N`, where `A` maps generator harmonics to
/// reconstructed coefficients and `N` is the reconstructed-noise spectrum.
#[derive(Clone, Debug)]
pub struct NullSpectrum {
    channels: Arc<ChannelPeriodograms>,
    mixing: DMatrix<f64>,
    noise: DMatrix<f64>,
}

impl NullSpectrum {
    pub fn new(
        channels: Arc<ChannelPeriodograms>,
        mixing: DMatrix<f64>,
        noise: DMatrix<f64>,
    ) -> Result<Self> {
        let kg = (channels.max_degree() + 1).pow(2);
        if mixing.ncols() != kg || noise.nrows() != mixing.nrows() || !noise.is_square() {
            return Err(LrdError::Dimension(format!(
                "mixing {}x{} and noise {}x{} do not fit {kg} generator channels",
                mixing.nrows(),
                mixing.ncols(),
                noise.nrows(),
                noise.ncols()
            )));
        }
        Ok(Self {
            channels,
            mixing,
            noise,
        })
    }

    /// Fully observed coefficients on `sieve` (no reconstruction, no noise).
    pub fn direct(channels: Arc<ChannelPeriodograms>, sieve: SieveBasis) -> Result<Self> {
        let kg = (channels.max_degree() + 1).pow(2);
        if sieve.size() > kg {
            return Err(LrdError::Dimension(format!(
                "sieve of size {} exceeds {kg} generator channels",
                sieve.size()
            )));
        }
        let mixing = DMatrix::from_fn(sieve.size(), kg, |i, j| if i == j { 1.0 } else { 0.0 });
        let k = sieve.size();
        Self::new(channels, mixing, DMatrix::zeros(k, k))
    }

    /// Reconstruction from noisy data: `A = B⁺ B_gen`, `N = σ²/(2π) B⁺ B⁺ᵀ`.
    pub fn reconstructed(
        channels: Arc<ChannelPeriodograms>,
        reconstructor: &Reconstructor,
        generator_design: &DMatrix<f64>,
        noise_variance: f64,
    ) -> Result<Self> {
        let pinv = reconstructor.pseudo_inverse();
        if generator_design.nrows() != pinv.ncols() {
            return Err(LrdError::Dimension(
                "generator design and reconstruction use different locations".into(),
            ));
        }
        let mixing = pinv * generator_design;
        let noise = (pinv * pinv.transpose()) * (noise_variance / (2.0 * PI));
        Self::new(channels, mixing, noise)
    }

    pub fn dim(&self) -> usize {
        self.mixing.nrows()
    }

    /// Cached `Aᵀu`, reused across frequencies.
    fn lift(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mixing.ncols())
            .map(|c| (0..u.len()).map(|i| self.mixing[(i, c)] * u[i]).sum())
            .collect()
    }

    fn projected_at(&self, s: i64, au: &[f64], av: &[f64], noise_uv: f64) -> f64 {
        let mut acc = noise_uv;
        let mut c = 0;
        for n in 0..=self.channels.max_degree() {
            let e = self.channels.at(n, s);
            for _ in 0..multiplicity(n) {
                acc += e * au[c] * av[c];
                c += 1;
            }
        }
        acc
    }

    /// `⟨G(ω_s) u, v⟩`.
    pub fn bilinear(&self, s: i64, u: &[f64], v: &[f64]) -> f64 {
        let au = self.lift(u);
        let av = self.lift(v);
        self.projected_at(s, &au, &av, bilinear(&self.noise, u, v))
    }

    /// Full `G(ω_s)`.
    pub fn at(&self, s: i64) -> DMatrix<f64> {
        let mut weights = Vec::with_capacity(self.mixing.ncols());
        for n in 0..=self.channels.max_degree() {
            let e = self.channels.at(n, s);
            weights.extend(std::iter::repeat_n(e, multiplicity(n)));
        }
        let scaled = DMatrix::from_fn(self.mixing.nrows(), self.mixing.ncols(), |i, j| {
            self.mixing[(i, j)] * weights[j]
        });
        &scaled * self.mixing.transpose() + &self.noise
    }

    /// `(F_uv, F_uu, F_vv)` at each index of `frequencies`.
    fn projected_triples(&self, frequencies: &[i64], dir: &ProjectionDirection) -> Vec<[f64; 3]> {
        let (u, v) = (dir.u(), dir.v());
        let au = self.lift(u);
        let av = self.lift(v);
        let (nuv, nuu, nvv) = (
            bilinear(&self.noise, u, v),
            bilinear(&self.noise, u, u),
            bilinear(&self.noise, v, v),
        );
        frequencies
            .iter()
            .map(|&s| {
                [
                    self.projected_at(s, &au, &av, nuv),
                    self.projected_at(s, &au, &au, nuu),
                    self.projected_at(s, &av, &av, nvv),
                ]
            })
            .collect()
    }
}

/// Where the statistic is centered under the null.
#[derive(Clone, Debug)]
pub enum Centering {
    /// `√(TB) ⟨F̄₀ u, v⟩` with `F̄₀` the weighted periodogram at zero
    /// frequency under the wider bandwidth `√B`.
    Pilot,
    /// Exact null expectation of the statistic from a null spectrum.
    Model(NullSpectrum),
}

/// How the null variance of a projection is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum VarianceScale {
    /// `2π‖W‖² [F_uu F_vv + F_uv²]` at zero frequency.
    KernelNorm,
    /// `T Δ² Σ_r w_r² [F_uu F_vv + F_uv²](ω_r)` with `w_r` the net periodogram
    /// weights of the centered statistic.
    #[default]
    EffectiveWeights,
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub centering: Centering,
    pub variance: VarianceScale,
}

impl Calibration {
    /// Pilot centering with the kernel-norm variance.
    pub fn pilot() -> Self {
        Self {
            centering: Centering::Pilot,
            variance: VarianceScale::KernelNorm,
        }
    }

    /// Model centering with effective-weight variance.
    pub fn model(null: NullSpectrum) -> Self {
        Self {
            centering: Centering::Model(null),
            variance: VarianceScale::EffectiveWeights,
        }
    }
}

/// Per-projection standardized statistics and decisions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub z: Vec<f64>,
    pub reject: Vec<bool>,
    /// Directions whose null variance was not positive; `z` is NaN there.
    pub degenerate: Vec<bool>,
    pub projected: Vec<f64>,
    pub center: Vec<f64>,
    pub variance: Vec<f64>,
    pub hs_norm: f64,
    pub block_norms: Vec<f64>,
    pub critical_value: f64,
}

/// Pilot-centered test with the kernel-norm variance.
pub fn null_calibration(
    series: &CoefficientSeries,
    wk: &WeightKernel,
    dirs: &[ProjectionDirection],
    alpha: f64,
) -> Result<TestOutcome> {
    calibrate(series, wk, dirs, alpha, &Calibration::pilot())
}

pub fn calibrate(
    series: &CoefficientSeries,
    wk: &WeightKernel,
    dirs: &[ProjectionDirection],
    alpha: f64,
    calibration: &Calibration,
) -> Result<TestOutcome> {
    if dirs.is_empty() {
        return Err(LrdError::InvalidArgument("no projection directions".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LrdError::InvalidArgument(format!(
            "test level must lie in (0, 1), got {alpha}"
        )));
    }
    if let Some(d) = dirs.iter().find(|d| d.dim() != series.dim()) {
        return Err(LrdError::Dimension(format!(
            "direction of length {} for {} coefficients",
            d.dim(),
            series.dim()
        )));
    }
    let bw = wk.bandwidth();
    if !(bw > 0.0 && bw < 1.0) {
        return Err(LrdError::InvalidArgument(format!(
            "bandwidth must lie in (0, 1), got {bw}"
        )));
    }
    let len = series.len();
    let cache = FourierCache::new(series);
    let stat = test_statistic_from_cache(&cache, series.sieve(), wk)?;
    let weights = statistic_weights(len, wk)?;
    let t = len as f64;
    let delta = 2.0 * PI / t;
    let crit = critical_value(alpha);

    let mut out = TestOutcome {
        z: Vec::with_capacity(dirs.len()),
        reject: Vec::with_capacity(dirs.len()),
        degenerate: Vec::with_capacity(dirs.len()),
        projected: Vec::with_capacity(dirs.len()),
        center: Vec::with_capacity(dirs.len()),
        variance: Vec::with_capacity(dirs.len()),
        hs_norm: hs_norm(stat.kernel()),
        block_norms: (0..=series.sieve().max_degree())
            .map(|n| eigenspace_block(&stat, n).map(|b| b.norm()))
            .collect::<Result<_>>()?,
        critical_value: crit,
    };

    match &calibration.centering {
        Centering::Pilot => {
            let pilot_wk = wk.with_bandwidth(bw.sqrt())?;
            let pilot = cache.weighted_periodogram(0.0, &pilot_wk);
            let f0 = pilot.entries.map(|c| c.re);
            // Net weights of Ŝ - m̂ on each periodogram ordinate.
            let net: Vec<(i64, f64)> = if calibration.variance == VarianceScale::EffectiveWeights {
                let mut all: std::collections::BTreeMap<i64, f64> = weights.iter().copied().collect();
                for (s, w) in cache.smoothing_weights(0.0, &pilot_wk) {
                    *all.entry(s).or_insert(0.0) -= bw.sqrt() * w / delta;
                }
                all.into_iter().collect()
            } else {
                Vec::new()
            };
            for d in dirs {
                let (u, v) = (d.u(), d.v());
                let fuv = bilinear(&f0, u, v);
                let fuu = bilinear(&f0, u, u);
                let fvv = bilinear(&f0, v, v);
                let g = fuu * fvv + fuv * fuv;
                let center = (t * bw).sqrt() * fuv;
                let variance = match calibration.variance {
                    VarianceScale::KernelNorm => 2.0 * PI * wk.norm_sq() * g,
                    VarianceScale::EffectiveWeights => {
                        t * delta * delta * net.iter().map(|(_, w)| w * w).sum::<f64>() * g
                    }
                };
                push(&mut out, stat.project(u, v), center, variance, crit);
            }
        }
        Centering::Model(null) => {
            if null.dim() != series.dim() {
                return Err(LrdError::Dimension(format!(
                    "null spectrum has dimension {}, series {}",
                    null.dim(),
                    series.dim()
                )));
            }
            let freqs: Vec<i64> = weights.iter().map(|&(s, _)| s).collect();
            let scale = t.sqrt() * delta;
            for d in dirs {
                let triples = null.projected_triples(&freqs, d);
                let center = scale
                    * weights
                        .iter()
                        .zip(&triples)
                        .map(|(&(_, c), f)| c * f[0])
                        .sum::<f64>();
                let variance = match calibration.variance {
                    VarianceScale::KernelNorm => {
                        let f = null.projected_triples(&[0], d)[0];
                        2.0 * PI * wk.norm_sq() * (f[1] * f[2] + f[0] * f[0])
                    }
                    VarianceScale::EffectiveWeights => {
                        t * delta
                            * delta
                            * weights
                                .iter()
                                .zip(&triples)
                                .map(|(&(_, c), f)| c * c * (f[1] * f[2] + f[0] * f[0]))
                                .sum::<f64>()
                    }
                };
                push(&mut out, stat.project(d.u(), d.v()), center, variance, crit);
            }
        }
    }
    Ok(out)
}

fn push(out: &mut TestOutcome, projected: f64, center: f64, variance: f64, crit: f64) {
    let degenerate = !(variance > 0.0 && variance.is_finite());
    let z = if degenerate {
        f64::NAN
    } else {
        (projected - center) / variance.sqrt()
    };
    out.z.push(z);
    out.reject.push(!degenerate && z.abs() > crit);
    out.degenerate.push(degenerate);
    out.projected.push(projected);
    out.center.push(center);
    out.variance.push(variance);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{null_spharma11_model, simulate_series};

    fn white(len: usize, n: usize, seed: u64) -> CoefficientSeries {
        let sieve = SieveBasis::new(n);
        let mut r = rng(seed);
        let vals = DMatrix::from_fn(len, sieve.size(), |_, _| r.sample::<f64, _>(StandardNormal));
        CoefficientSeries::new(sieve, vals).unwrap()
    }

    #[test]
    fn zero_series_zero_statistic() {
        let s = CoefficientSeries::zeros(SieveBasis::new(1), 500);
        let wk = WeightKernel::for_length(500, 0.25).unwrap();
        assert_eq!(hs_norm(test_statistic(&s, &wk).unwrap().kernel()), 0.0);
    }

    #[test]
    fn constant_kernel_hook() {
        for len in [500usize, 2000, 10_000] {
            let b = (len as f64).powf(-0.25);
            let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
            let out = window_integral(len, b, |_| c.clone()).unwrap();
            let target = (len as f64 * b).sqrt();
            let tol = 2.0 * PI * (len as f64).sqrt() / len as f64;
            for i in 0..2 {
                for j in 0..2 {
                    assert!((out[(i, j)] - target * c[(i, j)]).abs() <= tol * c[(i, j)] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn efficient_form_matches_window_integral() {
        let s = white(128, 1, 3);
        let wk = WeightKernel::for_length(128, 0.25).unwrap();
        let fast = test_statistic(&s, &wk).unwrap();
        let cache = FourierCache::new(&s);
        let slow = window_integral(128, wk.bandwidth(), |w| {
            cache.weighted_periodogram(w, &wk).entries.map(|c| c.re)
        })
        .unwrap();
        assert!((fast.kernel() - &slow).amax() < 1e-10 * slow.amax());
    }

    #[test]
    fn statistic_is_quadratic_and_symmetric() {
        let s = white(300, 2, 4);
        let wk = WeightKernel::for_length(300, 0.25).unwrap();
        let a = test_statistic(&s, &wk).unwrap();
        let b = test_statistic(&s.scaled(3.0), &wk).unwrap();
        assert!((a.kernel() * 9.0 - b.kernel()).amax() < 1e-10 * b.kernel().amax());
        assert!((a.kernel() - a.kernel().transpose()).amax() < 1e-10);
    }

    #[test]
    fn empty_window_reported() {
        let s = white(4, 0, 1);
        let wk = WeightKernel::epanechnikov(0.01).unwrap();
        assert!(matches!(test_statistic(&s, &wk), Err(LrdError::EmptyWindow { .. })));
    }

    #[test]
    fn norms_of_simple_kernels() {
        assert_eq!(hs_norm(&DMatrix::zeros(3, 3)), 0.0);
        assert!((hs_norm(&DMatrix::identity(9, 9)) - 3.0).abs() < 1e-15);
        let u = nalgebra::DVector::from_vec(vec![2.0, 0.0, 0.0]);
        assert!((hs_norm(&(&u * u.transpose())) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn blocks() {
        let s = white(200, 2, 5);
        let wk = WeightKernel::for_length(200, 0.25).unwrap();
        let st = test_statistic(&s, &wk).unwrap();
        let b0 = eigenspace_block(&st, 0).unwrap();
        assert_eq!(b0.shape(), (1, 1));
        assert_eq!(b0[(0, 0)], st.kernel()[(0, 0)]);
        let total: f64 = (0..=2).map(|n| eigenspace_block(&st, n).unwrap().norm_squared()).sum();
        assert!(total <= hs_norm(st.kernel()).powi(2) + 1e-12);
        let b2 = eigenspace_block(&st, 2).unwrap();
        let mut embedded = DMatrix::zeros(9, 9);
        embedded.view_mut((4, 4), (5, 5)).copy_from(&b2);
        assert_eq!(embedded.view((4, 4), (5, 5)).into_owned(), b2);
        assert!(eigenspace_block(&st, 3).is_err());
    }

    #[test]
    fn projections() {
        let sieve = SieveBasis::new(3);
        let a = default_projections(sieve, 9).unwrap();
        assert_eq!(a, default_projections(sieve, 9).unwrap());
        assert_eq!(a.len(), 6);
        for d in &a {
            for w in [d.u(), d.v()] {
                assert!((w.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
                assert_eq!(w[0], 0.0);
            }
        }
        let big = default_projections(SieveBasis::new(5), 9).unwrap();
        for d in &big {
            assert!(d.u()[16..].iter().all(|&x| x == 0.0));
        }
        assert!(matches!(
            default_projections(SieveBasis::new(2), 1),
            Err(LrdError::SieveTooSmall(_))
        ));
        let free = random_projections(sieve, 2, 3, false).unwrap();
        assert_ne!(free[0].u(), free[0].v());
    }

    #[test]
    fn z_is_scale_invariant() {
        let s = white(400, 3, 6);
        let wk = WeightKernel::for_length(400, 0.25).unwrap();
        let dirs = default_projections(s.sieve(), 1).unwrap();
        let a = null_calibration(&s, &wk, &dirs, 0.05).unwrap();
        let b = null_calibration(&s.scaled(2.5), &wk, &dirs, 0.05).unwrap();
        for (x, y) in a.z.iter().zip(&b.z) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
        assert!((a.critical_value - 1.959964).abs() < 1e-6);
        for (z, r) in a.z.iter().zip(&a.reject) {
            assert_eq!(*r, z.abs() > a.critical_value);
        }
    }

    #[test]
    fn expected_periodogram_of_white_noise_is_flat() {
        let model = SpectralModel::new(0, vec![vec![]], vec![vec![]], vec![1.0], vec![0.0]).unwrap();
        let ch = ChannelPeriodograms::new(&model, 64);
        for s in 0..64 {
            assert!((ch.at(0, s) - 1.0 / (2.0 * PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn expected_periodogram_is_fejer_smoothed_spectrum() {
        let model = SpectralModel::new(0, vec![vec![0.6]], vec![vec![0.3]], vec![1.0], vec![0.0]).unwrap();
        let len = 32;
        let ch = ChannelPeriodograms::new(&model, len);
        for s in [0i64, 3, 10] {
            let w = fourier_frequency(len, s);
            let nodes = 20_000;
            let h = 2.0 * PI / nodes as f64;
            let conv: f64 = (0..nodes)
                .map(|i| {
                    let l = -PI + (i as f64 + 0.5) * h;
                    crate::spectra::fejer(len, w - l) * model.arma_spectrum(0, l)
                })
                .sum::<f64>()
                * h
                / (2.0 * PI);
            assert!((ch.at(0, s) / conv - 1.0).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn model_centering_is_unbiased_under_null() {
        let sieve = SieveBasis::new(3);
        let model = null_spharma11_model(sieve);
        let len = 500;
        let wk = WeightKernel::for_length(len, 0.25).unwrap();
        let dirs = default_projections(sieve, 3).unwrap();
        let channels = Arc::new(ChannelPeriodograms::new(&model, len));
        let null = NullSpectrum::direct(channels, sieve).unwrap();
        let cal = Calibration::model(null);
        let reps = 300;
        let zs: Vec<Vec<f64>> = (0..reps)
            .map(|r| {
                let s = simulate_series(&model, len, 500, 1000 + r).unwrap();
                calibrate(&s, &wk, &dirs, 0.05, &cal).unwrap().z
            })
            .collect();
        for m in 0..dirs.len() {
            let col: Vec<f64> = zs.iter().map(|z| z[m]).collect();
            let mean = col.iter().sum::<f64>() / reps as f64;
            let var = col.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            assert!(mean.abs() < 0.25, "proj {m}: mean {mean}");
            assert!((var - 1.0).abs() < 0.35, "proj {m}: var {var}");
        }
    }

    #[test]
    fn null_spectrum_forms_agree() {
        let sieve = SieveBasis::new(3);
        let model = null_spharma11_model(SieveBasis::new(4));
        let channels = Arc::new(ChannelPeriodograms::new(&model, 50));
        let mixing = DMatrix::from_fn(16, 25, |i, j| ((i * 25 + j) as f64 * 0.1).sin());
        let noise = DMatrix::from_fn(16, 16, |i, j| if i == j { 0.01 } else { 0.0 });
        let null = NullSpectrum::new(channels, mixing, noise).unwrap();
        let dirs = random_projections(sieve, 4, 2, false).unwrap();
        for d in &dirs {
            let g = null.at(7);
            let direct = bilinear(&g, d.u(), d.v());
            assert!((null.bilinear(7, d.u(), d.v()) - direct).abs() < 1e-12);
        }
    }
}
