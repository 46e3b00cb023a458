//! Noisy observations of the curve process at random points of the sphere.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LrdError, Result};
use crate::harmonics::{evaluate_basis_into, SpherePoint};
use crate::seed::rng;
use crate::simulate::CoefficientSeries;

/// One spatial design reused at every time step, with the observed values.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    locations: Vec<SpherePoint>,
    values: DMatrix<f64>,
    noise_variance: f64,
}

impl ObservationSet {
    /// `values` is `T × M`, column `i` belonging to `locations[i]`.
    pub fn new(locations: Vec<SpherePoint>, values: DMatrix<f64>, noise_variance: f64) -> Result<Self> {
        if locations.is_empty() {
            return Err(LrdError::InvalidArgument("no observation locations".into()));
        }
        if values.ncols() != locations.len() {
            return Err(LrdError::Dimension(format!(
                "{} value columns for {} locations",
                values.ncols(),
                locations.len()
            )));
        }
        Ok(Self {
            locations,
            values,
            noise_variance,
        })
    }

    pub fn locations(&self) -> &[SpherePoint] {
        &self.locations
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    /// Long-format CSV: `t,i,theta,phi,y`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,i,theta,phi,y")?;
        for t in 0..self.len() {
            for (i, z) in self.locations.iter().enumerate() {
                writeln!(
                    out,
                    "{t},{i},{:.12},{:.12},{:.12e}",
                    z.colatitude(),
                    z.longitude(),
                    self.values[(t, i)]
                )?;
            }
        }
        Ok(())
    }
}

/// `M` i.i.d. uniform points on the sphere (normalized Gaussian vectors).
pub fn sample_uniform_sphere(count: usize, seed: u64) -> Result<Vec<SpherePoint>> {
    if count == 0 {
        return Err(LrdError::InvalidArgument(
            "need at least one location".into(),
        ));
    }
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: [f64; 3] = [
            r.sample(StandardNormal),
            r.sample(StandardNormal),
            r.sample(StandardNormal),
        ];
        if let Ok(p) = SpherePoint::normalized(v) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `max(1, ⌊T^{2γ}⌋)`.
pub fn spatial_budget(len: usize, gamma: f64) -> usize {
    spatial_budget_with_exponent(len, 2.0 * gamma)
}

/// `max(1, ⌊T^{exponent}⌋)`.
pub fn spatial_budget_with_exponent(len: usize, exponent: f64) -> usize {
    let m = (len as f64).powf(exponent);
    // Guard against values like 99.99999999 from powf when T^e is an integer.
    let rounded = m.round();
    let m = if (m - rounded).abs() < 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        m.floor()
    };
    (m as usize).max(1)
}

/// Basis matrix `M × k` with row `i` the harmonics at `locations[i]`.
pub(crate) fn basis_rows(locations: &[SpherePoint], max_degree: usize) -> DMatrix<f64> {
    let k = (max_degree + 1) * (max_degree + 1);
    let mut b = DMatrix::zeros(locations.len(), k);
    let mut row = vec![0.0; k];
    for (i, z) in locations.iter().enumerate() {
        evaluate_basis_into(z, max_degree, &mut row);
        for (j, v) in row.iter().enumerate() {
            b[(i, j)] = *v;
        }
    }
    b
}

/// `Y_t(Z_i) = Σ X_{nj}(t) S_{nj}(Z_i) + ε_{i,t}` with `ε ~ N(0, σ²)` i.i.d.
pub fn observe(
    series: &CoefficientSeries,
    locations: &[SpherePoint],
    noise_variance: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if locations.is_empty() {
        return Err(LrdError::InvalidArgument("no observation locations".into()));
    }
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(LrdError::InvalidArgument(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    let b = basis_rows(locations, series.sieve().max_degree());
    let mut values = series.values() * b.transpose();
    if noise_variance > 0.0 {
        let sd = noise_variance.sqrt();
        let mut r = rng(seed);
        // Column-major fill: location by location, time within location.
        for v in values.iter_mut() {
            *v += sd * r.sample::<f64, _>(StandardNormal);
        }
    }
    ObservationSet::new(locations.to_vec(), values, noise_variance)
}

/// Variant drawing a fresh design at every time step; returns one set per `t`.
pub fn observe_redrawn(
    series: &CoefficientSeries,
    count: usize,
    noise_variance: f64,
    seed: u64,
) -> Result<Vec<ObservationSet>> {
    (0..series.len())
        .map(|t| {
            let locs = sample_uniform_sphere(count, crate::seed::child_seed(seed, 2 * t as u64))?;
            let row = series.values().rows(t, 1).into_owned();
            let snap = CoefficientSeries::new(series.sieve(), row)?;
            observe(&snap, &locs, noise_variance, crate::seed::child_seed(seed, 2 * t as u64 + 1))
        })
        .collect()
}
