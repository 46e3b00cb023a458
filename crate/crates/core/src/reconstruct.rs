//! Series least-squares reconstruction of the curves from discrete data.

use nalgebra::{DMatrix, DVector};

use crate::error::{LrdError, Result};
use crate::harmonics::{SieveBasis, SpherePoint};
use crate::observe::{basis_rows, ObservationSet};
use crate::simulate::CoefficientSeries;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Harmonics of `sieve` evaluated at the observation points, `M × k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    b: DMatrix<f64>,
    sieve: SieveBasis,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sieve(&self) -> SieveBasis {
        self.sieve
    }

    pub fn num_locations(&self) -> usize {
        self.b.nrows()
    }
}

pub fn design_matrix(locations: &[SpherePoint], sieve: SieveBasis) -> Result<DesignMatrix> {
    if locations.is_empty() {
        return Err(LrdError::InvalidArgument("no observation locations".into()));
    }
    Ok(DesignMatrix {
        b: basis_rows(locations, sieve.max_degree()),
        sieve,
    })
}

/// `‖BᵀB/M − I‖_F²`.
pub fn mass_matrix_deviation(design: &DesignMatrix) -> f64 {
    let m = design.num_locations() as f64;
    let mut g = design.b.tr_mul(&design.b) / m;
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    g.norm_squared()
}

/// Factorized design: the Moore-Penrose pseudo-inverse, computed once.
#[derive(Clone, Debug)]
pub struct Reconstructor {
    sieve: SieveBasis,
    pinv: DMatrix<f64>,
    rank: usize,
}

impl Reconstructor {
    pub fn new(design: &DesignMatrix) -> Self {
        let b = &design.b;
        let k = b.ncols();
        let svd = b.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = PINV_CUTOFF * smax;
        let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        let pinv = if smax > 0.0 {
            svd.pseudo_inverse(cutoff).expect("u and v were computed")
        } else {
            DMatrix::zeros(k, b.nrows())
        };
        Self {
            sieve: design.sieve,
            pinv,
            rank,
        }
    }

    /// `k × M` pseudo-inverse of the design.
    pub fn pseudo_inverse(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when the design does not identify every coefficient.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.sieve.size()
    }

    pub fn snapshot(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.pinv.ncols() {
            return Err(LrdError::Dimension(format!(
                "snapshot has {} values, design has {} locations",
                y.len(),
                self.pinv.ncols()
            )));
        }
        Ok((&self.pinv * DVector::from_column_slice(y)).as_slice().to_vec())
    }

    pub fn series(&self, obs: &ObservationSet) -> Result<CoefficientSeries> {
        if obs.num_locations() != self.pinv.ncols() {
            return Err(LrdError::Dimension(format!(
                "observations have {} locations, design has {}",
                obs.num_locations(),
                self.pinv.ncols()
            )));
        }
        CoefficientSeries::new(self.sieve, obs.values() * self.pinv.transpose())
    }
}

/// Minimum-norm least-squares coefficients of one snapshot.
pub fn reconstruct_snapshot(y: &[f64], design: &DesignMatrix) -> Result<Vec<f64>> {
    Reconstructor::new(design).snapshot(y)
}

/// Reconstructs every time step with one factorization of the design.
pub fn reconstruct_series(obs: &ObservationSet, sieve: SieveBasis) -> Result<CoefficientSeries> {
    let design = design_matrix(obs.locations(), sieve)?;
    Reconstructor::new(&design).series(obs)
}
