//! Real spherical harmonics on the unit 2-sphere.
//!
//! The basis is orthonormal under the normalized surface measure (total
//! mass one), so the degree-0 harmonic is identically 1. Within degree `n`
//! the orders `j = 1..=2n+1` correspond to azimuthal numbers
//! `m = j - n - 1 ∈ -n..=n`: negative `m` carry `sin(|m|φ)`, positive `m`
//! carry `cos(mφ)`.
//!
//! Harmonics are flattened as `n² + (j - 1)`, so a sieve of maximal degree
//! `N` spans exactly `(N + 1)²` functions.

use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{LrdError, Result};

const UNIT_NORM_TOL: f64 = 1e-12;

/// Dimension of the degree-`n` eigenspace of the Laplace–Beltrami operator on the 2-sphere.
pub fn multiplicity(degree: usize) -> usize {
    2 * degree + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    degree: usize,
    order: usize,
}

impl HarmonicIndex {
    /// `order` is 1-based and must lie in `1..=2n+1`.
    pub fn new(degree: usize, order: usize) -> Result<Self> {
        if order == 0 || order > multiplicity(degree) {
            return Err(LrdError::InvalidArgument(format!(
                "order {order} outside 1..={} for degree {degree}",
                multiplicity(degree)
            )));
        }
        Ok(Self { degree, order })
    }

    pub fn from_flat(index: usize) -> Self {
        let degree = isqrt(index);
        Self {
            degree,
            order: index - degree * degree + 1,
        }
    }

    pub fn flat(&self) -> usize {
        self.degree * self.degree + self.order - 1
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Azimuthal number `m ∈ -n..=n`.
    pub fn azimuthal(&self) -> i64 {
        self.order as i64 - 1 - self.degree as i64
    }
}

fn isqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

/// Truncated harmonic basis holding every eigenspace up to `max_degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SieveBasis {
    max_degree: usize,
}

impl SieveBasis {
    pub fn new(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn size(&self) -> usize {
        (self.max_degree + 1) * (self.max_degree + 1)
    }

    /// Flat index range of the degree-`n` eigenspace.
    pub fn degree_range(&self, degree: usize) -> Range<usize> {
        degree * degree..(degree + 1) * (degree + 1)
    }

    pub fn contains(&self, index: HarmonicIndex) -> bool {
        index.degree() <= self.max_degree
    }

    pub fn indices(&self) -> impl Iterator<Item = HarmonicIndex> {
        (0..self.size()).map(HarmonicIndex::from_flat)
    }

    pub fn evaluate(&self, point: &SpherePoint) -> Vec<f64> {
        evaluate_basis(point, self.max_degree)
    }
}

/// Largest full-eigenspace sieve whose size does not exceed `k_target`.
///
/// A budget of zero is treated as one (the constant function is always kept).
pub fn sieve_from_budget(k_target: usize) -> SieveBasis {
    let root = isqrt(k_target.max(1));
    SieveBasis::new(root - 1)
}

/// A point on the unit sphere, stored as a Cartesian unit vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    xyz: [f64; 3],
}

impl SpherePoint {
    /// Rejects vectors whose norm differs from 1 by more than `1e-12`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(LrdError::NotOnSphere { norm });
        }
        Ok(Self { xyz: [x, y, z] })
    }

    /// Projects a non-zero vector radially onto the sphere.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(LrdError::NotOnSphere { norm });
        }
        Ok(Self {
            xyz: [v[0] / norm, v[1] / norm, v[2] / norm],
        })
    }

    pub fn from_angles(colatitude: f64, longitude: f64) -> Self {
        let (st, ct) = colatitude.sin_cos();
        let (sp, cp) = longitude.sin_cos();
        Self {
            xyz: [st * cp, st * sp, ct],
        }
    }

    pub fn xyz(&self) -> [f64; 3] {
        self.xyz
    }

    /// θ ∈ [0, π].
    pub fn colatitude(&self) -> f64 {
        self.xyz[2].clamp(-1.0, 1.0).acos()
    }

    /// φ ∈ [0, 2π).
    pub fn longitude(&self) -> f64 {
        let phi = self.xyz[1].atan2(self.xyz[0]);
        if phi < 0.0 {
            (phi + 2.0 * PI) % (2.0 * PI)
        } else {
            phi
        }
    }
}

/// Real spherical harmonics up to `max_degree` at `point`, flattened.
///
/// Entry 0 is exactly 1.
pub fn evaluate_basis(point: &SpherePoint, max_degree: usize) -> Vec<f64> {
    let mut out = vec![0.0; (max_degree + 1) * (max_degree + 1)];
    evaluate_basis_into(point, max_degree, &mut out);
    out
}

/// Allocation-free variant of [`evaluate_basis`]; `out` must hold `(N+1)²` values.
pub fn evaluate_basis_into(point: &SpherePoint, max_degree: usize, out: &mut [f64]) {
    let size = (max_degree + 1) * (max_degree + 1);
    assert_eq!(out.len(), size, "output buffer has wrong length");

    let [x, y, z] = point.xyz;
    let cos_t = z.clamp(-1.0, 1.0);
    let sin_t = (x * x + y * y).sqrt();
    let phi = y.atan2(x);

    let legendre = normalized_legendre(max_degree, cos_t, sin_t);
    for n in 0..=max_degree {
        let base = n * n + n; // flat index of m = 0
        out[base] = legendre[tri(n, 0)];
        for m in 1..=n {
            let p = SQRT_2 * legendre[tri(n, m)];
            let (s, c) = (m as f64 * phi).sin_cos();
            out[base + m] = p * c;
            out[base - m] = p * s;
        }
    }
}

#[inline]
fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// `sqrt((2n+1)(n-m)!/(n+m)!) P_n^m(cos θ)` for `0 ≤ m ≤ n ≤ max_degree`,
/// without the Condon–Shortley phase, in triangular storage.
fn normalized_legendre(max_degree: usize, cos_t: f64, sin_t: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri(max_degree, max_degree) + 1];
    p[0] = 1.0;
    for m in 0..=max_degree {
        if m > 0 {
            let mf = m as f64;
            p[tri(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t * p[tri(m - 1, m - 1)];
        }
        if m < max_degree {
            p[tri(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_t * p[tri(m, m)];
        }
        for n in m + 2..=max_degree {
            let nf = n as f64;
            let mf = m as f64;
            let denom = nf * nf - mf * mf;
            let a = ((4.0 * nf * nf - 1.0) / denom).sqrt();
            let b = ((2.0 * nf + 1.0) * ((nf - 1.0) * (nf - 1.0) - mf * mf)
                / ((2.0 * nf - 3.0) * denom))
                .sqrt();
            p[tri(n, m)] = a * cos_t * p[tri(n - 1, m)] - b * p[tri(n - 2, m)];
        }
    }
    p
}
