//! Finite-codimension affine subspaces `L = F⁻¹(c)` with
//! `F(h) = (<v_1, h>, ..., <v_m, h>)`.
//!
//! The point of `L` closest to the origin is `h_L = F*(FF*)⁻¹ c = Σ a_k v_k`
//! with `a = (FF*)⁻¹ c`, and `P_{L0} h = h - F*(FF*)⁻¹ F h` is the orthogonal
//! projection onto the direction space `L0 = L - h_L`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cm_space::{CmVector, Grid};
use crate::error::{Error, Result};

/// A Gram matrix whose smallest eigenvalue is at most this fraction of the
/// largest is treated as singular.
pub const SINGULARITY_RATIO: f64 = 1e-10;

/// `{h : <v_j, h> = c_j, j = 1..m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace {
    grid: Grid,
    constraints: Vec<CmVector>,
    levels: Vec<f64>,
}

impl AffineSubspace {
    pub fn new(constraints: Vec<CmVector>, levels: Vec<f64>) -> Result<Self> {
        let first = constraints.first().ok_or(Error::NoConstraints)?;
        if constraints.len() != levels.len() {
            return Err(Error::LevelCountMismatch {
                constraints: constraints.len(),
                levels: levels.len(),
            });
        }
        let grid = first.grid();
        if let Some(other) = constraints.iter().find(|v| v.grid() != grid) {
            return Err(Error::GridMismatch {
                left: grid.n_steps(),
                right: other.grid().n_steps(),
            });
        }
        Ok(Self {
            grid,
            constraints,
            levels,
        })
    }

    /// Paths pinned at `h(T_k) = c_k`, with `0 < T_1 < ... < T_m <= 1` on knots.
    pub fn bridge(times: &[f64], levels: &[f64], grid: Grid) -> Result<Self> {
        check_bridge_times(times)?;
        let constraints = times
            .iter()
            .map(|&t| CmVector::kernel(t, grid))
            .collect::<Result<Vec<_>>>()?;
        Self::new(constraints, levels.to_vec())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn constraints(&self) -> &[CmVector] {
        &self.constraints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn codimension(&self) -> usize {
        self.constraints.len()
    }

    /// `F(h)`.
    pub fn apply(&self, h: &CmVector) -> Result<Vec<f64>> {
        self.constraints.iter().map(|v| v.inner(h)).collect()
    }

    /// `FF*`, entry `(j, k) = <v_k, v_j>`.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let m = self.constraints.len();
        let mut gram = DMatrix::zeros(m, m);
        for j in 0..m {
            for k in 0..=j {
                let value = self.constraints[k].inner_unchecked(&self.constraints[j]);
                gram[(j, k)] = value;
                gram[(k, j)] = value;
            }
        }
        gram
    }

    /// Closest point to the origin together with the data that fixes every
    /// conditioned law on this subspace.
    pub fn closest_point(&self) -> Result<ConditionedLaw> {
        let gram = self.gram_matrix();
        let gram_inverse = symmetric_inverse(&gram)?;
        let levels = DVector::from_column_slice(&self.levels);
        let coefficients: Vec<f64> = (&gram_inverse * levels).iter().copied().collect();
        let terms: Vec<(f64, &CmVector)> = coefficients
            .iter()
            .copied()
            .zip(self.constraints.iter())
            .collect();
        let h_l = CmVector::linear_combination(self.grid, &terms)?;
        Ok(ConditionedLaw {
            subspace: self.clone(),
            h_l,
            gram,
            gram_inverse,
            coefficients,
        })
    }
}

pub(crate) fn check_bridge_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::NoConstraints);
    }
    let mut previous = 0.0;
    for &t in times {
        if !(t > previous) || t > 1.0 {
            return Err(Error::TimesNotIncreasing);
        }
        previous = t;
    }
    Ok(())
}

/// Inverse of a symmetric positive-definite matrix by eigendecomposition,
/// refusing near-singular input.
pub fn symmetric_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eigen = SymmetricEigen::new(matrix.clone());
    let largest = eigen.eigenvalues.max();
    let smallest = eigen.eigenvalues.min();
    if !(largest > 0.0) || smallest <= SINGULARITY_RATIO * largest {
        return Err(Error::SingularGram { smallest, largest });
    }
    let q = &eigen.eigenvectors;
    let scaled = DMatrix::from_fn(n, n, |i, j| q[(i, j)] / eigen.eigenvalues[j]);
    let inverse = scaled * q.transpose();
    Ok((&inverse + inverse.transpose()) * 0.5)
}

/// Everything needed to describe `μ_L`: `h_L`, the Gram matrix and its
/// inverse, and the expansion `h_L = Σ a_k v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedLaw {
    subspace: AffineSubspace,
    h_l: CmVector,
    gram: DMatrix<f64>,
    gram_inverse: DMatrix<f64>,
    coefficients: Vec<f64>,
}

impl ConditionedLaw {
    /// Plain Wiener measure on `grid`: no constraints, `h_L = 0`, `P = I`.
    pub fn unconditioned(grid: Grid) -> Self {
        Self {
            subspace: AffineSubspace {
                grid,
                constraints: Vec::new(),
                levels: Vec::new(),
            },
            h_l: CmVector::zeros(grid),
            gram: DMatrix::zeros(0, 0),
            gram_inverse: DMatrix::zeros(0, 0),
            coefficients: Vec::new(),
        }
    }

    pub fn subspace(&self) -> &AffineSubspace {
        &self.subspace
    }

    pub fn grid(&self) -> Grid {
        self.subspace.grid
    }

    pub fn h_l(&self) -> &CmVector {
        &self.h_l
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn is_unconditioned(&self) -> bool {
        self.subspace.constraints.is_empty()
    }

    /// `P_{L0} h = h - Σ_{j,k} [(FF*)⁻¹]_{jk} <v_k, h> v_j`.
    pub fn project(&self, h: &CmVector) -> Result<CmVector> {
        let f_h = DVector::from_vec(self.subspace.apply(h)?);
        let weights = &self.gram_inverse * f_h;
        let mut out = h.clone();
        for (w, v) in weights.iter().zip(&self.subspace.constraints) {
            out.axpy(-w, v)?;
        }
        Ok(out)
    }

    /// Residual `‖h - P h‖` used to test membership in `L0`.
    pub fn distance_from_l0(&self, h: &CmVector) -> Result<f64> {
        Ok(h.sub(&self.project(h)?)?.norm())
    }
}

/// Orthonormal re-description of the multi-bridge subspace
/// `{h(T_k) = c_k}`: `w_1 = K_{T_1}/√T_1`,
/// `w_k = (K_{T_k} - K_{T_{k-1}})/√(T_k - T_{k-1})`, with levels
/// `b_k = (c_k - c_{k-1})/√(T_k - T_{k-1})`.
pub fn orthonormal_bridge_basis(
    times: &[f64],
    levels: &[f64],
    grid: Grid,
) -> Result<(Vec<CmVector>, Vec<f64>)> {
    check_bridge_times(times)?;
    if times.len() != levels.len() {
        return Err(Error::LevelCountMismatch {
            constraints: times.len(),
            levels: levels.len(),
        });
    }
    let mut vectors = Vec::with_capacity(times.len());
    let mut rhs = Vec::with_capacity(times.len());
    let (mut prev_t, mut prev_c) = (0.0, 0.0);
    let mut prev_kernel = CmVector::zeros(grid);
    for (&t, &c) in times.iter().zip(levels) {
        let kernel = CmVector::kernel(t, grid)?;
        let width = (t - prev_t).sqrt();
        vectors.push(kernel.sub(&prev_kernel)?.scaled(1.0 / width));
        rhs.push((c - prev_c) / width);
        prev_t = t;
        prev_c = c;
        prev_kernel = kernel;
    }
    Ok((vectors, rhs))
}
