//! Closed-form Gaussian Radon transforms of linear functionals.
//!
//! Under `μ_L` the Wiener integral `I_L(h)` is Gaussian with mean
//! `<h_L, h>` and variance `‖P_{L0} h‖²`; everything in this module is a
//! consequence of those two numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::affine::{check_bridge_times, ConditionedLaw};
use crate::cm_space::CmVector;
use crate::error::{Error, Result};

/// Computed variances in `[-VARIANCE_CLAMP, 0)` are rounded up to zero.
pub const VARIANCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw1D {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianLaw1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let variance = if variance < 0.0 {
            if variance >= -VARIANCE_CLAMP {
                0.0
            } else {
                return Err(Error::NumericalInconsistency(variance));
            }
        } else {
            variance
        };
        Ok(Self { mean, variance })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// `GI(h)|_L = <h_L, h>`.
pub fn grt_linear(law: &ConditionedLaw, h: &CmVector) -> Result<f64> {
    law.h_l().inner(h)
}

/// Law of `I_L(h)` under `μ_L`.
pub fn conditioned_law(law: &ConditionedLaw, h: &CmVector) -> Result<GaussianLaw1D> {
    let mean = grt_linear(law, h)?;
    let variance = law.project(h)?.norm_sq();
    GaussianLaw1D::new(mean, variance)
}

/// `Cov(I_L(h1), I_L(h2)) = <P h1, P h2>`.
pub fn conditioned_cov(law: &ConditionedLaw, h1: &CmVector, h2: &CmVector) -> Result<f64> {
    let p1 = law.project(h1)?;
    if h1 == h2 {
        return Ok(p1.norm_sq());
    }
    let p2 = law.project(h2)?;
    p1.inner(&p2)
}

/// Covariance matrix of `(I_L(h_1), ..., I_L(h_k))`.
pub fn conditioned_cov_matrix(law: &ConditionedLaw, hs: &[CmVector]) -> Result<Vec<Vec<f64>>> {
    let projected = hs
        .iter()
        .map(|h| law.project(h))
        .collect::<Result<Vec<_>>>()?;
    let k = projected.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let value = projected[i].inner(&projected[j])?;
            out[i][j] = value;
            out[j][i] = value;
        }
    }
    Ok(out)
}

/// `E[exp(z I_L(h))] = exp(z <h_L, h> + z²/2 ‖P h‖²)` for complex `z`.
pub fn exponential_moment(law: &ConditionedLaw, h: &CmVector, z: Complex64) -> Result<Complex64> {
    let g = conditioned_law(law, h)?;
    Ok((z * g.mean + z * z * (0.5 * g.variance)).exp())
}

/// Mean of `∫ f dB` on the multi-bridge `{B(T_k) = c_k}` by direct piecewise
/// integration of `f`:
/// `(c_1/T_1) ∫_0^{T_1} f + Σ_k (c_k - c_{k-1})/(T_k - T_{k-1}) ∫_{T_{k-1}}^{T_k} f`.
pub fn multi_bridge_mean(times: &[f64], levels: &[f64], f: &CmVector) -> Result<f64> {
    check_bridge_times(times)?;
    if times.len() != levels.len() {
        return Err(Error::LevelCountMismatch {
            constraints: times.len(),
            levels: levels.len(),
        });
    }
    let grid = f.grid();
    let deriv = f.deriv();
    let dt = grid.dt();
    let mut total = 0.0;
    let (mut prev_t, mut prev_c, mut prev_idx) = (0.0, 0.0, 0usize);
    for (&t, &c) in times.iter().zip(levels) {
        let idx = grid.knot_index(t)?;
        let piece: f64 = deriv[prev_idx..idx].iter().sum::<f64>() * dt;
        total += (c - prev_c) / (t - prev_t) * piece;
        prev_t = t;
        prev_c = c;
        prev_idx = idx;
    }
    Ok(total)
}
