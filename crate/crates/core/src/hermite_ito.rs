//! Hermite polynomials with a variance parameter and the Gaussian Radon
//! transform of multiple Itô integrals on single-point bridges.
//!
//! `H_n(x; u²)` is defined by `exp(t x - u² t² / 2) = Σ tⁿ/n! H_n(x; u²)`.
//! For `f ∈ L²[0,1]`, `J_n(f^{⊗n}) = H_n(∫ f dB; ‖f‖²)`, and on
//! `L_T(c) = {h(T) = c}` its transform is `(∫_0^T f)ⁿ H_n(c/T; 1/T)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cm_space::CmVector;
use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 60;

pub(crate) fn check_degree(n: usize) -> Result<()> {
    if n > MAX_DEGREE {
        return Err(Error::DegreeTooLarge(n));
    }
    Ok(())
}

fn check_u2(u2: f64) -> Result<()> {
    if !(u2 >= 0.0) {
        return Err(Error::NegativeVarianceParameter(u2));
    }
    Ok(())
}

/// `H_n(x; u²)` via `H_{k+1} = x H_k - k u² H_{k-1}`.
pub fn hermite(n: usize, x: f64, u2: f64) -> Result<f64> {
    check_degree(n)?;
    check_u2(u2)?;
    Ok(hermite_unchecked(n, x, u2))
}

pub(crate) fn hermite_unchecked(n: usize, x: f64, u2: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * u2 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[H_0(x; u²), ..., H_n(x; u²)]`.
pub fn hermite_sequence(n: usize, x: f64, u2: f64) -> Result<Vec<f64>> {
    check_degree(n)?;
    check_u2(u2)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 1..n {
        out.push(x * out[k] - k as f64 * u2 * out[k - 1]);
    }
    Ok(out)
}

/// Nodes and weights of `count`-point Gauss–Hermite quadrature for the
/// standard normal weight `exp(-x²/2)/√(2π)` (Golub–Welsch).
pub fn gauss_hermite(count: usize) -> (Vec<f64>, Vec<f64>) {
    if count == 0 {
        return (Vec::new(), Vec::new());
    }
    let jacobi = DMatrix::from_fn(count, count, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eigen = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..count)
        .map(|k| (eigen.eigenvalues[k], eigen.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Outcome of `E[H_n(X; u²)] = H_n(E X; u² - var X)` for `X ~ N(mean, var_x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOfVariance {
    /// Quadrature value of `E[H_n(X; u²)]`.
    pub lhs: f64,
    /// `H_n(mean; u² - var_x)`.
    pub rhs: f64,
    /// `E|H_n(X; u²)|` by the same quadrature, the natural size of both sides.
    pub scale: f64,
}

impl ShiftOfVariance {
    pub fn holds(&self, rel_tol: f64) -> bool {
        (self.lhs - self.rhs).abs() <= rel_tol * self.scale.max(1.0)
    }
}

pub fn shift_of_variance_check(
    n: usize,
    mean: f64,
    var_x: f64,
    u2: f64,
) -> Result<ShiftOfVariance> {
    check_degree(n)?;
    check_u2(var_x)?;
    if u2 < var_x {
        return Err(Error::VarianceOrder { u2, var_x });
    }
    let nodes = (n + 2).div_ceil(2) + 4;
    let (xs, ws) = gauss_hermite(nodes);
    let sd = var_x.sqrt();
    let (mut lhs, mut scale) = (0.0, 0.0);
    for (x, w) in xs.iter().zip(&ws) {
        let value = hermite_unchecked(n, mean + sd * x, u2);
        lhs += w * value;
        scale += w * value.abs();
    }
    let rhs = hermite_unchecked(n, mean, u2 - var_x);
    Ok(ShiftOfVariance { lhs, rhs, scale })
}

fn check_bridge_point(f: &CmVector, big_t: f64) -> Result<()> {
    if big_t == 0.0 {
        return Err(Error::BadT);
    }
    if !(big_t > 0.0 && big_t <= 1.0) {
        return Err(Error::TimeOutOfRange(big_t));
    }
    f.grid().knot_index(big_t)?;
    Ok(())
}

/// `GJ_n(f^{⊗n})|_{L_T(c)} = (∫_0^T f)ⁿ H_n(c/T; 1/T)`.
pub fn grt_power_ito(f: &CmVector, n: usize, big_t: f64, c: f64) -> Result<f64> {
    check_degree(n)?;
    check_bridge_point(f, big_t)?;
    let integral = f.evaluate(big_t)?;
    Ok(integral.powi(n as i32) * hermite_unchecked(n, c / big_t, 1.0 / big_t))
}

/// Symmetrized product kernel `f_1 ⊗̂ ... ⊗̂ f_n`.
///
/// `J_n` only sees the symmetrization, so `symmetrized` records how the
/// factors were supplied and does not change any transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductFunctional {
    factors: Vec<CmVector>,
    pub symmetrized: bool,
}

impl ProductFunctional {
    pub fn new(factors: Vec<CmVector>, symmetrized: bool) -> Result<Self> {
        let first = factors.first().ok_or(Error::EmptyProduct)?;
        let grid = first.grid();
        if let Some(other) = factors.iter().find(|f| f.grid() != grid) {
            return Err(Error::GridMismatch {
                left: grid.n_steps(),
                right: other.grid().n_steps(),
            });
        }
        Ok(Self {
            factors,
            symmetrized,
        })
    }

    /// `f^{⊗n}`.
    pub fn power(f: CmVector, n: usize) -> Result<Self> {
        Self::new(vec![f; n], true)
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[CmVector] {
        &self.factors
    }

    /// `∫_{[0,T]ⁿ} f_1(t_1) ... f_n(t_n) dt = Π_j ∫_0^T f_j`.
    pub fn box_integral(&self, big_t: f64) -> Result<f64> {
        self.factors.iter().map(|f| f.evaluate(big_t)).product()
    }
}

/// `GJ_n(F)|_{L_T(c)} = (∫_{[0,T]ⁿ} F) H_n(c/T; 1/T)` for a product kernel.
pub fn grt_symmetric_ito(kernel: &ProductFunctional, big_t: f64, c: f64) -> Result<f64> {
    let n = kernel.degree();
    check_degree(n)?;
    check_bridge_point(&kernel.factors[0], big_t)?;
    Ok(kernel.box_integral(big_t)? * hermite_unchecked(n, c / big_t, 1.0 / big_t))
}

/// Transform of `J_n(Σ a_i F_i)` for product kernels `F_i` of a common degree.
pub fn grt_ito_combination(terms: &[(f64, ProductFunctional)], big_t: f64, c: f64) -> Result<f64> {
    let (_, first) = terms.first().ok_or(Error::EmptyProduct)?;
    if terms.iter().any(|(_, k)| k.degree() != first.degree()) {
        return Err(Error::DegreeMismatch);
    }
    let mut total = 0.0;
    for (a, kernel) in terms {
        total += a * grt_symmetric_ito(kernel, big_t, c)?;
    }
    Ok(total)
}

/// Transforms of the chaos terms of `exp(I(h) - ‖h‖²/2) = Σ J_n(ḣ^{⊗n})/n!`
/// on `L_T(c)`: entry `n` is `grt_power_ito(ḣ, n, T, c) / n!`, for `n = 0..=max_order`.
///
/// Partial sums converge to `exp(<h_L,h> + ‖P h‖²/2 - ‖h‖²/2)`.
pub fn chaos_expansion_coeffs(
    h: &CmVector,
    max_order: usize,
    big_t: f64,
    c: f64,
) -> Result<Vec<f64>> {
    check_degree(max_order)?;
    check_bridge_point(h, big_t)?;
    let a = h.evaluate(big_t)?;
    let hs = hermite_sequence(max_order, c / big_t, 1.0 / big_t)?;
    let mut out = Vec::with_capacity(max_order + 1);
    let mut power_over_factorial = 1.0;
    for (n, value) in hs.iter().enumerate() {
        if n > 0 {
            power_over_factorial *= a / n as f64;
        }
        out.push(power_over_factorial * value);
    }
    Ok(out)
}
