//! Truncated symmetric Fock space over a finite orthonormal family in `L0`,
//! and numerical certificates that `Exp(v) ↦ exp(I_L(v) - ‖v‖²/2)` is
//! isometric.
//!
//! A symmetric `n`-tensor over modes `e_1..e_d` is stored in the
//! occupation-number basis: `x_n = Σ_{|α|=n} x_α S_α`, where `S_α` is the sum
//! of the `n!/α!` distinct orderings of `e_1^{⊗α_1} ⊗ ... ⊗ e_d^{⊗α_d}`. Then
//! `<S_α, S_β>_n = δ_{αβ} n!/α!`, `v^{⊗n} = Σ_α v^α S_α`, and
//! `<v^{⊗n}, w^{⊗n}>_n = <v, w>ⁿ`. The Fock inner product weights order `n`
//! by `n!`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::affine::ConditionedLaw;
use crate::cm_space::CmVector;
use crate::error::{Error, Result};
use crate::grt::{conditioned_law, exponential_moment};
use crate::mc_oracle::{Comparison, Functional, MonteCarlo};

pub const MAX_MODES: usize = 8;
pub const MAX_ORDER: usize = 30;
/// Upper bound on stored coefficients across all orders.
pub const MAX_COEFFICIENTS: usize = 1 << 22;
/// Tolerance for the closed-form identities checked here.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Relative slack when testing that a vector lies in `L0`.
const L0_TOLERANCE: f64 = 1e-9;

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Multi-indices `α ∈ N^d` with `|α| = n`, in lexicographic order.
fn multi_indices(d: usize, n: usize) -> Vec<Vec<u8>> {
    fn fill(d: usize, remaining: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == d {
            prefix.push(remaining as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k as u8);
            fill(d, remaining - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    fill(d, n, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Truncated Fock space `⊕_{n<=N} span{e_i}^{⊗̂n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFock {
    base: Vec<CmVector>,
    max_order: usize,
    indices: Vec<Vec<Vec<u8>>>,
    /// `n! · n!/α!` for each stored coefficient.
    weights: Vec<Vec<f64>>,
}

impl TruncatedFock {
    pub fn new(base: Vec<CmVector>, max_order: usize) -> Result<Arc<Self>> {
        let d = base.len();
        if d == 0 || d > MAX_MODES {
            return Err(Error::FockTooLarge {
                reason: format!("{d} modes (allowed 1..={MAX_MODES})"),
            });
        }
        if max_order > MAX_ORDER {
            return Err(Error::FockTooLarge {
                reason: format!("order {max_order} (allowed up to {MAX_ORDER})"),
            });
        }
        let total = binomial(max_order + d, d);
        if total > MAX_COEFFICIENTS {
            return Err(Error::FockTooLarge {
                reason: format!("{total} coefficients (allowed up to {MAX_COEFFICIENTS})"),
            });
        }
        let mut deviation = 0.0f64;
        for (i, a) in base.iter().enumerate() {
            for (j, b) in base.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((a.inner(b)? - target).abs());
            }
        }
        if deviation > 1e-10 {
            return Err(Error::BaseNotOrthonormal(deviation));
        }
        let indices: Vec<_> = (0..=max_order).map(|n| multi_indices(d, n)).collect();
        let weights = indices
            .iter()
            .enumerate()
            .map(|(n, alphas)| {
                let nf = factorial(n);
                alphas
                    .iter()
                    .map(|alpha| {
                        let alpha_factorial: f64 =
                            alpha.iter().map(|&a| factorial(a as usize)).product();
                        nf * nf / alpha_factorial
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(Self {
            base,
            max_order,
            indices,
            weights,
        }))
    }

    pub fn modes(&self) -> usize {
        self.base.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn base(&self) -> &[CmVector] {
        &self.base
    }

    /// Number of stored coefficients at order `n`: `C(n + d - 1, n)`.
    pub fn order_dimension(&self, n: usize) -> usize {
        self.indices[n].len()
    }

    /// Coordinates `<e_i, v>` of `v` in the base.
    pub fn coordinates(&self, v: &CmVector) -> Result<Vec<f64>> {
        self.base.iter().map(|e| e.inner(v)).collect()
    }

    /// `Σ coords_i e_i`.
    pub fn embed(&self, coords: &[f64]) -> Result<CmVector> {
        let grid = self.base[0].grid();
        let terms: Vec<(f64, &CmVector)> = coords.iter().copied().zip(self.base.iter()).collect();
        CmVector::linear_combination(grid, &terms)
    }

    pub fn zero(self: &Arc<Self>) -> FockVector {
        FockVector {
            space: Arc::clone(self),
            coeffs: self.indices.iter().map(|a| vec![0.0; a.len()]).collect(),
        }
    }

    /// The order-zero unit `1`.
    pub fn vacuum(self: &Arc<Self>) -> FockVector {
        let mut out = self.zero();
        out.coeffs[0][0] = 1.0;
        out
    }

    fn monomials(&self, n: usize, v: &[f64]) -> Vec<f64> {
        self.indices[n]
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .zip(v)
                    .map(|(&a, x)| x.powi(a as i32))
                    .product()
            })
            .collect()
    }

    fn check_coords(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.modes() {
            return Err(Error::LengthMismatch {
                expected: self.modes(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `v^{⊗n}` placed at order `n`.
    pub fn tensor_power(self: &Arc<Self>, v: &[f64], n: usize) -> Result<FockVector> {
        self.check_coords(v)?;
        if n > self.max_order {
            return Err(Error::FockTooLarge {
                reason: format!("order {n} beyond truncation"),
            });
        }
        let mut out = self.zero();
        out.coeffs[n] = self.monomials(n, v);
        Ok(out)
    }

    /// `Exp(v) = Σ_{n<=N} v^{⊗n}/n!`.
    pub fn exp_vector(self: &Arc<Self>, v: &[f64]) -> Result<FockVector> {
        self.check_coords(v)?;
        let coeffs = (0..=self.max_order)
            .map(|n| {
                let scale = 1.0 / factorial(n);
                self.monomials(n, v)
                    .into_iter()
                    .map(|x| x * scale)
                    .collect()
            })
            .collect();
        Ok(FockVector {
            space: Arc::clone(self),
            coeffs,
        })
    }
}

/// Element of a [`TruncatedFock`] space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    space: Arc<TruncatedFock>,
    coeffs: Vec<Vec<f64>>,
}

impl FockVector {
    fn check_space(&self, other: &FockVector) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::BaseMismatch)
        }
    }

    pub fn coefficients(&self, n: usize) -> &[f64] {
        &self.coeffs[n]
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &FockVector, b: f64) -> Result<FockVector> {
        self.check_space(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        Ok(FockVector {
            space: Arc::clone(&self.space),
            coeffs,
        })
    }
}

/// `Σ_n n! <x_n, y_n>_n`.
pub fn fock_inner(x: &FockVector, y: &FockVector) -> Result<f64> {
    x.check_space(y)?;
    let mut total = 0.0;
    for ((xs, ys), ws) in x.coeffs.iter().zip(&y.coeffs).zip(&x.space.weights) {
        total += xs
            .iter()
            .zip(ys)
            .zip(ws)
            .map(|((a, b), w)| w * a * b)
            .sum::<f64>();
    }
    Ok(total)
}

/// Tail bound `Σ_{n>N} |s|ⁿ/n!` for the truncated `e^s`.
pub fn exp_truncation_bound(s: f64, max_order: usize) -> f64 {
    let x = s.abs();
    let mut term = x.powi(max_order as i32 + 1) / factorial(max_order + 1);
    let mut tail = 0.0;
    let mut n = max_order + 1;
    while term > 0.0 && term > f64::EPSILON * 1e-3 * tail {
        tail += term;
        n += 1;
        term *= x / n as f64;
    }
    tail
}

/// Modified Gram–Schmidt; vectors whose residual norm falls below `1e-12`
/// are dropped.
pub fn orthonormalize(vectors: &[CmVector]) -> Result<Vec<CmVector>> {
    let mut out: Vec<CmVector> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for e in &out {
            let c = e.inner(&r)?;
            r.axpy(-c, e)?;
        }
        let norm = r.norm();
        if norm > 1e-12 {
            out.push(r.scaled(1.0 / norm));
        }
    }
    Ok(out)
}

fn require_l0(law: &ConditionedLaw, v: &CmVector) -> Result<()> {
    let residual = law.distance_from_l0(v)?;
    if residual > L0_TOLERANCE * v.norm().max(1.0) {
        return Err(Error::NotInL0(residual));
    }
    Ok(())
}

/// Closed-form and Monte Carlo checks of
/// `∫ e^{I_L(v)-‖v‖²/2} e^{I_L(w)-‖w‖²/2} dμ_L = e^{<v,w>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    /// `e^{-(‖v‖²+‖w‖²)/2} E[e^{I_L(v+w)}]` from the Gaussian moment formula.
    pub closed_form: f64,
    /// `e^{<v,w>}`.
    pub reference: f64,
    pub abs_err: f64,
    pub exact_pass: bool,
    pub mc: Comparison,
}

impl IsometryReport {
    pub fn pass(&self) -> bool {
        self.exact_pass && self.mc.pass
    }
}

pub fn verify_ul_isometry(
    law: &ConditionedLaw,
    v: &CmVector,
    w: &CmVector,
    n_samples: usize,
    seed: u64,
) -> Result<IsometryReport> {
    require_l0(law, v)?;
    require_l0(law, w)?;
    let normalizer = (-0.5 * (v.norm_sq() + w.norm_sq())).exp();
    let closed_form =
        normalizer * exponential_moment(law, &v.add(w)?, Complex64::new(1.0, 0.0))?.re;
    let reference = v.inner(w)?.exp();
    let abs_err = (closed_form - reference).abs();
    let exact_pass = abs_err <= EXACT_TOLERANCE * reference.max(1.0);
    let functional = Functional::composite(
        vec![
            Functional::ExpOfWiener {
                z: 1.0,
                f: v.clone(),
            },
            Functional::ExpOfWiener {
                z: 1.0,
                f: w.clone(),
            },
        ],
        move |xs| normalizer * xs[0] * xs[1],
    );
    let mc = MonteCarlo::new(law)?.compare(&functional, reference, n_samples, seed)?;
    Ok(IsometryReport {
        closed_form,
        reference,
        abs_err,
        exact_pass,
        mc,
    })
}

/// Checks that `U_L(v) = I_L(v)` has mean 0 and variance `‖v‖²` for `v ∈ L0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTermReport {
    pub closed_mean: f64,
    pub closed_variance: f64,
    pub norm_sq: f64,
    pub exact_pass: bool,
    pub mean: Comparison,
    /// Monte Carlo `E[I_L(v)²]` against `‖v‖²` (the mean is zero).
    pub second_moment: Comparison,
}

impl LinearTermReport {
    pub fn pass(&self) -> bool {
        self.exact_pass && self.mean.pass && self.second_moment.pass
    }
}

pub fn verify_ul_linear_term(
    law: &ConditionedLaw,
    v: &CmVector,
    n_samples: usize,
    seed: u64,
) -> Result<LinearTermReport> {
    require_l0(law, v)?;
    let closed = conditioned_law(law, v)?;
    let norm_sq = v.norm_sq();
    let exact_pass = closed.mean.abs() <= EXACT_TOLERANCE * norm_sq.sqrt().max(1.0)
        && (closed.variance - norm_sq).abs() <= EXACT_TOLERANCE * norm_sq.max(1.0);
    let mc = MonteCarlo::new(law)?;
    let integral = Functional::WienerIntegral(v.clone());
    let square = Functional::composite(vec![integral.clone()], |xs| xs[0] * xs[0]);
    let estimates = mc.estimate_many(&[integral, square], n_samples, seed)?;
    Ok(LinearTermReport {
        closed_mean: closed.mean,
        closed_variance: closed.variance,
        norm_sq,
        exact_pass,
        mean: Comparison::new(0.0, estimates[0]),
        second_moment: Comparison::new(norm_sq, estimates[1]),
    })
}

/// Gram matrices of `{Exp(v_i)}` in truncated Fock space and of
/// `{e^{I_L(v_i)-‖v_i‖²/2}}` in `L²(μ_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCertificate {
    pub fock: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub max_abs_diff: f64,
}

pub fn coherent_gram_certificate(
    law: &ConditionedLaw,
    vectors: &[CmVector],
    max_order: usize,
) -> Result<GramCertificate> {
    for v in vectors {
        require_l0(law, v)?;
    }
    let base = orthonormalize(vectors)?;
    let space = TruncatedFock::new(base, max_order)?;
    let exps = vectors
        .iter()
        .map(|v| space.exp_vector(&space.coordinates(v)?))
        .collect::<Result<Vec<_>>>()?;
    let k = vectors.len();
    let mut fock = DMatrix::zeros(k, k);
    let mut l2 = DMatrix::zeros(k, k);
    let one = Complex64::new(1.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            fock[(i, j)] = fock_inner(&exps[i], &exps[j])?;
            let normalizer = (-0.5 * (vectors[i].norm_sq() + vectors[j].norm_sq())).exp();
            let sum = vectors[i].add(&vectors[j])?;
            l2[(i, j)] = normalizer * exponential_moment(law, &sum, one)?.re;
        }
    }
    let max_abs_diff = (&fock - &l2).abs().max();
    Ok(GramCertificate {
        fock,
        l2,
        max_abs_diff,
    })
}
