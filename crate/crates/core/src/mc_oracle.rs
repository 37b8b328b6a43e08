//! Monte Carlo oracle for conditioned Wiener measure.
//!
//! The law of the path values `(B(t_1), ..., B(t_n))` under `μ_L` is
//! obtained by ordinary Gaussian conditioning of the discrete Brownian
//! vector on the linear constraints `A x = c`, where row `j` of `A` applies
//! `<v_j, ·>` to the path increments. This route never touches `h_L` or
//! `P_{L0}`, so agreement with the Hilbert-space formulas is a real check.
//!
//! Sampling is chunked: chunk `k` draws its normals from a ChaCha stream
//! keyed by `(seed, k)`, and per-chunk statistics are merged in chunk order,
//! so results do not depend on how chunks are scheduled across threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::affine::{symmetric_inverse, ConditionedLaw};
use crate::cm_space::{CmVector, Grid};
use crate::error::{Error, Result};
use crate::hermite_ito::{hermite_unchecked, ProductFunctional, MAX_DEGREE};

/// Paths generated per RNG substream.
pub const CHUNK_SIZE: usize = 4096;
/// Eigenvalues of the conditioned covariance in `[-CLIP_RATIO * λ_max, 0)` are
/// clipped to zero; anything more negative is an error.
pub const CLIP_RATIO: f64 = 1e-9;
/// A comparison passes when `|z| <= Z_LIMIT`.
pub const Z_LIMIT: f64 = 4.0;
/// Standard errors at or below this are treated as an exactly degenerate
/// functional.
pub const DEGENERATE_STD_ERROR: f64 = 1e-9;

pub const DEFAULT_GRID: usize = 256;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Path values at the knots `t_1..t_n`; the value at `t_0 = 0` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn at(&self, t: f64) -> Result<f64> {
        let k = self.grid.knot_index(t)?;
        Ok(if k == 0 { 0.0 } else { self.values[k - 1] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Mean vector and covariance of the path values under `μ_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    pub grid: Grid,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Conditions the discrete Brownian vector on the subspace constraints.
pub fn discretize_law(law: &ConditionedLaw) -> Result<DiscreteLaw> {
    let grid = law.grid();
    let n = grid.n_steps();
    let knots = grid.interior_and_end_knots();
    let prior = DMatrix::from_fn(n, n, |i, j| knots[i].min(knots[j]));
    let sub = law.subspace();
    let m = sub.codimension();
    if m == 0 {
        return Ok(DiscreteLaw {
            grid,
            mean: DVector::zeros(n),
            cov: prior,
        });
    }
    // <v, B> = Σ_i v̇_i (x_i - x_{i-1})  ⇒  A_{ji} = v̇_j[i] - v̇_j[i+1]
    let a = DMatrix::from_fn(m, n, |j, i| {
        let d = sub.constraints()[j].deriv();
        d[i] - if i + 1 < n { d[i + 1] } else { 0.0 }
    });
    let prior_at = &prior * a.transpose();
    let constraint_cov = &a * &prior_at;
    let constraint_cov = (&constraint_cov + constraint_cov.transpose()) * 0.5;
    let inverse = symmetric_inverse(&constraint_cov)?;
    let gain = &prior_at * inverse;
    let levels = DVector::from_column_slice(sub.levels());
    let mean = &gain * levels;
    let cov = &prior - &gain * prior_at.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(DiscreteLaw { grid, mean, cov })
}

/// Draws path values `x = μ + Q Λ^{1/2} z` with `z` standard normal.
#[derive(Debug, Clone)]
pub struct PathSampler {
    grid: Grid,
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl PathSampler {
    pub fn new(law: &ConditionedLaw) -> Result<Self> {
        Self::from_discrete(&discretize_law(law)?)
    }

    pub fn from_discrete(discrete: &DiscreteLaw) -> Result<Self> {
        let n = discrete.grid.n_steps();
        let eigen = SymmetricEigen::new(discrete.cov.clone());
        let largest = eigen.eigenvalues.max().max(0.0);
        let mut columns = Vec::new();
        for k in 0..n {
            let lambda = eigen.eigenvalues[k];
            if lambda < -CLIP_RATIO * largest {
                return Err(Error::IndefiniteCovariance {
                    eigenvalue: lambda,
                    largest,
                });
            }
            if lambda > 0.0 {
                columns.push(eigen.eigenvectors.column(k) * lambda.sqrt());
            }
        }
        let factor = if columns.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&columns)
        };
        Ok(Self {
            grid: discrete.grid,
            mean: discrete.mean.clone(),
            factor,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Number of independent normals consumed per path.
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// Column-major `n × count` matrix of paths for chunk `chunk` of stream `seed`.
    fn chunk(&self, seed: u64, chunk: u64, count: usize) -> DMatrix<f64> {
        let rank = self.rank();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let normal = Normal::standard();
        let z = DMatrix::from_fn(rank, count, |_, _| {
            normal.inverse_cdf(open_unit(rng.next_u64()))
        });
        let mut x = &self.factor * z;
        for mut column in x.column_iter_mut() {
            column += &self.mean;
        }
        x
    }

    /// Deterministic stream of `n_samples` paths.
    pub fn paths(&self, n_samples: usize, seed: u64) -> impl Iterator<Item = PathSample> + '_ {
        chunk_sizes(n_samples).flat_map(move |(k, count)| {
            let block = self.chunk(seed, k as u64, count);
            let n = self.grid.n_steps();
            let grid = self.grid;
            (0..count)
                .map(move |j| PathSample {
                    grid,
                    values: block.as_slice()[j * n..(j + 1) * n].to_vec(),
                })
                .collect::<Vec<_>>()
        })
    }
}

fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

fn chunk_sizes(n_samples: usize) -> impl Iterator<Item = (usize, usize)> {
    let chunks = n_samples.div_ceil(CHUNK_SIZE);
    (0..chunks).map(move |k| (k, CHUNK_SIZE.min(n_samples - k * CHUNK_SIZE)))
}

/// Convenience wrapper: builds a sampler for `law` and streams paths.
pub fn sample_paths(law: &ConditionedLaw, n_samples: usize, seed: u64) -> Result<Vec<PathSample>> {
    let sampler = PathSampler::new(law)?;
    Ok(sampler.paths(n_samples, seed).collect())
}

/// Real-valued path functionals the oracle can average.
#[derive(Clone)]
pub enum Functional {
    /// `∫ f dB = Σ_i f_i ΔB_i`.
    WienerIntegral(CmVector),
    /// `H_n(∫ f dB; u²)`.
    HermiteOfWiener { n: usize, f: CmVector, u2: f64 },
    /// `exp(z ∫ f dB)`.
    ExpOfWiener { z: f64, f: CmVector },
    /// `B(t)` at a knot.
    PathEval(f64),
    /// `J_n(f_1 ⊗̂ ... ⊗̂ f_n)` evaluated pathwise by polarization:
    /// `2⁻ⁿ/n! Σ_ε (Π ε_i) H_n(∫ g_ε dB; ‖g_ε‖²)` with `g_ε = Σ ε_i f_i`.
    MultipleIto(ProductFunctional),
    /// `map(inputs evaluated on the path)`.
    Composite {
        inputs: Vec<Functional>,
        map: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl Functional {
    pub fn composite(
        inputs: Vec<Functional>,
        map: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Functional::Composite {
            inputs,
            map: Arc::new(map),
        }
    }

    /// Product of the inputs.
    pub fn product(inputs: Vec<Functional>) -> Self {
        Self::composite(inputs, |xs| xs.iter().product())
    }

    fn compile(&self, grid: Grid) -> Result<Compiled> {
        let lift = |f: &CmVector| -> Result<Vec<f64>> { Ok(f.refine(grid)?.into_deriv()) };
        Ok(match self {
            Functional::WienerIntegral(f) => Compiled::Wiener(lift(f)?),
            Functional::HermiteOfWiener { n, f, u2 } => {
                if *n > MAX_DEGREE {
                    return Err(Error::DegreeTooLarge(*n));
                }
                Compiled::Hermite {
                    n: *n,
                    f: lift(f)?,
                    u2: *u2,
                }
            }
            Functional::ExpOfWiener { z, f } => Compiled::Exp { z: *z, f: lift(f)? },
            Functional::PathEval(t) => Compiled::Eval(grid.knot_index(*t)?),
            Functional::MultipleIto(kernel) => {
                let n = kernel.degree();
                if n > 16 {
                    return Err(Error::DegreeTooLarge(n));
                }
                let factors = kernel
                    .factors()
                    .iter()
                    .map(|f| lift(f))
                    .collect::<Result<Vec<_>>>()?;
                let mut terms = Vec::with_capacity(1 << n);
                for mask in 0u32..(1 << n) {
                    let signs: Vec<f64> = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 })
                        .collect();
                    let steps = grid.n_steps();
                    let g: Vec<f64> = (0..steps)
                        .map(|i| factors.iter().zip(&signs).map(|(f, s)| s * f[i]).sum())
                        .collect();
                    let u2 = g.iter().map(|x| x * x).sum::<f64>() / steps as f64;
                    terms.push((signs.iter().product::<f64>(), signs, u2));
                }
                let norm = 1.0 / (2f64.powi(n as i32) * (1..=n).map(|k| k as f64).product::<f64>());
                Compiled::Ito {
                    n,
                    factors,
                    terms,
                    norm,
                }
            }
            Functional::Composite { inputs, map } => Compiled::Composite {
                inputs: inputs
                    .iter()
                    .map(|f| f.compile(grid))
                    .collect::<Result<Vec<_>>>()?,
                map: Arc::clone(map),
            },
        })
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::WienerIntegral(_) => write!(f, "WienerIntegral"),
            Functional::HermiteOfWiener { n, u2, .. } => {
                write!(f, "HermiteOfWiener(n={n}, u2={u2})")
            }
            Functional::ExpOfWiener { z, .. } => write!(f, "ExpOfWiener(z={z})"),
            Functional::PathEval(t) => write!(f, "PathEval({t})"),
            Functional::MultipleIto(k) => write!(f, "MultipleIto(n={})", k.degree()),
            Functional::Composite { inputs, .. } => f.debug_list().entries(inputs).finish(),
        }
    }
}

enum Compiled {
    Wiener(Vec<f64>),
    Hermite {
        n: usize,
        f: Vec<f64>,
        u2: f64,
    },
    Exp {
        z: f64,
        f: Vec<f64>,
    },
    Eval(usize),
    Ito {
        n: usize,
        factors: Vec<Vec<f64>>,
        terms: Vec<(f64, Vec<f64>, f64)>,
        norm: f64,
    },
    Composite {
        inputs: Vec<Compiled>,
        map: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

fn wiener(f: &[f64], increments: &[f64]) -> f64 {
    f.iter().zip(increments).map(|(a, b)| a * b).sum()
}

impl Compiled {
    fn eval(&self, values: &[f64], increments: &[f64]) -> f64 {
        match self {
            Compiled::Wiener(f) => wiener(f, increments),
            Compiled::Hermite { n, f, u2 } => hermite_unchecked(*n, wiener(f, increments), *u2),
            Compiled::Exp { z, f } => (z * wiener(f, increments)).exp(),
            Compiled::Eval(k) => {
                if *k == 0 {
                    0.0
                } else {
                    values[k - 1]
                }
            }
            Compiled::Ito {
                n,
                factors,
                terms,
                norm,
            } => {
                let integrals: Vec<f64> = factors.iter().map(|f| wiener(f, increments)).collect();
                let total: f64 = terms
                    .iter()
                    .map(|(sign, signs, u2)| {
                        let x: f64 = signs.iter().zip(&integrals).map(|(s, i)| s * i).sum();
                        sign * hermite_unchecked(*n, x, *u2)
                    })
                    .sum();
                total * norm
            }
            Compiled::Composite { inputs, map } => {
                let xs: Vec<f64> = inputs.iter().map(|c| c.eval(values, increments)).collect();
                map(&xs)
            }
        }
    }
}

/// Whether chunks are processed on the rayon pool or in the calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Running statistics of one chunk: count, mean, and centered sum of squares.
#[derive(Debug, Clone, Copy)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn from_values(values: &[f64]) -> Self {
        let count = values.len();
        let mean = neumaier_sum(values.iter().copied()) / count as f64;
        let m2 = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        Self { count, mean, m2 }
    }

    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let weight = other.count as f64 / count as f64;
        Self {
            count,
            mean: self.mean + delta * weight,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * weight,
        }
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut compensation) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Sampler bound to one conditioned law; reuse it across many estimates.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    sampler: PathSampler,
    execution: Execution,
}

impl MonteCarlo {
    pub fn new(law: &ConditionedLaw) -> Result<Self> {
        Ok(Self {
            sampler: PathSampler::new(law)?,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn sampler(&self) -> &PathSampler {
        &self.sampler
    }

    /// Estimates several functionals from the same sampled paths.
    pub fn estimate_many(
        &self,
        functionals: &[Functional],
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<McEstimate>> {
        if n_samples == 0 {
            return Err(Error::NoSamples);
        }
        let grid = self.sampler.grid;
        let compiled = functionals
            .iter()
            .map(|f| f.compile(grid))
            .collect::<Result<Vec<_>>>()?;
        let chunks: Vec<(usize, usize)> = chunk_sizes(n_samples).collect();
        let run = |&(k, count): &(usize, usize)| self.chunk_moments(&compiled, seed, k, count);
        let per_chunk: Vec<Vec<Moments>> = match self.execution {
            Execution::Serial => chunks.iter().map(run).collect(),
            Execution::Parallel => chunks.par_iter().map(run).collect(),
        };
        let mut totals = vec![
            Moments {
                count: 0,
                mean: 0.0,
                m2: 0.0
            };
            compiled.len()
        ];
        for chunk in per_chunk {
            for (total, m) in totals.iter_mut().zip(chunk) {
                *total = total.merge(m);
            }
        }
        Ok(totals
            .into_iter()
            .map(|m| {
                let std_error = if m.count > 1 {
                    (m.m2 / (m.count - 1) as f64).sqrt() / (m.count as f64).sqrt()
                } else {
                    0.0
                };
                McEstimate {
                    mean: m.mean,
                    std_error,
                    n_samples,
                    seed,
                }
            })
            .collect())
    }

    fn chunk_moments(
        &self,
        compiled: &[Compiled],
        seed: u64,
        k: usize,
        count: usize,
    ) -> Vec<Moments> {
        let block = self.sampler.chunk(seed, k as u64, count);
        let n = self.sampler.grid.n_steps();
        let mut outputs = vec![Vec::with_capacity(count); compiled.len()];
        let mut increments = vec![0.0; n];
        for j in 0..count {
            let values = &block.as_slice()[j * n..(j + 1) * n];
            let mut previous = 0.0;
            for (inc, v) in increments.iter_mut().zip(values) {
                *inc = v - previous;
                previous = *v;
            }
            for (out, c) in outputs.iter_mut().zip(compiled) {
                out.push(c.eval(values, &increments));
            }
        }
        outputs.iter().map(|v| Moments::from_values(v)).collect()
    }

    pub fn estimate(
        &self,
        functional: &Functional,
        n_samples: usize,
        seed: u64,
    ) -> Result<McEstimate> {
        Ok(self.estimate_many(std::slice::from_ref(functional), n_samples, seed)?[0])
    }

    pub fn compare(
        &self,
        functional: &Functional,
        closed_form: f64,
        n_samples: usize,
        seed: u64,
    ) -> Result<Comparison> {
        Ok(Comparison::new(
            closed_form,
            self.estimate(functional, n_samples, seed)?,
        ))
    }
}

/// Sample mean of `functional` under `law`.
pub fn estimate(
    law: &ConditionedLaw,
    functional: &Functional,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    MonteCarlo::new(law)?.estimate(functional, n_samples, seed)
}

/// Closed form versus Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub closed_form: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn new(closed_form: f64, estimate: McEstimate) -> Self {
        let diff = estimate.mean - closed_form;
        let z_score = if estimate.std_error <= DEGENERATE_STD_ERROR {
            if diff.abs() <= 1e-9 * closed_form.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            }
        } else {
            diff / estimate.std_error
        };
        Self {
            closed_form,
            mc_mean: estimate.mean,
            std_error: estimate.std_error,
            z_score,
            pass: z_score.abs() <= Z_LIMIT,
        }
    }
}

pub fn compare(
    law: &ConditionedLaw,
    functional: &Functional,
    closed_form: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Comparison> {
    MonteCarlo::new(law)?.compare(functional, closed_form, n_samples, seed)
}
