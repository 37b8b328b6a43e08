//! Gaussian Radon transform on classical Wiener space.
//!
//! Brownian motion on `[0, 1]` is conditioned on a closed affine subspace
//! `L = {h : <v_j, h> = c_j}` of the Cameron–Martin space. The conditioned
//! law `μ_L` is Gaussian with mean `h_L` (the point of `L` closest to the
//! origin) and covariance given by the projection onto `L0 = L - h_L`.
//! Closed forms for linear functionals, bridges, Hermite polynomials and
//! multiple Itô integrals are checked against a Monte Carlo oracle that
//! conditions the discretized path directly.
//!
//! ```
//! use wiener_radon::{conditioned_law, grt_power_ito, AffineSubspace, CmVector, Grid};
//!
//! let grid = Grid::new(256)?;
//! let law = AffineSubspace::bridge(&[0.5], &[1.0], grid)?.closest_point()?;
//! let stats = conditioned_law(&law, &CmVector::kernel(0.25, grid)?)?;
//! assert!((stats.mean - 0.5).abs() < 1e-12 && (stats.variance - 0.125).abs() < 1e-12);
//!
//! // E[H_3(B(1); 1) | B(0.5) = 1]
//! let value = grt_power_ito(&CmVector::constant(1.0, grid), 3, 0.5, 1.0)?;
//! assert!((value + 0.5).abs() < 1e-12);
//! # Ok::<(), wiener_radon::Error>(())
//! ```

pub mod affine;
pub mod cm_space;
pub mod error;
pub mod fock_check;
pub mod grt;
pub mod hermite_ito;
pub mod input;
pub mod mc_oracle;
pub mod report;
pub mod suites;

pub use affine::{orthonormal_bridge_basis, symmetric_inverse, AffineSubspace, ConditionedLaw};
pub use cm_space::{CmVector, Grid};
pub use error::{Error, Result};
pub use fock_check::{
    coherent_gram_certificate, verify_ul_isometry, verify_ul_linear_term, FockVector, TruncatedFock,
};
pub use grt::{
    conditioned_cov, conditioned_cov_matrix, conditioned_law, exponential_moment, grt_linear,
    multi_bridge_mean, GaussianLaw1D,
};
pub use hermite_ito::{
    chaos_expansion_coeffs, grt_ito_combination, grt_power_ito, grt_symmetric_ito, hermite,
    shift_of_variance_check, ProductFunctional,
};
pub use mc_oracle::{
    compare, estimate, sample_paths, Comparison, Execution, Functional, McEstimate, MonteCarlo,
    PathSample,
};
pub use report::CheckReport;
