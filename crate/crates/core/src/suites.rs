//! Verification suites run by `wiener-radon verify`.
//!
//! Every suite compares closed forms either with an exact reference or with
//! the Monte Carlo oracle. Times are snapped to the nearest knot of the
//! configured grid, so the closed forms are exact on that grid.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;

use crate::affine::{AffineSubspace, ConditionedLaw};
use crate::cm_space::{CmVector, Grid};
use crate::error::{Error, Result};
use crate::fock_check::{
    coherent_gram_certificate, exp_truncation_bound, fock_inner, verify_ul_isometry,
    verify_ul_linear_term, TruncatedFock,
};
use crate::grt::{conditioned_law, grt_linear, multi_bridge_mean};
use crate::hermite_ito::{
    check_degree, grt_power_ito, grt_symmetric_ito, hermite, hermite_unchecked,
    shift_of_variance_check, ProductFunctional,
};
use crate::input::{parse_functional, SubspaceSpec};
use crate::mc_oracle::{discretize_law, Comparison, Execution, Functional, MonteCarlo};
use crate::report::CheckReport;

const EXACT: f64 = 1e-12;
const CONSISTENCY: f64 = 1e-8;
const RELATIVE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Bridge,
    MultiBridge,
    ClosestPoint,
    Hermite,
    Ito,
    Fock,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = [
        "bridge",
        "multi-bridge",
        "closest-point",
        "hermite",
        "ito",
        "fock",
        "all",
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "bridge" => Suite::Bridge,
            "multi-bridge" => Suite::MultiBridge,
            "closest-point" => Suite::ClosestPoint,
            "hermite" => Suite::Hermite,
            "ito" => Suite::Ito,
            "fock" => Suite::Fock,
            "all" => Suite::All,
            other => return Err(Error::Schema(format!("unknown suite `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl SuiteConfig {
    fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid)
    }

    fn oracle(&self, law: &ConditionedLaw) -> Result<MonteCarlo> {
        Ok(MonteCarlo::new(law)?.with_execution(self.execution))
    }

    /// Independent seed for the `k`-th law of suite `tag`.
    fn seed_for(&self, tag: u64, k: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(tag << 32 | k))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    if config.samples == 0 {
        return Err(Error::NoSamples);
    }
    match suite {
        Suite::Bridge => bridge_suite(config),
        Suite::MultiBridge => multi_bridge_suite(config),
        Suite::ClosestPoint => closest_point_suite(config),
        Suite::Hermite => hermite_suite(config),
        Suite::Ito => ito_suite(config),
        Suite::Fock => fock_suite(config),
        Suite::All => {
            let mut out = Vec::new();
            for suite in [
                Suite::Bridge,
                Suite::MultiBridge,
                Suite::ClosestPoint,
                Suite::Hermite,
                Suite::Ito,
                Suite::Fock,
            ] {
                out.extend(run_suite(suite, config)?);
            }
            Ok(out)
        }
    }
}

/// Nearest knot to `t`, never the origin.
pub fn snap(t: f64, grid: Grid) -> f64 {
    let n = grid.n_steps();
    grid.knot(((t * n as f64).round() as usize).clamp(1, n))
}

fn snap_increasing(times: &[f64], grid: Grid) -> Result<Vec<f64>> {
    let snapped: Vec<f64> = times.iter().map(|&t| snap(t, grid)).collect();
    if snapped.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Schema(format!(
            "grid of {} steps is too coarse to separate the times {times:?}",
            grid.n_steps()
        )));
    }
    Ok(snapped)
}

/// Ten knot times spread over `(0, 1]`, deduplicated.
fn probe_times(grid: Grid) -> Vec<f64> {
    let mut times: Vec<f64> = (1..=10).map(|k| snap(k as f64 / 10.0, grid)).collect();
    times.dedup();
    times
}

/// Mean and variance checks of `B(t)` at each probe time, exact and by
/// Monte Carlo; `expected(t)` gives the reference `(mean, variance)`.
fn path_moment_checks(
    prefix: &str,
    law: &ConditionedLaw,
    times: &[f64],
    expected: impl Fn(f64) -> Result<(f64, f64)>,
    config: &SuiteConfig,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let grid = law.grid();
    let mut out = Vec::new();
    let mut functionals = Vec::new();
    let mut closed = Vec::new();
    for &t in times {
        let stats = conditioned_law(law, &CmVector::kernel(t, grid)?)?;
        let (mean, variance) = expected(t)?;
        out.push(CheckReport::exact(
            format!("{prefix}/mean@t={t}"),
            stats.mean,
            mean,
            EXACT,
        ));
        out.push(CheckReport::exact(
            format!("{prefix}/variance@t={t}"),
            stats.variance,
            variance,
            EXACT,
        ));
        let centre = stats.mean;
        functionals.push(Functional::PathEval(t));
        functionals.push(Functional::composite(
            vec![Functional::PathEval(t)],
            move |x| (x[0] - centre) * (x[0] - centre),
        ));
        closed.push((format!("{prefix}/mc-mean@t={t}"), stats.mean));
        closed.push((format!("{prefix}/mc-variance@t={t}"), stats.variance));
    }
    let estimates = config
        .oracle(law)?
        .estimate_many(&functionals, config.samples, seed)?;
    for ((name, value), est) in closed.into_iter().zip(estimates) {
        out.push(CheckReport::statistical(name, &Comparison::new(value, est)));
    }
    Ok(out)
}

/// Largest discrepancy between the discretized law and the closed forms
/// `evaluate(h_L, t_i)` and `conditioned_cov(K_{t_i}, K_{t_j})`.
pub fn discretization_gap(law: &ConditionedLaw) -> Result<(f64, f64)> {
    let grid = law.grid();
    let discrete = discretize_law(law)?;
    let knots = grid.interior_and_end_knots();
    let kernels = knots
        .iter()
        .map(|&t| CmVector::kernel(t, grid))
        .collect::<Result<Vec<_>>>()?;
    let projected = kernels
        .iter()
        .map(|k| law.project(k))
        .collect::<Result<Vec<_>>>()?;
    let mut mean_gap = 0.0f64;
    let mut cov_gap = 0.0f64;
    for (i, &t) in knots.iter().enumerate() {
        mean_gap = mean_gap.max((discrete.mean[i] - law.h_l().evaluate(t)?).abs());
        for j in 0..knots.len() {
            let cov = projected[i].inner(&projected[j])?;
            cov_gap = cov_gap.max((discrete.cov[(i, j)] - cov).abs());
        }
    }
    Ok((mean_gap, cov_gap))
}

fn consistency_checks(prefix: &str, law: &ConditionedLaw) -> Result<Vec<CheckReport>> {
    let (mean_gap, cov_gap) = discretization_gap(law)?;
    Ok(vec![
        CheckReport::exact(
            format!("{prefix}/discrete-mean"),
            mean_gap,
            0.0,
            CONSISTENCY,
        ),
        CheckReport::exact(format!("{prefix}/discrete-cov"), cov_gap, 0.0, CONSISTENCY),
    ])
}

fn bridge_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let mut out = Vec::new();
    for (k, &(big_t, c)) in [(0.25, -1.0), (0.5, 0.0), (1.0, 2.0)].iter().enumerate() {
        let big_t = snap(big_t, grid);
        let law = AffineSubspace::bridge(&[big_t], &[c], grid)?.closest_point()?;
        let prefix = format!("bridge/T={big_t},c={c}");
        let expected = |t: f64| Ok((c / big_t * t.min(big_t), t - t.min(big_t).powi(2) / big_t));
        out.extend(path_moment_checks(
            &prefix,
            &law,
            &probe_times(grid),
            expected,
            config,
            config.seed_for(1, k as u64),
        )?);
        out.extend(consistency_checks(&prefix, &law)?);
    }
    Ok(out)
}

fn multi_bridge_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let times = snap_increasing(&[0.2, 0.5, 0.9], grid)?;
    let levels = [1.0, -1.0, 0.0];
    let law = AffineSubspace::bridge(&times, &levels, grid)?.closest_point()?;
    let prefix = "multi-bridge";
    let mut out = Vec::new();
    for (t, c) in times.iter().zip(&levels) {
        let value = multi_bridge_mean(&times, &levels, &CmVector::indicator(0.0, *t, grid)?)?;
        out.push(CheckReport::exact(
            format!("{prefix}/interpolates@T={t}"),
            value,
            *c,
            EXACT,
        ));
    }
    let expected = |t: f64| {
        let stats = conditioned_law(&law, &CmVector::kernel(t, grid)?)?;
        Ok((
            multi_bridge_mean(&times, &levels, &CmVector::indicator(0.0, t, grid)?)?,
            stats.variance,
        ))
    };
    out.extend(path_moment_checks(
        prefix,
        &law,
        &probe_times(grid),
        expected,
        config,
        config.seed_for(2, 0),
    )?);
    out.extend(consistency_checks(prefix, &law)?);
    Ok(out)
}

fn uniform_vector(rng: &mut ChaCha8Rng, grid: Grid) -> Result<CmVector> {
    let deriv = (0..grid.n_steps())
        .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0)
        .collect();
    CmVector::new(grid, deriv)
}

fn closest_point_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_for(3, 0));
    let m = 3.min(grid.n_steps());
    let constraints = (0..m)
        .map(|_| uniform_vector(&mut rng, grid))
        .collect::<Result<Vec<_>>>()?;
    let levels: Vec<f64> = (0..m).map(|j| [0.7, -0.4, 1.1][j]).collect();
    let sub = AffineSubspace::new(constraints, levels.clone())?;
    let law = sub.closest_point()?;
    let prefix = "closest-point";
    let mut out = Vec::new();
    for (j, (value, c)) in sub.apply(law.h_l())?.into_iter().zip(&levels).enumerate() {
        out.push(CheckReport::exact(
            format!("{prefix}/constraint-{j}"),
            value,
            *c,
            CONSISTENCY,
        ));
    }
    let residual = law.project(law.h_l())?.norm();
    out.push(CheckReport::exact(
        format!("{prefix}/orthogonal-to-L0"),
        residual,
        0.0,
        CONSISTENCY,
    ));
    out.extend(consistency_checks(prefix, &law)?);
    let probes = (0..4)
        .map(|_| uniform_vector(&mut rng, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut functionals = Vec::new();
    let mut closed = Vec::new();
    for (i, f) in probes.iter().enumerate() {
        let stats = conditioned_law(&law, f)?;
        let centre = stats.mean;
        functionals.push(Functional::WienerIntegral(f.clone()));
        functionals.push(Functional::composite(
            vec![Functional::WienerIntegral(f.clone())],
            move |x| (x[0] - centre) * (x[0] - centre),
        ));
        closed.push((format!("{prefix}/mc-mean-{i}"), stats.mean));
        closed.push((format!("{prefix}/mc-variance-{i}"), stats.variance));
    }
    let estimates =
        config
            .oracle(&law)?
            .estimate_many(&functionals, config.samples, config.seed_for(3, 1))?;
    for ((name, value), est) in closed.into_iter().zip(estimates) {
        out.push(CheckReport::statistical(name, &Comparison::new(value, est)));
    }
    Ok(out)
}

fn relative(name: String, value: f64, reference: f64) -> CheckReport {
    CheckReport::exact(name, value, reference, RELATIVE * reference.abs().max(1.0))
}

fn hermite_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let mut out = Vec::new();
    for n in 0..=12 {
        for &x in &[0.3, -1.5] {
            for &u2 in &[1.0, 0.5] {
                for &lambda in &[-1.0, 0.5, 2.0, 10.0] {
                    let lhs = hermite(n, lambda * x, lambda * lambda * u2)?;
                    let rhs = lambda.powi(n as i32) * hermite(n, x, u2)?;
                    out.push(relative(
                        format!("hermite/scaling/n={n},x={x},u2={u2},lambda={lambda}"),
                        lhs,
                        rhs,
                    ));
                }
            }
        }
    }
    for n in 0..=10 {
        for &(mean, var_x, u2) in &[(0.4, 0.7, 1.0), (-1.0, 0.3, 0.5), (0.5, 1.0, 1.0)] {
            let check = shift_of_variance_check(n, mean, var_x, u2)?;
            out.push(CheckReport::exact(
                format!("hermite/shift-of-variance/n={n},mean={mean},var={var_x},u2={u2}"),
                check.lhs,
                check.rhs,
                RELATIVE * check.scale,
            ));
        }
    }
    let one = CmVector::constant(1.0, grid);
    for n in 0..=12 {
        for &c in &[0.0, 1.0, -0.5] {
            out.push(CheckReport::exact(
                format!("hermite/classical/n={n},c={c}"),
                grt_power_ito(&one, n, 1.0, c)?,
                hermite(n, c, 1.0)?,
                0.0,
            ));
        }
    }
    let big_t = snap(0.5, grid);
    let law = AffineSubspace::bridge(&[big_t], &[0.8], grid)?.closest_point()?;
    let f = CmVector::indicator(0.0, snap(0.75, grid), grid)?;
    out.push(CheckReport::exact(
        "hermite/first-order-is-linear",
        grt_power_ito(&f, 1, big_t, 0.8)?,
        grt_linear(&law, &f)?,
        EXACT,
    ));
    Ok(out)
}

fn ito_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let half = snap(0.5, grid);
    let fs = [
        ("1", CmVector::constant(1.0, grid)),
        ("1[0,0.5]", CmVector::indicator(0.0, half, grid)?),
    ];
    let mut out = Vec::new();
    let mut k = 0;
    for &big_t in &[half, 1.0] {
        for &c in &[0.0, 1.0] {
            let law = AffineSubspace::bridge(&[big_t], &[c], grid)?.closest_point()?;
            let prefix = format!("ito/T={big_t},c={c}");
            let mut functionals = Vec::new();
            let mut closed = Vec::new();
            for (label, f) in &fs {
                for n in 1..=4 {
                    functionals.push(Functional::HermiteOfWiener {
                        n,
                        f: f.clone(),
                        u2: f.norm_sq(),
                    });
                    closed.push((
                        format!("{prefix}/power/f={label},n={n}"),
                        grt_power_ito(f, n, big_t, c)?,
                    ));
                }
            }
            let mixed = ProductFunctional::new(vec![fs[0].1.clone(), fs[1].1.clone()], true)?;
            let ramp = CmVector::indicator(0.0, snap(0.25, grid), grid)?.add(&fs[1].1)?;
            let triple =
                ProductFunctional::new(vec![fs[0].1.clone(), fs[1].1.clone(), ramp], true)?;
            for (label, kernel) in [("mixed2", mixed), ("mixed3", triple)] {
                closed.push((
                    format!("{prefix}/{label}"),
                    grt_symmetric_ito(&kernel, big_t, c)?,
                ));
                functionals.push(Functional::MultipleIto(kernel));
            }
            let estimates = config.oracle(&law)?.estimate_many(
                &functionals,
                config.samples,
                config.seed_for(5, k),
            )?;
            for ((name, value), est) in closed.into_iter().zip(estimates) {
                out.push(CheckReport::statistical(name, &Comparison::new(value, est)));
            }
            k += 1;
        }
    }
    Ok(out)
}

fn fock_suite(config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let grid = config.grid()?;
    let big_t = snap(0.5, grid);
    let law = AffineSubspace::bridge(&[big_t], &[1.0], grid)?.closest_point()?;
    let raw = [
        CmVector::kernel(snap(0.25, grid), grid)?.scaled(2.0),
        CmVector::kernel(snap(0.75, grid), grid)?,
        CmVector::indicator(snap(0.6, grid), 1.0, grid)?.scaled(-1.5),
    ];
    let vectors = raw
        .iter()
        .map(|v| law.project(v))
        .collect::<Result<Vec<_>>>()?;
    let vectors: Vec<CmVector> = vectors.into_iter().filter(|v| v.norm() > 1e-12).collect();
    let mut out = fock_checks(&law, &vectors, 30, config)?;
    let unit = CmVector::constant(1.0, grid);
    for &s in &[-3.0f64, -1.0, 0.5, 1.0, 3.0] {
        for &order in &[5, 10, 20] {
            let truncated = TruncatedFock::new(vec![unit.clone()], order)?;
            let a = s.abs().sqrt();
            let b = s / a;
            let value = fock_inner(&truncated.exp_vector(&[a])?, &truncated.exp_vector(&[b])?)?;
            let bound = exp_truncation_bound(s, order) + 4.0 * f64::EPSILON * s.abs().exp();
            out.push(CheckReport::exact(
                format!("fock/truncation/s={s},N={order}"),
                value,
                s.exp(),
                bound,
            ));
        }
    }
    Ok(out)
}

/// Gram certificate at truncation order `max_order`, isometry checks for
/// every pair, and linear-term checks for every vector; `vectors` must lie
/// in `L0`.
pub fn fock_checks(
    law: &ConditionedLaw,
    vectors: &[CmVector],
    max_order: usize,
    config: &SuiteConfig,
) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    if !vectors.is_empty() {
        let certificate = coherent_gram_certificate(law, vectors, max_order)?;
        for i in 0..vectors.len() {
            for j in 0..vectors.len() {
                out.push(CheckReport::exact(
                    format!("fock/gram[{i},{j}]"),
                    certificate.fock[(i, j)],
                    certificate.l2[(i, j)],
                    CONSISTENCY,
                ));
            }
        }
    }
    let mut k = 0;
    for i in 0..vectors.len() {
        for j in i..vectors.len() {
            let report = verify_ul_isometry(
                law,
                &vectors[i],
                &vectors[j],
                config.samples,
                config.seed_for(6, k),
            )?;
            out.push(CheckReport::exact(
                format!("fock/isometry[{i},{j}]"),
                report.closed_form,
                report.reference,
                EXACT * report.reference.max(1.0),
            ));
            out.push(CheckReport::statistical(
                format!("fock/isometry[{i},{j}]/mc"),
                &report.mc,
            ));
            k += 1;
        }
    }
    for (i, v) in vectors.iter().enumerate() {
        let report = verify_ul_linear_term(law, v, config.samples, config.seed_for(7, i as u64))?;
        out.push(CheckReport::exact(
            format!("fock/linear[{i}]/mean"),
            report.closed_mean,
            0.0,
            EXACT,
        ));
        out.push(CheckReport::exact(
            format!("fock/linear[{i}]/variance"),
            report.closed_variance,
            report.norm_sq,
            EXACT * report.norm_sq.max(1.0),
        ));
        out.push(CheckReport::statistical(
            format!("fock/linear[{i}]/mc-mean"),
            &report.mean,
        ));
        out.push(CheckReport::statistical(
            format!("fock/linear[{i}]/mc-second-moment"),
            &report.second_moment,
        ));
    }
    Ok(out)
}

/// User-supplied checks: a subspace plus functionals, each compared with
/// its closed form (computed when `closed_form` is omitted).
#[derive(Debug, Clone, Deserialize)]
pub struct CustomSuite {
    #[serde(flatten)]
    pub subspace: SubspaceSpec,
    pub checks: Vec<CustomCheck>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CustomCheck {
    pub name: String,
    pub functional: Value,
    #[serde(default)]
    pub closed_form: Option<f64>,
}

pub fn run_custom(suite: &CustomSuite, config: &SuiteConfig) -> Result<Vec<CheckReport>> {
    if config.samples == 0 {
        return Err(Error::NoSamples);
    }
    let law = suite.subspace.law()?;
    let grid = law.grid();
    let mut functionals = Vec::new();
    let mut closed = Vec::new();
    for check in &suite.checks {
        let functional = parse_functional(&check.functional, grid)?;
        let value = match check.closed_form {
            Some(value) => value,
            None => functional_closed_form(&law, &functional)?,
        };
        closed.push((check.name.clone(), value));
        functionals.push(functional);
    }
    if functionals.is_empty() {
        return Ok(Vec::new());
    }
    let estimates =
        config
            .oracle(&law)?
            .estimate_many(&functionals, config.samples, config.seed)?;
    Ok(closed
        .into_iter()
        .zip(estimates)
        .map(|((name, value), est)| CheckReport::statistical(name, &Comparison::new(value, est)))
        .collect())
}

/// `E_{μ_L}` of a functional from the one-dimensional law of `I_L(f)`.
pub fn functional_closed_form(law: &ConditionedLaw, functional: &Functional) -> Result<f64> {
    let grid = law.grid();
    let law_of = |f: &CmVector| conditioned_law(law, &f.refine(grid)?);
    match functional {
        Functional::WienerIntegral(f) => Ok(law_of(f)?.mean),
        Functional::PathEval(t) => Ok(law_of(&CmVector::kernel(*t, grid)?)?.mean),
        Functional::ExpOfWiener { z, f } => {
            let stats = law_of(f)?;
            Ok((z * stats.mean + 0.5 * z * z * stats.variance).exp())
        }
        // E[H_n(X; u²)] = H_n(m; u² - σ²) for X ~ N(m, σ²)
        Functional::HermiteOfWiener { n, f, u2 } => {
            let stats = law_of(f)?;
            check_degree(*n)?;
            Ok(hermite_unchecked(*n, stats.mean, u2 - stats.variance))
        }
        Functional::MultipleIto(_) | Functional::Composite { .. } => Err(Error::Schema(
            "no closed form for this functional; supply `closed_form`".into(),
        )),
    }
}
