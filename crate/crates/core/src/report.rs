//! Verification records shared by the CLI and the test suites.

use serde::Serialize;

use crate::mc_oracle::Comparison;

/// One verification line: a closed form against a Monte Carlo estimate, or
/// against an exact reference (then `std_error` and `z` are absent and
/// `abs_err` is set).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub abs_err: Option<f64>,
    pub pass: bool,
}

impl CheckReport {
    pub fn statistical(check: impl Into<String>, comparison: &Comparison) -> Self {
        Self {
            check: check.into(),
            closed_form: comparison.closed_form,
            estimate: comparison.mc_mean,
            std_error: Some(comparison.std_error),
            z: Some(comparison.z_score),
            abs_err: None,
            pass: comparison.pass,
        }
    }

    /// Passes when `|closed_form - reference| <= tolerance`.
    pub fn exact(
        check: impl Into<String>,
        closed_form: f64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        let abs_err = (closed_form - reference).abs();
        Self {
            check: check.into(),
            closed_form,
            estimate: reference,
            std_error: None,
            z: None,
            abs_err: Some(abs_err),
            pass: abs_err <= tolerance,
        }
    }
}

/// Counts of passing and failing reports.
pub fn tally(reports: &[CheckReport]) -> (usize, usize) {
    let passed = reports.iter().filter(|r| r.pass).count();
    (passed, reports.len() - passed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_oracle::McEstimate;

    #[test]
    fn exact_and_statistical() {
        let ok = CheckReport::exact("a", 1.0, 1.0 + 1e-13, 1e-12);
        assert!(ok.pass);
        assert!(!CheckReport::exact("b", 1.0, 1.1, 1e-12).pass);
        assert!(!CheckReport::exact("nan", f64::NAN, 1.0, 1e-12).pass);
        let est = McEstimate {
            mean: 0.9,
            std_error: 0.1,
            n_samples: 100,
            seed: 0,
        };
        let report = CheckReport::statistical("c", &Comparison::new(1.0, est));
        assert!(report.pass);
        assert_eq!(report.z, Some(-0.9999999999999998));
        assert_eq!(
            tally(&[
                ok,
                report.clone(),
                CheckReport {
                    pass: false,
                    ..report
                }
            ]),
            (2, 1)
        );
    }
}
