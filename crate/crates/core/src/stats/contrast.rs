use super::{fit_logistic, normal_two_sided_p, Matrix, TestMethod, TestResult};
use crate::{Error, Result};

/// Contrast over (intercept, treatment, subgroup, treatment x subgroup).
pub const DEFAULT_CONTRAST: [f64; 4] = [0.0, 0.0, 1.0, 1.0];

/// Treatment indicator, subgroup indicator and response of one patient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellOutcome {
    pub treated: bool,
    pub sensitive: bool,
    pub response: bool,
}

/// Wald test of `g θ = 0` in the model
/// `logit p = μ + λ t + κ s + γ t s`, with θ = (μ, λ, κ, γ).
///
/// Returns p = 1 marked degenerate when one of the four treatment-by-subgroup
/// cells is empty or the fit does not converge.
pub fn sensitive_group_effect(patients: &[CellOutcome], contrast: &[f64; 4]) -> Result<TestResult> {
    if contrast.iter().all(|&g| g == 0.0) {
        return Err(Error::InvalidArgument("contrast vector is zero".into()));
    }
    let mut cells = [0usize; 4];
    for p in patients {
        cells[2 * p.treated as usize + p.sensitive as usize] += 1;
    }
    if cells.contains(&0) {
        return Ok(TestResult::uninformative(TestMethod::ContrastWald));
    }

    let rows: Vec<[f64; 4]> = patients
        .iter()
        .map(|p| {
            let t = p.treated as u8 as f64;
            let s = p.sensitive as u8 as f64;
            [1.0, t, s, t * s]
        })
        .collect();
    let design = Matrix::from_rows(&rows)?;
    let response: Vec<bool> = patients.iter().map(|p| p.response).collect();
    let fit = fit_logistic(&design, &response)?;
    if !fit.converged {
        return Ok(TestResult::uninformative(TestMethod::ContrastWald));
    }

    let estimate: f64 = contrast.iter().zip(&fit.coefficients).map(|(g, b)| g * b).sum();
    let variance = fit.covariance.quadratic_form(contrast);
    if !(variance > 0.0) || !variance.is_finite() {
        return Ok(TestResult::uninformative(TestMethod::ContrastWald));
    }
    let statistic = estimate / variance.sqrt();
    Ok(TestResult {
        statistic,
        p_value: normal_two_sided_p(statistic),
        method: TestMethod::ContrastWald,
        degenerate: false,
    })
}
