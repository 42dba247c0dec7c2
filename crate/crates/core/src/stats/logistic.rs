//! Binary logistic regression by iteratively reweighted least squares.

use crate::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// g A gᵀ for a square matrix A.
    pub fn quadratic_form(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += g[i] * self.get(i, j) * g[j];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute coefficient update.
    pub tol: f64,
    /// Any coefficient exceeding this magnitude is treated as separation.
    pub separation_bound: f64,
    /// Ridge added once to a singular information matrix.
    pub ridge: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iter: 50,
            tol: 1e-8,
            separation_bound: 15.0,
            ridge: 1e-8,
        }
    }
}

/// Why a fit did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFailure {
    Separation,
    Singular,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information at `coefficients`.
    pub covariance: Matrix,
    pub converged: bool,
    pub n_iterations: usize,
    pub failure: Option<FitFailure>,
}

impl LogisticFit {
    pub fn log_likelihood(&self, design: &Matrix, response: &[bool]) -> f64 {
        log_likelihood(design, response, &self.coefficients)
    }
}

/// Log-likelihood of a logistic model at `beta`.
pub fn log_likelihood(design: &Matrix, response: &[bool], beta: &[f64]) -> f64 {
    (0..design.rows())
        .map(|i| {
            let eta = dot(design.row(i), beta);
            if response[i] {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Fits a logistic regression with default IRLS options.
pub fn fit_logistic(design: &Matrix, response: &[bool]) -> Result<LogisticFit> {
    fit_logistic_with(design, response, &IrlsOptions::default())
}

pub fn fit_logistic_with(design: &Matrix, response: &[bool], opts: &IrlsOptions) -> Result<LogisticFit> {
    let n = design.rows();
    let q = design.cols();
    if response.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if q == 0 || n < q {
        return Err(Error::Dimension(format!("need n >= q >= 1, got n = {n}, q = {q}")));
    }

    let mut beta = vec![0.0; q];
    let mut info = vec![0.0; q * q];
    let mut grad = vec![0.0; q];
    let mut failure = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        accumulate(design, response, &beta, &mut info, &mut grad);
        let mut step = grad.clone();
        if !solve_spd(&info, q, &mut step, opts.ridge) {
            failure = Some(FitFailure::Singular);
            break;
        }
        let mut max_change: f64 = 0.0;
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
            max_change = max_change.max(s.abs());
        }
        if beta.iter().any(|b| !b.is_finite() || b.abs() > opts.separation_bound) {
            for b in beta.iter_mut() {
                *b = clamp_coefficient(*b, opts.separation_bound);
            }
            failure = Some(FitFailure::Separation);
            break;
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && failure.is_none() {
        failure = Some(FitFailure::MaxIterations);
    }

    accumulate(design, response, &beta, &mut info, &mut grad);
    let covariance = match invert_spd(&info, q, opts.ridge) {
        Some(inv) => Matrix::from_row_major(q, q, inv)?,
        None => {
            converged = false;
            failure.get_or_insert(FitFailure::Singular);
            Matrix::from_row_major(q, q, vec![f64::NAN; q * q])?
        }
    };

    Ok(LogisticFit {
        coefficients: beta,
        covariance,
        converged,
        n_iterations: iterations,
        failure,
    })
}

/// Intercept and slope of a one-covariate logistic regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateFit {
    pub intercept: f64,
    pub slope: f64,
    pub converged: bool,
}

impl UnivariateFit {
    fn failed() -> Self {
        UnivariateFit {
            intercept: 0.0,
            slope: 0.0,
            converged: false,
        }
    }
}

/// Fits `logit p = a + b x` without building a design matrix.
///
/// Same iteration and guards as [`fit_logistic_with`]; it starts from the
/// intercept-only solution, which saves an iteration on the screening fits.
/// A covariate with no spread, or a response with no variation, is reported
/// as non-converged.
pub fn fit_univariate(x: &[f64], y: &[bool], opts: &IrlsOptions) -> UnivariateFit {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    if n < 2 {
        return UnivariateFit::failed();
    }
    let successes = y.iter().filter(|&&v| v).count();
    if successes == 0 || successes == n {
        return UnivariateFit::failed();
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return UnivariateFit::failed();
    }

    let ybar = successes as f64 / n as f64;
    let mut a = (ybar / (1.0 - ybar)).ln();
    let mut b = 0.0;
    for _ in 0..opts.max_iter {
        let (mut i00, mut i01, mut i11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let p = logistic(a + b * xi);
            let w = p * (1.0 - p);
            let r = if yi { 1.0 - p } else { -p };
            i00 += w;
            i01 += w * xi;
            i11 += w * xi * xi;
            g0 += r;
            g1 += r * xi;
        }
        let mut det = i00 * i11 - i01 * i01;
        if !(det > 1e-12 * i00 * i11) {
            i00 += opts.ridge;
            i11 += opts.ridge;
            det = i00 * i11 - i01 * i01;
            if !(det > 1e-12 * i00 * i11) {
                return UnivariateFit::failed();
            }
        }
        let da = (i11 * g0 - i01 * g1) / det;
        let db = (i00 * g1 - i01 * g0) / det;
        a += da;
        b += db;
        if !(a.abs() <= opts.separation_bound && b.abs() <= opts.separation_bound) {
            return UnivariateFit {
                intercept: clamp_coefficient(a, opts.separation_bound),
                slope: clamp_coefficient(b, opts.separation_bound),
                converged: false,
            };
        }
        if da.abs().max(db.abs()) < opts.tol {
            return UnivariateFit {
                intercept: a,
                slope: b,
                converged: true,
            };
        }
    }
    UnivariateFit {
        intercept: a,
        slope: b,
        converged: false,
    }
}

fn clamp_coefficient(b: f64, bound: f64) -> f64 {
    if b.is_nan() {
        0.0
    } else {
        b.clamp(-bound, bound)
    }
}

#[inline]
fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fisher information XᵀWX and score Xᵀ(y - p) at `beta`.
fn accumulate(design: &Matrix, response: &[bool], beta: &[f64], info: &mut [f64], grad: &mut [f64]) {
    let q = design.cols();
    info.iter_mut().for_each(|v| *v = 0.0);
    grad.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..design.rows() {
        let row = design.row(i);
        let p = logistic(dot(row, beta));
        let w = p * (1.0 - p);
        let r = if response[i] { 1.0 - p } else { -p };
        for j in 0..q {
            grad[j] += r * row[j];
            let wj = w * row[j];
            for k in j..q {
                info[j * q + k] += wj * row[k];
            }
        }
    }
    for j in 0..q {
        for k in 0..j {
            info[j * q + k] = info[k * q + j];
        }
    }
}

/// In-place Cholesky factorisation (lower triangle). Returns false when a
/// pivot is not clearly positive.
fn cholesky(a: &mut [f64], q: usize) -> bool {
    let scale = (0..q).map(|i| a[i * q + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return false;
    }
    for j in 0..q {
        let mut d = a[j * q + j];
        for k in 0..j {
            d -= a[j * q + k] * a[j * q + k];
        }
        if !(d > 1e-13 * scale) {
            return false;
        }
        let d = d.sqrt();
        a[j * q + j] = d;
        for i in j + 1..q {
            let mut s = a[i * q + j];
            for k in 0..j {
                s -= a[i * q + k] * a[j * q + k];
            }
            a[i * q + j] = s / d;
        }
    }
    true
}

fn factor_with_ridge(a: &[f64], q: usize, ridge: f64) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if cholesky(&mut l, q) {
        return Some(l);
    }
    let mut l = a.to_vec();
    for i in 0..q {
        l[i * q + i] += ridge;
    }
    cholesky(&mut l, q).then_some(l)
}

fn cholesky_solve(l: &[f64], q: usize, b: &mut [f64]) {
    for i in 0..q {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * q + k] * b[k];
        }
        b[i] = s / l[i * q + i];
    }
    for i in (0..q).rev() {
        let mut s = b[i];
        for k in i + 1..q {
            s -= l[k * q + i] * b[k];
        }
        b[i] = s / l[i * q + i];
    }
}

fn solve_spd(a: &[f64], q: usize, b: &mut [f64], ridge: f64) -> bool {
    match factor_with_ridge(a, q, ridge) {
        Some(l) => {
            cholesky_solve(&l, q, b);
            true
        }
        None => false,
    }
}

fn invert_spd(a: &[f64], q: usize, ridge: f64) -> Option<Vec<f64>> {
    let l = factor_with_ridge(a, q, ridge)?;
    let mut inv = vec![0.0; q * q];
    let mut e = vec![0.0; q];
    for j in 0..q {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        cholesky_solve(&l, q, &mut e);
        for i in 0..q {
            inv[i * q + j] = e[i];
        }
    }
    // Symmetrise away round-off.
    for i in 0..q {
        for j in 0..i {
            let m = 0.5 * (inv[i * q + j] + inv[j * q + i]);
            inv[i * q + j] = m;
            inv[j * q + i] = m;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn design_1x(x: &[f64]) -> Matrix {
        let rows: Vec<[f64; 2]> = x.iter().map(|&v| [1.0, v]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    fn bools(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&b| b == 1).collect()
    }

    /// Brute-force maximiser of the log-likelihood over a square lattice.
    fn grid_search(design: &Matrix, y: &[bool], center: [f64; 2], half_width: f64, step: f64) -> [f64; 2] {
        let steps = (2.0 * half_width / step).round() as i64;
        let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
        for i in 0..=steps {
            let a = center[0] - half_width + i as f64 * step;
            for j in 0..=steps {
                let b = center[1] - half_width + j as f64 * step;
                let ll = log_likelihood(design, y, &[a, b]);
                if ll > best.0 {
                    best = (ll, [a, b]);
                }
            }
        }
        best.1
    }

    #[test]
    fn intercept_only_balanced() {
        let design = Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]]).unwrap();
        let fit = fit_logistic(&design, &bools(&[1, 0, 1, 0])).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-12);
        // Var = 1 / (n p (1 - p)) = 1
        assert!((fit.covariance.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_separation_is_flagged() {
        let design = design_1x(&[0.0, 0.0, 1.0, 1.0]);
        let fit = fit_logistic(&design, &bools(&[0, 0, 1, 1])).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.failure, Some(FitFailure::Separation));
        assert!(fit.coefficients.iter().all(|b| b.abs() <= 15.0));
    }

    #[test]
    fn quasi_separated_example_is_flagged() {
        // Every x = 1 subject responds, so the slope MLE is infinite.
        let design = design_1x(&[-1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let fit = fit_logistic(&design, &bools(&[0, 1, 1, 1, 0, 1])).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn matches_grid_search_oracle() {
        let x = [-1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
        let y = bools(&[0, 1, 1, 1, 0, 0]);
        let design = design_1x(&x);
        let fit = fit_logistic(&design, &y).unwrap();
        assert!(fit.converged);
        let oracle = grid_search(&design, &y, [0.0, 0.0], 2.0, 1e-3);
        // Frozen from the grid search: intercept 0, slope ln 2.
        assert!(oracle[0].abs() < 1e-3);
        assert!((oracle[1] - std::f64::consts::LN_2).abs() < 1e-3);
        assert!((fit.coefficients[0] - oracle[0]).abs() < 1e-2);
        assert!((fit.coefficients[1] - oracle[1]).abs() < 1e-2);
    }

    #[test]
    fn dimension_errors() {
        let design = design_1x(&[0.0, 1.0]);
        assert!(fit_logistic(&design, &[true]).is_err());
        let wide = Matrix::from_rows(&[[1.0, 0.0, 2.0]]).unwrap();
        assert!(fit_logistic(&wide, &[true]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn collinear_design_is_not_converged() {
        let design = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let fit = fit_logistic(&design, &bools(&[1, 0, 1, 0])).unwrap();
        // Rescued by the ridge; the score is zero at the start.
        assert!(fit.converged);
        assert!(fit.coefficients.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn univariate_agrees_with_general_fit() {
        let x = [0.3, -1.2, 0.8, 2.0, -0.4, 0.1, 1.5, -2.2, 0.9, -0.7];
        let y = bools(&[1, 0, 0, 1, 0, 1, 1, 0, 1, 0]);
        let general = fit_logistic(&design_1x(&x), &y).unwrap();
        let fast = fit_univariate(&x, &y, &IrlsOptions::default());
        assert!(general.converged && fast.converged);
        assert!((general.coefficients[0] - fast.intercept).abs() < 1e-9);
        assert!((general.coefficients[1] - fast.slope).abs() < 1e-9);
    }

    #[test]
    fn univariate_degenerate_inputs() {
        let opts = IrlsOptions::default();
        assert!(!fit_univariate(&[1.0, 1.0, 1.0], &bools(&[1, 0, 1]), &opts).converged);
        assert!(!fit_univariate(&[1.0, 2.0, 3.0], &bools(&[1, 1, 1]), &opts).converged);
        assert!(!fit_univariate(&[0.0, 0.0, 1.0, 1.0], &bools(&[0, 0, 1, 1]), &opts).converged);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn converged_fit_is_local_maximum(
            x in prop::collection::vec(-2.0f64..2.0, 8..40),
            u in prop::collection::vec(0.0f64..1.0, 40),
            a in -1.0f64..1.0,
            b in -1.5f64..1.5,
        ) {
            let y: Vec<bool> = x.iter().zip(&u).map(|(&xi, &ui)| ui < logistic(a + b * xi)).collect();
            let design = design_1x(&x);
            let fit = fit_logistic(&design, &y).unwrap();
            prop_assume!(fit.converged);
            let ll = fit.log_likelihood(&design, &y);
            for da in [-0.05, 0.0, 0.05] {
                for db in [-0.05, 0.0, 0.05] {
                    let other = [fit.coefficients[0] + da, fit.coefficients[1] + db];
                    prop_assert!(ll >= log_likelihood(&design, &y, &other) - 1e-12);
                }
            }
            // Score vanishes at the solution.
            let mut info = vec![0.0; 4];
            let mut grad = vec![0.0; 2];
            accumulate(&design, &y, &fit.coefficients, &mut info, &mut grad);
            prop_assert!(grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-6);
            // Covariance symmetric positive definite.
            let c = &fit.covariance;
            prop_assert!((c.get(0, 1) - c.get(1, 0)).abs() <= 1e-10 * c.get(0, 1).abs().max(1.0));
            prop_assert!(c.get(0, 0) > 0.0 && c.get(1, 1) > 0.0);
            prop_assert!(c.get(0, 0) * c.get(1, 1) - c.get(0, 1) * c.get(1, 0) > 0.0);
        }
    }
}
