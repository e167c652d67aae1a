//! Levenberg–Marquardt weighted least squares. Models may supply an
//! analytic Jacobian; otherwise forward differences are used.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FitError;

/// One observation with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl DataPoint {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma }
    }
}

/// A parameterised prediction of every data point at once.
///
/// `predict` returns `None` when the parameters leave the model's domain
/// (negative widths and the like); the engine treats such trial steps as
/// rejected.
pub trait Model {
    fn n_params(&self) -> usize;
    fn predict(&self, xs: &[f64], params: &[f64]) -> Option<Vec<f64>>;

    /// Analytic `∂prediction/∂param`, `n_data × n_params`.
    fn jacobian(&self, _xs: &[f64], _params: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// `p0 + p1 x + … + p_degree x^degree` with its exact Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Polynomial {
    pub degree: usize,
}

impl Model for Polynomial {
    fn n_params(&self) -> usize {
        self.degree + 1
    }

    fn predict(&self, xs: &[f64], p: &[f64]) -> Option<Vec<f64>> {
        Some(
            xs.iter()
                .map(|&x| p.iter().rev().fold(0.0, |acc, c| acc * x + c))
                .collect(),
        )
    }

    fn jacobian(&self, xs: &[f64], _params: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_fn(xs.len(), self.degree + 1, |i, k| xs[i].powi(k as i32)))
    }
}

/// Adapter for pointwise models `f(x, params)`. Non-finite values mark the
/// parameters as invalid.
pub struct PointModel<F> {
    n_params: usize,
    f: F,
}

impl<F: Fn(f64, &[f64]) -> f64> PointModel<F> {
    pub fn new(n_params: usize, f: F) -> Self {
        Self { n_params, f }
    }
}

impl<F: Fn(f64, &[f64]) -> f64> Model for PointModel<F> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn predict(&self, xs: &[f64], params: &[f64]) -> Option<Vec<f64>> {
        let out: Vec<f64> = xs.iter().map(|&x| (self.f)(x, params)).collect();
        out.iter().all(|v| v.is_finite()).then_some(out)
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }

    fn predict(&self, xs: &[f64], params: &[f64]) -> Option<Vec<f64>> {
        (**self).predict(xs, params)
    }

    fn jacobian(&self, xs: &[f64], params: &[f64]) -> Option<DMatrix<f64>> {
        (**self).jacobian(xs, params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub lambda_init: f64,
    /// Factor applied to λ on a rejected (×) or accepted (÷) step.
    pub lambda_factor: f64,
    pub chi2_rel_tol: f64,
    pub step_tol: f64,
    /// Scale the covariance by the reduced χ².
    pub scale_covariance: bool,
    /// Normal equations with a larger (column-scaled) condition number are
    /// reported as singular.
    pub max_condition: f64,
    /// Lower bound on the parameter magnitude used for difference steps.
    pub jacobian_floor: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            lambda_init: 1e-3,
            lambda_factor: 10.0,
            chi2_rel_tol: 1e-10,
            step_tol: 1e-12,
            scale_covariance: true,
            max_condition: 1e14,
            jacobian_floor: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Row-major covariance of `params`.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub residual_norm: f64,
    pub dof: usize,
    pub n_iterations: usize,
    pub converged: bool,
}

impl FitResult {
    /// 1σ uncertainties: square roots of the covariance diagonal.
    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

fn weighted_residuals(pred: &[f64], data: &[DataPoint]) -> DVector<f64> {
    DVector::from_iterator(
        data.len(),
        pred.iter().zip(data).map(|(p, d)| (d.y - p) / d.sigma),
    )
}

/// Jacobian of the raw model predictions, `n_data × n_params`: the model's
/// own if it has one, forward differences otherwise.
pub fn numeric_jacobian<M: Model>(
    model: &M,
    xs: &[f64],
    params: &[f64],
    floor: f64,
) -> Option<DMatrix<f64>> {
    let base = model.predict(xs, params)?;
    jacobian_from(model, xs, params, &base, floor)
}

fn jacobian_from<M: Model>(
    model: &M,
    xs: &[f64],
    params: &[f64],
    base: &[f64],
    floor: f64,
) -> Option<DMatrix<f64>> {
    if let Some(j) = model.jacobian(xs, params) {
        return Some(j);
    }
    let eps = f64::EPSILON.sqrt();
    let mut jac = DMatrix::zeros(xs.len(), params.len());
    let mut p = params.to_vec();
    for j in 0..params.len() {
        let mut h = eps * params[j].abs().max(floor);
        p[j] = params[j] + h;
        // exact representable step
        h = p[j] - params[j];
        let shifted = match model.predict(xs, &p) {
            Some(v) => v,
            None => {
                p[j] = params[j] - h;
                h = -h;
                model.predict(xs, &p)?
            }
        };
        for i in 0..xs.len() {
            jac[(i, j)] = (shifted[i] - base[i]) / h;
        }
        p[j] = params[j];
    }
    Some(jac)
}

/// Central differences with step `ε^(1/3)`; falls back to forward ones
/// where the model is undefined on either side.
fn central_jacobian<M: Model>(model: &M, xs: &[f64], params: &[f64], base: &[f64], floor: f64) -> Option<DMatrix<f64>> {
    if let Some(j) = model.jacobian(xs, params) {
        return Some(j);
    }
    let eps = f64::EPSILON.cbrt();
    let mut jac = DMatrix::zeros(xs.len(), params.len());
    let mut p = params.to_vec();
    for j in 0..params.len() {
        let h = eps * params[j].abs().max(floor);
        p[j] = params[j] + h;
        let hu = p[j] - params[j];
        let up = model.predict(xs, &p);
        p[j] = params[j] - h;
        let hd = params[j] - p[j];
        let down = model.predict(xs, &p);
        p[j] = params[j];
        match (up, down) {
            (Some(u), Some(d)) => {
                for i in 0..xs.len() {
                    jac[(i, j)] = (u[i] - d[i]) / (hu + hd);
                }
            }
            _ => {
                let fwd = jacobian_from(model, xs, params, base, floor)?;
                jac.set_column(j, &fwd.column(j));
            }
        }
    }
    Some(jac)
}

/// Condition number of the normal matrix after unit-diagonal scaling.
fn scaled_condition(normal: &DMatrix<f64>) -> f64 {
    let n = normal.nrows();
    let d: Vec<f64> = (0..n).map(|i| normal[(i, i)]).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Minimises `Σ ((y − f(x; p)) / σ)²` starting from `init`.
pub fn least_squares_fit<M: Model>(
    model: &M,
    data: &[DataPoint],
    init: &[f64],
    options: &LmOptions,
) -> Result<FitResult, FitError> {
    let n_params = model.n_params();
    if init.len() != n_params {
        return Err(FitError::InvalidInput(format!(
            "expected {n_params} initial parameters, got {}",
            init.len()
        )));
    }
    if data.iter().any(|d| !(d.sigma > 0.0) || !d.y.is_finite() || !d.x.is_finite()) {
        return Err(FitError::InvalidInput(
            "every point needs finite x, y and σ > 0".into(),
        ));
    }
    if data.len() < n_params {
        return Err(FitError::Singular {
            condition: f64::INFINITY,
        });
    }
    let xs: Vec<f64> = data.iter().map(|d| d.x).collect();
    let weights: Vec<f64> = data.iter().map(|d| 1.0 / d.sigma).collect();

    let mut params = init.to_vec();
    let pred = model
        .predict(&xs, &params)
        .ok_or_else(|| FitError::InvalidInput("initial parameters outside model domain".into()))?;
    let mut resid = weighted_residuals(&pred, data);
    let mut chi2 = resid.norm_squared();
    let mut jac = weighted_jacobian(model, &xs, &params, &pred, &weights, options)?;

    let condition = scaled_condition(&(jac.transpose() * &jac));
    if !(condition <= options.max_condition) {
        return Err(FitError::Singular { condition });
    }

    let mut lambda = options.lambda_init;
    let mut converged = false;
    let mut iterations = 0;
    let tiny_chi2 = 1e-28 * data.len() as f64;

    while iterations < options.max_iter {
        iterations += 1;
        if chi2 <= tiny_chi2 {
            converged = true;
            break;
        }
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * &resid;
        let mut accepted = false;
        while !accepted {
            let mut damped = normal.clone();
            for i in 0..n_params {
                damped[(i, i)] += lambda * normal[(i, i)].max(1e-300);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&gradient),
                None => {
                    lambda *= options.lambda_factor;
                    if lambda > 1e300 {
                        break;
                    }
                    continue;
                }
            };
            let param_norm = params.iter().map(|p| p * p).sum::<f64>().sqrt();
            let small_step = step.norm() <= options.step_tol * (param_norm + options.step_tol);
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_eval = model.predict(&xs, &trial).map(|pr| {
                let r = weighted_residuals(&pr, data);
                let c = r.norm_squared();
                (pr, r, c)
            });
            match trial_eval {
                Some((pr, r, c)) if c.is_finite() && c <= chi2 => {
                    let rel = (chi2 - c) / chi2.max(f64::MIN_POSITIVE);
                    params = trial;
                    resid = r;
                    chi2 = c;
                    lambda = (lambda / options.lambda_factor).max(1e-15);
                    jac = weighted_jacobian(model, &xs, &params, &pr, &weights, options)?;
                    accepted = true;
                    if rel < options.chi2_rel_tol || small_step {
                        converged = true;
                    }
                }
                _ => {
                    if small_step {
                        converged = true;
                        break;
                    }
                    lambda *= options.lambda_factor;
                    if lambda > 1e300 {
                        break;
                    }
                }
            }
        }
        if converged || !accepted {
            break;
        }
    }

    // undamped Gauss–Newton polish on a central-difference Jacobian, which
    // removes the O(√ε) gradient bias of the forward one
    if converged {
        if let Some(pr) = model.predict(&xs, &params) {
            if let Ok(j) = weighted_central_jacobian(model, &xs, &params, &pr, &weights, options) {
                jac = j;
            }
        }
        for _ in 0..3 {
            // least-squares solve of J·δ = r without squaring the condition number
            let Ok(step) = jac.clone().svd(true, true).solve(&resid, 0.0) else {
                break;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let Some(pr) = model.predict(&xs, &trial) else {
                break;
            };
            let r = weighted_residuals(&pr, data);
            let c = r.norm_squared();
            // allow roundoff in χ² itself
            if !(c <= chi2 * (1.0 + 1e-12)) {
                break;
            }
            let Ok(j) = weighted_central_jacobian(model, &xs, &trial, &pr, &weights, options) else {
                break;
            };
            let done = trial == params;
            params = trial;
            resid = r;
            chi2 = c;
            jac = j;
            if done {
                break;
            }
        }
    }

    let normal = jac.transpose() * &jac;
    let condition = scaled_condition(&normal);
    if !(condition <= options.max_condition) {
        return Err(FitError::Singular { condition });
    }
    let inverse = normal
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| normal.clone().try_inverse())
        .ok_or(FitError::Singular { condition })?;
    let dof = data.len() - n_params;
    let scale = if options.scale_covariance && dof > 0 {
        chi2 / dof as f64
    } else {
        1.0
    };
    let covariance = (0..n_params)
        .map(|i| {
            (0..n_params)
                .map(|j| 0.5 * (inverse[(i, j)] + inverse[(j, i)]) * scale)
                .collect()
        })
        .collect();

    Ok(FitResult {
        params,
        covariance,
        chi2,
        residual_norm: chi2.sqrt(),
        dof,
        n_iterations: iterations,
        converged,
    })
}

fn weighted_jacobian<M: Model>(
    model: &M,
    xs: &[f64],
    params: &[f64],
    pred: &[f64],
    weights: &[f64],
    options: &LmOptions,
) -> Result<DMatrix<f64>, FitError> {
    weight_rows(jacobian_from(model, xs, params, pred, options.jacobian_floor), weights)
}

fn weighted_central_jacobian<M: Model>(
    model: &M,
    xs: &[f64],
    params: &[f64],
    pred: &[f64],
    weights: &[f64],
    options: &LmOptions,
) -> Result<DMatrix<f64>, FitError> {
    weight_rows(central_jacobian(model, xs, params, pred, options.jacobian_floor), weights)
}

fn weight_rows(jac: Option<DMatrix<f64>>, weights: &[f64]) -> Result<DMatrix<f64>, FitError> {
    let mut jac = jac.ok_or_else(|| {
        FitError::InvalidInput("model undefined in the neighbourhood of the parameters".into())
    })?;
    for (i, w) in weights.iter().enumerate() {
        jac.row_mut(i).scale_mut(*w);
    }
    Ok(jac)
}

/// Gradient of χ² with respect to the parameters by central differences.
pub fn chi2_gradient<M: Model>(model: &M, data: &[DataPoint], params: &[f64], rel_step: f64) -> Vec<f64> {
    let xs: Vec<f64> = data.iter().map(|d| d.x).collect();
    let chi2 = |p: &[f64]| {
        model
            .predict(&xs, p)
            .map(|pr| weighted_residuals(&pr, data).norm_squared())
            .unwrap_or(f64::NAN)
    };
    let mut p = params.to_vec();
    (0..params.len())
        .map(|j| {
            let h = rel_step * params[j].abs().max(1e-3);
            p[j] = params[j] + h;
            let up = chi2(&p);
            p[j] = params[j] - h;
            let down = chi2(&p);
            p[j] = params[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn decay() -> PointModel<impl Fn(f64, &[f64]) -> f64> {
        PointModel::new(3, |x, p: &[f64]| p[0] * (-x / p[1]).exp() + p[2])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gradient_vanishes_at_convergence(
            a in 1.0..10.0f64,
            tau in 0.5..3.0f64,
            c in -1.0..1.0f64,
            sigma in 0.01..0.2f64,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, sigma).unwrap();
            let data: Vec<DataPoint> = (0..40)
                .map(|i| {
                    let x = 0.1 * i as f64;
                    DataPoint::new(x, a * (-x / tau).exp() + c + n.sample(&mut rng), sigma)
                })
                .collect();
            let model = decay();
            let fit = least_squares_fit(&model, &data, &[0.8 * a, 1.2 * tau, 0.0], &LmOptions::default()).unwrap();
            prop_assert!(fit.converged);
            let g = chi2_gradient(&model, &data, &fit.params, 1e-6);
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm < 1e-6 * (1.0 + fit.chi2), "|g| = {norm:e}, chi2 = {}", fit.chi2);
        }

        #[test]
        fn forward_jacobian_matches_central_differences(
            p in prop::array::uniform3(0.5..2.0f64),
            xs in prop::collection::vec(-2.0..2.0f64, 3..20),
        ) {
            let model = PointModel::new(3, |x, p: &[f64]| p[0] * (p[1] * x + p[2]).sin());
            let j = numeric_jacobian(&model, &xs, &p, 1e-2).unwrap();
            let h = 1e-6;
            let scale = j.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            for k in 0..3 {
                let (mut up, mut down) = (p, p);
                up[k] += h;
                down[k] -= h;
                let fu = model.predict(&xs, &up).unwrap();
                let fd = model.predict(&xs, &down).unwrap();
                for i in 0..xs.len() {
                    let central = (fu[i] - fd[i]) / (2.0 * h);
                    prop_assert!((j[(i, k)] - central).abs() <= 1e-5 * scale);
                }
            }
        }
    }
}
