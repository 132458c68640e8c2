//! Small dense Levenberg-Marquardt solver with Marquardt diagonal scaling.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop when the scaled gradient (cosine between residual and every
    /// Jacobian column) falls below this.
    pub gtol: f64,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings { max_iterations: 500, gtol: 1e-12, xtol: 1e-14 }
    }
}

/// Threshold on the scaled gradient for declaring convergence.
pub const CONVERGED_GTOL: f64 = 1e-6;
/// Residual norm, relative to the data norm, below which the fit is exact.
pub const EXACT_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Half sum of squares after each accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
}

impl LmOutcome {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().expect("history is never empty")
    }
}

/// Largest `|J_j . r| / (|J_j| |r|)` over columns.
///
/// `floors[j]`, when positive, is a natural magnitude for parameter `j`: a
/// column whose parameter sits below it is normalized as if the parameter
/// were that large. This keeps parameters that enter quadratically around
/// zero from blocking the test.
pub fn scaled_gradient(jac: &DMatrix<f64>, r: &DVector<f64>, p: &DVector<f64>, floors: &[f64]) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = jac.transpose() * r;
    (0..jac.ncols())
        .map(|j| {
            let mut cn = jac.column(j).norm();
            let floor = floors.get(j).copied().unwrap_or(0.0);
            if floor > 0.0 && p[j].abs() < floor {
                cn *= floor / p[j].abs().max(f64::MIN_POSITIVE);
            }
            if cn == 0.0 {
                0.0
            } else {
                g[j].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

fn is_converged(jac: &DMatrix<f64>, r: &DVector<f64>, p: &DVector<f64>, floors: &[f64], data_norm: f64) -> bool {
    r.norm() <= EXACT_RTOL * data_norm || scaled_gradient(jac, r, p, floors) <= CONVERGED_GTOL
}

/// Minimizes `0.5 |r(p)|^2`. `eval` returns residuals and Jacobian, or `None`
/// when the parameters are outside the model's domain.
pub fn minimize<F>(
    eval: F,
    start: DVector<f64>,
    floors: &[f64],
    data_norm: f64,
    settings: &LmSettings,
) -> Option<LmOutcome>
where
    F: Fn(&DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)>,
{
    let n = start.len();
    let mut p = start;
    let (mut r, mut jac) = eval(&p)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut history = vec![cost];

    let mut jtj = jac.transpose() * &jac;
    let max_diag = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let mut lambda = 1e-3 * max_diag.max(f64::MIN_POSITIVE);
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        if r.norm() <= EXACT_RTOL * data_norm * 1e-3 || scaled_gradient(&jac, &r, &p, floors) <= settings.gtol {
            break;
        }
        iterations += 1;
        let g = jac.transpose() * &r;
        let diag_floor = 1e-12 * (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let mut accepted = false;
        let mut small_step = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = &p + &step;
            small_step = step.norm() <= settings.xtol * (p.norm() + settings.xtol);
            if let Some((r_new, j_new)) = eval(&trial) {
                let new_cost = 0.5 * r_new.norm_squared();
                if new_cost < cost {
                    p = trial;
                    r = r_new;
                    jac = j_new;
                    jtj = jac.transpose() * &jac;
                    cost = new_cost;
                    history.push(cost);
                    lambda = (lambda / 3.0).max(1e-300);
                    accepted = true;
                    break;
                }
            }
            if small_step {
                break;
            }
            lambda *= 2.0;
        }
        if !accepted || small_step {
            break;
        }
    }

    let converged = is_converged(&jac, &r, &p, floors, data_norm);
    Some(LmOutcome { params: p, residuals: r, jacobian: jac, iterations, converged, cost_history: history })
}
