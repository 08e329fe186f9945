//! Weighted logistic regression with fractional responses, fitted by
//! iteratively reweighted least squares (Newton-Raphson on the weighted
//! binomial log-likelihood).

use nalgebra::{DMatrix, DVector};

pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
pub const FALLBACK_RIDGE: f64 = 1e-6;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// Result of a raw IRLS fit over a dense design with an explicit intercept
/// column at index 0.
#[derive(Debug, Clone)]
pub struct IrlsFit {
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ridge penalty actually applied (0 unless requested or needed).
    pub ridge: f64,
}

/// `ln p` and `ln(1 - p)` computed from the linear predictor without
/// cancellation.
fn log_probs(eta: f64) -> (f64, f64) {
    // ln σ(η) = -softplus(-η), ln(1-σ(η)) = -softplus(η)
    let softplus = |v: f64| if v > 0.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
    (-softplus(-eta), -softplus(eta))
}

pub fn weighted_log_likelihood(x: &DMatrix<f64>, beta: &DVector<f64>, y: &[f64], w: &[f64]) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter().zip(w))
        .map(|(&e, (&yi, &wi))| {
            let (lp, lq) = log_probs(e);
            wi * (yi * lp + (1.0 - yi) * lq)
        })
        .sum()
}

fn penalised(ll: f64, beta: &DVector<f64>, ridge: f64) -> f64 {
    ll - 0.5 * ridge * beta.iter().skip(1).map(|b| b * b).sum::<f64>()
}

/// Fits `y ~ σ(Xβ)`; `x` must contain the intercept column. `ridge`
/// penalises every coefficient except the intercept. A singular Hessian
/// switches on the fallback ridge.
pub fn fit(x: &DMatrix<f64>, y: &[f64], w: &[f64], ridge: f64) -> IrlsFit {
    let p = x.ncols();
    let mut ridge = ridge;
    let mut beta = DVector::<f64>::zeros(p);
    // start the intercept at the weighted mean response
    let wsum: f64 = w.iter().sum();
    if wsum > 0.0 && p > 0 {
        let mean = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        beta[0] = logit(mean.clamp(1e-6, 1.0 - 1e-6));
    }
    let mut objective = penalised(weighted_log_likelihood(x, &beta, y, w), &beta, ridge);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let eta = x * &beta;
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        for (i, &e) in eta.iter().enumerate() {
            let pi = sigmoid(e);
            let row = x.row(i);
            let resid = w[i] * (y[i] - pi);
            let curv = w[i] * pi * (1.0 - pi);
            for a in 0..p {
                grad[a] += resid * row[a];
                if curv != 0.0 {
                    for b in a..p {
                        hess[(a, b)] += curv * row[a] * row[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        for a in 1..p {
            grad[a] -= ridge * beta[a];
            hess[(a, a)] += ridge;
        }
        let step = match solve_spd(&hess, &grad) {
            Some(s) => s,
            None if ridge < FALLBACK_RIDGE => {
                ridge = FALLBACK_RIDGE;
                objective = penalised(weighted_log_likelihood(x, &beta, y, w), &beta, ridge);
                continue;
            }
            None => {
                // ridge already on and still singular: also damp the intercept
                let mut h = hess.clone();
                h[(0, 0)] += ridge;
                match solve_spd(&h, &grad) {
                    Some(s) => s,
                    None => break,
                }
            }
        };
        // step halving keeps the penalised likelihood non-decreasing
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut cand_obj = penalised(weighted_log_likelihood(x, &candidate, y, w), &candidate, ridge);
        let mut halvings = 0;
        while cand_obj < objective - 1e-12 * objective.abs().max(1.0) && halvings < 30 {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            cand_obj = penalised(weighted_log_likelihood(x, &candidate, y, w), &candidate, ridge);
            halvings += 1;
        }
        let change = (&step * scale).amax();
        beta = candidate;
        objective = cand_obj;
        if change < TOLERANCE {
            converged = true;
            break;
        }
    }
    let log_likelihood = weighted_log_likelihood(x, &beta, y, w);
    IrlsFit {
        beta: beta.iter().copied().collect(),
        log_likelihood,
        iterations,
        converged,
        ridge,
    }
}

/// Cholesky solve; `None` when the matrix is not numerically positive
/// definite.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().amax();
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    let chol = a.clone().cholesky()?;
    // reject near-singular factorizations
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot < 1e-13 * scale {
        return None;
    }
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_logit_inverse() {
        for z in [-30.0, -4.9, 0.0, 1.5, 6.8, 20.0] {
            assert!((logit(sigmoid(z)) - z).abs() < 1e-6 * z.abs().max(1.0));
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn recovers_planted_two_parameter_model() {
        // all b in {0,1}^2, y = σ(-2 + 3 b1)
        let rows = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let x = DMatrix::from_fn(4, 3, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        let y: Vec<f64> = rows.iter().map(|r| sigmoid(-2.0 + 3.0 * r[0])).collect();
        let f = fit(&x, &y, &[1.0; 4], 0.0);
        assert!(f.converged);
        assert!((f.beta[0] + 2.0).abs() < 1e-6);
        assert!((f.beta[1] - 3.0).abs() < 1e-6);
        assert!(f.beta[2].abs() < 1e-6);
    }

    #[test]
    fn singular_design_engages_ridge() {
        // duplicated column
        let x = DMatrix::from_row_slice(4, 3, &[1., 0., 0., 1., 1., 1., 1., 0., 0., 1., 1., 1.]);
        let y = [0.2, 0.7, 0.25, 0.65];
        let f = fit(&x, &y, &[1.0; 4], 0.0);
        assert_eq!(f.ridge, FALLBACK_RIDGE);
        assert!(f.converged);
        assert!((f.beta[1] - f.beta[2]).abs() < 1e-6);
    }
}
