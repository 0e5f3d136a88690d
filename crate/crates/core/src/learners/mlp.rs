//! One-hidden-layer perceptron combiner. Hidden units use the bipolar
//! sigmoid 2/(1+e^-z) - 1; the output node is linear. Training minimizes
//! the sum of squared errors plus a fixed quadratic weight penalty with
//! Levenberg-Marquardt steps, on standardized inputs and targets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::domain::{Error, Result, TrainingSet};
use crate::learners::Standardizer;

const MU_INIT: f64 = 1e-3;
const MU_MIN: f64 = 1e-12;
const MU_MAX: f64 = 1e12;
const GRAD_TOL: f64 = 1e-8;

/// Fitted perceptron: layer sizes, flat weight vector and the input/target
/// standardization captured at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub hidden: usize,
    pub weights: Vec<f64>,
    pub norm: Standardizer,
}

/// Number of free parameters for the given layer sizes.
pub fn param_count(n_inputs: usize, hidden: usize) -> usize {
    hidden * (n_inputs + 1) + hidden + 1
}

impl MlpModel {
    /// Wrap raw weights with no standardization. Layout per hidden unit j:
    /// n input weights then the unit bias; after all units the output
    /// weights v_1..v_m and finally the output bias v_0.
    pub fn from_weights(n_inputs: usize, hidden: usize, weights: Vec<f64>) -> MlpModel {
        assert_eq!(weights.len(), param_count(n_inputs, hidden));
        MlpModel {
            n_inputs,
            hidden,
            weights,
            norm: Standardizer::identity(n_inputs),
        }
    }

    pub fn predict(&self, query: &[f64]) -> f64 {
        let x = self.norm.transform_x(query);
        let z = forward(self.n_inputs, self.hidden, &self.weights, &x);
        self.norm.inverse_y(z)
    }
}

fn bipolar_sigmoid(z: f64) -> f64 {
    2.0 / (1.0 + (-z).exp()) - 1.0
}

/// Network output for one (already standardized) pattern.
pub fn forward(n_inputs: usize, hidden: usize, weights: &[f64], x: &[f64]) -> f64 {
    let v_off = hidden * (n_inputs + 1);
    let mut out = weights[v_off + hidden];
    for j in 0..hidden {
        let block = &weights[j * (n_inputs + 1)..(j + 1) * (n_inputs + 1)];
        let z = block[n_inputs]
            + block[..n_inputs]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum::<f64>();
        out += weights[v_off + j] * bipolar_sigmoid(z);
    }
    out
}

/// Sum of squared errors over the given samples and its gradient with
/// respect to every weight.
pub fn sse_and_gradient(
    n_inputs: usize,
    hidden: usize,
    weights: &[f64],
    patterns: &[Vec<f64>],
    targets: &[f64],
) -> (f64, Vec<f64>) {
    let p = param_count(n_inputs, hidden);
    let mut grad = vec![0.0; p];
    let mut sse = 0.0;
    let mut row = vec![0.0; p];
    for (x, &y) in patterns.iter().zip(targets) {
        let r = output_and_jacobian_row(n_inputs, hidden, weights, x, &mut row) - y;
        sse += r * r;
        for (g, &j) in grad.iter_mut().zip(&row) {
            *g += 2.0 * r * j;
        }
    }
    (sse, grad)
}

/// Output for one pattern plus d(output)/d(weight) written into `row`.
fn output_and_jacobian_row(
    n_inputs: usize,
    hidden: usize,
    weights: &[f64],
    x: &[f64],
    row: &mut [f64],
) -> f64 {
    let v_off = hidden * (n_inputs + 1);
    let mut out = weights[v_off + hidden];
    for j in 0..hidden {
        let off = j * (n_inputs + 1);
        let block = &weights[off..off + n_inputs + 1];
        let z = block[n_inputs]
            + block[..n_inputs]
                .iter()
                .zip(x)
                .map(|(w, xi)| w * xi)
                .sum::<f64>();
        let phi = bipolar_sigmoid(z);
        let dphi = 0.5 * (1.0 - phi * phi);
        let v = weights[v_off + j];
        out += v * phi;
        for i in 0..n_inputs {
            row[off + i] = v * dphi * x[i];
        }
        row[off + n_inputs] = v * dphi;
        row[v_off + j] = phi;
    }
    row[v_off + hidden] = 1.0;
    out
}

/// Fit with `hidden` units for at most `epochs` Levenberg-Marquardt
/// iterations; `alpha` weights the quadratic penalty on all weights.
/// Non-convergence is not an error: the best weights seen are returned.
pub fn fit(
    train: &TrainingSet,
    hidden: usize,
    epochs: usize,
    alpha: f64,
    seed: u64,
) -> Result<MlpModel> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if hidden == 0 || epochs == 0 {
        return Err(Error::InvalidParameter {
            name: "mlp",
            reason: format!("need hidden >= 1 and epochs >= 1, got {hidden}, {epochs}"),
        });
    }
    let n_inputs = train.n_features();
    let norm = Standardizer::fit(train.patterns(), train.targets());
    let xs: Vec<Vec<f64>> = train.patterns().iter().map(|p| norm.transform_x(p)).collect();
    let ys: Vec<f64> = train.targets().iter().map(|&y| norm.transform_y(y)).collect();

    let p = param_count(n_inputs, hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta: Vec<f64> = (0..p).map(|_| rng.gen_range(-0.5..0.5)).collect();

    let n_rows = xs.len();
    let mut jac = DMatrix::zeros(n_rows, p);
    let mut residuals = DVector::zeros(n_rows);
    let mut grad = DVector::zeros(p);
    let mut normal_base = DMatrix::zeros(p, p);
    let mut mu = MU_INIT;
    let mut objective = f64::INFINITY;
    let mut row = vec![0.0; p];
    // the linearization only changes when a step is accepted
    let mut relinearize = true;

    for _ in 0..epochs {
        if relinearize {
            for (r, (x, &y)) in xs.iter().zip(&ys).enumerate() {
                let out = output_and_jacobian_row(n_inputs, hidden, &theta, x, &mut row);
                residuals[r] = out - y;
                for (c, &j) in row.iter().enumerate() {
                    jac[(r, c)] = j;
                }
            }
            let penalty: f64 = theta.iter().map(|w| w * w).sum();
            objective = residuals.norm_squared() + alpha * penalty;

            // half-gradient of the penalized objective
            grad = jac.tr_mul(&residuals);
            for (g, &w) in grad.iter_mut().zip(&theta) {
                *g += alpha * w;
            }
            for c1 in 0..p {
                for c2 in c1..p {
                    let dot = jac.column(c1).dot(&jac.column(c2));
                    normal_base[(c1, c2)] = dot;
                    normal_base[(c2, c1)] = dot;
                }
            }
            relinearize = false;
        }
        if grad.norm() < GRAD_TOL {
            break;
        }

        let mut normal = normal_base.clone();
        for d in 0..p {
            normal[(d, d)] += alpha + mu;
        }
        let step = match normal.cholesky() {
            Some(chol) => chol.solve(&(-&grad)),
            None => {
                mu = (mu * 10.0).min(MU_MAX);
                continue;
            }
        };
        let candidate: Vec<f64> = theta.iter().zip(step.iter()).map(|(w, d)| w + d).collect();
        let cand_objective = {
            let sse: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, &y)| {
                    let r = forward(n_inputs, hidden, &candidate, x) - y;
                    r * r
                })
                .sum();
            sse + alpha * candidate.iter().map(|w| w * w).sum::<f64>()
        };
        if cand_objective < objective {
            theta = candidate;
            mu = (mu / 10.0).max(MU_MIN);
            relinearize = true;
        } else {
            mu = (mu * 10.0).min(MU_MAX);
        }
    }

    Ok(MlpModel {
        n_inputs,
        hidden,
        weights: theta,
        norm,
    })
}
