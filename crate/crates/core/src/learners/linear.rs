//! Linear combiner: intercept plus one weight per base model, fitted by
//! minimum-norm least squares so collinear base forecasts (a common failure
//! mode when base models agree) are handled without a separate ridge path.

use nalgebra::{DMatrix, DVector};

use crate::domain::{Error, Result, TrainingSet};

/// Singular values below `RCOND * s_max` are treated as zero when solving.
const RCOND: f64 = 1e-10;

/// Fitted coefficients of the linear combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCoeffs {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl LinearCoeffs {
    pub fn predict(&self, query: &[f64]) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .zip(query)
                .map(|(a, y)| a * y)
                .sum::<f64>()
    }
}

/// Fit on the training set and evaluate the query in one step.
pub fn combine(train: &TrainingSet, query: &[f64]) -> Result<(f64, LinearCoeffs)> {
    let coeffs = fit(train)?;
    let forecast = coeffs.predict(query);
    Ok((forecast, coeffs))
}

/// Minimum-norm least-squares fit of targets against [1 | patterns].
pub fn fit(train: &TrainingSet) -> Result<LinearCoeffs> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let rows = train.len();
    let n = train.n_features();
    let design = DMatrix::from_fn(rows, n + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            train.patterns()[r][c - 1]
        }
    });
    let rhs = DVector::from_column_slice(train.targets());
    let svd = design.svd(true, true);
    let eps = svd.singular_values.max() * RCOND;
    let solution = svd
        .solve(&rhs, eps)
        .map_err(|reason| Error::InvalidParameter {
            name: "lr_solve",
            reason: reason.to_string(),
        })?;
    Ok(LinearCoeffs {
        intercept: solution[0],
        slopes: solution.as_slice()[1..].to_vec(),
    })
}
