//! Final Prediction Error order selection.
//!
//! Every candidate order is fitted by Gaussian least squares on the common
//! window `t = p_max+1..N`, so the residual variances are nested and
//! comparable: `σ̂²_p = SSR_p / n` with `n = N - p_max`, and
//! `FPE(p) = σ̂²_p (n + p) / (n - p)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, spd_solve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub orders: Vec<usize>,
    pub residual_variances: Vec<f64>,
    pub criterion: Vec<f64>,
    pub chosen_order: usize,
    pub effective_sample: usize,
}

fn least_squares_ssr(series: &[f64], order: usize, start: usize) -> Result<f64> {
    let n = series.len();
    let rows = n - start;
    let x = DMatrix::from_fn(rows, order, |r, j| series[start + r - 1 - j]);
    let y = DVector::from_iterator(rows, series[start..].iter().copied());
    let xt = x.transpose();
    let coef = spd_solve(&(&xt * &x), &(&xt * &y))
        .ok_or_else(|| Error::degenerate(format!("singular least-squares system at order {order}")))?;
    let fitted = &x * coef;
    Ok(compensated_sum((0..rows).map(|r| (y[r] - fitted[r]).powi(2))))
}

pub fn fpe_select(series: &[f64], p_max: usize) -> Result<OrderSelection> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    if series.len() <= 3 * p_max {
        return Err(Error::invalid(format!(
            "series length {} too short for p_max {p_max}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let n_eff = series.len() - p_max;
    let orders: Vec<usize> = (1..=p_max).collect();
    let ssr: Vec<f64> = orders
        .par_iter()
        .map(|&p| least_squares_ssr(series, p, p_max))
        .collect::<Result<_>>()?;
    let nf = n_eff as f64;
    let residual_variances: Vec<f64> = ssr.iter().map(|s| s / nf).collect();
    if residual_variances.iter().any(|v| *v <= 0.0) {
        return Err(Error::degenerate("zero residual variance; series is perfectly predictable"));
    }
    let criterion: Vec<f64> = residual_variances
        .iter()
        .zip(&orders)
        .map(|(v, &p)| v * (nf + p as f64) / (nf - p as f64))
        .collect();
    let mut best = 0;
    for i in 1..criterion.len() {
        if criterion[i] < criterion[best] {
            best = i;
        }
    }
    Ok(OrderSelection {
        chosen_order: orders[best],
        orders,
        residual_variances,
        criterion,
        effective_sample: n_eff,
    })
}
