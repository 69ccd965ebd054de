//! k-step AR forecasts, first differencing and forecast scoring.
//!
//! The scaled error measures follow the displays
//!
//! ```text
//! MAE  = Σ_{s=0}^{m-k} |F(N+s+k) - X(N+s+k)| / (m |X(N+s)|)
//! RMSE = Σ_{s=0}^{m-k} { [F(N+s+k) - X(N+s+k)]² / (m X(N+s)²) }^{1/2}
//! ```
//!
//! literally, including the per-term root in RMSE. Plain mean absolute error
//! and root mean squared error over the same forecasts are reported next to
//! them as `conventional_*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forecasts `X̂_{t+1}, …, X̂_{t+k}` from the end of `history`, feeding
/// earlier forecasts back in for unavailable lags.
pub fn forecast_path(coefficients: &[f64], history: &[f64], k: usize) -> Result<Vec<f64>> {
    let p = coefficients.len();
    if p == 0 {
        return Err(Error::invalid("empty coefficient vector"));
    }
    if k == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if history.len() < p {
        return Err(Error::invalid(format!(
            "history of length {} is shorter than the order {p}",
            history.len()
        )));
    }
    let mut window: Vec<f64> = history[history.len() - p..].to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let next: f64 = coefficients
            .iter()
            .enumerate()
            .map(|(j, c)| c * window[window.len() - 1 - j])
            .sum();
        out.push(next);
        window.push(next);
    }
    Ok(out)
}

pub fn forecast_k(coefficients: &[f64], history: &[f64], k: usize) -> Result<f64> {
    Ok(*forecast_path(coefficients, history, k)?.last().expect("k >= 1"))
}

/// `d_t = X_{t+1} - X_t`.
pub fn difference(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::invalid("differencing needs at least two observations"));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Inverse of [`difference`] given the first level `anchor = X_1`.
pub fn undifference(diffs: &[f64], anchor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(diffs.len() + 1);
    out.push(anchor);
    let mut level = anchor;
    for d in diffs {
        level += d;
        out.push(level);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastScore {
    pub k: usize,
    pub m: usize,
    /// Number of forecasts scored, `m - k + 1`.
    pub forecasts: usize,
    pub mae: f64,
    pub rmse: f64,
    pub conventional_mae: f64,
    pub conventional_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub method: String,
    pub in_sample: usize,
    pub differenced: bool,
    pub scores: Vec<ForecastScore>,
}

/// Score forecasts `F(N+s+k)`, `s = 0..=m-k`, against `actuals`, which holds
/// the whole series `X(1), X(2), …` (1-based in the formulas above).
pub fn score_forecasts(actuals: &[f64], forecasts: &[f64], n: usize, k: usize, m: usize) -> Result<ForecastScore> {
    if k == 0 || k > m {
        return Err(Error::invalid(format!("need 1 <= k <= m, got k={k}, m={m}")));
    }
    if n == 0 || n + m > actuals.len() {
        return Err(Error::invalid(format!(
            "actuals of length {} do not cover indices {n}..{}",
            actuals.len(),
            n + m
        )));
    }
    let count = m - k + 1;
    if forecasts.len() != count {
        return Err(Error::invalid(format!("expected {count} forecasts, got {}", forecasts.len())));
    }
    let x = |i: usize| actuals[i - 1];
    let mf = m as f64;
    let (mut mae, mut rmse, mut abs_sum, mut sq_sum) = (0.0, 0.0, 0.0, 0.0);
    for (s, f) in forecasts.iter().enumerate() {
        let base = x(n + s);
        if base == 0.0 {
            return Err(Error::Scoring {
                index: n + s,
                message: "scaling observation X(N+s) is zero".into(),
            });
        }
        let err = f - x(n + s + k);
        mae += err.abs() / (mf * base.abs());
        rmse += (err * err / (mf * base * base)).sqrt();
        abs_sum += err.abs();
        sq_sum += err * err;
    }
    Ok(ForecastScore {
        k,
        m,
        forecasts: count,
        mae,
        rmse,
        conventional_mae: abs_sum / count as f64,
        conventional_rmse: (sq_sum / count as f64).sqrt(),
    })
}

/// Rolling-origin k-step forecasts over a holdout of `m` points after the
/// first `n` observations. The origin moves through the holdout using
/// observed values as history. With `differenced`, the model is for first
/// differences and forecasts are rebuilt on the level scale.
pub fn rolling_forecasts(series: &[f64], coefficients: &[f64], n: usize, k: usize, m: usize, differenced: bool) -> Result<Vec<f64>> {
    if k == 0 || k > m || n + m > series.len() {
        return Err(Error::invalid(format!(
            "bad rolling window: n={n}, k={k}, m={m}, series length {}",
            series.len()
        )));
    }
    (0..=m - k)
        .map(|s| {
            let history = &series[..n + s];
            if differenced {
                let d = difference(history)?;
                let path = forecast_path(coefficients, &d, k)?;
                Ok(history[history.len() - 1] + path.iter().sum::<f64>())
            } else {
                forecast_k(coefficients, history, k)
            }
        })
        .collect()
}

pub fn evaluate(
    series: &[f64],
    coefficients: &[f64],
    n: usize,
    steps: &[usize],
    m: usize,
    differenced: bool,
    method: &str,
) -> Result<ForecastReport> {
    let scores = steps
        .iter()
        .map(|&k| {
            let f = rolling_forecasts(series, coefficients, n, k, m, differenced)?;
            score_forecasts(series, &f, n, k, m)
        })
        .collect::<Result<_>>()?;
    Ok(ForecastReport { method: method.to_string(), in_sample: n, differenced, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::InnovationFamily;
    use crate::likelihood::ConditionalLikelihood;
    use proptest::prelude::*;

    #[test]
    fn ar1_three_steps() {
        assert_eq!(forecast_k(&[0.5], &[7.0, 2.0], 3).unwrap(), 0.25);
    }

    #[test]
    fn zero_model_forecasts_zero() {
        for k in 1..5 {
            assert_eq!(forecast_k(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0], k).unwrap(), 0.0);
        }
    }

    #[test]
    fn insufficient_history() {
        assert!(forecast_k(&[0.1, 0.2], &[1.0], 1).is_err());
        assert!(forecast_k(&[0.1], &[1.0], 0).is_err());
    }

    #[test]
    fn one_step_forecast_matches_likelihood_residual() {
        let x = [0.3, -1.1, 0.7, 2.2, -0.4, 0.9, 1.3];
        let theta = [0.4, -0.25, 0.1];
        let ctx = ConditionalLikelihood::new(&x, 3, InnovationFamily::standard_normal()).unwrap();
        let resid = ctx.residuals(&theta).unwrap();
        let last = x.len() - 1;
        let f = forecast_k(&theta, &x[..last], 1).unwrap();
        assert!((x[last] - f - resid[resid.len() - 1]).abs() < 1e-15);
    }

    #[test]
    fn differencing_examples() {
        assert_eq!(difference(&[1.0, 3.0, 6.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(undifference(&[2.0, 3.0], 1.0), vec![1.0, 3.0, 6.0]);
        assert_eq!(difference(&[4.0; 5]).unwrap(), vec![0.0; 4]);
        let ramp: Vec<f64> = (0..10).map(|t| 2.0 + 0.5 * t as f64).collect();
        assert_eq!(difference(&ramp).unwrap(), vec![0.5; 9]);
        assert!(difference(&[1.0]).is_err());
    }

    #[test]
    fn perfect_forecasts_score_zero() {
        let x = [5.0, 6.0, 7.0, 8.0, 9.0];
        let f = [8.0, 9.0];
        let s = score_forecasts(&x, &f, 2, 2, 3).unwrap();
        assert_eq!((s.mae, s.rmse), (0.0, 0.0));
    }

    #[test]
    fn single_forecast_hand_value() {
        // N = 1, m = 1, k = 1: one term, |F - X(2)| = 0.1, |X(1)| = 2.
        let x = [2.0, 3.0];
        let s = score_forecasts(&x, &[3.1], 1, 1, 1).unwrap();
        assert!((s.mae - 0.05).abs() < 1e-15);
        assert!((s.rmse - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_denominator_names_index() {
        let x = [1.0, 0.0, 3.0];
        match score_forecasts(&x, &[2.0, 3.0], 1, 1, 2) {
            Err(Error::Scoring { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected scoring error, got {other:?}"),
        }
    }

    #[test]
    fn rolling_forecasts_rebuild_levels() {
        // Differences follow d_t = 0.5 d_{t-1} exactly, so forecasts are exact.
        let mut d = vec![1.0];
        for _ in 0..10 {
            d.push(0.5 * d[d.len() - 1]);
        }
        let levels = undifference(&d, 10.0);
        let f = rolling_forecasts(&levels, &[0.5], 6, 2, 4, true).unwrap();
        for (s, v) in f.iter().enumerate() {
            assert!((v - levels[6 + s + 2 - 1]).abs() < 1e-12);
        }
        let rep = evaluate(&levels, &[0.5], 6, &[1, 2], 4, true, "mle").unwrap();
        assert!(rep.scores.iter().all(|s| s.mae < 1e-12));
    }

    proptest! {
        #[test]
        fn difference_round_trip_is_exact_on_integers(v in prop::collection::vec(-1_000_000i64..1_000_000, 2..60)) {
            let x: Vec<f64> = v.iter().map(|&i| i as f64).collect();
            let back = undifference(&difference(&x).unwrap(), x[0]);
            prop_assert_eq!(back, x);
        }

        #[test]
        fn forecast_is_linear_in_history(
            phi in prop::collection::vec(-0.5f64..0.5, 1..5),
            a in prop::collection::vec(-10.0f64..10.0, 6),
            b in prop::collection::vec(-10.0f64..10.0, 6),
            alpha in -3.0f64..3.0,
            k in 1usize..6,
        ) {
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + alpha * y).collect();
            let lhs = forecast_k(&phi, &combo, k).unwrap();
            let rhs = forecast_k(&phi, &a, k).unwrap() + alpha * forecast_k(&phi, &b, k).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
