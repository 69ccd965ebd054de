//! Unpenalized conditional MLE, one-step LLA penalized estimation, holdout
//! tuning and sandwich standard errors.
//!
//! The penalized estimator follows the one-step local linear approximation:
//! the pilot MLE `θ̃` fixes weights `w_j = p'_λ(|θ̃_j|)`, and the weighted-ℓ₁
//! problem `max L(θ) - N Σ w_j |φ_j|` is then solved once. Its solver is a
//! proximal Newton method whose quadratic subproblems are solved by
//! coordinate descent with soft-thresholding, so zeros are exact. For
//! Gaussian innovations the quadratic model is the likelihood itself and one
//! outer step is the exact coordinate-descent lasso.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::InnovationFamily;
use crate::likelihood::ConditionalLikelihood;
use crate::numeric::{compensated_sum, soft_threshold, spd_solve};
use crate::penalty::{Penalty, PenaltyKind};

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub newton_max_iter: usize,
    pub prox_max_outer: usize,
    pub cd_max_sweeps: usize,
    /// Stationarity tolerance per likelihood term: a coordinate's
    /// (sub)gradient condition must hold within `tol · (N - p)`.
    pub tol: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            newton_max_iter: 100,
            prox_max_outer: 200,
            cd_max_sweeps: 10_000,
            tol: 1e-8,
            max_halvings: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mle,
    LassoPcmle,
    ScadPcmle,
}

impl Method {
    pub fn from_penalty(kind: PenaltyKind) -> Self {
        match kind {
            PenaltyKind::Lasso => Method::LassoPcmle,
            PenaltyKind::Scad => Method::ScadPcmle,
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::LassoPcmle => "lasso",
            Method::ScadPcmle => "scad",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Final stationarity violation (max over coordinates), in likelihood units.
    pub gradient_norm: f64,
    pub holdout_loglik: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: Method,
    pub order: usize,
    pub innovation: InnovationFamily,
    pub estimates: Vec<f64>,
    /// 1-based lags with a nonzero estimate.
    pub support: Vec<usize>,
    /// Sandwich standard errors; 0 off the support.
    pub std_errors: Vec<f64>,
    pub lambda_used: Option<f64>,
    pub a_used: Option<f64>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn support_of(estimates: &[f64]) -> Vec<usize> {
    estimates
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j + 1)
        .collect()
}

fn check_sample(series: &[f64], order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::invalid("AR order must be at least 1"));
    }
    if series.len() <= 3 * order {
        return Err(Error::invalid(format!(
            "series length {} too short for order {order} (need more than {})",
            series.len(),
            3 * order
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite observation at position {}", i + 1)));
    }
    Ok(())
}

/// Least-squares solution of the lag regression, the Newton starting point.
fn least_squares(ctx: &ConditionalLikelihood<'_>) -> Result<Vec<f64>> {
    let (g, c) = ctx.lag_gram();
    let sol = spd_solve(&g, &c)
        .ok_or_else(|| Error::degenerate("lag design Gram matrix is singular (constant or zero series?)"))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::degenerate("least-squares start is not finite"));
    }
    Ok(sol.iter().copied().collect())
}

/// Innovation scale for a Gaussian fit when none is given: the root of the
/// least-squares residual sum of squares over `N - 2p` degrees of freedom
/// (`N - p` conditional terms less `p` fitted coefficients).
pub fn gaussian_scale_estimate(series: &[f64], order: usize) -> Result<f64> {
    check_sample(series, order)?;
    let ctx = ConditionalLikelihood::new(series, order, InnovationFamily::standard_normal())?;
    let theta = least_squares(&ctx)?;
    let ssr = compensated_sum(ctx.residuals(&theta)?.iter().map(|r| r * r));
    let scale = (ssr / (ctx.n_effective() - order) as f64).sqrt();
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::degenerate("least-squares residuals are all zero"));
    }
    Ok(scale)
}

/// `-H` made positive definite by adding a multiple of the identity if needed.
fn curvature(neg_hessian: DMatrix<f64>, at: &[f64]) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    if let Some(c) = neg_hessian.clone().cholesky() {
        return Ok((neg_hessian, c));
    }
    let p = neg_hessian.nrows();
    let scale = (0..p).map(|i| neg_hessian[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut mu = 1e-8 * scale;
    while mu <= 1e8 * scale {
        let damped = &neg_hessian + DMatrix::identity(p, p) * mu;
        if let Some(c) = damped.clone().cholesky() {
            return Ok((damped, c));
        }
        mu *= 10.0;
    }
    Err(Error::convergence("curvature matrix not positive definite after damping", at))
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

struct MleSolution {
    estimates: Vec<f64>,
    iterations: usize,
    gradient_norm: f64,
}

fn mle_newton(ctx: &ConditionalLikelihood<'_>, opts: &FitOptions) -> Result<MleSolution> {
    let mut theta = least_squares(ctx)?;
    let threshold = opts.tol * ctx.n_effective() as f64;
    let mut value = ctx.log_lik_unchecked(&theta);
    for iter in 0..=opts.newton_max_iter {
        let grad = ctx.gradient_unchecked(&theta);
        let gnorm = euclid(&grad);
        if gnorm < threshold {
            return Ok(MleSolution { estimates: theta, iterations: iter, gradient_norm: gnorm });
        }
        if iter == opts.newton_max_iter {
            break;
        }
        let (_, chol) = curvature(-ctx.hessian_unchecked(&theta), &theta)?;
        let dir = chol.solve(&DVector::from_column_slice(&grad));
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, d)| t + step * d).collect();
            let v = ctx.log_lik_unchecked(&cand);
            if v.is_finite() && v >= value - 4.0 * f64::EPSILON * value.abs() {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::convergence("Newton step halving failed to increase the likelihood", &theta));
        }
    }
    Err(Error::convergence(
        format!("Newton did not converge in {} iterations", opts.newton_max_iter),
        &theta,
    ))
}

/// Unpenalized conditional MLE by damped Newton from the least-squares start.
pub fn fit_mle(series: &[f64], order: usize, innovation: InnovationFamily, opts: &FitOptions) -> Result<FitResult> {
    check_sample(series, order)?;
    let ctx = ConditionalLikelihood::new(series, order, innovation)?;
    let sol = mle_newton(&ctx, opts)?;
    let std_errors = sandwich_se(&ctx, &sol.estimates, None)?;
    Ok(FitResult {
        method: Method::Mle,
        order,
        innovation,
        support: support_of(&sol.estimates),
        estimates: sol.estimates,
        std_errors,
        lambda_used: None,
        a_used: None,
        diagnostics: Diagnostics {
            iterations: sol.iterations,
            gradient_norm: sol.gradient_norm,
            holdout_loglik: None,
        },
    })
}

/// Output of [`solve_weighted_l1`].
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedL1Solution {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Max subgradient violation at the returned point.
    pub violation: f64,
}

/// Max over coordinates of the distance from `grad_j` to the subdifferential
/// `κ_j ∂|θ_j|`, i.e. how far `θ` is from stationarity of `L - Σ κ_j|θ_j|`.
pub fn subgradient_violation(grad: &[f64], theta: &[f64], kappa: &[f64]) -> f64 {
    grad.iter()
        .zip(theta)
        .zip(kappa)
        .map(|((&g, &t), &k)| {
            if t > 0.0 {
                (g - k).abs()
            } else if t < 0.0 {
                (g + k).abs()
            } else {
                (g.abs() - k).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Maximize `gᵀ(u-θ) - ½(u-θ)ᵀB(u-θ) - Σ κ_j|u_j|` by coordinate descent.
/// Returns the maximizer and the number of sweeps used.
fn cd_quadratic(
    b: &DMatrix<f64>,
    grad: &[f64],
    theta: &[f64],
    kappa: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, usize)> {
    let p = theta.len();
    let mut u = theta.to_vec();
    // bd = B (u - θ)
    let mut bd = vec![0.0; p];
    let mut sweeps = 0;

    let update = |j: usize, u: &mut [f64], bd: &mut [f64]| -> f64 {
        let bjj = b[(j, j)];
        let gj = grad[j] - bd[j];
        let new = soft_threshold(bjj * u[j] + gj, kappa[j]) / bjj;
        let delta = new - u[j];
        if delta != 0.0 {
            u[j] = new;
            for (i, v) in bd.iter_mut().enumerate() {
                *v += b[(i, j)] * delta;
            }
        }
        delta.abs()
    };
    let violation = |u: &[f64], bd: &[f64]| -> f64 {
        let model_grad: Vec<f64> = grad.iter().zip(bd).map(|(g, v)| g - v).collect();
        subgradient_violation(&model_grad, u, kappa)
    };

    loop {
        for j in 0..p {
            update(j, &mut u, &mut bd);
        }
        sweeps += 1;
        if violation(&u, &bd) <= tol {
            return Ok((u, sweeps));
        }
        // Active-set passes over the nonzero coordinates.
        let active: Vec<usize> = (0..p).filter(|&j| u[j] != 0.0).collect();
        while sweeps < max_sweeps {
            let mut biggest: f64 = 0.0;
            for &j in &active {
                biggest = biggest.max(update(j, &mut u, &mut bd));
            }
            sweeps += 1;
            if biggest <= f64::EPSILON * u.iter().map(|v| v.abs()).fold(1.0, f64::max) {
                break;
            }
        }
        if sweeps >= max_sweeps {
            return Err(Error::convergence(
                format!("coordinate descent hit {max_sweeps} sweeps"),
                &u,
            ));
        }
    }
}

/// Solve `max_θ L(θ) - N Σ_j w_j |φ_j|` by proximal Newton.
pub fn solve_weighted_l1(
    ctx: &ConditionalLikelihood<'_>,
    weights: &[f64],
    theta_init: &[f64],
    opts: &FitOptions,
) -> Result<WeightedL1Solution> {
    let p = ctx.order();
    if weights.len() != p || theta_init.len() != p {
        return Err(Error::invalid(format!(
            "weights ({}) and initial point ({}) must have length {p}",
            weights.len(),
            theta_init.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if theta_init.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial point must be finite"));
    }
    let n = ctx.n() as f64;
    let kappa: Vec<f64> = weights.iter().map(|w| n * w).collect();
    let threshold = opts.tol * ctx.n_effective() as f64;
    let mut theta = theta_init.to_vec();
    let mut value = ctx.weighted_l1_objective(&theta, weights);

    for outer in 0..=opts.prox_max_outer {
        let grad = ctx.gradient_unchecked(&theta);
        let viol = subgradient_violation(&grad, &theta, &kappa);
        if viol <= threshold {
            return Ok(WeightedL1Solution { coefficients: theta, iterations: outer, violation: viol });
        }
        if outer == opts.prox_max_outer {
            break;
        }
        let (b, _) = curvature(-ctx.hessian_unchecked(&theta), &theta)?;
        let (u, _) = cd_quadratic(&b, &grad, &theta, &kappa, 0.1 * threshold, opts.cd_max_sweeps)?;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = if step == 1.0 {
                u.clone()
            } else {
                theta.iter().zip(&u).map(|(t, v)| t + step * (v - t)).collect()
            };
            let v = ctx.weighted_l1_objective(&cand, weights);
            if v.is_finite() && v >= value - 4.0 * f64::EPSILON * value.abs() {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::convergence("proximal Newton line search failed", &theta));
        }
    }
    Err(Error::convergence(
        format!("proximal Newton did not converge in {} outer iterations", opts.prox_max_outer),
        &theta,
    ))
}

/// One-step LLA from a given pilot estimate.
pub fn fit_pcmle_from_pilot(
    ctx: &ConditionalLikelihood<'_>,
    pilot: &[f64],
    penalty: &Penalty,
    opts: &FitOptions,
) -> Result<FitResult> {
    penalty.validate()?;
    let weights: Vec<f64> = pilot.iter().map(|v| penalty.derivative_unchecked(v.abs())).collect();
    let sol = solve_weighted_l1(ctx, &weights, pilot, opts)?;
    let support = support_of(&sol.coefficients);
    let std_errors = if support.is_empty() {
        vec![0.0; ctx.order()]
    } else {
        sandwich_se(ctx, &sol.coefficients, Some(penalty))?
    };
    Ok(FitResult {
        method: Method::from_penalty(penalty.kind),
        order: ctx.order(),
        innovation: *ctx.innovation(),
        estimates: sol.coefficients,
        support,
        std_errors,
        lambda_used: Some(penalty.lambda),
        a_used: penalty.a_param(),
        diagnostics: Diagnostics {
            iterations: sol.iterations,
            gradient_norm: sol.violation,
            holdout_loglik: None,
        },
    })
}

/// Penalized conditional MLE by one-step LLA at a fixed penalty.
pub fn fit_pcmle(
    series: &[f64],
    order: usize,
    innovation: InnovationFamily,
    penalty: &Penalty,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_sample(series, order)?;
    penalty.validate()?;
    let ctx = ConditionalLikelihood::new(series, order, innovation)?;
    let pilot = mle_newton(&ctx, opts)?;
    fit_pcmle_from_pilot(&ctx, &pilot.estimates, penalty, opts)
}

/// Sandwich standard errors on the support of `estimates`.
///
/// With `H` the log-likelihood Hessian on the support,
/// `Σ_λ = diag(p'_λ(|φ̂_j|)/|φ̂_j|)` and `M = Σ_t s_t s_tᵀ`, the covariance is
/// `(H - NΣ_λ)⁻¹ M (H - NΣ_λ)⁻¹`. Entries off the support are 0.
pub fn sandwich_se(ctx: &ConditionalLikelihood<'_>, estimates: &[f64], penalty: Option<&Penalty>) -> Result<Vec<f64>> {
    let coords: Vec<usize> = support_of(estimates).into_iter().map(|l| l - 1).collect();
    if coords.is_empty() {
        return Err(Error::invalid("sandwich standard errors need a non-empty support"));
    }
    let h = ctx.hessian(estimates)?;
    let k = coords.len();
    let n = ctx.n() as f64;
    let bracket = DMatrix::from_fn(k, k, |a, b| {
        let mut v = h[(coords[a], coords[b])];
        if a == b {
            if let Some(pen) = penalty {
                let x = estimates[coords[a]].abs();
                v -= n * pen.derivative_unchecked(x) / x;
            }
        }
        v
    });
    let inv = bracket
        .try_inverse()
        .ok_or_else(|| Error::degenerate("sandwich bracket matrix is singular"))?;
    let meat = ctx.score_outer_product(estimates, &coords)?;
    let cov = &inv * meat * &inv;
    let mut se = vec![0.0; ctx.order()];
    for (a, &j) in coords.iter().enumerate() {
        se[j] = cov[(a, a)].max(0.0).sqrt();
    }
    Ok(se)
}

/// Candidate penalties plus the chronological split used to score them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub lambdas: Vec<f64>,
    /// SCAD `a` candidates; ignored for LASSO.
    pub a_values: Vec<f64>,
    /// Fraction of the series used for fitting; the rest scores candidates.
    pub split_fraction: f64,
}

impl TuningGrid {
    pub fn new(lambdas: Vec<f64>, a_values: Vec<f64>, split_fraction: f64) -> Result<Self> {
        let grid = Self { lambdas, a_values, split_fraction };
        grid.validate()?;
        Ok(grid)
    }

    /// `n` geometrically spaced values from `lo` to `hi` inclusive.
    pub fn geometric(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) || n == 0 {
            return Err(Error::invalid(format!("bad geometric grid {lo}:{hi}:{n}")));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let ratio = (hi / lo).ln();
        let mut v: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp()).collect();
        v[n - 1] = hi;
        Ok(v)
    }

    /// Parse `lo:hi:n` (geometric) or a single value.
    pub fn parse_lambda_spec(spec: &str) -> Result<Vec<f64>> {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{s}' in lambda grid '{spec}'")))
        };
        match parts.as_slice() {
            [single] => {
                let v = num(single)?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("lambda must be non-negative, got {v}")));
                }
                Ok(vec![v])
            }
            [lo, hi, n] => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad point count '{n}' in lambda grid '{spec}'")))?;
                Self::geometric(num(lo)?, num(hi)?, n)
            }
            _ => Err(Error::invalid(format!("lambda grid must be 'lo:hi:n' or a number, got '{spec}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::invalid("tuning grid has no lambda values"));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid("lambda values must be finite and non-negative"));
        }
        if self.a_values.iter().any(|a| !(a.is_finite() && *a > 2.0)) {
            return Err(Error::invalid("SCAD a values must exceed 2"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {}", self.split_fraction)));
        }
        Ok(())
    }

    /// Candidate penalties, largest λ first (then largest a) so that ties
    /// resolve toward the sparser fit.
    pub fn candidates(&self, kind: PenaltyKind) -> Result<Vec<Penalty>> {
        self.validate()?;
        let mut lambdas = self.lambdas.clone();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        lambdas.dedup();
        match kind {
            PenaltyKind::Lasso => lambdas.into_iter().map(Penalty::lasso).collect(),
            PenaltyKind::Scad => {
                if self.a_values.is_empty() {
                    return Err(Error::invalid("SCAD tuning needs at least one a value"));
                }
                let mut a_values = self.a_values.clone();
                a_values.sort_by(|a, b| b.total_cmp(a));
                a_values.dedup();
                lambdas
                    .iter()
                    .flat_map(|&l| a_values.iter().map(move |&a| Penalty::scad(l, a)))
                    .collect()
            }
        }
    }
}

/// Holdout scores of every candidate, in candidate order. Failed fits score
/// `None`.
#[derive(Clone, Debug)]
pub struct TuningTrace {
    pub candidates: Vec<Penalty>,
    pub holdout: Vec<Option<f64>>,
    pub winner: usize,
}

/// Pick a penalty by holdout likelihood, then refit on the full series.
///
/// The first `split_fraction` of the series is fitted at every candidate;
/// each fit is scored by the unpenalized conditional log-likelihood of the
/// remaining block, whose first terms condition on the last `p` training
/// observations. Ties go to the larger λ.
pub fn tune(
    series: &[f64],
    order: usize,
    innovation: InnovationFamily,
    kind: PenaltyKind,
    grid: &TuningGrid,
    opts: &FitOptions,
) -> Result<FitResult> {
    let (trace, _) = tune_with_trace(series, order, innovation, kind, grid, opts)?;
    let winner = trace.candidates[trace.winner];
    let mut fit = fit_pcmle(series, order, innovation, &winner, opts)?;
    fit.diagnostics.holdout_loglik = trace.holdout[trace.winner];
    Ok(fit)
}

/// The selection step of [`tune`] on its own. Also returns the pilot MLE of
/// the training block.
pub fn tune_with_trace(
    series: &[f64],
    order: usize,
    innovation: InnovationFamily,
    kind: PenaltyKind,
    grid: &TuningGrid,
    opts: &FitOptions,
) -> Result<(TuningTrace, Vec<f64>)> {
    check_sample(series, order)?;
    let candidates = grid.candidates(kind)?;
    let n = series.len();
    let n_train = (grid.split_fraction * n as f64).floor() as usize;
    if n_train <= 3 * order || n - n_train <= 3 * order {
        return Err(Error::invalid(format!(
            "split {} of {n} observations leaves too few points for order {order}",
            grid.split_fraction
        )));
    }
    let train = &series[..n_train];
    let train_ctx = ConditionalLikelihood::new(train, order, innovation)?;
    let holdout_ctx = ConditionalLikelihood::new(&series[n_train - order..], order, innovation)?;
    let pilot = mle_newton(&train_ctx, opts)?.estimates;

    let scored: Vec<Result<f64>> = candidates
        .par_iter()
        .map(|pen| {
            let fit = fit_pcmle_from_pilot(&train_ctx, &pilot, pen, opts)?;
            Ok(holdout_ctx.log_lik_unchecked(&fit.estimates))
        })
        .collect();

    let mut winner: Option<usize> = None;
    let mut first_err = None;
    let mut holdout: Vec<Option<f64>> = Vec::with_capacity(scored.len());
    for (i, r) in scored.into_iter().enumerate() {
        match r {
            Ok(v) => {
                let better = match winner {
                    None => true,
                    Some(w) => {
                        let best = holdout[w].expect("winner scored");
                        v > best + 1e-9 * f64::max(1.0, f64::abs(best))
                    }
                };
                if better {
                    winner = Some(i);
                }
                holdout.push(Some(v));
            }
            Err(e) => {
                first_err.get_or_insert(e);
                holdout.push(None);
            }
        }
    }
    match winner {
        Some(winner) => Ok((TuningTrace { candidates, holdout, winner }, pilot)),
        None => Err(first_err.expect("at least one candidate")),
    }
}
