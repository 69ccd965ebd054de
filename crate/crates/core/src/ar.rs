//! AR(p) models: causality, stationary simulation and autocovariances.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::InnovationFamily;

/// Models with companion spectral radius within this distance of 1 are
/// treated as non-causal.
pub const CAUSALITY_EPS: f64 = 1e-8;

pub const DEFAULT_BURN_IN: usize = 1000;

/// A causal AR(p) model with its innovation family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    coefficients: Vec<f64>,
    innovation: InnovationFamily,
}

impl ArModel {
    pub fn new(coefficients: Vec<f64>, innovation: InnovationFamily) -> Result<Self> {
        innovation.validate()?;
        let c = check_causality(&coefficients)?;
        if !c.causal {
            return Err(Error::Model(format!(
                "coefficients {coefficients:?} are not causal (spectral radius {:.6})",
                c.spectral_radius
            )));
        }
        Ok(Self { coefficients, innovation })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn innovation(&self) -> &InnovationFamily {
        &self.innovation
    }
}

/// Observed series `X_1..X_N`. Always non-empty and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must contain at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite observation at position {}", i + 1)));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Autocovariances `γ(0..=H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AutocovKernel {
    pub gammas: Vec<f64>,
}

impl AutocovKernel {
    pub fn horizon(&self) -> usize {
        self.gammas.len() - 1
    }

    pub fn gamma(&self, h: usize) -> f64 {
        self.gammas[h]
    }

    /// `(H+1)×(H+1)` Toeplitz matrix `[γ(|i-j|)]`.
    pub fn toeplitz(&self) -> DMatrix<f64> {
        let m = self.gammas.len();
        DMatrix::from_fn(m, m, |i, j| self.gammas[i.abs_diff(j)])
    }

    /// `p×p` Toeplitz block, the lag-design covariance `Γ`.
    pub fn gamma_matrix(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| self.gammas[i.abs_diff(j)])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Causality {
    pub causal: bool,
    pub spectral_radius: f64,
}

pub(crate) fn companion_matrix(coefficients: &[f64]) -> DMatrix<f64> {
    let p = coefficients.len();
    DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            coefficients[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Causality via the spectral radius of the companion matrix.
pub fn check_causality(coefficients: &[f64]) -> Result<Causality> {
    if coefficients.is_empty() {
        return Err(Error::invalid("coefficient vector must be non-empty"));
    }
    if let Some(j) = coefficients.iter().position(|c| !c.is_finite()) {
        return Err(Error::invalid(format!("non-finite coefficient at lag {}", j + 1)));
    }
    let spectral_radius = if coefficients.len() == 1 {
        coefficients[0].abs()
    } else {
        companion_matrix(coefficients)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    };
    Ok(Causality {
        causal: spectral_radius < 1.0 - CAUSALITY_EPS,
        spectral_radius,
    })
}

/// Simulate `n` observations after discarding `burn_in` from a zero start.
pub fn simulate(model: &ArModel, n: usize, burn_in: usize, seed: u64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if !check_causality(model.coefficients())?.causal {
        return Err(Error::Model("cannot simulate a non-causal model".into()));
    }
    let phi = model.coefficients();
    let p = phi.len();
    let total = n + burn_in;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = model.innovation().sample_with(&mut rng, total);
    // p leading zeros hold the initial state.
    let mut x = vec![0.0; p + total];
    for t in 0..total {
        let mut v = noise[t];
        for (j, &c) in phi.iter().enumerate() {
            v += c * x[p + t - 1 - j];
        }
        x[p + t] = v;
    }
    TimeSeries::new(x.split_off(p + burn_in))
}

/// Autocovariances from the Yule–Walker system, extended by the AR recursion.
pub fn theoretical_autocov(model: &ArModel, horizon: usize) -> Result<AutocovKernel> {
    let phi = model.coefficients();
    if !check_causality(phi)?.causal {
        return Err(Error::Model("autocovariance requires a causal model".into()));
    }
    let sigma2 = model
        .innovation()
        .variance()
        .ok_or_else(|| Error::Model("innovation variance is infinite".into()))?;
    let p = phi.len();
    let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
    for h in 0..=p {
        a[(h, h)] += 1.0;
        for (j, &c) in phi.iter().enumerate() {
            a[(h, h.abs_diff(j + 1))] -= c;
        }
    }
    let mut b = DVector::<f64>::zeros(p + 1);
    b[0] = sigma2;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Model("singular Yule-Walker system".into()))?;
    let mut gammas: Vec<f64> = sol.iter().copied().collect();
    for h in (p + 1)..=horizon {
        let g = phi.iter().enumerate().map(|(j, &c)| c * gammas[h - 1 - j]).sum();
        gammas.push(g);
    }
    gammas.truncate(horizon + 1);
    Ok(AutocovKernel { gammas })
}

/// `γ̂(h) = (1/N) Σ_{i=1}^{N-h} X_i X_{i+h}`, uncentred.
pub fn sample_autocov(series: &TimeSeries, horizon: usize) -> Result<AutocovKernel> {
    let x = series.values();
    let n = x.len();
    if horizon >= n {
        return Err(Error::invalid(format!("horizon {horizon} must be below series length {n}")));
    }
    let gammas = (0..=horizon)
        .map(|h| crate::numeric::compensated_sum((0..n - h).map(|i| x[i] * x[i + h])) / n as f64)
        .collect();
    Ok(AutocovKernel { gammas })
}
