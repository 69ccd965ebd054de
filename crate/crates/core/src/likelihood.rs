//! Conditional log-likelihood of an AR(p) series, its derivatives and the
//! penalized objective `Q(θ) = L(θ) - N Σ p_λ(|φ_j|)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::innovations::InnovationFamily;
use crate::numeric::CompensatedSum;
use crate::penalty::Penalty;

/// `L(θ) = Σ_{t=p+1}^{N} log g(X_t - Σ_j φ_j X_{t-j})` over a borrowed series.
#[derive(Clone, Copy, Debug)]
pub struct ConditionalLikelihood<'a> {
    series: &'a [f64],
    order: usize,
    innovation: InnovationFamily,
}

impl<'a> ConditionalLikelihood<'a> {
    pub fn new(series: &'a [f64], order: usize, innovation: InnovationFamily) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("AR order must be at least 1"));
        }
        if series.len() <= order {
            return Err(Error::invalid(format!(
                "series length {} must exceed the order {order}",
                series.len()
            )));
        }
        innovation.validate()?;
        Ok(Self { series, order, innovation })
    }

    pub fn series(&self) -> &'a [f64] {
        self.series
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn innovation(&self) -> &InnovationFamily {
        &self.innovation
    }

    /// Full sample length `N`.
    pub fn n(&self) -> usize {
        self.series.len()
    }

    /// Number of likelihood terms, `N - p`.
    pub fn n_effective(&self) -> usize {
        self.series.len() - self.order
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.order {
            return Err(Error::invalid(format!(
                "coefficient vector has length {}, expected {}",
                theta.len(),
                self.order
            )));
        }
        if let Some(j) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient at lag {}", j + 1)));
        }
        Ok(())
    }

    /// Lag window `(X_{t-1}, …, X_{t-p})` for 0-based time index `t ≥ p`.
    #[inline]
    fn lags(&self, t: usize) -> impl Iterator<Item = f64> + 'a {
        let s = self.series;
        (1..=self.order).map(move |j| s[t - j])
    }

    #[inline]
    fn residual(&self, theta: &[f64], t: usize) -> f64 {
        let s = self.series;
        let mut r = s[t];
        for (j, &c) in theta.iter().enumerate() {
            r -= c * s[t - 1 - j];
        }
        r
    }

    /// In-sample residuals `Z_t(θ)` for `t = p+1..N`.
    pub fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        Ok((self.order..self.n()).map(|t| self.residual(theta, t)).collect())
    }

    pub fn log_lik(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        Ok(self.log_lik_unchecked(theta))
    }

    pub(crate) fn log_lik_unchecked(&self, theta: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        for t in self.order..self.n() {
            acc.add(self.innovation.log_density_unchecked(self.residual(theta, t)));
        }
        acc.value()
    }

    /// `∂L/∂φ_j = -Σ_t (g'/g)(Z_t) X_{t-j}`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(theta)?;
        Ok(self.gradient_unchecked(theta))
    }

    pub(crate) fn gradient_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.order;
        let mut acc = vec![CompensatedSum::new(); p];
        for t in p..self.n() {
            let s = self.innovation.score(self.residual(theta, t));
            for (a, x) in acc.iter_mut().zip(self.lags(t)) {
                a.add(-s * x);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// `∂²L/∂φ_j∂φ_i = Σ_t (g'/g)'(Z_t) X_{t-j} X_{t-i}`.
    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        Ok(self.hessian_unchecked(theta))
    }

    pub(crate) fn hessian_unchecked(&self, theta: &[f64]) -> DMatrix<f64> {
        let p = self.order;
        let mut acc = vec![CompensatedSum::new(); p * (p + 1) / 2];
        let mut window = vec![0.0; p];
        for t in p..self.n() {
            let d = self.innovation.score_derivative(self.residual(theta, t));
            for (w, x) in window.iter_mut().zip(self.lags(t)) {
                *w = x;
            }
            let mut k = 0;
            for (i, &wi) in window.iter().enumerate() {
                let di = d * wi;
                for &wj in &window[..=i] {
                    acc[k].add(di * wj);
                    k += 1;
                }
            }
        }
        let mut h = DMatrix::zeros(p, p);
        let mut k = 0;
        for i in 0..p {
            for j in 0..=i {
                let v = acc[k].value();
                h[(i, j)] = v;
                h[(j, i)] = v;
                k += 1;
            }
        }
        h
    }

    /// `Σ_t s_t s_tᵀ` for the per-term gradients `s_t = ∇ l_t(θ)`, restricted
    /// to the given 0-based coordinates.
    pub fn score_outer_product(&self, theta: &[f64], coords: &[usize]) -> Result<DMatrix<f64>> {
        self.check_dim(theta)?;
        let k = coords.len();
        let mut acc = vec![CompensatedSum::new(); k * k];
        let mut s_t = vec![0.0; k];
        for t in self.order..self.n() {
            let s = self.innovation.score(self.residual(theta, t));
            for (v, &j) in s_t.iter_mut().zip(coords) {
                *v = -s * self.series[t - 1 - j];
            }
            for a in 0..k {
                for b in 0..k {
                    acc[a * k + b].add(s_t[a] * s_t[b]);
                }
            }
        }
        Ok(DMatrix::from_fn(k, k, |a, b| acc[a * k + b].value()))
    }

    /// Lag-design Gram matrix `Σ_t x_t x_tᵀ` and cross products `Σ_t x_t X_t`
    /// where `x_t = (X_{t-1}, …, X_{t-p})`.
    pub fn lag_gram(&self) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.order;
        let mut gram = vec![CompensatedSum::new(); p * p];
        let mut cross = vec![CompensatedSum::new(); p];
        for t in p..self.n() {
            let y = self.series[t];
            for i in 0..p {
                let xi = self.series[t - 1 - i];
                cross[i].add(xi * y);
                for j in 0..=i {
                    gram[i * p + j].add(xi * self.series[t - 1 - j]);
                }
            }
        }
        let g = DMatrix::from_fn(p, p, |i, j| {
            let (a, b) = if j <= i { (i, j) } else { (j, i) };
            gram[a * p + b].value()
        });
        let c = DVector::from_iterator(p, cross.iter().map(CompensatedSum::value));
        (g, c)
    }

    /// `Q(θ) = L(θ) - N Σ_j p_λ(|φ_j|)` with `N` the full series length.
    pub fn penalized_objective(&self, theta: &[f64], penalty: &Penalty) -> Result<f64> {
        self.check_dim(theta)?;
        penalty.validate()?;
        Ok(self.log_lik_unchecked(theta) - self.n() as f64 * penalty.total(theta))
    }

    /// `L(θ) - N Σ_j w_j |φ_j|`, the one-step LLA surrogate.
    pub fn weighted_l1_objective(&self, theta: &[f64], weights: &[f64]) -> f64 {
        let pen: f64 = theta.iter().zip(weights).map(|(t, w)| w * t.abs()).sum();
        self.log_lik_unchecked(theta) - self.n() as f64 * pen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::{simulate, ArModel};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sim(coefs: &[f64], fam: InnovationFamily, n: usize, seed: u64) -> Vec<f64> {
        simulate(&ArModel::new(coefs.to_vec(), fam).unwrap(), n, 200, seed)
            .unwrap()
            .into_inner()
    }

    #[test]
    fn white_noise_likelihood_is_marginal_normal() {
        let x = sim(&[0.0], InnovationFamily::standard_normal(), 50, 1);
        let ctx = ConditionalLikelihood::new(&x, 1, InnovationFamily::standard_normal()).unwrap();
        let expected: f64 = x[1..]
            .iter()
            .map(|v| -0.5 * (2.0 * std::f64::consts::PI).ln() - v * v / 2.0)
            .sum();
        assert_relative_eq!(ctx.log_lik(&[0.0]).unwrap(), expected, epsilon = 1e-11);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let ctx = ConditionalLikelihood::new(&x, 2, InnovationFamily::standard_normal()).unwrap();
        assert!(ctx.log_lik(&[0.1]).is_err());
        assert!(ctx.gradient(&[0.1, 0.2, 0.3]).is_err());
        assert!(ctx.hessian(&[0.1]).is_err());
        assert!(ConditionalLikelihood::new(&x, 4, InnovationFamily::standard_normal()).is_err());
        assert!(ConditionalLikelihood::new(&x, 0, InnovationFamily::standard_normal()).is_err());
    }

    #[test]
    fn zero_lag_window_has_zero_gradient() {
        // Every likelihood term sees zero lags.
        let x = vec![0.0, 0.0, 1.3];
        for fam in [InnovationFamily::standard_normal(), InnovationFamily::student_t(3.0).unwrap()] {
            let ctx = ConditionalLikelihood::new(&x, 2, fam).unwrap();
            assert_eq!(ctx.gradient(&[0.4, -0.2]).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn gaussian_hessian_is_scaled_gram() {
        for sigma in [1.0, 2.0] {
            let fam = InnovationFamily::gaussian(sigma).unwrap();
            let x = sim(&[0.3, -0.2, 0.1], fam, 300, 9);
            let ctx = ConditionalLikelihood::new(&x, 3, fam).unwrap();
            let h = ctx.hessian(&[0.1, 0.1, 0.1]).unwrap();
            let (g, _) = ctx.lag_gram();
            assert_eq!(h, g * (-1.0 / (sigma * sigma)));
        }
    }

    #[test]
    fn gaussian_log_lik_is_shifted_ssr() {
        let fam = InnovationFamily::gaussian(1.5).unwrap();
        let x = sim(&[0.5, -0.3], fam, 120, 4);
        let ctx = ConditionalLikelihood::new(&x, 2, fam).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut offsets = Vec::new();
        for _ in 0..10 {
            let th = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let ssr: f64 = ctx.residuals(&th).unwrap().iter().map(|r| r * r).sum();
            offsets.push(ctx.log_lik(&th).unwrap() + ssr / (2.0 * 1.5 * 1.5));
        }
        for o in &offsets {
            assert_relative_eq!(*o, offsets[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn penalized_objective_reductions() {
        let fam = InnovationFamily::standard_normal();
        let x = sim(&[0.2, 0.0, 0.2], fam, 200, 2);
        let ctx = ConditionalLikelihood::new(&x, 3, fam).unwrap();
        let th = [0.21, -0.01, 0.19];
        let zero = Penalty::scad(0.0, 2.1).unwrap();
        assert_eq!(ctx.penalized_objective(&th, &zero).unwrap(), ctx.log_lik(&th).unwrap());
        let pen = Penalty::scad(0.08, 2.1).unwrap();
        assert_eq!(
            ctx.penalized_objective(&[0.0; 3], &pen).unwrap(),
            ctx.log_lik(&[0.0; 3]).unwrap()
        );
    }

    #[test]
    fn penalized_objective_matches_piecewise_scad_sum() {
        let fam = InnovationFamily::standard_normal();
        let x = sim(&[0.2, 0.0, 0.2, 0.0, 0.2], fam, 1000, 8);
        let ctx = ConditionalLikelihood::new(&x, 5, fam).unwrap();
        let th = [0.2015, 0.0, 0.2139, 0.0, 0.1705];
        let (lam, a) = (0.08f64, 2.1f64);
        // Written out branch by branch, independent of Penalty::value.
        let piece = |phi: f64| -> f64 {
            let x = phi.abs();
            if x <= lam {
                lam * x
            } else if x < a * lam {
                a * lam / (a - 1.0) * x - x * x / (2.0 * (a - 1.0)) - lam * lam / (2.0 * (a - 1.0))
            } else {
                (a + 1.0) * lam * lam / 2.0
            }
        };
        let oracle = ctx.log_lik(&th).unwrap() - 1000.0 * th.iter().map(|&v| piece(v)).sum::<f64>();
        let q = ctx.penalized_objective(&th, &Penalty::scad(lam, a).unwrap()).unwrap();
        assert_relative_eq!(q, oracle, epsilon = 1e-9);
    }

    #[test]
    fn outer_product_is_symmetric_psd() {
        let fam = InnovationFamily::student_t(5.0).unwrap();
        let x = sim(&[0.3, 0.1], fam, 400, 21);
        let ctx = ConditionalLikelihood::new(&x, 2, fam).unwrap();
        let m = ctx.score_outer_product(&[0.3, 0.1], &[0, 1]).unwrap();
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        assert!(m.symmetric_eigenvalues().iter().all(|&e| e >= 0.0));
    }
}
