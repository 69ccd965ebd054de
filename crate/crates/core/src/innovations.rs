//! Innovation density families.
//!
//! A family supplies `log g`, the score `g'/g`, its derivative, a sampler and
//! the information constant `C(g) = E[(g'(Z)/g(Z))²]`.
//!
//! The Student-t family is the *raw* t distribution with `df` degrees of
//! freedom (variance `df/(df-2)`), not a unit-variance rescaling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::integrate_real_line;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationFamily {
    Gaussian { sigma: f64 },
    StudentT { df: f64 },
}

impl InnovationFamily {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let fam = InnovationFamily::Gaussian { sigma };
        fam.validate()?;
        Ok(fam)
    }

    pub fn standard_normal() -> Self {
        InnovationFamily::Gaussian { sigma: 1.0 }
    }

    pub fn student_t(df: f64) -> Result<Self> {
        let fam = InnovationFamily::StudentT { df };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationFamily::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                Err(Error::invalid(format!("gaussian sigma must be positive and finite, got {sigma}")))
            }
            InnovationFamily::StudentT { df } if !(df.is_finite() && df > 0.0) => {
                Err(Error::invalid(format!("student-t df must be positive and finite, got {df}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, InnovationFamily::Gaussian { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            InnovationFamily::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            InnovationFamily::StudentT { df } => format!("student_t(df={df})"),
        }
    }

    /// Innovation variance, `None` when it is infinite (t with df ≤ 2).
    pub fn variance(&self) -> Option<f64> {
        match *self {
            InnovationFamily::Gaussian { sigma } => Some(sigma * sigma),
            InnovationFamily::StudentT { df } if df > 2.0 => Some(df / (df - 2.0)),
            InnovationFamily::StudentT { .. } => None,
        }
    }

    /// Whether the density meets the regularity conditions needed for the
    /// oracle property. Student-t qualifies only with df > 4.
    pub fn satisfies_assumptions_2(&self) -> bool {
        match *self {
            InnovationFamily::Gaussian { .. } => true,
            InnovationFamily::StudentT { df } => df > 4.0,
        }
    }

    pub fn log_density(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::invalid(format!("log density at non-finite point {z}")));
        }
        Ok(self.log_density_unchecked(z))
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, z: f64) -> f64 {
        match *self {
            InnovationFamily::Gaussian { sigma } => {
                let u = z / sigma;
                -0.5 * LN_2PI - sigma.ln() - 0.5 * u * u
            }
            InnovationFamily::StudentT { df } => {
                t_log_normalizer(df) - 0.5 * (df + 1.0) * (z * z / df).ln_1p()
            }
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        self.log_density_unchecked(z).exp()
    }

    /// `g'(z)/g(z)`.
    #[inline]
    pub fn score(&self, z: f64) -> f64 {
        match *self {
            InnovationFamily::Gaussian { sigma } => -z / (sigma * sigma),
            InnovationFamily::StudentT { df } => -(df + 1.0) * z / (df + z * z),
        }
    }

    /// `(g'/g)'(z) = (g''g - g'²)/g²`.
    #[inline]
    pub fn score_derivative(&self, z: f64) -> f64 {
        match *self {
            InnovationFamily::Gaussian { sigma } => -1.0 / (sigma * sigma),
            InnovationFamily::StudentT { df } => {
                let d = df + z * z;
                -(df + 1.0) * (df - z * z) / (d * d)
            }
        }
    }

    /// `C(g) = E[(g'(Z)/g(Z))²]`: closed form for the Gaussian, adaptive
    /// quadrature otherwise.
    pub fn information_constant(&self) -> Result<f64> {
        self.validate()?;
        match *self {
            InnovationFamily::Gaussian { sigma } => Ok(1.0 / (sigma * sigma)),
            InnovationFamily::StudentT { .. } => integrate_real_line(
                |z| {
                    let s = self.score(z);
                    s * s * self.density(z)
                },
                QUAD_TOL,
            ),
        }
    }

    /// `∫ g` by quadrature; 1 up to quadrature error for every valid family.
    pub fn total_mass(&self) -> Result<f64> {
        integrate_real_line(|z| self.density(z), QUAD_TOL)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            InnovationFamily::Gaussian { sigma } => (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma * z
                })
                .collect(),
            InnovationFamily::StudentT { df } => {
                let dist = StudentT::new(df).expect("validated df");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
        }
    }
}

fn t_log_normalizer(df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn families() -> Vec<InnovationFamily> {
        vec![
            InnovationFamily::gaussian(1.0).unwrap(),
            InnovationFamily::gaussian(2.0).unwrap(),
            InnovationFamily::gaussian(0.5).unwrap(),
            InnovationFamily::student_t(2.0).unwrap(),
            InnovationFamily::student_t(5.0).unwrap(),
            InnovationFamily::student_t(30.0).unwrap(),
        ]
    }

    #[test]
    fn log_density_at_mode() {
        let g = InnovationFamily::standard_normal();
        assert_relative_eq!(g.log_density(0.0).unwrap(), -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
        let t = InnovationFamily::student_t(5.0).unwrap();
        let expected = (ln_gamma(3.0).exp() / (ln_gamma(2.5).exp() * (5.0 * std::f64::consts::PI).sqrt())).ln();
        assert_relative_eq!(t.log_density(0.0).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn gaussian_sigma_two_normalization_by_quadrature() {
        // Unnormalized kernel integrated numerically gives the normalizer.
        let fam = InnovationFamily::gaussian(2.0).unwrap();
        let z_norm = integrate_real_line(|z| (-z * z / 8.0).exp(), 1e-13).unwrap();
        let oracle = -1.0 / 8.0 - z_norm.ln();
        assert!((fam.log_density(1.0).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn non_finite_point_rejected() {
        let fam = InnovationFamily::standard_normal();
        assert!(matches!(fam.log_density(f64::NAN), Err(Error::InvalidInput(_))));
        assert!(fam.log_density(f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(InnovationFamily::gaussian(0.0).is_err());
        assert!(InnovationFamily::gaussian(-1.0).is_err());
        assert!(InnovationFamily::student_t(0.0).is_err());
        assert!(InnovationFamily::student_t(f64::NAN).is_err());
    }

    #[test]
    fn score_closed_forms() {
        assert_eq!(InnovationFamily::standard_normal().score(0.7), -0.7);
        assert_eq!(InnovationFamily::student_t(5.0).unwrap().score(0.0), 0.0);
        assert_eq!(InnovationFamily::standard_normal().score_derivative(3.3), -1.0);
        assert_relative_eq!(InnovationFamily::student_t(5.0).unwrap().score_derivative(0.0), -6.0 / 5.0, epsilon = 1e-15);
    }

    #[test]
    fn score_matches_finite_difference_of_log_density() {
        let h = 1e-6;
        for fam in families() {
            let z = 0.3;
            let fd = (fam.log_density(z + h).unwrap() - fam.log_density(z - h).unwrap()) / (2.0 * h);
            let s = fam.score(z);
            assert!(((fd - s) / s).abs() < 1e-6, "{fam:?}: fd {fd} vs {s}");
        }
    }

    #[test]
    fn score_derivative_matches_finite_difference_of_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for fam in families() {
            for _ in 0..20 {
                let z: f64 = rng.random_range(-4.0..4.0);
                let fd = (fam.score(z + h) - fam.score(z - h)) / (2.0 * h);
                let d = fam.score_derivative(z);
                assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "{fam:?} z={z}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for fam in families() {
            let m = fam.total_mass().unwrap();
            assert!((m - 1.0).abs() < 1e-8, "{fam:?}: mass {m}");
        }
    }

    #[test]
    fn information_constant_values() {
        assert_eq!(InnovationFamily::standard_normal().information_constant().unwrap(), 1.0);
        assert_eq!(InnovationFamily::gaussian(2.0).unwrap().information_constant().unwrap(), 0.25);
        // Known closed form for the raw t: (df+1)/(df+3).
        for df in [2.0, 5.0, 10.0] {
            let c = InnovationFamily::student_t(df).unwrap().information_constant().unwrap();
            assert!((c - (df + 1.0) / (df + 3.0)).abs() < 1e-9, "df={df}: {c}");
        }
    }

    #[test]
    fn sampler_is_deterministic_and_has_right_variance() {
        let g = InnovationFamily::standard_normal();
        assert_eq!(g.sample(100, 3), g.sample(100, 3));
        assert_ne!(g.sample(100, 3), g.sample(100, 4));

        let n = 1_000_000;
        let xs = g.sample(n, 99);
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // Var of the sample second moment is 2σ⁴/n.
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());

        let t = InnovationFamily::student_t(5.0).unwrap();
        let xs = t.sample(n, 99);
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - m2 * m2) / n as f64).sqrt();
        assert!((m2 - 5.0 / 3.0).abs() < 5.0 * se, "m2 {m2} se {se}");
    }

    #[test]
    fn score_moment_identities_by_monte_carlo() {
        let n = 1_000_000;
        for fam in families() {
            let zs = fam.sample(n, 7);
            let c = fam.information_constant().unwrap();
            let scores: Vec<f64> = zs.iter().map(|&z| fam.score(z)).collect();
            let mean = scores.iter().sum::<f64>() / n as f64;
            let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!(mean.abs() < 5.0 * sd / (n as f64).sqrt(), "{fam:?} E score = {mean}");

            let derivs: Vec<f64> = zs.iter().map(|&z| fam.score_derivative(z)).collect();
            let dmean = derivs.iter().sum::<f64>() / n as f64;
            let dsd = (derivs.iter().map(|s| (s - dmean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!((dmean + c).abs() < 5.0 * dsd.max(1e-12) / (n as f64).sqrt() + 1e-12, "{fam:?} E score' = {dmean}, C = {c}");
        }
    }

    #[test]
    fn variance_and_regularity_flags() {
        assert_eq!(InnovationFamily::student_t(2.0).unwrap().variance(), None);
        assert_eq!(InnovationFamily::student_t(5.0).unwrap().variance(), Some(5.0 / 3.0));
        assert!(!InnovationFamily::student_t(2.0).unwrap().satisfies_assumptions_2());
        assert!(!InnovationFamily::student_t(4.0).unwrap().satisfies_assumptions_2());
        assert!(InnovationFamily::student_t(5.0).unwrap().satisfies_assumptions_2());
        assert!(InnovationFamily::gaussian(3.0).unwrap().satisfies_assumptions_2());
    }

    #[test]
    fn toml_descriptor_round_trip() {
        let fam: InnovationFamily = toml::from_str("family = \"student_t\"\ndf = 5.0\n").unwrap();
        assert_eq!(fam, InnovationFamily::StudentT { df: 5.0 });
        let fam: InnovationFamily = toml::from_str("family = \"gaussian\"\nsigma = 2.0\n").unwrap();
        assert_eq!(fam, InnovationFamily::Gaussian { sigma: 2.0 });
        assert!(toml::from_str::<InnovationFamily>("family = \"gaussian\"\nsigma = 2.0\nfoo = 1\n").is_err());
    }
}
