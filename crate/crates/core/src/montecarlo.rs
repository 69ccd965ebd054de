//! Monte Carlo replication harness.
//!
//! Each replication simulates a fresh series, fits every requested method
//! (tuned on the fixed grid of the design) and records the estimates. The
//! replication seed is `derive_seed([master, N, r])`, so replications are
//! independent of scheduling and of which other sample sizes are in the
//! design. Aggregation runs over the collected records in a fixed order, so
//! summaries are bit-identical for any thread count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::ar::{simulate, ArModel, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::estimator::{fit_mle, tune, FitOptions, Method, TuningGrid};
use crate::innovations::InnovationFamily;
use crate::numeric::{derive_seed, l2_distance, median};
use crate::penalty::{PenaltyKind, DEFAULT_SCAD_A};

const Z_95: f64 = 1.959_963_984_540_054;

/// AR model description shared by model files and experiment designs.
///
/// With `exponents`, coefficient `j` at sample size `N` is
/// `coefficients[j] · N^exponents[j]`, which expresses designs whose small
/// coefficients shrink with `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    pub innovation: InnovationFamily,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::invalid("model needs at least one coefficient"));
        }
        if let Some(p) = self.order {
            if p != self.coefficients.len() {
                return Err(Error::invalid(format!(
                    "order {p} does not match {} coefficients",
                    self.coefficients.len()
                )));
            }
        }
        if let Some(e) = &self.exponents {
            if e.len() != self.coefficients.len() {
                return Err(Error::invalid("exponents must match coefficients in length"));
            }
        }
        self.innovation.validate()
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients_at(&self, n: usize) -> Vec<f64> {
        match &self.exponents {
            None => self.coefficients.clone(),
            Some(e) => self
                .coefficients
                .iter()
                .zip(e)
                .map(|(c, &x)| if x == 0.0 { *c } else { c * (n as f64).powf(x) })
                .collect(),
        }
    }

    pub fn model_at(&self, n: usize) -> Result<ArModel> {
        self.validate()?;
        ArModel::new(self.coefficients_at(n), self.innovation)
    }
}

/// Either an explicit list or a `lo:hi:n` geometric spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    List(Vec<f64>),
    Spec(String),
}

impl LambdaSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            LambdaSpec::List(v) => Ok(v.clone()),
            LambdaSpec::Spec(s) => TuningGrid::parse_lambda_spec(s),
        }
    }
}

fn default_a() -> Vec<f64> {
    vec![DEFAULT_SCAD_A]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lambdas: LambdaSpec,
    #[serde(default = "default_a")]
    pub a: Vec<f64>,
}

fn default_split() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningDesign {
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub lasso: Option<GridSpec>,
    #[serde(default)]
    pub scad: Option<GridSpec>,
}

impl TuningDesign {
    pub fn grid(&self, kind: PenaltyKind) -> Result<TuningGrid> {
        let spec = match kind {
            PenaltyKind::Lasso => self.lasso.as_ref(),
            PenaltyKind::Scad => self.scad.as_ref(),
        }
        .ok_or_else(|| Error::invalid(format!("design lists {kind:?} but has no grid for it")))?;
        TuningGrid::new(spec.lambdas.values()?, spec.a.clone(), self.split)
    }
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDesign {
    pub master_seed: u64,
    pub replications: usize,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub methods: Vec<McMethod>,
    /// Order of the fitted models; defaults to the true order.
    #[serde(default)]
    pub fit_order: Option<usize>,
    pub model: ModelSpec,
    pub tuning: TuningDesign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMethod {
    Mle,
    Lasso,
    Scad,
}

impl McMethod {
    pub fn name(&self) -> &'static str {
        match self {
            McMethod::Mle => "mle",
            McMethod::Lasso => "lasso",
            McMethod::Scad => "scad",
        }
    }

    pub fn method(&self) -> Method {
        match self {
            McMethod::Mle => Method::Mle,
            McMethod::Lasso => Method::LassoPcmle,
            McMethod::Scad => Method::ScadPcmle,
        }
    }
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::invalid("design needs at least one sample size"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("design needs at least one method"));
        }
        self.model.validate()?;
        if self.fit_order == Some(0) {
            return Err(Error::invalid("fit_order must be at least 1"));
        }
        for m in &self.methods {
            match m {
                McMethod::Mle => {}
                McMethod::Lasso => {
                    self.tuning.grid(PenaltyKind::Lasso)?;
                }
                McMethod::Scad => {
                    self.tuning.grid(PenaltyKind::Scad)?;
                }
            }
        }
        for &n in &self.sample_sizes {
            self.model.model_at(n)?;
        }
        Ok(())
    }

    pub fn fit_order(&self) -> usize {
        self.fit_order.unwrap_or_else(|| self.model.order())
    }

    /// Truth padded or truncated to the fitted order.
    pub fn truth_at(&self, n: usize) -> Vec<f64> {
        let mut t = self.model.coefficients_at(n);
        t.resize(self.fit_order(), 0.0);
        t
    }
}

pub fn replication_seed(master: u64, n: usize, r: usize) -> u64 {
    derive_seed(&[master, n as u64, r as u64])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub method: McMethod,
    pub converged: bool,
    pub estimates: Vec<f64>,
    pub lambda: Option<f64>,
    pub a: Option<f64>,
    pub l2_error: Option<f64>,
    pub message: Option<String>,
}

fn run_replication(design: &ExperimentDesign, n: usize, r: usize, opts: &FitOptions) -> Result<Vec<ReplicationRecord>> {
    let seed = replication_seed(design.master_seed, n, r);
    let model = design.model.model_at(n)?;
    let series = simulate(&model, n, design.burn_in, seed)?.into_inner();
    let truth = design.truth_at(n);
    let p = design.fit_order();
    let innovation = design.model.innovation;
    let records = design
        .methods
        .iter()
        .map(|&method| {
            let fit = match method {
                McMethod::Mle => fit_mle(&series, p, innovation, opts),
                McMethod::Lasso => tune(&series, p, innovation, PenaltyKind::Lasso, &design.tuning.grid(PenaltyKind::Lasso)?, opts),
                McMethod::Scad => tune(&series, p, innovation, PenaltyKind::Scad, &design.tuning.grid(PenaltyKind::Scad)?, opts),
            };
            Ok(match fit {
                Ok(f) => ReplicationRecord {
                    n,
                    replication: r,
                    seed,
                    method,
                    converged: true,
                    l2_error: Some(l2_distance(&f.estimates, &truth)),
                    estimates: f.estimates,
                    lambda: f.lambda_used,
                    a: f.a_used,
                    message: None,
                },
                Err(e) if matches!(e, Error::Convergence { .. } | Error::DegenerateData(_)) => ReplicationRecord {
                    n,
                    replication: r,
                    seed,
                    method,
                    converged: false,
                    estimates: Vec::new(),
                    lambda: None,
                    a: None,
                    l2_error: None,
                    message: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LagSummary {
    pub method: McMethod,
    pub n: usize,
    pub lag: usize,
    pub true_value: f64,
    pub prob_zero: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// `|mean(φ̂_j) - φ_j|` over converged fits.
    pub avg_bias: f64,
    pub mean_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointSummary {
    pub method: McMethod,
    pub n: usize,
    /// Probability that every truly-zero lag is estimated exactly zero.
    pub prob_all_zero: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub median_l2: f64,
    pub mean_l2: f64,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub lags: Vec<LagSummary>,
    pub joint: Vec<JointSummary>,
    pub innovation: InnovationFamily,
    pub assumptions_2: bool,
}

impl McSummary {
    pub fn lag(&self, method: McMethod, n: usize, lag: usize) -> Option<&LagSummary> {
        self.lags.iter().find(|s| s.method == method && s.n == n && s.lag == lag)
    }

    pub fn joint(&self, method: McMethod, n: usize) -> Option<&JointSummary> {
        self.joint.iter().find(|s| s.method == method && s.n == n)
    }
}

#[derive(Clone, Debug)]
pub struct McResults {
    pub design: ExperimentDesign,
    pub records: Vec<ReplicationRecord>,
    pub summary: McSummary,
}

pub fn run_experiment(design: &ExperimentDesign) -> Result<McResults> {
    run_experiment_with(design, &FitOptions::default())
}

pub fn run_experiment_with(design: &ExperimentDesign, opts: &FitOptions) -> Result<McResults> {
    design.validate()?;
    let jobs: Vec<(usize, usize)> = design
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..design.replications).map(move |r| (n, r)))
        .collect();
    let per_job: Vec<Vec<ReplicationRecord>> = jobs
        .par_iter()
        .map(|&(n, r)| run_replication(design, n, r, opts))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicationRecord> = per_job.into_iter().flatten().collect();
    let summary = summarize(design, &records);
    Ok(McResults { design: design.clone(), records, summary })
}

fn summarize(design: &ExperimentDesign, records: &[ReplicationRecord]) -> McSummary {
    let p = design.fit_order();
    let mut lags = Vec::new();
    let mut joint = Vec::new();
    for &method in &design.methods {
        for &n in &design.sample_sizes {
            let truth = design.truth_at(n);
            let group: Vec<&ReplicationRecord> = records.iter().filter(|r| r.method == method && r.n == n).collect();
            let total = group.len();
            let ok: Vec<&ReplicationRecord> = group.iter().copied().filter(|r| r.converged).collect();
            for (j, &true_value) in truth.iter().enumerate() {
                let zeros = ok.iter().filter(|r| r.estimates[j] == 0.0).count();
                let mean = if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| r.estimates[j]).sum::<f64>() / ok.len() as f64
                };
                let (lo, hi) = wilson_interval(zeros, total);
                lags.push(LagSummary {
                    method,
                    n,
                    lag: j + 1,
                    true_value,
                    prob_zero: zeros as f64 / total as f64,
                    wilson_lo: lo,
                    wilson_hi: hi,
                    avg_bias: (mean - truth[j]).abs(),
                    mean_estimate: mean,
                });
            }
            let zero_lags: Vec<usize> = (0..p).filter(|&j| truth[j] == 0.0).collect();
            let all_zero = ok
                .iter()
                .filter(|r| zero_lags.iter().all(|&j| r.estimates[j] == 0.0))
                .count();
            let mut l2: Vec<f64> = ok.iter().filter_map(|r| r.l2_error).collect();
            let mean_l2 = if l2.is_empty() { f64::NAN } else { l2.iter().sum::<f64>() / l2.len() as f64 };
            let (lo, hi) = wilson_interval(all_zero, total);
            joint.push(JointSummary {
                method,
                n,
                prob_all_zero: all_zero as f64 / total as f64,
                wilson_lo: lo,
                wilson_hi: hi,
                median_l2: median(&mut l2).unwrap_or(f64::NAN),
                mean_l2,
                replications: total,
                failures: total - ok.len(),
            });
        }
    }
    McSummary {
        lags,
        joint,
        innovation: design.model.innovation,
        assumptions_2: design.model.innovation.satisfies_assumptions_2(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: McMethod,
    pub n: usize,
    /// Lag number, or `"both"` for the joint all-zeros event.
    pub lag: String,
    pub probability: f64,
}

/// Probability of a zero estimate against sample size, one point per
/// (method, N, lag) plus the joint event.
pub fn probability_curve(summary: &McSummary) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for j in &summary.joint {
        for l in summary.lags.iter().filter(|l| l.method == j.method && l.n == j.n) {
            out.push(CurvePoint { method: l.method, n: l.n, lag: l.lag.to_string(), probability: l.prob_zero });
        }
        out.push(CurvePoint { method: j.method, n: j.n, lag: "both".into(), probability: j.prob_all_zero });
    }
    out
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The bounds are exactly 0 and 1 at the extremes; avoid rounding residue.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Two-sided p-value of the pooled two-proportion z-test. Identical
/// proportions (including both 0 or both 1) give 1.
pub fn two_proportion_p_value(x1: usize, n1: usize, x2: usize, n2: usize) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let var = pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f);
    if var <= 0.0 {
        return 1.0;
    }
    let z = (x1 as f64 / n1f - x2 as f64 / n2f) / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn raw_csv(records: &[ReplicationRecord], order: usize) -> String {
    let mut s = String::from("n,replication,seed,method,converged,lambda,a,l2_error");
    for j in 1..=order {
        write!(s, ",est_{j}").unwrap();
    }
    s.push_str(",message\n");
    for r in records {
        write!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.replication,
            r.seed,
            r.method.name(),
            r.converged,
            opt(r.lambda),
            opt(r.a),
            opt(r.l2_error)
        )
        .unwrap();
        for j in 0..order {
            s.push(',');
            if let Some(v) = r.estimates.get(j) {
                write!(s, "{v}").unwrap();
            }
        }
        let msg = r.message.as_deref().unwrap_or("").replace(['"', ',', '\n'], " ");
        writeln!(s, ",{msg}").unwrap();
    }
    s
}

pub fn summary_csv(summary: &McSummary) -> String {
    let mut s = String::from(
        "method,n,lag,true_value,prob_zero,wilson_lo,wilson_hi,avg_bias,mean_estimate,median_l2,mean_l2,replications,failures,assumptions_2\n",
    );
    for j in &summary.joint {
        for l in summary.lags.iter().filter(|l| l.method == j.method && l.n == j.n) {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},,,{},{},{}",
                l.method.name(),
                l.n,
                l.lag,
                l.true_value,
                l.prob_zero,
                l.wilson_lo,
                l.wilson_hi,
                l.avg_bias,
                l.mean_estimate,
                j.replications,
                j.failures,
                summary.assumptions_2
            )
            .unwrap();
        }
        writeln!(
            s,
            "{},{},joint,,{},{},{},,,{},{},{},{},{}",
            j.method.name(),
            j.n,
            j.prob_all_zero,
            j.wilson_lo,
            j.wilson_hi,
            j.median_l2,
            j.mean_l2,
            j.replications,
            j.failures,
            summary.assumptions_2
        )
        .unwrap();
    }
    s
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("method,n,lag,probability\n");
    for c in points {
        writeln!(s, "{},{},{},{}", c.method.name(), c.n, c.lag, c.probability).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_design(methods: Vec<McMethod>, reps: usize) -> ExperimentDesign {
        ExperimentDesign {
            master_seed: 12,
            replications: reps,
            sample_sizes: vec![300],
            burn_in: 200,
            methods,
            fit_order: None,
            model: ModelSpec {
                order: Some(5),
                coefficients: vec![0.2, 0.0, 0.2, 0.0, 0.2],
                exponents: None,
                innovation: InnovationFamily::standard_normal(),
            },
            tuning: TuningDesign {
                split: 0.8,
                lasso: Some(GridSpec { lambdas: LambdaSpec::Spec("0.01:0.1:4".into()), a: vec![] }),
                scad: Some(GridSpec { lambdas: LambdaSpec::List(vec![0.04, 0.08]), a: vec![2.1] }),
            },
        }
    }

    #[test]
    fn single_replication_summary_matches_fit() {
        let d = small_design(vec![McMethod::Scad], 1);
        let res = run_experiment(&d).unwrap();
        let rec = &res.records[0];
        assert!(rec.converged);
        for j in 0..5 {
            let expected = if rec.estimates[j] == 0.0 { 1.0 } else { 0.0 };
            assert_eq!(res.summary.lag(McMethod::Scad, 300, j + 1).unwrap().prob_zero, expected);
        }
        let both = rec.estimates[1] == 0.0 && rec.estimates[3] == 0.0;
        assert_eq!(res.summary.joint(McMethod::Scad, 300).unwrap().prob_all_zero, if both { 1.0 } else { 0.0 });
    }

    #[test]
    fn mle_never_zero() {
        let d = small_design(vec![McMethod::Mle], 5);
        let res = run_experiment(&d).unwrap();
        assert!(res.summary.lags.iter().all(|l| l.prob_zero == 0.0));
        assert!(probability_curve(&res.summary).iter().all(|c| c.probability == 0.0));
    }

    #[test]
    fn deterministic_summary() {
        let d = small_design(vec![McMethod::Lasso, McMethod::Scad], 4);
        let a = summary_csv(&run_experiment(&d).unwrap().summary);
        let b = summary_csv(&run_experiment(&d).unwrap().summary);
        assert_eq!(a, b);
    }

    #[test]
    fn model_with_shrinking_coefficients() {
        let spec = ModelSpec {
            order: None,
            coefficients: vec![0.2, 0.0, 1.0, 0.0, 0.5],
            exponents: Some(vec![0.0, 0.0, -0.75, 0.0, -0.75]),
            innovation: InnovationFamily::standard_normal(),
        };
        let c = spec.coefficients_at(1000);
        assert_eq!(c[0], 0.2);
        assert!((c[2] - 1000f64.powf(-0.75)).abs() < 1e-15);
        assert!((c[4] - 0.5 * 1000f64.powf(-0.75)).abs() < 1e-15);
    }

    #[test]
    fn design_validation() {
        let mut d = small_design(vec![McMethod::Scad], 1);
        d.tuning.scad = None;
        assert!(d.validate().is_err());
        let mut d = small_design(vec![McMethod::Mle], 0);
        assert!(d.validate().is_err());
        d.replications = 1;
        d.model.coefficients = vec![1.2];
        d.model.order = None;
        assert!(matches!(d.validate(), Err(Error::Model(_))));
    }

    #[test]
    fn design_toml_rejects_unknown_keys() {
        let good = r#"
master_seed = 1
replications = 2
sample_sizes = [200]
methods = ["mle", "scad"]
[model]
coefficients = [0.3]
innovation = { family = "gaussian", sigma = 1.0 }
[tuning.scad]
lambdas = "0.01:0.1:3"
"#;
        let d: ExperimentDesign = toml::from_str(good).unwrap();
        assert_eq!(d.burn_in, DEFAULT_BURN_IN);
        assert_eq!(d.tuning.scad.as_ref().unwrap().a, vec![2.1]);
        let bad = good.replace("replications = 2", "replications = 2\nreplicates = 3");
        assert!(toml::from_str::<ExperimentDesign>(&bad).is_err());
    }

    #[test]
    fn wilson_interval_properties() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(61, 100);
        assert!(lo < 0.61 && hi > 0.61);
        assert!((lo - 0.5120).abs() < 1e-3 && (hi - 0.7000).abs() < 1e-3);
    }

    #[test]
    fn two_proportion_test_values() {
        assert_eq!(two_proportion_p_value(0, 100, 0, 100), 1.0);
        assert_eq!(two_proportion_p_value(100, 100, 100, 100), 1.0);
        // 60/100 vs 40/100: z = 0.2 / sqrt(0.5·0.5·0.02) = 2.828
        let p = two_proportion_p_value(60, 100, 40, 100);
        assert!((p - 0.004_677_7).abs() < 1e-6, "{p}");
    }

    #[test]
    fn seeds_depend_on_all_parts() {
        assert_ne!(replication_seed(1, 1000, 0), replication_seed(1, 1000, 1));
        assert_ne!(replication_seed(1, 1000, 0), replication_seed(1, 2000, 0));
        assert_ne!(replication_seed(1, 1000, 0), replication_seed(2, 1000, 0));
    }
}
