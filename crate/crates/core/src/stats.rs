//! Distributional tests used by the verification experiments. All tests run
//! at `α = 0.01`.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Asymptotic Kolmogorov critical value at `α = 0.01`.
pub const KS_C_ALPHA_01: f64 = 1.628;

pub const ALPHA: f64 = 0.01;

/// Smallest sample accepted by the KS tests.
pub const MIN_KS_SAMPLES: usize = 10;

/// Which side of the threshold passes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Pass iff `statistic < threshold`.
    Below,
    /// Pass iff `statistic > threshold`.
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub name: String,
    pub n: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub pass: bool,
    /// Exploratory results are reported but never gate an exit status.
    pub asserted: bool,
    /// Named auxiliary numbers (means, standard errors, ...).
    pub aux: Vec<(String, f64)>,
}

impl StatTestResult {
    pub fn new(name: impl Into<String>, n: usize, statistic: f64, threshold: f64, direction: Direction) -> Self {
        let pass = match direction {
            Direction::Below => statistic < threshold,
            Direction::Above => statistic > threshold,
        };
        StatTestResult {
            name: name.into(),
            n,
            statistic,
            threshold,
            direction,
            pass,
            asserted: true,
            aux: Vec::new(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn exploratory(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn with_aux(mut self, key: &str, value: f64) -> Self {
        self.aux.push((key.to_string(), value));
        self
    }

    /// Re-evaluates against a different threshold, keeping the direction.
    pub fn with_threshold(self, threshold: f64) -> Self {
        let mut out = StatTestResult::new(self.name, self.n, self.statistic, threshold, self.direction);
        out.asserted = self.asserted;
        out.aux = self.aux;
        out
    }

    pub fn aux(&self, key: &str) -> Option<f64> {
        self.aux.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

impl fmt::Display for StatTestResult {
    /// `name n statistic threshold PASS|FAIL [key=value ...]`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.direction {
            Direction::Below => "<",
            Direction::Above => ">",
        };
        write!(
            f,
            "{:<40} n={:<8} stat={:<12.6e} {op} {:<12.6e} {}",
            self.name,
            self.n,
            self.statistic,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        if !self.asserted {
            f.write_str(" (exploratory)")?;
        }
        for (k, v) in &self.aux {
            write!(f, " {k}={v:.6e}")?;
        }
        Ok(())
    }
}

fn finite_sorted(samples: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_x |F_n(x) − F(x)|` for a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let sorted = finite_sorted(samples);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// One-sample KS test: pass iff `D_n < 1.628/√n`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<StatTestResult> {
    let n = samples.iter().filter(|x| x.is_finite()).count();
    if n < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n,
            need: MIN_KS_SAMPLES,
        });
    }
    let d = ks_statistic(samples, cdf);
    Ok(StatTestResult::new(
        "ks_one_sample",
        n,
        d,
        KS_C_ALPHA_01 / (n as f64).sqrt(),
        Direction::Below,
    ))
}

/// `sup_x |F_a(x) − F_b(x)|`, with ties handled by advancing both sides.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let a = finite_sorted(a);
    let b = finite_sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample KS test: pass iff `D < 1.628·√((n_a + n_b)/(n_a·n_b))`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<StatTestResult> {
    let na = a.iter().filter(|x| x.is_finite()).count();
    let nb = b.iter().filter(|x| x.is_finite()).count();
    if na.min(nb) < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            got: na.min(nb),
            need: MIN_KS_SAMPLES,
        });
    }
    let d = ks_two_sample_statistic(a, b);
    let threshold = KS_C_ALPHA_01 * (((na + nb) as f64) / (na as f64 * nb as f64)).sqrt();
    Ok(StatTestResult::new("ks_two_sample", na.min(nb), d, threshold, Direction::Below)
        .with_aux("n_a", na as f64)
        .with_aux("n_b", nb as f64))
}

/// Upper `α = 0.01` quantile of the chi-square distribution.
pub fn chi_square_critical(dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - ALPHA)
}

/// Pearson chi-square goodness of fit. Adjacent bins are merged until every
/// expected count is at least 5.
pub fn chi_square_hist(observed: &[u64], expected_probabilities: &[f64]) -> Result<StatTestResult> {
    assert_eq!(observed.len(), expected_probabilities.len());
    let total_p: f64 = expected_probabilities.iter().sum();
    if !(total_p > 0.0) {
        return Err(Error::Usage("chi-square needs nonzero expected probabilities".into()));
    }
    let n: u64 = observed.iter().sum();
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probabilities) {
        o_acc += o as f64;
        e_acc += p / total_p * n as f64;
        if e_acc >= 5.0 {
            merged.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match merged.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => merged.push((o_acc, e_acc)),
        }
    }
    if merged.len() < 2 {
        return Err(Error::TooFewSamples {
            got: merged.len(),
            need: 2,
        });
    }
    let statistic: f64 = merged.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = merged.len() - 1;
    Ok(
        StatTestResult::new("chi_square", n as usize, statistic, chi_square_critical(dof), Direction::Below)
            .with_aux("dof", dof as f64),
    )
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn normal_cdf(mean: f64, std: f64) -> impl Fn(f64) -> f64 {
    let dist = Normal::new(mean, std).expect("positive standard deviation");
    move |x| dist.cdf(x)
}

pub fn exponential_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}

pub fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sorted samples or a binned histogram.
#[derive(Clone, Debug, PartialEq)]
pub enum EmpiricalDistribution {
    Samples(Vec<f64>),
    Histogram { edges: Vec<f64>, counts: Vec<u64> },
}

impl EmpiricalDistribution {
    pub fn from_samples(samples: &[f64]) -> Self {
        EmpiricalDistribution::Samples(finite_sorted(samples))
    }

    /// `bins` equal-width bins spanning the sample range.
    pub fn histogram(samples: &[f64], bins: usize) -> Result<Self> {
        let sorted = finite_sorted(samples);
        if sorted.is_empty() || bins == 0 {
            return Err(Error::TooFewSamples { got: sorted.len(), need: 1 });
        }
        let (lo, mut hi) = (sorted[0], sorted[sorted.len() - 1]);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for x in sorted {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(EmpiricalDistribution::Histogram { edges, counts })
    }

    /// `(x, F(x))` at each sorted sample.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        match self {
            EmpiricalDistribution::Samples(v) => {
                let n = v.len() as f64;
                v.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n)).collect()
            }
            EmpiricalDistribution::Histogram { edges, counts } => {
                let n: u64 = counts.iter().sum();
                let mut acc = 0;
                counts
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        acc += c;
                        (edges[k + 1], acc as f64 / n as f64)
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::trajectory_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = trajectory_rng(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
    }

    #[test]
    fn ks_one_sample_self_consistency_and_power() {
        let x = normals(1, 10_000, 0.0);
        let r = ks_one_sample(&x, standard_normal_cdf).unwrap();
        assert!(r.pass, "{r}");
        assert!((r.threshold - 0.01628).abs() < 1e-12);
        let shifted = normals(2, 10_000, 0.5);
        assert!(!ks_one_sample(&shifted, standard_normal_cdf).unwrap().pass);
    }

    #[test]
    fn ks_statistic_by_brute_force() {
        // Compare against sup over a dense grid of the step-function gap.
        let x = normals(3, 200, 0.0);
        let fast = ks_statistic(&x, standard_normal_cdf);
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let mut brute: f64 = 0.0;
        for (i, &xi) in sorted.iter().enumerate() {
            let f = standard_normal_cdf(xi);
            brute = brute.max((f - i as f64 / 200.0).abs()).max(((i + 1) as f64 / 200.0 - f).abs());
        }
        assert!((fast - brute).abs() < 1e-15);
    }

    #[test]
    fn ks_two_sample_threshold_and_power() {
        let a = normals(4, 10_000, 0.0);
        let b = normals(5, 10_000, 0.0);
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.pass, "{r}");
        assert!((r.threshold - 0.023023).abs() < 1e-6);
        let c = normals(6, 10_000, 1.0);
        assert!(!ks_two_sample(&a, &c).unwrap().pass);
        assert_eq!(ks_two_sample_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_two_sample_matches_pointwise_definition() {
        let a = normals(7, 300, 0.0);
        let b: Vec<f64> = normals(8, 170, 0.2).iter().map(|x| (x * 4.0).round() / 4.0).collect();
        let ecdf = |v: &[f64], x: f64| v.iter().filter(|&&y| y <= x).count() as f64 / v.len() as f64;
        let brute = a
            .iter()
            .chain(&b)
            .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
            .fold(0.0, f64::max);
        assert!((ks_two_sample_statistic(&a, &b) - brute).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert!(ks_one_sample(&[0.1; 5], uniform_cdf).is_err());
    }

    #[test]
    fn chi_square_cases() {
        let p = vec![1.0 / 16.0; 16];
        let exact = vec![625u64; 16];
        let r = chi_square_hist(&exact, &p).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
        assert_eq!(r.aux("dof"), Some(15.0));
        // Table value of the 0.99 quantile with 15 degrees of freedom.
        assert!((r.threshold - 30.578).abs() < 1e-3);

        let mut doubled = vec![10_000u64 / 16; 16];
        doubled[3] *= 2;
        assert!(!chi_square_hist(&doubled, &p).unwrap().pass);

        assert!(chi_square_hist(&[1, 2], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn chi_square_merges_sparse_bins() {
        let p = [0.001, 0.001, 0.498, 0.5];
        let obs = [1, 0, 500, 499];
        let r = chi_square_hist(&obs, &p).unwrap();
        assert_eq!(r.aux("dof"), Some(1.0));
    }

    #[test]
    fn histogram_counts_are_conserved() {
        let x = normals(9, 10_000, 0.0);
        let EmpiricalDistribution::Histogram { edges, counts } = EmpiricalDistribution::histogram(&x, 64).unwrap()
        else {
            unreachable!()
        };
        assert_eq!(counts.len(), 64);
        assert_eq!(edges.len(), 65);
        assert_eq!(counts.iter().sum::<u64>(), 10_000);
        let cdf = EmpiricalDistribution::from_samples(&x).cdf_points();
        assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 <= w[1].0));
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn pass_flag_follows_direction() {
        assert!(StatTestResult::new("a", 1, 0.3, 0.2, Direction::Above).pass);
        assert!(!StatTestResult::new("a", 1, 0.3, 0.2, Direction::Below).pass);
        assert!(!StatTestResult::new("a", 1, 0.2, 0.2, Direction::Below).pass);
    }

    #[test]
    fn exponential_cdf_values() {
        let f = exponential_cdf(2.0);
        assert_eq!(f(-1.0), 0.0);
        assert!((f(0.5) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        let mut rng = trajectory_rng(10);
        let x: Vec<f64> = (0..1000).map(|_| -(1.0 - rng.random::<f64>()).ln() / 2.0).collect();
        assert!(ks_one_sample(&x, f).unwrap().pass);
    }
}
