//! Empirical lower bound on the smooth-test-function distance and
//! Gaussian-moment diagnostics for normalized batches.
//!
//! The test class contains all C² functions with Lipschitz constant and
//! Hessian operator norm at most 1. We probe it with the cosine family
//! `g(x) = c·cos(⟨a,x⟩ + b)`, `c = min(1/‖a‖, 1/‖a‖²)`: both membership
//! inequalities hold by the amplitude rule, and `E g(X)` has a closed form
//! under any Gaussian law, so no Monte Carlo layer is needed on the
//! Gaussian side. The dictionary maximum is a valid lower bound of the
//! supremum; it never certifies tightness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::MatrixD;
use crate::quadrature::pairwise_sum;
use crate::seeds::{self, tag};
use crate::simulate::SampleBatch;

/// One member of the cosine dictionary: `x ↦ c·cos(⟨a,x⟩ + b)` with the
/// amplitude `c` fixed by the frequency (`c = 1` for `a = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl TestFunction {
    pub fn new(frequency: Vec<f64>, phase: f64) -> Self {
        TestFunction { frequency, phase }
    }

    pub fn norm(&self) -> f64 {
        self.frequency.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn amplitude(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            1.0
        } else {
            (1.0 / n).min(1.0 / (n * n))
        }
    }

    /// `c·‖a‖ ≤ 1` by the amplitude rule.
    pub fn lipschitz_constant(&self) -> f64 {
        self.amplitude() * self.norm()
    }

    /// `c·‖a‖² ≤ 1` by the amplitude rule.
    pub fn hessian_norm(&self) -> f64 {
        let n = self.norm();
        self.amplitude() * n * n
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.frequency.len());
        let dot: f64 = self.frequency.iter().zip(x).map(|(a, v)| a * v).sum();
        self.amplitude() * (dot + self.phase).cos()
    }
}

/// `E[g(X)]` for `X ~ N_d(0, C)` by the characteristic function:
/// `c·cos(b)·exp(−aᵀCa/2)`.
pub fn gaussian_expectation(g: &TestFunction, c: &MatrixD) -> f64 {
    let quad: f64 = {
        let ax = c.matvec(&g.frequency);
        g.frequency.iter().zip(&ax).map(|(a, v)| a * v).sum()
    };
    g.amplitude() * g.phase.cos() * (-0.5 * quad).exp()
}

/// The default dictionary: 64 seeded unit directions, scaled to norms
/// {0.5, 1, 2, 4}, phases {0, π/4}.
pub fn default_dictionary(dimension: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = seeds::rng_for(seed, &[tag::DICTIONARY, dimension as u64]);
    let mut dict = Vec::with_capacity(64 * 4 * 2);
    for _ in 0..64 {
        let mut dir = vec![0.0; dimension];
        loop {
            let mut i = 0;
            while i < dimension {
                let (a, b) = seeds::normal_pair(&mut rng);
                dir[i] = a;
                if i + 1 < dimension {
                    dir[i + 1] = b;
                }
                i += 2;
            }
            let n: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-9 {
                for v in dir.iter_mut() {
                    *v /= n;
                }
                break;
            }
        }
        for scale in [0.5, 1.0, 2.0, 4.0] {
            for phase in [0.0, std::f64::consts::FRAC_PI_4] {
                let freq: Vec<f64> = dir.iter().map(|v| v * scale).collect();
                dict.push(TestFunction::new(freq, phase));
            }
        }
    }
    dict
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FunctionDiscrepancy {
    /// `mean_r g(G_r) − E g(X)`.
    pub discrepancy: f64,
    pub std_error: f64,
}

/// Dictionary lower bound on the distance, with per-function detail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceReport {
    pub lower_bound: f64,
    pub argmax_index: usize,
    pub argmax: TestFunction,
    pub argmax_std_error: f64,
    pub dictionary_size: usize,
    pub per_function: Vec<FunctionDiscrepancy>,
}

/// Max |empirical − Gaussian| discrepancy over the dictionary, evaluated
/// on the normalized rows of a batch.
pub fn empirical_delta_lower(
    batch: &SampleBatch,
    c: &MatrixD,
    dictionary: &[TestFunction],
) -> Result<DistanceReport> {
    if dictionary.is_empty() {
        return Err(Error::config("empirical_delta_lower: empty dictionary"));
    }
    let g = batch.g_rows()?;
    let d = batch.dimension;
    let rf = batch.replicates as f64;
    let mut per_function = Vec::with_capacity(dictionary.len());
    let mut best = (0usize, -1.0f64);
    for (idx, func) in dictionary.iter().enumerate() {
        if func.frequency.len() != d {
            return Err(Error::config("dictionary function dimension mismatch"));
        }
        let vals: Vec<f64> = (0..batch.replicates)
            .map(|r| func.eval(&g[r * d..(r + 1) * d]))
            .collect();
        let mean = pairwise_sum(&vals) / rf;
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (rf - 1.0);
        let se = (var.max(0.0) / rf).sqrt();
        let discrepancy = mean - gaussian_expectation(func, c);
        per_function.push(FunctionDiscrepancy { discrepancy, std_error: se });
        if discrepancy.abs() > best.1 {
            best = (idx, discrepancy.abs());
        }
    }
    Ok(DistanceReport {
        lower_bound: best.1,
        argmax_index: best.0,
        argmax: dictionary[best.0].clone(),
        argmax_std_error: per_function[best.0].std_error,
        dictionary_size: dictionary.len(),
        per_function,
    })
}

/// Covariance error and shape diagnostics of the normalized rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentDiagnostics {
    /// Entrywise `|Cov(G) − C|`.
    pub cov_error: MatrixD,
    pub cov_error_se: MatrixD,
    pub max_cov_error: f64,
    pub skewness: Vec<f64>,
    /// Gaussian-asymptotic `sqrt(6/R)`.
    pub skewness_se: f64,
    pub excess_kurtosis: Vec<f64>,
    /// Gaussian-asymptotic `sqrt(24/R)`.
    pub kurtosis_se: f64,
    pub degenerate: bool,
}

pub fn moment_diagnostics(batch: &SampleBatch, c: &MatrixD) -> Result<MomentDiagnostics> {
    if batch.replicates < 10 {
        return Err(Error::config("moment_diagnostics: need at least 10 replicates"));
    }
    let rows = batch.g_rows()?;
    let d = batch.dimension;
    let moments = crate::simulate::empirical_moments(rows, batch.replicates, d)?;
    let mut cov_error = MatrixD::zeros(d);
    let mut max_err = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let e = (moments.cov.get(i, j) - c.get(i, j)).abs();
            cov_error.set(i, j, e);
            max_err = max_err.max(e);
        }
    }
    let rf = batch.replicates as f64;
    let mut skew = vec![0.0; d];
    let mut kurt = vec![0.0; d];
    let mut degenerate = false;
    for i in 0..d {
        let mean = moments.mean[i];
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for r in 0..batch.replicates {
            let x = rows[r * d + i] - mean;
            let x2 = x * x;
            m2 += x2;
            m3 += x2 * x;
            m4 += x2 * x2;
        }
        m2 /= rf;
        m3 /= rf;
        m4 /= rf;
        if m2 <= 1e-12 {
            degenerate = true;
            continue;
        }
        skew[i] = m3 / m2.powf(1.5);
        kurt[i] = m4 / (m2 * m2) - 3.0;
    }
    Ok(MomentDiagnostics {
        cov_error,
        cov_error_se: moments.cov_se,
        max_cov_error: max_err,
        skewness: skew,
        skewness_se: (6.0 / rf).sqrt(),
        excess_kurtosis: kurt,
        kurtosis_se: (24.0 / rf).sqrt(),
        degenerate,
    })
}

/// Synthetic `N_d(0, C)` batch, for null-case tests of the diagnostics.
pub fn synthetic_gaussian_batch(
    c: &MatrixD,
    replicates: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let d = c.dim();
    let root = crate::linalg::sqrt_pd(c)?;
    let mut rng = seeds::rng_for(seed, &[tag::DICTIONARY, 0xd1a6]);
    let mut g = vec![0.0; replicates * d];
    let mut z = vec![0.0; d];
    for r in 0..replicates {
        let mut i = 0;
        while i < d {
            let (a, b) = seeds::normal_pair(&mut rng);
            z[i] = a;
            if i + 1 < d {
                z[i + 1] = b;
            }
            i += 2;
        }
        let x = root.matvec(&z);
        g[r * d..(r + 1) * d].copy_from_slice(&x);
    }
    Ok(SampleBatch {
        replicates,
        dimension: d,
        seed,
        f: g.clone(),
        g: Some(g),
        mean_used: Some(vec![0.0; d]),
        sigma_used: Some(c.clone()),
        normalizer: Some(MatrixD::identity(d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_members_stay_in_the_test_class() {
        for d in [2usize, 3] {
            let dict = default_dictionary(d, 7);
            assert_eq!(dict.len(), 512);
            for g in &dict {
                assert!(g.lipschitz_constant() <= 1.0 + 1e-12);
                assert!(g.hessian_norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_expectation_special_cases() {
        let c = MatrixD::identity(2);
        // a = 0 → constant function with amplitude 1
        let g = TestFunction::new(vec![0.0, 0.0], 0.3);
        assert!((gaussian_expectation(&g, &c) - 0.3f64.cos()).abs() < 1e-15);
        // b = π/2 → odd symmetry kills the expectation
        let g = TestFunction::new(vec![1.0, 2.0], std::f64::consts::FRAC_PI_2);
        assert!(gaussian_expectation(&g, &c).abs() < 1e-15);
        // a = e1, b = 0, C = I → e^{-1/2}
        let g = TestFunction::new(vec![1.0, 0.0], 0.0);
        assert!((gaussian_expectation(&g, &c) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_expectation_matches_monte_carlo() {
        // one-off verification of the characteristic-function identity
        let c = MatrixD::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap();
        let g = TestFunction::new(vec![1.2, -0.7], 0.4);
        let batch = synthetic_gaussian_batch(&c, 400_000, 5).unwrap();
        let rows = batch.g_rows().unwrap();
        let vals: Vec<f64> = (0..batch.replicates).map(|r| g.eval(&rows[r * 2..r * 2 + 2])).collect();
        let mean = pairwise_sum(&vals) / batch.replicates as f64;
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
        let se = (pairwise_sum(&sq) / (batch.replicates as f64 - 1.0) / batch.replicates as f64)
            .sqrt();
        let closed = gaussian_expectation(&g, &c);
        assert!(
            (mean - closed).abs() <= 4.0 * se,
            "mc {mean} vs closed {closed} (4se {})",
            4.0 * se
        );
    }

    #[test]
    fn null_case_lower_bound_is_noise_level() {
        let c = MatrixD::identity(2);
        let batch = synthetic_gaussian_batch(&c, 100_000, 9).unwrap();
        let dict = default_dictionary(2, 13);
        let report = empirical_delta_lower(&batch, &c, &dict).unwrap();
        let max_se = report
            .per_function
            .iter()
            .map(|f| f.std_error)
            .fold(0.0f64, f64::max);
        assert!(
            report.lower_bound <= 4.0 * max_se,
            "null lower bound {} vs 4·max SE {}",
            report.lower_bound,
            4.0 * max_se
        );
    }

    #[test]
    fn mean_shift_is_detected() {
        let c = MatrixD::identity(2);
        let mut batch = synthetic_gaussian_batch(&c, 100_000, 11).unwrap();
        if let Some(g) = batch.g.as_mut() {
            for r in 0..100_000 {
                g[r * 2] += 0.5;
            }
        }
        let dict = default_dictionary(2, 13);
        let report = empirical_delta_lower(&batch, &c, &dict).unwrap();
        let max_se = report
            .per_function
            .iter()
            .map(|f| f.std_error)
            .fold(0.0f64, f64::max);
        assert!(
            report.lower_bound > 10.0 * max_se,
            "shifted lower bound {} should exceed 10·max SE {}",
            report.lower_bound,
            10.0 * max_se
        );
    }

    #[test]
    fn constant_test_function_has_zero_discrepancy() {
        let c = MatrixD::identity(2);
        let batch = synthetic_gaussian_batch(&c, 1_000, 3).unwrap();
        let dict = vec![TestFunction::new(vec![0.0, 0.0], 0.0)];
        let report = empirical_delta_lower(&batch, &c, &dict).unwrap();
        assert_eq!(report.lower_bound, 0.0);
    }

    #[test]
    fn diagnostics_null_case_and_guards() {
        let c = MatrixD::identity(2);
        let batch = synthetic_gaussian_batch(&c, 100_000, 21).unwrap();
        let diag = moment_diagnostics(&batch, &c).unwrap();
        assert!(!diag.degenerate);
        for i in 0..2 {
            assert!(diag.skewness[i].abs() <= 4.0 * diag.skewness_se, "skew {}", diag.skewness[i]);
            assert!(
                diag.excess_kurtosis[i].abs() <= 4.0 * diag.kurtosis_se,
                "kurt {}",
                diag.excess_kurtosis[i]
            );
            for j in 0..2 {
                assert!(
                    diag.cov_error.get(i, j) <= 4.0 * diag.cov_error_se.get(i, j).max(1e-3),
                    "cov err {}",
                    diag.cov_error.get(i, j)
                );
            }
        }
        // tiny batches rejected
        let small = synthetic_gaussian_batch(&c, 5, 1).unwrap();
        assert!(moment_diagnostics(&small, &c).is_err());
        // constant batch flagged degenerate
        let mut flat = synthetic_gaussian_batch(&c, 100, 2).unwrap();
        if let Some(g) = flat.g.as_mut() {
            g.iter_mut().for_each(|v| *v = 1.0);
        }
        let diag = moment_diagnostics(&flat, &c).unwrap();
        assert!(diag.degenerate);
    }

    #[test]
    fn kurtosis_decays_with_intensity() {
        // standardized Poisson excess kurtosis is 1/μ(A): t = 200 must be
        // visibly flatter than t = 10 on the order1-pair batch
        use crate::model::{builtin_model, BuiltinParams};
        use crate::simulate::{normalize, replicate};
        let run = |t: f64| {
            let model = builtin_model("order1-pair", &BuiltinParams::with_t(t)).unwrap();
            let batch = replicate(&model, 40_000, 17).unwrap();
            let sigma = MatrixD::diag(&[t / 4.0, t / 2.0]);
            let e = [t / 4.0, t / 2.0];
            let batch = normalize(&batch, &e, &sigma, &MatrixD::identity(2)).unwrap();
            let diag = moment_diagnostics(&batch, &MatrixD::identity(2)).unwrap();
            diag.excess_kurtosis.iter().map(|k| k.abs()).fold(0.0f64, f64::max)
        };
        let coarse = run(10.0);
        let fine = run(200.0);
        assert!(
            fine < coarse,
            "kurtosis should decay: t=10 → {coarse}, t=200 → {fine}"
        );
        // Poisson oracle: max |excess kurtosis| at t = 10 is 1/2.5 = 0.4
        assert!((coarse - 0.4).abs() < 0.1, "coarse {coarse}");
    }
}
