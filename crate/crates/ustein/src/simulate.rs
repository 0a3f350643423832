//! Poisson process sampling, U-statistic evaluation, and replication.
//!
//! Replicates are independent tasks with per-replicate sub-streams; the
//! batch matrix is always filled in replicate order, so a batch is
//! bit-identical for any thread count.

use std::io::Write;

use rand::Rng;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{sqrt_similarity, MatrixD};
use crate::model::{BoxRegion, IntensityMeasure, UStatModel, MAX_KERNEL_ARGS};
use crate::quadrature::pairwise_sum;
use crate::seeds::{self, tag};

/// Cost guards, in evaluations rather than points so dense configurations
/// fail fast with a clear message.
pub const MAX_EXPECTED_POINTS: f64 = 1.0e7;
pub const MAX_TUPLE_EVALS: f64 = 1.0e8;

/// A finite realization of the Poisson process, with its measure context.
#[derive(Debug, Clone)]
pub struct PointConfiguration {
    measure: IntensityMeasure,
    points: Vec<f64>, // flat, point-major
}

impl PointConfiguration {
    pub fn new(measure: IntensityMeasure, points: Vec<f64>) -> Result<Self> {
        if points.len() % measure.dim() != 0 {
            return Err(Error::config("point buffer length not a multiple of dim"));
        }
        Ok(PointConfiguration { measure, points })
    }

    pub fn empty(measure: IntensityMeasure) -> Self {
        PointConfiguration { measure, points: Vec::new() }
    }

    pub fn measure(&self) -> &IntensityMeasure {
        &self.measure
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    pub fn push_point(&mut self, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.dim());
        self.points.extend_from_slice(coords);
    }

    /// Copy of this configuration with extra points appended.
    pub fn with_extra(&self, extra: &[f64]) -> Result<Self> {
        if extra.len() % self.dim() != 0 {
            return Err(Error::config("extra point buffer length not a multiple of dim"));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(extra);
        Ok(PointConfiguration { measure: self.measure.clone(), points })
    }

    pub fn count_in(&self, region: &BoxRegion) -> usize {
        (0..self.len()).filter(|&i| region.contains(self.point(i))).count()
    }
}

/// Exact Poisson draw by chunked inversion: λ is split into pieces of at
/// most 500 (Poisson additivity) so `exp(-λ)` stays far from underflow,
/// and each piece is drawn by sequential-search inversion.
pub fn poisson_count(rng: &mut Pcg64, lambda: f64) -> u64 {
    debug_assert!(lambda >= 0.0 && lambda.is_finite());
    let mut remaining = lambda;
    let mut total = 0u64;
    while remaining > 0.0 {
        let piece = remaining.min(500.0);
        remaining -= piece;
        if piece <= 0.0 {
            break;
        }
        let u: f64 = rng.gen();
        let mut p = (-piece).exp();
        let mut cdf = p;
        let mut k = 0u64;
        // beyond mean + 40·sd + 64 the tail mass is far below 2^-53
        let cap = (piece + 40.0 * piece.sqrt() + 64.0) as u64;
        while u > cdf && k < cap {
            k += 1;
            p *= piece / k as f64;
            cdf += p;
        }
        total += k;
    }
    total
}

/// Draws one Poisson configuration: a Poisson(μ(E)) count, then i.i.d.
/// points from the normalized density. Deterministic given `seed`.
pub fn sample_poisson(measure: &IntensityMeasure, seed: u64) -> Result<PointConfiguration> {
    let mass = measure.total_mass();
    if mass > MAX_EXPECTED_POINTS {
        return Err(Error::cost_guard(format!(
            "sample_poisson: expected point count {mass:.3e} exceeds {MAX_EXPECTED_POINTS:.0e}"
        )));
    }
    if mass <= 0.0 {
        return Ok(PointConfiguration::empty(measure.clone()));
    }
    let mut rng = seeds::rng_for(seed, &[tag::POISSON]);
    let count = poisson_count(&mut rng, mass);
    let dim = measure.dim();
    let mut points = vec![0.0; count as usize * dim];
    for i in 0..count as usize {
        measure.sample_point(&mut rng, &mut points[i * dim..(i + 1) * dim]);
    }
    Ok(PointConfiguration { measure: measure.clone(), points })
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Evaluates the `i`-th U-statistic on a configuration: the sum of
/// `φ_i` over ordered `k_i`-tuples of distinct points, computed as
/// `k_i! ·` (sum over unordered subsets), which is valid because kernels
/// are symmetric.
pub fn eval_ustat(model: &UStatModel, i: usize, config: &PointConfiguration) -> Result<f64> {
    let kernel = model.kernel(i);
    let k = kernel.order();
    let n = config.len();
    if n < k {
        return Ok(0.0);
    }
    let tuples = binomial(n, k);
    if tuples > MAX_TUPLE_EVALS {
        return Err(Error::cost_guard(format!(
            "eval_ustat: C({n},{k}) = {tuples:.3e} kernel evaluations exceeds {MAX_TUPLE_EVALS:.0e}"
        )));
    }
    let dim = config.dim();
    let mut args = [0.0f64; MAX_KERNEL_ARGS];
    let width = k * dim;
    let mut sum = 0.0;
    // lexicographic combinations c[0] < c[1] < ... < c[k-1]
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        for (slot, &pi) in c.iter().enumerate() {
            args[slot * dim..(slot + 1) * dim].copy_from_slice(config.point(pi));
        }
        sum += kernel.eval(dim, &args[..width]);
        // advance
        let mut j = k;
        loop {
            if j == 0 {
                let total = factorial(k) * sum;
                if !total.is_finite() {
                    return Err(Error::non_finite("eval_ustat sum"));
                }
                return Ok(total);
            }
            j -= 1;
            if c[j] < n - (k - j) {
                c[j] += 1;
                for l in (j + 1)..k {
                    c[l] = c[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// A batch of replicated U-statistic samples: raw rows `F` and, once
/// normalized, rows `G = sqrt(C Σ⁻¹)(F − E[F])`.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub replicates: usize,
    pub dimension: usize,
    pub seed: u64,
    /// `R × d`, row-major.
    pub f: Vec<f64>,
    /// `R × d`, present after [`normalize`].
    pub g: Option<Vec<f64>>,
    /// Mean vector used for normalization.
    pub mean_used: Option<Vec<f64>>,
    /// Covariance used for normalization.
    pub sigma_used: Option<MatrixD>,
    /// The matrix `sqrt(C Σ⁻¹)` actually applied.
    pub normalizer: Option<MatrixD>,
}

impl SampleBatch {
    pub fn f_row(&self, r: usize) -> &[f64] {
        &self.f[r * self.dimension..(r + 1) * self.dimension]
    }

    pub fn g_rows(&self) -> Result<&[f64]> {
        self.g.as_deref().ok_or_else(|| Error::config("batch has no normalized rows"))
    }
}

/// Draws `replicates` independent configurations and fills the `F` matrix.
/// Sub-seeds are derived per replicate index, so the result is independent
/// of the parallel schedule.
pub fn replicate(model: &UStatModel, replicates: usize, seed: u64) -> Result<SampleBatch> {
    if replicates == 0 {
        return Err(Error::config("replicate: need at least one replicate"));
    }
    let d = model.dimension();
    let rows: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<f64>> {
            let sub = seeds::mix(seed, &[tag::REPLICATE, rep as u64]);
            let config = sample_poisson(model.measure(), sub)?;
            let mut row = Vec::with_capacity(d);
            for i in 0..d {
                row.push(eval_ustat(model, i, &config)?);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut f = Vec::with_capacity(replicates * d);
    for row in rows {
        f.extend_from_slice(&row);
    }
    Ok(SampleBatch {
        replicates,
        dimension: d,
        seed,
        f,
        g: None,
        mean_used: None,
        sigma_used: None,
        normalizer: None,
    })
}

/// Fills the normalized rows `G = sqrt(C Σ⁻¹)(F − E[F])`.
pub fn normalize(
    batch: &SampleBatch,
    e_f: &[f64],
    sigma: &MatrixD,
    c: &MatrixD,
) -> Result<SampleBatch> {
    let d = batch.dimension;
    if e_f.len() != d || sigma.dim() != d || c.dim() != d {
        return Err(Error::config("normalize: dimension mismatch"));
    }
    let normalizer = sqrt_similarity(c, sigma)?;
    let mut g = vec![0.0; batch.f.len()];
    let mut centered = vec![0.0; d];
    for r in 0..batch.replicates {
        let row = batch.f_row(r);
        for i in 0..d {
            centered[i] = row[i] - e_f[i];
        }
        let out = normalizer.matvec(&centered);
        g[r * d..(r + 1) * d].copy_from_slice(&out);
    }
    let mut b = batch.clone();
    b.g = Some(g);
    b.mean_used = Some(e_f.to_vec());
    b.sigma_used = Some(sigma.clone());
    b.normalizer = Some(normalizer);
    Ok(b)
}

/// Writes `replicate,F_1..F_d,G_1..G_d` rows; requires a normalized batch.
pub fn write_csv<W: Write>(batch: &SampleBatch, mut w: W) -> Result<()> {
    let g = batch.g_rows()?;
    let d = batch.dimension;
    let mut header = String::from("replicate");
    for i in 1..=d {
        header.push_str(&format!(",F_{i}"));
    }
    for i in 1..=d {
        header.push_str(&format!(",G_{i}"));
    }
    header.push('\n');
    w.write_all(header.as_bytes())?;
    for r in 0..batch.replicates {
        let mut line = r.to_string();
        for v in batch.f_row(r) {
            line.push_str(&format!(",{v}"));
        }
        for v in &g[r * d..(r + 1) * d] {
            line.push_str(&format!(",{v}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Sample mean and covariance of an `R × d` row-major matrix, with
/// delta-method standard errors for the covariance entries.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub cov: MatrixD,
    pub cov_se: MatrixD,
}

pub fn empirical_moments(rows: &[f64], replicates: usize, d: usize) -> Result<EmpiricalMoments> {
    if replicates < 2 || rows.len() != replicates * d {
        return Err(Error::config("empirical_moments: need R ≥ 2 consistent rows"));
    }
    let rf = replicates as f64;
    let mut mean = vec![0.0; d];
    for i in 0..d {
        let col: Vec<f64> = (0..replicates).map(|r| rows[r * d + i]).collect();
        mean[i] = pairwise_sum(&col) / rf;
    }
    let mut cov = MatrixD::zeros(d);
    let mut cov_se = MatrixD::zeros(d);
    let mut mean_se = vec![0.0; d];
    for i in 0..d {
        for j in i..d {
            let prods: Vec<f64> = (0..replicates)
                .map(|r| (rows[r * d + i] - mean[i]) * (rows[r * d + j] - mean[j]))
                .collect();
            let s = pairwise_sum(&prods) / (rf - 1.0);
            // spread of the products around s gives the SE of the estimate
            let sq: Vec<f64> = prods.iter().map(|p| (p - s) * (p - s)).collect();
            let var_of_prod = pairwise_sum(&sq) / (rf - 1.0);
            let se = (var_of_prod / rf).sqrt();
            cov.set(i, j, s);
            cov.set(j, i, s);
            cov_se.set(i, j, se);
            cov_se.set(j, i, se);
            if i == j {
                mean_se[i] = (s.max(0.0) / rf).sqrt();
            }
        }
    }
    Ok(EmpiricalMoments { mean, mean_se, cov, cov_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_model, BuiltinParams, GroundSpace, RadiusParam};

    fn uniform_measure(t: f64) -> IntensityMeasure {
        IntensityMeasure::uniform(GroundSpace::unit_box(2), t).unwrap()
    }

    #[test]
    fn zero_mass_gives_empty_configuration() {
        let m = uniform_measure(0.0);
        let c = sample_poisson(&m, 1).unwrap();
        assert_eq!(c.len(), 0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = uniform_measure(20.0);
        let a = sample_poisson(&m, 99).unwrap();
        let b = sample_poisson(&m, 99).unwrap();
        assert_eq!(a.points, b.points);
        let c = sample_poisson(&m, 100).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn poisson_law_mean_and_independence() {
        // mean matches over 1e4 draws, and counts in disjoint half-boxes
        // pass a χ² independence test at the 1% level
        let m = uniform_measure(50.0);
        let draws = 10_000usize;
        let left = BoxRegion::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let right = BoxRegion::new(vec![0.5, 0.0], vec![1.0, 1.0]).unwrap();
        let mut total = 0.0;
        // 2x2 contingency on (left ≥ 25, right ≥ 25)
        let mut table = [[0.0f64; 2]; 2];
        for rep in 0..draws {
            let c = sample_poisson(&m, seeds::mix(7, &[rep as u64])).unwrap();
            total += c.len() as f64;
            let l = (c.count_in(&left) >= 25) as usize;
            let r = (c.count_in(&right) >= 25) as usize;
            table[l][r] += 1.0;
        }
        let mean = total / draws as f64;
        let tol = 4.0 * (50.0f64 / draws as f64).sqrt();
        assert!((mean - 50.0).abs() < tol, "mean {mean} tol {tol}");

        let n = draws as f64;
        let row: Vec<f64> = (0..2).map(|i| table[i][0] + table[i][1]).collect();
        let col: Vec<f64> = (0..2).map(|j| table[0][j] + table[1][j]).collect();
        let mut chi2 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expect = row[i] * col[j] / n;
                chi2 += (table[i][j] - expect).powi(2) / expect;
            }
        }
        // χ²(1) 1% critical value
        assert!(chi2 < 6.635, "chi2 {chi2}");
    }

    #[test]
    fn poisson_count_small_means() {
        let mut rng = seeds::rng_for(3, &[tag::POISSON]);
        let n = 200_000;
        let lambda: f64 = 2.5;
        let mut sum = 0u64;
        let mut zero = 0u64;
        for _ in 0..n {
            let k = poisson_count(&mut rng, lambda);
            sum += k;
            zero += (k == 0) as u64;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - lambda).abs() < 4.0 * (lambda / n as f64).sqrt());
        let p0 = zero as f64 / n as f64;
        let expect = (-lambda).exp();
        assert!((p0 - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt());
    }

    #[test]
    fn eval_ustat_counts_pairs_and_points() {
        let params = BuiltinParams {
            t: Some(1.0),
            r: Some(RadiusParam::One(0.2)),
            ..Default::default()
        };
        let model = builtin_model("count-and-edges", &params).unwrap();
        // 3 points pairwise within r = 0.2
        let config = PointConfiguration::new(
            model.measure().clone(),
            vec![0.50, 0.50, 0.55, 0.50, 0.50, 0.55],
        )
        .unwrap();
        assert_eq!(eval_ustat(&model, 0, &config).unwrap(), 3.0); // φ ≡ 1, k=1 → count
        assert_eq!(eval_ustat(&model, 1, &config).unwrap(), 6.0); // 2! · 3 pairs
        // one point, k = 2 → no pairs
        let single =
            PointConfiguration::new(model.measure().clone(), vec![0.5, 0.5]).unwrap();
        assert_eq!(eval_ustat(&model, 1, &single).unwrap(), 0.0);
    }

    #[test]
    fn eval_ustat_order1_indicator() {
        let model = builtin_model("order1-pair", &BuiltinParams::with_t(1.0)).unwrap();
        // 5 points, 2 inside A = [0,0.5]²
        let config = PointConfiguration::new(
            model.measure().clone(),
            vec![0.1, 0.1, 0.4, 0.2, 0.6, 0.6, 0.9, 0.1, 0.7, 0.8],
        )
        .unwrap();
        assert_eq!(eval_ustat(&model, 0, &config).unwrap(), 2.0);
    }

    #[test]
    fn replicate_is_thread_count_invariant() {
        let params = BuiltinParams {
            t: Some(30.0),
            r: Some(RadiusParam::One(0.1)),
            ..Default::default()
        };
        let model = builtin_model("count-and-edges", &params).unwrap();
        let run = || replicate(&model, 200, 5).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = pool1.install(run);
        let b = pool8.install(run);
        assert_eq!(a.f, b.f);
    }

    #[test]
    fn replicate_mean_matches_poisson_oracle() {
        // order1-pair: E[F_1] = μ(A) = t/4
        let model = builtin_model("order1-pair", &BuiltinParams::with_t(10.0)).unwrap();
        let batch = replicate(&model, 100_000, 11).unwrap();
        let m = empirical_moments(&batch.f, batch.replicates, 2).unwrap();
        // Poisson variance = mean, so SE = sqrt(2.5/R)
        let se = (2.5f64 / batch.replicates as f64).sqrt();
        assert!((m.mean[0] - 2.5).abs() <= 4.0 * se, "mean {} ", m.mean[0]);
        assert!((m.mean[1] - 5.0).abs() <= 4.0 * (5.0f64 / 1e5).sqrt());
    }

    #[test]
    fn normalize_identity_case() {
        let model = builtin_model("order1-pair", &BuiltinParams::with_t(10.0)).unwrap();
        let batch = replicate(&model, 100, 3).unwrap();
        let sigma = MatrixD::diag(&[2.5, 5.0]);
        // Σ = C → G = F − E[F]
        let n = normalize(&batch, &[2.5, 5.0], &sigma, &sigma).unwrap();
        let g = n.g_rows().unwrap();
        for r in 0..batch.replicates {
            assert!((g[r * 2] - (batch.f_row(r)[0] - 2.5)).abs() < 1e-10);
            assert!((g[r * 2 + 1] - (batch.f_row(r)[1] - 5.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_round_trip_shape() {
        let model = builtin_model("order1-pair", &BuiltinParams::with_t(5.0)).unwrap();
        let batch = replicate(&model, 10, 3).unwrap();
        let sigma = MatrixD::diag(&[1.25, 2.5]);
        let batch = normalize(&batch, &[1.25, 2.5], &sigma, &MatrixD::identity(2)).unwrap();
        let mut buf = Vec::new();
        write_csv(&batch, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "replicate,F_1,F_2,G_1,G_2");
        assert_eq!(lines.count(), 10);
        // unnormalized batches cannot be exported
        let raw = replicate(&model, 5, 4).unwrap();
        assert!(write_csv(&raw, &mut Vec::new()).is_err());
    }

    #[test]
    fn cost_guard_trips_on_huge_mass() {
        let m = uniform_measure(2.0e7);
        assert!(matches!(sample_poisson(&m, 1), Err(Error::CostGuard(_))));
    }
}
