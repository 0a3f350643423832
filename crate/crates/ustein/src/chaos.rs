//! Chaos kernels of U-statistics, expectations, the covariance matrix Σ,
//! exact multiple integrals of simple functions, the partition moment
//! formula, and the iterated difference operator.
//!
//! The level-n chaos kernel of a U-statistic with kernel `φ` of order `k`
//! is `f^(n)(z_1..z_n) = C(k,n) ∫ φ(z_1..z_n, x_1..x_{k-n}) dμ^{k-n}`,
//! zero above level `k`. Covariances are assembled from the flat integral
//! form of the kernel inner products, so Monte Carlo estimates stay
//! unbiased (no nested estimators on the diagonal).

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, MatrixD};
use crate::model::{BoxRegion, IntensityMeasure, UStatModel, MAX_KERNEL_ARGS};
use crate::partitions::enumerate_pi;
use crate::quadrature::{integrate, IntegrationBudget, IntegrationResult};
use crate::seeds::{self, tag};
use crate::simulate::{binomial, eval_ustat, factorial, PointConfiguration};

/// Lazily evaluated level-`n` chaos kernel of one component, with a
/// point-keyed memo cache. Every evaluation integrates out the remaining
/// `k - n` arguments with a sub-stream derived from the point bits, so
/// repeated evaluation is deterministic.
pub struct KernelProjection<'m> {
    model: &'m UStatModel,
    component: usize,
    level: usize,
    budget: IntegrationBudget,
    seed: u64,
    cache: RwLock<HashMap<Vec<u64>, IntegrationResult>>,
}

/// Builds the level-`n` projection evaluator for component `i`.
pub fn kernel_projection<'m>(
    model: &'m UStatModel,
    i: usize,
    level: usize,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<KernelProjection<'m>> {
    if i >= model.dimension() {
        return Err(Error::config(format!("component {i} out of range")));
    }
    if level == 0 {
        return Err(Error::config("projection level must be ≥ 1"));
    }
    Ok(KernelProjection {
        model,
        component: i,
        level,
        budget: *budget,
        seed,
        cache: RwLock::new(HashMap::new()),
    })
}

impl KernelProjection<'_> {
    pub fn level(&self) -> usize {
        self.level
    }

    /// `C(k,n)` for this projection; 1 at the top level, 0 above it.
    pub fn prefactor(&self) -> f64 {
        binomial(self.model.order(self.component), self.level)
    }

    /// Evaluates `f^(n)` at `points` (n points, flattened). Returns the
    /// value and the standard error of its quadrature estimate.
    pub fn eval(&self, points: &[f64]) -> Result<(f64, f64)> {
        let dim = self.model.measure().dim();
        let k = self.model.order(self.component);
        let n = self.level;
        if points.len() != n * dim {
            return Err(Error::config(format!(
                "projection eval: expected {} coordinates, got {}",
                n * dim,
                points.len()
            )));
        }
        if n > k {
            return Ok((0.0, 0.0));
        }
        let kernel = self.model.kernel(self.component);
        if n == k {
            let v = kernel.eval(dim, points);
            if !v.is_finite() {
                return Err(Error::non_finite("kernel in projection"));
            }
            return Ok((v, 0.0));
        }
        let key = seeds::coord_words(points);
        if let Some(hit) = self.cache.read().expect("projection cache").get(&key) {
            return Ok((hit.value, hit.std_error));
        }
        let integrand = |tail: &[f64]| {
            let mut buf = [0.0f64; MAX_KERNEL_ARGS];
            buf[..n * dim].copy_from_slice(points);
            buf[n * dim..k * dim].copy_from_slice(tail);
            kernel.eval(dim, &buf[..k * dim])
        };
        let mut words = vec![tag::PROJECTION, self.component as u64, n as u64];
        words.extend_from_slice(&key);
        let sub_seed = seeds::mix(self.seed, &words);
        let raw = integrate(&integrand, self.model.measure(), k - n, &self.budget, sub_seed)?;
        let pref = binomial(k, n);
        let scaled = IntegrationResult {
            value: pref * raw.value,
            std_error: pref * raw.std_error,
            ..raw
        };
        self.cache.write().expect("projection cache").insert(key, scaled);
        Ok((scaled.value, scaled.std_error))
    }
}

/// `E[F_i] = ∫ φ_i dμ^{k_i}`.
pub fn expectation(
    model: &UStatModel,
    i: usize,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<IntegrationResult> {
    if i >= model.dimension() {
        return Err(Error::config(format!("component {i} out of range")));
    }
    let dim = model.measure().dim();
    let kernel = model.kernel(i);
    let f = |coords: &[f64]| kernel.eval(dim, coords);
    integrate(&f, model.measure(), kernel.order(), budget, seeds::mix(seed, &[tag::EXPECTATION, i as u64]))
}

/// Covariance matrix Σ with per-entry standard errors and an eigenvalue
/// health report.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub sigma: MatrixD,
    pub std_errors: MatrixD,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Set when `min λ ≤ 1e-10 · max λ`: fatal for bound assembly.
    pub singular: bool,
}

/// `Σ(i,j) = Σ_n n! C(k_i,n) C(k_j,n) ∫ [∫φ_i dμ^{k_i-n}][∫φ_j dμ^{k_j-n}] dμ^n`,
/// evaluated as one flat integral of arity `k_i + k_j − n` per level so the
/// Monte Carlo path is unbiased.
pub fn covariance(
    model: &UStatModel,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<CovarianceEstimate> {
    let d = model.dimension();
    let dim = model.measure().dim();
    let mut sigma = MatrixD::zeros(d);
    let mut errs = MatrixD::zeros(d);
    for i in 0..d {
        for j in i..d {
            let ki = model.order(i);
            let kj = model.order(j);
            let kernel_i = model.kernel(i);
            let kernel_j = model.kernel(j);
            let mut acc = 0.0;
            let mut var = 0.0;
            for n in 1..=ki.min(kj) {
                // layout: [z (n pts) | x (k_i - n pts) | x' (k_j - n pts)]
                let f = |coords: &[f64]| {
                    let phi_i = kernel_i.eval(dim, &coords[..ki * dim]);
                    let mut buf = [0.0f64; MAX_KERNEL_ARGS];
                    buf[..n * dim].copy_from_slice(&coords[..n * dim]);
                    buf[n * dim..kj * dim].copy_from_slice(&coords[ki * dim..(ki + kj - n) * dim]);
                    let phi_j = kernel_j.eval(dim, &buf[..kj * dim]);
                    phi_i * phi_j
                };
                let res = integrate(
                    &f,
                    model.measure(),
                    ki + kj - n,
                    budget,
                    seeds::mix(seed, &[tag::COVARIANCE, i as u64, j as u64, n as u64]),
                )?;
                let pref = factorial(n) * binomial(ki, n) * binomial(kj, n);
                acc += pref * res.value;
                var += (pref * res.std_error).powi(2);
            }
            sigma.set(i, j, acc);
            sigma.set(j, i, acc);
            errs.set(i, j, var.sqrt());
            errs.set(j, i, var.sqrt());
        }
    }
    let sigma = sigma.symmetrized();
    let (_, lambda) = jacobi_eigen(&sigma)?;
    let max_eigenvalue = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_eigenvalue = lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let singular = !(min_eigenvalue > 1e-10 * max_eigenvalue.max(0.0)) || max_eigenvalue <= 0.0;
    Ok(CovarianceEstimate { sigma, std_errors: errs, min_eigenvalue, max_eigenvalue, singular })
}

/// A simple function of order `n`: `Σ_k λ_k 1_{A_1^k × ... × A_n^k}` with
/// pairwise-disjoint boxes inside each term, so it vanishes on diagonals.
#[derive(Debug, Clone)]
pub struct SimpleFunctionSpec {
    order: usize,
    terms: Vec<(f64, Vec<BoxRegion>)>,
}

impl SimpleFunctionSpec {
    pub fn new(order: usize, terms: Vec<(f64, Vec<BoxRegion>)>) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("simple function order must be ≥ 1"));
        }
        for (_, boxes) in &terms {
            if boxes.len() != order {
                return Err(Error::config(format!(
                    "simple function term has {} boxes, expected {order}",
                    boxes.len()
                )));
            }
            for a in 0..boxes.len() {
                for b in (a + 1)..boxes.len() {
                    if boxes[a].intersect(&boxes[b]).is_some() {
                        return Err(Error::config(
                            "overlapping boxes within a term (must vanish on diagonals)",
                        ));
                    }
                }
            }
        }
        Ok(SimpleFunctionSpec { order, terms })
    }

    /// Order-1 indicator `1_A`.
    pub fn indicator(region: BoxRegion) -> Self {
        SimpleFunctionSpec { order: 1, terms: vec![(1.0, vec![region])] }
    }

    /// Symmetric order-2 product indicator `1_{A×B} + 1_{B×A}` (A, B disjoint).
    pub fn pair_indicator(a: BoxRegion, b: BoxRegion) -> Result<Self> {
        SimpleFunctionSpec::new(
            2,
            vec![(1.0, vec![a.clone(), b.clone()]), (1.0, vec![b, a])],
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn terms(&self) -> &[(f64, Vec<BoxRegion>)] {
        &self.terms
    }

    /// Full symmetrization `(1/n!) Σ_σ f ∘ σ`, as a new spec.
    pub fn symmetrized(&self) -> SimpleFunctionSpec {
        let n = self.order;
        let inv = 1.0 / factorial(n);
        let mut terms = Vec::new();
        for (coeff, boxes) in &self.terms {
            let mut perm: Vec<usize> = (0..n).collect();
            // Heap's algorithm
            let mut c = vec![0usize; n];
            let mut emit = |perm: &[usize]| {
                let permuted: Vec<BoxRegion> = perm.iter().map(|&p| boxes[p].clone()).collect();
                terms.push((coeff * inv, permuted));
            };
            emit(&perm);
            let mut i = 0;
            while i < n {
                if c[i] < i {
                    if i % 2 == 0 {
                        perm.swap(0, i);
                    } else {
                        perm.swap(c[i], i);
                    }
                    emit(&perm);
                    c[i] += 1;
                    i = 0;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
        }
        SimpleFunctionSpec { order: n, terms }
    }

    /// Exact `L²(μ^n)` inner product of two same-order specs by box
    /// intersection masses.
    pub fn inner_product(&self, other: &SimpleFunctionSpec, measure: &IntensityMeasure) -> Result<f64> {
        if self.order != other.order {
            return Err(Error::config("inner product requires equal orders"));
        }
        let mut total = 0.0;
        for (ca, boxes_a) in &self.terms {
            for (cb, boxes_b) in &other.terms {
                let mut mass = 1.0;
                for (a, b) in boxes_a.iter().zip(boxes_b) {
                    match a.intersect(b) {
                        None => {
                            mass = 0.0;
                            break;
                        }
                        Some(x) => mass *= measure.box_mass(&x),
                    }
                }
                total += ca * cb * mass;
            }
        }
        Ok(total)
    }

    /// Pointwise evaluation (on the given representation).
    pub fn eval(&self, dim: usize, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.order * dim);
        let mut acc = 0.0;
        'term: for (coeff, boxes) in &self.terms {
            for (j, b) in boxes.iter().enumerate() {
                if !b.contains(&args[j * dim..(j + 1) * dim]) {
                    continue 'term;
                }
            }
            acc += coeff;
        }
        acc
    }

    fn check_inside(&self, measure: &IntensityMeasure) -> Result<()> {
        let e = measure.space().bbox();
        for (_, boxes) in &self.terms {
            for b in boxes {
                if !e.contains_box(b) {
                    return Err(Error::config("simple function box outside the ground space"));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the multiple integral of a simple function on one
/// configuration: `I_n(f) = Σ_k λ_k ∏_j (N(A_j) − μ(A_j))`.
pub fn multiple_integral_simple(f: &SimpleFunctionSpec, config: &PointConfiguration) -> Result<f64> {
    f.check_inside(config.measure())?;
    let mut total = 0.0;
    for (coeff, boxes) in f.terms() {
        let mut prod = *coeff;
        for b in boxes {
            let n = config.count_in(b) as f64;
            let mass = config.measure().box_mass(b);
            prod *= n - mass;
        }
        total += prod;
    }
    Ok(total)
}

/// The partition moment formula for products of multiple integrals of
/// simple functions:
/// `E[∏_i I_{n_i}(f_i)] = Σ_{π∈Π} ∫ R^π(∏ f_i) dμ^{|π|}`,
/// where Π ranges over same-group-separated partitions with blocks of
/// size ≥ 2. Exact: each replaced integrand is a product of box
/// indicators, so its integral is a product of intersection masses.
pub fn moment_formula(factors: &[SimpleFunctionSpec], measure: &IntensityMeasure) -> Result<f64> {
    if factors.is_empty() {
        return Ok(1.0); // empty product
    }
    for f in factors {
        f.check_inside(measure)?;
    }
    let orders: Vec<usize> = factors.iter().map(|f| f.order()).collect();
    let parts = enumerate_pi(&orders);
    if factors.iter().any(|f| f.terms().is_empty()) {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for pi in &parts {
        // sum over one term choice per factor
        let mut combo = vec![0usize; factors.len()];
        loop {
            let mut coeff = 1.0;
            for (g, &ti) in combo.iter().enumerate() {
                coeff *= factors[g].terms()[ti].0;
            }
            let mut contribution = coeff;
            for block in pi.blocks() {
                let mut inter: Option<BoxRegion> = None;
                let mut empty = false;
                for label in block {
                    let b = &factors[label.group].terms()[combo[label.group]].1[label.index];
                    inter = match &inter {
                        None => Some(b.clone()),
                        Some(cur) => match cur.intersect(b) {
                            None => {
                                empty = true;
                                break;
                            }
                            Some(x) => Some(x),
                        },
                    };
                }
                if empty {
                    contribution = 0.0;
                    break;
                }
                contribution *= measure.box_mass(&inter.expect("non-empty block"));
            }
            total += contribution;
            // odometer over term choices
            let mut g = factors.len();
            loop {
                if g == 0 {
                    break;
                }
                g -= 1;
                combo[g] += 1;
                if combo[g] < factors[g].terms().len() {
                    break;
                }
                combo[g] = 0;
                if g == 0 {
                    g = usize::MAX;
                    break;
                }
            }
            if g == usize::MAX {
                break;
            }
        }
    }
    Ok(total)
}

/// Iterated difference operator by inclusion–exclusion:
/// `D_{z_1..z_n} F_i = Σ_{J ⊆ {1..n}} (−1)^{n−|J|} F_i(config + {z_j : j ∈ J})`,
/// with `2^n` full U-statistic re-evaluations.
pub fn iterated_difference(
    model: &UStatModel,
    i: usize,
    points: &[f64],
    config: &PointConfiguration,
) -> Result<f64> {
    let dim = model.measure().dim();
    if points.is_empty() || points.len() % dim != 0 {
        return Err(Error::config("iterated_difference: point buffer must hold n ≥ 1 points"));
    }
    let n = points.len() / dim;
    if n > 20 {
        return Err(Error::cost_guard(format!(
            "iterated_difference: n = {n} means 2^{n} U-statistic evaluations"
        )));
    }
    let mut total = 0.0;
    let mut extra = Vec::with_capacity(points.len());
    for mask in 0u32..(1 << n) {
        extra.clear();
        for j in 0..n {
            if (mask >> j) & 1 == 1 {
                extra.extend_from_slice(&points[j * dim..(j + 1) * dim]);
            }
        }
        let augmented = config.with_extra(&extra)?;
        let value = eval_ustat(model, i, &augmented)?;
        let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * value;
    }
    Ok(total)
}
