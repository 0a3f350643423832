//! The partition-sum M-terms and the assembled Gaussian-approximation
//! bound.
//!
//! Each M-term integrates a product of four kernel copies, with absolute
//! values, over shared, partitioned, and free outer variables against μ.
//! Two shared-variable wirings exist:
//!
//! - the *variance* terms `Mvar(i,j,n,m)` wire two shared variables so the
//!   four copies reproduce the expansion
//!   `E[⟨A,B⟩²] = ∫∫ E[A(z)B(z)A(y)B(y)] μ(dz) μ(dy)`
//!   (copies 1,2 carry `|φ_i|` at level n, copies 3,4 carry `|φ_j|` at
//!   level m); under the default `expansion` wiring z links copies (1,3)
//!   and y links (2,4), while the alternative `grouped` wiring links
//!   (1,2) and (3,4);
//! - the *fourth-moment* terms `M4(i,n)` wire one shared variable across
//!   all four copies of `|φ_i|`, matching
//!   `∫ E[I_{n-1}(f^(n)(z,·))⁴] μ(dz)`.
//!
//! A single wiring cannot serve both displayed inequalities (the variance
//! wiring yields exactly 0 at n = m = 1 while `∫ f⁴ dμ > 0`), so both
//! tables are computed; a `paper_literal` variant additionally reports the
//! single-table form that reuses the variance wiring in the first term.
//!
//! The admissible partitions are the connected family: the group graph
//! must link all four copies through partition blocks plus the fixed
//! shared-variable edges.
//!
//! The assembled bound on `Δ(sqrt(CΣ⁻¹)(F − E F), N(0, C))` is
//!
//! ```text
//! (√(2π)/8) d² k^{7/2} ‖√(CΣ⁻¹)‖³ ‖C⁻¹‖^{3/2} ‖C‖ (tr Σ)^{1/2} √(Σ_{i,n} M4(i,n))
//!   + k² ‖CΣ⁻¹‖_F ‖C⁻¹‖ ‖C‖^{1/2} √(Σ_{i,j,n,m} Mvar(i,j,n,m))
//! ```

use serde::{Deserialize, Serialize};

use crate::chaos::CovarianceEstimate;
use crate::error::{Error, Result};
use crate::linalg::{
    frobenius_norm, inverse_pd, jacobi_eigen, operator_norm, sqrt_similarity, trace, MatrixD,
};
use crate::model::{UStatModel, MAX_KERNEL_ARGS};
use crate::partitions::{build_wiring, enumerate_pi, filter_connected, WiringSpec};
use crate::quadrature::{integrate, IntegrationBudget};
use crate::seeds::{self, tag};
use crate::simulate::binomial;

/// Which copies share the outer variables in the variance terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WiringMode {
    /// z links copies (1,3), y links (2,4): the expectation-expansion pairing.
    #[default]
    Expansion,
    /// z links copies (1,2), y links (3,4): the alternative reading of the
    /// grouped variable listing.
    Grouped,
}

/// One M-term: value, Monte Carlo standard error (0 when every partition
/// integral ran on the tensor rule or the term is structurally zero), and
/// the number of admissible partitions it summed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MEntry {
    pub value: f64,
    pub std_error: f64,
    pub partitions: usize,
}

impl MEntry {
    fn zero() -> Self {
        MEntry { value: 0.0, std_error: 0.0, partitions: 0 }
    }
}

/// All M-terms of a model: `variance[i][j][n-1][m-1]` and `fourth[i][n-1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MTable {
    pub dimension: usize,
    pub k_max: usize,
    pub wiring: WiringMode,
    pub variance: Vec<Vec<Vec<Vec<MEntry>>>>,
    pub fourth: Vec<Vec<MEntry>>,
}

struct CopyLayout<'m> {
    model: &'m UStatModel,
    /// component index per copy
    kernels: [usize; 4],
    /// chaos level per copy
    levels: [usize; 4],
    spec: WiringSpec,
}

fn term_sum(
    layout: &CopyLayout<'_>,
    budget: &IntegrationBudget,
    seed_words: &[u64],
    seed: u64,
) -> Result<MEntry> {
    let model = layout.model;
    let dim = model.measure().dim();
    let parts = enumerate_pi(&layout.spec.group_sizes);
    let kept = filter_connected(&parts, &layout.spec.fixed_edges(), 4);
    if kept.is_empty() {
        return Ok(MEntry::zero());
    }
    let prefactor: f64 = (0..4)
        .map(|c| binomial(model.order(layout.kernels[c]), layout.levels[c]))
        .product();
    let mut value = 0.0;
    let mut var = 0.0;
    for (pidx, part) in kept.iter().enumerate() {
        let wiring = build_wiring(&layout.spec, part)?;
        let slot_map = &wiring.slot_map;
        let integrand = |coords: &[f64]| {
            let mut prod = 1.0;
            for c in 0..4 {
                let kernel = model.kernel(layout.kernels[c]);
                let mut args = [0.0f64; MAX_KERNEL_ARGS];
                for (s, &outer) in slot_map[c].iter().enumerate() {
                    args[s * dim..(s + 1) * dim]
                        .copy_from_slice(&coords[outer * dim..(outer + 1) * dim]);
                }
                prod *= kernel.eval(dim, &args[..slot_map[c].len() * dim]).abs();
                if prod == 0.0 {
                    return 0.0;
                }
            }
            prod
        };
        let mut words = seed_words.to_vec();
        words.push(pidx as u64);
        let res = integrate(
            &integrand,
            model.measure(),
            wiring.num_outer,
            budget,
            seeds::mix(seed, &words),
        )?;
        value += res.value;
        var += res.std_error * res.std_error;
    }
    Ok(MEntry {
        value: prefactor * value,
        std_error: prefactor * var.sqrt(),
        partitions: kept.len(),
    })
}

/// The variance-wired term `Mvar(i,j,n,m)`: exact 0 when `n > k_i`,
/// `m > k_j`, or no admissible partition connects the copies (in
/// particular at n = m = 1, where the inner product is deterministic).
pub fn m_term_variance(
    model: &UStatModel,
    i: usize,
    j: usize,
    n: usize,
    m: usize,
    wiring: WiringMode,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<MEntry> {
    let d = model.dimension();
    if i >= d || j >= d {
        return Err(Error::config("m_term_variance: component out of range"));
    }
    if n == 0 || m == 0 {
        return Err(Error::config("m_term_variance: levels start at 1"));
    }
    let ki = model.order(i);
    let kj = model.order(j);
    if n > ki || m > kj {
        return Ok(MEntry::zero());
    }
    let shared_slots = match wiring {
        WiringMode::Expansion => vec![vec![0], vec![1], vec![0], vec![1]],
        WiringMode::Grouped => vec![vec![0], vec![0], vec![1], vec![1]],
    };
    let layout = CopyLayout {
        model,
        kernels: [i, i, j, j],
        levels: [n, n, m, m],
        spec: WiringSpec {
            shared_slots,
            group_sizes: vec![n - 1, n - 1, m - 1, m - 1],
            free_counts: vec![ki - n, ki - n, kj - m, kj - m],
            num_shared: 2,
        },
    };
    term_sum(
        &layout,
        budget,
        &[tag::M_VARIANCE, i as u64, j as u64, n as u64, m as u64],
        seed,
    )
}

/// The fourth-moment term `M4(i,n)`: all four copies carry `|φ_i|` at
/// level `n` and share a single outer variable.
pub fn m_term_fourth(
    model: &UStatModel,
    i: usize,
    n: usize,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<MEntry> {
    if i >= model.dimension() {
        return Err(Error::config("m_term_fourth: component out of range"));
    }
    if n == 0 {
        return Err(Error::config("m_term_fourth: level starts at 1"));
    }
    let ki = model.order(i);
    if n > ki {
        return Ok(MEntry::zero());
    }
    let layout = CopyLayout {
        model,
        kernels: [i; 4],
        levels: [n; 4],
        spec: WiringSpec {
            shared_slots: vec![vec![0], vec![0], vec![0], vec![0]],
            group_sizes: vec![n - 1; 4],
            free_counts: vec![ki - n; 4],
            num_shared: 1,
        },
    };
    term_sum(&layout, budget, &[tag::M_FOURTH, i as u64, n as u64], seed)
}

/// Computes the full table for `n, m ≤ max k_i`.
pub fn build_m_table(
    model: &UStatModel,
    wiring: WiringMode,
    budget: &IntegrationBudget,
    seed: u64,
) -> Result<MTable> {
    let d = model.dimension();
    let k = model.max_order();
    let mut variance = vec![vec![vec![vec![MEntry::zero(); k]; k]; d]; d];
    let mut fourth = vec![vec![MEntry::zero(); k]; d];
    for i in 0..d {
        for j in 0..d {
            for n in 1..=k {
                for m in 1..=k {
                    variance[i][j][n - 1][m - 1] =
                        m_term_variance(model, i, j, n, m, wiring, budget, seed)?;
                }
            }
        }
        for n in 1..=k {
            fourth[i][n - 1] = m_term_fourth(model, i, n, budget, seed)?;
        }
    }
    Ok(MTable { dimension: d, k_max: k, wiring, variance, fourth })
}

/// The two bound terms with first-order error propagation through the
/// square roots (matrix norms enter as plug-in values).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundTerms {
    pub term1: f64,
    pub term1_std_error: f64,
    pub term2: f64,
    pub term2_std_error: f64,
    pub total: f64,
    pub total_std_error: f64,
}

/// Everything the bound report carries: Σ and its health, the target
/// C, the normalizer and its norms, the M-table, and the assembled terms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub dimension: usize,
    pub k_max: usize,
    pub sigma: MatrixD,
    pub sigma_std_errors: MatrixD,
    pub sigma_min_eigenvalue: f64,
    pub sigma_max_eigenvalue: f64,
    pub c: MatrixD,
    pub sqrt_c_sigma_inv: MatrixD,
    pub norm_c: f64,
    pub norm_c_inv: f64,
    pub norm_sqrt_c_sigma_inv: f64,
    pub frobenius_c_sigma_inv: f64,
    pub trace_sigma: f64,
    pub trace_sigma_std_error: f64,
    pub terms: BoundTerms,
    /// Single-table variant: the first term reuses the variance wiring's
    /// diagonal entries `Mvar(i,i,n,n)` instead of the fourth-moment table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_literal: Option<BoundTerms>,
    pub mtable: MTable,
    pub warnings: Vec<String>,
}

const SQRT_2PI: f64 = 2.506628274631000502415765284811;

fn assemble_terms(
    d: usize,
    k: usize,
    norm_r: f64,
    norm_c: f64,
    norm_c_inv: f64,
    frob: f64,
    tr: f64,
    tr_se: f64,
    s4: f64,
    s4_se: f64,
    s2: f64,
    s2_se: f64,
) -> BoundTerms {
    let kf = k as f64;
    let df = d as f64;
    let term1 = SQRT_2PI / 8.0
        * df.powi(2)
        * kf.powf(3.5)
        * norm_r.powi(3)
        * norm_c_inv.powf(1.5)
        * norm_c
        * tr.sqrt()
        * s4.sqrt();
    let rel1 = {
        let a = if s4 > 0.0 { 0.5 * s4_se / s4 } else { 0.0 };
        let b = if tr > 0.0 { 0.5 * tr_se / tr } else { 0.0 };
        (a * a + b * b).sqrt()
    };
    let term1_se = term1 * rel1;
    let term2 = kf.powi(2) * frob * norm_c_inv * norm_c.sqrt() * s2.sqrt();
    let term2_se = if s2 > 0.0 { term2 * 0.5 * s2_se / s2 } else { 0.0 };
    BoundTerms {
        term1,
        term1_std_error: term1_se,
        term2,
        term2_std_error: term2_se,
        total: term1 + term2,
        total_std_error: (term1_se * term1_se + term2_se * term2_se).sqrt(),
    }
}

/// Assembles the bound from the covariance estimate and the M-table.
/// Pure in its inputs: identical inputs give a byte-identical report.
pub fn assemble_bound(
    c: &MatrixD,
    cov: &CovarianceEstimate,
    mtable: &MTable,
    include_paper_literal: bool,
    warnings: Vec<String>,
) -> Result<BoundReport> {
    let d = c.dim();
    if cov.sigma.dim() != d || mtable.dimension != d {
        return Err(Error::config("assemble_bound: dimension mismatch"));
    }
    if cov.singular {
        return Err(Error::numerical(format!(
            "covariance numerically singular (min eigenvalue {:.3e}, max {:.3e})",
            cov.min_eigenvalue, cov.max_eigenvalue
        )));
    }
    let (_, c_lambda) = jacobi_eigen(c)?;
    if c_lambda.iter().any(|&l| l <= 0.0) {
        return Err(Error::numerical("target C is not positive definite"));
    }
    let k = mtable.k_max;
    let sigma = &cov.sigma;
    let r = sqrt_similarity(c, sigma)?;
    let c_inv = inverse_pd(c)?;
    let sigma_inv = inverse_pd(sigma)?;
    let norm_c = operator_norm(c);
    let norm_c_inv = operator_norm(&c_inv);
    let norm_r = operator_norm(&r);
    let frob = frobenius_norm(&c.matmul(&sigma_inv));
    let tr = trace(sigma);
    let tr_se = {
        let mut v = 0.0;
        for i in 0..d {
            v += cov.std_errors.get(i, i).powi(2);
        }
        v.sqrt()
    };

    let mut s4 = 0.0;
    let mut s4_var = 0.0;
    for row in &mtable.fourth {
        for e in row {
            s4 += e.value;
            s4_var += e.std_error * e.std_error;
        }
    }
    let mut s2 = 0.0;
    let mut s2_var = 0.0;
    for bi in &mtable.variance {
        for bj in bi {
            for bn in bj {
                for e in bn {
                    s2 += e.value;
                    s2_var += e.std_error * e.std_error;
                }
            }
        }
    }
    let terms = assemble_terms(
        d,
        k,
        norm_r,
        norm_c,
        norm_c_inv,
        frob,
        tr,
        tr_se,
        s4,
        s4_var.sqrt(),
        s2,
        s2_var.sqrt(),
    );
    let paper_literal = if include_paper_literal {
        let mut lit4 = 0.0;
        let mut lit4_var = 0.0;
        for i in 0..d {
            for n in 0..k {
                let e = &mtable.variance[i][i][n][n];
                lit4 += e.value;
                lit4_var += e.std_error * e.std_error;
            }
        }
        Some(assemble_terms(
            d,
            k,
            norm_r,
            norm_c,
            norm_c_inv,
            frob,
            tr,
            tr_se,
            lit4,
            lit4_var.sqrt(),
            s2,
            s2_var.sqrt(),
        ))
    } else {
        None
    };
    Ok(BoundReport {
        dimension: d,
        k_max: k,
        sigma: sigma.clone(),
        sigma_std_errors: cov.std_errors.clone(),
        sigma_min_eigenvalue: cov.min_eigenvalue,
        sigma_max_eigenvalue: cov.max_eigenvalue,
        c: c.clone(),
        sqrt_c_sigma_inv: r,
        norm_c,
        norm_c_inv,
        norm_sqrt_c_sigma_inv: norm_r,
        frobenius_c_sigma_inv: frob,
        trace_sigma: tr,
        trace_sigma_std_error: tr_se,
        terms,
        paper_literal,
        mtable: mtable.clone(),
        warnings,
    })
}
