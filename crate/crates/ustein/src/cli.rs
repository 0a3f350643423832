//! Configuration, orchestration, and reporting: the `bound`, `verify`,
//! `sweep`, and `selftest` pipelines behind the command-line tool.
//!
//! Every emitted JSON/CSV embeds the resolved config (seeds, budgets,
//! flags), which is sufficient to reproduce it bit-exactly: all pipelines
//! are deterministic given `(config, seed)` and independent of the thread
//! count.

use serde::{Deserialize, Serialize};

use crate::bounds::{assemble_bound, build_m_table, BoundReport, WiringMode};
use crate::chaos::{covariance, expectation};
use crate::distance::{
    default_dictionary, empirical_delta_lower, moment_diagnostics, DistanceReport,
    MomentDiagnostics,
};
use crate::error::{Error, Result};
use crate::linalg::MatrixD;
use crate::model::{builtin_model, BuiltinParams, GroundSpace, IntensityMeasure, Kernel,
    UStatModel, validate_symmetry};
use crate::quadrature::IntegrationBudget;
use crate::seeds::{self, tag};
use crate::simulate::{empirical_moments, normalize, replicate};

/// Root seed container (`seeds.root` in the JSON schema).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub root: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { root: 1 }
    }
}

/// Budget knobs (`budgets.*` in the JSON schema).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub nodes_per_dim: usize,
    pub mc_samples: usize,
    pub tensor_dim_cap: usize,
    pub replicates: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        let b = IntegrationBudget::default();
        Budgets {
            nodes_per_dim: b.nodes_per_dim,
            mc_samples: b.mc_samples,
            tensor_dim_cap: b.tensor_dim_cap,
            replicates: 10_000,
        }
    }
}

impl Budgets {
    pub fn integration(&self) -> IntegrationBudget {
        IntegrationBudget {
            nodes_per_dim: self.nodes_per_dim,
            mc_samples: self.mc_samples,
            tensor_dim_cap: self.tensor_dim_cap,
        }
    }

    fn validate(&self) -> Result<()> {
        self.integration().validate()?;
        if self.replicates == 0 {
            return Err(Error::config("budgets.replicates must be ≥ 1"));
        }
        Ok(())
    }
}

/// Behavior flags (`flags.*`).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Flags {
    pub wiring: WiringMode,
    pub paper_literal: bool,
}

/// Sweep schedule (`sweep.t`), strictly increasing, at least two values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutSpec {
    pub path: String,
}

/// One inline piecewise-constant kernel: `Σ_k λ_k ∏_j 1_{B_{k,j}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineKernelSpec {
    pub order: usize,
    pub terms: Vec<(f64, Vec<crate::model::BoxRegion>)>,
}

/// Model selector: a builtin by name, or an inline kernel table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub params: BuiltinParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<InlineKernelSpec>>,
}

/// The JSON config document.
///
/// Keys: `model.name`, `model.params.{t,r,A,B,D}`, `model.kernels`, `C`,
/// `seeds.root`, `budgets.{nodes_per_dim,mc_samples,tensor_dim_cap,replicates}`,
/// `sweep.t`, `flags.{wiring,paper_literal}`, `out.path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixD>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<OutSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.budgets.validate()?;
        Ok(cfg)
    }

    pub fn builtin(name: &str, params: BuiltinParams) -> Self {
        RunConfig {
            model: ModelSpec { name: Some(name.into()), params, kernels: None },
            c: None,
            seeds: Seeds::default(),
            budgets: Budgets::default(),
            sweep: None,
            flags: Flags::default(),
            out: None,
        }
    }
}

/// Builds and validates the model a config describes.
pub fn build_model(config: &RunConfig) -> Result<UStatModel> {
    let spec = &config.model;
    let model = match (&spec.name, &spec.kernels) {
        (Some(_), Some(_)) => {
            return Err(Error::config("model: give either a name or inline kernels, not both"))
        }
        (None, None) => return Err(Error::config("model: missing name (or inline kernels)")),
        (Some(name), None) => builtin_model(name, &spec.params)?,
        (None, Some(kernels)) => {
            let t = spec
                .params
                .t
                .ok_or_else(|| Error::config("inline model: params.t is required"))?;
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config(format!("intensity scale t must be > 0, got {t}")));
            }
            let dim = spec.params.dim.unwrap_or(2);
            let space = GroundSpace::unit_box(dim);
            let measure = IntensityMeasure::uniform(space.clone(), t)?;
            let mut built = Vec::with_capacity(kernels.len());
            for (i, k) in kernels.iter().enumerate() {
                let kernel = Kernel::box_sum(k.order, k.terms.clone())?;
                let report = validate_symmetry(&kernel, &space, 2000, 0x5e1f)?;
                if !report.pass {
                    return Err(Error::config(format!(
                        "inline kernel {i} is not symmetric (max deviation {:.3e})",
                        report.max_deviation
                    )));
                }
                built.push(kernel);
            }
            UStatModel::new("inline", measure, built, None)?
        }
    };
    match &config.c {
        None => Ok(model),
        Some(c) => model.with_target_c(c.clone()),
    }
}

/// `bound` output: the resolved config plus the report.
#[derive(Debug, Clone, Serialize)]
pub struct BoundOutput {
    pub config: RunConfig,
    pub report: BoundReport,
}

fn bound_pipeline(config: &RunConfig, model: &UStatModel) -> Result<BoundReport> {
    let budget = config.budgets.integration();
    let seed = config.seeds.root;
    let cov = covariance(model, &budget, seed)?;
    let mtable = build_m_table(model, config.flags.wiring, &budget, seed)?;
    assemble_bound(
        model.target_c(),
        &cov,
        &mtable,
        config.flags.paper_literal,
        model.warnings().to_vec(),
    )
}

/// Pipeline: covariance → M-table → assembled bound.
pub fn cmd_bound(config: &RunConfig) -> Result<BoundOutput> {
    let model = build_model(config)?;
    let report = bound_pipeline(config, &model)?;
    Ok(BoundOutput { config: config.clone(), report })
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub threshold: f64,
}

/// `verify` output: bound + empirical diagnostics + pass/fail checks.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub config: RunConfig,
    pub report: BoundReport,
    pub expectations: Vec<f64>,
    pub expectation_std_errors: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    pub empirical_cov: MatrixD,
    pub delta: DistanceReport,
    pub diagnostics: MomentDiagnostics,
    pub checks: Vec<VerifyCheck>,
    pub pass: bool,
}

/// Pipeline: replicate → normalize → distance lower bound + diagnostics,
/// then the two acceptance checks (bound domination, covariance match).
pub fn cmd_verify(config: &RunConfig) -> Result<VerifyOutput> {
    let model = build_model(config)?;
    let report = bound_pipeline(config, &model)?;
    let budget = config.budgets.integration();
    let seed = config.seeds.root;
    let d = model.dimension();

    let mut e_f = Vec::with_capacity(d);
    let mut e_se = Vec::with_capacity(d);
    for i in 0..d {
        let r = expectation(&model, i, &budget, seed)?;
        e_f.push(r.value);
        e_se.push(r.std_error);
    }
    let batch = replicate(&model, config.budgets.replicates, seed)?;
    let batch = normalize(&batch, &e_f, &report.sigma, model.target_c())?;
    let emp = empirical_moments(&batch.f, batch.replicates, d)?;
    let dict = default_dictionary(d, seeds::mix(seed, &[tag::DICTIONARY]));
    let delta = empirical_delta_lower(&batch, model.target_c(), &dict)?;
    let diagnostics = moment_diagnostics(&batch, model.target_c())?;

    let mut checks = Vec::new();
    // the dictionary maximum must stay below the assembled bound
    let combined =
        (report.terms.total_std_error.powi(2) + delta.argmax_std_error.powi(2)).sqrt();
    checks.push(VerifyCheck {
        name: "delta_lower_le_total".into(),
        pass: delta.lower_bound <= report.terms.total + 4.0 * combined,
        observed: delta.lower_bound,
        threshold: report.terms.total + 4.0 * combined,
    });
    // quadrature Σ must match the empirical covariance entrywise
    let mut worst_z = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let se = (emp.cov_se.get(i, j).powi(2) + report.sigma_std_errors.get(i, j).powi(2))
                .sqrt()
                .max(1e-12);
            let z = (emp.cov.get(i, j) - report.sigma.get(i, j)).abs() / se;
            worst_z = worst_z.max(z);
        }
    }
    checks.push(VerifyCheck {
        name: "covariance_match".into(),
        pass: worst_z <= 4.0,
        observed: worst_z,
        threshold: 4.0,
    });
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyOutput {
        config: config.clone(),
        report,
        expectations: e_f,
        expectation_std_errors: e_se,
        empirical_mean: emp.mean,
        empirical_cov: emp.cov,
        delta,
        diagnostics,
        checks,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
    pub delta_lower: f64,
    pub delta_se: f64,
    pub cov_err: f64,
    pub kurtosis_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub config: RunConfig,
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub csv: String,
}

/// One bound + verify pass per scheduled intensity; CSV ready to plot.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepOutput> {
    let schedule = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep: missing sweep.t schedule"))?
        .t
        .clone();
    if schedule.len() < 2 {
        return Err(Error::config("sweep: schedule needs at least two t values"));
    }
    if schedule.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("sweep: schedule must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(schedule.len());
    for &t in &schedule {
        let mut cfg_t = config.clone();
        cfg_t.model.params.t = Some(t);
        cfg_t.sweep = None;
        let verify = cmd_verify(&cfg_t)?;
        let kurt_max = verify
            .diagnostics
            .excess_kurtosis
            .iter()
            .map(|k| k.abs())
            .fold(0.0f64, f64::max);
        let mut cov_err = 0.0f64;
        for i in 0..verify.report.sigma.dim() {
            for j in 0..verify.report.sigma.dim() {
                cov_err = cov_err
                    .max((verify.empirical_cov.get(i, j) - verify.report.sigma.get(i, j)).abs());
            }
        }
        rows.push(SweepRow {
            t,
            term1: verify.report.terms.term1,
            term2: verify.report.terms.term2,
            total: verify.report.terms.total,
            delta_lower: verify.delta.lower_bound,
            delta_se: verify.delta.argmax_std_error,
            cov_err,
            kurtosis_max: kurt_max,
        });
    }
    let mut csv = String::from("t,term1,term2,total,delta_lower,delta_SE,cov_err,kurtosis_max\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.t, r.term1, r.term2, r.total, r.delta_lower, r.delta_se, r.cov_err, r.kurtosis_max
        ));
    }
    Ok(SweepOutput { config: config.clone(), rows, csv })
}

/// Fault-injection hooks for `selftest --mutate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelftestMutation {
    /// Corrupts the partition admissibility predicate (drops the
    /// block-size ≥ 2 constraint); the oracle comparison must catch it.
    PartitionPredicate,
}

impl SelftestMutation {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "partition-predicate" => Ok(SelftestMutation::PartitionPredicate),
            other => Err(Error::config(format!("unknown mutation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestOutput {
    pub seed: u64,
    pub checks: Vec<validation::CheckResult>,
    pub pass: bool,
}

pub fn selftest_names() -> Vec<&'static str> {
    vec![
        "partition-enumeration",
        "partition-connectivity",
        "linalg",
        "closed-form-bound",
        "orthogonality",
        "moment-formula",
        "kernel-consistency",
        "domination",
    ]
}

/// Runs the invariant suite at reduced budgets (a few seconds in release
/// builds). `mutate` injects a deliberate fault to prove the oracles bite.
pub fn cmd_selftest(seed: u64, mutate: Option<SelftestMutation>) -> SelftestOutput {
    use validation::*;
    let mutated = mutate == Some(SelftestMutation::PartitionPredicate);
    let checks = vec![
        check_partition_enumeration(mutated),
        check_partition_connectivity(),
        check_linalg(20, seed),
        check_closed_form_bound(),
        check_orthogonality(20_000, 6.0, seed),
        check_moment_formula(20_000, 6.0, seed),
        check_kernel_consistency(5, 10_000, 200_000, 6.0, seed),
        check_domination(30.0, [0.20, 0.30], 3_000, 16, 400_000, 6.0, seed),
    ];
    let pass = checks.iter().all(|c| c.pass);
    SelftestOutput { seed, checks, pass }
}

/// The invariant checks behind `selftest`, parameterized by budget so the
/// acceptance suite can run the same logic at full scale.
pub mod validation {
    use super::*;
    use crate::bounds::{m_term_fourth, m_term_variance};
    use crate::chaos::{
        kernel_projection, moment_formula, multiple_integral_simple, SimpleFunctionSpec,
    };
    use crate::linalg::{inverse_pd, jacobi_eigen, operator_norm, sqrt_pd, sqrt_similarity, trace};
    use crate::model::{disk_box_clipped_area, BoxRegion, KernelBody};
    use crate::partitions::{
        enumerate_pi, enumerate_with_min_block, filter_connected, is_connected, Partition,
        VarLabel,
    };
    use crate::simulate::{sample_poisson, PointConfiguration};
    use rand::Rng;

    #[derive(Debug, Clone, Serialize)]
    pub struct CheckResult {
        pub name: String,
        pub pass: bool,
        pub detail: String,
    }

    impl CheckResult {
        fn new(name: &str, pass: bool, detail: String) -> Self {
            CheckResult { name: name.into(), pass, detail }
        }
    }

    fn brute_force_pi(group_sizes: &[usize]) -> Vec<Partition> {
        let mut labels = Vec::new();
        for (group, &size) in group_sizes.iter().enumerate() {
            for index in 0..size {
                labels.push(VarLabel { group, index });
            }
        }
        let n = labels.len();
        if n == 0 {
            return vec![Partition::from_blocks(vec![])];
        }
        let mut out = Vec::new();
        let mut assign = vec![0usize; n];
        fn rec(
            i: usize,
            max_used: usize,
            assign: &mut Vec<usize>,
            labels: &[VarLabel],
            out: &mut Vec<Partition>,
        ) {
            if i == labels.len() {
                let mut blocks = vec![Vec::new(); max_used];
                for (idx, &b) in assign.iter().enumerate() {
                    blocks[b].push(labels[idx]);
                }
                out.push(Partition::from_blocks(blocks));
                return;
            }
            for b in 0..=max_used {
                assign[i] = b;
                rec(i + 1, max_used.max(b + 1), assign, labels, out);
            }
        }
        rec(0, 0, &mut assign, &labels, &mut out);
        out.into_iter()
            .filter(|p| {
                p.blocks().iter().all(|b| {
                    b.len() >= 2 && {
                        let mut groups: Vec<usize> = b.iter().map(|l| l.group).collect();
                        groups.sort_unstable();
                        groups.windows(2).all(|w| w[0] != w[1])
                    }
                })
            })
            .collect()
    }

    /// Counts and brute-force oracle equivalence over group sizes ≤ (2,2,2,2).
    pub fn check_partition_enumeration(mutated: bool) -> CheckResult {
        let name = "partition-enumeration";
        let enumerate = |sizes: &[usize]| {
            if mutated {
                enumerate_with_min_block(sizes, 1)
            } else {
                enumerate_pi(sizes)
            }
        };
        let counts =
            [(vec![1, 1, 1, 1], 4usize), (vec![2, 2], 2), (vec![1, 1], 1), (vec![], 1)];
        for (sizes, expect) in &counts {
            let got = enumerate(sizes).len();
            if got != *expect {
                return CheckResult::new(
                    name,
                    false,
                    format!("count for {sizes:?}: got {got}, expected {expect}"),
                );
            }
        }
        for a in 0..=2usize {
            for b in 0..=2usize {
                for c in 0..=2usize {
                    for d in 0..=2usize {
                        let sizes = [a, b, c, d];
                        let mut fast = enumerate(&sizes);
                        let mut slow = brute_force_pi(&sizes);
                        let key = |p: &Partition| format!("{p:?}");
                        fast.sort_by_key(key);
                        slow.sort_by_key(key);
                        if fast != slow {
                            return CheckResult::new(
                                name,
                                false,
                                format!(
                                    "oracle mismatch at {sizes:?}: {} enumerated vs {} brute force",
                                    fast.len(),
                                    slow.len()
                                ),
                            );
                        }
                    }
                }
            }
        }
        CheckResult::new(name, true, "counts and brute-force oracle agree".into())
    }

    /// Graph connectivity vs the literal all-bipartitions predicate.
    pub fn check_partition_connectivity() -> CheckResult {
        let name = "partition-connectivity";
        let fixed_sets: [&[(usize, usize)]; 4] =
            [&[], &[(0, 2), (1, 3)], &[(0, 1), (2, 3)], &[(0, 1), (0, 2), (0, 3)]];
        let bipartition = |p: &Partition, fixed: &[(usize, usize)]| -> bool {
            let mut edges: Vec<(usize, usize)> = fixed.to_vec();
            for block in p.blocks() {
                for i in 0..block.len() {
                    for j in (i + 1)..block.len() {
                        edges.push((block[i].group, block[j].group));
                    }
                }
            }
            for mask in 0u32..8 {
                let in_m1 = |v: usize| v == 0 || (mask >> (v - 1)) & 1 == 1;
                if (0..4).all(in_m1) {
                    continue;
                }
                if !edges.iter().any(|&(a, b)| in_m1(a) != in_m1(b)) {
                    return false;
                }
            }
            true
        };
        for a in 0..=2usize {
            for b in 0..=2usize {
                for c in 0..=2usize {
                    for d in 0..=2usize {
                        let sizes = [a, b, c, d];
                        for p in enumerate_pi(&sizes) {
                            for fixed in fixed_sets {
                                if is_connected(&p, fixed, 4) != bipartition(&p, fixed) {
                                    return CheckResult::new(
                                        name,
                                        false,
                                        format!("mismatch at {sizes:?}, fixed {fixed:?}"),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        // spot check the filtered family size used by the variance wiring
        let kept = filter_connected(&enumerate_pi(&[1, 1, 1, 1]), &[(0, 2), (1, 3)], 4);
        if kept.len() != 3 {
            return CheckResult::new(name, false, format!("expected 3 kept, got {}", kept.len()));
        }
        CheckResult::new(name, true, "connectivity equals the bipartition predicate".into())
    }

    /// Random SPD properties: sqrt, inverse, operator norm, similarity
    /// root, trace inequality.
    pub fn check_linalg(matrices: usize, seed: u64) -> CheckResult {
        let name = "linalg";
        let mut rng = seeds::rng_for(seed, &[tag::SELFTEST, 0x11]);
        for case in 0..matrices {
            let dim = 2 + case % 5;
            let mut make = |shift: f64| {
                let mut m = MatrixD::zeros(dim);
                for i in 0..dim {
                    for j in 0..dim {
                        m.set(i, j, rng.gen_range(-1.0..1.0));
                    }
                }
                let mut a = m.transpose().matmul(&m).scale(1.0 / dim as f64);
                for i in 0..dim {
                    a.set(i, i, a.get(i, i) + shift);
                }
                a.symmetrized()
            };
            let a = make(0.1);
            let b = make(0.1);
            let s = match sqrt_pd(&a) {
                Ok(s) => s,
                Err(e) => return CheckResult::new(name, false, format!("sqrt_pd: {e}")),
            };
            if s.matmul(&s).sub(&a).max_abs() > 1e-8 {
                return CheckResult::new(name, false, format!("sqrt_pd² mismatch at case {case}"));
            }
            let inv = inverse_pd(&a).expect("pd");
            if inv.matmul(&a).sub(&MatrixD::identity(dim)).max_abs() > 1e-8 {
                return CheckResult::new(name, false, format!("inverse mismatch at case {case}"));
            }
            let (_, lambda) = jacobi_eigen(&a).expect("symmetric");
            let lmax = lambda.iter().cloned().fold(0.0f64, f64::max);
            if (operator_norm(&a) - lmax).abs() > 1e-8 {
                return CheckResult::new(name, false, format!("operator norm at case {case}"));
            }
            let r = match sqrt_similarity(&a, &b) {
                Ok(r) => r,
                Err(e) => return CheckResult::new(name, false, format!("similarity: {e}")),
            };
            let prod = a.matmul(&inverse_pd(&b).expect("pd"));
            if r.matmul(&r).sub(&prod).max_abs() > 1e-8 {
                return CheckResult::new(name, false, format!("similarity² at case {case}"));
            }
            if trace(&a.matmul(&b)) > trace(&a) * trace(&b) + 1e-12 {
                return CheckResult::new(name, false, format!("trace inequality at case {case}"));
            }
        }
        CheckResult::new(name, true, format!("{matrices} seeded SPD matrices within 1e-8"))
    }

    /// Equal-mass order1-pair: term2 = 0 and total = √(2π)·s^{-1/2}.
    pub fn check_closed_form_bound() -> CheckResult {
        let name = "closed-form-bound";
        let run = |t: f64| -> Result<f64> {
            let params = BuiltinParams {
                t: Some(t),
                b: Some(BoxRegion::new(vec![0.5, 0.0], vec![1.0, 0.5])?),
                ..Default::default()
            };
            let config = RunConfig::builtin("order1-pair", params);
            let out = cmd_bound(&config)?;
            if out.report.terms.term2 != 0.0 {
                return Err(Error::numerical("term2 should vanish for order-1 kernels"));
            }
            Ok(out.report.terms.total)
        };
        match (run(10.0), run(20.0)) {
            (Ok(total10), Ok(total20)) => {
                let closed = (2.0 * std::f64::consts::PI).sqrt() / 2.5f64.sqrt();
                let rel = (total10 - closed).abs() / closed;
                let ratio = (total20 / total10 - 0.5f64.sqrt()).abs();
                let pass = rel <= 1e-6 && ratio <= 1e-9;
                CheckResult::new(
                    name,
                    pass,
                    format!("total {total10:.9} vs closed form {closed:.9} (rel {rel:.2e}), t-doubling ratio error {ratio:.2e}"),
                )
            }
            (Err(e), _) | (_, Err(e)) => CheckResult::new(name, false, format!("{e}")),
        }
    }

    /// Orthogonality of multiple integrals over simulated configurations:
    /// `|Ê[I_n(f) I_m(g)] − δ_{n,m} n! ⟨f,g⟩| ≤ k·SE` and `|Ê[I_n(f)]| ≤ k·SE`.
    pub fn check_orthogonality(configs: usize, sigmas: f64, seed: u64) -> CheckResult {
        let name = "orthogonality";
        let measure = IntensityMeasure::uniform(GroundSpace::unit_box(2), 10.0)
            .expect("unit measure");
        let a1 = BoxRegion::new(vec![0.0, 0.0], vec![0.6, 1.0]).expect("box");
        let b1 = BoxRegion::new(vec![0.4, 0.0], vec![1.0, 1.0]).expect("box");
        let f1 = SimpleFunctionSpec::indicator(a1);
        let g1 = SimpleFunctionSpec::indicator(b1);
        let a2 = BoxRegion::new(vec![0.0, 0.0], vec![0.45, 1.0]).expect("box");
        let b2 = BoxRegion::new(vec![0.55, 0.0], vec![1.0, 1.0]).expect("box");
        let f2 = SimpleFunctionSpec::pair_indicator(a2, b2).expect("disjoint");
        let a3 = BoxRegion::new(vec![0.0, 0.0], vec![1.0, 0.45]).expect("box");
        let b3 = BoxRegion::new(vec![0.0, 0.55], vec![1.0, 1.0]).expect("box");
        let g2 = SimpleFunctionSpec::pair_indicator(a3, b3).expect("disjoint");
        let specs = [("f1", &f1), ("g1", &g1), ("f2", &f2), ("g2", &g2)];
        let orders = [1usize, 1, 2, 2];

        let mut sums = vec![(0.0f64, 0.0f64); specs.len()];
        let mut pair_sums = vec![(0.0f64, 0.0f64); specs.len() * specs.len()];
        let mut values = vec![0.0f64; specs.len()];
        for rep in 0..configs {
            let config = sample_poisson(&measure, seeds::mix(seed, &[tag::SELFTEST, 1, rep as u64]))
                .expect("sampling");
            for (s, (_, spec)) in specs.iter().enumerate() {
                values[s] = multiple_integral_simple(spec, &config).expect("simple integral");
                sums[s].0 += values[s];
                sums[s].1 += values[s] * values[s];
            }
            for s in 0..specs.len() {
                for u in 0..specs.len() {
                    let v = values[s] * values[u];
                    pair_sums[s * specs.len() + u].0 += v;
                    pair_sums[s * specs.len() + u].1 += v * v;
                }
            }
        }
        let n = configs as f64;
        let stats = |acc: (f64, f64)| {
            let mean = acc.0 / n;
            let var = ((acc.1 - n * mean * mean) / (n - 1.0)).max(0.0);
            (mean, (var / n).sqrt())
        };
        let mut worst: (f64, String) = (0.0, String::new());
        for (s, (label, _)) in specs.iter().enumerate() {
            let (mean, se) = stats(sums[s]);
            let z = mean.abs() / se.max(1e-12);
            if z > worst.0 {
                worst = (z, format!("E[I({label})] = {mean:.4} (SE {se:.4})"));
            }
        }
        for (s, (label_s, spec_s)) in specs.iter().enumerate() {
            for (u, (label_u, spec_u)) in specs.iter().enumerate() {
                let (mean, se) = stats(pair_sums[s * specs.len() + u]);
                let expect = if orders[s] == orders[u] {
                    let fs = spec_s.symmetrized();
                    let fu = spec_u.symmetrized();
                    crate::simulate::factorial(orders[s])
                        * fs.inner_product(&fu, &measure).expect("inner product")
                } else {
                    0.0
                };
                let z = (mean - expect).abs() / se.max(1e-12);
                if z > worst.0 {
                    worst = (
                        z,
                        format!(
                            "E[I({label_s})I({label_u})] = {mean:.4} vs {expect:.4} (SE {se:.4})"
                        ),
                    );
                }
            }
        }
        CheckResult::new(
            name,
            worst.0 <= sigmas,
            format!("worst z = {:.2} ({}), tolerance {sigmas}", worst.0, worst.1),
        )
    }

    /// Exact four-factor moment formula plus its Monte Carlo shadow.
    pub fn check_moment_formula(configs: usize, sigmas: f64, seed: u64) -> CheckResult {
        let name = "moment-formula";
        let measure = IntensityMeasure::uniform(GroundSpace::unit_box(2), 10.0)
            .expect("unit measure");
        let a = BoxRegion::new(vec![0.0, 0.0], vec![0.5, 0.5]).expect("box");
        let f = SimpleFunctionSpec::indicator(a);
        let mu = 2.5f64;
        let formula =
            moment_formula(&[f.clone(), f.clone(), f.clone(), f.clone()], &measure)
                .expect("formula");
        let closed = mu + 3.0 * mu * mu;
        if (formula - closed).abs() > 1e-12 {
            return CheckResult::new(
                name,
                false,
                format!("formula {formula} != closed form {closed}"),
            );
        }
        let mut acc = (0.0f64, 0.0f64);
        for rep in 0..configs {
            let config = sample_poisson(&measure, seeds::mix(seed, &[tag::SELFTEST, 2, rep as u64]))
                .expect("sampling");
            let v = multiple_integral_simple(&f, &config).expect("simple").powi(4);
            acc.0 += v;
            acc.1 += v * v;
        }
        let n = configs as f64;
        let mean = acc.0 / n;
        let se = ((((acc.1 - n * mean * mean) / (n - 1.0)).max(0.0)) / n).sqrt();
        let z = (mean - formula).abs() / se.max(1e-12);
        CheckResult::new(
            name,
            z <= sigmas,
            format!("E[I_1(1_A)^4]: formula {formula:.4}, MC {mean:.4} ± {se:.4} (z = {z:.2})"),
        )
    }

    /// Difference-operator vs chaos-kernel consistency on the two-radii
    /// model at t = 50, r = (0.10, 0.15): the MC mean of `D_zF_1` matches
    /// the level-1 projection, the top-level projection is the kernel
    /// itself, and the interior closed form `2tπr²` is recovered.
    pub fn check_kernel_consistency(
        n_points: usize,
        draws: usize,
        projection_samples: usize,
        sigmas: f64,
        seed: u64,
    ) -> CheckResult {
        let name = "kernel-consistency";
        let t = 50.0;
        let r = 0.10f64;
        let params = BuiltinParams {
            t: Some(t),
            r: Some(crate::model::RadiusParam::Two([r, 0.15])),
            ..Default::default()
        };
        let model = builtin_model("two-radii-edges", &params).expect("builtin");
        let budget = IntegrationBudget::default().force_mc().with_mc_samples(projection_samples);
        let proj1 = kernel_projection(&model, 0, 1, &budget, seed).expect("projection");
        let proj2 = kernel_projection(&model, 0, 2, &budget, seed).expect("projection");

        // top level: evaluator is the kernel itself, exactly
        let probe = [0.5, 0.5, 0.55, 0.5];
        let (v, se) = proj2.eval(&probe).expect("eval");
        if (v, se) != (1.0, 0.0) {
            return CheckResult::new(name, false, "top-level projection is not the kernel".into());
        }

        // interior points: closed-form disk target and simulated D_zF
        let mut rng = seeds::rng_for(seed, &[tag::SELFTEST, 3]);
        let mut worst: (f64, String) = (0.0, String::new());
        let closed = 2.0 * t * std::f64::consts::PI * r * r;
        // reuse one batch of configurations for every probe point
        let configs: Vec<PointConfiguration> = (0..draws)
            .map(|rep| {
                sample_poisson(
                    model.measure(),
                    seeds::mix(seed, &[tag::SELFTEST, 4, rep as u64]),
                )
                .expect("sampling")
            })
            .collect();
        for _ in 0..n_points {
            let z = [rng.gen_range(r..1.0 - r), rng.gen_range(r..1.0 - r)];
            let (f1, f1_se) = proj1.eval(&z).expect("projection eval");
            let mut acc = (0.0f64, 0.0f64);
            for config in &configs {
                // D_zF for an order-2 kernel: 2 Σ_x φ(z, x)
                let mut dz = 0.0;
                for p in 0..config.len() {
                    let q = config.point(p);
                    let dx = z[0] - q[0];
                    let dy = z[1] - q[1];
                    if dx * dx + dy * dy <= r * r {
                        dz += 2.0;
                    }
                }
                acc.0 += dz;
                acc.1 += dz * dz;
            }
            let n = draws as f64;
            let mean = acc.0 / n;
            let mc_se = ((((acc.1 - n * mean * mean) / (n - 1.0)).max(0.0)) / n).sqrt();
            let combined = (mc_se * mc_se + f1_se * f1_se).sqrt().max(1e-12);
            let z_mc = (mean - f1).abs() / combined;
            if z_mc > worst.0 {
                worst = (z_mc, format!("E[D_zF] = {mean:.4} vs f1(z) = {f1:.4} at z = {z:?}"));
            }
            let combined_closed = f1_se.max(1e-12);
            let z_closed = (f1 - closed).abs() / combined_closed;
            if z_closed > worst.0 {
                worst = (z_closed, format!("f1(z) = {f1:.4} vs 2tπr² = {closed:.4}"));
            }
        }
        CheckResult::new(
            name,
            worst.0 <= sigmas,
            format!("worst z = {:.2} ({}), tolerance {sigmas}", worst.0, worst.1),
        )
    }

    /// Closed-form level-1 kernel of component `i` at `z`, for the models
    /// the domination oracle supports (orders ≤ 2, distance indicators).
    fn f1_exact(model: &UStatModel, i: usize, z: &[f64]) -> Result<f64> {
        let kernel = model.kernel(i);
        let dim = model.measure().dim();
        match kernel.order() {
            1 => Ok(kernel.eval(dim, z)),
            2 => match kernel.body() {
                KernelBody::DistIndicator { radius } => Ok(2.0
                    * model.measure().scale()
                    * disk_box_clipped_area(z, *radius, model.measure().space().bbox())),
                _ => Err(Error::config(
                    "domination oracle supports order-2 distance indicators only",
                )),
            },
            _ => Err(Error::config("domination oracle supports orders ≤ 2 only")),
        }
    }

    /// `I_{n-1}(f_i^{(n)}(z,·))` evaluated on a configuration, via the
    /// order-2 chaos identity `I_1(f^(2)(z,·)) = (D_zF − f^(1)(z)) / 2`.
    fn chaos_factor(
        model: &UStatModel,
        i: usize,
        level: usize,
        z: &[f64],
        config: &PointConfiguration,
    ) -> Result<f64> {
        let kernel = model.kernel(i);
        let dim = model.measure().dim();
        let k = kernel.order();
        if level > k {
            return Ok(0.0);
        }
        match level {
            1 => f1_exact(model, i, z), // I_0(f^(1)(z)) is deterministic
            2 => {
                // Σ_x φ(z, x) − f^(1)(z)/2
                let mut s = 0.0;
                let mut args = vec![0.0; 2 * dim];
                args[..dim].copy_from_slice(z);
                for p in 0..config.len() {
                    args[dim..].copy_from_slice(config.point(p));
                    s += kernel.eval(dim, &args);
                }
                Ok(s - 0.5 * f1_exact(model, i, z)?)
            }
            _ => Err(Error::config("domination oracle supports levels ≤ 2 only")),
        }
    }

    /// M-term domination on the two-radii model: every variance and
    /// fourth-moment term must dominate its simulation-oracle left side
    /// minus `sigmas` combined standard errors.
    #[allow(clippy::too_many_arguments)]
    pub fn check_domination(
        t: f64,
        radii: [f64; 2],
        oracle_configs: usize,
        grid_nodes: usize,
        mc_samples: usize,
        sigmas: f64,
        seed: u64,
    ) -> CheckResult {
        let name = "domination";
        match domination_report(t, radii, oracle_configs, grid_nodes, mc_samples, sigmas, seed) {
            Err(e) => CheckResult::new(name, false, format!("{e}")),
            Ok(rows) => {
                let worst = rows
                    .iter()
                    .min_by(|a, b| a.margin_sigmas.partial_cmp(&b.margin_sigmas).unwrap())
                    .expect("non-empty");
                let pass = rows.iter().all(|r| r.pass);
                CheckResult::new(
                    name,
                    pass,
                    format!(
                        "{} terms; worst margin {:.2}σ at {} (bound {:.4} vs oracle {:.4})",
                        rows.len(),
                        worst.margin_sigmas,
                        worst.label,
                        worst.bound,
                        worst.oracle
                    ),
                )
            }
        }
    }

    /// One domination comparison row.
    #[derive(Debug, Clone, Serialize)]
    pub struct DominationRow {
        pub label: String,
        pub bound: f64,
        pub bound_se: f64,
        pub oracle: f64,
        pub oracle_se: f64,
        /// `(bound − oracle) / combined SE`; pass when ≥ −sigmas.
        pub margin_sigmas: f64,
        pub pass: bool,
    }

    /// Computes every `n, m ≤ 2` M-term of the two-radii model next to its
    /// simulation oracle.
    #[allow(clippy::too_many_arguments)]
    pub fn domination_report(
        t: f64,
        radii: [f64; 2],
        oracle_configs: usize,
        grid_nodes: usize,
        mc_samples: usize,
        sigmas: f64,
        seed: u64,
    ) -> Result<Vec<DominationRow>> {
        let params = BuiltinParams {
            t: Some(t),
            r: Some(crate::model::RadiusParam::Two(radii)),
            ..Default::default()
        };
        let model = builtin_model("two-radii-edges", &params)?;
        let d = model.dimension();
        let budget = IntegrationBudget::default().force_mc().with_mc_samples(mc_samples);

        // simulate the oracle factors on a midpoint z-grid
        let n_grid = grid_nodes * grid_nodes;
        let cell = 1.0 / (n_grid as f64);
        let grid: Vec<[f64; 2]> = (0..grid_nodes)
            .flat_map(|i| {
                (0..grid_nodes).map(move |j| {
                    [
                        (i as f64 + 0.5) / grid_nodes as f64,
                        (j as f64 + 0.5) / grid_nodes as f64,
                    ]
                })
            })
            .collect();
        // per (component, level) and grid node, the chaos factor per config
        let mut x_samples: Vec<Vec<f64>> = Vec::new(); // [pair index][config]
        let mut y_samples: Vec<Vec<f64>> = Vec::new(); // fourth moments
        let mut var_labels = Vec::new();
        let mut fourth_labels = Vec::new();
        for i in 0..d {
            for j in 0..d {
                for n in 1..=2usize {
                    for m in 1..=2usize {
                        var_labels.push((i, j, n, m));
                    }
                }
            }
            for n in 1..=2usize {
                fourth_labels.push((i, n));
            }
        }
        x_samples.resize(var_labels.len(), Vec::with_capacity(oracle_configs));
        y_samples.resize(fourth_labels.len(), Vec::with_capacity(oracle_configs));

        let mut factor = vec![0.0f64; 2 * 2]; // (component, level) at one z
        for rep in 0..oracle_configs {
            let config = sample_poisson(
                model.measure(),
                seeds::mix(seed, &[tag::SELFTEST, 5, rep as u64]),
            )?;
            let mut x_acc = vec![0.0f64; var_labels.len()];
            let mut y_acc = vec![0.0f64; fourth_labels.len()];
            for z in &grid {
                for i in 0..d {
                    for level in 1..=2usize {
                        factor[i * 2 + (level - 1)] =
                            chaos_factor(&model, i, level, z, &config)?;
                    }
                }
                for (idx, &(i, j, n, m)) in var_labels.iter().enumerate() {
                    x_acc[idx] += factor[i * 2 + (n - 1)] * factor[j * 2 + (m - 1)];
                }
                for (idx, &(i, n)) in fourth_labels.iter().enumerate() {
                    y_acc[idx] += factor[i * 2 + (n - 1)].powi(4);
                }
            }
            // ⟨·,·⟩_{L²(μ)} over the grid: μ(dz) = t dz
            for (idx, acc) in x_acc.iter().enumerate() {
                x_samples[idx].push(acc * t * cell);
            }
            for (idx, acc) in y_acc.iter().enumerate() {
                y_samples[idx].push(acc * t * cell);
            }
        }

        let rf = oracle_configs as f64;
        let mut rows = Vec::new();
        for (idx, &(i, j, n, m)) in var_labels.iter().enumerate() {
            let xs = &x_samples[idx];
            let mean = crate::quadrature::pairwise_sum(xs) / rf;
            let m2: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / rf;
            let m4: f64 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / rf;
            let mut oracle = m2 * rf / (rf - 1.0);
            let mut oracle_se = ((m4 - m2 * m2).max(0.0) / rf).sqrt();
            // a deterministic inner product has variance 0; drop float noise
            if oracle <= (1e-10 * mean.abs()).powi(2) {
                oracle = 0.0;
                oracle_se = 0.0;
            }
            let entry = m_term_variance(&model, i, j, n, m, WiringMode::Expansion, &budget, seed)?;
            let combined = (entry.std_error.powi(2) + oracle_se.powi(2)).sqrt();
            let margin = if combined > 0.0 {
                (entry.value - oracle) / combined
            } else if entry.value >= oracle {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            rows.push(DominationRow {
                label: format!("Mvar(i={},j={},n={n},m={m})", i + 1, j + 1),
                bound: entry.value,
                bound_se: entry.std_error,
                oracle,
                oracle_se,
                margin_sigmas: margin,
                pass: margin >= -sigmas,
            });
        }
        for (idx, &(i, n)) in fourth_labels.iter().enumerate() {
            let ys = &y_samples[idx];
            let oracle = crate::quadrature::pairwise_sum(ys) / rf;
            let var: f64 =
                ys.iter().map(|y| (y - oracle) * (y - oracle)).sum::<f64>() / (rf - 1.0);
            let oracle_se = (var / rf).sqrt();
            let entry = m_term_fourth(&model, i, n, &budget, seed)?;
            let combined = (entry.std_error.powi(2) + oracle_se.powi(2)).sqrt();
            let margin = if combined > 0.0 {
                (entry.value - oracle) / combined
            } else if entry.value >= oracle {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            rows.push(DominationRow {
                label: format!("M4(i={},n={n})", i + 1),
                bound: entry.value,
                bound_se: entry.std_error,
                oracle,
                oracle_se,
                margin_sigmas: margin,
                pass: margin >= -sigmas,
            });
        }
        Ok(rows)
    }

    /// Quadrature covariance vs the empirical covariance of a batch.
    pub fn check_covariance_empirical(
        config: &RunConfig,
        sigmas: f64,
    ) -> Result<CheckResult> {
        let name = "covariance-empirical";
        let model = build_model(config)?;
        let budget = config.budgets.integration();
        let cov = covariance(&model, &budget, config.seeds.root)?;
        let batch = replicate(&model, config.budgets.replicates, config.seeds.root)?;
        let emp = empirical_moments(&batch.f, batch.replicates, model.dimension())?;
        let mut worst = (0.0f64, String::new());
        for i in 0..model.dimension() {
            for j in 0..model.dimension() {
                let se = (emp.cov_se.get(i, j).powi(2) + cov.std_errors.get(i, j).powi(2))
                    .sqrt()
                    .max(1e-12);
                let z = (emp.cov.get(i, j) - cov.sigma.get(i, j)).abs() / se;
                if z > worst.0 {
                    worst = (
                        z,
                        format!(
                            "Σ({i},{j}) = {:.4} vs empirical {:.4}",
                            cov.sigma.get(i, j),
                            emp.cov.get(i, j)
                        ),
                    );
                }
            }
        }
        Ok(CheckResult::new(
            name,
            worst.0 <= sigmas,
            format!("worst z = {:.2} ({}), tolerance {sigmas}", worst.0, worst.1),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order1_config(t: f64) -> RunConfig {
        let params = BuiltinParams {
            t: Some(t),
            b: Some(
                crate::model::BoxRegion::new(vec![0.5, 0.0], vec![1.0, 0.5]).unwrap(),
            ),
            ..Default::default()
        };
        RunConfig::builtin("order1-pair", params)
    }

    #[test]
    fn config_parses_documented_schema() {
        let text = r#"{
            "model": {"name": "two-radii-edges", "params": {"t": 50.0, "r": [0.05, 0.10], "D": 2}},
            "C": [[1.0, 0.0], [0.0, 1.0]],
            "seeds": {"root": 7},
            "budgets": {"nodes_per_dim": 12, "mc_samples": 50000, "tensor_dim_cap": 6, "replicates": 100},
            "sweep": {"t": [10.0, 20.0, 40.0]},
            "flags": {"wiring": "expansion", "paper_literal": true},
            "out": {"path": "report.json"}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.seeds.root, 7);
        assert_eq!(cfg.budgets.mc_samples, 50_000);
        assert!(cfg.flags.paper_literal);
        let model = build_model(&cfg).unwrap();
        assert_eq!(model.dimension(), 2);
        // unknown keys are config errors
        assert!(RunConfig::from_json(r#"{"model": {"name": "x"}, "bogus": 1}"#).is_err());
        // missing model name is a config error
        let err = RunConfig::from_json(r#"{"model": {}}"#)
            .and_then(|c| build_model(&c).map(|_| ()));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn inline_kernel_model_builds_and_validates() {
        let a = r#"{
            "model": {
                "params": {"t": 8.0},
                "kernels": [
                    {"order": 1, "terms": [[1.0, [[[0.0,0.0],[0.5,0.5]]]]]},
                    {"order": 2, "terms": [
                        [0.5, [[[0.0,0.0],[0.4,1.0]], [[0.6,0.0],[1.0,1.0]]]],
                        [0.5, [[[0.6,0.0],[1.0,1.0]], [[0.0,0.0],[0.4,1.0]]]]
                    ]}
                ]
            }
        }"#;
        let cfg = RunConfig::from_json(a).unwrap();
        let model = build_model(&cfg).unwrap();
        assert_eq!(model.dimension(), 2);
        assert_eq!((model.order(0), model.order(1)), (1, 2));
        // an asymmetric inline kernel is rejected
        let bad = r#"{
            "model": {
                "params": {"t": 8.0},
                "kernels": [
                    {"order": 1, "terms": [[1.0, [[[0.0,0.0],[0.5,0.5]]]]]},
                    {"order": 2, "terms": [
                        [0.5, [[[0.0,0.0],[0.4,1.0]], [[0.6,0.0],[1.0,1.0]]]]
                    ]}
                ]
            }
        }"#;
        let cfg = RunConfig::from_json(bad).unwrap();
        assert!(matches!(build_model(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn bound_command_closed_form() {
        let out = cmd_bound(&order1_config(10.0)).unwrap();
        let closed = (2.0 * std::f64::consts::PI).sqrt() / 2.5f64.sqrt();
        assert_eq!(out.report.terms.term2, 0.0);
        assert!((out.report.terms.total - closed).abs() <= 1e-6 * closed);
        // non-PD target C is a numerical (exit 2) error
        let mut cfg = order1_config(10.0);
        cfg.c = Some(MatrixD::diag(&[1.0, -2.0]));
        assert!(matches!(cmd_bound(&cfg), Err(Error::Numerical(_))));
        // unknown model name is a config (exit 1) error
        let mut cfg = order1_config(10.0);
        cfg.model.name = Some("missing".into());
        assert!(matches!(cmd_bound(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn verify_command_order1_pair_passes() {
        let mut cfg = order1_config(10.0);
        cfg.budgets.replicates = 20_000;
        let out = cmd_verify(&cfg).unwrap();
        assert!(out.pass, "checks: {:?}", out.checks);
        assert!(out.delta.lower_bound <= out.report.terms.total);
        // tiny replicate counts are rejected by the diagnostics guard
        let mut cfg = order1_config(10.0);
        cfg.budgets.replicates = 5;
        assert!(matches!(cmd_verify(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_command_decay_and_schedule_guards() {
        let mut cfg = order1_config(10.0);
        cfg.budgets.replicates = 2_000;
        cfg.sweep = Some(SweepSpec { t: vec![10.0, 20.0, 40.0, 80.0] });
        let out = cmd_sweep(&cfg).unwrap();
        assert_eq!(out.rows.len(), 4);
        // closed-form t^{-1/2} decay, exact on the analytic path
        for w in out.rows.windows(2) {
            let ratio = w[1].total / w[0].total;
            assert!((ratio - 0.5f64.sqrt()).abs() < 1e-9, "ratio {ratio}");
            assert!(w[1].delta_lower <= w[1].total);
        }
        let header = out.csv.lines().next().unwrap();
        assert_eq!(header, "t,term1,term2,total,delta_lower,delta_SE,cov_err,kurtosis_max");
        assert_eq!(out.csv.lines().count(), 5);

        cfg.sweep = Some(SweepSpec { t: vec![10.0] });
        assert!(matches!(cmd_sweep(&cfg), Err(Error::Config(_))));
        cfg.sweep = Some(SweepSpec { t: vec![10.0, 10.0] });
        assert!(matches!(cmd_sweep(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn selftest_passes_and_mutation_is_caught() {
        let out = cmd_selftest(1, None);
        assert!(out.pass, "failing checks: {:?}", out.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        assert_eq!(out.checks.len(), selftest_names().len());
        let mutated = cmd_selftest(1, Some(SelftestMutation::PartitionPredicate));
        assert!(!mutated.pass);
        let failed: Vec<_> = mutated.checks.iter().filter(|c| !c.pass).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "partition-enumeration");
    }
}
