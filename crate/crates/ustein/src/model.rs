//! Ground spaces, intensity measures, U-statistic kernels, and the built-in
//! model library.
//!
//! A model is a box `E ⊂ ℝ^D`, an intensity measure `μ = t·ρ·Lebesgue` on
//! `E`, and `d ≥ 2` symmetric kernels `φ_i : E^{k_i} → ℝ`. Everything is
//! immutable after construction and safe for shared concurrent reads.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, MatrixD};
use crate::seeds::{self, tag};

/// Hard cap on `order · dim` per kernel, sized so argument buffers can live
/// on the stack in hot integration loops.
pub const MAX_KERNEL_ARGS: usize = 64;

/// Axis-aligned box with positive volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(Vec<f64>, Vec<f64>)", into = "(Vec<f64>, Vec<f64>)")]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<(Vec<f64>, Vec<f64>)> for BoxRegion {
    type Error = Error;
    fn try_from((lower, upper): (Vec<f64>, Vec<f64>)) -> Result<Self> {
        BoxRegion::new(lower, upper)
    }
}

impl From<BoxRegion> for (Vec<f64>, Vec<f64>) {
    fn from(b: BoxRegion) -> Self {
        (b.lower, b.upper)
    }
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::config("box: lower/upper length mismatch or empty"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(Error::config(format!(
                    "box: require finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(BoxRegion { lower, upper })
    }

    /// Unit cube `[0,1]^dim`.
    pub fn unit(dim: usize) -> Self {
        BoxRegion { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Closed-box membership; box boundaries have measure zero so the
    /// convention never shows up in integrals.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Intersection, or `None` when the overlap has empty interior.
    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let l = self.lower[j].max(other.lower[j]);
            let u = self.upper[j].min(other.upper[j]);
            if l >= u {
                return None;
            }
            lower.push(l);
            upper.push(u);
        }
        Some(BoxRegion { lower, upper })
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        self.dim() == other.dim()
            && other
                .lower
                .iter()
                .zip(&other.upper)
                .zip(self.lower.iter().zip(&self.upper))
                .all(|((ol, ou), (l, u))| ol >= l && ou <= u)
    }
}

/// Area of `B(center, radius) ∩ box` for a 2-D box, in closed form.
///
/// Uses the quadrant primitive `S(x, y)` = area of the disk (centered at
/// the origin) inside `{u ≤ x, v ≤ y}`; the rectangle follows by
/// inclusion–exclusion over its corners. Exact up to floating point, which
/// is what the simulation oracles need: the level-1 chaos kernel of a
/// distance-indicator kernel is `2 t · area(B(z, r) ∩ E)`.
pub fn disk_box_clipped_area(center: &[f64], radius: f64, bx: &BoxRegion) -> f64 {
    assert_eq!(center.len(), 2, "closed form is 2-D only");
    assert_eq!(bx.dim(), 2);
    let r = radius;
    if r <= 0.0 {
        return 0.0;
    }
    // ∫ sqrt(r² − u²) du
    let primitive = |u: f64| -> f64 {
        let u = u.clamp(-r, r);
        0.5 * (u * (r * r - u * u).max(0.0).sqrt() + r * r * (u / r).asin())
    };
    let h_int = |a: f64, b: f64| -> f64 {
        if b <= a {
            0.0
        } else {
            primitive(b) - primitive(a)
        }
    };
    // area of disk ∩ {u ≤ x, v ≤ y}
    let s = |x: f64, y: f64| -> f64 {
        if x <= -r || y <= -r {
            return 0.0;
        }
        let xc = x.min(r);
        if y >= r {
            return 2.0 * h_int(-r, xc);
        }
        let sy = (r * r - y * y).max(0.0).sqrt();
        if y >= 0.0 {
            let left = 2.0 * h_int(-r, xc.min(-sy));
            let mid = if xc > -sy {
                let hi = xc.min(sy);
                y * (hi + sy) + h_int(-sy, hi)
            } else {
                0.0
            };
            let right = if xc > sy { 2.0 * h_int(sy, xc) } else { 0.0 };
            left + mid + right
        } else {
            if xc <= -sy {
                return 0.0;
            }
            let hi = xc.min(sy);
            y * (hi + sy) + h_int(-sy, hi)
        }
    };
    let x0 = bx.lower()[0] - center[0];
    let x1 = bx.upper()[0] - center[0];
    let y0 = bx.lower()[1] - center[1];
    let y1 = bx.upper()[1] - center[1];
    (s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0)).max(0.0)
}

/// The ground space: an axis-aligned box `E ⊂ ℝ^D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundSpace {
    bbox: BoxRegion,
}

impl GroundSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Ok(GroundSpace { bbox: BoxRegion::new(lower, upper)? })
    }

    pub fn unit_box(dim: usize) -> Self {
        GroundSpace { bbox: BoxRegion::unit(dim) }
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn volume(&self) -> f64 {
        self.bbox.volume()
    }

    pub fn bbox(&self) -> &BoxRegion {
        &self.bbox
    }

    pub fn lower(&self) -> &[f64] {
        self.bbox.lower()
    }

    pub fn upper(&self) -> &[f64] {
        self.bbox.upper()
    }
}

pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Intensity measure `μ = t · ρ · Lebesgue` on a ground space.
///
/// The scale `t` is kept separate from the density so sweeps can rescale a
/// model without touching the kernels, and so every integral can absorb
/// `t^n` analytically.
#[derive(Clone)]
pub struct IntensityMeasure {
    space: GroundSpace,
    scale: f64,
    density: Option<(DensityFn, f64)>,
    unit_mass: f64,
}

impl fmt::Debug for IntensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityMeasure")
            .field("space", &self.space)
            .field("scale", &self.scale)
            .field("uniform", &self.density.is_none())
            .field("unit_mass", &self.unit_mass)
            .finish()
    }
}

impl IntensityMeasure {
    /// Measure with constant density 1: `μ(A) = t · vol(A)` exactly.
    pub fn uniform(space: GroundSpace, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::config(format!("intensity scale must be ≥ 0, got {scale}")));
        }
        let unit_mass = space.volume();
        Ok(IntensityMeasure { space, scale, density: None, unit_mass })
    }

    /// Measure with a custom density `ρ ≥ 0` bounded by `sup`. The unit mass
    /// `∫_E ρ` is computed once by a midpoint rule with `nodes` points per
    /// axis; sampling uses rejection against `sup`.
    pub fn with_density(
        space: GroundSpace,
        scale: f64,
        density: DensityFn,
        sup: f64,
        nodes: usize,
    ) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::config(format!("intensity scale must be ≥ 0, got {scale}")));
        }
        if !(sup.is_finite() && sup > 0.0) || nodes == 0 {
            return Err(Error::config("density sup bound and node count must be positive"));
        }
        let dim = space.dim();
        let widths: Vec<f64> =
            (0..dim).map(|j| (space.upper()[j] - space.lower()[j]) / nodes as f64).collect();
        let cell: f64 = widths.iter().product();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let mut sum = 0.0;
        loop {
            for j in 0..dim {
                x[j] = space.lower()[j] + (idx[j] as f64 + 0.5) * widths[j];
            }
            let v = density(&x);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::numerical(format!("density returned {v} at {x:?}")));
            }
            if v > sup * (1.0 + 1e-9) {
                return Err(Error::numerical(format!(
                    "density {v} exceeds declared sup bound {sup}"
                )));
            }
            sum += v;
            let mut j = dim;
            loop {
                if j == 0 {
                    let unit_mass = sum * cell;
                    if unit_mass <= 0.0 {
                        return Err(Error::numerical("density integrates to zero"));
                    }
                    return Ok(IntensityMeasure {
                        space,
                        scale,
                        density: Some((density, sup)),
                        unit_mass,
                    });
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < nodes {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    pub fn space(&self) -> &GroundSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same space and density at a different scale.
    pub fn scaled(&self, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::config(format!("intensity scale must be ≥ 0, got {scale}")));
        }
        let mut m = self.clone();
        m.scale = scale;
        Ok(m)
    }

    /// Total mass `μ(E) = t · ∫_E ρ`.
    pub fn total_mass(&self) -> f64 {
        self.scale * self.unit_mass
    }

    pub fn is_uniform(&self) -> bool {
        self.density.is_none()
    }

    pub fn density_at(&self, x: &[f64]) -> f64 {
        match &self.density {
            None => 1.0,
            Some((rho, _)) => rho(x),
        }
    }

    pub fn density_sup(&self) -> f64 {
        match &self.density {
            None => 1.0,
            Some((_, sup)) => *sup,
        }
    }

    /// `μ(B ∩ E)`. Exact for the uniform density; midpoint rule (64 nodes
    /// per axis) against the clipped box otherwise.
    pub fn box_mass(&self, b: &BoxRegion) -> f64 {
        let clipped = match self.space.bbox().intersect(b) {
            None => return 0.0,
            Some(c) => c,
        };
        match &self.density {
            None => self.scale * clipped.volume(),
            Some((rho, _)) => {
                const NODES: usize = 64;
                let dim = clipped.dim();
                let widths: Vec<f64> = (0..dim)
                    .map(|j| (clipped.upper()[j] - clipped.lower()[j]) / NODES as f64)
                    .collect();
                let cell: f64 = widths.iter().product();
                let mut idx = vec![0usize; dim];
                let mut x = vec![0.0; dim];
                let mut sum = 0.0;
                'outer: loop {
                    for j in 0..dim {
                        x[j] = clipped.lower()[j] + (idx[j] as f64 + 0.5) * widths[j];
                    }
                    sum += rho(&x);
                    let mut j = dim;
                    loop {
                        if j == 0 {
                            break 'outer;
                        }
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < NODES {
                            break;
                        }
                        idx[j] = 0;
                    }
                }
                self.scale * sum * cell
            }
        }
    }

    /// Draws one point from the normalized density `ρ/∫ρ` on `E`.
    pub fn sample_point(&self, rng: &mut rand_pcg::Pcg64, out: &mut [f64]) {
        let dim = self.dim();
        debug_assert_eq!(out.len(), dim);
        match &self.density {
            None => {
                for j in 0..dim {
                    let u: f64 = rng.gen();
                    out[j] = self.space.lower()[j]
                        + u * (self.space.upper()[j] - self.space.lower()[j]);
                }
            }
            Some((rho, sup)) => loop {
                for j in 0..dim {
                    let u: f64 = rng.gen();
                    out[j] = self.space.lower()[j]
                        + u * (self.space.upper()[j] - self.space.lower()[j]);
                }
                let accept: f64 = rng.gen();
                if accept * sup <= rho(out) {
                    return;
                }
            },
        }
    }
}

/// Kernel body. Indicators are first-class so symmetry checks can demand
/// exact equality and integration can reason about boundedness.
#[derive(Clone)]
pub enum KernelBody {
    /// φ ≡ c.
    Const(f64),
    /// Order-1 indicator `1_A(z)`.
    BoxIndicator(BoxRegion),
    /// Order-2 indicator `1[‖z₁ − z₂‖ ≤ r]`.
    DistIndicator { radius: f64 },
    /// Piecewise-constant kernel `Σ_k λ_k ∏_j 1_{B_{k,j}}(z_j)`.
    BoxSum(Vec<(f64, Vec<BoxRegion>)>),
    /// Arbitrary function handle (not serializable; library use only).
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for KernelBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelBody::Const(c) => write!(f, "Const({c})"),
            KernelBody::BoxIndicator(b) => write!(f, "BoxIndicator({b:?})"),
            KernelBody::DistIndicator { radius } => write!(f, "DistIndicator({radius})"),
            KernelBody::BoxSum(terms) => write!(f, "BoxSum({} terms)", terms.len()),
            KernelBody::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A symmetric kernel `φ : E^k → ℝ`.
#[derive(Debug, Clone)]
pub struct Kernel {
    order: usize,
    body: KernelBody,
    sup_bound: Option<f64>,
}

impl Kernel {
    pub fn constant(order: usize, value: f64) -> Self {
        Kernel { order, body: KernelBody::Const(value), sup_bound: Some(value.abs()) }
    }

    pub fn box_indicator(region: BoxRegion) -> Self {
        Kernel { order: 1, body: KernelBody::BoxIndicator(region), sup_bound: Some(1.0) }
    }

    pub fn dist_indicator(radius: f64) -> Self {
        Kernel { order: 2, body: KernelBody::DistIndicator { radius }, sup_bound: Some(1.0) }
    }

    pub fn box_sum(order: usize, terms: Vec<(f64, Vec<BoxRegion>)>) -> Result<Self> {
        for (_, boxes) in &terms {
            if boxes.len() != order {
                return Err(Error::config(format!(
                    "box-sum kernel: term has {} boxes, expected order {order}",
                    boxes.len()
                )));
            }
        }
        let sup = terms.iter().map(|(c, _)| c.abs()).sum();
        Kernel::validated(Kernel { order, body: KernelBody::BoxSum(terms), sup_bound: Some(sup) })
    }

    pub fn custom(
        order: usize,
        sup_bound: Option<f64>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Kernel { order, body: KernelBody::Custom(Arc::new(f)), sup_bound }
    }

    fn validated(k: Kernel) -> Result<Kernel> {
        if k.order == 0 {
            return Err(Error::config("kernel order must be ≥ 1"));
        }
        Ok(k)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn body(&self) -> &KernelBody {
        &self.body
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self.body,
            KernelBody::BoxIndicator(_)
                | KernelBody::DistIndicator { .. }
                | KernelBody::Const(_)
        )
    }

    /// Evaluates `φ(z_1, ..., z_k)` on `k` points of dimension `dim`,
    /// flattened point-major into `args`.
    #[inline]
    pub fn eval(&self, dim: usize, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.order * dim);
        match &self.body {
            KernelBody::Const(c) => *c,
            KernelBody::BoxIndicator(b) => {
                if b.contains(args) {
                    1.0
                } else {
                    0.0
                }
            }
            KernelBody::DistIndicator { radius } => {
                let (z1, z2) = args.split_at(dim);
                let mut d2 = 0.0;
                for j in 0..dim {
                    let diff = z1[j] - z2[j];
                    d2 += diff * diff;
                }
                if d2 <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            KernelBody::BoxSum(terms) => {
                let mut acc = 0.0;
                'term: for (coeff, boxes) in terms {
                    for (j, b) in boxes.iter().enumerate() {
                        if !b.contains(&args[j * dim..(j + 1) * dim]) {
                            continue 'term;
                        }
                    }
                    acc += coeff;
                }
                acc
            }
            KernelBody::Custom(f) => f(args),
        }
    }
}

/// Result of a randomized kernel symmetry check.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub pass: bool,
    pub max_deviation: f64,
    pub trials: usize,
    pub tolerance: f64,
}

/// Spot-tests `φ(x) = φ(σx)` on random points and permutations. Indicator
/// kernels must match exactly; other kernels get `1e-12` slack.
pub fn validate_symmetry(
    kernel: &Kernel,
    space: &GroundSpace,
    trials: usize,
    seed: u64,
) -> Result<SymmetryReport> {
    if trials == 0 {
        return Err(Error::config("validate_symmetry: trials must be ≥ 1"));
    }
    let tolerance = if kernel.is_indicator() { 0.0 } else { 1e-12 };
    let k = kernel.order();
    let dim = space.dim();
    let mut rng = seeds::rng_for(seed, &[tag::SYMMETRY, k as u64]);
    let mut max_dev: f64 = 0.0;
    let mut args = vec![0.0; k * dim];
    let mut permuted = vec![0.0; k * dim];
    for _ in 0..trials {
        for (j, a) in args.iter_mut().enumerate() {
            let c = j % dim;
            let u: f64 = rng.gen();
            *a = space.lower()[c] + u * (space.upper()[c] - space.lower()[c]);
        }
        // Fisher-Yates over point indices.
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        for (dst, &src) in perm.iter().enumerate() {
            permuted[dst * dim..(dst + 1) * dim]
                .copy_from_slice(&args[src * dim..(src + 1) * dim]);
        }
        let v = kernel.eval(dim, &args);
        let w = kernel.eval(dim, &permuted);
        if !v.is_finite() || !w.is_finite() {
            return Err(Error::non_finite("kernel evaluation in symmetry check"));
        }
        max_dev = max_dev.max((v - w).abs());
    }
    Ok(SymmetryReport { pass: max_dev <= tolerance, max_deviation: max_dev, trials, tolerance })
}

/// A vector of U-statistics: `d ≥ 2` kernels over one intensity measure,
/// plus the target Gaussian covariance `C` (identity unless configured).
#[derive(Debug, Clone)]
pub struct UStatModel {
    name: String,
    measure: IntensityMeasure,
    kernels: Vec<Kernel>,
    target_c: MatrixD,
    warnings: Vec<String>,
}

impl UStatModel {
    pub fn new(
        name: impl Into<String>,
        measure: IntensityMeasure,
        kernels: Vec<Kernel>,
        target_c: Option<MatrixD>,
    ) -> Result<Self> {
        let d = kernels.len();
        if d < 2 {
            return Err(Error::config(format!("model needs d ≥ 2 components, got {d}")));
        }
        let dim = measure.dim();
        for (i, k) in kernels.iter().enumerate() {
            if k.order() == 0 {
                return Err(Error::config(format!("kernel {i}: order must be ≥ 1")));
            }
            if k.order() * dim > MAX_KERNEL_ARGS {
                return Err(Error::config(format!(
                    "kernel {i}: order·dim = {} exceeds the supported maximum {MAX_KERNEL_ARGS}",
                    k.order() * dim
                )));
            }
        }
        let target_c = match target_c {
            None => MatrixD::identity(d),
            Some(c) => {
                if c.dim() != d {
                    return Err(Error::config(format!(
                        "target C is {}×{0}, model dimension is {d}",
                        c.dim()
                    )));
                }
                if !c.is_symmetric(1e-12) {
                    return Err(Error::numerical("target C must be symmetric"));
                }
                let (_, lambda) = jacobi_eigen(&c)?;
                if lambda.iter().any(|&l| l <= 0.0) {
                    return Err(Error::numerical(
                        "target C must be positive definite (non-positive eigenvalue)",
                    ));
                }
                c
            }
        };
        let model = UStatModel {
            name: name.into(),
            measure,
            kernels,
            target_c,
            warnings: Vec::new(),
        };
        model.spot_check_finite()?;
        Ok(model)
    }

    /// Cheap load-time check that every kernel is finite on sampled points
    /// (bounded kernels on a box are integrable iff finite).
    fn spot_check_finite(&self) -> Result<()> {
        let dim = self.measure.dim();
        let mut rng = seeds::rng_for(0xf1717e, &[tag::SYMMETRY]);
        for (i, k) in self.kernels.iter().enumerate() {
            let mut args = vec![0.0; k.order() * dim];
            for _ in 0..64 {
                for (j, a) in args.iter_mut().enumerate() {
                    let c = j % dim;
                    let u: f64 = rng.gen();
                    *a = self.measure.space().lower()[c]
                        + u * (self.measure.space().upper()[c] - self.measure.space().lower()[c]);
                }
                if !k.eval(dim, &args).is_finite() {
                    return Err(Error::non_finite(format!("kernel {i} on sampled point")));
                }
            }
        }
        Ok(())
    }

    fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warnings.push(w.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.kernels.len()
    }

    pub fn measure(&self) -> &IntensityMeasure {
        &self.measure
    }

    pub fn kernel(&self, i: usize) -> &Kernel {
        &self.kernels[i]
    }

    pub fn order(&self, i: usize) -> usize {
        self.kernels[i].order()
    }

    pub fn max_order(&self) -> usize {
        self.kernels.iter().map(|k| k.order()).max().unwrap_or(0)
    }

    pub fn target_c(&self) -> &MatrixD {
        &self.target_c
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn with_target_c(mut self, c: MatrixD) -> Result<Self> {
        if c.dim() != self.dimension() {
            return Err(Error::config("target C dimension mismatch"));
        }
        if !c.is_symmetric(1e-12) {
            return Err(Error::numerical("target C must be symmetric"));
        }
        let (_, lambda) = jacobi_eigen(&c)?;
        if lambda.iter().any(|&l| l <= 0.0) {
            return Err(Error::numerical("target C must be positive definite"));
        }
        self.target_c = c;
        Ok(self)
    }

    /// Same model at a different intensity scale.
    pub fn at_scale(&self, t: f64) -> Result<Self> {
        let mut m = self.clone();
        m.measure = self.measure.scaled(t)?;
        Ok(m)
    }
}

/// Radius parameter: one radius or a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusParam {
    One(f64),
    Two([f64; 2]),
}

/// Parameters accepted by [`builtin_model`]; also the `model.params` schema
/// of the CLI config.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    /// Intensity scale `t` (required, > 0).
    pub t: Option<f64>,
    /// Radius or radius pair for the edge-count kernels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<RadiusParam>,
    /// Box `A` for `order1-pair`, as `[lower, upper]`.
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<BoxRegion>,
    /// Box `B` for `order1-pair`.
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<BoxRegion>,
    /// Space dimension `D` (default 2); the ground space is `[0,1]^D`.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl BuiltinParams {
    pub fn with_t(t: f64) -> Self {
        BuiltinParams { t: Some(t), ..Default::default() }
    }
}

/// Built-in example models on `E = [0,1]^D`:
///
/// - `order1-pair`: `d = 2`, `k = (1,1)`, `φ_1 = 1_A`, `φ_2 = 1_B`
///   (defaults: `A = [0, 0.5]^D`, `B = [0.5, 1] × [0,1]^{D-1}`)
/// - `count-and-edges`: `d = 2`, `k = (1,2)`, `φ_1 ≡ 1`,
///   `φ_2(z_1, z_2) = 1[‖z_1 − z_2‖ ≤ r]`
/// - `two-radii-edges`: `d = 2`, `k = (2,2)`,
///   `φ_i(z_1, z_2) = 1[‖z_1 − z_2‖ ≤ r_i]`
pub fn builtin_model(name: &str, params: &BuiltinParams) -> Result<UStatModel> {
    let dim = params.dim.unwrap_or(2);
    if dim == 0 || dim > 8 {
        return Err(Error::config(format!("space dimension must be in 1..=8, got {dim}")));
    }
    let t = params.t.ok_or_else(|| Error::config("model params: t is required"))?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::config(format!("intensity scale t must be > 0, got {t}")));
    }
    let space = GroundSpace::unit_box(dim);
    let measure = IntensityMeasure::uniform(space.clone(), t)?;

    match name {
        "order1-pair" => {
            let a = match &params.a {
                Some(b) => b.clone(),
                None => BoxRegion::new(vec![0.0; dim], vec![0.5; dim])?,
            };
            let b = match &params.b {
                Some(b) => b.clone(),
                None => {
                    let mut lower = vec![0.0; dim];
                    lower[0] = 0.5;
                    let upper = vec![1.0; dim];
                    BoxRegion::new(lower, upper)?
                }
            };
            for (label, region) in [("A", &a), ("B", &b)] {
                if !space.bbox().contains_box(region) {
                    return Err(Error::config(format!("box {label} must lie inside E")));
                }
            }
            UStatModel::new(
                name,
                measure,
                vec![Kernel::box_indicator(a), Kernel::box_indicator(b)],
                None,
            )
        }
        "count-and-edges" => {
            let r = match params.r {
                Some(RadiusParam::One(r)) => r,
                Some(RadiusParam::Two(_)) => {
                    return Err(Error::config("count-and-edges takes a single radius r"))
                }
                None => return Err(Error::config("count-and-edges: params.r is required")),
            };
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::config(format!("radius must be > 0, got {r}")));
            }
            UStatModel::new(
                name,
                measure,
                vec![Kernel::constant(1, 1.0), Kernel::dist_indicator(r)],
                None,
            )
        }
        "two-radii-edges" => {
            let [r1, r2] = match params.r {
                Some(RadiusParam::Two(rs)) => rs,
                Some(RadiusParam::One(_)) => {
                    return Err(Error::config("two-radii-edges takes r = [r1, r2]"))
                }
                None => return Err(Error::config("two-radii-edges: params.r is required")),
            };
            if !(r1.is_finite() && r1 > 0.0 && r2.is_finite() && r2 > 0.0) {
                return Err(Error::config(format!("radii must be > 0, got [{r1}, {r2}]")));
            }
            let model = UStatModel::new(
                name,
                measure,
                vec![Kernel::dist_indicator(r1), Kernel::dist_indicator(r2)],
                None,
            )?;
            if r1 >= r2 {
                // Near-identical kernels make Σ close to singular; keep the
                // model usable but carry the warning into reports.
                Ok(model.with_warning(format!(
                    "r1 = {r1} ≥ r2 = {r2}: components are strongly correlated, \
                     covariance may be near-singular"
                )))
            } else {
                Ok(model)
            }
        }
        other => Err(Error::config(format!("unknown builtin model '{other}'"))),
    }
}
