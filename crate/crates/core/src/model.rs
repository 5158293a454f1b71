//! Problem data: smooth finite-sum objective, convex functional constraints
//! and a simple set `C₀`, all immutable once built.

use std::hash::{Hash, Hasher};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ProjectableSet, QuadraticSet};
use crate::linalg;

/// Decision variable in ℝᵈ.
pub type DenseVector = DVector<f64>;

/// Checks the length and finiteness of a point handed in from outside.
pub fn check_point(x: &DenseVector, d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Argument(format!(
            "dimension mismatch: expected {d}, got {}",
            x.len()
        )));
    }
    if !linalg::all_finite(x) {
        return Err(Error::Argument("point has non-finite entries".into()));
    }
    Ok(())
}

fn check_finite_matrix(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} has non-finite entries")))
    }
}

fn check_finite_vector(v: &DVector<f64>, what: &str) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} has non-finite entries")))
    }
}

/// One smooth convex term `fᵢ` of the objective.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothSummand {
    /// `fᵢ(x) = xᵀAᵢᵀAᵢx + aᵢᵀx` with `Aᵢ` of shape p×d.
    QuadraticComposite {
        matrix: DMatrix<f64>,
        linear: DVector<f64>,
    },
}

impl SmoothSummand {
    pub fn quadratic_composite(matrix: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        if matrix.ncols() != linear.len() {
            return Err(Error::Argument(format!(
                "summand matrix has {} columns but linear term has length {}",
                matrix.ncols(),
                linear.len()
            )));
        }
        check_finite_matrix(&matrix, "summand matrix")?;
        check_finite_vector(&linear, "summand linear term")?;
        Ok(SmoothSummand::QuadraticComposite { matrix, linear })
    }

    pub fn dimension(&self) -> usize {
        match self {
            SmoothSummand::QuadraticComposite { linear, .. } => linear.len(),
        }
    }

    pub fn value(&self, x: &DenseVector) -> f64 {
        match self {
            SmoothSummand::QuadraticComposite { matrix, linear } => {
                let ax = matrix * x;
                ax.norm_squared() + linear.dot(x)
            }
        }
    }

    pub fn gradient(&self, x: &DenseVector) -> DenseVector {
        let mut out = DVector::zeros(self.dimension());
        self.add_gradient(x, 1.0, &mut out);
        out
    }

    /// `out += scale · ∇fᵢ(x)`.
    pub fn add_gradient(&self, x: &DenseVector, scale: f64, out: &mut DenseVector) {
        match self {
            SmoothSummand::QuadraticComposite { matrix, linear } => {
                let ax = matrix * x;
                out.gemv_tr(2.0 * scale, matrix, &ax, 1.0);
                out.axpy(scale, linear, 1.0);
            }
        }
    }

    /// A Lipschitz constant of the gradient: `2‖AᵢᵀAᵢ‖₂`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            SmoothSummand::QuadraticComposite { matrix, .. } => {
                let s = linalg::operator_norm(matrix, 1e-12, 100_000);
                2.0 * s * s
            }
        }
    }
}

/// `f(x) = (1/n) Σ fᵢ(x)`.
#[derive(Clone, Debug)]
pub struct SmoothSumObjective {
    summands: Vec<SmoothSummand>,
    lipschitz: Option<Vec<f64>>,
    // Aggregated quadratic form f(x) = xᵀPx + cᵀx, used for fast metrics.
    hessian_half: DMatrix<f64>,
    linear_mean: DVector<f64>,
}

impl SmoothSumObjective {
    pub fn new(summands: Vec<SmoothSummand>) -> Result<Self> {
        let d = match summands.first() {
            Some(s) => s.dimension(),
            None => return Err(Error::Argument("objective needs at least one summand".into())),
        };
        if summands.iter().any(|s| s.dimension() != d) {
            return Err(Error::Argument("summands disagree on dimension".into()));
        }
        let n = summands.len() as f64;
        let mut hessian_half = DMatrix::zeros(d, d);
        let mut linear_mean = DVector::zeros(d);
        for s in &summands {
            match s {
                SmoothSummand::QuadraticComposite { matrix, linear } => {
                    hessian_half.gemm_tr(1.0 / n, matrix, matrix, 1.0);
                    linear_mean.axpy(1.0 / n, linear, 1.0);
                }
            }
        }
        Ok(SmoothSumObjective {
            summands,
            lipschitz: None,
            hessian_half,
            linear_mean,
        })
    }

    /// Attaches `Lᵢ = 2‖AᵢᵀAᵢ‖₂` for every summand.
    pub fn with_lipschitz_constants(mut self) -> Self {
        self.lipschitz = Some(self.summands.iter().map(|s| s.lipschitz_constant()).collect());
        self
    }

    pub fn summands(&self) -> &[SmoothSummand] {
        &self.summands
    }

    pub fn len(&self) -> usize {
        self.summands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summands.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.linear_mean.len()
    }

    pub fn lipschitz_constants(&self) -> Option<&[f64]> {
        self.lipschitz.as_deref()
    }

    /// `L = sqrt((1/n) Σ Lᵢ²)`, when the per-summand constants are known.
    pub fn aggregate_lipschitz(&self) -> Option<f64> {
        self.lipschitz.as_ref().map(|ls| {
            let mean_sq = ls.iter().map(|l| l * l).sum::<f64>() / ls.len() as f64;
            mean_sq.sqrt()
        })
    }

    /// Summation over all terms, the defining formula.
    pub fn value(&self, x: &DenseVector) -> f64 {
        self.summands.iter().map(|s| s.value(x)).sum::<f64>() / self.summands.len() as f64
    }

    pub fn gradient(&self, x: &DenseVector) -> DenseVector {
        let mut out = DVector::zeros(self.dimension());
        let scale = 1.0 / self.summands.len() as f64;
        for s in &self.summands {
            s.add_gradient(x, scale, &mut out);
        }
        out
    }

    /// Same value as [`value`](Self::value) via the pre-aggregated quadratic
    /// form; O(d²) instead of O(npd).
    pub fn value_aggregated(&self, x: &DenseVector) -> f64 {
        let px = &self.hessian_half * x;
        x.dot(&px) + self.linear_mean.dot(x)
    }

    pub fn gradient_aggregated(&self, x: &DenseVector) -> DenseVector {
        let mut g = &self.hessian_half * x;
        g *= 2.0;
        g += &self.linear_mean;
        g
    }

    /// `(1/n) Σ AᵢᵀAᵢ`; the Hessian of `f` is twice this.
    pub fn hessian_half(&self) -> &DMatrix<f64> {
        &self.hessian_half
    }

    pub fn linear_mean(&self) -> &DVector<f64> {
        &self.linear_mean
    }
}

/// A convex constraint function `φⱼ`; the constraint set is `{x : φⱼ(x) ≤ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintFunction {
    /// `qᵀx − w`.
    Affine { normal: DVector<f64>, offset: f64 },
    /// `xᵀBᵀBx + bᵀx − w` with `B` of shape q×d.
    Quadratic {
        matrix: DMatrix<f64>,
        linear: DVector<f64>,
        offset: f64,
    },
    /// Pointwise maximum of the members.
    MaxGroup(Vec<ConstraintFunction>),
}

impl ConstraintFunction {
    pub fn affine(normal: DVector<f64>, offset: f64) -> Result<Self> {
        check_finite_vector(&normal, "affine normal")?;
        if !offset.is_finite() {
            return Err(Error::Argument("affine offset is not finite".into()));
        }
        Ok(ConstraintFunction::Affine { normal, offset })
    }

    pub fn quadratic(matrix: DMatrix<f64>, linear: DVector<f64>, offset: f64) -> Result<Self> {
        if matrix.ncols() != linear.len() {
            return Err(Error::Argument(format!(
                "constraint matrix has {} columns but linear term has length {}",
                matrix.ncols(),
                linear.len()
            )));
        }
        check_finite_matrix(&matrix, "constraint matrix")?;
        check_finite_vector(&linear, "constraint linear term")?;
        if !offset.is_finite() {
            return Err(Error::Argument("constraint offset is not finite".into()));
        }
        Ok(ConstraintFunction::Quadratic {
            matrix,
            linear,
            offset,
        })
    }

    pub fn max_group(members: Vec<ConstraintFunction>) -> Result<Self> {
        let d = match members.first() {
            Some(c) => c.dimension(),
            None => return Err(Error::Argument("max-group needs at least one member".into())),
        };
        if members.iter().any(|c| c.dimension() != d) {
            return Err(Error::Argument("max-group members disagree on dimension".into()));
        }
        Ok(ConstraintFunction::MaxGroup(members))
    }

    pub fn dimension(&self) -> usize {
        match self {
            ConstraintFunction::Affine { normal, .. } => normal.len(),
            ConstraintFunction::Quadratic { linear, .. } => linear.len(),
            ConstraintFunction::MaxGroup(members) => members[0].dimension(),
        }
    }

    pub fn value(&self, x: &DenseVector) -> f64 {
        match self {
            ConstraintFunction::Affine { normal, offset } => normal.dot(x) - offset,
            ConstraintFunction::Quadratic {
                matrix,
                linear,
                offset,
            } => (matrix * x).norm_squared() + linear.dot(x) - offset,
            ConstraintFunction::MaxGroup(members) => members
                .iter()
                .map(|c| c.value(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Value and one subgradient. Smooth kinds return the gradient; a
    /// max-group returns the subgradient of its first member attaining the
    /// maximum.
    pub fn value_and_subgradient(&self, x: &DenseVector) -> (f64, DenseVector) {
        match self {
            ConstraintFunction::Affine { normal, offset } => (normal.dot(x) - offset, normal.clone()),
            ConstraintFunction::Quadratic {
                matrix,
                linear,
                offset,
            } => {
                let bx = matrix * x;
                let value = bx.norm_squared() + linear.dot(x) - offset;
                let mut g = linear.clone();
                g.gemv_tr(2.0, matrix, &bx, 1.0);
                (value, g)
            }
            ConstraintFunction::MaxGroup(members) => {
                let mut best = 0;
                let mut best_value = f64::NEG_INFINITY;
                for (i, c) in members.iter().enumerate() {
                    let v = c.value(x);
                    if v > best_value {
                        best = i;
                        best_value = v;
                    }
                }
                let (v, g) = members[best].value_and_subgradient(x);
                debug_assert_eq!(v.to_bits(), best_value.to_bits());
                (best_value, g)
            }
        }
    }

    /// The non-grouped constraints this function is made of, in order.
    pub fn leaves(&self) -> Vec<&ConstraintFunction> {
        match self {
            ConstraintFunction::MaxGroup(members) => members.iter().flat_map(|c| c.leaves()).collect(),
            other => vec![other],
        }
    }

    /// Exact projector onto `{x : φ(x) ≤ 0}` when one is available in closed
    /// form (affine) or by a scalar root-find (quadratic).
    pub fn exact_projection(&self) -> Result<Option<ProjectableSet>> {
        match self {
            ConstraintFunction::Affine { normal, offset } => {
                if normal.norm_squared() == 0.0 {
                    if *offset >= 0.0 {
                        return Ok(Some(ProjectableSet::Simple(SimpleSet::WholeSpace)));
                    }
                    return Err(Error::InfeasibleSet("0ᵀx ≤ w with w < 0".into()));
                }
                Ok(Some(ProjectableSet::HalfSpace(crate::geometry::HalfSpace::new(
                    normal.clone(),
                    *offset,
                )?)))
            }
            ConstraintFunction::Quadratic {
                matrix,
                linear,
                offset,
            } => {
                let gram = matrix.transpose() * matrix;
                Ok(Some(ProjectableSet::Quadratic(QuadraticSet::new(
                    gram,
                    linear.clone(),
                    *offset,
                )?)))
            }
            ConstraintFunction::MaxGroup(_) => Ok(None),
        }
    }
}

/// The projectable set `C₀`.
#[derive(Clone, Debug, PartialEq)]
pub enum SimpleSet {
    WholeSpace,
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
}

impl SimpleSet {
    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Argument("box bounds differ in length".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::Argument("box needs lower ≤ upper componentwise".into()));
        }
        Ok(SimpleSet::Box { lower, upper })
    }

    /// `[-half_width, half_width]ᵈ`.
    pub fn symmetric_box(d: usize, half_width: f64) -> Result<Self> {
        Self::boxed(
            DVector::from_element(d, -half_width),
            DVector::from_element(d, half_width),
        )
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        check_finite_vector(&center, "ball center")?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Argument("ball radius must be finite and ≥ 0".into()));
        }
        Ok(SimpleSet::Ball { center, radius })
    }

    /// `None` for the whole space, which fits any dimension.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            SimpleSet::WholeSpace => None,
            SimpleSet::Box { lower, .. } => Some(lower.len()),
            SimpleSet::Ball { center, .. } => Some(center.len()),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, SimpleSet::WholeSpace)
    }

    pub fn contains(&self, x: &DenseVector, tol: f64) -> bool {
        match self {
            SimpleSet::WholeSpace => true,
            SimpleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            SimpleSet::Ball { center, radius } => (x - center).norm() <= radius + tol,
        }
    }

    /// Exact Euclidean projection.
    pub fn project(&self, u: &DenseVector) -> DenseVector {
        match self {
            SimpleSet::WholeSpace => u.clone(),
            SimpleSet::Box { lower, upper } => {
                DVector::from_fn(u.len(), |i, _| u[i].max(lower[i]).min(upper[i]))
            }
            SimpleSet::Ball { center, radius } => {
                let diff = u - center;
                let dist = diff.norm();
                if dist <= *radius {
                    u.clone()
                } else {
                    center + diff * (*radius / dist)
                }
            }
        }
    }
}

/// Reference optimum stored with an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRecord {
    pub x_star: DenseVector,
    pub f_star: f64,
    /// Tolerance the reference was certified to.
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InstanceMetadata {
    /// Family tag, e.g. `lcqp`, `qcqp`, or `custom`.
    pub family: String,
    pub seed: Option<u64>,
    /// `true` when every generated offset `wⱼ` is strictly positive, so the
    /// origin is a strictly feasible point.
    pub strictly_feasible_origin: Option<bool>,
    pub reference: Option<ReferenceRecord>,
}

/// A complete problem: objective, constraints, simple set and metadata.
#[derive(Debug)]
pub struct ProblemInstance {
    dimension: usize,
    objective: SmoothSumObjective,
    constraints: Vec<ConstraintFunction>,
    simple_set: SimpleSet,
    metadata: InstanceMetadata,
    fingerprint: u64,
    exact_projections: OnceLock<Vec<Option<ProjectableSet>>>,
}

impl Clone for ProblemInstance {
    fn clone(&self) -> Self {
        ProblemInstance {
            dimension: self.dimension,
            objective: self.objective.clone(),
            constraints: self.constraints.clone(),
            simple_set: self.simple_set.clone(),
            metadata: self.metadata.clone(),
            fingerprint: self.fingerprint,
            exact_projections: OnceLock::new(),
        }
    }
}

impl ProblemInstance {
    pub fn new(
        objective: SmoothSumObjective,
        constraints: Vec<ConstraintFunction>,
        simple_set: SimpleSet,
        metadata: InstanceMetadata,
    ) -> Result<Self> {
        let d = objective.dimension();
        if d == 0 {
            return Err(Error::Argument("dimension must be at least 1".into()));
        }
        if let Some((j, _)) = constraints.iter().enumerate().find(|(_, c)| c.dimension() != d) {
            return Err(Error::Argument(format!("constraint {j} has the wrong dimension")));
        }
        if let Some(sd) = simple_set.dimension() {
            if sd != d {
                return Err(Error::Argument(format!(
                    "simple set has dimension {sd}, problem has {d}"
                )));
            }
        }
        let mut instance = ProblemInstance {
            dimension: d,
            objective,
            constraints,
            simple_set,
            metadata: InstanceMetadata::default(),
            fingerprint: 0,
            exact_projections: OnceLock::new(),
        };
        instance.fingerprint = instance.compute_fingerprint();
        instance.set_metadata(metadata)?;
        Ok(instance)
    }

    fn set_metadata(&mut self, metadata: InstanceMetadata) -> Result<()> {
        if let Some(r) = &metadata.reference {
            check_point(&r.x_star, self.dimension)?;
            let viol = self.max_violation(&r.x_star);
            if viol > r.tolerance {
                return Err(Error::Argument(format!(
                    "reference point violates constraints by {viol:.3e} > {:.3e}",
                    r.tolerance
                )));
            }
            if !self.simple_set.contains(&r.x_star, r.tolerance) {
                return Err(Error::Argument("reference point lies outside C₀".into()));
            }
        }
        self.metadata = metadata;
        Ok(())
    }

    /// Same problem with a reference solution attached.
    pub fn with_reference(mut self, reference: ReferenceRecord) -> Result<Self> {
        let mut metadata = self.metadata.clone();
        metadata.reference = Some(reference);
        self.set_metadata(metadata)?;
        Ok(self)
    }

    pub fn with_metadata(mut self, metadata: InstanceMetadata) -> Result<Self> {
        self.set_metadata(metadata)?;
        Ok(self)
    }

    fn compute_fingerprint(&self) -> u64 {
        #[allow(deprecated)]
        let mut h = std::hash::SipHasher::new();
        fn mat<H: Hasher>(h: &mut H, m: &DMatrix<f64>) {
            m.nrows().hash(h);
            m.ncols().hash(h);
            for v in m.iter() {
                v.to_bits().hash(h);
            }
        }
        fn vec<H: Hasher>(h: &mut H, v: &DVector<f64>) {
            v.len().hash(h);
            for x in v.iter() {
                x.to_bits().hash(h);
            }
        }
        fn constraint<H: Hasher>(h: &mut H, c: &ConstraintFunction) {
            match c {
                ConstraintFunction::Affine { normal, offset } => {
                    0u8.hash(h);
                    vec(h, normal);
                    offset.to_bits().hash(h);
                }
                ConstraintFunction::Quadratic {
                    matrix,
                    linear,
                    offset,
                } => {
                    1u8.hash(h);
                    mat(h, matrix);
                    vec(h, linear);
                    offset.to_bits().hash(h);
                }
                ConstraintFunction::MaxGroup(members) => {
                    2u8.hash(h);
                    members.len().hash(h);
                    for m in members {
                        constraint(h, m);
                    }
                }
            }
        }
        self.dimension.hash(&mut h);
        for s in self.objective.summands() {
            match s {
                SmoothSummand::QuadraticComposite { matrix, linear } => {
                    mat(&mut h, matrix);
                    vec(&mut h, linear);
                }
            }
        }
        for c in &self.constraints {
            constraint(&mut h, c);
        }
        match &self.simple_set {
            SimpleSet::WholeSpace => 0u8.hash(&mut h),
            SimpleSet::Box { lower, upper } => {
                1u8.hash(&mut h);
                vec(&mut h, lower);
                vec(&mut h, upper);
            }
            SimpleSet::Ball { center, radius } => {
                2u8.hash(&mut h);
                vec(&mut h, center);
                radius.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of summands `n`.
    pub fn num_summands(&self) -> usize {
        self.objective.len()
    }

    /// Number of constraints `m`.
    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &SmoothSumObjective {
        &self.objective
    }

    pub fn constraints(&self) -> &[ConstraintFunction] {
        &self.constraints
    }

    pub fn simple_set(&self) -> &SimpleSet {
        &self.simple_set
    }

    pub fn metadata(&self) -> &InstanceMetadata {
        &self.metadata
    }

    pub fn reference(&self) -> Option<&ReferenceRecord> {
        self.metadata.reference.as_ref()
    }

    /// Stable hash of the numerical content (metadata excluded).
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `(1/n) Σ fᵢ(x)`.
    pub fn evaluate_objective(&self, x: &DenseVector) -> Result<f64> {
        check_point(x, self.dimension)?;
        Ok(self.objective.value(x))
    }

    /// `(1/n) Σ ∇fᵢ(x)`.
    pub fn evaluate_full_gradient(&self, x: &DenseVector) -> Result<DenseVector> {
        check_point(x, self.dimension)?;
        Ok(self.objective.gradient(x))
    }

    /// `(φⱼ(x), ξ)` with `ξ ∈ ∂φⱼ(x)`; `j` is zero-based.
    pub fn constraint_value_and_subgradient(&self, j: usize, x: &DenseVector) -> Result<(f64, DenseVector)> {
        let c = self.constraints.get(j).ok_or_else(|| {
            Error::Argument(format!(
                "constraint index {j} out of range (m = {})",
                self.constraints.len()
            ))
        })?;
        check_point(x, self.dimension)?;
        Ok(c.value_and_subgradient(x))
    }

    /// `maxⱼ (φⱼ(x))₊`, zero when there are no constraints.
    pub fn max_violation(&self, x: &DenseVector) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(0.0, f64::max)
    }

    /// Every constraint as an exactly projectable set, with max-groups
    /// expanded into their members. Cached on first use.
    pub fn exact_projections(&self) -> Result<&[Option<ProjectableSet>]> {
        if let Some(v) = self.exact_projections.get() {
            return Ok(v);
        }
        let built = self
            .constraints
            .iter()
            .map(|c| c.exact_projection())
            .collect::<Result<Vec<_>>>()?;
        Ok(self.exact_projections.get_or_init(|| built))
    }

    /// Sets whose intersection is the feasible region `C`: `C₀` (when not the
    /// whole space) followed by every leaf constraint set.
    pub fn feasible_region_sets(&self) -> Result<Vec<ProjectableSet>> {
        let mut sets = Vec::new();
        if !self.simple_set.is_whole_space() {
            sets.push(ProjectableSet::Simple(self.simple_set.clone()));
        }
        for (c, exact) in self.constraints.iter().zip(self.exact_projections()?) {
            match exact {
                Some(s) => sets.push(s.clone()),
                None => {
                    for leaf in c.leaves() {
                        match leaf.exact_projection()? {
                            Some(s) => sets.push(s),
                            None => {
                                return Err(Error::Internal("leaf constraint without projection".into()))
                            }
                        }
                    }
                }
            }
        }
        Ok(sets)
    }
}
