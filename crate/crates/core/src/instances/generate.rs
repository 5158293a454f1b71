use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::operator_norm;
use crate::model::{
    ConstraintFunction, InstanceMetadata, ProblemInstance, SimpleSet, SmoothSumObjective, SmoothSummand,
};

/// Relative tolerance of the power iteration used for operator norms.
pub const OPERATOR_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Quadratic objective, affine constraints `Qx ≤ w`, `C₀ = ℝᵈ`.
    Lcqp,
    /// Quadratic objective, convex quadratic constraints, `C₀` a box.
    Qcqp,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Lcqp => "lcqp",
            Family::Qcqp => "qcqp",
        }
    }
}

fn default_w_range() -> [f64; 2] {
    [0.0, 0.5]
}

fn default_box_half_width() -> f64 {
    10.0
}

/// Parameters of a random instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    /// Number of summands.
    pub n: usize,
    /// Number of constraints.
    pub m: usize,
    pub d: usize,
    /// Rows of each objective matrix `Aᵢ`.
    pub p: usize,
    /// Rows of each constraint matrix `Bⱼ` (qcqp only).
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Offsets `wⱼ` are uniform on this interval.
    #[serde(default = "default_w_range")]
    pub w_range: [f64; 2],
    /// `C₀ = [−h, h]ᵈ` for qcqp.
    #[serde(default = "default_box_half_width")]
    pub box_half_width: f64,
}

impl GeneratorSpec {
    pub fn lcqp(n: usize, m: usize, d: usize, p: usize, seed: u64) -> Self {
        GeneratorSpec {
            family: Family::Lcqp,
            n,
            m,
            d,
            p,
            q: None,
            seed,
            w_range: default_w_range(),
            box_half_width: default_box_half_width(),
        }
    }

    pub fn qcqp(n: usize, m: usize, d: usize, p: usize, q: usize, seed: u64) -> Self {
        GeneratorSpec {
            family: Family::Qcqp,
            q: Some(q),
            ..Self::lcqp(n, m, d, p, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.d == 0 || self.p == 0 {
            return Err(Error::Argument("n, m, d, p must all be at least 1".into()));
        }
        if self.family == Family::Qcqp && !self.q.is_some_and(|q| q >= 1) {
            return Err(Error::Argument("qcqp needs q ≥ 1".into()));
        }
        let [lo, hi] = self.w_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Argument(format!("w range [{lo}, {hi}] must satisfy 0 ≤ lo ≤ hi")));
        }
        if !(self.box_half_width > 0.0 && self.box_half_width.is_finite()) {
            return Err(Error::Argument("box half-width must be positive".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        match self.family {
            Family::Lcqp => generate_lcqp(self),
            Family::Qcqp => generate_qcqp(self),
        }
    }
}

/// Draws a `(rows + 1) × d` standard Gaussian matrix, scales it to unit
/// operator norm and splits it into the first `rows` rows and the last row.
fn normalized_block(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut raw = DMatrix::zeros(rows + 1, d);
    for i in 0..=rows {
        for j in 0..d {
            raw[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let norm = operator_norm(&raw, OPERATOR_NORM_TOL, 1_000_000);
    raw /= norm;
    let matrix = raw.rows(0, rows).into_owned();
    let last = raw.row(rows).transpose();
    (matrix, last)
}

fn offsets(rng: &mut ChaCha8Rng, m: usize, [lo, hi]: [f64; 2]) -> Vec<f64> {
    (0..m)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect()
}

fn objective(rng: &mut ChaCha8Rng, spec: &GeneratorSpec) -> Result<SmoothSumObjective> {
    let summands = (0..spec.n)
        .map(|_| {
            let (a, lin) = normalized_block(rng, spec.p, spec.d);
            SmoothSummand::quadratic_composite(a, lin)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SmoothSumObjective::new(summands)?.with_lipschitz_constants())
}

fn metadata(spec: &GeneratorSpec, w: &[f64]) -> InstanceMetadata {
    InstanceMetadata {
        family: spec.family.name().to_string(),
        seed: Some(spec.seed),
        strictly_feasible_origin: Some(w.iter().all(|&v| v > 0.0)),
        reference: None,
    }
}

/// `minimize (1/n) Σ xᵀAᵢᵀAᵢx + aᵢᵀx  s.t.  qⱼᵀx ≤ wⱼ`, with unit-norm
/// `(Aᵢ; aᵢᵀ)` blocks and unit-length `qⱼ`.
pub fn generate_lcqp(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    if spec.family != Family::Lcqp {
        return Err(Error::Argument("generate_lcqp called with a non-lcqp spec".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let objective = objective(&mut rng, spec)?;
    let normals: Vec<DVector<f64>> = (0..spec.m)
        .map(|_| {
            let q = DVector::from_fn(spec.d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = q.norm();
            q / norm
        })
        .collect();
    let w = offsets(&mut rng, spec.m, spec.w_range);
    let constraints = normals
        .into_iter()
        .zip(&w)
        .map(|(q, &wj)| ConstraintFunction::affine(q, wj))
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::new(objective, constraints, SimpleSet::WholeSpace, metadata(spec, &w))
}

/// `minimize (1/n) Σ xᵀAᵢᵀAᵢx + aᵢᵀx  s.t.  xᵀBⱼᵀBⱼx + bⱼᵀx ≤ wⱼ,
/// x ∈ [−h, h]ᵈ`, with every `(Bⱼ; bⱼᵀ)` generated like `(Aᵢ; aᵢᵀ)`.
pub fn generate_qcqp(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    if spec.family != Family::Qcqp {
        return Err(Error::Argument("generate_qcqp called with a non-qcqp spec".into()));
    }
    let q = spec.q.expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let objective = objective(&mut rng, spec)?;
    let blocks: Vec<_> = (0..spec.m).map(|_| normalized_block(&mut rng, q, spec.d)).collect();
    let w = offsets(&mut rng, spec.m, spec.w_range);
    let constraints = blocks
        .into_iter()
        .zip(&w)
        .map(|((b, lin), &wj)| ConstraintFunction::quadratic(b, lin, wj))
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::new(
        objective,
        constraints,
        SimpleSet::symmetric_box(spec.d, spec.box_half_width)?,
        metadata(spec, &w),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SmoothSummand;

    fn svd_norm(m: &DMatrix<f64>) -> f64 {
        m.clone().svd(false, false).singular_values.max()
    }

    fn stacked(a: &DMatrix<f64>, lin: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(a.nrows() + 1, a.ncols());
        out.rows_mut(0, a.nrows()).copy_from(a);
        out.row_mut(a.nrows()).copy_from(&lin.transpose());
        out
    }

    #[test]
    fn lcqp_normalization() {
        let inst = generate_lcqp(&GeneratorSpec::lcqp(30, 12, 8, 3, 5)).unwrap();
        for s in inst.objective().summands() {
            let SmoothSummand::QuadraticComposite { matrix, linear } = s;
            assert_eq!(matrix.nrows(), 3);
            assert!((svd_norm(&stacked(matrix, linear)) - 1.0).abs() <= 1e-10);
        }
        for c in inst.constraints() {
            let ConstraintFunction::Affine { normal, offset } = c else { panic!("affine expected") };
            assert!((normal.norm() - 1.0).abs() <= 1e-12);
            assert!((0.0..=0.5).contains(offset));
        }
        let zero = DVector::zeros(8);
        assert_eq!(inst.evaluate_objective(&zero).unwrap(), 0.0);
        assert!(inst.max_violation(&zero) <= 0.0);
        assert!(inst.simple_set().is_whole_space());
        assert_eq!(inst.metadata().strictly_feasible_origin, Some(true));
    }

    #[test]
    fn qcqp_normalization_and_psd() {
        let inst = generate_qcqp(&GeneratorSpec::qcqp(10, 6, 7, 3, 4, 9)).unwrap();
        for c in inst.constraints() {
            let ConstraintFunction::Quadratic { matrix, linear, offset } = c else { panic!("quadratic expected") };
            assert_eq!(matrix.nrows(), 4);
            assert!((svd_norm(&stacked(matrix, linear)) - 1.0).abs() <= 1e-10);
            let hess = matrix.transpose() * matrix * 2.0;
            assert!(hess.symmetric_eigenvalues().min() >= -1e-12);
            assert!((0.0..=0.5).contains(offset));
        }
        let zero = DVector::zeros(7);
        assert!(inst.max_violation(&zero) <= 0.0);
        assert!(inst.simple_set().contains(&zero, 0.0));
        assert_eq!(*inst.simple_set(), SimpleSet::symmetric_box(7, 10.0).unwrap());
    }

    #[test]
    fn regeneration_is_deterministic() {
        let spec = GeneratorSpec::qcqp(5, 4, 3, 2, 2, 77);
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.constraints(), b.constraints());
        assert_ne!(spec.with_seed(78).generate().unwrap().fingerprint(), a.fingerprint());
    }

    #[test]
    fn spec_validation() {
        assert!(GeneratorSpec::lcqp(0, 1, 1, 1, 0).validate().is_err());
        let mut s = GeneratorSpec::qcqp(1, 1, 1, 1, 1, 0);
        s.q = None;
        assert!(s.validate().is_err());
        let mut s = GeneratorSpec::lcqp(1, 1, 1, 1, 0);
        s.w_range = [-0.1, 0.5];
        assert!(s.validate().is_err());
        assert!(generate_qcqp(&GeneratorSpec::lcqp(1, 1, 1, 1, 0)).is_err());
    }

    #[test]
    fn lipschitz_constants_attached() {
        let inst = generate_lcqp(&GeneratorSpec::lcqp(4, 2, 5, 2, 1)).unwrap();
        let ls = inst.objective().lipschitz_constants().unwrap();
        assert_eq!(ls.len(), 4);
        // ‖Aᵢ‖ ≤ ‖(Aᵢ; aᵢᵀ)‖ = 1, so Lᵢ ≤ 2.
        assert!(ls.iter().all(|&l| l > 0.0 && l <= 2.0 + 1e-12));
    }
}
