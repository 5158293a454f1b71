use crate::error::{Error, Result};
use crate::geometry::{dykstra_project, DykstraOptions, DykstraWarmStart, ProjectableSet};
use crate::model::{check_point, DenseVector, ProblemInstance};

/// Quality measures of one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRecord {
    /// `f(x) − f⋆`; `None` without a reference optimum. Can be negative for
    /// infeasible `x`.
    pub f_gap: Option<f64>,
    /// `maxⱼ (φⱼ(x))₊`.
    pub max_violation: f64,
    /// `dist²(x, C)` with `C = C₀ ∩ ⋂ Cⱼ`.
    pub dist2: f64,
    /// Dykstra hit its sweep cap; `dist2` is then the largest squared
    /// distance to a single set, a lower bound.
    pub dist_lower_bound: bool,
}

/// Reusable metric machinery for one instance: the projectable description
/// of `C`, `f⋆`, and a Dykstra warm start carried across calls.
#[derive(Clone, Debug)]
pub struct MetricEvaluator {
    sets: Vec<ProjectableSet>,
    f_star: Option<f64>,
    options: DykstraOptions,
    warm: DykstraWarmStart,
}

impl MetricEvaluator {
    pub fn new(instance: &ProblemInstance) -> Result<Self> {
        Ok(MetricEvaluator {
            sets: instance.feasible_region_sets()?,
            f_star: instance.reference().map(|r| r.f_star),
            options: DykstraOptions::default(),
            warm: DykstraWarmStart::new(),
        })
    }

    pub fn with_f_star(mut self, f_star: Option<f64>) -> Self {
        self.f_star = f_star;
        self
    }

    pub fn with_options(mut self, options: DykstraOptions) -> Self {
        self.options = options;
        self
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn sets(&self) -> &[ProjectableSet] {
        &self.sets
    }

    pub fn f_gap(&self, instance: &ProblemInstance, x: &DenseVector) -> Option<f64> {
        self.f_star.map(|f| instance.objective().value_aggregated(x) - f)
    }

    /// `(dist²(x, C), is_lower_bound)`.
    pub fn dist2(&mut self, x: &DenseVector) -> Result<(f64, bool)> {
        if self.sets.iter().all(|s| s.violation(x) == 0.0) {
            return Ok((0.0, false));
        }
        match dykstra_project(&self.sets, x, self.options, Some(&mut self.warm)) {
            Ok(r) => Ok((r.distance * r.distance, false)),
            Err(Error::NonConvergence { .. }) => {
                self.warm.clear();
                let mut lower: f64 = 0.0;
                for s in &self.sets {
                    let p = s.project(x)?;
                    lower = lower.max((x - p).norm_squared());
                }
                Ok((lower, true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn evaluate(&mut self, instance: &ProblemInstance, x: &DenseVector) -> Result<MetricRecord> {
        let (dist2, dist_lower_bound) = self.dist2(x)?;
        Ok(MetricRecord {
            f_gap: self.f_gap(instance, x),
            max_violation: instance.max_violation(x),
            dist2,
            dist_lower_bound,
        })
    }
}

/// Optimality gap (against the instance's stored reference, or `f_star` when
/// given), max violation and squared distance to the feasible region.
pub fn compute_metrics(instance: &ProblemInstance, x: &DenseVector, f_star: Option<f64>) -> Result<MetricRecord> {
    check_point(x, instance.dimension())?;
    let mut eval = MetricEvaluator::new(instance)?;
    if f_star.is_some() {
        eval = eval.with_f_star(f_star);
    }
    eval.evaluate(instance, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintFunction, InstanceMetadata, ReferenceRecord, SimpleSet, SmoothSumObjective, SmoothSummand};
    use nalgebra::{dvector, DMatrix, DVector};

    /// f(x) = ‖x‖² over {x₁ ≤ −1, x₂ ≤ 3}: x⋆ = (−1, 0), f⋆ = 1.
    fn planar() -> ProblemInstance {
        let s = SmoothSummand::quadratic_composite(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        ProblemInstance::new(
            SmoothSumObjective::new(vec![s]).unwrap(),
            vec![
                ConstraintFunction::affine(dvector![1.0, 0.0], -1.0).unwrap(),
                ConstraintFunction::affine(dvector![0.0, 1.0], 3.0).unwrap(),
            ],
            SimpleSet::WholeSpace,
            InstanceMetadata::default(),
        )
        .unwrap()
        .with_reference(ReferenceRecord {
            x_star: dvector![-1.0, 0.0],
            f_star: 1.0,
            tolerance: 1e-8,
        })
        .unwrap()
    }

    #[test]
    fn at_optimum() {
        let inst = planar();
        let m = compute_metrics(&inst, &dvector![-1.0, 0.0], None).unwrap();
        assert!(m.f_gap.unwrap().abs() <= 1e-8);
        assert!(m.max_violation <= 1e-8);
        assert_eq!(m.dist2, 0.0);
    }

    #[test]
    fn feasible_point_has_zero_distance() {
        let inst = planar();
        let m = compute_metrics(&inst, &dvector![-4.0, 2.0], None).unwrap();
        assert!(m.dist2 <= 1e-18);
        assert!(m.max_violation <= 0.0);
    }

    #[test]
    fn gap_along_interior_direction() {
        // x⋆ + t(−1, 1): f = (1 + t)² + t², gap = 2t + 2t².
        let inst = planar();
        for t in [0.1, 0.5, 2.0] {
            let x = dvector![-1.0 - t, t];
            let m = compute_metrics(&inst, &x, None).unwrap();
            assert!((m.f_gap.unwrap() - (2.0 * t + 2.0 * t * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_point_distance() {
        let inst = planar();
        let m = compute_metrics(&inst, &dvector![1.0, 5.0], None).unwrap();
        assert!((m.dist2 - 8.0).abs() < 1e-12);
        assert_eq!(m.max_violation, 2.0);
        // below f⋆ is possible outside C
        let m = compute_metrics(&inst, &dvector![0.0, 0.0], None).unwrap();
        assert!(m.f_gap.unwrap() < 0.0);
    }
}
