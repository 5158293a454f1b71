use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dykstra_project, DykstraOptions, DykstraWarmStart, ProjectableSet};
use crate::linalg::largest_eigenvalue_psd;
use crate::model::{DenseVector, ProblemInstance, ReferenceRecord};

/// Certified optimum of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    /// `max(maxⱼ (φⱼ(x⋆))₊, dist(x⋆, C₀))`.
    pub max_violation: f64,
    /// `‖x⋆ − Π_C(x⋆ − s∇f(x⋆))‖ / s`.
    pub residual: f64,
    pub iterations: usize,
    pub tolerance: f64,
}

impl ReferenceSolution {
    pub fn x_star(&self) -> DenseVector {
        DenseVector::from_column_slice(&self.x_star)
    }

    pub fn record(&self) -> ReferenceRecord {
        ReferenceRecord {
            x_star: self.x_star(),
            f_star: self.f_star,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub dykstra: DykstraOptions,
}

impl ReferenceOptions {
    pub fn new(tol: f64) -> Self {
        ReferenceOptions {
            tol,
            max_iterations: 1_000_000,
            dykstra: DykstraOptions {
                max_sweeps: 1_000_000,
                tol: (tol * 1e-4).max(1e-15),
            },
        }
    }
}

/// Recommended upper bound on `d` for the dense reference solver.
pub const REFERENCE_DIMENSION_GUIDELINE: usize = 500;

fn violation(instance: &ProblemInstance, x: &DenseVector) -> f64 {
    let box_dist = (x - instance.simple_set().project(x)).norm();
    instance.max_violation(x).max(box_dist)
}

struct Projector<'a> {
    sets: &'a [ProjectableSet],
    options: DykstraOptions,
    warm: DykstraWarmStart,
}

impl Projector<'_> {
    fn project(&mut self, u: &DenseVector) -> Result<DenseVector> {
        if self.sets.is_empty() {
            return Ok(u.clone());
        }
        Ok(dykstra_project(self.sets, u, self.options, Some(&mut self.warm))?.point)
    }
}

/// Projected gradient descent on the aggregated quadratic, with the
/// projection onto `C` computed by warm-started Dykstra.
pub fn solve_reference(instance: &ProblemInstance, tol: f64) -> Result<ReferenceSolution> {
    solve_reference_with(instance, ReferenceOptions::new(tol))
}

pub fn solve_reference_with(instance: &ProblemInstance, options: ReferenceOptions) -> Result<ReferenceSolution> {
    if !(options.tol > 0.0 && options.tol.is_finite()) {
        return Err(Error::Argument(format!("tolerance {} must be positive", options.tol)));
    }
    if instance.dimension() > REFERENCE_DIMENSION_GUIDELINE {
        log::warn!(
            "reference solve in dimension {} exceeds the {} guideline",
            instance.dimension(),
            REFERENCE_DIMENSION_GUIDELINE
        );
    }
    let objective = instance.objective();
    let sets = instance.feasible_region_sets()?;
    let mut projector = Projector {
        sets: &sets,
        options: options.dykstra,
        warm: DykstraWarmStart::new(),
    };

    // ∇²f = 2P with P = mean AᵢᵀAᵢ.
    let lipschitz = 2.0 * largest_eigenvalue_psd(objective.hessian_half(), 1e-12, 1_000_000);
    let mut s = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut x = projector.project(&DenseVector::zeros(instance.dimension()))?;
    let mut fx = objective.value_aggregated(&x);
    let mut residual = f64::INFINITY;
    for it in 0..options.max_iterations {
        let g = objective.gradient_aggregated(&x);
        let (p, fp) = loop {
            let y = &x - s * &g;
            let p = projector.project(&y)?;
            let fp = objective.value_aggregated(&p);
            let diff = &p - &x;
            let model = fx + g.dot(&diff) + diff.norm_squared() / (2.0 * s);
            if fp <= model + 1e-14 * fx.abs().max(1.0) || s < 1e-20 {
                break (p, fp);
            }
            s *= 0.5;
        };
        residual = (&x - &p).norm() / s;
        let viol = violation(instance, &x);
        if residual <= options.tol && viol <= options.tol {
            return Ok(ReferenceSolution {
                x_star: x.iter().copied().collect(),
                f_star: fx,
                max_violation: viol,
                residual,
                iterations: it,
                tolerance: options.tol,
            });
        }
        x = p;
        fx = fp;
    }
    Err(Error::NotCertified {
        iterations: options.max_iterations,
        residual,
        violation: violation(instance, &x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::GeneratorSpec;
    use crate::model::{ConstraintFunction, InstanceMetadata, SimpleSet, SmoothSumObjective, SmoothSummand};
    use nalgebra::{dvector, DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(
        summands: Vec<SmoothSummand>,
        constraints: Vec<ConstraintFunction>,
        simple: SimpleSet,
    ) -> ProblemInstance {
        ProblemInstance::new(
            SmoothSumObjective::new(summands).unwrap(),
            constraints,
            simple,
            InstanceMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_matches_linear_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, -0.3, 1.0, 0.2, 0.1, 0.0, 1.5]);
        let lin = dvector![1.0, -2.0, 0.5];
        let inst = instance(
            vec![SmoothSummand::quadratic_composite(a.clone(), lin.clone()).unwrap()],
            vec![],
            SimpleSet::WholeSpace,
        );
        let sol = solve_reference(&inst, 1e-10).unwrap();
        let h = a.transpose() * &a * 2.0;
        let expected = -h.lu().solve(&lin).unwrap();
        assert!((sol.x_star() - expected).amax() <= 1e-7);
    }

    #[test]
    fn norm_over_halfspace() {
        let d = 4;
        let inst = instance(
            vec![SmoothSummand::quadratic_composite(DMatrix::identity(d, d), DVector::zeros(d)).unwrap()],
            vec![ConstraintFunction::affine(DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 }), -1.0).unwrap()],
            SimpleSet::WholeSpace,
        );
        let sol = solve_reference(&inst, 1e-10).unwrap();
        let mut expected = DVector::zeros(d);
        expected[0] = -1.0;
        assert!((sol.x_star() - expected).amax() <= 1e-8);
        assert!((sol.f_star - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn lcqp_refinement_is_consistent() {
        let inst = GeneratorSpec::lcqp(50, 20, 10, 3, 11).generate().unwrap();
        let tol = 1e-8;
        let coarse = solve_reference(&inst, tol).unwrap();
        let fine = solve_reference(&inst, tol / 10.0).unwrap();
        assert!(coarse.max_violation <= tol && coarse.residual <= tol);
        assert!((coarse.f_star - fine.f_star).abs() <= 10.0 * tol);
    }

    #[test]
    fn optimality_under_feasible_perturbations() {
        let inst = GeneratorSpec::qcqp(20, 10, 6, 3, 2, 4).generate().unwrap();
        let tol = 1e-8;
        let sol = solve_reference(&inst, tol).unwrap();
        let sets = inst.feasible_region_sets().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let noise = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let u = sol.x_star() + 0.01 * noise;
            let p = dykstra_project(&sets, &u, DykstraOptions { max_sweeps: 1_000_000, tol: 1e-13 }, None)
                .unwrap()
                .point;
            assert!(inst.objective().value_aggregated(&p) >= sol.f_star - 10.0 * tol);
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let inst = GeneratorSpec::lcqp(2, 1, 2, 1, 0).generate().unwrap();
        assert!(solve_reference(&inst, 0.0).is_err());
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let inst = GeneratorSpec::lcqp(5, 5, 4, 2, 3).generate().unwrap();
        let mut opts = ReferenceOptions::new(1e-12);
        opts.max_iterations = 1;
        assert!(matches!(solve_reference_with(&inst, opts), Err(Error::NotCertified { .. })));
    }
}
