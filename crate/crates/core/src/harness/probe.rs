use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dykstra_project, DykstraOptions, DykstraWarmStart};
use crate::model::{DenseVector, ProblemInstance, SimpleSet};
use crate::oracles::stream_rng;

/// Half-width of the sampling box used when `C₀` is the whole space.
pub const DEFAULT_PROBE_HALF_WIDTH: f64 = 10.0;

/// Empirical lower estimate of the regularity constant
/// `dist(x, C) ≤ κ maxⱼ dist(x, Hⱼ(x))` over sampled `x ∈ C₀`.
///
/// The cuts `Hⱼ(x)` use the subgradient returned by the constraint oracle,
/// not the best one in `∂φⱼ(x)`, so `kappa_hat` is a heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// `None` when every sample was feasible.
    pub kappa_hat: Option<f64>,
    pub argmax: Option<Vec<f64>>,
    pub samples: usize,
    pub infeasible_samples: usize,
}

fn bounding_box(set: &SimpleSet, d: usize) -> (DenseVector, DenseVector) {
    match set {
        SimpleSet::WholeSpace => (
            DVector::from_element(d, -DEFAULT_PROBE_HALF_WIDTH),
            DVector::from_element(d, DEFAULT_PROBE_HALF_WIDTH),
        ),
        SimpleSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        SimpleSet::Ball { center, radius } => (center.add_scalar(-radius), center.add_scalar(*radius)),
    }
}

/// Probes with samples drawn uniformly from `C₀`. A whole-space `C₀` is
/// replaced by `[−10, 10]ᵈ`.
pub fn probe_regularity(instance: &ProblemInstance, samples: usize, seed: u64) -> Result<ProbeResult> {
    probe_regularity_in(instance, samples, seed, None)
}

/// Probes with samples drawn uniformly from `region ∩ C₀`, by rejection
/// within the bounding box of `region`.
pub fn probe_regularity_in(
    instance: &ProblemInstance,
    samples: usize,
    seed: u64,
    region: Option<&SimpleSet>,
) -> Result<ProbeResult> {
    if samples == 0 {
        return Err(Error::Argument("at least one sample is needed".into()));
    }
    let d = instance.dimension();
    let region = region.unwrap_or(instance.simple_set());
    if region.dimension().is_some_and(|rd| rd != d) {
        return Err(Error::Argument("probe region dimension mismatch".into()));
    }
    let (lo, hi) = bounding_box(region, d);
    let sets = instance.feasible_region_sets()?;
    let opts = DykstraOptions {
        max_sweeps: 1_000_000,
        tol: 1e-12,
    };
    let mut warm = DykstraWarmStart::new();
    let mut rng = stream_rng(seed, 0);

    let mut best: Option<(f64, DenseVector)> = None;
    let mut infeasible = 0;
    let mut drawn = 0;
    let mut attempts = 0usize;
    while drawn < samples {
        attempts += 1;
        if attempts > 1000 * samples {
            return Err(Error::Argument("probe region has (almost) no overlap with C₀".into()));
        }
        let x = DVector::from_fn(d, |i, _| {
            if lo[i] == hi[i] {
                lo[i]
            } else {
                rng.random_range(lo[i]..hi[i])
            }
        });
        if !region.contains(&x, 0.0) || !instance.simple_set().contains(&x, 0.0) {
            continue;
        }
        drawn += 1;

        let mut cut_dist: f64 = 0.0;
        for j in 0..instance.num_constraints() {
            let (phi, xi) = instance.constraint_value_and_subgradient(j, &x)?;
            let norm = xi.norm();
            if phi > 0.0 && norm > 0.0 {
                cut_dist = cut_dist.max(phi / norm);
            }
        }
        if instance.max_violation(&x) <= 0.0 {
            continue;
        }
        infeasible += 1;
        if cut_dist == 0.0 {
            continue;
        }
        let dist = dykstra_project(&sets, &x, opts, Some(&mut warm))?.distance;
        let ratio = dist / cut_dist;
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            best = Some((ratio, x));
        }
    }
    Ok(ProbeResult {
        kappa_hat: best.as_ref().map(|(r, _)| *r),
        argmax: best.map(|(_, x)| x.iter().copied().collect()),
        samples,
        infeasible_samples: infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintFunction, InstanceMetadata, SmoothSumObjective, SmoothSummand};
    use nalgebra::{dvector, DMatrix};

    fn planar(constraints: Vec<ConstraintFunction>) -> ProblemInstance {
        let s = SmoothSummand::quadratic_composite(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        ProblemInstance::new(
            SmoothSumObjective::new(vec![s]).unwrap(),
            constraints,
            SimpleSet::WholeSpace,
            InstanceMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_halfspace_ratio_is_one() {
        let inst = planar(vec![ConstraintFunction::affine(dvector![1.0, 2.0], 0.5).unwrap()]);
        let r = probe_regularity(&inst, 500, 1).unwrap();
        assert!(r.infeasible_samples > 0);
        assert!((r.kappa_hat.unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn redundant_constraints_ratio_is_one() {
        let c = ConstraintFunction::affine(dvector![-1.0, 1.0], 1.0).unwrap();
        let inst = planar(vec![c.clone(), c]);
        let r = probe_regularity(&inst, 500, 2).unwrap();
        assert!((r.kappa_hat.unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn orthogonal_pair_approaches_sqrt_two() {
        let inst = planar(vec![
            ConstraintFunction::affine(dvector![1.0, 0.0], 0.0).unwrap(),
            ConstraintFunction::affine(dvector![0.0, 1.0], 0.0).unwrap(),
        ]);
        let quadrant = SimpleSet::boxed(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        let r = probe_regularity_in(&inst, 2000, 3, Some(&quadrant)).unwrap();
        let k = r.kappa_hat.unwrap();
        assert!((1.30..=2f64.sqrt() + 1e-9).contains(&k), "{k}");
    }

    #[test]
    fn all_feasible_is_undefined() {
        let inst = planar(vec![ConstraintFunction::affine(dvector![1.0, 0.0], 100.0).unwrap()]);
        let r = probe_regularity(&inst, 100, 4).unwrap();
        assert_eq!(r.kappa_hat, None);
        assert_eq!(r.infeasible_samples, 0);
    }
}
