use crate::error::{Error, Result};
use crate::geometry::{build_halfspace, HalfSpace};
use crate::model::{DenseVector, ProblemInstance};
use crate::oracles::{draw_summand_batch, plain_estimate, svrg_estimate, EstimatorKind, PlainKind};

use super::{Algorithm, IterateState, SolverConfig};

/// Iterates with norm above this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Output of one relaxed projection update.
#[derive(Clone, Debug)]
pub struct RelaxedUpdate {
    /// Point after projecting onto the cut, before `Π_{C₀}`.
    pub y: DenseVector,
    pub x_next: DenseVector,
    pub halfspace: HalfSpace,
}

/// `y = Π_H(x − α v)` with `H` the linearization of constraint `j` at `x`,
/// then `x⁺ = Π_{C₀}(y)`.
pub fn relaxed_update(
    instance: &ProblemInstance,
    x: &DenseVector,
    direction: &DenseVector,
    step: f64,
    j: usize,
) -> Result<RelaxedUpdate> {
    let (phi, xi) = instance.constraint_value_and_subgradient(j, x)?;
    let halfspace = build_halfspace(phi, x, &xi)?;
    let mut y = x.clone();
    y.axpy(-step, direction, 1.0);
    if !halfspace.is_degenerate() {
        let excess = phi - step * xi.dot(direction);
        if excess > 0.0 {
            y.axpy(-excess / xi.norm_squared(), &xi, 1.0);
        }
    }
    let x_next = instance.simple_set().project(&y);
    Ok(RelaxedUpdate { y, x_next, halfspace })
}

fn commit(state: &mut IterateState, x_next: DenseVector) -> Result<()> {
    if !x_next.iter().all(|v| v.is_finite()) || x_next.norm() > DIVERGENCE_NORM {
        return Err(Error::Divergence {
            iteration: state.k,
            last_finite: state.x.clone(),
        });
    }
    state.x = x_next;
    state.k += 1;
    Ok(())
}

fn summand_batch(state: &mut IterateState, n: usize, b: usize) -> Result<Vec<usize>> {
    if b == n {
        Ok((0..n).collect())
    } else {
        draw_summand_batch(&mut state.summand_sampler, n, b)
    }
}

/// One inner iteration of VR³PM. Refreshes the snapshot at the start of
/// every epoch (`k ≡ 0 mod r`).
pub fn vr3pm_step(state: &mut IterateState, instance: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    if state.estimator.kind() != EstimatorKind::Svrg {
        return Err(Error::State("vr3pm step needs an svrg estimator".into()));
    }
    let n = instance.num_summands();
    if state.k % state.estimator.epoch_length() == 0 {
        let x = state.x.clone();
        state.estimator.refresh_in_place(instance, &x, &mut state.grad_evals);
    }
    let batch = summand_batch(state, n, state.estimator.batch())?;
    let v = svrg_estimate(&state.estimator, instance, &state.x, &batch, &mut state.grad_evals)?;
    let j = state.constraint_sampler.draw();
    let alpha = config.schedule.step(state.k, state.estimator.epoch_length());
    let update = relaxed_update(instance, &state.x, &v, alpha, j)?;
    state.projections.halfspace += 1;
    state.projections.simple_set += 1;
    commit(state, update.x_next)
}

/// VR³PM with the SVRG estimator replaced by a single-sample (`r2pm-1`),
/// mini-batch (`r2pm-b`) or full (`r2pm-n`) gradient.
pub fn r2pm_step(state: &mut IterateState, instance: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    let n = instance.num_summands();
    let (kind, batch) = match config.algorithm {
        Algorithm::R2pm1 => (PlainKind::Single, summand_batch(state, n, 1)?),
        Algorithm::R2pmB => (PlainKind::Minibatch, summand_batch(state, n, state.estimator.batch())?),
        Algorithm::R2pmN => (PlainKind::Full, Vec::new()),
        other => return Err(Error::Config(format!("r2pm step called for {other}"))),
    };
    let v = plain_estimate(kind, instance, &state.x, &batch, &mut state.grad_evals)?;
    let j = state.constraint_sampler.draw();
    let alpha = config.schedule.step(state.k, state.estimator.epoch_length());
    let update = relaxed_update(instance, &state.x, &v, alpha, j)?;
    state.projections.halfspace += 1;
    state.projections.simple_set += 1;
    commit(state, update.x_next)
}

/// `z = x − α∇f_i(x)`, `x⁺ = z − β(z − Π_{C_j}(z))`, then `Π_{C₀}` when
/// `C₀` is not the whole space.
pub fn rpm_wb_step(state: &mut IterateState, instance: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    let beta = config.relaxation;
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::Config(format!("rpm-wb relaxation β = {beta} must lie in (0, 2)")));
    }
    let n = instance.num_summands();
    let i = summand_batch(state, n, 1)?;
    let g = plain_estimate(PlainKind::Single, instance, &state.x, &i, &mut state.grad_evals)?;
    let j = state.constraint_sampler.draw();
    let set = instance.exact_projections()?[j]
        .as_ref()
        .ok_or_else(|| Error::Config(format!("constraint {j} has no exact projection")))?;
    let alpha = config.schedule.step(state.k, state.estimator.epoch_length());
    let mut z = state.x.clone();
    z.axpy(-alpha, &g, 1.0);
    let p = set.project(&z)?;
    state.projections.exact_constraint += 1;
    let mut x_next = if beta == 1.0 {
        p
    } else {
        let mut x_next = z.clone();
        x_next.axpy(-beta, &(&z - &p), 1.0);
        x_next
    };
    if !instance.simple_set().is_whole_space() {
        x_next = instance.simple_set().project(&x_next);
        state.projections.simple_set += 1;
    }
    commit(state, x_next)
}

/// Gradient step projected onto `C₀`, then a Polyak subgradient step on the
/// drawn constraint evaluated at the post-gradient point, then `Π_{C₀}`.
///
/// This is the form used for the RPM-N baseline. Unlike VR³PM, the cut is
/// built at `z` rather than at `x`.
pub fn rpm_n_step(state: &mut IterateState, instance: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    let n = instance.num_summands();
    let i = summand_batch(state, n, 1)?;
    let g = plain_estimate(PlainKind::Single, instance, &state.x, &i, &mut state.grad_evals)?;
    let j = state.constraint_sampler.draw();
    let alpha = config.schedule.step(state.k, state.estimator.epoch_length());
    let mut z = state.x.clone();
    z.axpy(-alpha, &g, 1.0);
    let c0 = instance.simple_set();
    let mut z = c0.project(&z);
    let (phi, xi) = instance.constraints()[j].value_and_subgradient(&z);
    let xi_sq = xi.norm_squared();
    if phi > 0.0 && xi_sq > 0.0 {
        z.axpy(-phi / xi_sq, &xi, 1.0);
    }
    state.projections.halfspace += 1;
    state.projections.simple_set += 2;
    let x_next = c0.project(&z);
    commit(state, x_next)
}

/// Dispatches on `config.algorithm`.
pub fn step(state: &mut IterateState, instance: &ProblemInstance, config: &SolverConfig) -> Result<()> {
    match config.algorithm {
        Algorithm::Vr3pm => vr3pm_step(state, instance, config),
        Algorithm::R2pm1 | Algorithm::R2pmB | Algorithm::R2pmN => r2pm_step(state, instance, config),
        Algorithm::RpmN => rpm_n_step(state, instance, config),
        Algorithm::RpmWb => rpm_wb_step(state, instance, config),
    }
}
