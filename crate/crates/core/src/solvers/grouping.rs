use crate::error::{Error, Result};
use crate::model::{ConstraintFunction, ProblemInstance, SmoothSumObjective};

/// Replaces the `m` constraints by `m / b̄` max-groups over contiguous blocks
/// `{t·b̄, …, t·b̄ + b̄ − 1}`. The feasible set is unchanged; `b̄ = 1` returns
/// the instance as is.
pub fn apply_grouping(instance: &ProblemInstance, group_size: usize) -> Result<ProblemInstance> {
    let m = instance.num_constraints();
    if group_size == 0 || m % group_size != 0 {
        return Err(Error::Argument(format!(
            "group size {group_size} does not divide m = {m}"
        )));
    }
    if group_size == 1 {
        return Ok(instance.clone());
    }
    let groups = instance
        .constraints()
        .chunks(group_size)
        .map(|block| ConstraintFunction::max_group(block.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let objective: SmoothSumObjective = instance.objective().clone();
    ProblemInstance::new(
        objective,
        groups,
        instance.simple_set().clone(),
        instance.metadata().clone(),
    )
}
