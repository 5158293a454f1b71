//! Seeded LCQP/QCQP generators and the reference solver.

mod generate;
mod reference;

pub use generate::{generate_lcqp, generate_qcqp, Family, GeneratorSpec, OPERATOR_NORM_TOL};
pub use reference::{
    solve_reference, solve_reference_with, ReferenceOptions, ReferenceSolution, REFERENCE_DIMENSION_GUIDELINE,
};

use crate::error::Result;
use crate::model::ProblemInstance;

/// Generates an instance and attaches its certified reference optimum.
pub fn generate_with_reference(spec: &GeneratorSpec, tol: f64) -> Result<(ProblemInstance, ReferenceSolution)> {
    let inst = spec.generate()?;
    let sol = solve_reference(&inst, tol)?;
    let inst = inst.with_reference(sol.record())?;
    Ok((inst, sol))
}
