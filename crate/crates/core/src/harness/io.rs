//! JSON instance files. Matrices are row-major nested arrays.
//!
//! ```json
//! {
//!   "d": 2, "n": 1, "m": 1, "family": "custom", "seed": null,
//!   "summands": [{"kind": "quadratic_composite", "matrix": [[1, 0], [0, 1]], "linear": [0, 0]}],
//!   "constraints": [{"kind": "affine", "normal": [1, 0], "offset": -1}],
//!   "simple_set": {"kind": "whole_space"}
//! }
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};
use crate::model::{
    ConstraintFunction, InstanceMetadata, ProblemInstance, ReferenceRecord, SimpleSet, SmoothSumObjective,
    SmoothSummand,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummandFile {
    QuadraticComposite { matrix: Vec<Vec<f64>>, linear: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintFile {
    Affine {
        normal: Vec<f64>,
        offset: f64,
    },
    Quadratic {
        matrix: Vec<Vec<f64>>,
        linear: Vec<f64>,
        offset: f64,
    },
    MaxGroup {
        members: Vec<ConstraintFile>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimpleSetFile {
    WholeSpace,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub family: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strictly_feasible_origin: Option<bool>,
    pub summands: Vec<SummandFile>,
    pub constraints: Vec<ConstraintFile>,
    pub simple_set: SimpleSetFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceFile>,
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn matrix(rows: &[Vec<f64>], d: usize, what: &str) -> Result<nalgebra::DMatrix<f64>> {
    matrix_from_rows(rows, d).ok_or_else(|| Error::Argument(format!("{what}: every row must have length {d}")))
}

fn constraint_to_file(c: &ConstraintFunction) -> ConstraintFile {
    match c {
        ConstraintFunction::Affine { normal, offset } => ConstraintFile::Affine {
            normal: vector(normal),
            offset: *offset,
        },
        ConstraintFunction::Quadratic { matrix, linear, offset } => ConstraintFile::Quadratic {
            matrix: matrix_to_rows(matrix),
            linear: vector(linear),
            offset: *offset,
        },
        ConstraintFunction::MaxGroup(members) => ConstraintFile::MaxGroup {
            members: members.iter().map(constraint_to_file).collect(),
        },
    }
}

fn constraint_from_file(c: &ConstraintFile, d: usize) -> Result<ConstraintFunction> {
    match c {
        ConstraintFile::Affine { normal, offset } => {
            ConstraintFunction::affine(DVector::from_column_slice(normal), *offset)
        }
        ConstraintFile::Quadratic { matrix: rows, linear, offset } => ConstraintFunction::quadratic(
            matrix(rows, d, "constraint matrix")?,
            DVector::from_column_slice(linear),
            *offset,
        ),
        ConstraintFile::MaxGroup { members } => ConstraintFunction::max_group(
            members
                .iter()
                .map(|m| constraint_from_file(m, d))
                .collect::<Result<Vec<_>>>()?,
        ),
    }
}

impl InstanceFile {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let meta = instance.metadata();
        InstanceFile {
            d: instance.dimension(),
            n: instance.num_summands(),
            m: instance.num_constraints(),
            family: meta.family.clone(),
            seed: meta.seed,
            strictly_feasible_origin: meta.strictly_feasible_origin,
            summands: instance
                .objective()
                .summands()
                .iter()
                .map(|s| match s {
                    SmoothSummand::QuadraticComposite { matrix, linear } => SummandFile::QuadraticComposite {
                        matrix: matrix_to_rows(matrix),
                        linear: vector(linear),
                    },
                })
                .collect(),
            constraints: instance.constraints().iter().map(constraint_to_file).collect(),
            simple_set: match instance.simple_set() {
                SimpleSet::WholeSpace => SimpleSetFile::WholeSpace,
                SimpleSet::Box { lower, upper } => SimpleSetFile::Box {
                    lower: vector(lower),
                    upper: vector(upper),
                },
                SimpleSet::Ball { center, radius } => SimpleSetFile::Ball {
                    center: vector(center),
                    radius: *radius,
                },
            },
            reference: meta.reference.as_ref().map(|r| ReferenceFile {
                x_star: vector(&r.x_star),
                f_star: r.f_star,
                tolerance: r.tolerance,
            }),
        }
    }

    pub fn into_instance(self) -> Result<ProblemInstance> {
        let d = self.d;
        if self.summands.len() != self.n {
            return Err(Error::Argument(format!("n = {} but {} summands given", self.n, self.summands.len())));
        }
        if self.constraints.len() != self.m {
            return Err(Error::Argument(format!(
                "m = {} but {} constraints given",
                self.m,
                self.constraints.len()
            )));
        }
        let summands = self
            .summands
            .iter()
            .map(|s| match s {
                SummandFile::QuadraticComposite { matrix: rows, linear } => SmoothSummand::quadratic_composite(
                    matrix(rows, d, "summand matrix")?,
                    DVector::from_column_slice(linear),
                ),
            })
            .collect::<Result<Vec<_>>>()?;
        let objective = SmoothSumObjective::new(summands)?.with_lipschitz_constants();
        if objective.dimension() != d {
            return Err(Error::Argument(format!("summands have dimension {}, d = {d}", objective.dimension())));
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| constraint_from_file(c, d))
            .collect::<Result<Vec<_>>>()?;
        let simple_set = match self.simple_set {
            SimpleSetFile::WholeSpace => SimpleSet::WholeSpace,
            SimpleSetFile::Box { lower, upper } => {
                SimpleSet::boxed(DVector::from_vec(lower), DVector::from_vec(upper))?
            }
            SimpleSetFile::Ball { center, radius } => SimpleSet::ball(DVector::from_vec(center), radius)?,
        };
        let metadata = InstanceMetadata {
            family: if self.family.is_empty() { "custom".into() } else { self.family },
            seed: self.seed,
            strictly_feasible_origin: self.strictly_feasible_origin,
            reference: self.reference.map(|r| ReferenceRecord {
                x_star: DVector::from_vec(r.x_star),
                f_star: r.f_star,
                tolerance: r.tolerance,
            }),
        };
        ProblemInstance::new(objective, constraints, simple_set, metadata)
    }
}

pub fn instance_to_json(instance: &ProblemInstance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(instance))?)
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn write_instance(instance: &ProblemInstance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_json(instance)?)?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}
