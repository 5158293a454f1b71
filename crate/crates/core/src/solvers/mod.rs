//! Iteration engines: VR³PM, the R²PM estimator ablations, and the RPM-N /
//! RPM-WB baselines, plus schedules, constraint grouping and the run loop.

mod grouping;
mod run;
mod schedule;
mod steps;

pub use grouping::apply_grouping;
pub use run::{initial_point, run};
pub use schedule::StepSchedule;
pub use steps::{
    r2pm_step, relaxed_update, rpm_n_step, rpm_wb_step, step, vr3pm_step, RelaxedUpdate,
};

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DenseVector, ProblemInstance};
use crate::oracles::{stream_rng, streams, EstimatorKind, EstimatorState, EvalCounter, IndexSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "vr3pm")]
    Vr3pm,
    #[serde(rename = "r2pm-1")]
    R2pm1,
    #[serde(rename = "r2pm-b")]
    R2pmB,
    #[serde(rename = "r2pm-n")]
    R2pmN,
    #[serde(rename = "rpm-n")]
    RpmN,
    #[serde(rename = "rpm-wb")]
    RpmWb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Vr3pm,
        Algorithm::R2pm1,
        Algorithm::R2pmB,
        Algorithm::R2pmN,
        Algorithm::RpmN,
        Algorithm::RpmWb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Vr3pm => "vr3pm",
            Algorithm::R2pm1 => "r2pm-1",
            Algorithm::R2pmB => "r2pm-b",
            Algorithm::R2pmN => "r2pm-n",
            Algorithm::RpmN => "rpm-n",
            Algorithm::RpmWb => "rpm-wb",
        }
    }

    pub fn estimator_kind(&self) -> EstimatorKind {
        match self {
            Algorithm::Vr3pm => EstimatorKind::Svrg,
            Algorithm::R2pmB => EstimatorKind::Minibatch,
            Algorithm::R2pmN => EstimatorKind::Full,
            Algorithm::R2pm1 | Algorithm::RpmN | Algorithm::RpmWb => EstimatorKind::Single,
        }
    }

    /// Average gradient evaluations per iteration, used to size metric strides
    /// under a gradient budget.
    pub fn evals_per_iteration(&self, n: usize, batch: usize, epoch_length: usize) -> f64 {
        match self {
            Algorithm::Vr3pm => {
                let b = if batch == n { n } else { batch };
                2.0 * b as f64 + n as f64 / epoch_length.max(1) as f64
            }
            Algorithm::R2pmB => batch as f64,
            Algorithm::R2pmN => n as f64,
            Algorithm::R2pm1 | Algorithm::RpmN | Algorithm::RpmWb => 1.0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown algorithm `{s}`")))
    }
}

/// Distribution of the constraint index `j_k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSampling {
    #[default]
    Uniform,
    /// Probabilities over the (possibly grouped) constraints, each at least
    /// `rho / m`.
    Weighted { probabilities: Vec<f64>, rho: f64 },
}

/// When a run stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Iterations(usize),
    /// Stop at the first iteration boundary with at least this many
    /// summand-gradient evaluations.
    GradEvals(u64),
    /// Stop once algorithm time (metric evaluation excluded) reaches this
    /// many milliseconds. Not reproducible across machines.
    WallMillis(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialPoint {
    /// i.i.d. uniform on [0, 1]ᵈ from the run seed, projected onto `C₀`.
    #[default]
    UniformUnitCube,
    Zero,
    Given { x: Vec<f64> },
}

fn default_batch() -> usize {
    5
}

fn default_relaxation() -> f64 {
    1.0
}

fn default_row_stride() -> usize {
    1
}

/// Everything a run needs besides the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    /// Mini-batch size `b`. With `b = n` the batch is the full index set.
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Epoch length `r`; `None` means `max(2, n / b)`.
    #[serde(default)]
    pub epoch_length: Option<usize>,
    #[serde(default)]
    pub constraint_sampling: ConstraintSampling,
    /// Group size `b̄`; constraints are replaced by maxima over contiguous
    /// blocks of `b̄`.
    #[serde(default)]
    pub grouping: Option<usize>,
    /// RPM-WB relaxation `β ∈ (0, 2)`.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
    #[serde(default)]
    pub seed: u64,
    pub budget: Budget,
    /// Declared regularity constant, recorded in the trace header.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Declared sampling floor, recorded in the trace header.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub initial_point: InitialPoint,
    /// Iterations between distance-to-`C` evaluations; `None` means
    /// `⌈K / 500⌉`.
    #[serde(default)]
    pub dist_stride: Option<usize>,
    /// Iterations between recorded trace rows.
    #[serde(default = "default_row_stride")]
    pub row_stride: usize,
    /// Keep every iterate in the trace (memory heavy, for audits).
    #[serde(default)]
    pub keep_iterates: bool,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, schedule: StepSchedule, budget: Budget) -> Self {
        SolverConfig {
            algorithm,
            schedule,
            batch: default_batch(),
            epoch_length: None,
            constraint_sampling: ConstraintSampling::Uniform,
            grouping: None,
            relaxation: default_relaxation(),
            seed: 0,
            budget,
            kappa: None,
            rho: None,
            initial_point: InitialPoint::UniformUnitCube,
            dist_stride: None,
            row_stride: default_row_stride(),
            keep_iterates: false,
        }
    }

    pub fn epoch_length_for(&self, n: usize) -> usize {
        self.epoch_length.unwrap_or_else(|| (n / self.batch.max(1)).max(2))
    }

    /// Instance-independent checks.
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.batch == 0 {
            return Err(Error::Config("batch size b must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Vr3pm {
            if let Some(r) = self.epoch_length {
                if r < 2 {
                    return Err(Error::Config("vr3pm needs epoch length r ≥ 2".into()));
                }
            }
        }
        if matches!(self.schedule, StepSchedule::EpochConstant { .. }) && self.epoch_length == Some(0) {
            return Err(Error::Config("epoch-constant schedule needs r ≥ 1".into()));
        }
        if self.algorithm == Algorithm::RpmWb {
            if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
                return Err(Error::Config(format!(
                    "rpm-wb relaxation β = {} must lie in (0, 2)",
                    self.relaxation
                )));
            }
            if self.grouping.is_some_and(|g| g > 1) {
                return Err(Error::Config(
                    "rpm-wb needs exact projections; grouped constraints have none".into(),
                ));
            }
        }
        if self.grouping == Some(0) {
            return Err(Error::Config("group size must be at least 1".into()));
        }
        if self.row_stride == 0 || self.dist_stride == Some(0) {
            return Err(Error::Config("strides must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks against the instance the steps will run on (after grouping).
    pub fn validate_for(&self, instance: &ProblemInstance) -> Result<()> {
        self.validate()?;
        let n = instance.num_summands();
        if matches!(self.algorithm, Algorithm::Vr3pm | Algorithm::R2pmB) && self.batch > n {
            return Err(Error::Config(format!("batch size {} exceeds n = {n}", self.batch)));
        }
        if instance.num_constraints() == 0 {
            return Err(Error::Config("instance has no constraints".into()));
        }
        if let ConstraintSampling::Weighted { probabilities, .. } = &self.constraint_sampling {
            if probabilities.len() != instance.num_constraints() {
                return Err(Error::Config(format!(
                    "{} sampling probabilities for {} constraints",
                    probabilities.len(),
                    instance.num_constraints()
                )));
            }
        }
        if self.algorithm == Algorithm::RpmWb {
            let sets = instance.exact_projections()?;
            if let Some(j) = sets.iter().position(|s| s.is_none()) {
                return Err(Error::Config(format!("constraint {j} has no exact projection (rpm-wb)")));
            }
        }
        if let InitialPoint::Given { x } = &self.initial_point {
            if x.len() != instance.dimension() {
                return Err(Error::Config("initial point has the wrong dimension".into()));
            }
        }
        Ok(())
    }
}

/// Per-kind projection counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionCounts {
    pub halfspace: u64,
    pub simple_set: u64,
    pub exact_constraint: u64,
}

/// Mutable state of one run.
#[derive(Clone, Debug)]
pub struct IterateState {
    /// Iterations completed.
    pub k: usize,
    pub x: DenseVector,
    pub estimator: EstimatorState,
    pub summand_sampler: IndexSampler,
    pub constraint_sampler: IndexSampler,
    pub grad_evals: EvalCounter,
    pub projections: ProjectionCounts,
    pub elapsed: Duration,
}

impl IterateState {
    /// Fresh state at `x0` with samplers seeded from `config.seed`.
    pub fn new(instance: &ProblemInstance, config: &SolverConfig, x0: DenseVector) -> Result<Self> {
        crate::model::check_point(&x0, instance.dimension())?;
        let n = instance.num_summands();
        let estimator = EstimatorState::new(
            config.algorithm.estimator_kind(),
            config.batch,
            config.epoch_length_for(n),
        )?;
        let summand_sampler = IndexSampler::uniform(n, stream_rng(config.seed, streams::SUMMANDS))?;
        let constraint_rng = stream_rng(config.seed, streams::CONSTRAINTS);
        let constraint_sampler = match &config.constraint_sampling {
            ConstraintSampling::Uniform => IndexSampler::uniform(instance.num_constraints(), constraint_rng)?,
            ConstraintSampling::Weighted { probabilities, rho } => {
                IndexSampler::weighted(probabilities.clone(), *rho, constraint_rng)?
            }
        };
        Ok(IterateState {
            k: 0,
            x: x0,
            estimator,
            summand_sampler,
            constraint_sampler,
            grad_evals: EvalCounter::default(),
            projections: ProjectionCounts::default(),
            elapsed: Duration::ZERO,
        })
    }

    pub fn epoch(&self) -> usize {
        self.k / self.estimator.epoch_length().max(1)
    }
}
