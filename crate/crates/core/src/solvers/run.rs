use std::borrow::Cow;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::harness::metrics::MetricEvaluator;
use crate::model::{DenseVector, ProblemInstance};
use crate::oracles::{stream_rng, streams};
use crate::trace::{finite, RunStatus, RunTrace, TraceHeader, TraceRow, TraceSummary};

use super::{apply_grouping, step, Budget, InitialPoint, IterateState, SolverConfig};

/// Number of distance evaluations a run aims for.
const DIST_SAMPLES: usize = 500;
/// Distance stride under a wall-time budget, where `K` is unknown.
const WALL_BUDGET_DIST_STRIDE: usize = 1000;

/// Starting point from `config.initial_point`, projected onto `C₀`.
pub fn initial_point(instance: &ProblemInstance, config: &SolverConfig) -> Result<DenseVector> {
    let d = instance.dimension();
    let raw = match &config.initial_point {
        InitialPoint::UniformUnitCube => {
            let mut rng = stream_rng(config.seed, streams::INITIAL_POINT);
            DVector::from_fn(d, |_, _| rng.random::<f64>())
        }
        InitialPoint::Zero => DVector::zeros(d),
        InitialPoint::Given { x } => DVector::from_column_slice(x),
    };
    crate::model::check_point(&raw, d)?;
    Ok(instance.simple_set().project(&raw))
}

struct Recorder<'a> {
    instance: &'a ProblemInstance,
    metrics: MetricEvaluator,
    rows: Vec<TraceRow>,
    dist_stride: usize,
    row_stride: usize,
    lower_bound_seen: bool,
}

impl Recorder<'_> {
    fn record(&mut self, state: &IterateState, average: &DenseVector, with_dist: bool) -> Result<()> {
        let dist2 = if with_dist {
            let (d2, lb) = self.metrics.dist2(average)?;
            self.lower_bound_seen |= lb;
            d2
        } else {
            f64::NAN
        };
        self.rows.push(TraceRow {
            iter: state.k,
            epoch: state.epoch(),
            time_s: state.elapsed.as_secs_f64(),
            grad_evals: state.grad_evals.get(),
            f_gap_iterate: self.metrics.f_gap(self.instance, &state.x).unwrap_or(f64::NAN),
            f_gap_average: self.metrics.f_gap(self.instance, average).unwrap_or(f64::NAN),
            max_violation_average: self.instance.max_violation(average),
            dist2_c_average: dist2,
        });
        Ok(())
    }
}

/// Runs the configured algorithm until the budget is spent.
///
/// Row `k` reports the iterate `xᵏ` and the running average
/// `x̄ᵏ = (1/k) Σ_{t<k} xᵗ` (`x̄⁰ = x⁰`). Metrics are always measured on the
/// ungrouped `instance` against its stored reference, if any.
pub fn run(instance: &ProblemInstance, config: &SolverConfig) -> Result<RunTrace> {
    config.validate()?;
    let solver_instance: Cow<ProblemInstance> = match config.grouping {
        Some(g) if g > 1 => Cow::Owned(apply_grouping(instance, g)?),
        _ => Cow::Borrowed(instance),
    };
    let solver_instance = solver_instance.as_ref();
    config.validate_for(solver_instance)?;

    let n = instance.num_summands();
    let epoch_length = config.epoch_length_for(n);
    let expected_iterations = match config.budget {
        Budget::Iterations(k) => Some(k),
        Budget::GradEvals(g) => {
            let per = config.algorithm.evals_per_iteration(n, config.batch, epoch_length);
            Some((g as f64 / per).ceil() as usize)
        }
        Budget::WallMillis(_) => None,
    };
    let dist_stride = config.dist_stride.unwrap_or_else(|| match expected_iterations {
        Some(k) => k.div_ceil(DIST_SAMPLES).max(1),
        None => WALL_BUDGET_DIST_STRIDE,
    });

    let x0 = initial_point(instance, config)?;
    let mut state = IterateState::new(solver_instance, config, x0)?;
    let mut recorder = Recorder {
        instance,
        metrics: MetricEvaluator::new(instance)?,
        rows: Vec::new(),
        dist_stride,
        row_stride: config.row_stride,
        lower_bound_seen: false,
    };
    let mut iterates = config.keep_iterates.then(|| vec![state.x.clone()]);

    let mut sum = DVector::zeros(instance.dimension());
    let mut average = state.x.clone();
    recorder.record(&state, &average, true)?;

    let header = TraceHeader {
        algorithm: config.algorithm,
        schedule: config.schedule,
        seed: config.seed,
        prng: crate::PRNG_NAME.to_string(),
        instance_fingerprint: format!("{:016x}", instance.fingerprint()),
        family: instance.metadata().family.clone(),
        n,
        m: instance.num_constraints(),
        m_solver: solver_instance.num_constraints(),
        d: instance.dimension(),
        batch: config.batch,
        epoch_length,
        grouping: config.grouping,
        relaxation: config.relaxation,
        budget: config.budget,
        dist_stride,
        f_star: recorder.metrics.f_star(),
        kappa: config.kappa,
        rho: config.rho,
    };

    let mut status = RunStatus::Completed;
    loop {
        let done = match config.budget {
            Budget::Iterations(k) => state.k >= k,
            Budget::GradEvals(g) => state.grad_evals.get() >= g,
            Budget::WallMillis(ms) => state.elapsed.as_millis() >= u128::from(ms),
        };
        if done {
            break;
        }
        sum += &state.x;
        let started = Instant::now();
        let outcome = step(&mut state, solver_instance, config);
        state.elapsed += started.elapsed();
        match outcome {
            Ok(()) => {}
            Err(Error::Divergence { iteration, .. }) => {
                status = RunStatus::Diverged { iteration };
                sum -= &state.x;
                break;
            }
            Err(e) => return Err(e),
        }
        if let Some(its) = iterates.as_mut() {
            its.push(state.x.clone());
        }
        average = &sum / state.k as f64;
        if state.k % recorder.row_stride == 0 {
            let with_dist = state.k % recorder.dist_stride == 0;
            recorder.record(&state, &average, with_dist)?;
        }
    }

    // The final row always carries every metric.
    let last_iter = recorder.rows.last().map(|r| r.iter);
    if last_iter != Some(state.k) {
        recorder.record(&state, &average, true)?;
    } else if recorder.rows.last().is_some_and(|r| r.dist2_c_average.is_nan()) {
        recorder.rows.pop();
        recorder.record(&state, &average, true)?;
    }

    let last = *recorder.rows.last().expect("initial row recorded");
    let summary = TraceSummary {
        status: status.clone(),
        iterations: state.k,
        grad_evals: state.grad_evals.get(),
        halfspace_projections: state.projections.halfspace,
        exact_projections: state.projections.exact_constraint,
        final_f_gap_iterate: finite(last.f_gap_iterate),
        final_f_gap_average: finite(last.f_gap_average),
        final_max_violation_average: last.max_violation_average,
        final_dist2_c_average: finite(last.dist2_c_average),
        dist_lower_bound: recorder.lower_bound_seen,
        final_iterate: state.x.iter().copied().collect(),
        final_average: average.iter().copied().collect(),
    };
    let trace = RunTrace {
        header,
        rows: recorder.rows,
        summary,
        iterates,
    };
    match status {
        RunStatus::Completed => Ok(trace),
        RunStatus::Diverged { iteration } => Err(Error::RunDiverged {
            iteration,
            trace: Box::new(trace),
        }),
    }
}
