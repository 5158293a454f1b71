use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io::{read_instance, write_instance};
use crate::harness::rates::fit_rate;
use crate::instances::{solve_reference, GeneratorSpec};
use crate::model::ProblemInstance;
use crate::solvers::{apply_grouping, run, Algorithm, Budget, StepSchedule, SolverConfig};
use crate::trace::{Metric, RunStatus, RunTrace};

/// Environment variable holding the worker count; unset or 0 means one
/// worker per core.
pub const WORKERS_ENV: &str = "VR3PM_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    /// One instance per run seed, generated with `spec.seed` replaced by the
    /// run seed unless `fixed_seed` is set.
    Generate {
        spec: GeneratorSpec,
        #[serde(default)]
        fixed_seed: bool,
    },
    /// One instance shared by every seed.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct AlgorithmOverrides {
    algorithm: Algorithm,
    #[serde(default)]
    schedule: Option<StepSchedule>,
    #[serde(default)]
    batch: Option<usize>,
    #[serde(default)]
    grouping: Option<usize>,
    #[serde(default)]
    relaxation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum AlgorithmEntry {
    Name(Algorithm),
    Full(AlgorithmOverrides),
}

/// One compared algorithm with optional per-algorithm overrides. In JSON
/// either `"vr3pm"` or `{"algorithm": "vr3pm", "schedule": …}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "AlgorithmEntry", into = "AlgorithmOverrides")]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub schedule: Option<StepSchedule>,
    pub batch: Option<usize>,
    /// `Some(1)` disables grouping for this algorithm.
    pub grouping: Option<usize>,
    pub relaxation: Option<f64>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgorithmSpec {
            algorithm,
            schedule: None,
            batch: None,
            grouping: None,
            relaxation: None,
        }
    }

    pub fn with_schedule(mut self, schedule: StepSchedule) -> Self {
        self.schedule = Some(schedule);
        self
    }
}

impl From<AlgorithmEntry> for AlgorithmSpec {
    fn from(e: AlgorithmEntry) -> Self {
        match e {
            AlgorithmEntry::Name(a) => AlgorithmSpec::new(a),
            AlgorithmEntry::Full(o) => AlgorithmSpec {
                algorithm: o.algorithm,
                schedule: o.schedule,
                batch: o.batch,
                grouping: o.grouping,
                relaxation: o.relaxation,
            },
        }
    }
}

impl From<AlgorithmSpec> for AlgorithmOverrides {
    fn from(s: AlgorithmSpec) -> Self {
        AlgorithmOverrides {
            algorithm: s.algorithm,
            schedule: s.schedule,
            batch: s.batch,
            grouping: s.grouping,
            relaxation: s.relaxation,
        }
    }
}

fn default_batch() -> usize {
    5
}

fn default_grouping() -> Option<usize> {
    Some(5)
}

fn default_reference_tol() -> f64 {
    1e-8
}

fn default_row_stride() -> usize {
    1
}

/// A multi-seed comparison as a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "StepSchedule::empirical_default")]
    pub schedule: StepSchedule,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// `None` means `max(2, n / b)`.
    #[serde(default)]
    pub epoch_length: Option<usize>,
    /// Group size `b̄`. RPM-WB needs exact projections and always runs
    /// ungrouped.
    #[serde(default = "default_grouping")]
    pub grouping: Option<usize>,
    #[serde(default)]
    pub relaxation: Option<f64>,
    pub seeds: Vec<u64>,
    pub budget: Budget,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Tolerance of the reference solve; `None` in the instance source plus
    /// `skip_reference` disables gap metrics.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default)]
    pub skip_reference: bool,
    #[serde(default = "default_row_stride")]
    pub row_stride: usize,
    #[serde(default)]
    pub dist_stride: Option<usize>,
    /// Iteration window `[k_lo, k_hi]` for slope fits; default
    /// `[K/100, K]`.
    #[serde(default)]
    pub fit_window: Option<(usize, usize)>,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource, algorithms: Vec<AlgorithmSpec>, seeds: Vec<u64>, budget: Budget) -> Self {
        ExperimentConfig {
            instance,
            algorithms,
            schedule: StepSchedule::empirical_default(),
            batch: default_batch(),
            epoch_length: None,
            grouping: default_grouping(),
            relaxation: None,
            seeds,
            budget,
            out_dir: None,
            reference_tol: default_reference_tol(),
            skip_reference: false,
            row_stride: default_row_stride(),
            dist_stride: None,
            fit_window: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is needed".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is needed".into()));
        }
        if !(self.reference_tol > 0.0) {
            return Err(Error::Config("reference tolerance must be positive".into()));
        }
        if let InstanceSource::Generate { spec, .. } = &self.instance {
            spec.validate()?;
        }
        for a in &self.algorithms {
            for seed in &self.seeds {
                self.solver_config(a, *seed).validate()?;
            }
        }
        Ok(())
    }

    /// The solver configuration of one `(algorithm, seed)` run.
    pub fn solver_config(&self, spec: &AlgorithmSpec, seed: u64) -> SolverConfig {
        let mut c = SolverConfig::new(spec.algorithm, spec.schedule.unwrap_or(self.schedule), self.budget);
        c.batch = spec.batch.unwrap_or(self.batch);
        c.epoch_length = self.epoch_length;
        c.grouping = match spec.grouping.or(self.grouping) {
            _ if spec.algorithm == Algorithm::RpmWb => None,
            Some(g) if g > 1 => Some(g),
            _ => None,
        };
        if let Some(beta) = spec.relaxation.or(self.relaxation) {
            c.relaxation = beta;
        }
        c.seed = seed;
        c.row_stride = self.row_stride;
        c.dist_stride = self.dist_stride;
        c
    }
}

/// Outcome of one `(algorithm, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    pub grad_evals: u64,
    pub final_f_gap_average: Option<f64>,
    pub final_f_gap_iterate: Option<f64>,
    pub final_max_violation_average: f64,
    pub final_dist2_c_average: Option<f64>,
    pub slope_f_gap_average: Option<f64>,
    pub slope_dist2_c_average: Option<f64>,
    pub csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub diverged: usize,
    pub median_final_f_gap_average: Option<f64>,
    pub median_final_f_gap_iterate: Option<f64>,
    pub median_final_max_violation_average: Option<f64>,
    pub median_final_dist2_c_average: Option<f64>,
    pub median_slope_f_gap_average: Option<f64>,
    pub median_slope_dist2_c_average: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub seed: u64,
    pub fingerprint: String,
    pub f_star: Option<f64>,
    pub reference_residual: Option<f64>,
    pub reference_max_violation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub instances: Vec<InstanceRecord>,
    pub runs: Vec<RunRecord>,
    pub algorithms: Vec<AlgorithmSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub traces: Vec<RunTrace>,
    pub summary: ExperimentSummary,
}

/// Median of the finite values; `None` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

fn slope(trace: &RunTrace, metric: Metric, window: Option<(usize, usize)>) -> Option<f64> {
    let last = trace.last_row().iter;
    let window = window.unwrap_or(((last / 100).max(1), last));
    fit_rate(&trace.rows, metric, window).ok().map(|f| f.slope)
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let workers = std::env::var(WORKERS_ENV)
        .ok()
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a non-negative integer, got `{v}`")))
        })
        .transpose()?
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))
}

fn prepare_instance(config: &ExperimentConfig, seed: u64) -> Result<(ProblemInstance, InstanceRecord)> {
    let inst = match &config.instance {
        InstanceSource::Generate { spec, fixed_seed } => {
            if *fixed_seed {
                spec.generate()?
            } else {
                spec.with_seed(seed).generate()?
            }
        }
        InstanceSource::File { path } => read_instance(path)?,
    };
    let mut record = InstanceRecord {
        seed,
        fingerprint: format!("{:016x}", inst.fingerprint()),
        f_star: inst.reference().map(|r| r.f_star),
        reference_residual: None,
        reference_max_violation: None,
    };
    if config.skip_reference || inst.reference().is_some() {
        return Ok((inst, record));
    }
    let sol = solve_reference(&inst, config.reference_tol)?;
    record.f_star = Some(sol.f_star);
    record.reference_residual = Some(sol.residual);
    record.reference_max_violation = Some(sol.max_violation);
    Ok((inst.with_reference(sol.record())?, record))
}

fn shares_instance(source: &InstanceSource) -> bool {
    match source {
        InstanceSource::Generate { fixed_seed, .. } => *fixed_seed,
        InstanceSource::File { .. } => true,
    }
}

/// Runs every `(algorithm, seed)` pair on a worker pool, writes
/// `<algorithm>_seed<seed>.csv` per run plus `summary.json` when an output
/// directory is configured, and summarizes per algorithm.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let pool = worker_pool()?;

    let prepared: Vec<(ProblemInstance, InstanceRecord)> = pool.install(|| {
        if shares_instance(&config.instance) {
            let (inst, rec) = prepare_instance(config, config.seeds[0])?;
            Ok(config
                .seeds
                .iter()
                .map(|&s| (inst.clone(), InstanceRecord { seed: s, ..rec.clone() }))
                .collect())
        } else {
            config.seeds.par_iter().map(|&s| prepare_instance(config, s)).collect::<Result<Vec<_>>>()
        }
    })?;
    for (inst, _) in prepared.iter().take(if shares_instance(&config.instance) { 1 } else { usize::MAX }) {
        for a in &config.algorithms {
            let solver = config.solver_config(a, 0);
            match solver.grouping {
                Some(g) => solver.validate_for(&apply_grouping(inst, g)?)?,
                None => solver.validate_for(inst)?,
            }
        }
    }
    if let Some(dir) = &config.out_dir {
        for (inst, rec) in &prepared {
            write_instance(inst, &dir.join(format!("instance_seed{}.json", rec.seed)))?;
            if shares_instance(&config.instance) {
                break;
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..config.algorithms.len())
        .flat_map(|a| (0..config.seeds.len()).map(move |s| (a, s)))
        .collect();
    let results: Vec<(RunTrace, RunRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ai, si)| {
                let spec = &config.algorithms[ai];
                let seed = config.seeds[si];
                let instance = &prepared[si].0;
                let solver = config.solver_config(spec, seed);
                let trace = match run(instance, &solver) {
                    Ok(t) => t,
                    Err(Error::RunDiverged { iteration, trace }) => {
                        log::warn!("{} seed {seed} diverged at iteration {iteration}", spec.algorithm);
                        *trace
                    }
                    Err(e) => return Err(e),
                };
                let csv = match &config.out_dir {
                    Some(dir) => {
                        let name = format!("{}_seed{seed}.csv", spec.algorithm);
                        trace.write_csv(&dir.join(&name))?;
                        Some(name)
                    }
                    None => None,
                };
                let s = &trace.summary;
                let record = RunRecord {
                    algorithm: spec.algorithm,
                    seed,
                    status: s.status.clone(),
                    iterations: s.iterations,
                    grad_evals: s.grad_evals,
                    final_f_gap_average: s.final_f_gap_average,
                    final_f_gap_iterate: s.final_f_gap_iterate,
                    final_max_violation_average: s.final_max_violation_average,
                    final_dist2_c_average: s.final_dist2_c_average,
                    slope_f_gap_average: slope(&trace, Metric::FGapAverage, config.fit_window),
                    slope_dist2_c_average: slope(&trace, Metric::Dist2CAverage, config.fit_window),
                    csv,
                };
                Ok((trace, record))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let (traces, runs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let algorithms = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(ai, spec)| {
            let rs = &runs[ai * config.seeds.len()..(ai + 1) * config.seeds.len()];
            AlgorithmSummary {
                algorithm: spec.algorithm,
                runs: rs.len(),
                diverged: rs.iter().filter(|r| r.status != RunStatus::Completed).count(),
                median_final_f_gap_average: median(rs.iter().filter_map(|r| r.final_f_gap_average)),
                median_final_f_gap_iterate: median(rs.iter().filter_map(|r| r.final_f_gap_iterate)),
                median_final_max_violation_average: median(rs.iter().map(|r| r.final_max_violation_average)),
                median_final_dist2_c_average: median(rs.iter().filter_map(|r| r.final_dist2_c_average)),
                median_slope_f_gap_average: median(rs.iter().filter_map(|r| r.slope_f_gap_average)),
                median_slope_dist2_c_average: median(rs.iter().filter_map(|r| r.slope_dist2_c_average)),
            }
        })
        .collect();
    let summary = ExperimentSummary {
        instances: prepared.into_iter().map(|(_, r)| r).collect(),
        runs,
        algorithms,
    };
    if let Some(dir) = &config.out_dir {
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(ExperimentOutcome { traces, summary })
}
