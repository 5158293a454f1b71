//! Gradient estimators and random index samplers.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DenseVector, ProblemInstance};

/// Stream ids carved out of one run seed.
pub mod streams {
    pub const SUMMANDS: u64 = 0;
    pub const CONSTRAINTS: u64 = 1;
    pub const INITIAL_POINT: u64 = 2;
}

/// Generator for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Counts summand-gradient evaluations: one unit per `∇fᵢ` call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounter(pub u64);

impl EvalCounter {
    pub fn add(&mut self, units: usize) {
        self.0 += units as u64;
    }

    pub fn get(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Uniform,
    Weighted {
        dist: WeightedIndex<f64>,
        probabilities: Vec<f64>,
        floor: f64,
    },
}

/// Draws indices from `0..range`, either uniformly or from a probability
/// vector whose entries are all at least `ρ/range`.
#[derive(Clone, Debug)]
pub struct IndexSampler {
    range: usize,
    kind: SamplerKind,
    rng: ChaCha8Rng,
}

impl IndexSampler {
    pub fn uniform(range: usize, rng: ChaCha8Rng) -> Result<Self> {
        if range == 0 {
            return Err(Error::Argument("sampler range must be at least 1".into()));
        }
        Ok(IndexSampler {
            range,
            kind: SamplerKind::Uniform,
            rng,
        })
    }

    /// Weighted sampler; requires `Σπⱼ = 1` (to 1e-12) and `πⱼ ≥ ρ/m`.
    pub fn weighted(probabilities: Vec<f64>, floor: f64, rng: ChaCha8Rng) -> Result<Self> {
        let m = probabilities.len();
        if m == 0 {
            return Err(Error::Argument("weighted sampler needs probabilities".into()));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(Error::Argument(format!("floor ρ = {floor} must lie in (0, 1]")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!("probabilities sum to {total}, not 1")));
        }
        let min_allowed = floor / m as f64;
        if let Some((j, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= min_allowed - 1e-15))
        {
            return Err(Error::Argument(format!(
                "probability {p} of index {j} is below ρ/m = {min_allowed}"
            )));
        }
        let dist = WeightedIndex::new(&probabilities)
            .map_err(|e| Error::Argument(format!("bad probabilities: {e}")))?;
        Ok(IndexSampler {
            range: m,
            kind: SamplerKind::Weighted {
                dist,
                probabilities,
                floor,
            },
            rng,
        })
    }

    pub fn range(&self) -> usize {
        self.range
    }

    /// Declared `ρ` (1 for uniform).
    pub fn floor(&self) -> f64 {
        match &self.kind {
            SamplerKind::Uniform => 1.0,
            SamplerKind::Weighted { floor, .. } => *floor,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        match &self.kind {
            SamplerKind::Uniform => vec![1.0 / self.range as f64; self.range],
            SamplerKind::Weighted { probabilities, .. } => probabilities.clone(),
        }
    }

    pub fn draw(&mut self) -> usize {
        match &self.kind {
            SamplerKind::Uniform => self.rng.random_range(0..self.range),
            SamplerKind::Weighted { dist, .. } => dist.sample(&mut self.rng),
        }
    }
}

/// `b` i.i.d. indices from the sampler, with replacement.
pub fn draw_summand_batch(sampler: &mut IndexSampler, n: usize, b: usize) -> Result<Vec<usize>> {
    if sampler.range() != n {
        return Err(Error::Argument(format!(
            "sampler covers {} indices, expected n = {n}",
            sampler.range()
        )));
    }
    if b == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    Ok((0..b).map(|_| sampler.draw()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Svrg,
    Minibatch,
    Single,
    Full,
}

/// Non-variance-reduced estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlainKind {
    Single,
    Minibatch,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub point: DenseVector,
    pub full_gradient: DenseVector,
    instance_fingerprint: u64,
}

/// Estimator configuration plus, for SVRG, the snapshot `x̃` and `∇f(x̃)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    kind: EstimatorKind,
    batch: usize,
    epoch_length: usize,
    snapshot: Option<Snapshot>,
}

impl EstimatorState {
    /// `batch ≥ 1`; for SVRG also `epoch_length ≥ 2`.
    pub fn new(kind: EstimatorKind, batch: usize, epoch_length: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::Config("batch size b must be at least 1".into()));
        }
        if kind == EstimatorKind::Svrg && epoch_length < 2 {
            return Err(Error::Config("epoch length r must be at least 2".into()));
        }
        Ok(EstimatorState {
            kind,
            batch,
            epoch_length,
            snapshot: None,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn epoch_length(&self) -> usize {
        self.epoch_length
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        self.snapshot.as_ref()
    }

    /// Recomputes `∇f(x̃)` and compares with the stored one (costs n
    /// evaluations that are not counted; meant for audits and tests).
    pub fn verify_snapshot(&self, instance: &ProblemInstance, tol: f64) -> Result<()> {
        let snap = self
            .snapshot
            .as_ref()
            .ok_or_else(|| Error::State("no snapshot has been taken".into()))?;
        let fresh = instance.objective().gradient(&snap.point);
        let err = (&fresh - &snap.full_gradient).amax();
        if err > tol {
            return Err(Error::State(format!("snapshot gradient is stale (error {err:.3e})")));
        }
        Ok(())
    }
}

/// New snapshot at `x_new`; costs exactly `n` evaluations.
pub fn refresh_snapshot(
    state: &EstimatorState,
    instance: &ProblemInstance,
    x_new: &DenseVector,
    counter: &mut EvalCounter,
) -> Result<EstimatorState> {
    crate::model::check_point(x_new, instance.dimension())?;
    let mut next = state.clone();
    next.refresh_in_place(instance, x_new, counter);
    Ok(next)
}

impl EstimatorState {
    pub(crate) fn refresh_in_place(&mut self, instance: &ProblemInstance, x_new: &DenseVector, counter: &mut EvalCounter) {
        let full_gradient = instance.objective().gradient(x_new);
        counter.add(instance.num_summands());
        self.snapshot = Some(Snapshot {
            point: x_new.clone(),
            full_gradient,
            instance_fingerprint: instance.fingerprint(),
        });
    }
}

/// `v = (1/b) Σ_{i∈I} (∇fᵢ(x) − ∇fᵢ(x̃)) + ∇f(x̃)`; costs `2b` evaluations.
pub fn svrg_estimate(
    state: &EstimatorState,
    instance: &ProblemInstance,
    x: &DenseVector,
    batch: &[usize],
    counter: &mut EvalCounter,
) -> Result<DenseVector> {
    if state.kind != EstimatorKind::Svrg {
        return Err(Error::State(format!("estimator kind is {:?}, not svrg", state.kind)));
    }
    let snap = state
        .snapshot
        .as_ref()
        .ok_or_else(|| Error::State("svrg estimate requested before any snapshot".into()))?;
    if snap.instance_fingerprint != instance.fingerprint() || snap.point.len() != x.len() {
        return Err(Error::State("snapshot was taken on a different instance".into()));
    }
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let n = instance.num_summands();
    if let Some(i) = batch.iter().find(|&&i| i >= n) {
        return Err(Error::Argument(format!("summand index {i} out of range (n = {n})")));
    }
    let summands = instance.objective().summands();
    let scale = 1.0 / batch.len() as f64;
    let mut v = snap.full_gradient.clone();
    for &i in batch {
        summands[i].add_gradient(x, scale, &mut v);
        summands[i].add_gradient(&snap.point, -scale, &mut v);
    }
    counter.add(2 * batch.len());
    Ok(v)
}

/// Single-sample, mini-batch or full gradient. `Full` ignores the batch and
/// costs `n` evaluations; the others cost `|I|`.
pub fn plain_estimate(
    kind: PlainKind,
    instance: &ProblemInstance,
    x: &DenseVector,
    batch: &[usize],
    counter: &mut EvalCounter,
) -> Result<DenseVector> {
    let n = instance.num_summands();
    match kind {
        PlainKind::Full => {
            counter.add(n);
            Ok(instance.objective().gradient(x))
        }
        PlainKind::Single | PlainKind::Minibatch => {
            if batch.is_empty() {
                return Err(Error::Argument("empty batch".into()));
            }
            if kind == PlainKind::Single && batch.len() != 1 {
                return Err(Error::Argument(format!(
                    "single-sample estimate needs exactly one index, got {}",
                    batch.len()
                )));
            }
            if let Some(i) = batch.iter().find(|&&i| i >= n) {
                return Err(Error::Argument(format!("summand index {i} out of range (n = {n})")));
            }
            let summands = instance.objective().summands();
            let scale = 1.0 / batch.len() as f64;
            let mut v = DVector::zeros(x.len());
            for &i in batch {
                summands[i].add_gradient(x, scale, &mut v);
            }
            counter.add(batch.len());
            Ok(v)
        }
    }
}
