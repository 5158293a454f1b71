use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Metric, TraceRow};

pub const MIN_FIT_POINTS: usize = 20;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed_0fa7e;

/// Least-squares fit of `log(metric) = intercept + slope · log(k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% residual-bootstrap interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
    /// Rows inside the window skipped for a nonpositive or non-finite value.
    pub dropped: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Fits a power law to `(k, value)` pairs. Pairs with `k = 0` or a
/// nonpositive or non-finite value are dropped.
pub fn fit_power_law(ks: &[f64], values: &[f64]) -> Result<RateFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&k, &v) in ks.iter().zip(values) {
        if k > 0.0 && v > 0.0 && v.is_finite() {
            xs.push(k.ln());
            ys.push(v.ln());
        }
    }
    let dropped = ks.len().min(values.len()) - xs.len();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points, at least {MIN_FIT_POINTS} needed",
            xs.len()
        )));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::InsufficientData("all points share one k".into()));
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let fitted: Vec<f64> = xs.iter().map(|x| intercept + slope * x).collect();
    let residuals: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| y - f).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut resampled = vec![0.0; xs.len()];
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for (y, f) in resampled.iter_mut().zip(&fitted) {
                *y = f + residuals[rng.random_range(0..residuals.len())];
            }
            least_squares(&xs, &resampled).0
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    Ok(RateFit {
        slope,
        intercept,
        ci_low: quantile(&slopes, 0.025),
        ci_high: quantile(&slopes, 0.975),
        points: xs.len(),
        dropped,
    })
}

/// Log-log slope of `metric` over rows with `k_lo ≤ iter ≤ k_hi`.
pub fn fit_rate(rows: &[TraceRow], metric: Metric, window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::Argument(format!("empty window [{lo}, {hi}]")));
    }
    let (ks, values): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.iter >= lo && r.iter <= hi)
        .map(|r| (r.iter as f64, metric.of(r)))
        .unzip();
    fit_power_law(&ks, &values)
}
