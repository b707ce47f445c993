//! Scaling fits, equilibrium tail tables and autocorrelation decay rates.

use curvmix_core::events::{derive_key, index, rng_from_key};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("invalid data: {0}")]
    InvalidData(&'static str),
    #[error("undefined estimate: {0}")]
    Undefined(&'static str),
}

/// Least-squares line `y = slope x + intercept` with its `R^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit, StatsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(StatsError::InvalidData("need two or more paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::InvalidData("all abscissae equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LineFit { slope, intercept, r2 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    /// exponent of `value ~ L^z`
    pub z: f64,
    pub intercept: f64,
    /// root mean square of the log residuals
    pub residual: f64,
    /// 2.5% and 97.5% quantiles of `z` over bootstrap resamples of the points
    pub band: (f64, f64),
}

const BOOTSTRAP: usize = 1000;

/// Least-squares slope of `ln value` against `ln L`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::InvalidData("need at least three points"));
    }
    if points.iter().any(|&(l, v)| !(l > 0.0) || !(v > 0.0)) {
        return Err(StatsError::InvalidData("sizes and values must be positive"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = line_fit(&xs, &ys)?;
    let n = xs.len();
    let residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2)).sum::<f64>() / n as f64).sqrt();
    // resamples with a single distinct size carry no slope and are skipped
    let mut rng = rng_from_key(derive_key(0x5ca1e, &[n as u64]));
    let mut zs = Vec::with_capacity(BOOTSTRAP);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    while zs.len() < BOOTSTRAP {
        for k in 0..n {
            let j = index(&mut rng, n);
            bx[k] = xs[j];
            by[k] = ys[j];
        }
        if let Ok(f) = line_fit(&bx, &by) {
            zs.push(f.slope);
        }
    }
    zs.sort_by(f64::total_cmp);
    let q = |p: f64| zs[((zs.len() - 1) as f64 * p).round() as usize];
    Ok(ScalingFit { points: points.to_vec(), z: fit.slope, intercept: fit.intercept, residual, band: (q(0.025), q(0.975)) })
}

/// Median of a nonempty sample.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    // the exact endpoints at k = 0 and k = n, free of rounding
    let lo = if k == 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub threshold: f64,
    pub count: usize,
    pub tail_prob: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const MIN_SAMPLES: usize = 1000;

/// `max_i |eta_i - reference_i|` of one configuration.
pub fn max_deviation(sample: &[i64], reference: &[f64]) -> f64 {
    sample.iter().zip(reference).map(|(&h, r)| (h as f64 - r).abs()).fold(0.0, f64::max)
}

/// Empirical `P(max deviation > H)` for each threshold `H`, with Wilson
/// intervals.
pub fn fluctuation_stats(
    samples: &[Vec<i64>],
    reference: &[f64],
    thresholds: &[f64],
) -> Result<Vec<TailRow>, StatsError> {
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::InvalidData("need at least 1000 samples"));
    }
    if samples.iter().any(|s| s.len() != reference.len()) {
        return Err(StatsError::InvalidData("sample and reference lengths differ"));
    }
    let mut devs: Vec<f64> = samples.iter().map(|s| max_deviation(s, reference)).collect();
    devs.sort_by(f64::total_cmp);
    let n = devs.len();
    Ok(thresholds
        .iter()
        .map(|&h| {
            let count = n - devs.partition_point(|&d| d <= h);
            let (ci_lo, ci_hi) = wilson(count, n);
            TailRow { threshold: h, count, tail_prob: count as f64 / n as f64, ci_lo, ci_hi }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// smallest and largest estimate over the four quarters of the series
    pub band: (f64, f64),
}

fn decay_rate(series: &[f64], dt: f64, lags: (usize, usize)) -> Result<f64, StatsError> {
    let n = series.len();
    if lags.1 >= n / 2 {
        return Err(StatsError::Undefined("lag window longer than half the series"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let cov = |k: usize| -> f64 {
        let m = n - k;
        (0..m).map(|i| (series[i] - mean) * (series[i + k] - mean)).sum::<f64>() / m as f64
    };
    let c0 = cov(0);
    if !(c0 > 1e-300) {
        return Err(StatsError::Undefined("observable has no variance"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in lags.0..=lags.1 {
        let c = cov(k);
        if c <= 0.0 {
            break;
        }
        xs.push(k as f64 * dt);
        ys.push((c / c0).ln());
    }
    if xs.len() < 2 {
        return Err(StatsError::Undefined("autocovariance not positive on the window"));
    }
    let fit = line_fit(&xs, &ys)?;
    Ok(-fit.slope)
}

/// Exponential decay rate of the autocovariance of a stationary series
/// sampled every `dt`, fitted on lags `window.0..=window.1`.
pub fn autocorr_gap_estimate(series: &[f64], dt: f64, window: (usize, usize)) -> Result<RateEstimate, StatsError> {
    if window.1 <= window.0 {
        return Err(StatsError::Undefined("empty lag window"));
    }
    if !(dt > 0.0) {
        return Err(StatsError::InvalidData("sampling step must be positive"));
    }
    let rate = decay_rate(series, dt, window)?;
    let q = series.len() / 4;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..4 {
        if let Ok(r) = decay_rate(&series[k * q..(k + 1) * q], dt, window) {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if lo > hi {
        (lo, hi) = (rate, rate);
    }
    Ok(RateEstimate { rate, band: (lo, hi) })
}
