//! Radar / motion-capture time alignment.
//!
//! The two acquisition systems free-run on their own clocks. Alignment runs
//! in three stages:
//!
//! 1. a coarse lag from the generalized cross-correlation (phase transform)
//!    between the radar envelope and the maximal projected marker velocity,
//! 2. a robust linear fit of the residual per-minimum time differences,
//!    capturing clock drift (slope) and refining the offset (intercept),
//! 3. resampling of the raw radar stream onto the reference clock.
//!
//! The fitted model maps radar time to reference time via
//! `t_ref = t + drift_intercept + drift_slope * t`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::envelope::{EnvelopeKind, EnvelopeSignal};
use crate::error::{Error, Result};
use crate::reference::{GaitEvents, Geometry, Leg, MarkerTrajectory};
use crate::signal::{IqStream, View};

/// Affine clock mapping between the radar and reference streams.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyncModel {
    /// Raw lag from the cross-correlation stage, seconds (diagnostic; the
    /// mapping itself uses slope and intercept).
    pub lag_s: f64,
    /// Clock-rate mismatch, seconds of offset per second of radar time.
    pub drift_slope: f64,
    /// Offset at radar time zero, seconds.
    pub drift_intercept_s: f64,
}

impl SyncModel {
    pub fn identity() -> SyncModel {
        SyncModel {
            lag_s: 0.0,
            drift_slope: 0.0,
            drift_intercept_s: 0.0,
        }
    }

    /// Pure-offset model (no drift).
    pub fn from_lag(lag_s: f64) -> SyncModel {
        SyncModel {
            lag_s,
            drift_slope: 0.0,
            drift_intercept_s: lag_s,
        }
    }

    pub fn to_reference(&self, t: f64) -> f64 {
        t + self.drift_intercept_s + self.drift_slope * t
    }

    pub fn from_reference(&self, t_ref: f64) -> f64 {
        (t_ref - self.drift_intercept_s) / (1.0 + self.drift_slope)
    }

    /// The inverse mapping (reference time to radar time) as a model.
    pub fn inverse(&self) -> SyncModel {
        let k = 1.0 + self.drift_slope;
        SyncModel {
            lag_s: -self.lag_s,
            drift_slope: 1.0 / k - 1.0,
            drift_intercept_s: -self.drift_intercept_s / k,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.drift_slope == 0.0 && self.drift_intercept_s == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lag_s.is_finite()
            && self.drift_slope.is_finite()
            && self.drift_intercept_s.is_finite())
        {
            return Err(Error::invalid("sync model must be finite"));
        }
        if self.drift_slope.abs() >= 0.1 {
            return Err(Error::invalid(format!(
                "implausible clock drift {} s/s",
                self.drift_slope
            )));
        }
        Ok(())
    }
}

/// Pointwise maximum of the projected radial velocities of all markers: the
/// reference-side counterpart to the radar envelope.
///
/// # Errors
///
/// Needs at least one marker; all trajectories must share one time grid.
pub fn mocap_envelope(
    markers: &[MarkerTrajectory],
    geom: &Geometry,
    view: View,
) -> Result<EnvelopeSignal> {
    let first = markers
        .first()
        .ok_or_else(|| Error::invalid("mocap envelope needs at least one marker"))?;
    let n = first.len();
    for traj in markers {
        if traj.len() != n || (traj.sample_rate_hz - first.sample_rate_hz).abs() > 1e-9 {
            return Err(Error::invalid(
                "marker trajectories must share one sampling grid",
            ));
        }
    }
    let mut velocity = vec![f64::NEG_INFINITY; n];
    for traj in markers {
        let projected = crate::reference::project_radial_velocity(traj, geom, view)?;
        for (acc, v) in velocity.iter_mut().zip(&projected.velocity_mps) {
            *acc = acc.max(*v);
        }
    }
    Ok(EnvelopeSignal {
        kind: EnvelopeKind::Standard,
        time_s: first.time_s.clone(),
        velocity_mps: velocity,
        interpolated: vec![false; n],
        warnings: Vec::new(),
    })
}

/// Linear resampling of an envelope onto a new uniform rate (either
/// direction). Intended for the smooth envelope signals, not raw I/Q data.
pub fn resample_envelope(env: &EnvelopeSignal, target_hz: f64) -> Result<EnvelopeSignal> {
    if env.len() < 2 {
        return Err(Error::insufficient("resampling needs at least two samples"));
    }
    if !(target_hz > 0.0) {
        return Err(Error::invalid("target rate must be positive"));
    }
    let t0 = env.time_s[0];
    let t_end = *env.time_s.last().unwrap();
    let dt = 1.0 / target_hz;
    let n_out = ((t_end - t0) / dt + 0.5 * dt).floor() as usize + 1;
    let mut time = Vec::with_capacity(n_out);
    let mut velocity = Vec::with_capacity(n_out);
    let mut interpolated = Vec::with_capacity(n_out);
    let mut seg = 0usize;
    for k in 0..n_out {
        let t = t0 + k as f64 * dt;
        while seg + 2 < env.time_s.len() && env.time_s[seg + 1] <= t {
            seg += 1;
        }
        let (ta, tb) = (env.time_s[seg], env.time_s[seg + 1]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        time.push(t);
        velocity.push(env.velocity_mps[seg] + w * (env.velocity_mps[seg + 1] - env.velocity_mps[seg]));
        interpolated.push(if w < 0.5 {
            env.interpolated[seg]
        } else {
            env.interpolated[seg + 1]
        });
    }
    Ok(EnvelopeSignal {
        kind: env.kind,
        time_s: time,
        velocity_mps: velocity,
        interpolated,
        warnings: env.warnings.clone(),
    })
}

/// Cross-correlation configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GccConfig {
    /// Use the phase transform (whitened cross-spectrum). `false` falls back
    /// to plain cross-correlation.
    pub phat: bool,
    /// Restrict the lag search, seconds (both signs). `None` searches all.
    pub max_lag_s: Option<f64>,
    /// Plain correlation at the found lag below this value raises the
    /// low-confidence flag.
    pub min_correlation: f64,
}

impl Default for GccConfig {
    fn default() -> Self {
        GccConfig {
            phat: true,
            max_lag_s: None,
            min_correlation: 0.2,
        }
    }
}

/// Result of the coarse alignment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GccAlignment {
    /// Time by which the second envelope trails the first, seconds:
    /// `b(t) ~ a(t - lag)`.
    pub lag_s: f64,
    /// Pearson correlation of the overlapping samples at that lag.
    pub peak_correlation: f64,
    /// Set when `peak_correlation` falls below the configured minimum.
    pub low_confidence: bool,
}

/// Half-width, in seconds, of the window in which the plain correlation is
/// re-maximized around the whitened-correlation peak.
const REFINE_RADIUS_S: f64 = 0.1;

/// Estimate the lag between two envelopes on a common sampling grid.
///
/// # Errors
///
/// Both envelopes need variance and equal sampling rates.
pub fn align_gcc(a: &EnvelopeSignal, b: &EnvelopeSignal, cfg: &GccConfig) -> Result<GccAlignment> {
    let rate_a = envelope_rate(a)?;
    let rate_b = envelope_rate(b)?;
    if (rate_a - rate_b).abs() > 1e-6 * rate_a {
        return Err(Error::invalid(
            "envelopes must be resampled to a common grid before alignment",
        ));
    }
    let xa = centered(&a.velocity_mps)?;
    let xb = centered(&b.velocity_mps)?;

    let n = (xa.len() + xb.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex64> = xa
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut fb: Vec<Complex64> = xb
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);

    // Cross-spectrum conj(A) * B: its inverse transform is
    // r[m] = sum_n a[n] * b[n + m], peaking where b trails a.
    let cross: Vec<Complex64> = fa.iter().zip(&fb).map(|(a, b)| a.conj() * b).collect();
    let mut plain = cross.clone();
    ifft.process(&mut plain);

    let max_lag_samples = cfg
        .max_lag_s
        .map(|s| (s * rate_a).round() as isize)
        .unwrap_or(isize::MAX);
    let lo = -((xb.len() as isize - 1).min(max_lag_samples));
    let hi = (xa.len() as isize - 1).min(max_lag_samples);
    let argmax = |buf: &[Complex64], from: isize, to: isize| -> isize {
        let mut best = (from, f64::NEG_INFINITY);
        for m in from..=to {
            let v = buf[m.rem_euclid(n as isize) as usize].re;
            if v > best.1 {
                best = (m, v);
            }
        }
        best.0
    };

    // Raw linear correlation is biased toward small lags (more overlap), so
    // every peak choice on `plain` goes through the overlap-normalized
    // Pearson correlation instead; only the whitened candidate search below
    // uses the transform output directly. The overlap floor keeps the global
    // search away from tiny-overlap extreme lags whose correlation is
    // meaningless.
    let global_floor = (xa.len().min(xb.len()) / 4).max(3);
    let global = pearson_argmax(&plain, &xa, &xb, lo, hi, global_floor);
    let lag_samples = if cfg.phat {
        // Regularized phase transform: the epsilon keeps bins carrying no
        // signal from being whitened up to the same weight as the coherent
        // ones, which would drown narrowband envelopes in leakage.
        let mut white = cross;
        let max_mag = white.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if max_mag > 0.0 {
            let eps = 0.01 * max_mag;
            for c in white.iter_mut() {
                *c /= c.norm() + eps;
            }
        }
        ifft.process(&mut white);
        let candidate = argmax(&white, lo, hi);
        // Whitening sharpens the peak but can displace it, so re-maximize
        // the Pearson correlation nearby; and on strongly periodic envelopes
        // it can lock onto the wrong stride repeat, so fall back to the
        // plain-correlation peak whenever that one is clearly better.
        let radius = (REFINE_RADIUS_S * rate_a).round() as isize;
        let refined = pearson_argmax(
            &plain,
            &xa,
            &xb,
            (candidate - radius).max(lo),
            (candidate + radius).min(hi),
            3,
        );
        match (refined, global) {
            (Some((mc, rc)), Some((mg, rg))) => {
                if rc + 0.01 >= rg {
                    mc
                } else {
                    mg
                }
            }
            (Some((mc, _)), None) => mc,
            (None, Some((mg, _))) => mg,
            (None, None) => candidate,
        }
    } else {
        global.map_or(0, |(m, _)| m)
    };

    let peak_correlation = pearson_at_lag(&xa, &xb, lag_samples);
    Ok(GccAlignment {
        lag_s: lag_samples as f64 / rate_a,
        peak_correlation,
        low_confidence: peak_correlation < cfg.min_correlation,
    })
}

fn envelope_rate(env: &EnvelopeSignal) -> Result<f64> {
    if env.len() < 2 {
        return Err(Error::insufficient("envelope too short for alignment"));
    }
    Ok(1.0 / (env.time_s[1] - env.time_s[0]))
}

fn centered(values: &[f64]) -> Result<Vec<f64>> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    if centered.iter().all(|v| v.abs() < 1e-300) {
        return Err(Error::invalid("degenerate zero-variance envelope"));
    }
    Ok(centered)
}

fn prefix_sums(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sums = Vec::with_capacity(x.len() + 1);
    let mut squares = Vec::with_capacity(x.len() + 1);
    let (mut s, mut ss) = (0.0, 0.0);
    sums.push(0.0);
    squares.push(0.0);
    for &v in x {
        s += v;
        ss += v * v;
        sums.push(s);
        squares.push(ss);
    }
    (sums, squares)
}

/// Lag in `from..=to` maximizing the Pearson correlation of the pairs
/// `a[n], b[n+m]`, skipping lags with fewer than `min_overlap` pairs.
/// `sum_products` is the unnormalized inverse FFT of the cross-spectrum;
/// together with prefix sums it makes each lag O(1).
fn pearson_argmax(
    sum_products: &[Complex64],
    a: &[f64],
    b: &[f64],
    from: isize,
    to: isize,
    min_overlap: usize,
) -> Option<(isize, f64)> {
    let n_fft = sum_products.len();
    let (pa, paa) = prefix_sums(a);
    let (pb, pbb) = prefix_sums(b);
    let mut best: Option<(isize, f64)> = None;
    for m in from..=to {
        let n0 = 0.max(-m) as usize;
        let n1 = (a.len() as isize - 1).min(b.len() as isize - 1 - m);
        if n1 < n0 as isize {
            continue;
        }
        let n1 = n1 as usize;
        let len = n1 - n0 + 1;
        if len < min_overlap.max(3) {
            continue;
        }
        let l = len as f64;
        let sa = pa[n1 + 1] - pa[n0];
        let saa = paa[n1 + 1] - paa[n0];
        let (j0, j1) = ((n0 as isize + m) as usize, (n1 as isize + m) as usize);
        let sb = pb[j1 + 1] - pb[j0];
        let sbb = pbb[j1 + 1] - pbb[j0];
        let sab = sum_products[m.rem_euclid(n_fft as isize) as usize].re / n_fft as f64;
        let cov = sab - sa * sb / l;
        let va = saa - sa * sa / l;
        let vb = sbb - sb * sb / l;
        if va <= 0.0 || vb <= 0.0 {
            continue;
        }
        let rho = cov / (va * vb).sqrt();
        if best.is_none_or(|(_, r)| rho > r) {
            best = Some((m, rho));
        }
    }
    best
}

/// Pearson correlation of a and b at lag m (pairs `a[n], b[n+m]`), over the
/// overlap.
fn pearson_at_lag(a: &[f64], b: &[f64], m: isize) -> f64 {
    let mut pairs = Vec::new();
    for n in 0..a.len() {
        let j = n as isize + m;
        if j >= 0 && (j as usize) < b.len() {
            pairs.push((a[n], b[j as usize]));
        }
    }
    if pairs.len() < 3 {
        return 0.0;
    }
    let k = pairs.len() as f64;
    let (ma, mb) = (
        pairs.iter().map(|p| p.0).sum::<f64>() / k,
        pairs.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Indices of local minima with at least `prominence_frac` of the global
/// dynamic range in prominence, thinned to the minimum spacing (deepest
/// minima win).
pub fn find_minima(values: &[f64], min_spacing: usize, prominence_frac: f64) -> Vec<usize> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let global_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let global_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = global_max - global_min;
    if !(range > 0.0) {
        return Vec::new();
    }
    let required = prominence_frac * range;

    let mut candidates = Vec::new();
    for i in 1..n - 1 {
        if !(values[i] < values[i - 1] && values[i] <= values[i + 1]) {
            continue;
        }
        // Prominence: smaller of the climbs to the left/right before a
        // deeper sample appears (signal edge counts as a wall).
        let v = values[i];
        let mut left_peak = f64::NEG_INFINITY;
        for j in (0..i).rev() {
            left_peak = left_peak.max(values[j]);
            if values[j] < v {
                break;
            }
        }
        let mut right_peak = f64::NEG_INFINITY;
        for j in i + 1..n {
            right_peak = right_peak.max(values[j]);
            if values[j] < v {
                break;
            }
        }
        let prominence = (left_peak - v).min(right_peak - v);
        if prominence >= required {
            candidates.push(i);
        }
    }

    // Enforce spacing, keeping the deepest minima.
    candidates.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut kept: Vec<usize> = Vec::new();
    for idx in candidates {
        if kept
            .iter()
            .all(|&k| k.abs_diff(idx) >= min_spacing.max(1))
        {
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept
}

/// Drift-estimation configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriftConfig {
    /// Minimum prominence of envelope minima, fraction of dynamic range.
    pub prominence_frac: f64,
    /// Minimum spacing between minima, seconds.
    pub min_spacing_s: f64,
    /// Pairing window around each lag-corrected radar minimum, as a fraction
    /// of the stride duration.
    pub pairing_window_frac: f64,
    /// Bisquare tuning constant.
    pub tuning: f64,
    /// Maximum reweighting iterations.
    pub max_iterations: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            prominence_frac: 0.1,
            min_spacing_s: 0.4,
            pairing_window_frac: 0.25,
            tuning: 4.685,
            max_iterations: 20,
        }
    }
}

/// Robust line fit of minima time differences over time.
///
/// Pairs each radar minimum with the nearest mocap minimum within the
/// window, then fits `t_mocap - t_radar = intercept + slope * t_radar` with
/// bisquare-weighted iterative least squares.
///
/// # Errors
///
/// Fewer than 4 pairs is insufficient data.
pub fn fit_drift_pairs(
    radar_minima_s: &[f64],
    mocap_minima_s: &[f64],
    lag_s: f64,
    window_s: f64,
    cfg: &DriftConfig,
) -> Result<SyncModel> {
    let mut pairs: Vec<(f64, f64)> = Vec::new(); // (t_radar, diff)
    let mut j = 0usize;
    for &tr in radar_minima_s {
        let target = tr + lag_s;
        while j + 1 < mocap_minima_s.len()
            && (mocap_minima_s[j + 1] - target).abs() <= (mocap_minima_s[j] - target).abs()
        {
            j += 1;
        }
        if let Some(&tm) = mocap_minima_s.get(j) {
            if (tm - target).abs() <= window_s {
                pairs.push((tr, tm - tr));
            }
        }
    }
    if pairs.len() < 4 {
        return Err(Error::insufficient(format!(
            "drift fit needs at least 4 paired minima, got {}",
            pairs.len()
        )));
    }

    let (slope, intercept) = robust_line_fit(&pairs, cfg.tuning, cfg.max_iterations);
    let model = SyncModel {
        lag_s,
        drift_slope: slope,
        drift_intercept_s: intercept,
    };
    model.validate()?;
    Ok(model)
}

/// Bisquare IRLS line fit on (x, y) pairs; returns (slope, intercept).
fn robust_line_fit(pairs: &[(f64, f64)], tuning: f64, max_iterations: usize) -> (f64, f64) {
    let n = pairs.len() as f64;
    let x_mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mut weights = vec![1.0f64; pairs.len()];
    let mut slope = 0.0;
    let mut offset = 0.0; // intercept in centered coordinates

    for _ in 0..max_iterations.max(1) {
        // Weighted least squares on centered x.
        let sw: f64 = weights.iter().sum();
        if sw <= 0.0 {
            break;
        }
        let xw_mean = pairs
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * (p.0 - x_mean))
            .sum::<f64>()
            / sw;
        let yw_mean = pairs.iter().zip(&weights).map(|(p, w)| w * p.1).sum::<f64>() / sw;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (p, w) in pairs.iter().zip(&weights) {
            let dx = (p.0 - x_mean) - xw_mean;
            sxx += w * dx * dx;
            sxy += w * dx * (p.1 - yw_mean);
        }
        let new_slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let new_offset = yw_mean - new_slope * xw_mean;
        let converged =
            (new_slope - slope).abs() < 1e-15 && (new_offset - offset).abs() < 1e-15;
        slope = new_slope;
        offset = new_offset;
        if converged {
            break;
        }

        // Re-weight by bisquare of scaled residuals.
        let residuals: Vec<f64> = pairs
            .iter()
            .map(|p| p.1 - (offset + slope * (p.0 - x_mean)))
            .collect();
        let mut abs_res: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
        abs_res.sort_by(f64::total_cmp);
        let mad = abs_res[abs_res.len() / 2];
        let scale = mad / 0.6745;
        if scale <= 1e-300 {
            break; // essentially perfect fit
        }
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let u = r / (tuning * scale);
            *w = if u.abs() < 1.0 {
                let t = 1.0 - u * u;
                t * t
            } else {
                0.0
            };
        }
    }
    (slope, offset - slope * x_mean)
}

/// Detect minima in both envelopes and fit the drift model.
///
/// The stride duration used for the pairing window is estimated as twice the
/// median spacing of the radar minima (minima occur once per step).
pub fn estimate_drift(
    radar_env: &EnvelopeSignal,
    mocap_env: &EnvelopeSignal,
    lag_s: f64,
    cfg: &DriftConfig,
) -> Result<SyncModel> {
    let radar_rate = envelope_rate(radar_env)?;
    let mocap_rate = envelope_rate(mocap_env)?;
    let radar_idx = find_minima(
        &radar_env.velocity_mps,
        (cfg.min_spacing_s * radar_rate).round() as usize,
        cfg.prominence_frac,
    );
    let mocap_idx = find_minima(
        &mocap_env.velocity_mps,
        (cfg.min_spacing_s * mocap_rate).round() as usize,
        cfg.prominence_frac,
    );
    let radar_minima: Vec<f64> = radar_idx.iter().map(|&i| radar_env.time_s[i]).collect();
    let mocap_minima: Vec<f64> = mocap_idx.iter().map(|&i| mocap_env.time_s[i]).collect();

    let stride_s = if radar_minima.len() >= 3 {
        let mut gaps: Vec<f64> = radar_minima.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        2.0 * gaps[gaps.len() / 2]
    } else {
        return Err(Error::insufficient(
            "drift estimation needs at least 3 radar envelope minima",
        ));
    };
    fit_drift_pairs(
        &radar_minima,
        &mocap_minima,
        lag_s,
        cfg.pairing_window_frac * stride_s,
        cfg,
    )
}

/// Resample a radar stream onto the reference clock.
///
/// The output keeps the sampling rate; its time axis starts at the mapped
/// start time and spans the mapped duration. Interior samples come from
/// six-point local Lagrange interpolation, which keeps round-trip errors of
/// band-limited signals below 1e-6 RMS; an identity model returns the input
/// unchanged.
pub fn apply_sync(iq: &IqStream, model: &SyncModel) -> Result<IqStream> {
    model.validate()?;
    if model.is_identity() {
        return Ok(iq.clone());
    }
    let n = iq.samples.len();
    if n < 2 {
        return Err(Error::insufficient("resampling needs at least two samples"));
    }
    let fs = iq.sample_rate_hz;
    let in_start = iq.start_time_s;
    let in_end = in_start + (n - 1) as f64 / fs;
    let out_start = model.to_reference(in_start);
    let out_end = model.to_reference(in_end);
    // Tiny slack absorbs float jitter on exact spans without ever placing an
    // output sample beyond the last input sample (no extrapolation).
    let n_out = (((out_end - out_start) * fs) + 1e-9).floor() as usize + 1;

    let samples: Vec<Complex64> = (0..n_out)
        .map(|k| {
            let t_ref = out_start + k as f64 / fs;
            let pos = (model.from_reference(t_ref) - in_start) * fs;
            lagrange6(&iq.samples, pos)
        })
        .collect();
    Ok(IqStream {
        samples,
        sample_rate_hz: fs,
        start_time_s: out_start,
    })
}

/// Six-point local Lagrange interpolation at fractional sample position
/// `pos`. Near the edges the stencil shifts inward so every evaluation stays
/// an interpolation (an edge-clamped stencil degenerates to constant
/// extrapolation, whose error would dominate the round-trip budget). Signals
/// shorter than six samples use all available nodes.
fn lagrange6(x: &[Complex64], pos: f64) -> Complex64 {
    let n = x.len() as isize;
    let i = pos.floor() as isize;
    let f = pos - i as f64;
    if f == 0.0 {
        return x[i.clamp(0, n - 1) as usize];
    }
    let m = n.min(6);
    let first = (i - 2).clamp(0, n - m);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in first..first + m {
        // Lagrange basis polynomial for node k evaluated at `pos`.
        let mut w = 1.0;
        for j in first..first + m {
            if j != k {
                w *= (pos - j as f64) / (k - j) as f64;
            }
        }
        acc += x[k as usize] * w;
    }
    acc
}

/// Leg label of one radar gait cycle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LegAssignment {
    pub leg: Leg,
    /// The heel-strike time the cycle was matched to, seconds.
    pub matched_event_s: f64,
    /// Set when two events of different legs were equidistant (tie broken
    /// toward the earlier event).
    pub ambiguous: bool,
}

/// Label radar cycle start times with the leg of the nearest reference heel
/// strike. Cycle times must already be on the reference clock.
///
/// # Errors
///
/// At least one heel strike must exist across the provided event sets.
pub fn assign_legs(cycle_starts_s: &[f64], events: &[&GaitEvents]) -> Result<Vec<LegAssignment>> {
    let mut strikes: Vec<(f64, Leg)> = events
        .iter()
        .flat_map(|e| e.heel_strikes_s.iter().map(move |&t| (t, e.leg)))
        .collect();
    if strikes.is_empty() {
        return Err(Error::invalid("leg assignment needs reference heel strikes"));
    }
    strikes.sort_by(|a, b| a.0.total_cmp(&b.0));

    Ok(cycle_starts_s
        .iter()
        .map(|&t| {
            let idx = strikes.partition_point(|&(s, _)| s < t);
            let after = strikes.get(idx);
            let before = idx.checked_sub(1).map(|i| strikes[i]);
            match (before, after) {
                (Some((tb, lb)), Some(&(ta, la))) => {
                    // Distances within a nanosecond count as equidistant:
                    // well above float rounding on the timestamps, far below
                    // any physical timing difference.
                    let (db, da) = (t - tb, ta - t);
                    if (db - da).abs() <= 1e-9 {
                        LegAssignment {
                            leg: lb,
                            matched_event_s: tb,
                            ambiguous: lb != la,
                        }
                    } else if db < da {
                        LegAssignment {
                            leg: lb,
                            matched_event_s: tb,
                            ambiguous: false,
                        }
                    } else {
                        LegAssignment {
                            leg: la,
                            matched_event_s: ta,
                            ambiguous: false,
                        }
                    }
                }
                (Some((tb, lb)), None) => LegAssignment {
                    leg: lb,
                    matched_event_s: tb,
                    ambiguous: false,
                },
                (None, Some(&(ta, la))) => LegAssignment {
                    leg: la,
                    matched_event_s: ta,
                    ambiguous: false,
                },
                (None, None) => unreachable!("strikes verified non-empty"),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::Marker;
    use approx::assert_abs_diff_eq;

    fn env_from(values: Vec<f64>, fs: f64) -> EnvelopeSignal {
        let n = values.len();
        EnvelopeSignal {
            kind: EnvelopeKind::Standard,
            time_s: (0..n).map(|i| i as f64 / fs).collect(),
            velocity_mps: values,
            interpolated: vec![false; n],
            warnings: Vec::new(),
        }
    }

    /// Gait-like envelope: rectified-sine humps, one trough per step.
    fn gait_envelope(t: f64, step_s: f64) -> f64 {
        let phase = (t / step_s).rem_euclid(1.0);
        0.4 + 2.4 * (std::f64::consts::PI * phase).sin().abs().powi(3)
    }

    #[test]
    fn identical_envelopes_align_at_zero() {
        let fs = 1000.0;
        let a = env_from(
            (0..8000).map(|i| gait_envelope(i as f64 / fs, 0.55)).collect(),
            fs,
        );
        let res = align_gcc(&a, &a, &GccConfig::default()).unwrap();
        assert_eq!(res.lag_s, 0.0);
        assert!(res.peak_correlation > 0.99);
        assert!(!res.low_confidence);
    }

    /// Gait envelope with stride-to-stride amplitude variation, as real
    /// walking produces. The slow modulations are incommensurate with the
    /// step rate, so the correlation has a unique global peak.
    fn varying_envelope(t: f64, step_s: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        gait_envelope(t, step_s)
            * (1.0 + 0.35 * (0.23 * tau * t).sin() + 0.2 * (0.071 * tau * t + 1.0).sin())
    }

    #[test]
    fn constructed_shifts_are_recovered_within_one_sample() {
        let fs = 1000.0;
        let step = 0.55;
        let f = |t: f64| varying_envelope(t, step);
        let a = env_from((0..9000).map(|i| f(i as f64 / fs)).collect(), fs);
        for lag in [0.137, -0.4215, 1.9993, -1.5, 0.0007] {
            let b = env_from((0..9000).map(|i| f(i as f64 / fs - lag)).collect(), fs);
            let res = align_gcc(&a, &b, &GccConfig::default()).unwrap();
            assert_abs_diff_eq!(res.lag_s, lag, epsilon = 1.0 / fs + 1e-12);
            assert!(!res.low_confidence, "lag {lag}");

            // The chosen lag maximizes plain correlation within one sample.
            let m0 = (res.lag_s * fs).round() as isize;
            let xa = centered(&a.velocity_mps).unwrap();
            let xb = centered(&b.velocity_mps).unwrap();
            let here = pearson_at_lag(&xa, &xb, m0);
            for dm in [-3isize, -2, 2, 3] {
                assert!(here + 1e-9 >= pearson_at_lag(&xa, &xb, m0 + dm));
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn random_lags_up_to_two_seconds_are_recovered(lag_ms in -2000i32..=2000) {
            let fs = 500.0;
            let lag = lag_ms as f64 / 1000.0;
            let f = |t: f64| varying_envelope(t, 0.55);
            let a = env_from((0..5000).map(|i| f(i as f64 / fs)).collect(), fs);
            let b = env_from((0..5000).map(|i| f(i as f64 / fs - lag)).collect(), fs);
            let res = align_gcc(&a, &b, &GccConfig::default()).unwrap();
            proptest::prop_assert!(
                (res.lag_s - lag).abs() <= 1.0 / fs + 1e-12,
                "lag {} recovered as {}",
                lag,
                res.lag_s
            );
        }
    }

    #[test]
    fn degenerate_and_uncorrelated_inputs_are_reported() {
        let fs = 100.0;
        let flat = env_from(vec![1.0; 500], fs);
        let wavy = env_from((0..500).map(|i| (i as f64 * 0.3).sin()).collect(), fs);
        assert!(align_gcc(&flat, &wavy, &GccConfig::default()).is_err());

        // Independent noise: low confidence.
        let mut state = 7u64;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let na = env_from((0..4000).map(|_| rnd()).collect(), fs);
        let nb = env_from((0..4000).map(|_| rnd()).collect(), fs);
        let res = align_gcc(&na, &nb, &GccConfig::default()).unwrap();
        assert!(res.low_confidence, "corr {}", res.peak_correlation);
    }

    #[test]
    fn minima_detection_honors_prominence_and_spacing() {
        let fs = 1000.0;
        let n = 5000;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                // Deep troughs every 0.55 s plus a shallow ripple that must
                // be rejected (prominence ~2% of range).
                gait_envelope(t, 0.55) + 0.02 * (2.0 * std::f64::consts::PI * 7.3 * t).sin()
            })
            .collect();
        let idx = find_minima(&values, (0.4 * fs) as usize, 0.1);
        assert!(idx.len() >= 8, "got {}", idx.len());
        for w in idx.windows(2) {
            let gap = (w[1] - w[0]) as f64 / fs;
            assert!(gap > 0.4, "spacing {gap}");
            assert_abs_diff_eq!(gap, 0.55, epsilon = 0.06);
        }
    }

    #[test]
    fn zero_drift_fits_zero_slope() {
        let fs = 1000.0;
        let make = |warp: f64, lag: f64| {
            env_from(
                (0..100_000)
                    .map(|i| gait_envelope((i as f64 / fs) * (1.0 + warp) - lag, 0.55))
                    .collect(),
                fs,
            )
        };
        let radar = make(0.0, 0.0);
        let mocap = make(0.0, 0.0);
        let model = estimate_drift(&radar, &mocap, 0.0, &DriftConfig::default()).unwrap();
        assert!(model.drift_slope.abs() < 1e-6, "{}", model.drift_slope);

        // 50 ppm skew: mocap clock runs faster so events appear later over
        // time. Envelope value at index i: radar sees phase(t), mocap sees
        // phase(t / (1 + 5e-5)) -> event times scale by (1 + 5e-5).
        let skew = make(-5e-5 / (1.0 + 5e-5), 0.0);
        let model = estimate_drift(&radar, &skew, 0.0, &DriftConfig::default()).unwrap();
        assert_abs_diff_eq!(model.drift_slope, 5e-5, epsilon = 5e-6);
    }

    #[test]
    fn robust_fit_shrugs_off_a_corrupted_minimum() {
        // Constructed minima times; one mocap minimum near the end is off by
        // 180 ms (still inside the pairing window).
        let step = 0.55;
        let n = 180;
        let radar: Vec<f64> = (0..n).map(|k| 1.0 + k as f64 * step).collect();
        let truth_slope = 5e-5;
        let clean: Vec<f64> = radar.iter().map(|&t| t * (1.0 + truth_slope) + 0.02).collect();
        let mut corrupted = clean.clone();
        corrupted[n - 3] += 0.18;

        let cfg = DriftConfig::default();
        let window = 0.25 * 2.0 * step;
        let fit_clean = fit_drift_pairs(&radar, &clean, 0.0, window, &cfg).unwrap();
        let fit_corr = fit_drift_pairs(&radar, &corrupted, 0.0, window, &cfg).unwrap();
        assert_abs_diff_eq!(fit_clean.drift_slope, truth_slope, epsilon = 1e-9);
        assert!(
            (fit_corr.drift_slope - fit_clean.drift_slope).abs() < 1e-6,
            "robust slope moved by {}",
            (fit_corr.drift_slope - fit_clean.drift_slope).abs()
        );

        // Plain least squares (oracle) is visibly dragged by the outlier.
        let pairs: Vec<(f64, f64)> = radar
            .iter()
            .zip(&corrupted)
            .map(|(&tr, &tm)| (tr, tm - tr))
            .collect();
        let nf = pairs.len() as f64;
        let xm = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
        let ym = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let ols_slope = sxy / sxx;
        assert!(
            (ols_slope - truth_slope).abs() > 1e-5,
            "oracle OLS should be biased, got {ols_slope}"
        );

        // Slope is invariant to a constant added to every difference.
        let shifted: Vec<f64> = clean.iter().map(|t| t + 0.4).collect();
        let fit_shift = fit_drift_pairs(&radar, &shifted, 0.4, window, &cfg).unwrap();
        assert_abs_diff_eq!(fit_shift.drift_slope, fit_clean.drift_slope, epsilon = 1e-12);

        // Too few pairs.
        assert!(fit_drift_pairs(&radar[..3], &clean[..3], 0.0, window, &cfg).is_err());
    }

    #[test]
    fn mocap_envelope_is_the_pointwise_maximum() {
        let fs = 100.0;
        let n = 400;
        let time: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
        let make = |marker: Marker, f: &dyn Fn(f64) -> f64| MarkerTrajectory {
            marker,
            sample_rate_hz: fs,
            time_s: time.clone(),
            position_m: time.iter().map(|&t| [0.0, f(t), 1.0]).collect(),
        };
        // theta = 0 so projection returns dy/dt exactly.
        let geom = Geometry { theta_deg: 0.0 };
        let a = make(Marker::ToeLeft, &|t| 2.0 * t); // 2 m/s
        let b = make(Marker::KneeLeft, &|t| 0.25 * (3.0 * t).sin()); // 0.75 max

        let single = mocap_envelope(std::slice::from_ref(&a), &geom, View::Front).unwrap();
        assert_abs_diff_eq!(single.velocity_mps[n / 2], 2.0, epsilon = 1e-9);

        let both = mocap_envelope(&[a.clone(), b.clone()], &geom, View::Front).unwrap();
        // Elementwise oracle.
        let va = crate::reference::project_radial_velocity(&a, &geom, View::Front).unwrap();
        let vb = crate::reference::project_radial_velocity(&b, &geom, View::Front).unwrap();
        for i in 0..n {
            let expect = va.velocity_mps[i].max(vb.velocity_mps[i]);
            assert_abs_diff_eq!(both.velocity_mps[i], expect, epsilon = 1e-12);
        }
        assert!(mocap_envelope(&[], &geom, View::Front).is_err());
    }

    #[test]
    fn apply_sync_identity_is_bit_equal() {
        let fs = 2560.0;
        let iq = IqStream {
            samples: (0..1000)
                .map(|i| Complex64::new((i as f64 * 0.01).sin(), (i as f64 * 0.013).cos()))
                .collect(),
            sample_rate_hz: fs,
            start_time_s: 0.25,
        };
        let out = apply_sync(&iq, &SyncModel::identity()).unwrap();
        assert_eq!(out.samples, iq.samples);
        assert_eq!(out.start_time_s, iq.start_time_s);
    }

    #[test]
    fn lag_only_model_shifts_the_time_axis() {
        let fs = 2560.0;
        let iq = IqStream {
            samples: (0..500).map(|i| Complex64::new(i as f64, -(i as f64))).collect(),
            sample_rate_hz: fs,
            start_time_s: 0.0,
        };
        let out = apply_sync(&iq, &SyncModel::from_lag(0.137)).unwrap();
        assert_eq!(out.samples.len(), iq.samples.len());
        assert_abs_diff_eq!(out.start_time_s, 0.137, epsilon = 1e-12);
        // Integer sample positions: values pass through exactly.
        for (a, b) in iq.samples.iter().zip(&out.samples) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-9);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn drift_round_trip_stays_below_rms_bound() {
        let fs = 2560.0;
        let n = (100.0 * fs) as usize;
        let omega = 2.0 * std::f64::consts::PI * 10.0;
        let iq = IqStream {
            samples: (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    Complex64::new((omega * t).sin(), (omega * t).cos())
                })
                .collect(),
            sample_rate_hz: fs,
            start_time_s: 0.0,
        };
        let model = SyncModel {
            lag_s: 0.02,
            drift_slope: 5e-5,
            drift_intercept_s: 0.02,
        };
        let forward = apply_sync(&iq, &model).unwrap();
        let back = apply_sync(&forward, &model.inverse()).unwrap();
        let m = back.samples.len().min(iq.samples.len());
        assert!((m as isize - n as isize).abs() <= 1);
        let rms = (iq.samples[..m]
            .iter()
            .zip(&back.samples[..m])
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / m as f64)
            .sqrt();
        assert!(rms < 1e-6, "round-trip RMS {rms}");

        // Energy is preserved within 0.1%.
        let e_in: f64 = iq.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
        let e_fwd: f64 =
            forward.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / forward.samples.len() as f64;
        assert_abs_diff_eq!(e_fwd / e_in, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn sample_count_is_stable_for_small_models() {
        let fs = 2560.0;
        let iq = IqStream {
            samples: vec![Complex64::new(1.0, 0.0); (10.0 * fs) as usize],
            sample_rate_hz: fs,
            start_time_s: 0.0,
        };
        for model in [
            SyncModel::from_lag(0.33),
            SyncModel {
                lag_s: 0.0,
                drift_slope: 5e-6,
                drift_intercept_s: 0.0,
            },
        ] {
            let out = apply_sync(&iq, &model).unwrap();
            assert!(
                (out.samples.len() as isize - iq.samples.len() as isize).abs() <= 1,
                "{:?}",
                model
            );
        }
    }

    #[test]
    fn legs_follow_the_nearest_heel_strike() {
        let left = GaitEvents {
            leg: Leg::Left,
            heel_strikes_s: vec![1.0, 2.1, 3.2],
            toe_offs_s: vec![1.7, 2.8],
            warnings: vec![],
        };
        let right = GaitEvents {
            leg: Leg::Right,
            heel_strikes_s: vec![1.55, 2.65],
            toe_offs_s: vec![2.25],
            warnings: vec![],
        };
        let labels = assign_legs(&[1.02, 1.5, 2.12, 2.66], &[&left, &right]).unwrap();
        let legs: Vec<Leg> = labels.iter().map(|l| l.leg).collect();
        assert_eq!(legs, vec![Leg::Left, Leg::Right, Leg::Left, Leg::Right]);
        assert!(labels.iter().all(|l| !l.ambiguous));

        // Equidistant: earlier event wins and the tie is flagged.
        let labels = assign_legs(&[1.275], &[&left, &right]).unwrap();
        assert_eq!(labels[0].leg, Leg::Left);
        assert_abs_diff_eq!(labels[0].matched_event_s, 1.0, epsilon = 1e-12);
        assert!(labels[0].ambiguous);

        // Single-leg reference labels everything that leg.
        let labels = assign_legs(&[0.5, 9.9], &[&right]).unwrap();
        assert!(labels.iter().all(|l| l.leg == Leg::Right));

        let no_events = GaitEvents {
            leg: Leg::Left,
            heel_strikes_s: vec![],
            toe_offs_s: vec![],
            warnings: vec![],
        };
        assert!(assign_legs(&[1.0], &[&no_events]).is_err());
    }

    #[test]
    fn envelope_resampling_tracks_the_signal_both_ways() {
        let fs = 80.0;
        let env = env_from(
            (0..800).map(|i| gait_envelope(i as f64 / fs, 0.55)).collect(),
            fs,
        );
        let up = resample_envelope(&env, 1000.0).unwrap();
        assert_abs_diff_eq!(up.time_s[1] - up.time_s[0], 1e-3, epsilon = 1e-12);
        for (k, &t) in up.time_s.iter().enumerate().step_by(97) {
            assert_abs_diff_eq!(up.velocity_mps[k], gait_envelope(t, 0.55), epsilon = 0.01);
        }
        let down = resample_envelope(&up, 80.0).unwrap();
        for (k, &t) in down.time_s.iter().enumerate() {
            assert_abs_diff_eq!(down.velocity_mps[k], gait_envelope(t, 0.55), epsilon = 0.01);
        }
    }
}
