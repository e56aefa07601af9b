//! Gait-cycle segmentation and parameter extraction.
//!
//! Radar side: envelope minima mark the steps; every second minimum opens a
//! gait cycle. Cycles are averaged on a normalized 0-100% grid and the
//! eleven parameters derived from the boundaries and the averaged envelopes.
//! Reference side: the same parameters from force-plate events and averaged
//! marker velocities.
//!
//! A continuous-wave radar cannot separate the two legs, so a cycle's knee
//! envelope carries the opposite leg's swing bump (near 12% of the cycle)
//! next to the leg's own bump (near 62%). The leg's own swing always falls
//! into the second step of its cycle, so velocity maxima and the knee-peak
//! search are evaluated inside the step window `[stride - step, stride]` of
//! the normalized cycle.

use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeSignal;
use crate::error::{Error, Result};
use crate::reference::{segment_gait_cycles, GaitEvents, Leg, VelocityTrace};
use crate::sync::find_minima;

/// Which processing chain produced a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Radar,
    Reference,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Radar => "radar",
            Domain::Reference => "reference",
        })
    }
}

/// The eleven gait parameters. Fields are optional: a missing knee envelope
/// leaves the flight/stance/knee entries empty, a missing opposite leg the
/// step-derived ones, without suppressing the rest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GaitParameters {
    pub stride_time_s: Option<f64>,
    pub stance_time_s: Option<f64>,
    pub flight_time_s: Option<f64>,
    pub step_time_s: Option<f64>,
    /// Steps per minute.
    pub cadence_spm: Option<f64>,
    pub stride_length_cm: Option<f64>,
    pub step_length_cm: Option<f64>,
    pub max_foot_velocity_mps: Option<f64>,
    pub max_ankle_velocity_mps: Option<f64>,
    pub max_knee_velocity_mps: Option<f64>,
    /// Position of the knee-velocity peak within the cycle, percent.
    pub knee_max_time_pct: Option<f64>,
}

/// Identifier of one gait parameter, in canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterId {
    StrideTime,
    StanceTime,
    FlightTime,
    StepTime,
    Cadence,
    StrideLength,
    StepLength,
    MaxFootVelocity,
    MaxAnkleVelocity,
    MaxKneeVelocity,
    KneeMaxTimePct,
}

impl ParameterId {
    pub const ALL: [ParameterId; 11] = [
        ParameterId::StrideTime,
        ParameterId::StanceTime,
        ParameterId::FlightTime,
        ParameterId::StepTime,
        ParameterId::Cadence,
        ParameterId::StrideLength,
        ParameterId::StepLength,
        ParameterId::MaxFootVelocity,
        ParameterId::MaxAnkleVelocity,
        ParameterId::MaxKneeVelocity,
        ParameterId::KneeMaxTimePct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParameterId::StrideTime => "stride_time_s",
            ParameterId::StanceTime => "stance_time_s",
            ParameterId::FlightTime => "flight_time_s",
            ParameterId::StepTime => "step_time_s",
            ParameterId::Cadence => "cadence_spm",
            ParameterId::StrideLength => "stride_length_cm",
            ParameterId::StepLength => "step_length_cm",
            ParameterId::MaxFootVelocity => "max_foot_velocity_mps",
            ParameterId::MaxAnkleVelocity => "max_ankle_velocity_mps",
            ParameterId::MaxKneeVelocity => "max_knee_velocity_mps",
            ParameterId::KneeMaxTimePct => "knee_max_time_pct",
        }
    }

    pub fn from_name(s: &str) -> Option<ParameterId> {
        ParameterId::ALL.iter().copied().find(|p| p.name() == s)
    }
}

impl std::fmt::Display for ParameterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl GaitParameters {
    pub fn get(&self, id: ParameterId) -> Option<f64> {
        match id {
            ParameterId::StrideTime => self.stride_time_s,
            ParameterId::StanceTime => self.stance_time_s,
            ParameterId::FlightTime => self.flight_time_s,
            ParameterId::StepTime => self.step_time_s,
            ParameterId::Cadence => self.cadence_spm,
            ParameterId::StrideLength => self.stride_length_cm,
            ParameterId::StepLength => self.step_length_cm,
            ParameterId::MaxFootVelocity => self.max_foot_velocity_mps,
            ParameterId::MaxAnkleVelocity => self.max_ankle_velocity_mps,
            ParameterId::MaxKneeVelocity => self.max_knee_velocity_mps,
            ParameterId::KneeMaxTimePct => self.knee_max_time_pct,
        }
    }
}

/// Descriptive context attached to a parameter set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterMetadata {
    pub subject: String,
    pub speed_mps: f64,
    pub view: crate::signal::View,
    /// Free-form condition tag ("none", "restricted_10deg", ...).
    pub restriction: String,
    pub leg: Option<Leg>,
    pub domain: Domain,
}

/// A parameter set plus its provenance, the unit the comparison pipeline
/// works with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledParameters {
    pub meta: ParameterMetadata,
    pub params: GaitParameters,
}

/// Settings for cycle detection and parameter extraction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamConfig {
    /// Minimum prominence of envelope minima (fraction of dynamic range).
    pub minima_prominence_frac: f64,
    /// Minimum spacing between envelope minima, seconds.
    pub minima_spacing_s: f64,
    /// Which minimum opens the first cycle (0 or 1); selects the leg.
    pub parity: usize,
    /// Points of the normalized 0-100% cycle grid.
    pub grid_points: usize,
    /// Prominence required of the knee-velocity peak (fraction of the
    /// averaged cycle's dynamic range).
    pub knee_prominence_frac: f64,
    /// Cycles required before radar parameters are reported.
    pub min_cycles: usize,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig {
            minima_prominence_frac: 0.1,
            minima_spacing_s: 0.4,
            parity: 0,
            grid_points: 201,
            knee_prominence_frac: 0.15,
            min_cycles: 3,
        }
    }
}

/// Step minima and cycle boundaries of one radar recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleSet {
    /// Cycle onsets (every second envelope minimum), seconds.
    pub boundaries_s: Vec<f64>,
    /// All envelope minima (one per step), seconds.
    pub minima_s: Vec<f64>,
    /// Leg of each cycle once assigned against reference events.
    pub legs: Option<Vec<Leg>>,
}

impl CycleSet {
    pub fn n_cycles(&self) -> usize {
        self.boundaries_s.len().saturating_sub(1)
    }
}

/// Detect step minima in the standard envelope and open a cycle at every
/// second one.
///
/// # Errors
///
/// Fewer than 5 minima is insufficient data.
pub fn radar_cycle_boundaries(env: &EnvelopeSignal, cfg: &ParamConfig) -> Result<CycleSet> {
    if env.len() < 3 {
        return Err(Error::insufficient("envelope too short for segmentation"));
    }
    let dt = env.time_s[1] - env.time_s[0];
    let spacing = (cfg.minima_spacing_s / dt).round() as usize;
    let idx = find_minima(&env.velocity_mps, spacing, cfg.minima_prominence_frac);
    if idx.len() < 5 {
        return Err(Error::insufficient(format!(
            "cycle segmentation needs at least 5 envelope minima, found {}",
            idx.len()
        )));
    }
    if cfg.parity > 1 {
        return Err(Error::invalid("cycle parity must be 0 or 1"));
    }
    let minima_s: Vec<f64> = idx.iter().map(|&i| env.time_s[i]).collect();
    let boundaries_s: Vec<f64> = minima_s.iter().skip(cfg.parity).step_by(2).copied().collect();
    Ok(CycleSet {
        boundaries_s,
        minima_s,
        legs: None,
    })
}

/// A signal averaged over gait cycles on a normalized 0-100% grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragedCycle {
    /// Cycle phase, percent (0 ..= 100).
    pub phase_pct: Vec<f64>,
    pub mean: Vec<f64>,
    /// Per-point sample standard deviation over cycles (0 for one cycle).
    pub std: Vec<f64>,
    pub n_cycles: usize,
}

/// Resample a signal into each cycle's normalized time and average.
///
/// # Errors
///
/// Needs at least one complete cycle covered by the signal.
pub fn average_cycles(
    time_s: &[f64],
    values: &[f64],
    boundaries_s: &[f64],
    grid_points: usize,
) -> Result<AveragedCycle> {
    if time_s.len() != values.len() || time_s.len() < 2 {
        return Err(Error::insufficient("signal too short for cycle averaging"));
    }
    if grid_points < 2 {
        return Err(Error::invalid("cycle grid needs at least 2 points"));
    }
    let t_first = time_s[0];
    let t_last = *time_s.last().unwrap();
    let dt = time_s[1] - time_s[0];
    let mut per_point_sum = vec![0.0; grid_points];
    let mut per_point_sq = vec![0.0; grid_points];
    let mut n_cycles = 0usize;

    for w in boundaries_s.windows(2) {
        let (b0, b1) = (w[0], w[1]);
        // Half a sample of slack at the edges: boundaries stem from the same
        // discretized signal.
        if b0 < t_first - 0.5 * dt || b1 > t_last + 0.5 * dt {
            continue;
        }
        for g in 0..grid_points {
            let frac = g as f64 / (grid_points - 1) as f64;
            let t = b0 + frac * (b1 - b0);
            let v = interp_linear(time_s, values, t);
            per_point_sum[g] += v;
            per_point_sq[g] += v * v;
        }
        n_cycles += 1;
    }
    if n_cycles == 0 {
        return Err(Error::insufficient(
            "no complete gait cycle inside the signal",
        ));
    }

    let n = n_cycles as f64;
    let mean: Vec<f64> = per_point_sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = per_point_sq
        .iter()
        .zip(&mean)
        .map(|(&sq, &m)| {
            if n_cycles > 1 {
                ((sq - n * m * m).max(0.0) / (n - 1.0)).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(AveragedCycle {
        phase_pct: (0..grid_points)
            .map(|g| 100.0 * g as f64 / (grid_points - 1) as f64)
            .collect(),
        mean,
        std,
        n_cycles,
    })
}

fn interp_linear(time_s: &[f64], values: &[f64], t: f64) -> f64 {
    let n = time_s.len();
    if t <= time_s[0] {
        return values[0];
    }
    if t >= time_s[n - 1] {
        return values[n - 1];
    }
    let i = time_s.partition_point(|&x| x < t);
    let (t0, t1) = (time_s[i - 1], time_s[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

/// First local maximum with sufficient prominence inside `[lo, hi]` (indices
/// into the averaged cycle); prominence is measured against the full cycle's
/// dynamic range. Returns (index, value).
fn first_prominent_max(
    values: &[f64],
    lo: usize,
    hi: usize,
    prominence_frac: f64,
) -> Option<(usize, f64)> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let global_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let global_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let required = prominence_frac * (global_max - global_min);
    let lo = lo.max(1);
    let hi = hi.min(n - 2);
    for i in lo..=hi {
        if !(values[i] > values[i - 1] && values[i] >= values[i + 1]) {
            continue;
        }
        let v = values[i];
        let mut left_min = f64::INFINITY;
        for j in (0..i).rev() {
            left_min = left_min.min(values[j]);
            if values[j] > v {
                break;
            }
        }
        let mut right_min = f64::INFINITY;
        for j in i + 1..n {
            right_min = right_min.min(values[j]);
            if values[j] > v {
                break;
            }
        }
        if (v - left_min).min(v - right_min) >= required {
            return Some((i, v));
        }
    }
    None
}

/// The radar envelopes available for parameter extraction. Missing entries
/// leave the dependent parameters unset.
#[derive(Debug, Clone, Default)]
pub struct RadarEnvelopeSet {
    pub toe: Option<EnvelopeSignal>,
    pub ankle: Option<EnvelopeSignal>,
    pub knee: Option<EnvelopeSignal>,
}

impl From<crate::envelope::JointEnvelopes> for RadarEnvelopeSet {
    fn from(j: crate::envelope::JointEnvelopes) -> Self {
        RadarEnvelopeSet {
            toe: Some(j.toe),
            ankle: Some(j.ankle),
            knee: Some(j.knee),
        }
    }
}

/// Extract the radar-domain parameters.
///
/// Temporal parameters come from the minima/boundary spacings, lengths from
/// the treadmill speed, velocities from the averaged joint envelopes inside
/// the leg's step window, and the flight time from the knee-velocity peak
/// (`flight = stride - stride * knee_pct / 100`, so stance + flight = stride
/// exactly).
pub fn extract_params_radar(
    cycles: &CycleSet,
    envelopes: &RadarEnvelopeSet,
    speed_mps: f64,
    cfg: &ParamConfig,
) -> Result<GaitParameters> {
    if !(speed_mps > 0.0) {
        return Err(Error::invalid("treadmill speed must be positive"));
    }
    if cycles.n_cycles() < cfg.min_cycles {
        return Err(Error::insufficient(format!(
            "parameter extraction needs at least {} gait cycles, got {}",
            cfg.min_cycles,
            cycles.n_cycles()
        )));
    }
    let stride = mean_diff(&cycles.boundaries_s)
        .ok_or_else(|| Error::insufficient("not enough cycle boundaries"))?;
    let step = mean_diff(&cycles.minima_s)
        .ok_or_else(|| Error::insufficient("not enough envelope minima"))?;

    let mut params = GaitParameters {
        stride_time_s: Some(stride),
        step_time_s: Some(step),
        cadence_spm: Some(60.0 / step),
        stride_length_cm: Some(stride * speed_mps * 100.0),
        step_length_cm: Some(step * speed_mps * 100.0),
        ..GaitParameters::default()
    };

    // The leg's own swing occupies the cycle's second step.
    let window_lo_frac = (1.0 - step / stride).clamp(0.0, 1.0);
    let averaged_window_max = |env: &EnvelopeSignal| -> Result<f64> {
        let avg = average_cycles(
            &env.time_s,
            &env.velocity_mps,
            &cycles.boundaries_s,
            cfg.grid_points,
        )?;
        let lo = (window_lo_frac * (cfg.grid_points - 1) as f64).ceil() as usize;
        Ok(avg.mean[lo..]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max))
    };
    if let Some(toe) = &envelopes.toe {
        params.max_foot_velocity_mps = Some(averaged_window_max(toe)?);
    }
    if let Some(ankle) = &envelopes.ankle {
        params.max_ankle_velocity_mps = Some(averaged_window_max(ankle)?);
    }
    if let Some(knee) = &envelopes.knee {
        let avg = average_cycles(
            &knee.time_s,
            &knee.velocity_mps,
            &cycles.boundaries_s,
            cfg.grid_points,
        )?;
        let lo = (window_lo_frac * (cfg.grid_points - 1) as f64).ceil() as usize;
        if let Some((idx, _)) =
            first_prominent_max(&avg.mean, lo, cfg.grid_points - 1, cfg.knee_prominence_frac)
        {
            let pct = avg.phase_pct[idx];
            let flight = stride * (100.0 - pct) / 100.0;
            params.knee_max_time_pct = Some(pct);
            params.flight_time_s = Some(flight);
            params.stance_time_s = Some(stride - flight);
        }
        params.max_knee_velocity_mps = Some(
            avg.mean[lo..]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    Ok(params)
}

fn mean_diff(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    Some((times[times.len() - 1] - times[0]) / (times.len() - 1) as f64)
}

/// Projected single-leg joint velocities used for the reference parameters.
#[derive(Debug, Clone)]
pub struct ReferenceVelocities {
    pub toe: VelocityTrace,
    pub ankle: VelocityTrace,
    pub knee: VelocityTrace,
}

/// Extract the reference-domain parameters from force-plate events and
/// (optionally) projected marker velocities of the same leg.
pub fn extract_params_reference(
    events: &GaitEvents,
    other_events: Option<&GaitEvents>,
    velocities: Option<&ReferenceVelocities>,
    speed_mps: f64,
    cfg: &ParamConfig,
) -> Result<GaitParameters> {
    if !(speed_mps > 0.0) {
        return Err(Error::invalid("treadmill speed must be positive"));
    }
    let gait_cycles = segment_gait_cycles(events)?;

    let stride = gait_cycles.iter().map(|c| c.stride_s()).sum::<f64>() / gait_cycles.len() as f64;
    let mut stances = Vec::new();
    let mut flights = Vec::new();
    for c in &gait_cycles {
        if let Some(to) = c.toe_off_s {
            stances.push(to - c.start_s);
            flights.push(c.end_s - to);
        }
    }
    let mut params = GaitParameters {
        stride_time_s: Some(stride),
        stride_length_cm: Some(stride * speed_mps * 100.0),
        ..GaitParameters::default()
    };
    if !stances.is_empty() {
        params.stance_time_s = Some(stances.iter().sum::<f64>() / stances.len() as f64);
        params.flight_time_s = Some(flights.iter().sum::<f64>() / flights.len() as f64);
    }

    // Step: own heel strike to the following heel strike of the other foot.
    if let Some(other) = other_events {
        let mut steps = Vec::new();
        for c in &gait_cycles {
            if let Some(&t) = other
                .heel_strikes_s
                .iter()
                .find(|&&t| t > c.start_s && t < c.end_s)
            {
                steps.push(t - c.start_s);
            }
        }
        if !steps.is_empty() {
            let step = steps.iter().sum::<f64>() / steps.len() as f64;
            params.step_time_s = Some(step);
            params.cadence_spm = Some(60.0 / step);
            params.step_length_cm = Some(step * speed_mps * 100.0);
        }
    }

    if let Some(v) = velocities {
        let boundaries = &events.heel_strikes_s;
        let averaged_max = |trace: &VelocityTrace| -> Result<f64> {
            let avg = average_cycles(
                &trace.time_s,
                &trace.velocity_mps,
                boundaries,
                cfg.grid_points,
            )?;
            Ok(avg.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        };
        params.max_foot_velocity_mps = Some(averaged_max(&v.toe)?);
        params.max_ankle_velocity_mps = Some(averaged_max(&v.ankle)?);
        let avg = average_cycles(
            &v.knee.time_s,
            &v.knee.velocity_mps,
            boundaries,
            cfg.grid_points,
        )?;
        params.max_knee_velocity_mps =
            Some(avg.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if let Some((idx, _)) =
            first_prominent_max(&avg.mean, 1, cfg.grid_points - 1, cfg.knee_prominence_frac)
        {
            params.knee_max_time_pct = Some(avg.phase_pct[idx]);
        }
    }
    Ok(params)
}
