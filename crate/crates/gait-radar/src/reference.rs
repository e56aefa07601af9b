//! Ground-truth processing: force plates and motion capture.
//!
//! Vertical ground-reaction forces yield the gait events (heel strike via a
//! 400 N rise, toe off via unloading below 15 N on a low-pass filtered
//! trace); motion-capture marker trajectories yield radial joint velocities
//! comparable to the radar envelopes. Both run at a common 1 kHz grid.
//!
//! Sign convention: projected velocities are positive for forward limb
//! motion in both radar views (the back view flips the geometry), matching
//! the envelope extraction which reads the Doppler side carrying the forward
//! motion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::butter_lowpass;

/// Body side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leg {
    Left,
    Right,
}

impl Leg {
    pub fn other(self) -> Leg {
        match self {
            Leg::Left => Leg::Right,
            Leg::Right => Leg::Left,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Leg::Left => "l",
            Leg::Right => "r",
        }
    }
}

impl std::fmt::Display for Leg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Leg::Left => "left",
            Leg::Right => "right",
        })
    }
}

/// Vertical ground-reaction force of one leg on a uniform time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrfTrace {
    pub leg: Leg,
    pub sample_rate_hz: f64,
    pub time_s: Vec<f64>,
    /// Vertical force in newtons, nonnegative after construction.
    pub force_n: Vec<f64>,
}

impl GrfTrace {
    /// Build a trace, clamping mild sensor noise below zero. Values under
    /// `-5 N` are rejected as corrupt.
    pub fn new(leg: Leg, sample_rate_hz: f64, time_s: Vec<f64>, force_n: Vec<f64>) -> Result<Self> {
        if time_s.len() != force_n.len() {
            return Err(Error::invalid("GRF time and force lengths differ"));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::invalid("GRF sample rate must be positive"));
        }
        if let Some(f) = force_n.iter().find(|f| **f < -5.0 || !f.is_finite()) {
            return Err(Error::invalid(format!(
                "GRF contains implausible force value {f} N"
            )));
        }
        let force_n = force_n.into_iter().map(|f| f.max(0.0)).collect();
        Ok(GrfTrace {
            leg,
            sample_rate_hz,
            time_s,
            force_n,
        })
    }

    /// Linearly resample onto a uniform grid at `target_hz`.
    pub fn upsample(&self, target_hz: f64) -> Result<GrfTrace> {
        let (time_s, force_n) = upsample_uniform(&self.time_s, &self.force_n, self.sample_rate_hz, target_hz)?;
        Ok(GrfTrace {
            leg: self.leg,
            sample_rate_hz: target_hz,
            time_s,
            force_n,
        })
    }
}

/// Linear resampling of a uniformly sampled series onto a finer grid.
///
/// The output grid starts exactly at the first input sample and steps by
/// `1/target_hz`; samples never extrapolate past the input.
///
/// # Errors
///
/// `target_hz` must be at least the source rate.
pub fn upsample_uniform(
    time_s: &[f64],
    values: &[f64],
    source_hz: f64,
    target_hz: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if time_s.len() != values.len() || time_s.len() < 2 {
        return Err(Error::insufficient("resampling needs at least two samples"));
    }
    if !(target_hz >= source_hz) {
        return Err(Error::invalid(format!(
            "target rate {target_hz} Hz below source rate {source_hz} Hz"
        )));
    }
    if (target_hz - source_hz).abs() < 1e-9 * source_hz {
        return Ok((time_s.to_vec(), values.to_vec()));
    }
    let t0 = time_s[0];
    let t_end = *time_s.last().unwrap();
    let dt = 1.0 / target_hz;
    // Half-sample tolerance so the final input sample is kept despite
    // floating-point jitter on the grid.
    let n_out = ((t_end - t0) / dt + 0.5 * dt).floor() as usize + 1;
    let mut out_t = Vec::with_capacity(n_out);
    let mut out_v = Vec::with_capacity(n_out);
    let mut seg = 0usize;
    for k in 0..n_out {
        let t = t0 + k as f64 * dt;
        while seg + 2 < time_s.len() && time_s[seg + 1] <= t {
            seg += 1;
        }
        let (ta, tb) = (time_s[seg], time_s[seg + 1]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        out_t.push(t);
        out_v.push(values[seg] + w * (values[seg + 1] - values[seg]));
    }
    Ok((out_t, out_v))
}

/// Detection thresholds for the gait events.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventConfig {
    /// Loading threshold whose upward crossing marks a stance, N.
    pub upcross_n: f64,
    /// Contact threshold for onset/offset search, N.
    pub contact_n: f64,
    /// Force below this value counts as flight, N.
    pub flight_n: f64,
    /// Toe-off search starts this long after the heel strike, s.
    pub min_stance_s: f64,
    /// Cutoff of the zero-phase Butterworth filter used for toe-off, Hz.
    pub filter_cutoff_hz: f64,
    /// Order of that filter (applied forward and backward).
    pub filter_order: usize,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig {
            upcross_n: 400.0,
            contact_n: 15.0,
            flight_n: 1.0,
            min_stance_s: 0.1,
            filter_cutoff_hz: 20.0,
            filter_order: 2,
        }
    }
}

/// Heel-strike and toe-off times of one leg.
///
/// Events are strictly increasing; every toe off lies between a heel strike
/// and the following one (pairing is by time, not index, so a missing toe
/// off does not shift later cycles).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitEvents {
    pub leg: Leg,
    pub heel_strikes_s: Vec<f64>,
    pub toe_offs_s: Vec<f64>,
    pub warnings: Vec<String>,
}

impl GaitEvents {
    /// Check the ordering invariant: heel strikes strictly increasing and
    /// each toe off inside exactly one stride.
    pub fn validate(&self) -> Result<()> {
        let hs = &self.heel_strikes_s;
        if hs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("heel strikes must be strictly increasing"));
        }
        if self.toe_offs_s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("toe offs must be strictly increasing"));
        }
        for &to in &self.toe_offs_s {
            let k = match hs.iter().rposition(|&h| h < to) {
                Some(k) => k,
                None => return Err(Error::invalid("toe off before first heel strike")),
            };
            if k + 1 < hs.len() && to >= hs[k + 1] {
                return Err(Error::invalid("toe off collides with next heel strike"));
            }
        }
        Ok(())
    }
}

/// Detect heel strikes: for each upward crossing of the loading threshold,
/// scan backwards for the last sample below the contact threshold that is
/// either below the flight threshold or larger than its successor.
pub fn detect_heel_strikes(grf: &GrfTrace, cfg: &EventConfig) -> Vec<f64> {
    let f = &grf.force_n;
    let mut events = Vec::new();
    for i in 1..f.len() {
        if !(f[i - 1] < cfg.upcross_n && f[i] >= cfg.upcross_n) {
            continue;
        }
        let mut onset = None;
        for k in (0..i).rev() {
            if f[k] < cfg.contact_n && (f[k] < cfg.flight_n || f[k] > f[k + 1]) {
                onset = Some(k);
                break;
            }
        }
        if let Some(k) = onset {
            let t = grf.time_s[k];
            // Several crossings within one stance resolve to the same onset.
            if events.last().map_or(true, |&prev| t > prev) {
                events.push(t);
            }
        }
    }
    events
}

/// Detect toe offs: the force trace is low-pass filtered with a zero-phase
/// Butterworth filter, and for each heel strike the first filtered sample
/// below the contact threshold after the minimum stance duration gates the
/// search. The reported instant is then refined on the raw trace (the start
/// of its below-threshold run), because smoothing rounds the force's landing
/// corner and would bias the crossing several milliseconds late. Strides
/// where the next heel strike arrives first yield a warning instead of an
/// event.
pub fn detect_toe_offs(
    grf: &GrfTrace,
    heel_strikes_s: &[f64],
    cfg: &EventConfig,
) -> Result<(Vec<f64>, Vec<String>)> {
    if heel_strikes_s.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("heel strikes must be strictly increasing"));
    }
    if heel_strikes_s.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let sos = butter_lowpass(cfg.filter_order, cfg.filter_cutoff_hz, grf.sample_rate_hz)?;
    let filtered = sos.filtfilt(&grf.force_n)?;
    let t0 = grf.time_s[0];
    let fs = grf.sample_rate_hz;
    let n = filtered.len();

    let mut toe_offs = Vec::new();
    let mut warnings = Vec::new();
    for (k, &hs) in heel_strikes_s.iter().enumerate() {
        let start = (((hs - t0) + cfg.min_stance_s) * fs).round() as usize;
        let next_hs = heel_strikes_s.get(k + 1).copied();
        let limit = match next_hs {
            Some(t) => ((((t - t0) * fs).round() as usize) + 1).min(n),
            None => n,
        };
        let found = (start..limit.max(start)).find(|&i| filtered[i] < cfg.contact_n);
        let refined = found.and_then(|i| {
            let raw = &grf.force_n;
            if raw[i] < cfg.contact_n {
                let mut j = i;
                while j > start && raw[j - 1] < cfg.contact_n {
                    j -= 1;
                }
                Some(j)
            } else {
                (i..limit.max(start)).find(|&j| raw[j] < cfg.contact_n)
            }
        });
        match refined {
            Some(i) if next_hs.map_or(true, |t| grf.time_s[i] < t) => {
                toe_offs.push(grf.time_s[i]);
            }
            _ => warnings.push(format!(
                "no toe off found for the {} heel strike at t = {hs:.3} s",
                grf.leg
            )),
        }
    }
    Ok((toe_offs, warnings))
}

/// Run both detectors on one leg's trace.
pub fn detect_gait_events(grf: &GrfTrace, cfg: &EventConfig) -> Result<GaitEvents> {
    let heel_strikes_s = detect_heel_strikes(grf, cfg);
    let (toe_offs_s, warnings) = detect_toe_offs(grf, &heel_strikes_s, cfg)?;
    let events = GaitEvents {
        leg: grf.leg,
        heel_strikes_s,
        toe_offs_s,
        warnings,
    };
    events.validate()?;
    Ok(events)
}

/// One gait cycle: heel strike to the next heel strike of the same leg.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaitCycle {
    pub start_s: f64,
    pub end_s: f64,
    /// Toe off within the cycle (may be absent if detection failed there).
    pub toe_off_s: Option<f64>,
}

impl GaitCycle {
    pub fn stride_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Split events into cycles `[hs_i, hs_{i+1})`, attaching each cycle's toe
/// off by time.
///
/// # Errors
///
/// Needs at least two heel strikes.
pub fn segment_gait_cycles(events: &GaitEvents) -> Result<Vec<GaitCycle>> {
    let hs = &events.heel_strikes_s;
    if hs.len() < 2 {
        return Err(Error::insufficient(format!(
            "gait segmentation needs at least two heel strikes, got {}",
            hs.len()
        )));
    }
    Ok(hs
        .windows(2)
        .map(|w| {
            let toe_off_s = events
                .toe_offs_s
                .iter()
                .copied()
                .find(|&t| t > w[0] && t < w[1]);
            GaitCycle {
                start_s: w[0],
                end_s: w[1],
                toe_off_s,
            }
        })
        .collect())
}

/// Marker identity: joint and, except for the sacrum, body side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    ToeLeft,
    ToeRight,
    AnkleLeft,
    AnkleRight,
    KneeLeft,
    KneeRight,
    HipLeft,
    HipRight,
    Sacrum,
}

/// Joint class of a marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Toe,
    Ankle,
    Knee,
    Hip,
    Sacrum,
}

impl Marker {
    pub const ALL: [Marker; 9] = [
        Marker::ToeLeft,
        Marker::ToeRight,
        Marker::AnkleLeft,
        Marker::AnkleRight,
        Marker::KneeLeft,
        Marker::KneeRight,
        Marker::HipLeft,
        Marker::HipRight,
        Marker::Sacrum,
    ];

    pub fn joint(self) -> Joint {
        match self {
            Marker::ToeLeft | Marker::ToeRight => Joint::Toe,
            Marker::AnkleLeft | Marker::AnkleRight => Joint::Ankle,
            Marker::KneeLeft | Marker::KneeRight => Joint::Knee,
            Marker::HipLeft | Marker::HipRight => Joint::Hip,
            Marker::Sacrum => Joint::Sacrum,
        }
    }

    pub fn leg(self) -> Option<Leg> {
        match self {
            Marker::ToeLeft | Marker::AnkleLeft | Marker::KneeLeft | Marker::HipLeft => {
                Some(Leg::Left)
            }
            Marker::ToeRight | Marker::AnkleRight | Marker::KneeRight | Marker::HipRight => {
                Some(Leg::Right)
            }
            Marker::Sacrum => None,
        }
    }

    /// Column prefix in the mocap CSV schema (`toe_l`, ..., `sacrum`).
    pub fn column_prefix(self) -> &'static str {
        match self {
            Marker::ToeLeft => "toe_l",
            Marker::ToeRight => "toe_r",
            Marker::AnkleLeft => "ankle_l",
            Marker::AnkleRight => "ankle_r",
            Marker::KneeLeft => "knee_l",
            Marker::KneeRight => "knee_r",
            Marker::HipLeft => "hip_l",
            Marker::HipRight => "hip_r",
            Marker::Sacrum => "sacrum",
        }
    }

    pub fn from_column_prefix(s: &str) -> Option<Marker> {
        Marker::ALL.iter().copied().find(|m| m.column_prefix() == s)
    }

    pub fn for_joint(joint: Joint, leg: Leg) -> Option<Marker> {
        match (joint, leg) {
            (Joint::Toe, Leg::Left) => Some(Marker::ToeLeft),
            (Joint::Toe, Leg::Right) => Some(Marker::ToeRight),
            (Joint::Ankle, Leg::Left) => Some(Marker::AnkleLeft),
            (Joint::Ankle, Leg::Right) => Some(Marker::AnkleRight),
            (Joint::Knee, Leg::Left) => Some(Marker::KneeLeft),
            (Joint::Knee, Leg::Right) => Some(Marker::KneeRight),
            (Joint::Hip, Leg::Left) => Some(Marker::HipLeft),
            (Joint::Hip, Leg::Right) => Some(Marker::HipRight),
            (Joint::Sacrum, _) => None,
        }
    }
}

/// One marker's position over time. Coordinates: x lateral, y walking
/// direction, z up; meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerTrajectory {
    pub marker: Marker,
    pub sample_rate_hz: f64,
    pub time_s: Vec<f64>,
    pub position_m: Vec<[f64; 3]>,
}

impl MarkerTrajectory {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    /// Linear resampling of all three coordinates onto `target_hz`.
    pub fn upsample(&self, target_hz: f64) -> Result<MarkerTrajectory> {
        let mut coords = Vec::with_capacity(3);
        let mut time = Vec::new();
        for axis in 0..3 {
            let vals: Vec<f64> = self.position_m.iter().map(|p| p[axis]).collect();
            let (t, v) = upsample_uniform(&self.time_s, &vals, self.sample_rate_hz, target_hz)?;
            time = t;
            coords.push(v);
        }
        let position_m = (0..time.len())
            .map(|i| [coords[0][i], coords[1][i], coords[2][i]])
            .collect();
        Ok(MarkerTrajectory {
            marker: self.marker,
            sample_rate_hz: target_hz,
            time_s: time,
            position_m,
        })
    }
}

/// A full mocap recording (any subset of the nine markers).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MocapRecording {
    pub markers: Vec<MarkerTrajectory>,
}

impl MocapRecording {
    pub fn get(&self, marker: Marker) -> Option<&MarkerTrajectory> {
        self.markers.iter().find(|t| t.marker == marker)
    }

    pub fn upsample(&self, target_hz: f64) -> Result<MocapRecording> {
        Ok(MocapRecording {
            markers: self
                .markers
                .iter()
                .map(|t| t.upsample(target_hz))
                .collect::<Result<_>>()?,
        })
    }
}

/// Zero-phase low-pass filtering of marker positions, per coordinate.
pub fn filter_mocap(
    markers: &[MarkerTrajectory],
    cutoff_hz: f64,
    order: usize,
) -> Result<Vec<MarkerTrajectory>> {
    markers
        .iter()
        .map(|traj| {
            let sos = butter_lowpass(order, cutoff_hz, traj.sample_rate_hz)?;
            let mut out = traj.clone();
            for axis in 0..3 {
                let vals: Vec<f64> = traj.position_m.iter().map(|p| p[axis]).collect();
                let filtered = sos.filtfilt(&vals)?;
                for (p, v) in out.position_m.iter_mut().zip(filtered) {
                    p[axis] = v;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Default zero-phase mocap filter: fourth order, 10 Hz.
pub fn filter_mocap_default(markers: &[MarkerTrajectory]) -> Result<Vec<MarkerTrajectory>> {
    filter_mocap(markers, 10.0, 4)
}

/// Radar geometry relative to the walking plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Geometry {
    /// Elevation angle between the radar line of sight and the walking
    /// direction at foot level, degrees.
    pub theta_deg: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { theta_deg: 18.0 }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_deg >= 0.0 && self.theta_deg < 90.0) {
            return Err(Error::invalid(format!(
                "elevation angle must lie in [0, 90) degrees, got {}",
                self.theta_deg
            )));
        }
        Ok(())
    }
}

/// A scalar velocity trace on a uniform grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VelocityTrace {
    pub marker: Marker,
    pub sample_rate_hz: f64,
    pub time_s: Vec<f64>,
    pub velocity_mps: Vec<f64>,
}

/// Cartesian marker velocities via central differences (one-sided at the
/// edges).
pub fn marker_velocity(traj: &MarkerTrajectory) -> Result<Vec<[f64; 3]>> {
    let n = traj.len();
    if n < 2 {
        return Err(Error::insufficient(
            "velocity needs at least two position samples",
        ));
    }
    let dt = 1.0 / traj.sample_rate_hz;
    let p = &traj.position_m;
    let mut v = vec![[0.0; 3]; n];
    for axis in 0..3 {
        v[0][axis] = (p[1][axis] - p[0][axis]) / dt;
        v[n - 1][axis] = (p[n - 1][axis] - p[n - 2][axis]) / dt;
        for i in 1..n - 1 {
            v[i][axis] = (p[i + 1][axis] - p[i - 1][axis]) / (2.0 * dt);
        }
    }
    Ok(v)
}

/// Project a marker's velocity onto the radar line of sight.
///
/// Toe, ankle, hip and sacrum use `v_y cos θ ± v_z sin θ` (elevation term
/// flips for the back view); the knee uses the pure walking-direction
/// component. Output is positive for forward motion in both views.
pub fn project_radial_velocity(
    traj: &MarkerTrajectory,
    geom: &Geometry,
    view: crate::signal::View,
) -> Result<VelocityTrace> {
    geom.validate()?;
    let v = marker_velocity(traj)?;
    let theta = geom.theta_deg.to_radians();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    let elev_sign = match view {
        crate::signal::View::Front => 1.0,
        crate::signal::View::Back => -1.0,
    };
    let velocity_mps = v
        .iter()
        .map(|v| match traj.marker.joint() {
            Joint::Knee => v[1],
            _ => v[1] * cos_t + elev_sign * v[2] * sin_t,
        })
        .collect();
    Ok(VelocityTrace {
        marker: traj.marker,
        sample_rate_hz: traj.sample_rate_hz,
        time_s: traj.time_s.clone(),
        velocity_mps,
    })
}

/// Per-cycle gap between the toe off and the knee-velocity peak.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaTStats {
    /// Number of cycles that contributed.
    pub n: usize,
    /// Mean of `toe_off - argmax(knee velocity)`, seconds.
    pub mean_s: f64,
    /// Sample standard deviation, seconds (0 for a single cycle).
    pub std_s: f64,
    /// Gaussian 95% confidence interval of the mean, seconds.
    pub ci95_s: (f64, f64),
    /// The individual differences, seconds.
    pub deltas_s: Vec<f64>,
}

/// Validate the knee-velocity flight-time proxy: per gait cycle, the time
/// from the maximal knee radial velocity to the toe off.
///
/// # Errors
///
/// Fails when no cycle has both a toe off and knee-velocity samples.
pub fn validate_flight_time_proxy(
    knee: &VelocityTrace,
    events: &GaitEvents,
) -> Result<DeltaTStats> {
    let cycles = segment_gait_cycles(events)?;
    let mut deltas = Vec::new();
    for cycle in &cycles {
        let Some(toe_off) = cycle.toe_off_s else {
            continue;
        };
        let lo = knee.time_s.partition_point(|&t| t < cycle.start_s);
        let hi = knee.time_s.partition_point(|&t| t < cycle.end_s);
        if hi <= lo {
            continue;
        }
        let (peak_idx, _) = knee.velocity_mps[lo..hi]
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        deltas.push(toe_off - knee.time_s[lo + peak_idx]);
    }
    if deltas.is_empty() {
        return Err(Error::insufficient(
            "no gait cycle with both a toe off and knee-velocity data",
        ));
    }
    let n = deltas.len();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = 1.959_963_984_540_054 * std / (n as f64).sqrt();
    Ok(DeltaTStats {
        n,
        mean_s: mean,
        std_s: std,
        ci95_s: (mean - half, mean + half),
        deltas_s: deltas,
    })
}
