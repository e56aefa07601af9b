//! Synthetic treadmill-gait generator and radar-return simulator.
//!
//! Serves as the ground-truth oracle for the whole pipeline: it produces
//! marker trajectories, ground reaction forces and radar returns from one
//! parametric gait model, together with the exact events and parameters the
//! extraction chain is supposed to recover.
//!
//! Velocity templates are piecewise raised-cosine bumps over the normalized
//! cycle with an exactly zero cycle mean (treadmill walking: no net
//! displacement), so trajectories are periodic and all peak values/times are
//! known in closed form. The radar is modeled in the far field: each body
//! part is a point scatterer whose range varies along a fixed line of sight
//! (feet seen under the mounting depression angle, knee and torso at radar
//! height), phase `−4πR(t)/λ`, so that motion toward the radar produces a
//! positive Doppler shift.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::GaitParameters;
use crate::reference::{GaitEvents, GrfTrace, Joint, Leg, MarkerTrajectory, MocapRecording};
use crate::signal::{IqStream, RadarConfig, StftConfig, View};

/// Mounting depression angle of the radar toward the feet, degrees.
pub const FOOT_ELEVATION_DEG: f64 = 18.0;

/// Knee-orthosis restriction level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KneeRestriction {
    None,
    Deg45,
    Deg30,
    Deg20,
    Deg10,
}

impl KneeRestriction {
    /// Tag used in parameter metadata and file names.
    pub fn label(self) -> &'static str {
        match self {
            KneeRestriction::None => "none",
            KneeRestriction::Deg45 => "restricted_45deg",
            KneeRestriction::Deg30 => "restricted_30deg",
            KneeRestriction::Deg20 => "restricted_20deg",
            KneeRestriction::Deg10 => "restricted_10deg",
        }
    }
}

/// Parametric description of one synthetic walker.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaitModelConfig {
    /// Treadmill belt speed, m/s.
    pub speed_mps: f64,
    /// Nominal stride (full cycle) duration, seconds.
    pub stride_time_s: f64,
    pub knee_restriction: KneeRestriction,
    /// Peak radial velocities of the joints, m/s. Must be ordered
    /// toe > ankle > knee.
    pub toe_peak_mps: f64,
    pub ankle_peak_mps: f64,
    pub knee_peak_mps: f64,
    /// Position of the knee-velocity peak within the cycle, percent.
    pub knee_max_pct: f64,
    /// Stance fraction of the cycle.
    pub duty_factor: f64,
    /// Body weight for the force traces, Newton.
    pub body_weight_n: f64,
    /// Standard deviation of per-cycle Gaussian duration jitter, seconds.
    pub jitter_std_s: f64,
}

impl Default for GaitModelConfig {
    fn default() -> Self {
        preset("normal_1.1").unwrap()
    }
}

/// Built-in walker configurations, seeded from published per-condition
/// averages (speeds 0.7 / 1.1 m/s, unrestricted and 10°-restricted knee).
pub fn preset(name: &str) -> Option<GaitModelConfig> {
    let cfg = match name {
        "normal_0.7" => GaitModelConfig {
            speed_mps: 0.7,
            stride_time_s: 1.24,
            knee_restriction: KneeRestriction::None,
            toe_peak_mps: 2.00,
            ankle_peak_mps: 1.59,
            knee_peak_mps: 1.00,
            knee_max_pct: 65.0,
            duty_factor: 0.65,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "normal_1.1" => GaitModelConfig {
            speed_mps: 1.1,
            stride_time_s: 1.04,
            knee_restriction: KneeRestriction::None,
            toe_peak_mps: 2.63,
            ankle_peak_mps: 2.14,
            knee_peak_mps: 1.26,
            knee_max_pct: 62.0,
            duty_factor: 0.62,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted45_0.7" => GaitModelConfig {
            speed_mps: 0.7,
            stride_time_s: 1.24,
            knee_restriction: KneeRestriction::Deg45,
            toe_peak_mps: 2.01,
            ankle_peak_mps: 1.65,
            knee_peak_mps: 0.81,
            knee_max_pct: 61.3,
            duty_factor: 0.645,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted30_0.7" => GaitModelConfig {
            speed_mps: 0.7,
            stride_time_s: 1.23,
            knee_restriction: KneeRestriction::Deg30,
            toe_peak_mps: 1.96,
            ankle_peak_mps: 1.68,
            knee_peak_mps: 0.64,
            knee_max_pct: 62.5,
            duty_factor: 0.634,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted20_0.7" => GaitModelConfig {
            speed_mps: 0.7,
            stride_time_s: 1.23,
            knee_restriction: KneeRestriction::Deg20,
            toe_peak_mps: 1.95,
            ankle_peak_mps: 1.69,
            knee_peak_mps: 0.59,
            knee_max_pct: 61.7,
            duty_factor: 0.634,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted10_0.7" => GaitModelConfig {
            speed_mps: 0.7,
            stride_time_s: 1.23,
            knee_restriction: KneeRestriction::Deg10,
            toe_peak_mps: 1.92,
            ankle_peak_mps: 1.69,
            knee_peak_mps: 0.54,
            knee_max_pct: 63.0,
            duty_factor: 0.63,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted45_1.1" => GaitModelConfig {
            speed_mps: 1.1,
            stride_time_s: 1.03,
            knee_restriction: KneeRestriction::Deg45,
            toe_peak_mps: 2.67,
            ankle_peak_mps: 2.22,
            knee_peak_mps: 1.07,
            knee_max_pct: 59.2,
            duty_factor: 0.621,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted30_1.1" => GaitModelConfig {
            speed_mps: 1.1,
            stride_time_s: 1.02,
            knee_restriction: KneeRestriction::Deg30,
            toe_peak_mps: 2.65,
            ankle_peak_mps: 2.25,
            knee_peak_mps: 0.90,
            knee_max_pct: 59.8,
            duty_factor: 0.618,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted20_1.1" => GaitModelConfig {
            speed_mps: 1.1,
            stride_time_s: 1.02,
            knee_restriction: KneeRestriction::Deg20,
            toe_peak_mps: 2.63,
            ankle_peak_mps: 2.26,
            knee_peak_mps: 0.85,
            knee_max_pct: 59.8,
            duty_factor: 0.618,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        "restricted10_1.1" => GaitModelConfig {
            speed_mps: 1.1,
            stride_time_s: 1.02,
            knee_restriction: KneeRestriction::Deg10,
            toe_peak_mps: 2.59,
            ankle_peak_mps: 2.24,
            knee_peak_mps: 0.77,
            knee_max_pct: 61.0,
            duty_factor: 0.61,
            body_weight_n: 700.0,
            jitter_std_s: 0.0,
        },
        _ => return None,
    };
    Some(cfg)
}

pub const PRESET_NAMES: [&str; 10] = [
    "normal_0.7",
    "normal_1.1",
    "restricted45_0.7",
    "restricted45_1.1",
    "restricted30_0.7",
    "restricted30_1.1",
    "restricted20_0.7",
    "restricted20_1.1",
    "restricted10_0.7",
    "restricted10_1.1",
];

impl GaitModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return Err(Error::invalid("speed must be positive"));
        }
        if !(self.stride_time_s > 0.2 && self.stride_time_s < 5.0) {
            return Err(Error::invalid("stride time out of walking range"));
        }
        if !(self.duty_factor > 0.5 && self.duty_factor < 0.9) {
            return Err(Error::invalid(
                "duty factor must lie in (0.5, 0.9) for walking",
            ));
        }
        if !(self.toe_peak_mps > self.ankle_peak_mps
            && self.ankle_peak_mps > self.knee_peak_mps
            && self.knee_peak_mps > 0.0)
        {
            return Err(Error::invalid(
                "peak velocities must be ordered toe > ankle > knee > 0",
            ));
        }
        if !(self.knee_max_pct > 0.0 && self.knee_max_pct < 100.0) {
            return Err(Error::invalid("knee peak must fall inside the cycle"));
        }
        if !(self.body_weight_n > 0.0) {
            return Err(Error::invalid("body weight must be positive"));
        }
        if !(self.jitter_std_s >= 0.0 && self.jitter_std_s < 0.2 * self.stride_time_s) {
            return Err(Error::invalid("cycle jitter out of range"));
        }
        // Template feasibility (errors mention the offending joint).
        JointTemplates::build(self)?;
        Ok(())
    }
}

/// One joint's velocity over the normalized cycle: a raised-cosine bump
/// (optionally with a flat top) above a constant backward base speed,
/// with exactly zero mean so trajectories stay periodic.
#[derive(Debug, Clone, Copy)]
struct BumpTemplate {
    /// Support start/end and plateau bounds, cycle fractions.
    lo: f64,
    p0: f64,
    p1: f64,
    hi: f64,
    /// Bump amplitude above the base.
    amp: f64,
    /// Constant backward speed outside the bump (subtracted everywhere).
    base: f64,
}

impl BumpTemplate {
    /// Unit bump shape at cycle fraction `phi` ∈ [0,1).
    fn shape(&self, phi: f64) -> f64 {
        if phi <= self.lo || phi >= self.hi {
            0.0
        } else if phi < self.p0 {
            let x = (phi - self.lo) / (self.p0 - self.lo);
            (std::f64::consts::FRAC_PI_2 * x).sin().powi(2)
        } else if phi <= self.p1 {
            1.0
        } else {
            let x = (phi - self.p1) / (self.hi - self.p1);
            (std::f64::consts::FRAC_PI_2 * x).cos().powi(2)
        }
    }

    /// ∫₀^x of the unit shape (piecewise closed form).
    fn shape_integral(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        let mut acc = 0.0;
        // Rising flank: ∫ sin²(πu/2w) du = u/2 − w·sin(πu/w)/(2π)
        let w_r = self.p0 - self.lo;
        if x > self.lo && w_r > 0.0 {
            let u = (x.min(self.p0)) - self.lo;
            acc += u / 2.0 - w_r * (PI * u / w_r).sin() / (2.0 * PI);
        }
        if x > self.p0 {
            acc += x.min(self.p1) - self.p0;
        }
        let w_f = self.hi - self.p1;
        if x > self.p1 && w_f > 0.0 {
            let u = (x.min(self.hi)) - self.p1;
            acc += u / 2.0 + w_f * (PI * u / w_f).sin() / (2.0 * PI);
        }
        acc
    }

    fn velocity(&self, phi: f64) -> f64 {
        -self.base + self.amp * self.shape(phi)
    }

    /// ∫₀^phi velocity; zero at phi = 1 by construction.
    fn integral(&self, phi: f64) -> f64 {
        -self.base * phi + self.amp * self.shape_integral(phi)
    }
}

/// Mean-zero sinusoidal torso sway (two oscillations per cycle — one per
/// step).
#[derive(Debug, Clone, Copy)]
struct SwayTemplate {
    amp: f64,
    phase: f64,
}

impl SwayTemplate {
    fn velocity(&self, phi: f64) -> f64 {
        self.amp * (4.0 * std::f64::consts::PI * phi + self.phase).sin()
    }

    fn integral(&self, phi: f64) -> f64 {
        let w = 4.0 * std::f64::consts::PI;
        self.amp * (self.phase.cos() - (w * phi + self.phase).cos()) / w
    }
}

#[derive(Debug, Clone, Copy)]
enum VelocityTemplate {
    Bump(BumpTemplate),
    Sway(SwayTemplate),
}

impl VelocityTemplate {
    fn velocity(&self, phi: f64) -> f64 {
        match self {
            VelocityTemplate::Bump(b) => b.velocity(phi),
            VelocityTemplate::Sway(s) => s.velocity(phi),
        }
    }

    fn integral(&self, phi: f64) -> f64 {
        match self {
            VelocityTemplate::Bump(b) => b.integral(phi),
            VelocityTemplate::Sway(s) => s.integral(phi),
        }
    }

    /// ∫₀^x velocity(frac(u + offset)) du — the displacement of a leg whose
    /// cycle is phase-shifted by `offset` relative to the master clock.
    fn integral_offset(&self, x: f64, offset: f64) -> f64 {
        let v_off = self.integral(offset);
        if x + offset <= 1.0 {
            self.integral(x + offset) - v_off
        } else {
            // integral(1) = 0, so wrapping just re-anchors.
            self.integral(x + offset - 1.0) - v_off
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct JointTemplates {
    toe: VelocityTemplate,
    ankle: VelocityTemplate,
    knee: VelocityTemplate,
    hip: VelocityTemplate,
    sacrum: VelocityTemplate,
}

impl JointTemplates {
    fn build(cfg: &GaitModelConfig) -> Result<JointTemplates> {
        let s = cfg.speed_mps;
        let duty = cfg.duty_factor;
        // The toe stays on the belt until toe-off; the ankle lifts a little
        // earlier (heel rise).
        let toe = swing_bump("toe", cfg.toe_peak_mps, s, duty, 0.985)?;
        let ankle = swing_bump(
            "ankle",
            cfg.ankle_peak_mps,
            s,
            (duty - 0.15).max(0.3),
            0.975,
        )?;
        let knee = knee_bump(cfg)?;
        Ok(JointTemplates {
            toe,
            ankle,
            knee,
            hip: VelocityTemplate::Sway(SwayTemplate {
                amp: 0.12 * s,
                phase: 0.4,
            }),
            sacrum: VelocityTemplate::Sway(SwayTemplate {
                amp: 0.10 * s,
                phase: 0.0,
            }),
        })
    }

    fn for_joint(&self, joint: Joint) -> &VelocityTemplate {
        match joint {
            Joint::Toe => &self.toe,
            Joint::Ankle => &self.ankle,
            Joint::Knee => &self.knee,
            Joint::Hip => &self.hip,
            Joint::Sacrum => &self.sacrum,
        }
    }
}

/// Swing-phase bump with base speed `base` (the belt carries the foot
/// backward during stance) on support `[lo, hi]`, peak value `peak`, and an
/// exactly zero cycle mean. If a pure raised cosine cannot carry enough
/// forward displacement, the top is flattened into a plateau.
fn swing_bump(joint: &str, peak: f64, base: f64, lo: f64, hi: f64) -> Result<VelocityTemplate> {
    let amp = peak + base;
    // Required effective width so that ∫ v = 0: rho = base / amp.
    let rho = base / amp;
    let span = hi - lo;
    if rho >= span {
        return Err(Error::invalid(format!(
            "{joint} velocity template infeasible: peak {peak} m/s too low to recover the stance displacement at base speed {base} m/s"
        )));
    }
    let b = if 2.0 * rho <= span {
        // A pure raised cosine fits; anchor it at the support start.
        let w = 2.0 * rho;
        BumpTemplate {
            lo,
            p0: lo + w / 2.0,
            p1: lo + w / 2.0,
            hi: lo + w,
            amp,
            base,
        }
    } else {
        let plateau = 2.0 * rho - span;
        let flanks = span - plateau;
        let rise = 0.45 * flanks;
        BumpTemplate {
            lo,
            p0: lo + rise,
            p1: hi - (flanks - rise),
            hi,
            amp,
            base,
        }
    };
    Ok(VelocityTemplate::Bump(b))
}

/// Asymmetric raised-cosine knee bump peaking exactly at `knee_max_pct`.
fn knee_bump(cfg: &GaitModelConfig) -> Result<VelocityTemplate> {
    let base = 0.35 * cfg.speed_mps;
    let peak = cfg.knee_peak_mps;
    let amp = peak + base;
    let widths = 2.0 * base / amp; // rise + fall for zero mean
    let c = cfg.knee_max_pct / 100.0;
    let fall = (0.6 * widths).min(0.98 - c);
    let rise = widths - fall;
    if fall <= 0.0 || c + fall > 0.98 {
        return Err(Error::invalid(
            "knee velocity peak too late in the cycle: the bump would extend past the cycle end",
        ));
    }
    if rise <= 0.0 || c - rise < 0.02 {
        return Err(Error::invalid(
            "knee velocity peak too early in the cycle for the required bump width",
        ));
    }
    Ok(VelocityTemplate::Bump(BumpTemplate {
        lo: c - rise,
        p0: c,
        p1: c,
        hi: c + fall,
        amp,
        base,
    }))
}

/// Exact events and parameters of a generated scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True per-leg parameters (legs are symmetric).
    pub params: GaitParameters,
    pub events_right: GaitEvents,
    pub events_left: GaitEvents,
    /// Complete gait cycles inside the recording.
    pub n_cycles: usize,
    pub cycle_starts_right: Vec<f64>,
    pub cycle_starts_left: Vec<f64>,
}

/// A generated walking scene: analytic trajectories plus their ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cfg: GaitModelConfig,
    pub duration_s: f64,
    /// Master-clock (right leg) cycle onsets, one guard cycle past the end.
    starts: Vec<f64>,
    templates: JointTemplates,
    pub ground_truth: GroundTruth,
}

/// Generate a walking scene.
///
/// Cycle onsets follow a master clock with optional Gaussian duration
/// jitter; the left leg runs half a cycle behind the right. Ground-truth
/// events and parameters are exact by construction.
pub fn generate_kinematics(
    cfg: &GaitModelConfig,
    duration_s: f64,
    seed: u64,
) -> Result<SyntheticScene> {
    cfg.validate()?;
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid("duration must be non-negative"));
    }
    let templates = JointTemplates::build(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, cfg.jitter_std_s.max(f64::MIN_POSITIVE)).unwrap();
    let mut starts = vec![0.0];
    while *starts.last().unwrap() <= duration_s + 2.0 * cfg.stride_time_s {
        let mut t_cycle = cfg.stride_time_s;
        if cfg.jitter_std_s > 0.0 {
            t_cycle = (cfg.stride_time_s + jitter.sample(&mut rng))
                .max(0.5 * cfg.stride_time_s);
        }
        let next = starts.last().unwrap() + t_cycle;
        starts.push(next);
    }

    let duty = cfg.duty_factor;
    let mut hs_right = Vec::new();
    let mut to_right = Vec::new();
    let mut hs_left = Vec::new();
    let mut to_left = Vec::new();
    let mut cycle_starts_left = Vec::new();
    let mut full_cycle_durations = Vec::new();
    for k in 0..starts.len() - 1 {
        let (s0, s1) = (starts[k], starts[k + 1]);
        let t_k = s1 - s0;
        if s0 <= duration_s {
            hs_right.push(s0);
        }
        let to_r = s0 + duty * t_k;
        if to_r <= duration_s {
            to_right.push(to_r);
        }
        let hs_l = s0 + 0.5 * t_k;
        if hs_l <= duration_s {
            hs_left.push(hs_l);
            cycle_starts_left.push(hs_l);
        }
        // Left toe-off falls in the next master cycle (duty > 0.5).
        if k + 2 < starts.len() {
            let to_l = s1 + (duty - 0.5) * (starts[k + 2] - s1);
            if to_l <= duration_s {
                to_left.push(to_l);
            }
        }
        if s1 <= duration_s {
            full_cycle_durations.push(t_k);
        }
    }

    let n_cycles = full_cycle_durations.len();
    let params = if n_cycles > 0 {
        let stride = full_cycle_durations.iter().sum::<f64>() / n_cycles as f64;
        let step = 0.5 * stride;
        let stance = duty * stride;
        let flight = stride - stance;
        GaitParameters {
            stride_time_s: Some(stride),
            stance_time_s: Some(stance),
            flight_time_s: Some(flight),
            step_time_s: Some(step),
            cadence_spm: Some(60.0 / step),
            stride_length_cm: Some(stride * cfg.speed_mps * 100.0),
            step_length_cm: Some(step * cfg.speed_mps * 100.0),
            max_foot_velocity_mps: Some(cfg.toe_peak_mps),
            max_ankle_velocity_mps: Some(cfg.ankle_peak_mps),
            max_knee_velocity_mps: Some(cfg.knee_peak_mps),
            knee_max_time_pct: Some(cfg.knee_max_pct),
        }
    } else {
        GaitParameters::default()
    };

    let ground_truth = GroundTruth {
        params,
        events_right: GaitEvents {
            leg: Leg::Right,
            heel_strikes_s: hs_right.clone(),
            toe_offs_s: to_right,
            warnings: Vec::new(),
        },
        events_left: GaitEvents {
            leg: Leg::Left,
            heel_strikes_s: hs_left,
            toe_offs_s: to_left,
            warnings: Vec::new(),
        },
        n_cycles,
        cycle_starts_right: hs_right,
        cycle_starts_left,
    };

    Ok(SyntheticScene {
        cfg: *cfg,
        duration_s,
        starts,
        templates,
        ground_truth,
    })
}

/// Constant marker geometry: lateral offset and height, meters.
fn marker_xz(marker: crate::reference::Marker) -> (f64, f64) {
    let lateral = match marker.leg() {
        Some(Leg::Left) => 0.10,
        Some(Leg::Right) => -0.10,
        None => 0.0,
    };
    let height = match marker.joint() {
        Joint::Toe => 0.04,
        Joint::Ankle => 0.09,
        Joint::Knee => 0.47,
        Joint::Hip => 0.92,
        Joint::Sacrum => 1.02,
    };
    (lateral, height)
}

/// Line-of-sight depression angle under which the radar sees a joint. The
/// radar is mounted roughly at knee/torso height, looking down at the feet.
fn joint_elevation_deg(joint: Joint) -> f64 {
    match joint {
        Joint::Toe | Joint::Ankle => FOOT_ELEVATION_DEG,
        Joint::Knee | Joint::Hip | Joint::Sacrum => 0.0,
    }
}

impl SyntheticScene {
    /// Master-clock cycle index and fraction at time `t`.
    fn cycle_at(&self, t: f64) -> (usize, f64) {
        let n = self.starts.len() - 1;
        let k = self
            .starts
            .partition_point(|&s| s <= t)
            .saturating_sub(1)
            .min(n - 1);
        let t_k = self.starts[k + 1] - self.starts[k];
        ((k), ((t - self.starts[k]) / t_k).clamp(0.0, 1.0))
    }

    fn leg_offset(leg: Option<Leg>) -> f64 {
        match leg {
            Some(Leg::Left) => 0.5,
            _ => 0.0,
        }
    }

    /// Cycle fraction of `leg` at time `t`.
    pub fn leg_phase(&self, leg: Leg, t: f64) -> f64 {
        let (_, u) = self.cycle_at(t);
        (u + SyntheticScene::leg_offset(Some(leg))).fract()
    }

    /// Radial velocity of a joint as the radar sees it (positive toward the
    /// radar in the front view).
    pub fn radial_velocity(&self, marker: crate::reference::Marker, t: f64) -> f64 {
        let (_, u) = self.cycle_at(t);
        let phi = (u + SyntheticScene::leg_offset(marker.leg())).fract();
        self.templates.for_joint(marker.joint()).velocity(phi)
    }

    /// Forward (y) marker position. The template is the radial velocity, so
    /// the y velocity carries the inverse of the line-of-sight projection.
    fn marker_y(&self, marker: crate::reference::Marker, t: f64) -> f64 {
        let (k, u) = self.cycle_at(t);
        let t_k = self.starts[k + 1] - self.starts[k];
        let offset = SyntheticScene::leg_offset(marker.leg());
        let tpl = self.templates.for_joint(marker.joint());
        let scale = 1.0 / joint_elevation_deg(marker.joint()).to_radians().cos();
        scale * t_k * tpl.integral_offset(u, offset)
    }

    /// Sample all nine markers on a uniform grid.
    pub fn sample_mocap(&self, fs: f64) -> Result<MocapRecording> {
        if !(fs > 0.0) {
            return Err(Error::invalid("mocap sample rate must be positive"));
        }
        let n = (self.duration_s * fs).floor() as usize + 1;
        let time: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
        let markers = crate::reference::Marker::ALL
            .iter()
            .map(|&marker| {
                let (x, z) = marker_xz(marker);
                MarkerTrajectory {
                    marker,
                    sample_rate_hz: fs,
                    time_s: time.clone(),
                    position_m: time.iter().map(|&t| [x, self.marker_y(marker, t), z]).collect(),
                }
            })
            .collect();
        Ok(MocapRecording { markers })
    }
}

/// Where on the body a scatterer sits.
///
/// Limbs reflect along their whole length, not just at the joints; segment
/// points between adjacent markers fill the Doppler band the way a real
/// signature does, which keeps the thresholded spectrogram connected even
/// where a fast-sweeping line momentarily loses per-bin power.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererBody {
    /// A marker itself.
    Joint(crate::reference::Marker),
    /// A point `frac` of the way from one marker to another on the same
    /// leg; its radial motion blends the endpoints' linearly.
    Segment {
        from: crate::reference::Marker,
        to: crate::reference::Marker,
        frac: f64,
    },
}

/// One reflecting body part.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Scatterer {
    pub body: ScattererBody,
    /// Reflectivity amplitude (linear).
    pub amplitude: f64,
}

/// The reflecting body parts of a scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScattererSet {
    pub scatterers: Vec<Scatterer>,
}

impl ScattererSet {
    /// Default reflectivities. Torso parts dominate and each limb segment
    /// carries a dense chain of interior points, so the signature forms one
    /// connected region at every detection threshold: adjacent chain lines
    /// stay within the reach of the morphological dilation (about 0.12 m/s
    /// in Doppler) even at the velocity peaks, where the gap between two
    /// joints' lines is widest. Amplitudes come in four classes matched to
    /// the joint-envelope threshold ladder — segment points share the class
    /// of the faster of their two joints, because near that joint's velocity
    /// peak their lines rise above the slower joint's and would otherwise
    /// contaminate its envelope. The feet scatter a little more strongly
    /// toward a rear radar (heel/sole aspect).
    pub fn default_for_view(view: View) -> ScattererSet {
        use crate::reference::Marker::*;
        let (toe_a, foot_a, ankle_a, shank_a) = match view {
            View::Front => (0.056, 0.029, 0.085, 0.075),
            View::Back => (0.080, 0.060, 0.108, 0.095),
        };
        let (thigh_a, knee_a, hip_a) = (0.40, 0.68, 0.30);
        let mut scatterers = vec![
            Scatterer { body: ScattererBody::Joint(Sacrum), amplitude: 1.0 },
            Scatterer { body: ScattererBody::Joint(HipLeft), amplitude: hip_a },
            Scatterer { body: ScattererBody::Joint(HipRight), amplitude: hip_a },
        ];
        let chain = |scatterers: &mut Vec<Scatterer>,
                         from: crate::reference::Marker,
                         to: crate::reference::Marker,
                         n: usize,
                         amplitude: f64| {
            for k in 1..n {
                let frac = k as f64 / n as f64;
                scatterers.push(Scatterer {
                    body: ScattererBody::Segment { from, to, frac },
                    amplitude,
                });
            }
        };
        for (hip, knee, ankle, toe) in [
            (HipLeft, KneeLeft, AnkleLeft, ToeLeft),
            (HipRight, KneeRight, AnkleRight, ToeRight),
        ] {
            // Chain lengths follow the largest velocity difference each
            // segment spans (shank: up to ~1.4 m/s between ankle and knee
            // peaks), keeping line spacing under the dilation bridge.
            chain(&mut scatterers, hip, knee, 8, thigh_a);
            scatterers.push(Scatterer { body: ScattererBody::Joint(knee), amplitude: knee_a });
            chain(&mut scatterers, knee, ankle, 12, shank_a);
            scatterers.push(Scatterer { body: ScattererBody::Joint(ankle), amplitude: ankle_a });
            chain(&mut scatterers, ankle, toe, 8, foot_a);
            scatterers.push(Scatterer { body: ScattererBody::Joint(toe), amplitude: toe_a });
        }
        ScattererSet { scatterers }
    }

    fn validate(&self) -> Result<()> {
        if self.scatterers.is_empty() {
            return Err(Error::invalid("scatterer set is empty"));
        }
        if self.scatterers.iter().any(|s| !(s.amplitude > 0.0)) {
            return Err(Error::invalid("scatterer amplitudes must be positive"));
        }
        for s in &self.scatterers {
            if let ScattererBody::Segment { from, to, frac } = s.body {
                if !(0.0..=1.0).contains(&frac) {
                    return Err(Error::invalid("segment fraction must be in [0, 1]"));
                }
                if from.leg() != to.leg() {
                    return Err(Error::invalid(
                        "segment scatterers must join markers of the same leg",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Radar-return synthesis settings.
#[derive(Debug, Clone)]
pub struct RadarSimConfig {
    /// Baseband sampling rate, Hz.
    pub fs_hz: f64,
    /// Complex white Gaussian noise level, as signal-to-noise ratio in dB
    /// against the peak spectrogram pixel. `None` → noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// STFT used to calibrate the noise level (a coarse hop keeps this
    /// cheap; the peak is hop-insensitive).
    pub snr_reference_stft: StftConfig,
}

impl Default for RadarSimConfig {
    fn default() -> Self {
        RadarSimConfig {
            fs_hz: 2560.0,
            snr_db: None,
            seed: 0,
            snr_reference_stft: StftConfig {
                hop: 32,
                ..StftConfig::default()
            },
        }
    }
}

/// Simulate the complex baseband return of a walking scene.
///
/// Each scatterer contributes `A · exp(−j·4π·R(t)/λ)` with `R` its range
/// along the marker's line of sight, so approaching motion maps to positive
/// Doppler (1 m/s ↔ ≈160 Hz at 24 GHz).
///
/// # Errors
///
/// Fails when the sampling rate cannot carry the scene's maximum Doppler
/// shift (aliasing) or the configuration is invalid.
pub fn simulate_radar(
    scene: &SyntheticScene,
    set: &ScattererSet,
    radar: &RadarConfig,
    sim: &RadarSimConfig,
) -> Result<IqStream> {
    set.validate()?;
    if !(sim.fs_hz > 0.0) {
        return Err(Error::invalid("radar sample rate must be positive"));
    }
    // Fastest radial speed in the scene: swing peaks, belt speed during
    // stance, torso sway.
    let cfg = &scene.cfg;
    let v_max = [
        cfg.toe_peak_mps,
        cfg.ankle_peak_mps,
        cfg.knee_peak_mps,
        cfg.speed_mps,
        0.12 * cfg.speed_mps,
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    let doppler_max = 2.0 * v_max * radar.carrier_hz / radar.speed_of_light;
    if sim.fs_hz < 2.0 * doppler_max {
        return Err(Error::invalid(format!(
            "sample rate {:.0} Hz aliases the scene (max Doppler ≈ {:.0} Hz, need ≥ {:.0} Hz)",
            sim.fs_hz,
            doppler_max,
            2.0 * doppler_max
        )));
    }

    let lambda = radar.wavelength_m();
    let n = (scene.duration_s * sim.fs_hz).floor() as usize;
    let view_sign = match radar.view {
        View::Front => -1.0, // range shrinks as y grows toward the radar
        View::Back => 1.0,
    };

    // Segment scatterers model rough-surface (distributed) returns, so each
    // gets a slow pseudo-random phase wander (speckle). Without it their
    // perfectly periodic lines interfere coherently with the neighbouring
    // joint lines — the main lobe of a 0.1 s window spans ~40 Hz — and the
    // joint-line power would depend on an arbitrary fixed phase geometry.
    // The wander decorrelates that interference across strides while leaving
    // the joint lines phase-exact. Rates sit below 1.4 Hz, so the induced
    // Doppler fuzz stays within a few bins.
    let speckle: Vec<Option<[f64; 6]>> = set
        .scatterers
        .iter()
        .enumerate()
        .map(|(idx, sc)| match sc.body {
            ScattererBody::Joint(_) => None,
            ScattererBody::Segment { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    sim.seed ^ 0x7370_636b ^ ((idx as u64) << 32),
                );
                let mut uni = |lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
                Some([
                    uni(1.5, 3.0),                       // amplitude, rad
                    uni(0.45, 1.35),                     // rate, Hz
                    uni(0.0, std::f64::consts::TAU),     // phase
                    uni(1.0, 2.0),
                    uni(0.15, 0.45),
                    uni(0.0, std::f64::consts::TAU),
                ])
            }
        })
        .collect();

    use crate::reference::Marker;
    use rayon::prelude::*;
    let mut samples: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / sim.fs_hz;
            let (k, u) = scene.cycle_at(t);
            let t_k = scene.starts[k + 1] - scene.starts[k];
            // Line-of-sight displacement of every marker, evaluated once per
            // sample; scatterers blend these, so the cost stays nearly flat
            // as the set grows. The mocap y-position carries the inverse of
            // the elevation projection, so the product `y·cos(elev)` reduces
            // to the template integral itself.
            let mut disp = [0.0f64; 9];
            for &m in Marker::ALL.iter() {
                let off = SyntheticScene::leg_offset(m.leg());
                disp[m as usize] =
                    t_k * scene.templates.for_joint(m.joint()).integral_offset(u, off);
            }
            let los_of = |body: ScattererBody| -> f64 {
                match body {
                    ScattererBody::Joint(m) => disp[m as usize],
                    ScattererBody::Segment { from, to, frac } => {
                        (1.0 - frac) * disp[from as usize] + frac * disp[to as usize]
                    }
                }
            };
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, sc) in set.scatterers.iter().enumerate() {
                let r0 = 2.0 + 0.37 * idx as f64;
                let range = r0 + view_sign * los_of(sc.body);
                let mut phase = -4.0 * std::f64::consts::PI * range / lambda;
                if let Some([a1, f1, p1, a2, f2, p2]) = speckle[idx] {
                    phase += a1 * (std::f64::consts::TAU * f1 * t + p1).sin()
                        + a2 * (std::f64::consts::TAU * f2 * t + p2).sin();
                }
                acc += sc.amplitude * Complex64::new(phase.cos(), phase.sin());
            }
            acc
        })
        .collect();

    if let Some(snr_db) = sim.snr_db {
        let clean = IqStream::new(samples.clone(), sim.fs_hz);
        let spec = crate::signal::compute_spectrogram(&clean, &sim.snr_reference_stft)?;
        let peak = spec.peak_power();
        let w = sim
            .snr_reference_stft
            .window
            .coefficients(sim.snr_reference_stft.window_len);
        let w_energy: f64 = w.iter().map(|x| x * x).sum();
        // Noise pixel expectation is σ²·Σw²; place it `snr_db` below the peak.
        let sigma2 = peak / (10f64.powf(snr_db / 10.0) * w_energy);
        let mut rng = ChaCha8Rng::seed_from_u64(sim.seed ^ 0x6e6f6973);
        let comp = Normal::new(0.0, (sigma2 / 2.0).sqrt()).unwrap();
        for s in &mut samples {
            *s += Complex64::new(comp.sample(&mut rng), comp.sample(&mut rng));
        }
    }
    Ok(IqStream::new(samples, sim.fs_hz))
}

/// A free point target for calibration scenes: constant radial velocity,
/// positive toward the radar.
#[derive(Debug, Clone, Copy)]
pub struct PointTarget {
    pub amplitude: f64,
    pub initial_range_m: f64,
    pub approach_velocity_mps: f64,
}

/// Simulate point targets with constant radial velocities (no gait model).
pub fn simulate_point_targets(
    targets: &[PointTarget],
    radar: &RadarConfig,
    fs_hz: f64,
    duration_s: f64,
) -> Result<IqStream> {
    if targets.is_empty() {
        return Err(Error::invalid("no targets"));
    }
    let v_max = targets
        .iter()
        .map(|t| t.approach_velocity_mps.abs())
        .fold(0.0, f64::max);
    let doppler_max = 2.0 * v_max * radar.carrier_hz / radar.speed_of_light;
    if fs_hz < 2.0 * doppler_max {
        return Err(Error::invalid(format!(
            "sample rate {fs_hz:.0} Hz aliases a {doppler_max:.0} Hz Doppler shift"
        )));
    }
    let lambda = radar.wavelength_m();
    let n = (duration_s * fs_hz).floor() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs_hz;
            let mut acc = Complex64::new(0.0, 0.0);
            for tg in targets {
                let range = tg.initial_range_m - tg.approach_velocity_mps * t;
                let phase = -4.0 * std::f64::consts::PI * range / lambda;
                acc += tg.amplitude * Complex64::new(phase.cos(), phase.sin());
            }
            acc
        })
        .collect();
    Ok(IqStream::new(samples, fs_hz))
}

/// Vertical ground-reaction-force template: steep landing ramp, double hump
/// (≈1.08/1.10 body weight), and a linear unloading ramp that reaches zero
/// exactly at toe-off. Strictly zero during flight.
fn grf_at(phi_leg: f64, stance_s: f64, bw: f64) -> f64 {
    let duty_pos = phi_leg; // callers pass phase already normalized to stance
    if !(0.0..1.0).contains(&duty_pos) {
        return 0.0;
    }
    let t = duty_pos * stance_s;
    let ramp_in = 0.025;
    let ramp_out = 0.020;
    let f_in = 500.0;
    let h1 = 1.08 * bw;
    let valley = 0.72 * bw;
    let h2 = 1.10 * bw;
    let f_out = 350.0;
    let t1 = 0.17 * stance_s;
    let tv = 0.48 * stance_s;
    let t2 = 0.78 * stance_s;
    let tr = stance_s - ramp_out;
    let blend = |x: f64| (1.0 - (std::f64::consts::PI * x).cos()) / 2.0;
    if t < ramp_in {
        f_in * t / ramp_in
    } else if t < t1 {
        f_in + (h1 - f_in) * blend((t - ramp_in) / (t1 - ramp_in))
    } else if t < tv {
        h1 + (valley - h1) * blend((t - t1) / (tv - t1))
    } else if t < t2 {
        valley + (h2 - valley) * blend((t - tv) / (t2 - tv))
    } else if t < tr {
        h2 + (f_out - h2) * blend((t - t2) / (tr - t2))
    } else {
        (f_out * (stance_s - t) / ramp_out).max(0.0)
    }
}

/// Simulate both legs' vertical ground reaction forces.
///
/// Zero duration yields empty traces.
pub fn simulate_grf(scene: &SyntheticScene, fs: f64) -> Result<(GrfTrace, GrfTrace)> {
    if !(fs > 0.0) {
        return Err(Error::invalid("force sample rate must be positive"));
    }
    let n = (scene.duration_s * fs).floor() as usize;
    let duty = scene.cfg.duty_factor;
    let bw = scene.cfg.body_weight_n;
    let make = |leg: Leg| -> Result<GrfTrace> {
        let mut time = Vec::with_capacity(n);
        let mut force = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / fs;
            let (k, u) = scene.cycle_at(t);
            let t_k = scene.starts[k + 1] - scene.starts[k];
            let phi = (u + SyntheticScene::leg_offset(Some(leg))).fract();
            let f = if phi < duty {
                grf_at(phi / duty, duty * t_k, bw)
            } else {
                0.0
            };
            time.push(t);
            force.push(f);
        }
        GrfTrace::new(leg, fs, time, force)
    };
    Ok((make(Leg::Left)?, make(Leg::Right)?))
}
