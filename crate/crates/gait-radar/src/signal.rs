//! Complex-baseband signal handling: decimation, spectrogram computation and
//! Doppler/velocity conversion for a continuous-wave radar.
//!
//! A scatterer moving with radial velocity `v` (positive away from the radar)
//! shifts the carrier `f_t` by
//!
//! ```text
//! f_D = -f_t * 2 v / c
//! ```
//!
//! so motion toward the radar produces positive Doppler frequencies. At a
//! 24 GHz carrier, 1 m/s corresponds to roughly 160 Hz.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s), the default for [`RadarConfig`].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar placement relative to the subject.
///
/// The treadmill setup uses one radar in front of and one behind the subject.
/// Forward limb motion appears on the positive Doppler side for the front
/// view and on the negative side for the back view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Front,
    Back,
}

impl View {
    /// Doppler half-axis carrying the forward (swing-phase) limb motion.
    pub fn forward_side(self) -> DopplerSide {
        match self {
            View::Front => DopplerSide::Positive,
            View::Back => DopplerSide::Negative,
        }
    }
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            View::Front => "front",
            View::Back => "back",
        })
    }
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "front" => Ok(View::Front),
            "back" => Ok(View::Back),
            other => Err(Error::invalid(format!(
                "unknown view {other:?}, expected \"front\" or \"back\""
            ))),
        }
    }
}

/// Half of the Doppler axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerSide {
    /// Positive Doppler shifts: motion toward the radar.
    Positive,
    /// Negative Doppler shifts: motion away from the radar.
    Negative,
}

/// Physical parameters of the radar link.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadarConfig {
    /// Transmit carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Propagation speed in m/s.
    pub speed_of_light: f64,
    /// Placement of this radar relative to the subject.
    pub view: View,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            carrier_hz: 24.0e9,
            speed_of_light: SPEED_OF_LIGHT,
            view: View::Front,
        }
    }
}

impl RadarConfig {
    /// Carrier wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }
}

/// Convert a Doppler shift (Hz) into a radial velocity (m/s, positive away
/// from the radar).
///
/// ```
/// use gait_radar::signal::{doppler_to_velocity, RadarConfig};
///
/// let radar = RadarConfig::default(); // 24 GHz
/// let v = doppler_to_velocity(-160.0, &radar);
/// assert!((v - 0.99931).abs() < 1e-4); // ~1 m/s away from the radar
/// ```
pub fn doppler_to_velocity(doppler_hz: f64, radar: &RadarConfig) -> f64 {
    -doppler_hz * radar.speed_of_light / (2.0 * radar.carrier_hz)
}

/// Convert a radial velocity (m/s, positive away) into a Doppler shift (Hz).
/// Inverse of [`doppler_to_velocity`].
pub fn velocity_to_doppler(velocity_mps: f64, radar: &RadarConfig) -> f64 {
    -2.0 * radar.carrier_hz * velocity_mps / radar.speed_of_light
}

/// A complex baseband recording.
#[derive(Debug, Clone)]
pub struct IqStream {
    /// I/Q samples.
    pub samples: Vec<Complex64>,
    /// Sampling rate in Hz.
    pub sample_rate_hz: f64,
    /// Time of the first sample on the recording clock, in seconds.
    pub start_time_s: f64,
}

impl IqStream {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        IqStream {
            samples,
            sample_rate_hz,
            start_time_s: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Window function applied to each analysis frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Hamming window; highest sidelobe at about -42.7 dB.
    Hamming,
    Hann,
    Rect,
}

impl Window {
    /// Sample the window at `len` points (symmetric form).
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let denom = (len.max(2) - 1) as f64;
        (0..len)
            .map(|n| {
                let x = 2.0 * std::f64::consts::PI * n as f64 / denom;
                match self {
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Hann => 0.5 * (1.0 - x.cos()),
                    Window::Rect => 1.0,
                }
            })
            .collect()
    }
}

/// Short-time Fourier transform parameters.
///
/// Defaults follow the gait-radar processing chain: 256-sample Hamming
/// window, hop of one sample (255-sample overlap) and zero padding to a
/// 2048-point FFT so the bin spacing at 2.56 kHz is 1.25 Hz.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StftConfig {
    /// Analysis window length in samples.
    pub window_len: usize,
    /// Frame advance in samples. `1` reproduces the dense reference
    /// signature; larger hops trade time resolution for speed and memory.
    pub hop: usize,
    /// FFT length; frames are zero padded to this size.
    pub fft_len: usize,
    /// Window function.
    pub window: Window,
    /// Subtract the complex mean of the whole recording before framing.
    /// Suppresses the static-clutter line at 0 Hz.
    pub remove_mean: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 256,
            hop: 1,
            fft_len: 2048,
            window: Window::Hamming,
            remove_mean: true,
        }
    }
}

impl StftConfig {
    fn validate(&self) -> Result<()> {
        if self.hop == 0 {
            return Err(Error::invalid("stft hop must be at least 1"));
        }
        if self.window_len == 0 {
            return Err(Error::invalid("stft window length must be at least 1"));
        }
        if self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(Error::invalid(format!(
                "stft requires hop <= window_len <= fft_len, got {} / {} / {}",
                self.hop, self.window_len, self.fft_len
            )));
        }
        Ok(())
    }
}

/// A micro-Doppler spectrogram.
///
/// `power` is linear (|DFT|^2, unnormalized DFT); conversion to dB is left to
/// display code. Row `n` holds the spectrum of frame `n`; column `k`
/// corresponds to `freq_hz[k]`. The frequency axis is centered, covering
/// `[-fs/2, fs/2)` with strictly increasing bins.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// Linear power, shape `(n_frames, fft_len)`.
    pub power: Array2<f64>,
    /// Frame center times in seconds (recording clock).
    pub time_s: Vec<f64>,
    /// Doppler frequency of each bin in Hz, strictly increasing.
    pub freq_hz: Vec<f64>,
    /// Sampling rate of the analyzed stream.
    pub sample_rate_hz: f64,
    /// Parameters the spectrogram was computed with.
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.power.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.power.ncols()
    }

    /// Bin spacing in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.sample_rate_hz / self.config.fft_len as f64
    }

    /// Frame spacing in seconds.
    pub fn frame_dt_s(&self) -> f64 {
        self.config.hop as f64 / self.sample_rate_hz
    }

    /// Radial velocity of each bin under `radar` (m/s, positive away).
    /// Strictly decreasing, mirroring the sign convention of
    /// [`doppler_to_velocity`].
    pub fn velocity_axis(&self, radar: &RadarConfig) -> Vec<f64> {
        self.freq_hz
            .iter()
            .map(|&f| doppler_to_velocity(f, radar))
            .collect()
    }

    /// Largest power value; 0.0 for an empty spectrogram.
    pub fn peak_power(&self) -> f64 {
        self.power.iter().cloned().fold(0.0_f64, f64::max)
    }

    /// Robust peak estimate: the median over frames of each frame's maximum
    /// power; 0.0 for an empty spectrogram.
    ///
    /// The raw [`peak_power`](Self::peak_power) rides on rare constructive
    /// pile-ups of several reflectors in one bin and can exceed the typical
    /// strongest-line level by several dB, varying from recording to
    /// recording. The per-frame maximum tracks the dominant (torso) return in
    /// every frame, and its median is insensitive to those outlier frames,
    /// giving a stable anchor for relative power levels.
    pub fn reference_power(&self) -> f64 {
        let mut frame_max: Vec<f64> = self
            .power
            .rows()
            .into_iter()
            .map(|row| row.iter().cloned().fold(0.0_f64, f64::max))
            .collect();
        if frame_max.is_empty() {
            return 0.0;
        }
        let mid = frame_max.len() / 2;
        let (_, m, _) = frame_max.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap());
        *m
    }
}

/// Compute the micro-Doppler spectrogram of `iq`.
///
/// Each frame of `window_len` samples is windowed, zero padded to `fft_len`
/// and transformed; the squared magnitude is stored with the frequency axis
/// rotated so bin 0 is `-fs/2`. When `remove_mean` is set, the complex mean
/// of the entire recording is subtracted first.
///
/// # Errors
///
/// Returns [`Error::InsufficientData`] if the stream is shorter than one
/// window, and [`Error::InvalidArgument`] for inconsistent parameters.
pub fn compute_spectrogram(iq: &IqStream, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if iq.len() < cfg.window_len {
        return Err(Error::insufficient(format!(
            "stream has {} samples but the analysis window needs {}",
            iq.len(),
            cfg.window_len
        )));
    }

    let n_frames = (iq.len() - cfg.window_len) / cfg.hop + 1;
    let window = cfg.window.coefficients(cfg.window_len);
    let mean = if cfg.remove_mean {
        iq.samples.iter().sum::<Complex64>() / iq.len() as f64
    } else {
        Complex64::new(0.0, 0.0)
    };

    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_len);
    let half = cfg.fft_len / 2;

    let mut power = Array2::<f64>::zeros((n_frames, cfg.fft_len));
    let rows: &mut [f64] = power.as_slice_mut().expect("freshly allocated array");
    rows.par_chunks_mut(cfg.fft_len)
        .enumerate()
        .for_each_init(
            || (vec![Complex64::new(0.0, 0.0); cfg.fft_len], vec![
                Complex64::new(0.0, 0.0);
                fft.get_inplace_scratch_len()
            ]),
            |(buf, scratch), (n, row)| {
                let start = n * cfg.hop;
                for m in 0..cfg.window_len {
                    buf[m] = (iq.samples[start + m] - mean) * window[m];
                }
                for slot in buf.iter_mut().skip(cfg.window_len) {
                    *slot = Complex64::new(0.0, 0.0);
                }
                fft.process_with_scratch(buf, scratch);
                for (i, slot) in row.iter_mut().enumerate() {
                    let k = (i + half) % cfg.fft_len;
                    *slot = buf[k].norm_sqr();
                }
            },
        );

    let fs = iq.sample_rate_hz;
    let frame_center = (cfg.window_len - 1) as f64 / 2.0;
    let time_s = (0..n_frames)
        .map(|n| iq.start_time_s + ((n * cfg.hop) as f64 + frame_center) / fs)
        .collect();
    let bin = fs / cfg.fft_len as f64;
    let freq_hz = (0..cfg.fft_len)
        .map(|i| (i as f64 - half as f64) * bin)
        .collect();

    Ok(Spectrogram {
        power,
        time_s,
        freq_hz,
        sample_rate_hz: fs,
        config: *cfg,
    })
}

/// Reduce the sampling rate by an integer factor with an anti-aliasing
/// low-pass (zero-phase FIR, cutoff `0.45 * fs / factor`).
///
/// The output holds `len / factor` samples. A factor of 1 returns a copy.
///
/// # Errors
///
/// Returns [`Error::InvalidArgument`] if `factor` is zero or exceeds the
/// stream length.
pub fn decimate(iq: &IqStream, factor: usize) -> Result<IqStream> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    if factor > iq.len() {
        return Err(Error::invalid(format!(
            "decimation factor {} exceeds stream length {}",
            factor,
            iq.len()
        )));
    }
    if factor == 1 {
        return Ok(iq.clone());
    }

    let cutoff = 0.45 * iq.sample_rate_hz / factor as f64;
    let kernel = lowpass_kernel(cutoff, iq.sample_rate_hz, 8 * factor);
    let half = kernel.len() / 2;
    let n_out = iq.len() / factor;
    let len = iq.len() as isize;

    let samples: Vec<Complex64> = (0..n_out)
        .into_par_iter()
        .map(|i| {
            let center = (i * factor) as isize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &h) in kernel.iter().enumerate() {
                let mut idx = center + j as isize - half as isize;
                // Mirror-reflect at the edges.
                if idx < 0 {
                    idx = -idx;
                }
                if idx >= len {
                    idx = 2 * (len - 1) - idx;
                }
                acc += iq.samples[idx as usize] * h;
            }
            acc
        })
        .collect();

    Ok(IqStream {
        samples,
        sample_rate_hz: iq.sample_rate_hz / factor as f64,
        start_time_s: iq.start_time_s,
    })
}

/// Hamming-windowed sinc low-pass with unit DC gain and `2 * half_len + 1`
/// taps.
fn lowpass_kernel(cutoff_hz: f64, fs: f64, half_len: usize) -> Vec<f64> {
    let wc = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
    let n = 2 * half_len + 1;
    let window = Window::Hamming.coefficients(n);
    let mut kernel: Vec<f64> = (0..n)
        .map(|j| {
            let k = j as isize - half_len as isize;
            let sinc = if k == 0 {
                wc / std::f64::consts::PI
            } else {
                (wc * k as f64).sin() / (std::f64::consts::PI * k as f64)
            };
            sinc * window[j]
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for h in &mut kernel {
        *h /= sum;
    }
    kernel
}
