//! Butterworth low-pass design and zero-phase (forward-backward) filtering.
//!
//! Filters are cascades of second-order sections obtained from the analog
//! Butterworth prototype via the bilinear transform with cutoff prewarping.
//! [`Sos::filtfilt`] runs the cascade forward and backward, giving zero phase
//! and the squared magnitude response: a 4th-order design behaves like an
//! 8th-order magnitude filter.

use crate::error::{Error, Result};

/// One second-order section, coefficients normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Initial direct-form-II-transposed state matching the steady-state
    /// response to a locally linear input `x_n = x0 + s n`, so neither
    /// constants nor ramps excite an edge transient.
    fn ramp_state(&self, x0: f64, s: f64) -> (f64, f64) {
        let g = self.dc_gain();
        let beta = g * s; // output slope
        let d2 = self.b2 * s - self.a2 * beta;
        let d1 = beta - self.b0 * s;
        let alpha = g * x0 - (d1 + d2) / (1.0 + self.a1 + self.a2);
        let g2 = self.b2 * x0 - self.a2 * alpha;
        let g1 = self.b1 * x0 - self.a1 * alpha + g2 - d2;
        (g1 - d1, g2 - d2)
    }
}

/// A cascade of second-order sections.
#[derive(Debug, Clone)]
pub struct Sos {
    sections: Vec<Biquad>,
    order: usize,
}

/// Design a digital Butterworth low-pass.
///
/// # Errors
///
/// `order` must be positive and `cutoff_hz` must lie strictly between 0 and
/// the Nyquist frequency.
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {}) for fs = {fs} Hz",
            fs / 2.0
        )));
    }

    // Prewarped analog cutoff; s is replaced by k * (1 - z^-1) / (1 + z^-1).
    let k = 1.0 / (std::f64::consts::PI * cutoff_hz / fs).tan();
    let mut sections = Vec::new();

    // Conjugate pole pairs of the unit-cutoff prototype:
    // s^2 + 2 sin(pi (2i+1) / (2 n)) s + 1.
    let n = order;
    for i in 0..n / 2 {
        let alpha = 2.0 * (std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64).sin();
        let d0 = k * k + alpha * k + 1.0;
        sections.push(Biquad {
            b0: 1.0 / d0,
            b1: 2.0 / d0,
            b2: 1.0 / d0,
            a1: (2.0 - 2.0 * k * k) / d0,
            a2: (k * k - alpha * k + 1.0) / d0,
        });
    }
    if n % 2 == 1 {
        // Real pole at s = -1.
        let d0 = k + 1.0;
        sections.push(Biquad {
            b0: 1.0 / d0,
            b1: 1.0 / d0,
            b2: 0.0,
            a1: (1.0 - k) / d0,
            a2: 0.0,
        });
    }

    Ok(Sos {
        sections,
        order: n,
    })
}

impl Sos {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Single forward pass, with the state initialized to the steady-state
    /// response of the signal's locally linear start.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    fn filter_in_place(&self, y: &mut [f64]) {
        if y.is_empty() {
            return;
        }
        for section in &self.sections {
            let slope = if y.len() > 1 { y[1] - y[0] } else { 0.0 };
            let (mut z1, mut z2) = section.ramp_state(y[0], slope);
            for v in y.iter_mut() {
                let x = *v;
                let out = section.b0 * x + z1;
                z1 = section.b1 * x - section.a1 * out + z2;
                z2 = section.b2 * x - section.a2 * out;
                *v = out;
            }
        }
    }

    /// Zero-phase filtering: forward pass, backward pass, with odd
    /// (point-symmetric) reflection padding of `3 * order` samples at both
    /// ends.
    ///
    /// # Errors
    ///
    /// The signal must be longer than the padding.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = 3 * self.order;
        if x.len() <= pad.max(1) {
            return Err(Error::insufficient(format!(
                "filtfilt needs more than {} samples, got {}",
                pad.max(1),
                x.len()
            )));
        }

        let n = x.len();
        let mut padded = Vec::with_capacity(n + 2 * pad);
        let first = x[0];
        let last = x[n - 1];
        for i in (1..=pad).rev() {
            padded.push(2.0 * first - x[i]);
        }
        padded.extend_from_slice(x);
        for i in 1..=pad {
            padded.push(2.0 * last - x[n - 1 - i]);
        }

        self.filter_in_place(&mut padded);
        padded.reverse();
        self.filter_in_place(&mut padded);
        padded.reverse();

        Ok(padded[pad..pad + n].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs).sin())
            .collect()
    }

    /// Amplitude of a sinusoid estimated from the central part of a signal.
    fn mid_amplitude(x: &[f64]) -> f64 {
        let lo = x.len() / 4;
        let hi = 3 * x.len() / 4;
        let rms = (x[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64).sqrt();
        rms * std::f64::consts::SQRT_2
    }

    #[test]
    fn constants_pass_unchanged() {
        for order in [2, 4] {
            let sos = butter_lowpass(order, 10.0, 1000.0).unwrap();
            let x = vec![3.25; 500];
            let y = sos.filtfilt(&x).unwrap();
            for v in y {
                assert_abs_diff_eq!(v, 3.25, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn passband_amplitude_preserved() {
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        let x = sine(1.0, 1000.0, 4000);
        let y = sos.filtfilt(&x).unwrap();
        let ratio = mid_amplitude(&y) / mid_amplitude(&x);
        assert!((ratio - 1.0).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn stopband_attenuation_at_least_effective_eighth_order() {
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        let x = sine(50.0, 1000.0, 8000);
        let y = sos.filtfilt(&x).unwrap();
        let ratio = mid_amplitude(&y) / mid_amplitude(&x);
        // Forward-backward 4th order = 8th-order magnitude:
        // |H|^2 = 1 / (1 + (f/fc)^8). Prewarping only attenuates further.
        let theory = 1.0 / (1.0 + (50.0_f64 / 10.0).powi(8));
        assert!(ratio <= theory, "ratio {ratio:.3e} > theory {theory:.3e}");
        assert!(ratio > theory * 1e-3, "ratio {ratio:.3e} suspiciously low");
    }

    #[test]
    fn half_power_at_cutoff() {
        let sos = butter_lowpass(2, 20.0, 1000.0).unwrap();
        let x = sine(20.0, 1000.0, 4000);
        let y = sos.filtfilt(&x).unwrap();
        let ratio = mid_amplitude(&y) / mid_amplitude(&x);
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn time_reversal_symmetry() {
        // A burst with quiet margins long enough for the slowest pole to die
        // out, so only the zero-phase property itself is under test, not
        // edge transients.
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        let x: Vec<f64> = (0..3000)
            .map(|i| {
                if !(1000..2000).contains(&i) {
                    return 0.0;
                }
                let t = (i - 1000) as f64 / 1000.0;
                let window = (std::f64::consts::PI * t).sin().powi(2);
                window
                    * ((2.0 * std::f64::consts::PI * 3.0 * t).sin()
                        + 0.4 * (2.0 * std::f64::consts::PI * 7.0 * t).cos())
            })
            .collect();
        let forward = sos.filtfilt(&x).unwrap();
        let mut rev = x.clone();
        rev.reverse();
        let mut backward = sos.filtfilt(&rev).unwrap();
        backward.reverse();
        let scale = forward.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        for (a, b) in forward.iter().zip(&backward) {
            assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn ramps_pass_through_the_interior() {
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        let x: Vec<f64> = (0..2000).map(|i| 0.002 * i as f64 - 1.7).collect();
        let y = sos.filtfilt(&x).unwrap();
        for i in 400..1600 {
            assert_abs_diff_eq!(y[i], x[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(butter_lowpass(0, 10.0, 1000.0).is_err());
        assert!(butter_lowpass(2, 0.0, 1000.0).is_err());
        assert!(butter_lowpass(2, 500.0, 1000.0).is_err());
        let sos = butter_lowpass(4, 10.0, 1000.0).unwrap();
        assert!(sos.filtfilt(&[1.0; 12]).is_err());
    }
}
