//! Scratch diagnostics (not part of the test suite).

use gait_radar::envelope::{
    estimate_noise_threshold, extract_standard_envelope, MorphConfig, NoiseConfig,
    DEFAULT_MAX_GAP_S,
};
use gait_radar::gait::{radar_cycle_boundaries, ParamConfig};
use gait_radar::signal::{compute_spectrogram, RadarConfig, StftConfig, View};
use gait_radar::synth::{generate_kinematics, preset, simulate_radar, RadarSimConfig, ScattererSet};

fn main() {
    let cfg = preset("normal_1.1").unwrap();
    let scene = generate_kinematics(&cfg, 40.0, 0).unwrap();
    let radar = RadarConfig::default();
    let sim = RadarSimConfig { snr_db: None, ..RadarSimConfig::default() };
    let iq = simulate_radar(&scene, &ScattererSet::default_for_view(View::Front), &radar, &sim)
        .unwrap();
    let stft = StftConfig { hop: 32, ..StftConfig::default() };
    let spec = compute_spectrogram(&iq, &stft).unwrap();
    let noise = estimate_noise_threshold(&spec, &NoiseConfig::default()).unwrap();
    let env = extract_standard_envelope(&spec, &noise, &MorphConfig::default(), &radar, DEFAULT_MAX_GAP_S)
        .unwrap();
    let cycles = radar_cycle_boundaries(&env, &ParamConfig::default()).unwrap();

    let stride = cfg.stride_time_s;
    let hs_all: Vec<f64> = {
        let gt = &scene.ground_truth;
        let mut v: Vec<f64> = gt
            .events_right
            .heel_strikes_s
            .iter()
            .chain(gt.events_left.heel_strikes_s.iter())
            .copied()
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    println!("first heel strikes: {:?}", &hs_all[..6.min(hs_all.len())]);
    println!("first minima: {:?}", &cycles.minima_s[..6.min(cycles.minima_s.len())]);
    let mut offs: Vec<f64> = Vec::new();
    for &m in &cycles.minima_s {
        let d = hs_all
            .iter()
            .map(|&h| m - h)
            .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap();
        offs.push(d);
    }
    let mean = offs.iter().sum::<f64>() / offs.len() as f64;
    let sd = (offs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / offs.len() as f64).sqrt();
    println!(
        "minimum minus nearest heel strike: mean {:.1} ms ({:.2}% of stride), sd {:.1} ms, n {}",
        mean * 1e3,
        mean / stride * 100.0,
        sd * 1e3,
        offs.len()
    );

    // Envelope trace through two basins around the heel strike nearest 10 s.
    let hs = hs_all.iter().copied().find(|&h| h > 10.0).unwrap();
    println!("envelope around heel strike at {hs:.3}s (phase 0 = HS, % of stride):");
    for (i, &t) in env.time_s.iter().enumerate() {
        let ph = (t - hs) / stride * 100.0;
        if (-15.0..=20.0).contains(&ph) {
            println!(
                "  {ph:7.2}%  t={t:8.4}  v={:7.3}{}",
                env.velocity_mps[i],
                if env.interpolated[i] { "  (interp)" } else { "" }
            );
        }
    }
}
