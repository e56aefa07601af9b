//! File formats for recordings, parameters and reports.
//!
//! - **IQ**: raw interleaved little-endian `f32` I/Q pairs in a `.iq` file,
//!   with a JSON sidecar (same stem, `.json`) carrying the radio metadata.
//! - **GRF**: CSV `time_s,force_left_n,force_right_n`.
//! - **Mocap**: CSV `time_s` plus `<marker>_{x,y,z}_m` triplets for all nine
//!   markers.
//! - **Parameters**: JSON (the canonical interchange between the `params`
//!   and `compare` stages) and a CSV export.
//! - **Reports**: JSON plus a flat CSV grid with one row per tested cell.
//!
//! Timestamps are written with six decimal digits (microsecond resolution).
//! Readers report the offending line number on malformed input.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::envelope::EnvelopeSignal;
use crate::error::{Error, Result};
use crate::gait::{LabeledParameters, ParameterId};
use crate::reference::{GrfTrace, Leg, Marker, MarkerTrajectory, MocapRecording};
use crate::signal::{IqStream, RadarConfig, Spectrogram, View, SPEED_OF_LIGHT};
use crate::stats::ComparisonReport;

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}:{line}: {msg}", path.display()))
}

/// Metadata stored next to a raw IQ file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IqSidecar {
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub view: View,
    #[serde(default)]
    pub start_time_s: f64,
}

/// Location of the JSON sidecar belonging to an IQ file.
pub fn iq_sidecar_path(iq_path: &Path) -> PathBuf {
    iq_path.with_extension("json")
}

/// Write raw IQ samples plus their metadata sidecar.
pub fn write_iq(path: &Path, iq: &IqStream, radar: &RadarConfig) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in &iq.samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    let sidecar = IqSidecar {
        sample_rate_hz: iq.sample_rate_hz,
        carrier_hz: radar.carrier_hz,
        view: radar.view,
        start_time_s: iq.start_time_s,
    };
    write_json(&iq_sidecar_path(path), &sidecar)
}

/// Read raw IQ samples and their metadata sidecar.
pub fn read_iq(path: &Path) -> Result<(IqStream, RadarConfig)> {
    let sidecar_path = iq_sidecar_path(path);
    if !sidecar_path.exists() {
        return Err(Error::Parse(format!(
            "{}: missing metadata sidecar {}",
            path.display(),
            sidecar_path.display()
        )));
    }
    let sidecar: IqSidecar = read_json(&sidecar_path)?;
    if !(sidecar.sample_rate_hz > 0.0 && sidecar.carrier_hz > 0.0) {
        return Err(Error::Parse(format!(
            "{}: sample rate and carrier must be positive",
            sidecar_path.display()
        )));
    }
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "{}: length {} is not a whole number of f32 I/Q pairs",
            path.display(),
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| {
            Complex64::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64,
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64,
            )
        })
        .collect();
    let iq = IqStream {
        samples,
        sample_rate_hz: sidecar.sample_rate_hz,
        start_time_s: sidecar.start_time_s,
    };
    let radar = RadarConfig {
        carrier_hz: sidecar.carrier_hz,
        speed_of_light: SPEED_OF_LIGHT,
        view: sidecar.view,
    };
    Ok((iq, radar))
}

/// Serialize any value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Deserialize a JSON file, reporting the line on failure.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader).map_err(|e| parse_err(path, e.line(), e))
}

/// Write both legs' force traces side by side. The traces must share their
/// time grid.
pub fn write_grf_csv(path: &Path, left: &GrfTrace, right: &GrfTrace) -> Result<()> {
    if left.time_s.len() != right.time_s.len() {
        return Err(Error::invalid("GRF traces have different lengths"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,force_left_n,force_right_n")?;
    for i in 0..left.time_s.len() {
        if (left.time_s[i] - right.time_s[i]).abs() > 1e-9 {
            return Err(Error::invalid("GRF traces are not on the same time grid"));
        }
        writeln!(
            w,
            "{:.6},{:.3},{:.3}",
            left.time_s[i], left.force_n[i], right.force_n[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a two-leg force file written by [`write_grf_csv`].
pub fn read_grf_csv(path: &Path) -> Result<(GrfTrace, GrfTrace)> {
    let mut rdr = csv_reader(path)?;
    expect_header(path, &rdr.headers_owned()?, &["time_s", "force_left_n", "force_right_n"])?;
    let mut time = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(path, line, e))?;
        if record.len() != 3 {
            return Err(parse_err(path, line, "expected 3 columns"));
        }
        time.push(parse_field(path, line, &record[0])?);
        left.push(parse_field(path, line, &record[1])?);
        right.push(parse_field(path, line, &record[2])?);
    }
    let fs = infer_rate(path, &time)?;
    Ok((
        GrfTrace::new(Leg::Left, fs, time.clone(), left)?,
        GrfTrace::new(Leg::Right, fs, time, right)?,
    ))
}

/// Write all nine marker trajectories. Markers must share the time grid.
pub fn write_mocap_csv(path: &Path, rec: &MocapRecording) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = String::from("time_s");
    for marker in Marker::ALL {
        for axis in ["x", "y", "z"] {
            header.push(',');
            header.push_str(&format!("{}_{axis}_m", marker.column_prefix()));
        }
    }
    writeln!(w, "{header}")?;
    let trajs: Vec<&MarkerTrajectory> = Marker::ALL
        .iter()
        .map(|&m| {
            rec.get(m)
                .ok_or_else(|| Error::invalid(format!("marker {:?} missing", m)))
        })
        .collect::<Result<_>>()?;
    let n = trajs[0].time_s.len();
    if trajs.iter().any(|t| t.time_s.len() != n) {
        return Err(Error::invalid("marker trajectories have different lengths"));
    }
    for i in 0..n {
        let mut line = format!("{:.6}", trajs[0].time_s[i]);
        for t in &trajs {
            let p = t.position_m[i];
            line.push_str(&format!(",{:.6},{:.6},{:.6}", p[0], p[1], p[2]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Read a marker file written by [`write_mocap_csv`].
pub fn read_mocap_csv(path: &Path) -> Result<MocapRecording> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers_owned()?;
    if headers.get(0) != Some("time_s") {
        return Err(parse_err(path, 1, "first column must be time_s"));
    }
    // Map column position → (marker slot, axis).
    let mut columns: Vec<(usize, usize)> = Vec::new();
    for name in headers.iter().skip(1) {
        let (prefix, axis) = match name.strip_suffix("_m") {
            Some(rest) => match rest.rsplit_once('_') {
                Some((p, "x")) => (p, 0usize),
                Some((p, "y")) => (p, 1),
                Some((p, "z")) => (p, 2),
                _ => return Err(parse_err(path, 1, format!("unknown column {name:?}"))),
            },
            None => return Err(parse_err(path, 1, format!("unknown column {name:?}"))),
        };
        let marker = Marker::from_column_prefix(prefix)
            .ok_or_else(|| parse_err(path, 1, format!("unknown marker column {name:?}")))?;
        let slot = Marker::ALL.iter().position(|&m| m == marker).unwrap();
        columns.push((slot, axis));
    }
    let mut seen = [[false; 3]; 9];
    for &(slot, axis) in &columns {
        seen[slot][axis] = true;
    }
    if let Some(slot) = seen.iter().position(|s| s.iter().any(|&b| !b)) {
        return Err(parse_err(
            path,
            1,
            format!(
                "incomplete coordinates for marker {}",
                Marker::ALL[slot].column_prefix()
            ),
        ));
    }
    let mut time = Vec::new();
    let mut positions: Vec<Vec<[f64; 3]>> = vec![Vec::new(); 9];
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(path, line, e))?;
        if record.len() != columns.len() + 1 {
            return Err(parse_err(path, line, "wrong number of columns"));
        }
        time.push(parse_field(path, line, &record[0])?);
        for p in positions.iter_mut() {
            p.push([0.0; 3]);
        }
        for (i, &(slot, axis)) in columns.iter().enumerate() {
            positions[slot].last_mut().unwrap()[axis] =
                parse_field(path, line, &record[i + 1])?;
        }
    }
    let fs = infer_rate(path, &time)?;
    let markers = Marker::ALL
        .iter()
        .enumerate()
        .map(|(slot, &marker)| MarkerTrajectory {
            marker,
            sample_rate_hz: fs,
            time_s: time.clone(),
            position_m: std::mem::take(&mut positions[slot]),
        })
        .collect();
    Ok(MocapRecording { markers })
}

/// Write labeled parameter sets as JSON (the canonical interchange format).
pub fn write_params_json(path: &Path, sets: &[LabeledParameters]) -> Result<()> {
    write_json(path, &sets)
}

/// Read labeled parameter sets written by [`write_params_json`].
pub fn read_params_json(path: &Path) -> Result<Vec<LabeledParameters>> {
    read_json(path)
}

/// Flat CSV export of labeled parameter sets (one row per set, empty cells
/// for unavailable parameters).
pub fn write_params_csv(path: &Path, sets: &[LabeledParameters]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = String::from("subject,domain,view,speed_mps,restriction,leg");
    for id in ParameterId::ALL {
        header.push(',');
        header.push_str(id.name());
    }
    writeln!(w, "{header}")?;
    for set in sets {
        let m = &set.meta;
        let view = match m.view {
            View::Front => "front",
            View::Back => "back",
        };
        let leg = match m.leg {
            Some(Leg::Left) => "left",
            Some(Leg::Right) => "right",
            None => "",
        };
        let mut line = format!(
            "{},{},{view},{},{},{leg}",
            m.subject, m.domain, m.speed_mps, m.restriction
        );
        for id in ParameterId::ALL {
            line.push(',');
            if let Some(v) = set.params.get(id) {
                line.push_str(&format!("{v:.6}"));
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a comparison report as JSON.
pub fn write_report_json(path: &Path, report: &ComparisonReport) -> Result<()> {
    write_json(path, report)
}

/// Flat CSV grid of a comparison report: one row per tested cell.
pub fn write_report_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "parameter,speed_mps,view,restriction,n_pairs,w_plus,p_value,method,median_diff,ci95_lo,ci95_hi,decision"
    )?;
    for cell in &report.cells {
        let view = match cell.view {
            View::Front => "front",
            View::Back => "back",
        };
        let method = match cell.method {
            crate::stats::PMethod::Exact => "exact",
            crate::stats::PMethod::Normal => "normal",
        };
        let (lo, hi) = cell
            .median_ci95
            .map(|(lo, hi)| (format!("{lo:.6}"), format!("{hi:.6}")))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{view},{},{},{},{:.6},{method},{:.6},{lo},{hi},{}",
            cell.parameter,
            cell.speed_mps,
            cell.restriction,
            cell.n_pairs,
            cell.w_plus,
            cell.p_value,
            cell.median_diff,
            cell.decision.code(),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write an envelope as CSV (`time_s,velocity_mps,interpolated`).
pub fn write_envelope_csv(path: &Path, env: &EnvelopeSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time_s,velocity_mps,interpolated")?;
    for i in 0..env.time_s.len() {
        writeln!(
            w,
            "{:.6},{:.6},{}",
            env.time_s[i],
            env.velocity_mps[i],
            u8::from(env.interpolated[i])
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write a spectrogram as a wide CSV: one row per frame, one column per
/// frequency bin (header carries the bin centers in Hz).
pub fn write_spectrogram_csv(path: &Path, spec: &Spectrogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = String::from("time_s");
    for f in &spec.freq_hz {
        header.push_str(&format!(",{f:.4}"));
    }
    writeln!(w, "{header}")?;
    for (i, &t) in spec.time_s.iter().enumerate() {
        let mut line = format!("{t:.6}");
        for v in spec.power.row(i) {
            line.push_str(&format!(",{v:.6e}"));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?)))
}

trait HeadersOwned {
    fn headers_owned(&mut self) -> Result<csv::StringRecord>;
}

impl<R: std::io::Read> HeadersOwned for csv::Reader<R> {
    fn headers_owned(&mut self) -> Result<csv::StringRecord> {
        self.headers()
            .map(|h| h.clone())
            .map_err(|e| Error::Parse(format!("{e}")))
    }
}

fn expect_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got_cols: Vec<&str> = got.iter().collect();
    if got_cols != want {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", want.join(","), got_cols.join(",")),
        ));
    }
    Ok(())
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))
}

/// Sampling rate from a uniform time column.
fn infer_rate(path: &Path, time: &[f64]) -> Result<f64> {
    if time.len() < 2 {
        return Err(Error::insufficient(format!(
            "{}: need at least two samples",
            path.display()
        )));
    }
    let span = time[time.len() - 1] - time[0];
    if !(span > 0.0) {
        return Err(parse_err(path, 2, "time column must be increasing"));
    }
    let dt = span / (time.len() - 1) as f64;
    for (i, w) in time.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > 0.01 * dt {
            return Err(parse_err(
                path,
                i + 3,
                format!("non-uniform sampling: step {step:.6}s, expected {dt:.6}s"),
            ));
        }
    }
    // Timestamps written with limited precision blur the rate slightly; snap
    // to the nearest integer rate when it is within that blur.
    let rate = 1.0 / dt;
    if (rate - rate.round()).abs() < 1e-3 * rate && rate.round() > 0.0 {
        return Ok(rate.round());
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StftConfig;
    use approx::assert_abs_diff_eq;

    #[test]
    fn iq_round_trip_preserves_metadata_and_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walk.iq");
        let samples: Vec<Complex64> = (0..100)
            .map(|i| Complex64::new((i as f64 * 0.01).sin(), (i as f64 * 0.02).cos()))
            .collect();
        let iq = IqStream::new(samples, 2560.0);
        let radar = RadarConfig {
            view: View::Back,
            ..RadarConfig::default()
        };
        write_iq(&path, &iq, &radar).unwrap();
        let (back, radar2) = read_iq(&path).unwrap();
        assert_eq!(back.samples.len(), 100);
        assert_eq!(back.sample_rate_hz, 2560.0);
        assert_eq!(radar2.view, View::Back);
        assert_eq!(radar2.carrier_hz, 24.0e9);
        // f32 storage: relative error stays below 1e-6.
        assert_abs_diff_eq!(back.samples[57].re, iq.samples[57].re, epsilon = 1e-6);
    }

    #[test]
    fn iq_without_sidecar_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orphan.iq");
        std::fs::write(&path, [0u8; 16]).unwrap();
        let err = read_iq(&path).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn grf_round_trip_and_line_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forces.csv");
        let time: Vec<f64> = (0..500).map(|i| i as f64 / 1000.0).collect();
        let left: Vec<f64> = time.iter().map(|t| 700.0 * (t * 6.0).sin().max(0.0)).collect();
        let right: Vec<f64> = time.iter().map(|t| 700.0 * (t * 6.0).cos().max(0.0)).collect();
        let l = GrfTrace::new(Leg::Left, 1000.0, time.clone(), left).unwrap();
        let r = GrfTrace::new(Leg::Right, 1000.0, time, right).unwrap();
        write_grf_csv(&path, &l, &r).unwrap();
        let (l2, r2) = read_grf_csv(&path).unwrap();
        assert_eq!(l2.leg, Leg::Left);
        assert_abs_diff_eq!(l2.sample_rate_hz, 1000.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r2.force_n[123], r.force_n[123], epsilon = 1e-3);

        // Corrupt one cell → error names the line.
        let mut text = std::fs::read_to_string(&path).unwrap();
        text = text.replace("0.004000,", "0.004000,oops,");
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, text.replace("oops,,", "oops,")).unwrap();
        let err = read_grf_csv(&bad).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains(":6:"), "missing line number: {msg}");

        // Wrong header → line 1 diagnostic.
        let bad2 = dir.path().join("bad2.csv");
        std::fs::write(&bad2, "time,left,right\n0,0,0\n").unwrap();
        let err = read_grf_csv(&bad2).unwrap_err();
        assert!(format!("{err}").contains(":1:"));
    }

    #[test]
    fn mocap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("markers.csv");
        let time: Vec<f64> = (0..96).map(|i| i as f64 / 480.0).collect();
        let markers = Marker::ALL
            .iter()
            .enumerate()
            .map(|(j, &marker)| MarkerTrajectory {
                marker,
                sample_rate_hz: 480.0,
                time_s: time.clone(),
                position_m: time
                    .iter()
                    .map(|&t| [0.1 * j as f64, (t + j as f64).sin() * 0.2, 0.5])
                    .collect(),
            })
            .collect();
        let rec = MocapRecording { markers };
        write_mocap_csv(&path, &rec).unwrap();
        let back = read_mocap_csv(&path).unwrap();
        assert_eq!(back.markers.len(), 9);
        let knee = back.get(Marker::KneeRight).unwrap();
        assert_abs_diff_eq!(knee.sample_rate_hz, 480.0, epsilon = 1e-6);
        let orig = rec.get(Marker::KneeRight).unwrap();
        assert_abs_diff_eq!(knee.position_m[50][1], orig.position_m[50][1], epsilon = 1e-6);

        // A missing coordinate column is rejected at the header.
        let text = std::fs::read_to_string(&path).unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, text.replace("sacrum_z_m", "sacrum_w_m")).unwrap();
        assert!(read_mocap_csv(&bad).is_err());
    }

    #[test]
    fn params_json_round_trip_and_csv_export() {
        use crate::gait::{Domain, GaitParameters, ParameterMetadata};
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![LabeledParameters {
            meta: ParameterMetadata {
                subject: "s01".into(),
                speed_mps: 1.1,
                view: View::Front,
                restriction: "none".into(),
                leg: Some(Leg::Right),
                domain: Domain::Radar,
            },
            params: GaitParameters {
                stride_time_s: Some(1.04),
                step_time_s: Some(0.52),
                ..GaitParameters::default()
            },
        }];
        let jpath = dir.path().join("params.json");
        write_params_json(&jpath, &sets).unwrap();
        let back = read_params_json(&jpath).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].meta.subject, "s01");
        assert_eq!(back[0].params.stride_time_s, Some(1.04));
        assert_eq!(back[0].params.flight_time_s, None);

        let cpath = dir.path().join("params.csv");
        write_params_csv(&cpath, &sets).unwrap();
        let text = std::fs::read_to_string(&cpath).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("subject,domain,view,speed_mps,restriction,leg,stride_time_s"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("s01,radar,front,1.1,none,right,1.040000"));
        // Missing parameters stay empty.
        assert!(row.contains(",,"));
    }

    #[test]
    fn spectrogram_and_envelope_exports_have_matching_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let iq = IqStream::new(
            (0..1024)
                .map(|i| {
                    let ph = 2.0 * std::f64::consts::PI * 160.0 * i as f64 / 2560.0;
                    Complex64::new(ph.cos(), ph.sin())
                })
                .collect(),
            2560.0,
        );
        let spec = crate::signal::compute_spectrogram(
            &iq,
            &StftConfig {
                hop: 128,
                fft_len: 512,
                remove_mean: false,
                ..StftConfig::default()
            },
        )
        .unwrap();
        let spath = dir.path().join("spec.csv");
        write_spectrogram_csv(&spath, &spec).unwrap();
        let text = std::fs::read_to_string(&spath).unwrap();
        let mut lines = text.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        assert_eq!(header_cols, spec.freq_hz.len() + 1);
        assert_eq!(lines.count(), spec.n_frames());

        let env = EnvelopeSignal {
            kind: crate::envelope::EnvelopeKind::Standard,
            time_s: vec![0.0, 0.1, 0.2],
            velocity_mps: vec![1.0, 2.0, 1.5],
            interpolated: vec![false, true, false],
            warnings: vec![],
        };
        let epath = dir.path().join("env.csv");
        write_envelope_csv(&epath, &env).unwrap();
        let text = std::fs::read_to_string(&epath).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().ends_with(",1"));
    }
}
