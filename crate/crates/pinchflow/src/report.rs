//! Deterministic output writers: CSV time series, point and per-site dumps,
//! JSON summaries.
//!
//! Every writer is byte-deterministic: floats are printed with Rust's
//! shortest round-trip formatting ('.' decimal separator, no locale), CSV
//! rows end with `\n`, JSON objects are plain structs so the key order is
//! fixed at compile time. Running the same configuration twice produces
//! identical bytes.
//!
//! Column orders are part of the public contract:
//!
//! * time series: `t, q_max, f_max, h_min, h_max, asq_max, ratio_max,
//!   ddvv_min, area, diameter`, then one `lp{p}_f` column per configured
//!   exponent;
//! * point dumps: `iu, iv, x0, x1, x2, x3, x4` (all five embedding
//!   coordinates, zero-padded for the flat model);
//! * per-site diagnostics: `iu, iv, h, asq, aring_sq, kperp, gauss_k, ddvv,
//!   q, f` (`nan` where a pole row or the |H| cutoff leaves a quantity
//!   undefined);
//! * ODE samples: `t, rho, hsq`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{ExtinctionFit, FlowOutcome, StopReason};
use crate::oracle::SphereOde;
use crate::pinching::PinchingParams;
use crate::spaceform::Ambient;
use crate::surface::{Diagnostics, ShapeData, SurfaceGrid};

/// Shortest round-trip decimal form of `v` (`inf`, `-inf`, `NaN` for the
/// non-finite values), used for every CSV cell.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source: e }
}

/// Incremental writer for the flow time series.
pub struct TimeSeries<W: Write> {
    out: W,
    p_list: Vec<f64>,
}

impl TimeSeries<BufWriter<File>> {
    /// Create (truncate) `path` and write the header.
    pub fn create(path: &Path, p_list: &[f64]) -> Result<Self> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut ts = TimeSeries { out: BufWriter::new(file), p_list: p_list.to_vec() };
        ts.write_header().map_err(|e| io_err(path, e))?;
        Ok(ts)
    }
}

impl<W: Write> TimeSeries<W> {
    /// Wrap an arbitrary sink (used by tests and in-memory consumers).
    pub fn new(out: W, p_list: &[f64]) -> std::io::Result<Self> {
        let mut ts = TimeSeries { out, p_list: p_list.to_vec() };
        ts.write_header()?;
        Ok(ts)
    }

    fn write_header(&mut self) -> std::io::Result<()> {
        let mut header = String::from(
            "t,q_max,f_max,h_min,h_max,asq_max,ratio_max,ddvv_min,area,diameter",
        );
        for &p in &self.p_list {
            header.push_str(&format!(",lp{}_f", fmt(p)));
        }
        header.push('\n');
        self.out.write_all(header.as_bytes())?;
        self.out.flush()
    }

    /// Append one record and flush, so partial output survives an abort.
    pub fn record(&mut self, d: &Diagnostics) -> std::io::Result<()> {
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{}",
            fmt(d.t),
            fmt(d.q_max),
            fmt(d.f_max),
            fmt(d.h_min),
            fmt(d.h_max),
            fmt(d.asq_max),
            fmt(d.ratio_max),
            fmt(d.ddvv_min),
            fmt(d.area),
            fmt(d.diameter),
        );
        debug_assert_eq!(d.lp_f.len(), self.p_list.len());
        for &(_, value) in &d.lp_f {
            row.push(',');
            row.push_str(&fmt(value));
        }
        row.push('\n');
        self.out.write_all(row.as_bytes())?;
        self.out.flush()
    }

    /// Flush and return the underlying sink.
    pub fn into_inner(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Dump every grid point as `iu,iv,x0,x1,x2,x3,x4`.
pub fn write_points_csv(path: &Path, surface: &SurfaceGrid) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let go = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(b"iu,iv,x0,x1,x2,x3,x4\n")?;
        for iu in 0..surface.nu {
            for iv in 0..surface.nv {
                let p = surface.point(iu, iv);
                writeln!(
                    out,
                    "{iu},{iv},{},{},{},{},{}",
                    fmt(p[0]),
                    fmt(p[1]),
                    fmt(p[2]),
                    fmt(p[3]),
                    fmt(p[4]),
                )?;
            }
        }
        out.flush()
    };
    go(&mut out).map_err(|e| io_err(path, e))
}

/// Dump per-site diagnostics for diagnostic rows as
/// `iu,iv,h,asq,aring_sq,kperp,gauss_k,ddvv,q,f`; sites without shape data
/// (pole rows) and undefined decay values print `nan`.
pub fn write_sites_csv(
    path: &Path,
    surface: &SurfaceGrid,
    field: &[Option<ShapeData>],
    params: &PinchingParams,
    sigma: f64,
) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let monitor = params.monitor();
    let tol_h = 1e-8 * surface.model.inverse_length_scale();
    let go = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(b"iu,iv,h,asq,aring_sq,kperp,gauss_k,ddvv,q,f\n")?;
        for iu in 0..surface.nu {
            for iv in 0..surface.nv {
                match &field[surface.idx(iu, iv)] {
                    Some(s) => {
                        let shape = s.point_shape();
                        let q = params.q_value(shape);
                        let f = monitor.f_sigma(shape, sigma, tol_h).unwrap_or(f64::NAN);
                        writeln!(
                            out,
                            "{iu},{iv},{},{},{},{},{},{},{},{}",
                            fmt(s.h_norm),
                            fmt(s.asq),
                            fmt(s.aring_sq),
                            fmt(s.kperp),
                            fmt(s.gauss_k),
                            fmt(s.ddvv),
                            fmt(q),
                            fmt(f),
                        )?;
                    }
                    None => {
                        writeln!(out, "{iu},{iv},NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN")?;
                    }
                }
            }
        }
        out.flush()
    };
    go(&mut out).map_err(|e| io_err(path, e))
}

/// Write uniform samples of the exact shrinking-sphere solution as
/// `t,rho,hsq`.
pub fn write_ode_csv(path: &Path, ode: &SphereOde, samples: usize) -> Result<()> {
    let pairs = ode.sample(samples)?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let go = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(b"t,rho,hsq\n")?;
        for &(t, rho) in &pairs {
            let hsq = ode.hsq_at(t).unwrap_or(f64::NAN);
            writeln!(out, "{},{},{}", fmt(t), fmt(rho), fmt(hsq))?;
        }
        out.flush()
    };
    go(&mut out).map_err(|e| io_err(path, e))
}

/// Serialize `value` as pretty JSON (stable key order from the struct
/// definition) followed by a final newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Numerical { step: 0, message: format!("JSON encoding: {e}") })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Statement of the length normalization in effect, embedded in summaries:
/// quantities are dimensionless once lengths are measured against
/// `reference_length`.
#[derive(Debug, Clone, Serialize)]
pub struct UnitsNote {
    /// `"model-radius"` on the curved models, `"initial-curvature-scale"`
    /// (the initial value of 2/|H|_mean) on the flat one.
    pub basis: &'static str,
    pub reference_length: f64,
}

impl UnitsNote {
    /// Derive the note from the model and the initial mean of |H|.
    pub fn for_run(model: Ambient, initial_h_mean: f64) -> UnitsNote {
        match model {
            Ambient::S4 { radius } | Ambient::H4 { radius } => {
                UnitsNote { basis: "model-radius", reference_length: radius }
            }
            Ambient::R4 => UnitsNote {
                basis: "initial-curvature-scale",
                reference_length: if initial_h_mean > 0.0 { 2.0 / initial_h_mean } else { 1.0 },
            },
        }
    }
}

/// Certification facts accumulated over a flow run.
#[derive(Debug, Clone, Serialize)]
pub struct CertificationSummary {
    /// Largest pinching value on the first record (negative iff the run
    /// starts strictly inside the cone).
    pub q_max_initial: f64,
    /// Largest pinching value on the last record.
    pub q_max_final: f64,
    /// Largest pinching value over all records.
    pub q_max_overall: f64,
    /// Smallest normal-curvature slack over every site of every record.
    pub ddvv_min_overall: f64,
    pub h_max_initial: f64,
    pub h_max_final: f64,
    /// First record time with |H|_max beyond ten times its initial value.
    pub h_threshold_time: Option<f64>,
    /// First record time where Q_max crossed from negative to nonnegative.
    pub pinching_lost_at: Option<f64>,
    /// Whether pinching was lost while |H|_max was still below the
    /// ten-fold threshold (the certification failure the exit code reports).
    pub lost_before_threshold: bool,
    pub ratio_max_final: f64,
    pub f_max_initial: f64,
    pub f_max_final: f64,
}

impl CertificationSummary {
    pub fn from_outcome(outcome: &FlowOutcome) -> Option<CertificationSummary> {
        let first = outcome.records.first()?;
        let last = outcome.records.last()?;
        let q_max_overall =
            outcome.records.iter().map(|d| d.q_max).fold(f64::NEG_INFINITY, f64::max);
        let lost_before_threshold = match outcome.pinching_lost_at {
            None => false,
            Some(lost) => match outcome.h_threshold_time {
                None => true,
                Some(threshold) => lost < threshold,
            },
        };
        Some(CertificationSummary {
            q_max_initial: first.q_max,
            q_max_final: last.q_max,
            q_max_overall,
            ddvv_min_overall: outcome.ddvv_min_overall,
            h_max_initial: first.h_max,
            h_max_final: last.h_max,
            h_threshold_time: outcome.h_threshold_time,
            pinching_lost_at: outcome.pinching_lost_at,
            lost_before_threshold,
            ratio_max_final: last.ratio_max,
            f_max_initial: first.f_max,
            f_max_final: last.f_max,
        })
    }
}

/// JSON summary of a `simulate` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<C: Serialize> {
    /// Effective configuration, defaults applied.
    pub config: C,
    /// Seed override from the command line, when one was given.
    pub seed: Option<u64>,
    pub units: UnitsNote,
    pub stop_reason: StopReason,
    pub steps: u64,
    pub final_time: f64,
    pub records: usize,
    pub extinction: Option<ExtinctionFit>,
    pub certification: Option<CertificationSummary>,
    /// Driver-level failure description for non-clean stops.
    pub failure: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::spaceform::Ambient;
    use crate::surface::compute_shape_field;

    fn sample_diagnostics() -> Diagnostics {
        Diagnostics {
            t: 0.25,
            q_max: -1.5,
            q_min: -2.0,
            f_max: 0.125,
            f_undefined: 0,
            h_min: 1.0,
            h_max: 2.0,
            h_mean: 1.5,
            asq_max: 2.5,
            ratio_max: 0.001,
            ddvv_min: -1e-17,
            area: 12.566,
            diameter: 2.0,
            lp_f: vec![(2.0, 0.1), (4.0, 0.05)],
        }
    }

    #[test]
    fn time_series_bytes_are_pinned() {
        let mut ts = TimeSeries::new(Vec::new(), &[2.0, 4.0]).unwrap();
        ts.record(&sample_diagnostics()).unwrap();
        let bytes = ts.into_inner().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,q_max,f_max,h_min,h_max,asq_max,ratio_max,ddvv_min,area,diameter,lp2_f,lp4_f"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0.25,-1.5,0.125,1,2,2.5,0.001,-0.00000000000000001,12.566,2,0.1,0.05"
        );
        assert_eq!(lines.next(), None);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn identical_records_produce_identical_bytes() {
        let write = || {
            let mut ts = TimeSeries::new(Vec::new(), &[2.0]).unwrap();
            let mut d = sample_diagnostics();
            d.lp_f = vec![(2.0, 0.1)];
            ts.record(&d).unwrap();
            ts.record(&d).unwrap();
            ts.into_inner().unwrap()
        };
        assert_eq!(write(), write());
    }

    #[test]
    fn point_dump_covers_every_site() {
        let dir = std::env::temp_dir().join("pinchflow-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("points.csv");
        let surface = presets::round_sphere_r4(1.0, 8, 8).unwrap();
        write_points_csv(&path, &surface).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iu,iv,x0,x1,x2,x3,x4");
        assert_eq!(lines.len(), 1 + 64);
        // Every data row has exactly 7 fields and parses.
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            for f in &fields[2..] {
                f.parse::<f64>().unwrap();
            }
        }
    }

    #[test]
    fn site_dump_marks_poles_and_undefined_values() {
        let dir = std::env::temp_dir().join("pinchflow-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sites.csv");
        // Pole rows carry no shape data and must be marked rather than
        // silently skipped; a totally geodesic surface in the spherical
        // model keeps the decay functional defined (the ambient term holds
        // the denominator positive) and its numerator vanishes identically.
        let surface = presets::totally_geodesic_s2(1.0, 12, 12).unwrap();
        let field = compute_shape_field(&surface).unwrap();
        let params = PinchingParams::new(0.7, 1.0).unwrap();
        write_sites_csv(&path, &surface, &field, &params, 0.05).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iu,iv,h,asq,aring_sq,kperp,gauss_k,ddvv,q,f");
        assert_eq!(lines.len(), 1 + 144);
        // Pole row: all quantities undefined.
        assert_eq!(lines[1], "0,0,NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN");
        // Interior row: geometry defined; the decay functional is exactly
        // zero on a totally geodesic surface (no traceless or normal part).
        let interior: Vec<&str> = lines[1 + 5 * 12 + 3].split(',').collect();
        assert_eq!(interior[0], "5");
        let h: f64 = interior[2].parse().unwrap();
        assert!(h.abs() < 1e-10, "geodesic sphere should be minimal, |H| = {h}");
        assert_eq!(interior[9], "0");
    }

    #[test]
    fn ode_samples_follow_the_exact_solution() {
        let dir = std::env::temp_dir().join("pinchflow-report-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ode.csv");
        let ode = SphereOde::R4 { r0: 1.0 };
        write_ode_csv(&path, &ode, 5).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,rho,hsq");
        assert_eq!(lines.len(), 6);
        let row: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        // t = 0.05: r = sqrt(1 - 0.2), |H|^2 = 4/r^2.
        assert!((row[0] - 0.05).abs() < 1e-15);
        assert!((row[1] - (0.8f64).sqrt()).abs() < 1e-15);
        assert!((row[2] - 4.0 / 0.8).abs() < 1e-12);
    }

    #[test]
    fn json_summary_has_stable_keys_and_reason_names() {
        #[derive(Serialize, Clone)]
        struct Cfg {
            k: f64,
        }
        let summary = RunSummary {
            config: Cfg { k: 0.7 },
            seed: Some(42),
            units: UnitsNote::for_run(Ambient::R4, 2.0),
            stop_reason: StopReason::RoundPoint,
            steps: 10,
            final_time: 0.25,
            records: 2,
            extinction: None,
            certification: None,
            failure: None,
        };
        let one = serde_json::to_string_pretty(&summary).unwrap();
        let two = serde_json::to_string_pretty(&summary).unwrap();
        assert_eq!(one, two);
        assert!(one.contains("\"stop_reason\": \"RoundPoint\""), "got: {one}");
        assert!(one.contains("\"basis\": \"initial-curvature-scale\""));
        let cfg_pos = one.find("\"config\"").unwrap();
        let stop_pos = one.find("\"stop_reason\"").unwrap();
        assert!(cfg_pos < stop_pos, "config must come first for readability");
    }

    #[test]
    fn units_note_prefers_the_model_radius() {
        let curved = UnitsNote::for_run(Ambient::S4 { radius: 2.0 }, 3.0);
        assert_eq!(curved.basis, "model-radius");
        assert_eq!(curved.reference_length, 2.0);
        let flat = UnitsNote::for_run(Ambient::R4, 4.0);
        assert_eq!(flat.basis, "initial-curvature-scale");
        assert_eq!(flat.reference_length, 0.5);
    }
}
