//! CSV and JSON artefacts.
//!
//! CSV files always have a header row, use `.` as decimal separator and
//! `\n` line endings. Floats are written in shortest round-trip form, so
//! reading a file back reproduces the values bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::device::OperatingRegion;
use crate::error::{Error, Result};
use crate::metrics::dbc_serde;
use crate::regions::{RegionSchedule, Transistor};
use crate::sim::{Availability, PhaseNoiseSpectrum};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Numeric table with named columns.
pub fn write_table(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(headers)?;
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::Argument(format!("row has {} cells for {} columns", row.len(), headers.len())));
        }
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.deserialize().collect::<std::result::Result<Vec<Vec<f64>>, _>>()?;
    Ok((headers, rows))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub transistor: Transistor,
    pub region: OperatingRegion,
    pub start_rad: f64,
    pub end_rad: f64,
    pub start_deg: f64,
    pub end_deg: f64,
}

pub fn schedule_rows(schedule: &RegionSchedule) -> Vec<ScheduleRow> {
    schedule
        .intervals
        .iter()
        .map(|i| ScheduleRow {
            transistor: schedule.transistor,
            region: i.region,
            start_rad: i.start,
            end_rad: i.end,
            start_deg: i.start.to_degrees(),
            end_deg: i.end.to_degrees(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub offset_hz: f64,
    #[serde(rename = "L_dbc_hz", with = "dbc_serde")]
    pub l_dbc_hz: f64,
    pub flag: Availability,
}

pub fn spectrum_rows(spectrum: &PhaseNoiseSpectrum) -> Vec<SpectrumRow> {
    spectrum
        .points
        .iter()
        .map(|p| SpectrumRow { offset_hz: p.offset_hz, l_dbc_hz: p.l_dbc_hz, flag: p.flag })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regions::{schedule, BoundaryAngles};
    use crate::sim::TracePoint;

    fn same(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    #[test]
    fn schedule_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let angles = BoundaryAngles::from_radians(0.28225364956619412, 1.2, 0.3);
        let rows = schedule_rows(&schedule(&angles, Transistor::M2));
        write_rows(&path, &rows).unwrap();
        let back: Vec<ScheduleRow> = read_rows(&path).unwrap();
        assert_eq!(rows, back);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("transistor,region,start_rad,end_rad,start_deg,end_deg\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn spectrum_rows_keep_infinities_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sp.csv");
        let rows = vec![
            SpectrumRow { offset_hz: 100.0, l_dbc_hz: f64::NAN, flag: Availability::BelowResolution },
            SpectrumRow { offset_hz: 1e4, l_dbc_hz: -123.456789012345, flag: Availability::Ok },
            SpectrumRow { offset_hz: 1e6, l_dbc_hz: f64::NEG_INFINITY, flag: Availability::Ok },
        ];
        write_rows(&path, &rows).unwrap();
        let back: Vec<SpectrumRow> = read_rows(&path).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert!(same(a.l_dbc_hz, b.l_dbc_hz) && a.offset_hz == b.offset_hz && a.flag == b.flag);
        }
    }

    #[test]
    fn numeric_table_and_trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0, -2.5e-300], vec![std::f64::consts::PI, 1e22, f64::NAN]];
        write_table(&path, &["a", "b", "c"], &rows).unwrap();
        let (h, back) = read_table(&path).unwrap();
        assert_eq!(h, vec!["a", "b", "c"]);
        for (r, s) in rows.iter().zip(&back) {
            assert!(r.iter().zip(s).all(|(x, y)| same(*x, *y)));
        }
        let trace = vec![TracePoint { t: 1e-9, v_o1: 1.8000000000000003, v_o2: 0.1, v_b1: -0.429, v_b2: 0.0 }];
        let p2 = dir.path().join("trace.csv");
        write_rows(&p2, &trace).unwrap();
        assert_eq!(read_rows::<TracePoint>(&p2).unwrap(), trace);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let v = vec![0.1f64, 2.0 / 3.0];
        write_json(&path, &v).unwrap();
        assert_eq!(read_json::<Vec<f64>>(&path).unwrap(), v);
    }
}
