//! CSV formats. Every number is written with [`fmt_f64`] and reads back to
//! the identical double.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::model::{PhaseLabel, StateVector, TimeSeries, TransferLog};
use crate::sweep::{AxisRange, BoundaryPoint, GridMode, GridSpec, PhaseMap};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "x", "p", "y", "q", "E_x", "E_y"];
pub const TRANSFER_LOG_HEADER: [&str; 7] = [
    "t_extract",
    "x_before",
    "x_after",
    "packet_energy",
    "t_deposit",
    "y_before",
    "y_after",
];
pub const PHASE_MAP_HEADER: [&str; 3] = ["epsilon", "param", "label"];
pub const BOUNDARY_HEADER: [&str; 3] = ["epsilon", "critical_value", "half_width"];

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn read_rows<R: Read>(r: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found = rdr.headers().map_err(csv_err)?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Config(format!(
            "expected header {:?}, found {:?}",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rdr.records().map(|r| r.map_err(csv_err)).collect()
}

fn field(rec: &csv::StringRecord, k: usize, line: usize) -> Result<f64> {
    let s = rec.get(k).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Config(format!("row {line}: column {} is not a number: {s:?}", k + 1)))
}

pub fn write_trajectory<W: Write>(w: W, series: &TimeSeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for ((t, s), (_, ex, ey)) in series.samples().iter().zip(series.energies()) {
        out.write_record([t, &s.x, &s.p, &s.y, &s.q, ex, ey].map(|v| fmt_f64(*v)))
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

/// Parse a trajectory; the energy columns are recomputed from the state.
pub fn read_trajectory<R: Read>(r: R) -> Result<TimeSeries> {
    let rows = read_rows(r, &TRAJECTORY_HEADER)?;
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let v = |k| field(rec, k, i + 2);
            Ok((v(0)?, StateVector { x: v(1)?, p: v(2)?, y: v(3)?, q: v(4)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::from_samples(samples)
}

/// Pending events leave the deposit columns empty.
pub fn write_transfer_log<W: Write>(w: W, log: &TransferLog) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRANSFER_LOG_HEADER).map_err(csv_err)?;
    for e in &log.events {
        out.write_record([
            fmt_f64(e.t_extract),
            fmt_f64(e.x_peak_before),
            fmt_f64(e.x_peak_after),
            fmt_f64(e.packet_energy),
            opt(e.t_deposit),
            opt(e.y_peak_before),
            opt(e.y_peak_after),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

pub fn write_phase_map<W: Write>(w: W, map: &PhaseMap) -> Result<()> {
    let mut out = writer(w);
    out.write_record(PHASE_MAP_HEADER).map_err(csv_err)?;
    for (idx, label) in map.labels.iter().enumerate() {
        let (eps, param) = map.grid.coords(idx);
        out.write_record([fmt_f64(eps), fmt_f64(param), label.as_str().to_string()])
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

fn axis_from(values: &[f64], field: &'static str) -> Result<AxisRange> {
    let axis = AxisRange::new(values[0], values[values.len() - 1], values.len());
    if axis.values() != values {
        return Err(Error::Config(format!("{field} values are not an evenly spaced grid")));
    }
    Ok(axis)
}

/// Rebuild a phase map from its CSV. The grid is inferred from the
/// coordinates; simulation settings take their defaults.
pub fn read_phase_map<R: Read>(r: R, mode: GridMode) -> Result<PhaseMap> {
    let rows = read_rows(r, &PHASE_MAP_HEADER)?;
    if rows.is_empty() {
        return Err(Error::Config("phase map has no rows".into()));
    }
    let mut cells = Vec::with_capacity(rows.len());
    for (i, rec) in rows.iter().enumerate() {
        let label: PhaseLabel = rec.get(2).unwrap_or("").parse()?;
        cells.push((field(rec, 0, i + 2)?, field(rec, 1, i + 2)?, label));
    }
    let n_param = cells.iter().take_while(|c| c.0 == cells[0].0).count();
    if cells.len() % n_param != 0 {
        return Err(Error::Config("phase map rows do not form a full grid".into()));
    }
    let params: Vec<f64> = cells[..n_param].iter().map(|c| c.1).collect();
    let eps: Vec<f64> = cells.iter().step_by(n_param).map(|c| c.0).collect();
    let grid = GridSpec::new(axis_from(&eps, "epsilon")?, axis_from(&params, "param")?, mode);
    for (idx, c) in cells.iter().enumerate() {
        if grid.coords(idx) != (c.0, c.1) {
            return Err(Error::Config(format!("row {} is out of row-major order", idx + 2)));
        }
    }
    let labels: Vec<PhaseLabel> = cells.iter().map(|c| c.2).collect();
    let mut map = PhaseMap {
        grid,
        labels,
        boundary: Vec::new(),
        errors: Default::default(),
    };
    map.boundary = crate::sweep::grid_boundary(&map.grid, &map.labels);
    Ok(map)
}

pub fn write_boundary<W: Write>(w: W, points: &[BoundaryPoint]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(BOUNDARY_HEADER).map_err(csv_err)?;
    for b in points {
        out.write_record([b.epsilon, b.critical_value, b.half_width].map(fmt_f64))
            .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

pub fn read_boundary<R: Read>(r: R) -> Result<Vec<BoundaryPoint>> {
    read_rows(r, &BOUNDARY_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            Ok(BoundaryPoint {
                epsilon: field(rec, 0, i + 2)?,
                critical_value: field(rec, 1, i + 2)?,
                half_width: field(rec, 2, i + 2)?,
            })
        })
        .collect()
}
