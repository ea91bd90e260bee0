use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use ptsym_core::dynamics::{classify_envelopes, integrate, rabi_metrics, Envelope, Model, SimConfig};
use ptsym_core::format::fmt_f64;
use ptsym_core::io;
use ptsym_core::spectral::{
    beat_period, critical_damping, modal_eigenvalues, two_box_critical_coupling, two_box_eigenvalues,
};
use ptsym_core::sweep::{refine_column, run_sweep, BoundaryPoint, GridMode, GridSpec, PhaseMap};
use ptsym_core::tof::{time_of_flight, CutoffStudy, TofRequest, DEFAULT_ACCURACY, DEFAULT_CUTOFF};
use ptsym_core::{Channel, CoupledParams, PhaseLabel, Tolerances, TwoBoxParams, VERSION};
use serde_json::{json, Value};

use crate::cli::*;
use crate::config::{usage, InitState, ModelArg, RangeArg, Settings};
use crate::manifest::{unix_now, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn resolve(s: &mut Settings, flag: Option<String>, default: &str) -> Result<Self> {
        match s.get("format", flag, default.to_string())?.as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(usage(format!("format must be csv or json, got {other:?}"))),
        }
    }
}

/// Shared bookkeeping for one invocation.
struct Run {
    command: &'static str,
    settings: Settings,
    started: f64,
    outputs: Vec<String>,
}

impl Run {
    fn new(command: &'static str, config: Option<&Path>) -> Result<Self> {
        let mut settings = Settings::new();
        if let Some(path) = config {
            settings.load(path)?;
        }
        Ok(Self {
            command,
            settings,
            started: unix_now(),
            outputs: Vec::new(),
        })
    }

    /// Write `bytes` to `dest`, or to standard output for `-`.
    fn emit(&mut self, dest: &str, bytes: &[u8]) -> Result<()> {
        if dest == "-" {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).context("cannot write to standard output")?;
            return out.flush().context("cannot write to standard output");
        }
        std::fs::write(dest, bytes).with_context(|| format!("cannot write {dest}"))?;
        self.outputs.push(dest.to_string());
        Ok(())
    }

    fn finish(mut self, manifest: Option<PathBuf>, out: &str, summary: Value) -> Result<()> {
        let manifest = self.settings.get_opt("manifest", manifest)?;
        for key in self.settings.unused() {
            eprintln!("warning: unused configuration key {key}");
        }
        let path = match manifest {
            Some(p) => p,
            None if out != "-" => PathBuf::from(format!("{out}.manifest.json")),
            None => return Ok(()),
        };
        RunManifest {
            command: self.command.to_string(),
            params: self.settings.params(),
            argv: self.settings.argv(self.command),
            outputs: self.outputs,
            tool_version: VERSION.to_string(),
            started: self.started,
            finished: unix_now(),
            summary,
        }
        .write(&path)
    }
}

fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn simulate(args: SimulateArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("simulate", config)?;
    let s = &mut run.settings;
    let model = s.get("model", args.model, ModelArg(Model::Lossless))?.0;
    let epsilon = s.require("epsilon", args.epsilon)?;
    let damping = s.get("a", args.damping, 0.0)?;
    let transfer = s.get("g", args.transfer, 0.0)?;
    let defaults = SimConfig::default();
    let dt = s.get("dt", args.dt, defaults.dt)?;
    let t_end = s.get("t-end", args.t_end, defaults.t_end)?;
    let init = s.get("init", args.init, InitState(defaults.initial))?;
    let stride = s.get("stride", args.stride, defaults.sample_stride)?;
    let allow_large_step = s.switch("allow-large-step", args.allow_large_step)?;
    let out = s.require("out", args.out)?;
    let log = s.get_opt("log", args.log)?;

    let params = CoupledParams::new(epsilon, damping, transfer)?;
    if log.is_some() && model != Model::EnergyTransfer {
        return Err(usage("--log applies to the transfer model only"));
    }
    if damping != 0.0 && model != Model::LinearGainLoss {
        eprintln!("warning: --a is ignored by the {} model", model.as_str());
    }
    if transfer != 0.0 && model != Model::EnergyTransfer {
        eprintln!("warning: --g is ignored by the {} model", model.as_str());
    }
    let cfg = SimConfig {
        dt,
        t_end,
        initial: init.0,
        model,
        sample_stride: stride,
        allow_large_step,
    };
    let sim = integrate(&cfg, &params)?;

    let mut buf = Vec::new();
    io::write_trajectory(&mut buf, &sim.series)?;
    run.emit(&out, &buf)?;
    let mut summary = json!({
        "samples": sim.series.len(),
        "final_state": sim.final_state.to_array(),
    });
    if let Some(tlog) = &sim.transfer_log {
        summary["transfer_events"] = json!(tlog.events.len());
        summary["pending_packets"] = json!(tlog.pending());
        summary["total_extracted"] = json!(tlog.total_extracted());
        summary["total_deposited"] = json!(tlog.total_deposited());
        if let Some(path) = &log {
            let mut buf = Vec::new();
            io::write_transfer_log(&mut buf, tlog)?;
            run.emit(path, &buf)?;
        }
    }
    eprintln!("simulate: {} samples over t = {t_end}", sim.series.len());
    run.finish(args.manifest.manifest, &out, summary)
}

pub fn spectrum(args: SpectrumArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("spectrum", config)?;
    let s = &mut run.settings;
    let two_box = args.magnitude.is_some() || args.theta.is_some() || args.coupling.is_some();
    let tol = Tolerances::default();
    let (report, rows) = if two_box {
        if args.epsilon.is_some() || args.damping.is_some() {
            return Err(usage("--epsilon/--a cannot be combined with two-box parameters"));
        }
        let magnitude = s.require("magnitude", args.magnitude)?;
        let theta = s.require("theta", args.theta)?;
        let coupling = s.require("g", args.coupling)?;
        let h = TwoBoxParams::new(magnitude, theta, coupling)?;
        let sp = two_box_eigenvalues(&h, &tol);
        let eigs: Vec<[f64; 2]> = sp.eigenvalues.iter().map(|e| [e.re, e.im]).collect();
        let report = json!({
            "system": "two-box",
            "magnitude": magnitude,
            "theta": theta,
            "g": coupling,
            "eigenvalues": eigs,
            "phase": sp.phase.as_str(),
            "critical_coupling": two_box_critical_coupling(&h),
        });
        (report, sp.eigenvalues.to_vec())
    } else {
        let epsilon = s.require("epsilon", args.epsilon)?;
        let damping = s.get("a", args.damping, 0.0)?;
        let p = CoupledParams::new(epsilon, damping, 0.0)?;
        let sp = modal_eigenvalues(&p, &tol);
        let mut report = sp.to_json();
        report["system"] = json!("gain-loss");
        report["epsilon"] = json!(epsilon);
        report["a"] = json!(damping);
        report["beat_period"] = json!(beat_period(&p));
        report["critical_damping"] = json!(critical_damping(epsilon).ok());
        (report, sp.eigenvalues.to_vec())
    };
    let format = Format::resolve(s, args.format, "json")?;
    let out = s.get("out", args.out, "-".to_string())?;
    let bytes = match format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut text = String::from("index,re,im\n");
            for (k, e) in rows.iter().enumerate() {
                text.push_str(&format!("{k},{},{}\n", fmt_f64(e.re), fmt_f64(e.im)));
            }
            text.into_bytes()
        }
    };
    run.emit(&out, &bytes)?;
    run.finish(args.manifest.manifest, &out, report)
}

pub fn classify(args: ClassifyArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("classify", config)?;
    let s = &mut run.settings;
    let input = s.require("input", args.input)?;
    let format = Format::resolve(s, args.format, "json")?;
    let out = s.get("out", args.out, "-".to_string())?;
    let file = std::fs::File::open(&input)
        .with_context(|| format!("cannot open {}", input.display()))?;
    let series = io::read_trajectory(std::io::BufReader::new(file))?;
    let x = Envelope::of_series(&series, Channel::X);
    let y = Envelope::of_series(&series, Channel::Y);
    let label = classify_envelopes(&x, &y, series.duration())?;
    let mx = rabi_metrics(&x)?;
    let my = rabi_metrics(&y)?;
    let report = json!({
        "label": label.as_str(),
        "duration": series.duration(),
        "x": mx,
        "y": my,
    });
    let bytes = match format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            let mut text = String::from("channel,rabi_period,modulation_depth,trend_slope,label\n");
            for (name, m) in [("x", &mx), ("y", &my)] {
                text.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    opt(m.rabi_period),
                    fmt_f64(m.modulation_depth),
                    fmt_f64(m.trend_slope),
                    label.as_str()
                ));
            }
            text.into_bytes()
        }
    };
    run.emit(&out, &bytes)?;
    run.finish(args.manifest.manifest, &out, json!({ "label": label.as_str() }))
}

pub fn tof(args: TofArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("tof", config)?;
    let s = &mut run.settings;
    let epsilon = s.get("epsilon", args.epsilon, 1.0)?;
    let energy = s.get("energy", args.energy, 1.0)?;
    let cutoff = s.get("cutoff", args.cutoff, DEFAULT_CUTOFF)?;
    let accuracy = s.get("accuracy", args.accuracy, DEFAULT_ACCURACY)?;
    let doublings = s.get("doublings", args.doublings, 0)?;
    let format = Format::resolve(s, args.format, "json")?;
    let out = s.get("out", args.out, "-".to_string())?;

    let req = TofRequest::new(energy, epsilon, cutoff, accuracy)?;
    let result = time_of_flight(&req)?;
    let mut report = result.to_json();
    let study = if doublings > 0 {
        let study = CutoffStudy::run(&req, doublings)?;
        report["doublings"] = json!(study.results.iter().map(|r| r.to_json()).collect::<Vec<_>>());
        report["increment_exponents"] = json!(study.increment_exponents());
        report["monotone_growth"] = json!(study.is_monotone_growth());
        study.results
    } else {
        vec![result]
    };
    let bytes = match format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut text = String::from("L,T_re,T_im,tail_bound,converged\n");
            for r in &study {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(r.request.cutoff),
                    fmt_f64(r.value.re),
                    fmt_f64(r.value.im),
                    if r.tail_bound.is_finite() { fmt_f64(r.tail_bound) } else { "inf".into() },
                    r.converged
                ));
            }
            text.into_bytes()
        }
    };
    run.emit(&out, &bytes)?;
    run.finish(args.manifest.manifest, &out, report)
}

fn parse_mode(raw: &str) -> Result<GridMode> {
    Ok(raw.parse::<GridMode>()?)
}

pub fn sweep(args: SweepArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("sweep", config)?;
    let s = &mut run.settings;
    if let Some(grid) = &args.grid {
        s.load(grid)?;
    }
    let mode = parse_mode(&s.get("mode", args.mode, "spectral-eps-a".to_string())?)?;
    let eps: RangeArg = s.require("eps", args.eps_range)?;
    let param: RangeArg = s.require("param", args.param_range)?;
    let base = SimConfig::default();
    let dt = s.get("dt", args.dt, base.dt)?;
    let t_end = s.get("t-end", args.t_end, base.t_end)?;
    let workers = s.get("workers", args.workers, 0)?;
    let format = Format::resolve(s, args.format, "csv")?;
    let out = s.require("out", args.out)?;
    let boundary_out = s.get_opt("boundary-out", args.boundary_out)?;

    let mut grid = GridSpec::new(eps.0, param.0, mode);
    grid.sim.dt = dt;
    grid.sim.t_end = t_end;
    s.note("grid", serde_json::to_value(grid)?);
    let clock = Instant::now();
    let map = run_sweep(&grid, workers)?;
    let elapsed = clock.elapsed().as_secs_f64();

    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            io::write_phase_map(&mut buf, &map)?;
            buf
        }
        Format::Json => json_bytes(&serde_json::to_value(&map)?)?,
    };
    run.emit(&out, &bytes)?;
    if let Some(path) = &boundary_out {
        let mut buf = Vec::new();
        io::write_boundary(&mut buf, &map.boundary)?;
        run.emit(path, &buf)?;
    }
    if !map.errors.is_empty() {
        eprintln!("sweep: {} cells failed and are labelled exceptional", map.errors.len());
    }
    let summary = json!({
        "cells": map.labels.len(),
        "unbroken": map.count(PhaseLabel::Unbroken),
        "broken": map.count(PhaseLabel::Broken),
        "exceptional": map.count(PhaseLabel::Exceptional),
        "boundary_points": map.boundary.len(),
        "errors": map.errors,
        "wall_clock_seconds": elapsed,
    });
    run.finish(args.manifest.manifest, &out, summary)
}

fn load_map(path: &Path, mode: GridMode) -> Result<PhaseMap> {
    let file =
        std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let reader = std::io::BufReader::new(file);
    if path.extension().is_some_and(|e| e == "json") {
        let map: PhaseMap = serde_json::from_reader(reader)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if map.labels.len() != map.grid.len() {
            return Err(usage(format!("{}: label count does not match grid", path.display())));
        }
        Ok(map)
    } else {
        Ok(io::read_phase_map(reader, mode)?)
    }
}

pub fn boundary(args: BoundaryArgs, config: Option<&Path>) -> Result<()> {
    let mut run = Run::new("boundary", config)?;
    let s = &mut run.settings;
    let map_path = s.require("map", args.map)?;
    let mode = parse_mode(&s.get("mode", args.mode, "spectral-eps-a".to_string())?)?;
    let iterations = s.get("iterations", args.iterations, 20)?;
    let column = s.get_opt("epsilon", args.epsilon)?;
    let format = Format::resolve(s, args.format, "csv")?;
    let out = s.require("out", args.out)?;

    let map = load_map(&map_path, mode)?;
    let columns: Vec<usize> = match column {
        Some(eps) => {
            let k = (0..map.grid.epsilon.n)
                .find(|&k| (map.grid.epsilon.value(k) - eps).abs() <= 1e-12 * eps.abs().max(1.0))
                .ok_or_else(|| usage(format!("no ε column at {eps} in {}", map_path.display())))?;
            vec![k]
        }
        None => (0..map.grid.epsilon.n).collect(),
    };
    let mut points: Vec<BoundaryPoint> = Vec::new();
    let mut uniform = Vec::new();
    for &k in &columns {
        match refine_column(&map, k, iterations) {
            Ok(p) => points.extend(p),
            Err(ptsym_core::Error::NoTransition { epsilon }) if columns.len() > 1 => {
                uniform.push(epsilon)
            }
            Err(e) => return Err(e.into()),
        }
    }
    if points.is_empty() {
        return Err(ptsym_core::Error::NoTransition { epsilon: map.grid.epsilon.lo }.into());
    }
    if !uniform.is_empty() {
        eprintln!("boundary: skipped {} columns without a transition", uniform.len());
    }
    let bytes = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            io::write_boundary(&mut buf, &points)?;
            buf
        }
        Format::Json => json_bytes(&serde_json::to_value(&points)?)?,
    };
    run.emit(&out, &bytes)?;
    let summary = json!({ "points": points.len(), "skipped_columns": uniform });
    run.finish(args.manifest.manifest, &out, summary)
}
