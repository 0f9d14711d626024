//! Subcommand implementations. Each returns the process exit code:
//! 0 positive, 1 negative, 2 invalid input (reported as `Err`).

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use ecp_core::families::{builtin_families, Bindings, Family};
use ecp_core::scan::{self, Axis, Bracket, Evaluation, Mode, RegionMap};
use ecp_core::{BezierCurve, GlobalBernsteinBasis, Side, Stage, TestConfig, TestOutcome};

use crate::specfile::{SpaceSpec, SpecError};

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Environment variable overriding the default positivity tolerance.
pub const TOL_ENV: &str = "ECP_TOL";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),

    #[error(transparent)]
    Core(#[from] ecp_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Options shared by every command that runs the test.
#[derive(Debug, Clone, Default)]
pub struct TestOptions {
    pub tol: Option<f64>,
    pub kappa_max: Option<f64>,
    pub trace: bool,
}

impl TestOptions {
    /// Flag, then `ECP_TOL`, then the library default.
    pub fn config(&self) -> Result<TestConfig, CliError> {
        let mut config = TestConfig::default();
        match (self.tol, std::env::var(TOL_ENV)) {
            (Some(t), _) => config.tol = t,
            (None, Ok(v)) => {
                config.tol = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{TOL_ENV}=`{v}` is not a number")))?
            }
            (None, Err(_)) => {}
        }
        if let Some(k) = self.kappa_max {
            config.kappa_max = k;
        }
        config.record_trace = self.trace;
        config.validate()?;
        Ok(config)
    }
}

/// `name=value`.
pub fn parse_binding(s: &str) -> Result<(String, f64), CliError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected name=value, got `{s}`")))?;
    let v = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("`{value}` is not a number in `{s}`")))?;
    Ok((name.trim().to_string(), v))
}

/// `name=min:max:step`.
pub fn parse_axis(s: &str) -> Result<Axis, CliError> {
    let (name, range) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected name=min:max:step, got `{s}`")))?;
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad axis range `{range}`")))?;
    match parts[..] {
        [min, max, step] => Ok(Axis::new(name.trim(), min, max, step)?),
        _ => Err(CliError::Usage(format!("expected min:max:step, got `{range}`"))),
    }
}

fn bindings(items: &[String]) -> Result<Bindings, CliError> {
    let mut out = Bindings::new();
    for item in items {
        let (k, v) = parse_binding(item)?;
        if out.insert(k.clone(), v).is_some() {
            return Err(CliError::Usage(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

/// Plain decimal with at most ten fractional digits, no trailing zeros.
pub fn format_value(v: f64) -> String {
    let s = format!("{v:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn stage_fields(stage: &Stage) -> serde_json::Value {
    match stage {
        Stage::Completed => json!({}),
        Stage::T0System { i, condition, pivot_ratio } => {
            json!({ "i": i, "condition": condition, "pivot_ratio": pivot_ratio })
        }
        Stage::T0Positivity { i, k, r, value } => json!({ "i": i, "k": k, "r": r, "value": value }),
        Stage::T1Positivity { p, i, k, r, value } => {
            json!({ "p": p, "i": i, "k": k, "r": r, "value": value })
        }
    }
}

fn outcome_report(command: &str, mode: Mode, outcome: &TestOutcome, trace: bool) -> serde_json::Value {
    let mut report = json!({
        "command": command,
        "mode": mode.name(),
        "verdict": if outcome.is_ecp() { "positive" } else { "negative" },
        "stage": outcome.stage.code(),
        "detail": outcome.stage.to_string(),
        "tol": outcome.diagnostics.tol,
        "conditions": outcome.diagnostics.conditions,
    });
    let obj = report.as_object_mut().expect("object");
    if let serde_json::Value::Object(extra) = stage_fields(&outcome.stage) {
        obj.extend(extra);
    }
    if trace {
        obj.insert("level_min".into(), json!(outcome.diagnostics.level_min));
    }
    report
}

fn emit(out: &mut impl Write, value: &serde_json::Value) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
}

/// Runs the test in the given mode; a section that is not an EC-space is a
/// negative verdict.
fn run(space: &ecp_core::PWSpace, mode: Mode, config: &TestConfig) -> Result<Result<TestOutcome, String>, CliError> {
    match mode.run(space, config) {
        Ok(o) => Ok(Ok(o)),
        Err(e @ ecp_core::Error::NotECSection { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_test(spec: &Path, mode: Mode, opts: &TestOptions, out: &mut impl Write) -> Result<i32, CliError> {
    let config = opts.config()?;
    let space = SpaceSpec::load(spec)?.build()?;
    match run(&space, mode, &config)? {
        Ok(outcome) => {
            emit(out, &outcome_report("test", mode, &outcome, opts.trace))?;
            Ok(if outcome.is_ecp() { EXIT_POSITIVE } else { EXIT_NEGATIVE })
        }
        Err(reason) => {
            emit(
                out,
                &json!({ "command": "test", "mode": mode.name(), "verdict": "negative", "stage": "not_pec", "detail": reason }),
            )?;
            Ok(EXIT_NEGATIVE)
        }
    }
}

fn cell_record(values: &[f64], eval: &Evaluation) -> Vec<String> {
    let mut rec: Vec<String> = values.iter().map(|v| format_value(*v)).collect();
    rec.push(eval.outcome.code().to_string());
    rec.push(eval.stage.clone());
    rec.push(eval.outcome.level().map(|p| p.to_string()).unwrap_or_default());
    rec.push(eval.min_coeff.map(|m| format!("{m:e}")).unwrap_or_default());
    rec
}

/// Writes a region map as CSV.
pub fn write_scan_csv(map: &RegionMap, w: impl Write) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = map.axes.iter().map(|a| a.name.as_str()).collect();
    header.extend(["outcome", "stage", "p", "min_coeff"]);
    csv.write_record(&header)?;
    for cell in &map.cells {
        csv.write_record(cell_record(&cell.values, &cell.eval))?;
    }
    csv.flush().map_err(|e| CliError::Io { path: "<csv>".into(), source: e })?;
    Ok(())
}

pub struct ScanArgs {
    pub family: String,
    pub params: Vec<String>,
    pub fixed: Vec<String>,
    pub mode: Mode,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub test: TestOptions,
}

pub fn cmd_scan(args: &ScanArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let config = args.test.config()?;
    let family = Family::by_name(&args.family)?;
    if args.params.is_empty() {
        return Err(CliError::Usage("at least one --param axis is required".into()));
    }
    let axes = args.params.iter().map(|p| parse_axis(p)).collect::<Result<Vec<_>, _>>()?;
    let fixed = bindings(&args.fixed)?;
    if args.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let map = scan::scan(&family, &fixed, &axes, args.mode, &config, args.jobs)?;
    match &args.out {
        Some(path) => {
            write_scan_csv(&map, File::create(path).map_err(io_err(path))?)?;
            let counts: serde_json::Map<String, serde_json::Value> =
                ["good", "t0_system", "t0_positivity", "t1_positivity", "not_pec", "invalid"]
                    .iter()
                    .map(|c| (c.to_string(), json!(map.count(c))))
                    .collect();
            emit(
                out,
                &json!({
                    "command": "scan",
                    "family": family.name,
                    "mode": args.mode.name(),
                    "cells": map.cells.len(),
                    "counts": counts,
                    "out": path.display().to_string(),
                }),
            )?;
        }
        None => write_scan_csv(&map, out)?,
    }
    Ok(EXIT_POSITIVE)
}

/// Reads one point per line; coordinates separated by commas or blanks;
/// `#` starts a comment.
pub fn read_control_points(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut points = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let coords = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("{}:{}: bad coordinate", path.display(), lineno + 1)))?;
        points.push(coords);
    }
    Ok(points)
}

pub struct CurveArgs {
    pub spec: PathBuf,
    pub control_points: PathBuf,
    pub samples: usize,
    pub out: Option<PathBuf>,
    pub side: Side,
    pub test: TestOptions,
}

pub fn cmd_curve(args: &CurveArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let config = args.test.config()?;
    let space = SpaceSpec::load(&args.spec)?.build()?;
    let points = read_control_points(&args.control_points)?;
    if points.len() != space.n() + 1 {
        return Err(CliError::Usage(format!(
            "the space has dimension {} but {} control points were given",
            space.n() + 1,
            points.len()
        )));
    }
    if args.samples < 2 {
        return Err(CliError::Usage("--samples must be at least 2".into()));
    }
    let basis = match GlobalBernsteinBasis::new(&space, &config) {
        Ok(b) => b,
        Err(ecp_core::Error::NotCertified(outcome)) => {
            emit(out, &outcome_report("curve", Mode::Design, &outcome, false))?;
            return Ok(EXIT_NEGATIVE);
        }
        Err(e @ ecp_core::Error::NotECSection { .. }) => {
            emit(out, &json!({ "command": "curve", "verdict": "negative", "stage": "not_pec", "detail": e.to_string() }))?;
            return Ok(EXIT_NEGATIVE);
        }
        Err(e) => return Err(e.into()),
    };
    let curve = BezierCurve::new(basis, points)?;
    let samples = curve.sample_with_side(args.samples, args.side)?;
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string(), "side".to_string()];
        header.extend((0..curve.dim()).map(|c| format!("coord_{c}")));
        csv.write_record(&header)?;
        for s in &samples {
            let mut rec = vec![format!("{}", s.x), s.side.symbol().to_string()];
            rec.extend(s.point.iter().map(|v| format!("{v}")));
            csv.write_record(&rec)?;
        }
        csv.flush().map_err(|e| CliError::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    };
    match &args.out {
        Some(path) => write(&mut File::create(path).map_err(io_err(path))?)?,
        None => write(out)?,
    }
    Ok(EXIT_POSITIVE)
}

pub struct BisectArgs {
    pub family: String,
    pub fixed: Vec<String>,
    pub free: String,
    pub lo: f64,
    pub hi: f64,
    pub mode: Mode,
    pub width: f64,
    pub max_iters: usize,
    pub test: TestOptions,
}

#[derive(Serialize)]
struct BracketReport<'a> {
    command: &'static str,
    family: &'a str,
    free: &'a str,
    mode: &'static str,
    lo: f64,
    hi: f64,
    width: f64,
    iterations: usize,
    lo_outcome: String,
    hi_outcome: String,
}

pub fn cmd_bisect(args: &BisectArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let config = args.test.config()?;
    let family = Family::by_name(&args.family)?;
    let fixed = bindings(&args.fixed)?;
    let result = scan::bisect_boundary(
        &family,
        &fixed,
        &args.free,
        args.lo,
        args.hi,
        args.mode,
        &config,
        args.width,
        args.max_iters,
    );
    match result {
        Ok(Bracket { lo, hi, lo_eval, hi_eval, iterations }) => {
            let report = BracketReport {
                command: "bisect",
                family: family.name,
                free: &args.free,
                mode: args.mode.name(),
                lo,
                hi,
                width: hi - lo,
                iterations,
                lo_outcome: lo_eval.outcome.to_string(),
                hi_outcome: hi_eval.outcome.to_string(),
            };
            emit(out, &serde_json::to_value(report)?)?;
            Ok(EXIT_POSITIVE)
        }
        Err(ecp_core::Error::NoBracket(what)) => {
            emit(
                out,
                &json!({ "command": "bisect", "error": "no_bracket", "detail": format!("both ends are {what}") }),
            )?;
            Ok(EXIT_NEGATIVE)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_families(out: &mut impl Write) -> Result<i32, CliError> {
    for f in builtin_families() {
        let params: Vec<_> = f
            .params
            .iter()
            .map(|p| json!({ "name": p.name, "default": p.default, "integer": p.integer }))
            .collect();
        emit(out, &json!({ "family": f.name, "description": f.description, "params": params }))?;
    }
    Ok(EXIT_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(-3.9000000000000004), "-3.9");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(5.0), "5");
        assert_eq!(format_value(1e-11), "0");
    }

    #[test]
    fn axis_and_binding_syntax() {
        let a = parse_axis("beta=-4:2:0.1").unwrap();
        assert_eq!((a.name.as_str(), a.len()), ("beta", 61));
        assert!(parse_axis("beta=-4:2").is_err());
        assert!(parse_axis("beta=2:-4:0.1").is_err());
        assert_eq!(parse_binding("q = 19").unwrap(), ("q".to_string(), 19.0));
        assert!(parse_binding("q").is_err());
    }
}
