//! Trace CSV files.
//!
//! Layout of a written trace:
//!
//! ```text
//! # axis = on_time
//! # shift_coeff = 50
//! # voltage = 10
//! # thickness = 1
//! # on_time = 1.5            (voltage and field axes only)
//! # <extra key> = <value>    (any number, in order)
//! x,I_parallel,I_perp,I_total
//! 0,1.2e-3,0,1.2e-3
//! ```
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so writing and reading a trace is lossless.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scan::{ModulationTrace, StarkConfig, TraceAxis, TraceMeta};

pub const TRACE_HEADER: [&str; 4] = ["x", "I_parallel", "I_perp", "I_total"];

/// Shortest round-trip representation, in exponent form outside `[1e-4, 1e9)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e9).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn check_meta_key(key: &str) -> Result<()> {
    let ok = !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::Csv(format!("metadata key {key:?} must be alphanumeric with _ . -")))
    }
}

pub fn trace_to_string(trace: &ModulationTrace) -> Result<String> {
    trace.validate()?;
    let m = &trace.meta;
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("# {k} = {v}\n"));
    line("axis", trace.axis.as_str().to_string());
    line("shift_coeff", format_f64(m.stark.shift_coeff));
    line("voltage", format_f64(m.stark.voltage));
    line("thickness", format_f64(m.stark.thickness));
    if let Some(t) = m.on_time {
        line("on_time", format_f64(t));
    }
    for (k, v) in &m.extra {
        check_meta_key(k)?;
        if matches!(k.as_str(), "axis" | "shift_coeff" | "voltage" | "thickness" | "on_time") {
            return Err(Error::Csv(format!("metadata key {k:?} is reserved")));
        }
        if v.contains('\n') || v.contains('\r') || v.trim() != v {
            return Err(Error::Csv(format!("metadata value for {k:?} must be a single trimmed line")));
        }
        line(k, v.clone());
    }
    out.push_str(&TRACE_HEADER.join(","));
    out.push('\n');
    for i in 0..trace.len() {
        let row = [trace.x[i], trace.parallel[i], trace.perp[i], trace.total[i]];
        out.push_str(&row.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &ModulationTrace) -> Result<()> {
    std::fs::write(path, trace_to_string(trace)?)?;
    Ok(())
}

/// `# key = value` comment lines and the remaining CSV body.
fn split_comments(text: &str) -> Result<(Vec<(String, String)>, String)> {
    let mut meta = Vec::new();
    let mut body = String::new();
    for (n, raw) in text.lines().enumerate() {
        let l = raw.trim_end_matches('\r');
        if let Some(c) = l.trim_start().strip_prefix('#') {
            let c = c.trim();
            if c.is_empty() {
                continue;
            }
            match c.split_once('=') {
                Some((k, v)) => meta.push((k.trim().to_string(), v.trim().to_string())),
                None => return Err(Error::Csv(format!("line {}: comment is not `key = value`", n + 1))),
            }
        } else if !l.trim().is_empty() {
            body.push_str(l);
            body.push('\n');
        }
    }
    Ok((meta, body))
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Csv(format!("{what}: cannot parse {s:?} as a number")))
}

fn read_table(body: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, v)| parse_num(v, &format!("row {} column {}", i + 1, j + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((headers, rows))
}

/// Parses a trace written by [`trace_to_string`].
pub fn trace_from_str(text: &str) -> Result<ModulationTrace> {
    let (meta, body) = split_comments(text)?;
    let get = |k: &str| meta.iter().find(|(mk, _)| mk == k).map(|(_, v)| v.as_str());
    let need = |k: &str| get(k).ok_or_else(|| Error::Csv(format!("missing metadata line `# {k} = ...`")));
    let axis = TraceAxis::parse(need("axis")?)?;
    let stark = StarkConfig {
        shift_coeff: parse_num(need("shift_coeff")?, "shift_coeff")?,
        voltage: parse_num(need("voltage")?, "voltage")?,
        thickness: parse_num(need("thickness")?, "thickness")?,
    };
    let on_time = get("on_time").map(|v| parse_num(v, "on_time")).transpose()?;
    let extra = meta
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "axis" | "shift_coeff" | "voltage" | "thickness" | "on_time"))
        .cloned()
        .collect();

    let (headers, rows) = read_table(&body)?;
    if headers != TRACE_HEADER {
        return Err(Error::Csv(format!("expected header {}, got {}", TRACE_HEADER.join(","), headers.join(","))));
    }
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let trace = ModulationTrace {
        axis,
        x: col(0),
        parallel: col(1),
        perp: col(2),
        total: col(3),
        meta: TraceMeta { stark, on_time, extra },
    };
    trace.validate()?;
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<ModulationTrace> {
    trace_from_str(&std::fs::read_to_string(path)?)
}

/// Which raw columns to use and how to interpret them.
///
/// Columns are selected by header name. When `x` is `None` the first column
/// is the axis; unset channels are looked up as `I_parallel`, `I_perp` and
/// `I_total`, then by position (second, third, fourth column).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnMap {
    pub x: Option<String>,
    pub parallel: Option<String>,
    pub perp: Option<String>,
    pub total: Option<String>,
    /// us, ns, V or V/cm. Must agree with a unit given in the x header.
    pub x_unit: Option<String>,
    /// cm. Converts a voltage axis to field.
    pub thickness: Option<f64>,
    /// Applied voltage for on-time traces, V.
    pub voltage: Option<f64>,
    /// Fixed on-time for voltage and field traces, us.
    pub on_time: Option<f64>,
}

/// A normalized experimental trace. Echo areas are taken as already
/// background-subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub trace: ModulationTrace,
    pub shots: Option<u32>,
    /// ms
    pub wait_time: Option<f64>,
    pub warnings: Vec<String>,
}

/// Splits `name [unit]` or `name (unit)`.
fn header_unit(h: &str) -> (String, Option<String>) {
    let h = h.trim();
    for (open, close) in [('[', ']'), ('(', ')')] {
        if h.ends_with(close) {
            if let Some(i) = h.rfind(open) {
                let unit = h[i + 1..h.len() - 1].trim().to_string();
                return (h[..i].trim().to_string(), Some(unit));
            }
        }
    }
    (h.to_string(), None)
}

fn canonical_unit(u: &str) -> Result<(&'static str, f64)> {
    match u.trim() {
        "us" | "µs" | "μs" => Ok(("us", 1.0)),
        "ns" => Ok(("us", 1e-3)),
        "V" | "v" => Ok(("V", 1.0)),
        "V/cm" | "v/cm" => Ok(("V/cm", 1.0)),
        other => Err(Error::Csv(format!("unsupported x unit {other:?}; use us, ns, V or V/cm"))),
    }
}

fn find_column(headers: &[(String, Option<String>)], raw: &[String], name: &str) -> Option<usize> {
    raw.iter().position(|h| h.trim() == name).or_else(|| headers.iter().position(|(n, _)| n == name))
}

/// Reads a raw CSV of echo areas into a normalized trace.
///
/// A file carrying an `axis` metadata line is a trace written by this crate
/// and is read as-is. Otherwise rows are sorted by x (with a warning), the
/// x unit is resolved from the header or `map.x_unit`, and a voltage axis is
/// converted to field when `map.thickness` is given. `# shots = n` and
/// `# wait_time_ms = t` comment lines are recorded.
pub fn ingest_csv(path: &Path, map: &ColumnMap) -> Result<ExperimentTrace> {
    let text = std::fs::read_to_string(path)?;
    ingest_str(&text, map)
}

pub fn ingest_str(text: &str, map: &ColumnMap) -> Result<ExperimentTrace> {
    let (meta, body) = split_comments(text)?;
    let meta_get = |k: &str| meta.iter().find(|(mk, _)| mk == k).map(|(_, v)| v.clone());
    let shots = meta_get("shots")
        .map(|v| v.parse::<u32>().map_err(|_| Error::Csv(format!("shots: cannot parse {v:?}"))))
        .transpose()?;
    let wait_time = meta_get("wait_time_ms").map(|v| parse_num(&v, "wait_time_ms")).transpose()?;
    if meta_get("axis").is_some() {
        let trace = trace_from_str(text)?;
        return Ok(ExperimentTrace { trace, shots, wait_time, warnings: Vec::new() });
    }

    let (raw_headers, mut rows) = read_table(&body)?;
    let headers: Vec<(String, Option<String>)> = raw_headers.iter().map(|h| header_unit(h)).collect();
    let ncol = headers.len();
    let missing = |n: &str| Error::Csv(format!("column {n:?} not found; header is {}", raw_headers.join(",")));
    let xi = match &map.x {
        Some(n) => find_column(&headers, &raw_headers, n).ok_or_else(|| missing(n))?,
        None => 0,
    };
    let pick = |sel: &Option<String>, default_name: &str, pos: usize| -> Result<Option<usize>> {
        match sel {
            Some(n) => Ok(Some(find_column(&headers, &raw_headers, n).ok_or_else(|| missing(n))?)),
            None => Ok(find_column(&headers, &raw_headers, default_name).or((pos < ncol && pos != xi).then_some(pos))),
        }
    };
    let pi = pick(&map.parallel, "I_parallel", 1)?;
    let qi = pick(&map.perp, "I_perp", 2)?;
    let ti = pick(&map.total, "I_total", 3)?;
    if pi.is_none() && qi.is_none() && ti.is_none() {
        return Err(Error::Csv("no intensity columns found".into()));
    }

    let unit = match (&headers[xi].1, &map.x_unit) {
        (Some(h), Some(f)) => {
            let (a, b) = (canonical_unit(h)?, canonical_unit(f)?);
            if a != b {
                return Err(Error::Csv(format!("unit ambiguity: header says {h:?}, flag says {f:?}")));
            }
            a
        }
        (Some(h), None) => canonical_unit(h)?,
        (None, Some(f)) => canonical_unit(f)?,
        (None, None) => {
            return Err(Error::Csv(format!(
                "unit ambiguity: x column {:?} has no [unit] and no unit flag was given",
                raw_headers[xi]
            )))
        }
    };

    let mut warnings = Vec::new();
    if rows.windows(2).any(|w| w[1][xi] < w[0][xi]) {
        rows.sort_by(|a, b| a[xi].total_cmp(&b[xi]));
        warnings.push("rows were not in increasing x order and have been sorted".to_string());
    }
    if let Some(i) = rows.windows(2).position(|w| !(w[1][xi] > w[0][xi])) {
        return Err(Error::Csv(format!("x is not strictly monotone: repeated value {}", rows[i][xi])));
    }

    let col = |j: Option<usize>| j.map(|j| rows.iter().map(|r| r[j]).collect::<Vec<f64>>());
    let n = rows.len();
    let (par, perp, tot) = (col(pi), col(qi), col(ti));
    let total = match (&tot, &par, &perp) {
        (Some(t), _, _) => t.clone(),
        (None, Some(a), Some(b)) => a.iter().zip(b).map(|(a, b)| a + b).collect(),
        (None, Some(a), None) | (None, None, Some(a)) => a.clone(),
        (None, None, None) => unreachable!(),
    };
    let parallel = par.unwrap_or_else(|| vec![0.0; n]);
    let perp = perp.unwrap_or_else(|| vec![0.0; n]);

    let (canon, factor) = unit;
    let mut x: Vec<f64> = rows.iter().map(|r| r[xi] * factor).collect();
    let thickness = map.thickness;
    let (axis, stark, on_time) = match canon {
        "us" => {
            let v = map.voltage.ok_or_else(|| Error::Csv("on-time traces need the applied voltage".into()))?;
            let d = thickness.ok_or_else(|| Error::Csv("on-time traces need the plate thickness".into()))?;
            (TraceAxis::OnTime, StarkConfig { shift_coeff: 0.0, voltage: v, thickness: d }, None)
        }
        "V" => {
            let t = map.on_time.ok_or_else(|| Error::Csv("voltage traces need the fixed on-time".into()))?;
            match thickness {
                Some(d) => {
                    if !(d > 0.0) {
                        return Err(Error::Csv("thickness must be positive".into()));
                    }
                    for v in &mut x {
                        *v /= d;
                    }
                    (TraceAxis::Field, StarkConfig { shift_coeff: 0.0, voltage: 0.0, thickness: d }, Some(t))
                }
                None => {
                    warnings.push("no thickness given; voltage axis kept, fit will assume 1 cm".to_string());
                    (TraceAxis::Voltage, StarkConfig { shift_coeff: 0.0, voltage: 0.0, thickness: 1.0 }, Some(t))
                }
            }
        }
        _ => {
            let t = map.on_time.ok_or_else(|| Error::Csv("field traces need the fixed on-time".into()))?;
            let d = thickness.unwrap_or(1.0);
            (TraceAxis::Field, StarkConfig { shift_coeff: 0.0, voltage: 0.0, thickness: d }, Some(t))
        }
    };

    let mut extra = Vec::new();
    if let Some(s) = shots {
        extra.push(("shots".to_string(), s.to_string()));
    }
    if let Some(w) = wait_time {
        extra.push(("wait_time_ms".to_string(), format_f64(w)));
    }
    for (k, v) in &meta {
        if k != "shots" && k != "wait_time_ms" && check_meta_key(k).is_ok() {
            extra.push((k.clone(), v.clone()));
        }
    }
    let trace = ModulationTrace { axis, x, parallel, perp, total, meta: TraceMeta { stark, on_time, extra } };
    trace.validate().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(ExperimentTrace { trace, shots, wait_time, warnings })
}

/// Echo intensities over the observation window as `t,I_parallel,I_perp,I_total`.
pub fn echo_to_string(obs: &crate::echo::EchoObservables) -> String {
    let mut out = String::from("t,I_parallel,I_perp,I_total\n");
    for i in 0..obs.t_grid.len() {
        let row = [obs.t_grid[i], obs.parallel[i], obs.perp[i], obs.total[i]];
        out.push_str(&row.iter().map(|&v| format_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
