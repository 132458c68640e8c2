//! Line-delimited key/value records.
//!
//! Each record is a block of `key = value` lines starting with
//! `record = <kind>`; blocks are separated by a blank line. Numbers use nine
//! significant digits (`1.23456789e0`).

use crate::echo::EchoObservables;
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::scan::Channel;

pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        let mut r = Record::default();
        r.push("record", kind);
        r
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.push(key, fmt_num(v))
    }

    pub fn kind(&self) -> Option<&str> {
        self.get("record")
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_num(&self, key: &str) -> Result<f64> {
        let v = self.get(key).ok_or_else(|| Error::Record(format!("missing key {key:?}")))?;
        v.parse().map_err(|_| Error::Record(format!("{key}: cannot parse {v:?} as a number")))
    }
}

pub fn records_to_string(records: &[Record]) -> Result<String> {
    let mut blocks = Vec::new();
    for r in records {
        let mut b = String::new();
        for (k, v) in &r.fields {
            if k.is_empty() || k.contains('=') || k.contains(char::is_whitespace) {
                return Err(Error::Record(format!("bad record key {k:?}")));
            }
            if v.contains('\n') || v.contains('\r') || v.trim() != v {
                return Err(Error::Record(format!("value for {k:?} must be a single trimmed line")));
            }
            b.push_str(&format!("{k} = {v}\n"));
        }
        blocks.push(b);
    }
    Ok(blocks.join("\n"))
}

pub fn parse_records(text: &str) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let mut cur = Record::default();
    for (n, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() {
            if !cur.fields.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            continue;
        }
        if l.starts_with('#') {
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Record(format!("line {}: expected `key = value`", n + 1)))?;
        cur.fields.push((k.trim().to_string(), v.trim().to_string()));
    }
    if !cur.fields.is_empty() {
        out.push(cur);
    }
    for r in &out {
        if r.kind().is_none() {
            return Err(Error::Record("record block without a `record = ...` line".into()));
        }
    }
    Ok(out)
}

/// Fit result with the channel and any provenance pairs appended first.
pub fn fit_record(fit: &FitResult, channel: Channel, provenance: &[(String, String)]) -> Record {
    let mut r = Record::new("fit");
    r.push("channel", channel.as_str());
    for (k, v) in provenance {
        r.push(k, v.clone());
    }
    let p = &fit.params;
    let u = &fit.uncertainties;
    r.num("amplitude", p.amplitude).num("amplitude_sigma", u.amplitude);
    r.num("delta_s", p.delta_s).num("delta_s_sigma", u.delta_s);
    r.num("phi", p.phi).num("phi_sigma", u.phi);
    r.num("visibility", p.visibility).num("visibility_sigma", u.visibility);
    r.num("decay", p.decay);
    match u.decay {
        Some(s) => r.num("decay_sigma", s),
        None => r.push("decay_sigma", "none"),
    };
    r.num("modulation_frequency", fit.modulation_frequency());
    r.num("modulation_frequency_sigma", fit.modulation_frequency_sigma());
    r.num("scale", fit.scale);
    r.num("residual_norm", fit.residual_norm);
    r.push("converged", fit.converged.to_string());
    r.push("decay_fitted", fit.decay_fitted.to_string());
    r.push("iterations", fit.iterations.to_string());
    r.push("points", fit.points.to_string());
    r
}

/// Record for a channel that could not be fitted.
pub fn skipped_record(channel: Channel, err: &Error, provenance: &[(String, String)]) -> Record {
    let mut r = Record::new("fit_skipped");
    r.push("channel", channel.as_str());
    for (k, v) in provenance {
        r.push(k, v.clone());
    }
    r.push("kind", err.kind());
    r.push("message", err.to_string().replace(['\n', '\r'], " ").trim().to_string());
    r
}

pub fn echo_record(obs: &EchoObservables, provenance: &[(String, String)]) -> Record {
    let mut r = Record::new("echo");
    for (k, v) in provenance {
        r.push(k, v.clone());
    }
    for (name, s) in [("parallel", &obs.parallel_summary), ("perp", &obs.perp_summary), ("total", &obs.total_summary)] {
        r.num(&format!("{name}_peak"), s.peak);
        r.num(&format!("{name}_peak_time"), s.peak_time);
        r.num(&format!("{name}_area"), s.area);
    }
    r.num("window_start", obs.t_grid[0]);
    r.num("window_end", obs.t_grid[obs.t_grid.len() - 1]);
    r.push("window_samples", obs.t_grid.len().to_string());
    r
}

pub const TABLE_HEADER: &str = "direction,branch,delta_s,delta_s_sigma";

/// Stark coefficient summary over fit records: one row per record in input
/// order, values copied verbatim. `direction` and `branch` default to `-`.
pub fn table(records: &[Record]) -> Result<String> {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    let mut n = 0;
    for r in records.iter().filter(|r| r.kind() == Some("fit")) {
        let field = |k: &str| r.get(k).ok_or_else(|| Error::Record(format!("fit record without {k:?}")));
        let delta = field("delta_s")?;
        let sigma = field("delta_s_sigma")?;
        let label = |k: &str| {
            let v = r.get(k).unwrap_or("-");
            if v.contains(',') {
                Err(Error::Record(format!("{k} label {v:?} contains a comma")))
            } else {
                Ok(v)
            }
        };
        out.push_str(&format!("{},{},{delta},{sigma}\n", label("direction")?, label("branch")?));
        n += 1;
    }
    if n == 0 {
        return Err(Error::Record("no fit records to tabulate".into()));
    }
    Ok(out)
}
