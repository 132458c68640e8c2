//! The operations behind the `stark-echo` subcommands.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::echo::{EchoObservables, StarkPulse};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_trace, FitOptions, FitResult};
use crate::io::config::{Provenance, RunConfig};
use crate::io::csv::{ingest_csv, ColumnMap, ExperimentTrace};
use crate::io::records::{fit_record, parse_records, skipped_record, table, echo_record, Record};
use crate::scan::{modulation_metrics, scan, Channel, ModulationTrace};

/// `config` and `config_sha256` pairs, or nothing for in-memory configs.
pub fn provenance_pairs(prov: Option<&Provenance>) -> Vec<(String, String)> {
    match prov {
        Some(p) => vec![("config".into(), p.path.clone()), ("config_sha256".into(), p.sha256.clone())],
        None => Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub trace: ModulationTrace,
    /// One fit (or skip) record per channel.
    pub records: Vec<Record>,
}

/// Adds seeded Gaussian noise to the polarized channels (sigma relative to
/// each channel's maximum), clips at zero and recomputes the total.
pub fn add_noise(trace: &mut ModulationTrace, rel_sigma: f64, seed: u64) -> Result<()> {
    if rel_sigma == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for ch in [&mut trace.parallel, &mut trace.perp] {
        let max = ch.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, rel_sigma * max).map_err(|e| invalid(e.to_string()))?;
        for v in ch.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
    }
    trace.total = trace.parallel.iter().zip(&trace.perp).map(|(a, b)| a + b).collect();
    Ok(())
}

/// Runs the configured sweep and fits every channel.
pub fn run_scan(cfg: &RunConfig, prov: Option<&Provenance>) -> Result<ScanOutput> {
    let setup = cfg.build()?;
    let mut trace = scan(&setup.engine, &setup.stark, &setup.axis, setup.samples, &setup.scan_options)?;
    add_noise(&mut trace, cfg.noise.rel_sigma, cfg.noise.seed)?;
    let pairs = provenance_pairs(prov);
    trace.meta.extra.extend(pairs.iter().cloned());
    trace.meta.extra.extend(cfg.flat_entries().into_iter().map(|(k, v)| (format!("cfg.{k}"), v)));

    let records = Channel::ALL
        .iter()
        .map(|&ch| match modulation_metrics(&trace, ch, &setup.fit_options) {
            Ok(m) => Ok(fit_record(&m.fit, ch, &pairs)),
            Err(e @ (Error::NotModulated(_) | Error::TooShort { .. } | Error::FitNonConvergence { .. })) => {
                Ok(skipped_record(ch, &e, &pairs))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanOutput { trace, records })
}

/// One echo at the configured on-time and shift.
pub fn run_simulate(cfg: &RunConfig, prov: Option<&Provenance>) -> Result<(EchoObservables, Record)> {
    let setup = cfg.build()?;
    let pulse = StarkPulse {
        t_on: setup.t_on,
        shift: setup.stark.applied_shift(),
        window_start: setup.scan_options.window_start,
        guard: setup.scan_options.guard,
    };
    let obs = setup.engine.simulate(&pulse)?;
    let mut pairs = provenance_pairs(prov);
    pairs.push(("t_on".into(), crate::io::records::fmt_num(setup.t_on)));
    let rec = echo_record(&obs, &pairs);
    Ok((obs, rec))
}

/// Fits one channel of a trace file. `direction` and `branch` metadata of
/// the trace are carried into the record for tabulation.
pub fn run_fit(path: &Path, channel: Channel, opts: &FitOptions) -> Result<(FitResult, Record)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Csv("trace is not UTF-8".into()))?;
    let trace = crate::io::csv::trace_from_str(&text)?;
    let fit = fit_trace(&trace, channel, None, opts)?;
    let mut pairs = vec![
        ("input".to_string(), path.display().to_string()),
        ("input_sha256".to_string(), crate::io::config::sha256_hex(&bytes)),
        ("decay_mode".to_string(), opts.decay.as_str().to_string()),
    ];
    for key in ["direction", "branch", "config_sha256"] {
        if let Some(v) = trace.meta.get(key) {
            pairs.push((key.to_string(), v.to_string()));
        }
    }
    let rec = fit_record(&fit, channel, &pairs);
    Ok((fit, rec))
}

pub fn run_ingest(path: &Path, map: &ColumnMap) -> Result<ExperimentTrace> {
    ingest_csv(path, map)
}

/// Table over every `fit` record in the given record files, in order.
pub fn run_table<P: AsRef<Path>>(paths: &[P]) -> Result<String> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(parse_records(&std::fs::read_to_string(p)?)?);
    }
    table(&all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan::{StarkConfig, TraceAxis, TraceMeta};

    #[test]
    fn noise_is_seeded_and_keeps_total_consistent() {
        let base = ModulationTrace {
            axis: TraceAxis::OnTime,
            x: (0..50).map(|i| i as f64 * 0.1).collect(),
            parallel: (0..50).map(|i| (i as f64 * 0.3).cos().powi(2)).collect(),
            perp: vec![0.0; 50],
            total: (0..50).map(|i| (i as f64 * 0.3).cos().powi(2)).collect(),
            meta: TraceMeta::new(StarkConfig::from_shift_mhz(0.5)),
        };
        let (mut a, mut b, mut c) = (base.clone(), base.clone(), base.clone());
        add_noise(&mut a, 0.01, 3).unwrap();
        add_noise(&mut b, 0.01, 3).unwrap();
        add_noise(&mut c, 0.01, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.perp, base.perp);
        assert!(a.parallel.iter().all(|v| *v >= 0.0));
        assert_eq!(a.total, a.parallel);
    }

    #[test]
    fn small_scan_fits_twice_the_shift() {
        let cfg = RunConfig::from_toml_str("ensemble.count = 600\nsequence.tau = 3.0\nscan.stop = 2.5\nscan.samples = 41").unwrap();
        let out = run_scan(&cfg, None).unwrap();
        let par = &out.records[0];
        assert_eq!(par.kind(), Some("fit"));
        let f = par.get_num("modulation_frequency").unwrap();
        assert!((f - 1.0).abs() < 0.01, "{f}");
        assert_eq!(out.records[1].kind(), Some("fit_skipped"));
        assert!(out.trace.meta.get("cfg.ensemble.count").is_some());
    }
}
