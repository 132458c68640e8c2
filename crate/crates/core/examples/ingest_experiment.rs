//! Ingesting a raw table of echo areas (on-time in ns, shuffled rows, two
//! polarizations) and fitting the Stark coefficient.
//!
//! ```bash
//! cargo run --release --example ingest_experiment
//! ```

use stark_echo::fit::{fit_trace, synthesize, FitModelParams, FitOptions};
use stark_echo::io::{ingest_csv, ColumnMap};
use stark_echo::scan::Channel;

fn main() -> stark_echo::Result<()> {
    // 1.61 kHz/(V/cm), 10 V across 0.317 cm
    let (delta_s, volts, plate) = (1.61, 10.0, 0.317);
    let scale = volts / plate * 1e-3;
    let truth = FitModelParams { amplitude: 5.0, delta_s, phi: 0.0, visibility: 0.8, decay: f64::INFINITY };
    let t_us: Vec<f64> = (0..120).map(|i| 0.1 + 0.25 * i as f64).collect();
    let h = synthesize(&truth, &t_us, scale, 0.01, 11)?;
    let v = synthesize(&FitModelParams { amplitude: 0.5, ..truth }, &t_us, scale, 0.01, 12)?;

    let mut raw = String::from("# shots = 8\n# wait_time_ms = 240\nt_on [ns],area_h,area_v\n");
    // rows written out of order, as a stepped scan might log them
    let mut order: Vec<usize> = (0..t_us.len()).collect();
    order.sort_by_key(|&i| (i * 37) % t_us.len());
    for i in order {
        raw.push_str(&format!("{},{},{}\n", t_us[i] * 1e3, h[i].max(0.0), v[i].max(0.0)));
    }
    let path = std::env::temp_dir().join("stark_echo_raw_areas.csv");
    std::fs::write(&path, raw)?;

    let map = ColumnMap {
        parallel: Some("area_h".into()),
        perp: Some("area_v".into()),
        voltage: Some(volts),
        thickness: Some(plate),
        ..Default::default()
    };
    let ex = ingest_csv(&path, &map)?;
    for w in &ex.warnings {
        println!("warning: {w}");
    }
    println!("{} rows, {} shots, wait {} ms", ex.trace.len(), ex.shots.unwrap_or(0), ex.wait_time.unwrap_or(0.0));
    for ch in [Channel::Parallel, Channel::Total] {
        let fit = fit_trace(&ex.trace, ch, None, &FitOptions::default())?;
        println!(
            "{:<8} delta_s = {:.4} +- {:.4} kHz/(V/cm)  W = {:.3}",
            ch.as_str(),
            fit.params.delta_s,
            fit.uncertainties.delta_s,
            fit.params.visibility
        );
    }
    Ok(())
}
