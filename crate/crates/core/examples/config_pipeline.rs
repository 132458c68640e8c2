//! Config-driven scan: load a TOML run file, sweep, write the trace CSV,
//! read it back and print the fit records, as `stark-echo scan` does.
//!
//! ```bash
//! cargo run --release --example config_pipeline -- examples/configs/m_parallel.toml
//! ```

use std::path::PathBuf;

use stark_echo::io::csv::{read_trace, write_trace};
use stark_echo::io::{records_to_string, RunConfig};
use stark_echo::pipeline::run_scan;

fn main() -> stark_echo::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/electric_only.toml"));
    let (cfg, prov) = RunConfig::load(&path)?;
    println!("config {} (sha256 {})", prov.path, &prov.sha256[..16]);

    let out = run_scan(&cfg, Some(&prov))?;
    let csv = std::env::temp_dir().join("stark_echo_config_pipeline.csv");
    write_trace(&csv, &out.trace)?;
    let back = read_trace(&csv)?;
    println!("wrote {} rows to {}, read back identical: {}", back.len(), csv.display(), back == out.trace);
    print!("{}", records_to_string(&out.records)?);
    Ok(())
}
