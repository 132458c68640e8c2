//! Modulation traces for hybrid electric/magnetic transitions.
//!
//! Four geometries are swept over field on-time and every detection channel
//! is fitted: electric only, m parallel to d (the magnetic term radiates into
//! the orthogonal polarization), m perpendicular to d (m x k along -d, pulses
//! set for the weaker sub-site), and a general complex m.
//!
//! ```bash
//! cargo run --release --example hybrid_moment_regimes
//! ```

use num_complex::Complex64;
use stark_echo::dynamics::Relaxation;
use stark_echo::echo::{DetectionBasis, EchoEngine, EchoSequence, EchoWindow, EnsembleSpec};
use stark_echo::fit::FitOptions;
use stark_echo::moments::{rabi_frequency, total_moment, CVec3, DipoleSet, LightField, SubSite, Vec3};
use stark_echo::scan::{measured_visibility, modulation_metrics, scan, Channel, ScanAxis, ScanOptions, StarkConfig};
use stark_echo::units::mhz_to_angular;

fn run(label: &str, dip: DipoleSet) -> stark_echo::Result<()> {
    let light = LightField::new(CVec3::real(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0)?;
    let mu = total_moment(&dip, &light.khat, SubSite::Plus)?;
    let rabi = rabi_frequency(&mu, &light.epsilon, light.amplitude)?.norm();
    let seq = EchoSequence::with_areas(rabi, 1.0, 13.0)?;
    let engine = EchoEngine::new(
        seq,
        EnsembleSpec::flat_mhz(80.0, 5000),
        dip,
        light,
        DetectionBasis::linear_xy(),
        Relaxation::default(),
        EchoWindow::default(),
    )?;
    let axis = ScanAxis::OnTime { start: 0.0, stop: 12.0 };
    let trace = scan(&engine, &StarkConfig::from_shift_mhz(0.5), &axis, 121, &ScanOptions::default())?;

    println!("{label}");
    for ch in Channel::ALL {
        let y = trace.channel(ch);
        let peak = y.iter().cloned().fold(0.0, f64::max);
        match modulation_metrics(&trace, ch, &FitOptions::default()) {
            Ok(m) => println!(
                "  {:<8} f = {:.4} MHz  W = {:.4}  phi = {:>7.2} deg  measured W = {:.4}  max = {peak:.3e}",
                ch.as_str(),
                m.frequency,
                m.visibility,
                m.phase.to_degrees(),
                measured_visibility(y)
            ),
            Err(e) => println!("  {:<8} {e}  max = {peak:.3e}", ch.as_str()),
        }
    }
    Ok(())
}

fn main() -> stark_echo::Result<()> {
    let r = mhz_to_angular(1.0);
    let d = CVec3::real(r, 0.0, 0.0);
    run("electric only", DipoleSet::electric(d, 1.0)?)?;
    run("m parallel to d", DipoleSet::new(d, CVec3::real(0.5 * r, 0.0, 0.0), 1.0)?)?;
    run("m perpendicular to d", DipoleSet::new(d, CVec3::real(0.0, -0.5 * r, 0.0), 1.0)?)?;
    let m = CVec3::from_parts([0.3 * r, 0.4 * r, 0.2 * r], [0.1 * r, 0.2 * r, 0.0]);
    let d_general = CVec3::new(Complex64::new(r, 0.0), Complex64::new(0.2 * r, 0.0), Complex64::new(0.0, 0.0));
    run("general complex m", DipoleSet::new(d_general, m, 1.0)?)?;
    Ok(())
}
