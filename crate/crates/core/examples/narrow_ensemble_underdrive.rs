//! Weak (quarter-area) pulses on a narrow and on a broad ensemble.
//!
//! With a 100 kHz profile every atom sees the same under-rotation, the echo
//! keeps a component that does not rephase, and the modulation appears at
//! the Stark shift itself with reduced visibility. On an 80 MHz profile the
//! same pulses give the usual full modulation at twice the shift.
//!
//! ```bash
//! cargo run --release --example narrow_ensemble_underdrive
//! ```

use stark_echo::dynamics::Relaxation;
use stark_echo::echo::{DetectionBasis, EchoEngine, EchoSequence, EchoWindow, EnsembleSpec};
use stark_echo::fit::FitOptions;
use stark_echo::moments::{CVec3, DipoleSet, LightField, Vec3};
use stark_echo::scan::{modulation_metrics, scan, Channel, ScanAxis, ScanOptions, StarkConfig};
use stark_echo::units::mhz_to_angular;

fn main() -> stark_echo::Result<()> {
    let rabi = mhz_to_angular(1.0);
    let dip = DipoleSet::electric(CVec3::real(rabi, 0.0, 0.0), 1.0)?;
    let light = LightField::new(CVec3::real(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0)?;
    let shift = 0.5;
    for (label, ens, area) in [
        ("narrow, quarter area", EnsembleSpec::flat_mhz(0.1, 201), 0.25),
        ("broad, quarter area", EnsembleSpec::flat_mhz(80.0, 1000), 0.25),
        ("narrow, full area", EnsembleSpec::flat_mhz(0.1, 201), 1.0),
    ] {
        let seq = EchoSequence::with_areas(rabi, area, 5.0)?;
        let engine =
            EchoEngine::new(seq, ens, dip, light, DetectionBasis::linear_xy(), Relaxation::default(), EchoWindow::default())?;
        let axis = ScanAxis::OnTime { start: 0.0, stop: 4.5 };
        let trace = scan(&engine, &StarkConfig::from_shift_mhz(shift), &axis, 81, &ScanOptions::default())?;
        let m = modulation_metrics(&trace, Channel::Parallel, &FitOptions::default())?;
        println!(
            "{label:<22} t_pi = {:.4} us  f = {:.4} MHz ({:.3} x shift)  W = {:.4}",
            seq.t_pi,
            m.frequency,
            m.frequency / shift,
            m.visibility
        );
    }
    Ok(())
}
