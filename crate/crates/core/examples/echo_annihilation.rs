//! Echo intensity versus field on-time for an electric-dipole transition:
//! the echo vanishes when the two sub-sites have accrued opposite phases.
//!
//! ```bash
//! cargo run --release --example echo_annihilation
//! ```

use stark_echo::dynamics::Relaxation;
use stark_echo::echo::{DetectionBasis, EchoEngine, EchoSequence, EchoWindow, EnsembleSpec, StarkPulse};
use stark_echo::moments::{CVec3, DipoleSet, LightField, Vec3};
use stark_echo::units::mhz_to_angular;

fn main() -> stark_echo::Result<()> {
    let rabi = mhz_to_angular(1.0);
    let dip = DipoleSet::electric(CVec3::real(rabi, 0.0, 0.0), 1.0)?;
    let light = LightField::new(CVec3::real(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0)?;
    let seq = EchoSequence::with_areas(rabi, 1.0, 5.0)?;
    let engine = EchoEngine::new(
        seq,
        EnsembleSpec::flat_mhz(80.0, 1000),
        dip,
        light,
        DetectionBasis::linear_xy(),
        Relaxation::default(),
        EchoWindow::default(),
    )?;

    let shift_mhz = 0.5;
    let reference = engine.simulate(&StarkPulse::new(0.0, mhz_to_angular(shift_mhz)))?.parallel_summary.peak;
    println!("t_on [us]  I / I(0)");
    for k in 0..=8 {
        let t_on = k as f64 * 0.125;
        let obs = engine.simulate(&StarkPulse::new(t_on, mhz_to_angular(shift_mhz)))?;
        println!("{t_on:>9.3}  {:.3e}", obs.parallel_summary.peak / reference);
    }
    println!("annihilation expected at t_on = 1 / (4 * shift) = {} us", 1.0 / (4.0 * shift_mhz));
    Ok(())
}
