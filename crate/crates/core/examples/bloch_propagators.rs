//! Exact square-pulse and free-evolution maps checked against fine-step
//! integration of the master equations.
//!
//! ```bash
//! cargo run --release --example bloch_propagators
//! ```

use num_complex::Complex64;
use stark_echo::dynamics::{
    free_propagator, pulse_propagator, reference_evolve, uniform_grid, FreeParams, PulseParams, Relaxation,
    TwoLevelState,
};
use stark_echo::units::mhz_to_angular;

fn main() -> stark_echo::Result<()> {
    let chi = Complex64::from_polar(mhz_to_angular(1.0), 0.7);
    let ground = TwoLevelState::ground();

    println!("{:>8} {:>10} {:>12}", "t [us]", "rho_bb", "|diff|");
    for &t in &[0.125, 0.25, 0.5, 0.8] {
        let p = PulseParams { chi, detuning: mhz_to_angular(0.3), duration: t };
        let exact = pulse_propagator(&p).apply(&ground);
        let reference =
            reference_evolve(ground, |_| chi, p.detuning, |_| 0.0, Relaxation::default(), &uniform_grid(0.0, t, 2000))?;
        println!("{t:>8} {:>10.6} {:>12.2e}", exact.rho_bb, exact.max_abs_diff(&reference));
    }

    // free evolution with relaxation and a Stark shift
    let relax = Relaxation::new(20.0, 10.0)?;
    let start = pulse_propagator(&PulseParams { chi, detuning: 0.0, duration: 0.25 }).apply(&ground);
    let free = FreeParams { detuning: 1.3, stark: mhz_to_angular(0.5), duration: 2.0, relaxation: relax };
    let exact = free_propagator(&free).apply(&start);
    let reference = reference_evolve(start, |_| Complex64::new(0.0, 0.0), 1.3, |_| free.stark, relax, &uniform_grid(0.0, 2.0, 2000))?;
    println!("free decay: rho_ab = {:.6}, |diff| = {:.2e}", exact.rho_ab, exact.max_abs_diff(&reference));
    Ok(())
}
