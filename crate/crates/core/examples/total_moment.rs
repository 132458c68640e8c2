//! Combined moments and Rabi frequencies of the two inversion-related
//! sub-sites for a few dipole geometries.
//!
//! ```bash
//! cargo run --example total_moment
//! ```

use num_complex::Complex64;
use stark_echo::moments::{rabi_frequency, total_moment, CVec3, DipoleSet, LightField, SubSite, Vec3};

fn show(label: &str, dip: &DipoleSet, light: &LightField) -> stark_echo::Result<()> {
    println!("{label}");
    for site in SubSite::BOTH {
        let mu = total_moment(dip, &light.khat, site)?;
        let chi = rabi_frequency(&mu, &light.epsilon, light.amplitude)?;
        println!(
            "  {site:?}: mu = ({:.3}, {:.3}, {:.3})  chi = {:.3} (|chi| = {:.3})",
            mu.x, mu.y, mu.z, chi, chi.norm()
        );
    }
    Ok(())
}

fn main() -> stark_echo::Result<()> {
    let light = LightField::new(CVec3::real(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0)?;
    let d = CVec3::real(1.0, 0.0, 0.0);

    show("electric only", &DipoleSet::electric(d, 1.0)?, &light)?;

    // m x k along +x adds to one sub-site and subtracts from the other
    show("m x k parallel to d", &DipoleSet::new(d, CVec3::real(0.0, 0.5, 0.0), 1.0)?, &light)?;

    // equal magnitudes: one sub-site does not couple at all
    show("complete cancellation", &DipoleSet::new(d, CVec3::real(0.0, 1.0, 0.0), 1.0)?, &light)?;

    // a magnetic moment out of phase with d couples both sub-sites equally
    let i = Complex64::new(0.0, 1.0);
    let m = CVec3::new(Complex64::new(0.0, 0.0), 0.5 * i, Complex64::new(0.0, 0.0));
    show("m in quadrature", &DipoleSet::new(d, m, 1.0)?, &light)?;

    // the bare magnetic moment is scaled by n / c
    let dip = DipoleSet::from_bare_magnetic(d, CVec3::real(0.0, 300.0, 0.0), 1.5, 1000.0)?;
    show("bare magnetic moment, n = 1.5, c = 1000", &dip, &light)?;
    Ok(())
}
