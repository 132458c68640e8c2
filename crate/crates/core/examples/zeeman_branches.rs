//! Splitting branch-resolved Stark coefficients into an average shift and a
//! field-induced g-shift, and the quadratic growth of the g-shift with field.
//!
//! ```bash
//! cargo run --example zeeman_branches
//! ```

use stark_echo::scan::{gshift_vs_field, ZeemanBranchShifts};

fn main() -> stark_echo::Result<()> {
    for (lower, upper) in [(1.61, 2.12), (15.35, 15.35), (4.0, 3.0)] {
        let z = ZeemanBranchShifts::from_branches(lower, upper)?;
        println!("lower {lower:>6}  upper {upper:>6}  ->  delta_o = {:.4}  delta_g = {:+.4}", z.delta_o, z.delta_g);
    }

    let kappa = 10.0;
    let b = [0.0, 0.1, 0.2, 0.3, 0.35];
    for (b, g) in b.iter().zip(gshift_vs_field(kappa, &b)?) {
        let z = ZeemanBranchShifts::from_components(1.865, g)?;
        println!("B = {b:.2} T  delta_g = {g:.4}  branches {:.4} / {:.4}", z.lower, z.upper);
    }
    Ok(())
}
