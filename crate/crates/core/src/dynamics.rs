//! Two-level optical Bloch dynamics in the frame rotating at the drive frequency.
//!
//! With `a` the ground state and `b` the excited state, the master equations are
//!
//! ```text
//! d/dt rho_aa = -Im(rho_ab chi) + rho_bb / T1
//! d/dt rho_bb = +Im(rho_ab chi) - rho_bb / T1
//! d/dt rho_ab = -(i/2)(rho_bb - rho_aa) chi* + i(detuning + stark) rho_ab - rho_ab / T2
//! ```
//!
//! `chi` is complex: its phase sets the azimuth of the rotation axis on the
//! Bloch sphere. Square pulses are treated as unitary (relaxation is ignored
//! while the field is on); free evolution is exact including relaxation.
//! Both are returned as [`StateMap`]s, real linear maps on
//! `(rho_aa, rho_bb, Re rho_ab, Im rho_ab)` that compose by matrix product.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub rho_aa: f64,
    pub rho_bb: f64,
    pub rho_ab: Complex64,
}

impl TwoLevelState {
    pub fn ground() -> Self {
        TwoLevelState { rho_aa: 1.0, rho_bb: 0.0, rho_ab: Complex64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        TwoLevelState { rho_aa: 0.0, rho_bb: 1.0, rho_ab: Complex64::new(0.0, 0.0) }
    }

    pub fn rho_ba(&self) -> Complex64 {
        self.rho_ab.conj()
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.rho_aa, self.rho_bb, self.rho_ab.re, self.rho_ab.im)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        TwoLevelState { rho_aa: v[0], rho_bb: v[1], rho_ab: Complex64::new(v[2], v[3]) }
    }

    pub fn trace(&self) -> f64 {
        self.rho_aa + self.rho_bb
    }

    /// Checks unit trace, population bounds and positivity.
    pub fn validate(&self) -> Result<()> {
        if (self.trace() - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!("trace is {}, expected 1", self.trace())));
        }
        if self.rho_aa < -TRACE_TOL || self.rho_aa > 1.0 + TRACE_TOL {
            return Err(invalid(format!("rho_aa = {} outside [0, 1]", self.rho_aa)));
        }
        if self.rho_ab.norm_sqr() > self.rho_aa * self.rho_bb + TRACE_TOL {
            return Err(invalid("coherence violates positivity"));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &TwoLevelState) -> f64 {
        (self.rho_aa - other.rho_aa)
            .abs()
            .max((self.rho_bb - other.rho_bb).abs())
            .max((self.rho_ab - other.rho_ab).norm())
    }
}

/// Phenomenological relaxation times in us; `f64::INFINITY` disables a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub t1: f64,
    pub t2: f64,
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation { t1: f64::INFINITY, t2: f64::INFINITY }
    }
}

impl Relaxation {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let r = Relaxation { t1, t2 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) || !(self.t2 > 0.0) {
            return Err(invalid("T1 and T2 must be positive"));
        }
        if self.t1.is_finite() && self.t2.is_finite() && self.t2 > 2.0 * self.t1 {
            return Err(invalid(format!("T2 = {} exceeds 2*T1 = {}", self.t2, 2.0 * self.t1)));
        }
        Ok(())
    }

    fn gamma1(&self) -> f64 {
        1.0 / self.t1
    }

    fn gamma2(&self) -> f64 {
        1.0 / self.t2
    }
}

/// Square pulse in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    /// Complex Rabi frequency, rad/us.
    pub chi: Complex64,
    /// Atom detuning from the drive, rad/us.
    pub detuning: f64,
    /// us.
    pub duration: f64,
}

impl PulseParams {
    /// Parameters whose propagator is the inverse of this one's.
    pub fn reversed(&self) -> PulseParams {
        PulseParams { chi: -self.chi, detuning: -self.detuning, duration: self.duration }
    }

    pub fn generalized_rabi(&self) -> f64 {
        (self.chi.norm_sqr() + self.detuning * self.detuning).sqrt()
    }
}

/// Field-free interval. `stark` is the already parity-signed Stark shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParams {
    pub detuning: f64,
    pub stark: f64,
    pub duration: f64,
    pub relaxation: Relaxation,
}

/// Real linear map on `(rho_aa, rho_bb, Re rho_ab, Im rho_ab)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMap(pub Matrix4<f64>);

impl StateMap {
    pub fn identity() -> Self {
        StateMap(Matrix4::identity())
    }

    pub fn apply(&self, state: &TwoLevelState) -> TwoLevelState {
        TwoLevelState::from_vector(&(self.0 * state.to_vector()))
    }

    /// The map that applies `self` first and `next` second.
    pub fn then(&self, next: &StateMap) -> StateMap {
        StateMap(next.0 * self.0)
    }

    pub fn max_abs_diff(&self, other: &StateMap) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn sandwich(u: &Mat2, rho: &Mat2) -> Mat2 {
    let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = u[i][0] * rho[0][j] + u[i][1] * rho[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            // (tmp U^dagger)_ij = sum_k tmp_ik conj(U_jk)
            out[i][j] = tmp[i][0] * u[j][0].conj() + tmp[i][1] * u[j][1].conj();
        }
    }
    out
}

/// Exact propagator for a square pulse.
///
/// The rotating-frame Hamiltonian is `H = (Re chi sx + Im chi sy - detuning sz) / 2`
/// in the `(a, b)` basis, so `U = cos(W t/2) - i sin(W t/2) (n . sigma)` with
/// `W = sqrt(|chi|^2 + detuning^2)`.
pub fn pulse_propagator(p: &PulseParams) -> StateMap {
    let w = p.generalized_rabi();
    if p.duration == 0.0 || w == 0.0 {
        return StateMap::identity();
    }
    let (nx, ny, nz) = (p.chi.re / w, p.chi.im / w, -p.detuning / w);
    let half = 0.5 * w * p.duration;
    let (s, c) = half.sin_cos();
    let i = Complex64::i();
    let u: Mat2 = [
        [Complex64::new(c, 0.0) - i * s * nz, -i * s * Complex64::new(nx, -ny)],
        [-i * s * Complex64::new(nx, ny), Complex64::new(c, 0.0) + i * s * nz],
    ];

    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    // Hermitian basis for (rho_aa, rho_bb, Re rho_ab, Im rho_ab)
    let basis: [Mat2; 4] = [
        [[one, zero], [zero, zero]],
        [[zero, zero], [zero, one]],
        [[zero, one], [one, zero]],
        [[zero, i], [-i, zero]],
    ];
    let mut m = Matrix4::zeros();
    for (col, e) in basis.iter().enumerate() {
        let out = sandwich(&u, e);
        m[(0, col)] = out[0][0].re;
        m[(1, col)] = out[1][1].re;
        m[(2, col)] = out[0][1].re;
        m[(3, col)] = out[0][1].im;
    }
    StateMap(m)
}

/// Exact free evolution with dephasing, population decay and an optional Stark shift.
pub fn free_propagator(f: &FreeParams) -> StateMap {
    let t = f.duration;
    let decay1 = (-t * f.relaxation.gamma1()).exp();
    let decay2 = (-t * f.relaxation.gamma2()).exp();
    let (s, c) = ((f.detuning + f.stark) * t).sin_cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        1.0, 1.0 - decay1, 0.0,         0.0,
        0.0, decay1,       0.0,         0.0,
        0.0, 0.0,          decay2 * c, -decay2 * s,
        0.0, 0.0,          decay2 * s,  decay2 * c,
    );
    StateMap(m)
}

fn derivative(
    y: &Vector4<f64>,
    chi: Complex64,
    omega: f64,
    relax: &Relaxation,
) -> Vector4<f64> {
    let ab = Complex64::new(y[2], y[3]);
    let transfer = (ab * chi).im;
    let g1 = relax.gamma1();
    let dab = -0.5 * Complex64::i() * (y[1] - y[0]) * chi.conj() + Complex64::i() * omega * ab - relax.gamma2() * ab;
    Vector4::new(-transfer + g1 * y[1], transfer - g1 * y[1], dab.re, dab.im)
}

fn rk4_run<C, S>(
    start: Vector4<f64>,
    chi: &C,
    detuning: f64,
    stark: &S,
    relax: &Relaxation,
    t_grid: &[f64],
    substeps: usize,
) -> Vector4<f64>
where
    C: Fn(f64) -> Complex64,
    S: Fn(f64) -> f64,
{
    let f = |t: f64, y: &Vector4<f64>| derivative(y, chi(t), detuning + stark(t), relax);
    let mut y = start;
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for k in 0..substeps {
            let t = w[0] + k as f64 * h;
            let k1 = f(t, &y);
            let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
            let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)));
            let k4 = f(t + h, &(y + k3 * h));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    y
}

/// Tolerance on the step-halving check of [`reference_evolve`].
pub const REFERENCE_STEP_TOL: f64 = 1e-8;

/// Fine-step RK4 integration of the master equations over `t_grid`.
///
/// Used as an independent oracle for the analytic propagators. The grid is
/// integrated twice, once as given and once with every step halved; if the two
/// results differ by more than [`REFERENCE_STEP_TOL`] the step is deemed too
/// coarse and [`Error::NonConvergence`] is returned. Discontinuities in `chi`
/// or `stark` should fall on grid points.
pub fn reference_evolve<C, S>(
    state: TwoLevelState,
    chi: C,
    detuning: f64,
    stark: S,
    relaxation: Relaxation,
    t_grid: &[f64],
) -> Result<TwoLevelState>
where
    C: Fn(f64) -> Complex64,
    S: Fn(f64) -> f64,
{
    if t_grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    relaxation.validate()?;
    let start = state.to_vector();
    let coarse = rk4_run(start, &chi, detuning, &stark, &relaxation, t_grid, 1);
    let fine = rk4_run(start, &chi, detuning, &stark, &relaxation, t_grid, 2);
    let change = (coarse - fine).abs().max();
    if !(change <= REFERENCE_STEP_TOL) {
        return Err(Error::NonConvergence { change, tolerance: REFERENCE_STEP_TOL });
    }
    Ok(TwoLevelState::from_vector(&fine))
}

/// Evenly spaced grid from `t0` to `t1` with `steps` intervals.
pub fn uniform_grid(t0: f64, t1: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| t0 + (t1 - t0) * k as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn resonant(chi: f64, duration: f64) -> PulseParams {
        PulseParams { chi: Complex64::new(chi, 0.0), detuning: 0.0, duration }
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = PulseParams { chi: Complex64::new(1.3, -0.4), detuning: 2.0, duration: 0.0 };
        assert_eq!(pulse_propagator(&p), StateMap::identity());
    }

    #[test]
    fn resonant_pi_pulse_inverts() {
        let out = pulse_propagator(&resonant(2.0, PI / 2.0)).apply(&TwoLevelState::ground());
        assert!((out.rho_bb - 1.0).abs() < 1e-14);
        assert!(out.rho_ab.norm() < 1e-14);
    }

    #[test]
    fn detuned_rabi_reaches_half() {
        // Rabi formula: rho_bb = |chi|^2 / W^2 sin^2(W t / 2), W = sqrt2 |chi| when detuning = |chi|
        let chi = 1.7;
        let w = (2.0f64).sqrt() * chi;
        let p = PulseParams { chi: Complex64::new(chi, 0.0), detuning: chi, duration: PI / w };
        let out = pulse_propagator(&p).apply(&TwoLevelState::ground());
        assert!((out.rho_bb - 0.5).abs() < 1e-14);

        let grid = uniform_grid(0.0, p.duration, 2000);
        let reference = reference_evolve(TwoLevelState::ground(), |_| p.chi, p.detuning, |_| 0.0, Relaxation::default(), &grid).unwrap();
        assert!(reference.max_abs_diff(&out) < 1e-9);

        // sweep: the maximum over the sweep is at W t = pi
        let best = (0..=400)
            .map(|k| {
                let t = 2.0 * PI / w * k as f64 / 400.0;
                let q = PulseParams { duration: t, ..p };
                pulse_propagator(&q).apply(&TwoLevelState::ground()).rho_bb
            })
            .fold(f64::MIN, f64::max);
        assert!((best - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chi_phase_sets_rotation_axis() {
        // pi/2 pulse about x (chi real) vs about y (chi imaginary)
        let x = pulse_propagator(&resonant(1.0, FRAC_PI_2)).apply(&TwoLevelState::ground());
        let y = pulse_propagator(&PulseParams { chi: Complex64::new(0.0, 1.0), detuning: 0.0, duration: FRAC_PI_2 })
            .apply(&TwoLevelState::ground());
        assert!((x.rho_ab - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        assert!((y.rho_ab - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn reversed_pulse_undoes_map() {
        let p = PulseParams { chi: Complex64::new(0.7, 1.9), detuning: -1.3, duration: 2.4 };
        let composed = pulse_propagator(&p).then(&pulse_propagator(&p.reversed()));
        let start = TwoLevelState { rho_aa: 0.7, rho_bb: 0.3, rho_ab: Complex64::new(0.2, -0.3) };
        assert!(composed.apply(&start).max_abs_diff(&start) < 1e-10);
    }

    #[test]
    fn free_identity_and_decay() {
        let f = FreeParams { detuning: 0.0, stark: 0.0, duration: 3.0, relaxation: Relaxation::default() };
        assert_eq!(free_propagator(&f), StateMap::identity());

        let start = TwoLevelState { rho_aa: 0.5, rho_bb: 0.5, rho_ab: Complex64::new(0.3, 0.2) };
        for detuning in [-5.0, 0.0, 0.37, 12.0] {
            let f = FreeParams { detuning, stark: 0.0, duration: 1.5, relaxation: Relaxation::new(10.0, 4.0).unwrap() };
            let out = free_propagator(&f).apply(&start);
            let expect = start.rho_ab.norm() * (-1.5f64 / 4.0).exp();
            assert!((out.rho_ab.norm() - expect).abs() < 1e-14);
            assert!((out.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stark_phases_of_opposite_sites() {
        let shift = 2.0 * PI * 0.5;
        let start = TwoLevelState { rho_aa: 0.5, rho_bb: 0.5, rho_ab: Complex64::new(0.5, 0.0) };
        let phase = |stark: f64, t: f64| {
            let f = FreeParams { detuning: 0.0, stark, duration: t, relaxation: Relaxation::default() };
            free_propagator(&f).apply(&start).rho_ab
        };
        // t = 1: phases +pi and -pi, relative 2 pi -> same coherence
        assert!((phase(shift, 1.0) - phase(-shift, 1.0)).norm() < 1e-14);
        // t = 0.5: phases +-pi/2 -> opposite coherences
        assert!((phase(shift, 0.5) + phase(-shift, 0.5)).norm() < 1e-14);
        // parity swap conjugates the accrued factor
        let plus = phase(shift, 0.37) / start.rho_ab;
        let minus = phase(-shift, 0.37) / start.rho_ab;
        assert!((plus - minus.conj()).norm() < 1e-15);
    }

    #[test]
    fn echo_kernel_phase_is_detuning_independent() {
        let chi = 3.0;
        let tau = 2.5;
        let pi2 = pulse_propagator(&resonant(chi, FRAC_PI_2 / chi));
        let pi = pulse_propagator(&resonant(chi, PI / chi));
        let phases: Vec<f64> = [-7.0, -1.1, 0.0, 0.4, 3.3, 20.0]
            .iter()
            .map(|&det| {
                let free = free_propagator(&FreeParams { detuning: det, stark: 0.0, duration: tau, relaxation: Relaxation::default() });
                pi2.then(&free).then(&pi).then(&free).apply(&TwoLevelState::ground()).rho_ab.arg()
            })
            .collect();
        for p in &phases {
            assert!((p - phases[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_matches_free_decay() {
        let relax = Relaxation::new(20.0, 5.0).unwrap();
        let start = TwoLevelState { rho_aa: 0.4, rho_bb: 0.6, rho_ab: Complex64::new(0.1, 0.45) };
        let f = FreeParams { detuning: 1.2, stark: 0.3, duration: 4.0, relaxation: relax };
        let analytic = free_propagator(&f).apply(&start);
        let grid = uniform_grid(0.0, 4.0, 4000);
        let numeric = reference_evolve(start, |_| Complex64::new(0.0, 0.0), 1.2, |_| 0.3, relax, &grid).unwrap();
        assert!(numeric.max_abs_diff(&analytic) < 1e-10);
    }

    #[test]
    fn reference_reports_coarse_grid() {
        let grid = uniform_grid(0.0, 10.0, 5);
        let r = reference_evolve(TwoLevelState::ground(), |_| Complex64::new(4.0, 0.0), 0.0, |_| 0.0, Relaxation::default(), &grid);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn relaxation_validation() {
        assert!(Relaxation::new(1.0, 3.0).is_err());
        assert!(Relaxation::new(1.0, 2.0).is_ok());
        assert!(Relaxation::new(f64::INFINITY, 2.0).is_ok());
        assert!(Relaxation::new(0.0, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_state() -> impl Strategy<Value = TwoLevelState> {
            (0.0f64..1.0, 0.0f64..1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(p, frac, ph)| {
                let r = frac * (p * (1.0 - p)).sqrt();
                TwoLevelState { rho_aa: p, rho_bb: 1.0 - p, rho_ab: Complex64::from_polar(r, ph) }
            })
        }

        proptest! {
            #[test]
            fn maps_preserve_trace_and_positivity(
                s in arb_state(),
                re in -5.0f64..5.0, im in -5.0f64..5.0, det in -10.0f64..10.0, t in 0.0f64..4.0,
                stark in -3.0f64..3.0, t1 in 0.5f64..50.0, ratio in 0.05f64..2.0,
            ) {
                let p = PulseParams { chi: Complex64::new(re, im), detuning: det, duration: t };
                let relax = Relaxation::new(t1, ratio * t1).unwrap();
                let f = FreeParams { detuning: det, stark, duration: t, relaxation: relax };
                let out = pulse_propagator(&p).then(&free_propagator(&f)).apply(&s);
                prop_assert!((out.trace() - 1.0).abs() < 1e-9);
                prop_assert!(out.validate().is_ok());
            }

            #[test]
            fn reversed_pulse_is_inverse(s in arb_state(), re in -5.0f64..5.0, im in -5.0f64..5.0, det in -10.0f64..10.0, t in 0.0f64..4.0) {
                let p = PulseParams { chi: Complex64::new(re, im), detuning: det, duration: t };
                let out = pulse_propagator(&p).then(&pulse_propagator(&p.reversed())).apply(&s);
                prop_assert!(out.max_abs_diff(&s) < 1e-10);
            }
        }
    }
}
