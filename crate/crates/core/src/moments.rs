//! Light-field geometry and the sub-site dependent combined transition moment.
//!
//! A transition with both an electric dipole `d` and a magnetic dipole `m`
//! couples to a plane wave travelling along `khat` through the combined moment
//!
//! ```text
//! mu(khat) = parity * d + m x khat
//! ```
//!
//! where `m` already carries the `n/c` factor. The electric part is odd under
//! inversion and the magnetic part is even, so the two inversion-related
//! sub-sites of a non-centrosymmetric site see different moments whenever
//! both terms are present.
//!
//! Moments are stored in angular-frequency-per-unit-field units (rad/us per
//! field unit), so `rabi_frequency` returns rad/us directly.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

const UNIT_TOL: f64 = 1e-12;
const TRANSVERSE_TOL: f64 = 1e-10;

/// Real 3-vector (directions, wavevectors).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Unit vector along `self`. Fails for the zero vector.
    pub fn normalized(&self) -> Result<Vec3> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Vec3::new(self.x / n, self.y / n, self.z / n))
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    pub fn to_complex(self) -> CVec3 {
        CVec3::from_real(self)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Complex 3-vector (transition moments, polarizations, radiated field).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CVec3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl CVec3 {
    pub const ZERO: CVec3 = CVec3 {
        x: Complex64::new(0.0, 0.0),
        y: Complex64::new(0.0, 0.0),
        z: Complex64::new(0.0, 0.0),
    };

    pub const fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        CVec3 { x, y, z }
    }

    pub const fn real(x: f64, y: f64, z: f64) -> Self {
        CVec3 {
            x: Complex64::new(x, 0.0),
            y: Complex64::new(y, 0.0),
            z: Complex64::new(z, 0.0),
        }
    }

    pub fn from_real(v: Vec3) -> Self {
        CVec3::real(v.x, v.y, v.z)
    }

    /// Builds a vector from separate real and imaginary parts.
    pub fn from_parts(re: [f64; 3], im: [f64; 3]) -> Self {
        CVec3::new(
            Complex64::new(re[0], im[0]),
            Complex64::new(re[1], im[1]),
            Complex64::new(re[2], im[2]),
        )
    }

    pub fn conj(&self) -> CVec3 {
        CVec3::new(self.x.conj(), self.y.conj(), self.z.conj())
    }

    /// Bilinear product `a . b` (no conjugation).
    pub fn dot(&self, other: &CVec3) -> Complex64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Hermitian product `a . conj(b)`, i.e. the projection of `self` onto `other`.
    pub fn project(&self, other: &CVec3) -> Complex64 {
        self.dot(&other.conj())
    }

    pub fn dot_real(&self, other: &Vec3) -> Complex64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// `self x k` with a real right-hand side.
    pub fn cross_real(&self, k: &Vec3) -> CVec3 {
        CVec3::new(
            self.y * k.z - self.z * k.y,
            self.z * k.x - self.x * k.z,
            self.x * k.y - self.y * k.x,
        )
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sqr() == 0.0
    }

    pub fn max_abs_diff(&self, other: &CVec3) -> f64 {
        (self.x - other.x)
            .norm()
            .max((self.y - other.y).norm())
            .max((self.z - other.z).norm())
    }
}

impl Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for CVec3 {
    type Output = CVec3;
    fn neg(self) -> CVec3 {
        CVec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: f64) -> CVec3 {
        CVec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Complex64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: Complex64) -> CVec3 {
        CVec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Electric and magnetic transition dipoles of one crystallographic site.
///
/// `m` is stored already multiplied by `n/c`, so both terms share units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleSet {
    pub d: CVec3,
    pub m: CVec3,
    pub n: f64,
}

impl DipoleSet {
    /// `m` must already include the `n/c` factor.
    pub fn new(d: CVec3, m: CVec3, n: f64) -> Result<Self> {
        let set = DipoleSet { d, m, n };
        set.validate()?;
        Ok(set)
    }

    /// Electric-dipole-only transition.
    pub fn electric(d: CVec3, n: f64) -> Result<Self> {
        DipoleSet::new(d, CVec3::ZERO, n)
    }

    /// Builds the set from a bare magnetic moment, folding in `n / c`.
    pub fn from_bare_magnetic(d: CVec3, m_bare: CVec3, n: f64, speed_of_light: f64) -> Result<Self> {
        if !(speed_of_light > 0.0) {
            return Err(invalid("speed of light must be positive"));
        }
        DipoleSet::new(d, m_bare * (n / speed_of_light), n)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() || !self.m.is_finite() {
            return Err(invalid("dipole components must be finite"));
        }
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(invalid(format!("refractive index must be >= 1, got {}", self.n)));
        }
        if self.d.is_zero() && self.m.is_zero() {
            return Err(invalid("at least one of d and m must be nonzero"));
        }
        Ok(())
    }
}

/// One of the two inversion-related sub-sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubSite {
    Plus,
    Minus,
}

impl SubSite {
    pub const BOTH: [SubSite; 2] = [SubSite::Plus, SubSite::Minus];

    /// Sign applied to the electric dipole and to the Stark shift.
    pub fn parity(self) -> f64 {
        match self {
            SubSite::Plus => 1.0,
            SubSite::Minus => -1.0,
        }
    }

    pub fn partner(self) -> SubSite {
        match self {
            SubSite::Plus => SubSite::Minus,
            SubSite::Minus => SubSite::Plus,
        }
    }
}

/// Driving plane wave. Only the envelope amplitude and geometry enter the
/// rotating-frame dynamics; `omega0` is carried for bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightField {
    pub epsilon: CVec3,
    pub khat: Vec3,
    pub amplitude: f64,
    pub omega0: f64,
}

impl LightField {
    pub fn new(epsilon: CVec3, khat: Vec3, amplitude: f64) -> Result<Self> {
        let light = LightField { epsilon, khat, amplitude, omega0: 0.0 };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.khat.is_unit() {
            return Err(invalid(format!("khat must be a unit vector, |khat| = {}", self.khat.norm())));
        }
        if (self.epsilon.norm() - 1.0).abs() > TRANSVERSE_TOL {
            return Err(invalid("polarization must be unit-normalized"));
        }
        if self.epsilon.dot_real(&self.khat).norm() > TRANSVERSE_TOL {
            return Err(invalid("polarization must be transverse to khat"));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("field amplitude must be finite"));
        }
        Ok(())
    }
}

/// Combined moment `parity * d + m x khat` seen by `site` for light along `khat`.
pub fn total_moment(dip: &DipoleSet, khat: &Vec3, site: SubSite) -> Result<CVec3> {
    if !khat.is_unit() {
        return Err(invalid(format!("khat must be a unit vector, |khat| = {}", khat.norm())));
    }
    Ok(dip.d * site.parity() + dip.m.cross_real(khat))
}

/// Complex Rabi frequency `chi = E0 * (mu . epsilon)` in rad/us.
///
/// The overall minus sign of the interaction is absorbed into `mu`; the dot
/// product is bilinear, so conjugating both `mu` and `epsilon` conjugates `chi`.
pub fn rabi_frequency(mu: &CVec3, epsilon: &CVec3, amplitude: f64) -> Result<Complex64> {
    if (epsilon.norm() - 1.0).abs() > TRANSVERSE_TOL {
        return Err(invalid("polarization must be unit-normalized"));
    }
    if !amplitude.is_finite() || !mu.is_finite() {
        return Err(invalid("Rabi frequency inputs must be finite"));
    }
    Ok(mu.dot(epsilon) * amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[test]
    fn electric_only_flips_with_parity() {
        let dip = DipoleSet::electric(CVec3::real(1.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(total_moment(&dip, &Z, SubSite::Plus).unwrap(), CVec3::real(1.0, 0.0, 0.0));
        assert_eq!(total_moment(&dip, &Z, SubSite::Minus).unwrap(), CVec3::real(-1.0, 0.0, 0.0));
    }

    #[test]
    fn cancelling_contributions() {
        // choose m so that m x z = d = x  ->  m = y
        let d = CVec3::real(1.0, 0.0, 0.0);
        let m = CVec3::real(0.0, 1.0, 0.0);
        assert_eq!(m.cross_real(&Z), d);
        let dip = DipoleSet::new(d, m, 1.0).unwrap();
        assert_eq!(total_moment(&dip, &Z, SubSite::Plus).unwrap(), d * 2.0);
        assert!(total_moment(&dip, &Z, SubSite::Minus).unwrap().is_zero());
    }

    #[test]
    fn hybrid_components() {
        // component-wise cross product: (0, 0.5, 0) x (0, 0, 1) = (0.5*1 - 0*0, 0*0 - 0*1, 0 - 0) = (0.5, 0, 0)
        let m = CVec3::real(0.0, 0.5, 0.0);
        let cross = CVec3::real(0.5 * 1.0 - 0.0 * 0.0, 0.0 * 0.0 - 0.0 * 1.0, 0.0 * 0.0 - 0.5 * 0.0);
        assert_eq!(m.cross_real(&Z), cross);
        let dip = DipoleSet::new(CVec3::real(1.0, 0.0, 0.0), m, 1.0).unwrap();
        assert_eq!(total_moment(&dip, &Z, SubSite::Plus).unwrap(), CVec3::real(1.5, 0.0, 0.0));
        assert_eq!(total_moment(&dip, &Z, SubSite::Minus).unwrap(), CVec3::real(-0.5, 0.0, 0.0));
    }

    #[test]
    fn rejects_non_unit_khat() {
        let dip = DipoleSet::electric(CVec3::real(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!(total_moment(&dip, &Vec3::new(0.0, 0.0, 2.0), SubSite::Plus).is_err());
    }

    #[test]
    fn rabi_examples() {
        let x = CVec3::real(1.0, 0.0, 0.0);
        let y = CVec3::real(0.0, 1.0, 0.0);
        assert_eq!(rabi_frequency(&x, &y, 3.0).unwrap(), c(0.0, 0.0));
        assert_eq!(rabi_frequency(&x, &x, 1.0).unwrap(), c(1.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mu = CVec3::new(c(s, 0.0), c(0.0, s), c(0.0, 0.0));
        // oracle: (1/sqrt2)*1*2 = sqrt2, |sqrt2| = sqrt2
        let chi = rabi_frequency(&mu, &x, 2.0).unwrap();
        assert!((chi.norm() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dipole_set_validation() {
        assert!(DipoleSet::new(CVec3::ZERO, CVec3::ZERO, 1.0).is_err());
        assert!(DipoleSet::electric(CVec3::real(1.0, 0.0, 0.0), 0.5).is_err());
        let d = DipoleSet::from_bare_magnetic(CVec3::real(1.0, 0.0, 0.0), CVec3::real(0.0, 2.0, 0.0), 1.5, 3.0).unwrap();
        assert_eq!(d.m, CVec3::real(0.0, 1.0, 0.0));
    }

    #[test]
    fn light_field_must_be_transverse() {
        assert!(LightField::new(CVec3::real(0.0, 0.0, 1.0), Z, 1.0).is_err());
        assert!(LightField::new(CVec3::real(1.0, 0.0, 0.0), Z, 1.0).is_ok());
        assert!(LightField::new(CVec3::real(2.0, 0.0, 0.0), Z, 1.0).is_err());
    }

    fn arb_cvec() -> impl Strategy<Value = CVec3> {
        proptest::array::uniform6(-2.0f64..2.0).prop_map(|a| CVec3::from_parts([a[0], a[1], a[2]], [a[3], a[4], a[5]]))
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU).prop_map(|(th, ph)| {
            Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos())
        })
    }

    proptest! {
        #[test]
        fn inversion_sum_is_twice_magnetic(d in arb_cvec(), m in arb_cvec(), k in arb_unit()) {
            prop_assume!(!(d.is_zero() && m.is_zero()));
            let dip = DipoleSet::new(d, m, 1.0).unwrap();
            let plus = total_moment(&dip, &k, SubSite::Plus).unwrap();
            let minus = total_moment(&dip, &k, SubSite::Minus).unwrap();
            prop_assert!((plus + minus).max_abs_diff(&(m.cross_real(&k) * 2.0)) < 1e-12);
        }

        #[test]
        fn khat_reversal_isolates_magnetic(d in arb_cvec(), m in arb_cvec(), k in arb_unit()) {
            prop_assume!(!(d.is_zero() && m.is_zero()));
            let dip = DipoleSet::new(d, m, 1.0).unwrap();
            for site in SubSite::BOTH {
                let fwd = total_moment(&dip, &k, site).unwrap();
                let back = total_moment(&dip, &-k, site).unwrap();
                prop_assert!((fwd - back).max_abs_diff(&(m.cross_real(&k) * 2.0)) < 1e-12);
            }
        }

        #[test]
        fn electric_only_sites_have_equal_magnitude(d in arb_cvec(), k in arb_unit()) {
            prop_assume!(!d.is_zero());
            let dip = DipoleSet::electric(d, 1.0).unwrap();
            let plus = total_moment(&dip, &k, SubSite::Plus).unwrap();
            let minus = total_moment(&dip, &k, SubSite::Minus).unwrap();
            prop_assert_eq!(plus.norm(), minus.norm());
        }

        #[test]
        fn rabi_is_bilinear_and_conjugate_consistent(mu in arb_cvec(), e0 in -3.0f64..3.0, s in -3.0f64..3.0, th in 0.0f64..3.1, ph in 0.0f64..6.2) {
            let eps = CVec3::new(
                Complex64::from_polar(th.cos(), ph),
                Complex64::new(th.sin(), 0.0),
                Complex64::new(0.0, 0.0),
            );
            let base = rabi_frequency(&mu, &eps, e0).unwrap();
            let scaled_mu = rabi_frequency(&(mu * s), &eps, e0).unwrap();
            let scaled_e0 = rabi_frequency(&mu, &eps, e0 * s).unwrap();
            prop_assert!((scaled_mu - base * s).norm() < 1e-12);
            prop_assert!((scaled_e0 - base * s).norm() < 1e-12);
            let conj = rabi_frequency(&mu.conj(), &eps.conj(), e0).unwrap();
            prop_assert!((conj - base.conj()).norm() < 1e-12);
        }
    }
}
