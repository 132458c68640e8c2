//! Least-squares fit of the Stark modulation model
//!
//! `I(x) = A [cos^2(2 pi delta_s g x + phi) + (1 - W) / (2 W)] exp(-x^2 / C)`
//!
//! where `g` converts the trace axis into the model argument: `V/d * 1e-3`
//! for on-time traces in microseconds, `t_on/d * 1e-3` for voltage traces
//! and `t_on * 1e-3` for field traces (delta_s in kHz/(V/cm)).

pub mod guess;
pub mod lm;

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::scan::{Channel, ModulationTrace};

pub use guess::initial_guess_curve;
use lm::{LmOutcome, LmSettings};


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitModelParams {
    pub amplitude: f64,
    /// kHz per V/cm
    pub delta_s: f64,
    pub phi: f64,
    pub visibility: f64,
    /// Gaussian decay constant in x-units squared; infinite for no decay.
    pub decay: f64,
}

impl FitModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.delta_s.is_finite() && self.phi.is_finite()) {
            return Err(invalid("amplitude, delta_s and phi must be finite"));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(invalid(format!("visibility must be in (0, 1], got {}", self.visibility)));
        }
        if !(self.decay > 0.0) {
            return Err(invalid(format!("decay constant must be positive or infinite, got {}", self.decay)));
        }
        Ok(())
    }

    /// Modulation frequency in cycles per x-unit.
    pub fn modulation_frequency(&self, scale: f64) -> f64 {
        2.0 * self.delta_s * scale
    }
}

/// Model value at `x` for argument scale `scale`.
pub fn model_value(p: &FitModelParams, x: f64, scale: f64) -> f64 {
    let c = (TAU * p.delta_s * scale * x + p.phi).cos();
    let envelope = if p.decay.is_infinite() { 1.0 } else { (-x * x / p.decay).exp() };
    p.amplitude * (c * c + (1.0 - p.visibility) / (2.0 * p.visibility)) * envelope
}

/// Model value versus on-time (us) at voltage `voltage` (V) across `thickness` (cm).
pub fn model_eval(p: &FitModelParams, t_on: f64, voltage: f64, thickness: f64) -> Result<f64> {
    p.validate()?;
    if !(t_on >= 0.0 && t_on.is_finite()) {
        return Err(invalid(format!("on-time must be non-negative, got {t_on}")));
    }
    if !(thickness > 0.0 && thickness.is_finite()) || !voltage.is_finite() {
        return Err(invalid("thickness must be positive and voltage finite"));
    }
    Ok(model_value(p, t_on, voltage / thickness * 1e-3))
}

/// Fold `phi` into [-pi/2, pi/2]; the model has period pi in phi.
pub fn wrap_phase(phi: f64) -> f64 {
    phi - PI * (phi / PI).round()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// Free C only if it passes the F-test threshold.
    Auto,
    On,
    Off,
}

impl std::str::FromStr for DecayMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(DecayMode::Auto),
            "on" => Ok(DecayMode::On),
            "off" => Ok(DecayMode::Off),
            _ => Err(invalid(format!("decay mode must be auto, on or off, got {s:?}"))),
        }
    }
}

impl DecayMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecayMode::Auto => "auto",
            DecayMode::On => "on",
            DecayMode::Off => "off",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub decay: DecayMode,
    /// F statistic a decaying fit must exceed in `Auto` mode.
    pub f_threshold: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { decay: DecayMode::Auto, f_threshold: 10.0, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitUncertainties {
    pub amplitude: f64,
    pub delta_s: f64,
    pub phi: f64,
    pub visibility: f64,
    /// `None` when C was held at infinity.
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FitModelParams,
    pub uncertainties: FitUncertainties,
    /// sqrt of the residual sum of squares
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    pub decay_fitted: bool,
    pub points: usize,
    pub scale: f64,
    /// Half sum of squares after each accepted step of the final fit.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn modulation_frequency(&self) -> f64 {
        self.params.modulation_frequency(self.scale)
    }

    pub fn modulation_frequency_sigma(&self) -> f64 {
        2.0 * self.uncertainties.delta_s * self.scale.abs()
    }
}

// internal parameter vector: [A, delta_s, phi, q, lambda] with
// W = 1 / (1 + q^2) and lambda = 1 / C (zero for no decay)
const Q: usize = 3;
const LAMBDA: usize = 4;

fn to_internal(p: &FitModelParams) -> DVector<f64> {
    let q = (1.0 / p.visibility - 1.0).max(0.0).sqrt().max(1e-3);
    let lambda = if p.decay.is_finite() { 1.0 / p.decay } else { 0.0 };
    DVector::from_vec(vec![p.amplitude, p.delta_s, p.phi, q, lambda])
}

fn from_internal(v: &DVector<f64>) -> FitModelParams {
    FitModelParams {
        amplitude: v[0],
        delta_s: v[1],
        phi: v[2],
        visibility: 1.0 / (1.0 + v[Q] * v[Q]),
        decay: if v[LAMBDA] == 0.0 { f64::INFINITY } else { 1.0 / v[LAMBDA] },
    }
}

/// Residuals `model - y` and their Jacobian in the internal parameters.
pub(crate) fn residuals_internal(v: &DVector<f64>, x: &[f64], y: &[f64], scale: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let np = v.len();
    let (a, ds, phi, q, lambda) = (v[0], v[1], v[2], v[Q], v[LAMBDA]);
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, np);
    for i in 0..n {
        let xi = x[i];
        let u = TAU * ds * scale * xi + phi;
        let c2 = u.cos().powi(2);
        let s2 = (2.0 * u).sin();
        let e = (-lambda * xi * xi).exp();
        let shape = c2 + 0.5 * q * q;
        let f = a * shape * e;
        r[i] = f - y[i];
        j[(i, 0)] = shape * e;
        j[(i, 1)] = -a * e * s2 * TAU * scale * xi;
        j[(i, 2)] = -a * e * s2;
        j[(i, Q)] = a * e * q;
        j[(i, LAMBDA)] = -xi * xi * f;
    }
    (r, j)
}

struct Candidate {
    /// Full internal vector, fixed entries included.
    full: DVector<f64>,
    outcome: LmOutcome,
}

impl Candidate {
    fn cost(&self) -> f64 {
        self.outcome.cost()
    }
}

/// Minimizes over the internal parameters listed in `free`, holding the
/// rest of `base` fixed.
fn run_lm(x: &[f64], y: &[f64], scale: f64, base: &DVector<f64>, free: &[usize], max_iterations: usize) -> Option<Candidate> {
    let data_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let settings = LmSettings { max_iterations, ..LmSettings::default() };
    // q enters squared, so its natural magnitude is used for the gradient test
    let floors: Vec<f64> = free.iter().map(|&k| if k == Q { 1.0 } else { 0.0 }).collect();
    let expand = |v: &DVector<f64>| {
        let mut full = base.clone();
        for (i, &k) in free.iter().enumerate() {
            full[k] = v[i];
        }
        full
    };
    let start = DVector::from_iterator(free.len(), free.iter().map(|&k| base[k]));
    let outcome = lm::minimize(
        |v| {
            let (r, j) = residuals_internal(&expand(v), x, y, scale);
            let j = j.select_columns(free);
            (r.iter().all(|z| z.is_finite()) && j.iter().all(|z| z.is_finite())).then_some((r, j))
        },
        start,
        &floors,
        data_norm,
        &settings,
    )?;
    Some(Candidate { full: expand(&outcome.params), outcome })
}

/// Fits with or without the decay term. When the visibility runs into its
/// upper bound the fit is repeated with W pinned at 1, which is accepted if
/// it is no worse and the data push against the bound.
fn fit_model(x: &[f64], y: &[f64], scale: f64, base: &DVector<f64>, decay: bool, max_iterations: usize) -> Option<Candidate> {
    let free: Vec<usize> = if decay { vec![0, 1, 2, Q, LAMBDA] } else { vec![0, 1, 2, Q] };
    let mut base = base.clone();
    if !decay {
        base[LAMBDA] = 0.0;
    }
    let free_w = run_lm(x, y, scale, &base, &free, max_iterations)?;
    let w = from_internal(&free_w.full).visibility;
    if w < 1.0 - 1e-6 && free_w.outcome.converged {
        return Some(free_w);
    }
    let mut pinned_base = free_w.full.clone();
    pinned_base[Q] = 0.0;
    let pinned_free: Vec<usize> = free.iter().copied().filter(|&k| k != Q).collect();
    let Some(mut pinned) = run_lm(x, y, scale, &pinned_base, &pinned_free, max_iterations) else {
        return Some(free_w);
    };
    if pinned.cost() > free_w.cost() {
        return Some(free_w);
    }
    // derivative of the cost with respect to the offset (1 - W) / (2 W)
    let (r, j) = residuals_internal(&pinned.full, x, y, scale);
    let offset_col = DVector::from_iterator(x.len(), j.column(0).iter().map(|v| v * pinned.full[0]));
    let g = offset_col.dot(&r);
    let bound = lm::CONVERGED_GTOL * offset_col.norm() * r.norm();
    pinned.outcome.converged = pinned.outcome.converged && g >= -bound;
    Some(pinned)
}

fn natural_uncertainties(p: &FitModelParams, x: &[f64], scale: f64, rss: f64, with_decay: bool) -> FitUncertainties {
    let n = x.len();
    let np = if with_decay { 5 } else { 4 };
    let mut j = DMatrix::zeros(n, np);
    for (i, &xi) in x.iter().enumerate() {
        let u = TAU * p.delta_s * scale * xi + p.phi;
        let c2 = u.cos().powi(2);
        let s2 = (2.0 * u).sin();
        let e = if p.decay.is_finite() { (-xi * xi / p.decay).exp() } else { 1.0 };
        let shape = c2 + (1.0 - p.visibility) / (2.0 * p.visibility);
        j[(i, 0)] = shape * e;
        j[(i, 1)] = -p.amplitude * e * s2 * TAU * scale * xi;
        j[(i, 2)] = -p.amplitude * e * s2;
        j[(i, 3)] = -p.amplitude * e / (2.0 * p.visibility * p.visibility);
        if with_decay {
            j[(i, 4)] = p.amplitude * shape * e * xi * xi / (p.decay * p.decay);
        }
    }
    let dof = n.saturating_sub(np).max(1) as f64;
    let s2 = rss / dof;
    let jtj = j.transpose() * &j;
    let cov = jtj.clone().try_inverse().unwrap_or_else(|| {
        jtj.pseudo_inverse(1e-14).unwrap_or_else(|_| DMatrix::from_element(np, np, f64::NAN))
    });
    let sigma = |k: usize| (s2 * cov[(k, k)]).max(0.0).sqrt();
    FitUncertainties {
        amplitude: sigma(0),
        delta_s: sigma(1),
        phi: sigma(2),
        visibility: sigma(3),
        decay: with_decay.then(|| sigma(4)),
    }
}

fn normalize(mut p: FitModelParams) -> FitModelParams {
    if p.delta_s < 0.0 {
        p.delta_s = -p.delta_s;
        p.phi = -p.phi;
    }
    p.phi = wrap_phase(p.phi);
    p
}

/// Fits `y(x)` with model argument scale `scale`.
pub fn fit_curve(x: &[f64], y: &[f64], scale: f64, init: Option<FitModelParams>, opts: &FitOptions) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(invalid("x and y lengths differ"));
    }
    if x.len() < 8 {
        return Err(invalid(format!("fit needs at least 8 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("trace contains non-finite values"));
    }
    if !(scale.is_finite() && scale != 0.0) {
        return Err(invalid(format!("argument scale must be finite and nonzero, got {scale}")));
    }
    let start = match init {
        Some(p) => {
            p.validate()?;
            p
        }
        None => initial_guess_curve(x, y, scale)?,
    };
    let span = x[x.len() - 1] - x[0];
    let periods = (span * start.modulation_frequency(scale)).abs();
    if periods < 1.5 {
        return Err(Error::TooShort { periods, required: 1.5 });
    }

    let n = x.len();
    let data_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let fail = || Error::FitNonConvergence { iterations: opts.max_iterations };
    let base = to_internal(&start);
    let max_it = opts.max_iterations;

    let off = fit_model(x, y, scale, &base, false, max_it).ok_or_else(fail)?;
    let (best, decay_fitted) = if opts.decay == DecayMode::Off
        || (opts.decay == DecayMode::Auto && (2.0 * off.cost()).sqrt() <= lm::EXACT_RTOL * data_norm)
    {
        (off, false)
    } else {
        // start from the guess and from the decay-free optimum
        let mut from_off = off.full.clone();
        from_off[LAMBDA] = 0.0;
        let on = match (fit_model(x, y, scale, &base, true, max_it), fit_model(x, y, scale, &from_off, true, max_it)) {
            (Some(a), Some(b)) => Some(if b.cost() < a.cost() { b } else { a }),
            (a, b) => a.or(b),
        };
        match on {
            Some(on) if on.full[LAMBDA] > 0.0 => {
                let (rss0, rss1) = (2.0 * off.cost(), 2.0 * on.cost());
                let f = if rss1 > 0.0 { (rss0 - rss1) / (rss1 / n.saturating_sub(5).max(1) as f64) } else { f64::INFINITY };
                if opts.decay == DecayMode::On || f > opts.f_threshold {
                    (on, true)
                } else {
                    (off, false)
                }
            }
            // a growing or failed envelope falls back to no decay
            _ => (off, false),
        }
    };

    let outcome = &best.outcome;
    if !outcome.converged && outcome.iterations >= max_it {
        return Err(fail());
    }
    let params = normalize(from_internal(&best.full));
    let rss = 2.0 * outcome.cost();
    let uncertainties = natural_uncertainties(&params, x, scale, rss, decay_fitted);
    Ok(FitResult {
        params,
        uncertainties,
        residual_norm: rss.sqrt(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        decay_fitted,
        points: n,
        scale,
        cost_history: best.outcome.cost_history,
    })
}

/// Fits one channel of a modulation trace.
pub fn fit_trace(trace: &ModulationTrace, channel: Channel, init: Option<FitModelParams>, opts: &FitOptions) -> Result<FitResult> {
    trace.validate()?;
    fit_curve(&trace.x, trace.channel(channel), trace.argument_scale()?, init, opts)
}

/// Initial guess for one channel of a trace.
pub fn initial_guess(trace: &ModulationTrace, channel: Channel) -> Result<FitModelParams> {
    trace.validate()?;
    initial_guess_curve(&trace.x, trace.channel(channel), trace.argument_scale()?)
}

/// Model samples with additive Gaussian noise of standard deviation
/// `rel_sigma * A`, reproducible from `seed`.
pub fn synthesize(p: &FitModelParams, x: &[f64], scale: f64, rel_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    if !(rel_sigma >= 0.0 && rel_sigma.is_finite()) {
        return Err(invalid(format!("noise level must be non-negative, got {rel_sigma}")));
    }
    let clean = x.iter().map(|&t| model_value(p, t, scale));
    if rel_sigma == 0.0 {
        return Ok(clean.collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, rel_sigma * p.amplitude.abs()).map_err(|e| invalid(e.to_string()))?;
    Ok(clean.map(|v| v + normal.sample(&mut rng)).collect())
}
