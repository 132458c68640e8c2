//! Sweeps of the Stark pulse, modulation metrics and Zeeman-branch arithmetic.

use rayon::prelude::*;

use crate::echo::{EchoEngine, Observable, StarkPulse};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_curve, initial_guess_curve, FitOptions, FitResult};
use crate::units::khz_to_angular;

/// Static field settings. The applied shift is `shift_coeff * voltage / thickness` kHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarkConfig {
    /// kHz per V/cm
    pub shift_coeff: f64,
    /// V
    pub voltage: f64,
    /// cm
    pub thickness: f64,
}

impl StarkConfig {
    pub fn new(shift_coeff: f64, voltage: f64, thickness: f64) -> Result<Self> {
        let c = StarkConfig { shift_coeff, voltage, thickness };
        c.validate()?;
        Ok(c)
    }

    /// Unit voltage and thickness with the given applied shift in MHz.
    pub fn from_shift_mhz(shift_mhz: f64) -> Self {
        StarkConfig { shift_coeff: 1e3 * shift_mhz, voltage: 1.0, thickness: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(invalid(format!("plate thickness must be positive, got {}", self.thickness)));
        }
        if !(self.shift_coeff.is_finite() && self.voltage.is_finite()) {
            return Err(invalid("Stark coefficient and voltage must be finite"));
        }
        Ok(())
    }

    /// V/cm
    pub fn field(&self) -> f64 {
        self.voltage / self.thickness
    }

    /// kHz
    pub fn applied_shift_khz(&self) -> f64 {
        self.shift_at_voltage_khz(self.voltage)
    }

    pub fn shift_at_voltage_khz(&self, voltage: f64) -> f64 {
        self.shift_coeff * voltage / self.thickness
    }

    /// rad/us
    pub fn applied_shift(&self) -> f64 {
        khz_to_angular(self.applied_shift_khz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAxis {
    /// x is the field on-time in us.
    OnTime,
    /// x is the plate voltage in V at a fixed on-time.
    Voltage,
    /// x is the field in V/cm at a fixed on-time.
    Field,
}

impl TraceAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceAxis::OnTime => "on_time",
            TraceAxis::Voltage => "voltage",
            TraceAxis::Field => "field",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            TraceAxis::OnTime => "us",
            TraceAxis::Voltage => "V",
            TraceAxis::Field => "V/cm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "on_time" => Ok(TraceAxis::OnTime),
            "voltage" => Ok(TraceAxis::Voltage),
            "field" => Ok(TraceAxis::Field),
            _ => Err(invalid(format!("unknown axis {s:?}; expected on_time, voltage or field"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Parallel,
    Perp,
    Total,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Parallel, Channel::Perp, Channel::Total];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Parallel => "parallel",
            Channel::Perp => "perp",
            Channel::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Channel::Parallel),
            "perp" => Ok(Channel::Perp),
            "total" => Ok(Channel::Total),
            _ => Err(invalid(format!("unknown channel {s:?}; expected parallel, perp or total"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub stark: StarkConfig,
    /// Fixed on-time in us for voltage and field axes.
    pub on_time: Option<f64>,
    /// Free-form provenance (physics inputs, shots, wait time).
    pub extra: Vec<(String, String)>,
}

impl TraceMeta {
    pub fn new(stark: StarkConfig) -> Self {
        TraceMeta { stark, on_time: None, extra: Vec::new() }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Echo observable versus on-time, voltage or field in three channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTrace {
    pub axis: TraceAxis,
    pub x: Vec<f64>,
    pub parallel: Vec<f64>,
    pub perp: Vec<f64>,
    pub total: Vec<f64>,
    pub meta: TraceMeta,
}

impl ModulationTrace {
    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.parallel.len() != n || self.perp.len() != n || self.total.len() != n {
            return Err(invalid("trace columns have different lengths"));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("trace x values must be finite"));
        }
        if let Some(i) = self.x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(invalid(format!("trace x is not strictly increasing at row {}", i + 1)));
        }
        for ch in Channel::ALL {
            if let Some(i) = self.channel(ch).iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid(format!("{} intensity at row {i} is negative or non-finite", ch.as_str())));
            }
        }
        self.meta.stark.validate()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn channel(&self, ch: Channel) -> &[f64] {
        match ch {
            Channel::Parallel => &self.parallel,
            Channel::Perp => &self.perp,
            Channel::Total => &self.total,
        }
    }

    /// Factor `g` such that the model argument is `2 pi delta_s g x`.
    pub fn argument_scale(&self) -> Result<f64> {
        let s = &self.meta.stark;
        let fixed_on_time = || {
            self.meta
                .on_time
                .filter(|t| *t > 0.0)
                .ok_or_else(|| invalid(format!("{} axis needs a positive fixed on-time", self.axis.as_str())))
        };
        let g = match self.axis {
            TraceAxis::OnTime => s.voltage / s.thickness * 1e-3,
            TraceAxis::Voltage => fixed_on_time()? / s.thickness * 1e-3,
            TraceAxis::Field => fixed_on_time()? * 1e-3,
        };
        if g == 0.0 || !g.is_finite() {
            return Err(Error::NotModulated("applied field is zero".into()));
        }
        Ok(g)
    }
}

/// What to sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanAxis {
    OnTime { start: f64, stop: f64 },
    Voltage { start: f64, stop: f64, on_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub observable: Observable,
    /// Delay of the Stark window after the end of the first pulse, us.
    pub window_start: f64,
    /// Minimum clearance before the second pulse, us.
    pub guard: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { observable: Observable::Peak, window_start: 0.0, guard: 0.0 }
    }
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k + 1 == n { stop } else { start + (stop - start) * k as f64 / (n - 1) as f64 })
        .collect()
}

/// Sweeps `axis` over `samples` evenly spaced points. Samples are simulated
/// in parallel and returned in axis order.
pub fn scan(engine: &EchoEngine, stark: &StarkConfig, axis: &ScanAxis, samples: usize, opts: &ScanOptions) -> Result<ModulationTrace> {
    stark.validate()?;
    if samples < 2 {
        return Err(invalid(format!("a scan needs at least 2 samples, got {samples}")));
    }
    let (start, stop) = match *axis {
        ScanAxis::OnTime { start, stop } | ScanAxis::Voltage { start, stop, .. } => (start, stop),
    };
    if !(start.is_finite() && stop.is_finite() && stop > start) {
        return Err(invalid(format!("scan range must satisfy start < stop, got [{start}, {stop}]")));
    }
    let x = linspace(start, stop, samples);
    let pulses: Vec<StarkPulse> = x
        .iter()
        .map(|&v| {
            let (t_on, shift_khz) = match *axis {
                ScanAxis::OnTime { .. } => (v, stark.applied_shift_khz()),
                ScanAxis::Voltage { on_time, .. } => (on_time, stark.shift_at_voltage_khz(v)),
            };
            StarkPulse { t_on, shift: khz_to_angular(shift_khz), window_start: opts.window_start, guard: opts.guard }
        })
        .collect();
    let bad: Vec<usize> =
        pulses.iter().enumerate().filter(|(_, p)| p.validate(engine.sequence()).is_err()).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::GuardViolation { indices: bad });
    }

    let values: Vec<(f64, f64, f64)> = pulses
        .par_iter()
        .map(|p| {
            let obs = engine.simulate(p)?;
            let o = opts.observable;
            Ok((obs.parallel_summary.value(o), obs.perp_summary.value(o), obs.total_summary.value(o)))
        })
        .collect::<Result<_>>()?;

    let mut meta = TraceMeta::new(*stark);
    let axis_kind = match *axis {
        ScanAxis::OnTime { .. } => TraceAxis::OnTime,
        ScanAxis::Voltage { on_time, .. } => {
            meta.on_time = Some(on_time);
            TraceAxis::Voltage
        }
    };
    Ok(ModulationTrace {
        axis: axis_kind,
        x,
        parallel: values.iter().map(|v| v.0).collect(),
        perp: values.iter().map(|v| v.1).collect(),
        total: values.iter().map(|v| v.2).collect(),
        meta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationMetrics {
    /// Cycles per x-unit (MHz for on-time traces).
    pub frequency: f64,
    pub visibility: f64,
    /// rad
    pub phase: f64,
    /// x-units squared; infinite without decay.
    pub decay: f64,
    /// kHz per V/cm
    pub delta_s: f64,
    pub fit: FitResult,
}

/// Frequency, visibility, phase and decay of one channel. The extrema-based
/// estimate seeds the model fit, which refines it.
pub fn modulation_metrics(trace: &ModulationTrace, channel: Channel, opts: &FitOptions) -> Result<ModulationMetrics> {
    trace.validate()?;
    let y = trace.channel(channel);
    let scale = trace.argument_scale()?;
    let guess = initial_guess_curve(&trace.x, y, scale)?;
    let span = trace.x[trace.len() - 1] - trace.x[0];
    let periods = (span * guess.modulation_frequency(scale)).abs();
    if periods < 1.5 {
        return Err(Error::TooShort { periods, required: 1.5 });
    }
    let fit = fit_curve(&trace.x, y, scale, Some(guess), opts)?;
    Ok(ModulationMetrics {
        frequency: fit.modulation_frequency(),
        visibility: fit.params.visibility,
        phase: fit.params.phi,
        decay: fit.params.decay,
        delta_s: fit.params.delta_s,
        fit,
    })
}

/// `(max - min) / (max + min)` of the samples.
pub fn measured_visibility(y: &[f64]) -> f64 {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / (max + min)
}

/// Stark shifts of the two Zeeman branches, kHz/(V/cm). The convention is
/// `upper = delta_o + delta_g`, so `delta_g` carries a sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeemanBranchShifts {
    pub delta_o: f64,
    pub delta_g: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ZeemanBranchShifts {
    pub fn from_branches(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || upper < 0.0 {
            return Err(invalid("branch shifts must be finite magnitudes"));
        }
        Ok(ZeemanBranchShifts { delta_o: 0.5 * (lower + upper), delta_g: 0.5 * (upper - lower), lower, upper })
    }

    pub fn from_components(delta_o: f64, delta_g: f64) -> Result<Self> {
        if !(delta_o.is_finite() && delta_g.is_finite()) {
            return Err(invalid("Stark and g-shift components must be finite"));
        }
        let (lower, upper) = (delta_o - delta_g, delta_o + delta_g);
        if lower < 0.0 || upper < 0.0 {
            return Err(invalid("components give a negative branch shift"));
        }
        Ok(ZeemanBranchShifts { delta_o, delta_g, lower, upper })
    }
}

/// `kappa * B^2` for each field value.
pub fn gshift_vs_field(kappa: f64, b_values: &[f64]) -> Result<Vec<f64>> {
    if !kappa.is_finite() {
        return Err(invalid("kappa must be finite"));
    }
    Ok(b_values.iter().map(|b| kappa * b * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Relaxation;
    use crate::echo::{DetectionBasis, EchoSequence, EchoWindow, EnsembleSpec};
    use crate::moments::{CVec3, DipoleSet, LightField, Vec3};
    use crate::units::mhz_to_angular;
    use proptest::prelude::*;

    fn engine(ens: EnsembleSpec) -> EchoEngine {
        let seq = EchoSequence::with_areas(mhz_to_angular(1.0), 1.0, 6.0).unwrap();
        let dip = DipoleSet::electric(CVec3::real(mhz_to_angular(1.0), 0.0, 0.0), 1.0).unwrap();
        let light = LightField::new(CVec3::real(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap();
        EchoEngine::new(seq, ens, dip, light, DetectionBasis::linear_xy(), Relaxation::default(), EchoWindow::default())
            .unwrap()
    }

    fn ulps_close(a: f64, b: f64, ulps: f64) -> bool {
        (a - b).abs() <= ulps * f64::EPSILON * a.abs().max(b.abs())
    }

    #[test]
    fn zero_shift_gives_constant_trace() {
        let e = engine(EnsembleSpec::flat_mhz(40.0, 601));
        let stark = StarkConfig::new(0.0, 10.0, 0.5).unwrap();
        let t = scan(&e, &stark, &ScanAxis::OnTime { start: 0.1, stop: 4.0 }, 9, &ScanOptions::default()).unwrap();
        assert!(t.parallel.iter().all(|v| (v - t.parallel[0]).abs() <= 1e-12 * t.parallel[0]));
        assert!(matches!(modulation_metrics(&t, Channel::Parallel, &FitOptions::default()), Err(Error::NotModulated(_))));
    }

    #[test]
    fn guard_violations_are_listed() {
        let e = engine(EnsembleSpec::flat_mhz(40.0, 601));
        let stark = StarkConfig::from_shift_mhz(0.5);
        let err = scan(&e, &stark, &ScanAxis::OnTime { start: 5.0, stop: 7.0 }, 5, &ScanOptions::default()).unwrap_err();
        match err {
            Error::GuardViolation { indices } => assert_eq!(indices, vec![2, 3, 4]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scan_is_ordered_and_valid() {
        let e = engine(EnsembleSpec::flat_mhz(40.0, 601));
        let stark = StarkConfig::from_shift_mhz(0.5);
        let t = scan(&e, &stark, &ScanAxis::OnTime { start: 0.0, stop: 3.0 }, 31, &ScanOptions::default()).unwrap();
        t.validate().unwrap();
        assert_eq!(t.x[0], 0.0);
        assert_eq!(t.x[30], 3.0);
        // serial evaluation of one sample matches its slot
        let obs = e.simulate(&StarkPulse::new(t.x[7], stark.applied_shift())).unwrap();
        assert_eq!(obs.parallel_summary.peak, t.parallel[7]);
    }

    #[test]
    fn frequency_is_linear_in_voltage() {
        let e = engine(EnsembleSpec::flat_mhz(80.0, 1201));
        let mut pts = Vec::new();
        for v in [7.0, 10.0, 13.0] {
            let stark = StarkConfig::new(15.35, v, 0.515).unwrap();
            let t = scan(&e, &stark, &ScanAxis::OnTime { start: 0.0, stop: 5.5 }, 61, &ScanOptions::default()).unwrap();
            let m = modulation_metrics(&t, Channel::Parallel, &FitOptions::default()).unwrap();
            pts.push((v, m.frequency, m.fit.modulation_frequency_sigma()));
        }
        // line through the origin: frequency / V constant within uncertainty
        let slope = 2.0 * 15.35 / 0.515 * 1e-3;
        for (v, f, sigma) in pts {
            assert!((f - slope * v).abs() <= (3.0 * sigma).max(1e-3 * f), "V {v}: {f} vs {}", slope * v);
        }
    }

    #[test]
    fn synthetic_cos2_metrics() {
        let stark = StarkConfig::from_shift_mhz(0.25);
        let x: Vec<f64> = (0..80).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|t| (std::f64::consts::TAU * 0.25 * t).cos().powi(2)).collect();
        let t = ModulationTrace {
            axis: TraceAxis::OnTime,
            x: x.clone(),
            parallel: y.clone(),
            perp: vec![0.0; 80],
            total: y,
            meta: TraceMeta::new(stark),
        };
        let m = modulation_metrics(&t, Channel::Parallel, &FitOptions::default()).unwrap();
        assert!((m.frequency - 0.5).abs() < 1e-9);
        assert!((m.visibility - 1.0).abs() < 1e-9);
        assert!(m.phase.abs() < 1e-9);
        let short = ModulationTrace {
            x: x[..20].to_vec(),
            parallel: t.parallel[..20].to_vec(),
            perp: vec![0.0; 20],
            total: t.parallel[..20].to_vec(),
            ..t.clone()
        };
        assert!(matches!(modulation_metrics(&short, Channel::Parallel, &FitOptions::default()), Err(Error::TooShort { .. })));
        assert!(matches!(modulation_metrics(&t, Channel::Perp, &FitOptions::default()), Err(Error::NotModulated(_))));
    }

    #[test]
    fn zeeman_examples() {
        let z = ZeemanBranchShifts::from_branches(1.61, 2.12).unwrap();
        assert!(ulps_close(z.delta_o, 1.865, 2.0), "{}", z.delta_o);
        assert!(ulps_close(z.delta_g, 0.255, 2.0), "{}", z.delta_g);
        let flat = ZeemanBranchShifts::from_components(1.2, 0.0).unwrap();
        assert_eq!((flat.lower, flat.upper), (1.2, 1.2));
        let g = gshift_vs_field(10.0, &[0.0, 0.3, 0.35]).unwrap();
        assert_eq!(g[0], 0.0);
        assert!(ulps_close(g[1], 0.9, 2.0) && ulps_close(g[2], 1.225, 2.0), "{g:?}");
        assert!(gshift_vs_field(f64::NAN, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn zeeman_round_trip(lower in 0.0f64..50.0, upper in 0.0f64..50.0) {
            let z = ZeemanBranchShifts::from_branches(lower, upper).unwrap();
            let back = ZeemanBranchShifts::from_components(z.delta_o, z.delta_g).unwrap();
            let tol = 4.0 * f64::EPSILON * lower.max(upper);
            prop_assert!((back.lower - lower).abs() <= tol && (back.upper - upper).abs() <= tol);
        }

        #[test]
        fn gshift_quadruples(kappa in -20.0f64..20.0, b in 0.0f64..2.0) {
            let g = gshift_vs_field(kappa, &[b, 2.0 * b]).unwrap();
            prop_assert!((g[1] - 4.0 * g[0]).abs() <= 1e-12 * g[1].abs().max(1e-300));
        }
    }
}
