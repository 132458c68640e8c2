//! Run configuration: a TOML file read with dotted `section.key = value`
//! lines (section headers are accepted too). Unknown keys are rejected.
//!
//! Dipole components are Rabi frequencies in MHz per unit field amplitude;
//! all other frequencies are ordinary MHz or kHz as named. Times are in us.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::Relaxation;
use crate::echo::{DetectionBasis, EchoEngine, EchoSequence, EchoWindow, EnsembleSpec, Observable, ProfileShape};
use crate::error::{Error, Result};
use crate::fit::{DecayMode, FitOptions};
use crate::moments::{rabi_frequency, total_moment, CVec3, DipoleSet, LightField, SubSite, Vec3};
use crate::scan::{Channel, ScanAxis, ScanOptions, StarkConfig};
use crate::units::mhz_to_angular;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipoleSection {
    pub d_re: [f64; 3],
    pub d_im: [f64; 3],
    /// Already includes the n/c factor.
    pub m_re: [f64; 3],
    pub m_im: [f64; 3],
    pub refractive_index: f64,
}

impl Default for DipoleSection {
    fn default() -> Self {
        DipoleSection { d_re: [1.0, 0.0, 0.0], d_im: [0.0; 3], m_re: [0.0; 3], m_im: [0.0; 3], refractive_index: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightSection {
    pub polarization_re: [f64; 3],
    pub polarization_im: [f64; 3],
    pub khat: [f64; 3],
    pub amplitude: f64,
}

impl Default for LightSection {
    fn default() -> Self {
        LightSection { polarization_re: [1.0, 0.0, 0.0], polarization_im: [0.0; 3], khat: [0.0, 0.0, 1.0], amplitude: 1.0 }
    }
}

/// Either explicit durations (`t_pi2` and `t_pi`) or an area scale applied to
/// both pulses, with areas measured for the `+d` sub-site (the `-d` sub-site
/// if the first one does not couple).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub t_pi2: Option<f64>,
    pub t_pi: Option<f64>,
    pub area_scale: Option<f64>,
    pub tau: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        SequenceSection { t_pi2: None, t_pi: None, area_scale: None, tau: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    /// "flat" or "gaussian"
    pub shape: String,
    /// Full width (flat) or FWHM (gaussian)
    pub width_mhz: f64,
    pub count: usize,
    /// Sampled range; defaults to the width (flat) or three FWHM (gaussian).
    pub span_mhz: Option<f64>,
    pub center_mhz: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { shape: "flat".into(), width_mhz: 80.0, count: 1000, span_mhz: None, center_mhz: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationSection {
    pub t1: f64,
    pub t2: f64,
}

impl Default for RelaxationSection {
    fn default() -> Self {
        RelaxationSection { t1: f64::INFINITY, t2: f64::INFINITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarkSection {
    /// kHz per V/cm
    pub shift_coeff: f64,
    pub voltage: f64,
    /// cm
    pub thickness: f64,
    /// Field on-time for `simulate` and for voltage scans, us.
    pub t_on: f64,
    pub window_start: f64,
    pub guard: f64,
}

impl Default for StarkSection {
    fn default() -> Self {
        StarkSection { shift_coeff: 50.0, voltage: 10.0, thickness: 1.0, t_on: 0.0, window_start: 0.0, guard: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub e1_re: [f64; 3],
    pub e1_im: [f64; 3],
    pub e2_re: [f64; 3],
    pub e2_im: [f64; 3],
}

impl Default for DetectionSection {
    fn default() -> Self {
        DetectionSection { e1_re: [1.0, 0.0, 0.0], e1_im: [0.0; 3], e2_re: [0.0, 1.0, 0.0], e2_im: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub half_width: Option<f64>,
    pub samples: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection { half_width: None, samples: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    /// "on_time" (x in us) or "voltage" (x in V)
    pub axis: String,
    pub start: f64,
    pub stop: f64,
    pub samples: usize,
    /// "peak" or "area"
    pub observable: String,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { axis: "on_time".into(), start: 0.0, stop: 4.5, samples: 81, observable: "peak".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// "parallel", "perp" or "total"; used by `fit`
    pub channel: String,
    /// "auto", "on" or "off"
    pub decay: String,
    pub f_threshold: f64,
    pub max_iterations: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { channel: "parallel".into(), decay: "auto".into(), f_threshold: 10.0, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Gaussian noise added to scan traces, relative to each channel's maximum.
    pub rel_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { rel_sigma: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Default destination when `--out` is not given.
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dipole: DipoleSection,
    pub light: LightSection,
    pub sequence: SequenceSection,
    pub ensemble: EnsembleSection,
    pub relaxation: RelaxationSection,
    pub stark: StarkSection,
    pub detection: DetectionSection,
    pub window: WindowSection,
    pub scan: ScanSection,
    pub fit: FitSection,
    pub noise: NoiseSection,
    pub output: OutputSection,
}

/// Where a config came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything a run needs, built and validated from a [`RunConfig`].
pub struct RunSetup {
    pub engine: EchoEngine,
    pub stark: StarkConfig,
    pub t_on: f64,
    pub axis: ScanAxis,
    pub samples: usize,
    pub scan_options: ScanOptions,
    pub fit_options: FitOptions,
    pub channel: Channel,
}

fn cvec(re: [f64; 3], im: [f64; 3]) -> CVec3 {
    CVec3::from_parts(re, im)
}

fn cfg_err(key: &str, e: Error) -> Error {
    Error::Config(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().replace('\n', " ")))
    }

    /// Reads and parses a config file. Validation happens in [`RunConfig::build`].
    pub fn load(path: &Path) -> Result<(RunConfig, Provenance)> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
        let cfg = RunConfig::from_toml_str(&text)?;
        Ok((cfg, Provenance { path: path.display().to_string(), sha256: sha256_hex(&bytes) }))
    }

    /// Canonical form with every key written out, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every setting as `(section.key, value)` in declaration order.
    pub fn flat_entries(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        if let toml::Value::Table(sections) = value {
            for (name, sec) in sections {
                if let toml::Value::Table(keys) = sec {
                    for (k, v) in keys {
                        out.push((format!("{name}.{k}"), v.to_string()));
                    }
                }
            }
        }
        out
    }

    pub fn dipoles(&self) -> Result<DipoleSet> {
        let s = &self.dipole;
        let scale = mhz_to_angular(1.0);
        let d = cvec(s.d_re, s.d_im) * num_complex::Complex64::new(scale, 0.0);
        let m = cvec(s.m_re, s.m_im) * num_complex::Complex64::new(scale, 0.0);
        DipoleSet::new(d, m, s.refractive_index).map_err(|e| cfg_err("dipole", e))
    }

    pub fn light(&self) -> Result<LightField> {
        let s = &self.light;
        let k = Vec3::new(s.khat[0], s.khat[1], s.khat[2]);
        LightField::new(cvec(s.polarization_re, s.polarization_im), k, s.amplitude).map_err(|e| cfg_err("light", e))
    }

    pub fn sequence_for(&self, dip: &DipoleSet, light: &LightField) -> Result<EchoSequence> {
        let s = &self.sequence;
        let seq = match (s.t_pi2, s.t_pi, s.area_scale) {
            (Some(t_pi2), Some(t_pi), None) => EchoSequence::new(t_pi2, t_pi, s.tau),
            (None, None, area) => {
                let mut rabi: f64 = 0.0;
                for site in SubSite::BOTH {
                    if rabi == 0.0 {
                        let mu = total_moment(dip, &light.khat, site)?;
                        rabi = rabi_frequency(&mu, &light.epsilon, light.amplitude)?.norm();
                    }
                }
                EchoSequence::with_areas(rabi, area.unwrap_or(1.0), s.tau)
            }
            (Some(_), Some(_), Some(_)) => {
                return Err(Error::Config("sequence: give either t_pi2/t_pi or area_scale, not both".into()))
            }
            _ => return Err(Error::Config("sequence: t_pi2 and t_pi must be given together".into())),
        };
        seq.map_err(|e| cfg_err("sequence", e))
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec> {
        let s = &self.ensemble;
        let mut spec = match s.shape.as_str() {
            "flat" => EnsembleSpec::flat_mhz(s.width_mhz, s.count),
            "gaussian" => EnsembleSpec::gaussian_mhz(s.width_mhz, s.count),
            other => return Err(Error::Config(format!("ensemble.shape: expected flat or gaussian, got {other:?}"))),
        };
        if spec.shape == ProfileShape::Flat && s.count == 1 {
            spec = EnsembleSpec::single();
        }
        if let Some(span) = s.span_mhz {
            spec.span = mhz_to_angular(span);
        }
        let spec = spec.with_center_mhz(s.center_mhz);
        spec.validate().map_err(|e| cfg_err("ensemble", e))?;
        Ok(spec)
    }

    pub fn stark_config(&self) -> Result<StarkConfig> {
        let s = &self.stark;
        StarkConfig::new(s.shift_coeff, s.voltage, s.thickness).map_err(|e| cfg_err("stark", e))
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        let s = &self.fit;
        let decay: DecayMode = s.decay.parse().map_err(|e| cfg_err("fit.decay", e))?;
        if !(s.f_threshold > 0.0) {
            return Err(Error::Config("fit.f_threshold must be positive".into()));
        }
        if s.max_iterations == 0 {
            return Err(Error::Config("fit.max_iterations must be positive".into()));
        }
        Ok(FitOptions { decay, f_threshold: s.f_threshold, max_iterations: s.max_iterations })
    }

    pub fn channel(&self) -> Result<Channel> {
        Channel::parse(&self.fit.channel).map_err(|e| cfg_err("fit.channel", e))
    }

    pub fn scan_axis(&self) -> Result<ScanAxis> {
        let s = &self.scan;
        match s.axis.as_str() {
            "on_time" => Ok(ScanAxis::OnTime { start: s.start, stop: s.stop }),
            "voltage" => {
                if !(self.stark.t_on > 0.0) {
                    return Err(Error::Config("voltage scans need a positive stark.t_on".into()));
                }
                Ok(ScanAxis::Voltage { start: s.start, stop: s.stop, on_time: self.stark.t_on })
            }
            other => Err(Error::Config(format!("scan.axis: expected on_time or voltage, got {other:?}"))),
        }
    }

    /// Validates every section and constructs the engine.
    pub fn build(&self) -> Result<RunSetup> {
        let dip = self.dipoles()?;
        let light = self.light()?;
        let seq = self.sequence_for(&dip, &light)?;
        let ens = self.ensemble()?;
        let d = &self.detection;
        let detection = DetectionBasis::new(cvec(d.e1_re, d.e1_im), cvec(d.e2_re, d.e2_im)).map_err(|e| cfg_err("detection", e))?;
        let r = &self.relaxation;
        let relaxation = Relaxation::new(r.t1, r.t2).map_err(|e| cfg_err("relaxation", e))?;
        let window = EchoWindow { half_width: self.window.half_width, samples: self.window.samples };
        let engine = EchoEngine::new(seq, ens, dip, light, detection, relaxation, window).map_err(|e| cfg_err("engine", e))?;

        let stark = self.stark_config()?;
        let observable = match self.scan.observable.as_str() {
            "peak" => Observable::Peak,
            "area" => Observable::Area,
            other => return Err(Error::Config(format!("scan.observable: expected peak or area, got {other:?}"))),
        };
        let axis = self.scan_axis()?;
        if self.scan.samples < 2 {
            return Err(Error::Config("scan.samples must be at least 2".into()));
        }
        if !(self.scan.stop > self.scan.start) {
            return Err(Error::Config("scan.stop must exceed scan.start".into()));
        }
        if !(self.noise.rel_sigma >= 0.0 && self.noise.rel_sigma.is_finite()) {
            return Err(Error::Config("noise.rel_sigma must be non-negative".into()));
        }
        let t_on = self.stark.t_on;
        let pulse = crate::echo::StarkPulse {
            t_on,
            shift: stark.applied_shift(),
            window_start: self.stark.window_start,
            guard: self.stark.guard,
        };
        pulse.validate(engine.sequence()).map_err(|e| cfg_err("stark", e))?;
        Ok(RunSetup {
            engine,
            stark,
            t_on,
            axis,
            samples: self.scan.samples,
            scan_options: ScanOptions { observable, window_start: self.stark.window_start, guard: self.stark.guard },
            fit_options: self.fit_options()?,
            channel: self.channel()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let setup = cfg.build().unwrap();
        assert!((setup.stark.applied_shift_khz() - 500.0).abs() < 1e-12);
        assert!((setup.engine.sequence().t_pi - 0.5).abs() < 1e-12);
        assert_eq!(setup.samples, 81);
    }

    #[test]
    fn dotted_and_sectioned_forms_agree() {
        let flat = "ensemble.width_mhz = 40.0\nensemble.count = 800\nscan.axis = \"voltage\"\nstark.t_on = 1.0\n";
        let sect = "[ensemble]\nwidth_mhz = 40.0\ncount = 800\n[scan]\naxis = \"voltage\"\n[stark]\nt_on = 1.0\n";
        assert_eq!(RunConfig::from_toml_str(flat).unwrap(), RunConfig::from_toml_str(sect).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml_str("dipole.q = 1.0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("extra.x = 1.0"), Err(Error::Config(_))));
    }

    #[test]
    fn infinite_relaxation_parses() {
        let cfg = RunConfig::from_toml_str("relaxation.t1 = inf\nrelaxation.t2 = 40.0").unwrap();
        assert!(cfg.relaxation.t1.is_infinite());
        cfg.build().unwrap();
    }

    #[test]
    fn inconsistent_sequence_is_rejected() {
        let cfg = RunConfig::from_toml_str("sequence.t_pi2 = 0.25").unwrap();
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
        let cfg = RunConfig::from_toml_str("sequence.t_pi2 = 0.25\nsequence.t_pi = 0.5\nsequence.area_scale = 0.5").unwrap();
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
    }

    #[test]
    fn area_scale_shortens_both_pulses() {
        let cfg = RunConfig::from_toml_str("sequence.area_scale = 0.25").unwrap();
        let seq = *cfg.build().unwrap().engine.sequence();
        assert!((seq.t_pi - 0.125).abs() < 1e-12 && (seq.t_pi2 - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn voltage_scan_needs_on_time() {
        let cfg = RunConfig::from_toml_str("scan.axis = \"voltage\"").unwrap();
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = RunConfig::from_toml_str("noise.seed = 7\nensemble.span_mhz = 90.0").unwrap();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        let flat = cfg.flat_entries();
        assert!(flat.iter().any(|(k, v)| k == "noise.seed" && v == "7"));
        assert!(flat.iter().any(|(k, _)| k == "dipole.d_re"));
    }
}
