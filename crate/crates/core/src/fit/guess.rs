//! Starting values from extrema of the trace.

use std::f64::consts::PI;

use super::{wrap_phase, FitModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub index: usize,
    /// Position refined by a parabola through the neighbours.
    pub x: f64,
    pub y: f64,
}

/// Alternating maxima and minima that stand out by more than `delta`.
pub fn find_extrema(x: &[f64], y: &[f64], delta: f64) -> Vec<Extremum> {
    let mut out = Vec::new();
    if y.is_empty() {
        return out;
    }
    let (mut mx, mut mxi) = (y[0], 0);
    let (mut mn, mut mni) = (y[0], 0);
    let mut looking: Option<ExtremumKind> = None;
    for (i, &v) in y.iter().enumerate() {
        if v > mx {
            mx = v;
            mxi = i;
        }
        if v < mn {
            mn = v;
            mni = i;
        }
        match looking {
            None => {
                if v < mx - delta {
                    out.push(refine(x, y, ExtremumKind::Max, mxi));
                    looking = Some(ExtremumKind::Min);
                    mn = v;
                    mni = i;
                } else if v > mn + delta {
                    out.push(refine(x, y, ExtremumKind::Min, mni));
                    looking = Some(ExtremumKind::Max);
                    mx = v;
                    mxi = i;
                }
            }
            Some(ExtremumKind::Max) => {
                if v < mx - delta {
                    out.push(refine(x, y, ExtremumKind::Max, mxi));
                    looking = Some(ExtremumKind::Min);
                    mn = v;
                    mni = i;
                }
            }
            Some(ExtremumKind::Min) => {
                if v > mn + delta {
                    out.push(refine(x, y, ExtremumKind::Min, mni));
                    looking = Some(ExtremumKind::Max);
                    mx = v;
                    mxi = i;
                }
            }
        }
    }
    // the trailing extremum counts if the trace has moved away from it by
    // at least half the hysteresis
    let last = y.len() - 1;
    match looking {
        Some(ExtremumKind::Max) if mxi < last && mx - y[last] > 0.5 * delta => {
            out.push(refine(x, y, ExtremumKind::Max, mxi))
        }
        Some(ExtremumKind::Min) if mni < last && y[last] - mn > 0.5 * delta => {
            out.push(refine(x, y, ExtremumKind::Min, mni))
        }
        _ => {}
    }
    out
}

fn refine(x: &[f64], y: &[f64], kind: ExtremumKind, i: usize) -> Extremum {
    let mut e = Extremum { kind, index: i, x: x[i], y: y[i] };
    if i == 0 || i + 1 >= y.len() {
        return e;
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curv = (d2 - d1) / (x2 - x0);
    if curv == 0.0 || !curv.is_finite() {
        return e;
    }
    // vertex of the parabola through the three points
    let xv = 0.5 * (x0 + x1) - d1 / (2.0 * curv);
    if xv > x0 && xv < x2 {
        let yv = y1 + d1 * (xv - x1) + curv * (xv - x0) * (xv - x1);
        e.x = xv;
        e.y = yv;
    }
    e
}

/// Guess for `y(x)` with model argument `2 pi delta_s scale x + phi`.
pub fn initial_guess_curve(x: &[f64], y: &[f64], scale: f64) -> Result<FitModelParams> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 points with matching x and y".into()));
    }
    if !(scale.is_finite() && scale != 0.0) {
        return Err(Error::InvalidInput(format!("argument scale must be finite and nonzero, got {scale}")));
    }
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 1e-12 * max.abs().max(min.abs())) || range == 0.0 {
        return Err(Error::NotModulated("trace is constant".into()));
    }
    let ext = find_extrema(x, y, 0.25 * range);
    let last = x.len() - 1;
    // end points are not trusted as extrema: the trace may start mid-slope
    let interior: Vec<&Extremum> = ext.iter().filter(|e| e.index != 0 && e.index != last).collect();
    if interior.len() < 2 {
        return Err(Error::TooShort { periods: 0.5 * interior.len() as f64, required: 1.5 });
    }
    let half_period = (interior[interior.len() - 1].x - interior[0].x) / (interior.len() - 1) as f64;
    let f_mod = 1.0 / (2.0 * half_period);
    let delta_s = f_mod / (2.0 * scale.abs());

    let maxima: Vec<&Extremum> = ext.iter().filter(|e| e.kind == ExtremumKind::Max).collect();
    let minima: Vec<&Extremum> = ext.iter().filter(|e| e.kind == ExtremumKind::Min).collect();
    let first_max = maxima.iter().find(|e| e.index != 0 && e.index != last).unwrap_or(&maxima[0]);
    let first_min = minima.iter().find(|e| e.index != 0 && e.index != last).unwrap_or(&minima[0]);
    let phi = wrap_phase(-PI * f_mod * first_max.x);

    // Gaussian envelope: ln h = ln h0 - x^2 / C over successive maxima
    let decay = envelope_decay(&maxima).unwrap_or(f64::INFINITY);
    let undo = |e: &Extremum| if decay.is_finite() { e.y * (e.x * e.x / decay).exp() } else { e.y };
    let hi = undo(first_max);
    let lo = undo(first_min).max(0.0);
    let amplitude = hi - lo;
    let visibility = ((hi - lo) / (hi + lo)).clamp(0.02, 0.999);

    Ok(FitModelParams {
        amplitude,
        delta_s: if scale < 0.0 { -delta_s } else { delta_s },
        phi,
        visibility,
        decay,
    })
}

fn envelope_decay(maxima: &[&Extremum]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = maxima.iter().filter(|e| e.y > 0.0).map(|e| (e.x * e.x, e.y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}
