//! Mechanical susceptibilities.
//!
//! Convention: `χ(ω) = 1/(m(ω_m² − ω² + i·d(ω)))` with `d > 0`, so `Im χ ≤ 0`
//! for every `f > 0`. The optical spring enters in series feedback,
//! `χ_eff = χ/(1 + K·χ)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{Damping, MechanicalMode, MechanicalModel};

pub type Susceptibility = Complex64;

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be > 0, got {f}")))
    }
}

fn oscillator(mode: &MechanicalMode, f: f64, dissipation: f64) -> Susceptibility {
    let w = 2.0 * PI * f;
    let wm = mode.omega_m();
    1.0 / (mode.modal_mass * Complex64::new(wm * wm - w * w, dissipation))
}

pub fn structural_susceptibility(mode: &MechanicalMode, f: f64) -> Result<Susceptibility> {
    check_frequency(f)?;
    let wm = mode.omega_m();
    Ok(oscillator(mode, f, wm * wm / mode.q))
}

pub fn viscous_susceptibility(mode: &MechanicalMode, f: f64) -> Result<Susceptibility> {
    check_frequency(f)?;
    let w = 2.0 * PI * f;
    Ok(oscillator(mode, f, w * mode.omega_m() / mode.q))
}

/// Susceptibility under the mode's own damping law.
pub fn mode_susceptibility(mode: &MechanicalMode, f: f64) -> Result<Susceptibility> {
    match mode.damping {
        Damping::Structural => structural_susceptibility(mode, f),
        Damping::Viscous => viscous_susceptibility(mode, f),
    }
}

/// `Σ c_i² χ_i`: the response at the optical spot of all modes together.
pub fn total_susceptibility(model: &MechanicalModel, f: f64) -> Result<Susceptibility> {
    model.iter().try_fold(Complex64::new(0.0, 0.0), |acc, (mode, c)| {
        Ok(acc + c * c * mode_susceptibility(mode, f)?)
    })
}

pub fn effective_susceptibility(chi: Susceptibility, k: Complex64) -> Susceptibility {
    if k == Complex64::new(0.0, 0.0) {
        return chi;
    }
    chi / (1.0 + k * chi)
}

/// Frequency in `[f_lo, f_hi]` minimizing `|1 + K(f)·χ(f)|`.
///
/// A dense log scan locates the basin, golden-section search refines it.
pub fn closed_loop_resonance<F>(
    model: &MechanicalModel,
    spring: F,
    f_lo: f64,
    f_hi: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
{
    check_frequency(f_lo)?;
    if !(f_hi > f_lo) {
        return Err(Error::Domain(format!("empty search range [{f_lo}, {f_hi}]")));
    }
    let cost = |f: f64| -> Result<f64> { Ok((1.0 + spring(f) * total_susceptibility(model, f)?).norm()) };

    const SCAN: usize = 4000;
    let ratio = (f_hi / f_lo).ln();
    let at = |k: usize| f_lo * (ratio * k as f64 / SCAN as f64).exp();
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=SCAN {
        let v = cost(at(k))?;
        if v < best.1 {
            best = (k, v);
        }
    }
    let mut a = at(best.0.saturating_sub(1)).ln();
    let mut b = at((best.0 + 1).min(SCAN)).ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut c1 = cost(x1.exp())?;
    let mut c2 = cost(x2.exp())?;
    for _ in 0..80 {
        if c1 < c2 {
            b = x2;
            x2 = x1;
            c2 = c1;
            x1 = b - inv_phi * (b - a);
            c1 = cost(x1.exp())?;
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + inv_phi * (b - a);
            c2 = cost(x2.exp())?;
        }
    }
    Ok((0.5 * (a + b)).exp())
}
