//! Fluctuation-dissipation thermal noise.
//!
//! Implementation contract: `S_x(ω) = (4·k_B·T/ω)·Im[−χ(ω)]`, single-sided.

use std::f64::consts::PI;

use crate::budget::band_integrate;
use crate::error::{Error, Result};
use crate::mechanics::mode_susceptibility;
use crate::params::{FrequencyGrid, MechanicalMode, MechanicalModel, K_B};
use crate::spectrum::NoiseSpectrum;

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("temperature must be > 0, got {t}")))
    }
}

fn mode_psd(mode: &MechanicalMode, t: f64, f: f64) -> Result<f64> {
    let w = 2.0 * PI * f;
    Ok(4.0 * K_B * t / w * (-mode_susceptibility(mode, f)?.im))
}

pub fn mode_thermal_asd(mode: &MechanicalMode, t: f64, grid: &FrequencyGrid) -> Result<NoiseSpectrum> {
    check_temperature(t)?;
    let psd = grid
        .points()
        .iter()
        .map(|&f| mode_psd(mode, t, f))
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrum::from_psd(format!("thermal:{}", mode.name), grid.clone(), psd)
}

pub fn total_thermal_asd(model: &MechanicalModel, t: f64, grid: &FrequencyGrid) -> Result<NoiseSpectrum> {
    check_temperature(t)?;
    let mut psd = vec![0.0; grid.len()];
    for (mode, c) in model.iter() {
        for (p, &f) in psd.iter_mut().zip(grid.points()) {
            *p += c * c * mode_psd(mode, t, f)?;
        }
    }
    NoiseSpectrum::from_psd("thermal", grid.clone(), psd)
}

/// Ratio of band-integrated PSDs, `b` over `a`. Where thermal noise
/// dominates, `S_x ∝ T` makes this the temperature ratio.
pub fn infer_temperature_ratio(a: &NoiseSpectrum, b: &NoiseSpectrum, band: (f64, f64)) -> Result<f64> {
    a.same_grid(b)?;
    let ra = band_integrate(a, band)?;
    let rb = band_integrate(b, band)?;
    if ra == 0.0 {
        return Err(Error::band(band, "reference spectrum has zero power"));
    }
    Ok((rb / ra).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Damping;
    use crate::budget::fit_loglog_slope;
    use proptest::prelude::*;

    fn fundamental() -> MechanicalMode {
        MechanicalMode::new("fundamental", 876.0, 16_000.0, 55e-12, Damping::Structural).unwrap()
    }

    fn grid() -> FrequencyGrid {
        FrequencyGrid::log_spaced(100.0, 1e6, 500).unwrap()
    }

    /// The closed form, written out term by term.
    fn closed_form(f: f64, fm: f64, q: f64, m: f64, t: f64) -> f64 {
        let w = 2.0 * PI * f;
        let wm = 2.0 * PI * fm;
        let den = w * m * q * ((wm * wm - w * w).powi(2) + wm.powi(4) / (q * q));
        (4.0 * 1.380649e-23 * t * wm * wm / den).sqrt()
    }

    #[test]
    fn peak_value() {
        let m = fundamental();
        let g = FrequencyGrid::new(vec![876.0]).unwrap();
        let s = mode_thermal_asd(&m, 295.0, &g).unwrap();
        let wm = 2.0 * PI * 876.0;
        let expect = (4.0 * 1.380649e-23 * 295.0 * 16_000.0 / (55e-12 * wm.powi(3))).sqrt();
        assert!((s.asd()[0] / expect - 1.0).abs() < 1e-12);
        assert!((expect - 5.3313e-9).abs() < 0.0001e-9, "{expect}");
    }

    #[test]
    fn matches_closed_form_everywhere() {
        let s = mode_thermal_asd(&fundamental(), 295.0, &grid()).unwrap();
        for (&f, &a) in s.frequencies().iter().zip(s.asd()) {
            let e = closed_form(f, 876.0, 16_000.0, 55e-12, 295.0);
            assert!((a / e - 1.0).abs() < 1e-12, "{f}: {a} vs {e}");
        }
    }

    #[test]
    fn structural_slope() {
        let s = mode_thermal_asd(&fundamental(), 295.0, &grid()).unwrap();
        let k = fit_loglog_slope(&s, (5e3, 9e3)).unwrap();
        assert!((k + 2.5).abs() < 0.05, "{k}");
    }

    #[test]
    fn viscous_slope() {
        let mut m = fundamental();
        m.damping = Damping::Viscous;
        let s = mode_thermal_asd(&m, 295.0, &grid()).unwrap();
        let k = fit_loglog_slope(&s, (1e4, 1e5)).unwrap();
        assert!((k + 2.0).abs() < 0.05, "{k}");
    }

    #[test]
    fn structural_force_noise_falls_as_inverse_frequency() {
        // S_F = S_x/|χ|² = 4k_BT·m·ω_m²/(Q·ω)
        let m = fundamental();
        let sf = |f: f64| {
            let chi = mode_susceptibility(&m, f).unwrap();
            mode_psd(&m, 295.0, f).unwrap() / chi.norm_sqr()
        };
        for f in [200.0, 2e3, 2e4] {
            assert!((sf(f) * f / (sf(10.0 * f) * 10.0 * f) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_temperature_scales_by_sqrt2() {
        let g = grid();
        let a = mode_thermal_asd(&fundamental(), 295.0, &g).unwrap();
        let b = mode_thermal_asd(&fundamental(), 590.0, &g).unwrap();
        for (x, y) in a.asd().iter().zip(b.asd()) {
            assert!((y / x - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_temperature_rejected() {
        assert!(matches!(mode_thermal_asd(&fundamental(), 0.0, &grid()), Err(Error::Domain(_))));
    }

    #[test]
    fn single_mode_total_matches_mode() {
        let g = grid();
        let a = mode_thermal_asd(&fundamental(), 295.0, &g).unwrap();
        let b = total_thermal_asd(&MechanicalModel::single(fundamental()), 295.0, &g).unwrap();
        assert_eq!(a.asd(), b.asd());
    }

    #[test]
    fn two_identical_modes_add_in_quadrature() {
        let g = grid();
        let a = mode_thermal_asd(&fundamental(), 295.0, &g).unwrap();
        let model = MechanicalModel::new(vec![fundamental(), fundamental()], vec![1.0, 1.0]).unwrap();
        let b = total_thermal_asd(&model, 295.0, &g).unwrap();
        for (x, y) in a.asd().iter().zip(b.asd()) {
            assert!((y / x - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn temperature_ratio_cases() {
        let g = grid();
        let model = MechanicalModel::single(fundamental());
        let a = total_thermal_asd(&model, 295.0, &g).unwrap();
        let b = total_thermal_asd(&model, 4.0 * 295.0, &g).unwrap();
        assert!((infer_temperature_ratio(&a, &a, (1e3, 2e3)).unwrap() - 1.0).abs() < 1e-12);
        assert!((infer_temperature_ratio(&a, &b, (1e3, 2e3)).unwrap() - 4.0).abs() < 1e-9);
        let c = a.scaled(1.02).unwrap();
        assert!((infer_temperature_ratio(&a, &c, (1e3, 2e3)).unwrap() - 1.0404).abs() < 1e-9);
    }

    #[test]
    fn temperature_ratio_needs_matching_grids() {
        let a = total_thermal_asd(&MechanicalModel::single(fundamental()), 295.0, &grid()).unwrap();
        let g2 = FrequencyGrid::log_spaced(100.0, 1e6, 100).unwrap();
        let b = total_thermal_asd(&MechanicalModel::single(fundamental()), 295.0, &g2).unwrap();
        assert!(matches!(infer_temperature_ratio(&a, &b, (1e3, 2e3)), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn total_is_permutation_invariant_and_monotone(
            c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, bump in 0.0f64..1.0,
        ) {
            let g = FrequencyGrid::log_spaced(100.0, 1e5, 50).unwrap();
            let m1 = fundamental();
            let m2 = MechanicalMode::new("yaw", 3700.0, 1e5, 1e-10, Damping::Structural).unwrap();
            let ab = total_thermal_asd(&MechanicalModel::new(vec![m1.clone(), m2.clone()], vec![c1, c2]).unwrap(), 295.0, &g).unwrap();
            let ba = total_thermal_asd(&MechanicalModel::new(vec![m2.clone(), m1.clone()], vec![c2, c1]).unwrap(), 295.0, &g).unwrap();
            let up = total_thermal_asd(&MechanicalModel::new(vec![m1, m2], vec![c1 + bump, c2]).unwrap(), 295.0, &g).unwrap();
            for i in 0..g.len() {
                prop_assert!((ab.asd()[i] - ba.asd()[i]).abs() <= 1e-12 * ab.asd()[i]);
                prop_assert!(up.asd()[i] >= ab.asd()[i]);
            }
        }
    }
}
