//! Error-signal calibration chain.
//!
//! A laser-frequency shift `δν` is equivalent to a cavity length change
//! `δx = L·δν/ν`; the measured response of the error signal to it gives the
//! displacement-to-detector transfer function used to calibrate spectra.

use num_complex::Complex64;

use crate::budget::NoiseBudget;
use crate::error::{Error, Result};
use crate::optics::{signal_transfer, LoopSuppression};
use crate::params::{CavityConfig, FrequencyGrid, MechanicalModel, OperatingPoint, HBAR};
use crate::spectrum::NoiseSpectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationChain {
    pub length: f64,
    pub laser_frequency: f64,
    pub servo: LoopSuppression,
    /// Detector gain, V/W.
    pub detector_gain: f64,
}

impl CalibrationChain {
    pub fn new(length: f64, laser_frequency: f64, servo: LoopSuppression, detector_gain: f64) -> Result<Self> {
        for (what, v) in [("calibration length", length), ("laser frequency", laser_frequency)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(what, format!("must be > 0, got {v}")));
            }
        }
        if !(detector_gain.is_finite() && detector_gain > 0.0) {
            return Err(Error::invalid("detector gain", format!("must be > 0, got {detector_gain}")));
        }
        if !(servo.unity_gain_hz.is_finite() && servo.unity_gain_hz >= 0.0) {
            return Err(Error::invalid("loop unity-gain frequency", "must be >= 0"));
        }
        Ok(Self {
            length,
            laser_frequency,
            servo,
            detector_gain,
        })
    }

    pub fn for_cavity(config: &CavityConfig, servo: LoopSuppression, detector_gain: f64) -> Result<Self> {
        Self::new(config.length, config.laser_frequency(), servo, detector_gain)
    }
}

pub fn frequency_shift_to_displacement(dnu: f64, chain: &CalibrationChain) -> f64 {
    chain.length * dnu / chain.laser_frequency
}

/// Detector-referred amplitude spectrum, V/√Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpectrum {
    pub grid: FrequencyGrid,
    pub asd: Vec<f64>,
}

/// Displacement-to-detector transfer (V/m) on the grid: cavity response,
/// readout quadrature, optical spring, detector gain and loop suppression.
pub fn transfer_function(
    config: &CavityConfig,
    op: &OperatingPoint,
    model: &MechanicalModel,
    chain: &CalibrationChain,
    grid: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    // one quadrature unit of the reflected field carries √(2ħω₀·P_refl) of power
    let watts = chain.detector_gain * (2.0 * HBAR * config.omega0() * op.p_refl).sqrt();
    grid.points()
        .iter()
        .map(|&f| Ok(signal_transfer(config, op, model, &chain.servo, f)? * watts))
        .collect()
}

pub fn synthesize_error_signal(budget: &NoiseBudget, tf: &[Complex64]) -> Result<DetectorSpectrum> {
    let total = budget.total();
    if tf.len() != total.asd().len() {
        return Err(Error::GridMismatch(format!(
            "transfer function has {} points, budget {}",
            tf.len(),
            total.asd().len()
        )));
    }
    Ok(DetectorSpectrum {
        grid: budget.grid().clone(),
        asd: total.asd().iter().zip(tf).map(|(x, t)| x * t.norm()).collect(),
    })
}

/// `raw/|tf|`, refusing to divide where `|tf|` falls below `floor`.
pub fn apply_calibration(raw: &DetectorSpectrum, tf: &[Complex64], floor: f64) -> Result<NoiseSpectrum> {
    if tf.len() != raw.asd.len() {
        return Err(Error::GridMismatch(format!(
            "transfer function has {} points, spectrum {}",
            tf.len(),
            raw.asd.len()
        )));
    }
    let mut asd = Vec::with_capacity(tf.len());
    for ((&f, &r), t) in raw.grid.points().iter().zip(&raw.asd).zip(tf) {
        let magnitude = t.norm();
        if !(magnitude > floor) || magnitude == 0.0 {
            return Err(Error::Calibration {
                frequency: f,
                magnitude,
                floor,
            });
        }
        asd.push(r / magnitude);
    }
    NoiseSpectrum::new("calibrated", raw.grid.clone(), asd)
}
