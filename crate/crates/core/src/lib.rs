//! Displacement-noise budget for a detuned optomechanical Fabry-Perot cavity.
//!
//! The crate models a single-mode cavity whose input coupler is a suspended
//! micro-mirror and assembles its displacement noise from five sources:
//! thermal (fluctuation-dissipation), quantum radiation pressure, shot noise,
//! detector dark noise and classical intensity noise. On top of the forward
//! model sit the analyses used to read a budget: band attribution, power
//! scans, slope fits, dominance maps, the free-mass standard quantum limit and
//! a thermometry check.
//!
//! Conventions used throughout:
//! - Fourier convention `e^{+iωt}`, so a mechanical susceptibility is
//!   `χ(ω) = 1/(m(ω_m² − ω² + i·d))` with `d > 0` and `Im χ ≤ 0`.
//! - Spectral densities are single-sided. Amplitude spectra are in m/√Hz.
//! - Detuning is in units of the cavity HWHM; positive detuning means the
//!   laser sits above the cavity resonance (blue), which gives a restoring
//!   optical spring.
//! - Budget spectra are *calibrated* displacement: force noises are referred
//!   through the bare mechanical susceptibility, readout noises through the
//!   spring-suppressed signal transfer function. See [`optics`].

// `!(a > b)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod calibration;
pub mod error;
pub mod io;
pub mod mechanics;
pub mod optics;
pub mod params;
pub mod scenario;
pub mod spectrum;
pub mod thermal;

pub use error::{Error, Result};
pub use params::{
    CavityConfig, Damping, FrequencyGrid, LoadedConfig, MechanicalMode, MechanicalModel,
    NoiseParams, OperatingPoint, PhysicalConstants, Rin,
};
pub use spectrum::NoiseSpectrum;
