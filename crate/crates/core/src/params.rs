//! Physical constants, configuration types and the TOML config loader.
//!
//! Every type here validates on construction and is immutable afterwards.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics;

/// CODATA 2018 exact/recommended values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Speed of light, m/s.
    pub c: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    k_b: 1.380649e-23,
    hbar: 1.054571817e-34,
    c: 299_792_458.0,
};

pub const K_B: f64 = CODATA.k_b;
pub const HBAR: f64 = CODATA.hbar;
pub const C: f64 = CODATA.c;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Damping {
    /// Frequency-independent loss angle, dissipation term `ω_m²/Q`.
    Structural,
    /// Velocity damping, dissipation term `ω·ω_m/Q`.
    Viscous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalMode {
    pub name: String,
    pub f_m: f64,
    pub q: f64,
    pub modal_mass: f64,
    pub damping: Damping,
    /// Placeholder parameters not pinned by measurement.
    pub uncertain: bool,
}

impl MechanicalMode {
    pub fn new(
        name: impl Into<String>,
        f_m: f64,
        q: f64,
        modal_mass: f64,
        damping: Damping,
    ) -> Result<Self> {
        let name = name.into();
        positive(&format!("mode '{name}' f_m"), f_m)?;
        positive(&format!("mode '{name}' Q"), q)?;
        positive(&format!("mode '{name}' modal_mass"), modal_mass)?;
        Ok(Self {
            name,
            f_m,
            q,
            modal_mass,
            damping,
            uncertain: false,
        })
    }

    pub fn flagged_uncertain(mut self, uncertain: bool) -> Self {
        self.uncertain = uncertain;
        self
    }

    pub fn omega_m(&self) -> f64 {
        2.0 * PI * self.f_m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalModel {
    modes: Vec<MechanicalMode>,
    coupling: Vec<f64>,
}

impl MechanicalModel {
    pub fn new(modes: Vec<MechanicalMode>, coupling: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("mechanical model", "at least one mode is required"));
        }
        if modes.len() != coupling.len() {
            return Err(Error::invalid(
                "coupling_scale",
                format!("{} modes but {} coupling factors", modes.len(), coupling.len()),
            ));
        }
        for (mode, &c) in modes.iter().zip(&coupling) {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::invalid(
                    format!("mode '{}' coupling_scale", mode.name),
                    format!("must be finite and >= 0, got {c}"),
                ));
            }
        }
        Ok(Self { modes, coupling })
    }

    pub fn single(mode: MechanicalMode) -> Self {
        Self {
            modes: vec![mode],
            coupling: vec![1.0],
        }
    }

    pub fn modes(&self) -> &[MechanicalMode] {
        &self.modes
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MechanicalMode, f64)> {
        self.modes.iter().zip(self.coupling.iter().copied())
    }

    /// The lowest-frequency mode.
    pub fn fundamental(&self) -> &MechanicalMode {
        self.modes
            .iter()
            .min_by(|a, b| a.f_m.total_cmp(&b.f_m))
            .expect("model has at least one mode")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityConfig {
    pub length: f64,
    pub wavelength: f64,
    pub t_in: f64,
    pub t_end: f64,
    pub loss_rt: f64,
    pub temperature: f64,
}

impl CavityConfig {
    /// `t_end` and `loss_rt` may be zero (ideal mirrors); `t_in` may not.
    pub fn new(
        length: f64,
        wavelength: f64,
        t_in: f64,
        t_end: f64,
        loss_rt: f64,
        temperature: f64,
    ) -> Result<Self> {
        positive("length", length)?;
        positive("wavelength", wavelength)?;
        positive("temperature", temperature)?;
        if !(t_in > 0.0 && t_in < 1.0) {
            return Err(Error::invalid("T_in", format!("must satisfy 0 < T_in < 1, got {t_in}")));
        }
        for (what, v) in [("T_end", t_end), ("loss_rt", loss_rt)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(what, format!("must satisfy 0 <= {what} < 1, got {v}")));
            }
        }
        let total = t_in + t_end + loss_rt;
        if total >= 1.0 {
            return Err(Error::invalid(
                "T_in + T_end + loss_rt",
                format!("must be < 1, got {total}"),
            ));
        }
        Ok(Self {
            length,
            wavelength,
            t_in,
            t_end,
            loss_rt,
            temperature,
        })
    }

    pub fn total_loss(&self) -> f64 {
        self.t_in + self.t_end + self.loss_rt
    }

    pub fn finesse(&self) -> f64 {
        2.0 * PI / self.total_loss()
    }

    pub fn fsr(&self) -> f64 {
        C / (2.0 * self.length)
    }

    /// HWHM linewidth in Hz.
    pub fn linewidth_hz(&self) -> f64 {
        self.fsr() / (2.0 * self.finesse())
    }

    /// HWHM amplitude decay rate in rad/s.
    pub fn gamma(&self) -> f64 {
        2.0 * PI * self.linewidth_hz()
    }

    pub fn laser_frequency(&self) -> f64 {
        C / self.wavelength
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.laser_frequency()
    }

    /// Amplitude decay rate through the input coupler, rad/s.
    pub fn kappa_in(&self) -> f64 {
        self.t_in * C / (4.0 * self.length)
    }

    /// Amplitude decay rate through the end mirror and round-trip loss, rad/s.
    pub fn kappa_loss(&self) -> f64 {
        (self.t_end + self.loss_rt) * C / (4.0 * self.length)
    }

    /// Power buildup `P_circ/P_in` on resonance.
    pub fn buildup(&self) -> f64 {
        let t = self.total_loss();
        4.0 * self.t_in / (t * t)
    }
}

pub fn derive_linewidth(config: &CavityConfig) -> f64 {
    config.linewidth_hz()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub label: String,
    pub p_in: f64,
    /// Detuning in units of HWHM. Positive is blue (laser above resonance).
    pub detuning: f64,
    pub p_circ: f64,
    pub p_refl: f64,
    pub p_trans: f64,
    /// Readout angle in the intracavity-carrier frame; 0 is the amplitude quadrature.
    pub detection_quadrature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rin {
    Flat(f64),
    /// Log-log interpolated table, clamped at the ends.
    Table { frequency: Vec<f64>, rin: Vec<f64> },
}

impl Rin {
    pub fn at(&self, f: f64) -> f64 {
        match self {
            Rin::Flat(r) => *r,
            Rin::Table { frequency, rin } => loglog_interp(frequency, rin, f),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Rin::Flat(r) => nonnegative("rin", *r),
            Rin::Table { frequency, rin } => {
                if frequency.is_empty() || frequency.len() != rin.len() {
                    return Err(Error::invalid("rin table", "frequency and rin columns must be non-empty and equal length"));
                }
                FrequencyGrid::new(frequency.clone()).map_err(|_| {
                    Error::invalid("rin table", "frequencies must be positive and strictly increasing")
                })?;
                rin.iter().try_for_each(|&r| nonnegative("rin", r))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    pub rin: Rin,
    /// Detector dark noise referred to detected power, W/√Hz.
    pub dark_asd: f64,
}

impl NoiseParams {
    pub fn new(rin: Rin, dark_asd: f64) -> Result<Self> {
        rin.validate()?;
        nonnegative("dark_asd", dark_asd)?;
        Ok(Self { rin, dark_asd })
    }

    pub fn quiet() -> Self {
        Self {
            rin: Rin::Flat(0.0),
            dark_asd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("frequency grid", "no points"));
        }
        if let Some(&p) = points.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::invalid("frequency grid", format!("point {p} is not positive")));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "frequency grid",
                format!("not strictly increasing at {} -> {}", w[0], w[1]),
            ));
        }
        Ok(Self { points })
    }

    /// `f_k = f_min·10^(k/ppd)` up to and including `f_max` (to rounding).
    pub fn log_spaced(f_min: f64, f_max: f64, points_per_decade: usize) -> Result<Self> {
        positive("grid f_min", f_min)?;
        if !(f_max > f_min) {
            return Err(Error::invalid("grid", format!("f_max {f_max} must exceed f_min {f_min}")));
        }
        if points_per_decade == 0 {
            return Err(Error::invalid("grid", "points per decade must be >= 1"));
        }
        let ppd = points_per_decade as f64;
        let n = ((f_max / f_min).log10() * ppd + 1e-9).floor() as usize;
        let points = (0..=n).map(|k| f_min * 10f64.powf(k as f64 / ppd)).collect();
        Self::new(points)
    }

    pub fn linear(f_min: f64, f_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("grid", "linear grid needs at least 2 points"));
        }
        let step = (f_max - f_min) / (n - 1) as f64;
        Self::new((0..n).map(|k| f_min + step * k as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index of the grid point closest to `f` in log distance.
    pub fn nearest(&self, f: f64) -> usize {
        let i = self.points.partition_point(|&p| p < f);
        if i == 0 {
            return 0;
        }
        if i == self.points.len() {
            return i - 1;
        }
        if (f / self.points[i - 1]).ln() <= (self.points[i] / f).ln() {
            i - 1
        } else {
            i
        }
    }
}

/// Piecewise power-law interpolation, clamped outside the table.
pub(crate) fn loglog_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&p| p <= x);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    if x == x0 {
        return y0;
    }
    if y0 <= 0.0 || y1 <= 0.0 {
        // no logarithm of zero; fall back to linear
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    }
    let t = (x / x0).ln() / (x1 / x0).ln();
    (y0.ln() + t * (y1 / y0).ln()).exp()
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("must be finite and > 0, got {v}")))
    }
}

fn nonnegative(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("must be finite and >= 0, got {v}")))
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub cavity: CavitySection,
    #[serde(rename = "modes")]
    pub modes: Vec<ModeSection>,
    pub noise: NoiseSection,
    #[serde(default, rename = "operating_points")]
    pub operating_points: Vec<OperatingPointSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub length_m: f64,
    pub wavelength_m: f64,
    pub t_in: f64,
    pub t_end: f64,
    pub loss_rt: f64,
    #[serde(default = "default_temperature")]
    pub temperature_k: f64,
}

fn default_temperature() -> f64 {
    295.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub name: String,
    pub f_m_hz: f64,
    pub q: f64,
    pub modal_mass_kg: f64,
    pub damping: Damping,
    #[serde(default = "default_coupling")]
    pub coupling_scale: f64,
    #[serde(default)]
    pub uncertain: bool,
}

fn default_coupling() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rin_per_sqrthz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rin_table: Option<RinTable>,
    pub dark_asd_w_per_sqrthz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RinTable {
    pub frequency_hz: Vec<f64>,
    pub rin_per_sqrthz: Vec<f64>,
}

/// Exactly one of `p_in_w` and `p_circ_w` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPointSection {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_in_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_circ_w: Option<f64>,
    pub detuning_hwhm: f64,
    #[serde(default)]
    pub detection_quadrature_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub cavity: CavityConfig,
    pub mechanics: MechanicalModel,
    pub noise: NoiseParams,
    pub operating_points: Vec<OperatingPoint>,
    pub source: ConfigFile,
}

impl LoadedConfig {
    pub fn operating_point(&self, label: &str) -> Option<&OperatingPoint> {
        self.operating_points.iter().find(|op| op.label == label)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.source).expect("config schema serializes")
    }
}

impl ConfigFile {
    pub fn validate(&self) -> Result<LoadedConfig> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {CONFIG_SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let c = &self.cavity;
        let cavity = CavityConfig::new(
            c.length_m,
            c.wavelength_m,
            c.t_in,
            c.t_end,
            c.loss_rt,
            c.temperature_k,
        )?;

        let mut modes = Vec::with_capacity(self.modes.len());
        let mut coupling = Vec::with_capacity(self.modes.len());
        for m in &self.modes {
            modes.push(
                MechanicalMode::new(m.name.clone(), m.f_m_hz, m.q, m.modal_mass_kg, m.damping)?
                    .flagged_uncertain(m.uncertain),
            );
            coupling.push(m.coupling_scale);
        }
        let mechanics = MechanicalModel::new(modes, coupling)?;

        let rin = match (&self.noise.rin_per_sqrthz, &self.noise.rin_table) {
            (Some(r), None) => Rin::Flat(*r),
            (None, Some(t)) => Rin::Table {
                frequency: t.frequency_hz.clone(),
                rin: t.rin_per_sqrthz.clone(),
            },
            (None, None) => Rin::Flat(0.0),
            (Some(_), Some(_)) => {
                return Err(Error::invalid("noise", "give rin_per_sqrthz or rin_table, not both"))
            }
        };
        let noise = NoiseParams::new(rin, self.noise.dark_asd_w_per_sqrthz)?;

        let mut operating_points = Vec::with_capacity(self.operating_points.len());
        for op in &self.operating_points {
            if operating_points.iter().any(|o: &OperatingPoint| o.label == op.label) {
                return Err(Error::invalid(
                    "operating point label",
                    format!("'{}' is defined twice", op.label),
                ));
            }
            if !op.detuning_hwhm.is_finite() || !op.detection_quadrature_rad.is_finite() {
                return Err(Error::invalid(
                    format!("operating point '{}'", op.label),
                    "detuning and quadrature must be finite",
                ));
            }
            let point = match (op.p_in_w, op.p_circ_w) {
                (Some(p), None) => {
                    nonnegative(&format!("operating point '{}' p_in_w", op.label), p)?;
                    optics::operating_point(&cavity, p, op.detuning_hwhm)
                }
                (None, Some(p)) => {
                    nonnegative(&format!("operating point '{}' p_circ_w", op.label), p)?;
                    optics::operating_point_for_circulating(&cavity, p, op.detuning_hwhm)
                }
                _ => {
                    return Err(Error::invalid(
                        format!("operating point '{}'", op.label),
                        "exactly one of p_in_w and p_circ_w is required",
                    ))
                }
            };
            operating_points.push(OperatingPoint {
                label: op.label.clone(),
                detection_quadrature: op.detection_quadrature_rad,
                ..point
            });
        }

        Ok(LoadedConfig {
            cavity,
            mechanics,
            noise,
            operating_points,
            source: self.clone(),
        })
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<LoadedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    file.validate()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline_cavity() -> CavityConfig {
        CavityConfig::new(0.0098, 1064e-9, 250e-6, 50e-6, 183e-6, 295.0).unwrap()
    }

    #[test]
    fn finesse_near_13000() {
        // 2π/13000 = 483.3 ppm, so loss_rt ≈ 183 ppm on top of 300 ppm.
        let f = baseline_cavity().finesse();
        assert!((f - 13_000.0).abs() < 10.0, "{f}");
        assert!((2.0 * PI / 13_000.0 - 300e-6 - 183e-6).abs() < 1e-6);
    }

    #[test]
    fn finesse_times_loss_is_two_pi() {
        let c = baseline_cavity();
        assert!((c.finesse() * c.total_loss() - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn inferred_loss_nonnegative() {
        let c = baseline_cavity();
        let inferred = 2.0 * PI / c.finesse() - c.t_in - c.t_end;
        assert!(inferred >= 0.0);
    }

    #[test]
    fn fsr_of_097_cm() {
        let c = CavityConfig::new(0.0097, 1064e-9, 250e-6, 50e-6, 183e-6, 295.0).unwrap();
        assert!((c.fsr() - 15.453e9).abs() < 0.01e9, "{}", c.fsr());
    }

    #[test]
    fn linewidth_near_500_khz() {
        let g = derive_linewidth(&baseline_cavity());
        assert!((g - 500e3).abs() < 100e3, "{g}");
    }

    #[test]
    fn linewidth_for_finesse_15000_one_cm() {
        // total loss chosen so F = 15000 exactly; c/(4·0.01·15000) = 499 654.097 Hz
        let total = 2.0 * PI / 15_000.0;
        let c = CavityConfig::new(0.01, 1064e-9, total / 2.0, total / 2.0, 0.0, 295.0).unwrap();
        assert!((c.linewidth_hz() - 499_654.096_666_7).abs() < 1e-3);
    }

    #[test]
    fn linewidth_grows_with_loss() {
        let a = baseline_cavity();
        let b = CavityConfig::new(0.0098, 1064e-9, 250e-6, 50e-6, 366e-6, 295.0).unwrap();
        assert!(b.linewidth_hz() > a.linewidth_hz());
    }

    #[test]
    fn zero_input_transmission_rejected() {
        let err = CavityConfig::new(0.01, 1064e-9, 0.0, 50e-6, 1e-4, 295.0).unwrap_err();
        assert!(err.to_string().contains("T_in"), "{err}");
    }

    #[test]
    fn total_loss_must_be_below_one() {
        let err = CavityConfig::new(0.01, 1064e-9, 0.5, 0.3, 0.3, 295.0).unwrap_err();
        assert!(err.to_string().contains("T_in + T_end + loss_rt"));
    }

    #[test]
    fn mode_invariants() {
        assert!(MechanicalMode::new("m", 0.0, 1.0, 1.0, Damping::Structural).is_err());
        assert!(MechanicalMode::new("m", 1.0, -1.0, 1.0, Damping::Structural).is_err());
        let err = MechanicalMode::new("m", 1.0, 1.0, 0.0, Damping::Viscous).unwrap_err();
        assert!(err.to_string().contains("modal_mass"));
    }

    #[test]
    fn model_needs_modes_and_nonnegative_coupling() {
        assert!(MechanicalModel::new(vec![], vec![]).is_err());
        let m = MechanicalMode::new("m", 1.0, 1.0, 1.0, Damping::Structural).unwrap();
        assert!(MechanicalModel::new(vec![m.clone()], vec![-0.1]).is_err());
        assert!(MechanicalModel::new(vec![m], vec![0.0]).is_ok());
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0]).is_err());
        let g = FrequencyGrid::log_spaced(100.0, 1e6, 500).unwrap();
        assert_eq!(g.len(), 2001);
        assert!((g.last() / 1e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_point() {
        let g = FrequencyGrid::new(vec![1.0, 10.0, 100.0]).unwrap();
        assert_eq!(g.nearest(0.5), 0);
        assert_eq!(g.nearest(3.0), 0);
        assert_eq!(g.nearest(4.0), 1);
        assert_eq!(g.nearest(500.0), 2);
    }

    #[test]
    fn rin_table_interpolates_power_law() {
        let r = Rin::Table {
            frequency: vec![1.0, 100.0],
            rin: vec![1.0, 1e-4],
        };
        assert!((r.at(10.0) - 1e-2).abs() < 1e-15);
        assert_eq!(r.at(0.1), 1.0);
        assert_eq!(r.at(1e3), 1e-4);
    }
}
