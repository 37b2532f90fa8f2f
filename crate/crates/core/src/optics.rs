//! Linearized input-output model of the detuned cavity.
//!
//! Two-photon quadratures with vacuum PSD 1 (single-sided), measured in the
//! frame of the intracavity carrier so the mean intracavity amplitude `A` is
//! real. With `Δ = δ·γ` (blue for `δ > 0`) the sideband equations are
//!
//! ```text
//! M(Ω)·a = √(2κ_in)·n_in + √(2κ_loss)·n_loss + [0, √2·G·A·x]ᵀ
//! M(Ω)   = [[γ + iΩ,  Δ], [−Δ, γ + iΩ]]
//! ```
//!
//! with `G = ω₀/L`. The radiation-pressure force is `δF = √2·ħ·G·A·a₁`; the
//! reflected field is `−n_in + √(2κ_in)·a`. End-mirror transmission and
//! round-trip loss are lumped into one vacuum port (both carry vacuum).
//!
//! Budget spectra are calibrated displacement: force noises are referred
//! through the bare susceptibility χ, readout noises through the signal
//! transfer `s_ζ/(1 + K·χ)`. Their ratios equal those of a χ_eff-referred
//! budget; only the overall shape differs.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mechanics::{closed_loop_resonance, total_susceptibility};
use crate::params::{CavityConfig, FrequencyGrid, MechanicalModel, NoiseParams, OperatingPoint, Rin, C, HBAR};
use crate::spectrum::NoiseSpectrum;

pub type QuadratureState = [Complex64; 2];
pub type Mat2 = [[Complex64; 2]; 2];

/// Power budget for input power `p_in` at detuning `detuning` (HWHM units).
pub fn operating_point(config: &CavityConfig, p_in: f64, detuning: f64) -> OperatingPoint {
    let gamma = config.gamma();
    let delta = detuning * gamma;
    let kin = config.kappa_in();
    let lorentz = gamma * gamma + delta * delta;
    // |A|²·ħω₀ = 2κ_in·P_in/(γ² + Δ²); P_circ = |A|²·ħω₀·c/(2L)
    let photon_energy_flux = 2.0 * kin * p_in / lorentz;
    let p_circ = photon_energy_flux * C / (2.0 * config.length);
    let r = -1.0 + 2.0 * kin / Complex64::new(gamma, -delta);
    OperatingPoint {
        label: String::new(),
        p_in,
        detuning,
        p_circ,
        p_refl: p_in * r.norm_sqr(),
        p_trans: config.t_end * p_circ,
        detection_quadrature: 0.0,
    }
}

/// Inverse of [`operating_point`] in the input power.
pub fn operating_point_for_circulating(config: &CavityConfig, p_circ: f64, detuning: f64) -> OperatingPoint {
    let buildup = config.buildup() / (1.0 + detuning * detuning);
    operating_point(config, p_circ / buildup, detuning)
}

/// Same working point at a different circulating power.
pub fn rescale_power(config: &CavityConfig, op: &OperatingPoint, p_circ: f64) -> OperatingPoint {
    OperatingPoint {
        label: op.label.clone(),
        detection_quadrature: op.detection_quadrature,
        ..operating_point_for_circulating(config, p_circ, op.detuning)
    }
}

/// Field-equation constants for one working point.
#[derive(Debug, Clone, Copy)]
struct Field {
    gamma: f64,
    delta: f64,
    kappa_in: f64,
    kappa_loss: f64,
    g: f64,
    amp: f64,
}

impl Field {
    fn new(config: &CavityConfig, op: &OperatingPoint) -> Self {
        let omega0 = config.omega0();
        let photons = op.p_circ * 2.0 * config.length / (HBAR * omega0 * C);
        Self {
            gamma: config.gamma(),
            delta: op.detuning * config.gamma(),
            kappa_in: config.kappa_in(),
            kappa_loss: config.kappa_loss(),
            g: omega0 / config.length,
            amp: photons.sqrt(),
        }
    }

    fn det(&self, w: f64) -> Complex64 {
        let p = Complex64::new(self.gamma, w);
        p * p + self.delta * self.delta
    }

    fn m_inv(&self, w: f64) -> Mat2 {
        let p = Complex64::new(self.gamma, w);
        let d = self.det(w);
        [[p / d, -self.delta / d], [self.delta / d, p / d]]
    }

    /// `ħ·G²·A²`, equal to `G·2·P_circ/c`.
    fn coupling_energy(&self) -> f64 {
        HBAR * self.g * self.g * self.amp * self.amp
    }
}

fn scale(m: Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

/// Sideband transfer matrices at one frequency. Rows are output quadratures
/// (amplitude, phase), columns input quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityTransfer {
    pub input_to_reflected: Mat2,
    pub input_to_intracavity: Mat2,
    pub loss_to_reflected: Mat2,
    pub loss_to_intracavity: Mat2,
    /// Radiation-pressure force (N) per unit input quadrature.
    pub force_from_input: QuadratureState,
    pub force_from_loss: QuadratureState,
    /// Reflected quadratures per metre of mirror motion.
    pub displacement_to_reflected: QuadratureState,
    pub displacement_to_intracavity: QuadratureState,
}

pub fn cavity_transfer(config: &CavityConfig, op: &OperatingPoint, f: f64) -> Result<CavityTransfer> {
    check_frequency(f)?;
    let fl = Field::new(config, op);
    Ok(transfer(&fl, 2.0 * PI * f))
}

fn transfer(fl: &Field, w: f64) -> CavityTransfer {
    let mi = fl.m_inv(w);
    let sin = (2.0 * fl.kappa_in).sqrt();
    let sloss = (2.0 * fl.kappa_loss).sqrt();
    let input_to_intracavity = scale(mi, sin);
    let loss_to_intracavity = scale(mi, sloss);
    let mut input_to_reflected = scale(mi, 2.0 * fl.kappa_in);
    input_to_reflected[0][0] -= 1.0;
    input_to_reflected[1][1] -= 1.0;
    let loss_to_reflected = scale(mi, sin * sloss);
    let drive = 2f64.sqrt() * fl.g * fl.amp;
    let displacement_to_intracavity = [mi[0][1] * drive, mi[1][1] * drive];
    let displacement_to_reflected = [
        displacement_to_intracavity[0] * sin,
        displacement_to_intracavity[1] * sin,
    ];
    let fscale = 2f64.sqrt() * HBAR * fl.g * fl.amp;
    CavityTransfer {
        force_from_input: [input_to_intracavity[0][0] * fscale, input_to_intracavity[0][1] * fscale],
        force_from_loss: [loss_to_intracavity[0][0] * fscale, loss_to_intracavity[0][1] * fscale],
        input_to_reflected,
        input_to_intracavity,
        loss_to_reflected,
        loss_to_intracavity,
        displacement_to_reflected,
        displacement_to_intracavity,
    }
}

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency must be > 0, got {f}")))
    }
}

fn spring_at(fl: &Field, w: f64) -> Complex64 {
    2.0 * fl.coupling_energy() * fl.delta / fl.det(w)
}

/// Optical spring constant `K = −dF/dx`, N/m. Positive real part for blue detuning.
pub fn optical_spring(config: &CavityConfig, op: &OperatingPoint, f: f64) -> Complex64 {
    spring_at(&Field::new(config, op), 2.0 * PI * f)
}

/// Quantum radiation-pressure force PSD, N²/Hz, from vacuum entering both ports.
pub fn qrpn_force_psd(config: &CavityConfig, op: &OperatingPoint, f: f64) -> f64 {
    qrpn_psd_at(&Field::new(config, op), 2.0 * PI * f)
}

fn qrpn_psd_at(fl: &Field, w: f64) -> f64 {
    let t = transfer(fl, w);
    t.force_from_input
        .iter()
        .chain(&t.force_from_loss)
        .map(|v| v.norm_sqr())
        .sum()
}

/// Calibrated QRPN displacement: force ASD through the free susceptibility.
pub fn qrpn_displacement_asd(
    config: &CavityConfig,
    op: &OperatingPoint,
    model: &MechanicalModel,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrum> {
    let fl = Field::new(config, op);
    let asd = grid
        .points()
        .iter()
        .map(|&f| {
            let chi = total_susceptibility(model, f)?;
            Ok(chi.norm() * qrpn_psd_at(&fl, 2.0 * PI * f).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrum::new("qrpn", grid.clone(), asd)
}

/// In-loop suppression `1/(1 + G)` of the locking servo, with `G = f_ugf/(i·f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSuppression {
    pub unity_gain_hz: f64,
}

impl LoopSuppression {
    pub fn none() -> Self {
        Self { unity_gain_hz: 0.0 }
    }

    pub fn factor(&self, f: f64) -> Complex64 {
        let g = Complex64::new(0.0, -self.unity_gain_hz / f);
        1.0 / (1.0 + g)
    }
}

fn project(v: QuadratureState, zeta: f64) -> Complex64 {
    v[0] * zeta.cos() + v[1] * zeta.sin()
}

/// Mirror displacement to detected quadrature at the readout angle, including
/// the optical spring and loop suppression. Units: quadrature per metre.
pub fn signal_transfer(
    config: &CavityConfig,
    op: &OperatingPoint,
    model: &MechanicalModel,
    servo: &LoopSuppression,
    f: f64,
) -> Result<Complex64> {
    check_frequency(f)?;
    let fl = Field::new(config, op);
    let w = 2.0 * PI * f;
    let chi = total_susceptibility(model, f)?;
    let s = project(transfer(&fl, w).displacement_to_reflected, op.detection_quadrature);
    Ok(s / (1.0 + spring_at(&fl, w) * chi) * servo.factor(f))
}

/// Shot and dark noise referred to calibrated displacement.
///
/// Both are divided by the signal transfer; the loop suppression applies to
/// noise and signal alike and cancels.
pub fn shot_noise_displacement_asd(
    config: &CavityConfig,
    op: &OperatingPoint,
    model: &MechanicalModel,
    grid: &FrequencyGrid,
    noise: &NoiseParams,
    servo: &LoopSuppression,
) -> Result<(NoiseSpectrum, NoiseSpectrum)> {
    if op.p_circ <= 0.0 {
        return Err(Error::Domain("shot noise is undefined without circulating power".into()));
    }
    if noise.dark_asd > 0.0 && op.p_refl <= 0.0 {
        return Err(Error::Domain("dark noise cannot be referred: no reflected power".into()));
    }
    let fl = Field::new(config, op);
    let zeta = op.detection_quadrature;
    let dark_quadrature = if noise.dark_asd > 0.0 {
        noise.dark_asd / (2.0 * HBAR * config.omega0() * op.p_refl).sqrt()
    } else {
        0.0
    };
    let mut shot = Vec::with_capacity(grid.len());
    let mut dark = Vec::with_capacity(grid.len());
    for &f in grid.points() {
        let w = 2.0 * PI * f;
        let t = transfer(&fl, w);
        let vacuum: f64 = (0..2)
            .map(|j| {
                let a = project([t.input_to_reflected[0][j], t.input_to_reflected[1][j]], zeta);
                let b = project([t.loss_to_reflected[0][j], t.loss_to_reflected[1][j]], zeta);
                a.norm_sqr() + b.norm_sqr()
            })
            .sum();
        let servo_f = servo.factor(f).norm();
        let chi = total_susceptibility(model, f)?;
        let signal = project(t.displacement_to_reflected, zeta) / (1.0 + spring_at(&fl, w) * chi);
        let gain = signal.norm() * servo_f;
        if gain == 0.0 {
            return Err(Error::Domain(format!(
                "readout quadrature {zeta} rad carries no signal at {f} Hz"
            )));
        }
        shot.push(vacuum.sqrt() * servo_f / gain);
        dark.push(dark_quadrature * servo_f / gain);
    }
    Ok((
        NoiseSpectrum::new("shot", grid.clone(), shot)?,
        NoiseSpectrum::new("dark", grid.clone(), dark)?,
    ))
}

/// Radiation-pressure force from residual input intensity noise, N/√Hz.
pub fn classical_rpn_force_asd(config: &CavityConfig, op: &OperatingPoint, rin: &Rin, f: f64) -> f64 {
    let fl = Field::new(config, op);
    let w = 2.0 * PI * f;
    let theta = Complex64::new(fl.gamma, -fl.delta).arg();
    let a_in = (op.p_in / (HBAR * config.omega0())).sqrt();
    // input amplitude-quadrature ASD for relative intensity noise r is r·|a_in|/√2
    let drive = rin.at(f) * a_in / 2f64.sqrt();
    let t = transfer(&fl, w);
    (t.force_from_input[0] * theta.cos() + t.force_from_input[1] * theta.sin()).norm() * drive
}

pub fn classical_rpn_asd(
    config: &CavityConfig,
    op: &OperatingPoint,
    model: &MechanicalModel,
    rin: &Rin,
    grid: &FrequencyGrid,
) -> Result<NoiseSpectrum> {
    let asd = grid
        .points()
        .iter()
        .map(|&f| Ok(total_susceptibility(model, f)?.norm() * classical_rpn_force_asd(config, op, rin, f)))
        .collect::<Result<Vec<_>>>()?;
    NoiseSpectrum::new("crpn", grid.clone(), asd)
}

/// Optical-spring resonance: the minimum of `|1 + K·χ|` between twice the
/// fundamental frequency and the cavity linewidth. `None` without a spring.
pub fn spring_frequency(config: &CavityConfig, op: &OperatingPoint, model: &MechanicalModel) -> Result<Option<f64>> {
    if op.detuning == 0.0 || op.p_circ == 0.0 {
        return Ok(None);
    }
    let fl = Field::new(config, op);
    let lo = 2.0 * model.fundamental().f_m;
    let hi = config.linewidth_hz();
    if hi <= lo {
        return Ok(None);
    }
    closed_loop_resonance(model, |f| spring_at(&fl, 2.0 * PI * f), lo, hi).map(Some)
}
