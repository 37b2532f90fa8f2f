//! Budget assembly and the analyses run on it.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optics::{self, LoopSuppression};
use crate::params::{CavityConfig, FrequencyGrid, MechanicalModel, NoiseParams, OperatingPoint, HBAR};
use crate::spectrum::NoiseSpectrum;
use crate::thermal::total_thermal_asd;

pub const THERMAL: &str = "thermal";
pub const QRPN: &str = "qrpn";
pub const SHOT: &str = "shot";
pub const DARK: &str = "dark";
pub const CRPN: &str = "crpn";
pub const TOTAL: &str = "total";
/// Shot and dark noise counted together, as the readout contribution.
pub const READOUT: &str = "shot+dark";

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget {
    components: Vec<NoiseSpectrum>,
    total: NoiseSpectrum,
}

/// Quadrature sum of `components`, which must share one grid and have distinct labels.
pub fn assemble_budget(components: Vec<NoiseSpectrum>) -> Result<NoiseBudget> {
    let first = components
        .first()
        .ok_or_else(|| Error::invalid("budget", "no components"))?;
    for (i, c) in components.iter().enumerate() {
        first.same_grid(c)?;
        if components[..i].iter().any(|o| o.label() == c.label()) {
            return Err(Error::invalid("budget", format!("duplicate component '{}'", c.label())));
        }
    }
    let grid = first.grid().clone();
    let mut psd = vec![0.0; grid.len()];
    for c in &components {
        for (p, a) in psd.iter_mut().zip(c.asd()) {
            *p += a * a;
        }
    }
    let total = NoiseSpectrum::from_psd(TOTAL, grid, psd)?;
    Ok(NoiseBudget { components, total })
}

impl NoiseBudget {
    pub fn components(&self) -> &[NoiseSpectrum] {
        &self.components
    }

    pub fn total(&self) -> &NoiseSpectrum {
        &self.total
    }

    pub fn grid(&self) -> &FrequencyGrid {
        self.total.grid()
    }

    pub fn component(&self, label: &str) -> Option<&NoiseSpectrum> {
        self.components.iter().find(|c| c.label() == label)
    }

    fn require(&self, label: &str) -> Result<&NoiseSpectrum> {
        self.component(label)
            .ok_or_else(|| Error::invalid("budget", format!("no component '{label}'")))
    }

    /// The budget with `label` removed (the counterfactual without that source).
    pub fn without(&self, label: &str) -> Result<NoiseBudget> {
        self.require(label)?;
        assemble_budget(
            self.components
                .iter()
                .filter(|c| c.label() != label)
                .cloned()
                .collect(),
        )
    }

    /// Replace the components named in `parts` by their quadrature sum, placed
    /// where the first of them stood.
    pub fn merged(&self, label: &str, parts: &[&str]) -> Result<NoiseBudget> {
        for p in parts {
            self.require(p)?;
        }
        let mut psd = vec![0.0; self.grid().len()];
        for p in parts {
            for (s, a) in psd.iter_mut().zip(self.require(p)?.asd()) {
                *s += a * a;
            }
        }
        let combined = NoiseSpectrum::from_psd(label, self.grid().clone(), psd)?;
        let mut out = Vec::with_capacity(self.components.len());
        let mut placed = false;
        for c in &self.components {
            if parts.contains(&c.label()) {
                if !placed {
                    out.push(combined.clone());
                    placed = true;
                }
            } else {
                out.push(c.clone());
            }
        }
        assemble_budget(out)
    }
}

/// Everything needed to evaluate the forward model at one working point.
#[derive(Debug, Clone)]
pub struct ModelInputs<'a> {
    pub cavity: &'a CavityConfig,
    pub mechanics: &'a MechanicalModel,
    pub noise: &'a NoiseParams,
    pub servo: LoopSuppression,
}

impl<'a> ModelInputs<'a> {
    pub fn new(cavity: &'a CavityConfig, mechanics: &'a MechanicalModel, noise: &'a NoiseParams) -> Self {
        Self {
            cavity,
            mechanics,
            noise,
            servo: LoopSuppression::none(),
        }
    }
}

/// Thermal, QRPN, shot, dark and CRPN spectra at one working point.
pub fn build_budget(inputs: &ModelInputs, op: &OperatingPoint, grid: &FrequencyGrid) -> Result<NoiseBudget> {
    let thermal = total_thermal_asd(inputs.mechanics, inputs.cavity.temperature, grid)?;
    let qrpn = optics::qrpn_displacement_asd(inputs.cavity, op, inputs.mechanics, grid)?;
    let (shot, dark) =
        optics::shot_noise_displacement_asd(inputs.cavity, op, inputs.mechanics, grid, inputs.noise, &inputs.servo)?;
    let crpn = optics::classical_rpn_asd(inputs.cavity, op, inputs.mechanics, &inputs.noise.rin, grid)?;
    assemble_budget(vec![thermal, qrpn, shot, dark, crpn])
}

/// A band must lie inside the grid and contain at least two grid points.
pub fn validate_band(grid: &FrequencyGrid, band: (f64, f64)) -> Result<()> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::band(band, "lower edge must be below upper edge"));
    }
    if lo < grid.first() || hi > grid.last() {
        return Err(Error::band(
            band,
            format!("outside the grid [{} Hz, {} Hz]", grid.first(), grid.last()),
        ));
    }
    let inside = grid.points().iter().filter(|&&f| f >= lo && f <= hi).count();
    if inside < 2 {
        return Err(Error::band(band, format!("contains {inside} grid point(s), need at least 2")));
    }
    Ok(())
}

/// `∫ S(f) df` over the band, trapezoidal in PSD with linear interpolation
/// at band edges that fall between grid points.
fn band_power(spectrum: &NoiseSpectrum, band: (f64, f64)) -> Result<f64> {
    validate_band(spectrum.grid(), band)?;
    let f = spectrum.frequencies();
    let psd = spectrum.psd();
    let interp = |x: f64| -> f64 {
        let i = f.partition_point(|&p| p < x);
        if f[i] == x {
            return psd[i];
        }
        let t = (x - f[i - 1]) / (f[i] - f[i - 1]);
        psd[i - 1] + t * (psd[i] - psd[i - 1])
    };
    let mut xs = vec![band.0];
    let mut ys = vec![interp(band.0)];
    for (i, &fi) in f.iter().enumerate() {
        if fi > band.0 && fi < band.1 {
            xs.push(fi);
            ys.push(psd[i]);
        }
    }
    xs.push(band.1);
    ys.push(interp(band.1));
    Ok(xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum())
}

/// Band rms in metres: `√(∫ asd² df)`.
pub fn band_integrate(spectrum: &NoiseSpectrum, band: (f64, f64)) -> Result<f64> {
    Ok(band_power(spectrum, band)?.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStat {
    pub band: (f64, f64),
    /// Band rms per component, metres.
    pub rms: Vec<(String, f64)>,
    /// Share of the total band PSD per component.
    pub fractions: Vec<(String, f64)>,
    pub total_rms: f64,
}

impl BandStat {
    pub fn fraction(&self, label: &str) -> Option<f64> {
        self.fractions.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn rms(&self, label: &str) -> Option<f64> {
        self.rms.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }
}

pub fn attribute(budget: &NoiseBudget, band: (f64, f64)) -> Result<BandStat> {
    let powers = budget
        .components()
        .iter()
        .map(|c| Ok((c.label().to_string(), band_power(c, band)?)))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = powers.iter().map(|(_, p)| p).sum();
    if sum == 0.0 {
        return Err(Error::band(band, "budget has no power in band"));
    }
    Ok(BandStat {
        band,
        rms: powers.iter().map(|(l, p)| (l.clone(), p.sqrt())).collect(),
        fractions: powers.iter().map(|(l, p)| (l.clone(), p / sum)).collect(),
        total_rms: band_integrate(budget.total(), band)?,
    })
}

/// Label of the largest component at each grid point. Ties go to the
/// earlier component.
pub fn dominance_map(budget: &NoiseBudget) -> Vec<&str> {
    (0..budget.grid().len())
        .map(|i| {
            let mut best = &budget.components()[0];
            for c in &budget.components()[1..] {
                if c.asd()[i] > best.asd()[i] {
                    best = c;
                }
            }
            best.label()
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(format!("need matching samples, got {} and {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Fit("power-law fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Log-log slope of the spectrum over grid points inside the band.
pub fn fit_loglog_slope(spectrum: &NoiseSpectrum, band: (f64, f64)) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = spectrum
        .frequencies()
        .iter()
        .zip(spectrum.asd())
        .filter(|(f, _)| **f >= band.0 && **f <= band.1)
        .map(|(f, a)| (*f, *a))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::band(band, format!("slope fit needs at least 3 points, found {}", xs.len())));
    }
    fit_power_law(&xs, &ys)
}

/// Free-mass standard quantum limit `√(2ħ/(m·ω²))`.
pub fn sql_asd(mass: f64, grid: &FrequencyGrid) -> Result<NoiseSpectrum> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("SQL mass", format!("must be > 0, got {mass}")));
    }
    let asd = grid
        .points()
        .iter()
        .map(|&f| (2.0 * HBAR / (mass * (2.0 * PI * f).powi(2))).sqrt())
        .collect();
    NoiseSpectrum::new("sql", grid.clone(), asd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqlRatio {
    pub frequency: f64,
    pub ratio: f64,
}

/// Minimum over grid points in the band of total/SQL.
pub fn sql_ratio(budget: &NoiseBudget, mass: f64, band: (f64, f64)) -> Result<SqlRatio> {
    validate_band(budget.grid(), band)?;
    let sql = sql_asd(mass, budget.grid())?;
    budget
        .total()
        .frequencies()
        .iter()
        .zip(budget.total().asd().iter().zip(sql.asd()))
        .filter(|(f, _)| **f >= band.0 && **f <= band.1)
        .map(|(f, (t, s))| SqlRatio { frequency: *f, ratio: t / s })
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .ok_or_else(|| Error::band(band, "no grid points"))
}

#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub op: OperatingPoint,
    pub budget: NoiseBudget,
    pub stat: BandStat,
    pub spring_frequency: Option<f64>,
    /// Band rms of the total without QRPN.
    pub no_qrpn_rms: f64,
}

#[derive(Debug, Clone)]
pub struct PowerScan {
    pub band: (f64, f64),
    pub points: Vec<ScanPoint>,
    pub qrpn_exponent: f64,
    pub crpn_exponent: f64,
}

/// Rebuild the budget at each circulating power, keeping the detuning and
/// readout quadrature of `template`.
pub fn power_scan(
    inputs: &ModelInputs,
    template: &OperatingPoint,
    powers: &[f64],
    band: (f64, f64),
    grid: &FrequencyGrid,
) -> Result<PowerScan> {
    let points = powers
        .iter()
        .map(|&p| {
            let op = optics::rescale_power(inputs.cavity, template, p);
            let budget = build_budget(inputs, &op, grid)?;
            let stat = attribute(&budget, band)?;
            let no_qrpn_rms = band_integrate(budget.without(QRPN)?.total(), band)?;
            let spring_frequency = optics::spring_frequency(inputs.cavity, &op, inputs.mechanics)?;
            Ok(ScanPoint {
                op,
                budget,
                stat,
                spring_frequency,
                no_qrpn_rms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exponent = |label: &str| -> Result<f64> {
        let ys: Vec<f64> = points.iter().map(|s| s.stat.rms(label).unwrap_or(0.0)).collect();
        fit_power_law(powers, &ys)
    };
    let qrpn_exponent = exponent(QRPN)?;
    let crpn_exponent = if inputs.noise.rin == crate::params::Rin::Flat(0.0) {
        f64::NAN
    } else {
        exponent(CRPN)?
    };
    Ok(PowerScan {
        band,
        points,
        qrpn_exponent,
        crpn_exponent,
    })
}

/// Dark-noise level that makes shot+dark the fraction `target` of the band PSD.
///
/// Dark noise has the same spectral shape as shot noise, so this is closed form.
pub fn fit_dark_asd(
    inputs: &ModelInputs,
    op: &OperatingPoint,
    grid: &FrequencyGrid,
    band: (f64, f64),
    target: f64,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Fit(format!("target fraction must lie in (0, 1), got {target}")));
    }
    let unit = NoiseParams::new(inputs.noise.rin.clone(), 1.0)?;
    let probe = ModelInputs {
        noise: &unit,
        ..inputs.clone()
    };
    let budget = build_budget(&probe, op, grid)?;
    let stat = attribute(&budget, band)?;
    let p = |l: &str| stat.rms(l).unwrap_or(0.0).powi(2);
    let rest = p(THERMAL) + p(QRPN) + p(CRPN);
    let need = target * rest - (1.0 - target) * p(SHOT);
    if need < 0.0 {
        return Err(Error::Fit(format!(
            "shot noise alone exceeds {:.1}% of the band power",
            100.0 * target
        )));
    }
    Ok((need / ((1.0 - target) * p(DARK))).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningFit {
    pub detuning: f64,
    pub spring_frequency: f64,
    /// False when the target lies outside what the detuning range can reach.
    pub converged: bool,
}

/// Detuning within `range` whose spring resonance is closest to `target_hz`.
/// The static spring grows with detuning below one linewidth, so bisection applies.
pub fn fit_detuning_for_spring(
    inputs: &ModelInputs,
    template: &OperatingPoint,
    target_hz: f64,
    range: (f64, f64),
) -> Result<DetuningFit> {
    let spring = |d: f64| -> Result<f64> {
        let op = OperatingPoint {
            detuning: d,
            ..template.clone()
        };
        let op = optics::rescale_power(inputs.cavity, &op, template.p_circ);
        optics::spring_frequency(inputs.cavity, &op, inputs.mechanics)?
            .ok_or_else(|| Error::Fit(format!("no spring resonance at detuning {d}")))
    };
    let (mut lo, mut hi) = range;
    let (f_lo, f_hi) = (spring(lo)?, spring(hi)?);
    if target_hz <= f_lo.min(f_hi) || target_hz >= f_lo.max(f_hi) {
        let (d, f) = if (f_lo - target_hz).abs() <= (f_hi - target_hz).abs() {
            (lo, f_lo)
        } else {
            (hi, f_hi)
        };
        return Ok(DetuningFit {
            detuning: d,
            spring_frequency: f,
            converged: false,
        });
    }
    let increasing = f_hi > f_lo;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (spring(mid)? < target_hz) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = 0.5 * (lo + hi);
    Ok(DetuningFit {
        detuning: d,
        spring_frequency: spring(d)?,
        converged: true,
    })
}
