//! Scenario files: which config to load, on what grid, and which analyses to run.
//!
//! Everything is computed in memory first and written afterwards; if writing
//! fails midway, the files already written are removed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{
    self, attribute, build_budget, dominance_map, fit_dark_asd, fit_detuning_for_spring, fit_loglog_slope,
    power_scan, sql_ratio, ModelInputs, NoiseBudget, DARK, QRPN, READOUT, SHOT,
};
use crate::error::{Error, Result};
use crate::io::{spectrum_to_csv, BudgetFile};
use crate::optics::{self, LoopSuppression};
use crate::params::{load_config, FrequencyGrid, LoadedConfig, NoiseParams, OperatingPoint};
use crate::thermal::infer_temperature_ratio;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            f_min_hz: 100.0,
            f_max_hz: 1e6,
            points_per_decade: 500,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::log_spaced(self.f_min_hz, self.f_max_hz, self.points_per_decade)
    }

    /// `f_min:f_max:points_per_decade`, e.g. `100:1e6:500`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::invalid("grid", format!("'{text}' is not of the form f_min:f_max:points_per_decade"));
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [lo, hi, ppd] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(Self {
            f_min_hz: lo.parse().map_err(|_| bad())?,
            f_max_hz: hi.parse().map_err(|_| bad())?,
            points_per_decade: ppd.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    #[serde(default)]
    pub loop_unity_gain_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkFitSection {
    pub operating_point: String,
    pub band_hz: (f64, f64),
    pub readout_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    pub operating_point: String,
    pub band_hz: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeSection {
    pub operating_point: String,
    /// A budget component label, or `thermal:<mode>` for a single mode.
    pub component: String,
    pub band_hz: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqlSection {
    pub operating_point: String,
    /// Defaults to the fundamental mode's modal mass.
    #[serde(default)]
    pub mass_kg: Option<f64>,
    pub band_hz: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Scanned at each point's circulating power, with the detuning and
    /// quadrature of the first.
    pub operating_points: Vec<String>,
    pub band_hz: (f64, f64),
    #[serde(default)]
    pub shot_probe_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermometrySection {
    pub reference: String,
    pub test: String,
    pub band_hz: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringTarget {
    pub operating_point: String,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringFitSection {
    pub detuning_range: (f64, f64),
    pub targets: Vec<SpringTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Config path, relative to the scenario file.
    pub config: PathBuf,
    /// Output directory, relative to the scenario file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub readout: ReadoutSection,
    /// Operating points whose budgets are exported; all when absent.
    #[serde(default)]
    pub budgets: Option<Vec<String>>,
    #[serde(default)]
    pub dark_fit: Option<DarkFitSection>,
    #[serde(default)]
    pub attribution: Vec<BandSection>,
    #[serde(default)]
    pub slopes: Vec<SlopeSection>,
    #[serde(default)]
    pub dominance: Vec<String>,
    #[serde(default)]
    pub sql: Option<SqlSection>,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub thermometry: Option<ThermometrySection>,
    #[serde(default)]
    pub spring_fit: Option<SpringFitSection>,
}

impl Scenario {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if s.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::invalid(
                "scenario schema_version",
                format!("expected {SCENARIO_SCHEMA_VERSION}, got {}", s.schema_version),
            ));
        }
        Ok(s)
    }

    fn referenced_points(&self) -> Vec<&str> {
        let mut v: Vec<&str> = Vec::new();
        v.extend(self.budgets.iter().flatten().map(String::as_str));
        v.extend(self.dark_fit.iter().map(|d| d.operating_point.as_str()));
        v.extend(self.attribution.iter().map(|a| a.operating_point.as_str()));
        v.extend(self.slopes.iter().map(|a| a.operating_point.as_str()));
        v.extend(self.dominance.iter().map(String::as_str));
        v.extend(self.sql.iter().map(|a| a.operating_point.as_str()));
        v.extend(self.scan.iter().flat_map(|s| s.operating_points.iter().map(String::as_str)));
        v.extend(self.thermometry.iter().flat_map(|t| [t.reference.as_str(), t.test.as_str()]));
        v.extend(
            self.spring_fit
                .iter()
                .flat_map(|s| s.targets.iter().map(|t| t.operating_point.as_str())),
        );
        v
    }

    fn bands(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        v.extend(self.dark_fit.iter().map(|d| d.band_hz));
        v.extend(self.attribution.iter().map(|a| a.band_hz));
        v.extend(self.slopes.iter().map(|a| a.band_hz));
        v.extend(self.sql.iter().map(|a| a.band_hz));
        v.extend(self.scan.iter().map(|a| a.band_hz));
        v.extend(self.thermometry.iter().map(|a| a.band_hz));
        v
    }

    fn validate(&self, config: &LoadedConfig, grid: &FrequencyGrid) -> Result<()> {
        for label in self.referenced_points() {
            if config.operating_point(label).is_none() {
                return Err(Error::invalid(
                    "scenario",
                    format!("analysis references undefined operating point '{label}'"),
                ));
            }
        }
        for band in self.bands() {
            budget::validate_band(grid, band)?;
        }
        if let Some(scan) = &self.scan {
            if scan.operating_points.len() < 2 {
                return Err(Error::invalid("scan", "needs at least two operating points"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Summary

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavitySummary {
    pub finesse: f64,
    pub fsr_hz: f64,
    pub linewidth_hwhm_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointSummary {
    pub label: String,
    pub p_in_w: f64,
    pub p_circ_w: f64,
    pub p_refl_w: f64,
    pub p_trans_w: f64,
    pub detuning_hwhm: f64,
    pub detection_quadrature_rad: f64,
    pub spring_frequency_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkFitSummary {
    pub operating_point: String,
    pub band_hz: (f64, f64),
    pub readout_fraction: f64,
    pub dark_asd_w_per_sqrthz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentShare {
    pub label: String,
    pub rms_m: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub operating_point: String,
    pub band_hz: (f64, f64),
    pub total_rms_m: f64,
    pub components: Vec<ComponentShare>,
    /// Shot and dark together.
    pub readout_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSummary {
    pub operating_point: String,
    pub component: String,
    pub band_hz: (f64, f64),
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceSegment {
    pub from_hz: f64,
    pub to_hz: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceSummary {
    pub operating_point: String,
    pub segments: Vec<DominanceSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqlSummary {
    pub operating_point: String,
    pub mass_kg: f64,
    pub band_hz: (f64, f64),
    pub min_ratio: f64,
    pub at_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPointSummary {
    pub operating_point: String,
    pub p_circ_w: f64,
    pub qrpn_rms_m: f64,
    pub total_rms_m: f64,
    pub total_without_qrpn_rms_m: f64,
    pub spring_frequency_hz: Option<f64>,
    pub shot_asd_at_probe_m_per_sqrthz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub band_hz: (f64, f64),
    pub detuning_hwhm: f64,
    pub qrpn_power_exponent: f64,
    pub crpn_power_exponent: Option<f64>,
    pub shot_probe_hz: Option<f64>,
    pub points: Vec<ScanPointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometrySummary {
    pub reference: String,
    pub test: String,
    pub band_hz: (f64, f64),
    pub temperature_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringFitSummary {
    pub operating_point: String,
    pub target_hz: f64,
    pub detuning_hwhm: f64,
    pub spring_frequency_hz: f64,
    pub relative_error: f64,
    pub within_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub scenario_hash: String,
    pub grid: GridSpec,
    pub n_points: usize,
    pub cavity: CavitySummary,
    pub dark_fit: Option<DarkFitSummary>,
    pub operating_points: Vec<OperatingPointSummary>,
    pub attribution: Vec<AttributionSummary>,
    pub slopes: Vec<SlopeSummary>,
    pub dominance: Vec<DominanceSummary>,
    pub sql: Option<SqlSummary>,
    pub scan: Option<ScanSummary>,
    pub thermometry: Option<ThermometrySummary>,
    pub spring_fit: Vec<SpringFitSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Budget with shot and dark merged, as used for dominance.
fn readout_merged(b: &NoiseBudget) -> Result<NoiseBudget> {
    b.merged(READOUT, &[SHOT, DARK])
}

fn segments(grid: &FrequencyGrid, labels: &[&str]) -> Vec<DominanceSegment> {
    let f = grid.points();
    let mut out: Vec<DominanceSegment> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.label == *l => s.to_hz = f[i],
            _ => out.push(DominanceSegment {
                from_hz: f[i],
                to_hz: f[i],
                label: l.to_string(),
            }),
        }
    }
    out
}

/// Everything a run produces, before anything touches the disk.
struct Products {
    summary: Summary,
    files: Vec<(PathBuf, String)>,
}

fn compute(scenario: &Scenario, config: LoadedConfig, grid_spec: GridSpec, hash: &str) -> Result<Products> {
    let grid = grid_spec.build()?;
    scenario.validate(&config, &grid)?;
    let servo = LoopSuppression {
        unity_gain_hz: scenario.readout.loop_unity_gain_hz,
    };
    let op = |label: &str| -> &OperatingPoint { config.operating_point(label).expect("validated") };

    let mut noise = config.noise.clone();
    let mut dark_fit = None;
    if let Some(d) = &scenario.dark_fit {
        let mut inputs = ModelInputs::new(&config.cavity, &config.mechanics, &config.noise);
        inputs.servo = servo;
        let value = fit_dark_asd(&inputs, op(&d.operating_point), &grid, d.band_hz, d.readout_fraction)?;
        noise = NoiseParams::new(noise.rin.clone(), value)?;
        dark_fit = Some(DarkFitSummary {
            operating_point: d.operating_point.clone(),
            band_hz: d.band_hz,
            readout_fraction: d.readout_fraction,
            dark_asd_w_per_sqrthz: value,
        });
    }
    let mut inputs = ModelInputs::new(&config.cavity, &config.mechanics, &noise);
    inputs.servo = servo;

    // budgets needed by any analysis, in config order
    let mut needed: BTreeSet<&str> = scenario.referenced_points().into_iter().collect();
    let exported: Vec<&str> = match &scenario.budgets {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => config.operating_points.iter().map(|o| o.label.as_str()).collect(),
    };
    needed.extend(exported.iter().copied());
    let mut budgets: Vec<(&str, NoiseBudget)> = Vec::new();
    for o in &config.operating_points {
        if needed.contains(o.label.as_str()) {
            budgets.push((o.label.as_str(), build_budget(&inputs, o, &grid)?));
        }
    }
    let budget_of = |label: &str| -> &NoiseBudget {
        &budgets.iter().find(|(l, _)| *l == label).expect("built").1
    };

    let mut files = Vec::new();
    for label in &exported {
        let b = budget_of(label);
        let dir = PathBuf::from(label);
        for c in b.components() {
            files.push((dir.join(format!("{}.csv", c.label())), spectrum_to_csv(c)));
        }
        files.push((dir.join("total.csv"), spectrum_to_csv(b.total())));
        let without = b.without(QRPN)?;
        files.push((
            dir.join("total_without_qrpn.csv"),
            spectrum_to_csv(&without.total().clone().relabeled("total_without_qrpn")),
        ));
        files.push((dir.join("budget.json"), BudgetFile::from_budget(b, hash, label).to_json()));
    }

    let operating_points = config
        .operating_points
        .iter()
        .map(|o| {
            Ok(OperatingPointSummary {
                label: o.label.clone(),
                p_in_w: o.p_in,
                p_circ_w: o.p_circ,
                p_refl_w: o.p_refl,
                p_trans_w: o.p_trans,
                detuning_hwhm: o.detuning,
                detection_quadrature_rad: o.detection_quadrature,
                spring_frequency_hz: optics::spring_frequency(&config.cavity, o, &config.mechanics)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let attribution = scenario
        .attribution
        .iter()
        .map(|a| {
            let st = attribute(budget_of(&a.operating_point), a.band_hz)?;
            let readout = st.fraction(SHOT).unwrap_or(0.0) + st.fraction(DARK).unwrap_or(0.0);
            Ok(AttributionSummary {
                operating_point: a.operating_point.clone(),
                band_hz: a.band_hz,
                total_rms_m: st.total_rms,
                components: st
                    .rms
                    .iter()
                    .zip(&st.fractions)
                    .map(|((l, r), (_, f))| ComponentShare {
                        label: l.clone(),
                        rms_m: *r,
                        fraction: *f,
                    })
                    .collect(),
                readout_fraction: readout,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let slopes = scenario
        .slopes
        .iter()
        .map(|s| {
            let b = budget_of(&s.operating_point);
            let spectrum = if let Some(mode) = s.component.strip_prefix("thermal:") {
                let m = config
                    .mechanics
                    .modes()
                    .iter()
                    .find(|m| m.name == mode)
                    .ok_or_else(|| Error::invalid("slope", format!("no mechanical mode '{mode}'")))?;
                crate::thermal::mode_thermal_asd(m, config.cavity.temperature, &grid)?
            } else if s.component == budget::TOTAL {
                b.total().clone()
            } else {
                b.component(&s.component)
                    .ok_or_else(|| Error::invalid("slope", format!("no component '{}'", s.component)))?
                    .clone()
            };
            Ok(SlopeSummary {
                operating_point: s.operating_point.clone(),
                component: s.component.clone(),
                band_hz: s.band_hz,
                slope: fit_loglog_slope(&spectrum, s.band_hz)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dominance = scenario
        .dominance
        .iter()
        .map(|label| {
            let merged = readout_merged(budget_of(label))?;
            Ok(DominanceSummary {
                operating_point: label.clone(),
                segments: segments(&grid, &dominance_map(&merged)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let sql = scenario
        .sql
        .as_ref()
        .map(|s| {
            let mass = s.mass_kg.unwrap_or(config.mechanics.fundamental().modal_mass);
            let r = sql_ratio(budget_of(&s.operating_point), mass, s.band_hz)?;
            Ok::<_, Error>(SqlSummary {
                operating_point: s.operating_point.clone(),
                mass_kg: mass,
                band_hz: s.band_hz,
                min_ratio: r.ratio,
                at_hz: r.frequency,
            })
        })
        .transpose()?;

    let scan = scenario
        .scan
        .as_ref()
        .map(|s| {
            let template = op(&s.operating_points[0]);
            let powers: Vec<f64> = s.operating_points.iter().map(|l| op(l).p_circ).collect();
            let result = power_scan(&inputs, template, &powers, s.band_hz, &grid)?;
            let points = s
                .operating_points
                .iter()
                .zip(&result.points)
                .map(|(label, p)| ScanPointSummary {
                    operating_point: label.clone(),
                    p_circ_w: p.op.p_circ,
                    qrpn_rms_m: p.stat.rms(QRPN).unwrap_or(0.0),
                    total_rms_m: p.stat.total_rms,
                    total_without_qrpn_rms_m: p.no_qrpn_rms,
                    spring_frequency_hz: p.spring_frequency,
                    shot_asd_at_probe_m_per_sqrthz: s
                        .shot_probe_hz
                        .and_then(|f| p.budget.component(SHOT).map(|c| c.at(f))),
                })
                .collect();
            Ok::<_, Error>(ScanSummary {
                band_hz: s.band_hz,
                detuning_hwhm: template.detuning,
                qrpn_power_exponent: result.qrpn_exponent,
                crpn_power_exponent: result.crpn_exponent.is_finite().then_some(result.crpn_exponent),
                shot_probe_hz: s.shot_probe_hz,
                points,
            })
        })
        .transpose()?;

    let thermometry = scenario
        .thermometry
        .as_ref()
        .map(|t| {
            let ratio = infer_temperature_ratio(
                budget_of(&t.reference).total(),
                budget_of(&t.test).total(),
                t.band_hz,
            )?;
            Ok::<_, Error>(ThermometrySummary {
                reference: t.reference.clone(),
                test: t.test.clone(),
                band_hz: t.band_hz,
                temperature_ratio: ratio,
            })
        })
        .transpose()?;

    let spring_fit = scenario
        .spring_fit
        .iter()
        .flat_map(|s| s.targets.iter().map(move |t| (s.detuning_range, t)))
        .map(|(range, t)| {
            let fit = fit_detuning_for_spring(&inputs, op(&t.operating_point), t.frequency_hz, range)?;
            Ok(SpringFitSummary {
                operating_point: t.operating_point.clone(),
                target_hz: t.frequency_hz,
                detuning_hwhm: fit.detuning,
                spring_frequency_hz: fit.spring_frequency,
                relative_error: fit.spring_frequency / t.frequency_hz - 1.0,
                within_range: fit.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = Summary {
        schema_version: SCENARIO_SCHEMA_VERSION,
        scenario_hash: hash.to_string(),
        grid: grid_spec,
        n_points: grid.len(),
        cavity: CavitySummary {
            finesse: config.cavity.finesse(),
            fsr_hz: config.cavity.fsr(),
            linewidth_hwhm_hz: config.cavity.linewidth_hz(),
        },
        dark_fit,
        operating_points,
        attribution,
        slopes,
        dominance,
        sql,
        scan,
        thermometry,
        spring_fit,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    files.push((PathBuf::from("summary.json"), json));
    Ok(Products { summary, files })
}

/// Removes what it created unless disarmed.
struct Cleanup {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for f in &self.files {
                let _ = fs::remove_file(f);
            }
            for d in self.dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
        }
    }
}

fn create_dirs(dir: &Path, guard: &mut Cleanup) -> Result<()> {
    let mut missing = Vec::new();
    let mut cur = Some(dir);
    while let Some(d) = cur {
        if d.as_os_str().is_empty() || d.exists() {
            break;
        }
        missing.push(d.to_path_buf());
        cur = d.parent();
    }
    for d in missing.into_iter().rev() {
        fs::create_dir(&d).map_err(|source| Error::Io {
            path: d.clone(),
            source,
        })?;
        guard.dirs.push(d);
    }
    Ok(())
}

pub fn scenario_hash(scenario_bytes: &[u8], config_bytes: &[u8], grid: &GridSpec) -> String {
    let mut h = Sha256::new();
    h.update(scenario_bytes);
    h.update([0u8]);
    h.update(config_bytes);
    h.update([0u8]);
    h.update(format!("{:e}:{:e}:{}", grid.f_min_hz, grid.f_max_hz, grid.points_per_decade).as_bytes());
    hex(&h.finalize())
}

pub fn run_scenario(path: &Path, options: &RunOptions) -> Result<RunOutcome> {
    let scenario_bytes = read(path)?;
    let text = String::from_utf8(scenario_bytes.clone()).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let scenario = Scenario::parse(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let config_path = base.join(&scenario.config);
    let config_bytes = read(&config_path)?;
    let config = load_config(&config_path)?;
    let grid_spec = options.grid.unwrap_or(scenario.grid);
    let hash = scenario_hash(&scenario_bytes, &config_bytes, &grid_spec);

    let out_dir = match (&options.out, &scenario.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => base.join("out").join(path.file_stem().unwrap_or_default()),
    };

    let products = compute(&scenario, config, grid_spec, &hash)?;

    let mut guard = Cleanup {
        files: Vec::new(),
        dirs: Vec::new(),
        armed: true,
    };
    let mut written = Vec::with_capacity(products.files.len());
    for (rel, contents) in &products.files {
        let target = out_dir.join(rel);
        if let Some(parent) = target.parent() {
            create_dirs(parent, &mut guard)?;
        }
        guard.files.push(target.clone());
        fs::write(&target, contents).map_err(|source| Error::Io {
            path: target.clone(),
            source,
        })?;
        written.push(target);
    }
    guard.armed = false;
    Ok(RunOutcome {
        out_dir,
        files: written,
        summary: products.summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parsing() {
        let g = GridSpec::parse("100:1e6:500").unwrap();
        assert_eq!(g, GridSpec::default());
        assert!(GridSpec::parse("100:1e6").is_err());
        assert!(GridSpec::parse("a:b:c").is_err());
    }

    #[test]
    fn hash_depends_on_every_input() {
        let g = GridSpec::default();
        let a = scenario_hash(b"s", b"c", &g);
        assert_ne!(a, scenario_hash(b"t", b"c", &g));
        assert_ne!(a, scenario_hash(b"s", b"d", &g));
        assert_ne!(a, scenario_hash(b"s", b"c", &GridSpec { points_per_decade: 10, ..g }));
        assert_eq!(a, scenario_hash(b"s", b"c", &g));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn segments_merge_runs() {
        let g = FrequencyGrid::linear(1.0, 4.0, 4).unwrap();
        let s = segments(&g, &["a", "a", "b", "a"]);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].from_hz, s[0].to_hz), (1.0, 2.0));
    }
}
