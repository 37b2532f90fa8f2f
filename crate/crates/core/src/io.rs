//! Spectrum files and model/measurement comparison.
//!
//! CSV: header `frequency_hz,asd_m_per_sqrthz[,label]`, one row per grid
//! point. JSON: a [`BudgetFile`] holding every component plus the total.
//! Floats are written in shortest round-trip form, so export then import is
//! lossless and repeated runs are byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::budget::{band_integrate, NoiseBudget};
use crate::error::{Error, Result};
use crate::params::{loglog_interp, FrequencyGrid};
use crate::spectrum::NoiseSpectrum;

pub const FREQUENCY_COLUMN: &str = "frequency_hz";
pub const ASD_COLUMN: &str = "asd_m_per_sqrthz";
pub const LABEL_COLUMN: &str = "label";
pub const BUDGET_SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn spectrum_to_csv(spectrum: &NoiseSpectrum) -> String {
    let mut out = format!("{FREQUENCY_COLUMN},{ASD_COLUMN},{LABEL_COLUMN}\n");
    for (f, a) in spectrum.frequencies().iter().zip(spectrum.asd()) {
        out.push_str(&format!("{f:e},{a:e},{}\n", spectrum.label()));
    }
    out
}

pub fn write_spectrum_csv(spectrum: &NoiseSpectrum, path: &Path) -> Result<()> {
    fs::write(path, spectrum_to_csv(spectrum)).map_err(io_err(path))
}

fn format_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parse CSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_spectrum_csv(text: &str, origin: &Path) -> Result<NoiseSpectrum> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| format_err(origin, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let with_label = match names.as_slice() {
        [FREQUENCY_COLUMN, ASD_COLUMN] => false,
        [FREQUENCY_COLUMN, ASD_COLUMN, LABEL_COLUMN] => true,
        _ => {
            return Err(format_err(
                origin,
                1,
                format!("header must be '{FREQUENCY_COLUMN},{ASD_COLUMN}[,{LABEL_COLUMN}]', got '{}'", names.join(",")),
            ))
        }
    };
    let mut freqs = Vec::new();
    let mut asd = Vec::new();
    let mut label: Option<String> = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            format_err(origin, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let number = |i: usize, what: &str| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| format_err(origin, line, format!("{what} '{s}' is not a number")))
        };
        let f = number(0, FREQUENCY_COLUMN)?;
        let a = number(1, ASD_COLUMN)?;
        if !(f.is_finite() && f > 0.0) {
            return Err(format_err(origin, line, format!("frequency {f} must be positive")));
        }
        if let Some(&prev) = freqs.last() {
            if f <= prev {
                return Err(format_err(
                    origin,
                    line,
                    format!("frequency {f} is not above the previous row ({prev}); column must be strictly increasing"),
                ));
            }
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(format_err(origin, line, format!("asd {a:e} must be finite and nonnegative")));
        }
        if with_label && label.is_none() {
            label = record.get(2).map(str::to_string);
        }
        freqs.push(f);
        asd.push(a);
    }
    if freqs.is_empty() {
        return Err(format_err(origin, 1, "no data rows"));
    }
    let label = label.unwrap_or_else(|| {
        origin
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "imported".into())
    });
    NoiseSpectrum::new(label, FrequencyGrid::new(freqs)?, asd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub frequency: String,
    pub asd: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            frequency: "Hz".into(),
            asd: "m/sqrt(Hz)".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentColumn {
    pub label: String,
    pub asd_m_per_sqrthz: Vec<f64>,
}

/// JSON form of a budget, with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetFile {
    pub schema_version: u32,
    pub scenario_hash: String,
    pub operating_point: String,
    pub units: Units,
    pub frequency_hz: Vec<f64>,
    pub components: Vec<ComponentColumn>,
    pub total_asd_m_per_sqrthz: Vec<f64>,
}

impl BudgetFile {
    pub fn from_budget(budget: &NoiseBudget, scenario_hash: &str, operating_point: &str) -> Self {
        Self {
            schema_version: BUDGET_SCHEMA_VERSION,
            scenario_hash: scenario_hash.into(),
            operating_point: operating_point.into(),
            units: Units::default(),
            frequency_hz: budget.grid().points().to_vec(),
            components: budget
                .components()
                .iter()
                .map(|c| ComponentColumn {
                    label: c.label().into(),
                    asd_m_per_sqrthz: c.asd().to_vec(),
                })
                .collect(),
            total_asd_m_per_sqrthz: budget.total().asd().to_vec(),
        }
    }

    pub fn to_budget(&self) -> Result<NoiseBudget> {
        let grid = FrequencyGrid::new(self.frequency_hz.clone())?;
        crate::budget::assemble_budget(
            self.components
                .iter()
                .map(|c| NoiseSpectrum::new(c.label.clone(), grid.clone(), c.asd_m_per_sqrthz.clone()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn total(&self) -> Result<NoiseSpectrum> {
        NoiseSpectrum::new(
            "total",
            FrequencyGrid::new(self.frequency_hz.clone())?,
            self.total_asd_m_per_sqrthz.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("budget file serializes");
        s.push('\n');
        s
    }
}

pub fn read_budget_json(path: &Path) -> Result<BudgetFile> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: BudgetFile = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if file.schema_version != BUDGET_SCHEMA_VERSION {
        return Err(Error::invalid(
            "budget schema_version",
            format!("expected {BUDGET_SCHEMA_VERSION}, got {}", file.schema_version),
        ));
    }
    if file.units != Units::default() {
        return Err(Error::invalid("budget units", format!("{:?} not supported", file.units)));
    }
    Ok(file)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Load a spectrum from CSV, or the total of a JSON budget file.
pub fn import_spectrum(path: &Path) -> Result<NoiseSpectrum> {
    if is_json(path) {
        return read_budget_json(path)?.total();
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_spectrum_csv(&text, path)
}

/// Log-log interpolation onto `grid`. The grid must lie within the
/// spectrum's frequency range; points already on the grid are copied exactly.
pub fn resample(spectrum: &NoiseSpectrum, grid: &FrequencyGrid) -> Result<NoiseSpectrum> {
    if spectrum.grid() == grid {
        return Ok(spectrum.clone());
    }
    let src = spectrum.grid();
    if grid.first() < src.first() || grid.last() > src.last() {
        return Err(Error::GridMismatch(format!(
            "'{}' covers [{} Hz, {} Hz], cannot resample onto [{} Hz, {} Hz] without extrapolating",
            spectrum.label(),
            src.first(),
            src.last(),
            grid.first(),
            grid.last()
        )));
    }
    let asd = grid
        .points()
        .iter()
        .map(|&f| loglog_interp(src.points(), spectrum.asd(), f))
        .collect();
    NoiseSpectrum::new(spectrum.label(), grid.clone(), asd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandComparison {
    pub band_hz: (f64, f64),
    pub model_rms_m: f64,
    pub measured_rms_m: f64,
    /// measured/model
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub model_scenario_hash: String,
    pub bands: Vec<BandComparison>,
}

impl CompareReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Band-rms ratio measurement/model, with the measurement resampled onto the model grid.
pub fn compare(model: &NoiseSpectrum, measured: &NoiseSpectrum, bands: &[(f64, f64)]) -> Result<Vec<BandComparison>> {
    let measured = resample(measured, model.grid())?;
    bands
        .iter()
        .map(|&band| {
            let m = band_integrate(model, band)?;
            let x = band_integrate(&measured, band)?;
            if m == 0.0 {
                return Err(Error::band(band, "model has zero power in band"));
            }
            Ok(BandComparison {
                band_hz: band,
                model_rms_m: m,
                measured_rms_m: x,
                ratio: x / m,
            })
        })
        .collect()
}

/// Parse `lo:hi` pairs separated by commas, e.g. `21000:22000,1000:2000`.
pub fn parse_bands(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let bad = || Error::invalid("band", format!("'{s}' is not of the form lo:hi"));
            let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            Ok((lo, hi))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn origin() -> PathBuf {
        PathBuf::from("mem.csv")
    }

    fn sample() -> NoiseSpectrum {
        let g = FrequencyGrid::log_spaced(100.0, 1e4, 7).unwrap();
        let asd = g.points().iter().map(|f| 1e-12 / f.sqrt() * 1.000_000_1).collect();
        NoiseSpectrum::new("thermal", g, asd).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = sample();
        let back = parse_spectrum_csv(&spectrum_to_csv(&s), &origin()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn two_column_csv_takes_label_from_file_name() {
        let s = parse_spectrum_csv("frequency_hz,asd_m_per_sqrthz\n1,2\n3,4\n", Path::new("dir/meas.csv")).unwrap();
        assert_eq!(s.label(), "meas");
        assert_eq!(s.asd(), &[2.0, 4.0]);
    }

    #[test]
    fn negative_asd_names_row() {
        let err = parse_spectrum_csv("frequency_hz,asd_m_per_sqrthz\n1,2\n3,-4\n", &origin()).unwrap_err();
        match err {
            Error::Format { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("-4"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn non_monotone_frequency_rejected() {
        let err = parse_spectrum_csv("frequency_hz,asd_m_per_sqrthz\n1,2\n3,4\n2,4\n", &origin()).unwrap_err();
        assert!(matches!(err, Error::Format { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn bad_header_and_garbage() {
        assert!(matches!(
            parse_spectrum_csv("f,asd\n1,2\n", &origin()),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(
            parse_spectrum_csv("frequency_hz,asd_m_per_sqrthz\n1,x\n", &origin()),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn resample_power_law_exactly() {
        let src = FrequencyGrid::log_spaced(10.0, 1e5, 3).unwrap();
        let s = NoiseSpectrum::new("p", src.clone(), src.points().iter().map(|f| f.powf(-2.5)).collect()).unwrap();
        let dst = FrequencyGrid::log_spaced(20.0, 5e4, 50).unwrap();
        let r = resample(&s, &dst).unwrap();
        for (f, a) in dst.points().iter().zip(r.asd()) {
            assert!((a / f.powf(-2.5) - 1.0).abs() < 1e-10);
        }
        let wide = FrequencyGrid::log_spaced(1.0, 5e4, 5).unwrap();
        assert!(matches!(resample(&s, &wide), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn self_comparison_is_unity() {
        let s = sample();
        let r = compare(&s, &s, &[(200.0, 2000.0), (1000.0, 9000.0)]).unwrap();
        assert!(r.iter().all(|b| (b.ratio - 1.0).abs() < 1e-15));
        assert!(compare(&s, &s, &[]).unwrap().is_empty());
    }

    #[test]
    fn band_list_parsing() {
        assert_eq!(parse_bands("21000:22000, 1e3:2e3").unwrap(), vec![(21000.0, 22000.0), (1e3, 2e3)]);
        assert!(parse_bands("").unwrap().is_empty());
        assert!(parse_bands("1-2").is_err());
    }
}
