use crate::error::{Error, Result};
use crate::params::FrequencyGrid;

/// Labeled single-sided amplitude spectral density, m/√Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    label: String,
    grid: FrequencyGrid,
    asd: Vec<f64>,
}

impl NoiseSpectrum {
    pub fn new(label: impl Into<String>, grid: FrequencyGrid, asd: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if asd.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "spectrum '{label}' has {} values for {} grid points",
                asd.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = asd
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::invalid(
                format!("spectrum '{label}'"),
                format!("asd at {} Hz is {v}", grid.points()[i]),
            ));
        }
        Ok(Self { label, grid, asd })
    }

    pub fn zeros(label: impl Into<String>, grid: &FrequencyGrid) -> Self {
        Self {
            label: label.into(),
            grid: grid.clone(),
            asd: vec![0.0; grid.len()],
        }
    }

    pub fn from_psd(label: impl Into<String>, grid: FrequencyGrid, psd: Vec<f64>) -> Result<Self> {
        let asd = psd.into_iter().map(f64::sqrt).collect();
        Self::new(label, grid, asd)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn frequencies(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn asd(&self) -> &[f64] {
        &self.asd
    }

    pub fn psd(&self) -> Vec<f64> {
        self.asd.iter().map(|a| a * a).collect()
    }

    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.label.clone(),
            self.grid.clone(),
            self.asd.iter().map(|a| a * factor).collect(),
        )
    }

    /// Value at the grid point nearest to `f`.
    pub fn at(&self, f: f64) -> f64 {
        self.asd[self.grid.nearest(f)]
    }

    pub(crate) fn same_grid(&self, other: &NoiseSpectrum) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "'{}' and '{}' are on different grids",
                self.label, other.label
            )));
        }
        Ok(())
    }
}
