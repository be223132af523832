//! TOML run configuration. Command-line flags override every field here.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

use crate::sweep::{log_space, strip_mask, Axis, RunMode, SweepSpec};
use crate::validate::{Suite, ValidateOptions};
use ghostsnr::protocols::ProtocolKind;
use ghostsnr::simulator::{pump_variance_from_power_jitter, MaskSpec};
use ghostsnr::{derive_params, DetectionGeometry, ExperimentParams, SourceKind};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub mode: Option<RunMode>,
    pub replicas: Option<u32>,
    pub experiment: Option<ExperimentSection>,
    pub mask: Option<MaskSection>,
    pub sweep: Option<SweepSection>,
    pub validate: Option<ValidateSection>,
}

/// Either statistical parameters directly or a `[experiment.geometry]`
/// table from which `M`, `R` and `eta2` are derived.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub source: Option<SourceKind>,
    pub mu: Option<f64>,
    pub modes_per_pixel: Option<u64>,
    /// Sets both arms unless `eta1` / `eta2` are given.
    pub eta: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub resolution_cells: Option<u64>,
    pub frames: Option<u64>,
    pub pump_mu_variance: Option<f64>,
    /// Relative standard deviation of the pump power; converted to a
    /// variance of `mu`.
    pub pump_power_jitter: Option<f64>,
    pub geometry: Option<DetectionGeometry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum MaskSection {
    /// Rows of `#` (transmitting) and `.` (blocked).
    Ascii { ascii: String },
    /// A transmitting rectangle on a blocked grid.
    Rectangle {
        width: usize,
        height: usize,
        x0: usize,
        y0: usize,
        block_width: usize,
        block_height: usize,
    },
}

impl MaskSection {
    pub fn build(&self) -> Result<MaskSpec> {
        Ok(match self {
            MaskSection::Ascii { ascii } => MaskSpec::from_ascii(ascii)?,
            &MaskSection::Rectangle {
                width,
                height,
                x0,
                y0,
                block_width,
                block_height,
            } => MaskSpec::rectangle(width, height, x0, y0, block_width, block_height)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub series: Option<String>,
    pub axis: Option<Axis>,
    pub values: Option<Vec<f64>>,
    /// `[start, stop, points]`, log-spaced; alternative to `values`.
    pub log_range: Option<(f64, f64, usize)>,
    pub protocols: Option<Vec<ProtocolKind>>,
    pub sources: Option<Vec<SourceKind>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub suites: Option<Vec<Suite>>,
    pub window: Option<(f64, f64)>,
    pub oracle_samples: Option<u64>,
    pub pump_frames: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Experiment parameters with `frames` overridden when given. Missing
    /// fields fall back to twin beams, `mu = 1`, `M = 1`, `eta = 1`,
    /// `R` from the mask (or 100) and 1000 frames.
    pub fn params(&self, frames: Option<u64>) -> Result<ExperimentParams> {
        let e = self.experiment.clone().unwrap_or_default();
        let source = e.source.unwrap_or(SourceKind::TwinBeam);
        let mu = e.mu.unwrap_or(1.0);
        let frames = frames.or(e.frames).unwrap_or(1000);
        let mask_cells = self
            .mask
            .as_ref()
            .map(|m| m.build())
            .transpose()?
            .map(|m| m.in_cell_count() as u64);

        let mut p = if let Some(geom) = &e.geometry {
            ensure!(
                e.modes_per_pixel.is_none() && e.resolution_cells.is_none() && e.eta2.is_none() && e.eta.is_none(),
                "give either a geometry or modes_per_pixel / resolution_cells / eta, not both"
            );
            let p = derive_params(geom, source, mu, frames)?;
            let counts = geom.mode_counts()?;
            log::info!(
                "geometry: {:.4} spatial x {:.4} temporal modes -> M = {}; {:.4} cells -> R = {}",
                counts.spatial_ratio.max(1.0),
                counts.temporal_ratio.max(1.0),
                p.modes_per_pixel,
                counts.cell_ratio,
                p.resolution_cells
            );
            p
        } else {
            let eta = e.eta.unwrap_or(1.0);
            let r = e.resolution_cells.or(mask_cells).unwrap_or(100);
            let mut p = ExperimentParams::new(source, mu, e.modes_per_pixel.unwrap_or(1), eta, r, frames)?;
            p.eta1 = e.eta1.unwrap_or(eta);
            p.eta2 = e.eta2.unwrap_or(eta);
            p
        };
        if let (Some(cells), Some(r)) = (mask_cells, Some(p.resolution_cells)) {
            ensure!(
                cells == r,
                "mask transmits {cells} cells but the experiment has R = {r}"
            );
        }
        match (e.pump_mu_variance, e.pump_power_jitter) {
            (Some(_), Some(_)) => bail!("give pump_mu_variance or pump_power_jitter, not both"),
            (Some(v), None) => p.pump_mu_variance = v,
            (None, Some(j)) => p.pump_mu_variance = pump_variance_from_power_jitter(p.mu, j),
            (None, None) => {}
        }
        p.validate()?;
        Ok(p)
    }

    /// The configured mask, or an `R`-cell strip.
    pub fn mask(&self, params: &ExperimentParams) -> Result<MaskSpec> {
        match &self.mask {
            Some(m) => m.build(),
            None => strip_mask(params.resolution_cells),
        }
    }

    pub fn sweep(&self, fixed: ExperimentParams, mode: RunMode, replicas: u32, seed: u64) -> Result<SweepSpec> {
        let s = self.sweep.clone().unwrap_or_default();
        let values = match (s.values, s.log_range) {
            (Some(_), Some(_)) => bail!("give sweep values or log_range, not both"),
            (Some(v), None) => v,
            (None, Some((a, b, n))) => log_space(a, b, n),
            (None, None) => bail!("the sweep has no values"),
        };
        Ok(SweepSpec {
            series: s.series.unwrap_or_else(|| "sweep".into()),
            axis: s.axis.unwrap_or(Axis::Illumination),
            values,
            fixed,
            protocols: s.protocols.unwrap_or_else(|| ProtocolKind::ALL.to_vec()),
            sources: s.sources.unwrap_or_else(|| vec![fixed.source]),
            mode,
            replicas,
            seed,
        })
    }

    pub fn validate_options(&self, seed: u64) -> (Vec<Suite>, ValidateOptions) {
        let v = self.validate.clone().unwrap_or_default();
        let d = ValidateOptions::default();
        let opts = ValidateOptions {
            seed,
            window: v.window.unwrap_or(d.window),
            oracle_samples: v.oracle_samples.unwrap_or(d.oracle_samples),
            pump_frames: v.pump_frames.unwrap_or(d.pump_frames),
        };
        (v.suites.unwrap_or_else(|| Suite::ALL.to_vec()), opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_defaults() {
        let c = FileConfig::parse("").unwrap();
        let p = c.params(None).unwrap();
        assert_eq!((p.modes_per_pixel, p.resolution_cells, p.frames), (1, 100, 1000));
        assert_eq!(c.mask(&p).unwrap().in_cell_count(), 100);
    }

    #[test]
    fn full_config() {
        let c = FileConfig::parse(
            r#"
            seed = 9
            mode = "both"
            [experiment]
            source = "thermal"
            mu = 0.5
            modes_per_pixel = 4
            eta = 0.8
            eta2 = 0.6
            frames = 200
            pump_power_jitter = 0.1
            [mask]
            width = 4
            height = 4
            x0 = 1
            y0 = 1
            block_width = 2
            block_height = 3
            [sweep]
            axis = "resolution"
            values = [2, 4]
            protocols = ["Cov", "g2"]
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.mode, Some(RunMode::Both));
        let p = c.params(Some(50)).unwrap();
        assert_eq!(p.source, SourceKind::Thermal);
        assert_eq!((p.eta1, p.eta2, p.frames, p.resolution_cells), (0.8, 0.6, 50, 6));
        assert!(p.pump_mu_variance > 0.0);
        let s = c.sweep(p, RunMode::Analytic, 1, 0).unwrap();
        assert_eq!(s.protocols, vec![ProtocolKind::Covariance, ProtocolKind::NormalizedG2]);
        assert_eq!(s.sources, vec![SourceKind::Thermal]);
    }

    #[test]
    fn geometry_config() {
        let c = FileConfig::parse(
            r#"
            [experiment]
            mu = 0.2
            [experiment.geometry]
            pixel_area = 4.0
            coherence_area = 1.0
            detection_time = 10.0
            coherence_time = 1.0
            object_area = 100.0
            base_efficiency_1 = 0.5
            base_efficiency_2 = 0.5
            "#,
        )
        .unwrap();
        let p = c.params(None).unwrap();
        assert_eq!((p.modes_per_pixel, p.resolution_cells), (40, 25));
    }

    #[test]
    fn conflicts_are_rejected() {
        let bad = FileConfig::parse("[experiment]\nresolution_cells = 3\n[mask]\nascii = \"##\\n..\"").unwrap();
        assert!(bad.params(None).is_err());
        assert!(FileConfig::parse("bogus = 1").is_err());
        let both = FileConfig::parse("[experiment]\npump_mu_variance = 0.1\npump_power_jitter = 0.1").unwrap();
        assert!(both.params(None).is_err());
    }
}
