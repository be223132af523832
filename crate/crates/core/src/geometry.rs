//! Statistical parameters of a ghost-imaging run and their derivation from
//! the physical detection geometry.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability, Error, Result};
use crate::moments::SourceKind;

/// Physical sizes that fix the mode and cell counts of an experiment.
///
/// Areas and times may use any unit as long as each pair (pixel vs
/// coherence area, detection vs coherence time) shares one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGeometry {
    pub pixel_area: f64,
    pub coherence_area: f64,
    pub detection_time: f64,
    pub coherence_time: f64,
    /// Area of the object where the transmission is 1.
    pub object_area: f64,
    /// Efficiency of the bucket arm.
    pub base_efficiency_1: f64,
    /// Efficiency of the reference arm before the geometric collection factor.
    pub base_efficiency_2: f64,
}

/// Integer mode/cell counts obtained from a [`DetectionGeometry`], with the
/// unrounded ratios kept so the rounding can be reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCounts {
    pub spatial_ratio: f64,
    pub temporal_ratio: f64,
    pub cell_ratio: f64,
    pub spatial_modes: u64,
    pub temporal_modes: u64,
    pub collection_efficiency: f64,
}

impl ModeCounts {
    pub fn modes_per_pixel(&self) -> u64 {
        self.spatial_modes * self.temporal_modes
    }

    pub fn resolution_cells(&self) -> u64 {
        round_at_least_one(self.cell_ratio)
    }
}

fn round_at_least_one(x: f64) -> u64 {
    (x.round() as u64).max(1)
}

impl DetectionGeometry {
    pub fn validate(&self) -> Result<()> {
        check_positive("pixel_area", self.pixel_area)?;
        check_positive("coherence_area", self.coherence_area)?;
        check_positive("detection_time", self.detection_time)?;
        check_positive("coherence_time", self.coherence_time)?;
        check_positive("object_area", self.object_area)?;
        check_probability("base_efficiency_1", self.base_efficiency_1)?;
        check_probability("base_efficiency_2", self.base_efficiency_2)
    }

    pub fn mode_counts(&self) -> Result<ModeCounts> {
        self.validate()?;
        let spatial_ratio = self.pixel_area / self.coherence_area;
        let temporal_ratio = self.detection_time / self.coherence_time;
        Ok(ModeCounts {
            spatial_ratio,
            temporal_ratio,
            cell_ratio: self.object_area / self.pixel_area.max(self.coherence_area),
            spatial_modes: round_at_least_one(spatial_ratio.max(1.0)),
            temporal_modes: round_at_least_one(temporal_ratio.max(1.0)),
            collection_efficiency: spatial_ratio.min(1.0),
        })
    }
}

/// Derives the statistical parameters of an experiment from its geometry.
///
/// Mode and cell counts are rounded to the nearest integer and floored at
/// one, so analytic and Monte-Carlo paths see the same integers.
pub fn derive_params(geom: &DetectionGeometry, source: SourceKind, mu: f64, frames: u64) -> Result<ExperimentParams> {
    let counts = geom.mode_counts()?;
    let eta2 = geom.base_efficiency_2 * counts.collection_efficiency;
    check_probability("eta2", eta2)?;
    let params = ExperimentParams {
        source,
        mu,
        modes_per_pixel: counts.modes_per_pixel(),
        eta1: geom.base_efficiency_1,
        eta2,
        resolution_cells: counts.resolution_cells(),
        frames,
        pump_mu_variance: 0.0,
    };
    params.validate()?;
    Ok(params)
}

/// Everything the moment calculus needs to describe one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub source: SourceKind,
    /// Mean photon number per spatiotemporal mode.
    pub mu: f64,
    pub modes_per_pixel: u64,
    /// Bucket-arm detection probability.
    pub eta1: f64,
    /// Reference-arm detection probability, collection factor included.
    pub eta2: f64,
    pub resolution_cells: u64,
    pub frames: u64,
    /// Frame-to-frame variance of `mu` caused by pump instability.
    #[serde(default)]
    pub pump_mu_variance: f64,
}

impl ExperimentParams {
    /// Balanced-loss parameters with a stable pump.
    pub fn new(
        source: SourceKind,
        mu: f64,
        modes_per_pixel: u64,
        eta: f64,
        resolution_cells: u64,
        frames: u64,
    ) -> Result<Self> {
        let params = Self {
            source,
            mu,
            modes_per_pixel,
            eta1: eta,
            eta2: eta,
            resolution_cells,
            frames,
            pump_mu_variance: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mu", self.mu)?;
        check_probability("eta1", self.eta1)?;
        check_probability("eta2", self.eta2)?;
        if self.modes_per_pixel < 1 {
            return Err(Error::InvalidParameter {
                name: "modes_per_pixel",
                value: self.modes_per_pixel as f64,
                reason: "at least one mode per pixel",
            });
        }
        if self.resolution_cells < 1 {
            return Err(Error::InvalidParameter {
                name: "resolution_cells",
                value: self.resolution_cells as f64,
                reason: "at least one resolution cell",
            });
        }
        if self.frames < 2 {
            return Err(Error::InvalidParameter {
                name: "frames",
                value: self.frames as f64,
                reason: "at least two frames",
            });
        }
        if !(self.pump_mu_variance >= 0.0 && self.pump_mu_variance.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "pump_mu_variance",
                value: self.pump_mu_variance,
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }

    /// Mean number of photons detected per reference pixel per frame.
    pub fn illumination(&self) -> f64 {
        self.eta2 * self.modes_per_pixel as f64 * self.mu
    }

    /// Per-mode excess noise `illumination / M`.
    pub fn excess_noise(&self) -> f64 {
        self.illumination() / self.modes_per_pixel as f64
    }

    /// Replaces `mu` so that the illumination equals `illumination`.
    pub fn with_illumination(mut self, illumination: f64) -> Result<Self> {
        let per_photon = self.eta2 * self.modes_per_pixel as f64;
        if per_photon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eta2",
                value: self.eta2,
                reason: "illumination cannot be reached with zero reference efficiency",
            });
        }
        self.mu = illumination / per_photon;
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(pixel: f64, coh: f64, det: f64, coh_t: f64) -> DetectionGeometry {
        DetectionGeometry {
            pixel_area: pixel,
            coherence_area: coh,
            detection_time: det,
            coherence_time: coh_t,
            object_area: 100.0 * pixel.max(coh),
            base_efficiency_1: 1.0,
            base_efficiency_2: 1.0,
        }
    }

    #[test]
    fn matched_pixel_is_single_mode() {
        let p = derive_params(&geom(1.0, 1.0, 1.0, 1.0), SourceKind::TwinBeam, 0.5, 10).unwrap();
        assert_eq!(p.modes_per_pixel, 1);
        assert_eq!(p.eta2, 1.0);
        assert_eq!(p.resolution_cells, 100);
    }

    #[test]
    fn binned_ccd_mode_count() {
        // 240x240 um^2 superpixel, 120x120 um^2 speckle, 5 ns pulse, 1 ps coherence
        let g = geom(240.0 * 240.0, 120.0 * 120.0, 5e-9, 1e-12);
        let counts = g.mode_counts().unwrap();
        assert_eq!(counts.spatial_modes, 4);
        assert_eq!(counts.temporal_modes, 5000);
        let p = derive_params(&g, SourceKind::TwinBeam, 0.2, 4000).unwrap();
        assert_eq!(p.modes_per_pixel, 20_000);
    }

    #[test]
    fn small_pixel_reduces_collection() {
        let mut g = geom(0.5, 1.0, 1.0, 1.0);
        g.base_efficiency_2 = 0.8;
        let counts = g.mode_counts().unwrap();
        assert_eq!(counts.collection_efficiency, 0.5);
        let p = derive_params(&g, SourceKind::Thermal, 1.0, 10).unwrap();
        assert!((p.eta2 - 0.4).abs() < 1e-15);
        assert_eq!(p.modes_per_pixel, 1);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(geom(0.0, 1.0, 1.0, 1.0).validate().is_err());
        assert!(geom(1.0, -1.0, 1.0, 1.0).validate().is_err());
        let mut g = geom(1.0, 1.0, 1.0, 1.0);
        g.base_efficiency_1 = 1.5;
        assert!(g.validate().is_err());
    }

    #[test]
    fn illumination_is_derived() {
        let p = ExperimentParams::new(SourceKind::TwinBeam, 0.2, 20_000, 0.42, 100, 4000).unwrap();
        assert!((p.illumination() - 1680.0).abs() < 1e-9);
        assert!((p.excess_noise() - 0.084).abs() < 1e-12);
        let q = p.with_illumination(1.0).unwrap();
        assert!((q.illumination() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_domain() {
        assert!(ExperimentParams::new(SourceKind::Thermal, 0.0, 1, 1.0, 1, 10).is_err());
        assert!(ExperimentParams::new(SourceKind::Thermal, 1.0, 0, 1.0, 1, 10).is_err());
        assert!(ExperimentParams::new(SourceKind::Thermal, 1.0, 1, 1.0, 0, 10).is_err());
        assert!(ExperimentParams::new(SourceKind::Thermal, 1.0, 1, 1.0, 1, 1).is_err());
        let mut p = ExperimentParams::new(SourceKind::Thermal, 1.0, 1, 1.0, 1, 10).unwrap();
        p.pump_mu_variance = -1.0;
        assert!(p.validate().is_err());
    }
}
