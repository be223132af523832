//! Monte-Carlo photon-count frames, numerical masks and the empirical side
//! of every estimator.
//!
//! A frame holds one count per cell for the object arm (already multiplied
//! by the mask, so `T = 0` cells read 0) and one per cell for the reference
//! arm. The bucket of a frame is the sum of its object counts.

mod container;
mod estimators;
mod sampling;

pub use container::{read_stack, write_stack, write_stack_csv, MAGIC, VERSION};
pub use estimators::{
    difference_variance, empirical_moments, empirical_snr, jackknife, reconstruct, region_covariance, Estimate,
    GhostImage, MomentEstimates, SnrReport,
};
pub use sampling::{bose_einstein_sum, pump_variance_from_power_jitter, sample_stack};

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ExperimentParams;

/// Binary transmission pattern on a `width x height` grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskSpec {
    width: usize,
    height: usize,
    transmission: Vec<bool>,
}

impl MaskSpec {
    pub fn new(width: usize, height: usize, transmission: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMask(format!("empty grid {width}x{height}")));
        }
        if transmission.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "{} transmission values for a {width}x{height} grid",
                transmission.len()
            )));
        }
        let inside = transmission.iter().filter(|&&t| t).count();
        if inside == 0 {
            return Err(Error::InvalidMask("no transmitting cell".into()));
        }
        if inside == transmission.len() {
            return Err(Error::InvalidMask("no blocked cell to estimate the background".into()));
        }
        Ok(Self {
            width,
            height,
            transmission,
        })
    }

    /// Transmitting rectangle `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn rectangle(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > width || y0 + h > height {
            return Err(Error::InvalidMask(format!(
                "rectangle {w}x{h} at ({x0}, {y0}) leaves the {width}x{height} grid"
            )));
        }
        let transmission = (0..width * height)
            .map(|i| {
                let (x, y) = (i % width, i / width);
                (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y)
            })
            .collect();
        Self::new(width, height, transmission)
    }

    /// Parses rows of `#` (transmitting) and `.` (blocked).
    pub fn from_ascii(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut transmission = Vec::with_capacity(width * rows.len());
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::InvalidMask(format!("row {y} is not {width} cells wide")));
            }
            for c in row.chars() {
                transmission.push(match c {
                    '#' | '1' => true,
                    '.' | '0' => false,
                    other => return Err(Error::InvalidMask(format!("unexpected character `{other}`"))),
                });
            }
        }
        Self::new(width, rows.len(), transmission)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.transmission.len()
    }

    pub fn transmits(&self, cell: usize) -> bool {
        self.transmission[cell]
    }

    pub fn transmission(&self) -> &[bool] {
        &self.transmission
    }

    /// `R`, the number of transmitting cells.
    pub fn in_cell_count(&self) -> usize {
        self.in_cells().len()
    }

    pub fn in_cells(&self) -> Vec<usize> {
        (0..self.cells()).filter(|&i| self.transmission[i]).collect()
    }

    pub fn out_cells(&self) -> Vec<usize> {
        (0..self.cells()).filter(|&i| !self.transmission[i]).collect()
    }
}

/// Per-cell counts of every frame, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub enum Counts {
    Raw(Vec<u32>),
    Normalized(Vec<f64>),
}

impl Counts {
    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        match self {
            Counts::Raw(v) => v[index] as f64,
            Counts::Normalized(v) => v[index],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Counts::Raw(v) => v.len(),
            Counts::Normalized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_normalized(&self) -> bool {
        matches!(self, Counts::Normalized(_))
    }
}

/// `K` frames of object and reference counts with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub params: ExperimentParams,
    pub mask: MaskSpec,
    pub seed: u64,
    object: Counts,
    reference: Counts,
    frame_mu: Option<Vec<f64>>,
}

impl FrameStack {
    /// Assembles a stack from raw parts, checking that the shapes agree.
    pub fn from_parts(
        params: ExperimentParams,
        mask: MaskSpec,
        seed: u64,
        object: Counts,
        reference: Counts,
        frame_mu: Option<Vec<f64>>,
    ) -> Result<Self> {
        let cells = mask.cells();
        if object.len() != reference.len() || !object.len().is_multiple_of(cells) {
            return Err(Error::StackMismatch(format!(
                "{} object and {} reference values for {cells} cells",
                object.len(),
                reference.len()
            )));
        }
        if object.is_normalized() != reference.is_normalized() {
            return Err(Error::StackMismatch("arms disagree on normalization".into()));
        }
        let frames = object.len() / cells;
        if frames as u64 != params.frames {
            return Err(Error::StackMismatch(format!(
                "{frames} frames stored, parameters say {}",
                params.frames
            )));
        }
        if let Some(mu) = &frame_mu {
            if mu.len() != frames {
                return Err(Error::StackMismatch(format!(
                    "{} brightness records for {frames} frames",
                    mu.len()
                )));
            }
        }
        if mask.in_cell_count() as u64 != params.resolution_cells {
            return Err(Error::StackMismatch(format!(
                "mask transmits {} cells, parameters say R = {}",
                mask.in_cell_count(),
                params.resolution_cells
            )));
        }
        Ok(Self {
            params,
            mask,
            seed,
            object,
            reference,
            frame_mu,
        })
    }

    pub fn frames(&self) -> usize {
        self.object.len() / self.mask.cells()
    }

    pub fn cells(&self) -> usize {
        self.mask.cells()
    }

    pub fn is_normalized(&self) -> bool {
        self.object.is_normalized()
    }

    pub fn object_counts(&self) -> &Counts {
        &self.object
    }

    pub fn reference_counts(&self) -> &Counts {
        &self.reference
    }

    /// Brightness `mu` drawn for each frame when the pump fluctuates.
    pub fn frame_mu(&self) -> Option<&[f64]> {
        self.frame_mu.as_deref()
    }

    #[inline]
    pub fn object(&self, frame: usize, cell: usize) -> f64 {
        self.object.get(frame * self.cells() + cell)
    }

    #[inline]
    pub fn reference(&self, frame: usize, cell: usize) -> f64 {
        self.reference.get(frame * self.cells() + cell)
    }

    /// Object-arm sum over the transmitting cells.
    pub fn bucket(&self, frame: usize) -> f64 {
        let row = frame * self.cells();
        (0..self.cells()).map(|c| self.object.get(row + c)).sum()
    }

    pub fn buckets(&self) -> Vec<f64> {
        (0..self.frames()).map(|k| self.bucket(k)).collect()
    }
}

/// Reference-grid cells whose frame mean sets the normalization factor.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum NormalizationRegion {
    #[default]
    WholeGrid,
    Cells(Vec<usize>),
}

/// Divides every frame (both arms) by its mean reference count over
/// `region` and multiplies by the mean of that quantity over the kept
/// frames. Frames with a zero region mean are dropped.
pub fn normalize_frames(stack: &FrameStack, region: &NormalizationRegion) -> Result<FrameStack> {
    let cells: Vec<usize> = match region {
        NormalizationRegion::WholeGrid => (0..stack.cells()).collect(),
        NormalizationRegion::Cells(c) => c.clone(),
    };
    if cells.is_empty() {
        return Err(Error::InvalidMask("empty normalization region".into()));
    }
    if let Some(&bad) = cells.iter().find(|&&c| c >= stack.cells()) {
        return Err(Error::InvalidMask(format!("normalization cell {bad} outside the grid")));
    }

    let means: Vec<f64> = (0..stack.frames())
        .map(|k| cells.iter().map(|&c| stack.reference(k, c)).sum::<f64>() / cells.len() as f64)
        .collect();
    let kept: Vec<usize> = (0..stack.frames()).filter(|&k| means[k] > 0.0).collect();
    let dropped = stack.frames() - kept.len();
    if dropped > 0 {
        warn!("normalization dropped {dropped} frame(s) with an empty region");
    }
    if kept.len() < 2 {
        return Err(Error::StackMismatch(format!(
            "{} usable frame(s) after normalization",
            kept.len()
        )));
    }
    let global = kept.iter().map(|&k| means[k]).sum::<f64>() / kept.len() as f64;

    let n = stack.cells();
    let mut object = Vec::with_capacity(kept.len() * n);
    let mut reference = Vec::with_capacity(kept.len() * n);
    for &k in &kept {
        let scale = global / means[k];
        object.extend((0..n).map(|c| stack.object(k, c) * scale));
        reference.extend((0..n).map(|c| stack.reference(k, c) * scale));
    }
    let frame_mu = stack.frame_mu.as_ref().map(|mu| kept.iter().map(|&k| mu[k]).collect());
    let mut params = stack.params;
    params.frames = kept.len() as u64;
    FrameStack::from_parts(
        params,
        stack.mask.clone(),
        stack.seed,
        Counts::Normalized(object),
        Counts::Normalized(reference),
        frame_mu,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::SourceKind;

    fn fixed_stack(scales: &[f64]) -> FrameStack {
        let mask = MaskSpec::rectangle(3, 2, 0, 0, 2, 1).unwrap();
        let pattern = [3.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let refs = [2.0, 5.0, 1.0, 4.0, 3.0, 7.0];
        let mut object = Vec::new();
        let mut reference = Vec::new();
        for s in scales {
            object.extend(pattern.iter().map(|v| v * s));
            reference.extend(refs.iter().map(|v| v * s));
        }
        let params = ExperimentParams::new(SourceKind::Thermal, 1.0, 1, 1.0, 2, scales.len() as u64).unwrap();
        FrameStack::from_parts(
            params,
            mask,
            0,
            Counts::Normalized(object),
            Counts::Normalized(reference),
            None,
        )
        .unwrap()
    }

    #[test]
    fn mask_shapes() {
        let m = MaskSpec::from_ascii("#.\n##\n..").unwrap();
        assert_eq!((m.width(), m.height(), m.in_cell_count()), (2, 3, 3));
        assert_eq!(m.out_cells(), vec![1, 4, 5]);
        assert!(MaskSpec::from_ascii("##\n##").is_err());
        assert!(MaskSpec::from_ascii("..").is_err());
        assert!(MaskSpec::from_ascii("#.\n#").is_err());
        assert!(MaskSpec::rectangle(4, 4, 3, 0, 2, 1).is_err());
        assert_eq!(
            MaskSpec::rectangle(4, 4, 1, 1, 2, 2).unwrap().in_cells(),
            vec![5, 6, 9, 10]
        );
    }

    #[test]
    fn identical_frames_are_unchanged() {
        let s = fixed_stack(&[1.0, 1.0, 1.0]);
        let n = normalize_frames(&s, &NormalizationRegion::WholeGrid).unwrap();
        for k in 0..3 {
            for c in 0..6 {
                assert!((n.object(k, c) - s.object(k, c)).abs() < 1e-12);
                assert!((n.reference(k, c) - s.reference(k, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_factors_are_removed() {
        let s = fixed_stack(&[1.0, 2.0, 0.5, 3.0]);
        let n = normalize_frames(&s, &NormalizationRegion::Cells(vec![2, 3, 5])).unwrap();
        for k in 1..4 {
            for c in 0..6 {
                assert!((n.reference(k, c) - n.reference(0, c)).abs() < 1e-12);
                assert!((n.object(k, c) - n.object(0, c)).abs() < 1e-12);
            }
        }
        // global scale kept: mean scale 1.625 over the region
        assert!((n.reference(0, 2) - 1.625).abs() < 1e-12);
    }

    #[test]
    fn empty_frames_are_dropped() {
        let s = fixed_stack(&[1.0, 0.0, 2.0]);
        let n = normalize_frames(&s, &NormalizationRegion::WholeGrid).unwrap();
        assert_eq!(n.frames(), 2);
        assert_eq!(n.params.frames, 2);
        assert!(normalize_frames(&s, &NormalizationRegion::Cells(vec![])).is_err());
        assert!(normalize_frames(&s, &NormalizationRegion::Cells(vec![6])).is_err());
    }
}
