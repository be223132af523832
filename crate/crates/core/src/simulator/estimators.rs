//! Ghost-image reconstruction and empirical statistics of a frame stack.

use serde::Serialize;

use super::{FrameStack, MaskSpec};
use crate::error::{Error, Result};
use crate::moments::{orders, JointMoments};
use crate::protocols::ProtocolKind;

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Distance from `expected` in standard errors. With a zero standard
    /// error only an exact match scores 0.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.value - expected).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// Delete-one jackknife over frames. `rows[k]` holds the per-frame inputs;
/// `stat` maps column means over `n` frames to the statistic.
pub fn jackknife<const N: usize>(rows: &[[f64; N]], stat: impl Fn(&[f64; N], usize) -> f64) -> Estimate {
    let k = rows.len();
    let mut total = [0.0; N];
    for row in rows {
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    let value = stat(&total.map(|t| t / k as f64), k);
    if k < 2 {
        return Estimate {
            value,
            stderr: f64::NAN,
        };
    }
    let n = k - 1;
    let leave_out: Vec<f64> = rows
        .iter()
        .map(|row| {
            let means: [f64; N] = std::array::from_fn(|i| (total[i] - row[i]) / n as f64);
            stat(&means, n)
        })
        .collect();
    let centre = leave_out.iter().sum::<f64>() / k as f64;
    let spread = leave_out.iter().map(|t| (t - centre).powi(2)).sum::<f64>();
    Estimate {
        value,
        stderr: (spread * n as f64 / k as f64).sqrt(),
    }
}

/// Per-cell estimator values `S(x_j)` on the mask grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhostImage {
    pub kind: ProtocolKind,
    pub width: usize,
    pub height: usize,
    /// Zero where `flagged` is set.
    pub values: Vec<f64>,
    /// Cells where the estimator is undefined (zero mean in a `g2` denominator).
    pub flagged: Vec<bool>,
    pub frames_used: usize,
}

/// Evaluates `kind` for every reference cell from frame averages.
///
/// Cov uses `1/K` normalization, Var the unbiased sample variance of
/// `bucket - N2(x_j)`.
pub fn reconstruct(stack: &FrameStack, kind: ProtocolKind) -> Result<GhostImage> {
    let k = stack.frames();
    if k < 2 {
        return Err(Error::StackMismatch(format!("{k} frame(s); reconstruction needs two")));
    }
    let n = stack.cells();
    let kf = k as f64;
    let buckets = stack.buckets();
    let mean_x = buckets.iter().sum::<f64>() / kf;
    let mut mean_z = vec![0.0; n];
    for f in 0..k {
        for (c, m) in mean_z.iter_mut().enumerate() {
            *m += stack.reference(f, c);
        }
    }
    mean_z.iter_mut().for_each(|m| *m /= kf);

    let mut cross = vec![0.0; n];
    let mut diff_sq = vec![0.0; n];
    for (f, x) in buckets.iter().enumerate() {
        let dx = x - mean_x;
        for c in 0..n {
            let dz = stack.reference(f, c) - mean_z[c];
            cross[c] += dx * dz;
            diff_sq[c] += (dx - dz) * (dx - dz);
        }
    }

    let mut flagged = vec![false; n];
    let values = (0..n)
        .map(|c| {
            let cov = cross[c] / kf;
            match kind {
                ProtocolKind::G2 => cov + mean_x * mean_z[c],
                ProtocolKind::Covariance => cov,
                ProtocolKind::DifferenceVariance => diff_sq[c] / (kf - 1.0),
                ProtocolKind::NormalizedG2 => {
                    let denom = mean_x * mean_z[c];
                    if denom > 0.0 {
                        (cov + denom) / denom
                    } else {
                        flagged[c] = true;
                        0.0
                    }
                }
            }
        })
        .collect();
    Ok(GhostImage {
        kind,
        width: stack.mask.width(),
        height: stack.mask.height(),
        values,
        flagged,
        frames_used: k,
    })
}

/// Spatial contrast-to-noise of a ghost image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    pub kind: ProtocolKind,
    pub mean_in: f64,
    pub mean_out: f64,
    pub var_in: f64,
    pub var_out: f64,
    pub contrast: f64,
    pub noise: f64,
    pub snr: f64,
    /// Set when both contrast and noise vanish; `snr` is then 0.
    pub degenerate: bool,
    pub cells_in: usize,
    pub cells_out: usize,
    pub frames_used: usize,
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Contrast between the transmitting and blocked regions over the spatial
/// spread inside each, skipping flagged cells.
pub fn empirical_snr(image: &GhostImage, mask: &MaskSpec) -> Result<SnrReport> {
    if image.values.len() != mask.cells() {
        return Err(Error::StackMismatch(format!(
            "image has {} cells, mask {}",
            image.values.len(),
            mask.cells()
        )));
    }
    let pick = |inside: bool| -> Vec<f64> {
        (0..mask.cells())
            .filter(|&c| mask.transmits(c) == inside && !image.flagged[c])
            .map(|c| image.values[c])
            .collect()
    };
    let (inner, outer) = (pick(true), pick(false));
    if inner.len() < 2 || outer.len() < 2 {
        return Err(Error::InvalidMask(format!(
            "{} usable cell(s) inside and {} outside; two of each are needed",
            inner.len(),
            outer.len()
        )));
    }
    let (mean_in, var_in) = mean_and_variance(&inner);
    let (mean_out, var_out) = mean_and_variance(&outer);
    let contrast = (mean_in - mean_out).abs();
    let noise = (var_in + var_out).sqrt();
    let (snr, degenerate) = if noise > 0.0 {
        (contrast / noise, false)
    } else if contrast == 0.0 {
        (0.0, true)
    } else {
        (f64::INFINITY, true)
    };
    Ok(SnrReport {
        kind: image.kind,
        mean_in,
        mean_out,
        var_in,
        var_out,
        contrast,
        noise,
        snr,
        degenerate,
        cells_in: inner.len(),
        cells_out: outer.len(),
        frames_used: image.frames_used,
    })
}

/// Sample raw moments of a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    /// `<N1^p N2^q>` of a transmitting cell and its reference partner.
    pub pixel: JointMoments<Estimate>,
    /// `<bucket^p N2_in^q>`.
    pub bucket: JointMoments<Estimate>,
    /// `<bucket^p N2_out^q>`.
    pub bucket_out: JointMoments<Estimate>,
    pub frames: usize,
}

/// Running mean and variance of a per-frame quantity (Welford).
#[derive(Clone, Copy, Default)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    /// For a plain mean the delete-one jackknife error is `s / sqrt(K)`.
    fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            stderr: (self.m2 / (self.n - 1.0) / self.n).sqrt(),
        }
    }
}

fn powers(x: f64) -> [f64; 5] {
    let x2 = x * x;
    [1.0, x, x2, x2 * x, x2 * x2]
}

/// Moments pooled over cells within each frame, with standard errors from
/// the spread between frames.
pub fn empirical_moments(stack: &FrameStack) -> Result<MomentEstimates> {
    let k = stack.frames();
    if k < 100 {
        return Err(Error::StackMismatch(format!(
            "{k} frames; moment estimates need at least 100"
        )));
    }
    let inside = stack.mask.in_cells();
    let outside = stack.mask.out_cells();
    let mut acc = [[[Running::default(); 5]; 5]; 3];
    for f in 0..k {
        let mut frame = [[[0.0; 5]; 5]; 3];
        let xb = powers(stack.bucket(f));
        for &c in &inside {
            let x1 = powers(stack.object(f, c));
            let x2 = powers(stack.reference(f, c));
            for (p, q) in orders() {
                frame[0][p][q] += x1[p] * x2[q];
                frame[1][p][q] += xb[p] * x2[q];
            }
        }
        for &c in &outside {
            let x2 = powers(stack.reference(f, c));
            for (p, q) in orders() {
                frame[2][p][q] += xb[p] * x2[q];
            }
        }
        for (t, cells) in [inside.len(), inside.len(), outside.len()].into_iter().enumerate() {
            for (p, q) in orders() {
                acc[t][p][q].push(frame[t][p][q] / cells as f64);
            }
        }
    }
    let table = |t: usize| JointMoments::from_fn(|p, q| acc[t][p][q].estimate());
    Ok(MomentEstimates {
        pixel: table(0),
        bucket: table(1),
        bucket_out: table(2),
        frames: k,
    })
}

/// Unbiased variance of `N1 - N2` at one cell across frames.
pub fn difference_variance(stack: &FrameStack, cell: usize) -> Result<Estimate> {
    if cell >= stack.cells() {
        return Err(Error::InvalidMask(format!("cell {cell} outside the grid")));
    }
    let d: Vec<f64> = (0..stack.frames())
        .map(|f| stack.object(f, cell) - stack.reference(f, cell))
        .collect();
    let centre = d.iter().sum::<f64>() / d.len() as f64;
    let rows: Vec<[f64; 2]> = d.iter().map(|v| [v - centre, (v - centre).powi(2)]).collect();
    Ok(jackknife(&rows, |m, n| {
        (m[1] - m[0] * m[0]) * n as f64 / (n as f64 - 1.0)
    }))
}

/// Covariance (`1/K` convention) of the bucket with the mean reference count
/// over `cells`; equals the average of the Cov image over those cells.
pub fn region_covariance(stack: &FrameStack, cells: &[usize]) -> Result<Estimate> {
    if cells.is_empty() || cells.iter().any(|&c| c >= stack.cells()) {
        return Err(Error::InvalidMask("covariance region empty or outside the grid".into()));
    }
    let k = stack.frames();
    let x = stack.buckets();
    let z: Vec<f64> = (0..k)
        .map(|f| cells.iter().map(|&c| stack.reference(f, c)).sum::<f64>() / cells.len() as f64)
        .collect();
    let mx = x.iter().sum::<f64>() / k as f64;
    let mz = z.iter().sum::<f64>() / k as f64;
    let rows: Vec<[f64; 3]> = x
        .iter()
        .zip(&z)
        .map(|(a, b)| [a - mx, b - mz, (a - mx) * (b - mz)])
        .collect();
    Ok(jackknife(&rows, |m, _| m[2] - m[0] * m[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ExperimentParams;
    use crate::moments::SourceKind;
    use crate::simulator::Counts;

    fn stack_from(object: Vec<u32>, reference: Vec<u32>, mask: MaskSpec) -> FrameStack {
        let frames = (object.len() / mask.cells()) as u64;
        let r = mask.in_cell_count() as u64;
        let params = ExperimentParams::new(SourceKind::TwinBeam, 1.0, 1, 1.0, r, frames).unwrap();
        FrameStack::from_parts(params, mask, 0, Counts::Raw(object), Counts::Raw(reference), None).unwrap()
    }

    #[test]
    fn constant_stack_moments_are_exact() {
        let mask = MaskSpec::from_ascii("#.").unwrap();
        let s = stack_from([3, 0].repeat(200), [3, 3].repeat(200), mask);
        let m = empirical_moments(&s).unwrap();
        for (p, q) in orders() {
            let want = 3f64.powi((p + q) as i32);
            assert_eq!(m.pixel.get(p, q).value, want);
            assert_eq!(m.pixel.get(p, q).stderr, 0.0);
            assert_eq!(m.bucket_out.get(p, q).value, want);
        }
    }

    #[test]
    fn dark_reference_gives_zero_cov_and_flags_g2() {
        let mask = MaskSpec::from_ascii("##.").unwrap();
        let object: Vec<u32> = (0..30).map(|i| if i % 3 == 2 { 0 } else { i % 5 }).collect();
        let s = stack_from(object, vec![0; 30], mask.clone());
        let cov = reconstruct(&s, ProtocolKind::Covariance).unwrap();
        assert!(cov.values.iter().all(|&v| v == 0.0));
        let g2 = reconstruct(&s, ProtocolKind::NormalizedG2).unwrap();
        assert!(g2.flagged.iter().all(|&f| f));
        assert!(empirical_snr(&g2, &mask).is_err());
    }

    #[test]
    fn image_values_match_direct_formulas() {
        let mask = MaskSpec::from_ascii("#.").unwrap();
        let object = vec![1, 0, 4, 0, 2, 0, 7, 0];
        let reference = vec![2, 1, 3, 0, 2, 5, 6, 1];
        let s = stack_from(object, reference, mask);
        let x = [1.0, 4.0, 2.0, 7.0];
        let z = [1.0, 0.0, 5.0, 1.0];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let xz: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a * b).collect();
        let d: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a - b).collect();
        let g = mean(&xz);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(reconstruct(&s, ProtocolKind::G2).unwrap().values[1], g));
        assert!(close(
            reconstruct(&s, ProtocolKind::Covariance).unwrap().values[1],
            g - mean(&x) * mean(&z)
        ));
        assert!(close(
            reconstruct(&s, ProtocolKind::NormalizedG2).unwrap().values[1],
            g / (mean(&x) * mean(&z))
        ));
        let md = mean(&d);
        let var = d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / 3.0;
        assert!(close(
            reconstruct(&s, ProtocolKind::DifferenceVariance).unwrap().values[1],
            var
        ));
        // per-cell difference uses the cell's own object count
        let d0 = [-1.0, 1.0, 0.0, 1.0];
        let var0 = d0.iter().map(|v| (v - 0.25f64).powi(2)).sum::<f64>() / 3.0;
        assert!(close(difference_variance(&s, 0).unwrap().value, var0));
        let rc = region_covariance(&s, &[1]).unwrap();
        assert!(close(rc.value, g - mean(&x) * mean(&z)));
    }

    #[test]
    fn flat_image_is_degenerate() {
        let mask = MaskSpec::from_ascii("##..").unwrap();
        let image = GhostImage {
            kind: ProtocolKind::G2,
            width: 4,
            height: 1,
            values: vec![2.0; 4],
            flagged: vec![false; 4],
            frames_used: 10,
        };
        let r = empirical_snr(&image, &mask).unwrap();
        assert!(r.degenerate && r.snr == 0.0);
        let single = MaskSpec::from_ascii("#..").unwrap();
        let image = GhostImage {
            values: vec![2.0; 3],
            flagged: vec![false; 3],
            width: 3,
            ..image
        };
        assert!(empirical_snr(&image, &single).is_err());
    }

    #[test]
    fn jackknife_of_a_mean_is_the_standard_error() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        let e = jackknife(&rows, |m, _| m[0]);
        let mean = 4.0;
        let s2 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((e.value - mean).abs() < 1e-15);
        assert!((e.stderr - (s2 / 5.0).sqrt()).abs() < 1e-12);
    }
}
