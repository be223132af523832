//! Parameter sweeps: analytic SNR per protocol and source, optionally with
//! Monte-Carlo replicas at every point.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use ghostsnr::protocols::{snr_all, AnalysisOptions, ProtocolKind};
use ghostsnr::simulator::{empirical_snr, reconstruct, sample_stack, MaskSpec};
use ghostsnr::{ExperimentParams, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Illumination,
    Resolution,
    Efficiency,
    Modes,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Illumination => "illumination",
            Axis::Resolution => "resolution",
            Axis::Efficiency => "efficiency",
            Axis::Modes => "modes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Analytic,
    #[serde(alias = "monte-carlo")]
    #[value(alias = "monte-carlo")]
    Mc,
    Both,
}

impl RunMode {
    fn analytic(self) -> bool {
        matches!(self, RunMode::Analytic | RunMode::Both)
    }

    fn monte_carlo(self) -> bool {
        matches!(self, RunMode::Mc | RunMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    /// Free-form series name carried into every row.
    pub series: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: ExperimentParams,
    pub protocols: Vec<ProtocolKind>,
    pub sources: Vec<SourceKind>,
    pub mode: RunMode,
    pub replicas: u32,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.values.is_empty(), "sweep `{}` has no values", self.series);
        ensure!(
            self.values.windows(2).all(|w| w[0] < w[1]),
            "sweep `{}` values must be strictly increasing",
            self.series
        );
        ensure!(
            !self.protocols.is_empty(),
            "sweep `{}` selects no protocol",
            self.series
        );
        ensure!(!self.sources.is_empty(), "sweep `{}` selects no source", self.series);
        if self.mode.monte_carlo() {
            ensure!(self.replicas >= 1, "Monte-Carlo sweeps need at least one replica");
        }
        match self.axis {
            Axis::Illumination => {
                let per_mu = self.fixed.eta2 * self.fixed.modes_per_pixel as f64;
                ensure!(per_mu > 0.0, "cannot back-solve mu from illumination with eta2 * M = 0");
            }
            Axis::Resolution | Axis::Modes => {
                for &v in &self.values {
                    ensure!(
                        v >= 1.0 && v.fract() == 0.0,
                        "{} value {v} is not a positive integer",
                        self.axis.label()
                    );
                }
            }
            Axis::Efficiency => {
                for &v in &self.values {
                    ensure!((0.0..=1.0).contains(&v), "efficiency {v} outside [0, 1]");
                }
            }
        }
        self.fixed.validate()?;
        Ok(())
    }

    /// Parameters at one sweep value. Sweeping the illumination keeps `M`
    /// and `eta` and solves for `mu`; sweeping the efficiency sets both arms.
    pub fn params_at(&self, source: SourceKind, value: f64) -> Result<ExperimentParams> {
        let mut p = self.fixed;
        p.source = source;
        match self.axis {
            Axis::Illumination => p = p.with_illumination(value)?,
            Axis::Resolution => p.resolution_cells = value as u64,
            Axis::Modes => p.modes_per_pixel = value as u64,
            Axis::Efficiency => {
                p.eta1 = value;
                p.eta2 = value;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

/// One output row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub series: String,
    pub axis: Axis,
    pub value: f64,
    pub params: ExperimentParams,
    pub protocol: ProtocolKind,
    pub analytic: Option<f64>,
    pub mc: Option<McPoint>,
}

/// Mean of `snr / sqrt(K)` over replicas with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McPoint {
    pub snr_per_sqrt_frame: f64,
    pub stderr: f64,
    pub replicas: u32,
}

/// `R` transmitting cells on the top row of a two-row strip; every other
/// cell is blocked.
pub fn strip_mask(cells: u64) -> Result<MaskSpec> {
    let width = usize::try_from(cells.max(2)).context("resolution too large for a mask")?;
    let transmission = (0..2 * width).map(|i| (i as u64) < cells).collect();
    Ok(MaskSpec::new(width, 2, transmission)?)
}

/// Deterministic per-replica seed.
pub fn replica_seed(seed: u64, point: usize, replica: u32) -> u64 {
    let mut z = seed ^ ((point as u64) << 32 | replica as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut point = 0;
    for &source in &spec.sources {
        for &value in &spec.values {
            let params = spec.params_at(source, value)?;
            let analytic = if spec.mode.analytic() {
                Some(snr_all(&params, AnalysisOptions::default())?)
            } else {
                None
            };
            let mc = if spec.mode.monte_carlo() {
                Some(monte_carlo(spec, &params, point)?)
            } else {
                None
            };
            for &protocol in &spec.protocols {
                let idx = ProtocolKind::ALL
                    .iter()
                    .position(|&k| k == protocol)
                    .expect("known protocol");
                rows.push(SweepRow {
                    series: spec.series.clone(),
                    axis: spec.axis,
                    value,
                    params,
                    protocol,
                    analytic: analytic.as_ref().map(|a| a[idx].snr_per_sqrt_frame),
                    mc: mc.as_ref().map(|m| m[idx]),
                });
            }
            point += 1;
        }
    }
    Ok(rows)
}

fn monte_carlo(spec: &SweepSpec, params: &ExperimentParams, point: usize) -> Result<[McPoint; 4]> {
    if params.resolution_cells < 2 {
        bail!(
            "Monte-Carlo SNR needs at least two transmitting cells (R = {})",
            params.resolution_cells
        );
    }
    let mask = strip_mask(params.resolution_cells)?;
    let root_k = (params.frames as f64).sqrt();
    let mut samples: [Vec<f64>; 4] = Default::default();
    for replica in 0..spec.replicas {
        let stack = sample_stack(params, &mask, replica_seed(spec.seed, point, replica))?;
        for (i, kind) in ProtocolKind::ALL.into_iter().enumerate() {
            let report = empirical_snr(&reconstruct(&stack, kind)?, &mask)?;
            samples[i].push(report.snr / root_k);
        }
    }
    Ok(samples.map(|s| {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let stderr = if s.len() > 1 {
            (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            f64::NAN
        };
        McPoint {
            snr_per_sqrt_frame: mean,
            stderr,
            replicas: spec.replicas,
        }
    }))
}

/// `points` values spaced evenly in `log10` from `start` to `stop`.
pub fn log_space(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![start];
    }
    let (a, b) = (start.log10(), stop.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ghostsnr::protocols::snr;

    fn spec(axis: Axis, values: Vec<f64>) -> SweepSpec {
        SweepSpec {
            series: "t".into(),
            axis,
            values,
            fixed: ExperimentParams::new(SourceKind::TwinBeam, 1.0, 2, 0.5, 10, 100).unwrap(),
            protocols: ProtocolKind::ALL.to_vec(),
            sources: vec![SourceKind::TwinBeam],
            mode: RunMode::Analytic,
            replicas: 1,
            seed: 0,
        }
    }

    #[test]
    fn single_value_matches_direct_call() {
        let s = spec(Axis::Illumination, vec![3.0]);
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 4);
        for row in rows {
            assert!((row.params.mu - 3.0).abs() < 1e-12);
            let direct = snr(row.protocol, &row.params).unwrap().snr_per_sqrt_frame;
            assert_eq!(row.analytic, Some(direct));
        }
    }

    #[test]
    fn invalid_sweeps() {
        assert!(run_sweep(&spec(Axis::Illumination, vec![])).is_err());
        assert!(run_sweep(&spec(Axis::Illumination, vec![2.0, 1.0])).is_err());
        assert!(run_sweep(&spec(Axis::Resolution, vec![1.5])).is_err());
        let mut dark = spec(Axis::Illumination, vec![1.0]);
        dark.fixed.eta2 = 0.0;
        assert!(run_sweep(&dark).is_err());
    }

    #[test]
    fn strip_masks() {
        let m = strip_mask(5).unwrap();
        assert_eq!((m.width(), m.in_cell_count(), m.out_cells().len()), (5, 5, 5));
        assert_eq!(strip_mask(1).unwrap().in_cell_count(), 1);
    }

    #[test]
    fn log_spacing() {
        let v = log_space(1e-3, 1e4, 8);
        assert_eq!(v.len(), 8);
        assert!((v[0] - 1e-3).abs() < 1e-15 && (v[7] / 1e4 - 1.0).abs() < 1e-12);
        assert!((v[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_points_carry_errors() {
        let mut s = spec(Axis::Resolution, vec![4.0]);
        s.mode = RunMode::Both;
        s.replicas = 3;
        let rows = run_sweep(&s).unwrap();
        let mc = rows[0].mc.unwrap();
        assert!(mc.snr_per_sqrt_frame > 0.0 && mc.stderr > 0.0 && mc.replicas == 3);
        assert_ne!(replica_seed(1, 0, 0), replica_seed(1, 0, 1));
    }
}
