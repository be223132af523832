//! Sweep presets for the standard SNR curves.

use anyhow::Result;
use serde::Serialize;

use crate::sweep::{log_space, Axis, RunMode, SweepSpec};
use ghostsnr::protocols::ProtocolKind;
use ghostsnr::{ExperimentParams, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
pub enum Figure {
    /// All protocols vs illumination, M = 1, R = 100, lossless.
    Fig2,
    /// Cov vs illumination for balanced losses.
    Fig3a,
    /// Cov vs illumination with `eta1 = 1` and a lossy reference arm.
    Fig3b,
    /// Cov vs illumination for several mode counts, lossless.
    Fig4,
    /// Twin beams vs resolution at the twin-beam experiment's parameters.
    Fig7,
    /// Thermal light vs resolution at the thermal experiment's parameters.
    Fig8,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4 => "fig4",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }
}

const BOTH: [SourceKind; 2] = [SourceKind::TwinBeam, SourceKind::Thermal];

fn illumination_axis() -> Vec<f64> {
    // eight points per decade
    log_space(1e-3, 1e4, 57)
}

fn lossless(m: u64, r: u64) -> ExperimentParams {
    ExperimentParams::new(SourceKind::TwinBeam, 1.0, m, 1.0, r, 4000).expect("valid preset")
}

/// The sweeps behind one figure, one per plotted series.
pub fn preset(figure: Figure, mode: RunMode, replicas: u32, seed: u64) -> Result<Vec<SweepSpec>> {
    let spec = |series: String, axis, values, fixed, protocols: &[ProtocolKind], sources: &[SourceKind]| SweepSpec {
        series,
        axis,
        values,
        fixed,
        protocols: protocols.to_vec(),
        sources: sources.to_vec(),
        mode,
        replicas,
        seed,
    };
    let cov = [ProtocolKind::Covariance];
    Ok(match figure {
        Figure::Fig2 => vec![spec(
            "M=1 R=100".into(),
            Axis::Illumination,
            illumination_axis(),
            lossless(1, 100),
            &ProtocolKind::ALL,
            &BOTH,
        )],
        Figure::Fig3a => [1.0, 0.5, 0.1]
            .into_iter()
            .map(|eta| {
                let fixed = ExperimentParams::new(SourceKind::TwinBeam, 1.0, 1, eta, 100, 4000).expect("valid preset");
                spec(
                    format!("eta={eta}"),
                    Axis::Illumination,
                    illumination_axis(),
                    fixed,
                    &cov,
                    &BOTH,
                )
            })
            .collect(),
        Figure::Fig3b => [0.9, 0.5, 0.1]
            .into_iter()
            .map(|eta2| {
                let mut fixed = lossless(1, 100);
                fixed.eta2 = eta2;
                spec(
                    format!("eta1=1 eta2={eta2}"),
                    Axis::Illumination,
                    illumination_axis(),
                    fixed,
                    &cov,
                    &BOTH,
                )
            })
            .collect(),
        Figure::Fig4 => [1u64, 10, 100, 1000]
            .into_iter()
            .map(|m| {
                spec(
                    format!("M={m}"),
                    Axis::Illumination,
                    illumination_axis(),
                    lossless(m, 100),
                    &cov,
                    &BOTH,
                )
            })
            .collect(),
        Figure::Fig7 => {
            let fixed = ExperimentParams::new(SourceKind::TwinBeam, 0.2, 20_000, 0.42, 25, 4000).expect("valid preset");
            vec![spec(
                "twin mu=0.2 M=20000 eta=0.42".into(),
                Axis::Resolution,
                vec![4.0, 9.0, 16.0, 25.0, 49.0, 100.0, 195.0],
                fixed,
                &ProtocolKind::ALL,
                &[SourceKind::TwinBeam],
            )]
        }
        Figure::Fig8 => {
            let fixed = ExperimentParams::new(SourceKind::Thermal, 1e4, 1, 1.0, 25, 4000).expect("valid preset");
            vec![spec(
                "thermal mu=1e4 M=1".into(),
                Axis::Resolution,
                vec![4.0, 9.0, 16.0, 25.0, 49.0, 100.0, 200.0],
                fixed,
                &ProtocolKind::ALL,
                &[SourceKind::Thermal],
            )]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::run_sweep;
    use clap::ValueEnum;

    #[test]
    fn every_preset_runs_analytically() {
        for &fig in Figure::value_variants() {
            for spec in preset(fig, RunMode::Analytic, 1, 0).unwrap() {
                let rows = run_sweep(&spec).unwrap();
                assert!(
                    rows.iter()
                        .all(|r| r.analytic.is_some_and(|v| v.is_finite() && v > 0.0)),
                    "{fig:?}"
                );
            }
        }
    }

    #[test]
    fn fig2_covers_the_illumination_range() {
        let specs = preset(Figure::Fig2, RunMode::Analytic, 1, 0).unwrap();
        let v = &specs[0].values;
        assert!((v[0] - 1e-3).abs() < 1e-15);
        assert!((v[v.len() - 1] / 1e4 - 1.0).abs() < 1e-12);
        assert_eq!(specs[0].fixed.modes_per_pixel, 1);
        assert_eq!(specs[0].fixed.resolution_cells, 100);
    }
}
