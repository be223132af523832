use std::time::Instant;

use ghostsnr::moments::SourceKind;
use ghostsnr::protocols::{lossless_closed_form, snr, snr_all, AnalysisOptions, ProtocolKind};
use ghostsnr::ExperimentParams;

const MUS: [f64; 5] = [0.01, 0.2, 1.0, 10.0, 1e4];
const MODES: [u64; 3] = [1, 4, 100];
const CELLS: [u64; 3] = [1, 10, 100];

#[test]
fn pipeline_matches_closed_forms_on_the_grid() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for source in SourceKind::ALL {
        for mu in MUS {
            for m in MODES {
                for r in CELLS {
                    let p = ExperimentParams::new(source, mu, m, 1.0, r, 1000).unwrap();
                    for result in snr_all(&p, AnalysisOptions::default()).unwrap() {
                        let kind = result.kind;
                        let got = result.snr_per_sqrt_frame;
                        let want = lossless_closed_form(kind, source, mu, m, r);
                        let rel = (got - want).abs() / want;
                        assert!(rel <= 1e-9, "{kind} {source} mu={mu} M={m} R={r}: {got} vs {want}");
                        worst = worst.max(rel);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    eprintln!("worst relative deviation {worst:.2e} in {elapsed:?}");
}

#[test]
fn spot_values() {
    let cases = [
        (ProtocolKind::Covariance, SourceKind::TwinBeam, (2.0f64 / 19.0).sqrt()),
        (ProtocolKind::Covariance, SourceKind::Thermal, (1.0f64 / 20.0).sqrt()),
        (ProtocolKind::NormalizedG2, SourceKind::TwinBeam, (2.0f64 / 11.0).sqrt()),
        (
            ProtocolKind::DifferenceVariance,
            SourceKind::TwinBeam,
            2.0 / 21.0f64.sqrt(),
        ),
    ];
    for (kind, source, want) in cases {
        let p = ExperimentParams::new(source, 1.0, 1, 1.0, 1, 100).unwrap();
        let got = snr(kind, &p).unwrap().snr_per_sqrt_frame;
        assert!((got - want).abs() <= 1e-12 * want, "{kind} {source}: {got} vs {want}");
    }
}

#[test]
fn plateau_at_high_illumination() {
    let bound = (1.0f64 / 200.0).sqrt();
    for source in SourceKind::ALL {
        for kind in [
            ProtocolKind::NormalizedG2,
            ProtocolKind::Covariance,
            ProtocolKind::DifferenceVariance,
        ] {
            let p = ExperimentParams::new(source, 1e4, 1, 1.0, 100, 100).unwrap();
            let got = snr(kind, &p).unwrap().snr_per_sqrt_frame;
            assert!((got / bound - 1.0).abs() < 0.05, "{kind} {source}: {got}");
        }
    }
}

#[test]
fn glauber_collapses_with_resolution() {
    let at = |kind, r| {
        let p = ExperimentParams::new(SourceKind::TwinBeam, 100.0, 1, 1.0, r, 100).unwrap();
        snr(kind, &p).unwrap().snr_per_sqrt_frame
    };
    let g: Vec<f64> = [10, 30, 100, 300]
        .iter()
        .map(|&r| at(ProtocolKind::G2, r) * r as f64)
        .collect();
    let c: Vec<f64> = [10, 30, 100, 300]
        .iter()
        .map(|&r| at(ProtocolKind::Covariance, r) * (r as f64).sqrt())
        .collect();
    // some constant c has every value in [c / f, c f] iff max / min <= f^2
    let near_constant = |v: &[f64], f: f64| {
        let hi = v.iter().cloned().fold(0.0, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo <= f * f
    };
    assert!(near_constant(&g, 2.0), "{g:?}");
    assert!(near_constant(&c, 1.1), "{c:?}");
}
