//! Validation suites with machine-readable pass/fail reports.

use std::time::Instant;

use anyhow::Result;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use ghostsnr::composition::{bucket_from_pixel, pixel_from_single};
use ghostsnr::moments::{orders, single_mode, JointMoments};
use ghostsnr::protocols::{
    asymptotic_exponent, lossless_closed_form, pump_instability_cov, snr, snr_all, AnalysisOptions, ProtocolKind,
};
use ghostsnr::simulator::{
    normalize_frames, pump_variance_from_power_jitter, region_covariance, sample_stack, MaskSpec, NormalizationRegion,
};
use ghostsnr::{ExperimentParams, SourceKind};
use ghostsnr_oracle::{bucket_sample, mode_pair, pixel_pair, Light, MomentAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Table1,
    Oracle,
    Asymptotics,
    Pump,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Table1, Suite::Oracle, Suite::Asymptotics, Suite::Pump];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    /// `|measured - expected| / |expected|`.
    Relative,
    /// `|measured - expected| / standard error`.
    StandardErrors,
    /// `|measured - expected|`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub unit: Unit,
    pub passed: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        measured: f64,
        expected: f64,
        deviation: f64,
        tolerance: f64,
        unit: Unit,
    ) -> Self {
        Self {
            name: name.into(),
            measured,
            expected,
            deviation,
            tolerance,
            unit,
            passed: deviation <= tolerance,
        }
    }

    pub fn relative(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let dev = (measured - expected).abs() / expected.abs();
        Self::new(name, measured, expected, dev, tolerance, Unit::Relative)
    }

    pub fn absolute(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(
            name,
            measured,
            expected,
            (measured - expected).abs(),
            tolerance,
            Unit::Absolute,
        )
    }

    /// `stderr == 0` accepts only an exact match.
    pub fn sigma(name: impl Into<String>, measured: f64, stderr: f64, expected: f64, tolerance: f64) -> Self {
        let diff = (measured - expected).abs();
        let dev = if diff == 0.0 { 0.0 } else { diff / stderr };
        Self::new(name, measured, expected, dev, tolerance, Unit::StandardErrors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn finish(suite: Suite, start: Instant, checks: Vec<Check>) -> Self {
        Self {
            suite,
            passed: checks.iter().all(|c| c.passed),
            seconds: start.elapsed().as_secs_f64(),
            checks,
        }
    }

    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .max_by(|a, b| (a.deviation / a.tolerance).total_cmp(&(b.deviation / b.tolerance)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tool_version: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Illumination window of the slope fit.
    pub window: (f64, f64),
    pub oracle_samples: u64,
    pub pump_frames: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            window: (1e-8, 1e-7),
            oracle_samples: 1_000_000,
            pump_frames: 1000,
        }
    }
}

pub fn validate(suites: &[Suite], opts: &ValidateOptions) -> Result<ValidationReport> {
    let reports = suites
        .iter()
        .map(|&s| match s {
            Suite::Table1 => table1_suite(),
            Suite::Oracle => oracle_suite(opts.seed, opts.oracle_samples),
            Suite::Asymptotics => asymptotics_suite(opts.window),
            Suite::Pump => pump_suite(opts.seed, opts.pump_frames),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: opts.seed,
        passed: reports.iter().all(|r| r.passed),
        suites: reports,
    })
}

pub const TABLE1_MU: [f64; 5] = [0.01, 0.2, 1.0, 10.0, 1e4];
pub const TABLE1_MODES: [u64; 3] = [1, 4, 100];
pub const TABLE1_CELLS: [u64; 3] = [1, 10, 100];

/// Moment pipeline against the lossless closed forms, relative 1e-9.
pub fn table1_suite() -> Result<SuiteReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    for source in SourceKind::ALL {
        for mu in TABLE1_MU {
            for m in TABLE1_MODES {
                for r in TABLE1_CELLS {
                    let p = ExperimentParams::new(source, mu, m, 1.0, r, 1000)?;
                    for res in snr_all(&p, AnalysisOptions::default())? {
                        let want = lossless_closed_form(res.kind, source, mu, m, r);
                        checks.push(Check::relative(
                            format!("{source} {} mu={mu} M={m} R={r}", res.kind),
                            res.snr_per_sqrt_frame,
                            want,
                            1e-9,
                        ));
                    }
                }
            }
        }
    }
    Ok(SuiteReport::finish(Suite::Table1, start, checks))
}

fn light(source: SourceKind) -> Light {
    match source {
        SourceKind::TwinBeam => Light::Twin,
        SourceKind::Thermal => Light::Thermal,
    }
}

fn moment_checks(label: &str, table: &JointMoments, acc: &MomentAccumulator, checks: &mut Vec<Check>) {
    for (p, q) in orders().skip(1) {
        let est = acc.estimate(p, q);
        checks.push(Check::sigma(
            format!("{label} <{p},{q}>"),
            est.mean,
            est.stderr,
            *table.get(p, q),
            5.0,
        ));
    }
}

/// Analytic moment tables against the brute-force oracle, 5 standard errors.
pub fn oracle_suite(seed: u64, samples: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut rng = StdRng::seed_from_u64(seed);

    let singles = [
        (SourceKind::TwinBeam, 1.0, 1.0, 1.0),
        (SourceKind::TwinBeam, 0.7, 0.6, 0.9),
        (SourceKind::Thermal, 2.0, 1.0, 1.0),
        (SourceKind::Thermal, 0.5, 0.8, 0.5),
    ];
    for (source, mu, e1, e2) in singles {
        let table = single_mode(source, mu, e1, e2)?;
        let mut acc = MomentAccumulator::new();
        for _ in 0..samples {
            let (a, b) = mode_pair(light(source), mu, e1, e2, &mut rng);
            acc.push(a, b);
        }
        moment_checks(
            &format!("single {source} mu={mu} eta=({e1},{e2})"),
            &table,
            &acc,
            &mut checks,
        );
    }

    let (mu, e1, e2) = (0.4, 0.9, 0.7);
    for source in SourceKind::ALL {
        for m in [2, 7] {
            let table = pixel_from_single(&single_mode(source, mu, e1, e2)?, m)?;
            let mut acc = MomentAccumulator::new();
            for _ in 0..samples {
                let (a, b) = pixel_pair(light(source), mu, e1, e2, m, &mut rng);
                acc.push(a, b);
            }
            moment_checks(&format!("pixel {source} M={m}"), &table.joint, &acc, &mut checks);
        }
    }

    let (mu, e1, e2, m) = (0.3, 0.8, 0.9, 2);
    for source in SourceKind::ALL {
        for r in [2, 3] {
            let pixel = pixel_from_single(&single_mode(source, mu, e1, e2)?, m)?;
            let table = bucket_from_pixel(&pixel, r)?;
            let (mut inside, mut outside) = (MomentAccumulator::new(), MomentAccumulator::new());
            for _ in 0..samples {
                let s = bucket_sample(light(source), mu, e1, e2, m, r, &mut rng);
                inside.push(s.bucket, s.ref_in);
                outside.push(s.bucket, s.ref_out);
            }
            moment_checks(
                &format!("bucket {source} M={m} R={r} in"),
                &table.joint,
                &inside,
                &mut checks,
            );
            let out = table.out.as_ref().expect("bucket tables carry the out moments");
            moment_checks(&format!("bucket {source} M={m} R={r} out"), out, &outside, &mut checks);
        }
    }
    Ok(SuiteReport::finish(Suite::Oracle, start, checks))
}

/// Least-squares slope of `ln SNR` against `ln I` over `points` log-spaced
/// illuminations in `window` (M = 1, R = 100, lossless).
pub fn fitted_slope(kind: ProtocolKind, source: SourceKind, window: (f64, f64), points: usize) -> Result<f64> {
    let template = ExperimentParams::new(source, 1.0, 1, 1.0, 100, 1000)?;
    let xs: Vec<f64> = crate::sweep::log_space(window.0, window.1, points);
    let pts = xs
        .iter()
        .map(|&i| -> Result<(f64, f64)> {
            let p = template.with_illumination(i)?;
            Ok((i.ln(), snr(kind, &p)?.snr.ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Fitted low-illumination slopes against the power-law exponents, +-0.1.
pub fn asymptotics_suite(window: (f64, f64)) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    for source in SourceKind::ALL {
        for kind in ProtocolKind::ALL {
            let slope = fitted_slope(kind, source, window, 9)?;
            checks.push(Check::absolute(
                format!("{source} {kind} slope over [{:e}, {:e}]", window.0, window.1),
                slope,
                asymptotic_exponent(kind, source),
                0.1,
            ));
        }
    }
    Ok(SuiteReport::finish(Suite::Asymptotics, start, checks))
}

/// Settings of the pump-instability experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpSetup {
    pub params: ExperimentParams,
    pub side: usize,
    pub block: usize,
}

impl PumpSetup {
    /// Twin beams, mean brightness 0.2 with 14 % pump-power jitter,
    /// M = 100, R = 25 on a 64 x 64 grid.
    pub fn standard(frames: u64) -> Result<Self> {
        let mut params = ExperimentParams::new(SourceKind::TwinBeam, 0.2, 100, 0.42, 25, frames)?;
        params.pump_mu_variance = pump_variance_from_power_jitter(0.2, 0.14);
        Ok(Self {
            params,
            side: 64,
            block: 5,
        })
    }
}

/// Covariance background from pump jitter before and after frame
/// normalization on the blocked cells.
pub fn pump_suite(seed: u64, frames: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let setup = PumpSetup::standard(frames)?;
    let p = setup.params;
    let mask = MaskSpec::rectangle(setup.side, setup.side, 0, 0, setup.block, setup.block)?;
    let stack = sample_stack(&p, &mask, seed)?;
    let (want_in, want_out) =
        pump_instability_cov(p.mu, p.pump_mu_variance, p.eta1, p.modes_per_pixel, p.resolution_cells)?;
    let out = mask.out_cells();
    let before_out = region_covariance(&stack, &out)?;
    let before_in = region_covariance(&stack, &mask.in_cells())?;

    let normalized = normalize_frames(&stack, &NormalizationRegion::Cells(out.clone()))?;
    let held_out: Vec<usize> = out
        .iter()
        .copied()
        .filter(|&c| c / setup.side >= setup.side / 2)
        .collect();
    let after_out = region_covariance(&normalized, &held_out)?;

    let checks = vec![
        Check::sigma(
            "Cov_out before normalization",
            before_out.value,
            before_out.stderr,
            want_out,
            5.0,
        ),
        Check::sigma(
            "Cov_in before normalization",
            before_in.value,
            before_in.stderr,
            want_in,
            5.0,
        ),
        Check::sigma(
            "Cov_out after normalization",
            after_out.value,
            after_out.stderr,
            0.0,
            5.0,
        ),
    ];
    Ok(SuiteReport::finish(Suite::Pump, start, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_suite_passes() {
        let r = table1_suite().unwrap();
        assert!(r.passed);
        assert_eq!(r.checks.len(), 2 * 5 * 3 * 3 * 4);
    }

    #[test]
    fn deep_asymptotic_slopes_pass() {
        assert!(asymptotics_suite((1e-8, 1e-7)).unwrap().passed);
    }

    #[test]
    fn small_oracle_run() {
        let r = oracle_suite(3, 20_000).unwrap();
        assert!(r.checks.len() > 100);
        assert!(r.passed, "{:?}", r.worst());
    }

    #[test]
    fn exact_checks() {
        assert!(Check::sigma("x", 1.0, 0.0, 1.0, 5.0).passed);
        assert!(!Check::sigma("x", 1.0, 0.0, 1.1, 5.0).passed);
        assert!(!Check::relative("x", 1.0, 2.0, 0.1).passed);
    }
}
