//! Mean contrast, estimator noise and SNR of the four reconstruction
//! protocols, evaluated in exact arithmetic from bucket-level moments.
//!
//! Every protocol is treated the same way. Each in/out image value `S` is
//! written as a frame average of an influence polynomial `f` in the bucket
//! count `X`, the in-pixel count `Y` and the out-pixel count `Z`, linearized
//! around the expectations where `S` is non-linear (`g2`, the centring in
//! Cov and Var). Then
//!
//! ```text
//! <delta^2 (S_in - S_out)> = Var[f_in(X, Y) - f_out(X, Z)] / K
//! ```
//!
//! The in and out pixels share the bucket, so the covariance of `f_in` and
//! `f_out` is kept. It vanishes for Cov and `g2`; for G2 and Var it does not.
//! `E[X^a Y^b Z^c] = <bucket^a N2_in^b> <N2^c>` because the out pixel is
//! independent of the bucket and of the in pixel.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::composition::{bucket_from_pixel_exact, pixel_from_single_exact, JointMomentTable};
use crate::error::{check_positive, check_probability, Error, Result};
use crate::geometry::ExperimentParams;
use crate::moments::{exact, exact_int, single_mode_exact, to_f64, Exact, JointMoments, SourceKind};

/// Serialized as its label and parsed like [`FromStr`](std::str::FromStr).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "&'static str", try_from = "String")]
pub enum ProtocolKind {
    /// Glauber correlation `E[bucket N2]`.
    G2,
    /// `E[bucket N2] / (E[bucket] E[N2])`.
    NormalizedG2,
    /// Covariance of bucket and reference pixel.
    Covariance,
    /// Variance of the bucket minus reference difference.
    DifferenceVariance,
}

impl From<ProtocolKind> for &'static str {
    fn from(kind: ProtocolKind) -> Self {
        kind.label()
    }
}

impl TryFrom<String> for ProtocolKind {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::G2,
        ProtocolKind::NormalizedG2,
        ProtocolKind::Covariance,
        ProtocolKind::DifferenceVariance,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::G2 => "G2",
            ProtocolKind::NormalizedG2 => "g2",
            ProtocolKind::Covariance => "Cov",
            ProtocolKind::DifferenceVariance => "Var",
        }
    }
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "G2" | "glauber" => Ok(ProtocolKind::G2),
            "g2" | "g2n" | "normalized-g2" => Ok(ProtocolKind::NormalizedG2),
            _ => match s.to_ascii_lowercase().as_str() {
                "cov" | "covariance" => Ok(ProtocolKind::Covariance),
                "var" | "difference-variance" => Ok(ProtocolKind::DifferenceVariance),
                other => Err(format!("unknown protocol `{other}` (G2, g2, Cov, Var)")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Use the exact finite-`K` variance of the sample variance for the Var
    /// protocol instead of the large-`K` form.
    pub finite_frame_correction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrResult {
    pub kind: ProtocolKind,
    /// `<S_in> - <S_out>`.
    pub contrast: f64,
    /// `sqrt(<delta^2 (S_in - S_out)>)`.
    pub noise: f64,
    pub snr: f64,
    pub snr_per_sqrt_frame: f64,
    /// Set when the noise vanishes; `snr` is then 0 (no contrast) or infinite.
    pub degenerate: bool,
    pub intermediates: BTreeMap<String, f64>,
}

type Monomial = [u8; 3];

/// Polynomial in the bucket (`X`), in-pixel (`Y`) and out-pixel (`Z`) counts.
#[derive(Debug, Clone, Default)]
struct Poly(BTreeMap<Monomial, Exact>);

impl Poly {
    fn constant(c: Exact) -> Self {
        let mut p = Poly::default();
        p.push([0, 0, 0], c);
        p
    }

    fn var(index: usize) -> Self {
        let mut mono = [0u8; 3];
        mono[index] = 1;
        let mut p = Poly::default();
        p.push(mono, Exact::one());
        p
    }

    fn push(&mut self, mono: Monomial, c: Exact) {
        let entry = self.0.entry(mono).or_insert_with(Exact::zero);
        *entry += c;
    }

    fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.push(*m, c.clone());
        }
        out
    }

    fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(&-Exact::one()))
    }

    fn scale(&self, k: &Exact) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (*m, c * k)).collect())
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                out.push([ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]], ca * cb);
            }
        }
        out
    }
}

const X: usize = 0;
const Y: usize = 1;
const Z: usize = 2;

/// Joint law of (bucket, in pixel, out pixel) through its moments.
struct Ensemble {
    bucket_in: JointMoments<Exact>,
    reference: [Exact; 5],
}

impl Ensemble {
    fn new(bucket: &JointMomentTable<Exact>) -> Self {
        let t = &bucket.joint;
        Self {
            bucket_in: t.clone(),
            reference: std::array::from_fn(|q| t.get(0, q).clone()),
        }
    }

    fn expect(&self, poly: &Poly) -> Exact {
        poly.0.iter().fold(Exact::zero(), |acc, (m, c)| {
            let (a, b, z) = (m[0] as usize, m[1] as usize, m[2] as usize);
            assert!(a + b + z <= 4, "moment order exceeds the table");
            acc + c * self.bucket_in.get(a, b) * &self.reference[z]
        })
    }

    fn mean(&self, index: usize) -> Exact {
        self.expect(&Poly::var(index))
    }
}

/// Exact per-frame ingredients of one protocol.
struct Evaluation {
    mean_in: Exact,
    mean_out: Exact,
    /// Per-frame variances and covariance of the influence functions.
    var_in: Exact,
    var_out: Exact,
    cov_in_out: Exact,
    /// Multiplies both the mean contrast and the noise.
    prefactor: Exact,
    /// Added to `K * variance` by the finite-frame option.
    finite_frame_extra: Exact,
}

fn check_params(params: &ExperimentParams) -> Result<()> {
    params.validate()
}

pub(crate) fn bucket_table(params: &ExperimentParams) -> Result<JointMomentTable<Exact>> {
    check_params(params)?;
    let single = single_mode_exact(
        params.source,
        &exact(params.mu),
        &exact(params.eta1),
        &exact(params.eta2),
    );
    let pixel = pixel_from_single_exact(&single, params.modes_per_pixel)?;
    bucket_from_pixel_exact(&pixel, params.resolution_cells)
}

fn influence(kind: ProtocolKind, ens: &Ensemble, reference: usize) -> Result<(Exact, Poly)> {
    let a = ens.mean(X);
    let b = ens.mean(reference);
    let xv = Poly::var(X);
    let rv = Poly::var(reference);
    let prod = xv.mul(&rv);
    let g = ens.expect(&prod);
    Ok(match kind {
        ProtocolKind::G2 => (g, prod),
        ProtocolKind::Covariance => {
            let dx = xv.sub(&Poly::constant(a.clone()));
            let dr = rv.sub(&Poly::constant(b.clone()));
            (g - &a * &b, dx.mul(&dr))
        }
        ProtocolKind::DifferenceVariance => {
            let d = xv.sub(&rv).sub(&Poly::constant(&a - &b));
            let sq = d.mul(&d);
            (ens.expect(&sq), sq)
        }
        ProtocolKind::NormalizedG2 => {
            if a.is_zero() {
                return Err(Error::ZeroMean("bucket"));
            }
            if b.is_zero() {
                return Err(Error::ZeroMean("reference pixel"));
            }
            let ab = &a * &b;
            let value = &g / &ab;
            let f = prod
                .scale(&ab.recip())
                .sub(&xv.scale(&(&g / (&a * &ab))))
                .sub(&rv.scale(&(&g / (&b * &ab))));
            (value, f)
        }
    })
}

fn evaluate(kind: ProtocolKind, params: &ExperimentParams, opts: AnalysisOptions) -> Result<Evaluation> {
    let ens = Ensemble::new(&bucket_table(params)?);
    evaluate_in(&ens, kind, params, opts)
}

fn evaluate_in(
    ens: &Ensemble,
    kind: ProtocolKind,
    params: &ExperimentParams,
    opts: AnalysisOptions,
) -> Result<Evaluation> {
    let (mean_in, f_in) = influence(kind, ens, Y)?;
    let (mean_out, f_out) = influence(kind, ens, Z)?;
    let e_in = ens.expect(&f_in);
    let e_out = ens.expect(&f_out);
    let var_in = ens.expect(&f_in.mul(&f_in)) - &e_in * &e_in;
    let var_out = ens.expect(&f_out.mul(&f_out)) - &e_out * &e_out;
    let cov_in_out = ens.expect(&f_in.mul(&f_out)) - &e_in * &e_out;

    let k = exact_int(params.frames);
    let prefactor = match kind {
        ProtocolKind::Covariance => (&k - Exact::one()) / &k,
        _ => Exact::one(),
    };
    let finite_frame_extra = if kind == ProtocolKind::DifferenceVariance && opts.finite_frame_correction {
        // Var(s^2) = (mu4 - s^4)/K + 2 s^4 / (K (K-1)); the covariance of two
        // sample variances picks up 2 cov(D_in, D_out)^2 / (K (K-1)) alike.
        let d_in = Poly::var(X).sub(&Poly::var(Y));
        let d_out = Poly::var(X).sub(&Poly::var(Z));
        let (m_in, m_out) = (ens.expect(&d_in), ens.expect(&d_out));
        let cross = ens.expect(&d_in.mul(&d_out)) - &m_in * &m_out;
        let s = &mean_in * &mean_in + &mean_out * &mean_out - &cross * &cross * exact_int(2);
        s * exact_int(2) / (&k - Exact::one())
    } else {
        Exact::zero()
    };
    Ok(Evaluation {
        mean_in,
        mean_out,
        var_in,
        var_out,
        cov_in_out,
        prefactor,
        finite_frame_extra,
    })
}

impl Evaluation {
    fn variance(&self, frames: u64) -> Exact {
        let k = exact_int(frames);
        let per_frame = &self.var_in + &self.var_out - &self.cov_in_out * exact_int(2) + &self.finite_frame_extra;
        per_frame * &self.prefactor * &self.prefactor / k
    }
}

/// Expected image value inside and outside the object.
pub fn protocol_mean(kind: ProtocolKind, params: &ExperimentParams) -> Result<(f64, f64)> {
    let ev = evaluate(kind, params, AnalysisOptions::default())?;
    Ok((
        to_f64(&(&ev.mean_in * &ev.prefactor)),
        to_f64(&(&ev.mean_out * &ev.prefactor)),
    ))
}

/// Variance of the `S_in - S_out` estimator over `params.frames` frames.
pub fn protocol_variance(kind: ProtocolKind, params: &ExperimentParams) -> Result<f64> {
    protocol_variance_with(kind, params, AnalysisOptions::default())
}

pub fn protocol_variance_with(kind: ProtocolKind, params: &ExperimentParams, opts: AnalysisOptions) -> Result<f64> {
    let ev = evaluate(kind, params, opts)?;
    Ok(to_f64(&ev.variance(params.frames)))
}

pub fn snr(kind: ProtocolKind, params: &ExperimentParams) -> Result<SnrResult> {
    snr_with(kind, params, AnalysisOptions::default())
}

pub fn snr_with(kind: ProtocolKind, params: &ExperimentParams, opts: AnalysisOptions) -> Result<SnrResult> {
    let ev = evaluate(kind, params, opts)?;
    Ok(summarize(kind, params, &ev))
}

/// All four protocols from one moment table, in [`ProtocolKind::ALL`] order.
pub fn snr_all(params: &ExperimentParams, opts: AnalysisOptions) -> Result<Vec<SnrResult>> {
    let ens = Ensemble::new(&bucket_table(params)?);
    ProtocolKind::ALL
        .iter()
        .map(|&kind| evaluate_in(&ens, kind, params, opts).map(|ev| summarize(kind, params, &ev)))
        .collect()
}

fn summarize(kind: ProtocolKind, params: &ExperimentParams, ev: &Evaluation) -> SnrResult {
    let contrast_exact = (&ev.mean_in - &ev.mean_out) * &ev.prefactor;
    let variance = ev.variance(params.frames);
    let contrast = to_f64(&contrast_exact);
    let noise = to_f64(&variance).max(0.0).sqrt();
    let (snr, degenerate) = if variance.is_positive() {
        // ratio of squares in exact arithmetic, one rounding at the square root
        let ratio = &contrast_exact * &contrast_exact / &variance;
        (to_f64(&ratio).sqrt(), false)
    } else if contrast_exact.is_zero() {
        (0.0, true)
    } else {
        (f64::INFINITY, true)
    };
    let k = params.frames as f64;

    let mut intermediates = BTreeMap::new();
    let mut put = |name: &str, v: &Exact| {
        intermediates.insert(name.to_string(), to_f64(v));
    };
    put("mean_in", &ev.mean_in);
    put("mean_out", &ev.mean_out);
    put("var_in_per_frame", &ev.var_in);
    put("var_out_per_frame", &ev.var_out);
    put("cov_in_out_per_frame", &ev.cov_in_out);
    put("frame_prefactor", &ev.prefactor);
    intermediates.insert("illumination".into(), params.illumination());

    SnrResult {
        kind,
        contrast,
        noise,
        snr,
        snr_per_sqrt_frame: snr / k.sqrt(),
        degenerate,
        intermediates,
    }
}

/// Lossless (`eta = 1`) closed-form `SNR / sqrt(K)` for each protocol and
/// source, written out term by term.
pub fn lossless_closed_form(kind: ProtocolKind, source: SourceKind, mu: f64, modes: u64, cells: u64) -> f64 {
    let m = modes as f64;
    let r = cells as f64;
    let mu2 = mu * mu;
    let (mr, m2r2) = (m * r, m * m * r * r);
    match (kind, source) {
        (ProtocolKind::G2, SourceKind::TwinBeam) => {
            (m * mu * (1.0 + mu)).sqrt()
                / (1.0 + mu * (6.0 + m + 4.0 * mr) + mu2 * (6.0 + m + 6.0 * mr + 2.0 * m2r2)).sqrt()
        }
        (ProtocolKind::G2, SourceKind::Thermal) => {
            m.sqrt() * mu
                / (1.0 + 2.0 * mr + 2.0 * mu * (2.0 + 3.0 * mr + m2r2) + mu2 * (6.0 + m + 6.0 * mr + 2.0 * m2r2)).sqrt()
        }
        (ProtocolKind::NormalizedG2, SourceKind::TwinBeam) => {
            (mr * mu * (1.0 + mu)).sqrt()
                / (1.0 + mu * r * (2.0 + m + 2.0 * mr) + mu2 * (-1.0 + (3.0 + m) * r + 2.0 * m * r * r)).sqrt()
        }
        (ProtocolKind::NormalizedG2, SourceKind::Thermal) => {
            mr.sqrt() * mu
                / (-mu * (1.0 + mu)
                    + (1.0 + 3.0 * mu + (3.0 + m) * mu2) * r
                    + 2.0 * m * (1.0 + mu) * (1.0 + mu) * r * r)
                    .sqrt()
        }
        (ProtocolKind::Covariance, SourceKind::TwinBeam) => {
            (m * mu * (1.0 + mu)).sqrt() / (1.0 + mu * (6.0 + m + 2.0 * mr) + mu2 * (6.0 + m + 2.0 * mr)).sqrt()
        }
        (ProtocolKind::Covariance, SourceKind::Thermal) => {
            m.sqrt() * mu / (1.0 + 2.0 * mr + 4.0 * mu * (1.0 + mr) + mu2 * (6.0 + m + 2.0 * mr)).sqrt()
        }
        (ProtocolKind::DifferenceVariance, SourceKind::TwinBeam) => {
            (2.0 * m * mu * (1.0 + mu)).sqrt() / (1.0 + mu * (6.0 + 4.0 * mr) + mu2 * (6.0 + 4.0 * mr)).sqrt()
        }
        (ProtocolKind::DifferenceVariance, SourceKind::Thermal) => {
            (2.0 * m).sqrt() * mu.powf(1.5)
                / (1.0 + mu * (7.0 + m * (2.0 + 4.0 * r)) + 8.0 * mu2 * (1.0 + mr) + mu2 * mu * (6.0 + 4.0 * mr)).sqrt()
        }
    }
}

/// Exponent of the low-illumination power law `SNR ~ I^p`.
pub fn asymptotic_exponent(kind: ProtocolKind, source: SourceKind) -> f64 {
    match (source, kind) {
        (SourceKind::TwinBeam, _) => 0.5,
        (SourceKind::Thermal, ProtocolKind::DifferenceVariance) => 1.5,
        (SourceKind::Thermal, _) => 1.0,
    }
}

/// Expected twin-beam covariance inside and outside the object when `mu`
/// fluctuates from frame to frame with mean `mu_mean` and variance
/// `mu_variance` (balanced efficiency `eta`).
pub fn pump_instability_cov(mu_mean: f64, mu_variance: f64, eta: f64, modes: u64, cells: u64) -> Result<(f64, f64)> {
    check_positive("mu_mean", mu_mean)?;
    check_probability("eta", eta)?;
    if !(mu_variance >= 0.0 && mu_variance.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mu_variance",
            value: mu_variance,
            reason: "must be finite and non-negative",
        });
    }
    if modes < 1 || cells < 1 {
        return Err(Error::InvalidParameter {
            name: if modes < 1 {
                "modes_per_pixel"
            } else {
                "resolution_cells"
            },
            value: 0.0,
            reason: "must be at least one",
        });
    }
    let (m, r) = (modes as f64, cells as f64);
    let cov_in = eta * eta * m * (mu_mean * (1.0 + mu_mean) + mu_variance * (1.0 + r * m));
    let cov_out = eta * eta * m * m * mu_variance * r;
    Ok((cov_in, cov_out))
}
