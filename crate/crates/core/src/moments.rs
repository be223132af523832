//! Single-mode joint photon-number moments of a correlated mode pair after
//! independent losses.
//!
//! Tables hold raw moments `<n1^p n2^q>` for `p + q <= 4`. Values are built
//! in exact rational arithmetic ([`Exact`]) and converted to `f64` once.
//!
//! The thermal `<n1^3 n2>` uses the prefactor `2 mu^2 eta1 eta2`. A variant
//! with `2 mu` agrees with the split-thermal model only at `mu = 1`;
//! see `docs/math.md`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability, Result};

/// Exact rational scalar used by all closed-form moment algebra.
pub type Exact = BigRational;

/// Highest total order `p + q` kept in a moment table.
pub const MAX_ORDER: usize = 4;

pub fn exact(value: f64) -> Exact {
    BigRational::from_float(value).expect("finite value")
}

pub fn exact_int(value: u64) -> Exact {
    BigRational::from_integer(BigInt::from(value))
}

pub fn to_f64(value: &Exact) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Signal/idler beams of parametric down-conversion.
    #[serde(alias = "twin", alias = "twgi")]
    TwinBeam,
    /// Beam-split (pseudo-)thermal light.
    #[serde(alias = "thgi")]
    Thermal,
}

impl SourceKind {
    pub const ALL: [SourceKind; 2] = [SourceKind::TwinBeam, SourceKind::Thermal];

    pub fn label(self) -> &'static str {
        match self {
            SourceKind::TwinBeam => "twin-beam",
            SourceKind::Thermal => "thermal",
        }
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "twin-beam" | "twin" | "twgi" => Ok(SourceKind::TwinBeam),
            "thermal" | "thgi" => Ok(SourceKind::Thermal),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// Raw joint moments `<X1^p X2^q>` for `p + q <= 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMoments<T = f64> {
    entries: [[T; MAX_ORDER + 1]; MAX_ORDER + 1],
}

/// Moment table of a single correlated mode pair.
pub type SingleModeJointMoments<T = f64> = JointMoments<T>;

/// Every `(p, q)` with `p + q <= 4`, `(0, 0)` first.
pub fn orders() -> impl Iterator<Item = (usize, usize)> {
    (0..=MAX_ORDER).flat_map(|p| (0..=MAX_ORDER - p).map(move |q| (p, q)))
}

impl<T: Clone + Zero + One> JointMoments<T> {
    /// A table with `<1> = 1` and every other entry zero.
    pub fn vacuum() -> Self {
        let mut entries: [[T; 5]; 5] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));
        entries[0][0] = T::one();
        Self { entries }
    }
}

impl<T: Default> JointMoments<T> {
    /// Builds a table from `f(p, q)`, called once per order `p + q <= 4`.
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        Self {
            entries: std::array::from_fn(|p| {
                std::array::from_fn(|q| if p + q <= MAX_ORDER { f(p, q) } else { T::default() })
            }),
        }
    }
}

impl<T> JointMoments<T> {
    pub fn get(&self, p: usize, q: usize) -> &T {
        assert!(p + q <= MAX_ORDER, "moment order {p}+{q} exceeds {MAX_ORDER}");
        &self.entries[p][q]
    }

    pub fn set(&mut self, p: usize, q: usize, value: T) {
        assert!(p + q <= MAX_ORDER, "moment order {p}+{q} exceeds {MAX_ORDER}");
        self.entries[p][q] = value;
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> JointMoments<U> {
        JointMoments {
            entries: std::array::from_fn(|p| std::array::from_fn(|q| f(&self.entries[p][q]))),
        }
    }
}

impl<T: Clone> JointMoments<T> {
    /// The same table with the roles of `X1` and `X2` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            entries: std::array::from_fn(|p| std::array::from_fn(|q| self.entries[q][p].clone())),
        }
    }
}

impl JointMoments<Exact> {
    pub fn to_f64(&self) -> JointMoments<f64> {
        self.map(to_f64)
    }
}

impl JointMoments<f64> {
    pub fn to_exact(&self) -> JointMoments<Exact> {
        self.map(|v| exact(*v))
    }
}

fn check_domain(mu: f64, eta1: f64, eta2: f64) -> Result<()> {
    check_positive("mu", mu)?;
    check_probability("eta1", eta1)?;
    check_probability("eta2", eta2)
}

/// Marginal moments `<n^k>`, `k = 1..=4`, of a thermal mode thinned to mean `x`.
fn thermal_marginals(x: &Exact) -> [Exact; 4] {
    let one = Exact::one();
    let x2 = x * x;
    let x3 = &x2 * x;
    [
        x.clone(),
        x + &x2 * exact_int(2),
        x * (&one + x * exact_int(6) + &x2 * exact_int(6)),
        x * (&one + x * exact_int(14) + &x2 * exact_int(36) + &x3 * exact_int(24)),
    ]
}

fn fill_marginals(table: &mut JointMoments<Exact>, mu: &Exact, eta1: &Exact, eta2: &Exact) {
    let first = thermal_marginals(&(mu * eta1));
    let second = thermal_marginals(&(mu * eta2));
    for k in 1..=4 {
        table.set(k, 0, first[k - 1].clone());
        table.set(0, k, second[k - 1].clone());
    }
}

/// Twin-beam `<n_a^2 n_b>` with `a` the squared arm.
fn twin_21(mu: &Exact, ea: &Exact, eb: &Exact) -> Exact {
    let one = Exact::one();
    mu * ea * eb * (one + mu * mu * ea * exact_int(6) + mu * (exact_int(2) + ea * exact_int(4)))
}

/// Twin-beam `<n_a^3 n_b>`.
fn twin_31(mu: &Exact, ea: &Exact, eb: &Exact) -> Exact {
    let one = Exact::one();
    let mu2 = mu * mu;
    let mu3 = &mu2 * mu;
    mu * ea
        * eb
        * (one
            + mu3 * ea * ea * exact_int(24)
            + mu2 * ea * (Exact::one() + ea) * exact_int(18)
            + mu * (Exact::one() + ea * exact_int(6)) * exact_int(2))
}

/// Exact twin-beam table for brightness `mu` and losses `eta1`, `eta2`.
pub fn twin_single_mode_exact(mu: &Exact, eta1: &Exact, eta2: &Exact) -> JointMoments<Exact> {
    let one = Exact::one();
    let two = exact_int(2);
    let mut t = JointMoments::vacuum();
    fill_marginals(&mut t, mu, eta1, eta2);
    let mu2 = mu * mu;
    let mu3 = &mu2 * mu;
    let e12 = eta1 * eta2;
    t.set(1, 1, mu * (&one + mu * &two) * &e12);
    t.set(2, 1, twin_21(mu, eta1, eta2));
    t.set(1, 2, twin_21(mu, eta2, eta1));
    t.set(
        2,
        2,
        mu * &e12
            * (&one
                + &mu3 * &e12 * exact_int(24)
                + &mu2 * (eta1 + eta2 + &e12 * exact_int(4)) * exact_int(6)
                + mu * (&one + eta1 * &two + eta2 * &two + &e12 * &two) * &two),
    );
    t.set(3, 1, twin_31(mu, eta1, eta2));
    t.set(1, 3, twin_31(mu, eta2, eta1));
    t
}

fn thermal_21(mu: &Exact, ea: &Exact, eb: &Exact) -> Exact {
    mu * mu * ea * eb * exact_int(2) * (Exact::one() + mu * ea * exact_int(3))
}

fn thermal_31(mu: &Exact, ea: &Exact, eb: &Exact) -> Exact {
    let mu2 = mu * mu;
    &mu2 * ea * eb * exact_int(2) * (Exact::one() + ea * mu * exact_int(9) + &mu2 * ea * ea * exact_int(12))
}

/// Exact thermal table: one Bose–Einstein mode of mean `2 mu` on a balanced
/// beam splitter, followed by losses `eta1`, `eta2`.
pub fn thermal_single_mode_exact(mu: &Exact, eta1: &Exact, eta2: &Exact) -> JointMoments<Exact> {
    let mut t = JointMoments::vacuum();
    fill_marginals(&mut t, mu, eta1, eta2);
    let mu2 = mu * mu;
    let e12 = eta1 * eta2;
    t.set(1, 1, &mu2 * &e12 * exact_int(2));
    t.set(2, 1, thermal_21(mu, eta1, eta2));
    t.set(1, 2, thermal_21(mu, eta2, eta1));
    t.set(
        2,
        2,
        &mu2 * &e12 * exact_int(2) * (Exact::one() + &mu2 * &e12 * exact_int(12) + mu * (eta1 + eta2) * exact_int(3)),
    );
    t.set(3, 1, thermal_31(mu, eta1, eta2));
    t.set(1, 3, thermal_31(mu, eta2, eta1));
    t
}

pub fn single_mode_exact(source: SourceKind, mu: &Exact, eta1: &Exact, eta2: &Exact) -> JointMoments<Exact> {
    match source {
        SourceKind::TwinBeam => twin_single_mode_exact(mu, eta1, eta2),
        SourceKind::Thermal => thermal_single_mode_exact(mu, eta1, eta2),
    }
}

pub fn twin_single_mode(mu: f64, eta1: f64, eta2: f64) -> Result<SingleModeJointMoments> {
    check_domain(mu, eta1, eta2)?;
    Ok(twin_single_mode_exact(&exact(mu), &exact(eta1), &exact(eta2)).to_f64())
}

pub fn thermal_single_mode(mu: f64, eta1: f64, eta2: f64) -> Result<SingleModeJointMoments> {
    check_domain(mu, eta1, eta2)?;
    Ok(thermal_single_mode_exact(&exact(mu), &exact(eta1), &exact(eta2)).to_f64())
}

pub fn single_mode(source: SourceKind, mu: f64, eta1: f64, eta2: f64) -> Result<SingleModeJointMoments> {
    match source {
        SourceKind::TwinBeam => twin_single_mode(mu, eta1, eta2),
        SourceKind::Thermal => thermal_single_mode(mu, eta1, eta2),
    }
}

/// `<delta^2 (n1 - n2)>` for balanced losses: `2 eta mu (1 - eta)` for twin
/// beams, the shot-noise level `2 eta mu` for thermal light.
pub fn difference_variance(source: SourceKind, mu: f64, eta: f64) -> Result<f64> {
    check_domain(mu, eta, eta)?;
    Ok(match source {
        SourceKind::TwinBeam => 2.0 * eta * mu * (1.0 - eta),
        SourceKind::Thermal => 2.0 * eta * mu,
    })
}
