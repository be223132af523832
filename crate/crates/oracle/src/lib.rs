//! Brute-force sampling oracle for correlated photon-number statistics.
//!
//! Everything here is deliberately naive: Bose–Einstein draws use the
//! inverse CDF of the geometric law, and every loss or beam-splitter event is
//! an individual coin flip. Nothing is shared with the `ghostsnr` simulator,
//! so agreement between the two is evidence rather than tautology.
//!
//! Moment sums are accumulated in `u128`, so they are exact.

use rand::Rng;

/// Which correlated light source a mode pair comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Light {
    /// Every photon of a down-converted mode has a partner in the other arm.
    Twin,
    /// One Bose–Einstein mode of mean `2 mu` split on a balanced beam splitter.
    Thermal,
}

/// Draws from the Bose–Einstein (geometric) law with the given mean.
///
/// `P(n >= k) = q^k` with `q = mean / (1 + mean)`, so
/// `n = floor(ln U / ln q)` for `U` uniform on `(0, 1]`.
pub fn bose_einstein<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let q = mean / (1.0 + mean);
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / q.ln()).floor() as u64
}

/// Number of successes in `n` individual Bernoulli(`p`) trials.
pub fn coin_flips<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return n;
    }
    if p <= 0.0 {
        return 0;
    }
    (0..n).filter(|_| rng.random::<f64>() < p).count() as u64
}

/// One correlated mode pair after independent losses `eta1`, `eta2`.
pub fn mode_pair<R: Rng + ?Sized>(light: Light, mu: f64, eta1: f64, eta2: f64, rng: &mut R) -> (u64, u64) {
    match light {
        Light::Twin => {
            let n = bose_einstein(mu, rng);
            (coin_flips(n, eta1, rng), coin_flips(n, eta2, rng))
        }
        Light::Thermal => {
            let m = bose_einstein(2.0 * mu, rng);
            let arm1 = coin_flips(m, 0.5, rng);
            let arm2 = m - arm1;
            (coin_flips(arm1, eta1, rng), coin_flips(arm2, eta2, rng))
        }
    }
}

/// Sum of `modes` independent mode pairs: the counts of two symmetric pixels.
pub fn pixel_pair<R: Rng + ?Sized>(light: Light, mu: f64, eta1: f64, eta2: f64, modes: u64, rng: &mut R) -> (u64, u64) {
    (0..modes).fold((0, 0), |(a, b), _| {
        let (x, y) = mode_pair(light, mu, eta1, eta2, rng);
        (a + x, b + y)
    })
}

/// A bucket over `cells` pixels plus two tracked reference pixels.
///
/// `ref_in` is the partner of the first bucket cell; `ref_out` is the partner
/// of a cell that the mask blocks, so it never reaches the bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BucketSample {
    pub bucket: u64,
    pub ref_in: u64,
    pub ref_out: u64,
}

pub fn bucket_sample<R: Rng + ?Sized>(
    light: Light,
    mu: f64,
    eta1: f64,
    eta2: f64,
    modes: u64,
    cells: u64,
    rng: &mut R,
) -> BucketSample {
    let mut bucket = 0;
    let mut ref_in = 0;
    for cell in 0..cells {
        let (obj, reference) = pixel_pair(light, mu, eta1, eta2, modes, rng);
        bucket += obj;
        if cell == 0 {
            ref_in = reference;
        }
    }
    let (_blocked, ref_out) = pixel_pair(light, mu, eta1, eta2, modes, rng);
    BucketSample {
        bucket,
        ref_in,
        ref_out,
    }
}

/// Exact running sums of `x^p y^q` (and their squares) for `p + q <= 4`.
#[derive(Debug, Clone, Default)]
pub struct MomentAccumulator {
    count: u64,
    sums: [[u128; 5]; 5],
    sq_sums: [[u128; 5]; 5],
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Distance from `expected` in units of standard error.
    ///
    /// A zero standard error only accepts an exact match.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.mean - expected).abs();
        if self.stderr == 0.0 {
            if diff <= 1e-12 * expected.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.stderr
        }
    }
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: u64, y: u64) {
        self.count += 1;
        let (x, y) = (x as u128, y as u128);
        for p in 0..=4u32 {
            for q in 0..=(4 - p) {
                let v = x.pow(p) * y.pow(q);
                self.sums[p as usize][q as usize] += v;
                self.sq_sums[p as usize][q as usize] += v * v;
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Sample mean of `x^p y^q` and its standard error.
    pub fn estimate(&self, p: usize, q: usize) -> Estimate {
        assert!(p + q <= 4, "only moments up to fourth order are tracked");
        let n = self.count as f64;
        let mean = self.sums[p][q] as f64 / n;
        let second = self.sq_sums[p][q] as f64 / n;
        let var = (second - mean * mean).max(0.0) * n / (n - 1.0);
        Estimate {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}
