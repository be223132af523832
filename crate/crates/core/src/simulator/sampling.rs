//! Frame generation.
//!
//! A cell carries `M` independent mode pairs. Sums of Bose-Einstein numbers
//! are negative binomial and binomial thinning composes over modes, so each
//! cell is drawn in aggregate: the total photon number of its `M` modes,
//! then the splits and losses applied to that total. The joint law of the
//! two cell counts is the same as mode-by-mode sampling.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Normal, Poisson};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use super::{Counts, FrameStack, MaskSpec};
use crate::error::{Error, Result};
use crate::geometry::ExperimentParams;
use crate::moments::SourceKind;

/// Above this many modes the negative binomial is drawn as a gamma-Poisson
/// mixture instead of a sum of geometric draws.
const GEOMETRIC_SUM_LIMIT: u64 = 32;

/// Largest tolerated probability that the brightness law goes negative.
const NEGATIVE_MASS_LIMIT: f64 = 1e-3;

/// Total photon number of `modes` independent Bose-Einstein modes of the
/// given mean.
pub fn bose_einstein_sum<R: Rng + ?Sized>(modes: u64, mean: f64, rng: &mut R) -> u64 {
    if modes == 0 || mean <= 0.0 {
        return 0;
    }
    if modes <= GEOMETRIC_SUM_LIMIT {
        let g = Geometric::new(1.0 / (1.0 + mean)).expect("success probability in (0, 1]");
        (0..modes).map(|_| g.sample(rng)).sum()
    } else {
        let rate = Gamma::new(modes as f64, mean)
            .expect("positive shape and scale")
            .sample(rng);
        if rate > 0.0 {
            Poisson::new(rate).expect("finite positive rate").sample(rng) as u64
        } else {
            0
        }
    }
}

fn thin<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("probability in (0, 1)").sample(rng)
    }
}

fn to_count(n: u64) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::CountOverflow(n))
}

/// Variance of `mu` implied by a relative pump-power jitter, through
/// `mu = sinh^2(c sqrt(P))` linearized at `mu_mean`.
pub fn pump_variance_from_power_jitter(mu_mean: f64, relative_power_sd: f64) -> f64 {
    let x = mu_mean.sqrt().asinh();
    // d ln(mu) / d ln(P) = x coth(x), which tends to 1 at low gain
    let elasticity = if x > 0.0 { x / x.tanh() } else { 1.0 };
    (mu_mean * relative_power_sd * elasticity).powi(2)
}

struct PumpLaw {
    normal: Normal<f64>,
}

impl PumpLaw {
    fn new(mean: f64, variance: f64) -> Result<Option<Self>> {
        if variance == 0.0 {
            return Ok(None);
        }
        let sd = variance.sqrt();
        let mass = NormalCdf::new(0.0, 1.0).expect("standard normal").cdf(-mean / sd);
        if mass > NEGATIVE_MASS_LIMIT {
            return Err(Error::PumpVarianceTooLarge { mass });
        }
        if mass > 1e-12 {
            warn!("truncating the brightness law at zero removes {mass:.2e} of its mass");
        }
        Ok(Some(Self {
            normal: Normal::new(mean, sd).expect("finite positive sd"),
        }))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let mu = self.normal.sample(rng);
            if mu > 0.0 {
                return mu;
            }
        }
    }
}

/// Draws `params.frames` frames on the mask grid.
///
/// Frame `k` uses its own ChaCha stream `k` under `seed`, so the result does
/// not depend on how frames are spread over threads.
pub fn sample_stack(params: &ExperimentParams, mask: &MaskSpec, seed: u64) -> Result<FrameStack> {
    params.validate()?;
    if mask.in_cell_count() as u64 != params.resolution_cells {
        return Err(Error::StackMismatch(format!(
            "mask transmits {} cells, parameters say R = {}",
            mask.in_cell_count(),
            params.resolution_cells
        )));
    }
    let pump = PumpLaw::new(params.mu, params.pump_mu_variance)?;
    let frames = usize::try_from(params.frames).map_err(|_| Error::InvalidParameter {
        name: "frames",
        value: params.frames as f64,
        reason: "does not fit in memory",
    })?;
    let cells = mask.cells();
    let mut object = vec![0u32; frames * cells];
    let mut reference = vec![0u32; frames * cells];
    let mut frame_mu = vec![params.mu; frames];

    object
        .par_chunks_mut(cells)
        .zip(reference.par_chunks_mut(cells))
        .zip(frame_mu.par_iter_mut())
        .enumerate()
        .try_for_each(|(k, ((obj, refr), mu))| -> Result<()> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            if let Some(law) = &pump {
                *mu = law.sample(&mut rng);
            }
            for c in 0..cells {
                let (n1, n2) = draw_cell(params, *mu, mask.transmits(c), &mut rng);
                obj[c] = to_count(n1)?;
                refr[c] = to_count(n2)?;
            }
            Ok(())
        })?;

    FrameStack::from_parts(
        *params,
        mask.clone(),
        seed,
        Counts::Raw(object),
        Counts::Raw(reference),
        pump.map(|_| frame_mu),
    )
}

/// Object-arm and reference-arm counts of one cell; the object arm reads 0
/// behind a blocked cell.
fn draw_cell<R: Rng + ?Sized>(params: &ExperimentParams, mu: f64, transmits: bool, rng: &mut R) -> (u64, u64) {
    let modes = params.modes_per_pixel;
    let eta1 = if transmits { params.eta1 } else { 0.0 };
    match params.source {
        SourceKind::TwinBeam => {
            let n = bose_einstein_sum(modes, mu, rng);
            (thin(n, eta1, rng), thin(n, params.eta2, rng))
        }
        SourceKind::Thermal => {
            let m = bose_einstein_sum(modes, 2.0 * mu, rng);
            let a = thin(m, 0.5, rng);
            (thin(a, eta1, rng), thin(m - a, params.eta2, rng))
        }
    }
}
