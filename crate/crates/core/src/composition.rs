//! Lifting single-mode moments to pixel (M modes) and bucket (R cells)
//! level, plus centred views of any joint table.
//!
//! Composition is only defined single mode -> pixel -> bucket. Treating a
//! pixel table as a "mode" and composing it again is rejected: the bucket
//! formulas need the in-pixel cross-correlators, which a second pixel pass
//! would overwrite.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::moments::{exact_int, to_f64, Exact, JointMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLevel {
    SingleMode,
    Pixel { modes: u64 },
    BucketByPixel { cells: u64, modes: u64 },
}

impl TableLevel {
    fn name(self) -> &'static str {
        match self {
            TableLevel::SingleMode => "single-mode",
            TableLevel::Pixel { .. } => "pixel",
            TableLevel::BucketByPixel { .. } => "bucket",
        }
    }
}

/// Joint moments at one level of aggregation.
///
/// `joint` holds `<X1^p X2^q>`: `(n1, n2)` for a single mode, `(N1, N2)` for
/// a pixel pair, `(bucket, N2_in)` at bucket level. `out` exists only at
/// bucket level and holds `<bucket^p N2_out^q>`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMomentTable<T = f64> {
    pub level: TableLevel,
    pub joint: JointMoments<T>,
    pub out: Option<JointMoments<T>>,
}

impl JointMomentTable<Exact> {
    pub fn single_mode(moments: JointMoments<Exact>) -> Self {
        Self {
            level: TableLevel::SingleMode,
            joint: moments,
            out: None,
        }
    }

    pub fn to_f64(&self) -> JointMomentTable<f64> {
        JointMomentTable {
            level: self.level,
            joint: self.joint.to_f64(),
            out: self.out.as_ref().map(JointMoments::to_f64),
        }
    }
}

/// Falling factorial `n (n-1) ... (n-k+1)` as an exact scalar.
fn falling(n: u64, k: u64) -> Exact {
    (0..k).fold(Exact::one(), |acc, i| {
        if i >= n {
            Exact::zero()
        } else {
            acc * exact_int(n - i)
        }
    })
}

/// Marginals `<S^k>` of a sum `S` of `n` i.i.d. copies with moments `a[k-1]`.
fn sum_marginals(a: [&Exact; 4], n: u64) -> [Exact; 4] {
    let [a1, a2, a3, a4] = a;
    let (f1, f2, f3, f4) = (falling(n, 1), falling(n, 2), falling(n, 3), falling(n, 4));
    [
        &f1 * a1,
        &f1 * a2 + &f2 * a1 * a1,
        &f1 * a3 + &f2 * a2 * a1 * exact_int(3) + &f3 * a1 * a1 * a1,
        &f1 * a4
            + &f2 * (a2 * a2 * exact_int(3) + a3 * a1 * exact_int(4))
            + &f3 * a2 * a1 * a1 * exact_int(6)
            + &f4 * a1 * a1 * a1 * a1,
    ]
}

fn marginals1(t: &JointMoments<Exact>) -> [&Exact; 4] {
    [t.get(1, 0), t.get(2, 0), t.get(3, 0), t.get(4, 0)]
}

fn marginals2(t: &JointMoments<Exact>) -> [&Exact; 4] {
    [t.get(0, 1), t.get(0, 2), t.get(0, 3), t.get(0, 4)]
}

/// `<N1^2 N2>` of an `m`-mode pixel pair.
fn pixel_21(s: &JointMoments<Exact>, m: u64) -> Exact {
    let (a1, a2, b1, c11, c21) = (s.get(1, 0), s.get(2, 0), s.get(0, 1), s.get(1, 1), s.get(2, 1));
    falling(m, 1) * c21 + falling(m, 2) * (a2 * b1 + c11 * a1 * exact_int(2)) + falling(m, 3) * a1 * a1 * b1
}

/// `<N1^3 N2>` of an `m`-mode pixel pair.
fn pixel_31(s: &JointMoments<Exact>, m: u64) -> Exact {
    let (a1, a2, a3, b1) = (s.get(1, 0), s.get(2, 0), s.get(3, 0), s.get(0, 1));
    let (c11, c21, c31) = (s.get(1, 1), s.get(2, 1), s.get(3, 1));
    let three = exact_int(3);
    falling(m, 1) * c31
        + falling(m, 2) * (a3 * b1 + a2 * c11 * &three + c21 * a1 * &three)
        + falling(m, 3) * (c11 * a1 * a1 * &three + a2 * a1 * b1 * &three)
        + falling(m, 4) * a1 * a1 * a1 * b1
}

/// Composes `modes` independent copies of a single-mode table into the
/// moments of two symmetric pixels.
pub fn pixel_from_single_exact(single: &JointMoments<Exact>, modes: u64) -> Result<JointMomentTable<Exact>> {
    if modes < 1 {
        return Err(Error::InvalidParameter {
            name: "modes_per_pixel",
            value: 0.0,
            reason: "at least one mode per pixel",
        });
    }
    let s = single;
    let m = modes;
    let mut t = JointMoments::vacuum();
    let first = sum_marginals(marginals1(s), m);
    let second = sum_marginals(marginals2(s), m);
    for k in 1..=4 {
        t.set(k, 0, first[k - 1].clone());
        t.set(0, k, second[k - 1].clone());
    }

    let (a1, a2, b1, b2) = (s.get(1, 0), s.get(2, 0), s.get(0, 1), s.get(0, 2));
    let (c11, c21, c12, c22) = (s.get(1, 1), s.get(2, 1), s.get(1, 2), s.get(2, 2));
    let two = exact_int(2);
    t.set(1, 1, falling(m, 1) * c11 + falling(m, 2) * a1 * b1);
    t.set(2, 1, pixel_21(s, m));
    t.set(1, 2, pixel_21(&s.swapped(), m));
    t.set(
        2,
        2,
        falling(m, 1) * c22
            + falling(m, 2) * (a2 * b2 + c21 * b1 * &two + c11 * c11 * &two + c12 * a1 * &two)
            + falling(m, 3) * (a2 * b1 * b1 + a1 * a1 * b2 + c11 * a1 * b1 * exact_int(4))
            + falling(m, 4) * a1 * a1 * b1 * b1,
    );
    t.set(3, 1, pixel_31(s, m));
    t.set(1, 3, pixel_31(&s.swapped(), m));
    Ok(JointMomentTable {
        level: TableLevel::Pixel { modes },
        joint: t,
        out: None,
    })
}

pub fn pixel_from_single(single: &JointMoments<f64>, modes: u64) -> Result<JointMomentTable<f64>> {
    Ok(pixel_from_single_exact(&single.to_exact(), modes)?.to_f64())
}

/// Adds `cells - 1` further independent pixels to the bucket arm of a pixel
/// table. The tracked reference pixel is the partner of one bucket cell
/// ("in"); an "out" reference pixel is independent of the whole bucket.
pub fn bucket_from_pixel_exact(pixel: &JointMomentTable<Exact>, cells: u64) -> Result<JointMomentTable<Exact>> {
    let modes = match pixel.level {
        TableLevel::Pixel { modes } => modes,
        other => {
            return Err(Error::WrongLevel {
                expected: "pixel",
                found: other.name(),
            })
        }
    };
    if cells < 1 {
        return Err(Error::InvalidParameter {
            name: "resolution_cells",
            value: 0.0,
            reason: "at least one resolution cell",
        });
    }
    let p = &pixel.joint;
    // Extra cells beyond the one partnered with the reference pixel.
    let r1 = falling(cells - 1, 1);
    let r2 = falling(cells - 1, 2);
    let r3 = falling(cells - 1, 3);
    let (a1, a2, a3) = (p.get(1, 0), p.get(2, 0), p.get(3, 0));
    let (b1, b2, b3) = (p.get(0, 1), p.get(0, 2), p.get(0, 3));
    let (c11, c21, c12, c22, c31, c13) = (
        p.get(1, 1),
        p.get(2, 1),
        p.get(1, 2),
        p.get(2, 2),
        p.get(3, 1),
        p.get(1, 3),
    );
    let two = exact_int(2);
    let three = exact_int(3);

    let mut t = JointMoments::vacuum();
    let bucket = sum_marginals(marginals1(p), cells);
    for k in 1..=4 {
        t.set(k, 0, bucket[k - 1].clone());
        t.set(0, k, p.get(0, k).clone());
    }
    t.set(1, 1, c11 + &r1 * a1 * b1);
    t.set(2, 1, c21 + &r1 * (a2 * b1 + c11 * a1 * &two) + &r2 * a1 * a1 * b1);
    t.set(1, 2, c12 + &r1 * a1 * b2);
    t.set(2, 2, c22 + &r1 * (a2 * b2 + c12 * a1 * &two) + &r2 * a1 * a1 * b2);
    t.set(
        3,
        1,
        c31 + &r1 * (a3 * b1 + a2 * c11 * &three + c21 * a1 * &three)
            + &r2 * (c11 * a1 * a1 * &three + a2 * a1 * b1 * &three)
            + &r3 * a1 * a1 * a1 * b1,
    );
    t.set(1, 3, c13 + &r1 * a1 * b3);

    let mut out = JointMoments::vacuum();
    for (pp, qq) in crate::moments::orders() {
        out.set(pp, qq, t.get(pp, 0) * p.get(0, qq));
    }
    Ok(JointMomentTable {
        level: TableLevel::BucketByPixel { cells, modes },
        joint: t,
        out: Some(out),
    })
}

pub fn bucket_from_pixel(pixel: &JointMomentTable<f64>, cells: u64) -> Result<JointMomentTable<f64>> {
    let exact_pixel = JointMomentTable {
        level: pixel.level,
        joint: pixel.joint.to_exact(),
        out: None,
    };
    Ok(bucket_from_pixel_exact(&exact_pixel, cells)?.to_f64())
}

/// Centred quantities of a joint table, expanded from its raw moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralViews<T = f64> {
    pub mean1: T,
    pub mean2: T,
    /// `<delta^2 X1>`
    pub var1: T,
    /// `<delta^2 X2>`
    pub var2: T,
    /// `<delta X1 delta X2>`
    pub cov: T,
    /// `<(delta X1 delta X2)^2>`
    pub cov_product_square: T,
    /// `<delta^2 (X1 - X2)>`
    pub diff_var: T,
    /// Fourth central moment of `X1 - X2`.
    pub diff_fourth: T,
}

pub fn central_views_exact(t: &JointMoments<Exact>) -> CentralViews<Exact> {
    let a = t.get(1, 0);
    let b = t.get(0, 1);
    let var1 = t.get(2, 0) - a * a;
    let var2 = t.get(0, 2) - b * b;
    let cov = t.get(1, 1) - a * b;
    let cov_product_square = t.get(2, 2) - b * t.get(2, 1) * exact_int(2) - a * t.get(1, 2) * exact_int(2)
        + b * b * t.get(2, 0)
        + a * a * t.get(0, 2)
        + a * b * t.get(1, 1) * exact_int(4)
        - a * a * b * b * exact_int(3);

    // raw moments of D = X1 - X2
    let d: Vec<Exact> = (1..=4)
        .map(|k| {
            (0..=k).fold(Exact::zero(), |acc, j| {
                let term = t.get(k - j, j) * exact_int(binomial(k as u64, j as u64));
                if j % 2 == 0 {
                    acc + term
                } else {
                    acc - term
                }
            })
        })
        .collect();
    let (d1, d2, d3, d4) = (&d[0], &d[1], &d[2], &d[3]);
    let diff_var = d2 - d1 * d1;
    let diff_fourth = d4 - d1 * d3 * exact_int(4) + d1 * d1 * d2 * exact_int(6) - d1 * d1 * d1 * d1 * exact_int(3);
    CentralViews {
        mean1: a.clone(),
        mean2: b.clone(),
        var1,
        var2,
        cov,
        cov_product_square,
        diff_var,
        diff_fourth,
    }
}

pub fn central_views(t: &JointMoments<f64>) -> CentralViews<f64> {
    let c = central_views_exact(&t.to_exact());
    CentralViews {
        mean1: to_f64(&c.mean1),
        mean2: to_f64(&c.mean2),
        var1: to_f64(&c.var1),
        var2: to_f64(&c.var2),
        cov: to_f64(&c.cov),
        cov_product_square: to_f64(&c.cov_product_square),
        diff_var: to_f64(&c.diff_var),
        diff_fourth: to_f64(&c.diff_fourth),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
