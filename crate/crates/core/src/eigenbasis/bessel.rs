//! Bessel functions of the first kind of orders 0 and 1, and the positive
//! zeros of `J0`.
//!
//! For `|x| <= SERIES_CUTOFF` the ascending power series is summed in
//! double-double arithmetic (the alternating terms reach ~4e3 at the cutoff,
//! which would otherwise cost about four digits). Beyond the cutoff the
//! Hankel asymptotic expansion is used, truncated at its smallest term.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
pub const SERIES_CUTOFF: f64 = 12.0;

/// Minimal double-double number: `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        let hi = s.hi + lo;
        Dd {
            hi,
            lo: lo - (hi - s.hi),
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = Dd::two_prod(self.hi, o.hi);
        let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
        let hi = p.hi + lo;
        Dd {
            hi,
            lo: lo - (hi - p.hi),
        }
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = Dd::two_prod(q1, d);
        let r = Dd::two_sum(self.hi, -p.hi);
        let rem = r.hi + (r.lo - p.lo + self.lo);
        let q2 = rem / d;
        let hi = q1 + q2;
        Dd {
            hi,
            lo: q2 - (hi - q1),
        }
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Sum of `sum_k (-q)^k / (k! (k+order)!)` for `q = x^2/4`.
fn series(x: f64, order: u32) -> f64 {
    let q = Dd::two_prod(x, x).div_f64(4.0);
    let mut term = Dd::from_f64(1.0);
    for k in 1..=order {
        term = term.div_f64(k as f64);
    }
    let mut sum = term;
    for k in 1..200u32 {
        term = term.mul(q).neg().div_f64((k as f64) * ((k + order) as f64));
        sum = sum.add(term);
        if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
            break;
        }
    }
    sum.to_f64()
}

/// Hankel expansion `sqrt(2/(pi x)) (P cos chi - Q sin chi)`; returns `(P, Q)`.
fn hankel_pq(x: f64, order: u32) -> (f64, f64) {
    let mu = 4.0 * (order as f64).powi(2);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0_f64;
    let mut prev = f64::INFINITY;
    for k in 1..120u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() >= prev {
            break;
        }
        prev = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

fn asymptotic(x: f64, order: u32) -> f64 {
    let (p, q) = hankel_pq(x, order);
    let (s, c) = x.sin_cos();
    // chi = x - pi/4 (order 0) or x - 3pi/4 (order 1)
    let (cos_chi, sin_chi) = match order {
        0 => ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2),
        _ => ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2),
    };
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// `J0(x)`.
pub fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_CUTOFF {
        series(ax, 0)
    } else {
        asymptotic(ax, 0)
    }
}

/// `J1(x)`.
pub fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_CUTOFF {
        0.5 * ax * series(ax, 1)
    } else {
        asymptotic(ax, 1)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Series and asymptotic branches evaluated at the same point, used to
/// validate the crossover.
pub fn seam_mismatch(x: f64) -> (f64, f64) {
    (
        (series(x, 0) - asymptotic(x, 0)).abs(),
        (0.5 * x * series(x, 1) - asymptotic(x, 1)).abs(),
    )
}

/// The `n`-th positive zero of `J0` (`n >= 1`).
///
/// Safeguarded Newton iteration inside `((n - 1/4) pi, (n - 1/8) pi)`,
/// which contains exactly one zero for every `n`.
pub fn bessel_j0_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Bessel zero index must be >= 1".into(),
        ));
    }
    let nf = n as f64;
    let mut lo = (nf - 0.25) * PI;
    let mut hi = (nf - 0.125) * PI;
    let mut flo = j0(lo);
    let fhi = j0(hi);
    if flo * fhi > 0.0 {
        return Err(Error::RootBracket { index: n, lo, hi });
    }
    // McMahon's leading terms as the starting point.
    let beta = lo;
    let mut x = beta + 1.0 / (8.0 * beta) - 31.0 / (384.0 * beta.powi(3));
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..100 {
        let f = j0(x);
        if f == 0.0 {
            return Ok(x);
        }
        if f * flo > 0.0 {
            lo = x;
            flo = f;
        } else {
            hi = x;
        }
        // J0' = -J1
        let mut next = x + f / j1(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return Ok(next);
        }
        x = next;
    }
    let residual = j0(x).abs();
    if residual <= 1e-13 {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            what: format!("J0 zero #{n}"),
            residual,
        })
    }
}
