//! The elliptic transformation `Φ_r` on `[-1, 1]` and its derivative.
//!
//! Both are ratios of rapidly convergent q-series in Chebyshev polynomials:
//!
//! ```text
//! Φ_r(u)  = √r · S(u) / S(-u),       S(u) = 1 + 2 Σ q^(n²) T_n(u)
//! Φ_r'(u) = k r^(3/4) √q (2K/π)^(3/2) · Σ q^(2n²+2n) V_n(1 - 2u²) / S(-u)²
//! ```
//!
//! The series lengths are chosen so that the relative truncation error is
//! below `2^-bits`, and the sums are formed by Clenshaw recurrences.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::numcore::chebyshev::{clenshaw_t, clenshaw_v};
use crate::numcore::{EllipticBundle, Precision};

/// Guard bits carried inside the series evaluation.
const GUARD_BITS: u32 = 24;

/// Smallest `(N0, N1)` whose truncation bounds are at most `2^-bits`.
pub fn truncation_lengths(bundle: &EllipticBundle, ctx: Precision) -> (usize, usize) {
    let work = bundle.precision();
    let p = work.bits();
    let log_target = ctx.real(ctx.bits()) * ctx.real(2).ln();
    let ln_q = Float::with_val(p, bundle.q.ln_ref());
    let log_inv_q = Float::with_val(p, -&ln_q);
    let ln_log_inv_q = Float::with_val(p, log_inv_q.ln_ref());
    let two_k_pi = work.real(&bundle.kk * 2u32) / work.pi();

    // log of q^(N²) / (N sqrt(2 r K / π) log(1/q))
    let half_ln_2rk = (Float::with_val(p, &two_k_pi * &bundle.r)).ln() / 2u32;
    let bound0 = |n: usize| {
        let nf = work.real(n as u64);
        work.real(&ln_q * (n * n) as u64) - nf.ln() - &half_ln_2rk - &ln_log_inv_q
    };
    // log of ((2N+3)/(2N+1)) · 2 q^(2(N+1/2)²) / (k r^(1/4) (2K/π)^(3/2) log(1/q))
    let ln_den1 = Float::with_val(p, bundle.k.ln_ref())
        + Float::with_val(p, bundle.r.ln_ref()) / 4u32
        + Float::with_val(p, two_k_pi.ln_ref()) * 3u32 / 2u32
        + &ln_log_inv_q;
    let ln2 = work.real(2).ln();
    let bound1 = |n: usize| {
        let nf = n as f64;
        let half = work.real(2 * n + 1) / 2u32;
        let e = Float::with_val(p, half.square_ref()) * 2u32;
        work.real(((2.0 * nf + 3.0) / (2.0 * nf + 1.0)).ln()) + &ln2 + work.real(&ln_q * &e)
            - &ln_den1
    };

    let target = -log_target;
    let first = |bound: &dyn Fn(usize) -> Float| {
        let mut n = 1;
        while bound(n) > target {
            n += 1;
        }
        n
    };
    (first(&bound0), first(&bound1))
}

/// Truncated series for `Φ_r` and `Φ_r'` at one `r` and precision.
#[derive(Clone, Debug)]
pub struct PhiSeries {
    bundle: EllipticBundle,
    n0: usize,
    n1: usize,
    /// Clenshaw coefficients of `S`: `1, 2q, 2q^4, ...`.
    s_coeffs: Vec<Float>,
    /// `q^(2n²+2n)` for `n = 0..=N1`.
    v_coeffs: Vec<Float>,
    deriv_scale: Float,
    sqrt_r: Float,
    ctx: Precision,
}

impl PhiSeries {
    /// Builds the series for `0 < r < 1` at the precision of `ctx`.
    pub fn new(r: &Float, ctx: Precision) -> Result<Self> {
        let work = ctx.widened(GUARD_BITS);
        let bundle = EllipticBundle::new(r, work)?;
        let (n0, n1) = truncation_lengths(&bundle, work);
        let q = &bundle.q;
        let mut s_coeffs = vec![work.one()];
        for n in 1..=n0 {
            let e = (n * n) as u32;
            s_coeffs.push(work.real(Pow::pow(q, e)) * 2u32);
        }
        let v_coeffs = (0..=n1)
            .map(|n| work.real(Pow::pow(q, (2 * n * n + 2 * n) as u32)))
            .collect();
        let r_w = work.real(r);
        let two_k_pi = work.real(&bundle.kk * 2u32) / work.pi();
        let deriv_scale = work.real(&bundle.k)
            * work.real(Pow::pow(&r_w, &work.ratio(3, 4)))
            * work.real(q.sqrt_ref())
            * two_k_pi.pow(work.ratio(3, 2));
        Ok(PhiSeries {
            sqrt_r: r_w.sqrt(),
            bundle,
            n0,
            n1,
            s_coeffs,
            v_coeffs,
            deriv_scale,
            ctx,
        })
    }

    /// Elliptic constants, carried at a few guard bits above the output precision.
    pub fn bundle(&self) -> &EllipticBundle {
        &self.bundle
    }

    pub fn precision(&self) -> Precision {
        self.ctx
    }

    pub fn lengths(&self) -> (usize, usize) {
        (self.n0, self.n1)
    }

    /// `q^(n²)` for `n = 1..=N0`.
    pub fn coeffs_t(&self) -> Vec<Float> {
        self.s_coeffs[1..].iter().map(|c| Float::with_val(c.prec(), c / 2u32)).collect()
    }

    /// `q^(2n²+2n)` for `n = 0..=N1`.
    pub fn coeffs_v(&self) -> &[Float] {
        &self.v_coeffs
    }

    fn check(&self, u: &Float) -> Result<Float> {
        if !(u.is_finite() && *u >= -1 && *u <= 1) {
            return Err(Error::Domain(format!("Φ_r is evaluated on [-1, 1], got u = {u}")));
        }
        Ok(self.bundle.precision().real(u))
    }

    fn s(&self, u: &Float) -> Float {
        clenshaw_t(&self.s_coeffs, u)
    }

    /// `Φ_r(u)` for `|u| <= 1`.
    pub fn eval(&self, u: &Float) -> Result<Float> {
        let u = self.check(u)?;
        let neg = Float::with_val(u.prec(), -&u);
        let value = Float::with_val(u.prec(), &self.sqrt_r * self.s(&u)) / self.s(&neg);
        Ok(self.ctx.real(value))
    }

    /// `Φ_r'(u)` for `|u| <= 1`.
    pub fn deriv(&self, u: &Float) -> Result<Float> {
        let u = self.check(u)?;
        let p = u.prec();
        let neg = Float::with_val(p, -&u);
        let x = Float::with_val(p, 1) - Float::with_val(p, u.square_ref()) * 2u32;
        let num = clenshaw_v(&self.v_coeffs, &x);
        let den = self.s(&neg).square();
        Ok(self.ctx.real(Float::with_val(p, &self.deriv_scale * num) / den))
    }
}

/// `Φ_r(u)`.
pub fn phi_eval(series: &PhiSeries, u: &Float) -> Result<Float> {
    series.eval(u)
}

/// `Φ_r'(u)`.
pub fn phi_deriv(series: &PhiSeries, u: &Float) -> Result<Float> {
    series.deriv(u)
}
