//! Complete elliptic integrals and the nome from the arithmetic-geometric mean.
//!
//! Everything here is parameterised by the complementary modulus `r` in
//! `(0, 1)`; the modulus is `k = sqrt(1 - r^2)`. One AGM run started at
//! `(1, r)` yields `pi / (2 K(k))`, the nome by a product over the iterates,
//! and `E(k)` by the companion sum of squared half-differences.

use rug::Float;

use super::precision::{rel_diff, Precision};
use crate::error::{Error, Result};

/// Iterates of the arithmetic-geometric mean, including the starting pair.
#[derive(Clone, Debug)]
pub struct AgmRun {
    pub a: Vec<Float>,
    pub g: Vec<Float>,
}

impl AgmRun {
    /// Common limit of the two sequences.
    pub fn limit(&self) -> &Float {
        self.a.last().expect("AGM run is never empty")
    }
}

/// Runs the AGM from `(a0, g0)` until `|a_n - g_n| <= g_n 2^(-bits+1)`.
pub fn agm(a0: &Float, g0: &Float, ctx: Precision) -> AgmRun {
    let bits = ctx.bits();
    let mut a = vec![ctx.real(a0)];
    let mut g = vec![ctx.real(g0)];
    let threshold = ctx.pow2(1 - bits as i32);
    // Quadratic convergence; the cap only guards against a zero start value.
    for _ in 0..(4 * bits as usize + 64) {
        let (an, gn) = (a.last().unwrap(), g.last().unwrap());
        let gap = Float::with_val(bits, an - gn).abs();
        if gap <= Float::with_val(bits, gn * &threshold) {
            break;
        }
        let next_a = Float::with_val(bits, an + gn) / 2u32;
        let next_g = Float::with_val(bits, an * gn).sqrt();
        a.push(next_a);
        g.push(next_g);
    }
    AgmRun { a, g }
}

/// Complete elliptic integral of the first kind `K(m)` for modulus `m`, given
/// the complementary modulus `m' = sqrt(1 - m^2)`.
fn complete_k(complement: &Float, ctx: Precision) -> (Float, AgmRun) {
    let run = agm(&ctx.one(), complement, ctx);
    let k = ctx.pi() / (ctx.real(run.limit()) * 2u32);
    (k, run)
}

/// `E(m)` from an AGM run started at `(1, m')`, with `c_0 = m`.
fn complete_e(modulus: &Float, k_value: &Float, run: &AgmRun, ctx: Precision) -> Float {
    let bits = ctx.bits();
    // sum_{n>=0} 2^(n-1) c_n^2
    let mut sum = Float::with_val(bits, modulus.square_ref()) / 2u32;
    for n in 1..run.a.len() {
        let c = Float::with_val(bits, &run.a[n - 1] - &run.g[n - 1]) / 2u32;
        let term = c.square() << (n as i32 - 1);
        sum += term;
    }
    ctx.real(k_value) * (ctx.one() - sum)
}

/// The constants attached to one value of `r`.
#[derive(Clone, Debug)]
pub struct EllipticBundle {
    /// Complementary modulus.
    pub r: Float,
    /// Modulus `sqrt(1 - r^2)`.
    pub k: Float,
    /// Nome `exp(-pi K(r) / K(k))`.
    pub q: Float,
    /// `K(k)`.
    pub kk: Float,
    /// `K(r)`.
    pub kr: Float,
    /// `E(k)`.
    pub ek: Float,
    /// `E(r)`.
    pub er: Float,
    ctx: Precision,
}

impl EllipticBundle {
    /// Builds the bundle for `0 < r < 1`.
    ///
    /// The nome is computed twice, by the AGM product and by the exponential
    /// of the period ratio, and the two must agree to `2^(-bits+8)`.
    pub fn new(r: &Float, ctx: Precision) -> Result<Self> {
        if !(r.is_finite() && *r > 0 && *r < 1) {
            return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
        }
        let bits = ctx.bits();
        // A few guard bits absorb the rounding of the products below.
        let work = ctx.widened(16);
        let r_w = work.real(r);
        let k_w = (work.one() - Float::with_val(work.bits(), r_w.square_ref())).sqrt();

        let (kk, run_k) = complete_k(&r_w, work);
        let (kr, run_r) = complete_k(&k_w, work);
        let ek = complete_e(&k_w, &kk, &run_k, work);
        let er = complete_e(&r_w, &kr, &run_r, work);

        let q_exp = (-(work.pi() * &kr / &kk)).exp();
        let q_prod = nome_from_run(&r_w, &run_k, work);
        let gap = rel_diff(&q_prod, &q_exp);
        if gap > ctx.pow2(8 - bits as i32) {
            return Err(Error::Precision {
                bits,
                detail: format!("nome product and exponential forms differ by {gap:.3e}"),
            });
        }

        Ok(EllipticBundle {
            r: ctx.real(r),
            k: ctx.real(&k_w),
            q: ctx.real(&q_exp),
            kk: ctx.real(&kk),
            kr: ctx.real(&kr),
            ek: ctx.real(&ek),
            er: ctx.real(&er),
            ctx,
        })
    }

    pub fn precision(&self) -> Precision {
        self.ctx
    }

    /// `E(k)`, the complete elliptic integral of the second kind.
    pub fn elliptic_e(&self) -> &Float {
        &self.ek
    }

    /// `E(k) K(r) + E(r) K(k) - K(k) K(r) - pi/2`; zero up to rounding.
    pub fn legendre_residual(&self) -> Float {
        let ctx = self.ctx;
        ctx.real(&self.ek * &self.kr) + ctx.real(&self.er * &self.kk)
            - ctx.real(&self.kk * &self.kr)
            - ctx.pi() / 2u32
    }

    /// `log(1/q) = pi K(r) / K(k)`.
    pub fn log_inv_q(&self) -> Float {
        self.ctx.pi() * &self.kr / &self.kk
    }
}

/// Nome by `q = (1 - r^2)/(16 r) prod_{n>=1} (g_n/a_n)^(3/2^n)`.
fn nome_from_run(r: &Float, run: &AgmRun, ctx: Precision) -> Float {
    let bits = ctx.bits();
    let mut log_prod = ctx.zero();
    for n in 1..run.a.len() {
        let ratio = Float::with_val(bits, &run.g[n] / &run.a[n]).ln();
        log_prod += ratio * 3u32 >> n as i32;
    }
    let lead = (ctx.one() - Float::with_val(bits, r.square_ref())) / (ctx.real(r) * 16u32);
    lead * log_prod.exp()
}

/// Nome `q(r)` by the AGM product alone.
pub fn nome_product(r: &Float, ctx: Precision) -> Result<Float> {
    if !(r.is_finite() && *r > 0 && *r < 1) {
        return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
    }
    let run = agm(&ctx.one(), r, ctx);
    Ok(nome_from_run(&ctx.real(r), &run, ctx))
}
