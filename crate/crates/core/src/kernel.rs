//! The inverse-power family `f(x) = ∫_a^b e^(-xt) t^(η-1)/Γ(η) dt`.
//!
//! Values and derivatives are computed from closed or semi-closed forms:
//! an ascending series for small `bx` and a difference of upper incomplete
//! gamma functions otherwise, with guard bits added when that difference
//! cancels. A panelled Gauss–Legendre route with order doubling is kept as
//! an independent check.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rug::float::Constant;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::numcore::{rel_diff, Precision};
use crate::quadrature::gauss_legendre;

/// `bx` below which the ascending series is used.
const SERIES_LIMIT: f64 = 4.0;
const GUARD_BITS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Order {
    /// `η` is a positive integer.
    Integer(u32),
    /// `η = j + 1/2`.
    HalfInteger(u32),
    General,
}

/// `f_{η,a,b}` with `η > 0` and `0 < a < b`.
#[derive(Clone, Debug)]
pub struct PowerKernel {
    eta: Float,
    a: Float,
    b: Float,
    order: Order,
    gamma_eta: Arc<Mutex<HashMap<u32, Float>>>,
}

impl PowerKernel {
    pub fn new(eta: Float, a: Float, b: Float) -> Result<Self> {
        if !(eta.is_finite() && eta > 0) {
            return Err(Error::Domain(format!("η must be positive, got {eta}")));
        }
        if !(a.is_finite() && b.is_finite() && a > 0 && b > a) {
            return Err(Error::Domain(format!("need 0 < a < b, got a = {a}, b = {b}")));
        }
        let twice = Float::with_val(eta.prec() + 1, &eta * 2u32);
        let order = if twice.is_integer() {
            let n = twice.to_u32_saturating().unwrap_or(u32::MAX);
            if n % 2 == 0 {
                Order::Integer(n / 2)
            } else {
                Order::HalfInteger(n / 2)
            }
        } else {
            Order::General
        };
        Ok(PowerKernel {
            eta,
            a,
            b,
            order,
            gamma_eta: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn eta(&self) -> &Float {
        &self.eta
    }

    pub fn a(&self) -> &Float {
        &self.a
    }

    pub fn b(&self) -> &Float {
        &self.b
    }

    /// `a/b` at the precision of the stored endpoints.
    pub fn ratio(&self) -> Float {
        let prec = self.a.prec().max(self.b.prec());
        Float::with_val(prec, &self.a / &self.b)
    }

    /// The same family on `[a/b, 1]`; `f_{η,a,b}(x) = b^η f_{η,a/b,1}(bx)`.
    pub fn normalized(&self) -> PowerKernel {
        let prec = self.b.prec();
        PowerKernel {
            a: self.ratio(),
            b: Float::with_val(prec, 1),
            ..self.clone()
        }
    }

    /// `Γ(η)`, exact for `η ∈ {1/2, 1, 2}`.
    pub fn gamma_eta(&self, ctx: Precision) -> Float {
        let mut cache = self.gamma_eta.lock().unwrap();
        cache
            .entry(ctx.bits())
            .or_insert_with(|| match self.order {
                Order::Integer(1) | Order::Integer(2) => ctx.one(),
                Order::HalfInteger(0) => ctx.pi().sqrt(),
                _ => ctx.real(&self.eta).gamma(),
            })
            .clone()
    }

    /// `W'(t) = t^(η-1)/Γ(η)` for `a <= t <= b`.
    pub fn density(&self, t: &Float, ctx: Precision) -> Result<Float> {
        if !(*t >= self.a && *t <= self.b) {
            return Err(Error::Domain(format!(
                "density is supported on [{}, {}], got t = {t}",
                self.a.to_f64(),
                self.b.to_f64()
            )));
        }
        Ok(self.density_unchecked(t, ctx))
    }

    /// `W'(t)` without the support check.
    pub fn density_unchecked(&self, t: &Float, ctx: Precision) -> Float {
        let power = match self.order {
            Order::Integer(1) => ctx.one(),
            Order::Integer(2) => ctx.real(t),
            Order::HalfInteger(0) => ctx.real(t.sqrt_ref()).recip(),
            _ => {
                let e = ctx.real(&self.eta) - 1u32;
                ctx.real(Pow::pow(t, &e))
            }
        };
        power / self.gamma_eta(ctx)
    }

    /// `f(0) = (b^η - a^η)/Γ(η+1)`.
    pub fn f0(&self, ctx: Precision) -> Float {
        let work = ctx.widened(GUARD_BITS);
        ctx.real(self.moment(&work.real(&self.eta), work) / self.gamma_eta(work))
    }

    /// `f(x)`.
    pub fn f(&self, x: &Float, ctx: Precision) -> Result<Float> {
        self.f_derivative(0, x, ctx)
    }

    /// `f^(n)(x)` for `x >= 0`.
    pub fn f_derivative(&self, n: u32, x: &Float, ctx: Precision) -> Result<Float> {
        if !(x.is_finite() && *x >= 0) {
            return Err(Error::Domain(format!("x must be finite and nonnegative, got {x}")));
        }
        let work = ctx.widened(GUARD_BITS);
        let p = work.real(&self.eta) + n;
        let value = if x.is_zero() {
            self.moment(&p, work)
        } else if Float::with_val(53, x * &self.b).to_f64() <= SERIES_LIMIT {
            self.series(&p, x, work)
        } else {
            self.gamma_difference(n, &p, x, ctx)
        };
        let value = ctx.real(value / self.gamma_eta(work));
        Ok(if n % 2 == 1 { -value } else { value })
    }

    /// `∫_a^b t^(p-1) dt = a^p expm1(p log(b/a)) / p`.
    fn moment(&self, p: &Float, ctx: Precision) -> Float {
        let log_ratio = ctx.real(&self.b / &self.a).ln();
        let lead = ctx.real(Pow::pow(&self.a, p));
        lead * ctx.real(p * &log_ratio).exp_m1() / p
    }

    /// `Σ_k (-x)^k/k! · (b^(k+p) - a^(k+p))/(k+p)`.
    fn series(&self, p: &Float, x: &Float, ctx: Precision) -> Float {
        let prec = ctx.bits();
        let a = ctx.real(&self.a);
        let b = ctx.real(&self.b);
        let width = ctx.real(&b - &a);
        // D_k = b^(k+p) - a^(k+p) by a cancellation-free recurrence.
        let mut a_pow = ctx.real(Pow::pow(&a, p));
        let mut diff = ctx.real(&a_pow * ctx.real(p * ctx.real(&b / &a).ln()).exp_m1());
        let mut coef = ctx.one();
        let mut sum = ctx.zero();
        let neg_x = ctx.real(-x);
        let bx = Float::with_val(53, x * &b).to_f64();
        let eps = ctx.eps();
        for k in 0u32.. {
            let term = Float::with_val(prec, &coef * &diff) / (ctx.real(p) + k);
            let small = Float::with_val(prec, term.abs_ref()) <= Float::with_val(prec, sum.abs_ref()) * &eps;
            sum += term;
            if small && f64::from(k) > bx {
                break;
            }
            coef = coef * &neg_x / (k + 1);
            diff = diff * &b + Float::with_val(prec, &width * &a_pow);
            a_pow *= &a;
        }
        sum
    }

    /// `x^(-p) [Γ(p, ax) - Γ(p, bx)]`, widening the precision until the
    /// subtraction keeps `bits + 16` bits.
    fn gamma_difference(&self, n: u32, p: &Float, x: &Float, ctx: Precision) -> Float {
        let mut extra = GUARD_BITS;
        loop {
            let work = ctx.widened(extra);
            let p = work.real(p);
            let ax = work.real(x * &self.a);
            let bx = work.real(x * &self.b);
            let hi = self.upper_gamma(n, &p, &ax, work);
            if hi.is_zero() {
                return hi;
            }
            let lo = self.upper_gamma(n, &p, &bx, work);
            let diff = work.real(&hi - &lo);
            let lost = if diff > 0 {
                (hi.clone() / &diff).log2().to_f64().max(0.0)
            } else {
                f64::INFINITY
            };
            if lost <= f64::from(extra - GUARD_BITS) || extra > 16 * ctx.bits() {
                let scale = work.real(Pow::pow(&work.real(x), &p));
                return diff / scale;
            }
            extra = GUARD_BITS + lost.ceil() as u32 + 8;
        }
    }

    /// `Γ(p, z)` with `p = n + η`.
    fn upper_gamma(&self, n: u32, p: &Float, z: &Float, ctx: Precision) -> Float {
        let prec = ctx.bits();
        match self.order {
            Order::Integer(m) => {
                // (p-1)! e^(-z) Σ_{k<p} z^k/k!
                let p_int = m + n;
                let mut term = ctx.one();
                let mut sum = ctx.one();
                for k in 1..p_int {
                    term = term * z / k;
                    sum += &term;
                }
                let fact = ctx.real(Float::factorial(p_int - 1));
                sum * (-ctx.real(z)).exp() * fact
            }
            Order::HalfInteger(j) => {
                // Γ(1/2, z) = √π erfc(√z), then Γ(s+1, z) = s Γ(s, z) + z^s e^(-z).
                let root = ctx.real(z.sqrt_ref());
                let mut g = ctx.real(root.erfc_ref()) * ctx.real(Constant::Pi).sqrt();
                let emz = (-ctx.real(z)).exp();
                let mut zs = root;
                let mut s = ctx.ratio(1, 2);
                for _ in 0..(j + n) {
                    g = g * &s + Float::with_val(prec, &zs * &emz);
                    zs *= z;
                    s += 1u32;
                }
                g
            }
            Order::General if *z >= ctx.real(p * 2u32) + 10u32 => upper_gamma_cf(p, z, ctx),
            Order::General => ctx.real(p).gamma_inc(z),
        }
    }

    /// `f^(n)(x)` by Gauss–Legendre with `order` nodes on each panel.
    ///
    /// Panels double in length from `a` and are cut so that `x` times a
    /// panel width stays below 8; panels whose weight `e^(-x(t-a))` is below
    /// the working precision are dropped.
    pub fn f_derivative_gl(&self, n: u32, x: &Float, order: usize, ctx: Precision) -> Result<Float> {
        if !(x.is_finite() && *x >= 0) {
            return Err(Error::Domain(format!("x must be finite and nonnegative, got {x}")));
        }
        let work = ctx.widened(GUARD_BITS);
        let rule = gauss_legendre(order, work)?;
        let p_minus_1 = work.real(&self.eta) + n - 1u32;
        let a = work.real(&self.a);
        let b = work.real(&self.b);
        let xf = x.to_f64();
        let af = a.to_f64();
        let spread = (b.to_f64() / af).log2() * p_minus_1.to_f64().abs();
        let cutoff = (f64::from(work.bits()) + 20.0 + spread) * std::f64::consts::LN_2;

        let mut total = work.zero();
        let mut left = a.clone();
        while left < b {
            let mut right = work.real(&left * 2u32).min(&b);
            if xf > 0.0 {
                let cap = work.real(&left + 8.0 / xf);
                if cap < right {
                    right = cap;
                }
            }
            let panel = rule.mapped(&left, &right);
            total += panel.apply(|t| {
                let e = (-work.real(x * t)).exp();
                e * work.real(Pow::pow(t, &p_minus_1))
            });
            if xf * (left.to_f64() - af) > cutoff {
                break;
            }
            left = right;
        }
        let value = ctx.real(total / self.gamma_eta(work));
        Ok(if n % 2 == 1 { -value } else { value })
    }

    /// `f^(n)(x)` by [`f_derivative_gl`](Self::f_derivative_gl), doubling the
    /// order from 16 until two successive values agree to `2^(-bits+16)`.
    pub fn f_derivative_quadrature(&self, n: u32, x: &Float, ctx: Precision) -> Result<Float> {
        let mut order = 16;
        let mut last = self.f_derivative_gl(n, x, order, ctx)?;
        while order < 4096 {
            order *= 2;
            let next = self.f_derivative_gl(n, x, order, ctx)?;
            if rel_diff(&next, &last) <= ctx.tol() {
                return Ok(next);
            }
            last = next;
        }
        Err(Error::Convergence {
            routine: "f_derivative_quadrature",
            iterations: order,
            detail: format!("x = {}", x.to_f64()),
        })
    }
}

/// `Γ(p, z)` by the Legendre continued fraction, evaluated with Lentz's
/// method. Converges quickly for `z` well above `p`.
fn upper_gamma_cf(p: &Float, z: &Float, ctx: Precision) -> Float {
    let tiny = ctx.pow2(-4 * ctx.bits() as i32);
    let eps = ctx.eps();
    let mut b = ctx.real(z + 1u32) - p;
    let mut c = ctx.real(tiny.recip_ref());
    let mut d = ctx.real(b.recip_ref());
    let mut h = d.clone();
    for i in 1u32..100_000 {
        let an = -(ctx.real(i) * (ctx.real(i) - p));
        b += 2u32;
        d = ctx.real(&an * &d) + &b;
        if d.is_zero() {
            d = tiny.clone();
        }
        c = ctx.real(&an / &c) + &b;
        if c.is_zero() {
            c = tiny.clone();
        }
        d.recip_mut();
        let delta = ctx.real(&d * &c);
        h *= &delta;
        if (delta - 1u32).abs() <= eps {
            break;
        }
    }
    ctx.real(p * ctx.real(z.ln_ref()) - z).exp() * h
}
