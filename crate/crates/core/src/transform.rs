//! Variable transformations `ψ_r` of `[-1, 1]` onto `[r, 1]`.
//!
//! | kind  | `ψ_r(u)`                               | `ρ̂[ψ_r]`                              |
//! |-------|----------------------------------------|----------------------------------------|
//! | `Phi` | elliptic, see [`crate::phi`]           | `1/q`                                  |
//! | `Exp` | `r^((1-u)/2)`                          | `π/L + sqrt((π/L)² + 1)`, `L = log(1/r)` |
//! | `P2`  | `(((1-√r)/2) u + (1+√r)/2)²`           | `(sqrt(1+r) + sqrt(2√r)) / (1-√r)`     |
//! | `P1`  | `((1-r)/2) u + (1+r)/2`                | `(1+√r)/(1-√r)`                        |
//! | `R01` | `(2r/(1-r)) / ((1+r)/(1-r) - u)`       | `(1+√r)/(1-√r)`                        |
//!
//! The error of an `M`-point Gaussian rule applied after `ψ_r` decays like
//! `ρ̂[ψ_r]^(-2M)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rug::Float;

use crate::error::{Error, Result};
use crate::numcore::Precision;
use crate::phi::PhiSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Phi,
    Exp,
    P1,
    P2,
    R01,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::Phi,
        TransformKind::Exp,
        TransformKind::P2,
        TransformKind::P1,
        TransformKind::R01,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Phi => "phi",
            TransformKind::Exp => "exp",
            TransformKind::P1 => "p1",
            TransformKind::P2 => "p2",
            TransformKind::R01 => "r01",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown transform {s:?}")))
    }
}

type PhiKey = (String, u32);

fn phi_cache() -> &'static Mutex<HashMap<PhiKey, Arc<PhiSeries>>> {
    static CACHE: OnceLock<Mutex<HashMap<PhiKey, Arc<PhiSeries>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared `Φ_r` series, built once per `(r, bits)`.
pub fn cached_phi(r: &Float, ctx: Precision) -> Result<Arc<PhiSeries>> {
    let key = (r.to_string_radix(16, None), ctx.bits());
    if let Some(s) = phi_cache().lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    let series = Arc::new(PhiSeries::new(r, ctx)?);
    phi_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| series.clone());
    Ok(series)
}

/// A transformation `ψ_r` with `ψ_r(-1) = r`, `ψ_r(1) = 1` and `ψ_r' > 0`.
#[derive(Clone, Debug)]
pub struct Transform {
    kind: TransformKind,
    r: Float,
    sqrt_r: Float,
    phi: Option<Arc<PhiSeries>>,
    ctx: Precision,
}

impl Transform {
    pub fn new(kind: TransformKind, r: &Float, ctx: Precision) -> Result<Self> {
        if !(r.is_finite() && *r > 0 && *r < 1) {
            return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
        }
        let phi = match kind {
            TransformKind::Phi => Some(cached_phi(r, ctx)?),
            _ => None,
        };
        let r = ctx.real(r);
        Ok(Transform {
            kind,
            sqrt_r: ctx.real(r.sqrt_ref()),
            r,
            phi,
            ctx,
        })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn r(&self) -> &Float {
        &self.r
    }

    pub fn precision(&self) -> Precision {
        self.ctx
    }

    /// The `Φ_r` series when `kind` is `Phi`.
    pub fn phi(&self) -> Option<&PhiSeries> {
        self.phi.as_deref()
    }

    fn check(&self, u: &Float) -> Result<()> {
        if u.is_finite() && *u >= -1 && *u <= 1 {
            Ok(())
        } else {
            Err(Error::Domain(format!("ψ_r is evaluated on [-1, 1], got u = {u}")))
        }
    }

    /// `ψ_r(u)`.
    pub fn eval(&self, u: &Float) -> Result<Float> {
        self.check(u)?;
        if *u == -1 {
            return Ok(self.r.clone());
        }
        if *u == 1 {
            return Ok(self.ctx.one());
        }
        let c = self.ctx;
        let one = c.one();
        Ok(match self.kind {
            TransformKind::Phi => self.phi.as_ref().unwrap().eval(u)?,
            TransformKind::P1 => {
                c.real(&one - &self.r) / 2u32 * u + c.real(&one + &self.r) / 2u32
            }
            TransformKind::P2 => {
                let lin = c.real(&one - &self.sqrt_r) / 2u32 * u + c.real(&one + &self.sqrt_r) / 2u32;
                lin.square()
            }
            TransformKind::Exp => {
                let e = c.real(&one - u) / 2u32;
                c.real(self.r.ln_ref()) * e
            }
            .exp(),
            TransformKind::R01 => {
                let (num, pole) = self.r01_parts();
                num / (pole - u)
            }
        })
    }

    /// `2r/(1-r)` and the pole `(1+r)/(1-r)`.
    fn r01_parts(&self) -> (Float, Float) {
        let c = self.ctx;
        let den = c.one() - &self.r;
        let num = c.real(&self.r * 2u32) / &den;
        let pole = (c.one() + &self.r) / den;
        (num, pole)
    }

    /// `ψ_r'(u)`.
    pub fn deriv(&self, u: &Float) -> Result<Float> {
        self.check(u)?;
        let c = self.ctx;
        let one = c.one();
        Ok(match self.kind {
            TransformKind::Phi => self.phi.as_ref().unwrap().deriv(u)?,
            TransformKind::P1 => (one - &self.r) / 2u32,
            TransformKind::P2 => {
                let slope = c.real(&one - &self.sqrt_r) / 2u32;
                let lin = c.real(&slope * u) + c.real(&one + &self.sqrt_r) / 2u32;
                lin * slope * 2u32
            }
            TransformKind::Exp => {
                let half_log = c.real(self.r.ln_ref()) / 2u32;
                -(self.eval(u)? * half_log)
            }
            TransformKind::R01 => {
                let (num, pole) = self.r01_parts();
                num / (pole - u).square()
            }
        })
    }

    /// `ψ_r^(-1)(τ)` for `r <= τ <= 1`, by bisection.
    pub fn inverse(&self, tau: &Float) -> Result<Float> {
        if !(*tau >= self.r && *tau <= 1) {
            return Err(Error::Domain(format!(
                "τ must lie in [r, 1] = [{}, 1], got {tau}",
                self.r.to_f64()
            )));
        }
        let c = self.ctx;
        let (mut lo, mut hi) = (c.real(-1), c.one());
        if *tau == self.r {
            return Ok(lo);
        }
        if *tau == 1 {
            return Ok(hi);
        }
        let tol = c.eps() * 4u32;
        while c.real(&hi - &lo) > tol {
            let mid = c.real(&lo + &hi) / 2u32;
            if mid == lo || mid == hi {
                break;
            }
            if self.eval(&mid)? < *tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(c.real(&lo + &hi) / 2u32)
    }

    /// The decay radius `ρ̂[ψ_r]`.
    pub fn rho_hat(&self) -> Float {
        let c = self.ctx;
        let one = c.one();
        match self.kind {
            TransformKind::Phi => {
                let q = &self.phi.as_ref().unwrap().bundle().q;
                c.real(q.recip_ref())
            }
            TransformKind::P1 | TransformKind::R01 => {
                c.real(&one + &self.sqrt_r) / c.real(&one - &self.sqrt_r)
            }
            TransformKind::P2 => {
                let a = c.real(&one + &self.r).sqrt();
                let b = c.real(&self.sqrt_r * 2u32).sqrt();
                (a + b) / c.real(&one - &self.sqrt_r)
            }
            TransformKind::Exp => {
                let s = c.pi() / -c.real(self.r.ln_ref());
                let root = (c.real(s.square_ref()) + 1u32).sqrt();
                s + root
            }
        }
    }
}
