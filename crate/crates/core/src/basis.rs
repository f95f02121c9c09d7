//! Basis functions `χ_{ψ,r,n}(x) = (1/π) ∫_0^π e^(-x ψ_r(cos θ)) cos(nθ) dθ`.
//!
//! They are the Chebyshev coefficients of `e^(-x ψ_r(u))` and expand both the
//! target function and the quadrature error. Values come from an `M`-point
//! Gauss–Chebyshev rule, with `M` chosen from the decay radius `ρ̂[ψ_r]`.

use rug::Float;

use crate::error::{Error, Result};
use crate::numcore::{EllipticBundle, Precision};
use crate::quadrature::gauss_legendre;
use crate::transform::{Transform, TransformKind};

/// Default absolute tolerance, in units of `ρ̂^-n`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Smallest `M >= (n+1)/2` with
/// `(16/π) ((ρ̂^n + ρ̂^-n)/2) ρ̂^(-2M) < tol ρ̂^-n`.
pub fn basis_points(n: usize, rho_hat: f64, tol: f64) -> Result<usize> {
    if !(rho_hat > 1.0 && rho_hat.is_finite()) {
        return Err(Error::Domain(format!("ρ̂ must exceed 1, got {rho_hat}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let ln_rho = rho_hat.ln();
    let nf = n as f64;
    // log of the left side over the right side, without forming ρ̂^n
    let ln_cosh = nf * ln_rho + (-2.0 * nf * ln_rho).exp().ln_1p() - std::f64::consts::LN_2;
    let fixed = (16.0 / std::f64::consts::PI).ln() + ln_cosh + nf * ln_rho - tol.ln();
    let mut m = (n + 2) / 2;
    while fixed - 2.0 * m as f64 * ln_rho >= 0.0 {
        m += 1;
    }
    Ok(m.max(1))
}

/// Gauss–Chebyshev evaluator for one `χ_{ψ,r,n}`.
#[derive(Clone, Debug)]
pub struct BasisEvaluator {
    transform: Transform,
    n: usize,
    /// `ψ_r(cos θ_v)` at the working precision.
    psi: Vec<Float>,
    /// `cos(n θ_v) / M`.
    weights: Vec<Float>,
    work: Precision,
}

impl BasisEvaluator {
    /// Evaluator with absolute error below `tol ρ̂^-n`.
    pub fn new(transform: &Transform, n: usize, tol: f64) -> Result<Self> {
        let rho = transform.rho_hat().to_f64();
        let m = basis_points(n, rho, tol)?;
        Self::with_points(transform, n, m)
    }

    /// Evaluator using exactly `m` Chebyshev points.
    pub fn with_points(transform: &Transform, n: usize, m: usize) -> Result<Self> {
        if 2 * m < n + 1 {
            return Err(Error::Argument(format!(
                "{m} points cannot integrate cos({n}θ) exactly"
            )));
        }
        let ctx = transform.precision();
        // χ_n is of size ρ̂^-n while the summands are of size one.
        let lost = (n as f64 * transform.rho_hat().to_f64().log2()).ceil() as u32;
        let work = ctx.widened(lost + 16);
        let pi = work.pi();
        let mut psi = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for v in 1..=m {
            let theta = work.real(&pi * (2 * v - 1) as u64) / (2 * m) as u64;
            let u = if 2 * v - 1 == m { work.zero() } else { work.real(theta.cos_ref()) };
            psi.push(work.real(transform.eval(&ctx.real(&u))?));
            let c = work.real(&theta * n as u64).cos();
            weights.push(c / m as u64);
        }
        Ok(BasisEvaluator {
            transform: transform.clone(),
            n,
            psi,
            weights,
            work,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.psi.len()
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// `χ_n(x)`; exactly `δ_{n0}` at `x = 0`.
    pub fn eval(&self, x: &Float) -> Result<Float> {
        if x.is_zero() {
            let ctx = self.transform.precision();
            return Ok(if self.n == 0 { ctx.one() } else { ctx.zero() });
        }
        self.deriv(0, x)
    }

    /// `χ_n^(m)(x)`.
    pub fn deriv(&self, m: u32, x: &Float) -> Result<Float> {
        if !(x.is_finite() && *x >= 0) {
            return Err(Error::Domain(format!("x must be finite and nonnegative, got {x}")));
        }
        let w = self.work;
        let xw = w.real(x);
        let mut acc = w.zero();
        for (psi, c) in self.psi.iter().zip(&self.weights) {
            let mut term = (-w.real(psi * &xw)).exp() * c;
            if m > 0 {
                term *= w.real(psi.pow_ref_u32(m));
            }
            acc += term;
        }
        if m % 2 == 1 {
            acc = -acc;
        }
        Ok(self.transform.precision().real(acc))
    }
}

trait PowU32 {
    fn pow_ref_u32(&self, m: u32) -> Float;
}

impl PowU32 for Float {
    fn pow_ref_u32(&self, m: u32) -> Float {
        use rug::ops::Pow;
        Float::with_val(self.prec(), Pow::pow(self, m))
    }
}

/// `D_r χ_n(x) - (nπ/K(k))² χ_n(x)` for the elliptic basis, where
/// `D_r = x² d⁴ + 2x d³ - (1+r²) x² d² - (1+r²) x d + r² x²`.
pub fn operator_residual(ev: &BasisEvaluator, x: &Float) -> Result<Float> {
    let phi = ev
        .transform()
        .phi()
        .ok_or_else(|| Error::Argument("the differential operator applies to Φ_r only".into()))?;
    if !(*x > 0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    let ctx = ev.transform().precision();
    let bundle = phi.bundle();
    let d: Vec<Float> = (0..=4).map(|m| ev.deriv(m, x)).collect::<Result<_>>()?;
    let x = ctx.real(x);
    let x2 = ctx.real(x.square_ref());
    let r2 = ctx.real(bundle.r.square_ref());
    let s = ctx.one() + &r2;
    let lhs = ctx.real(&x2 * &d[4]) + ctx.real(&x * &d[3]) * 2u32
        - ctx.real(&s * &x2) * &d[2]
        - ctx.real(&s * &x) * &d[1]
        + ctx.real(&r2 * &x2) * &d[0];
    let lambda = (ctx.pi() * ev.n() as u64 / ctx.real(&bundle.kk)).square();
    Ok(lhs - lambda * &d[0])
}

/// `∫_0^∞ χ_m χ_n x^-1 dx` for the elliptic basis, `1 <= m, n <= nmax`.
///
/// Composite Gauss–Legendre on octave panels starting at `2^-40`; panels are
/// added until `e^(-2rX)/(2r) q^(m+n)` falls below `tol` at the left edge `X`.
pub fn orthogonality_matrix(transform: &Transform, nmax: usize, tol: f64) -> Result<Vec<Vec<Float>>> {
    let phi = transform
        .phi()
        .ok_or_else(|| Error::Argument("orthogonality holds for Φ_r only".into()))?;
    if nmax == 0 {
        return Err(Error::Argument("basis indices start at 1".into()));
    }
    let ctx = transform.precision();
    let evs: Vec<BasisEvaluator> = (1..=nmax)
        .map(|n| BasisEvaluator::new(transform, n, tol * 1e-6))
        .collect::<Result<_>>()?;
    let r = transform.r().to_f64();
    let q = phi.bundle().q.to_f64();
    let rule = gauss_legendre(40, ctx)?;
    let mut acc = vec![vec![ctx.zero(); nmax]; nmax];

    let mut left = ctx.pow2(-40);
    loop {
        let x_left = left.to_f64();
        let right = ctx.real(&left * 2u32);
        let width = if x_left < 64.0 { 4.0 } else { 8.0 / r };
        let pieces = ((x_left / width).ceil() as u64).max(1);
        for piece in 0..pieces {
            let lo = ctx.real(&left * (pieces + piece)) / pieces;
            let hi = ctx.real(&left * (pieces + piece + 1)) / pieces;
            let panel = rule.mapped(&lo, &hi);
            for (x, w) in panel.nodes.iter().zip(&panel.weights) {
                let vals: Vec<Float> = evs.iter().map(|e| e.eval(x)).collect::<Result<_>>()?;
                let wx = ctx.real(w / x);
                for i in 0..nmax {
                    let wi = ctx.real(&wx * &vals[i]);
                    for j in i..nmax {
                        acc[i][j] += ctx.real(&wi * &vals[j]);
                    }
                }
            }
        }
        left = right;
        let x = left.to_f64();
        let tail = (-2.0 * r * x).exp() / (2.0 * r) * q.powi(2);
        if tail < tol * 1e-3 && x > 1.0 {
            break;
        }
    }
    for i in 0..nmax {
        for j in 0..i {
            acc[i][j] = acc[j][i].clone();
        }
    }
    Ok(acc)
}

/// `∫_0^∞ χ_m χ_n x^-1 dx` for the elliptic basis.
pub fn orthogonality_integral(transform: &Transform, m: usize, n: usize, tol: f64) -> Result<Float> {
    if m == 0 || n == 0 {
        return Err(Error::Argument("basis indices start at 1".into()));
    }
    let k = m.max(n);
    let table = orthogonality_matrix(transform, k, tol)?;
    Ok(table[m - 1][n - 1].clone())
}

/// Closed-form diagonal `1/(n (q^-2n - q^2n))`.
pub fn orthogonality_norm(bundle: &EllipticBundle, n: usize, ctx: Precision) -> Float {
    let q2n = ctx.real(rug::ops::Pow::pow(&bundle.q, (2 * n) as u32));
    let inv = ctx.real(q2n.recip_ref());
    ctx.one() / ((inv - q2n) * n as u64)
}

/// Sign changes of `χ_n` on `(0, ∞)`, located by a scan at 64 points per
/// decade and refined by bisection.
pub fn basis_zeros(ev: &BasisEvaluator, tol: f64) -> Result<Vec<Float>> {
    if ev.transform().kind() != TransformKind::Phi {
        return Err(Error::Argument("zero counting is implemented for Φ_r".into()));
    }
    let n = ev.n();
    if n == 0 {
        return Err(Error::Argument("χ_0 has no zeros; n must be at least 1".into()));
    }
    let ctx = ev.transform().precision();
    let r = ev.transform().r().to_f64();
    let x_cut = (1.0 / (tol * 1e-8)).ln() / r;
    let lo_exp = -20.0 * std::f64::consts::LOG10_2;
    let hi_exp = x_cut.log10();
    let steps = ((hi_exp - lo_exp) * 64.0).ceil() as usize;
    let grid: Vec<Float> = (0..=steps)
        .map(|i| {
            let e = lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64;
            ctx.real(10f64.powf(e))
        })
        .collect();
    let vals: Vec<Float> = grid.iter().map(|x| ev.eval(x)).collect::<Result<_>>()?;

    let mut zeros = Vec::new();
    for i in 0..steps {
        if vals[i].is_sign_negative() == vals[i + 1].is_sign_negative() {
            continue;
        }
        let (mut lo, mut hi) = (grid[i].clone(), grid[i + 1].clone());
        let lo_negative = vals[i].is_sign_negative();
        for _ in 0..ctx.bits() {
            let mid = ctx.real(&lo + &hi) / 2u32;
            if mid == lo || mid == hi {
                break;
            }
            if ev.eval(&mid)?.is_sign_negative() == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        zeros.push(ctx.real(&lo + &hi) / 2u32);
    }
    if zeros.len() != n - 1 {
        return Err(Error::Structure(format!(
            "χ_{n} changes sign {} times, expected {}",
            zeros.len(),
            n - 1
        )));
    }
    Ok(zeros)
}

/// `W_{ψ,0}(τ) = arccos(-ψ_r^(-1)(τ)) / π` for `r <= τ <= 1`.
pub fn w0_eval(transform: &Transform, tau: &Float) -> Result<Float> {
    let ctx = transform.precision();
    let u = transform.inverse(tau)?;
    Ok((-u).acos() / ctx.pi())
}

/// `V_ψ = χ_0''(0) - χ_0'(0)²`, the variance of `W_{ψ,0}`.
pub fn v_transform(transform: &Transform) -> Result<Float> {
    let ctx = transform.precision();
    let tol = 2f64.powi(-(ctx.bits().min(1000) as i32));
    let ev = BasisEvaluator::new(transform, 0, tol)?;
    let zero = ctx.zero();
    let d1 = ev.deriv(1, &zero)?;
    let d2 = ev.deriv(2, &zero)?;
    Ok(d2 - d1.square())
}
