//! Exponential sums from Gaussian quadrature, their errors and error bounds.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;

use crate::basis::BasisEvaluator;
use crate::error::{Error, Result};
use crate::kernel::PowerKernel;
use crate::numcore::chebyshev::chebyshev_t_all;
use crate::numcore::{rel_diff, Precision};
use crate::quadrature::{golub_welsch, stieltjes_coeffs, transformed_measure, QuadratureRule};
use crate::transform::Transform;

/// `Σ c_v e^(-t_v x)` with increasing exponents and positive coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSum {
    pub exponents: Vec<Float>,
    pub coefficients: Vec<Float>,
}

impl ExpSum {
    pub fn new(exponents: Vec<Float>, coefficients: Vec<Float>) -> Result<Self> {
        if exponents.is_empty() || exponents.len() != coefficients.len() {
            return Err(Error::Argument(format!(
                "need matching non-empty exponent and coefficient lists, got {} and {}",
                exponents.len(),
                coefficients.len()
            )));
        }
        if exponents.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structure("exponents are not strictly increasing".into()));
        }
        if coefficients.iter().any(|c| !(*c > 0)) {
            return Err(Error::Structure("coefficients are not all positive".into()));
        }
        Ok(ExpSum {
            exponents,
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// `Σ c_v`.
    pub fn coefficient_sum(&self, ctx: Precision) -> Float {
        self.coefficients.iter().fold(ctx.zero(), |acc, c| acc + c)
    }

    /// `Σ c_v e^(-t_v x)`.
    pub fn eval(&self, x: &Float, ctx: Precision) -> Float {
        self.deriv(0, x, ctx)
    }

    /// `Σ c_v (-t_v)^m e^(-t_v x)`.
    pub fn deriv(&self, m: u32, x: &Float, ctx: Precision) -> Float {
        let mut acc = ctx.zero();
        for (t, c) in self.exponents.iter().zip(&self.coefficients) {
            let mut term = (-ctx.real(t * x)).exp() * c;
            if m > 0 {
                term *= ctx.real(Pow::pow(t, m));
            }
            acc += term;
        }
        if m % 2 == 1 {
            -acc
        } else {
            acc
        }
    }

    /// Exponents as nodes and coefficients as weights.
    pub fn as_rule(&self) -> QuadratureRule {
        QuadratureRule {
            nodes: self.exponents.clone(),
            weights: self.coefficients.clone(),
        }
    }
}

/// Discretization size used when none is given: 96 for `a/b >= 2^-4`,
/// 1536 below.
pub fn default_mds(r: f64) -> usize {
    if r >= 1.0 / 16.0 {
        96
    } else {
        1536
    }
}

fn check_ratio(kernel: &PowerKernel, transform: &Transform) -> Result<()> {
    let r = kernel.ratio();
    if rel_diff(transform.r(), &r) > transform.precision().tol() {
        return Err(Error::Argument(format!(
            "transform built for r = {} but the kernel has a/b = {}",
            transform.r().to_f64(),
            r.to_f64()
        )));
    }
    Ok(())
}

/// Nodes `u_v` and Christoffel numbers `c_v` of the `m`-point Gaussian rule
/// for `dW(b ψ(u))`, discretized with `mds` Gauss–Legendre points.
pub fn gauss_rule(
    kernel: &PowerKernel,
    transform: &Transform,
    m: usize,
    mds: usize,
    ctx: Precision,
) -> Result<QuadratureRule> {
    check_ratio(kernel, transform)?;
    if m == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    let measure = transformed_measure(kernel, transform, mds, ctx)?;
    let coeffs = stieltjes_coeffs(&measure, m)?;
    golub_welsch(&coeffs, m, ctx)
}

/// The `m`-term sum `t_v = b ψ(u_v)`, `c_v` from the Gaussian rule.
pub fn gauss_expsum(
    kernel: &PowerKernel,
    transform: &Transform,
    m: usize,
    mds: usize,
    ctx: Precision,
) -> Result<ExpSum> {
    let rule = gauss_rule(kernel, transform, m, mds, ctx)?;
    let b = kernel.b();
    let exponents: Vec<Float> = rule
        .nodes
        .iter()
        .map(|u| transform.eval(u).map(|v| ctx.real(v * b)))
        .collect::<Result<_>>()?;
    if !(exponents[0] > *kernel.a() && exponents[m - 1] < *kernel.b()) {
        return Err(Error::Structure("exponents leave (a, b)".into()));
    }
    ExpSum::new(exponents, rule.weights)
}

/// `E_M(x) = f(x) - Σ c_v e^(-t_v x)`.
pub fn eval_error(sum: &ExpSum, kernel: &PowerKernel, x: &Float, ctx: Precision) -> Result<Float> {
    Ok(kernel.f(x, ctx)? - sum.eval(x, ctx))
}

/// `E_M'(x)`.
pub fn eval_error_deriv(
    sum: &ExpSum,
    kernel: &PowerKernel,
    m: u32,
    x: &Float,
    ctx: Precision,
) -> Result<Float> {
    Ok(kernel.f_derivative(m, x, ctx)? - sum.deriv(m, x, ctx))
}

/// `(16/π) ρ̂[ψ]^(-2M) f(0)`.
pub fn stenger_bound(kernel: &PowerKernel, transform: &Transform, m: usize, ctx: Precision) -> Float {
    let rho = ctx.real(transform.rho_hat());
    let decay = rho.pow(-2 * m as i32);
    ctx.real(16) / ctx.pi() * decay * kernel.f0(ctx)
}

/// Points per decade of the error scan.
pub const SCAN_DENSITY: usize = 512;

/// `f` tabulated on the scan grid `[2^-20/b, 2^20/a]`, reusable across sums
/// for the same kernel.
#[derive(Clone, Debug)]
pub struct ErrorScanner {
    kernel: PowerKernel,
    xs: Vec<Float>,
    fs: Vec<Float>,
    ctx: Precision,
}

impl ErrorScanner {
    pub fn new(kernel: &PowerKernel, ctx: Precision) -> Result<Self> {
        let lo = (ctx.pow2(-20) / kernel.b()).log10().to_f64();
        let hi = (ctx.pow2(20) / kernel.a()).log10().to_f64();
        let steps = ((hi - lo) * SCAN_DENSITY as f64).ceil() as usize;
        let xs: Vec<Float> = (0..=steps)
            .map(|i| ctx.real(10f64.powf(lo + (hi - lo) * i as f64 / steps as f64)))
            .collect();
        let fs = xs
            .par_iter()
            .map(|x| kernel.f(x, ctx))
            .collect::<Result<Vec<_>>>()?;
        Ok(ErrorScanner {
            kernel: kernel.clone(),
            xs,
            fs,
            ctx,
        })
    }

    pub fn grid(&self) -> &[Float] {
        &self.xs
    }

    /// `E_M` on the grid.
    pub fn errors(&self, sum: &ExpSum) -> Vec<Float> {
        let ctx = self.ctx;
        self.xs
            .par_iter()
            .zip(&self.fs)
            .map(|(x, f)| ctx.real(f - sum.eval(x, ctx)))
            .collect()
    }

    /// `(x, max |E_M(x)|)`: grid maxima refined by golden-section search in
    /// `log x` to relative width `2^(-bits/2)`.
    pub fn max_error(&self, sum: &ExpSum) -> Result<(Float, Float)> {
        let ctx = self.ctx;
        let abs: Vec<Float> = self.errors(sum).into_iter().map(|e| e.abs()).collect();
        let n = abs.len();
        let top = abs.iter().max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap().clone();
        // Between grid points |E| changes by far less than 1%, so only maxima
        // within 1% of the largest grid value can overtake it.
        let floor = ctx.real(&top) * 0.99f64;
        let candidates: Vec<usize> = (0..n)
            .filter(|&i| {
                abs[i] >= floor
                    && (i == 0 || abs[i] >= abs[i - 1])
                    && (i + 1 == n || abs[i] >= abs[i + 1])
            })
            .collect();
        let refined = candidates
            .par_iter()
            .map(|&i| {
                let lo = &self.xs[i.saturating_sub(1)];
                let hi = &self.xs[(i + 1).min(n - 1)];
                golden_max(|x| eval_error(sum, &self.kernel, x, ctx).map(|e| e.abs()), lo, hi, ctx)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = (self.xs[0].clone(), ctx.zero());
        for (x, v) in refined {
            if v > best.1 {
                best = (x, v);
            }
        }
        Ok(best)
    }
}

/// Golden-section search for the maximum of `g` on `[lo, hi]`, in `log x`.
pub fn golden_max<G>(g: G, lo: &Float, hi: &Float, ctx: Precision) -> Result<(Float, Float)>
where
    G: Fn(&Float) -> Result<Float>,
{
    golden_max_to(g, lo, hi, &ctx.pow2(-(ctx.bits() as i32) / 2), ctx)
}

/// [`golden_max`] stopping once the `log x` bracket is narrower than `width`.
pub fn golden_max_to<G>(
    g: G,
    lo: &Float,
    hi: &Float,
    width: &Float,
    ctx: Precision,
) -> Result<(Float, Float)>
where
    G: Fn(&Float) -> Result<Float>,
{
    let inv_phi = (ctx.real(5).sqrt() - 1u32) / 2u32;
    let (mut a, mut b) = (ctx.real(lo.ln_ref()), ctx.real(hi.ln_ref()));
    let eval = |s: &Float| g(&ctx.real(s.exp_ref()));
    let mut c = ctx.real(&b - ctx.real(&b - &a) * &inv_phi);
    let mut d = ctx.real(&a + ctx.real(&b - &a) * &inv_phi);
    let (mut gc, mut gd) = (eval(&c)?, eval(&d)?);
    while ctx.real(&b - &a) > *width {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = ctx.real(&b - ctx.real(&b - &a) * &inv_phi);
            gc = eval(&c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = ctx.real(&a + ctx.real(&b - &a) * &inv_phi);
            gd = eval(&d)?;
        }
    }
    let (s, v) = if gc > gd { (c, gc) } else { (d, gd) };
    let (glo, ghi) = (g(lo)?, g(hi)?);
    let mut best = (s.exp(), v);
    for (x, v) in [(lo, glo), (hi, ghi)] {
        if v > best.1 {
            best = (x.clone(), v);
        }
    }
    Ok(best)
}

/// Maximum of `|E_M|` over `x >= 0`.
pub fn max_error_scan(sum: &ExpSum, kernel: &PowerKernel, ctx: Precision) -> Result<(Float, Float)> {
    ErrorScanner::new(kernel, ctx)?.max_error(sum)
}

/// The coefficients `ε_{M,n} = ∫ T_n(u) dW(b ψ(u)) - Σ c_v T_n(u_v)` of the
/// quadrature error in the basis `χ_n(bx)`.
#[derive(Clone, Debug)]
pub struct ErrorExpansion {
    m: usize,
    /// `ε_{M,n}` for `n = 0..=N`.
    eps: Vec<Float>,
    b: Float,
    evaluators: Vec<BasisEvaluator>,
    ctx: Precision,
}

impl ErrorExpansion {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Highest index `N`.
    pub fn order(&self) -> usize {
        self.eps.len() - 1
    }

    pub fn eps(&self, n: usize) -> &Float {
        &self.eps[n]
    }

    /// `2 Σ_{n=2M}^N ε_{M,n} χ_n(bx)`.
    pub fn partial_sum(&self, x: &Float) -> Result<Float> {
        let ctx = self.ctx;
        let bx = ctx.real(x * &self.b);
        let mut acc = ctx.zero();
        for ev in &self.evaluators {
            acc += ev.eval(&bx)? * &self.eps[ev.n()];
        }
        Ok(acc * 2u32)
    }

    /// `4 f(0) ρ̂^(-N-1) / (1 - ρ̂^-1)`.
    pub fn remainder_bound(&self, f0: &Float, rho_hat: &Float) -> Float {
        let ctx = self.ctx;
        let inv = ctx.real(rho_hat.recip_ref());
        let tail = ctx.real(Pow::pow(&inv, (self.order() + 1) as u32));
        ctx.real(f0 * 4u32) * tail / (ctx.one() - inv)
    }
}

/// `ε_{M,n}` for `n = 0..=N`, `N >= 2M`.
///
/// The integrals are taken with Gauss–Legendre discretizations of doubling
/// size until all of them agree to `f(0) 2^(-bits+16)`.
pub fn epsilon_coeffs(
    kernel: &PowerKernel,
    transform: &Transform,
    m: usize,
    n: usize,
    mds: usize,
    ctx: Precision,
) -> Result<ErrorExpansion> {
    if n < 2 * m {
        return Err(Error::Argument(format!("N = {n} must be at least 2M = {}", 2 * m)));
    }
    let rule = gauss_rule(kernel, transform, m, mds, ctx)?;
    let f0 = kernel.f0(ctx);
    let target = ctx.real(&f0 * ctx.tol());

    let moments = |size: usize| -> Result<Vec<Float>> {
        let measure = transformed_measure(kernel, transform, size, ctx)?;
        let mut acc = vec![ctx.zero(); n + 1];
        for (u, w) in measure.nodes().iter().zip(measure.weights()) {
            for (j, t) in chebyshev_t_all(n + 1, u).into_iter().enumerate() {
                acc[j] += t * w;
            }
        }
        Ok(acc)
    };
    let mut size = 64.max(n + 1);
    let mut sigma = moments(size)?;
    loop {
        size *= 2;
        let next = moments(size)?;
        let gap = sigma
            .iter()
            .zip(&next)
            .map(|(a, b)| ctx.real(a - b).abs())
            .max_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap();
        sigma = next;
        if gap <= target {
            break;
        }
        if size >= 1 << 14 {
            return Err(Error::Convergence {
                routine: "epsilon_coeffs",
                iterations: size,
                detail: format!("integrals still move by {:.3e}", gap.to_f64()),
            });
        }
    }

    let mut eps = sigma;
    for (u, c) in rule.nodes.iter().zip(&rule.weights) {
        for (j, t) in chebyshev_t_all(n + 1, u).into_iter().enumerate() {
            eps[j] -= t * c;
        }
    }
    let evaluators = (2 * m..=n)
        .map(|j| BasisEvaluator::new(transform, j, 1e-30))
        .collect::<Result<_>>()?;
    Ok(ErrorExpansion {
        m,
        eps,
        b: ctx.real(kernel.b()),
        evaluators,
        ctx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use crate::transform::TransformKind;

    fn ctx() -> Precision {
        Precision::new(128).unwrap()
    }

    fn kernel(eta: f64, a: f64) -> PowerKernel {
        let c = ctx();
        PowerKernel::new(c.real(eta), c.real(a), c.one()).unwrap()
    }

    #[test]
    fn p1_with_unit_density_is_legendre() {
        let c = ctx();
        let k = kernel(1.0, 0.25);
        let t = Transform::new(TransformKind::P1, &k.ratio(), c).unwrap();
        let s = gauss_expsum(&k, &t, 5, 32, c).unwrap();
        let gl = gauss_legendre(5, c).unwrap();
        for (i, (u, w)) in gl.nodes.iter().zip(&gl.weights).enumerate() {
            let want_t = t.eval(u).unwrap();
            let want_c = c.real(w * 0.375);
            assert!(rel_diff(&s.exponents[i], &want_t) < c.pow2(-118));
            assert!(rel_diff(&s.coefficients[i], &want_c) < c.pow2(-118));
        }
        let one = gauss_expsum(&k, &t, 1, 32, c).unwrap();
        assert!(rel_diff(&one.exponents[0], &c.real(0.625)) < c.pow2(-120));
        assert!(rel_diff(&one.coefficients[0], &c.real(0.75)) < c.pow2(-120));
    }

    #[test]
    fn coefficients_sum_to_f0() {
        let c = ctx();
        for eta in [0.5, 1.0, 2.0] {
            let k = kernel(eta, 0.5);
            for kind in TransformKind::ALL {
                let t = Transform::new(kind, &k.ratio(), c).unwrap();
                let s = gauss_expsum(&k, &t, 6, 96, c).unwrap();
                let e0 = eval_error(&s, &k, &c.zero(), c).unwrap();
                assert!(e0.abs() < c.real(&k.f0(c) * c.pow2(-108)), "{kind} η={eta}");
            }
        }
    }

    #[test]
    fn mismatched_ratio_rejected() {
        let c = ctx();
        let k = kernel(1.0, 0.5);
        let t = Transform::new(TransformKind::P2, &c.real(0.25), c).unwrap();
        assert!(matches!(gauss_expsum(&k, &t, 3, 32, c), Err(Error::Argument(_))));
    }

    #[test]
    fn bound_decreases_geometrically() {
        let c = ctx();
        let k = kernel(1.0, 0.25);
        let t = Transform::new(TransformKind::Phi, &k.ratio(), c).unwrap();
        let b1 = stenger_bound(&k, &t, 1, c);
        // f(0) = 3/4 and ρ̂² = 35.8885 at r = 1/4
        assert!((b1.to_f64() / 0.75 - 0.141911).abs() < 5e-7);
        let b2 = stenger_bound(&k, &t, 2, c);
        let rho2 = c.real(t.rho_hat().square_ref());
        assert!(rel_diff(&(c.real(&b1 / &b2)), &rho2) < c.pow2(-120));
    }

    #[test]
    fn error_bounded_by_bound_and_by_exponentials() {
        let c = ctx();
        let k = kernel(0.5, 0.5);
        let scanner = ErrorScanner::new(&k, c).unwrap();
        let f0 = k.f0(c);
        for kind in TransformKind::ALL {
            let t = Transform::new(kind, &k.ratio(), c).unwrap();
            let s = gauss_expsum(&k, &t, 4, 96, c).unwrap();
            let (x, e) = scanner.max_error(&s).unwrap();
            assert!(e > 0 && e < stenger_bound(&k, &t, 4, c), "{kind}");
            assert!(x > scanner.grid()[0] && x < *scanner.grid().last().unwrap());
            for (x, err) in scanner.grid().iter().zip(scanner.errors(&s)).step_by(97) {
                let env = ((-c.real(x * 0.5)).exp() - (-c.real(x)).exp()) * &f0;
                assert!(err.abs() <= env, "{kind} at {x}");
            }
        }
    }

    #[test]
    fn expansion_exact_below_2m() {
        let c = ctx();
        let k = kernel(1.0, 0.5);
        let t = Transform::new(TransformKind::Phi, &k.ratio(), c).unwrap();
        let ex = epsilon_coeffs(&k, &t, 3, 10, 96, c).unwrap();
        let f0 = k.f0(c);
        for n in 0..6 {
            assert!(ex.eps(n).clone().abs() < c.real(&f0 * c.pow2(-100)), "n={n}");
        }
        for n in 6..=10 {
            assert!(ex.eps(n).clone().abs() <= c.real(&f0 * 2u32));
        }
        assert!(epsilon_coeffs(&k, &t, 3, 5, 96, c).is_err());
    }

    #[test]
    fn expsum_validation() {
        let c = ctx();
        assert!(ExpSum::new(vec![c.one(), c.real(0.5)], vec![c.one(), c.one()]).is_err());
        assert!(ExpSum::new(vec![c.one()], vec![c.zero()]).is_err());
        let s = ExpSum::new(vec![c.one()], vec![c.real(2)]).unwrap();
        let v = s.deriv(1, &c.zero(), c);
        assert_eq!(v, -2);
    }
}
