//! Best exponential sums: the spacing `h_r`, the Gaussian initialization,
//! `E_{M,h}` diagnostics and the Remez exchange.

use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::expsum::{golden_max_to, ExpSum};
use crate::kernel::PowerKernel;
use crate::numcore::linalg::{lu_solve, Cholesky, Matrix};
use crate::numcore::{newton_root, Precision};
use crate::quadrature::{golub_welsch, stieltjes_coeffs, transformed_measure, DiscreteMeasure};
use crate::transform::{Transform, TransformKind};

/// Decimal digits added on top of the `E_{M,h}` bound by [`precision_policy`].
pub const EXTRA_DIGITS: f64 = 30.0;

/// Lower and upper bounds `(1 - r/2) L/(1 - r)` and `L/(1 - r)` on `h_r`,
/// with `L = log((2 - r)/r)`.
pub fn hr_bounds(r: &Float, ctx: Precision) -> (Float, Float) {
    let one_minus = ctx.real(1 - ctx.real(r));
    let log = ctx.real(ctx.real(2 - ctx.real(r)) / r).ln();
    let upper = log / &one_minus;
    let lower = ctx.real(1 - ctx.real(r) / 2u32) * &upper;
    (lower, upper)
}

/// The unique positive root `h_r` of `(1-r) e^(-h) + e^(-(1-r)h) - r`,
/// by Newton's method started at the lower bound of [`hr_bounds`].
pub fn solve_hr(r: &Float, ctx: Precision) -> Result<Float> {
    if !(*r > 0 && *r < 1) {
        return Err(Error::Domain(format!("h_r needs 0 < r < 1, got {}", r.to_f64())));
    }
    // Extra bits for the cancellation in g near r = 1.
    let gap = ctx.real(1 - r);
    let lost = (-gap.get_exp().unwrap_or(0)).max(0) as u32;
    let work = ctx.widened(16 + lost);
    let r = work.real(r);
    let one_minus = work.real(1 - work.real(&r));
    let g = |h: &Float| {
        let e1 = (-work.real(h)).exp();
        let e2 = (-work.real(&one_minus * h)).exp();
        work.real(&one_minus * e1) + e2 - &r
    };
    let dg = |h: &Float| {
        let e1 = (-work.real(h)).exp();
        let e2 = (-work.real(&one_minus * h)).exp();
        -(work.real(e1 + e2) * &one_minus)
    };
    let (lo, hi) = hr_bounds(&r, work);
    let root = newton_root(g, dg, &lo, Some((&lo, &hi)), &work.tol(), work)?;
    Ok(ctx.real(root))
}

/// `h_r` with the three derived factors of the `E_{M,h}` bound at `h = h_r`.
#[derive(Clone, Debug)]
pub struct HrFactors {
    pub h: Float,
    /// `r e^((1-r) h_r)`, the maximum of `(1 + e^(-rh)) / (1 + e^(-h))`.
    pub growth: Float,
    /// `(√growth + 1)²`.
    pub prefactor: Float,
    /// `((√growth + 1) / (√growth - 1))²`, the decay per unit of `M`.
    pub ratio: Float,
}

impl HrFactors {
    pub fn new(r: &Float, ctx: Precision) -> Result<Self> {
        let h = solve_hr(r, ctx)?;
        let growth = ctx.real(ctx.real(1 - ctx.real(r)) * &h).exp() * r;
        let (prefactor, ratio) = bound_factors(&growth, ctx);
        Ok(HrFactors {
            h,
            growth,
            prefactor,
            ratio,
        })
    }

    /// `prefactor · ratio^(-M)`.
    pub fn bound(&self, m: usize) -> Float {
        let prec = self.ratio.prec();
        Float::with_val(prec, Pow::pow(&self.ratio, -(m as i32))) * &self.prefactor
    }
}

fn bound_factors(growth: &Float, ctx: Precision) -> (Float, Float) {
    let s = ctx.real(growth.sqrt_ref());
    let plus = ctx.real(&s + 1u32);
    let minus = s - 1u32;
    let prefactor = ctx.real(plus.square_ref());
    let ratio = (plus / minus).square();
    (prefactor, ratio)
}

/// Upper bound on `E_{M,h} / f(0)` for spacing `h`:
/// `(√R + 1)² ((√R + 1)/(√R - 1))^(-2M)` with `R = (1 + e^(-ah)) / (1 + e^(-bh))`.
///
/// Its maximum over `h` is attained at `h = h_(a/b) / b`.
pub fn eh_bound(a: &Float, b: &Float, m: usize, h: &Float, ctx: Precision) -> Float {
    let num = ctx.real(-ctx.real(a * h)).exp() + 1u32;
    let den = ctx.real(-ctx.real(b * h)).exp() + 1u32;
    let growth = num / den;
    if !(growth > 1) {
        return ctx.zero();
    }
    let (prefactor, ratio) = bound_factors(&growth, ctx);
    ctx.real(Pow::pow(&ratio, -(m as i32))) * prefactor
}

/// Working precision for `M`-term best approximations: the bits needed to
/// resolve the `E_{M,h}` bound at `h = h_(a/b)/b`, plus [`EXTRA_DIGITS`].
pub fn precision_policy(kernel: &PowerKernel, m: usize) -> Result<u32> {
    let ctx = Precision::new(128)?;
    let factors = HrFactors::new(&ctx.real(kernel.ratio()), ctx)?;
    let log2_bound = factors.prefactor.to_f64().log2() - m as f64 * factors.ratio.to_f64().log2();
    let bits = (-log2_bound + EXTRA_DIGITS * 10f64.log2()).ceil();
    Ok((bits as u32).max(Precision::MIN_BITS))
}

/// Discretization size for the initialization measure: 96 for
/// `a/b >= 2^-4`, 192 below.
pub fn remez_mds(r: f64) -> usize {
    if r >= 1.0 / 16.0 {
        96
    } else {
        192
    }
}

fn breakdown(ctx: Precision, what: &str, err: Error) -> Error {
    Error::Precision {
        bits: ctx.bits(),
        detail: format!("{what} broke down ({err}); increase the working precision"),
    }
}

/// The sum `(t_{h,v}, c_{h,v})` whose error satisfies
/// `E(ih) + E((i+1)h) = 0` for `i = 0..2M-1`.
///
/// Built from the `M`-point Gaussian rule for `(1 + y) dW_h(y)`,
/// `y = e^(-ht)`, discretized through the quadratic transformation and
/// `mds`-point Gauss–Legendre.
pub fn init_exchange(
    kernel: &PowerKernel,
    m: usize,
    h: &Float,
    mds: usize,
    ctx: Precision,
) -> Result<ExpSum> {
    let transform = Transform::new(TransformKind::P2, &kernel.ratio(), ctx)?;
    init_exchange_with(kernel, &transform, m, h, mds, ctx)
}

/// [`init_exchange`] with the discretization taken through `transform`.
pub fn init_exchange_with(
    kernel: &PowerKernel,
    transform: &Transform,
    m: usize,
    h: &Float,
    mds: usize,
    ctx: Precision,
) -> Result<ExpSum> {
    if m == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    if !(*h > 0) {
        return Err(Error::Domain(format!("spacing h must be positive, got {}", h.to_f64())));
    }
    let base = transformed_measure(kernel, transform, mds, ctx)?;
    let mut ys = Vec::with_capacity(mds);
    let mut ds = Vec::with_capacity(mds);
    for (u, w) in base.nodes().iter().zip(base.weights()).rev() {
        let t = ctx.real(transform.eval(u)? * kernel.b());
        let y = (-ctx.real(t * h)).exp();
        ds.push(ctx.real(&y + 1u32) * w);
        ys.push(y);
    }
    let measure = DiscreteMeasure::new(ys, ds).map_err(|e| breakdown(ctx, "discretized measure", e))?;
    let coeffs = stieltjes_coeffs(&measure, m).map_err(|e| breakdown(ctx, "Stieltjes procedure", e))?;
    let rule = golub_welsch(&coeffs, m, ctx).map_err(|e| breakdown(ctx, "Golub–Welsch", e))?;
    let mut exponents = Vec::with_capacity(m);
    let mut coefficients = Vec::with_capacity(m);
    for (y, d) in rule.nodes.iter().zip(&rule.weights).rev() {
        if !(*y > 0) {
            return Err(breakdown(ctx, "Gaussian rule", Error::Structure("non-positive node".into())));
        }
        exponents.push(-ctx.real(y.ln_ref()) / h);
        coefficients.push(ctx.real(d / ctx.real(y + 1u32)));
    }
    if !(exponents[0] > *kernel.a() && exponents[m - 1] < *kernel.b()) {
        return Err(breakdown(ctx, "Gaussian rule", Error::Structure("exponents leave (a, b)".into())));
    }
    ExpSum::new(exponents, coefficients).map_err(|e| breakdown(ctx, "Gaussian rule", e))
}

/// How [`emh`] evaluates `E_{M,h} = f(0) - Σ c_{h,v}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmhRoute {
    /// `f(0)` minus the coefficient sum of [`init_exchange`].
    Gauss,
    /// `det H_{M,h} / det G_{M,h}`.
    Det,
    /// `1 / (u^T H_{M,h}^-1 u)`.
    Inverse,
}

impl EmhRoute {
    pub const ALL: [EmhRoute; 3] = [EmhRoute::Gauss, EmhRoute::Det, EmhRoute::Inverse];

    pub fn name(self) -> &'static str {
        match self {
            EmhRoute::Gauss => "gauss",
            EmhRoute::Det => "det",
            EmhRoute::Inverse => "inverse",
        }
    }
}

impl fmt::Display for EmhRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmhRoute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmhRoute::ALL
            .into_iter()
            .find(|r| r.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Argument(format!("unknown route '{s}' (gauss, det, inverse)")))
    }
}

/// The Hankel matrix `H_{M,h} = [f((i+j)h)]` of size `M+1` and
/// `G_{M,h} = [f((i+j)h) + 2f((i+j+1)h) + f((i+j+2)h)]` of size `M`.
#[derive(Clone, Debug)]
pub struct HankelDiag {
    m: usize,
    h: Float,
    hankel: Matrix,
    g: Matrix,
}

impl HankelDiag {
    pub fn new(kernel: &PowerKernel, m: usize, h: &Float, ctx: Precision) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("M must be at least 1".into()));
        }
        let samples = (0..=2 * m)
            .map(|k| kernel.f(&ctx.real(h * k as u32), ctx))
            .collect::<Result<Vec<_>>>()?;
        let hankel = Matrix::from_fn(m + 1, |i, j| samples[i + j].clone());
        let g = Matrix::from_fn(m, |i, j| {
            let k = i + j;
            ctx.real(&samples[k + 1] * 2u32) + &samples[k] + &samples[k + 2]
        });
        Ok(HankelDiag {
            m,
            h: h.clone(),
            hankel,
            g,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> &Float {
        &self.h
    }

    pub fn hankel(&self) -> &Matrix {
        &self.hankel
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    /// `det H / det G`.
    pub fn det_ratio(&self) -> Result<Float> {
        let h = Cholesky::new(&self.hankel)?;
        let g = Cholesky::new(&self.g)?;
        Ok((h.log_det() - g.log_det()).exp())
    }

    /// `1 / (u^T H^-1 u)` with `u = (1, -1, 1, ...)`.
    pub fn inverse_form(&self) -> Result<Float> {
        let chol = Cholesky::new(&self.hankel)?;
        let prec = self.h.prec();
        let u: Vec<Float> = (0..=self.m)
            .map(|i| Float::with_val(prec, if i % 2 == 0 { 1 } else { -1 }))
            .collect();
        let z = chol.solve(&u);
        let mut q = Float::new(prec);
        for (ui, zi) in u.iter().zip(&z) {
            q += Float::with_val(prec, ui * zi);
        }
        if !(q > 0) {
            return Err(Error::Precision {
                bits: prec,
                detail: "u^T H^-1 u is not positive".into(),
            });
        }
        Ok(q.recip())
    }
}

/// `E_{M,h} = f(0) - Σ c_{h,v}` by the chosen route.
pub fn emh(kernel: &PowerKernel, m: usize, h: &Float, route: EmhRoute, ctx: Precision) -> Result<Float> {
    match route {
        EmhRoute::Gauss => {
            let mds = remez_mds(kernel.ratio().to_f64());
            let sum = init_exchange(kernel, m, h, mds, ctx)?;
            Ok(kernel.f0(ctx) - sum.coefficient_sum(ctx))
        }
        EmhRoute::Det => HankelDiag::new(kernel, m, h, ctx)?.det_ratio(),
        EmhRoute::Inverse => HankelDiag::new(kernel, m, h, ctx)?.inverse_form(),
    }
}

/// Source of the working precision for [`remez`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitsPolicy {
    /// [`precision_policy`] for the kernel and `M`.
    Automatic,
    Fixed(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemezConfig {
    /// Tolerance on both stopping criteria of the exchange loop.
    pub eps_stop: f64,
    /// Full Newton steps on the `4M` equations after the loop.
    pub newton_polish_iters: usize,
    /// Initialization discretization size; [`remez_mds`] when `None`.
    pub mds: Option<usize>,
    pub bits: BitsPolicy,
    pub max_iters: usize,
}

impl Default for RemezConfig {
    fn default() -> Self {
        RemezConfig {
            eps_stop: 1e-10,
            newton_polish_iters: 5,
            mds: None,
            bits: BitsPolicy::Automatic,
            max_iters: 200,
        }
    }
}

impl RemezConfig {
    pub fn precision(&self, kernel: &PowerKernel, m: usize) -> Result<Precision> {
        match self.bits {
            BitsPolicy::Automatic => Precision::new(precision_policy(kernel, m)?),
            BitsPolicy::Fixed(bits) => Precision::new(bits),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_stop > 0.0) {
            return Err(Error::Argument(format!("eps_stop must be positive, got {}", self.eps_stop)));
        }
        if self.mds == Some(0) {
            return Err(Error::Argument("mds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RemezResult {
    pub expsum: ExpSum,
    /// `0 = x_0 < x_1 < ... < x_2M`.
    pub alternation_x: Vec<Float>,
    /// `|E_M(0)|`.
    pub level: Float,
    /// Exchange iterations performed.
    pub iterations: usize,
    /// `max|E(x_i)| / min|E(x_i)| - 1` right after each exchange step.
    pub spread_history: Vec<f64>,
    pub precision: Precision,
}

impl RemezResult {
    /// `E_M(x_i)` at the alternation points.
    pub fn alternation_errors(&self, kernel: &PowerKernel) -> Result<Vec<Float>> {
        let ctx = self.precision;
        self.alternation_x
            .iter()
            .map(|x| Ok(kernel.f(x, ctx)? - self.expsum.eval(x, ctx)))
            .collect()
    }

    /// `max|E(x_i)| / min|E(x_i)| - 1`.
    pub fn spread(&self, kernel: &PowerKernel) -> Result<Float> {
        let mags: Vec<Float> = self
            .alternation_errors(kernel)?
            .into_iter()
            .map(|e| e.abs())
            .collect();
        Ok(spread_of(&mags))
    }
}

fn spread_of(mags: &[Float]) -> Float {
    let max = mags.iter().max_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
    let min = mags.iter().min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
    Float::with_val(max.prec(), max / min) - 1u32
}

const PAIR_NEWTON_ITERS: usize = 40;
const MAX_STEP_HALVINGS: i32 = 12;
const MAX_SHORT_STEPS: usize = 3;
const MAX_MOVE_HALVINGS: i32 = 10;

/// Parameters and alternation points during the exchange.
struct Exchange<'a> {
    kernel: &'a PowerKernel,
    ctx: Precision,
    c: Vec<Float>,
    t: Vec<Float>,
    /// `x_0 = 0, ..., x_2M`.
    x: Vec<Float>,
}

impl Exchange<'_> {
    fn m(&self) -> usize {
        self.t.len()
    }

    fn decays(&self, t: &[Float], x: &Float) -> Vec<Float> {
        t.iter().map(|t| (-self.ctx.real(t * x)).exp()).collect()
    }

    /// `E^(n)(x)` for the parameters `(c, t)`.
    fn err_with(&self, n: u32, c: &[Float], t: &[Float], x: &Float) -> Result<Float> {
        let ctx = self.ctx;
        let mut sum = ctx.zero();
        for ((c, t), e) in c.iter().zip(t).zip(self.decays(t, x)) {
            let mut term = e * c;
            if n > 0 {
                term *= ctx.real(Pow::pow(t, n));
            }
            sum += term;
        }
        if n % 2 == 1 {
            sum = -sum;
        }
        Ok(self.kernel.f_derivative(n, x, ctx)? - sum)
    }

    fn err(&self, n: u32, x: &Float) -> Result<Float> {
        self.err_with(n, &self.c, &self.t, x)
    }

    /// The extremum of `E` near every `x_i`, `i >= 1`, and the spread of
    /// `|E|` over those points.
    fn exchange(&self) -> Result<(Vec<Float>, f64)> {
        let ctx = self.ctx;
        let n = 2 * self.m();
        let old = self.x.clone();
        let width = ctx.pow2(-16);
        let newton_tol = ctx.pow2(-(ctx.bits() as i32) / 2);
        let mut moved = old.clone();
        for i in 1..=n {
            let positive = self.err(0, &old[i])? > 0;
            let signed = |x: &Float| {
                let e = self.err(0, x)?;
                Ok(if positive { e } else { -e })
            };
            let lo = if i == 1 { ctx.real(&old[1] / 16u32) } else { old[i - 1].clone() };
            let hi = if i < n { old[i + 1].clone() } else { ctx.real(&old[n] * 4u32) };
            let (mut x, _) = golden_max_to(signed, &lo, &hi, &width, ctx)?;
            for _ in 0..30 {
                let d1 = self.err(1, &x)?;
                let d2 = self.err(2, &x)?;
                // Newton only where |E| is concave.
                if d2.is_zero() || (d2 > 0) == positive {
                    break;
                }
                let step = ctx.real(&d1 / &d2);
                let next = ctx.real(&x - &step);
                if !(next > lo && next < hi) {
                    break;
                }
                x = next;
                if ctx.real(step.abs_ref()) <= ctx.real(&x * &newton_tol) {
                    break;
                }
            }
            moved[i] = x;
        }
        if moved.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Structure("alternation points collided during the exchange".into()));
        }
        let mags = moved
            .iter()
            .map(|x| self.err(0, x).map(|e| e.abs()))
            .collect::<Result<Vec<_>>>()?;
        let spread = spread_of(&mags).to_f64();
        Ok((moved, spread))
    }

    /// Moves the points towards `target` and re-solves the pair equations,
    /// first with full Newton steps, then damped, halving the move while both fail.
    fn advance(&mut self, target: &[Float]) -> Result<()> {
        let ctx = self.ctx;
        let saved = (self.c.clone(), self.t.clone(), self.x.clone());
        let mut theta = ctx.one();
        loop {
            let x: Vec<Float> = saved
                .2
                .iter()
                .zip(target)
                .map(|(old, new)| ctx.real(old + ctx.real(ctx.real(new - old) * &theta)))
                .collect();
            let mut last = None;
            for damped in [false, true] {
                (self.c, self.t) = (saved.0.clone(), saved.1.clone());
                self.x = x.clone();
                match self.solve_pairs(damped).and_then(|_| self.criteria().map(|_| ())) {
                    Ok(()) => return Ok(()),
                    Err(err @ (Error::Convergence { .. } | Error::Structure(_))) => last = Some(err),
                    Err(err) => return Err(err),
                }
            }
            (self.c, self.t, self.x) = saved.clone();
            theta /= 2u32;
            if theta < ctx.pow2(-MAX_MOVE_HALVINGS) {
                return Err(last.expect("at least one attempt"));
            }
        }
    }

    /// `E(x_(i-1)) + E(x_i)`, `i = 1..2M`, with `f(x_i)` given.
    fn pair_residual(&self, fx: &[Float], c: &[Float], t: &[Float]) -> Vec<Float> {
        let ctx = self.ctx;
        let errs: Vec<Float> = self
            .x
            .iter()
            .zip(fx)
            .map(|(x, f)| {
                let mut e = f.clone();
                for (c, d) in c.iter().zip(self.decays(t, x)) {
                    e -= d * c;
                }
                e
            })
            .collect();
        errs.windows(2).map(|w| ctx.real(&w[0] + &w[1])).collect()
    }

    /// Newton on the `2M` pair equations in `(c, t)` with `x` fixed. Steps are
    /// shortened to keep `c, t > 0`, and with `damped` also until the residual drops.
    fn solve_pairs(&mut self, damped: bool) -> Result<()> {
        let ctx = self.ctx;
        let m = self.m();
        let n = 2 * m;
        let fx = self
            .x
            .iter()
            .map(|x| self.kernel.f(x, ctx))
            .collect::<Result<Vec<_>>>()?;
        let scale = ctx.real(self.err(0, &ctx.zero())?.abs());
        let target = ctx.real(&scale * ctx.pow2(-(ctx.bits() as i32) * 3 / 4));
        let mut res = self.pair_residual(&fx, &self.c, &self.t);
        let mut norm = max_abs(&res, ctx);
        let loose = ctx.real(&scale * ctx.pow2(-(ctx.bits() as i32) / 2));
        let mut short_steps = 0;
        for _ in 0..PAIR_NEWTON_ITERS {
            if norm <= target {
                return Ok(());
            }
            let jac = Matrix::from_fn(n, |row, col| {
                let (xa, xb) = (&self.x[row], &self.x[row + 1]);
                let v = col % m;
                let ea = (-ctx.real(&self.t[v] * xa)).exp();
                let eb = (-ctx.real(&self.t[v] * xb)).exp();
                if col < m {
                    -(ea + eb)
                } else {
                    (ctx.real(xa * ea) + ctx.real(xb * eb)) * &self.c[v]
                }
            });
            let delta = lu_solve(&jac, &res)?;
            let mut lambda = ctx.one();
            loop {
                let c: Vec<Float> = (0..m).map(|v| ctx.real(&self.c[v] - ctx.real(&delta[v] * &lambda))).collect();
                let t: Vec<Float> = (0..m)
                    .map(|v| ctx.real(&self.t[v] - ctx.real(&delta[m + v] * &lambda)))
                    .collect();
                if c.iter().chain(&t).all(|v| *v > 0) {
                    let trial = self.pair_residual(&fx, &c, &t);
                    let trial_norm = max_abs(&trial, ctx);
                    if !damped || trial_norm < norm {
                        self.c = c;
                        self.t = t;
                        res = trial;
                        norm = trial_norm;
                        break;
                    }
                }
                lambda /= 2u32;
                if lambda < ctx.pow2(-MAX_STEP_HALVINGS) {
                    // No further decrease: accept if already far below the stopping level.
                    if norm <= loose {
                        return Ok(());
                    }
                    return Err(stalled(&norm));
                }
            }
            // Repeated heavy damping means the solution is out of reach.
            if damped && lambda < 0.125 && norm > loose {
                short_steps += 1;
                if short_steps == MAX_SHORT_STEPS {
                    return Err(stalled(&norm));
                }
            } else {
                short_steps = 0;
            }
        }
        if norm <= loose {
            Ok(())
        } else {
            Err(stalled(&norm))
        }
    }

    /// Largest `|(E(x_(i-1)) + E(x_i)) / E(x_i)|` and `|x_i E'(x_i) / E(x_i)|`;
    /// errors if the signs of `E(x_i)` stop alternating.
    fn criteria(&self) -> Result<(Float, Float)> {
        let ctx = self.ctx;
        let errs = self.x.iter().map(|x| self.err(0, x)).collect::<Result<Vec<_>>>()?;
        let mut eq = ctx.zero();
        let mut st = ctx.zero();
        for i in 1..errs.len() {
            if (errs[i] > 0) == (errs[i - 1] > 0) || errs[i].is_zero() {
                return Err(Error::Structure(format!("E(x_i) lost its sign alternation at i = {i}")));
            }
            let pair = ctx.real(ctx.real(&errs[i - 1] + &errs[i]) / &errs[i]).abs();
            let slope = ctx.real(self.err(1, &self.x[i])? * &self.x[i] / &errs[i]).abs();
            eq = eq.max(&pair);
            st = st.max(&slope);
        }
        Ok((eq, st))
    }

    /// One Newton step on all `4M` equations in `(c, t, x_1..x_2M)`.
    /// Returns false, leaving the state untouched, if it does not help.
    fn polish_step(&mut self) -> Result<bool> {
        let ctx = self.ctx;
        let m = self.m();
        let n = 2 * m;
        let before = self.criteria()?;
        let before = before.0.max(&before.1);
        let mut e0 = Vec::with_capacity(n + 1);
        let mut e1 = Vec::with_capacity(n + 1);
        let mut e2 = Vec::with_capacity(n + 1);
        for x in &self.x {
            e0.push(self.err(0, x)?);
            e1.push(self.err(1, x)?);
            e2.push(self.err(2, x)?);
        }
        let dim = 4 * m;
        let mut jac = Matrix::zeros(dim, ctx.bits());
        let mut rhs = Vec::with_capacity(dim);
        for i in 1..=n {
            // E'(x_i) = 0
            let row = i - 1;
            let x = &self.x[i];
            for v in 0..m {
                let e = (-ctx.real(&self.t[v] * x)).exp();
                *jac.get_mut(row, v) = ctx.real(&self.t[v] * &e);
                let tx = ctx.real(&self.t[v] * x);
                *jac.get_mut(row, m + v) = ctx.real(1 - tx) * e * &self.c[v];
            }
            *jac.get_mut(row, n + i - 1) = e2[i].clone();
            rhs.push(e1[i].clone());
        }
        for i in 1..=n {
            // E(x_(i-1)) + E(x_i) = 0
            let row = n + i - 1;
            for v in 0..m {
                let ea = (-ctx.real(&self.t[v] * &self.x[i - 1])).exp();
                let eb = (-ctx.real(&self.t[v] * &self.x[i])).exp();
                let xe = ctx.real(&self.x[i - 1] * &ea) + ctx.real(&self.x[i] * &eb);
                *jac.get_mut(row, v) = -(ea + eb);
                *jac.get_mut(row, m + v) = xe * &self.c[v];
            }
            if i > 1 {
                *jac.get_mut(row, n + i - 2) = e1[i - 1].clone();
            }
            *jac.get_mut(row, n + i - 1) = e1[i].clone();
            rhs.push(ctx.real(&e0[i - 1] + &e0[i]));
        }
        let delta = lu_solve(&jac, &rhs)?;
        let saved = (self.c.clone(), self.t.clone(), self.x.clone());
        for v in 0..m {
            self.c[v] -= &delta[v];
            self.t[v] -= &delta[m + v];
        }
        for i in 1..=n {
            self.x[i] -= &delta[n + i - 1];
        }
        let valid = self.c.iter().chain(&self.t).all(|v| *v > 0) && self.x.windows(2).all(|w| w[0] < w[1]);
        let improved = valid
            && match self.criteria() {
                Ok((eq, st)) => eq.max(&st) <= before,
                Err(_) => false,
            };
        if !improved {
            (self.c, self.t, self.x) = saved;
        }
        Ok(improved)
    }
}

fn stalled(norm: &Float) -> Error {
    Error::Convergence {
        routine: "remez pair equations",
        iterations: PAIR_NEWTON_ITERS,
        detail: format!("residual stalled at {:e}", norm.to_f64()),
    }
}

fn max_abs(v: &[Float], ctx: Precision) -> Float {
    v.iter().fold(ctx.zero(), |acc, x| acc.max(&ctx.real(x.abs_ref())))
}

/// Best `M`-term exponential sum for `kernel` by the Remez exchange,
/// started from [`init_exchange`] at `h = h_(a/b) / b`, `x_i = ih`.
///
/// A lost sign pattern restarts the run with twice the discretization size,
/// at most twice.
pub fn remez(kernel: &PowerKernel, m: usize, cfg: &RemezConfig) -> Result<RemezResult> {
    cfg.validate()?;
    if m == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    let ctx = cfg.precision(kernel, m)?;
    let mut mds = cfg.mds.unwrap_or_else(|| remez_mds(kernel.ratio().to_f64()));
    let mut last = None;
    for _ in 0..3 {
        match remez_from(kernel, m, cfg, mds, ctx) {
            Ok(result) => return Ok(result),
            Err(err @ Error::Structure(_)) => last = Some(err),
            Err(err) => return Err(err),
        }
        mds *= 2;
    }
    Err(last.unwrap())
}

fn remez_from(kernel: &PowerKernel, m: usize, cfg: &RemezConfig, mds: usize, ctx: Precision) -> Result<RemezResult> {
    let h = solve_hr(&kernel.ratio(), ctx)? / kernel.b();
    let init = init_exchange(kernel, m, &h, mds, ctx)?;
    let mut state = Exchange {
        kernel,
        ctx,
        c: init.coefficients,
        t: init.exponents,
        x: (0..=2 * m).map(|i| ctx.real(&h * i as u32)).collect(),
    };
    let eps = ctx.real(cfg.eps_stop);
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        if iterations == cfg.max_iters {
            let (eq, st) = state.criteria()?;
            return Err(Error::Convergence {
                routine: "remez",
                iterations,
                detail: format!(
                    "stopping criteria at {:e} and {:e} after {} exchanges",
                    eq.to_f64(),
                    st.to_f64(),
                    iterations
                ),
            });
        }
        iterations += 1;
        let (target, spread) = state.exchange()?;
        history.push(spread);
        state.advance(&target)?;
        let (eq, st) = state.criteria()?;
        if eq <= eps && st <= eps {
            break;
        }
    }
    for _ in 0..cfg.newton_polish_iters {
        if !state.polish_step()? {
            break;
        }
    }
    state.criteria()?;
    let level = state.err(0, &ctx.zero())?.abs();
    let mut pairs: Vec<(Float, Float)> = state.t.into_iter().zip(state.c).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (exponents, coefficients) = pairs.into_iter().unzip();
    Ok(RemezResult {
        expsum: ExpSum::new(exponents, coefficients)?,
        alternation_x: state.x,
        level,
        iterations,
        spread_history: history,
        precision: ctx,
    })
}
