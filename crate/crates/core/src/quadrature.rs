//! Gaussian quadrature for discrete positive measures.
//!
//! The recurrence coefficients of a measure come from the discretized
//! Stieltjes procedure; nodes and Christoffel numbers from the Golub–Welsch
//! eigenproblem of the Jacobi matrix, solved by implicit-shift QL.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::kernel::PowerKernel;
use crate::numcore::Precision;
use crate::transform::Transform;

/// Finitely many points with positive masses, nodes strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

impl DiscreteMeasure {
    pub fn new(nodes: Vec<Float>, weights: Vec<Float>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Argument(format!(
                "measure needs matching non-empty node and weight lists, got {} and {}",
                nodes.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0)) {
            return Err(Error::Argument(format!("weight {i} is not positive")));
        }
        if let Some(i) = nodes.windows(2).position(|p| !(p[0] < p[1])) {
            return Err(Error::Argument(format!("nodes {i} and {} are not increasing", i + 1)));
        }
        Ok(DiscreteMeasure { nodes, weights })
    }

    pub fn nodes(&self) -> &[Float] {
        &self.nodes
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mass(&self) -> Float {
        let prec = self.weights[0].prec();
        self.weights.iter().fold(Float::new(prec), |acc, w| acc + w)
    }

    /// `∫ g dμ`.
    pub fn integrate(&self, mut g: impl FnMut(&Float) -> Float) -> Float {
        let prec = self.weights[0].prec();
        let mut acc = Float::new(prec);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += g(x) * w;
        }
        acc
    }
}

/// Three-term recurrence `p_{j+1} = (x - α_j) p_j - β_j p_{j-1}` of the monic
/// orthogonal polynomials; `β_0` is the total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceCoeffs {
    pub alpha: Vec<Float>,
    pub beta: Vec<Float>,
}

impl RecurrenceCoeffs {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Nodes in increasing order with positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Float>,
    pub weights: Vec<Float>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_v g(u_v)`.
    pub fn apply(&self, mut g: impl FnMut(&Float) -> Float) -> Float {
        let prec = self.weights[0].prec();
        let mut acc = Float::new(prec);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += g(x) * w;
        }
        acc
    }

    /// The rule mapped affinely from `[-1, 1]` onto `[lo, hi]`.
    pub fn mapped(&self, lo: &Float, hi: &Float) -> QuadratureRule {
        let prec = lo.prec().max(hi.prec());
        let half = Float::with_val(prec, hi - lo) / 2u32;
        let mid = Float::with_val(prec, hi + lo) / 2u32;
        QuadratureRule {
            nodes: self
                .nodes
                .iter()
                .map(|u| Float::with_val(prec, &half * u) + &mid)
                .collect(),
            weights: self
                .weights
                .iter()
                .map(|w| Float::with_val(prec, &half * w))
                .collect(),
        }
    }
}

/// Discretized Stieltjes procedure for the first `m` recurrence coefficients.
pub fn stieltjes_coeffs(measure: &DiscreteMeasure, m: usize) -> Result<RecurrenceCoeffs> {
    if m == 0 {
        return Err(Error::Argument("at least one coefficient is required".into()));
    }
    if measure.len() < m {
        return Err(Error::Rank {
            support: measure.len(),
            required: m,
        });
    }
    let prec = measure.weights[0].prec();
    let n = measure.len();
    let x = &measure.nodes;
    let w = &measure.weights;
    let mut p_prev = vec![Float::new(prec); n];
    let mut p = vec![Float::with_val(prec, 1); n];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut norm_prev = Float::with_val(prec, 1);

    for j in 0..m {
        let mut norm = Float::new(prec);
        let mut first = Float::new(prec);
        for i in 0..n {
            let wp2 = Float::with_val(prec, p[i].square_ref()) * &w[i];
            first += Float::with_val(prec, &wp2 * &x[i]);
            norm += wp2;
        }
        if !(norm > 0) {
            return Err(Error::Precision {
                bits: prec,
                detail: format!("orthogonal polynomial {j} has vanishing norm"),
            });
        }
        let a = Float::with_val(prec, &first / &norm);
        let b = if j == 0 {
            norm.clone()
        } else {
            Float::with_val(prec, &norm / &norm_prev)
        };
        if !(b > 0) {
            return Err(Error::Precision {
                bits: prec,
                detail: format!("recurrence coefficient beta_{j} is not positive"),
            });
        }
        if j + 1 < m {
            for i in 0..n {
                let next = Float::with_val(prec, &x[i] - &a) * &p[i];
                let next = if j == 0 {
                    next
                } else {
                    next - Float::with_val(prec, &b * &p_prev[i])
                };
                p_prev[i] = std::mem::replace(&mut p[i], next);
            }
        }
        alpha.push(a);
        beta.push(b);
        norm_prev = norm;
    }
    Ok(RecurrenceCoeffs { alpha, beta })
}

const QL_MAX_SWEEPS: usize = 60;

/// Gaussian rule with `m` nodes from the Jacobi matrix of `coeffs`.
pub fn golub_welsch(coeffs: &RecurrenceCoeffs, m: usize, ctx: Precision) -> Result<QuadratureRule> {
    if m == 0 || m > coeffs.len() {
        return Err(Error::Rank {
            support: coeffs.len(),
            required: m.max(1),
        });
    }
    let p = ctx.bits();
    let mut d: Vec<Float> = coeffs.alpha[..m].iter().map(|a| ctx.real(a)).collect();
    let mut e: Vec<Float> = (1..m)
        .map(|j| ctx.real(coeffs.beta[j].sqrt_ref()))
        .chain(std::iter::once(ctx.zero()))
        .collect();
    // First row of the accumulated eigenvector matrix.
    let mut z: Vec<Float> = (0..m).map(|i| if i == 0 { ctx.one() } else { ctx.zero() }).collect();
    let eps = ctx.eps();

    for l in 0..m {
        let mut sweeps = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = Float::with_val(p, d[mm].abs_ref()) + Float::with_val(p, d[mm + 1].abs_ref());
                if Float::with_val(p, e[mm].abs_ref()) <= Float::with_val(p, &dd * &eps) {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::Convergence {
                    routine: "golub_welsch",
                    iterations: sweeps,
                    detail: format!("eigenvalue {l} of {m} did not separate"),
                });
            }
            let mut g = Float::with_val(p, &d[l + 1] - &d[l]) / Float::with_val(p, &e[l] * 2u32);
            let mut r = Float::with_val(p, g.hypot_ref(&ctx.one()));
            let shift = if g.is_sign_negative() { -r.clone() } else { r.clone() };
            g = Float::with_val(p, &d[mm] - &d[l]) + Float::with_val(p, &e[l] / (g + shift));
            let (mut s, mut c) = (ctx.one(), ctx.one());
            let mut pp = ctx.zero();
            let mut deflated = false;
            let mut i = mm;
            while i > l {
                i -= 1;
                let f = Float::with_val(p, &s * &e[i]);
                let b = Float::with_val(p, &c * &e[i]);
                r = Float::with_val(p, f.hypot_ref(&g));
                e[i + 1] = r.clone();
                if r.is_zero() {
                    d[i + 1] -= &pp;
                    e[mm] = ctx.zero();
                    deflated = true;
                    break;
                }
                s = Float::with_val(p, &f / &r);
                c = Float::with_val(p, &g / &r);
                g = Float::with_val(p, &d[i + 1] - &pp);
                r = Float::with_val(p, &d[i] - &g) * &s + Float::with_val(p, &c * &b) * 2u32;
                pp = Float::with_val(p, &s * &r);
                d[i + 1] = Float::with_val(p, &g + &pp);
                g = Float::with_val(p, &c * &r) - &b;
                let zf = z[i + 1].clone();
                z[i + 1] = Float::with_val(p, &s * &z[i]) + Float::with_val(p, &c * &zf);
                z[i] = Float::with_val(p, &c * &z[i]) - Float::with_val(p, &s * &zf);
            }
            if deflated {
                continue;
            }
            d[l] -= &pp;
            e[l] = g;
            e[mm] = ctx.zero();
        }
    }

    let beta0 = ctx.real(&coeffs.beta[0]);
    let mut pairs: Vec<(Float, Float)> = d
        .into_iter()
        .zip(z)
        .map(|(x, v)| (x, v.square() * &beta0))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadratureRule { nodes, weights })
}

fn legendre_cache() -> &'static Mutex<HashMap<(usize, u32), Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u32), Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Guard bits used while building Gauss–Legendre rules; small end weights
/// lose relative accuracy in the eigenvector components.
const LEGENDRE_GUARD: u32 = 32;

/// Largest size built through the Jacobi eigenproblem; larger rules use
/// Newton's method on the Legendre recurrence.
const LEGENDRE_EIGEN_MAX: usize = 128;

/// `m`-point Gauss–Legendre rule on `[-1, 1]`, cached per `(m, bits)`.
pub fn gauss_legendre(m: usize, ctx: Precision) -> Result<Arc<QuadratureRule>> {
    if m == 0 {
        return Err(Error::Argument("Gauss–Legendre needs at least one node".into()));
    }
    let key = (m, ctx.bits());
    {
        let mut cache = legendre_cache().lock().unwrap();
        if let Some(rule) = cache.get(&key) {
            return Ok(rule.clone());
        }
        // A rule already built at higher precision only needs rounding.
        let wider = cache
            .iter()
            .filter(|(&(mm, bits), _)| mm == m && bits > ctx.bits())
            .min_by_key(|(&(_, bits), _)| bits)
            .map(|(_, rule)| rule.clone());
        if let Some(rule) = wider {
            let rounded = Arc::new(QuadratureRule {
                nodes: rule.nodes.iter().map(|x| ctx.real(x)).collect(),
                weights: rule.weights.iter().map(|w| ctx.real(w)).collect(),
            });
            cache.insert(key, rounded.clone());
            return Ok(rounded);
        }
    }
    let (mut nodes, mut weights) = if m <= LEGENDRE_EIGEN_MAX {
        legendre_by_eigen(m, ctx)?
    } else {
        legendre_by_newton(m, ctx)
    };
    // Enforce the exact symmetry of the rule.
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let x = (ctx.real(&nodes[j]) - &nodes[i]) / 2u32;
        let w = (ctx.real(&weights[i]) + &weights[j]) / 2u32;
        nodes[i] = -x.clone();
        nodes[j] = x;
        weights[i] = w.clone();
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = ctx.zero();
    }
    let rule = Arc::new(QuadratureRule { nodes, weights });
    legendre_cache()
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| rule.clone());
    Ok(rule)
}

fn legendre_by_eigen(m: usize, ctx: Precision) -> Result<(Vec<Float>, Vec<Float>)> {
    let work = ctx.widened(LEGENDRE_GUARD);
    let alpha = vec![work.zero(); m];
    let beta = (0..m)
        .map(|j| {
            if j == 0 {
                work.real(2)
            } else {
                let j2 = (j * j) as u64;
                work.real(j2) / (4 * j2 - 1)
            }
        })
        .collect();
    let wide = golub_welsch(&RecurrenceCoeffs { alpha, beta }, m, work)?;
    Ok((
        wide.nodes.iter().map(|x| ctx.real(x)).collect(),
        wide.weights.iter().map(|w| ctx.real(w)).collect(),
    ))
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre_pair(m: usize, x: &Float, prec: u32) -> (Float, Float) {
    let mut p0 = Float::with_val(prec, 1);
    let mut p1 = Float::with_val(prec, x);
    let mut t = Float::new(prec);
    for k in 2..=m {
        // k P_k = (2k-1) x P_{k-1} - (k-1) P_{k-2}
        t.assign(x * &p1);
        t *= (2 * k - 1) as u32;
        p0 *= (k - 1) as u32;
        t -= &p0;
        t /= k as u32;
        std::mem::swap(&mut p0, &mut p1);
        std::mem::swap(&mut p1, &mut t);
    }
    // (1 - x²) P_m' = m (P_{m-1} - x P_m)
    t.assign(x * &p1);
    p0 -= &t;
    p0 *= m as u32;
    t.assign(x.square_ref());
    let one_minus = 1u32 - t;
    (p1, p0 / one_minus)
}

fn legendre_pair_f64(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let kf = k as f64;
        let t = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = t;
    }
    (p1, m as f64 * (p0 - x * p1) / (1.0 - x * x))
}

fn legendre_by_newton(m: usize, ctx: Precision) -> (Vec<Float>, Vec<Float>) {
    let target = ctx.bits() + LEGENDRE_GUARD;
    let half = m.div_ceil(2);
    let mut upper: Vec<(Float, Float)> = (0..half)
        .into_par_iter()
        .map(|i| {
            // Tricomi's approximation to the (i+1)-th largest zero.
            let mf = m as f64;
            let theta = std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * mf + 2.0);
            let mut x = (1.0 - (mf - 1.0) / (8.0 * mf * mf * mf)) * theta.cos();
            for _ in 0..8 {
                let (p, d) = legendre_pair_f64(m, x);
                x -= p / d;
            }
            let mut xf = Float::with_val(64, x);
            let mut prec = 50;
            loop {
                prec = (2 * prec).min(target);
                xf.set_prec(prec);
                let (p, d) = legendre_pair(m, &xf, prec);
                let step = Float::with_val(prec, &p / &d);
                if prec < target {
                    xf -= step;
                    continue;
                }
                // Carry P_m' across the last step with
                // (1 - x²) P_m'' = 2x P_m' - m(m+1) P_m.
                let one_minus = Float::with_val(prec, 1) - Float::with_val(prec, xf.square_ref());
                let dd = (Float::with_val(prec, &xf * &d) * 2u32
                    - p * (m * (m + 1)) as u64)
                    / &one_minus;
                xf -= &step;
                let d_new = d - dd * step;
                let one_minus = Float::with_val(prec, 1) - Float::with_val(prec, xf.square_ref());
                let w = Float::with_val(prec, 2) / (one_minus * d_new.square());
                break (ctx.real(&xf), ctx.real(&w));
            }
        })
        .collect();
    upper.reverse();
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for (x, w) in upper[m % 2..].iter().rev() {
        nodes.push(-x.clone());
        weights.push(w.clone());
    }
    for (x, w) in upper {
        nodes.push(x);
        weights.push(w);
    }
    (nodes, weights)
}

/// `m`-point Gauss–Chebyshev rule for `du / (π sqrt(1 - u²))`: nodes
/// `cos((2v-1)π/(2m))` in increasing order, weights `1/m`.
pub fn gauss_chebyshev(m: usize, ctx: Precision) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::Argument("Gauss–Chebyshev needs at least one node".into()));
    }
    let pi = ctx.pi();
    let nodes = (1..=m)
        .rev()
        .map(|v| {
            if 2 * v - 1 == m {
                return ctx.zero();
            }
            let theta = ctx.real(&pi * (2 * v - 1) as u64) / (2 * m) as u64;
            theta.cos()
        })
        .collect();
    let weights = vec![ctx.one() / m as u64; m];
    Ok(QuadratureRule { nodes, weights })
}

/// The measure `dW(b ψ(u))` on `[-1, 1]` discretized by `mds`-point
/// Gauss–Legendre: weights `c_GL b ψ'(u) W'(b ψ(u))`.
pub fn transformed_measure(
    kernel: &PowerKernel,
    transform: &Transform,
    mds: usize,
    ctx: Precision,
) -> Result<DiscreteMeasure> {
    let gl = gauss_legendre(mds, ctx)?;
    let b = kernel.b();
    let mut weights = Vec::with_capacity(mds);
    for (u, c) in gl.nodes.iter().zip(&gl.weights) {
        let t = ctx.real(b * transform.eval(u)?);
        let w = kernel.density_unchecked(&t, ctx) * transform.deriv(u)? * b * c;
        weights.push(w);
    }
    DiscreteMeasure::new(gl.nodes.clone(), weights)
}

/// Largest relative difference between corresponding nodes and weights.
///
/// A zero reference entry with a nonzero counterpart gives `+∞`.
pub fn mre(coarse: &QuadratureRule, fine: &QuadratureRule) -> Result<Float> {
    if coarse.len() != fine.len() {
        return Err(Error::Argument(format!(
            "rules have {} and {} nodes",
            coarse.len(),
            fine.len()
        )));
    }
    let prec = fine.nodes.first().map(|x| x.prec()).unwrap_or(64);
    let mut worst = Float::new(prec);
    let pairs = coarse
        .nodes
        .iter()
        .zip(&fine.nodes)
        .chain(coarse.weights.iter().zip(&fine.weights));
    for (x, y) in pairs {
        let diff = Float::with_val(prec, x - y).abs();
        let rel = if y.is_zero() {
            if diff.is_zero() {
                diff
            } else {
                Float::with_val(prec, rug::float::Special::Infinity)
            }
        } else {
            diff / Float::with_val(prec, y.abs_ref())
        };
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
