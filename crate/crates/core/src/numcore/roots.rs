use rug::Float;

use super::precision::Precision;
use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Safeguarded Newton iteration.
///
/// Stops when a step is below `tol * max(1, |x|)` or `f` vanishes exactly.
/// With a bracket `[lo, hi]` on which `f` changes sign, any step that would
/// leave the bracket is replaced by bisection, so convergence is guaranteed.
///
/// ```
/// use expsumkit::numcore::{newton_root, Precision};
/// use rug::Float;
///
/// let ctx = Precision::new(128).unwrap();
/// let root = newton_root(
///     |x| Float::with_val(128, x.square_ref()) - 2u32,
///     |x| Float::with_val(128, x * 2u32),
///     &ctx.one(),
///     None,
///     &ctx.tol(),
///     ctx,
/// )
/// .unwrap();
/// assert!((root - ctx.real(2).sqrt()).abs() < ctx.pow2(-110));
/// ```
pub fn newton_root<F, D>(
    f: F,
    df: D,
    x0: &Float,
    bracket: Option<(&Float, &Float)>,
    tol: &Float,
    ctx: Precision,
) -> Result<Float>
where
    F: Fn(&Float) -> Float,
    D: Fn(&Float) -> Float,
{
    let mut bounds = match bracket {
        Some((lo, hi)) => {
            let (lo, hi) = (ctx.real(lo), ctx.real(hi));
            let (flo, fhi) = (f(&lo), f(&hi));
            if flo.is_zero() {
                return Ok(lo);
            }
            if fhi.is_zero() {
                return Ok(hi);
            }
            if flo.is_sign_negative() == fhi.is_sign_negative() {
                return Err(Error::Argument(format!(
                    "bracket [{}, {}] does not enclose a sign change",
                    lo.to_f64(),
                    hi.to_f64()
                )));
            }
            Some((lo, hi, flo.is_sign_negative()))
        }
        None => None,
    };

    let mut x = ctx.real(x0);
    if let Some((lo, hi, _)) = &bounds {
        if x < *lo || x > *hi {
            x = ctx.real(lo + hi) / 2u32;
        }
    }
    let mut last_step = ctx.zero();
    for _ in 0..MAX_ITER {
        let fx = f(&x);
        if fx.is_zero() {
            return Ok(x);
        }
        if let Some((lo, hi, lo_negative)) = &mut bounds {
            if fx.is_sign_negative() == *lo_negative {
                *lo = x.clone();
            } else {
                *hi = x.clone();
            }
        }
        let dfx = df(&x);
        let mut next = if dfx.is_zero() || !dfx.is_finite() {
            None
        } else {
            Some(ctx.real(&x - ctx.real(&fx / &dfx)))
        };
        if let Some((lo, hi, _)) = &bounds {
            let inside = next
                .as_ref()
                .map(|n| n.is_finite() && *n >= *lo && *n <= *hi)
                .unwrap_or(false);
            if !inside {
                next = Some(ctx.real(&*lo + &*hi) / 2u32);
            }
        }
        let Some(next) = next else {
            return Err(Error::Convergence {
                routine: "newton_root",
                iterations: 0,
                detail: format!("zero derivative at x = {}", x.to_f64()),
            });
        };
        let step = ctx.real(&next - &x).abs();
        let scale = ctx.real(x.abs_ref()).max(&ctx.one());
        x = next;
        if step <= ctx.real(tol * &scale) {
            return Ok(x);
        }
        if let Some((lo, hi, _)) = &bounds {
            let width = ctx.real(&*hi - &*lo);
            if width <= ctx.real(tol * &scale) {
                return Ok(x);
            }
        }
        last_step = step;
    }
    Err(Error::Convergence {
        routine: "newton_root",
        iterations: MAX_ITER,
        detail: format!("last step {:.3e}", last_step.to_f64()),
    })
}

/// Principal branch of the Lambert function at `1/e`, the root of
/// `w e^w = e^-1`.
pub fn lambert_w0_inv_e(ctx: Precision) -> Result<Float> {
    let work = ctx.widened(8);
    let target = (-work.one()).exp();
    let w = newton_root(
        |w| work.real(w.exp_ref()) * w - &target,
        |w| work.real(w.exp_ref()) * (work.one() + w),
        &work.ratio(1, 4),
        Some((&work.zero(), &work.one())),
        &work.eps(),
        work,
    )?;
    Ok(ctx.real(w))
}
