//! Clenshaw summation for Chebyshev series of the first and third kind.

use rug::Float;

/// `sum_{n} c[n] p_n(x)` for polynomials obeying `p_{n+1} = 2x p_n - p_{n-1}`
/// with `p_0 = 1` and the given `p_1`.
fn clenshaw(coeffs: &[Float], x: &Float, p1: &Float) -> Float {
    let prec = x.prec();
    let two_x = Float::with_val(prec, x * 2u32);
    let mut b1 = Float::new(prec);
    let mut b2 = Float::new(prec);
    for c in coeffs.iter().skip(1).rev() {
        let b0 = Float::with_val(prec, &two_x * &b1) - &b2 + c;
        b2 = std::mem::replace(&mut b1, b0);
    }
    let c0 = coeffs.first().map(|c| Float::with_val(prec, c)).unwrap_or_else(|| Float::new(prec));
    c0 + b1 * p1 - b2
}

/// `sum c[n] T_n(x)`.
pub fn clenshaw_t(coeffs: &[Float], x: &Float) -> Float {
    clenshaw(coeffs, x, x)
}

/// `sum c[n] V_n(x)` with `V_0 = 1`, `V_1 = 2x - 1`.
pub fn clenshaw_v(coeffs: &[Float], x: &Float) -> Float {
    let p1 = Float::with_val(x.prec(), x * 2u32) - 1u32;
    clenshaw(coeffs, x, &p1)
}

/// `T_n(x)` by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: &Float) -> Float {
    let prec = x.prec();
    let (mut prev, mut cur) = (Float::with_val(prec, 1), Float::with_val(prec, x));
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = Float::with_val(prec, x * &cur) * 2u32 - &prev;
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// `T_0(x), ..., T_{n-1}(x)`.
pub fn chebyshev_t_all(n: usize, x: &Float) -> Vec<Float> {
    let prec = x.prec();
    let mut out: Vec<Float> = Vec::with_capacity(n);
    for j in 0..n {
        let v = match j {
            0 => Float::with_val(prec, 1),
            1 => Float::with_val(prec, x),
            _ => Float::with_val(prec, x * &out[j - 1]) * 2u32 - &out[j - 2],
        };
        out.push(v);
    }
    out
}
