//! Exponential sum approximation of finite completely monotonic functions.
//!
//! A function `f(x) = ∫_a^b e^(-xt) dW(t)` with `0 < a < b` is approximated
//! by `sum c_v e^(-t_v x)` in two ways:
//!
//! * Gaussian quadrature applied after a variable transformation of `[a, b]`
//!   ([`expsum::gauss_expsum`]). The elliptic transformation
//!   [`phi::PhiSeries`] gives the fastest geometric decay of the error.
//! * A Remez exchange for the best uniform approximation on `[0, ∞)`
//!   ([`remez::remez`]), started from a quadrature rule for a related measure.
//!
//! All arithmetic runs at a caller-chosen binary precision through
//! [`numcore::Precision`].
//!
//! ```
//! use expsumkit::prelude::*;
//!
//! let ctx = Precision::new(128).unwrap();
//! let kernel = PowerKernel::new(ctx.one(), ctx.ratio(1, 2), ctx.one()).unwrap();
//! let psi = Transform::new(TransformKind::Phi, &kernel.ratio(), ctx).unwrap();
//! let sum = gauss_expsum(&kernel, &psi, 4, 96, ctx).unwrap();
//! let (_, err) = max_error_scan(&sum, &kernel, ctx).unwrap();
//! assert!(err < stenger_bound(&kernel, &psi, 4, ctx));
//! ```

pub mod basis;
pub mod error;
pub mod expsum;
pub mod kernel;
pub mod numcore;
pub mod phi;
pub mod quadrature;
pub mod remez;
pub mod transform;

pub use error::{Error, Result};

/// The types and entry points most programs need.
pub mod prelude {
    pub use crate::basis::{BasisEvaluator, basis_points};
    pub use crate::error::{Error, Result};
    pub use crate::expsum::{
        epsilon_coeffs, eval_error, gauss_expsum, max_error_scan, stenger_bound, ExpSum,
    };
    pub use crate::kernel::PowerKernel;
    pub use crate::numcore::{EllipticBundle, Precision};
    pub use crate::phi::PhiSeries;
    pub use crate::quadrature::{gauss_legendre, QuadratureRule};
    pub use crate::remez::{remez, solve_hr, RemezConfig, RemezResult};
    pub use crate::transform::{Transform, TransformKind};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/elliptic.md")]
    mod elliptic {}
    #[doc = include_str!("../../../book/src/quadrature.md")]
    mod quadrature {}
    #[doc = include_str!("../../../book/src/basis.md")]
    mod basis {}
    #[doc = include_str!("../../../book/src/remez.md")]
    mod remez {}
}
