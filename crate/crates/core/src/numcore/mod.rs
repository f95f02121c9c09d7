//! Extended-precision context, elliptic constants and small numerical kernels
//! shared by the rest of the crate.

pub mod agm;
pub mod chebyshev;
pub mod linalg;
pub mod precision;
pub mod roots;

pub use agm::{agm, nome_product, AgmRun, EllipticBundle};
pub use precision::{rel_diff, Precision};
pub use roots::{lambert_w0_inv_e, newton_root};
