//! Shared numerical kernel: bracketed roots, Gauss–Legendre quadrature and
//! the normal distribution.

pub mod quad;
pub mod root;
pub mod special;

pub use quad::{Integrator, QuadratureRule};
pub use root::{expand_bracket, find_root, Bracket};
pub use special::{erfc, norm_cdf, norm_pdf};
