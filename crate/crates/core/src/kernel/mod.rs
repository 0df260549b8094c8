//! Log-density kernels, constraining transforms, and the reverse-mode tape
//! that differentiates them.

pub mod density;
mod real;
mod tape;
pub mod transforms;

pub use density::checked;
pub use real::{sum, Real};
pub use tape::{gradient, tape_len, Var};
pub use transforms::{
    interval_inverse, interval_transform, simplex_inverse, simplex_transform, Layout, Simplex, Unit,
};
