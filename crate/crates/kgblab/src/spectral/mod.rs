//! Periodic grids, unitary-normalized transforms, Sobolev norms, dealiased
//! products and the two-argument kernel algebra.

mod field;
mod grid;
mod kernel;

pub use field::{
    convolve, interpolate_long_wave, map_physical, transform_forward, transform_forward_complex, transform_inverse,
    transform_inverse_real, SpectralField,
};
pub use grid::Grid1D;
pub use kernel::Kernel2;
