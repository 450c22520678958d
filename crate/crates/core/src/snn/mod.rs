//! Spiking substrate shared by the vision stages: kernels, LIF grids and
//! same-size 2-D convolution.

mod bessel;
mod conv;
mod kernels;
mod lif;

pub use bessel::bessel_i0;
pub use conv::{conv2d_same, conv2d_same_dense, conv2d_same_sparse};
pub use kernels::{
    base_orientations, dump_kernel, gaussian_kernel, gaussian_weights, parse_kernel, von_mises_kernel,
    von_mises_weights, GaussianKernelSpec, VonMisesKernelSpec,
};
pub use lif::{LifGrid, LifStep, DEFAULT_THRESHOLD};
