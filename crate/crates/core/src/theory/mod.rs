//! Limiting covariances, the correlated free-field kernel and the map
//! between the semicircle domain and the upper half-plane.

pub mod combinatorics;
pub mod covariance;
pub mod kernel;

pub use combinatorics::{binomial, catalan, catalan_composition_sum};
pub use covariance::{
    chebyshev_limit_covariance, limit_covariance_catalan, limit_covariance_contour, limit_covariance_kernel_integral,
    limit_covariance_series, ContourRadii, CovarianceParams, DEFAULT_NODES,
};
pub use kernel::{gff_kernel, green_function, height_moment_limit_covariance, omega, omega_inverse};
