//! Numerical laboratory for η(z) = ∫₀^∞ G(t) cosh(zt) dt, the theta-kernel
//! integral form of Riemann's ξ-function under `s = (z + 1)/2`.

pub mod quadrature;
pub mod theta_series;
pub mod eta_integral;
pub mod critical_line;
pub mod strip_mapper;
pub mod export;
pub mod verify;
pub mod cli;
