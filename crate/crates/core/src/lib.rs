//! Numerical laboratory for logarithmic Trudinger-Moser energies of radial
//! functions in `R^N`.
//!
//! Profiles are continuous piecewise-linear functions of the radius on a
//! [`RadialGrid`]. The energies are built from the bilinear form
//! `b0(v, w) = int int ln(1/|x-y|) v(x) w(y) dx dy`, evaluated either through
//! one-dimensional prefix sums ([`kernel::b0_radial`]) or through a direct
//! angular quadrature oracle ([`kernel::b_split_direct`]).

pub mod bridge;
pub mod error;
pub mod euler_lagrange;
pub mod growth;
pub mod kernel;
pub mod maximize;
pub mod moser;
pub mod quadrature;
pub mod radial;
pub mod rearrange;
pub mod samples;

pub use error::{Error, Result};
pub use growth::{CheckKind, GrowthFamily, GrowthReport, GrowthSpec};
pub use kernel::BilinearReport;
pub use maximize::{Domain, MaximizeOptions, MaximizeResult};
pub use moser::MoserRow;
pub use radial::{dim_params, DimensionParams, NormKind, RadialGrid, RadialProfile};
