//! Numerical laboratory for a quasilinear Schrodinger-Poisson system posed on
//! radially symmetric functions of R^3.
//!
//! The system couples a Schrodinger-type equation for a matter profile `u`
//! with a quasilinear Poisson equation for its self-generated potential,
//!
//! ```text
//!   -lap u + u + phi u = lambda f(x, u) + |u|^4 u,
//!   -lap phi - eps^4 div(|grad phi|^2 grad phi) = u^2,
//! ```
//!
//! restricted to radial profiles on a truncated domain [0, R].  Critical
//! points of the reduced energy are located with a two-stage mountain-pass
//! search: path deformation followed by a ray-peak polish.
//!
//! Module layout:
//! - [`grid`]: uniform radial mesh, shell-volume quadrature, Helmholtz solve;
//! - [`model`]: reaction terms, cutoff, norm truncation, supercritical cap;
//! - [`potential`]: convex solve for the nonlocal potential plus its
//!   integral-kernel oracle;
//! - [`energy`]: reduced functional, gradients, ray scans, level thresholds;
//! - [`mountain_pass`]: saddle search returning certified critical points;
//! - [`config`], [`experiments`], [`report`], [`checks`]: run configuration,
//!   parameter sweeps, CSV/SVG/field emission, and the invariant suite.

pub mod checks;
pub mod config;
pub mod energy;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod mountain_pass;
pub mod potential;
pub mod report;
