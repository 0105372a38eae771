//! Laplace-Beltrami operator of scalar functions on constraint manifolds
//! `S_c = F⁻¹(c) ⊂ ℝᵐ`, evaluated purely in ambient coordinates.
//!
//! The general route ([`constraint_core::laplace_beltrami_general`]) needs an
//! adapted tangent frame, the ambient Hessians of the function and of each
//! constraint, and the Lagrange multiplier functions σ. Two manifolds get
//! closed forms: the round sphere ([`sphere`]) and the orthogonal group
//! ([`orthogonal`]). [`oracles`] holds independent geodesic and
//! finite-difference checks that share no code with either route.
//!
//! Sign convention: the operator is the trace of the Riemannian Hessian, so
//! eigenvalues of eigenfunctions are non-positive.
//!
//! All indices in the public API are zero-based.

pub mod config;
pub mod constraint_core;
pub mod error;
pub mod harness;
pub mod numkit;
pub mod oracles;
pub mod orthogonal;
pub mod poly;
pub mod sphere;

pub use config::Tolerances;
pub use constraint_core::{AdaptedFrame, ConstraintSet, LaplacianReport, Provenance, ScalarField};
pub use error::{Error, Result};
pub use numkit::{DenseMatrix, DenseVector};
pub use oracles::OracleConfig;
pub use orthogonal::{IndexPairSet, OrthogonalPoint};
pub use poly::Polynomial;
pub use sphere::SpherePoint;
