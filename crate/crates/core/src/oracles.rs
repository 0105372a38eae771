//! Verification paths that share no code with the frame/multiplier formulas.
//!
//! The Laplacian at `p` equals `Σᵢ d²/dt² f(γᵢ(t))|₀` over unit-speed
//! geodesics through `p` along an orthonormal tangent basis. On the sphere
//! the geodesics are great circles; on O(n) they are `t ↦ U·exp(tΘ_ab/√2)`,
//! where the exponential is a plane rotation. Second derivatives are central
//! differences, optionally with one Richardson step.

use serde::{Deserialize, Serialize};

use crate::constraint_core::{central_gradient, second_difference_hessian, Provenance, ScalarField};
use crate::error::{Error, Result};
use crate::numkit::{self, DenseMatrix};
use crate::orthogonal::{theta_sign, IndexPairSet, OrthogonalPoint};
use crate::sphere::SpherePoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub h: f64,
    pub richardson: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { h: 1e-3, richardson: false }
    }
}

impl OracleConfig {
    pub fn new(h: f64, richardson: bool) -> Result<Self> {
        if !(1e-6..=1e-1).contains(&h) {
            return Err(Error::Contract(format!("oracle step {h} outside [1e-6, 1e-1]")));
        }
        Ok(Self { h, richardson })
    }
}

/// Second derivative at `t = 0` of `t ↦ g(t)`, with `g(0) = g0` supplied.
fn second_derivative(g: impl Fn(f64) -> f64, g0: f64, cfg: &OracleConfig) -> f64 {
    let d = |h: f64| (g(h) - 2.0 * g0 + g(-h)) / (h * h);
    if cfg.richardson {
        (4.0 * d(0.5 * cfg.h) - d(cfg.h)) / 3.0
    } else {
        d(cfg.h)
    }
}

/// Geodesic Laplacian on the sphere. The tangent basis orthonormalizes the
/// projections of the canonical vectors, dropping the one whose projection is
/// shortest.
pub fn geodesic_laplacian_sphere(f: &ScalarField, x: &SpherePoint, cfg: &OracleConfig) -> Result<f64> {
    let drop = x
        .coords()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    geodesic_laplacian_sphere_dropping(f, x, cfg, drop)
}

/// As [`geodesic_laplacian_sphere`], dropping canonical vector `drop`.
pub fn geodesic_laplacian_sphere_dropping(f: &ScalarField, x: &SpherePoint, cfg: &OracleConfig, drop: usize) -> Result<f64> {
    let n = x.dim();
    if f.dim() != n {
        return Err(Error::dim(format!("field on ℝ^{} at a point of ℝ^{n}", f.dim())));
    }
    if drop >= n {
        return Err(Error::dim(format!("cannot drop canonical vector {drop} in ℝ^{n}")));
    }
    let (p, r) = (x.coords(), x.radius());
    let projected: Vec<Vec<f64>> = (0..n)
        .filter(|&i| i != drop)
        .map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 } - p[i] * p[k] / (r * r)).collect())
        .collect();
    let (basis, _) = numkit::orthonormalize_columns(&DenseMatrix::from_columns(&projected)?, 1e-10)
        .map_err(|_| Error::Contract(format!("canonical vector {drop} leaves a degenerate tangent set")))?;

    let f0 = f.value(p);
    let mut total = 0.0;
    for v in basis.columns() {
        let along = |t: f64| {
            let (c, s) = ((t / r).cos(), (t / r).sin());
            let q: Vec<f64> = p.iter().zip(v).map(|(pk, vk)| c * pk + r * s * vk).collect();
            f.value(&q)
        };
        total += second_derivative(along, f0, cfg);
    }
    Ok(total)
}

/// Geodesic Laplacian on O(n) for the bi-invariant metric.
pub fn geodesic_laplacian_on(f: &ScalarField, u: &OrthogonalPoint, cfg: &OracleConfig) -> Result<f64> {
    let n = u.n();
    if f.dim() != n * n {
        return Err(Error::dim(format!("field on ℝ^{} at a point of O({n})", f.dim())));
    }
    let base = u.as_vec();
    let f0 = f.value(base);
    let mut total = 0.0;
    for (a, b) in IndexPairSet::new(n).iter() {
        let s = theta_sign(a, b);
        // exp(θΘ_ab) rotates the (a, b) plane: e_a ↦ cos θ e_a + s sin θ e_b.
        let along = |t: f64| {
            let theta = t / std::f64::consts::SQRT_2;
            let (c, sn) = (theta.cos(), theta.sin());
            let mut moved = base.to_vec();
            for r in 0..n {
                let (ua, ub) = (base[a * n + r], base[b * n + r]);
                moved[a * n + r] = c * ua + s * sn * ub;
                moved[b * n + r] = c * ub - s * sn * ua;
            }
            f.value(&moved)
        };
        total += second_derivative(along, f0, cfg);
    }
    Ok(total)
}

fn require_analytic(f: &ScalarField, u: &[f64]) -> Result<()> {
    if !matches!(f.provenance(), Provenance::Analytic) {
        return Err(Error::Contract("derivative checks need an analytic field".into()));
    }
    f.check_dim(u, "derivative check")
}

/// `max |∇f − central differences of f|` at `u`.
pub fn check_gradient(f: &ScalarField, u: &[f64], cfg: &OracleConfig) -> Result<f64> {
    require_analytic(f, u)?;
    let value = |v: &[f64]| f.value(v);
    let fd = central_gradient(&value, u, cfg.h);
    Ok(f.gradient(u).iter().zip(&fd).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// `max |Hess f − second differences of f|` at `u`.
pub fn check_hessian(f: &ScalarField, u: &[f64], cfg: &OracleConfig) -> Result<f64> {
    require_analytic(f, u)?;
    let value = |v: &[f64]| f.value(v);
    let fd = second_difference_hessian(&value, u, cfg.h);
    Ok(f.hessian(u).max_abs_diff(&fd))
}
