//! The sphere `S_R^{n−1} = {x ∈ ℝⁿ : ‖x‖² = R²}`.
//!
//! Chart `j` (any coordinate with `x_j ≠ 0`) uses the tangent frame
//! `tᵢ = R²eᵢ − xᵢx` for `i ≠ j`. With it the general formula collapses to
//!
//! ```text
//! Δ f̃(x) = Δ_{ℝⁿ} f(x) − ((n−1)/R²)⟨x, ∇f(x)⟩ − (1/R²) xᵗ[Hess f](x) x
//! ```

use crate::config::Tolerances;
use crate::constraint_core::{AdaptedFrame, ConstraintSet, LaplacianReport, ScalarField};
use crate::error::{Error, Result};
use crate::numkit::{dot, DenseMatrix};
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
    radius: f64,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>, radius: f64) -> Result<Self> {
        Self::with_tolerance(coords, radius, Tolerances::default().on_manifold)
    }

    pub fn with_tolerance(coords: Vec<f64>, radius: f64, tol: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Contract(format!("sphere radius must be positive, got {radius}")));
        }
        if coords.len() < 2 {
            return Err(Error::dim("sphere points need at least two coordinates"));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(coords.iter().position(|x| !x.is_finite()).unwrap()));
        }
        let residual = (dot(&coords, &coords) - radius * radius).abs();
        if residual > tol {
            return Err(Error::OffManifold { residual, tolerance: tol });
        }
        Ok(Self { coords, radius })
    }

    /// Rescales an arbitrary nonzero vector onto the sphere of radius `radius`.
    pub fn project(v: &[f64], radius: f64) -> Result<Self> {
        let n = dot(v, v).sqrt();
        if n == 0.0 {
            return Err(Error::Contract("cannot project the origin onto a sphere".into()));
        }
        Self::new(v.iter().map(|x| x * radius / n).collect(), radius)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Index of the largest coordinate in magnitude, the best-conditioned chart.
    pub fn default_chart(&self) -> usize {
        self.coords
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .expect("non-empty")
    }

    /// All indices usable as excluded index under the default chart threshold.
    pub fn valid_charts(&self) -> Vec<usize> {
        let limit = Tolerances::default().chart * self.radius;
        (0..self.dim()).filter(|&j| self.coords[j].abs() >= limit).collect()
    }

    fn check_chart(&self, j: usize) -> Result<()> {
        if j >= self.dim() {
            return Err(Error::dim(format!("chart index {j} for a point in ℝ^{}", self.dim())));
        }
        let magnitude = self.coords[j].abs();
        if magnitude < Tolerances::default().chart * self.radius {
            return Err(Error::Chart { index: j, magnitude, suggestion: self.default_chart() });
        }
        Ok(())
    }
}

/// `F(x) = Σ xᵢ²` with regular value `R²`.
pub fn sphere_constraint_set(n: usize, radius: f64) -> Result<ConstraintSet> {
    ConstraintSet::new(vec![Polynomial::squared_norm(n).to_field()], vec![radius * radius])
}

/// The `n × (n−1)` frame `tᵢ = R²eᵢ − xᵢx`, `i ≠ j`, columns in increasing `i`.
pub fn sphere_frame(x: &SpherePoint, j: usize) -> Result<DenseMatrix> {
    x.check_chart(j)?;
    let (n, r2) = (x.dim(), x.radius * x.radius);
    let columns: Vec<Vec<f64>> = (0..n)
        .filter(|&i| i != j)
        .map(|i| {
            let xi = x.coords[i];
            let mut t: Vec<f64> = x.coords.iter().map(|&xk| -xi * xk).collect();
            t[i] += r2;
            t
        })
        .collect();
    DenseMatrix::from_columns(&columns)
}

/// Closed-form `(TᵗT)⁻¹ = R⁻⁴ (I + x_ĵ x_ĵᵗ / x_j²)`.
pub fn sphere_frame_gram_inverse(x: &SpherePoint, j: usize) -> Result<DenseMatrix> {
    x.check_chart(j)?;
    let reduced: Vec<f64> = x.coords.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &v)| v).collect();
    let xj2 = x.coords[j] * x.coords[j];
    let r4 = x.radius.powi(4);
    let n = reduced.len();
    Ok(DenseMatrix::from_fn(n, n, |a, b| {
        let id = if a == b { 1.0 } else { 0.0 };
        (id + reduced[a] * reduced[b] / xj2) / r4
    }))
}

/// `T T⁺ = I − x xᵗ / R²`, the same for every valid chart.
pub fn sphere_projector(x: &SpherePoint, j: usize) -> Result<DenseMatrix> {
    x.check_chart(j)?;
    let (n, r2) = (x.dim(), x.radius * x.radius);
    Ok(DenseMatrix::from_fn(n, n, |a, b| {
        let id = if a == b { 1.0 } else { 0.0 };
        id - x.coords[a] * x.coords[b] / r2
    }))
}

fn check_field(f: &ScalarField, x: &SpherePoint) -> Result<()> {
    if f.dim() != x.dim() {
        return Err(Error::dim(format!("field on ℝ^{} at a point of ℝ^{}", f.dim(), x.dim())));
    }
    Ok(())
}

/// Lagrange multiplier `σ(x) = ⟨x, ∇f(x)⟩ / 2R²`.
pub fn sphere_sigma(f: &ScalarField, x: &SpherePoint) -> Result<f64> {
    check_field(f, x)?;
    Ok(dot(&x.coords, &f.gradient(&x.coords)) / (2.0 * x.radius * x.radius))
}

/// Closed-form Laplace-Beltrami operator on the sphere.
pub fn sphere_laplacian(f: &ScalarField, x: &SpherePoint) -> Result<f64> {
    check_field(f, x)?;
    let (n, r2) = (x.dim() as f64, x.radius * x.radius);
    let h = f.hessian(&x.coords);
    let radial = dot(&x.coords, &f.gradient(&x.coords));
    let normal_curvature = dot(&x.coords, &h.mul_vec(&x.coords)?);
    Ok(h.trace() - (n - 1.0) / r2 * radial - normal_curvature / r2)
}

/// The closed form laid out as a [`LaplacianReport`], with
/// `trace_main = Δf − xᵗHx/R²`, `σ = ⟨x,∇f⟩/2R²` and the single constraint
/// trace `tr(P · 2I) = 2(n−1)`.
pub fn sphere_laplacian_report(f: &ScalarField, x: &SpherePoint) -> Result<LaplacianReport> {
    check_field(f, x)?;
    let (n, r2) = (x.dim() as f64, x.radius * x.radius);
    let h = f.hessian(&x.coords);
    let trace_main = h.trace() - dot(&x.coords, &h.mul_vec(&x.coords)?) / r2;
    let sigma = sphere_sigma(f, x)?;
    let j = x.default_chart();
    let t = sphere_frame(x, j)?;
    let condition = (&t.transpose() * &t).norm_one() * sphere_frame_gram_inverse(x, j)?.norm_one();
    Ok(LaplacianReport::assemble(vec![sigma], trace_main, vec![2.0 * (n - 1.0)], condition))
}

/// Laplacian of a prolongation homogeneous of degree `k`:
/// `Δ_{ℝⁿ} f(x) − k(k+n−2)/R² · f(x)`.
///
/// Homogeneity is spot-checked with `f(tx) = tᵏ f(x)` for `t ∈ {2, 3}`.
pub fn homogeneous_sphere_laplacian(f: &ScalarField, k: i32, x: &SpherePoint) -> Result<f64> {
    check_field(f, x)?;
    let fx = f.value(&x.coords);
    for t in [2.0_f64, 3.0] {
        let scaled: Vec<f64> = x.coords.iter().map(|v| t * v).collect();
        let lhs = f.value(&scaled);
        let rhs = t.powi(k) * fx;
        if (lhs - rhs).abs() > 1e-8 * lhs.abs().max(rhs.abs()) + 1e-15 {
            return Err(Error::Contract(format!(
                "function is not homogeneous of degree {k}: f({t}x) = {lhs:e}, {t}^{k} f(x) = {rhs:e}"
            )));
        }
    }
    let (n, r2) = (x.dim() as f64, x.radius * x.radius);
    let k = k as f64;
    Ok(f.hessian(&x.coords).trace() - k * (k + n - 2.0) / r2 * fx)
}

/// Frame provider for the general route, using the default chart at each point.
pub fn sphere_adapted_frame(radius: f64) -> AdaptedFrame {
    AdaptedFrame::new(move |u| {
        let x = SpherePoint::new(u.to_vec(), radius)?;
        sphere_frame(&x, x.default_chart())
    })
}

/// As [`sphere_adapted_frame`], pinned to chart `j`.
pub fn sphere_adapted_frame_at_chart(radius: f64, j: usize) -> AdaptedFrame {
    AdaptedFrame::new(move |u| sphere_frame(&SpherePoint::new(u.to_vec(), radius)?, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_core::laplace_beltrami_general;
    use crate::numkit::left_moore_penrose;

    fn p(coords: &[f64]) -> SpherePoint {
        SpherePoint::new(coords.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn frame_at_north_pole() {
        let t = sphere_frame(&p(&[0.0, 0.0, 1.0]), 2).unwrap();
        assert_eq!(t, DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]).unwrap());
        let t_plus = left_moore_penrose(&t).unwrap();
        assert!((&t_plus * &t).max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn frame_on_circle() {
        let s = 0.5_f64.sqrt();
        let t = sphere_frame(&p(&[s, s]), 1).unwrap();
        assert!((t[(0, 0)] - 0.5).abs() < 1e-15 && (t[(1, 0)] + 0.5).abs() < 1e-15);
        let inv = sphere_frame_gram_inverse(&p(&[s, s]), 1).unwrap();
        assert!((inv[(0, 0)] - 2.0).abs() < 1e-14);
        let explicit = 1.0 / (&t.transpose() * &t)[(0, 0)];
        assert!((explicit - 2.0).abs() < 1e-14);
    }

    #[test]
    fn frame_columns_are_tangent() {
        let x = SpherePoint::project(&[0.3, -1.2, 0.7, 2.0], 1.7).unwrap();
        for j in 0..4 {
            let t = sphere_frame(&x, j).unwrap();
            for c in t.columns() {
                assert!(dot(c, x.coords()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chart_error_suggests_alternative() {
        match sphere_frame(&p(&[0.0, 0.0, 1.0]), 0) {
            Err(Error::Chart { index: 0, suggestion: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(sphere_frame_gram_inverse(&p(&[0.0, 1.0]), 0).is_err());
        assert!(sphere_projector(&p(&[0.0, 1.0]), 0).is_err());
    }

    #[test]
    fn rejects_off_sphere_points_and_bad_radius() {
        assert!(matches!(SpherePoint::new(vec![1.1, 0.0], 1.0), Err(Error::OffManifold { .. })));
        assert!(SpherePoint::new(vec![1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn projector_examples() {
        let pr = sphere_projector(&p(&[0.0, 0.0, 1.0]), 2).unwrap();
        assert_eq!(pr, DenseMatrix::diagonal(&[1.0, 1.0, 0.0]));
        let x = SpherePoint::project(&[0.4, 0.1, -0.9, 0.3, 0.2], 2.0).unwrap();
        let pr = sphere_projector(&x, 0).unwrap();
        assert!((&pr * &pr).max_abs_diff(&pr) < 1e-12);
        for j in [0, 2] {
            let t = sphere_frame(&x, j).unwrap();
            let composed = &t * &left_moore_penrose(&t).unwrap();
            assert!(composed.max_abs_diff(&pr) < 1e-10);
        }
    }

    #[test]
    fn sigma_examples() {
        let x = p(&[1.0, 0.0, 0.0]);
        assert!((sphere_sigma(&Polynomial::coordinate(3, 0).to_field(), &x).unwrap() - 0.5).abs() < 1e-15);
        let y = SpherePoint::project(&[0.3, 0.4, -0.2], 2.0).unwrap();
        let s = sphere_sigma(&Polynomial::squared_norm(3).to_field(), &y).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn laplacian_examples() {
        let norm2 = Polynomial::squared_norm(4).to_field();
        let x = SpherePoint::project(&[0.1, 0.5, -0.3, 0.8], 1.5).unwrap();
        assert!(sphere_laplacian(&norm2, &x).unwrap().abs() < 1e-13);

        let xy = Polynomial::monomial(3, 1.0, &[(0, 1), (1, 1)]);
        let y = SpherePoint::project(&[0.3, 0.4, -0.5], 1.0).unwrap();
        let v = sphere_laplacian(&xy.to_field(), &y).unwrap();
        assert!((v + 6.0 * xy.value(y.coords())).abs() < 1e-13);
    }

    #[test]
    fn report_matches_closed_form() {
        let f = Polynomial::monomial(3, 2.0, &[(0, 2), (2, 1)]).add(&Polynomial::coordinate(3, 1)).to_field();
        let x = SpherePoint::project(&[0.2, -0.7, 0.4], 2.5).unwrap();
        let rep = sphere_laplacian_report(&f, &x).unwrap();
        let direct = sphere_laplacian(&f, &x).unwrap();
        assert!((rep.value - direct).abs() < 1e-12);
        assert_eq!(rep.value, rep.trace_main - rep.sigma[0] * rep.trace_constraint[0]);
    }

    #[test]
    fn homogeneous_examples_and_contract() {
        let x = SpherePoint::project(&[0.2, -0.7, 0.4, 0.1], 1.0).unwrap();
        let lin = Polynomial::linear(&[1.0, 2.0, -1.0, 0.5]);
        let v = homogeneous_sphere_laplacian(&lin.to_field(), 1, &x).unwrap();
        assert!((v + 3.0 * lin.value(x.coords())).abs() < 1e-13);

        let norm2 = Polynomial::squared_norm(4).to_field();
        assert!(homogeneous_sphere_laplacian(&norm2, 2, &x).unwrap().abs() < 1e-13);

        let mixed = lin.add(&Polynomial::squared_norm(4)).to_field();
        assert!(matches!(homogeneous_sphere_laplacian(&mixed, 1, &x), Err(Error::Contract(_))));
        assert!(matches!(homogeneous_sphere_laplacian(&norm2, 3, &x), Err(Error::Contract(_))));
    }

    #[test]
    fn general_route_agrees_with_linear_eigenvalue() {
        let c = sphere_constraint_set(3, 1.0).unwrap();
        let f = Polynomial::coordinate(3, 0).to_field();
        let u = [1.0, 0.0, 0.0];
        let rep = laplace_beltrami_general(&f, &c, &sphere_adapted_frame(1.0), &u, &Tolerances::default()).unwrap();
        assert!((rep.value + 2.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = Polynomial::coordinate(4, 0).to_field();
        assert!(matches!(sphere_laplacian(&f, &p(&[1.0, 0.0, 0.0])), Err(Error::Dimension(_))));
        assert!(matches!(sphere_sigma(&f, &p(&[1.0, 0.0, 0.0])), Err(Error::Dimension(_))));
    }
}
