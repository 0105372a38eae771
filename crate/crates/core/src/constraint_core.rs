//! Scalar fields, constraint sets, adapted frames and the general
//! Laplace-Beltrami formula for `S_c = F⁻¹(c) ⊂ ℝᵐ` with the Euclidean
//! ambient metric:
//!
//! ```text
//! Δ f̃(u) = tr(T⁺ [Hess f](u) T) − Σ_α σ_α(u) tr(T⁺ [Hess F_α](u) T)
//! ```
//!
//! where `T` stacks an adapted tangent frame as columns and `T⁺` is its left
//! Moore-Penrose inverse.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{FdSteps, Tolerances};
use crate::error::{Error, Result};
use crate::numkit::{self, dot, norm, Cholesky, DenseMatrix};

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type HessianFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Provenance {
    Analytic,
    FiniteDifference { gradient_step: f64, hessian_step: f64 },
}

/// A smooth function on ℝᵐ together with its gradient and Hessian.
///
/// The closures must be pure; the field is cheap to clone and may be shared
/// between threads.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    hessian: Arc<HessianFn>,
    provenance: Provenance,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn analytic(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian: impl Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            provenance: Provenance::Analytic,
        }
    }

    /// Derivatives by central differences of `value`.
    ///
    /// Gradient: `(f(u+heᵢ) − f(u−heᵢ)) / 2h`. Hessian: symmetric second
    /// differences, symmetrized as `(H + Hᵗ)/2`.
    pub fn finite_difference(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, steps: FdSteps) -> Self {
        assert!(steps.gradient > 0.0 && steps.hessian > 0.0, "finite-difference steps must be positive");
        let value: Arc<ValueFn> = Arc::new(value);
        let gradient = {
            let f = value.clone();
            let h = steps.gradient;
            move |u: &[f64]| central_gradient(&*f, u, h)
        };
        let hessian = {
            let f = value.clone();
            let h = steps.hessian;
            move |u: &[f64]| second_difference_hessian(&*f, u, h)
        };
        Self {
            dim,
            value,
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            provenance: Provenance::FiniteDifference { gradient_step: steps.gradient, hessian_step: steps.hessian },
        }
    }

    /// The constant function `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::analytic(dim, move |_| c, move |_| vec![0.0; dim], move |_| DenseMatrix::zeros(dim, dim))
    }

    /// A field that reports fixed first- and second-order data wherever it is
    /// evaluated. Only meaningful at the single point the data was sampled at.
    pub fn sampled(value: f64, gradient: Vec<f64>, hessian: DenseMatrix) -> Result<Self> {
        let dim = gradient.len();
        if hessian.shape() != (dim, dim) {
            return Err(Error::dim(format!(
                "sampled hessian is {}x{}, gradient has length {dim}",
                hessian.rows(),
                hessian.cols()
            )));
        }
        Ok(Self::analytic(dim, move |_| value, move |_| gradient.clone(), move |_| hessian.clone()))
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        assert_eq!(self.dim, other.dim, "dimension mismatch in linear_combination");
        let (f, g) = (self.clone(), other.clone());
        let (f2, g2) = (self.clone(), other.clone());
        let (f3, g3) = (self.clone(), other.clone());
        let provenance = match (self.provenance, other.provenance) {
            (Provenance::Analytic, Provenance::Analytic) => Provenance::Analytic,
            (p @ Provenance::FiniteDifference { .. }, _) | (_, p) => p,
        };
        ScalarField {
            provenance,
            ..ScalarField::analytic(
                self.dim,
                move |u| a * f.value(u) + b * g.value(u),
                move |u| f2.gradient(u).iter().zip(g2.gradient(u)).map(|(x, y)| a * x + b * y).collect(),
                move |u| &f3.hessian(u).scale(a) + &g3.hessian(u).scale(b),
            )
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        (self.value)(u)
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        (self.gradient)(u)
    }

    pub fn hessian(&self, u: &[f64]) -> DenseMatrix {
        (self.hessian)(u)
    }

    pub(crate) fn check_dim(&self, u: &[f64], what: &str) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::dim(format!("{what}: point has length {}, field lives on ℝ^{}", u.len(), self.dim)));
        }
        Ok(())
    }
}

fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(i, d) in moves {
        v[i] += d;
    }
    v
}

pub(crate) fn central_gradient(f: &dyn Fn(&[f64]) -> f64, u: &[f64], h: f64) -> Vec<f64> {
    (0..u.len())
        .map(|i| (f(&shifted(u, &[(i, h)])) - f(&shifted(u, &[(i, -h)]))) / (2.0 * h))
        .collect()
}

pub(crate) fn second_difference_hessian(f: &dyn Fn(&[f64]) -> f64, u: &[f64], h: f64) -> DenseMatrix {
    let m = u.len();
    let f0 = f(u);
    let mut hess = DenseMatrix::zeros(m, m);
    for i in 0..m {
        hess[(i, i)] = (f(&shifted(u, &[(i, h)])) - 2.0 * f0 + f(&shifted(u, &[(i, -h)]))) / (h * h);
        for j in 0..i {
            let v = (f(&shifted(u, &[(i, h), (j, h)])) - f(&shifted(u, &[(i, h), (j, -h)]))
                - f(&shifted(u, &[(i, -h), (j, h)]))
                + f(&shifted(u, &[(i, -h), (j, -h)])))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.symmetrized()
}

/// Wraps a value-only function with finite-difference derivatives using a
/// single step `h` for both gradient and Hessian.
pub fn finite_difference_field(dim: usize, value_fn: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, h: f64) -> ScalarField {
    ScalarField::finite_difference(dim, value_fn, FdSteps::uniform(h))
}

/// `k` constraint fields and the regular value `c` defining `S_c`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    ambient_dim: usize,
    constraints: Vec<ScalarField>,
    regular_value: Vec<f64>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<ScalarField>, regular_value: Vec<f64>) -> Result<Self> {
        let m = constraints.first().map(ScalarField::dim).ok_or_else(|| Error::dim("no constraints"))?;
        if constraints.iter().any(|f| f.dim() != m) {
            return Err(Error::dim("constraints live on different ambient spaces"));
        }
        if constraints.len() >= m {
            return Err(Error::dim(format!("{} constraints in ℝ^{m} leave no tangent directions", constraints.len())));
        }
        if regular_value.len() != constraints.len() {
            return Err(Error::dim(format!(
                "{} constraints but a regular value of length {}",
                constraints.len(),
                regular_value.len()
            )));
        }
        Ok(Self { ambient_dim: m, constraints, regular_value })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Number of constraints `k`.
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Dimension `m − k` of the manifold.
    pub fn manifold_dim(&self) -> usize {
        self.ambient_dim - self.constraints.len()
    }

    pub fn constraints(&self) -> &[ScalarField] {
        &self.constraints
    }

    pub fn regular_value(&self) -> &[f64] {
        &self.regular_value
    }

    /// `max_α |F_α(u) − c_α|`.
    pub fn residual(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self
            .constraints
            .iter()
            .zip(&self.regular_value)
            .map(|(f, c)| (f.value(u) - c).abs())
            .fold(0.0, f64::max))
    }

    pub fn gradients(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.constraints.iter().map(|f| f.gradient(u)).collect()
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.ambient_dim {
            return Err(Error::dim(format!("point of length {} in ℝ^{}", u.len(), self.ambient_dim)));
        }
        Ok(())
    }
}

/// Whether `u` lies on `S_c` to within `tol`, together with the residual.
pub fn on_manifold(constraints: &ConstraintSet, u: &[f64], tol: f64) -> Result<(bool, f64)> {
    let r = constraints.residual(u)?;
    Ok((r <= tol, r))
}

type FrameFn = dyn Fn(&[f64]) -> Result<DenseMatrix> + Send + Sync;

/// Maps a point of `S_c` to the `m × (m−k)` matrix of tangent frame columns.
#[derive(Clone)]
pub struct AdaptedFrame {
    provider: Arc<FrameFn>,
}

impl fmt::Debug for AdaptedFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AdaptedFrame")
    }
}

impl AdaptedFrame {
    pub fn new(provider: impl Fn(&[f64]) -> Result<DenseMatrix> + Send + Sync + 'static) -> Self {
        Self { provider: Arc::new(provider) }
    }

    pub fn at(&self, u: &[f64]) -> Result<DenseMatrix> {
        (self.provider)(u)
    }

    /// A frame for any constraint set: canonical basis vectors projected onto
    /// the orthogonal complement of the constraint gradients, greedily
    /// selected by residual norm and orthonormalized.
    pub fn projected(constraints: &ConstraintSet) -> Self {
        let constraints = constraints.clone();
        Self::new(move |u| projected_frame(&constraints, u))
    }
}

fn projected_frame(constraints: &ConstraintSet, u: &[f64]) -> Result<DenseMatrix> {
    let m = constraints.ambient_dim();
    let grads = DenseMatrix::from_columns(&constraints.gradients(u))?;
    let (normal, _) = numkit::orthonormalize_columns(&grads, 1e-10)
        .map_err(|_| Error::Regularity("constraint gradients are linearly dependent".into()))?;
    let mut basis: Vec<Vec<f64>> = normal.columns().map(<[f64]>::to_vec).collect();
    let mut tangent = Vec::with_capacity(constraints.manifold_dim());
    let reduce = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for q in basis {
                let c = dot(q, v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
    };
    while tangent.len() < constraints.manifold_dim() {
        let best = (0..m)
            .map(|i| {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                reduce(&mut e, &basis);
                e
            })
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))
            .expect("m > 0");
        let r = norm(&best);
        if r < 1e-8 {
            return Err(Error::Regularity("could not complete a tangent frame".into()));
        }
        let q: Vec<f64> = best.iter().map(|x| x / r).collect();
        basis.push(q.clone());
        tangent.push(q);
    }
    DenseMatrix::from_columns(&tangent)
}

/// Laplacian value with the pieces it was assembled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianReport {
    pub value: f64,
    pub sigma: Vec<f64>,
    /// `tr(T⁺ [Hess f] T)`.
    pub trace_main: f64,
    /// `tr(T⁺ [Hess F_α] T)` for each constraint.
    pub trace_constraint: Vec<f64>,
    /// Condition estimate of `TᵗT`.
    pub frame_gram_condition: f64,
}

impl LaplacianReport {
    pub fn assemble(sigma: Vec<f64>, trace_main: f64, trace_constraint: Vec<f64>, frame_gram_condition: f64) -> Self {
        assert_eq!(sigma.len(), trace_constraint.len());
        let value = trace_main - dot(&sigma, &trace_constraint);
        Self { value, sigma, trace_main, trace_constraint, frame_gram_condition }
    }
}

/// Solves the Gram system of the constraint gradients for the Lagrange
/// multiplier functions, equivalent to the Gram determinant ratio by Cramer's
/// rule: `Gram(∇F, ∇F) σ = (⟨∇F_α, ∇f⟩)_α`.
pub fn lagrange_multipliers(constraints: &ConstraintSet, f: &ScalarField, u: &[f64]) -> Result<Vec<f64>> {
    lagrange_multipliers_with(constraints, f, u, Tolerances::default().rcond)
}

pub fn lagrange_multipliers_with(constraints: &ConstraintSet, f: &ScalarField, u: &[f64], rcond: f64) -> Result<Vec<f64>> {
    constraints.check_point(u)?;
    f.check_dim(u, "lagrange_multipliers")?;
    let grads = constraints.gradients(u);
    multipliers_from_gradients(&grads, &f.gradient(u), rcond)
}

fn multipliers_from_gradients(grads: &[Vec<f64>], grad_f: &[f64], rcond: f64) -> Result<Vec<f64>> {
    let g = numkit::gram(grads, grads)?;
    let rhs = DenseMatrix::new(grads.len(), 1, grads.iter().map(|gi| dot(gi, grad_f)).collect())?;
    let chol = Cholesky::factor(&g)
        .map_err(|_| Error::Regularity("Gram matrix of constraint gradients is not positive definite".into()))?;
    let condition = g.norm_one() * chol.inverse().norm_one();
    if !(condition <= 1.0 / rcond) {
        return Err(Error::Regularity(format!("Gram matrix of constraint gradients has condition {condition:.3e}")));
    }
    Ok(chol.solve(&rhs)?.into_data())
}

/// `tr(A B)` without forming the product.
pub(crate) fn trace_of_product(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    debug_assert_eq!(a.cols(), b.rows());
    debug_assert_eq!(a.rows(), b.cols());
    let mut s = 0.0;
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// General Laplace-Beltrami operator of `f` restricted to `S_c`, at `u`.
pub fn laplace_beltrami_general(
    f: &ScalarField,
    constraints: &ConstraintSet,
    frame: &AdaptedFrame,
    u: &[f64],
    tol: &Tolerances,
) -> Result<LaplacianReport> {
    f.check_dim(u, "laplace_beltrami_general")?;
    if f.dim() != constraints.ambient_dim() {
        return Err(Error::dim(format!(
            "field on ℝ^{} with constraints on ℝ^{}",
            f.dim(),
            constraints.ambient_dim()
        )));
    }
    let (ok, residual) = on_manifold(constraints, u, tol.on_manifold)?;
    if !ok {
        return Err(Error::OffManifold { residual, tolerance: tol.on_manifold });
    }

    let t = frame.at(u)?;
    let (m, r) = (constraints.ambient_dim(), constraints.manifold_dim());
    if t.shape() != (m, r) {
        return Err(Error::dim(format!("frame is {}x{}, expected {m}x{r}", t.rows(), t.cols())));
    }
    let grads = constraints.gradients(u);
    for (alpha, g) in grads.iter().enumerate() {
        let gn = norm(g);
        for (i, col) in t.columns().enumerate() {
            let leak = dot(g, col).abs();
            if leak > tol.on_manifold * gn.max(1.0) * norm(col).max(1.0) {
                return Err(Error::Contract(format!(
                    "frame column {i} is not tangent: ⟨∇F_{alpha}, t_{i}⟩ = {leak:.3e}"
                )));
            }
        }
    }

    let (t_plus, condition) = numkit::left_moore_penrose_with(&t, tol.rcond)?;
    let sigma = multipliers_from_gradients(&grads, &f.gradient(u), tol.rcond)?;
    let projected_trace = |h: &DenseMatrix| trace_of_product(&t_plus, &(h * &t));
    let trace_main = projected_trace(&f.hessian(u));
    let trace_constraint = constraints.constraints().iter().map(|fa| projected_trace(&fa.hessian(u))).collect();
    Ok(LaplacianReport::assemble(sigma, trace_main, trace_constraint, condition))
}
