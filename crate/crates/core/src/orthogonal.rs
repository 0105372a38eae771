//! The orthogonal group `O(n) ⊂ ℝ^{n×n} ≅ ℝ^{n²}` with the bi-invariant
//! metric induced by the Frobenius inner product.
//!
//! Points are vectorized column-major, `u = vec(U) = (u₁ᵗ, …, u_nᵗ)ᵗ`, and
//! every `n²×n²` matrix here is read as an `n×n` grid of `n×n` blocks, block
//! `(i, j)` pairing column `i` with column `j` of `U`. With the frame
//! `W_ab(U) = UΘ_ab` one has `TᵗT = 2I` and `TTᵗ = I − Λ(U)`, which gives
//!
//! ```text
//! Δ f̃(U) = ½Δf(U) − ((n−1)/2) tr(Uᵗ[∇f](U)) − ½ tr(Λ(U)[Hess f](U))
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::Tolerances;
use crate::constraint_core::{AdaptedFrame, ConstraintSet, LaplacianReport, ScalarField};
use crate::error::{Error, Result};
use crate::numkit::{self, dot, DenseMatrix};

/// Largest `n` for which [`lambda_of`] will build the `n²×n²` matrix.
pub const MAX_MATERIALIZED_LAMBDA: usize = 16;

/// A matrix `U` with `UᵗU = I` to tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalPoint {
    matrix: DenseMatrix,
}

impl OrthogonalPoint {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().orthogonality)
    }

    pub fn with_tolerance(matrix: DenseMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dim(format!("O(n) point must be square, got {}x{}", matrix.rows(), matrix.cols())));
        }
        let deviation = orthogonality_defect(&matrix);
        if deviation > tol {
            return Err(Error::NotOrthogonal { deviation, tolerance: tol });
        }
        Ok(Self { matrix })
    }

    /// Reads a point from its column-major vectorization.
    pub fn from_vec(u: &[f64], n: usize) -> Result<Self> {
        Self::new(numkit::unvec(u, n)?)
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: DenseMatrix::identity(n) }
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Column `u_a`.
    pub fn column(&self, a: usize) -> &[f64] {
        self.matrix.column(a)
    }

    /// `vec(U)`.
    pub fn as_vec(&self) -> &[f64] {
        self.matrix.data()
    }
}

/// `max |UᵗU − I|`.
pub fn orthogonality_defect(u: &DenseMatrix) -> f64 {
    (&u.transpose() * u).max_abs_diff(&DenseMatrix::identity(u.cols()))
}

/// Pairs `(a, b)` with `a < b`, lexicographic. Fixes the order of the frame
/// columns and of the off-diagonal constraints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPairSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl IndexPairSet {
    pub fn new(n: usize) -> Self {
        let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        self.pairs.binary_search(&(a, b)).ok()
    }
}

/// Ambient dimension `n²`, constraint count `n(n+1)/2`, group dimension `n(n−1)/2`.
pub fn dimensions(n: usize) -> (usize, usize, usize) {
    (n * n, n * (n + 1) / 2, n * (n - 1) / 2)
}

fn require_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::dim(format!("O(n) needs n ≥ 2, got {n}")));
    }
    Ok(())
}

fn check_field(f: &ScalarField, u: &OrthogonalPoint) -> Result<()> {
    let n = u.n();
    if f.dim() != n * n {
        return Err(Error::dim(format!("field on ℝ^{} at a point of O({n})", f.dim())));
    }
    Ok(())
}

/// `F_aa(u) = ½‖u_a‖²` (target ½) for every `a`, then `F_bc(u) = ⟨u_b, u_c⟩`
/// (target 0) for `b < c` lexicographically.
pub fn on_constraint_set(n: usize) -> Result<ConstraintSet> {
    require_n(n)?;
    let m = n * n;
    let mut fields = Vec::with_capacity(n * (n + 1) / 2);
    let mut targets = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        let col = move |u: &[f64]| u[a * n..(a + 1) * n].to_vec();
        fields.push(ScalarField::analytic(
            m,
            move |u| 0.5 * dot(&col(u), &col(u)),
            move |u| {
                let mut g = vec![0.0; m];
                g[a * n..(a + 1) * n].copy_from_slice(&u[a * n..(a + 1) * n]);
                g
            },
            move |_| DenseMatrix::from_fn(m, m, |i, j| if i == j && i / n == a { 1.0 } else { 0.0 }),
        ));
        targets.push(0.5);
    }
    for (b, c) in IndexPairSet::new(n).iter() {
        fields.push(ScalarField::analytic(
            m,
            move |u| dot(&u[b * n..(b + 1) * n], &u[c * n..(c + 1) * n]),
            move |u| {
                let mut g = vec![0.0; m];
                g[b * n..(b + 1) * n].copy_from_slice(&u[c * n..(c + 1) * n]);
                g[c * n..(c + 1) * n].copy_from_slice(&u[b * n..(b + 1) * n]);
                g
            },
            move |_| {
                DenseMatrix::from_fn(m, m, |i, j| {
                    let blocks = (i / n, j / n);
                    if i % n == j % n && (blocks == (b, c) || blocks == (c, b)) {
                        1.0
                    } else {
                        0.0
                    }
                })
            },
        ));
        targets.push(0.0);
    }
    ConstraintSet::new(fields, targets)
}

/// `Θ_ab = (−1)^{a+b}(e_b e_aᵗ − e_a e_bᵗ)` in [`IndexPairSet`] order.
///
/// The sign is invariant under the shift to zero-based indices.
pub fn theta_basis(n: usize) -> Result<Vec<DenseMatrix>> {
    require_n(n)?;
    Ok(IndexPairSet::new(n).iter().map(|(a, b)| theta(n, a, b)).collect())
}

pub(crate) fn theta_sign(a: usize, b: usize) -> f64 {
    if (a + b).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn theta(n: usize, a: usize, b: usize) -> DenseMatrix {
    let s = theta_sign(a, b);
    let mut m = DenseMatrix::zeros(n, n);
    m[(b, a)] = s;
    m[(a, b)] = -s;
    m
}

/// Frame matrix with columns `vec(UΘ_ab)`, `n² × n(n−1)/2`.
pub fn on_frame(u: &OrthogonalPoint) -> Result<DenseMatrix> {
    let n = u.n();
    require_n(n)?;
    let pairs = IndexPairSet::new(n);
    let mut t = DenseMatrix::zeros(n * n, pairs.len());
    // UΘ_ab has column a equal to s·u_b and column b equal to −s·u_a.
    for (k, (a, b)) in pairs.iter().enumerate() {
        let s = theta_sign(a, b);
        for r in 0..n {
            t[(a * n + r, k)] = s * u.column(b)[r];
            t[(b * n + r, k)] = -s * u.column(a)[r];
        }
    }
    Ok(t)
}

/// Frame provider for the general route on O(n).
pub fn on_adapted_frame(n: usize) -> AdaptedFrame {
    let tol = Tolerances::default().orthogonality;
    AdaptedFrame::new(move |v| on_frame(&OrthogonalPoint::with_tolerance(numkit::unvec(v, n)?, tol)?))
}

/// `Λ(U)`, the `n²×n²` matrix whose block `(i, j)` is `u_j u_iᵗ`.
pub fn lambda_of(u: &OrthogonalPoint) -> Result<DenseMatrix> {
    let n = u.n();
    if n > MAX_MATERIALIZED_LAMBDA {
        return Err(Error::Contract(format!(
            "Λ(U) is only materialized for n ≤ {MAX_MATERIALIZED_LAMBDA}, got {n}"
        )));
    }
    let um = u.matrix();
    Ok(DenseMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, k) = (row / n, row % n);
        let (j, l) = (col / n, col % n);
        um[(k, j)] * um[(l, i)]
    }))
}

/// `tr(Λ(U) H) = Σ_{i,j} u_iᵗ H_{(j,i)} u_j` without building `Λ(U)`.
pub fn lambda_trace(u: &OrthogonalPoint, h: &DenseMatrix) -> Result<f64> {
    let n = u.n();
    if h.shape() != (n * n, n * n) {
        return Err(Error::dim(format!("Hessian is {}x{}, expected {}x{}", h.rows(), h.cols(), n * n, n * n)));
    }
    let mut total = 0.0;
    for i in 0..n {
        let ui = u.column(i);
        for j in 0..n {
            let uj = u.column(j);
            // block (j, i): rows j*n.., columns i*n..
            for k in 0..n {
                let mut hk = 0.0;
                for l in 0..n {
                    hk += h[(j * n + l, i * n + k)] * ui[l];
                }
                total += hk * uj[k];
            }
        }
    }
    Ok(total)
}

/// `Σ(U) = ½([∇f]ᵗU + Uᵗ[∇f])`.
pub fn sigma_matrix(f: &ScalarField, u: &OrthogonalPoint) -> Result<DenseMatrix> {
    check_field(f, u)?;
    let g = numkit::unvec(&f.gradient(u.as_vec()), u.n())?;
    let gtu = &g.transpose() * u.matrix();
    Ok(gtu.symmetrized())
}

/// Entries of `Σ(U)` in constraint order: diagonal first, then the upper
/// triangle lexicographically.
pub fn sigma_in_constraint_order(sigma: &DenseMatrix) -> Vec<f64> {
    let n = sigma.rows();
    let mut out: Vec<f64> = (0..n).map(|a| sigma[(a, a)]).collect();
    out.extend(IndexPairSet::new(n).iter().map(|(b, c)| sigma[(b, c)]));
    out
}

/// Closed-form Laplace-Beltrami operator on O(n).
///
/// The report uses the same layout as the general route: `trace_main =
/// ½(Δf − tr(ΛH))`, `sigma` lists `Σ(U)` in constraint order and the
/// constraint traces are `½(n − ‖u_a‖²)` and `−⟨u_b, u_c⟩`.
pub fn on_laplacian(f: &ScalarField, u: &OrthogonalPoint) -> Result<LaplacianReport> {
    check_field(f, u)?;
    let n = u.n();
    let h = f.hessian(u.as_vec());
    let trace_main = 0.5 * (h.trace() - lambda_trace(u, &h)?);
    let sigma = sigma_in_constraint_order(&sigma_matrix(f, u)?);
    let mut trace_constraint: Vec<f64> =
        (0..n).map(|a| 0.5 * (n as f64 - dot(u.column(a), u.column(a)))).collect();
    trace_constraint.extend(IndexPairSet::new(n).iter().map(|(b, c)| -dot(u.column(b), u.column(c))));
    Ok(LaplacianReport::assemble(sigma, trace_main, trace_constraint, 1.0))
}

fn check_square(a: &DenseMatrix, u: &OrthogonalPoint, what: &str) -> Result<()> {
    if a.shape() != (u.n(), u.n()) {
        return Err(Error::dim(format!("{what} is {}x{}, point is in O({})", a.rows(), a.cols(), u.n())));
    }
    Ok(())
}

/// `p₁(U) = tr(AU)`.
pub fn p1(a: &DenseMatrix, u: &OrthogonalPoint) -> f64 {
    (a * u.matrix()).trace()
}

/// `p₁,₁(U) = tr(AU)²`.
pub fn p11(a: &DenseMatrix, u: &OrthogonalPoint) -> f64 {
    p1(a, u).powi(2)
}

/// `p₂(U) = tr((AU)²)`.
pub fn p2(a: &DenseMatrix, u: &OrthogonalPoint) -> f64 {
    let au = a * u.matrix();
    (&au * &au).trace()
}

/// `Δ p̃₁ = −((n−1)/2) p̃₁`.
pub fn p1_laplacian(a: &DenseMatrix, u: &OrthogonalPoint) -> Result<f64> {
    check_square(a, u, "A")?;
    Ok(-0.5 * (u.n() as f64 - 1.0) * p1(a, u))
}

/// `Δ p̃₁,₁ = tr(AAᵗ) − (n−1) p̃₁,₁ − p̃₂`.
pub fn p11_laplacian(a: &DenseMatrix, u: &OrthogonalPoint) -> Result<f64> {
    check_square(a, u, "A")?;
    Ok(a.frobenius_dot(a) - (u.n() as f64 - 1.0) * p11(a, u) - p2(a, u))
}

/// `Δ p̃₂ = tr(AAᵗ) − (n−1) p̃₂ − p̃₁,₁`.
pub fn p2_laplacian(a: &DenseMatrix, u: &OrthogonalPoint) -> Result<f64> {
    check_square(a, u, "A")?;
    Ok(a.frobenius_dot(a) - (u.n() as f64 - 1.0) * p2(a, u) - p11(a, u))
}

/// Brockett function `G(U) = tr(UᵗAUN)` with `N = diag(μ)`.
pub fn brockett(a: &DenseMatrix, mu: &[f64], u: &OrthogonalPoint) -> f64 {
    (0..u.n()).map(|k| mu[k] * dot(u.column(k), &a.mul_vec(u.column(k)).expect("square"))).sum()
}

fn check_brockett(a: &DenseMatrix, mu: &[f64], n: usize) -> Result<()> {
    if a.shape() != (n, n) || mu.len() != n {
        return Err(Error::dim(format!("Brockett data: A is {}x{}, μ has {} entries, n = {n}", a.rows(), a.cols(), mu.len())));
    }
    let tol = Tolerances::default().equality * a.max_abs().max(1.0);
    if a.asymmetry() > tol {
        return Err(Error::Contract(format!("Brockett matrix A is not symmetric (defect {:.3e})", a.asymmetry())));
    }
    Ok(())
}

/// `Δ G̃ = −(n−1)G̃ + tr(N)tr(A) − tr((Σ_k μ_k u_k u_kᵗ) A)`.
pub fn brockett_laplacian(a: &DenseMatrix, mu: &[f64], u: &OrthogonalPoint) -> Result<f64> {
    let n = u.n();
    check_brockett(a, mu, n)?;
    let weighted = (0..n).fold(DenseMatrix::zeros(n, n), |acc, k| {
        &acc + &DenseMatrix::outer(u.column(k), u.column(k)).scale(mu[k])
    });
    let tr_n: f64 = mu.iter().sum();
    Ok(-(n as f64 - 1.0) * brockett(a, mu, u) + tr_n * a.trace() - (&weighted * a).trace())
}

/// `p₁` over ℝ^{n²}: gradient `vec(Aᵗ)`, zero Hessian.
pub fn p1_field(a: &DenseMatrix) -> Result<ScalarField> {
    require_square_data(a)?;
    let n = a.rows();
    let b = a.transpose().into_data();
    let b2 = b.clone();
    Ok(ScalarField::analytic(n * n, move |u| dot(&b, u), move |_| b2.clone(), move |_| DenseMatrix::zeros(n * n, n * n)))
}

/// `p₁,₁` over ℝ^{n²}: gradient `2 tr(AU) vec(B)`, Hessian `2 vec(B) vec(B)ᵗ`, `B = Aᵗ`.
pub fn p11_field(a: &DenseMatrix) -> Result<ScalarField> {
    require_square_data(a)?;
    let n = a.rows();
    let b = a.transpose().into_data();
    let b1 = b.clone();
    let hess = DenseMatrix::outer(&b, &b).scale(2.0);
    Ok(ScalarField::analytic(
        n * n,
        move |u| dot(&b, u).powi(2),
        move |u| {
            let t = 2.0 * dot(&b1, u);
            b1.iter().map(|x| t * x).collect()
        },
        move |_| hess.clone(),
    ))
}

/// `p₂` over ℝ^{n²}: gradient `vec(2AᵗUᵗAᵗ)`, Hessian with block `(i, j)` equal
/// to `2 b_j b_iᵗ` where `b_i` are the columns of `B = Aᵗ`.
pub fn p2_field(a: &DenseMatrix) -> Result<ScalarField> {
    require_square_data(a)?;
    let n = a.rows();
    let a_val = a.clone();
    let a_grad = a.clone();
    let b = a.transpose();
    let hess = DenseMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, k) = (row / n, row % n);
        let (j, l) = (col / n, col % n);
        2.0 * b[(k, j)] * b[(l, i)]
    });
    Ok(ScalarField::analytic(
        n * n,
        move |u| {
            let um = DenseMatrix::new(n, n, u.to_vec()).expect("n² entries");
            let au = &a_val * &um;
            (&au * &au).trace()
        },
        move |u| {
            let um = DenseMatrix::new(n, n, u.to_vec()).expect("n² entries");
            let at = a_grad.transpose();
            (&(&at * &um.transpose()) * &at).scale(2.0).into_data()
        },
        move |_| hess.clone(),
    ))
}

/// Brockett `G(U) = tr(UᵗAUN)` over ℝ^{n²}: gradient `vec(2AUN)`, Hessian `2N ⊗ A`.
pub fn brockett_field(a: &DenseMatrix, mu: &[f64]) -> Result<ScalarField> {
    require_square_data(a)?;
    let n = a.rows();
    check_brockett(a, mu, n)?;
    let nmat = DenseMatrix::diagonal(mu);
    let hess = nmat.kron(a).scale(2.0);
    let (a1, a2, mu1, mu2) = (a.clone(), a.clone(), mu.to_vec(), mu.to_vec());
    Ok(ScalarField::analytic(
        n * n,
        move |u| (0..n).map(|k| mu1[k] * dot(&u[k * n..(k + 1) * n], &a1.mul_vec(&u[k * n..(k + 1) * n]).unwrap())).sum(),
        move |u| {
            let mut g = Vec::with_capacity(n * n);
            for k in 0..n {
                g.extend(a2.mul_vec(&u[k * n..(k + 1) * n]).unwrap().into_iter().map(|x| 2.0 * mu2[k] * x));
            }
            g
        },
        move |_| hess.clone(),
    ))
}

fn require_square_data(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(format!("coefficient matrix must be square, got {}x{}", a.rows(), a.cols())));
    }
    require_n(a.rows())
}

/// Deterministic sample from O(n): Gram-Schmidt on a seeded Gaussian matrix,
/// with the triangular factor's diagonal kept positive.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<OrthogonalPoint> {
    require_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_orthogonal_with(n, &mut rng)
}

pub fn random_orthogonal_with<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalPoint> {
    require_n(n)?;
    loop {
        let g = DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
        if let Ok((q, _)) = numkit::orthonormalize_columns(&g, 1e-8) {
            return OrthogonalPoint::with_tolerance(q, 1e-12);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_core::{laplace_beltrami_general, on_manifold};

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn index_pairs_are_lexicographic() {
        let p = IndexPairSet::new(4);
        assert_eq!(p.pairs(), &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(p.position(1, 3), Some(4));
        assert_eq!(IndexPairSet::new(6).len(), 15);
    }

    #[test]
    fn constraint_values_at_identity() {
        let c = on_constraint_set(2).unwrap();
        let u = numkit::vec(&DenseMatrix::identity(2)).unwrap();
        let vals: Vec<f64> = c.constraints().iter().map(|f| f.value(&u)).collect();
        assert_eq!(vals, vec![0.5, 0.5, 0.0]);
        assert_eq!(c.regular_value(), &[0.5, 0.5, 0.0]);
        assert!(on_manifold(&on_constraint_set(3).unwrap(), OrthogonalPoint::identity(3).as_vec(), 1e-12).unwrap().0);
    }

    #[test]
    fn constraint_hessian_blocks() {
        let n = 3;
        let c = on_constraint_set(n).unwrap();
        let u = random_orthogonal(n, 4).unwrap();
        let id = DenseMatrix::identity(n);
        let zero = DenseMatrix::zeros(n, n);
        let h_11 = c.constraints()[1].hessian(u.as_vec());
        for i in 0..n {
            for j in 0..n {
                let expected = if i == 1 && j == 1 { &id } else { &zero };
                assert_eq!(&h_11.block(i, j, n), expected);
            }
        }
        // F_{0,2} sits at position n + 1.
        let h_02 = c.constraints()[n + 1].hessian(u.as_vec());
        for i in 0..n {
            for j in 0..n {
                let on = (i, j) == (0, 2) || (i, j) == (2, 0);
                assert_eq!(&h_02.block(i, j, n), if on { &id } else { &zero });
            }
        }
    }

    #[test]
    fn theta_examples() {
        let t = theta_basis(2).unwrap();
        assert_eq!(t[0], DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap());
        let basis = theta_basis(5).unwrap();
        for (i, a) in basis.iter().enumerate() {
            assert_eq!(a.transpose(), -a);
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert_eq!(a.frobenius_dot(b), expected);
            }
        }
    }

    #[test]
    fn frame_at_identity_in_two_dimensions() {
        let t = on_frame(&OrthogonalPoint::identity(2)).unwrap();
        assert_eq!(t.data(), &[0.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn frame_columns_match_explicit_products() {
        let u = random_orthogonal(4, 9).unwrap();
        let t = on_frame(&u).unwrap();
        for (k, th) in theta_basis(4).unwrap().iter().enumerate() {
            let w = numkit::vec(&(u.matrix() * th)).unwrap();
            let diff = t.column(k).iter().zip(w.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-15);
        }
    }

    #[test]
    fn frame_is_tangent_and_gram_is_twice_identity() {
        for n in 2..=5 {
            let u = random_orthogonal(n, n as u64).unwrap();
            let t = on_frame(&u).unwrap();
            let (_, _, d) = dimensions(n);
            assert!((&t.transpose() * &t).max_abs_diff(&DenseMatrix::identity(d).scale(2.0)) < 1e-12);
            let c = on_constraint_set(n).unwrap();
            let cols: Vec<Vec<f64>> = t.columns().map(<[f64]>::to_vec).collect();
            let leak = numkit::gram(&c.gradients(u.as_vec()), &cols).unwrap();
            assert!(leak.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn lambda_at_identity_is_commutation_matrix() {
        let n = 3;
        let l = lambda_of(&OrthogonalPoint::identity(n)).unwrap();
        let m = random_matrix(n, 1);
        let vm = numkit::vec(&m).unwrap();
        let vt = numkit::vec(&m.transpose()).unwrap();
        assert_eq!(l.mul_vec(&vm).unwrap(), vt.into_inner());
        assert_eq!(&l * &l, DenseMatrix::identity(n * n));
        assert_eq!(l.trace(), n as f64);
    }

    #[test]
    fn frame_outer_product_is_identity_minus_lambda() {
        let u = random_orthogonal(4, 21).unwrap();
        let t = on_frame(&u).unwrap();
        let l = lambda_of(&u).unwrap();
        let lhs = &(&t * &t.transpose()) + &l;
        assert!(lhs.max_abs_diff(&DenseMatrix::identity(16)) < 1e-12);
    }

    #[test]
    fn lambda_trace_matches_materialized() {
        for n in 2..=4 {
            let u = random_orthogonal(n, 100 + n as u64).unwrap();
            let h = random_matrix(n * n, 7);
            let direct = (&lambda_of(&u).unwrap() * &h).trace();
            assert!((lambda_trace(&u, &h).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_of_p1_at_identity() {
        let s = sigma_matrix(&p1_field(&DenseMatrix::identity(3)).unwrap(), &OrthogonalPoint::identity(3)).unwrap();
        assert_eq!(s, DenseMatrix::identity(3));
        let a = random_matrix(3, 2);
        let u = random_orthogonal(3, 5).unwrap();
        let f = p2_field(&a).unwrap();
        let s = sigma_matrix(&f, &u).unwrap();
        assert_eq!(s.asymmetry(), 0.0);
        let g = numkit::unvec(&f.gradient(u.as_vec()), 3).unwrap();
        assert!((s.trace() - (&u.matrix().transpose() * &g).trace()).abs() < 1e-12);
    }

    #[test]
    fn sigma_matrix_matches_general_multipliers() {
        let n = 3;
        let a = random_matrix(n, 12);
        let u = random_orthogonal(n, 13).unwrap();
        let f = p11_field(&a).unwrap();
        let general = crate::constraint_core::lagrange_multipliers(&on_constraint_set(n).unwrap(), &f, u.as_vec()).unwrap();
        let closed = sigma_in_constraint_order(&sigma_matrix(&f, &u).unwrap());
        for (g, c) in general.iter().zip(&closed) {
            assert!((g - c).abs() < 1e-10);
        }
    }

    #[test]
    fn power_sum_examples_at_identity() {
        let i2 = DenseMatrix::identity(2);
        let u = OrthogonalPoint::identity(2);
        assert_eq!(p1_laplacian(&i2, &u).unwrap(), -1.0);
        assert_eq!(p11_laplacian(&i2, &u).unwrap(), -4.0);
        assert_eq!(p2_laplacian(&i2, &u).unwrap(), -4.0);
        let z = DenseMatrix::zeros(2, 2);
        assert_eq!(p1_laplacian(&z, &u).unwrap(), 0.0);
        assert_eq!(p11_laplacian(&z, &u).unwrap(), 0.0);
        assert_eq!(p2_laplacian(&z, &u).unwrap(), 0.0);
        assert!(matches!(p1_laplacian(&DenseMatrix::identity(3), &u), Err(Error::Dimension(_))));
    }

    #[test]
    fn on_laplacian_examples() {
        let u = random_orthogonal(4, 77).unwrap();
        assert_eq!(on_laplacian(&ScalarField::constant(16, 2.0), &u).unwrap().value, 0.0);
        let a = random_matrix(4, 78);
        let rep = on_laplacian(&p1_field(&a).unwrap(), &u).unwrap();
        assert!((rep.value - p1_laplacian(&a, &u).unwrap()).abs() < 1e-12);
        let rep = on_laplacian(&p1_field(&DenseMatrix::identity(2)).unwrap(), &OrthogonalPoint::identity(2)).unwrap();
        assert!((rep.value + 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_on_laplacian() {
        let n = 4;
        let a = random_matrix(n, 31);
        let u = random_orthogonal(n, 32).unwrap();
        let via = |f: ScalarField| on_laplacian(&f, &u).unwrap().value;
        assert!((via(p11_field(&a).unwrap()) - p11_laplacian(&a, &u).unwrap()).abs() < 1e-10);
        assert!((via(p2_field(&a).unwrap()) - p2_laplacian(&a, &u).unwrap()).abs() < 1e-10);
        let s = a.symmetrized();
        let mu = [0.3, -1.0, 2.0, 0.7];
        assert!((via(brockett_field(&s, &mu).unwrap()) - brockett_laplacian(&s, &mu, &u).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn on_laplacian_matches_general_route() {
        let n = 3;
        let a = random_matrix(n, 41);
        let u = random_orthogonal(n, 42).unwrap();
        let c = on_constraint_set(n).unwrap();
        let frame = on_adapted_frame(n);
        for f in [p1_field(&a).unwrap(), p11_field(&a).unwrap(), p2_field(&a).unwrap()] {
            let general = laplace_beltrami_general(&f, &c, &frame, u.as_vec(), &Tolerances::default()).unwrap();
            let closed = on_laplacian(&f, &u).unwrap();
            assert!((general.value - closed.value).abs() < 1e-10);
            assert!((general.frame_gram_condition - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn brockett_degenerate_and_contract() {
        let u = random_orthogonal(3, 3).unwrap();
        let a = random_matrix(3, 4).symmetrized();
        assert!(brockett_laplacian(&a, &[1.0, 1.0, 1.0], &u).unwrap().abs() < 1e-12);
        assert_eq!(brockett_laplacian(&DenseMatrix::zeros(3, 3), &[1.0, 2.0, 3.0], &u).unwrap(), 0.0);
        let asym = random_matrix(3, 5);
        assert!(matches!(brockett_laplacian(&asym, &[1.0, 2.0, 3.0], &u), Err(Error::Contract(_))));
        assert!(brockett_field(&asym, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn random_orthogonal_contract() {
        let u = random_orthogonal(5, 17).unwrap();
        assert!(orthogonality_defect(u.matrix()) <= 1e-12);
        assert_eq!(u, random_orthogonal(5, 17).unwrap());
        assert_ne!(u, random_orthogonal(5, 18).unwrap());
        for seed in 0..20 {
            let m = random_orthogonal(2, seed).unwrap();
            let m = m.matrix();
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            assert!((det.abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthogonal_input() {
        let m = DenseMatrix::from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]).unwrap();
        assert!(matches!(OrthogonalPoint::new(m), Err(Error::NotOrthogonal { .. })));
        assert!(on_adapted_frame(2).at(&[1.0, 0.1, 0.0, 1.0]).is_err());
    }
}
