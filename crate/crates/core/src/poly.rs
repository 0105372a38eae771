//! Sparse multivariate polynomials with exact derivatives.
//!
//! Used as the stock analytic [`ScalarField`] for random test fields, for the
//! harmonic bases on the 2-sphere and for user-supplied job functions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraint_core::ScalarField;
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// One monomial `coef · Π x_v^p` stored as sorted `(variable, power)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub powers: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolynomial")]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Term>,
}

#[derive(Deserialize)]
struct RawPolynomial {
    dim: usize,
    terms: Vec<Term>,
}

impl TryFrom<RawPolynomial> for Polynomial {
    type Error = Error;

    fn try_from(raw: RawPolynomial) -> Result<Self> {
        Polynomial::new(raw.dim, raw.terms)
    }
}

fn canonical(powers: &[(usize, u32)]) -> Vec<(usize, u32)> {
    let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
    for &(v, p) in powers {
        *merged.entry(v).or_default() += p;
    }
    merged.into_iter().filter(|&(_, p)| p > 0).collect()
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Term>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::dim("polynomial over a zero-dimensional space"));
        }
        for t in &terms {
            if !t.coef.is_finite() {
                return Err(Error::Contract("non-finite polynomial coefficient".into()));
            }
            if let Some(&(v, _)) = t.powers.iter().find(|&&(v, _)| v >= dim) {
                return Err(Error::dim(format!("variable {v} in a polynomial over ℝ^{dim}")));
            }
        }
        let mut p = Polynomial { dim, terms: Vec::new() };
        for t in terms {
            p.push(t.coef, &t.powers);
        }
        Ok(p)
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.push(c, &[]);
        p
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::monomial(dim, 1.0, &[(i, 1)])
    }

    pub fn monomial(dim: usize, coef: f64, powers: &[(usize, u32)]) -> Self {
        assert!(powers.iter().all(|&(v, _)| v < dim), "variable out of range");
        let mut p = Self::zero(dim);
        p.push(coef, powers);
        p
    }

    /// `⟨c, x⟩`.
    pub fn linear(c: &[f64]) -> Self {
        let mut p = Self::zero(c.len());
        for (i, &ci) in c.iter().enumerate() {
            p.push(ci, &[(i, 1)]);
        }
        p
    }

    /// `‖x‖²`.
    pub fn squared_norm(dim: usize) -> Self {
        let mut p = Self::zero(dim);
        for i in 0..dim {
            p.push(1.0, &[(i, 2)]);
        }
        p
    }

    /// Random polynomial of total degree at most `degree` with `n_terms`
    /// monomials and coefficients uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, degree: u32, n_terms: usize, rng: &mut R) -> Self {
        let mut p = Self::zero(dim);
        for _ in 0..n_terms {
            let deg = rng.random_range(0..=degree);
            let powers: Vec<(usize, u32)> = (0..deg).map(|_| (rng.random_range(0..dim), 1)).collect();
            p.push(rng.random_range(-1.0..=1.0), &powers);
        }
        p
    }

    fn push(&mut self, coef: f64, powers: &[(usize, u32)]) {
        if coef == 0.0 {
            return;
        }
        let powers = canonical(powers);
        match self.terms.iter_mut().find(|t| t.powers == powers) {
            Some(t) => t.coef += coef,
            None => self.terms.push(Term { coef, powers }),
        }
        self.terms.retain(|t| t.coef != 0.0);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().map(|p| p.1).sum()).max().unwrap_or(0)
    }

    /// `Some(k)` when every term has total degree `k`.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degrees = self.terms.iter().map(|t| t.powers.iter().map(|p| p.1).sum::<u32>());
        let first = degrees.next().unwrap_or(0);
        degrees.all(|d| d == first).then_some(first)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.dim);
        for t in &self.terms {
            p.push(s * t.coef, &t.powers);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut p = self.clone();
        for t in &other.terms {
            p.push(t.coef, &t.powers);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut p = Self::zero(self.dim);
        for a in &self.terms {
            for b in &other.terms {
                let mut powers = a.powers.clone();
                powers.extend_from_slice(&b.powers);
                p.push(a.coef * b.coef, &powers);
            }
        }
        p
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.powers.iter().map(|&(v, p)| x[v].powi(p as i32)).product::<f64>())
            .sum()
    }

    /// `∂/∂x_var`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for t in &self.terms {
            if let Some(&(_, pw)) = t.powers.iter().find(|&&(v, _)| v == var) {
                let powers: Vec<(usize, u32)> =
                    t.powers.iter().map(|&(v, q)| if v == var { (v, q - 1) } else { (v, q) }).collect();
                p.push(t.coef * pw as f64, &powers);
            }
        }
        p
    }

    /// Euclidean Laplacian `Σ ∂²/∂x_i²`.
    pub fn laplacian(&self) -> Self {
        (0..self.dim).fold(Self::zero(self.dim), |acc, i| acc.add(&self.derivative(i).derivative(i)))
    }

    /// Analytic scalar field backed by precomputed derivative polynomials.
    pub fn to_field(&self) -> ScalarField {
        let dim = self.dim;
        let grad: Vec<Polynomial> = (0..dim).map(|i| self.derivative(i)).collect();
        let mut hess: Vec<(usize, usize, Polynomial)> = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let h = grad[i].derivative(j);
                if !h.terms.is_empty() {
                    hess.push((i, j, h));
                }
            }
        }
        let value_poly = self.clone();
        ScalarField::analytic(
            dim,
            move |x| value_poly.value(x),
            move |x| grad.iter().map(|g| g.value(x)).collect(),
            move |x| {
                let mut m = DenseMatrix::zeros(dim, dim);
                for (i, j, h) in &hess {
                    let v = h.value(x);
                    m[(*i, *j)] = v;
                    m[(*j, *i)] = v;
                }
                m
            },
        )
    }
}

/// Hand-built bases of harmonic homogeneous polynomials on ℝ³ of degree
/// `k ∈ {1, 2, 3, 4}`; each basis has `2k + 1` members.
pub fn harmonic_basis_r3(k: u32) -> Vec<Polynomial> {
    let x = Polynomial::coordinate(3, 0);
    let y = Polynomial::coordinate(3, 1);
    let z = Polynomial::coordinate(3, 2);
    let r2 = Polynomial::squared_norm(3);
    let m = |a: &Polynomial, b: &Polynomial| a.mul(b);
    match k {
        1 => vec![x, y, z],
        2 => vec![
            m(&x, &y),
            m(&y, &z),
            m(&x, &z),
            m(&x, &x).sub(&m(&y, &y)),
            m(&x, &x).add(&m(&y, &y)).sub(&m(&z, &z).scale(2.0)),
        ],
        3 => {
            let xx = m(&x, &x);
            let yy = m(&y, &y);
            let zz = m(&z, &z);
            let q = zz.scale(4.0).sub(&xx).sub(&yy);
            vec![
                m(&m(&x, &y), &z),
                m(&x, &xx.sub(&yy.scale(3.0))),
                m(&y, &xx.scale(3.0).sub(&yy)),
                m(&z, &xx.sub(&yy)),
                m(&x, &q),
                m(&y, &q),
                m(&z, &zz.scale(2.0).sub(&xx.scale(3.0)).sub(&yy.scale(3.0))),
            ]
        }
        4 => {
            let xx = m(&x, &x);
            let yy = m(&y, &y);
            let zz = m(&z, &z);
            let seven_zz_r2 = zz.scale(7.0).sub(&r2);
            let seven_zz_3r2 = zz.scale(7.0).sub(&r2.scale(3.0));
            vec![
                m(&xx, &xx).sub(&m(&xx, &yy).scale(6.0)).add(&m(&yy, &yy)),
                m(&m(&x, &y), &xx.sub(&yy)),
                m(&z, &m(&x, &xx.sub(&yy.scale(3.0)))),
                m(&z, &m(&y, &xx.scale(3.0).sub(&yy))),
                m(&xx.sub(&yy), &seven_zz_r2),
                m(&m(&x, &y), &seven_zz_r2),
                m(&m(&x, &z), &seven_zz_3r2),
                m(&m(&y, &z), &seven_zz_3r2),
                m(&zz, &zz).scale(35.0).sub(&m(&zz, &r2).scale(30.0)).add(&m(&r2, &r2).scale(3.0)),
            ]
        }
        _ => panic!("harmonic basis implemented for degrees 1..=4"),
    }
}
