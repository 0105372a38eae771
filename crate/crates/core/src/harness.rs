//! Verification suites behind `conlap verify`.
//!
//! Each suite sweeps dimensions and seeded random draws, compares two
//! independent computations of the same quantity and records the worst
//! deviation against a pinned tolerance. Results are deterministic for fixed
//! options; work is spread over threads and gathered in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::constraint_core::{laplace_beltrami_general, ScalarField};
use crate::error::Result;
use crate::numkit::DenseMatrix;
use crate::oracles::{self, OracleConfig};
use crate::orthogonal::{self as on, OrthogonalPoint};
use crate::poly::Polynomial;
use crate::sphere::{self, SpherePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    LemmasSphere,
    LemmasOn,
    TheoremEquivalence,
    Eigenfunctions,
    Oracle,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::LemmasSphere => "lemmas-sphere",
            Suite::LemmasOn => "lemmas-on",
            Suite::TheoremEquivalence => "theorem-equivalence",
            Suite::Eigenfunctions => "eigenfunctions",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::LemmasSphere,
                Suite::LemmasOn,
                Suite::TheoremEquivalence,
                Suite::Eigenfunctions,
                Suite::Oracle,
            ],
            s => vec![s],
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Suite::LemmasSphere,
            Suite::LemmasOn,
            Suite::TheoremEquivalence,
            Suite::Eigenfunctions,
            Suite::Oracle,
            Suite::All,
        ]
        .into_iter()
        .find(|x| x.name() == s)
        .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub n_min: usize,
    pub n_max: usize,
    /// Random draws per dimension.
    pub seeds: usize,
    /// Replaces every per-check tolerance when set.
    pub tol_override: Option<f64>,
    /// Geodesic-oracle step.
    pub h: f64,
    pub tolerances: Tolerances,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { n_min: 2, n_max: 4, seeds: 5, tol_override: None, h: 1e-3, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub n_min: usize,
    pub n_max: usize,
    pub seeds: usize,
    pub h: f64,
    pub convergence_h: f64,
    pub tol_override: Option<f64>,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
    pub environment: Environment,
}

/// Step for the convergence and basis-independence checks, large enough that roundoff
/// in the second difference stays far below the truncation error.
pub const CONVERGENCE_H: f64 = 1e-2;

/// Accumulates the worst deviation of one named check.
struct Check {
    name: String,
    tolerance: f64,
    worst: f64,
    failed: bool,
}

impl Check {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self { name: name.into(), tolerance, worst: 0.0, failed: false }
    }

    fn observe(&mut self, deviation: f64) {
        if deviation.is_nan() {
            self.failed = true;
        }
        self.worst = self.worst.max(deviation);
    }

    fn observe_result(&mut self, deviation: Result<f64>) {
        match deviation {
            Ok(d) => self.observe(d),
            Err(_) => {
                self.failed = true;
                self.worst = f64::INFINITY;
            }
        }
    }

    fn finish(self, tol_override: Option<f64>) -> CheckRecord {
        let tolerance = tol_override.unwrap_or(self.tolerance);
        CheckRecord {
            pass: !self.failed && self.worst <= tolerance,
            name: self.name,
            max_deviation: self.worst,
            tolerance,
        }
    }
}

fn rng_for(suite: &str, n: usize, draw: usize) -> ChaCha8Rng {
    let tag = suite.bytes().fold(0xcbf29ce484222325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
    ChaCha8Rng::seed_from_u64(tag ^ ((n as u64) << 32) ^ draw as u64)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_sphere_point<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> SpherePoint {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(p) = SpherePoint::project(&v, radius) {
            return p;
        }
    }
}

/// Runs a suite; `All` concatenates the others in a fixed order.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let checks: Vec<CheckRecord> = suite
        .parts()
        .into_iter()
        .flat_map(|s| {
            let raw = match s {
                Suite::LemmasSphere => lemmas_sphere(opts),
                Suite::LemmasOn => lemmas_on(opts),
                Suite::TheoremEquivalence => theorem_equivalence(opts),
                Suite::Eigenfunctions => eigenfunctions(opts),
                Suite::Oracle => oracle(opts),
                Suite::All => unreachable!(),
            };
            raw.into_iter().map(|c| c.finish(opts.tol_override)).collect::<Vec<_>>()
        })
        .collect();
    VerifyReport {
        suite: suite.name().to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        environment: Environment {
            n_min: opts.n_min,
            n_max: opts.n_max,
            seeds: opts.seeds,
            h: opts.h,
            convergence_h: CONVERGENCE_H,
            tol_override: opts.tol_override,
            tolerances: opts.tolerances,
        },
    }
}

/// Runs `per_draw` for every dimension and draw in parallel, then folds the
/// deviation vectors into `checks` in (n, draw) order.
fn sweep<F>(opts: &VerifyOptions, suite: &str, n_floor: usize, mut checks: Vec<Check>, per_draw: F) -> Vec<Check>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<Result<f64>> + Sync,
{
    let jobs: Vec<(usize, usize)> =
        (opts.n_min.max(n_floor)..=opts.n_max).flat_map(|n| (0..opts.seeds).map(move |d| (n, d))).collect();
    let results: Vec<Vec<Result<f64>>> =
        jobs.par_iter().map(|&(n, d)| per_draw(n, &mut rng_for(suite, n, d))).collect();
    for row in results {
        assert_eq!(row.len(), checks.len(), "per-draw result count must match the check list");
        for (c, r) in checks.iter_mut().zip(row) {
            c.observe_result(r);
        }
    }
    checks
}

fn lemmas_sphere(opts: &VerifyOptions) -> Vec<Check> {
    let eq = opts.tolerances.equality;
    let checks = vec![
        Check::new("sphere/frame-tangency", 1e-12),
        Check::new("sphere/frame-gram-inverse", eq),
        Check::new("sphere/projector", eq),
        Check::new("sphere/projector-chart-independence", eq),
        Check::new("sphere/sigma-vs-general", eq),
    ];
    sweep(opts, "lemmas-sphere", 2, checks, |n, rng| {
        let radius = rng.random_range(0.5..3.0);
        let x = random_sphere_point(n, radius, rng);
        let f = Polynomial::random(n, 3, 6, rng).to_field();
        let mut tangency = 0.0_f64;
        let mut gram_inv = 0.0_f64;
        let mut proj = 0.0_f64;
        let mut projectors = Vec::new();
        for j in x.valid_charts() {
            let t = match sphere::sphere_frame(&x, j) {
                Ok(t) => t,
                Err(e) => return vec![Err(e.clone()), Err(e.clone()), Err(e.clone()), Err(e.clone()), Err(e)],
            };
            for c in t.columns() {
                tangency = tangency.max(crate::numkit::dot(c, x.coords()).abs() / (radius * radius));
            }
            let gram = &t.transpose() * &t;
            let inv = sphere::sphere_frame_gram_inverse(&x, j).expect("valid chart");
            gram_inv = gram_inv.max((&gram * &inv).max_abs_diff(&DenseMatrix::identity(n - 1)));
            let composed = &t * &crate::numkit::left_moore_penrose(&t).expect("full rank frame");
            let closed = sphere::sphere_projector(&x, j).expect("valid chart");
            proj = proj.max(composed.max_abs_diff(&closed));
            projectors.push(closed);
        }
        let spread = projectors.iter().map(|p| p.max_abs_diff(&projectors[0])).fold(0.0, f64::max);
        let sigma = (|| {
            let c = sphere::sphere_constraint_set(n, radius)?;
            let general = crate::constraint_core::lagrange_multipliers(&c, &f, x.coords())?;
            Ok((general[0] - sphere::sphere_sigma(&f, &x)?).abs())
        })();
        vec![Ok(tangency), Ok(gram_inv), Ok(proj), Ok(spread), sigma]
    })
}

fn lemmas_on(opts: &VerifyOptions) -> Vec<Check> {
    let eq = opts.tolerances.equality;
    let checks = vec![
        Check::new("on/frame-gram-is-2I", eq),
        Check::new("on/frame-outer-plus-lambda-is-I", eq),
        Check::new("on/lambda-involution", eq),
        Check::new("on/lambda-trace-is-n", eq),
        Check::new("on/frame-tangency", 1e-12),
    ];
    sweep(opts, "lemmas-on", 2, checks, |n, rng| {
        let u = match on::random_orthogonal_with(n, rng) {
            Ok(u) => u,
            Err(e) => return vec![Err(e.clone()), Err(e.clone()), Err(e.clone()), Err(e.clone()), Err(e)],
        };
        let t = on::on_frame(&u).expect("n ≥ 2");
        let l = on::lambda_of(&u).expect("n is small");
        let d = t.cols();
        let gram = (&t.transpose() * &t).max_abs_diff(&DenseMatrix::identity(d).scale(2.0));
        let outer = (&(&t * &t.transpose()) + &l).max_abs_diff(&DenseMatrix::identity(n * n));
        let inv = (&l * &l).max_abs_diff(&DenseMatrix::identity(n * n));
        let tr = (l.trace() - n as f64).abs();
        let c = on::on_constraint_set(n).expect("n ≥ 2");
        let cols: Vec<Vec<f64>> = t.columns().map(<[f64]>::to_vec).collect();
        let leak = crate::numkit::gram(&c.gradients(u.as_vec()), &cols).map(|g| g.max_abs());
        vec![Ok(gram), Ok(outer), Ok(inv), Ok(tr), leak]
    })
}

/// Random polynomial on ℝ^{n²} of degree ≤ 4.
fn random_quartic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Polynomial {
    Polynomial::random(n * n, 4, 10, rng)
}

fn theorem_equivalence(opts: &VerifyOptions) -> Vec<Check> {
    let tol = opts.tolerances;
    let checks = vec![
        Check::new("equivalence/sphere-closed-vs-general", 1e-8),
        Check::new("equivalence/on-closed-vs-general", 1e-8),
    ];
    sweep(opts, "theorem-equivalence", 2, checks, |n, rng| {
        let sphere_dev = (|| {
            let radius = rng.random_range(0.5..2.0);
            let x = random_sphere_point(n, radius, rng);
            let f = Polynomial::random(n, 4, 8, rng).to_field();
            let c = sphere::sphere_constraint_set(n, radius)?;
            let general = laplace_beltrami_general(&f, &c, &sphere::sphere_adapted_frame(radius), x.coords(), &tol)?;
            Ok((general.value - sphere::sphere_laplacian(&f, &x)?).abs())
        })();
        let on_dev = (|| {
            let u = on::random_orthogonal_with(n, rng)?;
            let f = random_quartic(n, rng).to_field();
            let c = on::on_constraint_set(n)?;
            let general = laplace_beltrami_general(&f, &c, &on::on_adapted_frame(n), u.as_vec(), &tol)?;
            Ok((general.value - on::on_laplacian(&f, &u)?.value).abs())
        })();
        vec![sphere_dev, on_dev]
    })
}

fn eigenfunctions(opts: &VerifyOptions) -> Vec<Check> {
    let eq = opts.tolerances.equality;
    let checks = vec![
        Check::new("eigen/p1", eq),
        Check::new("eigen/p11-minus-p2", 1e-9),
        Check::new("closed-form/p1", eq),
        Check::new("closed-form/p11", 1e-8),
        Check::new("closed-form/p2", 1e-8),
        Check::new("closed-form/brockett", 1e-8),
        Check::new("brockett/identity-weights", eq),
        Check::new("p1/bi-invariance", 1e-12),
    ];
    sweep(opts, "eigenfunctions", 2, checks, |n, rng| {
        let a = gaussian_matrix(n, n, rng);
        let s = a.symmetrized();
        let mu: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let u = match on::random_orthogonal_with(n, rng) {
            Ok(u) => u,
            Err(e) => return vec![Err(e); 8],
        };
        let v = on::random_orthogonal_with(n, rng).expect("n ≥ 2");
        let lap = |f: Result<ScalarField>| -> Result<f64> { Ok(on::on_laplacian(&f?, &u)?.value) };
        let nf = n as f64;
        let p1 = on::p1(&a, &u);
        let (p11, p2) = (on::p11(&a, &u), on::p2(&a, &u));
        let eig1 = lap(on::p1_field(&a)).map(|l| (l + 0.5 * (nf - 1.0) * p1).abs());
        let l11 = lap(on::p11_field(&a));
        let l2 = lap(on::p2_field(&a));
        let eig2 = match (&l11, &l2) {
            (Ok(x), Ok(y)) => Ok(((x - y) + (nf - 2.0) * (p11 - p2)).abs()),
            (Err(e), _) | (_, Err(e)) => Err(e.clone()),
        };
        let cf1 = lap(on::p1_field(&a)).and_then(|l| Ok((l - on::p1_laplacian(&a, &u)?).abs()));
        let cf11 = l11.and_then(|l| Ok((l - on::p11_laplacian(&a, &u)?).abs()));
        let cf2 = l2.and_then(|l| Ok((l - on::p2_laplacian(&a, &u)?).abs()));
        let cfb = lap(on::brockett_field(&s, &mu)).and_then(|l| Ok((l - on::brockett_laplacian(&s, &mu, &u)?).abs()));
        let degenerate = on::brockett_laplacian(&s, &vec![1.0; n], &u).map(f64::abs);
        // p1 depends on (A, U) only through tr(AU) = tr((AVᵗ)(VU)).
        let bi = (|| {
            let avt = &a * &v.matrix().transpose();
            let vu = OrthogonalPoint::new(v.matrix() * u.matrix())?;
            Ok((on::p1_laplacian(&a, &u)? - on::p1_laplacian(&avt, &vu)?).abs())
        })();
        vec![eig1, eig2, cf1, cf11, cf2, cfb, degenerate, bi]
    })
}

fn oracle(opts: &VerifyOptions) -> Vec<Check> {
    let h = opts.h;
    let scale = (h / 1e-3).powi(2).max(1.0);
    let plain_tol = opts.tolerances.fd_oracle * scale;
    let rich_tol = 0.1 * opts.tolerances.fd_oracle * scale * scale;
    let plain = OracleConfig { h, richardson: false };
    let rich = OracleConfig { h, richardson: true };
    let checks = vec![
        Check::new("oracle/sphere-geodesic", plain_tol),
        Check::new("oracle/sphere-geodesic-richardson", rich_tol),
        Check::new("oracle/sphere-chart-free", 1e-9),
        Check::new("oracle/on-geodesic", plain_tol),
        Check::new("oracle/on-geodesic-richardson", rich_tol),
        Check::new("oracle/convergence-ratio-minus-4", 1.0),
        Check::new("derivatives/gradient", 1e-6),
        Check::new("derivatives/hessian", 1e-5),
    ];
    sweep(opts, "oracle", 2, checks, |n, rng| {
        let a = gaussian_matrix(n, n, rng).scale(1.0 / (n as f64).sqrt());
        let s = a.symmetrized();
        let mu: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let u = match on::random_orthogonal_with(n, rng) {
            Ok(u) => u,
            Err(e) => return vec![Err(e); 8],
        };
        let radius = rng.random_range(0.5..2.0);
        let x = random_sphere_point(n, radius, rng);
        let sf = Polynomial::random(n, 4, 8, rng).to_field();
        let fields: Vec<ScalarField> = vec![
            on::p1_field(&a).expect("square"),
            on::p11_field(&a).expect("square"),
            on::p2_field(&a).expect("square"),
            on::brockett_field(&s, &mu).expect("symmetric"),
        ];

        let sphere_err = |cfg: &OracleConfig| -> Result<f64> {
            Ok((oracles::geodesic_laplacian_sphere(&sf, &x, cfg)? - sphere::sphere_laplacian(&sf, &x)?).abs())
        };
        // Truncation error depends on the tangent basis once the degree
        // exceeds two, so basis independence is checked on a quadratic, with
        // a step large enough to keep roundoff well under the tolerance.
        let quadratic = Polynomial::random(n, 2, 6, rng).to_field();
        let wide = OracleConfig { h: CONVERGENCE_H, richardson: false };
        let chart_free = (|| {
            let vals: Vec<f64> = (0..n)
                .filter(|&i| x.coords()[i].abs() > 1e-3 * radius)
                .map(|i| oracles::geodesic_laplacian_sphere_dropping(&quadratic, &x, &wide, i))
                .collect::<Result<_>>()?;
            Ok(vals.iter().map(|v| (v - vals[0]).abs()).fold(0.0, f64::max))
        })();
        let on_err = |cfg: &OracleConfig| -> Result<f64> {
            let mut worst = 0.0_f64;
            for f in &fields {
                let closed = on::on_laplacian(f, &u)?.value;
                worst = worst.max((oracles::geodesic_laplacian_on(f, &u, cfg)? - closed).abs());
            }
            Ok(worst)
        };
        // Error ratio e(h) / e(h/2) for central second differences; ≈ 4.
        let convergence = (|| {
            let coarse = OracleConfig { h: CONVERGENCE_H, richardson: false };
            let fine = OracleConfig { h: 0.5 * CONVERGENCE_H, richardson: false };
            let sphere_closed = sphere::sphere_laplacian(&sf, &x)?;
            let mut worst = ((oracles::geodesic_laplacian_sphere(&sf, &x, &coarse)? - sphere_closed)
                / (oracles::geodesic_laplacian_sphere(&sf, &x, &fine)? - sphere_closed)
                - 4.0)
                .abs();
            let brockett = &fields[3];
            let closed = on::on_laplacian(brockett, &u)?.value;
            let ratio = (oracles::geodesic_laplacian_on(brockett, &u, &coarse)? - closed)
                / (oracles::geodesic_laplacian_on(brockett, &u, &fine)? - closed);
            worst = worst.max((ratio - 4.0).abs());
            Ok(if worst.is_nan() { f64::INFINITY } else { worst })
        })();
        let grad_cfg = OracleConfig { h: 1e-5, richardson: false };
        let hess_cfg = OracleConfig { h: 1e-4, richardson: false };
        let constraints = on::on_constraint_set(n).expect("n ≥ 2");
        let all_fields = fields.iter().chain(constraints.constraints());
        let (mut g, mut hs) = (Ok(0.0_f64), Ok(0.0_f64));
        for f in all_fields {
            g = g.and_then(|w| Ok(w.max(oracles::check_gradient(f, u.as_vec(), &grad_cfg)?)));
            hs = hs.and_then(|w| Ok(w.max(oracles::check_hessian(f, u.as_vec(), &hess_cfg)?)));
        }
        vec![sphere_err(&plain), sphere_err(&rich), chart_free, on_err(&plain), on_err(&rich), convergence, g, hs]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::LemmasSphere, Suite::LemmasOn, Suite::TheoremEquivalence, Suite::Eigenfunctions, Suite::Oracle, Suite::All] {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn reports_are_deterministic() {
        let opts = VerifyOptions { n_min: 2, n_max: 3, seeds: 2, ..Default::default() };
        let a = run_suite(Suite::Eigenfunctions, &opts);
        let b = run_suite(Suite::Eigenfunctions, &opts);
        assert_eq!(a, b);
        assert!(a.pass, "{a:#?}");
    }

    #[test]
    fn tolerance_override_can_fail_a_suite() {
        let opts = VerifyOptions { n_min: 3, n_max: 3, seeds: 1, tol_override: Some(0.0), ..Default::default() };
        let r = run_suite(Suite::Oracle, &opts);
        assert!(!r.pass);
        assert_eq!(r.pass, r.checks.iter().all(|c| c.pass));
    }
}
