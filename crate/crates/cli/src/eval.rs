//! `conlap eval`: one JSON record per point, in input order.

use std::path::Path;

use conlap::constraint_core::{laplace_beltrami_general, ConstraintSet};
use conlap::harness::random_sphere_point;
use conlap::numkit::{unvec, DenseMatrix};
use conlap::orthogonal::{self as on, OrthogonalPoint};
use conlap::sphere::{self, SpherePoint};
use conlap::{Error, LaplacianReport, Polynomial, ScalarField, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::job::{read_json, FunctionSpec, JobError, JobSpec, ManifoldSpec, PathKind, PointInput};

enum Manifold {
    Sphere { n: usize, radius: f64 },
    Orthogonal { n: usize },
    Generic(ConstraintSet),
}

impl Manifold {
    fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Sphere { n, .. } => *n,
            Manifold::Orthogonal { n } => n * n,
            Manifold::Generic(c) => c.ambient_dim(),
        }
    }
}

/// A validated job, ready to evaluate.
pub struct PreparedJob {
    manifold: Manifold,
    fields: Fields,
    points: Vec<(String, Vec<f64>)>,
    path: PathKind,
    tolerances: Tolerances,
}

enum Fields {
    Shared(ScalarField),
    PerPoint(Vec<ScalarField>),
}

#[derive(Serialize)]
struct PointRecord<'a> {
    point: &'a str,
    path: PathKind,
    #[serde(flatten)]
    report: LaplacianReport,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    point: &'a str,
    path: PathKind,
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Dimension(_) => "dimension",
        Error::NonFinite(_) => "non-finite",
        Error::Singular { .. } => "singular",
        Error::NotPositiveDefinite { .. } => "not-positive-definite",
        Error::Regularity(_) => "regularity",
        Error::OffManifold { .. } => "off-manifold",
        Error::Chart { .. } => "chart",
        Error::NotOrthogonal { .. } => "not-orthogonal",
        Error::Contract(_) => "contract",
    }
}

/// Exit code for a library error: 4 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_) | Error::NonFinite(_) | Error::Contract(_) => 2,
        _ => 4,
    }
}

fn invalid(msg: impl Into<String>) -> JobError {
    JobError(msg.into())
}

fn lib(e: Error) -> JobError {
    JobError(e.to_string())
}

pub fn prepare(job: JobSpec, base: &Path) -> Result<PreparedJob, JobError> {
    let tolerances = job.options.tolerances;
    let manifold = match &job.manifold {
        ManifoldSpec::Sphere { n, radius } => {
            if *n < 2 {
                return Err(invalid("sphere needs n ≥ 2"));
            }
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(invalid(format!("sphere radius must be positive, got {radius}")));
            }
            Manifold::Sphere { n: *n, radius: *radius }
        }
        ManifoldSpec::Orthogonal { n } => {
            if *n < 2 {
                return Err(invalid("orthogonal group needs n ≥ 2"));
            }
            Manifold::Orthogonal { n: *n }
        }
        ManifoldSpec::Generic { constraints } => {
            let file = constraints.load(base)?;
            let fields = file.constraints.iter().map(Polynomial::to_field).collect();
            Manifold::Generic(ConstraintSet::new(fields, file.regular_value).map_err(lib)?)
        }
    };
    if job.path == PathKind::ClosedForm && matches!(manifold, Manifold::Generic(_)) {
        return Err(invalid("generic manifolds only support the general-frame path"));
    }
    let m = manifold.ambient_dim();

    let mut rng = ChaCha8Rng::seed_from_u64(job.options.seed);
    let mut points = Vec::new();
    for (i, input) in job.points.iter().enumerate() {
        match input {
            PointInput::Vector(v) => points.push((format!("points[{i}]"), v.clone())),
            PointInput::Matrix(mat) => push_matrix(&mut points, &manifold, mat, &format!("points[{i}]"))?,
            PointInput::File { file } => {
                let mat: DenseMatrix = read_json(&base.join(file))?;
                push_matrix(&mut points, &manifold, &mat, &file.display().to_string())?;
            }
            PointInput::Random { random } => {
                for r in 0..*random {
                    let label = format!("points[{i}]#{r}");
                    let coords = match &manifold {
                        Manifold::Sphere { n, radius } => random_sphere_point(*n, *radius, &mut rng).coords().to_vec(),
                        Manifold::Orthogonal { n } => {
                            on::random_orthogonal_with(*n, &mut rng).map_err(lib)?.as_vec().to_vec()
                        }
                        Manifold::Generic(_) => return Err(invalid("random points need a sphere or orthogonal manifold")),
                    };
                    points.push((label, coords));
                }
            }
        }
    }
    if let Some((label, p)) = points.iter().find(|(_, p)| p.len() != m) {
        return Err(invalid(format!("{label} has length {}, the ambient space has dimension {m}", p.len())));
    }

    let fields = build_fields(&job.function, base, m, points.len())?;
    let fields = match (fields, job.options.fd_steps) {
        (fs, None) => fs,
        (Fields::Shared(f), Some(steps)) => Fields::Shared(ScalarField::finite_difference(m, move |u| f.value(u), steps)),
        (Fields::PerPoint(_), Some(_)) => return Err(invalid("fd_steps cannot be combined with sampled derivatives")),
    };
    Ok(PreparedJob { manifold, fields, points, path: job.path, tolerances })
}

fn push_matrix(points: &mut Vec<(String, Vec<f64>)>, manifold: &Manifold, mat: &DenseMatrix, label: &str) -> Result<(), JobError> {
    if let Manifold::Orthogonal { n } = manifold {
        if mat.shape() == (*n, *n) {
            points.push((label.to_string(), mat.data().to_vec()));
            return Ok(());
        }
    }
    if mat.rows() != manifold.ambient_dim() {
        return Err(invalid(format!(
            "{label} is {}x{}; expected one point per column of length {}",
            mat.rows(),
            mat.cols(),
            manifold.ambient_dim()
        )));
    }
    for (j, c) in mat.columns().enumerate() {
        let name = if mat.cols() == 1 { label.to_string() } else { format!("{label}#{j}") };
        points.push((name, c.to_vec()));
    }
    Ok(())
}

fn matrix_field_dim(a: &DenseMatrix, m: usize) -> Result<(), JobError> {
    if !a.is_square() || a.rows() * a.rows() != m {
        return Err(invalid(format!("A is {}x{} but the ambient space has dimension {m}", a.rows(), a.cols())));
    }
    Ok(())
}

fn build_fields(spec: &FunctionSpec, base: &Path, m: usize, count: usize) -> Result<Fields, JobError> {
    let shared = match spec {
        FunctionSpec::P1 { a } | FunctionSpec::P11 { a } | FunctionSpec::P2 { a } | FunctionSpec::Brockett { a, .. } => {
            let a = a.load(base)?;
            matrix_field_dim(&a, m)?;
            match spec {
                FunctionSpec::P1 { .. } => on::p1_field(&a),
                FunctionSpec::P11 { .. } => on::p11_field(&a),
                FunctionSpec::P2 { .. } => on::p2_field(&a),
                FunctionSpec::Brockett { mu, .. } => on::brockett_field(&a, mu),
                _ => unreachable!(),
            }
            .map_err(lib)?
        }
        FunctionSpec::Linear { c } => {
            if c.len() != m {
                return Err(invalid(format!("linear coefficients have length {}, expected {m}", c.len())));
            }
            Polynomial::linear(c).to_field()
        }
        FunctionSpec::Polynomial { polynomial } => {
            let p = polynomial.load(base)?;
            if p.dim() != m {
                return Err(invalid(format!("polynomial is over ℝ^{}, expected ℝ^{m}", p.dim())));
            }
            p.to_field()
        }
        FunctionSpec::Samples { samples } => {
            if samples.len() != count {
                return Err(invalid(format!("{} samples for {count} points", samples.len())));
            }
            let fields = samples
                .iter()
                .map(|s| {
                    if s.gradient.len() != m {
                        return Err(invalid(format!("sample gradient has length {}, expected {m}", s.gradient.len())));
                    }
                    ScalarField::sampled(s.value, s.gradient.clone(), s.hessian.clone()).map_err(lib)
                })
                .collect::<Result<_, _>>()?;
            return Ok(Fields::PerPoint(fields));
        }
    };
    Ok(Fields::Shared(shared))
}

fn evaluate(job: &PreparedJob, f: &ScalarField, u: &[f64]) -> conlap::Result<LaplacianReport> {
    let tol = &job.tolerances;
    match (&job.manifold, job.path) {
        (Manifold::Sphere { radius, .. }, PathKind::ClosedForm) => {
            let x = SpherePoint::with_tolerance(u.to_vec(), *radius, tol.on_manifold)?;
            sphere::sphere_laplacian_report(f, &x)
        }
        (Manifold::Sphere { n, radius }, PathKind::GeneralFrame) => {
            let c = sphere::sphere_constraint_set(*n, *radius)?;
            laplace_beltrami_general(f, &c, &sphere::sphere_adapted_frame(*radius), u, tol)
        }
        (Manifold::Orthogonal { n }, PathKind::ClosedForm) => {
            let point = OrthogonalPoint::with_tolerance(unvec(u, *n)?, tol.orthogonality)?;
            on::on_laplacian(f, &point)
        }
        (Manifold::Orthogonal { n }, PathKind::GeneralFrame) => {
            laplace_beltrami_general(f, &on::on_constraint_set(*n)?, &on::on_adapted_frame(*n), u, tol)
        }
        (Manifold::Generic(c), _) => laplace_beltrami_general(f, c, &conlap::AdaptedFrame::projected(c), u, tol),
    }
}

/// Evaluates every point concurrently and returns the JSON lines in input
/// order together with the worst exit code among per-point errors.
pub fn run(job: &PreparedJob) -> (Vec<String>, u8) {
    let results: Vec<conlap::Result<LaplacianReport>> = (0..job.points.len())
        .into_par_iter()
        .map(|i| {
            let f = match &job.fields {
                Fields::Shared(f) => f,
                Fields::PerPoint(fs) => &fs[i],
            };
            evaluate(job, f, &job.points[i].1)
        })
        .collect();
    let mut code = 0;
    let lines = results
        .into_iter()
        .zip(&job.points)
        .map(|(r, (label, _))| match r {
            Ok(report) => serde_json::to_string(&PointRecord { point: label, path: job.path, report }),
            Err(e) => {
                code = code.max(exit_code(&e));
                serde_json::to_string(&ErrorRecord {
                    point: label,
                    path: job.path,
                    error: ErrorBody { kind: error_kind(&e), message: e.to_string() },
                })
            }
        })
        .map(|s| s.expect("records serialize"))
        .collect();
    (lines, code)
}
