//! Job file schema and loading.

use std::fs;
use std::path::{Path, PathBuf};

use conlap::config::FdSteps;
use conlap::numkit::DenseMatrix;
use conlap::{Polynomial, Tolerances};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub manifold: ManifoldSpec,
    pub function: FunctionSpec,
    pub points: Vec<PointInput>,
    #[serde(default)]
    pub path: PathKind,
    #[serde(default)]
    pub options: JobOptions,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Sphere {
        n: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Orthogonal {
        n: usize,
    },
    Generic {
        constraints: Source<ConstraintFile>,
    },
}

fn unit() -> f64 {
    1.0
}

/// Polynomial constraints `F_α(u) = c_α` for a generic manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub constraints: Vec<Polynomial>,
    pub regular_value: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    P1 { a: Source<DenseMatrix> },
    P11 { a: Source<DenseMatrix> },
    P2 { a: Source<DenseMatrix> },
    Brockett { a: Source<DenseMatrix>, mu: Vec<f64> },
    Linear { c: Vec<f64> },
    Polynomial { polynomial: Source<Polynomial> },
    /// Value, gradient and Hessian supplied per point, in point order.
    Samples { samples: Vec<Sample> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    #[serde(default)]
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DenseMatrix,
}

/// Either an inline value or `{"file": "path"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File { file: PathBuf },
    Inline(T),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointInput {
    Vector(Vec<f64>),
    Matrix(DenseMatrix),
    File { file: PathBuf },
    Random { random: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    #[default]
    ClosedForm,
    GeneralFrame,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobOptions {
    pub tolerances: Tolerances,
    /// When set, derivatives come from finite differences of the value.
    pub fd_steps: Option<FdSteps>,
    /// Seed for `{"random": k}` point entries.
    pub seed: u64,
}

/// A job failure before any point is evaluated.
#[derive(Debug)]
pub struct JobError(pub String);

impl std::fmt::Display for JobError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, JobError> {
    let text = fs::read_to_string(path).map_err(|e| JobError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| JobError(format!("{}: {e}", path.display())))
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T, JobError> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::File { file } => read_json(&base.join(file)),
        }
    }
}
