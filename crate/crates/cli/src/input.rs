//! Input files: distance matrices (JSON or CSV), point clouds and
//! octahedron instances.

use std::fs;
use std::path::Path;

use quadmetric::lebedeva::default_points;
use quadmetric::{Cloud, LebedevaError, MetricError, PointCloud, SemimetricSpace, Space};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Lebedeva(#[from] LebedevaError),
    #[error("{0}")]
    Option(String),
}

impl InputError {
    /// Short machine-readable class; geometry failures carry the name of
    /// the violated condition.
    pub fn kind(&self) -> String {
        match self {
            Self::Io { .. } => "io".into(),
            Self::Json { .. } | Self::Csv { .. } => "parse".into(),
            Self::Schema { .. } => "schema".into(),
            Self::Metric(_) => "metric".into(),
            Self::Lebedeva(e) => {
                let name = format!("{e:?}");
                name.split(['(', ' ', '{']).next().unwrap_or_default().to_string()
            }
            Self::Option(_) => "option".into(),
        }
    }

    fn schema(path: &Path, message: impl Into<String>) -> Self {
        Self::Schema { path: path.display().to_string(), message: message.into() }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, InputError> {
    fs::read(path).map_err(|source| InputError::Io { path: path.display().to_string(), source })
}

/// A space file as written: a distance matrix, or a point cloud whose
/// Euclidean distances define the space.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceInput {
    Matrix(Vec<Vec<f64>>),
    Cloud(Cloud),
}

impl SpaceInput {
    /// Validates the matrix; `mirror_upper` copies the upper triangle onto
    /// the lower one first.
    pub fn build(&self, mirror_upper: bool) -> Result<Space, MetricError> {
        match self {
            Self::Matrix(rows) if mirror_upper => SemimetricSpace::from_upper_triangle(rows.clone()),
            Self::Matrix(rows) => SemimetricSpace::new(rows.clone()),
            Self::Cloud(cloud) => Ok(SemimetricSpace::from_points(cloud)),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    n: usize,
    d: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CloudFile {
    dim: usize,
    points: Vec<Vec<f64>>,
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Parses `{"n", "d"}` or `{"dim", "points"}` JSON, or headerless CSV when
/// the file name ends in `.csv`.
pub fn parse_space(path: &Path, bytes: &[u8]) -> Result<SpaceInput, InputError> {
    if is_csv(path) {
        return parse_csv(path, bytes).map(SpaceInput::Matrix);
    }
    let json = |source| InputError::Json { path: path.display().to_string(), source };
    let value: Value = serde_json::from_slice(bytes).map_err(json)?;
    if value.get("d").is_some() {
        let file: MatrixFile = serde_json::from_value(value).map_err(json)?;
        if file.n != file.d.len() {
            return Err(InputError::schema(path, format!("n is {} but d has {} rows", file.n, file.d.len())));
        }
        Ok(SpaceInput::Matrix(file.d))
    } else if value.get("points").is_some() {
        let file: CloudFile = serde_json::from_value(value).map_err(json)?;
        if let Some((i, p)) = file.points.iter().enumerate().find(|(_, p)| p.len() != file.dim) {
            return Err(InputError::schema(path, format!("point {} has {} coordinates, dim is {}", i + 1, p.len(), file.dim)));
        }
        Ok(SpaceInput::Cloud(PointCloud::new(file.points)?))
    } else {
        Err(InputError::schema(path, "expected {\"n\", \"d\"} or {\"dim\", \"points\"}"))
    }
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<f64>>, InputError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(bytes);
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|source| InputError::Csv { path: path.display().to_string(), source })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    InputError::schema(path, format!("row {} column {}: {field:?} is not a number", r + 1, c + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// An octahedron instance file `{"points": [[x, y, z] × 6], "gamma"}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl InstanceFile {
    pub fn default_instance() -> Self {
        Self { points: default_points::<f64>().iter().map(|p| p.to_vec()).collect(), gamma: Some(1.0) }
    }

    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self, InputError> {
        let file: Self =
            serde_json::from_slice(bytes).map_err(|source| InputError::Json { path: path.display().to_string(), source })?;
        file.points(path)?;
        Ok(file)
    }

    fn points(&self, path: &Path) -> Result<[[f64; 3]; 6], InputError> {
        let shape = || InputError::schema(path, "points must be six [x, y, z] triples");
        let v: Vec<[f64; 3]> =
            self.points.iter().map(|p| <[f64; 3]>::try_from(p.as_slice()).map_err(|_| shape())).collect::<Result<_, _>>()?;
        <[[f64; 3]; 6]>::try_from(v).map_err(|_| shape())
    }

    pub fn coordinates(&self) -> [[f64; 3]; 6] {
        self.points(Path::new("instance")).expect("shape checked on parse")
    }
}
