//! Serde schema of network spec files. Complex numbers are `[re, im]` pairs
//! everywhere and unknown keys are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, C64};

pub const VERSION: u32 = 1;

pub type Complex = [f64; 2];
pub type MatrixRows = Vec<Vec<Complex>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpecFile {
    pub version: u32,
    pub space: SpaceSpec,
    pub components: BTreeMap<String, ComponentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpecFile>,
    /// Series order: the field passes the first listed component first.
    pub pipeline: Vec<String>,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// Scalar scattering matrix; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixRows>,
    pub l: Vec<OperatorSource>,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<OperatorSource>,
}

/// An operator written as an expression or as a dense matrix (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSource {
    Expr(String),
    Matrix(MatrixRows),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpecFile {
    pub n: MatrixRows,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<MatrixRows>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve(EvolveSpec),
    Steady(SteadySpec),
    DpaLimit(DpaSpec),
    ComposeOnly,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Evolve(_) => "evolve",
            Experiment::Steady(_) => "steady",
            Experiment::DpaLimit(_) => "dpa-limit",
            Experiment::ComposeOnly => "compose-only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub t_grid: TimeGrid,
    pub observables: Vec<ObservableSpec>,
    pub rho0: StateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendSpec>,
    /// Factors whose top Fock level is watched for leakage.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncated_factors: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendSpec {
    Exact,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    pub observables: Vec<ObservableSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpaSpec {
    pub eps: f64,
    pub kappa: f64,
    pub k_list: Vec<f64>,
    pub truncation: usize,
    pub t_grid: TimeGrid,
    pub observable: ObservableSpec,
    pub rho0: StateSpec,
    /// Admits `κ > ε`, where the amplifier is stable.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub below_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    Points(Vec<f64>),
    Uniform(UniformGrid),
}

/// `points` equally spaced times from 0 to `t_end` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformGrid {
    pub t_end: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>, String> {
        match self {
            TimeGrid::Points(t) => Ok(t.clone()),
            TimeGrid::Uniform(UniformGrid { t_end, points }) => {
                if *points < 2 || !(*t_end > 0.0) || !t_end.is_finite() {
                    return Err(format!("uniform grid needs points >= 2 and t_end > 0, got {points} and {t_end}"));
                }
                let n = (*points - 1) as f64;
                Ok((0..*points).map(|i| t_end * i as f64 / n).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub label: String,
    pub expr: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateSpec {
    /// Levels per factor.
    Basis(Vec<usize>),
    Matrix(MatrixRows),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub pipeline: Vec<String>,
    pub order: String,
}

pub fn to_matrix(rows: &MatrixRows) -> Result<ComplexMatrix, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(format!("row {i} has {} entries, row 0 has {c}", row.len()));
    }
    Ok(ComplexMatrix::from_fn(r, c, |i, j| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    }))
}

pub fn from_matrix(m: &ComplexMatrix) -> MatrixRows {
    m.row_iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
}
