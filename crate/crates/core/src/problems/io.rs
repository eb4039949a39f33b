//! JSON problem files: a `kind` tag, shape metadata under `dims`, and
//! row-major number arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{matrix_from_row_major, row_major, vector_from, Matrix, Vector};

use super::finite_sum::FiniteSumObjective;
use super::{
    Composed, CompositionProblem, LassoProblem, LinQuadProblem, PolicyEvalProblem,
    PortfolioProblem, SmoothObjective,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDims {
    pub n: usize,
    #[serde(rename = "N")]
    pub assets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDims {
    #[serde(rename = "S")]
    pub states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinQuadDims {
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "N")]
    pub dim_x: usize,
    #[serde(rename = "M")]
    pub dim_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoDims {
    pub n: usize,
    #[serde(rename = "N")]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemData {
    Portfolio {
        dims: PortfolioDims,
        rewards: Vec<f64>,
    },
    PolicyEval {
        dims: StateDims,
        transition: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    },
    Linquad {
        dims: LinQuadDims,
        /// `n2` stacked row-major `M × N` blocks.
        inner_matrices: Vec<f64>,
        inner_offsets: Vec<f64>,
        targets: Vec<f64>,
    },
    Lasso {
        dims: LassoDims,
        design: Vec<f64>,
        targets: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub data: ProblemData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// Any of the shipped problem kinds, built and validated.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Portfolio(PortfolioProblem),
    PolicyEval(PolicyEvalProblem),
    LinQuad(LinQuadProblem),
    Lasso(LassoProblem),
}

impl AnyProblem {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyProblem::Portfolio(_) => "portfolio",
            AnyProblem::PolicyEval(_) => "policy_eval",
            AnyProblem::LinQuad(_) => "linquad",
            AnyProblem::Lasso(_) => "lasso",
        }
    }

    pub fn as_composition(&self) -> Option<&dyn CompositionProblem> {
        match self {
            AnyProblem::Portfolio(p) => Some(p),
            AnyProblem::PolicyEval(p) => Some(p),
            AnyProblem::LinQuad(p) => Some(p),
            AnyProblem::Lasso(_) => None,
        }
    }

    pub fn smooth(&self) -> Box<dyn SmoothObjective + '_> {
        match self {
            AnyProblem::Portfolio(p) => Box::new(Composed(p)),
            AnyProblem::PolicyEval(p) => Box::new(Composed(p)),
            AnyProblem::LinQuad(p) => Box::new(Composed(p)),
            AnyProblem::Lasso(p) => Box::new(FiniteSumObjective(p)),
        }
    }

    pub fn dim_x(&self) -> usize {
        self.smooth().dim()
    }
}

impl ProblemData {
    pub fn from_problem(problem: &AnyProblem) -> Self {
        match problem {
            AnyProblem::Portfolio(p) => ProblemData::Portfolio {
                dims: PortfolioDims {
                    n: p.periods(),
                    assets: p.assets(),
                },
                rewards: row_major(p.rewards()),
            },
            AnyProblem::PolicyEval(p) => ProblemData::PolicyEval {
                dims: StateDims { states: p.states() },
                transition: row_major(p.transition()),
                rewards: row_major(p.rewards()),
                gamma: p.gamma(),
            },
            AnyProblem::LinQuad(p) => ProblemData::Linquad {
                dims: LinQuadDims {
                    n1: p.n_outer(),
                    n2: p.n_inner(),
                    dim_x: p.dim_x(),
                    dim_y: p.dim_y(),
                },
                inner_matrices: p.inner_matrices().iter().flat_map(row_major).collect(),
                inner_offsets: p
                    .inner_offsets()
                    .iter()
                    .flat_map(|v| v.iter().copied())
                    .collect(),
                targets: p.targets().iter().flat_map(|v| v.iter().copied()).collect(),
            },
            AnyProblem::Lasso(p) => ProblemData::Lasso {
                dims: LassoDims {
                    n: p.design().nrows(),
                    dim: p.design().ncols(),
                },
                design: row_major(p.design()),
                targets: p.targets().iter().copied().collect(),
            },
        }
    }

    pub fn build(&self) -> Result<AnyProblem> {
        Ok(match self {
            ProblemData::Portfolio { dims, rewards } => AnyProblem::Portfolio(
                PortfolioProblem::new(matrix_from_row_major(dims.n, dims.assets, rewards)?)?,
            ),
            ProblemData::PolicyEval {
                dims,
                transition,
                rewards,
                gamma,
            } => AnyProblem::PolicyEval(PolicyEvalProblem::new(
                matrix_from_row_major(dims.states, dims.states, transition)?,
                matrix_from_row_major(dims.states, dims.states, rewards)?,
                *gamma,
            )?),
            ProblemData::Linquad {
                dims,
                inner_matrices,
                inner_offsets,
                targets,
            } => {
                let block = dims.dim_y * dims.dim_x;
                if inner_matrices.len() != dims.n2 * block {
                    return domain(format!(
                        "expected {} inner matrix entries, got {}",
                        dims.n2 * block,
                        inner_matrices.len()
                    ));
                }
                let q = inner_matrices
                    .chunks(block.max(1))
                    .map(|chunk| matrix_from_row_major(dims.dim_y, dims.dim_x, chunk))
                    .collect::<Result<Vec<Matrix>>>()?;
                let c = split_vectors(inner_offsets, dims.n2, dims.dim_y)?;
                let b = split_vectors(targets, dims.n1, dims.dim_y)?;
                AnyProblem::LinQuad(LinQuadProblem::new(q, c, b)?)
            }
            ProblemData::Lasso {
                dims,
                design,
                targets,
            } => AnyProblem::Lasso(LassoProblem::new(
                matrix_from_row_major(dims.n, dims.dim, design)?,
                vector_from(targets.clone())?,
            )?),
        })
    }
}

fn split_vectors(data: &[f64], count: usize, len: usize) -> Result<Vec<Vector>> {
    if data.len() != count * len {
        return domain(format!(
            "expected {} entries, got {}",
            count * len,
            data.len()
        ));
    }
    data.chunks(len.max(1))
        .map(|c| vector_from(c.to_vec()))
        .collect()
}

pub fn save_problem(path: &Path, file: &ProblemFile) -> Result<()> {
    let mut text = serde_json::to_string(file)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_problem(path: &Path) -> Result<ProblemFile> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
