//! The JSON problem document shared by every command.
//!
//! ```json
//! {
//!   "n": 3,
//!   "maps": [[[1, 0, 0]], [[0, 1, 0]], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]],
//!   "p": [0.25, 1.0, 0.5],
//!   "subspace": [[1, 0, 0]],
//!   "kakeya": {"counts": [32, 32, 32], "nu": 0.05, "samples": 8}
//! }
//! ```
//!
//! Either `maps` (row lists) or `kernels` (spanning-vector lists) must be given.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datum::BlDatum;
use crate::error::{Error, Result};
use crate::kakeya::FamilySampling;
use crate::subspace::{Matrix, Subspace};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<Vec<Vec<Vec<f64>>>>,
    pub p: Vec<f64>,
    /// Witness subspace, as spanning vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<Vec<f64>>>,
    /// Exponent vector tested for polytope membership.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kakeya: Option<KakeyaBlock>,
}

/// Tube-family settings read by the Kakeya commands.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KakeyaBlock {
    pub counts: Vec<usize>,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Finest scale for the ledger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// `C·κ`, used to derive `ω` when `omega` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_kappa: Option<f64>,
}

fn default_samples() -> usize {
    8
}

impl KakeyaBlock {
    pub fn sampling(&self) -> FamilySampling {
        FamilySampling {
            counts: self.counts.clone(),
            nu: self.nu,
            samples: self.samples,
        }
    }
}

fn problem<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Problem(msg.into()))
}

fn rows_to_matrix(field: &str, rows: &[Vec<f64>], n: usize) -> Result<Matrix> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return problem(format!("{field}: row {i} has {} entries, expected {n}", row.len()));
        }
    }
    Ok(Matrix::from_fn(rows.len(), n, |i, k| rows[i][k]))
}

fn vectors_to_subspace(field: &str, vectors: &[Vec<f64>], n: usize) -> Result<Subspace> {
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return problem(format!("{field}: vector {i} has {} entries, expected {n}", v.len()));
        }
    }
    Subspace::span_of_vectors(n, vectors).map_err(|e| Error::Problem(format!("{field}: {e}")))
}

impl ProblemDoc {
    /// Parses the document; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text).map_err(|e| Error::Problem(e.to_string()))?;
        if doc.n == 0 {
            return problem("n: must be at least 1");
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Problem(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem documents serialize")
    }

    /// Builds the datum without validating it.
    pub fn datum(&self) -> Result<BlDatum> {
        let n = self.n;
        match (&self.maps, &self.kernels) {
            (Some(_), Some(_)) => problem("give either maps or kernels, not both"),
            (None, None) => problem("missing field `maps` (or `kernels`)"),
            (Some(maps), None) => {
                let maps = maps
                    .iter()
                    .enumerate()
                    .map(|(j, rows)| rows_to_matrix(&format!("maps[{j}]"), rows, n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(BlDatum::from_maps(n, maps, self.p.clone()))
            }
            (None, Some(kernels)) => {
                let kernels = kernels
                    .iter()
                    .enumerate()
                    .map(|(j, vs)| vectors_to_subspace(&format!("kernels[{j}]"), vs, n))
                    .collect::<Result<Vec<_>>>()?;
                BlDatum::from_kernels(n, kernels, self.p.clone())
            }
        }
    }

    /// Builds the datum and rejects it unless every check passes.
    pub fn validated_datum(&self) -> Result<BlDatum> {
        let d = self.datum()?;
        let report = d.validate();
        if !report.passed() {
            return problem(report.to_string());
        }
        if let Some(k) = &self.kakeya {
            if k.counts.len() != d.len() {
                return problem(format!(
                    "kakeya.counts: {} entries for {} maps",
                    k.counts.len(),
                    d.len()
                ));
            }
        }
        Ok(d)
    }

    pub fn subspace(&self) -> Result<Option<Subspace>> {
        self.subspace
            .as_ref()
            .map(|vs| vectors_to_subspace("subspace", vs, self.n))
            .transpose()
    }
}
