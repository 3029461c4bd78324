//! Brascamp-Lieb data `(π⃗, p⃗)` and their ν-perturbations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stream_rng, Stream};
use crate::subspace::{rank, Matrix, Subspace, RANK_TOL};

pub use crate::subspace::operator_norm;

/// Surjective linear maps `π_j: Rⁿ → R^{n_j}` with exponents `p_j`.
///
/// When every map is an orthogonal projection (orthonormal rows), the kernels
/// `V_j` are kept alongside and the datum can be perturbed.
#[derive(Clone, Debug)]
pub struct BlDatum {
    n: usize,
    maps: Vec<Matrix>,
    p: Vec<f64>,
    kernels: Option<Vec<Subspace>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidationFailure {
    LengthMismatch { maps: usize, exponents: usize },
    WrongDomain { map: usize, cols: usize },
    NonFinite { map: usize },
    NotSurjective { map: usize, rank: usize, rows: usize },
    ExponentOutOfRange { index: usize, value: f64 },
    KernelMismatch { map: usize, residual: f64 },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, failure) in self.failures.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{failure}")?;
        }
        Ok(())
    }
}

impl std::fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::LengthMismatch { maps, exponents } => {
                write!(f, "{maps} maps but {exponents} exponents")
            }
            Self::WrongDomain { map, cols } => write!(f, "maps[{map}] has {cols} columns"),
            Self::NonFinite { map } => write!(f, "maps[{map}] has non-finite entries"),
            Self::NotSurjective { map, rank, rows } => {
                write!(f, "maps[{map}] is not surjective (rank {rank} < {rows} rows)")
            }
            Self::ExponentOutOfRange { index, value } => {
                write!(f, "p[{index}] = {value} is outside [0, 1]")
            }
            Self::KernelMismatch { map, residual } => {
                write!(
                    f,
                    "kernels[{map}] is not annihilated by maps[{map}] (residual {residual:e})"
                )
            }
        }
    }
}

fn rows_orthonormal(m: &Matrix) -> bool {
    let gram = m * m.transpose();
    (gram - Matrix::identity(m.nrows(), m.nrows())).amax() <= 1e-10
}

impl BlDatum {
    /// Datum from explicit maps. Kernels are attached when every map has
    /// orthonormal rows, i.e. is an orthogonal projection in coordinates.
    pub fn from_maps(n: usize, maps: Vec<Matrix>, p: Vec<f64>) -> Self {
        let kernels = if maps.iter().all(|m| m.ncols() == n && rows_orthonormal(m)) {
            Some(
                maps.iter()
                    .map(|m| Subspace::span(&m.transpose()).map(|row_space| row_space.complement()))
                    .collect::<Result<Vec<_>>>()
                    .ok(),
            )
            .flatten()
        } else {
            None
        };
        Self { n, maps, p, kernels }
    }

    /// Orthogonal projections `π_j` onto `V_j⊥`, one per kernel `V_j`.
    pub fn from_kernels(n: usize, kernels: Vec<Subspace>, p: Vec<f64>) -> Result<Self> {
        for (j, k) in kernels.iter().enumerate() {
            if k.ambient_dim() != n {
                return invalid(format!("kernels[{j}] lives in R^{}, expected R^{n}", k.ambient_dim()));
            }
        }
        let maps = kernels.iter().map(|k| k.complement().basis().transpose()).collect();
        Ok(Self {
            n,
            maps,
            p,
            kernels: Some(kernels),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[Matrix] {
        &self.maps
    }

    pub fn map(&self, j: usize) -> &Matrix {
        &self.maps[j]
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Target dimension `n_j`.
    pub fn target_dim(&self, j: usize) -> usize {
        self.maps[j].nrows()
    }

    pub fn target_dims(&self) -> Vec<usize> {
        self.maps.iter().map(|m| m.nrows()).collect()
    }

    pub fn kernels(&self) -> Option<&[Subspace]> {
        self.kernels.as_deref()
    }

    pub fn require_kernels(&self) -> Result<&[Subspace]> {
        match self.kernels() {
            Some(k) => Ok(k),
            None => invalid("operation needs orthogonal-projection data with known kernels"),
        }
    }

    /// Same maps with a different exponent vector.
    pub fn with_exponents(&self, p: Vec<f64>) -> Self {
        Self { p, ..self.clone() }
    }

    /// Datum with maps `π_j ∘ O`.
    pub fn composed_with(&self, o: &Matrix) -> Result<Self> {
        if o.nrows() != self.n || o.ncols() != self.n {
            return invalid("composition needs an n×n matrix");
        }
        Ok(Self::from_maps(
            self.n,
            self.maps.iter().map(|m| m * o).collect(),
            self.p.clone(),
        ))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut failures = Vec::new();
        if self.maps.len() != self.p.len() {
            failures.push(ValidationFailure::LengthMismatch {
                maps: self.maps.len(),
                exponents: self.p.len(),
            });
        }
        for (j, m) in self.maps.iter().enumerate() {
            if m.ncols() != self.n {
                failures.push(ValidationFailure::WrongDomain {
                    map: j,
                    cols: m.ncols(),
                });
                continue;
            }
            match rank(m, RANK_TOL) {
                Err(_) => failures.push(ValidationFailure::NonFinite { map: j }),
                Ok(r) if r < m.nrows() => failures.push(ValidationFailure::NotSurjective {
                    map: j,
                    rank: r,
                    rows: m.nrows(),
                }),
                Ok(_) => {}
            }
        }
        for (j, &pj) in self.p.iter().enumerate() {
            if !(0.0..=1.0).contains(&pj) {
                failures.push(ValidationFailure::ExponentOutOfRange { index: j, value: pj });
            }
        }
        if let Some(kernels) = &self.kernels {
            for (j, (m, k)) in self.maps.iter().zip(kernels).enumerate() {
                if m.ncols() != k.ambient_dim() {
                    continue;
                }
                let residual = if k.dim() == 0 { 0.0 } else { (m * k.basis()).amax() };
                let dims_ok = k.dim() + m.nrows() == self.n;
                if residual > 1e-8 || !dims_ok {
                    failures.push(ValidationFailure::KernelMismatch { map: j, residual });
                }
            }
        }
        ValidationReport { failures }
    }
}

/// ν-perturbation request: radius, seed and number of draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub nu: f64,
    pub seed: u64,
    pub samples: usize,
}

impl PerturbationSpec {
    pub fn new(nu: f64, seed: u64, samples: usize) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return invalid("nu must be a finite nonnegative number");
        }
        if samples == 0 {
            return invalid("at least one perturbation sample is required");
        }
        Ok(Self { nu, seed, samples })
    }
}

/// Random skew-symmetric matrix with unit operator norm.
fn unit_skew<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    loop {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for k in (i + 1)..n {
                let g: f64 = rng.sample(StandardNormal);
                a[(i, k)] = g;
                a[(k, i)] = -g;
            }
        }
        let norm = operator_norm(&a);
        if norm > 1e-12 {
            return a / norm;
        }
    }
}

fn rotated(v0: &Subspace, generator: &Matrix, theta: f64) -> Subspace {
    let rot = (generator * theta).exp();
    Subspace::span(&(rot * v0.basis())).expect("rotation of a finite basis is finite")
}

/// Rotates `v0` by `exp(θA)` for a random unit skew `A`, with θ tuned by
/// bisection so the projection distance lands in `[target − 1e-6, target]`.
///
/// Subspaces fixed by every rotation ({0} and Rⁿ) are returned unchanged.
pub fn perturb_subspace<R: Rng>(v0: &Subspace, target: f64, rng: &mut R) -> Subspace {
    let n = v0.ambient_dim();
    if target <= 0.0 || v0.dim() == 0 || v0.dim() == n {
        return v0.clone();
    }
    // The largest achievable projection distance is 1.
    let target = target.min(1.0);
    let dist = |s: &Subspace| s.grassmann_distance(v0).expect("same dimension");

    for _attempt in 0..32 {
        let a = unit_skew(n, rng);
        let mut hi = target.max(1e-12);
        let mut reached = None;
        while hi <= std::f64::consts::PI {
            let s = rotated(v0, &a, hi);
            if dist(&s) >= target {
                reached = Some(hi);
                break;
            }
            hi *= 1.5;
        }
        let Some(mut hi) = reached else { continue };
        let mut lo = 0.0;
        let mut best = v0.clone();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s = rotated(v0, &a, mid);
            let d = dist(&s);
            if d <= target {
                lo = mid;
                best = s;
                if target - d <= 1e-7 {
                    break;
                }
            } else {
                hi = mid;
            }
        }
        return best;
    }
    v0.clone()
}

/// Draw `index` of the ν-perturbation family of `d`: every kernel is moved to
/// Grassmannian distance ν (up to 1e-6 below), and the maps become the
/// orthogonal projections onto the new `V_j⊥`.
pub fn perturb(d: &BlDatum, spec: &PerturbationSpec, index: usize) -> Result<BlDatum> {
    let kernels = d.require_kernels()?;
    if index >= spec.samples {
        return invalid(format!("perturbation index {index} >= samples {}", spec.samples));
    }
    if spec.nu == 0.0 {
        return BlDatum::from_kernels(d.n, kernels.to_vec(), d.p.clone());
    }
    let mut rng = stream_rng(spec.seed, Stream::Perturbation, index as u64);
    let moved = kernels.iter().map(|k| perturb_subspace(k, spec.nu, &mut rng)).collect();
    BlDatum::from_kernels(d.n, moved, d.p.clone())
}
