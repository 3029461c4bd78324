//! Linear subspaces of Rⁿ held as orthonormal bases.
//!
//! All dimension counts in the crate go through [`rank`] and [`image_dim`]
//! with the shared relative threshold [`RANK_TOL`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::rng::{stream_rng, Stream};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold shared by every dimension count.
pub const RANK_TOL: f64 = 1e-8;

/// Tolerance for treating a subspace as contained in another.
pub const CONTAINMENT_TOL: f64 = 1e-8;

/// Projection-matrix distance below which two subspaces are the same.
pub const SAME_SUBSPACE_TOL: f64 = 1e-8;

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what} has non-finite entries"))
    }
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, k| m[(i, k)])
}

fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD of a finite matrix converges")
}

/// Number of singular values above `tol` times the largest one (or `tol` if
/// the matrix is zero).
pub fn rank(m: &Matrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return invalid("rank tolerance must be positive");
    }
    check_finite(m, "matrix")?;
    let sv = singular_values(m);
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let scale = if largest > 0.0 { largest } else { 1.0 };
    Ok(sv.iter().filter(|&&s| s > tol * scale).count())
}

/// Largest singular value.
pub fn operator_norm(m: &Matrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// `dim M(V)`.
///
/// Singular values of `M·basis(V)` are compared against `tol·|M|` rather
/// than against their own maximum, so a numerically-zero image is rank 0.
pub fn image_dim_tol(m: &Matrix, v: &Subspace, tol: f64) -> Result<usize> {
    if m.ncols() != v.ambient_dim() {
        return invalid(format!(
            "map has {} columns but subspace lives in R^{}",
            m.ncols(),
            v.ambient_dim()
        ));
    }
    check_finite(m, "map")?;
    if v.dim() == 0 {
        return Ok(0);
    }
    let scale = operator_norm(m);
    if scale == 0.0 {
        return Ok(0);
    }
    let img = m * &v.basis;
    Ok(singular_values(&img).iter().filter(|&&s| s > tol * scale).count())
}

pub fn image_dim(m: &Matrix, v: &Subspace) -> Result<usize> {
    image_dim_tol(m, v, RANK_TOL)
}

/// Orthonormal basis of the column space of `cols`, keeping left singular
/// vectors whose singular value exceeds `threshold`.
fn orthonormalize(cols: &Matrix, threshold: f64) -> Matrix {
    let n = cols.nrows();
    if cols.ncols() == 0 || n == 0 {
        return Matrix::zeros(n, 0);
    }
    let svd = to_faer(cols).thin_svd().expect("SVD of a finite matrix converges");
    let u = svd.U();
    let sv = svd.S().column_vector();
    let mut keep: Vec<(f64, usize)> = (0..sv.nrows())
        .map(|i| (sv[i], i))
        .filter(|&(s, _)| s > threshold)
        .collect();
    keep.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out = Matrix::zeros(n, keep.len());
    for (k, &(_, i)) in keep.iter().enumerate() {
        for row in 0..n {
            out[(row, k)] = u[(row, i)];
        }
    }
    out
}

/// A linear subspace of R^ambient with orthonormal basis columns.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: Matrix,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: Matrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            basis: Matrix::identity(ambient, ambient),
        }
    }

    /// Span of the coordinate axes listed in `axes`.
    pub fn coordinate(ambient: usize, axes: &[usize]) -> Result<Self> {
        let mut basis = Matrix::zeros(ambient, axes.len());
        for (k, &a) in axes.iter().enumerate() {
            if a >= ambient {
                return invalid(format!("axis {a} out of range for R^{ambient}"));
            }
            basis[(a, k)] = 1.0;
        }
        Self::span(&basis)
    }

    /// Span of the columns of `cols`.
    pub fn span(cols: &Matrix) -> Result<Self> {
        check_finite(cols, "spanning set")?;
        let largest = operator_norm(cols);
        let basis = orthonormalize(cols, RANK_TOL * largest.max(1.0));
        Ok(Self {
            ambient: cols.nrows(),
            basis,
        })
    }

    /// Span of a list of vectors of length `ambient`.
    pub fn span_of_vectors(ambient: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut cols = Matrix::zeros(ambient, vectors.len());
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != ambient {
                return invalid(format!("vector {k} has length {}, expected {ambient}", v.len()));
            }
            for (i, &x) in v.iter().enumerate() {
                cols[(i, k)] = x;
            }
        }
        Self::span(&cols)
    }

    /// Wraps a basis already known to be orthonormal (to within 1e-10).
    pub fn from_orthonormal(basis: Matrix) -> Result<Self> {
        check_finite(&basis, "basis")?;
        let gram = basis.transpose() * &basis;
        let err = (gram - Matrix::identity(basis.ncols(), basis.ncols())).amax();
        if err > 1e-10 {
            return invalid(format!("basis is not orthonormal (Gram error {err:e})"));
        }
        Ok(Self {
            ambient: basis.nrows(),
            basis,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vec<f64>> {
        self.basis.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    pub fn projection_matrix(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, x: &Vector) -> Vector {
        &self.basis * (self.basis.transpose() * x)
    }

    /// `|P_V x|`.
    pub fn projected_norm(&self, x: &Vector) -> f64 {
        (self.basis.transpose() * x).norm()
    }

    fn same_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient != other.ambient {
            return invalid(format!("subspaces live in R^{} and R^{}", self.ambient, other.ambient));
        }
        Ok(())
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        let mut cols = Matrix::zeros(self.ambient, self.dim() + other.dim());
        cols.columns_mut(0, self.dim()).copy_from(&self.basis);
        cols.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        Ok(Subspace {
            ambient: self.ambient,
            basis: orthonormalize(&cols, RANK_TOL * 2f64.sqrt()),
        })
    }

    /// `V ∩ W = (V⊥ + W⊥)⊥`.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        self.complement().sum(&other.complement()).map(|s| s.complement())
    }

    /// Orthogonal complement in R^ambient.
    pub fn complement(&self) -> Subspace {
        let residual = Matrix::identity(self.ambient, self.ambient) - self.projection_matrix();
        Subspace {
            ambient: self.ambient,
            basis: orthonormalize(&residual, 0.5),
        }
    }

    pub fn is_contained_in(&self, host: &Subspace) -> bool {
        if self.ambient != host.ambient {
            return false;
        }
        let back = host.projection_matrix() * &self.basis;
        self.dim() == 0 || (back - &self.basis).amax() <= CONTAINMENT_TOL
    }

    /// The part of `host` orthogonal to `self`; requires `self ⊆ host`.
    pub fn orthocomplement_in(&self, host: &Subspace) -> Result<Subspace> {
        self.same_ambient(host)?;
        if !self.is_contained_in(host) {
            return invalid("subspace is not contained in the host subspace");
        }
        let residual = host.projection_matrix() - self.projection_matrix();
        let basis = orthonormalize(&residual, 0.5);
        debug_assert_eq!(basis.ncols(), host.dim() - self.dim());
        Ok(Subspace {
            ambient: self.ambient,
            basis,
        })
    }

    /// `|P_V − P_W|` in operator norm; requires equal dimensions.
    pub fn grassmann_distance(&self, other: &Subspace) -> Result<f64> {
        self.same_ambient(other)?;
        if self.dim() != other.dim() {
            return invalid(format!(
                "Grassmannian distance needs equal dimensions, got {} and {}",
                self.dim(),
                other.dim()
            ));
        }
        Ok(projection_gap(self, other))
    }

    /// Same column space, within [`SAME_SUBSPACE_TOL`].
    pub fn same_as(&self, other: &Subspace) -> bool {
        self.ambient == other.ambient && self.dim() == other.dim() && projection_gap(self, other) < SAME_SUBSPACE_TOL
    }

    /// Applies an `n×n` linear map to the subspace.
    pub fn transformed(&self, m: &Matrix) -> Result<Subspace> {
        if m.ncols() != self.ambient {
            return invalid("map does not act on the subspace's ambient space");
        }
        Subspace::span(&(m * &self.basis))
    }
}

fn projection_gap(a: &Subspace, b: &Subspace) -> f64 {
    let diff = a.projection_matrix() - b.projection_matrix();
    diff.symmetric_eigenvalues().iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

/// Free-function form of [`Subspace::grassmann_distance`].
/// The part of `h` orthogonal to `v`; requires `v ⊆ h`.
pub fn orthocomplement(v: &Subspace, h: &Subspace) -> Result<Subspace> {
    v.orthocomplement_in(h)
}

pub fn grassmann_distance(v: &Subspace, w: &Subspace) -> Result<f64> {
    v.grassmann_distance(w)
}

/// Span of `k` independent standard-normal vectors in Rⁿ.
pub fn random_subspace(n: usize, k: usize, seed: u64) -> Result<Subspace> {
    let mut rng = stream_rng(seed, Stream::Subspace, ((n as u64) << 16) | k as u64);
    random_subspace_with(n, k, &mut rng)
}

pub fn random_subspace_with<R: Rng>(n: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k > n {
        return invalid(format!("cannot draw a {k}-dimensional subspace of R^{n}"));
    }
    if k == 0 {
        return Ok(Subspace::zero(n));
    }
    if k == n {
        return Ok(Subspace::full(n));
    }
    loop {
        let g = Matrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = Subspace::span(&g)?;
        if s.dim() == k {
            return Ok(s);
        }
    }
}

/// Unit vector drawn uniformly from the sphere.
pub(crate) fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Subspace", 3)?;
        st.serialize_field("ambient_dim", &self.ambient)?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("basis", &self.basis_vectors())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            ambient_dim: usize,
            basis: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(d)?;
        Subspace::span_of_vectors(raw.ambient_dim, &raw.basis).map_err(serde::de::Error::custom)
    }
}
