//! Greedy basis selection, the factor maps `L_j^{(r)}`, and the per-step
//! dimension table behind the local-bound exponent.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::datum::BlDatum;
use crate::error::{invalid, Error, Result};
use crate::exponent::locbd_exponent;
use crate::rng::{stream_rng, Stream};
use crate::subspace::{Matrix, Subspace, Vector};

pub const DEFAULT_TRIALS: usize = 4096;

/// Residuals below this count as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// Smallest margin accepted from [`select_basis`].
pub const MARGIN_THRESHOLD: f64 = 1e-6;

const MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct BasisSelection {
    pub e: Vec<Vector>,
    pub margin: f64,
    /// `step_dims[r][j] = dim⟨L_j^{(r)}(e_{r+1})⟩`.
    pub step_dims: Vec<Vec<u8>>,
    /// Families still short of full rank before step `r + 1`.
    pub j_r_sets: Vec<Vec<usize>>,
    /// `|P_{(H_j^r)⊥} π_j(e_{r+1})|`, same layout as `step_dims`.
    pub residuals: Vec<Vec<f64>>,
}

impl BasisSelection {
    /// Columns `e_{from+1}, …, e_n`.
    pub fn tail_matrix(&self, from: usize) -> Matrix {
        let n = self.e.len();
        Matrix::from_fn(n, n - from, |i, k| self.e[from + k][i])
    }
}

/// Orthonormal basis of `⟨π_j(e_1), …, π_j(e_r)⟩`, grown one vector at a time.
#[derive(Clone, Debug)]
struct Flag {
    target: usize,
    basis: Vec<Vector>,
}

impl Flag {
    fn new(target: usize) -> Self {
        Self {
            target,
            basis: Vec::new(),
        }
    }

    fn is_full(&self) -> bool {
        self.basis.len() >= self.target
    }

    fn residual(&self, v: &Vector) -> Vector {
        let mut r = v.clone();
        // Two passes keep the residual orthogonal to working precision.
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        r
    }

    /// Adds `v`, returning the residual norm and whether the span grew.
    fn push(&mut self, v: &Vector) -> (f64, bool) {
        let r = self.residual(v);
        let norm = r.norm();
        if norm < ZERO_TOL || self.is_full() {
            return (norm, false);
        }
        self.basis.push(r / norm);
        (norm, true)
    }
}

fn lex_cmp(a: &Vector, b: &Vector) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn score(d: &BlDatum, flags: &[Flag], active: &[usize], e: &Vector) -> f64 {
    active
        .iter()
        .map(|&j| flags[j].residual(&(d.map(j) * e)).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Picks `e_1, …, e_n` one at a time. Each draw lives in the orthocomplement
/// of the chosen prefix and maximizes the smallest new-direction residual over
/// the families that are not yet full.
pub fn select_basis(d0: &BlDatum, trials: usize, seed: u64) -> Result<BasisSelection> {
    d0.require_kernels()?;
    if trials == 0 {
        return invalid("trials must be at least 1");
    }
    let report = d0.validate();
    if !report.passed() {
        return invalid(report.to_string());
    }
    let n = d0.n();
    let jn = d0.len();
    let mut flags: Vec<Flag> = (0..jn).map(|j| Flag::new(d0.target_dim(j))).collect();
    let mut e: Vec<Vector> = Vec::with_capacity(n);
    let mut prefix = Flag::new(n);
    let mut margin = f64::INFINITY;
    let mut j_r_sets = Vec::with_capacity(n);
    let mut step_dims = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);

    for r in 0..n {
        let active: Vec<usize> = (0..jn).filter(|&j| !flags[j].is_full()).collect();
        let chosen = if active.is_empty() {
            completion_vector(n, &prefix)
        } else {
            let q = complement_of(n, &prefix);
            let mut rng = stream_rng(seed, Stream::Basis, r as u64);
            let draws: Vec<Vector> = (0..trials)
                .map(|_| {
                    let g = Vector::from_fn(q.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                    let v = &q * g;
                    let v = &v / v.norm();
                    // e and −e score the same; keep the lexicographically larger.
                    let neg = -&v;
                    if lex_cmp(&neg, &v).is_gt() {
                        neg
                    } else {
                        v
                    }
                })
                .collect();
            let scored: Vec<(f64, Vector)> = draws
                .into_par_iter()
                .map(|v| (score(d0, &flags, &active, &v), v))
                .collect();
            let (best, v) = scored
                .into_iter()
                .reduce(|a, b| match a.0.total_cmp(&b.0) {
                    std::cmp::Ordering::Less => b,
                    std::cmp::Ordering::Greater => a,
                    std::cmp::Ordering::Equal => {
                        if lex_cmp(&b.1, &a.1).is_gt() {
                            b
                        } else {
                            a
                        }
                    }
                })
                .expect("trials ≥ 1");
            margin = margin.min(best);
            v
        };
        let mut dims = vec![0u8; jn];
        let mut res = vec![0.0; jn];
        for j in 0..jn {
            let (norm, grew) = flags[j].push(&(d0.map(j) * &chosen));
            res[j] = norm;
            dims[j] = grew as u8;
        }
        prefix.push(&chosen);
        e.push(chosen);
        j_r_sets.push(active);
        step_dims.push(dims);
        residuals.push(res);
    }

    if margin < MARGIN_THRESHOLD {
        return Err(Error::SelectionFailed {
            margin,
            threshold: MARGIN_THRESHOLD,
        });
    }
    Ok(BasisSelection {
        e,
        margin,
        step_dims,
        j_r_sets,
        residuals,
    })
}

/// Orthonormal basis (as columns) of the complement of the prefix span.
fn complement_of(n: usize, prefix: &Flag) -> Matrix {
    if prefix.basis.is_empty() {
        return Matrix::identity(n, n);
    }
    let cols = Matrix::from_columns(&prefix.basis);
    let span = Subspace::from_orthonormal(cols).expect("prefix is orthonormal");
    span.complement().basis().clone()
}

/// First vector of a fixed orthonormal basis of the complement.
fn completion_vector(n: usize, prefix: &Flag) -> Vector {
    let q = complement_of(n, prefix);
    let v = q.column(0).into_owned();
    let neg = -&v;
    if lex_cmp(&neg, &v).is_gt() {
        neg
    } else {
        v
    }
}

fn check_indices(d: &BlDatum, sel: &BasisSelection, j: usize, r: usize) -> Result<()> {
    if sel.e.len() != d.n() {
        return invalid(format!("basis has {} vectors, datum lives in R^{}", sel.e.len(), d.n()));
    }
    if j >= d.len() {
        return invalid(format!("map index {j} out of range for {} maps", d.len()));
    }
    if r >= d.n() {
        return invalid(format!("step {r} out of range 0..{}", d.n()));
    }
    Ok(())
}

/// `L_j^{(r)} = P_{(H_j^r)⊥} ∘ π_j` restricted to `⟨e_{r+1}, …, e_n⟩`, written
/// in those coordinates: an `n_j × (n − r)` matrix.
pub fn factor_map(d: &BlDatum, sel: &BasisSelection, j: usize, r: usize) -> Result<Matrix> {
    check_indices(d, sel, j, r)?;
    let pi = d.map(j);
    let nj = pi.nrows();
    let mut h = Flag::new(nj);
    for v in &sel.e[..r] {
        h.push(&(pi * v));
    }
    let mut proj = Matrix::identity(nj, nj);
    for q in &h.basis {
        proj -= q * q.transpose();
    }
    Ok(proj * pi * sel.tail_matrix(r))
}

/// Step dimensions of `d` along a fixed basis.
pub fn step_dims_of(d: &BlDatum, e: &[Vector]) -> Vec<Vec<u8>> {
    let mut flags: Vec<Flag> = (0..d.len()).map(|j| Flag::new(d.target_dim(j))).collect();
    e.iter()
        .map(|v| {
            flags
                .iter_mut()
                .enumerate()
                .map(|(j, f)| f.push(&(d.map(j) * v)).1 as u8)
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LocbdCheck {
    /// `Σ_r max(1 − Σ_j p_j·step_dims[r][j], 0)` on the measured table.
    pub value: f64,
    pub expected: f64,
    pub matches: bool,
    pub step_dims: Vec<Vec<u8>>,
}

/// Recomputes the step dimensions of `d` along `sel.e` and compares the
/// resulting exponent with [`locbd_exponent`].
pub fn verify_locbd_exponent(d: &BlDatum, sel: &BasisSelection) -> Result<LocbdCheck> {
    if sel.e.len() != d.n() {
        return invalid(format!("basis has {} vectors, datum lives in R^{}", sel.e.len(), d.n()));
    }
    let step_dims = step_dims_of(d, &sel.e);
    let value = step_dims
        .iter()
        .map(|row| {
            let s: f64 = row.iter().zip(d.p()).map(|(&k, p)| k as f64 * p).sum();
            (1.0 - s).max(0.0)
        })
        .sum();
    let expected = locbd_exponent(d)?;
    Ok(LocbdCheck {
        value,
        expected,
        matches: (value - expected).abs() <= MATCH_TOL,
        step_dims,
    })
}

/// Serialized outcome of a basis run.
#[derive(Clone, Debug, Serialize)]
pub struct BasisReport {
    pub basis: Vec<Vec<f64>>,
    pub margin: f64,
    pub step_dims: Vec<Vec<u8>>,
    pub j_r_sets: Vec<Vec<usize>>,
    pub exponent: f64,
    pub expected: f64,
    #[serde(rename = "match")]
    pub matches: bool,
}

impl BasisReport {
    pub fn new(sel: &BasisSelection, check: &LocbdCheck) -> Self {
        Self {
            basis: sel.e.iter().map(|v| v.iter().copied().collect()).collect(),
            margin: sel.margin,
            step_dims: check.step_dims.clone(),
            j_r_sets: sel.j_r_sets.clone(),
            exponent: check.value,
            expected: check.expected,
            matches: check.matches,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::rank;
    use approx::assert_abs_diff_eq;

    fn row(v: &[f64]) -> Matrix {
        Matrix::from_row_slice(1, v.len(), v)
    }

    fn lw(p: f64) -> BlDatum {
        BlDatum::from_maps(2, vec![row(&[1.0, 0.0]), row(&[0.0, 1.0])], vec![p, p])
    }

    fn reviewer() -> BlDatum {
        BlDatum::from_maps(
            2,
            vec![row(&[1.0, 0.0]), row(&[0.0, 1.0]), Matrix::identity(2, 2)],
            vec![0.25, 1.0, 0.5],
        )
    }

    #[test]
    fn lw_selection_is_diagonal() {
        let sel = select_basis(&lw(0.5), DEFAULT_TRIALS, 1).unwrap();
        assert_abs_diff_eq!(sel.margin, 0.5f64.sqrt(), epsilon = 1e-2);
        assert_abs_diff_eq!(sel.e[0][0].abs(), 0.5f64.sqrt(), epsilon = 1e-2);
        assert_abs_diff_eq!(sel.e[0][1].abs(), 0.5f64.sqrt(), epsilon = 1e-2);
        assert_eq!(sel.step_dims, vec![vec![1, 1], vec![0, 0]]);
        assert_eq!(sel.j_r_sets, vec![vec![0, 1], vec![]]);
    }

    #[test]
    fn identity_map_accepts_any_pair() {
        let d = BlDatum::from_maps(2, vec![Matrix::identity(2, 2)], vec![1.0]);
        let sel = select_basis(&d, 16, 4).unwrap();
        assert_eq!(sel.step_dims, vec![vec![1], vec![1]]);
        assert_abs_diff_eq!(sel.margin, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        let sel = select_basis(&reviewer(), 512, 2).unwrap();
        let e = sel.tail_matrix(0);
        assert!((e.transpose() * &e - Matrix::identity(2, 2)).abs().max() < 1e-8);
        for row in &sel.residuals {
            for &r in row {
                assert!(r < ZERO_TOL || r >= sel.margin - 1e-15);
            }
        }
    }

    #[test]
    fn factor_map_ranks() {
        for d in [lw(0.5), reviewer()] {
            let sel = select_basis(&d, 512, 3).unwrap();
            for j in 0..d.len() {
                let nj = d.target_dim(j);
                let l0 = factor_map(&d, &sel, j, 0).unwrap();
                assert!((l0 * sel.tail_matrix(0).transpose() - d.map(j)).abs().max() < 1e-12);
                for r in 0..d.n() {
                    let l = factor_map(&d, &sel, j, r).unwrap();
                    let expected = nj.saturating_sub(r);
                    assert_eq!(rank(&l, 1e-8).unwrap(), expected, "j={j} r={r}");
                    if r == nj {
                        assert!(l.abs().max() < 1e-12);
                    }
                }
            }
            assert!(factor_map(&d, &sel, 0, d.n()).is_err());
            assert!(factor_map(&d, &sel, d.len(), 0).is_err());
        }
    }

    #[test]
    fn exponent_checks() {
        let d = reviewer();
        let sel = select_basis(&d, 512, 5).unwrap();
        let check = verify_locbd_exponent(&d, &sel).unwrap();
        assert_abs_diff_eq!(check.value, 0.5, epsilon = 1e-12);
        assert!(check.matches);

        let d = lw(0.5);
        let check = verify_locbd_exponent(&d, &select_basis(&d, 256, 5).unwrap()).unwrap();
        assert_abs_diff_eq!(check.value, 1.0, epsilon = 1e-12);
        assert!(check.matches);
    }

    #[test]
    fn repeated_map_fills_in_one_step() {
        let d = BlDatum::from_maps(2, vec![row(&[1.0, 0.0]), row(&[1.0, 0.0])], vec![0.5, 0.5]);
        let sel = select_basis(&d, 64, 1).unwrap();
        assert_eq!(sel.step_dims, vec![vec![1, 1], vec![0, 0]]);
        assert!(select_basis(&lw(0.5), 0, 1).is_err());
    }

    #[test]
    fn report_serializes_match_flag() {
        let d = lw(0.5);
        let sel = select_basis(&d, 64, 1).unwrap();
        let check = verify_locbd_exponent(&d, &sel).unwrap();
        let json = serde_json::to_value(BasisReport::new(&sel, &check)).unwrap();
        assert_eq!(json["match"], true);
        assert_eq!(json["basis"].as_array().unwrap().len(), 2);
    }
}
