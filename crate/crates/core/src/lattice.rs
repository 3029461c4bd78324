//! Functions constant on unit lattice cells, their regularized norms, and
//! the indicator witnesses that realize the lower bound `c·R^{γ_V}`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datum::{operator_norm, BlDatum};
use crate::error::{invalid, Result};
use crate::subspace::{random_unit, Matrix, Subspace, Vector};

/// Nonnegative function on R^m constant on each cell `v + [0,1)^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFn {
    m: usize,
    cells: BTreeMap<Vec<i64>, f64>,
}

impl LatticeFn {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            cells: BTreeMap::new(),
        }
    }

    pub fn from_cells<I>(m: usize, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        let mut f = Self::new(m);
        for (cell, value) in cells {
            f.set(cell, value)?;
        }
        Ok(f)
    }

    /// Indicator of the union of the given cells.
    pub fn indicator<I: IntoIterator<Item = Vec<i64>>>(m: usize, cells: I) -> Result<Self> {
        Self::from_cells(m, cells.into_iter().map(|c| (c, 1.0)))
    }

    pub fn set(&mut self, cell: Vec<i64>, value: f64) -> Result<()> {
        if cell.len() != self.m {
            return invalid(format!("cell {cell:?} is not in Z^{}", self.m));
        }
        if !(value >= 0.0) || !value.is_finite() {
            return invalid(format!("cell value {value} must be finite and nonnegative"));
        }
        if value == 0.0 {
            self.cells.remove(&cell);
        } else {
            self.cells.insert(cell, value);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn support_len(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.cells.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn max_value(&self) -> f64 {
        self.cells.values().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::from_cells(self.m, self.cells.iter().map(|(k, &v)| (k.clone(), v * lambda)))
    }

    /// `∫ f`: each cell has unit volume.
    pub fn integral(&self) -> f64 {
        self.cells.values().sum()
    }

    pub fn value_at_cell(&self, cell: &[i64]) -> f64 {
        self.cells.get(cell).copied().unwrap_or(0.0)
    }

    /// Value at `x`, looked up in the cell `⌊x⌋`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let cell: Vec<i64> = x.iter().map(|c| c.floor() as i64).collect();
        self.value_at_cell(&cell)
    }

    /// Like [`eval`](Self::eval) but reuses `scratch` for the cell index.
    pub(crate) fn eval_into(&self, x: &[f64], scratch: &mut Vec<i64>) -> f64 {
        scratch.clear();
        scratch.extend(x.iter().map(|c| c.floor() as i64));
        self.value_at_cell(scratch)
    }
}

impl Serialize for LatticeFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.cells.iter())
    }
}

impl<'de> Deserialize<'de> for LatticeFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<(Vec<i64>, f64)> = Vec::deserialize(d)?;
        let m = match pairs.first() {
            Some((cell, _)) => cell.len(),
            None => return Err(serde::de::Error::custom("empty cell list does not fix the dimension")),
        };
        LatticeFn::from_cells(m, pairs).map_err(serde::de::Error::custom)
    }
}

/// Index set `𝓛` of the regularized norm.
#[derive(Clone, Debug)]
pub enum LatticeSet {
    /// All of Z^m.
    All,
    Points(BTreeSet<Vec<i64>>),
}

/// `‖f‖_{A,𝓛} = Σ_{v∈𝓛} sup_{v+[0,A)^m} f`.
///
/// A cell `k + [0,1)^m` meets the window `v + [0,A)^m` exactly when
/// `v_i ≤ k_i ≤ v_i + ⌈A⌉ − 1` for every coordinate.
pub fn norm_a(f: &LatticeFn, a: f64, lattice: &LatticeSet) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return invalid(format!("window scale A = {a} must be at least 1"));
    }
    let width = a.ceil() as i64;
    let offsets = box_points(f.m, 0, width - 1);
    match lattice {
        LatticeSet::All => {
            let mut window_max: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
            for (cell, value) in f.cells() {
                for o in &offsets {
                    let v: Vec<i64> = cell.iter().zip(o).map(|(k, d)| k - d).collect();
                    let e = window_max.entry(v).or_insert(0.0);
                    *e = e.max(value);
                }
            }
            Ok(window_max.values().sum())
        }
        LatticeSet::Points(points) => {
            let mut total = 0.0;
            for v in points {
                if v.len() != f.m {
                    return invalid(format!("lattice point {v:?} is not in Z^{}", f.m));
                }
                let best = offsets
                    .iter()
                    .map(|o| {
                        let k: Vec<i64> = v.iter().zip(o).map(|(a, b)| a + b).collect();
                        f.value_at_cell(&k)
                    })
                    .fold(0.0, f64::max);
                total += best;
            }
            Ok(total)
        }
    }
}

/// All integer points of `[lo, hi]^m`, last coordinate fastest.
pub(crate) fn box_points(m: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if hi < lo {
        return out;
    }
    let mut cur = vec![lo; m];
    loop {
        out.push(cur.clone());
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < hi {
                cur[i] += 1;
                for c in cur.iter_mut().skip(i + 1) {
                    *c = lo;
                }
                break;
            }
        }
    }
}

/// `S = {x : |P_V x| ≤ c0·R, |P_{V⊥} x| ≤ c0}`.
#[derive(Clone, Debug, Serialize)]
pub struct Slab {
    pub subspace: Subspace,
    pub along: f64,
    pub across: f64,
}

impl Slab {
    pub fn contains(&self, x: &Vector) -> bool {
        let along = self.subspace.projected_norm(x);
        let total = x.norm_squared();
        let across = (total - along * along).max(0.0).sqrt();
        along <= self.along + 1e-12 && across <= self.across + 1e-12
    }

    /// A point of the slab: independent uniform-direction draws in V and V⊥
    /// with radii scaled by uniform factors.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        let n = self.subspace.ambient_dim();
        let comp = self.subspace.complement();
        let mut x = Vector::zeros(n);
        for (s, radius) in [(&self.subspace, self.along), (&comp, self.across)] {
            if s.dim() > 0 {
                let u = random_unit(s.dim(), rng);
                let t: f64 = rng.random();
                x += s.basis() * (u * (t * radius));
            }
        }
        x
    }
}

/// Lower-bound witness for a subspace `V` at scale `R`.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessSet {
    pub subspace: Subspace,
    pub r: f64,
    pub c0: f64,
    /// `S_j` in lexicographic order.
    pub cells: Vec<Vec<Vec<i64>>>,
    /// Indicators of `∪_{v∈S_j} (v + [0,1)^{n_j})`.
    pub functions: Vec<LatticeFn>,
    pub slab: Slab,
}

impl WitnessSet {
    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(|s| s.len()).collect()
    }
}

/// `c0 = min(1/(2|π_1|), …, 1/(2|π_J|), 1/√2)`.
pub fn slab_constant(d: &BlDatum) -> f64 {
    d.maps()
        .iter()
        .map(|m| 0.5 / operator_norm(m))
        .fold(std::f64::consts::FRAC_1_SQRT_2, f64::min)
}

/// Builds the witness `S_j = {v ∈ Z^{n_j} : |P_{π_j V} v| ≤ R + √n, |P_{(π_j V)⊥} v| ≤ 1 + √n}`
/// by exact enumeration of the integer box that contains it.
pub fn witness(d: &BlDatum, v: &Subspace, r: f64) -> Result<WitnessSet> {
    if !(r >= 1.0) || !r.is_finite() {
        return invalid(format!("witness scale R = {r} must be at least 1"));
    }
    if v.ambient_dim() != d.n() {
        return invalid(format!("subspace lives in R^{}, datum in R^{}", v.ambient_dim(), d.n()));
    }
    let root_n = (d.n() as f64).sqrt();
    let along_bound = r + root_n;
    let across_bound = 1.0 + root_n;
    let radius = (along_bound * along_bound + across_bound * across_bound).sqrt();
    let reach = radius.floor() as i64;

    let mut cells = Vec::with_capacity(d.len());
    let mut functions = Vec::with_capacity(d.len());
    for m in d.maps() {
        let image = Subspace::span(&(m * v.basis()))?;
        let s_j: Vec<Vec<i64>> = box_points(m.nrows(), -reach, reach)
            .into_iter()
            .filter(|p| {
                let x = Vector::from_iterator(p.len(), p.iter().map(|&c| c as f64));
                let along = image.projected_norm(&x);
                let across = (x.norm_squared() - along * along).max(0.0).sqrt();
                along <= along_bound + 1e-9 && across <= across_bound + 1e-9
            })
            .collect();
        functions.push(LatticeFn::indicator(m.nrows(), s_j.iter().cloned())?);
        cells.push(s_j);
    }
    let c0 = slab_constant(d);
    Ok(WitnessSet {
        subspace: v.clone(),
        r,
        c0,
        cells,
        functions,
        slab: Slab {
            subspace: v.clone(),
            along: c0 * r,
            across: c0,
        },
    })
}

/// `π x` for a row-major map, written into `out`.
pub(crate) fn apply_rows(m: &Matrix, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..m.nrows()).map(|i| (0..m.ncols()).map(|k| m[(i, k)] * x[k]).sum::<f64>()));
}
