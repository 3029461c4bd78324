//! The growth exponent `γ = sup_V [dim V − Σ p_j dim π_j(V)]` and friends.
//!
//! The supremum is taken over a finite candidate set: the kernels of the
//! maps, their closure under sum and intersection, coordinate subspaces, and
//! seeded random subspaces. Since the objective only depends on the tuple of
//! image dimensions, the resulting `gamma` is a certified lower bound for the
//! true supremum and in practice equals it on structured data.

use rayon::prelude::*;
use serde::Serialize;

use crate::datum::{perturb, BlDatum, PerturbationSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::subspace::{image_dim, random_subspace_with, Subspace};

/// Exponent jumps smaller than this are treated as floating noise.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Largest ambient dimension for which every coordinate subspace is added.
pub const COORDINATE_MAX_DIM: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Trivial,
    Full,
    Kernel,
    LatticeClosure,
    Coordinate,
    Random,
    User,
}

#[derive(Clone, Debug)]
pub struct CandidateOptions {
    pub random_per_dim: usize,
    pub closure_cap: usize,
    pub extra: Vec<Subspace>,
    pub seed: u64,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            random_per_dim: 2000,
            closure_cap: 256,
            extra: Vec::new(),
            seed: 0,
        }
    }
}

impl CandidateOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Lattice-only search: no random draws.
    pub fn structured() -> Self {
        Self {
            random_per_dim: 0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub subspace: Subspace,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
    /// The sum/intersection closure stopped at the cap.
    pub truncated: bool,
    index: DedupIndex,
}

/// Sorted `(dim, key, entry)` triples. The key is a fixed linear functional
/// of the projection matrix, so subspaces within [`SAME_SUBSPACE_TOL`] of
/// each other have keys within `key_slack`.
///
/// [`SAME_SUBSPACE_TOL`]: crate::subspace::SAME_SUBSPACE_TOL
#[derive(Clone, Debug, Default)]
struct DedupIndex {
    sorted: Vec<(usize, f64, usize)>,
    weights: Vec<f64>,
    key_slack: f64,
}

impl DedupIndex {
    fn new(n: usize) -> Self {
        // Irrational-ish weights so distinct projections rarely collide.
        let weights: Vec<f64> = (0..n * n)
            .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
            .collect();
        let wnorm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        Self {
            sorted: Vec::new(),
            weights,
            key_slack: wnorm * (2.0 * n as f64).sqrt() * crate::subspace::SAME_SUBSPACE_TOL * 1.01,
        }
    }

    fn key(&self, s: &Subspace) -> f64 {
        s.projection_matrix()
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }
}

impl CandidateSet {
    fn new(n: usize) -> Self {
        Self {
            entries: Vec::new(),
            truncated: false,
            index: DedupIndex::new(n),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subspaces(&self) -> impl Iterator<Item = &Subspace> {
        self.entries.iter().map(|c| &c.subspace)
    }

    pub fn contains(&self, s: &Subspace) -> bool {
        self.find(s).is_some()
    }

    fn find(&self, s: &Subspace) -> Option<usize> {
        let key = self.index.key(s);
        let lo = (s.dim(), key - self.index.key_slack);
        let start = self.index.sorted.partition_point(|&(d, k, _)| (d, k) < lo);
        self.index.sorted[start..]
            .iter()
            .take_while(|&&(d, k, _)| d == s.dim() && k <= key + self.index.key_slack)
            .find(|&&(_, _, i)| self.entries[i].subspace.same_as(s))
            .map(|&(_, _, i)| i)
    }

    /// Adds `s` unless an equal subspace is already present.
    pub fn push(&mut self, s: Subspace, provenance: Provenance) -> bool {
        if self.find(&s).is_some() {
            return false;
        }
        let key = self.index.key(&s);
        let pos = self.index.sorted.partition_point(|&(d, k, _)| (d, k) < (s.dim(), key));
        self.index.sorted.insert(pos, (s.dim(), key, self.entries.len()));
        self.entries.push(Candidate {
            subspace: s,
            provenance,
        });
        true
    }
}

fn axis_subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1u32 << n) - 1).map(move |mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
}

/// Finite search set for the supremum over subspaces.
pub fn candidate_subspaces(d: &BlDatum, opts: &CandidateOptions) -> Result<CandidateSet> {
    let n = d.n();
    let mut set = CandidateSet::new(n);
    set.push(Subspace::zero(n), Provenance::Trivial);
    set.push(Subspace::full(n), Provenance::Full);

    let kernels: Vec<Subspace> = match d.kernels() {
        Some(k) => k.to_vec(),
        None => d
            .maps()
            .iter()
            .map(|m| Subspace::span(&m.transpose()).map(|rows| rows.complement()))
            .collect::<Result<_>>()?,
    };
    let mut lattice: Vec<Subspace> = Vec::new();
    for k in kernels {
        if set.push(k.clone(), Provenance::Kernel) {
            lattice.push(k);
        }
    }

    let mut added = 0usize;
    let mut i = 0;
    'closure: while i < lattice.len() {
        for k in 0..i {
            for combined in [lattice[i].sum(&lattice[k])?, lattice[i].intersect(&lattice[k])?] {
                if set.contains(&combined) {
                    continue;
                }
                if added == opts.closure_cap {
                    set.truncated = true;
                    break 'closure;
                }
                set.push(combined.clone(), Provenance::LatticeClosure);
                lattice.push(combined);
                added += 1;
            }
        }
        i += 1;
    }

    if n <= COORDINATE_MAX_DIM {
        for axes in axis_subsets(n) {
            set.push(Subspace::coordinate(n, &axes)?, Provenance::Coordinate);
        }
    }

    for k in 1..n {
        let mut rng = stream_rng(opts.seed, Stream::Candidates, k as u64);
        for _ in 0..opts.random_per_dim {
            set.push(random_subspace_with(n, k, &mut rng)?, Provenance::Random);
        }
    }

    for s in &opts.extra {
        if s.ambient_dim() != n {
            return invalid(format!(
                "extra candidate lives in R^{}, datum in R^{n}",
                s.ambient_dim()
            ));
        }
        set.push(s.clone(), Provenance::User);
    }
    Ok(set)
}

/// `(dim π_j(V))_j`.
pub fn image_dims(d: &BlDatum, v: &Subspace) -> Result<Vec<usize>> {
    if v.ambient_dim() != d.n() {
        return invalid(format!("subspace lives in R^{}, datum in R^{}", v.ambient_dim(), d.n()));
    }
    d.maps().iter().map(|m| image_dim(m, v)).collect()
}

fn value_from_dims(dim: usize, dims: &[usize], p: &[f64]) -> f64 {
    dim as f64 - p.iter().zip(dims).map(|(pj, &dj)| pj * dj as f64).sum::<f64>()
}

/// `dim V − Σ p_j dim π_j(V)`.
pub fn gamma_of(d: &BlDatum, v: &Subspace) -> Result<f64> {
    let dims = image_dims(d, v)?;
    Ok(value_from_dims(v.dim(), &dims, d.p()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Random sampling found nothing above the structured candidates.
    LatticeEnumerated,
    /// A random candidate beat the structured ones by more than 1e-6.
    LatticeSampled,
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateRow {
    pub id: usize,
    pub provenance: Provenance,
    pub dim: usize,
    pub dims: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentReport {
    pub gamma: f64,
    pub argmax_id: usize,
    pub argmax: Subspace,
    pub certification: Certification,
    pub truncated: bool,
    pub per_candidate: Vec<CandidateRow>,
}

fn ensure_valid(d: &BlDatum) -> Result<()> {
    let report = d.validate();
    if report.passed() {
        Ok(())
    } else {
        let msgs: Vec<String> = report.failures.iter().map(|f| f.to_string()).collect();
        Err(Error::InvalidInput(msgs.join("; ")))
    }
}

fn census(d: &BlDatum, set: &CandidateSet) -> Result<Vec<CandidateRow>> {
    set.entries
        .par_iter()
        .enumerate()
        .map(|(id, c)| {
            let dims = image_dims(d, &c.subspace)?;
            Ok(CandidateRow {
                id,
                provenance: c.provenance,
                dim: c.subspace.dim(),
                value: value_from_dims(c.subspace.dim(), &dims, d.p()),
                dims,
            })
        })
        .collect()
}

/// Maximum of [`gamma_of`] over [`candidate_subspaces`]. Ties go to the
/// smallest dimension, then to the earliest candidate.
pub fn gamma_sup(d: &BlDatum, opts: &CandidateOptions) -> Result<ExponentReport> {
    ensure_valid(d)?;
    let set = candidate_subspaces(d, opts)?;
    let rows = census(d, &set)?;
    let gamma = rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let argmax_id = rows
        .iter()
        .filter(|r| r.value >= gamma - 1e-12)
        .min_by_key(|r| (r.dim, r.id))
        .map(|r| r.id)
        .expect("candidate set contains {0}");
    let structured = rows
        .iter()
        .filter(|r| r.provenance != Provenance::Random)
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let certification = if gamma > structured + VIOLATION_TOL {
        Certification::LatticeSampled
    } else {
        Certification::LatticeEnumerated
    };
    Ok(ExponentReport {
        gamma,
        argmax_id,
        argmax: set.entries[argmax_id].subspace.clone(),
        certification,
        truncated: set.truncated,
        per_candidate: rows,
    })
}

/// `Σ_{r=1}^n max(1 − Σ_{j: n_j ≥ r} p_j, 0)`.
pub fn locbd_exponent(d: &BlDatum) -> Result<f64> {
    ensure_valid(d)?;
    let dims = d.target_dims();
    Ok((1..=d.n())
        .map(|r| {
            let mass: f64 = dims
                .iter()
                .zip(d.p())
                .filter(|(&nj, _)| nj >= r)
                .map(|(_, pj)| pj)
                .sum();
            (1.0 - mass).max(0.0)
        })
        .sum())
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolytopeViolation {
    Box {
        index: usize,
        value: f64,
    },
    Halfspace {
        candidate_id: usize,
        subspace: Subspace,
        slack: f64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct PolytopeVerdict {
    pub contained: bool,
    pub violation: Option<PolytopeViolation>,
}

/// Membership of `q` in `K = {q ∈ [0,1]^J : n − Σ q_j n_j ≥ dim V − Σ q_j dim π_j(V) ∀V}`,
/// with `V` ranging over the candidate set. On failure the most violated
/// constraint is returned.
pub fn bl_polytope_contains(d: &BlDatum, q: &[f64], opts: &CandidateOptions) -> Result<PolytopeVerdict> {
    if q.len() != d.len() {
        return invalid(format!("q has {} entries, datum has {} maps", q.len(), d.len()));
    }
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, &x)| !(0.0..=1.0).contains(&x)) {
        return Ok(PolytopeVerdict {
            contained: false,
            violation: Some(PolytopeViolation::Box { index, value }),
        });
    }
    let probe = d.with_exponents(q.to_vec());
    let set = candidate_subspaces(&probe, opts)?;
    let rows = census(&probe, &set)?;
    let n = d.n() as f64;
    let top = n - q
        .iter()
        .zip(d.target_dims())
        .map(|(qj, nj)| qj * nj as f64)
        .sum::<f64>();
    let worst = rows
        .iter()
        .map(|r| (r.id, top - r.value))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("candidate set is never empty");
    if worst.1 < -1e-12 {
        Ok(PolytopeVerdict {
            contained: false,
            violation: Some(PolytopeViolation::Halfspace {
                candidate_id: worst.0,
                subspace: set.entries[worst.0].subspace.clone(),
                slack: worst.1,
            }),
        })
    } else {
        Ok(PolytopeVerdict {
            contained: true,
            violation: None,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanSample {
    pub index: usize,
    pub gamma: f64,
    /// Grassmannian distance of each perturbed kernel from the original.
    pub distances: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub nu: f64,
    pub gamma_base: f64,
    pub max_gamma: f64,
    pub violations: usize,
    pub samples: Vec<ScanSample>,
}

/// Recomputes the exponent on `spec.samples` ν-perturbations of `d`.
///
/// Each perturbed datum gets a fresh candidate set built from its own kernels,
/// plus the unperturbed argmax.
pub fn stability_scan(d: &BlDatum, spec: &PerturbationSpec, opts: &CandidateOptions) -> Result<StabilityReport> {
    let base_kernels = d.require_kernels()?;
    let base = gamma_sup(d, opts)?;
    let mut local = opts.clone();
    local.extra.push(base.argmax.clone());

    let samples: Vec<ScanSample> = (0..spec.samples)
        .into_par_iter()
        .map(|index| {
            let moved = perturb(d, spec, index)?;
            let distances = moved
                .require_kernels()?
                .iter()
                .zip(base_kernels)
                .map(|(a, b)| a.grassmann_distance(b))
                .collect::<Result<Vec<_>>>()?;
            let gamma = gamma_sup(&moved, &local)?.gamma;
            Ok(ScanSample {
                index,
                gamma,
                distances,
            })
        })
        .collect::<Result<_>>()?;

    let max_gamma = samples.iter().map(|s| s.gamma).fold(base.gamma, f64::max);
    let violations = samples.iter().filter(|s| s.gamma > base.gamma + VIOLATION_TOL).count();
    Ok(StabilityReport {
        nu: spec.nu,
        gamma_base: base.gamma,
        max_gamma,
        violations,
        samples,
    })
}

/// Number of perturbation draws per radius in [`nu_estimate`].
pub const NU_ESTIMATE_SAMPLES: usize = 200;

/// Largest `ν ∈ {2^{-1}, …, 2^{-20}}` at which a stability scan sees no
/// exponent increase, or 0 if there is none.
pub fn nu_estimate(d: &BlDatum, seed: u64) -> Result<f64> {
    nu_estimate_with(d, seed, &CandidateOptions::with_seed(seed))
}

pub fn nu_estimate_with(d: &BlDatum, seed: u64, opts: &CandidateOptions) -> Result<f64> {
    d.require_kernels()?;
    for k in 1..=20 {
        let nu = 0.5f64.powi(k);
        let spec = PerturbationSpec::new(nu, seed, NU_ESTIMATE_SAMPLES)?;
        if stability_scan(d, &spec, opts)?.violations == 0 {
            return Ok(nu);
        }
    }
    Ok(0.0)
}
