//! The truncated Brascamp-Lieb functional
//! `∫_{[-R,R]^n} Π f_j(π_j x)^{p_j} dx / Π (∫ f_j)^{p_j}`
//! for lattice-constant inputs, and its growth in `R`.

use rand::Rng;
use serde::Serialize;

use crate::datum::BlDatum;
use crate::error::{invalid, Result};
use crate::exponent::{candidate_subspaces, CandidateOptions, Provenance};
use crate::fit::{fit_loglog, LogLogFit};
use crate::grid::{midpoint_integral, GridSpec};
use crate::lattice::{apply_rows, witness, LatticeFn};
use crate::rng::{stream_rng, Stream};
use crate::subspace::{Matrix, Subspace};

/// Largest support drawn for a random indicator in [`empirical_blr`].
const RANDOM_CELLS_MAX: usize = 8;

fn check_inputs(d: &BlDatum, fs: &[LatticeFn], r: f64) -> Result<()> {
    if fs.len() != d.len() {
        return invalid(format!("{} functions for {} maps", fs.len(), d.len()));
    }
    for (j, f) in fs.iter().enumerate() {
        if f.dim() != d.target_dim(j) {
            return invalid(format!(
                "f[{j}] lives on R^{} but maps[{j}] targets R^{}",
                f.dim(),
                d.target_dim(j)
            ));
        }
    }
    if !(r >= 1.0) || !r.is_finite() {
        return invalid(format!("truncation radius R = {r} must be at least 1"));
    }
    Ok(())
}

/// Midpoint-rule value of `∫_{[-R,R]^n} Π_j f_j(π_j x)^{p_j} dx`.
/// Factors with `p_j = 0` are omitted.
pub fn bl_integral(d: &BlDatum, fs: &[LatticeFn], r: f64, grid: &GridSpec) -> Result<f64> {
    check_inputs(d, fs, r)?;
    let active: Vec<(&Matrix, &LatticeFn, f64)> = d
        .maps()
        .iter()
        .zip(fs)
        .zip(d.p())
        .filter(|(_, &p)| p > 0.0)
        .map(|((m, f), &p)| (m, f, p))
        .collect();
    midpoint_integral(
        d.n(),
        grid,
        -r,
        r,
        || (Vec::new(), Vec::new()),
        |(y, cell), x| {
            let mut prod = 1.0;
            for &(m, f, p) in &active {
                apply_rows(m, x, y);
                let v = f.eval_into(y, cell);
                if v == 0.0 {
                    return 0.0;
                }
                prod *= if p == 1.0 { v } else { v.powf(p) };
            }
            prod
        },
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub r: f64,
    pub integral: f64,
    pub denominators: Vec<f64>,
    pub ratio: f64,
    /// `|I(M) − I(M/2)| / I(M)`.
    pub residual: f64,
}

/// The quotient `∫ Π f_j(π_j x)^{p_j} / Π (∫ f_j)^{p_j}` at resolution `grid`,
/// with the half-resolution residual.
pub fn bl_ratio(d: &BlDatum, fs: &[LatticeFn], r: f64, grid: &GridSpec) -> Result<RatioReport> {
    check_inputs(d, fs, r)?;
    let denominators: Vec<f64> = fs.iter().map(LatticeFn::integral).collect();
    let mut scale = 1.0;
    for (j, (&den, &p)) in denominators.iter().zip(d.p()).enumerate() {
        if p > 0.0 {
            if den <= 0.0 {
                return invalid(format!("f[{j}] has zero integral but p[{j}] = {p} > 0"));
            }
            scale *= den.powf(p);
        }
    }
    let integral = bl_integral(d, fs, r, grid)?;
    let coarse = bl_integral(d, fs, r, &grid.coarser())?;
    let residual = if integral > 0.0 {
        (integral - coarse).abs() / integral
    } else if coarse == 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(RatioReport {
        r,
        integral,
        denominators,
        ratio: integral / scale,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessId {
    Candidate { id: usize, provenance: Provenance },
    Random { index: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalBlr {
    pub best: RatioReport,
    pub witness: WitnessId,
    /// Number of input tuples tried.
    pub pool: usize,
}

fn random_indicator<R: Rng>(m: usize, r: f64, rng: &mut R) -> Result<LatticeFn> {
    let reach = r.ceil() as i64 + 1;
    let count = rng.random_range(1..=RANDOM_CELLS_MAX);
    let cells = (0..count).map(|_| (0..m).map(|_| rng.random_range(-reach..reach)).collect::<Vec<i64>>());
    LatticeFn::indicator(m, cells)
}

/// Best ratio over the witnesses of every candidate subspace plus `budget`
/// random sparse indicator tuples.
pub fn empirical_blr(
    d: &BlDatum,
    r: f64,
    grid: &GridSpec,
    budget: usize,
    seed: u64,
    opts: &CandidateOptions,
) -> Result<EmpiricalBlr> {
    let set = candidate_subspaces(d, opts)?;
    let mut best: Option<(RatioReport, WitnessId)> = None;
    let mut consider = |report: RatioReport, id: WitnessId| {
        if best.as_ref().is_none_or(|(b, _)| report.ratio > b.ratio) {
            best = Some((report, id));
        }
    };
    for (id, c) in set.entries.iter().enumerate() {
        let w = witness(d, &c.subspace, r)?;
        consider(
            bl_ratio(d, &w.functions, r, grid)?,
            WitnessId::Candidate {
                id,
                provenance: c.provenance,
            },
        );
    }
    let mut rng = stream_rng(seed, Stream::Witness, 0);
    for index in 0..budget {
        let fs = (0..d.len())
            .map(|j| random_indicator(d.target_dim(j), r, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        consider(bl_ratio(d, &fs, r, grid)?, WitnessId::Random { index });
    }
    let (best, witness) = best.expect("candidate set contains {0}");
    Ok(EmpiricalBlr {
        best,
        witness,
        pool: set.len() + budget,
    })
}

#[derive(Clone, Debug)]
pub enum GrowthMode {
    /// Lower-bound witness of a fixed subspace at every `R`.
    WitnessOf(Subspace),
    Empirical {
        budget: usize,
        seed: u64,
        opts: CandidateOptions,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub fit: LogLogFit,
    pub rows: Vec<RatioReport>,
}

/// Log-log slope of the ratio against `R`.
pub fn fit_growth(d: &BlDatum, r_list: &[f64], grid: &GridSpec, mode: &GrowthMode) -> Result<GrowthFit> {
    if r_list.len() < 3 {
        return invalid("growth fits need at least three radii");
    }
    if r_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("radii must be strictly increasing");
    }
    let rows = r_list
        .iter()
        .map(|&r| match mode {
            GrowthMode::WitnessOf(v) => {
                let w = witness(d, v, r)?;
                bl_ratio(d, &w.functions, r, grid)
            }
            GrowthMode::Empirical { budget, seed, opts } => {
                empirical_blr(d, r, grid, *budget, *seed, opts).map(|e| e.best)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = rows.iter().find(|row| !(row.ratio > 0.0)) {
        return invalid(format!("ratio at R = {} is {}, cannot take logs", bad.r, bad.ratio));
    }
    let ratios: Vec<f64> = rows.iter().map(|row| row.ratio).collect();
    Ok(GrowthFit {
        fit: fit_loglog(r_list, &ratios)?,
        rows,
    })
}
