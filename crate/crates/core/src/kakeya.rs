//! Tube families, their overlap integral over `[-1,1]^n`, the generalized
//! multilinear Kakeya bound, and a measured multi-scale ledger.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::{perturb_subspace, BlDatum};
use crate::error::{invalid, Result};
use crate::exponent::{gamma_sup, CandidateOptions};
use crate::fit::{fit_loglog, LogLogFit};
use crate::grid::{midpoint_integral, GridSpec};
use crate::integrator::empirical_blr;
use crate::rng::{stream_rng, Stream};
use crate::subspace::{Subspace, Vector};

/// δ-neighborhood of the affine subspace `base + direction`.
#[derive(Clone, Debug)]
pub struct Tube {
    direction: Subspace,
    normal: Subspace,
    base: Vector,
    radius: f64,
}

impl Tube {
    pub fn new(direction: Subspace, base: Vector, radius: f64) -> Result<Self> {
        if base.len() != direction.ambient_dim() {
            return invalid("tube base and direction live in different spaces");
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("tube radius {radius} must be positive"));
        }
        Ok(Self {
            normal: direction.complement(),
            direction,
            base,
            radius,
        })
    }

    pub fn direction(&self) -> &Subspace {
        &self.direction
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance_sq(x) <= self.radius * self.radius
    }

    /// `|P_{direction⊥}(x − base)|²`.
    fn distance_sq(&self, x: &[f64]) -> f64 {
        let b = self.normal.basis();
        let mut total = 0.0;
        for c in 0..b.ncols() {
            let mut dot = 0.0;
            for (i, xi) in x.iter().enumerate() {
                dot += b[(i, c)] * (xi - self.base[i]);
            }
            total += dot * dot;
        }
        total
    }

    fn with_radius(&self, radius: f64) -> Self {
        Self { radius, ..self.clone() }
    }
}

pub fn tube_membership(t: &Tube, x: &[f64]) -> Result<bool> {
    if x.len() != t.base.len() {
        return invalid("point and tube live in different spaces");
    }
    Ok(t.contains(x))
}

/// Tubes of a common radius whose directions lie near `direction_center`.
#[derive(Clone, Debug)]
pub struct TubeFamily {
    pub j: usize,
    tubes: Vec<Tube>,
    direction_center: Subspace,
    max_deviation: f64,
}

impl TubeFamily {
    pub fn new(j: usize, direction_center: Subspace, tubes: Vec<Tube>) -> Result<Self> {
        let mut max_deviation: f64 = 0.0;
        for (i, t) in tubes.iter().enumerate() {
            if t.radius != tubes[0].radius {
                return invalid(format!("tube {i} radius differs from the family radius"));
            }
            max_deviation = max_deviation.max(t.direction.grassmann_distance(&direction_center)?);
        }
        Ok(Self {
            j,
            tubes,
            direction_center,
            max_deviation,
        })
    }

    pub fn tubes(&self) -> &[Tube] {
        &self.tubes
    }

    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }

    pub fn direction_center(&self) -> &Subspace {
        &self.direction_center
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }

    pub fn radius(&self) -> Option<f64> {
        self.tubes.first().map(|t| t.radius)
    }

    /// Number of tubes containing `x`.
    pub fn count_at(&self, x: &[f64]) -> usize {
        self.tubes.iter().filter(|t| t.contains(x)).count()
    }

    /// Same tubes with every radius set to `radius`.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return invalid(format!("tube radius {radius} must be positive"));
        }
        Ok(Self {
            tubes: self.tubes.iter().map(|t| t.with_radius(radius)).collect(),
            ..self.clone()
        })
    }
}

/// `count` tubes of radius `delta` with directions at distance `≤ nu` from
/// `center` and bases uniform in `[-1,1]^n`.
pub fn random_tube_family(center: &Subspace, nu: f64, delta: f64, count: usize, seed: u64) -> Result<TubeFamily> {
    let mut rng = stream_rng(seed, Stream::Tubes, 0);
    random_tube_family_with(0, center, nu, delta, count, &mut rng)
}

pub fn random_tube_family_with<R: Rng>(
    j: usize,
    center: &Subspace,
    nu: f64,
    delta: f64,
    count: usize,
    rng: &mut R,
) -> Result<TubeFamily> {
    if !(nu >= 0.0) {
        return invalid("nu must be nonnegative");
    }
    let n = center.ambient_dim();
    let tubes = (0..count)
        .map(|_| {
            let target = nu * rng.random::<f64>();
            let direction = perturb_subspace(center, target, rng);
            let base = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            Tube::new(direction, base, delta)
        })
        .collect::<Result<Vec<_>>>()?;
    TubeFamily::new(j, center.clone(), tubes)
}

/// `∫_{[-1,1]^n} Π_j N_j(x)^{p_j} dx` with `N_j(x) = #{T ∈ 𝕋_j : x ∈ T}`.
pub fn overlap_integral(families: &[TubeFamily], p: &[f64], grid: &GridSpec) -> Result<f64> {
    if families.len() != p.len() {
        return invalid(format!("{} families for {} exponents", families.len(), p.len()));
    }
    let Some(n) = families.first().map(|f| f.direction_center.ambient_dim()) else {
        return invalid("no tube families given");
    };
    if families.iter().any(|f| f.direction_center.ambient_dim() != n) {
        return invalid("tube families live in different spaces");
    }
    let active: Vec<(&TubeFamily, f64)> = families
        .iter()
        .zip(p)
        .filter(|(_, &pj)| pj > 0.0)
        .map(|(f, &pj)| (f, pj))
        .collect();
    if active.iter().any(|(f, _)| f.is_empty()) {
        return Ok(0.0);
    }
    midpoint_integral(
        n,
        grid,
        -1.0,
        1.0,
        || (),
        |_, x| {
            let mut prod = 1.0;
            for &(f, pj) in &active {
                let c = f.count_at(x);
                if c == 0 {
                    return 0.0;
                }
                prod *= if pj == 1.0 { c as f64 } else { (c as f64).powf(pj) };
            }
            prod
        },
    )
}

/// `C·δ^{n−ε}·δ^{−γ}·Π counts_j^{p_j}` for a known exponent `γ`.
pub fn kakeya_bound_with_gamma(
    n: usize,
    p: &[f64],
    gamma: f64,
    delta: f64,
    counts: &[usize],
    epsilon: f64,
    c_eps: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    if !(epsilon >= 0.0) || !(c_eps > 0.0) {
        return invalid("epsilon must be nonnegative and C positive");
    }
    if counts.len() != p.len() {
        return invalid(format!("{} counts for {} exponents", counts.len(), p.len()));
    }
    let tubes: f64 = counts
        .iter()
        .zip(p)
        .filter(|(_, &pj)| pj > 0.0)
        .map(|(&c, &pj)| (c as f64).powf(pj))
        .product();
    Ok(c_eps * delta.powf(n as f64 - epsilon - gamma) * tubes)
}

/// The right-hand side of the generalized multilinear Kakeya inequality,
/// with the supremum over subspaces evaluated by [`gamma_sup`].
pub fn kakeya_bound(
    d0: &BlDatum,
    delta: f64,
    counts: &[usize],
    epsilon: f64,
    c_eps: f64,
    opts: &CandidateOptions,
) -> Result<f64> {
    let gamma = gamma_sup(d0, opts)?.gamma;
    kakeya_bound_with_gamma(d0.n(), d0.p(), gamma, delta, counts, epsilon, c_eps)
}

/// `T̃ = T + B(0, extra)`: every radius grows by `extra`.
pub fn inflate_family(f: &TubeFamily, extra: f64) -> Result<TubeFamily> {
    if !(extra >= 0.0) {
        return invalid("inflation must be nonnegative");
    }
    match f.radius() {
        Some(r) => f.with_radius(r + extra),
        None => Ok(f.clone()),
    }
}

/// Default inflation constant `c = 2√n` in `T̃ = T + B(0, cδ/ω)`.
pub fn default_inflation_constant(n: usize) -> f64 {
    2.0 * (n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub omega: f64,
    pub ell: usize,
}

/// Smallest `ℓ ≥ 1` with `δ/ω^ℓ ≥ 1`.
pub fn steps_to_unit_scale(delta: f64, omega: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 1.0) || !(omega > 0.0 && omega < 1.0) {
        return invalid(format!("need 0 < delta ≤ 1 and 0 < omega < 1, got {delta}, {omega}"));
    }
    let exact = delta.ln() / omega.ln();
    Ok(((exact - 1e-9).ceil() as usize).max(1))
}

/// `ω = (Cκ)^{−1/ε}` and the matching number of steps `ℓ`.
pub fn multiscale_schedule(delta: f64, epsilon: f64, c_kappa: f64) -> Result<Schedule> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta = {delta} must lie in (0, 1)"));
    }
    if !(epsilon > 0.0) || !(c_kappa > 1.0) {
        return invalid("need epsilon > 0 and C·kappa > 1");
    }
    let omega = c_kappa.powf(-1.0 / epsilon);
    Ok(Schedule {
        omega,
        ell: steps_to_unit_scale(delta, omega)?,
    })
}

/// How tube families are drawn when measuring `D̂`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySampling {
    pub counts: Vec<usize>,
    pub nu: f64,
    pub samples: usize,
}

fn draw_families(
    d0: &BlDatum,
    sampling: &FamilySampling,
    radius: f64,
    seed: u64,
    sample: usize,
) -> Result<Vec<TubeFamily>> {
    let kernels = d0.require_kernels()?;
    if sampling.counts.len() != kernels.len() {
        return invalid(format!(
            "{} tube counts for {} maps",
            sampling.counts.len(),
            kernels.len()
        ));
    }
    kernels
        .iter()
        .zip(&sampling.counts)
        .enumerate()
        .map(|(j, (center, &count))| {
            let index = (sample * kernels.len() + j) as u64;
            let mut rng = stream_rng(seed, Stream::Tubes, index);
            random_tube_family_with(j, center, sampling.nu, radius, count, &mut rng)
        })
        .collect()
}

/// Overlaps of every sampled family tuple at radius `radius`, in sample order.
fn sampled_overlaps(
    d0: &BlDatum,
    sampling: &FamilySampling,
    radius: f64,
    grid: &GridSpec,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..sampling.samples)
        .into_par_iter()
        .map(|s| {
            let fams = draw_families(d0, sampling, radius, seed, s)?;
            overlap_integral(&fams, d0.p(), grid)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerRow {
    pub step: usize,
    pub scale: f64,
    pub d_hat: f64,
    pub d_hat_next: f64,
    /// `ω^{n − Σ p_j n_j}·BL̂(ω^{-1})`.
    pub bound_factor: f64,
    /// `D̂(δ) / (bound_factor · D̂(δ/ω))`.
    pub kappa: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiscaleLedger {
    pub delta: f64,
    pub omega: f64,
    pub ell: usize,
    pub bl_hat: f64,
    pub kappa_measured: f64,
    pub rows: Vec<LedgerRow>,
}

/// Extra knobs for the ledger's `BL̂(ω^{-1})` estimate.
#[derive(Clone, Debug)]
pub struct LedgerOptions {
    pub blr_budget: usize,
    pub blr_grid: Option<GridSpec>,
    pub candidates: CandidateOptions,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        Self {
            blr_budget: 16,
            blr_grid: None,
            candidates: CandidateOptions::structured(),
        }
    }
}

/// `D̂(scale)`: best normalized overlap over the sampled families.
pub fn measured_d(d0: &BlDatum, sampling: &FamilySampling, scale: f64, grid: &GridSpec, seed: u64) -> Result<f64> {
    let norm: f64 = sampling
        .counts
        .iter()
        .zip(d0.p())
        .enumerate()
        .filter(|(_, (_, &pj))| pj > 0.0)
        .map(|(j, (&c, &pj))| (scale.powi(d0.target_dim(j) as i32) * c as f64).powf(pj))
        .product();
    if !(norm > 0.0) {
        return invalid("every family with a positive exponent needs at least one tube");
    }
    Ok(sampled_overlaps(d0, sampling, scale, grid, seed)?
        .into_iter()
        .fold(0.0, f64::max)
        / norm)
}

/// Measures `D̂` at `δ, δ/ω, …, δ/ω^ℓ` and records the per-step constant
/// that the multi-scale inequality would need. Nothing is asserted: `D̂` is a
/// sampled lower surrogate of a supremum.
pub fn multiscale_ledger(
    d0: &BlDatum,
    delta: f64,
    omega: f64,
    sampling: &FamilySampling,
    grid: &GridSpec,
    seed: u64,
    opts: &LedgerOptions,
) -> Result<MultiscaleLedger> {
    let ell = steps_to_unit_scale(delta, omega)?;
    let n = d0.n();
    let blr_grid = opts.blr_grid.unwrap_or_else(|| GridSpec::integrator_default(n));
    let bl_hat = empirical_blr(d0, 1.0 / omega, &blr_grid, opts.blr_budget, seed, &opts.candidates)?
        .best
        .ratio;
    let mass: f64 = d0
        .p()
        .iter()
        .enumerate()
        .map(|(j, pj)| pj * d0.target_dim(j) as f64)
        .sum();
    let bound_factor = omega.powf(n as f64 - mass) * bl_hat;

    let scales: Vec<f64> = (0..=ell).map(|s| delta / omega.powi(s as i32)).collect();
    let d_hats = scales
        .iter()
        .map(|&s| measured_d(d0, sampling, s, grid, seed))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<LedgerRow> = (0..ell)
        .map(|s| LedgerRow {
            step: s + 1,
            scale: scales[s],
            d_hat: d_hats[s],
            d_hat_next: d_hats[s + 1],
            bound_factor,
            kappa: d_hats[s] / (bound_factor * d_hats[s + 1]),
        })
        .collect();
    let kappa_measured = rows.iter().map(|r| r.kappa).fold(0.0, f64::max);
    Ok(MultiscaleLedger {
        delta,
        omega,
        ell,
        bl_hat,
        kappa_measured,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Mean overlap over the sampled families.
    pub overlap: f64,
    pub max_overlap: f64,
    pub bound: f64,
    /// `max_overlap / bound`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub gamma: f64,
    /// `n − γ`, the slope the bound predicts up to ε.
    pub predicted_slope: f64,
    pub epsilon: f64,
    /// Bound constant calibrated at the largest δ.
    pub c_calibrated: f64,
    pub violations: usize,
    pub fit: LogLogFit,
    pub rows: Vec<SweepRow>,
}

/// Overlap of random families against δ. Each sample keeps its tube
/// directions and bases across δ; only the radius changes.
pub fn delta_sweep(
    d0: &BlDatum,
    deltas: &[f64],
    sampling: &FamilySampling,
    epsilon: f64,
    grid: &GridSpec,
    seed: u64,
    opts: &CandidateOptions,
) -> Result<SweepReport> {
    if deltas.len() < 3 {
        return invalid("a δ-sweep needs at least three radii");
    }
    let gamma = gamma_sup(d0, opts)?.gamma;
    let per_delta = deltas
        .iter()
        .map(|&delta| {
            let overlaps = sampled_overlaps(d0, sampling, delta, grid, seed)?;
            let unit = kakeya_bound_with_gamma(d0.n(), d0.p(), gamma, delta, &sampling.counts, epsilon, 1.0)?;
            Ok((delta, overlaps, unit))
        })
        .collect::<Result<Vec<_>>>()?;

    let calib = per_delta
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least three radii");
    let c_calibrated = calib.1.iter().fold(0.0, |m: f64, &o| m.max(o)) / calib.2;
    let c_calibrated = if c_calibrated > 0.0 { c_calibrated } else { 1.0 };

    let mut violations = 0;
    let rows: Vec<SweepRow> = per_delta
        .iter()
        .map(|(delta, overlaps, unit)| {
            let bound = c_calibrated * unit;
            violations += overlaps.iter().filter(|&&o| o > bound * (1.0 + 1e-12)).count();
            let max_overlap = overlaps.iter().copied().fold(0.0, f64::max);
            SweepRow {
                delta: *delta,
                overlap: overlaps.iter().sum::<f64>() / overlaps.len().max(1) as f64,
                max_overlap,
                bound,
                ratio: max_overlap / bound,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.overlap).collect();
    Ok(SweepReport {
        gamma,
        predicted_slope: d0.n() as f64 - gamma,
        epsilon,
        c_calibrated,
        violations,
        fit: fit_loglog(&xs, &ys)?,
        rows,
    })
}

/// Serialized tube family: either a recipe for random draws or an explicit list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TubeFamilyDoc {
    Random {
        center: Vec<Vec<f64>>,
        nu: f64,
        delta: f64,
        count: usize,
        seed: u64,
    },
    Explicit {
        center: Vec<Vec<f64>>,
        tubes: Vec<TubeDoc>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeDoc {
    pub direction: Vec<Vec<f64>>,
    pub base: Vec<f64>,
    pub radius: f64,
}

impl TubeFamilyDoc {
    pub fn build(&self, n: usize, j: usize) -> Result<TubeFamily> {
        match self {
            Self::Random {
                center,
                nu,
                delta,
                count,
                seed,
            } => {
                let center = Subspace::span_of_vectors(n, center)?;
                let mut rng = stream_rng(*seed, Stream::Tubes, j as u64);
                random_tube_family_with(j, &center, *nu, *delta, *count, &mut rng)
            }
            Self::Explicit { center, tubes } => {
                let center = Subspace::span_of_vectors(n, center)?;
                let tubes = tubes
                    .iter()
                    .map(|t| {
                        if t.base.len() != n {
                            return invalid(format!("tube base has length {}, expected {n}", t.base.len()));
                        }
                        Tube::new(
                            Subspace::span_of_vectors(n, &t.direction)?,
                            Vector::from_column_slice(&t.base),
                            t.radius,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                TubeFamily::new(j, center, tubes)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::Matrix;
    use approx::assert_abs_diff_eq;

    fn axis(n: usize, i: usize) -> Subspace {
        Subspace::coordinate(n, &[i]).unwrap()
    }

    fn strips(j: usize, along: usize, centers: &[f64], delta: f64) -> TubeFamily {
        let tubes = centers
            .iter()
            .map(|&c| {
                let mut base = Vector::zeros(2);
                base[1 - along] = c;
                Tube::new(axis(2, along), base, delta).unwrap()
            })
            .collect();
        TubeFamily::new(j, axis(2, along), tubes).unwrap()
    }

    fn lw() -> BlDatum {
        BlDatum::from_maps(
            2,
            vec![
                Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
                Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
            ],
            vec![1.0, 1.0],
        )
    }

    #[test]
    fn membership_examples() {
        let t = Tube::new(axis(2, 0), Vector::zeros(2), 0.1).unwrap();
        assert!(t.contains(&[0.5, 0.05]));
        assert!(!t.contains(&[0.5, 0.2]));
        let tiny = Tube::new(axis(2, 0), Vector::zeros(2), 1e-9).unwrap();
        assert!(tiny.contains(&[0.7, 0.0]));
        assert!(tube_membership(&t, &[0.0]).is_err());
        assert!(Tube::new(axis(2, 0), Vector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn random_family_contract() {
        let c = axis(2, 0);
        let f = random_tube_family(&c, 0.0, 0.1, 5, 3).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f.max_deviation(), 0.0);
        assert!(random_tube_family(&c, 0.2, 0.1, 0, 3).unwrap().is_empty());
        let f = random_tube_family(&c, 0.2, 0.1, 40, 3).unwrap();
        assert!(f.max_deviation() <= 0.2);
        assert!(f
            .tubes()
            .iter()
            .all(|t| t.base().iter().all(|b| (-1.0..1.0).contains(b))));
    }

    #[test]
    fn axis_parallel_strip_product() {
        let centers = [-0.75, -0.25, 0.25, 0.75];
        let fams = vec![strips(0, 0, &centers, 0.125), strips(1, 1, &centers, 0.125)];
        let v = overlap_integral(&fams, &[1.0, 1.0], &GridSpec::with_points(512).unwrap()).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn single_tube_area() {
        let fams = vec![strips(0, 0, &[0.0], 0.1)];
        let v = overlap_integral(&fams, &[1.0], &GridSpec::with_points(1000).unwrap()).unwrap();
        assert_abs_diff_eq!(v, 0.4, epsilon = 1e-9);
    }

    #[test]
    fn empty_family_gives_zero() {
        let fams = vec![
            strips(0, 0, &[0.0], 0.1),
            TubeFamily::new(1, axis(2, 1), vec![]).unwrap(),
        ];
        assert_eq!(
            overlap_integral(&fams, &[1.0, 0.5], &GridSpec::with_points(8).unwrap()).unwrap(),
            0.0
        );
        // A zero exponent drops the empty family.
        assert!(overlap_integral(&fams, &[1.0, 0.0], &GridSpec::with_points(64).unwrap()).unwrap() > 0.0);
    }

    #[test]
    fn bound_examples() {
        let opts = CandidateOptions::structured();
        let b = kakeya_bound(&lw(), 0.125, &[4, 4], 0.0, 4.0, &opts).unwrap();
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-12);
        assert_eq!(kakeya_bound(&lw(), 0.125, &[4, 0], 0.0, 4.0, &opts).unwrap(), 0.0);
        let loose = kakeya_bound(&lw(), 0.125, &[4, 4], 0.2, 4.0, &opts).unwrap();
        assert!(loose > b);
        assert!(kakeya_bound(&lw(), 1.5, &[4, 4], 0.0, 4.0, &opts).is_err());
    }

    #[test]
    fn inflation_examples() {
        let f = strips(0, 0, &[0.0, 0.5], 0.1);
        let same = inflate_family(&f, 0.0).unwrap();
        assert_eq!(same.radius(), Some(0.1));
        let (c, omega) = (2.0, 0.25);
        let grown = inflate_family(&f, c * 0.1 / omega).unwrap();
        assert_abs_diff_eq!(grown.radius().unwrap(), 0.1 * (1.0 + c / omega), epsilon = 1e-15);
        for x in [[0.3, 0.09], [0.0, 0.55], [-0.9, -0.1]] {
            if f.count_at(&x) > 0 {
                assert!(grown.count_at(&x) >= f.count_at(&x));
            }
        }
    }

    #[test]
    fn schedule_examples() {
        let s = multiscale_schedule(1.0 / 16.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(s.omega, 0.5, epsilon = 1e-15);
        assert_eq!(s.ell, 4);
        let s = multiscale_schedule(1.0 / 256.0, 0.5, 4.0).unwrap();
        assert_abs_diff_eq!(s.omega, 1.0 / 16.0, epsilon = 1e-15);
        assert_eq!(s.ell, 2);
        for (delta, eps, ck) in [(0.01, 0.3, 1.7), (0.3, 2.0, 5.0), (1e-4, 0.7, 3.3)] {
            let s = multiscale_schedule(delta, eps, ck).unwrap();
            assert!(delta / s.omega.powi(s.ell as i32) >= 1.0 - 1e-9);
            assert!(delta / s.omega.powi(s.ell as i32 - 1) <= 1.0 + 1e-9);
        }
        assert!(multiscale_schedule(0.1, 0.0, 2.0).is_err());
        assert!(multiscale_schedule(0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn tube_family_doc_builds_both_forms() {
        let random: TubeFamilyDoc =
            serde_json::from_str(r#"{"center": [[1, 0]], "nu": 0.05, "delta": 0.1, "count": 3, "seed": 9}"#).unwrap();
        let f = random.build(2, 0).unwrap();
        assert_eq!(f.len(), 3);
        assert!(f.max_deviation() <= 0.05);
        let explicit: TubeFamilyDoc = serde_json::from_str(
            r#"{"center": [[1, 0]], "tubes": [{"direction": [[1, 0]], "base": [0, 0.5], "radius": 0.1}]}"#,
        )
        .unwrap();
        let f = explicit.build(2, 1).unwrap();
        assert!(f.tubes()[0].contains(&[0.9, 0.55]));
    }
}
