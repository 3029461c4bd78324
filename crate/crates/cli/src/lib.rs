//! Batch front end: loads a problem document, runs one command, and writes a
//! JSON or CSV report.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use regbl::exponent::CandidateOptions;
use regbl::integrator::GrowthMode;
use regbl::kakeya::{multiscale_schedule, LedgerOptions};
use regbl::{
    bl_polytope_contains, bl_ratio, delta_sweep, fit_growth, gamma_sup, locbd_exponent, multiscale_ledger,
    select_basis, stability_scan, verify_locbd_exponent, witness, BasisReport, BlDatum, Error, GridSpec,
    PerturbationSpec, ProblemDoc, Result,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use report::{Format, Report, Table, SCHEMA_VERSION};

/// Environment variable that fixes the worker-thread count.
pub const WORKERS_ENV: &str = "REGBL_WORKERS";

const DEFAULT_R_LIST: [f64; 5] = [4.0, 8.0, 16.0, 32.0, 64.0];
const DEFAULT_DELTA_LIST: [f64; 4] = [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];
const DEFAULT_EPSILON: f64 = 0.2;
const DEFAULT_STABILITY_SAMPLES: usize = 200;
const DEFAULT_BLR_BUDGET: usize = 16;
const DEFAULT_LEDGER_DELTA: f64 = 1.0 / 16.0;
const DEFAULT_OMEGA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Exponent,
    Polytope,
    Stability,
    Witness,
    Ratio,
    Fit,
    KakeyaSweep,
    KakeyaLedger,
    Basis,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exponent => "exponent",
            Self::Polytope => "polytope",
            Self::Stability => "stability",
            Self::Witness => "witness",
            Self::Ratio => "ratio",
            Self::Fit => "fit",
            Self::KakeyaSweep => "kakeya-sweep",
            Self::KakeyaLedger => "kakeya-ledger",
            Self::Basis => "basis",
        }
    }
}

#[derive(Parser, Clone, Debug)]
#[command(
    name = "regbl",
    version,
    about = "Regularized Brascamp-Lieb exponents and multilinear Kakeya experiments"
)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Problem document (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Comma-separated truncation radii, strictly increasing.
    #[arg(long = "R-list", value_delimiter = ',')]
    pub r_list: Option<Vec<f64>>,
    /// Comma-separated tube radii, strictly increasing.
    #[arg(long = "delta-list", value_delimiter = ',')]
    pub delta_list: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Exponent vector for `polytope`.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// Perturbation or tube-family samples.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Candidate draws per step for `basis`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Random input tuples for empirical ratio searches.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl RunConfig {
    pub fn new(command: Command, problem: impl Into<PathBuf>) -> Self {
        Self {
            command,
            problem: problem.into(),
            seed: 0,
            grid: None,
            r_list: None,
            delta_list: None,
            epsilon: None,
            nu: None,
            q: None,
            samples: None,
            trials: None,
            budget: None,
            out: None,
            format: Format::Json,
        }
    }
}

/// 0 on success, 1 on invalid input, 2 on resource or selection failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Problem(_) => 1,
        Error::Resource { .. } | Error::SelectionFailed { .. } => 2,
    }
}

/// Runs one command and writes its report. Diagnostics go to standard error.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = with_workers(|| execute(config)).and_then(|report| {
        let bytes = report.render(config.format)?;
        write_output(config.out.as_deref(), &bytes)
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("regbl: {e}");
            exit_code(&e)
        }
    }
}

fn with_workers<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let workers: usize = raw
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{WORKERS_ENV} = {raw:?} is not a worker count")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            pool.install(f)
        }
        Err(_) => f(),
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Problem(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Problem(e.to_string())),
    }
}

fn strictly_increasing(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidInput(format!("{name} is empty")));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    doc: ProblemDoc,
    d: BlDatum,
    resolved: Map<String, Value>,
}

impl Ctx<'_> {
    fn set(&mut self, key: &str, value: impl Serialize) {
        self.resolved.insert(
            key.to_string(),
            serde_json::to_value(value).expect("config values serialize"),
        );
    }

    fn grid(&mut self, default: GridSpec) -> Result<GridSpec> {
        let grid = match self.cfg.grid {
            Some(m) => GridSpec::with_points(m)?,
            None => default,
        };
        self.set("grid", grid);
        Ok(grid)
    }

    fn r_list(&mut self) -> Vec<f64> {
        let list = self.cfg.r_list.clone().unwrap_or_else(|| DEFAULT_R_LIST.to_vec());
        self.set("R_list", &list);
        list
    }

    fn witness_subspace(&mut self) -> Result<regbl::Subspace> {
        self.doc.subspace()?.ok_or_else(|| {
            Error::InvalidInput(format!("{} needs a `subspace` in the problem", self.cfg.command.name()))
        })
    }

    fn kakeya(&self) -> Result<regbl::KakeyaBlock> {
        self.doc.kakeya.clone().ok_or_else(|| {
            Error::InvalidInput(format!(
                "{} needs a `kakeya` block in the problem",
                self.cfg.command.name()
            ))
        })
    }

    fn candidates(&mut self) -> Result<CandidateOptions> {
        let mut opts = CandidateOptions::with_seed(self.cfg.seed);
        if let Some(v) = self.doc.subspace()? {
            opts.extra.push(v);
        }
        self.set("random_per_dim", opts.random_per_dim);
        self.set("closure_cap", opts.closure_cap);
        Ok(opts)
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Runs the command without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<Report> {
    if let Some(rs) = &cfg.r_list {
        strictly_increasing("R-list", rs)?;
    }
    if let Some(ds) = &cfg.delta_list {
        strictly_increasing("delta-list", ds)?;
    }
    let doc = ProblemDoc::load(&cfg.problem)?;
    let d = doc.validated_datum()?;
    let mut resolved = Map::new();
    resolved.insert("problem".into(), json!(cfg.problem.display().to_string()));
    resolved.insert("seed".into(), json!(cfg.seed));
    resolved.insert("format".into(), to_value(cfg.format));
    let mut ctx = Ctx { cfg, doc, d, resolved };

    let (result, table, notes) = match cfg.command {
        Command::Exponent => exponent(&mut ctx)?,
        Command::Polytope => polytope(&mut ctx)?,
        Command::Stability => stability(&mut ctx)?,
        Command::Witness => witness_cmd(&mut ctx)?,
        Command::Ratio => ratio(&mut ctx)?,
        Command::Fit => fit(&mut ctx)?,
        Command::KakeyaSweep => kakeya_sweep(&mut ctx)?,
        Command::KakeyaLedger => kakeya_ledger(&mut ctx)?,
        Command::Basis => basis(&mut ctx)?,
    };
    Ok(Report {
        command: cfg.command.name().to_string(),
        config: ctx.resolved,
        problem: to_value(&ctx.doc),
        result,
        table,
        notes,
    })
}

type Outcome = (Value, Table, Vec<String>);

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn exponent(ctx: &mut Ctx) -> Result<Outcome> {
    let opts = ctx.candidates()?;
    let rep = gamma_sup(&ctx.d, &opts)?;
    let locbd = locbd_exponent(&ctx.d)?;
    let mut table = Table::new(&["id", "provenance", "dim", "image_dims", "value"]);
    for row in &rep.per_candidate {
        table.push([
            row.id.to_string(),
            to_value(row.provenance).as_str().unwrap_or_default().to_string(),
            row.dim.to_string(),
            join(&row.dims),
            row.value.to_string(),
        ]);
    }
    let notes = vec![format!("gamma={} locbd_exponent={}", rep.gamma, locbd)];
    let mut result = to_value(&rep);
    result["locbd_exponent"] = json!(locbd);
    result["candidates"] = json!(rep.per_candidate.len());
    Ok((result, table, notes))
}

fn polytope(ctx: &mut Ctx) -> Result<Outcome> {
    let q = ctx
        .cfg
        .q
        .clone()
        .or_else(|| ctx.doc.q.clone())
        .ok_or_else(|| Error::InvalidInput("polytope needs --q or a `q` field in the problem".into()))?;
    ctx.set("q", &q);
    let opts = ctx.candidates()?;
    let verdict = bl_polytope_contains(&ctx.d, &q, &opts)?;
    let mut table = Table::new(&["q", "contained", "violation"]);
    let violation = verdict.violation.as_ref().map(to_value).unwrap_or(Value::Null);
    table.push([
        join(&q),
        verdict.contained.to_string(),
        violation.get("kind").and_then(Value::as_str).unwrap_or("").to_string(),
    ]);
    Ok((to_value(&verdict), table, Vec::new()))
}

fn stability(ctx: &mut Ctx) -> Result<Outcome> {
    let nu = ctx
        .cfg
        .nu
        .ok_or_else(|| Error::InvalidInput("stability needs --nu".into()))?;
    let samples = ctx.cfg.samples.unwrap_or(DEFAULT_STABILITY_SAMPLES);
    ctx.set("nu", nu);
    ctx.set("samples", samples);
    let opts = ctx.candidates()?;
    let spec = PerturbationSpec::new(nu, ctx.cfg.seed, samples)?;
    let rep = stability_scan(&ctx.d, &spec, &opts)?;
    let mut table = Table::new(&["index", "gamma", "max_distance"]);
    for s in &rep.samples {
        let max_dist = s.distances.iter().copied().fold(0.0, f64::max);
        table.push([s.index.to_string(), s.gamma.to_string(), max_dist.to_string()]);
    }
    let notes = vec![format!(
        "gamma_base={} max_gamma={} violations={}",
        rep.gamma_base, rep.max_gamma, rep.violations
    )];
    Ok((to_value(&rep), table, notes))
}

fn witness_cmd(ctx: &mut Ctx) -> Result<Outcome> {
    let v = ctx.witness_subspace()?;
    let rs = ctx.r_list();
    let mut header = vec!["R".to_string(), "c0".to_string()];
    header.extend((0..ctx.d.len()).map(|j| format!("count_{j}")));
    let mut table = Table::new(&header);
    let mut rows = Vec::with_capacity(rs.len());
    for &r in &rs {
        let w = witness(&ctx.d, &v, r)?;
        let counts = w.counts();
        let mut row = vec![r.to_string(), w.c0.to_string()];
        row.extend(counts.iter().map(ToString::to_string));
        table.push(row);
        rows.push(json!({"R": r, "c0": w.c0, "counts": counts, "slab": w.slab}));
    }
    Ok((json!({"subspace": v, "rows": rows}), table, Vec::new()))
}

fn ratio_table() -> Table {
    Table::new(&["R", "integral", "ratio", "residual"])
}

fn push_ratio(table: &mut Table, row: &regbl::RatioReport) {
    table.push([row.r, row.integral, row.ratio, row.residual]);
}

fn ratio(ctx: &mut Ctx) -> Result<Outcome> {
    let v = ctx.witness_subspace()?;
    let rs = ctx.r_list();
    let grid = ctx.grid(GridSpec::integrator_default(ctx.d.n()))?;
    let mut table = ratio_table();
    let rows = rs
        .iter()
        .map(|&r| {
            let w = witness(&ctx.d, &v, r)?;
            bl_ratio(&ctx.d, &w.functions, r, &grid)
        })
        .collect::<Result<Vec<_>>>()?;
    for row in &rows {
        push_ratio(&mut table, row);
    }
    Ok((json!({"subspace": v, "rows": rows}), table, Vec::new()))
}

fn fit(ctx: &mut Ctx) -> Result<Outcome> {
    let rs = ctx.r_list();
    let grid = ctx.grid(GridSpec::integrator_default(ctx.d.n()))?;
    let mode = match ctx.doc.subspace()? {
        Some(v) => {
            ctx.set("mode", "witness");
            GrowthMode::WitnessOf(v)
        }
        None => {
            let budget = ctx.cfg.budget.unwrap_or(DEFAULT_BLR_BUDGET);
            ctx.set("mode", "empirical");
            ctx.set("budget", budget);
            let mut opts = CandidateOptions::structured();
            opts.seed = ctx.cfg.seed;
            GrowthMode::Empirical {
                budget,
                seed: ctx.cfg.seed,
                opts,
            }
        }
    };
    let g = fit_growth(&ctx.d, &rs, &grid, &mode)?;
    let mut table = ratio_table();
    for row in &g.rows {
        push_ratio(&mut table, row);
    }
    let notes = vec![format!(
        "slope={} intercept={} r_squared={}",
        g.fit.slope, g.fit.intercept, g.fit.r_squared
    )];
    Ok((to_value(&g), table, notes))
}

fn kakeya_sweep(ctx: &mut Ctx) -> Result<Outcome> {
    let block = ctx.kakeya()?;
    let mut sampling = block.sampling();
    if let Some(nu) = ctx.cfg.nu {
        sampling.nu = nu;
    }
    if let Some(s) = ctx.cfg.samples {
        sampling.samples = s;
    }
    let deltas = ctx
        .cfg
        .delta_list
        .clone()
        .unwrap_or_else(|| DEFAULT_DELTA_LIST.to_vec());
    let epsilon = ctx.cfg.epsilon.or(block.epsilon).unwrap_or(DEFAULT_EPSILON);
    ctx.set("delta_list", &deltas);
    ctx.set("epsilon", epsilon);
    ctx.set("sampling", &sampling);
    let grid = ctx.grid(GridSpec::kakeya_default(ctx.d.n()))?;
    let opts = ctx.candidates()?;
    let rep = delta_sweep(&ctx.d, &deltas, &sampling, epsilon, &grid, ctx.cfg.seed, &opts)?;
    let mut table = Table::new(&["delta", "overlap", "max_overlap", "bound", "ratio"]);
    for r in &rep.rows {
        table.push([r.delta, r.overlap, r.max_overlap, r.bound, r.ratio]);
    }
    let notes = vec![format!(
        "slope={} predicted_slope={} violations={}",
        rep.fit.slope, rep.predicted_slope, rep.violations
    )];
    Ok((to_value(&rep), table, notes))
}

fn kakeya_ledger(ctx: &mut Ctx) -> Result<Outcome> {
    let block = ctx.kakeya()?;
    let mut sampling = block.sampling();
    if let Some(nu) = ctx.cfg.nu {
        sampling.nu = nu;
    }
    if let Some(s) = ctx.cfg.samples {
        sampling.samples = s;
    }
    let delta = block
        .delta
        .or_else(|| ctx.cfg.delta_list.as_ref().and_then(|l| l.first().copied()))
        .unwrap_or(DEFAULT_LEDGER_DELTA);
    let epsilon = ctx.cfg.epsilon.or(block.epsilon);
    let omega = match (block.omega, epsilon, block.c_kappa) {
        (Some(w), _, _) => w,
        (None, Some(eps), Some(ck)) => multiscale_schedule(delta, eps, ck)?.omega,
        _ => DEFAULT_OMEGA,
    };
    let budget = ctx.cfg.budget.unwrap_or(DEFAULT_BLR_BUDGET);
    ctx.set("delta", delta);
    ctx.set("omega", omega);
    ctx.set("sampling", &sampling);
    ctx.set("budget", budget);
    let grid = ctx.grid(GridSpec::kakeya_default(ctx.d.n()))?;
    let mut candidates = CandidateOptions::structured();
    candidates.seed = ctx.cfg.seed;
    let opts = LedgerOptions {
        blr_budget: budget,
        blr_grid: None,
        candidates,
    };
    let ledger = multiscale_ledger(&ctx.d, delta, omega, &sampling, &grid, ctx.cfg.seed, &opts)?;
    let mut table = Table::new(&["step", "scale", "d_hat", "d_hat_next", "bound_factor", "kappa"]);
    for r in &ledger.rows {
        table.push([
            r.step.to_string(),
            r.scale.to_string(),
            r.d_hat.to_string(),
            r.d_hat_next.to_string(),
            r.bound_factor.to_string(),
            r.kappa.to_string(),
        ]);
    }
    let notes = vec![format!(
        "ell={} bl_hat={} kappa_measured={}",
        ledger.ell, ledger.bl_hat, ledger.kappa_measured
    )];
    Ok((to_value(&ledger), table, notes))
}

fn basis(ctx: &mut Ctx) -> Result<Outcome> {
    let trials = ctx.cfg.trials.unwrap_or(regbl::basis::DEFAULT_TRIALS);
    ctx.set("trials", trials);
    let sel = select_basis(&ctx.d, trials, ctx.cfg.seed)?;
    let check = verify_locbd_exponent(&ctx.d, &sel)?;
    let report = BasisReport::new(&sel, &check);
    let mut header = vec!["r".to_string()];
    header.extend((0..ctx.d.n()).map(|i| format!("e_{i}")));
    header.extend((0..ctx.d.len()).map(|j| format!("step_dim_{j}")));
    let mut table = Table::new(&header);
    for (r, (e, dims)) in report.basis.iter().zip(&report.step_dims).enumerate() {
        let mut row = vec![(r + 1).to_string()];
        row.extend(e.iter().map(ToString::to_string));
        row.extend(dims.iter().map(ToString::to_string));
        table.push(row);
    }
    let notes = vec![format!(
        "margin={} exponent={} match={}",
        report.margin, report.exponent, report.matches
    )];
    Ok((to_value(&report), table, notes))
}
