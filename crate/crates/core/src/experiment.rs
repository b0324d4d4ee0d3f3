//! Replicated end-to-end runs: sample, solve, rotate, evaluate, diagnose.
//!
//! Seeds: the samples of (family, M, replicate) come from
//! `derive_seed(seed, [SAMPLE_TAG, family tag, M, replicate])`, so any subset
//! of a sweep reproduces the corresponding records of the full sweep. All
//! methods of one replicate share those samples. Cross-validation streams
//! are derived from the sample seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{assemble_measurement_with, BasisSet, PolynomialFamily};
use crate::benchmarks::{ridge_exact_rotation, BenchmarkId, BenchmarkProblem};
use crate::bpdn::{BpdnSolution, CrossValConfig, SolverConfig};
use crate::diagnostics::{mean_and_std, mutual_coherence_with, sparsity_profile, SparsityProfile};
use crate::quadrature::{relative_l2_from_values, smolyak_grid, SparseGrid};
use crate::rotation::{iterate_rotations, iteration_cv_seed, RotationConfig, RotationMatrix, RotationVariant, SolveSettings};
use crate::sampling::{derive_seed, sample_inputs, InputDistribution};
use crate::{Error, Exec, Result};

const SAMPLE_TAG: u64 = 0x5341_4d50;
const CV_TAG: u64 = 0x4356;
const COEFF_TAG: u64 = 0x434f_4546;

fn family_tag(f: PolynomialFamily) -> u64 {
    match f {
        PolynomialFamily::Hermite => 1,
        PolynomialFamily::Legendre => 2,
        PolynomialFamily::Chebyshev1 => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "reweighted")]
    Reweighted,
    #[serde(rename = "rotated")]
    Rotated,
    #[serde(rename = "reweighted+rotated")]
    ReweightedRotated,
    /// Coherence runs only: the known ridge rotation.
    #[serde(rename = "exact_rotation")]
    ExactRotation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::L1 => "l1",
            Method::Reweighted => "reweighted",
            Method::Rotated => "rotated",
            Method::ReweightedRotated => "reweighted+rotated",
            Method::ExactRotation => "exact_rotation",
        }
    }

    pub fn is_rotated(self) -> bool {
        matches!(self, Method::Rotated | Method::ReweightedRotated)
    }

    pub fn is_reweighted(self) -> bool {
        matches!(self, Method::Reweighted | Method::ReweightedRotated)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Surrogate recovery with the listed methods.
    #[default]
    Recovery,
    /// Mutual coherence of Ψ before and after the exact ridge rotation; no
    /// solves.
    Coherence,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub kind: ExperimentKind,
    pub benchmark: BenchmarkId,
    pub families: Vec<PolynomialFamily>,
    /// Defaults to the benchmark's reference dimension.
    #[serde(default)]
    pub d: Option<usize>,
    /// Total-degree order P; defaults to the benchmark's reference order.
    #[serde(default)]
    pub order: Option<usize>,
    pub m_values: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub rotation: RotationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub crossval: CrossValConfig,
    /// Smolyak level of the error grid; defaults per benchmark.
    #[serde(default)]
    pub sparse_grid_level: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Record mutual coherence before and after rotation.
    #[serde(default = "yes")]
    pub coherence: bool,
    /// Sparsity levels s at which ‖c − c_s‖₁/√s is recorded.
    #[serde(default)]
    pub profile_s: Vec<usize>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    /// Copy with every defaulted field filled in.
    pub fn resolved(&self) -> Self {
        let (d, p) = self.benchmark.default_size();
        let mut s = self.clone();
        s.d = Some(self.d.unwrap_or(d));
        s.order = Some(self.order.unwrap_or(p));
        s.sparse_grid_level = Some(self.sparse_grid_level.unwrap_or(self.benchmark.default_level()));
        s
    }

    pub fn dim(&self) -> usize {
        self.d.unwrap_or(self.benchmark.default_size().0)
    }

    pub fn poly_order(&self) -> usize {
        self.order.unwrap_or(self.benchmark.default_size().1)
    }

    pub fn level(&self) -> usize {
        self.sparse_grid_level.unwrap_or(self.benchmark.default_level())
    }

    /// SHA-256 of the resolved spec's JSON form, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.resolved()).expect("spec serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.families.is_empty() {
            return bad("at least one polynomial family is required");
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad("m_values must be non-empty and every M at least 1");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.dim() == 0 {
            return bad("d must be at least 1");
        }
        if self.level() == 0 {
            return bad("sparse_grid_level must be at least 1");
        }
        if self.profile_s.contains(&0) || self.profile_s.windows(2).any(|w| w[0] > w[1]) {
            return bad("profile_s must be ascending with every s at least 1");
        }
        match self.kind {
            ExperimentKind::Recovery => {
                if self.methods.is_empty() {
                    return bad("recovery experiments need at least one method");
                }
                if self.methods.contains(&Method::ExactRotation) {
                    return bad("exact_rotation is only available in coherence experiments");
                }
                let mut sorted = self.methods.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != self.methods.len() {
                    return bad("methods must not repeat");
                }
                if self.methods.iter().any(|m| m.is_rotated())
                    && self.rotation.variant == RotationVariant::GaussianK
                    && self.families.iter().any(|&f| f != PolynomialFamily::Hermite)
                {
                    return bad("the GaussianK rotation variant requires the hermite family");
                }
            }
            ExperimentKind::Coherence => {
                if self.benchmark != BenchmarkId::Ridge {
                    return bad("coherence experiments use the exact ridge rotation and need benchmark = \"ridge\"");
                }
            }
        }
        self.rotation.validate()?;
        self.solver.validate()?;
        self.crossval.validate()?;
        for &f in &self.families {
            BasisSet::new(f, self.dim(), self.poly_order()).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub spec_hash: String,
    pub benchmark: BenchmarkId,
    pub family: PolynomialFamily,
    pub method: Method,
    pub d: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "M_over_N")]
    pub m_over_n: f64,
    pub replicate: usize,
    pub rel_l2_error: Option<f64>,
    pub mu_before: Option<f64>,
    pub mu_after: Option<f64>,
    pub sparsity_profile: Option<SparsityProfile>,
    /// ε of each solve (one per rotation iteration for rotated methods).
    pub epsilons: Vec<f64>,
    pub iterations: usize,
    pub wall_ms: f64,
    pub converged: bool,
    /// Failure message when the replicate could not be completed.
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some() || !self.converged
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker thread limit; `None` uses the global pool.
    pub workers: Option<usize>,
    pub exec: Exec,
}

struct FamilyContext {
    family: PolynomialFamily,
    basis: BasisSet,
    problem: BenchmarkProblem,
    grid: Option<SparseGrid>,
    exact: std::result::Result<Vec<f64>, String>,
}

struct Task {
    family: usize,
    m: usize,
    replicate: usize,
}

/// Runs every (family, M, replicate) task; per-replicate failures become
/// records with `error` set. Records are ordered by family, M, replicate and
/// method as listed in the spec.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    let spec = spec.resolved();
    let hash = spec.hash();
    let exec = opts.exec;
    let contexts = spec
        .families
        .iter()
        .map(|&family| prepare_family(&spec, family, exec))
        .collect::<Result<Vec<_>>>()?;
    let mut tasks = Vec::new();
    for family in 0..contexts.len() {
        for &m in &spec.m_values {
            for replicate in 0..spec.replicates {
                tasks.push(Task { family, m, replicate });
            }
        }
    }
    log::info!("running {} tasks of `{}` ({})", tasks.len(), spec.name, spec.benchmark);
    let run = || exec.map(tasks.len(), |t| run_task(&spec, &hash, &contexts[tasks[t].family], &tasks[t]));
    let nested = with_workers(opts.workers, run)?;
    Ok(nested.into_iter().flatten().collect())
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(_workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

fn prepare_family(spec: &ExperimentSpec, family: PolynomialFamily, exec: Exec) -> Result<FamilyContext> {
    let (d, p) = (spec.dim(), spec.poly_order());
    let basis = BasisSet::new(family, d, p).map_err(|e| Error::Config(e.to_string()))?;
    let problem = BenchmarkProblem::new(spec.benchmark, family, d, p, derive_seed(spec.seed, &[COEFF_TAG]))?;
    let (grid, exact) = match spec.kind {
        ExperimentKind::Coherence => (None, Ok(vec![])),
        ExperimentKind::Recovery => {
            let grid = smolyak_grid(family, d, spec.level()).map_err(|e| Error::Config(e.to_string()))?;
            let values = exec.map(grid.len(), |k| problem.eval(&grid.node(k)));
            let exact = values.into_iter().collect::<Result<Vec<f64>>>().map_err(|e| e.to_string());
            (Some(grid), exact)
        }
    };
    Ok(FamilyContext {
        family,
        basis,
        problem,
        grid,
        exact,
    })
}

fn row(m: &DMatrix<f64>, q: usize) -> Vec<f64> {
    m.row(q).iter().copied().collect()
}

struct MethodResult {
    coeffs: Vec<f64>,
    rotation: Option<RotationMatrix>,
    epsilons: Vec<f64>,
    iterations: usize,
    converged: bool,
    elapsed_ms: f64,
}

fn run_task(spec: &ExperimentSpec, hash: &str, ctx: &FamilyContext, task: &Task) -> Vec<ExperimentRecord> {
    let basis = &ctx.basis;
    let n = basis.len();
    let template = ExperimentRecord {
        spec_hash: hash.to_string(),
        benchmark: spec.benchmark,
        family: ctx.family,
        method: Method::L1,
        d: basis.dim(),
        p: basis.order(),
        n,
        m: task.m,
        m_over_n: task.m as f64 / n as f64,
        replicate: task.replicate,
        rel_l2_error: None,
        mu_before: None,
        mu_after: None,
        sparsity_profile: None,
        epsilons: vec![],
        iterations: 0,
        wall_ms: 0.0,
        converged: false,
        error: None,
    };
    let start = Instant::now();
    let sample_seed = derive_seed(spec.seed, &[SAMPLE_TAG, family_tag(ctx.family), task.m as u64, task.replicate as u64]);
    let samples = sample_inputs(InputDistribution::for_family(ctx.family), basis.dim(), task.m, sample_seed);
    let psi = match assemble_measurement_with(basis, &samples, Exec::Sequential) {
        Ok(p) => p,
        Err(e) => return failed_all(spec, &template, e.to_string()),
    };
    let coherence = |m: &DMatrix<f64>| mutual_coherence_with(m, Exec::Sequential).ok();

    if spec.kind == ExperimentKind::Coherence {
        let a = ridge_exact_rotation(basis.dim());
        let after = assemble_measurement_with(basis, &a.rotate_samples(&samples), Exec::Sequential)
            .ok()
            .and_then(|m| coherence(&m));
        return vec![ExperimentRecord {
            method: Method::ExactRotation,
            mu_before: coherence(&psi),
            mu_after: after,
            converged: true,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..template
        }];
    }

    let exact = match &ctx.exact {
        Ok(v) => v,
        Err(msg) => return failed_all(spec, &template, format!("reference evaluation failed: {msg}")),
    };
    let u: Vec<f64> = match (0..task.m).map(|q| ctx.problem.eval(&row(&samples, q))).collect::<Result<Vec<f64>>>() {
        Ok(u) => u,
        Err(e) => return failed_all(spec, &template, e.to_string()),
    };
    let mu_before = if spec.coherence { coherence(&psi) } else { None };
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;

    let cv_base = derive_seed(sample_seed, &[CV_TAG]);
    let settings = |reweighted: bool| SolveSettings {
        solver: &spec.solver,
        crossval: &spec.crossval,
        reweighted,
        reweight_iters: spec.rotation.reweight_iters,
        exec: Exec::Sequential,
    };
    let mut plain: [Option<(f64, BpdnSolution, f64)>; 2] = [None, None];
    let mut out = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let t0 = Instant::now();
        let rw = method.is_reweighted();
        let result: Result<MethodResult> = if method.is_rotated() {
            let cfg = RotationConfig {
                reweighted: rw,
                ..spec.rotation
            };
            let initial = plain[rw as usize].clone();
            let prior_ms = initial.as_ref().map_or(0.0, |i| i.2);
            iterate_rotations(
                &psi,
                &u,
                &samples,
                basis,
                &cfg,
                &spec.solver,
                &spec.crossval,
                cv_base,
                initial.map(|(e, s, _)| (e, s)),
            )
            .map(|o| MethodResult {
                coeffs: o.surrogate.coeffs,
                rotation: Some(o.surrogate.rotation),
                epsilons: o.history.entries.iter().map(|h| h.epsilon).collect(),
                iterations: o.iterations,
                converged: o.converged,
                elapsed_ms: prior_ms + t0.elapsed().as_secs_f64() * 1e3,
            })
        } else {
            let (eps, sol) = settings(rw).estimate_and_solve(&psi, &u, iteration_cv_seed(cv_base, 0));
            let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
            plain[rw as usize] = Some((eps, sol.clone(), elapsed_ms));
            Ok(MethodResult {
                converged: sol.converged(),
                coeffs: sol.coeffs,
                rotation: None,
                epsilons: vec![eps],
                iterations: 0,
                elapsed_ms,
            })
        };
        let record = match result {
            Err(e) => ExperimentRecord {
                method,
                mu_before,
                error: Some(e.to_string()),
                wall_ms: setup_ms + t0.elapsed().as_secs_f64() * 1e3,
                ..template.clone()
            },
            Ok(r) => finish_record(spec, ctx, exact, &samples, &template, method, mu_before, setup_ms, r),
        };
        out.push(record);
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn finish_record(
    spec: &ExperimentSpec,
    ctx: &FamilyContext,
    exact: &[f64],
    samples: &DMatrix<f64>,
    template: &ExperimentRecord,
    method: Method,
    mu_before: Option<f64>,
    setup_ms: f64,
    r: MethodResult,
) -> ExperimentRecord {
    let basis = &ctx.basis;
    let grid = ctx.grid.as_ref().expect("recovery runs have an error grid");
    let surrogate: Vec<f64> = (0..grid.len())
        .map(|k| {
            let x = grid.node(k);
            match &r.rotation {
                Some(a) => basis.eval_expansion(&r.coeffs, &a.apply(&x)),
                None => basis.eval_expansion(&r.coeffs, &x),
            }
        })
        .collect();
    let (rel, err) = match relative_l2_from_values(exact, &surrogate, &grid.weights) {
        Ok(v) => (Some(v.value), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mu_after = match (&r.rotation, spec.coherence) {
        (Some(a), true) => assemble_measurement_with(basis, &a.rotate_samples(samples), Exec::Sequential)
            .ok()
            .and_then(|m| mutual_coherence_with(&m, Exec::Sequential).ok()),
        _ => None,
    };
    let profile = if spec.profile_s.is_empty() {
        None
    } else {
        sparsity_profile(&r.coeffs, &spec.profile_s).ok()
    };
    ExperimentRecord {
        method,
        rel_l2_error: rel,
        mu_before,
        mu_after,
        sparsity_profile: profile,
        epsilons: r.epsilons,
        iterations: r.iterations,
        wall_ms: setup_ms + r.elapsed_ms,
        converged: r.converged,
        error: err,
        ..template.clone()
    }
}

fn failed_all(spec: &ExperimentSpec, template: &ExperimentRecord, msg: String) -> Vec<ExperimentRecord> {
    let methods = match spec.kind {
        ExperimentKind::Coherence => vec![Method::ExactRotation],
        ExperimentKind::Recovery => spec.methods.clone(),
    };
    methods
        .into_iter()
        .map(|method| ExperimentRecord {
            method,
            error: Some(msg.clone()),
            ..template.clone()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregation and output

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub benchmark: BenchmarkId,
    pub family: PolynomialFamily,
    pub method: Method,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "M_over_N")]
    pub m_over_n: f64,
    pub records: usize,
    pub failures: usize,
    pub mean_rel_l2_error: Option<f64>,
    pub std_rel_l2_error: Option<f64>,
    pub mean_mu_before: Option<f64>,
    pub mean_mu_after: Option<f64>,
}

/// Means over replicates per (benchmark, family, method, M), in order of
/// first appearance.
pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(BenchmarkId, PolynomialFamily, Method, usize)> = Vec::new();
    for r in records {
        let k = (r.benchmark, r.family, r.method, r.m);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| mean_and_std(&v));
    keys.into_iter()
        .map(|(benchmark, family, method, m)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| (r.benchmark, r.family, r.method, r.m) == (benchmark, family, method, m))
                .collect();
            let err = mean(group.iter().filter_map(|r| r.rel_l2_error).collect());
            AggregateRow {
                benchmark,
                family,
                method,
                m,
                m_over_n: group[0].m_over_n,
                records: group.len(),
                failures: group.iter().filter(|r| r.failed()).count(),
                mean_rel_l2_error: err.map(|e| e.0),
                std_rel_l2_error: err.map(|e| e.1),
                mean_mu_before: mean(group.iter().filter_map(|r| r.mu_before).collect()).map(|e| e.0),
                mean_mu_after: mean(group.iter().filter_map(|r| r.mu_after).collect()).map(|e| e.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "benchmark",
    "family",
    "method",
    "d",
    "P",
    "N",
    "M",
    "M_over_N",
    "replicate",
    "rel_l2_error",
    "mu_before",
    "mu_after",
    "wall_ms",
    "converged",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}


fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Serialize {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_records_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_COLUMNS).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([
            r.benchmark.name().to_string(),
            r.family.name().to_string(),
            r.method.name().to_string(),
            r.d.to_string(),
            r.p.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.m_over_n.to_string(),
            r.replicate.to_string(),
            opt(r.rel_l2_error),
            opt(r.mu_before),
            opt(r.mu_after),
            r.wall_ms.to_string(),
            r.converged.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record([
        "benchmark",
        "family",
        "method",
        "M",
        "M_over_N",
        "records",
        "failures",
        "mean_rel_l2_error",
        "std_rel_l2_error",
        "mean_mu_before",
        "mean_mu_after",
    ])
    .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.benchmark.name().to_string(),
            r.family.name().to_string(),
            r.method.name().to_string(),
            r.m.to_string(),
            r.m_over_n.to_string(),
            r.records.to_string(),
            r.failures.to_string(),
            opt(r.mean_rel_l2_error),
            opt(r.std_rel_l2_error),
            opt(r.mean_mu_before),
            opt(r.mean_mu_after),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialize {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_records_json(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialize {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes `records.{csv,json}` and `aggregate.{csv,json}` into `dir`
/// (created if missing) and returns the paths written.
pub fn emit_results(records: &[ExperimentRecord], format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = aggregate(records);
    let (rec, agg) = match format {
        OutputFormat::Csv => (dir.join("records.csv"), dir.join("aggregate.csv")),
        OutputFormat::Json => (dir.join("records.json"), dir.join("aggregate.json")),
    };
    match format {
        OutputFormat::Csv => {
            write_records_csv(records, &rec)?;
            write_aggregate_csv(&rows, &agg)?;
        }
        OutputFormat::Json => {
            write_json(records, &rec)?;
            write_json(&rows, &agg)?;
        }
    }
    Ok(vec![rec, agg])
}
