use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use atomcov::hermlin::{fb_average, neg_log_likelihood_samples, scm};
use atomcov::io::{bench_to_csv, matrix_to_csv, read_snapshots, sinr_to_csv, snapshots_to_csv, to_json_pretty, trace_to_csv, write_atomic};
use atomcov::simkit::{default_theta_grid, mse_benchmark, sample_snapshots, sinr_experiment, MseConfig, SinrConfig};
use atomcov::{atom1, atom2, crb_report, data_factor, ExitReason, FitReport, HermMat, SnapshotSet, StructureSpec};
use serde::Serialize;

use crate::config::{ConvergenceConfig, CrbConfig, EstimateConfig, EstimateMethod, MseBenchConfig, SimulateConfig, SinrBenchConfig, Truth};

/// Outcome of a successful command.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Results were written but a solver stopped at its iteration limit.
    NotConverged,
}

/// Files produced by a command, written only once everything is computed.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: &Path, content: impl Into<Vec<u8>>) {
        self.0.push((path.to_path_buf(), content.into()));
    }

    fn check_inputs(&self, inputs: &[&Path]) -> Result<()> {
        for (out, _) in &self.0 {
            if inputs.iter().any(|i| same_file(i, out)) {
                bail!("output `{}` would overwrite an input", out.display());
            }
        }
        Ok(())
    }

    fn commit(self) -> Result<()> {
        for (path, bytes) in self.0 {
            write_atomic(&path, &bytes).with_context(|| format!("cannot write `{}`", path.display()))?;
        }
        Ok(())
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn spec_or_toeplitz(spec: Option<StructureSpec>, m: usize) -> Result<StructureSpec> {
    let spec = match spec {
        Some(s) => s,
        None => StructureSpec::toeplitz(m)?,
    };
    spec.check_dim(m)?;
    Ok(spec)
}

fn status_of<'a>(reports: impl IntoIterator<Item = &'a FitReport>) -> Status {
    if reports.into_iter().any(|r| r.exit_reason == ExitReason::MaxIterations) {
        Status::NotConverged
    } else {
        Status::Done
    }
}

/// Smallest eigenvalue at or below rounding level relative to the largest.
fn is_singular(r: &HermMat) -> bool {
    let scale = r.frobenius_norm().max(f64::MIN_POSITIVE);
    r.min_eigenvalue() <= r.dim() as f64 * f64::EPSILON * scale
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    method: &'static str,
    spec: StructureSpec,
    m: usize,
    n: usize,
    singular: bool,
    min_eigenvalue: f64,
    /// Negative log-likelihood of the snapshots; absent for singular estimates.
    neg_ll: Option<f64>,
    fit: Option<&'a FitReport>,
}

pub fn estimate(cfg: &EstimateConfig) -> Result<Status> {
    let samples = read_snapshots(&cfg.input).with_context(|| format!("cannot load snapshots `{}`", cfg.input.display()))?;
    let m = samples.dim();
    let spec = spec_or_toeplitz(cfg.spec.or(cfg.atom2.spec), m)?;
    let (r, fit, name) = match cfg.method {
        EstimateMethod::Scm => (scm(&samples)?, None, "scm"),
        EstimateMethod::Fb => (fb_average(&scm(&samples)?), None, "fb"),
        EstimateMethod::Atom1 => {
            ensure!(matches!(spec, StructureSpec::Toeplitz { .. }), "atom1 fits Toeplitz structure only, not {}", spec.kind_name());
            let mut opts = cfg.atom1.clone();
            opts.seed = cfg.seed.unwrap_or(opts.seed);
            let rep = atom1(&data_factor(&samples, &spec)?, &opts)?;
            (rep.r_hat.clone(), Some(rep), "atom1")
        }
        EstimateMethod::Atom2 => {
            let mut opts = cfg.atom2.clone();
            opts.spec = Some(spec);
            opts.seed = cfg.seed.unwrap_or(opts.seed);
            let rep = atom2(&data_factor(&samples, &spec)?, &opts)?;
            (rep.r_hat.clone(), Some(rep), "atom2")
        }
    };
    let singular = is_singular(&r);
    let report = EstimateReport {
        method: name,
        spec,
        m,
        n: samples.count(),
        singular,
        min_eigenvalue: r.min_eigenvalue(),
        neg_ll: if singular { None } else { neg_log_likelihood_samples(&r, &samples).ok() },
        fit: fit.as_ref(),
    };
    let mut out = Outputs::default();
    out.add(&cfg.output, matrix_to_csv(&r));
    out.add(&cfg.report, to_json_pretty(&report)?);
    if let Some(path) = &cfg.trace {
        match &fit {
            Some(rep) => out.add(path, trace_to_csv(rep)),
            None => bail!("`trace` is only produced by atom1 and atom2"),
        }
    }
    out.check_inputs(&[&cfg.input])?;
    out.commit()?;
    if singular {
        eprintln!("warning: the {name} estimate is singular");
    }
    Ok(status_of(fit.iter()))
}

fn sibling_truth_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "snapshots".into());
    output.with_file_name(format!("{stem}_truth.csv"))
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Status> {
    ensure!(cfg.n >= 1, "n must be at least 1");
    let truth = cfg.model.build()?;
    let samples = sample_snapshots(&truth, cfg.n, cfg.seed)?;
    let mut out = Outputs::default();
    out.add(&cfg.output, snapshots_to_csv(&samples));
    let truth_path = match (&cfg.truth_output, &cfg.model) {
        (Some(p), _) => Some(p.clone()),
        (None, Truth::Tbt { .. }) => Some(sibling_truth_path(&cfg.output)),
        _ => None,
    };
    if let Some(p) = truth_path {
        out.add(&p, matrix_to_csv(&truth));
    }
    if let Truth::Matrix { path } = &cfg.model {
        out.check_inputs(&[path])?;
    }
    out.commit()?;
    Ok(Status::Done)
}

pub fn bench_mse(cfg: &MseBenchConfig) -> Result<Status> {
    let truth = cfg.truth.build()?;
    let spec = spec_or_toeplitz(cfg.spec, truth.dim())?;
    let run = MseConfig {
        truth,
        spec,
        methods: cfg.methods.clone(),
        n_grid: cfg.n_grid.clone(),
        trials: cfg.trials,
        seed: cfg.seed,
        with_crb: cfg.with_crb,
    };
    let (res, timing) = mse_benchmark(&run)?;
    let mut out = Outputs::default();
    out.add(&cfg.output, bench_to_csv(&res));
    if let Some(p) = &cfg.json {
        out.add(p, to_json_pretty(&res)?);
    }
    if let Some(p) = &cfg.timing {
        out.add(p, to_json_pretty(&timing)?);
    }
    out.commit()?;
    let failed: usize = res.failures.iter().flatten().sum();
    if failed > 0 {
        eprintln!("warning: {failed} fits failed and were left out of the averages");
    }
    Ok(Status::Done)
}

pub fn bench_sinr(cfg: &SinrBenchConfig) -> Result<Status> {
    let theta_deg = match &cfg.theta_deg {
        Some(t) => t.clone(),
        None => {
            ensure!(cfg.points >= 1, "points must be at least 1");
            default_theta_grid(cfg.points)
        }
    };
    let run = SinrConfig {
        scenario: cfg.scenario.clone(),
        methods: cfg.methods.clone(),
        n: cfg.n,
        trials: cfg.trials,
        theta_deg,
        seed: cfg.seed,
    };
    let table = sinr_experiment(&run)?;
    let mut out = Outputs::default();
    out.add(&cfg.output, sinr_to_csv(&table));
    if let Some(p) = &cfg.json {
        out.add(p, to_json_pretty(&table)?);
    }
    out.commit()?;
    for row in table.rows.iter().filter(|r| !r.available) {
        eprintln!("note: {} is not available with n = {} <= m", row.method, cfg.n);
    }
    Ok(Status::Done)
}

fn convergence_data(cfg: &ConvergenceConfig) -> Result<SnapshotSet> {
    match (&cfg.input, &cfg.truth, cfg.n) {
        (Some(path), None, None) => {
            read_snapshots(path).with_context(|| format!("cannot load snapshots `{}`", path.display()))
        }
        (None, Some(truth), Some(n)) => {
            ensure!(n >= 1, "n must be at least 1");
            Ok(sample_snapshots(&truth.build()?, n, cfg.seed)?)
        }
        _ => bail!("give either `input`, or both `truth` and `n`"),
    }
}

pub fn bench_convergence(cfg: &ConvergenceConfig) -> Result<Status> {
    let samples = convergence_data(cfg)?;
    let spec = spec_or_toeplitz(cfg.spec, samples.dim())?;
    ensure!(matches!(spec, StructureSpec::Toeplitz { .. }), "convergence compares atom1 and atom2 on Toeplitz structure");
    let y = data_factor(&samples, &spec)?;
    let r1 = atom1(&y, &cfg.atom1)?;
    let mut opts2 = cfg.atom2.clone();
    opts2.spec = Some(spec);
    let r2 = atom2(&y, &opts2)?;
    let mut csv = String::from("method,t,objective,neg_ll,inner_iterations,gamma\n");
    for rep in [&r1, &r2] {
        for line in trace_to_csv(rep).lines().skip(1) {
            csv.push_str(&format!("{},{line}\n", rep.method));
        }
    }
    let mut out = Outputs::default();
    out.add(&cfg.output, csv);
    if let Some(p) = &cfg.json {
        out.add(p, to_json_pretty(&[&r1, &r2])?);
    }
    if let Some(p) = &cfg.input {
        out.check_inputs(&[p])?;
    }
    out.commit()?;
    Ok(status_of([&r1, &r2]))
}

pub fn crb(cfg: &CrbConfig) -> Result<Status> {
    let truth = cfg.truth.build()?;
    let spec = spec_or_toeplitz(cfg.spec, truth.dim())?;
    let rep = crb_report(&truth, &spec, cfg.n)?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    let mut out = Outputs::default();
    out.add(&cfg.output, to_json_pretty(&rep)?);
    if let Truth::Matrix { path } = &cfg.truth {
        out.check_inputs(&[path])?;
    }
    out.commit()?;
    Ok(Status::Done)
}
