//! Outer majorization-minimization loop shared by both estimators, and the
//! fit report they return.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{
    concentrated_x, evd_values, factor_data, fb_average, inv_pd, neg_log_likelihood, scm, surrogate_objective,
    BlockPair, DataFactor, HermMat, SnapshotSet, DEFAULT_RANK_TOL,
};
use crate::structsets::StructureSpec;

/// Relative eigenvalue floor applied when an iterate leaves the PD cone.
pub const PD_FLOOR: f64 = 1e-10;

/// Rounding allowance when comparing successive objective values.
const ACCEPT_SLACK: f64 = 1e-13;

/// Relative eigenvalue floor of the default initializer.
pub const INIT_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Converged,
    MaxIterations,
    /// The inner solver could not produce a descent step even at tightened
    /// tolerance; the last accepted iterate is returned.
    Stalled,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub spec: StructureSpec,
    pub r_hat: HermMat,
    /// `Tr X_t + ln det R_t` per accepted iterate, starting at the initializer.
    pub objective_trace: Vec<f64>,
    pub neg_ll_trace: Vec<f64>,
    /// Inner iterations spent on each outer step (retries included).
    pub inner_iterations: Vec<usize>,
    /// Surrogate weight per outer step; empty for ATOM1.
    pub gamma_trace: Vec<f64>,
    pub stationarity_residual: f64,
    pub exit_reason: ExitReason,
    pub outer_iterations: usize,
    pub pd_repairs: usize,
    /// Outer steps whose inner solve hit its iteration cap.
    pub inner_cap_hits: usize,
    pub wall_time_secs: f64,
    pub log_base: String,
}

impl FitReport {
    pub fn converged(&self) -> bool {
        self.exit_reason != ExitReason::MaxIterations
    }

    pub fn final_neg_ll(&self) -> f64 {
        *self.neg_ll_trace.last().expect("trace holds the initializer")
    }
}

/// Result of one inner solve.
pub(crate) struct InnerStep {
    pub r: HermMat,
    pub iterations: usize,
    pub capped: bool,
}

pub(crate) struct OuterState<'a> {
    pub t: usize,
    pub r: &'a HermMat,
    pub x: &'a HermMat,
    pub r_inv: &'a HermMat,
    /// 0 on the first attempt, then 1, 2 on tightened retries.
    pub retry: u32,
}

pub(crate) struct LoopOptions {
    pub outer_tol: f64,
    pub max_outer: usize,
    pub max_retries: u32,
}

/// The data matrix each structure is fitted to: the forward-backward average
/// for persymmetric sets, the plain SCM for block-Toeplitz.
pub fn data_matrix(samples: &SnapshotSet, spec: &StructureSpec) -> Result<HermMat> {
    spec.check_dim(samples.dim())?;
    let s = scm(samples)?;
    Ok(if spec.is_persymmetric() { fb_average(&s) } else { s })
}

pub fn data_factor(samples: &SnapshotSet, spec: &StructureSpec) -> Result<DataFactor> {
    factor_data(&data_matrix(samples, spec)?, DEFAULT_RANK_TOL)
}

/// Spec projection of `YYᴴ`, shifted so that `λ_min ≥ 1e-3·Tr/m`.
pub fn default_init(y: &DataFactor, spec: &StructureSpec) -> Result<HermMat> {
    let p = spec.project(&y.reconstruct())?;
    let m = p.dim() as f64;
    let floor = INIT_FLOOR * (p.trace() / m).max(f64::MIN_POSITIVE);
    let lam = p.min_eigenvalue();
    Ok(if lam < floor { p.shift_diagonal(floor - lam) } else { p })
}

/// Structure-preserving PD repair: shifts the diagonal so that
/// `λ_min ≥ 1e-10·λ_max`. Returns whether a shift was needed.
pub(crate) fn repair_pd(r: HermMat) -> Result<(HermMat, bool)> {
    let ev = evd_values(r.matrix());
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("estimator iterate".into()));
    }
    if hi <= 0.0 {
        return Err(Error::Diverged(format!("iterate has no positive eigenvalue (λ_max = {hi:e})")));
    }
    let floor = PD_FLOOR * hi;
    if lo > floor {
        return Ok((r, false));
    }
    Ok((r.shift_diagonal(floor - lo), true))
}

/// `‖P_spec(∇f(R))‖_F / ‖∇f(R)‖_F` with `∇f(R) = R⁻¹ − R⁻¹ R_FB R⁻¹`.
pub fn stationarity_residual(r: &HermMat, r_fb: &HermMat, spec: &StructureSpec) -> Result<f64> {
    let ri = inv_pd(r)?;
    let grad = HermMat::hermitian_part(&(ri.matrix() - ri.matrix() * r_fb.matrix() * ri.matrix()));
    let gn = grad.frobenius_norm();
    if gn <= 1e-12 * ri.frobenius_norm() {
        return Ok(0.0);
    }
    Ok(spec.project(&grad)?.frobenius_norm() / gn)
}

pub(crate) fn check_start(y: &DataFactor, spec: &StructureSpec, init: &HermMat) -> Result<()> {
    spec.check_dim(y.dim())?;
    spec.check_dim(init.dim())?;
    if spec.distance(init)? > 1e-10 * init.frobenius_norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("initializer is not in the {} set", spec.kind_name())));
    }
    if init.min_eigenvalue() <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: init.min_eigenvalue() });
    }
    Ok(())
}

/// Runs MM with `inner` producing the next iterate from the current one.
/// Steps that fail to decrease the objective are retried at tighter inner
/// accuracy; if that still fails the loop ends with [`ExitReason::Stalled`].
pub(crate) fn run_mm(
    method: &str,
    y: &DataFactor,
    spec: &StructureSpec,
    init: HermMat,
    lo: &LoopOptions,
    mut gamma_of: impl FnMut(usize) -> Option<f64>,
    mut inner: impl FnMut(&OuterState<'_>) -> Result<InnerStep>,
) -> Result<FitReport> {
    let start = Instant::now();
    let r_fb = y.reconstruct();
    let mut r = init;
    let mut x = concentrated_x(y, &r)?;
    let mut p = surrogate_objective(&BlockPair { x: x.clone(), r: r.clone() })?;
    let mut objective_trace = vec![p];
    let mut neg_ll_trace = vec![neg_log_likelihood(&r, &r_fb)?];
    let mut inner_iterations = Vec::new();
    let mut gamma_trace = Vec::new();
    let mut pd_repairs = 0;
    let mut inner_cap_hits = 0;
    let mut exit = ExitReason::MaxIterations;

    for t in 0..lo.max_outer {
        if let Some(g) = gamma_of(t) {
            gamma_trace.push(g);
        }
        let r_inv = inv_pd(&r)?;
        let mut spent = 0;
        let mut accepted = None;
        let mut capped = false;
        for retry in 0..=lo.max_retries {
            let st = OuterState { t, r: &r, x: &x, r_inv: &r_inv, retry };
            let step = inner(&st)?;
            spent += step.iterations;
            capped |= step.capped;
            let (r_new, repaired) = repair_pd(step.r)?;
            let x_new = concentrated_x(y, &r_new)?;
            let p_new = surrogate_objective(&BlockPair { x: x_new.clone(), r: r_new.clone() })?;
            if p_new <= p + ACCEPT_SLACK * (1.0 + p.abs()) {
                accepted = Some((r_new, x_new, p_new, repaired));
                break;
            }
            log::debug!("{method}: outer {t} retry {retry}: objective rose by {:e}", p_new - p);
        }
        inner_iterations.push(spent);
        if capped {
            inner_cap_hits += 1;
        }
        let Some((r_new, x_new, p_new, repaired)) = accepted else {
            exit = ExitReason::Stalled;
            break;
        };
        if repaired {
            pd_repairs += 1;
        }
        let decrease = p - p_new;
        r = r_new;
        x = x_new;
        p = p_new;
        objective_trace.push(p);
        neg_ll_trace.push(neg_log_likelihood(&r, &r_fb)?);
        if decrease <= lo.outer_tol {
            exit = ExitReason::Converged;
            break;
        }
    }

    let stationarity = stationarity_residual(&r, &r_fb, spec)?;
    Ok(FitReport {
        method: method.to_string(),
        spec: *spec,
        outer_iterations: objective_trace.len() - 1,
        r_hat: r,
        objective_trace,
        neg_ll_trace,
        inner_iterations,
        gamma_trace,
        stationarity_residual: stationarity,
        exit_reason: exit,
        pd_repairs,
        inner_cap_hits,
        wall_time_secs: start.elapsed().as_secs_f64(),
        log_base: "natural".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::testutil::*;
    use crate::structsets::proj_toeplitz_herm;

    #[test]
    fn repair_shifts_only_when_needed() {
        let (r, fixed) = repair_pd(HermMat::identity(3)).unwrap();
        assert!(!fixed);
        assert_eq!(r, HermMat::identity(3));
        let t = proj_toeplitz_herm(&random_herm(&mut rng(3), 4));
        let (r, fixed) = repair_pd(t.clone()).unwrap();
        if t.min_eigenvalue() <= 0.0 {
            assert!(fixed);
            assert!(r.min_eigenvalue() > 0.0);
            assert_eq!(proj_toeplitz_herm(&r), r);
        }
        assert!(repair_pd(HermMat::zeros(2)).is_err());
    }

    #[test]
    fn stationarity_zero_at_unconstrained_optimum() {
        let mut rng = rng(2);
        let s = random_psd(&mut rng, 4).shift_diagonal(1.0);
        let t = proj_toeplitz_herm(&s);
        let spec = StructureSpec::toeplitz(4).unwrap();
        assert_eq!(stationarity_residual(&t, &t, &spec).unwrap(), 0.0);
        assert!(stationarity_residual(&HermMat::identity(4), &s, &spec).unwrap() > 0.0);
    }

    #[test]
    fn default_init_is_structured_and_pd() {
        let spec = StructureSpec::banded(5, 1).unwrap();
        let v = nalgebra::DVector::from_vec(vec![crate::hermlin::c64(1.0, 0.0); 5]);
        let y = factor_data(&HermMat::outer(&v), DEFAULT_RANK_TOL).unwrap();
        let r0 = default_init(&y, &spec).unwrap();
        assert!(r0.min_eigenvalue() > 0.0);
        assert_eq!(spec.project(&r0).unwrap(), r0);
    }
}
