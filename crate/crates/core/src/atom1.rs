//! ATOM1: majorization-minimization with the linearized surrogate solved by
//! ADMM over the PSD splitting `U = E + D`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{c64, BlockPair, CMatrix, DataFactor, HermMat};
use crate::mm::{check_start, default_init, run_mm, FitReport, InnerStep, LoopOptions};
use crate::structsets::{proj_dtoep_raw, proj_psd_raw, StructureSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Atom1Options {
    pub rho: f64,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Seed of the random initial multiplier.
    pub seed: u64,
}

impl Default for Atom1Options {
    fn default() -> Self {
        Self { rho: 1.0, outer_tol: 1e-4, inner_tol: 1e-6, max_outer: 1000, max_inner: 500, seed: 0 }
    }
}

impl Atom1Options {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("outer_tol", self.outer_tol), ("inner_tol", self.inner_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    /// Residuals must fall below `tol·(r+m)`.
    pub tol: f64,
    pub max_iter: usize,
    pub record_trace: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self { rho: 1.0, tol: 1e-6, max_iter: 500, record_trace: false }
    }
}

#[derive(Clone, Debug)]
pub struct AdmmOutcome {
    pub e: HermMat,
    pub u: HermMat,
    pub lambda: HermMat,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `(primal, dual)` residual per iteration when recorded.
    pub trace: Vec<(f64, f64)>,
}

/// ADMM for `min Tr(A E)` over block-diagonal `E` with structured lower block
/// and `E + D ⪰ 0`.
pub fn admm_inner(
    a_t: &HermMat,
    d: &HermMat,
    spec: &StructureSpec,
    e0: &HermMat,
    lambda0: &HermMat,
    s: &AdmmSettings,
) -> Result<AdmmOutcome> {
    admm_core(a_t, d, spec, None, e0, lambda0, s)
}

/// ADMM for the proximal variant `min Tr(A E) + γ‖E − E_c‖²` over the same
/// feasible set; the problem the projection solver handles with
/// `B = E_c − A/(2γ)`.
#[allow(clippy::too_many_arguments)]
pub fn admm_inner_prox(
    a_t: &HermMat,
    d: &HermMat,
    spec: &StructureSpec,
    anchor: &HermMat,
    gamma: f64,
    e0: &HermMat,
    lambda0: &HermMat,
    s: &AdmmSettings,
) -> Result<AdmmOutcome> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    admm_core(a_t, d, spec, Some((anchor, gamma)), e0, lambda0, s)
}

fn admm_core(
    a_t: &HermMat,
    d: &HermMat,
    spec: &StructureSpec,
    prox: Option<(&HermMat, f64)>,
    e0: &HermMat,
    lambda0: &HermMat,
    s: &AdmmSettings,
) -> Result<AdmmOutcome> {
    let n = d.dim();
    if [a_t.dim(), e0.dim(), lambda0.dim()].iter().any(|&k| k != n) || prox.is_some_and(|(c, _)| c.dim() != n) {
        return Err(Error::Dimension("ADMM operands differ in size".into()));
    }
    if n < spec.m() {
        return Err(Error::Dimension(format!("matrix size {n} is smaller than structure size {}", spec.m())));
    }
    if !(s.rho > 0.0) || !(s.tol > 0.0) {
        return Err(Error::InvalidArgument("rho and tol must be positive".into()));
    }
    let r = n - spec.m();
    let rho = s.rho;
    let (dm, am) = (d.matrix(), a_t.matrix());
    let (gamma, anchor2) = match prox {
        Some((c, g)) => (g, c.matrix() * c64(2.0 * g, 0.0)),
        None => (0.0, CMatrix::zeros(n, n)),
    };
    let denom = c64(rho + 2.0 * gamma, 0.0);

    let mut e = e0.matrix().clone();
    let mut lam = lambda0.matrix().clone();
    let mut u_prev = proj_psd_raw(&(&e + dm + &lam / c64(rho, 0.0)));
    let mut u = u_prev.clone();
    let thresh = s.tol * n as f64;
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut k = 0;
    let mut converged = false;
    while k < s.max_iter {
        if k > 0 {
            u = proj_psd_raw(&(&e + dm + &lam / c64(rho, 0.0)));
        }
        let target = ((&u - dm) * c64(rho, 0.0) - &lam - am + &anchor2) / denom;
        e = proj_dtoep_raw(&target, r, spec);
        let resid = &e + dm - &u;
        lam += &resid * c64(rho, 0.0);
        primal = resid.norm();
        dual = if k == 0 { f64::INFINITY } else { rho * (&u - &u_prev).norm() };
        k += 1;
        if !primal.is_finite() {
            return Err(Error::Diverged(format!("ADMM residual became non-finite at iteration {k}")));
        }
        if s.record_trace {
            trace.push((primal, dual));
        }
        if primal <= thresh && dual <= thresh {
            converged = true;
            break;
        }
        u_prev = u.clone();
    }
    if !converged {
        log::debug!("ADMM stopped at {k} iterations (primal {primal:e}, dual {dual:e})");
    }
    Ok(AdmmOutcome {
        e: HermMat::from_exact(e),
        u: HermMat::from_exact(u),
        lambda: HermMat::from_exact(lam),
        iterations: k,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        trace,
    })
}

/// `V Vᴴ` with `V` uniform on `[0, 1]`, `n×n`.
pub fn random_multiplier(n: usize, seed: u64) -> HermMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CMatrix::from_fn(n, n, |_, _| c64(rng.random::<f64>(), 0.0));
    HermMat::hermitian_part(&(&v * v.adjoint()))
}

/// `A_t = diag(I_r, R_t⁻¹)`.
pub(crate) fn surrogate_weight(r: usize, r_inv: &HermMat) -> HermMat {
    BlockPair { x: HermMat::identity(r), r: r_inv.clone() }.assemble()
}

/// ATOM1 from the default initializer.
pub fn atom1(y: &DataFactor, opts: &Atom1Options) -> Result<FitReport> {
    let spec = StructureSpec::toeplitz(y.dim())?;
    let init = default_init(y, &spec)?;
    atom1_from(y, opts, init)
}

/// ATOM1 from a caller-supplied PD Toeplitz initializer.
pub fn atom1_from(y: &DataFactor, opts: &Atom1Options, init: HermMat) -> Result<FitReport> {
    opts.validate()?;
    let spec = StructureSpec::toeplitz(y.dim())?;
    check_start(y, &spec, &init)?;
    let rank = y.rank();
    let n = rank + spec.m();
    let d = y.coupling();
    let mut lambda = random_multiplier(n, opts.seed);
    let mut x_admm: Option<HermMat> = None;
    let lo = LoopOptions { outer_tol: opts.outer_tol, max_outer: opts.max_outer, max_retries: 2 };
    run_mm("atom1", y, &spec, init, &lo, |_| None, |st| {
        let a_t = surrogate_weight(rank, st.r_inv);
        let x0 = x_admm.clone().unwrap_or_else(|| st.x.clone());
        let e0 = BlockPair { x: x0, r: st.r.clone() }.assemble();
        let tighten = 0.01_f64.powi(st.retry as i32);
        let settings = AdmmSettings {
            rho: opts.rho,
            tol: opts.inner_tol * tighten,
            max_iter: opts.max_inner * 10usize.pow(st.retry),
            record_trace: false,
        };
        let out = admm_inner(&a_t, &d, &spec, &e0, &lambda, &settings)?;
        let parts = BlockPair::split(&out.e, rank);
        x_admm = Some(parts.x);
        lambda = out.lambda;
        Ok(InnerStep { r: parts.r, iterations: out.iterations, capped: !out.converged })
    })
}
