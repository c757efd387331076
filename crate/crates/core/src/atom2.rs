//! ATOM2: majorization-minimization with the proximal quadratic surrogate,
//! each step being a nearest-point problem solved by Dykstra's algorithm.
//! Works for every structure kind.

use serde::{Deserialize, Serialize};

use crate::atom1::surrogate_weight;
use crate::dykproj::{dykstra, DykstraOptions};
use crate::error::{Error, Result};
use crate::hermlin::{BlockPair, DataFactor, HermMat};
use crate::mm::{check_start, default_init, run_mm, FitReport, InnerStep, LoopOptions};
use crate::structsets::StructureSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Atom2Options {
    pub gamma0: f64,
    pub k1: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Structure to fit; `None` means Toeplitz of the data dimension.
    pub spec: Option<StructureSpec>,
    pub dykstra: DykstraOptions,
    /// Kept for interface symmetry with ATOM1; the algorithm is deterministic.
    pub seed: u64,
}

impl Default for Atom2Options {
    fn default() -> Self {
        Self { gamma0: 1e-4, k1: 5.0, outer_tol: 1e-4, max_outer: 1000, spec: None, dykstra: DykstraOptions::default(), seed: 0 }
    }
}

impl Atom2Options {
    pub fn with_spec(spec: StructureSpec) -> Self {
        Self { spec: Some(spec), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.k1 >= 0.0) || !self.k1.is_finite() {
            return Err(Error::InvalidArgument(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("outer_tol must be positive, got {}", self.outer_tol)));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        self.dykstra.validate()
    }

    fn resolve_spec(&self, m: usize) -> Result<StructureSpec> {
        match self.spec {
            Some(s) => {
                s.check_dim(m)?;
                Ok(s)
            }
            None => StructureSpec::toeplitz(m),
        }
    }
}

/// `γ₀ (t ln t + k₁)²` with `0·ln 0 = 0`.
pub fn gamma_schedule(t: f64, gamma0: f64, k1: f64) -> f64 {
    let tlt = if t > 0.0 { t * t.ln() } else { 0.0 };
    gamma0 * (tlt + k1).powi(2)
}

/// Proximal surrogate `Tr(A_t E) + γ‖E − E_t‖²_F`; equals `Tr(A_t E_t)` at
/// `E = E_t`.
pub fn atom2_surrogate_value(e: &HermMat, e_t: &HermMat, a_t: &HermMat, gamma: f64) -> Result<f64> {
    if e.dim() != e_t.dim() || e.dim() != a_t.dim() {
        return Err(Error::Dimension("surrogate operands differ in size".into()));
    }
    let diff = e - e_t;
    Ok(a_t.inner(e) + gamma * diff.inner(&diff))
}

pub fn atom2(y: &DataFactor, opts: &Atom2Options) -> Result<FitReport> {
    let spec = opts.resolve_spec(y.dim())?;
    let init = default_init(y, &spec)?;
    atom2_from(y, opts, init)
}

pub fn atom2_from(y: &DataFactor, opts: &Atom2Options, init: HermMat) -> Result<FitReport> {
    opts.validate()?;
    let spec = opts.resolve_spec(y.dim())?;
    check_start(y, &spec, &init)?;
    let rank = y.rank();
    let d = y.coupling();
    let lo = LoopOptions { outer_tol: opts.outer_tol, max_outer: opts.max_outer, max_retries: 2 };
    let gamma_at = |t: usize| gamma_schedule(t as f64, opts.gamma0, opts.k1);
    run_mm("atom2", y, &spec, init, &lo, |t| Some(gamma_at(t)), |st| {
        let gamma = gamma_at(st.t);
        let a_t = surrogate_weight(rank, st.r_inv);
        let e_t = BlockPair { x: st.x.clone(), r: st.r.clone() }.assemble();
        let b = &e_t - &a_t.scale(0.5 / gamma);
        let dopts = DykstraOptions {
            tol: opts.dykstra.tol * 0.01_f64.powi(st.retry as i32),
            max_iter: opts.dykstra.max_iter * 10usize.pow(st.retry),
            record_trace: false,
        };
        let out = dykstra(&b, &d, &spec, &dopts)?;
        Ok(InnerStep { r: BlockPair::split(&out.e, rank).r, iterations: out.iterations, capped: !out.converged })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::testutil::*;
    use crate::hermlin::{factor_data, inv_pd, DEFAULT_RANK_TOL};

    #[test]
    fn gamma_schedule_values() {
        let g0 = 1e-4;
        assert_eq!(gamma_schedule(1.0, g0, 5.0), 25.0 * g0);
        assert_eq!(gamma_schedule(0.0, g0, 5.0), 25.0 * g0);
        let e = std::f64::consts::E;
        assert!((gamma_schedule(e, g0, 5.0) - g0 * (e + 5.0).powi(2)).abs() < 1e-18);
    }

    #[test]
    fn surrogate_tangency_and_gap() {
        let mut rng = rng(3);
        let e_t = random_herm(&mut rng, 4);
        let a_t = random_psd(&mut rng, 4);
        let e = random_herm(&mut rng, 4);
        let gamma = 0.7;
        assert_eq!(atom2_surrogate_value(&e_t, &e_t, &a_t, gamma).unwrap(), a_t.inner(&e_t));
        assert_eq!(atom2_surrogate_value(&e, &e_t, &a_t, 0.0).unwrap(), a_t.inner(&e));
        let gap = atom2_surrogate_value(&e, &e_t, &a_t, gamma).unwrap() - a_t.inner(&e);
        let d = (&e - &e_t).frobenius_norm();
        assert!((gap - gamma * d * d).abs() < 1e-12);
    }

    #[test]
    fn majorization_chain_holds_each_step() {
        let mut rng = rng(12);
        let y = factor_data(&random_psd(&mut rng, 4), DEFAULT_RANK_TOL).unwrap();
        let rep = atom2(&y, &Atom2Options { max_outer: 30, ..Default::default() }).unwrap();
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for (p, f) in rep.objective_trace.iter().zip(&rep.neg_ll_trace) {
            assert!(f <= &(p + 1e-8));
        }
        assert!(inv_pd(&rep.r_hat).is_ok());
    }

    #[test]
    fn rejects_spec_dimension_mismatch() {
        let y = factor_data(&HermMat::identity(4), DEFAULT_RANK_TOL).unwrap();
        let opts = Atom2Options::with_spec(StructureSpec::toeplitz(5).unwrap());
        assert!(atom2(&y, &opts).is_err());
        assert!(atom2(&y, &Atom2Options { gamma0: -1.0, ..Default::default() }).is_err());
    }
}
