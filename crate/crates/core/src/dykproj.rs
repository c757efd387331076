//! Nearest-point solvers over the intersection of a structured block-diagonal
//! subspace and the LMI set `{E : E + D ⪰ 0}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{c64, evd_values, CMatrix, HermMat};
use crate::structsets::{proj_dtoep_raw, proj_lmi_raw, StructureSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DykstraOptions {
    /// Stop when `‖T_{k+1} − T_k‖_F` and the gap `‖T_k − Y_k‖_F` between the
    /// two sets' iterates are both below `tol·(1 + ‖B‖_F)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep a per-iteration `(k, delta, λ_min)` trace.
    pub record_trace: bool,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 5000, record_trace: false }
    }
}

impl DykstraOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidArgument(format!("projection tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("projection max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterTrace {
    pub k: usize,
    pub delta: f64,
    /// Smallest eigenvalue of the matrix fed to the LMI projection, before clamping.
    pub lambda_min: f64,
}

#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    /// The returned point; its lower block lies exactly in the structure set.
    pub e: HermMat,
    pub iterations: usize,
    pub converged: bool,
    pub last_delta: f64,
    /// `max(0, −λ_min(E + D))`.
    pub lmi_violation: f64,
    pub trace: Vec<IterTrace>,
}

/// Iterates of the corrected alternating projections.
#[derive(Clone, Debug)]
pub struct DykstraState {
    pub t: HermMat,
    pub p: HermMat,
    pub q: HermMat,
    pub k: usize,
    pub last_delta: f64,
    /// `‖T_k − Y_k‖_F`.
    pub last_gap: f64,
}

impl DykstraState {
    pub fn new(b: &HermMat) -> Self {
        let n = b.dim();
        Self { t: b.clone(), p: HermMat::zeros(n), q: HermMat::zeros(n), k: 0, last_delta: f64::INFINITY, last_gap: f64::INFINITY }
    }

    /// One sweep: structure projection with correction `P`, then LMI
    /// projection with correction `Q`. Returns the pre-clamp `λ_min`.
    pub(crate) fn step(&mut self, d: &CMatrix, r: usize, spec: &StructureSpec) -> f64 {
        let tp = self.t.matrix() + self.p.matrix();
        let y = proj_dtoep_raw(&tp, r, spec);
        let p_next = &tp - &y;
        let yq = &y + self.q.matrix();
        let (t_next, lam_min) = proj_lmi_raw(&yq, d);
        let q_next = &yq - &t_next;
        self.last_delta = (&t_next - self.t.matrix()).norm();
        self.last_gap = (&t_next - &y).norm();
        self.t = HermMat::from_exact(t_next);
        self.p = HermMat::from_exact(p_next);
        self.q = HermMat::from_exact(q_next);
        self.k += 1;
        lam_min
    }
}

fn check_inputs(b: &HermMat, d: &HermMat, spec: &StructureSpec) -> Result<usize> {
    if b.dim() != d.dim() {
        return Err(Error::Dimension(format!("B is {0}x{0} but D is {1}x{1}", b.dim(), d.dim())));
    }
    if b.dim() < spec.m() {
        return Err(Error::Dimension(format!("matrix size {} is smaller than structure size {}", b.dim(), spec.m())));
    }
    if !b.is_finite() || !d.is_finite() {
        return Err(Error::NonFinite("projection inputs".into()));
    }
    Ok(b.dim() - spec.m())
}

fn finish(t: &HermMat, d: &HermMat, r: usize, spec: &StructureSpec) -> (HermMat, f64) {
    let e = HermMat::from_exact(proj_dtoep_raw(t.matrix(), r, spec));
    let lam = evd_values(&(e.matrix() + d.matrix())).first().copied().unwrap_or(0.0);
    (e, (-lam).max(0.0))
}

/// Nearest point to `B` in `{E block-diagonal, lower block in spec} ∩ {E + D ⪰ 0}`.
pub fn dykstra(b: &HermMat, d: &HermMat, spec: &StructureSpec, opts: &DykstraOptions) -> Result<ProjectionOutcome> {
    opts.validate()?;
    let r = check_inputs(b, d, spec)?;
    let thresh = opts.tol * (1.0 + b.frobenius_norm());
    let mut st = DykstraState::new(b);
    let mut trace = Vec::new();
    let mut converged = false;
    while st.k < opts.max_iter {
        let lam = st.step(d.matrix(), r, spec);
        if !st.last_delta.is_finite() {
            return Err(Error::Diverged(format!("projection iterate became non-finite at k = {}", st.k)));
        }
        if opts.record_trace {
            trace.push(IterTrace { k: st.k, delta: st.last_delta, lambda_min: lam });
        }
        if st.last_delta <= thresh && st.last_gap <= thresh {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("dykstra stopped at max_iter = {} with delta {:e}", opts.max_iter, st.last_delta);
    }
    let (e, lmi_violation) = finish(&st.t, d, r, spec);
    Ok(ProjectionOutcome { e, iterations: st.k, converged, last_delta: st.last_delta, lmi_violation, trace })
}

/// Plain alternating projections without corrections: finds a feasible
/// point, generally not the nearest one.
pub fn pocs(b: &HermMat, d: &HermMat, spec: &StructureSpec, opts: &DykstraOptions) -> Result<ProjectionOutcome> {
    opts.validate()?;
    let r = check_inputs(b, d, spec)?;
    let thresh = opts.tol * (1.0 + b.frobenius_norm());
    let mut t = b.matrix().clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k = 0;
    let mut delta = f64::INFINITY;
    while k < opts.max_iter {
        let y = proj_dtoep_raw(&t, r, spec);
        let (t_next, lam) = proj_lmi_raw(&y, d.matrix());
        delta = (&t_next - &t).norm();
        let gap = (&t_next - &y).norm();
        t = t_next;
        k += 1;
        if !delta.is_finite() {
            return Err(Error::Diverged(format!("projection iterate became non-finite at k = {k}")));
        }
        if opts.record_trace {
            trace.push(IterTrace { k, delta, lambda_min: lam });
        }
        if delta <= thresh && gap <= thresh {
            converged = true;
            break;
        }
    }
    let (e, lmi_violation) = finish(&HermMat::from_exact(t), d, r, spec);
    Ok(ProjectionOutcome { e, iterations: k, converged, last_delta: delta, lmi_violation, trace })
}

/// Largest total dimension accepted by [`qp_oracle_small`].
pub const ORACLE_MAX_DIM: usize = 4;

/// Certified nearest point for tiny real instances, computed independently of
/// the projection iterations by a log-barrier interior-point method over an
/// orthonormal basis of the structured subspace.
pub fn qp_oracle_small(b: &HermMat, d: &HermMat, spec: &StructureSpec) -> Result<HermMat> {
    let r = check_inputs(b, d, spec)?;
    let n = b.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::Unsupported(format!("oracle handles total dimension <= {ORACLE_MAX_DIM}, got {n}")));
    }
    let is_real = |h: &HermMat| h.matrix().iter().all(|z| z.im == 0.0);
    if !is_real(b) || !is_real(d) {
        return Err(Error::InvalidArgument("oracle needs real-valued B and D".into()));
    }
    let br = b.matrix().map(|z| z.re);
    let dr = d.matrix().map(|z| z.re);

    let basis = real_subspace_basis(n, r, spec);
    let k = basis.len();
    let coords = |m: &DMatrix<f64>| DVector::from_fn(k, |i, _| basis[i].dot(m));
    let assemble = |c: &DVector<f64>| basis.iter().zip(c.iter()).fold(DMatrix::zeros(n, n), |acc, (g, &ci)| acc + g * ci);
    let target = coords(&br);

    let s0 = 1.0 + dr.clone().symmetric_eigenvalues().amax();
    let mut c = coords(&(DMatrix::identity(n, n) * s0));
    let feasible = |c: &DVector<f64>| (assemble(c) + &dr).cholesky().is_some();

    // Damped Newton on the self-concordant `‖c − target‖²/μ − ln det(E + D)`,
    // following the central path down to `μ = 1e-8`.
    let mut mu = 1.0_f64;
    let mu_final = 1e-8;
    loop {
        for _ in 0..500 {
            let m = assemble(&c) + &dr;
            let minv = match m.cholesky() {
                Some(ch) => ch.inverse(),
                None => return Err(Error::Diverged("oracle lost strict feasibility".into())),
            };
            let mg: Vec<DMatrix<f64>> = basis.iter().map(|g| &minv * g).collect();
            let grad = DVector::from_fn(k, |i, _| 2.0 * (c[i] - target[i]) / mu - minv.dot(&basis[i]));
            let hess = DMatrix::from_fn(k, k, |i, j| {
                let h = (&mg[i] * &mg[j]).trace();
                if i == j {
                    h + 2.0 / mu
                } else {
                    h
                }
            });
            let Some(ch) = hess.cholesky() else {
                return Err(Error::Diverged("oracle Hessian is not positive definite".into()));
            };
            let step = ch.solve(&grad);
            let lam2 = grad.dot(&step);
            if lam2 <= 1e-20 {
                break;
            }
            let lam = lam2.sqrt();
            let mut a = if lam > 0.25 { 1.0 / (1.0 + lam) } else { 1.0 };
            let mut cand = &c - &step * a;
            while !feasible(&cand) {
                a *= 0.5;
                if a < 1e-16 {
                    return Err(Error::Diverged("oracle step search failed".into()));
                }
                cand = &c - &step * a;
            }
            c = cand;
        }
        if mu <= mu_final {
            break;
        }
        mu = (mu * 0.1).max(mu_final);
    }

    let e = assemble(&c);
    let m = &e + &dr;
    let minv = m.clone().cholesky().map(|ch| ch.inverse()).ok_or_else(|| Error::Diverged("oracle endpoint infeasible".into()))?;
    let z = &minv * mu;
    let stationarity = DVector::from_fn(k, |i, _| 2.0 * (c[i] - target[i]) - z.dot(&basis[i])).norm();
    let complementarity = (&z * &m).trace().abs();
    let kkt = stationarity.max(complementarity);
    if kkt > 1e-6 * (1.0 + b.frobenius_norm()) {
        return Err(Error::Diverged(format!("oracle KKT residual {kkt:e} too large")));
    }
    HermMat::from_real(&e)
}

/// Orthonormal basis (real Frobenius inner product) of the real symmetric
/// matrices in the structured block-diagonal subspace.
fn real_subspace_basis(n: usize, r: usize, spec: &StructureSpec) -> Vec<DMatrix<f64>> {
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..n {
        for j in i..n {
            let mut u = CMatrix::zeros(n, n);
            u[(i, j)] = c64(1.0, 0.0);
            u[(j, i)] = c64(1.0, 0.0);
            let mut v = proj_dtoep_raw(&u, r, spec).map(|z| z.re);
            for g in &basis {
                let proj = g.dot(&v);
                v -= g * proj;
            }
            let nv = v.norm();
            if nv > 1e-10 {
                basis.push(v / nv);
            }
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::testutil::*;
    use crate::hermlin::BlockPair;
    use crate::structsets::{proj_dtoep, proj_toeplitz_herm};
    use rand::Rng;

    fn real_sym(rng: &mut impl Rng, n: usize) -> HermMat {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        HermMat::from_real(&((&a + a.transpose()) * 0.5)).unwrap()
    }

    fn real_coupling(rng: &mut impl Rng) -> HermMat {
        let y = [rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0];
        let mut d = DMatrix::zeros(3, 3);
        d[(1, 0)] = y[0];
        d[(2, 0)] = y[1];
        d[(0, 1)] = y[0];
        d[(0, 2)] = y[1];
        HermMat::from_real(&d).unwrap()
    }

    #[test]
    fn feasible_input_is_a_fixed_point() {
        let spec = StructureSpec::toeplitz(3).unwrap();
        let mut rng = rng(1);
        let b = BlockPair { x: random_psd(&mut rng, 2), r: proj_toeplitz_herm(&random_psd(&mut rng, 3)).shift_diagonal(5.0) }
            .assemble();
        let d = HermMat::zeros(5);
        let out = dykstra(&b, &d, &spec, &DykstraOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.e.max_abs_diff(&b) < 1e-12);
        let out = pocs(&b, &d, &spec, &DykstraOptions::default()).unwrap();
        assert!(out.e.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn dykstra_matches_oracle_on_tiny_real_instances() {
        let spec = StructureSpec::toeplitz(2).unwrap();
        let mut rng = rng(2024);
        let mut active = 0;
        for _ in 0..20 {
            let b = real_sym(&mut rng, 3).scale(2.0);
            let d = real_coupling(&mut rng);
            let oracle = qp_oracle_small(&b, &d, &spec).unwrap();
            let out = dykstra(&b, &d, &spec, &DykstraOptions { max_iter: 100_000, ..Default::default() }).unwrap();
            assert!(out.converged);
            let err = (&out.e - &oracle).frobenius_norm();
            assert!(err <= 1e-4 * (1.0 + b.frobenius_norm()), "err {err}");
            if (&oracle + &d).min_eigenvalue() < 1e-6 {
                active += 1;
            }
        }
        assert!(active > 0, "no instance exercised the LMI constraint");
    }

    #[test]
    fn oracle_interior_case_is_plain_projection() {
        let spec = StructureSpec::toeplitz(2).unwrap();
        let b = HermMat::from_real(&DMatrix::from_row_slice(3, 3, &[5.0, 0.2, 0.0, 0.2, 6.0, 0.3, 0.0, 0.3, 4.0])).unwrap();
        let d = HermMat::from_real(&DMatrix::from_row_slice(3, 3, &[0.0, 0.1, 0.1, 0.1, 0.0, 0.0, 0.1, 0.0, 0.0])).unwrap();
        let e = qp_oracle_small(&b, &d, &spec).unwrap();
        assert!((&e - &proj_dtoep(&b, &spec).unwrap()).frobenius_norm() < 1e-8);
    }

    #[test]
    fn oracle_active_case_touches_boundary() {
        let spec = StructureSpec::toeplitz(2).unwrap();
        let d = HermMat::from_real(&DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.5, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0])).unwrap();
        let e = qp_oracle_small(&HermMat::zeros(3), &d, &spec).unwrap();
        let lam = (&e + &d).min_eigenvalue();
        assert!(lam.abs() < 1e-8, "{lam}");
    }

    #[test]
    fn oracle_rejects_large_or_complex() {
        let spec = StructureSpec::toeplitz(3).unwrap();
        assert!(qp_oracle_small(&HermMat::zeros(5), &HermMat::zeros(5), &spec).is_err());
        let spec = StructureSpec::toeplitz(2).unwrap();
        let c = HermMat::hermitian_part(&random_complex(&mut rng(3), 3, 3));
        assert!(qp_oracle_small(&c, &HermMat::zeros(3), &spec).is_err());
    }

    #[test]
    fn pocs_is_feasible_and_no_closer_than_dykstra() {
        let spec = StructureSpec::toeplitz(3).unwrap();
        let mut rng = rng(5);
        for _ in 0..10 {
            let b = random_herm(&mut rng, 5).scale(3.0);
            let y = random_complex(&mut rng, 3, 2);
            let mut dm = CMatrix::zeros(5, 5);
            dm.view_mut((2, 0), (3, 2)).copy_from(&y);
            dm.view_mut((0, 2), (2, 3)).copy_from(&y.adjoint());
            let d = HermMat::from_exact(dm);
            let opts = DykstraOptions { tol: 1e-13, max_iter: 1_000_000, ..Default::default() };
            let p = pocs(&b, &d, &spec, &opts).unwrap();
            let k = dykstra(&b, &d, &spec, &opts).unwrap();
            assert!(p.lmi_violation <= 1e-8 * (1.0 + b.frobenius_norm()), "{}", p.lmi_violation);
            assert!(k.lmi_violation <= 1e-8 * (1.0 + b.frobenius_norm()), "{}", k.lmi_violation);
            assert_eq!(proj_dtoep(&p.e, &spec).unwrap(), p.e);
            assert!((&p.e - &b).frobenius_norm() >= (&k.e - &b).frobenius_norm() - 1e-8);
        }
    }

    #[test]
    fn trace_is_recorded() {
        let spec = StructureSpec::toeplitz(2).unwrap();
        let mut rng = rng(6);
        let b = real_sym(&mut rng, 3);
        let d = real_coupling(&mut rng);
        let out = dykstra(&b, &d, &spec, &DykstraOptions { record_trace: true, ..Default::default() }).unwrap();
        assert_eq!(out.trace.len(), out.iterations);
        assert_eq!(out.trace.last().unwrap().delta, out.last_delta);
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let spec = StructureSpec::toeplitz(2).unwrap();
        assert!(dykstra(&HermMat::zeros(3), &HermMat::zeros(4), &spec, &DykstraOptions::default()).is_err());
        assert!(dykstra(&HermMat::zeros(1), &HermMat::zeros(1), &spec, &DykstraOptions::default()).is_err());
    }
}
