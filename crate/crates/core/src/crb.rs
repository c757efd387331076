//! Fisher information and Cramér-Rao bounds for the Toeplitz, banded Toeplitz
//! and Toeplitz-block-Toeplitz parameterizations of a zero-mean complex
//! Gaussian model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{c64, inv_pd, CMatrix, HermMat};
use crate::structsets::StructureSpec;

/// Condition number above which the bound falls back to a pseudo-inverse.
pub const COND_LIMIT: f64 = 1e12;

/// Ordered derivatives `∂R/∂θ_i` of a structured parameterization.
#[derive(Clone, Debug)]
pub struct BasisSet {
    pub spec: StructureSpec,
    pub derivs: Vec<HermMat>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.derivs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derivs.is_empty()
    }
}

/// Toeplitz basis matrix `B_g`: `1+j` on the diagonal at offset `g−1` above
/// the main one, `1−j` on the matching subdiagonal (`1+j` on the main
/// diagonal when `g = 1`).
pub fn basis_toeplitz(g: usize, m: usize) -> Result<CMatrix> {
    if g == 0 || g > m {
        return Err(Error::InvalidArgument(format!("basis index g = {g} outside 1..={m}")));
    }
    let off = g - 1;
    Ok(CMatrix::from_fn(m, m, |i, k| {
        if k >= i && k - i == off {
            c64(1.0, 1.0)
        } else if i > k && i - k == off {
            c64(1.0, -1.0)
        } else {
            c64(0.0, 0.0)
        }
    }))
}

fn re_part(a: &CMatrix) -> CMatrix {
    a.map(|z| c64(z.re, 0.0))
}

fn im_part(a: &CMatrix) -> CMatrix {
    a.map(|z| c64(z.im, 0.0))
}

const J: num_complex::Complex64 = num_complex::Complex64::new(0.0, 1.0);

fn band_derivs(m: usize, b: usize) -> Vec<HermMat> {
    let mut out = Vec::with_capacity(2 * b + 1);
    for g in 1..=b + 1 {
        out.push(HermMat::from_exact(re_part(&basis_toeplitz(g, m).expect("g in range"))));
    }
    for g in 2..=b + 1 {
        out.push(HermMat::from_exact(im_part(&basis_toeplitz(g, m).expect("g in range")) * J));
    }
    out
}

pub fn derivs_toeplitz(m: usize) -> Result<BasisSet> {
    let spec = StructureSpec::toeplitz(m)?;
    Ok(BasisSet { spec, derivs: band_derivs(m, m - 1) })
}

pub fn derivs_banded(m: usize, b: usize) -> Result<BasisSet> {
    let spec = StructureSpec::banded(m, b)?;
    Ok(BasisSet { spec, derivs: band_derivs(m, b) })
}

/// `D_g`: `B_1` for `g = 1`, `½(B_gᵀ + j B_gᵀ)` otherwise.
fn tbt_d(g: usize, l: usize) -> CMatrix {
    let b = basis_toeplitz(g, l).expect("g in range");
    if g == 1 {
        b
    } else {
        let bt = b.transpose();
        (&bt + &bt * J) * c64(0.5, 0.0)
    }
}

/// Block shift `C_w`: ones where `i − k = w`.
fn shift(p: usize, w: usize) -> CMatrix {
    CMatrix::from_fn(p, p, |i, k| if i >= k && i - k == w { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
}

pub fn derivs_tbt(p: usize, l: usize) -> Result<BasisSet> {
    let spec = StructureSpec::tbt(p, l)?;
    let mut derivs = Vec::with_capacity(spec.theta_len());
    let c0 = shift(p, 0);
    for g in 1..=l {
        derivs.push(c0.kronecker(&re_part(&basis_toeplitz(g, l)?)));
    }
    for g in (l + 1)..=(2 * l - 1) {
        derivs.push(c0.kronecker(&(im_part(&basis_toeplitz(g - l + 1, l)?) * J)));
    }
    for w in 1..p {
        let cw = shift(p, w);
        let cwt = cw.transpose();
        let pair = |blk: CMatrix, lower: CMatrix| cw.kronecker(&lower) + cwt.kronecker(&blk);
        for g in 1..=l {
            let rd = re_part(&tbt_d(g, l));
            derivs.push(pair(rd.clone(), rd.transpose()));
        }
        for g in (l + 1)..=(2 * l) {
            let rd = re_part(&tbt_d(g - l, l));
            derivs.push(pair(&rd * J, rd.transpose() * -J));
        }
        for g in (2 * l + 1)..=(3 * l - 1) {
            let id = im_part(&tbt_d(g - 2 * l + 1, l));
            derivs.push(pair(id.clone(), id.transpose()));
        }
        for g in (3 * l)..=(4 * l - 2) {
            let id = im_part(&tbt_d(g - 3 * l + 2, l));
            derivs.push(pair(&id * J, id.transpose() * -J));
        }
    }
    let derivs = derivs.into_iter().map(HermMat::from_exact).collect();
    Ok(BasisSet { spec, derivs })
}

/// Derivative table for a structure; block-Toeplitz has none.
pub fn derivs_for(spec: &StructureSpec) -> Result<BasisSet> {
    match *spec {
        StructureSpec::Toeplitz { m } => derivs_toeplitz(m),
        StructureSpec::BandedToeplitz { m, b } => derivs_banded(m, b),
        StructureSpec::Tbt { p, l } => derivs_tbt(p, l),
        StructureSpec::BlockToeplitz { .. } => {
            Err(Error::Unsupported("no Cramér-Rao derivative table for block-Toeplitz structure".into()))
        }
    }
}

/// Fisher information `F_ik = n Re Tr(R⁻¹ ∂_iR R⁻¹ ∂_kR)`.
pub fn fim(r: &HermMat, basis: &BasisSet, n: usize) -> Result<DMatrix<f64>> {
    if basis.derivs.iter().any(|d| d.dim() != r.dim()) {
        return Err(Error::Dimension("derivative matrices do not match R".into()));
    }
    let ri = inv_pd(r)?;
    let prods: Vec<CMatrix> = basis.derivs.iter().map(|d| ri.matrix() * d.matrix()).collect();
    let k = prods.len();
    let mut f = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let mi = &prods[i];
            let mj = &prods[j];
            let mut s = 0.0;
            for a in 0..mi.nrows() {
                for b in 0..mi.ncols() {
                    s += (mi[(a, b)] * mj[(b, a)]).re;
                }
            }
            f[(i, j)] = n as f64 * s;
            f[(j, i)] = f[(i, j)];
        }
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrbValue {
    pub crb: f64,
    pub condition: f64,
    pub pseudo_inverse: bool,
}

/// `Tr(F⁻¹)` from the eigenvalues of `F`; ill-conditioned input falls back
/// to the pseudo-inverse and is flagged.
pub fn crb_trace(f: &DMatrix<f64>) -> Result<CrbValue> {
    if !f.is_square() || f.nrows() == 0 {
        return Err(Error::Dimension("FIM must be square and non-empty".into()));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("FIM".into()));
    }
    let ev = f.clone().symmetric_eigenvalues();
    let hi = ev.max();
    let lo = ev.min();
    if hi <= 0.0 {
        return Err(Error::InvalidArgument("FIM has no positive eigenvalue".into()));
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition <= COND_LIMIT {
        return Ok(CrbValue { crb: ev.iter().map(|l| 1.0 / l).sum(), condition, pseudo_inverse: false });
    }
    log::warn!("FIM condition number {condition:e} exceeds {COND_LIMIT:e}; using pseudo-inverse");
    let cut = hi / COND_LIMIT;
    Ok(CrbValue { crb: ev.iter().filter(|&&l| l > cut).map(|l| 1.0 / l).sum(), condition, pseudo_inverse: true })
}

/// Serializable bound for one configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrbReport {
    pub spec: StructureSpec,
    pub n: usize,
    pub crb: f64,
    pub condition: f64,
    pub warnings: Vec<String>,
}

pub fn crb_report(r: &HermMat, spec: &StructureSpec, n: usize) -> Result<CrbReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count n must be positive".into()));
    }
    spec.check_dim(r.dim())?;
    let v = crb_trace(&fim(r, &derivs_for(spec)?, n)?)?;
    let mut warnings = Vec::new();
    if v.pseudo_inverse {
        warnings.push(format!("ill-conditioned FIM (condition {:e}); pseudo-inverse used", v.condition));
    }
    Ok(CrbReport { spec: *spec, n, crb: v.crb, condition: v.condition, warnings })
}
