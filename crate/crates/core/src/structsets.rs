//! Toeplitz-family structure sets: their real parameterizations and the
//! orthogonal projections used by the inner solvers.
//!
//! Block layouts follow the usual block-Toeplitz convention: block `(i, k)`
//! with `k >= i` holds `R_{k-i}`, and the blocks below the diagonal hold the
//! conjugate transposes, so every projection returns a Hermitian matrix.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{c64, evd_raw, CMatrix, HermMat};

/// Relative tolerance for set-membership checks in [`theta_from_struct`].
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum StructureSpec {
    Toeplitz { m: usize },
    BandedToeplitz { m: usize, b: usize },
    BlockToeplitz { p: usize, l: usize },
    Tbt { p: usize, l: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    Toeplitz,
    Banded,
    Bt,
    Tbt,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: RawKind,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
}

impl TryFrom<RawSpec> for StructureSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let unexpected = |what: &str| Error::InvalidStructure(format!("field `{what}` does not apply to this kind"));
        let missing = |what: &str| Error::InvalidStructure(format!("missing field `{what}`"));
        match raw.kind {
            RawKind::Toeplitz => {
                if raw.b.is_some() {
                    return Err(unexpected("b"));
                }
                if raw.p.is_some() || raw.l.is_some() {
                    return Err(unexpected("p/l"));
                }
                StructureSpec::toeplitz(raw.m)
            }
            RawKind::Banded => {
                if raw.p.is_some() || raw.l.is_some() {
                    return Err(unexpected("p/l"));
                }
                StructureSpec::banded(raw.m, raw.b.ok_or_else(|| missing("b"))?)
            }
            RawKind::Bt | RawKind::Tbt => {
                if raw.b.is_some() {
                    return Err(unexpected("b"));
                }
                let p = raw.p.ok_or_else(|| missing("p"))?;
                let l = raw.l.ok_or_else(|| missing("l"))?;
                if p * l != raw.m {
                    return Err(Error::InvalidStructure(format!("p*l = {}*{} = {} does not equal m = {}", p, l, p * l, raw.m)));
                }
                if matches!(raw.kind, RawKind::Bt) {
                    StructureSpec::block_toeplitz(p, l)
                } else {
                    StructureSpec::tbt(p, l)
                }
            }
        }
    }
}

impl From<StructureSpec> for RawSpec {
    fn from(s: StructureSpec) -> Self {
        match s {
            StructureSpec::Toeplitz { m } => RawSpec { kind: RawKind::Toeplitz, m, b: None, p: None, l: None },
            StructureSpec::BandedToeplitz { m, b } => RawSpec { kind: RawKind::Banded, m, b: Some(b), p: None, l: None },
            StructureSpec::BlockToeplitz { p, l } => RawSpec { kind: RawKind::Bt, m: p * l, b: None, p: Some(p), l: Some(l) },
            StructureSpec::Tbt { p, l } => RawSpec { kind: RawKind::Tbt, m: p * l, b: None, p: Some(p), l: Some(l) },
        }
    }
}

impl StructureSpec {
    pub fn toeplitz(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidStructure("m must be positive".into()));
        }
        Ok(Self::Toeplitz { m })
    }

    pub fn banded(m: usize, b: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidStructure("m must be positive".into()));
        }
        if b >= m {
            return Err(Error::InvalidStructure(format!("bandwidth b = {b} must satisfy b <= m-1 = {}", m - 1)));
        }
        Ok(Self::BandedToeplitz { m, b })
    }

    pub fn block_toeplitz(p: usize, l: usize) -> Result<Self> {
        if p == 0 || l == 0 {
            return Err(Error::InvalidStructure("p and l must be positive".into()));
        }
        Ok(Self::BlockToeplitz { p, l })
    }

    pub fn tbt(p: usize, l: usize) -> Result<Self> {
        if p == 0 || l == 0 {
            return Err(Error::InvalidStructure("p and l must be positive".into()));
        }
        Ok(Self::Tbt { p, l })
    }

    pub fn m(&self) -> usize {
        match *self {
            Self::Toeplitz { m } | Self::BandedToeplitz { m, .. } => m,
            Self::BlockToeplitz { p, l } | Self::Tbt { p, l } => p * l,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Toeplitz { .. } => "toeplitz",
            Self::BandedToeplitz { .. } => "banded",
            Self::BlockToeplitz { .. } => "bt",
            Self::Tbt { .. } => "tbt",
        }
    }

    /// Number of real parameters of the set.
    pub fn theta_len(&self) -> usize {
        match *self {
            Self::Toeplitz { m } => 2 * m - 1,
            Self::BandedToeplitz { b, .. } => 2 * b + 1,
            Self::BlockToeplitz { p, l } => l * l + (p - 1) * 2 * l * l,
            Self::Tbt { p, l } => 2 * l - 1 + (p - 1) * (4 * l - 2),
        }
    }

    /// Whether every member satisfies `R = J R* J`. Block-Toeplitz with
    /// unstructured blocks is the only kind in this family that does not.
    pub fn is_persymmetric(&self) -> bool {
        !matches!(self, Self::BlockToeplitz { .. })
    }

    /// Orthogonal projection of an `m×m` Hermitian matrix onto the set.
    pub fn project(&self, a: &HermMat) -> Result<HermMat> {
        self.check_dim(a.dim())?;
        Ok(HermMat::from_exact(project_raw(self, a.matrix())))
    }

    pub fn check_dim(&self, m: usize) -> Result<()> {
        if m != self.m() {
            return Err(Error::Dimension(format!("{} structure expects m = {}, got {}", self.kind_name(), self.m(), m)));
        }
        Ok(())
    }

    /// Frobenius distance from `a` to the set.
    pub fn distance(&self, a: &HermMat) -> Result<f64> {
        Ok((&self.project(a)? - a).frobenius_norm())
    }
}

pub(crate) fn project_raw(spec: &StructureSpec, a: &CMatrix) -> CMatrix {
    match *spec {
        StructureSpec::Toeplitz { m } => toeplitz_herm_raw(a, m.saturating_sub(1)),
        StructureSpec::BandedToeplitz { b, .. } => toeplitz_herm_raw(a, b),
        StructureSpec::BlockToeplitz { p, l } => block_raw(a, p, l, false),
        StructureSpec::Tbt { p, l } => block_raw(a, p, l, true),
    }
}

/// Hermitian Toeplitz fit keeping diagonals up to offset `band`.
fn toeplitz_herm_raw(a: &CMatrix, band: usize) -> CMatrix {
    let m = a.nrows();
    let mut row = vec![Complex64::new(0.0, 0.0); m];
    for (d, slot) in row.iter_mut().enumerate().take(band.min(m.saturating_sub(1)) + 1) {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..(m - d) {
            s += a[(i, i + d)];
        }
        *slot = s / (m - d) as f64;
    }
    if m > 0 {
        row[0].im = 0.0;
    }
    hermitian_toeplitz(&row)
}

/// Hermitian Toeplitz matrix with the given first row (`row[0]` must be real).
fn hermitian_toeplitz(row: &[Complex64]) -> CMatrix {
    let m = row.len();
    CMatrix::from_fn(m, m, |i, k| if k >= i { row[k - i] } else { row[i - k].conj() })
}

/// General (non-Hermitian) Toeplitz matrix from its first row and column.
fn general_toeplitz(row: &[Complex64], col: &[Complex64]) -> CMatrix {
    let l = row.len();
    CMatrix::from_fn(l, l, |i, k| if k >= i { row[k - i] } else { col[i - k] })
}

fn toeplitz_general_raw(a: &CMatrix) -> CMatrix {
    let l = a.nrows();
    let mut row = vec![Complex64::new(0.0, 0.0); l];
    let mut col = vec![Complex64::new(0.0, 0.0); l];
    for d in 0..l {
        let cnt = (l - d) as f64;
        let mut up = Complex64::new(0.0, 0.0);
        let mut lo = Complex64::new(0.0, 0.0);
        for i in 0..(l - d) {
            up += a[(i, i + d)];
            lo += a[(i + d, i)];
        }
        row[d] = up / cnt;
        col[d] = lo / cnt;
    }
    col[0] = row[0];
    general_toeplitz(&row, &col)
}

/// Block-diagonal averaging onto block-Toeplitz, optionally followed by the
/// per-block Toeplitz projection (TBT).
fn block_raw(a: &CMatrix, p: usize, l: usize, tbt: bool) -> CMatrix {
    let m = p * l;
    let mut blocks: Vec<CMatrix> = Vec::with_capacity(p);
    for w in 0..p {
        let mut acc = CMatrix::zeros(l, l);
        for i in 0..(p - w) {
            acc += a.view((i * l, (i + w) * l), (l, l));
        }
        acc /= Complex64::new((p - w) as f64, 0.0);
        if tbt {
            acc = if w == 0 { toeplitz_herm_raw(&acc, l - 1) } else { toeplitz_general_raw(&acc) };
        } else if w == 0 {
            acc = HermMat::hermitian_part(&acc).into_matrix();
        }
        blocks.push(acc);
    }
    assemble_bt(&blocks, m, l)
}

fn assemble_bt(blocks: &[CMatrix], m: usize, l: usize) -> CMatrix {
    let p = blocks.len();
    let mut out = CMatrix::zeros(m, m);
    for w in 0..p {
        let adj = blocks[w].adjoint();
        for i in 0..(p - w) {
            out.view_mut((i * l, (i + w) * l), (l, l)).copy_from(&blocks[w]);
            if w > 0 {
                out.view_mut(((i + w) * l, i * l), (l, l)).copy_from(&adj);
            }
        }
    }
    out
}

/// Projection onto Hermitian Toeplitz matrices (diagonal averaging).
pub fn proj_toeplitz_herm(a: &HermMat) -> HermMat {
    HermMat::from_exact(toeplitz_herm_raw(a.matrix(), a.dim().saturating_sub(1)))
}

/// Replaces each of the `2l-1` diagonals of a square complex matrix by its
/// mean, without any Hermitian symmetrization.
pub fn proj_toeplitz_general(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("proj_toeplitz_general needs a square matrix".into()));
    }
    Ok(toeplitz_general_raw(a))
}

/// Projection onto banded Hermitian Toeplitz matrices of bandwidth `b`.
pub fn proj_banded(a: &HermMat, b: usize) -> Result<HermMat> {
    StructureSpec::banded(a.dim(), b)?.project(a)
}

pub fn proj_bt(a: &HermMat, p: usize, l: usize) -> Result<HermMat> {
    check_blocks(a.dim(), p, l)?;
    StructureSpec::block_toeplitz(p, l)?.project(a)
}

pub fn proj_tbt(a: &HermMat, p: usize, l: usize) -> Result<HermMat> {
    check_blocks(a.dim(), p, l)?;
    StructureSpec::tbt(p, l)?.project(a)
}

fn check_blocks(m: usize, p: usize, l: usize) -> Result<()> {
    if p * l != m {
        return Err(Error::InvalidStructure(format!("p*l = {} does not equal m = {m}", p * l)));
    }
    Ok(())
}

pub(crate) fn proj_psd_raw(a: &CMatrix) -> CMatrix {
    evd_raw(a).reconstruct_with(|l| l.max(0.0)).into_matrix()
}

/// Projection onto the PSD cone: `V max(Λ, 0) Vᴴ`.
pub fn proj_psd(a: &HermMat) -> HermMat {
    HermMat::from_exact(proj_psd_raw(a.matrix()))
}

/// Projection of an `(r+m)×(r+m)` matrix onto block-diagonal matrices whose
/// lower `m×m` block lies in `spec`: the upper block is kept, the coupling
/// blocks are zeroed.
pub fn proj_dtoep(psi: &HermMat, spec: &StructureSpec) -> Result<HermMat> {
    let m = spec.m();
    if psi.dim() < m {
        return Err(Error::Dimension(format!("matrix of size {} is smaller than structure size {m}", psi.dim())));
    }
    Ok(HermMat::from_exact(proj_dtoep_raw(psi.matrix(), psi.dim() - m, spec)))
}

pub(crate) fn proj_dtoep_raw(psi: &CMatrix, r: usize, spec: &StructureSpec) -> CMatrix {
    let n = psi.nrows();
    let m = n - r;
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((0, 0), (r, r)).copy_from(&psi.view((0, 0), (r, r)));
    let lower = project_raw(spec, &psi.view((r, r), (m, m)).into_owned());
    out.view_mut((r, r), (m, m)).copy_from(&lower);
    out
}

/// Projection onto `{E : E + D ⪰ 0}`, i.e. `P_psd(Ψ + D) − D`.
pub fn proj_lmi(psi: &HermMat, d: &HermMat) -> Result<HermMat> {
    if psi.dim() != d.dim() {
        return Err(Error::Dimension("proj_lmi operands differ in size".into()));
    }
    let (e, _) = proj_lmi_raw(psi.matrix(), d.matrix());
    Ok(HermMat::from_exact(e))
}

/// Returns the projection and the smallest eigenvalue of `Ψ + D` before clamping.
pub(crate) fn proj_lmi_raw(psi: &CMatrix, d: &CMatrix) -> (CMatrix, f64) {
    let shifted = psi + d;
    let e = evd_raw(&shifted);
    let lam_min = e.values.first().copied().unwrap_or(0.0);
    let p = e.reconstruct_with(|l| l.max(0.0)).into_matrix();
    (p - d, lam_min)
}

/// Real parameter vector of a structured covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaVec {
    spec: StructureSpec,
    values: Vec<f64>,
}

impl ThetaVec {
    pub fn new(spec: StructureSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.theta_len() {
            return Err(Error::Dimension(format!(
                "{} parameter vector needs {} values, got {}",
                spec.kind_name(),
                spec.theta_len(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &StructureSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn distance_sq(&self, other: &ThetaVec) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Hermitian Toeplitz matrix with first row `θ_1, θ_g + jθ_{g+m−1}`.
pub fn toeplitz_from_theta(t: &ThetaVec) -> Result<HermMat> {
    if !matches!(t.spec, StructureSpec::Toeplitz { .. }) {
        return Err(Error::InvalidStructure(format!("expected a Toeplitz parameter vector, got {}", t.spec.kind_name())));
    }
    Ok(matrix_from_theta(t))
}

/// Builds the structured matrix for any kind of parameter vector.
pub fn matrix_from_theta(t: &ThetaVec) -> HermMat {
    let v = &t.values;
    let m = match t.spec {
        StructureSpec::Toeplitz { m } => hermitian_toeplitz(&toeplitz_row(v, m, m - 1)),
        StructureSpec::BandedToeplitz { m, b } => hermitian_toeplitz(&toeplitz_row(v, m, b)),
        StructureSpec::Tbt { p, l } => {
            let mut blocks = vec![hermitian_toeplitz(&toeplitz_row(&v[..2 * l - 1], l, l - 1))];
            for w in 1..p {
                let c = &v[2 * l - 1 + (w - 1) * (4 * l - 2)..2 * l - 1 + w * (4 * l - 2)];
                let row: Vec<Complex64> = (0..l).map(|g| c64(c[g], c[l + g])).collect();
                let mut col = vec![row[0]];
                col.extend((1..l).map(|g| c64(c[2 * l + g - 1], c[3 * l + g - 2])));
                blocks.push(general_toeplitz(&row, &col));
            }
            assemble_bt(&blocks, p * l, l)
        }
        StructureSpec::BlockToeplitz { p, l } => {
            let mut r0 = CMatrix::zeros(l, l);
            for i in 0..l {
                r0[(i, i)] = c64(v[i], 0.0);
            }
            let mut idx = l;
            for i in 0..l {
                for k in (i + 1)..l {
                    r0[(i, k)] = c64(v[idx], v[idx + 1]);
                    r0[(k, i)] = c64(v[idx], -v[idx + 1]);
                    idx += 2;
                }
            }
            let mut blocks = vec![r0];
            for _ in 1..p {
                let mut b = CMatrix::zeros(l, l);
                for i in 0..l {
                    for k in 0..l {
                        b[(i, k)] = c64(v[idx], v[idx + 1]);
                        idx += 2;
                    }
                }
                blocks.push(b);
            }
            assemble_bt(&blocks, p * l, l)
        }
    };
    HermMat::from_exact(m)
}

/// First row of a (banded) Hermitian Toeplitz matrix from `[r1, Re r2.., Im r2..]`.
fn toeplitz_row(v: &[f64], m: usize, band: usize) -> Vec<Complex64> {
    let mut row = vec![c64(0.0, 0.0); m];
    row[0] = c64(v[0], 0.0);
    for g in 1..=band {
        row[g] = c64(v[g], v[g + band]);
    }
    row
}

fn theta_of_toeplitz_row(a: &CMatrix, band: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * band + 1);
    out.push(a[(0, 0)].re);
    out.extend((1..=band).map(|g| a[(0, g)].re));
    out.extend((1..=band).map(|g| a[(0, g)].im));
    out
}

/// Reads the parameter vector of a matrix that lies in `spec` (checked to
/// within `1e-10` relative Frobenius distance).
pub fn theta_from_struct(r: &HermMat, spec: &StructureSpec) -> Result<ThetaVec> {
    spec.check_dim(r.dim())?;
    let dist = spec.distance(r)?;
    if dist > MEMBERSHIP_TOL * r.frobenius_norm().max(1.0) {
        return Err(Error::NotInStructure { kind: spec.kind_name().into(), distance: dist });
    }
    let a = r.matrix();
    let values = match *spec {
        StructureSpec::Toeplitz { m } => theta_of_toeplitz_row(a, m - 1),
        StructureSpec::BandedToeplitz { b, .. } => theta_of_toeplitz_row(a, b),
        StructureSpec::Tbt { p, l } => {
            let mut out = theta_of_toeplitz_row(&a.view((0, 0), (l, l)).into_owned(), l - 1);
            for w in 1..p {
                let blk = a.view((0, w * l), (l, l));
                out.extend((0..l).map(|g| blk[(0, g)].re));
                out.extend((0..l).map(|g| blk[(0, g)].im));
                out.extend((1..l).map(|g| blk[(g, 0)].re));
                out.extend((1..l).map(|g| blk[(g, 0)].im));
            }
            out
        }
        StructureSpec::BlockToeplitz { p, l } => {
            let mut out: Vec<f64> = (0..l).map(|i| a[(i, i)].re).collect();
            for i in 0..l {
                for k in (i + 1)..l {
                    out.push(a[(i, k)].re);
                    out.push(a[(i, k)].im);
                }
            }
            for w in 1..p {
                for i in 0..l {
                    for k in 0..l {
                        let z = a[(i, w * l + k)];
                        out.push(z.re);
                        out.push(z.im);
                    }
                }
            }
            out
        }
    };
    ThetaVec::new(*spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermlin::testutil::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn herm(rows: &[&[(f64, f64)]]) -> HermMat {
        let n = rows.len();
        HermMat::new(CMatrix::from_fn(n, n, |i, k| c64(rows[i][k].0, rows[i][k].1))).unwrap()
    }

    /// Least-squares fit of `a` over a real spanning set `basis`, solved from
    /// the normal equations.
    fn ls_fit(a: &CMatrix, basis: &[CMatrix]) -> CMatrix {
        let k = basis.len();
        let g = DMatrix::from_fn(k, k, |i, j| crate::hermlin::frob_inner(&basis[i], &basis[j]));
        let rhs = DVector::from_fn(k, |i, _| crate::hermlin::frob_inner(&basis[i], a));
        let coef = g.lu().solve(&rhs).unwrap();
        let mut out = CMatrix::zeros(a.nrows(), a.ncols());
        for (c, b) in coef.iter().zip(basis) {
            out += b * c64(*c, 0.0);
        }
        out
    }

    /// Real spanning set of a structure set: images of the unit θ vectors.
    fn theta_basis(spec: StructureSpec) -> Vec<CMatrix> {
        (0..spec.theta_len())
            .map(|i| {
                let mut v = vec![0.0; spec.theta_len()];
                v[i] = 1.0;
                matrix_from_theta(&ThetaVec::new(spec, v).unwrap()).into_matrix()
            })
            .collect()
    }

    #[test]
    fn spec_json_roundtrip_and_validation() {
        let s: StructureSpec = serde_json::from_str(r#"{"kind":"tbt","m":16,"p":4,"l":4}"#).unwrap();
        assert_eq!(s, StructureSpec::Tbt { p: 4, l: 4 });
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"kind":"tbt","m":16,"p":4,"l":4}"#);
        let s: StructureSpec = serde_json::from_str(r#"{"kind":"banded","m":15,"b":6}"#).unwrap();
        assert_eq!(s, StructureSpec::BandedToeplitz { m: 15, b: 6 });
        assert!(serde_json::from_str::<StructureSpec>(r#"{"kind":"tbt","m":15,"p":4,"l":4}"#).is_err());
        assert!(serde_json::from_str::<StructureSpec>(r#"{"kind":"banded","m":4,"b":4}"#).is_err());
        assert!(serde_json::from_str::<StructureSpec>(r#"{"kind":"toeplitz","m":4,"x":1}"#).is_err());
        assert!(serde_json::from_str::<StructureSpec>(r#"{"kind":"toeplitz","m":4,"b":1}"#).is_err());
    }

    #[test]
    fn theta_lengths() {
        assert_eq!(StructureSpec::toeplitz(6).unwrap().theta_len(), 11);
        assert_eq!(StructureSpec::banded(15, 6).unwrap().theta_len(), 13);
        assert_eq!(StructureSpec::tbt(4, 4).unwrap().theta_len(), 49);
    }

    #[test]
    fn toeplitz_from_theta_examples() {
        let spec = StructureSpec::toeplitz(4).unwrap();
        let mut v = vec![0.0; 7];
        v[0] = 1.0;
        assert_eq!(toeplitz_from_theta(&ThetaVec::new(spec, v).unwrap()).unwrap(), HermMat::identity(4));

        let spec = StructureSpec::toeplitz(2).unwrap();
        let r = toeplitz_from_theta(&ThetaVec::new(spec, vec![2.0, 1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(r, herm(&[&[(2.0, 0.0), (1.0, 0.5)], &[(1.0, -0.5), (2.0, 0.0)]]));
        assert!(ThetaVec::new(spec, vec![1.0]).is_err());
        let banded = ThetaVec::new(StructureSpec::banded(2, 0).unwrap(), vec![1.0]).unwrap();
        assert!(toeplitz_from_theta(&banded).is_err());
    }

    #[test]
    fn theta_roundtrip_all_kinds() {
        let mut rng = rng(4);
        for spec in [
            StructureSpec::toeplitz(5).unwrap(),
            StructureSpec::banded(6, 2).unwrap(),
            StructureSpec::block_toeplitz(3, 2).unwrap(),
            StructureSpec::tbt(3, 3).unwrap(),
        ] {
            let v: Vec<f64> = (0..spec.theta_len()).map(|_| rand::Rng::random::<f64>(&mut rng) - 0.5).collect();
            let t = ThetaVec::new(spec, v).unwrap();
            let r = matrix_from_theta(&t);
            assert_eq!(spec.project(&r).unwrap().max_abs_diff(&r) < 1e-15, true);
            assert_eq!(theta_from_struct(&r, &spec).unwrap(), t);
        }
    }

    #[test]
    fn theta_from_struct_rejects_outside() {
        let mut rng = rng(2);
        let a = random_herm(&mut rng, 4);
        assert!(matches!(
            theta_from_struct(&a, &StructureSpec::toeplitz(4).unwrap()),
            Err(Error::NotInStructure { .. })
        ));
    }

    #[test]
    fn toeplitz_projection_examples() {
        let a = herm(&[&[(1.0, 0.0), (2.0, 1.0)], &[(2.0, -1.0), (3.0, 0.0)]]);
        assert_eq!(proj_toeplitz_herm(&a), herm(&[&[(2.0, 0.0), (2.0, 1.0)], &[(2.0, -1.0), (2.0, 0.0)]]));
        let t = proj_toeplitz_herm(&random_herm(&mut rng(3), 5));
        assert_eq!(proj_toeplitz_herm(&t), t);
    }

    #[test]
    fn toeplitz_projection_matches_least_squares() {
        let mut rng = rng(17);
        let a = random_herm(&mut rng, 4);
        let oracle = ls_fit(a.matrix(), &theta_basis(StructureSpec::toeplitz(4).unwrap()));
        assert!((proj_toeplitz_herm(&a).matrix() - oracle).norm() < 1e-12);
    }

    #[test]
    fn general_toeplitz_projection() {
        let a = CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0), c64(4.0, 0.0)]);
        let p = proj_toeplitz_general(&a).unwrap();
        assert_eq!(p, CMatrix::from_row_slice(2, 2, &[c64(2.5, 0.0), c64(2.0, 0.0), c64(3.0, 0.0), c64(2.5, 0.0)]));
        assert_eq!(proj_toeplitz_general(&p).unwrap(), p);

        let mut rng = rng(9);
        let a = random_complex(&mut rng, 3, 3);
        let mut basis = Vec::new();
        for o in -2i32..=2 {
            let ind = CMatrix::from_fn(3, 3, |i, k| if k as i32 - i as i32 == o { c64(1.0, 0.0) } else { c64(0.0, 0.0) });
            basis.push(ind.clone());
            basis.push(ind * c64(0.0, 1.0));
        }
        let oracle = ls_fit(&a, &basis);
        assert!((proj_toeplitz_general(&a).unwrap() - oracle).norm() < 1e-12);
    }

    #[test]
    fn banded_projection_examples() {
        let mut rng = rng(12);
        let a = random_herm(&mut rng, 5);
        assert_eq!(proj_banded(&a, 4).unwrap(), proj_toeplitz_herm(&a));
        let d0 = proj_banded(&a, 0).unwrap();
        let mean = a.trace() / 5.0;
        assert!((&d0 - &HermMat::identity(5).scale(mean)).frobenius_norm() < 1e-15);
        // m=5, b=2: r1 r2 r3 on the first row, zeros at offsets 3 and 4
        let b2 = proj_banded(&a, 2).unwrap();
        for i in 0..5 {
            for k in 0..5 {
                let off = (i as i64 - k as i64).unsigned_abs() as usize;
                if off > 2 {
                    assert_eq!(b2.get(i, k), c64(0.0, 0.0));
                } else {
                    assert_eq!(b2.get(i, k), if k >= i { b2.get(0, off) } else { b2.get(0, off).conj() });
                }
            }
        }
        assert!(proj_banded(&a, 5).is_err());
    }

    #[test]
    fn bt_projection() {
        let mut rng = rng(31);
        let a = random_herm(&mut rng, 4);
        assert_eq!(proj_bt(&a, 1, 4).unwrap(), a);
        let p = proj_bt(&a, 2, 2).unwrap();
        assert_eq!(proj_bt(&p, 2, 2).unwrap(), p);
        let oracle = ls_fit(a.matrix(), &theta_basis(StructureSpec::block_toeplitz(2, 2).unwrap()));
        assert!((p.matrix() - oracle).norm() < 1e-12);
        assert!(proj_bt(&a, 3, 2).is_err());
    }

    #[test]
    fn tbt_projection() {
        let mut rng = rng(41);
        let a = random_herm(&mut rng, 6);
        let p = proj_tbt(&a, 3, 2).unwrap();
        assert!(proj_tbt(&p, 3, 2).unwrap().max_abs_diff(&p) < 1e-15);
        let oracle = ls_fit(a.matrix(), &theta_basis(StructureSpec::tbt(3, 2).unwrap()));
        assert!((p.matrix() - oracle).norm() < 1e-12);

        // Kronecker product of two Toeplitz factors is TBT.
        let t1 = proj_toeplitz_herm(&random_herm(&mut rng, 3));
        let t2 = proj_toeplitz_herm(&random_herm(&mut rng, 2));
        let k = HermMat::hermitian_part(&t1.matrix().kronecker(t2.matrix()));
        assert!(proj_tbt(&k, 3, 2).unwrap().max_abs_diff(&k) < 1e-15);
        assert!(proj_tbt(&a, 4, 2).is_err());
    }

    #[test]
    fn psd_projection() {
        let p = proj_psd(&HermMat::from_diagonal(&[2.0, -1.0]));
        assert!(p.max_abs_diff(&HermMat::from_diagonal(&[2.0, 0.0])) < 1e-15);
        let mut rng = rng(8);
        let s = random_psd(&mut rng, 4);
        assert!(proj_psd(&s).max_abs_diff(&s) < 1e-12);

        // nearest-point check against random PSD competitors
        let a = random_herm(&mut rng, 4);
        let pa = proj_psd(&a);
        let d = (&pa - &a).frobenius_norm();
        for _ in 0..50 {
            let c = random_psd(&mut rng, 4);
            assert!((&c - &a).frobenius_norm() >= d - 1e-12);
        }
        // eigen oracle: the distance equals the norm of the negative eigenvalues
        let neg: f64 = crate::hermlin::evd(&a).unwrap().values.iter().filter(|&&l| l < 0.0).map(|l| l * l).sum();
        assert!((d - neg.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dtoep_projection() {
        let spec = StructureSpec::toeplitz(3).unwrap();
        let mut rng = rng(13);
        let x = random_herm(&mut rng, 2);
        let t = proj_toeplitz_herm(&random_herm(&mut rng, 3));
        let feasible = crate::hermlin::BlockPair { x, r: t }.assemble();
        assert_eq!(proj_dtoep(&feasible, &spec).unwrap(), feasible);
        assert_eq!(proj_dtoep(&HermMat::zeros(5), &spec).unwrap(), HermMat::zeros(5));

        let a = random_herm(&mut rng, 5);
        let mut basis = Vec::new();
        for i in 0..2 {
            for k in i..2 {
                let mut re = CMatrix::zeros(5, 5);
                re[(i, k)] = c64(1.0, 0.0);
                re[(k, i)] = c64(1.0, 0.0);
                basis.push(re);
                if i != k {
                    let mut im = CMatrix::zeros(5, 5);
                    im[(i, k)] = c64(0.0, 1.0);
                    im[(k, i)] = c64(0.0, -1.0);
                    basis.push(im);
                }
            }
        }
        for g in theta_basis(spec) {
            let mut e = CMatrix::zeros(5, 5);
            e.view_mut((2, 2), (3, 3)).copy_from(&g);
            basis.push(e);
        }
        let oracle = ls_fit(a.matrix(), &basis);
        assert!((proj_dtoep(&a, &spec).unwrap().matrix() - oracle).norm() < 1e-12);
    }

    #[test]
    fn lmi_projection() {
        let mut rng = rng(77);
        let a = random_herm(&mut rng, 4);
        assert!(proj_lmi(&a, &HermMat::zeros(4)).unwrap().max_abs_diff(&proj_psd(&a)) < 1e-15);
        let d = random_herm(&mut rng, 4);
        let inside = &random_psd(&mut rng, 4) - &d;
        assert!(proj_lmi(&inside, &d).unwrap().max_abs_diff(&inside) < 1e-12);
        let e = proj_lmi(&a, &d).unwrap();
        assert!((&e + &d).min_eigenvalue() >= -1e-12);
        assert!(proj_lmi(&e, &d).unwrap().max_abs_diff(&e) < 1e-12);
    }

    fn specs_for(n: usize) -> Vec<StructureSpec> {
        let mut v = vec![StructureSpec::toeplitz(n).unwrap(), StructureSpec::banded(n, n / 3).unwrap()];
        if n % 2 == 0 {
            v.push(StructureSpec::block_toeplitz(n / 2, 2).unwrap());
            v.push(StructureSpec::tbt(n / 2, 2).unwrap());
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn subspace_projections_are_linear_self_adjoint_idempotent(seed in any::<u64>(), n in 2usize..7, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = rng(seed);
            let a = random_herm(&mut rng, n);
            let b = random_herm(&mut rng, n);
            for spec in specs_for(n) {
                let pa = spec.project(&a).unwrap();
                let pb = spec.project(&b).unwrap();
                prop_assert!(spec.project(&pa).unwrap().max_abs_diff(&pa) <= 1e-12);
                let lin = spec.project(&(&a.scale(alpha) + &b.scale(beta))).unwrap();
                prop_assert!(lin.max_abs_diff(&(&pa.scale(alpha) + &pb.scale(beta))) <= 1e-12);
                prop_assert!((pa.inner(&b) - a.inner(&pb)).abs() <= 1e-12);
                prop_assert!((&pa - &pb).frobenius_norm() <= (&a - &b).frobenius_norm() + 1e-12);
            }
        }

        #[test]
        fn psd_and_lmi_projections_are_nonexpansive(seed in any::<u64>(), n in 1usize..6) {
            let mut rng = rng(seed);
            let a = random_herm(&mut rng, n);
            let b = random_herm(&mut rng, n);
            let d = random_herm(&mut rng, n);
            let (pa, pb) = (proj_psd(&a), proj_psd(&b));
            prop_assert!((&pa - &pb).frobenius_norm() <= (&a - &b).frobenius_norm() + 1e-12);
            prop_assert!(proj_psd(&pa).max_abs_diff(&pa) <= 1e-12);
            let (la, lb) = (proj_lmi(&a, &d).unwrap(), proj_lmi(&b, &d).unwrap());
            prop_assert!((&la - &lb).frobenius_norm() <= (&a - &b).frobenius_norm() + 1e-12);
        }
    }
}
