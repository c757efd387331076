//! Dense complex Hermitian linear algebra, sample-covariance constructions and
//! the likelihood objectives shared by the estimators.
//!
//! All log-determinants are accumulated in the log domain (sum of logs of the
//! Cholesky pivots or of eigenvalues), never by forming a determinant.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used when validating Hermitian symmetry of user input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default relative rank cut for [`factor_data`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A dense complex Hermitian matrix.
///
/// The stored entries are *exactly* Hermitian (the lower triangle is the
/// conjugate of the upper one and the diagonal is real), so sums, differences
/// and real multiples of `HermMat`s stay exactly Hermitian as well.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMat(CMatrix);

impl HermMat {
    /// Validates `m` (square, finite, Hermitian to 1e-12 relative) and
    /// symmetrizes away the remaining rounding asymmetry.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
        let n = m.nrows();
        let mut asym = 0.0_f64;
        for i in 0..n {
            for k in i..n {
                asym = asym.max((m[(i, k)] - m[(k, i)].conj()).norm());
            }
        }
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::hermitian_part(&m))
    }

    /// `(A + Aᴴ)/2`, with an exactly real diagonal.
    pub fn hermitian_part(m: &CMatrix) -> Self {
        let n = m.nrows();
        debug_assert!(m.is_square());
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = c64(m[(i, i)].re, 0.0);
            for k in (i + 1)..n {
                let v = (m[(i, k)] + m[(k, i)].conj()) * 0.5;
                h[(i, k)] = v;
                h[(k, i)] = v.conj();
            }
        }
        HermMat(h)
    }

    /// Wraps a matrix the caller guarantees to be exactly Hermitian.
    pub(crate) fn from_exact(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        HermMat(m)
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| c64(x, 0.0)))
    }

    pub fn identity(m: usize) -> Self {
        HermMat(CMatrix::identity(m, m))
    }

    pub fn zeros(m: usize) -> Self {
        HermMat(CMatrix::zeros(m, m))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| c64(x, 0.0)));
        HermMat(CMatrix::from_diagonal(&v))
    }

    /// Rank-one matrix `v vᴴ`.
    pub fn outer(v: &DVector<Complex64>) -> Self {
        Self::hermitian_part(&(v * v.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        self.0[(i, k)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Real inner product `Re Tr(AᴴB)`.
    pub fn inner(&self, other: &HermMat) -> f64 {
        frob_inner(&self.0, &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        HermMat(&self.0 * c64(s, 0.0))
    }

    /// Adds `s·I`; keeps every Toeplitz-family structure intact.
    pub fn shift_diagonal(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)].re += s;
        }
        HermMat(m)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &HermMat) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        evd_values(&self.0).first().copied().unwrap_or(0.0)
    }
}

impl Add<&HermMat> for &HermMat {
    type Output = HermMat;
    fn add(self, rhs: &HermMat) -> HermMat {
        HermMat(&self.0 + &rhs.0)
    }
}

impl Sub<&HermMat> for &HermMat {
    type Output = HermMat;
    fn sub(self, rhs: &HermMat) -> HermMat {
        HermMat(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermMat {
    type Output = HermMat;
    fn mul(self, rhs: f64) -> HermMat {
        self.scale(rhs)
    }
}

impl Neg for &HermMat {
    type Output = HermMat;
    fn neg(self) -> HermMat {
        HermMat(-&self.0)
    }
}

/// Serialized as rows of `[re, im]` pairs.
impl Serialize for HermMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim())
            .map(|i| (0..self.dim()).map(|k| [self.0[(i, k)].re, self.0[(i, k)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix rows must all have length m"));
        }
        let m = CMatrix::from_fn(n, n, |i, k| c64(rows[i][k][0], rows[i][k][1]));
        HermMat::new(m).map_err(serde::de::Error::custom)
    }
}

/// `Re Tr(AᴴB)` for general complex matrices of equal shape.
pub fn frob_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Provenance of a snapshot set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seed {
    Value(u64),
    External,
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Seed::Value(v) => write!(f, "{v}"),
            Seed::External => f.write_str("external"),
        }
    }
}

impl std::str::FromStr for Seed {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "external" {
            return Ok(Seed::External);
        }
        s.parse::<u64>()
            .map(Seed::Value)
            .map_err(|_| Error::Parse(format!("invalid seed `{s}`")))
    }
}

/// `n` complex snapshots of dimension `m`, stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    data: CMatrix,
    seed: Seed,
}

impl SnapshotSet {
    pub fn new(data: CMatrix, seed: Seed) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::Dimension("snapshot set needs m >= 1 and n >= 1".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("snapshot entries".into()));
        }
        Ok(Self { data, seed })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }
}

/// Low-rank factor `Y` (m×r) with `Y Yᴴ` equal to the data covariance.
#[derive(Clone, Debug)]
pub struct DataFactor {
    y: CMatrix,
    tol: f64,
}

impl DataFactor {
    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn rank(&self) -> usize {
        self.y.ncols()
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `Y Yᴴ`.
    pub fn reconstruct(&self) -> HermMat {
        HermMat::hermitian_part(&(&self.y * self.y.adjoint()))
    }

    /// The (r+m)×(r+m) coupling matrix `[[0, Yᴴ], [Y, 0]]`.
    pub fn coupling(&self) -> HermMat {
        let (m, r) = (self.dim(), self.rank());
        let mut d = CMatrix::zeros(r + m, r + m);
        d.view_mut((r, 0), (m, r)).copy_from(&self.y);
        d.view_mut((0, r), (r, m)).copy_from(&self.y.adjoint());
        HermMat::from_exact(d)
    }
}

/// Block-diagonal pair `E = diag(X, R)`.
#[derive(Clone, Debug)]
pub struct BlockPair {
    pub x: HermMat,
    pub r: HermMat,
}

impl BlockPair {
    pub fn assemble(&self) -> HermMat {
        let (r, m) = (self.x.dim(), self.r.dim());
        let mut e = CMatrix::zeros(r + m, r + m);
        e.view_mut((0, 0), (r, r)).copy_from(self.x.matrix());
        e.view_mut((r, r), (m, m)).copy_from(self.r.matrix());
        HermMat::from_exact(e)
    }

    /// Splits the diagonal blocks of `e` with an upper block of size `r`.
    pub fn split(e: &HermMat, r: usize) -> Self {
        let n = e.dim();
        assert!(r <= n, "upper block larger than matrix");
        let m = n - r;
        Self {
            x: HermMat::from_exact(e.matrix().view((0, 0), (r, r)).into_owned()),
            r: HermMat::from_exact(e.matrix().view((r, r), (m, m)).into_owned()),
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Evd {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Evd {
    /// `V diag(f(λ)) Vᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermMat {
        let mut vd = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            vd.column_mut(j).scale_mut(s);
        }
        HermMat::hermitian_part(&(vd * self.vectors.adjoint()))
    }
}

fn sorted_evd(m: &CMatrix) -> Evd {
    let n = m.nrows();
    if n == 0 {
        return Evd { values: vec![], vectors: CMatrix::zeros(0, 0) };
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Evd { values, vectors }
}

/// EVD that never loops on non-finite input: such input yields NaN output.
pub(crate) fn evd_raw(m: &CMatrix) -> Evd {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        let n = m.nrows();
        return Evd { values: vec![f64::NAN; n], vectors: CMatrix::from_element(n, n, c64(f64::NAN, 0.0)) };
    }
    sorted_evd(m)
}

pub(crate) fn evd_values(m: &CMatrix) -> Vec<f64> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return vec![f64::NAN; m.nrows()];
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Hermitian eigen-decomposition with ascending eigenvalues and orthonormal
/// eigenvectors.
pub fn evd(h: &HermMat) -> Result<Evd> {
    if !h.is_finite() {
        return Err(Error::NonFinite("evd input".into()));
    }
    Ok(sorted_evd(h.matrix()))
}

/// Sample covariance matrix `(1/n) Σ y_k y_kᴴ`.
pub fn scm(samples: &SnapshotSet) -> Result<HermMat> {
    let y = samples.data();
    let n = samples.count() as f64;
    Ok(HermMat::hermitian_part(&((y * y.adjoint()) / c64(n, 0.0))))
}

/// Forward-backward average `½(S + J S* J)`; the result is exactly
/// persymmetric.
pub fn fb_average(s: &HermMat) -> HermMat {
    let m = s.dim();
    let a = s.matrix();
    let mut out = CMatrix::zeros(m, m);
    for i in 0..m {
        for k in 0..m {
            out[(i, k)] = (a[(i, k)] + a[(m - 1 - i, m - 1 - k)].conj()) * 0.5;
        }
    }
    HermMat::from_exact(out)
}

/// Exchange (anti-identity) matrix `J`.
pub fn exchange(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |i, k| if i + k + 1 == m { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
}

/// Factor `R_FB = Y Yᴴ` from the eigen-decomposition, keeping eigenvalues
/// above `tol·λ_max` in descending order.
pub fn factor_data(r_fb: &HermMat, tol: f64) -> Result<DataFactor> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be >= 0, got {tol}")));
    }
    let e = evd(r_fb)?;
    let m = r_fb.dim();
    let lam_max = e.values.last().copied().unwrap_or(0.0).max(0.0);
    let lam_min = e.values.first().copied().unwrap_or(0.0);
    // an all-zero matrix is PSD with rank 0; use an absolute floor for the check
    let scale = lam_max.max(f64::MIN_POSITIVE);
    if lam_min < -tol * scale {
        return Err(Error::NotPsd { min_eig: lam_min });
    }
    let keep: Vec<usize> = (0..m).rev().filter(|&j| e.values[j] > tol * lam_max && e.values[j] > 0.0).collect();
    let mut y = CMatrix::zeros(m, keep.len());
    for (c, &j) in keep.iter().enumerate() {
        let s = e.values[j].sqrt();
        y.set_column(c, &(e.vectors.column(j) * c64(s, 0.0)));
    }
    Ok(DataFactor { y, tol })
}

pub(crate) fn cholesky(r: &HermMat) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    if !r.is_finite() {
        return Err(Error::NonFinite("matrix passed to Cholesky".into()));
    }
    Cholesky::new(r.matrix().clone()).ok_or_else(|| Error::NotPositiveDefinite { min_eig: r.min_eigenvalue() })
}

/// `ln det R` for positive definite `R`.
pub fn log_det_pd(r: &HermMat) -> Result<f64> {
    let ch = cholesky(r)?;
    let l = ch.l_dirty();
    let ld: f64 = (0..r.dim()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
    if !ld.is_finite() {
        return Err(Error::NotPositiveDefinite { min_eig: r.min_eigenvalue() });
    }
    Ok(ld)
}

/// Inverse of a positive definite matrix.
pub fn inv_pd(r: &HermMat) -> Result<HermMat> {
    let ch = cholesky(r)?;
    Ok(HermMat::hermitian_part(&ch.inverse()))
}

/// `f(R) = Tr(R_FB R⁻¹) + ln det R`.
pub fn neg_log_likelihood(r: &HermMat, r_fb: &HermMat) -> Result<f64> {
    if r.dim() != r_fb.dim() {
        return Err(Error::Dimension(format!("R is {}x{}, R_FB is {}x{}", r.dim(), r.dim(), r_fb.dim(), r_fb.dim())));
    }
    let ch = cholesky(r)?;
    let l = ch.l_dirty();
    let logdet: f64 = (0..r.dim()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
    let sol = ch.solve(r_fb.matrix());
    let tr: f64 = (0..r.dim()).map(|i| sol[(i, i)].re).sum();
    let v = tr + logdet;
    if !v.is_finite() {
        return Err(Error::NotPositiveDefinite { min_eig: r.min_eigenvalue() });
    }
    Ok(v)
}

/// Snapshot form `(1/n) Σ y_kᴴ R⁻¹ y_k + ln det R`.
pub fn neg_log_likelihood_samples(r: &HermMat, samples: &SnapshotSet) -> Result<f64> {
    if r.dim() != samples.dim() {
        return Err(Error::Dimension(format!("R is {}x{}, snapshots have m={}", r.dim(), r.dim(), samples.dim())));
    }
    let ch = cholesky(r)?;
    let logdet = log_det_pd(r)?;
    let y = samples.data();
    let sol = ch.solve(y);
    let quad: f64 = y.iter().zip(sol.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    Ok(quad / samples.count() as f64 + logdet)
}

/// `Tr X + ln det R`.
pub fn surrogate_objective(p: &BlockPair) -> Result<f64> {
    Ok(p.x.trace() + log_det_pd(&p.r)?)
}

/// `Yᴴ R⁻¹ Y`: the smallest `X` making `[[X, Yᴴ], [Y, R]]` PSD.
pub fn concentrated_x(y: &DataFactor, r: &HermMat) -> Result<HermMat> {
    if y.dim() != r.dim() {
        return Err(Error::Dimension("data factor and R differ in dimension".into()));
    }
    let ch = cholesky(r)?;
    let sol = ch.solve(y.y());
    Ok(HermMat::hermitian_part(&(y.y().adjoint() * sol)))
}

/// Principal PSD square root.
pub fn sqrt_psd(r: &HermMat) -> Result<HermMat> {
    let e = evd(r)?;
    let scale = e.values.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let lam_min = e.values.first().copied().unwrap_or(0.0);
    if lam_min < -1e-10 * scale {
        return Err(Error::NotPsd { min_eig: lam_min });
    }
    Ok(e.reconstruct_with(|l| l.max(0.0).sqrt()))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_complex(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| c64(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
    }

    pub fn random_herm(rng: &mut impl Rng, n: usize) -> HermMat {
        HermMat::hermitian_part(&random_complex(rng, n, n))
    }

    pub fn random_psd(rng: &mut impl Rng, n: usize) -> HermMat {
        let a = random_complex(rng, n, n);
        HermMat::hermitian_part(&(&a * a.adjoint()))
    }
}
