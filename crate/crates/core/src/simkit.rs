//! Ground-truth generators, Gaussian snapshot sampling, Monte-Carlo MSE
//! benchmarking and the adaptive-beamforming SINR experiment.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom1::{atom1_from, Atom1Options};
use crate::atom2::{atom2_from, Atom2Options};
use crate::crb::crb_report;
use crate::error::{Error, Result};
use crate::hermlin::{c64, evd, fb_average, inv_pd, scm, sqrt_psd, CMatrix, HermMat, Seed, SnapshotSet};
use crate::mm::{data_factor, default_init, FitReport};
use crate::structsets::{proj_banded, proj_psd, theta_from_struct, StructureSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpectrumModel {
    pub m: usize,
    pub frequencies: Vec<f64>,
    pub powers: Vec<f64>,
    #[serde(default)]
    pub noise_floor: f64,
}

impl LineSpectrumModel {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("line-spectrum model needs m >= 1".into()));
        }
        if self.frequencies.len() != self.powers.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frequencies but {} powers",
                self.frequencies.len(),
                self.powers.len()
            )));
        }
        if self.powers.iter().any(|&p| !(p >= 0.0)) || !(self.noise_floor >= 0.0) {
            return Err(Error::InvalidArgument("powers and noise floor must be nonnegative".into()));
        }
        if self.frequencies.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("frequencies".into()));
        }
        Ok(())
    }
}

/// `Σ p_i a(ω_i) a(ω_i)ᴴ + σ² I` with `[a(ω)]_q = e^{j q ω}`, built from its
/// first row so that the result is exactly Toeplitz.
pub fn cov_line_spectrum(model: &LineSpectrumModel) -> Result<HermMat> {
    model.validate()?;
    let m = model.m;
    let mut row = vec![c64(0.0, 0.0); m];
    for (&w, &p) in model.frequencies.iter().zip(&model.powers) {
        for (g, slot) in row.iter_mut().enumerate() {
            *slot += Complex64::from_polar(p, -(g as f64) * w);
        }
    }
    row[0] = c64(row[0].re + model.noise_floor, 0.0);
    Ok(HermMat::hermitian_part(&CMatrix::from_fn(m, m, |i, k| if k >= i { row[k - i] } else { row[i - k].conj() })))
}

/// `T₁ ⊗ T₁` for a Hermitian Toeplitz factor.
pub fn cov_kron_tbt(t1: &HermMat) -> Result<HermMat> {
    let spec = StructureSpec::toeplitz(t1.dim())?;
    if spec.distance(t1)? > 1e-12 * t1.frobenius_norm().max(1.0) {
        return Err(Error::NotInStructure { kind: "toeplitz".into(), distance: spec.distance(t1)? });
    }
    Ok(HermMat::hermitian_part(&t1.matrix().kronecker(t1.matrix())))
}

/// Random banded Toeplitz covariance: a random Hermitian matrix alternately
/// projected onto the banded and PSD sets, then `+ noise_floor·I`.
pub fn cov_banded_random(m: usize, b: usize, noise_floor: f64, seed: u64) -> Result<HermMat> {
    StructureSpec::banded(m, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(m, m, |_, _| complex_normal(&mut rng));
    let mut a = HermMat::hermitian_part(&g);
    for _ in 0..500 {
        let next = proj_psd(&proj_banded(&a, b)?);
        let done = (&next - &a).frobenius_norm() <= 1e-12 * next.frobenius_norm().max(1.0);
        a = next;
        if done {
            break;
        }
    }
    let t = proj_banded(&a, b)?;
    let lam = t.min_eigenvalue();
    Ok(t.shift_diagonal((-lam).max(0.0) + noise_floor))
}

fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    c64(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// `n` snapshots `R^{1/2} n_k` with `n_k` circular complex Gaussian of unit
/// mean-square entries.
pub fn sample_snapshots(r: &HermMat, n: usize, seed: u64) -> Result<SnapshotSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("snapshot count must be positive".into()));
    }
    let w = sqrt_psd(r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = CMatrix::from_fn(r.dim(), n, |_, _| complex_normal(&mut rng));
    SnapshotSet::new(w.matrix() * noise, Seed::Value(seed))
}

/// Seed of trial `trial` at grid point `idx`, derived from one base seed.
pub fn trial_seed(base: u64, idx: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((idx as u64) << 32) | trial as u64);
    rng.next_u64()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    /// Returns the true covariance.
    Oracle,
    Scm,
    Fb,
    Atom1,
    Atom2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    pub kind: MethodKind,
    /// Structure fitted by ATOM2; defaults to the experiment's structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<StructureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
}

/// One covariance estimate.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub r: HermMat,
    pub report: Option<FitReport>,
    /// The estimate is not positive definite.
    pub singular: bool,
}

impl Method {
    pub fn new(kind: MethodKind) -> Self {
        Self { kind, fit: None, label: None, gamma0: None }
    }

    pub fn fitting(kind: MethodKind, spec: StructureSpec) -> Self {
        Self { fit: Some(spec), ..Self::new(kind) }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let base = match self.kind {
            MethodKind::Oracle => "oracle",
            MethodKind::Scm => "scm",
            MethodKind::Fb => "fb",
            MethodKind::Atom1 => "atom1",
            MethodKind::Atom2 => "atom2",
        };
        match self.fit {
            Some(s) => format!("{base}-{}", s.kind_name()),
            None => base.to_string(),
        }
    }

    pub fn estimate(&self, samples: &SnapshotSet, default_spec: &StructureSpec, truth: Option<&HermMat>, seed: u64) -> Result<Estimate> {
        let m = samples.dim();
        let spec = self.fit.unwrap_or(*default_spec);
        spec.check_dim(m)?;
        let direct = |r: HermMat| {
            let singular = r.min_eigenvalue() <= 0.0;
            Ok(Estimate { r, report: None, singular })
        };
        match self.kind {
            MethodKind::Oracle => {
                let t = truth.ok_or_else(|| Error::InvalidArgument("oracle method needs the true covariance".into()))?;
                direct(t.clone())
            }
            MethodKind::Scm => direct(scm(samples)?),
            MethodKind::Fb => direct(fb_average(&scm(samples)?)),
            MethodKind::Atom1 => {
                let spec = match self.fit {
                    None => StructureSpec::toeplitz(m)?,
                    Some(s @ StructureSpec::Toeplitz { .. }) => s,
                    Some(s) => return Err(Error::Unsupported(format!("atom1 fits Toeplitz only, not {}", s.kind_name()))),
                };
                let y = data_factor(samples, &spec)?;
                let init = default_init(&y, &spec)?;
                let rep = atom1_from(&y, &Atom1Options { seed, ..Default::default() }, init)?;
                Ok(Estimate { r: rep.r_hat.clone(), report: Some(rep), singular: false })
            }
            MethodKind::Atom2 => {
                let mut opts = Atom2Options { seed, ..Atom2Options::with_spec(spec) };
                if let Some(g) = self.gamma0 {
                    opts.gamma0 = g;
                }
                let y = data_factor(samples, &spec)?;
                let init = default_init(&y, &spec)?;
                let rep = atom2_from(&y, &opts, init)?;
                Ok(Estimate { r: rep.r_hat.clone(), report: Some(rep), singular: false })
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseConfig {
    pub truth: HermMat,
    pub spec: StructureSpec,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub with_crb: bool,
}

fn yes() -> bool {
    true
}

/// Monte-Carlo MSE table. All numeric fields are a deterministic function of
/// the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub methods: Vec<String>,
    pub n_grid: Vec<usize>,
    /// `mse[method][n]`, averaged over successful trials.
    pub mse: Vec<Vec<f64>>,
    pub crb: Option<Vec<f64>>,
    pub failures: Vec<Vec<usize>>,
    pub trials: usize,
    pub seed: u64,
}

/// Mean wall time per fit, kept apart from [`BenchResult`] so that the
/// latter stays reproducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchTiming {
    pub methods: Vec<String>,
    pub n_grid: Vec<usize>,
    pub mean_secs: Vec<Vec<f64>>,
}

pub fn mse_benchmark(cfg: &MseConfig) -> Result<(BenchResult, BenchTiming)> {
    if cfg.methods.is_empty() || cfg.n_grid.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("benchmark needs methods, a non-empty n grid and trials >= 1".into()));
    }
    if cfg.n_grid.contains(&0) {
        return Err(Error::InvalidArgument("sample counts must be positive".into()));
    }
    let theta_true = theta_from_struct(&cfg.truth, &cfg.spec)?;
    if cfg.truth.min_eigenvalue() <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: cfg.truth.min_eigenvalue() });
    }
    let crb = if cfg.with_crb {
        Some(cfg.n_grid.iter().map(|&n| crb_report(&cfg.truth, &cfg.spec, n).map(|c| c.crb)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let k = cfg.methods.len();
    let mut mse = vec![vec![0.0; cfg.n_grid.len()]; k];
    let mut failures = vec![vec![0; cfg.n_grid.len()]; k];
    let mut secs = vec![vec![0.0; cfg.n_grid.len()]; k];
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let per_trial: Vec<Vec<(Option<f64>, f64)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(cfg.seed, ni, trial);
                let samples = match sample_snapshots(&cfg.truth, n, seed) {
                    Ok(s) => s,
                    Err(_) => return vec![(None, 0.0); k],
                };
                cfg.methods
                    .iter()
                    .map(|meth| {
                        let t0 = Instant::now();
                        let err = meth
                            .estimate(&samples, &cfg.spec, Some(&cfg.truth), seed)
                            .and_then(|e| theta_from_struct(&cfg.spec.project(&e.r)?, &cfg.spec))
                            .map(|th| th.distance_sq(&theta_true));
                        (err.ok(), t0.elapsed().as_secs_f64())
                    })
                    .collect()
            })
            .collect();
        for j in 0..k {
            let mut sum = 0.0;
            let mut ok = 0usize;
            let mut tsum = 0.0;
            for row in &per_trial {
                tsum += row[j].1;
                match row[j].0 {
                    Some(e) => {
                        sum += e;
                        ok += 1;
                    }
                    None => failures[j][ni] += 1,
                }
            }
            mse[j][ni] = if ok > 0 { sum / ok as f64 } else { f64::NAN };
            secs[j][ni] = tsum / cfg.trials as f64;
        }
    }
    let labels: Vec<String> = cfg.methods.iter().map(Method::label).collect();
    Ok((
        BenchResult { methods: labels.clone(), n_grid: cfg.n_grid.clone(), mse, crb, failures, trials: cfg.trials, seed: cfg.seed },
        BenchTiming { methods: labels, n_grid: cfg.n_grid.clone(), mean_secs: secs },
    ))
}

/// Unit-norm uniform-linear-array steering vector toward `phi_deg`.
pub fn steering(phi_deg: f64, m: usize, d: f64) -> DVector<Complex64> {
    let phase = 2.0 * PI * d * phi_deg.to_radians().sin();
    let s = 1.0 / (m as f64).sqrt();
    DVector::from_fn(m, |q, _| Complex64::from_polar(s, q as f64 * phase))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerScenario {
    pub m: usize,
    #[serde(default = "half")]
    pub spacing: f64,
    pub angles_deg: Vec<f64>,
    pub powers_db: Vec<f64>,
    #[serde(default)]
    pub white_db: f64,
}

fn half() -> f64 {
    0.5
}

fn check_angle(a: f64) -> Result<()> {
    if !(a > -90.0 && a < 90.0) {
        return Err(Error::InvalidArgument(format!("angle {a} deg outside (-90, 90)")));
    }
    Ok(())
}

impl JammerScenario {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidArgument("jammer scenario needs m >= 2".into()));
        }
        if self.angles_deg.len() != self.powers_db.len() {
            return Err(Error::InvalidArgument("jammer angles and powers differ in length".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidArgument("element spacing must be positive".into()));
        }
        self.angles_deg.iter().try_for_each(|&a| check_angle(a))
    }
}

/// `Σ σ_l² s(φ_l) s(φ_l)ᴴ + σ_a² I` with powers given in dB.
pub fn jammer_cov(sc: &JammerScenario) -> Result<HermMat> {
    sc.validate()?;
    let mut r = CMatrix::identity(sc.m, sc.m) * c64(db_to_lin(sc.white_db), 0.0);
    for (&a, &p) in sc.angles_deg.iter().zip(&sc.powers_db) {
        let s = steering(a, sc.m, sc.spacing);
        r += &s * s.adjoint() * c64(db_to_lin(p), 0.0);
    }
    Ok(HermMat::hermitian_part(&r))
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `|wᴴs|² / (wᴴ R w)`.
pub fn sinr(w: &DVector<Complex64>, s: &DVector<Complex64>, r: &HermMat) -> f64 {
    let num = w.dotc(s).norm_sqr();
    let den = w.dotc(&(r.matrix() * w)).re;
    num / den
}

/// `s(θ)ᴴ R⁻¹ s(θ)`.
pub fn sinr_opt(r: &HermMat, s: &DVector<Complex64>) -> Result<f64> {
    let ri = inv_pd(r)?;
    Ok(s.dotc(&(ri.matrix() * s)).re)
}

/// `points` equally spaced cell midpoints strictly inside (−90°, 90°).
pub fn default_theta_grid(points: usize) -> Vec<f64> {
    let step = 180.0 / points as f64;
    (0..points).map(|i| -90.0 + (i as f64 + 0.5) * step).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrConfig {
    pub scenario: JammerScenario,
    pub methods: Vec<Method>,
    pub n: usize,
    pub trials: usize,
    #[serde(default = "grid500")]
    pub theta_deg: Vec<f64>,
    pub seed: u64,
}

fn grid500() -> Vec<f64> {
    default_theta_grid(500)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrRow {
    pub method: String,
    /// False when the method is not applicable (SMI with `n <= m`).
    pub available: bool,
    /// Average SINR per angle (linear scale).
    pub sinr: Vec<f64>,
    /// Trials whose estimate needed an eigenvalue floor.
    pub floored: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrTable {
    pub theta_deg: Vec<f64>,
    pub optimum: Vec<f64>,
    pub rows: Vec<SinrRow>,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Average SINR of `R̂⁻¹ s(θ)` beamformers over `trials` snapshot sets.
pub fn sinr_experiment(cfg: &SinrConfig) -> Result<SinrTable> {
    cfg.scenario.validate()?;
    if cfg.trials == 0 || cfg.n == 0 {
        return Err(Error::InvalidArgument("SINR experiment needs n >= 1 and trials >= 1".into()));
    }
    if cfg.theta_deg.is_empty() {
        return Err(Error::InvalidArgument("empty angle grid".into()));
    }
    cfg.theta_deg.iter().try_for_each(|&a| check_angle(a))?;
    let m = cfg.scenario.m;
    let r = jammer_cov(&cfg.scenario)?;
    let spec = StructureSpec::toeplitz(m)?;
    let steer: Vec<DVector<Complex64>> = cfg.theta_deg.iter().map(|&t| steering(t, m, cfg.scenario.spacing)).collect();
    let optimum = steer.iter().map(|s| sinr_opt(&r, s)).collect::<Result<Vec<_>>>()?;
    let usable: Vec<bool> = cfg.methods.iter().map(|meth| !(meth.kind == MethodKind::Scm && cfg.n <= m)).collect();

    let per_trial: Vec<Vec<Option<(Vec<f64>, bool)>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(cfg.seed, 0, trial);
            let samples = sample_snapshots(&r, cfg.n, seed).ok();
            cfg.methods
                .iter()
                .zip(&usable)
                .map(|(meth, &ok)| {
                    if !ok {
                        return None;
                    }
                    let est = meth.estimate(samples.as_ref()?, &spec, Some(&r), seed).ok()?;
                    let (rh, floored) = floor_eigenvalues(&est.r).ok()?;
                    let ri = inv_pd(&rh).ok()?;
                    let vals = steer.iter().map(|s| sinr(&(ri.matrix() * s), s, &r)).collect();
                    Some((vals, floored))
                })
                .collect()
        })
        .collect();

    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, meth)| {
            let mut acc = vec![0.0; steer.len()];
            let (mut ok, mut floored, mut failures) = (0usize, 0usize, 0usize);
            for row in &per_trial {
                match &row[j] {
                    Some((v, fl)) => {
                        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                        ok += 1;
                        floored += *fl as usize;
                    }
                    None if usable[j] => failures += 1,
                    None => {}
                }
            }
            let sinr = if usable[j] && ok > 0 { acc.iter().map(|a| a / ok as f64).collect() } else { vec![f64::NAN; steer.len()] };
            SinrRow { method: meth.label(), available: usable[j], sinr, floored, failures }
        })
        .collect();
    Ok(SinrTable { theta_deg: cfg.theta_deg.clone(), optimum, rows, n: cfg.n, trials: cfg.trials, seed: cfg.seed })
}

/// Raises eigenvalues below `1e-10·λ_max` to that floor.
fn floor_eigenvalues(r: &HermMat) -> Result<(HermMat, bool)> {
    let e = evd(r)?;
    let hi = e.values.last().copied().unwrap_or(0.0);
    if !(hi > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eig: hi });
    }
    let floor = 1e-10 * hi;
    if e.values[0] > floor {
        return Ok((r.clone(), false));
    }
    Ok((e.reconstruct_with(|l| l.max(floor)), true))
}

/// Standard experiment setups.
pub mod presets {
    use super::*;

    pub const POWERS_M6: [f64; 6] = [3.0, 6.0, 4.0, 1.0, 7.0, 5.0];
    pub const FREQS_M6_ON_GRID: [f64; 6] = [0.5712, 1.1424, 2.2848, 3.4272, 3.9984, 5.7120];
    pub const FREQS_M6_OFF_GRID: [f64; 6] = [0.5, 1.1424, 2.2848, 3.4272, 5.3, 5.7120];
    pub const FREQS_M15_ON_GRID: [f64; 15] = [
        0.2167, 0.6500, 1.0833, 1.3, 1.5166, 1.9500, 2.3833, 2.8166, 3.2499, 3.6832, 4.1166, 4.5499, 4.9832, 5.4165, 5.8499,
    ];
    pub const FREQS_M15_OFF_GRID: [f64; 15] = [
        0.2167, 0.6500, 1.0833, 1.25, 1.5166, 1.9500, 2.3833, 3.01, 3.2499, 3.6832, 4.1166, 4.5499, 5.20, 5.4165, 5.8,
    ];
    pub const TBT_FREQS: [f64; 4] = [0.6, 1.4, 3.2, 5.1];
    pub const TBT_POWERS: [f64; 4] = [3.0, 6.0, 4.0, 1.0];

    /// The m=6 convergence setup (noise-free line spectrum).
    pub fn m6(off_grid: bool) -> LineSpectrumModel {
        let f = if off_grid { FREQS_M6_OFF_GRID } else { FREQS_M6_ON_GRID };
        LineSpectrumModel { m: 6, frequencies: f.to_vec(), powers: POWERS_M6.to_vec(), noise_floor: 0.0 }
    }

    /// The m=15 MSE setup, powers 1..=15, plus unit noise.
    pub fn m15(off_grid: bool) -> LineSpectrumModel {
        let f = if off_grid { FREQS_M15_OFF_GRID } else { FREQS_M15_ON_GRID };
        LineSpectrumModel { m: 15, frequencies: f.to_vec(), powers: (1..=15).map(f64::from).collect(), noise_floor: 1.0 }
    }

    /// Same source layout as [`m6`] on the Fourier grid of size `2m−1`, plus
    /// unit noise, for arbitrary `m >= 6`.
    pub fn on_grid(m: usize) -> LineSpectrumModel {
        let l = (2 * m - 1) as f64;
        let freqs = [1.0, 2.0, 4.0, 6.0, 7.0, 10.0].iter().map(|k| 2.0 * PI * k / l).collect();
        LineSpectrumModel { m, frequencies: freqs, powers: POWERS_M6.to_vec(), noise_floor: 1.0 }
    }

    /// Three equal-power sources, two on the Fourier grid of size `2m−1` and
    /// one uniform on `[0, 2π)`, plus unit noise.
    pub fn random_three_source(m: usize, rng: &mut impl Rng) -> LineSpectrumModel {
        let l = 2 * m - 1;
        let k1 = rng.random_range(0..l);
        let mut k2 = rng.random_range(0..l - 1);
        if k2 >= k1 {
            k2 += 1;
        }
        let grid = |k: usize| 2.0 * PI * k as f64 / l as f64;
        let freqs = vec![grid(k1), grid(k2), rng.random::<f64>() * 2.0 * PI];
        LineSpectrumModel { m, frequencies: freqs, powers: vec![5.0; 3], noise_floor: 1.0 }
    }

    /// Noise-free 4×4 Toeplitz factor of the TBT experiment; four distinct
    /// frequencies make it positive definite.
    pub fn tbt_factor() -> LineSpectrumModel {
        LineSpectrumModel { m: 4, frequencies: TBT_FREQS.to_vec(), powers: TBT_POWERS.to_vec(), noise_floor: 0.0 }
    }

    /// Two jammers, 30 and 20 dB, at 9.8° and −8.8°, six half-wavelength elements.
    pub fn two_jammers() -> JammerScenario {
        JammerScenario { m: 6, spacing: 0.5, angles_deg: vec![9.8, -8.8], powers_db: vec![30.0, 20.0], white_db: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structsets::{proj_tbt, proj_toeplitz_herm};

    #[test]
    fn line_spectrum_cases() {
        let r = cov_line_spectrum(&LineSpectrumModel { m: 3, frequencies: vec![0.0], powers: vec![1.0], noise_floor: 0.0 })
            .unwrap();
        assert!(r.max_abs_diff(&HermMat::from_exact(CMatrix::from_element(3, 3, c64(1.0, 0.0)))) < 1e-15);

        let r = cov_line_spectrum(&presets::m6(false)).unwrap();
        assert!(proj_toeplitz_herm(&r).max_abs_diff(&r) <= 1e-12);
        assert!((0..6).all(|i| (r.get(i, i).re - 26.0).abs() < 1e-12));

        // against the explicit sum of outer products
        let model = presets::m6(true);
        let mut want = CMatrix::zeros(6, 6);
        for (&w, &p) in model.frequencies.iter().zip(&model.powers) {
            let a = DVector::from_fn(6, |q, _| Complex64::from_polar(1.0, q as f64 * w));
            want += &a * a.adjoint() * c64(p, 0.0);
        }
        assert!((cov_line_spectrum(&model).unwrap().matrix() - want).norm() < 1e-12);
        assert!(cov_line_spectrum(&LineSpectrumModel { m: 3, frequencies: vec![0.0], powers: vec![], noise_floor: 0.0 })
            .is_err());
    }

    #[test]
    fn kron_cases() {
        assert_eq!(cov_kron_tbt(&HermMat::identity(2)).unwrap(), HermMat::identity(4));
        let t = HermMat::new(CMatrix::from_row_slice(2, 2, &[c64(2.0, 0.0), c64(0.0, 1.0), c64(0.0, -1.0), c64(2.0, 0.0)]))
            .unwrap();
        let k = cov_kron_tbt(&t).unwrap();
        assert_eq!(k.get(0, 0), c64(4.0, 0.0));
        assert_eq!(k.get(0, 3), c64(-1.0, 0.0));
        assert_eq!(k.get(0, 1), c64(0.0, 2.0));
        assert_eq!(k.get(1, 2), c64(1.0, 0.0));
        let t1 = cov_line_spectrum(&presets::tbt_factor()).unwrap();
        let k = cov_kron_tbt(&t1).unwrap();
        assert!(proj_tbt(&k, 4, 4).unwrap().max_abs_diff(&k) <= 1e-14 * k.frobenius_norm());
    }

    #[test]
    fn snapshots_cases() {
        let z = sample_snapshots(&HermMat::zeros(3), 4, 1).unwrap();
        assert!(z.data().iter().all(|v| *v == c64(0.0, 0.0)));
        let a = sample_snapshots(&HermMat::identity(3), 10, 5).unwrap();
        let b = sample_snapshots(&HermMat::identity(3), 10, 5).unwrap();
        assert_eq!(a, b);
        let big = sample_snapshots(&HermMat::identity(3), 100_000, 9).unwrap();
        let s = scm(&big).unwrap();
        assert!((&s - &HermMat::identity(3)).frobenius_norm() < 0.05);
    }

    #[test]
    fn banded_truth_is_banded_and_pd() {
        let r = cov_banded_random(10, 3, 1.0, 4).unwrap();
        assert!(proj_banded(&r, 3).unwrap().max_abs_diff(&r) <= 1e-15 * r.frobenius_norm());
        assert!(r.min_eigenvalue() >= 1.0 - 1e-9);
    }

    #[test]
    fn steering_cases() {
        let s = steering(0.0, 4, 0.5);
        assert!(s.iter().all(|z| (z - c64(0.5, 0.0)).norm() < 1e-15));
        for phi in [-71.0, 3.3, 45.0] {
            assert!((steering(phi, 7, 0.5).norm() - 1.0).abs() < 1e-14);
        }
        let s = steering(90.0, 4, 0.5);
        for (q, z) in s.iter().enumerate() {
            let want = if q % 2 == 0 { 0.5 } else { -0.5 };
            assert!((z - c64(want, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn jammer_cases() {
        let sc = JammerScenario { m: 4, spacing: 0.5, angles_deg: vec![], powers_db: vec![], white_db: 0.0 };
        assert_eq!(jammer_cov(&sc).unwrap(), HermMat::identity(4));
        let sc = JammerScenario { angles_deg: vec![20.0], powers_db: vec![30.0], ..sc };
        let ev = evd(&jammer_cov(&sc).unwrap()).unwrap().values;
        assert!((ev[3] - 1001.0).abs() < 1e-9);
        assert!(ev[..3].iter().all(|l| (l - 1.0).abs() < 1e-9));
        let r = jammer_cov(&presets::two_jammers()).unwrap();
        assert!(r.min_eigenvalue() > 0.0);
        let bad = JammerScenario { angles_deg: vec![90.0], ..sc };
        assert!(jammer_cov(&bad).is_err());
    }

    #[test]
    fn oracle_beamformer_is_optimal() {
        let cfg = SinrConfig {
            scenario: presets::two_jammers(),
            methods: vec![Method::new(MethodKind::Oracle), Method::new(MethodKind::Scm)],
            n: 6,
            trials: 2,
            theta_deg: vec![-30.0, 0.0, 12.0],
            seed: 3,
        };
        let t = sinr_experiment(&cfg).unwrap();
        for (o, v) in t.optimum.iter().zip(&t.rows[0].sinr) {
            assert!((o - v).abs() <= 1e-12 * o);
        }
        assert!(!t.rows[1].available);
        let bad = SinrConfig { theta_deg: vec![-90.0], ..cfg };
        assert!(sinr_experiment(&bad).is_err());
    }

    #[test]
    fn theta_grid_is_open_interval() {
        let g = default_theta_grid(500);
        assert_eq!(g.len(), 500);
        assert!(g[0] > -90.0 && g[499] < 90.0);
    }

    #[test]
    fn oracle_bench_is_zero_and_deterministic() {
        let truth = cov_line_spectrum(&presets::on_grid(6)).unwrap();
        let cfg = MseConfig {
            truth,
            spec: StructureSpec::toeplitz(6).unwrap(),
            methods: vec![Method::new(MethodKind::Oracle), Method::new(MethodKind::Fb)],
            n_grid: vec![20, 80],
            trials: 8,
            seed: 11,
            with_crb: true,
        };
        let (a, _) = mse_benchmark(&cfg).unwrap();
        let (b, _) = mse_benchmark(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.mse[0].iter().all(|&e| e < 1e-28));
        assert!(a.mse[1][1] < a.mse[1][0]);
        assert!(a.crb.as_ref().unwrap()[1] < a.crb.as_ref().unwrap()[0]);
    }

    #[test]
    fn trial_seeds_differ() {
        let s: std::collections::HashSet<u64> =
            (0..3).flat_map(|i| (0..50).map(move |t| trial_seed(7, i, t))).collect();
        assert_eq!(s.len(), 150);
    }
}
