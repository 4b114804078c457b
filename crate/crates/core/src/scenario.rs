//! Seeded test instances: multivariate normal and Student-t returns under two
//! random covariance families.
//!
//! All randomness comes from ChaCha20 (`rand_chacha`) seeded with
//! `seed_from_u64`, which is specified bit-for-bit across platforms. Each seed
//! feeds separate ChaCha streams: stream 0 carries the Gaussian draws
//! (`n` per scenario, row by row), stream 1 the chi-square mixing draws of the
//! t family, stream 2 the covariance entries. A t instance therefore shares
//! its Gaussian component with the normal instance of the same seed.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ValidationError};
use crate::model::ScenarioSet;

const STREAM_NORMAL: u64 = 0;
const STREAM_CHI2: u64 = 1;
const STREAM_COV: u64 = 2;

/// Ridge added to the `M M^T` covariance family.
pub const COV2_RIDGE: f64 = 1e-10;

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    /// Uniform off-diagonals, diagonal set for strict diagonal dominance.
    Cov1,
    /// `M M^T` with uniform `M`.
    Cov2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub kind: CovKind,
    pub n: usize,
    pub seed: u64,
}

impl CovarianceSpec {
    pub fn generate(&self) -> DMatrix<f64> {
        match self.kind {
            CovKind::Cov1 => gen_cov1(self.n, self.seed),
            CovKind::Cov2 => gen_cov2(self.n, self.seed),
        }
    }
}

/// Symmetric matrix with off-diagonal entries drawn from `U[0, 1]` and
/// `d_ii = sum_{j != i} d_ij + u_i`, `u_i` from `U(0, 1]`.
pub fn gen_cov1(n: usize, seed: u64) -> DMatrix<f64> {
    assert!(n >= 1, "dimension must be positive");
    let mut rng = rng_for(seed, STREAM_COV);
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random();
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    for i in 0..n {
        let off: f64 = c.row(i).iter().sum();
        c[(i, i)] = off + (1.0 - rng.random::<f64>());
    }
    c
}

/// `M M^T + 1e-10 I` with the entries of `M` drawn from `U[0, 1]`.
pub fn gen_cov2(n: usize, seed: u64) -> DMatrix<f64> {
    assert!(n >= 1, "dimension must be positive");
    let mut rng = rng_for(seed, STREAM_COV);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    let mut c = &m * m.transpose();
    for i in 0..n {
        c[(i, i)] += COV2_RIDGE;
    }
    // Exact symmetry regardless of the product's rounding.
    let ct = c.transpose();
    (c + ct) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub family: Family,
    /// Degrees of freedom of the t family.
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Mean vector; zero when absent.
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
}

fn default_nu() -> f64 {
    5.0
}

impl DistributionSpec {
    pub fn normal() -> Self {
        Self {
            family: Family::Normal,
            nu: default_nu(),
            mean: None,
        }
    }

    pub fn student_t(nu: f64) -> Self {
        Self {
            family: Family::StudentT,
            nu,
            mean: None,
        }
    }
}

/// Lower Cholesky factor, or an error for a matrix that is not positive
/// definite.
fn cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>, ValidationError> {
    if !cov.is_square() {
        return Err(ValidationError::Domain(format!(
            "covariance is {:?}, not square",
            cov.shape()
        )));
    }
    Cholesky::new(cov.clone())
        .map(|c| c.l())
        .ok_or_else(|| ValidationError::Domain("covariance is not positive definite".into()))
}

fn check_mean(mean: &[f64], n: usize) -> Result<(), ValidationError> {
    if mean.len() == n {
        Ok(())
    } else {
        Err(ValidationError::DimensionMismatch {
            expected: n,
            found: mean.len(),
        })
    }
}

/// Correlated Gaussian parts `L z`, row major.
fn gaussian_rows(l: &DMatrix<f64>, big_n: usize, seed: u64) -> Vec<f64> {
    let n = l.nrows();
    let mut rng = rng_for(seed, STREAM_NORMAL);
    let mut out = Vec::with_capacity(n * big_n);
    let mut z = DVector::zeros(n);
    for _ in 0..big_n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        out.extend((l * &z).iter());
    }
    out
}

/// `N` draws of `mean + L z`, `L L^T = cov`, with equal probabilities.
pub fn sample_mvn(mean: &[f64], cov: &DMatrix<f64>, big_n: usize, seed: u64) -> Result<ScenarioSet> {
    let l = cholesky(cov)?;
    check_mean(mean, l.nrows())?;
    let mut rows = gaussian_rows(&l, big_n, seed);
    for (k, v) in rows.iter_mut().enumerate() {
        *v += mean[k % mean.len()];
    }
    Ok(ScenarioSet::from_row_major(rows, mean.len(), None)?)
}

/// `N` draws of `mean + L z / sqrt(g / nu)` with `g ~ chi2(nu)`; `L z` is the
/// Gaussian part of [`sample_mvn`] with the same seed.
pub fn sample_mvt(mean: &[f64], cov: &DMatrix<f64>, nu: f64, big_n: usize, seed: u64) -> Result<ScenarioSet> {
    if !(nu > 2.0 && nu.is_finite()) {
        return Err(ValidationError::Domain(format!("degrees of freedom must exceed 2, got {nu}")).into());
    }
    let l = cholesky(cov)?;
    let n = l.nrows();
    check_mean(mean, n)?;
    let chi2 = ChiSquared::new(nu).expect("nu is positive");
    let mut rng = rng_for(seed, STREAM_CHI2);
    let mut rows = gaussian_rows(&l, big_n, seed);
    for row in rows.chunks_mut(n) {
        let g: f64 = chi2.sample(&mut rng);
        let scale = (nu / g).sqrt();
        for (v, m) in row.iter_mut().zip(mean) {
            *v = m + *v * scale;
        }
    }
    Ok(ScenarioSet::from_row_major(rows, n, None)?)
}

/// Everything that determines one generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub cov: CovarianceSpec,
    pub dist: DistributionSpec,
    pub n_scenarios: usize,
    pub seed: u64,
}

impl InstanceSpec {
    /// Normal or t instance; the covariance reuses the sampling seed.
    pub fn new(kind: CovKind, family: Family, n: usize, n_scenarios: usize, seed: u64) -> Self {
        Self {
            cov: CovarianceSpec { kind, n, seed },
            dist: match family {
                Family::Normal => DistributionSpec::normal(),
                Family::StudentT => DistributionSpec::student_t(default_nu()),
            },
            n_scenarios,
            seed,
        }
    }

    pub fn generate(&self) -> Result<ScenarioSet> {
        if self.cov.n == 0 || self.n_scenarios == 0 {
            return Err(ValidationError::EmptyMatrix.into());
        }
        let cov = self.cov.generate();
        let zero = vec![0.0; self.cov.n];
        let mean = self.dist.mean.as_deref().unwrap_or(&zero);
        match self.dist.family {
            Family::Normal => sample_mvn(mean, &cov, self.n_scenarios, self.seed),
            Family::StudentT => sample_mvt(mean, &cov, self.dist.nu, self.n_scenarios, self.seed),
        }
    }

    /// Writes the scenario CSV and a `<csv>.json` sidecar holding this spec.
    pub fn write_with_sidecar(&self, set: &ScenarioSet, csv_path: &Path) -> Result<()> {
        set.save_csv(csv_path)?;
        let mut sidecar = csv_path.as_os_str().to_owned();
        sidecar.push(".json");
        std::fs::write(sidecar, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
