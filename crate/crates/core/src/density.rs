//! Gaussian conditional densities over one prediction block.
//!
//! Covariance parameters are carried as the raw network outputs; the
//! positivity transforms (clamped `exp`) are applied here, so gradients
//! returned by [`nll_grads`] are with respect to those raw values.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw log-scale outputs are clamped to this range before `exp`.
pub const LOG_SCALE_CLAMP: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Fixed unit covariance.
    Identity,
    /// Learned per-coordinate variances.
    #[default]
    #[serde(alias = "diag")]
    Diagonal,
    /// Learned precision `L Lᵀ` with lower-triangular `L`.
    Full,
}

impl CovarianceMode {
    /// Raw covariance outputs per block of size `block`.
    pub fn params_per_block(self, block: usize) -> usize {
        match self {
            CovarianceMode::Identity => 0,
            CovarianceMode::Diagonal => block,
            CovarianceMode::Full => block * (block + 1) / 2,
        }
    }
}

impl std::str::FromStr for CovarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(CovarianceMode::Identity),
            "diag" | "diagonal" => Ok(CovarianceMode::Diagonal),
            "full" => Ok(CovarianceMode::Full),
            other => Err(Error::Config(format!("unknown covariance mode {other:?}"))),
        }
    }
}

/// Index of `L[row][col]` (`col <= row`) in the packed row-major lower triangle.
#[inline]
pub fn tri_index(row: usize, col: usize) -> usize {
    row * (row + 1) / 2 + col
}

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance<T> {
    Identity,
    /// Raw log-variances, one per coordinate.
    Diagonal(Vec<T>),
    /// Packed lower triangle of the precision Cholesky factor; diagonal
    /// entries are raw log-values.
    Full(Vec<T>),
}

/// Mean and covariance parameters of one block's conditional Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams<T> {
    pub mean: Vec<T>,
    pub cov: Covariance<T>,
}

/// Borrowed form of [`GaussianParams`], used on hot paths.
#[derive(Clone, Copy, Debug)]
pub struct GaussianView<'a, T> {
    pub mode: CovarianceMode,
    pub mean: &'a [T],
    pub cov: &'a [T],
}

impl<T: Scalar> GaussianParams<T> {
    pub fn identity(mean: Vec<T>) -> Self {
        Self {
            mean,
            cov: Covariance::Identity,
        }
    }

    pub fn diagonal(mean: Vec<T>, log_var: Vec<T>) -> Result<Self> {
        if log_var.len() != mean.len() {
            return Err(Error::shape("log-variances", mean.len(), log_var.len()));
        }
        Ok(Self {
            mean,
            cov: Covariance::Diagonal(log_var),
        })
    }

    pub fn full(mean: Vec<T>, cholesky: Vec<T>) -> Result<Self> {
        let need = CovarianceMode::Full.params_per_block(mean.len());
        if cholesky.len() != need {
            return Err(Error::shape("cholesky entries", need, cholesky.len()));
        }
        Ok(Self {
            mean,
            cov: Covariance::Full(cholesky),
        })
    }

    pub fn block_size(&self) -> usize {
        self.mean.len()
    }

    pub fn mode(&self) -> CovarianceMode {
        match self.cov {
            Covariance::Identity => CovarianceMode::Identity,
            Covariance::Diagonal(_) => CovarianceMode::Diagonal,
            Covariance::Full(_) => CovarianceMode::Full,
        }
    }

    pub fn view(&self) -> GaussianView<'_, T> {
        let cov: &[T] = match &self.cov {
            Covariance::Identity => &[],
            Covariance::Diagonal(v) | Covariance::Full(v) => v,
        };
        GaussianView {
            mode: self.mode(),
            mean: &self.mean,
            cov,
        }
    }
}

impl<'a, T: Scalar> GaussianView<'a, T> {
    pub fn to_owned(&self) -> GaussianParams<T> {
        let cov = match self.mode {
            CovarianceMode::Identity => Covariance::Identity,
            CovarianceMode::Diagonal => Covariance::Diagonal(self.cov.to_vec()),
            CovarianceMode::Full => Covariance::Full(self.cov.to_vec()),
        };
        GaussianParams {
            mean: self.mean.to_vec(),
            cov,
        }
    }

    /// Dense lower-triangular precision factor (full mode), row-major `B x B`.
    pub fn cholesky_factor(&self) -> Vec<T> {
        let b = self.mean.len();
        let mut l = vec![T::zero(); b * b];
        for r in 0..b {
            for c in 0..=r {
                let raw = self.cov[tri_index(r, c)];
                l[r * b + c] = if r == c { log_scale(raw).exp() } else { raw };
            }
        }
        l
    }
}

#[inline]
fn log_scale<T: Scalar>(raw: T) -> T {
    let bound = T::of(LOG_SCALE_CLAMP);
    raw.max(-bound).min(bound)
}

/// Derivative of the clamp: 1 inside the admissible range, 0 outside.
#[inline]
fn log_scale_slope<T: Scalar>(raw: T) -> T {
    let bound = T::of(LOG_SCALE_CLAMP);
    if raw >= -bound && raw <= bound {
        T::one()
    } else {
        T::zero()
    }
}

fn check<T: Scalar>(x: &[T], p: &GaussianView<'_, T>) -> Result<()> {
    if x.len() != p.mean.len() {
        return Err(Error::shape("observation", p.mean.len(), x.len()));
    }
    let need = p.mode.params_per_block(p.mean.len());
    if p.cov.len() != need {
        return Err(Error::shape("covariance parameters", need, p.cov.len()));
    }
    let finite = x
        .iter()
        .chain(p.mean)
        .chain(p.cov)
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numeric("non-finite observation or parameter".into()));
    }
    Ok(())
}

/// Per-coordinate quadratic contributions; they sum to the Mahalanobis
/// distance. For full mode entry `c` is `(Lᵀ d)_c²`, which couples only
/// coordinates `>= c`.
fn quadratic_terms<T: Scalar>(x: &[T], p: &GaussianView<'_, T>, out: &mut Vec<T>) {
    let b = x.len();
    out.clear();
    match p.mode {
        CovarianceMode::Identity => {
            out.extend(x.iter().zip(p.mean).map(|(&xi, &mi)| (xi - mi) * (xi - mi)));
        }
        CovarianceMode::Diagonal => {
            out.extend((0..b).map(|d| {
                let r = x[d] - p.mean[d];
                r * r / log_scale(p.cov[d]).exp()
            }));
        }
        CovarianceMode::Full => {
            for c in 0..b {
                let mut v = T::zero();
                for r in c..b {
                    let l = if r == c {
                        log_scale(p.cov[tri_index(r, r)]).exp()
                    } else {
                        p.cov[tri_index(r, c)]
                    };
                    v += l * (x[r] - p.mean[r]);
                }
                out.push(v * v);
            }
        }
    }
}

/// Per-coordinate share of `ln det Σ`.
fn log_det_term<T: Scalar>(p: &GaussianView<'_, T>, d: usize) -> T {
    match p.mode {
        CovarianceMode::Identity => T::zero(),
        CovarianceMode::Diagonal => log_scale(p.cov[d]),
        CovarianceMode::Full => -T::of(2.0) * log_scale(p.cov[tri_index(d, d)]),
    }
}

/// `(x - μ)ᵀ Σ⁻¹ (x - μ)`.
pub fn mahalanobis<T: Scalar>(x: &[T], p: GaussianView<'_, T>) -> Result<T> {
    check(x, &p)?;
    let mut terms = Vec::with_capacity(x.len());
    quadratic_terms(x, &p, &mut terms);
    Ok(terms.into_iter().sum())
}

/// `ln det Σ`; for full mode this is `-2 Σ ln L_dd`.
pub fn log_det_cov<T: Scalar>(p: GaussianView<'_, T>) -> T {
    (0..p.mean.len()).map(|d| log_det_term(&p, d)).sum()
}

/// Training objective term: Mahalanobis distance plus `ln det Σ`.
pub fn nll_term<T: Scalar>(x: &[T], p: GaussianView<'_, T>) -> Result<T> {
    Ok(mahalanobis(x, p)? + log_det_cov(p))
}

/// Exact `ln N(x | μ, Σ)`.
pub fn log_density<T: Scalar>(x: &[T], p: GaussianView<'_, T>) -> Result<T> {
    let b = T::of(x.len() as f64);
    let half = T::of(0.5);
    Ok(-half * b * T::of(TAU.ln()) - half * log_det_cov(p) - half * mahalanobis(x, p)?)
}

/// Per-coordinate decomposition of [`log_density`].
///
/// Entry `d` is the log of the conditional density of coordinate `d`
/// given the coordinates after it in the block (the marginal for diagonal
/// and identity covariance), so the entries from index `k` onward sum to
/// the log marginal density of `x[k..]`.
pub fn log_density_terms<T: Scalar>(x: &[T], p: GaussianView<'_, T>) -> Result<Vec<T>> {
    check(x, &p)?;
    let half = T::of(0.5);
    let c = half * T::of(TAU.ln());
    let mut q = Vec::with_capacity(x.len());
    quadratic_terms(x, &p, &mut q);
    Ok(q
        .into_iter()
        .enumerate()
        .map(|(d, qd)| -c - half * log_det_term(&p, d) - half * qd)
        .collect())
}

/// Gradients of [`nll_term`] with respect to the mean and the raw covariance
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<T> {
    pub mean: Vec<T>,
    pub cov: Vec<T>,
}

pub fn nll_grads<T: Scalar>(x: &[T], p: GaussianView<'_, T>) -> Result<ParamGrads<T>> {
    check(x, &p)?;
    let mut mean = vec![T::zero(); x.len()];
    let mut cov = vec![T::zero(); p.cov.len()];
    nll_with_grads_unchecked(x, &p, &mut mean, &mut cov);
    Ok(ParamGrads { mean, cov })
}

/// Writes the gradients into `d_mean` / `d_cov` and returns the term value.
/// Shapes are the caller's responsibility.
pub(crate) fn nll_with_grads_unchecked<T: Scalar>(
    x: &[T],
    p: &GaussianView<'_, T>,
    d_mean: &mut [T],
    d_cov: &mut [T],
) -> T {
    let b = x.len();
    let two = T::of(2.0);
    match p.mode {
        CovarianceMode::Identity => {
            let mut total = T::zero();
            for d in 0..b {
                let r = x[d] - p.mean[d];
                total += r * r;
                d_mean[d] = -two * r;
            }
            total
        }
        CovarianceMode::Diagonal => {
            let mut total = T::zero();
            for d in 0..b {
                let r = x[d] - p.mean[d];
                let lv = log_scale(p.cov[d]);
                let inv = (-lv).exp();
                total += r * r * inv + lv;
                d_mean[d] = -two * r * inv;
                d_cov[d] = log_scale_slope(p.cov[d]) * (T::one() - r * r * inv);
            }
            total
        }
        CovarianceMode::Full => {
            // v = Lᵀ r, nll = |v|² - 2 Σ ln L_dd.
            let r: Vec<T> = (0..b).map(|d| x[d] - p.mean[d]).collect();
            let entry = |row: usize, col: usize| {
                let raw = p.cov[tri_index(row, col)];
                if row == col {
                    log_scale(raw).exp()
                } else {
                    raw
                }
            };
            let mut v = vec![T::zero(); b];
            for (c, vc) in v.iter_mut().enumerate() {
                for (row, &rr) in r.iter().enumerate().skip(c) {
                    *vc += entry(row, c) * rr;
                }
            }
            let mut total = T::zero();
            for c in 0..b {
                total += v[c] * v[c] - two * log_scale(p.cov[tri_index(c, c)]);
            }
            // d|v|²/dr = 2 L v; the mean enters with a minus sign.
            for row in 0..b {
                let mut lv = T::zero();
                for (c, &vc) in v.iter().enumerate().take(row + 1) {
                    lv += entry(row, c) * vc;
                }
                d_mean[row] = -two * lv;
            }
            for row in 0..b {
                for c in 0..=row {
                    let k = tri_index(row, c);
                    let g = two * v[c] * r[row];
                    d_cov[k] = if row == c {
                        log_scale_slope(p.cov[k]) * (g * entry(row, row) - two)
                    } else {
                        g
                    };
                }
            }
            total
        }
    }
}
