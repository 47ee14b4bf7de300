//! Boltzmann entropy vectors, observer-level Fisher matrices and the
//! Cramér–Rao ordering.
//!
//! Each observer `B_j` sees a microstate count `W_j(θ)` and an entropy
//! `S_j = k log W_j(θ)`. The Jacobian `J_{j,h} = ∂ log W_j / ∂θ_h` does not depend
//! on `k`, and the observer-level Fisher matrix is `F = JᵀJ` (unnormalised sum
//! over observers). [`score_fisher_oracle`] is the distribution-level Fisher
//! information `E[∂log ρ ∂log ρᵀ]`, computed by quadrature, and is kept separate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphogenetic::DEFAULT_FD_STEP;

type CountFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
struct Microstate {
    label: String,
    count: Arc<CountFn>,
    grad_log: Option<Arc<GradFn>>,
}

/// Microstate counts `W_j(θ)`, one per observer.
#[derive(Clone)]
pub struct MicrostateFamily {
    params: usize,
    members: Vec<Microstate>,
    fd_step: f64,
}

impl fmt::Debug for MicrostateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MicrostateFamily")
            .field("params", &self.params)
            .field("labels", &self.labels())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl MicrostateFamily {
    pub fn new(params: usize) -> Self {
        Self { params, members: Vec::new(), fd_step: DEFAULT_FD_STEP }
    }

    /// Adds an observer whose log-derivatives are taken by central differences.
    pub fn with_member<F>(mut self, label: impl Into<String>, count: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.members.push(Microstate { label: label.into(), count: Arc::new(count), grad_log: None });
        self
    }

    /// Adds an observer with an analytic gradient of `log W`.
    pub fn with_analytic_member<F, G>(mut self, label: impl Into<String>, count: F, grad_log: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.members.push(Microstate {
            label: label.into(),
            count: Arc::new(count),
            grad_log: Some(Arc::new(grad_log)),
        });
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    /// Same family with every analytic gradient dropped.
    pub fn finite_difference(&self) -> Self {
        let members = self
            .members
            .iter()
            .map(|m| Microstate { grad_log: None, ..m.clone() })
            .collect();
        Self { members, ..self.clone() }
    }

    /// Equilibrium bridge `ρ_j = 1/W_j`: observer `j` sits at `x_j` and counts
    /// `W_j(θ) = 1/ρ(x_j; θ)`.
    pub fn from_distribution(dist: ParametricDistribution, points: &[f64]) -> Self {
        let mut fam = Self::new(dist.n_params());
        for (j, &x) in points.iter().enumerate() {
            fam = fam.with_analytic_member(
                format!("B{}@{}", j + 1, x),
                move |th| 1.0 / dist.density(x, th),
                move |th| dist.score(x, th).into_iter().map(|s| -s).collect(),
            );
        }
        fam
    }

    /// One-parameter observer from tabulated `(θ, W)` pairs, interpolated
    /// linearly in `log W`. Nodes must be strictly increasing and `W > 0`.
    pub fn with_tabulated(self, label: impl Into<String>, nodes: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if self.params != 1 {
            return Err(Error::InvalidParameter("tabulated W needs a one-parameter family".into()));
        }
        if nodes.len() < 2 || nodes.len() != counts.len() {
            return Err(Error::InvalidParameter("tabulated W needs ≥ 2 matching nodes and values".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("tabulated nodes must be strictly increasing".into()));
        }
        if let Some(index) = counts.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::NonPositiveMicrostates { index, value: counts[index] });
        }
        let logs: Vec<f64> = counts.iter().map(|w| w.ln()).collect();
        Ok(self.with_member(label, move |th| {
            let t = th[0];
            let k = match nodes.partition_point(|n| *n <= t) {
                0 => 0,
                k if k >= nodes.len() => nodes.len() - 2,
                k => k - 1,
            };
            let s = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
            (logs[k] + s * (logs[k + 1] - logs[k])).exp()
        }))
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn observers(&self) -> usize {
        self.members.len()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.label.as_str()).collect()
    }

    /// At least as many observers as parameters.
    pub fn can_be_full_rank(&self) -> bool {
        self.members.len() >= self.params
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params {
            return Err(Error::DimensionMismatch(format!(
                "family has {} parameters, θ has {}",
                self.params,
                theta.len()
            )));
        }
        if self.members.is_empty() {
            return Err(Error::InvalidParameter("family has no observers".into()));
        }
        Ok(())
    }

    fn log_count(&self, j: usize, theta: &[f64]) -> Result<f64> {
        let w = (self.members[j].count)(theta);
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::NonPositiveMicrostates { index: j, value: w });
        }
        Ok(w.ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyVector {
    pub s: Vec<f64>,
    pub k: f64,
    pub labels: Vec<String>,
}

/// `S_j = k log W_j(θ)`.
pub fn entropy_vector(fam: &MicrostateFamily, theta: &[f64], k: f64) -> Result<EntropyVector> {
    fam.check_theta(theta)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("Boltzmann constant must be positive, got {k}")));
    }
    let s = (0..fam.observers())
        .map(|j| fam.log_count(j, theta).map(|l| k * l))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntropyVector { s, k, labels: fam.labels().into_iter().map(String::from).collect() })
}

/// `J_{j,h} = ∂ log W_j / ∂θ_h` as an `observers × params` matrix.
///
/// Returned as a plain matrix: constant families legitimately give `J = 0`.
/// Wrap it in a [`RectJacobian`](crate::RectJacobian) when full column rank is needed.
pub fn entropy_jacobian(fam: &MicrostateFamily, theta: &[f64]) -> Result<DMatrix<f64>> {
    fam.check_theta(theta)?;
    let p = fam.params();
    let mut jac = DMatrix::zeros(fam.observers(), p);
    for (j, member) in fam.members.iter().enumerate() {
        fam.log_count(j, theta)?;
        let row = match &member.grad_log {
            Some(g) => {
                let row = g(theta);
                if row.len() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "analytic gradient of observer {j} has {} entries, expected {p}",
                        row.len()
                    )));
                }
                row
            }
            None => {
                if !(fam.fd_step > 0.0 && fam.fd_step.is_finite()) {
                    return Err(Error::FdStepInvalid(fam.fd_step));
                }
                let mut row = Vec::with_capacity(p);
                for h in 0..p {
                    let step = fam.fd_step * theta[h].abs().max(1.0);
                    let mut up = theta.to_vec();
                    let mut down = theta.to_vec();
                    up[h] += step;
                    down[h] -= step;
                    row.push((fam.log_count(j, &up)? - fam.log_count(j, &down)?) / (2.0 * step));
                }
                row
            }
        };
        for (h, v) in row.into_iter().enumerate() {
            jac[(j, h)] = v;
        }
    }
    Ok(jac)
}

/// Symmetric positive semidefinite `p×p` Fisher matrix at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub f: DMatrix<f64>,
    pub theta: Vec<f64>,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.f.clone()).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().min()
    }

    /// `min eig ≥ −1e-12·‖F‖`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-12 * self.f.amax().max(f64::MIN_POSITIVE)
    }

    pub fn is_symmetric(&self) -> bool {
        self.f == self.f.transpose()
    }

    /// Fisher information of `n` independent draws.
    pub fn scaled(&self, n: f64) -> Self {
        Self { f: &self.f * n, theta: self.theta.clone() }
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let eig = self.eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition < 1e12) {
            return Err(Error::SingularFisher { condition });
        }
        let inv = self.f.clone().cholesky().ok_or(Error::SingularFisher { condition })?.inverse();
        Ok(symmetrize(&inv))
    }
}

fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.ncols();
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = a.column(i).dot(&a.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `F = JᵀJ` with `J` from [`entropy_jacobian`]; `F_{h,k} = Σ_j ∂_h log W_j ∂_k log W_j`.
pub fn fisher_matrix(fam: &MicrostateFamily, theta: &[f64]) -> Result<FisherMatrix> {
    let jac = entropy_jacobian(fam, theta)?;
    Ok(FisherMatrix { f: gram(&jac), theta: theta.to_vec() })
}

/// Built-in one-dimensional parametric densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParametricDistribution {
    /// θ = (μ, σ)
    Gaussian,
    /// θ = (λ), density λ e^{−λx} on x ≥ 0
    Exponential,
    /// θ = (a, b), density 1/(b − a) on [a, b]
    Uniform,
    /// θ = (x₀); degenerate, sampling only
    PointMass,
}

impl ParametricDistribution {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(Self::Gaussian),
            "exponential" => Ok(Self::Exponential),
            "uniform" => Ok(Self::Uniform),
            "point-mass" => Ok(Self::PointMass),
            other => Err(Error::InvalidParameter(format!("unknown distribution `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Exponential => "exponential",
            Self::Uniform => "uniform",
            Self::PointMass => "point-mass",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Self::Gaussian | Self::Uniform => 2,
            Self::Exponential | Self::PointMass => 1,
        }
    }

    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} takes {} parameters, got {}",
                self.name(),
                self.n_params(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        let ok = match self {
            Self::Gaussian => theta[1] > 0.0,
            Self::Exponential => theta[0] > 0.0,
            Self::Uniform => theta[1] > theta[0],
            Self::PointMass => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{} parameters {theta:?} out of range", self.name())))
        }
    }

    pub fn density(&self, x: f64, theta: &[f64]) -> f64 {
        match self {
            Self::Gaussian => {
                let z = (x - theta[0]) / theta[1];
                (-0.5 * z * z).exp() / (theta[1] * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Exponential => {
                if x < 0.0 {
                    0.0
                } else {
                    theta[0] * (-theta[0] * x).exp()
                }
            }
            Self::Uniform => {
                if x < theta[0] || x > theta[1] {
                    0.0
                } else {
                    1.0 / (theta[1] - theta[0])
                }
            }
            Self::PointMass => {
                if x == theta[0] {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `∂ log ρ(x; θ) / ∂θ`.
    pub fn score(&self, x: f64, theta: &[f64]) -> Vec<f64> {
        match self {
            Self::Gaussian => {
                let (mu, sigma) = (theta[0], theta[1]);
                let d = x - mu;
                vec![d / (sigma * sigma), -1.0 / sigma + d * d / sigma.powi(3)]
            }
            Self::Exponential => vec![1.0 / theta[0] - x],
            Self::Uniform => {
                let w = theta[1] - theta[0];
                vec![1.0 / w, -1.0 / w]
            }
            Self::PointMass => vec![0.0],
        }
    }

    /// Quadrature support: ±10σ for the Gaussian, `[0, 50/λ]` for the exponential.
    pub fn support(&self, theta: &[f64]) -> (f64, f64) {
        match self {
            Self::Gaussian => (theta[0] - 10.0 * theta[1], theta[0] + 10.0 * theta[1]),
            Self::Exponential => (0.0, 50.0 / theta[0]),
            Self::Uniform => (theta[0], theta[1]),
            Self::PointMass => (theta[0], theta[0]),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => Normal::new(theta[0], theta[1]).expect("validated σ > 0").sample(rng),
            Self::Exponential => Exp::new(theta[0]).expect("validated λ > 0").sample(rng),
            Self::Uniform => theta[0] + (theta[1] - theta[0]) * rng.random::<f64>(),
            Self::PointMass => theta[0],
        }
    }
}

const QUADRATURE_INTERVALS: usize = 4096;
const QUADRATURE_REFINEMENTS: usize = 4;
const QUADRATURE_RTOL: f64 = 1e-6;

/// Composite Simpson integral of every component of `f` on `[lo, hi]`.
fn simpson_vec(f: &dyn Fn(f64) -> Vec<f64>, lo: f64, hi: f64, intervals: usize, width: usize) -> Vec<f64> {
    let h = (hi - lo) / intervals as f64;
    let mut acc = vec![0.0; width];
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for (a, v) in acc.iter_mut().zip(f(lo + i as f64 * h)) {
            *a += w * v;
        }
    }
    acc.iter().map(|a| a * h / 3.0).collect()
}

/// Distribution-level Fisher information `∫ ρ ∂log ρ ∂log ρᵀ dx` by composite
/// Simpson quadrature, refined until successive grids agree to 1e-6 relative.
pub fn score_fisher_oracle(dist: ParametricDistribution, theta: &[f64]) -> Result<FisherMatrix> {
    dist.validate(theta)?;
    if dist == ParametricDistribution::PointMass {
        return Err(Error::InvalidParameter("point mass has no density".into()));
    }
    let p = dist.n_params();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|h| (h..p).map(move |k| (h, k))).collect();
    let width = pairs.len() + 1;
    let integrand = |x: f64| -> Vec<f64> {
        let rho = dist.density(x, theta);
        let s = dist.score(x, theta);
        let mut out: Vec<f64> = pairs.iter().map(|&(h, k)| rho * s[h] * s[k]).collect();
        out.push(rho);
        out
    };
    let (lo, hi) = dist.support(theta);
    let mut intervals = QUADRATURE_INTERVALS;
    let mut coarse = simpson_vec(&integrand, lo, hi, intervals, width);
    let mut change = f64::INFINITY;
    for _ in 0..QUADRATURE_REFINEMENTS {
        intervals *= 2;
        let fine = simpson_vec(&integrand, lo, hi, intervals, width);
        let scale = fine.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        change = coarse.iter().zip(&fine).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        coarse = fine;
        if change <= QUADRATURE_RTOL {
            break;
        }
    }
    if change > QUADRATURE_RTOL {
        return Err(Error::QuadratureNotConverged { relative_change: change });
    }
    let mass = coarse[width - 1];
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { integral: mass });
    }
    let mut f = DMatrix::zeros(p, p);
    for (&(h, k), v) in pairs.iter().zip(&coarse) {
        f[(h, k)] = *v;
        f[(k, h)] = *v;
    }
    Ok(FisherMatrix { f, theta: theta.to_vec() })
}

/// Minimum eigenvalue of `Σ − F⁻¹`; non-negative when `Σ ⪰ F⁻¹` in the Loewner order.
pub fn cramer_rao_gap(fisher: &FisherMatrix, sigma: &DMatrix<f64>) -> Result<f64> {
    Ok(cramer_rao_direction(fisher, sigma)?.0)
}

/// Minimum eigenvalue of `Σ − F⁻¹` and its unit eigenvector.
pub fn cramer_rao_direction(fisher: &FisherMatrix, sigma: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let p = fisher.dim();
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "Σ is {:?}, Fisher matrix is {p}×{p}",
            sigma.shape()
        )));
    }
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * sigma.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!("Σ is not symmetric (asymmetry {asym:e})")));
    }
    let diff = symmetrize(&(sigma - fisher.inverse()?));
    let eig = SymmetricEigen::new(diff);
    let i = eig.eigenvalues.imin();
    Ok((eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
}

/// Per-trial estimates and their empirical covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorCovariance {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub estimates: Vec<DVector<f64>>,
}

impl EstimatorCovariance {
    /// Monte-Carlo standard error of `uᵀ Σ̂ u`.
    pub fn directional_stderr(&self, u: &DVector<f64>) -> f64 {
        let t = self.estimates.len();
        if t < 2 {
            return 0.0;
        }
        let z: Vec<f64> = self.estimates.iter().map(|e| u.dot(&(e - &self.mean)).powi(2)).collect();
        let mean = z.iter().sum::<f64>() / t as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        (var / t as f64).sqrt()
    }
}

/// Seeded generator for trial `index`: ChaCha8 keyed by `seed`, stream `index`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Empirical covariance of `estimator` over `n_trials` independent experiments
/// of `n_samples` draws each. Trials run in parallel; each draws from its own
/// stream so the result does not depend on scheduling.
pub fn mc_estimator_covariance<E>(
    dist: ParametricDistribution,
    theta: &[f64],
    estimator: E,
    n_samples: usize,
    n_trials: usize,
    seed: u64,
) -> Result<EstimatorCovariance>
where
    E: Fn(&[f64]) -> Vec<f64> + Sync,
{
    dist.validate(theta)?;
    if n_samples == 0 || n_trials == 0 {
        return Err(Error::InvalidParameter("n_samples and n_trials must be ≥ 1".into()));
    }
    let estimates: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let xs: Vec<f64> = (0..n_samples).map(|_| dist.sample(theta, &mut rng)).collect();
            estimator(&xs)
        })
        .collect();
    let p = estimates[0].len();
    if p == 0 || estimates.iter().any(|e| e.len() != p) {
        return Err(Error::DimensionMismatch("estimator output length varies or is zero".into()));
    }
    let estimates: Vec<DVector<f64>> = estimates.into_iter().map(DVector::from_vec).collect();
    let mut mean = DVector::zeros(p);
    for e in &estimates {
        mean += e;
    }
    mean /= n_trials as f64;
    let mut covariance = DMatrix::zeros(p, p);
    for e in &estimates {
        let d = e - &mean;
        covariance += &d * d.transpose();
    }
    covariance /= (n_trials.max(2) - 1) as f64;
    Ok(EstimatorCovariance { mean, covariance: symmetrize(&covariance), estimates })
}

/// Common estimators over a sample.
pub mod estimators {
    pub fn sample_mean(xs: &[f64]) -> Vec<f64> {
        vec![xs.iter().sum::<f64>() / xs.len() as f64]
    }

    /// Maximum-likelihood `(μ̂, σ̂)` for a Gaussian sample.
    pub fn gaussian_mle(xs: &[f64]) -> Vec<f64> {
        let n = xs.len() as f64;
        let mu = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
        vec![mu, var.sqrt()]
    }

    /// Maximum-likelihood rate `1/x̄` for an exponential sample.
    pub fn exponential_mle(xs: &[f64]) -> Vec<f64> {
        vec![xs.len() as f64 / xs.iter().sum::<f64>()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_vector_examples() {
        let ones = MicrostateFamily::new(1)
            .with_member("a", |_| 1.0)
            .with_member("b", |_| 1.0)
            .with_member("c", |_| 1.0);
        assert_eq!(entropy_vector(&ones, &[0.3], 1.0).unwrap().s, vec![0.0; 3]);

        let prod = MicrostateFamily::new(2).with_member("B1", |t| t[0] * t[1]);
        let s = entropy_vector(&prod, &[2.0, 3.0], 1.0).unwrap();
        assert!((s.s[0] - 6f64.ln()).abs() < 1e-15);
        assert_eq!(s.labels, vec!["B1"]);

        let exp = MicrostateFamily::new(1).with_member("e", |t| t[0].exp());
        let s = entropy_vector(&exp, &[0.7], 2.0).unwrap();
        assert!((s.s[0] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn entropy_vector_errors() {
        let neg = MicrostateFamily::new(1).with_member("ok", |_| 2.0).with_member("bad", |t| t[0]);
        assert_eq!(
            entropy_vector(&neg, &[-1.0], 1.0),
            Err(Error::NonPositiveMicrostates { index: 1, value: -1.0 })
        );
        assert!(matches!(entropy_vector(&neg, &[1.0, 2.0], 1.0), Err(Error::DimensionMismatch(_))));
        assert!(entropy_vector(&neg, &[1.0], 0.0).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let exp = MicrostateFamily::new(1).with_member("e", |t| t[0].exp());
        assert!((entropy_jacobian(&exp, &[0.4]).unwrap()[(0, 0)] - 1.0).abs() < 1e-9);

        let sq = MicrostateFamily::new(1).with_member("sq", |t| t[0] * t[0]);
        assert!((entropy_jacobian(&sq, &[4.0]).unwrap()[(0, 0)] - 0.5).abs() < 1e-9);

        let g = MicrostateFamily::new(1).with_analytic_member(
            "g",
            |t| (t[0] * t[0] / 2.0).exp(),
            |t| vec![t[0]],
        );
        let analytic = entropy_jacobian(&g, &[1.0]).unwrap();
        let fd = entropy_jacobian(&g.finite_difference(), &[1.0]).unwrap();
        assert_eq!(analytic[(0, 0)], 1.0);
        assert!((analytic - fd).amax() < 1e-7);
    }

    #[test]
    fn jacobian_rejects_bad_step() {
        let fam = MicrostateFamily::new(1).with_member("e", |t| t[0].exp()).with_fd_step(-1.0);
        assert_eq!(entropy_jacobian(&fam, &[0.0]), Err(Error::FdStepInvalid(-1.0)));
    }

    #[test]
    fn fisher_examples() {
        let g = MicrostateFamily::new(1).with_member("g", |t| (t[0] * t[0] / 2.0).exp());
        let f = fisher_matrix(&g, &[1.5]).unwrap();
        assert!((f.f[(0, 0)] - 2.25).abs() < 1e-8);

        let two = MicrostateFamily::new(2).with_member("1", |t| t[0].exp()).with_member("2", |t| t[1].exp());
        let f = fisher_matrix(&two, &[0.3, -0.2]).unwrap();
        assert!((f.f.clone() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-9);
        assert!(f.is_symmetric() && f.is_psd());

        let flat = MicrostateFamily::new(2).with_member("1", |_| 3.0).with_member("2", |_| 5.0);
        let f = fisher_matrix(&flat, &[1.0, 1.0]).unwrap();
        assert_eq!(f.f, DMatrix::zeros(2, 2));
        assert!(matches!(f.inverse(), Err(Error::SingularFisher { .. })));
    }

    #[test]
    fn boltzmann_constant_does_not_enter_fisher() {
        let fam = MicrostateFamily::new(2)
            .with_member("a", |t| (t[0] * t[1]).exp() + 1.0)
            .with_member("b", |t| t[0] * t[0] + t[1].cosh());
        let a = entropy_vector(&fam, &[0.5, 0.2], 1.0).unwrap();
        let b = entropy_vector(&fam, &[0.5, 0.2], 1.380649e-23).unwrap();
        assert!((a.s[0] * 1.380649e-23 - b.s[0]).abs() < 1e-35);
        // fisher_matrix has no k argument: J uses ∂ log W, not ∂S.
        let f = fisher_matrix(&fam, &[0.5, 0.2]).unwrap();
        assert!(f.is_psd());
    }

    #[test]
    fn tabulated_family() {
        let fam = MicrostateFamily::new(1)
            .with_tabulated("tab", vec![0.0, 1.0, 2.0], vec![1.0, std::f64::consts::E, 7.389_056_098_930_65])
            .unwrap();
        // log W = θ, piecewise linear and exact here.
        let j = entropy_jacobian(&fam, &[0.5]).unwrap();
        assert!((j[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(MicrostateFamily::new(1).with_tabulated("x", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(MicrostateFamily::new(1).with_tabulated("x", vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(MicrostateFamily::new(2).with_tabulated("x", vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn distribution_bridge_family() {
        let fam = MicrostateFamily::from_distribution(ParametricDistribution::Gaussian, &[-1.0, 0.0, 2.0]);
        assert_eq!(fam.observers(), 3);
        let j = entropy_jacobian(&fam, &[0.0, 1.0]).unwrap();
        let fd = entropy_jacobian(&fam.finite_difference(), &[0.0, 1.0]).unwrap();
        assert!((j - fd).amax() < 1e-8);
    }

    #[test]
    fn score_oracle_examples() {
        let f = score_fisher_oracle(ParametricDistribution::Gaussian, &[0.3, 1.7]).unwrap();
        let s2 = 1.7 * 1.7;
        assert!((f.f[(0, 0)] * s2 - 1.0).abs() < 1e-6);
        assert!((f.f[(1, 1)] * s2 - 2.0).abs() < 2e-6);
        assert!(f.f[(0, 1)].abs() < 1e-9);

        let f = score_fisher_oracle(ParametricDistribution::Exponential, &[2.5]).unwrap();
        assert!((f.f[(0, 0)] * 6.25 - 1.0).abs() < 1e-6);

        let a = score_fisher_oracle(ParametricDistribution::Gaussian, &[0.0, 1.0]).unwrap();
        let b = score_fisher_oracle(ParametricDistribution::Gaussian, &[5.0, 1.0]).unwrap();
        assert!((a.f - b.f).amax() < 1e-8);

        assert!(score_fisher_oracle(ParametricDistribution::PointMass, &[0.0]).is_err());
        assert!(score_fisher_oracle(ParametricDistribution::Gaussian, &[0.0, -1.0]).is_err());
    }

    #[test]
    fn cramer_rao_gap_examples() {
        let fi = |d: &[f64]| FisherMatrix { f: DMatrix::from_diagonal(&DVector::from_row_slice(d)), theta: vec![] };
        let f = fi(&[4.0, 1.0]);
        let inv = f.inverse().unwrap();
        assert!(cramer_rao_gap(&f, &inv).unwrap().abs() < 1e-15);

        let id = fi(&[1.0, 1.0]);
        let two = DMatrix::identity(2, 2) * 2.0;
        assert!((cramer_rao_gap(&id, &two).unwrap() - 1.0).abs() < 1e-15);

        let sigma = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.3, 1.5]));
        assert!((cramer_rao_gap(&f, &sigma).unwrap() - 0.05).abs() < 1e-14);

        let singular = fi(&[1.0, 0.0]);
        assert!(matches!(cramer_rao_gap(&singular, &two), Err(Error::SingularFisher { .. })));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(cramer_rao_gap(&id, &asym).is_err());
    }

    #[test]
    fn mc_point_mass_has_zero_covariance() {
        let cov = mc_estimator_covariance(ParametricDistribution::PointMass, &[2.5], estimators::sample_mean, 50, 20, 1)
            .unwrap();
        assert_eq!(cov.covariance[(0, 0)], 0.0);
        assert_eq!(cov.mean[0], 2.5);
    }

    #[test]
    fn mc_is_deterministic_and_validates() {
        let run = || {
            mc_estimator_covariance(ParametricDistribution::Gaussian, &[0.0, 1.0], estimators::gaussian_mle, 100, 64, 7)
                .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(mc_estimator_covariance(ParametricDistribution::Gaussian, &[0.0, 1.0], estimators::sample_mean, 0, 1, 1)
            .is_err());
    }

    #[test]
    fn mc_sample_mean_variance() {
        let cov = mc_estimator_covariance(
            ParametricDistribution::Gaussian,
            &[0.0, 1.0],
            estimators::sample_mean,
            10_000,
            1_000,
            42,
        )
        .unwrap();
        let v = cov.covariance[(0, 0)];
        assert!((0.8e-4..=1.2e-4).contains(&v), "variance {v:e}");
    }
}
