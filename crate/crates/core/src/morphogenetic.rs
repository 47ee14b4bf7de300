//! Tensor calculus over rectangular Jacobians.
//!
//! A smooth map `y = y(x)` from `n` sources to `m ≥ n` outputs has an `m×n`
//! Jacobian `J`. Sources are recovered from output increments through the
//! pseudo-inverse `dx = J⁺ dy`, the metric is `g = JᵀJ`, and `Q = J J⁺` projects
//! output vectors onto the column space of `J`. When `m = n` everything reduces to
//! ordinary tensor calculus.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest accepted condition number of `JᵀJ`.
pub const MAX_CONDITION: f64 = 1e12;
/// Relative step for first derivatives: `h_i = step · max(1, |x_i|)`.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Relative step for second derivatives (fourth root of machine epsilon).
pub const DEFAULT_FD_STEP_SECOND: f64 = 1e-4;

/// An `m×n` Jacobian with `m ≥ n` and full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RectJacobian {
    entries: DMatrix<f64>,
    condition: f64,
}

impl RectJacobian {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, n) = entries.shape();
        if n == 0 || m < n {
            return Err(Error::DimensionMismatch(format!(
                "Jacobian must be m×n with m ≥ n ≥ 1, got {m}×{n}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("Jacobian has non-finite entries".into()));
        }
        let sv = entries.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient { condition });
        }
        Ok(Self { entries, condition })
    }

    pub fn from_row_slice(m: usize, n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {m}×{n} matrix, got {}",
                m * n,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(m, n, data))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Condition number of `JᵀJ`, i.e. `(σ_max / σ_min)²`.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Thin QR factors `J = Q R` with `Q` m×n orthonormal and `R` n×n upper triangular.
    fn thin_qr(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let qr = self.entries.clone().qr();
        let q = qr.q();
        let r = qr.r();
        if r.diagonal().iter().any(|d| *d == 0.0) {
            return Err(Error::RankDeficient { condition: f64::INFINITY });
        }
        Ok((q, r))
    }
}

/// Metric `g = JᵀJ` and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

/// Orthogonal projector `Q = J(JᵀJ)⁻¹Jᵀ` onto the column space of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    pub q: DMatrix<f64>,
}

impl ProjectionOperator {
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.q.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a {}×{} projector",
                v.len(),
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        Ok(&self.q * v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    /// `Jᵀ v`
    pub covariant: DVector<f64>,
    /// `(JᵀJ)⁻¹ Jᵀ v`
    pub contravariant: DVector<f64>,
}

/// `AᵀA`, filled from one triangle so the result is exactly symmetric.
fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = a.column(i).dot(&a.column(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `A Aᵀ`, exactly symmetric.
fn outer_gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = a.row(i).dot(&a.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `J⁺ = (JᵀJ)⁻¹Jᵀ`, evaluated as `R⁻¹Qᵀ` from a Householder QR factorization.
pub fn pseudo_inverse(j: &RectJacobian) -> Result<DMatrix<f64>> {
    let (q, r) = j.thin_qr()?;
    r.solve_upper_triangular(&q.transpose())
        .ok_or(Error::RankDeficient { condition: f64::INFINITY })
}

pub fn metric_tensor(j: &RectJacobian) -> Result<MetricTensor> {
    let (_, r) = j.thin_qr()?;
    let n = j.cols();
    // (JᵀJ)⁻¹ = R⁻¹R⁻ᵀ
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::RankDeficient { condition: f64::INFINITY })?;
    Ok(MetricTensor { g: gram(j.matrix()), g_inv: outer_gram(&r_inv) })
}

pub fn projection_operator(j: &RectJacobian) -> Result<ProjectionOperator> {
    let (q, _) = j.thin_qr()?;
    Ok(ProjectionOperator { q: outer_gram(&q) })
}

fn check_output_vector(j: &RectJacobian, v: &DVector<f64>) -> Result<()> {
    if v.len() != j.rows() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for a Jacobian with {} rows",
            v.len(),
            j.rows()
        )));
    }
    Ok(())
}

pub fn components(j: &RectJacobian, v: &DVector<f64>) -> Result<Components> {
    check_output_vector(j, v)?;
    let covariant = j.matrix().tr_mul(v);
    let contravariant = pseudo_inverse(j)? * v;
    Ok(Components { covariant, contravariant })
}

/// `S² = (Jᵀv)ᵀ (JᵀJ)⁻¹ (Jᵀv)`, which equals `‖Q v‖²`.
pub fn quadratic_length(j: &RectJacobian, v: &DVector<f64>) -> Result<f64> {
    let c = components(j, v)?;
    Ok(c.contravariant.dot(&c.covariant))
}

type ValueFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type HessianFn = dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync;

/// A map `x ∈ ℝⁿ ↦ y ∈ ℝᵐ` with analytic or finite-difference derivatives.
///
/// Derivatives fall back to central differences whenever no analytic closure
/// was supplied.
#[derive(Clone)]
pub struct SmoothMap {
    inputs: usize,
    outputs: usize,
    value: Arc<ValueFn>,
    jacobian: Option<Arc<JacobianFn>>,
    hessian: Option<Arc<HessianFn>>,
    fd_step: f64,
    fd_step_second: f64,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .field("fd_step", &self.fd_step)
            .field("fd_step_second", &self.fd_step_second)
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(inputs: usize, outputs: usize, value: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            inputs,
            outputs,
            value: Arc::new(value),
            jacobian: None,
            hessian: None,
            fd_step: DEFAULT_FD_STEP,
            fd_step_second: DEFAULT_FD_STEP_SECOND,
        }
    }

    /// `y = A x`, with exact derivatives.
    pub fn linear(a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let a_val = a.clone();
        let a_jac = a;
        Self::new(n, m, move |x| &a_val * x)
            .with_jacobian(move |_| a_jac.clone())
            .with_hessian(move |_| vec![DMatrix::zeros(n, n); m])
    }

    /// Jacobian closure returning the `m×n` matrix `∂y_k/∂x_j`.
    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Hessian closure returning, for every output `k`, the `n×n` matrix `∂²y_k/∂x_h∂x_j`.
    pub fn with_hessian<F>(mut self, hessian: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn with_second_fd_step(mut self, step: f64) -> Self {
        self.fd_step_second = step;
        self
    }

    /// Same map with analytic derivatives dropped.
    pub fn finite_difference(&self) -> Self {
        Self { jacobian: None, hessian: None, ..self.clone() }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn second_fd_step(&self) -> f64 {
        self.fd_step_second
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::DimensionMismatch(format!(
                "map takes {} inputs, got a vector of length {}",
                self.inputs,
                x.len()
            )));
        }
        Ok(())
    }

    fn raw_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let y = (self.value)(x);
        if y.len() != self.outputs {
            return Err(Error::DimensionMismatch(format!(
                "map declared {} outputs but produced {}",
                self.outputs,
                y.len()
            )));
        }
        Ok(y)
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        self.raw_eval(x)
    }

    fn steps(&self, x: &DVector<f64>, rel: f64) -> Result<Vec<f64>> {
        if !(rel > 0.0 && rel.is_finite()) {
            return Err(Error::FdStepInvalid(rel));
        }
        Ok(x.iter().map(|xi| rel * xi.abs().max(1.0)).collect())
    }

    /// `m×n` Jacobian at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        if let Some(jac) = &self.jacobian {
            let j = jac(x);
            if j.shape() != (self.outputs, self.inputs) {
                return Err(Error::DimensionMismatch(format!(
                    "analytic Jacobian has shape {:?}, expected {:?}",
                    j.shape(),
                    (self.outputs, self.inputs)
                )));
            }
            return Ok(j);
        }
        let steps = self.steps(x, self.fd_step)?;
        let mut j = DMatrix::zeros(self.outputs, self.inputs);
        for (c, h) in steps.iter().enumerate() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let d = (self.raw_eval(&xp)? - self.raw_eval(&xm)?) / (2.0 * h);
            j.set_column(c, &d);
        }
        Ok(j)
    }

    /// Second derivatives `∂²y_k/∂x_h∂x_j`, one symmetric `n×n` block per output.
    pub fn hessians(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        self.check_input(x)?;
        if let Some(hess) = &self.hessian {
            let blocks = hess(x);
            if blocks.len() != self.outputs
                || blocks.iter().any(|b| b.shape() != (self.inputs, self.inputs))
            {
                return Err(Error::DimensionMismatch(
                    "analytic Hessian has the wrong shape".into(),
                ));
            }
            return Ok(blocks);
        }
        let steps = self.steps(x, self.fd_step_second)?;
        let n = self.inputs;
        let f0 = self.raw_eval(x)?;
        let mut blocks = vec![DMatrix::zeros(n, n); self.outputs];
        let shifted = |moves: &[(usize, f64)]| -> Result<DVector<f64>> {
            let mut xs = x.clone();
            for &(c, d) in moves {
                xs[c] += d;
            }
            self.raw_eval(&xs)
        };
        for a in 0..n {
            let ha = steps[a];
            let fp = shifted(&[(a, ha)])?;
            let fm = shifted(&[(a, -ha)])?;
            let diag = (fp - &f0 * 2.0 + fm) / (ha * ha);
            for (k, block) in blocks.iter_mut().enumerate() {
                block[(a, a)] = diag[k];
            }
            for b in (a + 1)..n {
                let hb = steps[b];
                let fpp = shifted(&[(a, ha), (b, hb)])?;
                let fpm = shifted(&[(a, ha), (b, -hb)])?;
                let fmp = shifted(&[(a, -ha), (b, hb)])?;
                let fmm = shifted(&[(a, -ha), (b, -hb)])?;
                let mixed = (fpp - fpm - fmp + fmm) / (4.0 * ha * hb);
                for (k, block) in blocks.iter_mut().enumerate() {
                    block[(a, b)] = mixed[k];
                    block[(b, a)] = mixed[k];
                }
            }
        }
        Ok(blocks)
    }
}

/// Rank-3 array of second derivatives `∂²y_k/∂x_h∂x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    blocks: Vec<DMatrix<f64>>,
}

impl Christoffel {
    pub fn get(&self, k: usize, h: usize, j: usize) -> f64 {
        self.blocks[k][(h, j)]
    }

    pub fn outputs(&self) -> usize {
        self.blocks.len()
    }

    pub fn inputs(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn block(&self, k: usize) -> &DMatrix<f64> {
        &self.blocks[k]
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

pub fn christoffel_terms(map: &SmoothMap, x: &DVector<f64>) -> Result<Christoffel> {
    Ok(Christoffel { blocks: map.hessians(x)? })
}

/// Covariant derivative `D_k vⁱ = ∂vⁱ/∂xᵏ + vᵖ ∂²y_j/∂xᵏ∂xᵖ · ∂xⁱ/∂y_j`.
///
/// `∂xⁱ/∂y_j` is the pseudo-inverse of the map's Jacobian at `x`. Row `i` of the
/// result is the vector component, column `k` the differentiation direction.
pub fn covariant_derivative(
    map: &SmoothMap,
    vfield: &SmoothMap,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = map.inputs();
    if vfield.inputs() != n || vfield.outputs() != n {
        return Err(Error::DimensionMismatch(format!(
            "vector field must map ℝ^{n} to ℝ^{n}, got ℝ^{} → ℝ^{}",
            vfield.inputs(),
            vfield.outputs()
        )));
    }
    let jac = RectJacobian::new(map.jacobian(x)?)?;
    let pinv = pseudo_inverse(&jac)?;
    let christoffel = christoffel_terms(map, x)?;
    let v = vfield.eval(x)?;
    let mut d = vfield.jacobian(x)?;
    for i in 0..n {
        for k in 0..n {
            let mut connection = 0.0;
            for p in 0..n {
                let mut contracted = 0.0;
                for j in 0..map.outputs() {
                    contracted += christoffel.get(j, k, p) * pinv[(i, j)];
                }
                connection += v[p] * contracted;
            }
            d[(i, k)] += connection;
        }
    }
    Ok(d)
}
