//! Relativistic quantum potential, quantum mass and conformal metrics.
//!
//! Spacetime fields live on a [`Grid`] whose axis 0 is time `t` (when the grid
//! has two axes) and axis 1 is `x`; a one-axis grid is purely spatial. The
//! metric acts on coordinates `x⁰ = ct, x¹, …` with signature `(+,−,−,−)`.
//! Metric dimensions beyond the grid axes are homogeneous directions: fields do
//! not vary along them.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Axis, Grid, ScalarField};
use crate::quantum_potential::PhysicalConstants;

/// Largest `Q` accepted before `exp(Q)` is treated as an overflow.
pub const MAX_EXPONENT: f64 = 700.0;
const MIN_REL_DET: f64 = 1e-12;

/// One symmetric metric per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeMetric {
    grid: Grid,
    dim: usize,
    g: Vec<DMatrix<f64>>,
}

/// `(positive, negative)` eigenvalue counts.
pub fn signature(m: &DMatrix<f64>) -> (usize, usize) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    (eig.iter().filter(|v| **v > 0.0).count(), eig.iter().filter(|v| **v < 0.0).count())
}

impl SpacetimeMetric {
    /// Validates symmetry, `|det g| > 1e-12·(max|g_μν|)^dim` and the `(+,−,…)`
    /// signature at every point.
    pub fn new(grid: Grid, g: Vec<DMatrix<f64>>) -> Result<Self> {
        if g.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} metrics for {} grid points", g.len(), grid.len())));
        }
        let dim = g.first().map(|m| m.nrows()).unwrap_or(0);
        if dim != 2 && dim != 4 {
            return Err(Error::DimensionMismatch(format!("metric dimension must be 2 or 4, got {dim}")));
        }
        if dim < grid.ndim() {
            return Err(Error::DimensionMismatch(format!("{dim}D metric on a {}-axis grid", grid.ndim())));
        }
        for (index, m) in g.iter().enumerate() {
            if m.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("metric {index} is {:?}", m.shape())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite metric at point {index}")));
            }
            let asym = (m - m.transpose()).amax();
            if asym > 1e-12 * m.amax() {
                return Err(Error::InvalidParameter(format!("metric at point {index} is not symmetric")));
            }
            let det = m.determinant();
            if !(det.abs() > MIN_REL_DET * m.amax().powi(dim as i32)) {
                return Err(Error::DegenerateMetric { index, det });
            }
            if signature(m) != (1, dim - 1) {
                return Err(Error::InvalidParameter(format!(
                    "metric at point {index} has signature {:?}, expected (1, {})",
                    signature(m),
                    dim - 1
                )));
            }
        }
        Ok(Self { grid, dim, g })
    }

    pub fn minkowski(grid: &Grid, dim: usize) -> Result<Self> {
        let mut eta = DMatrix::identity(dim, dim) * -1.0;
        if dim > 0 {
            eta[(0, 0)] = 1.0;
        }
        Self::new(grid.clone(), vec![eta; grid.len()])
    }

    /// Diagonal metric from one field per component.
    pub fn diagonal(components: &[ScalarField]) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::DimensionMismatch("no diagonal fields".into()))?;
        for c in &components[1..] {
            first.grid().check_same(c.grid(), "diagonal metric components")?;
        }
        let g = (0..first.grid().len())
            .map(|p| DMatrix::from_diagonal(&DVector::from_iterator(components.len(), components.iter().map(|c| c.get(p)))))
            .collect();
        Self::new(first.grid().clone(), g)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        Self::new(grid.clone(), (0..grid.len()).map(|p| f(&grid.point(p))).collect())
    }

    /// Reads a JSON metric description; diagonal component paths are relative
    /// to the JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let spec: MetricFile = serde_json::from_reader(File::open(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.build(base)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, p: usize) -> &DMatrix<f64> {
        &self.g[p]
    }

    pub fn components(&self) -> &[DMatrix<f64>] {
        &self.g
    }

    pub fn inverse_at(&self, p: usize) -> DMatrix<f64> {
        let inv = self.g[p].clone().try_inverse().expect("nondegenerate by construction");
        (&inv + inv.transpose()) * 0.5
    }

    pub fn is_diagonal(&self) -> bool {
        self.g.iter().all(|m| (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || m[(i, j)] == 0.0)))
    }
}

/// JSON form: `{"axes": [...], "metric": {"kind": "minkowski", "dim": 2}}` or
/// `{"axes": [...], "metric": {"kind": "diag", "fields": ["g00.csv", ...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub axes: Vec<Axis>,
    pub metric: MetricSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricSpec {
    Minkowski { dim: usize },
    Diag { fields: Vec<String> },
    /// Row-major `dim × dim` grid of component files; must be symmetric.
    Full { fields: Vec<Vec<String>> },
}

impl MetricFile {
    pub fn build(&self, base: &Path) -> Result<SpacetimeMetric> {
        let grid = Grid::new(self.axes.clone())?;
        match &self.metric {
            MetricSpec::Minkowski { dim } => SpacetimeMetric::minkowski(&grid, *dim),
            MetricSpec::Diag { fields } => {
                let comps = fields
                    .iter()
                    .map(|f| ScalarField::read_csv(&base.join(f)))
                    .collect::<Result<Vec<_>>>()?;
                for c in &comps {
                    grid.check_same(c.grid(), "metric component vs axes")?;
                }
                SpacetimeMetric::diagonal(&comps)
            }
            MetricSpec::Full { fields } => {
                let dim = fields.len();
                if fields.iter().any(|row| row.len() != dim) {
                    return Err(Error::DimensionMismatch("full metric needs a square table of fields".into()));
                }
                let comps = fields
                    .iter()
                    .flatten()
                    .map(|f| ScalarField::read_csv(&base.join(f)))
                    .collect::<Result<Vec<_>>>()?;
                for c in &comps {
                    grid.check_same(c.grid(), "metric component vs axes")?;
                }
                let g = (0..grid.len())
                    .map(|p| DMatrix::from_row_iterator(dim, dim, comps.iter().map(|c| c.get(p))))
                    .collect();
                SpacetimeMetric::new(grid, g)
            }
        }
    }
}

fn time_axis(grid: &Grid) -> Option<usize> {
    (grid.ndim() == 2).then_some(0)
}

/// Derivative along metric coordinate `mu` (`x⁰ = ct`); zero along
/// directions the grid does not resolve.
fn coordinate_derivative(f: &ScalarField, mu: usize, c: f64) -> Option<ScalarField> {
    let grid = f.grid();
    match time_axis(grid) {
        Some(t) if mu == 0 => Some(f.derivative(t).map("d0", |v| v / c)),
        Some(_) if mu < grid.ndim() => Some(f.derivative(mu)),
        None if mu >= 1 && mu - 1 < grid.ndim() => Some(f.derivative(mu - 1)),
        _ => None,
    }
}

/// `Q = (ħ²/m²c²)·(∇² − c⁻²∂²_t)|ψ| / |ψ|` with second-order stencils.
pub fn relativistic_quantum_potential(abs_psi: &ScalarField, consts: &PhysicalConstants) -> Result<ScalarField> {
    consts.validate()?;
    abs_psi.ensure_positive()?;
    let grid = abs_psi.grid();
    let coef = (consts.hbar / (consts.mass * consts.c)).powi(2);
    let mut op = vec![0.0; grid.len()];
    for a in 0..grid.ndim() {
        let sign = if time_axis(grid) == Some(a) { -1.0 / (consts.c * consts.c) } else { 1.0 };
        let d2 = abs_psi.second_derivative(a);
        op.iter_mut().zip(d2.values()).for_each(|(o, v)| *o += sign * v);
    }
    let values = op.iter().zip(abs_psi.values()).map(|(o, p)| coef * o / p).collect();
    ScalarField::new(grid.clone(), values, "Q_rel")
}

/// The same potential with the d'Alembertian of a diagonal metric in divergence
/// form, `□f = |g|^{-1/2} ∂_μ(|g|^{1/2} g^{μμ} ∂_μ f)`, and `Q = −(ħ²/m²c²) □|ψ|/|ψ|`.
/// For the flat metric this reduces to [`relativistic_quantum_potential`].
pub fn relativistic_quantum_potential_diagonal(
    abs_psi: &ScalarField,
    metric: &SpacetimeMetric,
    consts: &PhysicalConstants,
) -> Result<ScalarField> {
    consts.validate()?;
    abs_psi.ensure_positive()?;
    abs_psi.grid().check_same(metric.grid(), "|ψ| vs metric")?;
    if !metric.is_diagonal() {
        return Err(Error::InvalidParameter("curved d'Alembertian is only available for diagonal metrics".into()));
    }
    let grid = abs_psi.grid();
    let sqrt_det: Vec<f64> = metric.components().iter().map(|m| m.determinant().abs().sqrt()).collect();
    let mut box_f = vec![0.0; grid.len()];
    for mu in 0..metric.dim() {
        let Some(df) = coordinate_derivative(abs_psi, mu, consts.c) else { continue };
        let flux: Vec<f64> = (0..grid.len()).map(|p| sqrt_det[p] / metric.at(p)[(mu, mu)] * df.get(p)).collect();
        let flux = ScalarField::new(grid.clone(), flux, "flux")?;
        let div = coordinate_derivative(&flux, mu, consts.c).expect("same axis");
        box_f.iter_mut().zip(div.values()).for_each(|(b, v)| *b += v);
    }
    let coef = (consts.hbar / (consts.mass * consts.c)).powi(2);
    let values = (0..grid.len()).map(|p| -coef * box_f[p] / (sqrt_det[p] * abs_psi.get(p))).collect();
    ScalarField::new(grid.clone(), values, "Q_rel")
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumMass {
    pub m_squared: ScalarField,
    pub mass: f64,
}

fn check_exponent(q: &ScalarField) -> Result<()> {
    for (i, v) in q.values().iter().enumerate() {
        if v.is_nan() {
            return Err(Error::InvalidParameter(format!("Q is NaN at point {i}")));
        }
        if *v > MAX_EXPONENT {
            return Err(Error::Overflow(*v));
        }
    }
    Ok(())
}

/// `M² = m²·exp(Q)` pointwise.
pub fn quantum_mass(q: &ScalarField, mass: f64) -> Result<QuantumMass> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    check_exponent(q)?;
    let m2 = mass * mass;
    Ok(QuantumMass { m_squared: q.map("M2", |v| m2 * v.exp()), mass })
}

/// `g̃ = (M²/m²)·g = exp(Q)·g` pointwise.
pub fn conformal_metric(g: &SpacetimeMetric, q: &ScalarField) -> Result<SpacetimeMetric> {
    g.grid().check_same(q.grid(), "metric vs Q")?;
    check_exponent(q)?;
    let scaled = g.g.iter().zip(q.values()).map(|(m, v)| m * v.exp()).collect();
    SpacetimeMetric::new(g.grid.clone(), scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KgForm {
    /// `g^{μν}∂_μS∂_νS − m²c²·exp(Q)`.
    Original,
    /// `exp(Q)·(g̃^{μν}∂_μS∂_νS − m²c²)`, the conformal equation expressed in
    /// the same units as the original one.
    Conformal,
    /// `g̃^{μν}∂_μS∂_νS − m²c²` without rescaling; equals `exp(−Q)` times the original.
    ConformalUnscaled,
}

/// Klein–Gordon Hamilton–Jacobi residual.
pub fn kg_hj_residual(
    g: &SpacetimeMetric,
    s: &ScalarField,
    q: &ScalarField,
    consts: &PhysicalConstants,
    form: KgForm,
) -> Result<ScalarField> {
    consts.validate()?;
    g.grid().check_same(s.grid(), "metric vs S")?;
    g.grid().check_same(q.grid(), "metric vs Q")?;
    check_exponent(q)?;
    let grads: Vec<Option<ScalarField>> = (0..g.dim()).map(|mu| coordinate_derivative(s, mu, consts.c)).collect();
    let mc2 = (consts.mass * consts.c).powi(2);
    let tilde = match form {
        KgForm::Original => None,
        _ => Some(conformal_metric(g, q)?),
    };
    let values = (0..s.grid().len())
        .map(|p| {
            let ds = DVector::from_iterator(g.dim(), grads.iter().map(|d| d.as_ref().map_or(0.0, |f| f.get(p))));
            let eq = q.get(p).exp();
            match (&tilde, form) {
                (None, _) => (g.inverse_at(p) * &ds).dot(&ds) - mc2 * eq,
                (Some(t), KgForm::Conformal) => eq * ((t.inverse_at(p) * &ds).dot(&ds) - mc2),
                (Some(t), _) => (t.inverse_at(p) * &ds).dot(&ds) - mc2,
            }
        })
        .collect();
    ScalarField::new(s.grid().clone(), values, "kg_residual")
}
