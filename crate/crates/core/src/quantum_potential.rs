//! Weyl-like vector, quantum potential from a microstate field `W(x)`, Fisher
//! action and the quantum Hamilton–Jacobi residual on uniform grids.
//!
//! Two normalisations of the quantum potential are offered:
//!
//! * [`QMode::Microstate`]: `Q_ij = (1/2m)·[∂_iW ∂_jW / W² − 2 ∂_i∂_jW / W]`, scalar = trace.
//! * [`QMode::Standard`]: `Q = −(ħ²/2m)·∇²√W/√W`, evaluated through the identity
//!   `∇²√W/√W = ½ ∇²W/W − ¼ |∇W|²/W²` so both modes share the same stencils.
//!
//! In one dimension with `ħ = 1` the microstate scalar is exactly four times the
//! standard one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSeries, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub k_boltz: f64,
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0, k_boltz: 1.0, c: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64, k_boltz: f64, c: f64) -> Result<Self> {
        let consts = Self { hbar, mass, k_boltz, c };
        consts.validate()?;
        Ok(consts)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hbar", self.hbar), ("mass", self.mass), ("k_boltz", self.k_boltz), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMode {
    Microstate,
    Standard,
}

impl QMode {
    /// Coefficient of `∫ ρ |∇ log ρ|²` whose variation in `ρ` reproduces this mode's `Q`.
    pub fn fisher_coefficient(self, consts: &PhysicalConstants) -> f64 {
        match self {
            QMode::Microstate => 1.0 / (2.0 * consts.mass),
            QMode::Standard => consts.hbar * consts.hbar / (8.0 * consts.mass),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QPotentialResult {
    /// `Q_ij` for every axis pair; `None` in standard mode.
    pub tensor: Option<Vec<Vec<ScalarField>>>,
    pub scalar: ScalarField,
    pub mode: QMode,
}

/// `B_h = ∂ log W / ∂x_h`, one field per axis.
pub fn weyl_vector(w: &ScalarField) -> Result<Vec<ScalarField>> {
    w.ensure_positive()?;
    Ok(w.gradient()
        .into_iter()
        .enumerate()
        .map(|(a, d)| d.zip_map(w, format!("B{a}"), |dw, w| dw / w).expect("same grid"))
        .collect())
}

/// Pointwise `max_{k,p} |∂_k∂_p log W − ∂_k log W ∂_p log W|`.
pub fn log_weight_residual(w: &ScalarField) -> Result<ScalarField> {
    w.ensure_positive()?;
    let n = w.grid().ndim();
    let grad = w.gradient();
    let mut out = vec![0.0f64; w.grid().len()];
    for k in 0..n {
        for p in k..n {
            let wkp = w.mixed_derivative(k, p);
            for (i, o) in out.iter_mut().enumerate() {
                let wi = w.get(i);
                let (bk, bp) = (grad[k].get(i) / wi, grad[p].get(i) / wi);
                // ∂²log W = W_kp/W − B_k B_p
                let r = (wkp.get(i) / wi - 2.0 * bk * bp).abs();
                *o = o.max(r);
            }
        }
    }
    ScalarField::new(w.grid().clone(), out, "log_weight_residual")
}

/// Quantum potential of a positive field `W`.
pub fn quantum_potential_w(w: &ScalarField, consts: &PhysicalConstants, mode: QMode) -> Result<QPotentialResult> {
    consts.validate()?;
    w.ensure_positive()?;
    let n = w.grid().ndim();
    let len = w.grid().len();
    let grad = w.gradient();
    let pref = 1.0 / (2.0 * consts.mass);
    match mode {
        QMode::Microstate => {
            let mut tensor: Vec<Vec<Option<ScalarField>>> = vec![vec![None; n]; n];
            let mut trace = vec![0.0; len];
            for i in 0..n {
                for j in i..n {
                    let wij = w.mixed_derivative(i, j);
                    let values: Vec<f64> = (0..len)
                        .map(|p| {
                            let wp = w.get(p);
                            let (bi, bj) = (grad[i].get(p) / wp, grad[j].get(p) / wp);
                            pref * (bi * bj - 2.0 * (wij.get(p) / wp))
                        })
                        .collect();
                    if i == j {
                        trace.iter_mut().zip(&values).for_each(|(t, v)| *t += v);
                    }
                    let f = ScalarField::new(w.grid().clone(), values, format!("Q{i}{j}"))?;
                    tensor[j][i] = Some(f.clone().with_name(format!("Q{j}{i}")));
                    tensor[i][j] = Some(f);
                }
            }
            let tensor = tensor.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect();
            Ok(QPotentialResult {
                tensor: Some(tensor),
                scalar: ScalarField::new(w.grid().clone(), trace, "Q")?,
                mode,
            })
        }
        QMode::Standard => {
            let lap = w.laplacian();
            let coef = consts.hbar * consts.hbar * pref;
            let values = (0..len)
                .map(|p| {
                    let wp = w.get(p);
                    let grad_sq: f64 = grad.iter().map(|g| (g.get(p) / wp).powi(2)).sum();
                    -coef * (0.5 * (lap.get(p) / wp) - 0.25 * grad_sq)
                })
                .collect();
            Ok(QPotentialResult { tensor: None, scalar: ScalarField::new(w.grid().clone(), values, "Q")?, mode })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTerms {
    pub classical: f64,
    pub fisher_term: f64,
    pub total: f64,
    /// Length of the time window integrated over.
    pub duration: f64,
}

fn check_normalized(rho: &ScalarField) -> Result<()> {
    let integral = rho.integrate();
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { integral });
    }
    Ok(())
}

fn time_weights(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|k| if k == 0 || k + 1 == n { 0.5 * dt } else { dt }).collect()
}

/// `∫∫ ρ [∂S/∂t + |∇S|²/2m + V] dt dⁿx` and `∫∫ c_F |∇ρ|²/ρ dt dⁿx` over the
/// time window of `s`, trapezoidal in space and time. `c_F` is
/// [`QMode::fisher_coefficient`].
pub fn fisher_action(
    rho: &ScalarField,
    s: &FieldSeries,
    v: &ScalarField,
    consts: &PhysicalConstants,
    mode: QMode,
) -> Result<ActionTerms> {
    consts.validate()?;
    rho.grid().check_same(s.grid(), "rho vs S")?;
    rho.grid().check_same(v.grid(), "rho vs V")?;
    check_normalized(rho)?;
    rho.ensure_positive()?;
    let weights = rho.grid().trapezoid_weights();
    let inv2m = 1.0 / (2.0 * consts.mass);

    let mut classical = 0.0;
    for (k, wt) in time_weights(s.len(), s.dt()).into_iter().enumerate() {
        let st = s.time_derivative(k);
        let grad = s.slice(k).gradient();
        let slice: f64 = (0..weights.len())
            .map(|p| {
                let kinetic: f64 = grad.iter().map(|g| g.get(p).powi(2)).sum::<f64>() * inv2m;
                weights[p] * rho.get(p) * (st.get(p) + kinetic + v.get(p))
            })
            .sum();
        classical += wt * slice;
    }

    let duration = s.t_end() - s.t0();
    let grad = rho.gradient();
    let info: f64 = (0..weights.len())
        .map(|p| weights[p] * grad.iter().map(|g| g.get(p).powi(2)).sum::<f64>() / rho.get(p))
        .sum();
    let fisher_term = mode.fisher_coefficient(consts) * info * duration;
    Ok(ActionTerms { classical, fisher_term, total: classical + fisher_term, duration })
}

/// The fixed perturbation `η = ρ (g − ⟨g⟩_ρ)` with `g = Σ_a (x_a + x_a²)`,
/// so `∫η = 0` under the grid quadrature.
pub fn stationarity_perturbation(rho: &ScalarField) -> ScalarField {
    let grid: &Grid = rho.grid();
    let g = ScalarField::from_fn(grid, "g", |x| x.iter().map(|xi| xi + xi * xi).sum());
    let weights = grid.trapezoid_weights();
    let mass: f64 = (0..grid.len()).map(|p| weights[p] * rho.get(p)).sum();
    let mean: f64 = (0..grid.len()).map(|p| weights[p] * rho.get(p) * g.get(p)).sum::<f64>() / mass;
    rho.zip_map(&g, "eta", |r, gv| r * (gv - mean)).expect("same grid")
}

/// `[A(ρ + εη) − A(ρ)]/ε` for the perturbation of [`stationarity_perturbation`].
/// Returns 0 when `ε = 0`.
pub fn action_stationarity(
    rho: &ScalarField,
    s: &FieldSeries,
    v: &ScalarField,
    consts: &PhysicalConstants,
    mode: QMode,
    eps: f64,
) -> Result<f64> {
    let base = fisher_action(rho, s, v, consts, mode)?;
    if eps == 0.0 {
        return Ok(0.0);
    }
    if !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("perturbation amplitude must be finite, got {eps}")));
    }
    let eta = stationarity_perturbation(rho);
    let moved = rho.zip_map(&eta, rho.name(), |r, e| r + eps * e)?;
    let varied = fisher_action(&moved, s, v, consts, mode)?;
    Ok((varied.total - base.total) / eps)
}

/// Signed `|∇S|²/2m + V + Q(W) + ∂S/∂t` at slice [`FieldSeries::eval_index`].
pub fn hj_energy_residual(
    s: &FieldSeries,
    w: &ScalarField,
    v: &ScalarField,
    consts: &PhysicalConstants,
    mode: QMode,
) -> Result<ScalarField> {
    s.grid().check_same(w.grid(), "S vs W")?;
    s.grid().check_same(v.grid(), "S vs V")?;
    let q = quantum_potential_w(w, consts, mode)?.scalar;
    let k = s.eval_index();
    let st = s.time_derivative(k);
    let grad = s.slice(k).gradient();
    let inv2m = 1.0 / (2.0 * consts.mass);
    let values = (0..w.grid().len())
        .map(|p| {
            let kinetic: f64 = grad.iter().map(|g| g.get(p).powi(2)).sum::<f64>() * inv2m;
            kinetic + v.get(p) + q.get(p) + st.get(p)
        })
        .collect();
    ScalarField::new(w.grid().clone(), values, "hj_residual")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Axis;

    fn line(lo: f64, hi: f64, h: f64) -> Grid {
        Grid::new(vec![Axis::from_range(lo, hi, h).unwrap()]).unwrap()
    }

    fn max_err(f: &ScalarField, exact: impl Fn(&[f64]) -> f64, margin: usize) -> f64 {
        (0..f.grid().len())
            .filter(|i| f.grid().is_interior(*i, margin))
            .map(|i| (f.get(i) - exact(&f.grid().point(i))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn weyl_vector_examples() {
        let g = line(-2.0, 2.0, 0.01);
        let flat = ScalarField::constant(&g, "W", 3.0);
        assert!(weyl_vector(&flat).unwrap()[0].max_abs() == 0.0);

        let e = ScalarField::from_fn(&g, "W", |x| x[0].exp());
        assert!(max_err(&weyl_vector(&e).unwrap()[0], |_| 1.0, 1) < 1e-4);

        let gauss = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / 2.0).exp());
        assert!(max_err(&weyl_vector(&gauss).unwrap()[0], |x| -x[0], 1) < 1e-3);

        let bad = ScalarField::from_fn(&g, "W", |x| x[0]);
        assert!(matches!(weyl_vector(&bad), Err(Error::NonPositiveField { .. })));
    }

    #[test]
    fn log_weight_residual_examples() {
        let g = line(-0.5, 0.5, 1e-3);
        let w = ScalarField::from_fn(&g, "W", |x| 1.0 / (1.0 - x[0]));
        assert!(log_weight_residual(&w).unwrap().max_abs() < 1e-3);

        let flat = ScalarField::constant(&g, "W", 2.0);
        assert_eq!(log_weight_residual(&flat).unwrap().max_abs(), 0.0);

        let g = line(-1.0, 1.0, 1e-2);
        let gauss = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / 2.0).exp());
        let r = log_weight_residual(&gauss).unwrap();
        assert!((r.get(100) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn quantum_potential_examples() {
        let consts = PhysicalConstants::default();
        let g = line(-3.0, 3.0, 1e-2);
        let flat = ScalarField::constant(&g, "W", 0.7);
        for mode in [QMode::Microstate, QMode::Standard] {
            assert_eq!(quantum_potential_w(&flat, &consts, mode).unwrap().scalar.max_abs(), 0.0);
        }

        let gauss = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / 2.0).exp());
        let q = quantum_potential_w(&gauss, &consts, QMode::Microstate).unwrap();
        assert!(max_err(&q.scalar, |x| 1.0 - x[0] * x[0] / 2.0, 1) < 1e-3);

        let a = 1.3;
        let exp = ScalarField::from_fn(&g, "W", |x| (a * x[0]).exp());
        let q = quantum_potential_w(&exp, &consts, QMode::Microstate).unwrap();
        assert!(max_err(&q.scalar, |_| -a * a / 2.0, 1) < 1e-3);
    }

    #[test]
    fn coefficient_bridge_is_exact() {
        let consts = PhysicalConstants::default();
        let g = line(-4.0, 4.0, 0.05);
        let w = ScalarField::from_fn(&g, "rho", |x| (-(x[0] - 0.3).powi(2)).exp() * (2.0 + x[0].sin()));
        let p = quantum_potential_w(&w, &consts, QMode::Microstate).unwrap().scalar;
        let s = quantum_potential_w(&w, &consts, QMode::Standard).unwrap().scalar;
        for i in 0..g.len() {
            assert!((p.get(i) - 4.0 * s.get(i)).abs() <= 1e-8 * p.get(i).abs().max(1e-300));
        }
    }

    #[test]
    fn tensor_is_symmetric_in_2d() {
        let ax = Axis::from_range(-2.0, 2.0, 0.05).unwrap();
        let g = Grid::plane(ax, ax).unwrap();
        let w = ScalarField::from_fn(&g, "W", |p| (-(p[0] * p[0] + p[0] * p[1] + p[1] * p[1])).exp());
        let q = quantum_potential_w(&w, &PhysicalConstants::default(), QMode::Microstate).unwrap();
        let t = q.tensor.unwrap();
        assert_eq!(t[0][1].values(), t[1][0].values());
        let trace = t[0][0].zip_map(&t[1][1], "tr", |a, b| a + b).unwrap();
        assert_eq!(trace.values(), q.scalar.values());
    }

    #[test]
    fn harmonic_ground_state_standard_mode() {
        let consts = PhysicalConstants::default();
        let g = line(-2.0, 2.0, 1e-2);
        let rho = ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0]).exp());
        let q = quantum_potential_w(&rho, &consts, QMode::Standard).unwrap();
        assert!(max_err(&q.scalar, |x| 0.5 * (1.0 - x[0] * x[0]), 1) < 1e-3);
    }

    #[test]
    fn fisher_action_examples() {
        let consts = PhysicalConstants::default();
        let g = line(-8.0, 8.0, 1e-2);
        let rho = ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let zero = ScalarField::constant(&g, "V", 0.0);
        let s = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 2, |_, _| 0.0).unwrap();
        let a = fisher_action(&rho, &s, &zero, &consts, QMode::Microstate).unwrap();
        assert!((a.fisher_term - 0.5).abs() < 1e-4, "{}", a.fisher_term);
        assert_eq!(a.classical, 0.0);

        let uniform = ScalarField::constant(&g, "rho", 1.0 / 16.0);
        let p = 0.8;
        let wave = FieldSeries::from_fn(&g, "S", 0.0, 0.5, 3, |x, t| p * x[0] - p * p / 2.0 * t).unwrap();
        let a = fisher_action(&uniform, &wave, &zero, &consts, QMode::Microstate).unwrap();
        assert!(a.classical.abs() < 1e-12 && a.fisher_term == 0.0);

        let unnormalized = ScalarField::constant(&g, "rho", 1.0);
        assert!(matches!(
            fisher_action(&unnormalized, &s, &zero, &consts, QMode::Microstate),
            Err(Error::NotNormalized { .. })
        ));
        let other = line(-8.0, 8.0, 2e-2);
        let v_other = ScalarField::constant(&other, "V", 0.0);
        assert!(matches!(
            fisher_action(&rho, &s, &v_other, &consts, QMode::Microstate),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn zero_perturbation_returns_zero() {
        let consts = PhysicalConstants::default();
        let g = line(-6.0, 6.0, 1e-2);
        let rho = ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0]).exp() / std::f64::consts::PI.sqrt());
        let v = ScalarField::from_fn(&g, "V", |x| x[0] * x[0] / 2.0);
        let s = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 2, |_, t| -0.5 * t).unwrap();
        assert_eq!(action_stationarity(&rho, &s, &v, &consts, QMode::Standard, 0.0).unwrap(), 0.0);
        let eta = stationarity_perturbation(&rho);
        assert!(eta.integrate().abs() < 1e-14);
    }

    #[test]
    fn hj_residual_examples() {
        let consts = PhysicalConstants::default();
        let g = line(-2.0, 2.0, 1e-2);
        let flat = ScalarField::constant(&g, "W", 1.0);
        let zero = ScalarField::constant(&g, "V", 0.0);
        let p = 1.5;
        let wave = FieldSeries::from_fn(&g, "S", 0.0, 0.01, 3, |x, t| p * x[0] - p * p / 2.0 * t).unwrap();
        let r = hj_energy_residual(&wave, &flat, &zero, &consts, QMode::Standard).unwrap();
        assert!(r.max_abs() < 1e-12);

        let rho = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0]).exp());
        let v = ScalarField::from_fn(&g, "V", |x| x[0] * x[0] / 2.0);
        let ground = FieldSeries::from_fn(&g, "S", 0.0, 0.01, 3, |_, t| -0.5 * t).unwrap();
        let r = hj_energy_residual(&ground, &rho, &v, &consts, QMode::Standard).unwrap();
        assert!(r.max_abs_interior(1) < 1e-3);

        let de = 0.125;
        let wrong = FieldSeries::from_fn(&g, "S", 0.0, 0.01, 3, |_, t| -(0.5 + de) * t).unwrap();
        let r2 = hj_energy_residual(&wrong, &rho, &v, &consts, QMode::Standard).unwrap();
        for i in 0..g.len() {
            assert!((r2.get(i) - r.get(i) + de).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_validate() {
        assert!(PhysicalConstants::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, 2.0, 1.0, 3.0).is_ok());
    }
}
