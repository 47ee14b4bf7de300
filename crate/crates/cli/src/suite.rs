//! The invariant suite behind `morphic validate`. Items are grouped by module and
//! by acceptance criterion; every check name starts with its module.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use morphic_core::entropy_fisher::{cramer_rao_direction, estimators, trial_rng};
use morphic_core::geometrodynamics::signature;
use morphic_core::packets::GaussianPacket;
use morphic_core::*;
use nalgebra::DMatrix;
use rand::Rng;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::CliError;
use crate::report::{Check, Comparator};

pub const MODULES: [&str; 5] = ["morphogenetic", "entropy_fisher", "quantum_potential", "geometrodynamics", "cli_io"];

const SUITE_SEED: u64 = 42;

pub struct SuiteItem {
    pub module: &'static str,
    pub criterion: u8,
    pub names: &'static [&'static str],
    pub run: fn() -> Result<Vec<Check>, CliError>,
}

pub fn items() -> Vec<SuiteItem> {
    vec![
        SuiteItem {
            module: "morphogenetic",
            criterion: 1,
            names: &[
                "morphogenetic.moore_penrose",
                "morphogenetic.projector",
                "morphogenetic.square_inverse",
                "morphogenetic.metric_inverse",
            ],
            run: morphogenetic_identities,
        },
        SuiteItem {
            module: "entropy_fisher",
            criterion: 2,
            names: &["entropy_fisher.score_oracle", "entropy_fisher.observer_symmetric", "entropy_fisher.observer_psd"],
            run: fisher_oracle_and_families,
        },
        SuiteItem {
            module: "entropy_fisher",
            criterion: 3,
            names: &["entropy_fisher.cramer_rao"],
            run: cramer_rao,
        },
        SuiteItem {
            module: "quantum_potential",
            criterion: 4,
            names: &[
                "quantum_potential.gauge.q",
                "quantum_potential.gauge.weyl",
                "quantum_potential.coefficient_bridge",
                "quantum_potential.closed_form.microstate",
                "quantum_potential.closed_form.harmonic",
                "quantum_potential.convergence.microstate",
                "quantum_potential.convergence.harmonic",
            ],
            run: quantum_potential_checks,
        },
        SuiteItem {
            module: "quantum_potential",
            criterion: 5,
            names: &[
                "quantum_potential.energy.harmonic",
                "quantum_potential.convergence.energy",
                "quantum_potential.energy.plane_wave",
            ],
            run: energy_conservation,
        },
        SuiteItem {
            module: "quantum_potential",
            criterion: 6,
            names: &["quantum_potential.stationarity.ground_slope", "quantum_potential.stationarity.shifted_slope"],
            run: action_stationarity_checks,
        },
        SuiteItem {
            module: "quantum_potential",
            criterion: 7,
            names: &[
                "quantum_potential.trajectories.spreading_law",
                "quantum_potential.double_slit.axis_crossings",
                "quantum_potential.double_slit.tv_distance",
                "quantum_potential.double_slit.q_difference",
            ],
            run: trajectory_checks,
        },
        SuiteItem {
            module: "geometrodynamics",
            criterion: 8,
            names: &[
                "geometrodynamics.conformal_agreement",
                "geometrodynamics.mass_shell",
                "geometrodynamics.det_law",
                "geometrodynamics.signature",
            ],
            run: geometrodynamics_checks,
        },
        SuiteItem {
            module: "cli_io",
            criterion: 9,
            names: &["cli_io.determinism", "cli_io.manifest"],
            run: determinism,
        },
    ]
}

pub fn all_check_names() -> Vec<&'static str> {
    items().iter().flat_map(|i| i.names.iter().copied()).collect()
}

/// Runs every item whose module is in `filter` (all items when empty).
pub fn run_suite(filter: &[String]) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for item in items() {
        if filter.is_empty() || filter.iter().any(|f| f == item.module) {
            out.extend((item.run)()?);
        }
    }
    Ok(out)
}

/// Check names selected by `filter`.
pub fn check_names(filter: &[String]) -> Vec<&'static str> {
    items()
        .iter()
        .filter(|i| filter.is_empty() || filter.iter().any(|f| f == i.module))
        .flat_map(|i| i.names.iter().copied())
        .collect()
}

fn line(lo: f64, hi: f64, h: f64) -> Result<Grid, CliError> {
    Ok(Grid::new(vec![Axis::from_range(lo, hi, h)?])?)
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Seeded random full-column-rank Jacobians with `m ≤ 8` rows; `square`
/// forces `m = n`.
fn random_jacobians(count: usize, stream: u64, square: bool) -> Vec<RectJacobian> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count {
        let mut rng = trial_rng(SUITE_SEED ^ stream, k);
        k += 1;
        let m = rng.random_range(1..=8usize);
        let n = if square { m } else { rng.random_range(1..=m) };
        let data: Vec<f64> = (0..m * n).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();
        if let Ok(j) = RectJacobian::from_row_slice(m, n, &data) {
            out.push(j);
        }
    }
    out
}

fn morphogenetic_identities() -> Result<Vec<Check>, CliError> {
    let (mut mp, mut proj, mut metric) = (0.0f64, 0.0f64, 0.0f64);
    for j in random_jacobians(200, 1, false) {
        let a = j.matrix();
        let p = pseudo_inverse(&j)?;
        let ap = a * &p;
        let pa = &p * a;
        mp = mp
            .max((&ap * a - a).amax())
            .max((&pa * &p - &p).amax())
            .max((&ap - ap.transpose()).amax())
            .max((&pa - pa.transpose()).amax());
        let q = projection_operator(&j)?.q;
        proj = proj.max((&q * &q - &q).amax()).max((&q - q.transpose()).amax());
        let g = metric_tensor(&j)?;
        metric = metric.max((&g.g_inv * &g.g - DMatrix::identity(j.cols(), j.cols())).amax());
    }
    let mut square = 0.0f64;
    for j in random_jacobians(50, 2, true) {
        let inv = j.matrix().clone().try_inverse().expect("full rank");
        square = square.max((pseudo_inverse(&j)? - inv).amax());
    }
    Ok(vec![
        Check::new("morphogenetic.moore_penrose", mp, Comparator::Lt, 1e-9),
        Check::new("morphogenetic.projector", proj, Comparator::Lt, 1e-10),
        Check::new("morphogenetic.square_inverse", square, Comparator::Lt, 1e-9),
        Check::new("morphogenetic.metric_inverse", metric, Comparator::Lt, 1e-10),
    ])
}

fn fisher_oracle_and_families() -> Result<Vec<Check>, CliError> {
    let mut oracle_err = 0.0f64;
    for theta in [[0.0, 1.0], [0.3, 1.7], [-2.0, 0.4]] {
        let f = score_fisher_oracle(ParametricDistribution::Gaussian, &theta)?.f;
        let s2 = theta[1] * theta[1];
        let want = DMatrix::from_row_slice(2, 2, &[1.0 / s2, 0.0, 0.0, 2.0 / s2]);
        for (got, w) in f.iter().zip(want.iter()) {
            oracle_err = oracle_err.max(if *w == 0.0 { got.abs() * s2 } else { (got / w - 1.0).abs() });
        }
    }

    let (mut asym, mut min_eig) = (0.0f64, f64::INFINITY);
    for k in 0..100u64 {
        let mut rng = trial_rng(SUITE_SEED ^ 3, k);
        let p = rng.random_range(1..=3usize);
        let n = rng.random_range(1..=6usize);
        let mut fam = MicrostateFamily::new(p);
        for j in 0..n {
            let lin: Vec<f64> = (0..p).map(|_| uniform(&mut rng, -1.5, 1.5)).collect();
            let quad = uniform(&mut rng, -0.5, 0.5);
            let floor = uniform(&mut rng, 0.1, 1.0);
            fam = fam.with_member(format!("B{j}"), move |t| {
                let s: f64 = lin.iter().zip(t).map(|(a, x)| a * x).sum();
                (s + quad * t.iter().map(|x| x * x).sum::<f64>()).exp() + floor
            });
        }
        let theta: Vec<f64> = (0..p).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let f = fisher_matrix(&fam, &theta)?;
        asym = asym.max((&f.f - f.f.transpose()).amax());
        min_eig = min_eig.min(f.min_eigenvalue() / f.f.amax().max(1.0));
    }
    Ok(vec![
        Check::new("entropy_fisher.score_oracle", oracle_err, Comparator::Lt, 1e-6),
        Check::new("entropy_fisher.observer_symmetric", asym, Comparator::Le, 1e-12),
        Check::new("entropy_fisher.observer_psd", min_eig, Comparator::Ge, -1e-12),
    ])
}

fn cramer_rao() -> Result<Vec<Check>, CliError> {
    let (n, trials) = (10_000usize, 1_000usize);
    let theta = [0.0, 1.0];
    let dist = ParametricDistribution::Gaussian;
    let cov = mc_estimator_covariance(dist, &theta, estimators::gaussian_mle, n, trials, SUITE_SEED)?;
    let bound = score_fisher_oracle(dist, &theta)?.scaled(n as f64);
    let (gap, dir) = cramer_rao_direction(&bound, &cov.covariance)?;
    let se = cov.directional_stderr(&dir);
    // Gap in units of its Monte-Carlo standard error.
    Ok(vec![Check::new("entropy_fisher.cramer_rao", gap / se, Comparator::Ge, -3.0)])
}

fn interior_error(f: &ScalarField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let g = f.grid();
    (0..g.len()).filter(|i| g.is_interior(*i, 1)).map(|i| (f.get(i) - exact(&g.point(i))).abs()).fold(0.0, f64::max)
}

fn normwise(a: &ScalarField, b: &ScalarField) -> Result<f64, CliError> {
    Ok(a.max_abs_diff(b)? / a.max_abs().max(f64::MIN_POSITIVE))
}

/// `|e(h)/e(h/2) − 4|`.
fn order_gap(coarse: f64, fine: f64) -> f64 {
    (coarse / fine - 4.0).abs()
}

fn microstate_gaussian_error(h: f64) -> Result<f64, CliError> {
    let g = line(-3.0, 3.0, h)?;
    let w = ScalarField::from_fn(&g, "W", |x| (-x[0] * x[0] / 2.0).exp());
    let q = quantum_potential_w(&w, &PhysicalConstants::default(), QMode::Microstate)?.scalar;
    Ok(interior_error(&q, |x| 1.0 - x[0] * x[0] / 2.0))
}

/// Harmonic ground state `ρ = e^{−x²}`, `V = x²/2`: `Q_std + V = 1/2`.
fn harmonic_fields(h: f64) -> Result<(ScalarField, ScalarField), CliError> {
    let g = line(-2.0, 2.0, h)?;
    Ok((
        ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0]).exp()),
        ScalarField::from_fn(&g, "V", |x| x[0] * x[0] / 2.0),
    ))
}

fn harmonic_q_error(h: f64) -> Result<f64, CliError> {
    let (rho, v) = harmonic_fields(h)?;
    let q = quantum_potential_w(&rho, &PhysicalConstants::default(), QMode::Standard)?.scalar;
    Ok(interior_error(&q.zip_map(&v, "QV", |a, b| a + b)?, |_| 0.5))
}

fn quantum_potential_checks() -> Result<Vec<Check>, CliError> {
    let consts = PhysicalConstants::default();
    let g = line(-5.0, 5.0, 1e-2)?;
    let shapes: [fn(f64) -> f64; 2] = [|x| (-x * x / 2.0).exp(), |x| (-x * x / 8.0).exp() * (1.2 + (2.0 * x).sin())];
    let (mut dq, mut db, mut bridge) = (0.0f64, 0.0f64, 0.0f64);
    for shape in shapes {
        let w = ScalarField::from_fn(&g, "W", |x| shape(x[0]));
        let b = weyl_vector(&w)?;
        for mode in [QMode::Microstate, QMode::Standard] {
            let q = quantum_potential_w(&w, &consts, mode)?.scalar;
            for c in [1e-3, 0.37, 3.7, 1e3] {
                let cw = w.map("W", |v| c * v);
                dq = dq.max(normwise(&q, &quantum_potential_w(&cw, &consts, mode)?.scalar)?);
                db = db.max(normwise(&b[0], &weyl_vector(&cw)?[0])?);
            }
        }
        let micro = quantum_potential_w(&w, &consts, QMode::Microstate)?.scalar;
        let standard = quantum_potential_w(&w, &consts, QMode::Standard)?.scalar;
        bridge = bridge.max(normwise(&micro, &standard.map("Q", |v| 4.0 * v))?);
    }
    let micro: Vec<f64> = [2e-2, 1e-2, 5e-3].iter().map(|h| microstate_gaussian_error(*h)).collect::<Result<_, _>>()?;
    let harm: Vec<f64> = [2e-2, 1e-2, 5e-3].iter().map(|h| harmonic_q_error(*h)).collect::<Result<_, _>>()?;
    Ok(vec![
        Check::new("quantum_potential.gauge.q", dq, Comparator::Le, 1e-12),
        Check::new("quantum_potential.gauge.weyl", db, Comparator::Le, 1e-12),
        Check::new("quantum_potential.coefficient_bridge", bridge, Comparator::Le, 1e-8),
        Check::new("quantum_potential.closed_form.microstate", micro[1], Comparator::Lt, 1e-3),
        Check::new("quantum_potential.closed_form.harmonic", harm[1], Comparator::Lt, 1e-3),
        Check::new(
            "quantum_potential.convergence.microstate",
            order_gap(micro[0], micro[1]).max(order_gap(micro[1], micro[2])),
            Comparator::Le,
            0.5,
        ),
        Check::new(
            "quantum_potential.convergence.harmonic",
            order_gap(harm[0], harm[1]).max(order_gap(harm[1], harm[2])),
            Comparator::Le,
            0.5,
        ),
    ])
}

fn harmonic_hj_error(h: f64) -> Result<f64, CliError> {
    let (rho, v) = harmonic_fields(h)?;
    let s = FieldSeries::from_fn(rho.grid(), "S", 0.0, h, 3, |_, t| -0.5 * t)?;
    Ok(hj_energy_residual(&s, &rho, &v, &PhysicalConstants::default(), QMode::Standard)?.max_abs_interior(1))
}

fn energy_conservation() -> Result<Vec<Check>, CliError> {
    let errs: Vec<f64> = [2e-2, 1e-2, 5e-3].iter().map(|h| harmonic_hj_error(*h)).collect::<Result<_, _>>()?;
    let mut plane = 0.0f64;
    for (p, m) in [(1.5, 1.0), (-0.7, 2.0), (2.0, 0.8)] {
        let consts = PhysicalConstants::new(1.0, m, 1.0, 1.0)?;
        let g = line(-2.0, 2.0, 1e-2)?;
        let flat = ScalarField::constant(&g, "W", 1.0);
        let zero = ScalarField::constant(&g, "V", 0.0);
        let e = p * p / (2.0 * m);
        let s = FieldSeries::from_fn(&g, "S", 0.0, 1e-2, 3, |x, t| p * x[0] - e * t)?;
        plane = plane.max(hj_energy_residual(&s, &flat, &zero, &consts, QMode::Standard)?.max_abs());
    }
    Ok(vec![
        Check::new("quantum_potential.energy.harmonic", errs[1], Comparator::Lt, 1e-3),
        Check::new(
            "quantum_potential.convergence.energy",
            order_gap(errs[0], errs[1]).max(order_gap(errs[1], errs[2])),
            Comparator::Le,
            0.5,
        ),
        Check::new("quantum_potential.energy.plane_wave", plane, Comparator::Le, 1e-12),
    ])
}

/// Least-squares slope of `log|r|` against `log ε`.
fn loglog_slope(eps: &[f64], r: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope of the first-variation ratio for `ρ ∝ e^{−(x−shift)²}` in the
/// harmonic well with the ground-state phase.
pub fn stationarity_slope(shift: f64) -> Result<f64, CliError> {
    let consts = PhysicalConstants::default();
    let g = line(-8.0, 8.0, 1e-3)?;
    let raw = ScalarField::from_fn(&g, "rho", |x| (-(x[0] - shift).powi(2)).exp());
    let total = raw.integrate();
    let rho = raw.map("rho", |v| v / total);
    let v = ScalarField::from_fn(&g, "V", |x| x[0] * x[0] / 2.0);
    let s = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 2, |_, t| -0.5 * t)?;
    let eps = [1e-2, 1e-3, 1e-4];
    let ratios: Vec<f64> = eps
        .iter()
        .map(|e| action_stationarity(&rho, &s, &v, &consts, QMode::Standard, *e))
        .collect::<Result<_, _>>()?;
    Ok(loglog_slope(&eps, &ratios))
}

fn action_stationarity_checks() -> Result<Vec<Check>, CliError> {
    Ok(vec![
        Check::new("quantum_potential.stationarity.ground_slope", (stationarity_slope(0.0)? - 1.0).abs(), Comparator::Le, 0.2),
        Check::new(
            "quantum_potential.stationarity.shifted_slope",
            (stationarity_slope(0.5)? - 1.0).abs(),
            Comparator::Gt,
            0.2,
        ),
    ])
}

fn trajectory_checks() -> Result<Vec<Check>, CliError> {
    let consts = PhysicalConstants::default();
    let packet = GaussianPacket::new(0.3, 0.5, 0.5, &consts)?;
    let g = line(-6.0, 6.0, 1e-2)?;
    // Guidance from the phase sampled on the grid, not the closed-form velocity.
    let series = FieldSeries::from_fn(&g, "S", 0.0, 1e-2, 101, |x, t| packet.phase(x[0], t))?;
    let guidance = GuidanceField::from_series(series);
    let rho0 = ScalarField::from_fn(&g, "rho", |x| packet.density(x[0], 0.0));
    let init = InitialEnsemble::Sampled { density: rho0, count: 1_000, seed: SUITE_SEED, symmetric: false };
    let ens = bohmian_trajectories(&guidance, &consts, &init, 1e-3, 1.0)?;
    let (mut err, mut spread) = (0.0f64, 0.0f64);
    for i in 0..ens.len() {
        let exact = packet.trajectory(ens.position(i, 0)[0], 1.0);
        err = err.max((ens.final_position(i)[0] - exact).abs());
        spread = spread.max((exact - packet.center(1.0)).abs());
    }

    let ds = double_slit_scenario(&DoubleSlitParams { seed: SUITE_SEED, ..Default::default() }, &consts)?;
    Ok(vec![
        Check::new("quantum_potential.trajectories.spreading_law", err / spread, Comparator::Le, 1e-3),
        Check::new("quantum_potential.double_slit.axis_crossings", ds.axis_crossings as f64, Comparator::Le, 0.0),
        Check::new("quantum_potential.double_slit.tv_distance", ds.tv_distance, Comparator::Lt, 0.05),
        Check::new("quantum_potential.double_slit.q_difference", ds.q_overlap_difference, Comparator::Gt, 0.0),
    ])
}

/// Random Lorentzian metric `Λ η Λᵀ` with `Λ = I + A`, `|A_ij| ≤ 0.3`.
fn random_lorentzian<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| uniform(rng, -0.3, 0.3));
    let lambda = DMatrix::identity(dim, dim) + a;
    let mut eta = -DMatrix::<f64>::identity(dim, dim);
    eta[(0, 0)] = 1.0;
    let m = &lambda * eta * lambda.transpose();
    (&m + m.transpose()) * 0.5
}

fn geometrodynamics_checks() -> Result<Vec<Check>, CliError> {
    let consts = PhysicalConstants::default();
    let ax = Axis::from_range(-1.0, 1.0, 0.05)?;
    let grid = Grid::plane(ax, ax)?;

    // Smooth random (g, S, Q): coefficients from the seed, fields from sines.
    let mut agree = 0.0f64;
    for k in 0..8u64 {
        let mut rng = trial_rng(SUITE_SEED ^ 5, k);
        let dim = if k % 2 == 0 { 2 } else { 4 };
        let base = random_lorentzian(&mut rng, dim);
        let wobble = DMatrix::from_fn(dim, dim, |_, _| uniform(&mut rng, -0.05, 0.05));
        let wobble = (&wobble + wobble.transpose()) * 0.5;
        let c: Vec<f64> = (0..6).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
        let metric = SpacetimeMetric::from_fn(&grid, |p| &base + &wobble * (p[0] + 0.5 * p[1]).sin())?;
        let s = ScalarField::from_fn(&grid, "S", |p| c[0] * p[0] + c[1] * (c[2] * p[0] * p[1]).sin() + c[3] * p[1]);
        let q = ScalarField::from_fn(&grid, "Q", |p| c[4] * (p[0] - p[1]).cos() + c[5] * p[0] * p[1]);
        let a = kg_hj_residual(&metric, &s, &q, &consts, KgForm::Original)?;
        let b = kg_hj_residual(&metric, &s, &q, &consts, KgForm::Conformal)?;
        agree = agree.max(a.max_abs_diff(&b)?);
    }

    // Constant Q with a plane-wave S on the mass shell.
    let mut shell = 0.0f64;
    for (k, q0) in [-1.0, 0.0, 0.4, 2.5].iter().enumerate() {
        let dim = if k % 2 == 0 { 2 } else { 4 };
        let eta = SpacetimeMetric::minkowski(&grid, dim)?;
        let q = ScalarField::constant(&grid, "Q", *q0);
        let p1 = 0.3 + 0.2 * k as f64;
        let p0 = (q0.exp() + p1 * p1).sqrt();
        let s = ScalarField::from_fn(&grid, "S", |p| p0 * p[0] + p1 * p[1]);
        for form in [KgForm::Original, KgForm::Conformal, KgForm::ConformalUnscaled] {
            shell = shell.max(kg_hj_residual(&eta, &s, &q, &consts, form)?.max_abs());
        }
    }

    // 100 seeded metrics with a random smooth Q.
    let small = Grid::plane(Axis::from_range(0.0, 0.4, 0.1)?, Axis::from_range(0.0, 0.4, 0.1)?)?;
    let (mut det_err, mut flipped) = (0.0f64, 0usize);
    for k in 0..100u64 {
        let mut rng = trial_rng(SUITE_SEED ^ 7, k);
        let dim = if k % 2 == 0 { 2 } else { 4 };
        let m = random_lorentzian(&mut rng, dim);
        if m.determinant().abs() < 1e-6 {
            continue;
        }
        let metric = SpacetimeMetric::new(small.clone(), vec![m.clone(); small.len()])?;
        let (a, b) = (uniform(&mut rng, -5.0, 5.0), uniform(&mut rng, -3.0, 3.0));
        let q = ScalarField::from_fn(&small, "Q", |p| a + b * (p[0] - p[1]).sin());
        let t = conformal_metric(&metric, &q)?;
        for p in 0..small.len() {
            let want = (dim as f64 * q.get(p)).exp() * m.determinant();
            det_err = det_err.max((t.at(p).determinant() / want - 1.0).abs());
            if signature(t.at(p)) != (1, dim - 1) {
                flipped += 1;
            }
        }
    }
    Ok(vec![
        Check::new("geometrodynamics.conformal_agreement", agree, Comparator::Lt, 1e-12),
        Check::new("geometrodynamics.mass_shell", shell, Comparator::Lt, 1e-10),
        Check::new("geometrodynamics.det_law", det_err, Comparator::Lt, 1e-10),
        Check::new("geometrodynamics.signature", flipped as f64, Comparator::Le, 0.0),
    ])
}

/// Small configs covering every computing scenario.
pub fn determinism_configs() -> Vec<ScenarioConfig> {
    let texts = [
        "scenario = \"fisher\"\n[fisher]\nn_samples = 200\nn_trials = 100\n",
        "scenario = \"qpotential\"\n[grid]\nlower = [-2.0, -2.0]\nupper = [2.0, 2.0]\nspacing = [0.1, 0.1]\n",
        "scenario = \"energy-conservation\"\n",
        "scenario = \"trajectories\"\n[trajectories]\nn_particles = 300\ndt = 0.01\n",
        "scenario = \"double-slit\"\n[double_slit]\nn_particles = 400\ntime_steps = 80\nspacing = 0.05\nexport_paths = 10\n",
        "scenario = \"relativistic\"\n[grid]\nlower = [-1.0, -2.0]\nupper = [1.0, 2.0]\nspacing = [0.05, 0.05]\n",
    ];
    texts.iter().map(|t| ScenarioConfig::from_toml(t).expect("built-in config")).collect()
}

struct ScratchDir(PathBuf);

impl ScratchDir {
    fn new() -> Self {
        static COUNTER: AtomicUsize = AtomicUsize::new(0);
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        Self(std::env::temp_dir().join(format!("morphic-validate-{}-{n}", std::process::id())))
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Files whose bytes differ between two runs of `cfg`; the report counts.
pub fn rerun_differences(cfg: &ScenarioConfig) -> Result<usize, CliError> {
    let (a, b) = (ScratchDir::new(), ScratchDir::new());
    let ra = crate::scenarios::run_scenario(cfg, &a.0)?;
    crate::scenarios::run_scenario(cfg, &b.0)?;
    let mut names: Vec<String> = ra.manifest.iter().map(|m| m.path.clone()).collect();
    names.push("report.json".into());
    let mut diff = 0;
    for name in names {
        let x = std::fs::read(a.0.join(&name))?;
        let y = std::fs::read(b.0.join(&name)).unwrap_or_default();
        if x != y {
            diff += 1;
        }
    }
    Ok(diff)
}

fn determinism() -> Result<Vec<Check>, CliError> {
    let mut diff = 0usize;
    for cfg in determinism_configs() {
        diff += rerun_differences(&cfg)?;
    }
    // Deleting or editing any listed file must be caught by re-verification.
    let dir = ScratchDir::new();
    let cfg = ScenarioConfig::minimal(ScenarioKind::EnergyConservation);
    let report = crate::scenarios::run_scenario(&cfg, &dir.0)?;
    let mut missed = 0usize;
    for entry in &report.manifest {
        let path = dir.0.join(&entry.path);
        let bytes = std::fs::read(&path)?;
        std::fs::remove_file(&path)?;
        if crate::report::verify_manifest(&dir.0.join("report.json"))?.is_empty() {
            missed += 1;
        }
        std::fs::write(&path, &bytes)?;
    }
    if !crate::report::verify_manifest(&dir.0.join("report.json"))?.is_empty() {
        missed += 1;
    }
    Ok(vec![
        Check::new("cli_io.determinism", diff as f64, Comparator::Le, 0.0),
        Check::new("cli_io.manifest", missed as f64, Comparator::Le, 0.0),
    ])
}
