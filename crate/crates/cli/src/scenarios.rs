//! Scenario execution. Every scenario computes its results in memory first and
//! only then writes artifacts, so a failing computation leaves no files behind.

use std::path::Path;
use std::time::Instant;

use morphic_core::entropy_fisher::{cramer_rao_direction, estimators};
use morphic_core::geometrodynamics::{relativistic_quantum_potential_diagonal, signature};
use morphic_core::packets::GaussianPacket;
use morphic_core::*;
use nalgebra::DMatrix;
use serde_json::json;

use crate::config::*;
use crate::error::CliError;
use crate::report::{apply_tolerances, check_tolerance_keys, Check, Comparator, OutputDir, RunReport};
use crate::suite;

/// Check names each scenario can emit; tolerance keys are validated against these.
pub fn check_names(kind: ScenarioKind) -> Vec<&'static str> {
    match kind {
        ScenarioKind::Fisher => vec!["fisher.observer_symmetric", "fisher.observer_psd", "fisher.cramer_rao"],
        ScenarioKind::Qpotential => vec![
            "qpotential.gauge_invariance",
            "qpotential.weyl_gauge",
            "qpotential.coefficient_bridge",
            "qpotential.closed_form",
        ],
        ScenarioKind::EnergyConservation => vec!["energy.residual"],
        ScenarioKind::Trajectories => {
            vec!["trajectories.spreading_law", "trajectories.equivariance_tv", "trajectories.exited"]
        }
        ScenarioKind::DoubleSlit => {
            vec!["double_slit.axis_crossings", "double_slit.tv_distance", "double_slit.q_overlap_difference"]
        }
        ScenarioKind::Relativistic => {
            vec!["relativistic.form_agreement", "relativistic.det_law", "relativistic.signature_preserved"]
        }
        ScenarioKind::Validate => suite::all_check_names(),
    }
}

enum Artifact {
    Field(String, ScalarField),
    Json(String, serde_json::Value),
    Trajectories(String, TrajectoryEnsemble, usize),
    Histogram(String, Histogram),
    Text(String, String),
}

struct Outcome {
    checks: Vec<Check>,
    artifacts: Vec<Artifact>,
}

fn field_csv(name: &str, f: ScalarField) -> Artifact {
    Artifact::Field(name.into(), f)
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Config as echoed into the report; the output directory is left out so the
/// report does not depend on where it was written.
fn config_echo(cfg: &ScenarioConfig) -> serde_json::Value {
    let mut echo = cfg.clone();
    echo.out_dir = None;
    serde_json::to_value(&echo).expect("config serializes")
}

/// Runs `cfg`, writes its artifacts and `report.json` into `out`, and returns
/// the report. Failing checks are reported, not turned into an error here.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let names = match cfg.scenario {
        ScenarioKind::Validate => suite::check_names(&cfg.validate.clone().unwrap_or_default().filter),
        kind => check_names(kind),
    };
    check_tolerance_keys(cfg.tolerances.keys(), &names)?;
    let start = Instant::now();
    let outcome = compute(cfg)?;
    let checks = apply_tolerances(outcome.checks, &cfg.tolerances);
    let mut report = RunReport::new(cfg.scenario.name(), cfg.seed, config_echo(cfg), checks);

    let mut dir = OutputDir::create(out)?;
    for a in &outcome.artifacts {
        match a {
            Artifact::Field(name, f) => dir.write_field(name, f)?,
            Artifact::Json(name, v) => dir.write_json(name, v)?,
            Artifact::Trajectories(name, t, limit) => t.write_csv(&dir.track(name), Some(*limit))?,
            Artifact::Histogram(name, h) => h.write_csv(&dir.track(name))?,
            Artifact::Text(name, s) => dir.write_bytes(name, s.as_bytes())?,
        }
    }
    report.wall_time = start.elapsed();
    dir.finish(&mut report)?;
    Ok(report)
}

fn compute(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    match cfg.scenario {
        ScenarioKind::Fisher => fisher(cfg),
        ScenarioKind::Qpotential => qpotential(cfg),
        ScenarioKind::EnergyConservation => energy(cfg),
        ScenarioKind::Trajectories => trajectories(cfg),
        ScenarioKind::DoubleSlit => double_slit(cfg),
        ScenarioKind::Relativistic => relativistic(cfg),
        ScenarioKind::Validate => {
            let v = cfg.validate.clone().unwrap_or_default();
            let checks = suite::run_suite(&v.filter)?;
            let text: String = checks.iter().map(|c| c.line() + "\n").collect();
            Ok(Outcome { checks, artifacts: vec![Artifact::Text("checks.txt".into(), text)] })
        }
    }
}

fn fisher(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let f = cfg.fisher.clone().unwrap_or_default();
    let dist = (f.distribution != "tabulated").then(|| ParametricDistribution::from_name(&f.distribution)).transpose()?;
    let family = match dist {
        Some(d) => MicrostateFamily::from_distribution(d, &f.observers),
        None => {
            let mut fam = MicrostateFamily::new(1);
            for m in &f.tabulated {
                fam = fam.with_tabulated(m.label.clone(), m.nodes.clone(), m.counts.clone())?;
            }
            fam
        }
    };
    let entropy = entropy_vector(&family, &f.theta, cfg.constants.k_boltz)?;
    let jac = entropy_jacobian(&family, &f.theta)?;
    let observer = fisher_matrix(&family, &f.theta)?;
    let asym = (&observer.f - observer.f.transpose()).amax();
    let scale = observer.f.amax().max(1.0);
    let mut checks = vec![
        Check::new("fisher.observer_symmetric", asym, Comparator::Le, 1e-12),
        Check::new("fisher.observer_psd", observer.min_eigenvalue() / scale, Comparator::Ge, -1e-12),
    ];
    let mut summary = json!({
        "distribution": f.distribution,
        "theta": f.theta,
        "labels": entropy.labels,
        "entropy": entropy.s,
        "jacobian": matrix_rows(&jac),
        "fisher_observer": matrix_rows(&observer.f),
        "full_rank_possible": family.can_be_full_rank(),
    });
    let mut artifacts = Vec::new();

    let estimator: Option<fn(&[f64]) -> Vec<f64>> = match dist {
        Some(ParametricDistribution::Gaussian) => Some(estimators::gaussian_mle),
        Some(ParametricDistribution::Exponential) => Some(estimators::exponential_mle),
        _ => None,
    };
    if let (Some(d), Some(est)) = (dist, estimator) {
        let oracle = score_fisher_oracle(d, &f.theta)?;
        let cov = mc_estimator_covariance(d, &f.theta, est, f.n_samples, f.n_trials, cfg.seed)?;
        let bound = oracle.scaled(f.n_samples as f64);
        let (gap, dir) = cramer_rao_direction(&bound, &cov.covariance)?;
        let se = cov.directional_stderr(&dir);
        let z = if se > 0.0 { gap / se } else { gap };
        checks.push(Check::new("fisher.cramer_rao", z, Comparator::Ge, -3.0));
        summary["fisher_oracle"] = json!(matrix_rows(&oracle.f));
        summary["estimator_mean"] = json!(cov.mean.iter().copied().collect::<Vec<_>>());
        summary["estimator_covariance"] = json!(matrix_rows(&cov.covariance));
        summary["cramer_rao_gap"] = json!(gap);
        summary["cramer_rao_stderr"] = json!(se);
        let mut csv = String::from("trial");
        for k in 0..f.theta.len() {
            csv.push_str(&format!(",theta_{k}"));
        }
        csv.push('\n');
        for (i, e) in cov.estimates.iter().enumerate() {
            csv.push_str(&i.to_string());
            for v in e.iter() {
                csv.push(',');
                csv.push_str(&morphic_core::field::fmt_f64(*v));
            }
            csv.push('\n');
        }
        artifacts.push(Artifact::Text("estimates.csv".into(), csv));
    }
    artifacts.insert(0, Artifact::Json("fisher.json".into(), summary));
    Ok(Outcome { checks, artifacts })
}

/// Max over interior points of `|f − exact|`, divided by `max(1, max|exact|)`.
fn closed_form_error(f: &ScalarField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let grid = f.grid();
    let (mut err, mut scale) = (0.0f64, 1.0f64);
    for i in (0..grid.len()).filter(|i| grid.is_interior(*i, 1)) {
        let e = exact(&grid.point(i));
        err = err.max((f.get(i) - e).abs());
        scale = scale.max(e.abs());
    }
    err / scale
}

/// `max|a − b| / max|a|`, or the absolute difference when `a` vanishes.
fn normwise(a: &ScalarField, b: &ScalarField) -> Result<f64, CliError> {
    let d = a.max_abs_diff(b)?;
    let s = a.max_abs();
    Ok(if s > 0.0 { d / s } else { d })
}

/// `1e-12`, or the rounding floor `16ε/h²` relative to `max|Q|` when that is
/// larger: rescaling rounds each `W` value once and the second difference
/// amplifies it by up to `Σ|stencil|/h²`.
fn gauge_tolerance(w: &ScalarField, q: &ScalarField) -> f64 {
    let h = w.grid().axes().iter().map(|a| a.spacing).fold(f64::INFINITY, f64::min);
    let floor = 16.0 * f64::EPSILON / (h * h) / q.max_abs().max(f64::MIN_POSITIVE);
    floor.max(1e-12)
}

fn qpotential(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let q = cfg.qpotential.clone().unwrap_or_default();
    let consts = cfg.constants;
    let w = match q.w {
        WSource::Gaussian => {
            let s2 = q.sigma * q.sigma;
            ScalarField::from_fn(&cfg.grid()?, "W", |x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp())
        }
        WSource::Exponential => ScalarField::from_fn(&cfg.grid()?, "W", |x| (q.a * x[0]).exp()),
        WSource::File => ScalarField::read_csv(q.file.as_ref().expect("validated"))?,
    };
    let res = quantum_potential_w(&w, &consts, q.mode)?;
    let b = weyl_vector(&w)?;
    let lw_res = log_weight_residual(&w)?;

    let (mut dq, mut db) = (0.0f64, 0.0f64);
    for c in &q.gauge_factors {
        let cw = w.map("W", |v| c * v);
        dq = dq.max(normwise(&res.scalar, &quantum_potential_w(&cw, &consts, q.mode)?.scalar)?);
        for (orig, scaled) in b.iter().zip(weyl_vector(&cw)?) {
            db = db.max(normwise(orig, &scaled)?);
        }
    }
    let micro = quantum_potential_w(&w, &consts, QMode::Microstate)?.scalar;
    let standard = quantum_potential_w(&w, &consts, QMode::Standard)?.scalar;
    let hbar2 = consts.hbar * consts.hbar;
    let bridged = standard.map("Q", |v| 4.0 * v / hbar2);
    let mut checks = vec![
        Check::new("qpotential.gauge_invariance", dq, Comparator::Le, gauge_tolerance(&w, &res.scalar)),
        Check::new("qpotential.weyl_gauge", db, Comparator::Le, 1e-12),
        Check::new("qpotential.coefficient_bridge", normwise(&micro, &bridged)?, Comparator::Le, 1e-8),
    ];

    let n = w.grid().ndim() as f64;
    let (m, s2) = (consts.mass, q.sigma * q.sigma);
    let exact: Option<Box<dyn Fn(&[f64]) -> f64>> = match (q.w, q.mode) {
        (WSource::Gaussian, QMode::Microstate) => Some(Box::new(move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (2.0 * n / s2 - r2 / (s2 * s2)) / (2.0 * m)
        })),
        (WSource::Gaussian, QMode::Standard) => Some(Box::new(move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            hbar2 / (2.0 * m) * (n / (2.0 * s2) - r2 / (4.0 * s2 * s2))
        })),
        (WSource::Exponential, QMode::Microstate) => Some(Box::new(move |_: &[f64]| -q.a * q.a / (2.0 * m))),
        (WSource::Exponential, QMode::Standard) => Some(Box::new(move |_: &[f64]| -hbar2 * q.a * q.a / (8.0 * m))),
        (WSource::File, _) => None,
    };
    if let Some(exact) = exact {
        checks.push(Check::new("qpotential.closed_form", closed_form_error(&res.scalar, exact), Comparator::Le, 1e-3));
    }

    let mut artifacts = vec![field_csv("Q.csv", res.scalar), field_csv("log_weight_residual.csv", lw_res)];
    for (a, comp) in b.into_iter().enumerate() {
        artifacts.push(field_csv(if a == 0 { "B_x.csv" } else { "B_y.csv" }, comp));
    }
    Ok(Outcome { checks, artifacts })
}

fn energy(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let e = cfg.energy.clone().unwrap_or_default();
    let c = cfg.constants;
    let grid = cfg.grid()?;
    let (w, v, s, tol) = match e.state {
        EnergyState::HarmonicGround => {
            let (m, om, hb) = (c.mass, e.omega, c.hbar);
            let energy = 0.5 * hb * om + e.energy_offset;
            (
                ScalarField::from_fn(&grid, "rho", |x| (-m * om * x[0] * x[0] / hb).exp()),
                ScalarField::from_fn(&grid, "V", |x| 0.5 * m * om * om * x[0] * x[0]),
                FieldSeries::from_fn(&grid, "S", 0.0, e.dt, 3, |_, t| -energy * t)?,
                1e-3,
            )
        }
        EnergyState::PlaneWave => {
            let p = e.momentum;
            let energy = p * p / (2.0 * c.mass) + e.energy_offset;
            (
                ScalarField::constant(&grid, "rho", 1.0),
                ScalarField::constant(&grid, "V", 0.0),
                FieldSeries::from_fn(&grid, "S", 0.0, e.dt, 3, |x, t| p * x[0] - energy * t)?,
                1e-12,
            )
        }
    };
    let residual = hj_energy_residual(&s, &w, &v, &c, e.mode)?;
    let value = match e.state {
        EnergyState::HarmonicGround => residual.max_abs_interior(1),
        EnergyState::PlaneWave => residual.max_abs(),
    };
    let q = quantum_potential_w(&w, &c, e.mode)?.scalar;
    let s_now = s.slice(s.eval_index()).clone();
    Ok(Outcome {
        checks: vec![Check::new("energy.residual", value, Comparator::Le, tol)],
        artifacts: vec![field_csv("residual.csv", residual), field_csv("Q.csv", q), field_csv("rho.csv", w), field_csv("S.csv", s_now)],
    })
}

fn trajectories(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let t = cfg.trajectories.clone().unwrap_or_default();
    let c = cfg.constants;
    let grid = cfg.grid()?;
    let packet = GaussianPacket::new(t.x0, t.sigma, t.k0, &c)?;
    let ax = *grid.axis(0);
    let domain = vec![(ax.origin, ax.upper())];
    let guidance = match t.guidance {
        GuidanceKind::Analytic => {
            GuidanceField::from_phase_gradient(domain, 0.0, move |x, s| vec![c.mass * packet.velocity(x[0], s)])?
        }
        GuidanceKind::Grid => {
            let slices = (t.t_final / t.dt).ceil() as usize + 1;
            let dt = t.t_final / (slices - 1) as f64;
            GuidanceField::from_series(FieldSeries::from_fn(&grid, "S", 0.0, dt, slices, |x, s| {
                packet.phase(x[0], s)
            })?)
        }
    };
    let rho0 = ScalarField::from_fn(&grid, "rho", |x| packet.density(x[0], 0.0));
    let init = InitialEnsemble::Sampled { density: rho0, count: t.n_particles, seed: cfg.seed, symmetric: false };
    let ens = bohmian_trajectories(&guidance, &c, &init, t.dt, t.t_final)?;
    let tf = ens.t_final();

    let (mut err, mut spread) = (0.0f64, 0.0f64);
    for i in 0..ens.len() {
        let exact = packet.trajectory(ens.position(i, 0)[0], tf);
        err = err.max((ens.final_position(i)[0] - exact).abs());
        spread = spread.max((exact - packet.center(tf)).abs());
    }
    let hist = Histogram::new(ax.origin, ax.upper(), t.bins, (0..ens.len()).map(|i| ens.final_position(i)[0]))?;
    let tv = hist.tv_distance(&hist.reference_probabilities(|x| packet.density(x, tf)))?;
    let exited = ens.exited.iter().filter(|e| **e).count();
    let checks = vec![
        Check::new("trajectories.spreading_law", err / spread.max(f64::MIN_POSITIVE), Comparator::Le, 1e-3),
        Check::new("trajectories.equivariance_tv", tv, Comparator::Lt, 0.05),
        Check::new("trajectories.exited", exited as f64, Comparator::Le, 0.0),
    ];
    let rho_final = ScalarField::from_fn(&grid, "rho", |x| packet.density(x[0], tf));
    Ok(Outcome {
        checks,
        artifacts: vec![
            Artifact::Trajectories("trajectories.csv".into(), ens, t.export_paths),
            Artifact::Histogram("histogram.csv".into(), hist),
            field_csv("rho_final.csv", rho_final),
        ],
    })
}

fn double_slit(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let d = cfg.double_slit.clone().unwrap_or_default();
    let r = double_slit_scenario(&d.params.with_seed(cfg.seed), &cfg.constants)?;
    let exited = r.trajectories.exited.iter().filter(|e| **e).count();
    let checks = vec![
        Check::new("double_slit.axis_crossings", r.axis_crossings as f64, Comparator::Le, 0.0),
        Check::new("double_slit.tv_distance", r.tv_distance, Comparator::Lt, 0.05),
        Check::new("double_slit.q_overlap_difference", r.q_overlap_difference, Comparator::Gt, 0.0),
    ];
    let summary = json!({
        "t_screen": r.t_screen,
        "tv_distance": r.tv_distance,
        "axis_crossings": r.axis_crossings,
        "q_overlap_difference": r.q_overlap_difference,
        "exited": exited,
        "reference_probabilities": r.reference,
    });
    Ok(Outcome {
        checks,
        artifacts: vec![
            Artifact::Json("double_slit.json".into(), summary),
            field_csv("rho_initial.csv", r.rho_initial),
            field_csv("rho_screen.csv", r.rho_screen),
            field_csv("psi_re_screen.csv", r.psi_re_screen),
            field_csv("psi_im_screen.csv", r.psi_im_screen),
            field_csv("q_two_slit.csv", r.q_two_slit),
            field_csv("q_one_slit.csv", r.q_one_slit),
            Artifact::Trajectories("trajectories.csv".into(), r.trajectories, d.export_paths),
            Artifact::Histogram("histogram.csv".into(), r.histogram),
        ],
    })
}

/// Microstate potential with `W = |ψ|²` evaluated slice by slice in time.
fn microstate_q(abs_psi: &ScalarField, consts: &PhysicalConstants) -> Result<ScalarField, CliError> {
    let grid = abs_psi.grid();
    let space = Grid::new(vec![*grid.axis(1)])?;
    let nx = space.len();
    let mut values = Vec::with_capacity(grid.len());
    for k in 0..grid.axis(0).len {
        let w: Vec<f64> = (0..nx).map(|i| abs_psi.at(&[k, i]).powi(2)).collect();
        let w = ScalarField::new(space.clone(), w, "W")?;
        values.extend_from_slice(quantum_potential_w(&w, consts, QMode::Microstate)?.scalar.values());
    }
    Ok(ScalarField::new(grid.clone(), values, "Q")?)
}

fn relativistic(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let r = cfg.relativistic.clone().unwrap_or_default();
    let c = cfg.constants;
    let metric = match &r.metric {
        Some(path) => {
            let m = SpacetimeMetric::from_json_file(path)?;
            if cfg.grid.is_some() && !m.grid().same_as(&cfg.grid()?) {
                return Err(CliError::Config("metric axes differ from [grid]".into()));
            }
            if m.grid().ndim() != 2 {
                return Err(CliError::Config("metric must live on a (t, x) grid".into()));
            }
            m
        }
        None => SpacetimeMetric::minkowski(&cfg.grid()?, r.dim)?,
    };
    let grid = metric.grid().clone();
    let s2 = r.sigma * r.sigma;
    let psi = ScalarField::from_fn(&grid, "abs_psi", |p| match r.psi {
        PsiShape::StaticGaussian => (-p[1] * p[1] / (2.0 * s2)).exp(),
        PsiShape::TemporalGaussian => (-p[0] * p[0] / (2.0 * s2)).exp(),
        PsiShape::Gaussian => (-(p[0] * p[0] + p[1] * p[1]) / (2.0 * s2)).exp(),
    });
    let q = match r.q_source {
        QSource::Relativistic => relativistic_quantum_potential_diagonal(&psi, &metric, &c)?,
        QSource::Microstate => microstate_q(&psi, &c)?,
    };
    let mass = quantum_mass(&q, c.mass)?;
    let tilde = conformal_metric(&metric, &q)?;
    let mc = c.mass * c.c;
    let p0 = (mc * mc + r.momentum * r.momentum).sqrt();
    let s = ScalarField::from_fn(&grid, "S", |p| p0 * c.c * p[0] + r.momentum * p[1]);
    let orig = kg_hj_residual(&metric, &s, &q, &c, KgForm::Original)?;
    let conf = kg_hj_residual(&metric, &s, &q, &c, KgForm::Conformal)?;

    let dim = metric.dim();
    let (mut agree, mut det_err, mut flipped) = (0.0f64, 0.0f64, 0usize);
    for p in 0..grid.len() {
        agree = agree.max((orig.get(p) - conf.get(p)).abs() / orig.get(p).abs().max(1.0));
        let want = (dim as f64 * q.get(p)).exp() * metric.at(p).determinant();
        det_err = det_err.max((tilde.at(p).determinant() / want - 1.0).abs());
        if signature(tilde.at(p)) != signature(metric.at(p)) {
            flipped += 1;
        }
    }
    let checks = vec![
        Check::new("relativistic.form_agreement", agree, Comparator::Le, 1e-12),
        Check::new("relativistic.det_law", det_err, Comparator::Le, 1e-10),
        Check::new("relativistic.signature_preserved", flipped as f64, Comparator::Le, 0.0),
    ];
    Ok(Outcome {
        checks,
        artifacts: vec![
            field_csv("Q.csv", q),
            field_csv("M2.csv", mass.m_squared),
            field_csv("S.csv", s),
            field_csv("residual_original.csv", orig),
            field_csv("residual_conformal.csv", conf),
        ],
    })
}
