//! Bohmian guidance trajectories `dx/dt = ∇S/m` and the two-slit scenario.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy_fisher::trial_rng;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, Axis, FieldSeries, Grid, ScalarField};
use crate::packets::{GaussianPacket, PacketSuperposition};
use crate::quantum_potential::{quantum_potential_w, PhysicalConstants, QMode};

type GradFn = dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Source {
    Series { series: FieldSeries, grads: Vec<Vec<ScalarField>> },
    Analytic { grad: Arc<GradFn> },
}

/// Phase gradient `∇S(x, t)` on a rectangular domain.
#[derive(Clone)]
pub struct GuidanceField {
    source: Source,
    domain: Vec<(f64, f64)>,
    t0: f64,
}

impl fmt::Debug for GuidanceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.source {
            Source::Series { .. } => "series",
            Source::Analytic { .. } => "analytic",
        };
        f.debug_struct("GuidanceField").field("kind", &kind).field("domain", &self.domain).field("t0", &self.t0).finish()
    }
}

fn check_domain(domain: &[(f64, f64)]) -> Result<()> {
    if domain.is_empty() || domain.len() > 2 {
        return Err(Error::InvalidParameter(format!("guidance domain has {} axes", domain.len())));
    }
    if domain.iter().any(|(lo, hi)| !(hi > lo) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid guidance domain {domain:?}")));
    }
    Ok(())
}

impl GuidanceField {
    /// Phase sampled on a grid at evenly spaced times. `∇S` is interpolated
    /// (bi)linearly in space and linearly in time.
    pub fn from_series(series: FieldSeries) -> Self {
        let grads = series.slices().iter().map(|s| s.gradient()).collect();
        let domain = series.grid().axes().iter().map(|a| (a.origin, a.upper())).collect();
        let t0 = series.t0();
        Self { source: Source::Series { series, grads }, domain, t0 }
    }

    /// Analytic `∇S(x, t)`.
    pub fn from_phase_gradient<F>(domain: Vec<(f64, f64)>, t0: f64, grad: F) -> Result<Self>
    where
        F: Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    {
        check_domain(&domain)?;
        Ok(Self { source: Source::Analytic { grad: Arc::new(grad) }, domain, t0 })
    }

    /// Analytic phase `S(x, t)`, differentiated by central differences.
    pub fn from_phase<F>(domain: Vec<(f64, f64)>, t0: f64, phase: F) -> Result<Self>
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_phase_gradient(domain, t0, move |x, t| {
            (0..x.len())
                .map(|a| {
                    let h = 1e-5 * x[a].abs().max(1.0);
                    let mut up = x.to_vec();
                    let mut down = x.to_vec();
                    up[a] += h;
                    down[a] -= h;
                    (phase(&up, t) - phase(&down, t)) / (2.0 * h)
                })
                .collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    fn t_max(&self) -> f64 {
        match &self.source {
            Source::Series { series, .. } => series.t_end(),
            Source::Analytic { .. } => f64::INFINITY,
        }
    }

    fn inside(&self, x: &[f64]) -> bool {
        self.domain.iter().zip(x).all(|((lo, hi), v)| v >= lo && v <= hi)
    }

    fn clamp(&self, x: &mut [f64]) {
        for ((lo, hi), v) in self.domain.iter().zip(x.iter_mut()) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// `∇S(x, t)`, or `None` outside the domain.
    pub fn phase_gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        if !self.inside(x) {
            return None;
        }
        match &self.source {
            Source::Analytic { grad } => Some(grad(x, t)),
            Source::Series { series, grads } => {
                let n = series.len();
                let s = ((t - series.t0()) / series.dt()).clamp(0.0, (n - 1) as f64);
                let k = (s.floor() as usize).min(n - 2);
                let frac = s - k as f64;
                grads[k]
                    .iter()
                    .zip(&grads[k + 1])
                    .map(|(a, b)| Some((1.0 - frac) * a.interpolate(x)? + frac * b.interpolate(x)?))
                    .collect()
            }
        }
    }
}

/// Starting positions for a trajectory ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialEnsemble {
    Explicit(Vec<Vec<f64>>),
    /// Inverse-CDF draws from a 1D density (piecewise linear between grid
    /// points). Particle `i` draws from stream `i` of `seed`; with `symmetric`
    /// each draw is paired with its mirror image about the grid centre.
    Sampled { density: ScalarField, count: usize, seed: u64, symmetric: bool },
}

/// Uniform draw in the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

struct InverseCdf {
    origin: f64,
    h: f64,
    rho: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(density: &ScalarField) -> Result<Self> {
        if density.grid().ndim() != 1 {
            return Err(Error::InvalidParameter("sampling needs a 1D density".into()));
        }
        if let Some(index) = density.values().iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::NonPositiveField {
                name: density.name().into(),
                index,
                value: density.get(index),
            });
        }
        let ax = density.grid().axis(0);
        let rho = density.values().to_vec();
        let mut cdf = vec![0.0; rho.len()];
        for i in 1..rho.len() {
            cdf[i] = cdf[i - 1] + 0.5 * ax.spacing * (rho[i - 1] + rho[i]);
        }
        if !(cdf[rho.len() - 1] > 0.0) {
            return Err(Error::InvalidParameter("density integrates to zero".into()));
        }
        Ok(Self { origin: ax.origin, h: ax.spacing, rho, cdf })
    }

    fn sample(&self, u: f64) -> f64 {
        let target = u * self.cdf[self.cdf.len() - 1];
        let i = (self.cdf.partition_point(|c| *c <= target).max(1) - 1).min(self.rho.len() - 2);
        let r = target - self.cdf[i];
        let (r0, r1) = (self.rho[i], self.rho[i + 1]);
        let a = (r1 - r0) / (2.0 * self.h);
        // Solve r0·s + a·s² = r for the offset s within the cell.
        let disc = (r0 * r0 + 4.0 * a * r).max(0.0);
        let s = if r0 + disc.sqrt() > 0.0 { 2.0 * r / (r0 + disc.sqrt()) } else { 0.0 };
        self.origin + (i as f64 + (s / self.h).clamp(0.0, 1.0)) * self.h
    }
}

impl InitialEnsemble {
    /// Starting positions and the seed used, if any.
    pub fn positions(&self) -> Result<(Vec<Vec<f64>>, Option<u64>)> {
        match self {
            InitialEnsemble::Explicit(p) => {
                if p.is_empty() {
                    return Err(Error::EmptyEnsemble);
                }
                Ok((p.clone(), None))
            }
            InitialEnsemble::Sampled { density, count, seed, symmetric } => {
                if *count == 0 {
                    return Err(Error::EmptyEnsemble);
                }
                let inv = InverseCdf::new(density)?;
                let ax = density.grid().axis(0);
                let centre = 0.5 * (ax.origin + ax.upper());
                let pairs = if *symmetric { count / 2 } else { 0 };
                let mut out = Vec::with_capacity(*count);
                for k in 0..pairs {
                    let x = inv.sample(open_unit(&mut trial_rng(*seed, k as u64)));
                    out.push(vec![x]);
                    out.push(vec![2.0 * centre - x]);
                }
                for i in 2 * pairs..*count {
                    let stream = if *symmetric { pairs + (i - 2 * pairs) } else { i };
                    out.push(vec![inv.sample(open_unit(&mut trial_rng(*seed, stream as u64)))]);
                }
                Ok((out, Some(*seed)))
            }
        }
    }
}

/// Particle paths on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub dim: usize,
    /// `paths[i]` holds `times.len() × dim` coordinates, time-major.
    pub paths: Vec<Vec<f64>>,
    /// Particles that reached the domain boundary and were frozen there.
    pub exited: Vec<bool>,
    pub dt: f64,
    pub seed: Option<u64>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().expect("at least one time")
    }

    pub fn position(&self, particle: usize, step: usize) -> &[f64] {
        &self.paths[particle][step * self.dim..(step + 1) * self.dim]
    }

    pub fn final_position(&self, particle: usize) -> &[f64] {
        self.position(particle, self.times.len() - 1)
    }

    /// Number of sign changes of `x_axis − centre` summed over all paths.
    pub fn axis_crossings(&self, axis: usize, centre: f64) -> usize {
        self.paths
            .iter()
            .map(|p| {
                let signs: Vec<f64> = p.chunks(self.dim).map(|x| x[axis] - centre).filter(|v| *v != 0.0).collect();
                signs.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
            })
            .sum()
    }

    /// Writes `t,particle_id,x[,y]` rows for the first `limit` particles (all when `None`).
    pub fn write_csv(&self, path: &Path, limit: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let mut header = vec!["t", "particle_id", "x"];
        if self.dim == 2 {
            header.push("y");
        }
        w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
        let count = limit.unwrap_or(self.len()).min(self.len());
        for i in 0..count {
            for (k, t) in self.times.iter().enumerate() {
                let mut row = vec![fmt_f64(*t), i.to_string()];
                row.extend(self.position(i, k).iter().map(|v| fmt_f64(*v)));
                w.write_record(&row).map_err(|e| Error::Format(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn rk4_step(field: &GuidanceField, x: &[f64], t: f64, dt: f64, inv_m: f64) -> Option<Vec<f64>> {
    let vel = |p: &[f64], s: f64| field.phase_gradient(p, s).map(|g| g.into_iter().map(|v| v * inv_m).collect::<Vec<_>>());
    let shift = |k: &[f64], f: f64| x.iter().zip(k).map(|(a, b)| a + f * b).collect::<Vec<_>>();
    let k1 = vel(x, t)?;
    let k2 = vel(&shift(&k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = vel(&shift(&k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = vel(&shift(&k3, dt), t + dt)?;
    let next: Vec<f64> = (0..x.len()).map(|a| x[a] + dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])).collect();
    field.inside(&next).then_some(next)
}

/// Integrates `dx/dt = ∇S/m` with classical fourth-order Runge–Kutta from
/// `guidance.t0()` to `t_final`. The step is shortened, if needed, so that a
/// whole number of steps lands on `t_final`. A particle whose step would leave
/// the domain is clamped to the boundary and frozen.
pub fn bohmian_trajectories(
    guidance: &GuidanceField,
    consts: &PhysicalConstants,
    initial: &InitialEnsemble,
    dt: f64,
    t_final: f64,
) -> Result<TrajectoryEnsemble> {
    consts.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::StepInvalid(dt));
    }
    let t0 = guidance.t0();
    let span = t_final - t0;
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_final {t_final} must exceed start time {t0}")));
    }
    if t_final > guidance.t_max() + 1e-9 * span {
        return Err(Error::InvalidParameter(format!(
            "t_final {t_final} is past the last phase slice {}",
            guidance.t_max()
        )));
    }
    let (starts, seed) = initial.positions()?;
    let dim = guidance.dim();
    if let Some(bad) = starts.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch(format!("start position {bad:?} in a {dim}D field")));
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| if k == steps { t_final } else { t0 + k as f64 * h }).collect();
    let inv_m = 1.0 / consts.mass;

    let (paths, exited): (Vec<Vec<f64>>, Vec<bool>) = starts
        .par_iter()
        .map(|start| {
            let mut path = Vec::with_capacity((steps + 1) * dim);
            let mut x = start.clone();
            let mut frozen = !guidance.inside(&x);
            if frozen {
                guidance.clamp(&mut x);
            }
            path.extend_from_slice(&x);
            for &t in &times[..steps] {
                if !frozen {
                    match rk4_step(guidance, &x, t, h, inv_m) {
                        Some(next) => x = next,
                        None => {
                            let v = guidance.phase_gradient(&x, t).unwrap_or_else(|| vec![0.0; dim]);
                            for a in 0..dim {
                                x[a] += h * v[a] * inv_m;
                            }
                            guidance.clamp(&mut x);
                            frozen = true;
                        }
                    }
                }
                path.extend_from_slice(&x);
            }
            (path, frozen)
        })
        .unzip();
    Ok(TrajectoryEnsemble { times, dim, paths, exited, dt: h, seed })
}

/// Equal-width histogram on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Number of samples offered, including any outside the range.
    pub total: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::InvalidParameter(format!("histogram [{lo}, {hi}] with {bins} bins")));
        }
        let mut counts = vec![0u64; bins];
        let mut total = 0;
        let width = (hi - lo) / bins as f64;
        for x in samples {
            total += 1;
            if x >= lo && x <= hi {
                let b = (((x - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
        }
        Ok(Self { lo, hi, counts, total })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width()
    }

    /// Fraction of all samples in each bin.
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.total.max(1) as f64).collect()
    }

    /// Density estimate `count / (total · width)`.
    pub fn normalized(&self) -> Vec<f64> {
        let w = self.width();
        self.probabilities().into_iter().map(|p| p / w).collect()
    }

    /// Mass of `density` in each bin by composite Simpson quadrature.
    pub fn reference_probabilities(&self, density: impl Fn(f64) -> f64) -> Vec<f64> {
        const SUB: usize = 64;
        let w = self.width();
        let h = w / SUB as f64;
        (0..self.bins())
            .map(|b| {
                let a = self.lo + b as f64 * w;
                let s: f64 = (0..=SUB)
                    .map(|i| {
                        let c = if i == 0 || i == SUB {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        c * density(a + i as f64 * h)
                    })
                    .sum();
                s * h / 3.0
            })
            .collect()
    }

    /// `½ Σ |p_b − q_b|` against reference bin masses.
    pub fn tv_distance(&self, reference: &[f64]) -> Result<f64> {
        if reference.len() != self.bins() {
            return Err(Error::DimensionMismatch(format!(
                "{} reference bins for {} histogram bins",
                reference.len(),
                self.bins()
            )));
        }
        Ok(0.5 * self.probabilities().iter().zip(reference).map(|(p, q)| (p - q).abs()).sum::<f64>())
    }

    /// Writes `bin_center,count,normalized`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["bin_center", "count", "normalized"]).map_err(err)?;
        for (b, n) in self.normalized().into_iter().enumerate() {
            w.write_record([fmt_f64(self.center(b)), self.counts[b].to_string(), fmt_f64(n)]).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two Gaussian slits on the transverse axis; the longitudinal motion is
/// uniform, so the screen is reached at `t = L·m/p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleSlitParams {
    pub separation: f64,
    pub slit_width: f64,
    pub momentum: f64,
    pub screen_distance: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Transverse grid covers `[−half_width, half_width]`.
    pub half_width: f64,
    pub spacing: f64,
    pub time_steps: usize,
    pub bins: usize,
    /// Time slices of the quantum-potential field between launch and screen.
    pub q_slices: usize,
}

impl Default for DoubleSlitParams {
    fn default() -> Self {
        Self {
            separation: 5.0,
            slit_width: 0.5,
            momentum: 10.0,
            screen_distance: 20.0,
            n_particles: 10_000,
            seed: 42,
            half_width: 15.0,
            spacing: 0.02,
            time_steps: 400,
            bins: 32,
            q_slices: 21,
        }
    }
}

impl DoubleSlitParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("separation", self.separation),
            ("slit_width", self.slit_width),
            ("momentum", self.momentum),
            ("screen_distance", self.screen_distance),
            ("half_width", self.half_width),
            ("spacing", self.spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_particles == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if self.time_steps == 0 || self.bins == 0 {
            return Err(Error::InvalidParameter("time_steps and bins must be ≥ 1".into()));
        }
        if self.q_slices < crate::field::MIN_POINTS {
            return Err(Error::InvalidParameter(format!("q_slices must be ≥ {}", crate::field::MIN_POINTS)));
        }
        if self.separation / 2.0 >= self.half_width {
            return Err(Error::InvalidParameter("slits lie outside the transverse grid".into()));
        }
        Ok(())
    }

    pub fn t_screen(&self, consts: &PhysicalConstants) -> f64 {
        self.screen_distance * consts.mass / self.momentum
    }
}

#[derive(Debug, Clone)]
pub struct DoubleSlitResult {
    pub t_screen: f64,
    pub rho_initial: ScalarField,
    pub rho_screen: ScalarField,
    pub psi_re_screen: ScalarField,
    pub psi_im_screen: ScalarField,
    /// Standard-mode quantum potential on a `(t, x)` grid, both slits open.
    pub q_two_slit: ScalarField,
    /// The same with one slit closed.
    pub q_one_slit: ScalarField,
    pub trajectories: TrajectoryEnsemble,
    pub histogram: Histogram,
    pub reference: Vec<f64>,
    pub tv_distance: f64,
    pub axis_crossings: usize,
    /// `max |Q_two − Q_one|` at the screen where both densities exceed 1e-3 of their peak.
    pub q_overlap_difference: f64,
}

fn q_spacetime(state: &PacketSuperposition, grid: &Grid, times: &Axis, consts: &PhysicalConstants) -> Result<ScalarField> {
    let plane = Grid::plane(*times, *grid.axis(0))?;
    let mut values = Vec::with_capacity(plane.len());
    for t in times.coords() {
        let rho = ScalarField::from_fn(grid, "rho", |x| state.density(x[0], t));
        values.extend_from_slice(quantum_potential_w(&rho, consts, QMode::Standard)?.scalar.values());
    }
    ScalarField::new(plane, values, "Q")
}

pub fn double_slit_scenario(params: &DoubleSlitParams, consts: &PhysicalConstants) -> Result<DoubleSlitResult> {
    params.validate()?;
    consts.validate()?;
    let t_screen = params.t_screen(consts);
    let half = params.separation / 2.0;
    let upper = GaussianPacket::new(half, params.slit_width, 0.0, consts)?;
    let lower = GaussianPacket::new(-half, params.slit_width, 0.0, consts)?;
    let two = Arc::new(PacketSuperposition::new(vec![lower, upper])?);
    let one = PacketSuperposition::new(vec![upper])?;

    let axis = Axis::from_range(-params.half_width, params.half_width, params.spacing)?;
    let grid = Grid::new(vec![axis])?;
    let rho_initial = ScalarField::from_fn(&grid, "rho", |x| two.density(x[0], 0.0));
    let rho_screen = ScalarField::from_fn(&grid, "rho", |x| two.density(x[0], t_screen));
    let psi_re_screen = ScalarField::from_fn(&grid, "psi_re", |x| two.psi(x[0], t_screen).re);
    let psi_im_screen = ScalarField::from_fn(&grid, "psi_im", |x| two.psi(x[0], t_screen).im);

    let times = Axis::new(0.0, t_screen / (params.q_slices - 1) as f64, params.q_slices)?;
    let q_two_slit = q_spacetime(&two, &grid, &times, consts)?;
    let q_one_slit = q_spacetime(&one, &grid, &times, consts)?;

    let last = (params.q_slices - 1) * grid.len();
    let rho_one_screen = ScalarField::from_fn(&grid, "rho", |x| one.density(x[0], t_screen));
    let (peak_two, peak_one) = (rho_screen.max_abs(), rho_one_screen.max_abs());
    let q_overlap_difference = (0..grid.len())
        .filter(|&i| rho_screen.get(i) > 1e-3 * peak_two && rho_one_screen.get(i) > 1e-3 * peak_one)
        .map(|i| (q_two_slit.get(last + i) - q_one_slit.get(last + i)).abs())
        .fold(0.0, f64::max);

    let state = Arc::clone(&two);
    let mass = consts.mass;
    let guidance = GuidanceField::from_phase_gradient(
        vec![(-params.half_width, params.half_width)],
        0.0,
        move |x, t| vec![mass * state.velocity(x[0], t)],
    )?;
    let initial = InitialEnsemble::Sampled {
        density: rho_initial.clone(),
        count: params.n_particles,
        seed: params.seed,
        symmetric: true,
    };
    let trajectories =
        bohmian_trajectories(&guidance, consts, &initial, t_screen / params.time_steps as f64, t_screen)?;
    let arrivals = (0..trajectories.len()).map(|i| trajectories.final_position(i)[0]);
    let histogram = Histogram::new(-params.half_width, params.half_width, params.bins, arrivals)?;
    let reference = histogram.reference_probabilities(|x| two.density(x, t_screen));
    let tv_distance = histogram.tv_distance(&reference)?;
    let axis_crossings = trajectories.axis_crossings(0, 0.0);

    Ok(DoubleSlitResult {
        t_screen,
        rho_initial,
        rho_screen,
        psi_re_screen,
        psi_im_screen,
        q_two_slit,
        q_one_slit,
        trajectories,
        histogram,
        reference,
        tv_distance,
        axis_crossings,
        q_overlap_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn plane_wave_paths_are_straight() {
        let g = Grid::line(-10.0, 0.05, 401).unwrap();
        let p = 0.75;
        let series = FieldSeries::from_fn(&g, "S", 0.0, 0.5, 5, |x, t| p * x[0] - p * p / 2.0 * t).unwrap();
        let field = GuidanceField::from_series(series);
        let init = InitialEnsemble::Explicit(vec![vec![-1.0], vec![0.3], vec![2.0]]);
        let ens = bohmian_trajectories(&field, &consts(), &init, 0.01, 2.0).unwrap();
        for i in 0..3 {
            let x0 = ens.position(i, 0)[0];
            for (k, t) in ens.times.iter().enumerate() {
                assert!((ens.position(i, k)[0] - (x0 + p * t)).abs() < 1e-10);
            }
        }
        assert!(ens.exited.iter().all(|e| !e));
    }

    #[test]
    fn static_phase_keeps_particles_still() {
        let g = Grid::line(-5.0, 0.1, 101).unwrap();
        let series = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 3, |_, t| -0.5 * t).unwrap();
        let field = GuidanceField::from_series(series);
        let init = InitialEnsemble::Explicit(vec![vec![-1.3], vec![4.2]]);
        let ens = bohmian_trajectories(&field, &consts(), &init, 0.05, 2.0).unwrap();
        assert_eq!(ens.final_position(0), &[-1.3]);
        assert_eq!(ens.final_position(1), &[4.2]);
    }

    #[test]
    fn free_packet_follows_spreading_law() {
        let c = consts();
        let packet = GaussianPacket::new(0.0, 0.5, 0.0, &c).unwrap();
        let field =
            GuidanceField::from_phase_gradient(vec![(-20.0, 20.0)], 0.0, move |x, t| vec![packet.velocity(x[0], t)])
                .unwrap();
        let starts = vec![vec![0.2], vec![-0.7], vec![1.1]];
        let ens = bohmian_trajectories(&field, &c, &InitialEnsemble::Explicit(starts.clone()), 1e-3, 1.0).unwrap();
        for (i, s) in starts.iter().enumerate() {
            let exact = s[0] * (1.0 + 1.0 / (4.0 * 0.5f64.powi(4))).sqrt();
            assert!((ens.final_position(i)[0] / exact - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn phase_function_guidance_uses_differences() {
        let c = consts();
        let packet = GaussianPacket::new(0.0, 0.5, 0.3, &c).unwrap();
        let field = GuidanceField::from_phase(vec![(-20.0, 20.0)], 0.0, move |x, t| packet.phase(x[0], t)).unwrap();
        let ens = bohmian_trajectories(&field, &c, &InitialEnsemble::Explicit(vec![vec![0.4]]), 1e-3, 1.0).unwrap();
        assert!((ens.final_position(0)[0] - packet.trajectory(0.4, 1.0)).abs() < 1e-6);
    }

    #[test]
    fn particles_leaving_the_grid_are_frozen() {
        let g = Grid::line(0.0, 0.1, 11).unwrap();
        let series = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 2, |x, _| 2.0 * x[0]).unwrap();
        let field = GuidanceField::from_series(series);
        let init = InitialEnsemble::Explicit(vec![vec![0.5], vec![0.9]]);
        let ens = bohmian_trajectories(&field, &consts(), &init, 0.1, 1.0).unwrap();
        assert_eq!(ens.exited, vec![true, true]);
        assert_eq!(ens.final_position(0), &[1.0]);
    }

    #[test]
    fn errors() {
        let g = Grid::line(0.0, 0.1, 11).unwrap();
        let series = FieldSeries::from_fn(&g, "S", 0.0, 1.0, 2, |x, _| x[0]).unwrap();
        let field = GuidanceField::from_series(series);
        let one = InitialEnsemble::Explicit(vec![vec![0.5]]);
        assert_eq!(bohmian_trajectories(&field, &consts(), &one, 0.0, 1.0), Err(Error::StepInvalid(0.0)));
        let empty = InitialEnsemble::Explicit(vec![]);
        assert_eq!(bohmian_trajectories(&field, &consts(), &empty, 0.1, 1.0), Err(Error::EmptyEnsemble));
        assert!(bohmian_trajectories(&field, &consts(), &one, 0.1, 2.0).is_err());
    }

    #[test]
    fn sampling_is_seeded_and_interior() {
        let g = Grid::line(-5.0, 0.01, 1001).unwrap();
        let rho = ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0] / 2.0).exp());
        let init = InitialEnsemble::Sampled { density: rho, count: 2001, seed: 9, symmetric: true };
        let (a, seed) = init.positions().unwrap();
        let (b, _) = init.positions().unwrap();
        assert_eq!(a, b);
        assert_eq!(seed, Some(9));
        assert_eq!(a.len(), 2001);
        assert!(a.iter().all(|p| p[0] > -5.0 && p[0] < 5.0));
        assert_eq!(a[0][0], -a[1][0]);
        let mean = a.iter().map(|p| p[0]).sum::<f64>() / a.len() as f64;
        let var = a.iter().map(|p| p[0] * p[0]).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 0.05 && (var - 1.0).abs() < 0.1, "{mean} {var}");
    }

    #[test]
    fn inverse_cdf_is_exact_for_linear_density() {
        let g = Grid::line(0.0, 0.25, 5).unwrap();
        let rho = ScalarField::from_fn(&g, "rho", |x| 2.0 * x[0]);
        let inv = InverseCdf::new(&rho).unwrap();
        for u in [0.01, 0.25, 0.5, 0.9] {
            assert!((inv.sample(u) - u.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_basics() {
        let h = Histogram::new(0.0, 1.0, 4, [0.1, 0.3, 0.35, 0.99, 1.0, 2.0]).unwrap();
        assert_eq!(h.counts, vec![1, 2, 0, 2]);
        assert_eq!(h.total, 6);
        let reference = h.reference_probabilities(|_| 1.0);
        assert!((reference[0] - 0.25).abs() < 1e-14);
        assert!(h.tv_distance(&[0.25; 3]).is_err());
        assert!(Histogram::new(1.0, 0.0, 4, []).is_err());
    }

    #[test]
    fn double_slit_small_run() {
        let params = DoubleSlitParams { n_particles: 400, time_steps: 100, spacing: 0.05, ..Default::default() };
        let r = double_slit_scenario(&params, &consts()).unwrap();
        assert_eq!(r.axis_crossings, 0);
        assert!(r.q_overlap_difference > 0.0);
        assert_eq!(r.trajectories.len(), 400);
        assert!((r.reference.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let bad = DoubleSlitParams { separation: -1.0, ..Default::default() };
        assert!(double_slit_scenario(&bad, &consts()).is_err());
    }
}
