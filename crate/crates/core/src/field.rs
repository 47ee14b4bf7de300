//! Scalar fields on uniform 1D/2D Cartesian grids.
//!
//! Values are stored row-major: the last axis varies fastest. All stencils are
//! second order, central in the interior and one-sided at the boundaries, with
//! no ghost cells.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of points per axis, so one-sided four-point stencils fit.
pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(origin: f64, spacing: f64, len: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("axis spacing must be positive, got {spacing}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidParameter(format!("axis origin must be finite, got {origin}")));
        }
        if len < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "axis needs at least {MIN_POINTS} points, got {len}"
            )));
        }
        Ok(Self { origin, spacing, len })
    }

    /// Axis covering `[lower, upper]` with the given spacing; the span must be
    /// a whole number of steps (within 1e-9 relative).
    pub fn from_range(lower: f64, upper: f64, spacing: f64) -> Result<Self> {
        if !(upper > lower) {
            return Err(Error::InvalidParameter(format!("empty axis range [{lower}, {upper}]")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("axis spacing must be positive, got {spacing}")));
        }
        let steps = (upper - lower) / spacing;
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "range [{lower}, {upper}] is not a multiple of spacing {spacing}"
            )));
        }
        Self::new(lower, spacing, rounded as usize + 1)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn upper(&self) -> f64 {
        self.coord(self.len - 1)
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.coord(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "grids have 1 or 2 axes, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            Axis::new(a.origin, a.spacing, a.len)?;
        }
        Ok(Self { axes })
    }

    pub fn line(origin: f64, spacing: f64, len: usize) -> Result<Self> {
        Self::new(vec![Axis::new(origin, spacing, len)?])
    }

    pub fn plane(first: Axis, second: Axis) -> Result<Self> {
        Self::new(vec![first, second])
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.len).product()
    }

    /// Index along `axis` of a flat index.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.axes[axis].len
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().enumerate().map(|(a, i)| i * self.stride(a)).sum()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        (0..self.ndim()).map(|a| self.axes[a].coord(self.axis_index(flat, a))).collect()
    }

    /// True when the point is at least `margin` cells away from every boundary.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        (0..self.ndim()).all(|a| {
            let i = self.axis_index(flat, a);
            i >= margin && i + margin < self.axes[a].len
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.ndim()
            && self.axes.iter().zip(x).all(|(a, xi)| *xi >= a.origin && *xi <= a.upper())
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.axes.len() == other.axes.len()
            && self.axes.iter().zip(&other.axes).all(|(a, b)| {
                a.len == b.len
                    && (a.origin - b.origin).abs() <= 1e-12 * a.spacing
                    && (a.spacing - b.spacing).abs() <= 1e-12 * a.spacing
            })
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{what}: {:?} vs {:?}", self.shape(), other.shape())))
        }
    }

    /// Volume element for trapezoidal weights at a flat index.
    fn trapezoid_weight(&self, flat: usize) -> f64 {
        (0..self.ndim())
            .map(|a| {
                let i = self.axis_index(flat, a);
                let ax = &self.axes[a];
                if i == 0 || i + 1 == ax.len {
                    0.5 * ax.spacing
                } else {
                    ax.spacing
                }
            })
            .product()
    }

    /// Trapezoidal quadrature weights for every grid point.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.trapezoid_weight(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    name: String,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, name: name.into() })
    }

    pub fn from_fn(grid: &Grid, name: impl Into<String>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid: grid.clone(), values, name: name.into() }
    }

    pub fn constant(grid: &Grid, name: impl Into<String>, value: f64) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.len()], name: name.into() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    pub fn map(&self, name: impl Into<String>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            name: name.into(),
        }
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.grid.check_same(&other.grid, "zip_map")?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            name: name.into(),
        })
    }

    /// Fails with `NonPositiveField` at the first value that is not `> 0`.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.values.iter().position(|v| !(*v > 0.0)) {
            None => Ok(()),
            Some(index) => Err(Error::NonPositiveField {
                name: self.name.clone(),
                index,
                value: self.values[index],
            }),
        }
    }

    fn along_axis(&self, axis: usize, name: String, stencil: impl Fn(&[f64], usize, f64) -> f64) -> Self {
        let stride = self.grid.stride(axis);
        let ax = *self.grid.axis(axis);
        let values = (0..self.values.len())
            .map(|flat| {
                let i = self.grid.axis_index(flat, axis);
                let base = flat - i * stride;
                let line = |k: usize| self.values[base + k * stride];
                let local: [f64; 4];
                // Gather the points the stencil needs in line order.
                let (pts, pos) = if i == 0 {
                    local = [line(0), line(1), line(2), line(3)];
                    (&local[..], 0)
                } else if i + 1 == ax.len {
                    local = [line(i - 3), line(i - 2), line(i - 1), line(i)];
                    (&local[..], 3)
                } else {
                    local = [line(i - 1), line(i), line(i + 1), 0.0];
                    (&local[..3], 1)
                };
                stencil(pts, pos, ax.spacing)
            })
            .collect();
        Self { grid: self.grid.clone(), values, name }
    }

    /// `∂f/∂x_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        self.along_axis(axis, format!("d{}_{}", axis, self.name), |p, pos, h| match pos {
            0 => (3.0 * (p[1] - p[0]) - (p[2] - p[1])) / (2.0 * h),
            3 => (3.0 * (p[3] - p[2]) - (p[2] - p[1])) / (2.0 * h),
            _ => (p[2] - p[0]) / (2.0 * h),
        })
    }

    /// `∂²f/∂x_axis²`.
    pub fn second_derivative(&self, axis: usize) -> Self {
        self.along_axis(axis, format!("d{0}{0}_{1}", axis, self.name), |p, pos, h| match pos {
            // differences keep the stencils exact on constants
            0 => (2.0 * (p[0] - p[1]) - 3.0 * (p[1] - p[2]) + (p[2] - p[3])) / (h * h),
            3 => (2.0 * (p[3] - p[2]) - 3.0 * (p[2] - p[1]) + (p[1] - p[0])) / (h * h),
            _ => ((p[0] - p[1]) + (p[2] - p[1])) / (h * h),
        })
    }

    /// `∂²f/∂x_a∂x_b`; the pure second-derivative stencil when `a == b`.
    pub fn mixed_derivative(&self, a: usize, b: usize) -> Self {
        if a == b {
            self.second_derivative(a)
        } else {
            let (lo, hi) = (a.min(b), a.max(b));
            self.derivative(lo).derivative(hi)
        }
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.ndim()).map(|a| self.derivative(a)).collect()
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.second_derivative(0);
        for a in 1..self.grid.ndim() {
            let d = self.second_derivative(a);
            out.values.iter_mut().zip(&d.values).for_each(|(o, v)| *o += v);
        }
        out.name = format!("lap_{}", self.name);
        out
    }

    /// Trapezoidal integral over the whole grid.
    pub fn integrate(&self) -> f64 {
        (0..self.values.len()).map(|i| self.grid.trapezoid_weight(i) * self.values[i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|value|` over points at least `margin` cells from the boundary.
    pub fn max_abs_interior(&self, margin: usize) -> f64 {
        (0..self.values.len())
            .filter(|i| self.grid.is_interior(*i, margin))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid, "max_abs_diff")?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Linear (1D) or bilinear (2D) interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        if !self.grid.contains(x) {
            return None;
        }
        let mut cells = [(0usize, 0.0f64); 2];
        for (a, xi) in x.iter().enumerate() {
            let ax = self.grid.axis(a);
            let s = (xi - ax.origin) / ax.spacing;
            let i = (s.floor() as usize).min(ax.len - 2);
            cells[a] = (i, s - i as f64);
        }
        Some(match self.grid.ndim() {
            1 => {
                let (i, t) = cells[0];
                self.values[i] * (1.0 - t) + self.values[i + 1] * t
            }
            _ => {
                let (i, u) = cells[0];
                let (j, v) = cells[1];
                let f = |a: usize, b: usize| self.at(&[a, b]);
                (1.0 - u) * ((1.0 - v) * f(i, j) + v * f(i, j + 1))
                    + u * ((1.0 - v) * f(i + 1, j) + v * f(i + 1, j + 1))
            }
        })
    }

    /// Sidecar path for a field CSV: same stem, `.json` extension.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes `x[,y],value` rows plus a JSON sidecar with origin/spacing/name.
    /// Returns the paths written.
    pub fn write_csv(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let header: Vec<&str> = match self.grid.ndim() {
            1 => vec!["x", "value"],
            _ => vec!["x", "y", "value"],
        };
        w.write_record(&header).map_err(csv_err)?;
        for flat in 0..self.values.len() {
            let mut row: Vec<String> = self.grid.point(flat).into_iter().map(fmt_f64).collect();
            row.push(fmt_f64(self.values[flat]));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        let sidecar = Self::sidecar_path(path);
        let meta = FieldMeta {
            name: self.name.clone(),
            origin: self.grid.axes().iter().map(|a| a.origin).collect(),
            spacing: self.grid.axes().iter().map(|a| a.spacing).collect(),
            shape: self.grid.shape(),
        };
        let mut f = BufWriter::new(File::create(&sidecar)?);
        serde_json::to_writer_pretty(&mut f, &meta).map_err(|e| Error::Format(e.to_string()))?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(vec![path.to_path_buf(), sidecar])
    }

    /// Reads a field written by [`ScalarField::write_csv`], checking every row's
    /// coordinates against the sidecar grid.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let sidecar = Self::sidecar_path(path);
        let meta: FieldMeta = serde_json::from_reader(File::open(&sidecar)?)
            .map_err(|e| Error::Format(format!("{}: {e}", sidecar.display())))?;
        let meta_len_ok = meta.origin.len() == meta.spacing.len() && meta.origin.len() == meta.shape.len();
        if !meta_len_ok {
            return Err(Error::Format("sidecar origin/spacing/shape lengths differ".into()));
        }
        let axes = meta
            .origin
            .iter()
            .zip(&meta.spacing)
            .zip(&meta.shape)
            .map(|((o, s), n)| Axis::new(*o, *s, *n))
            .collect::<Result<Vec<_>>>()?;
        let grid = Grid::new(axes)?;
        let ndim = grid.ndim();
        let mut r = csv::Reader::from_reader(File::open(path)?);
        let headers = r.headers().map_err(csv_err)?.clone();
        let expected: &[&str] = if ndim == 1 { &["x", "value"] } else { &["x", "y", "value"] };
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format(format!("unexpected header {:?}", headers)));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row_no, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let nums = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("row {}: {e}", row_no + 1)))?;
            if row_no >= grid.len() {
                return Err(Error::Format("more rows than grid points".into()));
            }
            let expect = grid.point(row_no);
            for (a, (got, want)) in nums.iter().zip(&expect).enumerate() {
                if (got - want).abs() > 1e-9 * grid.axis(a).spacing.max(want.abs()) {
                    return Err(Error::Format(format!(
                        "row {}: coordinate {got} does not match grid value {want}",
                        row_no + 1
                    )));
                }
            }
            values.push(nums[ndim]);
        }
        if values.len() != grid.len() {
            return Err(Error::Format(format!("{} rows for {} grid points", values.len(), grid.len())));
        }
        Self::new(grid, values, meta.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub name: String,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A field sampled at evenly spaced times `t0 + k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    t0: f64,
    dt: f64,
    slices: Vec<ScalarField>,
}

impl FieldSeries {
    pub fn new(t0: f64, dt: f64, slices: Vec<ScalarField>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::StepInvalid(dt));
        }
        if slices.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "time series needs at least 2 slices, got {}",
                slices.len()
            )));
        }
        for s in &slices[1..] {
            slices[0].grid().check_same(s.grid(), "time slices")?;
        }
        Ok(Self { t0, dt, slices })
    }

    pub fn from_fn(
        grid: &Grid,
        name: &str,
        t0: f64,
        dt: f64,
        count: usize,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> Result<Self> {
        let slices = (0..count)
            .map(|k| {
                let t = t0 + k as f64 * dt;
                ScalarField::from_fn(grid, name, |x| f(x, t))
            })
            .collect();
        Self::new(t0, dt, slices)
    }

    pub fn grid(&self) -> &Grid {
        self.slices[0].grid()
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.slices.len() - 1)
    }

    pub fn slice(&self, k: usize) -> &ScalarField {
        &self.slices[k]
    }

    pub fn slices(&self) -> &[ScalarField] {
        &self.slices
    }

    /// Slice at which pointwise residuals are evaluated: the middle slice when a
    /// central time difference is available, otherwise the first.
    pub fn eval_index(&self) -> usize {
        if self.slices.len() >= 3 {
            self.slices.len() / 2
        } else {
            0
        }
    }

    /// `∂f/∂t` at slice `k`: central when both neighbours exist, one-sided otherwise.
    pub fn time_derivative(&self, k: usize) -> ScalarField {
        let n = self.slices.len();
        let (a, b, span) = if k > 0 && k + 1 < n {
            (k - 1, k + 1, 2.0 * self.dt)
        } else if k == 0 {
            (0, 1, self.dt)
        } else {
            (n - 2, n - 1, self.dt)
        };
        let values = self.slices[a]
            .values()
            .iter()
            .zip(self.slices[b].values())
            .map(|(x, y)| (y - x) / span)
            .collect();
        ScalarField { grid: self.grid().clone(), values, name: format!("dt_{}", self.slices[k].name) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, h: f64) -> Grid {
        Grid::new(vec![Axis::from_range(lo, hi, h).unwrap()]).unwrap()
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new(0.0, -0.1, 10).is_err());
        assert!(Axis::new(0.0, 0.0, 10).is_err());
        assert!(Axis::new(0.0, 0.1, 4).is_err());
        assert!(Axis::from_range(0.0, 1.0, 0.3).is_err());
        let a = Axis::from_range(-5.0, 5.0, 0.01).unwrap();
        assert_eq!(a.len, 1001);
        assert!((a.upper() - 5.0).abs() < 1e-12);
        assert!(Grid::new(vec![]).is_err());
        assert!(Grid::new(vec![a, a, a]).is_err());
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let g = line(-1.0, 1.0, 0.1);
        let f = ScalarField::from_fn(&g, "f", |x| 3.0 * x[0] * x[0] - x[0] + 2.0);
        let d = f.derivative(0);
        let dd = f.second_derivative(0);
        for i in 0..g.len() {
            let x = g.point(i)[0];
            assert!((d.get(i) - (6.0 * x - 1.0)).abs() < 1e-11, "d at {x}");
            assert!((dd.get(i) - 6.0).abs() < 1e-9, "dd at {x}");
        }
    }

    #[test]
    fn stencils_converge_at_second_order() {
        let err = |h: f64| {
            let g = line(0.0, 2.0, h);
            let f = ScalarField::from_fn(&g, "f", |x| x[0].sin());
            let d = f.derivative(0);
            let dd = f.second_derivative(0);
            (0..g.len()).fold((0.0f64, 0.0f64), |(e1, e2), i| {
                let x = g.point(i)[0];
                (e1.max((d.get(i) - x.cos()).abs()), e2.max((dd.get(i) + x.sin()).abs()))
            })
        };
        let (a1, a2) = err(0.02);
        let (b1, b2) = err(0.01);
        assert!((3.5..4.5).contains(&(a1 / b1)), "first {}", a1 / b1);
        assert!((3.5..4.5).contains(&(a2 / b2)), "second {}", a2 / b2);
    }

    #[test]
    fn mixed_derivative_in_2d() {
        let ax = Axis::from_range(-1.0, 1.0, 0.05).unwrap();
        let g = Grid::plane(ax, ax).unwrap();
        let f = ScalarField::from_fn(&g, "f", |p| p[0] * p[0] * p[1] + p[1].powi(3));
        let fxy = f.mixed_derivative(0, 1);
        let fyx = f.mixed_derivative(1, 0);
        assert_eq!(fxy.values(), fyx.values());
        for i in 0..g.len() {
            let p = g.point(i);
            assert!((fxy.get(i) - 2.0 * p[0]).abs() < 1e-9);
        }
        let lap = f.laplacian();
        for i in 0..g.len() {
            let p = g.point(i);
            assert!((lap.get(i) - (2.0 * p[1] + 6.0 * p[1])).abs() < 1e-8);
        }
    }

    #[test]
    fn trapezoid_integral() {
        let g = line(-8.0, 8.0, 0.01);
        let rho = ScalarField::from_fn(&g, "rho", |x| (-x[0] * x[0] / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt());
        assert!((rho.integrate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation() {
        let ax = Axis::from_range(0.0, 1.0, 0.25).unwrap();
        let g = Grid::plane(ax, ax).unwrap();
        let f = ScalarField::from_fn(&g, "f", |p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        assert!((f.interpolate(&[0.3, 0.7]).unwrap() - (0.6 - 2.1 + 1.0)).abs() < 1e-14);
        assert!((f.interpolate(&[1.0, 1.0]).unwrap() - 0.0).abs() < 1e-14);
        assert!(f.interpolate(&[1.01, 0.5]).is_none());
    }

    #[test]
    fn positivity_check() {
        let g = line(0.0, 1.0, 0.25);
        let f = ScalarField::from_fn(&g, "W", |x| x[0] - 0.5);
        match f.ensure_positive() {
            Err(Error::NonPositiveField { name, index, .. }) => {
                assert_eq!(name, "W");
                assert_eq!(index, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_2d() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::plane(Axis::new(-1.0, 0.5, 5).unwrap(), Axis::new(0.0, 0.1, 6).unwrap()).unwrap();
        let f = ScalarField::from_fn(&g, "Q", |p| p[0].exp() * p[1] + 1e-300);
        let path = dir.path().join("q.csv");
        let written = f.write_csv(&path).unwrap();
        assert_eq!(written.len(), 2);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,value\n-1.0,0.0,"));
        let back = ScalarField::read_csv(&path).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn csv_rejects_mismatched_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let g = line(0.0, 1.0, 0.25);
        let f = ScalarField::from_fn(&g, "W", |x| x[0]);
        let path = dir.path().join("w.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("0.5,0.5", "0.6,0.5");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(ScalarField::read_csv(&path), Err(Error::Format(_))));
    }

    #[test]
    fn time_derivatives() {
        let g = line(0.0, 1.0, 0.25);
        let s = FieldSeries::from_fn(&g, "S", 0.0, 0.1, 3, |x, t| x[0] - 0.5 * t * t).unwrap();
        assert_eq!(s.eval_index(), 1);
        let dt = s.time_derivative(1);
        assert!(dt.values().iter().all(|v| (v + 0.1).abs() < 1e-12));
        let two = FieldSeries::from_fn(&g, "S", 0.0, 0.1, 2, |x, t| x[0] - 2.0 * t).unwrap();
        assert_eq!(two.eval_index(), 0);
        assert!(two.time_derivative(0).values().iter().all(|v| (v + 2.0).abs() < 1e-12));
        assert!(FieldSeries::new(0.0, 0.0, vec![]).is_err());
    }
}
