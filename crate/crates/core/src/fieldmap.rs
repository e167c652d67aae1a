//! Two-dimensional electrostatics of a pair of surface electrodes on a
//! dielectric half-space.
//!
//! The cross-section is discretised with vertex-centred finite volumes on a
//! tensor grid: uniform spacing `h` in a core around the electrodes and the
//! emitter, geometric growth outside it. Each grid cell carries one
//! permittivity, and the coupling between neighbouring nodes weights the
//! cells on either side of their shared face by area, so normal flux is
//! continuous across the diamond surface. Electrode nodes are fixed, the
//! outer box is insulating (zero normal field).
//!
//! Coordinates are µm with `x = 0` at the gap centre and `y = 0` on the
//! diamond surface (diamond below). Potentials are V, so gradients come out
//! directly in MV/m.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::starkmodel::{lorentz_local_field, StarkError, DIAMOND_EPSILON};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("grid too coarse: {nodes_across_gap:.1} nodes across the gap (need 20), {nodes_to_emitter:.1} above the emitter (need 4)")]
    UnderResolved { nodes_across_gap: f64, nodes_to_emitter: f64 },
    #[error("solver stopped after {iterations} iterations with relative residual {residual:e}")]
    NotConverged { residual: f64, iterations: usize },
    #[error("point ({x}, {y}) µm is outside the interior of the map")]
    OutOfDomain { x: f64, y: f64 },
    #[error("csv export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Stark(#[from] StarkError),
}

/// Two coplanar electrodes at `±V/2` on the diamond surface, left one
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeGeometry {
    /// Inner-edge separation, µm.
    pub gap: f64,
    /// µm.
    pub electrode_width: f64,
    /// µm.
    pub electrode_thickness: f64,
    /// V.
    pub applied_voltage: f64,
    pub epsilon_substrate: f64,
    /// nm below the surface.
    pub emitter_depth: f64,
    /// µm from the gap centre.
    pub emitter_lateral_offset: f64,
}

impl Default for ElectrodeGeometry {
    fn default() -> Self {
        Self {
            gap: 2.0,
            electrode_width: 2.0,
            electrode_thickness: 0.1,
            applied_voltage: 200.0,
            epsilon_substrate: DIAMOND_EPSILON,
            emitter_depth: 76.0,
            emitter_lateral_offset: 0.0,
        }
    }
}

impl ElectrodeGeometry {
    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: &str| Err(FieldError::InvalidGeometry(m.to_string()));
        if !(self.gap > 0.0) || !self.gap.is_finite() {
            return bad("gap must be positive");
        }
        if !(self.electrode_width > 0.0) || !self.electrode_width.is_finite() {
            return bad("electrode width must be positive");
        }
        if !(self.electrode_thickness >= 0.0) || !self.electrode_thickness.is_finite() {
            return bad("electrode thickness must be >= 0");
        }
        if !self.applied_voltage.is_finite() {
            return bad("applied voltage must be finite");
        }
        if !(self.epsilon_substrate >= 1.0) || !self.epsilon_substrate.is_finite() {
            return bad("substrate permittivity must be >= 1");
        }
        if !(self.emitter_depth >= 0.0) || !self.emitter_depth.is_finite() {
            return bad("emitter depth must be >= 0");
        }
        if !(self.emitter_lateral_offset.abs() < 0.5 * self.gap + self.electrode_width) {
            return bad("emitter must sit under the gap or the electrodes");
        }
        Ok(())
    }

    /// Emitter position in map coordinates, µm.
    pub fn emitter_point(&self) -> (f64, f64) {
        (self.emitter_lateral_offset, -self.emitter_depth * 1e-3)
    }

    pub fn with_voltage(mut self, voltage: f64) -> Self {
        self.applied_voltage = voltage;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Core grid spacing, µm.
    pub grid_spacing: f64,
    pub max_iter: usize,
    /// Relative max-norm residual at convergence.
    pub tol: f64,
    /// Spacing ratio between neighbouring cells outside the core.
    pub growth: f64,
    /// Distance from the electrodes to the outer box, in gaps.
    pub box_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_spacing: 0.015,
            max_iter: 200_000,
            tol: 1e-10,
            growth: 1.12,
            box_factor: 5.0,
        }
    }
}

impl SolverOptions {
    pub fn with_spacing(mut self, h: f64) -> Self {
        self.grid_spacing = h;
        self
    }
}

/// Solved potential on a tensor grid. Node `(i, j)` sits at `(x[i], y[j])`
/// and is stored at `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// V.
    pub potential: Vec<f64>,
    /// Core spacing, µm.
    pub grid_spacing: f64,
    pub residual: f64,
    pub iterations: usize,
    pub voltage: f64,
    pub geometry: Option<ElectrodeGeometry>,
    unit: Vec<f64>,
}

/// Scalar summary written next to exported maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMapHeader {
    pub geometry: Option<ElectrodeGeometry>,
    pub voltage: f64,
    pub grid_spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub domain_extent: [f64; 4],
    pub residual: f64,
    pub iterations: usize,
    /// `(Fx, Fy)` at the emitter, MV/m.
    pub emitter_field: Option<[f64; 2]>,
    /// Lorentz-corrected field magnitude at the emitter, MV/m.
    pub local_field: Option<f64>,
}

/// Full-height facing plates with uniform permittivity; the interior
/// field is `V/d` along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelPlate {
    /// µm.
    pub separation: f64,
    /// µm.
    pub height: f64,
    pub epsilon: f64,
    pub voltage: f64,
}

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Per cell, `(nx − 1) · (ny − 1)`.
    eps: Vec<f64>,
    /// Fixed potentials for a unit bias.
    fixed: Vec<Option<f64>>,
}

/// Uniform pieces between consecutive knots of spacing at most `h`, then
/// geometric growth out to `end`. Starts at 0, all knots positive.
fn half_axis(knots: &[f64], h: f64, growth: f64, end: f64) -> Vec<f64> {
    let mut axis = vec![0.0];
    let mut pos = 0.0;
    let mut step = h;
    for &k in knots {
        if k <= pos + 1e-12 {
            continue;
        }
        let n = ((k - pos) / h - 1e-9).ceil().max(1.0) as usize;
        step = (k - pos) / n as f64;
        for m in 1..n {
            axis.push(pos + m as f64 * step);
        }
        axis.push(k);
        pos = k;
    }
    while pos < end - 1e-12 {
        step *= growth;
        let next = pos + step;
        if next >= end || end - next < 0.5 * step {
            axis.push(end);
            break;
        }
        axis.push(next);
        pos = next;
    }
    axis
}

fn sorted_knots(mut k: Vec<f64>) -> Vec<f64> {
    k.retain(|v| *v > 0.0);
    k.sort_by(|a, b| a.total_cmp(b));
    k.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    k
}

impl Problem {
    fn electrodes(g: &ElectrodeGeometry, opts: &SolverOptions) -> Self {
        let h = opts.grid_spacing;
        let half = 0.5 * g.gap;
        let outer = half + g.electrode_width;
        let margin = 0.25 * g.gap;
        let depth = g.emitter_depth * 1e-3;
        let t = g.electrode_thickness;

        let xk = sorted_knots(vec![g.emitter_lateral_offset.abs(), half, outer, outer + margin]);
        let xr = half_axis(&xk, h, opts.growth, outer + opts.box_factor * g.gap);
        let mut x: Vec<f64> = xr.iter().skip(1).rev().map(|v| -v).collect();
        x.extend_from_slice(&xr);

        let up = half_axis(&sorted_knots(vec![t, t + margin]), h, opts.growth, t + opts.box_factor * g.gap);
        let down = half_axis(
            &sorted_knots(vec![depth, depth + margin]),
            h,
            opts.growth,
            depth + opts.box_factor * g.gap,
        );
        let mut y: Vec<f64> = down.iter().skip(1).rev().map(|v| -v).collect();
        y.extend_from_slice(&up);

        let (nx, ny) = (x.len(), y.len());
        let mut eps = vec![1.0; (nx - 1) * (ny - 1)];
        for j in 0..ny - 1 {
            if y[j + 1] <= 0.0 {
                for i in 0..nx - 1 {
                    eps[j * (nx - 1) + i] = g.epsilon_substrate;
                }
            }
        }
        let on = |v: f64, lo: f64, hi: f64| v >= lo - 1e-12 && v <= hi + 1e-12;
        let mut fixed = vec![None; nx * ny];
        for j in 0..ny {
            if !on(y[j], 0.0, t) {
                continue;
            }
            for i in 0..nx {
                if on(x[i], -outer, -half) {
                    fixed[j * nx + i] = Some(0.5);
                } else if on(x[i], half, outer) {
                    fixed[j * nx + i] = Some(-0.5);
                }
            }
        }
        Self { x, y, eps, fixed }
    }

    fn plates(p: &ParallelPlate, h: f64) -> Self {
        let nxc = (p.separation / h).round().max(2.0) as usize;
        let nyc = (p.height / h).round().max(2.0) as usize;
        let x: Vec<f64> = (0..=nxc).map(|i| p.separation * i as f64 / nxc as f64).collect();
        let y: Vec<f64> = (0..=nyc).map(|j| p.height * (j as f64 / nyc as f64 - 0.5)).collect();
        let (nx, ny) = (x.len(), y.len());
        let mut fixed = vec![None; nx * ny];
        for j in 0..ny {
            fixed[j * nx] = Some(0.5);
            fixed[j * nx + nx - 1] = Some(-0.5);
        }
        Self {
            eps: vec![p.epsilon; (nx - 1) * (ny - 1)],
            x,
            y,
            fixed,
        }
    }

    /// Face couplings: `ae[k]` links node k to its +x neighbour, `an[k]` to
    /// its +y neighbour.
    fn couplings(&self) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.x.len(), self.y.len());
        let cell = |i: usize, j: usize| self.eps[j * (nx - 1) + i];
        let mut ae = vec![0.0; nx * ny];
        let mut an = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i + 1 < nx {
                    let mut s = 0.0;
                    if j > 0 {
                        s += cell(i, j - 1) * 0.5 * (self.y[j] - self.y[j - 1]);
                    }
                    if j + 1 < ny {
                        s += cell(i, j) * 0.5 * (self.y[j + 1] - self.y[j]);
                    }
                    ae[k] = s / (self.x[i + 1] - self.x[i]);
                }
                if j + 1 < ny {
                    let mut s = 0.0;
                    if i > 0 {
                        s += cell(i - 1, j) * 0.5 * (self.x[i] - self.x[i - 1]);
                    }
                    if i + 1 < nx {
                        s += cell(i, j) * 0.5 * (self.x[i + 1] - self.x[i]);
                    }
                    an[k] = s / (self.y[j + 1] - self.y[j]);
                }
            }
        }
        (ae, an)
    }

    /// Preconditioned conjugate gradients on the free nodes. Returns the
    /// unit-bias potential, the relative residual and the iteration count.
    fn solve(&self, max_iter: usize, tol: f64) -> Result<(Vec<f64>, f64, usize), FieldError> {
        let (nx, ny) = (self.x.len(), self.y.len());
        let n = nx * ny;
        let (ae, an) = self.couplings();
        let free: Vec<bool> = self.fixed.iter().map(|f| f.is_none()).collect();
        let mut diag = vec![0.0; n];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut d = ae[k] + an[k];
                if i > 0 {
                    d += ae[k - 1];
                }
                if j > 0 {
                    d += an[k - nx];
                }
                diag[k] = d;
            }
        }
        // (A v)_k = Σ a (v_k − v_nb) restricted to free nodes, with v = 0 on
        // fixed nodes
        let apply = |v: &[f64], out: &mut [f64]| {
            for j in 0..ny {
                for i in 0..nx {
                    let k = j * nx + i;
                    if !free[k] {
                        out[k] = 0.0;
                        continue;
                    }
                    let mut s = diag[k] * v[k];
                    if i + 1 < nx {
                        s -= ae[k] * v[k + 1];
                    }
                    if i > 0 {
                        s -= ae[k - 1] * v[k - 1];
                    }
                    if j + 1 < ny {
                        s -= an[k] * v[k + nx];
                    }
                    if j > 0 {
                        s -= an[k - nx] * v[k - nx];
                    }
                    out[k] = s;
                }
            }
        };
        let boundary: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        let mut b = vec![0.0; n];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if !free[k] {
                    continue;
                }
                let mut s = 0.0;
                if i + 1 < nx {
                    s += ae[k] * boundary[k + 1];
                }
                if i > 0 {
                    s += ae[k - 1] * boundary[k - 1];
                }
                if j + 1 < ny {
                    s += an[k] * boundary[k + nx];
                }
                if j > 0 {
                    s += an[k - nx] * boundary[k - nx];
                }
                b[k] = s;
            }
        }
        let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if free.iter().all(|f| !f) || b_norm == 0.0 {
            return Ok((boundary, 0.0, 0));
        }
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(p, q)| p * q).sum::<f64>();

        let mut u = vec![0.0; n];
        let mut r = b.clone();
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut iterations = 0;
        let mut residual = 1.0;
        while iterations < max_iter {
            // restart from the true residual of the current iterate
            apply(&u, &mut q);
            for k in 0..n {
                r[k] = b[k] - q[k];
            }
            residual = max_abs(&r) / b_norm;
            if residual < tol {
                break;
            }
            for k in 0..n {
                z[k] = if free[k] { r[k] / diag[k] } else { 0.0 };
            }
            p.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            while iterations < max_iter {
                iterations += 1;
                apply(&p, &mut q);
                let alpha = rz / dot(&p, &q);
                for k in 0..n {
                    u[k] += alpha * p[k];
                    r[k] -= alpha * q[k];
                }
                if max_abs(&r) / b_norm < 0.1 * tol {
                    break;
                }
                for k in 0..n {
                    z[k] = if free[k] { r[k] / diag[k] } else { 0.0 };
                }
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for k in 0..n {
                    p[k] = z[k] + beta * p[k];
                }
            }
        }
        if residual >= tol {
            apply(&u, &mut q);
            residual = (0..n).fold(0.0f64, |m, k| m.max((b[k] - q[k]).abs())) / b_norm;
            if residual >= tol {
                return Err(FieldError::NotConverged { residual, iterations });
            }
        }
        for k in 0..n {
            u[k] += boundary[k];
        }
        Ok((u, residual, iterations))
    }
}

/// Solves the electrode problem. The potential is computed for a unit bias
/// and scaled, so maps of one geometry are exactly proportional to voltage.
pub fn solve_potential(geom: &ElectrodeGeometry, opts: &SolverOptions) -> Result<FieldMap, FieldError> {
    geom.validate()?;
    let h = opts.grid_spacing;
    if !(h > 0.0) || !h.is_finite() {
        return Err(FieldError::InvalidGeometry(format!("grid spacing must be positive, got {h}")));
    }
    if !(opts.growth >= 1.0) || !(opts.box_factor >= 5.0) {
        return Err(FieldError::InvalidGeometry(
            "growth must be >= 1 and the box at least 5 gaps out".into(),
        ));
    }
    let nodes_across_gap = geom.gap / h;
    let depth = geom.emitter_depth * 1e-3;
    let nodes_to_emitter = if depth > 0.0 { depth / h } else { f64::INFINITY };
    if nodes_across_gap < 20.0 - 1e-9 || nodes_to_emitter < 4.0 - 1e-9 {
        return Err(FieldError::UnderResolved {
            nodes_across_gap,
            nodes_to_emitter,
        });
    }
    let problem = Problem::electrodes(geom, opts);
    let (unit, residual, iterations) = problem.solve(opts.max_iter, opts.tol)?;
    Ok(FieldMap::from_unit(problem, unit, residual, iterations, h, geom.applied_voltage, Some(*geom)))
}

/// Solves the parallel-plate capacitor on a uniform grid of spacing `h`.
pub fn solve_parallel_plate(plate: &ParallelPlate, h: f64, opts: &SolverOptions) -> Result<FieldMap, FieldError> {
    if !(plate.separation > 0.0 && plate.height > 0.0 && plate.epsilon >= 1.0 && h > 0.0) {
        return Err(FieldError::InvalidGeometry(format!("invalid plate problem {plate:?}")));
    }
    let problem = Problem::plates(plate, h);
    let (unit, residual, iterations) = problem.solve(opts.max_iter, opts.tol)?;
    Ok(FieldMap::from_unit(problem, unit, residual, iterations, h, plate.voltage, None))
}

/// Lorentz-corrected field magnitude (MV/m) at the emitter for `voltage`.
pub fn bias_to_local_field(geom: &ElectrodeGeometry, voltage: f64, opts: &SolverOptions) -> Result<f64, FieldError> {
    solve_potential(&geom.with_voltage(voltage), opts)?.local_field()
}

fn locate(axis: &[f64], v: f64) -> Option<usize> {
    let n = axis.len();
    if n < 4 || v < axis[1] || v > axis[n - 2] {
        return None;
    }
    let i = axis.partition_point(|a| *a <= v).saturating_sub(1);
    Some(i.min(n - 2))
}

/// Three-point derivative on a non-uniform axis, one-sided at the ends.
fn derivative(axis: &[f64], f: impl Fn(usize) -> f64, i: usize) -> f64 {
    let n = axis.len();
    if i == 0 {
        return (f(1) - f(0)) / (axis[1] - axis[0]);
    }
    if i == n - 1 {
        return (f(n - 1) - f(n - 2)) / (axis[n - 1] - axis[n - 2]);
    }
    let h1 = axis[i] - axis[i - 1];
    let h2 = axis[i + 1] - axis[i];
    (-h2 / (h1 * (h1 + h2))) * f(i - 1) + ((h2 - h1) / (h1 * h2)) * f(i) + (h1 / (h2 * (h1 + h2))) * f(i + 1)
}

impl FieldMap {
    fn from_unit(
        problem: Problem,
        unit: Vec<f64>,
        residual: f64,
        iterations: usize,
        grid_spacing: f64,
        voltage: f64,
        geometry: Option<ElectrodeGeometry>,
    ) -> Self {
        Self {
            potential: unit.iter().map(|u| u * voltage).collect(),
            x: problem.x,
            y: problem.y,
            grid_spacing,
            residual,
            iterations,
            voltage,
            geometry: geometry.map(|g| g.with_voltage(voltage)),
            unit,
        }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    /// `[x_min, x_max, y_min, y_max]`, µm.
    pub fn domain_extent(&self) -> [f64; 4] {
        [self.x[0], self.x[self.nx() - 1], self.y[0], self.y[self.ny() - 1]]
    }

    pub fn potential_at_node(&self, i: usize, j: usize) -> f64 {
        self.potential[j * self.nx() + i]
    }

    /// Same geometry at another bias, without re-solving.
    pub fn scaled_to(&self, voltage: f64) -> FieldMap {
        FieldMap {
            potential: self.unit.iter().map(|u| u * voltage).collect(),
            voltage,
            geometry: self.geometry.map(|g| g.with_voltage(voltage)),
            ..self.clone()
        }
    }

    /// `−∇V` at node `(i, j)`, MV/m.
    pub fn node_field(&self, i: usize, j: usize) -> (f64, f64) {
        let nx = self.nx();
        let ex = -derivative(&self.x, |a| self.potential[j * nx + a], i);
        let ey = -derivative(&self.y, |b| self.potential[b * nx + i], j);
        (ex, ey)
    }

    /// `−∇V` at `(x, y)` µm, bilinear between node gradients, MV/m.
    pub fn field_at(&self, x: f64, y: f64) -> Result<(f64, f64), FieldError> {
        let (Some(i), Some(j)) = (locate(&self.x, x), locate(&self.y, y)) else {
            return Err(FieldError::OutOfDomain { x, y });
        };
        let tx = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        let ty = (y - self.y[j]) / (self.y[j + 1] - self.y[j]);
        let mut fx = 0.0;
        let mut fy = 0.0;
        for (di, wx) in [(0, 1.0 - tx), (1, tx)] {
            for (dj, wy) in [(0, 1.0 - ty), (1, ty)] {
                let w = wx * wy;
                if w == 0.0 {
                    continue;
                }
                let (ex, ey) = self.node_field(i + di, j + dj);
                fx += w * ex;
                fy += w * ey;
            }
        }
        Ok((fx, fy))
    }

    /// `(Fx, Fy)` at the emitter of the solved geometry.
    pub fn emitter_field(&self) -> Result<(f64, f64), FieldError> {
        let g = self
            .geometry
            .ok_or_else(|| FieldError::InvalidGeometry("map has no emitter".into()))?;
        let (x, y) = g.emitter_point();
        self.field_at(x, y)
    }

    /// Lorentz-corrected magnitude of the emitter field, MV/m.
    pub fn local_field(&self) -> Result<f64, FieldError> {
        let g = self
            .geometry
            .ok_or_else(|| FieldError::InvalidGeometry("map has no emitter".into()))?;
        let (fx, fy) = self.emitter_field()?;
        Ok(lorentz_local_field(fx.hypot(fy), g.epsilon_substrate)?)
    }

    pub fn header(&self) -> FieldMapHeader {
        let emitter_field = self.emitter_field().ok().map(|(a, b)| [a, b]);
        FieldMapHeader {
            geometry: self.geometry,
            voltage: self.voltage,
            grid_spacing: self.grid_spacing,
            nx: self.nx(),
            ny: self.ny(),
            domain_extent: self.domain_extent(),
            residual: self.residual,
            iterations: self.iterations,
            emitter_field,
            local_field: self.local_field().ok(),
        }
    }

    /// Writes `x_um,y_um,potential_v,fx_mv_per_m,fy_mv_per_m`, one row per node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FieldError> {
        let err = |e: csv::Error| FieldError::Export(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_um", "y_um", "potential_v", "fx_mv_per_m", "fy_mv_per_m"])
            .map_err(err)?;
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                let (fx, fy) = self.node_field(i, j);
                w.serialize((self.x[i], self.y[j], self.potential_at_node(i, j), fx, fy))
                    .map_err(err)?;
            }
        }
        w.flush().map_err(|e| FieldError::Export(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> SolverOptions {
        SolverOptions::default().with_spacing(0.05)
    }

    fn shallow() -> ElectrodeGeometry {
        ElectrodeGeometry {
            emitter_depth: 250.0,
            ..Default::default()
        }
    }

    #[test]
    fn parallel_plate_is_uniform() {
        let plate = ParallelPlate {
            separation: 3.0,
            height: 4.0,
            epsilon: 5.7,
            voltage: 12.0,
        };
        let map = solve_parallel_plate(&plate, 0.1, &SolverOptions::default()).unwrap();
        for (x, y) in [(1.5, 0.0), (0.4, 1.3), (2.6, -1.7)] {
            let (fx, fy) = map.field_at(x, y).unwrap();
            assert!((fx / 4.0 - 1.0).abs() < 5e-3, "{fx}");
            assert!(fy.abs() < 1e-6);
        }
    }

    #[test]
    fn zero_voltage_is_zero() {
        let map = solve_potential(&shallow().with_voltage(0.0), &coarse()).unwrap();
        assert!(map.potential.iter().all(|v| *v == 0.0));
        assert_eq!(map.emitter_field().unwrap(), (0.0, 0.0));
    }

    #[test]
    fn electrodes_hold_their_potential_and_bound_the_rest() {
        let g = shallow();
        let map = solve_potential(&g, &coarse()).unwrap();
        let v = g.applied_voltage;
        let (nx, ny) = (map.nx(), map.ny());
        let mut seen = (false, false);
        for j in 0..ny {
            for i in 0..nx {
                let (x, y) = (map.x[i], map.y[j]);
                let p = map.potential_at_node(i, j);
                assert!(p.abs() <= 0.5 * v * (1.0 + 1e-12));
                if (0.0..=g.electrode_thickness).contains(&y) {
                    if (-3.0..=-1.0).contains(&x) {
                        assert_eq!(p, 0.5 * v);
                        seen.0 = true;
                    } else if (1.0..=3.0).contains(&x) {
                        assert_eq!(p, -0.5 * v);
                        seen.1 = true;
                    }
                }
            }
        }
        assert!(seen.0 && seen.1);
        assert!(map.residual < 1e-8);
    }

    #[test]
    fn mirror_symmetry() {
        let map = solve_potential(&shallow(), &coarse()).unwrap();
        for (x, y) in [(0.3, -0.25), (0.77, -0.5), (1.4, 0.6)] {
            let (fx1, fy1) = map.field_at(x, y).unwrap();
            let (fx2, fy2) = map.field_at(-x, y).unwrap();
            assert!((fy1 + fy2).abs() < 1e-8 * fy1.abs().max(1.0));
            assert!((fx1 - fx2).abs() < 1e-8 * fx1.abs());
        }
        let (_, fy0) = map.emitter_field().unwrap();
        assert!(fy0.abs() < 1e-8);
    }

    #[test]
    fn linear_in_voltage() {
        let g = shallow();
        let a = solve_potential(&g, &coarse()).unwrap();
        let b = solve_potential(&g.with_voltage(2.0 * g.applied_voltage), &coarse()).unwrap();
        let (fa, _) = a.emitter_field().unwrap();
        let (fb, _) = b.emitter_field().unwrap();
        assert!((fb / fa - 2.0).abs() < 1e-10);
        let c = a.scaled_to(-g.applied_voltage);
        assert!((c.local_field().unwrap() - a.local_field().unwrap()).abs() < 1e-10 * a.local_field().unwrap());
    }

    #[test]
    fn field_points_from_positive_to_negative_electrode() {
        let map = solve_potential(&shallow(), &coarse()).unwrap();
        let (fx, _) = map.emitter_field().unwrap();
        assert!(fx > 0.0);
    }

    #[test]
    fn resolution_and_domain_errors() {
        let g = ElectrodeGeometry::default();
        assert!(matches!(
            solve_potential(&g, &SolverOptions::default().with_spacing(0.05)),
            Err(FieldError::UnderResolved { .. })
        ));
        let bad = ElectrodeGeometry { gap: -1.0, ..g };
        assert!(matches!(
            solve_potential(&bad, &coarse()),
            Err(FieldError::InvalidGeometry(_))
        ));
        let map = solve_potential(&shallow(), &coarse()).unwrap();
        let [x0, _, y0, _] = map.domain_extent();
        assert!(map.field_at(x0, 0.0).is_err());
        assert!(map.field_at(0.0, y0 - 1.0).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = SolverOptions {
            max_iter: 3,
            ..coarse()
        };
        assert!(matches!(
            solve_potential(&shallow(), &opts),
            Err(FieldError::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn half_axis_hits_knots() {
        let a = half_axis(&[0.076, 0.5], 0.02, 1.1, 10.0);
        assert!(a.contains(&0.076) && a.contains(&0.5));
        assert_eq!(*a.last().unwrap(), 10.0);
        assert!(a.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 0.02 * 1.1f64.powi(60)));
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn geometry() -> impl Strategy<Value = ElectrodeGeometry> {
        (1.5..3.0f64, 1.0..3.0f64, 1.0..12.0f64, -300.0..300.0f64, 200.0..400.0f64).prop_map(
            |(gap, width, eps, v, depth)| ElectrodeGeometry {
                gap,
                electrode_width: width,
                epsilon_substrate: eps,
                applied_voltage: v,
                emitter_depth: depth,
                ..Default::default()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn potential_bounded_by_electrodes(g in geometry()) {
            let map = solve_potential(&g, &SolverOptions::default().with_spacing(0.05)).unwrap();
            let bound = 0.5 * g.applied_voltage.abs() * (1.0 + 1e-9);
            prop_assert!(map.potential.iter().all(|p| p.abs() <= bound));
        }

        #[test]
        fn bias_superposes(g in geometry(), v1 in -200.0..200.0f64, v2 in -200.0..200.0f64) {
            let opts = SolverOptions::default().with_spacing(0.05);
            let f = |v: f64| solve_potential(&g.with_voltage(v), &opts).unwrap().emitter_field().unwrap();
            let (a, b, ab) = (f(v1), f(v2), f(v1 + v2));
            let scale = a.0.abs() + b.0.abs() + a.1.abs() + b.1.abs();
            prop_assert!((ab.0 - a.0 - b.0).abs() <= 1e-8 * scale);
            prop_assert!((ab.1 - a.1 - b.1).abs() <= 1e-8 * scale);
        }
    }
}
