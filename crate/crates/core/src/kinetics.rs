//! Finite-difference solver for the intricacy transport equations.
//!
//! Single channel: `∂f1/∂t = f1(1 - f1) + (1/6)∂²f1/∂z²`, in units of the
//! mean free path and mean free time. Multi-channel: the logistic term
//! becomes `f_j · f0` per channel and the channels share the same diffusion.
//! The third field is maintained as `f0 = 1 - f1 - f2`, which keeps the
//! simplex exact; the equivalent rate form would carry `∇²f0` as its
//! diffusion term.
//!
//! The solver is forward Euler with central differences and zero-flux edges.
//! An optional moving-front constraint clamps a channel to zero outside
//! `[origin - speed·t, origin + speed·t]` after every step — the free
//! boundary is imposed, not solved for.

use crate::error::{Error, Result};

/// Random-walk diffusion coefficient in mean-free-path units.
pub const DIFFUSION: f64 = 1.0 / 6.0;

/// Explicit-scheme stability bound on the time step: `dx² / (2 D) = 3 dx²`.
pub fn stability_bound(dx: f64) -> f64 {
    3.0 * dx * dx
}

/// Moving-front clamp for one channel.
#[derive(Debug, Clone, Copy)]
pub struct FrontConstraint {
    pub enabled: bool,
    /// Front speed in units of v; the sound-speed choice is `3^{-1/2}`.
    pub speed: f64,
    /// Source position the two fronts emanate from.
    pub origin: f64,
}

impl FrontConstraint {
    pub fn disabled() -> Self {
        FrontConstraint {
            enabled: false,
            speed: 0.0,
            origin: 0.0,
        }
    }

    pub fn sound_speed(origin: f64) -> Self {
        FrontConstraint {
            enabled: true,
            speed: 3f64.powf(-0.5),
            origin,
        }
    }

    fn clamp(&self, z: &[f64], t: f64, field: &mut [f64]) {
        if !self.enabled {
            return;
        }
        let lo = self.origin - self.speed * t;
        let hi = self.origin + self.speed * t;
        for (zi, f) in z.iter().zip(field.iter_mut()) {
            if *zi < lo || *zi > hi {
                *f = 0.0;
            }
        }
    }
}

/// Discretized probability fields on a 1D grid. `f0` is maintained as
/// `1 - f1 - f2` at every node.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub dx: f64,
    pub z: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub f0: Vec<f64>,
    pub t: f64,
    multichannel: bool,
}

impl FieldGrid {
    /// Single-channel grid over `[0, length]`, initially all non-intricate.
    pub fn single_channel(length: f64, dx: f64) -> Result<Self> {
        Self::build(length, dx, false)
    }

    pub fn multichannel(length: f64, dx: f64) -> Result<Self> {
        Self::build(length, dx, true)
    }

    fn build(length: f64, dx: f64, multichannel: bool) -> Result<Self> {
        if !(dx > 0.0) || !(length > dx) {
            return Err(Error::config("grid needs 0 < dx < length"));
        }
        let n = (length / dx).round() as usize + 1;
        let z: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
        Ok(FieldGrid {
            dx,
            f1: vec![0.0; n],
            f2: vec![0.0; n],
            f0: vec![1.0; n],
            z,
            t: 0.0,
            multichannel,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn is_multichannel(&self) -> bool {
        self.multichannel
    }

    /// Index of the node at coordinate `z0`, which must lie on the grid.
    pub fn node_at(&self, z0: f64) -> Result<usize> {
        let idx = z0 / self.dx;
        if (idx - idx.round()).abs() > 1e-9 || z0 < 0.0 || idx.round() as usize >= self.len() {
            return Err(Error::config(format!("z0 = {z0} is not a grid node")));
        }
        Ok(idx.round() as usize)
    }

    pub fn refresh_f0(&mut self) {
        for i in 0..self.len() {
            self.f0[i] = 1.0 - self.f1[i] - self.f2[i];
        }
    }

    fn check_bounds(&self) -> Result<()> {
        for i in 0..self.len() {
            let (a, b) = (self.f1[i], self.f2[i]);
            if !(-1e-12..=1.0 + 1e-12).contains(&a)
                || !(-1e-12..=1.0 + 1e-12).contains(&b)
                || a + b > 1.0 + 1e-10
            {
                return Err(Error::numeric(format!(
                    "field left [0,1] at node {i} (t = {}): f1 = {a}, f2 = {b}",
                    self.t
                )));
            }
        }
        Ok(())
    }
}

/// Zero-flux central-difference Laplacian.
fn laplacian(field: &[f64], dx: f64, out: &mut Vec<f64>) {
    let n = field.len();
    out.clear();
    out.resize(n, 0.0);
    let inv = 1.0 / (dx * dx);
    for i in 0..n {
        let left = if i > 0 { field[i - 1] } else { field[i] };
        let right = if i + 1 < n { field[i + 1] } else { field[i] };
        out[i] = (left - 2.0 * field[i] + right) * inv;
    }
}

/// One forward-Euler step of the single-channel equation, then the front
/// clamp. `grid.t` advances by `dt`.
pub fn step_fkpp(grid: &mut FieldGrid, dt: f64, constraint: &FrontConstraint) -> Result<()> {
    debug_assert!(!grid.multichannel);
    let mut lap = Vec::new();
    laplacian(&grid.f1, grid.dx, &mut lap);
    for (f, l) in grid.f1.iter_mut().zip(lap.iter()) {
        *f += dt * (*f * (1.0 - *f) + DIFFUSION * l);
    }
    grid.t += dt;
    constraint.clamp(&grid.z, grid.t, &mut grid.f1);
    grid.refresh_f0();
    grid.check_bounds()
}

/// One forward-Euler step of the two-channel system with per-channel clamps.
pub fn step_multichannel(
    grid: &mut FieldGrid,
    dt: f64,
    constraints: &(FrontConstraint, FrontConstraint),
) -> Result<()> {
    debug_assert!(grid.multichannel);
    let mut lap1 = Vec::new();
    let mut lap2 = Vec::new();
    laplacian(&grid.f1, grid.dx, &mut lap1);
    laplacian(&grid.f2, grid.dx, &mut lap2);
    for i in 0..grid.len() {
        let f0 = 1.0 - grid.f1[i] - grid.f2[i];
        grid.f1[i] += dt * (grid.f1[i] * f0 + DIFFUSION * lap1[i]);
        grid.f2[i] += dt * (grid.f2[i] * f0 + DIFFUSION * lap2[i]);
    }
    grid.t += dt;
    constraints.0.clamp(&grid.z, grid.t, &mut grid.f1);
    constraints.1.clamp(&grid.z, grid.t, &mut grid.f2);
    grid.refresh_f0();
    grid.check_bounds()
}

#[derive(Debug, Clone)]
pub struct FieldSnapshot {
    pub t: f64,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

/// Interpolated threshold crossings of `f1` on each side of the source.
#[derive(Debug, Clone, Copy)]
pub struct FrontRow {
    pub t: f64,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

#[derive(Debug)]
pub struct FieldHistory {
    pub dx: f64,
    pub z: Vec<f64>,
    pub threshold: f64,
    pub snapshots: Vec<FieldSnapshot>,
    pub fronts: Vec<FrontRow>,
}

impl FieldHistory {
    fn record(&mut self, grid: &FieldGrid, origin: f64) {
        self.snapshots.push(FieldSnapshot {
            t: grid.t,
            f0: grid.f0.clone(),
            f1: grid.f1.clone(),
            f2: grid.f2.clone(),
        });
        self.fronts.push(front_row(grid, origin, self.threshold));
    }

    pub fn last_snapshot(&self) -> &FieldSnapshot {
        self.snapshots.last().expect("history has snapshots")
    }
}

/// Locates the outermost threshold crossing of `f1` on each side of `origin`
/// by linear interpolation between nodes.
pub fn front_row(grid: &FieldGrid, origin: f64, threshold: f64) -> FrontRow {
    let n = grid.len();
    let center = (origin / grid.dx).round() as usize;
    let mut right = None;
    let mut i = n - 1;
    while i > center {
        if grid.f1[i] >= threshold {
            right = Some(if i + 1 < n && grid.f1[i] > grid.f1[i + 1] {
                let frac = (grid.f1[i] - threshold) / (grid.f1[i] - grid.f1[i + 1]);
                grid.z[i] + frac.min(1.0) * grid.dx
            } else {
                grid.z[i]
            });
            break;
        }
        i -= 1;
    }
    let mut left = None;
    let mut i = 0;
    while i < center {
        if grid.f1[i] >= threshold {
            left = Some(if i > 0 && grid.f1[i] > grid.f1[i - 1] {
                let frac = (grid.f1[i] - threshold) / (grid.f1[i] - grid.f1[i - 1]);
                grid.z[i] - frac.min(1.0) * grid.dx
            } else {
                grid.z[i]
            });
            break;
        }
        i += 1;
    }
    FrontRow {
        t: grid.t,
        left,
        right,
    }
}

#[derive(Debug, Clone)]
pub struct PlanarSourceParams {
    pub domain_length: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub source_z: f64,
    pub amplitude: f64,
    pub constraint: FrontConstraint,
    /// Threshold used for front tracking in the history.
    pub threshold: f64,
}

fn validate_step(dt: f64, dx: f64) -> Result<()> {
    let bound = stability_bound(dx);
    if dt > bound {
        return Err(Error::config(format!(
            "dt = {dt} exceeds the explicit stability bound 3*dx^2 = {bound}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::config("dt must be positive"));
    }
    Ok(())
}

/// Runs the planar-source problem: a delta source at `source_z` released at
/// t = 0 (mass `amplitude · dx` on one node), then explicit stepping to
/// `t_end` with snapshots every `sample_interval`.
pub fn solve_planar_source(params: &PlanarSourceParams) -> Result<FieldHistory> {
    validate_step(params.dt, params.dx)?;
    if !(params.amplitude > 0.0 && params.amplitude <= 1.0) {
        return Err(Error::config(format!(
            "source amplitude must be in (0, 1], got {}",
            params.amplitude
        )));
    }
    let mut grid = FieldGrid::single_channel(params.domain_length, params.dx)?;
    let source = grid.node_at(params.source_z)?;
    grid.f1[source] = params.amplitude;
    grid.refresh_f0();

    let steps_per_sample = (params.sample_interval / params.dt).ceil().max(1.0) as usize;
    let dt = params.sample_interval / steps_per_sample as f64;
    let n_samples = (params.t_end / params.sample_interval).round().max(1.0) as usize;

    let mut history = FieldHistory {
        dx: params.dx,
        z: grid.z.clone(),
        threshold: params.threshold,
        snapshots: Vec::with_capacity(n_samples + 1),
        fronts: Vec::with_capacity(n_samples + 1),
    };
    history.record(&grid, params.source_z);
    for _ in 0..n_samples {
        for _ in 0..steps_per_sample {
            step_fkpp(&mut grid, dt, &params.constraint)?;
        }
        history.record(&grid, params.source_z);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct MultichannelParams {
    pub domain_length: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub constraints: (FrontConstraint, FrontConstraint),
    pub threshold: f64,
}

/// Runs the two-channel system from explicit initial fields.
pub fn solve_multichannel(
    params: &MultichannelParams,
    f1_init: &[f64],
    f2_init: &[f64],
) -> Result<FieldHistory> {
    validate_step(params.dt, params.dx)?;
    let mut grid = FieldGrid::multichannel(params.domain_length, params.dx)?;
    if f1_init.len() != grid.len() || f2_init.len() != grid.len() {
        return Err(Error::config(format!(
            "initial fields must have {} nodes",
            grid.len()
        )));
    }
    for i in 0..grid.len() {
        if f1_init[i] < 0.0 || f2_init[i] < 0.0 || f1_init[i] + f2_init[i] > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "initial fields violate the simplex at node {i}"
            )));
        }
    }
    grid.f1.copy_from_slice(f1_init);
    grid.f2.copy_from_slice(f2_init);
    grid.refresh_f0();

    let steps_per_sample = (params.sample_interval / params.dt).ceil().max(1.0) as usize;
    let dt = params.sample_interval / steps_per_sample as f64;
    let n_samples = (params.t_end / params.sample_interval).round().max(1.0) as usize;

    let origin = 0.5 * params.domain_length;
    let mut history = FieldHistory {
        dx: params.dx,
        z: grid.z.clone(),
        threshold: params.threshold,
        snapshots: Vec::with_capacity(n_samples + 1),
        fronts: Vec::with_capacity(n_samples + 1),
    };
    history.record(&grid, origin);
    for _ in 0..n_samples {
        for _ in 0..steps_per_sample {
            step_multichannel(&mut grid, dt, &params.constraints)?;
        }
        history.record(&grid, origin);
    }
    Ok(history)
}

/// One forward-Euler step of the single-channel equation on a radially
/// symmetric 3D grid: `∂f/∂t = f(1-f) + D (f'' + 2 f'/r)`, with the
/// regularity condition `f'(0) = 0` giving `∇²f = 6 (f₁ - f₀)/dr²` at the
/// origin. The constraint clamps outside the growing ball
/// `r ≤ origin + speed·t`, the front emanating from the seeded region's
/// boundary at `origin` (a point seed pressed against the absorbing front
/// would simply starve in 3D).
///
/// The origin stencil carries a factor 3 over the planar one, so the
/// explicit bound tightens to `dt ≤ dr²` (= `dr²/(6D)`).
pub fn step_fkpp_radial(grid: &mut FieldGrid, dt: f64, constraint: &FrontConstraint) -> Result<()> {
    debug_assert!(!grid.multichannel);
    let n = grid.len();
    let dr = grid.dx;
    let inv = 1.0 / (dr * dr);
    let mut lap = vec![0.0; n];
    lap[0] = 6.0 * (grid.f1[1] - grid.f1[0]) * inv;
    for i in 1..n {
        let right = if i + 1 < n { grid.f1[i + 1] } else { grid.f1[i] };
        let second = (grid.f1[i - 1] - 2.0 * grid.f1[i] + right) * inv;
        let first = (right - grid.f1[i - 1]) / (2.0 * dr);
        lap[i] = second + 2.0 * first / grid.z[i];
    }
    for (f, l) in grid.f1.iter_mut().zip(lap.iter()) {
        *f += dt * (*f * (1.0 - *f) + DIFFUSION * l);
    }
    grid.t += dt;
    if constraint.enabled {
        let r_front = constraint.origin + constraint.speed * grid.t;
        for (r, f) in grid.z.iter().zip(grid.f1.iter_mut()) {
            if *r > r_front {
                *f = 0.0;
            }
        }
    }
    grid.refresh_f0();
    grid.check_bounds()
}

/// Least-squares line through `(t, z)` points; returns `(speed, intercept, r²)`.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Some((slope, intercept, r2))
}

/// Extracts the co-moving profile behind the right-hand front of a
/// constrained run: `(x, f1)` pairs with `x = z - (origin + v·t)`, linearly
/// interpolated at spacing `dx_out`, for `x` in `[-depth, 0]`.
pub fn comoving_profile(
    snapshot: &FieldSnapshot,
    z: &[f64],
    origin: f64,
    speed: f64,
    depth: f64,
    dx_out: f64,
) -> Vec<(f64, f64)> {
    let front = origin + speed * snapshot.t;
    let dx = z[1] - z[0];
    let n_out = (depth / dx_out).round() as usize;
    let mut out = Vec::with_capacity(n_out + 1);
    for k in 0..=n_out {
        let x = -depth + k as f64 * dx_out;
        let zq = front + x;
        let idx = (zq / dx).floor();
        let i = idx.max(0.0) as usize;
        if i + 1 >= z.len() {
            continue;
        }
        let frac = (zq - z[i]) / dx;
        let f = snapshot.f1[i] * (1.0 - frac) + snapshot.f1[i + 1] * frac;
        out.push((x, f));
    }
    out
}
