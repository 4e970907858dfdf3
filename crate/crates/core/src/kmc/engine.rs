//! The event engine behind [`GasEnsemble`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{
    sample_velocities, BinRow, ContagionHistory, GasParams, MixedChannelRule, SampleStats,
    SourceGeometry, SourceSpec, SourceTiming, UNTAGGED,
};

const EPS_TIME: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Pair { i: u32, j: u32, count_i: u32, count_j: u32 },
    WallZ { i: u32, count_i: u32 },
    Crossing { i: u32, count_i: u32, axis: u8, forward: bool },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Linked-list cell grid; periodic in x and y, clamped in z.
#[derive(Debug)]
struct CellGrid {
    n: [i32; 3],
    side: [f64; 3],
    head: Vec<i32>,
    next: Vec<i32>,
    prev: Vec<i32>,
}

impl CellGrid {
    fn new(box_size: [f64; 3], min_side: f64, n_particles: usize) -> Self {
        let mut n = [1i32; 3];
        let mut side = [0f64; 3];
        for a in 0..3 {
            let preferred = box_size[a].floor().max(1.0) as i32;
            let cap = (box_size[a] / min_side).floor().max(1.0) as i32;
            n[a] = preferred.min(cap).max(1);
            side[a] = box_size[a] / n[a] as f64;
        }
        let cells = (n[0] * n[1] * n[2]) as usize;
        CellGrid {
            n,
            side,
            head: vec![-1; cells],
            next: vec![-1; n_particles],
            prev: vec![-1; n_particles],
        }
    }

    fn index(&self, c: [i32; 3]) -> usize {
        ((c[2] * self.n[1] + c[1]) * self.n[0] + c[0]) as usize
    }

    fn cell_of_position(&self, p: [f64; 3]) -> [i32; 3] {
        let mut c = [0i32; 3];
        for a in 0..3 {
            c[a] = ((p[a] / self.side[a]).floor() as i32).clamp(0, self.n[a] - 1);
        }
        c
    }

    fn insert(&mut self, particle: usize, cell: [i32; 3]) {
        let idx = self.index(cell);
        let old_head = self.head[idx];
        self.next[particle] = old_head;
        self.prev[particle] = -1;
        if old_head >= 0 {
            self.prev[old_head as usize] = particle as i32;
        }
        self.head[idx] = particle as i32;
    }

    fn remove(&mut self, particle: usize, cell: [i32; 3]) {
        let idx = self.index(cell);
        let (p, nx) = (self.prev[particle], self.next[particle]);
        if p >= 0 {
            self.next[p as usize] = nx;
        } else {
            self.head[idx] = nx;
        }
        if nx >= 0 {
            self.prev[nx as usize] = p;
        }
    }

    /// Wraps a neighbor cell coordinate; `None` when z leaves the box.
    fn wrap_neighbor(&self, mut c: [i32; 3]) -> Option<[i32; 3]> {
        for a in 0..2 {
            if c[a] < 0 {
                c[a] += self.n[a];
            } else if c[a] >= self.n[a] {
                c[a] -= self.n[a];
            }
        }
        if c[2] < 0 || c[2] >= self.n[2] {
            return None;
        }
        Some(c)
    }
}

/// Hard-sphere gas with intricacy tags and a global event queue.
#[derive(Debug)]
pub struct GasEnsemble {
    params: GasParams,
    diameter: f64,
    time: f64,
    pos: Vec<[f64; 3]>,
    vel: Vec<[f64; 3]>,
    local_time: Vec<f64>,
    tag: Vec<u8>,
    event_count: Vec<u32>,
    cell: Vec<[i32; 3]>,
    grid: CellGrid,
    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    n_collisions: u64,
    tag_counts: [usize; 3],
    continuous_sources: Vec<SourceSpec>,
    primary_source_z: Option<f64>,
}

impl GasEnsemble {
    pub(crate) fn new_equilibrium(params: GasParams, rng: &mut ChaCha8Rng) -> Result<Self> {
        let d = params.sphere_diameter();
        let r = 0.5 * d;
        let [lx, ly, lz] = params.box_size;
        let n = params.n_particles;

        let mut grid = CellGrid::new(params.box_size, d, n);
        let mut pos: Vec<[f64; 3]> = Vec::with_capacity(n);
        let mut cells: Vec<[i32; 3]> = Vec::with_capacity(n);
        let d2 = d * d;
        let max_attempts = 200usize.saturating_mul(n).max(10_000);
        let mut attempts = 0usize;
        while pos.len() < n {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::config(format!(
                    "failed to place {n} non-overlapping spheres after {max_attempts} attempts"
                )));
            }
            let candidate = [
                rng.random_range(0.0..lx),
                rng.random_range(0.0..ly),
                rng.random_range(r..lz - r),
            ];
            let cell = grid.cell_of_position(candidate);
            let mut overlaps = false;
            'scan: for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let Some(nb) =
                            grid.wrap_neighbor([cell[0] + dx, cell[1] + dy, cell[2] + dz])
                        else {
                            continue;
                        };
                        let mut cursor = grid.head[grid.index(nb)];
                        while cursor >= 0 {
                            let other = cursor as usize;
                            if min_image_dist2(candidate, pos[other], lx, ly) < d2 {
                                overlaps = true;
                                break 'scan;
                            }
                            cursor = grid.next[other];
                        }
                    }
                }
            }
            if overlaps {
                continue;
            }
            let id = pos.len();
            pos.push(candidate);
            cells.push(cell);
            grid.insert(id, cell);
        }

        let vel = sample_velocities(rng, n, params.sigma());
        Self::assemble(params, d, pos, vel, vec![UNTAGGED; n], cells, grid)
    }

    /// Builds an ensemble from explicit positions, velocities and tags.
    /// Positions must be inside the box and pairwise non-overlapping.
    pub fn from_parts(
        params: GasParams,
        pos: Vec<[f64; 3]>,
        vel: Vec<[f64; 3]>,
        tag: Vec<u8>,
    ) -> Result<Self> {
        params.validate()?;
        let n = params.n_particles;
        if pos.len() != n || vel.len() != n || tag.len() != n {
            return Err(Error::config("positions, velocities, tags must match n_particles"));
        }
        let d = params.sphere_diameter();
        let r = 0.5 * d;
        let [lx, ly, lz] = params.box_size;
        for p in &pos {
            if !(0.0..lx).contains(&p[0])
                || !(0.0..ly).contains(&p[1])
                || p[2] < r - 1e-12
                || p[2] > lz - r + 1e-12
            {
                return Err(Error::config("particle outside the box"));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if min_image_dist2(pos[i], pos[j], lx, ly) < d * d * (1.0 - 1e-9) {
                    return Err(Error::config(format!("particles {i} and {j} overlap")));
                }
            }
        }
        if tag.iter().any(|&t| t > 2) {
            return Err(Error::config("tags must be 0, 1, or 2"));
        }
        let mut grid = CellGrid::new(params.box_size, d, n);
        let mut cells = Vec::with_capacity(n);
        for (id, p) in pos.iter().enumerate() {
            let cell = grid.cell_of_position(*p);
            cells.push(cell);
            grid.insert(id, cell);
        }
        Self::assemble(params, d, pos, vel, tag, cells, grid)
    }

    fn assemble(
        params: GasParams,
        diameter: f64,
        pos: Vec<[f64; 3]>,
        vel: Vec<[f64; 3]>,
        tag: Vec<u8>,
        cell: Vec<[i32; 3]>,
        grid: CellGrid,
    ) -> Result<Self> {
        let n = params.n_particles;
        let mut tag_counts = [0usize; 3];
        for &t in &tag {
            tag_counts[t as usize] += 1;
        }
        let mut gas = GasEnsemble {
            params,
            diameter,
            time: 0.0,
            pos,
            vel,
            local_time: vec![0.0; n],
            tag,
            event_count: vec![0; n],
            cell,
            grid,
            heap: BinaryHeap::new(),
            seq: 0,
            n_collisions: 0,
            tag_counts,
            continuous_sources: Vec::new(),
            primary_source_z: None,
        };
        for i in 0..n {
            let horizon = gas.schedule_movement(i);
            gas.schedule_pairs_around(i, 0.0, horizon);
        }
        Ok(gas)
    }

    pub fn params(&self) -> &GasParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sphere_diameter(&self) -> f64 {
        self.diameter
    }

    pub fn n_collisions(&self) -> u64 {
        self.n_collisions
    }

    pub fn tag_counts(&self) -> [usize; 3] {
        self.tag_counts
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.pos
    }

    pub fn velocities(&self) -> &[[f64; 3]] {
        &self.vel
    }

    pub fn tags(&self) -> &[u8] {
        &self.tag
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.vel
            .iter()
            .map(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            .sum()
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for v in &self.vel {
            for a in 0..3 {
                p[a] += v[a];
            }
        }
        p
    }

    /// Sampled speed scale `sqrt(<|v|²>/2)`, which estimates v.
    pub fn measured_speed_scale(&self) -> f64 {
        let mean_sq: f64 = self
            .vel
            .iter()
            .map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            .sum::<f64>()
            / self.vel.len() as f64;
        (mean_sq / 2.0).sqrt()
    }

    /// Mean free path measured from the collision count: `v / rate`, with
    /// `rate = 2 · collisions / (N · t)` collisions per particle per time.
    pub fn measured_mfp(&self) -> Option<f64> {
        if self.n_collisions == 0 || self.time <= 0.0 {
            return None;
        }
        let rate =
            2.0 * self.n_collisions as f64 / (self.params.n_particles as f64 * self.time);
        Some(self.params.speed_scale / rate)
    }

    /// Tags untagged particles inside the source region with its channel.
    /// Returns how many were newly tagged (0 means an empty source region —
    /// the caller may warn).
    pub fn inject_source(&mut self, source: &SourceSpec) -> Result<usize> {
        if source.channel < 1 || source.channel > 2 {
            return Err(Error::config("source channel must be 1 or 2"));
        }
        if let SourceGeometry::Plane { z0, half_thickness } = source.geometry {
            if half_thickness < 0.0 || z0 < 0.0 || z0 > self.params.box_size[2] {
                return Err(Error::config("source slab outside the box"));
            }
            if self.primary_source_z.is_none() {
                self.primary_source_z = Some(z0);
            }
        }
        let count = self.apply_source(source);
        if source.timing == SourceTiming::Continuous {
            self.continuous_sources.push(*source);
        }
        Ok(count)
    }

    fn apply_source(&mut self, source: &SourceSpec) -> usize {
        let [lx, ly, _] = self.params.box_size;
        let mut tagged = 0usize;
        for i in 0..self.pos.len() {
            if self.tag[i] != UNTAGGED {
                continue;
            }
            let p = self.position_at(i, self.time);
            let inside = match source.geometry {
                SourceGeometry::Plane { z0, half_thickness } => (p[2] - z0).abs() <= half_thickness,
                SourceGeometry::Point { center, radius } => {
                    min_image_dist2(p, center, lx, ly) <= radius * radius
                }
                SourceGeometry::Track { a, b, radius } => {
                    segment_dist2(p, a, b, lx, ly) <= radius * radius
                }
            };
            if inside {
                self.tag[i] = source.channel;
                self.tag_counts[UNTAGGED as usize] -= 1;
                self.tag_counts[source.channel as usize] += 1;
                tagged += 1;
            }
        }
        tagged
    }

    fn position_at(&self, i: usize, t: f64) -> [f64; 3] {
        let dt = t - self.local_time[i];
        [
            self.pos[i][0] + self.vel[i][0] * dt,
            self.pos[i][1] + self.vel[i][1] * dt,
            self.pos[i][2] + self.vel[i][2] * dt,
        ]
    }

    fn drift(&mut self, i: usize, t: f64) {
        self.pos[i] = self.position_at(i, t);
        self.local_time[i] = t;
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
    }

    /// Schedules the particle's next movement event (cell crossing or z-wall
    /// reflection) and returns its time — the horizon for pair predictions.
    fn schedule_movement(&mut self, i: usize) -> f64 {
        let t_now = self.local_time[i];
        let p = self.pos[i];
        let v = self.vel[i];
        let r = 0.5 * self.diameter;
        let lz = self.params.box_size[2];

        let mut best = f64::INFINITY;
        let mut best_kind: Option<EventKind> = None;

        for axis in 0..3usize {
            if v[axis] == 0.0 {
                continue;
            }
            let c = self.cell[i][axis];
            let side = self.grid.side[axis];
            let forward = v[axis] > 0.0;
            let bound = if forward {
                (c + 1) as f64 * side
            } else {
                c as f64 * side
            };
            let dt = (bound - p[axis]) / v[axis];
            let t = t_now + dt.max(0.0);
            if t < best {
                best = t;
                best_kind = Some(EventKind::Crossing {
                    i: i as u32,
                    count_i: self.event_count[i],
                    axis: axis as u8,
                    forward,
                });
            }
        }
        // z-wall contact (sphere surface touches the wall).
        if v[2] > 0.0 {
            let dt = (lz - r - p[2]) / v[2];
            let t = t_now + dt.max(0.0);
            if t < best {
                best = t;
                best_kind = Some(EventKind::WallZ {
                    i: i as u32,
                    count_i: self.event_count[i],
                });
            }
        } else if v[2] < 0.0 {
            let dt = (r - p[2]) / v[2];
            let t = t_now + dt.max(0.0);
            if t < best {
                best = t;
                best_kind = Some(EventKind::WallZ {
                    i: i as u32,
                    count_i: self.event_count[i],
                });
            }
        }
        if let Some(kind) = best_kind {
            self.push(best, kind);
        }
        best
    }

    /// Predicts contacts of `i` against its 27-cell neighborhood, keeping
    /// only events no later than `horizon` (the particle's next movement);
    /// later contacts are re-discovered then.
    fn schedule_pairs_around(&mut self, i: usize, t_now: f64, horizon: f64) {
        let cell = self.cell[i];
        let mut found: Vec<(f64, usize)> = Vec::new();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(nb) =
                        self.grid
                            .wrap_neighbor([cell[0] + dx, cell[1] + dy, cell[2] + dz])
                    else {
                        continue;
                    };
                    let mut cursor = self.grid.head[self.grid.index(nb)];
                    while cursor >= 0 {
                        let j = cursor as usize;
                        cursor = self.grid.next[j];
                        if j == i {
                            continue;
                        }
                        if self.params.mixed_rule == MixedChannelRule::PassThrough
                            && self.tag[i] != UNTAGGED
                            && self.tag[j] != UNTAGGED
                            && self.tag[i] != self.tag[j]
                        {
                            continue;
                        }
                        if let Some(tc) = self.predict_pair(i, j, t_now) {
                            if tc <= horizon + EPS_TIME {
                                found.push((tc, j));
                            }
                        }
                    }
                }
            }
        }
        for (tc, j) in found {
            self.push(
                tc,
                EventKind::Pair {
                    i: i as u32,
                    j: j as u32,
                    count_i: self.event_count[i],
                    count_j: self.event_count[j],
                },
            );
        }
    }

    fn predict_pair(&self, i: usize, j: usize, t_now: f64) -> Option<f64> {
        let [lx, ly, _] = self.params.box_size;
        let pi = self.position_at(i, t_now);
        let pj = self.position_at(j, t_now);
        let mut dp = [pj[0] - pi[0], pj[1] - pi[1], pj[2] - pi[2]];
        dp[0] = min_image(dp[0], lx);
        dp[1] = min_image(dp[1], ly);
        let dv = [
            self.vel[j][0] - self.vel[i][0],
            self.vel[j][1] - self.vel[i][1],
            self.vel[j][2] - self.vel[i][2],
        ];
        let b = dp[0] * dv[0] + dp[1] * dv[1] + dp[2] * dv[2];
        if b >= 0.0 {
            return None;
        }
        let a = dv[0] * dv[0] + dv[1] * dv[1] + dv[2] * dv[2];
        if a <= 0.0 {
            return None;
        }
        let c = dp[0] * dp[0] + dp[1] * dp[1] + dp[2] * dp[2] - self.diameter * self.diameter;
        let disc = b * b - a * c;
        if disc <= 0.0 {
            return None;
        }
        let t_rel = (-b - disc.sqrt()) / a;
        if t_rel < -EPS_TIME {
            return None;
        }
        Some(t_now + t_rel.max(0.0))
    }

    /// Advances the exact dynamics to `t_target` (events only; positions of
    /// uninvolved particles are extrapolated lazily).
    pub fn run_until(&mut self, t_target: f64) -> Result<()> {
        if t_target < self.time {
            return Err(Error::config("cannot run backwards in time"));
        }
        loop {
            let Some(&Reverse(head)) = self.heap.peek() else {
                break;
            };
            if head.time > t_target {
                break;
            }
            let Reverse(event) = self.heap.pop().expect("peeked");
            if event.time < self.time - EPS_TIME {
                return Err(Error::numeric(format!(
                    "event queue inconsistent: event at {} before current time {}",
                    event.time, self.time
                )));
            }
            self.time = self.time.max(event.time);
            match event.kind {
                EventKind::Pair {
                    i,
                    j,
                    count_i,
                    count_j,
                } => {
                    let (i, j) = (i as usize, j as usize);
                    if self.event_count[i] != count_i || self.event_count[j] != count_j {
                        continue;
                    }
                    self.resolve_pair(i, j, event.time)?;
                }
                EventKind::WallZ { i, count_i } => {
                    let i = i as usize;
                    if self.event_count[i] != count_i {
                        continue;
                    }
                    self.resolve_wall(i, event.time);
                }
                EventKind::Crossing {
                    i,
                    count_i,
                    axis,
                    forward,
                } => {
                    let i = i as usize;
                    if self.event_count[i] != count_i {
                        continue;
                    }
                    self.resolve_crossing(i, event.time, axis as usize, forward);
                }
            }
        }
        self.time = t_target;
        Ok(())
    }

    fn resolve_pair(&mut self, i: usize, j: usize, t: f64) -> Result<()> {
        self.drift(i, t);
        self.drift(j, t);
        let [lx, ly, _] = self.params.box_size;
        let mut n = [
            self.pos[j][0] - self.pos[i][0],
            self.pos[j][1] - self.pos[i][1],
            self.pos[j][2] - self.pos[i][2],
        ];
        n[0] = min_image(n[0], lx);
        n[1] = min_image(n[1], ly);
        let dist = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (dist - self.diameter).abs() > 1e-6 * self.diameter.max(1.0) {
            return Err(Error::numeric(format!(
                "event queue inconsistent: pair ({i}, {j}) fired at separation {dist:.9}, \
                 diameter {:.9}",
                self.diameter
            )));
        }
        for x in n.iter_mut() {
            *x /= dist;
        }
        let dv = [
            self.vel[j][0] - self.vel[i][0],
            self.vel[j][1] - self.vel[i][1],
            self.vel[j][2] - self.vel[i][2],
        ];
        let u_n = dv[0] * n[0] + dv[1] * n[1] + dv[2] * n[2];
        debug_assert!(u_n < EPS_TIME, "pair event fired while receding");
        if u_n < 0.0 {
            for a in 0..3 {
                self.vel[i][a] += u_n * n[a];
                self.vel[j][a] -= u_n * n[a];
            }
            self.apply_contagion(i, j);
            self.n_collisions += 1;
        }
        self.event_count[i] = self.event_count[i].wrapping_add(1);
        self.event_count[j] = self.event_count[j].wrapping_add(1);
        let hi = self.schedule_movement(i);
        self.schedule_pairs_around(i, t, hi);
        let hj = self.schedule_movement(j);
        self.schedule_pairs_around(j, t, hj);
        Ok(())
    }

    fn apply_contagion(&mut self, i: usize, j: usize) {
        if !self.params.contagion_enabled {
            return;
        }
        let (ti, tj) = (self.tag[i], self.tag[j]);
        let (new_i, new_j) = match (ti, tj) {
            (UNTAGGED, c) if c != UNTAGGED => (c, c),
            (c, UNTAGGED) if c != UNTAGGED => (c, c),
            _ => (ti, tj),
        };
        if new_i != ti {
            self.tag_counts[ti as usize] -= 1;
            self.tag_counts[new_i as usize] += 1;
            self.tag[i] = new_i;
        }
        if new_j != tj {
            self.tag_counts[tj as usize] -= 1;
            self.tag_counts[new_j as usize] += 1;
            self.tag[j] = new_j;
        }
    }

    fn resolve_wall(&mut self, i: usize, t: f64) {
        self.drift(i, t);
        let r = 0.5 * self.diameter;
        let lz = self.params.box_size[2];
        // Snap to the contact plane and reflect.
        if self.vel[i][2] > 0.0 {
            self.pos[i][2] = lz - r;
        } else {
            self.pos[i][2] = r;
        }
        self.vel[i][2] = -self.vel[i][2];
        self.event_count[i] = self.event_count[i].wrapping_add(1);
        let h = self.schedule_movement(i);
        self.schedule_pairs_around(i, t, h);
    }

    fn resolve_crossing(&mut self, i: usize, t: f64, axis: usize, forward: bool) {
        self.drift(i, t);
        let old_cell = self.cell[i];
        let mut new_cell = old_cell;
        let n_axis = self.grid.n[axis];
        let box_len = self.params.box_size[axis];
        if forward {
            new_cell[axis] += 1;
            self.pos[i][axis] = (old_cell[axis] + 1) as f64 * self.grid.side[axis];
            if new_cell[axis] >= n_axis {
                // Periodic wrap (x and y only; z is shielded by the wall event).
                new_cell[axis] = 0;
                self.pos[i][axis] = 0.0;
            }
        } else {
            new_cell[axis] -= 1;
            self.pos[i][axis] = old_cell[axis] as f64 * self.grid.side[axis];
            if new_cell[axis] < 0 {
                new_cell[axis] = n_axis - 1;
                self.pos[i][axis] = box_len;
            }
        }
        self.grid.remove(i, old_cell);
        self.grid.insert(i, new_cell);
        self.cell[i] = new_cell;
        // Velocity unchanged: existing pair events stay valid, the new
        // neighborhood is scanned up to the next movement.
        let h = self.schedule_movement(i);
        self.schedule_pairs_around(i, t, h);
    }

    /// Brings every particle to the current time (used before sampling).
    pub fn synchronize(&mut self) {
        let t = self.time;
        for i in 0..self.pos.len() {
            self.drift(i, t);
        }
    }

    /// Runs the contagion experiment: advances to every multiple of
    /// `sample_interval` up to `t_end`, recording binned fractions and
    /// global diagnostics. Continuous sources re-tag at each sample.
    pub fn run_contagion(
        &mut self,
        t_end: f64,
        sample_interval: f64,
        bin_width: f64,
    ) -> Result<ContagionHistory> {
        if !(t_end > 0.0) || !(sample_interval > 0.0) || !(bin_width > 0.0) {
            return Err(Error::config("t_end, sample_interval, bin_width must be positive"));
        }
        let n_samples = (t_end / sample_interval).round().max(1.0) as usize;
        let source_z = self
            .primary_source_z
            .unwrap_or(0.5 * self.params.box_size[2]);
        let mut history = ContagionHistory {
            bin_width,
            source_z,
            box_size: self.params.box_size,
            rows: Vec::new(),
            stats: Vec::new(),
        };
        self.record_sample(&mut history, bin_width);
        for k in 1..=n_samples {
            self.run_until(k as f64 * sample_interval)?;
            self.synchronize();
            for source in self.continuous_sources.clone() {
                self.apply_source(&source);
            }
            self.record_sample(&mut history, bin_width);
        }
        Ok(history)
    }

    fn record_sample(&mut self, history: &mut ContagionHistory, bin_width: f64) {
        self.synchronize();
        let lz = self.params.box_size[2];
        let n_bins = (lz / bin_width).ceil() as usize;
        let mut counts = vec![[0usize; 3]; n_bins];
        for i in 0..self.pos.len() {
            let bin = ((self.pos[i][2] / bin_width) as usize).min(n_bins - 1);
            counts[bin][self.tag[i] as usize] += 1;
        }
        for (bin, c) in counts.iter().enumerate() {
            let total = c[0] + c[1] + c[2];
            if total == 0 {
                continue;
            }
            history.rows.push(BinRow {
                t: self.time,
                z_center: (bin as f64 + 0.5) * bin_width,
                f0: c[0] as f64 / total as f64,
                f1: c[1] as f64 / total as f64,
                f2: c[2] as f64 / total as f64,
                count: total,
            });
        }
        history.stats.push(SampleStats {
            t: self.time,
            tag_counts: self.tag_counts,
            kinetic_energy: self.kinetic_energy(),
            momentum: self.momentum(),
            collisions: self.n_collisions,
        });
    }
}

fn min_image(mut d: f64, l: f64) -> f64 {
    if d > 0.5 * l {
        d -= l;
    } else if d < -0.5 * l {
        d += l;
    }
    d
}

fn min_image_dist2(a: [f64; 3], b: [f64; 3], lx: f64, ly: f64) -> f64 {
    let dx = min_image(a[0] - b[0], lx);
    let dy = min_image(a[1] - b[1], ly);
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Squared distance from point `p` to the segment `a`-`b`, minimum-image in
/// x and y relative to the segment midpoint.
fn segment_dist2(p: [f64; 3], a: [f64; 3], b: [f64; 3], lx: f64, ly: f64) -> f64 {
    let seg = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let mut ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    ap[0] = min_image(ap[0], lx);
    ap[1] = min_image(ap[1], ly);
    let len2 = seg[0] * seg[0] + seg[1] * seg[1] + seg[2] * seg[2];
    let s = if len2 > 0.0 {
        ((ap[0] * seg[0] + ap[1] * seg[1] + ap[2] * seg[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - s * seg[0];
    let dy = ap[1] - s * seg[1];
    let dz = ap[2] - s * seg[2];
    dx * dx + dy * dy + dz * dz
}
