//! Event-driven hard-sphere gas with collision contagion.
//!
//! Particles are identical hard spheres in a box, periodic in x and y with
//! reflecting walls in z. Every collision is exactly elastic; on top of the
//! mechanics rides one piece of bookkeeping, the intricacy tag: when a
//! tagged and an untagged particle collide, both leave tagged with the same
//! channel. Tags never revert. Collisions between different channels leave
//! the tags unchanged (by default they still scatter elastically; a
//! pass-through variant is available).
//!
//! Units: the speed scale `v = (3 k_B T / 2m)^{1/2}` is 1 and the sphere
//! diameter is chosen from kinetic theory so that `v · (mean free time)`
//! equals the target mean free path (default 1). All lengths are therefore
//! in mean free paths and times in mean free times.
//!
//! The engine is exact event-driven dynamics: a priority queue of predicted
//! pair collisions, wall reflections, and cell-boundary crossings, with lazy
//! invalidation through per-particle event counters. A particle's pair
//! events are predicted only against its 27-cell neighborhood and only up to
//! its own next movement event, which keeps the queue small; every possible
//! collision is re-discovered at the last movement event before contact.

mod engine;
#[cfg(test)]
mod tests;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kinetics::fit_line;

pub use engine::GasEnsemble;

/// Maximum admissible packing fraction; above this the dilute-gas mean free
/// path formula the diameter is derived from is no longer trustworthy.
pub const MAX_PACKING_FRACTION: f64 = 0.15;

/// Tag value for "not intricate".
pub const UNTAGGED: u8 = 0;

/// What a collision between two different nonzero channels does. The
/// quantum transition amplitude between different channels vanishes; both
/// classical surrogates are provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedChannelRule {
    /// Elastic scatter, tags unchanged (default).
    Scatter,
    /// No collision at all: the pair does not interact.
    PassThrough,
}

#[derive(Debug, Clone)]
pub struct GasParams {
    pub n_particles: usize,
    /// Box dimensions in units of the mean free path.
    pub box_size: [f64; 3],
    /// Speed scale v = (3 k_B T / 2m)^{1/2}; 1 fixes the units.
    pub speed_scale: f64,
    /// Target mean free path; the sphere diameter realizes it.
    pub target_mfp: f64,
    pub seed: u64,
    pub contagion_enabled: bool,
    pub mixed_rule: MixedChannelRule,
    /// Explicit sphere diameter instead of the kinetic-theory calibration;
    /// for bespoke few-particle setups.
    pub diameter_override: Option<f64>,
}

impl GasParams {
    pub fn new(n_particles: usize, box_size: [f64; 3], seed: u64) -> Self {
        GasParams {
            n_particles,
            box_size,
            speed_scale: 1.0,
            target_mfp: 1.0,
            seed,
            contagion_enabled: true,
            mixed_rule: MixedChannelRule::Scatter,
            diameter_override: None,
        }
    }

    pub fn number_density(&self) -> f64 {
        self.n_particles as f64 / (self.box_size[0] * self.box_size[1] * self.box_size[2])
    }

    /// Per-component velocity standard deviation: v = (3/2)^{1/2} σ.
    pub fn sigma(&self) -> f64 {
        self.speed_scale * (2.0 / 3.0f64).sqrt()
    }

    /// One-dimensional speed v' = 3^{-1/2} v, the sound-speed scale of the
    /// transport picture.
    pub fn one_dimensional_speed(&self) -> f64 {
        self.speed_scale / 3f64.sqrt()
    }

    /// Maxwell-Boltzmann mean speed for this temperature.
    pub fn mean_speed(&self) -> f64 {
        self.sigma() * (8.0 / std::f64::consts::PI).sqrt()
    }

    /// Sphere diameter from the dilute-gas collision rate: with
    /// `ν = √2 π d² n v̄` collisions per particle per unit time, the choice
    /// below makes `v / ν` equal the target mean free path.
    pub fn sphere_diameter(&self) -> f64 {
        if let Some(d) = self.diameter_override {
            return d;
        }
        let n = self.number_density();
        (self.speed_scale
            / (self.target_mfp * std::f64::consts::SQRT_2 * std::f64::consts::PI * n
                * self.mean_speed()))
        .sqrt()
    }

    pub fn packing_fraction(&self) -> f64 {
        let d = self.sphere_diameter();
        std::f64::consts::PI / 6.0 * d * d * d * self.number_density()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::config("n_particles must be positive"));
        }
        if self.box_size.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::config("box dimensions must be positive"));
        }
        if !(self.speed_scale > 0.0) || !(self.target_mfp > 0.0) {
            return Err(Error::config("speed scale and mean free path must be positive"));
        }
        let packing = self.packing_fraction();
        if packing > MAX_PACKING_FRACTION {
            return Err(Error::config(format!(
                "packing fraction {packing:.3} exceeds cap {MAX_PACKING_FRACTION}"
            )));
        }
        let d = self.sphere_diameter();
        if self.box_size.iter().any(|&l| l < 4.0 * d) {
            return Err(Error::config("box too small for the sphere diameter"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SourceGeometry {
    /// Slab |z - z0| <= half_thickness.
    Plane { z0: f64, half_thickness: f64 },
    /// Cylinder of given radius around the segment from `a` to `b`
    /// (minimum-image in x, y) — the track of a crossing particle.
    Track { a: [f64; 3], b: [f64; 3], radius: f64 },
    /// Ball around a point.
    Point { center: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTiming {
    /// Tag once, at injection time.
    Initial,
    /// Localized source that keeps tagging: re-applied at every sample time.
    Continuous,
}

#[derive(Debug, Clone, Copy)]
pub struct SourceSpec {
    pub geometry: SourceGeometry,
    pub timing: SourceTiming,
    pub channel: u8,
}

/// Samples Maxwell-Boltzmann velocities for `n` particles.
pub(crate) fn sample_velocities(
    rng: &mut ChaCha8Rng,
    n: usize,
    sigma: f64,
) -> Vec<[f64; 3]> {
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    (0..n)
        .map(|_| {
            [
                normal.sample(rng),
                normal.sample(rng),
                normal.sample(rng),
            ]
        })
        .collect()
}

/// Creates an equilibrium gas: non-overlapping random positions, Maxwell-
/// Boltzmann velocities, all tags zero.
pub fn init_gas(params: &GasParams) -> Result<GasEnsemble> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    GasEnsemble::new_equilibrium(params.clone(), &mut rng)
}

/// Per-bin occupation fractions at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct BinRow {
    pub t: f64,
    pub z_center: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub count: usize,
}

/// Global diagnostics at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct SampleStats {
    pub t: f64,
    /// Particles per tag value (0, 1, 2).
    pub tag_counts: [usize; 3],
    pub kinetic_energy: f64,
    pub momentum: [f64; 3],
    pub collisions: u64,
}

#[derive(Debug, Clone)]
pub struct ContagionHistory {
    pub bin_width: f64,
    pub source_z: f64,
    pub box_size: [f64; 3],
    pub rows: Vec<BinRow>,
    pub stats: Vec<SampleStats>,
}

impl ContagionHistory {
    pub fn sample_times(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.t).collect()
    }

    /// Front position at each sample: the outermost bin (distance from the
    /// source plane) whose channel-1 fraction reaches the threshold.
    pub fn front_positions(&self, threshold: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for stats in &self.stats {
            let mut front: Option<f64> = None;
            for row in self.rows.iter().filter(|r| r.t == stats.t) {
                if row.f1 >= threshold && row.count > 0 {
                    let dist = (row.z_center - self.source_z).abs();
                    front = Some(front.map_or(dist, |f: f64| f.max(dist)));
                }
            }
            if let Some(f) = front {
                out.push((stats.t, f));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FrontFit {
    /// (t, front distance) points used for the fit.
    pub points: Vec<(f64, f64)>,
    pub speed: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Sum of squared residuals of the linear fit.
    pub linear_sse: f64,
    /// Sum of squared residuals of a `a + b √t` fit, for the ballistic-vs-
    /// diffusive comparison.
    pub sqrt_sse: f64,
    /// True when the front reached the box boundary and the fit window was
    /// truncated there.
    pub truncated: bool,
}

/// Fits the front trajectory over the ballistic regime `t >= t_min`,
/// truncating once the front comes within two bins of the wall.
pub fn fit_front(history: &ContagionHistory, threshold: f64, t_min: f64) -> Result<FrontFit> {
    let t_span = history
        .stats
        .last()
        .map(|s| s.t)
        .ok_or_else(|| Error::config("empty history"))?;
    if t_span < 20.0 {
        return Err(Error::config(format!(
            "history spans {t_span} mean free times; need >= 20 for a front fit"
        )));
    }
    let all = history.front_positions(threshold);
    let max_reach = history
        .source_z
        .min(history.box_size[2] - history.source_z)
        - 2.0 * history.bin_width;
    let mut truncated = false;
    let mut points = Vec::new();
    for (t, f) in all {
        if f >= max_reach {
            truncated = true;
            break;
        }
        if t >= t_min {
            points.push((t, f));
        }
    }
    if points.len() < 4 {
        return Err(Error::numeric(
            "fewer than 4 usable front samples in the fit window",
        ));
    }
    let (speed, intercept, r2) =
        fit_line(&points).ok_or_else(|| Error::numeric("degenerate front fit"))?;
    let linear_sse: f64 = points
        .iter()
        .map(|(t, f)| (f - (intercept + speed * t)).powi(2))
        .sum();
    let sqrt_points: Vec<(f64, f64)> = points.iter().map(|&(t, f)| (t.sqrt(), f)).collect();
    let (bs, as_, _) = fit_line(&sqrt_points).ok_or_else(|| Error::numeric("degenerate sqrt fit"))?;
    let sqrt_sse: f64 = points
        .iter()
        .map(|(t, f)| (f - (as_ + bs * t.sqrt())).powi(2))
        .sum();
    Ok(FrontFit {
        points,
        speed,
        intercept,
        r2,
        linear_sse,
        sqrt_sse,
        truncated,
    })
}
