//! Experiment configuration: an INI-style text file with `[section]`
//! headers and `key = value` lines.
//!
//! Sections are `indexed`, `kmc`, `pde`, `front`, and `census`; every key
//! has a documented default (see the README for the full table with units).
//! Unknown sections or keys are rejected, as are malformed values. `#` and
//! `;` start comments.

use std::collections::BTreeMap;
use std::path::Path;

use crate::algebra::ChannelCount;
use crate::error::{Error, Result};
use crate::evolution::{GaussianPacket, LatticeConfig, MCoupling, PairPotential};
use crate::kinetics::FrontConstraint;
use crate::kmc::{GasParams, MixedChannelRule, SourceGeometry, SourceSpec, SourceTiming};

/// Indexed-evolution settings (units: ħ = m = 1; lengths in box units).
#[derive(Debug, Clone)]
pub struct IndexedSettings {
    pub n_atoms: usize,
    pub grid_points: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub channels: usize,
    pub v0: f64,
    pub pair_range: f64,
    pub packet_width: f64,
    pub packet_momentum: f64,
    pub m_present: bool,
    pub m_strength: f64,
    pub m_range: f64,
    pub m_center: f64,
    pub m_width: f64,
    pub m_momentum: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for IndexedSettings {
    fn default() -> Self {
        IndexedSettings {
            n_atoms: 2,
            grid_points: 16,
            box_length: 8.0,
            dt: 5e-4,
            t_end: 1.0,
            snapshot_interval: 0.1,
            channels: 1,
            v0: 1.0,
            pair_range: 1.0,
            packet_width: 0.8,
            packet_momentum: 1.2,
            m_present: true,
            m_strength: 1.0,
            m_range: 0.8,
            m_center: 1.5,
            m_width: 0.5,
            m_momentum: 2.5,
            c1: 1.0,
            c2: 0.0,
        }
    }
}

impl IndexedSettings {
    pub fn lattice(&self) -> Result<LatticeConfig> {
        Ok(LatticeConfig {
            n_atoms: self.n_atoms,
            grid_points: self.grid_points,
            box_length: self.box_length,
            dt: self.dt,
            t_end: self.t_end,
            snapshot_interval: self.snapshot_interval,
            channels: ChannelCount::new(self.channels)?,
            norm_tolerance: 1e-6,
        })
    }

    pub fn potential(&self) -> PairPotential {
        PairPotential {
            strength: self.v0,
            range: self.pair_range,
        }
    }

    pub fn coupling(&self) -> Result<MCoupling> {
        if !self.m_present {
            return Ok(MCoupling::absent());
        }
        let mut weights = vec![self.c1];
        if self.channels >= 2 {
            weights.push(self.c2);
        }
        let norm2: f64 = weights.iter().map(|c| c * c).sum();
        if norm2 <= 0.0 {
            return Err(Error::config("channel weights are all zero"));
        }
        let scale = 1.0 / norm2.sqrt();
        for w in &mut weights {
            *w *= scale;
        }
        Ok(MCoupling {
            present: true,
            strength: self.m_strength,
            range: self.m_range,
            packet: GaussianPacket {
                center: self.m_center,
                width: self.m_width,
                momentum: self.m_momentum,
            },
            channel_weights: weights,
        })
    }

    /// Evenly spaced atom packets with alternating momenta.
    pub fn packets(&self) -> Vec<GaussianPacket> {
        (0..self.n_atoms)
            .map(|i| GaussianPacket {
                center: self.box_length * (i + 1) as f64 / (self.n_atoms + 1) as f64,
                width: self.packet_width,
                momentum: if i % 2 == 0 {
                    self.packet_momentum
                } else {
                    -self.packet_momentum
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KmcSettings {
    pub n_particles: usize,
    pub box_x: f64,
    pub box_y: f64,
    pub box_z: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub bin_width: f64,
    pub source_z: f64,
    pub source_half_thickness: f64,
    pub source_channel: usize,
    pub contagion: bool,
    pub mixed_rule: MixedChannelRule,
    pub front_threshold: f64,
    pub fit_t_min: f64,
    pub seed: u64,
}

impl Default for KmcSettings {
    fn default() -> Self {
        KmcSettings {
            n_particles: 100_000,
            box_x: 20.0,
            box_y: 20.0,
            box_z: 60.0,
            t_end: 30.0,
            sample_interval: 1.0,
            bin_width: 0.5,
            source_z: 30.0,
            source_half_thickness: 0.5,
            source_channel: 1,
            contagion: true,
            mixed_rule: MixedChannelRule::Scatter,
            front_threshold: 0.05,
            fit_t_min: 5.0,
            seed: 12345,
        }
    }
}

impl KmcSettings {
    pub fn gas_params(&self) -> GasParams {
        let mut params = GasParams::new(
            self.n_particles,
            [self.box_x, self.box_y, self.box_z],
            self.seed,
        );
        params.contagion_enabled = self.contagion;
        params.mixed_rule = self.mixed_rule;
        params
    }

    pub fn source(&self) -> SourceSpec {
        SourceSpec {
            geometry: SourceGeometry::Plane {
                z0: self.source_z,
                half_thickness: self.source_half_thickness,
            },
            timing: SourceTiming::Initial,
            channel: self.source_channel as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeMode {
    Planar,
    Multichannel,
}

#[derive(Debug, Clone)]
pub struct PdeSettings {
    pub mode: PdeMode,
    pub domain_length: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub source_z: f64,
    pub amplitude: f64,
    pub constraint: bool,
    pub constraint_speed: f64,
    pub threshold: f64,
    /// Multichannel uniform seeding: initial fields `seed_fraction * p_j`.
    pub p1: f64,
    pub p2: f64,
    pub seed_fraction: f64,
}

impl Default for PdeSettings {
    fn default() -> Self {
        let dx = 0.25f64;
        PdeSettings {
            mode: PdeMode::Planar,
            domain_length: 70.0,
            dx,
            dt: 1.5 * dx * dx,
            t_end: 50.0,
            sample_interval: 1.0,
            source_z: 35.0,
            amplitude: 1.0,
            constraint: true,
            constraint_speed: 3f64.powf(-0.5),
            threshold: 0.005,
            p1: 0.7,
            p2: 0.3,
            seed_fraction: 0.1,
        }
    }
}

impl PdeSettings {
    pub fn front_constraint(&self) -> FrontConstraint {
        FrontConstraint {
            enabled: self.constraint,
            speed: self.constraint_speed,
            origin: self.source_z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrontSettings {
    /// Tail amplitude C.
    pub amplitude: f64,
    /// Output sample spacing (mean free paths).
    pub dx: f64,
    /// Start depth x0; 0 means automatic (tail value 1e-4).
    pub start_depth: f64,
}

impl Default for FrontSettings {
    fn default() -> Self {
        FrontSettings {
            amplitude: 0.05,
            dx: 0.01,
            start_depth: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CensusSettings {
    pub n_e: f64,
    pub v_e: f64,
    pub v_prime: f64,
    pub box_l: f64,
    pub lambda_mfp: f64,
}

impl Default for CensusSettings {
    fn default() -> Self {
        CensusSettings {
            n_e: 2.7e25,
            v_e: 400.0,
            v_prime: 230.0,
            box_l: 0.1,
            lambda_mfp: 7e-8,
        }
    }
}

impl CensusSettings {
    pub fn inputs(&self) -> crate::census::CensusInputs {
        crate::census::CensusInputs {
            n_e: self.n_e,
            v_e: self.v_e,
            v_prime: self.v_prime,
            box_length: self.box_l,
            lambda_mfp: self.lambda_mfp,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub indexed: IndexedSettings,
    pub kmc: KmcSettings,
    pub pde: PdeSettings,
    pub front: FrontSettings,
    pub census: CensusSettings,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(format!("line {}: malformed section", lineno + 1)))?
                    .trim();
                if !["indexed", "kmc", "pde", "front", "census"].contains(&name) {
                    return Err(Error::config(format!(
                        "line {}: unknown section [{name}]",
                        lineno + 1
                    )));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(Error::config(format!(
                    "line {}: key outside any section",
                    lineno + 1
                )));
            }
            config.set(&section, key, value).map_err(|e| match e {
                Error::Config(msg) => Error::config(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?;
        }
        Ok(config)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match section {
            "indexed" => {
                let s = &mut self.indexed;
                match key {
                    "n_atoms" => s.n_atoms = parse(value)?,
                    "grid_points" => s.grid_points = parse(value)?,
                    "box_length" => s.box_length = parse(value)?,
                    "dt" => s.dt = parse(value)?,
                    "t_end" => s.t_end = parse(value)?,
                    "snapshot_interval" => s.snapshot_interval = parse(value)?,
                    "channels" => s.channels = parse(value)?,
                    "v0" => s.v0 = parse(value)?,
                    "pair_range" => s.pair_range = parse(value)?,
                    "packet_width" => s.packet_width = parse(value)?,
                    "packet_momentum" => s.packet_momentum = parse(value)?,
                    "m_present" => s.m_present = parse_bool(value)?,
                    "m_strength" => s.m_strength = parse(value)?,
                    "m_range" => s.m_range = parse(value)?,
                    "m_center" => s.m_center = parse(value)?,
                    "m_width" => s.m_width = parse(value)?,
                    "m_momentum" => s.m_momentum = parse(value)?,
                    "c1" => s.c1 = parse(value)?,
                    "c2" => s.c2 = parse(value)?,
                    _ => return unknown(section, key),
                }
            }
            "kmc" => {
                let s = &mut self.kmc;
                match key {
                    "n_particles" => s.n_particles = parse(value)?,
                    "box_x" => s.box_x = parse(value)?,
                    "box_y" => s.box_y = parse(value)?,
                    "box_z" => s.box_z = parse(value)?,
                    "t_end" => s.t_end = parse(value)?,
                    "sample_interval" => s.sample_interval = parse(value)?,
                    "bin_width" => s.bin_width = parse(value)?,
                    "source_z" => s.source_z = parse(value)?,
                    "source_half_thickness" => s.source_half_thickness = parse(value)?,
                    "source_channel" => s.source_channel = parse(value)?,
                    "contagion" => s.contagion = parse_bool(value)?,
                    "mixed_rule" => {
                        s.mixed_rule = match value {
                            "scatter" => MixedChannelRule::Scatter,
                            "passthrough" => MixedChannelRule::PassThrough,
                            other => {
                                return Err(Error::config(format!(
                                    "mixed_rule must be scatter or passthrough, got {other}"
                                )))
                            }
                        }
                    }
                    "front_threshold" => s.front_threshold = parse(value)?,
                    "fit_t_min" => s.fit_t_min = parse(value)?,
                    "seed" => s.seed = parse(value)?,
                    _ => return unknown(section, key),
                }
            }
            "pde" => {
                let s = &mut self.pde;
                match key {
                    "mode" => {
                        s.mode = match value {
                            "planar" => PdeMode::Planar,
                            "multichannel" => PdeMode::Multichannel,
                            other => {
                                return Err(Error::config(format!(
                                    "mode must be planar or multichannel, got {other}"
                                )))
                            }
                        }
                    }
                    "domain_length" => s.domain_length = parse(value)?,
                    "dx" => s.dx = parse(value)?,
                    "dt" => s.dt = parse(value)?,
                    "t_end" => s.t_end = parse(value)?,
                    "sample_interval" => s.sample_interval = parse(value)?,
                    "source_z" => s.source_z = parse(value)?,
                    "amplitude" => s.amplitude = parse(value)?,
                    "constraint" => s.constraint = parse_bool(value)?,
                    "constraint_speed" => s.constraint_speed = parse(value)?,
                    "threshold" => s.threshold = parse(value)?,
                    "p1" => s.p1 = parse(value)?,
                    "p2" => s.p2 = parse(value)?,
                    "seed_fraction" => s.seed_fraction = parse(value)?,
                    _ => return unknown(section, key),
                }
            }
            "front" => {
                let s = &mut self.front;
                match key {
                    "amplitude" => s.amplitude = parse(value)?,
                    "dx" => s.dx = parse(value)?,
                    "start_depth" => s.start_depth = parse(value)?,
                    _ => return unknown(section, key),
                }
            }
            "census" => {
                let s = &mut self.census;
                match key {
                    "n_e" => s.n_e = parse(value)?,
                    "v_e" => s.v_e = parse(value)?,
                    "v_prime" => s.v_prime = parse(value)?,
                    "box_l" => s.box_l = parse(value)?,
                    "lambda_mfp" => s.lambda_mfp = parse(value)?,
                    _ => return unknown(section, key),
                }
            }
            _ => return Err(Error::config(format!("unknown section [{section}]"))),
        }
        Ok(())
    }

    /// Resolved key = value view, for the run manifest.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let i = &self.indexed;
        for (k, v) in [
            ("indexed.n_atoms", i.n_atoms.to_string()),
            ("indexed.grid_points", i.grid_points.to_string()),
            ("indexed.box_length", i.box_length.to_string()),
            ("indexed.dt", i.dt.to_string()),
            ("indexed.t_end", i.t_end.to_string()),
            ("indexed.snapshot_interval", i.snapshot_interval.to_string()),
            ("indexed.channels", i.channels.to_string()),
            ("indexed.v0", i.v0.to_string()),
            ("indexed.pair_range", i.pair_range.to_string()),
            ("indexed.packet_width", i.packet_width.to_string()),
            ("indexed.packet_momentum", i.packet_momentum.to_string()),
            ("indexed.m_present", i.m_present.to_string()),
            ("indexed.m_strength", i.m_strength.to_string()),
            ("indexed.m_range", i.m_range.to_string()),
            ("indexed.m_center", i.m_center.to_string()),
            ("indexed.m_width", i.m_width.to_string()),
            ("indexed.m_momentum", i.m_momentum.to_string()),
            ("indexed.c1", i.c1.to_string()),
            ("indexed.c2", i.c2.to_string()),
        ] {
            map.insert(k.to_string(), v);
        }
        let k = &self.kmc;
        for (key, v) in [
            ("kmc.n_particles", k.n_particles.to_string()),
            ("kmc.box_x", k.box_x.to_string()),
            ("kmc.box_y", k.box_y.to_string()),
            ("kmc.box_z", k.box_z.to_string()),
            ("kmc.t_end", k.t_end.to_string()),
            ("kmc.sample_interval", k.sample_interval.to_string()),
            ("kmc.bin_width", k.bin_width.to_string()),
            ("kmc.source_z", k.source_z.to_string()),
            (
                "kmc.source_half_thickness",
                k.source_half_thickness.to_string(),
            ),
            ("kmc.source_channel", k.source_channel.to_string()),
            ("kmc.contagion", k.contagion.to_string()),
            (
                "kmc.mixed_rule",
                match k.mixed_rule {
                    MixedChannelRule::Scatter => "scatter".to_string(),
                    MixedChannelRule::PassThrough => "passthrough".to_string(),
                },
            ),
            ("kmc.front_threshold", k.front_threshold.to_string()),
            ("kmc.fit_t_min", k.fit_t_min.to_string()),
            ("kmc.seed", k.seed.to_string()),
        ] {
            map.insert(key.to_string(), v);
        }
        let p = &self.pde;
        for (key, v) in [
            (
                "pde.mode",
                match p.mode {
                    PdeMode::Planar => "planar".to_string(),
                    PdeMode::Multichannel => "multichannel".to_string(),
                },
            ),
            ("pde.domain_length", p.domain_length.to_string()),
            ("pde.dx", p.dx.to_string()),
            ("pde.dt", p.dt.to_string()),
            ("pde.t_end", p.t_end.to_string()),
            ("pde.sample_interval", p.sample_interval.to_string()),
            ("pde.source_z", p.source_z.to_string()),
            ("pde.amplitude", p.amplitude.to_string()),
            ("pde.constraint", p.constraint.to_string()),
            ("pde.constraint_speed", p.constraint_speed.to_string()),
            ("pde.threshold", p.threshold.to_string()),
            ("pde.p1", p.p1.to_string()),
            ("pde.p2", p.p2.to_string()),
            ("pde.seed_fraction", p.seed_fraction.to_string()),
        ] {
            map.insert(key.to_string(), v);
        }
        let f = &self.front;
        map.insert("front.amplitude".to_string(), f.amplitude.to_string());
        map.insert("front.dx".to_string(), f.dx.to_string());
        map.insert("front.start_depth".to_string(), f.start_depth.to_string());
        let c = &self.census;
        map.insert("census.n_e".to_string(), c.n_e.to_string());
        map.insert("census.v_e".to_string(), c.v_e.to_string());
        map.insert("census.v_prime".to_string(), c.v_prime.to_string());
        map.insert("census.box_l".to_string(), c.box_l.to_string());
        map.insert("census.lambda_mfp".to_string(), c.lambda_mfp.to_string());
        map
    }
}

fn strip_comment(line: &str) -> &str {
    let cut = line
        .find('#')
        .into_iter()
        .chain(line.find(';'))
        .min()
        .unwrap_or(line.len());
    &line[..cut]
}

fn unknown(section: &str, key: &str) -> Result<()> {
    Err(Error::config(format!(
        "unknown key '{key}' in section [{section}]"
    )))
}

fn parse<T: std::str::FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("cannot parse value '{value}'")))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::config(format!("expected a boolean, got '{other}'"))),
    }
}
