//! CSV emission and the per-run manifest.
//!
//! CSV is the single interchange format: header row, `.` decimal point, no
//! locale. Floats are written with Rust's shortest round-trip formatting, so
//! identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::evolution::MeasureRow;
use crate::front::FrontProfile;
use crate::kinetics::FieldHistory;
use crate::kmc::{ContagionHistory, FrontFit};

pub fn write_csv<W: Write>(
    out: &mut W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Shortest round-trip float formatting, switching to scientific notation
/// outside a readable magnitude window.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e6 || v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Per-snapshot intricacy measures: `t, atom, channel, p1, p0, interference,
/// phys_norm`.
pub fn write_measures_csv(path: &Path, rows: &[MeasureRow]) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["t", "atom", "channel", "p1", "p0", "interference", "phys_norm"],
        rows.iter().map(|r| {
            vec![
                fmt_num(r.t),
                r.atom.to_string(),
                r.channel.to_string(),
                fmt_num(r.p1),
                fmt_num(r.p0),
                fmt_num(r.interference),
                fmt_num(r.phys_norm),
            ]
        }),
    )
}

/// Binned gas fractions: `t, z_bin_center, f0, f1, f2, count`.
pub fn write_kmc_bins_csv(path: &Path, history: &ContagionHistory) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["t", "z_bin_center", "f0", "f1", "f2", "count"],
        history.rows.iter().map(|r| {
            vec![
                fmt_num(r.t),
                fmt_num(r.z_center),
                fmt_num(r.f0),
                fmt_num(r.f1),
                fmt_num(r.f2),
                r.count.to_string(),
            ]
        }),
    )
}

/// Front summary: `t, front_z, fitted_speed, r2` (fit values echoed per row).
pub fn write_kmc_summary_csv(path: &Path, fit: &FrontFit) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["t", "front_z", "fitted_speed", "r2"],
        fit.points.iter().map(|(t, z)| {
            vec![
                fmt_num(*t),
                fmt_num(*z),
                fmt_num(fit.speed),
                fmt_num(fit.r2),
            ]
        }),
    )
}

/// Field history: `t, z, f0, f1, f2`.
pub fn write_field_csv(path: &Path, history: &FieldHistory) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "t,z,f0,f1,f2")?;
    for snap in &history.snapshots {
        for (i, &z) in history.z.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_num(snap.t),
                fmt_num(z),
                fmt_num(snap.f0[i]),
                fmt_num(snap.f1[i]),
                fmt_num(snap.f2[i])
            )?;
        }
    }
    Ok(())
}

/// Field front summary: `t, front_left, front_right, threshold`.
pub fn write_field_front_csv(path: &Path, history: &FieldHistory) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["t", "front_left", "front_right", "threshold"],
        history.fronts.iter().map(|f| {
            let fmt = |v: Option<f64>| v.map_or(String::new(), fmt_num);
            vec![
                fmt_num(f.t),
                fmt(f.left),
                fmt(f.right),
                fmt_num(history.threshold),
            ]
        }),
    )
}

/// Traveling-wave profile: `x, g`, plus a summary line file with
/// `C, q, g_prime_at_front`.
pub fn write_front_profile_csv(path: &Path, profile: &FrontProfile) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["x", "g"],
        profile
            .x
            .iter()
            .zip(profile.g.iter())
            .map(|(x, g)| vec![fmt_num(*x), fmt_num(*g)]),
    )
}

pub fn write_front_summary_csv(path: &Path, profile: &FrontProfile) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &["C", "q", "g_prime_at_front"],
        std::iter::once(vec![
            fmt_num(profile.tail_amplitude),
            fmt_num(profile.exponent),
            fmt_num(profile.slope_at_front),
        ]),
    )
}

/// Census report row.
pub fn write_census_csv(
    path: &Path,
    inputs: &crate::census::CensusInputs,
    report: &crate::census::CensusReport,
) -> Result<()> {
    let mut out = create(path)?;
    write_csv(
        &mut out,
        &[
            "n_e",
            "v_e",
            "v_prime",
            "box_length",
            "lambda_mfp",
            "rate_tau_d_inv",
            "waves_in_box",
            "active_waves",
        ],
        std::iter::once(vec![
            fmt_num(inputs.n_e),
            fmt_num(inputs.v_e),
            fmt_num(inputs.v_prime),
            fmt_num(inputs.box_length),
            fmt_num(inputs.lambda_mfp),
            fmt_num(report.rate_tau_d_inv),
            fmt_num(report.waves_in_box),
            fmt_num(report.active_waves),
        ]),
    )
}

/// Everything needed to reproduce a run: the resolved configuration, seed,
/// tool version, wall time, outputs, and the model-variant flags for the
/// two places where the implemented equations deviate from their printed
/// sources (pair-coupling assembly and the third diffusion argument).
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: String,
    pub seed: Option<u64>,
    pub resolved_config: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    /// The pair coupling is assembled from the operator product form; set on
    /// every indexed run.
    pub correction_pair_assembly: bool,
    /// The third field's diffusion term acts on f0 itself (simplex-
    /// conserving form); set on every multichannel PDE run.
    pub correction_f0_diffusion: bool,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            seed: None,
            resolved_config: BTreeMap::new(),
            outputs: Vec::new(),
            wall_time_s: 0.0,
            correction_pair_assembly: false,
            correction_f0_diffusion: false,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        writeln!(out, "subcommand = {}", self.subcommand)?;
        writeln!(out, "tool_version = {}", env!("CARGO_PKG_VERSION"))?;
        if let Some(seed) = self.seed {
            writeln!(out, "seed = {seed}")?;
        }
        writeln!(out, "wall_time_s = {:.3}", self.wall_time_s)?;
        writeln!(
            out,
            "correction_pair_assembly = {}",
            self.correction_pair_assembly
        )?;
        writeln!(
            out,
            "correction_f0_diffusion = {}",
            self.correction_f0_diffusion
        )?;
        for output in &self.outputs {
            writeln!(out, "output = {}", output.display())?;
        }
        writeln!(out, "[resolved-config]")?;
        for (key, value) in &self.resolved_config {
            writeln!(out, "{key} = {value}")?;
        }
        Ok(())
    }
}
