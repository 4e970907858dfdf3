//! Command-line driver for the intricacy laboratory.
//!
//! Subcommands: `indexed`, `kmc`, `pde`, `front`, `census`, `verify`.
//! Exit codes: 0 success, 2 configuration error, 3 numeric abort,
//! 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use intricacy::config::{ExperimentConfig, PdeMode};
use intricacy::error::Error;
use intricacy::kinetics::{self, PlanarSourceParams};
use intricacy::output::{self, RunManifest};
use intricacy::{census, evolution, front, kmc, plot, verify};

#[derive(Parser)]
#[command(
    name = "intricacy",
    version,
    about = "Numerical laboratory for entanglement growth and transport"
)]
struct Cli {
    /// Experiment configuration file (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV, SVG, and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed override for the gas simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Indexed wave-function evolution with per-snapshot intricacy measures.
    Indexed,
    /// Event-driven hard-sphere contagion gas.
    Kmc,
    /// Reaction-diffusion transport equations (planar source or multichannel).
    Pde,
    /// Traveling-wave front profile behind the sound-speed front.
    Front,
    /// Environment intricacy-wave census.
    Census,
    /// Run the bundled verification suite and exit nonzero on any failure.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };

    let started = Instant::now();
    let result = match cli.command {
        Command::Indexed => run_indexed(&cli, &config, started),
        Command::Kmc => run_kmc(&cli, &config, started),
        Command::Pde => run_pde(&cli, &config, started),
        Command::Front => run_front(&cli, &config, started),
        Command::Census => run_census(&cli, &config, started),
        Command::Verify => return run_verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::Numeric(_) | Error::Io(_) => ExitCode::from(3),
            }
        }
    }
}

fn manifest_base(cli: &Cli, config: &ExperimentConfig, subcommand: &str) -> RunManifest {
    let mut manifest = RunManifest::new(subcommand);
    manifest.resolved_config = config.resolved();
    manifest.seed = cli.seed;
    manifest
}

fn finish_manifest(
    mut manifest: RunManifest,
    outdir: &Path,
    outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<(), Error> {
    manifest.outputs = outputs;
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.write(&outdir.join("run_manifest.txt"))
}

fn run_indexed(cli: &Cli, config: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let settings = &config.indexed;
    let lattice = settings.lattice()?;
    let coupling = settings.coupling()?;
    let state = evolution::init_state(&lattice, &coupling, &settings.packets())?;
    let ctx = evolution::EvolutionContext::new(&lattice, settings.potential(), &coupling)?;
    let trajectory = evolution::evolve(&state, &ctx)?;
    let rows = evolution::measure_rows(&trajectory)?;

    let csv = cli.out.join("indexed_measures.csv");
    output::write_measures_csv(&csv, &rows)?;
    let mut outputs = vec![csv];
    println!(
        "indexed: {} snapshots, final p1(atom 0, channel 1) = {:.6}",
        trajectory.snapshots.len(),
        rows.iter()
            .rev()
            .find(|r| r.atom == 0 && r.channel == 1)
            .map_or(f64::NAN, |r| r.p1)
    );
    if cli.plot {
        let p1: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.atom == 0 && r.channel == 1)
            .map(|r| (r.t, r.p1))
            .collect();
        let interference: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.atom == 0 && r.channel == 1)
            .map(|r| (r.t, r.interference))
            .collect();
        let svg = cli.out.join("indexed_measures.svg");
        plot::emit_plot(
            &svg,
            "intricacy measure of atom 0",
            "t",
            "p1, interference",
            &[("p1", &p1), ("interference", &interference)],
        )?;
        outputs.push(svg);
    }
    let mut manifest = manifest_base(cli, config, "indexed");
    manifest.correction_pair_assembly = true;
    finish_manifest(manifest, &cli.out, outputs, started)
}

fn run_kmc(cli: &Cli, config: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let mut settings = config.kmc.clone();
    if let Some(seed) = cli.seed {
        settings.seed = seed;
    }
    let params = settings.gas_params();
    let mut gas = kmc::init_gas(&params)?;
    let tagged = gas.inject_source(&settings.source())?;
    if tagged == 0 {
        eprintln!("warning: source region tagged no particles");
    }
    let history = gas.run_contagion(settings.t_end, settings.sample_interval, settings.bin_width)?;
    println!(
        "kmc: {} particles, {} collisions, measured mean free path {:.3}",
        settings.n_particles,
        gas.n_collisions(),
        gas.measured_mfp().unwrap_or(f64::NAN)
    );

    let bins = cli.out.join("kmc_bins.csv");
    output::write_kmc_bins_csv(&bins, &history)?;
    let mut outputs = vec![bins];

    match kmc::fit_front(&history, settings.front_threshold, settings.fit_t_min) {
        Ok(fit) => {
            println!(
                "kmc: front speed {:.4} v (r² = {:.5}{})",
                fit.speed,
                fit.r2,
                if fit.truncated { ", truncated at wall" } else { "" }
            );
            let summary = cli.out.join("kmc_front_summary.csv");
            output::write_kmc_summary_csv(&summary, &fit)?;
            outputs.push(summary);
            if cli.plot {
                let svg = cli.out.join("kmc_front.svg");
                plot::emit_plot(
                    &svg,
                    "contagion front trajectory",
                    "t (mean free times)",
                    "front distance (mean free paths)",
                    &[("front", &fit.points)],
                )?;
                outputs.push(svg);
            }
        }
        Err(e) => eprintln!("warning: front fit skipped: {e}"),
    }
    let mut manifest = manifest_base(cli, config, "kmc");
    manifest.seed = Some(settings.seed);
    finish_manifest(manifest, &cli.out, outputs, started)
}

fn run_pde(cli: &Cli, config: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let settings = &config.pde;
    let mut manifest = manifest_base(cli, config, "pde");
    let (history, label) = match settings.mode {
        PdeMode::Planar => {
            let params = PlanarSourceParams {
                domain_length: settings.domain_length,
                dx: settings.dx,
                dt: settings.dt,
                t_end: settings.t_end,
                sample_interval: settings.sample_interval,
                source_z: settings.source_z,
                amplitude: settings.amplitude,
                constraint: settings.front_constraint(),
                threshold: settings.threshold,
            };
            (kinetics::solve_planar_source(&params)?, "planar source")
        }
        PdeMode::Multichannel => {
            manifest.correction_f0_diffusion = true;
            let params = kinetics::MultichannelParams {
                domain_length: settings.domain_length,
                dx: settings.dx,
                dt: settings.dt,
                t_end: settings.t_end,
                sample_interval: settings.sample_interval,
                constraints: (
                    kinetics::FrontConstraint::disabled(),
                    kinetics::FrontConstraint::disabled(),
                ),
                threshold: settings.threshold,
            };
            let n = (params.domain_length / params.dx).round() as usize + 1;
            let f1 = vec![settings.seed_fraction * settings.p1; n];
            let f2 = vec![settings.seed_fraction * settings.p2; n];
            (
                kinetics::solve_multichannel(&params, &f1, &f2)?,
                "multichannel",
            )
        }
    };
    let last = history.last_snapshot();
    println!(
        "pde ({label}): {} snapshots to t = {}, max f1 = {:.4}",
        history.snapshots.len(),
        last.t,
        last.f1.iter().cloned().fold(0.0, f64::max)
    );

    let field = cli.out.join("pde_field.csv");
    output::write_field_csv(&field, &history)?;
    let fronts = cli.out.join("pde_front_summary.csv");
    output::write_field_front_csv(&fronts, &history)?;
    let mut outputs = vec![field, fronts];
    if cli.plot {
        let points: Vec<(f64, f64)> = history
            .fronts
            .iter()
            .filter_map(|row| row.right.map(|z| (row.t, z - settings.source_z)))
            .collect();
        if points.len() >= 2 {
            let svg = cli.out.join("pde_front.svg");
            plot::emit_plot(
                &svg,
                "front position vs time",
                "t (mean free times)",
                "front distance (mean free paths)",
                &[("front", &points)],
            )?;
            outputs.push(svg);
        }
    }
    finish_manifest(manifest, &cli.out, outputs, started)
}

fn run_front(cli: &Cli, config: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let settings = &config.front;
    let start_depth = if settings.start_depth > 0.0 {
        Some(settings.start_depth)
    } else {
        None
    };
    let profile = front::integrate_front(settings.amplitude, start_depth, settings.dx)?;
    println!(
        "front: q = {:.6}, g'(0) = {:.4}, saturation within {:.2} mean free paths",
        profile.exponent,
        profile.slope_at_front,
        profile.rise_distance(0.99).unwrap_or(f64::NAN)
    );

    let csv = cli.out.join("front_profile.csv");
    output::write_front_profile_csv(&csv, &profile)?;
    let summary = cli.out.join("front_summary.csv");
    output::write_front_summary_csv(&summary, &profile)?;
    let mut outputs = vec![csv, summary];
    if cli.plot {
        let series: Vec<(f64, f64)> = profile
            .x
            .iter()
            .zip(profile.g.iter())
            .map(|(x, g)| (*x, *g))
            .collect();
        let svg = cli.out.join("front_profile.svg");
        plot::emit_plot(
            &svg,
            "intricacy wave profile",
            "distance behind front (mean free paths)",
            "local intricacy probability g",
            &[("g", &series)],
        )?;
        outputs.push(svg);
    }
    finish_manifest(manifest_base(cli, config, "front"), &cli.out, outputs, started)
}

fn run_census(cli: &Cli, config: &ExperimentConfig, started: Instant) -> Result<(), Error> {
    let inputs = config.census.inputs();
    let report = census::wave_census(&inputs)?;
    println!(
        "wave generation rate 1/tau_d = {:.3e} /s",
        report.rate_tau_d_inv
    );
    println!("waves in flight in the box = {:.3e}", report.waves_in_box);
    println!("active waves at any point  = {:.3e}", report.active_waves);

    let csv = cli.out.join("census.csv");
    output::write_census_csv(&csv, &inputs, &report)?;
    finish_manifest(
        manifest_base(cli, config, "census"),
        &cli.out,
        vec![csv],
        started,
    )
}

fn run_verify() -> ExitCode {
    let results = verify::run_all();
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!(
            "{} {:width$}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
        );
    }
    if verify::all_passed(&results) {
        println!("verify: all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        let failed = results.iter().filter(|r| !r.passed).count();
        println!("verify: {failed} of {} checks FAILED", results.len());
        ExitCode::from(4)
    }
}
