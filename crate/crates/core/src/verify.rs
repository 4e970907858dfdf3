//! The bundled verification suite behind `intricacy verify`.
//!
//! Each check pins one acceptance property at its stated tolerance and
//! carries its own parameter set, so a pristine checkout verifies end to end
//! with one call. The long-running gas experiment is exercised separately in
//! the acceptance tests, not here.

use ndarray::Array1;
use num_complex::Complex64;

use crate::algebra::{self, ChannelCount};
use crate::census;
use crate::config::{IndexedSettings, PdeSettings};
use crate::error::Result;
use crate::evolution::{self, oracle, EvolutionContext};
use crate::front;
use crate::kinetics::{self, FrontConstraint, PlanarSourceParams};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult {
            name,
            passed,
            detail,
        }
    }
}

type Check = fn() -> Result<CheckResult>;

const CHECKS: &[(&str, Check)] = &[
    ("algebra-identities", check_algebra_identities),
    ("intertwining-operator", check_intertwining_operator),
    ("intertwining-trajectory", check_intertwining_trajectory),
    ("dense-exponential-oracle", check_dense_exponential),
    ("measure-identity", check_measure_identity),
    ("tail-exponent", check_tail_exponent),
    ("front-profile", check_front_profile),
    ("constrained-front-speed", check_constrained_front_speed),
    ("pulled-front-speed", check_pulled_front_speed),
    ("multichannel-limit", check_multichannel_limit),
    ("wave-census", check_census),
];

/// Runs every bundled check and returns one result per check.
pub fn run_all() -> Vec<CheckResult> {
    run_checks(CHECKS.iter())
}

/// Runs only the named checks (names as in the verify table).
pub fn run_all_filtered(names: &[&str]) -> Vec<CheckResult> {
    run_checks(CHECKS.iter().filter(|(name, _)| names.contains(name)))
}

fn run_checks<'a>(checks: impl Iterator<Item = &'a (&'static str, Check)>) -> Vec<CheckResult> {
    checks
        .map(|(name, check)| match check() {
            Ok(result) => result,
            Err(e) => CheckResult::new(name, false, format!("check errored: {e}")),
        })
        .collect()
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn max_entry(m: &algebra::CMatrix) -> f64 {
    algebra::max_abs_entry(m)
}

/// Identity suite for the atom operators, the Pauli correspondence, and the
/// multi-channel pair operator structure.
fn check_algebra_identities() -> Result<CheckResult> {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    for k in 1..=2 {
        let channels = ChannelCount::new(k)?;
        let ops = algebra::build_atom_operators(channels);
        let d = channels.local_dim();
        let id = algebra::identity(d);
        let zero = algebra::CMatrix::zeros((d, d));

        let mut sum = zero.clone();
        for mu in 0..d {
            let p = ops.projector(mu);
            worst = worst.max(max_entry(&(&p.dot(p) - p)));
            for nu in 0..d {
                if nu != mu {
                    worst = worst.max(max_entry(&p.dot(ops.projector(nu))));
                }
            }
            sum = sum + p;
        }
        worst = worst.max(max_entry(&(&sum - &id)));
        for j in 1..=k {
            let s = ops.raiser(j);
            worst = worst.max(max_entry(&s.dot(s)));
            worst = worst.max(max_entry(&(&s.dot(ops.projector(0)) - s)));
            worst = worst.max(max_entry(&ops.projector(0).dot(s)));
            for nu in 0..d {
                let ps = ops.projector(nu).dot(s);
                if nu == j {
                    worst = worst.max(max_entry(&(&ps - s)));
                } else {
                    worst = worst.max(max_entry(&ps));
                }
            }
        }
    }

    // Pauli correspondence in the (0, 1) index ordering.
    {
        let ops = algebra::build_atom_operators(ChannelCount::new(1)?);
        let i = Complex64::i();
        let id = algebra::identity(2);
        let mut sz = algebra::CMatrix::zeros((2, 2));
        sz[[0, 0]] = Complex64::new(-1.0, 0.0);
        sz[[1, 1]] = Complex64::new(1.0, 0.0);
        let mut sx = algebra::CMatrix::zeros((2, 2));
        sx[[0, 1]] = Complex64::new(1.0, 0.0);
        sx[[1, 0]] = Complex64::new(1.0, 0.0);
        let mut sy = algebra::CMatrix::zeros((2, 2));
        sy[[0, 1]] = i;
        sy[[1, 0]] = -i;
        worst = worst.max(max_entry(
            &(ops.projector(0) - &(&id - &sz).mapv(|z| z * 0.5)),
        ));
        worst = worst.max(max_entry(
            &(ops.projector(1) - &(&id + &sz).mapv(|z| z * 0.5)),
        ));
        let splus = (&sx + &sy.mapv(|z| z * i)).mapv(|z| z * 0.5);
        worst = worst.max(max_entry(&(ops.raiser(1) - &splus)));
    }

    // Multi-channel monotonicity and channel orthogonality.
    let pair = algebra::build_pair_operator(ChannelCount::new(2)?);
    let mut structure_ok = true;
    for a in 0..3 {
        for b in 0..3 {
            match pair.transition(a, b) {
                Some((ta, tb)) => {
                    if !((ta == a || a == 0) && (tb == b || b == 0)) {
                        structure_ok = false;
                    }
                }
                None => {
                    if !(a != b && a != 0 && b != 0) {
                        structure_ok = false;
                    }
                }
            }
        }
    }

    let passed = worst < tol && structure_ok;
    Ok(CheckResult::new(
        "algebra-identities",
        passed,
        format!("worst identity residual {worst:.2e} (tol {tol:.0e}), pair structure ok: {structure_ok}"),
    ))
}

/// Settings for the small oracle systems: two atoms, one channel, no M.
fn oracle_settings(grid_points: usize) -> IndexedSettings {
    IndexedSettings {
        grid_points,
        m_present: false,
        ..IndexedSettings::default()
    }
}

fn check_intertwining_operator() -> Result<CheckResult> {
    let tol = 1e-12;
    let settings = oracle_settings(8);
    let ctx = EvolutionContext::new(
        &settings.lattice()?,
        settings.potential(),
        &settings.coupling()?,
    )?;
    let h_ext = oracle::extended_hamiltonian_dense(&ctx);
    let h_std = oracle::standard_on_sectors_dense(&ctx);
    let a = oracle::projection_dense(&ctx, 1)?;
    let diff = max_entry(&(&a.dot(&h_ext) - &h_std.dot(&a)));
    Ok(CheckResult::new(
        "intertwining-operator",
        diff < tol,
        format!("entrywise |A·H' - H_std·A| = {diff:.2e} (tol {tol:.0e})"),
    ))
}

/// Builds the nontrivial oracle run: two atoms on grid 16 with one atom
/// already intricate, so the pair coupling moves weight between strings.
fn oracle_trajectory(
    settings: &IndexedSettings,
) -> Result<(EvolutionContext, evolution::Trajectory)> {
    let lattice = settings.lattice()?;
    let coupling = settings.coupling()?;
    let state = evolution::init_state_on_string(
        &lattice,
        &coupling,
        &settings.packets(),
        Some(&[1, 0]),
    )?;
    let ctx = EvolutionContext::new(&lattice, settings.potential(), &coupling)?;
    let traj = evolution::evolve(&state, &ctx)?;
    Ok((ctx, traj))
}

fn check_intertwining_trajectory() -> Result<CheckResult> {
    let tol = 1e-6;
    let settings = oracle_settings(16);
    let (ctx, traj) = oracle_trajectory(&settings)?;
    // Independent standard solver: dense standard Hamiltonian, Padé
    // exponential propagator, started from the same physical state.
    let h_std = oracle::standard_hamiltonian_dense(&ctx);
    let initial_phys = traj.snapshots[0].state.project_physical();
    let psi0: Array1<Complex64> = initial_phys.row(0).to_owned();
    let last = traj.last();
    let reference = oracle::propagate_expm(&h_std, &psi0, last.t);
    let projected = last.state.project_physical();
    let dv = last.state.layout.dv();
    let l2: f64 = (reference
        .iter()
        .zip(projected.row(0).iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        * dv)
        .sqrt();
    Ok(CheckResult::new(
        "intertwining-trajectory",
        l2 < tol,
        format!(
            "L2 difference (projected extended vs standard solver) at t = {}: {l2:.2e} (tol {tol:.0e})",
            last.t
        ),
    ))
}

fn check_dense_exponential() -> Result<CheckResult> {
    let tol = 1e-8;
    let settings = oracle_settings(16);
    let (ctx, traj) = oracle_trajectory(&settings)?;
    let h_ext = oracle::extended_hamiltonian_dense(&ctx);
    let psi0 = oracle::flatten_state(&traj.snapshots[0].state);
    let last = traj.last();
    let exact = oracle::propagate_action(&h_ext, &psi0, last.t);
    let got = oracle::flatten_state(&last.state);
    let err = oracle::max_abs_diff(&exact, &got);
    let dim = psi0.len();
    Ok(CheckResult::new(
        "dense-exponential-oracle",
        err < tol,
        format!("max amplitude error vs exp(-iH't) on the {dim}-dim system: {err:.2e} (tol {tol:.0e})"),
    ))
}

fn check_measure_identity() -> Result<CheckResult> {
    let tol = 1e-12;
    // Single channel with M: generation plus contagion.
    let settings_k1 = IndexedSettings {
        grid_points: 12,
        dt: 2e-3,
        ..IndexedSettings::default()
    };
    // Two channels with M in superposition.
    let settings_k2 = IndexedSettings {
        grid_points: 8,
        dt: 2e-3,
        channels: 2,
        c1: 0.6f64.sqrt(),
        c2: 0.4f64.sqrt(),
        ..IndexedSettings::default()
    };
    let mut worst: f64 = 0.0;
    let mut max_interference: f64 = 0.0;
    for settings in [settings_k1, settings_k2] {
        let lattice = settings.lattice()?;
        let coupling = settings.coupling()?;
        let state = evolution::init_state(&lattice, &coupling, &settings.packets())?;
        let ctx = EvolutionContext::new(&lattice, settings.potential(), &coupling)?;
        let traj = evolution::evolve(&state, &ctx)?;
        for snap in &traj.snapshots {
            for atom in 0..lattice.n_atoms {
                let total = evolution::measure_identity_sum(&snap.state, atom)?;
                worst = worst.max((total - 1.0).abs());
                for channel in 1..=settings.channels {
                    let m = evolution::intricacy_measures(&snap.state, atom, channel)?;
                    max_interference = max_interference.max(m.interference.abs());
                }
            }
        }
    }
    Ok(CheckResult::new(
        "measure-identity",
        worst < tol,
        format!(
            "worst |p1 + p0 + interference - 1| = {worst:.2e} (tol {tol:.0e}); \
             max |interference| observed = {max_interference:.3e}"
        ),
    ))
}

fn check_tail_exponent() -> Result<CheckResult> {
    let tol = 1e-12;
    let q = front::tail_exponent();
    let expected = 3.0 - 3f64.sqrt();
    let residual = front::tail_characteristic_residual(q).abs();
    let passed = residual < tol && (q - expected).abs() < 1e-13;
    Ok(CheckResult::new(
        "tail-exponent",
        passed,
        format!("q = {q:.12} (3 - sqrt(3) = {expected:.12}), characteristic residual {residual:.2e}"),
    ))
}

fn check_front_profile() -> Result<CheckResult> {
    let profile = front::integrate_front(0.05, None, 0.01)?;
    let monotone = profile.g.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let rise = profile.rise_distance(0.99);
    let rise_ok = rise.is_some_and(|r| r <= 8.0);
    let slope = profile.slope_at_front;
    let slope_ok = (slope + 0.06).abs() <= 0.03 && slope < 0.0;
    Ok(CheckResult::new(
        "front-profile",
        monotone && rise_ok && slope_ok,
        format!(
            "monotone: {monotone}; g > 0.99 at {:.2} mfp behind the front (<= 8); \
             g'(0) = {slope:.4} (-0.06 +- 0.03)",
            rise.unwrap_or(f64::NAN)
        ),
    ))
}

fn check_constrained_front_speed() -> Result<CheckResult> {
    let settings = PdeSettings::default();
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
    let history = kinetics::solve_planar_source(&params)?;
    let v = settings.constraint_speed;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for row in &history.fronts {
        if row.t < 5.0 - 1e-9 || row.t > 50.0 + 1e-9 {
            continue;
        }
        let Some(right) = row.right else { continue };
        let expected = settings.source_z + v * row.t;
        worst = worst.max((right - expected).abs());
        checked += 1;
    }
    let passed = checked > 40 && worst <= settings.dx;
    Ok(CheckResult::new(
        "constrained-front-speed",
        passed,
        format!(
            "max |front - v'*t| = {worst:.3} over {checked} samples in t = [5, 50] (tol dx = {})",
            settings.dx
        ),
    ))
}

/// Measures the free-front speed from late-time 0.5-crossings.
fn pulled_speed(dx: f64) -> Result<f64> {
    let length = 130.0;
    let source = 65.0;
    let params = PlanarSourceParams {
        domain_length: length,
        dx,
        dt: 1.5 * dx * dx,
        t_end: 60.0,
        sample_interval: 5.0,
        source_z: source,
        amplitude: 1.0,
        constraint: FrontConstraint::disabled(),
        threshold: 0.5,
    };
    let history = kinetics::solve_planar_source(&params)?;
    let points: Vec<(f64, f64)> = history
        .fronts
        .iter()
        .filter(|row| row.t >= 40.0)
        .filter_map(|row| row.right.map(|z| (row.t, z)))
        .collect();
    let (speed, _, _) = kinetics::fit_line(&points)
        .ok_or_else(|| crate::error::Error::numeric("no front points for the pulled fit"))?;
    Ok(speed)
}

fn check_pulled_front_speed() -> Result<CheckResult> {
    let expected = 2.0 * (kinetics::DIFFUSION).sqrt();
    let coarse = pulled_speed(0.1)?;
    let fine = pulled_speed(0.05)?;
    let rel_fine = (fine - expected).abs() / expected;
    let rel_coarse = (coarse - expected).abs() / expected;
    let consistent = (fine - coarse).abs() < 0.01;
    let passed = rel_fine < 0.05 && rel_coarse < 0.05 && consistent;
    Ok(CheckResult::new(
        "pulled-front-speed",
        passed,
        format!(
            "free-front speed {coarse:.4} (dx 0.1), {fine:.4} (dx 0.05) vs 2*sqrt(1/6) = \
             {expected:.4}; rel err {rel_fine:.3}, grid-consistent: {consistent}"
        ),
    ))
}

fn check_multichannel_limit() -> Result<CheckResult> {
    let settings = PdeSettings::default();
    let (p1, p2) = (settings.p1, settings.p2);
    let eps = settings.seed_fraction;
    let params = kinetics::MultichannelParams {
        domain_length: 20.0,
        dx: settings.dx,
        dt: 0.01,
        t_end: 40.0,
        sample_interval: 4.0,
        constraints: (FrontConstraint::disabled(), FrontConstraint::disabled()),
        threshold: settings.threshold,
    };
    let n = (params.domain_length / params.dx).round() as usize + 1;
    let history =
        kinetics::solve_multichannel(&params, &vec![eps * p1; n], &vec![eps * p2; n])?;
    let mut worst_simplex: f64 = 0.0;
    for snap in &history.snapshots {
        for i in 0..n {
            worst_simplex =
                worst_simplex.max((snap.f0[i] + snap.f1[i] + snap.f2[i] - 1.0).abs());
        }
    }
    let last = history.last_snapshot();
    let err1 = (last.f1[0] - p1).abs();
    let err2 = (last.f2[0] - p2).abs();
    let passed = err1 < 1e-6 && err2 < 1e-6 && worst_simplex < 1e-10;
    Ok(CheckResult::new(
        "multichannel-limit",
        passed,
        format!(
            "final f1 = {:.9} (p1 = {p1}), f2 = {:.9} (p2 = {p2}); \
             worst simplex deviation {worst_simplex:.2e}",
            last.f1[0], last.f2[0]
        ),
    ))
}

fn check_census() -> Result<CheckResult> {
    let report = census::wave_census(&census::argon_standard_conditions())?;
    let ratio = report.active_waves / 1e16;
    let passed = (0.2..=5.0).contains(&ratio);
    Ok(CheckResult::new(
        "wave-census",
        passed,
        format!(
            "argon, L = 0.1 m: {:.3e} active waves (target 1e16 within factor 5)",
            report.active_waves
        ),
    ))
}
