use super::*;
use crate::algebra::ChannelCount;
use oracle::{
    extended_hamiltonian_dense, flatten_state, max_abs_diff, projection_dense,
    standard_hamiltonian_dense, standard_on_sectors_dense,
};

fn k(n: usize) -> ChannelCount {
    ChannelCount::new(n).unwrap()
}

fn small_config(n_atoms: usize, grid: usize, channels: usize) -> LatticeConfig {
    LatticeConfig {
        n_atoms,
        grid_points: grid,
        box_length: 8.0,
        dt: 0.004,
        t_end: 0.4,
        snapshot_interval: 0.1,
        channels: k(channels),
        norm_tolerance: 1e-6,
    }
}

fn default_packets(config: &LatticeConfig) -> Vec<GaussianPacket> {
    let n = config.n_atoms;
    (0..n)
        .map(|i| GaussianPacket {
            center: config.box_length * (i + 1) as f64 / (n + 1) as f64,
            width: 0.7,
            momentum: if i % 2 == 0 { 1.5 } else { -1.5 },
        })
        .collect()
}

fn test_potential() -> PairPotential {
    PairPotential {
        strength: 1.0,
        range: 1.0,
    }
}

#[test]
fn init_without_m_lives_on_zero_string() {
    let config = small_config(2, 12, 1);
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let weights = state.sector_weights();
    assert!((weights[[0, 0]] - 1.0).abs() < 1e-12);
    for string in 1..state.layout.n_strings {
        assert_eq!(weights[[0, string]], 0.0);
    }
    for atom in 0..2 {
        let m = intricacy_measures(&state, atom, 1).unwrap();
        assert!(m.p1.abs() < 1e-15);
        assert!((m.p0 - 1.0).abs() < 1e-12);
        assert!(m.interference.abs() < 1e-12);
    }
}

#[test]
fn init_k2_allocates_27_strings_with_norm_on_zero() {
    let config = small_config(3, 8, 2);
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    assert_eq!(state.layout.n_strings, 27);
    let weights = state.sector_weights();
    assert!((weights[[0, 0]] - 1.0).abs() < 1e-12);
    let rest: f64 = (1..27).map(|s| weights[[0, s]]).sum();
    assert_eq!(rest, 0.0);
}

fn m_coupling(weights: Vec<f64>) -> MCoupling {
    MCoupling {
        present: true,
        strength: 1.0,
        range: 0.8,
        packet: GaussianPacket {
            center: 1.5,
            width: 0.5,
            momentum: 2.5,
        },
        channel_weights: weights,
    }
}

#[test]
fn init_with_m_single_weight_populates_single_channel_sector() {
    // Two channels but c = (1, 0): everything stays inside the {0, 1} strings.
    let mut config = small_config(2, 8, 2);
    config.dt = 0.002;
    let coupling = m_coupling(vec![1.0, 0.0]);
    let state = init_state(&config, &coupling, &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let weights = traj.last().state.sector_weights();
    for string in 0..state.layout.n_strings {
        let digits = state.layout.string_digits(string);
        let touches_channel_2 = digits.iter().any(|&q| q == 2);
        // Label sector 2 carries no weight, and within label 1 nothing ever
        // reaches a channel-2 index.
        assert!(weights[[1, string]].abs() < 1e-24);
        if touches_channel_2 {
            assert!(weights[[0, string]].abs() < 1e-24);
        }
    }
}

#[test]
fn rejects_overlapping_packets_with_degenerate_symmetrization() {
    let config = small_config(2, 12, 1);
    // Two identical packets with opposite momenta cancel under symmetrization
    // only in pathological cases; use zero-width-like collapse instead:
    // center both packets identically with opposite phases is not expressible
    // here, so check the degenerate-norm path with far-out-of-box tails.
    let packets = vec![
        GaussianPacket {
            center: 4.0,
            width: 1e-6,
            momentum: 0.0,
        },
        GaussianPacket {
            center: 4.0 + 1e-7,
            width: 1e-6,
            momentum: 0.0,
        },
    ];
    // Width far below dx: the packets fall between grid points and the
    // discrete norm collapses.
    assert!(init_state(&config, &MCoupling::absent(), &packets).is_err());
}

#[test]
fn free_evolution_keeps_norm_on_initial_string() {
    let mut config = small_config(2, 12, 1);
    config.t_end = 0.5;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(
        &config,
        PairPotential {
            strength: 0.0,
            range: 1.0,
        },
        &MCoupling::absent(),
    )
    .unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    for snap in &traj.snapshots {
        let weights = snap.state.sector_weights();
        assert!((weights[[0, 0]] - 1.0).abs() < 1e-9, "t = {}", snap.t);
        for string in 1..4 {
            assert!(weights[[0, string]].abs() < 1e-18);
        }
    }
}

#[test]
fn free_evolution_conserves_every_string_weight() {
    // With V = 0 the generator is block diagonal: each string's norm is
    // individually constant, whatever the initial distribution.
    let config = small_config(2, 10, 1);
    let mut state =
        init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    // Spread amplitude over several strings.
    let base = state.data.row(0).to_owned();
    for (string, scale) in [(1usize, 0.5), (2, 0.25), (3, 0.125)] {
        let mut row = state.data.row_mut(string);
        row.assign(&base.mapv(|z| z * scale));
    }
    let before = state.sector_weights();
    let ctx = EvolutionContext::new(
        &config,
        PairPotential {
            strength: 0.0,
            range: 1.0,
        },
        &MCoupling::absent(),
    )
    .unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let after = traj.last().state.sector_weights();
    for string in 0..4 {
        assert!(
            (before[[0, string]] - after[[0, string]]).abs() < 1e-9,
            "string {string}"
        );
    }
}

#[test]
fn pair_coupling_feeds_exactly_the_contagion_transitions() {
    // N = 2, k = 1: craft one unit of amplitude on each string at a single
    // grid point, subtract the kinetic part, and read off which strings the
    // pair potential feeds.
    let config = small_config(2, 8, 1);
    let coupling = MCoupling::absent();
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let ctx_free = EvolutionContext::new(
        &config,
        PairPotential {
            strength: 0.0,
            range: 1.0,
        },
        &coupling,
    )
    .unwrap();
    let layout = ctx.layout.clone();
    // Put amplitude 1 on every string at the same central spatial point.
    let mut state = IndexedWaveFunction::zeros(layout.clone());
    let sp = layout.spatial_len / 2;
    for string in 0..layout.n_strings {
        state.data[[string, sp]] = Complex64::new(1.0, 0.0);
    }
    let full = ctx.apply_extended_hamiltonian(&state);
    let free = ctx_free.apply_extended_hamiltonian(&state);
    let v_part = &full.data - &free.data;
    // Expected: target (0,0) <- (0,0); targets (0,1),(1,0) <- nothing;
    // target (1,1) <- (1,1) + (0,1) + (1,0).
    let v_at = ctx.pair_values[0][sp];
    let idx = |a: usize, b: usize| layout.string_index(&[a, b]);
    assert!((v_part[[idx(0, 0), sp]].re - v_at).abs() < 1e-14);
    assert!(v_part[[idx(1, 0), sp]].norm() < 1e-14);
    assert!(v_part[[idx(0, 1), sp]].norm() < 1e-14);
    assert!((v_part[[idx(1, 1), sp]].re - 3.0 * v_at).abs() < 1e-14);
}

#[test]
fn three_atom_target_assembles_from_its_own_pair_only() {
    // N = 3, k = 1, target string (0,1,1): the coupled right-hand side is
    // V(x_b, x_c) (psi_011 + psi_001 + psi_010) with no V(x_a, ·) term.
    let config = small_config(3, 8, 1);
    let coupling = MCoupling::absent();
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let ctx_free = EvolutionContext::new(
        &config,
        PairPotential {
            strength: 0.0,
            range: 1.0,
        },
        &coupling,
    )
    .unwrap();
    let layout = ctx.layout.clone();

    // Distinct amplitude per string so contributions are distinguishable.
    let mut state = IndexedWaveFunction::zeros(layout.clone());
    for string in 0..layout.n_strings {
        for sp in 0..layout.spatial_len {
            state.data[[string, sp]] = Complex64::new((string + 1) as f64, 0.0);
        }
    }
    let v_part = &ctx.apply_extended_hamiltonian(&state).data
        - &ctx_free.apply_extended_hamiltonian(&state).data;

    // Atom order (a, b, c) = (0, 1, 2); pair index for (1, 2) in the context.
    let pair_bc = ctx
        .pairs()
        .iter()
        .position(|&(n, m)| (n, m) == (1, 2))
        .unwrap();
    let target = layout.string_index(&[0, 1, 1]);
    let amp = |s: &[usize]| (layout.string_index(s) + 1) as f64;
    let expected_coeff = amp(&[0, 1, 1]) + amp(&[0, 0, 1]) + amp(&[0, 1, 0]);
    for sp in 0..layout.spatial_len {
        let want = ctx.pair_values[pair_bc][sp] * expected_coeff;
        let got = v_part[[target, sp]];
        assert!(
            (got.re - want).abs() < 1e-12 && got.im.abs() < 1e-15,
            "spatial point {sp}: got {got}, want {want}"
        );
    }
}

#[test]
fn project_physical_is_the_string_sum() {
    let config = small_config(2, 10, 1);
    let layout = StateLayout::new(&config, &MCoupling::absent()).unwrap();
    let mut state = IndexedWaveFunction::zeros(layout.clone());
    // A single populated string projects to itself.
    state.data[[2, 5]] = Complex64::new(0.3, -0.1);
    let phys = state.project_physical();
    assert_eq!(phys[[0, 5]], Complex64::new(0.3, -0.1));
    // Two strings with opposite amplitudes cancel.
    state.data[[1, 5]] = Complex64::new(-0.3, 0.1);
    let phys = state.project_physical();
    assert!(phys[[0, 5]].norm() < 1e-16);
}

#[test]
fn projection_preserves_the_physical_sum() {
    let mut config = small_config(2, 12, 1);
    config.t_end = 0.3;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let evolved = &traj.last().state;
    let projected = apply_projection(evolved, 1).unwrap();
    let before = evolved.project_physical();
    let after = projected.project_physical();
    let diff = (&before - &after).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(diff < 1e-13);
    // After projection all norm sits on the fully intricate string.
    for atom in 0..2 {
        let m = intricacy_measures(&projected, atom, 1).unwrap();
        assert!((m.p1 - 1.0).abs() < 1e-9);
        assert!(m.p0.abs() < 1e-18);
        assert!(m.interference.abs() < 1e-12);
    }
}

#[test]
fn measures_identity_holds_mid_evolution() {
    // Intricacy must be *generated* before contagion can spread it: the pair
    // operator fixes the all-zero string, so this run couples M.
    let mut config = small_config(2, 12, 1);
    config.t_end = 1.0;
    config.dt = 0.002;
    let coupling = m_coupling(vec![1.0]);
    let state = init_state(&config, &coupling, &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let mut saw_partial = false;
    for snap in &traj.snapshots {
        for atom in 0..2 {
            let m = intricacy_measures(&snap.state, atom, 1).unwrap();
            let total = m.p1 + m.p0 + m.interference;
            assert!(
                (total - 1.0).abs() < 1e-12,
                "identity broke at t = {}: {total}",
                snap.t
            );
            if m.p1 > 0.0 && m.p1 < 1.0 {
                saw_partial = true;
            }
        }
    }
    assert!(saw_partial, "no partial intricacy developed; weak test setup");
}

#[test]
fn norm_is_conserved_through_the_run() {
    let mut config = small_config(2, 12, 1);
    config.t_end = 1.0;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    for snap in &traj.snapshots {
        assert!((snap.state.physical_norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn string_weight_flow_is_monotone() {
    // Weight may only flow toward componentwise-larger strings. Starting from
    // (1,0) — atom 0 tagged by an earlier interaction — contagion populates
    // (1,1), while (0,0) and (0,1) stay exactly empty: nothing ever lowers an
    // index.
    let mut config = small_config(2, 12, 1);
    config.t_end = 1.0;
    let state = init_state_on_string(
        &config,
        &MCoupling::absent(),
        &default_packets(&config),
        Some(&[1, 0]),
    )
    .unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let layout = &state.layout;
    let full = layout.string_index(&[1, 1]);
    let below = [layout.string_index(&[0, 0]), layout.string_index(&[0, 1])];
    for snap in &traj.snapshots {
        let w = snap.state.sector_weights();
        for &s in &below {
            assert!(w[[0, s]] < 1e-24, "lower string populated at t = {}", snap.t);
        }
    }
    let final_full = traj.last().state.sector_weights()[[0, full]];
    assert!(
        final_full > 1e-4,
        "no contagion into the fully intricate string: {final_full:e}"
    );
}

#[test]
fn stability_bound_is_enforced() {
    let mut config = small_config(2, 12, 1);
    config.dt = 1.0;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let err = evolve(&state, &ctx).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("stability bound"), "message: {msg}");
}

#[test]
fn norm_drift_aborts_with_a_diagnostic() {
    // A step just inside the formal bound is badly inaccurate: the norm
    // decays within a few snapshots and the run aborts.
    let mut config = small_config(2, 12, 1);
    let probe = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    config.dt = probe.max_stable_dt() * 0.99;
    config.t_end = 2.0;
    config.snapshot_interval = 0.5;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let err = evolve(&state, &ctx).unwrap_err();
    match err {
        crate::error::Error::Numeric(msg) => {
            assert!(msg.contains("norm drifted"), "message: {msg}")
        }
        other => panic!("expected a numeric abort, got {other}"),
    }
}

#[test]
fn intertwining_operator_identity_small_grid() {
    // A · H' = H_std · A entrywise on the dense matrices (N = 2, grid 8).
    let config = small_config(2, 8, 1);
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let h_ext = extended_hamiltonian_dense(&ctx);
    let h_std_sectors = standard_on_sectors_dense(&ctx);
    let a = projection_dense(&ctx, 1).unwrap();
    let lhs = a.dot(&h_ext);
    let rhs = h_std_sectors.dot(&a);
    let diff = crate::algebra::max_abs_entry(&(&lhs - &rhs));
    assert!(diff < 1e-12, "entrywise difference {diff:e}");
}

#[test]
fn intertwining_holds_with_m_coupling_on_random_states() {
    // With the M generation term the dense matrices get large, so check the
    // operator identity through its action on pseudo-random states.
    let mut config = small_config(2, 8, 1);
    config.dt = 0.002;
    let coupling = m_coupling(vec![1.0]);
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let h_ext = extended_hamiltonian_dense(&ctx);
    let h_std = standard_hamiltonian_dense(&ctx);
    let layout = ctx.layout.clone();

    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for _ in 0..3 {
        let mut state = IndexedWaveFunction::zeros(layout.clone());
        for z in state.data.iter_mut() {
            *z = Complex64::new(next(), next());
        }
        let v = flatten_state(&state);
        let hv = h_ext.dot(&v);
        let h_state = oracle::unflatten_state(&state, &hv);
        // A (H' psi): sum strings of H' psi, per label.
        let lhs = h_state.project_physical();
        // H_std (A psi): standard Hamiltonian applied to the string sum.
        let phys = state.project_physical();
        let mut rhs = phys.clone();
        for label in 0..layout.n_labels {
            let row = phys.row(label).to_owned();
            let out = h_std.dot(&row);
            rhs.row_mut(label).assign(&out);
        }
        let diff = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "action difference {diff:e}");
    }

    // The index-map application path agrees with the dense assembly.
    let mut state = IndexedWaveFunction::zeros(layout.clone());
    for z in state.data.iter_mut() {
        *z = Complex64::new(next(), next());
    }
    let via_map = ctx.apply_extended_hamiltonian(&state);
    let via_dense = oracle::unflatten_state(&state, &h_ext.dot(&flatten_state(&state)));
    let diff = (&via_map.data - &via_dense.data)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-11, "apply path difference {diff:e}");
}

#[test]
fn rk4_matches_dense_exponential_on_small_grid() {
    let mut config = small_config(2, 8, 1);
    config.dt = 0.001;
    config.t_end = 0.5;
    config.snapshot_interval = 0.25;
    let state = init_state(&config, &MCoupling::absent(), &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &MCoupling::absent()).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    let h = extended_hamiltonian_dense(&ctx);
    let psi0 = flatten_state(&state);
    for snap in &traj.snapshots[1..] {
        let exact = oracle::propagate_action(&h, &psi0, snap.t);
        let got = flatten_state(&snap.state);
        let err = max_abs_diff(&exact, &got);
        assert!(err < 1e-8, "t = {}: max amplitude error {err:e}", snap.t);
    }
}

#[test]
fn multichannel_sectors_conserve_their_weights() {
    // k = 2 with M in a superposition: each channel sector's physical weight
    // stays |c_j|² for the whole run, while intricacy grows inside sectors.
    let mut config = small_config(2, 8, 2);
    config.dt = 0.002;
    config.t_end = 1.0;
    config.snapshot_interval = 0.25;
    let c1 = 0.6f64.sqrt();
    let c2 = 0.4f64.sqrt();
    let coupling = m_coupling(vec![c1, c2]);
    let state = init_state(&config, &coupling, &default_packets(&config)).unwrap();
    let ctx = EvolutionContext::new(&config, test_potential(), &coupling).unwrap();
    let traj = evolve(&state, &ctx).unwrap();
    for snap in &traj.snapshots {
        let w1 = snap.state.label_physical_weight(0);
        let w2 = snap.state.label_physical_weight(1);
        assert!((w1 - 0.6).abs() < 1e-6, "t = {}: w1 = {w1}", snap.t);
        assert!((w2 - 0.4).abs() < 1e-6, "t = {}: w2 = {w2}", snap.t);
        // Generalized measure identity across both channels.
        for atom in 0..2 {
            let total = measure_identity_sum(&snap.state, atom).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "identity sum {total}");
        }
    }
    // Some intricacy was generated in both sectors by the end.
    let last = &traj.last().state;
    let m1 = intricacy_measures(last, 0, 1).unwrap();
    let m2 = intricacy_measures(last, 0, 2).unwrap();
    assert!(m1.p1 > 1e-4, "channel 1 intricacy {}", m1.p1);
    assert!(m2.p1 > 1e-4, "channel 2 intricacy {}", m2.p1);
}
