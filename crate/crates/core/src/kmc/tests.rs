use super::*;

fn plane_source(z0: f64, half: f64, channel: u8) -> SourceSpec {
    SourceSpec {
        geometry: SourceGeometry::Plane {
            z0,
            half_thickness: half,
        },
        timing: SourceTiming::Initial,
        channel,
    }
}

#[test]
fn zero_particles_are_rejected() {
    let params = GasParams::new(0, [10.0, 10.0, 10.0], 1);
    assert!(init_gas(&params).is_err());
}

#[test]
fn sampled_speed_scale_is_unity() {
    let params = GasParams::new(10_000, [10.0, 10.0, 25.0], 42);
    let gas = init_gas(&params).unwrap();
    let v = gas.measured_speed_scale();
    assert!((v - 1.0).abs() < 0.02, "measured speed scale {v}");
}

#[test]
fn initial_positions_do_not_overlap() {
    let params = GasParams::new(2_000, [8.0, 8.0, 12.0], 7);
    let gas = init_gas(&params).unwrap();
    let d2 = gas.sphere_diameter() * gas.sphere_diameter();
    let pos = gas.positions();
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let dx = {
                let mut d = pos[i][0] - pos[j][0];
                if d > 4.0 {
                    d -= 8.0
                } else if d < -4.0 {
                    d += 8.0
                }
                d
            };
            let dy = {
                let mut d = pos[i][1] - pos[j][1];
                if d > 4.0 {
                    d -= 8.0
                } else if d < -4.0 {
                    d += 8.0
                }
                d
            };
            let dz = pos[i][2] - pos[j][2];
            assert!(
                dx * dx + dy * dy + dz * dz >= d2 * (1.0 - 1e-9),
                "particles {i} and {j} overlap"
            );
        }
    }
}

#[test]
fn measured_mean_free_path_matches_the_target() {
    let params = GasParams::new(20_000, [10.0, 10.0, 50.0], 3);
    let mut gas = init_gas(&params).unwrap();
    gas.run_until(3.0).unwrap();
    let mfp = gas.measured_mfp().expect("collisions happened");
    assert!(
        (mfp - 1.0).abs() < 0.1,
        "measured mean free path {mfp} outside 1.0 +- 10%"
    );
}

#[test]
fn plane_source_tags_exactly_the_slab() {
    let params = GasParams::new(5_000, [10.0, 10.0, 30.0], 11);
    let mut gas = init_gas(&params).unwrap();
    let tagged = gas.inject_source(&plane_source(15.0, 0.5, 1)).unwrap();
    assert!(tagged > 0);
    for (p, &tag) in gas.positions().iter().zip(gas.tags()) {
        let inside = (p[2] - 15.0).abs() <= 0.5;
        assert_eq!(tag == 1, inside, "z = {}", p[2]);
    }
}

#[test]
fn zero_thickness_slab_is_a_noop() {
    let params = GasParams::new(1_000, [8.0, 8.0, 16.0], 5);
    let mut gas = init_gas(&params).unwrap();
    let tagged = gas.inject_source(&plane_source(8.0, 0.0, 1)).unwrap();
    assert_eq!(tagged, 0);
    assert_eq!(gas.tag_counts()[1], 0);
}

#[test]
fn two_sources_tag_disjoint_populations() {
    let params = GasParams::new(20_000, [10.0, 10.0, 50.0], 19);
    let mut gas = init_gas(&params).unwrap();
    let n1 = gas.inject_source(&plane_source(10.0, 0.5, 1)).unwrap();
    let n2 = gas.inject_source(&plane_source(40.0, 0.5, 2)).unwrap();
    assert!(n1 > 0 && n2 > 0);
    let history = gas.run_contagion(25.0, 1.0, 0.5).unwrap();
    let last = history.stats.last().unwrap();
    // Tags are single-valued and never revert, so the two populations stay
    // disjoint; both grow by contagion.
    assert_eq!(
        last.tag_counts[0] + last.tag_counts[1] + last.tag_counts[2],
        20_000
    );
    assert!(last.tag_counts[1] > n1);
    assert!(last.tag_counts[2] > n2);
}

#[test]
fn untagged_gas_stays_untagged_and_full_gas_stays_full() {
    let params = GasParams::new(3_000, [8.0, 8.0, 16.0], 23);
    let mut gas = init_gas(&params).unwrap();
    let history = gas.run_contagion(20.0, 2.0, 0.5).unwrap();
    for row in &history.rows {
        assert_eq!(row.f1, 0.0);
        assert_eq!(row.f2, 0.0);
    }

    let mut gas = init_gas(&params).unwrap();
    gas.inject_source(&plane_source(8.0, 8.0, 1)).unwrap();
    assert_eq!(gas.tag_counts()[1], 3_000);
    let history = gas.run_contagion(20.0, 2.0, 0.5).unwrap();
    for row in &history.rows {
        assert_eq!(row.f1, 1.0, "t = {} z = {}", row.t, row.z_center);
    }
}

#[test]
fn head_on_collision_spreads_the_tag_and_conserves_energy() {
    let mut params = GasParams::new(2, [10.0, 10.0, 10.0], 0);
    params.diameter_override = Some(0.5);
    let pos = vec![[5.0, 5.0, 3.0], [5.0, 5.0, 7.0]];
    let vel = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let tags = vec![1, 0];
    let mut gas = GasEnsemble::from_parts(params, pos, vel, tags).unwrap();
    let e0 = gas.kinetic_energy();
    gas.run_until(3.0).unwrap();
    gas.synchronize();
    assert_eq!(gas.tags(), &[1, 1]);
    assert_eq!(gas.n_collisions(), 1);
    assert!((gas.kinetic_energy() - e0).abs() < 1e-12);
    // Head-on equal masses: normal components exchange, so they recede.
    assert!(gas.velocities()[0][2] < 0.0 && gas.velocities()[1][2] > 0.0);
}

#[test]
fn energy_and_transverse_momentum_are_conserved_over_many_collisions() {
    let params = GasParams::new(400, [6.0, 6.0, 12.0], 31);
    let mut gas = init_gas(&params).unwrap();
    let e0 = gas.kinetic_energy();
    let p0 = gas.momentum();
    gas.run_until(10.0).unwrap();
    assert!(gas.n_collisions() > 500, "collisions: {}", gas.n_collisions());
    let e1 = gas.kinetic_energy();
    let p1 = gas.momentum();
    assert!((e1 - e0).abs() / e0 < 1e-10, "energy drift {:.3e}", (e1 - e0) / e0);
    // Periodic x, y conserve momentum; z walls reverse it.
    assert!((p1[0] - p0[0]).abs() < 1e-9);
    assert!((p1[1] - p0[1]).abs() < 1e-9);
}

#[test]
fn tag_counts_never_decrease() {
    let params = GasParams::new(8_000, [10.0, 10.0, 40.0], 37);
    let mut gas = init_gas(&params).unwrap();
    gas.inject_source(&plane_source(20.0, 0.5, 1)).unwrap();
    let history = gas.run_contagion(20.0, 1.0, 0.5).unwrap();
    let mut prev = 0usize;
    for stats in &history.stats {
        assert!(stats.tag_counts[1] >= prev);
        prev = stats.tag_counts[1];
    }
    assert!(prev > history.stats[0].tag_counts[1], "no contagion happened");
}

#[test]
fn disabled_contagion_conserves_the_tagged_count_exactly() {
    let mut params = GasParams::new(8_000, [10.0, 10.0, 40.0], 37);
    params.contagion_enabled = false;
    let mut gas = init_gas(&params).unwrap();
    let tagged = gas.inject_source(&plane_source(20.0, 0.5, 1)).unwrap();
    let history = gas.run_contagion(20.0, 2.0, 0.5).unwrap();
    for stats in &history.stats {
        assert_eq!(stats.tag_counts[1], tagged);
    }
    assert!(gas.n_collisions() > 0);
}

#[test]
fn bin_fractions_sum_to_one() {
    let params = GasParams::new(5_000, [10.0, 10.0, 30.0], 41);
    let mut gas = init_gas(&params).unwrap();
    gas.inject_source(&plane_source(15.0, 1.0, 1)).unwrap();
    let history = gas.run_contagion(20.0, 5.0, 0.5).unwrap();
    for row in &history.rows {
        assert!((row.f0 + row.f1 + row.f2 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn same_seed_reproduces_the_run_exactly() {
    let params = GasParams::new(2_000, [8.0, 8.0, 24.0], 99);
    let run = |params: &GasParams| {
        let mut gas = init_gas(params).unwrap();
        gas.inject_source(&plane_source(12.0, 0.5, 1)).unwrap();
        gas.run_until(10.0).unwrap();
        gas.synchronize();
        (
            gas.positions().to_vec(),
            gas.velocities().to_vec(),
            gas.tag_counts(),
            gas.n_collisions(),
        )
    };
    let a = run(&params);
    let b = run(&params);
    assert_eq!(a.2, b.2);
    assert_eq!(a.3, b.3);
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn synthetic_linear_front_fits_exactly() {
    let mut history = ContagionHistory {
        bin_width: 0.5,
        source_z: 50.0,
        box_size: [10.0, 10.0, 100.0],
        rows: Vec::new(),
        stats: Vec::new(),
    };
    for k in 0..=30 {
        let t = k as f64;
        history.stats.push(SampleStats {
            t,
            tag_counts: [0, 1, 0],
            kinetic_energy: 1.0,
            momentum: [0.0; 3],
            collisions: 0,
        });
        history.rows.push(BinRow {
            t,
            z_center: 50.0 + 0.6 * t,
            f0: 0.0,
            f1: 1.0,
            f2: 0.0,
            count: 10,
        });
    }
    let fit = fit_front(&history, 0.05, 5.0).unwrap();
    assert!((fit.speed - 0.6).abs() < 1e-12);
    assert!(fit.linear_sse < 1e-18);
    assert!((fit.r2 - 1.0).abs() < 1e-12);
    assert!(!fit.truncated);
}

#[test]
fn short_history_is_rejected_for_fitting() {
    let history = ContagionHistory {
        bin_width: 0.5,
        source_z: 10.0,
        box_size: [10.0, 10.0, 20.0],
        rows: Vec::new(),
        stats: vec![SampleStats {
            t: 5.0,
            tag_counts: [0; 3],
            kinetic_energy: 0.0,
            momentum: [0.0; 3],
            collisions: 0,
        }],
    };
    assert!(fit_front(&history, 0.05, 5.0).is_err());
}

#[test]
fn passthrough_rule_still_spreads_within_channels() {
    let mut params = GasParams::new(10_000, [10.0, 10.0, 50.0], 53);
    params.mixed_rule = MixedChannelRule::PassThrough;
    let mut gas = init_gas(&params).unwrap();
    gas.inject_source(&plane_source(15.0, 0.5, 1)).unwrap();
    gas.inject_source(&plane_source(35.0, 0.5, 2)).unwrap();
    let history = gas.run_contagion(20.0, 2.0, 0.5).unwrap();
    let last = history.stats.last().unwrap();
    assert!(last.tag_counts[1] > history.stats[0].tag_counts[1]);
    assert!(last.tag_counts[2] > history.stats[0].tag_counts[2]);
    let e0 = history.stats[0].kinetic_energy;
    let e1 = last.kinetic_energy;
    assert!((e1 - e0).abs() / e0 < 1e-10);
}

#[test]
fn track_source_tags_a_cylinder_around_the_segment() {
    let params = GasParams::new(5_000, [10.0, 10.0, 30.0], 71);
    let mut gas = init_gas(&params).unwrap();
    let a = [5.0, 5.0, 5.0];
    let b = [5.0, 5.0, 25.0];
    let radius = 1.0;
    let source = SourceSpec {
        geometry: SourceGeometry::Track { a, b, radius },
        timing: SourceTiming::Initial,
        channel: 1,
    };
    let tagged = gas.inject_source(&source).unwrap();
    assert!(tagged > 0);
    for (p, &tag) in gas.positions().iter().zip(gas.tags()) {
        // Inside the z-span of the track the criterion is transverse
        // distance; beyond the endpoints it is distance to the endpoint.
        let dz = p[2].clamp(a[2], b[2]);
        let d2 = (p[0] - 5.0).powi(2) + (p[1] - 5.0).powi(2) + (p[2] - dz).powi(2);
        assert_eq!(tag == 1, d2 <= radius * radius, "p = {p:?}");
    }
}

#[test]
fn continuous_point_source_keeps_tagging() {
    let mut params = GasParams::new(5_000, [10.0, 10.0, 30.0], 61);
    params.contagion_enabled = false;
    let mut gas = init_gas(&params).unwrap();
    let source = SourceSpec {
        geometry: SourceGeometry::Point {
            center: [5.0, 5.0, 15.0],
            radius: 1.5,
        },
        timing: SourceTiming::Continuous,
        channel: 1,
    };
    gas.inject_source(&source).unwrap();
    let history = gas.run_contagion(20.0, 2.0, 0.5).unwrap();
    let first = history.stats.first().unwrap().tag_counts[1];
    let last = history.stats.last().unwrap().tag_counts[1];
    // With contagion off, growth can only come from the source re-tagging
    // fresh particles that wander through it.
    assert!(last > first, "continuous source did not tag: {first} -> {last}");
}
