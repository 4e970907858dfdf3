//! Independent dense reference solvers.
//!
//! Everything here deliberately avoids the index-map application path of the
//! main solver: the extended generator is assembled as an explicit dense
//! matrix from Kronecker products of the algebra matrices, and time evolution
//! is done either by a Padé matrix exponential or by a scaled Taylor
//! expansion of the exponential acting on a vector. These are the oracles the
//! RK4 solver is checked against.

use ndarray::{s, Array1};
use num_complex::Complex64;

use crate::algebra::{self, CMatrix};
use crate::error::{Error, Result};

use super::{EvolutionContext, IndexedWaveFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dirichlet second-difference kinetic matrix `-(1/2) d²/dx²` on the grid.
fn kinetic_matrix(grid: usize, dx: f64) -> CMatrix {
    let c = 1.0 / (2.0 * dx * dx);
    let mut m = CMatrix::zeros((grid, grid));
    for i in 0..grid {
        m[[i, i]] = Complex64::new(2.0 * c, 0.0);
        if i > 0 {
            m[[i, i - 1]] = Complex64::new(-c, 0.0);
        }
        if i + 1 < grid {
            m[[i, i + 1]] = Complex64::new(-c, 0.0);
        }
    }
    m
}

/// Identity of the given dimension, complex.
fn eye(dim: usize) -> CMatrix {
    algebra::identity(dim)
}

/// Kronecker-lift a one-coordinate operator to coordinate `coord` of
/// `n_coords` grid coordinates (coordinate 0 least significant).
fn lift_coordinate(op: &CMatrix, grid: usize, n_coords: usize, coord: usize) -> CMatrix {
    let low = grid.pow(coord as u32);
    let high = grid.pow((n_coords - 1 - coord) as u32);
    algebra::kron(&eye(high), &algebra::kron(op, &eye(low)))
}

/// Embed a single-atom index-space operator at atom `n` of the string space.
fn lift_atom_operator(op: &CMatrix, local_dim: usize, n_atoms: usize, n: usize) -> CMatrix {
    let low = local_dim.pow(n as u32);
    let high = local_dim.pow((n_atoms - 1 - n) as u32);
    algebra::kron(&eye(high), &algebra::kron(op, &eye(low)))
}

/// Dense standard Hamiltonian on the physical configuration space (no index
/// structure): kinetic terms plus the bare pair potentials, plus the bare
/// M–S potential when M is coupled.
pub fn standard_hamiltonian_dense(ctx: &EvolutionContext) -> CMatrix {
    let layout = &ctx.layout;
    let g = layout.grid_points;
    let n_coords = layout.n_atoms + layout.has_m as usize;
    let dim = layout.spatial_len;
    let kin1 = kinetic_matrix(g, layout.dx);

    let mut h = CMatrix::zeros((dim, dim));
    for coord in 0..n_coords {
        h = h + lift_coordinate(&kin1, g, n_coords, coord);
    }
    for (pair_idx, _) in ctx.pairs().iter().enumerate() {
        for (sp, v) in ctx.pair_values[pair_idx].iter().enumerate() {
            h[[sp, sp]] += Complex64::new(*v, 0.0);
        }
    }
    if layout.has_m {
        for vals in &ctx.u_values {
            for (sp, v) in vals.iter().enumerate() {
                h[[sp, sp]] += Complex64::new(*v, 0.0);
            }
        }
    }
    h
}

/// Dense extended generator on the full sector ⊗ spatial space, assembled
/// from the algebra matrices (Kronecker route, not the index maps).
pub fn extended_hamiltonian_dense(ctx: &EvolutionContext) -> CMatrix {
    let layout = &ctx.layout;
    let g = layout.grid_points;
    let d = layout.channels.local_dim();
    let n_coords = layout.n_atoms + layout.has_m as usize;
    let spatial = layout.spatial_len;
    let dim = layout.n_sectors() * spatial;
    let kin1 = kinetic_matrix(g, layout.dx);

    let mut h = CMatrix::zeros((dim, dim));

    // Kinetic part, identical in every sector.
    let mut kin = CMatrix::zeros((spatial, spatial));
    for coord in 0..n_coords {
        kin = kin + lift_coordinate(&kin1, g, n_coords, coord);
    }
    for sector in 0..layout.n_sectors() {
        let off = sector * spatial;
        let mut block = h.slice_mut(s![off..off + spatial, off..off + spatial]);
        block += &kin;
    }

    // Pair potentials times the pair contagion operator on strings.
    let pair_op = algebra::build_pair_operator(layout.channels);
    for (pair_idx, &(n, m)) in ctx.pairs().iter().enumerate() {
        let on_strings = algebra::pair_operator_on_strings(&pair_op, layout.n_atoms, n, m);
        let values = &ctx.pair_values[pair_idx];
        for label in 0..layout.n_labels {
            for ts in 0..layout.n_strings {
                for ss in 0..layout.n_strings {
                    let w = on_strings[[ts, ss]];
                    if w == ZERO {
                        continue;
                    }
                    let ro = layout.sector(label, ts) * spatial;
                    let co = layout.sector(label, ss) * spatial;
                    for (sp, v) in values.iter().enumerate() {
                        h[[ro + sp, co + sp]] += w * v;
                    }
                }
            }
        }
    }

    // M–S generation term: U(y, x_n) times (S_j P_0 + P_j) at atom n, with
    // the channel j selected by the label.
    if layout.has_m {
        let ops = algebra::build_atom_operators(layout.channels);
        for label in 0..layout.n_labels {
            let j = layout.label_channel(label);
            let w_matrix = ops.raiser(j).dot(ops.projector(0)) + ops.projector(j);
            for atom in 0..layout.n_atoms {
                let on_strings = lift_atom_operator(&w_matrix, d, layout.n_atoms, atom);
                let values = &ctx.u_values[atom];
                for ts in 0..layout.n_strings {
                    for ss in 0..layout.n_strings {
                        let w = on_strings[[ts, ss]];
                        if w == ZERO {
                            continue;
                        }
                        let ro = layout.sector(label, ts) * spatial;
                        let co = layout.sector(label, ss) * spatial;
                        for (sp, v) in values.iter().enumerate() {
                            h[[ro + sp, co + sp]] += w * v;
                        }
                    }
                }
            }
        }
    }
    h
}

/// Dense matrix of the full-intricacy projection on the extended space:
/// within each label, `(sum over strings supported on {0, j}) placed at the
/// all-j string`, tensored with the spatial identity.
pub fn projection_dense(ctx: &EvolutionContext, target_channel: usize) -> Result<CMatrix> {
    let layout = &ctx.layout;
    let proj = algebra::build_projection(layout.channels, layout.n_atoms, target_channel)?;
    let strings = proj.matrix();
    let spatial = layout.spatial_len;
    let dim = layout.n_sectors() * spatial;
    let mut a = CMatrix::zeros((dim, dim));
    for label in 0..layout.n_labels {
        for ts in 0..layout.n_strings {
            for ss in 0..layout.n_strings {
                let w = strings[[ts, ss]];
                if w == ZERO {
                    continue;
                }
                let ro = layout.sector(label, ts) * spatial;
                let co = layout.sector(label, ss) * spatial;
                for sp in 0..spatial {
                    a[[ro + sp, co + sp]] = w;
                }
            }
        }
    }
    Ok(a)
}

/// Block-diagonal lift of the standard Hamiltonian to every sector.
pub fn standard_on_sectors_dense(ctx: &EvolutionContext) -> CMatrix {
    let layout = &ctx.layout;
    let spatial = layout.spatial_len;
    let h_std = standard_hamiltonian_dense(ctx);
    let dim = layout.n_sectors() * spatial;
    let mut h = CMatrix::zeros((dim, dim));
    for sector in 0..layout.n_sectors() {
        let off = sector * spatial;
        let mut block = h.slice_mut(s![off..off + spatial, off..off + spatial]);
        block.assign(&h_std);
    }
    h
}

/// Flattens a state into the dense oracle ordering (sector-major).
pub fn flatten_state(state: &IndexedWaveFunction) -> Array1<Complex64> {
    let mut v = Array1::zeros(state.data.len());
    for (i, z) in state.data.iter().enumerate() {
        v[i] = *z;
    }
    v
}

pub fn unflatten_state(
    template: &IndexedWaveFunction,
    v: &Array1<Complex64>,
) -> IndexedWaveFunction {
    let mut out = template.clone();
    for (dst, src) in out.data.iter_mut().zip(v.iter()) {
        *dst = *src;
    }
    out
}

/// `exp(A) v` by scaling and Taylor summation, accurate to round-off.
///
/// The matrix is split as `exp(A) = exp(A/s)^s` with `‖A/s‖₁ ≤ 1/2`; each
/// segment sums the Taylor series until terms fall below 1e-16 of the
/// running result.
pub fn expm_action(a: &CMatrix, v: &Array1<Complex64>) -> Array1<Complex64> {
    let norm = one_norm(a);
    let segments = (norm / 0.5).ceil().max(1.0) as usize;
    let inv_s = 1.0 / segments as f64;
    let mut w = v.clone();
    let mut term = Array1::zeros(v.len());
    for _ in 0..segments {
        term.assign(&w);
        let mut acc = w.clone();
        for j in 1..=120 {
            let next = a.dot(&term).mapv(|z| z * (inv_s / j as f64));
            term = next;
            acc += &term;
            let term_norm: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let acc_norm: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if term_norm <= 1e-16 * acc_norm.max(1e-300) {
                break;
            }
        }
        w = acc;
    }
    w
}

/// Matrix exponential by scaling-and-squaring with a Padé(13) approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let theta13 = 5.371920351148152;
    let norm = one_norm(a);
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(1.0 / f64::powi(2.0, squarings as i32), 0.0);
    let a_scaled = a.mapv(|z| z * scale);
    let mut result = pade13(&a_scaled);
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

// Padé(13) coefficients, descending from b0.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let id = eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = a6.mapv(|z| z * PADE13[13])
        + a4.mapv(|z| z * PADE13[11])
        + a2.mapv(|z| z * PADE13[9]);
    let u_poly = a6.dot(&u_inner)
        + a6.mapv(|z| z * PADE13[7])
        + a4.mapv(|z| z * PADE13[5])
        + a2.mapv(|z| z * PADE13[3])
        + id.mapv(|z| z * PADE13[1]);
    let u = a.dot(&u_poly);

    let v_inner = a6.mapv(|z| z * PADE13[12])
        + a4.mapv(|z| z * PADE13[10])
        + a2.mapv(|z| z * PADE13[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * PADE13[6])
        + a4.mapv(|z| z * PADE13[4])
        + a2.mapv(|z| z * PADE13[2])
        + id.mapv(|z| z * PADE13[0]);

    let denom = &v - &u;
    let numer = &v + &u;
    solve_dense(denom, numer).expect("Padé denominator is singular")
}

/// Gaussian elimination with partial pivoting for `A X = B`.
pub fn solve_dense(mut a: CMatrix, mut b: CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    assert_eq!(n, b.nrows());
    let m = b.ncols();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = a[[col, col]].norm();
        for row in (col + 1)..n {
            let mag = a[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 {
            return Err(Error::numeric("singular matrix in dense solve"));
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap([col, j], [pivot_row, j]);
            }
            for j in 0..m {
                b.swap([col, j], [pivot_row, j]);
            }
        }
        let pivot = a[[col, col]];
        for row in (col + 1)..n {
            let factor = a[[row, col]] / pivot;
            if factor == ZERO {
                continue;
            }
            for j in col..n {
                let v = a[[col, j]];
                a[[row, j]] -= factor * v;
            }
            for j in 0..m {
                let v = b[[col, j]];
                b[[row, j]] -= factor * v;
            }
        }
    }
    let mut x = CMatrix::zeros((n, m));
    for col in (0..n).rev() {
        let pivot = a[[col, col]];
        for j in 0..m {
            let mut sum = b[[col, j]];
            for k in (col + 1)..n {
                sum -= a[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = sum / pivot;
        }
    }
    Ok(x)
}

fn one_norm(a: &CMatrix) -> f64 {
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        let sum: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        max = max.max(sum);
    }
    max
}

/// Propagates a vector with `exp(-i H t)` through the Padé exponential.
pub fn propagate_expm(h: &CMatrix, psi0: &Array1<Complex64>, t: f64) -> Array1<Complex64> {
    let gen = h.mapv(|z| z * Complex64::new(0.0, -t));
    expm(&gen).dot(psi0)
}

/// Propagates a vector with `exp(-i H t)` through the Taylor action.
pub fn propagate_action(h: &CMatrix, psi0: &Array1<Complex64>, t: f64) -> Array1<Complex64> {
    let gen = h.mapv(|z| z * Complex64::new(0.0, -t));
    expm_action(&gen, psi0)
}

pub fn max_abs_diff(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub const fn complex_one() -> Complex64 {
    ONE
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_zero_is_identity() {
        let z = CMatrix::zeros((3, 3));
        let e = expm(&z);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[[i, j]] - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn expm_matches_scalar_exponential_on_diagonal() {
        let mut a = CMatrix::zeros((2, 2));
        a[[0, 0]] = Complex64::new(0.3, -1.2);
        a[[1, 1]] = Complex64::new(-2.0, 0.7);
        let e = expm(&a);
        assert!((e[[0, 0]] - a[[0, 0]].exp()).norm() < 1e-13);
        assert!((e[[1, 1]] - a[[1, 1]].exp()).norm() < 1e-13);
    }

    #[test]
    fn expm_rotation_block() {
        // exp of the antisymmetric generator is a rotation.
        let theta = 0.77f64;
        let mut a = CMatrix::zeros((2, 2));
        a[[0, 1]] = Complex64::new(-theta, 0.0);
        a[[1, 0]] = Complex64::new(theta, 0.0);
        let e = expm(&a);
        assert!((e[[0, 0]].re - theta.cos()).abs() < 1e-13);
        assert!((e[[0, 1]].re + theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn action_agrees_with_pade_on_random_nonnormal_matrix() {
        // Deterministic pseudo-random fill, including a strong non-normal part.
        let n = 24;
        let mut seed = 0x243f6a8885a308d3u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut a = CMatrix::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = Complex64::new(next(), next());
                if j > i {
                    a[[i, j]] *= 3.0;
                }
            }
        }
        let mut v = Array1::zeros(n);
        for i in 0..n {
            v[i] = Complex64::new(next(), next());
        }
        let via_pade = expm(&a).dot(&v);
        let via_action = expm_action(&a, &v);
        let denom: f64 = via_pade.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff = max_abs_diff(&via_pade, &via_action);
        assert!(diff / denom < 1e-12, "relative diff {:.3e}", diff / denom);
    }

    #[test]
    fn dense_solve_round_trips() {
        let a = array![
            [Complex64::new(2.0, 0.0), Complex64::new(1.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(3.0, 0.5)],
        ];
        let x_true = array![
            [Complex64::new(1.0, 2.0)],
            [Complex64::new(-0.5, 0.25)],
        ];
        let b = a.dot(&x_true);
        let x = solve_dense(a, b).unwrap();
        for i in 0..2 {
            assert!((x[[i, 0]] - x_true[[i, 0]]).norm() < 1e-13);
        }
    }
}
