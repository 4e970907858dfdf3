//! Per-atom intricacy operator algebra.
//!
//! Each atom carries a channel index in `{0, 1, ..., k}`: 0 means not
//! intricate, `j ≥ 1` means intricate with channel `j`. The operators here
//! are explicit `(k+1)×(k+1)` complex matrices in the basis ordered
//! `(0, 1, ..., k)` (index 0 is the first coordinate):
//!
//! * `P_mu` — projector onto index `mu`;
//! * `S_j` — raiser mapping index 0 to channel `j` and annihilating
//!   everything else (a single 1 in row `j`, column 0);
//! * the pair operator `O` — contagion on an ordered pair of indices;
//! * the projection `A_j` — product of per-atom `(P_j + S_j)` factors,
//!   sending every string supported on `{0, j}` to the all-`j` string.
//!
//! For `k = 1` these are the spin-ladder matrices: with `σ_z = diag(-1, +1)`
//! in our index ordering, `P_0 = (I - σ_z)/2`, `P_1 = (I + σ_z)/2`, and
//! `S = σ_+ = (σ_x + iσ_y)/2`.
//!
//! There is deliberately no inverse of `S`: an index never decreases.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<Complex64>;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Number of intricacy channels. The per-atom index set is `{0, ..., k}`,
/// so the local dimension is `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCount(usize);

impl ChannelCount {
    pub fn new(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::config(format!(
                "channel count must be >= 1, got {k}"
            )));
        }
        Ok(ChannelCount(k))
    }

    pub fn channels(&self) -> usize {
        self.0
    }

    /// Per-atom local dimension `k + 1`.
    pub fn local_dim(&self) -> usize {
        self.0 + 1
    }
}

/// The complete set of single-atom operators for a given channel count.
#[derive(Debug, Clone)]
pub struct AtomOperators {
    channels: ChannelCount,
    projectors: Vec<CMatrix>,
    raisers: Vec<CMatrix>,
}

/// Builds every `P_mu` (`mu` in `0..=k`) and `S_j` (`j` in `1..=k`).
pub fn build_atom_operators(channels: ChannelCount) -> AtomOperators {
    let d = channels.local_dim();
    let projectors = (0..d)
        .map(|mu| {
            let mut m = CMatrix::zeros((d, d));
            m[[mu, mu]] = ONE;
            m
        })
        .collect();
    let raisers = (1..d)
        .map(|j| {
            let mut m = CMatrix::zeros((d, d));
            m[[j, 0]] = ONE;
            m
        })
        .collect();
    AtomOperators {
        channels,
        projectors,
        raisers,
    }
}

impl AtomOperators {
    pub fn channels(&self) -> ChannelCount {
        self.channels
    }

    /// `P_mu` for `mu` in `0..=k`.
    pub fn projector(&self, mu: usize) -> &CMatrix {
        &self.projectors[mu]
    }

    /// `S_j` for `j` in `1..=k`.
    pub fn raiser(&self, j: usize) -> &CMatrix {
        assert!(j >= 1, "raiser index starts at channel 1");
        &self.raisers[j - 1]
    }

    pub fn identity(&self) -> CMatrix {
        identity(self.channels.local_dim())
    }
}

/// Contagion operator on an ordered pair of atom indices:
///
/// `O = Σ_mu P_mu ⊗ P_mu + Σ_j (S_j P_0 ⊗ P_j + P_j ⊗ S_j P_0)`.
///
/// Its action on basis pairs is a deterministic index-transition map with
/// unit coefficients: equal indices are fixed, `(0, j)` and `(j, 0)` go to
/// `(j, j)`, and a pair carrying two *different* nonzero channels is
/// annihilated (there is no interaction between states intricate with
/// different channels). No output index is ever lower than its input.
#[derive(Debug, Clone)]
pub struct PairOperator {
    channels: ChannelCount,
    matrix: CMatrix,
    transitions: Vec<Option<(usize, usize)>>,
}

/// Builds the pair operator from the atom operators.
pub fn build_pair_operator(channels: ChannelCount) -> PairOperator {
    let ops = build_atom_operators(channels);
    let d = channels.local_dim();
    let mut matrix = CMatrix::zeros((d * d, d * d));
    for mu in 0..d {
        matrix = matrix + kron(ops.projector(mu), ops.projector(mu));
    }
    for j in 1..d {
        let sp0 = ops.raiser(j).dot(ops.projector(0));
        matrix = matrix + kron(&sp0, ops.projector(j)) + kron(ops.projector(j), &sp0);
    }

    let mut transitions = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            transitions.push(pair_transition(a, b));
        }
    }
    PairOperator {
        channels,
        matrix,
        transitions,
    }
}

fn pair_transition(a: usize, b: usize) -> Option<(usize, usize)> {
    match (a, b) {
        (0, 0) => Some((0, 0)),
        (0, j) => Some((j, j)),
        (j, 0) => Some((j, j)),
        (i, j) if i == j => Some((i, j)),
        _ => None,
    }
}

impl PairOperator {
    pub fn channels(&self) -> ChannelCount {
        self.channels
    }

    /// Dense `(k+1)² × (k+1)²` matrix, row/column index `a·(k+1) + b`.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Where the basis pair `(a, b)` is sent; `None` means annihilated.
    pub fn transition(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        self.transitions[a * self.channels.local_dim() + b]
    }

    /// All source pairs that land on the target pair `(a, b)`.
    pub fn sources_of(&self, a: usize, b: usize) -> Vec<(usize, usize)> {
        let d = self.channels.local_dim();
        let mut out = Vec::new();
        for sa in 0..d {
            for sb in 0..d {
                if self.transition(sa, sb) == Some((a, b)) {
                    out.push((sa, sb));
                }
            }
        }
        out
    }
}

/// Projection onto complete intricacy with one channel: the product over
/// atoms of `(P_j + S_j P_0) = (P_j + S_j)`.
///
/// A basis string whose indices all lie in `{0, j}` is sent to the all-`j`
/// string with coefficient 1; any string touching another channel is
/// annihilated.
#[derive(Debug, Clone)]
pub struct IntricacyProjection {
    channels: ChannelCount,
    n_atoms: usize,
    target: usize,
}

pub fn build_projection(
    channels: ChannelCount,
    n_atoms: usize,
    target_channel: usize,
) -> Result<IntricacyProjection> {
    if target_channel < 1 || target_channel > channels.channels() {
        return Err(Error::config(format!(
            "target channel {target_channel} outside 1..={}",
            channels.channels()
        )));
    }
    if n_atoms == 0 {
        return Err(Error::config("projection needs at least one atom"));
    }
    Ok(IntricacyProjection {
        channels,
        n_atoms,
        target: target_channel,
    })
}

impl IntricacyProjection {
    pub fn target_channel(&self) -> usize {
        self.target
    }

    /// Image of a basis string: the all-target string when every index is in
    /// `{0, target}`, `None` otherwise.
    pub fn map_string(&self, string: &[usize]) -> Option<Vec<usize>> {
        assert_eq!(string.len(), self.n_atoms);
        if string.iter().all(|&q| q == 0 || q == self.target) {
            Some(vec![self.target; self.n_atoms])
        } else {
            None
        }
    }

    /// Dense matrix on the string space of `n_atoms` indices
    /// (dimension `(k+1)^n_atoms`), built as a Kronecker product of the
    /// per-atom factors.
    pub fn matrix(&self) -> CMatrix {
        let ops = build_atom_operators(self.channels);
        let factor = ops.projector(self.target) + ops.raiser(self.target);
        let mut m = identity(1);
        for _ in 0..self.n_atoms {
            m = kron(&m, &factor);
        }
        m
    }
}

/// Embeds the pair operator into the string space of `n_atoms` indices,
/// acting on atom positions `(n, m)` and as identity elsewhere.
///
/// Strings are indexed little-endian: atom 0 is the least significant digit
/// in base `k + 1`.
pub fn pair_operator_on_strings(
    pair: &PairOperator,
    n_atoms: usize,
    n: usize,
    m: usize,
) -> CMatrix {
    assert!(n < n_atoms && m < n_atoms && n != m);
    let d = pair.channels.local_dim();
    let dim = d.pow(n_atoms as u32);
    let mut out = CMatrix::zeros((dim, dim));
    let mut digits = vec![0usize; n_atoms];
    for col in 0..dim {
        string_digits(col, d, &mut digits);
        let (a, b) = (digits[n], digits[m]);
        for sa in 0..d {
            for sb in 0..d {
                let w = pair.matrix[[sa * d + sb, a * d + b]];
                if w != Complex64::new(0.0, 0.0) {
                    let mut target = digits.clone();
                    target[n] = sa;
                    target[m] = sb;
                    out[[string_index(&target, d), col]] += w;
                }
            }
        }
    }
    out
}

/// Little-endian string index in base `local_dim`.
pub fn string_index(digits: &[usize], local_dim: usize) -> usize {
    let mut idx = 0;
    for &q in digits.iter().rev() {
        idx = idx * local_dim + q;
    }
    idx
}

/// Inverse of [`string_index`], writing into `digits`.
pub fn string_digits(mut index: usize, local_dim: usize, digits: &mut [usize]) {
    for q in digits.iter_mut() {
        *q = index % local_dim;
        index /= local_dim;
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::from_diag_elem(dim, ONE)
}

/// Kronecker product; indices combine as `row = i_a * b_rows + i_b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for ia in 0..ar {
        for ja in 0..ac {
            let w = a[[ia, ja]];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            for ib in 0..br {
                for jb in 0..bc {
                    out[[ia * br + ib, ja * bc + jb]] = w * b[[ib, jb]];
                }
            }
        }
    }
    out
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat2(rows: [[f64; 2]; 2]) -> CMatrix {
        CMatrix::from_shape_fn((2, 2), |(i, j)| Complex64::new(rows[i][j], 0.0))
    }

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        let diff = max_abs_entry(&(a - b));
        assert!(diff <= tol, "matrices differ by {diff:e}");
    }

    #[test]
    fn k1_matrices_match_ladder_forms() {
        let ops = build_atom_operators(ChannelCount::new(1).unwrap());
        assert_close(ops.projector(0), &mat2([[1.0, 0.0], [0.0, 0.0]]), 0.0);
        assert_close(ops.projector(1), &mat2([[0.0, 0.0], [0.0, 1.0]]), 0.0);
        assert_close(ops.raiser(1), &mat2([[0.0, 0.0], [1.0, 0.0]]), 0.0);
    }

    #[test]
    fn k1_pauli_correspondence() {
        // In the index ordering (0, 1) the intricate state is the *second*
        // coordinate, so sigma_z = diag(-1, +1) and sigma_y picks up the
        // matching sign; sigma_plus then raises 0 -> 1.
        let i = Complex64::i();
        let id = identity(2);
        let sz = CMatrix::from_diag(&ndarray::arr1(&[-ONE, ONE]));
        let sx = mat2([[0.0, 1.0], [1.0, 0.0]]);
        let mut sy = CMatrix::zeros((2, 2));
        sy[[0, 1]] = i;
        sy[[1, 0]] = -i;

        let ops = build_atom_operators(ChannelCount::new(1).unwrap());
        assert_close(ops.projector(0), &((&id - &sz).mapv(|z| z * 0.5)), 1e-15);
        assert_close(ops.projector(1), &((&id + &sz).mapv(|z| z * 0.5)), 1e-15);
        let splus = (&sx + &sy.mapv(|z| z * i)).mapv(|z| z * 0.5);
        assert_close(ops.raiser(1), &splus, 1e-15);
    }

    #[test]
    fn raiser_is_nilpotent() {
        for k in 1..=3 {
            let ops = build_atom_operators(ChannelCount::new(k).unwrap());
            for j in 1..=k {
                let s = ops.raiser(j);
                assert_close(&s.dot(s), &CMatrix::zeros(s.dim()), 0.0);
            }
        }
    }

    #[test]
    fn identity_suite_holds_for_small_k() {
        for k in 1..=3 {
            let channels = ChannelCount::new(k).unwrap();
            let ops = build_atom_operators(channels);
            let d = channels.local_dim();
            let id = identity(d);

            let mut sum = CMatrix::zeros((d, d));
            for mu in 0..d {
                let p = ops.projector(mu);
                assert_close(&p.dot(p), p, 0.0);
                sum = sum + p;
                for nu in 0..d {
                    if nu != mu {
                        assert_close(&p.dot(ops.projector(nu)), &CMatrix::zeros((d, d)), 0.0);
                    }
                }
            }
            assert_close(&sum, &id, 0.0);

            for j in 1..=k {
                let s = ops.raiser(j);
                assert_close(&s.dot(ops.projector(0)), s, 0.0);
                assert_close(&ops.projector(0).dot(s), &CMatrix::zeros((d, d)), 0.0);
                for nu in 0..d {
                    let ps = ops.projector(nu).dot(s);
                    if nu == j {
                        assert_close(&ps, s, 0.0);
                    } else {
                        assert_close(&ps, &CMatrix::zeros((d, d)), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn k2_raiser_projector_compositions() {
        // S_1 P_0 = S_1 and S_2 P_1 = 0, by explicit 3x3 multiplication.
        let ops = build_atom_operators(ChannelCount::new(2).unwrap());
        assert_close(&ops.raiser(1).dot(ops.projector(0)), ops.raiser(1), 0.0);
        assert_close(
            &ops.raiser(2).dot(ops.projector(1)),
            &CMatrix::zeros((3, 3)),
            0.0,
        );
    }

    #[test]
    fn k1_pair_transitions() {
        let pair = build_pair_operator(ChannelCount::new(1).unwrap());
        assert_eq!(pair.transition(0, 0), Some((0, 0)));
        assert_eq!(pair.transition(0, 1), Some((1, 1)));
        assert_eq!(pair.transition(1, 0), Some((1, 1)));
        assert_eq!(pair.transition(1, 1), Some((1, 1)));
    }

    #[test]
    fn k2_pair_annihilates_mixed_channels() {
        let pair = build_pair_operator(ChannelCount::new(2).unwrap());
        assert_eq!(pair.transition(0, 2), Some((2, 2)));
        assert_eq!(pair.transition(1, 2), None);
        assert_eq!(pair.transition(2, 1), None);
        // The matrix column of a mixed pair is identically zero.
        let d = 3;
        for row in 0..d * d {
            assert_eq!(pair.matrix()[[row, 1 * d + 2]], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn pair_matrix_agrees_with_transition_map() {
        for k in 1..=2 {
            let pair = build_pair_operator(ChannelCount::new(k).unwrap());
            let d = k + 1;
            for a in 0..d {
                for b in 0..d {
                    let col = a * d + b;
                    for sa in 0..d {
                        for sb in 0..d {
                            let row = sa * d + sb;
                            let expect = if pair.transition(a, b) == Some((sa, sb)) {
                                ONE
                            } else {
                                Complex64::new(0.0, 0.0)
                            };
                            assert_eq!(pair.matrix()[[row, col]], expect, "k={k} ({a},{b})");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pair_transitions_never_decrease_indices() {
        for k in 1..=3 {
            let pair = build_pair_operator(ChannelCount::new(k).unwrap());
            let d = k + 1;
            for a in 0..d {
                for b in 0..d {
                    if let Some((ta, tb)) = pair.transition(a, b) {
                        // Order: 0 below every channel; channels incomparable,
                        // so "not lower" means equal or raised from 0.
                        assert!(ta == a || a == 0);
                        assert!(tb == b || b == 0);
                    }
                }
            }
        }
    }

    #[test]
    fn projection_maps_strings_to_full_intricacy() {
        let channels = ChannelCount::new(1).unwrap();
        let a = build_projection(channels, 3, 1).unwrap();
        assert_eq!(a.map_string(&[0, 1, 1]), Some(vec![1, 1, 1]));
        assert_eq!(a.map_string(&[1, 1, 1]), Some(vec![1, 1, 1]));
        assert_eq!(a.map_string(&[0, 0, 0]), Some(vec![1, 1, 1]));

        let channels2 = ChannelCount::new(2).unwrap();
        let a1 = build_projection(channels2, 2, 1).unwrap();
        assert_eq!(a1.map_string(&[0, 2]), None);
        assert_eq!(a1.map_string(&[0, 1]), Some(vec![1, 1]));
    }

    #[test]
    fn projection_rejects_bad_channel() {
        let channels = ChannelCount::new(2).unwrap();
        assert!(build_projection(channels, 2, 0).is_err());
        assert!(build_projection(channels, 2, 3).is_err());
    }

    #[test]
    fn projection_intertwines_pair_operator() {
        // A · O = A on the pair index space for k = 1.
        let channels = ChannelCount::new(1).unwrap();
        let pair = build_pair_operator(channels);
        let a = build_projection(channels, 2, 1).unwrap().matrix();
        let ao = a.dot(pair.matrix());
        super::tests::assert_close(&ao, &a, 1e-15);
    }

    #[test]
    fn projection_intertwines_on_matching_subspace_k2() {
        // For k = 2, A_j · O = A_j restricted to strings with indices in {0, j}.
        let channels = ChannelCount::new(2).unwrap();
        let pair = build_pair_operator(channels);
        for j in 1..=2 {
            let a = build_projection(channels, 2, j).unwrap().matrix();
            let ao = a.dot(pair.matrix());
            let d = 3;
            for sa in 0..d {
                for sb in 0..d {
                    if (sa == 0 || sa == j) && (sb == 0 || sb == j) {
                        let col = sa * d + sb;
                        for row in 0..d * d {
                            let diff = (ao[[row, col]] - a[[row, col]]).norm();
                            assert!(diff <= 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn string_indexing_round_trips() {
        let mut digits = [0usize; 4];
        for idx in 0..3usize.pow(4) {
            string_digits(idx, 3, &mut digits);
            assert_eq!(string_index(&digits, 3), idx);
        }
    }

    #[test]
    fn pair_operator_on_strings_matches_example() {
        // Three atoms, k = 1, operator acting on atoms (1, 2): the target
        // string (0,1,1) receives (0,1,1), (0,0,1), (0,1,0) and nothing from
        // strings with atom 0 raised.
        let channels = ChannelCount::new(1).unwrap();
        let pair = build_pair_operator(channels);
        let m = pair_operator_on_strings(&pair, 3, 1, 2);
        let row = string_index(&[0, 1, 1], 2);
        let expected_sources = [[0, 1, 1], [0, 0, 1], [0, 1, 0]];
        for col in 0..8 {
            let mut digits = [0usize; 3];
            string_digits(col, 2, &mut digits);
            let expect = expected_sources.contains(&digits);
            let val = m[[row, col]];
            if expect {
                assert_eq!(val, ONE);
            } else {
                assert_eq!(val, Complex64::new(0.0, 0.0));
            }
        }
    }
}
