//! Time evolution of an index-resolved wave function on a discretized
//! configuration space.
//!
//! The state is a family of complex amplitude grids, one per intricacy
//! string (and per internal label of the external particle M when it is
//! coupled). The extended generator acts as
//!
//! * a central-difference kinetic term, identical on every string;
//! * pair potentials routed through the contagion pair operator, so a
//!   pair interaction also raises the pair's intricacy indices;
//! * optionally a M–S potential routed through `(S_j P_0 + P_j)`, so the
//!   first M interaction flips an atom's index from 0 to the channel `j`
//!   selected by M's internal label, and later interactions act as ordinary
//!   potential scattering.
//!
//! Summing over strings recovers ordinary Schrödinger dynamics; that is the
//! consistency check exercised against the independent solvers in
//! [`oracle`].
//!
//! Units: ħ = 1 and every mass = 1. Atoms live on a 1D hard-wall box with
//! `grid_points` interior points, spacing `dx = box_length / (grid_points + 1)`.

pub mod oracle;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::algebra::{self, ChannelCount, PairOperator};
use crate::error::{Error, Result};

/// Hard cap on the number of complex amplitudes in one state.
pub const MAX_STATE_AMPLITUDES: usize = 1 << 23;

/// RK4 stays stable for purely oscillatory dynamics up to |λ| dt = 2√2;
/// we validate against this with a safety margin.
pub const RK4_STABILITY_LIMIT: f64 = 2.6;

#[derive(Debug, Clone)]
pub struct LatticeConfig {
    pub n_atoms: usize,
    pub grid_points: usize,
    pub box_length: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    pub channels: ChannelCount,
    /// Abort threshold on the drift of the physical-projection norm.
    pub norm_tolerance: f64,
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n_atoms) {
            return Err(Error::config(format!(
                "n_atoms must be in 2..=4, got {}",
                self.n_atoms
            )));
        }
        if self.grid_points < 8 {
            return Err(Error::config(format!(
                "grid_points must be >= 8, got {}",
                self.grid_points
            )));
        }
        if !(self.box_length > 0.0) {
            return Err(Error::config("box_length must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.t_end > 0.0) || !(self.snapshot_interval > 0.0) {
            return Err(Error::config("t_end and snapshot_interval must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.box_length / (self.grid_points + 1) as f64
    }

    /// Interior grid coordinate of point `i` (walls sit at 0 and `box_length`).
    pub fn coordinate(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }
}

/// Truncated Gaussian pair potential `V0 · exp(-(x-x')²/b²)`, zero beyond
/// `|x-x'| > 4b`. Symmetric and compactly supported.
#[derive(Debug, Clone, Copy)]
pub struct PairPotential {
    pub strength: f64,
    pub range: f64,
}

impl PairPotential {
    pub fn value(&self, x: f64, xp: f64) -> f64 {
        let d = x - xp;
        if d.abs() > 4.0 * self.range {
            0.0
        } else {
            self.strength * (-(d * d) / (self.range * self.range)).exp()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GaussianPacket {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl GaussianPacket {
    fn amplitude(&self, x: f64) -> Complex64 {
        let arg = -(x - self.center).powi(2) / (2.0 * self.width * self.width);
        Complex64::from_polar(arg.exp(), self.momentum * x)
    }
}

/// Coupling of the external particle M to the atoms: a spatial potential of
/// the same truncated-Gaussian form as the pair potential, plus M's internal
/// state, a superposition over channels with amplitudes `channel_weights`.
#[derive(Debug, Clone)]
pub struct MCoupling {
    pub present: bool,
    pub strength: f64,
    pub range: f64,
    pub packet: GaussianPacket,
    /// Amplitude c_j for channel j (index 0 is channel 1). Normalized so the
    /// squared amplitudes sum to 1.
    pub channel_weights: Vec<f64>,
}

impl MCoupling {
    pub fn absent() -> Self {
        MCoupling {
            present: false,
            strength: 0.0,
            range: 1.0,
            packet: GaussianPacket {
                center: 0.0,
                width: 1.0,
                momentum: 0.0,
            },
            channel_weights: Vec::new(),
        }
    }

    fn validate(&self, channels: ChannelCount) -> Result<()> {
        if !self.present {
            return Ok(());
        }
        if self.channel_weights.len() != channels.channels() {
            return Err(Error::config(format!(
                "expected {} channel weights, got {}",
                channels.channels(),
                self.channel_weights.len()
            )));
        }
        let norm2: f64 = self.channel_weights.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "channel weights must have unit squared norm, got {norm2}"
            )));
        }
        if !(self.range > 0.0) {
            return Err(Error::config("M coupling range must be positive"));
        }
        Ok(())
    }
}

/// Index bookkeeping shared by states and the evolution context.
///
/// Sector `s = label · n_strings + string`; spatial index is little-endian
/// over atom coordinates, with M's coordinate `y` as the most significant
/// digit when present.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    pub n_atoms: usize,
    pub grid_points: usize,
    pub dx: f64,
    pub channels: ChannelCount,
    pub n_strings: usize,
    pub n_labels: usize,
    pub has_m: bool,
    pub spatial_len: usize,
}

impl StateLayout {
    pub fn new(config: &LatticeConfig, coupling: &MCoupling) -> Result<Self> {
        config.validate()?;
        coupling.validate(config.channels)?;
        let d = config.channels.local_dim();
        let n_strings = d.pow(config.n_atoms as u32);
        let (n_labels, has_m) = if coupling.present {
            (config.channels.channels(), true)
        } else {
            (1, false)
        };
        let n_coords = config.n_atoms + has_m as usize;
        let spatial_len = config.grid_points.pow(n_coords as u32);
        let total = n_strings * n_labels * spatial_len;
        if total > MAX_STATE_AMPLITUDES {
            return Err(Error::config(format!(
                "state needs {total} amplitudes, cap is {MAX_STATE_AMPLITUDES}"
            )));
        }
        Ok(StateLayout {
            n_atoms: config.n_atoms,
            grid_points: config.grid_points,
            dx: config.dx(),
            channels: config.channels,
            n_strings,
            n_labels,
            has_m,
            spatial_len,
        })
    }

    pub fn n_sectors(&self) -> usize {
        self.n_strings * self.n_labels
    }

    pub fn sector(&self, label: usize, string: usize) -> usize {
        label * self.n_strings + string
    }

    /// Volume element of the configuration grid.
    pub fn dv(&self) -> f64 {
        self.dx.powi((self.n_atoms + self.has_m as usize) as i32)
    }

    pub fn string_digits(&self, index: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.n_atoms];
        algebra::string_digits(index, self.channels.local_dim(), &mut digits);
        digits
    }

    pub fn string_index(&self, digits: &[usize]) -> usize {
        algebra::string_index(digits, self.channels.local_dim())
    }

    /// Stride of atom `n`'s coordinate in the flattened spatial index.
    pub fn atom_stride(&self, n: usize) -> usize {
        self.grid_points.pow(n as u32)
    }

    /// Stride of M's coordinate (most significant digit).
    pub fn y_stride(&self) -> usize {
        self.grid_points.pow(self.n_atoms as u32)
    }

    /// Channel selected by M's internal label (labels are 0-based).
    pub fn label_channel(&self, label: usize) -> usize {
        label + 1
    }
}

/// The indexed wave function: one complex grid per (label, string) sector.
#[derive(Debug, Clone)]
pub struct IndexedWaveFunction {
    pub layout: StateLayout,
    /// Shape `(n_sectors, spatial_len)`.
    pub data: Array2<Complex64>,
}

impl IndexedWaveFunction {
    pub fn zeros(layout: StateLayout) -> Self {
        let data = Array2::zeros((layout.n_sectors(), layout.spatial_len));
        IndexedWaveFunction { layout, data }
    }

    /// Pointwise sum over strings, one grid function per label.
    pub fn project_physical(&self) -> Array2<Complex64> {
        let mut out = Array2::zeros((self.layout.n_labels, self.layout.spatial_len));
        for label in 0..self.layout.n_labels {
            for string in 0..self.layout.n_strings {
                let sector = self.layout.sector(label, string);
                let row = self.data.row(sector);
                let mut acc = out.row_mut(label);
                acc += &row;
            }
        }
        out
    }

    /// Norm of the physical projection, including the volume element.
    pub fn physical_norm(&self) -> f64 {
        let phys = self.project_physical();
        (phys.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.layout.dv()).sqrt()
    }

    /// Squared norms per (label, string) sector.
    pub fn sector_weights(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.layout.n_labels, self.layout.n_strings));
        for label in 0..self.layout.n_labels {
            for string in 0..self.layout.n_strings {
                let sector = self.layout.sector(label, string);
                out[[label, string]] = self
                    .data
                    .row(sector)
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum::<f64>()
                    * self.layout.dv();
            }
        }
        out
    }

    /// Physical norm of one label sector (the squared weight of that branch).
    pub fn label_physical_weight(&self, label: usize) -> f64 {
        let mut acc: Array1<Complex64> = Array1::zeros(self.layout.spatial_len);
        for string in 0..self.layout.n_strings {
            acc += &self.data.row(self.layout.sector(label, string));
        }
        acc.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.layout.dv()
    }
}

/// Applies the projection onto complete intricacy with `target_channel`:
/// within each label, every string supported on `{0, target}` is summed into
/// the all-target string; strings touching other channels are annihilated.
pub fn apply_projection(
    state: &IndexedWaveFunction,
    target_channel: usize,
) -> Result<IndexedWaveFunction> {
    let layout = &state.layout;
    let proj = algebra::build_projection(layout.channels, layout.n_atoms, target_channel)?;
    let mut out = IndexedWaveFunction::zeros(layout.clone());
    for label in 0..layout.n_labels {
        for string in 0..layout.n_strings {
            let digits = layout.string_digits(string);
            if let Some(target) = proj.map_string(&digits) {
                let tgt_sector = layout.sector(label, layout.string_index(&target));
                let src = state.data.row(layout.sector(label, string)).to_owned();
                let mut dst = out.data.row_mut(tgt_sector);
                dst += &src;
            }
        }
    }
    Ok(out)
}

/// Per-atom intricacy measures: `p1` is the squared norm of the sum of all
/// strings whose index at `atom` equals `channel`, `p0` the same for index 0,
/// and `interference` the cross term between the two sums. All three are
/// normalized by the squared physical norm, so for a single channel they add
/// to 1 exactly (to round-off) even in the presence of integrator drift.
#[derive(Debug, Clone, Copy)]
pub struct Measures {
    pub p1: f64,
    pub p0: f64,
    pub interference: f64,
}

pub fn intricacy_measures(
    state: &IndexedWaveFunction,
    atom: usize,
    channel: usize,
) -> Result<Measures> {
    let layout = &state.layout;
    if atom >= layout.n_atoms {
        return Err(Error::config(format!(
            "atom index {atom} out of range for {} atoms",
            layout.n_atoms
        )));
    }
    if channel < 1 || channel > layout.channels.channels() {
        return Err(Error::config(format!("channel {channel} out of range")));
    }
    let (u0, uj) = partial_sums(state, atom, channel);
    let dv = layout.dv();
    let p0: f64 = u0.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
    let p1: f64 = uj.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
    let cross: Complex64 = u0
        .iter()
        .zip(uj.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        * dv;
    let norm2 = state.physical_norm().powi(2).max(1e-300);
    Ok(Measures {
        p1: p1 / norm2,
        p0: p0 / norm2,
        interference: 2.0 * cross.re / norm2,
    })
}

/// Sum of sectors with `q_atom = 0` and with `q_atom = channel`, over all
/// labels (flattened label-major so the inner products include the label).
fn partial_sums(
    state: &IndexedWaveFunction,
    atom: usize,
    channel: usize,
) -> (Array1<Complex64>, Array1<Complex64>) {
    let layout = &state.layout;
    let len = layout.n_labels * layout.spatial_len;
    let mut u0: Array1<Complex64> = Array1::zeros(len);
    let mut uj: Array1<Complex64> = Array1::zeros(len);
    for label in 0..layout.n_labels {
        let off = label * layout.spatial_len;
        for string in 0..layout.n_strings {
            let digits = layout.string_digits(string);
            let dst = if digits[atom] == 0 {
                &mut u0
            } else if digits[atom] == channel {
                &mut uj
            } else {
                continue;
            };
            let row = state.data.row(layout.sector(label, string));
            let mut slice = dst.slice_mut(ndarray::s![off..off + layout.spatial_len]);
            slice += &row;
        }
    }
    (u0, uj)
}

/// Generalized measure identity: `p0 + Σ_j (p_j + interference_j)` over all
/// channels, which equals the squared physical norm.
pub fn measure_identity_sum(state: &IndexedWaveFunction, atom: usize) -> Result<f64> {
    let mut total = 0.0;
    let mut p0_once = None;
    for channel in 1..=state.layout.channels.channels() {
        let m = intricacy_measures(state, atom, channel)?;
        total += m.p1 + m.interference;
        p0_once.get_or_insert(m.p0);
    }
    Ok(total + p0_once.unwrap_or(0.0))
}

/// Builds the initial product state: symmetrized Gaussian packets for the
/// atoms (times M's packet and internal superposition when coupled), placed
/// entirely on the all-zero string.
pub fn init_state(
    config: &LatticeConfig,
    coupling: &MCoupling,
    packets: &[GaussianPacket],
) -> Result<IndexedWaveFunction> {
    init_state_on_string(config, coupling, packets, None)
}

/// Like [`init_state`] but placing the product state on an arbitrary string,
/// representing a gas in which some atoms were already tagged by an earlier
/// interaction. `None` means the all-zero string.
pub fn init_state_on_string(
    config: &LatticeConfig,
    coupling: &MCoupling,
    packets: &[GaussianPacket],
    string: Option<&[usize]>,
) -> Result<IndexedWaveFunction> {
    let layout = StateLayout::new(config, coupling)?;
    let start_string = match string {
        Some(digits) => {
            if digits.len() != config.n_atoms
                || digits.iter().any(|&q| q > config.channels.channels())
            {
                return Err(Error::config("invalid initial intricacy string"));
            }
            layout.string_index(digits)
        }
        None => 0,
    };
    if packets.len() != config.n_atoms {
        return Err(Error::config(format!(
            "need one packet per atom ({}), got {}",
            config.n_atoms,
            packets.len()
        )));
    }
    for p in packets {
        if p.center <= 0.0 || p.center >= config.box_length {
            return Err(Error::config("packet center outside the box"));
        }
        if !(p.width > 0.0) {
            return Err(Error::config("packet width must be positive"));
        }
    }

    let g = config.grid_points;
    let per_atom: Vec<Vec<Complex64>> = packets
        .iter()
        .map(|p| (0..g).map(|i| p.amplitude(config.coordinate(i))).collect())
        .collect();

    // Symmetrized product over atom permutations.
    let mut psi: Array1<Complex64> = Array1::zeros(g.pow(config.n_atoms as u32));
    let perms = permutations(config.n_atoms);
    let mut coords = vec![0usize; config.n_atoms];
    for idx in 0..psi.len() {
        spatial_digits(idx, g, &mut coords);
        let mut acc = Complex64::new(0.0, 0.0);
        for perm in &perms {
            let mut term = Complex64::new(1.0, 0.0);
            for (atom, &packet_id) in perm.iter().enumerate() {
                term *= per_atom[packet_id][coords[atom]];
            }
            acc += term;
        }
        psi[idx] = acc;
    }
    let dx_n = config.dx().powi(config.n_atoms as i32);
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx_n;
    if norm2 < 1e-12 {
        return Err(Error::config(format!(
            "symmetrization norm {norm2:.3e} below tolerance; packets overlap destructively"
        )));
    }
    let scale = 1.0 / norm2.sqrt();
    psi.mapv_inplace(|z| z * scale);

    let mut state = IndexedWaveFunction::zeros(layout.clone());
    if layout.has_m {
        let chi: Vec<Complex64> = (0..g)
            .map(|i| coupling.packet.amplitude(config.coordinate(i)))
            .collect();
        let chi_norm2: f64 = chi.iter().map(|z| z.norm_sqr()).sum::<f64>() * config.dx();
        if chi_norm2 < 1e-12 {
            return Err(Error::config("M packet norm below tolerance"));
        }
        let chi_scale = 1.0 / chi_norm2.sqrt();
        for label in 0..layout.n_labels {
            let weight = coupling.channel_weights[label];
            if weight == 0.0 {
                continue;
            }
            let sector = layout.sector(label, start_string);
            let mut row = state.data.row_mut(sector);
            for (sp, value) in row.iter_mut().enumerate() {
                let y_idx = sp / layout.y_stride();
                let x_idx = sp % layout.y_stride();
                *value = weight * chi[y_idx] * chi_scale * psi[x_idx];
            }
        }
    } else {
        let mut row = state.data.row_mut(layout.sector(0, start_string));
        for (value, amp) in row.iter_mut().zip(psi.iter()) {
            *value = *amp;
        }
    }
    Ok(state)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut out);
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn spatial_digits(mut index: usize, grid: usize, digits: &mut [usize]) {
    for d in digits.iter_mut() {
        *d = index % grid;
        index /= grid;
    }
}

/// Precomputed application context for the extended generator.
pub struct EvolutionContext {
    pub layout: StateLayout,
    pub config: LatticeConfig,
    pub potential: PairPotential,
    pub coupling: MCoupling,
    kinetic_coeff: f64,
    /// Atom pairs `(n, m)` with `n < m`.
    pairs: Vec<(usize, usize)>,
    /// Per pair, the potential value at every spatial point.
    pair_values: Vec<Vec<f64>>,
    /// Per pair, per target string, the source strings feeding it.
    pair_sources: Vec<Vec<Vec<usize>>>,
    /// Per atom, the M potential value at every spatial point (when coupled).
    u_values: Vec<Vec<f64>>,
}

impl EvolutionContext {
    pub fn new(
        config: &LatticeConfig,
        potential: PairPotential,
        coupling: &MCoupling,
    ) -> Result<Self> {
        let layout = StateLayout::new(config, coupling)?;
        let pair_op = algebra::build_pair_operator(config.channels);

        let pairs: Vec<(usize, usize)> = (0..config.n_atoms)
            .flat_map(|n| ((n + 1)..config.n_atoms).map(move |m| (n, m)))
            .collect();

        let g = config.grid_points;
        let coords: Vec<f64> = (0..g).map(|i| config.coordinate(i)).collect();
        let mut spatial = vec![0usize; config.n_atoms];

        let mut pair_values = Vec::with_capacity(pairs.len());
        for &(n, m) in &pairs {
            let mut vals = vec![0.0f64; layout.spatial_len];
            for (sp, val) in vals.iter_mut().enumerate() {
                let x_idx = sp % layout.y_stride();
                spatial_digits(x_idx, g, &mut spatial);
                *val = potential.value(coords[spatial[n]], coords[spatial[m]]);
            }
            pair_values.push(vals);
        }

        let pair_sources = pairs
            .iter()
            .map(|&(n, m)| string_sources(&layout, &pair_op, n, m))
            .collect();

        let mut u_values = Vec::new();
        if layout.has_m {
            let u_pot = PairPotential {
                strength: coupling.strength,
                range: coupling.range,
            };
            for atom in 0..config.n_atoms {
                let mut vals = vec![0.0f64; layout.spatial_len];
                for (sp, val) in vals.iter_mut().enumerate() {
                    let y_idx = sp / layout.y_stride();
                    let x_idx = sp % layout.y_stride();
                    spatial_digits(x_idx, g, &mut spatial);
                    *val = u_pot.value(coords[y_idx], coords[spatial[atom]]);
                }
                u_values.push(vals);
            }
        }

        Ok(EvolutionContext {
            layout,
            config: config.clone(),
            potential,
            coupling: coupling.clone(),
            kinetic_coeff: 1.0 / (2.0 * config.dx() * config.dx()),
            pairs,
            pair_values,
            pair_sources,
            u_values,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Spectral-radius estimate of the generator, used for the step bound.
    pub fn spectral_radius_estimate(&self) -> f64 {
        let n_coords = self.layout.n_atoms + self.layout.has_m as usize;
        let kinetic = n_coords as f64 * 4.0 * self.kinetic_coeff;
        let pair = self.pairs.len() as f64 * self.potential.strength.abs();
        let m = if self.layout.has_m {
            2.0 * self.layout.n_atoms as f64 * self.coupling.strength.abs()
        } else {
            0.0
        };
        kinetic + pair + m
    }

    /// Largest stable RK4 step for this generator.
    pub fn max_stable_dt(&self) -> f64 {
        RK4_STABILITY_LIMIT / self.spectral_radius_estimate()
    }

    /// Applies the extended generator `H'` (not including the factor `-i`).
    pub fn apply_extended_hamiltonian(&self, state: &IndexedWaveFunction) -> IndexedWaveFunction {
        assert_eq!(
            state.layout, self.layout,
            "state and context grids do not match"
        );
        let mut out = IndexedWaveFunction::zeros(self.layout.clone());
        self.apply_into(&state.data, &mut out.data);
        out
    }

    fn apply_into(&self, data: &Array2<Complex64>, out: &mut Array2<Complex64>) {
        out.fill(Complex64::new(0.0, 0.0));
        let layout = &self.layout;
        let g = layout.grid_points;

        for sector in 0..layout.n_sectors() {
            let src = data.row(sector);
            let mut dst = out.row_mut(sector);
            let src_slice = src.as_slice().expect("contiguous row");
            let dst_slice = dst.as_slice_mut().expect("contiguous row");
            for atom in 0..layout.n_atoms {
                add_laplacian(
                    src_slice,
                    dst_slice,
                    layout.atom_stride(atom),
                    g,
                    -self.kinetic_coeff,
                );
            }
            if layout.has_m {
                add_laplacian(src_slice, dst_slice, layout.y_stride(), g, -self.kinetic_coeff);
            }
        }

        // Pair potentials routed through the contagion index map.
        for (pair_idx, _) in self.pairs.iter().enumerate() {
            let values = &self.pair_values[pair_idx];
            let sources = &self.pair_sources[pair_idx];
            for label in 0..layout.n_labels {
                for target in 0..layout.n_strings {
                    if sources[target].is_empty() {
                        continue;
                    }
                    let mut dst = out.row_mut(layout.sector(label, target));
                    let dst_slice = dst.as_slice_mut().expect("contiguous row");
                    for &source in &sources[target] {
                        let src = data.row(layout.sector(label, source));
                        let src_slice = src.as_slice().expect("contiguous row");
                        for ((d, s), v) in dst_slice
                            .iter_mut()
                            .zip(src_slice.iter())
                            .zip(values.iter())
                        {
                            *d += s * v;
                        }
                    }
                }
            }
        }

        // M–S generation term: for label z (channel j), the potential U(y, x_n)
        // feeds strings with q_n = j from both q (diagonal) and q with n reset
        // to 0 (the index flip).
        if layout.has_m {
            for label in 0..layout.n_labels {
                let channel = layout.label_channel(label);
                for atom in 0..layout.n_atoms {
                    let values = &self.u_values[atom];
                    for target in 0..layout.n_strings {
                        let digits = layout.string_digits(target);
                        if digits[atom] != channel {
                            continue;
                        }
                        let mut flipped = digits.clone();
                        flipped[atom] = 0;
                        let flip_idx = layout.string_index(&flipped);
                        let t_sector = layout.sector(label, target);
                        for source in [flip_idx, target] {
                            let src = data.row(layout.sector(label, source)).to_owned();
                            let mut dst = out.row_mut(t_sector);
                            let dst_slice = dst.as_slice_mut().expect("contiguous row");
                            for ((d, s), v) in dst_slice
                                .iter_mut()
                                .zip(src.iter())
                                .zip(values.iter())
                            {
                                *d += s * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// For the pair `(n, m)`, lists for every target string the source strings
/// that the pair operator routes into it.
fn string_sources(
    layout: &StateLayout,
    pair_op: &PairOperator,
    n: usize,
    m: usize,
) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); layout.n_strings];
    for (target, slot) in out.iter_mut().enumerate() {
        let digits = layout.string_digits(target);
        for (sa, sb) in pair_op.sources_of(digits[n], digits[m]) {
            let mut source = digits.clone();
            source[n] = sa;
            source[m] = sb;
            slot.push(layout.string_index(&source));
        }
    }
    out
}

/// Dirichlet central-difference second derivative along one coordinate,
/// accumulated with the given coefficient: `out += coeff · Δ_1d(input)`.
fn add_laplacian(input: &[Complex64], out: &mut [Complex64], stride: usize, extent: usize, coeff: f64) {
    let block = stride * extent;
    let n_blocks = input.len() / block;
    for blk in 0..n_blocks {
        let base = blk * block;
        for lo in 0..stride {
            for i in 0..extent {
                let idx = base + i * stride + lo;
                let mut acc = -2.0 * input[idx];
                if i > 0 {
                    acc += input[idx - stride];
                }
                if i + 1 < extent {
                    acc += input[idx + stride];
                }
                out[idx] += acc * coeff;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: IndexedWaveFunction,
}

#[derive(Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has snapshots")
    }
}

/// Classical RK4 on `dψ/dt = -i H' ψ`, with snapshots at multiples of the
/// configured snapshot interval. The step is clipped to divide the snapshot
/// interval exactly and validated against the stability bound; a drift of
/// the physical-projection norm beyond the configured tolerance aborts.
pub fn evolve(initial: &IndexedWaveFunction, ctx: &EvolutionContext) -> Result<Trajectory> {
    let config = &ctx.config;
    let max_dt = ctx.max_stable_dt();
    if config.dt > max_dt {
        return Err(Error::config(format!(
            "dt {} exceeds the RK4 stability bound {:.6} = {RK4_STABILITY_LIMIT}/spectral-radius",
            config.dt, max_dt
        )));
    }
    let steps_per_snapshot = (config.snapshot_interval / config.dt).ceil().max(1.0) as usize;
    let dt = config.snapshot_interval / steps_per_snapshot as f64;
    let n_snapshots = (config.t_end / config.snapshot_interval).round().max(1.0) as usize;

    let norm0 = initial.physical_norm();
    let mut snapshots = Vec::with_capacity(n_snapshots + 1);
    snapshots.push(Snapshot {
        t: 0.0,
        state: initial.clone(),
    });

    let mut state = initial.clone();
    let shape = state.data.raw_dim();
    let mut h_psi = Array2::zeros(shape.clone());
    let mut stage = Array2::zeros(shape.clone());
    let mut acc = Array2::zeros(shape);

    for snap in 1..=n_snapshots {
        for _ in 0..steps_per_snapshot {
            // k1
            ctx.apply_into(&state.data, &mut h_psi);
            let k1 = h_psi.mapv(|z| z * Complex64::new(0.0, -1.0));
            // k2
            stage.assign(&state.data);
            stage.scaled_add(Complex64::new(0.5 * dt, 0.0), &k1);
            ctx.apply_into(&stage, &mut h_psi);
            let k2 = h_psi.mapv(|z| z * Complex64::new(0.0, -1.0));
            // k3
            stage.assign(&state.data);
            stage.scaled_add(Complex64::new(0.5 * dt, 0.0), &k2);
            ctx.apply_into(&stage, &mut h_psi);
            let k3 = h_psi.mapv(|z| z * Complex64::new(0.0, -1.0));
            // k4
            stage.assign(&state.data);
            stage.scaled_add(Complex64::new(dt, 0.0), &k3);
            ctx.apply_into(&stage, &mut h_psi);
            let k4 = h_psi.mapv(|z| z * Complex64::new(0.0, -1.0));

            acc.assign(&k1);
            acc.scaled_add(Complex64::new(2.0, 0.0), &k2);
            acc.scaled_add(Complex64::new(2.0, 0.0), &k3);
            acc += &k4;
            state.data.scaled_add(Complex64::new(dt / 6.0, 0.0), &acc);
        }
        let t = snap as f64 * config.snapshot_interval;
        let norm = state.physical_norm();
        if (norm - norm0).abs() > config.norm_tolerance {
            return Err(Error::numeric(format!(
                "physical norm drifted from {norm0:.9} to {norm:.9} at t = {t:.4}; \
                 reduce dt (stability bound {:.6})",
                max_dt
            )));
        }
        snapshots.push(Snapshot {
            t,
            state: state.clone(),
        });
    }
    Ok(Trajectory { snapshots })
}

/// One CSV row of the per-snapshot measure report.
#[derive(Debug, Clone)]
pub struct MeasureRow {
    pub t: f64,
    pub atom: usize,
    pub channel: usize,
    pub p1: f64,
    pub p0: f64,
    pub interference: f64,
    pub phys_norm: f64,
}

pub fn measure_rows(trajectory: &Trajectory) -> Result<Vec<MeasureRow>> {
    let mut rows = Vec::new();
    for snap in &trajectory.snapshots {
        let layout = &snap.state.layout;
        let phys_norm = snap.state.physical_norm();
        for atom in 0..layout.n_atoms {
            for channel in 1..=layout.channels.channels() {
                let m = intricacy_measures(&snap.state, atom, channel)?;
                rows.push(MeasureRow {
                    t: snap.t,
                    atom,
                    channel,
                    p1: m.p1,
                    p0: m.p0,
                    interference: m.interference,
                    phys_norm,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests;
