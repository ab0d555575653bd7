//! Finite-range power-law Ising chain and its transfer matrices.
//!
//! A block of `N` spins is packed into an integer: bit `i − 1` holds
//! `(s_i + 1) / 2`, so `s_1` is the least-significant bit. Along the chain
//! the lowest bit is the oldest spin; a newly generated spin enters at bit
//! `N − 1` and the oldest one is dropped, `η' = ⌊η / 2⌋ + x · 2^{N−1}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{perron_pair, PerronPair};

/// Largest interaction range accepted. The transfer matrix is dense with
/// `4^N` entries.
pub const MAX_RANGE: usize = 14;

/// Physical parameters of one chain: range `N`, amplitude `J0`, decay
/// exponent `δ`, field `B` and temperature `T` (in units with `k_B = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    range: usize,
    j0: f64,
    delta: f64,
    field: f64,
    temperature: f64,
}

impl CouplingSpec {
    pub fn new(range: usize, j0: f64, delta: f64, field: f64, temperature: f64) -> Result<Self> {
        if range == 0 {
            return Err(Error::domain("interaction range N must be at least 1"));
        }
        if range > MAX_RANGE {
            return Err(Error::capability(format!(
                "interaction range N = {range} exceeds the supported maximum {MAX_RANGE}"
            )));
        }
        if !(j0.is_finite() && j0 >= 0.0) {
            return Err(Error::domain(format!(
                "coupling amplitude J0 = {j0} must be finite and nonnegative (ferromagnetic)"
            )));
        }
        if !delta.is_finite() {
            return Err(Error::domain(format!("decay exponent delta = {delta} must be finite")));
        }
        if delta <= 1.0 {
            return Err(Error::domain(format!(
                "decay exponent delta = {delta} must exceed 1: for delta <= 1 the energy is nonextensive"
            )));
        }
        if !field.is_finite() {
            return Err(Error::domain(format!("field B = {field} must be finite")));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::domain(format!(
                "temperature T = {temperature} must be finite and positive"
            )));
        }
        let beta = 1.0 / temperature;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!(
                "inverse temperature 1/T is not finite for T = {temperature}"
            )));
        }
        Ok(Self {
            range,
            j0,
            delta,
            field,
            temperature,
        })
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    /// Number of `N`-spin blocks, `2^N`.
    pub fn n_states(&self) -> usize {
        1 << self.range
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.range, self.j0, self.delta, self.field, temperature)
    }

    /// `J(k) = J0 / k^δ` for `1 ≤ k ≤ N`.
    pub fn coupling(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.range {
            return Err(Error::domain(format!(
                "coupling distance k = {k} outside [1, {}]",
                self.range
            )));
        }
        Ok(self.j(k))
    }

    #[inline]
    pub(crate) fn j(&self, k: usize) -> f64 {
        self.j0 / (k as f64).powf(self.delta)
    }
}

/// An `N`-spin block packed into an integer (see module docs for bit order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockIndex(pub usize);

impl BlockIndex {
    /// Packs `spins[i] = s_{i+1} ∈ {−1, +1}`.
    pub fn encode(spins: &[i8]) -> Result<Self> {
        if spins.len() > usize::BITS as usize - 1 {
            return Err(Error::capability("block too long to encode"));
        }
        let mut eta = 0usize;
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => eta |= 1 << i,
                -1 => {}
                other => return Err(Error::domain(format!("spin value {other} is not ±1"))),
            }
        }
        Ok(Self(eta))
    }

    pub fn decode(self, len: usize) -> Vec<i8> {
        (0..len).map(|i| self.spin(i)).collect()
    }

    /// Spin `s_{i+1}` as ±1.
    #[inline]
    pub fn spin(self, i: usize) -> i8 {
        if (self.0 >> i) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Flip every spin of an `len`-spin block.
    #[inline]
    pub fn complement(self, len: usize) -> Self {
        Self(!self.0 & ((1 << len) - 1))
    }

    /// State after emitting `symbol` (0 = down, 1 = up).
    #[inline]
    pub fn successor(self, len: usize, symbol: usize) -> Self {
        Self((self.0 >> 1) + (symbol << (len - 1)))
    }
}

/// `X_η = −B Σ_i s_i − Σ_{i=1}^{N−1} Σ_{k=1}^{N−i} J(i) s_k s_{k+i}`.
pub fn block_internal_energy(eta: BlockIndex, spec: &CouplingSpec) -> f64 {
    let n = spec.range;
    let s = eta.decode(n);
    let magnetization: f64 = s.iter().map(|&x| x as f64).sum();
    let mut pairs = 0.0;
    for i in 1..n {
        let j = spec.j(i);
        for k in 0..(n - i) {
            pairs += j * (s[k] * s[k + i]) as f64;
        }
    }
    -spec.field * magnetization - pairs
}

/// Block-pairing interaction energy of two adjacent blocks,
/// `Y = −Σ_{i=1}^{N} Σ_{k=1}^{i} J(i) s^L_{N−k+1} s^R_k`.
///
/// For `N ≥ 2` this pairing does not reproduce the pairwise distances of the
/// chain Hamiltonian; the shift construction is the one used downstream.
pub fn block_interaction_energy(left: BlockIndex, right: BlockIndex, spec: &CouplingSpec) -> f64 {
    let n = spec.range;
    let mut e = 0.0;
    for i in 1..=n {
        let j = spec.j(i);
        for k in 1..=i {
            e += j * (left.spin(n - k) * right.spin(k - 1)) as f64;
        }
    }
    -e
}

/// Energy added when a new spin joins the `N` spins encoded in `history`,
/// `ΔE = −s_new (B + Σ_k J(k) s_{new−k})`.
pub fn added_spin_energy(history: BlockIndex, new_spin: i8, spec: &CouplingSpec) -> f64 {
    let n = spec.range;
    // the spin k sites behind the new one sits at bit N − k
    let local: f64 = (1..=n).map(|k| spec.j(k) * history.spin(n - k) as f64).sum();
    -(new_spin as f64) * (spec.field + local)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    /// One-spin overlap between consecutive states; two allowed successors.
    Shift,
    /// Adjacent non-overlapping blocks; fully dense.
    Block,
}

/// Boltzmann-weight matrix together with its Perron data.
///
/// Entries are stored divided by the largest weight, so the largest entry is
/// exactly 1. `log_scale` is the natural log of the removed factor.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    kind: TransferKind,
    range: usize,
    entries: DMatrix<f64>,
    log_scale: f64,
    perron: PerronPair,
}

impl TransferMatrix {
    /// Builds from log-weights; `-inf` marks a forbidden transition.
    pub fn from_log_weights(kind: TransferKind, range: usize, log_weights: DMatrix<f64>) -> Result<Self> {
        check_shape(range, &log_weights)?;
        if log_weights.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::domain("log-weights must be finite or -inf"));
        }
        let max = log_weights.max();
        if !max.is_finite() {
            return Err(Error::domain("transfer matrix has no allowed transition"));
        }
        let mut underflow = false;
        let entries = log_weights.map(|x| {
            if x == f64::NEG_INFINITY {
                0.0
            } else {
                let w = (x - max).exp();
                underflow |= w == 0.0;
                w
            }
        });
        if underflow {
            return Err(Error::numerical(
                "Boltzmann weights underflow after rescaling; temperature too low for double precision",
            ));
        }
        Self::with_entries(kind, range, entries, max)
    }

    /// Builds from nonnegative weights, dividing by the largest one.
    pub fn from_weights(kind: TransferKind, range: usize, weights: DMatrix<f64>) -> Result<Self> {
        check_shape(range, &weights)?;
        if weights.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain("weights must be finite and nonnegative"));
        }
        let max = weights.max();
        if !(max > 0.0) {
            return Err(Error::domain("transfer matrix has no allowed transition"));
        }
        let entries = weights.map(|x| x / max);
        Self::with_entries(kind, range, entries, max.ln())
    }

    fn with_entries(kind: TransferKind, range: usize, entries: DMatrix<f64>, log_scale: f64) -> Result<Self> {
        let perron = perron_pair(&entries)?;
        Ok(Self {
            kind,
            range,
            entries,
            log_scale,
            perron,
        })
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Dominant eigenvalue of the stored (rescaled) entries.
    pub fn lambda(&self) -> f64 {
        self.perron.value
    }

    /// Right Perron vector, unit 1-norm.
    pub fn right(&self) -> &DVector<f64> {
        &self.perron.right
    }

    /// Left Perron vector, normalized against [`Self::right`].
    pub fn left(&self) -> &DVector<f64> {
        &self.perron.left
    }

    pub fn perron(&self) -> &PerronPair {
        &self.perron
    }
}

fn check_shape(range: usize, m: &DMatrix<f64>) -> Result<()> {
    if range == 0 || range > MAX_RANGE {
        return Err(Error::domain(format!("range {range} outside [1, {MAX_RANGE}]")));
    }
    let n = 1usize << range;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::domain(format!(
            "expected a {n}x{n} matrix for range {range}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `V[L, R] = exp(−(X_L / 2 + Y_{L,R} + X_R / 2) / T)` on adjacent blocks.
pub fn block_transfer_matrix(spec: &CouplingSpec) -> Result<TransferMatrix> {
    let n = spec.n_states();
    let beta = spec.beta();
    let internal: Vec<f64> = (0..n).map(|e| block_internal_energy(BlockIndex(e), spec)).collect();
    let log_w = DMatrix::from_fn(n, n, |l, r| {
        let y = block_interaction_energy(BlockIndex(l), BlockIndex(r), spec);
        -beta * (0.5 * internal[l] + y + 0.5 * internal[r])
    });
    TransferMatrix::from_log_weights(TransferKind::Block, spec.range, log_w)
}

/// One-spin shift matrix: `M[η, η'] = exp(−ΔE / T)` for the two successors
/// `η' = ⌊η/2⌋ + x 2^{N−1}`, zero elsewhere.
pub fn shift_transfer_matrix(spec: &CouplingSpec) -> Result<TransferMatrix> {
    let n = spec.n_states();
    let beta = spec.beta();
    let mut log_w = DMatrix::from_element(n, n, f64::NEG_INFINITY);
    for from in 0..n {
        let eta = BlockIndex(from);
        for x in 0..2 {
            let to = eta.successor(spec.range, x);
            let new_spin = if x == 1 { 1 } else { -1 };
            log_w[(from, to.0)] = -beta * added_spin_energy(eta, new_spin, spec);
        }
    }
    TransferMatrix::from_log_weights(TransferKind::Shift, spec.range, log_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(n: usize, j0: f64, delta: f64, b: f64, t: f64) -> CouplingSpec {
        CouplingSpec::new(n, j0, delta, b, t).unwrap()
    }

    #[test]
    fn coupling_values() {
        let s = spec(3, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(s.coupling(1).unwrap(), 1.0);
        assert_eq!(s.coupling(2).unwrap(), 0.25);
        let s = spec(3, 2.0, 1.5, 0.0, 1.0);
        assert_relative_eq!(s.coupling(3).unwrap(), 2.0 / 27f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.coupling(3).unwrap(), 0.3849, epsilon = 1e-4);
    }

    #[test]
    fn coupling_distance_out_of_range() {
        let s = spec(2, 1.0, 2.0, 0.0, 1.0);
        assert!(matches!(s.coupling(0), Err(Error::Domain(_))));
        assert!(matches!(s.coupling(3), Err(Error::Domain(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(CouplingSpec::new(0, 1.0, 2.0, 0.0, 1.0).is_err());
        assert!(CouplingSpec::new(1, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(CouplingSpec::new(1, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(CouplingSpec::new(1, 1.0, 2.0, 0.0, 0.0).is_err());
        assert!(CouplingSpec::new(1, 1.0, 2.0, 0.0, -1.0).is_err());
        assert!(CouplingSpec::new(1, -1.0, 2.0, 0.0, 1.0).is_err());
        assert!(CouplingSpec::new(1, 1.0, 2.0, 0.0, f64::INFINITY).is_err());
        assert!(CouplingSpec::new(1, 1.0, 2.0, 0.0, 1e-320).is_err());
        assert!(matches!(
            CouplingSpec::new(MAX_RANGE + 1, 1.0, 2.0, 0.0, 1.0),
            Err(Error::Capability(_))
        ));
        let msg = CouplingSpec::new(1, 1.0, 0.5, 0.0, 1.0).unwrap_err().to_string();
        assert!(msg.contains("nonextensive"));
    }

    #[test]
    fn block_index_bit_order() {
        let eta = BlockIndex::encode(&[1, -1, -1]).unwrap();
        assert_eq!(eta, BlockIndex(1));
        assert_eq!(BlockIndex(6).decode(3), vec![-1, 1, 1]);
        assert_eq!(BlockIndex(0b011).complement(3), BlockIndex(0b100));
        // new up-spin enters at the top bit, the oldest spin (bit 0) leaves
        assert_eq!(BlockIndex(0b011).successor(3, 1), BlockIndex(0b101));
        assert_eq!(BlockIndex(0b011).successor(3, 0), BlockIndex(0b001));
        assert!(BlockIndex::encode(&[1, 0]).is_err());
    }

    #[test]
    fn internal_energy_examples() {
        let s = spec(1, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(block_internal_energy(BlockIndex(0), &s), 0.0);
        assert_eq!(block_internal_energy(BlockIndex(1), &s), 0.0);
        let s = spec(2, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(block_internal_energy(BlockIndex::encode(&[1, 1]).unwrap(), &s), -1.0);
        let s = spec(2, 1.0, 2.0, 0.3, 1.0);
        assert_relative_eq!(
            block_internal_energy(BlockIndex::encode(&[1, -1]).unwrap(), &s),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn interaction_energy_examples() {
        let s = spec(1, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(block_interaction_energy(BlockIndex(1), BlockIndex(1), &s), -1.0);
        assert_eq!(block_interaction_energy(BlockIndex(1), BlockIndex(0), &s), 1.0);
        let s = spec(2, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(block_interaction_energy(BlockIndex(3), BlockIndex(3), &s), -1.5);
    }

    #[test]
    fn block_matrix_nearest_neighbour() {
        let tm = block_transfer_matrix(&spec(1, 1.0, 2.0, 0.0, 1.0)).unwrap();
        let e = 1f64.exp();
        // stored entries are divided by the largest weight e
        let scale = tm.log_scale().exp();
        assert_relative_eq!(scale, e, epsilon = 1e-15);
        assert_relative_eq!(tm.entries()[(0, 0)] * scale, e, epsilon = 1e-14);
        assert_relative_eq!(tm.entries()[(0, 1)] * scale, 1.0 / e, epsilon = 1e-14);
        assert_relative_eq!(tm.entries()[(1, 0)] * scale, 1.0 / e, epsilon = 1e-14);
        assert_relative_eq!(tm.entries()[(1, 1)] * scale, e, epsilon = 1e-14);
    }

    #[test]
    fn block_matrix_free_spins_is_all_ones() {
        for n in 1..=3 {
            let tm = block_transfer_matrix(&spec(n, 0.0, 2.0, 0.0, 3.0)).unwrap();
            assert!(tm.entries().iter().all(|&x| x == 1.0));
            assert_relative_eq!(tm.lambda(), (1 << n) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_matrix_composes_energies() {
        let s = spec(2, 1.0, 2.0, 0.0, 2.0);
        let tm = block_transfer_matrix(&s).unwrap();
        let scale = tm.log_scale().exp();
        let x = block_internal_energy(BlockIndex(3), &s);
        let y = block_interaction_energy(BlockIndex(3), BlockIndex(3), &s);
        assert_relative_eq!(tm.entries()[(3, 3)] * scale, (-(x + y) / 2.0).exp(), epsilon = 1e-13);
        assert_relative_eq!(tm.entries()[(3, 3)] * scale, 1.25f64.exp(), epsilon = 1e-13);
    }

    #[test]
    fn shift_matrix_examples() {
        let tm = shift_transfer_matrix(&spec(1, 1.0, 2.0, 0.0, 1.0)).unwrap();
        let block = block_transfer_matrix(&spec(1, 1.0, 2.0, 0.0, 1.0)).unwrap();
        assert_eq!(tm.entries(), block.entries());

        let tm = shift_transfer_matrix(&spec(2, 0.0, 2.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(tm.lambda(), 2.0, epsilon = 1e-13);
        for &u in tm.right().iter() {
            assert_relative_eq!(u, 0.25, epsilon = 1e-14);
        }
        for from in 0..4 {
            for to in 0..4 {
                let allowed = to == BlockIndex(from).successor(2, 0).0 || to == BlockIndex(from).successor(2, 1).0;
                assert_eq!(tm.entries()[(from, to)], if allowed { 1.0 } else { 0.0 });
            }
        }

        let beta = 0.7;
        let s = spec(2, 1.0, 2.0, 0.0, 1.0 / beta);
        let tm = shift_transfer_matrix(&s).unwrap();
        let scale = tm.log_scale().exp();
        assert_relative_eq!(tm.entries()[(3, 3)] * scale, (1.25 * beta).exp(), epsilon = 1e-13);
        assert_relative_eq!(added_spin_energy(BlockIndex(3), 1, &s), -1.25, epsilon = 1e-15);
    }

    #[test]
    fn shift_history_distance() {
        // history (s1, s2) = (+1, −1): the new spin is 1 site from s2 and 2 from s1
        let s = spec(2, 1.0, 2.0, 0.0, 1.0);
        let h = BlockIndex::encode(&[1, -1]).unwrap();
        assert_relative_eq!(added_spin_energy(h, 1, &s), -(-1.0 + 0.25), epsilon = 1e-15);
        let s = spec(2, 1.0, 2.0, 0.5, 1.0);
        assert_relative_eq!(added_spin_energy(h, -1, &s), 0.5 - 0.75, epsilon = 1e-15);
    }

    #[test]
    fn perron_pair_is_consistent() {
        for n in 1..=5 {
            let tm = shift_transfer_matrix(&spec(n, 1.0, 2.0, 0.2, 1.5)).unwrap();
            let m = tm.entries();
            let lam = tm.lambda();
            let mu = m * tm.right();
            let vm = tm.left().transpose() * m;
            for i in 0..tm.dim() {
                assert_relative_eq!(mu[i], lam * tm.right()[i], max_relative = 1e-12);
                assert_relative_eq!(vm[i], lam * tm.left()[i], max_relative = 1e-12);
            }
            assert_relative_eq!(tm.left().dot(tm.right()), 1.0, epsilon = 1e-13);
            assert!(tm.perron().subdominant_modulus < lam);
        }
    }

    #[test]
    fn underflow_is_reported() {
        let err = shift_transfer_matrix(&spec(3, 1.0, 2.0, 0.0, 1e-3)).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn rejects_wrong_shape() {
        let m = DMatrix::from_element(3, 3, 1.0);
        assert!(TransferMatrix::from_weights(TransferKind::Block, 1, m).is_err());
    }
}
