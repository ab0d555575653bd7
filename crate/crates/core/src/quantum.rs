//! Quantum simulator memory from the signal-state overlaps.
//!
//! Each state `σ_i` is encoded as `|η_i⟩ = Σ_w Σ_j √P(w, σ_j | σ_i) |w⟩|σ_j⟩`
//! over words of length `N`. The ensemble `ρ = Σ_i π_i |η_i⟩⟨η_i|` shares its
//! nonzero spectrum with the Gram matrix `G[i][j] = √(π_i π_j) ⟨η_i|η_j⟩`,
//! which is what the library diagonalizes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classical::{shannon_entropy_bits, verify_cryptic_order, EpsilonMachine, MemoryMeasure};
use crate::error::{Error, Result};
use crate::spectral::symmetric_spectrum;

/// Eigenvalues with magnitude up to `EIGEN_CLAMP` are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Entropies below this are reported as exactly zero.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Allowed deviation of the Gram trace from 1.
pub const TRACE_TOL: f64 = 1e-10;

/// Largest range for which the full density matrix is assembled.
pub const MAX_FULL_DENSITY_RANGE: usize = 5;

/// `probs[(i, w)] = P(w | σ_i)` for length-`N` words `w`, first symbol in the
/// lowest bit.
#[derive(Debug, Clone)]
pub struct WordDistributionTable {
    range: usize,
    probs: DMatrix<f64>,
}

impl WordDistributionTable {
    pub fn range(&self) -> usize {
        self.range
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn prob(&self, state: usize, word: usize) -> f64 {
        self.probs[(state, word)]
    }
}

/// Path products along the unique unifilar path of each word. Requires the
/// machine to synchronize after exactly `N` symbols.
pub fn word_distributions(machine: &EpsilonMachine) -> Result<WordDistributionTable> {
    let n = machine.range();
    let k = verify_cryptic_order(machine)?;
    if k != n {
        return Err(Error::numerical(format!(
            "cryptic order {k} differs from the range {n}; the word-indexed overlap does not apply"
        )));
    }
    let states = machine.n_states();
    let mut probs = DMatrix::zeros(states, states);
    for i in 0..states {
        for w in 0..states {
            let mut state = i;
            let mut p = 1.0;
            for pos in 0..n {
                let t = machine.transition(state, (w >> pos) & 1);
                p *= t.prob;
                state = t.to;
            }
            debug_assert_eq!(state, w);
            probs[(i, w)] = p;
        }
    }
    Ok(WordDistributionTable { range: n, probs })
}

#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    spectrum: Vec<f64>,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues, decreasing.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// `max(0, −λ_min)`
    pub fn psd_residual(&self) -> f64 {
        self.spectrum.last().map_or(0.0, |&l| (-l).max(0.0))
    }
}

pub fn gram_matrix(pi: &[f64], table: &WordDistributionTable) -> Result<GramMatrix> {
    let n = table.probs.nrows();
    if pi.len() != n {
        return Err(Error::domain(format!(
            "stationary vector has {} entries, table has {n} states",
            pi.len()
        )));
    }
    let amp = table.probs.map(f64::sqrt);
    let overlap = &amp * amp.transpose();
    let root_pi: Vec<f64> = pi.iter().map(|p| p.max(0.0).sqrt()).collect();
    let mut entries = DMatrix::from_fn(n, n, |i, j| root_pi[i] * root_pi[j] * overlap[(i, j)]);
    // exact symmetry; the product is symmetric only up to rounding
    entries = (&entries + entries.transpose()) * 0.5;

    let trace = entries.trace();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::numerical(format!("Gram trace {trace} differs from 1")));
    }
    let spectrum = symmetric_spectrum(&entries)?;
    let g = GramMatrix { entries, spectrum };
    if g.psd_residual() > EIGEN_CLAMP {
        return Err(Error::numerical(format!(
            "Gram matrix not positive semidefinite: eigenvalue {:e}",
            -g.psd_residual()
        )));
    }
    Ok(g)
}

/// Von Neumann entropy (bits) of a spectrum. Eigenvalues within
/// `EIGEN_CLAMP` of zero (either sign) are solver noise and dropped.
pub fn von_neumann_entropy_bits(eigenvalues: &[f64]) -> Result<f64> {
    let mut clamped = Vec::with_capacity(eigenvalues.len());
    for &l in eigenvalues {
        if l < -EIGEN_CLAMP {
            return Err(Error::numerical(format!("negative eigenvalue {l:e}")));
        }
        clamped.push(if l <= EIGEN_CLAMP { 0.0 } else { l });
    }
    let h = shannon_entropy_bits(&clamped);
    Ok(if h <= ENTROPY_FLOOR { 0.0 } else { h })
}

/// `C_q = S(ρ)` computed from the Gram spectrum.
pub fn quantum_memory(g: &GramMatrix) -> Result<MemoryMeasure> {
    von_neumann_entropy_bits(&g.spectrum).map(MemoryMeasure)
}

/// Explicit `ρ` on `H_w ⊗ H_σ`, basis index `w · 2^N + σ`.
#[derive(Debug, Clone)]
pub struct DensityMatrixFull {
    range: usize,
    entries: DMatrix<f64>,
}

impl DensityMatrixFull {
    pub fn range(&self) -> usize {
        self.range
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// All `4^N` eigenvalues, decreasing.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        symmetric_spectrum(&self.entries)
    }

    /// The leading `2^N` eigenvalues; the rest vanish since rank ≤ `2^N`.
    pub fn nonzero_spectrum(&self) -> Result<Vec<f64>> {
        let mut s = self.spectrum()?;
        s.truncate(1 << self.range);
        Ok(s)
    }
}

/// Builds `ρ` from products of the labeled matrices, without using the
/// synchronization structure.
pub fn density_matrix_full(machine: &EpsilonMachine, pi: &[f64]) -> Result<DensityMatrixFull> {
    let n = machine.range();
    if n > MAX_FULL_DENSITY_RANGE {
        return Err(Error::capability(format!(
            "full density matrix limited to N <= {MAX_FULL_DENSITY_RANGE} (dimension 4^N)"
        )));
    }
    let states = machine.n_states();
    if pi.len() != states {
        return Err(Error::domain("stationary vector length does not match the machine"));
    }
    let labeled = [machine.labeled_matrix(0), machine.labeled_matrix(1)];
    let dim = states * states;
    let mut rho = DMatrix::zeros(dim, dim);
    let mut amp = vec![0.0; dim];
    for i in 0..states {
        amp.iter_mut().for_each(|a| *a = 0.0);
        for w in 0..states {
            let mut row = DMatrix::zeros(1, states);
            row[(0, i)] = 1.0;
            for pos in 0..n {
                row = &row * &labeled[(w >> pos) & 1];
            }
            for j in 0..states {
                amp[w * states + j] = row[(0, j)].max(0.0).sqrt();
            }
        }
        for a in 0..dim {
            if amp[a] == 0.0 {
                continue;
            }
            let pa = pi[i] * amp[a];
            for b in 0..dim {
                rho[(a, b)] += pa * amp[b];
            }
        }
    }
    Ok(DensityMatrixFull { range: n, entries: rho })
}

/// High-temperature form of `C_q` for nearest-neighbour chains,
/// `log2(T) / (2 T²)`. Only meaningful well above `T = 1`.
pub fn high_temp_asymptote(temperature: f64) -> Result<f64> {
    if !(temperature > 1.0 && temperature.is_finite()) {
        return Err(Error::domain(format!(
            "high-temperature asymptote needs T > 1, got {temperature}"
        )));
    }
    Ok(temperature.log2() / (2.0 * temperature * temperature))
}

/// JSON dump of the Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramDump {
    pub range: usize,
    pub gram: Vec<Vec<f64>>,
    pub spectrum: Vec<f64>,
    pub trace: f64,
    pub psd_residual: f64,
    pub c_q: f64,
}

impl GramDump {
    pub fn new(range: usize, g: &GramMatrix) -> Result<Self> {
        Ok(Self {
            range,
            gram: g
                .entries
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            spectrum: g.spectrum.clone(),
            trace: g.trace(),
            psd_residual: g.psd_residual(),
            c_q: quantum_memory(g)?.bits(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::build_epsilon_machine;
    use crate::model::{shift_transfer_matrix, CouplingSpec};
    use approx::assert_relative_eq;

    fn machine(n: usize, j0: f64, t: f64) -> EpsilonMachine {
        let spec = CouplingSpec::new(n, j0, 2.0, 0.0, t).unwrap();
        build_epsilon_machine(&shift_transfer_matrix(&spec).unwrap()).unwrap()
    }

    fn persistence(t: f64) -> f64 {
        let b = 1.0 / t;
        b.exp() / (b.exp() + (-b).exp())
    }

    fn h2(x: f64) -> f64 {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }

    #[test]
    fn free_spin_words_are_uniform() {
        for n in 1..=3 {
            let m = machine(n, 0.0, 1.0);
            let table = word_distributions(&m).unwrap();
            let expect = 1.0 / (1 << n) as f64;
            assert!(table.probs().iter().all(|&p| (p - expect).abs() < 1e-14));
            let g = gram_matrix(m.pi(), &table).unwrap();
            assert!(g.entries().iter().all(|&x| (x - expect).abs() < 1e-14));
            assert_relative_eq!(g.spectrum()[0], 1.0, epsilon = 1e-12);
            assert_eq!(quantum_memory(&g).unwrap().bits(), 0.0);
        }
    }

    #[test]
    fn nearest_neighbour_word_table() {
        let t = 1.7;
        let p = persistence(t);
        let table = word_distributions(&machine(1, 1.0, t)).unwrap();
        assert_relative_eq!(table.prob(1, 1), p, epsilon = 1e-13);
        assert_relative_eq!(table.prob(1, 0), 1.0 - p, epsilon = 1e-13);
    }

    #[test]
    fn word_table_matches_labeled_products() {
        let m = machine(2, 1.0, 2.0);
        let table = word_distributions(&m).unwrap();
        let t = [m.labeled_matrix(0), m.labeled_matrix(1)];
        for w in 0..4 {
            let prod = &t[w & 1] * &t[(w >> 1) & 1];
            for i in 0..4 {
                assert_relative_eq!(table.prob(i, w), prod.row(i).sum(), epsilon = 1e-14);
                assert_relative_eq!(table.prob(i, w), prod[(i, w)], epsilon = 1e-14);
            }
        }
        for i in 0..4 {
            assert_relative_eq!(table.probs().row(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_state_gram_spectrum() {
        for &t in &[0.3, 1.0, 4.0, 10.0] {
            let m = machine(1, 1.0, t);
            let g = gram_matrix(m.pi(), &word_distributions(&m).unwrap()).unwrap();
            let p = persistence(t);
            let r = (p * (1.0 - p)).sqrt();
            assert_relative_eq!(g.spectrum()[0], 0.5 + r, epsilon = 1e-12);
            assert_relative_eq!(g.spectrum()[1], 0.5 - r, epsilon = 1e-12);
            assert_relative_eq!(quantum_memory(&g).unwrap().bits(), h2(0.5 + r), epsilon = 1e-10);
        }
    }

    #[test]
    fn low_temperature_gram_is_half_half() {
        let m = machine(1, 1.0, 0.2);
        let g = gram_matrix(m.pi(), &word_distributions(&m).unwrap()).unwrap();
        assert_relative_eq!(g.spectrum()[0], 0.5, epsilon = 1e-2);
        assert_relative_eq!(g.spectrum()[1], 0.5, epsilon = 1e-2);
        assert_relative_eq!(quantum_memory(&g).unwrap().bits(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn entropy_clamp_window() {
        assert_eq!(von_neumann_entropy_bits(&[1.0, -5e-13]).unwrap(), 0.0);
        assert_eq!(von_neumann_entropy_bits(&[1.0, 3e-16]).unwrap(), 0.0);
        assert_eq!(von_neumann_entropy_bits(&[0.5, 0.5]).unwrap(), 1.0);
        assert!(von_neumann_entropy_bits(&[1.0, -1e-9]).is_err());
    }

    #[test]
    fn full_density_matches_gram() {
        for n in 1..=3 {
            let m = machine(n, 1.0, 2.0);
            let g = gram_matrix(m.pi(), &word_distributions(&m).unwrap()).unwrap();
            let rho = density_matrix_full(&m, m.pi()).unwrap();
            assert_eq!(rho.dim(), 1 << (2 * n));
            assert_relative_eq!(rho.entries().trace(), 1.0, epsilon = 1e-12);
            for (a, b) in rho.nonzero_spectrum().unwrap().iter().zip(g.spectrum()) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
            let all = rho.spectrum().unwrap();
            assert!(all[1 << n..].iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn free_spin_density_is_pure() {
        let m = machine(1, 0.0, 1.0);
        let rho = density_matrix_full(&m, m.pi()).unwrap();
        let s = rho.spectrum().unwrap();
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(von_neumann_entropy_bits(&s).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn full_density_size_cap() {
        let m = machine(6, 1.0, 2.0);
        assert!(matches!(density_matrix_full(&m, m.pi()), Err(Error::Capability(_))));
    }

    #[test]
    fn asymptote_values() {
        assert_relative_eq!(high_temp_asymptote(2.0).unwrap(), 0.125, epsilon = 1e-15);
        assert!(high_temp_asymptote(1.0 + 1e-9).unwrap() < 1e-8);
        assert!(high_temp_asymptote(1.0).is_err());
        assert!(high_temp_asymptote(0.5).is_err());
    }

    #[test]
    fn dump_serializes() {
        let m = machine(2, 1.0, 2.0);
        let g = gram_matrix(m.pi(), &word_distributions(&m).unwrap()).unwrap();
        let d = GramDump::new(2, &g).unwrap();
        assert_eq!(d.gram.len(), 4);
        let back: GramDump = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
    }
}
