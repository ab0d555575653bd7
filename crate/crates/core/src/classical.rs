//! Unifilar generator of the spin process and its statistical complexity.
//!
//! States are the `2^N` blocks of the last `N` spins. From each state the two
//! symbols (0 = down, 1 = up) lead to the successors given by the shift rule,
//! with probabilities `M[η, η'] u[η'] / (λ u[η])`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockIndex, TransferKind, TransferMatrix};
use crate::oracle::ConditionalTable;
use crate::spectral::stationary_vector;

/// Row-sum error above which construction fails.
pub const STOCHASTIC_BUILD_TOL: f64 = 1e-8;

/// Agreement required between the two routes to the stationary distribution.
pub const STATIONARY_CROSSCHECK_TOL: f64 = 1e-9;

/// Threshold below which all states count as predictively equivalent.
const DEGENERACY_TOL: f64 = 1e-12;

/// Memory in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MemoryMeasure(pub f64);

impl MemoryMeasure {
    pub fn bits(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub to: usize,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct EpsilonMachine {
    range: usize,
    /// `transitions[state][symbol]`
    transitions: Vec<[Transition; 2]>,
    pi: Vec<f64>,
    stochastic_residual: f64,
    degenerate: bool,
}

impl EpsilonMachine {
    pub fn range(&self) -> usize {
        self.range
    }

    pub fn n_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, state: usize, symbol: usize) -> Transition {
        self.transitions[state][symbol]
    }

    /// Probability of emitting `symbol` from `state`.
    pub fn prob(&self, state: usize, symbol: usize) -> f64 {
        self.transitions[state][symbol].prob
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Largest `|Σ_x Σ_j T^(x)[i, j] − 1|` over rows.
    pub fn stochastic_residual(&self) -> f64 {
        self.stochastic_residual
    }

    /// True when every state has the same next-symbol distribution, so the
    /// `2^N` states are not a minimal (causal-state) representation.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Dense `T^(x)`.
    pub fn labeled_matrix(&self, symbol: usize) -> DMatrix<f64> {
        let n = self.n_states();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.transitions.iter().enumerate() {
            m[(i, row[symbol].to)] += row[symbol].prob;
        }
        m
    }

    /// `T = T^(0) + T^(1)`.
    pub fn stochastic_matrix(&self) -> DMatrix<f64> {
        self.labeled_matrix(0) + self.labeled_matrix(1)
    }

    pub fn describe(&self) -> MachineDescription {
        let n = self.range;
        let states = (0..self.n_states())
            .map(|s| {
                BlockIndex(s)
                    .decode(n)
                    .iter()
                    .map(|&x| if x > 0 { '+' } else { '-' })
                    .collect()
            })
            .collect();
        let transitions = self
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(from, row)| {
                row.iter().enumerate().map(move |(symbol, t)| TransitionRecord {
                    from,
                    symbol,
                    to: t.to,
                    probability: t.prob,
                })
            })
            .collect();
        MachineDescription {
            range: n,
            n_states: self.n_states(),
            alphabet: vec![0, 1],
            states,
            transitions,
            pi: self.pi.clone(),
            stochastic_residual: self.stochastic_residual,
            degenerate: self.degenerate,
        }
    }
}

/// Plain description of a machine for dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineDescription {
    pub range: usize,
    pub n_states: usize,
    pub alphabet: Vec<u8>,
    /// Spin labels, `s_1` first.
    pub states: Vec<String>,
    pub transitions: Vec<TransitionRecord>,
    pub pi: Vec<f64>,
    pub stochastic_residual: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: usize,
    pub symbol: usize,
    pub to: usize,
    pub probability: f64,
}

pub fn build_epsilon_machine(tm: &TransferMatrix) -> Result<EpsilonMachine> {
    if tm.kind() != TransferKind::Shift {
        return Err(Error::domain(
            "the generator is built from the one-spin shift transfer matrix",
        ));
    }
    let range = tm.range();
    let n = tm.dim();
    let m = tm.entries();
    let u = tm.right();
    let lambda = tm.lambda();

    let mut transitions = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    for from in 0..n {
        let eta = BlockIndex(from);
        let succ = [eta.successor(range, 0).0, eta.successor(range, 1).0];
        for to in 0..n {
            if !succ.contains(&to) && m[(from, to)] != 0.0 {
                return Err(Error::domain(format!(
                    "transfer matrix has weight on forbidden transition {from} -> {to}"
                )));
            }
        }
        let row = succ.map(|to| Transition {
            to,
            prob: m[(from, to)] * u[to] / (lambda * u[from]),
        });
        residual = residual.max((row[0].prob + row[1].prob - 1.0).abs());
        transitions.push(row);
    }
    if !(residual <= STOCHASTIC_BUILD_TOL) {
        return Err(Error::numerical(format!(
            "labeled matrices are not stochastic: row-sum residual {residual:e}"
        )));
    }

    let up0 = transitions[0][1].prob;
    let degenerate = transitions
        .iter()
        .all(|row| (row[1].prob - up0).abs() <= DEGENERACY_TOL);

    let mut machine = EpsilonMachine {
        range,
        transitions,
        pi: Vec::new(),
        stochastic_residual: residual,
        degenerate,
    };
    let pi = stationary_distribution(&machine)?;
    let perron_pi = perron_stationary(tm);
    let gap = pi
        .iter()
        .zip(&perron_pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > STATIONARY_CROSSCHECK_TOL {
        return Err(Error::numerical(format!(
            "stationary distribution disagrees with u∘v by {gap:e}"
        )));
    }
    machine.pi = pi;
    Ok(machine)
}

/// Left eigenvector of `T^(0) + T^(1)` at eigenvalue 1, normalized to sum 1.
pub fn stationary_distribution(machine: &EpsilonMachine) -> Result<Vec<f64>> {
    let pi = stationary_vector(&machine.stochastic_matrix())?;
    let min = pi.min();
    if min < -1e-12 {
        return Err(Error::numerical(format!(
            "stationary vector has negative entry {min:e}"
        )));
    }
    Ok(pi.iter().map(|&p| p.max(0.0)).collect())
}

/// `π[η] ∝ u[η] v[η]` from the transfer matrix.
pub fn perron_stationary(tm: &TransferMatrix) -> Vec<f64> {
    let w = tm.right().component_mul(tm.left());
    let total = w.sum();
    w.iter().map(|x| x / total).collect()
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn shannon_entropy_bits<'a>(probs: impl IntoIterator<Item = &'a f64>) -> f64 {
    let h: f64 = probs
        .into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

pub fn statistical_complexity(pi: &[f64]) -> MemoryMeasure {
    MemoryMeasure(shannon_entropy_bits(pi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovOrderCheck {
    pub passed: bool,
    pub max_deviation: f64,
    pub history_len: usize,
}

/// Compares conditionals on length-`m` histories against the machine's
/// conditionals on the last `N` spins of each history.
pub fn verify_markov_order(
    machine: &EpsilonMachine,
    oracle: &ConditionalTable,
    tolerance: f64,
) -> Result<MarkovOrderCheck> {
    let n = machine.range();
    let m = oracle.history_len();
    if m <= n {
        return Err(Error::domain(format!(
            "Markov-order check needs histories longer than N = {n}, got {m}"
        )));
    }
    let mut max_deviation: f64 = 0.0;
    for history in 0..(1usize << m) {
        if oracle.history_prob(history) <= 0.0 {
            continue;
        }
        let state = history >> (m - n);
        let dev = (oracle.prob_up(history) - machine.prob(state, 1)).abs();
        max_deviation = max_deviation.max(dev);
    }
    Ok(MarkovOrderCheck {
        passed: max_deviation <= tolerance,
        max_deviation,
        history_len: m,
    })
}

/// Smallest `K` such that every length-`K` word allowed from some state ends
/// in a state that does not depend on where it started.
pub fn verify_cryptic_order(machine: &EpsilonMachine) -> Result<usize> {
    let n = machine.n_states();
    let cap = 2 * machine.range();
    for k in 0..=cap {
        if k >= usize::BITS as usize {
            break;
        }
        if synchronizes_at(machine, n, k) {
            return Ok(k);
        }
    }
    Err(Error::numerical(format!(
        "no synchronizing word length found up to {cap}"
    )))
}

fn synchronizes_at(machine: &EpsilonMachine, n: usize, k: usize) -> bool {
    for word in 0..(1usize << k) {
        let mut end: Option<usize> = None;
        for start in 0..n {
            let mut state = start;
            let mut allowed = true;
            for pos in 0..k {
                let t = machine.transition(state, (word >> pos) & 1);
                if t.prob <= 0.0 {
                    allowed = false;
                    break;
                }
                state = t.to;
            }
            if !allowed {
                continue;
            }
            match end {
                None => end = Some(state),
                Some(e) if e != state => return false,
                _ => {}
            }
        }
    }
    true
}
