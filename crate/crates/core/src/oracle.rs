//! Brute-force reference: exact Boltzmann enumeration of short chains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{verify_markov_order, EpsilonMachine};
use crate::error::{Error, Result};
use crate::model::CouplingSpec;

/// Longest chain that will be enumerated (`2^L` configurations).
pub const MAX_CHAIN_LEN: usize = 20;

/// Deviations below this are rounding noise; trends in chain length are
/// judged on deviations clamped up to it.
pub const DEVIATION_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic; site indices wrap modulo `L`.
    Ring,
    /// Free ends; bonds past the last site are dropped.
    Open,
}

/// Exact distribution over all `2^L` configurations; bit `i` of the index is
/// `(s_i + 1) / 2`.
#[derive(Debug, Clone)]
pub struct FiniteChainDistribution {
    len: usize,
    range: usize,
    boundary: Boundary,
    probs: Vec<f64>,
}

impl FiniteChainDistribution {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal of `width` consecutive sites starting at `start`, indexed
    /// with the first site in the lowest bit. On a ring the window may wrap.
    pub fn window_marginal(&self, start: usize, width: usize) -> Result<Vec<f64>> {
        if width > self.len {
            return Err(Error::domain(format!(
                "window of {width} sites does not fit a chain of {}",
                self.len
            )));
        }
        if self.boundary == Boundary::Open && start + width > self.len {
            return Err(Error::domain("window runs past the end of an open chain"));
        }
        let mut out = vec![0.0; 1 << width];
        for (c, &p) in self.probs.iter().enumerate() {
            let mut w = 0usize;
            for j in 0..width {
                let site = (start + j) % self.len;
                w |= ((c >> site) & 1) << j;
            }
            out[w] += p;
        }
        Ok(out)
    }

    /// Start of a centered window of `width` sites, checking the clearance
    /// of `N` sites from open ends.
    fn center_start(&self, width: usize) -> Result<usize> {
        match self.boundary {
            Boundary::Ring => {
                if width > self.len {
                    return Err(Error::domain(format!(
                        "window of {width} sites does not fit a ring of {}",
                        self.len
                    )));
                }
                Ok(0)
            }
            Boundary::Open => {
                if width > self.len {
                    return Err(Error::domain("window longer than the chain"));
                }
                let start = (self.len - width) / 2;
                let right = self.len - start - width;
                if start < self.range || right < self.range {
                    return Err(Error::domain(format!(
                        "window of {width} sites sits closer than N = {} to an open end of a chain of {}",
                        self.range, self.len
                    )));
                }
                Ok(start)
            }
        }
    }
}

pub fn boltzmann_enumerate(
    spec: &CouplingSpec,
    len: usize,
    boundary: Boundary,
) -> Result<FiniteChainDistribution> {
    if len == 0 {
        return Err(Error::domain("chain length must be positive"));
    }
    if len > MAX_CHAIN_LEN {
        return Err(Error::capability(format!(
            "chain length {len} exceeds the enumeration cap {MAX_CHAIN_LEN}"
        )));
    }
    let n = spec.range();
    let couplings: Vec<f64> = (1..=n).map(|k| spec.coupling(k).expect("k in range")).collect();
    let field = spec.field();
    let beta = spec.beta();

    let energy = |c: usize| -> f64 {
        let s = |i: usize| if (c >> i) & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for i in 0..len {
            let si = s(i);
            e -= field * si;
            for (k, &j) in couplings.iter().enumerate() {
                let other = i + k + 1;
                let other = match boundary {
                    Boundary::Ring => other % len,
                    Boundary::Open if other < len => other,
                    Boundary::Open => continue,
                };
                e -= j * si * s(other);
            }
        }
        e
    };

    let energies: Vec<f64> = (0..1usize << len).into_par_iter().map(energy).collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut probs: Vec<f64> = energies.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    Ok(FiniteChainDistribution {
        len,
        range: n,
        boundary,
        probs,
    })
}

/// `P(s_t = ↑ | s_{t−m} … s_{t−1})` from a finite chain. History index bit
/// `j` holds `s_{t−m+j}`, so the most recent spin is the top bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    history_len: usize,
    up: Vec<f64>,
    history_prob: Vec<f64>,
}

impl ConditionalTable {
    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn prob_up(&self, history: usize) -> f64 {
        self.up[history]
    }

    pub fn history_prob(&self, history: usize) -> f64 {
        self.history_prob[history]
    }
}

pub fn conditional_at_center(dist: &FiniteChainDistribution, m: usize) -> Result<ConditionalTable> {
    let joint = dist.window_marginal(dist.center_start(m + 1)?, m + 1)?;
    let h = 1usize << m;
    let mut up = vec![0.0; h];
    let mut history_prob = vec![0.0; h];
    for history in 0..h {
        let p_down = joint[history];
        let p_up = joint[history | h];
        history_prob[history] = p_down + p_up;
        up[history] = if p_down + p_up > 0.0 {
            p_up / (p_down + p_up)
        } else {
            f64::NAN
        };
    }
    Ok(ConditionalTable {
        history_len: m,
        up,
        history_prob,
    })
}

/// Exact marginal of `n` consecutive central spins.
pub fn block_marginals(dist: &FiniteChainDistribution, n: usize) -> Result<Vec<f64>> {
    dist.window_marginal(dist.center_start(n)?, n)
}

/// Deviations of a machine from the finite-chain reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub chain_len: usize,
    /// max over states of `|P_chain(↑ | last N) − T^(1)|`.
    pub transition_deviation: f64,
    /// max over states of `|P_chain(block) − π|`.
    pub stationary_deviation: f64,
    /// Markov-order deviation with `N + 1` spins of history.
    pub markov_deviation: f64,
}

impl OracleComparison {
    pub fn max_deviation(&self) -> f64 {
        self.transition_deviation
            .max(self.stationary_deviation)
            .max(self.markov_deviation)
    }
}

pub fn compare_with_machine(
    machine: &EpsilonMachine,
    dist: &FiniteChainDistribution,
) -> Result<OracleComparison> {
    let n = machine.range();
    if dist.range() != n {
        return Err(Error::domain("oracle and machine have different ranges"));
    }
    let cond = conditional_at_center(dist, n)?;
    let transition_deviation = (0..machine.n_states())
        .map(|s| (cond.prob_up(s) - machine.prob(s, 1)).abs())
        .fold(0.0, f64::max);
    let blocks = block_marginals(dist, n)?;
    let stationary_deviation = blocks
        .iter()
        .zip(machine.pi())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let deeper = conditional_at_center(dist, n + 1)?;
    let markov_deviation = verify_markov_order(machine, &deeper, f64::INFINITY)?.max_deviation;
    Ok(OracleComparison {
        chain_len: dist.len(),
        transition_deviation,
        stationary_deviation,
        markov_deviation,
    })
}
