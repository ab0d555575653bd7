//! Parameter sweeps, the collapse transform, log-log fits and the quantum
//! advantage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{build_epsilon_machine, statistical_complexity, EpsilonMachine};
use crate::error::{Error, Result};
use crate::model::{shift_transfer_matrix, CouplingSpec, TransferMatrix};
use crate::quantum::{gram_matrix, quantum_memory, word_distributions, GramMatrix};

/// Default fit window in temperature.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (50.0, 300.0);

/// High-temperature points appended to the default grid for fits.
pub const HIGH_T_TAIL: [f64; 6] = [60.0, 80.0, 100.0, 150.0, 200.0, 300.0];

/// Minimum number of points a fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

/// Slack on `c_q ≤ c_mu` and `η ≥ 1`.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ranges: Vec<usize>,
    pub temperatures: Vec<f64>,
    pub deltas: Vec<f64>,
    pub fields: Vec<f64>,
    pub j0: f64,
}

impl Default for SweepGrid {
    /// N ∈ {1..6}, T ∈ {1..50} plus the high-T tail, δ = 2, B = 0, J0 = 1.
    fn default() -> Self {
        let mut temperatures: Vec<f64> = (1..=50).map(f64::from).collect();
        temperatures.extend(HIGH_T_TAIL);
        Self {
            ranges: (1..=6).collect(),
            temperatures,
            deltas: vec![2.0],
            fields: vec![0.0],
            j0: 1.0,
        }
    }
}

impl SweepGrid {
    /// Validated points in (N, δ, B, T) lexicographic order, duplicates removed.
    pub fn points(&self) -> Result<Vec<CouplingSpec>> {
        let mut ranges = self.ranges.clone();
        ranges.sort_unstable();
        ranges.dedup();
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (deltas, fields, temps) = (
            sorted(&self.deltas),
            sorted(&self.fields),
            sorted(&self.temperatures),
        );
        let mut out = Vec::with_capacity(ranges.len() * deltas.len() * fields.len() * temps.len());
        for &n in &ranges {
            for &d in &deltas {
                for &b in &fields {
                    for &t in &temps {
                        out.push(CouplingSpec::new(n, self.j0, d, b, t)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub stoch_residual: f64,
    pub psd_residual: f64,
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// One grid point. `c_mu`/`c_q` are `None` when the point failed; `advantage`
/// is `None` also when `c_q = 0` (unbounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub range: usize,
    pub delta: f64,
    #[serde(rename = "B")]
    pub field: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub c_mu: Option<f64>,
    pub c_q: Option<f64>,
    pub advantage: Option<f64>,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

/// Everything computed for one parameter point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub spec: CouplingSpec,
    pub transfer: TransferMatrix,
    pub machine: EpsilonMachine,
    pub gram: GramMatrix,
    pub c_mu: f64,
    pub c_q: f64,
}

pub fn evaluate(spec: &CouplingSpec) -> Result<Evaluation> {
    let transfer = shift_transfer_matrix(spec)?;
    let machine = build_epsilon_machine(&transfer)?;
    let c_mu = statistical_complexity(machine.pi()).bits();
    let table = word_distributions(&machine)?;
    let gram = gram_matrix(machine.pi(), &table)?;
    let c_q = quantum_memory(&gram)?.bits();
    Ok(Evaluation {
        spec: *spec,
        transfer,
        machine,
        gram,
        c_mu,
        c_q,
    })
}

pub fn evaluate_point(spec: &CouplingSpec) -> SweepRecord {
    let mut record = SweepRecord {
        range: spec.range(),
        delta: spec.delta(),
        field: spec.field(),
        temperature: spec.temperature(),
        c_mu: None,
        c_q: None,
        advantage: None,
        diagnostics: Diagnostics::default(),
    };
    match evaluate(spec) {
        Ok(ev) => {
            record.c_mu = Some(ev.c_mu);
            record.c_q = Some(ev.c_q);
            record.diagnostics.stoch_residual = ev.machine.stochastic_residual();
            record.diagnostics.psd_residual = ev.gram.psd_residual();
            record.diagnostics.degenerate = ev.machine.is_degenerate();
            record.advantage = match quantum_advantage(&record) {
                Ok(Advantage::Finite(x)) => Some(x),
                _ => None,
            };
        }
        Err(e) => record.diagnostics.failure = Some(e.to_string()),
    }
    record
}

/// One record per grid point, ordered by (N, δ, B, T). Invalid parameters
/// fail the whole sweep; numerical failures are recorded per point.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRecord>> {
    let points = grid.points()?;
    Ok(points.par_iter().map(evaluate_point).collect())
}

/// `(N − c_mu) / (N − 1)`
pub fn collapse(range: usize, c_mu: f64) -> Result<f64> {
    if range < 2 {
        return Err(Error::domain("collapse transform is undefined for N = 1"));
    }
    let n = range as f64;
    Ok((n - c_mu) / (n - 1.0))
}

pub fn collapse_transform(record: &SweepRecord) -> Result<f64> {
    let c_mu = record
        .c_mu
        .ok_or_else(|| Error::domain("record has no classical memory"))?;
    collapse(record.range, c_mu)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advantage {
    Finite(f64),
    /// `c_q = 0`: the ratio has no finite value.
    Unbounded,
}

impl Advantage {
    pub fn value(self) -> Option<f64> {
        match self {
            Advantage::Finite(x) => Some(x),
            Advantage::Unbounded => None,
        }
    }
}

/// `η = c_mu / c_q`
pub fn quantum_advantage(record: &SweepRecord) -> Result<Advantage> {
    match (record.c_mu, record.c_q) {
        (Some(c_mu), Some(c_q)) => Ok(if c_q > 0.0 {
            Advantage::Finite(c_mu / c_q)
        } else {
            Advantage::Unbounded
        }),
        _ => Err(Error::domain("record has no memory values")),
    }
}

/// Least-squares line through `(log2 T, log2 y)`; `y ∝ T^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

pub fn fit_power_law(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::domain(format!("empty fit window [{lo}, {hi}]")));
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(t, y)| t >= lo && t <= hi && t > 0.0 && y > 0.0 && y.is_finite())
        .map(|&(t, y)| (t.log2(), y.log2()))
        .collect();
    if logs.len() < MIN_FIT_POINTS {
        return Err(Error::domain(format!(
            "power-law fit needs at least {MIN_FIT_POINTS} positive points in [{lo}, {hi}], got {}",
            logs.len()
        )));
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit abscissae are all equal"));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        exponent,
        intercept,
        r_squared,
        window,
    })
}

/// Pooled fit of the collapsed classical memory over all records with N ≥ 2.
pub fn fit_collapse(records: &[SweepRecord], window: (f64, f64)) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.range >= 2)
        .filter_map(|r| collapse_transform(r).ok().map(|y| (r.temperature, y)))
        .collect();
    fit_power_law(&points, window)
}

/// Pooled fit of the quantum memory over the given records.
pub fn fit_quantum_memory(records: &[SweepRecord], window: (f64, f64)) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.c_q.map(|y| (r.temperature, y)))
        .collect();
    fit_power_law(&points, window)
}
