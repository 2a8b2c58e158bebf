//! Black-box material oracles: strain evolution in, stress evolution out.
//!
//! Programs live in physical time `t` on a uniform grid and vanish for
//! `t < 0`. The conversion to the history frame `τ = T - t` happens only in
//! [`sample_basis_responses`].

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hist::{BasisSpec, HistorySample, TimeGrid};
use crate::kernels::{ExpTerm, HereditaryLaw, PronyKernel};
use crate::operator::SlsParams;
use crate::table::{num, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct StrainProgram {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl StrainProgram {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    /// Unit strain switched on at `t = 0` and held.
    pub fn unit_step(grid: TimeGrid) -> Self {
        Self::from_fn(grid, |_| 1.0)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// History `ε_t(τ_l) = ε(t - τ_l)` at node `i`, zero before `t = 0`.
    pub fn history_at(&self, i: usize) -> HistorySample {
        let mut h = vec![0.0; self.values.len()];
        for (l, slot) in h.iter_mut().enumerate().take(i + 1) {
            *slot = self.values[i - l];
        }
        HistorySample::new(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResponse {
    pub stress: Vec<f64>,
    pub oracle_id: String,
    /// Total evaluations served by the oracle, this one included.
    pub evaluations: u64,
}

impl OracleResponse {
    /// CSV with columns `t, strain, stress`.
    pub fn to_table(&self, program: &StrainProgram) -> Table {
        let mut table = Table::new(&["t", "strain", "stress"]);
        for (i, (e, s)) in program.values.iter().zip(&self.stress).enumerate() {
            table.push(vec![num(program.grid.node(i)), num(*e), num(*s)]);
        }
        table
    }
}

pub trait Oracle: Sync {
    fn id(&self) -> String;

    fn grid(&self) -> &TimeGrid;

    fn evaluate(&self, program: &StrainProgram) -> Result<OracleResponse>;

    /// Instantaneous modulus when the oracle knows it.
    fn instantaneous_modulus(&self) -> Option<f64> {
        None
    }

    fn evaluations(&self) -> u64;
}

pub(crate) fn check_grid(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a.intervals() != b.intervals() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.duration() != b.duration() {
        return Err(crate::error::invalid(
            "grid",
            format!("duration {} differs from {}", b.duration(), a.duration()),
        ));
    }
    Ok(())
}

/// One-step coefficients of `I(t) = ∫_0^t exp(-r(t-s)) ε(s) ds` for `ε`
/// linear on the step: `I_{i+1} = E I_i + w0 ε_i + w1 ε_{i+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCoefficients {
    pub decay: f64,
    pub w0: f64,
    pub w1: f64,
}

impl StepCoefficients {
    pub fn new(rate: f64, h: f64) -> Self {
        let x = rate * h;
        let decay = (-x).exp();
        // A = ∫_0^h e^{-r v} dv, B = ∫_0^h v e^{-r v} dv.
        let a = if x == 0.0 { h } else { -(-x).exp_m1() / rate };
        let b = h * h * second_moment(x);
        let w0 = b / h;
        Self {
            decay,
            w0,
            w1: a - w0,
        }
    }

    #[inline]
    pub fn advance(&self, state: f64, e0: f64, e1: f64) -> f64 {
        self.decay * state + self.w0 * e0 + self.w1 * e1
    }
}

/// `(1 - e^{-x}(1 + x)) / x²`.
fn second_moment(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = 0.5;
        let mut sum = 0.0;
        for k in 0..30 {
            sum += term * (k + 1) as f64;
            term *= -x / (k + 3) as f64;
        }
        sum
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

/// Hereditary law with a finite exponential kernel, integrated exactly for
/// piecewise-linear strain.
#[derive(Debug)]
pub struct ExponentialOracle {
    id: String,
    grid: TimeGrid,
    modulus: f64,
    terms: Vec<ExpTerm>,
    steps: Vec<StepCoefficients>,
    calls: AtomicU64,
}

impl ExponentialOracle {
    pub fn from_law(id: impl Into<String>, law: &HereditaryLaw, grid: TimeGrid) -> Self {
        let terms = law.kernel.terms();
        let steps = terms.iter().map(|t| StepCoefficients::new(t.rate, grid.step())).collect();
        Self {
            id: id.into(),
            grid,
            modulus: law.modulus,
            terms,
            steps,
            calls: AtomicU64::new(0),
        }
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }
}

pub fn make_sls_oracle(p: &SlsParams, grid: TimeGrid) -> ExponentialOracle {
    ExponentialOracle::from_law("sls", &p.law(), grid)
}

pub fn make_prony_oracle(kernel: &PronyKernel, grid: TimeGrid) -> Result<ExponentialOracle> {
    let law = HereditaryLaw::from_prony(kernel.clone())?;
    Ok(ExponentialOracle::from_law("prony", &law, grid))
}

/// Elastic oracle `σ = C ε`.
pub fn make_elastic_oracle(modulus: f64, grid: TimeGrid) -> Result<ExponentialOracle> {
    let law = HereditaryLaw::new(modulus, crate::kernels::Kernel::Prony(PronyKernel::new(modulus, vec![])?))?;
    Ok(ExponentialOracle::from_law("elastic", &law, grid))
}

impl Oracle for ExponentialOracle {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn evaluate(&self, program: &StrainProgram) -> Result<OracleResponse> {
        check_grid(&self.grid, &program.grid)?;
        let eps = &program.values;
        let mut state = vec![0.0; self.terms.len()];
        let mut stress = Vec::with_capacity(eps.len());
        stress.push(self.modulus * eps[0]);
        for i in 1..eps.len() {
            let mut memory = 0.0;
            for ((s, c), t) in state.iter_mut().zip(&self.steps).zip(&self.terms) {
                *s = c.advance(*s, eps[i - 1], eps[i]);
                memory += t.amplitude * *s;
            }
            stress.push(self.modulus * eps[i] - memory);
        }
        let evaluations = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        Ok(OracleResponse {
            stress,
            oracle_id: self.id.clone(),
            evaluations,
        })
    }

    fn instantaneous_modulus(&self) -> Option<f64> {
        Some(self.modulus)
    }

    fn evaluations(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// `σ(0⁺)` under a unit step.
pub fn step_probe(oracle: &dyn Oracle) -> Result<f64> {
    let r = oracle.evaluate(&StrainProgram::unit_step(*oracle.grid()))?;
    let c = r.stress[0];
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Singular(format!("step probe returned modulus {c}")));
    }
    Ok(c)
}

/// Program `ε(t_i) = e_j(T - t_i)` for signed basis index `j`.
pub fn basis_program(b: &BasisSpec, j: i64) -> Result<StrainProgram> {
    let row = b.row_of(j)?;
    let n = b.grid().intervals();
    let values = (0..=n).map(|i| b.table()[(row, n - i)]).collect();
    StrainProgram::new(*b.grid(), values)
}

#[derive(Clone, Debug)]
pub struct BasisResponses {
    /// `p_j(τ) = e_j(τ) - σ_j(T - τ)/C_eff`, ordered `j = -m..m`.
    pub histories: Vec<HistorySample>,
    pub stresses: Vec<Vec<f64>>,
    pub c_eff: f64,
}

/// Inelastic-strain histories of the `M` basis programs; `c_eff` falls back
/// to the oracle's own modulus, then to a step probe.
pub fn sample_basis_responses(
    oracle: &dyn Oracle,
    b: &BasisSpec,
    c_eff: Option<f64>,
) -> Result<BasisResponses> {
    check_grid(oracle.grid(), b.grid())?;
    let c_eff = match c_eff.or_else(|| oracle.instantaneous_modulus()) {
        Some(c) => c,
        None => step_probe(oracle)?,
    };
    let m = b.half_width() as i64;
    let n = b.grid().intervals();
    let columns: Vec<(HistorySample, Vec<f64>)> = (-m..=m)
        .into_par_iter()
        .map(|j| {
            let wrap = |e: Error| Error::Oracle {
                column: j,
                source: Box::new(e),
            };
            let program = basis_program(b, j).map_err(wrap)?;
            let r = oracle.evaluate(&program).map_err(wrap)?;
            let row = b.row_of(j).map_err(wrap)?;
            let hist = (0..=n)
                .map(|i| b.table()[(row, i)] - r.stress[n - i] / c_eff)
                .collect();
            Ok((HistorySample::new(hist), r.stress))
        })
        .collect::<Result<_>>()?;
    let (histories, stresses) = columns.into_iter().unzip();
    Ok(BasisResponses {
        histories,
        stresses,
        c_eff,
    })
}
