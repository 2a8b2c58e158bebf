//! Weighted history space `H = L²((0,T), e^{-λ0 τ} dτ)`.
//!
//! Histories are sampled on a uniform grid `τ_i = iT/n`, with `τ = 0` the
//! present and `τ = T` the distant past. Inner products use a nodal
//! composite rule so that samples produced by time steppers can be used
//! without resampling.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid on `[0, T]` with `n` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    duration: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(duration: f64, intervals: usize) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(invalid("T", format!("duration must be positive, got {duration}")));
        }
        if intervals < 2 {
            return Err(invalid("n", format!("need at least 2 intervals, got {intervals}")));
        }
        Ok(Self {
            duration,
            intervals,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.duration / self.intervals as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.intervals {
            self.duration
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> HistorySample {
        HistorySample::new((0..self.len()).map(|i| f(self.node(i))).collect())
    }
}

/// Exponential fading-memory weight `w(τ) = exp(-λ0 τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFn {
    decay: f64,
}

impl WeightFn {
    /// `decay = 0` gives the unweighted space.
    pub fn exponential(decay: f64) -> Result<Self> {
        if !(decay.is_finite() && decay >= 0.0) {
            return Err(invalid("lambda0", format!("decay rate must be >= 0, got {decay}")));
        }
        Ok(Self { decay })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn eval(&self, tau: f64) -> f64 {
        (-self.decay * tau).exp()
    }

    pub fn is_admissible(&self, grid: &TimeGrid) -> bool {
        check_admissible(|t| self.eval(t), grid)
    }
}

/// Nodal quadrature rule on the uniform grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Trapezoid,
    #[default]
    Simpson,
}

impl Quadrature {
    /// Weight of node `p` in the composite rule over `len` unit intervals.
    ///
    /// Simpson on an odd number of intervals closes the last three with the
    /// 3/8 rule; a single interval falls back to the trapezoid.
    pub fn unit_weight(self, len: usize, p: usize) -> f64 {
        debug_assert!(p <= len);
        match self {
            Quadrature::Trapezoid => {
                if len == 0 {
                    0.0
                } else if p == 0 || p == len {
                    0.5
                } else {
                    1.0
                }
            }
            Quadrature::Simpson => match len {
                0 => 0.0,
                1 => 0.5,
                _ if len % 2 == 0 => simpson_even(len, p),
                _ => {
                    let s = len - 3;
                    if p < s {
                        simpson_even(s, p)
                    } else if p == s {
                        let head = if s > 0 { 1.0 / 3.0 } else { 0.0 };
                        head + 3.0 / 8.0
                    } else if p < len {
                        9.0 / 8.0
                    } else {
                        3.0 / 8.0
                    }
                }
            },
        }
    }

    /// Fills `buf` with the unit weights of a rule over `len` intervals.
    pub fn fill_unit_weights(self, len: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend((0..=len).map(|p| self.unit_weight(len, p)));
    }
}

fn simpson_even(len: usize, p: usize) -> f64 {
    if p == 0 || p == len {
        1.0 / 3.0
    } else if p % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// The Hilbert space `H` of strain histories with its nodal quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySpace {
    grid: TimeGrid,
    weight: WeightFn,
    quadrature: Quadrature,
    quad_weights: Vec<f64>,
    measure: Vec<f64>,
}

impl HistorySpace {
    pub fn new(grid: TimeGrid, weight: WeightFn, quadrature: Quadrature) -> Self {
        let h = grid.step();
        let n = grid.intervals();
        let quad_weights: Vec<f64> = (0..=n).map(|p| h * quadrature.unit_weight(n, p)).collect();
        let measure = quad_weights
            .iter()
            .enumerate()
            .map(|(i, q)| q * weight.eval(grid.node(i)))
            .collect();
        Self {
            grid,
            weight,
            quadrature,
            quad_weights,
            measure,
        }
    }

    /// Convenience constructor with Simpson quadrature.
    pub fn exponential(duration: f64, intervals: usize, decay: f64) -> Result<Self> {
        Ok(Self::new(
            TimeGrid::new(duration, intervals)?,
            WeightFn::exponential(decay)?,
            Quadrature::Simpson,
        ))
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weight(&self) -> &WeightFn {
        &self.weight
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    /// Unweighted quadrature weights; they sum to `T`.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Quadrature weights multiplied by `w(τ_i)`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.grid.len() {
            return Err(Error::Dimension {
                expected: self.grid.len(),
                found: values.len(),
            });
        }
        Ok(())
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(self
            .measure
            .iter()
            .zip(f.iter().zip(g))
            .map(|(c, (a, b))| c * a * b)
            .sum())
    }

    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }
}

/// Samples `f(τ_i)` of a history on the grid of a [`HistorySpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySample {
    pub values: Vec<f64>,
}

impl HistorySample {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(self.values.iter().map(|v| a * v).collect())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &HistorySample) -> Self {
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        )
    }
}

pub fn inner_product(f: &HistorySample, g: &HistorySample, sp: &HistorySpace) -> Result<f64> {
    sp.inner(&f.values, &g.values)
}

/// Index shift `Σ(i) = i - m - 1` for 1-based `i`; here 0-based `i` maps to
/// `i - m`.
pub fn signed_index(i: usize, m: usize) -> i64 {
    i as i64 - m as i64
}

/// Trigonometric-exponential basis function `e_n(τ)`.
pub fn trig_exp(n: i64, tau: f64, duration: f64, decay: f64) -> f64 {
    let envelope = (0.5 * decay * tau).exp();
    if n == 0 {
        envelope / duration.sqrt()
    } else {
        let arg = 2.0 * PI * n.unsigned_abs() as f64 * tau / duration;
        let trig = if n < 0 { arg.cos() } else { arg.sin() };
        (2.0 / duration).sqrt() * envelope * trig
    }
}

/// Truncated trigonometric-exponential basis `(e_n)_{n=-m..m}` on a space.
///
/// Basis samples are tabulated once, row `i` holding `e_{i-m}` on the grid.
#[derive(Clone, Debug)]
pub struct BasisSpec {
    m: usize,
    space: HistorySpace,
    table: Arc<DMatrix<f64>>,
}

impl BasisSpec {
    pub fn new(m: usize, space: HistorySpace) -> Self {
        let size = 2 * m + 1;
        let grid = *space.grid();
        let t = grid.duration();
        let decay = space.weight().decay();
        let table = DMatrix::from_fn(size, grid.len(), |i, j| {
            trig_exp(signed_index(i, m), grid.node(j), t, decay)
        });
        Self {
            m,
            space,
            table: Arc::new(table),
        }
    }

    pub fn half_width(&self) -> usize {
        self.m
    }

    /// `M = 2m + 1`.
    pub fn size(&self) -> usize {
        2 * self.m + 1
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        self.space.grid()
    }

    /// Row `i` is basis function `e_{i-m}` sampled on the grid.
    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }

    pub fn function(&self, n: i64) -> Result<HistorySample> {
        let row = self.row_of(n)?;
        Ok(HistorySample::new(self.table.row(row).iter().copied().collect()))
    }

    /// Zero-based matrix row of signed index `n`.
    pub fn row_of(&self, n: i64) -> Result<usize> {
        if n.unsigned_abs() as usize > self.m {
            return Err(Error::BasisIndex { index: n, m: self.m });
        }
        Ok((n + self.m as i64) as usize)
    }

    /// Value of every basis function at `τ = 0`.
    pub fn values_at_present(&self) -> DVector<f64> {
        self.table.column(0).into_owned()
    }
}

pub fn basis_eval(n: i64, tau: f64, b: &BasisSpec) -> Result<f64> {
    if n.unsigned_abs() as usize > b.m {
        return Err(Error::BasisIndex { index: n, m: b.m });
    }
    let t = b.grid().duration();
    if !(0.0..=t).contains(&tau) {
        return Err(invalid("tau", format!("{tau} outside [0, {t}]")));
    }
    Ok(trig_exp(n, tau, t, b.space.weight().decay()))
}

/// Coefficients `q_i = (f, e_{Σ(i)})_H`.
pub fn project(f: &HistorySample, b: &BasisSpec) -> Result<DVector<f64>> {
    project_values(&f.values, b)
}

pub fn project_values(f: &[f64], b: &BasisSpec) -> Result<DVector<f64>> {
    b.space.check_len(f)?;
    let weighted = DVector::from_iterator(
        f.len(),
        f.iter().zip(b.space.measure()).map(|(v, c)| v * c),
    );
    Ok(&*b.table * weighted)
}

/// Pointwise sum `Σ q_i e_{Σ(i)}(τ_j)`.
pub fn reconstruct(q: &DVector<f64>, b: &BasisSpec) -> Result<HistorySample> {
    if q.len() != b.size() {
        return Err(Error::Dimension {
            expected: b.size(),
            found: q.len(),
        });
    }
    let values = b.table.tr_mul(q);
    Ok(HistorySample::new(values.iter().copied().collect()))
}

/// Grid check of the weight conditions: `w(0) = 1`, non-increasing, and the
/// semigroup inequality `w(s) >= w(s-t) w(t)` over all node pairs.
pub fn check_admissible(w: impl Fn(f64) -> f64, grid: &TimeGrid) -> bool {
    const TOL: f64 = 1e-12;
    let values: Vec<f64> = grid.nodes().into_iter().map(&w).collect();
    if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return false;
    }
    if (values[0] - 1.0).abs() > TOL {
        return false;
    }
    if values.windows(2).any(|p| p[1] > p[0] + TOL) {
        return false;
    }
    // Node differences are nodes on a uniform grid.
    for s in 0..values.len() {
        for t in 0..=s {
            if values[s] < values[s - t] * values[t] - TOL {
                return false;
            }
        }
    }
    true
}
