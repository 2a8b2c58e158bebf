//! Truncated history operator `S_M` and its optimal rank-`N` reduction.
//!
//! `S_M` holds the coordinates `(e_i, S e_j)_H` of the operator in the
//! trigonometric-exponential basis. The truncated SVD `S_M ≈ Ψ Φᵀ` is an
//! internal-variable law: the `N` numbers `q = Φᵀ(ε_t, e)_H` are the history
//! variables and `Ψ` decodes them into inelastic strain.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hist::{project, reconstruct, signed_index, BasisSpec, HistorySample, HistorySpace, Quadrature, TimeGrid};
use crate::kernels::HereditaryLaw;
use crate::linalg::jacobi_eigen;
use crate::operator::{apply_s, SlsParams};
use crate::oracle::{check_grid, sample_basis_responses, BasisResponses, Oracle, StrainProgram};
use crate::table::{num, Table};

/// Basis description shared by operator matrices and reduced models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    #[serde(rename = "T")]
    pub duration: f64,
    pub lambda0: f64,
    pub m: usize,
    /// Grid intervals `n`.
    pub n: usize,
    pub quadrature: Quadrature,
}

impl BasisMeta {
    pub fn of(b: &BasisSpec) -> Self {
        let sp = b.space();
        Self {
            duration: sp.grid().duration(),
            lambda0: sp.weight().decay(),
            m: b.half_width(),
            n: sp.grid().intervals(),
            quadrature: sp.quadrature(),
        }
    }

    pub fn size(&self) -> usize {
        2 * self.m + 1
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.duration, self.n)
    }

    pub fn basis(&self) -> Result<BasisSpec> {
        let sp = HistorySpace::new(
            self.grid()?,
            crate::hist::WeightFn::exponential(self.lambda0)?,
            self.quadrature,
        );
        Ok(BasisSpec::new(self.m, sp))
    }

    pub fn check(&self, b: &BasisSpec) -> Result<()> {
        if *self != Self::of(b) {
            return Err(invalid("basis", format!("model basis {self:?} differs from {:?}", Self::of(b))));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    /// `S_M[i, j] = (e_{Σ(i)}, S e_{Σ(j)})_H`.
    pub matrix: DMatrix<f64>,
    /// Present-time values `(S e_{Σ(j)})(0)`.
    pub trace: DVector<f64>,
    pub meta: BasisMeta,
    pub c_eff: f64,
    pub provenance: String,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// All `M` singular values, non-increasing.
    pub fn singular_values(&self) -> Result<DVector<f64>> {
        let eig = jacobi_eigen(&(self.matrix.transpose() * &self.matrix))?;
        Ok(eig.values.map(|v| v.max(0.0).sqrt()))
    }
}

/// Column `j` is the projection of the sampled inelastic strain `p_j`;
/// costs `M` oracle calls plus a step probe when the modulus is unknown.
pub fn assemble_from_oracle(oracle: &dyn Oracle, b: &BasisSpec) -> Result<OperatorMatrix> {
    assemble_from_oracle_with(oracle, b, None)
}

pub fn assemble_from_oracle_with(
    oracle: &dyn Oracle,
    b: &BasisSpec,
    c_eff: Option<f64>,
) -> Result<OperatorMatrix> {
    let r = sample_basis_responses(oracle, b, c_eff)?;
    assemble_from_responses(&r, b, oracle.id())
}

/// Operator matrix from responses that were already sampled.
pub fn assemble_from_responses(r: &BasisResponses, b: &BasisSpec, provenance: String) -> Result<OperatorMatrix> {
    let size = b.size();
    if r.histories.len() != size {
        return Err(Error::Dimension {
            expected: size,
            found: r.histories.len(),
        });
    }
    let mut matrix = DMatrix::zeros(size, size);
    let mut trace = DVector::zeros(size);
    for (j, p) in r.histories.iter().enumerate() {
        matrix.set_column(j, &project(p, b)?);
        trace[j] = p.values[0];
    }
    Ok(OperatorMatrix {
        matrix,
        trace,
        meta: BasisMeta::of(b),
        c_eff: r.c_eff,
        provenance,
    })
}

/// Quadrature assembly straight from the kernel, `S e_j` by [`apply_s`].
pub fn assemble_quadrature(law: &HereditaryLaw, b: &BasisSpec) -> Result<OperatorMatrix> {
    let size = b.size();
    let m = b.half_width();
    let columns: Vec<HistorySample> = (0..size)
        .into_par_iter()
        .map(|j| apply_s(law, &b.function(signed_index(j, m))?, b.space()))
        .collect::<Result<_>>()?;
    let mut matrix = DMatrix::zeros(size, size);
    let mut trace = DVector::zeros(size);
    for (j, p) in columns.iter().enumerate() {
        matrix.set_column(j, &project(p, b)?);
        trace[j] = p.values[0];
    }
    Ok(OperatorMatrix {
        matrix,
        trace,
        meta: BasisMeta::of(b),
        c_eff: law.modulus,
        provenance: "quadrature".into(),
    })
}

/// `Q(p, r) = ∫_0^T e^{iμτ} ∫_τ^T e^{-α(ρ-τ)} e^{iνρ} dρ dτ` with
/// `μ = 2πp/T`, `ν = 2πr/T`.
struct CoreIntegral {
    alpha: f64,
    duration: f64,
    /// `1 - e^{-αT}`.
    q: f64,
}

impl CoreIntegral {
    fn new(alpha: f64, duration: f64) -> Self {
        Self {
            alpha,
            duration,
            q: -(-alpha * duration).exp_m1(),
        }
    }

    fn freq(&self, p: i64) -> f64 {
        2.0 * PI * p as f64 / self.duration
    }

    /// `∫_0^T e^{(iμ - α)(T - τ)} ... ` collapses to `(1 - e^{-αT})/(iμ + α)`.
    fn x(&self, p: i64) -> Complex64 {
        if p == 0 && self.alpha == 0.0 {
            Complex64::new(self.duration, 0.0)
        } else {
            Complex64::new(self.q, 0.0) / Complex64::new(self.alpha, self.freq(p))
        }
    }

    fn eval(&self, p: i64, r: i64) -> Complex64 {
        let t = self.duration;
        let i = Complex64::i();
        if r == 0 && self.alpha == 0.0 {
            return if p == 0 {
                Complex64::new(0.5 * t * t, 0.0)
            } else {
                i * (t / self.freq(p))
            };
        }
        if p == 0 && r == 0 && (self.alpha * t).abs() < 1e-3 {
            // T² Σ (-αT)^k/(k+2)!
            let x = -self.alpha * t;
            let mut term = 0.5;
            let mut sum = 0.0;
            for k in 0..10 {
                sum += term;
                term *= x / (k + 3) as f64;
            }
            return Complex64::new(t * t * sum, 0.0);
        }
        let delta = if p + r == 0 { t } else { 0.0 };
        (self.x(p) - delta) / Complex64::new(-self.alpha, self.freq(r))
    }
}

/// `e_n = e^{λ0τ/2} Re(a_n e^{i 2π|n|τ/T})`.
fn mode_coefficient(n: i64, t: f64) -> (i64, Complex64) {
    let c = (2.0 / t).sqrt();
    match n.signum() {
        0 => (0, Complex64::new((1.0 / t).sqrt(), 0.0)),
        -1 => (-n, Complex64::new(c, 0.0)),
        _ => (n, Complex64::new(0.0, -c)),
    }
}

/// Exact `S_M` and trace for the SLS kernel; no quadrature.
pub fn assemble_closed_form(p: &SlsParams, b: &BasisSpec) -> Result<OperatorMatrix> {
    let meta = BasisMeta::of(b);
    if meta.duration != p.duration || meta.lambda0 != p.lambda0 {
        return Err(invalid(
            "basis",
            format!("basis (T={}, lambda0={}) does not match the material", meta.duration, meta.lambda0),
        ));
    }
    let t = p.duration;
    let k = p.k();
    let core = CoreIntegral::new(p.alpha(), t);
    let m = b.half_width();
    let size = b.size();
    let modes: Vec<(i64, Complex64)> = (0..size).map(|i| mode_coefficient(signed_index(i, m), t)).collect();
    let mut matrix = DMatrix::zeros(size, size);
    for (i, &(pi, ai)) in modes.iter().enumerate() {
        for (j, &(pj, aj)) in modes.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (si, ci) in [(1, ai), (-1, ai.conj())] {
                for (sj, cj) in [(1, aj), (-1, aj.conj())] {
                    acc += ci * cj * core.eval(si * pi, sj * pj);
                }
            }
            matrix[(i, j)] = 0.25 * k * acc.re;
        }
    }
    let trace = DVector::from_iterator(size, modes.iter().map(|&(pj, aj)| k * (aj * core.x(-pj)).re));
    Ok(OperatorMatrix {
        matrix,
        trace,
        meta,
        c_eff: p.c0,
        provenance: "sls-closed-form".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Optimal,
    Fourier,
}

/// Rank-`N` law `S_{M,N} = Ψ Φᵀ` in basis coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub kind: ModelKind,
    pub meta: BasisMeta,
    pub c_eff: f64,
    /// `s_k = ‖Ψ_k‖`.
    pub s: DVector<f64>,
    /// `M × N` encoder coefficients.
    pub phi: DMatrix<f64>,
    /// `M × N` decoder coefficients.
    pub psi: DMatrix<f64>,
    /// `(S φ_k)(0)`, the decoder read at the present instant.
    pub psi0: DVector<f64>,
}

impl ReducedModel {
    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    pub fn size(&self) -> usize {
        self.phi.nrows()
    }

    /// `S_{M,N}` as an `M × M` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.psi * self.phi.transpose()
    }

    fn from_directions(kind: ModelKind, s: &OperatorMatrix, phi: DMatrix<f64>, psi: DMatrix<f64>) -> Self {
        let norms = DVector::from_iterator(psi.ncols(), psi.column_iter().map(|c| c.norm()));
        let psi0 = phi.tr_mul(&s.trace);
        Self {
            kind,
            meta: s.meta,
            c_eff: s.c_eff,
            s: norms,
            phi,
            psi,
            psi0,
        }
    }
}

fn check_rank(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::Rank { rank: n, max });
    }
    Ok(())
}

/// Optimal rank-`N` model from the eigenvectors of `SᵀS`.
pub fn svd_truncate(s: &OperatorMatrix, n: usize) -> Result<ReducedModel> {
    check_rank(n, s.size())?;
    let eig = jacobi_eigen(&(s.matrix.transpose() * &s.matrix))?;
    let phi = eig.vectors.columns(0, n).into_owned();
    let psi = &s.matrix * &phi;
    Ok(ReducedModel::from_directions(ModelKind::Optimal, s, phi, psi))
}

/// Basis rows in the order `0, 1, -1, 2, -2, ...`.
pub fn fourier_order(m: usize) -> Vec<usize> {
    let mut order = vec![m];
    for j in 1..=m {
        order.push(m + j);
        order.push(m - j);
    }
    order
}

/// Rank-`N` model on the first `N` basis functions: `Φ = P`, `Ψ = P Pᵀ S P`.
pub fn fourier_truncate(s: &OperatorMatrix, n: usize) -> Result<ReducedModel> {
    check_rank(n, s.size())?;
    let size = s.size();
    let order = fourier_order(s.meta.m);
    let mut phi = DMatrix::zeros(size, n);
    for (k, &row) in order.iter().take(n).enumerate() {
        phi[(row, k)] = 1.0;
    }
    let projector = &phi * phi.transpose();
    let psi = projector * &s.matrix * &phi;
    Ok(ReducedModel::from_directions(ModelKind::Fourier, s, phi, psi))
}

/// `S_{M,N} f` reconstructed on the grid.
pub fn apply_reduced(rm: &ReducedModel, f: &HistorySample, b: &BasisSpec) -> Result<HistorySample> {
    rm.meta.check(b)?;
    let q = project(f, b)?;
    let p = &rm.psi * rm.phi.tr_mul(&q);
    reconstruct(&p, b)
}

/// Internal variables `Φᵀ (ε_{t_i}, e)_H` at every node, as `N × (n+1)`.
pub fn internal_variables(rm: &ReducedModel, program: &StrainProgram) -> Result<DMatrix<f64>> {
    let grid = rm.meta.grid()?;
    check_grid(&grid, program.grid())?;
    let b = rm.meta.basis()?;
    let measure = DMatrix::from_diagonal(&DVector::from_column_slice(b.space().measure()));
    // Row k: encoder k sampled with the quadrature measure.
    let encoder = rm.phi.transpose() * b.table() * measure;
    let eps = program.values();
    let len = eps.len();
    let n = rm.rank();
    let columns: Vec<Vec<f64>> = (0..len)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|k| (0..=i).map(|l| encoder[(k, l)] * eps[i - l]).sum())
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, len, |k, i| columns[i][k]))
}

/// `σ(t_i) = C (ε(t_i) - ψ(0)·q(t_i))` from stored internal variables.
pub fn stress_from_internal(rm: &ReducedModel, program: &StrainProgram, q: &DMatrix<f64>) -> Result<Vec<f64>> {
    if q.nrows() != rm.rank() || q.ncols() != program.values().len() {
        return Err(Error::Dimension {
            expected: rm.rank() * program.values().len(),
            found: q.nrows() * q.ncols(),
        });
    }
    Ok(program
        .values()
        .iter()
        .enumerate()
        .map(|(i, e)| rm.c_eff * (e - rm.psi0.dot(&q.column(i))))
        .collect())
}

pub fn predict_stress(rm: &ReducedModel, program: &StrainProgram) -> Result<Vec<f64>> {
    let q = internal_variables(rm, program)?;
    stress_from_internal(rm, program, &q)
}

/// `‖A‖₂` through the largest eigenvalue of `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let eig = jacobi_eigen(&(a.transpose() * a))?;
    Ok(eig.values[0].max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub m_size: usize,
    pub rank: usize,
    /// `s_{M,N+1}`, zero when `N = M`.
    pub rank_error: f64,
    /// `s_{N+1}(S)` when an analytic spectrum is registered.
    pub exact_rank_error: Option<f64>,
    /// `‖(I-Π_M)S‖ + ‖S(I-Π_M)‖` when known; otherwise unknown and vanishing in `M`.
    pub sampling_error: Option<f64>,
    /// `s_{N+1}(S) + 2 × sampling` when both terms are known.
    pub bound: Option<f64>,
    pub gibbs_width: f64,
    /// `|s_{M,k} - s_k|` for the supplied analytic values.
    pub spectral_gaps: Vec<f64>,
}

impl ErrorReport {
    pub fn sampling_label(&self) -> String {
        match self.sampling_error {
            Some(v) => num(v),
            None => "unknown, vanishing in M".into(),
        }
    }
}

pub fn error_report(
    s: &[f64],
    m_size: usize,
    rank: usize,
    duration: f64,
    analytic: Option<&[f64]>,
    sampling_error: Option<f64>,
) -> ErrorReport {
    let rank_error = if rank >= m_size { 0.0 } else { s.get(rank).copied().unwrap_or(0.0) };
    let exact_rank_error = analytic.and_then(|a| a.get(rank).copied());
    let bound = match (exact_rank_error, sampling_error) {
        (Some(r), Some(e)) => Some(r + 2.0 * e),
        _ => None,
    };
    let spectral_gaps = analytic
        .map(|a| a.iter().zip(s).map(|(x, y)| (x - y).abs()).collect())
        .unwrap_or_default();
    ErrorReport {
        m_size,
        rank,
        rank_error,
        exact_rank_error,
        sampling_error,
        bound,
        gibbs_width: (duration / m_size as f64).max(duration / rank.max(1) as f64),
        spectral_gaps,
    }
}

/// CSV with columns `k, s_Mk`.
pub fn spectrum_table(s: &[f64]) -> Table {
    let mut table = Table::new(&["k", "s_Mk"]);
    for (k, v) in s.iter().enumerate() {
        table.push(vec![(k + 1).to_string(), num(*v)]);
    }
    table
}

pub const MODEL_VERSION: u32 = 1;
const BASIS_NAME: &str = "trig-exp";
const SIGN_CONVENTION: &str = "ep=eps-sigma/C";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kind: ModelKind,
    basis: String,
    sign_convention: String,
    #[serde(flatten)]
    meta: BasisMeta,
    #[serde(rename = "M")]
    m_size: usize,
    #[serde(rename = "N")]
    rank: usize,
    #[serde(rename = "C_eff")]
    c_eff: f64,
    s: Vec<f64>,
    #[serde(rename = "Phi")]
    phi: Vec<Vec<f64>>,
    #[serde(rename = "Psi")]
    psi: Vec<Vec<f64>>,
    psi0: Vec<f64>,
}

fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("expected a {nrows}x{ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialized model; floats are written in shortest round-trip form.
pub fn model_to_json(rm: &ReducedModel) -> Result<String> {
    let file = ModelFile {
        version: MODEL_VERSION,
        kind: rm.kind,
        basis: BASIS_NAME.into(),
        sign_convention: SIGN_CONVENTION.into(),
        meta: rm.meta,
        m_size: rm.size(),
        rank: rm.rank(),
        c_eff: rm.c_eff,
        s: rm.s.iter().copied().collect(),
        phi: rows(&rm.phi),
        psi: rows(&rm.psi),
        psi0: rm.psi0.iter().copied().collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn model_from_json(text: &str) -> Result<ReducedModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if f.version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {}", f.version)));
    }
    if f.basis != BASIS_NAME || f.sign_convention != SIGN_CONVENTION {
        return Err(Error::Format(format!("unsupported basis {:?} or convention {:?}", f.basis, f.sign_convention)));
    }
    if f.m_size != f.meta.size() {
        return Err(Error::Format(format!("M = {} but m = {}", f.m_size, f.meta.m)));
    }
    check_rank(f.rank, f.m_size).map_err(|e| Error::Format(e.to_string()))?;
    if f.s.len() != f.rank || f.psi0.len() != f.rank {
        return Err(Error::Format("s and psi0 need N entries".into()));
    }
    Ok(ReducedModel {
        kind: f.kind,
        meta: f.meta,
        c_eff: f.c_eff,
        s: DVector::from_vec(f.s),
        phi: from_rows(&f.phi, f.m_size, f.rank)?,
        psi: from_rows(&f.psi, f.m_size, f.rank)?,
        psi0: DVector::from_vec(f.psi0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_sls_oracle;

    fn basis(m: usize, n: usize) -> BasisSpec {
        BasisSpec::new(m, HistorySpace::exponential(1.0, n, 1.0).unwrap())
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let b = basis(5, 4000);
        for (c1, lambda) in [(1.0, 1.0), (0.7, 0.5), (1.3, 0.1), (0.5, 4.0)] {
            let p = SlsParams::new(2.0, c1, lambda, 1.0, 1.0).unwrap();
            let exact = assemble_closed_form(&p, &b).unwrap();
            let quad = assemble_quadrature(&p.law(), &b).unwrap();
            let diff = (&exact.matrix - &quad.matrix).abs().max();
            assert!(diff < 1e-8, "lambda {lambda}: {diff}");
            let tdiff = (&exact.trace - &quad.trace).abs().max();
            assert!(tdiff < 1e-8, "lambda {lambda}: {tdiff}");
        }
    }

    #[test]
    fn zero_kernel_gives_zero_matrix() {
        let p = SlsParams::new(2.0, 0.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &basis(3, 100)).unwrap();
        assert!(s.matrix.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn oracle_assembly_matches_closed_form() {
        let b = basis(15, 4000);
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let o = make_sls_oracle(&p, *b.grid());
        let s = assemble_from_oracle(&o, &b).unwrap();
        assert_eq!(o.evaluations(), 31);
        let exact = assemble_closed_form(&p, &b).unwrap();
        let diff = (&s.matrix - &exact.matrix).abs().max();
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn truncation_invariants() {
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &basis(6, 64)).unwrap();
        let all = s.singular_values().unwrap();
        for n in 1..=13 {
            let rm = svd_truncate(&s, n).unwrap();
            let gram = rm.phi.transpose() * &rm.phi;
            assert!((gram - DMatrix::identity(n, n)).abs().max() < 1e-10);
            let pg = rm.psi.transpose() * &rm.psi;
            for i in 0..n {
                assert!((pg[(i, i)].sqrt() - rm.s[i]).abs() < 1e-10);
                for j in 0..n {
                    if i != j {
                        assert!(pg[(i, j)].abs() < 1e-10);
                    }
                }
            }
            let err = spectral_norm(&(&s.matrix - rm.matrix())).unwrap();
            let expected = if n < 13 { all[n] } else { 0.0 };
            assert!((err - expected).abs() < 1e-10, "N={n}");
        }
        assert!(svd_truncate(&s, 0).is_err());
        assert!(svd_truncate(&s, 14).is_err());
    }

    #[test]
    fn fourier_baseline() {
        assert_eq!(fourier_order(2), vec![2, 3, 1, 4, 0]);
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &basis(3, 64)).unwrap();
        let full = fourier_truncate(&s, 7).unwrap();
        assert!((full.matrix() - &s.matrix).abs().max() < 1e-15);
        let one = fourier_truncate(&s, 1).unwrap();
        assert_eq!(one.phi[(3, 0)], 1.0);
        assert_eq!(one.phi.column(0).sum(), 1.0);
    }

    #[test]
    fn apply_reduced_singular_pair() {
        let b = basis(8, 2000);
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &b).unwrap();
        let rm = svd_truncate(&s, 4).unwrap();
        let phi1 = reconstruct(&rm.phi.column(0).into_owned(), &b).unwrap();
        let out = apply_reduced(&rm, &phi1, &b).unwrap();
        let norm = b.space().norm(&out.values).unwrap();
        assert!((norm - rm.s[0]).abs() < 1e-8);
        // A direction orthogonal to all encoders maps to zero.
        let full = svd_truncate(&s, 17).unwrap();
        let orth = reconstruct(&full.phi.column(10).into_owned(), &b).unwrap();
        let out = apply_reduced(&rm, &orth, &b).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn prediction_from_internal_state_matches_oracle() {
        let b = basis(31, 2000);
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &b).unwrap();
        let rm = svd_truncate(&s, 63).unwrap();
        let program = StrainProgram::from_fn(*b.grid(), |t| (2.0 * t).sin() + t);
        let pred = predict_stress(&rm, &program).unwrap();
        let exact = make_sls_oracle(&p, *b.grid()).evaluate(&program).unwrap().stress;
        let diff: Vec<f64> = pred.iter().zip(&exact).map(|(a, e)| a - e).collect();
        let rel = b.space().norm(&diff).unwrap() / b.space().norm(&exact).unwrap();
        assert!(rel < 1e-3, "{rel}");
        let zero = predict_stress(&rm, &StrainProgram::zeros(*b.grid())).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn model_file_round_trip() {
        let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = assemble_closed_form(&p, &basis(4, 100)).unwrap();
        let rm = svd_truncate(&s, 3).unwrap();
        let text = model_to_json(&rm).unwrap();
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, rm);
        assert_eq!(model_to_json(&back).unwrap(), text);
        assert!(model_from_json(&text.replace("trig-exp", "legendre")).is_err());
    }

    #[test]
    fn report_fields() {
        let r = error_report(&[0.5, 0.2, 0.1], 3, 3, 1.0, None, None);
        assert_eq!(r.rank_error, 0.0);
        let r = error_report(&[0.5, 0.2, 0.1, 0.05, 0.01], 5, 2, 1.0, Some(&[0.51, 0.21, 0.11]), Some(0.01));
        assert_eq!(r.rank_error, 0.1);
        assert_eq!(r.gibbs_width, 0.5);
        assert_eq!(r.bound, Some(0.11 + 0.02));
        assert_eq!(r.sampling_label(), num(0.01));
        assert_eq!(error_report(&[1.0; 9], 9, 4, 1.0, None, None).gibbs_width, 0.25);
    }
}
