//! The inelastic-strain (history) operator `S` and the standard linear solid.
//!
//! With the history `ε_t(τ) = ε(t - τ)` the hereditary law reads
//! `σ_t = C (I - S) ε_t`, where
//!
//! ```text
//! (S f)(τ)  = ∫_τ^T  K(ρ-τ)/C f(ρ) dρ
//! (S* f)(τ) = ∫_0^τ  K(τ-ρ)/C f(ρ) w(ρ)/w(τ) dρ
//! ```
//!
//! so `Sε_t = ε_t - C⁻¹σ_t` is the inelastic strain history.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hist::{HistorySample, HistorySpace, TimeGrid};
use crate::kernels::{ExpKernel, HereditaryLaw, Kernel};
use crate::table::{num, Table};

/// Kernel samples `K(d h)/C` for `d = 0..=n`.
fn kernel_table(law: &HereditaryLaw, grid: &TimeGrid) -> Vec<f64> {
    let terms = law.normalized_terms();
    let h = grid.step();
    (0..grid.len())
        .map(|d| {
            let tau = d as f64 * h;
            terms.iter().map(|t| t.amplitude * (-t.rate * tau).exp()).sum()
        })
        .collect()
}

/// `(S f)(τ_i)` by the nodal rule of `sp` on each sub-interval `[τ_i, T]`.
pub fn apply_s(law: &HereditaryLaw, f: &HistorySample, sp: &HistorySpace) -> Result<HistorySample> {
    sp.check_len(&f.values)?;
    let grid = sp.grid();
    let n = grid.intervals();
    let h = grid.step();
    let kern = kernel_table(law, grid);
    let rule = sp.quadrature();
    let mut weights = Vec::with_capacity(n + 1);
    let mut out = vec![0.0; n + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        let len = n - i;
        rule.fill_unit_weights(len, &mut weights);
        let mut acc = 0.0;
        for d in 0..=len {
            acc += weights[d] * kern[d] * f.values[i + d];
        }
        *slot = h * acc;
    }
    Ok(HistorySample::new(out))
}

/// `(S* f)(τ_i)`, the adjoint of [`apply_s`] in `H`.
pub fn apply_s_adjoint(
    law: &HereditaryLaw,
    f: &HistorySample,
    sp: &HistorySpace,
) -> Result<HistorySample> {
    sp.check_len(&f.values)?;
    let grid = sp.grid();
    let n = grid.intervals();
    let h = grid.step();
    let decay = sp.weight().decay();
    // K(dh)/C * w(ρ)/w(τ) with τ - ρ = dh.
    let kern: Vec<f64> = kernel_table(law, grid)
        .into_iter()
        .enumerate()
        .map(|(d, k)| k * (decay * d as f64 * h).exp())
        .collect();
    let rule = sp.quadrature();
    let mut weights = Vec::with_capacity(n + 1);
    let mut out = vec![0.0; n + 1];
    for (i, slot) in out.iter_mut().enumerate() {
        rule.fill_unit_weights(i, &mut weights);
        let mut acc = 0.0;
        for p in 0..=i {
            acc += weights[p] * kern[i - p] * f.values[p];
        }
        *slot = h * acc;
    }
    Ok(HistorySample::new(out))
}

/// Standard linear solid `σ = C0 ε - ∫ C1 exp(-λ(t-s)) ε(s) ds` observed in
/// the history space with weight `exp(-λ0 τ)` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlsParams {
    pub c0: f64,
    pub c1: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub duration: f64,
}

impl SlsParams {
    pub fn new(c0: f64, c1: f64, lambda: f64, lambda0: f64, duration: f64) -> Result<Self> {
        let checks = [
            ("C0", c0, c0 > 0.0),
            ("C1", c1, c1 >= 0.0),
            ("lambda", lambda, lambda > 0.0),
            ("lambda0", lambda0, lambda0 > 0.0),
            ("T", duration, duration > 0.0),
        ];
        for (name, value, ok) in checks {
            if !(ok && value.is_finite()) {
                return Err(invalid(name, format!("out of range: {value}")));
            }
        }
        Ok(Self {
            c0,
            c1,
            lambda,
            lambda0,
            duration,
        })
    }

    /// Parameters with `C0 = 1`, so that `k = C1`.
    pub fn from_ratio(k: f64, lambda: f64, lambda0: f64, duration: f64) -> Result<Self> {
        Self::new(1.0, k, lambda, lambda0, duration)
    }

    /// `k = C1 / C0`.
    pub fn k(&self) -> f64 {
        self.c1 / self.c0
    }

    /// `α = λ - λ0/2`.
    pub fn alpha(&self) -> f64 {
        self.lambda - 0.5 * self.lambda0
    }

    pub fn law(&self) -> HereditaryLaw {
        HereditaryLaw {
            modulus: self.c0,
            kernel: Kernel::Exp(ExpKernel {
                k: self.c1,
                lambda: self.lambda,
            }),
        }
    }
}

const ALPHA_ZERO: f64 = 1e-12;

/// Singular system of the SLS history operator.
///
/// When `α T < -1` the leading mode is hyperbolic: `kappa[0]` then holds the
/// rate `η` of `sinh(η τ)` and `μ_1 = k²/(α² - η²)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlsSpectrum {
    pub kappa: Vec<f64>,
    pub mu: Vec<f64>,
    pub s: Vec<f64>,
    pub norm: Vec<f64>,
    pub hyperbolic_lead: bool,
    pub params: SlsParams,
}

impl SlsSpectrum {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    fn is_hyperbolic(&self, idx: usize) -> bool {
        idx == 0 && self.hyperbolic_lead
    }

    /// `(φ_n(τ), ψ_n(τ))` for 1-based `n`.
    pub fn eigenfunctions(&self, n: usize, tau: f64) -> Result<(f64, f64)> {
        if n == 0 || n > self.len() {
            return Err(Error::Rank {
                rank: n,
                max: self.len(),
            });
        }
        let idx = n - 1;
        let p = &self.params;
        let alpha = if p.alpha().abs() < ALPHA_ZERO { 0.0 } else { p.alpha() };
        let kap = self.kappa[idx];
        let envelope = (0.5 * p.lambda0 * tau).exp();
        let nn = self.norm[idx];
        if self.is_hyperbolic(idx) {
            let (sh, ch) = ((kap * tau).sinh(), (kap * tau).cosh());
            let phi = nn * envelope * sh;
            let psi = p.k() * nn / (alpha * alpha - kap * kap) * envelope * (alpha * sh + kap * ch);
            Ok((phi, psi))
        } else {
            let (sn, cs) = (kap * tau).sin_cos();
            let phi = nn * envelope * sn;
            let psi = p.k() * nn / (alpha * alpha + kap * kap) * envelope * (alpha * sn + kap * cs);
            Ok((phi, psi))
        }
    }

    /// Residual of the characteristic equation `tan(κT) + κ/α` of mode `n`.
    pub fn residual(&self, n: usize) -> f64 {
        let idx = n - 1;
        let t = self.params.duration;
        let alpha = self.params.alpha();
        let k = self.kappa[idx];
        if self.is_hyperbolic(idx) {
            (k * t).tanh() + k / alpha
        } else if alpha.abs() < ALPHA_ZERO {
            (k * t).cos()
        } else {
            (k * t).tan() + k / alpha
        }
    }

    /// CSV with columns `n, kappa_n, mu_n, s_n, N_n`.
    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&["n", "kappa_n", "mu_n", "s_n", "N_n"]);
        for i in 0..self.len() {
            table.push(vec![
                (i + 1).to_string(),
                num(self.kappa[i]),
                num(self.mu[i]),
                num(self.s[i]),
                num(self.norm[i]),
            ]);
        }
        table
    }
}

pub fn sls_spectrum(p: &SlsParams, n_max: usize) -> Result<SlsSpectrum> {
    if n_max == 0 {
        return Err(invalid("n_max", "need at least one mode"));
    }
    let t = p.duration;
    let k = p.k();
    let alpha = p.alpha();
    let mut spec = SlsSpectrum {
        kappa: Vec::with_capacity(n_max),
        mu: Vec::with_capacity(n_max),
        s: Vec::with_capacity(n_max),
        norm: Vec::with_capacity(n_max),
        hyperbolic_lead: false,
        params: *p,
    };

    if alpha.abs() < ALPHA_ZERO {
        for n in 1..=n_max {
            let kap = (n as f64 - 0.5) * PI / t;
            spec.kappa.push(kap);
            spec.mu.push(k * k / (kap * kap));
            spec.norm.push((2.0 / t).sqrt());
        }
    } else {
        spec.hyperbolic_lead = alpha * t < -1.0;
        if (alpha * t + 1.0).abs() < 1e-9 {
            // κ → 0 double root; the sine/sinh forms both degenerate.
            return Err(Error::Bracketing { mode: 1 });
        }
        for n in 1..=n_max {
            if n == 1 && spec.hyperbolic_lead {
                let eta = bisect(|x| (x * t).tanh() + x / alpha, 0.0, -alpha, true)
                    .ok_or(Error::Bracketing { mode: 1 })?;
                let d = alpha * alpha - eta * eta;
                spec.kappa.push(eta);
                spec.mu.push(k * k / d);
                spec.norm.push((-2.0 / (t + alpha / d)).sqrt());
                continue;
            }
            let nf = n as f64;
            let (lo, hi, lo_positive) = if alpha > 0.0 {
                ((nf - 0.5) * PI / t, nf * PI / t, None)
            } else if n == 1 {
                // g(κ) ≈ κ(1 + αT) > 0 just above zero.
                (0.0, 0.5 * PI / t, Some(true))
            } else {
                ((nf - 1.0) * PI / t, (nf - 0.5) * PI / t, None)
            };
            let g = |x: f64| alpha * (x * t).sin() + x * (x * t).cos();
            let lo_sign = lo_positive.unwrap_or_else(|| g(lo) > 0.0);
            let kap = bisect(g, lo, hi, lo_sign).ok_or(Error::Bracketing { mode: n })?;
            let d = alpha * alpha + kap * kap;
            spec.kappa.push(kap);
            spec.mu.push(k * k / d);
            spec.norm.push((2.0 / (t + alpha / d)).sqrt());
        }
    }
    spec.s = spec.mu.iter().map(|m| m.sqrt()).collect();
    Ok(spec)
}

/// Bisection to the last representable midpoint; `lo_positive` is the sign
/// of `g` just above `lo`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, lo_positive: bool) -> Option<f64> {
    let g_hi = g(hi);
    if (g_hi > 0.0) == lo_positive && g_hi != 0.0 {
        return None;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if (gm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pick = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    Some(pick)
}

pub fn sls_eigenfunctions(spec: &SlsSpectrum, n: usize, tau: f64) -> Result<(f64, f64)> {
    spec.eigenfunctions(n, tau)
}

/// Closed-form `‖S‖_HS = k √((2αT + e^{-2αT} - 1) / (4α²))`.
///
/// In `L²(0,T)` coordinates the kernel is `k e^{-α(ρ-τ)}`, so the exponent
/// is `α = λ - λ0/2`, the same shift that enters the singular values.
pub fn sls_hs_norm(p: &SlsParams) -> f64 {
    let t = p.duration;
    let x = 2.0 * p.alpha() * t;
    // (x + e^{-x} - 1) / x² as a series near x = 0.
    let ratio = if x.abs() < 1e-2 {
        let mut term = 0.5;
        let mut sum = 0.0;
        for q in 0..12 {
            sum += term;
            term *= -x / (q + 3) as f64;
        }
        sum
    } else {
        (x + (-x).exp_m1()) / (x * x)
    };
    p.k() * t * ratio.sqrt()
}

/// Indicator `h_ρ(τ) = 1` on `τ <= ρ`, sampled with the value 1/2 on a node
/// that coincides with the jump.
pub fn step_history(grid: &TimeGrid, rho: f64) -> HistorySample {
    let tol = 1e-9 * grid.step();
    grid.sample(|tau| {
        if tau < rho - tol {
            1.0
        } else if tau <= rho + tol {
            0.5
        } else {
            0.0
        }
    })
}

/// `(A h_ρ)(0)` for an operator closure `A`; `L(ρ)` when `A = S`.
pub fn relaxation_function<F>(apply: F, rho: f64, sp: &HistorySpace) -> Result<f64>
where
    F: Fn(&HistorySample) -> Result<HistorySample>,
{
    let t = sp.grid().duration();
    if !(0.0..=t).contains(&rho) {
        return Err(invalid("rho", format!("{rho} outside [0, {t}]")));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let out = apply(&step_history_calibrated(sp, rho))?;
    Ok(out.values[0])
}

/// Indicator of `[0, ρ]` whose value on the first node at or past `ρ` is
/// chosen so that the full-length rule of `sp` integrates it to exactly `ρ`.
pub fn step_history_calibrated(sp: &HistorySpace, rho: f64) -> HistorySample {
    let grid = sp.grid();
    let n = grid.intervals();
    let rule = sp.quadrature();
    let target = rho / grid.step();
    let mut values = vec![0.0; n + 1];
    let mut acc = 0.0;
    for (i, v) in values.iter_mut().enumerate() {
        let w = rule.unit_weight(n, i);
        if grid.node(i) < rho && acc + w <= target {
            *v = 1.0;
            acc += w;
        } else {
            *v = (target - acc) / w;
            break;
        }
    }
    HistorySample::new(values)
}

/// Exact inelastic strain of the SLS under a unit step held on `τ <= T/2`.
pub fn step_inelastic(p: &SlsParams, tau: f64) -> f64 {
    let half = 0.5 * p.duration;
    if tau <= half {
        p.c1 / (p.c0 * p.lambda) * -(-p.lambda * (half - tau)).exp_m1()
    } else {
        0.0
    }
}

/// Exact stress history of the same step test.
pub fn step_stress(p: &SlsParams, tau: f64) -> f64 {
    let half = 0.5 * p.duration;
    if tau <= half {
        p.c0 + p.c1 / p.lambda * (-p.lambda * (half - tau)).exp_m1()
    } else {
        0.0
    }
}

/// Step strain `1` on `[0, T/2]`, `0` after.
pub fn step_strain(p: &SlsParams, tau: f64) -> f64 {
    if tau <= 0.5 * p.duration {
        1.0
    } else {
        0.0
    }
}

/// `(ε^p, σ)` histories of the step test sampled on `grid`.
pub fn step_exact(p: &SlsParams, grid: &TimeGrid) -> (HistorySample, HistorySample) {
    (
        grid.sample(|tau| step_inelastic(p, tau)),
        grid.sample(|tau| step_stress(p, tau)),
    )
}
