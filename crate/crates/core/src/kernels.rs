//! Relaxation kernels, hereditary laws and isotropic moduli.
//!
//! A scalar hereditary law reads `σ(t) = C ε(t) - ∫_0^t K(t-s) ε(s) ds`.
//! Every kernel handled here is a finite sum of decaying exponentials, which
//! is what the time steppers in [`crate::oracle`] and [`crate::rve`] exploit.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hist::{Quadrature, TimeGrid, WeightFn};

/// Mandel component ordering: xx, yy, zz, yz, zx, xy.
pub const MANDEL_XY: usize = 5;

/// `K(τ) = k exp(-λ τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpKernel {
    pub k: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronyBranch {
    pub mu: f64,
    pub tau: f64,
}

/// Maxwell-Wiechert relaxation modulus `R(τ) = μ∞ + Σ μ_i exp(-τ/τ_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronyKernel {
    pub mu_inf: f64,
    pub branches: Vec<PronyBranch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralAtom {
    pub lambda: f64,
    pub nu: f64,
}

/// Atomic relaxation measure above a cutoff rate `λ0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    pub lambda0: f64,
    pub atoms: Vec<SpectralAtom>,
}

/// One exponential term `amplitude * exp(-rate τ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub amplitude: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Exp(ExpKernel),
    Prony(PronyKernel),
    Spectrum(DiscreteSpectrum),
}

impl PronyKernel {
    pub fn new(mu_inf: f64, branches: Vec<PronyBranch>) -> Result<Self> {
        let p = Self { mu_inf, branches };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_inf.is_finite() && self.mu_inf >= 0.0) {
            return Err(invalid("mu_inf", format!("must be >= 0, got {}", self.mu_inf)));
        }
        for b in &self.branches {
            if !(b.mu.is_finite() && b.mu > 0.0 && b.tau.is_finite() && b.tau > 0.0) {
                return Err(invalid("branches", format!("need mu, tau > 0, got {b:?}")));
            }
        }
        Ok(())
    }

    pub fn relaxation(&self, tau: f64) -> f64 {
        self.mu_inf
            + self
                .branches
                .iter()
                .map(|b| b.mu * (-tau / b.tau).exp())
                .sum::<f64>()
    }

    /// `R(0) = μ∞ + Σ μ_i`.
    pub fn instantaneous(&self) -> f64 {
        self.mu_inf + self.branches.iter().map(|b| b.mu).sum::<f64>()
    }

    /// Laplace transform of the hereditary kernel, `Σ μ_i / (1 + s τ_i)`.
    pub fn kernel_laplace(&self, s: f64) -> f64 {
        self.branches.iter().map(|b| b.mu / (1.0 + s * b.tau)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mu_inf: factor * self.mu_inf,
            branches: self
                .branches
                .iter()
                .map(|b| PronyBranch {
                    mu: factor * b.mu,
                    tau: b.tau,
                })
                .collect(),
        }
    }
}

impl DiscreteSpectrum {
    /// Single atom reproducing `k exp(-λ τ)`; requires `λ > λ0`.
    pub fn from_exp(kernel: ExpKernel, lambda0: f64) -> Result<Self> {
        if kernel.lambda <= lambda0 {
            return Err(invalid("lambda", "atom rate must exceed the cutoff"));
        }
        Ok(Self {
            lambda0,
            atoms: vec![SpectralAtom {
                lambda: kernel.lambda,
                nu: kernel.k / (kernel.lambda - lambda0),
            }],
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.nu).sum()
    }
}

impl Kernel {
    pub fn zero() -> Self {
        Kernel::Exp(ExpKernel { k: 0.0, lambda: 1.0 })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Exp(e) => {
                if !(e.k.is_finite() && e.k >= 0.0) {
                    return Err(invalid("k", format!("must be >= 0, got {}", e.k)));
                }
                if !(e.lambda.is_finite() && e.lambda > 0.0) {
                    return Err(invalid("lambda", format!("must be > 0, got {}", e.lambda)));
                }
            }
            Kernel::Prony(p) => p.validate()?,
            Kernel::Spectrum(s) => {
                if !(s.lambda0.is_finite() && s.lambda0 >= 0.0) {
                    return Err(invalid("lambda0", "cutoff must be >= 0"));
                }
                for a in &s.atoms {
                    if !(a.lambda > s.lambda0 && a.nu >= 0.0 && a.nu.is_finite()) {
                        return Err(invalid("atoms", format!("need lambda > lambda0, nu >= 0: {a:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Exponential decomposition of `K(τ)`.
    ///
    /// For Prony input this is `-R'(τ) = Σ (μ_i/τ_i) exp(-τ/τ_i)`.
    pub fn terms(&self) -> Vec<ExpTerm> {
        match self {
            Kernel::Exp(e) => vec![ExpTerm {
                amplitude: e.k,
                rate: e.lambda,
            }],
            Kernel::Prony(p) => p
                .branches
                .iter()
                .map(|b| ExpTerm {
                    amplitude: b.mu / b.tau,
                    rate: 1.0 / b.tau,
                })
                .collect(),
            Kernel::Spectrum(s) => s
                .atoms
                .iter()
                .map(|a| ExpTerm {
                    amplitude: (a.lambda - s.lambda0) * a.nu,
                    rate: a.lambda,
                })
                .collect(),
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        if tau < 0.0 {
            return 0.0;
        }
        self.terms()
            .iter()
            .map(|t| t.amplitude * (-t.rate * tau).exp())
            .sum()
    }

    /// Elastic modulus implied by the kernel, if any (Prony: `R(0)`).
    pub fn implied_modulus(&self) -> Option<f64> {
        match self {
            Kernel::Prony(p) => Some(p.instantaneous()),
            _ => None,
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, tau: f64) -> f64 {
    kernel.eval(tau)
}

/// Scalar hereditary law `σ = C ε - K * ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct HereditaryLaw {
    pub modulus: f64,
    pub kernel: Kernel,
}

impl HereditaryLaw {
    pub fn new(modulus: f64, kernel: Kernel) -> Result<Self> {
        if !(modulus.is_finite() && modulus > 0.0) {
            return Err(invalid("modulus", format!("must be > 0, got {modulus}")));
        }
        kernel.validate()?;
        Ok(Self { modulus, kernel })
    }

    /// Kernel used as-is with `C = 1`.
    pub fn raw(kernel: Kernel) -> Result<Self> {
        Self::new(1.0, kernel)
    }

    /// Wiechert model: `C = R(0)`, `K = -R'`.
    pub fn from_prony(p: PronyKernel) -> Result<Self> {
        p.validate()?;
        let modulus = p.instantaneous();
        Self::new(modulus, Kernel::Prony(p))
    }

    /// Terms of `K / C`, the kernel of the inelastic-strain operator.
    pub fn normalized_terms(&self) -> Vec<ExpTerm> {
        self.kernel
            .terms()
            .into_iter()
            .map(|t| ExpTerm {
                amplitude: t.amplitude / self.modulus,
                rate: t.rate,
            })
            .collect()
    }
}

/// Result of the Hilbert-Schmidt admissibility bound `‖S‖_HS <= γ √T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsBound {
    /// `γ² = ∫_0^T K(τ)² / w(τ) dτ`.
    pub gamma_sq: f64,
    /// `γ √T`, infinite when the quadrature does not settle.
    pub bound: f64,
    /// `K` decays slower than `w^{1/2}`: the integrand grows with `τ`.
    pub slow_decay: bool,
}

const HS_INTERVALS: usize = 4096;

pub fn hs_bound(kernel: &Kernel, w: &WeightFn, duration: f64) -> Result<HsBound> {
    let coarse = TimeGrid::new(duration, HS_INTERVALS)?;
    if !w.is_admissible(&coarse) {
        return Err(Error::Inadmissible(format!("lambda0 = {}", w.decay())));
    }
    kernel.validate()?;
    let integrand = |tau: f64| {
        let k = kernel.eval(tau);
        k * k / w.eval(tau)
    };
    let coarse_val = integrate(&integrand, &coarse);
    let fine_val = integrate(&integrand, &TimeGrid::new(duration, 2 * HS_INTERVALS)?);
    let slow_decay = integrand(duration) > integrand(0.0) * (1.0 + 1e-12) && integrand(duration) > 0.0;

    let settled = fine_val.is_finite()
        && coarse_val.is_finite()
        && (coarse_val == 0.0 || (fine_val / coarse_val).abs() <= 1.5);
    let bound = if settled {
        (fine_val * duration).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(HsBound {
        gamma_sq: fine_val,
        bound,
        slow_decay,
    })
}

fn integrate(f: &impl Fn(f64) -> f64, grid: &TimeGrid) -> f64 {
    let n = grid.intervals();
    let h = grid.step();
    (0..=n)
        .map(|p| h * Quadrature::Simpson.unit_weight(n, p) * f(grid.node(p)))
        .sum()
}

/// Isotropic elastic moduli in Mandel notation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicModuli {
    pub bulk: f64,
    pub shear: f64,
    pub matrix: Matrix6<f64>,
}

pub fn volumetric_projector() -> Matrix6<f64> {
    let m = Vector6::new(1.0, 1.0, 1.0, 0.0, 0.0, 0.0);
    m * m.transpose() / 3.0
}

pub fn deviatoric_projector() -> Matrix6<f64> {
    Matrix6::identity() - volumetric_projector()
}

pub fn isotropic(bulk: f64, shear: f64) -> Result<IsotropicModuli> {
    if !(bulk.is_finite() && bulk > 0.0) {
        return Err(invalid("kappa", format!("bulk modulus must be > 0, got {bulk}")));
    }
    if !(shear.is_finite() && shear >= 0.0) {
        return Err(invalid("mu", format!("shear modulus must be >= 0, got {shear}")));
    }
    Ok(IsotropicModuli {
        bulk,
        shear,
        matrix: 3.0 * bulk * volumetric_projector() + 2.0 * shear * deviatoric_projector(),
    })
}
