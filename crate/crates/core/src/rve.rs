//! Discrete periodic representative volume element.
//!
//! Material points `e` carry a weight `w_e`, a strain map
//! `ε_e = ē + B̃_e ũ` and a hereditary law
//! `σ_e = ℂ_e ε_e - Σ_i A_ei ∫ exp(-r_ei (t-s)) ε_e(s) ds`.
//! Equilibrium `Σ w_e B̃_eᵀ σ_e = 0` is solved quasi-statically for the
//! fluctuation `ũ`, with constant fluctuation modes removed by a gauge term.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::SQRT_2;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hist::TimeGrid;
use crate::kernels::{deviatoric_projector, volumetric_projector, PronyBranch, PronyKernel, MANDEL_XY};
use crate::oracle::{check_grid, Oracle, OracleResponse, StepCoefficients, StrainProgram};
use crate::table::{num, Table};

/// Exponential branch `amplitude · exp(-rate τ)` of a point kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub amplitude: DMatrix<f64>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointMaterial {
    pub elastic: DMatrix<f64>,
    pub branches: Vec<Branch>,
}

impl PointMaterial {
    pub fn dim(&self) -> usize {
        self.elastic.nrows()
    }

    /// Elastic bulk response, Wiechert deviatoric response in Mandel form.
    pub fn isotropic_prony(bulk: f64, kernel: &PronyKernel) -> Result<Self> {
        kernel.validate()?;
        if !(bulk.is_finite() && bulk > 0.0) {
            return Err(invalid("kappa", format!("must be > 0, got {bulk}")));
        }
        let vol = to_dynamic(&volumetric_projector());
        let dev = to_dynamic(&deviatoric_projector());
        let elastic = &vol * (3.0 * bulk) + &dev * (2.0 * kernel.instantaneous());
        let branches = kernel
            .branches
            .iter()
            .map(|b| Branch {
                amplitude: &dev * (2.0 * b.mu / b.tau),
                rate: 1.0 / b.tau,
            })
            .collect();
        Ok(Self { elastic, branches })
    }

    /// Scalar SLS `σ = C0 ε - C1 ∫ exp(-λ(t-s)) ε(s) ds`.
    pub fn scalar(c0: f64, terms: &[(f64, f64)]) -> Self {
        Self {
            elastic: DMatrix::from_element(1, 1, c0),
            branches: terms
                .iter()
                .map(|&(a, r)| Branch {
                    amplitude: DMatrix::from_element(1, 1, a),
                    rate: r,
                })
                .collect(),
        }
    }

    /// `ℂ - K̃(s)` with `K̃(s) = Σ A_i / (s + r_i)`.
    pub fn laplace_moduli(&self, s: f64) -> DMatrix<f64> {
        let mut m = self.elastic.clone();
        for b in &self.branches {
            m -= &b.amplitude / (s + b.rate);
        }
        m
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.elastic.nrows() != dim || self.elastic.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: self.elastic.nrows(),
            });
        }
        if Cholesky::new(self.elastic.clone()).is_none() {
            return Err(invalid("elastic", "moduli must be symmetric positive definite"));
        }
        for b in &self.branches {
            if b.amplitude.nrows() != dim || b.amplitude.ncols() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: b.amplitude.nrows(),
                });
            }
            if !(b.rate.is_finite() && b.rate > 0.0) {
                return Err(invalid("rate", format!("must be > 0, got {}", b.rate)));
            }
        }
        Ok(())
    }
}

fn to_dynamic(m: &nalgebra::Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
}

/// Material point with a sparse fluctuation strain map.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialPoint {
    pub weight: f64,
    pub dofs: Vec<usize>,
    /// `d × dofs.len()` block of `B̃_e`.
    pub local: DMatrix<f64>,
    pub material: usize,
}

impl MaterialPoint {
    /// Merges repeated dof indices, which periodic wrapping produces on
    /// coarse meshes.
    pub fn new(weight: f64, dofs: &[usize], local: DMatrix<f64>, material: usize) -> Self {
        let mut uniq: Vec<usize> = Vec::new();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for (c, &d) in dofs.iter().enumerate() {
            match uniq.iter().position(|&u| u == d) {
                Some(p) => cols[p] += local.column(c),
                None => {
                    uniq.push(d);
                    cols.push(local.column(c).into_owned());
                }
            }
        }
        let local = if cols.is_empty() {
            DMatrix::zeros(local.nrows(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Self {
            weight,
            dofs: uniq,
            local,
            material,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RveModel {
    pub dim: usize,
    pub n_dof: usize,
    pub materials: Vec<PointMaterial>,
    pub points: Vec<MaterialPoint>,
    /// Orthonormal columns spanning the constant fluctuation modes.
    pub gauge: DMatrix<f64>,
}

impl RveModel {
    pub fn new(
        dim: usize,
        n_dof: usize,
        materials: Vec<PointMaterial>,
        points: Vec<MaterialPoint>,
        gauge: DMatrix<f64>,
    ) -> Result<Self> {
        if materials.is_empty() || points.is_empty() {
            return Err(invalid("model", "needs materials and points"));
        }
        for m in &materials {
            m.validate(dim)?;
        }
        for p in &points {
            if !(p.weight.is_finite() && p.weight > 0.0) {
                return Err(invalid("weight", format!("must be > 0, got {}", p.weight)));
            }
            if p.material >= materials.len() {
                return Err(invalid("material", format!("index {} out of range", p.material)));
            }
            if p.local.nrows() != dim || p.local.ncols() != p.dofs.len() || p.dofs.iter().any(|&d| d >= n_dof) {
                return Err(Error::Dimension {
                    expected: dim,
                    found: p.local.nrows(),
                });
            }
        }
        if gauge.nrows() != n_dof {
            return Err(Error::Dimension {
                expected: n_dof,
                found: gauge.nrows(),
            });
        }
        Ok(Self {
            dim,
            n_dof,
            materials,
            points,
            gauge,
        })
    }

    pub fn volume(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// `Σ w_e B̃_eᵀ M_e B̃_e + ρ G Gᵀ` with `M_e` per material.
    fn fluctuation_stiffness(&self, moduli: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.n_dof, self.n_dof);
        for p in &self.points {
            let local = p.local.transpose() * &moduli[p.material] * &p.local * p.weight;
            for (a, &da) in p.dofs.iter().enumerate() {
                for (b, &db) in p.dofs.iter().enumerate() {
                    k[(da, db)] += local[(a, b)];
                }
            }
        }
        if self.gauge.ncols() > 0 {
            let rho = (0..self.n_dof).map(|i| k[(i, i)]).sum::<f64>() / self.n_dof as f64;
            let rho = if rho > 0.0 { rho } else { 1.0 };
            k += &self.gauge * self.gauge.transpose() * rho;
        }
        k
    }

    /// `(C (W Bᵀ M B)^{-1} Cᵀ)^{-1}` for `B_e = [B̃_e | I]`, `C = [0 | I]`.
    fn condensed(&self, moduli: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let n = self.n_dof;
        let vol = self.volume();
        let mut full = DMatrix::zeros(n + d, n + d);
        full.view_mut((0, 0), (n, n)).copy_from(&(self.fluctuation_stiffness(moduli) / vol));
        for p in &self.points {
            let m = &moduli[p.material] * (p.weight / vol);
            let coupling = p.local.transpose() * &m;
            for (a, &da) in p.dofs.iter().enumerate() {
                for c in 0..d {
                    full[(da, n + c)] += coupling[(a, c)];
                    full[(n + c, da)] += coupling[(a, c)];
                }
            }
            let mut block = full.view_mut((n, n), (d, d));
            block += m;
        }
        let chol = Cholesky::new(full).ok_or_else(|| Error::Singular("RVE stiffness is not positive definite".into()))?;
        let inverse = chol.inverse();
        let block = inverse.view((n, n), (d, d)).into_owned();
        let out = Cholesky::new(block)
            .ok_or_else(|| Error::Singular("condensed compliance is not positive definite".into()))?
            .inverse();
        Ok((&out + out.transpose()) * 0.5)
    }

    /// Stable hash of every number in the model.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let mut put = |x: f64| x.to_bits().hash(&mut h);
        put(self.dim as f64);
        put(self.n_dof as f64);
        for m in &self.materials {
            m.elastic.iter().for_each(|v| put(*v));
            for b in &m.branches {
                b.amplitude.iter().for_each(|v| put(*v));
                put(b.rate);
            }
        }
        for p in &self.points {
            put(p.weight);
            put(p.material as f64);
            p.dofs.iter().for_each(|d| put(*d as f64));
            p.local.iter().for_each(|v| put(*v));
        }
        self.gauge.iter().for_each(|v| put(*v));
        h.finish()
    }
}

pub fn effective_elastic(model: &RveModel) -> Result<DMatrix<f64>> {
    let moduli: Vec<DMatrix<f64>> = model.materials.iter().map(|m| m.elastic.clone()).collect();
    model.condensed(&moduli)
}

/// `K̄̃(s) = ℂ̄ - (C (W Bᵀ (ℂ - K̃(s)) B)^{-1} Cᵀ)^{-1}` for real `s > 0`.
pub fn effective_kernel_laplace(model: &RveModel, s: f64) -> Result<DMatrix<f64>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(invalid("s", format!("must be > 0, got {s}")));
    }
    let moduli: Vec<DMatrix<f64>> = model.materials.iter().map(|m| m.laplace_moduli(s)).collect();
    for m in &moduli {
        if Cholesky::new(m.clone()).is_none() {
            return Err(Error::Singular(format!("local moduli indefinite at s = {s}")));
        }
    }
    let relaxed = model.condensed(&moduli)?;
    Ok(effective_elastic(model)? - relaxed)
}

/// Series chain of layers with thicknesses `fractions` on a unit period.
pub fn build_laminate(materials: Vec<PointMaterial>, fractions: &[f64]) -> Result<RveModel> {
    if materials.is_empty() {
        return Err(invalid("materials", "need at least one layer"));
    }
    if materials.len() != fractions.len() {
        return Err(Error::Dimension {
            expected: materials.len(),
            found: fractions.len(),
        });
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(invalid("fractions", "must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(invalid("fractions", format!("must sum to 1, got {total}")));
    }
    let n = materials.len();
    let points = fractions
        .iter()
        .enumerate()
        .map(|(e, &f)| {
            let local = DMatrix::from_row_slice(1, 2, &[-1.0 / f, 1.0 / f]);
            MaterialPoint::new(f, &[e, (e + 1) % n], local, e)
        })
        .collect();
    let gauge = DMatrix::from_element(n, 1, 1.0 / (n as f64).sqrt());
    RveModel::new(1, n, materials, points, gauge)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub mean: f64,
    pub shape: f64,
}

/// Random Wiechert grains: viscosities `η` and times `τ` from Gamma laws,
/// branch moduli `μ = η/τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrainSampler {
    pub seed: u64,
    pub gamma_visc: GammaSpec,
    pub gamma_tau: GammaSpec,
    pub branches: usize,
    pub mu_inf: f64,
    pub kappa: f64,
}

impl Default for GrainSampler {
    fn default() -> Self {
        Self {
            seed: 0,
            gamma_visc: GammaSpec { mean: 2.0, shape: 2.0 },
            gamma_tau: GammaSpec { mean: 1.0, shape: 2.0 },
            branches: 3,
            mu_inf: 1.0,
            kappa: 5.0 / 3.0,
        }
    }
}

pub fn gamma_sample(mean: f64, shape: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !(mean.is_finite() && mean > 0.0 && shape.is_finite() && shape > 0.0) {
        return Err(invalid("gamma", format!("mean {mean} and shape {shape} must be > 0")));
    }
    let law = Gamma::new(shape, mean / shape).map_err(|e| invalid("gamma", e.to_string()))?;
    // Support is (0, ∞); an underflowed zero draw is redrawn.
    loop {
        let x = law.sample(rng);
        if x > 0.0 {
            return Ok(x);
        }
    }
}

/// Sampled `(η, τ)` of every grain branch, grain-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrainSample {
    pub kernels: Vec<PronyKernel>,
    pub eta: Vec<f64>,
    pub tau: Vec<f64>,
}

impl GrainSampler {
    pub fn sample(&self, grains: usize) -> Result<GrainSample> {
        if self.branches == 0 {
            return Err(invalid("branches", "need at least one Maxwell element"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = GrainSample {
            kernels: Vec::with_capacity(grains),
            eta: Vec::new(),
            tau: Vec::new(),
        };
        for _ in 0..grains {
            let mut branches = Vec::with_capacity(self.branches);
            for _ in 0..self.branches {
                let eta = gamma_sample(self.gamma_visc.mean, self.gamma_visc.shape, &mut rng)?;
                let tau = gamma_sample(self.gamma_tau.mean, self.gamma_tau.shape, &mut rng)?;
                out.eta.push(eta);
                out.tau.push(tau);
                branches.push(PronyBranch { mu: eta / tau, tau });
            }
            out.kernels.push(PronyKernel::new(self.mu_inf, branches)?);
        }
        Ok(out)
    }
}

const GAUSS: f64 = 0.577_350_269_189_625_8;

/// Periodic unit cube of trilinear hexahedra with one material per grain;
/// every Gauss point is a material point.
pub fn build_cube(
    grains_per_side: usize,
    elems_per_grain_side: usize,
    grain_materials: Vec<PointMaterial>,
) -> Result<RveModel> {
    if grains_per_side == 0 || elems_per_grain_side == 0 {
        return Err(invalid("mesh", "counts must be >= 1"));
    }
    let grains = grains_per_side.pow(3);
    if grain_materials.len() != grains {
        return Err(Error::Dimension {
            expected: grains,
            found: grain_materials.len(),
        });
    }
    let ne = grains_per_side * elems_per_grain_side;
    let h = 1.0 / ne as f64;
    let nodes = ne * ne * ne;
    let node = |i: usize, j: usize, k: usize| (i % ne) + ne * ((j % ne) + ne * (k % ne));
    let corners: Vec<[usize; 3]> = (0..8).map(|a| [a & 1, (a >> 1) & 1, (a >> 2) & 1]).collect();

    let mut points = Vec::with_capacity(8 * ne * ne * ne);
    for ez in 0..ne {
        for ey in 0..ne {
            for ex in 0..ne {
                let g = [ex, ey, ez].map(|c| c / elems_per_grain_side);
                let grain = g[0] + grains_per_side * (g[1] + grains_per_side * g[2]);
                let dofs: Vec<usize> = corners
                    .iter()
                    .flat_map(|c| {
                        let nd = node(ex + c[0], ey + c[1], ez + c[2]);
                        [3 * nd, 3 * nd + 1, 3 * nd + 2]
                    })
                    .collect();
                for gp in &corners {
                    let xi = gp.map(|c| (2.0 * c as f64 - 1.0) * GAUSS);
                    let mut local = DMatrix::zeros(6, 24);
                    for (a, c) in corners.iter().enumerate() {
                        let s = c.map(|v| 2.0 * v as f64 - 1.0);
                        let f = [0, 1, 2].map(|q| 1.0 + s[q] * xi[q]);
                        // dN/dx = (2/h) dN/dξ.
                        let grad = [
                            s[0] * f[1] * f[2] / (4.0 * h),
                            f[0] * s[1] * f[2] / (4.0 * h),
                            f[0] * f[1] * s[2] / (4.0 * h),
                        ];
                        let (ux, uy, uz) = (3 * a, 3 * a + 1, 3 * a + 2);
                        local[(0, ux)] = grad[0];
                        local[(1, uy)] = grad[1];
                        local[(2, uz)] = grad[2];
                        local[(3, uy)] = grad[2] / SQRT_2;
                        local[(3, uz)] = grad[1] / SQRT_2;
                        local[(4, uz)] = grad[0] / SQRT_2;
                        local[(4, ux)] = grad[2] / SQRT_2;
                        local[(5, ux)] = grad[1] / SQRT_2;
                        local[(5, uy)] = grad[0] / SQRT_2;
                    }
                    points.push(MaterialPoint::new(h * h * h / 8.0, &dofs, local, grain));
                }
            }
        }
    }
    let mut gauge = DMatrix::zeros(3 * nodes, 3);
    let c = 1.0 / (nodes as f64).sqrt();
    for nd in 0..nodes {
        for q in 0..3 {
            gauge[(3 * nd + q, q)] = c;
        }
    }
    RveModel::new(6, 3 * nodes, grain_materials, points, gauge)
}

/// Random polycrystal cube; also returns the sampled grain parameters.
pub fn build_grain_cube(
    grains_per_side: usize,
    elems_per_grain_side: usize,
    sampler: &GrainSampler,
) -> Result<(RveModel, GrainSample)> {
    let sample = sampler.sample(grains_per_side.pow(3))?;
    let materials = sample
        .kernels
        .iter()
        .map(|k| PointMaterial::isotropic_prony(sampler.kappa, k))
        .collect::<Result<_>>()?;
    Ok((build_cube(grains_per_side, elems_per_grain_side, materials)?, sample))
}

/// Histogram CSV of sampled `η` and `τ` next to the sampling densities.
pub fn histogram_table(sample: &GrainSample, sampler: &GrainSampler, bins: usize) -> Table {
    let mut table = Table::new(&["variable", "bin_lo", "bin_hi", "count", "density", "gamma_pdf"]);
    for (name, data, spec) in [
        ("eta", &sample.eta, sampler.gamma_visc),
        ("tau", &sample.tau, sampler.gamma_tau),
    ] {
        let hi = data.iter().copied().fold(0.0, f64::max);
        if data.is_empty() || hi <= 0.0 || bins == 0 {
            continue;
        }
        let width = hi / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in data.iter() {
            counts[((x / width) as usize).min(bins - 1)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let lo = i as f64 * width;
            let mid = lo + 0.5 * width;
            table.push(vec![
                name.into(),
                num(lo),
                num(lo + width),
                c.to_string(),
                num(c as f64 / (data.len() as f64 * width)),
                num(gamma_pdf(mid, spec)),
            ]);
        }
    }
    table
}

fn gamma_pdf(x: f64, spec: GammaSpec) -> f64 {
    let k = spec.shape;
    let theta = spec.mean / spec.shape;
    ((k - 1.0) * x.ln() - x / theta - statrs::function::gamma::ln_gamma(k) - k * theta.ln()).exp()
}

type Factor = Cholesky<f64, Dyn>;

/// Time integrator with the two constant stiffness matrices factored once:
/// the elastic one for the initial jump and the step one afterwards.
pub struct TimeStepper {
    model: RveModel,
    step: f64,
    coeffs: Vec<Vec<StepCoefficients>>,
    step_moduli: Vec<DMatrix<f64>>,
    elastic_factor: Factor,
    step_factor: Factor,
}

impl TimeStepper {
    pub fn new(model: RveModel, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("step", format!("must be > 0, got {step}")));
        }
        let coeffs: Vec<Vec<StepCoefficients>> = model
            .materials
            .iter()
            .map(|m| m.branches.iter().map(|b| StepCoefficients::new(b.rate, step)).collect())
            .collect();
        let step_moduli: Vec<DMatrix<f64>> = model
            .materials
            .iter()
            .zip(&coeffs)
            .map(|(m, c)| {
                let mut d = m.elastic.clone();
                for (b, k) in m.branches.iter().zip(c) {
                    d -= &b.amplitude * k.w1;
                }
                d
            })
            .collect();
        let elastic: Vec<DMatrix<f64>> = model.materials.iter().map(|m| m.elastic.clone()).collect();
        let factor = |moduli: &[DMatrix<f64>]| {
            Cholesky::new(model.fluctuation_stiffness(moduli))
                .ok_or_else(|| Error::Singular("fluctuation stiffness is not positive definite".into()))
        };
        let elastic_factor = factor(&elastic)?;
        let step_factor = factor(&step_moduli)?;
        Ok(Self {
            model,
            step,
            coeffs,
            step_moduli,
            elastic_factor,
            step_factor,
        })
    }

    pub fn model(&self) -> &RveModel {
        &self.model
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn solve(&self, factor: &Factor, moduli: &[DMatrix<f64>], macro_strain: &DVector<f64>, hist: &[DVector<f64>]) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.model.n_dof);
        for (p, h) in self.model.points.iter().zip(hist) {
            let r = p.local.tr_mul(&(&moduli[p.material] * macro_strain - h)) * p.weight;
            for (a, &d) in p.dofs.iter().enumerate() {
                rhs[d] -= r[a];
            }
        }
        factor.solve(&rhs)
    }

    /// Average stress for macroscopic strains `ē(t_i)`, zero before `t_0`.
    pub fn run(&self, macro_strain: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let d = self.model.dim;
        if macro_strain.iter().any(|e| e.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                found: macro_strain.iter().map(|e| e.len()).find(|&l| l != d).unwrap_or(0),
            });
        }
        let vol = self.model.volume();
        let points = &self.model.points;
        let zero = DVector::zeros(d);
        let mut strain: Vec<DVector<f64>> = vec![zero.clone(); points.len()];
        let mut state: Vec<Vec<DVector<f64>>> = points
            .iter()
            .map(|p| vec![zero.clone(); self.model.materials[p.material].branches.len()])
            .collect();
        let mut hist = vec![zero.clone(); points.len()];
        let elastic: Vec<DMatrix<f64>> = self.model.materials.iter().map(|m| m.elastic.clone()).collect();
        let mut out = Vec::with_capacity(macro_strain.len());

        for (i, ebar) in macro_strain.iter().enumerate() {
            let (factor, moduli) = if i == 0 {
                (&self.elastic_factor, &elastic)
            } else {
                for ((p, e), (s, h)) in points.iter().zip(&strain).zip(state.iter().zip(hist.iter_mut())) {
                    let mat = &self.model.materials[p.material];
                    h.fill(0.0);
                    for ((b, c), x) in mat.branches.iter().zip(&self.coeffs[p.material]).zip(s) {
                        *h += &b.amplitude * (x * c.decay + e * c.w0);
                    }
                }
                (&self.step_factor, &self.step_moduli)
            };
            let u = self.solve(factor, moduli, ebar, &hist);
            let mut total = DVector::zeros(d);
            for (((p, e), s), h) in points.iter().zip(strain.iter_mut()).zip(state.iter_mut()).zip(&hist) {
                let local_u = DVector::from_iterator(p.dofs.len(), p.dofs.iter().map(|&q| u[q]));
                let e_new = ebar + &p.local * local_u;
                let sigma = &moduli[p.material] * &e_new - h;
                if i > 0 {
                    for (x, c) in s.iter_mut().zip(&self.coeffs[p.material]) {
                        *x = &*x * c.decay + &*e * c.w0 + &e_new * c.w1;
                    }
                }
                total += sigma * p.weight;
                *e = e_new;
            }
            out.push(total / vol);
        }
        Ok(out)
    }
}

pub fn solve_time_domain(model: &RveModel, grid: &TimeGrid, macro_strain: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if macro_strain.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            found: macro_strain.len(),
        });
    }
    TimeStepper::new(model.clone(), grid.step())?.run(macro_strain)
}

/// Scalar channel of an RVE: `ε(t)` drives `ē = ε · load`, the response is
/// `readout · σ̄`.
pub struct RveOracle {
    stepper: TimeStepper,
    grid: TimeGrid,
    load: DVector<f64>,
    readout: DVector<f64>,
    calls: AtomicU64,
}

impl RveOracle {
    pub fn new(model: RveModel, grid: TimeGrid, load: DVector<f64>, readout: DVector<f64>) -> Result<Self> {
        if load.len() != model.dim || readout.len() != model.dim {
            return Err(Error::Dimension {
                expected: model.dim,
                found: load.len(),
            });
        }
        Ok(Self {
            stepper: TimeStepper::new(model, grid.step())?,
            grid,
            load,
            readout,
            calls: AtomicU64::new(0),
        })
    }

    /// Tensor shear `ε_xy` in, `σ_xy` out, all other strains held at zero.
    pub fn shear(model: RveModel, grid: TimeGrid) -> Result<Self> {
        let mut load = DVector::zeros(6);
        load[MANDEL_XY] = SQRT_2;
        let readout = &load / 2.0;
        Self::new(model, grid, load, readout)
    }

    /// First (only) strain component of a one-dimensional model.
    pub fn axial(model: RveModel, grid: TimeGrid) -> Result<Self> {
        let unit = DVector::from_element(1, 1.0);
        Self::new(model, grid, unit.clone(), unit)
    }

    pub fn model(&self) -> &RveModel {
        self.stepper.model()
    }

    /// `readout · ℂ̄ · load`, the channel's instantaneous modulus.
    pub fn channel_modulus(&self) -> Result<f64> {
        let c = effective_elastic(self.model())?;
        Ok(self.readout.dot(&(c * &self.load)))
    }
}

impl Oracle for RveOracle {
    fn id(&self) -> String {
        "rve".into()
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn evaluate(&self, program: &StrainProgram) -> Result<OracleResponse> {
        check_grid(&self.grid, program.grid())?;
        let macro_strain: Vec<DVector<f64>> = program.values().iter().map(|e| &self.load * *e).collect();
        let stress = self
            .stepper
            .run(&macro_strain)?
            .iter()
            .map(|s| self.readout.dot(s))
            .collect();
        let evaluations = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        Ok(OracleResponse {
            stress,
            oracle_id: self.id(),
            evaluations,
        })
    }

    fn evaluations(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub amplitude: Vec<Vec<f64>>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Isotropic { kappa: f64, prony: PronyKernel },
    Matrix { elastic: Vec<Vec<f64>>, branches: Vec<BranchSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub w: f64,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub material: usize,
}

/// Imported assembly: dense `B̃_e` rows per point, optional gauge columns
/// given as rows of length `n_dof`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dim: usize,
    pub n_dof: usize,
    pub materials: Vec<MaterialSpec>,
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub gauge: Vec<Vec<f64>>,
}

fn dense(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("expected a {nrows}x{ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn import_mesh(spec: &MeshSpec) -> Result<RveModel> {
    let d = spec.dim;
    let materials = spec
        .materials
        .iter()
        .map(|m| match m {
            MaterialSpec::Isotropic { kappa, prony } => {
                if d != 6 {
                    return Err(invalid("materials", "isotropic materials need dim = 6"));
                }
                PointMaterial::isotropic_prony(*kappa, prony)
            }
            MaterialSpec::Matrix { elastic, branches } => Ok(PointMaterial {
                elastic: dense(elastic, d, d)?,
                branches: branches
                    .iter()
                    .map(|b| {
                        Ok(Branch {
                            amplitude: dense(&b.amplitude, d, d)?,
                            rate: b.rate,
                        })
                    })
                    .collect::<Result<_>>()?,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let points = spec
        .points
        .iter()
        .map(|p| {
            let full = dense(&p.b, d, spec.n_dof)?;
            let dofs: Vec<usize> = (0..spec.n_dof).filter(|&j| full.column(j).iter().any(|v| *v != 0.0)).collect();
            let local = DMatrix::from_fn(d, dofs.len(), |i, j| full[(i, dofs[j])]);
            Ok(MaterialPoint::new(p.w, &dofs, local, p.material))
        })
        .collect::<Result<Vec<_>>>()?;
    let gauge = if spec.gauge.is_empty() {
        DMatrix::zeros(spec.n_dof, 0)
    } else {
        let g = dense(&spec.gauge, spec.gauge.len(), spec.n_dof)?.transpose();
        // Orthonormalise the supplied modes.
        let qr = g.qr();
        qr.q().columns(0, spec.gauge.len()).into_owned()
    };
    RveModel::new(d, spec.n_dof, materials, points, gauge)
}
