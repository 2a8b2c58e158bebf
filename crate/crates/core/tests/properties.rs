use histvar::hist::*;
use histvar::kernels::*;
use histvar::operator::*;
use histvar::oracle::*;
use histvar::reduce::*;
use histvar::rve::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn space(n: usize) -> HistorySpace {
    HistorySpace::exponential(1.0, n, 1.0).unwrap()
}

/// Smooth history `Σ c_k cos(k π τ) + d τ²`.
fn smooth(sp: &HistorySpace, coeffs: &[f64], d: f64) -> HistorySample {
    sp.grid().sample(|t| {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * (k as f64 * std::f64::consts::PI * t).cos())
            .sum::<f64>()
            + d * t * t
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 4)
}

fn sls() -> impl Strategy<Value = SlsParams> {
    (0.5..3.0f64, 0.0..2.0f64, 0.1..4.0f64, 0.2..2.0f64, 0.5..2.0f64).prop_map(|(c0, c1, l, l0, t)| {
        SlsParams::new(c0 + c1, c1, l, l0, t).unwrap()
    })
}

// hist

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_symmetric_and_positive(a in coeffs(), b in coeffs(), d in -1.0..1.0f64) {
        let sp = space(200);
        let f = smooth(&sp, &a, d);
        let g = smooth(&sp, &b, -d);
        let fg = inner_product(&f, &g, &sp).unwrap();
        let gf = inner_product(&g, &f, &sp).unwrap();
        prop_assert!((fg - gf).abs() <= 1e-14 * (1.0 + fg.abs()));
        if f.as_slice().iter().any(|v| *v != 0.0) {
            prop_assert!(inner_product(&f, &f, &sp).unwrap() > 0.0);
        }
    }

    #[test]
    fn unitary_map(a in coeffs(), b in coeffs(), l0 in 0.0..3.0f64) {
        let sp = HistorySpace::exponential(2.0, 300, l0).unwrap();
        let f = smooth(&sp, &a, 0.3);
        let g = smooth(&sp, &b, -0.2);
        let direct = inner_product(&f, &g, &sp).unwrap();
        let unweighted = HistorySpace::exponential(2.0, 300, 0.0).unwrap();
        let scale = |h: &HistorySample| {
            let v = h.as_slice().iter().enumerate().map(|(i, x)| x * (-0.5 * l0 * sp.grid().node(i)).exp()).collect();
            HistorySample::new(v)
        };
        let other = inner_product(&scale(&f), &scale(&g), &unweighted).unwrap();
        prop_assert!((direct - other).abs() <= 1e-10);
    }

    #[test]
    fn project_reconstruct_is_identity(q in prop::collection::vec(-2.0..2.0f64, 11)) {
        let b = BasisSpec::new(5, HistorySpace::exponential(1.0, 2000, 1.0).unwrap());
        let q = DVector::from_vec(q);
        let back = project(&reconstruct(&q, &b).unwrap(), &b).unwrap();
        prop_assert!((back - q).abs().max() <= 1e-8);
    }
}

// kernels

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_nonnegative_nonincreasing(
        mu_inf in 0.0..2.0f64,
        branches in prop::collection::vec((0.01..3.0f64, 0.05..5.0f64), 0..4),
    ) {
        let p = PronyKernel::new(mu_inf, branches.into_iter().map(|(mu, tau)| PronyBranch { mu, tau }).collect()).unwrap();
        let k = Kernel::Prony(p);
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let v = kernel_eval(&k, i as f64 * 0.025);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= prev);
            prev = v;
        }
    }
}

// operator

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn adjointness(a in coeffs(), b in coeffs(), d in -1.0..1.0f64, p in sls()) {
        let sp = HistorySpace::exponential(p.duration, 2000, p.lambda0).unwrap();
        let law = p.law();
        let f = smooth(&sp, &a, d);
        let g = smooth(&sp, &b, 1.0 - d);
        let lhs = inner_product(&apply_s(&law, &f, &sp).unwrap(), &g, &sp).unwrap();
        let rhs = inner_product(&f, &apply_s_adjoint(&law, &g, &sp).unwrap(), &sp).unwrap();
        prop_assert!((lhs - rhs).abs() <= 2e-7, "{} vs {}", lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_s_is_linear(a in coeffs(), b in coeffs(), x in -3.0..3.0f64, y in -3.0..3.0f64, p in sls()) {
        let sp = HistorySpace::exponential(p.duration, 300, p.lambda0).unwrap();
        let law = p.law();
        let f = smooth(&sp, &a, 0.0);
        let g = smooth(&sp, &b, 1.0);
        let combo = f.scaled(x).axpy(y, &g);
        let lhs = apply_s(&law, &combo, &sp).unwrap();
        let rhs = apply_s(&law, &f, &sp).unwrap().scaled(x).axpy(y, &apply_s(&law, &g, &sp).unwrap());
        for (u, v) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn spectrum_ordered_with_small_residuals(p in sls()) {
        prop_assume!(p.k() > 0.0);
        let spec = sls_spectrum(&p, 12).unwrap();
        for w in spec.s.windows(2) {
            prop_assert!(w[0] > w[1] && w[1] > 0.0);
        }
        for w in spec.kappa.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        let (a, t) = (p.alpha(), p.duration);
        for n in 1..=12 {
            let k = spec.kappa[n - 1];
            if n == 1 && spec.hyperbolic_lead {
                let r = (a * (k * t).sinh() + k * (k * t).cosh()) / (a * a + k * k).sqrt() / (k * t).cosh();
                prop_assert!(r.abs() <= 1e-12);
                continue;
            }
            let r = (a * (k * t).sin() + k * (k * t).cos()) / (a * a + k * k).sqrt();
            prop_assert!(r.abs() <= 1e-12, "n={} r={}", n, r);
            // The tangent form is only as good as one ulp of κ near its poles.
            let ulp_shift = (1.0 + (k / a).powi(2)) * t * k * f64::EPSILON;
            if ulp_shift < 1e-11 {
                prop_assert!(spec.residual(n).abs() <= 1e-10, "n={} r={}", n, spec.residual(n));
            }
        }
    }

    #[test]
    fn left_singular_functions_orthogonal(p in sls()) {
        prop_assume!(p.k() > 0.0);
        let spec = sls_spectrum(&p, 6).unwrap();
        let sp = HistorySpace::exponential(p.duration, 2000, p.lambda0).unwrap();
        let psi: Vec<HistorySample> = (1..=6)
            .map(|n| sp.grid().sample(|t| spec.eigenfunctions(n, t).unwrap().1))
            .collect();
        for i in 0..6 {
            for j in 0..i {
                let ip = inner_product(&psi[i], &psi[j], &sp).unwrap();
                prop_assert!(ip.abs() <= 1e-7, "({}, {}) {}", i, j, ip);
            }
        }
    }
}

// oracle

fn pulse(grid: TimeGrid, start: f64, width: f64) -> StrainProgram {
    StrainProgram::from_fn(grid, move |t| {
        let x = (t - start) / width;
        if (0.0..=1.0).contains(&x) { (std::f64::consts::PI * x).sin().powi(2) } else { 0.0 }
    })
}

fn prony() -> impl Strategy<Value = PronyKernel> {
    (0.1..2.0f64, prop::collection::vec((0.05..2.0f64, 0.05..3.0f64), 1..4)).prop_map(|(mu_inf, b)| {
        PronyKernel::new(mu_inf, b.into_iter().map(|(mu, tau)| PronyBranch { mu, tau }).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_linear(k in prony(), a in coeffs(), b in coeffs(), x in -2.0..2.0f64) {
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let o = make_prony_oracle(&k, grid).unwrap();
        let sp = HistorySpace::exponential(2.0, 200, 1.0).unwrap();
        let e1 = StrainProgram::new(grid, smooth(&sp, &a, 0.0).as_slice().to_vec()).unwrap();
        let e2 = StrainProgram::new(grid, smooth(&sp, &b, 0.5).as_slice().to_vec()).unwrap();
        let sum = o.evaluate(&e1.scaled(x).add(&e2).unwrap()).unwrap().stress;
        let s1 = o.evaluate(&e1).unwrap().stress;
        let s2 = o.evaluate(&e2).unwrap().stress;
        for i in 0..sum.len() {
            prop_assert!((sum[i] - x * s1[i] - s2[i]).abs() <= 1e-11 * (1.0 + sum[i].abs()));
        }
    }

    #[test]
    fn oracle_causal(k in prony(), cut in 1usize..199, a in coeffs()) {
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let o = make_prony_oracle(&k, grid).unwrap();
        let base = StrainProgram::from_fn(grid, |t| (3.0 * t).sin());
        let mut changed = base.values().to_vec();
        for (i, v) in changed.iter_mut().enumerate().skip(cut + 1) {
            *v += a[i % 4];
        }
        let r1 = o.evaluate(&base).unwrap().stress;
        let r2 = o.evaluate(&StrainProgram::new(grid, changed).unwrap()).unwrap().stress;
        prop_assert_eq!(&r1[..=cut], &r2[..=cut]);
    }

    #[test]
    fn oracle_shift_covariant(k in prony(), shift in 1usize..80) {
        let grid = TimeGrid::new(2.0, 200).unwrap();
        let h = grid.step();
        let o = make_prony_oracle(&k, grid).unwrap();
        let r0 = o.evaluate(&pulse(grid, 0.0, 0.8)).unwrap().stress;
        let r1 = o.evaluate(&pulse(grid, shift as f64 * h, 0.8)).unwrap().stress;
        for i in 0..=200 - shift {
            prop_assert!((r1[i + shift] - r0[i]).abs() <= 1e-10);
        }
        for v in &r1[..shift] {
            prop_assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_dissipates(k in prony(), a in coeffs()) {
        let grid = TimeGrid::new(2.0, 400).unwrap();
        let o = make_prony_oracle(&k, grid).unwrap();
        // Closed cycle: vanishes at both ends.
        let e = StrainProgram::from_fn(grid, |t| {
            let s = (std::f64::consts::PI * t / 2.0).sin();
            s * (a[0] + a[1] * t + a[2] * (5.0 * t).cos() + a[3] * t * t)
        });
        let sig = o.evaluate(&e).unwrap().stress;
        let v = e.values();
        let work: f64 = (0..400).map(|i| 0.5 * (sig[i] + sig[i + 1]) * (v[i + 1] - v[i])).sum();
        prop_assert!(work >= -1e-10, "{}", work);
    }

    #[test]
    fn piecewise_linear_refinement_changes_nothing(k in prony(), knots in prop::collection::vec(-1.0..1.0f64, 11)) {
        let coarse = TimeGrid::new(2.0, 10).unwrap();
        let fine = TimeGrid::new(2.0, 80).unwrap();
        let interp = |t: f64| {
            let x = t / 0.2;
            let i = (x.floor() as usize).min(9);
            let r = x - i as f64;
            knots[i] * (1.0 - r) + knots[i + 1] * r
        };
        let a = make_prony_oracle(&k, coarse).unwrap().evaluate(&StrainProgram::new(coarse, knots.clone()).unwrap()).unwrap().stress;
        let b = make_prony_oracle(&k, fine).unwrap().evaluate(&StrainProgram::from_fn(fine, interp)).unwrap().stress;
        for i in 0..=10 {
            prop_assert!((a[i] - b[8 * i]).abs() <= 1e-12 * (1.0 + a[i].abs()));
        }
    }
}

// reduce

fn operator_of(matrix: DMatrix<f64>) -> OperatorMatrix {
    let m = (matrix.nrows() - 1) / 2;
    let b = BasisSpec::new(m, HistorySpace::exponential(1.0, 4, 1.0).unwrap());
    OperatorMatrix {
        trace: DVector::zeros(matrix.nrows()),
        matrix,
        meta: BasisMeta::of(&b),
        c_eff: 1.0,
        provenance: "random".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn eckart_young_on_random_matrices(entries in prop::collection::vec(-1.0..1.0f64, 41 * 41)) {
        let s = operator_of(DMatrix::from_vec(41, 41, entries));
        let sv = s.singular_values().unwrap();
        for n in [1usize, 2, 5, 10, 20, 40] {
            let rm = svd_truncate(&s, n).unwrap();
            let err = spectral_norm(&(&s.matrix - rm.matrix())).unwrap();
            prop_assert!((err - sv[n]).abs() <= 1e-10, "N={} {} vs {}", n, err, sv[n]);
        }
    }

    #[test]
    fn reduced_model_invariants(entries in prop::collection::vec(-1.0..1.0f64, 15 * 15), n in 1usize..=15) {
        let s = operator_of(DMatrix::from_vec(15, 15, entries));
        for rm in [svd_truncate(&s, n).unwrap(), fourier_truncate(&s, n).unwrap()] {
            let gram = rm.phi.transpose() * &rm.phi;
            prop_assert!((gram - DMatrix::identity(n, n)).abs().max() <= 1e-10);
            for k in 0..n {
                prop_assert!((rm.psi.column(k).norm() - rm.s[k]).abs() <= 1e-10);
            }
            if rm.kind == ModelKind::Optimal {
                let pg = rm.psi.transpose() * &rm.psi;
                for i in 0..n {
                    for j in 0..i {
                        prop_assert!(pg[(i, j)].abs() <= 1e-10);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn optimal_dominates_fourier(p in sls(), n in 1usize..=9) {
        let b = BasisSpec::new(4, HistorySpace::exponential(p.duration, 400, p.lambda0).unwrap());
        let s = assemble_closed_form(&p, &b).unwrap();
        let opt = spectral_norm(&(&s.matrix - svd_truncate(&s, n).unwrap().matrix())).unwrap();
        let four = spectral_norm(&(&s.matrix - fourier_truncate(&s, n).unwrap().matrix())).unwrap();
        prop_assert!(opt <= four + 1e-12);
    }

    #[test]
    fn nested_widths_grow(p in sls()) {
        let mut prev: Option<DVector<f64>> = None;
        for m in [2usize, 5, 10, 15] {
            let b = BasisSpec::new(m, HistorySpace::exponential(p.duration, 2000, p.lambda0).unwrap());
            let sv = assemble_closed_form(&p, &b).unwrap().singular_values().unwrap();
            if let Some(prev) = &prev {
                for k in 0..prev.len().min(6) {
                    prop_assert!(sv[k] >= prev[k] - 1e-12, "m={} k={} {} < {}", m, k, sv[k], prev[k]);
                }
            }
            prev = Some(sv);
        }
    }
}

/// `‖S - S_M‖` by power iteration on the discretized operator.
fn truncation_gap(law: &HereditaryLaw, b: &BasisSpec, s_m: &DMatrix<f64>) -> f64 {
    let sp = b.space();
    let forward = |f: &HistorySample| {
        let sf = apply_s(law, f, sp).unwrap();
        let proj = reconstruct(&(s_m * project(f, b).unwrap()), b).unwrap();
        sf.axpy(-1.0, &proj)
    };
    let backward = |g: &HistorySample| {
        let sg = apply_s_adjoint(law, g, sp).unwrap();
        let proj = reconstruct(&(s_m.transpose() * project(g, b).unwrap()), b).unwrap();
        sg.axpy(-1.0, &proj)
    };
    let mut f = sp.grid().sample(|t| 1.0 + t + (7.0 * t).sin());
    let mut est = 0.0;
    for _ in 0..60 {
        let nf = sp.norm(f.as_slice()).unwrap();
        f = f.scaled(1.0 / nf);
        let g = backward(&forward(&f));
        est = sp.norm(g.as_slice()).unwrap().sqrt();
        f = g;
    }
    est
}

#[test]
fn duality_bound_on_sls() {
    let p = SlsParams::new(2.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let exact = sls_spectrum(&p, 12).unwrap();
    for m in [2usize, 4, 6] {
        let b = BasisSpec::new(m, HistorySpace::exponential(1.0, 4000, 1.0).unwrap());
        let s = assemble_quadrature(&p.law(), &b).unwrap();
        let sv = s.singular_values().unwrap();
        let gap = truncation_gap(&p.law(), &b, &s.matrix);
        assert!(gap > 0.0 && gap < exact.s[0]);
        for n in 0..(2 * m).min(11) {
            assert!(sv[n + 1] <= exact.s[n + 1] + gap, "m={m} N={}", n + 1);
        }
    }
}

// rve

#[test]
fn hill_mandel_energy_consistency() {
    let (model, _) = build_grain_cube(2, 1, &GrainSampler { seed: 3, ..GrainSampler::default() }).unwrap();
    let c = effective_elastic(&model).unwrap();
    let eps = DVector::from_vec(vec![0.1, -0.3, 0.2, 0.4, -0.1, 0.25]);
    // Fluctuation solve assembled here, independent of the library's condensation.
    let n = model.n_dof;
    let mut k = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for p in &model.points {
        let m = &model.materials[p.material].elastic;
        let kl = p.local.transpose() * m * &p.local * p.weight;
        let fl = p.local.transpose() * m * &eps * p.weight;
        for (a, &da) in p.dofs.iter().enumerate() {
            rhs[da] -= fl[a];
            for (bb, &db) in p.dofs.iter().enumerate() {
                k[(da, db)] += kl[(a, bb)];
            }
        }
    }
    k += &model.gauge * model.gauge.transpose();
    let u = k.lu().solve(&rhs).unwrap();
    let vol = model.volume();
    let mut energy = 0.0;
    let mut mean_stress = DVector::zeros(6);
    for p in &model.points {
        let local_u = DVector::from_iterator(p.dofs.len(), p.dofs.iter().map(|&d| u[d]));
        let strain = &eps + &p.local * local_u;
        let stress = &model.materials[p.material].elastic * &strain;
        energy += p.weight * stress.dot(&strain) / vol;
        mean_stress += stress * (p.weight / vol);
    }
    assert!((&mean_stress - &c * &eps).abs().max() < 1e-10);
    assert!((energy - mean_stress.dot(&eps)).abs() < 1e-10);
}

#[test]
fn effective_kernel_decreases_in_s() {
    let (model, _) = build_grain_cube(2, 1, &GrainSampler { seed: 8, ..GrainSampler::default() }).unwrap();
    let mut prev: Option<DVector<f64>> = None;
    for s in [0.05, 0.2, 0.5, 1.0, 3.0, 10.0] {
        let k = effective_kernel_laplace(&model, s).unwrap();
        let eig = nalgebra::SymmetricEigen::new(k).eigenvalues;
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let v = DVector::from_vec(v);
        if let Some(p) = &prev {
            for i in 0..6 {
                assert!(v[i] <= p[i] + 1e-12, "s={s}");
            }
        }
        prev = Some(v);
    }
}
