use histvar::hist::TimeGrid;
use histvar::kernels::{PronyBranch, PronyKernel};
use histvar::oracle::{make_prony_oracle, Oracle, StrainProgram};
use histvar::rve::{
    build_cube, build_grain_cube, build_laminate, effective_elastic, effective_kernel_laplace, solve_time_domain,
    GrainSampler, PointMaterial, RveOracle,
};
use nalgebra::DVector;

fn grain_kernel() -> PronyKernel {
    PronyKernel::new(
        1.0,
        vec![PronyBranch { mu: 1.2, tau: 0.8 }, PronyBranch { mu: 0.5, tau: 2.5 }],
    )
    .unwrap()
}

#[test]
fn homogeneous_cube_is_the_scalar_prony_law() {
    let k = grain_kernel();
    let mat = PointMaterial::isotropic_prony(5.0 / 3.0, &k).unwrap();
    let model = build_cube(2, 1, vec![mat; 8]).unwrap();
    let grid = TimeGrid::new(5.0, 200).unwrap();
    let rve = RveOracle::shear(model, grid).unwrap();
    let scalar = make_prony_oracle(&k.scaled(2.0), grid).unwrap();
    let program = StrainProgram::from_fn(grid, |t| 0.16 * t * (5.0 - t) + (2.0 * t).sin());
    let a = rve.evaluate(&program).unwrap().stress;
    let b = scalar.evaluate(&program).unwrap().stress;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn elastic_cube_matches_condensed_moduli() {
    let sampler = GrainSampler {
        seed: 5,
        branches: 1,
        ..GrainSampler::default()
    };
    let (model, sample) = build_grain_cube(2, 1, &sampler).unwrap();
    // Same shear moduli, branches removed.
    let materials = sample
        .kernels
        .iter()
        .map(|k| PointMaterial::isotropic_prony(5.0 / 3.0, &PronyKernel::new(k.instantaneous(), vec![]).unwrap()).unwrap())
        .collect();
    let elastic = build_cube(2, 1, materials).unwrap();
    let c = effective_elastic(&elastic).unwrap();
    let grid = TimeGrid::new(1.0, 20).unwrap();
    let macro_strain: Vec<DVector<f64>> = grid
        .nodes()
        .iter()
        .map(|t| DVector::from_vec(vec![0.1 * t, -0.2, 0.05, t * t, 0.3, -t]))
        .collect();
    let out = solve_time_domain(&elastic, &grid, &macro_strain).unwrap();
    for (e, s) in macro_strain.iter().zip(&out) {
        assert!((&c * e - s).abs().max() < 1e-9);
    }
    assert!(model.points.len() == 64);
}

#[test]
fn voigt_bound_and_symmetry() {
    let (model, _) = build_grain_cube(2, 1, &GrainSampler { seed: 9, ..GrainSampler::default() }).unwrap();
    let c = effective_elastic(&model).unwrap();
    assert!((&c - c.transpose()).abs().max() < 1e-12);
    let vol = model.volume();
    let mut voigt = nalgebra::DMatrix::zeros(6, 6);
    for p in &model.points {
        voigt += &model.materials[p.material].elastic * (p.weight / vol);
    }
    let gap = nalgebra::SymmetricEigen::new(voigt - &c).eigenvalues;
    assert!(gap.iter().all(|v| *v > -1e-10));
    // The heterogeneous cube is softer than Voigt in shear.
    assert!(gap.max() > 1e-6);
}

#[test]
fn step_response_starts_at_the_instantaneous_modulus() {
    let (model, _) = build_grain_cube(2, 1, &GrainSampler { seed: 2, ..GrainSampler::default() }).unwrap();
    let grid = TimeGrid::new(5.0, 50).unwrap();
    let rve = RveOracle::shear(model, grid).unwrap();
    let c = rve.channel_modulus().unwrap();
    let r = rve.evaluate(&StrainProgram::unit_step(grid)).unwrap().stress;
    assert!((r[0] - c).abs() <= 1e-6 * c);
    assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn laminate_laplace_cross_check() {
    let layers = vec![
        PointMaterial::scalar(3.0, &[(1.0, 2.0)]),
        PointMaterial::scalar(2.0, &[(0.5, 0.3)]),
    ];
    let model = build_laminate(layers, &[0.5, 0.5]).unwrap();
    let c_bar = effective_elastic(&model).unwrap()[(0, 0)];
    // Slowest relaxation time is O(1/0.3); integrate to well past it.
    let horizon = 120.0;
    let grid = TimeGrid::new(horizon, 24000).unwrap();
    let rve = RveOracle::axial(model.clone(), grid).unwrap();
    let sigma = rve.evaluate(&StrainProgram::unit_step(grid)).unwrap().stress;
    let h = grid.step();
    for s in [0.5, 1.0, 2.0] {
        // Trapezoid Laplace transform of the relaxation curve.
        let mut lap = 0.0;
        for (i, v) in sigma.iter().enumerate() {
            let w = if i == 0 || i == sigma.len() - 1 { 0.5 } else { 1.0 };
            lap += w * h * v * (-s * grid.node(i)).exp();
        }
        let expected = c_bar - effective_kernel_laplace(&model, s).unwrap()[(0, 0)];
        assert!((s * lap - expected).abs() < 1e-2 * expected, "s={s}");
    }
}

#[test]
fn halving_the_step_converges() {
    let (model, _) = build_grain_cube(2, 1, &GrainSampler { seed: 4, ..GrainSampler::default() }).unwrap();
    let f = |t: f64| if t < 2.5 { t } else { 5.0 - t };
    let coarse = TimeGrid::new(5.0, 100).unwrap();
    let fine = TimeGrid::new(5.0, 200).unwrap();
    let a = RveOracle::shear(model.clone(), coarse).unwrap().evaluate(&StrainProgram::from_fn(coarse, f)).unwrap();
    let b = RveOracle::shear(model.clone(), fine).unwrap().evaluate(&StrainProgram::from_fn(fine, f)).unwrap();
    let finer = TimeGrid::new(5.0, 400).unwrap();
    let c = RveOracle::shear(model, finer).unwrap().evaluate(&StrainProgram::from_fn(finer, f)).unwrap();
    let d1 = (a.stress[100] - b.stress[200]).abs();
    let d2 = (b.stress[200] - c.stress[400]).abs();
    // Second order: each halving cuts the change by about four.
    assert!(d2 < 0.35 * d1, "{d1} {d2}");
    assert!(d2 < 1e-4);
}
