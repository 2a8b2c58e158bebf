//! The four subcommands.

use crate::config::{resolve, Channel, MaterialConfig, RunConfig, RveConfig};
use crate::output::{write_atomic, CliError, CliResult, OutputDir};
use histvar::hist::{BasisSpec, HistorySpace, TimeGrid, WeightFn};
use histvar::kernels::PronyKernel;
use histvar::operator::{sls_spectrum, step_exact, step_strain, SlsParams, SlsSpectrum};
use histvar::oracle::{make_elastic_oracle, make_prony_oracle, make_sls_oracle, sample_basis_responses, Oracle, StrainProgram};
use histvar::reduce::{
    apply_reduced, assemble_closed_form, assemble_from_oracle, assemble_from_responses, error_report, fourier_truncate,
    model_from_json, model_to_json, predict_stress, spectral_norm, spectrum_table, svd_truncate, BasisMeta, ModelKind,
    OperatorMatrix, ReducedModel,
};
use histvar::rve::{
    build_cube, build_grain_cube, effective_elastic, histogram_table, import_mesh, GrainSample, GrainSampler, MeshSpec,
    PointMaterial, RveModel, RveOracle,
};
use histvar::table::{num, Table};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Identify,
    Predict,
    Rve,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Identify => "identify",
            Command::Predict => "predict",
            Command::Rve => "rve",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub paper_scale: bool,
    pub seed: Option<u64>,
}

fn config_error(errors: &[crate::config::FieldError]) -> CliError {
    CliError::Config(errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))
}

/// Reads, overrides and validates the configuration.
pub fn load(opts: &Options) -> CliResult<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", opts.config.display())))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| config_error(&e))?;
    let base = opts
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    if opts.paper_scale {
        match &mut cfg.material {
            MaterialConfig::Rve(r) => {
                r.grains_per_side = 4;
                r.elems_per_grain_side = 2;
                cfg.basis.m = 20;
                cfg.space.duration = 5.0;
            }
            _ => return Err(CliError::Config("--paper-scale: needs material.oracle = \"rve\"".into())),
        }
    }
    let errors = cfg.validate(&base);
    if !errors.is_empty() {
        return Err(config_error(&errors));
    }
    Ok((cfg, base))
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    eprintln!("[histvar] {label}: {:.3?}", start.elapsed());
    out
}

struct RveBuild {
    model: RveModel,
    sample: Option<GrainSample>,
    sampler: GrainSampler,
    config: RveConfig,
}

struct Setup {
    cfg: RunConfig,
    space: HistorySpace,
    oracle: Box<dyn Oracle>,
    sls: Option<SlsParams>,
    rve: Option<RveBuild>,
}

impl Setup {
    fn new(cfg: RunConfig, base: &Path) -> CliResult<Self> {
        let grid = TimeGrid::new(cfg.space.duration, cfg.space.n)?;
        let space = HistorySpace::new(grid, WeightFn::exponential(cfg.space.lambda0)?, cfg.space.quadrature);
        let mut sls = None;
        let mut rve = None;
        let oracle: Box<dyn Oracle> = match &cfg.material {
            MaterialConfig::Sls { c0, c1, lambda } => {
                let p = SlsParams::new(*c0, *c1, *lambda, cfg.space.lambda0, cfg.space.duration)?;
                sls = Some(p);
                Box::new(make_sls_oracle(&p, grid))
            }
            MaterialConfig::Prony { mu_inf, branches } => {
                Box::new(make_prony_oracle(&PronyKernel::new(*mu_inf, branches.clone())?, grid)?)
            }
            MaterialConfig::Elastic { modulus } => Box::new(make_elastic_oracle(*modulus, grid)?),
            MaterialConfig::Rve(r) => {
                let build = timed("rve model", || build_rve(r, cfg.seed, base))?;
                let model = build.model.clone();
                let oracle = match r.channel {
                    Channel::Shear => RveOracle::shear(model, grid)?,
                    Channel::Axial => RveOracle::axial(model, grid)?,
                };
                rve = Some(build);
                Box::new(oracle)
            }
        };
        Ok(Self {
            cfg,
            space,
            oracle,
            sls,
            rve,
        })
    }

    fn basis(&self, m: usize) -> BasisSpec {
        BasisSpec::new(m, self.space.clone())
    }

    fn assemble(&self, b: &BasisSpec) -> CliResult<OperatorMatrix> {
        let label = format!("assemble M = {}", b.size());
        Ok(timed(&label, || match (&self.sls, self.cfg.reduction.closed_form) {
            (Some(p), true) => assemble_closed_form(p, b),
            _ => assemble_from_oracle(self.oracle.as_ref(), b),
        })?)
    }

    fn exact_spectrum(&self, n_max: usize) -> CliResult<Option<SlsSpectrum>> {
        match &self.sls {
            Some(p) if p.k() > 0.0 => Ok(Some(sls_spectrum(p, n_max)?)),
            _ => Ok(None),
        }
    }

    fn n_list(&self, size: usize) -> Vec<usize> {
        if self.cfg.reduction.n_list.is_empty() {
            vec![size]
        } else {
            self.cfg.reduction.n_list.clone()
        }
    }
}

fn build_rve(r: &RveConfig, seed: u64, base: &Path) -> CliResult<RveBuild> {
    let sampler = GrainSampler {
        seed,
        gamma_visc: r.gamma_visc,
        gamma_tau: r.gamma_tau,
        branches: r.branches,
        mu_inf: r.mu_inf,
        kappa: r.kappa,
    };
    if let Some(mesh) = &r.mesh {
        let path = resolve(base, mesh);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("material.mesh: cannot read {}: {e}", path.display())))?;
        let spec: MeshSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("material.mesh: {e}")))?;
        return Ok(RveBuild {
            model: import_mesh(&spec)?,
            sample: None,
            sampler,
            config: r.clone(),
        });
    }
    if let Some(h) = &r.homogeneous {
        let kernel = PronyKernel::new(h.mu_inf, h.branches.clone())?;
        let mat = PointMaterial::isotropic_prony(r.kappa, &kernel)?;
        let model = build_cube(r.grains_per_side, r.elems_per_grain_side, vec![mat; r.grains_per_side.pow(3)])?;
        return Ok(RveBuild {
            model,
            sample: None,
            sampler,
            config: r.clone(),
        });
    }
    let (model, sample) = build_grain_cube(r.grains_per_side, r.elems_per_grain_side, &sampler)?;
    Ok(RveBuild {
        model,
        sample: Some(sample),
        sampler,
        config: r.clone(),
    })
}

fn meta_json(meta: &BasisMeta) -> Value {
    json!({"T": meta.duration, "lambda0": meta.lambda0, "m": meta.m, "M": meta.size(), "n": meta.n})
}

fn report(cmd: Command, cfg: &RunConfig, out: &OutputDir, summary: Value) -> Value {
    json!({
        "tool": "histvar",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "config": cfg,
        "outputs": out.written(),
        "summary": summary,
    })
}

pub fn run(cmd: Command, opts: &Options) -> CliResult<()> {
    let (cfg, base) = load(opts)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let setup = Setup::new(cfg, &base)?;
    let summary = match cmd {
        Command::Spectrum => cmd_spectrum(&setup, &mut out)?,
        Command::Identify => cmd_identify(&setup, &mut out, opts.model.as_deref())?,
        Command::Predict => cmd_predict(&setup, &mut out, opts.model.as_deref())?,
        Command::Rve => cmd_rve(&setup, &mut out)?,
    };
    let text = serde_json::to_string_pretty(&report(cmd, &setup.cfg, &out, summary))
        .map_err(|e| CliError::Other(e.to_string()))?;
    out.write("report.json", &(text + "\n"))
}

fn cmd_spectrum(setup: &Setup, out: &mut OutputDir) -> CliResult<Value> {
    let sizes = match &setup.cfg.sweep {
        Some(s) => s.m_list.clone(),
        None => vec![setup.cfg.size()],
    };
    let largest = sizes.iter().copied().max().unwrap_or(1);
    let exact = setup.exact_spectrum(largest)?;
    let mut header = vec!["M", "k", "s_Mk"];
    if exact.is_some() {
        header.push("s_k");
    }
    let mut table = Table::new(&header);
    let mut leading = Vec::new();
    for &size in &sizes {
        let s = setup.assemble(&setup.basis((size - 1) / 2))?;
        let sv = s.singular_values()?;
        for (k, v) in sv.iter().enumerate() {
            let mut row = vec![size.to_string(), (k + 1).to_string(), num(*v)];
            if let Some(e) = &exact {
                row.push(num(e.s[k]));
            }
            table.push(row);
        }
        leading.push(json!({"M": size, "s_M1": sv[0]}));
    }
    out.write("spectrum.csv", &table.to_csv())?;
    if let Some(e) = &exact {
        out.write("sls_spectrum.csv", &e.to_table().to_csv())?;
    }
    Ok(json!({"sizes": sizes, "leading": leading, "analytic": exact.is_some()}))
}

/// Models for every requested rank, written next to a spectrum table.
fn identification(
    setup: &Setup,
    out: &mut OutputDir,
    s: &OperatorMatrix,
    ranks: &[usize],
    suffix: &str,
) -> CliResult<(Vec<ReducedModel>, Value)> {
    let size = s.size();
    let sv = s.singular_values()?;
    let svs: Vec<f64> = sv.iter().copied().collect();
    out.write(&format!("spectrum{suffix}.csv"), &spectrum_table(&svs).to_csv())?;
    let exact = setup.exact_spectrum(size + 1)?;
    let mut models = Vec::new();
    let mut rows = Vec::new();
    let mut table = Table::new(&["N", "kind", "residual_2", "s_M_next"]);
    for &n in ranks {
        let mut kinds = vec![svd_truncate(s, n)?];
        if setup.cfg.reduction.fourier_baseline {
            kinds.push(fourier_truncate(s, n)?);
        }
        for rm in kinds {
            let (tag, file) = match rm.kind {
                ModelKind::Optimal => ("optimal", format!("model_N{n}.json")),
                ModelKind::Fourier => ("fourier", format!("fourier_N{n}.json")),
            };
            out.write(&file, &model_to_json(&rm)?)?;
            let residual = spectral_norm(&(&s.matrix - rm.matrix()))?;
            let rep = error_report(&svs, size, n, s.meta.duration, exact.as_ref().map(|e| e.s.as_slice()), None);
            if n == size {
                eprintln!("[histvar] N = M = {size}: residual {residual:.3e}");
            }
            table.push(vec![n.to_string(), tag.into(), num(residual), num(rep.rank_error)]);
            rows.push(json!({
                "N": n,
                "kind": tag,
                "file": file,
                "residual": residual,
                "rank_error": rep.rank_error,
                "exact_rank_error": rep.exact_rank_error,
                "sampling_error": rep.sampling_label(),
                "gibbs_width": rep.gibbs_width,
            }));
            models.push(rm);
        }
    }
    out.write(&format!("identify{suffix}.csv"), &table.to_csv())?;
    let summary = json!({
        "basis": meta_json(&s.meta),
        "C_eff": s.c_eff,
        "provenance": s.provenance,
        "models": rows,
    });
    Ok((models, summary))
}

/// All requested models: one basis of size `2m + 1`, or one basis per rank.
fn identify_all(setup: &Setup, out: &mut OutputDir) -> CliResult<(Vec<ReducedModel>, Value)> {
    if !setup.cfg.reduction.paired_basis {
        let s = setup.assemble(&setup.basis(setup.cfg.basis.m))?;
        let ranks = setup.n_list(s.size());
        return identification(setup, out, &s, &ranks, "");
    }
    let mut models = Vec::new();
    let mut runs = Vec::new();
    for n in setup.n_list(setup.cfg.size()) {
        let s = setup.assemble(&setup.basis(n))?;
        let (mut m, summary) = identification(setup, out, &s, &[n], &format!("_M{}", s.size()))?;
        models.append(&mut m);
        runs.push(summary);
    }
    Ok((models, json!({"paired": runs})))
}

fn cmd_identify(setup: &Setup, out: &mut OutputDir, model_path: Option<&Path>) -> CliResult<Value> {
    let (models, summary) = identify_all(setup, out)?;
    if let (Some(path), Some(rm)) = (model_path, models.iter().rev().find(|m| m.kind == ModelKind::Optimal)) {
        write_atomic(path, &model_to_json(rm)?)?;
    }
    Ok(summary)
}

fn kind_tag(rm: &ReducedModel) -> &'static str {
    match rm.kind {
        ModelKind::Optimal => "optimal",
        ModelKind::Fourier => "fourier",
    }
}

/// Least-squares slope of `ln e` against `ln N` while the error still drops
/// by at least 5% per step.
fn pre_floor_slope(points: &[(usize, f64)]) -> Option<f64> {
    let mut end = 1;
    while end < points.len() && points[end].1 < 0.95 * points[end - 1].1 {
        end += 1;
    }
    let pts: Vec<(f64, f64)> = points[..end]
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| ((p.0 as f64).ln(), p.1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn read_program(path: &Path, grid: TimeGrid) -> CliResult<StrainProgram> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("tests.program: cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let col = if header.len() == 1 {
        0
    } else {
        header
            .iter()
            .position(|h| *h == "strain")
            .ok_or_else(|| CliError::Config("tests.program: needs a `strain` column".into()))?
    };
    let values = lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("tests.program: bad value on data row {}", i + 1)))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(StrainProgram::new(grid, values)?)
}

fn programs(setup: &Setup) -> CliResult<Vec<(&'static str, StrainProgram)>> {
    let grid = *setup.space.grid();
    let t = grid.duration();
    let mut list = Vec::new();
    if setup.cfg.tests.parabolic {
        list.push(("parabolic", StrainProgram::from_fn(grid, |x| 4.0 / (t * t) * x * (t - x))));
    }
    if setup.cfg.tests.parabolic_literal {
        list.push(("parabolic_literal", StrainProgram::from_fn(grid, |x| 4.0 / 25.0 * x * (1.0 - x))));
    }
    if let Some(p) = &setup.cfg.tests.program {
        list.push(("custom", read_program(p, grid)?));
    }
    Ok(list)
}

/// Evolution-frame series read backwards as a history at `t = T`.
fn as_history(values: &[f64]) -> Vec<f64> {
    values.iter().rev().copied().collect()
}

fn predictions(setup: &Setup, out: &mut OutputDir, models: &[ReducedModel]) -> CliResult<Value> {
    let programs = programs(setup)?;
    if !setup.cfg.tests.step && programs.is_empty() {
        return Err(CliError::Config("tests: select step, parabolic, parabolic_literal or program".into()));
    }
    let space = &setup.space;
    let norm = |v: &[f64]| space.norm(v).map_err(CliError::from);
    let mut summary = serde_json::Map::new();

    if setup.cfg.tests.step {
        let p = setup.sls.as_ref().ok_or_else(|| CliError::Config("tests.step: needs the sls oracle".into()))?;
        let grid = space.grid();
        let strain = grid.sample(|tau| step_strain(p, tau));
        let (ep_exact, _) = step_exact(p, grid);
        let exact_norm = norm(&ep_exact.values)?;
        let mut table = Table::new(&["N", "kind", "error_H", "relative"]);
        let mut optimal = Vec::new();
        for rm in models {
            let b = rm.meta.basis()?;
            let pred = apply_reduced(rm, &strain, &b)?;
            let diff: Vec<f64> = pred.values.iter().zip(&ep_exact.values).map(|(a, e)| a - e).collect();
            let err = norm(&diff)?;
            let (n, tag) = (rm.rank(), kind_tag(rm));
            table.push(vec![n.to_string(), tag.into(), num(err), num(err / exact_norm)]);
            if rm.kind == ModelKind::Optimal {
                optimal.push((n, err));
            }
            let mut curve = Table::new(&["tau", "strain", "ep_predicted", "ep_exact"]);
            for i in 0..grid.len() {
                curve.push_numbers(&[grid.node(i), strain.values[i], pred.values[i], ep_exact.values[i]]);
            }
            out.write(&format!("step_{tag}_N{n}.csv"), &curve.to_csv())?;
        }
        out.write("step_error.csv", &table.to_csv())?;
        let slope = pre_floor_slope(&optimal);
        if let Some(s) = slope {
            eprintln!("[histvar] step test: fitted slope {s:.3}");
        }
        summary.insert("step".into(), json!({"errors": optimal, "fitted_slope": slope}));
    }

    for (name, program) in programs {
        let grid = *program.grid();
        let n = grid.intervals();
        let reference = timed(&format!("{name}: reference"), || setup.oracle.evaluate(&program))?.stress;
        let ref_norm = norm(&as_history(&reference))?;
        let history = program.history_at(n);
        let mut table = Table::new(&["N", "kind", "ep_error_H", "ep_relative", "stress_error_H", "stress_relative"]);
        let mut rows = Vec::new();
        for rm in models {
            let b = rm.meta.basis()?;
            let (k, tag) = (rm.rank(), kind_tag(rm));
            let ep_exact: Vec<f64> = (0..=n).map(|i| history.values[i] - reference[n - i] / rm.c_eff).collect();
            let ep_pred = apply_reduced(rm, &history, &b)?;
            let ep_diff: Vec<f64> = ep_pred.values.iter().zip(&ep_exact).map(|(a, e)| a - e).collect();
            let ep_err = norm(&ep_diff)?;
            let ep_norm = norm(&ep_exact)?;
            let stress = timed(&format!("{name}: predict N = {k} ({tag})"), || predict_stress(rm, &program))?;
            let diff: Vec<f64> = stress.iter().zip(&reference).map(|(a, e)| a - e).collect();
            let s_err = norm(&as_history(&diff))?;
            let rel = |e: f64, r: f64| if r > 0.0 { e / r } else { e };
            table.push(vec![
                k.to_string(),
                tag.into(),
                num(ep_err),
                num(rel(ep_err, ep_norm)),
                num(s_err),
                num(rel(s_err, ref_norm)),
            ]);
            rows.push(json!({"N": k, "kind": tag, "ep_error_H": ep_err, "stress_error_H": s_err}));
            let mut curve = Table::new(&["t", "strain", "stress_predicted", "stress_reference", "error"]);
            for i in 0..=n {
                curve.push_numbers(&[grid.node(i), program.values()[i], stress[i], reference[i], diff[i]]);
            }
            out.write(&format!("{name}_{tag}_N{k}_stress.csv"), &curve.to_csv())?;
            let mut hist = Table::new(&["tau", "ep_predicted", "ep_exact"]);
            for i in 0..=n {
                hist.push_numbers(&[grid.node(i), ep_pred.values[i], ep_exact[i]]);
            }
            out.write(&format!("{name}_{tag}_N{k}_history.csv"), &hist.to_csv())?;
        }
        out.write(&format!("{name}_error.csv"), &table.to_csv())?;
        summary.insert(name.into(), json!({"reference_norm_H": ref_norm, "errors": rows}));
    }
    Ok(Value::Object(summary))
}

fn cmd_predict(setup: &Setup, out: &mut OutputDir, model_path: Option<&Path>) -> CliResult<Value> {
    let (models, identified) = match model_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("--model: cannot read {}: {e}", path.display())))?;
            let rm = model_from_json(&text)?;
            let grid = rm.meta.grid()?;
            if grid.intervals() != setup.space.grid().intervals() || grid.duration() != setup.space.grid().duration() {
                return Err(CliError::Config(format!(
                    "--model: grid (T = {}, n = {}) differs from space (T = {}, n = {})",
                    grid.duration(),
                    grid.intervals(),
                    setup.cfg.space.duration,
                    setup.cfg.space.n
                )));
            }
            (vec![rm], Value::Null)
        }
        None => identify_all(setup, out)?,
    };
    let predictions = predictions(setup, out, &models)?;
    Ok(json!({"identification": identified, "predictions": predictions}))
}

fn cmd_rve(setup: &Setup, out: &mut OutputDir) -> CliResult<Value> {
    let rve = setup
        .rve
        .as_ref()
        .ok_or_else(|| CliError::Config("material.oracle: the rve command needs \"rve\"".into()))?;
    let model = &rve.model;
    let c_bar = effective_elastic(model)?;
    if let Some(sample) = &rve.sample {
        out.write("histograms.csv", &histogram_table(sample, &rve.sampler, rve.config.histogram_bins).to_csv())?;
    }
    let b = setup.basis(setup.cfg.basis.m);
    let responses = timed("basis responses", || sample_basis_responses(setup.oracle.as_ref(), &b, None))?;
    let m = b.half_width() as i64;
    let mut header = vec!["t".to_string()];
    for j in -m..=m {
        header.push(format!("strain_{j}"));
        header.push(format!("stress_{j}"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let grid = b.grid();
    let n = grid.intervals();
    let programs: Vec<StrainProgram> = (-m..=m)
        .map(|j| histvar::oracle::basis_program(&b, j))
        .collect::<histvar::Result<_>>()?;
    for i in 0..=n {
        let mut row = vec![grid.node(i)];
        for (p, s) in programs.iter().zip(&responses.stresses) {
            row.push(p.values()[i]);
            row.push(s[i]);
        }
        table.push_numbers(&row);
    }
    out.write("basis_responses.csv", &table.to_csv())?;
    let summary = json!({
        "n_dof": model.n_dof,
        "material_points": model.points.len(),
        "volume": model.volume(),
        "fingerprint": format!("{:016x}", model.fingerprint()),
        "C_bar": c_bar.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "C_eff": responses.c_eff,
        "grains_per_side": rve.config.grains_per_side,
        "elems_per_grain_side": rve.config.elems_per_grain_side,
        "seed": setup.cfg.seed,
    });
    let mut result = json!({"rve": summary});
    if !setup.cfg.reduction.n_list.is_empty() {
        let s = assemble_from_responses(&responses, &b, setup.oracle.id())?;
        let ranks = setup.n_list(s.size());
        let (models, identified) = identification(setup, out, &s, &ranks, "")?;
        result["identification"] = identified;
        let t = &setup.cfg.tests;
        if t.parabolic || t.parabolic_literal || t.program.is_some() {
            result["predictions"] = predictions(setup, out, &models)?;
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_stops_at_floor() {
        let pts = [(1, 1.0), (2, 0.5), (4, 0.25), (8, 0.249), (16, 0.249)];
        assert!((pre_floor_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!(pre_floor_slope(&[(1, 1.0)]).is_none());
    }

    #[test]
    fn custom_program_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "t,strain\n0,0\n0.5,1\n1,2\n").unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert_eq!(read_program(&path, grid).unwrap().values(), &[0.0, 1.0, 2.0]);
        std::fs::write(&path, "t,eps\n0,0\n").unwrap();
        assert!(matches!(read_program(&path, grid), Err(CliError::Config(_))));
    }
}
