//! Experiment pipeline: synthetic data, noise, reconstruction, metrics,
//! and the table/figure drivers.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use super::config::{ExperimentConfig, SourcePreset};
use super::noise::{add_noise, SplitMix64};
use crate::error::{Error, Result};
use crate::export::{
    write_field_csv, write_iterations_csv, write_nodal_csv, write_text, write_vtk_scalars,
};
use crate::fem2d::SparseMatrix;
use crate::inversion::{
    evaluate_cost, evaluate_gradient, reconstruct, CgState, InverseSetup,
};
use crate::solver::{solve_forward, SpaceTimeField};

/// Headline numbers of one reconstruction run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub rel_error: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// ||q_true - q_rec|| / ||q_true|| in the mass-weighted L2 norm.
pub fn relative_l2_error(q_true: &[f64], q_rec: &[f64], mass: &SparseMatrix) -> Result<f64> {
    if q_true.len() != q_rec.len() {
        return Err(Error::invalid("dof layouts differ"));
    }
    let denom = mass.quad_form(q_true, q_true).max(0.0).sqrt();
    if denom == 0.0 {
        return Err(Error::invalid("true source has zero norm"));
    }
    let diff: Vec<f64> = q_true.iter().zip(q_rec).map(|(a, b)| a - b).collect();
    Ok(mass.quad_form(&diff, &diff).max(0.0).sqrt() / denom)
}

/// Restrict a field on an r-times refined mesh/grid to the coarse one by
/// nodal sampling (coarse nodes coincide with every r-th fine node).
fn restrict_field(
    fine: &SpaceTimeField,
    coarse_cfg: &ExperimentConfig,
    r: usize,
) -> Result<SpaceTimeField> {
    let grid = coarse_cfg.build_grid()?;
    let (nx, ny) = (coarse_cfg.nx, coarse_cfg.ny);
    let fine_stride = coarse_cfg.nx * r + 1;
    let mut coarse = SpaceTimeField::zeros(&grid, (nx + 1) * (ny + 1));
    for n in 0..=coarse_cfg.steps {
        let fine_row = fine.row(n * r);
        let row = coarse.row_mut(n);
        for j in 0..=ny {
            for i in 0..=nx {
                row[j * (nx + 1) + i] = fine_row[(j * r) * fine_stride + i * r];
            }
        }
    }
    Ok(coarse)
}

/// Clean synthetic observation field on the inversion grid, together with
/// the true source sampled on the inversion mesh.
///
/// With `data_mesh_refine > 1` the data come from a finer space-time grid
/// and are restricted nodally, avoiding the inverse crime of sharing one
/// discretization between data generation and inversion.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<(SpaceTimeField, Vec<f64>)> {
    cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let q_true = mesh.interpolate(|x, y| cfg.q_true.eval(x, y));
    let r = cfg.data_mesh_refine;
    if r == 1 {
        let spec = cfg.build_spec(mesh, cfg.build_grid()?, q_true.clone())?;
        let u = solve_forward(&spec)?;
        return Ok((u, q_true));
    }
    let mut fine_cfg = cfg.clone();
    fine_cfg.nx = cfg.nx * r;
    fine_cfg.ny = cfg.ny * r;
    fine_cfg.steps = cfg.steps * r;
    let fine_mesh = fine_cfg.build_mesh()?;
    let q_fine = fine_mesh.interpolate(|x, y| cfg.q_true.eval(x, y));
    let spec = fine_cfg.build_spec(fine_mesh, fine_cfg.build_grid()?, q_fine)?;
    let u_fine = solve_forward(&spec)?;
    Ok((restrict_field(&u_fine, cfg, r)?, q_true))
}

/// Reconstruction outcome with everything the writers need.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub state: CgState,
    pub q_true: Vec<f64>,
    pub q_rec: Vec<f64>,
}

/// Run one reconstruction experiment without touching the filesystem.
pub fn run_reconstruction(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (clean, q_true) = generate_data(cfg)?;
    let mesh = cfg.build_mesh()?;
    let mask = cfg.observation_mask(mesh.as_ref())?;
    let noisy = add_noise(
        &clean,
        mesh.as_ref(),
        &mask,
        cfg.noise_delta,
        cfg.rng_seed,
        cfg.noise_scaling,
    );
    let ndof = mesh.n_nodes();
    let spec = cfg.build_spec(mesh, cfg.build_grid()?, vec![0.0; ndof])?;
    let setup = InverseSetup::new(spec, mask, noisy, cfg.reg_weight)?;
    let q0 = vec![cfg.q_init; ndof];
    let (q_rec, state) = reconstruct(&setup, &q0, &cfg.stop_criteria())?;
    let rel_error = relative_l2_error(&q_true, &q_rec, &setup.full_mass)?;
    let metrics = Metrics {
        rel_error,
        final_cost: *state.cost_history.last().unwrap(),
        iterations: state.iterations,
        seed: cfg.rng_seed,
    };
    Ok(RunOutput {
        metrics,
        state,
        q_true,
        q_rec,
    })
}

fn metrics_csv(metrics: &Metrics) -> String {
    format!(
        "rel_error,final_cost,iterations,seed\n{},{},{},{}\n",
        metrics.rel_error, metrics.final_cost, metrics.iterations, metrics.seed
    )
}

fn manifest(cfg: &ExperimentConfig) -> String {
    let stamp = SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "# fracmem run manifest\n# version = {}\n# timestamp_unix = {stamp}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.manifest_lines()
    )
}

/// Full experiment: data, noise, reconstruction, and the output files
/// (manifest, metrics, iterations, reconstruction/truth/error fields).
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    let out = run_reconstruction(cfg)?;
    let mesh = cfg.build_mesh()?;
    write_text(&out_dir.join("manifest.txt"), &manifest(cfg))?;
    write_text(&out_dir.join("metrics.csv"), &metrics_csv(&out.metrics))?;
    write_iterations_csv(&out_dir.join("iterations.csv"), &out.state)?;
    write_nodal_csv(
        &out_dir.join("reconstruction.csv"),
        mesh.as_ref(),
        &out.q_rec,
        "q_value",
    )?;
    write_nodal_csv(&out_dir.join("truth.csv"), mesh.as_ref(), &out.q_true, "q_value")?;
    let abs_err: Vec<f64> = out
        .q_true
        .iter()
        .zip(&out.q_rec)
        .map(|(a, b)| (a - b).abs())
        .collect();
    write_nodal_csv(&out_dir.join("abs_error.csv"), mesh.as_ref(), &abs_err, "abs_error")?;
    if cfg.vtk {
        write_vtk_scalars(
            &out_dir.join("reconstruction.vtk"),
            mesh.as_ref(),
            &[
                ("reconstruction", &out.q_rec),
                ("truth", &out.q_true),
                ("abs_error", &abs_err),
            ],
            "source reconstruction",
        )?;
    }
    Ok(out)
}

/// Forward-only run: solve with the configured true source and export the
/// field (CSV always, VTK series when enabled).
pub fn run_forward(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SpaceTimeField> {
    cfg.validate()?;
    let mesh = cfg.build_mesh()?;
    let q_true = mesh.interpolate(|x, y| cfg.q_true.eval(x, y));
    let spec = cfg.build_spec(mesh.clone(), cfg.build_grid()?, q_true)?;
    let u = solve_forward(&spec)?;
    write_text(&out_dir.join("manifest.txt"), &manifest(cfg))?;
    write_field_csv(&out_dir.join("field.csv"), mesh.as_ref(), &u)?;
    if cfg.vtk {
        crate::export::write_vtk_series(out_dir, "field", mesh.as_ref(), &u, "displacement")?;
    }
    Ok(u)
}

/// One row of a reproduction table.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub label: String,
    pub per_seed: Vec<Metrics>,
    pub median_rel_error: f64,
    pub min_rel_error: f64,
    pub max_rel_error: f64,
    pub median_final_cost: f64,
    pub error: Option<String>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn aggregate_row(label: String, results: Vec<Result<Metrics>>) -> TableRow {
    let mut metrics = Vec::new();
    let mut error = None;
    for r in results {
        match r {
            Ok(m) => metrics.push(m),
            Err(e) => error = Some(e.to_string()),
        }
    }
    if metrics.is_empty() {
        return TableRow {
            label,
            per_seed: Vec::new(),
            median_rel_error: f64::NAN,
            min_rel_error: f64::NAN,
            max_rel_error: f64::NAN,
            median_final_cost: f64::NAN,
            error: Some(error.unwrap_or_else(|| "no seeds ran".into())),
        };
    }
    let mut rels: Vec<f64> = metrics.iter().map(|m| m.rel_error).collect();
    let mut costs: Vec<f64> = metrics.iter().map(|m| m.final_cost).collect();
    let min = rels.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = rels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    TableRow {
        label,
        per_seed: metrics,
        median_rel_error: median(&mut rels),
        min_rel_error: min,
        max_rel_error: max,
        median_final_cost: median(&mut costs),
        error,
    }
}

/// Row configurations of the three reproduction tables.
pub fn table_rows(table_id: u8, base: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>> {
    let mut rows = Vec::new();
    match table_id {
        1 => {
            for (delta, margin) in [
                (0.01, 0.1),
                (0.03, 0.1),
                (0.05, 0.1),
                (0.01, 0.2),
                (0.01, 0.1),
                (0.01, 0.05),
            ] {
                let mut cfg = base.clone();
                cfg.noise_delta = delta;
                cfg.obs_margin = margin;
                rows.push((format!("delta={}%,margin={}", delta * 100.0, margin), cfg));
            }
        }
        2 => {
            for alpha in [1.3, 1.6, 1.9] {
                let mut cfg = base.clone();
                cfg.alpha = alpha;
                cfg.noise_delta = 0.02;
                cfg.obs_margin = 0.05;
                rows.push((format!("alpha={alpha}"), cfg));
            }
        }
        3 => {
            for q in [
                SourcePreset::ExpRidge,
                SourcePreset::CosCosDouble,
                SourcePreset::CosCos,
            ] {
                let mut cfg = base.clone();
                cfg.q_true = q;
                cfg.noise_delta = 0.01;
                cfg.obs_margin = 0.05;
                rows.push((format!("q_true={}", q.name()), cfg));
            }
        }
        other => return Err(Error::invalid(format!("unknown table id {other}"))),
    }
    Ok(rows)
}

/// Run a reproduction table: every (row, seed) pair is an independent job
/// with its own output directory; rows aggregate the per-seed medians.
/// A failing row is recorded and does not abort the table.
pub fn run_table(
    table_id: u8,
    base: &ExperimentConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<TableRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    let rows = table_rows(table_id, base)?;
    let mut jobs: Vec<(usize, usize, ExperimentConfig, PathBuf)> = Vec::new();
    for (ri, (_, cfg)) in rows.iter().enumerate() {
        for (si, seed) in seeds.iter().enumerate() {
            let mut job_cfg = cfg.clone();
            job_cfg.rng_seed = *seed;
            let dir = out_dir.join(format!("row{ri}_seed{seed}"));
            jobs.push((ri, si, job_cfg, dir));
        }
    }
    let mut results: Vec<Vec<Option<Result<Metrics>>>> =
        vec![(0..seeds.len()).map(|_| None).collect(); rows.len()];
    std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(ri, si, cfg, dir)| {
                (
                    ri,
                    si,
                    scope.spawn(move || run_experiment(&cfg, &dir).map(|o| o.metrics)),
                )
            })
            .collect();
        for (ri, si, handle) in handles {
            let res = handle
                .join()
                .unwrap_or_else(|_| Err(Error::numeric("worker panicked")));
            results[ri][si] = Some(res);
        }
    });
    let table: Vec<TableRow> = rows
        .into_iter()
        .zip(results)
        .map(|((label, _), row_results)| {
            aggregate_row(label, row_results.into_iter().map(|r| r.unwrap()).collect())
        })
        .collect();
    let mut csv = String::from(
        "row,label,median_rel_error,min_rel_error,max_rel_error,median_final_cost,n_seeds,status\n",
    );
    for (i, row) in table.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            row.label,
            row.median_rel_error,
            row.min_rel_error,
            row.max_rel_error,
            row.median_final_cost,
            row.per_seed.len(),
            row.error
                .as_deref()
                .map(|e| format!("failed: {e}"))
                .unwrap_or_else(|| "ok".into())
        ));
    }
    write_text(&out_dir.join(format!("table{table_id}.csv")), &csv)?;
    Ok(table)
}

/// One directional-derivative comparison of the adjoint gradient against a
/// central finite difference of the cost.
#[derive(Debug, Clone)]
pub struct GradCheckTrial {
    pub adjoint_value: f64,
    pub fd_value: f64,
    pub rel_diff: f64,
}

/// Finite-difference validation of the adjoint gradient on the configured
/// problem with seeded random source and direction vectors.
pub fn gradient_check(cfg: &ExperimentConfig, trials: usize, fd_step: f64) -> Result<Vec<GradCheckTrial>> {
    cfg.validate()?;
    let (clean, _) = generate_data(cfg)?;
    let mesh = cfg.build_mesh()?;
    let mask = cfg.observation_mask(mesh.as_ref())?;
    let noisy = add_noise(
        &clean,
        mesh.as_ref(),
        &mask,
        cfg.noise_delta,
        cfg.rng_seed,
        cfg.noise_scaling,
    );
    let ndof = mesh.n_nodes();
    let spec = cfg.build_spec(mesh, cfg.build_grid()?, vec![0.0; ndof])?;
    let setup = InverseSetup::new(spec, mask, noisy, cfg.reg_weight)?;
    let mut rng = SplitMix64::new(cfg.rng_seed ^ 0xD1F7_5EED);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let q: Vec<f64> = (0..ndof).map(|_| rng.uniform_symmetric()).collect();
        let dir: Vec<f64> = (0..ndof).map(|_| rng.uniform_symmetric()).collect();
        let (_, state) = evaluate_cost(&setup, &q)?;
        let grad = evaluate_gradient(&setup, &q, &state)?;
        let adjoint_value = setup.inner(&grad, &dir);
        let plus: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a + fd_step * d).collect();
        let minus: Vec<f64> = q.iter().zip(&dir).map(|(a, d)| a - fd_step * d).collect();
        let (jp, _) = evaluate_cost(&setup, &plus)?;
        let (jm, _) = evaluate_cost(&setup, &minus)?;
        let fd_value = (jp - jm) / (2.0 * fd_step);
        let denom = adjoint_value.abs().max(fd_value.abs()).max(1e-300);
        out.push(GradCheckTrial {
            adjoint_value,
            fd_value,
            rel_diff: (adjoint_value - fd_value).abs() / denom,
        });
    }
    Ok(out)
}

/// Gradient-check run with CSV report.
pub fn run_gradcheck(cfg: &ExperimentConfig, trials: usize, out_dir: &Path) -> Result<Vec<GradCheckTrial>> {
    let rows = gradient_check(cfg, trials, 1e-4)?;
    let mut csv = String::from("trial,adjoint_dd,fd_dd,rel_diff\n");
    for (i, r) in rows.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", r.adjoint_value, r.fd_value, r.rel_diff));
    }
    write_text(&out_dir.join("gradcheck.csv"), &csv)?;
    write_text(&out_dir.join("manifest.txt"), &manifest(cfg))?;
    Ok(rows)
}
