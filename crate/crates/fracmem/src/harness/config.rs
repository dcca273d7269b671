//! Experiment configuration: flat INI-style files with fixed sections and
//! keys. Unknown sections or keys are rejected; omitted keys fall back to
//! the baseline experiment defaults, and every run writes the fully
//! resolved configuration into its manifest.

use std::path::PathBuf;
use std::sync::Arc;

use super::noise::NoiseScaling;
use crate::error::{Error, Result};
use crate::fem2d::{
    triangulate_rectangle, EllipticCoeffs, MatrixField, Mesh, ObservationMask, ScalarField,
    VectorField,
};
use crate::fracops::{build_time_grid, FracOrder, TimeGrid};
use crate::inversion::StopCriteria;
use crate::solver::ProblemSpec;

/// Named temporal source factors p(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSignalPreset {
    /// p(t) = 2 + (2 pi t)^2.
    Baseline,
    /// p(t) = 1.
    One,
}

impl TimeSignalPreset {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignalPreset::Baseline => 2.0 + (2.0 * std::f64::consts::PI * t).powi(2),
            TimeSignalPreset::One => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TimeSignalPreset::Baseline => "baseline",
            TimeSignalPreset::One => "one",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(TimeSignalPreset::Baseline),
            "one" => Ok(TimeSignalPreset::One),
            other => Err(Error::config(format!("unknown time signal preset `{other}`"))),
        }
    }
}

/// Named true spatial sources q(x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePreset {
    /// q = 1/2 sin(pi x) cos(pi y) + 1.
    Baseline,
    /// q = 3 - exp(1 - (x + y)/2).
    ExpRidge,
    /// q = 1/2 cos(pi x) cos(2 pi y) + 1.
    CosCosDouble,
    /// q = 1/2 cos(pi x) cos(pi y) + 1.
    CosCos,
    /// q = 0.
    Zero,
}

impl SourcePreset {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            SourcePreset::Baseline => 0.5 * (PI * x).sin() * (PI * y).cos() + 1.0,
            SourcePreset::ExpRidge => 3.0 - (1.0 - (x + y) / 2.0).exp(),
            SourcePreset::CosCosDouble => 0.5 * (PI * x).cos() * (2.0 * PI * y).cos() + 1.0,
            SourcePreset::CosCos => 0.5 * (PI * x).cos() * (PI * y).cos() + 1.0,
            SourcePreset::Zero => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourcePreset::Baseline => "baseline",
            SourcePreset::ExpRidge => "q1",
            SourcePreset::CosCosDouble => "q2",
            SourcePreset::CosCos => "q3",
            SourcePreset::Zero => "zero",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(SourcePreset::Baseline),
            "q1" => Ok(SourcePreset::ExpRidge),
            "q2" => Ok(SourcePreset::CosCosDouble),
            "q3" => Ok(SourcePreset::CosCos),
            "zero" => Ok(SourcePreset::Zero),
            other => Err(Error::config(format!("unknown source preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    // [mesh]
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
    // [time]
    pub t_final: f64,
    pub steps: usize,
    // [model]
    pub alpha: f64,
    pub eta: f64,
    pub mu: f64,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub sigma: f64,
    // [source]
    pub p_signal: TimeSignalPreset,
    pub q_true: SourcePreset,
    // [observation]
    pub obs_margin: f64,
    // [noise]
    pub noise_delta: f64,
    pub rng_seed: u64,
    pub noise_scaling: NoiseScaling,
    // [inversion]
    pub reg_weight: f64,
    pub q_init: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    // [data]
    pub data_mesh_refine: usize,
    // [output]
    pub out_dir: PathBuf,
    pub vtk: bool,
}

impl Default for ExperimentConfig {
    /// Baseline reconstruction experiment: unit square, 20x20x20, alpha 1.5,
    /// frame margin 0.05, 1% noise, T = 1.5.
    fn default() -> Self {
        ExperimentConfig {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
            nx: 20,
            ny: 20,
            t_final: 1.5,
            steps: 20,
            alpha: 1.5,
            eta: 1.0,
            mu: 1.0,
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
            b1: 0.0,
            b2: 0.0,
            c: 0.0,
            sigma: 0.0,
            p_signal: TimeSignalPreset::Baseline,
            q_true: SourcePreset::Baseline,
            obs_margin: 0.05,
            noise_delta: 0.01,
            rng_seed: 7,
            noise_scaling: NoiseScaling::Uniform01,
            reg_weight: 1e-6,
            q_init: 1.0,
            grad_tol: 1e-7,
            max_iter: 100,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            data_mesh_refine: 1,
            out_dir: PathBuf::from("runs"),
            vtk: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config(format!("cannot parse [{section}] {key} = `{value}`")))
}

impl ExperimentConfig {
    /// Parse INI-style text. `#` and `;` start comments; sections and keys
    /// outside the documented set are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find(['#', ';']) {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::config(format!(
                        "line {}: malformed section header `{raw}`",
                        lineno + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                const SECTIONS: [&str; 8] = [
                    "mesh",
                    "time",
                    "model",
                    "source",
                    "observation",
                    "noise",
                    "inversion",
                    "data",
                ];
                if !SECTIONS.contains(&section.as_str()) && section != "output" {
                    return Err(Error::config(format!(
                        "line {}: unknown section `[{section}]`",
                        lineno + 1
                    )));
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value).map_err(|e| {
                Error::config(format!("line {}: {e}", lineno + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("mesh", "x0") => self.x0 = parse_num(section, key, value)?,
            ("mesh", "x1") => self.x1 = parse_num(section, key, value)?,
            ("mesh", "y0") => self.y0 = parse_num(section, key, value)?,
            ("mesh", "y1") => self.y1 = parse_num(section, key, value)?,
            ("mesh", "nx") => self.nx = parse_num(section, key, value)?,
            ("mesh", "ny") => self.ny = parse_num(section, key, value)?,
            ("time", "t_final") => self.t_final = parse_num(section, key, value)?,
            ("time", "steps") => self.steps = parse_num(section, key, value)?,
            ("model", "alpha") => self.alpha = parse_num(section, key, value)?,
            ("model", "eta") => self.eta = parse_num(section, key, value)?,
            ("model", "mu") => self.mu = parse_num(section, key, value)?,
            ("model", "a11") => self.a11 = parse_num(section, key, value)?,
            ("model", "a12") => self.a12 = parse_num(section, key, value)?,
            ("model", "a22") => self.a22 = parse_num(section, key, value)?,
            ("model", "b1") => self.b1 = parse_num(section, key, value)?,
            ("model", "b2") => self.b2 = parse_num(section, key, value)?,
            ("model", "c") => self.c = parse_num(section, key, value)?,
            ("model", "sigma") => self.sigma = parse_num(section, key, value)?,
            ("source", "p") => self.p_signal = TimeSignalPreset::parse(value)?,
            ("source", "q_true") => self.q_true = SourcePreset::parse(value)?,
            ("observation", "margin") => self.obs_margin = parse_num(section, key, value)?,
            ("noise", "delta") => self.noise_delta = parse_num(section, key, value)?,
            ("noise", "seed") => self.rng_seed = parse_num(section, key, value)?,
            ("noise", "scaling") => {
                self.noise_scaling = match value {
                    "uniform01" => NoiseScaling::Uniform01,
                    "absolute" => NoiseScaling::Absolute,
                    "relative" => NoiseScaling::RelativeToMax,
                    other => {
                        return Err(Error::config(format!("unknown noise scaling `{other}`")))
                    }
                }
            }
            ("inversion", "reg_weight") => self.reg_weight = parse_num(section, key, value)?,
            ("inversion", "q_init") => self.q_init = parse_num(section, key, value)?,
            ("inversion", "grad_tol") => self.grad_tol = parse_num(section, key, value)?,
            ("inversion", "max_iter") => self.max_iter = parse_num(section, key, value)?,
            ("inversion", "armijo_c1") => self.armijo_c1 = parse_num(section, key, value)?,
            ("inversion", "backtrack") => self.backtrack = parse_num(section, key, value)?,
            ("inversion", "initial_step") => self.initial_step = parse_num(section, key, value)?,
            ("data", "mesh_refine") => self.data_mesh_refine = parse_num(section, key, value)?,
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("output", "vtk") => {
                self.vtk = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    other => return Err(Error::config(format!("unknown vtk flag `{other}`"))),
                }
            }
            _ => {
                return Err(Error::config(format!(
                    "unknown key `{key}` in section `[{section}]`"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_delta < 0.0 {
            return Err(Error::config("noise delta must be nonnegative"));
        }
        let width = (self.x1 - self.x0).min(self.y1 - self.y0);
        if !(self.obs_margin > 0.0 && 2.0 * self.obs_margin < width) {
            return Err(Error::config(format!(
                "observation margin {} must lie in (0, half the domain width)",
                self.obs_margin
            )));
        }
        if self.data_mesh_refine == 0 {
            return Err(Error::config("data mesh refinement factor must be >= 1"));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        Ok(Arc::new(triangulate_rectangle(
            (self.x0, self.x1),
            (self.y0, self.y1),
            self.nx,
            self.ny,
        )?))
    }

    pub fn build_grid(&self) -> Result<TimeGrid> {
        build_time_grid(self.t_final, self.steps)
    }

    pub fn elliptic_coeffs(&self) -> EllipticCoeffs {
        EllipticCoeffs {
            diffusion: MatrixField::Constant([[self.a11, self.a12], [self.a12, self.a22]]),
            convection: VectorField::Constant([self.b1, self.b2]),
            reaction: ScalarField::Constant(self.c),
            robin_sigma: ScalarField::Constant(self.sigma),
        }
    }

    /// Forward problem on the given mesh/grid with the given spatial source.
    pub fn build_spec(&self, mesh: Arc<Mesh>, grid: TimeGrid, source: Vec<f64>) -> Result<ProblemSpec> {
        let alpha = FracOrder::new(self.alpha)?;
        let ndof = mesh.n_nodes();
        let time_signal = grid.nodes().iter().map(|t| self.p_signal.eval(*t)).collect();
        Ok(ProblemSpec {
            mesh,
            grid,
            alpha,
            density: ScalarField::Constant(self.eta),
            viscosity: ScalarField::Constant(self.mu),
            elliptic: self.elliptic_coeffs(),
            time_signal,
            source,
            initial_displacement: vec![0.0; ndof],
            initial_velocity: vec![0.0; ndof],
            extra_loads: Vec::new(),
        })
    }

    pub fn observation_mask(&self, mesh: &Mesh) -> Result<ObservationMask> {
        ObservationMask::frame(mesh, self.obs_margin)
    }

    pub fn stop_criteria(&self) -> StopCriteria {
        StopCriteria {
            grad_tol: self.grad_tol,
            max_iter: self.max_iter,
            armijo_c1: self.armijo_c1,
            backtrack_factor: self.backtrack,
            initial_step: self.initial_step,
        }
    }

    /// Canonical echo of every resolved setting, written into run manifests.
    pub fn manifest_lines(&self) -> String {
        let mut s = String::new();
        let mut push = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        push("[mesh]".into());
        push(format!("x0 = {}", self.x0));
        push(format!("x1 = {}", self.x1));
        push(format!("y0 = {}", self.y0));
        push(format!("y1 = {}", self.y1));
        push(format!("nx = {}", self.nx));
        push(format!("ny = {}", self.ny));
        push("[time]".into());
        push(format!("t_final = {}", self.t_final));
        push(format!("steps = {}", self.steps));
        push("[model]".into());
        push(format!("alpha = {}", self.alpha));
        push(format!("eta = {}", self.eta));
        push(format!("mu = {}", self.mu));
        push(format!("a11 = {}", self.a11));
        push(format!("a12 = {}", self.a12));
        push(format!("a22 = {}", self.a22));
        push(format!("b1 = {}", self.b1));
        push(format!("b2 = {}", self.b2));
        push(format!("c = {}", self.c));
        push(format!("sigma = {}", self.sigma));
        push("[source]".into());
        push(format!("p = {}", self.p_signal.name()));
        push(format!("q_true = {}", self.q_true.name()));
        push("[observation]".into());
        push(format!("margin = {}", self.obs_margin));
        push("[noise]".into());
        push(format!("delta = {}", self.noise_delta));
        push(format!("seed = {}", self.rng_seed));
        push(format!("scaling = {}", self.noise_scaling.as_str()));
        push("[inversion]".into());
        push(format!("reg_weight = {}", self.reg_weight));
        push(format!("q_init = {}", self.q_init));
        push(format!("grad_tol = {}", self.grad_tol));
        push(format!("max_iter = {}", self.max_iter));
        push(format!("armijo_c1 = {}", self.armijo_c1));
        push(format!("backtrack = {}", self.backtrack));
        push(format!("initial_step = {}", self.initial_step));
        push("[data]".into());
        push(format!("mesh_refine = {}", self.data_mesh_refine));
        push("[output]".into());
        push(format!("dir = {}", self.out_dir.display()));
        push(format!("vtk = {}", self.vtk));
        s
    }
}
