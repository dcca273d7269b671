//! CSV and legacy-VTK writers for run outputs.
//!
//! Numbers are printed with Rust's shortest round-trip formatting, so a
//! given binary reproduces byte-identical files for identical inputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem2d::Mesh;
use crate::inversion::CgState;
use crate::solver::SpaceTimeField;

fn create(path: &Path) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| Error::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn finish(mut f: fs::File, path: &Path) -> Result<()> {
    f.flush()
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

macro_rules! wline {
    ($f:expr, $path:expr, $($arg:tt)*) => {
        writeln!($f, $($arg)*).map_err(|e| Error::Io(format!("{}: {e}", $path.display())))?
    };
}

/// `node_id,x,y,<name>` rows for a nodal scalar.
pub fn write_nodal_csv(path: &Path, mesh: &Mesh, values: &[f64], name: &str) -> Result<()> {
    let mut f = create(path)?;
    wline!(f, path, "node_id,x,y,{name}");
    for (i, node) in mesh.nodes().iter().enumerate() {
        wline!(f, path, "{i},{},{},{}", node[0], node[1], values[i]);
    }
    finish(f, path)
}

/// `node_id,x,y,t,value` rows for a full space-time field.
pub fn write_field_csv(path: &Path, mesh: &Mesh, field: &SpaceTimeField) -> Result<()> {
    let mut f = create(path)?;
    wline!(f, path, "node_id,x,y,t,value");
    for n in 0..field.n_rows() {
        let t = field.grid().node(n);
        let row = field.row(n);
        for (i, node) in mesh.nodes().iter().enumerate() {
            wline!(f, path, "{i},{},{},{},{}", node[0], node[1], t, row[i]);
        }
    }
    finish(f, path)
}

/// Per-iteration log: `k,cost,grad_norm,step,wall_time_ms`.
///
/// Row k = 0 is the initial point (no step yet). Wall times are real
/// measurements and are the one column excluded from byte-for-byte
/// determinism comparisons.
pub fn write_iterations_csv(path: &Path, state: &CgState) -> Result<()> {
    let mut f = create(path)?;
    wline!(f, path, "k,cost,grad_norm,step,wall_time_ms");
    for k in 0..state.cost_history.len() {
        let step = if k == 0 {
            String::from("")
        } else {
            format!("{}", state.step_history[k - 1])
        };
        wline!(
            f,
            path,
            "{k},{},{},{},{}",
            state.cost_history[k],
            state.grad_norm_history[k],
            step,
            state.wall_ms_history[k]
        );
    }
    finish(f, path)
}

/// Legacy ASCII VTK unstructured grid with one or more nodal scalar fields.
pub fn write_vtk_scalars(
    path: &Path,
    mesh: &Mesh,
    fields: &[(&str, &[f64])],
    title: &str,
) -> Result<()> {
    let mut f = create(path)?;
    wline!(f, path, "# vtk DataFile Version 3.0");
    wline!(f, path, "{title}");
    wline!(f, path, "ASCII");
    wline!(f, path, "DATASET UNSTRUCTURED_GRID");
    wline!(f, path, "POINTS {} double", mesh.n_nodes());
    for node in mesh.nodes() {
        wline!(f, path, "{} {} 0", node[0], node[1]);
    }
    let ntri = mesh.n_triangles();
    wline!(f, path, "CELLS {} {}", ntri, 4 * ntri);
    for tri in mesh.triangles() {
        wline!(f, path, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    wline!(f, path, "CELL_TYPES {ntri}");
    for _ in 0..ntri {
        wline!(f, path, "5");
    }
    wline!(f, path, "POINT_DATA {}", mesh.n_nodes());
    for (name, values) in fields {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invalid(format!(
                "field `{name}` has {} values for {} nodes",
                values.len(),
                mesh.n_nodes()
            )));
        }
        wline!(f, path, "SCALARS {name} double 1");
        wline!(f, path, "LOOKUP_TABLE default");
        for v in *values {
            wline!(f, path, "{v}");
        }
    }
    finish(f, path)
}

/// One legacy VTK file per time step: `<stem>_0000.vtk`, `<stem>_0001.vtk`, ...
pub fn write_vtk_series(
    dir: &Path,
    stem: &str,
    mesh: &Mesh,
    field: &SpaceTimeField,
    name: &str,
) -> Result<()> {
    for n in 0..field.n_rows() {
        let path = dir.join(format!("{stem}_{n:04}.vtk"));
        let title = format!("{name} at t = {}", field.grid().node(n));
        write_vtk_scalars(&path, mesh, &[(name, field.row(n))], &title)?;
    }
    Ok(())
}

/// Plain text file writer used for manifests and metrics.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(content.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    finish(f, path)
}
