//! Trajectory export.
//!
//! Binary layout (all little-endian):
//!
//! | bytes | content                                  |
//! |-------|------------------------------------------|
//! | 8     | magic `NCTRAJ01`                         |
//! | 4     | `u32` spatial dimension                  |
//! | 8     | `u32` interior counts per axis (2 slots) |
//! | 4     | `u32` number of time steps `N`           |
//! | 8     | `f64` final time `T`                     |
//! | ...   | for `n = 0..=N`: `y` then `z`, `f64` each |

use std::io::{Read, Write};

use crate::error::{invalid, Result};
use crate::mesh::SpatialMesh;
use crate::report::{Cell, CsvTable};
use crate::scalar::Scalar;

use super::{NodalSeries, TimeGrid, Trajectory};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"NCTRAJ01";

/// Long-format table `(t, x, y, z)`; 2D meshes get `x1, x2` columns.
pub fn trajectory_csv<T: Scalar>(mesh: &SpatialMesh<T>, traj: &Trajectory<T>) -> CsvTable {
    let mut table = if mesh.dim() == 1 {
        CsvTable::new(&["t", "x", "y", "z"])
    } else {
        CsvTable::new(&["t", "x1", "x2", "y", "z"])
    };
    for n in 0..traj.grid.node_count() {
        let t = traj.grid.node(n).to_f64_lossy();
        for k in 0..mesh.dof() {
            let c = mesh.coords(k);
            let mut row = vec![Cell::from(t), Cell::from(c[0].to_f64_lossy())];
            if mesh.dim() == 2 {
                row.push(Cell::from(c[1].to_f64_lossy()));
            }
            row.push(Cell::from(traj.y.at(n)[k].to_f64_lossy()));
            row.push(Cell::from(traj.z.at(n)[k].to_f64_lossy()));
            table.push(row);
        }
    }
    table
}

pub fn write_trajectory_binary<T: Scalar, W: Write>(mesh: &SpatialMesh<T>, traj: &Trajectory<T>, mut out: W) -> Result<()> {
    out.write_all(TRAJECTORY_MAGIC)?;
    out.write_all(&(mesh.dim() as u32).to_le_bytes())?;
    for a in 0..2 {
        let c = if a < mesh.dim() { mesh.counts()[a] } else { 1 };
        out.write_all(&(c as u32).to_le_bytes())?;
    }
    out.write_all(&(traj.grid.steps() as u32).to_le_bytes())?;
    out.write_all(&traj.grid.t_final().to_f64_lossy().to_le_bytes())?;
    for n in 0..traj.grid.node_count() {
        for series in [&traj.y, &traj.z] {
            for &v in series.at(n) {
                out.write_all(&v.to_f64_lossy().to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Decoded binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub dim: usize,
    pub counts: [usize; 2],
    pub trajectory: Trajectory<f64>,
}

pub fn read_trajectory_binary<R: Read>(mut input: R) -> Result<TrajectoryDump> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != TRAJECTORY_MAGIC {
        return invalid("not a trajectory dump (bad magic)");
    }
    let mut u32buf = [0u8; 4];
    let mut next_u32 = |r: &mut R| -> Result<usize> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf) as usize)
    };
    let dim = next_u32(&mut input)?;
    let counts = [next_u32(&mut input)?, next_u32(&mut input)?];
    let steps = next_u32(&mut input)?;
    let mut f64buf = [0u8; 8];
    input.read_exact(&mut f64buf)?;
    let t_final = f64::from_le_bytes(f64buf);
    let grid = TimeGrid::new(t_final, steps)?;
    let dof = counts[0] * counts[1];
    let mut y = NodalSeries::zeros(grid.node_count(), dof);
    let mut z = NodalSeries::zeros(grid.node_count(), dof);
    for n in 0..grid.node_count() {
        for series in [&mut y, &mut z] {
            for v in series.at_mut(n) {
                input.read_exact(&mut f64buf)?;
                *v = f64::from_le_bytes(f64buf);
            }
        }
    }
    Ok(TrajectoryDump {
        dim,
        counts,
        trajectory: Trajectory { grid, y, z },
    })
}
