//! CSV export of trajectories and snapshots.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{SolutionTrajectory, StateField};

pub const TRAJECTORY_HEADER: &str = "t,l2_norm,sup_norm,boundary_value,newton_iters";

pub fn write_trajectory_csv<W: Write>(traj: &SolutionTrajectory, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for i in 0..traj.len() {
        writeln!(
            out,
            "{},{},{},{},{}",
            traj.times[i], traj.l2_norm[i], traj.sup_norm[i], traj.boundary_value[i], traj.newton_iters[i]
        )?;
    }
    Ok(())
}

pub fn write_snapshot_csv<W: Write>(nodes: &[f64], state: &StateField, mut out: W) -> io::Result<()> {
    writeln!(out, "r,u")?;
    for (r, u) in nodes.iter().zip(&state.values) {
        writeln!(out, "{r},{u}")?;
    }
    Ok(())
}

/// Writes `snapshot_<step>.csv` for every stored snapshot into `dir`.
pub fn write_snapshots(traj: &SolutionTrajectory, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for snap in &traj.snapshots {
        let file = fs::File::create(dir.join(format!("snapshot_{}.csv", snap.step)))?;
        let mut w = io::BufWriter::new(file);
        write_snapshot_csv(traj.grid.nodes(), &snap.state, &mut w)?;
        w.flush()?;
    }
    Ok(())
}
