//! Staggered E/H field arrays.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::grid::{Axis, GridSpec};
use crate::real::Real;

/// The six Yee field components plus the timestep counter.
///
/// Every component is stored in a `(nx+1) x (ny+1) x (nz+1)` node array
/// (z fastest). A component only occupies its staggered sub-block, see
/// [`FieldState::e_shape`] and [`FieldState::h_shape`]; the remaining
/// padding entries stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub grid: GridSpec,
    pub e: [Vec<T>; 3],
    pub h: [Vec<T>; 3],
    /// Number of completed leapfrog iterations.
    pub n: usize,
}

impl<T: Real> FieldState<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.node_count();
        FieldState {
            grid,
            e: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
            h: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]],
            n: 0,
        }
    }

    /// Logical shape of the E component along `axis`: half-cell offset on its
    /// own axis (one fewer sample), nodes on the other two.
    pub fn e_shape(&self, axis: Axis) -> [usize; 3] {
        let mut s = self.grid.node_dims();
        s[axis.index()] -= 1;
        s
    }

    /// Logical shape of the H component along `axis`: nodes on its own axis,
    /// half-cell offsets on the other two.
    pub fn h_shape(&self, axis: Axis) -> [usize; 3] {
        let mut s = self.grid.cells();
        s[axis.index()] += 1;
        s
    }

    pub fn e_at(&self, axis: Axis, node: [usize; 3]) -> T {
        self.e[axis.index()][self.grid.idx(node[0], node[1], node[2])]
    }

    pub fn all_finite(&self) -> bool {
        self.e.iter().chain(self.h.iter()).all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_e(&self) -> f64 {
        self.e.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs().f64()))
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().chain(self.h.iter()).all(|c| c.iter().all(|v| *v == T::zero()))
    }

    /// Electromagnetic energy `1/2 sum(eps E^2 + mu H^2) dV` for vacuum.
    pub fn vacuum_energy(&self) -> f64 {
        use crate::grid::{EPS0, MU0};
        let dv = self.grid.dx * self.grid.dy * self.grid.dz;
        let sum = |c: &[Vec<T>; 3]| -> f64 {
            c.iter()
                .flat_map(|v| v.iter())
                .map(|x| {
                    let x = x.f64();
                    x * x
                })
                .sum()
        };
        0.5 * dv * (EPS0 * sum(&self.e) + MU0 * sum(&self.h))
    }

    /// Write each component as raw little-endian values plus a JSON sidecar
    /// describing storage layout and staggering.
    pub fn export_snapshot(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let names = [("ex", "ey", "ez"), ("hx", "hy", "hz")];
        let mut comps = Vec::new();
        for (field, (a, b, c)) in [(&self.e, names[0]), (&self.h, names[1])] {
            for (axis, name) in [a, b, c].into_iter().enumerate() {
                let file = format!("{stem}_{name}.bin");
                let mut out = fs::File::create(dir.join(&file))?;
                let mut buf = Vec::with_capacity(field[axis].len() * std::mem::size_of::<T>());
                for v in &field[axis] {
                    if std::mem::size_of::<T>() == 4 {
                        buf.extend_from_slice(&(v.f64() as f32).to_le_bytes());
                    } else {
                        buf.extend_from_slice(&v.f64().to_le_bytes());
                    }
                }
                out.write_all(&buf)?;
                let ax = Axis::from_index(axis);
                let (shape, offset) = if name.starts_with('e') {
                    let mut off = [0.0; 3];
                    off[axis] = 0.5;
                    (self.e_shape(ax), off)
                } else {
                    let mut off = [0.5; 3];
                    off[axis] = 0.0;
                    (self.h_shape(ax), off)
                };
                comps.push(SnapshotComponent {
                    name,
                    file,
                    storage_dims: self.grid.node_dims(),
                    logical_shape: shape,
                    offset_cells: offset,
                });
            }
        }
        let meta = SnapshotMeta {
            dtype: T::NAME,
            byte_order: "little",
            order: "z-fastest",
            step: self.n,
            grid: self.grid,
            components: comps,
        };
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SnapshotComponent {
    name: &'static str,
    file: String,
    storage_dims: [usize; 3],
    logical_shape: [usize; 3],
    offset_cells: [f64; 3],
}

#[derive(Serialize)]
struct SnapshotMeta {
    dtype: &'static str,
    byte_order: &'static str,
    order: &'static str,
    step: usize,
    grid: GridSpec,
    components: Vec<SnapshotComponent>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staggered_shapes() {
        let g = GridSpec::new(4, 5, 6, 1e-3, 1e-3, 1e-3).unwrap();
        let f = FieldState::<f64>::zeros(g);
        assert_eq!(f.e_shape(Axis::X), [4, 6, 7]);
        assert_eq!(f.e_shape(Axis::Z), [5, 6, 6]);
        assert_eq!(f.h_shape(Axis::X), [5, 5, 6]);
        assert_eq!(f.h_shape(Axis::Y), [4, 6, 6]);
        assert!(f.is_zero());
    }

    #[test]
    fn snapshot_sidecar_written() {
        let g = GridSpec::new(2, 2, 2, 1e-3, 1e-3, 1e-3).unwrap();
        let mut f = FieldState::<f32>::zeros(g);
        f.e[2][g.idx(1, 1, 0)] = 2.5;
        let dir = tempfile::tempdir().unwrap();
        f.export_snapshot(dir.path(), "snap").unwrap();
        let bytes = std::fs::read(dir.path().join("snap_ez.bin")).unwrap();
        assert_eq!(bytes.len(), 27 * 4);
        let at = g.idx(1, 1, 0) * 4;
        assert_eq!(f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()), 2.5);
        let meta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("snap.json")).unwrap()).unwrap();
        assert_eq!(meta["components"].as_array().unwrap().len(), 6);
        assert_eq!(meta["dtype"], "f32");
    }
}
