//! Uniform Yee lattice geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m), derived so that `1/sqrt(MU0*EPS0) == C0`.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);

/// Cartesian axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    /// The two axes orthogonal to this one, in cyclic order.
    pub fn others(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Cell counts and cell sizes (meters) of a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let g = GridSpec { nx, ny, nz, dx, dy, dz };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering a physical box (meters) with the given cell sizes.
    ///
    /// Extents must be whole multiples of the cell size (to 1e-6 relative).
    pub fn from_extent(extent: [f64; 3], cell: [f64; 3]) -> Result<Self> {
        let mut n = [0usize; 3];
        for a in 0..3 {
            if !(cell[a] > 0.0) || !cell[a].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "cell size along {} must be positive, got {}",
                    Axis::from_index(a),
                    cell[a]
                )));
            }
            let ratio = extent[a] / cell[a];
            let r = ratio.round();
            if (ratio - r).abs() > 1e-6 * ratio.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "extent {} m along {} is not a whole number of {} m cells",
                    extent[a],
                    Axis::from_index(a),
                    cell[a]
                )));
            }
            n[a] = r as usize;
        }
        GridSpec::new(n[0], n[1], n[2], cell[0], cell[1], cell[2])
    }

    pub fn validate(&self) -> Result<()> {
        for (a, (n, d)) in [(self.nx, self.dx), (self.ny, self.dy), (self.nz, self.dz)].into_iter().enumerate() {
            if n < 2 {
                return Err(Error::InvalidGrid(format!(
                    "need at least 2 cells along {}, got {n}",
                    Axis::from_index(a)
                )));
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "cell size along {} must be positive, got {d}",
                    Axis::from_index(a)
                )));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    pub fn d(&self, axis: Axis) -> f64 {
        self.spacing()[axis.index()]
    }

    pub fn n(&self, axis: Axis) -> usize {
        self.cells()[axis.index()]
    }

    /// Physical extent (meters).
    pub fn extent(&self) -> [f64; 3] {
        [self.nx as f64 * self.dx, self.ny as f64 * self.dy, self.nz as f64 * self.dz]
    }

    /// Node-array dimensions used for field storage: `(nx+1, ny+1, nz+1)`.
    pub fn node_dims(&self) -> [usize; 3] {
        [self.nx + 1, self.ny + 1, self.nz + 1]
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }

    /// Linear index of node `(i, j, k)`, z fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.ny + 1) + j) * (self.nz + 1) + k
    }

    /// Linear index of cell `(i, j, k)` in cell-centered arrays, z fastest.
    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }
}

/// Total number of Yee cells, `nx * ny * nz`.
pub fn total_cells(grid: &GridSpec) -> u64 {
    grid.nx as u64 * grid.ny as u64 * grid.nz as u64
}

/// Largest stable timestep scaled by `safety`.
///
/// Uses the wave speed of the fastest medium present; `min_eps_mu` is the
/// smallest product of relative permittivity and permeability in the domain
/// (1 for any domain containing vacuum).
pub fn cfl_timestep_in(grid: &GridSpec, safety: f64, min_eps_mu: f64) -> Result<f64> {
    grid.validate()?;
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Config(format!("Courant safety factor must lie in (0, 1], got {safety}")));
    }
    let c = C0 / min_eps_mu.max(1.0).sqrt();
    let inv = 1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy) + 1.0 / (grid.dz * grid.dz);
    Ok(safety / (c * inv.sqrt()))
}

/// Largest stable timestep for a vacuum-containing domain, scaled by `safety`.
pub fn cfl_timestep(grid: &GridSpec, safety: f64) -> Result<f64> {
    cfl_timestep_in(grid, safety, 1.0)
}

/// Default Courant safety factor.
pub const DEFAULT_SAFETY: f64 = 0.99;

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(n: usize, d: f64) -> GridSpec {
        GridSpec::new(n, n, n, d, d, d).unwrap()
    }

    #[test]
    fn cfl_at_fifth_of_a_millimetre() {
        let dt = cfl_timestep(&cubic(10, 0.2e-3), 1.0).unwrap();
        // 0.2e-3 / (c * sqrt(3))
        assert!((dt - 3.8517e-13).abs() < 0.00005e-13, "{dt}");
    }

    #[test]
    fn cfl_at_one_millimetre() {
        let dt = cfl_timestep(&cubic(10, 1e-3), 1.0).unwrap();
        assert!((dt - 1.9258e-12).abs() < 0.00005e-12, "{dt}");
    }

    #[test]
    fn cfl_cubic_closed_form() {
        for d in [1e-4, 3.3e-4, 1e-3, 0.02] {
            let dt = cfl_timestep(&cubic(4, d), 1.0).unwrap();
            let expect = d / (C0 * 3f64.sqrt());
            assert!((dt - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn cfl_rejects_bad_input() {
        let bad = GridSpec { nx: 4, ny: 4, nz: 4, dx: 0.0, dy: 1e-3, dz: 1e-3 };
        assert!(matches!(cfl_timestep(&bad, 1.0), Err(Error::InvalidGrid(_))));
        assert!(cfl_timestep(&cubic(4, 1e-3), 0.0).is_err());
        assert!(cfl_timestep(&cubic(4, 1e-3), 1.05).is_err());
    }

    #[test]
    fn eps0_consistent_with_c0() {
        let c = 1.0 / (MU0 * EPS0).sqrt();
        assert!((c - C0).abs() < 1e-6);
    }

    #[test]
    fn table_two_cell_counts() {
        let ext = [80e-3, 140e-3, 28e-3];
        let rows = [
            ([0.2, 1.0, 0.2], 7_840_000u64),
            ([0.5, 1.0, 0.5], 1_254_400),
            ([1.0, 1.0, 1.0], 313_600),
            ([0.5, 0.5, 0.5], 2_508_800),
            ([0.2, 0.5, 0.2], 15_680_000),
            ([0.2, 0.2, 0.2], 39_200_000),
        ];
        for (mm, expect) in rows {
            let g = GridSpec::from_extent(ext, mm.map(|v| v * 1e-3)).unwrap();
            assert_eq!(total_cells(&g), expect, "{mm:?}");
        }
    }

    #[test]
    fn extent_round_trips() {
        let g = GridSpec::from_extent([80e-3, 140e-3, 28e-3], [1e-3; 3]).unwrap();
        assert_eq!(g.cells(), [80, 140, 28]);
        let e = g.extent();
        assert!((e[1] - 0.14).abs() < 1e-12);
    }

    #[test]
    fn extent_must_divide() {
        assert!(GridSpec::from_extent([80e-3, 80e-3, 40e-3], [0.3e-3; 3]).is_err());
    }

    #[test]
    fn too_few_cells() {
        assert!(GridSpec::new(1, 4, 4, 1e-3, 1e-3, 1e-3).is_err());
    }
}
