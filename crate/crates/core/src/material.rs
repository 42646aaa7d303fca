//! Per-cell material properties and the precomputed leapfrog coefficients.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, EPS0, MU0};
use crate::real::Real;

/// Isotropic, non-dispersive medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub eps_r: f64,
    pub mu_r: f64,
    /// Electric conductivity (S/m).
    pub sigma: f64,
}

impl Material {
    pub const VACUUM: Material = Material { eps_r: 1.0, mu_r: 1.0, sigma: 0.0 };

    pub fn new(eps_r: f64, mu_r: f64, sigma: f64) -> Result<Self> {
        let m = Material { eps_r, mu_r, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 1.0 && self.eps_r.is_finite()) {
            return Err(Error::Config(format!("eps_r must be >= 1, got {}", self.eps_r)));
        }
        if !(self.mu_r >= 1.0 && self.mu_r.is_finite()) {
            return Err(Error::Config(format!("mu_r must be >= 1, got {}", self.mu_r)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// A resistor occupying a single E-edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedResistor {
    pub node: [usize; 3],
    pub axis: Axis,
    pub ohms: f64,
}

impl LumpedResistor {
    /// Equivalent edge conductivity `d_axis / (R * transverse_area)`.
    pub fn conductivity(&self, grid: &GridSpec) -> f64 {
        edge_conductivity(grid, self.axis, self.ohms)
    }
}

/// Conductivity that makes one cell edge along `axis` behave as `ohms`.
pub fn edge_conductivity(grid: &GridSpec, axis: Axis, ohms: f64) -> f64 {
    let (a, b) = axis.others();
    grid.d(axis) / (ohms * grid.d(a) * grid.d(b))
}

/// Cell-centered materials plus PEC flags on E-edges.
///
/// Field nodes use the `(nx+1, ny+1, nz+1)` layout of [`GridSpec::idx`]. An
/// edge takes the material of the cell whose lower corner is its node,
/// clamped into the grid at the upper faces.
#[derive(Debug, Clone)]
pub struct MaterialGrid {
    grid: GridSpec,
    materials: Vec<Material>,
    cell_material: Vec<u8>,
    pec: [Vec<bool>; 3],
    pub lumped: Vec<LumpedResistor>,
}

impl MaterialGrid {
    /// All-vacuum domain.
    pub fn vacuum(grid: GridSpec) -> Self {
        let n = grid.node_count();
        MaterialGrid {
            grid,
            materials: vec![Material::VACUUM],
            cell_material: vec![0; grid.nx * grid.ny * grid.nz],
            pec: [vec![false; n], vec![false; n], vec![false; n]],
            lumped: Vec::new(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    /// Register a material, returning its id. Identical materials share an id.
    pub fn add_material(&mut self, m: Material) -> Result<u8> {
        m.validate()?;
        if let Some(pos) = self.materials.iter().position(|x| *x == m) {
            return Ok(pos as u8);
        }
        if self.materials.len() >= u8::MAX as usize {
            return Err(Error::Config("too many distinct materials (max 255)".into()));
        }
        self.materials.push(m);
        Ok((self.materials.len() - 1) as u8)
    }

    /// Fill the cell box `lo..hi` (exclusive upper bound, cell indices).
    pub fn fill_cells(&mut self, lo: [usize; 3], hi: [usize; 3], id: u8) {
        let g = self.grid;
        for i in lo[0]..hi[0].min(g.nx) {
            for j in lo[1]..hi[1].min(g.ny) {
                for k in lo[2]..hi[2].min(g.nz) {
                    self.cell_material[g.cell_idx(i, j, k)] = id;
                }
            }
        }
    }

    pub fn cell(&self, i: usize, j: usize, k: usize) -> &Material {
        &self.materials[self.cell_material[self.grid.cell_idx(i, j, k)] as usize]
    }

    /// Material of the cell owning the edge or node at `node` (clamped to the grid).
    pub fn owning_cell(&self, node: [usize; 3]) -> Material {
        let g = &self.grid;
        *self.cell(node[0].min(g.nx - 1), node[1].min(g.ny - 1), node[2].min(g.nz - 1))
    }

    pub fn set_pec(&mut self, axis: Axis, node: [usize; 3], on: bool) {
        let idx = self.grid.idx(node[0], node[1], node[2]);
        self.pec[axis.index()][idx] = on;
    }

    pub fn is_pec(&self, axis: Axis, node: [usize; 3]) -> bool {
        self.pec[axis.index()][self.grid.idx(node[0], node[1], node[2])]
    }

    pub fn pec_flags(&self, axis: Axis) -> &[bool] {
        &self.pec[axis.index()]
    }

    pub fn pec_edge_count(&self) -> usize {
        self.pec.iter().map(|p| p.iter().filter(|&&b| b).count()).sum()
    }

    /// Smallest `eps_r * mu_r` product among occupied cells (the fastest medium).
    pub fn min_eps_mu(&self) -> f64 {
        let mut used = vec![false; self.materials.len()];
        for &m in &self.cell_material {
            used[m as usize] = true;
        }
        self.materials.iter().zip(used).filter(|(_, u)| *u).map(|(m, _)| m.eps_r * m.mu_r).fold(f64::INFINITY, f64::min)
    }

    /// True when every cell is vacuum and no PEC or lumped element exists.
    pub fn is_vacuum(&self) -> bool {
        self.cell_material.iter().all(|&m| self.materials[m as usize] == Material::VACUUM)
            && self.pec_edge_count() == 0
            && self.lumped.is_empty()
    }
}

/// Extra conductivity folded into one E-edge (lumped loads, source resistance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLoad {
    pub node: [usize; 3],
    pub axis: Axis,
    pub sigma: f64,
}

/// Coefficient tables plus per-edge table ids.
///
/// `E <- Ca E + Cb curl(H)` and `H <- Da H - Db curl(E)`; the curl terms are
/// divided by the cell size at update time.
#[derive(Debug, Clone)]
pub struct UpdateCoefficients<T> {
    pub e_id: [Vec<u8>; 3],
    pub h_id: [Vec<u8>; 3],
    pub ca: Vec<T>,
    pub cb: Vec<T>,
    pub da: Vec<T>,
    pub db: Vec<T>,
    pub dt: f64,
}

/// Reserved E-table id for perfect conductors (`Ca = Cb = 0`).
pub const PEC_ID: u8 = 0;

impl<T: Real> UpdateCoefficients<T> {
    #[inline]
    pub fn ca_at(&self, axis: Axis, idx: usize) -> T {
        self.ca[self.e_id[axis.index()][idx] as usize]
    }

    #[inline]
    pub fn cb_at(&self, axis: Axis, idx: usize) -> T {
        self.cb[self.e_id[axis.index()][idx] as usize]
    }

    #[inline]
    pub fn da_at(&self, axis: Axis, idx: usize) -> T {
        self.da[self.h_id[axis.index()][idx] as usize]
    }

    #[inline]
    pub fn db_at(&self, axis: Axis, idx: usize) -> T {
        self.db[self.h_id[axis.index()][idx] as usize]
    }

    pub fn is_pec(&self, axis: Axis, idx: usize) -> bool {
        self.e_id[axis.index()][idx] == PEC_ID
    }
}

/// Lossy-medium E coefficients `(Ca, Cb)`.
pub fn e_coefficients(eps_r: f64, sigma: f64, dt: f64) -> (f64, f64) {
    let eps = EPS0 * eps_r;
    let denom = 2.0 * eps + sigma * dt;
    ((2.0 * eps - sigma * dt) / denom, 2.0 * dt / denom)
}

/// H coefficients `(Da, Db)`; magnetic loss is not modelled.
pub fn h_coefficients(mu_r: f64, dt: f64) -> (f64, f64) {
    let mu = MU0 * mu_r;
    (1.0, dt / mu)
}

/// Precompute update coefficients for `materials` at timestep `dt`.
pub fn build_coefficients<T: Real>(materials: &MaterialGrid, dt: f64) -> Result<UpdateCoefficients<T>> {
    build_coefficients_with(materials, dt, &[])
}

/// As [`build_coefficients`], folding additional per-edge conductivity in.
pub fn build_coefficients_with<T: Real>(
    materials: &MaterialGrid,
    dt: f64,
    extra: &[EdgeLoad],
) -> Result<UpdateCoefficients<T>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("timestep must be positive, got {dt}")));
    }
    let g = *materials.grid();
    let n = g.node_count();

    // Per-edge extra conductivity from lumped elements and caller loads.
    let mut loads: HashMap<(usize, usize), f64> = HashMap::new();
    for r in &materials.lumped {
        check_node(&g, r.node)?;
        *loads.entry((r.axis.index(), g.idx(r.node[0], r.node[1], r.node[2]))).or_default() += r.conductivity(&g);
    }
    for l in extra {
        check_node(&g, l.node)?;
        *loads.entry((l.axis.index(), g.idx(l.node[0], l.node[1], l.node[2]))).or_default() += l.sigma;
    }

    let mut ca = vec![T::zero()];
    let mut cb = vec![T::zero()];
    let mut e_table: HashMap<(u64, u64), u8> = HashMap::new();
    let mut e_lookup = |eps_r: f64, sigma: f64| -> Result<u8> {
        let key = (eps_r.to_bits(), sigma.to_bits());
        if let Some(&id) = e_table.get(&key) {
            return Ok(id);
        }
        if ca.len() >= u8::MAX as usize {
            return Err(Error::Config("too many distinct E coefficients (max 255)".into()));
        }
        let (a, b) = e_coefficients(eps_r, sigma, dt);
        ca.push(T::of(a));
        cb.push(T::of(b));
        let id = (ca.len() - 1) as u8;
        e_table.insert(key, id);
        Ok(id)
    };

    let mut da = Vec::new();
    let mut db = Vec::new();
    let mut h_table: HashMap<u64, u8> = HashMap::new();
    let mut h_lookup = |mu_r: f64| -> Result<u8> {
        if let Some(&id) = h_table.get(&mu_r.to_bits()) {
            return Ok(id);
        }
        if da.len() >= u8::MAX as usize {
            return Err(Error::Config("too many distinct H coefficients (max 255)".into()));
        }
        let (a, b) = h_coefficients(mu_r, dt);
        da.push(T::of(a));
        db.push(T::of(b));
        let id = (da.len() - 1) as u8;
        h_table.insert(mu_r.to_bits(), id);
        Ok(id)
    };

    let mut e_id = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
    let mut h_id = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
    // Material ids are few; cache per (cell material id) lookups.
    let mut e_cache: HashMap<u8, u8> = HashMap::new();
    let mut h_cache: HashMap<u8, u8> = HashMap::new();
    for i in 0..=g.nx {
        for j in 0..=g.ny {
            for k in 0..=g.nz {
                let idx = g.idx(i, j, k);
                let cm = materials.cell_material[g.cell_idx(i.min(g.nx - 1), j.min(g.ny - 1), k.min(g.nz - 1))];
                let m = materials.materials[cm as usize];
                let base_e = match e_cache.get(&cm) {
                    Some(&id) => id,
                    None => {
                        let id = e_lookup(m.eps_r, m.sigma)?;
                        e_cache.insert(cm, id);
                        id
                    }
                };
                let hid = match h_cache.get(&cm) {
                    Some(&id) => id,
                    None => {
                        let id = h_lookup(m.mu_r)?;
                        h_cache.insert(cm, id);
                        id
                    }
                };
                for a in 0..3 {
                    h_id[a][idx] = hid;
                    e_id[a][idx] = if materials.pec[a][idx] {
                        PEC_ID
                    } else if let Some(&extra_sigma) = loads.get(&(a, idx)) {
                        e_lookup(m.eps_r, m.sigma + extra_sigma)?
                    } else {
                        base_e
                    };
                }
            }
        }
    }

    Ok(UpdateCoefficients { e_id, h_id, ca, cb, da, db, dt })
}

fn check_node(g: &GridSpec, node: [usize; 3]) -> Result<()> {
    if node[0] > g.nx || node[1] > g.ny || node[2] > g.nz {
        return Err(Error::Config(format!("edge node {node:?} outside grid {:?}", g.cells())));
    }
    Ok(())
}
