//! Convolutional PML on all six faces.
//!
//! Each face is a slab `thickness` cells deep. Inside a slab the spatial
//! derivative normal to the face is stretched: `d/du -> (1/kappa) d/du + psi`
//! with the recursive accumulator `psi <- b psi + a du`. The `1/kappa`
//! factor is folded into the per-index inverse cell sizes used by the main
//! update; the `psi` correction is applied afterwards, slab cells only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, EPS0, MU0};
use crate::real::Real;

/// Free-space wave impedance.
pub fn eta0() -> f64 {
    (MU0 / EPS0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpmlConfig {
    /// Slab depth in cells on every face.
    pub thickness: usize,
    /// Polynomial grading order of sigma and kappa.
    pub order: f64,
    /// Multiplier on the polynomial-optimal sigma_max.
    pub sigma_scale: f64,
    pub kappa_max: f64,
    /// Complex-frequency shift at the inner slab edge (S/m).
    pub alpha_max: f64,
}

impl Default for CpmlConfig {
    fn default() -> Self {
        CpmlConfig { thickness: 10, order: 4.0, sigma_scale: 1.0, kappa_max: 1.0, alpha_max: 0.05 }
    }
}

impl CpmlConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.thickness < 4 {
            return Err(Error::Config(format!("CPML thickness must be at least 4 cells, got {}", self.thickness)));
        }
        if !(self.order >= 1.0) {
            return Err(Error::Config(format!("CPML grading order must be >= 1, got {}", self.order)));
        }
        if !(self.sigma_scale >= 0.0 && self.alpha_max >= 0.0 && self.kappa_max >= 1.0) {
            return Err(Error::Config("CPML sigma_scale and alpha_max must be >= 0 and kappa_max >= 1".into()));
        }
        let min_n = grid.nx.min(grid.ny).min(grid.nz);
        if 2 * self.thickness >= min_n {
            return Err(Error::Config(format!(
                "CPML of {} cells per face does not fit a grid with {} cells on its shortest axis",
                self.thickness, min_n
            )));
        }
        Ok(())
    }

    pub fn sigma_max(&self, cell_size: f64) -> f64 {
        self.sigma_scale * 0.8 * (self.order + 1.0) / (eta0() * cell_size)
    }
}

/// Grading parameters at one depth inside a slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub sigma: f64,
    pub kappa: f64,
    pub alpha: f64,
}

/// Profile at `depth_fraction` (0 = inner slab edge, 1 = outer wall).
pub fn grading_profile(depth_fraction: f64, config: &CpmlConfig, cell_size: f64) -> Grading {
    let d = depth_fraction.clamp(0.0, 1.0);
    let p = d.powf(config.order);
    Grading {
        sigma: config.sigma_max(cell_size) * p,
        kappa: 1.0 + (config.kappa_max - 1.0) * p,
        alpha: config.alpha_max * (1.0 - d),
    }
}

/// Recursion coefficients `(b, a)` for one grading sample.
pub fn recursion_coefficients(g: Grading, dt: f64) -> (f64, f64) {
    let b = (-(g.sigma / g.kappa + g.alpha) * dt / EPS0).exp();
    let denom = g.sigma * g.kappa + g.kappa * g.kappa * g.alpha;
    let a = if g.sigma == 0.0 || denom == 0.0 { 0.0 } else { g.sigma / denom * (b - 1.0) };
    (b, a)
}

/// Per-index CPML data along one axis.
///
/// E-type arrays are indexed by node `j`, H-type by the half node `j + 1/2`.
#[derive(Debug, Clone)]
pub struct AxisProfile<T> {
    pub n: usize,
    pub thickness: usize,
    /// `1 / (kappa * d)` used by the main update.
    pub e_inv_kd: Vec<T>,
    pub h_inv_kd: Vec<T>,
    pub e_b: Vec<T>,
    /// `a / d`, so the recursion takes raw differences.
    pub e_a: Vec<T>,
    pub h_b: Vec<T>,
    pub h_a: Vec<T>,
}

impl<T: Real> AxisProfile<T> {
    pub fn new(n: usize, d: f64, dt: f64, config: &CpmlConfig) -> Self {
        let l = config.thickness;
        let lf = l as f64;
        let mut p = AxisProfile {
            n,
            thickness: l,
            e_inv_kd: vec![T::of(1.0 / d); n + 1],
            h_inv_kd: vec![T::of(1.0 / d); n + 1],
            e_b: vec![T::one(); n + 1],
            e_a: vec![T::zero(); n + 1],
            h_b: vec![T::one(); n + 1],
            h_a: vec![T::zero(); n + 1],
        };
        for j in 0..=n {
            let e_depth = if j <= l {
                Some((lf - j as f64) / lf)
            } else if j >= n - l {
                Some((j as f64 - (n - l) as f64) / lf)
            } else {
                None
            };
            if let Some(depth) = e_depth {
                let g = grading_profile(depth, config, d);
                let (b, a) = recursion_coefficients(g, dt);
                p.e_inv_kd[j] = T::of(1.0 / (g.kappa * d));
                p.e_b[j] = T::of(b);
                p.e_a[j] = T::of(a / d);
            }
            if j < n {
                let h_depth = if j < l {
                    Some((lf - j as f64 - 0.5) / lf)
                } else if j >= n - l {
                    Some((j as f64 + 0.5 - (n - l) as f64) / lf)
                } else {
                    None
                };
                if let Some(depth) = h_depth {
                    let g = grading_profile(depth, config, d);
                    let (b, a) = recursion_coefficients(g, dt);
                    p.h_inv_kd[j] = T::of(1.0 / (g.kappa * d));
                    p.h_b[j] = T::of(b);
                    p.h_a[j] = T::of(a / d);
                }
            }
        }
        p
    }

    /// Number of accumulator slots along this axis (both slabs).
    pub fn slots(&self) -> usize {
        2 * (self.thickness + 1)
    }

    /// Accumulator slot of index `j`, or `None` outside both slabs.
    #[inline]
    pub fn slot(&self, j: usize) -> Option<usize> {
        let l = self.thickness;
        if j <= l {
            Some(j)
        } else if j >= self.n - l {
            Some(l + 1 + j - (self.n - l))
        } else {
            None
        }
    }

    /// Indices `j` with an active E correction, in increasing order.
    pub fn e_active(&self) -> Vec<usize> {
        (1..self.n).filter(|&j| self.e_a[j] != T::zero()).collect()
    }

    /// Indices `j` (half node `j + 1/2`) with an active H correction.
    pub fn h_active(&self) -> Vec<usize> {
        (0..self.n).filter(|&j| self.h_a[j] != T::zero()).collect()
    }
}

/// Accumulators of one x-plane for either the E or the H half-step.
///
/// `x` holds two full planes when the plane lies in an x slab; `y` holds
/// `slots_y x (nz+1)` rows; `z` holds `(ny+1) x slots_z` columns. The pair
/// order follows the update: for E `[Ey|Ex, Ez|Ez, Ex|Ey]`, for H likewise.
#[derive(Debug, Clone, Default)]
pub struct PlanePsi<T> {
    pub x: Option<[Vec<T>; 2]>,
    pub y: [Vec<T>; 2],
    pub z: [Vec<T>; 2],
}

/// CPML memory for the whole grid, one entry per x-plane.
#[derive(Debug, Clone)]
pub struct CpmlState<T> {
    pub config: CpmlConfig,
    pub profiles: [AxisProfile<T>; 3],
    pub e: Vec<PlanePsi<T>>,
    pub h: Vec<PlanePsi<T>>,
}

impl<T: Real> CpmlState<T> {
    pub fn new(grid: &GridSpec, config: &CpmlConfig, dt: f64) -> Result<Self> {
        config.validate(grid)?;
        let profiles = [
            AxisProfile::new(grid.nx, grid.dx, dt, config),
            AxisProfile::new(grid.ny, grid.dy, dt, config),
            AxisProfile::new(grid.nz, grid.dz, dt, config),
        ];
        let plane = (grid.ny + 1) * (grid.nz + 1);
        let ylen = profiles[1].slots() * (grid.nz + 1);
        let zlen = (grid.ny + 1) * profiles[2].slots();
        let make = |in_slab: bool| PlanePsi {
            x: in_slab.then(|| [vec![T::zero(); plane], vec![T::zero(); plane]]),
            y: [vec![T::zero(); ylen], vec![T::zero(); ylen]],
            z: [vec![T::zero(); zlen], vec![T::zero(); zlen]],
        };
        let px = &profiles[0];
        let e = (0..=grid.nx).map(|i| make(i >= 1 && i < grid.nx && px.e_a[i] != T::zero())).collect();
        let h = (0..=grid.nx).map(|i| make(i < grid.nx && px.h_a[i] != T::zero())).collect();
        Ok(CpmlState { config: *config, profiles, e, h })
    }

    pub fn all_finite(&self) -> bool {
        self.e
            .iter()
            .chain(self.h.iter())
            .all(|p| p.x.iter().flatten().chain(p.y.iter()).chain(p.z.iter()).all(|v| v.iter().all(|x| x.is_finite())))
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().chain(self.h.iter()).all(|p| {
            p.x.iter().flatten().chain(p.y.iter()).chain(p.z.iter()).all(|v| v.iter().all(|x| *x == T::zero()))
        })
    }

    /// True when index `(i, j, k)` lies inside any slab.
    pub fn in_slab(&self, node: [usize; 3]) -> bool {
        (0..3).any(|a| {
            let p = &self.profiles[a];
            node[a] < p.thickness || node[a] > p.n - p.thickness
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grading_endpoints() {
        let c = CpmlConfig::default();
        let d = 1e-3;
        let inner = grading_profile(0.0, &c, d);
        assert_eq!(inner.sigma, 0.0);
        assert_eq!(inner.kappa, 1.0);
        assert_eq!(inner.alpha, c.alpha_max);
        let outer = grading_profile(1.0, &c, d);
        assert_eq!(outer.sigma, c.sigma_max(d));
        assert_eq!(outer.alpha, 0.0);
    }

    #[test]
    fn quartic_midpoint() {
        let c = CpmlConfig::default();
        let g = grading_profile(0.5, &c, 1e-3);
        assert!((g.sigma - c.sigma_max(1e-3) / 16.0).abs() < 1e-12 * c.sigma_max(1e-3));
    }

    #[test]
    fn kappa_grades_to_max() {
        let c = CpmlConfig { kappa_max: 5.0, ..Default::default() };
        assert_eq!(grading_profile(1.0, &c, 1e-3).kappa, 5.0);
        assert_eq!(grading_profile(0.0, &c, 1e-3).kappa, 1.0);
    }

    #[test]
    fn thin_layers_rejected() {
        let g = GridSpec::new(40, 40, 40, 1e-3, 1e-3, 1e-3).unwrap();
        for t in [0, 1, 3] {
            let c = CpmlConfig { thickness: t, ..Default::default() };
            assert!(matches!(c.validate(&g), Err(Error::Config(_))));
        }
        let c = CpmlConfig { thickness: 20, ..Default::default() };
        assert!(c.validate(&g).is_err());
        assert!(CpmlConfig::default().validate(&g).is_ok());
    }

    #[test]
    fn profile_inactive_in_interior() {
        let c = CpmlConfig::default();
        let p = AxisProfile::<f64>::new(40, 1e-3, 1e-12, &c);
        for j in 11..30 {
            assert_eq!(p.e_a[j], 0.0);
            assert_eq!(p.h_a[j], 0.0);
            assert_eq!(p.e_inv_kd[j], 1e3);
            assert!(p.slot(j).is_none() || j == 30);
        }
        assert!(p.e_a[1] < 0.0);
        assert!(p.h_a[0] < 0.0);
        assert!(p.h_a[39] < 0.0);
        assert_eq!(p.e_active().first(), Some(&1));
        assert_eq!(p.e_active().last(), Some(&39));
        assert_eq!(p.slot(40), Some(21));
        assert_eq!(p.slot(30), Some(11));
    }

    #[test]
    fn recursion_coefficients_bounded() {
        let c = CpmlConfig::default();
        for i in 0..=10 {
            let g = grading_profile(i as f64 / 10.0, &c, 1e-3);
            let (b, a) = recursion_coefficients(g, 1.9e-12);
            assert!(b > 0.0 && b <= 1.0);
            assert!(a <= 0.0 && a > -1.0);
        }
    }
}
