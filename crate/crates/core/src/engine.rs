//! Leapfrog driver: H half-step, E half-step, source injection, probes.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::cpml::{AxisProfile, CpmlConfig, CpmlState, PlanePsi};
use crate::error::{Error, Result};
use crate::fields::FieldState;
use crate::grid::{cfl_timestep_in, GridSpec};
use crate::material::{build_coefficients_with, EdgeLoad, MaterialGrid, UpdateCoefficients};
use crate::real::Real;
use crate::source::{apply_voltage_source, ProbeRecord, ProbeRecords, VoltageProbe, VoltageSource};

/// Everything needed to run one simulation.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub grid: GridSpec,
    pub materials: MaterialGrid,
    pub cpml: CpmlConfig,
    pub sources: Vec<VoltageSource>,
    pub probes: Vec<VoltageProbe>,
    pub dt: f64,
    pub steps: usize,
    pub safety: f64,
    /// Skip the CFL check. Only for stability diagnostics.
    pub allow_unstable: bool,
}

impl SimulationConfig {
    /// Config with the CFL timestep for `safety` and no steps, sources or probes.
    pub fn new(materials: MaterialGrid, cpml: CpmlConfig, safety: f64) -> Result<Self> {
        let grid = *materials.grid();
        let dt = cfl_timestep_in(&grid, safety, materials.min_eps_mu())?;
        Ok(SimulationConfig {
            grid,
            materials,
            cpml,
            sources: Vec::new(),
            probes: Vec::new(),
            dt,
            steps: 0,
            safety,
            allow_unstable: false,
        })
    }

    /// As [`SimulationConfig::new`] but with `dt = safety * limit` for any
    /// positive `safety`, including values above 1.
    pub fn new_unchecked(materials: MaterialGrid, cpml: CpmlConfig, safety: f64) -> Result<Self> {
        let mut c = Self::new(materials, cpml, 1.0)?;
        c.dt *= safety;
        c.safety = safety;
        c.allow_unstable = true;
        Ok(c)
    }

    /// Stability limit of the timestep for this grid and its materials.
    pub fn cfl_limit(&self) -> Result<f64> {
        cfl_timestep_in(&self.grid, 1.0, self.materials.min_eps_mu())
    }

    /// Steps needed to cover `duration` seconds.
    pub fn steps_for(&self, duration: f64) -> usize {
        (duration / self.dt).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if *self.materials.grid() != self.grid {
            return Err(Error::Config("material grid does not match the simulation grid".into()));
        }
        self.cpml.validate(&self.grid)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("timestep must be positive, got {}", self.dt)));
        }
        if !self.allow_unstable {
            if !(self.safety > 0.0 && self.safety <= 1.0) {
                return Err(Error::Config(format!("Courant safety factor must lie in (0, 1], got {}", self.safety)));
            }
            let limit = self.cfl_limit()?;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::Config(format!("timestep {:e} s exceeds the CFL limit {:e} s", self.dt, limit)));
            }
        }
        for s in &self.sources {
            s.validate(&self.grid, self.cpml.thickness)?;
        }
        for p in &self.probes {
            p.validate(&self.grid)?;
        }
        if self.steps > 0 {
            if let Some(fc) = self.sources.iter().map(|s| s.waveform.fc).reduce(f64::min) {
                let need = 4.0 / fc;
                if (self.steps as f64) * self.dt < need * (1.0 - 1e-12) {
                    return Err(Error::Config(format!(
                        "{} steps of {:e} s do not launch the pulse (need at least {:e} s)",
                        self.steps, self.dt, need
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct SourceSlot {
    axis: usize,
    idx: usize,
    scale: f64,
    source: VoltageSource,
}

/// Read-only data shared by the plane kernels.
struct Ctx<'a, T> {
    nx: usize,
    ny: usize,
    nz: usize,
    nz1: usize,
    plane: usize,
    p: &'a [AxisProfile<T>; 3],
    e_act_z: &'a [usize],
    h_act_z: &'a [usize],
    co: &'a UpdateCoefficients<T>,
}

impl<'a, T> Ctx<'a, T> {
    fn new(
        g: &GridSpec,
        p: &'a [AxisProfile<T>; 3],
        e_act_z: &'a [usize],
        h_act_z: &'a [usize],
        co: &'a UpdateCoefficients<T>,
    ) -> Self {
        Ctx { nx: g.nx, ny: g.ny, nz: g.nz, nz1: g.nz + 1, plane: (g.ny + 1) * (g.nz + 1), p, e_act_z, h_act_z, co }
    }
}

/// A configured FDTD run that can be advanced step by step.
pub struct Engine<T: Real> {
    grid: GridSpec,
    coeffs: UpdateCoefficients<T>,
    fields: FieldState<T>,
    cpml: CpmlState<T>,
    e_act_z: Vec<usize>,
    h_act_z: Vec<usize>,
    sources: Vec<SourceSlot>,
    probes: Vec<VoltageProbe>,
    records: ProbeRecords,
    pool: Option<ThreadPool>,
    dt: f64,
}

impl<T: Real> Engine<T> {
    /// Build an engine. `threads = None` uses the global rayon pool.
    pub fn new(config: &SimulationConfig, threads: Option<usize>) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let loads: Vec<EdgeLoad> = config
            .sources
            .iter()
            .map(|s| EdgeLoad { node: s.node, axis: s.axis, sigma: s.conductivity(&grid) })
            .collect();
        let coeffs = build_coefficients_with::<T>(&config.materials, config.dt, &loads)?;
        let cpml = CpmlState::new(&grid, &config.cpml, config.dt)?;
        let e_act_z = cpml.profiles[2].e_active();
        let h_act_z = cpml.profiles[2].h_active();
        let sources = config
            .sources
            .iter()
            .map(|s| SourceSlot {
                axis: s.axis.index(),
                idx: grid.idx(s.node[0], s.node[1], s.node[2]),
                scale: s.current_scale(&grid),
                source: *s,
            })
            .collect::<Vec<_>>();
        let pool = match threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?,
            ),
            None => None,
        };
        let records = ProbeRecords {
            dt: config.dt,
            sources: vec![Vec::new(); sources.len()],
            probes: config.probes.iter().map(|p| ProbeRecord { node: p.node, e: Default::default() }).collect(),
        };
        Ok(Engine {
            grid,
            coeffs,
            fields: FieldState::zeros(grid),
            cpml,
            e_act_z,
            h_act_z,
            sources,
            probes: config.probes.clone(),
            records,
            pool,
            dt: config.dt,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fields(&self) -> &FieldState<T> {
        &self.fields
    }

    /// Mutable field access, e.g. to seed an initial condition.
    pub fn fields_mut(&mut self) -> &mut FieldState<T> {
        &mut self.fields
    }

    pub fn cpml(&self) -> &CpmlState<T> {
        &self.cpml
    }

    pub fn coefficients(&self) -> &UpdateCoefficients<T> {
        &self.coeffs
    }

    pub fn records(&self) -> &ProbeRecords {
        &self.records
    }

    pub fn into_records(self) -> ProbeRecords {
        self.records
    }

    pub fn steps_done(&self) -> usize {
        self.fields.n
    }

    pub fn threads(&self) -> usize {
        self.pool.as_ref().map_or_else(rayon::current_num_threads, |p| p.current_num_threads())
    }

    /// Advance `n` iterations.
    pub fn run_steps(&mut self, n: usize) -> Result<()> {
        match self.pool.take() {
            Some(pool) => {
                let r = pool.install(|| (0..n).try_for_each(|_| self.step()));
                self.pool = Some(pool);
                r
            }
            None => (0..n).try_for_each(|_| self.step()),
        }
    }

    /// One leapfrog iteration: H to `n + 1/2`, E to `n + 1`, then record.
    pub fn step(&mut self) -> Result<()> {
        let n = self.fields.n;
        self.update_h();
        let mut ok = self.update_e();
        let t_half = (n as f64 + 0.5) * self.dt;
        for s in &self.sources {
            let cb = self.coeffs.cb[self.coeffs.e_id[s.axis][s.idx] as usize];
            let e = &mut self.fields.e[s.axis][s.idx];
            *e = apply_voltage_source(*e, cb, s.source.waveform.sample(t_half), s.scale);
            ok &= e.is_finite();
        }
        if !ok {
            return Err(Error::Instability { step: n + 1 });
        }
        self.fields.n = n + 1;
        let t = (n as f64 + 1.0) * self.dt;
        for (rec, s) in self.records.sources.iter_mut().zip(&self.sources) {
            rec.push(s.source.waveform.sample(t));
        }
        for (rec, p) in self.records.probes.iter_mut().zip(&self.probes) {
            let idx = self.grid.idx(p.node[0], p.node[1], p.node[2]);
            for c in 0..3 {
                rec.e[c].push(self.fields.e[c][idx].f64());
            }
        }
        Ok(())
    }

    fn update_h(&mut self) {
        let plane = (self.grid.ny + 1) * (self.grid.nz + 1);
        let ctx = Ctx::new(&self.grid, &self.cpml.profiles, &self.e_act_z, &self.h_act_z, &self.coeffs);
        let e = &self.fields.e;
        let [hx, hy, hz] = &mut self.fields.h;
        hx.par_chunks_mut(plane)
            .zip(hy.par_chunks_mut(plane))
            .zip(hz.par_chunks_mut(plane))
            .zip(self.cpml.h.par_iter_mut())
            .enumerate()
            .for_each(|(i, (((hx, hy), hz), psi))| h_plane(&ctx, i, hx, hy, hz, psi, e));
    }

    fn update_e(&mut self) -> bool {
        let plane = (self.grid.ny + 1) * (self.grid.nz + 1);
        let ctx = Ctx::new(&self.grid, &self.cpml.profiles, &self.e_act_z, &self.h_act_z, &self.coeffs);
        let h = &self.fields.h;
        let [ex, ey, ez] = &mut self.fields.e;
        ex.par_chunks_mut(plane)
            .zip(ey.par_chunks_mut(plane))
            .zip(ez.par_chunks_mut(plane))
            .zip(self.cpml.e.par_iter_mut())
            .enumerate()
            .map(|(i, (((ex, ey), ez), psi))| e_plane(&ctx, i, ex, ey, ez, psi, h))
            .reduce(|| true, |a, b| a && b)
    }

    /// Sum of electric and magnetic energy, treating every cell as vacuum.
    pub fn field_energy(&self) -> f64 {
        self.fields.vacuum_energy()
    }
}

/// Run a configuration to completion and return its probe records.
pub fn run<T: Real>(config: &SimulationConfig, threads: Option<usize>) -> Result<ProbeRecords> {
    let mut engine = Engine::<T>::new(config, threads)?;
    engine.run_steps(config.steps)?;
    Ok(engine.into_records())
}

#[allow(clippy::too_many_arguments)]
fn h_plane<T: Real>(
    c: &Ctx<'_, T>,
    i: usize,
    hx: &mut [T],
    hy: &mut [T],
    hz: &mut [T],
    psi: &mut PlanePsi<T>,
    e: &[Vec<T>; 3],
) {
    let (nx, ny, nz, nz1, p) = (c.nx, c.ny, c.nz, c.nz1, c.plane);
    if i >= nx {
        return;
    }
    let off = i * p;
    let ex = &e[0][off..off + p];
    let ey = &e[1][off..off + p];
    let ez = &e[2][off..off + p];
    let eyn = &e[1][off + p..off + 2 * p];
    let ezn = &e[2][off + p..off + 2 * p];
    let idx = &c.co.h_id;
    let (idx_x, idx_y, idx_z) = (&idx[0][off..off + p], &idx[1][off..off + p], &idx[2][off..off + p]);
    let db = &c.co.db[..];
    let (px, py, pz) = (&c.p[0], &c.p[1], &c.p[2]);
    let kz = &pz.h_inv_kd[..nz];
    let cx = px.h_inv_kd[i];

    // Da is identically 1: no magnetic loss.
    if i >= 1 {
        for j in 0..ny {
            let cy = py.h_inv_kd[j];
            let r = j * nz1;
            let h = &mut hx[r..r + nz];
            let id = &idx_x[r..r + nz];
            let ez0 = &ez[r..r + nz];
            let ez1 = &ez[r + nz1..r + nz1 + nz];
            let ey0 = &ey[r..r + nz + 1];
            for k in 0..nz {
                let curl = (ez1[k] - ez0[k]) * cy - (ey0[k + 1] - ey0[k]) * kz[k];
                h[k] = h[k] - db[id[k] as usize] * curl;
            }
        }
    }
    for j in 1..ny {
        let r = j * nz1;
        let h = &mut hy[r..r + nz];
        let id = &idx_y[r..r + nz];
        let ex0 = &ex[r..r + nz + 1];
        let ez0 = &ez[r..r + nz];
        let ez1 = &ezn[r..r + nz];
        for k in 0..nz {
            let curl = (ex0[k + 1] - ex0[k]) * kz[k] - (ez1[k] - ez0[k]) * cx;
            h[k] = h[k] - db[id[k] as usize] * curl;
        }
    }
    for j in 0..ny {
        let cy = py.h_inv_kd[j];
        let r = j * nz1;
        let h = &mut hz[r + 1..r + nz];
        let id = &idx_z[r + 1..r + nz];
        let ey0 = &ey[r + 1..r + nz];
        let ey1 = &eyn[r + 1..r + nz];
        let ex0 = &ex[r + 1..r + nz];
        let ex1 = &ex[r + nz1 + 1..r + nz1 + nz];
        for k in 0..nz - 1 {
            let curl = (ey1[k] - ey0[k]) * cx - (ex1[k] - ex0[k]) * cy;
            h[k] = h[k] - db[id[k] as usize] * curl;
        }
    }

    if let Some([pyx, pzx]) = psi.x.as_mut() {
        let (b, a) = (px.h_b[i], px.h_a[i]);
        for j in 1..ny {
            for k in 0..nz {
                let q = j * nz1 + k;
                pyx[q] = b * pyx[q] + a * (ezn[q] - ez[q]);
                hy[q] = hy[q] + db[idx_y[q] as usize] * pyx[q];
            }
        }
        for j in 0..ny {
            for k in 1..nz {
                let q = j * nz1 + k;
                pzx[q] = b * pzx[q] + a * (eyn[q] - ey[q]);
                hz[q] = hz[q] - db[idx_z[q] as usize] * pzx[q];
            }
        }
    }

    let [pxy, pzy] = &mut psi.y;
    for j in 0..ny {
        let a = py.h_a[j];
        if a == T::zero() {
            continue;
        }
        let b = py.h_b[j];
        let s = py.slot(j).expect("active index has a slot") * nz1;
        let r = j * nz1;
        if i >= 1 {
            for k in 0..nz {
                let q = r + k;
                let w = s + k;
                pxy[w] = b * pxy[w] + a * (ez[q + nz1] - ez[q]);
                hx[q] = hx[q] - db[idx_x[q] as usize] * pxy[w];
            }
        }
        for k in 1..nz {
            let q = r + k;
            let w = s + k;
            pzy[w] = b * pzy[w] + a * (ex[q + nz1] - ex[q]);
            hz[q] = hz[q] + db[idx_z[q] as usize] * pzy[w];
        }
    }

    let [pxz, pyz] = &mut psi.z;
    let sz = pz.slots();
    for j in 0..ny {
        let r = j * nz1;
        for &k in c.h_act_z {
            let (b, a) = (pz.h_b[k], pz.h_a[k]);
            let q = r + k;
            let w = j * sz + pz.slot(k).expect("active index has a slot");
            if i >= 1 {
                pxz[w] = b * pxz[w] + a * (ey[q + 1] - ey[q]);
                hx[q] = hx[q] + db[idx_x[q] as usize] * pxz[w];
            }
            if j >= 1 {
                pyz[w] = b * pyz[w] + a * (ex[q + 1] - ex[q]);
                hy[q] = hy[q] - db[idx_y[q] as usize] * pyz[w];
            }
        }
    }
}

/// E update of plane `i`; returns false if any updated value is not finite.
#[allow(clippy::too_many_arguments)]
fn e_plane<T: Real>(
    c: &Ctx<'_, T>,
    i: usize,
    ex: &mut [T],
    ey: &mut [T],
    ez: &mut [T],
    psi: &mut PlanePsi<T>,
    h: &[Vec<T>; 3],
) -> bool {
    let (nx, ny, nz, nz1, p) = (c.nx, c.ny, c.nz, c.nz1, c.plane);
    if i >= nx {
        return true;
    }
    let off = i * p;
    let hx = &h[0][off..off + p];
    let hy = &h[1][off..off + p];
    let hz = &h[2][off..off + p];
    let idx = &c.co.e_id;
    let (idx_x, idx_y, idx_z) = (&idx[0][off..off + p], &idx[1][off..off + p], &idx[2][off..off + p]);
    let (ca, cb) = (&c.co.ca[..], &c.co.cb[..]);
    let (px, py, pz) = (&c.p[0], &c.p[1], &c.p[2]);
    let kz = &pz.e_inv_kd[..nz];
    let inner = i >= 1;

    for j in 1..ny {
        let cy = py.e_inv_kd[j];
        let r = j * nz1;
        let e = &mut ex[r + 1..r + nz];
        let id = &idx_x[r + 1..r + nz];
        let hz0 = &hz[r - nz1 + 1..r - nz1 + nz];
        let hz1 = &hz[r + 1..r + nz];
        let hy0 = &hy[r..r + nz];
        for k in 0..nz - 1 {
            let curl = (hz1[k] - hz0[k]) * cy - (hy0[k + 1] - hy0[k]) * kz[k + 1];
            let m = id[k] as usize;
            e[k] = ca[m] * e[k] + cb[m] * curl;
        }
    }
    if inner {
        let hyp = &h[1][off - p..off];
        let hzp = &h[2][off - p..off];
        let cx = px.e_inv_kd[i];
        for j in 0..ny {
            let r = j * nz1;
            let e = &mut ey[r + 1..r + nz];
            let id = &idx_y[r + 1..r + nz];
            let hx0 = &hx[r..r + nz];
            let hz0 = &hzp[r + 1..r + nz];
            let hz1 = &hz[r + 1..r + nz];
            for k in 0..nz - 1 {
                let curl = (hx0[k + 1] - hx0[k]) * kz[k + 1] - (hz1[k] - hz0[k]) * cx;
                let m = id[k] as usize;
                e[k] = ca[m] * e[k] + cb[m] * curl;
            }
        }
        for j in 1..ny {
            let cy = py.e_inv_kd[j];
            let r = j * nz1;
            let e = &mut ez[r..r + nz];
            let id = &idx_z[r..r + nz];
            let hy0 = &hyp[r..r + nz];
            let hy1 = &hy[r..r + nz];
            let hx0 = &hx[r - nz1..r - nz1 + nz];
            let hx1 = &hx[r..r + nz];
            for k in 0..nz {
                let curl = (hy1[k] - hy0[k]) * cx - (hx1[k] - hx0[k]) * cy;
                let m = id[k] as usize;
                e[k] = ca[m] * e[k] + cb[m] * curl;
            }
        }

        if let Some([pyx, pzx]) = psi.x.as_mut() {
            let (b, a) = (px.e_b[i], px.e_a[i]);
            for j in 0..ny {
                for k in 1..nz {
                    let q = j * nz1 + k;
                    pyx[q] = b * pyx[q] + a * (hz[q] - hzp[q]);
                    ey[q] = ey[q] - cb[idx_y[q] as usize] * pyx[q];
                }
            }
            for j in 1..ny {
                for k in 0..nz {
                    let q = j * nz1 + k;
                    pzx[q] = b * pzx[q] + a * (hy[q] - hyp[q]);
                    ez[q] = ez[q] + cb[idx_z[q] as usize] * pzx[q];
                }
            }
        }
    }

    let [pxy, pzy] = &mut psi.y;
    for j in 1..ny {
        let a = py.e_a[j];
        if a == T::zero() {
            continue;
        }
        let b = py.e_b[j];
        let s = py.slot(j).expect("active index has a slot") * nz1;
        let r = j * nz1;
        for k in 1..nz {
            let q = r + k;
            let w = s + k;
            pxy[w] = b * pxy[w] + a * (hz[q] - hz[q - nz1]);
            ex[q] = ex[q] + cb[idx_x[q] as usize] * pxy[w];
        }
        if inner {
            for k in 0..nz {
                let q = r + k;
                let w = s + k;
                pzy[w] = b * pzy[w] + a * (hx[q] - hx[q - nz1]);
                ez[q] = ez[q] - cb[idx_z[q] as usize] * pzy[w];
            }
        }
    }

    let [pxz, pyz] = &mut psi.z;
    let sz = pz.slots();
    for j in 0..ny {
        let r = j * nz1;
        for &k in c.e_act_z {
            let (b, a) = (pz.e_b[k], pz.e_a[k]);
            let q = r + k;
            let w = j * sz + pz.slot(k).expect("active index has a slot");
            if j >= 1 {
                pxz[w] = b * pxz[w] + a * (hy[q] - hy[q - 1]);
                ex[q] = ex[q] - cb[idx_x[q] as usize] * pxz[w];
            }
            if inner {
                pyz[w] = b * pyz[w] + a * (hx[q] - hx[q - 1]);
                ey[q] = ey[q] + cb[idx_y[q] as usize] * pyz[w];
            }
        }
    }

    ex.iter().chain(ey.iter()).chain(ez.iter()).all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, DEFAULT_SAFETY};
    use crate::source::GaussianWaveform;

    fn small(n: usize) -> SimulationConfig {
        let g = GridSpec::new(n, n, n, 1e-3, 1e-3, 1e-3).unwrap();
        SimulationConfig::new(MaterialGrid::vacuum(g), CpmlConfig::default(), DEFAULT_SAFETY).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let mut c = small(24);
        c.steps = 50;
        let mut e = Engine::<f64>::new(&c, Some(1)).unwrap();
        e.run_steps(50).unwrap();
        assert!(e.fields().is_zero());
        assert!(e.cpml().is_zero());
        assert_eq!(e.steps_done(), 50);
    }

    #[test]
    fn zero_steps_empty_records() {
        let mut c = small(24);
        c.sources.push(VoltageSource::new([12, 12, 12], Axis::Z, GaussianWaveform::default()));
        c.probes.push(VoltageProbe { node: [12, 12, 12] });
        let r = run::<f64>(&c, Some(1)).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.probes[0].e[2].len(), 0);
    }

    #[test]
    fn impulse_causality_cone() {
        let c = small(30);
        let mut e = Engine::<f64>::new(&c, Some(1)).unwrap();
        let g = *e.grid();
        let centre = [15usize, 15, 15];
        e.fields_mut().e[2][g.idx(15, 15, 15)] = 1.0;
        for steps in 1..=4 {
            e.run_steps(1).unwrap();
            let f = e.fields();
            for comp in f.e.iter().chain(f.h.iter()) {
                for i in 0..=g.nx {
                    for j in 0..=g.ny {
                        for k in 0..=g.nz {
                            let v = comp[g.idx(i, j, k)];
                            if v != 0.0 {
                                let dist = [i, j, k].iter().zip(centre).map(|(&a, b)| a.abs_diff(b)).max().unwrap();
                                assert!(dist <= steps, "value at distance {dist} after {steps} steps");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn source_in_pml_rejected() {
        let mut c = small(30);
        c.sources.push(VoltageSource::new([3, 15, 15], Axis::Z, GaussianWaveform::default()));
        assert!(matches!(Engine::<f64>::new(&c, Some(1)), Err(Error::Config(_))));
    }

    #[test]
    fn short_run_rejected() {
        let mut c = small(30);
        c.sources.push(VoltageSource::new([15, 15, 15], Axis::Z, GaussianWaveform::default()));
        c.steps = 10;
        assert!(c.validate().is_err());
        c.steps = c.steps_for(2e-9);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn supercritical_timestep_rejected_unless_allowed() {
        let mut c = small(24);
        c.dt *= 1.1;
        assert!(c.validate().is_err());
        let g = c.grid;
        let u = SimulationConfig::new_unchecked(MaterialGrid::vacuum(g), CpmlConfig::default(), 1.05).unwrap();
        assert!(u.validate().is_ok());
    }

    #[test]
    fn co_located_probe_nonzero() {
        let mut c = small(30);
        let s = VoltageSource::new([15, 15, 15], Axis::Z, GaussianWaveform::default());
        c.sources.push(s);
        c.probes.push(VoltageProbe::at(&s));
        c.steps = c.steps_for(2e-9);
        let r = run::<f64>(&c, Some(1)).unwrap();
        assert_eq!(r.sources[0].len(), c.steps);
        assert!(r.probes[0].e[2].iter().all(|v| v.is_finite()));
        assert!(r.probes[0].e[2].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn thread_count_bitwise() {
        let mut c = small(28);
        let s = VoltageSource::new([14, 13, 15], Axis::Y, GaussianWaveform::default());
        c.sources.push(s);
        c.probes.push(VoltageProbe::at(&s));
        c.steps = c.steps_for(2.5e-9);
        let mut a = Engine::<f64>::new(&c, Some(1)).unwrap();
        let mut b = Engine::<f64>::new(&c, Some(3)).unwrap();
        a.run_steps(c.steps).unwrap();
        b.run_steps(c.steps).unwrap();
        assert_eq!(a.fields(), b.fields());
        assert_eq!(a.records(), b.records());
    }
}
