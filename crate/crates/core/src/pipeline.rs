//! One antenna, end to end: rasterize, run, extract S11.

use serde::{Deserialize, Serialize};

use crate::cpml::CpmlConfig;
use crate::engine::{Engine, SimulationConfig};
use crate::error::{Error, Result};
use crate::geometry::{rasterize, AntennaSpec, FeedEdge, GeometrySpec, SnapReport};
use crate::grid::{GridSpec, DEFAULT_SAFETY};
use crate::material::LumpedResistor;
use crate::real::{Precision, Real};
use crate::source::{GaussianWaveform, VoltageProbe, VoltageSource};
use crate::sparams::{reflected, s11_curve, S11Curve, VoltageRecord, S11_STEP_HZ};

/// Length of the full recording window (s): 33.4 ns, just over one period of
/// the 30 MHz output spacing so the unpadded bins are already that fine.
pub const FULL_WINDOW_S: f64 = 33.4e-9;

pub fn full_window_seconds() -> f64 {
    FULL_WINDOW_S.max(1.0 / S11_STEP_HZ)
}

/// How long to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Window {
    /// Stop once the reflected wave has decayed below `threshold` times the
    /// source peak over the last `chunk` steps, bounded by the full window.
    Auto { threshold: f64, chunk: usize },
    /// Run the full window, so zero padding adds no interpolation.
    Full,
    /// Fixed number of steps.
    Steps { steps: usize },
}

impl Default for Window {
    fn default() -> Self {
        Window::Auto { threshold: 1e-6, chunk: 500 }
    }
}

/// Solver settings shared by every antenna of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Cell size (mm).
    pub cell_mm: [f64; 3],
    pub cpml: CpmlConfig,
    pub waveform: GaussianWaveform,
    pub resistance: f64,
    pub safety: f64,
    pub window: Window,
    pub df_hz: f64,
    pub precision: Precision,
    /// Lumped load on the feed edge (ohms), for calibration runs.
    pub feed_load_ohms: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            cell_mm: [1.0; 3],
            cpml: CpmlConfig::default(),
            waveform: GaussianWaveform::default(),
            resistance: 50.0,
            safety: DEFAULT_SAFETY,
            window: Window::default(),
            df_hz: S11_STEP_HZ,
            precision: Precision::F64,
            feed_load_ohms: None,
        }
    }
}

impl SolverSettings {
    pub fn with_cell(mut self, d: f64) -> Self {
        self.cell_mm = [d; 3];
        self
    }

    pub fn grid_for(&self, domain_mm: [f64; 3]) -> Result<GridSpec> {
        GridSpec::from_extent(domain_mm.map(|v| v * 1e-3), self.cell_mm.map(|v| v * 1e-3))
    }
}

/// Result of one simulation.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub curve: S11Curve,
    pub record: VoltageRecord,
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: usize,
    pub feed: FeedEdge,
    pub snap: SnapReport,
}

/// Build the engine configuration for `geom` without running it.
pub fn prepare(geom: &GeometrySpec, s: &SolverSettings) -> Result<(SimulationConfig, FeedEdge, SnapReport)> {
    let grid = s.grid_for(geom.domain)?;
    let r = rasterize(geom, &grid)?;
    let feed = r.feed.ok_or_else(|| Error::Config("geometry has no feed segment".into()))?;
    let mut materials = r.materials;
    if let Some(ohms) = s.feed_load_ohms {
        materials.lumped.push(LumpedResistor { node: feed.node, axis: feed.axis, ohms });
    }
    let mut cfg = SimulationConfig::new(materials, s.cpml, s.safety)?;
    let mut src = VoltageSource::new(feed.node, feed.axis, s.waveform);
    src.resistance = s.resistance;
    cfg.sources.push(src);
    cfg.probes.push(VoltageProbe::at(&src));
    let full = cfg.steps_for(full_window_seconds());
    cfg.steps = match s.window {
        Window::Steps { steps } => steps,
        _ => full,
    };
    Ok((cfg, feed, r.snap))
}

pub fn simulate_antenna(spec: &AntennaSpec, s: &SolverSettings, threads: Option<usize>) -> Result<SimOutcome> {
    simulate_geometry(&spec.build()?, s, threads)
}

pub fn simulate_geometry(geom: &GeometrySpec, s: &SolverSettings, threads: Option<usize>) -> Result<SimOutcome> {
    match s.precision {
        Precision::F64 => simulate_with::<f64>(geom, s, threads),
        Precision::F32 => simulate_with::<f32>(geom, s, threads),
    }
}

fn simulate_with<T: Real>(geom: &GeometrySpec, s: &SolverSettings, threads: Option<usize>) -> Result<SimOutcome> {
    let (cfg, feed, snap) = prepare(geom, s)?;
    let grid = cfg.grid;
    let mut engine = Engine::<T>::new(&cfg, threads)?;
    match s.window {
        Window::Auto { threshold, chunk } => {
            let chunk = chunk.max(1);
            let min_steps = cfg.steps_for(4.0 / s.waveform.fc);
            let d = grid.d(feed.axis);
            loop {
                let todo = chunk.min(cfg.steps - engine.steps_done());
                engine.run_steps(todo)?;
                let done = engine.steps_done();
                if done >= cfg.steps {
                    break;
                }
                if done < min_steps + chunk {
                    continue;
                }
                let r = engine.records();
                let vt = &r.sources[0];
                let peak = vt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let e = &r.probes[0].e[feed.axis.index()];
                let tail = done - chunk;
                let va = e[tail..].iter().zip(&vt[tail..]).fold(0.0f64, |m, (ei, t)| m.max((-ei * d - 0.5 * t).abs()));
                if va < threshold * peak {
                    break;
                }
            }
        }
        Window::Full | Window::Steps { .. } => engine.run_steps(cfg.steps)?,
    }
    let steps = engine.steps_done();
    let records = engine.into_records();
    let record = VoltageRecord::from_probe_records(&records, &grid, 0, 0, feed.axis);
    let curve = s11_curve(&record, s.df_hz)?;
    Ok(SimOutcome { curve, record, grid, dt: cfg.dt, steps, feed, snap })
}

impl SimOutcome {
    /// Reflected series at the feed.
    pub fn va(&self) -> Result<Vec<f64>> {
        reflected(&self.record.vr[self.feed.axis.index()], &self.record.vt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Family, FeedSegment};
    use crate::grid::Axis;

    fn feed_only(domain: [f64; 3]) -> GeometrySpec {
        let mut g = GeometrySpec::empty(domain);
        g.feed = Some(FeedSegment {
            start: [domain[0] / 2.0, domain[1] / 2.0, domain[2] / 2.0],
            axis: Axis::Z,
            length: 1.0,
        });
        g
    }

    #[test]
    fn shorted_feed_reads_zero() {
        let geom = feed_only([30.0, 30.0, 30.0]);
        let s = SolverSettings { window: Window::Steps { steps: 1200 }, ..Default::default() };
        let (mut cfg, feed, _) = prepare(&geom, &s).unwrap();
        cfg.materials.set_pec(feed.axis, feed.node, true);
        let r = crate::engine::run::<f64>(&cfg, Some(1)).unwrap();
        assert!(r.probes[0].e[feed.axis.index()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matched_load_small_domain() {
        let geom = feed_only([30.0, 30.0, 30.0]);
        let s = SolverSettings { feed_load_ohms: Some(50.0), ..Default::default() };
        let out = simulate_geometry(&geom, &s, Some(1)).unwrap();
        let va = out.va().unwrap();
        let peak = out.record.vt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = va.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(m < 0.02 * peak, "{m}");
        assert!(out.steps < out.grid.nx * 1000);
    }

    #[test]
    fn dry_preparation_of_defaults() {
        for fam in Family::ALL {
            let spec = AntennaSpec::reference_design(fam);
            let (cfg, feed, snap) = prepare(&spec.build().unwrap(), &SolverSettings::default()).unwrap();
            assert!(cfg.validate().is_ok());
            assert!(!cfg.materials.is_pec(feed.axis, feed.node));
            assert!(snap.max_error_mm() <= 0.5);
        }
    }
}
