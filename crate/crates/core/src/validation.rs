//! Physics self-checks shared by the `validate` command and the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::cpml::CpmlConfig;
use crate::engine::{Engine, SimulationConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_strip_dipole, AntennaSpec, Family, FeedSegment, GeometrySpec};
use crate::grid::{Axis, GridSpec, C0, DEFAULT_SAFETY};
use crate::material::MaterialGrid;
use crate::pipeline::{simulate_antenna, simulate_geometry, SolverSettings, Window};
use crate::real::Precision;
use crate::source::{GaussianWaveform, VoltageProbe, VoltageSource};
use crate::sparams::{refined_resonance, spectral_ratio};

/// One named check with its measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub expected: String,
}

impl Check {
    fn new(name: &str, passed: bool, measured: f64, expected: impl Into<String>) -> Self {
        Check { name: name.into(), passed, measured, expected: expected.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub threads: usize,
    pub precision: Precision,
    pub available_cores: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub threads: Option<usize>,
    pub precision: Precision,
    /// Courant factor used by the stability check.
    pub safety: f64,
    /// Include the 0.25 mm dipole in the convergence check.
    pub fine: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { threads: None, precision: Precision::F64, safety: DEFAULT_SAFETY, fine: true }
    }
}

/// Largest S11 (dB) over the output grid with a matched load across the feed
/// of an otherwise empty 80 x 80 x 40 mm domain.
pub fn matched_load_max_db(cell_mm: f64, threads: Option<usize>) -> Result<f64> {
    let mut g = GeometrySpec::empty([80.0, 80.0, 40.0]);
    g.feed = Some(FeedSegment { start: [40.0, 40.0, 20.0], axis: Axis::Y, length: cell_mm });
    let s = SolverSettings { feed_load_ohms: Some(50.0), ..SolverSettings::default().with_cell(cell_mm) };
    let out = simulate_geometry(&g, &s, threads)?;
    Ok(out.curve.db.iter().copied().fold(f64::MIN, f64::max))
}

/// Boundary reflection as a fraction of the incident peak, by subtracting a
/// run in a domain large enough that its boundaries stay causally silent.
pub fn cpml_reflection(cell_mm: f64, cpml: CpmlConfig, threads: Option<usize>) -> Result<f64> {
    let d = cell_mm * 1e-3;
    let small = 40usize;
    let offset = 5usize;
    let probe_run = |n: usize, steps: usize| -> Result<Vec<f64>> {
        let grid = GridSpec::new(n, n, n, d, d, d)?;
        let mut cfg = SimulationConfig::new(MaterialGrid::vacuum(grid), cpml, DEFAULT_SAFETY)?;
        let c = n / 2;
        cfg.sources.push(VoltageSource::new([c, c, c], Axis::Z, GaussianWaveform::default()));
        cfg.probes.push(VoltageProbe { node: [c + offset, c, c] });
        // The window only needs the pulse to clear the probe, not the full launch span.
        cfg.steps = 0;
        let mut e = Engine::<f64>::new(&cfg, threads)?;
        e.run_steps(steps)?;
        Ok(e.into_records().probes[0].e[Axis::Z.index()].clone())
    };
    let dt = crate::grid::cfl_timestep(&GridSpec::new(4, 4, 4, d, d, d)?, DEFAULT_SAFETY)?;
    let steps = (2.5 / GaussianWaveform::default().fc / dt).ceil() as usize;
    // Round trip from the probe to the reference boundary must exceed the window.
    let reach = (C0 * dt * steps as f64 / d).ceil() as usize;
    let big = 2 * (reach / 2 + offset + cpml.thickness + 2);
    let test = probe_run(small, steps)?;
    let reference = probe_run(big, steps)?;
    let peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = test.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / peak)
}

/// Resonance of a 60 mm, 1 mm wide strip dipole in free space (Hz).
pub fn strip_dipole_resonance(cell_mm: f64, threads: Option<usize>, precision: Precision) -> Result<f64> {
    let g = build_strip_dipole(60.0, 1.0, cell_mm.max(1.0), cell_mm, CpmlConfig::default().thickness, 10.0)?;
    let s = SolverSettings { precision, ..SolverSettings::default().with_cell(cell_mm) };
    let out = simulate_geometry(&g, &s, threads)?;
    let sp = spectral_ratio(&out.va()?, &out.record.vt, out.dt, 1e6)?;
    refined_resonance(&sp, (0.5e9, 6e9))
}

/// S11 CSV of a short coarse IFA run.
pub fn ifa_csv(threads: Option<usize>, precision: Precision) -> Result<String> {
    let s = SolverSettings { precision, window: Window::Steps { steps: 1500 }, ..SolverSettings::default() };
    Ok(simulate_antenna(&AntennaSpec::reference_design(Family::Ifa), &s, threads)?.curve.to_csv())
}

/// Whether `steps` updates at Courant factor `safety` stay finite.
pub fn stays_stable(safety: f64, steps: usize, threads: Option<usize>) -> Result<bool> {
    let grid = GridSpec::new(30, 30, 30, 1e-3, 1e-3, 1e-3)?;
    let mut cfg = SimulationConfig::new_unchecked(MaterialGrid::vacuum(grid), CpmlConfig::default(), safety)?;
    cfg.allow_unstable = true;
    cfg.sources.push(VoltageSource::new([15, 15, 15], Axis::Z, GaussianWaveform::default()));
    let mut e = Engine::<f64>::new(&cfg, threads)?;
    match e.run_steps(steps) {
        Ok(()) => Ok(true),
        Err(Error::Instability { .. }) => Ok(false),
        Err(other) => Err(other),
    }
}

/// Run the whole suite.
pub fn validate(opts: &ValidationOptions) -> Result<ValidationReport> {
    let t = opts.threads;
    let mut checks = Vec::new();

    let db = matched_load_max_db(1.0, t)?;
    checks.push(Check::new("matched_load_max_s11_db", db <= -20.0, db, "<= -20"));

    let r = cpml_reflection(2.0, CpmlConfig::default(), t)?;
    checks.push(Check::new("cpml_reflection_ratio", r < 0.01, r, "< 0.01"));

    let stable = stays_stable(opts.safety, 2000, t)?;
    checks.push(Check::new("stability", stable, opts.safety, "finite fields after 2000 steps"));

    let target = 0.48 * C0 / 0.06;
    let f05 = strip_dipole_resonance(0.5, t, opts.precision)?;
    let err = (f05 - target).abs() / target;
    checks.push(Check::new("dipole_resonance_hz", err <= 0.10, f05, format!("{target:.4e} +/- 10%")));

    let a = ifa_csv(Some(1), opts.precision)?;
    let n = opts.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(2, |v| v.get())).max(2);
    let b = ifa_csv(Some(n), opts.precision)?;
    checks.push(Check::new("determinism_threads", a == b, n as f64, "identical CSV for 1 and N threads"));

    let f10 = strip_dipole_resonance(1.0, t, opts.precision)?;
    if opts.fine {
        let f025 = strip_dipole_resonance(0.25, t, opts.precision)?;
        let ok = (f05 - f025).abs() < (f10 - f025).abs();
        checks.push(Check::new("convergence", ok, (f05 - f025).abs(), format!("< {:.4e}", (f10 - f025).abs())));
    } else {
        let ok = (f10 - f05).abs() < 0.1 * target;
        checks.push(Check::new("convergence_coarse", ok, (f10 - f05).abs(), format!("< {:.4e}", 0.1 * target)));
    }

    Ok(ValidationReport {
        threads: t.unwrap_or(0),
        precision: opts.precision,
        available_cores: std::thread::available_parallelism().map_or(1, |v| v.get()),
        checks,
    })
}
