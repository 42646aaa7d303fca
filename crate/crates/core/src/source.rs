//! Gaussian excitation, resistive voltage source and co-located probe.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec};
use crate::material::edge_conductivity;
use crate::real::Real;

/// Gaussian pulse `A exp(-2 pi^2 fc^2 (t - 1/fc)^2)`, peaking at `t = 1/fc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianWaveform {
    pub fc: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for GaussianWaveform {
    fn default() -> Self {
        GaussianWaveform { fc: 2e9, amplitude: 1.0 }
    }
}

impl GaussianWaveform {
    pub fn new(fc: f64, amplitude: f64) -> Result<Self> {
        let w = GaussianWaveform { fc, amplitude };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fc > 0.0 && self.fc.is_finite()) {
            return Err(Error::Config(format!("center frequency must be positive, got {}", self.fc)));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude must be positive, got {}", self.amplitude)));
        }
        Ok(())
    }

    #[inline]
    pub fn sample(&self, t: f64) -> f64 {
        self.amplitude * waveform_sample(self.fc, t)
    }

    pub fn peak_time(&self) -> f64 {
        1.0 / self.fc
    }

    /// `n` samples at `t = (offset + m) dt`.
    pub fn series(&self, n: usize, dt: f64, offset: f64) -> Vec<f64> {
        (0..n).map(|m| self.sample((m as f64 + offset) * dt)).collect()
    }
}

/// Unit-amplitude Gaussian pulse sample.
#[inline]
pub fn waveform_sample(fc: f64, t: f64) -> f64 {
    let u = t - 1.0 / fc;
    (-2.0 * PI * PI * fc * fc * u * u).exp()
}

/// Thevenin source on one E-edge: ideal `Vs(t)` in series with `resistance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageSource {
    pub node: [usize; 3],
    pub axis: Axis,
    pub resistance: f64,
    pub waveform: GaussianWaveform,
}

impl VoltageSource {
    pub fn new(node: [usize; 3], axis: Axis, waveform: GaussianWaveform) -> Self {
        VoltageSource { node, axis, resistance: 50.0, waveform }
    }

    /// Equivalent conductivity `dp / (Rs dA)` folded into the edge coefficients.
    pub fn conductivity(&self, grid: &GridSpec) -> f64 {
        edge_conductivity(grid, self.axis, self.resistance)
    }

    /// Impressed current density per volt, `1 / (Rs dA)`.
    pub fn current_scale(&self, grid: &GridSpec) -> f64 {
        let (a, b) = self.axis.others();
        1.0 / (self.resistance * grid.d(a) * grid.d(b))
    }

    /// Checks the edge lies inside the region `margin` cells away from every
    /// face, i.e. outside any absorbing slab.
    pub fn validate(&self, grid: &GridSpec, margin: usize) -> Result<()> {
        if !(self.resistance > 0.0 && self.resistance.is_finite()) {
            return Err(Error::Config(format!("source resistance must be positive, got {}", self.resistance)));
        }
        self.waveform.validate()?;
        check_interior(grid, self.node, Some(self.axis), margin, "source")
    }
}

/// Observer of the three E components at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageProbe {
    pub node: [usize; 3],
}

impl VoltageProbe {
    pub fn at(src: &VoltageSource) -> Self {
        VoltageProbe { node: src.node }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        check_interior(grid, self.node, None, 0, "probe")
    }
}

pub(crate) fn check_interior(
    grid: &GridSpec,
    node: [usize; 3],
    axis: Option<Axis>,
    margin: usize,
    what: &str,
) -> Result<()> {
    for a in Axis::ALL {
        let n = grid.n(a);
        let hi = if axis == Some(a) { n - 1 } else { n };
        let v = node[a.index()];
        if v > hi {
            return Err(Error::Config(format!("{what} index {node:?} lies outside the grid")));
        }
        let top = if axis == Some(a) { v + 1 } else { v };
        if v < margin || top + margin > n {
            return Err(Error::Config(format!(
                "{what} at {node:?} lies inside the absorbing boundary ({margin} cells per face)"
            )));
        }
    }
    Ok(())
}

/// Inject the impressed current of one source into an already updated edge.
///
/// `cb` is the edge's E coefficient (including the source conductivity) and
/// `vs` the source voltage at the half step.
#[inline]
pub fn apply_voltage_source<T: Real>(e: T, cb: T, vs: f64, current_scale: f64) -> T {
    e - cb * T::of(vs * current_scale)
}

/// Edge voltage `V = -E d`.
pub fn probe_voltage(e: &[f64], edge_length: f64) -> Vec<f64> {
    e.iter().map(|v| -v * edge_length).collect()
}

/// Time series recorded at one probe: the three E components at its node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub node: [usize; 3],
    pub e: [Vec<f64>; 3],
}

/// Everything a run records: per-source waveform and per-probe fields.
///
/// Sample `m` is taken after iteration `m`, at `t = (m + 1) dt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeRecords {
    pub dt: f64,
    pub sources: Vec<Vec<f64>>,
    pub probes: Vec<ProbeRecord>,
}

impl ProbeRecords {
    pub fn len(&self) -> usize {
        self.sources.first().map(Vec::len).or_else(|| self.probes.first().map(|p| p.e[0].len())).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|m| (m as f64 + 1.0) * self.dt).collect()
    }

    /// Probe voltages per axis for probe `p`.
    pub fn voltages(&self, p: usize, grid: &GridSpec) -> [Vec<f64>; 3] {
        let rec = &self.probes[p];
        Axis::ALL.map(|a| probe_voltage(&rec.e[a.index()], grid.d(a)))
    }

    /// CSV with columns `time, Vt, Vr_x, Vr_y, Vr_z` for source `s`, probe `p`.
    pub fn write_csv(&self, s: usize, p: usize, grid: &GridSpec, path: &Path) -> Result<()> {
        let v = self.voltages(p, grid);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "time,Vt,Vr_x,Vr_y,Vr_z")?;
        for (m, t) in self.times().iter().enumerate() {
            writeln!(out, "{:e},{:e},{:e},{:e},{:e}", t, self.sources[s][m], v[0][m], v[1][m], v[2][m])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gaussian_reference_values() {
        assert_eq!(waveform_sample(2e9, 0.5e-9), 1.0);
        let oracle0 = (-2.0 * PI * PI).exp();
        assert_relative_eq!(waveform_sample(2e9, 0.0), oracle0, max_relative = 1e-12);
        assert_relative_eq!(waveform_sample(2e9, 0.0), 2.6754e-9, max_relative = 1e-4);
        assert_relative_eq!(waveform_sample(2e9, 0.75e-9), 7.192e-3, max_relative = 1e-3);
    }

    #[test]
    fn probe_voltage_sign() {
        let v = probe_voltage(&[-1000.0, 0.0], 0.2e-3);
        assert_relative_eq!(v[0], 0.2, max_relative = 1e-12);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn source_scales() {
        let g = GridSpec::new(20, 20, 20, 1e-3, 2e-3, 0.5e-3).unwrap();
        let s = VoltageSource::new([10, 10, 10], Axis::Z, GaussianWaveform::default());
        assert_relative_eq!(s.conductivity(&g), 0.5e-3 / (50.0 * 2e-6), max_relative = 1e-12);
        assert_relative_eq!(s.current_scale(&g), 1.0 / (50.0 * 2e-6), max_relative = 1e-12);
    }

    #[test]
    fn source_in_boundary_rejected() {
        let g = GridSpec::new(40, 40, 40, 1e-3, 1e-3, 1e-3).unwrap();
        let w = GaussianWaveform::default();
        assert!(VoltageSource::new([20, 20, 20], Axis::Z, w).validate(&g, 10).is_ok());
        assert!(VoltageSource::new([5, 20, 20], Axis::Z, w).validate(&g, 10).is_err());
        assert!(VoltageSource::new([20, 20, 30], Axis::Z, w).validate(&g, 10).is_err());
        assert!(VoltageSource::new([20, 20, 29], Axis::Z, w).validate(&g, 10).is_ok());
        assert!(VoltageSource::new([20, 20, 40], Axis::Z, w).validate(&g, 0).is_err());
        let mut bad = VoltageSource::new([20, 20, 20], Axis::Z, w);
        bad.resistance = 0.0;
        assert!(bad.validate(&g, 10).is_err());
    }

    #[test]
    fn empty_records() {
        let r = ProbeRecords::default();
        assert!(r.is_empty());
        assert!(r.times().is_empty());
    }

    proptest! {
        #[test]
        fn waveform_bounded(fc in 1e8f64..1e10, t in 0.0f64..1e-8) {
            let v = waveform_sample(fc, t);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= 1.0);
        }

        #[test]
        fn peak_sample_nearest_one_over_fc(fc in 5e8f64..5e9, frac in 0.001f64..0.05) {
            let dt = frac / fc;
            let w = GaussianWaveform { fc, amplitude: 1.0 };
            let s = w.series((3.0 / (fc * dt)) as usize, dt, 0.0);
            let argmax = s
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            let nearest = (1.0 / (fc * dt)).round() as usize;
            prop_assert_eq!(argmax, nearest);
        }

        #[test]
        fn probe_voltage_linear(e in proptest::collection::vec(-1e3f64..1e3, 1..50), a in -10.0f64..10.0) {
            let scaled: Vec<f64> = e.iter().map(|v| v * a).collect();
            let v1 = probe_voltage(&e, 1e-3);
            let v2 = probe_voltage(&scaled, 1e-3);
            for (x, y) in v1.iter().zip(&v2) {
                prop_assert!((x * a - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
