//! Reflected-wave separation, spectral ratio, dB conversion and resampling.

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec};
use crate::source::{probe_voltage, ProbeRecords};

pub const S11_POINTS: usize = 201;
pub const S11_STEP_HZ: f64 = 30e6;
pub const S11_MAX_HZ: f64 = 6e9;
pub const DB_FLOOR: f64 = -120.0;
/// Bins where `|DFT(Vt)|` falls below this fraction of its peak are masked.
pub const MASK_RATIO: f64 = 1e-12;

/// Source and receiver voltages of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageRecord {
    pub dt: f64,
    pub vt: Vec<f64>,
    pub vr: [Vec<f64>; 3],
    pub axis: Axis,
}

impl VoltageRecord {
    /// Record of source `s` seen by probe `p`, polarized along `axis`.
    pub fn from_probe_records(records: &ProbeRecords, grid: &GridSpec, s: usize, p: usize, axis: Axis) -> Self {
        VoltageRecord { dt: records.dt, vt: records.sources[s].clone(), vr: records.voltages(p, grid), axis }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("timestep must be positive, got {}", self.dt)));
        }
        for v in &self.vr {
            if v.len() != self.vt.len() {
                return Err(Error::LengthMismatch(format!("Vt has {} samples, Vr has {}", self.vt.len(), v.len())));
            }
        }
        Ok(())
    }

    /// Source voltage split per polarization: `Vt` on the source axis, 0 elsewhere.
    pub fn vt_axis(&self, axis: Axis) -> Vec<f64> {
        if axis == self.axis {
            self.vt.clone()
        } else {
            vec![0.0; self.vt.len()]
        }
    }

    /// Reflected series on the source polarization.
    pub fn va(&self) -> Result<Vec<f64>> {
        reflected(&self.vr[self.axis.index()], &self.vt)
    }
}

/// `Va = Vr - Vt / 2`.
pub fn reflected(vr: &[f64], vt: &[f64]) -> Result<Vec<f64>> {
    if vr.len() != vt.len() {
        return Err(Error::LengthMismatch(format!("Vr has {} samples, Vt has {}", vr.len(), vt.len())));
    }
    Ok(vr.iter().zip(vt).map(|(r, t)| r - 0.5 * t).collect())
}

/// Smallest power of two holding `n` samples and resolving `df` at `dt`.
pub fn padded_len(n: usize, dt: f64, df: f64) -> usize {
    let need = (1.0 / (df * dt)).ceil() as usize;
    need.max(n).max(1).next_power_of_two()
}

/// Zero-padded forward DFT of `x` with `n_pad` points.
pub fn spectrum(x: &[f64], n_pad: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n_pad, Complex::new(0.0, 0.0));
    let fft = FftPlanner::new().plan_fft_forward(n_pad);
    fft.process(&mut buf);
    buf
}

/// Linear `|S11|` on the padded frequency axis, bins `0..=n_pad/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub mag: Vec<f64>,
}

/// `|DFT(Va)| / |DFT(Vt)|` with masking of spectral nulls of `Vt`.
pub fn spectral_ratio(va: &[f64], vt: &[f64], dt: f64, df: f64) -> Result<Spectrum> {
    if va.len() != vt.len() {
        return Err(Error::LengthMismatch(format!("Va has {} samples, Vt has {}", va.len(), vt.len())));
    }
    if !(df > 0.0 && dt > 0.0) {
        return Err(Error::Config("frequency step and timestep must be positive".into()));
    }
    let n_pad = padded_len(vt.len(), dt, df);
    let a = spectrum(va, n_pad);
    let t = spectrum(vt, n_pad);
    let half = n_pad / 2 + 1;
    let peak = t[..half].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let fstep = 1.0 / (n_pad as f64 * dt);
    let mut freqs = Vec::with_capacity(half);
    let mut mag = Vec::with_capacity(half);
    for k in 0..half {
        freqs.push(k as f64 * fstep);
        let d = t[k].norm();
        mag.push(if d < MASK_RATIO * peak || d == 0.0 { 0.0 } else { a[k].norm() / d });
    }
    Ok(Spectrum { freqs, mag })
}

/// Spectrum of the reflected wave relative to the source.
pub fn s11_spectrum(rec: &VoltageRecord, df: f64) -> Result<Spectrum> {
    rec.validate()?;
    spectral_ratio(&rec.va()?, &rec.vt, rec.dt, df)
}

/// `20 log10(mag)`, clamped at the floor.
pub fn to_db(mag: f64) -> f64 {
    if mag > 0.0 {
        (20.0 * mag.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// `|S11|` in dB on the fixed 0 to 6 GHz, 30 MHz grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Curve {
    pub freqs: Vec<f64>,
    pub db: Vec<f64>,
}

/// The 201 output frequencies.
pub fn s11_frequencies() -> Vec<f64> {
    (0..S11_POINTS).map(|i| i as f64 * S11_STEP_HZ).collect()
}

impl S11Curve {
    pub fn from_db(db: Vec<f64>) -> Result<Self> {
        let c = S11Curve { freqs: s11_frequencies(), db };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.db.len() != S11_POINTS || self.freqs.len() != S11_POINTS {
            return Err(Error::LengthMismatch(format!("S11 curve needs {S11_POINTS} points, got {}", self.db.len())));
        }
        if self.db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("S11 curve has non-finite values".into()));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(self.to_csv().as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,s11_db\n");
        for (f, d) in self.freqs.iter().zip(&self.db) {
            s.push_str(&format!("{f},{d}\n"));
        }
        s
    }
}

/// Linear interpolation of `mag` onto the output grid, then dB.
pub fn resample_201(freqs: &[f64], mag: &[f64]) -> Result<S11Curve> {
    if freqs.len() != mag.len() {
        return Err(Error::LengthMismatch(format!("{} frequencies for {} magnitudes", freqs.len(), mag.len())));
    }
    let top = freqs.last().copied().unwrap_or(0.0);
    if freqs.is_empty() || freqs[0] > 0.0 || top < S11_MAX_HZ * (1.0 - 1e-12) {
        return Err(Error::Coverage { needed_hz: S11_MAX_HZ, available_hz: top });
    }
    let out = s11_frequencies();
    let mut db = Vec::with_capacity(S11_POINTS);
    let mut lo = 0usize;
    for &f in &out {
        while lo + 1 < freqs.len() && freqs[lo + 1] <= f {
            lo += 1;
        }
        let v = if freqs[lo] == f || lo + 1 == freqs.len() {
            mag[lo]
        } else {
            let w = (f - freqs[lo]) / (freqs[lo + 1] - freqs[lo]);
            mag[lo] + w * (mag[lo + 1] - mag[lo])
        };
        db.push(to_db(v));
    }
    Ok(S11Curve { freqs: out, db })
}

/// The full chain: record, reflected wave, ratio, resample, dB.
pub fn s11_curve(rec: &VoltageRecord, df: f64) -> Result<S11Curve> {
    let s = s11_spectrum(rec, df)?;
    resample_201(&s.freqs, &s.mag)
}

/// Grid point of minimum dB within `[lo, hi]` Hz; ties go to the lower frequency.
pub fn resonance_minimum(curve: &S11Curve, band: (f64, f64)) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, &d) in curve.freqs.iter().zip(&curve.db) {
        if f < band.0 || f > band.1 {
            continue;
        }
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((f, d));
        }
    }
    best.ok_or(Error::EmptyBand(format!("no grid point in [{}, {}] Hz", band.0, band.1)))
}

/// Sub-bin resonance estimate on a dense spectrum: minimum of the dB
/// magnitude within `band` refined by a parabola through its neighbours.
pub fn refined_resonance(s: &Spectrum, band: (f64, f64)) -> Result<f64> {
    let mut best: Option<(usize, f64)> = None;
    for (k, (&f, &m)) in s.freqs.iter().zip(&s.mag).enumerate() {
        if f < band.0 || f > band.1 {
            continue;
        }
        let d = to_db(m);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((k, d));
        }
    }
    let (k, _) = best.ok_or(Error::EmptyBand(format!("no grid point in [{}, {}] Hz", band.0, band.1)))?;
    if k == 0 || k + 1 >= s.freqs.len() {
        return Ok(s.freqs[k]);
    }
    let (y0, y1, y2) = (to_db(s.mag[k - 1]), to_db(s.mag[k]), to_db(s.mag[k + 1]));
    let denom = y0 - 2.0 * y1 + y2;
    let step = s.freqs[k + 1] - s.freqs[k];
    if denom <= 0.0 {
        return Ok(s.freqs[k]);
    }
    let shift = 0.5 * (y0 - y2) / denom;
    Ok(s.freqs[k] + shift.clamp(-0.5, 0.5) * step)
}

/// Voltages of probe `p` per axis, convenience for exports.
pub fn probe_voltages(records: &ProbeRecords, grid: &GridSpec, p: usize) -> [Vec<f64>; 3] {
    Axis::ALL.map(|a| probe_voltage(&records.probes[p].e[a.index()], grid.d(a)))
}
