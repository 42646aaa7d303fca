//! Deterministic parameter sampling, batch simulation and the ANTD container.
//!
//! File layout (little endian):
//!
//! ```text
//! "ANTD" | version u8 | header_len u32 | header JSON
//! record * count      (fixed stride)
//! crc32 u32           (of the record block)
//! ```
//!
//! Record: `index u64 | seed u64 | status u32 | params f64 * P | s11 f32 * 201`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AntennaSpec, DipoleLayout, Family, IfaLayout};
use crate::pipeline::{simulate_antenna, SolverSettings};
use crate::sparams::{DB_FLOOR, S11_MAX_HZ, S11_POINTS, S11_STEP_HZ};

pub const MAGIC: &[u8; 4] = b"ANTD";
pub const VERSION: u8 = 1;
/// Bytes of a record besides parameters and S11 values.
pub const RECORD_META_BYTES: usize = 8 + 8 + 4;
pub const MAX_ATTEMPTS: usize = 1000;

pub fn record_stride(param_count: usize) -> usize {
    RECORD_META_BYTES + 8 * param_count + 4 * S11_POINTS
}

/// Closed interval per parameter (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingRanges {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SamplingRanges {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        let r = SamplingRanges { lo: bounds.iter().map(|b| b.0).collect(), hi: bounds.iter().map(|b| b.1).collect() };
        r.validate()?;
        Ok(r)
    }

    /// Default ranges, chosen so most draws fit the default board.
    pub fn default_for(family: Family) -> Self {
        let b: &[(f64, f64)] = match family {
            Family::Ifa => &[(18.0, 42.0), (7.2, 16.8)],
            Family::DualBandIfa => &[(20.0, 40.0), (30.0, 47.0), (10.0, 15.0), (4.0, 8.0)],
            Family::MultiBandDipole => &[(24.0, 50.0), (15.0, 35.0), (21.0, 49.0), (9.0, 21.0)],
        };
        SamplingRanges::new(b).expect("default ranges are valid")
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::Config("sampling ranges need matching, non-empty lo/hi lists".into()));
        }
        for (i, (l, h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::Config(format!("sampling range {i} is invalid: [{l}, {h}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.len() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of record `index`, a pure function of `(master_seed, index)`.
pub fn record_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index)
}

fn draw(rng: &mut ChaCha8Rng, r: &SamplingRanges) -> Vec<f64> {
    r.lo.iter()
        .zip(&r.hi)
        .map(|(&l, &h)| {
            let u: f64 = rng.random();
            if l == h {
                l
            } else {
                (l + (h - l) * u).min(h)
            }
        })
        .collect()
}

/// First uniform draw for record `index`.
pub fn sample_params(ranges: &SamplingRanges, master_seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(record_seed(master_seed, index));
    draw(&mut rng, ranges)
}

/// Draw until the template's builder accepts the parameters.
///
/// Returns the parameters and the number of rejected draws.
pub fn sample_valid(
    template: &AntennaSpec,
    ranges: &SamplingRanges,
    master_seed: u64,
    index: u64,
) -> Result<(Vec<f64>, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(record_seed(master_seed, index));
    for attempt in 0..MAX_ATTEMPTS {
        let p = draw(&mut rng, ranges);
        let mut spec = template.clone();
        spec.params = p.clone();
        if spec.build().is_ok() {
            return Ok((p, attempt as u32));
        }
    }
    Err(Error::Config(format!(
        "no valid geometry for record {index} after {MAX_ATTEMPTS} draws; narrow the sampling ranges"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRecord {
    pub index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: u64,
    pub rejected: u32,
}

/// JSON header of an ANTD file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub family: Family,
    pub family_id: u32,
    pub param_names: Vec<String>,
    pub ranges: SamplingRanges,
    pub ifa_layout: IfaLayout,
    pub dipole_layout: DipoleLayout,
    pub solver: SolverSettings,
    pub domain_mm: [f64; 3],
    pub cells: [usize; 3],
    pub master_seed: u64,
    pub requested: usize,
    pub count: usize,
    pub stride: usize,
    pub failed: Vec<FailedRecord>,
    pub rejections: Vec<Rejection>,
    pub s11_points: usize,
    pub s11_step_hz: f64,
    pub s11_max_hz: f64,
    pub s11_floor_db: f64,
    pub generator: String,
}

impl DatasetHeader {
    pub fn param_count(&self) -> usize {
        self.param_names.len()
    }

    pub fn total_rejections(&self) -> u64 {
        self.rejections.iter().map(|r| r.rejected as u64).sum()
    }
}

/// One stored sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub index: u64,
    pub seed: u64,
    pub status: u32,
    pub params: Vec<f64>,
    pub s11: Vec<f32>,
}

impl DatasetRecord {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.status.to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for v in &self.s11 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn decode(b: &[u8], p: usize) -> Self {
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let params = (0..p).map(|i| f64::from_le_bytes(b[20 + 8 * i..28 + 8 * i].try_into().unwrap())).collect();
        let base = 20 + 8 * p;
        let s11 = (0..S11_POINTS)
            .map(|i| f32::from_le_bytes(b[base + 4 * i..base + 4 * i + 4].try_into().unwrap()))
            .collect();
        DatasetRecord {
            index: u64_at(0),
            seed: u64_at(8),
            status: u32::from_le_bytes(b[16..20].try_into().unwrap()),
            params,
            s11,
        }
    }
}

/// Serialize a complete file.
pub fn encode(header: &DatasetHeader, records: &[DatasetRecord]) -> Result<Vec<u8>> {
    let p = header.param_count();
    if header.count != records.len() || header.stride != record_stride(p) {
        return Err(Error::Config("header count or stride does not match the records".into()));
    }
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(9 + json.len() + records.len() * header.stride + 4);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let start = out.len();
    for r in records {
        if r.params.len() != p || r.s11.len() != S11_POINTS {
            return Err(Error::Dimension(format!("record {} has the wrong shape", r.index)));
        }
        r.encode(&mut out);
    }
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn write(path: &Path, header: &DatasetHeader, records: &[DatasetRecord]) -> Result<()> {
    let bytes = encode(header, records)?;
    let tmp = path.with_extension("antd.partial");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A verified, fully loaded dataset.
#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    block: Vec<u8>,
}

impl DatasetFile {
    pub fn open(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(m.to_string());
        if bytes.len() < 9 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing ANTD magic"));
        }
        if bytes[4] != VERSION {
            return Err(Error::Corrupt(format!("unsupported version {}", bytes[4])));
        }
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let hend = 9usize.checked_add(hlen).ok_or_else(|| corrupt("header length overflow"))?;
        if bytes.len() < hend + 4 {
            return Err(corrupt("file truncated inside the header"));
        }
        let header: DatasetHeader =
            serde_json::from_slice(&bytes[9..hend]).map_err(|e| Error::Corrupt(format!("unreadable header: {e}")))?;
        if header.stride != record_stride(header.param_count()) {
            return Err(corrupt("header stride does not match the parameter count"));
        }
        let block_len = header.count * header.stride;
        if bytes.len() != hend + block_len + 4 {
            return Err(Error::Corrupt(format!(
                "expected {} bytes for {} records, found {}",
                hend + block_len + 4,
                header.count,
                bytes.len()
            )));
        }
        let block = &bytes[hend..hend + block_len];
        let crc = u32::from_le_bytes(bytes[hend + block_len..].try_into().unwrap());
        if crc32fast::hash(block) != crc {
            return Err(corrupt("record block CRC mismatch"));
        }
        Ok(DatasetFile { header, block: block.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn read_record(&self, index: usize) -> Result<DatasetRecord> {
        if index >= self.header.count {
            return Err(Error::OutOfRange { index, count: self.header.count });
        }
        let s = self.header.stride;
        Ok(DatasetRecord::decode(&self.block[index * s..(index + 1) * s], self.header.param_count()))
    }

    pub fn records(&self) -> Vec<DatasetRecord> {
        (0..self.len()).map(|i| self.read_record(i).expect("index in range")).collect()
    }

    /// S11 rows (features) and parameter rows (targets).
    pub fn matrices(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        self.records().into_iter().map(|r| (r.s11.iter().map(|&v| v as f64).collect(), r.params)).unzip()
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        let mut cols = vec!["index".to_string()];
        cols.extend(self.header.param_names.iter().cloned());
        cols.extend((0..S11_POINTS).map(|i| format!("s11_{i}")));
        writeln!(out, "{}", cols.join(","))?;
        for r in self.records() {
            let mut row = vec![r.index.to_string()];
            row.extend(r.params.iter().map(|v| v.to_string()));
            row.extend(r.s11.iter().map(|v| v.to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A simulated record or the solver error that replaced it.
pub type RecordOutcome = std::result::Result<DatasetRecord, String>;

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerateRequest {
    pub template: AntennaSpec,
    pub ranges: SamplingRanges,
    pub count: usize,
    pub settings: SolverSettings,
    pub master_seed: u64,
}

impl GenerateRequest {
    pub fn new(family: Family, count: usize, settings: SolverSettings, master_seed: u64) -> Self {
        GenerateRequest {
            template: AntennaSpec::reference_design(family),
            ranges: SamplingRanges::default_for(family),
            count,
            settings,
            master_seed,
        }
    }

    /// Header for this request before any simulation has run.
    pub fn header(&self) -> Result<DatasetHeader> {
        let fam = self.template.family;
        if self.ranges.len() != fam.param_count() {
            return Err(Error::Config(format!(
                "{} needs {} sampling ranges, got {}",
                fam,
                fam.param_count(),
                self.ranges.len()
            )));
        }
        self.ranges.validate()?;
        let domain = self.template.domain();
        let grid = self.settings.grid_for(domain)?;
        Ok(DatasetHeader {
            family: fam,
            family_id: fam.id(),
            param_names: fam.param_names().iter().map(|s| s.to_string()).collect(),
            ranges: self.ranges.clone(),
            ifa_layout: self.template.ifa,
            dipole_layout: self.template.dipole,
            solver: self.settings,
            domain_mm: domain,
            cells: grid.cells(),
            master_seed: self.master_seed,
            requested: self.count,
            count: 0,
            stride: record_stride(fam.param_count()),
            failed: Vec::new(),
            rejections: Vec::new(),
            s11_points: S11_POINTS,
            s11_step_hz: S11_STEP_HZ,
            s11_max_hz: S11_MAX_HZ,
            s11_floor_db: DB_FLOOR,
            generator: format!("antfdtd {}", env!("CARGO_PKG_VERSION")),
        })
    }

    /// Simulate one record. Sampling errors are fatal, solver errors are not.
    pub fn simulate_record(&self, index: u64) -> Result<(RecordOutcome, u32)> {
        let (params, rejected) = sample_valid(&self.template, &self.ranges, self.master_seed, index)?;
        let mut spec = self.template.clone();
        spec.params = params.clone();
        let rec = match simulate_antenna(&spec, &self.settings, Some(1)) {
            Ok(out) => Ok(DatasetRecord {
                index,
                seed: record_seed(self.master_seed, index),
                status: 0,
                params,
                s11: out.curve.db.iter().map(|&v| v as f32).collect(),
            }),
            Err(e) if e.exit_code() == 2 => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        Ok((rec, rejected))
    }
}

/// Outcome of [`generate`].
#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

impl GenerateReport {
    pub fn bytes(&self) -> Result<Vec<u8>> {
        encode(&self.header, &self.records)
    }
}

/// Simulate `count` sampled antennas on `parallelism` workers and assemble
/// the dataset in index order. `progress` is called once per finished record.
pub fn generate(req: &GenerateRequest, parallelism: usize, progress: &(dyn Fn(u64) + Sync)) -> Result<GenerateReport> {
    if req.count == 0 {
        return Err(Error::Config("dataset count must be at least 1".into()));
    }
    let mut header = req.header()?;
    // Plain worker threads pulling indices from a counter. Nesting the
    // engine's own pool inside a rayon worker would let that worker steal
    // further records while it waits, interleaving many simulations.
    let next = AtomicU64::new(0);
    type Slot = Mutex<Option<Result<(RecordOutcome, u32)>>>;
    let slots: Vec<Slot> = (0..req.count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, req.count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= req.count as u64 {
                    break;
                }
                let r = req.simulate_record(i);
                *slots[i as usize].lock().unwrap() = Some(r);
                progress(i);
            });
        }
    });
    let results = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every index is simulated"));
    let mut records = Vec::new();
    for (i, r) in results.enumerate() {
        let (rec, rejected) = r?;
        if rejected > 0 {
            header.rejections.push(Rejection { index: i as u64, rejected });
        }
        match rec {
            Ok(rec) => records.push(rec),
            Err(error) => header.failed.push(FailedRecord { index: i as u64, error }),
        }
    }
    header.count = records.len();
    Ok(GenerateReport { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Window;

    fn toy_header(count: usize) -> DatasetHeader {
        let mut h = GenerateRequest::new(Family::DualBandIfa, count, SolverSettings::default(), 7).header().unwrap();
        h.count = count;
        h
    }

    fn toy_records(n: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| DatasetRecord {
                index: i as u64,
                seed: record_seed(7, i as u64),
                status: 0,
                params: vec![i as f64, 1.5, -2.25, 1e-3],
                s11: (0..201).map(|k| -(k as f32) * 0.1 - i as f32).collect(),
            })
            .collect()
    }

    #[test]
    fn stride_formula() {
        assert_eq!(record_stride(4), 8 * 4 + 4 * 201 + 20);
        assert_eq!(record_stride(4), 856);
    }

    #[test]
    fn round_trip_bitwise() {
        let recs = toy_records(10);
        let h = toy_header(10);
        let bytes = encode(&h, &recs).unwrap();
        let f = DatasetFile::decode(&bytes).unwrap();
        assert_eq!(f.header, h);
        assert_eq!(f.records(), recs);
        assert!(matches!(f.read_record(10), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn size_matches_stride_formula() {
        let h = toy_header(1800);
        let proto = toy_records(1).remove(0);
        let recs: Vec<_> = (0..1800u64).map(|i| DatasetRecord { index: i, ..proto.clone() }).collect();
        let bytes = encode(&h, &recs).unwrap();
        let json = serde_json::to_vec(&h).unwrap();
        assert_eq!(bytes.len(), 9 + json.len() + 1800 * 856 + 4);
        assert_eq!(DatasetFile::decode(&bytes).unwrap().header.count, 1800);
    }

    #[test]
    fn truncation_and_flips_detected() {
        let bytes = encode(&toy_header(3), &toy_records(3)).unwrap();
        for cut in [1, 4, 100, bytes.len() - 1] {
            assert!(matches!(DatasetFile::decode(&bytes[..bytes.len() - cut]), Err(Error::Corrupt(_))));
        }
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 10] ^= 1;
        assert!(matches!(DatasetFile::decode(&flipped), Err(Error::Corrupt(_))));
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let f = DatasetFile::decode(&encode(&toy_header(4), &toy_records(4)).unwrap()).unwrap();
        let p = dir.path().join("d.csv");
        f.export_csv(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 1 + 4 + 201);
    }

    #[test]
    fn degenerate_ranges_give_constant() {
        let r = SamplingRanges::new(&[(3.0, 3.0), (5.5, 5.5)]).unwrap();
        for i in 0..20 {
            assert_eq!(sample_params(&r, 99, i), vec![3.0, 5.5]);
        }
    }

    #[test]
    fn sampling_deterministic_and_order_free() {
        let r = SamplingRanges::default_for(Family::DualBandIfa);
        let fwd: Vec<_> = (0..50).map(|i| sample_params(&r, 5, i)).collect();
        let rev: Vec<_> = (0..50).rev().map(|i| sample_params(&r, 5, i)).collect();
        assert_eq!(fwd, rev.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(sample_params(&r, 5, 0), sample_params(&r, 6, 0));
    }

    #[test]
    fn uniform_statistics() {
        let r = SamplingRanges::new(&[(0.0, 1.0)]).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|i| sample_params(&r, 2024, i)[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let min = xs.iter().cloned().fold(f64::MAX, f64::min);
        let max = xs.iter().cloned().fold(f64::MIN, f64::max);
        assert!((mean - 0.5).abs() < 0.02);
        assert!((0.0..=0.01).contains(&min));
        assert!((0.99..=1.0).contains(&max));
    }

    #[test]
    fn rejection_sampling_respects_builder() {
        let t = AntennaSpec::reference_design(Family::DualBandIfa);
        let wide = SamplingRanges::new(&[(20.0, 40.0), (30.0, 60.0), (10.0, 15.0), (4.0, 8.0)]).unwrap();
        let mut total = 0;
        for i in 0..40 {
            let (p, rej) = sample_valid(&t, &wide, 1, i).unwrap();
            let mut s = t.clone();
            s.params = p.clone();
            assert!(s.build().is_ok());
            assert!(wide.contains(&p));
            total += rej;
        }
        assert!(total > 0);
        let impossible = SamplingRanges::new(&[(60.0, 70.0), (30.0, 40.0), (10.0, 15.0), (4.0, 8.0)]).unwrap();
        assert!(sample_valid(&t, &impossible, 1, 0).is_err());
    }

    #[test]
    fn tiny_generation_is_parallelism_independent() {
        let settings = SolverSettings {
            cell_mm: [2.0; 3],
            cpml: crate::cpml::CpmlConfig { thickness: 4, ..Default::default() },
            window: Window::Steps { steps: 1100 },
            ..Default::default()
        };
        let req = GenerateRequest::new(Family::DualBandIfa, 2, settings, 11);
        let a = generate(&req, 1, &|_| {}).unwrap();
        let b = generate(&req, 2, &|_| {}).unwrap();
        assert_eq!(a.bytes().unwrap(), b.bytes().unwrap());
        assert_eq!(a.header.count + a.header.failed.len(), 2);
        let f = DatasetFile::decode(&a.bytes().unwrap()).unwrap();
        assert_eq!(f.read_record(0).unwrap(), a.records[0]);
    }
}
