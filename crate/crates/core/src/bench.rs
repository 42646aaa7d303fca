//! Update-loop throughput on the multi-band dipole domain.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cpml::CpmlConfig;
use crate::engine::{Engine, SimulationConfig};
use crate::error::Result;
use crate::grid::{total_cells, Axis, GridSpec, DEFAULT_SAFETY};
use crate::material::MaterialGrid;
use crate::real::{Precision, Real};
use crate::source::{GaussianWaveform, VoltageSource};

/// Multi-band dipole domain (mm).
pub const BENCH_DOMAIN_MM: [f64; 3] = [80.0, 140.0, 28.0];

/// Benchmark grid set: spacing (mm), published model size (million cells) and iterations/s.
pub const TABLE2: [([f64; 3], &str, f64); 6] = [
    ([0.2, 1.0, 0.2], "7.84", 376.0),
    ([0.5, 1.0, 0.5], "1.25", 1720.0),
    ([1.0, 1.0, 1.0], "0.3136", 3220.0),
    ([0.5, 0.5, 0.5], "2.5", 928.0),
    ([0.2, 0.5, 0.2], "15.6", 195.0),
    ([0.2, 0.2, 0.2], "39.2", 76.3),
];

/// Cell count in millions, truncated to the digits the table prints.
pub fn display_millions(cells: u64, reference: &str) -> String {
    let decimals = reference.split('.').nth(1).map_or(0, |d| d.len()) as u32;
    let unit = 1_000_000 / 10u64.pow(decimals);
    let kept = cells / unit;
    let scale = 10u64.pow(decimals);
    if decimals == 0 {
        kept.to_string()
    } else {
        format!("{}.{:0width$}", kept / scale, kept % scale, width = decimals as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cell_mm: [f64; 3],
    pub cells: [usize; 3],
    pub total_cells: u64,
    pub steps: usize,
    pub threads: usize,
    pub precision: Precision,
    pub wall_s: f64,
    pub iterations_per_s: f64,
    pub cell_updates_per_s: f64,
}

/// Time `steps` updates of a vacuum domain driven at its centre. Setup is not timed.
pub fn run_bench(cell_mm: [f64; 3], steps: usize, threads: Option<usize>, precision: Precision) -> Result<BenchReport> {
    match precision {
        Precision::F64 => bench_with::<f64>(cell_mm, steps, threads),
        Precision::F32 => bench_with::<f32>(cell_mm, steps, threads),
    }
}

fn bench_with<T: Real>(cell_mm: [f64; 3], steps: usize, threads: Option<usize>) -> Result<BenchReport> {
    let grid = GridSpec::from_extent(BENCH_DOMAIN_MM.map(|v| v * 1e-3), cell_mm.map(|v| v * 1e-3))?;
    let mut cfg = SimulationConfig::new(MaterialGrid::vacuum(grid), CpmlConfig::default(), DEFAULT_SAFETY)?;
    let c = [grid.nx / 2, grid.ny / 2, grid.nz / 2];
    cfg.sources.push(VoltageSource::new(c, Axis::Y, GaussianWaveform::default()));
    // Short timing runs need not launch the whole pulse.
    cfg.steps = 0;
    let mut engine = Engine::<T>::new(&cfg, threads)?;
    let t = Instant::now();
    engine.run_steps(steps)?;
    let wall = t.elapsed().as_secs_f64().max(1e-9);
    let n = total_cells(&grid);
    Ok(BenchReport {
        cell_mm,
        cells: grid.cells(),
        total_cells: n,
        steps,
        threads: engine.threads(),
        precision: if T::NAME == "f32" { Precision::F32 } else { Precision::F64 },
        wall_s: wall,
        iterations_per_s: steps as f64 / wall,
        cell_updates_per_s: n as f64 * steps as f64 / wall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_display_values() {
        for (mm, shown, _) in TABLE2 {
            let g = GridSpec::from_extent(BENCH_DOMAIN_MM.map(|v| v * 1e-3), mm.map(|v| v * 1e-3)).unwrap();
            let cells = total_cells(&g);
            assert_eq!(display_millions(cells, shown), shown, "{mm:?}");
        }
        assert_eq!(display_millions(313_600, "0.3136"), "0.3136");
        assert_eq!(display_millions(39_200_000, "39.2"), "39.2");
    }

    #[test]
    fn report_rates_consistent() {
        let r = run_bench([1.0, 1.0, 1.0], 20, Some(1), Precision::F32).unwrap();
        assert_eq!(r.total_cells, 313_600);
        assert!((r.iterations_per_s * r.wall_s - 20.0).abs() < 0.2);
        assert!((r.cell_updates_per_s / r.iterations_per_s - r.total_cells as f64).abs() < 1e-6 * r.total_cells as f64);
    }
}
