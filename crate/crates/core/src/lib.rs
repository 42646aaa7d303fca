//! FDTD simulation of planar antennas, S11 extraction, dataset generation
//! and shape-parameter prediction.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod cpml;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod material;
pub mod ml;
pub mod pipeline;
pub mod plot;
pub mod real;
pub mod source;
pub mod sparams;
pub mod validation;

pub use cpml::{grading_profile, CpmlConfig, CpmlState};
pub use engine::{run, Engine, SimulationConfig};
pub use error::{Error, Result};
pub use fields::FieldState;
pub use grid::{cfl_timestep, total_cells, Axis, GridSpec, C0, DEFAULT_SAFETY};
pub use material::{build_coefficients, LumpedResistor, Material, MaterialGrid, UpdateCoefficients};
pub use real::{Precision, Real};
pub use source::{probe_voltage, waveform_sample, GaussianWaveform, ProbeRecords, VoltageProbe, VoltageSource};
