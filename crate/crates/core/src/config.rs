//! Declarative run configuration (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SamplingRanges;
use crate::error::{Error, Result};
use crate::geometry::{AntennaSpec, Family};
use crate::ml::MlpConfig;
use crate::pipeline::SolverSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub count: usize,
    pub master_seed: u64,
    /// Per-parameter `[lo, hi]` (mm); family defaults when absent.
    pub ranges: Option<Vec<[f64; 2]>>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { count: 10, master_seed: 1, ranges: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Training rows; 8:1 of the dataset when absent.
    pub n_train: Option<usize>,
    pub split_seed: u64,
    pub ridge_alpha: f64,
    pub lasso_alpha: f64,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    pub mlp: MlpConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            n_train: None,
            split_seed: 0,
            ridge_alpha: 0.001,
            lasso_alpha: 0.001,
            lasso_tol: 1e-8,
            lasso_max_iter: 100_000,
            mlp: MlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// Everything a command needs. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub antenna: AntennaSpec,
    pub solver: SolverSettings,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            antenna: AntennaSpec::reference_design(Family::Ifa),
            solver: SolverSettings::default(),
            dataset: DatasetSection::default(),
            train: TrainSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// The fully resolved document, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.antenna.build()?;
        let s = &self.solver;
        if s.cell_mm.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config("cell sizes must be positive".into()));
        }
        if !(s.safety > 0.0) {
            return Err(Error::Config("safety factor must be positive".into()));
        }
        if !(s.resistance > 0.0) {
            return Err(Error::Config("source resistance must be positive".into()));
        }
        if !(s.df_hz > 0.0 && s.df_hz <= crate::sparams::S11_STEP_HZ) {
            return Err(Error::Config("df_hz must be in (0, 30 MHz]".into()));
        }
        s.waveform.validate()?;
        self.ranges()?;
        Ok(())
    }

    pub fn ranges(&self) -> Result<SamplingRanges> {
        let fam = self.antenna.family;
        match &self.dataset.ranges {
            None => Ok(SamplingRanges::default_for(fam)),
            Some(r) => {
                if r.len() != fam.param_count() {
                    return Err(Error::Config(format!(
                        "{fam} needs {} sampling ranges, got {}",
                        fam.param_count(),
                        r.len()
                    )));
                }
                SamplingRanges::new(&r.iter().map(|b| (b[0], b[1])).collect::<Vec<_>>())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Window;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[solver]\ncell = 1.0").is_err());
        assert!(RunConfig::from_toml("[antenna]\nfamily = \"ifa\"\nparams = [30, 12]\n[antenna.ifa]\nboard_size = 3")
            .is_err());
    }

    #[test]
    fn partial_sections() {
        let c = RunConfig::from_toml(
            "[antenna]\nfamily = \"dual_band_ifa\"\nparams = [30, 46, 12, 8]\n\
             [solver]\ncell_mm = [0.5, 0.5, 0.5]\nwindow = { mode = \"steps\", steps = 3000 }\n\
             [solver.cpml]\nthickness = 8\n[dataset]\ncount = 5\nranges = [[20, 40], [30, 47], [10, 15], [4, 8]]",
        )
        .unwrap();
        assert_eq!(c.antenna.family, Family::DualBandIfa);
        assert_eq!(c.solver.window, Window::Steps { steps: 3000 });
        assert_eq!(c.solver.cpml.thickness, 8);
        assert_eq!(c.solver.cpml.order, 4.0);
        assert_eq!(c.dataset.count, 5);
        assert_eq!(c.ranges().unwrap().hi[1], 47.0);
    }

    #[test]
    fn round_trip_resolved() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[solver]\ncell_mm = [0.0, 1.0, 1.0]").is_err());
        assert!(RunConfig::from_toml("[antenna]\nfamily = \"ifa\"\nparams = [60, 12]").is_err());
        assert!(RunConfig::from_toml("[dataset]\nranges = [[1, 2]]").is_err());
    }
}
