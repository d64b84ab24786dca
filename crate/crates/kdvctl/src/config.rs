//! Run configuration: TOML file, environment and flag overrides.

use std::path::{Path, PathBuf};

use kdvctl_core::spectral::{ControlProfileSet, StepControl};
use kdvctl_core::trig::FloatPoly;
use serde::{Deserialize, Serialize};

use crate::formats::PolyJson;
use crate::CliError;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "KDVCTL_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dispersion parameter; `None` leaves each study at its own default.
    pub alpha: Option<f64>,
    /// Truncation `K` of default states.
    pub k: usize,
    pub oversampling: usize,
    /// Control profiles `Q`; the standard set when absent.
    pub profiles: Option<Vec<PolyJson>>,
    /// Solver steps per unit time.
    pub step_rate: f64,
    pub min_duration: f64,
    pub tail_tolerance: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sc = StepControl::default();
        RunConfig {
            alpha: None,
            k: 64,
            oversampling: 4,
            profiles: None,
            step_rate: sc.step_rate,
            min_duration: sc.min_duration,
            tail_tolerance: kdvctl_core::spectral::DEFAULT_TAIL_TOLERANCE,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub k: Option<usize>,
    pub oversampling: Option<usize>,
    pub step_rate: Option<f64>,
    pub tail_tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub q: ControlProfileSet,
    pub control: StepControl,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// File values, then `KDVCTL_OUT`, then flags.
    pub fn resolve(mut self, o: &Overrides, env_out: Option<PathBuf>) -> Result<Resolved, CliError> {
        if let Some(d) = env_out {
            self.out_dir = d;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { self.$f = v; } )* };
        }
        set!(k, oversampling, step_rate, tail_tolerance, seed, out_dir);
        if o.alpha.is_some() {
            self.alpha = o.alpha;
        }
        self.validate()
    }

    pub fn validate(self) -> Result<Resolved, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.k < 4 {
            return bad(format!("K must be ≥ 4, got {}", self.k));
        }
        if !(self.step_rate > 0.0) || !self.step_rate.is_finite() {
            return bad(format!("step_rate must be positive, got {}", self.step_rate));
        }
        if !(self.tail_tolerance > 0.0) {
            return bad(format!("tail_tolerance must be positive, got {}", self.tail_tolerance));
        }
        if !(self.min_duration >= 0.0) {
            return bad(format!("min_duration must be ≥ 0, got {}", self.min_duration));
        }
        if self.oversampling < 4 {
            return bad(format!("oversampling must be ≥ 4, got {}", self.oversampling));
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return bad(format!("alpha must be finite, got {a}"));
            }
        }
        let q = match &self.profiles {
            None => ControlProfileSet::standard(),
            Some(p) => ControlProfileSet::new(p.iter().map(FloatPoly::from).collect())
                .map_err(|e| CliError::Config(e.to_string()))?,
        };
        let control = StepControl { step_rate: self.step_rate, min_duration: self.min_duration };
        Ok(Resolved { config: self, q, control })
    }
}

impl Resolved {
    pub fn alpha(&self) -> f64 {
        self.config.alpha.unwrap_or(0.0)
    }
}
