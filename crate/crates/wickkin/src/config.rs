//! Versioned run configurations.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dnls::{equilibrium, Family, Spectrum};
use crate::error::{Error, Result};
use crate::io::{self, Precision, SCHEMA_VERSION};
use crate::kinetic::DeltaModel;
use crate::lattice::{Dispersion, Lattice};

/// Everything a run needs; identical configs give identical result files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    WickExpand {
        /// Variable ids of the ground sequence, repeats allowed.
        vars: Vec<u32>,
        cumulants: PathBuf,
    },
    CumulantConvert {
        input: PathBuf,
        to: ConvertTarget,
        /// Highest order to tabulate; defaults to the input's.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_order: Option<usize>,
    },
    HierarchyRhs {
        model: PathBuf,
        /// Initial cumulants; falls back to the model file's `initial`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<PathBuf>,
        order: usize,
    },
    DnlsSimulate {
        system: SystemConfig,
        w0: W0Config,
        realizations: usize,
        dt: f64,
        steps: usize,
        #[serde(default = "default_family")]
        family: Family,
        #[serde(default = "default_true")]
        snapshots: bool,
        #[serde(default = "default_precision")]
        precision: Precision,
    },
    EstimateW {
        ensemble: PathBuf,
    },
    BpSolve {
        system: SystemConfig,
        w0: W0Config,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<DeltaModel>,
        tau_end: f64,
        dtau: f64,
    },
    BpCompare {
        system: SystemConfig,
        w0: W0Config,
        lambdas: Vec<f64>,
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<DeltaModel>,
    },
    KineticCheck {
        system: SystemConfig,
        w0: W0Config,
        lambdas: Vec<f64>,
        tau: f64,
        realizations: usize,
        dt: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<DeltaModel>,
    },
}

fn default_family() -> Family {
    Family::Gaussian
}

fn default_true() -> bool {
    true
}

fn default_precision() -> Precision {
    Precision::Complex128
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvertTarget {
    Cumulant,
    Moment,
}

/// Lattice, dispersion and coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub d: usize,
    pub l: usize,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub lambda: f64,
}

impl SystemConfig {
    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.d, self.l)
    }

    pub fn dispersion(&self) -> Result<Dispersion> {
        let d = match &self.dispersion {
            DispersionConfig::NearestNeighbor => Dispersion::nearest_neighbor(self.d),
            DispersionConfig::NextNearest { t2 } => Dispersion::next_nearest(self.d, *t2),
            DispersionConfig::Constant { c } => Dispersion::constant(*c),
            DispersionConfig::Hopping { hopping } => Dispersion { hopping: hopping.clone() },
        };
        d.validate()?;
        Ok(d)
    }

    pub fn omega(&self) -> Result<Vec<f64>> {
        Ok(self.dispersion()?.omega(&self.lattice()?))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DispersionConfig {
    #[default]
    NearestNeighbor,
    NextNearest {
        t2: f64,
    },
    Constant {
        c: f64,
    },
    Hopping {
        hopping: Vec<([i64; 3], f64)>,
    },
}

/// Initial spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum W0Config {
    Csv {
        path: PathBuf,
    },
    /// `β^{−1}/(ω − μ)`
    Equilibrium {
        beta: f64,
        mu: f64,
    },
    /// `base + a cos 2πk₁ + b sin²(2π(k₂ + k₃))`
    Smooth {
        base: f64,
        a: f64,
        b: f64,
    },
}

impl W0Config {
    pub fn spectrum(&self, lattice: Lattice, omega: &[f64]) -> Result<Spectrum> {
        let s = match self {
            W0Config::Csv { path } => {
                let s = io::read_spectrum_csv(path)?;
                if s.lattice != lattice {
                    return Err(Error::Mismatch(format!(
                        "{} is on d={}, L={} but the run uses d={}, L={}",
                        path.display(),
                        s.lattice.d,
                        s.lattice.l,
                        lattice.d,
                        lattice.l
                    )));
                }
                s
            }
            W0Config::Equilibrium { beta, mu } => equilibrium(lattice, omega, *beta, *mu)?,
            W0Config::Smooth { base, a, b } => Spectrum::from_fn(lattice, |k| {
                base + a * (2.0 * PI * k[0]).cos() + b * (2.0 * PI * (k[1] + k[2])).sin().powi(2)
            }),
        };
        s.check_nonnegative()?;
        Ok(s)
    }
}

fn absolute(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn new(experiment: Experiment, out: PathBuf) -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            seed: 0,
            threads: None,
            out,
            experiment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive and finite, got {x}")))
            }
        };
        match &self.experiment {
            Experiment::WickExpand { vars, .. } if vars.is_empty() => {
                Err(Error::Config("wick-expand needs at least one variable".into()))
            }
            Experiment::HierarchyRhs { order: 0, .. } => Err(Error::Config("order must be at least 1".into())),
            Experiment::DnlsSimulate {
                system, realizations, dt, ..
            } => {
                system.lattice()?;
                positive(*dt, "dt")?;
                if *realizations < 2 {
                    return Err(Error::DegenerateEnsemble(*realizations));
                }
                Ok(())
            }
            Experiment::BpSolve {
                system, dtau, tau_end, ..
            } => {
                system.lattice()?;
                positive(*dtau, "dtau")?;
                if !(*tau_end >= 0.0) {
                    return Err(Error::Config(format!("tau_end must be nonnegative, got {tau_end}")));
                }
                Ok(())
            }
            Experiment::BpCompare { system, lambdas, tau, .. } => {
                system.lattice()?;
                positive(*tau, "tau")?;
                lambdas.iter().try_for_each(|&l| positive(l, "lambda"))?;
                if lambdas.is_empty() {
                    return Err(Error::Config("lambda list is empty".into()));
                }
                Ok(())
            }
            Experiment::KineticCheck {
                system,
                lambdas,
                tau,
                realizations,
                dt,
                ..
            } => {
                system.lattice()?;
                positive(*tau, "tau")?;
                positive(*dt, "dt")?;
                lambdas.iter().try_for_each(|&l| positive(l, "lambda"))?;
                if lambdas.is_empty() {
                    return Err(Error::Config("lambda list is empty".into()));
                }
                if *realizations < 2 {
                    return Err(Error::DegenerateEnsemble(*realizations));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Make every relative path absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        absolute(base, &mut self.out);
        let w0_path = |w: &mut W0Config| {
            if let W0Config::Csv { path } = w {
                absolute(base, path);
            }
        };
        match &mut self.experiment {
            Experiment::WickExpand { cumulants, .. } => absolute(base, cumulants),
            Experiment::CumulantConvert { input, .. } => absolute(base, input),
            Experiment::HierarchyRhs { model, state, .. } => {
                absolute(base, model);
                if let Some(s) = state {
                    absolute(base, s);
                }
            }
            Experiment::EstimateW { ensemble } => absolute(base, ensemble),
            Experiment::DnlsSimulate { w0, .. }
            | Experiment::BpSolve { w0, .. }
            | Experiment::BpCompare { w0, .. }
            | Experiment::KineticCheck { w0, .. } => w0_path(w0),
        }
    }

    /// Parse a config file, or the `config` block of a run manifest, with
    /// relative paths taken against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let v: serde_json::Value = io::read_json(path)?;
        let v = match v.get("config") {
            Some(c) if v.get("tool").is_some() => c.clone(),
            _ => v,
        };
        let mut cfg: RunConfig = serde_json::from_value(v)?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = std::path::absolute(base)?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }
}
