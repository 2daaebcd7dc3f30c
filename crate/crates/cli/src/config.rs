//! Run configuration read from TOML.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fermi_sea::bloch::PeriodicProblem;
use fermi_sea::charge::{DefectCharge, NuclearForm, NuclearModel};
use fermi_sea::lattice::LatticeConfig;
use fermi_sea::scf::SolverOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub lattice: LatticeSection,
    pub nuclear: NuclearSection,
    #[serde(default)]
    pub defect: DefectCharge,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    /// Hartree.
    pub cutoff: f64,
    pub grid_n: usize,
    /// Lattice constant in bohr.
    #[serde(default = "one")]
    pub spacing: f64,
    /// Brillouin mesh of the periodic reference solve.
    #[serde(default = "default_bz")]
    pub bz_size: usize,
    /// Coulomb zero-mode constant c.
    #[serde(default)]
    pub zero_mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuclearSection {
    #[serde(rename = "Z", alias = "z")]
    pub z: u32,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "gaussian")]
    pub form: NuclearForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_mixing")]
    pub mixing: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub anderson_depth: usize,
    /// Single worker thread and fixed reduction order.
    #[serde(default)]
    pub deterministic: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            mixing: default_mixing(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            anderson_depth: 0,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Neutral,
    Mu,
    Charge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub mode: Mode,
    #[serde(rename = "L_list", alias = "l_list", default = "default_l_list")]
    pub l_list: Vec<usize>,
    /// Fermi level in Hartree; defaults to the gap midpoint.
    #[serde(default)]
    pub ef: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::Neutral,
            l_list: default_l_list(),
            ef: None,
            q: None,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_bz() -> usize {
    4
}
fn gaussian() -> NuclearForm {
    NuclearForm::Gaussian
}
fn default_mixing() -> f64 {
    SolverOptions::default().mixing
}
fn default_tol() -> f64 {
    SolverOptions::default().tol
}
fn default_max_iter() -> usize {
    SolverOptions::default().max_iterations
}
fn default_l_list() -> Vec<usize> {
    vec![1, 2, 3]
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every key and names the offending one.
    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if !(l.cutoff > 0.0 && l.cutoff.is_finite()) {
            bail!("lattice.cutoff must be positive, got {}", l.cutoff);
        }
        if !(l.spacing > 0.0 && l.spacing.is_finite()) {
            bail!("lattice.spacing must be positive, got {}", l.spacing);
        }
        if l.grid_n.is_multiple_of(2) {
            bail!("lattice.grid_n must be odd, got {}", l.grid_n);
        }
        let needed = LatticeConfig::min_grid_n(l.cutoff, l.spacing);
        if l.grid_n < needed {
            bail!("lattice.grid_n = {} is too small for the cutoff (need >= {needed})", l.grid_n);
        }
        if l.bz_size == 0 {
            bail!("lattice.bz_size must be at least 1");
        }
        if !(l.zero_mode >= 0.0 && l.zero_mode.is_finite()) {
            bail!("lattice.zero_mode must be a non-negative number, got {}", l.zero_mode);
        }
        let n = &self.nuclear;
        if n.z == 0 {
            bail!("nuclear.Z must be a positive integer");
        }
        if n.form == NuclearForm::Gaussian && !(n.sigma > 0.0 && n.sigma.is_finite()) {
            bail!("nuclear.sigma must be positive for the gaussian form, got {}", n.sigma);
        }
        for (i, s) in self.defect.sites.iter().enumerate() {
            if !(s.width > 0.0 && s.width.is_finite()) {
                bail!("defect.sites[{i}].width must be positive, got {}", s.width);
            }
            if !s.amplitude.is_finite() || s.center.iter().any(|c| !c.is_finite()) {
                bail!("defect.sites[{i}] has a non-finite amplitude or center");
            }
        }
        let s = &self.solver;
        if !(s.mixing > 0.0 && s.mixing <= 1.0) {
            bail!("solver.mixing must lie in (0, 1], got {}", s.mixing);
        }
        if !(s.tol > 0.0) {
            bail!("solver.tol must be positive, got {}", s.tol);
        }
        if s.max_iter == 0 {
            bail!("solver.max_iter must be at least 1");
        }
        let r = &self.run;
        if r.l_list.is_empty() || r.l_list.contains(&0) {
            bail!("run.L_list must be non-empty with every L >= 1");
        }
        if r.ef.is_some_and(|v| !v.is_finite()) {
            bail!("run.ef must be finite");
        }
        if r.q.is_some_and(|v| !v.is_finite()) {
            bail!("run.q must be finite");
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<PeriodicProblem> {
        let l = &self.lattice;
        let lattice = LatticeConfig::new(l.cutoff, l.bz_size, l.grid_n)?.with_spacing(l.spacing)?;
        let nuclear = match self.nuclear.form {
            NuclearForm::Gaussian => NuclearModel::gaussian(self.nuclear.z, self.nuclear.sigma),
            NuclearForm::Uniform => NuclearModel::uniform(self.nuclear.z),
        };
        Ok(PeriodicProblem {
            zero_mode: l.zero_mode,
            ..PeriodicProblem::new(lattice, nuclear)
        })
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            mixing: self.solver.mixing,
            tol: self.solver.tol,
            max_iterations: self.solver.max_iter,
            anderson_depth: self.solver.anderson_depth,
        }
    }

    /// SHA-256 of the canonical JSON form, so equivalent files hash equally.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}
