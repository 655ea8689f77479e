//! Run configuration, read from TOML. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cpboot_core::basis::{preset, Basis, BasisSet, BlockKind};
use cpboot_core::drivers::BoundOptions;
use cpboot_core::potentials::{Family, PotentialSpec};
use cpboot_core::sdp::{Direction, Precision, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Bound,
    Sweep,
    Critical,
    Scan,
    Diagonalize,
    ExportSdp,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub potential: Option<PotentialConfig>,
    pub bases: Option<BasesConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub anomaly: AnomalyConfig,
    #[serde(default)]
    pub bound: BoundConfig,
    pub sweep: Option<SweepConfig>,
    pub critical: Option<CriticalConfig>,
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub diagonalize: DiagonalizeConfig,
    #[serde(default)]
    pub export: ExportConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// coulomb, yukawa, gaussian, cornell or conformal
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BasesConfig {
    pub preset: Option<String>,
    #[serde(default)]
    pub blocks: Vec<BlockConfig>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub label: String,
    pub kind: BlockKindConfig,
    pub elements: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKindConfig {
    Gram,
    Ground,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionMode {
    Double,
    DoubleDouble,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default = "default_precision")]
    pub precision_mode: PrecisionMode,
}

fn default_precision() -> PrecisionMode {
    PrecisionMode::Auto
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: None, max_iter: None, precision_mode: default_precision() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    #[serde(rename = "impose_A_nonneg", default)]
    pub impose_a_nonneg: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Also maximize, for an upper bound.
    #[serde(default = "yes")]
    pub both: bool,
    /// Compare the lower bound with the reference diagonalization.
    #[serde(default = "yes")]
    pub oracle: bool,
}

fn yes() -> bool {
    true
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { both: true, oracle: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Name of the potential parameter to vary.
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
    /// Only rows with oracle energy below this take part in comparisons.
    pub oracle_cut: Option<f64>,
}

fn linear() -> Spacing {
    Spacing::Linear
}

impl SweepConfig {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 {
            return Err(CliError::Config("sweep.points must be positive".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.from]);
        }
        let n = (self.points - 1) as f64;
        match self.spacing {
            Spacing::Linear => Ok((0..self.points).map(|i| self.from + (self.to - self.from) * i as f64 / n).collect()),
            Spacing::Log => {
                if !(self.from > 0.0 && self.to > 0.0) {
                    return Err(CliError::Config("log spacing needs positive endpoints".into()));
                }
                let r = self.to / self.from;
                Ok((0..self.points).map(|i| self.from * r.powf(i as f64 / n)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalConfig {
    #[serde(default = "one")]
    pub sigma: f64,
    pub bracket: [f64; 2],
    /// Width of the final interval in `alpha_s`.
    pub tol: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda: f64,
    pub e_range: [f64; 2],
    pub rinv_range: [f64; 2],
    pub n_grid: usize,
    #[serde(default = "both_orders")]
    pub orders: Vec<usize>,
}

fn both_orders() -> Vec<usize> {
    vec![2, 3]
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalizeConfig {
    #[serde(default = "default_basis_size")]
    pub basis_size: usize,
    /// Also run the larger basis with a scan over the exponential scale.
    #[serde(default)]
    pub refined: bool,
}

fn default_basis_size() -> usize {
    cpboot_core::refdiag::DEFAULT_BASIS_SIZE
}

impl Default for DiagonalizeConfig {
    fn default() -> Self {
        DiagonalizeConfig { basis_size: default_basis_size(), refined: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionConfig {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExportConfig {
    #[serde(default = "minimize")]
    pub direction: DirectionConfig,
    /// Fixed energy for the inverse-square potential, where `<1/r>` is the
    /// only variable left.
    pub energy: Option<f64>,
    /// Matrix order for the inverse-square potential.
    pub order: Option<usize>,
}

fn minimize() -> DirectionConfig {
    DirectionConfig::Minimize
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { direction: minimize(), energy: None, order: None }
    }
}

impl From<DirectionConfig> for Direction {
    fn from(d: DirectionConfig) -> Self {
        match d {
            DirectionConfig::Minimize => Direction::Minimize,
            DirectionConfig::Maximize => Direction::Maximize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File names inside `dir`; each task has its own default.
    pub json: Option<String>,
    pub csv: Option<String>,
    pub sdpa: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir(), json: None, csv: None, sdpa: None }
    }
}

impl OutputConfig {
    pub fn path(&self, name: &Option<String>, default: &str) -> PathBuf {
        self.dir.join(name.as_deref().unwrap_or(default))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn potential(&self) -> Result<&PotentialConfig, CliError> {
        self.potential.as_ref().ok_or_else(|| CliError::Config("missing [potential]".into()))
    }

    pub fn spec(&self) -> Result<PotentialSpec, CliError> {
        self.potential()?.build()
    }

    pub fn bases(&self) -> Result<BasisSet, CliError> {
        match &self.bases {
            None => Err(CliError::Config("missing [bases]".into())),
            Some(b) => b.build(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = match self.solver.precision_mode {
            PrecisionMode::Double => SolverOptions::default(),
            PrecisionMode::DoubleDouble => SolverOptions::double_double(),
            PrecisionMode::Auto => SolverOptions::auto(),
        };
        if let Some(t) = self.solver.tol {
            o.tol = t;
        }
        if let Some(m) = self.solver.max_iter {
            o.max_iter = m;
        }
        o
    }

    pub fn bound_options(&self) -> BoundOptions {
        BoundOptions { solver: self.solver_options(), impose_a_nonneg: self.anomaly.impose_a_nonneg, ..BoundOptions::default() }
    }

    /// Checks that every section the task needs is present and sane.
    pub fn validate(&self, task: Task) -> Result<(), CliError> {
        if let Some(t) = self.solver.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Config(format!("solver.tol must lie in (0, 1), got {t}")));
            }
        }
        match task {
            Task::Bound | Task::Diagonalize => {
                self.spec()?;
                if task == Task::Bound {
                    self.bases()?;
                }
            }
            Task::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| CliError::Config("missing [sweep]".into()))?;
                s.values()?;
                self.bases()?;
                self.potential()?.with_param(&s.param, s.from)?;
            }
            Task::Critical => {
                let c = self.critical.as_ref().ok_or_else(|| CliError::Config("missing [critical]".into()))?;
                if !(c.tol > 0.0) {
                    return Err(CliError::Config("critical.tol must be positive".into()));
                }
                self.bases()?;
            }
            Task::Scan => {
                let s = self.scan.as_ref().ok_or_else(|| CliError::Config("missing [scan]".into()))?;
                if s.n_grid == 0 || s.orders.iter().any(|o| !matches!(o, 2 | 3)) {
                    return Err(CliError::Config("scan needs n_grid > 0 and orders from {2, 3}".into()));
                }
            }
            Task::ExportSdp => {
                let spec = self.spec()?;
                if matches!(spec.family, Family::Conformal { .. }) {
                    if self.export.energy.is_none() {
                        return Err(CliError::Config("export of the inverse-square potential needs export.energy".into()));
                    }
                } else {
                    self.bases()?;
                }
            }
        }
        Ok(())
    }
}

impl PotentialConfig {
    fn get(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match (self.params.get(key), default) {
            (Some(&v), _) => Ok(v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(CliError::Config(format!("potential {} needs parameter {key}", self.name))),
        }
    }

    fn allowed(&self) -> Result<&'static [&'static str], CliError> {
        Ok(match self.name.as_str() {
            "coulomb" => &["alpha"],
            "yukawa" => &["g", "rho"],
            "gaussian" => &["b", "R"],
            "cornell" => &["alpha_s", "sigma"],
            "conformal" => &["lambda"],
            other => return Err(CliError::Config(format!("unknown potential {other:?}"))),
        })
    }

    pub fn build(&self) -> Result<PotentialSpec, CliError> {
        let allowed = self.allowed()?;
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Config(format!("potential {} has no parameter {k:?}", self.name)));
        }
        let spec = match self.name.as_str() {
            "coulomb" => PotentialSpec::coulomb(self.get("alpha", Some(1.0))?),
            "yukawa" => PotentialSpec::yukawa(self.get("g", Some(1.0))?, self.get("rho", None)?),
            "gaussian" => PotentialSpec::gaussian(self.get("b", None)?, self.get("R", Some(1.0))?),
            "cornell" => PotentialSpec::cornell(self.get("alpha_s", None)?, self.get("sigma", Some(1.0))?),
            _ => PotentialSpec::conformal(self.get("lambda", None)?),
        };
        let spec = spec.map_err(|e| CliError::Config(e.to_string()))?;
        match self.mass {
            Some(m) => spec.with_mass(m).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(spec),
        }
    }

    /// The same potential with one parameter replaced.
    pub fn with_param(&self, key: &str, value: f64) -> Result<PotentialSpec, CliError> {
        if !self.allowed()?.contains(&key) {
            return Err(CliError::Config(format!("potential {} has no parameter {key:?}", self.name)));
        }
        let mut p = self.clone();
        p.params.insert(key.to_owned(), value);
        p.build()
    }
}

impl BasesConfig {
    pub fn build(&self) -> Result<BasisSet, CliError> {
        match (&self.preset, self.blocks.is_empty()) {
            (Some(name), true) => preset(name).map_err(|e| CliError::Config(e.to_string())),
            (None, false) => {
                let blocks = self
                    .blocks
                    .iter()
                    .map(|b| {
                        let kind = match b.kind {
                            BlockKindConfig::Gram => BlockKind::Gram,
                            BlockKindConfig::Ground => BlockKind::Ground,
                        };
                        let words: Vec<&str> = b.elements.iter().map(String::as_str).collect();
                        Basis::parse(&b.label, kind, &words).map_err(|e| CliError::Config(format!("block {}: {e}", b.label)))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(BasisSet { name: "inline".into(), blocks })
            }
            _ => Err(CliError::Config("[bases] needs exactly one of `preset` or `blocks`".into())),
        }
    }
}

/// Precision names as written in outputs.
pub fn precision_name(p: Precision) -> &'static str {
    match p {
        Precision::Double => "double",
        Precision::DoubleDouble => "double-double",
        Precision::Auto => "auto",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[potential]\nname = \"coulomb\"\ncolour = 1\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
        let c = RunConfig::from_toml("[potential]\nname = \"coulomb\"\nparams = { beta = 1.0 }\n").unwrap();
        assert!(c.spec().is_err());
    }

    #[test]
    fn presets_and_inline_bases() {
        let c = RunConfig::from_toml("[bases]\npreset = \"yukawa-s3\"\n").unwrap();
        assert_eq!(c.bases().unwrap().blocks.len(), 6);
        let c = RunConfig::from_toml(
            "[bases]\n[[bases.blocks]]\nlabel = \"M\"\nkind = \"gram\"\nelements = [\"1\", \"p\", \"1/r\"]\n",
        )
        .unwrap();
        assert_eq!(c.bases().unwrap().blocks[0].elements.len(), 3);
        let c = RunConfig::from_toml("[bases]\n").unwrap();
        assert!(c.bases().is_err());
    }

    #[test]
    fn log_sweep_hits_both_ends() {
        let s = SweepConfig { param: "rho".into(), from: 1.0, to: 50.0, points: 20, spacing: Spacing::Log, oracle_cut: None };
        let v = s.values().unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 1.0);
        assert!((v[19] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn solver_section_overrides_precision_defaults() {
        let c = RunConfig::from_toml("[solver]\ntol = 1e-7\nprecision_mode = \"double-double\"\n").unwrap();
        let o = c.solver_options();
        assert_eq!(o.precision, Precision::DoubleDouble);
        assert_eq!(o.tol, 1e-7);
    }
}
