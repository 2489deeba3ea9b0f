//! Experiment configuration: a JSON document with `"schema": 1`.

use std::fmt;
use std::path::{Path, PathBuf};

use mosco_graphs_core::audit::AuditSettings;
use mosco_graphs_core::convergence::{BatterySpec, Schedule};
use mosco_graphs_core::models::{BasisChoice, ModelKind};
use mosco_graphs_core::StageIndex;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem tied to a field path such as `grid.m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
    /// Line and column in the source, for syntax and type errors.
    pub position: Option<(usize, usize)>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some((line, col)) => write!(f, "line {line}, column {col}: {}", self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
        position: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<u32>,
    pub m: Vec<usize>,
    #[serde(default)]
    pub l: Vec<usize>,
    #[serde(default)]
    pub k: Vec<u32>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            n: vec![2, 4, 6, 8, 10, 12],
            m: vec![2, 4, 8, 16],
            l: vec![1, 2, 3, 4],
            k: vec![2, 4, 6, 8],
        }
    }
}

impl Grid {
    pub fn schedule(&self) -> Schedule {
        let mut s = Schedule {
            n: self.n.clone(),
            m: self.m.clone(),
            l: self.l.clone(),
            k: self.k.clone(),
        };
        s.n.sort_unstable();
        s.n.dedup();
        s.m.sort_unstable();
        s.m.dedup();
        s.l.sort_unstable();
        s.l.dedup();
        s.k.sort_unstable();
        s.k.dedup();
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestVectorSpec {
    pub modes: usize,
    pub random_span: usize,
    pub random_steps: usize,
    pub constant: bool,
}

impl Default for TestVectorSpec {
    fn default() -> Self {
        let b = BatterySpec::default();
        Self {
            modes: b.modes,
            random_span: b.random_span,
            random_steps: b.random_steps,
            constant: b.constant,
        }
    }
}

impl From<TestVectorSpec> for BatterySpec {
    fn from(t: TestVectorSpec) -> Self {
        BatterySpec {
            modes: t.modes,
            random_span: t.random_span,
            random_steps: t.random_steps,
            constant: t.constant,
        }
    }
}

/// A full stage index in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphIndex {
    pub n: u32,
    pub m: usize,
    pub l: usize,
    pub k: u32,
}

impl From<GraphIndex> for StageIndex {
    fn from(g: GraphIndex) -> Self {
        StageIndex::full(g.n, g.m, g.l, g.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub trials: usize,
    pub kernels: usize,
    pub kernel_points: usize,
    pub lambdas: Vec<f64>,
    pub mosco_slack: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        let s = AuditSettings::default();
        Self {
            trials: s.trials,
            kernels: s.kernels,
            kernel_points: s.kernel_points,
            lambdas: s.lambdas,
            mosco_slack: s.mosco_slack,
        }
    }
}

/// Test hooks. Never set in real experiments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebugConfig {
    /// Replace the kernel used by the extraction symmetry audit with an asymmetric one.
    pub corrupt_kernel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema: u32,
    /// A built-in model name, or `table` together with `model_table`.
    pub model: String,
    /// Whitespace-separated table: one row per mode, eigenvalue then `resolution` values.
    pub model_table: Option<PathBuf>,
    /// Ambient resolution `M`.
    pub resolution: usize,
    /// Spectral truncation `K`.
    pub modes: usize,
    pub exhaustion_levels: usize,
    pub basis: String,
    pub grid: Grid,
    pub lambdas: Vec<f64>,
    pub test_vectors: TestVectorSpec,
    pub graph_exports: Vec<GraphIndex>,
    pub audit: AuditConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Record wall-clock times in `convergence.csv`; off keeps output byte-stable.
    pub timings: bool,
    pub debug: DebugConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            model: "neumann".into(),
            model_table: None,
            resolution: 1024,
            modes: 64,
            exhaustion_levels: 4,
            basis: "eigen".into(),
            grid: Grid::default(),
            lambdas: vec![1.0],
            test_vectors: TestVectorSpec::default(),
            graph_exports: vec![GraphIndex { n: 4, m: 4, l: 4, k: 2 }, GraphIndex { n: 8, m: 8, l: 4, k: 4 }],
            audit: AuditConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 1,
            timings: false,
            debug: DebugConfig::default(),
        }
    }
}

/// The model named in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSource {
    Builtin(ModelKind),
    Table(PathBuf),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            field: String::new(),
            message: e.to_string(),
            position: Some((e.line(), e.column())),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn model_source(&self) -> Result<ModelSource, ConfigError> {
        if self.model == "table" {
            return match &self.model_table {
                Some(p) => Ok(ModelSource::Table(p.clone())),
                None => Err(invalid("model_table", "model `table` needs a `model_table` path")),
            };
        }
        self.model
            .parse::<ModelKind>()
            .map(ModelSource::Builtin)
            .map_err(|_| invalid("model", format!("unknown model `{}`", self.model)))
    }

    pub fn basis_choice(&self) -> Result<BasisChoice, ConfigError> {
        self.basis
            .parse()
            .map_err(|_| invalid("basis", format!("unknown basis `{}` (eigen or haar)", self.basis)))
    }

    /// Number of basis vectors the grid needs.
    pub fn basis_size(&self) -> usize {
        let exports = self.graph_exports.iter().map(|g| g.m);
        self.grid.m.iter().copied().chain(exports).max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return Err(invalid("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        self.model_source()?;
        self.basis_choice()?;
        if self.modes == 0 {
            return Err(invalid("modes", "spectral truncation K must be at least 1"));
        }
        if self.resolution < 4 * self.modes {
            return Err(invalid(
                "resolution",
                format!(
                    "M >= 4K violated: resolution {} < 4 x modes {}",
                    self.resolution, self.modes
                ),
            ));
        }
        if self.exhaustion_levels == 0 || self.exhaustion_levels > self.resolution {
            return Err(invalid("exhaustion_levels", "must lie in 1..=resolution"));
        }
        if self.grid.n.is_empty() {
            return Err(invalid("grid.n", "needs at least one level"));
        }
        if self.grid.m.is_empty() {
            return Err(invalid("grid.m", "needs at least one Galerkin dimension"));
        }
        let basis_len = self.modes;
        for (i, &m) in self.grid.m.iter().enumerate() {
            if m == 0 || m > basis_len {
                return Err(invalid(&format!("grid.m[{i}]"), format!("m = {m} outside 1..=K = {basis_len}")));
            }
        }
        for (i, &l) in self.grid.l.iter().enumerate() {
            if l == 0 || l > self.exhaustion_levels {
                return Err(invalid(
                    &format!("grid.l[{i}]"),
                    format!("l = {l} outside 1..={}", self.exhaustion_levels),
                ));
            }
        }
        for (i, &n) in self.grid.n.iter().enumerate() {
            if n > mosco_graphs_core::pipeline::MAX_TIME_LEVEL {
                return Err(invalid(&format!("grid.n[{i}]"), format!("n = {n} too large")));
            }
        }
        for (i, &k) in self.grid.k.iter().enumerate() {
            if k > mosco_graphs_core::pipeline::MAX_PARTITION_LEVEL {
                return Err(invalid(&format!("grid.k[{i}]"), format!("k = {k} too large")));
            }
        }
        for (i, g) in self.graph_exports.iter().enumerate() {
            StageIndex::from(*g)
                .validate(basis_len, self.exhaustion_levels)
                .map_err(|e| invalid(&format!("graph_exports[{i}]"), e.to_string()))?;
        }
        if self.lambdas.is_empty() {
            return Err(invalid("lambdas", "needs at least one value"));
        }
        for (field, values) in [("lambdas", &self.lambdas), ("audit.lambdas", &self.audit.lambdas)] {
            if let Some(i) = values.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(invalid(&format!("{field}[{i}]"), "resolvent parameters must be finite and > 0"));
            }
        }
        if self.test_vectors.modes > self.modes {
            return Err(invalid("test_vectors.modes", format!("exceeds K = {}", self.modes)));
        }
        if self.audit.kernel_points == 0 {
            return Err(invalid("audit.kernel_points", "must be at least 1"));
        }
        Ok(())
    }

    pub fn audit_settings(&self) -> AuditSettings {
        AuditSettings {
            schedule: self.grid.schedule(),
            lambdas: self.audit.lambdas.clone(),
            graph_indices: self.graph_exports.iter().map(|&g| g.into()).collect(),
            trials: self.audit.trials,
            kernels: self.audit.kernels,
            kernel_points: self.audit.kernel_points,
            monotone_levels: (0..=30).collect(),
            mosco_slack: self.audit.mosco_slack,
            corrupt_kernel: self.debug.corrupt_kernel,
        }
    }
}
