//! The `run`, `verify` and `export-graph` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use mosco_graphs_core::audit::{run_all, AuditOutcome};
use mosco_graphs_core::convergence::{evaluate_point, test_battery, ConvergenceRecord, ResolventProbe, TestVector};
use mosco_graphs_core::graph::{final_stage_graph, StageGraph};
use mosco_graphs_core::models::{build_model, ModelParams};
use mosco_graphs_core::{MarkovKernelModel, OrthonormalBasis, SpectralModel, StageIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelSource};
use crate::export::{edge_list, read_spectral_table, vertex_table, GraphDocument};
use crate::table::write_records;

/// Environment variable capping the worker count; `0` or unset means one per core.
pub const THREADS_ENV: &str = "MOSCO_GRAPHS_THREADS";

/// Independent random streams derived from the seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Model = 0,
    Battery = 1,
    Audit = 2,
}

pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Statements that hold for every output and explain how to read it.
pub const CONVENTIONS: [&str; 5] = [
    "stage generators vanish on the orthogonal complement of their subspace, so stage resolvents act as 1/lambda there; the reference resolvent does the same off the retained modes",
    "Mosco convergence is checked through strong resolvent convergence at real lambda > 0 plus the constant recovery sequence; the liminf condition over all weakly convergent sequences is not checked directly",
    "the Markov property and graph extraction are audited only where the dropped modes are damped below 1e-10 or the spectrum is complete",
    "along the exhaustion index the nested check requires the exact limit at the last level rather than monotone decay",
    "graph conductances are those of the unscaled operator P at t = 2^-n; the stage form is rate = 2^n times the graph energy",
];

/// A prepared experiment: model, Galerkin basis and test battery.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model_name: String,
    pub model: SpectralModel,
    pub kernel: Option<MarkovKernelModel>,
    pub basis: OrthonormalBasis,
    pub battery: Vec<TestVector>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams {
            points: config.resolution,
            modes: config.modes,
            levels: config.exhaustion_levels,
        };
        let (model_name, model, kernel) = match config.model_source()? {
            ModelSource::Builtin(kind) => {
                let named = build_model(kind, params, &mut rng(config.seed, Stream::Model))?;
                let spectral = named.spectral.context("model has no spectral data")?;
                (kind.name().to_string(), spectral, named.kernel)
            }
            ModelSource::Table(path) => {
                let model = read_spectral_table(&path, config.resolution, config.exhaustion_levels)?;
                ("table".to_string(), model, None)
            }
        };
        let basis = config.basis_choice()?.build(&model, config.basis_size())?;
        let battery = test_battery(&model, config.test_vectors.into(), &mut rng(config.seed, Stream::Battery))?;
        Ok(Self {
            config,
            model_name,
            model,
            kernel,
            basis,
            battery,
        })
    }

    /// Sweep records sorted by grid index, then λ, then battery order.
    pub fn sweep(&self) -> Result<Vec<ConvergenceRecord>> {
        let probes = self
            .config
            .lambdas
            .iter()
            .map(|&l| ResolventProbe::new(l, self.battery.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let points = self.config.grid.schedule().points();
        let timings = self.config.timings;
        let chunks = points
            .par_iter()
            .map(|&index| {
                let start = Instant::now();
                let mut recs = evaluate_point(&self.model, &self.basis, index, &probes)?;
                if timings {
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    for r in &mut recs {
                        r.wall_ms = ms;
                    }
                }
                Ok(recs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    pub fn graphs(&self) -> Result<Vec<StageGraph>> {
        self.config
            .graph_exports
            .par_iter()
            .map(|&g| {
                let index = StageIndex::from(g);
                final_stage_graph(&self.model, &self.basis, index).with_context(|| format!("extracting graph {index}"))
            })
            .collect()
    }

    pub fn audits(&self) -> Vec<AuditOutcome> {
        run_all(
            &self.model,
            self.kernel.as_ref(),
            &self.basis,
            &self.battery,
            &self.config.audit_settings(),
            &mut rng(self.config.seed, Stream::Audit),
        )
    }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))?,
        _ => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

#[derive(Serialize)]
struct AuditEntry<'a> {
    name: &'a str,
    passed: bool,
    value: Option<f64>,
    limit: f64,
    note: &'a str,
}

#[derive(Serialize)]
struct AuditFile<'a> {
    model: &'a str,
    seed: u64,
    passed: bool,
    conventions: &'a [&'a str],
    audits: Vec<AuditEntry<'a>>,
}

pub fn audits_json(exp: &Experiment, audits: &[AuditOutcome]) -> String {
    let file = AuditFile {
        model: &exp.model_name,
        seed: exp.config.seed,
        passed: audits.iter().all(|a| a.passed),
        conventions: &CONVENTIONS,
        audits: audits
            .iter()
            .map(|a| AuditEntry {
                name: a.name,
                passed: a.passed,
                value: a.value.is_finite().then_some(a.value),
                limit: a.limit,
                note: &a.note,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("audit reports serialize");
    s.push('\n');
    s
}

pub fn audit_line(a: &AuditOutcome) -> String {
    let status = if a.passed { "PASS" } else { "FAIL" };
    let mut line = format!("{status} {:<28} {:.3e} (limit {:.1e})", a.name, a.value, a.limit);
    if !a.note.is_empty() {
        line.push_str("  ");
        line.push_str(&a.note);
    }
    line
}

pub fn graph_path(dir: &Path, index: StageIndex, ext: &str) -> PathBuf {
    dir.join(format!("graph_{}.{ext}", index.label()))
}

/// What `run` produced.
pub struct RunOutcome {
    pub records: usize,
    pub graphs: Vec<PathBuf>,
    pub audits: Vec<AuditOutcome>,
}

impl RunOutcome {
    pub fn failed_audits(&self) -> impl Iterator<Item = &AuditOutcome> {
        self.audits.iter().filter(|a| !a.passed)
    }
}

/// Sweep, graph exports and audits, written to `out`.
pub fn run(exp: &Experiment, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let records = exp.sweep()?;
    let csv_path = out.join("convergence.csv");
    let file = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_records(std::io::BufWriter::new(file), &records)?;

    let mut written = Vec::new();
    for sg in exp.graphs()? {
        let path = graph_path(out, sg.index, "json");
        fs::write(&path, GraphDocument::from_stage_graph(&sg).to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }

    let audits = exp.audits();
    fs::write(out.join("audits.json"), audits_json(exp, &audits))?;
    Ok(RunOutcome {
        records: records.len(),
        graphs: written,
        audits,
    })
}

/// Graph exports in JSON and plain text.
pub fn export_graphs(exp: &Experiment, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for sg in exp.graphs()? {
        let files = [
            (graph_path(out, sg.index, "json"), GraphDocument::from_stage_graph(&sg).to_json()),
            (graph_path(out, sg.index, "edges.txt"), edge_list(&sg.graph)),
            (graph_path(out, sg.index, "vertices.txt"), vertex_table(&sg.graph)),
        ];
        for (path, body) in files {
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
    }
    Ok(written)
}
