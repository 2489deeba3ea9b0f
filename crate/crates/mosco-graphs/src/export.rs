//! Graph and table file formats.
//!
//! Graph JSON: `{"index", "rate", "vertices": [{"id", "mu", "kappa"}], "edges": [{"i", "j", "c"}]}`
//! with one edge per nonzero `c_ij`, `i <= j` (the diagonal is kept so the
//! matrix round-trips). Plain text: an edge list `i j c` and a vertex table
//! `i mu kappa`. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mosco_graphs_core::graph::{StageGraph, WeightedGraph};
use mosco_graphs_core::measure::{AmbientSpace, MeasureVector, OrthonormalBasis};
use mosco_graphs_core::SpectralModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: usize,
    pub mu: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<String>,
    /// Multiplier `2^n` between the graph energy and the stage form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl GraphDocument {
    pub fn from_graph(graph: &WeightedGraph) -> Self {
        let n = graph.len();
        let vertices = (0..n)
            .map(|id| VertexRecord {
                id,
                mu: graph.mu()[id],
                kappa: graph.kappa()[id],
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i..n {
                let c = graph.conductance(i, j);
                if c != 0.0 {
                    edges.push(EdgeRecord { i, j, c });
                }
            }
        }
        Self {
            index: None,
            rate: None,
            vertices,
            edges,
        }
    }

    pub fn from_stage_graph(sg: &StageGraph) -> Self {
        Self {
            index: Some(sg.index.label()),
            rate: Some(sg.rate),
            ..Self::from_graph(&sg.graph)
        }
    }

    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let n = self.vertices.len();
        for (pos, v) in self.vertices.iter().enumerate() {
            if v.id != pos {
                bail!("vertex ids must be 0..{n} in order; found {} at position {pos}", v.id);
            }
        }
        let mut c = vec![0.0; n * n];
        for e in &self.edges {
            if e.i >= n || e.j >= n {
                bail!("edge ({}, {}) references a missing vertex", e.i, e.j);
            }
            c[e.i * n + e.j] = e.c;
            c[e.j * n + e.i] = e.c;
        }
        let mu = self.vertices.iter().map(|v| v.mu).collect();
        let kappa = self.vertices.iter().map(|v| v.kappa).collect();
        Ok(WeightedGraph::new(mu, c, kappa)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph documents serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `i j c` per line, same edges as the JSON form.
pub fn edge_list(graph: &WeightedGraph) -> String {
    let mut s = String::new();
    for e in GraphDocument::from_graph(graph).edges {
        writeln!(s, "{} {} {:?}", e.i, e.j, e.c).expect("writing to a String");
    }
    s
}

/// `i mu kappa` per line.
pub fn vertex_table(graph: &WeightedGraph) -> String {
    let mut s = String::new();
    for i in 0..graph.len() {
        writeln!(s, "{} {:?} {:?}", i, graph.mu()[i], graph.kappa()[i]).expect("writing to a String");
    }
    s
}

/// Inverse of [`edge_list`] and [`vertex_table`].
pub fn parse_text(edges: &str, vertices: &str) -> Result<WeightedGraph> {
    let mut doc = GraphDocument {
        index: None,
        rate: None,
        vertices: Vec::new(),
        edges: Vec::new(),
    };
    for (ln, line) in vertices.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [id, mu, kappa] = f[..] else {
            bail!("vertex table line {}: expected `i mu kappa`", ln + 1);
        };
        doc.vertices.push(VertexRecord {
            id: id.parse().with_context(|| format!("vertex table line {}", ln + 1))?,
            mu: mu.parse().with_context(|| format!("vertex table line {}", ln + 1))?,
            kappa: kappa.parse().with_context(|| format!("vertex table line {}", ln + 1))?,
        });
    }
    for (ln, line) in edges.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let [i, j, c] = f[..] else {
            bail!("edge list line {}: expected `i j c`", ln + 1);
        };
        doc.edges.push(EdgeRecord {
            i: i.parse().with_context(|| format!("edge list line {}", ln + 1))?,
            j: j.parse().with_context(|| format!("edge list line {}", ln + 1))?,
            c: c.parse().with_context(|| format!("edge list line {}", ln + 1))?,
        });
    }
    doc.to_graph()
}

/// Reads a spectral model from a whitespace-separated table: one row per
/// mode, the eigenvalue followed by the mode's values at the `resolution`
/// midpoints of `[0, 1]`. Rows are re-orthonormalized when needed.
pub fn read_spectral_table(path: &Path, resolution: usize, levels: usize) -> Result<SpectralModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spectral_table(&text, resolution, levels).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_spectral_table(text: &str, resolution: usize, levels: usize) -> Result<SpectralModel> {
    let space = AmbientSpace::midpoint_grid(resolution)?.with_uniform_exhaustion(levels)?;
    let mut eigenvalues = Vec::new();
    let mut vectors = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("line {}", ln + 1))?;
        if values.len() != resolution + 1 {
            bail!("line {}: expected {} numbers, found {}", ln + 1, resolution + 1, values.len());
        }
        eigenvalues.push(values[0]);
        vectors.push(MeasureVector::new(values[1..].to_vec()));
    }
    if vectors.is_empty() {
        bail!("table has no modes");
    }
    let basis = OrthonormalBasis::new(&space, vectors)?;
    Ok(SpectralModel::new("table", eigenvalues, basis)?)
}

pub fn write_spectral_table(model: &SpectralModel) -> String {
    let mut s = String::new();
    for (lam, phi) in model.eigenvalues().iter().zip(model.basis().vectors()) {
        write!(s, "{lam:?}").expect("writing to a String");
        for v in phi.iter() {
            write!(s, " {v:?}").expect("writing to a String");
        }
        s.push('\n');
    }
    s
}
