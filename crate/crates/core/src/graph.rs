//! Finite weighted graphs extracted from a symmetric Markov operator and a
//! cell partition.
//!
//! For cells `A_1, …, A_n` and an operator `P` symmetric in `L²(μ)`, the
//! conductances are `c_ij = ⟨P 1_{A_i}, 1_{A_j}⟩` and the killing weights
//! `κ_j = μ(A_j) - Σ_i c_ij`. For a step function `f = Σ α_i 1_{A_i}`,
//!
//! ```text
//! ⟨f - P f, f⟩ = ½ Σ_ij (α_i - α_j)² c_ij + Σ_i α_i² κ_i.
//! ```

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{expand_step, inner_unchecked, CellPartition, StepFunction};
use crate::pipeline::{Stage, StageIndex};
use crate::semigroup::{HeatOperator, MarkovOperator, SpectralModel};
use crate::tolerances::{CLAMP_TOL, EDGE_EPS, IDENTIFICATION_TOL, KILLING_TOL, SYMMETRY_TOL};
use crate::measure::OrthonormalBasis;

/// Vertex weights `μ(p_i)`, symmetric conductances `c_ij` (row-major, with
/// diagonal) and killing weights `κ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    mu: Vec<f64>,
    conductance: Vec<f64>,
    kappa: Vec<f64>,
}

impl WeightedGraph {
    /// Validates shapes, positivity of `μ`, symmetry of `c` (to 1e-8), `c >= -1e-12`
    /// and `κ >= -1e-10`. Conductances in `[-1e-12, 0)` are set to zero.
    pub fn new(mu: Vec<f64>, mut conductance: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        let n = mu.len();
        if conductance.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: conductance.len(),
            });
        }
        if kappa.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: kappa.len(),
            });
        }
        if let Some(i) = mu.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Graph(format!("vertex {i} has weight {}", mu[i])));
        }
        for i in 0..n {
            for j in i..n {
                let r = conductance[i * n + j] - conductance[j * n + i];
                if !(libm::fabs(r) <= SYMMETRY_TOL) {
                    return Err(Error::SymmetryViolation { i, j, residual: r });
                }
            }
        }
        for (e, c) in conductance.iter_mut().enumerate() {
            if !c.is_finite() || *c < -CLAMP_TOL {
                return Err(Error::Graph(format!(
                    "negative conductance c[{}][{}] = {c:e}",
                    e / n.max(1),
                    e % n.max(1)
                )));
            }
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        if let Some(i) = kappa.iter().position(|&k| !(k >= -KILLING_TOL && k.is_finite())) {
            return Err(Error::Graph(format!("vertex {i} has killing weight {:e}", kappa[i])));
        }
        Ok(Self { mu, conductance, kappa })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Row-major `n × n` conductance matrix.
    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    pub fn conductance(&self, i: usize, j: usize) -> f64 {
        self.conductance[i * self.len() + j]
    }

    /// Edges `(i, j, c_ij)` with `i < j` and `c_ij > 1e-14`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| {
            (i + 1..n).filter_map(move |j| {
                let c = self.conductance[i * n + j];
                (c > EDGE_EPS).then_some((i, j, c))
            })
        })
    }

    /// `max_j |μ_j - Σ_i c_ij - κ_j|`, zero by construction for extracted graphs.
    pub fn column_sum_defect(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|j| {
                let s: f64 = (0..n).map(|i| self.conductance[i * n + j]).sum();
                libm::fabs(self.mu[j] - s - self.kappa[j])
            })
            .fold(0.0, f64::max)
    }

    /// `max_j |κ_j|`.
    pub fn max_killing(&self) -> f64 {
        self.kappa.iter().map(|k| libm::fabs(*k)).fold(0.0, f64::max)
    }

    /// `½ Σ_ij (α_i - α_j)² c_ij + Σ_i α_i² κ_i`.
    pub fn energy(&self, alpha: &[f64]) -> Result<f64> {
        let n = self.len();
        if alpha.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: alpha.len(),
            });
        }
        let mut e = 0.0;
        for i in 0..n {
            // Each unordered pair counted once, which absorbs the ½.
            for j in i + 1..n {
                let d = alpha[i] - alpha[j];
                e += d * d * self.conductance[i * n + j];
            }
            e += alpha[i] * alpha[i] * self.kappa[i];
        }
        Ok(e)
    }
}

/// The graph energy of a step function on the graph's cells.
pub fn graph_energy(g: &WeightedGraph, f: &StepFunction) -> Result<f64> {
    g.energy(f.coefficients())
}

/// Builds the weighted graph of `op` on `partition`.
///
/// Fails with [`Error::SymmetryViolation`] when `c_ij` and `c_ji` differ by more
/// than 1e-8, i.e. when `op` is not `μ`-symmetric.
pub fn extract_graph<P: MarkovOperator + ?Sized>(op: &P, partition: &CellPartition) -> Result<WeightedGraph> {
    if partition.universe() != op.space().len() {
        return Err(Error::Dimension {
            expected: op.space().len(),
            got: partition.universe(),
        });
    }
    let n = partition.len();
    let mut c = op.cell_gram(partition)?;
    for i in 0..n {
        for j in i + 1..n {
            let r = c[i * n + j] - c[j * n + i];
            if !(libm::fabs(r) <= SYMMETRY_TOL) {
                return Err(Error::SymmetryViolation { i, j, residual: r });
            }
            let avg = 0.5 * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = avg;
            c[j * n + i] = avg;
        }
    }
    let mu = partition.masses().to_vec();
    let kappa = (0..n).map(|j| mu[j] - (0..n).map(|i| c[i * n + j]).sum::<f64>()).collect();
    WeightedGraph::new(mu, c, kappa)
}

/// Outcome of comparing `⟨f - P f, f⟩` with the graph energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentificationReport {
    pub trials: usize,
    pub max_residual: f64,
    pub passed: bool,
}

/// Compares `⟨f - P f, f⟩` and the extracted graph energy on `trials` random
/// step functions with coefficients uniform in `[-1, 1]`.
pub fn verify_identification<P, R>(op: &P, partition: &CellPartition, trials: usize, rng: &mut R) -> Result<IdentificationReport>
where
    P: MarkovOperator + ?Sized,
    R: Rng + ?Sized,
{
    let graph = extract_graph(op, partition)?;
    let space = op.space();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let alpha: Vec<f64> = (0..partition.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sf = StepFunction::new(partition.clone(), alpha)?;
        let f = expand_step(&sf, space)?;
        let pf = op.apply(&f)?;
        let direct = inner_unchecked(&f.sub(&pf), &f, space.weights());
        worst = worst.max(libm::fabs(direct - graph_energy(&graph, &sf)?));
    }
    Ok(IdentificationReport {
        trials,
        max_residual: worst,
        passed: worst <= IDENTIFICATION_TOL,
    })
}

/// The graph of a full stage `(n, m, l, k)`: the cells of `P_{m,k}` inside
/// `X_l` as vertices and `P_{2^{-n}}` as the Markov operator. The stage form
/// is `rate` times the graph energy of the cell averages of `π_m f · 1_{X_l}`.
#[derive(Debug, Clone)]
pub struct StageGraph {
    pub index: StageIndex,
    pub partition: CellPartition,
    pub graph: WeightedGraph,
    pub rate: f64,
}

impl StageGraph {
    /// `E^{(n,m,l,k)}(f)` through the graph.
    pub fn form(&self, model: &SpectralModel, basis: &OrthonormalBasis, f: &[f64]) -> Result<f64> {
        let stage = Stage::new(model, basis, self.index)?;
        Ok(self.rate * self.graph.energy(&stage.cell_averages(f)?)?)
    }
}

pub fn final_stage_graph(model: &SpectralModel, basis: &OrthonormalBasis, index: StageIndex) -> Result<StageGraph> {
    if index.m.is_none() || index.l.is_none() || index.k.is_none() {
        return Err(Error::Range(format!("stage {index} is not a full index")));
    }
    let stage = Stage::new(model, basis, index)?;
    let partition = stage.cells().cloned().ok_or(Error::EmptyProjection)?;
    let op = HeatOperator::new(model, index.time())?;
    let graph = extract_graph(&op, &partition)?;
    Ok(StageGraph {
        index,
        partition,
        graph,
        rate: index.rate(),
    })
}

/// Graph built directly from a conductance matrix given as dense rows; a
/// convenience for small hand-made examples.
pub fn graph_from_rows(mu: &[f64], rows: &[&[f64]]) -> Result<WeightedGraph> {
    let n = mu.len();
    let mut c = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension { expected: n, got: row.len() });
        }
        c[i * n..(i + 1) * n].copy_from_slice(row);
    }
    let kappa = (0..n).map(|j| mu[j] - (0..n).map(|i| c[i * n + j]).sum::<f64>()).collect();
    WeightedGraph::new(mu.to_vec(), c, kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::AmbientSpace;
    use crate::semigroup::MarkovKernelModel;

    fn two_cells() -> (AmbientSpace, CellPartition) {
        let space = AmbientSpace::counting(2).unwrap();
        let p = CellPartition::singletons(&space);
        (space, p)
    }

    #[test]
    fn uniform_averaging_kernel() {
        let (space, p) = two_cells();
        let k = MarkovKernelModel::new(space, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let g = extract_graph(&k, &p).unwrap();
        assert_eq!(g.conductances(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(g.kappa(), &[0.0, 0.0]);
        assert_eq!(g.energy(&[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1, 0.5)]);
    }

    #[test]
    fn identity_kernel_has_no_energy() {
        let (space, p) = two_cells();
        let k = MarkovKernelModel::new(space, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let g = extract_graph(&k, &p).unwrap();
        assert_eq!(g.conductances(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.edges().count(), 0);
        assert_eq!(g.energy(&[3.0, -7.0]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_killing_defect() {
        let (space, p) = two_cells();
        let k = MarkovKernelModel::new(space, vec![0.5, 0.5, 0.5, 0.5])
            .unwrap()
            .with_uniform_killing(0.25)
            .unwrap();
        let g = extract_graph(&k, &p).unwrap();
        for &kap in g.kappa() {
            assert!((kap - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_kernel_is_rejected() {
        let (space, p) = two_cells();
        let k = MarkovKernelModel::from_raw_unchecked(space, vec![0.5, 0.5, 0.1, 0.9]).unwrap();
        assert!(matches!(extract_graph(&k, &p), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn small_negative_conductance_is_clamped() {
        let g = graph_from_rows(&[1.0, 1.0], &[&[1.0, -1e-13], &[-1e-13, 1.0]]).unwrap();
        assert_eq!(g.conductance(0, 1), 0.0);
        assert!(graph_from_rows(&[1.0, 1.0], &[&[1.0, -1e-9], &[-1e-9, 1.0]]).is_err());
    }

    #[test]
    fn energy_checks_dimension() {
        let g = graph_from_rows(&[1.0], &[&[1.0]]).unwrap();
        assert!(matches!(g.energy(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }
}
