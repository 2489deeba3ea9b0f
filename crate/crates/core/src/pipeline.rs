//! The four approximation stages and their generators.
//!
//! For a spectral model with semigroup `P_t`, an orthonormal system
//! `(b_i)` and an exhaustion `(X_l)`, a [`StageIndex`] `(n, m, l, k)` selects
//!
//! ```text
//! E(n)(f)       = 2^n ⟨f - P f, f⟩                  P = P_{2^-n}
//! E(n,m)(f)     = E(n)(π_m f)
//! E(n,m,l)(f)   = E(n)(π_m f · 1_{X_l})
//! E(n,m,l,k)(f) = E(n)(π_{m,l,k} f)
//! ```
//!
//! where `π_{m,l,k} f` averages `π_m f` over the cells of the level-set
//! partition `P_{m,k}` under `μ` restricted to `X_l`. Leaving `l` or `k`
//! unset skips that step; leaving `m` unset gives the bare semigroup stage.
//!
//! Every stage operator `L = 2^n Π*(P - I)Π` has range inside
//! `span(b_1, …, b_m)` and vanishes on its orthogonal complement, so
//! [`StageForm`] stores it as an `m × m` matrix in that orthonormal basis.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::{inner_unchecked, AmbientSpace, CellPartition, IndexSet, MeasureVector, OrthonormalBasis};
use crate::semigroup::SpectralModel;

/// Largest supported dyadic time level.
pub const MAX_TIME_LEVEL: u32 = 52;
/// Largest supported partition level; `2^{2k+1}` must fit in an `i64`.
pub const MAX_PARTITION_LEVEL: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StageIndex {
    pub n: u32,
    pub m: Option<usize>,
    pub l: Option<usize>,
    pub k: Option<u32>,
}

impl StageIndex {
    pub fn semigroup(n: u32) -> Self {
        Self { n, m: None, l: None, k: None }
    }

    pub fn galerkin(n: u32, m: usize) -> Self {
        Self { n, m: Some(m), l: None, k: None }
    }

    pub fn truncated(n: u32, m: usize, l: usize) -> Self {
        Self { n, m: Some(m), l: Some(l), k: None }
    }

    pub fn full(n: u32, m: usize, l: usize, k: u32) -> Self {
        Self { n, m: Some(m), l: Some(l), k: Some(k) }
    }

    /// `2^n`, the a-priori bound of the stage form.
    pub fn rate(&self) -> f64 {
        libm::ldexp(1.0, self.n as i32)
    }

    /// `t = 2^{-n}`.
    pub fn time(&self) -> f64 {
        libm::ldexp(1.0, -(self.n as i32))
    }

    /// Checks the index against a basis of `basis_len` vectors and an
    /// exhaustion with `levels` levels.
    pub fn validate(&self, basis_len: usize, levels: usize) -> Result<()> {
        if self.n > MAX_TIME_LEVEL {
            return Err(Error::Range(format!("n = {} exceeds {MAX_TIME_LEVEL}", self.n)));
        }
        match self.m {
            None if self.l.is_some() || self.k.is_some() => {
                return Err(Error::Range("l and k need a Galerkin dimension m".into()))
            }
            Some(m) if m == 0 || m > basis_len => {
                return Err(Error::Range(format!("m = {m} outside 1..={basis_len}")))
            }
            _ => {}
        }
        if let Some(l) = self.l {
            if l == 0 || l > levels {
                return Err(Error::Range(format!("l = {l} outside 1..={levels}")));
            }
        }
        if let Some(k) = self.k {
            if k > MAX_PARTITION_LEVEL {
                return Err(Error::Range(format!("k = {k} exceeds {MAX_PARTITION_LEVEL}")));
            }
        }
        Ok(())
    }

    /// Stable identifier such as `n8_m16_l4_k6`; absent stages are omitted.
    pub fn label(&self) -> String {
        let mut s = format!("n{}", self.n);
        if let Some(m) = self.m {
            s.push_str(&format!("_m{m}"));
        }
        if let Some(l) = self.l {
            s.push_str(&format!("_l{l}"));
        }
        if let Some(k) = self.k {
            s.push_str(&format!("_k{k}"));
        }
        s
    }
}

impl fmt::Display for StageIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `2^n ⟨f - P_{2^{-n}} f, f⟩`.
pub fn semigroup_form(model: &SpectralModel, n: u32, f: &[f64]) -> Result<f64> {
    let idx = StageIndex::semigroup(n);
    idx.validate(model.modes(), model.space().exhaustion_levels())?;
    Ok(idx.rate() * model.dissipation(idx.time(), f)?)
}

/// `π_m f = Σ_{i<m} ⟨f, b_i⟩ b_i`.
pub fn galerkin_projection(basis: &OrthonormalBasis, m: usize, f: &[f64]) -> Result<MeasureVector> {
    let c = basis.coefficients(f, m)?;
    Ok(basis.synthesize(&c))
}

/// `f · 1_{X_l}`.
pub fn sigma_truncate(space: &AmbientSpace, l: usize, f: &[f64]) -> Result<MeasureVector> {
    space.check(f)?;
    let set = space.exhaustion_set(l)?;
    Ok(MeasureVector::new(f.to_vec()).masked(&set))
}

/// Number of level sets per function before intersecting: `2^{2k+1} + 2`.
pub fn level_cells_per_function(k: u32) -> u64 {
    (1u64 << (2 * k + 1)) + 2
}

/// Label `j` of the level set containing `v`: `j/2^k < v <= (j+1)/2^k` for
/// `-4^k <= j < 4^k`, `-4^k - 1` for `v <= -2^k` and `4^k` for `v > 2^k`.
pub fn level_label(v: f64, k: u32) -> i64 {
    let four_k = 1i64 << (2 * k);
    let scaled = libm::ldexp(v, k as i32);
    if scaled <= -(four_k as f64) {
        return -four_k - 1;
    }
    if scaled > four_k as f64 {
        return four_k;
    }
    // Exact: scaling by a power of two does not round.
    libm::ceil(scaled) as i64 - 1
}

/// The partition `P_{m,k}` into nonempty intersections of the level sets of
/// `b_1, …, b_m`, ordered by label tuple.
pub fn level_partition(basis: &OrthonormalBasis, m: usize, k: u32) -> Result<CellPartition> {
    if m == 0 || m > basis.len() {
        return Err(Error::Range(format!("m = {m} outside 1..={}", basis.len())));
    }
    if k > MAX_PARTITION_LEVEL {
        return Err(Error::Range(format!("k = {k} exceeds {MAX_PARTITION_LEVEL}")));
    }
    let space = basis.space();
    let mut groups: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for x in 0..space.len() {
        let key: Vec<i64> = basis.vectors()[..m].iter().map(|phi| level_label(phi[x], k)).collect();
        groups.entry(key).or_default().push(x);
    }
    let (labels, cells): (Vec<_>, Vec<_>) = groups.into_iter().unzip();
    CellPartition::with_labels(space, cells, k, labels)
}

/// Total mass of the cells lying in some `{|b_i| >= 2^k}`.
pub fn tail_mass(partition: &CellPartition) -> f64 {
    (0..partition.len())
        .filter(|&c| partition.is_tail(c))
        .map(|c| partition.masses()[c])
        .sum()
}

/// Largest spread `max - min` of `b_i`, `i < m`, over a non-tail cell.
pub fn max_cell_oscillation(partition: &CellPartition, basis: &OrthonormalBasis, m: usize) -> f64 {
    let mut worst = 0.0f64;
    for (c, cell) in partition.cells().iter().enumerate() {
        if partition.is_tail(c) {
            continue;
        }
        for phi in &basis.vectors()[..m] {
            let (lo, hi) = cell
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(phi[x]), hi.max(phi[x])));
            worst = worst.max(hi - lo);
        }
    }
    worst
}

/// A stage of the pipeline bound to a model and a Galerkin basis, with its
/// exhaustion mask and restricted cell partition precomputed.
#[derive(Debug, Clone)]
pub struct Stage<'a> {
    model: &'a SpectralModel,
    basis: &'a OrthonormalBasis,
    index: StageIndex,
    mask: Option<IndexSet>,
    cells: Option<CellPartition>,
}

impl<'a> Stage<'a> {
    pub fn new(model: &'a SpectralModel, basis: &'a OrthonormalBasis, index: StageIndex) -> Result<Self> {
        if basis.space() != model.space() {
            return Err(Error::Domain("basis and model live on different ambient spaces".into()));
        }
        let space = model.space();
        index.validate(basis.len(), space.exhaustion_levels())?;
        let mask = index.l.map(|l| space.exhaustion_set(l)).transpose()?;
        let cells = match (index.m, index.k) {
            (Some(m), Some(k)) => {
                let full = level_partition(basis, m, k)?;
                let support = mask.clone().unwrap_or_else(|| IndexSet::full(space.len()));
                let restricted = full.restrict(space, &support)?;
                if restricted.is_empty() {
                    return Err(Error::EmptyProjection);
                }
                Some(restricted)
            }
            _ => None,
        };
        Ok(Self {
            model,
            basis,
            index,
            mask,
            cells,
        })
    }

    pub fn index(&self) -> StageIndex {
        self.index
    }

    pub fn model(&self) -> &'a SpectralModel {
        self.model
    }

    pub fn basis(&self) -> &'a OrthonormalBasis {
        self.basis
    }

    /// The cells `A ∩ X_l` of positive mass, when the partition stage is on.
    pub fn cells(&self) -> Option<&CellPartition> {
        self.cells.as_ref()
    }

    /// Masking and conditioning, applied after the Galerkin step.
    fn finish(&self, g: MeasureVector) -> MeasureVector {
        let g = match &self.mask {
            Some(set) => g.masked(set),
            None => g,
        };
        match &self.cells {
            Some(cells) => {
                let mut out = MeasureVector::zeros(g.len());
                for (cell, avg) in cells.cells().iter().zip(self.averages(cells, &g)) {
                    for &x in cell {
                        out[x] = avg;
                    }
                }
                out
            }
            None => g,
        }
    }

    fn averages(&self, cells: &CellPartition, g: &[f64]) -> Vec<f64> {
        let w = self.model.space().weights();
        cells
            .cells()
            .iter()
            .zip(cells.masses())
            .map(|(cell, &mass)| cell.iter().map(|&x| g[x] * w[x]).sum::<f64>() / mass)
            .collect()
    }

    /// Cell values `α_A` of `π_{m,l,k} f`; requires the partition stage.
    pub fn cell_averages(&self, f: &[f64]) -> Result<Vec<f64>> {
        let cells = self
            .cells
            .as_ref()
            .ok_or_else(|| Error::Range(format!("stage {} has no partition", self.index)))?;
        let m = self.index.m.unwrap_or(0);
        let g = galerkin_projection(self.basis, m, f)?;
        let g = match &self.mask {
            Some(set) => g.masked(set),
            None => g,
        };
        Ok(self.averages(cells, &g))
    }

    /// The composed projection: `f`, `π_m f`, `π_m f·1_{X_l}` or `π_{m,l,k} f`.
    pub fn project(&self, f: &[f64]) -> Result<MeasureVector> {
        self.model.space().check(f)?;
        Ok(match self.index.m {
            None => MeasureVector::new(f.to_vec()),
            Some(m) => self.finish(galerkin_projection(self.basis, m, f)?),
        })
    }

    /// The stage form evaluated directly: `2^n ⟨g - P g, g⟩` with `g` the projection of `f`.
    pub fn form(&self, f: &[f64]) -> Result<f64> {
        let g = self.project(f)?;
        Ok(self.index.rate() * self.model.dissipation(self.index.time(), &g)?)
    }

    /// Assembles the generator on its invariant subspace.
    pub fn generator(&self) -> Result<StageForm> {
        let rate = self.index.rate();
        let t = self.index.time();
        let model = self.model;
        let space = model.space();
        let w = space.weights();
        let (subspace, generator) = match self.index.m {
            None => {
                let k = model.modes();
                let mut a = DMatrix::zeros(k, k);
                for (i, &lam) in model.eigenvalues().iter().enumerate() {
                    a[(i, i)] = rate * libm::expm1(-lam * t);
                }
                (model.basis().vectors().to_vec(), a)
            }
            Some(m) => {
                let subspace: Vec<MeasureVector> = self.basis.vectors()[..m].to_vec();
                let decay: Vec<f64> = model.eigenvalues().iter().map(|&lam| -libm::expm1(-lam * t)).collect();
                let mut coeffs = Vec::with_capacity(m);
                let mut residuals = Vec::with_capacity(m);
                for b in &subspace {
                    let h = self.finish(b.clone());
                    let (c, r) = model.split(&h)?;
                    coeffs.push(c);
                    residuals.push(r);
                }
                let mut a = DMatrix::zeros(m, m);
                for i in 0..m {
                    for j in i..m {
                        let in_span: f64 = decay
                            .iter()
                            .zip(&coeffs[i])
                            .zip(&coeffs[j])
                            .map(|((d, x), y)| d * x * y)
                            .sum();
                        let v = -rate * (in_span + inner_unchecked(&residuals[i], &residuals[j], w));
                        a[(i, j)] = v;
                        a[(j, i)] = v;
                    }
                }
                (subspace, a)
            }
        };
        Ok(StageForm {
            index: self.index,
            space: space.clone(),
            subspace,
            generator,
            cells: self.cells.clone(),
        })
    }
}

/// `E^{(n,m,l,k)}(f)`, with absent stages skipped.
pub fn stage_form(model: &SpectralModel, basis: &OrthonormalBasis, index: StageIndex, f: &[f64]) -> Result<f64> {
    Stage::new(model, basis, index)?.form(f)
}

/// The generator of a stage as a symmetric matrix on its subspace.
pub fn stage_generator(model: &SpectralModel, basis: &OrthonormalBasis, index: StageIndex) -> Result<StageForm> {
    Stage::new(model, basis, index)?.generator()
}

/// A bounded stage form together with the matrix of its generator on an
/// orthonormal family `(e_i)`: `generator[(i, j)] = ⟨L e_j, e_i⟩`. The
/// generator is zero on the orthogonal complement of the family.
#[derive(Debug, Clone)]
pub struct StageForm {
    index: StageIndex,
    space: AmbientSpace,
    subspace: Vec<MeasureVector>,
    generator: DMatrix<f64>,
    cells: Option<CellPartition>,
}

impl StageForm {
    pub fn index(&self) -> StageIndex {
        self.index
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.subspace.len()
    }

    pub fn subspace(&self) -> &[MeasureVector] {
        &self.subspace
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn cells(&self) -> Option<&CellPartition> {
        self.cells.as_ref()
    }

    /// `2^n`.
    pub fn bound(&self) -> f64 {
        self.index.rate()
    }

    /// `⟨f, e_i⟩`.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.space.check(f)?;
        let w = self.space.weights();
        Ok(self.subspace.iter().map(|e| inner_unchecked(f, e, w)).collect())
    }

    /// `⟨-L f, f⟩` through the matrix.
    pub fn quadratic_form(&self, f: &[f64]) -> Result<f64> {
        let a = nalgebra::DVector::from_vec(self.coefficients(f)?);
        Ok(-(a.transpose() * &self.generator * &a)[(0, 0)])
    }

    /// `L f` as an ambient vector.
    pub fn apply(&self, f: &[f64]) -> Result<MeasureVector> {
        let a = nalgebra::DVector::from_vec(self.coefficients(f)?);
        let la = &self.generator * a;
        let mut out = MeasureVector::zeros(self.space.len());
        for (c, e) in la.iter().zip(&self.subspace) {
            out.axpy(*c, e);
        }
        Ok(out)
    }

    /// `max_ij |A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let a = &self.generator;
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in i + 1..a.ncols() {
                worst = worst.max(libm::fabs(a[(i, j)] - a[(j, i)]));
            }
        }
        worst
    }

    /// Largest eigenvalue of the (symmetrized) generator matrix.
    pub fn max_eigenvalue(&self) -> f64 {
        let sym = (&self.generator + self.generator.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
