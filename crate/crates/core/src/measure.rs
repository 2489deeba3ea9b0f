//! Finite stand-ins for a σ-finite measure space: sample sites carrying
//! quadrature weights, an exhaustion by increasing index sets, functions
//! sampled on the sites, and step functions over cell partitions.
//!
//! Everything downstream is an integral against the weights, so the
//! weighted inner product [`weighted_inner`] is the only notion of geometry.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::tolerances::TOL_ORTHO;

/// Sample sites with nonnegative weights and a monotone exhaustion
/// `X_1 ⊆ X_2 ⊆ … ⊆ X_{levels}` whose last member is every site.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSpace {
    coords: Vec<f64>,
    weights: Vec<f64>,
    /// 1-based level at which each site joins the exhaustion.
    entry_level: Vec<usize>,
    levels: usize,
}

impl AmbientSpace {
    /// Sites at `coords` with masses `weights`; the exhaustion is trivial
    /// (a single level covering everything).
    pub fn new(coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coords.len() != weights.len() {
            return Err(Error::Dimension {
                expected: coords.len(),
                got: weights.len(),
            });
        }
        if coords.is_empty() {
            return Err(Error::Domain("ambient space needs at least one point".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain(format!(
                "weight {i} is {} (must be finite and nonnegative)",
                weights[i]
            )));
        }
        let n = coords.len();
        Ok(Self {
            coords,
            weights,
            entry_level: vec![1; n],
            levels: 1,
        })
    }

    /// Midpoint rule on `[0, 1]`: `points` cells of width `1/points`.
    pub fn midpoint_grid(points: usize) -> Result<Self> {
        let h = 1.0 / points as f64;
        let coords = (0..points).map(|i| (i as f64 + 0.5) * h).collect();
        Self::new(coords, vec![h; points])
    }

    /// Unit mass on every site; coordinates are still the midpoints of `[0, 1]`.
    pub fn counting(points: usize) -> Result<Self> {
        let h = 1.0 / points as f64;
        let coords = (0..points).map(|i| (i as f64 + 0.5) * h).collect();
        Self::new(coords, vec![1.0; points])
    }

    /// Replaces the exhaustion by `X_l = { i : i·levels < l·M }`, i.e. the
    /// first `l/levels` fraction of the sites.
    pub fn with_uniform_exhaustion(mut self, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Domain("exhaustion needs at least one level".into()));
        }
        let m = self.len();
        self.entry_level = (0..m).map(|i| i * levels / m + 1).collect();
        self.levels = levels;
        Ok(self)
    }

    /// Replaces the exhaustion by explicit sets, which must increase and end
    /// with the full index set.
    pub fn with_exhaustion(mut self, sets: &[Vec<usize>]) -> Result<Self> {
        let m = self.len();
        if sets.is_empty() {
            return Err(Error::Domain("exhaustion needs at least one level".into()));
        }
        let mut entry = vec![usize::MAX; m];
        let mut previous: Option<&Vec<usize>> = None;
        for (l, set) in sets.iter().enumerate() {
            let mut seen = vec![false; m];
            for &i in set {
                if i >= m {
                    return Err(Error::Range(format!("exhaustion set {} has index {i} >= {m}", l + 1)));
                }
                seen[i] = true;
                if entry[i] == usize::MAX {
                    entry[i] = l + 1;
                }
            }
            if let Some(prev) = previous {
                if let Some(&i) = prev.iter().find(|&&i| !seen[i]) {
                    return Err(Error::Domain(format!(
                        "exhaustion is not monotone: index {i} leaves at level {}",
                        l + 1
                    )));
                }
            }
            previous = Some(set);
        }
        if let Some(i) = entry.iter().position(|&e| e == usize::MAX) {
            return Err(Error::Domain(format!("exhaustion never covers index {i}")));
        }
        self.entry_level = entry;
        self.levels = sets.len();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Number of exhaustion levels `l_max`.
    pub fn exhaustion_levels(&self) -> usize {
        self.levels
    }

    /// `X_l` for `1 <= l <= l_max`.
    pub fn exhaustion_set(&self, l: usize) -> Result<IndexSet> {
        if l == 0 || l > self.levels {
            return Err(Error::Range(format!(
                "exhaustion level {l} outside 1..={}",
                self.levels
            )));
        }
        Ok(IndexSet {
            mask: self.entry_level.iter().map(|&e| e <= l).collect(),
        })
    }

    pub fn mass_of(&self, set: &IndexSet) -> f64 {
        set.iter().map(|i| self.weights[i]).sum()
    }

    pub(crate) fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// A subset of the ambient indices, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    mask: Vec<bool>,
}

impl IndexSet {
    pub fn full(universe: usize) -> Self {
        Self {
            mask: vec![true; universe],
        }
    }

    pub fn empty(universe: usize) -> Self {
        Self {
            mask: vec![false; universe],
        }
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; universe];
        for i in indices {
            if i >= universe {
                return Err(Error::Range(format!("index {i} >= {universe}")));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn universe(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.mask.len() == other.mask.len()
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// Values of a function at every ambient site.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureVector(Vec<f64>);

impl MeasureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        debug_assert_eq!(self.0.len(), x.len());
        for (s, &v) in self.0.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        debug_assert_eq!(self.0.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &[f64]) -> Self {
        debug_assert_eq!(self.0.len(), other.len());
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise product with the indicator of `set`.
    pub fn masked(&self, set: &IndexSet) -> Self {
        Self(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &v)| if set.contains(i) { v } else { 0.0 })
                .collect(),
        )
    }
}

impl Deref for MeasureVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for MeasureVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for MeasureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `Σ_x f(x) g(x) w(x)`.
pub fn weighted_inner(f: &[f64], g: &[f64], space: &AmbientSpace) -> Result<f64> {
    space.check(f)?;
    space.check(g)?;
    Ok(inner_unchecked(f, g, space.weights()))
}

pub fn weighted_norm(f: &[f64], space: &AmbientSpace) -> Result<f64> {
    Ok(libm::sqrt(weighted_inner(f, f, space)?))
}

#[inline]
pub(crate) fn inner_unchecked(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(g).zip(w).map(|((a, b), c)| a * b * c).sum()
}

/// Level-set provenance of a partition: the refinement level `k` and, per
/// cell, the multi-index `(j_1, …, j_m)` of the level sets it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelLabels {
    pub level: u32,
    pub multi: Vec<Vec<i64>>,
}

/// Disjoint cells of positive mass covering some of the ambient indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    universe: usize,
    cells: Vec<Vec<usize>>,
    masses: Vec<f64>,
    labels: Option<LevelLabels>,
}

impl CellPartition {
    /// Builds a partition from explicit cells. Cells of zero mass (including
    /// empty ones) are dropped, so cell numbering can shift.
    pub fn new(space: &AmbientSpace, cells: Vec<Vec<usize>>) -> Result<Self> {
        Self::build(space, cells, None)
    }

    pub(crate) fn with_labels(
        space: &AmbientSpace,
        cells: Vec<Vec<usize>>,
        level: u32,
        multi: Vec<Vec<i64>>,
    ) -> Result<Self> {
        Self::build(space, cells, Some(LevelLabels { level, multi }))
    }

    fn build(space: &AmbientSpace, cells: Vec<Vec<usize>>, labels: Option<LevelLabels>) -> Result<Self> {
        let m = space.len();
        let mut used = vec![false; m];
        for (c, cell) in cells.iter().enumerate() {
            for &i in cell {
                if i >= m {
                    return Err(Error::Partition(format!("cell {c} has index {i} >= {m}")));
                }
                if used[i] {
                    return Err(Error::Partition(format!("index {i} appears in more than one cell")));
                }
                used[i] = true;
            }
        }
        let w = space.weights();
        let mut kept_cells = Vec::with_capacity(cells.len());
        let mut masses = Vec::with_capacity(cells.len());
        let mut kept_labels = labels.as_ref().map(|_| Vec::new());
        for (c, cell) in cells.into_iter().enumerate() {
            let mass: f64 = cell.iter().map(|&i| w[i]).sum();
            if mass > 0.0 {
                if let (Some(out), Some(l)) = (kept_labels.as_mut(), labels.as_ref()) {
                    out.push(l.multi[c].clone());
                }
                kept_cells.push(cell);
                masses.push(mass);
            }
        }
        Ok(Self {
            universe: m,
            cells: kept_cells,
            masses,
            labels: labels.map(|l| LevelLabels {
                level: l.level,
                multi: kept_labels.unwrap_or_default(),
            }),
        })
    }

    /// Every site of positive mass as its own cell.
    pub fn singletons(space: &AmbientSpace) -> Self {
        let cells = (0..space.len()).map(|i| vec![i]).collect();
        Self::new(space, cells).expect("singletons are disjoint and in range")
    }

    /// One cell holding every site.
    pub fn trivial(space: &AmbientSpace) -> Self {
        Self::new(space, vec![(0..space.len()).collect()]).expect("single cell is valid")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn labels(&self) -> Option<&LevelLabels> {
        self.labels.as_ref()
    }

    /// A level-set cell is a tail cell when one of its coordinates lies in
    /// `{φ_i <= -2^k}` or `{φ_i > 2^k}`. Unlabelled partitions have none.
    pub fn is_tail(&self, cell: usize) -> bool {
        match &self.labels {
            Some(l) => {
                let (lo, hi) = tail_labels(l.level);
                l.multi[cell].iter().any(|&j| j == lo || j == hi)
            }
            None => false,
        }
    }

    /// For every ambient index, the cell containing it.
    pub fn owner_map(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.universe];
        for (c, cell) in self.cells.iter().enumerate() {
            for &i in cell {
                owner[i] = Some(c);
            }
        }
        owner
    }

    /// The union of all cells.
    pub fn support(&self) -> IndexSet {
        let mut mask = vec![false; self.universe];
        for &i in self.cells.iter().flatten() {
            mask[i] = true;
        }
        IndexSet::from_mask(mask)
    }

    /// Cells intersected with `set`, dropping those left without mass.
    pub fn restrict(&self, space: &AmbientSpace, set: &IndexSet) -> Result<Self> {
        if set.universe() != self.universe || space.len() != self.universe {
            return Err(Error::Dimension {
                expected: self.universe,
                got: set.universe(),
            });
        }
        let cells = self
            .cells
            .iter()
            .map(|c| c.iter().copied().filter(|&i| set.contains(i)).collect())
            .collect();
        match &self.labels {
            Some(l) => Self::with_labels(space, cells, l.level, l.multi.clone()),
            None => Self::new(space, cells),
        }
    }

    pub fn indicator(&self, cell: usize) -> MeasureVector {
        let mut v = vec![0.0; self.universe];
        for &i in &self.cells[cell] {
            v[i] = 1.0;
        }
        MeasureVector::new(v)
    }

    /// Whether every cell of `self` sits inside a single cell of `coarse`.
    /// Returns the first offending cell otherwise.
    pub fn refines(&self, coarse: &CellPartition) -> core::result::Result<(), usize> {
        let owner = coarse.owner_map();
        for (c, cell) in self.cells.iter().enumerate() {
            let parents: BTreeSet<Option<usize>> = cell.iter().map(|&i| owner[i]).collect();
            if parents.len() != 1 || parents.contains(&None) {
                return Err(c);
            }
        }
        Ok(())
    }
}

pub(crate) fn tail_labels(k: u32) -> (i64, i64) {
    let four_k = 1i64 << (2 * k);
    (-four_k - 1, four_k)
}

/// Σ_A α_A 1_A over a cell partition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    partition: CellPartition,
    coefficients: Vec<f64>,
}

impl StepFunction {
    pub fn new(partition: CellPartition, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != partition.len() {
            return Err(Error::Dimension {
                expected: partition.len(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            partition,
            coefficients,
        })
    }

    pub fn partition(&self) -> &CellPartition {
        &self.partition
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `Σ_A α_A² mass(A)`.
    pub fn norm_squared(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.partition.masses())
            .map(|(a, m)| a * a * m)
            .sum()
    }
}

/// Constant `α_A` on each cell `A`, zero off the partition.
pub fn expand_step(sf: &StepFunction, space: &AmbientSpace) -> Result<MeasureVector> {
    let p = sf.partition();
    if p.universe() != space.len() {
        return Err(Error::Partition(format!(
            "partition indexes {} points but the space has {}",
            p.universe(),
            space.len()
        )));
    }
    let mut out = vec![0.0; space.len()];
    for (cell, &a) in p.cells().iter().zip(sf.coefficients()) {
        for &i in cell {
            out[i] = a;
        }
    }
    Ok(MeasureVector::new(out))
}

/// Conditional expectation of `f·1_{restrict_to}` given the cells of `p`
/// under the measure restricted to `restrict_to`: the weighted-L² orthogonal
/// projection onto step functions on the restricted cells.
pub fn condition_on_partition(
    f: &[f64],
    p: &CellPartition,
    space: &AmbientSpace,
    restrict_to: &IndexSet,
) -> Result<StepFunction> {
    space.check(f)?;
    let restricted = p.restrict(space, restrict_to)?;
    if restricted.is_empty() {
        return Err(Error::EmptyProjection);
    }
    let w = space.weights();
    let coefficients = restricted
        .cells()
        .iter()
        .zip(restricted.masses())
        .map(|(cell, &mass)| cell.iter().map(|&i| f[i] * w[i]).sum::<f64>() / mass)
        .collect();
    StepFunction::new(restricted, coefficients)
}

/// Orthonormal vectors `φ_1, …, φ_K` in the weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    space: AmbientSpace,
    vectors: Vec<MeasureVector>,
    reorthonormalized: bool,
}

impl OrthonormalBasis {
    /// Accepts `vectors` as they are when their Gram matrix is within
    /// [`TOL_ORTHO`] of the identity; otherwise runs modified Gram–Schmidt
    /// with one reorthogonalization pass.
    pub fn new(space: &AmbientSpace, vectors: Vec<MeasureVector>) -> Result<Self> {
        for v in &vectors {
            space.check(v)?;
        }
        let defect = gram_defect(&vectors, space.weights());
        let (vectors, reorthonormalized) = if defect > TOL_ORTHO {
            (gram_schmidt(vectors, space.weights())?, true)
        } else {
            (vectors, false)
        };
        Ok(Self {
            space: space.clone(),
            vectors,
            reorthonormalized,
        })
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[MeasureVector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &MeasureVector {
        &self.vectors[i]
    }

    pub fn was_reorthonormalized(&self) -> bool {
        self.reorthonormalized
    }

    /// `max_ij |⟨φ_i, φ_j⟩ - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        gram_defect(&self.vectors, self.space.weights())
    }

    /// `⟨f, φ_i⟩` for the first `count` vectors.
    pub fn coefficients(&self, f: &[f64], count: usize) -> Result<Vec<f64>> {
        self.space.check(f)?;
        if count > self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: count,
            });
        }
        let w = self.space.weights();
        Ok(self.vectors[..count]
            .iter()
            .map(|phi| inner_unchecked(f, phi, w))
            .collect())
    }

    /// `Σ_i c_i φ_i` over the leading coefficients.
    pub fn synthesize(&self, coefficients: &[f64]) -> MeasureVector {
        let mut out = MeasureVector::zeros(self.space.len());
        for (c, phi) in coefficients.iter().zip(&self.vectors) {
            out.axpy(*c, phi);
        }
        out
    }
}

fn gram_defect(vectors: &[MeasureVector], w: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(libm::fabs(inner_unchecked(a, b, w) - target));
        }
    }
    worst
}

fn gram_schmidt(mut vectors: Vec<MeasureVector>, w: &[f64]) -> Result<Vec<MeasureVector>> {
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        let original = libm::sqrt(inner_unchecked(v, v, w));
        for _pass in 0..2 {
            for q in done.iter() {
                let c = inner_unchecked(v, q, w);
                v.axpy(-c, q);
            }
        }
        let norm = libm::sqrt(inner_unchecked(v, v, w));
        if !(norm > 1e-10 * original.max(f64::MIN_POSITIVE)) {
            return Err(Error::Domain(format!("basis vector {i} is linearly dependent on its predecessors")));
        }
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_point() -> AmbientSpace {
        AmbientSpace::new(vec![0.0, 1.0], vec![0.5, 0.25]).unwrap()
    }

    #[test]
    fn inner_product_by_hand() {
        let s = two_point();
        let v = weighted_inner(&[1.0, 2.0], &[3.0, -1.0], &s).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_one_has_total_mass() {
        let s = AmbientSpace::new(vec![0.0, 0.5, 1.0], vec![0.5, 1.0, 0.5]).unwrap();
        let one = MeasureVector::constant(3, 1.0);
        assert_eq!(weighted_inner(&one, &one, &s).unwrap(), 2.0);
    }

    #[test]
    fn inner_product_length_mismatch() {
        let s = two_point();
        assert!(matches!(
            weighted_inner(&[1.0], &[1.0, 2.0], &s),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn expand_three_points() {
        let s = AmbientSpace::midpoint_grid(3).unwrap();
        let p = CellPartition::new(&s, vec![vec![0, 2], vec![1]]).unwrap();
        let sf = StepFunction::new(p, vec![2.0, -1.0]).unwrap();
        assert_eq!(&*expand_step(&sf, &s).unwrap(), &[2.0, -1.0, 2.0]);
        let norm = weighted_inner(&expand_step(&sf, &s).unwrap(), &expand_step(&sf, &s).unwrap(), &s).unwrap();
        assert!((norm - sf.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn expand_single_and_two_cells() {
        let s = AmbientSpace::midpoint_grid(4).unwrap();
        let sf = StepFunction::new(CellPartition::trivial(&s), vec![3.5]).unwrap();
        assert_eq!(&*expand_step(&sf, &s).unwrap(), &[3.5; 4]);

        let s2 = AmbientSpace::midpoint_grid(2).unwrap();
        let p = CellPartition::new(&s2, vec![vec![0], vec![1]]).unwrap();
        let sf = StepFunction::new(p, vec![1.0, 0.0]).unwrap();
        assert_eq!(&*expand_step(&sf, &s2).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn expand_rejects_foreign_partition() {
        let small = AmbientSpace::midpoint_grid(2).unwrap();
        let big = AmbientSpace::midpoint_grid(5).unwrap();
        let sf = StepFunction::new(CellPartition::trivial(&small), vec![1.0]).unwrap();
        assert!(matches!(expand_step(&sf, &big), Err(Error::Partition(_))));
    }

    #[test]
    fn partition_rejects_overlap_and_range() {
        let s = AmbientSpace::midpoint_grid(3).unwrap();
        assert!(CellPartition::new(&s, vec![vec![0, 1], vec![1]]).is_err());
        assert!(CellPartition::new(&s, vec![vec![0, 3]]).is_err());
    }

    #[test]
    fn zero_mass_cells_are_dropped() {
        let s = AmbientSpace::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        let p = CellPartition::new(&s, vec![vec![0], vec![1], vec![], vec![2]]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.cells(), &[vec![0], vec![2]]);
    }

    #[test]
    fn conditioning_averages() {
        let s = AmbientSpace::midpoint_grid(2).unwrap();
        let p = CellPartition::trivial(&s);
        let sf = condition_on_partition(&[1.0, 3.0], &p, &s, &IndexSet::full(2)).unwrap();
        assert!((sf.coefficients()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn conditioning_on_singletons_restricts() {
        let s = AmbientSpace::midpoint_grid(8).unwrap().with_uniform_exhaustion(4).unwrap();
        let f: Vec<f64> = (0..8).map(|i| (i as f64).sin() + 0.3).collect();
        let xl = s.exhaustion_set(2).unwrap();
        let sf = condition_on_partition(&f, &CellPartition::singletons(&s), &s, &xl).unwrap();
        let g = expand_step(&sf, &s).unwrap();
        let expected = MeasureVector::new(f.clone()).masked(&xl);
        for (a, b) in g.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conditioning_idempotent_on_step_functions() {
        let s = AmbientSpace::midpoint_grid(6).unwrap();
        let p = CellPartition::new(&s, vec![vec![0, 1], vec![2, 3, 4], vec![5]]).unwrap();
        let sf = StepFunction::new(p.clone(), vec![0.25, -3.0, 7.5]).unwrap();
        let f = expand_step(&sf, &s).unwrap();
        let again = condition_on_partition(&f, &p, &s, &IndexSet::full(6)).unwrap();
        for (a, b) in again.coefficients().iter().zip(sf.coefficients()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_restriction_is_an_error() {
        let s = AmbientSpace::midpoint_grid(4).unwrap();
        let p = CellPartition::new(&s, vec![vec![0, 1]]).unwrap();
        let only_tail = IndexSet::from_indices(4, [2, 3]).unwrap();
        assert_eq!(
            condition_on_partition(&[1.0; 4], &p, &s, &only_tail),
            Err(Error::EmptyProjection)
        );
    }

    #[test]
    fn exhaustion_validation() {
        let s = AmbientSpace::midpoint_grid(4).unwrap();
        assert!(s.clone().with_exhaustion(&[vec![0], vec![0, 1, 2, 3]]).is_ok());
        assert!(s.clone().with_exhaustion(&[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(s.clone().with_exhaustion(&[vec![0], vec![0, 1]]).is_err());
        let u = s.with_uniform_exhaustion(4).unwrap();
        for l in 1..=4 {
            assert_eq!(u.exhaustion_set(l).unwrap().len(), l);
        }
        assert!(u.exhaustion_set(0).is_err());
        assert!(u.exhaustion_set(5).is_err());
    }

    #[test]
    fn gram_schmidt_repairs_skewed_basis() {
        let s = AmbientSpace::midpoint_grid(3).unwrap();
        let vecs = vec![
            MeasureVector::new(vec![1.0, 1.0, 1.0]),
            MeasureVector::new(vec![1.0, 2.0, 3.0]),
        ];
        let b = OrthonormalBasis::new(&s, vecs).unwrap();
        assert!(b.was_reorthonormalized());
        assert!(b.orthonormality_defect() < 1e-14);
        let dependent = vec![
            MeasureVector::new(vec![1.0, 1.0, 1.0]),
            MeasureVector::new(vec![2.0, 2.0, 2.0]),
        ];
        assert!(OrthonormalBasis::new(&s, dependent).is_err());
    }
}
