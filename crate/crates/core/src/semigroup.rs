//! Symmetric Markov semigroups with known spectral data, and finite
//! μ-symmetric Markov kernels.
//!
//! A [`SpectralModel`] stores eigenpairs `(λ_k, φ_k)` of a nonnegative
//! self-adjoint operator. The semigroup `P_t = Σ e^{-λ_k t} ⟨·, φ_k⟩ φ_k` is
//! exact on the span of the retained modes and vanishes on its orthogonal
//! complement, which therefore carries infinite energy.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::{inner_unchecked, AmbientSpace, CellPartition, MeasureVector, OrthonormalBasis};
use crate::tolerances::{KERNEL_TOL, SPAN_TOL, TRUNCATION_INVISIBLE};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    name: String,
    eigenvalues: Vec<f64>,
    basis: OrthonormalBasis,
}

impl SpectralModel {
    pub fn new(name: impl Into<String>, eigenvalues: Vec<f64>, basis: OrthonormalBasis) -> Result<Self> {
        if eigenvalues.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                got: eigenvalues.len(),
            });
        }
        if eigenvalues.is_empty() {
            return Err(Error::Model("a spectral model needs at least one mode".into()));
        }
        if let Some(k) = eigenvalues.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Model(format!("eigenvalue {k} is {}", eigenvalues[k])));
        }
        if let Some(k) = eigenvalues.windows(2).position(|p| p[1] < p[0]) {
            return Err(Error::Model(format!("eigenvalues not sorted at position {}", k + 1)));
        }
        Ok(Self {
            name: name.into(),
            eigenvalues,
            basis,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &AmbientSpace {
        self.basis.space()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    /// Number of retained modes `K`.
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The retained modes span the whole ambient space.
    pub fn is_complete(&self) -> bool {
        self.modes() == self.space().len()
    }

    /// Whether `P_t` agrees with the untruncated semigroup to within
    /// [`TRUNCATION_INVISIBLE`] on every retained mode.
    pub fn truncation_invisible_at(&self, t: f64) -> bool {
        self.is_complete() || libm::exp(-self.eigenvalues[self.modes() - 1] * t) <= TRUNCATION_INVISIBLE
    }

    /// `⟨f, φ_k⟩` for every retained mode.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.basis.coefficients(f, self.modes())
    }

    /// `f - Σ_k ⟨f, φ_k⟩ φ_k` together with the coefficients.
    pub fn split(&self, f: &[f64]) -> Result<(Vec<f64>, MeasureVector)> {
        let c = self.coefficients(f)?;
        let mut rest = MeasureVector::new(f.to_vec());
        for (ck, phi) in c.iter().zip(self.basis.vectors()) {
            rest.axpy(-ck, phi);
        }
        Ok((c, rest))
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("semigroup time must be finite and >= 0, got {t}")));
        }
        Ok(())
    }

    /// `P_t f = Σ_k e^{-λ_k t} ⟨f, φ_k⟩ φ_k`. At `t = 0` this is the
    /// projection onto the retained span.
    pub fn apply_semigroup(&self, t: f64, f: &[f64]) -> Result<MeasureVector> {
        Self::check_time(t)?;
        let c = self.coefficients(f)?;
        let damped: Vec<f64> = c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(ck, lk)| ck * libm::exp(-lk * t))
            .collect();
        Ok(self.basis.synthesize(&damped))
    }

    /// `⟨f - P_t f, f⟩`, evaluated mode by mode so that small `t` does not
    /// cancel: `Σ_k (1 - e^{-λ_k t}) c_k² + ‖f_⊥‖²`.
    pub fn dissipation(&self, t: f64, f: &[f64]) -> Result<f64> {
        Self::check_time(t)?;
        let (c, rest) = self.split(f)?;
        let w = self.space().weights();
        let in_span: f64 = c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(ck, lk)| -libm::expm1(-lk * t) * ck * ck)
            .sum();
        Ok(in_span + inner_unchecked(&rest, &rest, w))
    }

    /// `Σ_k λ_k ⟨f, φ_k⟩²`, or `+∞` when `f` has a component outside the
    /// retained span (relative size above [`SPAN_TOL`]).
    pub fn exact_form(&self, f: &[f64]) -> Result<f64> {
        let (c, rest) = self.split(f)?;
        let w = self.space().weights();
        let total = inner_unchecked(f, f, w);
        let outside = inner_unchecked(&rest, &rest, w);
        if outside > SPAN_TOL * SPAN_TOL * total && outside > 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(c.iter().zip(&self.eigenvalues).map(|(ck, lk)| lk * ck * ck).sum())
    }

    /// `G_λ f = Σ_k (λ + λ_k)^{-1} ⟨f, φ_k⟩ φ_k`.
    pub fn exact_resolvent(&self, lambda: f64, f: &[f64]) -> Result<MeasureVector> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("resolvent parameter must be > 0, got {lambda}")));
        }
        let c = self.coefficients(f)?;
        let scaled: Vec<f64> = c
            .iter()
            .zip(&self.eigenvalues)
            .map(|(ck, lk)| ck / (lambda + lk))
            .collect();
        Ok(self.basis.synthesize(&scaled))
    }

    /// Spectral model of the generator `rate·(P - I)` of a μ-symmetric kernel,
    /// keeping the `modes` smallest eigenvalues. Needs strictly positive weights.
    pub fn from_kernel(name: impl Into<String>, kernel: &MarkovKernelModel, rate: f64, modes: usize) -> Result<Self> {
        let space = kernel.space();
        let m = space.len();
        if modes == 0 || modes > m {
            return Err(Error::Range(format!("modes {modes} outside 1..={m}")));
        }
        if space.weights().iter().any(|&w| w <= 0.0) {
            return Err(Error::Model("kernel eigenbasis needs strictly positive weights".into()));
        }
        let sqrt_w: Vec<f64> = space.weights().iter().map(|&w| libm::sqrt(w)).collect();
        // W^{1/2} (I - P) W^{-1/2} is symmetric when P is μ-symmetric.
        let sym = DMatrix::from_fn(m, m, |x, y| {
            let id = if x == y { 1.0 } else { 0.0 };
            let a = sqrt_w[x] * (id - kernel.entry(x, y)) / sqrt_w[y];
            let b = sqrt_w[y] * (id - kernel.entry(y, x)) / sqrt_w[x];
            0.5 * rate * (a + b)
        });
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut eigenvalues = Vec::with_capacity(modes);
        let mut vectors = Vec::with_capacity(modes);
        for &idx in order.iter().take(modes) {
            eigenvalues.push(eig.eigenvalues[idx].max(0.0));
            let col = eig.eigenvectors.column(idx);
            // Fix the sign so that results do not depend on the eigensolver.
            let pivot = col.iter().copied().fold(0.0f64, |acc, v| if libm::fabs(v) > libm::fabs(acc) { v } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            vectors.push(MeasureVector::new(
                (0..m).map(|x| sign * col[x] / sqrt_w[x]).collect(),
            ));
        }
        let basis = OrthonormalBasis::new(space, vectors)?;
        Self::new(name, eigenvalues, basis)
    }
}

/// A linear operator on the ambient space that is symmetric with respect to
/// the weights, e.g. a Markov kernel or a semigroup at a fixed time.
pub trait MarkovOperator {
    fn space(&self) -> &AmbientSpace;

    fn apply(&self, f: &[f64]) -> Result<MeasureVector>;

    /// `c_ij = ⟨P 1_{A_i}, 1_{A_j}⟩` over the cells, row-major.
    fn cell_gram(&self, partition: &CellPartition) -> Result<Vec<f64>> {
        let n = partition.len();
        let w = self.space().weights();
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            let p1 = self.apply(&partition.indicator(i))?;
            for j in 0..n {
                c[i * n + j] = partition.cell(j).iter().map(|&x| p1[x] * w[x]).sum();
            }
        }
        Ok(c)
    }
}

/// `P_t` of a spectral model at a fixed time.
#[derive(Debug, Clone, Copy)]
pub struct HeatOperator<'a> {
    model: &'a SpectralModel,
    t: f64,
}

impl<'a> HeatOperator<'a> {
    pub fn new(model: &'a SpectralModel, t: f64) -> Result<Self> {
        SpectralModel::check_time(t)?;
        Ok(Self { model, t })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn model(&self) -> &'a SpectralModel {
        self.model
    }
}

impl MarkovOperator for HeatOperator<'_> {
    fn space(&self) -> &AmbientSpace {
        self.model.space()
    }

    fn apply(&self, f: &[f64]) -> Result<MeasureVector> {
        self.model.apply_semigroup(self.t, f)
    }

    fn cell_gram(&self, partition: &CellPartition) -> Result<Vec<f64>> {
        let n = partition.len();
        let k = self.model.modes();
        let w = self.space().weights();
        let damp: Vec<f64> = self.model.eigenvalues().iter().map(|l| libm::exp(-l * self.t)).collect();
        // b_ik = ⟨1_{A_i}, φ_k⟩
        let mut b = vec![0.0; n * k];
        for (i, cell) in partition.cells().iter().enumerate() {
            for (kk, phi) in self.model.basis().vectors().iter().enumerate() {
                b[i * k + kk] = cell.iter().map(|&x| phi[x] * w[x]).sum();
            }
        }
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..k).map(|kk| damp[kk] * b[i * k + kk] * b[j * k + kk]).sum();
                c[i * n + j] = v;
                c[j * n + i] = v;
            }
        }
        Ok(c)
    }
}

/// A Markov kernel `P(x, y)` on a finite space, nonnegative, sub-stochastic
/// and symmetric with respect to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernelModel {
    space: AmbientSpace,
    kernel: Vec<f64>,
    conservative: bool,
}

impl MarkovKernelModel {
    /// Validates nonnegativity, row sums at most one and μ-symmetry, each to
    /// [`KERNEL_TOL`].
    pub fn new(space: AmbientSpace, kernel: Vec<f64>) -> Result<Self> {
        let model = Self::from_raw_unchecked(space, kernel)?;
        let m = model.space.len();
        if let Some(idx) = model.kernel.iter().position(|&p| !(p >= -KERNEL_TOL)) {
            return Err(Error::Model(format!(
                "kernel entry ({}, {}) = {} is negative",
                idx / m,
                idx % m,
                model.kernel[idx]
            )));
        }
        if let Some((x, s)) = model.row_sums().into_iter().enumerate().find(|(_, s)| *s > 1.0 + KERNEL_TOL) {
            return Err(Error::Model(format!("row {x} sums to {s} > 1")));
        }
        let asym = model.symmetry_residual();
        if asym > KERNEL_TOL {
            return Err(Error::Model(format!("kernel is not μ-symmetric (residual {asym:e})")));
        }
        Ok(model)
    }

    /// Skips every check except shapes. Meant for negative tests that need
    /// a kernel violating μ-symmetry.
    pub fn from_raw_unchecked(space: AmbientSpace, kernel: Vec<f64>) -> Result<Self> {
        let m = space.len();
        if kernel.len() != m * m {
            return Err(Error::Dimension {
                expected: m * m,
                got: kernel.len(),
            });
        }
        let conservative = kernel
            .chunks(m)
            .all(|row| libm::fabs(row.iter().sum::<f64>() - 1.0) <= KERNEL_TOL);
        Ok(Self {
            space,
            kernel,
            conservative,
        })
    }

    pub fn space(&self) -> &AmbientSpace {
        &self.space
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.kernel[x * self.space.len() + y]
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// `P1 = 1`.
    pub fn is_conservative(&self) -> bool {
        self.conservative
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.kernel.chunks(self.space.len()).map(|r| r.iter().sum()).collect()
    }

    /// `max_{x,y} |w(x) P(x,y) - w(y) P(y,x)|`.
    pub fn symmetry_residual(&self) -> f64 {
        let m = self.space.len();
        let w = self.space.weights();
        let mut worst = 0.0f64;
        for x in 0..m {
            for y in x + 1..m {
                worst = worst.max(libm::fabs(w[x] * self.entry(x, y) - w[y] * self.entry(y, x)));
            }
        }
        worst
    }

    /// `(1 - δ)·P`, which kills mass at rate `δ` everywhere.
    pub fn with_uniform_killing(&self, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Domain(format!("killing rate {delta} outside [0, 1]")));
        }
        Self::new(self.space.clone(), self.kernel.iter().map(|p| (1.0 - delta) * p).collect())
    }
}

impl MarkovOperator for MarkovKernelModel {
    fn space(&self) -> &AmbientSpace {
        &self.space
    }

    fn apply(&self, f: &[f64]) -> Result<MeasureVector> {
        self.space.check(f)?;
        Ok(MeasureVector::new(
            self.kernel
                .chunks(self.space.len())
                .map(|row| row.iter().zip(f).map(|(p, v)| p * v).sum())
                .collect(),
        ))
    }
}
