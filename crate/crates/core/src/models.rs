//! Built-in models: the Neumann Laplacian on `[0, 1]`, the Laplacian on the
//! circle of length one, a nearest-neighbour birth–death chain, and random
//! μ-symmetric sub-stochastic kernels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{AmbientSpace, MeasureVector, OrthonormalBasis};
use crate::semigroup::{MarkovKernelModel, SpectralModel};

/// Names accepted wherever a model is selected by string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Neumann,
    Ring,
    BirthDeath,
    RandomKernel,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Neumann, Self::Ring, Self::BirthDeath, Self::RandomKernel];

    pub fn name(self) -> &'static str {
        match self {
            Self::Neumann => "neumann",
            Self::Ring => "ring",
            Self::BirthDeath => "birth-death",
            Self::RandomKernel => "random-kernel",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Model(format!("unknown model `{s}`")))
    }
}

/// Sizes shared by the built-in models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelParams {
    /// Ambient resolution `M`.
    pub points: usize,
    /// Spectral truncation `K`.
    pub modes: usize,
    /// Number of exhaustion levels `l_max`.
    pub levels: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            points: 1024,
            modes: 64,
            levels: 4,
        }
    }
}

/// A built-in model: its spectral data when the pipeline can run on it and
/// its one-step kernel when it has one.
#[derive(Debug, Clone)]
pub struct NamedModel {
    pub kind: ModelKind,
    pub spectral: Option<SpectralModel>,
    pub kernel: Option<MarkovKernelModel>,
}

impl NamedModel {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

/// Builds one model. Only the random kernel consumes randomness.
pub fn build_model<R: Rng + ?Sized>(kind: ModelKind, params: ModelParams, rng: &mut R) -> Result<NamedModel> {
    let model = match kind {
        ModelKind::Neumann => NamedModel {
            kind,
            spectral: Some(neumann_interval(params.points, params.modes, params.levels)?),
            kernel: None,
        },
        ModelKind::Ring => NamedModel {
            kind,
            spectral: Some(ring(params.points, params.modes, params.levels)?),
            kernel: None,
        },
        ModelKind::BirthDeath => NamedModel {
            kind,
            spectral: Some(birth_death(params.points, params.modes, params.levels)?),
            kernel: Some(birth_death_kernel(params.points, params.levels)?),
        },
        ModelKind::RandomKernel => {
            let kernel = random_kernel(rng, params.points, false)?;
            let kernel = MarkovKernelModel::new(kernel.space().clone().with_uniform_exhaustion(params.levels)?, kernel.kernel().to_vec())?;
            let spectral = SpectralModel::from_kernel(kind.name(), &kernel, 1.0, params.modes.min(params.points))?;
            NamedModel {
                kind,
                spectral: Some(spectral),
                kernel: Some(kernel),
            }
        }
    };
    Ok(model)
}

/// Every built-in model at the given sizes.
pub fn builtin_models<R: Rng + ?Sized>(params: ModelParams, rng: &mut R) -> Result<Vec<NamedModel>> {
    ModelKind::ALL.into_iter().map(|k| build_model(k, params, rng)).collect()
}

fn check_sizes(points: usize, modes: usize) -> Result<()> {
    if points == 0 || modes == 0 || modes > points {
        return Err(Error::Model(format!(
            "need 1 <= modes <= points, got modes = {modes}, points = {points}"
        )));
    }
    Ok(())
}

/// Neumann Laplacian on `[0, 1]`: `λ_k = (kπ)²`, `φ_0 = 1`,
/// `φ_k = √2 cos(kπx)`, sampled at the midpoints of `points` cells.
pub fn neumann_interval(points: usize, modes: usize, levels: usize) -> Result<SpectralModel> {
    check_sizes(points, modes)?;
    let space = AmbientSpace::midpoint_grid(points)?.with_uniform_exhaustion(levels)?;
    let mut eigenvalues = Vec::with_capacity(modes);
    let mut vectors = Vec::with_capacity(modes);
    for k in 0..modes {
        let freq = k as f64 * PI;
        eigenvalues.push(freq * freq);
        vectors.push(if k == 0 {
            MeasureVector::constant(points, 1.0)
        } else {
            MeasureVector::new(space.coords().iter().map(|&x| SQRT_2 * libm::cos(freq * x)).collect())
        });
    }
    SpectralModel::new(ModelKind::Neumann.name(), eigenvalues, OrthonormalBasis::new(&space, vectors)?)
}

/// Laplacian on the circle `ℝ/ℤ`: `λ = (2πj)²` with the pair
/// `√2 cos(2πjx)`, `√2 sin(2πjx)` for each `j >= 1`.
pub fn ring(points: usize, modes: usize, levels: usize) -> Result<SpectralModel> {
    check_sizes(points, modes)?;
    if 2 * (modes / 2) >= points {
        return Err(Error::Model(format!(
            "ring with {points} points resolves fewer than {modes} modes"
        )));
    }
    let space = AmbientSpace::midpoint_grid(points)?.with_uniform_exhaustion(levels)?;
    let mut eigenvalues = Vec::with_capacity(modes);
    let mut vectors = Vec::with_capacity(modes);
    eigenvalues.push(0.0);
    vectors.push(MeasureVector::constant(points, 1.0));
    let mut j = 1;
    while vectors.len() < modes {
        let freq = 2.0 * PI * j as f64;
        eigenvalues.push(freq * freq);
        vectors.push(MeasureVector::new(space.coords().iter().map(|&x| SQRT_2 * libm::cos(freq * x)).collect()));
        if vectors.len() < modes {
            eigenvalues.push(freq * freq);
            vectors.push(MeasureVector::new(space.coords().iter().map(|&x| SQRT_2 * libm::sin(freq * x)).collect()));
        }
        j += 1;
    }
    SpectralModel::new(ModelKind::Ring.name(), eigenvalues, OrthonormalBasis::new(&space, vectors)?)
}

/// Lazy nearest-neighbour walk on `{0, …, M-1}` with unit vertex masses:
/// `P(x, x±1) = 1/2`, the remaining mass stays put.
pub fn birth_death_kernel(points: usize, levels: usize) -> Result<MarkovKernelModel> {
    if points < 2 {
        return Err(Error::Model("birth-death chain needs at least two states".into()));
    }
    let space = AmbientSpace::counting(points)?.with_uniform_exhaustion(levels)?;
    let mut kernel = vec![0.0; points * points];
    for x in 0..points {
        if x > 0 {
            kernel[x * points + x - 1] = 0.5;
        }
        if x + 1 < points {
            kernel[x * points + x + 1] = 0.5;
        }
        let off: f64 = kernel[x * points..(x + 1) * points].iter().sum();
        kernel[x * points + x] = 1.0 - off;
    }
    MarkovKernelModel::new(space, kernel)
}

/// Birth–death chain with unit jump rates to each neighbour, generator
/// `2(P - I)` for the kernel of [`birth_death_kernel`]. Its eigenpairs are
/// `λ_k = 2 - 2cos(πk/M)` with cosine eigenvectors `cos(πk(x + 1/2)/M)`.
pub fn birth_death(points: usize, modes: usize, levels: usize) -> Result<SpectralModel> {
    check_sizes(points, modes)?;
    if points < 2 {
        return Err(Error::Model("birth-death chain needs at least two states".into()));
    }
    let space = AmbientSpace::counting(points)?.with_uniform_exhaustion(levels)?;
    let mf = points as f64;
    let mut eigenvalues = Vec::with_capacity(modes);
    let mut vectors = Vec::with_capacity(modes);
    for k in 0..modes {
        let theta = PI * k as f64 / mf;
        eigenvalues.push(2.0 - 2.0 * libm::cos(theta));
        let scale = if k == 0 { libm::sqrt(1.0 / mf) } else { libm::sqrt(2.0 / mf) };
        vectors.push(MeasureVector::new(
            (0..points).map(|x| scale * libm::cos(theta * (x as f64 + 0.5))).collect(),
        ));
    }
    SpectralModel::new(ModelKind::BirthDeath.name(), eigenvalues, OrthonormalBasis::new(&space, vectors)?)
}

/// A random μ-symmetric kernel: weights in `[0.5, 2]`, a random symmetric
/// nonnegative coupling `S` with `w(x)P(x,y) = S(x,y)`, scaled so the
/// largest row sum is in `[0.5, 1]`. With `conservative` the remaining row
/// mass goes on the diagonal so that `P1 = 1`.
pub fn random_kernel<R: Rng + ?Sized>(rng: &mut R, points: usize, conservative: bool) -> Result<MarkovKernelModel> {
    if points == 0 {
        return Err(Error::Model("random kernel needs at least one state".into()));
    }
    let weights: Vec<f64> = (0..points).map(|_| rng.gen_range(0.5..2.0)).collect();
    let coords = (0..points).map(|i| (i as f64 + 0.5) / points as f64).collect();
    let space = AmbientSpace::new(coords, weights.clone())?;
    let mut coupling = vec![0.0; points * points];
    for x in 0..points {
        for y in x..points {
            if rng.gen_bool(0.5) {
                let v: f64 = rng.gen_range(0.0..1.0);
                coupling[x * points + y] = v;
                coupling[y * points + x] = v;
            }
        }
    }
    let max_row = (0..points)
        .map(|x| coupling[x * points..(x + 1) * points].iter().sum::<f64>() / weights[x])
        .fold(0.0f64, f64::max);
    let target: f64 = rng.gen_range(0.5..=1.0);
    let scale = if max_row > 0.0 { target / max_row } else { 0.0 };
    let mut kernel: Vec<f64> = (0..points * points)
        .map(|idx| scale * coupling[idx] / weights[idx / points])
        .collect();
    if conservative {
        for x in 0..points {
            let s: f64 = kernel[x * points..(x + 1) * points].iter().sum();
            kernel[x * points + x] += 1.0 - s;
        }
    }
    MarkovKernelModel::new(space, kernel)
}

/// Haar system on `[0, 1]` sampled at the ambient coordinates: the constant,
/// then `2^{j/2}(1_{left half} - 1_{right half})` on the dyadic intervals of
/// generation `j = 0, 1, …`, truncated to `count` vectors.
pub fn haar_basis(space: &AmbientSpace, count: usize) -> Result<OrthonormalBasis> {
    if count == 0 {
        return Err(Error::Domain("Haar basis needs at least one vector".into()));
    }
    let mut vectors = vec![MeasureVector::constant(space.len(), 1.0)];
    let mut generation = 0u32;
    'outer: loop {
        let intervals = 1usize << generation;
        let height = libm::sqrt(intervals as f64);
        for s in 0..intervals {
            if vectors.len() >= count {
                break 'outer;
            }
            let lo = s as f64 / intervals as f64;
            let mid = (s as f64 + 0.5) / intervals as f64;
            let hi = (s as f64 + 1.0) / intervals as f64;
            vectors.push(MeasureVector::new(
                space
                    .coords()
                    .iter()
                    .map(|&x| {
                        if x >= lo && x < mid {
                            height
                        } else if x >= mid && x < hi {
                            -height
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            ));
        }
        if vectors.len() >= count {
            break;
        }
        generation += 1;
        if generation > 60 {
            return Err(Error::Domain(format!("cannot build {count} Haar vectors")));
        }
    }
    OrthonormalBasis::new(space, vectors)
}

/// Selectable Galerkin bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisChoice {
    Eigen,
    Haar,
}

impl FromStr for BasisChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigen" => Ok(Self::Eigen),
            "haar" => Ok(Self::Haar),
            other => Err(Error::Domain(format!("unknown basis `{other}` (expected eigen or haar)"))),
        }
    }
}

impl BasisChoice {
    pub fn name(self) -> &'static str {
        match self {
            Self::Eigen => "eigen",
            Self::Haar => "haar",
        }
    }

    pub fn build(self, model: &SpectralModel, count: usize) -> Result<OrthonormalBasis> {
        match self {
            Self::Eigen => {
                if count > model.modes() {
                    return Err(Error::Range(format!(
                        "eigenbasis has {} vectors, {count} requested",
                        model.modes()
                    )));
                }
                OrthonormalBasis::new(model.space(), model.basis().vectors()[..count].to_vec())
            }
            Self::Haar => haar_basis(model.space(), count),
        }
    }
}

/// Label used for a model in exports.
pub fn describe(model: &SpectralModel) -> String {
    format!("{} (M = {}, K = {})", model.name(), model.space().len(), model.modes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn neumann_spectrum_and_orthogonality() {
        let model = neumann_interval(256, 16, 4).unwrap();
        assert!((model.eigenvalues()[1] - PI * PI).abs() < 1e-12);
        assert!(!model.basis().was_reorthonormalized());
        assert!(model.basis().orthonormality_defect() < 1e-8);
    }

    #[test]
    fn ring_pairs_share_eigenvalues() {
        let model = ring(128, 9, 1).unwrap();
        let ev = model.eigenvalues();
        assert_eq!(ev[1], ev[2]);
        assert_eq!(ev[7], ev[8]);
        assert!(model.basis().orthonormality_defect() < 1e-8);
    }

    #[test]
    fn birth_death_matches_kernel_eigensolve() {
        let closed = birth_death(40, 12, 4).unwrap();
        let kernel = birth_death_kernel(40, 4).unwrap();
        let dense = SpectralModel::from_kernel("bd", &kernel, 2.0, 12).unwrap();
        for (a, b) in closed.eigenvalues().iter().zip(dense.eigenvalues()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // Nondegenerate spectrum: eigenvectors agree up to sign.
        for k in 0..12 {
            let a = closed.basis().vector(k);
            let b = dense.basis().vector(k);
            let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn random_kernels_are_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for conservative in [false, true] {
            let k = random_kernel(&mut rng, 30, conservative).unwrap();
            assert!(k.symmetry_residual() <= 1e-12);
            assert_eq!(k.is_conservative(), conservative);
        }
    }

    #[test]
    fn haar_is_orthonormal_on_dyadic_grid() {
        let space = AmbientSpace::midpoint_grid(64).unwrap();
        let b = haar_basis(&space, 16).unwrap();
        assert!(!b.was_reorthonormalized());
        assert!(b.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("heat".parse::<ModelKind>().is_err());
    }
}
