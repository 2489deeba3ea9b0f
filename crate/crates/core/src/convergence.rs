//! Strong resolvent convergence of the stage generators.
//!
//! Stage generators have finite-dimensional range and vanish on the
//! orthogonal complement of their subspace, so their resolvent acts as
//! `1/λ` there. The reference resolvent of a spectral model follows the same
//! rule on the complement of the retained modes; error metrics always
//! compare the two under this convention.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::measure::{weighted_norm, MeasureVector, OrthonormalBasis};
use crate::pipeline::{Stage, StageForm, StageIndex};
use crate::semigroup::SpectralModel;
use crate::tolerances::{MONOTONE_SLACK, RESOLVENT_RESIDUAL_TOL};

/// Fraction of the initial value below which a sequence must stop growing.
pub const SETTLE_FRACTION: f64 = 0.5;
/// Allowed relative growth per step after settling.
pub const SETTLE_SLACK: f64 = 0.05;
/// Distance counted as zero when a limit is attained exactly.
pub const EXACT_LIMIT_TOL: f64 = 1e-12;

/// A named test vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub name: String,
    pub values: MeasureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProbe {
    lambda: f64,
    vectors: Vec<TestVector>,
}

impl ResolventProbe {
    pub fn new(lambda: f64, vectors: Vec<TestVector>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("resolvent parameter must be > 0, got {lambda}")));
        }
        if let Some(v) = vectors.iter().find(|v| v.values.iter().all(|x| *x == 0.0)) {
            return Err(Error::Domain(format!("test vector `{}` is zero", v.name)));
        }
        Ok(Self { lambda, vectors })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn vectors(&self) -> &[TestVector] {
        &self.vectors
    }
}

/// Solves `(λ - L) u = f` for a stage generator `L`.
pub fn stage_resolvent(stage: &StageForm, lambda: f64, f: &[f64]) -> Result<MeasureVector> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("resolvent parameter must be > 0, got {lambda}")));
    }
    let a = DVector::from_vec(stage.coefficients(f)?);
    let d = stage.dim();
    let system = DMatrix::<f64>::identity(d, d) * lambda - stage.generator();
    let chol = system
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver(format!("λ - L is not positive definite at λ = {lambda}")))?;
    let u_s = chol.solve(&a);
    let residual = (&system * &u_s - &a).norm();
    let fnorm = weighted_norm(f, stage.space())?;
    if !(residual <= RESOLVENT_RESIDUAL_TOL * fnorm.max(f64::MIN_POSITIVE)) {
        return Err(Error::Solver(format!("resolvent residual {residual:e} for ‖f‖ = {fnorm:e}")));
    }
    let mut u = MeasureVector::new(f.to_vec()).scaled(1.0 / lambda);
    for ((ai, ui), e) in a.iter().zip(u_s.iter()).zip(stage.subspace()) {
        u.axpy(ui - ai / lambda, e);
    }
    Ok(u)
}

/// `Σ_k (λ + λ_k)^{-1} ⟨f, φ_k⟩ φ_k + f_⊥ / λ`.
pub fn reference_resolvent(model: &SpectralModel, lambda: f64, f: &[f64]) -> Result<MeasureVector> {
    let inside = model.exact_resolvent(lambda, f)?;
    let (_, rest) = model.split(f)?;
    Ok(inside.add(&rest.scaled(1.0 / lambda)))
}

/// `‖G^{stage}_λ f - G_λ f‖` for every probe vector.
pub fn resolvent_error(model: &SpectralModel, stage: &StageForm, probe: &ResolventProbe) -> Result<Vec<f64>> {
    probe
        .vectors()
        .iter()
        .map(|v| {
            let u = stage_resolvent(stage, probe.lambda(), &v.values)?;
            let g = reference_resolvent(model, probe.lambda(), &v.values)?;
            weighted_norm(&u.sub(&g), model.space())
        })
        .collect()
}

/// One row of a sweep. `wall_ms` is filled in by callers that time the work.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub index: StageIndex,
    pub lambda: f64,
    pub test_vector: String,
    pub resolvent_error: f64,
    pub form_value: f64,
    pub exact_form: f64,
    pub wall_ms: f64,
}

/// A nested grid. Empty `l` or `k` disables that stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub n: Vec<u32>,
    pub m: Vec<usize>,
    pub l: Vec<usize>,
    pub k: Vec<u32>,
}

impl Schedule {
    /// Grid points at full depth, sorted with `k` innermost.
    pub fn points(&self) -> Vec<StageIndex> {
        let ls: Vec<Option<usize>> = if self.l.is_empty() { alloc::vec![None] } else { self.l.iter().map(|&l| Some(l)).collect() };
        let ks: Vec<Option<u32>> = if self.k.is_empty() { alloc::vec![None] } else { self.k.iter().map(|&k| Some(k)).collect() };
        let mut out = Vec::new();
        for &n in &self.n {
            for &m in &self.m {
                for &l in &ls {
                    for &k in &ks {
                        out.push(StageIndex { n, m: Some(m), l, k });
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// The shallowest and the deepest full-depth point.
    pub fn extremes(&self) -> Option<(StageIndex, StageIndex)> {
        let pts = self.points();
        Some((*pts.first()?, *pts.last()?))
    }
}

/// Records for every probe and test vector at one grid point.
pub fn evaluate_point(
    model: &SpectralModel,
    basis: &OrthonormalBasis,
    index: StageIndex,
    probes: &[ResolventProbe],
) -> Result<Vec<ConvergenceRecord>> {
    let stage = Stage::new(model, basis, index)?;
    let generator = stage.generator()?;
    let mut out = Vec::new();
    for probe in probes {
        let errors = resolvent_error(model, &generator, probe)?;
        for (v, err) in probe.vectors().iter().zip(errors) {
            out.push(ConvergenceRecord {
                index,
                lambda: probe.lambda(),
                test_vector: v.name.clone(),
                resolvent_error: err,
                form_value: stage.form(&v.values)?,
                exact_form: model.exact_form(&v.values)?,
                wall_ms: 0.0,
            });
        }
    }
    Ok(out)
}

/// Runs [`evaluate_point`] over the schedule, in index order.
pub fn iterated_limit_sweep(
    model: &SpectralModel,
    basis: &OrthonormalBasis,
    schedule: &Schedule,
    probes: &[ResolventProbe],
) -> Result<Vec<ConvergenceRecord>> {
    let mut out = Vec::new();
    for index in schedule.points() {
        out.extend(evaluate_point(model, basis, index, probes)?);
    }
    Ok(out)
}

/// `true` when, from the first index where the value drops to half the
/// initial value (or from the start if it never does), each step grows by
/// at most 5% plus 1e-12.
pub fn eventually_nonincreasing(seq: &[f64]) -> bool {
    let Some(&first) = seq.first() else {
        return true;
    };
    let start = seq.iter().position(|&e| e <= SETTLE_FRACTION * first).unwrap_or(0);
    seq[start..]
        .windows(2)
        .all(|w| w[1] <= (1.0 + SETTLE_SLACK) * w[0] + MONOTONE_SLACK)
}

/// A sequence of resolvent distances `‖G_inner f - G_outer f‖` along the
/// innermost free index of a nesting level.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedSequence {
    /// `"k"`, `"l"`, `"m"` or `"n"`.
    pub along: &'static str,
    /// The fixed outer index; its limit stage is the comparison target.
    pub outer: StageIndex,
    pub test_vector: String,
    pub lambda: f64,
    pub distances: Vec<f64>,
    pub settles: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestingReport {
    pub sequences: Vec<NestedSequence>,
}

impl NestingReport {
    pub fn passed(&self) -> bool {
        self.sequences.iter().all(|s| s.settles)
    }

    pub fn failures(&self) -> impl Iterator<Item = &NestedSequence> {
        self.sequences.iter().filter(|s| !s.settles)
    }
}

struct Resolvents {
    by_vector: Vec<MeasureVector>,
}

fn resolvents_at(stage: Option<&StageForm>, model: &SpectralModel, probe: &ResolventProbe) -> Result<Resolvents> {
    let by_vector = probe
        .vectors()
        .iter()
        .map(|v| {
            let u = match stage {
                Some(s) => stage_resolvent(s, probe.lambda(), &v.values)?,
                None => reference_resolvent(model, probe.lambda(), &v.values)?,
            };
            Ok(u)
        })
        .collect::<Result<_>>()?;
    Ok(Resolvents { by_vector })
}

fn generator_at(model: &SpectralModel, basis: &OrthonormalBasis, index: StageIndex) -> Result<StageForm> {
    Stage::new(model, basis, index)?.generator()
}

/// Checks that each inner limit settles towards the next outer stage:
/// `G_{nmlk} → G_{nml}` in `k`, `G_{nml} → G_{nm}` in `l`, `G_{nm} → G_n`
/// in `m` and `G_n → G` in `n`.
pub fn nesting_report(
    model: &SpectralModel,
    basis: &OrthonormalBasis,
    schedule: &Schedule,
    probe: &ResolventProbe,
) -> Result<NestingReport> {
    let space = model.space();
    let reaches_last_level = schedule.l.last() == Some(&space.exhaustion_levels());
    let mut sequences = Vec::new();
    let mut push = |along: &'static str, outer: StageIndex, target: &Resolvents, inner: &[Resolvents]| -> Result<()> {
        for (v, tv) in probe.vectors().iter().enumerate() {
            let distances = inner
                .iter()
                .map(|r| weighted_norm(&r.by_vector[v].sub(&target.by_vector[v]), space))
                .collect::<Result<Vec<_>>>()?;
            // Truncation errors need not shrink with l; a finite exhaustion
            // reaches its limit exactly at the last level.
            let settles = if along == "l" && reaches_last_level {
                distances.last().is_none_or(|&d| d <= EXACT_LIMIT_TOL)
            } else {
                eventually_nonincreasing(&distances)
            };
            sequences.push(NestedSequence {
                along,
                outer,
                test_vector: tv.name.clone(),
                lambda: probe.lambda(),
                settles,
                distances,
            });
        }
        Ok(())
    };

    let exact = resolvents_at(None, model, probe)?;
    let mut by_n = Vec::new();
    for &n in &schedule.n {
        let g_n = resolvents_at(Some(&generator_at(model, basis, StageIndex::semigroup(n))?), model, probe)?;
        let mut by_m = Vec::new();
        for &m in &schedule.m {
            let g_nm = resolvents_at(Some(&generator_at(model, basis, StageIndex::galerkin(n, m))?), model, probe)?;
            let mut by_l = Vec::new();
            for &l in &schedule.l {
                let nml = StageIndex::truncated(n, m, l);
                let g_nml = resolvents_at(Some(&generator_at(model, basis, nml)?), model, probe)?;
                let by_k = schedule
                    .k
                    .iter()
                    .map(|&k| {
                        resolvents_at(Some(&generator_at(model, basis, StageIndex::full(n, m, l, k))?), model, probe)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if !by_k.is_empty() {
                    push("k", nml, &g_nml, &by_k)?;
                }
                by_l.push(g_nml);
            }
            if !by_l.is_empty() {
                push("l", StageIndex::galerkin(n, m), &g_nm, &by_l)?;
            }
            by_m.push(g_nm);
        }
        if !by_m.is_empty() {
            push("m", StageIndex::semigroup(n), &g_n, &by_m)?;
        }
        by_n.push(g_n);
    }
    if !by_n.is_empty() {
        let last = StageIndex::semigroup(*schedule.n.last().unwrap_or(&0));
        push("n", last, &exact, &by_n)?;
    }
    Ok(NestingReport { sequences })
}

/// Stage form values along a grid compared with the exact form.
#[derive(Debug, Clone, PartialEq)]
pub struct MoscoReport {
    pub exact: f64,
    pub values: Vec<(StageIndex, f64)>,
    /// Largest `E^{stage}(f) - E(f)` over stages whose projection keeps `f`
    /// inside the spectral span: no partition, and no mask below the last level.
    pub max_overshoot: f64,
    /// `|E(f) - E^{stage}(f)|` at the last grid point.
    pub terminal_gap: f64,
    /// `2^{-n-1} Σ_k λ_k² ⟨f, φ_k⟩²` at the last grid point, which bounds the
    /// part of the gap due to the semigroup stage alone.
    pub semigroup_bound: f64,
}

/// Evaluates the stage forms of `f` along `grid` (the recovery sequence is the
/// constant sequence `f`).
pub fn mosco_limsup_check(
    model: &SpectralModel,
    basis: &OrthonormalBasis,
    grid: &[StageIndex],
    f: &[f64],
) -> Result<MoscoReport> {
    let exact = model.exact_form(f)?;
    if !exact.is_finite() {
        return Err(Error::Domain("f lies outside the spectral span".into()));
    }
    let levels = model.space().exhaustion_levels();
    let mut values = Vec::with_capacity(grid.len());
    let mut overshoot = f64::NEG_INFINITY;
    for &index in grid {
        let v = Stage::new(model, basis, index)?.form(f)?;
        let in_span = index.k.is_none() && index.l.is_none_or(|l| l == levels);
        if in_span {
            overshoot = overshoot.max(v - exact);
        }
        values.push((index, v));
    }
    let terminal_gap = values.last().map_or(0.0, |(_, v)| libm::fabs(exact - v));
    let semigroup_bound = match grid.last() {
        Some(last) => {
            let c = model.coefficients(f)?;
            let second: f64 = c.iter().zip(model.eigenvalues()).map(|(ck, lk)| lk * lk * ck * ck).sum();
            0.5 * last.time() * second
        }
        None => 0.0,
    };
    Ok(MoscoReport {
        exact,
        values,
        max_overshoot: overshoot.max(0.0),
        terminal_gap,
        semigroup_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub levels: Vec<u32>,
    pub values: Vec<f64>,
}

/// Checks that `2^n ⟨f - P_{2^{-n}} f, f⟩` does not decrease as `n` grows
/// through `levels` (sorted ascending), with slack 1e-12.
pub fn monotonicity_audit(model: &SpectralModel, f: &[f64], levels: &[u32]) -> Result<MonotonicityReport> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let values = levels
        .iter()
        .map(|&n| crate::pipeline::semigroup_form(model, n, f))
        .collect::<Result<Vec<_>>>()?;
    for (i, w) in values.windows(2).enumerate() {
        if w[1] < w[0] - MONOTONE_SLACK {
            return Err(Error::AuditFailure {
                name: "semigroup-form-monotone".into(),
                detail: format!(
                    "value drops from {:e} at n = {} to {:e} at n = {}",
                    w[0],
                    levels[i],
                    w[1],
                    levels[i + 1]
                ),
            });
        }
    }
    Ok(MonotonicityReport { levels, values })
}

/// Composition of the test battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatterySpec {
    /// Leading basis vectors `φ_0, …`, also the span of the random combinations.
    pub modes: usize,
    pub random_span: usize,
    /// Random step functions with four breakpoints in the coordinate range.
    pub random_steps: usize,
    pub constant: bool,
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self {
            modes: 8,
            random_span: 4,
            random_steps: 2,
            constant: true,
        }
    }
}

/// Named test vectors drawn from the model's eigenbasis and the
/// coordinates. Draws do not depend on the resolution, so the same seed gives
/// the same functions at any `M`.
pub fn test_battery<R: Rng + ?Sized>(model: &SpectralModel, spec: BatterySpec, rng: &mut R) -> Result<Vec<TestVector>> {
    let space = model.space();
    let basis = model.basis();
    if spec.modes > basis.len() {
        return Err(Error::Range(format!("battery asks for {} modes, model has {}", spec.modes, basis.len())));
    }
    let mut out = Vec::new();
    for i in 0..spec.modes {
        out.push(TestVector {
            name: format!("phi{i}"),
            values: basis.vector(i).clone(),
        });
    }
    for s in 0..spec.random_span {
        let mut c: Vec<f64> = (0..spec.modes).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        c.resize(basis.len(), 0.0);
        out.push(TestVector {
            name: format!("span{s}"),
            values: basis.synthesize(&c),
        });
    }
    let (lo, hi) = space
        .coords()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    for s in 0..spec.random_steps {
        let mut breaks: Vec<f64> = (0..4).map(|_| rng.gen_range(lo..=hi)).collect();
        breaks.sort_by(f64::total_cmp);
        let heights: Vec<f64> = (0..=breaks.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let values = space
            .coords()
            .iter()
            .map(|&x| heights[breaks.iter().filter(|&&b| b < x).count()])
            .collect();
        out.push(TestVector {
            name: format!("step{s}"),
            values: MeasureVector::new(values),
        });
    }
    if spec.constant {
        out.push(TestVector {
            name: "const".into(),
            values: MeasureVector::constant(space.len(), 1.0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::neumann_interval;
    use alloc::vec;

    #[test]
    fn settling_rule() {
        assert!(eventually_nonincreasing(&[]));
        assert!(eventually_nonincreasing(&[1.0, 2.0, 0.4, 0.41, 0.1]));
        assert!(!eventually_nonincreasing(&[1.0, 0.4, 0.6]));
        assert!(eventually_nonincreasing(&[0.0, 0.0, 0.0]));
        // Never halves: checked from the start.
        assert!(!eventually_nonincreasing(&[1.0, 1.2, 0.9]));
    }

    #[test]
    fn schedule_without_l_and_k() {
        let s = Schedule { n: vec![2, 4], m: vec![4], l: vec![], k: vec![] };
        assert_eq!(s.points(), vec![StageIndex::galerkin(2, 4), StageIndex::galerkin(4, 4)]);
    }

    #[test]
    fn zero_generator_resolvent_is_scaling() {
        // n = 0 with a single constant mode: L = 0 on the constant.
        let model = neumann_interval(64, 4, 1).unwrap();
        let stage = Stage::new(&model, model.basis(), StageIndex::galerkin(3, 1)).unwrap();
        let g = stage.generator().unwrap();
        let f: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let u = stage_resolvent(&g, 2.0, &f).unwrap();
        for (a, b) in u.iter().zip(&f) {
            assert!((a - b / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn probe_rejects_zero_vector() {
        let v = TestVector { name: "z".into(), values: MeasureVector::zeros(3) };
        assert!(ResolventProbe::new(1.0, vec![v]).is_err());
        assert!(ResolventProbe::new(0.0, vec![]).is_err());
    }
}
