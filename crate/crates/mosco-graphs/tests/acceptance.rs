//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

mod common;

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mosco_graphs::config::ExperimentConfig;
use mosco_graphs::Experiment;
use mosco_graphs_core::contraction::{contraction_sides, unit_contraction, NormalContraction};
use mosco_graphs_core::convergence::{eventually_nonincreasing, evaluate_point};
use mosco_graphs_core::graph::final_stage_graph;
use mosco_graphs_core::models::random_kernel;
use mosco_graphs_core::pipeline::{level_partition, tail_mass, Stage};
use mosco_graphs_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn graph_identification() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut worst_cons = 0.0f64;
    for i in 0..50 {
        let conservative = i % 2 == 0;
        let kernel = random_kernel(&mut rng, 20, conservative).unwrap();
        let cells = rng.gen_range(1..=20);
        let mut groups = vec![Vec::new(); cells];
        for x in 0..20 {
            groups[if x < cells { x } else { rng.gen_range(0..cells) }].push(x);
        }
        let partition = CellPartition::new(kernel.space(), groups).unwrap();
        let g = extract_graph(&kernel, &partition).unwrap();
        let w = kernel.space().weights();
        for _ in 0..100 {
            let sf = StepFunction::new(partition.clone(), noise(&mut rng, cells)).unwrap();
            let f = expand_step(&sf, kernel.space()).unwrap();
            let direct: f64 = (0..20)
                .map(|x| w[x] * f[x] * (f[x] - (0..20).map(|y| kernel.entry(x, y) * f[y]).sum::<f64>()))
                .sum();
            worst = worst.max((direct - graph_energy(&g, &sf).unwrap()).abs());
        }
        if conservative {
            worst_cons = worst_cons.max(g.max_killing());
            for j in 0..cells {
                let col: f64 = (0..cells).map(|i| g.conductance(i, j)).sum();
                worst_cons = worst_cons.max((col - partition.masses()[j]).abs());
            }
        }
    }
    verdict(
        worst <= 1e-10 && worst_cons <= 1e-10,
        format!("max |<f-Pf,f> - energy| = {worst:.2e}, conservative defect {worst_cons:.2e} (limit 1e-10)"),
    )
}

fn semigroup_monotone(exp: &Experiment) -> Verdict {
    let mut bad = 0;
    for k in 1..=8 {
        let f = exp.model.basis().vector(k);
        let lk = exp.model.eigenvalues()[k];
        let mut prev = f64::NEG_INFINITY;
        for n in 0..=20 {
            let v = semigroup_form(&exp.model, n, f).unwrap();
            // 0 <= x - (1 - e^{-x}) <= x²/2
            let bound = lk * lk * 2f64.powi(-(n as i32) - 1);
            if v <= prev || v.is_nan() || (v - lk).abs() > bound * (1.0 + 1e-9) + 1e-12 {
                bad += 1;
            }
            prev = v;
        }
    }
    verdict(bad == 0, format!("{bad} violations over k = 1..8, n = 0..20"))
}

fn stage_form_bound(exp: &Experiment) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let fs: Vec<Vec<f64>> = (0..100).map(|_| noise(&mut rng, exp.model.space().len())).collect();
    let points = exp.config.grid.schedule().points();
    let mut bad = 0;
    for &index in &points {
        let stage = Stage::new(&exp.model, &exp.basis, index).unwrap();
        for f in &fs {
            let e = stage.form(f).unwrap();
            let n2 = weighted_inner(f, f, exp.model.space()).unwrap();
            if e < 0.0 || e > index.rate() * n2 {
                bad += 1;
            }
        }
    }
    verdict(bad == 0, format!("{bad} violations over {} grid points x 100 functions", points.len()))
}

fn chebyshev(exp: &Experiment) -> Verdict {
    let mut bad = 0;
    let mut worst = 0.0f64;
    for &m in &exp.config.grid.m {
        for &k in &exp.config.grid.k {
            let p = level_partition(&exp.basis, m, k).unwrap();
            let limit = m as f64 * 2f64.powi(-2 * k as i32);
            let t = tail_mass(&p) + 0.0;
            worst = worst.max(t / limit);
            if t > limit {
                bad += 1;
            }
        }
    }
    verdict(bad == 0, format!("{bad} violations; largest tail mass / bound = {worst:.3}"))
}

fn projection_convergence(exp: &Experiment) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let space = exp.model.space();
    let mut worst_ratio = 0.0f64;
    let mut unsettled = 0;
    for _ in 0..20 {
        let f = noise(&mut rng, space.len());
        for &m in &exp.config.grid.m {
            for &l in &exp.config.grid.l {
                let target = sigma_truncate(space, l, &galerkin_projection(&exp.basis, m, &f).unwrap()).unwrap();
                let dist: Vec<f64> = (2..=8)
                    .map(|k| {
                        let p = Stage::new(&exp.model, &exp.basis, StageIndex::full(0, m, l, k)).unwrap().project(&f).unwrap();
                        weighted_norm(&p.sub(&target), space).unwrap()
                    })
                    .collect();
                let first = dist[0].max(1e-300);
                worst_ratio = worst_ratio.max(dist[6] / first);
                if !eventually_nonincreasing(&dist) {
                    unsettled += 1;
                }
            }
        }
    }
    verdict(
        worst_ratio <= 0.1 && unsettled == 0,
        format!("worst distance(k=8)/distance(k=2) = {worst_ratio:.3e} (limit 0.1), {unsettled} unsettled k-sequences"),
    )
}

fn strong_resolvent(exp: &Experiment) -> Verdict {
    let oracle = common::read_oracle();
    let (shallow, deep) = exp.config.grid.schedule().extremes().unwrap();
    let probe = ResolventProbe::new(1.0, exp.battery.clone()).unwrap();
    let at = |ix| evaluate_point(&exp.model, &exp.basis, ix, std::slice::from_ref(&probe)).unwrap();
    let (shallow, deep) = (at(shallow), at(deep));
    let mut failures = Vec::new();
    let mut worst_tau = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for ((s, d), (name, tau)) in shallow.iter().zip(&deep).zip(&oracle) {
        assert_eq!(&d.test_vector, name, "oracle table out of order");
        // errors at round-off level on both sides count as converged
        let tau = tau.max(1e-12);
        worst_tau = worst_tau.max(d.resolvent_error / tau);
        let ratio = d.resolvent_error / s.resolvent_error.max(1e-12);
        worst_ratio = worst_ratio.max(ratio);
        if d.resolvent_error > 1.5 * tau || d.resolvent_error > 0.25 * s.resolvent_error + 1e-12 {
            failures.push(name.clone());
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "worst deep/tau = {worst_tau:.3} (limit 1.5), worst deep/shallow = {worst_ratio:.3e} (limit 0.25){}",
            if failures.is_empty() { String::new() } else { format!(", failing: {}", failures.join(" ")) }
        ),
    )
}

fn contractions(exp: &Experiment) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut unit_bad = 0;
    let mut multi_bad = 0;
    let mut graphs = 0;
    for g in &exp.config.graph_exports {
        let sg = final_stage_graph(&exp.model, &exp.basis, StageIndex::from(*g)).unwrap();
        let graph = &sg.graph;
        graphs += 1;
        for _ in 0..100 {
            let f: Vec<f64> = (0..graph.len()).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let cut: Vec<f64> = f.iter().map(|&x| unit_contraction(x)).collect();
            if graph.energy(&cut).unwrap() > graph.energy(&f).unwrap() + 1e-12 {
                unit_bad += 1;
            }
            for arity in 1..=3 {
                let inputs: Vec<Vec<f64>> = (0..arity).map(|_| (0..graph.len()).map(|_| rng.gen_range(-2.0..=2.0)).collect()).collect();
                let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                let (lhs, rhs) = contraction_sides(graph, &NormalContraction::random(&mut rng, arity), &refs).unwrap();
                if lhs > rhs + 1e-10 {
                    multi_bad += 1;
                }
            }
        }
    }
    verdict(
        unit_bad + multi_bad == 0,
        format!("{unit_bad} unit and {multi_bad} multi-variable violations on {graphs} graphs"),
    )
}

fn refinement(exp: &Experiment) -> Verdict {
    let grid = &exp.config.grid;
    let mut bad = 0;
    let mut pairs = 0;
    for &m in &grid.m {
        for &k in &grid.k {
            let coarse = level_partition(&exp.basis, m, k).unwrap();
            for &m2 in grid.m.iter().filter(|&&v| v >= m) {
                for &k2 in grid.k.iter().filter(|&&v| v >= k) {
                    pairs += 1;
                    if level_partition(&exp.basis, m2, k2).unwrap().refines(&coarse).is_err() {
                        bad += 1;
                    }
                }
            }
        }
    }
    verdict(bad == 0, format!("{bad} of {pairs} ordered pairs fail"))
}

fn determinism() -> Verdict {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_mosco-graphs"))
            .args(["--out", d.path().to_str().unwrap(), "run"])
            .output()
            .unwrap();
        if !status.status.success() {
            return verdict(false, format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
    }
    let mut files: Vec<String> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n == "convergence.csv" || n.starts_with("graph_"))
        .collect();
    files.sort();
    let differing: Vec<&String> = files
        .iter()
        .filter(|n| fs::read(dirs[0].path().join(n)).ok() != fs::read(dirs[1].path().join(n)).ok())
        .collect();
    verdict(
        differing.is_empty() && files.len() == 3,
        format!("{} files compared, {} differ", files.len(), differing.len()),
    )
}

fn negative_control() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("corrupt.json");
    fs::write(&cfg, r#"{"schema": 1, "debug": {"corrupt_kernel": true}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mosco-graphs"))
        .args(["--config", cfg.to_str().unwrap(), "verify"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let flagged = stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("extraction-symmetry"));
    verdict(
        flagged && !out.status.success(),
        format!("exit code {:?}, symmetry audit flagged: {flagged}", out.status.code()),
    )
}

fn main() -> ExitCode {
    let exp = Experiment::prepare(ExperimentConfig::default()).expect("default experiment");
    let criteria: Vec<(&str, Check)> = vec![
        ("graph identification", Box::new(graph_identification)),
        ("semigroup forms increase to the eigenvalue", Box::new(|| semigroup_monotone(&exp))),
        ("stage form bound", Box::new(|| stage_form_bound(&exp))),
        ("tail cell mass bound", Box::new(|| chebyshev(&exp))),
        ("projection convergence in k", Box::new(|| projection_convergence(&exp))),
        ("strong resolvent convergence", Box::new(|| strong_resolvent(&exp))),
        ("normal contractions on stage graphs", Box::new(|| contractions(&exp))),
        ("partition refinement", Box::new(|| refinement(&exp))),
        ("determinism", Box::new(determinism)),
        ("negative control", Box::new(negative_control)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("{status} {:>2} {name}: {} [{:.1}s]", i + 1, v.detail, start.elapsed().as_secs_f64());
        if !v.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
