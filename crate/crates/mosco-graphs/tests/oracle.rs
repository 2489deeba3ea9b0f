//! Recomputes the half-resolution resolvent thresholds and compares them
//! with the recorded table. Set `MOSCO_GRAPHS_WRITE_ORACLE=1` to rewrite it.

mod common;

use common::*;
use mosco_graphs::config::ExperimentConfig;
use mosco_graphs::Experiment;

const DEEP: (u32, usize, usize, u32) = (12, 16, 4, 8);

fn thresholds() -> Vec<(String, f64)> {
    let config = ExperimentConfig {
        resolution: ORACLE_RESOLUTION,
        modes: ORACLE_MODES,
        exhaustion_levels: ORACLE_LEVELS,
        ..ExperimentConfig::default()
    };
    let exp = Experiment::prepare(config).unwrap();
    let dense = DenseNeumann::new(ORACLE_RESOLUTION, ORACLE_MODES);
    let (n, m, l, k) = DEEP;
    let a = dense.stage_generator(n, m, l, k);
    exp.battery
        .iter()
        .map(|v| (v.name.clone(), dense.resolvent_distance(&a, 1.0, &v.values)))
        .collect()
}

#[test]
fn dense_model_matches_closed_form() {
    let dense = DenseNeumann::new(64, 8);
    let gram = dense.modes.transpose() * &dense.modes;
    assert!((gram - nalgebra::DMatrix::<f64>::identity(8, 8)).amax() < 1e-12);
    // no projections beyond π_K: eigenvalues -2^n (1 - e^{-λ_k 2^{-n}})
    let a = dense.stage_generator(3, 8, 4, 30);
    let mut got: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().filter(|v| v.abs() > 1e-9).collect();
    got.sort_by(f64::total_cmp);
    let mut want: Vec<f64> = dense.eigenvalues[1..].iter().map(|l| -8.0 * (1.0 - (-l / 8.0).exp())).collect();
    want.sort_by(f64::total_cmp);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{g} vs {w}");
    }
}

#[test]
fn recorded_thresholds_reproduce() {
    let fresh = thresholds();
    if std::env::var_os("MOSCO_GRAPHS_WRITE_ORACLE").is_some() {
        let mut text = String::from("# resolvent error at (n, m, l, k) = (12, 16, 4, 8), lambda = 1, M = 512, K = 64, seed 1\n");
        text.push_str("test_vector,tau\n");
        for (name, tau) in &fresh {
            text.push_str(&format!("{name},{tau:.17e}\n"));
        }
        std::fs::write(oracle_path(), text).unwrap();
    }
    let recorded = read_oracle();
    assert_eq!(recorded.len(), fresh.len());
    for ((rn, rt), (fname, ft)) in recorded.iter().zip(&fresh) {
        assert_eq!(rn, fname);
        assert!((rt - ft).abs() <= (1e-9 * rt.abs()).max(1e-11), "{rn}: recorded {rt:e}, recomputed {ft:e}");
    }
}
