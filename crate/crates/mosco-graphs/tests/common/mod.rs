//! Dense reference computation of stage resolvents, written from the
//! definitions without the library's stage code.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

pub const ORACLE_RESOLUTION: usize = 512;
pub const ORACLE_MODES: usize = 64;
pub const ORACLE_LEVELS: usize = 4;

pub fn oracle_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/resolvent_oracle.csv")
}

/// Neumann interval on `points` midpoints, all operators written in the
/// coordinates `W^{1/2} f`, where they are symmetric matrices.
pub struct DenseNeumann {
    pub points: usize,
    /// `W^{1/2} φ_k` as columns.
    pub modes: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// `φ_k(x)` at the midpoints, unweighted.
    pub raw: DMatrix<f64>,
    pub sqrt_w: f64,
}

impl DenseNeumann {
    pub fn new(points: usize, count: usize) -> Self {
        let x = |i: usize| (i as f64 + 0.5) / points as f64;
        let raw = DMatrix::from_fn(points, count, |i, k| if k == 0 { 1.0 } else { SQRT_2 * (k as f64 * PI * x(i)).cos() });
        let sqrt_w = (1.0 / points as f64).sqrt();
        Self {
            points,
            modes: &raw * sqrt_w,
            eigenvalues: (0..count).map(|k| (k as f64 * PI).powi(2)).collect(),
            raw,
            sqrt_w,
        }
    }

    fn heat(&self, t: f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|l| (-l * t).exp())));
        &self.modes * d * self.modes.transpose()
    }

    fn generator(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.iter().map(|l| -l).collect()));
        &self.modes * d * self.modes.transpose()
    }

    fn galerkin(&self, m: usize) -> DMatrix<f64> {
        let b = self.modes.columns(0, m);
        b * b.transpose()
    }

    fn in_level(&self, l: usize, i: usize) -> bool {
        i * ORACLE_LEVELS < l * self.points
    }

    fn mask(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.points, self.points, |i, j| if i == j && self.in_level(l, i) { 1.0 } else { 0.0 })
    }

    /// Conditional expectation on the level cells of `φ_0 … φ_{m-1}` inside `X_l`.
    fn conditioning(&self, m: usize, l: usize, k: u32) -> DMatrix<f64> {
        let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for i in (0..self.points).filter(|&i| self.in_level(l, i)) {
            let key = (0..m).map(|c| level(self.raw[(i, c)], k)).collect();
            cells.entry(key).or_default().push(i);
        }
        let mut e = DMatrix::zeros(self.points, self.points);
        for cell in cells.values() {
            // unit vector W^{1/2} 1_A / μ(A)^{1/2}; weights are uniform
            let v = 1.0 / (cell.len() as f64).sqrt();
            for &a in cell {
                for &b in cell {
                    e[(a, b)] = v * v;
                }
            }
        }
        e
    }

    /// `-2^n Π^T (I - P_{2^{-n}}) Π` with `Π = E_{m,l,k} 1_{X_l} π_m`.
    pub fn stage_generator(&self, n: u32, m: usize, l: usize, k: u32) -> DMatrix<f64> {
        let rate = 2f64.powi(n as i32);
        let pi = self.conditioning(m, l, k) * self.mask(l) * self.galerkin(m);
        let id = DMatrix::<f64>::identity(self.points, self.points);
        let a = pi.transpose() * (id - self.heat(1.0 / rate)) * &pi * (-rate);
        (&a + a.transpose()) * 0.5
    }

    /// `‖(λ - A)^{-1} f - (λ - L)^{-1} f‖` in L²(μ), both by eigendecomposition.
    pub fn resolvent_distance(&self, a: &DMatrix<f64>, lambda: f64, f: &[f64]) -> f64 {
        let ft = DVector::from_iterator(self.points, f.iter().map(|v| v * self.sqrt_w));
        let solve = |op: DMatrix<f64>| {
            let eig = op.symmetric_eigen();
            let c = eig.eigenvectors.transpose() * &ft;
            let scaled = DVector::from_iterator(c.len(), c.iter().zip(eig.eigenvalues.iter()).map(|(ci, d)| ci / (lambda - d)));
            eig.eigenvectors * scaled
        };
        (solve(a.clone()) - solve(self.generator())).norm()
    }
}

/// Dyadic level of `v`: `j` with `j/2^k < v <= (j+1)/2^k`, tails past `±2^k`.
pub fn level(v: f64, k: u32) -> i64 {
    let s = (1u64 << k) as f64;
    let four = 1i64 << (2 * k);
    if v <= -s {
        -four - 1
    } else if v > s {
        four
    } else {
        ((v * s).ceil() as i64 - 1).clamp(-four, four - 1)
    }
}

pub fn read_oracle() -> Vec<(String, f64)> {
    let text = std::fs::read_to_string(oracle_path()).expect("oracle table present");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .skip(1)
        .map(|l| {
            let (name, tau) = l.split_once(',').expect("two columns");
            (name.to_string(), tau.parse().expect("float"))
        })
        .collect()
}
