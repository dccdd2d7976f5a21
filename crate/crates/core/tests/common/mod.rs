#![allow(dead_code)]

use std::time::{Duration, Instant};

use hsic_select::kernels::{DiagonalConvention, KernelMatrix};
use ndarray::Array2;
use rand::Rng;

/// Joint law of the 2x2 test distribution: `JOINT[x][y]`.
pub const JOINT: [[f64; 2]; 2] = [[0.4, 0.1], [0.1, 0.4]];

/// Population HSIC of a finite joint law by exhaustive expectation:
/// `E[k l'] + E[k] E[l] - 2 E_{x,y}[E_x' k(x, x') E_y' l(y, y')]`.
pub fn population_hsic(
    joint: &[[f64; 2]; 2],
    xs: [f64; 2],
    ys: [f64; 2],
    k: impl Fn(f64, f64) -> f64,
    l: impl Fn(f64, f64) -> f64,
) -> f64 {
    let px = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let py = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let mut t1 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for a2 in 0..2 {
                for b2 in 0..2 {
                    t1 += joint[a][b] * joint[a2][b2] * k(xs[a], xs[a2]) * l(ys[b], ys[b2]);
                }
            }
        }
    }
    let mut ek = 0.0;
    let mut el = 0.0;
    for a in 0..2 {
        for a2 in 0..2 {
            ek += px[a] * px[a2] * k(xs[a], xs[a2]);
            el += py[a] * py[a2] * l(ys[a], ys[a2]);
        }
    }
    let mut t3 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let kx: f64 = (0..2).map(|a2| px[a2] * k(xs[a], xs[a2])).sum();
            let ly: f64 = (0..2).map(|b2| py[b2] * l(ys[b], ys[b2])).sum();
            t3 += joint[a][b] * kx * ly;
        }
    }
    t1 + ek * el - 2.0 * t3
}

pub fn gauss1(a: f64, b: f64) -> f64 {
    (-(a - b) * (a - b)).exp()
}

/// `m` draws of `(x, y)` cell indices from `JOINT`.
pub fn sample_joint(m: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random();
        let (x, y) = if u < JOINT[0][0] {
            (0.0, 0.0)
        } else if u < JOINT[0][0] + JOINT[0][1] {
            (0.0, 1.0)
        } else if u < JOINT[0][0] + JOINT[0][1] + JOINT[1][0] {
            (1.0, 0.0)
        } else {
            (1.0, 1.0)
        };
        xs.push(x);
        ys.push(y);
    }
    (xs, ys)
}

/// Like [`sample_joint`] but redraws until both label values occur.
pub fn sample_joint_two_classes(m: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    loop {
        let (x, y) = sample_joint(m, rng);
        if y.iter().any(|&v| v == 0.0) && y.iter().any(|&v| v == 1.0) {
            return (x, y);
        }
    }
}

pub fn to_signed(y: &[f64]) -> Vec<i8> {
    y.iter().map(|&v| if v == 1.0 { 1 } else { -1 }).collect()
}

pub fn column(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
}

/// Random symmetric zero-diagonal matrix; entries 0/1 or uniform in [-1, 1].
pub fn random_zero_diag(m: usize, binary: bool, rng: &mut impl Rng) -> KernelMatrix {
    let mut a = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..i {
            let v = if binary {
                f64::from(rng.random_range(0..2u8))
            } else {
                rng.random_range(-1.0..1.0)
            };
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    KernelMatrix::new(a, DiagonalConvention::ZeroDiagonal).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let mu = mean(v);
    (v.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Timer(Instant::now())
    }

    pub fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}
