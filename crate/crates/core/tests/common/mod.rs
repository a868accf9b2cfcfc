#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shubin_core::geometry::{Ball, Region};
use shubin_core::operator::{evaluate, CoeffVector, EigenBasis};

/// Symmetric banded matrix stored by diagonals: `diag[d][i] = A[i][i+d]`.
pub struct Banded {
    pub n: usize,
    pub diag: Vec<Vec<f64>>,
}

impl Banded {
    /// Toeplitz stencil `coeffs[d]` on offset `±d` plus a diagonal potential.
    pub fn stencil(coeffs: &[f64], potential: &[f64]) -> Self {
        let n = potential.len();
        let diag = coeffs
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                (0..n - d)
                    .map(|i| if d == 0 { c + potential[i] } else { c })
                    .collect()
            })
            .collect();
        Banded { n, diag }
    }

    fn bandwidth(&self) -> usize {
        self.diag.len() - 1
    }

    /// Banded Cholesky factor, `l[i][d] = L[i][i-d]`.
    pub fn cholesky(&self) -> Vec<Vec<f64>> {
        let b = self.bandwidth();
        let mut l = vec![vec![0.0; b + 1]; self.n];
        for i in 0..self.n {
            for d in (0..=b.min(i)).rev() {
                let j = i - d;
                let mut s = self.diag[d][j];
                for e in 1..=(b - d).min(j) {
                    s -= l[i][d + e] * l[j][e];
                }
                if d == 0 {
                    assert!(s > 0.0, "matrix not positive definite");
                    l[i][0] = s.sqrt();
                } else {
                    l[i][d] = s / l[j][0];
                }
            }
        }
        l
    }
}

fn cholesky_solve(l: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let b = l[0].len() - 1;
    let mut y = rhs.to_vec();
    for i in 0..n {
        for d in 1..=b.min(i) {
            y[i] -= l[i][d] * y[i - d];
        }
        y[i] /= l[i][0];
    }
    for i in (0..n).rev() {
        for d in 1..=b.min(n - 1 - i) {
            y[i] -= l[i + d][d] * y[i + d];
        }
        y[i] /= l[i][0];
    }
    y
}

/// Smallest eigenvalue of an SPD banded matrix by inverse iteration; the
/// estimate `vᵀv / vᵀA⁻¹v` never forms `Av`, so large stencil weights do not
/// cancel.
pub fn smallest_eigenvalue(a: &Banded) -> f64 {
    let l = a.cholesky();
    let mut v = vec![1.0; a.n];
    let mut est = 0.0;
    for _ in 0..200 {
        let w = cholesky_solve(&l, &v);
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let vw: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        let next = vv / vw;
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - est).abs() < 1e-15 * next {
            return next;
        }
        est = next;
    }
    est
}

/// `(−d²/dx²)^m + x^{2k}` on `[−L, L]` with Dirichlet ends, for `m ∈ {1, 2}`.
pub fn finite_difference_ground_state(k: u32, m: u32, half_width: f64, points: usize) -> f64 {
    let h = 2.0 * half_width / (points - 1) as f64;
    let interior: Vec<f64> = (1..points - 1).map(|i| -half_width + i as f64 * h).collect();
    let potential: Vec<f64> = interior.iter().map(|x| x.powi(2 * k as i32)).collect();
    let coeffs: Vec<f64> = match m {
        // fourth-order −u''
        1 => [30.0, -16.0, 1.0].iter().map(|c| c / (12.0 * h * h)).collect(),
        // fourth-order u''''
        2 => [56.0, -39.0, 12.0, -1.0].iter().map(|c| c / (6.0 * h.powi(4))).collect(),
        _ => panic!("unsupported m"),
    };
    smallest_eigenvalue(&Banded::stencil(&coeffs, &potential))
}

/// Composite Simpson nodes and weights on `ω ∩ [−L, L]`.
pub fn simpson_rule(region: &Region, step: f64) -> (Vec<f64>, Vec<f64>) {
    let w = region.window();
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for (a, b) in region.intervals_within(-w, w).unwrap() {
        let mut n = ((b - a) / step).ceil() as usize;
        n += n % 2;
        let n = n.max(2);
        let h = (b - a) / n as f64;
        for i in 0..=n {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            xs.push(a + i as f64 * h);
            ws.push(c * h / 3.0);
        }
    }
    (xs, ws)
}

/// `f ↦ ∫_ω f²` on the span of the first `count` eigenmodes, by Simpson on a
/// fine grid of function values.
pub struct OmegaMass {
    values: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl OmegaMass {
    pub fn new(basis: &EigenBasis, region: &Region, count: usize, step: f64) -> Self {
        let (xs, weights) = simpson_rule(region, step);
        let values = (0..count)
            .map(|i| {
                let mut e = vec![0.0; count];
                e[i] = 1.0;
                evaluate(basis, &CoeffVector::eigen(e), &xs).unwrap()
            })
            .collect();
        OmegaMass { values, weights }
    }

    pub fn mass(&self, c: &[f64]) -> f64 {
        let norm2: f64 = c.iter().map(|x| x * x).sum();
        let mut total = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let f: f64 = c.iter().zip(&self.values).map(|(ci, v)| ci * v[k]).sum();
            total += w * f * f;
        }
        total / norm2
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `sup ‖f‖/‖f‖_ω` by random search over unit vectors followed by a
/// shrinking-step coordinate refinement on the sphere.
pub fn optimized_constant(oracle: &OmegaMass, dim: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = vec![0.0; dim];
    let mut best_q = f64::INFINITY;
    for _ in 0..samples {
        let mut c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut c);
        let q = oracle.mass(&c);
        if q < best_q {
            best_q = q;
            best = c;
        }
    }
    let mut step = 0.1;
    while step > 1e-12 {
        let mut improved = false;
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = best.clone();
                c[j] += sign * step;
                normalize(&mut c);
                let q = oracle.mass(&c);
                if q < best_q {
                    best_q = q;
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best_q.powf(-0.5)
}

/// Checks disjointness of the selection and the 3-fold covering, returning
/// a description of the first failure.
pub fn vitali_postconditions<const D: usize>(balls: &[Ball<D>], selected: &[usize]) -> Result<(), String> {
    let dist = |a: &Ball<D>, b: &Ball<D>| {
        a.center
            .iter()
            .zip(&b.center)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    for (i, &a) in selected.iter().enumerate() {
        for &b in &selected[i + 1..] {
            if dist(&balls[a], &balls[b]) < balls[a].radius + balls[b].radius {
                return Err(format!("selected balls {a} and {b} overlap"));
            }
        }
    }
    for (i, ball) in balls.iter().enumerate() {
        let covered = selected
            .iter()
            .any(|&s| dist(ball, &balls[s]) + ball.radius <= 3.0 * balls[s].radius * (1.0 + 1e-12));
        if !covered {
            return Err(format!("ball {i} not inside any tripled selected ball"));
        }
    }
    Ok(())
}

pub fn random_balls<const D: usize>(rng: &mut ChaCha8Rng, count: usize) -> Vec<Ball<D>> {
    (0..count)
        .map(|_| {
            let mut c = [0.0; D];
            c.iter_mut().for_each(|x| *x = rng.random_range(-10.0..10.0));
            Ball::new(c, rng.random_range(0.05..4.0))
        })
        .collect()
}

/// Log-spaced grid.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).min(hi))
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
