//! Sylvester inertia of shifted Hermitian matrices.
//!
//! `H − σI = P L D Lᴴ Pᵀ` with Bunch–Kaufman diagonal pivoting; the signs of
//! the 1×1 and 2×2 blocks of `D` give the number of eigenvalues below, at and
//! above `σ`.

use num_complex::Complex64;

/// Bunch–Kaufman growth-control constant `(1 + √17) / 8`.
const ALPHA: f64 = 0.640_388_203_202_208_0;

/// Relative pivot tolerance; pivots below `PIVOT_TOLERANCE · ‖H‖` count as
/// zero eigenvalues.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// Max absolute row sum, an upper bound on the spectral norm.
pub fn norm_bound(matrix: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|i| matrix[i * n..(i + 1) * n].iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inertia of `matrix − shift·I` for a row-major `n × n` Hermitian matrix.
pub fn inertia(matrix: &[Complex64], n: usize, shift: f64) -> Inertia {
    let tol = PIVOT_TOLERANCE * norm_bound(matrix, n).max(shift.abs()).max(1.0);
    inertia_with_tolerance(matrix, n, shift, tol)
}

pub fn inertia_with_tolerance(matrix: &[Complex64], n: usize, shift: f64, tol: f64) -> Inertia {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    for i in 0..n {
        a[i * n + i] -= shift;
    }
    let mut result = Inertia::default();
    let count = |d: f64, result: &mut Inertia| {
        if d.abs() <= tol {
            result.zero += 1;
        } else if d < 0.0 {
            result.negative += 1;
        } else {
            result.positive += 1;
        }
    };

    let mut k = 0;
    while k < n {
        let akk = a[k * n + k].re;
        let (mut imax, mut colmax) = (k, 0.0f64);
        for i in k + 1..n {
            let v = a[i * n + k].norm();
            if v > colmax {
                colmax = v;
                imax = i;
            }
        }
        if akk.abs().max(colmax) <= tol {
            // numerically zero column: zero eigenvalue, nothing to eliminate
            count(0.0, &mut result);
            k += 1;
            continue;
        }

        let two_by_two;
        if akk.abs() >= ALPHA * colmax {
            two_by_two = false;
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| a[imax * n + j].norm())
                .fold(0.0, f64::max);
            if akk.abs() * rowmax >= ALPHA * colmax * colmax {
                two_by_two = false;
            } else if a[imax * n + imax].re.abs() >= ALPHA * rowmax {
                swap_symmetric(&mut a, n, k, imax);
                two_by_two = false;
            } else {
                swap_symmetric(&mut a, n, k + 1, imax);
                two_by_two = true;
            }
        }

        if !two_by_two {
            let d = a[k * n + k].re;
            count(d, &mut result);
            if d.abs() > tol {
                let col: Vec<Complex64> = (k + 1..n).map(|i| a[i * n + k]).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    let li = col[ii] / d;
                    let row = &mut a[i * n..(i + 1) * n];
                    for (jj, j) in (k + 1..n).enumerate() {
                        row[j] -= li * col[jj].conj();
                    }
                }
            }
            k += 1;
        } else {
            let p = a[k * n + k].re;
            let q = a[(k + 1) * n + k + 1].re;
            let b = a[(k + 1) * n + k];
            let det = p * q - b.norm_sqr();
            // eigenvalues of the 2×2 block
            let mean = 0.5 * (p + q);
            let rad = (0.25 * (p - q) * (p - q) + b.norm_sqr()).sqrt();
            count(mean - rad, &mut result);
            count(mean + rad, &mut result);
            // D⁻¹ = [[q, −b̄], [−b, p]] / det
            let c0: Vec<Complex64> = (k + 2..n).map(|i| a[i * n + k]).collect();
            let c1: Vec<Complex64> = (k + 2..n).map(|i| a[i * n + k + 1]).collect();
            let l0: Vec<Complex64> = c0
                .iter()
                .zip(&c1)
                .map(|(x0, x1)| (x0 * q - x1 * b) / det)
                .collect();
            let l1: Vec<Complex64> = c0
                .iter()
                .zip(&c1)
                .map(|(x0, x1)| (x1 * p - x0 * b.conj()) / det)
                .collect();
            for (ii, i) in (k + 2..n).enumerate() {
                let row = &mut a[i * n..(i + 1) * n];
                for (jj, j) in (k + 2..n).enumerate() {
                    row[j] -= l0[ii] * c0[jj].conj() + l1[ii] * c1[jj].conj();
                }
            }
            k += 2;
        }
    }
    result
}

fn swap_symmetric(a: &mut [Complex64], n: usize, i: usize, j: usize) {
    if i == j {
        return;
    }
    for c in 0..n {
        a.swap(i * n + c, j * n + c);
    }
    for r in 0..n {
        a.swap(r * n + i, r * n + j);
    }
}

/// Number of eigenvalues in the closed interval `[lo, hi]`.
pub fn count_in_interval(matrix: &[Complex64], n: usize, lo: f64, hi: f64) -> usize {
    if hi < lo {
        return 0;
    }
    let above = inertia(matrix, n, hi).positive;
    let below = inertia(matrix, n, lo).negative;
    n - above - below
}
