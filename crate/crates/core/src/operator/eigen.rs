//! Dense Hermitian eigensolver.
//!
//! Householder reduction to a real symmetric tridiagonal matrix followed by
//! implicit-shift QL with eigenvector accumulation. The reduction works on
//! the lower triangle of a row-major buffer so both the Hermitian
//! matrix-vector product and the rank-2 update stream through contiguous
//! rows.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Total QL sweep budget is `SWEEPS_PER_EIGENVALUE · n`.
pub const SWEEPS_PER_EIGENVALUE: usize = 30;

/// Output of the Householder reduction: `A = Q T Qᴴ` with
/// `Q = H₀ H₁ ⋯ H_{n-2}` and `H_k = I − τ_k v_k v_kᴴ`.
struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[k]` couples `k` and `k+1`; `off[n-1] = 0`.
    off: Vec<f64>,
    /// Reflector `k` acts on indices `k+1..n`; `v_k[0] = 1` is stored.
    reflectors: Vec<(Complex64, Vec<Complex64>)>,
}

/// Householder vector for `(alpha, x)`: returns `(β, τ)` and overwrites `x`
/// with the tail of `v` so that `(I − τ v vᴴ)ᴴ (alpha; x) = (β; 0)`.
fn householder(alpha: Complex64, x: &mut [Complex64]) -> (f64, Complex64) {
    let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if xnorm == 0.0 && alpha.im == 0.0 {
        return (alpha.re, Complex64::new(0.0, 0.0));
    }
    let norm = alpha.re.hypot(alpha.im).hypot(xnorm);
    let beta = if alpha.re >= 0.0 { -norm } else { norm };
    let tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
    let scale = Complex64::new(1.0, 0.0) / (alpha - beta);
    for z in x.iter_mut() {
        *z *= scale;
    }
    (beta, tau)
}

/// Reduces the Hermitian matrix whose lower triangle is stored row-major in
/// `a` (`a[i*n + j]`, `j ≤ i`). The buffer is destroyed.
fn tridiagonalize(a: &mut [Complex64], n: usize) -> Tridiagonal {
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
    let mut x = vec![zero; n];

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let base = k + 1;
        // column k below the diagonal
        let mut v: Vec<Complex64> = (base..n).map(|i| a[i * n + k]).collect();
        let alpha = v[0];
        let (beta, tau) = householder(alpha, &mut v[1..]);
        v[0] = Complex64::new(1.0, 0.0);
        off[k] = beta;
        diag[k] = a[k * n + k].re;

        if tau != zero {
            // x = τ A₂₂ v using the lower triangle only
            let x = &mut x[..m];
            x.fill(zero);
            for i in 0..m {
                let row = &a[(base + i) * n + base..(base + i) * n + base + i + 1];
                let vi = v[i];
                let mut acc = row[i].re * vi;
                for j in 0..i {
                    acc += row[j] * v[j];
                    x[j] += row[j].conj() * vi;
                }
                x[i] += acc;
            }
            for xi in x.iter_mut() {
                *xi *= tau;
            }
            // w = x − ½ τ (xᴴ v) v
            let xhv: Complex64 = x.iter().zip(&v).map(|(xi, vi)| xi.conj() * vi).sum();
            let shift = -0.5 * tau * xhv;
            for (xi, vi) in x.iter_mut().zip(&v) {
                *xi += shift * vi;
            }
            // A₂₂ ← A₂₂ − v wᴴ − w vᴴ
            for i in 0..m {
                let (vi, wi) = (v[i], x[i]);
                let row = &mut a[(base + i) * n + base..(base + i) * n + base + i + 1];
                for j in 0..=i {
                    row[j] -= vi * x[j].conj() + wi * v[j].conj();
                }
            }
        }
        reflectors.push((tau, v));
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1) * n + n - 1].re;
    }
    Tridiagonal {
        diag,
        off,
        reflectors,
    }
}

/// Implicit QL on a real symmetric tridiagonal matrix. With `vectors`, the
/// rotations are accumulated into the rows of `vectors` (row `i` ends up
/// holding eigenvector `i` of the tridiagonal matrix). Eigenvalues are
/// returned in `d`, unsorted.
fn tridiagonal_ql(
    d: &mut [f64],
    e: &mut [f64],
    mut vectors: Option<&mut [f64]>,
    n: usize,
) -> Result<()> {
    let eps = f64::EPSILON;
    let mut budget = SWEEPS_PER_EIGENVALUE * n.max(1);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if budget == 0 {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations,
                    });
                }
                budget -= 1;

                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = vectors.as_deref_mut() {
                        let (lo, hi) = z.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let h = *b;
                            *b = s * *a + c * h;
                            *a = c * *a - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Copies a row-major Hermitian matrix into a lower-triangle work buffer,
/// symmetrising on the way.
fn lower_work(matrix: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut work = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            work[i * n + j] = 0.5 * (matrix[i * n + j] + matrix[j * n + i].conj());
        }
    }
    work
}

/// Eigenvalues of a row-major `n × n` Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(matrix: &[Complex64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(matrix.len(), n * n);
    let mut work = lower_work(matrix, n);
    let Tridiagonal { mut diag, mut off, .. } = tridiagonalize(&mut work, n);
    tridiagonal_ql(&mut diag, &mut off, None, n)?;
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

/// Full eigendecomposition of a row-major `n × n` Hermitian matrix.
/// Returns ascending eigenvalues and the eigenvectors stored contiguously:
/// entry `i` of eigenvector `k` is `vectors[k*n + i]`.
pub fn hermitian_eigen(matrix: &[Complex64], n: usize) -> Result<(Vec<f64>, Vec<Complex64>)> {
    assert_eq!(matrix.len(), n * n);
    let mut work = lower_work(matrix, n);
    let Tridiagonal {
        mut diag,
        mut off,
        reflectors,
    } = tridiagonalize(&mut work, n);
    drop(work);

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut diag, &mut off, Some(&mut z), n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let values = order.iter().map(|&k| diag[k]).collect();

    let mut vectors = vec![Complex64::new(0.0, 0.0); n * n];
    for (slot, &k) in order.iter().enumerate() {
        let y = &mut vectors[slot * n..(slot + 1) * n];
        for (yi, zi) in y.iter_mut().zip(&z[k * n..(k + 1) * n]) {
            *yi = Complex64::new(*zi, 0.0);
        }
        // y ← H₀ H₁ ⋯ H_{n-2} y
        for (r, (tau, v)) in reflectors.iter().enumerate().rev() {
            let tail = &mut y[r + 1..];
            let dot: Complex64 = v.iter().zip(tail.iter()).map(|(vi, yi)| vi.conj() * yi).sum();
            let coef = tau * dot;
            for (yi, vi) in tail.iter_mut().zip(v) {
                *yi -= coef * vi;
            }
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, seed: u64) -> Vec<Complex64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            m[i * n + i] = Complex64::new(next(), 0.0);
            for j in 0..i {
                let z = Complex64::new(next(), next());
                m[i * n + j] = z;
                m[j * n + i] = z.conj();
            }
        }
        m
    }

    fn residual(m: &[Complex64], n: usize, values: &[f64], vectors: &[Complex64]) -> f64 {
        (0..n)
            .map(|k| {
                let v = &vectors[k * n..(k + 1) * n];
                (0..n)
                    .map(|i| {
                        let hv: Complex64 = (0..n).map(|j| m[i * n + j] * v[j]).sum();
                        (hv - values[k] * v[i]).norm_sqr()
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn max_gram_defect(n: usize, vectors: &[Complex64]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..=a {
                let dot: Complex64 = (0..n)
                    .map(|i| vectors[a * n + i].conj() * vectors[b * n + i])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    #[test]
    fn diagonal_and_empty() {
        let (values, vectors) = hermitian_eigen(&[], 0).unwrap();
        assert!(values.is_empty() && vectors.is_empty());
        let m = [3.0, 0.0, 0.0, -1.0].map(|x| Complex64::new(x, 0.0));
        let (values, _) = hermitian_eigen(&m, 2).unwrap();
        assert_eq!(values, vec![-1.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[a, b], [b̄, c]] has eigenvalues (a+c)/2 ± sqrt(((a-c)/2)² + |b|²)
        let (a, c, b) = (1.0, -0.5, Complex64::new(0.3, -0.7));
        let m = [Complex64::new(a, 0.0), b, b.conj(), Complex64::new(c, 0.0)];
        let values = hermitian_eigenvalues(&m, 2).unwrap();
        let r = (((a - c) / 2.0f64).powi(2) + b.norm_sqr()).sqrt();
        assert!((values[0] - ((a + c) / 2.0 - r)).abs() < 1e-14);
        assert!((values[1] - ((a + c) / 2.0 + r)).abs() < 1e-14);
    }

    #[test]
    fn trace_and_frobenius_are_preserved() {
        let n = 40;
        let m = random_hermitian(n, 9);
        let values = hermitian_eigenvalues(&m, n).unwrap();
        let trace: f64 = (0..n).map(|i| m[i * n + i].re).sum();
        let frob: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        assert!((values.iter().sum::<f64>() - trace).abs() < 1e-11);
        assert!((values.iter().map(|x| x * x).sum::<f64>() - frob).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residuals_and_orthonormality(n in 1usize..30, seed in any::<u64>()) {
            let m = random_hermitian(n, seed);
            let (values, vectors) = hermitian_eigen(&m, n).unwrap();
            prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(residual(&m, n, &values, &vectors) < 1e-12);
            prop_assert!(max_gram_defect(n, &vectors) < 1e-12);
            let only = hermitian_eigenvalues(&m, n).unwrap();
            for (a, b) in only.iter().zip(&values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        // I ⊗ [[0, 1], [1, 0]] has ±1 each with multiplicity n/2
        let n = 12;
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for b in 0..n / 2 {
            m[(2 * b) * n + 2 * b + 1] = Complex64::new(0.0, 1.0);
            m[(2 * b + 1) * n + 2 * b] = Complex64::new(0.0, -1.0);
        }
        let (values, vectors) = hermitian_eigen(&m, n).unwrap();
        for (k, v) in values.iter().enumerate() {
            let expected = if k < n / 2 { -1.0 } else { 1.0 };
            assert!((v - expected).abs() < 1e-14);
        }
        assert!(max_gram_defect(n, &vectors) < 1e-13);
    }
}
