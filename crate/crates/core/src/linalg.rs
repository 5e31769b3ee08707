//! Small dense complex matrix helpers.
//!
//! Everything here works on `DMatrix<Complex64>`; the systems of interest
//! have N ≤ ~20 so no structure is exploited.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `[a, b] = ab - ba`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// `(m + m*) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Largest entrywise deviation `|m_ij - conj(m_ji)|`.
pub fn hermitian_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0[0]
}

/// `V diag(f(λ)) V*`
pub fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let w = f(lambda);
        if w == 0.0 {
            continue;
        }
        let col = vectors.column(k);
        for i in 0..n {
            let vi = col[i] * w;
            for j in 0..n {
                out[(i, j)] += vi * col[j].conj();
            }
        }
    }
    out
}

/// Square root of a positive semidefinite matrix. Eigenvalues within
/// rounding noise of zero (relative to the largest) are treated as zero so
/// that rank-deficient inputs do not pick up `sqrt(eps)` artifacts.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let top = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let floor = 64.0 * f64::EPSILON * top.max(f64::MIN_POSITIVE);
    spectral_map(
        &values,
        &vectors,
        |l| if l > floor { l.sqrt() } else { 0.0 },
    )
}

/// Attempts a Cholesky factorization of `m + shift·I` (Hermitian part
/// only). Succeeds iff every eigenvalue of `m` exceeds `-shift`, up to
/// rounding, which makes this a cheap positivity test.
pub fn is_positive_with_shift(m: &CMatrix, shift: f64) -> bool {
    let n = m.nrows();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = m[(j, j)].re + shift;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = c(d);
        for i in (j + 1)..n {
            let mut s = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

/// Nuclear norm (sum of singular values).
pub fn nuclear_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                c(2.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                c(2.0),
            ],
        )
    }

    #[test]
    fn eigen_is_ascending() {
        let (values, vectors) = hermitian_eigen(&sample());
        assert!((values[0] - 1.0).abs() < 1e-12);
        assert!((values[1] - 3.0).abs() < 1e-12);
        let back = spectral_map(&values, &vectors, |l| l);
        assert!(max_abs(&(back - sample())) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let r = psd_sqrt(&sample());
        assert!(max_abs(&(&r * &r - sample())) < 1e-12);
    }

    #[test]
    fn cholesky_positivity_test() {
        let m = sample();
        assert!(is_positive_with_shift(&m, 0.0));
        let shifted = &m - CMatrix::identity(2, 2) * c(1.5);
        assert!(!is_positive_with_shift(&shifted, 0.0));
        assert!(is_positive_with_shift(&shifted, 0.6));
    }
}
