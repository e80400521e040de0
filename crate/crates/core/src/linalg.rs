//! Small dense complex linear-algebra helpers shared by the method modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Kronecker product `a ⊗ b` with row-major block layout.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Forward-backward propagator `u ⊗ u*`, acting as `ρ ↦ u ρ u†` on `vec(ρ)`.
pub fn conj_kron(u: &CMatrix) -> CMatrix {
    kron(u, &u.map(|z| z.conj()))
}

/// Row-major flattening: `v[i * d + j] = m[(i, j)]`.
pub fn vectorize(m: &CMatrix) -> CVector {
    let (r, c) = m.shape();
    CVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

pub fn unvectorize(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| v[i * dim + j])
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Each eigenvector is rotated so that its largest-magnitude component (the
/// first one, on ties) is real and positive.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let peak = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let pivot = v
            .iter()
            .position(|z| z.norm() >= peak * (1.0 - 1e-10))
            .unwrap_or(0);
        let phase = v[pivot].conj() / v[pivot].norm();
        for row in 0..n {
            vectors[(row, col)] = v[row] * phase;
        }
    }
    (values, vectors)
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn unitary_propagator(h: &CMatrix, t: f64) -> CMatrix {
    if h.nrows() == 2 {
        return unitary_2x2(h, t);
    }
    let (vals, vecs) = hermitian_eigen(h);
    let mut scaled = vecs.clone();
    for (j, &e) in vals.iter().enumerate() {
        let ph = (-I * e * t).exp();
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= ph;
        }
    }
    scaled * vecs.adjoint()
}

// H = a·1 + b·σ, exp(-iHt) = e^{-iat}(cos(|b|t) − i sin(|b|t) b̂·σ)
fn unitary_2x2(h: &CMatrix, t: f64) -> CMatrix {
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let bx = h[(0, 1)].re;
    let by = -h[(0, 1)].im;
    let nb = (bx * bx + by * by + bz * bz).sqrt();
    let (cs, sn_over) = if nb > 0.0 {
        ((nb * t).cos(), (nb * t).sin() / nb)
    } else {
        (1.0, t)
    };
    let g = (-I * a * t).exp();
    let m00 = c(cs, -sn_over * bz);
    let m11 = c(cs, sn_over * bz);
    // -i sn (bx σx + by σy): off-diagonals -i sn (bx - i by) and -i sn (bx + i by)
    let m01 = -I * sn_over * c(bx, -by);
    let m10 = -I * sn_over * c(bx, by);
    CMatrix::from_row_slice(2, 2, &[g * m00, g * m01, g * m10, g * m11])
}

/// General matrix exponential `exp(m)`.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// `a · b` for row-major `n × n` slices, written into `out`.
#[inline]
pub(crate) fn matmul_into(n: usize, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        row.fill(ZERO);
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == ZERO {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (o, &bkj) in row.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

pub(crate) fn to_row_major(m: &CMatrix) -> Vec<Complex64> {
    let n = m.ncols();
    (0..m.nrows() * n).map(|k| m[(k / n, k % n)]).collect()
}

pub(crate) fn from_row_major(n: usize, data: &[Complex64]) -> CMatrix {
    CMatrix::from_row_slice(n, n, data)
}
