//! Shared complex-matrix kernels: Hermitian eigenvalues, determinants,
//! small-matrix eigendecomposition, and a matrix exponential fallback.
//!
//! nalgebra provides Hermitian eigendecomposition and LU determinants for
//! `Complex<f64>` matrices but no general (non-Hermitian) complex
//! eigensolver, so the small dense eigendecomposition needed for the
//! Liouvillian propagator is implemented here: characteristic polynomial by
//! the Faddeev–LeVerrier recursion, roots by Durand–Kerner iteration, and
//! eigenvectors from pivoted null spaces, verified by residual. A
//! scaling-and-squaring Padé matrix exponential serves as the fallback for
//! matrices that fail the diagonalizability verification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Largest elementwise absolute value (zero for empty matrices).
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest elementwise deviation from Hermitian symmetry, `max |m - m†|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Hermitian average `(m + m†)/2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian
/// matrix. The input is symmetrized defensively; callers pass Hermitian data.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(m);
    values.first().copied().unwrap_or(0.0)
}

/// Determinant of a square complex matrix (nalgebra closed form / LU).
pub fn determinant(m: &CMatrix) -> C64 {
    m.clone().determinant()
}

/// Monic characteristic polynomial coefficients `c[0] + c[1] x + ... + x^n`
/// by the Faddeev–LeVerrier recursion (`c[n] = 1`).
fn characteristic_polynomial(a: &CMatrix) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let mut m = CMatrix::identity(n, n);
    for k in 1..=n {
        m = a * m;
        let c = -m.trace() / C64::new(k as f64, 0.0);
        coeffs[n - k] = c;
        for i in 0..n {
            m[(i, i)] += c;
        }
    }
    coeffs
}

fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
fn durand_kerner(coeffs: &[C64]) -> Result<Vec<C64>, Error> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Cauchy bound on root magnitude for a monic polynomial.
    let radius = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..n)
        .map(|j| seed.powu(j as u32 + 1) * radius)
        .collect();
    let tol = 1e-14 * radius.max(1.0);
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for j in 0..n {
            let mut denom = C64::new(1.0, 0.0);
            for l in 0..n {
                if l != j {
                    denom *= roots[j] - roots[l];
                }
            }
            if denom.norm() == 0.0 {
                // Coincident iterates: nudge deterministically and continue.
                roots[j] += C64::new(tol.max(1e-12), 0.0);
                max_step = f64::MAX;
                continue;
            }
            let step = poly_eval(coeffs, roots[j]) / denom;
            roots[j] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= tol {
            return Ok(roots);
        }
    }
    Err(Error::Numerical(
        "polynomial root iteration did not converge".into(),
    ))
}

/// Group near-coincident roots and replace each group by its centroid.
///
/// Durand–Kerner iterates stall at a loose cluster around a multiple root;
/// the centroid is then polished by multiplicity-aware Newton steps
/// (`x -= m p(x)/p'(x)`), which converge quadratically even at multiple
/// roots. Returns `(value, multiplicity)` pairs.
fn cluster_roots(mut roots: Vec<C64>, coeffs: &[C64], scale: f64) -> Vec<(C64, usize)> {
    let tol = 1e-6 * scale.max(1.0);
    let derivative: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, &c)| c * C64::new(j as f64, 0.0))
        .collect();
    let mut groups: Vec<(C64, usize)> = Vec::new();
    while let Some(first) = roots.first().copied() {
        let (near, far): (Vec<C64>, Vec<C64>) =
            roots.iter().partition(|r| (*r - first).norm() <= tol);
        let count = near.len();
        let mut root = near.into_iter().sum::<C64>() / C64::new(count as f64, 0.0);
        for _ in 0..40 {
            let slope = poly_eval(&derivative, root);
            if slope.norm() == 0.0 {
                break;
            }
            let step = poly_eval(coeffs, root) / slope * C64::new(count as f64, 0.0);
            root -= step;
            if step.norm() <= 1e-16 * root.norm().max(1.0) {
                break;
            }
        }
        groups.push((root, count));
        roots = far;
    }
    groups
}

/// Null-space basis of a square matrix by Gaussian elimination with complete
/// pivoting; pivots below `tol` are treated as zero.
fn null_space(a: &CMatrix, tol: f64) -> Vec<CVector> {
    let n = a.nrows();
    let mut u = a.clone();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut rank = n;
    for k in 0..n {
        // Complete pivoting: largest remaining entry.
        let mut best = (k, k, 0.0_f64);
        for i in k..n {
            for j in k..n {
                let mag = u[(i, j)].norm();
                if mag > best.2 {
                    best = (i, j, mag);
                }
            }
        }
        if best.2 <= tol {
            rank = k;
            break;
        }
        u.swap_rows(k, best.0);
        u.swap_columns(k, best.1);
        col_perm.swap(k, best.1);
        for i in k + 1..n {
            let factor = u[(i, k)] / u[(k, k)];
            for j in k..n {
                let sub = factor * u[(k, j)];
                u[(i, j)] -= sub;
            }
        }
    }
    let mut basis = Vec::new();
    for free in rank..n {
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[free] = C64::new(1.0, 0.0);
        for k in (0..rank).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in k + 1..n {
                acc += u[(k, j)] * x[j];
            }
            x[k] = -acc / u[(k, k)];
        }
        let mut v = CVector::zeros(n);
        for (pos, &orig) in col_perm.iter().enumerate() {
            v[orig] = x[pos];
        }
        let norm = v.norm();
        if norm > 0.0 {
            v /= C64::new(norm, 0.0);
        }
        basis.push(v);
    }
    basis
}

/// Eigendecomposition `a = V diag(values) V^{-1}` of a small complex matrix.
#[derive(Clone, Debug)]
pub struct Eigendecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse_vectors: CMatrix,
}

/// Decompose a small general complex matrix, verifying the reconstruction
/// residual. Fails (for the caller to fall back on [`expm`]) when the matrix
/// is defective or the eigenvector basis is too ill-conditioned to trust.
pub fn eigendecompose(a: &CMatrix) -> Result<Eigendecomposition, Error> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidArgument(
            "eigendecomposition needs a nonempty square matrix".into(),
        ));
    }
    let scale = max_abs(a).max(1.0);
    let coeffs = characteristic_polynomial(a);
    let roots = durand_kerner(&coeffs)?;
    let clusters = cluster_roots(roots, &coeffs, scale);

    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<CVector> = Vec::with_capacity(n);
    for (lambda, multiplicity) in clusters {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= lambda;
        }
        let vectors = null_space(&shifted, 1e-7 * scale);
        if vectors.len() != multiplicity {
            return Err(Error::Numerical(format!(
                "eigenvalue {lambda} has numerical multiplicity {multiplicity} \
                 but a null space of dimension {}; matrix treated as defective",
                vectors.len()
            )));
        }
        for v in vectors {
            // The polynomial root saturates at the Horner noise floor for
            // multiple roots; the Rayleigh quotient of the computed
            // eigenvector often does better. Keep whichever value leaves the
            // smaller residual.
            let av = a * &v;
            let rayleigh = v.dotc(&av);
            let refined = if (&av - &v * rayleigh).norm() < (&av - &v * lambda).norm() {
                rayleigh
            } else {
                lambda
            };
            values.push(refined);
            columns.push(v);
        }
    }
    let vectors = CMatrix::from_columns(&columns);
    let inverse_vectors = vectors.clone().try_inverse().ok_or_else(|| {
        Error::Numerical("eigenvector basis is numerically singular".into())
    })?;

    // Residual verification: reject silently-inaccurate decompositions.
    let mut recomposed = vectors.clone();
    for (j, lambda) in values.iter().enumerate() {
        for i in 0..n {
            recomposed[(i, j)] *= lambda;
        }
    }
    let residual = max_abs(&(a * &vectors - recomposed));
    let basis_residual = max_abs(&(&vectors * &inverse_vectors - CMatrix::identity(n, n)));
    if residual > 1e-8 * scale || basis_residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "eigendecomposition residual too large ({residual:.3e} vs scale {scale:.3e})"
        )));
    }
    Ok(Eigendecomposition {
        values,
        vectors,
        inverse_vectors,
    })
}

/// Matrix exponential by scaling-and-squaring with a degree-13 Padé
/// approximant (Higham's coefficients); exact-arithmetic fallback path for
/// generators that resist diagonalization.
pub fn expm(a: &CMatrix) -> Result<CMatrix, Error> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA_13: f64 = 5.371920351148152;

    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidArgument(
            "matrix exponential needs a nonempty square matrix".into(),
        ));
    }
    // 1-norm (max column absolute sum) drives the scaling power.
    let one_norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if one_norm > THETA_13 {
        (one_norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / C64::new(2f64.powi(s as i32), 0.0);

    let ident = CMatrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = |i: usize| C64::new(B[i], 0.0);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &ident * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &ident * b(0);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Padé denominator is singular".into()))?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}
