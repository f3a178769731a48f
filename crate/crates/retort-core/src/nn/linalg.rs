//! Symmetric eigendecomposition (cyclic Jacobi) and the PSD matrix square
//! root the Fréchet metric needs.

use crate::prelude::*;

use super::tensor::{mm_nn, Tensor};
use super::{shape_err, NnError};
use crate::fmath;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), both in a deterministic
/// order (ascending eigenvalue).
pub fn jacobi_eigh(m: &Tensor) -> Result<(Vec<f64>, Tensor), NnError> {
    if m.rank() != 2 || m.rows() != m.cols() {
        return Err(shape_err("jacobi_eigh", format!("{:?}", m.shape())));
    }
    let d = m.rows();
    let mut a = m.clone();
    let mut v = Tensor::zeros(&[d, d]);
    for i in 0..d {
        v.set2(i, i, 1.0);
    }
    let norm: f64 = m.data().iter().map(|x| x * x).sum::<f64>();
    let tol = 1e-30 * norm.max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a.at2(p, q) * a.at2(p, q);
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.at2(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.at2(p, p);
                let aqq = a.at2(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + fmath::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + fmath::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = t * c;
                // rotate rows/columns p and q
                for k in 0..d {
                    let akp = a.at2(k, p);
                    let akq = a.at2(k, q);
                    a.set2(k, p, c * akp - s * akq);
                    a.set2(k, q, s * akp + c * akq);
                }
                for k in 0..d {
                    let apk = a.at2(p, k);
                    let aqk = a.at2(q, k);
                    a.set2(p, k, c * apk - s * aqk);
                    a.set2(q, k, s * apk + c * aqk);
                }
                for k in 0..d {
                    let vkp = v.at2(k, p);
                    let vkq = v.at2(k, q);
                    v.set2(k, p, c * vkp - s * vkq);
                    v.set2(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..d).map(|i| (a.at2(i, i), i)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = pairs.iter().map(|&(l, _)| l).collect();
    let mut vectors = Tensor::zeros(&[d, d]);
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for k in 0..d {
            vectors.set2(k, new_col, v.at2(k, old_col));
        }
    }
    Ok((eigenvalues, vectors))
}

/// Square root of a symmetric PSD matrix: eigenvalues clamped at zero, then
/// `S = V sqrt(L) V^T`. Rejects matrices whose asymmetry exceeds 1e-6
/// (relative to the largest entry); smaller asymmetry is symmetrized away.
pub fn psd_matrix_sqrt(m: &Tensor) -> Result<Tensor, NnError> {
    if m.rank() != 2 || m.rows() != m.cols() {
        return Err(shape_err("psd_matrix_sqrt", format!("{:?}", m.shape())));
    }
    let d = m.rows();
    let scale = m
        .data()
        .iter()
        .fold(1.0f64, |acc, &x| acc.max(fmath::abs(x)));
    for i in 0..d {
        for j in (i + 1)..d {
            if fmath::abs(m.at2(i, j) - m.at2(j, i)) > 1e-6 * scale {
                return Err(NnError::NotSymmetric);
            }
        }
    }
    let mut sym = Tensor::zeros(&[d, d]);
    for i in 0..d {
        for j in 0..d {
            sym.set2(i, j, 0.5 * (m.at2(i, j) + m.at2(j, i)));
        }
    }
    let (eigenvalues, v) = jacobi_eigh(&sym)?;
    // S = V diag(sqrt(max(l, 0))) V^T
    let mut scaled = v.clone();
    for (col, &l) in eigenvalues.iter().enumerate() {
        let root = fmath::sqrt(l.max(0.0));
        for k in 0..d {
            let val = scaled.at2(k, col) * root;
            scaled.set2(k, col, val);
        }
    }
    Ok(mm_nn(&scaled, &v.transposed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn frob(m: &Tensor) -> f64 {
        fmath::sqrt(m.data().iter().map(|x| x * x).sum())
    }

    #[test]
    fn identity_and_diagonal() {
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let s = psd_matrix_sqrt(&eye).unwrap();
        assert!(frob(&sub(&s, &eye)) < 1e-12);

        let diag = Tensor::matrix(2, 2, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
        let s = psd_matrix_sqrt(&diag).unwrap();
        let expect = Tensor::matrix(2, 2, vec![2.0, 0.0, 0.0, 3.0]).unwrap();
        assert!(frob(&sub(&s, &expect)) < 1e-12);
    }

    fn sub(a: &Tensor, b: &Tensor) -> Tensor {
        let mut out = a.clone();
        for (x, y) in out.data_mut().iter_mut().zip(b.data()) {
            *x -= y;
        }
        out
    }

    #[test]
    fn random_gram_matrix_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for d in [1, 3, 6, 10] {
            let a = Tensor::matrix(
                d,
                d,
                (0..d * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
            )
            .unwrap();
            let m = mm_nn(&a.transposed(), &a);
            let s = psd_matrix_sqrt(&m).unwrap();
            let back = mm_nn(&s, &s);
            assert!(
                frob(&sub(&back, &m)) <= 1e-8 * frob(&m).max(1e-12),
                "d = {d}"
            );
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Tensor::matrix(2, 2, vec![1.0, 0.5, -0.5, 1.0]).unwrap();
        assert!(matches!(psd_matrix_sqrt(&m), Err(NnError::NotSymmetric)));
    }
}
