//! Dense solves and factorizations.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Relative pivot threshold below which a system is declared singular.
const SINGULAR_RTOL: f64 = 1e-12;
/// Absolute pivot floor for the Cholesky factorization.
const CHOLESKY_MIN_PIVOT: f64 = 1e-12;
/// Largest tolerated `|S - Sᵀ|` entry handed to [`cholesky`].
const SYMMETRY_TOL: f64 = 1e-10;

/// Solves `a·x = b` by LU factorization with partial pivoting.
///
/// `b` may hold several right-hand sides as columns. Fails with
/// [`Error::SingularMatrix`] when a pivot drops below `1e-12` times the
/// largest entry of `a`.
pub fn solve<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let k = a.rows();
    if !a.is_square() || b.rows() != k {
        return Err(Error::DimensionMismatch {
            expected: format!("square a and b with {k} rows"),
            found: format!("a {:?}, b {:?}", a.shape(), b.shape()),
        });
    }
    let scale = a.max_abs();
    let threshold = T::lit(SINGULAR_RTOL) * scale;
    if scale == T::zero() {
        return Err(Error::SingularMatrix { pivot: 0.0 });
    }

    let mut lu = a.clone();
    let mut x = b.clone();
    let nrhs = b.cols();

    for col in 0..k {
        let (piv_row, piv_val) = (col..k)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val < threshold || piv_val == T::zero() {
            return Err(Error::SingularMatrix {
                pivot: piv_val.as_f64(),
            });
        }
        if piv_row != col {
            for j in 0..k {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(piv_row, j)];
                lu[(piv_row, j)] = tmp;
            }
            for j in 0..nrhs {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(piv_row, j)];
                x[(piv_row, j)] = tmp;
            }
        }
        let p = lu[(col, col)];
        for r in col + 1..k {
            let f = lu[(r, col)] / p;
            if f == T::zero() {
                continue;
            }
            lu[(r, col)] = f;
            for j in col + 1..k {
                lu[(r, j)] = lu[(r, j)] - f * lu[(col, j)];
            }
            for j in 0..nrhs {
                x[(r, j)] = x[(r, j)] - f * x[(col, j)];
            }
        }
    }

    // back substitution
    for j in 0..nrhs {
        for i in (0..k).rev() {
            let mut s = x[(i, j)];
            for c in i + 1..k {
                s = s - lu[(i, c)] * x[(c, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    solve(a, &Matrix::identity(a.rows()))
}

/// Lower-triangular `L` with `L·Lᵀ = s`.
pub fn cholesky<T: Real>(s: &Matrix<T>) -> Result<Matrix<T>> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{:?}", s.shape()),
        });
    }
    if s.asymmetry() > T::lit(SYMMETRY_TOL) {
        return Err(Error::InvalidArgument(format!(
            "cholesky input is not symmetric (max |S - Sᵀ| = {:e})",
            s.asymmetry().as_f64()
        )));
    }
    let k = s.rows();
    let mut l = Matrix::zeros(k, k);
    for j in 0..k {
        let mut d = s[(j, j)];
        for c in 0..j {
            d = d - l[(j, c)] * l[(j, c)];
        }
        if !(d > T::lit(CHOLESKY_MIN_PIVOT)) {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d.as_f64(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..k {
            let mut v = s[(i, j)];
            for c in 0..j {
                v = v - l[(i, c)] * l[(j, c)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor,
/// symmetrized on return.
pub fn spd_inverse<T: Real>(s: &Matrix<T>) -> Result<Matrix<T>> {
    let l = cholesky(s)?;
    let k = s.rows();
    // L⁻¹ by forward substitution, then S⁻¹ = L⁻ᵀ L⁻¹
    let mut linv = Matrix::zeros(k, k);
    for col in 0..k {
        for i in col..k {
            let mut v = if i == col { T::one() } else { T::zero() };
            for c in col..i {
                v = v - l[(i, c)] * linv[(c, col)];
            }
            linv[(i, col)] = v / l[(i, i)];
        }
    }
    Ok((&linv.transpose() * &linv).symmetrized())
}

pub fn log_det_spd<T: Real>(s: &Matrix<T>) -> Result<T> {
    let l = cholesky(s)?;
    Ok(l.diag().into_iter().map(|d| d.ln()).sum::<T>() * T::lit(2.0))
}
