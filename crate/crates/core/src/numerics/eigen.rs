//! Eigenvalue moduli of small real matrices.
//!
//! Balancing, reduction to upper Hessenberg form by Gaussian elimination with
//! pivoting, then the Francis double-shift QR iteration on the Hessenberg
//! matrix. Complex conjugate pairs are resolved internally; only the moduli
//! leave this module.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Total QR sweeps allowed before giving up.
pub const MAX_SWEEPS: usize = 10_000;

/// Absolute values of all eigenvalues of `a`, sorted descending.
pub fn eigen_magnitudes<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{:?}", a.shape()),
        });
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let eig = hqr(&mut h)?;
    let mut mags: Vec<T> = eig.into_iter().map(|(re, im)| re.hypot(im)).collect();
    mags.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    Ok(mags)
}

/// Spectral radius `max |λ|`.
pub fn spectral_radius<T: Real>(a: &Matrix<T>) -> Result<T> {
    Ok(eigen_magnitudes(a)?.first().copied().unwrap_or_else(T::zero))
}

fn balance<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c = c + a[(j, i)].abs();
                    r = r + a[(i, j)].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f = f * radix;
                    c = c * sqrdx;
                }
                g = r * radix;
                while c > g {
                    f = f / radix;
                    c = c / sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] = a[(i, j)] * g;
                    }
                    for j in 0..n {
                        a[(j, i)] = a[(j, i)] * f;
                    }
                }
            }
        }
    }
}

fn hessenberg<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = T::zero();
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..n {
                let t = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != T::zero() {
            for i in m + 1..n {
                let mut y = a[(i, m - 1)];
                if y != T::zero() {
                    y = y / x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        a[(i, j)] = a[(i, j)] - y * a[(m, j)];
                    }
                    for j in 0..n {
                        a[(j, m)] = a[(j, m)] + y * a[(j, i)];
                    }
                }
            }
        }
    }
    // clear the elimination multipliers stored below the subdiagonal
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = T::zero();
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; returns `(re, im)` pairs.
fn hqr<T: Real>(a: &mut Matrix<T>) -> Result<Vec<(T, T)>> {
    let n = a.rows();
    let mut wr = vec![T::zero(); n];
    let mut wi = vec![T::zero(); n];
    let eps = T::epsilon();
    let two = T::lit(2.0);

    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = T::zero();
    let mut sweeps = 0usize;
    let (mut p, mut q, mut r): (T, T, T);
    while nn >= 0 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let lu = l as usize;
                let s = a[(lu - 1, lu - 1)].abs() + a[(lu, lu)].abs();
                let s = if s == T::zero() { anorm } else { s };
                if a[(lu, lu - 1)].abs() <= eps * s {
                    a[(lu, lu - 1)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            let x = a[(nu, nu)];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = T::zero();
                nn -= 1;
                break;
            }
            let y = a[(nu - 1, nu - 1)];
            let w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nn - 1 {
                p = (y - x) / two;
                q = p * p + w;
                let z = q.abs().sqrt();
                let xt = x + t;
                if q >= T::zero() {
                    let z = p + z.abs().copysign(p);
                    wr[nu - 1] = xt + z;
                    wr[nu] = if z != T::zero() { xt - w / z } else { xt + z };
                    wi[nu - 1] = T::zero();
                    wi[nu] = T::zero();
                } else {
                    wr[nu - 1] = xt + p;
                    wr[nu] = xt + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }

            sweeps += 1;
            if sweeps > MAX_SWEEPS || its == 60 {
                return Err(Error::NonConvergence { sweeps });
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t = t + x;
                for i in 0..=nu {
                    a[(i, i)] = a[(i, i)] - x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;

            let lu = l as usize;
            let mut m = nu - 2;
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == lu {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = T::zero();
                if i != m {
                    a[(i + 2, i - 1)] = T::zero();
                }
            }

            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = T::zero();
                    if k + 1 != nu {
                        r = a[(k + 2, k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != T::zero() {
                    if k == m {
                        if l as usize != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p = p + s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q = q / p;
                    r = r / p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp = pp + r * a[(k + 2, j)];
                            a[(k + 2, j)] = a[(k + 2, j)] - pp * z;
                        }
                        a[(k + 1, j)] = a[(k + 1, j)] - pp * y;
                        a[(k, j)] = a[(k, j)] - pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in lu..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp = pp + z * a[(i, k + 2)];
                            a[(i, k + 2)] = a[(i, k + 2)] - pp * r;
                        }
                        a[(i, k + 1)] = a[(i, k + 1)] - pp * q;
                        a[(i, k)] = a[(i, k)] - pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn zero_matrix_has_zero_eigenvalues() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_eq!(eigen_magnitudes(&z).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rotation_has_unit_pair() {
        let r = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(close(&eigen_magnitudes(&r).unwrap(), &[1.0, 1.0], 1e-12));
    }

    #[test]
    fn triangular_reads_off_diagonal() {
        let a = Matrix::from_rows(&[
            vec![0.5, 3.0, -1.0, 2.0],
            vec![0.0, -0.9, 4.0, 1.0],
            vec![0.0, 0.0, 0.2, 7.0],
            vec![0.0, 0.0, 0.0, -0.05],
        ])
        .unwrap();
        assert!(close(&eigen_magnitudes(&a).unwrap(), &[0.9, 0.5, 0.2, 0.05], 1e-12));
    }

    #[test]
    fn companion_of_known_polynomial() {
        // (x - 0.75)(x + 0.2)(x - 0.05) = x^3 - 0.6x^2 - 0.1225x + 0.0075
        let c = Matrix::from_rows(&[
            vec![0.6, 0.1225, -0.0075],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(close(&eigen_magnitudes(&c).unwrap(), &[0.75, 0.2, 0.05], 1e-12));
    }

    #[test]
    fn complex_pair_modulus() {
        // 0.5·rotation by 30° embedded with a real eigenvalue 0.3
        let (s, c) = (0.5f64 * 0.5, 0.5 * (3.0f64).sqrt() / 2.0);
        let a = Matrix::from_rows(&[vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.1, 0.2, 0.3]]).unwrap();
        assert!(close(&eigen_magnitudes(&a).unwrap(), &[0.5, 0.5, 0.3], 1e-12));
    }

    #[test]
    fn single_precision_instance() {
        let a = Matrix::<f32>::from_diag(&[0.25, -0.75]);
        let m = eigen_magnitudes(&a).unwrap();
        assert!((m[0] - 0.75).abs() < 1e-6 && (m[1] - 0.25).abs() < 1e-6);
    }
}
