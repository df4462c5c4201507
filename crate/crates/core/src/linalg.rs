//! Small dense complex linear algebra used by the solver.
//!
//! nalgebra supplies Hessenberg reduction, SVD and LU; the shifted QR
//! iteration for the spectrum of a general complex matrix lives here.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, SMatrix};

use crate::C64;

/// Spectral (2-norm) condition number `σ_max / σ_min`.
///
/// Returns `f64::INFINITY` for an exactly singular matrix.
pub fn condition_number<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    condition_number_dyn(&DMatrix::from_iterator(N, N, m.iter().cloned()))
}

/// Condition number of a dynamically sized matrix.
pub fn condition_number_dyn(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a 3×3 complex matrix together with its condition number.
pub fn invert3(m: &Matrix3<C64>) -> Option<(Matrix3<C64>, f64)> {
    let cond = condition_number(m);
    if !cond.is_finite() {
        return None;
    }
    m.try_inverse().map(|inv| (inv, cond))
}

/// Largest entry magnitude.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solves `A x = b` by partial-pivoting LU.
pub fn lu_solve(a: DMatrix<C64>, b: &DVector<C64>) -> Option<DVector<C64>> {
    a.lu().solve(b)
}

/// Eigenvalues of a general complex 4×4 matrix.
///
/// Hessenberg reduction followed by single-shift QR with Wilkinson shifts and
/// exceptional shifts every ten stalled iterations. Returns `None` if some
/// eigenvalue fails to converge within 60 sweeps.
pub fn eigenvalues4(m: &Matrix4<C64>) -> Option<[C64; 4]> {
    const N: usize = 4;
    let hess = m.hessenberg();
    let hm = hess.h();
    let mut h = [[C64::new(0.0, 0.0); N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = hm[(i, j)];
        }
    }
    let mut eig = [C64::new(0.0, 0.0); N];
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(eig);
    }

    let mut hi = N - 1;
    let mut iter = 0usize;
    loop {
        if hi == 0 {
            eig[0] = h[0][0];
            break;
        }
        // locate the start of the active unreduced block
        let mut lo = hi;
        while lo > 0 {
            let off = h[lo][lo - 1].norm();
            let diag = h[lo][lo].norm() + h[lo - 1][lo - 1].norm();
            let reference = if diag == 0.0 { scale } else { diag };
            if off <= f64::EPSILON * reference {
                h[lo][lo - 1] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[hi][hi];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > 60 {
            return None;
        }

        let shift = if iter.is_multiple_of(10) {
            // exceptional shift
            h[hi][hi] + C64::new(h[hi][hi - 1].norm() * 0.75, 0.0)
        } else {
            let a = h[hi - 1][hi - 1];
            let b = h[hi - 1][hi];
            let c = h[hi][hi - 1];
            let d = h[hi][hi];
            let half_tr = (a + d) * 0.5;
            let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
            let mu1 = half_tr + disc;
            let mu2 = half_tr - disc;
            if (mu1 - d).norm() <= (mu2 - d).norm() {
                mu1
            } else {
                mu2
            }
        };

        for (i, row) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
            row[i] -= shift;
        }
        let mut rots = [(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); N];
        for k in lo..hi {
            let x = h[k][k];
            let y = h[k + 1][k];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            } else {
                (x / r, y / r)
            };
            rots[k] = (c, s);
            let (top, bottom) = h.split_at_mut(k + 1);
            for (u, v) in top[k][k..=hi].iter_mut().zip(bottom[0][k..=hi].iter_mut()) {
                let (a, b) = (*u, *v);
                *u = c.conj() * a + s.conj() * b;
                *v = -s * a + c * b;
            }
        }
        for k in lo..hi {
            let (c, s) = rots[k];
            let last = (k + 2).min(hi);
            for row in h.iter_mut().take(last + 1).skip(lo) {
                let a = row[k];
                let b = row[k + 1];
                row[k] = a * c + b * s;
                row[k + 1] = -a * s.conj() + b * c.conj();
            }
        }
        for (i, row) in h.iter_mut().enumerate().take(hi + 1).skip(lo) {
            row[i] += shift;
        }
    }
    if eig.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(eig)
    } else {
        None
    }
}
