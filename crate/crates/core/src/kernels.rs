//! Dense row-major kernels used by the recurrent network.
//!
//! Reductions keep four independent accumulators so the compiler can
//! vectorize them; results therefore differ from a strict left-to-right
//! sum by rounding only.

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y[i] += a * x[i]`
#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out += M x` for an `out.len() x x.len()` matrix.
#[inline]
pub fn matvec_add<T: Scalar>(m: &[T], x: &[T], out: &mut [T]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += Mᵀ d` for a `d.len() x out.len()` matrix.
#[inline]
pub fn matvec_t_add<T: Scalar>(m: &[T], d: &[T], out: &mut [T]) {
    let cols = out.len();
    debug_assert_eq!(m.len(), d.len() * cols);
    for (&di, row) in d.iter().zip(m.chunks_exact(cols)) {
        if di != T::zero() {
            axpy(di, row, out);
        }
    }
}

/// `G += d xᵀ` for a `d.len() x x.len()` matrix.
#[inline]
pub fn outer_add<T: Scalar>(d: &[T], x: &[T], g: &mut [T]) {
    let cols = x.len();
    debug_assert_eq!(g.len(), d.len() * cols);
    for (&di, row) in d.iter().zip(g.chunks_exact_mut(cols)) {
        if di != T::zero() {
            axpy(di, x, row);
        }
    }
}
