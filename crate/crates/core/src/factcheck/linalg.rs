//! Row-major dense kernels on flat slices.

use super::scalar::Real;

/// `out = a (n x k) * b (k x m)`.
pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * m);
    out.fill(T::zero());
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out = a (n x k) * b + bias`, with `bias` broadcast over rows.
pub fn affine<T: Real>(a: &[T], w: &[T], bias: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    matmul(a, w, n, k, m, out);
    for row in out.chunks_exact_mut(m) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o = *o + b;
        }
    }
}

/// `out += a^T (k x n) * b (n x m)` where `a` is `n x k`.
pub fn matmul_at_b_acc<T: Real>(a: &[T], b: &[T], n: usize, k: usize, m: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), n * m);
    debug_assert_eq!(out.len(), k * m);
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in out[p * m..(p + 1) * m].iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `out = a (n x m) * b^T` where `b` is `k x m`; `out` is `n x k`.
pub fn matmul_a_bt<T: Real>(a: &[T], b: &[T], n: usize, m: usize, k: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * k);
    for i in 0..n {
        let arow = &a[i * m..(i + 1) * m];
        for j in 0..k {
            let brow = &b[j * m..(j + 1) * m];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s = s + x * y;
            }
            out[i * k + j] = s;
        }
    }
}

/// Column sums of an `n x m` matrix added into `out`.
pub fn col_sum_acc<T: Real>(a: &[T], m: usize, out: &mut [T]) {
    for row in a.chunks_exact(m) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o = *o + x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut out = [0.0; 4];
        matmul(&a, &b, 2, 3, 2, &mut out);
        assert_eq!(out, [4.0, 5.0, 10.0, 11.0]);
        let mut atb = [0.0; 9];
        matmul_at_b_acc(&a, &a, 2, 3, 3, &mut atb);
        assert_eq!(atb, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        let mut abt = [0.0; 4];
        matmul_a_bt(&a, &a, 2, 3, 2, &mut abt);
        assert_eq!(abt, [14.0, 32.0, 32.0, 77.0]);
    }
}
