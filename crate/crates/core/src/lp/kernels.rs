//! Dense vector kernels for the simplex inner loops. On x86-64 the bodies
//! are compiled a second time with AVX2/FMA enabled and picked at runtime.

#[inline(always)]
fn dot_body(a: &[f64], b: &[f64]) -> f64 {
    // Independent accumulators so the reduction vectorizes.
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = x[k].mul_add(y[k], acc[k]);
        }
    }
    let mut total = tail;
    for v in acc {
        total += v;
    }
    total
}

#[inline(always)]
fn axpy_body(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = s.mul_add(*xi, *yi);
    }
}

#[cfg(target_arch = "x86_64")]
mod fast {
    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        super::dot_body(a, b)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
        super::axpy_body(y, s, x)
    }

    pub(super) fn available() -> bool {
        use std::sync::OnceLock;
        static AVAILABLE: OnceLock<bool> = OnceLock::new();
        *AVAILABLE.get_or_init(|| {
            std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        })
    }
}

/// `a · b` over the common length.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    #[cfg(target_arch = "x86_64")]
    if fast::available() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { fast::dot(a, b) };
    }
    dot_body(a, b)
}

/// `y += s * x` over the common length.
pub(crate) fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    let len = y.len().min(x.len());
    let (y, x) = (&mut y[..len], &x[..len]);
    #[cfg(target_arch = "x86_64")]
    if fast::available() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { fast::axpy(y, s, x) };
    }
    axpy_body(y, s, x)
}

/// Inverse of the column-major `m x m` matrix `a` by Gauss-Jordan elimination
/// with column operations and partial pivoting along each row. Returns `None`
/// if a pivot falls below `tol` times the largest entry of its row.
pub(crate) fn invert(a: &mut [f64], m: usize, tol: f64) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), m * m);
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    // Column operations: a * E = I, so the accumulated E is the inverse.
    // `perm[p]` is the column pivoted for row p.
    let mut perm: Vec<usize> = (0..m).collect();
    for p in 0..m {
        let (mut best, mut best_abs, mut row_max) = (p, 0.0f64, 0.0f64);
        for (c, &col) in perm.iter().enumerate().skip(p) {
            let v = a[col * m + p].abs();
            row_max = row_max.max(v);
            if v > best_abs {
                best_abs = v;
                best = c;
            }
        }
        for &col in &perm[..p] {
            row_max = row_max.max(a[col * m + p].abs());
        }
        if best_abs == 0.0 || best_abs <= tol * row_max {
            return None;
        }
        perm.swap(p, best);
        let pc = perm[p];
        let scale = 1.0 / a[pc * m + p];
        a[pc * m..(pc + 1) * m].iter_mut().for_each(|v| *v *= scale);
        inv[pc * m..(pc + 1) * m].iter_mut().for_each(|v| *v *= scale);
        for c in 0..m {
            if c == pc {
                continue;
            }
            let f = a[c * m + p];
            if f == 0.0 {
                continue;
            }
            // Split borrows of the pivot column and column c.
            let (pivot_a, col_a) = two_columns(a, m, pc, c);
            axpy(col_a, -f, pivot_a);
            let (pivot_e, col_e) = two_columns(&mut inv, m, pc, c);
            axpy(col_e, -f, pivot_e);
        }
    }
    // Column perm[p] of a * E is now e_p, i.e. a * E = Q with Q e_{perm[p]} = e_p.
    // Then a^-1 = E Q^-1 and column p of it is column perm[p] of E.
    let mut out = vec![0.0; m * m];
    for (p, &col) in perm.iter().enumerate() {
        out[p * m..(p + 1) * m].copy_from_slice(&inv[col * m..(col + 1) * m]);
    }
    Some(out)
}

/// Mutable views of two distinct columns of a column-major matrix.
fn two_columns(data: &mut [f64], m: usize, first: usize, second: usize) -> (&[f64], &mut [f64]) {
    debug_assert_ne!(first, second);
    if first < second {
        let (lo, hi) = data.split_at_mut(second * m);
        (&lo[first * m..(first + 1) * m], &mut hi[..m])
    } else {
        let (lo, hi) = data.split_at_mut(first * m);
        (&hi[..m], &mut lo[second * m..(second + 1) * m])
    }
}
