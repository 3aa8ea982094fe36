//! Row-major dense kernels.
//!
//! Parallelism is over output rows only: each row is produced by exactly
//! one task from a fixed traversal order, so results are bitwise
//! identical regardless of thread count. A process-wide switch forces
//! fully serial execution.

use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};

static SINGLE_THREADED: AtomicBool = AtomicBool::new(false);

/// Force all kernels onto the calling thread (results are unchanged).
pub fn set_single_threaded(v: bool) {
    SINGLE_THREADED.store(v, Ordering::SeqCst);
}

pub fn single_threaded() -> bool {
    SINGLE_THREADED.load(Ordering::SeqCst)
}

const PAR_THRESHOLD: usize = 1 << 16;

fn run_rows<F: Fn(usize, &mut [f64]) + Sync>(c: &mut [f64], n: usize, flops: usize, f: F) {
    if n == 0 {
        return;
    }
    if single_threaded() || flops < PAR_THRESHOLD {
        for (row, chunk) in c.chunks_mut(n).enumerate() {
            f(row, chunk);
        }
    } else {
        c.par_chunks_mut(n)
            .enumerate()
            .for_each(|(row, chunk)| f(row, chunk));
    }
}

/// C[m,n] = A[m,k] B[k,n]
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0f64; m * n];
    run_rows(&mut c, n, m * k * n, |row, c_row| {
        let a_row = &a[row * k..(row + 1) * k];
        for (a_val, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
            let a_val = *a_val;
            for (c_val, b_val) in c_row.iter_mut().zip(b_row) {
                *c_val += a_val * b_val;
            }
        }
    });
    c
}

/// C[m,k] = A[m,n] B^T where B is [k,n]
pub fn matmul_bt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![0.0f64; m * k];
    run_rows(&mut c, k, m * k * n, |row, c_row| {
        let a_row = &a[row * n..(row + 1) * n];
        for (c_val, b_row) in c_row.iter_mut().zip(b.chunks_exact(n)) {
            let mut acc = 0.0;
            for (a_val, b_val) in a_row.iter().zip(b_row) {
                acc += a_val * b_val;
            }
            *c_val = acc;
        }
    });
    c
}

/// C[k,n] = A^T G where A is [m,k], G is [m,n]
pub fn matmul_at(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(g.len(), m * n);
    let mut c = vec![0.0f64; k * n];
    run_rows(&mut c, n, m * k * n, |row, c_row| {
        for (a_row, g_row) in a.chunks_exact(k).zip(g.chunks_exact(n)) {
            let a_val = a_row[row];
            if a_val != 0.0 {
                for (c_val, g_val) in c_row.iter_mut().zip(g_row) {
                    *c_val += a_val * g_val;
                }
            }
        }
    });
    c
}
