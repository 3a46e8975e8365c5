//! Matrix-multiply kernels backing the dense and convolution layers.
//!
//! Each output element is a sequential dot product over the shared dimension,
//! so splitting output rows across threads cannot change any reduction order:
//! the parallel and sequential paths produce bitwise-identical results. The
//! `*_seq` twins always run single-threaded and exist for the benches and for
//! tests pinning that equivalence.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

/// Below this many multiply-adds the rayon dispatch overhead dominates
/// (measured crossover on a 2-core container sits near 128^3 multiply-adds;
/// wider machines only move the crossover down).
#[cfg(feature = "parallel")]
const PAR_MIN_FLOPS: usize = 1 << 21;

/// Run `fill_row(i, row)` for every row of `out`, in parallel when worthwhile.
pub(crate) fn for_each_row<E: Float>(
    out: &mut [E],
    cols: usize,
    flops_per_row: usize,
    fill_row: impl Fn(usize, &mut [E]) + Sync + Send,
) {
    #[cfg(feature = "parallel")]
    {
        let rows = out.len() / cols.max(1);
        if rows * flops_per_row >= PAR_MIN_FLOPS && rows > 1 {
            out.par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| fill_row(i, row));
            return;
        }
    }
    let _ = flops_per_row;
    for (i, row) in out.chunks_mut(cols).enumerate() {
        fill_row(i, row);
    }
}

fn dims2<E: Float>(t: &Tensor<E>, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::shape(
            op,
            format!("expected rank-2 tensor, got {s:?}"),
        )),
    }
}

/// `a[m,k] x b[k,n] -> [m,n]`.
pub fn matmul<E: Float>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (m, k) = dims2(a, "matmul")?;
    let (kb, n) = dims2(b, "matmul")?;
    if k != kb {
        return Err(Error::shape(
            "matmul",
            format!("inner dimensions differ: {:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    let (ad, bd) = (a.data(), b.data());
    for_each_row(out.data_mut(), n, k * n, |i, row| {
        mm_row(ad, bd, i, k, n, row);
    });
    Ok(out)
}

/// Single-threaded `matmul`; bitwise identical to the parallel path.
pub fn matmul_seq<E: Float>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (m, k) = dims2(a, "matmul")?;
    let (kb, n) = dims2(b, "matmul")?;
    if k != kb {
        return Err(Error::shape(
            "matmul",
            format!("inner dimensions differ: {:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    let (ad, bd) = (a.data(), b.data());
    for (i, row) in out.data_mut().chunks_mut(n).enumerate() {
        mm_row(ad, bd, i, k, n, row);
    }
    Ok(out)
}

#[inline]
fn mm_row<E: Float>(a: &[E], b: &[E], i: usize, k: usize, n: usize, row: &mut [E]) {
    let a_row = &a[i * k..(i + 1) * k];
    for (t, &av) in a_row.iter().enumerate() {
        let b_row = &b[t * n..(t + 1) * n];
        for (o, &bv) in row.iter_mut().zip(b_row) {
            *o += av * bv;
        }
    }
}

/// `a^T x b` where `a` is stored as `[k,m]`: result `[m,n]`.
pub fn matmul_tn<E: Float>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (k, m) = dims2(a, "matmul_tn")?;
    let (kb, n) = dims2(b, "matmul_tn")?;
    if k != kb {
        return Err(Error::shape(
            "matmul_tn",
            format!(
                "inner dimensions differ: {:?}^T x {:?}",
                a.shape(),
                b.shape()
            ),
        ));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    let (ad, bd) = (a.data(), b.data());
    for_each_row(out.data_mut(), n, k * n, |i, row| {
        for t in 0..k {
            let av = ad[t * m + i];
            let b_row = &bd[t * n..(t + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    Ok(out)
}

/// `a x b^T` where `b` is stored as `[n,k]`: result `[m,n]`.
pub fn matmul_nt<E: Float>(a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
    let (m, k) = dims2(a, "matmul_nt")?;
    let (n, kb) = dims2(b, "matmul_nt")?;
    if k != kb {
        return Err(Error::shape(
            "matmul_nt",
            format!(
                "inner dimensions differ: {:?} x {:?}^T",
                a.shape(),
                b.shape()
            ),
        ));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    let (ad, bd) = (a.data(), b.data());
    for_each_row(out.data_mut(), n, k * n, |i, row| {
        let a_row = &ad[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let b_row = &bd[j * k..(j + 1) * k];
            let mut acc = E::ZERO;
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o = acc;
        }
    });
    Ok(out)
}
