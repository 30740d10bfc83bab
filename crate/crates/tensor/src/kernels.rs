//! Raw numeric kernels shared by the tape ops and plain tensor methods.

use rayon::prelude::*;

use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::tensor::{numel_of, Tensor};

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Numpy-style right-aligned broadcast of two shapes.
pub(crate) fn broadcast_shapes(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside `out` (zero on broadcast axes).
fn aligned_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let own = strides(shape);
    let lead = out.len() - shape.len();
    (0..out.len())
        .map(|i| {
            if i < lead || shape[i - lead] == 1 {
                0
            } else {
                own[i - lead]
            }
        })
        .collect()
}

/// Calls `f(out_offset, a_offset, b_offset)` for every element of `out`.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let rank = out.len();
    let total = numel_of(out);
    let mut idx = vec![0usize; rank];
    let (mut oa, mut ob) = (0usize, 0usize);
    for o in 0..total {
        f(o, oa, ob);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            oa += sa[ax];
            ob += sb[ax];
            if idx[ax] < out[ax] {
                break;
            }
            oa -= sa[ax] * out[ax];
            ob -= sb[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}

pub(crate) fn broadcast_binary<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
    op: &'static str,
) -> Result<Tensor<T>> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Tensor::new(a.shape(), data);
    }
    let out = broadcast_shapes(a.shape(), b.shape())
        .ok_or_else(|| TensorError::shape(op, a.shape(), b.shape()))?;
    // common case: b repeats along the leading axes of a
    if out == a.shape() && a.shape().ends_with(strip_ones(b.shape())) {
        let inner = b.numel();
        let bd = b.data();
        let data = a
            .data()
            .chunks(inner)
            .flat_map(|row| row.iter().zip(bd).map(|(&x, &y)| f(x, y)))
            .collect();
        return Tensor::new(out, data);
    }
    let sa = aligned_strides(a.shape(), &out);
    let sb = aligned_strides(b.shape(), &out);
    let (ad, bd) = (a.data(), b.data());
    let mut data = vec![T::zero(); numel_of(&out)];
    for_each_broadcast(&out, &sa, &sb, |o, ia, ib| data[o] = f(ad[ia], bd[ib]));
    Tensor::new(out, data)
}

fn strip_ones(shape: &[usize]) -> &[usize] {
    let first = shape.iter().position(|&d| d != 1).unwrap_or(shape.len());
    &shape[first..]
}

/// Sums `g` over the axes along which `shape` was broadcast to produce it.
pub(crate) fn reduce_to_shape<T: Element>(g: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if g.shape() == shape {
        return Ok(g.clone());
    }
    match broadcast_shapes(shape, g.shape()) {
        Some(ref s) if s == g.shape() => {}
        _ => return Err(TensorError::shape("reduce_to_shape", g.shape(), shape)),
    }
    let mut out = vec![T::zero(); numel_of(shape)];
    if g.shape().ends_with(strip_ones(shape)) {
        let inner = out.len();
        for row in g.data().chunks(inner) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = *o + v;
            }
        }
        return Tensor::new(shape, out);
    }
    let st = aligned_strides(shape, g.shape());
    let zero = vec![0; g.rank()];
    let gd = g.data();
    for_each_broadcast(g.shape(), &zero, &st, |o, _, it| out[it] = out[it] + gd[o]);
    Tensor::new(shape, out)
}

/// Safe strided GEMM: `c = alpha·op(a)·op(b) + beta·c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Element>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    (rsa, csa): (usize, usize),
    b: &[T],
    (rsb, csb): (usize, usize),
    beta: T,
    c: &mut [T],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, cidx: usize, rs: usize, cs: usize| (r - 1) * rs + (cidx - 1) * cs;
    if k > 0 {
        assert!(a.len() > last(m, k, rsa, csa), "gemm: a view out of bounds");
        assert!(b.len() > last(k, n, rsb, csb), "gemm: b view out of bounds");
    }
    assert!(c.len() > last(m, n, rsc, csc), "gemm: c view out of bounds");
    // SAFETY: bounds checked above; `c` is exclusively borrowed and cannot alias `a`/`b`.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Batch layout of a broadcast matmul.
pub(crate) struct MatmulPlan {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub out_shape: Vec<usize>,
    /// For each output batch: (a batch index, b batch index).
    pub pairs: Vec<(usize, usize)>,
}

pub(crate) fn matmul_plan(a: &[usize], b: &[usize], trans_b: bool) -> Result<MatmulPlan> {
    if a.len() < 2 || b.len() < 2 {
        return Err(TensorError::shape("matmul", a, b));
    }
    let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
    let (kb, n) = if trans_b {
        (b[b.len() - 1], b[b.len() - 2])
    } else {
        (b[b.len() - 2], b[b.len() - 1])
    };
    if k != kb {
        return Err(TensorError::shape("matmul", a, b));
    }
    let (ab, bb) = (&a[..a.len() - 2], &b[..b.len() - 2]);
    let batch = broadcast_shapes(ab, bb).ok_or_else(|| TensorError::shape("matmul", a, b))?;
    let sa = aligned_strides(ab, &batch);
    let sb = aligned_strides(bb, &batch);
    let mut pairs = Vec::with_capacity(numel_of(&batch));
    if batch.is_empty() {
        pairs.push((0, 0));
    } else {
        for_each_broadcast(&batch, &sa, &sb, |_, ia, ib| pairs.push((ia, ib)));
    }
    let mut out_shape = batch;
    out_shape.extend([m, n]);
    Ok(MatmulPlan {
        m,
        k,
        n,
        out_shape,
        pairs,
    })
}

pub(crate) fn batched_matmul<T: Element>(a: &Tensor<T>, b: &Tensor<T>, trans_b: bool) -> Result<Tensor<T>> {
    let plan = matmul_plan(a.shape(), b.shape(), trans_b)?;
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let bstride = if trans_b { (1, k) } else { (n, 1) };
    let mut out = vec![T::zero(); numel_of(&plan.out_shape)];
    let (ad, bd) = (a.data(), b.data());
    let work = |(o, c): (usize, &mut [T])| {
        let (ia, ib) = plan.pairs[o];
        gemm(
            m,
            k,
            n,
            T::one(),
            &ad[ia * m * k..(ia + 1) * m * k],
            (k, 1),
            &bd[ib * k * n..(ib + 1) * k * n],
            bstride,
            T::zero(),
            c,
            (n, 1),
        );
    };
    // Each output block is written by exactly one task, so results do not
    // depend on the thread count.
    if plan.pairs.len() > 1 && m * k * n >= 4096 {
        out.par_chunks_mut(m * n).enumerate().for_each(work);
    } else {
        out.chunks_mut(m * n).enumerate().for_each(work);
    }
    Tensor::new(plan.out_shape, out)
}

/// Gradients of `batched_matmul` for upstream gradient `g`.
pub(crate) fn batched_matmul_backward<T: Element>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    g: &Tensor<T>,
    trans_b: bool,
    need_a: bool,
    need_b: bool,
) -> Result<(Option<Tensor<T>>, Option<Tensor<T>>)> {
    let plan = matmul_plan(a.shape(), b.shape(), trans_b)?;
    let (m, k, n) = (plan.m, plan.k, plan.n);
    let (ad, bd, gd) = (a.data(), b.data(), g.data());
    let mut ga = need_a.then(|| vec![T::zero(); a.numel()]);
    let mut gb = need_b.then(|| vec![T::zero(); b.numel()]);
    for (o, &(ia, ib)) in plan.pairs.iter().enumerate() {
        let gblk = &gd[o * m * n..(o + 1) * m * n];
        let ablk = &ad[ia * m * k..(ia + 1) * m * k];
        let bblk = &bd[ib * k * n..(ib + 1) * k * n];
        if let Some(ga) = ga.as_mut() {
            // dA = G · op(B)ᵀ
            let bt = if trans_b { (k, 1) } else { (1, n) };
            gemm(m, n, k, T::one(), gblk, (n, 1), bblk, bt, T::one(), &mut ga[ia * m * k..(ia + 1) * m * k], (k, 1));
        }
        if let Some(gb) = gb.as_mut() {
            let dst = &mut gb[ib * k * n..(ib + 1) * k * n];
            if trans_b {
                // B is n×k: dB = Gᵀ · A
                gemm(n, m, k, T::one(), gblk, (1, n), ablk, (k, 1), T::one(), dst, (k, 1));
            } else {
                // dB = Aᵀ · G
                gemm(k, m, n, T::one(), ablk, (1, k), gblk, (n, 1), T::one(), dst, (n, 1));
            }
        }
    }
    Ok((
        ga.map(|d| Tensor::new(a.shape(), d)).transpose()?,
        gb.map(|d| Tensor::new(b.shape(), d)).transpose()?,
    ))
}

pub(crate) fn permute<T: Element>(x: &Tensor<T>, perm: &[usize]) -> Result<Tensor<T>> {
    let rank = x.rank();
    let mut seen = vec![false; rank];
    if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
        return Err(TensorError::arg(format!(
            "invalid permutation {perm:?} for rank {rank}"
        )));
    }
    let src = strides(x.shape());
    let out_shape: Vec<usize> = perm.iter().map(|&p| x.shape()[p]).collect();
    let sx: Vec<usize> = perm.iter().map(|&p| src[p]).collect();
    let zero = vec![0; rank];
    let xd = x.data();
    let mut out = vec![T::zero(); x.numel()];
    for_each_broadcast(&out_shape, &sx, &zero, |o, ix, _| out[o] = xd[ix]);
    Tensor::new(out_shape, out)
}

pub(crate) fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// (outer, axis extent, inner) split of a shape around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast_shapes(&[2, 3], &[3]), Some(vec![2, 3]));
        assert_eq!(broadcast_shapes(&[2, 1, 4], &[3, 1]), Some(vec![2, 3, 4]));
        assert_eq!(broadcast_shapes(&[2, 3], &[2]), None);
    }

    #[test]
    fn broadcast_middle_axis_and_reduce_back() {
        let a = t(&[2, 1, 2], &[1., 2., 3., 4.]);
        let b = t(&[3, 1], &[10., 20., 30.]);
        let c = broadcast_binary(&a, &b, |x, y| x + y, "add").unwrap();
        assert_eq!(c.shape(), &[2, 3, 2]);
        assert_eq!(*c.at(&[1, 2, 1]), 34.0);
        let r = reduce_to_shape(&c, &[3, 1]).unwrap();
        // each b entry was used 4 times; sum of a is 10
        assert_eq!(r.data(), &[10. + 40., 10. + 80., 10. + 120.]);
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let i2 = t(&[2, 2], &[1., 0., 0., 1.]);
        let m = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(batched_matmul(&i2, &m, false).unwrap(), m);
        let a = t(&[1, 2], &[1., 2.]);
        let b = t(&[2, 1], &[3., 4.]);
        assert_eq!(batched_matmul(&a, &b, false).unwrap().data(), &[11.]);
    }

    #[test]
    fn matmul_transposed_b_matches_explicit_transpose() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = t(&[4, 3], &(0..12).map(|v| v as f64).collect::<Vec<_>>());
        let bt = permute(&b, &[1, 0]).unwrap();
        assert_eq!(batched_matmul(&a, &b, true).unwrap(), batched_matmul(&a, &bt, false).unwrap());
    }

    #[test]
    fn matmul_broadcasts_batch() {
        let a = t(&[1, 2, 2], &[1., 0., 0., 1.]);
        let b = t(&[3, 2, 2], &(0..12).map(|v| v as f64).collect::<Vec<_>>());
        let c = batched_matmul(&a, &b, false).unwrap();
        assert_eq!(c, b);
        assert!(batched_matmul(&t(&[2, 3], &[0.; 6]), &t(&[2, 3], &[0.; 6]), false).is_err());
    }

    #[test]
    fn permute_roundtrip() {
        let x = t(&[2, 3, 4], &(0..24).map(|v| v as f64).collect::<Vec<_>>());
        let p = permute(&x, &[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(*p.at(&[3, 1, 2]), *x.at(&[1, 2, 3]));
        let back = permute(&p, &inverse_permutation(&[2, 0, 1])).unwrap();
        assert_eq!(back, x);
    }
}
